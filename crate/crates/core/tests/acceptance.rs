//! Acceptance checks. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits nonzero if any fail.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mtgender_core::attribution::{
    aggregate, integrated_gradients, signed_max_abs, AttributionTensor, AttributionTriple,
    Embeddings, ReferenceModel, ScalarFunction,
};
use mtgender_core::client::{
    translate_batch, Backend, DecodingConfig, MockRule, MockTranslator, PromptTemplate,
    TranslationRequest,
};
use mtgender_core::corpus::{Corpus, Gender, Stereotype, WinoMtInstance};
use mtgender_core::debias::{
    build_fewshot_prompt, build_pool, select_exemplars, Exemplar, HumanTranslations, Stratum,
};
use mtgender_core::lexicon::{parse_lexicon_str, PredictedGender};
use mtgender_core::metrics::{accuracy, delta_g, delta_s, BiasReport, EvaluationRecord};
use mtgender_core::pipeline::{evaluation_records, match_corpus};
use mtgender_core::report::{
    parse_structured, render_structured, summary_row, FullReport, RunManifest,
};
use mtgender_core::stats::{bootstrap_compare, BootstrapConfig, BootstrapMetric};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- IG

fn ig_completeness() -> Check {
    let start = Instant::now();
    let (mut worst_512, mut worst_16) = (0.0f64, 0.0f64);
    for seed in 0..20u64 {
        let h = 4 + (seed as usize % 13);
        let s = 1 + (seed as usize % 6);
        let model = ReferenceModel::new(seed, h, h);
        let tokens: Vec<String> = (0..s).map(|i| format!("tok{seed}_{i}")).collect();
        let x = model.embed(&tokens);
        let zero = Embeddings::zeros(x.rows, x.dim);
        // One scalar output per model.
        let f = model.target("objetivo");
        let diff = f.value(&x) - f.value(&zero);
        let at = |m| {
            integrated_gradients(&f, &x, &zero, m)
                .map(|a| a.sum())
                .map_err(|e| e.to_string())
        };
        worst_512 = worst_512.max((at(512)? - diff).abs());
        worst_16 = worst_16.max((at(16)? - diff).abs() / diff.abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(worst_512 <= 1e-3, || {
        format!("m=512 residual {worst_512:.3e} > 1e-3")
    })?;
    ensure(worst_16 <= 0.05, || {
        format!("m=16 relative residual {:.2}% > 5%", worst_16 * 100.0)
    })?;
    ensure(elapsed < 5.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "worst |residual| {worst_512:.2e} at m=512, worst relative {:.2}% at m=16, {elapsed:.2}s",
        worst_16 * 100.0
    ))
}

struct Linear(Embeddings);

impl ScalarFunction for Linear {
    fn value(&self, x: &Embeddings) -> f64 {
        self.0.data.iter().zip(&x.data).map(|(w, v)| w * v).sum()
    }

    fn gradient(&self, _: &Embeddings) -> Embeddings {
        self.0.clone()
    }
}

fn ig_linear_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let rows = rng.gen_range(1..=6);
        let dim = rng.gen_range(1..=16);
        let mut sample = || {
            Embeddings::new(
                rows,
                dim,
                (0..rows * dim).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            )
        };
        let w = sample().map_err(|e| e.to_string())?;
        let x = sample().map_err(|e| e.to_string())?;
        let f = Linear(w.clone());
        for m in [1, 4, 16] {
            let a = integrated_gradients(&f, &x, &Embeddings::zeros(rows, dim), m)
                .map_err(|e| e.to_string())?;
            for ((ai, wi), xi) in a.data.iter().zip(&w.data).zip(&x.data) {
                worst = worst.max((ai - wi * xi).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max |a_i - w_i x_i| = {worst:.1e} over 150 cases"))
}

// ---------------------------------------------------------------- aggregation

fn random_word_map(rng: &mut ChaCha8Rng, tokens: usize) -> Vec<usize> {
    let mut map = vec![0usize];
    for _ in 1..tokens {
        let last = *map.last().unwrap();
        map.push(if rng.gen_bool(0.4) { last } else { last + 1 });
    }
    map
}

fn random_tensor(rng: &mut ChaCha8Rng, id: usize) -> AttributionTensor {
    let s = rng.gen_range(1..=9);
    let t = rng.gen_range(1..=9);
    let h = rng.gen_range(1..=12);
    let mut scores: Vec<f32> = (0..s * t * h)
        .map(|_| rng.gen_range(-1.0f32..1.0))
        .collect();
    // Force some exact magnitude ties so the tie rule is exercised.
    for k in (0..scores.len()).step_by(5) {
        if k + 1 < scores.len() {
            scores[k + 1] = -scores[k];
        }
    }
    AttributionTensor {
        instance_id: format!("r{id}"),
        source_tokens: (0..s).map(|i| format!("s{i}")).collect(),
        target_tokens: (0..t).map(|i| format!("t{i}")).collect(),
        hidden_size: h,
        source_word_map: random_word_map(rng, s),
        target_word_map: random_word_map(rng, t),
        scores,
        metadata: Default::default(),
    }
}

/// Straightforward nested loops: for each word pair and hidden unit, scan
/// target tokens, within each scan source tokens, keep the strictly larger
/// magnitude; then take the 2-norm.
fn naive_aggregate(t: &AttributionTensor) -> Vec<f64> {
    let s_words = t.source_word_map.iter().max().unwrap() + 1;
    let t_words = t.target_word_map.iter().max().unwrap() + 1;
    let (s_len, t_len, h) = (t.source_tokens.len(), t.target_tokens.len(), t.hidden_size);
    let mut out = Vec::new();
    for sw in 0..s_words {
        for tw in 0..t_words {
            let mut sq = 0.0f64;
            for d in 0..h {
                let mut outer: Option<f64> = None;
                for k in 0..t_len {
                    if t.target_word_map[k] != tw {
                        continue;
                    }
                    let mut inner: Option<f64> = None;
                    for i in 0..s_len {
                        if t.source_word_map[i] != sw {
                            continue;
                        }
                        let v = t.scores[(i * t_len + k) * h + d] as f64;
                        if inner.is_none_or(|b| v.abs() > b.abs()) {
                            inner = Some(v);
                        }
                    }
                    let v = inner.unwrap();
                    if outer.is_none_or(|b| v.abs() > b.abs()) {
                        outer = Some(v);
                    }
                }
                let v = outer.unwrap();
                sq += v * v;
            }
            out.push(sq.sqrt());
        }
    }
    out
}

fn aggregation_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 0..100 {
        let tensor = random_tensor(&mut rng, n);
        let got = aggregate(&tensor).map_err(|e| e.to_string())?;
        let want = naive_aggregate(&tensor);
        let same = got.values.len() == want.len()
            && got
                .values
                .iter()
                .zip(&want)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, || {
            format!("tensor {n} differs from the nested-loop reference")
        })?;
    }
    let f = signed_max_abs([0.01, -0.3, 0.1]);
    ensure(f == Some(-0.3), || format!("f([0.01, -0.3, 0.1]) = {f:?}"))?;
    Ok("100 random tensors bit-identical; f([0.01, -0.3, 0.1]) = -0.3".into())
}

// ---------------------------------------------------------------- metrics

fn record(
    i: usize,
    gold: Gender,
    pred: PredictedGender,
    stereotype: Stereotype,
) -> EvaluationRecord {
    EvaluationRecord {
        instance_id: format!("r{i}"),
        profession: "nurse".into(),
        gold_gender: gold,
        stereotype,
        predicted_gender: pred,
        correct: matches!(
            (gold, pred),
            (Gender::Male, PredictedGender::Male) | (Gender::Female, PredictedGender::Female)
        ),
        triple: None,
    }
}

/// Confusion-matrix oracle: rows gold {M, F}, columns predicted {M, F, Unknown}.
struct Oracle {
    acc: f64,
    delta_g: Option<f64>,
    delta_s: Option<f64>,
}

fn oracle(items: &[(usize, usize, usize)]) -> Oracle {
    // (gold 0=M 1=F, pred 0=M 1=F 2=U, stereotype 0=pro 1=anti)
    let mut cm = [[0usize; 3]; 2];
    let mut by_stereo = [[0usize; 2]; 2]; // [stereo][correct?]
    for &(g, p, s) in items {
        cm[g][p] += 1;
        by_stereo[s][usize::from(g == p)] += 1;
    }
    let n = items.len();
    let acc = (cm[0][0] + cm[1][1]) as f64 / n as f64;
    let f1 = |c: usize| {
        let tp = cm[c][c];
        let gold: usize = cm[c].iter().sum();
        let pred = cm[0][c] + cm[1][c];
        if gold + pred == 0 {
            0.0
        } else {
            (2 * tp) as f64 / (gold + pred) as f64
        }
    };
    let has_both = cm[0].iter().sum::<usize>() > 0 && cm[1].iter().sum::<usize>() > 0;
    let sub_acc = |s: usize| by_stereo[s][1] as f64 / (by_stereo[s][0] + by_stereo[s][1]) as f64;
    let has_pro_anti =
        by_stereo[0].iter().sum::<usize>() > 0 && by_stereo[1].iter().sum::<usize>() > 0;
    Oracle {
        acc,
        delta_g: has_both.then(|| f1(0) - f1(1)),
        delta_s: has_pro_anti.then(|| sub_acc(0) - sub_acc(1)),
    }
}

const GOLDS: [Gender; 2] = [Gender::Male, Gender::Female];
const PREDS: [PredictedGender; 3] = [
    PredictedGender::Male,
    PredictedGender::Female,
    PredictedGender::Unknown,
];
const STEREOS: [Stereotype; 2] = [Stereotype::Pro, Stereotype::Anti];

fn compare_to_oracle(items: &[(usize, usize, usize)]) -> Result<(), String> {
    let records: Vec<EvaluationRecord> = items
        .iter()
        .enumerate()
        .map(|(i, &(g, p, s))| record(i, GOLDS[g], PREDS[p], STEREOS[s]))
        .collect();
    let o = oracle(items);
    let acc = accuracy(&records).map_err(|e| e.to_string())?;
    let dg = delta_g(&records).ok();
    let ds = delta_s(&records).ok();
    let bits = |v: Option<f64>| v.map(f64::to_bits);
    ensure(
        acc.to_bits() == o.acc.to_bits()
            && bits(dg) == bits(o.delta_g)
            && bits(ds) == bits(o.delta_s),
        || {
            format!(
                "{items:?}: got ({acc}, {dg:?}, {ds:?}), oracle ({}, {:?}, {:?})",
                o.acc, o.delta_g, o.delta_s
            )
        },
    )
}

fn metrics_oracle() -> Check {
    let mut cases = 0usize;
    for n in 1..=6usize {
        // Every gold/prediction assignment, stereotype tags alternating.
        for code in 0..6usize.pow(n as u32) {
            let mut c = code;
            let items: Vec<(usize, usize, usize)> = (0..n)
                .map(|i| {
                    let v = c % 6;
                    c /= 6;
                    (v / 3, v % 3, i % 2)
                })
                .collect();
            compare_to_oracle(&items)?;
            cases += 1;
        }
    }
    for n in 1..=4usize {
        // Also every stereotype tagging.
        for code in 0..12usize.pow(n as u32) {
            let mut c = code;
            let items: Vec<(usize, usize, usize)> = (0..n)
                .map(|_| {
                    let v = c % 12;
                    c /= 12;
                    (v / 6, (v / 2) % 3, v % 2)
                })
                .collect();
            compare_to_oracle(&items)?;
            cases += 1;
        }
    }
    let hand: Vec<EvaluationRecord> = [
        (Gender::Male, PredictedGender::Male),
        (Gender::Male, PredictedGender::Male),
        (Gender::Female, PredictedGender::Male),
        (Gender::Female, PredictedGender::Female),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(g, p))| record(i, g, p, Stereotype::Pro))
    .collect();
    let acc = accuracy(&hand).map_err(|e| e.to_string())?;
    let dg = delta_g(&hand).map_err(|e| e.to_string())?;
    ensure(acc == 0.75, || format!("hand case Acc {acc}"))?;
    ensure(
        (dg - 2.0 / 15.0).abs() <= 1e-9 && (dg - 0.1333).abs() < 1e-4,
        || format!("hand case ΔG {dg}"),
    )?;
    Ok(format!(
        "{cases} assignments match the oracle bit-for-bit; hand case Acc 0.75, ΔG {dg:.4}"
    ))
}

fn metric_symmetry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for set in 0..200 {
        let n = rng.gen_range(2..40);
        let mut records: Vec<EvaluationRecord> = (0..n)
            .map(|i| {
                record(
                    i,
                    GOLDS[rng.gen_range(0..2)],
                    PREDS[rng.gen_range(0..3)],
                    STEREOS[rng.gen_range(0..2)],
                )
            })
            .collect();
        // Guarantee both genders and both stereotypes are present.
        records[0].gold_gender = Gender::Male;
        records[0].stereotype = Stereotype::Pro;
        records[1].gold_gender = Gender::Female;
        records[1].stereotype = Stereotype::Anti;
        for r in records.iter_mut() {
            r.correct = matches!(
                (r.gold_gender, r.predicted_gender),
                (Gender::Male, PredictedGender::Male) | (Gender::Female, PredictedGender::Female)
            );
        }
        let relabeled: Vec<EvaluationRecord> = records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.gold_gender = if r.gold_gender == Gender::Male {
                    Gender::Female
                } else {
                    Gender::Male
                };
                r.predicted_gender = match r.predicted_gender {
                    PredictedGender::Male => PredictedGender::Female,
                    PredictedGender::Female => PredictedGender::Male,
                    PredictedGender::Unknown => PredictedGender::Unknown,
                };
                r
            })
            .collect();
        let swapped: Vec<EvaluationRecord> = records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.stereotype = if r.stereotype == Stereotype::Pro {
                    Stereotype::Anti
                } else {
                    Stereotype::Pro
                };
                r
            })
            .collect();
        let dg = delta_g(&records).map_err(|e| e.to_string())?;
        let dg2 = delta_g(&relabeled).map_err(|e| e.to_string())?;
        let ds = delta_s(&records).map_err(|e| e.to_string())?;
        let ds2 = delta_s(&swapped).map_err(|e| e.to_string())?;
        ensure(dg2 == -dg, || format!("set {set}: ΔG {dg} relabeled {dg2}"))?;
        ensure(ds2 == -ds, || format!("set {set}: ΔS {ds} swapped {ds2}"))?;
    }
    Ok("200 random record sets: relabel negates ΔG, Pro/Anti swap negates ΔS".into())
}

// ---------------------------------------------------------------- mock end-to-end

const PROFESSIONS: [(&str, &str, &str, Gender); 8] = [
    ("developer", "desarrollador", "desarrolladora", Gender::Male),
    ("mechanic", "mecánico", "mecánica", Gender::Male),
    ("carpenter", "carpintero", "carpintera", Gender::Male),
    ("chief", "jefe", "jefa", Gender::Male),
    ("nurse", "enfermero", "enfermera", Gender::Female),
    ("secretary", "secretario", "secretaria", Gender::Female),
    ("cleaner", "limpiador", "limpiadora", Gender::Female),
    ("hairdresser", "peluquero", "peluquera", Gender::Female),
];

/// 64 instances: each profession 4 pro + 4 anti, giving 16 per (stereotype, gender) cell.
fn fixture() -> Result<(Corpus, String), String> {
    let others = ["guard", "baker", "clerk", "writer"];
    let mut instances = Vec::new();
    for (en, _, _, stereo_gender) in PROFESSIONS {
        for k in 0..8 {
            let stereotype = if k < 4 {
                Stereotype::Pro
            } else {
                Stereotype::Anti
            };
            let gold = match (stereotype, stereo_gender) {
                (Stereotype::Pro, g) => g,
                (_, Gender::Male) => Gender::Female,
                _ => Gender::Male,
            };
            let pronoun = if gold == Gender::Male { "he" } else { "she" };
            let text = format!(
                "The {en} thanked the {} because {pronoun} had finished early .",
                others[k % 4]
            );
            let id = format!("{en}-{k}");
            instances.push(
                WinoMtInstance::new(id, gold, 6, text, en, stereotype)
                    .map_err(|e| e.to_string())?,
            );
        }
    }
    let lexicon: String = PROFESSIONS
        .iter()
        .map(|(en, m, f, _)| format!("{en}\t{m}\t{f}\n"))
        .collect();
    Ok((
        Corpus::new(("en".into(), "es".into()), instances).map_err(|e| e.to_string())?,
        lexicon,
    ))
}

fn run_mock(
    corpus: &Corpus,
    lexicon: &str,
    rule: MockRule,
) -> Result<Vec<EvaluationRecord>, String> {
    let lexicon = parse_lexicon_str(lexicon, "es").map_err(|e| e.to_string())?;
    let requests: Vec<TranslationRequest> = corpus
        .instances()
        .iter()
        .map(|i| TranslationRequest::from_template(i, PromptTemplate::T1, "English", "Spanish"))
        .collect();
    let backend = Backend::Mock(MockTranslator::new(rule, lexicon.clone()));
    let out = translate_batch(&requests, &DecodingConfig::default(), &backend, None)
        .map_err(|e| e.to_string())?;
    let translations: BTreeMap<String, String> =
        out.into_iter().map(|r| (r.instance_id, r.output)).collect();
    let matches = match_corpus(corpus, &lexicon, &translations).map_err(|e| e.to_string())?;
    evaluation_records(corpus, &matches, None).map_err(|e| e.to_string())
}

fn mock_end_to_end() -> Check {
    let start = Instant::now();
    let (corpus, lexicon) = fixture()?;
    ensure(corpus.len() == 64, || {
        format!("fixture has {} instances", corpus.len())
    })?;
    let stereo = run_mock(&corpus, &lexicon, MockRule::StereotypeFollower)?;
    let pronoun = run_mock(&corpus, &lexicon, MockRule::PronounFollower)?;
    let summarize = |records: &[EvaluationRecord]| -> Result<String, String> {
        let r = BiasReport::compute(records).map_err(|e| e.to_string())?;
        Ok(summary_row(r.accuracy, r.delta_g, r.delta_s))
    };
    let s = summarize(&stereo)?;
    let p = summarize(&pronoun)?;
    // Row order: Acc ΔG ΔS.
    ensure(s == "50.0 0.0 100.0", || format!("stereotype-follower {s}"))?;
    ensure(p == "100.0 0.0 0.0", || format!("pronoun-follower {p}"))?;
    let cmp = bootstrap_compare(&pronoun, &stereo, &BootstrapConfig::default())
        .map_err(|e| e.to_string())?;
    ensure(cmp.p_value == 0.0, || {
        format!("bootstrap p = {}", cmp.p_value)
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "stereotype-follower Acc/ΔG/ΔS {s}; pronoun-follower {p}; p = {}; {elapsed:.2}s",
        cmp.p_value
    ))
}

// ---------------------------------------------------------------- exemplar selection

fn exemplar_selection() -> Check {
    // 16 instances per stratum; instance k of a stratum is misgendered under
    // zero-shot iff k % 3 == 0, and only misgendered ones get low a_pron_prof.
    let mut records = Vec::new();
    for stratum in Stratum::all() {
        for k in 0..16usize {
            let misgendered = k % 3 == 0;
            let wrong = if stratum.gender == Gender::Male {
                PredictedGender::Female
            } else {
                PredictedGender::Male
            };
            let right = if stratum.gender == Gender::Male {
                PredictedGender::Male
            } else {
                PredictedGender::Female
            };
            let mut r = record(
                0,
                stratum.gender,
                if misgendered { wrong } else { right },
                stratum.stereotype,
            );
            r.instance_id = format!("{stratum}-{k:02}");
            let a_pron = if misgendered {
                0.01 * (k + 1) as f64
            } else {
                1.0 + 0.01 * k as f64
            };
            r.triple = Some(AttributionTriple {
                a_ctrl_prof: 0.5,
                a_prof_prof: 0.5,
                a_pron_prof: a_pron,
                source_prof_index: 1,
                source_pron_index: 6,
                target_prof_index: 1,
                matched: true,
            });
            records.push(r);
        }
    }
    let by_id: BTreeMap<&str, &EvaluationRecord> = records
        .iter()
        .map(|r| (r.instance_id.as_str(), r))
        .collect();
    let mut serialized = Vec::new();
    for seed in [4u64, 4, 99] {
        let pools = build_pool(&records, 0.25).map_err(|e| e.to_string())?;
        for (stratum, pool) in &pools.strata {
            ensure(pool.len() == 4, || {
                format!("{stratum}: pool of {}", pool.len())
            })?;
        }
        let sel = select_exemplars(&pools, 4, seed).map_err(|e| e.to_string())?;
        let strata: Vec<Stratum> = sel.exemplars.iter().map(|e| e.stratum).collect();
        ensure(strata == Stratum::all().to_vec(), || {
            format!("strata {strata:?}")
        })?;
        for e in &sel.exemplars {
            let r = by_id[e.instance_id.as_str()];
            ensure(!r.correct, || {
                format!("{} was translated correctly", e.instance_id)
            })?;
            ensure(
                r.stereotype == e.stratum.stereotype && r.gold_gender == e.stratum.gender,
                || format!("{} is outside its stratum", e.instance_id),
            )?;
        }
        serialized.push(serde_json::to_string(&sel).map_err(|e| e.to_string())?);
    }
    ensure(serialized[0] == serialized[1], || {
        "same seed produced different selections".into()
    })?;
    Ok("all 4 exemplars misgendered, one per stratum; seed 4 reproduces byte-identically".into())
}

// ---------------------------------------------------------------- prompts

fn prompt_golden() -> Check {
    let pairs = [
        (
            "The developer argued with the designer because she did not like the design.",
            "La desarrolladora discutió con el diseñador porque no le gustó el diseño.",
        ),
        (
            "The nurse helped the mechanic because he was hurt.",
            "El enfermero ayudó a la mecánica porque estaba herido.",
        ),
        (
            "The chief thanked the secretary because she was kind.",
            "La jefa le agradeció al secretario porque era amable.",
        ),
        (
            "The cleaner called the carpenter because he was late.",
            "El limpiador llamó a la carpintera porque llegaba tarde.",
        ),
    ];
    let exemplars: Vec<Exemplar> = pairs
        .iter()
        .zip(Stratum::all())
        .enumerate()
        .map(|(i, ((src, tgt), stratum))| Exemplar {
            instance_id: format!("ex{i}"),
            source_text: src.to_string(),
            human_translations: HumanTranslations {
                nt_female: tgt.to_string(),
                nt_male: tgt.to_string(),
            },
            stratum,
            a_pron_prof: None,
            translation: tgt.to_string(),
        })
        .collect();
    let got = build_fewshot_prompt(
        &exemplars,
        "The baker paid the clerk because she was generous.",
        "Spanish",
    );
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fewshot_4.txt");
    let golden =
        std::fs::read(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
    ensure(got.as_bytes() == golden.as_slice(), || {
        let at = got
            .bytes()
            .zip(&golden)
            .position(|(a, b)| a != *b)
            .unwrap_or(got.len().min(golden.len()));
        format!("first difference at byte {at}")
    })?;
    Ok(format!(
        "{} bytes identical to the golden file",
        golden.len()
    ))
}

// ---------------------------------------------------------------- bootstrap

/// 100 ids, half male; A is right on the first 25 of each gender, B on the rest.
fn disjoint_pair() -> (Vec<EvaluationRecord>, Vec<EvaluationRecord>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..100 {
        let gold = if i % 2 == 0 {
            Gender::Male
        } else {
            Gender::Female
        };
        let (right, wrong) = if gold == Gender::Male {
            (PredictedGender::Male, PredictedGender::Female)
        } else {
            (PredictedGender::Female, PredictedGender::Male)
        };
        let a_right = i / 2 < 25;
        a.push(record(
            i,
            gold,
            if a_right { right } else { wrong },
            Stereotype::Pro,
        ));
        b.push(record(
            i,
            gold,
            if a_right { wrong } else { right },
            Stereotype::Pro,
        ));
    }
    (a, b)
}

/// Independent Monte-Carlo estimate with its own generator and macro-F1.
fn monte_carlo_p(
    a: &[EvaluationRecord],
    b: &[EvaluationRecord],
    n: usize,
    fraction: f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (fraction * a.len() as f64).round() as usize;
    let macro_f1 = |sys: &[EvaluationRecord], idx: &[usize]| -> Option<f64> {
        let mut total = 0.0;
        for (g, p) in [
            (Gender::Male, PredictedGender::Male),
            (Gender::Female, PredictedGender::Female),
        ] {
            let gold = idx.iter().filter(|&&i| sys[i].gold_gender == g).count();
            if gold == 0 {
                return None;
            }
            let pred = idx
                .iter()
                .filter(|&&i| sys[i].predicted_gender == p)
                .count();
            let tp = idx
                .iter()
                .filter(|&&i| sys[i].gold_gender == g && sys[i].predicted_gender == p)
                .count();
            let precision = if pred == 0 {
                0.0
            } else {
                tp as f64 / pred as f64
            };
            let recall = tp as f64 / gold as f64;
            total += if tp == 0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
        }
        Some(total / 2.0)
    };
    let mut not_better = 0;
    let mut done = 0;
    while done < n {
        let idx: Vec<usize> = (0..k).map(|_| rng.gen_range(0..a.len())).collect();
        if let (Some(ma), Some(mb)) = (macro_f1(a, &idx), macro_f1(b, &idx)) {
            done += 1;
            if ma <= mb + 1e-12 {
                not_better += 1;
            }
        }
    }
    not_better as f64 / n as f64
}

fn bootstrap_conventions() -> Check {
    let (a, b) = disjoint_pair();
    for seed in [0u64, 1, 42, 20_230_601, u64::MAX] {
        for metric in [BootstrapMetric::MacroF1, BootstrapMetric::Accuracy] {
            let config = BootstrapConfig {
                seed,
                metric,
                ..BootstrapConfig::default()
            };
            let r = bootstrap_compare(&a, &a, &config).map_err(|e| e.to_string())?;
            ensure(r.p_value == 1.0, || {
                format!("identical inputs, seed {seed}: p = {}", r.p_value)
            })?;
        }
    }
    let config = BootstrapConfig {
        resamples: 1000,
        ..BootstrapConfig::default()
    };
    let got = bootstrap_compare(&a, &b, &config).map_err(|e| e.to_string())?;
    ensure(got.metric_a == got.metric_b, || {
        "synthetic pair is not equal-scoring".into()
    })?;
    let oracle = monte_carlo_p(&a, &b, 20_000, 0.30, 5);
    ensure((0.35..=0.65).contains(&got.p_value), || {
        format!("p = {} outside [0.35, 0.65]", got.p_value)
    })?;
    ensure((0.35..=0.65).contains(&oracle), || {
        format!("oracle p = {oracle} outside [0.35, 0.65]")
    })?;
    ensure((got.p_value - oracle).abs() <= 0.06, || {
        format!("p = {} vs oracle {oracle}", got.p_value)
    })?;
    Ok(format!(
        "identical inputs p = 1.0 for 5 seeds; disjoint pair p = {:.3} (oracle {oracle:.3})",
        got.p_value
    ))
}

// ---------------------------------------------------------------- report

fn report_round_trip() -> Check {
    let mut records = Vec::new();
    for i in 0..7 {
        let gold = GOLDS[i % 2];
        let pred = PREDS[(i * 5) % 3];
        let mut r = record(i, gold, pred, STEREOS[(i / 2) % 2]);
        r.triple = Some(AttributionTriple {
            a_ctrl_prof: 1.0 / (i + 3) as f64,
            a_prof_prof: std::f64::consts::PI / (i + 1) as f64,
            a_pron_prof: 0.1 + 0.2 * i as f64,
            source_prof_index: 1,
            source_pron_index: 6,
            target_prof_index: 1,
            matched: true,
        });
        records.push(r);
    }
    let mut report = FullReport::new(RunManifest::new());
    report.bias = Some(BiasReport::compute(&records).map_err(|e| e.to_string())?);
    report.match_rate = Some(2.0 / 3.0);
    let text = render_structured(&report).map_err(|e| e.to_string())?;
    let back = parse_structured(&text).map_err(|e| e.to_string())?;
    ensure(back == report, || {
        "structured report did not round-trip".into()
    })?;
    let row = summary_row(0.651, 0.072, Some(0.351));
    ensure(row == "65.1 7.2 35.1", || format!("table row {row:?}"))?;
    Ok(format!(
        "structured report round-trips exactly; table row {row:?}"
    ))
}

fn main() {
    let checks: [Criterion; 10] = [
        ("ig-completeness", ig_completeness),
        ("ig-linear-exactness", ig_linear_exactness),
        ("aggregation-oracle", aggregation_oracle),
        ("metrics-oracle", metrics_oracle),
        ("metric-symmetry", metric_symmetry),
        ("mock-end-to-end", mock_end_to_end),
        ("exemplar-selection", exemplar_selection),
        ("prompt-golden", prompt_golden),
        ("bootstrap-conventions", bootstrap_conventions),
        ("report-round-trip", report_round_trip),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
