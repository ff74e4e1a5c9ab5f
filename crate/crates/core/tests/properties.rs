use std::path::Path;

use proptest::prelude::*;

use mtgender_core::attribution::{aggregate, signed_max_abs, AttributionTensor};
use mtgender_core::corpus::{
    parse_corpus_str, Corpus, Gender, ParseOptions, Stereotype, WinoMtInstance,
};
use mtgender_core::debias::{build_fewshot_prompt, Exemplar, HumanTranslations, Stratum};
use mtgender_core::gnt::{analyze_gnt, GntRecord};
use mtgender_core::lexicon::{parse_lexicon_str, PredictedGender};

const FILLER: [&str; 6] = ["asked", "the", "guard", "because", "was", "late"];

prop_compose! {
    fn instance()(
        gold in 0..3usize,
        pro in any::<bool>(),
        filler in prop::collection::vec(0..FILLER.len(), 2..8),
        pron_at in 0..8usize,
        prof in prop::sample::select(vec!["nurse", "developer", "chief"]),
    ) -> WinoMtInstance {
        let (gold, pronoun) = [(Gender::Male, "he"), (Gender::Female, "she"), (Gender::Neutral, "they")][gold];
        let mut words: Vec<&str> = vec!["The", prof];
        words.extend(filler.iter().map(|&i| FILLER[i]));
        let at = 2 + pron_at % (words.len() - 1);
        words.insert(at, pronoun);
        let stereotype = match (gold, pro) {
            (Gender::Neutral, _) => Stereotype::None,
            (_, true) => Stereotype::Pro,
            (_, false) => Stereotype::Anti,
        };
        WinoMtInstance::new("x", gold, at, words.join(" "), prof, stereotype).unwrap()
    }
}

fn tensor_strategy() -> impl Strategy<Value = AttributionTensor> {
    (1..5usize, 1..5usize, 1..4usize).prop_flat_map(|(s, t, h)| {
        (
            prop::collection::vec(-1.0f32..1.0, s * t * h),
            prop::collection::vec(any::<bool>(), s),
            prop::collection::vec(any::<bool>(), t),
        )
            .prop_map(move |(scores, s_new, t_new)| {
                let map = |starts: &[bool]| {
                    let mut word = 0;
                    starts
                        .iter()
                        .enumerate()
                        .map(|(i, &new)| {
                            if i > 0 && new {
                                word += 1;
                            }
                            word
                        })
                        .collect::<Vec<usize>>()
                };
                AttributionTensor {
                    instance_id: "p".into(),
                    source_tokens: (0..s).map(|i| format!("s{i}")).collect(),
                    target_tokens: (0..t).map(|i| format!("t{i}")).collect(),
                    hidden_size: h,
                    source_word_map: map(&s_new),
                    target_word_map: map(&t_new),
                    scores,
                    metadata: Default::default(),
                }
            })
    })
}

/// Repeats source token `i` (same word, same scores).
fn duplicate_source_token(t: &AttributionTensor, i: usize) -> AttributionTensor {
    let (tl, h) = (t.target_tokens.len(), t.hidden_size);
    let mut out = t.clone();
    let row: Vec<f32> = t.scores[i * tl * h..(i + 1) * tl * h].to_vec();
    out.scores.splice((i + 1) * tl * h..(i + 1) * tl * h, row);
    out.source_tokens
        .insert(i + 1, format!("{}'", t.source_tokens[i]));
    out.source_word_map.insert(i + 1, t.source_word_map[i]);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn corpus_tsv_round_trips(instances in prop::collection::vec(instance(), 1..20)) {
        let instances: Vec<WinoMtInstance> = instances
            .into_iter()
            .enumerate()
            .map(|(n, mut i)| { i.id = format!("line:{}", n + 1); i })
            .collect();
        let corpus = Corpus::new(("en".into(), "es".into()), instances).unwrap();
        let text = corpus.to_tsv();
        let back = parse_corpus_str(&text, Path::new("mem"), &ParseOptions::default()).unwrap();
        prop_assert_eq!(back.instances(), corpus.instances());
        prop_assert_eq!(back.to_tsv(), text);
    }

    #[test]
    fn signed_max_abs_picks_earliest_largest(values in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let got = signed_max_abs(values.iter().copied()).unwrap();
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let first = values.iter().copied().find(|v| v.abs() == max).unwrap();
        prop_assert_eq!(got.to_bits(), first.to_bits());
    }

    #[test]
    fn duplicated_subtoken_leaves_aggregate_unchanged(t in tensor_strategy(), pick in any::<prop::sample::Index>()) {
        let i = pick.index(t.source_tokens.len());
        let a = aggregate(&t).unwrap();
        let b = aggregate(&duplicate_source_token(&t, i)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn aggregate_is_non_negative_and_shaped(t in tensor_strategy()) {
        let m = aggregate(&t).unwrap();
        prop_assert_eq!(m.source_words, t.source_words());
        prop_assert_eq!(m.target_words, t.target_words());
        prop_assert!(m.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn matching_ignores_case_and_punctuation(
        fem in any::<bool>(),
        upper in prop::collection::vec(any::<bool>(), 3),
        punct in prop::sample::select(vec!["", ",", ".", "!", "\""]),
    ) {
        let lexicon = parse_lexicon_str("nurse\tenfermero\tenfermera\n", "es").unwrap();
        let plain = if fem { "la enfermera llegó" } else { "el enfermero llegó" };
        let noisy: Vec<String> = plain
            .split(' ')
            .zip(&upper)
            .map(|(w, &u)| if u { w.to_uppercase() } else { w.to_string() })
            .collect();
        let noisy = format!("{}{punct} {}{punct} {}", noisy[0], noisy[1], noisy[2]);
        let a = lexicon.match_profession(plain, "nurse").unwrap();
        let b = lexicon.match_profession(&noisy, "nurse").unwrap();
        prop_assert_eq!(a.predicted_gender, if fem { PredictedGender::Female } else { PredictedGender::Male });
        prop_assert_eq!(a.predicted_gender, b.predicted_gender);
        prop_assert_eq!(a.word_index, b.word_index);
    }

    #[test]
    fn gnt_summary_ignores_record_order(
        outputs in prop::collection::vec(0..4usize, 1..20),
        seed in any::<u64>(),
    ) {
        let lexicon = parse_lexicon_str("person\tel persona\tla persona\tpersona\nnurse\tenfermero\tenfermera\n", "es").unwrap();
        let texts = ["el enfermero", "la enfermera", "una persona", "alguien"];
        let records: Vec<GntRecord> = outputs
            .iter()
            .enumerate()
            .map(|(n, &k)| GntRecord {
                instance_id: format!("g{n}"),
                gold_gender: Gender::Neutral,
                profession_match: lexicon.match_profession(texts[k], "nurse").unwrap(),
                triple: None,
            })
            .collect();
        let mut shuffled = records.clone();
        let len = shuffled.len();
        let mut state = seed;
        for i in (1..len).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(analyze_gnt(&records).unwrap(), analyze_gnt(&shuffled).unwrap());
    }

    #[test]
    fn fewshot_prompt_is_deterministic_and_framed(
        pairs in prop::collection::vec(("[a-z ]{1,20}", "[a-z ]{1,20}"), 1..5),
        query in "[a-z ]{1,20}",
    ) {
        let exemplars: Vec<Exemplar> = pairs
            .iter()
            .enumerate()
            .map(|(i, (s, t))| Exemplar {
                instance_id: format!("e{i}"),
                source_text: s.clone(),
                human_translations: HumanTranslations { nt_female: t.clone(), nt_male: t.clone() },
                stratum: Stratum::all()[i % 4],
                a_pron_prof: None,
                translation: t.clone(),
            })
            .collect();
        let a = build_fewshot_prompt(&exemplars, &query, "German");
        let b = build_fewshot_prompt(&exemplars, &query, "German");
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.matches("\n\n\n").count(), exemplars.len());
        prop_assert_eq!(a.matches("Q: Translate ").count(), exemplars.len() + 1);
        let suffix = format!("Q: Translate {query} to German?\n\nA:");
        prop_assert!(a.ends_with(&suffix));
    }
}
