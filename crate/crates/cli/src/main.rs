use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mtgender_core::attribution::{write_tensor, ReferenceModel, DEFAULT_STEPS};
use mtgender_core::client::{
    language_name, load_offline_translations, translate_batch, translations_tsv, Backend,
    DecodingConfig, HttpBackend, MockRule, MockTranslator, PromptTemplate, TranslationCache,
    TranslationRecord, TranslationRequest,
};
use mtgender_core::corpus::{parse_corpus, Corpus, ParseOptions, Stereotype};
use mtgender_core::debias::{
    build_fewshot_prompt, build_pool, load_human_translations, resolve_translations,
    select_exemplars, stratified_pool, NtPolicy, Selection, DEFAULT_EXEMPLARS, DEFAULT_NT_SEED,
    DEFAULT_POOL_FRACTION, DEFAULT_SELECTION_SEED,
};
use mtgender_core::gnt::analyze_gnt;
use mtgender_core::lexicon::{load_lexicon, match_rate, GenderLexicon, ProfessionMatch};
use mtgender_core::metrics::{relative_differences, BiasReport, EvaluationRecord};
use mtgender_core::pipeline::{
    attribute_from_tensors, attribute_with_model, evaluation_records, gnt_records, match_corpus,
    read_jsonl, write_jsonl, MatchRecord, TripleRecord,
};
use mtgender_core::report::{
    file_digest, pct, render, render_structured, render_table, summary_row, Format, FullReport,
    RunManifest,
};
use mtgender_core::stats::{
    bootstrap_compare, BootstrapConfig, BootstrapResult, DEFAULT_BOOTSTRAP_SEED,
};

mod config;

use config::PipelineConfig;

const DEFAULT_MODEL_SEED: u64 = 0;
const DEFAULT_HIDDEN_SIZE: usize = 16;

#[derive(Parser)]
#[command(
    name = "mtgender",
    version,
    about = "Occupational gender bias analysis for machine translation"
)]
struct Cli {
    /// TOML file whose keys mirror the long flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate the corpus (zero-shot template or prepared prompts).
    Translate(TranslateArgs),
    /// Compute attribution triples from `.attr` files or the reference model.
    Attribute(AttributeArgs),
    /// Align translations with the lexicon and predict gender.
    Match(MatchArgs),
    /// Accuracy, ΔG and ΔS over matched translations.
    Evaluate(EvaluateArgs),
    /// Per-cell accuracy and attribution means.
    Disaggregate(RecordsArgs),
    /// Pick few-shot exemplars with the lowest pronoun attribution.
    SelectExemplars(SelectArgs),
    /// Build few-shot prompts for every corpus instance.
    BuildPrompts(PromptArgs),
    /// Paired bootstrap test between two evaluated systems.
    Compare(CompareArgs),
    /// Gender-neutral subset analysis.
    Gnt(GntArgs),
    /// Full report with run manifest.
    Report(ReportArgs),
}

#[derive(Args, Clone, Default)]
struct CorpusArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Stereotype tag for lines without a fifth column (pro|anti|none).
    #[arg(long)]
    stereotype_tag: Option<String>,
    #[arg(long)]
    source_lang: Option<String>,
    #[arg(long)]
    target_lang: Option<String>,
}

#[derive(Args, Clone, Default)]
struct DecodingArgs {
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    num_beams: Option<u32>,
    #[arg(long)]
    top_k: Option<u32>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    penalty_alpha: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
}

#[derive(Args)]
struct TranslateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    decoding: DecodingArgs,
    /// http | offline | mock
    #[arg(long)]
    backend: Option<String>,
    /// stereotype-follower | pronoun-follower | male-default
    #[arg(long)]
    mock_rule: Option<String>,
    /// Lexicon used by the mock backend.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Offline `instance_id<TAB>translation` file.
    #[arg(long)]
    translations: Option<PathBuf>,
    /// Base URL of the serving endpoint (else MTGENDER_ENDPOINT).
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// T1 | T2 | QA
    #[arg(long)]
    template: Option<String>,
    /// Prompts produced by `build-prompts` (overrides --template).
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write full translation records as JSON lines.
    #[arg(long)]
    records_out: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    translations: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AttributeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    matches: PathBuf,
    /// Directory of `.attr` files from an external extractor.
    #[arg(long)]
    attr_dir: Option<PathBuf>,
    /// Use the built-in reference model instead of `.attr` files.
    #[arg(long)]
    reference_model: bool,
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Save the reference model's raw tensors here.
    #[arg(long)]
    write_attr: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    matches: PathBuf,
    #[arg(long)]
    triples: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecordsArgs {
    #[arg(long)]
    records: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    /// Stratified random baseline over the corpus instead of low-attribution pools.
    #[arg(long)]
    random: bool,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    pool_fraction: Option<f64>,
    #[arg(long)]
    exemplars: Option<usize>,
    #[arg(long)]
    selection_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PromptArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    selection: PathBuf,
    #[arg(long)]
    human_translations: Option<PathBuf>,
    /// nt-female | nt-male | nt-random
    #[arg(long)]
    nt_policy: Option<String>,
    #[arg(long)]
    nt_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the resolved exemplar set as JSON.
    #[arg(long)]
    exemplars_out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Records of the system expected to be better.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    sample_fraction: Option<f64>,
    #[arg(long)]
    bootstrap_seed: Option<u64>,
    /// accuracy | macro-f1
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GntArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    matches: PathBuf,
    #[arg(long)]
    triples: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    matches: PathBuf,
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Translation records (`translate --records-out`) for the manifest.
    #[arg(long)]
    translation_records: Option<PathBuf>,
    /// Output of `compare --out`.
    #[arg(long)]
    comparison: Option<PathBuf>,
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    nt_policy: Option<String>,
    /// structured | table | delimited (repeatable).
    #[arg(long, default_value = "structured")]
    format: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// A stage input that does not exist, with the subcommand that produces it.
#[derive(Debug)]
struct MissingInput {
    path: PathBuf,
    producer: &'static str,
}

impl std::fmt::Display for MissingInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "input {} not found; produce it with `mtgender {}`",
            self.path.display(),
            self.producer
        )
    }
}

impl std::error::Error for MissingInput {}

fn require(path: &Path, producer: &'static str) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(MissingInput {
            path: path.to_path_buf(),
            producer,
        }
        .into())
    }
}

fn required<T: Clone>(flag: &Option<T>, config: &Option<T>, name: &str) -> anyhow::Result<T> {
    flag.clone().or_else(|| config.clone()).ok_or_else(|| {
        anyhow!(
            "--{name} is required (flag or config key {})",
            name.replace('-', "_")
        )
    })
}

struct Ctx {
    cfg: PipelineConfig,
}

impl Ctx {
    fn corpus(&self, args: &CorpusArgs) -> anyhow::Result<(Corpus, PathBuf)> {
        let path = required(&args.corpus, &self.cfg.corpus, "corpus")?;
        require(&path, "translate (corpus files are inputs; check the path)")?;
        let tag = args
            .stereotype_tag
            .clone()
            .or_else(|| self.cfg.stereotype_tag.clone())
            .map(|t| t.parse::<Stereotype>().map_err(|e| anyhow!(e)))
            .transpose()?;
        let options = ParseOptions {
            language_pair: (self.source_lang(args), self.target_lang(args)),
            stereotype_tag: tag,
        };
        Ok((parse_corpus(&path, &options)?, path))
    }

    fn source_lang(&self, args: &CorpusArgs) -> String {
        args.source_lang
            .clone()
            .or_else(|| self.cfg.source_lang.clone())
            .unwrap_or_else(|| "en".into())
    }

    fn target_lang(&self, args: &CorpusArgs) -> String {
        args.target_lang
            .clone()
            .or_else(|| self.cfg.target_lang.clone())
            .unwrap_or_else(|| "es".into())
    }

    fn lexicon(
        &self,
        flag: &Option<PathBuf>,
        lang: &str,
    ) -> anyhow::Result<(GenderLexicon, PathBuf)> {
        let path = required(flag, &self.cfg.lexicon, "lexicon")?;
        require(&path, "match (lexicon files are inputs; check the path)")?;
        Ok((load_lexicon(&path, lang)?, path))
    }

    fn decoding(&self, args: &DecodingArgs) -> anyhow::Result<DecodingConfig> {
        let c = &self.cfg;
        let mut d = DecodingConfig::default();
        if let Some(s) = args.strategy.clone().or_else(|| c.strategy.clone()) {
            d.strategy = s.parse()?;
            if d.strategy != mtgender_core::client::Strategy::Beam {
                d.num_beams = None;
            }
        }
        d.num_beams = args.num_beams.or(c.num_beams).or(d.num_beams);
        d.top_k = args.top_k.or(c.top_k);
        d.top_p = args.top_p.or(c.top_p);
        d.temperature = args.temperature.or(c.temperature);
        d.penalty_alpha = args.penalty_alpha.or(c.penalty_alpha);
        d.max_tokens = args.max_tokens.or(c.max_tokens).unwrap_or(d.max_tokens);
        d.validate()?;
        Ok(d)
    }
}

#[derive(Serialize, Deserialize)]
struct PromptLine {
    instance_id: String,
    prompt: String,
}

fn load_records(path: &Path) -> anyhow::Result<Vec<EvaluationRecord>> {
    require(path, "evaluate")?;
    Ok(read_jsonl(path)?)
}

fn load_matches(path: &Path) -> anyhow::Result<Vec<MatchRecord>> {
    require(path, "match")?;
    Ok(read_jsonl(path)?)
}

fn load_triples(path: &Option<PathBuf>) -> anyhow::Result<Option<Vec<TripleRecord>>> {
    match path {
        Some(p) => {
            require(p, "attribute")?;
            Ok(Some(read_jsonl(p)?))
        }
        None => Ok(None),
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn translate(ctx: &Ctx, args: &TranslateArgs) -> anyhow::Result<()> {
    let (corpus, _) = ctx.corpus(&args.corpus)?;
    let decoding = ctx.decoding(&args.decoding)?;
    let tgt = ctx.target_lang(&args.corpus);
    let src_name = language_name(&ctx.source_lang(&args.corpus));
    let tgt_name = language_name(&tgt);
    let template: PromptTemplate = args
        .template
        .clone()
        .or_else(|| ctx.cfg.template.clone())
        .unwrap_or_else(|| "T1".into())
        .parse()?;

    let requests: Vec<TranslationRequest> = match &args.prompts {
        Some(path) => {
            require(path, "build-prompts")?;
            let prompts: Vec<PromptLine> = read_jsonl(path)?;
            prompts
                .into_iter()
                .map(|p| TranslationRequest {
                    instance: corpus.get(&p.instance_id).cloned(),
                    instance_id: p.instance_id,
                    prompt: p.prompt,
                })
                .collect()
        }
        None => corpus
            .instances()
            .iter()
            .map(|i| TranslationRequest::from_template(i, template, &src_name, &tgt_name))
            .collect(),
    };

    let kind = args
        .backend
        .clone()
        .or_else(|| ctx.cfg.backend.clone())
        .unwrap_or_else(|| "http".into());
    let backend = match kind.as_str() {
        "mock" => {
            let rule: MockRule =
                required(&args.mock_rule, &ctx.cfg.mock_rule, "mock-rule")?.parse()?;
            let (lexicon, _) = ctx.lexicon(&args.lexicon, &tgt)?;
            Backend::Mock(MockTranslator::new(rule, lexicon))
        }
        "offline" => {
            let path = required(&args.translations, &ctx.cfg.translations, "translations")?;
            require(&path, "translate")?;
            Backend::Offline(load_offline_translations(&path)?)
        }
        "http" => {
            let mut http = match args.endpoint.clone().or_else(|| ctx.cfg.endpoint.clone()) {
                Some(url) => {
                    HttpBackend::new(url, std::env::var(mtgender_core::client::TOKEN_ENV).ok())
                }
                None => HttpBackend::from_env()?,
            };
            if let Some(n) = args.max_in_flight.or(ctx.cfg.max_in_flight) {
                http.max_in_flight = n;
            }
            if let Some(n) = args.max_retries.or(ctx.cfg.max_retries) {
                http.max_retries = n;
            }
            Backend::Http(http)
        }
        other => bail!("unknown backend {other:?} (http | offline | mock)"),
    };
    let cache = match args.cache.clone().or_else(|| ctx.cfg.cache.clone()) {
        Some(p) => Some(TranslationCache::open(p)?),
        None => None,
    };
    let records = translate_batch(&requests, &decoding, &backend, cache.as_ref())?;
    let failures: Vec<&TranslationRecord> = records.iter().filter(|r| r.error.is_some()).collect();
    for f in &failures {
        log::error!(
            "{}: {}",
            f.instance_id,
            f.error.as_deref().unwrap_or_default()
        );
    }
    write_text(&args.out, &translations_tsv(&records))?;
    if let Some(path) = &args.records_out {
        write_jsonl(path, &records)?;
    }
    eprintln!(
        "translated {} instances ({} failed) with {}",
        records.len(),
        failures.len(),
        backend.tag()
    );
    Ok(())
}

fn match_cmd(ctx: &Ctx, args: &MatchArgs) -> anyhow::Result<()> {
    let (corpus, _) = ctx.corpus(&args.corpus)?;
    let (lexicon, _) = ctx.lexicon(&args.lexicon, &ctx.target_lang(&args.corpus))?;
    let path = required(&args.translations, &ctx.cfg.translations, "translations")?;
    require(&path, "translate")?;
    let translations = load_offline_translations(&path)?;
    let matches = match_corpus(&corpus, &lexicon, &translations)?;
    write_jsonl(&args.out, &matches)?;
    let found: Vec<ProfessionMatch> = matches.iter().map(|m| m.profession_match.clone()).collect();
    println!("match rate: {}%", pct(match_rate(&found)?));
    Ok(())
}

fn attribute(ctx: &Ctx, args: &AttributeArgs) -> anyhow::Result<()> {
    let (corpus, _) = ctx.corpus(&args.corpus)?;
    let matches = load_matches(&args.matches)?;
    let triples = if args.reference_model {
        let model = ReferenceModel::new(
            args.model_seed
                .or(ctx.cfg.model_seed)
                .unwrap_or(DEFAULT_MODEL_SEED),
            args.hidden_size
                .or(ctx.cfg.hidden_size)
                .unwrap_or(DEFAULT_HIDDEN_SIZE),
            args.hidden_size
                .or(ctx.cfg.hidden_size)
                .unwrap_or(DEFAULT_HIDDEN_SIZE),
        );
        let steps = args.steps.or(ctx.cfg.steps).unwrap_or(DEFAULT_STEPS);
        if let Some(dir) = &args.write_attr {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (k, m) in matches.iter().enumerate() {
                let Some(instance) = corpus.get(&m.instance_id) else {
                    continue;
                };
                let tensor = model.attribute(
                    &m.instance_id,
                    &instance.source_text,
                    &m.translation,
                    steps,
                )?;
                write_tensor(&tensor, dir.join(format!("{k:06}.attr")))?;
            }
        }
        attribute_with_model(&corpus, &matches, &model, steps)
    } else {
        let dir = required(&args.attr_dir, &ctx.cfg.attr_dir, "attr-dir")?;
        require(
            &dir,
            "attribute --reference-model --write-attr (or the external extractor)",
        )?;
        attribute_from_tensors(&corpus, &matches, &dir)?
    };
    let failed = triples.iter().filter(|t| t.error.is_some()).count();
    for t in triples.iter().filter(|t| t.error.is_some()) {
        log::warn!(
            "{}: {}",
            t.instance_id,
            t.error.as_deref().unwrap_or_default()
        );
    }
    write_jsonl(&args.out, &triples)?;
    eprintln!(
        "{} triples, {} unmatched, {} failed",
        triples.iter().filter(|t| t.triple.is_some()).count(),
        triples
            .iter()
            .filter(|t| t.triple.is_none() && t.error.is_none())
            .count(),
        failed
    );
    Ok(())
}

fn evaluate(ctx: &Ctx, args: &EvaluateArgs) -> anyhow::Result<()> {
    let (corpus, _) = ctx.corpus(&args.corpus)?;
    let matches = load_matches(&args.matches)?;
    let triples = load_triples(&args.triples)?;
    let records = evaluation_records(&corpus, &matches, triples.as_deref())?;
    write_jsonl(&args.out, &records)?;
    let report = BiasReport::compute(&records)?;
    println!("Acc ΔG ΔS");
    println!(
        "{}",
        summary_row(report.accuracy, report.delta_g, report.delta_s)
    );
    Ok(())
}

fn disaggregate(args: &RecordsArgs) -> anyhow::Result<()> {
    let records = load_records(&args.records)?;
    let mut report = FullReport::new(RunManifest::new());
    report.bias = Some(BiasReport::compute(&records)?);
    report.relative_differences = relative_differences(&records);
    print!("{}", render_table(&report));
    Ok(())
}

fn select(ctx: &Ctx, args: &SelectArgs) -> anyhow::Result<()> {
    let n = args
        .exemplars
        .or(ctx.cfg.exemplars)
        .unwrap_or(DEFAULT_EXEMPLARS);
    let seed = args
        .selection_seed
        .or(ctx.cfg.selection_seed)
        .unwrap_or(DEFAULT_SELECTION_SEED);
    let pools = if args.random {
        let (corpus, _) = ctx.corpus(&args.corpus)?;
        stratified_pool(&corpus)?
    } else {
        let path = args
            .records
            .clone()
            .ok_or_else(|| anyhow!("--records is required unless --random is given"))?;
        let records = load_records(&path)?;
        let q = args
            .pool_fraction
            .or(ctx.cfg.pool_fraction)
            .unwrap_or(DEFAULT_POOL_FRACTION);
        build_pool(&records, q)?
    };
    let selection = select_exemplars(&pools, n, seed)?;
    write_text(
        &args.out,
        &(serde_json::to_string_pretty(&selection)? + "\n"),
    )?;
    for e in &selection.exemplars {
        println!(
            "{}\t{}\t{}",
            e.stratum,
            e.instance_id,
            e.a_pron_prof
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into())
        );
    }
    Ok(())
}

fn build_prompts(ctx: &Ctx, args: &PromptArgs) -> anyhow::Result<()> {
    let (corpus, _) = ctx.corpus(&args.corpus)?;
    require(&args.selection, "select-exemplars")?;
    let selection: Selection = serde_json::from_str(
        &std::fs::read_to_string(&args.selection)
            .with_context(|| format!("reading {}", args.selection.display()))?,
    )?;
    let human_path = required(
        &args.human_translations,
        &ctx.cfg.human_translations,
        "human-translations",
    )?;
    require(
        &human_path,
        "select-exemplars (then translate the exemplars by hand)",
    )?;
    let human = load_human_translations(&human_path)?;
    let policy: NtPolicy = required(&args.nt_policy, &ctx.cfg.nt_policy, "nt-policy")?.parse()?;
    let seed = args.nt_seed.or(ctx.cfg.nt_seed).unwrap_or(DEFAULT_NT_SEED);
    let set = resolve_translations(&selection, &corpus, &human, policy, seed)?;
    let language = language_name(&ctx.target_lang(&args.corpus));
    let prompts: Vec<PromptLine> = corpus
        .instances()
        .iter()
        .map(|i| PromptLine {
            instance_id: i.id.clone(),
            prompt: build_fewshot_prompt(&set.exemplars, &i.source_text, &language),
        })
        .collect();
    write_jsonl(&args.out, &prompts)?;
    if let Some(path) = &args.exemplars_out {
        write_text(path, &(serde_json::to_string_pretty(&set)? + "\n"))?;
    }
    eprintln!(
        "{} prompts with {} exemplars",
        prompts.len(),
        set.exemplars.len()
    );
    Ok(())
}

fn compare(ctx: &Ctx, args: &CompareArgs) -> anyhow::Result<()> {
    let a = load_records(&args.a)?;
    let b = load_records(&args.b)?;
    let defaults = BootstrapConfig::default();
    let config = BootstrapConfig {
        resamples: args
            .resamples
            .or(ctx.cfg.resamples)
            .unwrap_or(defaults.resamples),
        sample_fraction: args
            .sample_fraction
            .or(ctx.cfg.sample_fraction)
            .unwrap_or(defaults.sample_fraction),
        seed: args
            .bootstrap_seed
            .or(ctx.cfg.bootstrap_seed)
            .unwrap_or(DEFAULT_BOOTSTRAP_SEED),
        metric: match args.metric.clone().or_else(|| ctx.cfg.metric.clone()) {
            Some(m) => m.parse()?,
            None => defaults.metric,
        },
    };
    let result = bootstrap_compare(&a, &b, &config)?;
    println!("p = {}", result.p_value);
    if let Some(out) = &args.out {
        write_text(out, &(serde_json::to_string_pretty(&result)? + "\n"))?;
    }
    Ok(())
}

fn gnt(ctx: &Ctx, args: &GntArgs) -> anyhow::Result<()> {
    let (corpus, _) = ctx.corpus(&args.corpus)?;
    let matches = load_matches(&args.matches)?;
    let triples = load_triples(&args.triples)?;
    let report = analyze_gnt(&gnt_records(&corpus, &matches, triples.as_deref()))?;
    let mut full = FullReport::new(RunManifest::new());
    full.gnt = Some(report);
    print!("{}", render_table(&full));
    Ok(())
}

fn report(ctx: &Ctx, args: &ReportArgs) -> anyhow::Result<()> {
    let (corpus, corpus_path) = ctx.corpus(&args.corpus)?;
    let matches = load_matches(&args.matches)?;
    let triples = load_triples(&args.triples)?;

    let mut manifest = RunManifest::new();
    manifest.corpus_digest = Some(file_digest(&corpus_path)?);
    if let Some(lex) = args.lexicon.clone().or_else(|| ctx.cfg.lexicon.clone()) {
        manifest.lexicon_digest = Some(file_digest(&lex)?);
    }
    if let Some(path) = &args.translation_records {
        require(path, "translate --records-out")?;
        let records: Vec<TranslationRecord> = read_jsonl(path)?;
        if let Some(first) = records.first() {
            manifest.backend = Some(first.backend.clone());
            manifest.decoding = Some(first.decoding.clone());
        }
    }
    manifest.template = args.template.clone().or_else(|| ctx.cfg.template.clone());
    manifest.nt_policy = args.nt_policy.clone().or_else(|| ctx.cfg.nt_policy.clone());
    let seeds: BTreeMap<String, Option<u64>> = [
        ("model", ctx.cfg.model_seed),
        ("selection", ctx.cfg.selection_seed),
        ("nt", ctx.cfg.nt_seed),
        ("bootstrap", ctx.cfg.bootstrap_seed),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    manifest.seeds = seeds
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect();

    let mut full = FullReport::new(manifest);
    let found: Vec<ProfessionMatch> = matches.iter().map(|m| m.profession_match.clone()).collect();
    full.match_rate = match_rate(&found).ok();
    let records = evaluation_records(&corpus, &matches, triples.as_deref())?;
    if !records.is_empty() {
        full.bias = Some(BiasReport::compute(&records)?);
        full.relative_differences = relative_differences(&records);
    }
    let neutral = gnt_records(&corpus, &matches, triples.as_deref());
    if !neutral.is_empty() {
        full.gnt = Some(analyze_gnt(&neutral)?);
    }
    if let Some(path) = &args.comparison {
        require(path, "compare --out")?;
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        full.comparison = Some(serde_json::from_str::<BootstrapResult>(&text)?);
    }
    let mut written = Vec::new();
    for f in &args.format {
        let format: Format = f.parse()?;
        written.extend(render(&full, format, &args.out_dir)?);
    }
    if args.format.iter().any(|f| f == "table" || f == "text") {
        print!("{}", render_table(&full));
    } else {
        let _ = render_structured(&full)?;
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let ctx = Ctx { cfg };
    match &cli.command {
        Command::Translate(a) => translate(&ctx, a),
        Command::Attribute(a) => attribute(&ctx, a),
        Command::Match(a) => match_cmd(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Disaggregate(a) => disaggregate(a),
        Command::SelectExemplars(a) => select(&ctx, a),
        Command::BuildPrompts(a) => build_prompts(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
        Command::Gnt(a) => gnt(&ctx, a),
        Command::Report(a) => report(&ctx, a),
    }
}

/// One-line JSON error summary on stderr.
fn error_summary(err: &anyhow::Error) -> serde_json::Value {
    let kind = err
        .chain()
        .find_map(|e| {
            e.downcast_ref::<mtgender_core::Error>()
                .map(|c| c.kind().to_string())
                .or_else(|| {
                    e.downcast_ref::<MissingInput>()
                        .map(|_| "missing-input".to_string())
                })
        })
        .unwrap_or_else(|| "usage".to_string());
    serde_json::json!({
        "status": "error",
        "kind": kind,
        "message": format!("{err:#}"),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_summary(&err));
            ExitCode::from(1)
        }
    }
}
