//! Config-driven pipeline commands and the command-line interface.
//!
//! One JSON configuration drives all subcommands, so a trained combination
//! can be re-run and re-evaluated (e.g. for threshold sweeps) without
//! retraining. Relative `manifest` and `out_dir` paths resolve against the
//! config file's directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::dataset::{
    generate_synthetic, load_manifest, split, DatasetManifest, GrayImage, SplitSpec,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::eval::{build_report, is_correct, load_report_doc, reconstruct_traces, EvalReport};
use crate::matchers::{index_references, MatchCandidate, MatcherConfig, MatcherIndex, TechniqueId};
use crate::stats::{train_profile, TechniqueProfile};
use crate::switch::{
    load_traces_csv, run_dataset, save_traces_csv, SwitchConfig, DEFAULT_THRESHOLD,
};

/// One configured technique: a name plus the matcher variant behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueSpec {
    pub name: TechniqueId,
    pub matcher: MatcherConfig,
}

/// Validated run configuration shared by all subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Ordered combination; the first technique is the primary.
    pub combination: Vec<TechniqueSpec>,
    pub threshold: f64,
    pub split: SplitSpec,
    /// Overrides the manifest's tolerance when set.
    pub tolerance: Option<usize>,
    pub out_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigDoc {
    manifest: String,
    combination: Vec<TechniqueDoc>,
    #[serde(default)]
    threshold: Option<f64>,
    split: SplitDoc,
    #[serde(default)]
    tolerance: Option<usize>,
    out_dir: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitDoc {
    train_fraction: f64,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TechniqueDoc {
    name: String,
    variant: String,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TinyParams {
    side: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct HistogramParams {
    bins: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn parse_params<T: DeserializeOwned + Default>(
    name: &str,
    params: Option<serde_json::Value>,
) -> Result<T> {
    match params {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v)
            .map_err(|e| Error::ConfigInvalid(format!("params for technique \"{name}\": {e}"))),
    }
}

/// Technique names double as profile/report file name components.
fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl RunConfig {
    /// Parses and validates a config document; paths stay as written.
    /// This is the untrusted-input entry point the `run_config_json` fuzz
    /// target drives.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let doc: RunConfigDoc =
            serde_json::from_str(json).map_err(|e| Error::ConfigParse(e.to_string()))?;
        if doc.combination.is_empty() {
            return Err(Error::ConfigInvalid("combination is empty".into()));
        }
        let mut combination = Vec::with_capacity(doc.combination.len());
        for t in doc.combination {
            if !valid_name(&t.name) {
                return Err(Error::ConfigInvalid(format!(
                    "technique name \"{}\" must be 1-64 characters of [A-Za-z0-9_-]",
                    t.name
                )));
            }
            if combination
                .iter()
                .any(|s: &TechniqueSpec| s.name.as_str() == t.name)
            {
                return Err(Error::ConfigInvalid(format!(
                    "duplicate technique name \"{}\"",
                    t.name
                )));
            }
            let matcher = match t.variant.as_str() {
                "tiny-image" => {
                    let p: TinyParams = parse_params(&t.name, t.params)?;
                    MatcherConfig::TinyImage {
                        side: p.side.unwrap_or(MatcherConfig::DEFAULT_TINY_SIDE),
                    }
                }
                "hog" => {
                    let _: NoParams = parse_params(&t.name, t.params)?;
                    MatcherConfig::Hog
                }
                "histogram" => {
                    let p: HistogramParams = parse_params(&t.name, t.params)?;
                    MatcherConfig::Histogram {
                        bins: p.bins.unwrap_or(MatcherConfig::DEFAULT_HISTOGRAM_BINS),
                    }
                }
                other => {
                    return Err(Error::ConfigInvalid(format!(
                        "unknown matcher variant \"{other}\" for technique \"{}\"",
                        t.name
                    )))
                }
            };
            matcher.validate()?;
            combination.push(TechniqueSpec {
                name: TechniqueId::new(t.name),
                matcher,
            });
        }
        let threshold = doc.threshold.unwrap_or(DEFAULT_THRESHOLD);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::ConfigInvalid(format!(
                "threshold {threshold} outside [0,1]"
            )));
        }
        if !(doc.split.train_fraction > 0.0 && doc.split.train_fraction < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "split.train_fraction {} outside (0,1)",
                doc.split.train_fraction
            )));
        }
        Ok(RunConfig {
            manifest: PathBuf::from(doc.manifest),
            combination,
            threshold,
            split: SplitSpec {
                train_fraction: doc.split.train_fraction,
                seed: doc.split.seed,
            },
            tolerance: doc.tolerance,
            out_dir: PathBuf::from(doc.out_dir),
        })
    }

    /// Loads a config file and resolves its paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&json)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.manifest = base.join(&cfg.manifest);
        cfg.out_dir = base.join(&cfg.out_dir);
        Ok(cfg)
    }

    pub fn technique_ids(&self) -> Vec<TechniqueId> {
        self.combination.iter().map(|t| t.name.clone()).collect()
    }

    pub fn switch_config(&self) -> Result<SwitchConfig> {
        SwitchConfig::new(self.technique_ids())?.with_threshold(self.threshold)
    }

    pub fn profile_path(&self, technique: &TechniqueId) -> PathBuf {
        self.out_dir.join(format!("profile_{technique}.json"))
    }

    pub fn traces_path(&self) -> PathBuf {
        self.out_dir.join("traces.csv")
    }

    pub fn report_path(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }
}

// ── Pipeline commands ─────────────────────────────────────────────────────

struct Prepared {
    train: DatasetManifest,
    test: DatasetManifest,
    references: Vec<GrayImage>,
    tolerance: usize,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let mut manifest = load_manifest(&cfg.manifest)?;
    if let Some(t) = cfg.tolerance {
        manifest.tolerance = t;
    }
    let (train, test) = split(&manifest, &cfg.split)?;
    let references = manifest.load_references()?;
    Ok(Prepared {
        tolerance: manifest.tolerance,
        train,
        test,
        references,
    })
}

fn build_indices(
    cfg: &RunConfig,
    references: &[GrayImage],
) -> Result<HashMap<TechniqueId, MatcherIndex>> {
    cfg.combination
        .iter()
        .map(|spec| {
            index_references(&spec.matcher, references).map(|idx| (spec.name.clone(), idx))
        })
        .collect()
}

/// Trains one profile per configured technique on the train split and
/// writes `profile_<name>.json` files into the output directory.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<TechniqueProfile>> {
    let prepared = prepare(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let train_images = prepared.train.load_queries()?;
    let gts = prepared.train.gt_indices();
    let mut profiles = Vec::with_capacity(cfg.combination.len());
    for spec in &cfg.combination {
        let index = index_references(&spec.matcher, &prepared.references)?;
        let results: Vec<(MatchCandidate, bool)> = train_images
            .iter()
            .zip(&gts)
            .map(|(img, &gt)| {
                let c = index.best_match(img);
                (c, is_correct(&c, gt, prepared.tolerance))
            })
            .collect();
        let profile = train_profile(spec.name.clone(), &results)?;
        profile.save(&cfg.profile_path(&spec.name))?;
        profiles.push(profile);
    }
    Ok(profiles)
}

fn load_profiles(cfg: &RunConfig) -> Result<HashMap<TechniqueId, TechniqueProfile>> {
    let mut profiles = HashMap::new();
    for spec in &cfg.combination {
        let path = cfg.profile_path(&spec.name);
        if !path.exists() {
            return Err(Error::MissingProfile(spec.name.as_str().to_owned()));
        }
        let profile = TechniqueProfile::load(&path)?;
        if profile.technique() != &spec.name {
            return Err(Error::ProfileParse(format!(
                "{} holds a profile for \"{}\", expected \"{}\"",
                path.display(),
                profile.technique(),
                spec.name
            )));
        }
        profiles.insert(spec.name.clone(), profile);
    }
    Ok(profiles)
}

/// Runs the switch cascade over the test split and writes the trace CSV.
pub fn cmd_run(cfg: &RunConfig) -> Result<PathBuf> {
    let prepared = prepare(cfg)?;
    let profiles = load_profiles(cfg)?;
    let indices = build_indices(cfg, &prepared.references)?;
    let test_images = prepared.test.load_queries()?;
    let switch_config = cfg.switch_config()?;
    let traces = run_dataset(&test_images, &switch_config, &profiles, &indices)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let path = cfg.traces_path();
    save_traces_csv(&traces, &path)?;
    Ok(path)
}

/// Scores the trace CSV against ground truth, re-running every technique
/// over the test split for the individual baselines, and writes
/// `report.json`, the PR CSVs, and `switch_pattern.csv`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let prepared = prepare(cfg)?;
    let test_images = prepared.test.load_queries()?;
    let gts = prepared.test.gt_indices();
    let rows = load_traces_csv(&cfg.traces_path())?;
    let per_technique: Vec<(TechniqueId, Vec<MatchCandidate>)> = cfg
        .combination
        .iter()
        .map(|spec| {
            let index = index_references(&spec.matcher, &prepared.references)?;
            Ok((
                spec.name.clone(),
                test_images.iter().map(|q| index.best_match(q)).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let traces = reconstruct_traces(&rows, &per_technique)?;
    if traces.len() != test_images.len() {
        return Err(Error::TraceQueryMismatch {
            traces: traces.len(),
            queries: test_images.len(),
        });
    }
    let report = build_report(&traces, &per_technique, &gts, prepared.tolerance)?;
    report.write_artifacts(&cfg.out_dir)?;
    Ok(report)
}

/// Renders a human-readable summary of a previously written report.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let doc = load_report_doc(&cfg.report_path())?;
    let mut out = String::new();
    out.push_str(&format!(
        "queries: {}   tolerance: {}\n\n",
        doc.n_queries, doc.tolerance
    ));
    out.push_str(&format!("{:<24} {:>8} {:>10}\n", "technique", "correct", "auc"));
    out.push_str(&format!("{:-<24} {:->8} {:->10}\n", "", "", ""));
    out.push_str(&format!(
        "{:<24} {:>8} {:>10.4}\n",
        "switchhit", doc.switchhit.correct, doc.switchhit.auc
    ));
    for t in &doc.techniques {
        out.push_str(&format!(
            "{:<24} {:>8} {:>10.4}\n",
            t.name, t.correct, t.auc
        ));
    }
    out.push_str("\nattempts per query: ");
    let parts: Vec<String> = doc
        .attempts_histogram
        .iter()
        .enumerate()
        .map(|(i, n)| format!("{}x{}", i + 1, n))
        .collect();
    out.push_str(&parts.join("  "));
    out.push('\n');
    Ok(out)
}

// ── Command-line interface ────────────────────────────────────────────────

#[derive(Parser)]
#[command(
    name = "switchhit",
    version,
    about = "Probabilistic, complementarity-based switching between image matching techniques"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train per-technique probability profiles on the train split
    Train(RunArgs),
    /// Run the switch cascade over the test split and write traces.csv
    Run(RunArgs),
    /// Score traces against ground truth and write report artifacts
    Eval(RunArgs),
    /// Print a summary table from a previously written report.json
    Report(RunArgs),
    /// Generate a synthetic dataset with complementary failure regimes
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the run configuration JSON
    #[arg(long)]
    config: PathBuf,
    /// Override the configured acceptance threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// Override the configured split seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for images, manifest.json, and a demo config.json
    #[arg(long)]
    out: PathBuf,
    /// Number of query images
    #[arg(long, default_value_t = 200)]
    queries: usize,
    /// Number of reference images
    #[arg(long, default_value_t = 25)]
    refs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::ConfigInvalid(format!(
                    "threshold {t} outside [0,1]"
                )));
            }
            cfg.threshold = t;
        }
        if let Some(s) = self.seed {
            cfg.split.seed = s;
        }
        Ok(cfg)
    }
}

const DEMO_CONFIG: &str = r#"{
  "manifest": "manifest.json",
  "combination": [
    { "name": "tiny", "variant": "tiny-image", "params": { "side": 8 } },
    { "name": "hist", "variant": "histogram", "params": { "bins": 32 } },
    { "name": "hog", "variant": "hog" }
  ],
  "threshold": 0.5,
  "split": { "train_fraction": 0.5, "seed": SEED },
  "out_dir": "out"
}
"#;

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.load()?;
            let profiles = cmd_train(&cfg)?;
            for p in &profiles {
                println!(
                    "trained {}: pm={} pmm={} n={}",
                    p.technique(),
                    p.prior_match(),
                    p.prior_mismatch(),
                    p.training_size()
                );
                let counts: Vec<String> = p
                    .bins()
                    .iter()
                    .map(|b| format!("{}/{}", b.counts.matches, b.counts.total()))
                    .collect();
                println!("  bin w/x: {}", counts.join(" "));
                println!("  wrote {}", cfg.profile_path(p.technique()).display());
            }
        }
        Command::Run(args) => {
            let path = cmd_run(&args.load()?)?;
            println!("wrote {}", path.display());
        }
        Command::Eval(args) => {
            let cfg = args.load()?;
            let report = cmd_eval(&cfg)?;
            println!(
                "switchhit correct: {}/{} (auc {:.4})",
                report.switchhit_correct, report.n_queries, report.switchhit_auc
            );
            println!("wrote report artifacts to {}", cfg.out_dir.display());
        }
        Command::Report(args) => {
            print!("{}", cmd_report(&args.load()?)?);
        }
        Command::Synth(args) => {
            let spec = SyntheticSpec::complementary_pair(args.queries, args.refs, args.seed);
            generate_synthetic(&spec, &args.out)?;
            let config_path = args.out.join("config.json");
            std::fs::write(
                &config_path,
                DEMO_CONFIG.replace("SEED", &args.seed.to_string()),
            )
            .map_err(|e| Error::io(&config_path, e))?;
            println!(
                "wrote {} queries / {} references under {}",
                args.queries,
                args.refs,
                args.out.display()
            );
            println!("demo config: {}", config_path.display());
        }
    }
    Ok(())
}

/// CLI entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first_line = e.to_string();
            let first_line = first_line.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {first_line}");
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_json() -> String {
        DEMO_CONFIG.replace("SEED", "7")
    }

    #[test]
    fn config_parses_with_defaults() {
        let cfg = RunConfig::from_json_str(&demo_json()).unwrap();
        assert_eq!(cfg.combination.len(), 3);
        assert_eq!(cfg.threshold, 0.5);
        assert_eq!(cfg.split.seed, 7);
        assert_eq!(cfg.combination[0].matcher, MatcherConfig::TinyImage { side: 8 });
        assert_eq!(cfg.tolerance, None);

        let minimal = r#"{
            "manifest": "m.json",
            "combination": [{ "name": "t", "variant": "tiny-image" }],
            "split": { "train_fraction": 0.7, "seed": 1 },
            "out_dir": "out"
        }"#;
        let cfg = RunConfig::from_json_str(minimal).unwrap();
        assert_eq!(cfg.threshold, DEFAULT_THRESHOLD);
        assert_eq!(cfg.combination[0].matcher, MatcherConfig::TinyImage { side: 8 });
    }

    #[test]
    fn config_rejects_unknown_variant_and_bad_values() {
        let bad_variant = demo_json().replace("\"tiny-image\"", "\"netvlad\"");
        match RunConfig::from_json_str(&bad_variant) {
            Err(Error::ConfigInvalid(msg)) => assert!(msg.contains("netvlad")),
            other => panic!("expected config error, got {other:?}"),
        }
        let dup = demo_json().replace("\"name\": \"hist\"", "\"name\": \"tiny\"");
        assert!(matches!(
            RunConfig::from_json_str(&dup),
            Err(Error::ConfigInvalid(_))
        ));
        let bad_threshold = demo_json().replace("\"threshold\": 0.5", "\"threshold\": 1.5");
        assert!(matches!(
            RunConfig::from_json_str(&bad_threshold),
            Err(Error::ConfigInvalid(_))
        ));
        let bad_fraction = demo_json().replace("\"train_fraction\": 0.5", "\"train_fraction\": 1.0");
        assert!(matches!(
            RunConfig::from_json_str(&bad_fraction),
            Err(Error::ConfigInvalid(_))
        ));
        let bad_name = demo_json().replace("\"name\": \"tiny\"", "\"name\": \"ti/ny\"");
        assert!(matches!(
            RunConfig::from_json_str(&bad_name),
            Err(Error::ConfigInvalid(_))
        ));
        let bad_params = demo_json().replace("\"side\": 8", "\"sides\": 8");
        assert!(matches!(
            RunConfig::from_json_str(&bad_params),
            Err(Error::ConfigInvalid(_))
        ));
        let tiny_side_too_small = demo_json().replace("\"side\": 8", "\"side\": 1");
        assert!(matches!(
            RunConfig::from_json_str(&tiny_side_too_small),
            Err(Error::MatcherParams(_))
        ));
        assert!(matches!(
            RunConfig::from_json_str("nope"),
            Err(Error::ConfigParse(_))
        ));
        let empty = r#"{"manifest": "m", "combination": [], "split": {"train_fraction": 0.5, "seed": 0}, "out_dir": "o"}"#;
        assert!(matches!(
            RunConfig::from_json_str(empty),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn load_resolves_paths_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, demo_json()).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.manifest, dir.path().join("manifest.json"));
        assert_eq!(cfg.out_dir, dir.path().join("out"));
        assert_eq!(cfg.profile_path(&"tiny".into()), dir.path().join("out/profile_tiny.json"));
    }
}
