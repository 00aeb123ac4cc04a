mod config;

use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semaug::builder::{
    augmented_quota, BuildError, ANNOTATIONS_FILE, FAILURES_FILE, MANIFEST_FILE,
};
use semaug::coco::parse_unchecked;
use semaug::generation::BACKEND_URL_ENV;
use semaug::{
    build_augmented_dataset, load_embeddings, mix, parse_dataset, plan_augmentation, stats,
    validate, AugmentedCaption, BackendKind, Dataset, EmbeddingTable, MixManifest,
};
use thiserror::Error;

use crate::config::{ConfigError, Overrides, RunConfig};

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

const AUGMENTED_CAPTIONS_FILE: &str = "augmented_captions.json";
const STATS_FILE: &str = "stats.json";

#[derive(Parser)]
#[command(
    name = "semaug",
    version,
    about = "Caption-driven synthetic data augmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan augmented captions and write them for inspection.
    Augment(Common),
    /// Plan, generate images, write the augmented dataset, mix and report.
    Build(Common),
    /// Mix the original dataset with an existing augmented dataset.
    Mix(Common),
    /// Check COCO annotation files for structural violations.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Summarize an existing manifest.
    Stats(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Augmented images per original image.
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Remote,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            ratio: self.ratio,
            backend: self.backend.map(|b| match b {
                BackendArg::Mock => BackendKind::Mock,
                BackendArg::Remote => BackendKind::Remote,
            }),
            out: self.out.clone(),
        }
    }

    fn load(&self) -> Result<RunConfig, CliError> {
        let path = self.config.as_deref().ok_or(ConfigError::NoConfig)?;
        let url = std::env::var(BACKEND_URL_ENV).ok();
        Ok(RunConfig::load(path, &self.overrides(), url)?)
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0} annotation file(s) have violations")]
    Violations(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Generation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Violations(_) => 1,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Generation(_) => 4,
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::AllJobsFailed(_) | BuildError::Generation(_) => {
                CliError::Generation(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn pretty<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    parse_dataset(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_table(path: &Path) -> Result<EmbeddingTable, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    load_embeddings(BufReader::new(file))
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn check_files(manifest: &MixManifest, cfg: &RunConfig) -> Result<(), CliError> {
    let missing = manifest.missing_files(cfg.images_dir.as_deref(), &cfg.out_dir);
    if missing.is_empty() {
        return Ok(());
    }
    Err(ConfigError::MissingPaths(missing).into())
}

fn cmd_augment(common: &Common) -> Result<(), CliError> {
    let cfg = common.load()?;
    let dataset = load_dataset(&cfg.dataset)?;
    let table = load_table(&cfg.embeddings)?;
    let jobs = plan_augmentation(
        &dataset,
        &table,
        &cfg.augmentation,
        &cfg.request,
        cfg.ratio,
        cfg.seed,
    )?;
    let captions: Vec<&AugmentedCaption> = jobs.iter().map(|j| &j.augmented).collect();
    let path = cfg.out_dir.join(AUGMENTED_CAPTIONS_FILE);
    write(&path, &pretty(&captions))?;
    say!(
        "wrote {} augmented captions to {}",
        captions.len(),
        path.display()
    );
    Ok(())
}

fn cmd_build(common: &Common) -> Result<(), CliError> {
    let cfg = common.load()?;
    let dataset = load_dataset(&cfg.dataset)?;
    let table = load_table(&cfg.embeddings)?;
    let jobs = plan_augmentation(
        &dataset,
        &table,
        &cfg.augmentation,
        &cfg.request,
        cfg.ratio,
        cfg.seed,
    )?;

    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| CliError::Usage(format!("cannot start runtime: {e}")))?;
    let built = runtime.block_on(build_augmented_dataset(
        &dataset,
        &jobs,
        &cfg.backend,
        &cfg.out_dir,
    ))?;

    // With failed jobs the manifest covers the images that exist.
    let produced = built.dataset.images.len();
    let ratio = if built.failures.is_empty() || dataset.images.is_empty() {
        cfg.ratio
    } else {
        produced as f64 / dataset.images.len() as f64
    };
    let manifest = mix(&dataset, &built.dataset, ratio, cfg.seed)?;
    debug_assert_eq!(augmented_quota(ratio, dataset.images.len()), produced);
    check_files(&manifest, &cfg)?;
    write(&cfg.out_dir.join(MANIFEST_FILE), &manifest.to_json())?;
    let report = stats(&manifest);
    write(&cfg.out_dir.join(STATS_FILE), &pretty(&report))?;

    say!("generated {produced} of {} images", jobs.len());
    if !built.failures.is_empty() {
        say!(
            "{} jobs failed (see {}); mixed at ratio {ratio}",
            built.failures.len(),
            cfg.out_dir.join(FAILURES_FILE).display()
        );
    }
    say!("{}", report.to_string().trim_end());
    Ok(())
}

fn cmd_mix(common: &Common) -> Result<(), CliError> {
    let cfg = common.load()?;
    let original = load_dataset(&cfg.dataset)?;
    let annotations = cfg.out_dir.join(ANNOTATIONS_FILE);
    if !annotations.exists() {
        return Err(ConfigError::MissingPaths(vec![annotations]).into());
    }
    let augmented = load_dataset(&annotations)?;
    let manifest = mix(&original, &augmented, cfg.ratio, cfg.seed)?;
    check_files(&manifest, &cfg)?;
    let path = cfg.out_dir.join(MANIFEST_FILE);
    write(&path, &manifest.to_json())?;
    say!(
        "wrote {} entries to {}",
        manifest.entries.len(),
        path.display()
    );
    Ok(())
}

fn cmd_stats(common: &Common) -> Result<(), CliError> {
    let out_dir = match (&common.out, &common.config) {
        (Some(out), _) => out.clone(),
        (None, Some(_)) => common.load()?.out_dir,
        (None, None) => return Err(ConfigError::MissingOutDir.into()),
    };
    let path = out_dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(ConfigError::MissingPaths(vec![path]).into());
    }
    let manifest: MixManifest = serde_json::from_slice(&read(&path)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let report = stats(&manifest);
    write(&out_dir.join(STATS_FILE), &pretty(&report))?;
    say!("{}", report.to_string().trim_end());
    Ok(())
}

fn cmd_validate(paths: &[PathBuf]) -> Result<(), CliError> {
    let mut unparsable = Vec::new();
    let mut failing = 0;
    for path in paths {
        if !path.exists() {
            return Err(ConfigError::MissingPaths(vec![path.clone()]).into());
        }
        match parse_unchecked(&read(path)?) {
            Err(e) => {
                say!("{}: parse error: {e}", path.display());
                unparsable.push(path.display().to_string());
            }
            Ok(d) => {
                let report = validate(&d);
                if report.is_empty() {
                    say!("{}: ok", path.display());
                } else {
                    failing += 1;
                    say!("{}: {} violation(s)", path.display(), report.len());
                    for v in &report.violations {
                        say!("  {v}");
                    }
                }
            }
        }
    }
    if !unparsable.is_empty() {
        return Err(CliError::Parse(format!(
            "cannot parse {}",
            unparsable.join(", ")
        )));
    }
    if failing > 0 {
        return Err(CliError::Violations(failing));
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Augment(c) => cmd_augment(c),
        Command::Build(c) => cmd_build(c),
        Command::Mix(c) => cmd_mix(c),
        Command::Validate { paths } => cmd_validate(paths),
        Command::Stats(c) => cmd_stats(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
