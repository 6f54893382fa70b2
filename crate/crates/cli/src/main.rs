use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pettis_forge::campaign::{self, CampaignKind, Format, Report, RunConfig};
use pettis_forge::Error;

#[derive(Parser)]
#[command(name = "pettis-forge", version, about = "Build and verify Pettis-integrable counterexample models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Growth-condition checks for the configured ψ and sequence.
    Psi {
        #[command(subcommand)]
        action: PsiAction,
    },
    /// Build the model and write it as a JSON archive.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification campaign.
    Verify {
        kind: VerifyKind,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Subcommand)]
enum PsiAction {
    Validate {
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args)]
struct RunOpts {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    LowerBound,
    Pairing,
    Blowup,
    Halfpower,
    Continuous,
    Bochner,
}

impl From<VerifyKind> for CampaignKind {
    fn from(k: VerifyKind) -> Self {
        match k {
            VerifyKind::LowerBound => CampaignKind::LowerBound,
            VerifyKind::Pairing => CampaignKind::Pairing,
            VerifyKind::Blowup => CampaignKind::Blowup,
            VerifyKind::Halfpower => CampaignKind::Halfpower,
            VerifyKind::Continuous => CampaignKind::Continuous,
            VerifyKind::Bochner => CampaignKind::Bochner,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    if !path.exists() {
        return Err(Error::Io(format!("config file {} not found", path.display())));
    }
    RunConfig::from_path(path)
}

fn verify(kind: CampaignKind, opts: &RunOpts) -> Result<Report, Error> {
    let mut cfg = load(&opts.config)?;
    let base = base_dir(&opts.config);
    let c = &mut cfg.campaign;
    if let Some(seed) = opts.seed {
        c.seed = seed;
    }
    if let Some(n) = opts.samples {
        c.samples = n;
    }
    let format = match opts.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => c.format,
    };
    let out = opts.out.clone().or_else(|| c.out.as_ref().map(|p| base.join(p)));
    let report = campaign::run(&cfg.model, &base, kind, &cfg.campaign)?;
    match out {
        Some(path) => {
            let written = report.write(&path, format)?;
            print!("{}", String::from_utf8_lossy(&report.summary_json()?));
            for p in written {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            print!("{}", String::from_utf8_lossy(&report.render(format)?));
            let s = &report.summary;
            eprintln!("{}: {} rows, {} violations", s.campaign, s.rows, s.violations);
        }
    }
    Ok(report)
}

fn build(config: &Path, out: &Path) -> Result<(), Error> {
    let cfg = load(config)?;
    let model = cfg.model.build(&base_dir(config))?;
    let mut text = serde_json::to_vec_pretty(&model.archive())?;
    text.push(b'\n');
    std::fs::write(out, text)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Psi { action: PsiAction::Validate { opts } } => verify(CampaignKind::PsiValidate, opts).map(|r| r.pass()),
        Command::Verify { kind, opts } => verify((*kind).into(), opts).map(|r| r.pass()),
        Command::Build { config, out } => build(config, out).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
