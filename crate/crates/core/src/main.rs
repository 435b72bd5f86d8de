use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use liversynth::manifest::{self, expand_plan};
use liversynth::orchestrator::{self, PipelineConfig, PipelineError};
use liversynth::toy;

#[derive(Parser)]
#[command(name = "liversynth", version, about = "Tumor-conditioning image synthesis and FID evaluation")]
struct Cli {
    /// Pipeline configuration file (key=value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides plan.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overrides output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the manifest and every referenced image.
    Prepare,
    /// Generate Stage-1 cases.
    Run,
    /// Re-check an output tree against its sources.
    Verify,
    /// Print the plan expansion without writing anything.
    Plan,
    /// Frechet Inception Distance between two embedding files or image directories.
    Fid {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        fake: PathBuf,
        /// Embed image directories with the built-in surrogate features.
        #[arg(long)]
        surrogate: bool,
    },
    /// Write a synthetic phantom dataset and a matching config.
    Toy {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        patients: usize,
        #[arg(long, default_value_t = 64)]
        size: u32,
        #[arg(long, default_value_t = 24)]
        target: u32,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_VERIFY: u8 = 2;

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| PipelineError::Usage("--config is required for this command".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.plan.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitCode, PipelineError> {
    match &cli.command {
        Command::Prepare => {
            let cfg = load_config(cli)?;
            let records = manifest::load_manifest(&cfg.manifest_path, cfg.validation_options())?;
            println!("{} patients valid", records.len());
        }
        Command::Run => {
            let cfg = load_config(cli)?;
            let summary = orchestrator::run_stage1(&cfg)?;
            println!(
                "{} written, {} failed, {} resamples -> {}",
                summary.written,
                summary.failed.len(),
                summary.resamples,
                cfg.output_dir.display()
            );
            for (id, reason) in &summary.failed {
                println!("failed {id}: {reason}");
            }
        }
        Command::Verify => {
            let cfg = load_config(cli)?;
            let report = orchestrator::verify(&cfg)?;
            for v in &report.violations {
                println!("{v}");
            }
            println!(
                "{} cases checked, {} violations",
                report.cases_checked,
                report.violations.len()
            );
            if !report.passed() {
                return Ok(ExitCode::from(EXIT_VERIFY));
            }
        }
        Command::Plan => {
            let cfg = load_config(cli)?;
            let text = std::fs::read_to_string(&cfg.manifest_path).map_err(|source| PipelineError::Io {
                path: cfg.manifest_path.clone(),
                source,
            })?;
            let base = cfg.manifest_path.parent().unwrap_or(std::path::Path::new("."));
            let records = manifest::parse_manifest(&text, base, &cfg.manifest_path)?;
            let plan = &cfg.plan;
            let m = records.len();
            let assignments = expand_plan(m, plan)?;
            let target = plan.target_cases as usize;
            println!(
                "M={m} S={} P={} capacity={} target={}",
                plan.s_per_patient,
                plan.p_per_patient,
                m as u64 * plan.s_per_patient as u64 * plan.p_per_patient as u64,
                target
            );
            let (base_q, extra) = (target / m, target % m);
            if extra > 0 {
                println!("patients 0..{extra} get {} cases, patients {extra}..{m} get {base_q}", base_q + 1);
            } else {
                println!("every patient gets {base_q} cases");
            }
            println!("{} assignments", assignments.len());
        }
        Command::Fid { real, fake, surrogate } => {
            let report = orchestrator::fid_command(real, fake, *surrogate)?;
            print!("{}", report.to_text());
        }
        Command::Toy {
            dir,
            patients,
            size,
            target,
        } => {
            toy::write_dataset(dir, *patients, *size, cli.seed.unwrap_or(0))
                .map_err(|e| PipelineError::Usage(e.to_string()))?;
            // Paths relative to the config file, which sits next to the manifest.
            let mut cfg = PipelineConfig::new("manifest.tsv", "out");
            cfg.plan.working_size = *size;
            cfg.plan.target_cases = *target;
            cfg.plan.master_seed = cli.seed.unwrap_or(0);
            cfg.ranges.translate_max = (*size * 60 / 256).max(1);
            cfg.min_tumor_area = 30usize.min((*size as usize * *size as usize) / 2000).max(1);
            let cfg_path = dir.join("pipeline.cfg");
            std::fs::write(&cfg_path, cfg.to_text()).map_err(|source| PipelineError::Io {
                path: cfg_path.clone(),
                source,
            })?;
            println!("wrote {} patients and {}", patients, cfg_path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
