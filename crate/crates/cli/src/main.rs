use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interlayer::imaging::{load_image, save_image};
use interlayer::pipeline::config::parse_reals;
use interlayer::pipeline::{
    render_at_threshold, run_analysis, synth_sample, write_report, AnalysisConfig, Emit, PhantomSpec,
};
use interlayer::pso::optimize_threshold;

/// PSO threshold segmentation and attention maps for layered-deposition micrographs.
#[derive(Parser)]
#[command(name = "interlayer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    swarm_size: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Threshold search interval, `LO,HI`
    #[arg(long)]
    bounds: Option<String>,
    /// all | none | comma list of mask, overlay, composite, saliency
    #[arg(long)]
    emit: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize, segment and render every input, then write report.json
    Analyze {
        #[command(flatten)]
        overrides: Overrides,
        /// Image file or directory of .pgm/.png files; repeatable
        #[arg(long)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report path (default: <out>/report.json)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render synthetic micrographs and their ground-truth masks
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Base seed; sample i uses seed + i
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the optimal threshold of one image as JSON
    Optimize {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        input: PathBuf,
    },
    /// Re-render visualizations at a fixed threshold
    Render {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        threshold: u8,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Sample(String),
}

impl From<interlayer::Error> for Failure {
    fn from(e: interlayer::Error) -> Self {
        Failure::Sample(e.to_string())
    }
}

fn build_config(o: &Overrides) -> Result<AnalysisConfig, Failure> {
    let usage = |e: interlayer::Error| Failure::Usage(e.to_string());
    let mut cfg = match &o.config {
        Some(path) => AnalysisConfig::load(path).map_err(usage)?,
        None => AnalysisConfig::default(),
    };
    if let Some(seed) = o.seed {
        cfg.pso.seed = seed;
    }
    if let Some(n) = o.swarm_size {
        cfg.pso.swarm_size = n;
    }
    if let Some(n) = o.iterations {
        cfg.pso.max_iterations = n;
    }
    if let Some(b) = &o.bounds {
        let [lo, hi] = parse_reals::<2>(b).map_err(|m| Failure::Usage(format!("--bounds: {m}")))?;
        cfg.pso.bounds = (lo, hi);
    }
    if let Some(e) = &o.emit {
        cfg.emit = e.parse::<Emit>().map_err(|m| Failure::Usage(format!("--emit: {m}")))?;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn to_json(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values always serialize")
}

fn sample_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample".into())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze {
            overrides,
            input,
            out,
            report,
        } => {
            let mut cfg = build_config(&overrides)?;
            if !input.is_empty() {
                cfg.inputs = input;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let result = run_analysis(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
            let report_path = report.unwrap_or_else(|| cfg.output_dir.join("report.json"));
            write_report(&result, &report_path)?;
            let failed = result.samples.iter().filter(|s| s.is_failed()).count();
            eprintln!(
                "analyzed {} sample(s), {failed} failed; report at {}",
                result.samples.len(),
                report_path.display()
            );
            for s in result.samples.iter().filter(|s| s.is_failed()) {
                eprintln!("  {}: {}", s.sample_id, s.error.as_deref().unwrap_or_default());
            }
            if failed > 0 {
                return Err(Failure::Sample(format!("{failed} sample(s) failed")));
            }
        }
        Command::Synth {
            spec,
            out,
            count,
            seed,
        } => {
            let base = PhantomSpec::load(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
            std::fs::create_dir_all(&out).map_err(|e| Failure::Sample(format!("{}: {e}", out.display())))?;
            let stem = sample_id(&spec);
            let first_seed = seed.unwrap_or(base.seed);
            for i in 0..count {
                let s = PhantomSpec {
                    seed: first_seed.wrapping_add(i as u64),
                    ..base.clone()
                };
                let name = if count == 1 { stem.clone() } else { format!("{stem}-{}", i + 1) };
                let (image, truth) = synth_sample(&s)?;
                save_image(&image, out.join(format!("{name}.pgm")))?;
                save_image(&truth.deposit, out.join(format!("{name}_deposit_gt.pgm")))?;
                save_image(&truth.voids, out.join(format!("{name}_voids_gt.pgm")))?;
                println!("{}", out.join(format!("{name}.pgm")).display());
            }
        }
        Command::Optimize { overrides, input } => {
            let cfg = build_config(&overrides)?;
            let image = load_image(&input)?;
            let r = optimize_threshold(&image, &cfg.pso, &cfg.fitness)?;
            println!(
                "{}",
                to_json(&serde_json::json!({
                    "input": input.display().to_string(),
                    "threshold": r.best_threshold,
                    "best_fitness": r.best_fitness,
                    "iterations": r.history.len(),
                    "evaluations": r.evaluations,
                    "seed": cfg.pso.seed,
                }))
            );
        }
        Command::Render {
            overrides,
            input,
            threshold,
            out,
        } => {
            let cfg = build_config(&overrides)?;
            std::fs::create_dir_all(&out).map_err(|e| Failure::Sample(format!("{}: {e}", out.display())))?;
            let image = load_image(&input)?;
            let record = render_at_threshold(
                &sample_id(&input),
                &input.display().to_string(),
                &image,
                threshold,
                &cfg,
                &out,
            )?;
            println!("{}", to_json(&serde_json::to_value(&record).expect("record serializes")));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Sample(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
