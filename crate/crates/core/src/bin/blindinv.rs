use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blindinv::bench::report::render_svg;
use blindinv::bench::{
    emit_report, parse_config, run_experiment_with, run_replication_with_seed, ConfigOverrides,
    ExperimentConfig, PlotSample, Preset, ReportFormat,
};
use blindinv::forward::write_observation;
use blindinv::{Error, Result};

#[derive(Parser)]
#[command(
    name = "blindinv",
    version,
    about = "Bayesian inverse problems with unknown operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heat equation with unknown diffusivity.
    Heat(RunArgs),
    /// Deconvolution with an unknown Laplace kernel.
    Deconv(RunArgs),
    /// Experiment driven entirely by a config file.
    Custom(RunArgs),
    /// Re-run a single replication and dump its observation, chain and plot.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` config file; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Observation noise level(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Operator noise level(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    /// Base seed; replication r uses seed + r
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed projection level instead of the preset rule.
    #[arg(long)]
    level: Option<usize>,
    /// Simulate without noise (smoke runs).
    #[arg(long)]
    zero_noise: bool,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Monte Carlo replications per cell
    #[arg(long)]
    n_mc: Option<usize>,
    /// Skip the SVG plots.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Preset the replication belongs to.
    #[arg(long, default_value = "heat")]
    preset: String,
    /// Replication index; its seed is the base seed plus this index.
    #[arg(long, default_value_t = 0)]
    rep: usize,
}

fn load(preset: Preset, common: &CommonArgs, n_mc: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(path, preset)?,
        None => match preset {
            Preset::Heat61 => ExperimentConfig::heat_preset(),
            Preset::Deconv62 => ExperimentConfig::deconv_preset(),
            Preset::Custom => {
                return Err(Error::Config("custom runs need --config".into()));
            }
        },
    };
    ConfigOverrides {
        eps: common.eps.clone(),
        delta: common.delta.clone(),
        n_mc,
        seed: common.seed,
        out: common.out.clone(),
        zero_noise: common.zero_noise,
        level: common.level,
    }
    .apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(preset: Preset, args: &RunArgs) -> Result<()> {
    let cfg = load(preset, &args.common, args.n_mc)?;
    let out = cfg.output_dir.clone();
    log::info!(
        "{} cells x {} replications -> {}",
        cfg.cells().len(),
        cfg.n_mc,
        out.display()
    );
    // rewrite the CSVs after every cell so an interrupted run leaves a
    // partial report behind
    let report = run_experiment_with(&cfg, |partial| {
        emit_report(partial, ReportFormat::Csv, &out).map(|_| ())
    })?;
    if !args.no_plots {
        emit_report(&report, ReportFormat::SvgPlots, &out)?;
    }
    for c in &report.cells {
        println!(
            "eps={:e} delta={:e} rmise_post={:.4} rmise_galerkin={:.4} rmse_theta={:.3e}{}",
            c.eps,
            c.delta,
            c.rmise_post,
            c.rmise_galerkin,
            c.rmse_theta,
            c.reference_rmise
                .map(|r| format!(" (published {r:.4})"))
                .unwrap_or_default()
        );
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn replay(args: &ReplayArgs) -> Result<()> {
    let preset = match args.preset.as_str() {
        "heat" => Preset::Heat61,
        "deconv" => Preset::Deconv62,
        "custom" => Preset::Custom,
        other => return Err(Error::Config(format!("unknown preset {other:?}"))),
    };
    let cfg = load(preset, &args.common, None)?;
    let (eps, delta) = match cfg.cells().as_slice() {
        [cell] => *cell,
        _ => {
            return Err(Error::Config(
                "replay needs exactly one eps and one delta".into(),
            ))
        }
    };
    let seed = cfg.base_seed.wrapping_add(args.rep as u64);
    let out = run_replication_with_seed(&cfg, eps, delta, args.rep, seed, true)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    write_observation(&out.observation, dir)?;
    out.galerkin.write_csv(create(&dir.join("galerkin.csv"))?)?;
    if let Some(s) = &out.summary {
        s.write_csv(create(&dir.join("summary.csv"))?)?;
        s.write_trace_csv(create(&dir.join("trace.csv"))?)?;
    }
    if let Some(l) = &out.lepski {
        l.write_csv(create(&dir.join("lepski.csv"))?)?;
    }
    let plot = PlotSample {
        truth: cfg.model.truth((4 * out.galerkin.level()).max(200)),
        galerkin: out.galerkin.clone(),
        posterior_mean: out
            .summary
            .as_ref()
            .map(|s| s.mean_f.clone())
            .unwrap_or_else(|| out.galerkin.clone()),
        draws: out
            .summary
            .as_ref()
            .map(|s| s.draws_f.iter().take(cfg.n_plot_draws).cloned().collect())
            .unwrap_or_default(),
    };
    let title = format!("replication {} (seed {seed})", args.rep);
    let path = dir.join("replay.svg");
    fs::write(&path, render_svg(&plot, &title, 512)?).map_err(|e| Error::io(&path, e))?;

    let r = &out.record;
    println!(
        "seed={} level={} sq_err_post={:.6e} sq_err_galerkin={:.6e} sq_err_theta={:.6e} acceptance={}",
        r.seed,
        r.level,
        r.sq_err_post,
        r.sq_err_galerkin,
        r.sq_err_theta,
        r.acceptance_rate
            .map(|a| format!("{a:.3}"))
            .unwrap_or_else(|| "-".into())
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Heat(a) => run(Preset::Heat61, a),
        Command::Deconv(a) => run(Preset::Deconv62, a),
        Command::Custom(a) => run(Preset::Custom, a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io { .. } => 1,
                ref e if e.is_config_error() => 2,
                _ => 3,
            })
        }
    }
}
