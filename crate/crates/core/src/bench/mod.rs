//! Monte Carlo experiment harness: the heat-equation experiment with a
//! noisily observed diffusivity and blind deconvolution with a Laplace kernel.
//!
//! Each replication `r` of a cell `(ε, δ)` draws its observation from seed
//! `base_seed + r` and runs its chain on an independent stream of the same
//! seed, so cells share common random numbers and any replication can be
//! replayed in isolation.

pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::basis::{BasisSpec, CoefficientVector};
use crate::error::{Error, Result};
use crate::estimator::{
    galerkin_estimate, lepski_select, GalerkinConfig, LepskiConfig, LepskiDiagnostics,
};
use crate::forward::{simulate, simulate_noiseless, Observation};
use crate::operator::{laplace_singular_values, OperatorModel, ThetaParam};
use crate::posterior::{
    gibbs_run, ChainConfig, PosteriorSummary, PriorConfig, ThetaDim, ThetaUpdate,
};

pub use config::{parse_config, ConfigOverrides};
pub use report::{emit_report, read_rmise_csv, ReportFormat, RmiseRow};

/// `‖f₀‖²` for `f₀(x) = 4x(1 − x)(8x − 5)` on `[0, 1]`.
pub const F0_NORM_SQ: f64 = 184.0 / 105.0;

/// Sine coefficients `f₀,k = −8√2(13 + 11(−1)^k) / (π³k³)` for `k ≤ n`.
pub fn f0_coefficients(n: usize) -> CoefficientVector {
    CoefficientVector::from_fn(BasisSpec::sine(), n, |i| {
        let k = (i + 1) as f64;
        let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
        -8.0 * SQRT_2 * (13.0 + 11.0 * sign) / (PI.powi(3) * k.powi(3))
    })
}

/// Trigonometric coefficients of the same `f₀`: `⟨f₀, 1⟩ = −2/3`,
/// `⟨f₀, φ_{j,0}⟩ = −24√2/(π³j³)`, `⟨f₀, φ_{j,1}⟩ = 2√2/(π²j²)`.
pub fn f0_trig_coefficients(n: usize) -> CoefficientVector {
    CoefficientVector::from_fn(BasisSpec::trigonometric(), n, |i| {
        if i == 0 {
            return -2.0 / 3.0;
        }
        let j = i.div_ceil(2) as f64;
        if i % 2 == 1 {
            -24.0 * SQRT_2 / (PI.powi(3) * j.powi(3))
        } else {
            2.0 * SQRT_2 / (PI * PI * j * j)
        }
    })
}

/// `f₀(x) = 4x(1 − x)(8x − 5)`.
pub fn f0_closed_form(x: f64) -> f64 {
    4.0 * x * (1.0 - x) * (8.0 * x - 5.0)
}

/// `‖g − f₀‖²` for an estimate `g` of the truth, exact in the tail:
/// coefficients of `f₀` above `g`'s level contribute `‖f₀‖² − ‖P_J f₀‖²`.
pub fn squared_error_to_f0(g: &CoefficientVector) -> f64 {
    let truth = match g.basis().kind {
        crate::basis::BasisKind::SinePeriodic => f0_coefficients(g.level()),
        crate::basis::BasisKind::Trigonometric => f0_trig_coefficients(g.level()),
    };
    let head: f64 = g
        .coeffs()
        .iter()
        .zip(truth.coeffs())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let captured: f64 = truth.coeffs().iter().map(|c| c * c).sum();
    head + (F0_NORM_SQ - captured).max(0.0)
}

/// Pairwise (cascade) summation, deterministic for a fixed input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Heat61,
    Deconv62,
    Custom,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Heat61 => "heat",
            Preset::Deconv62 => "deconv",
            Preset::Custom => "custom",
        }
    }
}

/// Truth and forward operator of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSetup {
    /// Heat semigroup at time `t_time` with true diffusivity `theta0`, sine basis.
    Heat { t_time: f64, theta0: f64 },
    /// Convolution with the periodic Laplace kernel of bandwidth `h`,
    /// trigonometric basis, parameter = singular value sequence.
    Laplace { h: f64 },
}

impl ModelSetup {
    pub fn operator(&self) -> Result<OperatorModel> {
        match self {
            ModelSetup::Heat { t_time, .. } => OperatorModel::heat(*t_time),
            ModelSetup::Laplace { .. } => {
                Ok(OperatorModel::svd_diagonal(BasisSpec::trigonometric()))
            }
        }
    }

    pub fn theta0(&self, levels: usize) -> Result<ThetaParam> {
        match self {
            ModelSetup::Heat { theta0, .. } => Ok(ThetaParam::Scalar(*theta0)),
            ModelSetup::Laplace { h } => laplace_singular_values(*h, levels),
        }
    }

    pub fn truth(&self, level: usize) -> CoefficientVector {
        match self {
            ModelSetup::Heat { .. } => f0_coefficients(level),
            ModelSetup::Laplace { .. } => f0_trig_coefficients(level),
        }
    }

    fn policy(&self) -> ThetaUpdate {
        match self {
            ModelSetup::Heat { .. } => ThetaUpdate::MetropolisHastings,
            ModelSetup::Laplace { .. } => ThetaUpdate::ExactGaussian,
        }
    }

    fn theta_dim(&self) -> ThetaDim {
        match self {
            ModelSetup::Heat { .. } => ThetaDim::Scalar,
            ModelSetup::Laplace { .. } => ThetaDim::Sequence,
        }
    }
}

/// How the projection / prior truncation level is chosen per replication.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelRule {
    /// `J = round(√(−ln ε))`.
    SqrtLogEps,
    Fixed(usize),
    /// Lepski's rule on the Galerkin estimators.
    Lepski(LepskiConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub model: ModelSetup,
    pub eps_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub n_mc: usize,
    pub base_seed: u64,
    /// Prior variance of every `f` coefficient.
    pub tau_sq: f64,
    /// Prior variance of every θ coordinate.
    pub sigma_theta_sq: f64,
    pub level_rule: LevelRule,
    pub burn_in: usize,
    pub n_keep: usize,
    pub thin: usize,
    /// Initial random-walk scale as a multiple of δ.
    pub proposal_scale: f64,
    pub adapt_proposal: bool,
    pub galerkin: GalerkinConfig,
    /// Simulate without noise; the posterior mean is then the (exact)
    /// Galerkin solution and no chain is run.
    pub zero_noise: bool,
    pub output_dir: PathBuf,
    pub n_plot_draws: usize,
}

impl ExperimentConfig {
    /// Heat equation, `t = 0.1`, `ϑ₀ = 1`, `J = round(√(−ln ε))`.
    pub fn heat_preset() -> Self {
        ExperimentConfig {
            preset: Preset::Heat61,
            model: ModelSetup::Heat {
                t_time: 0.1,
                theta0: 1.0,
            },
            eps_grid: vec![1e-6],
            delta_grid: vec![1e-6],
            n_mc: 500,
            base_seed: 42,
            tau_sq: 1.0,
            sigma_theta_sq: 1.0,
            level_rule: LevelRule::SqrtLogEps,
            burn_in: 1000,
            n_keep: 500,
            thin: 5,
            proposal_scale: 2.0,
            adapt_proposal: true,
            galerkin: GalerkinConfig::default(),
            zero_noise: false,
            output_dir: PathBuf::from("out"),
            n_plot_draws: 20,
        }
    }

    /// Laplace kernel `h = 0.1`, trigonometric basis, Lepski-selected level.
    pub fn deconv_preset() -> Self {
        ExperimentConfig {
            preset: Preset::Deconv62,
            model: ModelSetup::Laplace { h: 0.1 },
            eps_grid: vec![1e-2],
            delta_grid: vec![1e-2],
            level_rule: LevelRule::Lepski(LepskiConfig::deconvolution_default()),
            ..ExperimentConfig::heat_preset()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() || self.delta_grid.is_empty() {
            return Err(Error::Config(
                "eps and delta grids must be non-empty".into(),
            ));
        }
        for &v in self.eps_grid.iter().chain(&self.delta_grid) {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!(
                    "noise levels must lie in (0, 1), got {v}"
                )));
            }
        }
        if self.n_mc == 0 {
            return Err(Error::Config("n_mc must be at least 1".into()));
        }
        if self.n_keep == 0 || self.thin == 0 {
            return Err(Error::Config("n_keep and thin must be positive".into()));
        }
        if !(self.tau_sq > 0.0 && self.sigma_theta_sq > 0.0) {
            return Err(Error::Config("prior variances must be positive".into()));
        }
        if !(self.proposal_scale > 0.0) {
            return Err(Error::Config("proposal scale must be positive".into()));
        }
        self.galerkin.validate()?;
        if let LevelRule::Lepski(l) = &self.level_rule {
            l.validate()?;
        }
        if let LevelRule::Fixed(0) = self.level_rule {
            return Err(Error::Config("fixed level must be at least 1".into()));
        }
        match self.model {
            ModelSetup::Heat { t_time, theta0 } if !(t_time > 0.0) || !theta0.is_finite() => Err(
                Error::Config("heat model needs t > 0 and a finite theta0".into()),
            ),
            ModelSetup::Laplace { h } if !(h > 0.0) => {
                Err(Error::Config("Laplace bandwidth must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// `(ε, δ)` cells: the Cartesian product of the grids, ε-major.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.eps_grid
            .iter()
            .flat_map(|&e| self.delta_grid.iter().map(move |&d| (e, d)))
            .collect()
    }

    /// Largest level any replication at noise `eps` may use.
    fn top_level(&self, eps: f64) -> Result<usize> {
        match &self.level_rule {
            LevelRule::SqrtLogEps => Ok(sqrt_log_level(eps)),
            LevelRule::Fixed(j) => Ok(*j),
            LevelRule::Lepski(l) => Ok(*l.candidates(eps)?.last().expect("non-empty grid")),
        }
    }

    fn chain_config(&self, delta: f64, seed: u64) -> ChainConfig {
        ChainConfig {
            burn_in: self.burn_in,
            n_keep: self.n_keep,
            thin: self.thin,
            proposal_sd: self.proposal_scale * delta,
            adapt_proposal: self.adapt_proposal,
            seed,
            record_trace: false,
        }
    }
}

/// `round(√(−ln ε))`, at least 1.
pub fn sqrt_log_level(eps: f64) -> usize {
    ((-eps.ln()).sqrt().round() as usize).max(1)
}

/// Table of published posterior-mean RMISE values for the heat experiment,
/// indexed by `(ε, δ)`.
pub fn heat_reference_rmise(eps: f64, delta: f64) -> Option<f64> {
    const TABLE: [(f64, f64, f64); 9] = [
        (1e-4, 1e-4, 0.5728),
        (1e-6, 1e-4, 0.3173),
        (1e-8, 1e-4, 0.5656),
        (1e-4, 1e-6, 0.5515),
        (1e-6, 1e-6, 0.3353),
        (1e-8, 1e-6, 0.0545),
        (1e-4, 1e-8, 0.5548),
        (1e-6, 1e-8, 0.3269),
        (1e-8, 1e-8, 0.0512),
    ];
    let close = |a: f64, b: f64| ((a / b) - 1.0).abs() < 1e-9;
    TABLE
        .iter()
        .find(|(e, d, _)| close(eps, *e) && close(delta, *d))
        .map(|(_, _, v)| *v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub seed: u64,
    pub level: usize,
    pub sq_err_post: f64,
    pub sq_err_galerkin: f64,
    pub sq_err_theta: f64,
    pub acceptance_rate: Option<f64>,
    pub cutoff_zeroed: bool,
}

/// Curves of one replication, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSample {
    pub truth: CoefficientVector,
    pub galerkin: CoefficientVector,
    pub posterior_mean: CoefficientVector,
    pub draws: Vec<CoefficientVector>,
}

/// Full output of a single replication.
#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    pub record: ReplicationRecord,
    pub observation: Observation,
    pub galerkin: CoefficientVector,
    pub summary: Option<PosteriorSummary>,
    pub lepski: Option<LepskiDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub eps: f64,
    pub delta: f64,
    pub n_mc: usize,
    pub rmise_post: f64,
    pub rmise_galerkin: f64,
    pub rmse_theta: f64,
    pub level_hist: BTreeMap<usize, usize>,
    pub records: Vec<ReplicationRecord>,
    pub plot: Option<PlotSample>,
    pub reference_rmise: Option<f64>,
}

impl CellReport {
    /// Relative frequency of selected levels falling in `levels`.
    pub fn level_frequency(&self, levels: &[usize]) -> f64 {
        let hits: usize = levels.iter().filter_map(|l| self.level_hist.get(l)).sum();
        hits as f64 / self.n_mc as f64
    }

    /// True when a published value exists and differs by more than 50%.
    pub fn deviates_from_reference(&self) -> bool {
        self.reference_rmise
            .is_some_and(|r| (self.rmise_post / r - 1.0).abs() > 0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub preset: Preset,
    pub cells: Vec<CellReport>,
    pub wall_clock_secs: f64,
    /// `key = value` rendering of the configuration that produced the report.
    pub config_echo: String,
    /// Set while cells are still missing (e.g. an interrupted run).
    pub partial: bool,
}

/// Runs replication `rep` of the cell `(eps, delta)`.
pub fn run_replication(
    cfg: &ExperimentConfig,
    eps: f64,
    delta: f64,
    rep: usize,
) -> Result<ReplicationOutput> {
    let seed = cfg.base_seed.wrapping_add(rep as u64);
    run_replication_with_seed(cfg, eps, delta, rep, seed, false)
}

/// As [`run_replication`] with an explicit seed; `record_trace` keeps the θ
/// chain trace in the summary.
pub fn run_replication_with_seed(
    cfg: &ExperimentConfig,
    eps: f64,
    delta: f64,
    rep: usize,
    seed: u64,
    record_trace: bool,
) -> Result<ReplicationOutput> {
    let model = cfg.operator()?;
    let top = cfg.top_level(eps)?;
    let n_sim = 4 * top.max(1);
    let theta0 = cfg.model.theta0(n_sim)?;
    let f0 = cfg.model.truth(n_sim);
    let mut obs = if cfg.zero_noise {
        let mut obs = simulate_noiseless(&model, &f0, &theta0, n_sim)?;
        // thresholds and σ_j floors still use the nominal noise level
        obs.eps = eps;
        obs
    } else {
        simulate(&model, &f0, &theta0, eps, delta, n_sim, seed)?
    };
    obs.seed = seed;

    let (level, lepski) = match &cfg.level_rule {
        LevelRule::SqrtLogEps => (sqrt_log_level(eps), None),
        LevelRule::Fixed(j) => (*j, None),
        LevelRule::Lepski(l) => {
            let (j, diag) = lepski_select(&obs, l, &cfg.galerkin)?;
            (j, Some(diag))
        }
    };
    let galerkin = galerkin_estimate(&obs, level, &cfg.galerkin)?;

    let (posterior_mean, sq_err_theta, acceptance_rate, summary) = if cfg.zero_noise {
        (galerkin.f.clone(), 0.0, None, None)
    } else {
        let prior = PriorConfig::new(
            model.basis(),
            level,
            cfg.tau_sq,
            cfg.sigma_theta_sq,
            cfg.model.theta_dim(),
        )?;
        let mut chain = cfg.chain_config(delta, seed);
        chain.record_trace = record_trace;
        let summary = gibbs_run(&obs, &prior, &chain, cfg.model.policy())?;
        let err = summary.rmse_theta(&theta0)?;
        (
            summary.mean_f.clone(),
            err * err,
            summary.acceptance_rate,
            Some(summary),
        )
    };

    let record = ReplicationRecord {
        rep,
        seed,
        level,
        sq_err_post: squared_error_to_f0(&posterior_mean),
        sq_err_galerkin: squared_error_to_f0(&galerkin.f),
        sq_err_theta,
        acceptance_rate,
        cutoff_zeroed: galerkin.branch == crate::estimator::CutoffBranch::Zeroed,
    };
    Ok(ReplicationOutput {
        record,
        observation: obs,
        galerkin: galerkin.f,
        summary,
        lepski,
    })
}

impl ExperimentConfig {
    pub fn operator(&self) -> Result<OperatorModel> {
        self.model.operator()
    }
}

fn plot_sample(cfg: &ExperimentConfig, out: &ReplicationOutput) -> PlotSample {
    let level = out.galerkin.level();
    let (posterior_mean, draws) = match &out.summary {
        Some(s) => {
            let n = cfg.n_plot_draws.min(s.draws_f.len());
            let stride = (s.draws_f.len() / n.max(1)).max(1);
            (
                s.mean_f.clone(),
                s.draws_f.iter().step_by(stride).take(n).cloned().collect(),
            )
        }
        None => (out.galerkin.clone(), Vec::new()),
    };
    PlotSample {
        truth: cfg.model.truth((4 * level).max(200)),
        galerkin: out.galerkin.clone(),
        posterior_mean,
        draws,
    }
}

/// Runs all replications of one cell in parallel and aggregates them.
pub fn run_cell(cfg: &ExperimentConfig, eps: f64, delta: f64) -> Result<CellReport> {
    let outputs: Vec<Result<(ReplicationRecord, Option<PlotSample>)>> = (0..cfg.n_mc)
        .into_par_iter()
        .map(|rep| {
            let out = run_replication(cfg, eps, delta, rep)?;
            let plot = (rep == 0).then(|| plot_sample(cfg, &out));
            Ok((out.record, plot))
        })
        .collect();
    let mut records = Vec::with_capacity(cfg.n_mc);
    let mut plot = None;
    for o in outputs {
        let (rec, p) = o?;
        if p.is_some() {
            plot = p;
        }
        records.push(rec);
    }
    Ok(aggregate_cell(cfg, eps, delta, records, plot))
}

fn aggregate_cell(
    cfg: &ExperimentConfig,
    eps: f64,
    delta: f64,
    records: Vec<ReplicationRecord>,
    plot: Option<PlotSample>,
) -> CellReport {
    let n = records.len() as f64;
    let rms = |sel: fn(&ReplicationRecord) -> f64| {
        let v: Vec<f64> = records.iter().map(sel).collect();
        (pairwise_sum(&v) / n).sqrt()
    };
    let mut level_hist = BTreeMap::new();
    for r in &records {
        *level_hist.entry(r.level).or_insert(0) += 1;
    }
    let reference_rmise = match cfg.preset {
        Preset::Heat61 => heat_reference_rmise(eps, delta),
        _ => None,
    };
    CellReport {
        eps,
        delta,
        n_mc: records.len(),
        rmise_post: rms(|r| r.sq_err_post),
        rmise_galerkin: rms(|r| r.sq_err_galerkin),
        rmse_theta: rms(|r| r.sq_err_theta),
        level_hist,
        records,
        plot,
        reference_rmise,
    }
}

/// Runs every cell; `on_cell` sees the report after each completed cell so
/// callers can flush partial results.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    mut on_cell: impl FnMut(&ExperimentReport) -> Result<()>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let cells = cfg.cells();
    let mut report = ExperimentReport {
        preset: cfg.preset,
        cells: Vec::with_capacity(cells.len()),
        wall_clock_secs: 0.0,
        config_echo: config::render_config(cfg),
        partial: true,
    };
    for (i, &(eps, delta)) in cells.iter().enumerate() {
        let cell = run_cell(cfg, eps, delta)?;
        if cell.deviates_from_reference() {
            log::warn!(
                "cell eps={eps:e} delta={delta:e}: RMISE {:.4} deviates by more than 50% from the published {:.4}",
                cell.rmise_post,
                cell.reference_rmise.unwrap_or(f64::NAN)
            );
        }
        report.cells.push(cell);
        report.partial = i + 1 < cells.len();
        report.wall_clock_secs = start.elapsed().as_secs_f64();
        on_cell(&report)?;
    }
    Ok(report)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(cfg, |_| Ok(()))
}

/// Heat experiment: MH updates for the scalar diffusivity.
pub fn run_heat(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if !matches!(cfg.model, ModelSetup::Heat { .. }) {
        return Err(Error::Config("run_heat needs the heat model".into()));
    }
    run_experiment(cfg)
}

/// Deconvolution experiment: exact Gaussian θ updates, Lepski level.
pub fn run_deconvolution(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if !matches!(cfg.model, ModelSetup::Laplace { .. }) {
        return Err(Error::Config(
            "run_deconvolution needs the Laplace model".into(),
        ));
    }
    run_experiment(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f0_coefficient_values() {
        let f0 = f0_coefficients(2);
        assert!((f0.coeffs()[0] + 16.0 * SQRT_2 / PI.powi(3)).abs() < 1e-15);
        assert!((f0.coeffs()[0].abs() - 0.72977).abs() < 5e-6);
        assert!((f0.coeffs()[1] + 24.0 * SQRT_2 / PI.powi(3)).abs() < 1e-15);
        assert!((f0.coeffs()[1].abs() - 1.09466).abs() < 1e-5);
    }

    #[test]
    fn sine_coefficients_match_quadrature() {
        let f0 = f0_coefficients(5);
        let n = 200_000;
        let basis = BasisSpec::sine();
        for (i, c) in f0.coeffs().iter().enumerate() {
            let q: f64 = (0..n)
                .map(|m| {
                    let x = (m as f64 + 0.5) / n as f64;
                    f0_closed_form(x) * basis.eval(i, x)
                })
                .sum::<f64>()
                / n as f64;
            assert!((q - c).abs() < 1e-8, "index {i}: {q} vs {c}");
        }
        let at_quarter = f0_coefficients(50).eval(0.25);
        assert!((at_quarter + 2.25).abs() < 1e-3, "{at_quarter}");
    }

    #[test]
    fn trig_coefficients_match_quadrature() {
        // midpoint rule on the closed form, an independent route
        let f0 = f0_trig_coefficients(4);
        let n = 200_000;
        let basis = BasisSpec::trigonometric();
        for (i, c) in f0.coeffs().iter().enumerate() {
            let q: f64 = (0..n)
                .map(|m| {
                    let x = (m as f64 + 0.5) / n as f64;
                    f0_closed_form(x) * basis.eval(i, x)
                })
                .sum::<f64>()
                / n as f64;
            assert!((q - c).abs() < 1e-8, "index {i}: {q} vs {c}");
        }
    }

    #[test]
    fn squared_error_of_zero_is_norm() {
        let z = CoefficientVector::zeros(BasisSpec::sine(), 4);
        assert!((squared_error_to_f0(&z) - F0_NORM_SQ).abs() < 1e-15);
        let exact = f0_trig_coefficients(5);
        let tail = squared_error_to_f0(&exact);
        assert!(tail > 0.0 && tail < 1e-3);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-9);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn level_rule() {
        assert_eq!(sqrt_log_level(1e-6), 4);
        assert_eq!(sqrt_log_level(1e-8), 4);
        assert_eq!(sqrt_log_level(1e-4), 3);
    }

    #[test]
    fn reference_lookup() {
        assert_eq!(heat_reference_rmise(1e-6, 1e-6), Some(0.3353));
        assert_eq!(heat_reference_rmise(1e-8, 1e-4), Some(0.5656));
        assert_eq!(heat_reference_rmise(1e-3, 1e-3), None);
    }

    #[test]
    fn empty_grid_rejected() {
        let mut cfg = ExperimentConfig::heat_preset();
        cfg.eps_grid.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::heat_preset();
        cfg.n_mc = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_noise_deconv_smoke() {
        let mut cfg = ExperimentConfig::deconv_preset();
        cfg.zero_noise = true;
        cfg.n_mc = 1;
        let report = run_deconvolution(&cfg).unwrap();
        let cell = &report.cells[0];
        let level = *cell.level_hist.keys().next().unwrap();
        let truth = f0_trig_coefficients(level);
        let bias = (F0_NORM_SQ - truth.l2_norm().powi(2)).sqrt();
        assert!((cell.rmise_post - bias).abs() < 1e-12);
    }

    #[test]
    fn heat_smoke_run() {
        let mut cfg = ExperimentConfig::heat_preset();
        cfg.n_mc = 3;
        cfg.burn_in = 50;
        cfg.n_keep = 20;
        cfg.thin = 2;
        let report = run_heat(&cfg).unwrap();
        assert_eq!(report.cells.len(), 1);
        let cell = &report.cells[0];
        assert_eq!(cell.records.len(), 3);
        assert!(cell.rmise_post.is_finite() && cell.rmise_post > 0.0);
        assert_eq!(cell.level_hist.get(&4), Some(&3));
        assert!(cell.plot.is_some());
        assert!(run_deconvolution(&cfg).is_err());
    }
}
