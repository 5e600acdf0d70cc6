//! Truncated Gaussian product priors and a Metropolis-within-Gibbs sampler
//! for the joint posterior of `(f, θ)`.
//!
//! Given θ, the coefficients of `f` are conditionally independent Gaussians
//! (conjugacy). Given `f`, θ is either updated by a random-walk
//! Metropolis-Hastings step (heat model, where `ρ_{θ,k}` is non-linear in θ)
//! or drawn exactly (diagonal model, where `θ ↦ K_θ f` is linear).
//!
//! Every computation is restricted to the prior truncation level `J`:
//! coefficients above `J` never enter the projected exponent.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{csv_err, BasisSpec, CoefficientVector};
use crate::error::{Error, Result};
use crate::forward::{log_likelihood_ratio, log_prior_theta, seeded_rng, Observation};
use crate::operator::{OperatorKind, ThetaParam};

/// Acceptance rate targeted by burn-in adaptation of the proposal scale.
pub const TARGET_ACCEPTANCE: f64 = 0.3;

/// ChaCha stream used by chains, keeping them independent of the simulation
/// stream (0) drawn from the same seed.
const CHAIN_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaDim {
    Scalar,
    Sequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub basis: BasisSpec,
    /// Truncation level `J`; the prior on `f` lives on `V_J`.
    pub level: usize,
    /// Per-level coefficient variances, starting at the basis' smallest level.
    pub tau_sq: Vec<f64>,
    pub sigma_theta_sq: f64,
    pub theta_dim: ThetaDim,
}

impl PriorConfig {
    /// Prior with the same variance `tau_sq` on every coefficient.
    pub fn new(
        basis: BasisSpec,
        level: usize,
        tau_sq: f64,
        sigma_theta_sq: f64,
        theta_dim: ThetaDim,
    ) -> Result<Self> {
        let n = (level + 1).saturating_sub(basis.min_level());
        PriorConfig::with_level_variances(basis, level, vec![tau_sq; n], sigma_theta_sq, theta_dim)
    }

    pub fn with_level_variances(
        basis: BasisSpec,
        level: usize,
        tau_sq: Vec<f64>,
        sigma_theta_sq: f64,
        theta_dim: ThetaDim,
    ) -> Result<Self> {
        let needed = (level + 1).saturating_sub(basis.min_level());
        if tau_sq.len() != needed {
            return Err(Error::Config(format!(
                "prior at level {level} needs {needed} variances, got {}",
                tau_sq.len()
            )));
        }
        if tau_sq.iter().chain([&sigma_theta_sq]).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("prior variances must be positive".into()));
        }
        Ok(PriorConfig {
            basis,
            level,
            tau_sq,
            sigma_theta_sq,
            theta_dim,
        })
    }

    pub fn tau_sq_at_level(&self, level: usize) -> f64 {
        self.tau_sq[level - self.basis.min_level()]
    }

    /// Number of θ coordinates the prior covers.
    pub fn theta_len(&self) -> usize {
        match self.theta_dim {
            ThetaDim::Scalar => 1,
            ThetaDim::Sequence => (self.level + 1).saturating_sub(self.basis.min_level()),
        }
    }

    /// Same prior, truncated (or extended with the last variance) to `level`.
    pub fn at_level(&self, level: usize) -> PriorConfig {
        let n = (level + 1).saturating_sub(self.basis.min_level());
        let last = self.tau_sq.last().copied().unwrap_or(1.0);
        let mut tau_sq = self.tau_sq.clone();
        tau_sq.resize(n, last);
        PriorConfig {
            level,
            tau_sq,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub n_keep: usize,
    pub thin: usize,
    /// Standard deviation of the random-walk increments.
    pub proposal_sd: f64,
    /// Robbins-Monro tuning of the proposal scale, during burn-in only.
    pub adapt_proposal: bool,
    pub seed: u64,
    pub record_trace: bool,
}

impl ChainConfig {
    /// `B = 1000`, `M = 500`, `l = 5`, `v = 2δ`, adaptation on.
    pub fn for_delta(delta: f64, seed: u64) -> Self {
        ChainConfig {
            burn_in: 1000,
            n_keep: 500,
            thin: 5,
            proposal_sd: 2.0 * delta,
            adapt_proposal: true,
            seed,
            record_trace: false,
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.burn_in + self.n_keep * self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_keep == 0 || self.thin == 0 {
            return Err(Error::Config("n_keep and thin must be positive".into()));
        }
        if !(self.proposal_sd > 0.0 && self.proposal_sd.is_finite()) {
            return Err(Error::Config(format!(
                "proposal sd must be positive, got {}",
                self.proposal_sd
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalCoord {
    pub mean: f64,
    pub var: f64,
}

impl NormalCoord {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.var.sqrt() * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaUpdate {
    /// Random-walk Metropolis-Hastings on θ.
    MetropolisHastings,
    /// Exact draw from the Gaussian full conditional (diagonal model only).
    ExactGaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    /// Rao-Blackwellised mean: the average of `E[f | θ, Y, T]` over kept θ.
    pub mean_f: CoefficientVector,
    /// Plain average of the kept `f` draws.
    pub draw_mean_f: CoefficientVector,
    pub draws_f: Vec<CoefficientVector>,
    pub mean_theta: ThetaParam,
    pub draws_theta: Vec<ThetaParam>,
    /// Share of accepted MH proposals after burn-in; `None` for exact updates.
    pub acceptance_rate: Option<f64>,
    /// Proposal scale in use after burn-in.
    pub proposal_sd: f64,
    /// Average over kept θ of the conditional variances `Var[f_k | θ]`.
    pub mean_conditional_var: Vec<f64>,
    /// Posterior variance per coefficient: mean conditional variance plus the
    /// spread of the conditional means.
    pub posterior_var: Vec<f64>,
    pub trace: Option<Vec<TraceRow>>,
}

impl PosteriorSummary {
    pub fn mean_theta(&self) -> &ThetaParam {
        &self.mean_theta
    }

    /// Euclidean error of the posterior mean of θ. Sequence truths are
    /// truncated to the levels the chain sampled.
    pub fn rmse_theta(&self, theta0: &ThetaParam) -> Result<f64> {
        let truth = match (&self.mean_theta, theta0) {
            (ThetaParam::Sequence(m), ThetaParam::Sequence(t)) if t.len() >= m.len() => {
                theta0.truncate(m.len())
            }
            _ => theta0.clone(),
        };
        self.mean_theta.distance(&truth)
    }

    /// CSV with header `index,level,mean,variance`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["index", "level", "mean", "variance"])
            .map_err(csv_err)?;
        let basis = self.mean_f.basis();
        for (i, (m, v)) in self
            .mean_f
            .coeffs()
            .iter()
            .zip(&self.posterior_var)
            .enumerate()
        {
            wtr.write_record([
                i.to_string(),
                basis.frequency_of(i).to_string(),
                format!("{m:?}"),
                format!("{v:?}"),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Trace CSV with header `iter,theta...,acc_flag`; empty body when no
    /// trace was recorded.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let width = self.mean_theta.as_slice().len();
        let mut header = vec!["iter".to_string()];
        if width == 1 {
            header.push("theta".into());
        } else {
            header.extend((0..width).map(|i| format!("theta_{i}")));
        }
        header.push("acc_flag".into());
        wtr.write_record(&header).map_err(csv_err)?;
        for row in self.trace.iter().flatten() {
            let mut rec = vec![row.iter.to_string()];
            rec.extend(row.theta.iter().map(|v| format!("{v:?}")));
            rec.push(u8::from(row.accepted).to_string());
            wtr.write_record(&rec).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn check_noisy(obs: &Observation) -> Result<()> {
    if !(obs.eps > 0.0 && obs.delta > 0.0) {
        return Err(Error::Config(
            "posterior computations need eps > 0 and delta > 0".into(),
        ));
    }
    Ok(())
}

/// `f | θ, Y, T` on `V_J`: per coordinate
/// `N(ε⁻²ρ Y_k / (ε⁻²ρ² + τ⁻²), 1 / (ε⁻²ρ² + τ⁻²))`, the same law as
/// `N(ε⁻²ρ⁻¹Y_k / (ε⁻² + ρ⁻²τ⁻²), ρ⁻² / (ε⁻² + ρ⁻²τ⁻²))`.
pub fn conditional_f_given_theta(
    obs: &Observation,
    theta: &ThetaParam,
    prior: &PriorConfig,
) -> Result<Vec<NormalCoord>> {
    check_noisy(obs)?;
    if obs.sim_level() < prior.level {
        return Err(Error::LevelMismatch(format!(
            "prior level {} above observation level {}",
            prior.level,
            obs.sim_level()
        )));
    }
    let basis = obs.model.basis();
    let inv_eps2 = obs.eps.powi(-2);
    let rho = obs.model.singular_values(theta, prior.level)?;
    rho.iter()
        .zip(obs.y.coeffs())
        .enumerate()
        .map(|(i, (&r, &y))| {
            if r == 0.0 {
                return Err(Error::SingularOperator { index: i });
            }
            let precision = inv_eps2 * r * r + 1.0 / prior.tau_sq_at_level(basis.level_of(i));
            Ok(NormalCoord {
                mean: inv_eps2 * r * y / precision,
                var: 1.0 / precision,
            })
        })
        .collect()
}

/// `θ | f, Y, T` for the diagonal model, one Gaussian per level `≤ j`:
/// precision `ε⁻² Σ f_k² + δ⁻² + σ⁻²` and mean
/// `(ε⁻² Σ f_k Y_k + δ⁻² T_l) / precision`, the sums running over the basis
/// functions of level `l`.
pub fn theta_conditional_gaussian(
    obs: &Observation,
    f: &CoefficientVector,
    j: usize,
    prior: &PriorConfig,
) -> Result<Vec<NormalCoord>> {
    check_noisy(obs)?;
    if obs.model.kind() != OperatorKind::SvdDiagonal {
        return Err(Error::ModelMismatch(
            "exact theta updates need an operator that is linear in theta".into(),
        ));
    }
    if f.level() > j || j > obs.sim_level() {
        return Err(Error::LevelMismatch(format!(
            "need f level {} <= j = {j} <= observation level {}",
            f.level(),
            obs.sim_level()
        )));
    }
    let basis = obs.model.basis();
    let first = basis.min_level();
    let n = j + 1 - first;
    let mut ff = vec![0.0; n];
    let mut fy = vec![0.0; n];
    for (i, (fk, yk)) in f.coeffs().iter().zip(obs.y.coeffs()).enumerate() {
        let slot = basis.level_of(i) - first;
        ff[slot] += fk * fk;
        fy[slot] += fk * yk;
    }
    let inv_eps2 = obs.eps.powi(-2);
    let inv_delta2 = obs.delta.powi(-2);
    (0..n)
        .map(|slot| {
            let precision = inv_eps2 * ff[slot] + inv_delta2 + 1.0 / prior.sigma_theta_sq;
            let t = obs.t_at_level(first + slot)?;
            Ok(NormalCoord {
                mean: (inv_eps2 * fy[slot] + inv_delta2 * t) / precision,
                var: 1.0 / precision,
            })
        })
        .collect()
}

/// Log acceptance ratio of a move `θ → θ'` with `f` fixed: projected
/// likelihood ratio plus prior ratio. The proposal is symmetric.
pub fn mh_log_ratio(
    obs: &Observation,
    f: &CoefficientVector,
    theta: &ThetaParam,
    proposal: &ThetaParam,
    j: usize,
    prior: &PriorConfig,
) -> Result<f64> {
    Ok(
        log_likelihood_ratio(obs, f, theta, proposal, j)? + log_prior_theta(proposal, prior)?
            - log_prior_theta(theta, prior)?,
    )
}

/// One random-walk MH update of θ with `N(0, v²)` increments on every
/// coordinate. Returns the current θ on rejection.
#[allow(clippy::too_many_arguments)]
pub fn mh_theta_step<R: Rng + ?Sized>(
    obs: &Observation,
    f: &CoefficientVector,
    theta: &ThetaParam,
    j: usize,
    prior: &PriorConfig,
    proposal_sd: f64,
    rng: &mut R,
) -> Result<(ThetaParam, bool)> {
    let proposal = theta.map(|v| {
        let z: f64 = rng.sample(StandardNormal);
        v + proposal_sd * z
    });
    let u: f64 = rng.random();
    mh_decide(obs, f, theta, proposal, j, prior, u)
}

/// Accept/reject for a given proposal and uniform draw `u`.
pub fn mh_decide(
    obs: &Observation,
    f: &CoefficientVector,
    theta: &ThetaParam,
    proposal: ThetaParam,
    j: usize,
    prior: &PriorConfig,
    u: f64,
) -> Result<(ThetaParam, bool)> {
    let log_ratio = mh_log_ratio(obs, f, theta, &proposal, j, prior)?;
    // log_ratio = 0 (θ' = θ) gives acceptance probability 1 for every u < 1
    if log_ratio >= 0.0 || u < log_ratio.exp() {
        Ok((proposal, true))
    } else {
        Ok((theta.clone(), false))
    }
}

fn check_policy(obs: &Observation, prior: &PriorConfig, policy: ThetaUpdate) -> Result<()> {
    match (obs.model.kind(), &obs.t, prior.theta_dim) {
        (OperatorKind::Heat { .. }, ThetaParam::Scalar(_), ThetaDim::Scalar)
        | (OperatorKind::SvdDiagonal, ThetaParam::Sequence(_), ThetaDim::Sequence) => {}
        _ => {
            return Err(Error::ShapeMismatch(
                "prior theta shape does not match the observation".into(),
            ))
        }
    }
    if policy == ThetaUpdate::ExactGaussian && obs.model.kind() != OperatorKind::SvdDiagonal {
        return Err(Error::ModelMismatch(
            "exact Gaussian theta updates need the diagonal model".into(),
        ));
    }
    if prior.basis != obs.model.basis() {
        return Err(Error::ModelMismatch(
            "prior and observation bases differ".into(),
        ));
    }
    Ok(())
}

/// Runs the Gibbs sampler on `V_J` (`J = prior.level`) from `θ⁽⁰⁾ = P_J T`.
///
/// Each sweep draws `f ~ f | θ` exactly and then updates θ per `policy`.
/// After `burn_in` sweeps every `thin`-th state is kept until `n_keep` states
/// are collected.
pub fn gibbs_run(
    obs: &Observation,
    prior: &PriorConfig,
    chain: &ChainConfig,
    policy: ThetaUpdate,
) -> Result<PosteriorSummary> {
    let mut rng = seeded_rng(chain.seed);
    rng.set_stream(CHAIN_STREAM);
    gibbs_run_with_rng(obs, prior, chain, policy, &mut rng)
}

pub fn gibbs_run_with_rng(
    obs: &Observation,
    prior: &PriorConfig,
    chain: &ChainConfig,
    policy: ThetaUpdate,
    rng: &mut ChaCha8Rng,
) -> Result<PosteriorSummary> {
    check_noisy(obs)?;
    chain.validate()?;
    check_policy(obs, prior, policy)?;
    let j = prior.level;
    if obs.sim_level() < j {
        return Err(Error::LevelMismatch(format!(
            "prior level {j} above observation level {}",
            obs.sim_level()
        )));
    }
    let basis = obs.model.basis();
    let dim = basis.dim(j);
    let mut theta = obs.t.truncate(prior.theta_len());
    let mut log_sd = chain.proposal_sd.ln();

    let mut draws_f = Vec::with_capacity(chain.n_keep);
    let mut draws_theta = Vec::with_capacity(chain.n_keep);
    let mut sum_cond_mean = vec![0.0; dim];
    let mut sum_cond_mean_sq = vec![0.0; dim];
    let mut sum_cond_var = vec![0.0; dim];
    let mut sum_draw = vec![0.0; dim];
    let mut accepted_after_burn = 0usize;
    let mut steps_after_burn = 0usize;
    let mut trace = chain.record_trace.then(Vec::new);

    for iter in 0..chain.total_iterations() {
        let cond = conditional_f_given_theta(obs, &theta, prior)?;
        let f = CoefficientVector::new(basis, j, cond.iter().map(|c| c.sample(rng)).collect())?;
        if f.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(Error::ChainDiverged { iter });
        }

        let accepted = match policy {
            ThetaUpdate::MetropolisHastings => {
                let (next, accepted) = mh_theta_step(obs, &f, &theta, j, prior, log_sd.exp(), rng)?;
                theta = next;
                if chain.adapt_proposal && iter < chain.burn_in {
                    let gain = 1.0 / ((iter + 1) as f64).powf(0.6);
                    log_sd += gain * (f64::from(u8::from(accepted)) - TARGET_ACCEPTANCE);
                }
                accepted
            }
            ThetaUpdate::ExactGaussian => {
                let conds = theta_conditional_gaussian(obs, &f, j, prior)?;
                theta = ThetaParam::Sequence(conds.iter().map(|c| c.sample(rng)).collect());
                true
            }
        };
        if !theta.is_finite() {
            return Err(Error::ChainDiverged { iter });
        }
        if let Some(t) = trace.as_mut() {
            t.push(TraceRow {
                iter,
                theta: theta.as_slice().to_vec(),
                accepted,
            });
        }
        if iter < chain.burn_in {
            continue;
        }
        steps_after_burn += 1;
        accepted_after_burn += usize::from(accepted);
        if !(iter - chain.burn_in + 1).is_multiple_of(chain.thin) {
            continue;
        }
        let kept_cond = conditional_f_given_theta(obs, &theta, prior)?;
        for (k, c) in kept_cond.iter().enumerate() {
            sum_cond_mean[k] += c.mean;
            sum_cond_mean_sq[k] += c.mean * c.mean;
            sum_cond_var[k] += c.var;
            sum_draw[k] += f.coeffs()[k];
        }
        draws_f.push(f);
        draws_theta.push(theta.clone());
    }

    let m = draws_f.len() as f64;
    let mean_f = CoefficientVector::new(basis, j, sum_cond_mean.iter().map(|s| s / m).collect())?;
    let draw_mean_f = CoefficientVector::new(basis, j, sum_draw.iter().map(|s| s / m).collect())?;
    let mean_conditional_var: Vec<f64> = sum_cond_var.iter().map(|s| s / m).collect();
    let posterior_var = (0..dim)
        .map(|k| {
            let mean = sum_cond_mean[k] / m;
            let spread = (sum_cond_mean_sq[k] / m - mean * mean).max(0.0);
            mean_conditional_var[k] + spread
        })
        .collect();
    let mean_theta = {
        let width = theta.as_slice().len();
        let mut acc = vec![0.0; width];
        for t in &draws_theta {
            for (a, v) in acc.iter_mut().zip(t.as_slice()) {
                *a += v;
            }
        }
        let avg: Vec<f64> = acc.iter().map(|a| a / m).collect();
        match theta {
            ThetaParam::Scalar(_) => ThetaParam::Scalar(avg[0]),
            ThetaParam::Sequence(_) => ThetaParam::Sequence(avg),
        }
    };
    let acceptance_rate = match policy {
        ThetaUpdate::MetropolisHastings => {
            Some(accepted_after_burn as f64 / steps_after_burn.max(1) as f64)
        }
        ThetaUpdate::ExactGaussian => None,
    };
    Ok(PosteriorSummary {
        mean_f,
        draw_mean_f,
        draws_f,
        mean_theta,
        draws_theta,
        acceptance_rate,
        proposal_sd: log_sd.exp(),
        mean_conditional_var,
        posterior_var,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::simulate;
    use crate::operator::OperatorModel;

    fn unit_obs(y: Vec<f64>, t: Vec<f64>, eps: f64, delta: f64) -> Observation {
        let basis = BasisSpec::sine();
        let level = y.len();
        Observation {
            y: CoefficientVector::new(basis, level, y).unwrap(),
            t: ThetaParam::Sequence(t),
            eps,
            delta,
            seed: 0,
            model: OperatorModel::svd_diagonal(basis),
        }
    }

    #[test]
    fn conjugate_formula_examples() {
        let obs = unit_obs(vec![3.0], vec![1.0], 1.0, 1.0);
        let prior = PriorConfig::new(BasisSpec::sine(), 1, 1.0, 1.0, ThetaDim::Sequence).unwrap();
        let c = conditional_f_given_theta(&obs, &ThetaParam::Sequence(vec![1.0]), &prior).unwrap();
        assert_eq!(c[0].mean, 1.5);
        assert_eq!(c[0].var, 0.5);

        let flat = PriorConfig::new(BasisSpec::sine(), 1, 1e300, 1.0, ThetaDim::Sequence).unwrap();
        let c = conditional_f_given_theta(&obs, &ThetaParam::Sequence(vec![1.0]), &flat).unwrap();
        assert!((c[0].mean - 3.0).abs() < 1e-12);
        assert!((c[0].var - 1.0).abs() < 1e-12);

        let sharp = unit_obs(vec![3.0], vec![0.5], 1e-9, 1.0);
        let c =
            conditional_f_given_theta(&sharp, &ThetaParam::Sequence(vec![0.5]), &prior).unwrap();
        assert!((c[0].mean - 6.0).abs() < 1e-9);
        assert!(c[0].var < 1e-17);
    }

    #[test]
    fn singular_operator_reported() {
        let obs = unit_obs(vec![1.0, 1.0], vec![1.0, 0.0], 1.0, 1.0);
        let prior = PriorConfig::new(BasisSpec::sine(), 2, 1.0, 1.0, ThetaDim::Sequence).unwrap();
        let err = conditional_f_given_theta(&obs, &ThetaParam::Sequence(vec![1.0, 0.0]), &prior);
        assert!(matches!(err, Err(Error::SingularOperator { index: 1 })));
    }

    #[test]
    fn theta_conditional_examples() {
        let prior = PriorConfig::new(BasisSpec::sine(), 1, 1.0, 1.0, ThetaDim::Sequence).unwrap();
        let obs = unit_obs(vec![2.0], vec![0.0], 1.0, 1.0);
        let f = CoefficientVector::new(BasisSpec::sine(), 1, vec![1.0]).unwrap();
        let c = theta_conditional_gaussian(&obs, &f, 1, &prior).unwrap();
        assert!((c[0].mean - 2.0 / 3.0).abs() < 1e-15);
        assert!((c[0].var - 1.0 / 3.0).abs() < 1e-15);

        // f_k = 0: only T informs θ_k
        let obs = unit_obs(vec![2.0], vec![0.9], 0.5, 0.7);
        let zero = CoefficientVector::zeros(BasisSpec::sine(), 1);
        let c = theta_conditional_gaussian(&obs, &zero, 1, &prior).unwrap();
        let d2 = 0.7f64.powi(-2);
        assert!((c[0].mean - d2 * 0.9 / (d2 + 1.0)).abs() < 1e-15);

        // δ → 0 pins θ to T
        let obs = unit_obs(vec![2.0], vec![0.9], 0.5, 1e-9);
        let c = theta_conditional_gaussian(&obs, &f, 1, &prior).unwrap();
        assert!((c[0].mean - 0.9).abs() < 1e-9);
        assert!(c[0].var < 1e-17);
    }

    #[test]
    fn theta_conditional_rejects_heat() {
        let model = OperatorModel::heat(0.1).unwrap();
        let f0 = CoefficientVector::zeros(BasisSpec::sine(), 2);
        let obs = simulate(&model, &f0, &ThetaParam::Scalar(1.0), 0.1, 0.1, 2, 1).unwrap();
        let prior = PriorConfig::new(BasisSpec::sine(), 2, 1.0, 1.0, ThetaDim::Scalar).unwrap();
        assert!(matches!(
            theta_conditional_gaussian(&obs, &f0, 2, &prior),
            Err(Error::ModelMismatch(_))
        ));
    }

    #[test]
    fn trig_levels_pool_sine_and_cosine() {
        let basis = BasisSpec::trigonometric();
        let obs = Observation {
            y: CoefficientVector::new(basis, 1, vec![0.5, 1.0, 2.0]).unwrap(),
            t: ThetaParam::Sequence(vec![1.0, 0.5]),
            eps: 1.0,
            delta: 1.0,
            seed: 0,
            model: OperatorModel::svd_diagonal(basis),
        };
        let prior = PriorConfig::new(basis, 1, 1.0, 1.0, ThetaDim::Sequence).unwrap();
        let f = CoefficientVector::new(basis, 1, vec![1.0, 1.0, 1.0]).unwrap();
        let c = theta_conditional_gaussian(&obs, &f, 1, &prior).unwrap();
        // level 1: precision 2 + 1 + 1, mean (1 + 2 + 0.5) / 4
        assert_eq!(c[1].var, 0.25);
        assert_eq!(c[1].mean, 3.5 / 4.0);
        assert_eq!(c[0].mean, (0.5 + 1.0) / 3.0);
    }

    #[test]
    fn identical_proposal_always_accepted() {
        let obs = unit_obs(vec![1.0, 1.0], vec![1.0, 1.0], 1.0, 1.0);
        let prior = PriorConfig::new(BasisSpec::sine(), 2, 1.0, 1.0, ThetaDim::Sequence).unwrap();
        let f = CoefficientVector::new(BasisSpec::sine(), 2, vec![1.0, 0.0]).unwrap();
        let theta = ThetaParam::Sequence(vec![0.3, -0.2]);
        let (next, accepted) =
            mh_decide(&obs, &f, &theta, theta.clone(), 2, &prior, 0.999_999).unwrap();
        assert!(accepted);
        assert_eq!(next, theta);
    }

    #[test]
    fn toy_acceptance_probability() {
        // toy exponent at θ' = (1, 1) is 1.5; with a flat-ish prior the
        // acceptance probability is min(1, exp(1.5 − L(θ)))
        let obs = unit_obs(vec![1.0, 1.0], vec![1.0, 1.0], 1.0, 1.0);
        let prior = PriorConfig::new(BasisSpec::sine(), 2, 1.0, 1e300, ThetaDim::Sequence).unwrap();
        let f = CoefficientVector::new(BasisSpec::sine(), 2, vec![1.0, 0.0]).unwrap();
        let theta = ThetaParam::Sequence(vec![0.5, 0.5]);
        let l_old = crate::forward::log_likelihood_projected(&obs, &f, &theta, 2).unwrap();
        let proposal = ThetaParam::Sequence(vec![1.0, 1.0]);
        let ratio = mh_log_ratio(&obs, &f, &theta, &proposal, 2, &prior).unwrap();
        assert!((ratio - (1.5 - l_old)).abs() < 1e-12);
        let back = mh_log_ratio(&obs, &f, &proposal, &theta, 2, &prior).unwrap();
        let p = back.exp().min(1.0);
        let (_, acc) = mh_decide(&obs, &f, &proposal, theta.clone(), 2, &prior, p * 0.999).unwrap();
        assert!(acc);
        let (_, acc) = mh_decide(&obs, &f, &proposal, theta, 2, &prior, p * 1.001).unwrap();
        assert!(!acc);
    }

    #[test]
    fn policy_checks() {
        let model = OperatorModel::heat(0.1).unwrap();
        let f0 = CoefficientVector::zeros(BasisSpec::sine(), 2);
        let obs = simulate(&model, &f0, &ThetaParam::Scalar(1.0), 0.1, 0.1, 4, 1).unwrap();
        let prior = PriorConfig::new(BasisSpec::sine(), 2, 1.0, 1.0, ThetaDim::Scalar).unwrap();
        let chain = ChainConfig::for_delta(0.1, 1);
        assert!(matches!(
            gibbs_run(&obs, &prior, &chain, ThetaUpdate::ExactGaussian),
            Err(Error::ModelMismatch(_))
        ));
        let seq = PriorConfig::new(BasisSpec::sine(), 2, 1.0, 1.0, ThetaDim::Sequence).unwrap();
        assert!(gibbs_run(&obs, &seq, &chain, ThetaUpdate::MetropolisHastings).is_err());
        let high = PriorConfig::new(BasisSpec::sine(), 5, 1.0, 1.0, ThetaDim::Scalar).unwrap();
        assert!(matches!(
            gibbs_run(&obs, &high, &chain, ThetaUpdate::MetropolisHastings),
            Err(Error::LevelMismatch(_))
        ));
    }

    #[test]
    fn chain_is_deterministic_and_sized() {
        let model = OperatorModel::heat(0.1).unwrap();
        let f0 = CoefficientVector::from_fn(BasisSpec::sine(), 3, |i| 1.0 / (1 + i) as f64);
        let obs = simulate(&model, &f0, &ThetaParam::Scalar(1.0), 1e-2, 1e-2, 8, 11).unwrap();
        let prior = PriorConfig::new(BasisSpec::sine(), 3, 1.0, 1.0, ThetaDim::Scalar).unwrap();
        let chain = ChainConfig {
            burn_in: 50,
            n_keep: 40,
            thin: 2,
            record_trace: true,
            ..ChainConfig::for_delta(1e-2, 5)
        };
        let a = gibbs_run(&obs, &prior, &chain, ThetaUpdate::MetropolisHastings).unwrap();
        let b = gibbs_run(&obs, &prior, &chain, ThetaUpdate::MetropolisHastings).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws_f.len(), 40);
        assert_eq!(a.trace.as_ref().unwrap().len(), chain.total_iterations());
        let rate = a.acceptance_rate.unwrap();
        assert!((0.0..=1.0).contains(&rate));

        let mut buf = Vec::new();
        a.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,theta,acc_flag\n0,"));
        assert_eq!(text.lines().count(), chain.total_iterations() + 1);
    }

    #[test]
    fn rmse_theta_shapes() {
        let basis = BasisSpec::sine();
        let summary = PosteriorSummary {
            mean_f: CoefficientVector::zeros(basis, 1),
            draw_mean_f: CoefficientVector::zeros(basis, 1),
            draws_f: vec![],
            mean_theta: ThetaParam::Scalar(1.5),
            draws_theta: vec![],
            acceptance_rate: None,
            proposal_sd: 1.0,
            mean_conditional_var: vec![0.0],
            posterior_var: vec![0.0],
            trace: None,
        };
        assert_eq!(summary.rmse_theta(&ThetaParam::Scalar(1.0)).unwrap(), 0.5);
        assert_eq!(summary.rmse_theta(&ThetaParam::Scalar(1.5)).unwrap(), 0.0);
        assert!(matches!(
            summary.rmse_theta(&ThetaParam::Sequence(vec![1.0])),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn noiseless_observation_rejected() {
        let model = OperatorModel::heat(0.1).unwrap();
        let f0 = CoefficientVector::zeros(BasisSpec::sine(), 2);
        let obs =
            crate::forward::simulate_noiseless(&model, &f0, &ThetaParam::Scalar(1.0), 2).unwrap();
        let prior = PriorConfig::new(BasisSpec::sine(), 2, 1.0, 1.0, ThetaDim::Scalar).unwrap();
        assert!(conditional_f_given_theta(&obs, &ThetaParam::Scalar(1.0), &prior).is_err());
    }
}
