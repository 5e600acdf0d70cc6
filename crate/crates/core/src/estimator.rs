//! Galerkin projection estimator with spectral cutoff, and Lepski's rule for
//! choosing its projection level from the data.

use std::io::Write;

use crate::basis::CoefficientVector;
use crate::error::{Error, Result};
use crate::forward::Observation;
use crate::operator::{OperatorKind, ThetaParam};

/// Where the ill-posedness scale `σ_j` in the cutoff comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaRefPolicy {
    /// Plug in the observed `T`: the heat scale at `ϑ = T`, or `|T_j| ∨ δ` for
    /// diagonal operators.
    PlugInFromT,
    Fixed(ThetaParam),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinConfig {
    /// Cutoff multiplier, must exceed 1.
    pub tau: f64,
    pub theta_ref: ThetaRefPolicy,
}

impl Default for GalerkinConfig {
    fn default() -> Self {
        GalerkinConfig {
            tau: 2.0,
            theta_ref: ThetaRefPolicy::PlugInFromT,
        }
    }
}

impl GalerkinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::Config(format!(
                "cutoff multiplier tau must exceed 1, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffBranch {
    /// `‖K_{T,j}⁻¹‖ ≤ τ/σ_j`: the projected system was solved.
    Solved,
    /// The projected operator was too ill-conditioned; the estimate is zero.
    Zeroed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinEstimate {
    pub f: CoefficientVector,
    pub branch: CutoffBranch,
    pub inverse_norm: f64,
    pub sigma_j: f64,
}

fn sigma_for_cutoff(obs: &Observation, j: usize, cfg: &GalerkinConfig) -> Result<f64> {
    match &cfg.theta_ref {
        ThetaRefPolicy::Fixed(theta) => obs.model.sigma_schedule(theta, j),
        ThetaRefPolicy::PlugInFromT => match obs.model.kind() {
            OperatorKind::Heat { .. } => obs.model.sigma_schedule(&obs.t, j),
            OperatorKind::SvdDiagonal => Ok(obs.t_at_level(j)?.abs().max(obs.delta)),
        },
    }
}

/// `f̂_j = K_{T,j}⁻¹ P_j Y` if `‖K_{T,j}⁻¹‖ ≤ τ/σ_j`, zero otherwise.
pub fn galerkin_estimate(
    obs: &Observation,
    j: usize,
    cfg: &GalerkinConfig,
) -> Result<GalerkinEstimate> {
    cfg.validate()?;
    if j > obs.sim_level() {
        return Err(Error::LevelMismatch(format!(
            "estimator level {j} above observation level {}",
            obs.sim_level()
        )));
    }
    let k_tj = obs.model.projected_matrix(&obs.t, j).map_err(|e| match e {
        Error::IndexOutOfTheta { level, len } => Error::LevelMismatch(format!(
            "T covers {len} levels, estimator needs level {level}"
        )),
        other => other,
    })?;
    let inverse_norm = k_tj.inverse_opnorm();
    let sigma_j = sigma_for_cutoff(obs, j, cfg)?;
    let basis = obs.model.basis();
    let accepted = inverse_norm.is_finite() && inverse_norm * sigma_j <= cfg.tau;
    if !accepted {
        return Ok(GalerkinEstimate {
            f: CoefficientVector::zeros(basis, j),
            branch: CutoffBranch::Zeroed,
            inverse_norm,
            sigma_j,
        });
    }
    assert!(inverse_norm * sigma_j <= cfg.tau);
    let rhs = &obs.y.coeffs()[..basis.dim(j)];
    let coeffs = k_tj
        .solve(rhs)
        .expect("finite inverse norm implies a nonsingular diagonal");
    Ok(GalerkinEstimate {
        f: CoefficientVector::new(basis, j, coeffs)?,
        branch: CutoffBranch::Solved,
        inverse_norm,
        sigma_j,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LepskiGrid {
    /// Candidates `1, …, 𝒥_ε` with thresholds growing like `2^{i(t + d/2)}`
    /// and `log 2` in the maximal level.
    Dyadic,
    /// Candidates `1, b, b², …, b^{𝒥_ε}` (rounded to integers) with
    /// thresholds growing like `i^E`.
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LepskiConfig {
    /// Threshold multiplier Δ in (0, 1].
    pub delta_tune: f64,
    /// Lower bound on the smoothness of the truth.
    pub s0: f64,
    /// Degree of ill-posedness.
    pub t_ill: f64,
    pub dim_d: usize,
    /// Base of the geometric grid (ignored by the dyadic grid, which uses 2).
    pub b: f64,
    /// Replaces `t + d/2` (dyadic) or the default `3/2` (geometric) in the
    /// threshold growth.
    pub exponent_override: Option<f64>,
    pub grid: LepskiGrid,
}

impl LepskiConfig {
    /// Geometric grid with base 2, `s₀ = 1`, `t = 2`, `d = 1`, `Δ = 1` and
    /// threshold growth `i^{3/2}`.
    pub fn deconvolution_default() -> Self {
        LepskiConfig {
            delta_tune: 1.0,
            s0: 1.0,
            t_ill: 2.0,
            dim_d: 1,
            b: 2.0,
            exponent_override: None,
            grid: LepskiGrid::Geometric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_tune > 0.0 && self.delta_tune <= 1.0) {
            return Err(Error::Config(format!(
                "Lepski multiplier must lie in (0, 1], got {}",
                self.delta_tune
            )));
        }
        if !(self.s0 > 0.0) || !(self.t_ill >= 0.0) || self.dim_d == 0 {
            return Err(Error::Config(
                "Lepski needs s0 > 0, t >= 0 and d >= 1".into(),
            ));
        }
        if !(self.b > 1.0) {
            return Err(Error::Config(format!(
                "grid base must exceed 1, got {}",
                self.b
            )));
        }
        Ok(())
    }

    fn base(&self) -> f64 {
        match self.grid {
            LepskiGrid::Dyadic => 2.0,
            LepskiGrid::Geometric => self.b,
        }
    }

    fn growth_exponent(&self) -> f64 {
        match (self.exponent_override, self.grid) {
            (Some(e), _) => e,
            (None, LepskiGrid::Dyadic) => self.t_ill + self.dim_d as f64 / 2.0,
            (None, LepskiGrid::Geometric) => 1.5,
        }
    }

    /// Candidate levels in increasing order.
    pub fn candidates(&self, eps: f64) -> Result<Vec<usize>> {
        let top = max_level(eps, self);
        if top < 1 {
            return Err(Error::EmptyGrid { max_level: top });
        }
        let mut levels: Vec<usize> = match self.grid {
            LepskiGrid::Dyadic => (1..=top).collect(),
            LepskiGrid::Geometric => (0..=top)
                .map(|m| self.b.powi(m as i32).round() as usize)
                .collect(),
        };
        levels.dedup();
        Ok(levels)
    }

    /// Acceptance threshold attached to the finer candidate `i`.
    pub fn threshold(&self, eps: f64, i: usize) -> f64 {
        let log_inv = (1.0 / eps).ln();
        let base = self.delta_tune * eps * log_inv * log_inv;
        match self.grid {
            LepskiGrid::Dyadic => base * 2f64.powf(i as f64 * self.growth_exponent()),
            LepskiGrid::Geometric => base * (i as f64).powf(self.growth_exponent()),
        }
    }
}

/// `𝒥_ε = ⌊log ε⁻¹ / ((s₀ + t + d/2) log b)⌋`, natural logarithms.
///
/// A relative slack of `1e-12` absorbs rounding when the quotient is an
/// integer in exact arithmetic.
pub fn max_level(eps: f64, cfg: &LepskiConfig) -> usize {
    if !(eps > 0.0 && eps < 1.0) {
        return 0;
    }
    let denom = (cfg.s0 + cfg.t_ill + cfg.dim_d as f64 / 2.0) * cfg.base().ln();
    let q = (1.0 / eps).ln() / denom;
    (q * (1.0 + 1e-12)).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct LepskiComparison {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub threshold: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LepskiDiagnostics {
    pub max_level: usize,
    pub candidates: Vec<usize>,
    pub comparisons: Vec<LepskiComparison>,
}

impl LepskiDiagnostics {
    /// CSV with header `i,j,distance,threshold,accepted`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["i", "j", "distance", "threshold", "accepted"])
            .map_err(crate::basis::csv_err)?;
        for c in &self.comparisons {
            wtr.write_record([
                c.i.to_string(),
                c.j.to_string(),
                format!("{:?}", c.distance),
                format!("{:?}", c.threshold),
                c.accepted.to_string(),
            ])
            .map_err(crate::basis::csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Smallest candidate `j` with `‖f̂_i − f̂_j‖ ≤ threshold(i)` for every larger
/// candidate `i`. The largest candidate satisfies the condition vacuously, so
/// the selection is always defined.
pub fn lepski_select(
    obs: &Observation,
    cfg: &LepskiConfig,
    gcfg: &GalerkinConfig,
) -> Result<(usize, LepskiDiagnostics)> {
    cfg.validate()?;
    let candidates = cfg.candidates(obs.eps)?;
    let estimates: Vec<CoefficientVector> = candidates
        .iter()
        .map(|&j| galerkin_estimate(obs, j, gcfg).map(|e| e.f))
        .collect::<Result<_>>()?;

    let mut comparisons = Vec::new();
    let mut selected = None;
    for (a, &j) in candidates.iter().enumerate() {
        let mut all_ok = true;
        for (b, &i) in candidates.iter().enumerate().skip(a + 1) {
            let distance = estimates[b].distance(&estimates[a]);
            let threshold = cfg.threshold(obs.eps, i);
            let accepted = distance <= threshold;
            all_ok &= accepted;
            comparisons.push(LepskiComparison {
                i,
                j,
                distance,
                threshold,
                accepted,
            });
        }
        if all_ok && selected.is_none() {
            selected = Some(j);
        }
    }
    let level = selected.unwrap_or(*candidates.last().expect("grid is non-empty"));
    Ok((
        level,
        LepskiDiagnostics {
            max_level: max_level(obs.eps, cfg),
            candidates,
            comparisons,
        },
    ))
}

/// Level balancing the bias bound `R·2^{−js}` against the stochastic term
/// `C·R·log(1/ε)·ε·2^{j(t+d/2)}` with `C = 1`: the smallest `j ≤ 𝒥_ε` at which
/// the bias bound no longer dominates, or `𝒥_ε` if it always does.
pub fn oracle_level(eps: f64, cfg: &LepskiConfig, radius: f64, smoothness: f64) -> Result<usize> {
    let top = max_level(eps, cfg);
    if top < 1 {
        return Err(Error::EmptyGrid { max_level: top });
    }
    let growth = cfg.t_ill + cfg.dim_d as f64 / 2.0;
    let log_inv = (1.0 / eps).ln();
    Ok((1..=top)
        .find(|&j| {
            let j = j as f64;
            radius * 2f64.powf(-j * smoothness) <= radius * log_inv * eps * 2f64.powf(j * growth)
        })
        .unwrap_or(top))
}
