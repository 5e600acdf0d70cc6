//! Sequence-space simulation of `(Y, T)` and the projected log-density used by
//! the posterior sampler.
//!
//! Observations follow the white noise model in coefficient space:
//!
//! ```text
//! Y_k = ρ_{θ₀,k} f₀,k + ε Z_k,   |k| ≤ N_sim
//! T   = θ₀ + δ W
//! ```
//!
//! with independent standard normals `Z_k`, `W`. Only the first `N_sim` levels
//! are ever drawn.
//!
//! Log-densities drop every additive term that does not depend on `(f, θ)`,
//! so differences between calls are exact log-ratios.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{csv_err, parse_field, CoefficientVector};
use crate::error::{Error, Result};
use crate::operator::{OperatorModel, ThetaParam};
use crate::posterior::{PriorConfig, ThetaDim};

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `Y_k` for every index up to the simulation level.
    pub y: CoefficientVector,
    /// Noisy parameter sample, same shape as θ₀.
    pub t: ThetaParam,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub model: OperatorModel,
}

impl Observation {
    pub fn sim_level(&self) -> usize {
        self.y.level()
    }

    /// `T` entry attached to a level (the scalar for scalar parameters).
    pub fn t_at_level(&self, level: usize) -> Result<f64> {
        theta_at_level(&self.model, &self.t, level)
    }
}

pub(crate) fn theta_at_level(
    model: &OperatorModel,
    theta: &ThetaParam,
    level: usize,
) -> Result<f64> {
    match theta {
        ThetaParam::Scalar(v) => Ok(*v),
        ThetaParam::Sequence(values) => level
            .checked_sub(model.basis().min_level())
            .and_then(|s| values.get(s).copied())
            .ok_or(Error::IndexOutOfTheta {
                level,
                len: values.len(),
            }),
    }
}

/// The RNG used for every seeded simulation and chain.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `(Y, T)` with noise levels `eps`, `delta > 0` from an RNG seeded
/// with `seed`.
pub fn simulate(
    model: &OperatorModel,
    f0: &CoefficientVector,
    theta0: &ThetaParam,
    eps: f64,
    delta: f64,
    n_sim: usize,
    seed: u64,
) -> Result<Observation> {
    let mut rng = seeded_rng(seed);
    simulate_with_rng(model, f0, theta0, eps, delta, n_sim, seed, &mut rng)
}

/// As [`simulate`], drawing from a caller-owned RNG. `seed` is only recorded.
#[allow(clippy::too_many_arguments)]
pub fn simulate_with_rng<R: Rng + ?Sized>(
    model: &OperatorModel,
    f0: &CoefficientVector,
    theta0: &ThetaParam,
    eps: f64,
    delta: f64,
    n_sim: usize,
    seed: u64,
    rng: &mut R,
) -> Result<Observation> {
    for (name, v) in [("eps", eps), ("delta", delta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
    }
    simulate_inner(model, f0, theta0, eps, delta, n_sim, seed, Some(rng))
}

/// Noise-free observation `Y = K_{θ₀} f₀`, `T = θ₀`, with `eps = delta = 0`.
/// Meant for tests and smoke runs; the posterior sampler rejects it.
pub fn simulate_noiseless(
    model: &OperatorModel,
    f0: &CoefficientVector,
    theta0: &ThetaParam,
    n_sim: usize,
) -> Result<Observation> {
    simulate_inner::<ChaCha8Rng>(model, f0, theta0, 0.0, 0.0, n_sim, 0, None)
}

#[allow(clippy::too_many_arguments)]
fn simulate_inner<R: Rng + ?Sized>(
    model: &OperatorModel,
    f0: &CoefficientVector,
    theta0: &ThetaParam,
    eps: f64,
    delta: f64,
    n_sim: usize,
    seed: u64,
    mut rng: Option<&mut R>,
) -> Result<Observation> {
    if f0.basis() != model.basis() {
        return Err(Error::ModelMismatch(format!(
            "truth is in the {} basis, operator in the {} basis",
            f0.basis(),
            model.basis()
        )));
    }
    if n_sim < f0.level() {
        return Err(Error::LevelMismatch(format!(
            "simulation level {n_sim} below truth level {}",
            f0.level()
        )));
    }
    let rho = model.singular_values(theta0, n_sim).map_err(|e| match e {
        Error::IndexOutOfTheta { level, len } => Error::LevelMismatch(format!(
            "theta0 covers {len} levels, simulation needs level {level}"
        )),
        other => other,
    })?;
    let f0 = f0.zero_pad(n_sim);
    let mut y = Vec::with_capacity(rho.len());
    for (r, f) in rho.iter().zip(f0.coeffs()) {
        let z: f64 = match rng.as_deref_mut() {
            Some(rng) => rng.sample(StandardNormal),
            None => 0.0,
        };
        y.push(r * f + eps * z);
    }
    let theta0 = theta0.truncate(model.theta_len(n_sim));
    let t = theta0.map(|v| {
        let w: f64 = match rng.as_deref_mut() {
            Some(rng) => rng.sample(StandardNormal),
            None => 0.0,
        };
        v + delta * w
    });
    Ok(Observation {
        y: CoefficientVector::new(model.basis(), n_sim, y)?,
        t,
        eps,
        delta,
        seed,
        model: *model,
    })
}

fn check_likelihood_levels(obs: &Observation, f: &CoefficientVector, j: usize) -> Result<()> {
    if f.basis() != obs.model.basis() {
        return Err(Error::ModelMismatch(format!(
            "f is in the {} basis, observation in the {} basis",
            f.basis(),
            obs.model.basis()
        )));
    }
    if f.level() > j || j > obs.sim_level() {
        return Err(Error::LevelMismatch(format!(
            "need f level {} <= j = {j} <= observation level {}",
            f.level(),
            obs.sim_level()
        )));
    }
    Ok(())
}

/// Levels `≤ j` of a sequence parameter that enter the projected density.
fn theta_levels(obs: &Observation, j: usize) -> std::ops::RangeInclusive<usize> {
    obs.model.basis().min_level()..=j
}

/// Per-coordinate contributions to [`log_likelihood_projected`]: first the
/// `f` terms by flattened index up to `f`'s dimension, then the θ terms by
/// level (a single term for a scalar θ).
pub fn log_likelihood_terms(
    obs: &Observation,
    f: &CoefficientVector,
    theta: &ThetaParam,
    j: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_likelihood_levels(obs, f, j)?;
    let inv_eps2 = obs.eps.powi(-2);
    let inv_delta2 = obs.delta.powi(-2);
    let kf = obs.model.apply(theta, f)?;
    let f_terms = kf
        .coeffs()
        .iter()
        .zip(obs.y.coeffs())
        .map(|(k, y)| inv_eps2 * (k * y - 0.5 * k * k))
        .collect();
    let theta_term = |th: f64, t: f64| inv_delta2 * (th * t - 0.5 * th * th);
    let theta_terms = match theta {
        ThetaParam::Scalar(v) => vec![theta_term(*v, obs.t_at_level(0)?)],
        ThetaParam::Sequence(_) => theta_levels(obs, j)
            .map(|l| {
                Ok(theta_term(
                    theta_at_level(&obs.model, theta, l)?,
                    obs.t_at_level(l)?,
                ))
            })
            .collect::<Result<_>>()?,
    };
    Ok((f_terms, theta_terms))
}

/// Exponent of the density of `(P_j Y, P_j T)` relative to pure noise:
///
/// ```text
/// ε⁻²⟨P_j K_θ f, Y⟩ − (2ε²)⁻¹‖P_j K_θ f‖² + δ⁻²⟨P_j θ, T⟩ − (2δ²)⁻¹‖P_j θ‖²
/// ```
///
/// Requires `f.level ≤ j ≤ obs.sim_level()`.
pub fn log_likelihood_projected(
    obs: &Observation,
    f: &CoefficientVector,
    theta: &ThetaParam,
    j: usize,
) -> Result<f64> {
    let (f_terms, theta_terms) = log_likelihood_terms(obs, f, theta, j)?;
    Ok(f_terms.iter().sum::<f64>() + theta_terms.iter().sum::<f64>())
}

/// `L(θ_new) − L(θ)` for fixed `f`, evaluated without forming either
/// exponent. At small noise levels the exponents are of order `ε⁻²` and their
/// difference would lose every significant digit.
pub fn log_likelihood_ratio(
    obs: &Observation,
    f: &CoefficientVector,
    theta: &ThetaParam,
    theta_new: &ThetaParam,
    j: usize,
) -> Result<f64> {
    check_likelihood_levels(obs, f, j)?;
    let basis = obs.model.basis();
    let mut f_part = 0.0;
    for (i, (&fk, &yk)) in f.coeffs().iter().zip(obs.y.coeffs()).enumerate() {
        if fk == 0.0 {
            continue;
        }
        let level = basis.level_of(i);
        let (rho_old, diff) = rho_and_difference(&obs.model, theta, theta_new, level)?;
        // ⟨Δρ f, Y − ½(ρ + ρ')f⟩ with Y − ρf kept as a residual
        let residual = yk - rho_old * fk;
        f_part += diff * fk * (residual - 0.5 * diff * fk);
    }
    let mut theta_part = 0.0;
    let pairs: Vec<(f64, f64, f64)> = match (theta, theta_new) {
        (ThetaParam::Scalar(a), ThetaParam::Scalar(b)) => vec![(*a, *b, obs.t_at_level(0)?)],
        (ThetaParam::Sequence(_), ThetaParam::Sequence(_)) => theta_levels(obs, j)
            .map(|l| {
                Ok((
                    theta_at_level(&obs.model, theta, l)?,
                    theta_at_level(&obs.model, theta_new, l)?,
                    obs.t_at_level(l)?,
                ))
            })
            .collect::<Result<_>>()?,
        _ => {
            return Err(Error::ShapeMismatch(
                "current and proposed theta differ in shape".into(),
            ))
        }
    };
    for (a, b, t) in pairs {
        let d = b - a;
        // (b − a)(t − ½(a + b)) = d((t − a) − d/2)
        theta_part += d * ((t - a) - 0.5 * d);
    }
    Ok(f_part / (obs.eps * obs.eps) + theta_part / (obs.delta * obs.delta))
}

/// `(ρ_{θ,level}, ρ_{θ',level} − ρ_{θ,level})`, the difference computed
/// without cancellation for the heat semigroup.
fn rho_and_difference(
    model: &OperatorModel,
    theta: &ThetaParam,
    theta_new: &ThetaParam,
    level: usize,
) -> Result<(f64, f64)> {
    let rho = model.singular_value_at_level(theta, level)?;
    match (model.kind(), theta, theta_new) {
        (
            crate::operator::OperatorKind::Heat { t_time },
            ThetaParam::Scalar(a),
            ThetaParam::Scalar(b),
        ) => {
            let k = level as f64;
            let rate = std::f64::consts::PI.powi(2) * k * k * t_time;
            Ok((rho, rho * (-(b - a) * rate).exp_m1()))
        }
        _ => Ok((rho, model.singular_value_at_level(theta_new, level)? - rho)),
    }
}

/// Gaussian log-prior of θ with the `−½ log(2πσ²)` constants dropped.
pub fn log_prior_theta(theta: &ThetaParam, prior: &PriorConfig) -> Result<f64> {
    let inv = 0.5 / prior.sigma_theta_sq;
    match (theta, prior.theta_dim) {
        (ThetaParam::Scalar(v), ThetaDim::Scalar) => Ok(-inv * v * v),
        (ThetaParam::Sequence(values), ThetaDim::Sequence) => {
            let n = prior.theta_len();
            if values.len() < n {
                return Err(Error::IndexOutOfTheta {
                    level: prior.level,
                    len: values.len(),
                });
            }
            Ok(-inv * values[..n].iter().map(|v| v * v).sum::<f64>())
        }
        _ => Err(Error::ShapeMismatch(
            "theta shape does not match the prior".into(),
        )),
    }
}

/// Gaussian log-prior of the coefficients of `f` in `V_J`, constants dropped.
pub fn log_prior_f(f: &CoefficientVector, prior: &PriorConfig) -> Result<f64> {
    if f.level() > prior.level {
        return Err(Error::LevelMismatch(format!(
            "prior is supported on V_{}, f has level {}",
            prior.level,
            f.level()
        )));
    }
    let basis = f.basis();
    Ok(f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| -0.5 * c * c / prior.tau_sq_at_level(basis.level_of(i)))
        .sum())
}

fn write_meta(out: &mut String, obs: &Observation) {
    out.push_str(&format!("# eps={:?}\n", obs.eps));
    out.push_str(&format!("# delta={:?}\n", obs.delta));
    out.push_str(&format!("# seed={}\n", obs.seed));
    out.push_str(&format!("# model={}\n", obs.model));
}

/// Writes `y.csv` and `t.csv` into `dir`. Both files start with `# key=value`
/// metadata lines (eps, delta, seed, model).
pub fn write_observation(obs: &Observation, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut y_text = String::new();
    write_meta(&mut y_text, obs);
    let mut buf = Vec::new();
    obs.y.write_csv(&mut buf)?;
    y_text.push_str(std::str::from_utf8(&buf).expect("csv output is utf-8"));
    let y_path = dir.join("y.csv");
    fs::write(&y_path, y_text).map_err(|e| Error::io(&y_path, e))?;

    let mut t_text = String::new();
    write_meta(&mut t_text, obs);
    t_text.push_str("level,value\n");
    match &obs.t {
        ThetaParam::Scalar(v) => t_text.push_str(&format!("scalar,{v:?}\n")),
        ThetaParam::Sequence(values) => {
            let first = obs.model.basis().min_level();
            for (i, v) in values.iter().enumerate() {
                t_text.push_str(&format!("{},{v:?}\n", first + i));
            }
        }
    }
    let t_path = dir.join("t.csv");
    fs::write(&t_path, t_text).map_err(|e| Error::io(&t_path, e))?;
    Ok(())
}

fn read_meta(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.trim_start_matches('#').trim().split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// Reads a pair written by [`write_observation`].
pub fn read_observation(dir: &Path) -> Result<Observation> {
    let y_path = dir.join("y.csv");
    let y_text = fs::read_to_string(&y_path).map_err(|e| Error::io(&y_path, e))?;
    let meta = read_meta(&y_text);
    let get = |key: &str| {
        meta.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Parse(format!("{}: missing `{key}` metadata", y_path.display())))
    };
    let parse_f = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::Parse(format!("bad `{key}` metadata")))
    };
    let eps = parse_f("eps")?;
    let delta = parse_f("delta")?;
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| Error::Parse("bad `seed` metadata".into()))?;
    let model: OperatorModel = get("model")?.parse()?;
    let y = CoefficientVector::read_csv(model.basis(), y_text.as_bytes())?;

    let t_path = dir.join("t.csv");
    let t_text = fs::read_to_string(&t_path).map_err(|e| Error::io(&t_path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(t_text.as_bytes());
    let mut scalar = None;
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let value: f64 = parse_field(&rec, 1)?;
        if rec.get(0) == Some("scalar") {
            scalar = Some(value);
        } else {
            values.push(value);
        }
    }
    let t = match scalar {
        Some(v) => ThetaParam::Scalar(v),
        None => ThetaParam::Sequence(values),
    };
    Ok(Observation {
        y,
        t,
        eps,
        delta,
        seed,
        model,
    })
}
