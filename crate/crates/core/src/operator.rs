//! Forward operators `K_θ` that are diagonal in a fixed basis.
//!
//! Every implemented operator acts on coefficients by multiplication with a
//! θ-dependent singular value, `(K_θ f)_k = ρ_{θ,k} f_k`. Two families exist:
//! the heat semigroup on the sine basis (`ρ_{ϑ,k} = exp(-ϑπ²k²t)`, scalar ϑ)
//! and a generic diagonal operator whose parameter *is* the sequence of
//! singular values, one per level. The projected operator `K_{θ,j}` is then a
//! diagonal matrix on `V_j`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::basis::{BasisSpec, CoefficientVector};
use crate::error::{Error, Result};

/// Operator parameter. Sequences are indexed by level, starting at the
/// basis' smallest level (`values[0]` is level 1 on the sine basis and level
/// 0 on the trigonometric basis).
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaParam {
    Scalar(f64),
    Sequence(Vec<f64>),
}

impl ThetaParam {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            ThetaParam::Scalar(v) => std::slice::from_ref(v),
            ThetaParam::Sequence(v) => v,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut op: impl FnMut(f64) -> f64) -> ThetaParam {
        match self {
            ThetaParam::Scalar(v) => ThetaParam::Scalar(op(*v)),
            ThetaParam::Sequence(v) => ThetaParam::Sequence(v.iter().map(|&x| op(x)).collect()),
        }
    }

    pub fn scale(&self, a: f64) -> ThetaParam {
        self.map(|x| a * x)
    }

    /// Keeps the first `n` entries of a sequence; scalars are returned as is.
    pub fn truncate(&self, n: usize) -> ThetaParam {
        match self {
            ThetaParam::Scalar(v) => ThetaParam::Scalar(*v),
            ThetaParam::Sequence(v) => ThetaParam::Sequence(v[..n.min(v.len())].to_vec()),
        }
    }

    /// Euclidean distance between parameters of the same shape.
    pub fn distance(&self, other: &ThetaParam) -> Result<f64> {
        match (self, other) {
            (ThetaParam::Scalar(a), ThetaParam::Scalar(b)) => Ok((a - b).abs()),
            (ThetaParam::Sequence(a), ThetaParam::Sequence(b)) if a.len() == b.len() => Ok(a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()),
            _ => Err(Error::ShapeMismatch(format!(
                "cannot compare theta of length {} with length {}",
                self.as_slice().len(),
                other.as_slice().len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// Heat semigroup observed at time `t_time`.
    Heat { t_time: f64 },
    /// Diagonal operator whose parameter is its singular value sequence.
    SvdDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorModel {
    kind: OperatorKind,
    basis: BasisSpec,
}

impl OperatorModel {
    pub fn heat(t_time: f64) -> Result<Self> {
        if !(t_time > 0.0 && t_time.is_finite()) {
            return Err(Error::Config(format!(
                "heat time must be positive, got {t_time}"
            )));
        }
        Ok(OperatorModel {
            kind: OperatorKind::Heat { t_time },
            basis: BasisSpec::sine(),
        })
    }

    pub fn svd_diagonal(basis: BasisSpec) -> Self {
        OperatorModel {
            kind: OperatorKind::SvdDiagonal,
            basis,
        }
    }

    pub fn new(kind: OperatorKind, basis: BasisSpec) -> Result<Self> {
        match kind {
            OperatorKind::Heat { t_time } => {
                if basis != BasisSpec::sine() {
                    return Err(Error::ModelMismatch(
                        "the heat operator needs the linearly indexed sine basis".into(),
                    ));
                }
                let mut m = OperatorModel::heat(t_time)?;
                m.basis = basis;
                Ok(m)
            }
            OperatorKind::SvdDiagonal => Ok(OperatorModel::svd_diagonal(basis)),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn is_heat(&self) -> bool {
        matches!(self.kind, OperatorKind::Heat { .. })
    }

    /// Number of θ entries needed to cover every level `≤ level`.
    pub fn theta_len(&self, level: usize) -> usize {
        (level + 1).saturating_sub(self.basis.min_level())
    }

    fn check_theta_shape(&self, theta: &ThetaParam) -> Result<()> {
        match (self.kind, theta) {
            (OperatorKind::Heat { .. }, ThetaParam::Scalar(_))
            | (OperatorKind::SvdDiagonal, ThetaParam::Sequence(_)) => Ok(()),
            (OperatorKind::Heat { .. }, ThetaParam::Sequence(_)) => Err(Error::ShapeMismatch(
                "the heat operator takes a scalar diffusivity".into(),
            )),
            (OperatorKind::SvdDiagonal, ThetaParam::Scalar(_)) => Err(Error::ShapeMismatch(
                "the diagonal operator takes a singular value sequence".into(),
            )),
        }
    }

    /// Singular value attached to a level. Heat levels are frequencies.
    pub fn singular_value_at_level(&self, theta: &ThetaParam, level: usize) -> Result<f64> {
        self.check_theta_shape(theta)?;
        match (self.kind, theta) {
            (OperatorKind::Heat { t_time }, ThetaParam::Scalar(v)) => {
                let k = level as f64;
                Ok((-v * PI * PI * k * k * t_time).exp())
            }
            (OperatorKind::SvdDiagonal, ThetaParam::Sequence(values)) => {
                let slot = level.checked_sub(self.basis.min_level());
                slot.and_then(|s| values.get(s).copied())
                    .ok_or(Error::IndexOutOfTheta {
                        level,
                        len: values.len(),
                    })
            }
            _ => unreachable!(),
        }
    }

    /// `ρ_{θ,k}` for the basis function with flattened index `index`.
    pub fn singular_value(&self, theta: &ThetaParam, index: usize) -> Result<f64> {
        self.singular_value_at_level(theta, self.basis.level_of(index))
    }

    /// Singular values of every basis function in `V_level`, by flattened index.
    pub fn singular_values(&self, theta: &ThetaParam, level: usize) -> Result<Vec<f64>> {
        (0..self.basis.dim(level))
            .map(|i| self.singular_value(theta, i))
            .collect()
    }

    /// `K_θ f`, computed coefficient-wise.
    pub fn apply(&self, theta: &ThetaParam, f: &CoefficientVector) -> Result<CoefficientVector> {
        self.check_basis(f)?;
        let rho = self.singular_values(theta, f.level())?;
        Ok(f.map(|i, c| rho[i] * c))
    }

    /// `K_{θ,j} = P_j K_θ|_{V_j}`.
    pub fn projected_matrix(&self, theta: &ThetaParam, j: usize) -> Result<DiagonalOperator> {
        Ok(DiagonalOperator {
            diag: self.singular_values(theta, j)?,
        })
    }

    /// `‖K_{θ,j}⁻¹‖` on `V_j`; `+∞` when the projected operator is singular.
    pub fn inverse_opnorm(&self, theta: &ThetaParam, j: usize) -> Result<f64> {
        Ok(self.projected_matrix(theta, j)?.inverse_opnorm())
    }

    /// Nominal ill-posedness scale `σ_j` evaluated at a reference parameter.
    pub fn sigma_schedule(&self, theta_ref: &ThetaParam, j: usize) -> Result<f64> {
        Ok(self.singular_value_at_level(theta_ref, j)?.abs())
    }

    fn check_basis(&self, f: &CoefficientVector) -> Result<()> {
        if f.basis() != self.basis {
            return Err(Error::ModelMismatch(format!(
                "operator acts on the {} basis, got a {} vector",
                self.basis,
                f.basis()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for OperatorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            OperatorKind::Heat { t_time } => write!(f, "heat:t={t_time:?}:{}", self.basis),
            OperatorKind::SvdDiagonal => write!(f, "svd:{}", self.basis),
        }
    }
}

impl FromStr for OperatorModel {
    type Err = Error;

    /// Parses the descriptor written by `Display`, e.g. `heat:t=0.1:sine`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["heat", t, basis] => {
                let t = t
                    .strip_prefix("t=")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse(format!("bad heat time in `{s}`")))?;
                OperatorModel::new(OperatorKind::Heat { t_time: t }, basis.parse()?)
            }
            ["svd", basis] => Ok(OperatorModel::svd_diagonal(basis.parse()?)),
            _ => Err(Error::Parse(format!("unknown operator descriptor `{s}`"))),
        }
    }
}

/// Diagonal matrix on `V_j`, the form every implemented `K_{θ,j}` takes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    diag: Vec<f64>,
}

impl DiagonalOperator {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.entry(r, c)).collect())
            .collect()
    }

    pub fn inverse_opnorm(&self) -> f64 {
        let smallest = self
            .diag
            .iter()
            .map(|d| d.abs())
            .fold(f64::INFINITY, f64::min);
        if self.diag.is_empty() {
            0.0
        } else if smallest == 0.0 {
            f64::INFINITY
        } else {
            1.0 / smallest
        }
    }

    /// Solves `K x = y`; `None` if a diagonal entry vanishes.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        if self.diag.contains(&0.0) {
            return None;
        }
        Some(rhs.iter().zip(&self.diag).map(|(y, d)| y / d).collect())
    }
}

/// Singular values `ρ_0, ρ_1, …, ρ_levels` of convolution with the periodised
/// Laplace kernel `g(x) = exp(-|x|/h) / C_h` on `[-1/2, 1/2]`, in the
/// trigonometric basis. `C_h = 2h(1 + e^{-1/(2h)})` normalises `ρ_0 = 1`.
pub fn laplace_singular_values(h: f64, levels: usize) -> Result<ThetaParam> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let tail = (-1.0 / (2.0 * h)).exp();
    let c_h = 2.0 * h * (1.0 + tail);
    let values = (0..=levels)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let k = k as f64;
            // sin(πk) = 0 and cos(πk) = (-1)^k at integer frequencies
            let sign = if (k as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
            2.0 / h / (c_h * (4.0 * PI * PI * k * k + 1.0 / (h * h))) * (1.0 - tail * sign)
        })
        .collect();
    Ok(ThetaParam::Sequence(values))
}
