//! Orthonormal bases of `L²([0,1])` and the coefficient-space representation
//! of functions.
//!
//! Two bases are available:
//!
//! * [`BasisKind::SinePeriodic`]: `φ_k = √2 sin(πk·)`, `k ≥ 1`. The flattened
//!   index `i` maps to `k = i + 1`, and the level of `φ_k` is `k`.
//! * [`BasisKind::Trigonometric`]: `φ_0 = 1`, `φ_{j,0} = √2 sin(2πj·)`,
//!   `φ_{j,1} = √2 cos(2πj·)`, `j ≥ 1`. The flattened order is the constant
//!   first, then for each level the sine followed by the cosine, so index
//!   `2j - 1` is `φ_{j,0}` and index `2j` is `φ_{j,1}`.
//!
//! A [`CoefficientVector`] at level `J` stores every coefficient whose level is
//! at most `J`. With [`LevelScaling::Linear`] the number of basis functions
//! grows linearly in `J`; with [`LevelScaling::Dyadic`] the level-`J` space
//! contains every frequency up to `2^J`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    SinePeriodic,
    Trigonometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevelScaling {
    Linear,
    Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub dim_d: usize,
    pub level_scaling: LevelScaling,
}

impl BasisSpec {
    pub const fn sine() -> Self {
        BasisSpec {
            kind: BasisKind::SinePeriodic,
            dim_d: 1,
            level_scaling: LevelScaling::Linear,
        }
    }

    pub const fn trigonometric() -> Self {
        BasisSpec {
            kind: BasisKind::Trigonometric,
            dim_d: 1,
            level_scaling: LevelScaling::Linear,
        }
    }

    /// Smallest level carried by the basis: 1 for the linear sine basis,
    /// otherwise 0 (`V_0` holds the constant, or `φ_1` under dyadic scaling).
    pub fn min_level(&self) -> usize {
        match (self.kind, self.level_scaling) {
            (BasisKind::SinePeriodic, LevelScaling::Linear) => 1,
            _ => 0,
        }
    }

    /// Largest frequency contained in `V_level`.
    fn max_frequency(&self, level: usize) -> usize {
        match self.level_scaling {
            LevelScaling::Linear => level,
            LevelScaling::Dyadic => 1usize << level,
        }
    }

    /// `dim(V_level)`.
    pub fn dim(&self, level: usize) -> usize {
        let n = self.max_frequency(level);
        match self.kind {
            BasisKind::SinePeriodic => n,
            BasisKind::Trigonometric => 2 * n + 1,
        }
    }

    /// Frequency `|k|` of the basis function at a flattened index.
    pub fn frequency_of(&self, index: usize) -> usize {
        match self.kind {
            BasisKind::SinePeriodic => index + 1,
            BasisKind::Trigonometric => index.div_ceil(2),
        }
    }

    /// Level of the basis function at a flattened index: the smallest `j` with
    /// `index < dim(V_j)`.
    pub fn level_of(&self, index: usize) -> usize {
        let freq = self.frequency_of(index);
        match self.level_scaling {
            LevelScaling::Linear => freq,
            LevelScaling::Dyadic if freq <= 1 => 0,
            LevelScaling::Dyadic => (usize::BITS - (freq - 1).leading_zeros()) as usize,
        }
    }

    /// Value of the basis function with flattened index `index` at `x`.
    pub fn eval(&self, index: usize, x: f64) -> f64 {
        match self.kind {
            BasisKind::SinePeriodic => SQRT_2 * (PI * (index + 1) as f64 * x).sin(),
            BasisKind::Trigonometric => {
                if index == 0 {
                    1.0
                } else {
                    let j = index.div_ceil(2) as f64;
                    if index % 2 == 1 {
                        SQRT_2 * (2.0 * PI * j * x).sin()
                    } else {
                        SQRT_2 * (2.0 * PI * j * x).cos()
                    }
                }
            }
        }
    }

    /// Weight used by the Sobolev norm for a given flattened index.
    fn sobolev_weight(&self, index: usize, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        match self.level_scaling {
            LevelScaling::Linear => (self.frequency_of(index).max(1) as f64).powf(2.0 * s),
            LevelScaling::Dyadic => 2f64.powf(2.0 * s * self.level_of(index) as f64),
        }
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            BasisKind::SinePeriodic => "sine",
            BasisKind::Trigonometric => "trigonometric",
        };
        match self.level_scaling {
            LevelScaling::Linear => write!(f, "{kind}"),
            LevelScaling::Dyadic => write!(f, "{kind}-dyadic"),
        }
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, dyadic) = match s.strip_suffix("-dyadic") {
            Some(k) => (k, true),
            None => (s, false),
        };
        let mut spec = match kind {
            "sine" => BasisSpec::sine(),
            "trigonometric" | "trig" => BasisSpec::trigonometric(),
            other => return Err(Error::Parse(format!("unknown basis `{other}`"))),
        };
        if dyadic {
            spec.level_scaling = LevelScaling::Dyadic;
        }
        Ok(spec)
    }
}

/// A function represented by its first `dim(V_level)` basis coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    basis: BasisSpec,
    level: usize,
    coeffs: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(basis: BasisSpec, level: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = basis.dim(level);
        if coeffs.len() != expected {
            return Err(Error::LevelMismatch(format!(
                "level {level} of the {basis} basis needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(CoefficientVector {
            basis,
            level,
            coeffs,
        })
    }

    pub fn zeros(basis: BasisSpec, level: usize) -> Self {
        CoefficientVector {
            basis,
            level,
            coeffs: vec![0.0; basis.dim(level)],
        }
    }

    /// Builds the level-`level` vector whose coefficient at flattened index `i`
    /// is `coeff(i)`.
    pub fn from_fn(basis: BasisSpec, level: usize, coeff: impl FnMut(usize) -> f64) -> Self {
        CoefficientVector {
            basis,
            level,
            coeffs: (0..basis.dim(level)).map(coeff).collect(),
        }
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Orthogonal projection onto `V_j`. Never pads: a request above the
    /// current level returns the vector unchanged.
    pub fn project(&self, j: usize) -> CoefficientVector {
        if j >= self.level {
            return self.clone();
        }
        CoefficientVector {
            basis: self.basis,
            level: j,
            coeffs: self.coeffs[..self.basis.dim(j)].to_vec(),
        }
    }

    /// Embeds into `V_j` for `j ≥ level` by appending zero coefficients.
    pub fn zero_pad(&self, j: usize) -> CoefficientVector {
        if j <= self.level {
            return self.clone();
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(self.basis.dim(j), 0.0);
        CoefficientVector {
            basis: self.basis,
            level: j,
            coeffs,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| self.basis.sobolev_weight(i, s) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// `L²` distance, treating the shorter vector as zero-padded.
    pub fn distance(&self, other: &CoefficientVector) -> f64 {
        let (long, short) = if self.len() >= other.len() {
            (&self.coeffs, &other.coeffs)
        } else {
            (&other.coeffs, &self.coeffs)
        };
        let mut acc = 0.0;
        for (i, a) in long.iter().enumerate() {
            let d = a - short.get(i).copied().unwrap_or(0.0);
            acc += d * d;
        }
        acc.sqrt()
    }

    /// `⟨self, other⟩` over the common indices.
    pub fn dot(&self, other: &CoefficientVector) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scale(&self, a: f64) -> CoefficientVector {
        self.map(|_, c| a * c)
    }

    pub fn map(&self, mut op: impl FnMut(usize, f64) -> f64) -> CoefficientVector {
        CoefficientVector {
            basis: self.basis,
            level: self.level,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| op(i, c))
                .collect(),
        }
    }

    /// Coefficient-wise sum of two vectors of the same basis and level.
    pub fn add(&self, other: &CoefficientVector) -> Result<CoefficientVector> {
        self.check_same_shape(other)?;
        Ok(self.map(|i, c| c + other.coeffs[i]))
    }

    fn check_same_shape(&self, other: &CoefficientVector) -> Result<()> {
        if self.basis != other.basis || self.level != other.level {
            return Err(Error::LevelMismatch(format!(
                "{} level {} vs {} level {}",
                self.basis, self.level, other.basis, other.level
            )));
        }
        Ok(())
    }

    /// Synthesises `Σ f_k φ_k(x)` at a single point.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.basis.eval(i, x))
            .sum()
    }

    /// Synthesises the function on `n_points` equispaced points of `[0, 1]`,
    /// endpoints included.
    pub fn evaluate_on_grid(&self, n_points: usize) -> Result<Vec<(f64, f64)>> {
        if n_points < 2 {
            return Err(Error::Config(format!(
                "grid evaluation needs at least 2 points, got {n_points}"
            )));
        }
        let h = 1.0 / (n_points - 1) as f64;
        Ok((0..n_points)
            .map(|i| {
                let x = i as f64 * h;
                (x, self.eval(x))
            })
            .collect())
    }

    /// Writes `index,level,coeff` rows, where `level` is the frequency `|k|`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["index", "level", "coeff"])
            .map_err(csv_err)?;
        for (i, c) in self.coeffs.iter().enumerate() {
            wtr.write_record([
                i.to_string(),
                self.basis.frequency_of(i).to_string(),
                format!("{c:?}"),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads the format produced by [`CoefficientVector::write_csv`]. The
    /// level is the smallest one whose dimension matches the row count.
    pub fn read_csv<R: Read>(basis: BasisSpec, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.iter().collect::<Vec<_>>() != ["index", "level", "coeff"] {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut coeffs = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let index: usize = parse_field(&rec, 0)?;
            let level: usize = parse_field(&rec, 1)?;
            let coeff: f64 = parse_field(&rec, 2)?;
            if index != row || level != basis.frequency_of(index) {
                return Err(Error::Parse(format!(
                    "row {row}: index/level ({index}, {level}) inconsistent with the {basis} basis"
                )));
            }
            coeffs.push(coeff);
        }
        let level = (0..=coeffs.len())
            .find(|&j| basis.dim(j) == coeffs.len())
            .ok_or_else(|| {
                Error::Parse(format!(
                    "{} coefficients is not the dimension of any level",
                    coeffs.len()
                ))
            })?;
        CoefficientVector::new(basis, level, coeffs)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub(crate) fn parse_field<T: FromStr>(rec: &csv::StringRecord, idx: usize) -> Result<T> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::Parse(format!("missing field {idx}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse field {idx}: `{raw}`")))
}

/// Trapezoid rule for `∫₀¹ g(x)² dx` on `n_points` equispaced points.
pub fn trapezoid_sq_integral(values: &[(f64, f64)]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let h = 1.0 / (n - 1) as f64;
    let inner: f64 = values[1..n - 1].iter().map(|(_, v)| v * v).sum();
    h * (inner + 0.5 * (values[0].1.powi(2) + values[n - 1].1.powi(2)))
}
