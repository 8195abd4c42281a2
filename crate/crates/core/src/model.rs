//! The GLAR model object: `X_{t+1,m} | X_t ~ p(ν_m + a_m · X_t)`.

use crate::error::{GlarError, Result};
use crate::family::Family;
use crate::sparsity::{sparsity_of, SparsityProfile};
use nalgebra::DMatrix;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct GlarModel {
    pub family: Family,
    /// Row `m` holds the incoming weights `a_m` of node `m`.
    pub a: DMatrix<f64>,
    pub nu: Vec<f64>,
    pub a_min: f64,
    pub a_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl GlarModel {
    /// Model with unconstrained entry box and a tight offset box.
    pub fn new(family: Family, a: DMatrix<f64>, nu: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(GlarError::InvalidModel(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if nu.len() != a.nrows() {
            return Err(GlarError::DimensionMismatch { expected: a.nrows(), got: nu.len() });
        }
        let nu_min = nu.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
        let nu_max = nu.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        Ok(Self {
            family,
            a,
            nu,
            a_min: f64::NEG_INFINITY,
            a_max: f64::INFINITY,
            nu_min,
            nu_max,
        })
    }

    /// `M`-dimensional model with `A = 0` and `ν = 0`.
    pub fn independent(family: Family, dim: usize) -> Self {
        Self::new(family, DMatrix::zeros(dim, dim), vec![0.0; dim]).expect("square by construction")
    }

    pub fn with_box(mut self, a_min: f64, a_max: f64) -> Self {
        self.a_min = a_min;
        self.a_max = a_max;
        self
    }

    pub fn with_offset_box(mut self, nu_min: f64, nu_max: f64) -> Self {
        self.nu_min = nu_min;
        self.nu_max = nu_max;
        self
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(GlarError::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    /// `θ_m = ν_m + a_m · x` for a single row, without dimension checks.
    #[inline]
    pub fn theta_row(&self, m: usize, x: &[f64]) -> f64 {
        let mut acc = self.nu[m];
        for (j, &xj) in x.iter().enumerate() {
            acc += self.a[(m, j)] * xj;
        }
        acc
    }

    pub fn natural_params(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok((0..self.dim()).map(|m| self.theta_row(m, x)).collect())
    }

    pub fn conditional_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.natural_params(x)?.into_iter().map(|t| self.family.mean(t)).collect())
    }

    pub fn conditional_variance(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.natural_params(x)?.into_iter().map(|t| self.family.variance(t)).collect())
    }

    pub fn sparsity(&self, zero_tol: f64) -> SparsityProfile {
        sparsity_of(&self.a, zero_tol)
    }

    /// `ν̃ = max(|ν_min|, |ν_max|)`.
    pub fn nu_tilde(&self) -> f64 {
        self.nu_min.abs().max(self.nu_max.abs())
    }

    /// `ã = max(|a_min|, |a_max|)`; infinite when the box is unbounded.
    pub fn a_tilde(&self) -> f64 {
        self.a_min.abs().max(self.a_max.abs())
    }

    /// Smallest and largest entries of `A`, each widened to include 0.
    pub fn entry_range(&self) -> (f64, f64) {
        let lo = self.a.iter().copied().fold(0.0, f64::min);
        let hi = self.a.iter().copied().fold(0.0, f64::max);
        (lo, hi)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let m = self.dim();
        (0..m).all(|i| (0..i).all(|j| (self.a[(i, j)] - self.a[(j, i)]).abs() <= tol))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Category of an invariant violation found by [`validate_model`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    DimensionMismatch,
    NonFinite,
    InvertedBox,
    EntryOutOfBox,
    OffsetOutOfBox,
    PositivePoissonEntry,
}

impl ViolationKind {
    pub fn label(self) -> &'static str {
        match self {
            ViolationKind::DimensionMismatch => "dimension mismatch",
            ViolationKind::NonFinite => "non-finite parameter",
            ViolationKind::InvertedBox => "inverted box",
            ViolationKind::EntryOutOfBox => "entry out of box",
            ViolationKind::OffsetOutOfBox => "offset out of box",
            ViolationKind::PositivePoissonEntry => "positive entry in Poisson model",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.label(), self.detail)
    }
}

/// Every invariant violation of `model`. An empty list means the model is valid.
///
/// Positive entries in a Poisson model are reported because the simulator's
/// stability argument needs `a_max <= 0`; they are still accepted by
/// [`crate::simulator::simulate`], which guards against rate blow-up instead.
pub fn validate_model(model: &GlarModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, detail: String| out.push(Violation { kind, detail });

    let m = model.dim();
    if model.a.nrows() != m || model.a.ncols() != m {
        push(
            ViolationKind::DimensionMismatch,
            format!("A is {}x{} but nu has length {m}", model.a.nrows(), model.a.ncols()),
        );
        return out;
    }
    if model.a_min > model.a_max {
        push(ViolationKind::InvertedBox, format!("a_min {} > a_max {}", model.a_min, model.a_max));
    }
    if model.nu_min > model.nu_max {
        push(ViolationKind::InvertedBox, format!("nu_min {} > nu_max {}", model.nu_min, model.nu_max));
    }
    for i in 0..m {
        for j in 0..m {
            let v = model.a[(i, j)];
            if !v.is_finite() {
                push(ViolationKind::NonFinite, format!("A[{i},{j}] = {v}"));
            } else if v < model.a_min || v > model.a_max {
                push(
                    ViolationKind::EntryOutOfBox,
                    format!("A[{i},{j}] = {v} outside [{}, {}]", model.a_min, model.a_max),
                );
            }
            if model.family == Family::Poisson && v > 0.0 {
                push(
                    ViolationKind::PositivePoissonEntry,
                    format!("A[{i},{j}] = {v} > 0; simulation requires a_max <= 0"),
                );
            }
        }
    }
    for (i, &v) in model.nu.iter().enumerate() {
        if !v.is_finite() {
            push(ViolationKind::NonFinite, format!("nu[{i}] = {v}"));
        } else if v < model.nu_min || v > model.nu_max {
            push(
                ViolationKind::OffsetOutOfBox,
                format!("nu[{i}] = {v} outside [{}, {}]", model.nu_min, model.nu_max),
            );
        }
    }
    out
}

/// A real number that may be infinite, written as `"-inf"` / `"+inf"` in JSON.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("+inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Bound(v)),
            Raw::Text(t) => match t.as_str() {
                "+inf" | "inf" => Ok(Bound(f64::INFINITY)),
                "-inf" => Ok(Bound(f64::NEG_INFINITY)),
                other => Err(de::Error::custom(format!("expected a number, \"-inf\" or \"+inf\", got {other:?}"))),
            },
        }
    }
}

/// On-disk layout of a model JSON file.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    family: Family,
    #[serde(rename = "M")]
    dim: usize,
    nu: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    a_min: Bound,
    a_max: Bound,
    nu_min: Bound,
    nu_max: Bound,
}

impl From<&GlarModel> for ModelFile {
    fn from(m: &GlarModel) -> Self {
        let dim = m.dim();
        ModelFile {
            family: m.family,
            dim,
            nu: m.nu.clone(),
            a: (0..dim).map(|i| (0..dim).map(|j| m.a[(i, j)]).collect()).collect(),
            a_min: Bound(m.a_min),
            a_max: Bound(m.a_max),
            nu_min: Bound(m.nu_min),
            nu_max: Bound(m.nu_max),
        }
    }
}

impl TryFrom<ModelFile> for GlarModel {
    type Error = GlarError;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.nu.len() != f.dim {
            return Err(GlarError::DimensionMismatch { expected: f.dim, got: f.nu.len() });
        }
        if f.a.len() != f.dim {
            return Err(GlarError::DimensionMismatch { expected: f.dim, got: f.a.len() });
        }
        if let Some(row) = f.a.iter().find(|r| r.len() != f.dim) {
            return Err(GlarError::DimensionMismatch { expected: f.dim, got: row.len() });
        }
        let flat: Vec<f64> = f.a.into_iter().flatten().collect();
        Ok(GlarModel {
            family: f.family,
            a: DMatrix::from_row_slice(f.dim, f.dim, &flat),
            nu: f.nu,
            a_min: f.a_min.0,
            a_max: f.a_max.0,
            nu_min: f.nu_min.0,
            nu_max: f.nu_max.0,
        })
    }
}
