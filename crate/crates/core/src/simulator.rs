//! Sample paths of GLAR processes and random sparse ground-truth matrices.

use crate::error::{GlarError, Result};
use crate::family::Family;
use crate::model::GlarModel;
use crate::rng::{SimRng, STREAM_BURN_IN, STREAM_INIT, STREAM_MATRIX, STREAM_RECORD};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

/// Poisson rates above this abort the trajectory.
pub const MAX_POISSON_RATE: f64 = 1e9;

/// Rejection attempts allowed when drawing a row-capped random support.
pub const SUPPORT_DRAW_ATTEMPTS: usize = 10_000;

/// Observed states `X_0, ..., X_T` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    dim: usize,
    data: Vec<f64>,
    pub seed: u64,
    pub burn_in: usize,
}

impl TimeSeries {
    pub fn from_states(states: &[Vec<f64>], seed: u64, burn_in: usize) -> Result<Self> {
        let dim = states.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(GlarError::Format("time series needs at least one non-empty state".into()));
        }
        let mut data = Vec::with_capacity(states.len() * dim);
        for s in states {
            if s.len() != dim {
                return Err(GlarError::DimensionMismatch { expected: dim, got: s.len() });
            }
            data.extend_from_slice(s);
        }
        Ok(Self { dim, data, seed, burn_in })
    }

    /// Dimension `M`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of transitions `T`; there are `T + 1` states.
    pub fn transitions(&self) -> usize {
        self.data.len() / self.dim - 1
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Consecutive `(X_t, X_{t+1})` pairs for `t = 0..T`.
    pub fn transitions_iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.data.chunks_exact(self.dim).zip(self.data.chunks_exact(self.dim).skip(1))
    }

    /// Prefix containing the first `transitions` transitions.
    pub fn truncated(&self, transitions: usize) -> TimeSeries {
        let n = (transitions + 1).min(self.data.len() / self.dim);
        TimeSeries { dim: self.dim, data: self.data[..n * self.dim].to_vec(), seed: self.seed, burn_in: self.burn_in }
    }

    /// Same series with coordinates reordered so that new coordinate `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> TimeSeries {
        let data = self.states().flat_map(|s| perm.iter().map(move |&p| s[p])).collect();
        TimeSeries { dim: self.dim, data, seed: self.seed, burn_in: self.burn_in }
    }

    pub fn in_support(&self, family: Family) -> bool {
        self.data.iter().all(|&x| family.in_support(x))
    }

    /// CSV with header `t,x_1,...,x_M`, one row per time index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 1..=self.dim {
            let _ = write!(out, ",x_{j}");
        }
        out.push('\n');
        for (t, s) in self.states().enumerate() {
            let _ = write!(out, "{t}");
            for &x in s {
                if x.fract() == 0.0 && x.abs() < 9.0e15 {
                    let _ = write!(out, ",{}", x as i64);
                } else {
                    let _ = write!(out, ",{x}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let dim = headers.len().saturating_sub(1);
        if dim == 0 || &headers[0] != "t" {
            return Err(GlarError::Format("time series CSV header must be `t,x_1,...,x_M`".into()));
        }
        for (j, h) in headers.iter().skip(1).enumerate() {
            if h != format!("x_{}", j + 1) {
                return Err(GlarError::Format(format!("unexpected column `{h}` at position {}", j + 2)));
            }
        }
        let mut data = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let t: usize = record[0]
                .parse()
                .map_err(|_| GlarError::Format(format!("row {}: bad time index `{}`", row + 2, &record[0])))?;
            if t != row {
                return Err(GlarError::Format(format!("row {}: expected t={row}, found t={t}", row + 2)));
            }
            for field in record.iter().skip(1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| GlarError::Format(format!("row {}: bad value `{field}`", row + 2)))?;
                data.push(v);
            }
        }
        if data.len() < 2 * dim {
            return Err(GlarError::Format("time series needs at least two states".into()));
        }
        Ok(Self { dim, data, seed: 0, burn_in: 0 })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Provenance written next to a series CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub seed: u64,
    pub burn_in: usize,
    pub model_hash: String,
}

impl SeriesMetadata {
    pub fn new(series: &TimeSeries, model: &GlarModel) -> Result<Self> {
        Ok(Self { seed: series.seed, burn_in: series.burn_in, model_hash: model_hash(model)? })
    }
}

/// SHA-256 of the canonical model JSON, lowercase hex.
pub fn model_hash(model: &GlarModel) -> Result<String> {
    Ok(hex::encode(Sha256::digest(model.to_json()?.as_bytes())))
}

/// Starting point of a simulation.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Given(Vec<f64>),
    /// Each coordinate drawn iid from Poisson(1).
    Poisson1,
}

/// One transition: each coordinate drawn independently with natural parameter `θ_m`.
pub fn step(model: &GlarModel, x: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
    step_at(model, x, rng, 0)
}

fn step_at(model: &GlarModel, x: &[f64], rng: &mut SimRng, t: usize) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(GlarError::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    let mut next = Vec::with_capacity(x.len());
    for m in 0..model.dim() {
        let theta = model.theta_row(m, x);
        let value = match model.family {
            Family::Bernoulli => rng.bernoulli(model.family.mean(theta)),
            Family::Poisson => {
                let rate = theta.exp();
                if !(rate <= MAX_POISSON_RATE) {
                    return Err(GlarError::UnstableTrajectory { t, rate });
                }
                rng.poisson(rate)
            }
        };
        next.push(value);
    }
    Ok(next)
}

/// Runs `burn_in` discarded steps from the initial state, then records `T + 1`
/// states. Initial draws, burn-in and the recorded segment each use their own
/// stream of `seed` (see [`crate::rng`]), so the recorded segment of an `A = 0`
/// model does not depend on `burn_in`.
pub fn simulate(model: &GlarModel, init: &InitialState, transitions: usize, burn_in: usize, seed: u64) -> Result<TimeSeries> {
    if transitions == 0 {
        return Err(GlarError::InvalidModel("simulation needs T >= 1".into()));
    }
    let dim = model.dim();
    let mut x = match init {
        InitialState::Given(v) => {
            if v.len() != dim {
                return Err(GlarError::DimensionMismatch { expected: dim, got: v.len() });
            }
            v.clone()
        }
        InitialState::Poisson1 => {
            let mut rng = SimRng::new(seed, STREAM_INIT);
            (0..dim).map(|_| rng.poisson(1.0)).collect()
        }
    };
    let mut burn = SimRng::new(seed, STREAM_BURN_IN);
    for t in 0..burn_in {
        x = step_at(model, &x, &mut burn, t)?;
    }
    let mut rng = SimRng::new(seed, STREAM_RECORD);
    let mut data = Vec::with_capacity((transitions + 1) * dim);
    data.extend_from_slice(&x);
    for t in 0..transitions {
        x = step_at(model, &x, &mut rng, burn_in + t)?;
        data.extend_from_slice(&x);
    }
    Ok(TimeSeries { dim, data, seed, burn_in })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Random,
    BlockDiagonal,
}

impl FromStr for Structure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "random" => Ok(Structure::Random),
            "block_diagonal" | "block-diagonal" => Ok(Structure::BlockDiagonal),
            other => Err(format!("unknown structure `{other}`")),
        }
    }
}

/// Recipe for a random sparse ground-truth matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub dim: usize,
    pub s: usize,
    pub rho: usize,
    pub value_low: f64,
    pub value_high: f64,
    pub structure: Structure,
    pub seed: u64,
}

impl GenSpec {
    /// Capacity of the chosen structure, or an error naming the violated constraint.
    pub fn check(&self) -> Result<()> {
        let infeasible = |msg: String| Err(GlarError::InfeasibleSparsity(msg));
        if self.value_low > self.value_high {
            return infeasible(format!("value_low {} > value_high {}", self.value_low, self.value_high));
        }
        if self.s > 0 && self.value_low == 0.0 && self.value_high == 0.0 {
            return infeasible("nonzero entries requested from the range [0, 0]".into());
        }
        if self.rho > self.dim {
            return infeasible(format!("rho {} > M {}", self.rho, self.dim));
        }
        if self.s > self.dim * self.rho {
            return infeasible(format!("s {} > M*rho = {}", self.s, self.dim * self.rho));
        }
        if self.structure == Structure::BlockDiagonal {
            let cap = block_cells(self.dim, self.rho).len();
            if self.s > cap {
                return infeasible(format!("s {} exceeds block-diagonal capacity {cap}", self.s));
            }
        }
        Ok(())
    }
}

/// Cells of contiguous diagonal blocks of side `rho` (the last block may be smaller).
fn block_cells(dim: usize, rho: usize) -> Vec<(usize, usize)> {
    if rho == 0 {
        return Vec::new();
    }
    let mut cells = Vec::new();
    let mut start = 0;
    while start < dim {
        let end = (start + rho).min(dim);
        for i in start..end {
            for j in start..end {
                cells.push((i, j));
            }
        }
        start = end;
    }
    cells
}

/// Picks `k` distinct items of `pool` by a partial Fisher-Yates shuffle.
fn choose<T: Copy>(pool: &mut [T], k: usize, rng: &mut SimRng) {
    for i in 0..k {
        let j = i + rng.below((pool.len() - i) as u64) as usize;
        pool.swap(i, j);
    }
}

fn draw_value(spec: &GenSpec, rng: &mut SimRng) -> f64 {
    loop {
        let v = rng.uniform_in(spec.value_low, spec.value_high);
        if v != 0.0 {
            return v;
        }
    }
}

/// Exactly `s` nonzeros, no row above `rho`, values uniform on `[value_low, value_high]`.
///
/// Random supports are drawn by rejection: `s` cells uniformly without
/// replacement, retried while some row exceeds `rho`.
pub fn sample_sparse_matrix(spec: &GenSpec) -> Result<DMatrix<f64>> {
    spec.check()?;
    let mut rng = SimRng::new(spec.seed, STREAM_MATRIX);
    let dim = spec.dim;
    let mut a = DMatrix::zeros(dim, dim);
    if spec.s == 0 {
        return Ok(a);
    }
    let cells: Vec<(usize, usize)> = match spec.structure {
        Structure::BlockDiagonal => {
            let mut pool = block_cells(dim, spec.rho);
            choose(&mut pool, spec.s, &mut rng);
            pool.truncate(spec.s);
            pool
        }
        Structure::Random => {
            let mut pool: Vec<(usize, usize)> = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).collect();
            let mut accepted = None;
            for _ in 0..SUPPORT_DRAW_ATTEMPTS {
                choose(&mut pool, spec.s, &mut rng);
                let mut rows = vec![0usize; dim];
                for &(i, _) in &pool[..spec.s] {
                    rows[i] += 1;
                }
                if rows.iter().all(|&c| c <= spec.rho) {
                    accepted = Some(pool[..spec.s].to_vec());
                    break;
                }
            }
            accepted.ok_or_else(|| {
                GlarError::InfeasibleSparsity(format!(
                    "no support with s={} and row cap {} found in {SUPPORT_DRAW_ATTEMPTS} draws",
                    spec.s, spec.rho
                ))
            })?
        }
    };
    let mut cells = cells;
    cells.sort_unstable();
    for (i, j) in cells {
        a[(i, j)] = draw_value(spec, &mut rng);
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsity::sparsity_of;

    fn spec(dim: usize, s: usize, rho: usize, structure: Structure) -> GenSpec {
        GenSpec { dim, s, rho, value_low: -1.0, value_high: 0.0, structure, seed: 42 }
    }

    #[test]
    fn random_matrix_matches_protocol() {
        for seed in 0..20 {
            let a = sample_sparse_matrix(&GenSpec { seed, ..spec(20, 40, 5, Structure::Random) }).unwrap();
            let p = sparsity_of(&a, 0.0);
            assert_eq!(p.s, 40);
            assert!(p.rho <= 5);
            assert!(a.iter().all(|&v| (-1.0..=0.0).contains(&v)));
        }
    }

    #[test]
    fn zero_sparsity_is_zero_matrix() {
        let a = sample_sparse_matrix(&spec(5, 0, 2, Structure::Random)).unwrap();
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_diagonal_exact_fill() {
        let a = sample_sparse_matrix(&spec(4, 8, 2, Structure::BlockDiagonal)).unwrap();
        let p = sparsity_of(&a, 0.0);
        let expected: std::collections::BTreeSet<_> =
            [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)].into_iter().collect();
        assert_eq!(p.support, expected);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        assert!(matches!(
            sample_sparse_matrix(&spec(4, 41, 2, Structure::Random)),
            Err(GlarError::InfeasibleSparsity(_))
        ));
        assert!(sample_sparse_matrix(&spec(4, 9, 2, Structure::BlockDiagonal)).is_err());
        assert!(sample_sparse_matrix(&spec(4, 2, 5, Structure::Random)).is_err());
        let mut bad = spec(4, 2, 2, Structure::Random);
        bad.value_low = 1.0;
        assert!(sample_sparse_matrix(&bad).is_err());
    }

    #[test]
    fn same_seed_same_matrix() {
        let s = spec(10, 20, 3, Structure::Random);
        assert_eq!(sample_sparse_matrix(&s).unwrap(), sample_sparse_matrix(&s).unwrap());
    }

    #[test]
    fn burn_in_zero_keeps_initial_state() {
        let model = GlarModel::independent(Family::Poisson, 3);
        let ts = simulate(&model, &InitialState::Given(vec![2.0, 0.0, 5.0]), 5, 0, 9).unwrap();
        assert_eq!(ts.state(0), &[2.0, 0.0, 5.0]);
        assert_eq!(ts.transitions(), 5);
    }

    #[test]
    fn unstable_poisson_is_reported() {
        let model = GlarModel::new(Family::Poisson, DMatrix::from_element(1, 1, 2.0), vec![0.0]).unwrap();
        let err = simulate(&model, &InitialState::Given(vec![3.0]), 100, 0, 1).unwrap_err();
        assert!(matches!(err, GlarError::UnstableTrajectory { .. }), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let model = GlarModel::independent(Family::Poisson, 2);
        let ts = simulate(&model, &InitialState::Poisson1, 4, 0, 3).unwrap();
        let text = ts.to_csv();
        assert!(text.starts_with("t,x_1,x_2\n0,"));
        let back = TimeSeries::from_csv(&text).unwrap();
        assert_eq!(back.state(4), ts.state(4));
        assert_eq!(back.transitions(), 4);
    }

    #[test]
    fn csv_rejects_bad_header_and_gaps() {
        assert!(TimeSeries::from_csv("t,y\n0,1\n1,0\n").is_err());
        assert!(TimeSeries::from_csv("t,x_1\n0,1\n2,0\n").is_err());
        assert!(TimeSeries::from_csv("t,x_1\n0,1\n").is_err());
    }
}
