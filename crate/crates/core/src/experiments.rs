//! Simulation studies of the estimation error: MSE against sample size and
//! sparsity, the effect of a mixing burn-in, and support recovery.
//!
//! Every trial is reproducible from `(base_seed, s, trial)`: the trial seed
//! drives the ground-truth draw, the initial state and the sample path, each on
//! its own stream. Cells with the same `s` therefore share ground truths, and
//! a path with `T` transitions is a prefix of the path with `T' > T`.

use crate::error::{GlarError, Result};
use crate::estimator::{default_lambda, fit, EstimatorConfig};
use crate::family::Family;
use crate::model::GlarModel;
use crate::rng::{derive_trial_seed, SimRng, STREAM_INIT};
use crate::simulator::{sample_sparse_matrix, simulate, GenSpec, InitialState, Structure};
use crate::theory::{bernoulli_cross_ceiling, poisson_bound_report, poisson_cross_ceiling};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

/// Magnitude above which an estimated entry counts as part of the recovered support.
pub const SUPPORT_THRESHOLD: f64 = 0.1;

/// Burn-in length of the mixed arm of [`burn_in_comparison`].
pub const MIXED_BURN_IN: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `0.1 / √T`.
    PaperDefault,
    Fixed(f64),
    /// Twice the high-probability ceiling of the cross-term statistic.
    Thm2Ceiling,
}

impl LambdaRule {
    /// `paper`, `thm2`, or a nonnegative number.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        match text.trim() {
            "paper" | "paper_default" => Ok(LambdaRule::PaperDefault),
            "thm2" | "thm2_ceiling" => Ok(LambdaRule::Thm2Ceiling),
            other => match other.parse::<f64>() {
                Ok(v) if v >= 0.0 && v.is_finite() => Ok(LambdaRule::Fixed(v)),
                _ => Err(format!("expected `paper`, `thm2` or a nonnegative number, got `{other}`")),
            },
        }
    }

    pub fn lambda(self, family: Family, dim: usize, transitions: usize, nu_max: f64) -> Result<f64> {
        match self {
            LambdaRule::PaperDefault => Ok(default_lambda(transitions)),
            LambdaRule::Fixed(v) => Ok(v),
            LambdaRule::Thm2Ceiling => Ok(2.0
                * match family {
                    Family::Bernoulli => bernoulli_cross_ceiling(dim, transitions),
                    Family::Poisson => {
                        let alpha = 1.0 - 0.1 / dim as f64;
                        let c = poisson_bound_report(dim, transitions, nu_max, alpha)?.c_logbound;
                        poisson_cross_ceiling(dim, transitions, c, nu_max)
                    }
                }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub family: Family,
    #[serde(rename = "M")]
    pub dim: usize,
    pub rho: usize,
    pub s_values: Vec<usize>,
    #[serde(rename = "T_values")]
    pub t_values: Vec<usize>,
    pub trials: usize,
    pub lambda_rule: LambdaRule,
    pub burn_in: usize,
    pub base_seed: u64,
    pub structure: Structure,
    pub value_low: f64,
    pub value_high: f64,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            family: Family::Poisson,
            dim: 20,
            rho: 5,
            s_values: vec![40],
            t_values: vec![100, 178, 316, 400],
            trials: 20,
            lambda_rule: LambdaRule::PaperDefault,
            burn_in: 0,
            base_seed: 0,
            structure: Structure::Random,
            value_low: -1.0,
            value_high: 0.0,
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        let field = |field: &str, message: String| Err(GlarError::ConfigField { field: field.into(), message });
        if self.trials == 0 {
            return field("trials", "must be at least 1".into());
        }
        if self.dim == 0 {
            return field("M", "must be at least 1".into());
        }
        if self.s_values.is_empty() {
            return field("s", "needs at least one value".into());
        }
        if self.t_values.is_empty() || self.t_values.contains(&0) {
            return field("T", "needs at least one positive value".into());
        }
        if let LambdaRule::Fixed(v) = self.lambda_rule {
            if !(v >= 0.0 && v.is_finite()) {
                return field("lambda", format!("must be nonnegative, got {v}"));
            }
        }
        for &s in &self.s_values {
            self.gen_spec(s, 0).check()?;
        }
        Ok(())
    }

    fn gen_spec(&self, s: usize, seed: u64) -> GenSpec {
        GenSpec {
            dim: self.dim,
            s,
            rho: self.rho,
            value_low: self.value_low,
            value_high: self.value_high,
            structure: self.structure,
            seed,
        }
    }

    /// Cells in output order: `s` outer, `T` inner.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.s_values.iter().flat_map(|&s| self.t_values.iter().map(move |&t| (s, t))).collect()
    }
}

/// Squared Frobenius distance.
pub fn mse(a_hat: &DMatrix<f64>, a_star: &DMatrix<f64>) -> Result<f64> {
    check_shapes(a_hat, a_star)?;
    Ok(a_hat.iter().zip(a_star.iter()).fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y)))
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(GlarError::DimensionMismatch { expected: b.nrows() * b.ncols(), got: a.nrows() * a.ncols() });
    }
    Ok(())
}

/// Precision and recall of `{|Â_ij| > threshold}` against the nonzeros of `A*`.
/// Precision is 1 when nothing is predicted; recall is 1 when `A* = 0`.
pub fn support_metrics(a_hat: &DMatrix<f64>, a_star: &DMatrix<f64>, threshold: f64) -> Result<(f64, f64)> {
    check_shapes(a_hat, a_star)?;
    if !(threshold >= 0.0) {
        return Err(GlarError::InvalidConfig(format!("support threshold must be nonnegative, got {threshold}")));
    }
    let (mut tp, mut predicted, mut actual) = (0usize, 0usize, 0usize);
    for (x, y) in a_hat.iter().zip(a_star.iter()) {
        let p = x.abs() > threshold;
        let a = *y != 0.0;
        predicted += usize::from(p);
        actual += usize::from(a);
        tp += usize::from(p && a);
    }
    let precision = if predicted == 0 { 1.0 } else { tp as f64 / predicted as f64 };
    let recall = if actual == 0 { 1.0 } else { tp as f64 / actual as f64 };
    Ok((precision, recall))
}

/// Entries outside the true support with `|Â_ij| > threshold`.
pub fn off_support_count(a_hat: &DMatrix<f64>, a_star: &DMatrix<f64>, threshold: f64) -> Result<usize> {
    check_shapes(a_hat, a_star)?;
    Ok(a_hat.iter().zip(a_star.iter()).filter(|(x, y)| **y == 0.0 && x.abs() > threshold).count())
}

/// Outcome of one trial; `None` fields mark a failed trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub mse: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub off_support: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub family: Family,
    pub s: usize,
    #[serde(rename = "T")]
    pub transitions: usize,
    pub trials: usize,
    pub lambda: f64,
    pub mse_median: f64,
    pub mse_q25: f64,
    pub mse_q75: f64,
    #[serde(rename = "mse_times_T")]
    pub mse_times_t: f64,
    pub mse_over_s: f64,
    pub precision_median: f64,
    pub recall_median: f64,
    pub off_support_median: f64,
    pub failed: usize,
    pub records: Vec<TrialRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub grid: ExperimentGrid,
    pub cells: Vec<CellResult>,
}

pub const RESULTS_HEADER: [&str; 12] = [
    "family",
    "s",
    "T",
    "trials",
    "mse_median",
    "mse_q25",
    "mse_q75",
    "mse_times_T",
    "mse_over_s",
    "precision_median",
    "recall_median",
    "failed",
];

impl CellResult {
    fn csv_record(&self) -> [String; 12] {
        [
            self.family.name().to_owned(),
            self.s.to_string(),
            self.transitions.to_string(),
            self.trials.to_string(),
            self.mse_median.to_string(),
            self.mse_q25.to_string(),
            self.mse_q75.to_string(),
            self.mse_times_t.to_string(),
            self.mse_over_s.to_string(),
            self.precision_median.to_string(),
            self.recall_median.to_string(),
            self.failed.to_string(),
        ]
    }
}

impl ExperimentResult {
    pub fn to_csv(&self) -> Result<String> {
        cells_to_csv(&self.cells)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn cell(&self, s: usize, transitions: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.s == s && c.transitions == transitions)
    }
}

pub fn cells_to_csv(cells: &[CellResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER)?;
    for c in cells {
        w.write_record(c.csv_record())?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// `(q25, median, q75)`, or NaN when empty.
fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut data = Data::new(sorted);
    (data.quantile(0.25), data.quantile(0.5), data.quantile(0.75))
}

fn median(values: &[f64]) -> f64 {
    quartiles(values).1
}

/// Poisson(1) counts, or fair coin flips for binary series.
pub fn default_initial_state(family: Family, dim: usize, seed: u64) -> InitialState {
    match family {
        Family::Poisson => InitialState::Poisson1,
        Family::Bernoulli => {
            let mut rng = SimRng::new(seed, STREAM_INIT);
            InitialState::Given((0..dim).map(|_| rng.bernoulli(0.5)).collect())
        }
    }
}

fn run_trial(grid: &ExperimentGrid, s: usize, transitions: usize, lambda: f64, trial: usize) -> TrialRecord {
    let seed = derive_trial_seed(grid.base_seed, s as u64, trial as u64);
    let outcome = (|| -> Result<(f64, f64, f64, usize)> {
        let a_star = sample_sparse_matrix(&grid.gen_spec(s, seed))?;
        let model = GlarModel::new(grid.family, a_star.clone(), vec![0.0; grid.dim])?;
        let init = default_initial_state(grid.family, grid.dim, seed);
        let series = simulate(&model, &init, transitions, grid.burn_in, seed)?;
        let est = fit(grid.family, &model.nu, &series, &EstimatorConfig::with_lambda(lambda))?;
        if !est.all_converged() {
            let rows = est.converged_per_row.iter().filter(|c| !**c).count();
            return Err(GlarError::InvalidConfig(format!("{rows} rows did not converge")));
        }
        let (precision, recall) = support_metrics(&est.a_hat, &a_star, SUPPORT_THRESHOLD)?;
        let off = off_support_count(&est.a_hat, &a_star, SUPPORT_THRESHOLD)?;
        Ok((mse(&est.a_hat, &a_star)?, precision, recall, off))
    })();
    match outcome {
        Ok((m, p, r, off)) => TrialRecord {
            trial,
            seed,
            mse: Some(m),
            precision: Some(p),
            recall: Some(r),
            off_support: Some(off),
            error: None,
        },
        Err(e) => TrialRecord {
            trial,
            seed,
            mse: None,
            precision: None,
            recall: None,
            off_support: None,
            error: Some(e.to_string()),
        },
    }
}

/// All trials of one `(s, T)` cell.
pub fn run_cell(grid: &ExperimentGrid, s: usize, transitions: usize) -> Result<CellResult> {
    let lambda = grid.lambda_rule.lambda(grid.family, grid.dim, transitions, 0.0)?;
    let records: Vec<TrialRecord> =
        (0..grid.trials).into_par_iter().map(|k| run_trial(grid, s, transitions, lambda, k)).collect();
    Ok(summarize(grid.family, s, transitions, lambda, records))
}

fn summarize(family: Family, s: usize, transitions: usize, lambda: f64, records: Vec<TrialRecord>) -> CellResult {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.mse.is_some()).collect();
    let mses: Vec<f64> = ok.iter().filter_map(|r| r.mse).collect();
    let (q25, med, q75) = quartiles(&mses);
    let pick = |f: fn(&TrialRecord) -> Option<f64>| median(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    CellResult {
        family,
        s,
        transitions,
        trials: records.len(),
        lambda,
        mse_median: med,
        mse_q25: q25,
        mse_q75: q75,
        mse_times_t: med * transitions as f64,
        mse_over_s: if s == 0 { f64::NAN } else { med / s as f64 },
        precision_median: pick(|r| r.precision),
        recall_median: pick(|r| r.recall),
        off_support_median: pick(|r| r.off_support.map(|v| v as f64)),
        failed: records.len() - ok.len(),
        records,
    }
}

pub fn run_grid(grid: &ExperimentGrid) -> Result<ExperimentResult> {
    grid.validate()?;
    let cells = grid.cells().into_iter().map(|(s, t)| run_cell(grid, s, t)).collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { grid: grid.clone(), cells })
}

/// Least-squares slope of `log y` on `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(GlarError::InsufficientCells(format!("slope needs >= 2 points, got {}", points.len())));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn max_min_ratio(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingDiagnostics {
    /// Slope of `log mse_median` on `log T` at the first `s` with >= 3 `T` cells.
    pub slope_log_t: Option<f64>,
    /// Max/min ratio of `mse_median · T` over those cells.
    pub mse_times_t_ratio: Option<f64>,
    /// Max/min ratio of `mse_median / s` at the first `T` with >= 3 `s` cells.
    pub flatness_mse_over_s: Option<f64>,
}

pub fn scaling_diagnostics(cells: &[CellResult]) -> Result<ScalingDiagnostics> {
    let mut s_seen: Vec<usize> = Vec::new();
    let mut t_seen: Vec<usize> = Vec::new();
    for c in cells {
        if !s_seen.contains(&c.s) {
            s_seen.push(c.s);
        }
        if !t_seen.contains(&c.transitions) {
            t_seen.push(c.transitions);
        }
    }
    let mut out = ScalingDiagnostics { slope_log_t: None, mse_times_t_ratio: None, flatness_mse_over_s: None };
    for &s in &s_seen {
        let at_s: Vec<&CellResult> = cells.iter().filter(|c| c.s == s).collect();
        if at_s.len() >= 3 {
            let pts: Vec<(f64, f64)> = at_s.iter().map(|c| (c.transitions as f64, c.mse_median)).collect();
            out.slope_log_t = Some(loglog_slope(&pts)?);
            out.mse_times_t_ratio = Some(max_min_ratio(&at_s.iter().map(|c| c.mse_times_t).collect::<Vec<_>>()));
            break;
        }
    }
    for &t in &t_seen {
        let at_t: Vec<f64> = cells.iter().filter(|c| c.transitions == t).map(|c| c.mse_over_s).collect();
        if at_t.len() >= 3 {
            out.flatness_mse_over_s = Some(max_min_ratio(&at_t));
            break;
        }
    }
    if out.slope_log_t.is_none() && out.flatness_mse_over_s.is_none() {
        return Err(GlarError::InsufficientCells("need >= 3 T cells at some s or >= 3 s cells at some T".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BurnInCell {
    pub s: usize,
    #[serde(rename = "T")]
    pub transitions: usize,
    /// Median MSE with burn-in over median MSE without.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BurnInComparison {
    pub unmixed: ExperimentResult,
    pub mixed: ExperimentResult,
    pub ratios: Vec<BurnInCell>,
}

/// Runs the grid with `burn_in = 0` and `burn_in = mixed_burn_in`; trial seeds are shared.
pub fn burn_in_comparison(grid: &ExperimentGrid, mixed_burn_in: usize) -> Result<BurnInComparison> {
    let unmixed = run_grid(&ExperimentGrid { burn_in: 0, ..grid.clone() })?;
    let mixed = run_grid(&ExperimentGrid { burn_in: mixed_burn_in, ..grid.clone() })?;
    let ratios = unmixed
        .cells
        .iter()
        .zip(&mixed.cells)
        .map(|(u, m)| BurnInCell { s: u.s, transitions: u.transitions, ratio: m.mse_median / u.mse_median })
        .collect();
    Ok(BurnInComparison { unmixed, mixed, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, v.len() / rows, v)
    }

    #[test]
    fn mse_examples() {
        let a = mat(2, &[1.0, -0.5, 0.0, 2.0]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[(0, 0)] += 1.0;
        assert_eq!(mse(&b, &a).unwrap(), 1.0);
        let c = &a + (&b - &a) * 2.0;
        assert_eq!(mse(&c, &a).unwrap(), 4.0);
        assert!(mse(&a, &mat(1, &[1.0])).is_err());
    }

    #[test]
    fn support_metric_examples() {
        let a = mat(2, &[-0.5, 0.0, 0.0, -0.3]);
        assert_eq!(support_metrics(&a, &a, 0.0).unwrap(), (1.0, 1.0));
        assert_eq!(support_metrics(&DMatrix::zeros(2, 2), &a, 0.0).unwrap(), (1.0, 0.0));
        let comp = mat(2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(support_metrics(&comp, &a, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(off_support_count(&comp, &a, 0.1).unwrap(), 2);
        assert!(support_metrics(&a, &a, -1.0).is_err());
    }

    #[test]
    fn lambda_rules() {
        assert_eq!(LambdaRule::parse("paper").unwrap(), LambdaRule::PaperDefault);
        assert_eq!(LambdaRule::parse("thm2").unwrap(), LambdaRule::Thm2Ceiling);
        assert_eq!(LambdaRule::parse("0.25").unwrap(), LambdaRule::Fixed(0.25));
        assert!(LambdaRule::parse("-1").is_err());
        assert!(LambdaRule::parse("fast").is_err());
        let l = LambdaRule::PaperDefault.lambda(Family::Poisson, 20, 400, 0.0).unwrap();
        assert!((l - 0.005).abs() < 1e-15);
        let b = LambdaRule::Thm2Ceiling.lambda(Family::Bernoulli, 5, 10_000, 0.0).unwrap();
        assert!((b - 6.0 * 50_000f64.ln() / 100.0).abs() < 1e-12);
    }

    fn synthetic(s: usize, t: usize, mse_median: f64) -> CellResult {
        summarize_fixed(s, t, mse_median)
    }

    fn summarize_fixed(s: usize, t: usize, m: f64) -> CellResult {
        let rec = TrialRecord {
            trial: 0,
            seed: 0,
            mse: Some(m),
            precision: Some(1.0),
            recall: Some(1.0),
            off_support: Some(0),
            error: None,
        };
        summarize(Family::Poisson, s, t, 0.1, vec![rec])
    }

    #[test]
    fn scaling_on_synthetic_cells() {
        let cells: Vec<CellResult> = [100, 200, 400, 800].iter().map(|&t| synthetic(40, t, 1.0 / t as f64)).collect();
        let d = scaling_diagnostics(&cells).unwrap();
        assert!((d.slope_log_t.unwrap() + 1.0).abs() < 1e-12);
        assert!((d.mse_times_t_ratio.unwrap() - 1.0).abs() < 1e-12);
        assert!(d.flatness_mse_over_s.is_none());

        let flat: Vec<CellResult> = [100, 200, 400].iter().map(|&t| synthetic(40, t, 0.3)).collect();
        assert!(scaling_diagnostics(&flat).unwrap().slope_log_t.unwrap().abs() < 1e-12);

        let by_s: Vec<CellResult> = [20, 40, 60, 80].iter().map(|&s| synthetic(s, 400, 0.01 * s as f64)).collect();
        assert!((scaling_diagnostics(&by_s).unwrap().flatness_mse_over_s.unwrap() - 1.0).abs() < 1e-12);

        assert!(scaling_diagnostics(&cells[..2]).is_err());
    }

    #[test]
    fn quartiles_are_ordered() {
        let (a, b, c) = quartiles(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert!(a <= b && b <= c);
        assert_eq!(b, 3.0);
        assert!(quartiles(&[]).1.is_nan());
    }

    #[test]
    fn failed_trials_are_excluded() {
        let ok = synthetic(1, 10, 2.0).records.remove(0);
        let bad = TrialRecord { mse: None, precision: None, recall: None, off_support: None, error: Some("x".into()), ..ok.clone() };
        let cell = summarize(Family::Poisson, 1, 10, 0.1, vec![ok, bad]);
        assert_eq!((cell.trials, cell.failed), (2, 1));
        assert_eq!(cell.mse_median, 2.0);
    }

    #[test]
    fn grid_validation() {
        assert!(ExperimentGrid::default().validate().is_ok());
        let g = ExperimentGrid { dim: 4, rho: 2, s_values: vec![41], ..ExperimentGrid::default() };
        assert!(matches!(g.validate(), Err(GlarError::InfeasibleSparsity(_))));
        let g = ExperimentGrid { trials: 0, ..ExperimentGrid::default() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn single_trial_rerun_is_identical() {
        let g = ExperimentGrid { dim: 4, rho: 2, s_values: vec![4], t_values: vec![50], trials: 1, base_seed: 3, ..ExperimentGrid::default() };
        let a = run_grid(&g).unwrap();
        let b = run_grid(&g).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.to_csv().unwrap().lines().next().unwrap(), RESULTS_HEADER.join(","));
    }
}
