//! Single-hidden-layer network with `tanh` hidden units and a linear output,
//! trained by Levenberg-Marquardt, plus tier-search training.
//!
//! Weight layout for `n` inputs and `k` hidden nodes (`s = (n + 2) k + 1`):
//!
//! ```text
//! [ w0_1 .. w0_k | w_11 .. w_1k, w_21 .. w_nk | b0 | b_1 .. b_k ]
//! ```
//!
//! `w0_j` is the output weight of hidden node `j`, `w_ij` the weight from
//! input `i` to node `j` (input-major), `b0` the output bias and `b_j` the
//! hidden biases.

use std::collections::BTreeSet;
use std::io::Read;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Objective, Point};
use crate::error::{Error, Result};
use crate::solvers::{levenberg_marquardt, levenberg_marquardt_observed, LmConfig, LmResult};
use crate::tiersearch::{
    explore, tier_search, DirectionStrategy, LocalSolver, Refined, Solution, SolutionSet,
    TierConfig,
};

/// Step used when LM took no step to average.
pub const FALLBACK_STEP: f64 = 1e-2;

/// Network shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    /// Inputs.
    pub n: usize,
    /// Hidden nodes.
    pub k: usize,
}

impl MlpArch {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::Config("network needs n, k >= 1".into()));
        }
        Ok(Self { n, k })
    }

    pub fn param_count(&self) -> usize {
        (self.n + 2) * self.k + 1
    }

    fn w0(&self, j: usize) -> usize {
        j
    }

    fn w(&self, i: usize, j: usize) -> usize {
        self.k + i * self.k + j
    }

    fn b0(&self) -> usize {
        self.k + self.n * self.k
    }

    fn b(&self, j: usize) -> usize {
        self.b0() + 1 + j
    }

    fn check(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// Hidden activations and the output for one input.
    fn activations(&self, w: &DVector<f64>, x: &[f64]) -> (Vec<f64>, f64) {
        let mut y = w[self.b0()];
        let h: Vec<f64> = (0..self.k)
            .map(|j| {
                let a = w[self.b(j)] + (0..self.n).map(|i| w[self.w(i, j)] * x[i]).sum::<f64>();
                let h = a.tanh();
                y += w[self.w0(j)] * h;
                h
            })
            .collect();
        (h, y)
    }
}

/// Network output `sum_j w0_j tanh(sum_i w_ij x_i + b_j) + b0`.
pub fn forward(arch: &MlpArch, w: &DVector<f64>, x: &[f64]) -> Result<f64> {
    arch.check(w)?;
    if x.len() != arch.n {
        return Err(Error::Dimension {
            expected: arch.n,
            got: x.len(),
        });
    }
    Ok(arch.activations(w, x).1)
}

/// Inputs, numeric targets and an optional class-label map.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    /// `Q x n`.
    pub x: DMatrix<f64>,
    pub t: DVector<f64>,
    /// Class `c` has target `c as f64`.
    pub classes: Option<Vec<String>>,
}

impl LabeledData {
    pub fn new(x: DMatrix<f64>, t: DVector<f64>, classes: Option<Vec<String>>) -> Result<Self> {
        if x.nrows() == 0 || x.nrows() != t.len() {
            return Err(Error::InvalidParams(format!(
                "{} samples with {} targets",
                x.nrows(),
                t.len()
            )));
        }
        if x.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite feature or target".into()));
        }
        Ok(Self { x, t, classes })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn features(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: DMatrix::from_fn(idx.len(), self.x.ncols(), |r, c| self.x[(idx[r], c)]),
            t: DVector::from_fn(idx.len(), |r, _| self.t[idx[r]]),
            classes: self.classes.clone(),
        }
    }

    /// Rescales every feature to `[0, 1]`; constant features become 0.
    pub fn normalize_min_max(&mut self) {
        for mut col in self.x.column_iter_mut() {
            let (lo, hi) = (col.min(), col.max());
            let span = hi - lo;
            col.apply(|v| *v = if span > 0.0 { (*v - lo) / span } else { 0.0 });
        }
    }

    /// Per-feature `(min, max)`.
    pub fn input_ranges(&self) -> Vec<(f64, f64)> {
        self.x.column_iter().map(|c| (c.min(), c.max())).collect()
    }

    /// CSV with numeric feature columns and a final label column. A first
    /// row whose features do not parse is treated as a header. Labels are
    /// sorted (numerically when all parse) and mapped to `0, 1, ...`.
    pub fn read_csv<R: Read>(input: R, normalize: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .from_reader(input);
        let mut feats: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidParams(format!(
                    "row {row}: need at least one feature and a label"
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec
                .iter()
                .take(rec.len() - 1)
                .map(|f| f.trim().parse::<f64>())
                .collect();
            match parsed {
                Ok(v) => {
                    feats.push(v);
                    labels.push(rec[rec.len() - 1].trim().to_string());
                }
                Err(_) if row == 0 => continue,
                Err(e) => {
                    return Err(Error::InvalidParams(format!("row {row}: bad feature: {e}")))
                }
            }
        }
        if feats.is_empty() {
            return Err(Error::InvalidParams("no samples".into()));
        }
        let n = feats[0].len();
        let mut classes: Vec<String> = labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if classes.iter().all(|c| c.parse::<f64>().is_ok()) {
            classes.sort_by(|a, b| {
                a.parse::<f64>()
                    .expect("checked")
                    .total_cmp(&b.parse::<f64>().expect("checked"))
            });
        }
        let t = DVector::from_iterator(
            labels.len(),
            labels
                .iter()
                .map(|l| classes.iter().position(|c| c == l).expect("collected") as f64),
        );
        let x = DMatrix::from_row_iterator(feats.len(), n, feats.into_iter().flatten());
        let mut data = Self::new(x, t, Some(classes))?;
        if normalize {
            data.normalize_min_max();
        }
        Ok(data)
    }
}

/// Residuals `e_i = t_i - y(w, x_i)`.
pub fn residuals(arch: &MlpArch, w: &DVector<f64>, data: &LabeledData) -> Result<DVector<f64>> {
    arch.check(w)?;
    check_data(arch, data)?;
    let mut x = vec![0.0; arch.n];
    Ok(DVector::from_fn(data.len(), |q, _| {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = data.x[(q, i)];
        }
        data.t[q] - arch.activations(w, &x).1
    }))
}

fn check_data(arch: &MlpArch, data: &LabeledData) -> Result<()> {
    if data.features() != arch.n {
        return Err(Error::Dimension {
            expected: arch.n,
            got: data.features(),
        });
    }
    Ok(())
}

/// Mean squared residual.
pub fn mse(arch: &MlpArch, w: &DVector<f64>, data: &LabeledData) -> Result<f64> {
    Ok(residuals(arch, w, data)?.norm_squared() / data.len() as f64)
}

/// `Q x s` matrix of `d e_q / d w`.
pub fn jacobian(arch: &MlpArch, w: &DVector<f64>, data: &LabeledData) -> Result<DMatrix<f64>> {
    arch.check(w)?;
    check_data(arch, data)?;
    let mut j = DMatrix::zeros(data.len(), arch.param_count());
    let mut x = vec![0.0; arch.n];
    for q in 0..data.len() {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = data.x[(q, i)];
        }
        let (h, _) = arch.activations(w, &x);
        j[(q, arch.b0())] = -1.0;
        for (hj, node) in h.iter().zip(0..arch.k) {
            j[(q, arch.w0(node))] = -hj;
            let back = w[arch.w0(node)] * (1.0 - hj * hj);
            j[(q, arch.b(node))] = -back;
            for (i, xi) in x.iter().enumerate() {
                j[(q, arch.w(i, node))] = -back * xi;
            }
        }
    }
    Ok(j)
}

/// Outcome of one LM training run.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub w: DVector<f64>,
    pub mse: f64,
    /// Gauss-Newton matrix at `w`.
    pub jtj: DMatrix<f64>,
    /// Mean accepted LM step length ([`FALLBACK_STEP`] when none).
    pub mean_step: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl TrainResult {
    fn from_lm(r: LmResult, q: usize) -> Self {
        Self {
            mse: 2.0 * r.cost / q as f64,
            mean_step: if r.mean_step > 0.0 {
                r.mean_step
            } else {
                FALLBACK_STEP
            },
            converged: r.converged(),
            iterations: r.iterations,
            jtj: r.jtj,
            w: r.w,
        }
    }
}

/// Levenberg-Marquardt on the residuals.
pub fn lm_train(
    arch: &MlpArch,
    w0: &DVector<f64>,
    data: &LabeledData,
    cfg: &LmConfig,
) -> Result<TrainResult> {
    arch.check(w0)?;
    check_data(arch, data)?;
    let r = levenberg_marquardt(
        |w| residuals(arch, w, data),
        |w| jacobian(arch, w, data),
        w0,
        cfg,
    )?;
    Ok(TrainResult::from_lm(r, data.len()))
}

/// Validation checks without improvement before early stopping.
pub const EARLY_STOP_PATIENCE: usize = 10;

/// LM with early stopping on `val`: returns the iterate with the lowest
/// validation MSE among those visited.
pub fn lm_train_early(
    arch: &MlpArch,
    w0: &DVector<f64>,
    train: &LabeledData,
    val: &LabeledData,
    cfg: &LmConfig,
    patience: usize,
) -> Result<TrainResult> {
    arch.check(w0)?;
    check_data(arch, train)?;
    let mut best_w = w0.clone();
    let mut best_val = mse(arch, w0, val)?;
    let mut since = 0;
    levenberg_marquardt_observed(
        |w| residuals(arch, w, train),
        |w| jacobian(arch, w, train),
        w0,
        cfg,
        |_, w| {
            let v = mse(arch, w, val).unwrap_or(f64::INFINITY);
            if v < best_val {
                best_val = v;
                best_w = w.clone();
                since = 0;
            } else {
                since += 1;
            }
            since >= patience
        },
    )?;
    let e = residuals(arch, &best_w, train)?;
    let j = jacobian(arch, &best_w, train)?;
    Ok(TrainResult {
        mse: e.norm_squared() / train.len() as f64,
        jtj: j.transpose() * &j,
        mean_step: FALLBACK_STEP,
        iterations: 0,
        converged: false,
        w: best_w,
    })
}

/// MSE as an [`Objective`] over the weight vector.
pub struct MlpObjective<'a> {
    pub arch: MlpArch,
    pub data: &'a LabeledData,
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.arch.param_count()
    }

    fn value(&self, w: &Point) -> Result<f64> {
        mse(&self.arch, w, self.data)
    }

    fn gradient(&self, w: &Point) -> Result<Point> {
        let e = residuals(&self.arch, w, self.data)?;
        let j = jacobian(&self.arch, w, self.data)?;
        Ok(j.transpose() * e * (2.0 / self.data.len() as f64))
    }
}

/// LM as a [`LocalSolver`]; reports `J^T J` and the mean step.
pub struct LmSolver<'a> {
    pub arch: MlpArch,
    pub data: &'a LabeledData,
    pub cfg: LmConfig,
}

impl LocalSolver for LmSolver<'_> {
    fn refine(&self, x0: &Point) -> Result<Refined> {
        self.refine_capped(x0, None)
    }

    fn refine_capped(&self, x0: &Point, max_iter: Option<usize>) -> Result<Refined> {
        let mut cfg = self.cfg;
        if let Some(cap) = max_iter {
            cfg.max_iter = cap;
        }
        let r = lm_train(&self.arch, x0, self.data, &cfg)?;
        Ok(Refined {
            point: r.w,
            value: r.mse,
            iterations: r.iterations,
            converged: r.converged,
            curvature: Some(r.jtj),
            step_hint: Some(r.mean_step),
        })
    }
}

/// Tier-search settings for network training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtTrainConfig {
    pub lm: LmConfig,
    /// Prune factor `c` for tier-2 expansion.
    pub prune_factor: f64,
    pub max_evals: usize,
    pub max_tiers: usize,
    pub dedup_tol: f64,
}

impl Default for TtTrainConfig {
    fn default() -> Self {
        Self {
            lm: LmConfig::default(),
            prune_factor: 1.2,
            max_evals: 500,
            max_tiers: 2,
            dedup_tol: 1e-3,
        }
    }
}

impl TtTrainConfig {
    fn tier_config(&self) -> TierConfig {
        TierConfig {
            step: FALLBACK_STEP,
            eps: None,
            max_evals: self.max_evals,
            max_tiers: self.max_tiers,
            strategy: DirectionStrategy::HessianEigenvectors,
            prune_factor: self.prune_factor,
            dedup_tol: self.dedup_tol,
            scale_steps: false,
            use_solver_step: true,
            dynamic_iter_cap: false,
            seed: 0,
        }
    }
}

/// Neighbouring LM minima of a trained network, one search per
/// eigenvector (both orientations) of `J^T J`.
pub fn tt_neighbors(
    arch: &MlpArch,
    root: &TrainResult,
    data: &LabeledData,
    cfg: &TtTrainConfig,
) -> Result<Vec<TrainResult>> {
    let obj = MlpObjective { arch: *arch, data };
    let solver = LmSolver {
        arch: *arch,
        data,
        cfg: cfg.lm,
    };
    let sol = Solution {
        point: root.w.clone(),
        value: root.mse,
        tier: 0,
        parent: None,
        direction_index: None,
        exit_point: None,
        iterations: root.iterations,
        curvature: Some(root.jtj.clone()),
        step_hint: Some(root.mean_step),
    };
    let found = explore(&obj, &sol, &solver, &cfg.tier_config(), 0, None)?;
    let mut out: Vec<TrainResult> = Vec::new();
    for nb in found {
        let r = nb.refined;
        if out.iter().any(|o| (&o.w - &r.point).norm() < cfg.dedup_tol) {
            continue;
        }
        out.push(TrainResult {
            w: r.point,
            mse: r.value,
            jtj: r.curvature.expect("LM reports curvature"),
            mean_step: r.step_hint.unwrap_or(FALLBACK_STEP),
            iterations: r.iterations,
            converged: r.converged,
        });
    }
    Ok(out)
}

/// Output of [`tt_train`].
#[derive(Debug, Clone)]
pub struct TtTrainResult {
    pub w: DVector<f64>,
    pub mse: f64,
    /// MSE of plain LM from the same start (tier 0).
    pub lm_mse: f64,
    pub solutions: SolutionSet,
}

/// Two-tier training: LM, tier-1 neighbours, tier-2 from tier-1 solutions
/// under the prune threshold; returns the lowest MSE found.
pub fn tt_train(
    arch: &MlpArch,
    w0: &DVector<f64>,
    data: &LabeledData,
    cfg: &TtTrainConfig,
) -> Result<TtTrainResult> {
    arch.check(w0)?;
    check_data(arch, data)?;
    let obj = MlpObjective { arch: *arch, data };
    let solver = LmSolver {
        arch: *arch,
        data,
        cfg: cfg.lm,
    };
    let set = tier_search(&obj, w0, &solver, &cfg.tier_config())?;
    let root = set
        .solutions
        .iter()
        .find(|s| s.tier == 0)
        .expect("root stored");
    let best = set.best().expect("non-empty");
    Ok(TtTrainResult {
        w: best.point.clone(),
        mse: best.value,
        lm_mse: root.value,
        solutions: set,
    })
}

/// Nguyen-Widrow initialization.
///
/// Hidden weight rows are random directions of norm `0.7 * k^(1/n)` with
/// biases evenly spread over `[-norm, norm]`, both expressed for inputs in
/// `[-1, 1]` and then mapped onto `input_ranges`. Output weights are
/// uniform in `[-0.5, 0.5]`.
pub fn nguyen_widrow_init(
    arch: &MlpArch,
    input_ranges: &[(f64, f64)],
    seed: u64,
) -> Result<DVector<f64>> {
    if input_ranges.len() != arch.n {
        return Err(Error::Dimension {
            expected: arch.n,
            got: input_ranges.len(),
        });
    }
    if input_ranges
        .iter()
        .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite()))
    {
        return Err(Error::InvalidParams("input ranges must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = 0.7 * (arch.k as f64).powf(1.0 / arch.n as f64);
    let mut w = DVector::zeros(arch.param_count());
    for j in 0..arch.k {
        let mut row: Vec<f64> = (0..arch.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        row.iter_mut().for_each(|v| *v *= beta / norm);
        let spread = if arch.k == 1 {
            0.0
        } else {
            -1.0 + 2.0 * j as f64 / (arch.k - 1) as f64
        };
        let mut b = beta * spread * row[0].signum();
        for (i, (lo, hi)) in input_ranges.iter().enumerate() {
            let span = hi - lo;
            let (scale, centre) = if span > 0.0 {
                (2.0 / span, 0.5 * (hi + lo))
            } else {
                (1.0, *lo)
            };
            let wi = row[i] * scale;
            b -= wi * centre;
            w[arch.w(i, j)] = wi;
        }
        w[arch.b(j)] = b;
    }
    for j in 0..arch.k {
        w[arch.w0(j)] = rng.gen_range(-0.5..0.5);
    }
    w[arch.b0()] = rng.gen_range(-0.5..0.5);
    Ok(w)
}

/// Every parameter uniform in `[-1, 1]`.
pub fn random_init(arch: &MlpArch, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(arch.param_count(), |_, _| rng.gen_range(-1.0..=1.0))
}

/// Index of the class target nearest `y`.
pub fn nearest_class(y: f64, n_classes: usize) -> usize {
    (y.round().max(0.0) as usize).min(n_classes.saturating_sub(1))
}

/// Training procedure used by [`kfold_eval`]: `(arch, w0, train, val)`.
pub type Trainer<'a> =
    dyn Fn(&MlpArch, &DVector<f64>, &LabeledData, &LabeledData) -> Result<DVector<f64>> + Sync + 'a;

/// Per-fold outcome of [`kfold_eval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_error: f64,
    pub test_error: f64,
    pub misclassified: usize,
    pub test_size: usize,
}

/// Cross-validation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldResult {
    pub folds: Vec<FoldResult>,
    pub train_error: f64,
    pub test_error: f64,
    /// `(1 - misclassified / Q) * 100` over all test folds.
    pub accuracy: f64,
}

/// Shuffled partition of `0..q` into `folds` parts whose sizes differ by at
/// most one.
pub fn fold_partition(q: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds == 0 || q < folds {
        return Err(Error::Config(format!(
            "{q} samples cannot fill {folds} folds"
        )));
    }
    let mut idx: Vec<usize> = (0..q).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = vec![Vec::new(); folds];
    for (i, v) in idx.into_iter().enumerate() {
        parts[i % folds].push(v);
    }
    Ok(parts)
}

/// k-fold evaluation: fold `i` validates (early stopping), fold `i + 1`
/// tests and the rest trains. Initial weights come from
/// [`nguyen_widrow_init`] seeded per fold.
pub fn kfold_eval(
    arch: &MlpArch,
    data: &LabeledData,
    folds: usize,
    trainer: &Trainer<'_>,
    seed: u64,
) -> Result<KFoldResult> {
    if folds < 3 {
        return Err(Error::Config("k-fold evaluation needs at least 3 folds".into()));
    }
    let parts = fold_partition(data.len(), folds, seed)?;
    let n_classes = data.classes.as_ref().map(Vec::len);
    let results: Vec<Result<FoldResult>> = (0..folds)
        .into_par_iter()
        .map(|i| {
            let test_i = (i + 1) % folds;
            let train_idx: Vec<usize> = (0..folds)
                .filter(|&f| f != i && f != test_i)
                .flat_map(|f| parts[f].iter().copied())
                .collect();
            let train = data.subset(&train_idx);
            let val = data.subset(&parts[i]);
            let test = data.subset(&parts[test_i]);
            let w0 = nguyen_widrow_init(arch, &train.input_ranges(), seed.wrapping_add(i as u64))?;
            let w = trainer(arch, &w0, &train, &val)?;
            let r = residuals(arch, &w, &test)?;
            let misclassified = match n_classes {
                Some(c) => r
                    .iter()
                    .zip(test.t.iter())
                    .filter(|(e, t)| nearest_class(*t - *e, c) != **t as usize)
                    .count(),
                None => 0,
            };
            Ok(FoldResult {
                fold: i,
                train_error: mse(arch, &w, &train)?,
                test_error: r.norm_squared() / test.len() as f64,
                misclassified,
                test_size: test.len(),
            })
        })
        .collect();
    let folds_out = results.into_iter().collect::<Result<Vec<_>>>()?;
    let m = folds_out.len() as f64;
    let total: usize = folds_out.iter().map(|f| f.test_size).sum();
    let wrong: usize = folds_out.iter().map(|f| f.misclassified).sum();
    Ok(KFoldResult {
        train_error: folds_out.iter().map(|f| f.train_error).sum::<f64>() / m,
        test_error: folds_out.iter().map(|f| f.test_error).sum::<f64>() / m,
        accuracy: (1.0 - wrong as f64 / total as f64) * 100.0,
        folds: folds_out,
    })
}

/// Early-stopped LM trainer for [`kfold_eval`].
pub fn lm_trainer(cfg: LmConfig) -> impl Fn(&MlpArch, &DVector<f64>, &LabeledData, &LabeledData) -> Result<DVector<f64>> + Sync {
    move |arch, w0, train, val| {
        Ok(lm_train_early(arch, w0, train, val, &cfg, EARLY_STOP_PATIENCE)?.w)
    }
}

/// Tier-search trainer for [`kfold_eval`]; the validation fold picks among
/// the stored solutions.
pub fn tt_trainer(cfg: TtTrainConfig) -> impl Fn(&MlpArch, &DVector<f64>, &LabeledData, &LabeledData) -> Result<DVector<f64>> + Sync {
    move |arch, w0, train, val| {
        let r = tt_train(arch, w0, train, &cfg)?;
        let mut best = (f64::INFINITY, r.w.clone());
        for s in &r.solutions.solutions {
            let v = mse(arch, &s.point, val)?;
            if v < best.0 {
                best = (v, s.point.clone());
            }
        }
        debug!("tt trainer kept validation mse {}", best.0);
        Ok(best.1)
    }
}

/// The four XOR points with targets 0/1.
pub fn xor_data() -> LabeledData {
    LabeledData {
        x: DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]),
        t: DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0]),
        classes: Some(vec!["0".into(), "1".into()]),
    }
}

/// Two interleaved half circles with Gaussian noise, classes 0/1.
pub fn two_moons(q: usize, noise: f64, seed: u64) -> LabeledData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(q, 2);
    let mut t = DVector::zeros(q);
    for i in 0..q {
        let c = i % 2;
        let a = rng.gen_range(0.0..std::f64::consts::PI);
        let (px, py) = if c == 0 {
            (a.cos(), a.sin())
        } else {
            (1.0 - a.cos(), 0.5 - a.sin())
        };
        let nx: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        let ny: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        x[(i, 0)] = px + noise * nx;
        x[(i, 1)] = py + noise * ny;
        t[i] = c as f64;
    }
    LabeledData {
        x,
        t,
        classes: Some(vec!["0".into(), "1".into()]),
    }
}
