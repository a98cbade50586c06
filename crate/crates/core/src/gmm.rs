//! Gaussian mixture models: likelihood, EM, the analytic gradient of the
//! negative log-likelihood, tier-search EM and synthetic datasets.
//!
//! Parameters are stored as weights `alpha` (`k`), means (`k x d`, one row per
//! component) and one [`Covariance`] per component. For tier search the model
//! is flattened by [`GmmParams::to_vector`] as
//!
//! ```text
//! [ mu (k*d, row-major) | scale parameters | alpha_1 .. alpha_{k-1} ]
//! ```
//!
//! where the scale parameters are the standard deviations `sigma_i`
//! (spherical, `k`), `sigma_il` (diagonal, `k*d`) or the lower Cholesky
//! factors of each covariance, row-major (full, `k*d*(d+1)/2`). The last
//! weight is dependent: `alpha_k = 1 - sum(alpha_i)`.

use std::io::{Read, Write};
use std::str::FromStr;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynsys::{Objective, Point};
use crate::error::{Error, Result};
use crate::smoothing::{desmooth_scatter, KernelSpec};
use crate::tiersearch::{tier_search_from, LocalSolver, Refined, SolutionSet, TierConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Tolerance on `sum(alpha) = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Covariance parameterization shared by all components of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    Spherical,
    Diagonal,
    Full,
}

impl FromStr for CovKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spherical" => Ok(Self::Spherical),
            "diagonal" => Ok(Self::Diagonal),
            "full" => Ok(Self::Full),
            _ => Err(Error::Config(format!("unknown covariance kind '{s}'"))),
        }
    }
}

/// Covariance of one component; spherical and diagonal store variances.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Spherical(f64),
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

impl Covariance {
    pub fn kind(&self) -> CovKind {
        match self {
            Self::Spherical(_) => CovKind::Spherical,
            Self::Diagonal(_) => CovKind::Diagonal,
            Self::Full(_) => CovKind::Full,
        }
    }

    pub fn to_matrix(&self, d: usize) -> DMatrix<f64> {
        match self {
            Self::Spherical(v) => DMatrix::identity(d, d) * *v,
            Self::Diagonal(v) => DMatrix::from_diagonal(v),
            Self::Full(m) => m.clone(),
        }
    }

    /// Smallest variance (smallest eigenvalue for full matrices).
    pub fn min_variance(&self) -> f64 {
        match self {
            Self::Spherical(v) => *v,
            Self::Diagonal(v) => v.min(),
            Self::Full(m) => SymmetricEigen::new(m.clone()).eigenvalues.min(),
        }
    }

    fn validate(&self, d: usize, i: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(format!("component {i}: {msg}")));
        match self {
            Self::Spherical(v) => {
                if !(*v > 0.0 && v.is_finite()) {
                    return bad(format!("variance {v} must be positive"));
                }
            }
            Self::Diagonal(v) => {
                if v.len() != d {
                    return bad(format!("{} variances for dimension {d}", v.len()));
                }
                if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                    return bad(format!("variance {x} must be positive"));
                }
            }
            Self::Full(m) => {
                if m.nrows() != d || m.ncols() != d {
                    return bad(format!("covariance is {}x{}", m.nrows(), m.ncols()));
                }
                if (m - m.transpose()).amax() > 1e-10 * m.amax().max(1.0) {
                    return bad("covariance not symmetric".into());
                }
                if m.clone().cholesky().is_none() {
                    return bad("covariance not positive definite".into());
                }
            }
        }
        Ok(())
    }
}

/// Mixture parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub weights: DVector<f64>,
    /// `k x d`, one row per component.
    pub means: DMatrix<f64>,
    pub covariances: Vec<Covariance>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CovJson {
    Scalar(Vec<f64>),
    Vector(Vec<Vec<f64>>),
    Matrix(Vec<Vec<Vec<f64>>>),
}

#[derive(Serialize, Deserialize)]
struct ParamsJson {
    kind: CovKind,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: CovJson,
}

impl GmmParams {
    /// Validated constructor.
    pub fn new(
        weights: DVector<f64>,
        means: DMatrix<f64>,
        covariances: Vec<Covariance>,
    ) -> Result<Self> {
        let p = Self {
            weights,
            means,
            covariances,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn kind(&self) -> CovKind {
        self.covariances
            .first()
            .map_or(CovKind::Spherical, Covariance::kind)
    }

    /// Checks the simplex constraint, shapes and positive covariances.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.means.nrows() != k || self.covariances.len() != k {
            return Err(Error::InvalidParams(format!(
                "{k} weights, {} means, {} covariances",
                self.means.nrows(),
                self.covariances.len()
            )));
        }
        if let Some(a) = self.weights.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidParams(format!("weight {a} outside [0, 1]")));
        }
        let s = self.weights.sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParams(format!("weights sum to {s}")));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParams("non-finite mean".into()));
        }
        let kind = self.kind();
        for (i, c) in self.covariances.iter().enumerate() {
            if c.kind() != kind {
                return Err(Error::InvalidParams("mixed covariance kinds".into()));
            }
            c.validate(self.dim(), i)?;
        }
        Ok(())
    }

    /// Sorts components by mean (lexicographic), removing label switching.
    pub fn canonicalize(&mut self) {
        let k = self.k();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| {
            self.means
                .row(i)
                .iter()
                .zip(self.means.row(j).iter())
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        self.weights = DVector::from_iterator(k, order.iter().map(|&i| self.weights[i]));
        self.means = DMatrix::from_rows(
            &order
                .iter()
                .map(|&i| self.means.row(i).into_owned())
                .collect::<Vec<_>>(),
        );
        self.covariances = order.iter().map(|&i| self.covariances[i].clone()).collect();
    }

    /// Length of [`to_vector`](Self::to_vector) for a model shape.
    pub fn vector_len(kind: CovKind, k: usize, d: usize) -> usize {
        let scale = match kind {
            CovKind::Spherical => k,
            CovKind::Diagonal => k * d,
            CovKind::Full => k * d * (d + 1) / 2,
        };
        k * d + scale + k - 1
    }

    /// Flattens to the layout in the module docs.
    pub fn to_vector(&self) -> Point {
        let (k, d) = (self.k(), self.dim());
        let mut v = Vec::with_capacity(Self::vector_len(self.kind(), k, d));
        for i in 0..k {
            v.extend(self.means.row(i).iter());
        }
        for c in &self.covariances {
            match c {
                Covariance::Spherical(s) => v.push(s.sqrt()),
                Covariance::Diagonal(s) => v.extend(s.iter().map(|x| x.sqrt())),
                Covariance::Full(m) => {
                    let l = m.clone().cholesky().expect("validated SPD").l();
                    for r in 0..d {
                        for c in 0..=r {
                            v.push(l[(r, c)]);
                        }
                    }
                }
            }
        }
        v.extend(self.weights.iter().take(k - 1));
        Point::from_vec(v)
    }

    /// Inverse of [`to_vector`](Self::to_vector); rejects points outside the
    /// parameter domain.
    pub fn from_vector(kind: CovKind, k: usize, d: usize, v: &Point) -> Result<Self> {
        let expected = Self::vector_len(kind, k, d);
        if v.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        let means = DMatrix::from_row_slice(k, d, &v.as_slice()[..k * d]);
        let mut at = k * d;
        let mut covariances = Vec::with_capacity(k);
        let positive = |s: f64| {
            if s > 0.0 {
                Ok(s)
            } else {
                Err(Error::InvalidParams(format!("scale {s} must be positive")))
            }
        };
        for _ in 0..k {
            match kind {
                CovKind::Spherical => {
                    covariances.push(Covariance::Spherical(positive(v[at])?.powi(2)));
                    at += 1;
                }
                CovKind::Diagonal => {
                    let mut s = DVector::zeros(d);
                    for l in 0..d {
                        s[l] = positive(v[at + l])?.powi(2);
                    }
                    covariances.push(Covariance::Diagonal(s));
                    at += d;
                }
                CovKind::Full => {
                    let mut l = DMatrix::zeros(d, d);
                    for r in 0..d {
                        for c in 0..=r {
                            l[(r, c)] = v[at];
                            at += 1;
                        }
                        positive(l[(r, r)])?;
                    }
                    covariances.push(Covariance::Full(&l * l.transpose()));
                }
            }
        }
        let mut weights = DVector::zeros(k);
        let mut last = 1.0;
        for i in 0..k - 1 {
            weights[i] = v[at + i];
            last -= v[at + i];
        }
        // absorb rounding from the dependent weight
        if last < 0.0 && last > -1e-12 {
            last = 0.0;
        }
        weights[k - 1] = last;
        Self::new(weights, means, covariances)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let k = self.k();
        let covariances = match self.kind() {
            CovKind::Spherical => CovJson::Scalar(
                self.covariances
                    .iter()
                    .map(|c| match c {
                        Covariance::Spherical(v) => *v,
                        _ => unreachable!("uniform kind"),
                    })
                    .collect(),
            ),
            CovKind::Diagonal => CovJson::Vector(
                self.covariances
                    .iter()
                    .map(|c| c.to_matrix(self.dim()).diagonal().iter().copied().collect())
                    .collect(),
            ),
            CovKind::Full => CovJson::Matrix(
                self.covariances
                    .iter()
                    .map(|c| {
                        let m = c.to_matrix(self.dim());
                        m.row_iter().map(|r| r.iter().copied().collect()).collect()
                    })
                    .collect(),
            ),
        };
        let j = ParamsJson {
            kind: self.kind(),
            weights: self.weights.iter().copied().collect(),
            means: (0..k)
                .map(|i| self.means.row(i).iter().copied().collect())
                .collect(),
            covariances,
        };
        serde_json::to_writer_pretty(out, &j)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let j: ParamsJson = serde_json::from_reader(input)?;
        let k = j.weights.len();
        let d = j.means.first().map_or(0, Vec::len);
        if j.means.iter().any(|m| m.len() != d) {
            return Err(Error::InvalidParams("ragged means".into()));
        }
        let means = DMatrix::from_row_iterator(k, d, j.means.into_iter().flatten());
        let covariances = match (j.kind, j.covariances) {
            (CovKind::Spherical, CovJson::Scalar(v)) => {
                v.into_iter().map(Covariance::Spherical).collect()
            }
            (CovKind::Diagonal, CovJson::Vector(v)) => v
                .into_iter()
                .map(|x| Covariance::Diagonal(DVector::from_vec(x)))
                .collect(),
            (CovKind::Full, CovJson::Matrix(v)) => v
                .into_iter()
                .map(|m| {
                    let n = m.len();
                    Covariance::Full(DMatrix::from_row_iterator(n, n, m.into_iter().flatten()))
                })
                .collect(),
            (kind, _) => {
                return Err(Error::InvalidParams(format!(
                    "covariances do not match kind {kind:?}"
                )))
            }
        };
        Self::new(DVector::from_vec(j.weights), means, covariances)
    }
}

/// Samples as an `n x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParams("empty dataset".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite sample".into()));
        }
        Ok(Self { x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn mean(&self) -> RowDVector<f64> {
        self.x.row_mean()
    }

    /// Biased sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mean();
        let c = DMatrix::from_fn(self.n(), self.dim(), |r, j| self.x[(r, j)] - m[j]);
        c.transpose() * c / self.n() as f64
    }

    /// Mean per-coordinate variance.
    pub fn variance_scale(&self) -> f64 {
        self.covariance().trace() / self.dim() as f64
    }

    /// Reads headerless CSV rows.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidParams(format!("bad number '{f}': {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParams("ragged CSV rows".into()));
        }
        Self::new(DMatrix::from_row_iterator(
            rows.len(),
            d,
            rows.into_iter().flatten(),
        ))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        for r in self.x.row_iter() {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Log-density evaluator for one component.
enum Component {
    Spherical { mean: DVector<f64>, var: f64, c: f64 },
    Diagonal { mean: DVector<f64>, var: DVector<f64>, c: f64 },
    Full { mean: DVector<f64>, l: DMatrix<f64>, c: f64 },
}

impl Component {
    fn new(mean: DVector<f64>, cov: &Covariance) -> Result<Self> {
        let d = mean.len() as f64;
        Ok(match cov {
            Covariance::Spherical(v) => Self::Spherical {
                c: -0.5 * d * (LN_2PI + v.ln()),
                mean,
                var: *v,
            },
            Covariance::Diagonal(v) => Self::Diagonal {
                c: -0.5 * (d * LN_2PI + v.iter().map(|x| x.ln()).sum::<f64>()),
                mean,
                var: v.clone(),
            },
            Covariance::Full(m) => {
                let l = m
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::InvalidParams("covariance not SPD".into()))?
                    .l();
                let logdet = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
                Self::Full {
                    c: -0.5 * (d * LN_2PI + logdet),
                    mean,
                    l,
                }
            }
        })
    }
}

fn components(params: &GmmParams) -> Result<Vec<Component>> {
    (0..params.k())
        .map(|i| Component::new(params.means.row(i).transpose(), &params.covariances[i]))
        .collect()
}

/// `n x k` component log-densities `log p(x_j | theta_i)`.
fn log_density_matrix(params: &GmmParams, data: &Dataset) -> Result<DMatrix<f64>> {
    if data.dim() != params.dim() {
        return Err(Error::Dimension {
            expected: params.dim(),
            got: data.dim(),
        });
    }
    let comps = components(params)?;
    let (n, d) = data.x.shape();
    let mut out = DMatrix::zeros(n, params.k());
    let mut acc = vec![0.0; n];
    for (i, comp) in comps.iter().enumerate() {
        acc.iter_mut().for_each(|v| *v = 0.0);
        let c = match comp {
            Component::Spherical { mean, var, c } => {
                for a in 0..d {
                    let col = data.x.column(a);
                    for (v, x) in acc.iter_mut().zip(col.iter()) {
                        *v += (x - mean[a]).powi(2);
                    }
                }
                acc.iter_mut().for_each(|v| *v /= var);
                *c
            }
            Component::Diagonal { mean, var, c } => {
                for a in 0..d {
                    let col = data.x.column(a);
                    for (v, x) in acc.iter_mut().zip(col.iter()) {
                        *v += (x - mean[a]).powi(2) / var[a];
                    }
                }
                *c
            }
            Component::Full { mean, l, c } => {
                let centred = DMatrix::from_fn(d, n, |a, j| data.x[(j, a)] - mean[a]);
                let z = l
                    .solve_lower_triangular(&centred)
                    .expect("positive Cholesky diagonal");
                for (v, zj) in acc.iter_mut().zip(z.column_iter()) {
                    *v = zj.norm_squared();
                }
                *c
            }
        };
        for (o, v) in out.column_mut(i).iter_mut().zip(acc.iter()) {
            *o = c - 0.5 * v;
        }
    }
    Ok(out)
}

/// Per-sample `log sum_i alpha_i p_ij` with max-exponent factoring, and the
/// weighted log terms.
fn mixture_terms(params: &GmmParams, logp: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (n, k) = logp.shape();
    let log_w: Vec<f64> = params.weights.iter().map(|a| a.ln()).collect();
    let mut terms = DMatrix::zeros(n, k);
    let mut lse = DVector::zeros(n);
    for j in 0..n {
        let mut m = f64::NEG_INFINITY;
        for i in 0..k {
            let t = log_w[i] + logp[(j, i)];
            terms[(j, i)] = t;
            m = m.max(t);
        }
        let s: f64 = (0..k).map(|i| (terms[(j, i)] - m).exp()).sum();
        lse[j] = m + s.ln();
    }
    (lse, terms)
}

/// `sum_j log sum_i alpha_i p(x_j | theta_i)`.
pub fn log_likelihood(params: &GmmParams, data: &Dataset) -> Result<f64> {
    params.validate()?;
    let logp = log_density_matrix(params, data)?;
    Ok(mixture_terms(params, &logp).0.sum())
}

/// Posterior membership probabilities, `n x k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub w: DMatrix<f64>,
}

fn responsibilities_and_ll(params: &GmmParams, data: &Dataset) -> Result<(Responsibilities, f64)> {
    params.validate()?;
    let mut w = log_density_matrix(params, data)?;
    let log_w: Vec<f64> = params.weights.iter().map(|a| a.ln()).collect();
    let (n, k) = w.shape();
    let mut ll = 0.0;
    for j in 0..n {
        let mut m = f64::NEG_INFINITY;
        for (i, lw) in log_w.iter().enumerate() {
            w[(j, i)] += lw;
            m = m.max(w[(j, i)]);
        }
        let mut s = 0.0;
        for i in 0..k {
            let v = (w[(j, i)] - m).exp();
            w[(j, i)] = v;
            s += v;
        }
        for i in 0..k {
            w[(j, i)] /= s;
        }
        ll += m + s.ln();
    }
    Ok((Responsibilities { w }, ll))
}

/// E-step: responsibilities in the log domain, rows renormalized.
pub fn e_step(params: &GmmParams, data: &Dataset) -> Result<Responsibilities> {
    Ok(responsibilities_and_ll(params, data)?.0)
}

/// Variance floor relative to the data's mean per-coordinate variance.
pub const VARIANCE_FLOOR_REL: f64 = 1e-6;

/// Absolute variance floor for `data`.
pub fn variance_floor(data: &Dataset) -> f64 {
    (VARIANCE_FLOOR_REL * data.variance_scale()).max(f64::MIN_POSITIVE)
}

/// Minimum total responsibility of a non-empty component.
pub const EMPTY_COMPONENT_MASS: f64 = 1e-12;

/// M-step with the default variance floor of `data`.
pub fn m_step(resp: &Responsibilities, data: &Dataset, kind: CovKind) -> Result<GmmParams> {
    m_step_smoothed(resp, data, kind, variance_floor(data), &KernelSpec::none())
}

/// M-step on the smoothed surface; the scatter is de-smoothed before the
/// floor is applied. With [`KernelSpec::none`] this is the plain M-step.
pub(crate) fn m_step_smoothed(
    resp: &Responsibilities,
    data: &Dataset,
    kind: CovKind,
    floor: f64,
    kernel: &KernelSpec,
) -> Result<GmmParams> {
    let (n, k) = resp.w.shape();
    if n != data.n() {
        return Err(Error::Dimension {
            expected: data.n(),
            got: n,
        });
    }
    let d = data.dim();
    let mut weights = DVector::zeros(k);
    let mut means = DMatrix::zeros(k, d);
    let mut covariances = Vec::with_capacity(k);
    for i in 0..k {
        let col = resp.w.column(i);
        let mass: f64 = col.sum();
        if !(mass >= EMPTY_COMPONENT_MASS) {
            return Err(Error::EmptyComponent {
                component: i,
                iteration: 0,
            });
        }
        let mu: RowDVector<f64> = (col.transpose() * &data.x) / mass;
        let mut scatter = DMatrix::zeros(d, d);
        let mut r = vec![0.0; d];
        for j in 0..n {
            for (a, ra) in r.iter_mut().enumerate() {
                *ra = data.x[(j, a)] - mu[a];
            }
            let wj = col[j];
            for b in 0..d {
                for a in b..d {
                    scatter[(a, b)] += wj * r[a] * r[b];
                }
            }
        }
        for b in 0..d {
            for a in b + 1..d {
                scatter[(b, a)] = scatter[(a, b)];
            }
        }
        scatter /= mass;
        covariances.push(floor_covariance(
            desmooth_scatter(&scatter, kind, kernel),
            floor,
        ));
        weights[i] = mass / n as f64;
        means.set_row(i, &mu);
    }
    // rows of resp sum to one only up to rounding
    weights /= weights.sum();
    Ok(GmmParams {
        weights,
        means,
        covariances,
    })
}

/// Applies the variance floor: clamps variances, clips full-matrix
/// eigenvalues.
pub(crate) fn floor_covariance(c: Covariance, floor: f64) -> Covariance {
    match c {
        Covariance::Spherical(v) => Covariance::Spherical(v.max(floor)),
        Covariance::Diagonal(v) => Covariance::Diagonal(v.map(|x| x.max(floor))),
        Covariance::Full(m) => {
            let m = (&m + m.transpose()) * 0.5;
            let eig = SymmetricEigen::new(m.clone());
            if eig.eigenvalues.min() >= floor {
                return Covariance::Full(m);
            }
            let lam = eig.eigenvalues.map(|x| x.max(floor));
            let q = &eig.eigenvectors;
            let r = q * DMatrix::from_diagonal(&lam) * q.transpose();
            Covariance::Full((&r + r.transpose()) * 0.5)
        }
    }
}

/// What EM does when a component loses all responsibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyPolicy {
    Error,
    /// Move the component onto the worst-explained sample with the data
    /// covariance and weight `1/n`. Breaks monotonicity at that iteration.
    Reseed,
}

/// EM settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Stop when `|L_t - L_{t-1}| < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub empty: EmptyPolicy,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
            empty: EmptyPolicy::Error,
        }
    }
}

/// Result of [`em_fit`].
#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: GmmParams,
    /// Log-likelihood of the start and after each iteration.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EmFit {
    pub fn log_likelihood(&self) -> f64 {
        *self.trajectory.last().expect("non-empty trajectory")
    }
}

/// Alternates E- and M-steps from `params0`.
pub fn em_fit(params0: &GmmParams, data: &Dataset, cfg: &EmConfig) -> Result<EmFit> {
    em_core(params0, data, cfg, &KernelSpec::none(), variance_floor(data))
}

/// EM loop on the surface smoothed by `kernel`; the trajectory records the
/// smoothed log-likelihood.
pub(crate) fn em_core(
    params0: &GmmParams,
    data: &Dataset,
    cfg: &EmConfig,
    kernel: &KernelSpec,
    floor: f64,
) -> Result<EmFit> {
    if !(cfg.tol > 0.0) {
        return Err(Error::Config("EM tol must be positive".into()));
    }
    let kind = params0.kind();
    let mut params = params0.clone();
    let (mut resp, mut ll) = responsibilities_and_ll(&kernel.smooth_params(&params)?, data)?;
    let mut trajectory = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        params = match m_step_smoothed(&resp, data, kind, floor, kernel) {
            Ok(p) => p,
            Err(Error::EmptyComponent { component, .. }) if cfg.empty == EmptyPolicy::Reseed => {
                warn!("EM iteration {it}: component {component} empty, reseeding");
                reseed(&params, &resp, data, component, floor, kernel)?
            }
            Err(Error::EmptyComponent { component, .. }) => {
                return Err(Error::EmptyComponent {
                    component,
                    iteration: it,
                })
            }
            Err(e) => return Err(e),
        };
        let (r, next) = responsibilities_and_ll(&kernel.smooth_params(&params)?, data)?;
        resp = r;
        trajectory.push(next);
        if (next - ll).abs() < cfg.tol {
            converged = true;
            break;
        }
        ll = next;
    }
    debug!("EM stopped after {iterations} iterations, L = {ll}");
    Ok(EmFit {
        params,
        trajectory,
        iterations,
        converged,
    })
}

fn reseed(
    prev: &GmmParams,
    resp: &Responsibilities,
    data: &Dataset,
    component: usize,
    floor: f64,
    kernel: &KernelSpec,
) -> Result<GmmParams> {
    let logp = log_density_matrix(&kernel.smooth_params(prev)?, data)?;
    let (lse, _) = mixture_terms(prev, &logp);
    let worst = lse.argmin().0;
    let mut w = resp.w.clone();
    w.row_mut(worst).fill(0.0);
    w[(worst, component)] = 1.0;
    let mut p = m_step_smoothed(&Responsibilities { w }, data, prev.kind(), floor, kernel)?;
    let cov = data.covariance();
    p.covariances[component] = floor_covariance(
        match prev.kind() {
            CovKind::Spherical => Covariance::Spherical(cov.trace() / data.dim() as f64),
            CovKind::Diagonal => Covariance::Diagonal(cov.diagonal()),
            CovKind::Full => Covariance::Full(cov),
        },
        floor,
    );
    Ok(p)
}

/// Analytic gradient of `-log_likelihood` in the [`GmmParams::to_vector`]
/// layout. The weight partials use `p_ij / sum_m alpha_m p_mj`, which stays
/// bounded as any `alpha` reaches 0 or 1.
pub fn nll_gradient(params: &GmmParams, data: &Dataset) -> Result<Point> {
    params.validate()?;
    let (k, d, n) = (params.k(), params.dim(), data.n());
    let logp = log_density_matrix(params, data)?;
    let (lse, _) = mixture_terms(params, &logp);
    let kind = params.kind();
    let mut g = Point::zeros(GmmParams::vector_len(kind, k, d));
    // ratio[j, i] = p_ij / mixture_j ; responsibility = alpha_i * ratio
    let ratio = DMatrix::from_fn(n, k, |j, i| (logp[(j, i)] - lse[j]).exp());
    let scale_base = k * d;
    let mut scale_at = scale_base;
    for i in 0..k {
        let mu = params.means.row(i).transpose();
        let a = params.weights[i];
        match &params.covariances[i] {
            Covariance::Spherical(v) => {
                let s = v.sqrt();
                let mut gs = 0.0;
                for j in 0..n {
                    let w = a * ratio[(j, i)];
                    let r = data.x.row(j).transpose() - &mu;
                    for l in 0..d {
                        g[i * d + l] -= w * r[l] / v;
                    }
                    gs -= w * (r.norm_squared() / (v * s) - d as f64 / s);
                }
                g[scale_at] = gs;
                scale_at += 1;
            }
            Covariance::Diagonal(v) => {
                for j in 0..n {
                    let w = a * ratio[(j, i)];
                    for l in 0..d {
                        let r = data.x[(j, l)] - mu[l];
                        let s = v[l].sqrt();
                        g[i * d + l] -= w * r / v[l];
                        g[scale_at + l] -= w * (r * r / (v[l] * s) - 1.0 / s);
                    }
                }
                scale_at += d;
            }
            Covariance::Full(m) => {
                let l = m.clone().cholesky().expect("validated SPD").l();
                let inv_diag = l.diagonal().map(|x| 1.0 / x);
                let mut gl = DMatrix::<f64>::zeros(d, d);
                for j in 0..n {
                    let w = a * ratio[(j, i)];
                    let r = data.x.row(j).transpose() - &mu;
                    let z = l.solve_lower_triangular(&r).expect("positive diagonal");
                    let y = l
                        .transpose()
                        .solve_upper_triangular(&z)
                        .expect("positive diagonal");
                    for q in 0..d {
                        g[i * d + q] -= w * y[q];
                    }
                    // d log p / dL = L^{-T} z z^T - diag(1/L_qq)
                    gl -= (&y * z.transpose() - DMatrix::from_diagonal(&inv_diag)) * w;
                }
                for r in 0..d {
                    for c in 0..=r {
                        g[scale_at] = gl[(r, c)];
                        scale_at += 1;
                    }
                }
            }
        }
    }
    for i in 0..k - 1 {
        g[scale_at + i] = -(0..n)
            .map(|j| ratio[(j, i)] - ratio[(j, k - 1)])
            .sum::<f64>();
    }
    Ok(g)
}

/// `-log_likelihood` over the flattened parameter vector.
///
/// Points outside the parameter domain are [`Error::InvalidParams`]. The
/// dedup distance is Euclidean over means, log scales (log Cholesky diagonal
/// for full covariances) and logit weights.
pub struct GmmObjective<'a> {
    pub data: &'a Dataset,
    pub kind: CovKind,
    pub k: usize,
}

impl<'a> GmmObjective<'a> {
    pub fn new(data: &'a Dataset, kind: CovKind, k: usize) -> Self {
        Self { data, kind, k }
    }

    pub fn params(&self, x: &Point) -> Result<GmmParams> {
        GmmParams::from_vector(self.kind, self.k, self.data.dim(), x)
    }

    fn metric_coords(&self, x: &Point) -> Vec<f64> {
        let (k, d) = (self.k, self.data.dim());
        let mut out: Vec<f64> = x.iter().take(k * d).copied().collect();
        let mut at = k * d;
        for _ in 0..k {
            match self.kind {
                CovKind::Spherical => {
                    out.push(x[at].abs().max(1e-300).ln());
                    at += 1;
                }
                CovKind::Diagonal => {
                    out.extend((0..d).map(|l| x[at + l].abs().max(1e-300).ln()));
                    at += d;
                }
                CovKind::Full => {
                    for r in 0..d {
                        for c in 0..=r {
                            let v = x[at];
                            out.push(if r == c { v.abs().max(1e-300).ln() } else { v });
                            at += 1;
                        }
                    }
                }
            }
        }
        let logit = |a: f64| {
            let a = a.clamp(1e-12, 1.0 - 1e-12);
            (a / (1.0 - a)).ln()
        };
        let mut last = 1.0;
        for i in 0..k - 1 {
            out.push(logit(x[at + i]));
            last -= x[at + i];
        }
        out.push(logit(last));
        out
    }
}

impl Objective for GmmObjective<'_> {
    fn dim(&self) -> usize {
        GmmParams::vector_len(self.kind, self.k, self.data.dim())
    }

    fn value(&self, x: &Point) -> Result<f64> {
        Ok(-log_likelihood(&self.params(x)?, self.data)?)
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        nll_gradient(&self.params(x)?, self.data)
    }

    fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.metric_coords(a)
            .iter()
            .zip(self.metric_coords(b))
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// EM as a [`LocalSolver`] over flattened parameters. Outputs are
/// canonicalized so that label-switched copies coincide.
pub struct EmSolver<'a> {
    pub objective: &'a GmmObjective<'a>,
    pub cfg: EmConfig,
}

impl LocalSolver for EmSolver<'_> {
    fn refine(&self, x0: &Point) -> Result<Refined> {
        self.refine_capped(x0, None)
    }

    fn refine_capped(&self, x0: &Point, max_iter: Option<usize>) -> Result<Refined> {
        let p0 = self.objective.params(x0)?;
        let mut cfg = self.cfg;
        if let Some(cap) = max_iter {
            cfg.max_iter = cap;
        }
        Ok(refined(&em_fit(&p0, self.objective.data, &cfg)?))
    }
}

/// Canonicalized EM end point as a tier-search solution.
fn refined(fit: &EmFit) -> Refined {
    let mut params = fit.params.clone();
    params.canonicalize();
    Refined {
        point: params.to_vector(),
        value: -fit.log_likelihood(),
        iterations: fit.iterations,
        converged: fit.converged,
        curvature: None,
        step_hint: None,
    }
}

/// Output of [`tt_em`].
#[derive(Debug, Clone)]
pub struct TtEmResult {
    pub params: GmmParams,
    pub log_likelihood: f64,
    /// Log-likelihood of plain EM from the same start (tier 0).
    pub em_log_likelihood: f64,
    pub solutions: SolutionSet,
}

/// Tier search on `-log_likelihood` with EM as the local solver.
pub fn tt_em(
    params0: &GmmParams,
    data: &Dataset,
    em_cfg: &EmConfig,
    tier_cfg: &TierConfig,
) -> Result<TtEmResult> {
    let obj = GmmObjective::new(data, params0.kind(), params0.k());
    let solver = EmSolver {
        objective: &obj,
        cfg: *em_cfg,
    };
    // the root comes from the exact start; a vector round trip perturbs the weights
    let root = refined(&em_fit(params0, data, em_cfg)?);
    let set = tier_search_from(&obj, root, &solver, tier_cfg)?;
    let root = set
        .solutions
        .iter()
        .find(|s| s.tier == 0)
        .expect("tier search stores the root");
    let best = set.best().expect("non-empty set");
    Ok(TtEmResult {
        params: obj.params(&best.point)?,
        log_likelihood: -best.value,
        em_log_likelihood: -root.value,
        solutions: set,
    })
}

/// Bundled synthetic mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticId {
    Spherical5,
    Elliptical3,
    Overlap4,
}

impl FromStr for SyntheticId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spherical5" => Ok(Self::Spherical5),
            "elliptical3" => Ok(Self::Elliptical3),
            "overlap4" => Ok(Self::Overlap4),
            _ => Err(Error::Config(format!("unknown dataset '{s}'"))),
        }
    }
}

impl SyntheticId {
    pub fn default_n(self) -> usize {
        match self {
            Self::Spherical5 => 40,
            Self::Elliptical3 => 900,
            Self::Overlap4 => 1000,
        }
    }

    /// The generating mixture.
    pub fn true_params(self) -> GmmParams {
        let uniform = |k: usize| DVector::from_element(k, 1.0 / k as f64);
        let (weights, means, covariances) = match self {
            Self::Spherical5 => (
                uniform(5),
                DMatrix::from_row_slice(
                    5,
                    2,
                    &[0.3, 0.3, 0.5, 0.5, 0.7, 0.7, 0.3, 0.7, 0.7, 0.3],
                ),
                vec![Covariance::Spherical(1e-4); 5],
            ),
            Self::Elliptical3 => (
                uniform(3),
                DMatrix::from_row_slice(3, 2, &[0.0, -2.0, 0.0, 0.0, 0.0, 2.0]),
                vec![Covariance::Diagonal(DVector::from_vec(vec![2.0, 0.2])); 3],
            ),
            Self::Overlap4 => (
                DVector::from_vec(vec![0.3, 0.3, 0.3, 0.1]),
                DMatrix::from_row_slice(4, 2, &[-4.0, -4.0, -4.0, -4.0, 2.0, 2.0, -1.0, -6.0]),
                [
                    [1.0, 0.5, 0.5, 1.0],
                    [6.0, -2.0, -2.0, 6.0],
                    [2.0, -1.0, -1.0, 2.0],
                    [0.125, 0.0, 0.0, 0.125],
                ]
                .iter()
                .map(|m| Covariance::Full(DMatrix::from_row_slice(2, 2, m)))
                .collect(),
            ),
        };
        GmmParams {
            weights,
            means,
            covariances,
        }
    }

    pub fn kind(self) -> CovKind {
        self.true_params().kind()
    }
}

/// Samples with their generating component labels.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: Dataset,
    pub truth: GmmParams,
    pub labels: Vec<usize>,
}

/// Draws `n` samples (default size when `None`) from a bundled mixture.
pub fn gen_synthetic(id: SyntheticId, n: Option<usize>, seed: u64) -> Synthetic {
    let truth = id.true_params();
    let n = n.unwrap_or(id.default_n());
    let d = truth.dim();
    let chol: Vec<DMatrix<f64>> = truth
        .covariances
        .iter()
        .map(|c| c.to_matrix(d).cholesky().expect("SPD").l())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut comp = truth.k() - 1;
        for (i, a) in truth.weights.iter().enumerate() {
            acc += a;
            if u < acc {
                comp = i;
                break;
            }
        }
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let s = truth.means.row(comp).transpose() + &chol[comp] * z;
        x.set_row(j, &s.transpose());
        labels.push(comp);
    }
    Synthetic {
        data: Dataset { x },
        truth,
        labels,
    }
}

/// Random start: means at `k` distinct samples, every covariance equal to
/// the data covariance (in `kind`'s form), uniform weights.
pub fn random_start<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    kind: CovKind,
    rng: &mut R,
) -> Result<GmmParams> {
    if k == 0 || k > data.n() {
        return Err(Error::InvalidParams(format!(
            "cannot draw {k} components from {} samples",
            data.n()
        )));
    }
    let idx = sample_indices(rng, data.n(), k);
    let means = DMatrix::from_rows(&idx.iter().map(|j| data.x.row(j).into_owned()).collect::<Vec<_>>());
    let cov = data.covariance();
    let c = match kind {
        CovKind::Spherical => Covariance::Spherical(cov.trace() / data.dim() as f64),
        CovKind::Diagonal => Covariance::Diagonal(cov.diagonal()),
        CovKind::Full => Covariance::Full(cov),
    };
    let c = floor_covariance(c, variance_floor(data));
    GmmParams::new(
        DVector::from_element(k, 1.0 / k as f64),
        means,
        vec![c; k],
    )
}
