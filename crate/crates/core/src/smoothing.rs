//! Gaussian-kernel smoothing of the mixture likelihood.
//!
//! Convolving a Gaussian component with a zero-mean Gaussian kernel gives a
//! Gaussian with the same mean and an inflated covariance. Applying this to
//! every component (weights untouched) yields a family of smoother
//! likelihood surfaces. EM on a smoothed surface, traced level by level down
//! to the original surface, is the smoothing hierarchy.

use std::io::Write;

use log::debug;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::Objective;
use crate::error::{Error, Result};
use crate::gmm::{
    em_core, log_likelihood, random_start, variance_floor, CovKind, Covariance, Dataset, EmConfig,
    EmFit, GmmObjective, GmmParams,
};

/// How the kernel width relates to each component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// Fixed kernel standard deviation `sigma0`: `var + sigma0^2`.
    Additive,
    /// Kernel proportional to each component: `var * (1 + s^2)`.
    Multiplicative,
}

/// Smoothing kernel; `level` is `sigma0` (additive) or `s` (multiplicative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub mode: KernelMode,
    pub level: f64,
}

impl KernelSpec {
    /// The identity kernel.
    pub fn none() -> Self {
        Self {
            mode: KernelMode::Additive,
            level: 0.0,
        }
    }

    pub fn additive(sigma0: f64) -> Self {
        Self {
            mode: KernelMode::Additive,
            level: sigma0,
        }
    }

    pub fn multiplicative(s: f64) -> Self {
        Self {
            mode: KernelMode::Multiplicative,
            level: s,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return Err(Error::Config(format!(
                "kernel level must be nonnegative, got {}",
                self.level
            )));
        }
        Ok(())
    }

    /// Every component convolved with the kernel.
    pub fn smooth_params(&self, params: &GmmParams) -> Result<GmmParams> {
        let covariances = params
            .covariances
            .iter()
            .map(|c| convolve_component(c, self))
            .collect::<Result<Vec<_>>>()?;
        Ok(GmmParams {
            weights: params.weights.clone(),
            means: params.means.clone(),
            covariances,
        })
    }
}

/// Covariance of a component convolved with the kernel; the mean is
/// unchanged.
pub fn convolve_component(cov: &Covariance, kernel: &KernelSpec) -> Result<Covariance> {
    kernel.validate()?;
    let l2 = kernel.level * kernel.level;
    Ok(match (kernel.mode, cov) {
        (KernelMode::Additive, Covariance::Spherical(v)) => Covariance::Spherical(v + l2),
        (KernelMode::Additive, Covariance::Diagonal(v)) => Covariance::Diagonal(v.map(|x| x + l2)),
        (KernelMode::Additive, Covariance::Full(m)) => {
            let mut m = m.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += l2;
            }
            Covariance::Full(m)
        }
        (KernelMode::Multiplicative, Covariance::Spherical(v)) => {
            Covariance::Spherical(v * (1.0 + l2))
        }
        (KernelMode::Multiplicative, Covariance::Diagonal(v)) => {
            Covariance::Diagonal(v * (1.0 + l2))
        }
        (KernelMode::Multiplicative, Covariance::Full(m)) => Covariance::Full(m * (1.0 + l2)),
    })
}

/// Maps a weighted scatter matrix (the smoothed-variance estimate) back to
/// the original space; the caller applies the variance floor.
pub(crate) fn desmooth_scatter(s: &DMatrix<f64>, kind: CovKind, kernel: &KernelSpec) -> Covariance {
    let d = s.nrows();
    let l2 = kernel.level * kernel.level;
    let (sub, div) = match kernel.mode {
        KernelMode::Additive => (l2, 1.0),
        KernelMode::Multiplicative => (0.0, 1.0 + l2),
    };
    let out = match kind {
        CovKind::Spherical => Covariance::Spherical((s.trace() / d as f64 - sub) / div),
        CovKind::Diagonal => Covariance::Diagonal(s.diagonal().map(|x| (x - sub) / div)),
        CovKind::Full => {
            let mut m = s.clone();
            for i in 0..d {
                m[(i, i)] -= sub;
            }
            Covariance::Full(m / div)
        }
    };
    if kernel.level > 0.0 && out.min_variance() <= 0.0 {
        debug!("de-smoothed variance nonpositive at level {}; floor applies", kernel.level);
    }
    out
}

/// Log-likelihood with every component convolved.
pub fn smoothed_log_likelihood(
    params: &GmmParams,
    data: &Dataset,
    kernel: &KernelSpec,
) -> Result<f64> {
    log_likelihood(&kernel.smooth_params(params)?, data)
}

/// EM on the smoothed surface. Returned params are de-smoothed (original
/// space) and the trajectory holds smoothed log-likelihoods.
pub fn smoothed_em(
    params0: &GmmParams,
    data: &Dataset,
    kernel: &KernelSpec,
    cfg: &EmConfig,
) -> Result<EmFit> {
    kernel.validate()?;
    em_core(params0, data, cfg, kernel, variance_floor(data))
}

/// Levels and tracked solutions of the smoothing hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hierarchy {
    /// Number of level decrements from the top surface to the original.
    pub nl: usize,
    /// Top smoothing level, in data standard deviations for additive mode.
    pub sfac: f64,
    /// Solutions traced through the levels.
    pub ns: usize,
    pub mode: KernelMode,
}

impl Default for Hierarchy {
    fn default() -> Self {
        Self {
            nl: 2,
            sfac: 1.0,
            ns: 3,
            mode: KernelMode::Multiplicative,
        }
    }
}

impl Hierarchy {
    fn validate(&self) -> Result<()> {
        if self.nl == 0 || self.ns == 0 || !(self.sfac >= 0.0) {
            return Err(Error::Config("hierarchy needs nl >= 1, ns >= 1, sfac >= 0".into()));
        }
        Ok(())
    }

    /// Kernels from the top level down to the original surface (`nl + 1`).
    pub fn kernels(&self, data: &Dataset) -> Vec<KernelSpec> {
        let unit = match self.mode {
            KernelMode::Additive => data.variance_scale().sqrt(),
            KernelMode::Multiplicative => 1.0,
        };
        (0..=self.nl)
            .map(|t| KernelSpec {
                mode: self.mode,
                level: unit * self.sfac * (self.nl - t) as f64 / self.nl as f64,
            })
            .collect()
    }
}

/// One solution traced through the hierarchy.
#[derive(Debug, Clone)]
pub struct HierarchyTrace {
    /// Smoothed log-likelihood after EM at each level (top first).
    pub level_log_likelihoods: Vec<f64>,
    pub params: GmmParams,
    /// Log-likelihood on the original surface.
    pub log_likelihood: f64,
}

/// Output of [`smooth_em_hierarchy`].
#[derive(Debug, Clone)]
pub struct HierarchyResult {
    pub levels: Vec<KernelSpec>,
    pub traces: Vec<HierarchyTrace>,
    pub best: usize,
}

impl HierarchyResult {
    pub fn best(&self) -> &HierarchyTrace {
        &self.traces[self.best]
    }
}

/// Smoothing hierarchy: smoothed EM from every global start on the top
/// surface, keep the `ns` best, trace each down to the original surface and
/// return the best there.
pub fn smooth_em_hierarchy(
    data: &Dataset,
    h: &Hierarchy,
    cfg: &EmConfig,
    global_starts: &[GmmParams],
) -> Result<HierarchyResult> {
    h.validate()?;
    if global_starts.is_empty() {
        return Err(Error::Config("hierarchy needs at least one global start".into()));
    }
    let levels = h.kernels(data);
    let top = levels[0];
    let mut ranked: Vec<(f64, GmmParams)> = global_starts
        .iter()
        .filter_map(|p| match smoothed_em(p, data, &top, cfg) {
            Ok(fit) => Some((fit.log_likelihood(), fit.params)),
            Err(e) => {
                debug!("global start dropped: {e}");
                None
            }
        })
        .collect();
    if ranked.is_empty() {
        return Err(Error::Config("every global start failed on the top level".into()));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    ranked.truncate(h.ns);
    let mut traces = Vec::with_capacity(ranked.len());
    for (top_ll, mut params) in ranked {
        let mut lls = vec![top_ll];
        for kernel in &levels[1..] {
            let fit = smoothed_em(&params, data, kernel, cfg)?;
            lls.push(fit.log_likelihood());
            params = fit.params;
        }
        let ll = log_likelihood(&params, data)?;
        traces.push(HierarchyTrace {
            level_log_likelihoods: lls,
            params,
            log_likelihood: ll,
        });
    }
    let best = traces
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.log_likelihood.total_cmp(&b.1.log_likelihood))
        .map(|(i, _)| i)
        .expect("non-empty");
    Ok(HierarchyResult {
        levels,
        traces,
        best,
    })
}

/// Census dedup tolerance in the mixture parameter metric.
pub const CENSUS_DEDUP_TOL: f64 = 1e-2;

/// Number of distinct end points of smoothed EM from `n_starts` seeded
/// random starts, deduplicated in the mixture parameter metric.
#[allow(clippy::too_many_arguments)]
pub fn count_local_maxima(
    data: &Dataset,
    k: usize,
    kind: CovKind,
    n_starts: usize,
    kernel: &KernelSpec,
    cfg: &EmConfig,
    dedup_tol: f64,
    seed: u64,
) -> Result<usize> {
    if n_starts == 0 {
        return Err(Error::Config("n_starts must be positive".into()));
    }
    kernel.validate()?;
    let ends: Vec<Option<GmmParams>> = (0..n_starts as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let p0 = random_start(data, k, kind, &mut rng).ok()?;
            match smoothed_em(&p0, data, kernel, cfg) {
                Ok(fit) => {
                    let mut p = fit.params;
                    p.canonicalize();
                    Some(p)
                }
                Err(e) => {
                    debug!("census start {i} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let obj = GmmObjective::new(data, kind, k);
    let mut unique: Vec<nalgebra::DVector<f64>> = Vec::new();
    for p in ends.into_iter().flatten() {
        let v = p.to_vector();
        if !unique.iter().any(|u| obj.distance(u, &v) < dedup_tol) {
            unique.push(v);
        }
    }
    Ok(unique.len())
}

/// One census row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub level: f64,
    pub unique_maxima_count: usize,
}

/// Writes `level,unique_maxima_count` rows with a header.
pub fn write_census_csv<W: Write>(rows: &[CensusRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::{em_fit, gen_synthetic, SyntheticId};
    use nalgebra::{DMatrix, DVector};

    fn normal_pdf(x: f64, var: f64) -> f64 {
        (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    #[test]
    fn level_zero_is_identity() {
        let c = Covariance::Diagonal(DVector::from_vec(vec![2.0, 0.2]));
        for k in [KernelSpec::additive(0.0), KernelSpec::multiplicative(0.0)] {
            assert_eq!(convolve_component(&c, &k).unwrap(), c);
        }
    }

    #[test]
    fn additive_variances_add() {
        let c = convolve_component(&Covariance::Spherical(1.0), &KernelSpec::additive(1.0)).unwrap();
        assert_eq!(c, Covariance::Spherical(2.0));
        let c = convolve_component(&Covariance::Spherical(1.0), &KernelSpec::multiplicative(2.0))
            .unwrap();
        assert_eq!(c, Covariance::Spherical(5.0));
    }

    #[test]
    fn negative_level_rejected() {
        assert!(convolve_component(&Covariance::Spherical(1.0), &KernelSpec::additive(-0.1)).is_err());
    }

    #[test]
    fn convolution_matches_trapezoid_oracle() {
        // (g_sigma * k_sigma0)(x) by trapezoid quadrature on [-12, 12]
        let (var, s0) = (0.7, 0.9);
        let c = convolve_component(&Covariance::Spherical(var), &KernelSpec::additive(s0)).unwrap();
        let Covariance::Spherical(v_tilde) = c else { unreachable!() };
        let h = 1e-3;
        let n = (24.0 / h) as usize;
        let mut worst: f64 = 0.0;
        for i in 0..=80 {
            let x = -4.0 + 0.1 * i as f64;
            let mut acc = 0.0;
            for j in 0..=n {
                let t = -12.0 + j as f64 * h;
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                acc += w * normal_pdf(x - t, var) * normal_pdf(t, s0 * s0);
            }
            worst = worst.max((acc * h - normal_pdf(x, v_tilde)).abs());
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn smoothed_ll_level_zero_equals_ll() {
        let s = gen_synthetic(SyntheticId::Elliptical3, Some(200), 1);
        let a = smoothed_log_likelihood(&s.truth, &s.data, &KernelSpec::none()).unwrap();
        assert_eq!(a, log_likelihood(&s.truth, &s.data).unwrap());
    }

    #[test]
    fn smoothed_em_level_zero_matches_em_fit() {
        let s = gen_synthetic(SyntheticId::Spherical5, None, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p0 = random_start(&s.data, 5, CovKind::Spherical, &mut rng).unwrap();
        let cfg = EmConfig::default();
        let a = em_fit(&p0, &s.data, &cfg).unwrap();
        let b = smoothed_em(&p0, &s.data, &KernelSpec::multiplicative(0.0), &cfg).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn full_additive_adds_identity() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let c = convolve_component(&Covariance::Full(m), &KernelSpec::additive(0.5)).unwrap();
        assert_eq!(
            c,
            Covariance::Full(DMatrix::from_row_slice(2, 2, &[2.25, -1.0, -1.0, 2.25]))
        );
    }

    #[test]
    fn degenerate_hierarchy_is_multistart_em() {
        let s = gen_synthetic(SyntheticId::Elliptical3, Some(300), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let starts: Vec<_> = (0..4)
            .map(|_| random_start(&s.data, 3, CovKind::Diagonal, &mut rng).unwrap())
            .collect();
        let cfg = EmConfig::default();
        let h = Hierarchy {
            nl: 1,
            sfac: 0.0,
            ns: 2,
            mode: KernelMode::Additive,
        };
        let r = smooth_em_hierarchy(&s.data, &h, &cfg, &starts).unwrap();
        assert_eq!(r.traces.len(), 2);
        let best_multistart = starts
            .iter()
            .map(|p| em_fit(p, &s.data, &cfg).unwrap().log_likelihood())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((r.best().log_likelihood - best_multistart).abs() < 1e-5);
    }

    #[test]
    fn single_start_census_is_one() {
        let s = gen_synthetic(SyntheticId::Spherical5, None, 0);
        let n = count_local_maxima(
            &s.data,
            5,
            CovKind::Spherical,
            1,
            &KernelSpec::none(),
            &EmConfig::default(),
            CENSUS_DEDUP_TOL,
            7,
        )
        .unwrap();
        assert_eq!(n, 1);
    }
}
