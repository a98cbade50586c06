//! Reproducible experiment drivers.
//!
//! Every driver takes a fully resolved config and returns a [`RunOutput`]:
//! named files (always `config-echo.json` and `summary.json`, plus CSV
//! artifacts) held in memory. The output depends only on the config, so
//! two runs with the same config are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{classify_critical, CriticalKind, Objective, Point};
use crate::error::{Error, Result};
use crate::evo::{ea_run, EvoConfig, EvoVariant, MultiWell};
use crate::gmm::{
    em_fit, gen_synthetic, random_start, tt_em, CovKind, Dataset, EmConfig, GmmParams,
    SyntheticId,
};
use crate::mlp::{
    kfold_eval, lm_train, lm_trainer, nguyen_widrow_init, tt_train, tt_trainer, two_moons,
    xor_data, LabeledData, MlpArch, TtTrainConfig,
};
use crate::saddle::{locate_ddp, locate_ddp_perturbed, symmetric_ddp, SaddleConfig, SaddleResult};
use crate::smoothing::{
    count_local_maxima, smooth_em_hierarchy, write_census_csv, CensusRow, Hierarchy, KernelMode,
    KernelSpec, CENSUS_DEDUP_TOL,
};
use crate::solvers::{minimize_lbfgs, newton_critical, LbfgsConfig, LmConfig};
use crate::surfaces::{
    reference as r, Eckhardt, Leps, Lj3Reduced, MorseSlab, MullerBrown, SlabConfig,
};
use crate::tiersearch::{LbfgsSolver, SolutionSet, TierConfig};

/// Files produced by one run, keyed by file name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOutput {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl RunOutput {
    fn new<C: Serialize>(config: &C) -> Result<Self> {
        let mut out = Self::default();
        out.put_json("config-echo.json", config)?;
        Ok(out)
    }

    fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.files.insert(name.into(), bytes);
        Ok(())
    }

    fn put_csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut bytes = Vec::new();
        write(&mut bytes)?;
        self.files.insert(name.into(), bytes);
        Ok(())
    }

    fn put_rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        self.put_csv(name, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
            Ok(())
        })
    }

    /// Parsed `summary.json`.
    pub fn summary(&self) -> Result<serde_json::Value> {
        let bytes = self
            .files
            .get("summary.json")
            .ok_or_else(|| Error::Config("run produced no summary".into()))?;
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

/// Mean, population standard deviation and extremes of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: values.len(),
        }
    }
}

fn points(v: &[f64]) -> Point {
    Point::from_column_slice(v)
}

// ---------------------------------------------------------------- saddle

/// Named minima pairs for the saddle runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SaddlePreset {
    #[serde(rename = "mb-AB")]
    MullerBrownAB,
    #[serde(rename = "mb-BC")]
    MullerBrownBC,
    #[serde(rename = "eckhardt-AB")]
    EckhardtAB,
    #[serde(rename = "lj3")]
    Lj3,
    #[serde(rename = "leps")]
    Leps,
    #[serde(rename = "heptamer")]
    Heptamer,
}

impl SaddlePreset {
    pub const ALL: [Self; 6] = [
        Self::MullerBrownAB,
        Self::MullerBrownBC,
        Self::EckhardtAB,
        Self::Lj3,
        Self::Leps,
        Self::Heptamer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MullerBrownAB => "mb-AB",
            Self::MullerBrownBC => "mb-BC",
            Self::EckhardtAB => "eckhardt-AB",
            Self::Lj3 => "lj3",
            Self::Leps => "leps",
            Self::Heptamer => "heptamer",
        }
    }

    /// Pipeline settings tuned for the preset's surface.
    pub fn default_config(self) -> SaddleConfig {
        match self {
            Self::MullerBrownAB | Self::MullerBrownBC => SaddleConfig::default(),
            Self::EckhardtAB => SaddleConfig {
                dt: 1e-2,
                ..SaddleConfig::default()
            },
            Self::Lj3 => SaddleConfig {
                dt: 1e-6,
                critical_tol: 1e-8,
                ..SaddleConfig::default()
            },
            Self::Leps => SaddleConfig {
                dt: 1e-3,
                ..SaddleConfig::default()
            },
            Self::Heptamer => SaddleConfig {
                dt: 0.03,
                intsteps: 3,
                smallstep: 10,
                max_hops: 200,
                ..SaddleConfig::default()
            },
        }
    }
}

impl FromStr for SaddlePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|p| p.name()).collect();
                Error::Config(format!("unknown saddle preset {s:?}; expected one of {names:?}"))
            })
    }
}

/// Saddle-search experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleExperiment {
    pub preset: SaddlePreset,
    /// Replaces the preset's pipeline settings.
    #[serde(default)]
    pub saddle: Option<SaddleConfig>,
    /// Perturbation for sources on the exit segment (Eckhardt).
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Euler step cap for the symmetric integration (LJ3).
    #[serde(default = "default_symmetric_steps")]
    pub symmetric_max_steps: usize,
}

fn default_delta() -> f64 {
    1e-2
}

fn default_symmetric_steps() -> usize {
    2_000_000
}

impl SaddleExperiment {
    pub fn new(preset: SaddlePreset) -> Self {
        Self {
            preset,
            saddle: None,
            delta: default_delta(),
            symmetric_max_steps: default_symmetric_steps(),
        }
    }
}

/// A minimum handed to the saddle search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    #[serde(with = "crate::dynsys::point_serde")]
    pub point: Point,
    pub energy: f64,
}

/// One located saddle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleRecord {
    #[serde(with = "crate::dynsys::point_serde")]
    pub exit_point: Point,
    #[serde(with = "crate::dynsys::point_serde::option")]
    pub mgp: Option<Point>,
    pub mgp_grad_norm: Option<f64>,
    #[serde(with = "crate::dynsys::point_serde")]
    pub ddp: Point,
    pub ddp_energy: f64,
    pub kind: CriticalKind,
    pub negative_eigenvalues: usize,
    pub force_evals: usize,
    pub energy_evals: usize,
}

impl SaddleRecord {
    fn from_result(r: &SaddleResult) -> Self {
        Self {
            exit_point: r.exit_point.clone(),
            mgp: Some(r.mgp.clone()),
            mgp_grad_norm: Some(r.mgp_grad_norm),
            ddp: r.ddp.clone(),
            ddp_energy: r.ddp_energy,
            kind: r.ddp_class.kind,
            negative_eigenvalues: r.ddp_class.negative_eigenvalues,
            force_evals: r.force_evals,
            energy_evals: r.energy_evals,
        }
    }
}

/// `summary.json` of a saddle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSummary {
    pub preset: SaddlePreset,
    pub dim: usize,
    pub minima: [Endpoint; 2],
    /// Classification of the exit point when it is itself critical.
    pub exit_kind: Option<CriticalKind>,
    pub saddles: Vec<SaddleRecord>,
}

/// Relaxed heptamer minima: the island in fcc hollows and the whole island
/// shifted into the adjacent hcp hollows.
pub fn heptamer_minima(slab: &MorseSlab) -> Result<(Point, Point)> {
    let cfg = LbfgsConfig {
        grad_tol: 1e-4,
        memory: 20,
        max_iter: 20_000,
    };
    let a = minimize_lbfgs(slab, &slab.initial_point(), &cfg)?.x;
    let (dx, dy) = slab.hollow_shift(270.0);
    let b = minimize_lbfgs(slab, &slab.translate_island(&a, dx, dy)?, &cfg)?.x;
    Ok((a, b))
}

fn endpoint<O: Objective + ?Sized>(obj: &O, p: Point) -> Result<Endpoint> {
    Ok(Endpoint {
        energy: obj.value(&p)?,
        point: p,
    })
}

fn pair_run<O: Objective + ?Sized>(
    out: &mut RunOutput,
    exp: &SaddleExperiment,
    obj: &O,
    a: Point,
    b: Point,
    cfg: &SaddleConfig,
) -> Result<SaddleSummary> {
    let r = locate_ddp(obj, &a, &b, cfg)?;
    out.put_csv("trace.csv", |buf| r.boundary_trace.write_csv(buf))?;
    Ok(SaddleSummary {
        preset: exp.preset,
        dim: obj.dim(),
        exit_kind: None,
        saddles: vec![SaddleRecord::from_result(&r)],
        minima: [endpoint(obj, a)?, endpoint(obj, b)?],
    })
}

/// Runs the saddle pipeline for a preset pair.
pub fn run_saddle(exp: &SaddleExperiment) -> Result<RunOutput> {
    let mut out = RunOutput::new(exp)?;
    let cfg = exp.saddle.clone().unwrap_or_else(|| exp.preset.default_config());
    let summary = match exp.preset {
        SaddlePreset::MullerBrownAB => pair_run(
            &mut out,
            exp,
            &MullerBrown::new(),
            points(&r::MB_SEP_A),
            points(&r::MB_SEP_B),
            &cfg,
        )?,
        SaddlePreset::MullerBrownBC => pair_run(
            &mut out,
            exp,
            &MullerBrown::new(),
            points(&r::MB_SEP_B),
            points(&r::MB_SEP_C),
            &cfg,
        )?,
        SaddlePreset::Leps => pair_run(
            &mut out,
            exp,
            &Leps::new(),
            points(&[0.742, 3.0]),
            points(&[3.0, 0.742]),
            &cfg,
        )?,
        SaddlePreset::Heptamer => {
            let slab = MorseSlab::new(SlabConfig::default())?;
            let (a, b) = heptamer_minima(&slab)?;
            pair_run(&mut out, exp, &slab, a, b, &cfg)?
        }
        SaddlePreset::EckhardtAB => {
            let obj = Eckhardt::new();
            let (a, b) = (points(&r::ECK_SEP_A), points(&r::ECK_SEP_B));
            let found = locate_ddp_perturbed(&obj, &a, &b, exp.delta, &cfg)?;
            for (i, s) in found.iter().enumerate() {
                out.put_csv(&format!("trace-{i}.csv"), |buf| s.boundary_trace.write_csv(buf))?;
            }
            // the golden-section exit is only accurate to `eps`
            let exit_kind = newton_critical(&obj, &found[0].exit_point, 1e-10, 50)
                .and_then(|p| classify_critical(&obj, &p, 1e-8))
                .ok()
                .map(|c| c.kind);
            SaddleSummary {
                preset: exp.preset,
                dim: 2,
                exit_kind,
                saddles: found.iter().map(SaddleRecord::from_result).collect(),
                minima: [endpoint(&obj, a)?, endpoint(&obj, b)?],
            }
        }
        SaddlePreset::Lj3 => {
            let obj = Lj3Reduced::new();
            let (a, b) = (points(&r::LJ3_SEP_A), points(&r::LJ3_SEP_B));
            // the symmetric exit is exactly the midpoint of the mirror pair
            let exit = (&a + &b) * 0.5;
            let ddp = symmetric_ddp(&obj, &exit, cfg.dt, exp.symmetric_max_steps, cfg.critical_tol)?;
            let class = classify_critical(&obj, &ddp, cfg.critical_tol)?;
            SaddleSummary {
                preset: exp.preset,
                dim: 3,
                exit_kind: None,
                saddles: vec![SaddleRecord {
                    exit_point: exit,
                    mgp: None,
                    mgp_grad_norm: None,
                    ddp_energy: obj.value(&ddp)?,
                    ddp,
                    kind: class.kind,
                    negative_eigenvalues: class.negative_eigenvalues,
                    force_evals: 0,
                    energy_evals: 0,
                }],
                minima: [endpoint(&obj, a)?, endpoint(&obj, b)?],
            }
        }
    };
    out.put_json("summary.json", &summary)?;
    Ok(out)
}

// ---------------------------------------------------------------- data

/// Where mixture data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    /// Synthetic dataset name or a path to a headerless numeric CSV.
    pub dataset: String,
    /// Sample count for synthetic data (`None`: the dataset default).
    #[serde(default)]
    pub n: Option<usize>,
    /// Generation seed for synthetic data.
    #[serde(default = "default_data_seed")]
    pub data_seed: u64,
}

/// Generation seed of the bundled elliptical3 experiments.
pub const DEFAULT_DATA_SEED: u64 = 243;

fn default_data_seed() -> u64 {
    DEFAULT_DATA_SEED
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            dataset: "elliptical3".into(),
            n: None,
            data_seed: DEFAULT_DATA_SEED,
        }
    }
}

impl DataSpec {
    /// Loads the data and, for synthetic sets, the generating parameters.
    pub fn load(&self) -> Result<(Dataset, Option<GmmParams>)> {
        match self.dataset.parse::<SyntheticId>() {
            Ok(id) => {
                let s = gen_synthetic(id, self.n, self.data_seed);
                Ok((s.data, Some(s.truth)))
            }
            Err(_) => {
                let f = fs::File::open(&self.dataset).map_err(|e| {
                    Error::Config(format!("dataset {:?}: {e}", self.dataset))
                })?;
                Ok((Dataset::read_csv(f)?, None))
            }
        }
    }
}

fn mixture_shape(
    truth: &Option<GmmParams>,
    k: Option<usize>,
    kind: Option<CovKind>,
) -> Result<(usize, CovKind)> {
    let k = k
        .or(truth.as_ref().map(GmmParams::k))
        .ok_or_else(|| Error::Config("k is required for CSV datasets".into()))?;
    let kind = kind.or(truth.as_ref().map(GmmParams::kind)).unwrap_or(CovKind::Full);
    Ok((k, kind))
}

// ---------------------------------------------------------------- gmm

/// EM versus tier-search EM from paired random starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmExperiment {
    pub data: DataSpec,
    pub k: Option<usize>,
    pub kind: Option<CovKind>,
    pub starts: usize,
    /// Start `i` draws from `seed + i`.
    pub seed: u64,
    pub em: EmConfig,
    pub tier: TierConfig,
}

impl Default for GmmExperiment {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            k: None,
            kind: None,
            starts: 20,
            seed: 0,
            em: EmConfig::default(),
            tier: TierConfig {
                step: 0.05,
                max_tiers: 1,
                ..TierConfig::default()
            },
        }
    }
}

/// Per-start row of a gmm run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmRow {
    pub start: usize,
    pub seed: u64,
    pub start_log_likelihood: f64,
    pub em_log_likelihood: f64,
    pub em_iterations: usize,
    pub tt_em_log_likelihood: f64,
    pub tier1_count: usize,
    pub tier2_count: usize,
}

fn tier_counts(set: &SolutionSet) -> (usize, usize) {
    let count = |t: usize| set.solutions.iter().filter(|s| s.tier == t).count();
    (count(1), count(2))
}

/// Runs plain EM and tier-search EM from each seeded start.
pub fn run_gmm(exp: &GmmExperiment) -> Result<RunOutput> {
    let mut out = RunOutput::new(exp)?;
    if exp.starts == 0 {
        return Err(Error::Config("starts must be positive".into()));
    }
    let (data, truth) = exp.data.load()?;
    let (k, kind) = mixture_shape(&truth, exp.k, exp.kind)?;
    let rows: Vec<Result<GmmRow>> = (0..exp.starts)
        .into_par_iter()
        .map(|i| {
            let seed = exp.seed.wrapping_add(i as u64);
            let p0 = random_start(&data, k, kind, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let em = em_fit(&p0, &data, &exp.em)?;
            let tier = TierConfig {
                seed,
                ..exp.tier.clone()
            };
            let tt = tt_em(&p0, &data, &exp.em, &tier)?;
            let (t1, t2) = tier_counts(&tt.solutions);
            Ok(GmmRow {
                start: i,
                seed,
                start_log_likelihood: em.trajectory[0],
                em_log_likelihood: em.log_likelihood(),
                em_iterations: em.iterations,
                tt_em_log_likelihood: tt.log_likelihood,
                tier1_count: t1,
                tier2_count: t2,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let em: Vec<f64> = rows.iter().map(|r| r.em_log_likelihood).collect();
    let tt: Vec<f64> = rows.iter().map(|r| r.tt_em_log_likelihood).collect();
    let truth_ll = match &truth {
        Some(t) => Some(em_fit(t, &data, &exp.em)?.log_likelihood()),
        None => None,
    };
    out.put_rows("runs.csv", &rows)?;
    out.put_json(
        "summary.json",
        &serde_json::json!({
            "dataset": exp.data.dataset,
            "n": data.n(),
            "k": k,
            "kind": kind,
            "em": Aggregate::of(&em),
            "tt_em": Aggregate::of(&tt),
            "tt_em_not_worse": rows.iter().filter(|r| r.tt_em_log_likelihood >= r.em_log_likelihood).count(),
            "em_from_truth": truth_ll,
        }),
    )?;
    Ok(out)
}

// ---------------------------------------------------------------- smooth

/// What a smoothing run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothMode {
    /// Unique smoothed-EM maxima per kernel level.
    Census,
    /// Coarse-to-fine tracing against multi-start EM.
    Hierarchy,
}

/// Likelihood-smoothing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothExperiment {
    pub data: DataSpec,
    pub k: Option<usize>,
    pub kind: Option<CovKind>,
    pub mode: SmoothMode,
    pub kernel_mode: KernelMode,
    /// Census levels; additive levels are in data standard deviations.
    pub levels: Vec<f64>,
    pub starts: usize,
    pub seed: u64,
    pub em: EmConfig,
    pub hierarchy: Hierarchy,
    pub dedup_tol: f64,
}

impl Default for SmoothExperiment {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            k: None,
            kind: Some(CovKind::Diagonal),
            mode: SmoothMode::Census,
            kernel_mode: KernelMode::Additive,
            levels: vec![0.0, 0.6, 1.8],
            starts: 1000,
            seed: 1,
            em: EmConfig::default(),
            hierarchy: Hierarchy::default(),
            dedup_tol: CENSUS_DEDUP_TOL,
        }
    }
}

/// Absolute kernel for a census level given in experiment units.
pub fn census_kernel(mode: KernelMode, level: f64, data: &Dataset) -> KernelSpec {
    match mode {
        KernelMode::Additive => KernelSpec::additive(level * data.variance_scale().sqrt()),
        KernelMode::Multiplicative => KernelSpec::multiplicative(level),
    }
}

/// Row of the hierarchy trace table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyRow {
    pub trace: usize,
    pub top_log_likelihood: f64,
    pub log_likelihood: f64,
}

/// Runs a smoothing census or a hierarchy comparison.
pub fn run_smooth(exp: &SmoothExperiment) -> Result<RunOutput> {
    let mut out = RunOutput::new(exp)?;
    let (data, truth) = exp.data.load()?;
    let (k, kind) = mixture_shape(&truth, exp.k, exp.kind)?;
    match exp.mode {
        SmoothMode::Census => {
            if exp.levels.is_empty() {
                return Err(Error::Config("census needs at least one level".into()));
            }
            let mut rows = Vec::with_capacity(exp.levels.len());
            for &level in &exp.levels {
                let kernel = census_kernel(exp.kernel_mode, level, &data);
                let count = count_local_maxima(
                    &data, k, kind, exp.starts, &kernel, &exp.em, exp.dedup_tol, exp.seed,
                )?;
                rows.push(CensusRow {
                    level,
                    unique_maxima_count: count,
                });
            }
            out.put_csv("census.csv", |buf| write_census_csv(&rows, buf))?;
            let best = rows
                .iter()
                .min_by_key(|r| r.unique_maxima_count)
                .expect("non-empty");
            out.put_json(
                "summary.json",
                &serde_json::json!({
                    "mode": "census",
                    "kernel_mode": exp.kernel_mode,
                    "starts": exp.starts,
                    "rows": rows,
                    "best_level": best.level,
                    "best_count": best.unique_maxima_count,
                }),
            )?;
        }
        SmoothMode::Hierarchy => {
            let mut rng = ChaCha8Rng::seed_from_u64(exp.seed);
            let starts = (0..exp.starts)
                .map(|_| random_start(&data, k, kind, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let h = smooth_em_hierarchy(&data, &exp.hierarchy, &exp.em, &starts)?;
            let plain: Vec<f64> = starts
                .par_iter()
                .map(|p| em_fit(p, &data, &exp.em).map(|f| f.log_likelihood()))
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<HierarchyRow> = h
                .traces
                .iter()
                .enumerate()
                .map(|(i, t)| HierarchyRow {
                    trace: i,
                    top_log_likelihood: t.level_log_likelihoods[0],
                    log_likelihood: t.log_likelihood,
                })
                .collect();
            out.put_rows("traces.csv", &rows)?;
            out.put_json(
                "summary.json",
                &serde_json::json!({
                    "mode": "hierarchy",
                    "levels": h.levels,
                    "hierarchy_best": h.best().log_likelihood,
                    "multistart_em": Aggregate::of(&plain),
                }),
            )?;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- nn

/// What a network run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NnMode {
    /// LM and tier-search training from paired seeded starts on all data.
    Multistart,
    /// k-fold evaluation for each hidden size and trainer.
    Kfold,
}

/// Network training experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnExperiment {
    /// `xor`, `two-moons`, or a CSV path (final column is the label).
    pub data: String,
    pub normalize: bool,
    /// Two-moons sample count and noise.
    pub samples: usize,
    pub noise: f64,
    pub mode: NnMode,
    /// Hidden-node counts to sweep.
    pub hidden: Vec<usize>,
    pub folds: usize,
    pub starts: usize,
    pub seed: u64,
    pub lm: LmConfig,
    pub tt: TtTrainConfig,
}

impl Default for NnExperiment {
    fn default() -> Self {
        Self {
            data: "xor".into(),
            normalize: true,
            samples: 200,
            noise: 0.2,
            mode: NnMode::Multistart,
            hidden: vec![2],
            folds: 10,
            starts: 20,
            seed: 0,
            lm: LmConfig::default(),
            tt: TtTrainConfig::default(),
        }
    }
}

impl NnExperiment {
    pub fn load(&self) -> Result<LabeledData> {
        match self.data.as_str() {
            "xor" => Ok(xor_data()),
            "two-moons" => {
                let mut d = two_moons(self.samples, self.noise, self.seed);
                if self.normalize {
                    d.normalize_min_max();
                }
                Ok(d)
            }
            path => {
                let f = fs::File::open(path)
                    .map_err(|e| Error::Config(format!("dataset {path:?}: {e}")))?;
                LabeledData::read_csv(f, self.normalize)
            }
        }
    }
}

/// Per-start row of a multistart network run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnStartRow {
    pub hidden: usize,
    pub start: usize,
    pub seed: u64,
    pub lm_mse: f64,
    pub tt_mse: f64,
    pub solutions: usize,
}

/// Per-fold row of a k-fold network run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnFoldRow {
    pub hidden: usize,
    pub trainer: String,
    pub fold: usize,
    pub train_error: f64,
    pub test_error: f64,
    pub misclassified: usize,
    pub test_size: usize,
}

/// Runs network training as configured.
pub fn run_nn(exp: &NnExperiment) -> Result<RunOutput> {
    let mut out = RunOutput::new(exp)?;
    let data = exp.load()?;
    if exp.hidden.is_empty() {
        return Err(Error::Config("hidden sweep is empty".into()));
    }
    let mut summary = serde_json::Map::new();
    match exp.mode {
        NnMode::Multistart => {
            let mut rows = Vec::new();
            for &k in &exp.hidden {
                let arch = MlpArch::new(data.features(), k)?;
                let ranges = data.input_ranges();
                let found: Vec<Result<NnStartRow>> = (0..exp.starts)
                    .into_par_iter()
                    .map(|i| {
                        let seed = exp.seed.wrapping_add(i as u64);
                        let w0 = nguyen_widrow_init(&arch, &ranges, seed)?;
                        let lm = lm_train(&arch, &w0, &data, &exp.lm)?;
                        let tt = tt_train(&arch, &w0, &data, &exp.tt)?;
                        Ok(NnStartRow {
                            hidden: k,
                            start: i,
                            seed,
                            lm_mse: lm.mse,
                            tt_mse: tt.mse,
                            solutions: tt.solutions.len(),
                        })
                    })
                    .collect();
                let found = found.into_iter().collect::<Result<Vec<_>>>()?;
                let lm: Vec<f64> = found.iter().map(|r| r.lm_mse).collect();
                let tt: Vec<f64> = found.iter().map(|r| r.tt_mse).collect();
                summary.insert(
                    format!("hidden_{k}"),
                    serde_json::json!({ "lm_mse": Aggregate::of(&lm), "tt_mse": Aggregate::of(&tt) }),
                );
                rows.extend(found);
            }
            out.put_rows("starts.csv", &rows)?;
        }
        NnMode::Kfold => {
            let mut rows = Vec::new();
            for &k in &exp.hidden {
                let arch = MlpArch::new(data.features(), k)?;
                let lm = lm_trainer(exp.lm);
                let tt = tt_trainer(exp.tt.clone());
                let mut per = serde_json::Map::new();
                for (name, res) in [
                    ("lm", kfold_eval(&arch, &data, exp.folds, &lm, exp.seed)?),
                    ("tt", kfold_eval(&arch, &data, exp.folds, &tt, exp.seed)?),
                ] {
                    rows.extend(res.folds.iter().map(|f| NnFoldRow {
                        hidden: k,
                        trainer: name.into(),
                        fold: f.fold,
                        train_error: f.train_error,
                        test_error: f.test_error,
                        misclassified: f.misclassified,
                        test_size: f.test_size,
                    }));
                    per.insert(
                        name.into(),
                        serde_json::json!({
                            "train_error": res.train_error,
                            "test_error": res.test_error,
                            "accuracy": res.accuracy,
                        }),
                    );
                }
                summary.insert(format!("hidden_{k}"), serde_json::Value::Object(per));
            }
            out.put_rows("folds.csv", &rows)?;
        }
    }
    summary.insert("samples".into(), data.len().into());
    out.put_json("summary.json", &summary)?;
    Ok(out)
}

// ---------------------------------------------------------------- evo

/// Paired-seed comparison of the evolutionary variants on the multi-well
/// benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvoExperiment {
    pub variants: Vec<EvoVariant>,
    /// Paired seeds `seed .. seed + runs`.
    pub runs: usize,
    pub seed: u64,
    /// The variant and seed fields are set per run.
    pub evo: EvoConfig,
}

impl Default for EvoExperiment {
    fn default() -> Self {
        Self {
            variants: vec![EvoVariant::Mutate, EvoVariant::LocalRefine, EvoVariant::TrustTech],
            runs: 20,
            seed: 0,
            evo: EvoConfig {
                generations: 10,
                ..EvoConfig::default()
            },
        }
    }
}

/// Final best value of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoRow {
    pub seed: u64,
    pub variant: EvoVariant,
    pub best_value: f64,
}

#[derive(Serialize)]
struct HistoryRow {
    seed: u64,
    variant: EvoVariant,
    generation: usize,
    best_value: f64,
    mean_value: f64,
}

/// Runs every variant from every paired seed.
pub fn run_evo(exp: &EvoExperiment) -> Result<RunOutput> {
    let mut out = RunOutput::new(exp)?;
    if exp.variants.is_empty() || exp.runs == 0 {
        return Err(Error::Config("need at least one variant and one run".into()));
    }
    let obj = MultiWell;
    let solver = LbfgsSolver::new(&obj);
    let mut rows = Vec::new();
    let mut history = Vec::new();
    for i in 0..exp.runs {
        let seed = exp.seed.wrapping_add(i as u64);
        for &variant in &exp.variants {
            let cfg = EvoConfig {
                variant,
                seed,
                ..exp.evo.clone()
            };
            let r = ea_run(&obj, &cfg, &MultiWell::BOUNDS, Some(&solver))?;
            history.extend(r.history.iter().map(|s| HistoryRow {
                seed,
                variant,
                generation: s.generation,
                best_value: s.best_value,
                mean_value: s.mean_value,
            }));
            rows.push(EvoRow {
                seed,
                variant,
                best_value: r.best.value,
            });
        }
    }
    let mut per = serde_json::Map::new();
    for &v in &exp.variants {
        let vals: Vec<f64> = rows.iter().filter(|r| r.variant == v).map(|r| r.best_value).collect();
        per.insert(
            serde_json::to_value(v)?.as_str().expect("unit variant").into(),
            serde_json::to_value(Aggregate::of(&vals))?,
        );
    }
    let best_of = |seed: u64, v: EvoVariant| {
        rows.iter()
            .find(|r| r.seed == seed && r.variant == v)
            .map(|r| r.best_value)
    };
    let ordered = (0..exp.runs)
        .filter(|&i| {
            let seed = exp.seed.wrapping_add(i as u64);
            match (
                best_of(seed, EvoVariant::TrustTech),
                best_of(seed, EvoVariant::LocalRefine),
                best_of(seed, EvoVariant::Mutate),
            ) {
                (Some(t), Some(l), Some(m)) => t <= l && l <= m,
                _ => false,
            }
        })
        .count();
    out.put_rows("runs.csv", &rows)?;
    out.put_rows("history.csv", &history)?;
    out.put_json(
        "summary.json",
        &serde_json::json!({ "variants": per, "ordered_runs": ordered, "runs": exp.runs }),
    )?;
    Ok(out)
}

// ---------------------------------------------------------------- gendata

/// Synthetic dataset export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataExperiment {
    pub id: SyntheticId,
    #[serde(default)]
    pub n: Option<usize>,
    pub seed: u64,
}

/// Writes `<id>.csv` and the generating parameters as `<id>.truth.json`.
pub fn gen_data(exp: &GenDataExperiment) -> Result<RunOutput> {
    let mut out = RunOutput::new(exp)?;
    let s = gen_synthetic(exp.id, exp.n, exp.seed);
    let name = serde_json::to_value(exp.id)?
        .as_str()
        .expect("unit variant")
        .to_string();
    out.put_csv(&format!("{name}.csv"), |buf| s.data.write_csv(buf))?;
    let mut truth = Vec::new();
    s.truth.write_json(&mut truth)?;
    out.files.insert(format!("{name}.truth.json"), truth);
    out.put_json(
        "summary.json",
        &serde_json::json!({ "id": exp.id, "n": s.data.n(), "dim": s.data.dim(), "seed": exp.seed }),
    )?;
    Ok(out)
}

// ---------------------------------------------------------------- surfscan

/// Surfaces available to the critical-point census.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanSurface {
    MullerBrown,
    Eckhardt,
    Leps,
    Lj3,
}

impl ScanSurface {
    pub fn default_bounds(self) -> Vec<(f64, f64)> {
        match self {
            Self::MullerBrown => vec![(-1.5, 1.2), (-0.5, 2.0)],
            Self::Eckhardt => vec![(-4.0, 4.0), (-3.0, 3.0)],
            Self::Leps => vec![(0.5, 4.0), (0.5, 4.0)],
            Self::Lj3 => vec![(0.8, 2.5), (-1.0, 2.5), (-1.5, 1.5)],
        }
    }

    fn objective(self) -> Box<dyn Objective> {
        match self {
            Self::MullerBrown => Box::new(MullerBrown::new()),
            Self::Eckhardt => Box::new(Eckhardt::new()),
            Self::Leps => Box::new(Leps::new()),
            Self::Lj3 => Box::new(Lj3Reduced::new()),
        }
    }
}

/// Multi-start Newton census of critical points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfScanExperiment {
    pub surface: ScanSurface,
    pub starts: usize,
    pub seed: u64,
    /// `None`: the surface's default box.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub tol: f64,
    pub max_iter: usize,
    /// Points closer than this are the same critical point.
    pub dedup_tol: f64,
}

impl Default for SurfScanExperiment {
    fn default() -> Self {
        Self {
            surface: ScanSurface::MullerBrown,
            starts: 200,
            seed: 0,
            bounds: None,
            tol: 1e-10,
            max_iter: 100,
            dedup_tol: 1e-6,
        }
    }
}

/// A distinct critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalRecord {
    #[serde(with = "crate::dynsys::point_serde")]
    pub point: Point,
    pub energy: f64,
    pub kind: CriticalKind,
    pub negative_eigenvalues: usize,
    pub hits: usize,
}

/// Runs Newton from uniform starts and tabulates distinct critical points.
pub fn run_surfscan(exp: &SurfScanExperiment) -> Result<RunOutput> {
    let mut out = RunOutput::new(exp)?;
    let obj = exp.surface.objective();
    let bounds = exp.bounds.clone().unwrap_or_else(|| exp.surface.default_bounds());
    if bounds.len() != obj.dim() {
        return Err(Error::Dimension {
            expected: obj.dim(),
            got: bounds.len(),
        });
    }
    if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(Error::Config("bounds need lo < hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(exp.seed);
    let starts: Vec<Point> = (0..exp.starts)
        .map(|_| DVector::from_iterator(bounds.len(), bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi))))
        .collect();
    let ends: Vec<Option<Point>> = starts
        .par_iter()
        .map(|x0| newton_critical(obj.as_ref(), x0, exp.tol, exp.max_iter).ok())
        .collect();
    let mut found: Vec<CriticalRecord> = Vec::new();
    let mut failed = 0;
    for p in ends {
        let Some(p) = p else {
            failed += 1;
            continue;
        };
        if let Some(rec) = found.iter_mut().find(|c| (&c.point - &p).norm() < exp.dedup_tol) {
            rec.hits += 1;
            continue;
        }
        match classify_critical(obj.as_ref(), &p, exp.tol.max(1e-8)) {
            Ok(class) => found.push(CriticalRecord {
                energy: obj.value(&p)?,
                point: p,
                kind: class.kind,
                negative_eigenvalues: class.negative_eigenvalues,
                hits: 1,
            }),
            Err(_) => failed += 1,
        }
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    out.put_csv("critical.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["energy".to_string()];
        header.extend((1..=bounds.len()).map(|i| format!("x{i}")));
        header.extend(["kind".into(), "negative_eigenvalues".into(), "hits".into()]);
        w.write_record(&header)?;
        for c in &found {
            let mut row = vec![c.energy.to_string()];
            row.extend(c.point.iter().map(|v| v.to_string()));
            row.push(serde_json::to_value(c.kind)?.to_string().trim_matches('"').to_string());
            row.push(c.negative_eigenvalues.to_string());
            row.push(c.hits.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.put_json(
        "summary.json",
        &serde_json::json!({
            "surface": exp.surface,
            "starts": exp.starts,
            "failed": failed,
            "critical_points": found,
        }),
    )?;
    Ok(out)
}
