//! Error metrics, the solver run cache and the benchmark pipeline that
//! builds every surrogate family against one Monte-Carlo reference.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apc::{build_ft, build_pcm, ApcVariant};
use crate::error::{Error, Result};
use crate::hsg::{hsg_on_samples, HsgConfig, SplitHsg};
use crate::model::{Model, SolverModel};
use crate::physics::{ScenarioConfig, ScenarioFile, UncertainInput};
use crate::reference::{run_reference_with, surrogate_moments, MomentField};
use crate::solver::{Grid, SolverConfig};
use crate::sparsegrid::{adaptive_loop, BasisVariant, InputBox, SparseGridConfig};
use crate::stochastic::{generate_samples, load_samples, DistributionSpec, SampleSet};
use crate::vkoga::{build_candidates, schedule_run, DeltaConvention};

/// `√(Δr·Σ_j (a_j − b_j)²)`.
pub fn l2_distance(a: &[f64], b: &[f64], dr: f64) -> f64 {
    (dr * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sqrt()
}

pub fn l2_norm(a: &[f64], dr: f64) -> f64 {
    (dr * a.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

pub fn max_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Cell width of a uniform grid given its centres.
pub fn grid_spacing(r_centers: &[f64]) -> f64 {
    if r_centers.len() < 2 {
        1.0
    } else {
        (r_centers[r_centers.len() - 1] - r_centers[0]) / (r_centers.len() - 1) as f64
    }
}

fn check_grids(a: &MomentField<f64>, b: &MomentField<f64>) -> Result<()> {
    if a.n_cells() != b.n_cells() {
        return Err(Error::GridMismatch(format!("{} cells vs {} cells", a.n_cells(), b.n_cells())));
    }
    let tol = 1e-9 * grid_spacing(&b.r_centers).abs().max(1.0);
    if a.r_centers.iter().zip(&b.r_centers).any(|(x, y)| (x - y).abs() > tol) {
        return Err(Error::GridMismatch("cell centres differ".into()));
    }
    Ok(())
}

/// `(error_mean, error_std)` in the discrete L² norm.
pub fn error_norm(candidate: &MomentField<f64>, reference: &MomentField<f64>) -> Result<(f64, f64)> {
    check_grids(candidate, reference)?;
    let dr = grid_spacing(&reference.r_centers);
    Ok((
        l2_distance(&candidate.mean, &reference.mean, dr),
        l2_distance(&candidate.std, &reference.std, dr),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub rel_l2: f64,
    pub max: f64,
}

impl ErrorNorms {
    pub fn between(candidate: &[f64], reference: &[f64], dr: f64) -> Self {
        let l2 = l2_distance(candidate, reference, dr);
        let norm = l2_norm(reference, dr);
        Self {
            l2,
            rel_l2: if norm > 0.0 { l2 / norm } else { f64::NAN },
            max: max_distance(candidate, reference),
        }
    }
}

/// L², relative L² and max errors of both moments.
pub fn moment_errors(candidate: &MomentField<f64>, reference: &MomentField<f64>) -> Result<(ErrorNorms, ErrorNorms)> {
    check_grids(candidate, reference)?;
    let dr = grid_spacing(&reference.r_centers);
    Ok((
        ErrorNorms::between(&candidate.mean, &reference.mean, dr),
        ErrorNorms::between(&candidate.std, &reference.std, dr),
    ))
}

/// One row of `convergence.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub method: String,
    pub variant: String,
    /// Model runs, or stochastic elements for HSG.
    pub cost: usize,
    pub error_mean: f64,
    pub error_std: f64,
    pub rel_error_mean: f64,
    pub rel_error_std: f64,
    pub max_error_mean: f64,
    pub max_error_std: f64,
    pub config_hash: String,
}

/// One row of `timings.csv`; kept apart so that `convergence.csv` is
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub method: String,
    pub variant: String,
    pub cost: usize,
    pub wall_time_s: f64,
    pub solver_calls: usize,
}

/// Hex SHA-256 of the scenario and solver settings.
pub fn config_hash(cfg: &ScenarioConfig<f64>, solver: &SolverConfig<f64>) -> String {
    let mut h = Sha256::new();
    h.update(format!("{cfg:?}|{solver:?}").as_bytes());
    hex::encode(h.finalize())
}

/// Content-addressed store of solver outputs, in memory and optionally
/// mirrored to a directory.
#[derive(Debug)]
pub struct RunCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, Arc<Vec<f64>>>>,
}

impl RunCache {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            memory: Mutex::new(HashMap::new()),
        }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            memory: Mutex::new(HashMap::new()),
        })
    }

    pub fn key(omega: &UncertainInput<f64>, config_hash: &str) -> String {
        let mut h = Sha256::new();
        h.update(config_hash.as_bytes());
        for v in omega.to_array() {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.bin")))
    }

    pub fn get(&self, key: &str) -> Result<Option<Arc<Vec<f64>>>> {
        if let Some(v) = self.memory.lock().expect("cache lock").get(key) {
            return Ok(Some(v.clone()));
        }
        let Some(path) = self.path(key) else { return Ok(None) };
        match fs::read(&path) {
            Ok(bytes) => {
                if bytes.len() % 8 != 0 {
                    return Err(Error::Numeric(format!("corrupt cache entry {}", path.display())));
                }
                let v: Vec<f64> = bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                let v = Arc::new(v);
                self.memory.lock().expect("cache lock").insert(key.to_string(), v.clone());
                Ok(Some(v))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, key: &str, values: &[f64]) -> Result<()> {
        if let Some(path) = self.path(key) {
            fs::create_dir_all(path.parent().expect("cache subdirectory"))?;
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, &path)?;
        }
        self.memory
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), Arc::new(values.to_vec()));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.memory.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The solver behind a [`RunCache`], counting real solver invocations.
pub struct CachedModel<'a> {
    pub inner: SolverModel<f64>,
    pub cache: &'a RunCache,
    pub config_hash: String,
    solver_calls: AtomicUsize,
}

impl<'a> CachedModel<'a> {
    pub fn new(inner: SolverModel<f64>, cache: &'a RunCache) -> Self {
        let config_hash = config_hash(&inner.scenario, &inner.solver);
        Self {
            inner,
            cache,
            config_hash,
            solver_calls: AtomicUsize::new(0),
        }
    }

    pub fn solver_calls(&self) -> usize {
        self.solver_calls.load(Ordering::SeqCst)
    }
}

impl Model<f64> for CachedModel<'_> {
    fn n_outputs(&self) -> usize {
        self.inner.n_outputs()
    }

    fn evaluate(&self, omega: &UncertainInput<f64>) -> Result<Vec<f64>> {
        let key = RunCache::key(omega, &self.config_hash);
        if let Some(v) = self.cache.get(&key)? {
            return Ok(v.as_ref().clone());
        }
        self.solver_calls.fetch_add(1, Ordering::SeqCst);
        let v = self.inner.evaluate(omega)?;
        self.cache.put(&key, &v)?;
        Ok(v)
    }
}

/// Counts the distinct parameter points requested through it.
pub struct Tracked<'a, M: ?Sized> {
    pub inner: &'a M,
    seen: Mutex<HashSet<[u64; 3]>>,
}

impl<'a, M: Model<f64> + ?Sized> Tracked<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        Self {
            inner,
            seen: Mutex::new(HashSet::new()),
        }
    }

    pub fn distinct(&self) -> usize {
        self.seen.lock().expect("tracker lock").len()
    }
}

impl<M: Model<f64> + ?Sized> Model<f64> for Tracked<'_, M> {
    fn n_outputs(&self) -> usize {
        self.inner.n_outputs()
    }

    fn evaluate(&self, omega: &UncertainInput<f64>) -> Result<Vec<f64>> {
        self.seen
            .lock()
            .expect("tracker lock")
            .insert(omega.to_array().map(f64::to_bits));
        self.inner.evaluate(omega)
    }
}

/// Where Θ comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesPlan {
    /// CSV or whitespace file with three columns; generated when absent.
    pub file: Option<PathBuf>,
    #[serde(default = "default_sample_count")]
    pub n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_sample_count() -> usize {
    2000
}

fn default_seed() -> u64 {
    1
}

impl Default for SamplesPlan {
    fn default() -> Self {
        Self {
            file: None,
            n: default_sample_count(),
            seed: default_seed(),
        }
    }
}

/// One method family and its cost schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MethodPlan {
    Apc {
        variant: ApcVariant,
        orders: Vec<usize>,
    },
    Sparsegrid {
        variant: BasisVariant,
        budgets: Vec<usize>,
    },
    Vkoga {
        #[serde(default = "default_deltas")]
        deltas: Vec<f64>,
        #[serde(default = "default_checkpoints")]
        n: Vec<usize>,
        #[serde(default)]
        convention: DeltaConvention,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    Hsg {
        levels: Vec<u32>,
        #[serde(default = "default_hsg_order")]
        order: usize,
        #[serde(default)]
        split_porosity: bool,
        /// Admissible unclamped node saturations, `[lower, upper]`.
        node_band: Option<[f64; 2]>,
    },
}

fn default_deltas() -> Vec<f64> {
    crate::vkoga::DEFAULT_DELTAS.to_vec()
}

fn default_checkpoints() -> Vec<usize> {
    crate::vkoga::DEFAULT_CHECKPOINTS.to_vec()
}

fn default_resolution() -> usize {
    50
}

fn default_hsg_order() -> usize {
    1
}

impl MethodPlan {
    pub fn name(&self) -> &'static str {
        match self {
            MethodPlan::Apc { .. } => "apc",
            MethodPlan::Sparsegrid { .. } => "sparsegrid",
            MethodPlan::Vkoga { .. } => "vkoga",
            MethodPlan::Hsg { .. } => "hsg",
        }
    }
}

/// The benchmark configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkPlan {
    #[serde(default)]
    pub scenario: ScenarioFile,
    /// Overrides the scenario's cell count.
    pub cells: Option<usize>,
    #[serde(default)]
    pub samples: SamplesPlan,
    /// Results directory, relative to the plan file.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Cache directory, relative to the plan file; defaults to
    /// `<output>/cache`.
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub methods: Vec<MethodPlan>,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        Self {
            scenario: ScenarioFile::default(),
            cells: None,
            samples: SamplesPlan::default(),
            output: default_output(),
            cache: None,
            methods: Vec::new(),
        }
    }
}

impl BenchmarkPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a plan and resolves its relative paths against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut plan = Self::from_toml(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        plan.output = resolve(&plan.output);
        plan.cache = plan.cache.as_ref().map(resolve);
        plan.samples.file = plan.samples.file.as_ref().map(resolve);
        Ok(plan)
    }

    pub fn scenario_config(&self) -> ScenarioConfig<f64> {
        let mut cfg: ScenarioConfig<f64> = self.scenario.to_config();
        if let Some(n) = self.cells {
            cfg.n_cells = n;
        }
        cfg
    }

    pub fn load_samples(&self) -> Result<SampleSet<f64>> {
        match &self.samples.file {
            Some(f) => {
                let set = load_samples(f)?;
                if self.samples.n < set.len() {
                    set.head(self.samples.n)
                } else {
                    Ok(set)
                }
            }
            None => generate_samples(&DistributionSpec::default(), self.samples.n, self.samples.seed),
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.output.join("cache"))
    }
}

/// A method stage that failed; the rest of the plan still runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub method: String,
    pub variant: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub reference: MomentField<f64>,
    pub reports: Vec<ErrorReport>,
    pub timings: Vec<TimingRecord>,
    pub failures: Vec<StageFailure>,
    /// Real solver invocations in this call (cache misses).
    pub solver_calls: usize,
}

struct Writer {
    dir: PathBuf,
    reports: Vec<ErrorReport>,
    timings: Vec<TimingRecord>,
    failures: Vec<StageFailure>,
}

impl Writer {
    fn flush(&self) -> Result<()> {
        write_rows(self.dir.join("convergence.csv"), &self.reports, CONVERGENCE_HEADER)?;
        write_rows(self.dir.join("timings.csv"), &self.timings, TIMING_HEADER)?;
        write_rows(self.dir.join("failures.csv"), &self.failures, FAILURE_HEADER)?;
        Ok(())
    }
}

const CONVERGENCE_HEADER: &[&str] = &[
    "method",
    "variant",
    "cost",
    "error_mean",
    "error_std",
    "rel_error_mean",
    "rel_error_std",
    "max_error_mean",
    "max_error_std",
    "config_hash",
];
const TIMING_HEADER: &[&str] = &["method", "variant", "cost", "wall_time_s", "solver_calls"];
const FAILURE_HEADER: &[&str] = &["method", "variant", "message"];

fn write_rows<R: Serialize>(path: PathBuf, rows: &[R], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_convergence(path: impl AsRef<Path>) -> Result<Vec<ErrorReport>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Runs the reference and every method of `plan`, writing
/// `reference_moments.csv`, `moments/<method>_<variant>_<cost>.csv`,
/// `convergence.csv`, `timings.csv` and `failures.csv` into the output
/// directory.
pub fn run_benchmark(plan: &BenchmarkPlan) -> Result<BenchmarkOutcome> {
    let cfg = plan.scenario_config();
    cfg.validate()?;
    let solver_cfg = SolverConfig::default();
    let set = plan.load_samples()?;
    let grid = Grid::from_config(&cfg)?;
    fs::create_dir_all(plan.output.join("moments"))?;
    let cache = RunCache::on_disk(plan.cache_dir())?;
    let model = CachedModel::new(SolverModel::new(cfg, solver_cfg), &cache);
    let hash = model.config_hash.clone();

    let t0 = Instant::now();
    let reference = run_reference_with(&set, &model, &grid.r_centers, cfg.t_end)?.moments;
    reference.write_csv(plan.output.join("reference_moments.csv"))?;
    log::info!("reference over {} samples in {:.1?}", set.len(), t0.elapsed());

    let mut out = Writer {
        dir: plan.output.clone(),
        reports: Vec::new(),
        timings: vec![TimingRecord {
            method: "reference".into(),
            variant: "mc".into(),
            cost: set.len(),
            wall_time_s: t0.elapsed().as_secs_f64(),
            solver_calls: model.solver_calls(),
        }],
        failures: Vec::new(),
    };
    out.flush()?;

    for method in &plan.methods {
        let before = model.solver_calls();
        let start = Instant::now();
        let variant = variant_label(method);
        let result = run_method(method, &set, &model, &reference, &cfg, &solver_cfg, &hash, &plan.output);
        match result {
            Ok(rows) => {
                let elapsed = start.elapsed().as_secs_f64();
                let calls = model.solver_calls() - before;
                for (report, wall) in rows {
                    out.timings.push(TimingRecord {
                        method: report.method.clone(),
                        variant: report.variant.clone(),
                        cost: report.cost,
                        wall_time_s: wall.unwrap_or(elapsed),
                        solver_calls: calls,
                    });
                    out.reports.push(report);
                }
            }
            Err(e) => {
                log::error!("{} ({variant}) failed: {e}", method.name());
                out.failures.push(StageFailure {
                    method: method.name().into(),
                    variant,
                    message: e.to_string(),
                });
            }
        }
        out.flush()?;
    }
    Ok(BenchmarkOutcome {
        reference,
        reports: out.reports,
        timings: out.timings,
        failures: out.failures,
        solver_calls: model.solver_calls(),
    })
}

fn variant_label(method: &MethodPlan) -> String {
    match method {
        MethodPlan::Apc { variant, .. } => variant.to_string(),
        MethodPlan::Sparsegrid { variant, .. } => variant.to_string(),
        MethodPlan::Vkoga { deltas, .. } => deltas.iter().map(|d| format!("delta={d}")).collect::<Vec<_>>().join(";"),
        MethodPlan::Hsg { order, split_porosity, .. } => {
            if *split_porosity {
                format!("no={order},split")
            } else {
                format!("no={order}")
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    method: &MethodPlan,
    set: &SampleSet<f64>,
    model: &CachedModel<'_>,
    reference: &MomentField<f64>,
    cfg: &ScenarioConfig<f64>,
    solver_cfg: &SolverConfig<f64>,
    hash: &str,
    output: &Path,
) -> Result<Vec<(ErrorReport, Option<f64>)>> {
    let r = &reference.r_centers;
    let t = reference.t;
    let mut rows = Vec::new();
    let mut emit = |method: &str, variant: String, cost: usize, m: MomentField<f64>, wall: Option<f64>| -> Result<()> {
        m.write_csv(output.join("moments").join(format!("{method}_{variant}_{cost}.csv")))?;
        let (em, es) = moment_errors(&m, reference)?;
        rows.push((
            ErrorReport {
                method: method.into(),
                variant,
                cost,
                error_mean: em.l2,
                error_std: es.l2,
                rel_error_mean: em.rel_l2,
                rel_error_std: es.rel_l2,
                max_error_mean: em.max,
                max_error_std: es.max,
                config_hash: hash.into(),
            },
            wall,
        ));
        Ok(())
    };
    match method {
        MethodPlan::Apc { variant, orders } => {
            for &order in orders {
                let start = Instant::now();
                let tracked = Tracked::new(model);
                let s = match variant {
                    ApcVariant::Pcm => build_pcm(set, order, &tracked)?,
                    ApcVariant::Ft => build_ft(set, order, &tracked)?,
                };
                for w in &s.warnings {
                    log::warn!("apc {variant} order {order}: {w}");
                }
                let m = surrogate_moments(&s, set, r, t)?;
                emit("apc", format!("{variant}{order}"), tracked.distinct(), m, Some(start.elapsed().as_secs_f64()))?;
            }
        }
        MethodPlan::Sparsegrid { variant, budgets } => {
            let budget = budgets.iter().copied().max().unwrap_or(0);
            if budget == 0 {
                return Ok(rows);
            }
            let run = adaptive_loop(set, model, SparseGridConfig::with_variant(*variant), budget, budgets)?;
            for (b, s) in &run.snapshots {
                let m = surrogate_moments(s, set, r, t)?;
                log::info!("sparse grid budget {b}: {} points", s.len());
                emit("sparsegrid", variant.to_string(), s.len(), m, None)?;
            }
        }
        MethodPlan::Vkoga {
            deltas,
            n,
            convention,
            resolution,
        } => {
            let candidates = build_candidates(set, *resolution)?;
            log::info!(
                "{} candidates inside a hull with {} facets",
                candidates.points.len(),
                candidates.hull_facets
            );
            let run = schedule_run(&candidates, model, deltas, n, *convention)?;
            for fitted in &run.models {
                let m = surrogate_moments(&fitted.surrogate, set, r, t)?;
                emit(
                    "vkoga",
                    format!("delta={}", fitted.delta),
                    fitted.surrogate.n_centers(),
                    m,
                    None,
                )?;
            }
        }
        MethodPlan::Hsg {
            levels,
            order,
            split_porosity,
            node_band,
        } => {
            for &n_r in levels {
                let start = Instant::now();
                let mut hsg = HsgConfig::new(n_r, *order);
                if let Some([lo, hi]) = node_band {
                    hsg.node_band = (*lo, *hi);
                }
                let (cost, m) = if *split_porosity {
                    let input_box = InputBox::from_samples(set, hsg.box_margin);
                    let s = SplitHsg::simulate(&hsg, input_box, cfg, solver_cfg)?;
                    (s.cost(), s.reconstruct_moments(set, r)?)
                } else {
                    let (s, m) = hsg_on_samples(set, &hsg, cfg, solver_cfg)?;
                    log::info!("hsg N_r={n_r} N_o={order}: node range {:?}", s.node_range);
                    (s.cost(), m)
                };
                emit("hsg", variant_label(method), cost, m, Some(start.elapsed().as_secs_f64()))?;
            }
        }
    }
    Ok(rows)
}

/// Plain-text table of a `convergence.csv`.
pub fn format_report(rows: &[ErrorReport]) -> String {
    let mut s = format!(
        "{:<11} {:<14} {:>6} {:>12} {:>12} {:>10} {:>10}\n",
        "method", "variant", "cost", "error_mean", "error_std", "rel_mean", "rel_std"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<11} {:<14} {:>6} {:>12.4e} {:>12.4e} {:>10.4} {:>10.4}\n",
            r.method, r.variant, r.cost, r.error_mean, r.error_std, r.rel_error_mean, r.rel_error_std
        ));
    }
    s
}
