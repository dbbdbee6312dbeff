//! Spatially adaptive sparse-grid interpolation with boundary, interior and
//! modified piecewise-polynomial bases.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, Surrogate};
use crate::physics::UncertainInput;
use crate::scalar::Scalar;
use crate::stochastic::SampleSet;

pub const DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisVariant {
    /// Level-0 points on the faces of the cube plus interior hats.
    Boundary,
    /// Interior hats only; the interpolant vanishes on the faces.
    Interior,
    /// Interior points only, with the outermost functions of every level
    /// extrapolating linearly towards the faces.
    Modified,
}

impl std::str::FromStr for BasisVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boundary" => Ok(Self::Boundary),
            "interior" => Ok(Self::Interior),
            "modified" => Ok(Self::Modified),
            other => Err(Error::InvalidConfig(format!("unknown sparse-grid variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for BasisVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Boundary => "boundary",
            Self::Interior => "interior",
            Self::Modified => "modified",
        })
    }
}

/// A level-index pair `(ℓ, i)`; the grid point is `x_j = i_j·2^{−ℓ_j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelIndex {
    pub level: [u32; DIM],
    pub index: [u32; DIM],
}

fn valid_1d(level: u32, index: u32, variant: BasisVariant) -> bool {
    if level == 0 {
        variant == BasisVariant::Boundary && index <= 1
    } else {
        level < 31 && index % 2 == 1 && index < (1 << level)
    }
}

/// 1D hierarchical parents: two boundary points for the level-1 centre of a
/// boundary grid, one point otherwise.
fn parents_1d(level: u32, index: u32, variant: BasisVariant) -> Vec<(u32, u32)> {
    match level {
        0 => Vec::new(),
        1 if variant == BasisVariant::Boundary => vec![(0, 0), (0, 1)],
        1 => Vec::new(),
        _ => {
            let lo = (index - 1) / 2;
            let p = if lo % 2 == 1 { lo } else { lo + 1 };
            vec![(level - 1, p)]
        }
    }
}

/// 1D hierarchical successors that exist in the variant.
fn children_1d(level: u32, index: u32) -> Vec<(u32, u32)> {
    if level == 0 {
        vec![(1, 1)]
    } else {
        vec![(level + 1, 2 * index - 1), (level + 1, 2 * index + 1)]
    }
}

impl LevelIndex {
    pub fn new(level: [u32; DIM], index: [u32; DIM]) -> Self {
        Self { level, index }
    }

    pub fn root() -> Self {
        Self::new([1; DIM], [1; DIM])
    }

    pub fn is_valid(&self, variant: BasisVariant) -> bool {
        (0..DIM).all(|d| valid_1d(self.level[d], self.index[d], variant))
    }

    pub fn coords(&self) -> [f64; DIM] {
        std::array::from_fn(|d| self.index[d] as f64 / (1u64 << self.level[d]) as f64)
    }

    pub fn level_sum(&self) -> u32 {
        self.level.iter().sum()
    }

    fn with(&self, dim: usize, level: u32, index: u32) -> Self {
        let mut out = *self;
        out.level[dim] = level;
        out.index[dim] = index;
        out
    }

    /// Parents in direction `dim`.
    pub fn parents(&self, dim: usize, variant: BasisVariant) -> Vec<Self> {
        parents_1d(self.level[dim], self.index[dim], variant)
            .into_iter()
            .map(|(l, i)| self.with(dim, l, i))
            .collect()
    }

    /// Successors `(ℓ_m+1, 2i_m±1)` in direction `dim`.
    pub fn successors(&self, dim: usize) -> Vec<Self> {
        children_1d(self.level[dim], self.index[dim])
            .into_iter()
            .map(|(l, i)| self.with(dim, l, i))
            .collect()
    }

    pub fn all_successors(&self) -> Vec<Self> {
        (0..DIM).flat_map(|d| self.successors(d)).collect()
    }
}

/// Univariate basis function `φ_{ℓ,i}(x)`.
///
/// `max_degree = 1` gives piecewise-linear functions; larger values raise the
/// degree of interior hat functions to `min(ℓ+1, max_degree)`.
pub fn basis_1d(level: u32, index: u32, x: f64, variant: BasisVariant, max_degree: u32) -> f64 {
    if level == 0 {
        return match (variant, index) {
            (BasisVariant::Boundary, 0) if (0.0..=1.0).contains(&x) => 1.0 - x,
            (BasisVariant::Boundary, 1) if (0.0..=1.0).contains(&x) => x,
            _ => 0.0,
        };
    }
    let n = (1u64 << level) as f64;
    let h = 1.0 / n;
    if variant == BasisVariant::Modified {
        if level == 1 {
            return if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 };
        }
        let last = (1u32 << level) - 1;
        if index == 1 {
            return if (0.0..2.0 * h).contains(&x) { 2.0 - x * n } else { 0.0 };
        }
        if index == last {
            return if x > 1.0 - 2.0 * h && x <= 1.0 { 2.0 - (1.0 - x) * n } else { 0.0 };
        }
    }
    let t = (x * n - index as f64).abs();
    if t >= 1.0 {
        return 0.0;
    }
    let degree = (level + 1).min(max_degree.max(1));
    if degree == 1 {
        return 1.0 - t;
    }
    // Lagrange-type bump vanishing at the support ends and further
    // ancestor positions
    let centre = index as f64 * h;
    let mut roots = vec![centre - h, centre + h];
    let (mut l, mut i) = (level, index);
    while roots.len() < degree as usize && l > 1 {
        let (pl, pi) = parents_1d(l, i, BasisVariant::Interior)[0];
        let ph = 1.0 / (1u64 << pl) as f64;
        let pc = pi as f64 * ph;
        for q in [pc - ph, pc + ph] {
            if roots.len() < degree as usize && !roots.iter().any(|r| (r - q).abs() < 1e-15) {
                roots.push(q);
            }
        }
        l = pl;
        i = pi;
    }
    roots.iter().map(|r| (x - r) / (centre - r)).product()
}

/// Tensor-product basis function at a point of the unit cube.
pub fn basis_eval(li: &LevelIndex, x: &[f64; DIM], variant: BasisVariant, max_degree: u32) -> f64 {
    let mut v = 1.0;
    for d in 0..DIM {
        v *= basis_1d(li.level[d], li.index[d], x[d], variant, max_degree);
        if v == 0.0 {
            return 0.0;
        }
    }
    v
}

/// Regular sparse grid of level `level`: all pairs with `|ℓ|₁ ≤ level+d−1`,
/// where level-0 boundary directions count as level 1.
pub fn regular_grid_dim(level: u32, variant: BasisVariant, dims: usize) -> Result<Vec<(Vec<u32>, Vec<u32>)>> {
    if level < 1 {
        return Err(Error::InvalidConfig("regular sparse grids need level >= 1".into()));
    }
    let bound = level + dims as u32 - 1;
    let min_level = if variant == BasisVariant::Boundary { 0 } else { 1 };
    let mut out = Vec::new();
    let mut levels = vec![min_level; dims];
    loop {
        let sum: u32 = levels.iter().map(|&l| l.max(1)).sum();
        if sum <= bound {
            let mut idx = vec![0u32; dims];
            let counts: Vec<u32> = levels.iter().map(|&l| if l == 0 { 2 } else { 1 << (l - 1) }).collect();
            loop {
                let index: Vec<u32> = (0..dims)
                    .map(|d| if levels[d] == 0 { idx[d] } else { 2 * idx[d] + 1 })
                    .collect();
                out.push((levels.clone(), index));
                let mut d = 0;
                while d < dims {
                    idx[d] += 1;
                    if idx[d] < counts[d] {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == dims {
                    break;
                }
            }
        }
        let mut d = 0;
        while d < dims {
            levels[d] += 1;
            if levels[d] <= bound {
                break;
            }
            levels[d] = min_level;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    Ok(out)
}

pub fn regular_grid(level: u32, variant: BasisVariant) -> Result<Vec<LevelIndex>> {
    Ok(regular_grid_dim(level, variant, DIM)?
        .into_iter()
        .map(|(l, i)| LevelIndex::new([l[0], l[1], l[2]], [i[0], i[1], i[2]]))
        .collect())
}

/// Affine map between the parameter box and the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    pub lower: [f64; DIM],
    pub upper: [f64; DIM],
}

impl InputBox {
    /// Componentwise bounds of `set`, widened by `margin` times the width on
    /// each side.
    pub fn from_samples<T: Scalar>(set: &SampleSet<T>, margin: f64) -> Self {
        let b = set.bounds();
        let mut lower = [0.0; DIM];
        let mut upper = [0.0; DIM];
        for d in 0..DIM {
            let (lo, hi) = (b[d].0.f64(), b[d].1.f64());
            let w = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
            lower[d] = lo - margin * w;
            upper[d] = hi + margin * w;
        }
        Self { lower, upper }
    }

    pub fn to_unit(&self, omega: [f64; DIM]) -> [f64; DIM] {
        std::array::from_fn(|d| (omega[d] - self.lower[d]) / (self.upper[d] - self.lower[d]))
    }

    pub fn from_unit(&self, x: [f64; DIM]) -> [f64; DIM] {
        std::array::from_fn(|d| self.lower[d] + x[d] * (self.upper[d] - self.lower[d]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseGridConfig {
    pub variant: BasisVariant,
    /// 1 for piecewise-linear functions, up to 3.
    pub max_degree: u32,
    /// Pairs refined per iteration.
    pub refine_per_step: usize,
    /// Relative widening of the sample bounding box.
    pub box_margin: f64,
}

impl Default for SparseGridConfig {
    fn default() -> Self {
        Self {
            variant: BasisVariant::Modified,
            max_degree: 1,
            refine_per_step: 2,
            box_margin: 0.01,
        }
    }
}

impl SparseGridConfig {
    pub fn with_variant(variant: BasisVariant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.max_degree) {
            return Err(Error::InvalidConfig(format!("max_degree = {} must lie in 1..=3", self.max_degree)));
        }
        if self.refine_per_step == 0 {
            return Err(Error::InvalidConfig("refine_per_step must be positive".into()));
        }
        if !(self.box_margin >= 0.0) {
            return Err(Error::InvalidConfig("box_margin must be non-negative".into()));
        }
        Ok(())
    }
}

/// `U_I(ω) = Σ v_{ℓ,i} φ_{ℓ,i}(x(ω))` with vector-valued coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseGridSurrogate {
    pub config: SparseGridConfig,
    pub input_box: InputBox,
    pub points: Vec<LevelIndex>,
    pub coefficients: Vec<Vec<f64>>,
    /// `√(mean_Θ φ²)` per point.
    pub weights: Vec<f64>,
    #[serde(skip)]
    lookup: HashMap<LevelIndex, usize>,
}

impl SparseGridSurrogate {
    pub fn new(config: SparseGridConfig, input_box: InputBox) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            input_box,
            points: Vec::new(),
            coefficients: Vec::new(),
            weights: Vec::new(),
            lookup: HashMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, li: &LevelIndex) -> bool {
        self.lookup.contains_key(li)
    }

    pub fn n_outputs(&self) -> usize {
        self.coefficients.first().map_or(0, |c| c.len())
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self.points.iter().enumerate().map(|(k, p)| (*p, k)).collect();
    }

    pub fn phi(&self, li: &LevelIndex, x: &[f64; DIM]) -> f64 {
        basis_eval(li, x, self.config.variant, self.config.max_degree)
    }

    /// Parameter-space location of a grid point.
    pub fn parameter_point(&self, li: &LevelIndex) -> [f64; DIM] {
        self.input_box.from_unit(li.coords())
    }

    pub fn eval_unit(&self, x: &[f64; DIM]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_outputs()];
        for (p, v) in self.points.iter().zip(&self.coefficients) {
            let phi = self.phi(p, x);
            if phi != 0.0 {
                out.iter_mut().zip(v).for_each(|(o, c)| *o += phi * c);
            }
        }
        out
    }

    pub fn predict_f64(&self, omega: [f64; DIM]) -> Vec<f64> {
        self.eval_unit(&self.input_box.to_unit(omega))
    }

    /// Every hierarchical ancestor of every point is present.
    pub fn is_downward_closed(&self) -> bool {
        is_downward_closed(&self.points, self.config.variant)
    }

    /// No point has exactly one of its two successors in any direction.
    pub fn is_balanced(&self) -> bool {
        is_balanced(&self.points, self.config.variant)
    }

    /// Appends points with their nodal values and computes their surpluses.
    /// Existing surpluses are unaffected because new points are never
    /// ancestors of old ones in a downward-closed set.
    pub fn insert(&mut self, new_points: &[LevelIndex], values: &[Vec<f64>]) -> Result<()> {
        if new_points.len() != values.len() {
            return Err(Error::InvalidConfig(format!(
                "{} points but {} values",
                new_points.len(),
                values.len()
            )));
        }
        let n_out = values.first().map_or(self.n_outputs(), |v| v.len());
        if values.iter().any(|v| v.len() != n_out) || (!self.is_empty() && n_out != self.n_outputs()) {
            return Err(Error::GridMismatch("nodal value vectors differ in length".into()));
        }
        let mut order: Vec<usize> = (0..new_points.len()).collect();
        order.sort_by_key(|&k| (new_points[k].level_sum(), new_points[k]));
        for k in order {
            let p = new_points[k];
            if !p.is_valid(self.config.variant) || self.contains(&p) {
                return Err(Error::InvalidConfig(format!("invalid or duplicate grid point {p:?}")));
            }
            let x = p.coords();
            let mut v = values[k].clone();
            for (q, c) in self.points.iter().zip(&self.coefficients) {
                let phi = self.phi(q, &x);
                if phi != 0.0 {
                    v.iter_mut().zip(c).for_each(|(a, b)| *a -= phi * b);
                }
            }
            self.lookup.insert(p, self.points.len());
            self.points.push(p);
            self.coefficients.push(v);
            self.weights.push(0.0);
        }
        if !self.is_downward_closed() {
            return Err(Error::InvalidConfig("grid points are not closed under ancestors".into()));
        }
        Ok(())
    }

    /// Sets `w = √(mean over Θ of φ²)` for every point still lacking one
    /// (all points when `recompute`).
    pub fn update_weights(&mut self, unit_samples: &[[f64; DIM]], recompute: bool) {
        let m = unit_samples.len().max(1) as f64;
        for k in 0..self.points.len() {
            if self.weights[k] != 0.0 && !recompute {
                continue;
            }
            let p = self.points[k];
            let s: f64 = unit_samples.iter().map(|x| self.phi(&p, x).powi(2)).sum();
            // a tiny floor marks the weight as computed
            self.weights[k] = (s / m).sqrt().max(f64::MIN_POSITIVE);
        }
    }

    /// Points lacking at least one successor, by descending `‖v‖₂·w`
    /// (ties in lexicographic level-index order).
    pub fn rank_candidates(&self) -> Vec<(LevelIndex, f64)> {
        let mut out: Vec<(LevelIndex, f64)> = self
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.all_successors().iter().any(|s| !self.contains(s)))
            .map(|(k, p)| {
                let norm = self.coefficients[k].iter().map(|c| c * c).sum::<f64>().sqrt();
                (*p, norm * self.weights[k])
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// New points from refining the `k` best candidates, closed under
    /// ancestors and balanced. The grid itself is not modified.
    pub fn refine(&self, k: usize) -> Vec<LevelIndex> {
        let variant = self.config.variant;
        let mut added: BTreeSet<LevelIndex> = BTreeSet::new();
        for (p, _) in self.rank_candidates().into_iter().take(k) {
            for s in p.all_successors() {
                if !self.contains(&s) {
                    added.insert(s);
                }
            }
        }
        let has = |q: &LevelIndex, added: &BTreeSet<LevelIndex>| self.contains(q) || added.contains(q);
        loop {
            let mut extra: BTreeSet<LevelIndex> = BTreeSet::new();
            // ancestor closure
            let mut stack: Vec<LevelIndex> = added.iter().copied().collect();
            while let Some(q) = stack.pop() {
                for d in 0..DIM {
                    for a in q.parents(d, variant) {
                        if !has(&a, &added) && extra.insert(a) {
                            stack.push(a);
                        }
                    }
                }
            }
            added.extend(extra);
            // balancing
            let mut missing: BTreeSet<LevelIndex> = BTreeSet::new();
            for q in self.points.iter().chain(added.iter()) {
                for d in 0..DIM {
                    let succ = q.successors(d);
                    if succ.len() == 2 {
                        let present = succ.iter().filter(|s| has(s, &added)).count();
                        if present == 1 {
                            missing.extend(succ.into_iter().filter(|s| !has(s, &added)));
                        }
                    }
                }
            }
            if missing.is_empty() {
                break;
            }
            added.extend(missing);
        }
        added.into_iter().collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut s: Self = serde_json::from_reader(file)?;
        s.rebuild_lookup();
        Ok(s)
    }
}

impl<T: Scalar> Surrogate<T> for SparseGridSurrogate {
    fn predict(&self, omega: &UncertainInput<T>) -> Result<Vec<T>> {
        Ok(self
            .predict_f64(omega.to_array().map(|v| v.f64()))
            .into_iter()
            .map(T::of)
            .collect())
    }
}

pub fn is_downward_closed(points: &[LevelIndex], variant: BasisVariant) -> bool {
    let set: BTreeSet<&LevelIndex> = points.iter().collect();
    points
        .iter()
        .all(|p| (0..DIM).all(|d| p.parents(d, variant).iter().all(|a| set.contains(a))))
}

pub fn is_balanced(points: &[LevelIndex], _variant: BasisVariant) -> bool {
    let set: BTreeSet<&LevelIndex> = points.iter().collect();
    points.iter().all(|p| {
        (0..DIM).all(|d| {
            let succ = p.successors(d);
            succ.len() < 2 || succ.iter().filter(|s| set.contains(s)).count() != 1
        })
    })
}

/// Builds the interpolant on a fixed downward-closed set from nodal values.
pub fn hierarchize(
    config: SparseGridConfig,
    input_box: InputBox,
    points: &[LevelIndex],
    values: &[Vec<f64>],
) -> Result<SparseGridSurrogate> {
    if !is_downward_closed(points, config.variant) {
        return Err(Error::InvalidConfig(
            "hierarchization needs a set closed under hierarchical ancestors".into(),
        ));
    }
    let mut s = SparseGridSurrogate::new(config, input_box)?;
    s.insert(points, values)?;
    Ok(s)
}

/// One iteration of the adaptive loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub grid_size: usize,
    pub new_points: usize,
    pub best_score: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub surrogate: SparseGridSurrogate,
    pub history: Vec<IterationRecord>,
    /// `(requested budget, surrogate)` for each checkpoint, captured at the
    /// first iteration whose grid reaches the budget.
    pub snapshots: Vec<(usize, SparseGridSurrogate)>,
}

impl AdaptiveRun {
    pub fn write_history_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for rec in &self.history {
            w.serialize(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_points<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    grid: &SparseGridSurrogate,
    points: &[LevelIndex],
) -> Result<Vec<Vec<f64>>> {
    let inputs: Vec<UncertainInput<T>> = points
        .iter()
        .map(|p| UncertainInput::from_array(grid.parameter_point(p).map(T::of)))
        .collect();
    Ok(model
        .evaluate_batch(&inputs)?
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.f64()).collect())
        .collect())
}

/// Starts from the level-1 regular grid and refines until the grid holds at
/// least `budget` points.
pub fn adaptive_loop<T: Scalar, M: Model<T> + ?Sized>(
    set: &SampleSet<T>,
    model: &M,
    config: SparseGridConfig,
    budget: usize,
    checkpoints: &[usize],
) -> Result<AdaptiveRun> {
    let input_box = InputBox::from_samples(set, config.box_margin);
    let mut grid = SparseGridSurrogate::new(config, input_box)?;
    let initial = regular_grid(1, config.variant)?;
    if budget < initial.len() {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} is below the {} points of the level-1 grid",
            initial.len()
        )));
    }
    let unit: Vec<[f64; DIM]> = set
        .samples
        .iter()
        .map(|w| input_box.to_unit(w.to_array().map(|v| v.f64())))
        .collect();
    let values = run_points(model, &grid, &initial)?;
    grid.insert(&initial, &values)?;
    grid.update_weights(&unit, false);

    let mut pending: Vec<usize> = checkpoints.to_vec();
    pending.sort_unstable();
    pending.dedup();
    let mut snapshots = Vec::new();
    let mut history = vec![IterationRecord {
        iteration: 0,
        grid_size: grid.len(),
        new_points: grid.len(),
        best_score: f64::NAN,
    }];
    let take = |grid: &SparseGridSurrogate, pending: &mut Vec<usize>, snapshots: &mut Vec<(usize, SparseGridSurrogate)>| {
        while let Some(&b) = pending.first() {
            if grid.len() >= b {
                snapshots.push((b, grid.clone()));
                pending.remove(0);
            } else {
                break;
            }
        }
    };
    take(&grid, &mut pending, &mut snapshots);
    let mut iteration = 0;
    while grid.len() < budget {
        iteration += 1;
        let best_score = grid.rank_candidates().first().map_or(0.0, |c| c.1);
        let new_points = grid.refine(config.refine_per_step);
        if new_points.is_empty() {
            log::warn!("sparse grid cannot be refined further at {} points", grid.len());
            break;
        }
        let values = run_points(model, &grid, &new_points)?;
        grid.insert(&new_points, &values)?;
        grid.update_weights(&unit, false);
        history.push(IterationRecord {
            iteration,
            grid_size: grid.len(),
            new_points: new_points.len(),
            best_score,
        });
        log::debug!("sparse grid iteration {iteration}: {} points", grid.len());
        take(&grid, &mut pending, &mut snapshots);
    }
    for b in pending {
        snapshots.push((b, grid.clone()));
    }
    Ok(AdaptiveRun {
        surrogate: grid,
        history,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::stochastic::{generate_samples, DistributionSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_box() -> InputBox {
        InputBox {
            lower: [0.0; DIM],
            upper: [1.0; DIM],
        }
    }

    /// Brute-force count of pairs with `Σ max(ℓ_j,1) ≤ n+d−1`.
    fn enumerate(n: u32, dims: usize, boundary: bool) -> usize {
        let bound = n + dims as u32 - 1;
        let min = if boundary { 0 } else { 1 };
        let mut count = 0;
        let levels: Vec<u32> = (min..=bound).collect();
        let mut stack = vec![(0usize, 0u32, 1usize)];
        while let Some((d, sum, points)) = stack.pop() {
            if d == dims {
                count += points;
                continue;
            }
            for &l in &levels {
                let s = sum + l.max(1);
                if s + (dims - d - 1) as u32 <= bound {
                    let p = if l == 0 { 2 } else { 1usize << (l - 1) };
                    stack.push((d + 1, s, points * p));
                }
            }
        }
        count
    }

    #[test]
    fn regular_grid_sizes() {
        assert_eq!(regular_grid(1, BasisVariant::Modified).unwrap().len(), 1);
        assert_eq!(regular_grid(2, BasisVariant::Interior).unwrap().len(), 7);
        assert_eq!(regular_grid_dim(1, BasisVariant::Boundary, 1).unwrap().len(), 3);
        assert_eq!(regular_grid(1, BasisVariant::Boundary).unwrap().len(), 27);
        for dims in 1..=3 {
            for n in 1..=5 {
                for v in [BasisVariant::Interior, BasisVariant::Boundary] {
                    let g = regular_grid_dim(n, v, dims).unwrap();
                    assert_eq!(g.len(), enumerate(n, dims, v == BasisVariant::Boundary), "n={n} d={dims} {v}");
                    let mut u = g.clone();
                    u.sort();
                    u.dedup();
                    assert_eq!(u.len(), g.len());
                }
            }
        }
    }

    #[test]
    fn regular_grids_are_closed_and_valid() {
        for v in [BasisVariant::Interior, BasisVariant::Boundary, BasisVariant::Modified] {
            let g = regular_grid(4, v).unwrap();
            assert!(g.iter().all(|p| p.is_valid(v)));
            assert!(is_downward_closed(&g, v));
        }
    }

    #[test]
    fn nodal_property_and_support() {
        for v in [BasisVariant::Interior, BasisVariant::Boundary, BasisVariant::Modified] {
            for deg in 1..=3 {
                let g = regular_grid(3, v).unwrap();
                for p in &g {
                    assert!((basis_eval(p, &p.coords(), v, deg) - 1.0).abs() < 1e-14, "{p:?} {v} {deg}");
                    for q in &g {
                        if q != p && q.level.iter().zip(&p.level).all(|(a, b)| a <= b) {
                            assert_eq!(basis_eval(p, &q.coords(), v, deg), 0.0, "{p:?} at {q:?}");
                        }
                    }
                }
            }
        }
        let p = LevelIndex::new([2, 2, 2], [1, 1, 1]);
        assert_eq!(basis_eval(&p, &[0.6, 0.1, 0.1], BasisVariant::Interior, 1), 0.0);
    }

    #[test]
    fn root_function_matches_tensor_formula() {
        let root = LevelIndex::root();
        let hat = |x: f64| (1.0 - (2.0 * x - 1.0).abs()).max(0.0);
        for x in [[0.5, 0.5, 0.5], [0.5, 0.5, 0.0], [0.25, 0.5, 0.75], [0.1, 0.9, 0.3]] {
            let direct = hat(x[0]) * hat(x[1]) * hat(x[2]);
            assert!((basis_eval(&root, &x, BasisVariant::Interior, 1) - direct).abs() < 1e-15);
            assert_eq!(basis_eval(&root, &x, BasisVariant::Modified, 1), 1.0);
            let quad = |t: f64| 4.0 * t * (1.0 - t);
            let q = quad(x[0]) * quad(x[1]) * quad(x[2]);
            assert!((basis_eval(&root, &x, BasisVariant::Interior, 3) - q).abs() < 1e-14);
        }
    }

    #[test]
    fn modified_basis_extrapolates_linearly() {
        assert_eq!(basis_1d(2, 1, 0.0, BasisVariant::Modified, 1), 2.0);
        assert_eq!(basis_1d(2, 1, 0.25, BasisVariant::Modified, 1), 1.0);
        assert_eq!(basis_1d(2, 1, 0.5, BasisVariant::Modified, 1), 0.0);
        assert_eq!(basis_1d(2, 3, 1.0, BasisVariant::Modified, 1), 2.0);
        assert_eq!(basis_1d(3, 3, 0.375, BasisVariant::Modified, 1), 1.0);
    }

    #[test]
    fn successor_formula() {
        let p = LevelIndex::new([2, 1, 3], [3, 1, 5]);
        assert_eq!(
            p.successors(2),
            vec![LevelIndex::new([2, 1, 4], [3, 1, 9]), LevelIndex::new([2, 1, 4], [3, 1, 11])]
        );
        let c = LevelIndex::new([2, 1, 4], [3, 1, 9]);
        assert_eq!(c.parents(2, BasisVariant::Modified), vec![p]);
        let b = LevelIndex::new([1, 1, 1], [1, 1, 1]);
        assert_eq!(b.parents(0, BasisVariant::Boundary).len(), 2);
        assert!(b.parents(0, BasisVariant::Modified).is_empty());
    }

    #[test]
    fn refining_the_root_adds_level_two() {
        let model: Vec<Vec<f64>> = vec![vec![1.0]];
        let mut s = hierarchize(SparseGridConfig::default(), unit_box(), &[LevelIndex::root()], &model).unwrap();
        s.update_weights(&[[0.5; 3]], false);
        let new = s.refine(2);
        assert_eq!(new.len(), 6);
        assert!(new.contains(&LevelIndex::new([2, 1, 1], [1, 1, 1])));
        assert!(new.contains(&LevelIndex::new([2, 1, 1], [3, 1, 1])));
    }

    #[test]
    fn single_point_surplus_is_the_value() {
        let s = hierarchize(SparseGridConfig::default(), unit_box(), &[LevelIndex::root()], &[vec![0.7, 0.1]]).unwrap();
        assert_eq!(s.coefficients[0], vec![0.7, 0.1]);
    }

    #[test]
    fn basis_multiple_has_one_surplus() {
        let cfg = SparseGridConfig::with_variant(BasisVariant::Interior);
        let g = regular_grid(3, cfg.variant).unwrap();
        let target = LevelIndex::new([2, 1, 1], [3, 1, 1]);
        let values: Vec<Vec<f64>> = g.iter().map(|p| vec![2.5 * basis_eval(&target, &p.coords(), cfg.variant, 1)]).collect();
        let s = hierarchize(cfg, unit_box(), &g, &values).unwrap();
        for (p, c) in s.points.iter().zip(&s.coefficients) {
            let expect = if *p == target { 2.5 } else { 0.0 };
            assert!((c[0] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn hierarchize_rejects_open_sets() {
        let pts = [LevelIndex::new([2, 1, 1], [1, 1, 1])];
        assert!(hierarchize(SparseGridConfig::default(), unit_box(), &pts, &[vec![1.0]]).is_err());
    }

    #[test]
    fn random_values_are_interpolated() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for v in [BasisVariant::Interior, BasisVariant::Boundary, BasisVariant::Modified] {
            for deg in [1, 3] {
                let cfg = SparseGridConfig {
                    variant: v,
                    max_degree: deg,
                    ..SparseGridConfig::default()
                };
                let g = regular_grid(3, v).unwrap();
                let values: Vec<Vec<f64>> = g.iter().map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
                let s = hierarchize(cfg, unit_box(), &g, &values).unwrap();
                for (p, val) in g.iter().zip(&values) {
                    let e = s.eval_unit(&p.coords());
                    assert!((e[0] - val[0]).abs() < 1e-10 && (e[1] - val[1]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn ranking_prefers_large_surplus_and_is_scale_invariant() {
        let cfg = SparseGridConfig::with_variant(BasisVariant::Interior);
        let g = regular_grid(2, cfg.variant).unwrap();
        let zeros: Vec<Vec<f64>> = g.iter().map(|_| vec![0.0]).collect();
        let mut s = hierarchize(cfg, unit_box(), &g, &zeros).unwrap();
        let unit: Vec<[f64; 3]> = (0..200).map(|k| [(k as f64 + 0.5) / 200.0, 0.4, 0.6]).collect();
        s.update_weights(&unit, true);
        let ranked = s.rank_candidates();
        let mut lex: Vec<LevelIndex> = ranked.iter().map(|c| c.0).collect();
        lex.sort();
        assert_eq!(ranked.iter().map(|c| c.0).collect::<Vec<_>>(), lex);

        let values: Vec<Vec<f64>> = g.iter().map(|p| vec![p.coords()[0].powi(2) + p.coords()[2]]).collect();
        let a = hierarchize(cfg, unit_box(), &g, &values).unwrap();
        let scaled: Vec<Vec<f64>> = values.iter().map(|v| vec![v[0] * 37.0]).collect();
        let mut b = hierarchize(cfg, unit_box(), &g, &scaled).unwrap();
        let mut a = a;
        a.update_weights(&unit, true);
        b.update_weights(&unit, true);
        let ra: Vec<LevelIndex> = a.rank_candidates().into_iter().map(|c| c.0).collect();
        let rb: Vec<LevelIndex> = b.rank_candidates().into_iter().map(|c| c.0).collect();
        assert_eq!(ra, rb);
    }

    #[test]
    fn one_nonzero_surplus_is_ranked_first() {
        let cfg = SparseGridConfig::with_variant(BasisVariant::Interior);
        let g = regular_grid(2, cfg.variant).unwrap();
        let target = LevelIndex::new([1, 2, 1], [1, 3, 1]);
        let values: Vec<Vec<f64>> = g.iter().map(|p| vec![basis_eval(&target, &p.coords(), cfg.variant, 1)]).collect();
        let mut s = hierarchize(cfg, unit_box(), &g, &values).unwrap();
        s.update_weights(&[[0.5, 0.75, 0.5]], true);
        assert_eq!(s.rank_candidates()[0].0, target);
    }

    fn smooth_model() -> impl Fn(&UncertainInput<f64>) -> Vec<f64> + Sync {
        |w: &UncertainInput<f64>| vec![(3.0 * w.omega1).sin() + w.omega2 * w.omega3 * 4.0, (-(w.omega2 - 3.0).powi(2)).exp()]
    }

    #[test]
    fn adaptive_loop_keeps_structure_and_interpolates() {
        let set = generate_samples::<f64>(&DistributionSpec::default(), 500, 5).unwrap();
        let model = FnModel::new(2, smooth_model());
        for v in [BasisVariant::Boundary, BasisVariant::Modified] {
            let run = adaptive_loop(&set, &model, SparseGridConfig::with_variant(v), 150, &[40, 100]).unwrap();
            let s = &run.surrogate;
            assert!(s.len() >= 150);
            assert!(s.is_downward_closed() && s.is_balanced());
            assert_eq!(run.snapshots.len(), 2);
            assert!(run.snapshots[0].1.len() >= 40);
            for p in &s.points {
                let w = UncertainInput::from_array(s.parameter_point(p));
                let exact = smooth_model()(&w);
                let e = s.eval_unit(&p.coords());
                assert!((e[0] - exact[0]).abs() < 1e-10 && (e[1] - exact[1]).abs() < 1e-10);
            }
            let sizes: Vec<usize> = run.history.iter().map(|h| h.grid_size).collect();
            assert!(sizes.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn minimal_budget_returns_level_one_grid() {
        let set = generate_samples::<f64>(&DistributionSpec::default(), 100, 5).unwrap();
        let model = FnModel::new(2, smooth_model());
        let run = adaptive_loop(&set, &model, SparseGridConfig::default(), 1, &[]).unwrap();
        assert_eq!(run.surrogate.len(), 1);
        assert_eq!(run.history.len(), 1);
        let err = adaptive_loop(&set, &model, SparseGridConfig::with_variant(BasisVariant::Boundary), 5, &[]).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn modified_surrogate_is_finite_on_faces() {
        let set = generate_samples::<f64>(&DistributionSpec::default(), 300, 9).unwrap();
        let model = FnModel::new(2, smooth_model());
        let run = adaptive_loop(&set, &model, SparseGridConfig::default(), 60, &[]).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.5, 1.0], [1.0, 0.3, 0.0]] {
            assert!(run.surrogate.eval_unit(&x).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn json_round_trip_restores_lookup() {
        let set = generate_samples::<f64>(&DistributionSpec::default(), 200, 2).unwrap();
        let model = FnModel::new(2, smooth_model());
        let run = adaptive_loop(&set, &model, SparseGridConfig::default(), 30, &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        run.surrogate.save(&path).unwrap();
        let back = SparseGridSurrogate::load(&path).unwrap();
        assert!(back.contains(&LevelIndex::root()));
        let w = [0.05, 2.2, 0.13];
        assert_eq!(back.predict_f64(w), run.surrogate.predict_f64(w));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn refinement_preserves_closure_and_balance(seed in 0u64..1000, steps in 1usize..8, boundary in any::<bool>()) {
            let v = if boundary { BasisVariant::Boundary } else { BasisVariant::Modified };
            let cfg = SparseGridConfig::with_variant(v);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let init = regular_grid(1, v).unwrap();
            let vals: Vec<Vec<f64>> = init.iter().map(|_| vec![rng.random::<f64>()]).collect();
            let mut s = hierarchize(cfg, unit_box(), &init, &vals).unwrap();
            let unit: Vec<[f64; 3]> = (0..50).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
            s.update_weights(&unit, false);
            for _ in 0..steps {
                let new = s.refine(2);
                let vals: Vec<Vec<f64>> = new.iter().map(|_| vec![rng.random::<f64>()]).collect();
                s.insert(&new, &vals).unwrap();
                s.update_weights(&unit, false);
                prop_assert!(s.is_downward_closed());
                prop_assert!(s.is_balanced());
            }
        }
    }
}
