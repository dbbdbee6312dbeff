//! Vectorial kernel interpolation with P-greedy center selection on a
//! Newton basis, using the Wendland C² kernel.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::ConvexHull;
use crate::model::{Model, Surrogate};
use crate::physics::UncertainInput;
use crate::scalar::Scalar;
use crate::sparsegrid::InputBox;
use crate::stochastic::SampleSet;

/// Power-function saturation threshold for `P²`.
pub const SATURATION: f64 = 1e-14;
pub const DEFAULT_DELTAS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_CHECKPOINTS: [usize; 6] = [1, 4, 16, 64, 252, 1000];

type P3 = [f64; 3];

/// How δ enters the scaled distance `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DeltaConvention {
    /// `s = δ·‖x−y‖`, support radius `1/δ`.
    #[default]
    Scale,
    /// `s = ‖x−y‖/δ`, support radius `δ`.
    Radius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub delta: f64,
    #[serde(default)]
    pub convention: DeltaConvention,
}

/// `(1−s)₊⁴ (4s+1)`.
#[inline]
pub fn wendland_c2(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s;
        let t2 = t * t;
        t2 * t2 * (4.0 * s + 1.0)
    }
}

impl KernelSpec {
    pub fn new(delta: f64) -> Result<Self> {
        Self::with_convention(delta, DeltaConvention::Scale)
    }

    pub fn with_convention(delta: f64, convention: DeltaConvention) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("kernel shape delta = {delta} must be positive")));
        }
        Ok(Self { delta, convention })
    }

    #[inline]
    pub fn eval(&self, x: &P3, y: &P3) -> f64 {
        let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        let s = match self.convention {
            DeltaConvention::Scale => self.delta * r,
            DeltaConvention::Radius => r / self.delta,
        };
        wendland_c2(s)
    }
}

/// Candidate points for the greedy search, in unit-cube coordinates.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub input_box: InputBox,
    pub points: Vec<P3>,
    pub hull_facets: usize,
    pub resolution: usize,
}

/// Points of a `resolution³` grid on the bounding box of Θ that lie inside
/// the convex hull of Θ, in lexicographic grid order.
pub fn build_candidates<T: Scalar>(set: &SampleSet<T>, resolution: usize) -> Result<CandidateSet> {
    if resolution < 2 {
        return Err(Error::InvalidConfig("candidate grid resolution must be at least 2".into()));
    }
    let input_box = InputBox::from_samples(set, 0.0);
    let unit: Vec<P3> = set
        .samples
        .iter()
        .map(|w| input_box.to_unit(w.to_array().map(|v| v.f64())))
        .collect();
    let hull = ConvexHull::new(&unit)?;
    let step = 1.0 / (resolution - 1) as f64;
    let coord = |k: usize| if k + 1 == resolution { 1.0 } else { k as f64 * step };
    let points: Vec<P3> = (0..resolution * resolution * resolution)
        .into_par_iter()
        .filter_map(|flat| {
            let (i, j, k) = (flat / (resolution * resolution), (flat / resolution) % resolution, flat % resolution);
            let x = [coord(i), coord(j), coord(k)];
            hull.contains(x).then_some(x)
        })
        .collect();
    Ok(CandidateSet {
        input_box,
        points,
        hull_facets: hull.n_facets(),
        resolution,
    })
}

/// Incremental P-greedy state over a fixed candidate set.
#[derive(Debug, Clone)]
pub struct GreedySelection {
    pub kernel: KernelSpec,
    pub candidates: Vec<P3>,
    /// Current `P²` at every candidate.
    pub power2: Vec<f64>,
    /// `newton[i][x]` = `v_i(x)` over the candidates.
    newton: Vec<Vec<f64>>,
    /// Candidate indices of the chosen centers, in selection order.
    pub selected: Vec<usize>,
    /// `max P²` at the moment each center was chosen.
    pub selected_power2: Vec<f64>,
    pub saturated: bool,
}

impl GreedySelection {
    pub fn new(kernel: KernelSpec, candidates: Vec<P3>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidConfig("empty candidate set".into()));
        }
        let power2 = candidates.iter().map(|x| kernel.eval(x, x)).collect();
        Ok(Self {
            kernel,
            candidates,
            power2,
            newton: Vec::new(),
            selected: Vec::new(),
            selected_power2: Vec::new(),
            saturated: false,
        })
    }

    pub fn n_selected(&self) -> usize {
        self.selected.len()
    }

    /// Largest `P²` and its first index.
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, &p) in self.power2.iter().enumerate() {
            if p > best.1 {
                best = (k, p);
            }
        }
        best
    }

    /// Adds one center; `Ok(None)` once the power function has saturated or
    /// the candidates are exhausted.
    pub fn step(&mut self) -> Result<Option<usize>> {
        if self.saturated || self.selected.len() == self.candidates.len() {
            return Ok(None);
        }
        let (idx, p2) = self.argmax();
        if p2 < SATURATION {
            self.saturated = true;
            return Ok(None);
        }
        let p = p2.sqrt();
        let xstar = self.candidates[idx];
        let weights: Vec<f64> = self.newton.iter().map(|v| v[idx]).collect();
        let kernel = self.kernel;
        let mut v: Vec<f64> = self.candidates.par_iter().map(|x| kernel.eval(x, &xstar)).collect();
        for (w, basis) in weights.iter().zip(&self.newton) {
            v.par_iter_mut().zip(basis.par_iter()).for_each(|(a, b)| *a -= w * b);
        }
        let inv = 1.0 / p;
        v.par_iter_mut()
            .zip(self.power2.par_iter_mut())
            .for_each(|(a, p2)| {
                *a *= inv;
                *p2 = (*p2 - *a * *a).max(0.0);
            });
        self.power2[idx] = 0.0;
        self.newton.push(v);
        self.selected.push(idx);
        self.selected_power2.push(p2);
        Ok(Some(idx))
    }

    /// Runs until `n` centers are chosen or saturation.
    pub fn run_to(&mut self, n: usize) -> Result<usize> {
        while self.selected.len() < n {
            if self.step()?.is_none() {
                break;
            }
        }
        Ok(self.selected.len())
    }

    pub fn centers(&self, n: usize) -> Vec<P3> {
        self.selected[..n.min(self.selected.len())]
            .iter()
            .map(|&k| self.candidates[k])
            .collect()
    }

    /// Lower-triangular `L[j][i] = v_i(x_j)` for the first `n` centers, so
    /// that the kernel matrix is `L Lᵀ`.
    pub fn newton_factor(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|j| (0..=j).map(|i| self.newton[i][self.selected[j]]).collect())
            .collect()
    }

    /// Interpolant on the first `n` centers via `α = L⁻ᵀ L⁻¹ y`.
    pub fn fit(&self, n: usize, outputs: &[Vec<f64>], input_box: InputBox) -> Result<KernelSurrogate> {
        if n == 0 || n > self.selected.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot fit {n} centers, {} selected",
                self.selected.len()
            )));
        }
        if outputs.len() < n {
            return Err(Error::InvalidConfig(format!("{} outputs for {n} centers", outputs.len())));
        }
        let l = self.newton_factor(n);
        let coefficients = solve_newton(&l, &outputs[..n], self.kernel.delta)?;
        Ok(KernelSurrogate {
            kernel: self.kernel,
            input_box,
            centers: self.centers(n),
            coefficients,
            power_max: self.selected_power2[..n].iter().map(|p| p.sqrt()).collect(),
        })
    }
}

fn solve_newton(l: &[Vec<f64>], y: &[Vec<f64>], delta: f64) -> Result<Vec<Vec<f64>>> {
    let n = l.len();
    let d = y.first().map_or(0, |v| v.len());
    if y.iter().any(|v| v.len() != d) {
        return Err(Error::GridMismatch("center outputs differ in length".into()));
    }
    for (j, row) in l.iter().enumerate() {
        if !(row[j].abs() > 1e-300) || !row[j].is_finite() {
            return Err(Error::Singular(format!(
                "kernel system is numerically singular at center {j} (delta = {delta}); try a larger delta or fewer centers"
            )));
        }
    }
    // forward: L z = y
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut r = y[j].clone();
        for i in 0..j {
            let c = l[j][i];
            r.iter_mut().zip(&z[i]).for_each(|(a, b)| *a -= c * b);
        }
        let inv = 1.0 / l[j][j];
        r.iter_mut().for_each(|a| *a *= inv);
        z.push(r);
    }
    // backward: Lᵀ α = z
    let mut alpha = vec![vec![0.0; d]; n];
    for i in (0..n).rev() {
        let mut r = z[i].clone();
        for j in i + 1..n {
            let c = l[j][i];
            r.iter_mut().zip(&alpha[j]).for_each(|(a, b)| *a -= c * b);
        }
        let inv = 1.0 / l[i][i];
        r.iter_mut().for_each(|a| *a *= inv);
        alpha[i] = r;
    }
    Ok(alpha)
}

/// Diagonal shift for [`fit_regularized`] when centers nearly coincide.
pub const JITTER: f64 = 1e-12;

/// Interpolant on arbitrary distinct centers via a Cholesky solve of the
/// kernel matrix.
pub fn fit_direct(kernel: KernelSpec, centers: &[P3], outputs: &[Vec<f64>], input_box: InputBox) -> Result<KernelSurrogate> {
    fit_regularized(kernel, centers, outputs, input_box, 0.0)
}

/// As [`fit_direct`] with `jitter` added to the diagonal of the kernel
/// matrix; the result no longer interpolates exactly.
pub fn fit_regularized(
    kernel: KernelSpec,
    centers: &[P3],
    outputs: &[Vec<f64>],
    input_box: InputBox,
    jitter: f64,
) -> Result<KernelSurrogate> {
    let n = centers.len();
    if n == 0 || outputs.len() != n {
        return Err(Error::InvalidConfig(format!("{n} centers but {} outputs", outputs.len())));
    }
    let d = outputs[0].len();
    let k = nalgebra::DMatrix::from_fn(n, n, |i, j| kernel.eval(&centers[i], &centers[j]) + if i == j { jitter } else { 0.0 });
    let y = nalgebra::DMatrix::from_fn(n, d, |i, j| outputs[i][j]);
    let chol = k.cholesky().ok_or_else(|| {
        Error::Singular(format!(
            "kernel matrix is not numerically positive definite (delta = {}); centers may be too close",
            kernel.delta
        ))
    })?;
    let a = chol.solve(&y);
    Ok(KernelSurrogate {
        kernel,
        input_box,
        centers: centers.to_vec(),
        coefficients: (0..n).map(|i| a.row(i).iter().copied().collect()).collect(),
        power_max: Vec::new(),
    })
}

/// `s_n(ω) = Σ_i k(x(ω), x_i) α_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSurrogate {
    pub kernel: KernelSpec,
    pub input_box: InputBox,
    /// Centers in unit-cube coordinates, in selection order.
    pub centers: Vec<P3>,
    pub coefficients: Vec<Vec<f64>>,
    /// Maximal power-function value before each selection.
    #[serde(default)]
    pub power_max: Vec<f64>,
}

impl KernelSurrogate {
    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn eval_unit(&self, x: &P3) -> Vec<f64> {
        let d = self.coefficients.first().map_or(0, |c| c.len());
        let mut out = vec![0.0; d];
        for (c, a) in self.centers.iter().zip(&self.coefficients) {
            let k = self.kernel.eval(x, c);
            if k != 0.0 {
                out.iter_mut().zip(a).for_each(|(o, v)| *o += k * v);
            }
        }
        out
    }

    pub fn predict_f64(&self, omega: P3) -> Vec<f64> {
        self.eval_unit(&self.input_box.to_unit(omega))
    }

    pub fn parameter_centers(&self) -> Vec<P3> {
        self.centers.iter().map(|c| self.input_box.from_unit(*c)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

impl<T: Scalar> Surrogate<T> for KernelSurrogate {
    fn predict(&self, omega: &UncertainInput<T>) -> Result<Vec<T>> {
        Ok(self
            .predict_f64(omega.to_array().map(|v| v.f64()))
            .into_iter()
            .map(T::of)
            .collect())
    }
}

/// One fitted member of the δ × n schedule.
#[derive(Debug, Clone)]
pub struct ScheduledModel {
    pub delta: f64,
    /// Requested number of centers.
    pub n: usize,
    pub surrogate: KernelSurrogate,
}

#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub models: Vec<ScheduledModel>,
    pub candidate_count: usize,
    pub hull_facets: usize,
}

/// Greedy pass per δ, model runs at the selected centers and one fit per
/// checkpoint. Centers are nested across checkpoints for a fixed δ.
pub fn schedule_run<T: Scalar, M: Model<T> + ?Sized>(
    candidates: &CandidateSet,
    model: &M,
    deltas: &[f64],
    checkpoints: &[usize],
    convention: DeltaConvention,
) -> Result<ScheduleRun> {
    let mut checkpoints = checkpoints.to_vec();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let n_max = checkpoints.last().copied().unwrap_or(0);
    let mut models = Vec::with_capacity(deltas.len() * checkpoints.len());
    for &delta in deltas {
        let kernel = KernelSpec::with_convention(delta, convention)?;
        let mut greedy = GreedySelection::new(kernel, candidates.points.clone())?;
        let reached = greedy.run_to(n_max)?;
        if reached < n_max {
            log::warn!("power function saturated after {reached} centers for delta = {delta}");
        }
        let inputs: Vec<UncertainInput<T>> = greedy
            .centers(reached)
            .iter()
            .map(|c| UncertainInput::from_array(candidates.input_box.from_unit(*c).map(T::of)))
            .collect();
        let outputs: Vec<Vec<f64>> = model
            .evaluate_batch(&inputs)?
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.f64()).collect())
            .collect();
        for &n in &checkpoints {
            let surrogate = greedy.fit(n.min(reached), &outputs, candidates.input_box)?;
            models.push(ScheduledModel { delta, n, surrogate });
        }
    }
    Ok(ScheduleRun {
        models,
        candidate_count: candidates.points.len(),
        hull_facets: candidates.hull_facets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::stochastic::{generate_samples, DistributionSpec};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    fn cloud(n: usize, seed: u64) -> Vec<P3> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
    }

    /// Direct `P²(x) = k(x,x) − k_xᵀ K⁻¹ k_x` with a fresh solve per step.
    fn brute_force(kernel: KernelSpec, pts: &[P3], steps: usize) -> (Vec<usize>, Vec<f64>) {
        let mut sel: Vec<usize> = Vec::new();
        let mut vals = Vec::new();
        for _ in 0..steps {
            let p2: Vec<f64> = if sel.is_empty() {
                pts.iter().map(|x| kernel.eval(x, x)).collect()
            } else {
                let n = sel.len();
                let k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&pts[sel[i]], &pts[sel[j]]));
                let chol = k.cholesky().unwrap();
                pts.iter()
                    .map(|x| {
                        let kx = DVector::from_fn(n, |i, _| kernel.eval(x, &pts[sel[i]]));
                        let w = chol.solve(&kx);
                        (kernel.eval(x, x) - kx.dot(&w)).max(0.0)
                    })
                    .collect()
            };
            let mut best = (0, f64::NEG_INFINITY);
            for (k, &p) in p2.iter().enumerate() {
                if !sel.contains(&k) && p > best.1 {
                    best = (k, p);
                }
            }
            sel.push(best.0);
            vals.push(best.1);
        }
        (sel, vals)
    }

    #[test]
    fn kernel_values() {
        let k = KernelSpec::new(1.0).unwrap();
        assert_eq!(k.eval(&[0.3, 0.2, 0.1], &[0.3, 0.2, 0.1]), 1.0);
        assert_eq!(k.eval(&[0.0; 3], &[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(k.eval(&[0.0; 3], &[2.0, 0.0, 0.0]), 0.0);
        assert!((k.eval(&[0.0; 3], &[0.5, 0.0, 0.0]) - 0.1875).abs() < 1e-15);
        let r = KernelSpec::with_convention(2.0, DeltaConvention::Radius).unwrap();
        assert!((r.eval(&[0.0; 3], &[0.0, 1.0, 0.0]) - 0.1875).abs() < 1e-15);
        assert!(KernelSpec::new(0.0).is_err());
        let a = [0.1, 0.7, 0.3];
        let b = [0.4, 0.2, 0.9];
        assert_eq!(k.eval(&a, &b), k.eval(&b, &a));
    }

    #[test]
    fn cube_corners_keep_every_grid_point() {
        let mut samples = Vec::new();
        for &a in &[-0.4, 0.4] {
            for &b in &[1.5, 4.5] {
                for &c in &[0.05, 0.3] {
                    samples.push(UncertainInput::new(a, b, c));
                }
            }
        }
        let set = SampleSet::new(samples, crate::stochastic::Provenance::Derived("corners".into())).unwrap();
        let c = build_candidates(&set, 3).unwrap();
        assert_eq!(c.points.len(), 27);
    }

    #[test]
    fn simplex_candidates_match_barycentric_test() {
        let verts = [[-0.4, 1.5, 0.05], [0.4, 1.5, 0.05], [-0.4, 4.5, 0.05], [-0.4, 1.5, 0.3]];
        let samples = verts.iter().map(|v| UncertainInput::from_array(*v)).collect();
        let set = SampleSet::new(samples, crate::stochastic::Provenance::Derived("simplex".into())).unwrap();
        let c = build_candidates(&set, 11).unwrap();
        // in unit coordinates the simplex is x+y+z <= 1, x,y,z >= 0
        let mut expected = 0;
        for i in 0..11 {
            for j in 0..11 {
                for k in 0..11 {
                    if i + j + k <= 10 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(c.points.len(), expected);
    }

    #[test]
    fn first_center_is_first_candidate() {
        let pts = cloud(100, 1);
        let mut g = GreedySelection::new(KernelSpec::new(0.5).unwrap(), pts).unwrap();
        assert_eq!(g.step().unwrap(), Some(0));
        assert_eq!(g.power2[0], 0.0);
    }

    #[test]
    fn greedy_matches_brute_force() {
        for (seed, delta) in [(2, 1.0), (3, 2.5), (4, 0.6)] {
            let pts = cloud(500, seed);
            let kernel = KernelSpec::new(delta).unwrap();
            let mut g = GreedySelection::new(kernel, pts.clone()).unwrap();
            g.run_to(25).unwrap();
            let (sel, vals) = brute_force(kernel, &pts, g.n_selected());
            assert_eq!(g.selected, sel, "delta {delta}");
            for (a, b) in g.selected_power2.iter().zip(&vals) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn power_function_is_nonincreasing_and_vanishes_at_centers() {
        let pts = cloud(400, 5);
        let mut g = GreedySelection::new(KernelSpec::new(1.5).unwrap(), pts).unwrap();
        let mut prev = g.power2.clone();
        for _ in 0..40 {
            if g.step().unwrap().is_none() {
                break;
            }
            assert!(g.power2.iter().zip(&prev).all(|(a, b)| *a <= b + 1e-12 && *a >= 0.0));
            for &c in &g.selected {
                assert!(g.power2[c].sqrt() < 1e-8);
            }
            prev = g.power2.clone();
        }
        let mut s = g.selected.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), g.selected.len());
    }

    #[test]
    fn fits_interpolate_and_agree() {
        let pts = cloud(300, 6);
        let kernel = KernelSpec::new(1.2).unwrap();
        let mut g = GreedySelection::new(kernel, pts).unwrap();
        g.run_to(30).unwrap();
        let f = |x: &P3| vec![(3.0 * x[0]).sin() + x[1], x[2] * x[2]];
        let centers = g.centers(30);
        let y: Vec<Vec<f64>> = centers.iter().map(f).collect();
        let unit = InputBox {
            lower: [0.0; 3],
            upper: [1.0; 3],
        };
        let s = g.fit(30, &y, unit).unwrap();
        let d = fit_direct(kernel, &centers, &y, unit).unwrap();
        for (c, yc) in centers.iter().zip(&y) {
            let v = s.eval_unit(c);
            for (a, b) in v.iter().zip(yc) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
            }
        }
        for x in cloud(20, 9) {
            let (a, b) = (s.eval_unit(&x), d.eval_unit(&x));
            assert!((a[0] - b[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn jitter_handles_near_duplicate_centers() {
        let kernel = KernelSpec::new(0.5).unwrap();
        let unit = InputBox {
            lower: [0.0; 3],
            upper: [1.0; 3],
        };
        let centers = vec![[0.2, 0.3, 0.4], [0.2, 0.3, 0.4 + 1e-13], [0.7, 0.1, 0.5]];
        let y = vec![vec![1.0], vec![1.0], vec![-2.0]];
        let s = fit_regularized(kernel, &centers, &y, unit, JITTER).unwrap();
        for (c, v) in centers.iter().zip(&y) {
            assert!((s.eval_unit(c)[0] - v[0]).abs() < 1e-6);
        }
        let exact = fit_direct(kernel, &centers[..1], &y[..1], unit).unwrap();
        let zero = fit_regularized(kernel, &centers[..1], &y[..1], unit, 0.0).unwrap();
        assert_eq!(exact, zero);
    }

    #[test]
    fn single_center_and_constant_outputs() {
        let pts = cloud(50, 7);
        let unit = InputBox {
            lower: [0.0; 3],
            upper: [1.0; 3],
        };
        let mut g = GreedySelection::new(KernelSpec::new(0.8).unwrap(), pts).unwrap();
        g.run_to(12).unwrap();
        let one = g.fit(1, &[vec![0.42, 0.1]], unit).unwrap();
        assert_eq!(one.coefficients[0], vec![0.42, 0.1]);
        let y = vec![vec![0.3]; 12];
        let s = g.fit(12, &y, unit).unwrap();
        for c in g.centers(12) {
            assert!((s.eval_unit(&c)[0] - 0.3).abs() < 1e-10);
        }
    }

    #[test]
    fn native_space_error_bound_holds() {
        let pts = cloud(400, 8);
        let kernel = KernelSpec::new(1.3).unwrap();
        // f = Σ β_j k(·, z_j) has native norm² = βᵀ K_z β
        let z = cloud(5, 99);
        let beta = [0.7, -1.1, 0.4, 2.0, -0.3];
        let f = |x: &P3| z.iter().zip(&beta).map(|(zj, b)| b * kernel.eval(x, zj)).sum::<f64>();
        let norm2: f64 = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i, j)))
            .map(|(i, j)| beta[i] * beta[j] * kernel.eval(&z[i], &z[j]))
            .sum();
        let mut g = GreedySelection::new(kernel, pts.clone()).unwrap();
        g.run_to(20).unwrap();
        let y: Vec<Vec<f64>> = g.centers(20).iter().map(|c| vec![f(c)]).collect();
        let s = g.fit(20, &y, InputBox { lower: [0.0; 3], upper: [1.0; 3] }).unwrap();
        for (x, p2) in pts.iter().zip(&g.power2) {
            let err = (f(x) - s.eval_unit(x)[0]).abs();
            assert!(err <= p2.sqrt() * norm2.sqrt() + 1e-9, "{err} > {}", p2.sqrt() * norm2.sqrt());
        }
    }

    #[test]
    fn schedule_is_nested_and_complete() {
        let set = generate_samples::<f64>(&DistributionSpec::default(), 400, 3).unwrap();
        let cand = build_candidates(&set, 12).unwrap();
        assert!(cand.points.len() > 50);
        let model = FnModel::new(2, |w: &UncertainInput<f64>| vec![w.omega1 + w.omega3, w.omega2.sqrt()]);
        let run = schedule_run(&cand, &model, &DEFAULT_DELTAS, &[1, 4, 16, 40], DeltaConvention::Scale).unwrap();
        assert_eq!(run.models.len(), 20);
        for delta in DEFAULT_DELTAS {
            let fam: Vec<&ScheduledModel> = run.models.iter().filter(|m| m.delta == delta).collect();
            for w in fam.windows(2) {
                let (a, b) = (&w[0].surrogate.centers, &w[1].surrogate.centers);
                assert_eq!(&b[..a.len()], &a[..]);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let pts = cloud(60, 10);
        let mut g = GreedySelection::new(KernelSpec::new(0.9).unwrap(), pts).unwrap();
        g.run_to(5).unwrap();
        let y: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64]).collect();
        let s = g.fit(5, &y, InputBox { lower: [0.0; 3], upper: [2.0; 3] }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.json");
        s.save(&p).unwrap();
        assert_eq!(KernelSurrogate::load(&p).unwrap(), s);
    }
}
