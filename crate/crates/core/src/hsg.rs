//! Hybrid stochastic Galerkin: multi-element Legendre chaos in the scaled
//! parameter cube, coupled to the finite-volume operator node by node.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Surrogate;
use crate::physics::{ScenarioConfig, UncertainInput};
use crate::reference::MomentField;
use crate::scalar::Scalar;
use crate::solver::{time_steps, Grid, SolverConfig, Transport, Workspace};
use crate::sparsegrid::InputBox;
use crate::stochastic::SampleSet;

/// Node saturations outside this band mean the basis cannot resolve the
/// solution.
pub const HARD_BAND: (f64, f64) = (-0.05, 1.05);

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `√(2n+1)·P_n(2t−1)`, orthonormal on `[0, 1]`.
pub fn shifted_legendre(n: usize, t: f64) -> f64 {
    let x = 2.0 * t - 1.0;
    let (mut p0, mut p1) = (1.0, x);
    let p = match n {
        0 => 1.0,
        _ => {
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    (2.0 * n as f64 + 1.0).sqrt() * p
}

/// `2^{3N_r}·(N_o+3)!/(N_o!·3!)`.
pub fn basis_size(n_r: u32, n_o: usize) -> usize {
    (1usize << (3 * n_r)) * (n_o + 1) * (n_o + 2) * (n_o + 3) / 6
}

/// Tensor Gauss rule on the reference element `[0,1]³`; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn tensor(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("quadrature order must be at least 1".into()));
        }
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order.pow(3));
        let mut weights = Vec::with_capacity(order.pow(3));
        for a in 0..order {
            for b in 0..order {
                for c in 0..order {
                    nodes.push([0.5 * (x[a] + 1.0), 0.5 * (x[b] + 1.0), 0.5 * (x[c] + 1.0)]);
                    weights.push(w[a] * w[b] * w[c] / 8.0);
                }
            }
        }
        Ok(Self { order, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Piecewise Legendre tensor basis on `2^{3N_r}` uniform elements of the
/// unit cube, orthonormal under the uniform measure.
#[derive(Debug, Clone)]
pub struct HsgBasis {
    pub n_r: u32,
    pub n_o: usize,
    /// Local multi-indices with `|p| ≤ N_o`, graded.
    pub modes: Vec<[usize; 3]>,
    pub quad: QuadratureRule,
    /// `ψ_p(t_q)` on the reference element, `[node][mode]`.
    ref_values: Vec<Vec<f64>>,
}

impl HsgBasis {
    pub fn new(n_r: u32, n_o: usize, quad_order: usize) -> Result<Self> {
        if n_r > 6 {
            return Err(Error::InvalidConfig(format!("refinement level {n_r} is too large")));
        }
        let mut modes = Vec::new();
        for deg in 0..=n_o {
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    modes.push([a, b, deg - a - b]);
                }
            }
        }
        let quad = QuadratureRule::tensor(quad_order)?;
        let ref_values = quad
            .nodes
            .iter()
            .map(|t| modes.iter().map(|p| local_mode(p, t)).collect())
            .collect();
        Ok(Self {
            n_r,
            n_o,
            modes,
            quad,
            ref_values,
        })
    }

    /// Default pseudo-spectral rule: `N_o + 2` Gauss points per dimension.
    pub fn with_default_quadrature(n_r: u32, n_o: usize) -> Result<Self> {
        Self::new(n_r, n_o, n_o + 2)
    }

    pub fn per_dim(&self) -> usize {
        1 << self.n_r
    }

    pub fn n_elements(&self) -> usize {
        1 << (3 * self.n_r)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn len(&self) -> usize {
        self.n_elements() * self.n_modes()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `2^{3N_r/2}`, the amplitude of every element's basis functions.
    pub fn amplitude(&self) -> f64 {
        (self.n_elements() as f64).sqrt()
    }

    pub fn element_index(&self, flat: usize) -> [usize; 3] {
        let m = self.per_dim();
        [flat / (m * m), (flat / m) % m, flat % m]
    }

    pub fn element_flat(&self, l: [usize; 3]) -> usize {
        let m = self.per_dim();
        (l[0] * m + l[1]) * m + l[2]
    }

    /// Element containing a unit-cube point and the local coordinates there;
    /// the upper faces belong to the last element.
    pub fn locate(&self, x: [f64; 3]) -> Option<(usize, [f64; 3])> {
        let m = self.per_dim() as f64;
        let mut l = [0usize; 3];
        let mut t = [0.0; 3];
        for d in 0..3 {
            if !(0.0..=1.0).contains(&x[d]) {
                return None;
            }
            let s = x[d] * m;
            let k = (s.floor() as usize).min(self.per_dim() - 1);
            l[d] = k;
            t[d] = s - k as f64;
        }
        Some((self.element_flat(l), t))
    }

    /// Unit-cube position of a quadrature node of element `flat`.
    pub fn node_point(&self, flat: usize, node: usize) -> [f64; 3] {
        let l = self.element_index(flat);
        let m = self.per_dim() as f64;
        let t = self.quad.nodes[node];
        std::array::from_fn(|d| (l[d] as f64 + t[d]) / m)
    }

    /// `Φ_{p,l}` at local coordinates of its own element.
    pub fn eval_local(&self, mode: usize, t: &[f64; 3]) -> f64 {
        self.amplitude() * local_mode(&self.modes[mode], t)
    }

    /// `Φ_{p,l}(x)` on the whole unit cube.
    pub fn eval(&self, mode: usize, element: usize, x: [f64; 3]) -> f64 {
        match self.locate(x) {
            Some((e, t)) if e == element => self.eval_local(mode, &t),
            _ => 0.0,
        }
    }

    /// Numerical Gram matrix of one element's modes.
    pub fn element_gram(&self) -> Vec<Vec<f64>> {
        let n = self.n_modes();
        let vol = 1.0 / self.n_elements() as f64;
        let a2 = self.amplitude() * self.amplitude();
        let mut g = vec![vec![0.0; n]; n];
        for (w, vals) in self.quad.weights.iter().zip(&self.ref_values) {
            for i in 0..n {
                for j in 0..n {
                    g[i][j] += vol * w * a2 * vals[i] * vals[j];
                }
            }
        }
        g
    }

    /// `⟨f, Φ_{p,l}⟩` for every element and mode, by element quadrature.
    /// Returns `[element][cell·n_modes + mode]`.
    pub fn project<F>(&self, n_outputs: usize, field: F) -> Vec<Vec<f64>>
    where
        F: Fn([f64; 3]) -> Vec<f64> + Sync,
    {
        (0..self.n_elements())
            .into_par_iter()
            .map(|e| {
                let mut c = vec![0.0; n_outputs * self.n_modes()];
                for q in 0..self.quad.len() {
                    let v = field(self.node_point(e, q));
                    self.accumulate(&mut c, q, &v, 1.0);
                }
                c
            })
            .collect()
    }

    /// `c[j·P + p] += scale·w_q·ψ_p(t_q)·v_j / amplitude`, the projection
    /// contribution of node `q`.
    fn accumulate(&self, c: &mut [f64], q: usize, v: &[f64], scale: f64) {
        let n = self.n_modes();
        let f = scale * self.quad.weights[q] / self.amplitude();
        let vals = &self.ref_values[q];
        for (j, &vj) in v.iter().enumerate() {
            let row = &mut c[j * n..(j + 1) * n];
            for (cp, &psi) in row.iter_mut().zip(vals) {
                *cp += f * psi * vj;
            }
        }
    }

    /// `Σ_p c[j·P + p]·Φ_p` at quadrature node `q`, for every cell.
    fn evaluate_node(&self, c: &[f64], q: usize, out: &mut [f64]) {
        let n = self.n_modes();
        let a = self.amplitude();
        let vals = &self.ref_values[q];
        for (j, o) in out.iter_mut().enumerate() {
            *o = a * c[j * n..(j + 1) * n].iter().zip(vals).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

fn local_mode(p: &[usize; 3], t: &[f64; 3]) -> f64 {
    shifted_legendre(p[0], t[0]) * shifted_legendre(p[1], t[1]) * shifted_legendre(p[2], t[2])
}

/// The node-wise deterministic operators of one element.
pub struct ElementOperator {
    pub element: usize,
    /// Parameter value at every quadrature node.
    pub omegas: Vec<UncertainInput<f64>>,
    pub transports: Vec<Transport<f64>>,
}

impl ElementOperator {
    pub fn new(
        basis: &HsgBasis,
        element: usize,
        input_box: &InputBox,
        cfg: &ScenarioConfig<f64>,
        solver_cfg: &SolverConfig<f64>,
    ) -> Result<Self> {
        let omegas: Vec<UncertainInput<f64>> = (0..basis.quad.len())
            .map(|q| UncertainInput::from_array(input_box.from_unit(basis.node_point(element, q))))
            .collect();
        let transports = omegas
            .iter()
            .map(|w| Transport::new(w, cfg, solver_cfg))
            .collect::<Result<_>>()?;
        Ok(Self {
            element,
            omegas,
            transports,
        })
    }

    /// Step count and size to reach `t_end` under the most restrictive node.
    pub fn time_steps(&self, t_end: f64, cfl: f64) -> (usize, f64) {
        let tightest = self
            .transports
            .iter()
            .min_by(|a, b| a.stable_dt(cfl).total_cmp(&b.stable_dt(cfl)))
            .expect("at least one quadrature node");
        time_steps(tightest, t_end, cfl)
    }
}

/// Scratch buffers for [`galerkin_rhs`].
pub struct GalerkinWorkspace {
    node: Vec<f64>,
    tendency: Vec<f64>,
    fv: Workspace<f64>,
    /// Admissible node saturations before clamping.
    pub band: (f64, f64),
    /// Extremes of the unclamped node saturations seen so far.
    pub seen: (f64, f64),
}

impl GalerkinWorkspace {
    pub fn new(n_cells: usize) -> Self {
        Self::with_band(n_cells, HARD_BAND)
    }

    pub fn with_band(n_cells: usize, band: (f64, f64)) -> Self {
        Self {
            node: vec![0.0; n_cells],
            tendency: vec![0.0; n_cells],
            fv: Workspace::new(n_cells),
            band,
            seen: (f64::INFINITY, f64::NEG_INFINITY),
        }
    }
}

/// Time derivative of one element's coefficients: expand at every node,
/// apply that node's finite-volume operator, project back.
pub fn galerkin_rhs(
    basis: &HsgBasis,
    op: &ElementOperator,
    coeffs: &[f64],
    out: &mut [f64],
    ws: &mut GalerkinWorkspace,
) -> Result<()> {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (q, transport) in op.transports.iter().enumerate() {
        basis.evaluate_node(coeffs, q, &mut ws.node);
        let band = ws.band;
        for v in ws.node.iter_mut() {
            ws.seen.0 = ws.seen.0.min(*v);
            ws.seen.1 = ws.seen.1.max(*v);
            if !(*v >= band.0 && *v <= band.1) {
                let omega = op.omegas[q];
                return Err(Error::Numeric(format!(
                    "saturation {v:.4} at a quadrature node of element {} is outside [{}, {}]; the stochastic basis is under-resolved (omega = ({:.4}, {:.4}, {:.4}))",
                    op.element, band.0, band.1, omega.omega1, omega.omega2, omega.omega3
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        transport.rhs(&ws.node, &mut ws.tendency, &mut ws.fv);
        basis.accumulate(out, q, &ws.tendency, 1.0);
    }
    Ok(())
}

/// Coefficient state of the whole expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsgState {
    pub n_r: u32,
    pub n_o: usize,
    pub quad_order: usize,
    pub input_box: InputBox,
    pub n_cells: usize,
    pub time: f64,
    /// `[element][cell·n_modes + mode]`.
    pub coefficients: Vec<Vec<f64>>,
    /// Time steps taken by every element.
    pub steps: Vec<usize>,
    /// Extremes of the unclamped node saturations during the run.
    #[serde(default)]
    pub node_range: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsgConfig {
    pub n_r: u32,
    pub n_o: usize,
    /// Gauss points per dimension; `N_o + 2` when unset.
    pub quad_order: Option<usize>,
    /// Relative widening of the Θ bounding box.
    pub box_margin: f64,
    /// Node saturations outside this band abort the run.
    pub node_band: (f64, f64),
}

impl HsgConfig {
    pub fn new(n_r: u32, n_o: usize) -> Self {
        Self {
            n_r,
            n_o,
            quad_order: None,
            box_margin: 0.01,
            node_band: HARD_BAND,
        }
    }

    pub fn basis(&self) -> Result<HsgBasis> {
        HsgBasis::new(self.n_r, self.n_o, self.quad_order.unwrap_or(self.n_o + 2))
    }
}

/// Marches every element independently to `cfg.t_end` with its own
/// fixed step size.
pub fn hsg_simulate(
    hsg: &HsgConfig,
    input_box: InputBox,
    cfg: &ScenarioConfig<f64>,
    solver_cfg: &SolverConfig<f64>,
) -> Result<HsgState> {
    let basis = hsg.basis()?;
    let n_cells = cfg.n_cells;
    Grid::from_config(cfg)?;
    let results: Vec<(Vec<f64>, usize, (f64, f64))> = (0..basis.n_elements())
        .into_par_iter()
        .map(|e| {
            let op = ElementOperator::new(&basis, e, &input_box, cfg, solver_cfg)?;
            let (n_steps, dt) = op.time_steps(cfg.t_end, solver_cfg.cfl);
            let len = n_cells * basis.n_modes();
            let mut c = vec![0.0; len];
            let mut k1 = vec![0.0; len];
            let mut stage = vec![0.0; len];
            let mut k2 = vec![0.0; len];
            let mut ws = GalerkinWorkspace::with_band(n_cells, hsg.node_band);
            for _ in 0..n_steps {
                galerkin_rhs(&basis, &op, &c, &mut k1, &mut ws)?;
                for i in 0..len {
                    stage[i] = c[i] + dt * k1[i];
                }
                galerkin_rhs(&basis, &op, &stage, &mut k2, &mut ws)?;
                for i in 0..len {
                    c[i] = 0.5 * c[i] + 0.5 * (stage[i] + dt * k2[i]);
                }
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite coefficients in element {e}")));
            }
            Ok((c, n_steps, ws.seen))
        })
        .collect::<Result<_>>()?;
    let mut coefficients = Vec::with_capacity(results.len());
    let mut steps = Vec::with_capacity(results.len());
    let mut node_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (c, n, seen) in results {
        coefficients.push(c);
        steps.push(n);
        node_range = (node_range.0.min(seen.0), node_range.1.max(seen.1));
    }
    Ok(HsgState {
        n_r: hsg.n_r,
        n_o: hsg.n_o,
        quad_order: basis.quad.order,
        input_box,
        n_cells,
        time: cfg.t_end,
        coefficients,
        steps,
        node_range,
    })
}

impl HsgState {
    pub fn basis(&self) -> Result<HsgBasis> {
        HsgBasis::new(self.n_r, self.n_o, self.quad_order)
    }

    pub fn n_elements(&self) -> usize {
        self.coefficients.len()
    }

    /// Expansion at one parameter point, unclamped.
    pub fn evaluate(&self, basis: &HsgBasis, omega: [f64; 3]) -> Result<Vec<f64>> {
        let x = self.input_box.to_unit(omega);
        let (e, t) = basis.locate(x).ok_or_else(|| {
            Error::Domain(format!(
                "sample ({}, {}, {}) lies outside the stochastic basis box",
                omega[0], omega[1], omega[2]
            ))
        })?;
        let n = basis.n_modes();
        let psi: Vec<f64> = (0..n).map(|p| basis.eval_local(p, &t)).collect();
        let c = &self.coefficients[e];
        Ok((0..self.n_cells)
            .map(|j| c[j * n..(j + 1) * n].iter().zip(&psi).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Expansion evaluated on every θ, clamped, summarised.
    pub fn reconstruct_moments<T: Scalar>(&self, set: &SampleSet<T>, r_centers: &[f64]) -> Result<MomentField<f64>> {
        let basis = self.basis()?;
        let runs: Vec<Vec<f64>> = set
            .samples
            .par_iter()
            .map(|w| self.evaluate(&basis, w.to_array().map(|v| v.f64())))
            .collect::<Result<_>>()?;
        MomentField::from_runs(&runs, r_centers, self.time, true)
    }

    /// Stochastic elements, the cost measure of the method.
    pub fn cost(&self) -> usize {
        self.n_elements()
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

/// Evaluation wrapper holding the basis tables.
pub struct HsgSurrogate {
    pub state: HsgState,
    basis: HsgBasis,
}

impl HsgSurrogate {
    pub fn new(state: HsgState) -> Result<Self> {
        let basis = state.basis()?;
        Ok(Self { state, basis })
    }
}

impl<T: Scalar> Surrogate<T> for HsgSurrogate {
    fn predict(&self, omega: &UncertainInput<T>) -> Result<Vec<T>> {
        Ok(self
            .state
            .evaluate(&self.basis, omega.to_array().map(|v| v.f64()))?
            .into_iter()
            .map(T::of)
            .collect())
    }
}

/// Separate expansions on the lower and upper halves of the porosity range,
/// merged at reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitHsg {
    pub parts: Vec<HsgState>,
}

impl SplitHsg {
    pub fn simulate(
        hsg: &HsgConfig,
        input_box: InputBox,
        cfg: &ScenarioConfig<f64>,
        solver_cfg: &SolverConfig<f64>,
    ) -> Result<Self> {
        let mid = 0.5 * (input_box.lower[2] + input_box.upper[2]);
        let mut low = input_box;
        low.upper[2] = mid;
        let mut high = input_box;
        high.lower[2] = mid;
        Ok(Self {
            parts: vec![
                hsg_simulate(hsg, low, cfg, solver_cfg)?,
                hsg_simulate(hsg, high, cfg, solver_cfg)?,
            ],
        })
    }

    pub fn cost(&self) -> usize {
        self.parts.iter().map(HsgState::cost).sum()
    }

    pub fn reconstruct_moments<T: Scalar>(&self, set: &SampleSet<T>, r_centers: &[f64]) -> Result<MomentField<f64>> {
        let bases = self.parts.iter().map(HsgState::basis).collect::<Result<Vec<_>>>()?;
        let runs: Vec<Vec<f64>> = set
            .samples
            .par_iter()
            .map(|w| {
                let omega = w.to_array().map(|v| v.f64());
                let part = self
                    .parts
                    .iter()
                    .position(|p| omega[2] <= p.input_box.upper[2])
                    .unwrap_or(self.parts.len() - 1);
                self.parts[part].evaluate(&bases[part], omega)
            })
            .collect::<Result<_>>()?;
        MomentField::from_runs(&runs, r_centers, self.parts[0].time, true)
    }
}

/// Runs [`hsg_simulate`] with the box of Θ and the scenario grid, and returns
/// the reconstructed moments as well.
pub fn hsg_on_samples<T: Scalar>(
    set: &SampleSet<T>,
    hsg: &HsgConfig,
    cfg: &ScenarioConfig<f64>,
    solver_cfg: &SolverConfig<f64>,
) -> Result<(HsgState, MomentField<f64>)> {
    let input_box = InputBox::from_samples(set, hsg.box_margin);
    let state = hsg_simulate(hsg, input_box, cfg, solver_cfg)?;
    let grid = Grid::from_config(cfg)?;
    let moments = state.reconstruct_moments(set, &grid.r_centers)?;
    Ok((state, moments))
}
