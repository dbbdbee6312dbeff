//! Semi-discrete central-upwind finite-volume scheme for the radial
//! saturation transport equation, advanced with Heun's second-order
//! Runge–Kutta method. One call of [`simulate`] is one "model run".

use crate::error::{Error, Result};
use crate::physics::{transport_rate, FractionalFlow, ScenarioConfig, UncertainInput};
use crate::scalar::Scalar;

/// Uniform radial mesh on `[r_min, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub r_faces: Vec<T>,
    pub r_centers: Vec<T>,
    pub dr: T,
}

impl<T: Scalar> Grid<T> {
    pub fn uniform(r_min: T, r_max: T, n_cells: usize) -> Result<Self> {
        if n_cells == 0 || !(r_max > r_min) {
            return Err(Error::InvalidConfig(format!(
                "grid needs n_cells >= 1 and r_max > r_min (got {n_cells}, [{r_min}, {r_max}])"
            )));
        }
        let dr = (r_max - r_min) / T::of_usize(n_cells);
        let r_faces: Vec<T> = (0..=n_cells).map(|k| r_min + dr * T::of_usize(k)).collect();
        let half = T::of(0.5);
        let r_centers = r_faces.windows(2).map(|w| half * (w[0] + w[1])).collect();
        Ok(Self { r_faces, r_centers, dr })
    }

    pub fn from_config(cfg: &ScenarioConfig<T>) -> Result<Self> {
        Self::uniform(cfg.r_min, cfg.r_max, cfg.n_cells)
    }

    pub fn n_cells(&self) -> usize {
        self.r_centers.len()
    }

    /// Radial cell weights `∫ r dr` (the 2π factor is dropped).
    pub fn cell_volumes(&self) -> Vec<T> {
        self.r_centers.iter().map(|&r| r * self.dr).collect()
    }
}

/// Cell-averaged effective gas saturation at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationField<T> {
    pub values: Vec<T>,
    pub time: T,
}

impl<T: Scalar> SaturationField<T> {
    pub fn zeros(n_cells: usize) -> Self {
        Self {
            values: vec![T::zero(); n_cells],
            time: T::zero(),
        }
    }

    pub fn constant(n_cells: usize, value: T) -> Self {
        Self {
            values: vec![value; n_cells],
            time: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    /// Courant number, in (0, 0.5].
    pub cfl: T,
    /// Generalized-minmod parameter, in [1, 2].
    pub limiter_theta: T,
    /// Adds the volumetric rate `Q/φ` in every cell on top of the inflow
    /// boundary. Off by default; kept for sensitivity runs only.
    pub interior_source: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            cfl: T::of(0.45),
            limiter_theta: T::of(1.3),
            interior_source: false,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > T::zero() && self.cfl <= T::of(0.5)) {
            return Err(Error::InvalidConfig(format!("cfl = {} must lie in (0, 0.5]", self.cfl)));
        }
        if !(self.limiter_theta >= T::one() && self.limiter_theta <= T::of(2.0)) {
            return Err(Error::InvalidConfig(format!(
                "limiter_theta = {} must lie in [1, 2]",
                self.limiter_theta
            )));
        }
        Ok(())
    }
}

#[inline]
fn minmod3<T: Scalar>(a: T, b: T, c: T) -> T {
    if a > T::zero() && b > T::zero() && c > T::zero() {
        a.min(b).min(c)
    } else if a < T::zero() && b < T::zero() && c < T::zero() {
        a.max(b).max(c)
    } else {
        T::zero()
    }
}

/// Generalized-minmod slopes (per cell width) with a Dirichlet ghost on the
/// left and a zero-gradient ghost on the right.
fn limited_slopes<T: Scalar>(values: &[T], s_left: T, theta: T, slopes: &mut [T]) {
    let n = values.len();
    let half = T::of(0.5);
    for j in 0..n {
        let prev = if j == 0 { s_left } else { values[j - 1] };
        let next = if j + 1 == n { values[j] } else { values[j + 1] };
        let cur = values[j];
        slopes[j] = minmod3(theta * (cur - prev), half * (next - prev), theta * (next - cur));
    }
}

#[inline]
fn face_states<T: Scalar>(values: &[T], slopes: &[T], s_left: T, face: usize) -> (T, T) {
    let n = values.len();
    let half = T::of(0.5);
    let minus = if face == 0 {
        s_left
    } else {
        values[face - 1] + half * slopes[face - 1]
    };
    let plus = if face == n {
        values[n - 1]
    } else {
        values[face] - half * slopes[face]
    };
    (minus, plus)
}

/// One-sided interface values `(S⁻, S⁺)` at all `n+1` faces, including the
/// two boundary faces.
pub fn reconstruct<T: Scalar>(field: &SaturationField<T>, s_left: T, theta: T) -> (Vec<T>, Vec<T>) {
    let n = field.values.len();
    let mut slopes = vec![T::zero(); n];
    limited_slopes(&field.values, s_left, theta, &mut slopes);
    (0..=n).map(|k| face_states(&field.values, &slopes, s_left, k)).unzip()
}

/// Central-upwind numerical flux with one-sided local speeds.
#[inline]
pub fn numerical_flux<T: Scalar>(s_minus: T, s_plus: T, flux: &FractionalFlow<T>) -> T {
    let (fm, dm) = flux.value_and_slope(s_minus);
    let (fp, dp) = flux.value_and_slope(s_plus);
    let a_plus = dm.max(dp).max(T::zero());
    let a_minus = dm.min(dp).min(T::zero());
    let spread = a_plus - a_minus;
    if spread <= T::zero() {
        return fm;
    }
    if a_minus == T::zero() {
        return fm;
    }
    (a_plus * fm - a_minus * fp) / spread + a_plus * a_minus / spread * (s_plus - s_minus)
}

/// Boundary fluxes of one right-hand-side evaluation (or the RK average).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFlux<T> {
    pub inflow: T,
    pub outflow: T,
}

/// Spatial operator for one parameter realisation.
#[derive(Debug, Clone)]
pub struct Transport<T> {
    pub grid: Grid<T>,
    pub flux: FractionalFlow<T>,
    /// `u(ω₁) = cp·Q·(1+ω₁)`.
    pub rate: T,
    pub porosity: T,
    pub s_left: T,
    pub theta: T,
    source: T,
    max_slope: T,
    coef: Vec<T>,
}

/// Reusable buffers for [`Transport`].
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    slopes: Vec<T>,
    faces: Vec<T>,
    k1: Vec<T>,
    stage: Vec<T>,
    k2: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new(n: usize) -> Self {
        Self {
            slopes: vec![T::zero(); n],
            faces: vec![T::zero(); n + 1],
            k1: vec![T::zero(); n],
            stage: vec![T::zero(); n],
            k2: vec![T::zero(); n],
        }
    }
}

impl<T: Scalar> Transport<T> {
    pub fn new(omega: &UncertainInput<T>, cfg: &ScenarioConfig<T>, solver_cfg: &SolverConfig<T>) -> Result<Self> {
        cfg.validate()?;
        solver_cfg.validate()?;
        omega
            .check()
            .map_err(|reason| model_error(omega, reason))?;
        let grid = Grid::from_config(cfg)?;
        let rate = transport_rate(omega.omega1, cfg)?;
        let flux = FractionalFlow::new(omega.omega2, cfg.mu_n, cfg.mu_w);
        let source = if solver_cfg.interior_source {
            cfg.q / omega.omega3
        } else {
            T::zero()
        };
        Ok(Self::from_parts(grid, flux, rate, omega.omega3, cfg.s_left, solver_cfg.limiter_theta, source))
    }

    pub(crate) fn from_parts(
        grid: Grid<T>,
        flux: FractionalFlow<T>,
        rate: T,
        porosity: T,
        s_left: T,
        theta: T,
        source: T,
    ) -> Self {
        let coef = grid
            .r_centers
            .iter()
            .map(|&r| rate / (porosity * r * grid.dr))
            .collect();
        let max_slope = flux.max_slope();
        Self {
            grid,
            flux,
            rate,
            porosity,
            s_left,
            theta,
            source,
            max_slope,
            coef,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    /// Largest time step allowed at Courant number `cfl`.
    pub fn stable_dt(&self, cfl: T) -> T {
        let speed = self.coef[0] * self.max_slope;
        if speed > T::zero() {
            cfl / speed
        } else {
            T::infinity()
        }
    }

    /// `dŜ/dt` for cell averages `s`; returns the boundary fluxes.
    pub fn rhs(&self, s: &[T], out: &mut [T], ws: &mut Workspace<T>) -> BoundaryFlux<T> {
        let n = s.len();
        limited_slopes(s, self.s_left, self.theta, &mut ws.slopes);
        for k in 0..=n {
            let (m, p) = face_states(s, &ws.slopes, self.s_left, k);
            ws.faces[k] = numerical_flux(m, p, &self.flux);
        }
        for j in 0..n {
            out[j] = -self.coef[j] * (ws.faces[j + 1] - ws.faces[j]) + self.source;
        }
        BoundaryFlux {
            inflow: ws.faces[0],
            outflow: ws.faces[n],
        }
    }

    /// Heun step in place; returns the stage-averaged boundary fluxes.
    pub fn advance(&self, s: &mut [T], dt: T, ws: &mut Workspace<T>) -> BoundaryFlux<T> {
        let n = s.len();
        let mut k1 = std::mem::take(&mut ws.k1);
        let mut stage = std::mem::take(&mut ws.stage);
        let mut k2 = std::mem::take(&mut ws.k2);
        let b1 = self.rhs(s, &mut k1, ws);
        for j in 0..n {
            stage[j] = s[j] + dt * k1[j];
        }
        let b2 = self.rhs(&stage, &mut k2, ws);
        let half = T::of(0.5);
        for j in 0..n {
            s[j] = half * s[j] + half * (stage[j] + dt * k2[j]);
        }
        ws.k1 = k1;
        ws.stage = stage;
        ws.k2 = k2;
        BoundaryFlux {
            inflow: half * (b1.inflow + b2.inflow),
            outflow: half * (b1.outflow + b2.outflow),
        }
    }

    /// `φ Σ Ŝ_j r_j Δr`, the conserved quantity of the scheme.
    pub fn mass(&self, s: &[T]) -> T {
        let mut acc = crate::scalar::CompensatedSum::new();
        for (&v, &r) in s.iter().zip(&self.grid.r_centers) {
            acc.add(v * r);
        }
        self.porosity * self.grid.dr * acc.value()
    }
}

pub(crate) fn model_error<T: Scalar>(omega: &UncertainInput<T>, reason: impl Into<String>) -> Error {
    Error::ModelRun {
        omega1: omega.omega1.f64(),
        omega2: omega.omega2.f64(),
        omega3: omega.omega3.f64(),
        reason: reason.into(),
    }
}

/// Advances `field` by one Heun step of size `dt`.
pub fn step_rk2<T: Scalar>(
    field: &SaturationField<T>,
    dt: T,
    omega: &UncertainInput<T>,
    cfg: &ScenarioConfig<T>,
    solver_cfg: &SolverConfig<T>,
) -> Result<SaturationField<T>> {
    let transport = Transport::new(omega, cfg, solver_cfg)?;
    if field.values.len() != transport.n_cells() {
        return Err(Error::GridMismatch(format!(
            "field has {} cells, grid has {}",
            field.values.len(),
            transport.n_cells()
        )));
    }
    let limit = transport.stable_dt(solver_cfg.cfl);
    if dt > limit * T::of(1.0 + 1e-12) {
        return Err(Error::Cfl {
            dt: dt.f64(),
            suggested: limit.f64(),
        });
    }
    let mut values = field.values.clone();
    let mut ws = Workspace::new(values.len());
    transport.advance(&mut values, dt, &mut ws);
    Ok(SaturationField {
        values,
        time: field.time + dt,
    })
}

/// Per-step information handed to a [`simulate_observed`] callback.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<T> {
    pub step: usize,
    pub dt: T,
    pub time: T,
    pub boundary: BoundaryFlux<T>,
}

/// Number of equal steps and their size for reaching `t_end`.
pub fn time_steps<T: Scalar>(transport: &Transport<T>, t_end: T, cfl: T) -> (usize, T) {
    let limit = transport.stable_dt(cfl);
    if !limit.is_finite() || limit >= t_end {
        return (1, t_end);
    }
    let n = (t_end / limit).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    (n, t_end / T::of_usize(n))
}

/// Runs the solver from `initial` to `cfg.t_end`, calling `observe` after
/// every step with the new state.
pub fn simulate_observed<T: Scalar, F>(
    omega: &UncertainInput<T>,
    cfg: &ScenarioConfig<T>,
    solver_cfg: &SolverConfig<T>,
    initial: &SaturationField<T>,
    mut observe: F,
) -> Result<SaturationField<T>>
where
    F: FnMut(&StepRecord<T>, &[T]),
{
    let transport = Transport::new(omega, cfg, solver_cfg)?;
    if initial.values.len() != transport.n_cells() {
        return Err(Error::GridMismatch(format!(
            "initial field has {} cells, grid has {}",
            initial.values.len(),
            transport.n_cells()
        )));
    }
    let remaining = cfg.t_end - initial.time;
    let mut values = initial.values.clone();
    if remaining <= T::zero() {
        return Ok(initial.clone());
    }
    let (n_steps, dt) = time_steps(&transport, remaining, solver_cfg.cfl);
    let mut ws = Workspace::new(values.len());
    for step in 0..n_steps {
        let boundary = transport.advance(&mut values, dt, &mut ws);
        let record = StepRecord {
            step,
            dt,
            time: initial.time + dt * T::of_usize(step + 1),
            boundary,
        };
        observe(&record, &values);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(model_error(omega, "non-finite saturation"));
    }
    Ok(SaturationField {
        values,
        time: cfg.t_end,
    })
}

/// One deterministic model run from the brine-filled initial state to
/// `cfg.t_end`.
pub fn simulate<T: Scalar>(
    omega: &UncertainInput<T>,
    cfg: &ScenarioConfig<T>,
    solver_cfg: &SolverConfig<T>,
) -> Result<SaturationField<T>> {
    simulate_observed(omega, cfg, solver_cfg, &SaturationField::zeros(cfg.n_cells), |_, _| {})
}
