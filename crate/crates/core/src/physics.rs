//! Constitutive laws and closed-form pressure relations of the radial
//! fractional-flow model.
//!
//! All quantities are SI. The scenario file uses the units of the benchmark
//! parameter table (m³/d, days, bar) and is converted on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SECONDS_PER_DAY: f64 = 86_400.0;
const PASCAL_PER_BAR: f64 = 1.0e5;

/// Deterministic scenario constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig<T> {
    /// CO₂ density, kg/m³.
    pub rho_g: T,
    /// Brine density, kg/m³.
    pub rho_w: T,
    /// CO₂ viscosity, Pa·s.
    pub mu_n: T,
    /// Brine viscosity, Pa·s.
    pub mu_w: T,
    /// Absolute permeability, m².
    pub k_a: T,
    /// Nominal porosity.
    pub phi0: T,
    pub sr_w: T,
    pub sr_n: T,
    /// Volumetric injection rate, m³/s.
    pub q: T,
    pub r_min: T,
    pub r_max: T,
    /// Simulation end time, s.
    pub t_end: T,
    /// Effective gas saturation imposed at the inflow boundary.
    pub s_left: T,
    /// Injection pressure, Pa.
    pub p_max: T,
    /// Pressure at the outer boundary, Pa.
    pub p_min: T,
    /// Mean mobility, (Pa·s)⁻¹.
    pub lambda_mean: T,
    pub n_cells: usize,
}

impl<T: Scalar> Default for ScenarioConfig<T> {
    fn default() -> Self {
        ScenarioFile::default().to_config()
    }
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_g", self.rho_g),
            ("rho_w", self.rho_w),
            ("mu_n", self.mu_n),
            ("mu_w", self.mu_w),
            ("k_a", self.k_a),
            ("phi0", self.phi0),
            ("q", self.q),
            ("r_min", self.r_min),
            ("r_max", self.r_max),
            ("t_end", self.t_end),
            ("p_max", self.p_max),
            ("p_min", self.p_min),
            ("lambda_mean", self.lambda_mean),
        ];
        for (name, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sr_w < T::zero() || self.sr_n < T::zero() || self.sr_w + self.sr_n >= T::one() {
            return Err(Error::InvalidConfig(format!(
                "residual saturations must satisfy 0 <= sr_w + sr_n < 1, got {} + {}",
                self.sr_w, self.sr_n
            )));
        }
        if self.p_max <= self.p_min {
            return Err(Error::InvalidConfig("p_max must exceed p_min".into()));
        }
        if self.r_max <= self.r_min {
            return Err(Error::InvalidConfig("r_max must exceed r_min".into()));
        }
        if !(self.s_left >= T::zero() && self.s_left <= T::one()) {
            return Err(Error::InvalidConfig(format!("s_left must lie in [0,1], got {}", self.s_left)));
        }
        if self.n_cells == 0 {
            return Err(Error::InvalidConfig("n_cells must be at least 1".into()));
        }
        Ok(())
    }

    /// Nominal parameter point: unperturbed rate, quadratic relative
    /// permeabilities and the nominal porosity.
    pub fn nominal_input(&self) -> UncertainInput<T> {
        UncertainInput::new(T::zero(), T::of(2.0), self.phi0)
    }

    pub fn with_cells(mut self, n_cells: usize) -> Self {
        self.n_cells = n_cells;
        self
    }

    pub fn cast<U: Scalar>(&self) -> ScenarioConfig<U> {
        let c = |x: T| U::of(x.f64());
        ScenarioConfig {
            rho_g: c(self.rho_g),
            rho_w: c(self.rho_w),
            mu_n: c(self.mu_n),
            mu_w: c(self.mu_w),
            k_a: c(self.k_a),
            phi0: c(self.phi0),
            sr_w: c(self.sr_w),
            sr_n: c(self.sr_n),
            q: c(self.q),
            r_min: c(self.r_min),
            r_max: c(self.r_max),
            t_end: c(self.t_end),
            s_left: c(self.s_left),
            p_max: c(self.p_max),
            p_min: c(self.p_min),
            lambda_mean: c(self.lambda_mean),
            n_cells: self.n_cells,
        }
    }
}

/// On-disk scenario description. Keys follow the rows of the benchmark
/// parameter table; units are the table's units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    /// kg/m³
    pub co2_density: f64,
    /// kg/m³
    pub brine_density: f64,
    /// Pa·s
    pub co2_viscosity: f64,
    /// Pa·s
    pub brine_viscosity: f64,
    /// m²
    pub aquifer_permeability: f64,
    pub porosity: f64,
    pub brine_residual_saturation: f64,
    pub co2_residual_saturation: f64,
    /// m³/d
    pub injection_rate: f64,
    /// m
    pub dimension_of_model_domain: f64,
    /// days
    pub simulation_time: f64,
    pub saturation_on_the_left_boundary: f64,
    /// bar
    pub injection_pressure: f64,
    /// bar
    pub pressure_right_boundary: f64,
    /// (Pa·s)⁻¹
    pub mean_mobility_value: f64,
    pub cells: usize,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            co2_density: 479.0,
            brine_density: 1045.0,
            co2_viscosity: 3.950e-5,
            brine_viscosity: 2.535e-4,
            aquifer_permeability: 2.0e-14,
            porosity: 0.15,
            brine_residual_saturation: 0.2,
            co2_residual_saturation: 0.05,
            injection_rate: 1600.0,
            dimension_of_model_domain: 500.0,
            simulation_time: 100.0,
            saturation_on_the_left_boundary: 0.8,
            injection_pressure: 320.0,
            pressure_right_boundary: 300.0,
            mean_mobility_value: 1.0e4,
            cells: 250,
        }
    }
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_config<T: Scalar>(&self) -> ScenarioConfig<T> {
        ScenarioConfig {
            rho_g: T::of(self.co2_density),
            rho_w: T::of(self.brine_density),
            mu_n: T::of(self.co2_viscosity),
            mu_w: T::of(self.brine_viscosity),
            k_a: T::of(self.aquifer_permeability),
            phi0: T::of(self.porosity),
            sr_w: T::of(self.brine_residual_saturation),
            sr_n: T::of(self.co2_residual_saturation),
            q: T::of(self.injection_rate / SECONDS_PER_DAY),
            r_min: T::one(),
            r_max: T::of(self.dimension_of_model_domain),
            t_end: T::of(self.simulation_time * SECONDS_PER_DAY),
            s_left: T::of(self.saturation_on_the_left_boundary),
            p_max: T::of(self.injection_pressure * PASCAL_PER_BAR),
            p_min: T::of(self.pressure_right_boundary * PASCAL_PER_BAR),
            lambda_mean: T::of(self.mean_mobility_value),
            n_cells: self.cells,
        }
    }
}

/// One realisation of the uncertain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertainInput<T> {
    /// Relative perturbation of the injection rate.
    pub omega1: T,
    /// Relative-permeability exponent.
    pub omega2: T,
    /// Porosity.
    pub omega3: T,
}

impl<T: Scalar> UncertainInput<T> {
    pub fn new(omega1: T, omega2: T, omega3: T) -> Self {
        Self { omega1, omega2, omega3 }
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.omega1, self.omega2, self.omega3]
    }

    pub fn get(&self, dim: usize) -> T {
        self.to_array()[dim]
    }

    /// Checks the physical admissibility of the sample; the message names the
    /// violated bound.
    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.omega1 >= -T::one()) || !self.omega1.is_finite() {
            return Err(format!("omega1 = {} must be >= -1", self.omega1));
        }
        if !(self.omega2 > T::zero()) || !self.omega2.is_finite() {
            return Err(format!("omega2 = {} must be > 0", self.omega2));
        }
        if !(self.omega3 > T::zero() && self.omega3 < T::one()) {
            return Err(format!("omega3 = {} must lie in (0, 1)", self.omega3));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> UncertainInput<U> {
        UncertainInput::new(U::of(self.omega1.f64()), U::of(self.omega2.f64()), U::of(self.omega3.f64()))
    }
}

pub fn effective_saturation<T: Scalar>(s: T, sr: T) -> Result<T> {
    if !(sr < T::one()) || sr < T::zero() {
        return Err(Error::InvalidConfig(format!("residual saturation {sr} outside [0, 1)")));
    }
    Ok(((s - sr) / (T::one() - sr)).max(T::zero()).min(T::one()))
}

/// Relative permeabilities `(k_rn, k_rw)` of the gas and brine phases at
/// effective gas saturation `s_hat`.
pub fn rel_perm<T: Scalar>(s_hat: T, omega2: T) -> (T, T) {
    let s = clamp_unit(s_hat);
    (s.powf(omega2), (T::one() - s).powf(omega2))
}

pub fn fractional_flow<T: Scalar>(s_hat: T, omega2: T, cfg: &ScenarioConfig<T>) -> T {
    FractionalFlow::new(omega2, cfg.mu_n, cfg.mu_w).value(s_hat)
}

/// The constant `cp` linking injection rate and pressure drop.
pub fn compute_cp<T: Scalar>(cfg: &ScenarioConfig<T>) -> Result<T> {
    if !(cfg.r_max > T::one()) {
        return Err(Error::Domain(format!("r_max = {} must exceed 1 m", cfg.r_max)));
    }
    Ok((cfg.p_max - cfg.p_min) * cfg.k_a * cfg.lambda_mean / (cfg.q * cfg.r_max.ln()))
}

/// Transport rate `u(ω₁) = cp·Q·(1+ω₁)`.
pub fn transport_rate<T: Scalar>(omega1: T, cfg: &ScenarioConfig<T>) -> Result<T> {
    Ok(compute_cp(cfg)? * cfg.q * (T::one() + omega1))
}

pub fn pressure_profile<T: Scalar>(r: T, omega1: T, cfg: &ScenarioConfig<T>) -> Result<T> {
    if !(r >= T::one() && r <= cfg.r_max) {
        return Err(Error::Domain(format!("radius {r} outside [1, {}]", cfg.r_max)));
    }
    let u = transport_rate(omega1, cfg)?;
    Ok(cfg.p_max - u / (cfg.lambda_mean * cfg.k_a) * r.ln())
}

#[inline]
pub(crate) fn clamp_unit<T: Scalar>(s: T) -> T {
    s.max(T::zero()).min(T::one())
}

/// Gas fractional flow `f(Ŝ) = λ_n / (λ_n + λ_w)` for a fixed exponent.
#[derive(Debug, Clone, Copy)]
pub struct FractionalFlow<T> {
    pub omega2: T,
    inv_mu_n: T,
    inv_mu_w: T,
}

impl<T: Scalar> FractionalFlow<T> {
    pub fn new(omega2: T, mu_n: T, mu_w: T) -> Self {
        Self {
            omega2,
            inv_mu_n: T::one() / mu_n,
            inv_mu_w: T::one() / mu_w,
        }
    }

    #[inline]
    pub fn value(&self, s_hat: T) -> T {
        self.value_and_slope(s_hat).0
    }

    /// `(f, f')` at `s_hat` (clamped to [0,1]).
    #[inline]
    pub fn value_and_slope(&self, s_hat: T) -> (T, T) {
        let s = clamp_unit(s_hat);
        let w = T::one() - s;
        let n = self.omega2;
        let pn = s.powf(n);
        let pw = w.powf(n);
        let a = pn * self.inv_mu_n;
        let b = pw * self.inv_mu_w;
        let total = a + b;
        if total <= T::zero() {
            // both mobilities vanish only for degenerate exponents
            return (if s >= T::of(0.5) { T::one() } else { T::zero() }, T::zero());
        }
        let f = a / total;
        let da = if s > T::zero() { n * pn / s } else { n * s.powf(n - T::one()) } * self.inv_mu_n;
        let db = -(if w > T::zero() { n * pw / w } else { n * w.powf(n - T::one()) }) * self.inv_mu_w;
        let df = (da * b - a * db) / (total * total);
        (f, df)
    }

    /// Upper bound of `|f'|` on [0,1], from dense sampling.
    pub fn max_slope(&self) -> T {
        const SAMPLES: usize = 2000;
        let mut best = T::zero();
        for k in 0..=SAMPLES {
            let s = T::of_usize(k) / T::of_usize(SAMPLES);
            let d = self.value_and_slope(s).1.abs();
            if d.is_finite() && d > best {
                best = d;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> ScenarioConfig<f64> {
        ScenarioConfig::default()
    }

    #[test]
    fn effective_saturation_cases() {
        assert_eq!(effective_saturation(0.2, 0.2).unwrap(), 0.0);
        assert_eq!(effective_saturation(1.0, 0.3).unwrap(), 1.0);
        assert_relative_eq!(effective_saturation(0.8, 0.2).unwrap(), 0.75, epsilon = 1e-15);
        assert!(matches!(effective_saturation(0.5, 1.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rel_perm_cases() {
        assert_eq!(rel_perm(1.0, 2.0), (1.0, 0.0));
        assert_eq!(rel_perm(0.0, 2.0), (0.0, 1.0));
        assert_eq!(rel_perm(0.5, 2.0), (0.25, 0.25));
    }

    #[test]
    fn fractional_flow_endpoints_and_midpoint() {
        let c = cfg();
        assert_eq!(fractional_flow(0.0, 2.0, &c), 0.0);
        assert_eq!(fractional_flow(1.0, 2.0, &c), 1.0);
        // 0.25/3.95e-5 / (0.25/3.95e-5 + 0.25/2.535e-4) = 2.535e-4 / (2.535e-4 + 3.95e-5)
        let oracle = 2.535e-4 / (2.535e-4 + 3.95e-5);
        assert_relative_eq!(fractional_flow(0.5, 2.0, &c), oracle, max_relative = 1e-14);
        assert!((oracle - 0.865).abs() < 1e-3);
    }

    #[test]
    fn slope_matches_central_difference() {
        let c = cfg();
        let ff = FractionalFlow::new(2.7, c.mu_n, c.mu_w);
        for &s in &[0.05, 0.3, 0.5, 0.77, 0.95] {
            let h = 1e-6;
            let fd = (ff.value(s + h) - ff.value(s - h)) / (2.0 * h);
            assert_relative_eq!(ff.value_and_slope(s).1, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn fractional_flow_is_s_shaped_for_quadratic_permeabilities() {
        let c = cfg();
        let ff = FractionalFlow::new(2.0, c.mu_n, c.mu_w);
        let n = 1000;
        let vals: Vec<f64> = (0..=n).map(|k| ff.value(k as f64 / n as f64)).collect();
        let second: Vec<f64> = vals.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
        let sign_changes = second
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum() && w[0] != 0.0 && w[1] != 0.0)
            .count();
        assert_eq!(sign_changes, 1);
    }

    #[test]
    fn cp_matches_published_value() {
        let cp = compute_cp(&cfg()).unwrap();
        assert!((cp / 3.48e-3 - 1.0).abs() < 0.01, "cp = {cp}");
    }

    #[test]
    fn cp_degenerate_and_scaling() {
        let mut c = cfg();
        c.p_min = c.p_max;
        assert_eq!(compute_cp(&c).unwrap(), 0.0);
        let base = compute_cp(&cfg()).unwrap();
        let mut d = cfg();
        d.q *= 2.0;
        assert_relative_eq!(compute_cp(&d).unwrap(), base / 2.0, max_relative = 1e-15);
        let mut e = cfg();
        e.r_max = 1.0;
        assert!(matches!(compute_cp(&e), Err(Error::Domain(_))));
    }

    #[test]
    fn permeability_enters_rate_only_through_pressure_drop() {
        let base = transport_rate(0.1, &cfg()).unwrap();
        let mut c = cfg();
        c.k_a *= 2.0;
        c.p_min = c.p_max - 0.5 * (c.p_max - c.p_min);
        assert_relative_eq!(transport_rate(0.1, &c).unwrap(), base, max_relative = 1e-14);
        let mut d = cfg();
        d.k_a *= 3.0;
        assert_relative_eq!(transport_rate(0.1, &d).unwrap(), 3.0 * base, max_relative = 1e-14);
    }

    #[test]
    fn pressure_endpoints() {
        let c = cfg();
        assert_eq!(pressure_profile(1.0, 0.0, &c).unwrap(), c.p_max);
        assert_relative_eq!(pressure_profile(c.r_max, 0.0, &c).unwrap(), c.p_min, max_relative = 1e-15);
        let mid = pressure_profile(c.r_max.sqrt(), 0.0, &c).unwrap();
        assert_relative_eq!(mid, 0.5 * (c.p_max + c.p_min), max_relative = 1e-15);
        assert!(pressure_profile(0.5, 0.0, &c).is_err());
        assert!(pressure_profile(600.0, 0.0, &c).is_err());
    }

    #[test]
    fn pressure_drop_scales_with_injection_factor() {
        let c = cfg();
        let r = 37.0;
        let d0 = pressure_profile(r, 0.0, &c).unwrap() - c.p_max;
        for &w in &[-0.4, 0.1, 0.45] {
            let d = pressure_profile(r, w, &c).unwrap() - c.p_max;
            assert_relative_eq!(d, d0 * (1.0 + w), max_relative = 1e-12);
        }
    }

    #[test]
    fn scenario_file_defaults_convert_to_si() {
        let c: ScenarioConfig<f64> = ScenarioFile::default().to_config();
        assert_relative_eq!(c.q, 1600.0 / 86400.0);
        assert_eq!(c.t_end, 100.0 * 86400.0);
        assert_eq!(c.p_max, 320.0e5);
        c.validate().unwrap();
        let partial: ScenarioFile = toml::from_str("porosity = 0.2\ncells = 100").unwrap();
        assert_eq!(partial.porosity, 0.2);
        assert_eq!(partial.co2_density, 479.0);
        assert!(toml::from_str::<ScenarioFile>("bogus = 1").is_err());
    }

    #[test]
    fn sample_invariants() {
        assert!(UncertainInput::new(0.0, 2.0, 0.15).check().is_ok());
        assert!(UncertainInput::new(-1.5, 2.0, 0.15).check().is_err());
        assert!(UncertainInput::new(0.0, 0.0, 0.15).check().is_err());
        assert!(UncertainInput::new(0.0, 2.0, 1.2).check().is_err());
    }
}
