//! Independent reference implementations shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use uqbench_core::hsg::{HsgBasis, HsgState};
use uqbench_core::physics::{ScenarioConfig, UncertainInput};
use uqbench_core::solver::{SolverConfig, Transport, Workspace};
use uqbench_core::vkoga::KernelSpec;

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Monomial coefficients of `√(2n+1)·P_n` from the explicit sum.
pub fn legendre_coeffs(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    let n64 = n as u64;
    for k in 0..=n / 2 {
        let k64 = k as u64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        c[n - 2 * k] = sign * binom(n64, k64) * binom(2 * n64 - 2 * k64, n64) / 2f64.powi(n as i32);
    }
    let s = ((2 * n + 1) as f64).sqrt();
    c.iter().map(|v| v * s).collect()
}

/// Monomial coefficients of `He_n/√(n!)`.
pub fn hermite_coeffs(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    for m in 0..=n / 2 {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        c[n - 2 * m] = sign * factorial(n as u64) / (factorial(m as u64) * factorial((n - 2 * m) as u64) * 2f64.powi(m as i32));
    }
    let s = factorial(n as u64).sqrt();
    c.iter().map(|v| v / s).collect()
}

/// Standard-normal quantile by bisection on the complementary error function.
pub fn normal_quantile(p: f64) -> f64 {
    let cdf = |x: f64| 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Size of the regular sparse grid `Σ max(ℓ_j,1) ≤ n+d−1` by recursion over
/// the dimensions.
pub fn sparse_grid_size(n: u32, dims: usize, boundary: bool) -> usize {
    fn go(d: usize, budget: i64, boundary: bool) -> usize {
        if d == 0 {
            return 1;
        }
        let mut total = 0;
        let start = if boundary { 0 } else { 1 };
        for l in start..=budget.max(0) {
            let cost = l.max(1);
            if budget - cost < (d as i64 - 1) {
                continue;
            }
            let points = if l == 0 { 2 } else { 1usize << (l - 1) };
            total += points * go(d - 1, budget - cost, boundary);
        }
        total
    }
    go(dims, n as i64 + dims as i64 - 1, boundary)
}

/// P-greedy with a fresh Cholesky solve of the kernel matrix at each step.
pub fn greedy_brute_force(kernel: KernelSpec, pts: &[[f64; 3]], steps: usize) -> (Vec<usize>, Vec<f64>) {
    let mut sel: Vec<usize> = Vec::new();
    let mut vals = Vec::new();
    for _ in 0..steps {
        let p2: Vec<f64> = if sel.is_empty() {
            pts.iter().map(|x| kernel.eval(x, x)).collect()
        } else {
            let n = sel.len();
            let k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&pts[sel[i]], &pts[sel[j]]));
            let chol = k.cholesky().expect("positive definite kernel matrix");
            pts.iter()
                .map(|x| {
                    let kx = DVector::from_fn(n, |i, _| kernel.eval(x, &pts[sel[i]]));
                    (kernel.eval(x, x) - kx.dot(&chol.solve(&kx))).max(0.0)
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

/// Golub–Welsch Gauss–Legendre rule on `[0, 1]`.
pub fn golub_welsch(n: usize) -> Vec<(f64, f64)> {
    let j = DMatrix::from_fn(n, n, |a, b| {
        if a + 1 == b || b + 1 == a {
            let k = a.max(b) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = j.symmetric_eigen();
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| (0.5 * (eig.eigenvalues[i] + 1.0), eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Galerkin tendencies `⟨F(Π S), Φ_{p,l}⟩` for every element, assembled on
/// the whole cube by a composite rule of `order` points per element and
/// dimension, expanding `Π S` over every basis function at every point.
pub fn dense_tendency(state: &HsgState, cfg: &ScenarioConfig<f64>, solver: &SolverConfig<f64>, order: usize) -> Vec<Vec<f64>> {
    let m = 1usize << state.n_r;
    let rule = golub_welsch(order);
    let modes = HsgBasis::new(state.n_r, state.n_o, 1).unwrap().modes;
    let amp = ((m * m * m) as f64).sqrt();
    let phi = |p: &[usize; 3], x: [f64; 3], l: [usize; 3]| -> f64 {
        let mut v = amp;
        for d in 0..3 {
            let lo = l[d] as f64 / m as f64;
            let hi = (l[d] + 1) as f64 / m as f64;
            let inside = x[d] >= lo && (x[d] < hi || (l[d] + 1 == m && x[d] <= hi));
            if !inside {
                return 0.0;
            }
            let t = (x[d] - lo) * m as f64;
            let c = legendre_coeffs(p[d]);
            let y = 2.0 * t - 1.0;
            v *= c.iter().rev().fold(0.0, |acc, k| acc * y + k);
        }
        v
    };
    let elems: Vec<[usize; 3]> = (0..m * m * m).map(|f| [f / (m * m), (f / m) % m, f % m]).collect();
    let n = cfg.n_cells;
    let mut out = vec![vec![0.0; n * modes.len()]; elems.len()];
    let mut ws = Workspace::new(n);
    for (ex, l) in elems.iter().enumerate() {
        for a in &rule {
            for b in &rule {
                for c in &rule {
                    let x = [
                        (l[0] as f64 + a.0) / m as f64,
                        (l[1] as f64 + b.0) / m as f64,
                        (l[2] as f64 + c.0) / m as f64,
                    ];
                    let w = a.1 * b.1 * c.1 / (m * m * m) as f64;
                    let mut s = vec![0.0; n];
                    for (ey, ly) in elems.iter().enumerate() {
                        for (pi, p) in modes.iter().enumerate() {
                            let f = phi(p, x, *ly);
                            if f != 0.0 {
                                for j in 0..n {
                                    s[j] += state.coefficients[ey][j * modes.len() + pi] * f;
                                }
                            }
                        }
                    }
                    let s: Vec<f64> = s.iter().map(|v| v.clamp(0.0, 1.0)).collect();
                    let omega = UncertainInput::from_array(state.input_box.from_unit(x));
                    let t = Transport::new(&omega, cfg, solver).unwrap();
                    let mut rhs = vec![0.0; n];
                    t.rhs(&s, &mut rhs, &mut ws);
                    for (pi, p) in modes.iter().enumerate() {
                        let f = phi(p, x, *l);
                        for j in 0..n {
                            out[ex][j * modes.len() + pi] += w * f * rhs[j];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Cell averages of a fine radial grid restricted to one of half the
/// resolution, weighted by `r`.
pub fn restrict(fine: &[f64], r_fine: &[f64]) -> Vec<f64> {
    fine.chunks(2)
        .zip(r_fine.chunks(2))
        .map(|(s, r)| (s[0] * r[0] + s[1] * r[1]) / (r[0] + r[1]))
        .collect()
}
