//! Data-driven arbitrary polynomial chaos: orthonormal bases built from raw
//! sample moments, collocation (PCM) and full-tensor least-squares fits.

use std::path::Path;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, Surrogate};
use crate::physics::UncertainInput;
use crate::reference::{surrogate_moments, MomentField};
use crate::scalar::Scalar;
use crate::stochastic::SampleSet;

/// Highest expansion order accepted by the collocation fit.
pub const MAX_PCM_ORDER: usize = 5;
/// Highest expansion order accepted by the full-tensor fit.
pub const MAX_FT_ORDER: usize = 10;
/// Condition number above which a PCM fit is flagged.
pub const PCM_CONDITION_WARNING: f64 = 1e12;

/// `(N+d)!/(N!d!)`, the number of `d`-variate polynomials of total degree
/// at most `N` (constant included).
pub fn basis_count(order: usize, dims: usize) -> usize {
    let mut c: u128 = 1;
    for k in 1..=dims as u128 {
        c = c * (order as u128 + k) / k;
    }
    c as usize
}

/// Univariate polynomials orthonormal under an empirical measure.
///
/// Row `k` of `coeffs` holds the monomial coefficients (ascending) of the
/// degree-`k` polynomial in the standardized variable `x = (ω − shift)/scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis1D {
    pub order: usize,
    pub shift: f64,
    pub scale: f64,
    pub coeffs: Vec<Vec<f64>>,
}

/// `Σ xᵢ^k / N` for `k = 0..=k_max`, exactly.
fn exact_moments(xs: &[f64], k_max: usize) -> Vec<BigRational> {
    // write every sample as nᵢ·2^(−s) with integer nᵢ and a shared s
    let decoded: Vec<(u64, i16, i8)> = xs.iter().map(|x| Float::integer_decode(*x)).collect();
    let s = decoded
        .iter()
        .filter(|d| d.0 != 0)
        .map(|d| -(d.1 as i64))
        .max()
        .unwrap_or(0)
        .max(0) as u64;
    let ints: Vec<BigInt> = decoded
        .iter()
        .map(|&(m, e, sign)| {
            let n = BigInt::from(m) << ((e as i64 + s as i64) as u64);
            if sign < 0 {
                -n
            } else {
                n
            }
        })
        .collect();
    let mut sums = vec![BigInt::zero(); k_max + 1];
    for n in &ints {
        let mut p = BigInt::one();
        for sum in sums.iter_mut() {
            *sum += &p;
            p *= n;
        }
    }
    let count = BigInt::from(xs.len());
    sums.into_iter()
        .enumerate()
        .map(|(k, sum)| BigRational::new(sum, &count << (s * k as u64)))
        .collect()
}

/// Solves `A x = b` over the rationals; `None` if `A` is singular.
fn solve_rational(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &a[col][col];
            for c in col..n {
                let t = &f * &a[col][c];
                a[r][c] -= t;
            }
            let t = &f * &b[col];
            b[r] -= t;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            acc -= &a[r][c] * &x[c];
        }
        x[r] = acc / &a[r][r];
    }
    Some(x)
}

/// Orthonormal polynomials of degrees `0..=order` from the moments
/// `μ_0..μ_{2·order}` by solving the Hankel moment system for each degree.
fn hankel_basis(mu: &[BigRational], order: usize) -> Result<Vec<Vec<f64>>> {
    if mu.len() < 2 * order + 1 {
        return Err(Error::InvalidConfig(format!(
            "order {order} needs {} moments, got {}",
            2 * order + 1,
            mu.len()
        )));
    }
    if !mu[0].is_positive() {
        return Err(Error::Singular("zeroth moment must be positive".into()));
    }
    let singular = |d: usize| {
        Error::Singular(format!(
            "moment matrix of degree {d} is singular or indefinite; the data support at most order {}, reduce the expansion order",
            d.saturating_sub(1)
        ))
    };
    let mut rows = Vec::with_capacity(order + 1);
    for d in 0..=order {
        // monic π_d = x^d + Σ_{j<d} a_j x^j orthogonal to 1..x^{d-1}
        let a: Vec<Vec<BigRational>> = (0..d).map(|i| (0..d).map(|j| mu[i + j].clone()).collect()).collect();
        let b: Vec<BigRational> = (0..d).map(|i| -mu[i + d].clone()).collect();
        let mut monic = solve_rational(a, b).ok_or_else(|| singular(d))?;
        monic.push(BigRational::one());
        let norm2 = monic
            .iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (j, c)| acc + c * &mu[j + d]);
        if !norm2.is_positive() {
            return Err(singular(d));
        }
        let inv = 1.0 / norm2.to_f64().ok_or_else(|| singular(d))?.sqrt();
        let row: Vec<f64> = monic.iter().map(|c| c.to_f64().unwrap_or(f64::NAN) * inv).collect();
        if row.iter().any(|c| !c.is_finite()) || inv == 0.0 || !inv.is_finite() {
            return Err(singular(d));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Basis of degrees `0..=order` from raw moments `E[ω^k]`, `k = 0..=2·order`
/// (no standardization is applied).
pub fn build_basis(moments: &[f64], order: usize) -> Result<OrthonormalBasis1D> {
    let mu = moments
        .iter()
        .map(|&m| BigRational::from_float(m).ok_or_else(|| Error::Numeric(format!("moment {m} is not finite"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrthonormalBasis1D {
        order,
        shift: 0.0,
        scale: 1.0,
        coeffs: hankel_basis(&mu, order)?,
    })
}

impl OrthonormalBasis1D {
    /// Builds the basis from samples: they are standardized, their moments
    /// up to `2·order` are formed exactly and the moment system is solved in
    /// rational arithmetic.
    pub fn from_samples<T: Scalar>(samples: &[T], order: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("empty sample column".into()));
        }
        let raw: Vec<f64> = samples.iter().map(|v| v.f64()).collect();
        let n = raw.len() as f64;
        let shift = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|v| (v - shift) * (v - shift)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let xs: Vec<f64> = raw.iter().map(|v| (v - shift) / scale).collect();
        let mu = exact_moments(&xs, 2 * order);
        Ok(Self {
            order,
            shift,
            scale,
            coeffs: hankel_basis(&mu, order)?,
        })
    }

    #[inline]
    pub fn standardize(&self, omega: f64) -> f64 {
        (omega - self.shift) / self.scale
    }

    #[inline]
    pub fn unstandardize(&self, x: f64) -> f64 {
        self.shift + self.scale * x
    }

    /// `P_k(x)` in the standardized variable.
    pub fn eval_std(&self, k: usize, x: f64) -> f64 {
        self.coeffs[k].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval(&self, k: usize, omega: f64) -> f64 {
        self.eval_std(k, self.standardize(omega))
    }

    /// `P_0..P_order` at `ω`.
    pub fn eval_all(&self, omega: f64, out: &mut [f64]) {
        let x = self.standardize(omega);
        for (k, o) in out.iter_mut().enumerate().take(self.order + 1) {
            *o = self.eval_std(k, x);
        }
    }

    /// The same polynomials restricted to degrees `0..=order`.
    pub fn truncated(&self, order: usize) -> Self {
        Self {
            order,
            shift: self.shift,
            scale: self.scale,
            coeffs: self.coeffs[..=order].to_vec(),
        }
    }

    /// Monomial coefficients of `P_k` in the original variable `ω`.
    pub fn raw_coefficients(&self, k: usize) -> Vec<f64> {
        // P_k((ω − s)/h) = Σ_j c_j h^{-j} (ω − s)^j
        let mut out = vec![0.0; k + 1];
        for (j, &c) in self.coeffs[k].iter().enumerate() {
            let cj = c / self.scale.powi(j as i32);
            let mut binom = 1.0;
            for i in 0..=j {
                out[i] += cj * binom * (-self.shift).powi((j - i) as i32);
                binom = binom * (j - i) as f64 / (i + 1) as f64;
            }
        }
        out
    }

    /// Real roots of `P_k` in the original variable, ascending.
    pub fn roots(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        // zeros of an orthonormal polynomial are real, simple and bracketed
        // by the Cauchy bound
        let lead = self.coeffs[k][k];
        let bound = 1.0 + self.coeffs[k][..k].iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
        let mut samples = 4096usize;
        while samples <= 1 << 24 {
            let xs: Vec<f64> = (0..=samples)
                .map(|i| -bound + 2.0 * bound * i as f64 / samples as f64)
                .collect();
            let vals: Vec<f64> = xs.iter().map(|&x| self.eval_std(k, x)).collect();
            let mut found = Vec::new();
            for i in 0..samples {
                let (fa, fb) = (vals[i], vals[i + 1]);
                if fa == 0.0 {
                    found.push(xs[i]);
                } else if fa * fb < 0.0 {
                    found.push(self.bisect(k, xs[i], xs[i + 1], fa));
                }
            }
            if vals[samples] == 0.0 {
                found.push(xs[samples]);
            }
            if found.len() == k {
                return Ok(found.into_iter().map(|x| self.unstandardize(x)).collect());
            }
            samples *= 8;
        }
        Err(Error::Numeric(format!("could not isolate the {k} roots of the degree-{k} polynomial")))
    }

    fn bisect(&self, k: usize, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = self.eval_std(k, m);
            if fm == 0.0 {
                return m;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        0.5 * (a + b)
    }

    /// `max |G − I|` of the empirical Gram matrix over `samples`.
    pub fn gram_deviation<T: Scalar>(&self, samples: &[T]) -> f64 {
        let n = self.order + 1;
        let mut gram = vec![0.0; n * n];
        let mut p = vec![0.0; n];
        for s in samples {
            self.eval_all(s.f64(), &mut p);
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += p[a] * p[b];
                }
            }
        }
        let m = samples.len() as f64;
        let mut dev: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let target = if a == b { 1.0 } else { 0.0 };
                dev = dev.max((gram[a * n + b] / m - target).abs());
            }
        }
        dev
    }
}

/// Multi-indices of total degree at most `order` in three variables, graded
/// by total degree and within a degree in descending lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    pub order: usize,
    pub includes_constant: bool,
    pub indices: Vec<[usize; 3]>,
}

impl MultiIndexSet {
    pub fn total_degree(order: usize, include_constant: bool) -> Self {
        let mut indices = Vec::with_capacity(basis_count(order, 3));
        let first = if include_constant { 0 } else { 1 };
        for deg in first..=order {
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    indices.push([a, b, deg - a - b]);
                }
            }
        }
        Self {
            order,
            includes_constant: include_constant,
            indices,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApcVariant {
    Pcm,
    Ft,
}

impl std::fmt::Display for ApcVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ApcVariant::Pcm => "pcm",
            ApcVariant::Ft => "ft",
        })
    }
}

/// A fitted expansion `S(ω) ≈ Σ_i S_i Φ_i(ω)`; `coefficients[i]` is the
/// vector `S_i` over all output cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceSurrogate {
    pub variant: ApcVariant,
    pub order: usize,
    pub bases: [OrthonormalBasis1D; 3],
    pub indices: MultiIndexSet,
    pub coefficients: Vec<Vec<f64>>,
    /// Parameter points the model was run at.
    pub nodes: Vec<[f64; 3]>,
    pub condition_number: Option<f64>,
    pub residual_norm: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Values of every multivariate basis function at `ω`.
fn design_row(bases: &[OrthonormalBasis1D; 3], indices: &MultiIndexSet, omega: [f64; 3], row: &mut [f64]) {
    let order = bases.iter().map(|b| b.order).min().unwrap_or(0);
    let mut uni = [vec![0.0; order + 1], vec![0.0; order + 1], vec![0.0; order + 1]];
    for d in 0..3 {
        let x = bases[d].standardize(omega[d]);
        for k in 0..=order {
            uni[d][k] = bases[d].eval_std(k, x);
        }
    }
    for (r, idx) in row.iter_mut().zip(&indices.indices) {
        *r = uni[0][idx[0]] * uni[1][idx[1]] * uni[2][idx[2]];
    }
}

fn design_matrix(bases: &[OrthonormalBasis1D; 3], indices: &MultiIndexSet, nodes: &[[f64; 3]]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(nodes.len(), indices.len());
    let mut row = vec![0.0; indices.len()];
    for (i, node) in nodes.iter().enumerate() {
        design_row(bases, indices, *node, &mut row);
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

fn output_matrix(outputs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let rows = outputs.len();
    let cols = outputs.first().map_or(0, |o| o.len());
    if outputs.iter().any(|o| o.len() != cols) {
        return Err(Error::GridMismatch("model outputs differ in length".into()));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| outputs[i][j]))
}

fn coefficient_rows(c: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect()
}

impl PceSurrogate {
    pub fn n_terms(&self) -> usize {
        self.indices.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.coefficients.first().map_or(0, |c| c.len())
    }

    pub fn n_runs(&self) -> usize {
        self.nodes.len()
    }

    pub fn predict_f64(&self, omega: [f64; 3]) -> Vec<f64> {
        let mut row = vec![0.0; self.n_terms()];
        design_row(&self.bases, &self.indices, omega, &mut row);
        let mut out = vec![0.0; self.n_outputs()];
        for (phi, coef) in row.iter().zip(&self.coefficients) {
            for (o, c) in out.iter_mut().zip(coef) {
                *o += phi * c;
            }
        }
        out
    }

    /// Mean `c₀` and standard deviation `√Σ_{i≥1} c_i²`, read off the
    /// coefficients (population convention of the fitting measure).
    pub fn analytic_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_outputs();
        let mut mean = vec![0.0; n];
        let mut var = vec![0.0; n];
        for (idx, coef) in self.indices.indices.iter().zip(&self.coefficients) {
            if *idx == [0, 0, 0] {
                mean.copy_from_slice(coef);
            } else {
                for (v, c) in var.iter_mut().zip(coef) {
                    *v += c * c;
                }
            }
        }
        (mean, var.into_iter().map(f64::sqrt).collect())
    }

    pub fn analytic_moment_field<T: Scalar>(&self, r_centers: &[T], t: T) -> Result<MomentField<T>> {
        let (mean, std) = self.analytic_moments();
        if mean.len() != r_centers.len() {
            return Err(Error::GridMismatch(format!(
                "surrogate has {} outputs, grid has {} cells",
                mean.len(),
                r_centers.len()
            )));
        }
        Ok(MomentField {
            r_centers: r_centers.to_vec(),
            mean: mean.into_iter().map(T::of).collect(),
            std: std.into_iter().map(T::of).collect(),
            n_samples: self.n_runs(),
            t,
        })
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

impl<T: Scalar> Surrogate<T> for PceSurrogate {
    fn predict(&self, omega: &UncertainInput<T>) -> Result<Vec<T>> {
        let w = omega.to_array().map(|v| v.f64());
        Ok(self.predict_f64(w).into_iter().map(T::of).collect())
    }
}

/// Bases of degree `0..=order` for each input column of `set`.
pub fn sample_bases<T: Scalar>(set: &SampleSet<T>, order: usize) -> Result<[OrthonormalBasis1D; 3]> {
    let b = |d: usize| OrthonormalBasis1D::from_samples(&set.column(d), order);
    Ok([b(0)?, b(1)?, b(2)?])
}

/// Silverman's rule-of-thumb bandwidth `0.9·min(σ, IQR/1.34)·N^{-1/5}`.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

/// Gaussian kernel density estimate of `xs` at `x` with bandwidth `h`.
pub fn kde(xs: &[f64], h: f64, x: f64) -> f64 {
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    xs.iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm
}

/// Collocation nodes for an order-`order` expansion.
///
/// Candidates are the tensor combinations of the roots of the
/// degree-`order+1` polynomials, visited by decreasing product of marginal
/// kernel densities (ties in lexicographic root order). A candidate is kept
/// when it raises the rank of the collocation matrix, until the matrix is
/// square.
pub fn pcm_points<T: Scalar>(bases: &[OrthonormalBasis1D; 3], order: usize, set: &SampleSet<T>) -> Result<Vec<[f64; 3]>> {
    if bases.iter().any(|b| b.order < order + 1) {
        return Err(Error::InvalidConfig(format!(
            "collocation at order {order} needs bases of degree {}",
            order + 1
        )));
    }
    let roots: Vec<Vec<f64>> = bases.iter().map(|b| b.roots(order + 1)).collect::<Result<_>>()?;
    let mut density = Vec::with_capacity(3);
    for d in 0..3 {
        let col: Vec<f64> = set.column(d).iter().map(|v| v.f64()).collect();
        let h = silverman_bandwidth(&col);
        density.push(roots[d].iter().map(|&r| kde(&col, h, r)).collect::<Vec<f64>>());
    }
    let m = order + 1;
    let mut candidates: Vec<([usize; 3], f64)> = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                candidates.push(([i, j, k], density[0][i] * density[1][j] * density[2][k]));
            }
        }
    }
    // stable sort keeps the lexicographic order among equal densities
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));

    let indices = MultiIndexSet::total_degree(order, true);
    let truncated = [bases[0].truncated(order), bases[1].truncated(order), bases[2].truncated(order)];
    let need = indices.len();
    let mut nodes = Vec::with_capacity(need);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(need);
    let mut row = vec![0.0; need];
    for (idx, _) in candidates {
        let node = [roots[0][idx[0]], roots[1][idx[1]], roots[2][idx[2]]];
        design_row(&truncated, &indices, node, &mut row);
        let norm0 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = row.clone();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &ortho {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            ortho.push(v);
            nodes.push(node);
            if nodes.len() == need {
                return Ok(nodes);
            }
        }
    }
    Err(Error::Singular(format!(
        "only {} independent tensor nodes for {need} basis functions at order {order}",
        nodes.len()
    )))
}

/// Coefficients interpolating `outputs` at `nodes` (square system).
pub fn fit_pcm(bases: &[OrthonormalBasis1D; 3], order: usize, nodes: &[[f64; 3]], outputs: &[Vec<f64>]) -> Result<PceSurrogate> {
    let bases = [bases[0].truncated(order), bases[1].truncated(order), bases[2].truncated(order)];
    let indices = MultiIndexSet::total_degree(order, true);
    if nodes.len() != indices.len() || outputs.len() != nodes.len() {
        return Err(Error::InvalidConfig(format!(
            "collocation needs {} nodes and runs, got {} and {}",
            indices.len(),
            nodes.len(),
            outputs.len()
        )));
    }
    let phi = design_matrix(&bases, &indices, nodes);
    let y = output_matrix(outputs)?;
    let sv = phi.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let c = phi
        .lu()
        .solve(&y)
        .ok_or_else(|| Error::Singular("collocation matrix is singular".into()))?;
    let mut warnings = Vec::new();
    if cond > PCM_CONDITION_WARNING {
        let msg = format!("collocation matrix is ill-conditioned (condition number {cond:.3e})");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(PceSurrogate {
        variant: ApcVariant::Pcm,
        order,
        bases,
        indices,
        coefficients: coefficient_rows(&c),
        nodes: nodes.to_vec(),
        condition_number: Some(cond),
        residual_norm: None,
        warnings,
    })
}

/// The `(order+1)³` tensor grid of roots of the degree-`order+1` polynomials.
pub fn tensor_grid(bases: &[OrthonormalBasis1D; 3], order: usize) -> Result<Vec<[f64; 3]>> {
    let roots: Vec<Vec<f64>> = bases.iter().map(|b| b.roots(order + 1)).collect::<Result<_>>()?;
    let mut nodes = Vec::with_capacity((order + 1).pow(3));
    for &a in &roots[0] {
        for &b in &roots[1] {
            for &c in &roots[2] {
                nodes.push([a, b, c]);
            }
        }
    }
    Ok(nodes)
}

/// Least-squares coefficients over the full tensor grid.
pub fn fit_least_squares_ft(
    bases: &[OrthonormalBasis1D; 3],
    order: usize,
    nodes: &[[f64; 3]],
    outputs: &[Vec<f64>],
) -> Result<PceSurrogate> {
    let bases = [bases[0].truncated(order), bases[1].truncated(order), bases[2].truncated(order)];
    let indices = MultiIndexSet::total_degree(order, true);
    if outputs.len() != nodes.len() {
        return Err(Error::InvalidConfig(format!(
            "{} nodes but {} model runs",
            nodes.len(),
            outputs.len()
        )));
    }
    let phi = design_matrix(&bases, &indices, nodes);
    let y = output_matrix(outputs)?;
    let svd = phi.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-12 * nodes.len().max(indices.len()) as f64;
    let rank = svd.rank(tol);
    if rank < indices.len() {
        return Err(Error::Singular(format!(
            "least-squares design matrix has rank {rank} < {} basis functions",
            indices.len()
        )));
    }
    let cond = smax / svd.singular_values.min();
    let c = svd.solve(&y, tol).map_err(|e| Error::Numeric(e.to_string()))?;
    let residual = (&phi * &c - &y).norm();
    Ok(PceSurrogate {
        variant: ApcVariant::Ft,
        order,
        bases,
        indices,
        coefficients: coefficient_rows(&c),
        nodes: nodes.to_vec(),
        condition_number: Some(cond),
        residual_norm: Some(residual),
        warnings: Vec::new(),
    })
}

fn run_nodes<T: Scalar, M: Model<T> + ?Sized>(model: &M, nodes: &[[f64; 3]]) -> Result<Vec<Vec<f64>>> {
    let inputs: Vec<UncertainInput<T>> = nodes
        .iter()
        .map(|n| UncertainInput::from_array(n.map(T::of)))
        .collect();
    let runs = model.evaluate_batch(&inputs)?;
    Ok(runs
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.f64()).collect())
        .collect())
}

/// Builds bases from `set`, runs `model` at the collocation nodes and fits.
pub fn build_pcm<T: Scalar, M: Model<T> + ?Sized>(set: &SampleSet<T>, order: usize, model: &M) -> Result<PceSurrogate> {
    if order > MAX_PCM_ORDER {
        return Err(Error::Unsupported(format!(
            "collocation order {order} exceeds the limit {MAX_PCM_ORDER}"
        )));
    }
    let bases = sample_bases(set, order + 1)?;
    let nodes = pcm_points(&bases, order, set)?;
    let outputs = run_nodes(model, &nodes)?;
    fit_pcm(&bases, order, &nodes, &outputs)
}

/// Builds bases from `set`, runs `model` on the full tensor grid and fits
/// by least squares.
pub fn build_ft<T: Scalar, M: Model<T> + ?Sized>(set: &SampleSet<T>, order: usize, model: &M) -> Result<PceSurrogate> {
    if order > MAX_FT_ORDER {
        return Err(Error::Unsupported(format!(
            "full-tensor order {order} exceeds the limit {MAX_FT_ORDER}"
        )));
    }
    let bases = sample_bases(set, order + 1)?;
    let nodes = tensor_grid(&bases, order)?;
    let outputs = run_nodes(model, &nodes)?;
    fit_least_squares_ft(&bases, order, &nodes, &outputs)
}

/// Clamped moments of the surrogate evaluated over every sample of `set`.
pub fn pce_moments<T: Scalar>(surrogate: &PceSurrogate, set: &SampleSet<T>, r_centers: &[T], t: T) -> Result<MomentField<T>> {
    surrogate_moments(surrogate, set, r_centers, t)
}
