//! The data-driven input layer: the sample set Θ, its ingestion or
//! synthetic generation, and empirical raw moments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::UncertainInput;
use crate::scalar::{CompensatedSum, Scalar};

/// Marginal law of one input dimension.
///
/// `params` by family: `uniform` = [lo, hi]; `normal` = [mean, std];
/// `lognormal` = [mu, sigma] of the underlying normal; `beta` = [a, b, lo, hi].
/// Optional `lower`/`upper` truncate any family by rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub family: String,
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl MarginalSpec {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self {
            family: "uniform".into(),
            params: vec![lo, hi],
            lower: None,
            upper: None,
        }
    }

    pub fn truncated_normal(mean: f64, std: f64, lo: f64, hi: f64) -> Self {
        Self {
            family: "normal".into(),
            params: vec![mean, std],
            lower: Some(lo),
            upper: Some(hi),
        }
    }
}

/// Independent per-dimension marginals for (ω₁, ω₂, ω₃).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub omega1: MarginalSpec,
    pub omega2: MarginalSpec,
    pub omega3: MarginalSpec,
}

impl Default for DistributionSpec {
    /// Synthetic stand-in for the benchmark data set: a unimodal rate
    /// perturbation around 0, a spread exponent and porosity around 0.15.
    fn default() -> Self {
        Self {
            omega1: MarginalSpec::truncated_normal(0.0, 0.15, -0.45, 0.45),
            omega2: MarginalSpec::uniform(1.5, 4.5),
            omega3: MarginalSpec::truncated_normal(0.15, 0.03, 0.05, 0.3),
        }
    }
}

enum Sampler {
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
    LogNormal(LogNormal<f64>),
    Beta(Beta<f64>, f64, f64),
}

struct Marginal {
    sampler: Sampler,
    lower: f64,
    upper: f64,
}

impl Marginal {
    fn build(spec: &MarginalSpec) -> Result<Self> {
        let p = &spec.params;
        let need = |n: usize| -> Result<()> {
            if p.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "family '{}' takes {n} parameters, got {}",
                    spec.family,
                    p.len()
                )));
            }
            Ok(())
        };
        let bad = |e: String| Error::InvalidConfig(format!("family '{}': {e}", spec.family));
        let sampler = match spec.family.to_ascii_lowercase().as_str() {
            "uniform" => {
                need(2)?;
                Sampler::Uniform(Uniform::new(p[0], p[1]).map_err(|e| bad(e.to_string()))?)
            }
            "normal" => {
                need(2)?;
                Sampler::Normal(Normal::new(p[0], p[1]).map_err(|e| bad(e.to_string()))?)
            }
            "lognormal" => {
                need(2)?;
                Sampler::LogNormal(LogNormal::new(p[0], p[1]).map_err(|e| bad(e.to_string()))?)
            }
            "beta" => {
                need(4)?;
                Sampler::Beta(Beta::new(p[0], p[1]).map_err(|e| bad(e.to_string()))?, p[2], p[3])
            }
            other => return Err(Error::Unsupported(format!("unsupported distribution family '{other}'"))),
        };
        let lower = spec.lower.unwrap_or(f64::NEG_INFINITY);
        let upper = spec.upper.unwrap_or(f64::INFINITY);
        if !(lower < upper) {
            return Err(bad(format!("empty truncation interval [{lower}, {upper}]")));
        }
        Ok(Self { sampler, lower, upper })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<f64> {
        const MAX_TRIES: usize = 100_000;
        for _ in 0..MAX_TRIES {
            let x = match &self.sampler {
                Sampler::Uniform(d) => d.sample(rng),
                Sampler::Normal(d) => d.sample(rng),
                Sampler::LogNormal(d) => d.sample(rng),
                Sampler::Beta(d, lo, hi) => lo + (hi - lo) * d.sample(rng),
            };
            if x >= self.lower && x <= self.upper {
                return Ok(x);
            }
        }
        Err(Error::InvalidConfig(format!(
            "truncation [{}, {}] rejects almost all draws",
            self.lower, self.upper
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Loaded(PathBuf),
    Generated { seed: u64, spec: DistributionSpec },
    Derived(String),
}

/// The sample set Θ.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    pub samples: Vec<UncertainInput<T>>,
    pub provenance: Provenance,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new(samples: Vec<UncertainInput<T>>, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("sample set must not be empty".into()));
        }
        for (index, s) in samples.iter().enumerate() {
            s.check().map_err(|message| Error::Invariant { index, message })?;
        }
        Ok(Self { samples, provenance })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn column(&self, dim: usize) -> Vec<T> {
        self.samples.iter().map(|s| s.get(dim)).collect()
    }

    /// Componentwise `(min, max)`.
    pub fn bounds(&self) -> [(T, T); 3] {
        let mut b = [(T::infinity(), T::neg_infinity()); 3];
        for s in &self.samples {
            for (d, v) in s.to_array().into_iter().enumerate() {
                b[d].0 = b[d].0.min(v);
                b[d].1 = b[d].1.max(v);
            }
        }
        b
    }

    /// First `n` samples as a new set.
    pub fn head(&self, n: usize) -> Result<Self> {
        Self::new(
            self.samples[..n.min(self.len())].to_vec(),
            Provenance::Derived(format!("first {n} samples")),
        )
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("omega1,omega2,omega3\n");
        for s in &self.samples {
            writeln!(out, "{:e},{:e},{:e}", s.omega1.f64(), s.omega2.f64(), s.omega3.f64())
                .expect("write to string");
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> SampleSet<U> {
        SampleSet {
            samples: self.samples.iter().map(|s| s.cast()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Reads a three-column sample file. Fields may be separated by commas,
/// semicolons or whitespace; a non-numeric first line is a header.
pub fn load_samples<T: Scalar>(path: impl AsRef<Path>) -> Result<SampleSet<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if samples.is_empty() && line_no == first_content_line(&text) => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-numeric field ({e})"),
                })
            }
        };
        if values.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 columns, found {}", values.len()),
            });
        }
        let s = UncertainInput::new(T::of(values[0]), T::of(values[1]), T::of(values[2]));
        s.check().map_err(|message| Error::Parse {
            line: line_no,
            message: format!("invariant violated: {message}"),
        })?;
        samples.push(s);
    }
    SampleSet::new(samples, Provenance::Loaded(path.to_path_buf()))
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|p| p + 1)
        .unwrap_or(0)
}

/// Draws `n` independent samples from `spec` with a seeded ChaCha stream.
pub fn generate_samples<T: Scalar>(spec: &DistributionSpec, n: usize, seed: u64) -> Result<SampleSet<T>> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let marginals = [
        Marginal::build(&spec.omega1)?,
        Marginal::build(&spec.omega2)?,
        Marginal::build(&spec.omega3)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for index in 0..n {
        let mut v = [0.0; 3];
        for (d, m) in marginals.iter().enumerate() {
            v[d] = m.draw(&mut rng)?;
        }
        let s = UncertainInput::new(T::of(v[0]), T::of(v[1]), T::of(v[2]));
        s.check().map_err(|message| Error::Invariant { index, message })?;
        samples.push(s);
    }
    // keeps the stream position meaningful if callers draw more later
    let _ = rng.random::<u32>();
    SampleSet::new(samples, Provenance::Generated { seed, spec: spec.clone() })
}

/// `E[ω_dim^k]` for `k = 0..=k_max` under the empirical measure.
pub fn raw_moments<T: Scalar>(set: &SampleSet<T>, dim: usize, k_max: usize) -> Vec<T> {
    assert!(dim < 3, "dimension index {dim} out of range");
    let n = T::of_usize(set.len());
    let mut acc = vec![CompensatedSum::new(); k_max + 1];
    for s in &set.samples {
        let x = s.get(dim);
        let mut p = T::one();
        for a in acc.iter_mut() {
            a.add(p);
            p *= x;
        }
    }
    acc.iter().map(|a| a.value() / n).collect()
}

/// Per-dimension descriptive statistics for reports.
pub fn summarize<T: Scalar>(set: &SampleSet<T>) -> String {
    let names = ["omega1", "omega2", "omega3"];
    let bounds = set.bounds();
    let mut out = format!("{} samples\n", set.len());
    out.push_str("dim      mean          std           min           max\n");
    for d in 0..3 {
        let m = raw_moments(set, d, 2);
        let var = (m[2] - m[1] * m[1]).max(T::zero());
        writeln!(
            out,
            "{:<8} {:<13.6e} {:<13.6e} {:<13.6e} {:<13.6e}",
            names[d],
            m[1].f64(),
            var.sqrt().f64(),
            bounds[d].0.f64(),
            bounds[d].1.f64()
        )
        .expect("write to string");
    }
    out
}
