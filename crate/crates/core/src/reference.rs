//! Monte-Carlo reference statistics over the sample set.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Model, SolverModel, Surrogate};
use crate::physics::{ScenarioConfig, UncertainInput};
use crate::scalar::{CompensatedSum, Scalar};
use crate::solver::{Grid, SolverConfig};
use crate::stochastic::{Provenance, SampleSet};

/// Per-cell mean and standard deviation of the saturation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField<T> {
    pub r_centers: Vec<T>,
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub n_samples: usize,
    pub t: T,
}

impl<T: Scalar> MomentField<T> {
    /// Empirical mean and unbiased (n−1) standard deviation of `runs`
    /// (std is 0 for a single run). With `clamp`, every value is clipped to
    /// [0,1] first.
    pub fn from_runs(runs: &[Vec<T>], r_centers: &[T], t: T, clamp: bool) -> Result<Self> {
        let n = runs.len();
        if n == 0 {
            return Err(Error::InvalidConfig("no runs to summarise".into()));
        }
        let cells = r_centers.len();
        if let Some(bad) = runs.iter().find(|r| r.len() != cells) {
            return Err(Error::GridMismatch(format!("run has {} cells, grid has {cells}", bad.len())));
        }
        let value = |x: T| if clamp { x.max(T::zero()).min(T::one()) } else { x };
        let nf = T::of_usize(n);
        let mut mean = Vec::with_capacity(cells);
        let mut std = Vec::with_capacity(cells);
        for j in 0..cells {
            let m = runs.iter().map(|r| value(r[j])).collect::<CompensatedSum<T>>().value() / nf;
            let ss = runs
                .iter()
                .map(|r| {
                    let d = value(r[j]) - m;
                    d * d
                })
                .collect::<CompensatedSum<T>>()
                .value();
            mean.push(m);
            std.push(if n > 1 { (ss / T::of_usize(n - 1)).sqrt() } else { T::zero() });
        }
        Ok(Self {
            r_centers: r_centers.to_vec(),
            mean,
            std,
            n_samples: n,
            t,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.r_centers.len()
    }

    /// CSV with columns `r_center,mean,std`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r_center", "mean", "std"])?;
        for j in 0..self.n_cells() {
            w.write_record([
                format!("{:e}", self.r_centers[j].f64()),
                format!("{:e}", self.mean[j].f64()),
                format!("{:e}", self.std[j].f64()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, n_samples: usize, t: T) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path)?;
        let (mut r, mut m, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<T> {
                rec.get(k)
                    .and_then(|v| v.parse::<f64>().ok())
                    .map(T::of)
                    .ok_or_else(|| Error::Parse {
                        line: i + 2,
                        message: format!("column {k} missing or non-numeric"),
                    })
            };
            r.push(field(0)?);
            m.push(field(1)?);
            s.push(field(2)?);
        }
        Ok(Self {
            r_centers: r,
            mean: m,
            std: s,
            n_samples,
            t,
        })
    }
}

/// Moments together with every individual run they were computed from.
#[derive(Debug, Clone)]
pub struct ReferenceRun<T> {
    pub moments: MomentField<T>,
    pub runs: Vec<Vec<T>>,
}

/// Runs `model` on every sample (in parallel) and summarises the outputs.
pub fn run_reference_with<T: Scalar, M: Model<T>>(
    set: &SampleSet<T>,
    model: &M,
    r_centers: &[T],
    t: T,
) -> Result<ReferenceRun<T>> {
    let runs = model.evaluate_batch(&set.samples)?;
    let moments = MomentField::from_runs(&runs, r_centers, t, false)?;
    Ok(ReferenceRun { moments, runs })
}

pub fn run_reference<T: Scalar>(
    set: &SampleSet<T>,
    cfg: &ScenarioConfig<T>,
    solver_cfg: &SolverConfig<T>,
) -> Result<ReferenceRun<T>> {
    let grid = Grid::from_config(cfg)?;
    let model = SolverModel::new(*cfg, *solver_cfg);
    run_reference_with(set, &model, &grid.r_centers, cfg.t_end)
}

/// Copy of `set` where every coordinate except `dim` (0-based) is frozen
/// at the nominal value.
pub fn single_factor_set<T: Scalar>(set: &SampleSet<T>, dim: usize, nominal: &UncertainInput<T>) -> Result<SampleSet<T>> {
    if dim >= 3 {
        return Err(Error::InvalidConfig(format!("dimension {dim} out of range 0..3")));
    }
    let base = nominal.to_array();
    let samples = set
        .samples
        .iter()
        .map(|s| {
            let mut v = base;
            v[dim] = s.get(dim);
            UncertainInput::from_array(v)
        })
        .collect();
    SampleSet::new(samples, Provenance::Derived(format!("single factor omega{}", dim + 1)))
}

/// Reference with only input `dim` (0-based) random.
pub fn single_factor_reference<T: Scalar>(
    set: &SampleSet<T>,
    dim: usize,
    cfg: &ScenarioConfig<T>,
    solver_cfg: &SolverConfig<T>,
) -> Result<ReferenceRun<T>> {
    let frozen = single_factor_set(set, dim, &cfg.nominal_input())?;
    run_reference(&frozen, cfg, solver_cfg)
}

/// Evaluates `surrogate` over Θ and returns the clamped empirical moments;
/// the moment protocol shared by every method.
pub fn surrogate_moments<T: Scalar, S: Surrogate<T> + ?Sized>(
    surrogate: &S,
    set: &SampleSet<T>,
    r_centers: &[T],
    t: T,
) -> Result<MomentField<T>> {
    let evals: Vec<Vec<T>> = set.samples.par_iter().map(|w| surrogate.predict(w)).collect::<Result<_>>()?;
    MomentField::from_runs(&evals, r_centers, t, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use crate::stochastic::{generate_samples, DistributionSpec};

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 + 0.5).collect()
    }

    #[test]
    fn single_run_has_zero_std() {
        let m = MomentField::from_runs(&[vec![0.1, 0.2]], &grid(2), 1.0, false).unwrap();
        assert_eq!(m.mean, vec![0.1, 0.2]);
        assert_eq!(m.std, vec![0.0, 0.0]);
    }

    #[test]
    fn duplicated_runs_have_zero_std() {
        let m = MomentField::from_runs(&[vec![0.3, 0.4], vec![0.3, 0.4]], &grid(2), 1.0, false).unwrap();
        assert_eq!(m.std, vec![0.0, 0.0]);
    }

    #[test]
    fn unbiased_estimator() {
        let m = MomentField::from_runs(&[vec![0.0], vec![1.0]], &grid(1), 1.0, false).unwrap();
        assert!((m.std[0] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn moments_ignore_sample_order_and_vanish_where_runs_vanish() {
        let set: SampleSet<f64> = generate_samples(&DistributionSpec::default(), 40, 5).unwrap();
        let model = FnModel::new(3, |w: &UncertainInput<f64>| vec![w.omega1, w.omega2 * w.omega3, 0.0]);
        let a = run_reference_with(&set, &model, &grid(3), 1.0).unwrap();
        let mut rev = set.clone();
        rev.samples.reverse();
        let b = run_reference_with(&rev, &model, &grid(3), 1.0).unwrap();
        for j in 0..3 {
            assert!((a.moments.mean[j] - b.moments.mean[j]).abs() < 1e-15);
            assert!((a.moments.std[j] - b.moments.std[j]).abs() < 1e-15);
        }
        assert_eq!(a.moments.mean[2], 0.0);
        assert_eq!(a.moments.std[2], 0.0);
        assert_eq!(a.runs.len(), 40);
    }

    #[test]
    fn single_factor_freezes_other_dimensions() {
        let set: SampleSet<f64> = generate_samples(&DistributionSpec::default(), 30, 5).unwrap();
        let nominal = UncertainInput::new(0.0, 2.0, 0.15);
        let frozen = single_factor_set(&set, 2, &nominal).unwrap();
        assert!(frozen.samples.iter().all(|s| s.omega1 == 0.0 && s.omega2 == 2.0));
        assert_eq!(frozen.column(2), set.column(2));
    }

    #[test]
    fn failing_run_aborts_with_offending_sample() {
        let cfg = ScenarioConfig::<f64>::default().with_cells(20);
        let set = SampleSet::new(vec![UncertainInput::new(0.0, 2.0, 0.15)], Provenance::Derived("x".into())).unwrap();
        let bad_solver = SolverConfig {
            cfl: 0.9,
            ..SolverConfig::default()
        };
        match run_reference(&set, &cfg, &bad_solver) {
            Err(Error::ModelRun { omega3, .. }) => assert_eq!(omega3, 0.15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = MomentField::from_runs(&[vec![0.1, 0.2], vec![0.3, 0.0]], &grid(2), 1.0, false).unwrap();
        let p = dir.path().join("m.csv");
        m.write_csv(&p).unwrap();
        let back = MomentField::read_csv(&p, 2, 1.0).unwrap();
        assert_eq!(back, m);
    }
}
