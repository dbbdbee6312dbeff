use proptest::prelude::*;
use uqbench_core::physics::{fractional_flow, pressure_profile, ScenarioConfig, UncertainInput};
use uqbench_core::solver::{simulate, simulate_observed, SaturationField, SolverConfig, Transport};

fn short(cells: usize) -> ScenarioConfig<f64> {
    let mut c = ScenarioConfig::default().with_cells(cells);
    c.t_end /= 10.0;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bounded_and_conservative(w1 in -0.3f64..0.3, w2 in 1.5f64..3.0, w3 in 0.08f64..0.25) {
        let cfg = short(30);
        let solver = SolverConfig::default();
        let omega = UncertainInput::new(w1, w2, w3);
        let t = Transport::new(&omega, &cfg, &solver).unwrap();
        let mut mass = 0.0;
        simulate_observed(&omega, &cfg, &solver, &SaturationField::zeros(30), |rec, s| {
            assert!(s.iter().all(|&v| (-1e-12..=cfg.s_left + 1e-12).contains(&v)));
            let m = t.mass(s);
            let flux = rec.dt * t.rate * (rec.boundary.inflow - rec.boundary.outflow);
            assert!((m - mass - flux).abs() <= 1e-10 * m.max(flux.abs()));
            mass = m;
        }).unwrap();
    }

    #[test]
    fn pressure_is_monotone_in_radius(w1 in -0.3f64..0.3, a in 1.0f64..250.0, b in 1.0f64..250.0) {
        let cfg = ScenarioConfig::<f64>::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(pressure_profile(lo, w1, &cfg).unwrap() > pressure_profile(hi, w1, &cfg).unwrap());
    }

    #[test]
    fn fractional_flow_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, w2 in 1.5f64..3.0) {
        let cfg = ScenarioConfig::<f64>::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (flo, fhi) = (fractional_flow(lo, w2, &cfg), fractional_flow(hi, w2, &cfg));
        prop_assert!(flo <= fhi + 1e-15);
        prop_assert!((0.0..=1.0).contains(&flo) && (0.0..=1.0).contains(&fhi));
    }
}

#[test]
fn single_precision_tracks_double() {
    let cfg = short(40);
    let omega = UncertainInput::new(0.05, 2.2, 0.16);
    let d = simulate(&omega, &cfg, &SolverConfig::default()).unwrap();
    let s = simulate(&omega.cast::<f32>(), &cfg.cast::<f32>(), &SolverConfig::<f32>::default()).unwrap();
    let worst = d.values.iter().zip(&s.values).fold(0.0f64, |a, (x, y)| a.max((x - *y as f64).abs()));
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn front_advances_with_time() {
    let solver = SolverConfig::default();
    let omega = ScenarioConfig::<f64>::default().nominal_input();
    let front = |frac: f64| {
        let mut cfg = ScenarioConfig::default().with_cells(60);
        cfg.t_end *= frac;
        let s = simulate(&omega, &cfg, &solver).unwrap();
        s.values.iter().rposition(|&v| v > 0.05).unwrap()
    };
    let (a, b, c) = (front(0.1), front(0.4), front(1.0));
    assert!(a < b && b < c, "{a} {b} {c}");
}
