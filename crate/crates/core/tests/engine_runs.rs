use fvspine::engine::{driver_increments, run, EngineConfig, InitialMeasure};
use fvspine::geometry::DomainSpec;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn unit_config(n: usize, horizon: f64, dt: f64, seed: u64) -> EngineConfig {
    EngineConfig::new(
        n,
        horizon,
        dt,
        DomainSpec::unit_interval(),
        InitialMeasure::uniform_interval(0.25, 0.75, 0.01),
        seed,
    )
}

/// Asymptotic Kolmogorov tail `P(sqrt(n) D > x)`.
fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let x = d * (n as f64).sqrt();
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            (if k as u64 % 2 == 1 { 2.0 } else { -2.0 }) * (-2.0 * k * k * x * x).exp()
        })
        .sum();
    s.clamp(0.0, 1.0)
}

#[test]
fn hundred_particles_always_jump_by_time_five() {
    let base = unit_config(100, 5.0, 1e-3, 17);
    let with_jump = (0..100)
        .filter(|&r| run(&base.clone().with_replica(r)).unwrap().final_state.jump_count > 0)
        .count();
    assert_eq!(with_jump, 100);
}

#[test]
fn distilled_drivers_are_gaussian() {
    let mut c = unit_config(20, 5.0, 1e-3, 23);
    c.storage_every = 10;
    let out = run(&c).unwrap();
    assert!(!out.log.is_empty());
    let std = Normal::new(0.0, c.storage_dt().sqrt()).unwrap();
    for i in 0..c.n {
        let mut inc = driver_increments(&out.log, &out.store, i).unwrap();
        inc.sort_by(f64::total_cmp);
        let n = inc.len();
        let d = inc
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let f = std.cdf(v);
                (f - k as f64 / n as f64).max((k + 1) as f64 / n as f64 - f)
            })
            .fold(0.0, f64::max);
        let p = kolmogorov_p(d, n);
        assert!(p > 1e-3, "particle {i}: D = {d}, p = {p}");
    }
}

#[test]
fn rectangle_run_keeps_population_inside() {
    let d = DomainSpec::rectangle(vec![(0.0, 1.0), (0.0, 0.5)]).unwrap();
    let init = InitialMeasure::UniformOnBox {
        lower: vec![0.3, 0.2],
        upper: vec![0.7, 0.3],
        margin: 0.05,
    };
    let c = EngineConfig::new(40, 2.0, 1e-3, d.clone(), init, 5);
    let out = run(&c).unwrap();
    assert!(!out.log.is_empty());
    for k in 0..out.store.len() {
        assert!(out.store.frame(k).chunks_exact(2).all(|x| d.contains(x).unwrap()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn population_and_log_invariants(n in 2usize..30, seed in any::<u64>(), steps in 50usize..400) {
        let dt = 1e-3;
        let c = unit_config(n, steps as f64 * dt, dt, seed);
        let out = run(&c).unwrap();
        prop_assert_eq!(out.final_state.n(), n);
        prop_assert_eq!(out.final_state.jump_count, out.log.len());
        for k in 0..out.store.len() {
            prop_assert_eq!(out.store.frame(k).len(), n);
            prop_assert!(out.store.frame(k).iter().all(|&x| x > 0.0 && x < 1.0));
        }
        for w in out.log.events.windows(2) {
            prop_assert!(w[0].time < w[1].time);
        }
        for e in &out.log.events {
            prop_assert!(e.dying != e.target && e.target < n);
            prop_assert!(e.landing[0] > 0.0 && e.landing[0] < 1.0);
            prop_assert!(e.time > 0.0 && e.time <= c.horizon + 1e-12);
        }
    }

    #[test]
    fn replay_is_identical(seed in any::<u64>(), replica in 0u64..1000) {
        let c = unit_config(6, 0.3, 1e-3, seed).with_replica(replica);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        prop_assert_eq!(a.log, b.log);
        prop_assert_eq!(a.store, b.store);
    }
}
