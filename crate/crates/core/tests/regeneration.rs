use std::sync::Arc;

use aimh::chain::{Chain, FixedPoint, KernelSchedule};
use aimh::numeric::chi_square_gof;
use aimh::proposals::FixedIndependenceKernel;
use aimh::targets::UniformTarget;

/// q uniform on (0, 2) against π uniform on (0, 1): the Doeblin constant is
/// 1/2, so each step regenerates with probability 1/2 and regeneration-time
/// proposals are exact draws from π.
fn chain(seed: u64) -> Chain {
    let target = Arc::new(UniformTarget::new(vec![(0.0, 1.0)]).unwrap());
    let kernel = FixedIndependenceKernel::uniform(vec![(0.0, 2.0)]).unwrap();
    Chain::new(target, KernelSchedule::single(Box::new(kernel)), &FixedPoint(vec![0.9]), seed, 10)
        .unwrap()
        .with_regeneration(Box::new(|_| 0.5))
        .unwrap()
}

#[test]
fn frequency_matches_doeblin_constant() {
    let trace = chain(3).run(10_000).unwrap();
    let freq = trace.regenerations as f64 / 10_000.0;
    let sigma = (0.25f64 / 10_000.0).sqrt();
    assert!((freq - 0.5).abs() <= 3.0 * sigma, "frequency {freq}");
}

#[test]
fn regenerations_are_accepted_draws_from_the_target() {
    let trace = chain(4).run(20_000).unwrap();
    let mut counts = [0u64; 10];
    for r in trace.records.iter().filter(|r| r.regeneration_detected) {
        assert!(r.accepted);
        assert_eq!(r.state, r.proposal);
        assert!(r.proposal[0] < 1.0);
        counts[(r.proposal[0] * 10.0) as usize] += 1;
    }
    let (_, p) = chi_square_gof(&counts, &[0.1; 10]);
    assert!(p >= 1e-3, "p = {p}");
}

#[test]
fn regeneration_time_is_tracked() {
    let mut c = chain(5);
    let mut last = None;
    for _ in 0..200 {
        let r = c.step().unwrap();
        if r.regeneration_detected {
            last = Some(r.iteration);
        }
        assert_eq!(c.state().last_regeneration, last);
    }
    assert!(last.is_some());
}
