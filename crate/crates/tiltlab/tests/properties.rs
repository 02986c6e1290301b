use proptest::prelude::*;

use tiltlab::chain::McmcConfig;
use tiltlab::diagnostics::{ks_two_sample, mann_whitney_greater};
use tiltlab::ensemble::{ensemble_chain, scaling_transform, BoundaryScheme};
use tiltlab::oneline::{sample_tilted_exact, OneLineSpec};
use tiltlab::{Ensemble, Path, RngStream, TiltParams, TimeGrid};

fn exact_midpoints(a: f64, draws: usize, stream: u64) -> Vec<f64> {
    let grid = TimeGrid::symmetric(1.0, 33).unwrap();
    let spec = OneLineSpec::new(grid, a, 0.5, 0.5).unwrap();
    let mut rng = RngStream::new(100, stream);
    (0..draws).map(|_| sample_tilted_exact(&spec, &mut rng).unwrap().value.values()[16]).collect()
}

#[test]
fn weaker_tilt_sits_higher() {
    let weak = exact_midpoints(0.5, 2000, 1);
    let strong = exact_midpoints(2.0, 2000, 2);
    let r = mann_whitney_greater(&weak, &strong, 1e-3).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn single_line_ensemble_matches_one_line_law() {
    let grid = TimeGrid::symmetric(1.0, 33).unwrap();
    let (a, h) = (2.0, 0.5);
    let exact = exact_midpoints(a, 3000, 3);

    let params = TiltParams::new(a, 2.0, 1).unwrap();
    let mut cfg = McmcConfig::for_points(grid.points());
    cfg.thinning = 5;
    cfg.sweeps = cfg.burn_in + 3000 * cfg.thinning + 1;
    let mut chain = ensemble_chain(grid, &params, &BoundaryScheme::Flat(h), cfg).unwrap();
    let mut rng = RngStream::new(100, 4);
    let mut chained = Vec::new();
    chain.run(3000, &mut rng, |c| chained.push(c.values(0)[16]));

    let r = ks_two_sample(&exact, &chained, 1e-3).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn sampling_is_seed_deterministic() {
    assert_eq!(exact_midpoints(1.0, 50, 7), exact_midpoints(1.0, 50, 7));
    assert_ne!(exact_midpoints(1.0, 50, 7), exact_midpoints(1.0, 50, 8));
}

#[test]
fn single_precision_paths_stay_positive() {
    let grid = TimeGrid::<f32>::symmetric(1.0, 17).unwrap();
    let spec = OneLineSpec::new(grid, 2.0f32, 0.5, 0.5).unwrap();
    let mut rng = RngStream::new(5, 0);
    for _ in 0..200 {
        let p = sample_tilted_exact(&spec, &mut rng).unwrap().value;
        assert!(p.values().iter().all(|v| *v >= 0.0));
        assert_eq!(p.first(), 0.5);
    }
}

fn line(values: &[f64]) -> Ensemble<f64> {
    let grid = TimeGrid::symmetric(1.0, values.len()).unwrap();
    Ensemble::from(Path::new(grid, values.to_vec()).unwrap())
}

proptest! {
    #[test]
    fn scaling_composes(values in proptest::collection::vec(0.0f64..10.0, 3..20), l1 in 1.1f64..5.0, l2 in 1.1f64..5.0) {
        let e = line(&values);
        let twice = scaling_transform(&scaling_transform(&e, l1).unwrap(), l2).unwrap();
        let once = scaling_transform(&e, l1 * l2).unwrap();
        let (a, b) = (twice.line(0), once.line(0));
        prop_assert!((a.grid().right() - b.grid().right()).abs() < 1e-12);
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn scaling_inverts(values in proptest::collection::vec(0.0f64..10.0, 3..20), l in 1.1f64..5.0) {
        let e = line(&values);
        let back = scaling_transform(&scaling_transform(&e, l).unwrap(), 1.0 / l).unwrap();
        for (x, y) in back.line(0).values().iter().zip(&values) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}
