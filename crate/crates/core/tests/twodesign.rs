use kickedtop::linalg::CMat;
use kickedtop::otoc;
use kickedtop::rng::stream_rng;
use kickedtop::spectral;
use kickedtop::spin::{Spin, TopParams};
use kickedtop::twodesign::{self, RandomizedConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frame_potential_floor(dim in 2usize..6, size in 1usize..8, seed in 0u64..1000) {
        let us: Vec<CMat> = (0..size).map(|k| spectral::haar_unitary(dim, &mut stream_rng(seed, k as u64))).collect();
        let floor = (dim as f64).powi(4) / size as f64;
        prop_assert!(twodesign::frame_potential(&us) >= floor * (1.0 - 1e-12));
    }

    #[test]
    fn quench_members_are_unitary(twice in 1u32..12, eta in 1usize..6, seed in 0u64..1000) {
        let mut rng = stream_rng(seed, 0);
        let u = twodesign::random_quench_unitary(Spin::from_twice(twice), 1.0, eta, &mut rng).unwrap();
        prop_assert!(kickedtop::linalg::unitarity_residual(u.as_ref()) < 1e-10);
    }
}

#[test]
fn sampled_cue_frame_potential_concentrates() {
    let (dim, size, reps) = (6, 200, 10);
    let r = twodesign::cue_frame_reference(dim, size, reps, 17);
    let want = twodesign::cue_frame_expectation(dim, size);
    let std_err = r.std / (reps as f64).sqrt();
    assert!((r.mean - want).abs() < 5.0 * std_err, "{} vs {want} (se {std_err})", r.mean);
}

#[test]
fn more_quenches_lower_the_frame_potential() {
    let spin = Spin::new(3.0).unwrap();
    let f = |eta| twodesign::QuenchEnsemble::generate(spin, 1.0, eta, 60, 5).unwrap().frame_potential();
    assert!(f(1) > f(10));
}

fn rms_error(n_unitaries: usize, seeds: std::ops::Range<u64>) -> f64 {
    let p = TopParams::standard(Spin::new(8.0).unwrap(), 1.0);
    let (w, v) = otoc::default_operators(p.spin, 1e-2);
    let mut acc = 0.0;
    let mut count = 0;
    for seed in seeds {
        let rows = twodesign::randomized_comparison(&p, 6, &w, &v, &RandomizedConfig::new(n_unitaries, 20, seed)).unwrap();
        for r in &rows[1..] {
            acc += (r.c_estimated / r.c_exact - 1.0).powi(2);
            count += 1;
        }
    }
    (acc / count as f64).sqrt()
}

#[test]
fn estimator_error_halves_when_sample_quadruples() {
    let coarse = rms_error(100, 0..12);
    let fine = rms_error(400, 100..112);
    let ratio = fine / coarse;
    assert!((0.25..=0.75).contains(&ratio), "{coarse} -> {fine}");
}
