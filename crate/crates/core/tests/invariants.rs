use std::f64::consts::PI;

use kickedtop::floquet::{self, TrotterVariant};
use kickedtop::linalg;
use kickedtop::otoc;
use kickedtop::semiclassical::{self, ClassicalSpin};
use kickedtop::spin::{self, Spin, TopParams};
use proptest::prelude::*;

fn params(twice: u32, tau: f64, h_x: f64, h_z: f64, j_x: f64, j_z: f64) -> TopParams {
    TopParams { spin: Spin::from_twice(twice), tau, h_x, h_z, j_x, j_z }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trotter_operators_are_unitary(
        twice in 1u32..24, tau in 0.0f64..4.0,
        h_x in -1.0f64..1.0, h_z in -1.0f64..1.0, j_x in -2.0f64..2.0, j_z in -2.0f64..2.0,
    ) {
        let p = params(twice, tau, h_x, h_z, j_x, j_z);
        for variant in [TrotterVariant::First, TrotterVariant::Symmetric] {
            let u = floquet::trotter_operator(&p, variant).unwrap();
            prop_assert!(linalg::unitarity_residual(u.as_ref()) < 1e-10);
        }
    }

    #[test]
    fn conjugation_preserves_spectrum(twice in 2u32..16, tau in 0.05f64..3.0) {
        let p = TopParams::standard(Spin::from_twice(twice), tau);
        let mut a = floquet::diagonalize_unitary(&floquet::floquet_operator(&p).unwrap()).unwrap().phases;
        let mut b = floquet::diagonalize_unitary(&floquet::symmetric_floquet_operator(&p).unwrap()).unwrap().phases;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            let d = floquet::wrap_phase(x - y).abs();
            prop_assert!(d < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn otoc_bounds_and_two_paths(twice in 2u32..20, tau in 0.1f64..3.5, phi in 1e-3f64..1.0) {
        let p = TopParams::standard(Spin::from_twice(twice), tau);
        let (w, v) = otoc::default_operators(p.spin, phi);
        let s = otoc::otoc_c(&p, 6, &w, &v).unwrap();
        let w2 = otoc::sz_second_moment(p.spin);
        for (c, f) in s.c_values.iter().zip(&s.f_values) {
            prop_assert!(*c >= -1e-10);
            prop_assert!(f.norm() <= w2 * (1.0 + 1e-12));
            prop_assert!((c - otoc::c_from_f(w2, *f)).abs() < 1e-10);
        }
    }

    #[test]
    fn otoc_ignores_global_phase_of_v(twice in 2u32..16, tau in 0.1f64..3.0, theta in -3.0f64..3.0) {
        let p = TopParams::standard(Spin::from_twice(twice), tau);
        let (w, v) = otoc::default_operators(p.spin, 0.2);
        let v2 = linalg::scale(v.as_ref(), linalg::cis(theta));
        let a = otoc::otoc_c(&p, 5, &w, &v).unwrap();
        let b = otoc::otoc_c(&p, 5, &w, &v2).unwrap();
        for (x, y) in a.c_values.iter().zip(&b.c_values) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn classical_map_stays_on_the_sphere(theta in 0.0f64..PI, phi in -PI..PI, tau in 0.0f64..4.0) {
        let p = TopParams::standard(Spin::new(1.0).unwrap(), tau);
        let orbit = semiclassical::iterate_map(&ClassicalSpin::from_angles(theta, phi), &p, 200);
        prop_assert!(orbit.max_step_drift < 1e-12);
    }

    #[test]
    fn spin_expectations_of_coherent_states(twice in 1u32..80, theta in 0.0f64..PI, phi in -PI..PI) {
        let sp = Spin::from_twice(twice);
        let psi = spin::coherent_state(sp, theta, phi);
        let [x, y, z] = spin::spin_expectations(sp, psi.amplitudes());
        let s = sp.value();
        let m = ClassicalSpin::from_angles(theta, phi);
        prop_assert!((x / s - m.x).abs() < 1e-9 && (y / s - m.y).abs() < 1e-9 && (z / s - m.z).abs() < 1e-9);
    }
}

#[test]
fn early_ideal_otoc_grows_quadratically() {
    let p = TopParams::standard(Spin::new(32.0).unwrap(), 0.0);
    let (w, v) = otoc::default_operators(p.spin, otoc::DEFAULT_PHI);
    let s = otoc::otoc_ideal(&p, 0.01, 10, &w, &v).unwrap();
    let slope = (s.c_values[10] / s.c_values[1]).ln() / 10f64.ln();
    assert!((slope - 2.0).abs() < 0.1, "{slope}");
}

#[test]
fn small_phi_otoc_scales_as_phi_squared() {
    let p = TopParams::standard(Spin::new(16.0).unwrap(), 1.0);
    let run = |phi: f64| {
        let (w, v) = otoc::default_operators(p.spin, phi);
        otoc::otoc_c(&p, 8, &w, &v).unwrap().c_values
    };
    let (a, b) = (run(1e-4), run(1e-5));
    for (x, y) in a.iter().zip(&b).skip(1) {
        assert!((x / 1e-8 - y / 1e-10).abs() < 1e-4 * (x / 1e-8), "{x} {y}");
    }
}

#[test]
fn infinite_time_average_matches_long_run_regular() {
    let p = TopParams::standard(Spin::new(64.0).unwrap(), 0.73);
    let (w, v) = otoc::default_operators(p.spin, otoc::DEFAULT_PHI);
    let itf = otoc::infinite_time_average_f(&otoc::floquet_spectrum(&p).unwrap(), &w, &v);
    let s = otoc::otoc_c(&p, 20_000, &w, &v).unwrap();
    let tail = &s.f_values[1000..];
    let mean = tail.iter().map(|f| f.re).sum::<f64>() / tail.len() as f64;
    let w2 = otoc::sz_second_moment(p.spin);
    let (c_run, c_bar) = (2.0 * (w2 - mean), 2.0 * (w2 - itf.f_bar));
    assert!((c_run - c_bar).abs() < 0.02 * c_bar, "{c_run} vs {c_bar}");
}
