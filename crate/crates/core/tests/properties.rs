use ibg::determinant::rho_det;
use ibg::montecarlo::{mc_density_matrix, McOptions};
use ibg::occupation::{default_quad_order, lambda_circle, nystrom_spectrum, scaling_fit};
use ibg::recurrence::rho_circle_recurrence;
use ibg::resolvent::{rho_dn_antidiag, rho_harmonic_antidiag};
use ibg::{GeometryConfig, Kind};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::Circle), Just(Kind::Harmonic), Just(Kind::Dirichlet), Just(Kind::Neumann)]
}

/// Maps a unit-interval draw into the domain of the geometry.
fn place(kind: Kind, l: f64, u: f64) -> f64 {
    match kind {
        Kind::Harmonic => 6.0 * u - 3.0,
        Kind::Circle => l * u.min(0.999_999),
        _ => l * u,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn density_matrix_is_symmetric_and_nonnegative(k in kind(), n in 1usize..7, l in 0.5f64..3.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let cfg = GeometryConfig::new(k, n, l).unwrap();
        let (x, y) = (place(k, l, u), place(k, l, v));
        let a = rho_det(&cfg, x, y).unwrap();
        let b = rho_det(&cfg, y, x).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a >= -1e-14 * cfg.rho0, "rho = {}", a);
    }

    #[test]
    fn circle_routes_agree(n in 2usize..25, q in 0.01f64..0.99) {
        let cfg = GeometryConfig::circle(n, 1.0);
        let a = rho_det(&cfg, q, 0.0).unwrap();
        let b = rho_circle_recurrence(n, q, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * b.abs(), "{} {}", a, b);
    }

    #[test]
    fn circle_reflection_symmetry(n in 1usize..40, q in 0.001f64..0.999) {
        let a = rho_circle_recurrence(n, q, 1.0).unwrap();
        let b = rho_circle_recurrence(n, 1.0 - q, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn diagonal_is_the_free_fermion_density(k in kind(), n in 1usize..6, u in 0.0f64..1.0) {
        let cfg = GeometryConfig::new(k, n, 1.0).unwrap();
        let x = place(k, 1.0, u);
        let d = rho_det(&cfg, x, x).unwrap();
        let f = ibg::geometry::ff_kernel(&cfg, x, x);
        prop_assert!((d - f).abs() <= 1e-8 * (1.0 + f.abs()), "{} {}", d, f);
    }

    #[test]
    fn fit_recovers_exact_power_laws(e in -1.0f64..2.0, c in 0.1f64..10.0, start in 1usize..20) {
        let pts: Vec<(usize, f64)> = (0..5).map(|i| {
            let n = start + 3 * i;
            (n, c * (n as f64).powf(e))
        }).collect();
        let f = scaling_fit(&pts).unwrap();
        prop_assert!((f.exponent - e).abs() < 1e-10);
        prop_assert!(f.rms_residual < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn harmonic_resolvent_matches_determinant(n in 1usize..7, x in 0.0f64..2.5) {
        let cfg = GeometryConfig::harmonic(n);
        let r = rho_harmonic_antidiag(n, &[x]).unwrap()[0];
        let d = rho_det(&cfg, -x, x).unwrap();
        prop_assert!((r - d).abs() <= 1e-6 * (1.0 + d.abs()), "{} {}", r, d);
    }

    #[test]
    fn interval_resolvent_matches_determinant(neu in any::<bool>(), n in 1usize..6, q in 0.03f64..0.97) {
        let k = if neu { Kind::Neumann } else { Kind::Dirichlet };
        let cfg = GeometryConfig::new(k, n, 1.0).unwrap();
        let r = rho_dn_antidiag(&cfg, &[q]).unwrap()[0];
        let d = rho_det(&cfg, 1.0 - q, q).unwrap();
        prop_assert!((r - d).abs() <= 1e-6 * (1.0 + d.abs()), "{} {}", r, d);
    }

    #[test]
    fn circle_spectrum_traces_to_n(n in 1usize..60) {
        let s = lambda_circle(n, usize::MAX, 512).unwrap();
        prop_assert!(s.trace_residual < 1e-8);
        prop_assert!(s.neg_tail > -1e-8);
    }

    #[test]
    fn monte_carlo_is_reproducible(seed in any::<u64>(), k in kind(), n in 2usize..5) {
        let cfg = GeometryConfig::new(k, n, 1.0).unwrap();
        let p = if k == Kind::Harmonic { (0.3, -0.4) } else { (0.2, 0.7) };
        let o = McOptions { sweeps: 2_000, seed, ..McOptions::default() };
        let a = mc_density_matrix(&cfg, &[p], &o).unwrap();
        let b = mc_density_matrix(&cfg, &[(p.1, p.0)], &o).unwrap();
        prop_assert_eq!(a[0].mean.to_bits(), b[0].mean.to_bits());
        prop_assert_eq!(a[0].stderr.to_bits(), b[0].stderr.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn nystrom_spectra_are_nonnegative(k in prop_oneof![Just(Kind::Harmonic), Just(Kind::Dirichlet), Just(Kind::Neumann)], n in 1usize..5) {
        let cfg = GeometryConfig::new(k, n, 1.0).unwrap();
        let s = nystrom_spectrum(&cfg, default_quad_order(&cfg)).unwrap();
        prop_assert!(s.neg_tail >= -1e-8, "{}", s.neg_tail);
        prop_assert!(s.trace_residual < 1e-6, "{}", s.trace_residual);
    }
}
