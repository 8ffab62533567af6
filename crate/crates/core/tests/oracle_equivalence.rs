use cuspforge_core::oracle::{
    jacobi_operator, oracle_equivalence, riemann_fd, tr_sqrt_neg, unit_from_frame, CoordinateMetric, JacobiPath,
    CLAMP_TOL, FD_STEP,
};
use cuspforge_core::warp::{make_cutoff, sectional_curvatures, tube_profile, WarpProfile};
use cuspforge_core::warp::CutoffProfile;
use proptest::prelude::*;

fn cutoff() -> CutoffProfile {
    static CUT: std::sync::OnceLock<CutoffProfile> = std::sync::OnceLock::new();
    *CUT.get_or_init(|| make_cutoff(0.1).unwrap())
}

#[test]
fn closed_form_matches_finite_differences_on_100_samples() {
    let cut = cutoff();
    let samples = oracle_equivalence(&cut, 100, 2024, FD_STEP).unwrap();
    assert_eq!(samples.len(), 100);
    for p in ["hyperbolic", "tube", "channel"] {
        assert!(samples.iter().any(|s| s.profile == p));
    }
    for s in &samples {
        assert!(s.abs_error <= 1e-5, "{s:?}");
        assert!(s.symmetry_defect <= 1e-6, "{s:?}");
    }
}

#[test]
fn hyperbolic_t_phi_plane_from_tensor() {
    let m = CoordinateMetric::new(WarpProfile::hyperbolic(10.0), 4).unwrap();
    let x = [1.7, 0.3, -0.2, 0.5];
    let r = riemann_fd(&m, &x, FD_STEP).unwrap();
    let g = nalgebra::DMatrix::from_diagonal(&m.diagonal(1.7).unwrap().into());
    let k = r.sectional(&g, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]);
    assert!((k + 1.0).abs() < 1e-6, "{k}");
}

#[test]
fn exponential_random_plane_n5() {
    let m = CoordinateMetric::new(WarpProfile::exponential(10.0), 5).unwrap();
    let x = [2.2, 0.0, 0.0, 0.0, 0.0];
    let r = riemann_fd(&m, &x, FD_STEP).unwrap();
    let g = nalgebra::DMatrix::from_diagonal(&m.diagonal(2.2).unwrap().into());
    let u = [0.3, -0.1, 0.05, 0.2, -0.07];
    let w = [-0.4, 0.02, 0.11, -0.03, 0.09];
    assert!((r.sectional(&g, &u, &w) + 1.0).abs() < 1e-6);
}

fn rotate_sigma(frame: &[f64], i: usize, j: usize, angle: f64) -> Vec<f64> {
    let mut out = frame.to_vec();
    let (c, s) = (angle.cos(), angle.sin());
    out[i] = c * frame[i] - s * frame[j];
    out[j] = s * frame[i] + c * frame[j];
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_spectrum_invariant_under_sigma_rotation(
        t in 0.1f64..5.0,
        frame in prop::collection::vec(-1.0f64..1.0, 5),
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        prop_assume!(frame.iter().map(|a| a * a).sum::<f64>() > 1e-3);
        let cut = cutoff();
        let m = CoordinateMetric::new(tube_profile(&cut), 5).unwrap();
        let mut x = vec![0.0; 5];
        x[0] = t;
        let v = unit_from_frame(&m, t, &frame).unwrap();
        let rotated = rotate_sigma(&frame, 2, 4, angle);
        let v2 = unit_from_frame(&m, t, &rotated).unwrap();
        let a = jacobi_operator(&m, &x, &v, JacobiPath::ClosedForm).unwrap();
        let b = jacobi_operator(&m, &x, &v2, JacobiPath::ClosedForm).unwrap();
        for (p, q) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_paths_agree(t in 0.2f64..4.5, frame in prop::collection::vec(-1.0f64..1.0, 4)) {
        prop_assume!(frame.iter().map(|a| a * a).sum::<f64>() > 1e-3);
        let cut = cutoff();
        prop_assume!((t - 1.0).abs() > 1e-3 && (t - cut.r_eps).abs() > 1e-3);
        let m = CoordinateMetric::new(tube_profile(&cut), 4).unwrap();
        let x = [t, 0.0, 0.0, 0.0];
        let v = unit_from_frame(&m, t, &frame).unwrap();
        let a = jacobi_operator(&m, &x, &v, JacobiPath::ClosedForm).unwrap();
        let b = jacobi_operator(&m, &x, &v, JacobiPath::FiniteDifference { h: FD_STEP }).unwrap();
        for (p, q) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((p - q).abs() < 1e-5, "{:?} vs {:?}", a.eigenvalues, b.eigenvalues);
        }
        prop_assert!(a.asymmetry() < 1e-9);
    }

    #[test]
    fn constant_curvature_integrand_is_n_minus_one(
        t in 0.5f64..6.0,
        frame in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        prop_assume!(frame.iter().map(|a| a * a).sum::<f64>() > 1e-3);
        let m = CoordinateMetric::new(WarpProfile::exponential(10.0), 4).unwrap();
        let x = [t, 0.0, 0.0, 0.0];
        let v = unit_from_frame(&m, t, &frame).unwrap();
        for path in [JacobiPath::ClosedForm, JacobiPath::FiniteDifference { h: FD_STEP }] {
            let j = jacobi_operator(&m, &x, &v, path).unwrap();
            prop_assert!((tr_sqrt_neg(&j, CLAMP_TOL).unwrap() - 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn ricci_is_sum_of_plane_curvatures(t in 0.01f64..6.0, n in 3usize..7) {
        let cut = cutoff();
        let rep = sectional_curvatures(&tube_profile(&cut), t, n).unwrap();
        let ric_t: f64 = (1..n).map(|j| rep.plane(0, j)).sum();
        prop_assert!((ric_t - rep.ric_t).abs() < 1e-9 * (1.0 + ric_t.abs()));
    }
}
