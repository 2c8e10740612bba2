mod common;

use common::*;
use kconvex::barrier::{self, certify_subsolution, BarrierDiagnostics, BarrierFunction, DEFAULT_MARGIN};
use kconvex::geometry::BoundaryFrame;
use kconvex::{Error, GrowthParams, RhsModel};
use nalgebra::SymmetricEigen;

#[test]
fn closed_form_derivatives_match_differences() {
    for n in 2..=4 {
        for k in 1..n {
            let e = derivative_errors(n, k, 1000, 100 + 10 * n as u64 + k as u64);
            assert!(e.gradient <= 1e-6 && e.hessian <= 1e-6, "n={n} k={k}: {e:?}");
        }
    }
}

#[test]
fn schur_complement_identity() {
    for n in 2..=4 {
        for k in 1..n {
            let gap = schur_gap(n, k, 1000, 7 + n as u64 * 3 + k as u64);
            assert!(gap <= 1e-10, "n={n} k={k}: {gap:e}");
        }
    }
}

#[test]
fn schur_term_on_the_axis_is_the_normal_entry() {
    let g = GrowthParams::hyperbolic(3, vec![2.0, 4.0], vec![1.0, 1.0]).unwrap();
    let w = BarrierFunction::anisotropic(g, BoundaryFrame::axis_aligned(vec![0.0; 3], 2), 0.1, 1.0, 2.0).unwrap();
    let h = w.eval_h(&[0.0, 0.0, 0.3]).unwrap().hessian;
    assert_eq!(h[(0, 2)], 0.0);
    assert_eq!(h[(1, 2)], 0.0);
}

#[test]
fn flat_block_eigenvalues() {
    for (n, k) in [(3, 1), (4, 2), (4, 1), (5, 1)] {
        let gap = g_eigen_gap(n, k, 500, 31 + n as u64 + k as u64);
        assert!(gap <= 1e-10, "n={n} k={k}: {gap:e}");
    }
}

#[test]
fn tau_limits_at_the_bottom_of_the_ladder() {
    for g in [
        GrowthParams::hyperbolic(2, vec![2.0], vec![0.5]).unwrap(),
        GrowthParams::hyperbolic(2, vec![4.0], vec![1.0]).unwrap(),
        GrowthParams::hyperbolic(3, vec![2.0], vec![0.5]).unwrap(),
        GrowthParams::hyperbolic(3, vec![1.0, 3.0], vec![1.0, 2.0]).unwrap(),
    ] {
        let (t1, t2) = tau_limits(&g, 2.0);
        assert!(t1.abs() <= 0.05, "{g:?}: tau1 off by {t1}");
        assert!(t2.abs() <= 0.05, "{g:?}: tau2 = {t2}");
    }
}

#[test]
fn tau1_limit_closed_form() {
    // k a mu^(k+1) (1 - mu) with n = 2, a = 2, mu = 1/2.
    let g = GrowthParams::hyperbolic(2, vec![2.0], vec![0.5]).unwrap();
    assert!((BarrierDiagnostics::tau1_limit(&g).unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn searches_certify_and_controls_fail() {
    for case in [disk_case(), cup_case(), cylinder_case()] {
        let (model, cb, samples) = case.barrier();
        assert!(cb.check.passed && cb.check.min_fw > 1.0, "{}: {:?}", case.name, cb.check);
        let weak = cb.barrier.with_multiplier(cb.barrier.params().m / 1024.0).unwrap();
        let control = certify_subsolution(&weak, &model, &samples, DEFAULT_MARGIN).unwrap();
        assert!(!control.passed, "{}: M/2^10 still certifies", case.name);
    }
}

#[test]
fn determinant_bound_holds_at_certified_points() {
    for case in [disk_case(), cup_case(), cylinder_case()] {
        let (_, cb, samples) = case.barrier();
        let w = &cb.barrier;
        for x in samples.iter().step_by(7) {
            let y = w.frame().to_frame(x);
            let det = w.eval_frame(&y).unwrap().hessian.determinant();
            let bound = w.schur_det_lower_bound(&y).unwrap();
            assert!(det >= bound * (1.0 - 1e-9), "{} at {x:?}: det {det:e} < {bound:e}", case.name);
        }
    }
}

#[test]
fn barrier_is_convex_on_samples() {
    let (_, cb, samples) = cup_case().barrier();
    for x in &samples {
        let h = cb.barrier.eval(x).unwrap().hessian;
        let scale = h.amax();
        let ev = SymmetricEigen::new(h).eigenvalues;
        assert!(ev.min() >= -1e-9 * scale, "{x:?}: {ev}");
    }
}

#[test]
fn too_large_epsilon_has_no_bound() {
    let g = GrowthParams::hyperbolic(2, vec![1.0], vec![1.0]).unwrap();
    let d = barrier::diagnostics(&g, 0.9, 2.0).unwrap();
    assert!(!d.bound_available());
    let w = BarrierFunction::anisotropic(g, BoundaryFrame::axis_aligned(vec![0.0; 2], 1), 0.9, 1.0, 2.0).unwrap();
    assert!(matches!(w.schur_det_lower_bound(&[0.0, 0.5]), Err(Error::BoundUnavailable { .. })));
}

#[test]
fn flat_barrier_on_a_square() {
    let square = std::sync::Arc::new(kconvex::ConvexDomain::cube(2, 1.0).unwrap());
    let growth = GrowthParams::new(2, 0, vec![], vec![], 4.0, 3.0, 0.0, 1.0).unwrap();
    let model = RhsModel::new(kconvex::RhsKind::PowerLaw, growth.clone(), square.clone()).unwrap();
    let frame = BoundaryFrame::at(&square, &[0.0, -1.0], 1).unwrap();
    let samples = barrier::default_samples(&square, &frame, 3);
    let cb = barrier::flat_barrier(&square, &model, &growth, &frame, Some(&samples), DEFAULT_MARGIN).unwrap();
    assert!(cb.check.passed);
    assert!((cb.barrier.mu() - 1.0 / 3.0).abs() < 1e-15);
    for x in samples.iter().step_by(5) {
        let h = cb.barrier.eval(x).unwrap().hessian;
        let scale = h.amax();
        assert!(SymmetricEigen::new(h).eigenvalues.min() >= -1e-9 * scale);
    }
    let weak = cb.barrier.with_multiplier(cb.barrier.params().m / 1024.0).unwrap();
    assert!(!certify_subsolution(&weak, &model, &samples, DEFAULT_MARGIN).unwrap().passed);
}

#[test]
fn record_reproduces_the_barrier() {
    let (_, cb, samples) = disk_case().barrier();
    let text = serde_json::to_string(&cb.record()).unwrap();
    let back = BarrierFunction::from_record(&serde_json::from_str(&text).unwrap()).unwrap();
    for x in samples.iter().take(50) {
        assert_eq!(back.value(x).unwrap(), cb.barrier.value(x).unwrap());
    }
}
