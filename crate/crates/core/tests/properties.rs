mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use subrig::extremals::{hamiltonian, normal_extremal, CotangentState};
use subrig::geometry::{CurveSample, SubRiemannianStructure};
use subrig::integrate::{flow_with_variational, Tolerances};
use subrig::mechanics::nonholonomic_trajectory;

const TOL: Tolerances = Tolerances::CERTIFICATE;

fn structure(index: usize) -> (&'static str, SubRiemannianStructure) {
    builtins().swap_remove(index)
}

/// Maps a point of the unit cube into the structure's probe bounding box.
fn point_in_box(s: &SubRiemannianStructure, unit: [f64; 3]) -> Vec<f64> {
    let probes = s.probes();
    (0..s.dim())
        .map(|i| {
            let lo = probes.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
            let hi = probes.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
            lo + unit[i] * (hi - lo)
        })
        .collect()
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).amax() <= tol * b.amax().max(1.0)
}

fn unit3() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(0.0..1.0f64)
}

fn vector3() -> impl Strategy<Value = DVector<f64>> {
    prop::array::uniform3(-1.0..1.0f64).prop_map(|v| DVector::from_row_slice(&v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expr_evaluation_is_deterministic_and_derivative_linear(seed in any::<u64>(), unit in unit3(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let (_, s) = structure(2);
        let mut r = rng(seed);
        let f = random_scalar(s.chart(), &mut r);
        let g = random_scalar(s.chart(), &mut r);
        let x = point_in_box(&s, unit);
        prop_assert_eq!(f.eval(&x).unwrap().to_bits(), f.eval(&x).unwrap().to_bits());
        let combo = subrig::expr::Expr::constant(a) * f.clone() + subrig::expr::Expr::constant(b) * g.clone();
        for i in 0..3 {
            let lhs = combo.derivative(i).eval(&x).unwrap();
            let rhs = a * f.derivative(i).eval(&x).unwrap() + b * g.derivative(i).eval(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn expr_mixed_partials_commute(seed in any::<u64>(), unit in unit3()) {
        let (_, s) = structure(0);
        let mut r = rng(seed);
        let f = random_scalar(s.chart(), &mut r) * random_scalar(s.chart(), &mut r);
        let x = point_in_box(&s, unit);
        for i in 0..3 {
            for j in 0..3 {
                let ij = f.derivative(i).derivative(j).eval(&x).unwrap();
                let ji = f.derivative(j).derivative(i).eval(&x).unwrap();
                prop_assert!((ij - ji).abs() <= 1e-12 * ij.abs().max(1.0));
            }
        }
    }

    #[test]
    fn cometric_is_psd_with_annihilator_kernel(index in 0usize..3, unit in unit3(), v in vector3()) {
        let (_, s) = structure(index);
        let x = point_in_box(&s, unit);
        let c = s.cometric(&x).unwrap();
        prop_assert!(close(&c, &c.transpose(), 0.0));
        prop_assert!(v.dot(&(&c * &v)) >= -1e-14 * v.norm_squared());
        let f = s.frame_matrix(&x).unwrap();
        let fv = f.transpose() * &v;
        // ⟨ḡ v, v⟩ = |Fᵀv|² for the orthonormal default fibre metric
        prop_assert!((v.dot(&(&c * &v)) - fv.norm_squared()).abs() <= 1e-12 * fv.norm_squared().max(1.0));
        let g = s.riemannian_extension().unwrap();
        let eta = g.at(&x).unwrap().annihilator_field(0).value;
        prop_assert!((&c * &eta).amax() <= 1e-12 * eta.amax().max(1.0));
    }

    #[test]
    fn extension_is_spd_and_restricts(index in 0usize..3, unit in unit3(), v in vector3()) {
        let (_, s) = structure(index);
        let g = s.riemannian_extension().unwrap();
        let x = point_in_box(&s, unit);
        let p = g.at(&x).unwrap();
        prop_assert!(close(&p.metric, &p.metric.transpose(), 1e-14));
        prop_assert!(v.dot(&(&p.metric * &v)) > 0.0);
        prop_assert!(close(&(&p.metric * &p.metric_inv), &DMatrix::identity(3, 3), 1e-10));
        let f = &p.frame.frame;
        prop_assert!(close(&(f.transpose() * &p.metric * f), &DMatrix::identity(2, 2), 1e-10));
    }

    #[test]
    fn projection_identities(index in 0usize..3, unit in unit3(), v in vector3()) {
        let (_, s) = structure(index);
        let g = s.riemannian_extension().unwrap();
        let x = point_in_box(&s, unit);
        let p = g.at(&x).unwrap();
        let pr = p.projections();
        prop_assert!(close(&(&pr.pi * &pr.pi), &pr.pi, 1e-10));
        prop_assert!(close(&pr.tau, &pr.pi.transpose(), 1e-10));
        // π is G-orthogonal: G(πv, π⊥v) = 0
        let pv = &pr.pi * &v;
        let qv = &pr.pi_perp * &v;
        prop_assert!(pv.dot(&(&p.metric * &qv)).abs() <= 1e-10 * v.norm_squared().max(1.0));
        let (_, residual) = s.frame_coefficients(&x, &pv).unwrap();
        prop_assert!(residual <= 1e-10);
    }

    #[test]
    fn christoffel_symbols_are_symmetric(index in 0usize..3, unit in unit3()) {
        let (_, s) = structure(index);
        let g = s.riemannian_extension().unwrap();
        let x = point_in_box(&s, unit);
        let p = g.at(&x).unwrap();
        for k in 0..3 {
            let gk = &p.christoffel.gamma[k];
            prop_assert!(close(gk, &gk.transpose(), 1e-12));
        }
    }

    #[test]
    fn pi_g_symmetric_part_of_q_is_normal(index in 0usize..3, unit in unit3(), a in vector3(), b in vector3()) {
        let (_, s) = structure(index);
        let g = s.riemannian_extension().unwrap();
        let x = point_in_box(&s, unit);
        let p = g.at(&x).unwrap();
        let f = &p.frame.frame;
        let (u, w) = (f * a.rows(0, 2), f * b.rows(0, 2));
        let uw = p.pi_g(&u, &w).unwrap();
        prop_assert!((&p.pi * &uw).amax() <= 1e-10 * uw.amax().max(1.0));
    }

    #[test]
    fn hamiltonian_is_nonnegative_and_vanishes_on_annihilator(index in 0usize..3, unit in unit3(), v in vector3()) {
        let (_, s) = structure(index);
        let g = s.riemannian_extension().unwrap();
        let x = point_in_box(&s, unit);
        prop_assert!(hamiltonian(&s, &CotangentState::new(x.clone(), v.clone())).unwrap() >= 0.0);
        let eta = g.at(&x).unwrap().annihilator_field(0).value;
        let scale = eta.norm_squared() * s.cometric(&x).unwrap().amax();
        let h = hamiltonian(&s, &CotangentState::new(x, eta)).unwrap();
        prop_assert!(h.abs() <= 1e-14 * scale.max(1.0), "{h:e}");
    }

    #[test]
    fn length_is_grid_invariant(index in 0usize..3, unit in unit3(), warp in 0.1..0.9f64) {
        let (_, s) = structure(index);
        let x0 = point_in_box(&s, unit);
        let tr = nonholonomic_trajectory(&s.riemannian_extension().unwrap(), &x0, &DVector::from_vec(vec![0.3, 0.4]), 0.5, TOL).unwrap();
        let sample = |t: f64| {
            let st = tr.state_at(t).unwrap();
            let v = s.frame_matrix(&st.x).unwrap() * &st.u;
            CurveSample { t, point: st.x, velocity: v }
        };
        let uniform: Vec<_> = (0..=64).map(|i| sample(0.5 * i as f64 / 64.0)).collect();
        // monotone warp keeps the curve, changes the grid
        let warped: Vec<_> = (0..=80).map(|i| {
            let r = i as f64 / 80.0;
            sample(0.5 * (r + warp * r * (1.0 - r)).min(1.0))
        }).collect();
        let a = s.length(&uniform).unwrap();
        let b = s.length(&warped).unwrap();
        prop_assert!((a - 0.25).abs() <= 1e-6);
        prop_assert!((a - b).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hamiltonian_is_conserved(index in 0usize..3, unit in unit3(), p0 in vector3()) {
        let (name, s) = structure(index);
        let x0 = point_in_box(&s, unit);
        let Ok(curve) = normal_extremal(&s, &x0, &p0, 0.5, TOL) else {
            // leaving the chart domain is a reported failure, not a property violation
            return Ok(());
        };
        let h0 = hamiltonian(&s, &CotangentState::new(x0, p0)).unwrap();
        prop_assert!(curve.hamiltonian_drift(&s).unwrap() <= 1e-8 * h0.max(1.0), "{}", name);
        prop_assert!(curve.admissibility_residual(&s).unwrap() <= 1e-8 * h0.sqrt().max(1.0), "{}", name);
    }

    #[test]
    fn energy_is_conserved(index in 0usize..3, unit in unit3(), a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let (name, s) = structure(index);
        let g = s.riemannian_extension().unwrap();
        let x0 = point_in_box(&s, unit);
        let Ok(tr) = nonholonomic_trajectory(&g, &x0, &DVector::from_vec(vec![a, b]), 0.5, TOL) else {
            return Ok(());
        };
        prop_assert!(tr.energy_drift(&g).unwrap() <= 1e-8, "{}", name);
    }

    #[test]
    fn variational_pairing_duality(index in 0usize..3, unit in unit3(), field in 0usize..2, eta in vector3(), v in vector3()) {
        let (name, s) = structure(index);
        let x0 = point_in_box(&s, unit);
        let Ok(f) = flow_with_variational(&s.frame()[field], &x0, 0.0, 0.5, TOL) else {
            return Ok(());
        };
        for &t in f.trajectory().times() {
            let j = f.jacobian_at(t).unwrap();
            let transported = f.transport_covector(t, &eta).unwrap();
            prop_assert!((transported.dot(&(&j * &v)) - eta.dot(&v)).abs() <= 1e-10, "{}", name);
        }
    }
}
