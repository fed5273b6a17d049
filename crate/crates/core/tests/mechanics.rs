mod common;

use common::*;
use nalgebra::DVector;
use subrig::error::Error;
use subrig::expr::{Chart, Expr};
use subrig::extremals::{normal_extremal, riemannian_geodesic};
use subrig::geometry::{interior_d, ScalarJet, SubRiemannianStructure, VectorField};
use subrig::integrate::Tolerances;
use subrig::mechanics::{
    compatibility_test, nh_covariant_derivative, nonholonomic_trajectory, tilde_nabla_b_transport, CandidateKind,
    CompatibilityVerdict,
};

const TOL: Tolerances = Tolerances::CERTIFICATE;

fn u2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

/// Full-rank frame `∂x`, `x∂x + ∂y` on the plane: `Q = TM` with a curved metric.
fn full_rank_plane() -> SubRiemannianStructure {
    let c = Chart::new(&["x", "y"]).unwrap();
    let frame = vec![VectorField::parse(&c, &["1", "0"]).unwrap(), VectorField::parse(&c, &["x", "1"]).unwrap()];
    SubRiemannianStructure::builder(c, frame).probe_box(vec![(-1.0, 1.0), (-1.0, 1.0)]).build().unwrap()
}

/// Involutive `Q = span{∂x + y∂z, ∂y + x∂z}` with leaves `z − xy = const`.
fn curved_foliation() -> SubRiemannianStructure {
    let c = Chart::new(&["x", "y", "z"]).unwrap();
    let frame =
        vec![VectorField::parse(&c, &["1", "0", "y"]).unwrap(), VectorField::parse(&c, &["0", "1", "x"]).unwrap()];
    SubRiemannianStructure::builder(c, frame).complement(vec![VectorField::coordinate(3, 2)]).build().unwrap()
}

/// Coefficient expressions of a random smooth section of `Q`.
fn random_section(s: &SubRiemannianStructure, rng: &mut rand::rngs::StdRng) -> Vec<Expr> {
    (0..s.rank()).map(|_| random_scalar(s.chart(), rng)).collect()
}

#[test]
fn heisenberg_line_example() {
    let s = heisenberg();
    let g = s.riemannian_extension().unwrap();
    let tr = nonholonomic_trajectory(&g, &[0.0; 3], &u2(1.0, 0.0), 1.0, TOL).unwrap();
    for (st, &t) in tr.states().iter().zip(tr.times()) {
        assert!((st.x[0] - t).abs() < 1e-12 && st.x[1].abs() < 1e-14 && st.x[2].abs() < 1e-14);
        assert!((&st.u - u2(1.0, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn rest_is_constant() {
    let s = montgomery();
    let g = s.riemannian_extension().unwrap();
    let tr = nonholonomic_trajectory(&g, &[1.2, 0.5, -0.3], &u2(0.0, 0.0), 3.0, TOL).unwrap();
    assert!(tr.states().iter().all(|st| st.x == vec![1.2, 0.5, -0.3] && st.u.norm() == 0.0));
}

#[test]
fn full_rank_reduces_to_geodesics() {
    let s = full_rank_plane();
    let g = s.riemannian_extension().unwrap();
    let x0 = [0.2, -0.1];
    let u0 = u2(0.7, 0.4);
    let nh = nonholonomic_trajectory(&g, &x0, &u0, 1.5, TOL).unwrap();
    let v0 = s.frame_matrix(&x0).unwrap() * &u0;
    let geo = riemannian_geodesic(&g, &x0, &v0, 1.5, TOL).unwrap();
    for &t in &[0.3, 0.9, 1.5] {
        let a = nh.state_at(t).unwrap().x;
        let b = geo.at(t).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8, "t={t}");
    }
    let report = compatibility_test(&g, &nh, 1e-8, TOL).unwrap();
    assert!(report.vacuous_annihilator);
    assert_eq!(report.verdict, CompatibilityVerdict::Compatible);
    assert!(report.best_candidate().covectors.iter().all(|e| e.len() == 2 && e.norm() == 0.0));
}

#[test]
fn energy_is_conserved() {
    let mut rng = rng(31);
    for (name, s) in builtins() {
        let g = s.riemannian_extension().unwrap();
        for x0 in s.probes().iter().take(4) {
            let u0 = DVector::from_fn(2, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
            let tr = nonholonomic_trajectory(&g, x0, &u0, 1.0, TOL).unwrap();
            assert!(tr.energy_drift(&g).unwrap() <= 1e-8, "{name}");
            assert!(tr.constraint_residual(&g).unwrap() <= 1e-6, "{name}");
        }
    }
}

#[test]
fn nonholonomic_reports_domain_exit_and_bad_input() {
    let s = montgomery();
    let g = s.riemannian_extension().unwrap();
    assert!(nonholonomic_trajectory(&g, &[0.5, 0.0, 0.0], &u2(-1.0, 0.0), 1.0, TOL).is_err());
    assert!(matches!(
        nonholonomic_trajectory(&g, &[1.0, 0.0, 0.0], &DVector::zeros(3), 1.0, TOL),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn nh_covariant_examples() {
    let s = heisenberg();
    let g = s.riemannian_extension().unwrap();
    let one = [Expr::one(), Expr::zero()];
    let two = [Expr::zero(), Expr::one()];
    for x in s.probes() {
        let x1 = s.frame()[0].eval(x).unwrap();
        assert!(nh_covariant_derivative(&g, x, &x1, &one).unwrap().norm() < 1e-14);
        assert!(nh_covariant_derivative(&g, x, &x1, &two).unwrap().norm() < 1e-14);
    }
    let flat = involutive();
    let gf = flat.riemannian_extension().unwrap();
    let c = [Expr::constant(0.3), Expr::constant(-1.2)];
    let u = vec3(0.5, 0.25, 0.0);
    assert_eq!(nh_covariant_derivative(&gf, &[0.1, 0.2, 0.3], &u, &c).unwrap().norm(), 0.0);
    assert!(nh_covariant_derivative(&gf, &[0.1, 0.2, 0.3], &vec3(0.0, 0.0, 1.0), &c).is_err());
}

#[test]
fn nh_connection_is_metric_and_torsion_free_on_q() {
    let mut rng = rng(32);
    for (name, s) in builtins().into_iter().chain([("foliation", curved_foliation())]) {
        let g = s.riemannian_extension().unwrap();
        for x in s.probes().iter().take(16) {
            let cv = random_section(&s, &mut rng);
            let cw = random_section(&s, &mut rng);
            let vf = VectorField::combination(&cv, s.frame()).unwrap();
            let wf = VectorField::combination(&cw, s.frame()).unwrap();
            let (v, w) = (vf.eval(x).unwrap(), wf.eval(x).unwrap());
            let dv_w = nh_covariant_derivative(&g, x, &w, &cv).unwrap();
            let dw_v = nh_covariant_derivative(&g, x, &v, &cw).unwrap();
            let p = g.at(x).unwrap();
            // ∇^nh_V W − ∇^nh_W V − π[V, W] = 0
            let bracket = vf.bracket(&wf).unwrap().eval(x).unwrap();
            let torsion = &dw_v - &dv_w - &p.pi * &bracket;
            assert!(torsion.norm() < 1e-10 * bracket.norm().max(1.0), "{name}: {torsion}");

            // u h(V, W) = h(∇^nh_u V, W) + h(V, ∇^nh_u W) with h = identity on frame coefficients
            let u = p.frame.frame.column(0) * 0.7 + p.frame.frame.column(1) * -0.4;
            let hvw = cv.iter().zip(&cw).map(|(a, b)| a.clone() * b.clone()).fold(Expr::zero(), |acc, e| acc + e);
            let lhs = ScalarJet::of(&hvw, x).unwrap().gradient.dot(&u);
            let du_v = nh_covariant_derivative(&g, x, &u, &cv).unwrap();
            let du_w = nh_covariant_derivative(&g, x, &u, &cw).unwrap();
            let rhs = du_v.dot(&(&p.metric * &w)) + v.dot(&(&p.metric * &du_w));
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{name}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn decomposition_identities() {
    let mut rng = rng(33);
    for (name, s) in builtins().into_iter().chain([("foliation", curved_foliation())]) {
        let g = s.riemannian_extension().unwrap();
        for x in s.probes().iter().take(16) {
            let p = g.at(x).unwrap();
            let alpha = random_form(s.chart(), &mut rng).jet(x).unwrap();
            let ga = p.g_jet(&alpha);
            let v = ga.value.clone();
            // ∇^G_v V = ∇^nh_v V + Π^G(v, v)
            let full = p.covariant_vector(&v, &ga);
            let split = p.nh_covariant(&v, &ga).unwrap() + p.pi_g(&v, &v).unwrap();
            assert!((&full - &split).norm() < 1e-9 * full.norm().max(1.0), "{name} ∇^G");

            // δ^B_v η = ∇̃^B_v η + Π^B(v, η) for η = τ⊥ α
            let eta = p.tau_perp_jet(&alpha);
            let lhs = interior_d(&v, &eta);
            let rhs = p.tilde_nabla_b(&v, &eta) + p.pi_b(&v, &eta.value).unwrap();
            assert!((&lhs - &rhs).norm() < 1e-9 * lhs.norm().max(1.0), "{name} δ^B");

            // ∇_α α splits into its τ and τ⊥ parts, matching the two equations of the lift
            let nabla = p.nabla_normal(&alpha, &alpha);
            let tangential = p.flat(&p.nh_covariant(&v, &ga).unwrap()) + p.pi_b(&v, &eta.value).unwrap();
            let normal = p.flat(&p.pi_g(&v, &v).unwrap()) + p.tilde_nabla_b(&v, &eta);
            assert!((&p.tau * &nabla - &tangential).norm() < 1e-9 * nabla.norm().max(1.0), "{name} τ part");
            assert!((p.tau_perp(&nabla) - &normal).norm() < 1e-9 * nabla.norm().max(1.0), "{name} τ⊥ part");
        }
    }
}

#[test]
fn transport_examples() {
    let s = heisenberg();
    let g = s.riemannian_extension().unwrap();
    let tr = nonholonomic_trajectory(&g, &[0.0; 3], &u2(1.0, 0.0), 1.0, TOL).unwrap();
    let eta = tilde_nabla_b_transport(&g, &tr, &vec3(0.0, 0.0, 0.0), TOL).unwrap();
    assert!(eta.covectors(&g).unwrap().iter().all(|e| e.norm() == 0.0));
    assert!(eta.equation_residual(&g).unwrap() < 1e-12);
    let err = tilde_nabla_b_transport(&g, &tr, &vec3(1.0, 0.0, 0.0), TOL).unwrap_err();
    assert!(matches!(err, Error::NotAnnihilator { .. }));
}

#[test]
fn transport_stays_in_annihilator_and_solves_equation() {
    for (name, s, x0, u0) in [
        ("montgomery", montgomery(), [1.2, 0.0, 0.0], u2(0.3, 0.9)),
        ("liu-sussmann", liu_sussmann(), [0.4, 0.1, 0.0], u2(-0.5, 0.7)),
        ("foliation", curved_foliation(), [0.3, -0.2, 0.1], u2(0.8, 0.6)),
    ] {
        let g = s.riemannian_extension().unwrap();
        let tr = nonholonomic_trajectory(&g, &x0, &u0, 1.0, TOL).unwrap();
        let eta0 = g.at(&x0).unwrap().annihilator_field(0).value * 1.7;
        let curve = tilde_nabla_b_transport(&g, &tr, &eta0, TOL).unwrap();
        for &t in curve.times() {
            let (x, _, eta) = curve.sample_at(&g, t).unwrap();
            assert!((s.frame_matrix(&x).unwrap().transpose() * &eta).amax() < 1e-9, "{name}");
        }
        assert!(curve.equation_residual(&g).unwrap() < 1e-6, "{name}");
        // the joint integration reproduces the base trajectory
        let (x_end, _, _) = curve.sample_at(&g, 1.0).unwrap();
        let y_end = tr.state_at(1.0).unwrap().x;
        assert!(x_end.iter().zip(&y_end).all(|(a, b)| (a - b).abs() < 1e-9), "{name}");
    }
}

#[test]
fn bott_transport_on_involutive_distribution() {
    let s = curved_foliation();
    let g = s.riemannian_extension().unwrap();
    let x0 = [0.3, -0.2, 0.1];
    let tr = nonholonomic_trajectory(&g, &x0, &u2(0.8, 0.6), 1.0, TOL).unwrap();
    let eta0 = g.at(&x0).unwrap().annihilator_field(0).value;
    let curve = tilde_nabla_b_transport(&g, &tr, &eta0, TOL).unwrap();
    let mut worst_pi_b: f64 = 0.0;
    for &t in curve.times() {
        let (x, u, eta) = curve.sample_at(&g, t).unwrap();
        let p = g.at(&x).unwrap();
        assert!((p.frame.frame.transpose() * &eta).amax() <= 1e-9);
        worst_pi_b = worst_pi_b.max(p.pi_b_unchecked(&u, &eta).norm());
    }
    assert!(worst_pi_b < 1e-12);
    let report = compatibility_test(&g, &tr, 1e-8, TOL).unwrap();
    assert!(!report.vacuous_annihilator);
    assert_eq!(report.initial_annihilator.len(), 1);
}

#[test]
fn heisenberg_compatibility_example() {
    let s = heisenberg();
    let g = s.riemannian_extension().unwrap();
    let tr = nonholonomic_trajectory(&g, &[0.0; 3], &u2(1.0, 0.0), 1.0, TOL).unwrap();
    let report = compatibility_test(&g, &tr, 1e-9, TOL).unwrap();
    assert!(report.vacuous_annihilator);
    assert!(report.pi_g_max < 1e-14);
    assert_eq!(report.verdict, CompatibilityVerdict::Compatible);
    assert_eq!(report.verdict.as_str(), "compatible");
    assert_eq!(report.best_candidate().kind, CandidateKind::Particular);
    let lift = report.lift.as_ref().unwrap();
    assert!((&lift.covectors[0] - vec3(1.0, 0.0, 0.0)).norm() < 1e-14);
    let normal = normal_extremal(&s, &[0.0; 3], &lift.covectors[0], 1.0, TOL).unwrap();
    let end = normal.last();
    assert!((end.x[0] - 1.0).abs() < 1e-9 && end.x[1].abs() < 1e-9 && end.x[2].abs() < 1e-9);
}

#[test]
fn heisenberg_horizontal_lines_are_compatible_everywhere() {
    let s = heisenberg();
    let g = s.riemannian_extension().unwrap();
    let mut rng = rng(34);
    for _ in 0..3 {
        let x0 = random_point(&s, &mut rng);
        let u0 = DVector::from_fn(2, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let tr = nonholonomic_trajectory(&g, &x0, &u0, 1.0, TOL).unwrap();
        let report = compatibility_test(&g, &tr, 1e-8, TOL).unwrap();
        assert_eq!(report.verdict, CompatibilityVerdict::Compatible);
        let lift = report.lift.unwrap();
        assert!(lift.auto_parallel_residual < 1e-7 && lift.admissibility_residual < 1e-7);
    }
}

#[test]
fn montgomery_motion_is_compatible() {
    // the Montgomery extension is a Riemannian submersion, so Π^G vanishes and
    // every nonholonomic trajectory is a G-geodesic tangent to Q
    let s = montgomery();
    let g = s.riemannian_extension().unwrap();
    let tr = nonholonomic_trajectory(&g, &[1.2, 0.0, 0.0], &u2(0.6, 0.8), 1.0, TOL).unwrap();
    let report = compatibility_test(&g, &tr, 1e-8, TOL).unwrap();
    assert!(report.pi_g_max < 1e-10, "{:e}", report.pi_g_max);
    assert_eq!(report.verdict, CompatibilityVerdict::Compatible);
    assert!(report.lift.unwrap().auto_parallel_residual <= 1e-7);
}

#[test]
fn liu_sussmann_generic_motion_is_incompatible() {
    let s = liu_sussmann();
    let g = s.riemannian_extension().unwrap();
    let x0 = [0.5, 0.0, 0.0];
    let u0 = u2(0.6, 0.8);
    let tr = nonholonomic_trajectory(&g, &x0, &u0, 1.0, TOL).unwrap();
    let report = compatibility_test(&g, &tr, 1e-8, TOL).unwrap();
    assert!(report.pi_g_max > 1e-3, "{:e}", report.pi_g_max);
    assert_eq!(report.verdict, CompatibilityVerdict::Incompatible);
    assert!(report.lift.is_none());
    // independent check: normal extremals from every candidate initial covector
    // ♭_G ċ(0) + η0 leave the nonholonomic trajectory
    let p = g.at(&x0).unwrap();
    let base = p.flat(&(&p.frame.frame * &u0));
    let eta = p.annihilator_field(0).value;
    let b = tr.state_at(1.0).unwrap().x;
    for k in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
        let normal = normal_extremal(&s, &x0, &(&base + &eta * k), 1.0, TOL).unwrap();
        let a = normal.last().x;
        let gap = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-4, "k={k}: {gap:e}");
    }
}

#[test]
fn helix_motion_compatibility() {
    // the abnormal helix r = 1 is a nonholonomic trajectory; check the verdict is consistent with a lift
    let s = montgomery();
    let g = s.riemannian_extension().unwrap();
    let tr = nonholonomic_trajectory(&g, &[1.0, 0.0, 0.0], &u2(0.0, 1.0), 1.0, TOL).unwrap();
    for st in tr.states() {
        assert!((st.x[0] - 1.0).abs() < 1e-10);
    }
    let report = compatibility_test(&g, &tr, 1e-8, TOL).unwrap();
    if let Some(lift) = &report.lift {
        assert!(lift.auto_parallel_residual <= 1e-7);
        assert_eq!(report.verdict, CompatibilityVerdict::Compatible);
    } else {
        assert_eq!(report.verdict, CompatibilityVerdict::Incompatible);
    }
    for c in &report.candidates {
        assert!(c.q_defect < 1e-9);
        assert_eq!(c.covectors.len(), c.times.len());
        assert_eq!(c.pi_b_profile.len(), c.times.len());
    }
}
