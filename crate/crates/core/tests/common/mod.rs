#![allow(dead_code)]

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use subrig::builtin;
use subrig::expr::{Chart, Expr};
use subrig::geometry::{OneFormField, SubRiemannianStructure, VectorField};

pub fn montgomery() -> SubRiemannianStructure {
    builtin::montgomery().structure().unwrap()
}

pub fn liu_sussmann() -> SubRiemannianStructure {
    builtin::liu_sussmann().structure().unwrap()
}

pub fn heisenberg() -> SubRiemannianStructure {
    builtin::heisenberg().structure().unwrap()
}

/// `Q = span{∂x, ∂y}` in ℝ³.
pub fn involutive() -> SubRiemannianStructure {
    let c = Chart::new(&["x", "y", "z"]).unwrap();
    let frame = vec![VectorField::coordinate(3, 0), VectorField::coordinate(3, 1)];
    SubRiemannianStructure::builder(c, frame).complement(vec![VectorField::coordinate(3, 2)]).build().unwrap()
}

pub fn builtins() -> Vec<(&'static str, SubRiemannianStructure)> {
    builtin::names().into_iter().map(|n| (n, builtin::by_name(n).unwrap().structure().unwrap())).collect()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random smooth scalar: `a + Σ b_i x_i + c sin(x_j) x_k`.
pub fn random_scalar(chart: &Chart, rng: &mut StdRng) -> Expr {
    let n = chart.dim();
    let mut e = Expr::constant(rng.gen_range(-1.0..1.0));
    for i in 0..n {
        e = e + Expr::constant(rng.gen_range(-1.0..1.0)) * chart.coordinate(i);
    }
    let j = rng.gen_range(0..n);
    let k = rng.gen_range(0..n);
    e + Expr::constant(rng.gen_range(-0.5..0.5)) * chart.coordinate(j).sin() * chart.coordinate(k)
}

pub fn random_form(chart: &Chart, rng: &mut StdRng) -> OneFormField {
    OneFormField::new((0..chart.dim()).map(|_| random_scalar(chart, rng)).collect()).unwrap()
}

/// Uniform point of the structure's probe bounding box.
pub fn random_point(s: &SubRiemannianStructure, rng: &mut StdRng) -> Vec<f64> {
    let n = s.dim();
    let probes = s.probes();
    (0..n)
        .map(|i| {
            let lo = probes.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
            let hi = probes.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
            rng.gen_range(lo..hi)
        })
        .collect()
}

pub fn vec3(a: f64, b: f64, c: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b, c])
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
