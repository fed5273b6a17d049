use nalgebra::DVector;

use super::hamiltonian_field;
use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::integrate::{integrate_adaptive, AdaptiveOptions, OdeProblem, Trajectory};

/// Integrates `ẍ^k = −Γ^k_ij ẋ^i ẋ^j` of the extension metric with state `(x, v)`.
pub fn riemannian_geodesic(
    g: &MetricField<'_>,
    x0: &[f64],
    v0: &DVector<f64>,
    duration: f64,
    options: impl Into<AdaptiveOptions>,
) -> Result<Trajectory> {
    let n = g.structure().dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::Dimension { what: "geodesic initial data", expected: n, got: v0.len() });
    }
    let rhs = move |_t: f64, y: &DVector<f64>| -> std::result::Result<DVector<f64>, String> {
        let x: Vec<f64> = y.rows(0, n).iter().copied().collect();
        let v = y.rows(n, n).into_owned();
        let p = g.at(&x).map_err(|e| e.to_string())?;
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n).copy_from(&(-p.christoffel.contract(&v, &v)));
        Ok(out)
    };
    let problem = OdeProblem::new(2 * n, rhs);
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from_slice(x0);
    y0.rows_mut(n, n).copy_from(v0);
    Ok(integrate_adaptive(&problem, &y0, 0.0, duration, options)?)
}

/// Worst defects of a geodesic and of its lift `p = ♭_G ẋ` at step midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicLiftResiduals {
    /// `|π⊥ ẋ|`: distance of the velocity from the distribution.
    pub tangency: f64,
    /// `|ẋ − ḡ p|`.
    pub admissibility: f64,
    /// `|ṗ + ½ ∂ḡ(p, p)|` with `ṗ` from the chain rule.
    pub dynamics: f64,
}

impl GeodesicLiftResiduals {
    pub fn of(g: &MetricField<'_>, geodesic: &Trajectory) -> Result<Self> {
        let n = g.structure().dim();
        let mut out = GeodesicLiftResiduals { tangency: 0.0, admissibility: 0.0, dynamics: 0.0 };
        let mut times = geodesic.step_midpoints();
        times.extend_from_slice(geodesic.times());
        for t in times {
            let y = geodesic.at(t)?;
            let dy = geodesic.derivative_at(t)?;
            let x: Vec<f64> = y.rows(0, n).iter().copied().collect();
            let v = y.rows(n, n).into_owned();
            let vdot = dy.rows(n, n).into_owned();
            let pg = g.at(&x)?;
            let p = pg.flat(&v);
            let mut pdot = &pg.metric * &vdot;
            for i in 0..n {
                pdot += &pg.d_metric[i] * &v * v[i];
            }
            let (xdot, rhs) = hamiltonian_field(&pg.frame, &p);
            out.tangency = out.tangency.max(pg.pi_perp(&v).norm());
            out.admissibility = out.admissibility.max((&v - xdot).norm());
            out.dynamics = out.dynamics.max((pdot - rhs).norm());
        }
        Ok(out)
    }
}
