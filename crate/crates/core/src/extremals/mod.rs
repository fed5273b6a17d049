//! Normal extremals as Hamiltonian geodesics, the normal connection evaluator,
//! and abnormal extremals via coadjoint transport and pullback rank.

mod abnormal;
mod riemannian;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{FrameJet, MetricField, OneFormField, PointGeometry, SubRiemannianStructure};
use crate::integrate::{integrate_adaptive, AdaptiveOptions, OdeProblem, Trajectory};

pub use abnormal::{
    abnormal_test, chebyshev_times, coadjoint_transport, pullback_span, variation_vector, AbnormalCertificate,
    CovectorCurve, PiecewiseCurveSpec, PiecewiseFlow, Segment, SegmentFlow, Verdict, ABNORMAL_RESIDUAL_TOL,
    DEFAULT_SAMPLES, INDETERMINACY_FACTOR,
};
pub use riemannian::{riemannian_geodesic, GeodesicLiftResiduals};

/// A point of the cotangent bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentState {
    pub x: Vec<f64>,
    pub p: DVector<f64>,
}

impl CotangentState {
    pub fn new(x: Vec<f64>, p: DVector<f64>) -> Self {
        Self { x, p }
    }

    fn from_vector(y: &DVector<f64>, n: usize) -> Self {
        Self { x: y.rows(0, n).iter().copied().collect(), p: y.rows(n, n).into_owned() }
    }
}

/// `H(x, p) = ½ pᵀ ḡ(x) p`.
pub fn hamiltonian(s: &SubRiemannianStructure, state: &CotangentState) -> Result<f64> {
    let g = s.cometric(&state.x)?;
    if state.p.len() != s.dim() {
        return Err(Error::Dimension { what: "covector", expected: s.dim(), got: state.p.len() });
    }
    Ok(0.5 * state.p.dot(&(g * &state.p)))
}

/// Right-hand side of the Hamiltonian field of `H`: `ẋ = ḡp`, `ṗ_k = −½ pᵀ ∂_kḡ p`.
pub fn hamiltonian_field(fj: &FrameJet, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = fj.dim();
    let xdot = &fj.cometric * p;
    let pdot = DVector::from_fn(n, |k, _| -0.5 * p.dot(&(&fj.d_cometric[k] * p)));
    (xdot, pdot)
}

/// Defects of a cotangent curve sample against the normal-extremal equations:
/// admissibility `|ẋ − ḡp|` and dynamics `|ṗ + ½ ∂ḡ(p, p)|`.
pub fn normal_residuals(
    s: &SubRiemannianStructure,
    x: &[f64],
    p: &DVector<f64>,
    xdot: &DVector<f64>,
    pdot: &DVector<f64>,
) -> Result<(f64, f64)> {
    let fj = s.frame_jet(x)?;
    let (v, f) = hamiltonian_field(&fj, p);
    Ok(((xdot - v).norm(), (pdot - f).norm()))
}

/// Solution of the Hamiltonian system of `H` with state `(x, p)`.
#[derive(Debug, Clone)]
pub struct CotangentCurve {
    dim: usize,
    trajectory: Trajectory,
}

impl CotangentCurve {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Underlying trajectory with state `(x, p)`.
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn times(&self) -> &[f64] {
        self.trajectory.times()
    }

    pub fn state_at(&self, t: f64) -> Result<CotangentState> {
        Ok(CotangentState::from_vector(&self.trajectory.at(t)?, self.dim))
    }

    pub fn states(&self) -> Vec<CotangentState> {
        self.trajectory.states().iter().map(|y| CotangentState::from_vector(y, self.dim)).collect()
    }

    pub fn last(&self) -> CotangentState {
        CotangentState::from_vector(self.trajectory.last(), self.dim)
    }

    /// Largest relative change of `H` over the nodes, relative to `max(H(0), 1e-30)`.
    pub fn hamiltonian_drift(&self, s: &SubRiemannianStructure) -> Result<f64> {
        let states = self.states();
        let h0 = hamiltonian(s, &states[0])?;
        let mut drift: f64 = 0.0;
        for st in &states {
            drift = drift.max((hamiltonian(s, st)? - h0).abs());
        }
        Ok(drift / h0.max(1e-30))
    }

    /// Largest `|ẋ − ḡp|` over the samples, with `ẋ` the recorded derivative.
    pub fn admissibility_residual(&self, s: &SubRiemannianStructure) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (y, dy) in self.trajectory.states().iter().zip(self.trajectory.derivatives()) {
            worst = worst.max(self.admissibility_defect(s, y, dy)?);
        }
        Ok(worst)
    }

    /// Largest `|ẋ − ḡp|` at step midpoints, using the derivative of the dense
    /// interpolant; bounded by the interpolation error rather than zero.
    pub fn interpolated_admissibility_residual(&self, s: &SubRiemannianStructure) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for t in self.trajectory.step_midpoints() {
            let y = self.trajectory.at(t)?;
            let dy = self.trajectory.derivative_at(t)?;
            worst = worst.max(self.admissibility_defect(s, &y, &dy)?);
        }
        Ok(worst)
    }

    fn admissibility_defect(&self, s: &SubRiemannianStructure, y: &DVector<f64>, dy: &DVector<f64>) -> Result<f64> {
        let st = CotangentState::from_vector(y, self.dim);
        let xdot = dy.rows(0, self.dim).into_owned();
        let g = s.cometric(&st.x)?;
        Ok((xdot - g * &st.p).norm())
    }
}

/// Integrates the Hamiltonian field of `H` from `(x0, p0)` over `[0, duration]`.
pub fn normal_extremal(
    s: &SubRiemannianStructure,
    x0: &[f64],
    p0: &DVector<f64>,
    duration: f64,
    options: impl Into<AdaptiveOptions>,
) -> Result<CotangentCurve> {
    let n = s.dim();
    s.chart().check_point(x0)?;
    if p0.len() != n {
        return Err(Error::Dimension { what: "initial covector", expected: n, got: p0.len() });
    }
    if !(duration >= 0.0) {
        return Err(Error::InvalidArgument("duration must be nonnegative".into()));
    }
    let rhs = move |_t: f64, y: &DVector<f64>| -> std::result::Result<DVector<f64>, String> {
        let x: Vec<f64> = y.rows(0, n).iter().copied().collect();
        let p = y.rows(n, n).into_owned();
        s.chart().check_point(&x).map_err(|e| e.to_string())?;
        let fj = s.frame_jet(&x).map_err(|e| e.to_string())?;
        let (xdot, pdot) = hamiltonian_field(&fj, &p);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&xdot);
        out.rows_mut(n, n).copy_from(&pdot);
        Ok(out)
    };
    let problem = OdeProblem::new(2 * n, rhs);
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from_slice(x0);
    y0.rows_mut(n, n).copy_from(p0);
    let trajectory = integrate_adaptive(&problem, &y0, 0.0, duration, options)?;
    Ok(CotangentCurve { dim: n, trajectory })
}

/// `∇_α β` at `x` for the normal connection `∇^G_{g(α)} τ(β) + i_{g(α)} d(τ⊥β)`.
pub fn nabla_normal(g: &MetricField<'_>, alpha: &OneFormField, beta: &OneFormField, x: &[f64]) -> Result<DVector<f64>> {
    let p = g.at(x)?;
    Ok(p.nabla_normal(&alpha.jet(x)?, &beta.jet(x)?))
}

/// `∇_α α − ½{α, α}` at `x`; vanishes for a normal connection.
pub fn normality_defect(g: &MetricField<'_>, alpha: &OneFormField, x: &[f64]) -> Result<DVector<f64>> {
    let p: PointGeometry = g.at(x)?;
    let a = alpha.jet(x)?;
    Ok(p.nabla_normal(&a, &a) - p.symmetric_bracket(&a, &a) * 0.5)
}
