use nalgebra::{DMatrix, DVector};

use super::{integrate_adaptive, AdaptiveOptions, IntegrateError, OdeProblem, Trajectory};
use crate::geometry::VectorField;

/// `|det J|` below which the flow Jacobian is reported as near-singular.
pub const DET_WARNING_THRESHOLD: f64 = 1e-12;

/// Point, Jacobian `J` and its inverse `K`.
pub type FlowState = (Vec<f64>, DMatrix<f64>, DMatrix<f64>);

/// Integral curve of a vector field together with its flow Jacobian
/// `J(t) = ∂φ_{t−t0}/∂x` and the inverse `K(t) = J(t)⁻¹`, both integrated
/// directly from `J̇ = DX·J` and `K̇ = −K·DX`.
#[derive(Debug, Clone)]
pub struct VariationalFlow {
    dim: usize,
    trajectory: Trajectory,
    min_abs_det: f64,
    near_singular_at: Option<f64>,
}

impl VariationalFlow {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Augmented trajectory with state `(x, vec J, vec K)` in column-major order.
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn t0(&self) -> f64 {
        self.trajectory.t0()
    }

    pub fn t1(&self) -> f64 {
        self.trajectory.t1()
    }

    /// Smallest `|det J|` over the integration nodes.
    pub fn min_abs_det(&self) -> f64 {
        self.min_abs_det
    }

    /// First node time at which `|det J|` fell below the warning threshold.
    pub fn near_singular_at(&self) -> Option<f64> {
        self.near_singular_at
    }

    fn split(&self, y: &DVector<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim;
        let x = y.rows(0, n).iter().copied().collect();
        let j = DMatrix::from_column_slice(n, n, y.rows(n, n * n).as_slice());
        let k = DMatrix::from_column_slice(n, n, y.rows(n + n * n, n * n).as_slice());
        (x, j, k)
    }

    pub fn point_at(&self, t: f64) -> Result<Vec<f64>, IntegrateError> {
        Ok(self.split(&self.trajectory.at(t)?).0)
    }

    /// `J(t)`.
    pub fn jacobian_at(&self, t: f64) -> Result<DMatrix<f64>, IntegrateError> {
        Ok(self.split(&self.trajectory.at(t)?).1)
    }

    /// `K(t) = J(t)⁻¹`.
    pub fn inverse_at(&self, t: f64) -> Result<DMatrix<f64>, IntegrateError> {
        Ok(self.split(&self.trajectory.at(t)?).2)
    }

    /// Point, `J` and `K` at `t`.
    pub fn state_at(&self, t: f64) -> Result<FlowState, IntegrateError> {
        Ok(self.split(&self.trajectory.at(t)?))
    }

    /// Final point, `J` and `K` at the node `t1` (no interpolation).
    pub fn end_state(&self) -> FlowState {
        self.split(self.trajectory.last())
    }

    /// Vector at `x(t)` pulled back to `x(t0)`: `K(t) v`.
    pub fn pull_back(&self, t: f64, v: &DVector<f64>) -> Result<DVector<f64>, IntegrateError> {
        Ok(self.inverse_at(t)? * v)
    }

    /// Covector at `x(t0)` transported to `x(t)`: `J(t)⁻ᵀ η = K(t)ᵀ η`.
    pub fn transport_covector(&self, t: f64, eta: &DVector<f64>) -> Result<DVector<f64>, IntegrateError> {
        Ok(self.inverse_at(t)?.transpose() * eta)
    }
}

/// Integrates the flow of `field` from `x0` over `[t0, t1]` with its variational equations.
pub fn flow_with_variational(
    field: &VectorField,
    x0: &[f64],
    t0: f64,
    t1: f64,
    options: impl Into<AdaptiveOptions>,
) -> Result<VariationalFlow, IntegrateError> {
    let n = field.dim();
    if x0.len() != n {
        return Err(IntegrateError::InvalidArgument(format!(
            "start point has {} coordinates, expected {n}",
            x0.len()
        )));
    }
    let rhs = move |_t: f64, y: &DVector<f64>| -> Result<DVector<f64>, String> {
        let x = y.rows(0, n);
        let xs = x.as_slice();
        let v = field.eval(xs).map_err(|e| e.to_string())?;
        let dx = field.jacobian(xs).map_err(|e| e.to_string())?;
        let j = DMatrix::from_column_slice(n, n, y.rows(n, n * n).as_slice());
        let k = DMatrix::from_column_slice(n, n, y.rows(n + n * n, n * n).as_slice());
        let dj = &dx * j;
        let dk = -(k * dx);
        let mut out = DVector::zeros(n + 2 * n * n);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n * n).copy_from_slice(dj.as_slice());
        out.rows_mut(n + n * n, n * n).copy_from_slice(dk.as_slice());
        Ok(out)
    };
    let problem = OdeProblem::new(n + 2 * n * n, rhs);
    let id = DMatrix::<f64>::identity(n, n);
    let mut y0 = DVector::zeros(n + 2 * n * n);
    y0.rows_mut(0, n).copy_from_slice(x0);
    y0.rows_mut(n, n * n).copy_from_slice(id.as_slice());
    y0.rows_mut(n + n * n, n * n).copy_from_slice(id.as_slice());
    let trajectory = integrate_adaptive(&problem, &y0, t0, t1, options)?;
    let mut min_abs_det = f64::INFINITY;
    let mut near_singular_at = None;
    for (t, y) in trajectory.times().iter().zip(trajectory.states()) {
        let j = DMatrix::from_column_slice(n, n, y.rows(n, n * n).as_slice());
        let d = j.determinant().abs();
        min_abs_det = min_abs_det.min(d);
        if d < DET_WARNING_THRESHOLD && near_singular_at.is_none() {
            near_singular_at = Some(*t);
        }
    }
    Ok(VariationalFlow { dim: n, trajectory, min_abs_det, near_singular_at })
}
