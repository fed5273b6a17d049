//! Explicit ODE integration with dense output and flow-Jacobian augmentation.

mod dopri;
mod rk4;
mod trajectory;
mod variational;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use dopri::{integrate_adaptive, AdaptiveOptions};
pub use rk4::integrate_fixed;
pub use trajectory::{Interpolation, Trajectory};
pub use variational::{flow_with_variational, FlowState, VariationalFlow, DET_WARNING_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (h = {h:e}); the problem may be stiff or singular")]
    StepUnderflow { t: f64, h: f64 },
    #[error("right-hand side failed at t = {t}: {message}")]
    Rhs { t: f64, message: String },
    #[error("invalid integration argument: {0}")]
    InvalidArgument(String),
    #[error("step budget of {steps} exhausted at t = {t}")]
    TooManySteps { t: f64, steps: usize },
}

/// Relative and absolute error tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerances {
    /// Tolerances for runs whose output feeds rank decisions.
    pub const CERTIFICATE: Tolerances = Tolerances { rtol: 1e-10, atol: 1e-12 };
    pub const EXPLORATORY: Tolerances = Tolerances { rtol: 1e-6, atol: 1e-9 };

    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::CERTIFICATE
    }
}

type RhsFn<'a> = dyn Fn(f64, &DVector<f64>) -> Result<DVector<f64>, String> + Send + Sync + 'a;
type JacobianFn<'a> = dyn Fn(f64, &DVector<f64>) -> Result<DMatrix<f64>, String> + Send + Sync + 'a;

/// `ẏ = f(t, y)` with an optional Jacobian `∂f/∂y`.
pub struct OdeProblem<'a> {
    dim: usize,
    rhs: Box<RhsFn<'a>>,
    jacobian: Option<Box<JacobianFn<'a>>>,
}

impl<'a> OdeProblem<'a> {
    pub fn new<F>(dim: usize, rhs: F) -> Self
    where
        F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>, String> + Send + Sync + 'a,
    {
        Self { dim, rhs: Box::new(rhs), jacobian: None }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(f64, &DVector<f64>) -> Result<DMatrix<f64>, String> + Send + Sync + 'a,
    {
        self.jacobian = Some(Box::new(jacobian));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rhs(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>, IntegrateError> {
        let dy = (self.rhs)(t, y).map_err(|message| IntegrateError::Rhs { t, message })?;
        if dy.len() != self.dim {
            return Err(IntegrateError::Rhs {
                t,
                message: format!("right-hand side returned {} components, expected {}", dy.len(), self.dim),
            });
        }
        Ok(dy)
    }

    pub fn jacobian(&self, t: f64, y: &DVector<f64>) -> Option<Result<DMatrix<f64>, IntegrateError>> {
        self.jacobian
            .as_ref()
            .map(|j| j(t, y).map_err(|message| IntegrateError::Rhs { t, message }))
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    fn check_initial(&self, y0: &DVector<f64>, t0: f64, t1: f64) -> Result<(), IntegrateError> {
        if y0.len() != self.dim {
            return Err(IntegrateError::InvalidArgument(format!(
                "initial state has {} components, expected {}",
                y0.len(),
                self.dim
            )));
        }
        if !t0.is_finite() || !t1.is_finite() || y0.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::InvalidArgument("non-finite initial data".into()));
        }
        Ok(())
    }
}

impl std::fmt::Debug for OdeProblem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OdeProblem").field("dim", &self.dim).field("jacobian", &self.has_jacobian()).finish()
    }
}
