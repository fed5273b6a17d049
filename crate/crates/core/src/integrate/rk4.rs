use nalgebra::DVector;

use super::{IntegrateError, Interpolation, OdeProblem, Trajectory};

/// Classical fourth-order Runge–Kutta with a uniform step no larger than `step`.
pub fn integrate_fixed(
    p: &OdeProblem<'_>,
    y0: &DVector<f64>,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<Trajectory, IntegrateError> {
    p.check_initial(y0, t0, t1)?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(IntegrateError::InvalidArgument("step must be positive".into()));
    }
    if !(t1 > t0) {
        return Err(IntegrateError::InvalidArgument("fixed-step integration needs t1 > t0".into()));
    }
    let steps = ((t1 - t0) / step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut derivatives = Vec::with_capacity(steps + 1);
    let mut y = y0.clone();
    let mut k1 = p.rhs(t0, &y)?;
    times.push(t0);
    states.push(y.clone());
    derivatives.push(k1.clone());
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k2 = p.rhs(t + 0.5 * h, &(&y + &k1 * (0.5 * h)))?;
        let k3 = p.rhs(t + 0.5 * h, &(&y + &k2 * (0.5 * h)))?;
        let k4 = p.rhs(t + h, &(&y + &k3 * h))?;
        y += (&k1 + (&k2 + &k3) * 2.0 + &k4) * (h / 6.0);
        let tn = if i + 1 == steps { t1 } else { t0 + (i + 1) as f64 * h };
        k1 = p.rhs(tn, &y)?;
        times.push(tn);
        states.push(y.clone());
        derivatives.push(k1.clone());
    }
    Ok(Trajectory::new(times, states, derivatives, Interpolation::CubicHermite))
}
