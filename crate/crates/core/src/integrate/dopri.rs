use nalgebra::DVector;

use super::{IntegrateError, Interpolation, OdeProblem, Tolerances, Trajectory};

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Step-control parameters of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub tolerances: Tolerances,
    /// Upper bound on the step size; infinite by default.
    pub max_step: f64,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
}

impl AdaptiveOptions {
    pub fn new(tolerances: Tolerances) -> Self {
        Self { tolerances, max_step: f64::INFINITY, max_steps: 200_000, initial_step: None }
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }
}

impl From<Tolerances> for AdaptiveOptions {
    fn from(t: Tolerances) -> Self {
        Self::new(t)
    }
}

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

fn error_norm(err: &DVector<f64>, y0: &DVector<f64>, y1: &DVector<f64>, tol: Tolerances) -> f64 {
    let n = err.len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = (0..n)
        .map(|i| {
            let sk = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sk).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

fn initial_step(
    p: &OdeProblem<'_>,
    t0: f64,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    tol: Tolerances,
    span: f64,
) -> Result<f64, IntegrateError> {
    let zero = DVector::zeros(y0.len());
    let d0 = error_norm(y0, &zero, y0, tol);
    let d1 = error_norm(f0, &zero, y0, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let f1 = p.rhs(t0 + h0, &(y0 + f0 * h0))?;
    let d2 = error_norm(&(&f1 - f0), &zero, y0, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Dormand–Prince 5(4) with PI step control and continuous output.
pub fn integrate_adaptive(
    p: &OdeProblem<'_>,
    y0: &DVector<f64>,
    t0: f64,
    t1: f64,
    options: impl Into<AdaptiveOptions>,
) -> Result<Trajectory, IntegrateError> {
    let opts = options.into();
    let tol = opts.tolerances;
    p.check_initial(y0, t0, t1)?;
    if !(tol.rtol > 0.0 && tol.atol > 0.0) {
        return Err(IntegrateError::InvalidArgument("tolerances must be positive".into()));
    }
    if t1 < t0 {
        return Err(IntegrateError::InvalidArgument("adaptive integration needs t1 ≥ t0".into()));
    }
    let f0 = p.rhs(t0, y0)?;
    let mut times = vec![t0];
    let mut states = vec![y0.clone()];
    let mut derivatives = vec![f0.clone()];
    let mut cont: Vec<[DVector<f64>; 5]> = Vec::new();
    if t1 == t0 {
        return Ok(Trajectory::new(times, states, derivatives, Interpolation::Dopri(cont)));
    }
    let span = t1 - t0;
    let max_step = opts.max_step.min(span);
    let mut h = match opts.initial_step {
        Some(h) => h,
        None => initial_step(p, t0, y0, &f0, tol, span)?,
    }
    .min(max_step);

    let expo1 = 0.2 - BETA * 0.75;
    let mut facold: f64 = 1e-4;
    let mut rejected = false;
    let mut t = t0;
    let mut y = y0.clone();
    let mut k0 = f0;
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return Err(IntegrateError::TooManySteps { t, steps });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(IntegrateError::StepUnderflow { t, h });
        }
        let last = t + h * (1.0 + 1e-12) >= t1;
        if last {
            h = t1 - t;
        }
        steps += 1;

        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(k0.clone());
        let mut stage_failed = false;
        for s in 1..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys.axpy(h * A[s][j], kj, 1.0);
                }
            }
            match p.rhs(t + C[s] * h, &ys) {
                Ok(f) if f.iter().all(|v| v.is_finite()) => k.push(f),
                Ok(_) => {
                    stage_failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let mut y_new = y.clone();
        if !stage_failed {
            for (j, kj) in k.iter().enumerate() {
                if A[6][j] != 0.0 {
                    y_new.axpy(h * A[6][j], kj, 1.0);
                }
            }
        }
        let t_new = if last { t1 } else { t + h };
        let k6 = if stage_failed || y_new.iter().any(|v| !v.is_finite()) {
            None
        } else {
            match p.rhs(t_new, &y_new) {
                Ok(f) if f.iter().all(|v| v.is_finite()) => Some(f),
                Ok(_) => None,
                Err(e) => return Err(e),
            }
        };
        let Some(k6) = k6 else {
            h *= FAC_MIN;
            rejected = true;
            continue;
        };
        k.push(k6);

        let mut err = DVector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err.axpy(h * E[j], kj, 1.0);
            }
        }
        let en = error_norm(&err, &y, &y_new, tol);
        let fac11 = en.powf(expo1);
        let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let mut h_new = h / fac;

        if en <= 1.0 {
            facold = en.max(1e-4);
            let ydiff = &y_new - &y;
            let bspl = &k[0] * h - &ydiff;
            let c3 = &ydiff - &k[6] * h - &bspl;
            let mut c4 = DVector::zeros(y.len());
            for (j, kj) in k.iter().enumerate() {
                if D[j] != 0.0 {
                    c4.axpy(h * D[j], kj, 1.0);
                }
            }
            cont.push([y.clone(), ydiff, bspl, c3, c4]);
            t = t_new;
            y = y_new;
            k0 = k.swap_remove(6);
            times.push(t);
            states.push(y.clone());
            derivatives.push(k0.clone());
            if last {
                break;
            }
            if rejected {
                h_new = h_new.min(h);
            }
            rejected = false;
        } else {
            h_new = h / (1.0 / FAC_MIN).min(fac11 / SAFE);
            rejected = true;
        }
        h = h_new.min(max_step);
    }
    Ok(Trajectory::new(times, states, derivatives, Interpolation::Dopri(cont)))
}
