use nalgebra::DVector;

use super::IntegrateError;

/// Dense-output scheme of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Interpolation {
    /// Cubic Hermite through node values and node derivatives.
    CubicHermite,
    /// Fourth-order Dormand–Prince continuous extension; one coefficient set per step.
    Dopri(Vec<[DVector<f64>; 5]>),
}

/// Time samples of an ODE solution with dense output between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    derivatives: Vec<DVector<f64>>,
    interpolation: Interpolation,
}

impl Trajectory {
    pub(crate) fn new(
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        derivatives: Vec<DVector<f64>>,
        interpolation: Interpolation,
    ) -> Self {
        debug_assert_eq!(times.len(), states.len());
        debug_assert_eq!(times.len(), derivatives.len());
        debug_assert!(times.windows(2).all(|w| w[1] > w[0]));
        Self { times, states, derivatives, interpolation }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    /// Right-hand side evaluated at each node.
    pub fn derivatives(&self) -> &[DVector<f64>] {
        &self.derivatives
    }

    pub fn interpolation(&self) -> &Interpolation {
        &self.interpolation
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t1(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("nonempty trajectory")
    }

    fn locate(&self, t: f64) -> Result<(usize, f64, f64), IntegrateError> {
        let (a, b) = (self.t0(), self.t1());
        let slack = 1e-12 * (b - a).abs().max(1.0);
        if !(t >= a - slack && t <= b + slack) {
            return Err(IntegrateError::InvalidArgument(format!("time {t} outside [{a}, {b}]")));
        }
        if self.len() == 1 {
            return Ok((0, 0.0, 0.0));
        }
        let t = t.clamp(a, b);
        let i = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => i.min(self.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.len() - 2),
        };
        let h = self.times[i + 1] - self.times[i];
        Ok((i, (t - self.times[i]) / h, h))
    }

    /// Interpolated state at time `t`.
    pub fn at(&self, t: f64) -> Result<DVector<f64>, IntegrateError> {
        let (i, s, h) = self.locate(t)?;
        if self.len() == 1 {
            return Ok(self.states[0].clone());
        }
        Ok(match &self.interpolation {
            Interpolation::CubicHermite => {
                let (y0, y1) = (&self.states[i], &self.states[i + 1]);
                let (f0, f1) = (&self.derivatives[i], &self.derivatives[i + 1]);
                let s2 = s * s;
                let s3 = s2 * s;
                y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                    + f0 * (h * (s3 - 2.0 * s2 + s))
                    + y1 * (-2.0 * s3 + 3.0 * s2)
                    + f1 * (h * (s3 - s2))
            }
            Interpolation::Dopri(cont) => {
                let c = &cont[i];
                let s1 = 1.0 - s;
                &c[0] + (&c[1] + (&c[2] + (&c[3] + &c[4] * s1) * s) * s1) * s
            }
        })
    }

    /// Time derivative of the interpolant at `t`.
    pub fn derivative_at(&self, t: f64) -> Result<DVector<f64>, IntegrateError> {
        let (i, s, h) = self.locate(t)?;
        if self.len() == 1 {
            return Ok(self.derivatives[0].clone());
        }
        Ok(match &self.interpolation {
            Interpolation::CubicHermite => {
                let (y0, y1) = (&self.states[i], &self.states[i + 1]);
                let (f0, f1) = (&self.derivatives[i], &self.derivatives[i + 1]);
                let s2 = s * s;
                (y1 - y0) * ((6.0 * s - 6.0 * s2) / h) + f0 * (3.0 * s2 - 4.0 * s + 1.0) + f1 * (3.0 * s2 - 2.0 * s)
            }
            Interpolation::Dopri(cont) => {
                let c = &cont[i];
                let s1 = 1.0 - s;
                let a = &c[3] + &c[4] * s1;
                let b = &c[2] + &a * s;
                let cc = &c[1] + &b * s1;
                (cc + (-&b + (&a - &c[4] * s) * s1) * s) / h
            }
        })
    }

    /// States at the requested times.
    pub fn sample(&self, times: &[f64]) -> Result<Vec<DVector<f64>>, IntegrateError> {
        times.iter().map(|&t| self.at(t)).collect()
    }

    /// Trajectory resampled on `count` equispaced times, with derivatives of
    /// the interpolant and cubic Hermite dense output.
    pub fn resample(&self, count: usize) -> Result<Trajectory, IntegrateError> {
        if count < 2 || self.len() == 1 {
            return Ok(Trajectory::new(
                vec![self.t0()],
                vec![self.states[0].clone()],
                vec![self.derivatives[0].clone()],
                Interpolation::CubicHermite,
            ));
        }
        let (a, b) = (self.t0(), self.t1());
        let times: Vec<f64> = (0..count).map(|j| a + (b - a) * j as f64 / (count - 1) as f64).collect();
        let states = self.sample(&times)?;
        let derivatives = times.iter().map(|&t| self.derivative_at(t)).collect::<Result<_, _>>()?;
        Ok(Trajectory::new(times, states, derivatives, Interpolation::CubicHermite))
    }

    /// Midpoints of every step, where interpolant derivatives are not
    /// tautologically equal to the right-hand side.
    pub fn step_midpoints(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}
