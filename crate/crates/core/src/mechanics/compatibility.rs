use nalgebra::{DMatrix, DVector};

use super::{transport, AnnihilatorTransport, NonholonomicTrajectory};
use crate::error::Result;
use crate::extremals::normal_residuals;
use crate::geometry::MetricField;
use crate::integrate::AdaptiveOptions;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    /// Transport of `η₀ = 0` under the full affine equation.
    Particular,
    /// Transport of the `i`-th basis element of the initial annihilator.
    Basis(usize),
    /// Least-squares combination of the affine family.
    LeastSquares,
}

/// One transported covector curve and its constraint defects.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub eta0: DVector<f64>,
    pub times: Vec<f64>,
    pub covectors: Vec<DVector<f64>>,
    /// `|Π^B(ċ(t), η(t))|` at each time.
    pub pi_b_profile: Vec<f64>,
    /// `max_{t,a} |⟨η(t), X_a⟩|`.
    pub q_defect: f64,
    /// `max_{t,a} |⟨η(t), [X̃, X_a]⟩|` with `X̃` the frozen extension of `ċ(t)`.
    pub bracket_defect: f64,
    /// Defect of the transport equation at step midpoints.
    pub equation_residual: f64,
    transport: AnnihilatorTransport,
}

impl Candidate {
    /// Largest of all defects.
    pub fn worst(&self) -> f64 {
        self.pi_b_profile.iter().copied().fold(self.q_defect.max(self.bracket_defect), f64::max)
    }

    pub fn transport(&self) -> &AnnihilatorTransport {
        &self.transport
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompatibilityVerdict {
    Compatible,
    Incompatible,
}

impl CompatibilityVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            CompatibilityVerdict::Compatible => "compatible",
            CompatibilityVerdict::Incompatible => "incompatible",
        }
    }
}

/// Cotangent lift `α = ♭_G ċ + η` of a compatible trajectory.
#[derive(Debug, Clone)]
pub struct Lift {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub covectors: Vec<DVector<f64>>,
    /// `max |ẋ − ḡα|`.
    pub admissibility_residual: f64,
    /// `max |α̇ + ½ ∂ḡ(α, α)|`.
    pub auto_parallel_residual: f64,
}

#[derive(Debug, Clone)]
pub struct CompatibilityReport {
    /// Basis of `(Q + [ċ, Q])⁰` at the start point.
    pub initial_annihilator: Vec<DVector<f64>>,
    /// The initial annihilator is the zero space, so `η₀ = 0` is forced.
    pub vacuous_annihilator: bool,
    /// `max_t |Π^G(ċ, ċ)|` along the trajectory.
    pub pi_g_max: f64,
    pub candidates: Vec<Candidate>,
    /// Index of the candidate with the smallest worst defect.
    pub best: usize,
    pub tolerance: f64,
    pub verdict: CompatibilityVerdict,
    pub lift: Option<Lift>,
}

impl CompatibilityReport {
    pub fn best_candidate(&self) -> &Candidate {
        &self.candidates[self.best]
    }
}

fn evaluate(
    g: &MetricField<'_>,
    kind: CandidateKind,
    eta0: DVector<f64>,
    tr: AnnihilatorTransport,
) -> Result<Candidate> {
    let mut times = Vec::new();
    let mut covectors = Vec::new();
    let mut pi_b_profile = Vec::new();
    let mut q_defect: f64 = 0.0;
    let mut bracket_defect: f64 = 0.0;
    for &t in tr.times() {
        let (x, u, eta) = tr.sample_at(g, t)?;
        let p = g.at(&x)?;
        q_defect = q_defect.max((p.frame.frame.transpose() * &eta).amax());
        for b in p.frozen_brackets(&u) {
            bracket_defect = bracket_defect.max(eta.dot(&b).abs());
        }
        pi_b_profile.push(p.pi_b_unchecked(&u, &eta).norm());
        times.push(t);
        covectors.push(eta);
    }
    let equation_residual = tr.equation_residual(g)?;
    Ok(Candidate { kind, eta0, times, covectors, pi_b_profile, q_defect, bracket_defect, equation_residual, transport: tr })
}

/// Pairings `⟨η(t), [X̃, X_a]⟩` stacked over the grid.
fn bracket_pairings(g: &MetricField<'_>, tr: &AnnihilatorTransport, grid: &[f64]) -> Result<DVector<f64>> {
    let mut out = Vec::new();
    for &t in grid {
        let (x, u, eta) = tr.sample_at(g, t)?;
        let p = g.at(&x)?;
        out.extend(p.frozen_brackets(&u).iter().map(|b| eta.dot(b)));
    }
    Ok(DVector::from_vec(out))
}

fn lift_of(g: &MetricField<'_>, tr: &AnnihilatorTransport) -> Result<Lift> {
    let s = g.structure();
    let n = s.dim();
    let k = s.rank();
    let traj = tr.trajectory();
    let mut lift = Lift {
        times: Vec::new(),
        points: Vec::new(),
        covectors: Vec::new(),
        admissibility_residual: 0.0,
        auto_parallel_residual: 0.0,
    };
    type Sample = (Vec<f64>, DVector<f64>, DVector<f64>, DVector<f64>);
    let alpha_and_rate = |t: f64| -> Result<Sample> {
        let y = traj.at(t)?;
        let dy = traj.derivative_at(t)?;
        let x: Vec<f64> = y.rows(0, n).iter().copied().collect();
        let u = y.rows(n, k).into_owned();
        let mu = y.rows(n + k, n - k).into_owned();
        let xdot = dy.rows(0, n).into_owned();
        let udot = dy.rows(n, k).into_owned();
        let mudot = dy.rows(n + k, n - k).into_owned();
        let p = g.at(&x)?;
        let f = &p.frame.frame;
        let alpha = &p.metric * (f * &u + &p.z * &mu);
        let mut rate = &p.metric * (f * &udot + &p.z * &mudot);
        for i in 0..n {
            let dfu = &p.frame.d_frame[i] * &u + &p.d_z[i] * &mu;
            let fu = f * &u + &p.z * &mu;
            rate += (&p.d_metric[i] * fu + &p.metric * dfu) * xdot[i];
        }
        Ok((x, alpha, xdot, rate))
    };
    let mut check = traj.step_midpoints();
    check.extend_from_slice(traj.times());
    for t in check {
        let (x, alpha, xdot, rate) = alpha_and_rate(t)?;
        let (adm, dynamics) = normal_residuals(s, &x, &alpha, &xdot, &rate)?;
        lift.admissibility_residual = lift.admissibility_residual.max(adm);
        lift.auto_parallel_residual = lift.auto_parallel_residual.max(dynamics);
    }
    for &t in traj.times() {
        let (x, alpha, _, _) = alpha_and_rate(t)?;
        lift.times.push(t);
        lift.points.push(x);
        lift.covectors.push(alpha);
    }
    Ok(lift)
}

/// Searches the affine family of solutions of `∇̃^B_ċ η = −♭_G Π^G(ċ, ċ)`
/// starting in `(Q + [ċ, Q])⁰` for one that stays in that annihilator.
pub fn compatibility_test(
    g: &MetricField<'_>,
    trajectory: &NonholonomicTrajectory,
    tol: f64,
    options: impl Into<AdaptiveOptions>,
) -> Result<CompatibilityReport> {
    let options = options.into();
    let s = g.structure();
    let n = s.dim();
    let start = trajectory.start();
    let p0 = g.at(&start.x)?;
    let mut cols: Vec<DVector<f64>> = p0.frame.frame.column_iter().map(|c| c.into_owned()).collect();
    cols.extend(p0.frozen_brackets(&start.u));
    let span = DMatrix::from_columns(&cols);
    let initial_annihilator = linalg::left_null_space(&span, s.rank_tol());
    let vacuous_annihilator = initial_annihilator.is_empty();

    let mut pi_g_max: f64 = 0.0;
    for st in trajectory.states() {
        let p = g.at(&st.x)?;
        let v = &p.frame.frame * &st.u;
        pi_g_max = pi_g_max.max(p.pi_g(&v, &v)?.norm());
    }

    let zero = DVector::zeros(n);
    let particular = transport(g, trajectory, &zero, true, options)?;
    let mut homogeneous = Vec::with_capacity(initial_annihilator.len());
    for xi in &initial_annihilator {
        homogeneous.push(transport(g, trajectory, xi, false, options)?);
    }
    let grid = trajectory.times().to_vec();
    let mut candidates = Vec::new();
    if !initial_annihilator.is_empty() {
        let b = bracket_pairings(g, &particular, &grid)?;
        let a_cols = homogeneous.iter().map(|h| bracket_pairings(g, h, &grid)).collect::<Result<Vec<_>>>()?;
        let a = DMatrix::from_columns(&a_cols);
        let coeffs = a
            .svd(true, true)
            .solve(&(-b), 1e-12)
            .unwrap_or_else(|_| DVector::zeros(initial_annihilator.len()));
        let eta0 = initial_annihilator.iter().zip(coeffs.iter()).fold(zero.clone(), |acc, (xi, c)| acc + xi * *c);
        let tr = transport(g, trajectory, &eta0, true, options)?;
        candidates.push(evaluate(g, CandidateKind::LeastSquares, eta0, tr)?);
        for (i, xi) in initial_annihilator.iter().enumerate() {
            let tr = transport(g, trajectory, xi, true, options)?;
            candidates.push(evaluate(g, CandidateKind::Basis(i), xi.clone(), tr)?);
        }
    }
    candidates.insert(0, evaluate(g, CandidateKind::Particular, zero, particular)?);

    let best = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.worst().total_cmp(&b.1.worst()))
        .map(|(i, _)| i)
        .expect("at least the particular candidate");
    let verdict = if candidates[best].worst() <= tol {
        CompatibilityVerdict::Compatible
    } else {
        CompatibilityVerdict::Incompatible
    };
    let lift = match verdict {
        CompatibilityVerdict::Compatible => Some(lift_of(g, &candidates[best].transport)?),
        CompatibilityVerdict::Incompatible => None,
    };
    Ok(CompatibilityReport {
        initial_annihilator,
        vacuous_annihilator,
        pi_g_max,
        candidates,
        best,
        tolerance: tol,
        verdict,
        lift,
    })
}
