//! Free nonholonomic motion `π(∇^G_ċ ċ) = 0` and the test of when it agrees
//! with the normal extremals of the structure.

mod compatibility;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{MetricField, PointGeometry, VectorField};
use crate::integrate::{integrate_adaptive, AdaptiveOptions, OdeProblem, Trajectory};
use crate::linalg;

pub use compatibility::{compatibility_test, Candidate, CandidateKind, CompatibilityReport, CompatibilityVerdict, Lift};

/// Base point and frame coefficients of the velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct NonholonomicState {
    pub x: Vec<f64>,
    pub u: DVector<f64>,
}

/// `w = ∂F[ẋ] u + Γ(ẋ, ẋ)`, the part of `∇^G_ċ ċ` not involving `u̇`.
fn drift_acceleration(p: &PointGeometry, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let v = &p.frame.frame * u;
    let mut w = p.christoffel.contract(&v, &v);
    for (i, d) in p.frame.d_frame.iter().enumerate() {
        w += d * u * v[i];
    }
    (v, w)
}

/// `u̇ = −H⁻¹ Fᵀ G w`, which makes `π(∇^G_ċ ċ)` vanish.
fn quasi_acceleration(p: &PointGeometry, w: &DVector<f64>) -> DVector<f64> {
    -(&p.frame.fibre_inv * (p.frame.frame.transpose() * (&p.metric * w)))
}

/// Sections of the state `(x, u, μ)` used by the joint integrations.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub n: usize,
    pub k: usize,
    pub c: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.n + self.k + self.c
    }

    pub fn x(&self, y: &DVector<f64>) -> Vec<f64> {
        y.rows(0, self.n).iter().copied().collect()
    }

    pub fn u(&self, y: &DVector<f64>) -> DVector<f64> {
        y.rows(self.n, self.k).into_owned()
    }

    pub fn mu(&self, y: &DVector<f64>) -> DVector<f64> {
        y.rows(self.n + self.k, self.c).into_owned()
    }
}

/// Right-hand side of the nonholonomic system, optionally augmented by the
/// transport `μ̇_l = −forcing · G(Π^G(ċ,ċ), Z_l) − Σ_m μ_m dη^m(ċ, Z_l)`.
pub(crate) fn joint_rhs(
    p: &PointGeometry,
    layout: Layout,
    u: &DVector<f64>,
    mu: &DVector<f64>,
    forcing: bool,
) -> DVector<f64> {
    let (v, w) = drift_acceleration(p, u);
    let udot = quasi_acceleration(p, &w);
    let mut out = DVector::zeros(layout.len());
    out.rows_mut(0, layout.n).copy_from(&v);
    out.rows_mut(layout.n, layout.k).copy_from(&udot);
    if layout.c > 0 {
        out.rows_mut(layout.n + layout.k, layout.c).copy_from(&mu_rate(p, &v, &w, &udot, mu, forcing));
    }
    out
}

fn mu_rate(
    p: &PointGeometry,
    v: &DVector<f64>,
    w: &DVector<f64>,
    udot: &DVector<f64>,
    mu: &DVector<f64>,
    forcing: bool,
) -> DVector<f64> {
    let c = p.corank();
    // ∇^G_ċ ċ = w + F u̇; its π⊥ part is Π^G(ċ, ċ)
    let pi_g = p.pi_perp(&(w + &p.frame.frame * udot));
    let flat_pi_g = p.flat(&pi_g);
    let forms: Vec<_> = (0..c).map(|m| p.annihilator_field(m)).collect();
    DVector::from_fn(c, |l, _| {
        let z = p.z.column(l);
        let mut r = if forcing { -flat_pi_g.dot(&z) } else { 0.0 };
        for (m, form) in forms.iter().enumerate() {
            r -= mu[m] * crate::geometry::interior_d(v, form).dot(&z);
        }
        r
    })
}

/// Solution of the nonholonomic system with state `(x, u)`.
#[derive(Debug, Clone)]
pub struct NonholonomicTrajectory {
    n: usize,
    k: usize,
    trajectory: Trajectory,
}

impl NonholonomicTrajectory {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    /// Trajectory with state `(x, u)`.
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn times(&self) -> &[f64] {
        self.trajectory.times()
    }

    pub fn t1(&self) -> f64 {
        self.trajectory.t1()
    }

    fn layout(&self) -> Layout {
        Layout { n: self.n, k: self.k, c: 0 }
    }

    pub fn state_at(&self, t: f64) -> Result<NonholonomicState> {
        let y = self.trajectory.at(t)?;
        Ok(NonholonomicState { x: self.layout().x(&y), u: self.layout().u(&y) })
    }

    pub fn states(&self) -> Vec<NonholonomicState> {
        let l = self.layout();
        self.trajectory.states().iter().map(|y| NonholonomicState { x: l.x(y), u: l.u(y) }).collect()
    }

    pub fn start(&self) -> NonholonomicState {
        let y = &self.trajectory.states()[0];
        NonholonomicState { x: self.layout().x(y), u: self.layout().u(y) }
    }

    /// Largest relative change of the kinetic energy `G(ċ, ċ) = uᵀHu` over the nodes.
    pub fn energy_drift(&self, g: &MetricField<'_>) -> Result<f64> {
        let s = g.structure();
        let energy = |st: &NonholonomicState| -> Result<f64> {
            let v = s.frame_matrix(&st.x)? * &st.u;
            Ok(v.dot(&(g.metric(&st.x)? * &v)))
        };
        let states = self.states();
        let e0 = energy(&states[0])?;
        let mut drift: f64 = 0.0;
        for st in &states {
            drift = drift.max((energy(st)? - e0).abs());
        }
        Ok(drift / e0.max(1e-30))
    }

    /// Largest `|π(∇^G_ċ ċ)|` at step midpoints, with `u̇` taken from the interpolant.
    pub fn constraint_residual(&self, g: &MetricField<'_>) -> Result<f64> {
        let l = self.layout();
        let mut worst: f64 = 0.0;
        for t in self.trajectory.step_midpoints() {
            let y = self.trajectory.at(t)?;
            let dy = self.trajectory.derivative_at(t)?;
            let p = g.at(&l.x(&y))?;
            let (_, w) = drift_acceleration(&p, &l.u(&y));
            let acc = w + &p.frame.frame * l.u(&dy);
            worst = worst.max((&p.pi * acc).norm());
        }
        Ok(worst)
    }
}

pub(crate) fn integrate_joint<'a>(
    g: &'a MetricField<'a>,
    layout: Layout,
    y0: &DVector<f64>,
    duration: f64,
    forcing: bool,
    options: AdaptiveOptions,
) -> Result<Trajectory> {
    let s = g.structure();
    let rhs = move |_t: f64, y: &DVector<f64>| -> std::result::Result<DVector<f64>, String> {
        let x = layout.x(y);
        s.chart().check_point(&x).map_err(|e| e.to_string())?;
        let p = g.at(&x).map_err(|e| e.to_string())?;
        Ok(joint_rhs(&p, layout, &layout.u(y), &layout.mu(y), forcing))
    };
    let problem = OdeProblem::new(layout.len(), rhs);
    Ok(integrate_adaptive(&problem, y0, 0.0, duration, options)?)
}

/// Integrates `ẋ = F u`, `u̇ = −H⁻¹FᵀG(∂F[ẋ]u + Γ(ẋ,ẋ))` over `[0, duration]`.
pub fn nonholonomic_trajectory(
    g: &MetricField<'_>,
    x0: &[f64],
    u0: &DVector<f64>,
    duration: f64,
    options: impl Into<AdaptiveOptions>,
) -> Result<NonholonomicTrajectory> {
    let s = g.structure();
    let (n, k) = (s.dim(), s.rank());
    s.chart().check_point(x0)?;
    if u0.len() != k {
        return Err(Error::Dimension { what: "initial quasi-velocity", expected: k, got: u0.len() });
    }
    if !(duration >= 0.0) {
        return Err(Error::InvalidArgument("duration must be nonnegative".into()));
    }
    let layout = Layout { n, k, c: 0 };
    let mut y0 = DVector::zeros(layout.len());
    y0.rows_mut(0, n).copy_from_slice(x0);
    y0.rows_mut(n, k).copy_from(u0);
    let trajectory = integrate_joint(g, layout, &y0, duration, false, options.into())?;
    Ok(NonholonomicTrajectory { n, k, trajectory })
}

/// `∇^nh_u V = π(∇^G_u V)` for `V = Σ_a v^a X_a` with coefficient expressions `v^a`.
pub fn nh_covariant_derivative(
    g: &MetricField<'_>,
    x: &[f64],
    u: &DVector<f64>,
    coefficients: &[Expr],
) -> Result<DVector<f64>> {
    let field = VectorField::combination(coefficients, g.structure().frame())?;
    g.at(x)?.nh_covariant(u, &field.jet(x)?)
}

/// Covector curve in `Q⁰` along a nonholonomic trajectory, written in the
/// basis `η^m = ♭_G Z_m` with coefficients `μ_m`.
#[derive(Debug, Clone)]
pub struct AnnihilatorTransport {
    layout: Layout,
    forcing: bool,
    trajectory: Trajectory,
}

impl AnnihilatorTransport {
    /// Joint trajectory with state `(x, u, μ)`.
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn times(&self) -> &[f64] {
        self.trajectory.times()
    }

    pub fn coefficients_at(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.layout.mu(&self.trajectory.at(t)?))
    }

    fn eta_from(&self, g: &MetricField<'_>, y: &DVector<f64>) -> Result<(Vec<f64>, DVector<f64>, DVector<f64>)> {
        let x = self.layout.x(y);
        let p = g.at(&x)?;
        let eta = &p.metric * (&p.z * self.layout.mu(y));
        Ok((x, self.layout.u(y), eta))
    }

    /// `(x, u, η)` at time `t`.
    pub fn sample_at(&self, g: &MetricField<'_>, t: f64) -> Result<(Vec<f64>, DVector<f64>, DVector<f64>)> {
        self.eta_from(g, &self.trajectory.at(t)?)
    }

    /// Covector at every node.
    pub fn covectors(&self, g: &MetricField<'_>) -> Result<Vec<DVector<f64>>> {
        self.trajectory.states().iter().map(|y| Ok(self.eta_from(g, y)?.2)).collect()
    }

    /// Largest defect `|∇̃^B_ċ η + ♭_G Π^G(ċ,ċ)|` at step midpoints, built
    /// from the interpolant's `μ̇` and `u̇`.
    pub fn equation_residual(&self, g: &MetricField<'_>) -> Result<f64> {
        let l = self.layout;
        let mut worst: f64 = 0.0;
        for t in self.trajectory.step_midpoints() {
            let y = self.trajectory.at(t)?;
            let dy = self.trajectory.derivative_at(t)?;
            let p = g.at(&l.x(&y))?;
            let (u, mu, mudot) = (l.u(&y), l.mu(&y), l.mu(&dy));
            let (v, w) = drift_acceleration(&p, &u);
            let pi_g = p.pi_perp(&(w + &p.frame.frame * l.u(&dy)));
            let mut lhs = &p.metric * (&p.z * mudot);
            for m in 0..l.c {
                lhs += p.tilde_nabla_b(&v, &p.annihilator_field(m)) * mu[m];
            }
            if self.forcing {
                lhs += p.flat(&pi_g);
            }
            worst = worst.max(lhs.norm());
        }
        Ok(worst)
    }
}

/// Solves `∇̃^B_ċ η = −♭_G Π^G(ċ, ċ)` from `η0 ∈ Q⁰` along the trajectory.
pub fn tilde_nabla_b_transport(
    g: &MetricField<'_>,
    trajectory: &NonholonomicTrajectory,
    eta0: &DVector<f64>,
    options: impl Into<AdaptiveOptions>,
) -> Result<AnnihilatorTransport> {
    transport(g, trajectory, eta0, true, options.into())
}

pub(crate) fn transport(
    g: &MetricField<'_>,
    trajectory: &NonholonomicTrajectory,
    eta0: &DVector<f64>,
    forcing: bool,
    options: AdaptiveOptions,
) -> Result<AnnihilatorTransport> {
    let s = g.structure();
    let (n, k) = (s.dim(), s.rank());
    let start = trajectory.start();
    let p0 = g.at(&start.x)?;
    if eta0.len() != n {
        return Err(Error::Dimension { what: "initial covector", expected: n, got: eta0.len() });
    }
    p0.check_annihilator(eta0)?;
    let layout = Layout { n, k, c: n - k };
    // ⟨η^m, Z_l⟩ = δ_ml, so the coefficients are the pairings with Z
    let mu0 = p0.z.transpose() * eta0;
    let mut y0 = DVector::zeros(layout.len());
    y0.rows_mut(0, n).copy_from_slice(&start.x);
    y0.rows_mut(n, k).copy_from(&start.u);
    y0.rows_mut(n + k, layout.c).copy_from(&mu0);
    let tr = integrate_joint(g, layout, &y0, trajectory.t1(), forcing, options)?;
    for (t, y) in tr.times().iter().zip(tr.states()) {
        let x = layout.x(y);
        let full = full_frame(&g.at(&x)?);
        if linalg::condition_ratio(&linalg::singular_values(&full), n) <= s.rank_tol() {
            return Err(Error::BasisDegeneracy { t: *t });
        }
    }
    Ok(AnnihilatorTransport { layout, forcing, trajectory: tr })
}

fn full_frame(p: &PointGeometry) -> DMatrix<f64> {
    let n = p.dim();
    let k = p.frame.rank();
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (n, k)).copy_from(&p.frame.frame);
    m.view_mut((0, k), (n, n - k)).copy_from(&p.z);
    m
}
