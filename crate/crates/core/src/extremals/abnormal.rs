use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{SubRiemannianStructure, VectorField};
use crate::integrate::{
    flow_with_variational, integrate_adaptive, AdaptiveOptions, OdeProblem, Tolerances, Trajectory, VariationalFlow,
};
use crate::linalg;

/// A candidate annihilator counts as transported into `Q⁰` when its pairing
/// with every frame field stays below this bound.
pub const ABNORMAL_RESIDUAL_TOL: f64 = 1e-7;

/// Singular-value ratios in `[rank_tol, INDETERMINACY_FACTOR · rank_tol]` are
/// too close to the rank threshold to decide.
pub const INDETERMINACY_FACTOR: f64 = 100.0;

pub const DEFAULT_SAMPLES: usize = 32;

/// One piece of a piecewise curve: the integral curve of the generator
/// `Σ_a coefficients[a] · X_a` over `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub coefficients: Vec<Expr>,
    pub t0: f64,
    pub t1: f64,
}

impl Segment {
    pub fn new(coefficients: Vec<Expr>, t0: f64, t1: f64) -> Self {
        Self { coefficients, t0, t1 }
    }

    /// Segment along the frame field `X_a` of a rank-`k` structure.
    pub fn frame_field(k: usize, a: usize, t0: f64, t1: f64) -> Self {
        let coefficients = (0..k).map(|b| Expr::constant(if a == b { 1.0 } else { 0.0 })).collect();
        Self { coefficients, t0, t1 }
    }

    /// The generator as a vector field tangent to the distribution.
    pub fn generator(&self, s: &SubRiemannianStructure) -> Result<VectorField> {
        if self.coefficients.len() != s.rank() {
            return Err(Error::Dimension {
                what: "segment coefficients",
                expected: s.rank(),
                got: self.coefficients.len(),
            });
        }
        VectorField::combination(&self.coefficients, s.frame())
    }
}

/// A start point and a chain of abutting segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCurveSpec {
    pub start: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl PiecewiseCurveSpec {
    pub fn new(start: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        let spec = Self { start, segments };
        spec.validate()?;
        Ok(spec)
    }

    pub fn single(start: Vec<f64>, segment: Segment) -> Result<Self> {
        Self::new(start, vec![segment])
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidArgument("curve has no segments".into()));
        }
        for seg in &self.segments {
            if !(seg.t1 >= seg.t0) || !seg.t0.is_finite() || !seg.t1.is_finite() {
                return Err(Error::InvalidArgument(format!("segment interval [{}, {}] is invalid", seg.t0, seg.t1)));
            }
        }
        for w in self.segments.windows(2) {
            let gap = (w[1].t0 - w[0].t1).abs();
            if gap > 1e-12 * w[0].t1.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "segments do not abut: {} then {}",
                    w[0].t1, w[1].t0
                )));
            }
        }
        Ok(())
    }

    pub fn t0(&self) -> f64 {
        self.segments[0].t0
    }

    pub fn t1(&self) -> f64 {
        self.segments.last().expect("validated").t1
    }

    /// Integrates every segment with its flow Jacobian.
    pub fn flow(&self, s: &SubRiemannianStructure, options: impl Into<AdaptiveOptions>) -> Result<PiecewiseFlow> {
        self.validate()?;
        let options = options.into();
        s.chart().check_point(&self.start)?;
        let mut x = self.start.clone();
        let mut segments = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let generator = seg.generator(s)?;
            let flow = flow_with_variational(&generator, &x, seg.t0, seg.t1, options)?;
            x = flow.end_state().0;
            s.chart().check_point(&x)?;
            segments.push(SegmentFlow { generator, start: flow.point_at(seg.t0)?, flow });
        }
        Ok(PiecewiseFlow { segments })
    }
}

/// Integrated segment: generator, start point and variational flow.
#[derive(Debug, Clone)]
pub struct SegmentFlow {
    pub generator: VectorField,
    pub start: Vec<f64>,
    pub flow: VariationalFlow,
}

impl SegmentFlow {
    pub fn t0(&self) -> f64 {
        self.flow.t0()
    }

    pub fn t1(&self) -> f64 {
        self.flow.t1()
    }

    /// `V(Y, τ, δt) = J(b) K(τ) δt (Y − X)(c(τ))`, a tangent vector at `c(b)`.
    pub fn variation_vector(&self, y: &VectorField, tau: f64, dt: f64) -> Result<DVector<f64>> {
        if !(tau >= self.t0() - 1e-12 && tau <= self.t1() + 1e-12) {
            return Err(Error::InvalidArgument(format!("τ = {tau} outside the segment")));
        }
        if !(dt >= 0.0) {
            return Err(Error::InvalidArgument("δt must be nonnegative".into()));
        }
        let (x, _, k) = self.flow.state_at(tau)?;
        let (_, jb, _) = self.flow.end_state();
        let diff = (y.eval(&x)? - self.generator.eval(&x)?) * dt;
        Ok(jb * (k * diff))
    }
}

/// Variational flows of all segments of a piecewise curve.
#[derive(Debug, Clone)]
pub struct PiecewiseFlow {
    pub segments: Vec<SegmentFlow>,
}

impl PiecewiseFlow {
    /// Point of the curve at time `t`.
    pub fn point_at(&self, t: f64) -> Result<Vec<f64>> {
        for seg in &self.segments {
            if t <= seg.t1() {
                return Ok(seg.flow.point_at(t.max(seg.t0()))?);
            }
        }
        Ok(self.segments.last().expect("nonempty").flow.end_state().0)
    }

    pub fn end_point(&self) -> Vec<f64> {
        self.segments.last().expect("nonempty").flow.end_state().0
    }
}

/// Chebyshev–Lobatto times on `[a, b]`, clustered at the ends.
pub fn chebyshev_times(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count)
        .map(|j| {
            if j == 0 {
                a
            } else if j == count - 1 {
                b
            } else {
                let c = (std::f64::consts::PI * j as f64 / (count - 1) as f64).cos();
                a + (b - a) * 0.5 * (1.0 - c)
            }
        })
        .collect()
}

fn pullback_from_flow(s: &SubRiemannianStructure, flow: &PiecewiseFlow, samples: usize) -> Result<DMatrix<f64>> {
    let n = s.dim();
    let k = s.rank();
    let mut columns = Vec::with_capacity(k * samples * flow.segments.len());
    let mut acc = DMatrix::<f64>::identity(n, n);
    for seg in &flow.segments {
        for t in chebyshev_times(seg.t0(), seg.t1(), samples) {
            let (x, _, kt) = seg.flow.state_at(t)?;
            let back = &acc * kt;
            let f = s.frame_matrix(&x)?;
            for a in 0..k {
                columns.push(&back * f.column(a));
            }
        }
        acc = &acc * seg.flow.end_state().2;
    }
    Ok(DMatrix::from_columns(&columns))
}

/// Matrix whose columns are the frame fields along the curve pulled back to
/// its start point, at Chebyshev times on every segment.
pub fn pullback_span(
    s: &SubRiemannianStructure,
    spec: &PiecewiseCurveSpec,
    samples_per_segment: usize,
    tolerances: Tolerances,
) -> Result<DMatrix<f64>> {
    if samples_per_segment < 2 {
        return Err(Error::InvalidArgument("at least two samples per segment are needed".into()));
    }
    let flow = spec.flow(s, tolerances)?;
    pullback_from_flow(s, &flow, samples_per_segment)
}

/// Point-and-covector curve of a coadjoint transport.
#[derive(Debug, Clone)]
pub struct CovectorCurve {
    dim: usize,
    trajectory: Trajectory,
}

impl CovectorCurve {
    /// Trajectory with state `(x, η)`.
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn point_at(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.trajectory.at(t)?.rows(0, self.dim).iter().copied().collect())
    }

    pub fn covector_at(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.trajectory.at(t)?.rows(self.dim, self.dim).into_owned())
    }

    pub fn end_covector(&self) -> DVector<f64> {
        self.trajectory.last().rows(self.dim, self.dim).into_owned()
    }
}

/// Solves `ċ = X(c)`, `η̇ = −DX(c)ᵀ η` over one segment from `start`.
pub fn coadjoint_transport(
    s: &SubRiemannianStructure,
    segment: &Segment,
    start: &[f64],
    eta0: &DVector<f64>,
    tolerances: Tolerances,
) -> Result<CovectorCurve> {
    let field = segment.generator(s)?;
    transport_along(&field, start, segment.t0, segment.t1, eta0, tolerances)
}

fn transport_along(
    field: &VectorField,
    start: &[f64],
    t0: f64,
    t1: f64,
    eta0: &DVector<f64>,
    tolerances: Tolerances,
) -> Result<CovectorCurve> {
    let n = field.dim();
    if start.len() != n || eta0.len() != n {
        return Err(Error::Dimension { what: "transport initial data", expected: n, got: eta0.len() });
    }
    let rhs = move |_t: f64, y: &DVector<f64>| -> std::result::Result<DVector<f64>, String> {
        let x = y.rows(0, n);
        let eta = y.rows(n, n);
        let v = field.eval(x.as_slice()).map_err(|e| e.to_string())?;
        let dx = field.jacobian(x.as_slice()).map_err(|e| e.to_string())?;
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n).copy_from(&(-(dx.transpose() * eta)));
        Ok(out)
    };
    let problem = OdeProblem::new(2 * n, rhs);
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from_slice(start);
    y0.rows_mut(n, n).copy_from(eta0);
    let trajectory = integrate_adaptive(&problem, &y0, t0, t1, tolerances)?;
    Ok(CovectorCurve { dim: n, trajectory })
}

/// Outcome of the abnormality test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Abnormal,
    NotAbnormal,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Abnormal => "abnormal",
            Verdict::NotAbnormal => "not_abnormal",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

/// Rank certificate for abnormality of a piecewise curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AbnormalCertificate {
    /// `n × m` matrix of pulled-back frame fields.
    pub pullback: DMatrix<f64>,
    /// Descending singular values, padded with zeros to length `n`.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub rank_tol: f64,
    /// Orthonormal basis of the annihilator of the pulled-back span at the start point.
    pub annihilator: Vec<DVector<f64>>,
    /// Times at which transported candidates were checked.
    pub profile_times: Vec<f64>,
    /// `profiles[i][j] = max_a |⟨η_i(t_j), X_a(c(t_j))⟩|`.
    pub profiles: Vec<Vec<f64>>,
    /// Per-candidate maximum of its profile.
    pub transport_residuals: Vec<f64>,
    pub verdict: Verdict,
    pub advice: Option<String>,
}

impl AbnormalCertificate {
    /// Smallest per-candidate transport residual, if any candidate exists.
    pub fn residual_max(&self) -> Option<f64> {
        self.transport_residuals.iter().copied().reduce(f64::min)
    }

    /// `σ_min / σ_max`.
    pub fn sigma_ratio(&self) -> f64 {
        linalg::condition_ratio(&self.singular_values, self.singular_values.len())
    }
}

/// Decides abnormality by the rank of the pulled-back span, double-checked by
/// transporting each annihilator candidate along the whole curve.
pub fn abnormal_test(
    s: &SubRiemannianStructure,
    spec: &PiecewiseCurveSpec,
    samples_per_segment: usize,
    rank_tol: f64,
    tolerances: Tolerances,
) -> Result<AbnormalCertificate> {
    if samples_per_segment < 2 {
        return Err(Error::InvalidArgument("at least two samples per segment are needed".into()));
    }
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::InvalidArgument("rank tolerance must lie in (0, 1)".into()));
    }
    let n = s.dim();
    let flow = spec.flow(s, tolerances)?;
    let pullback = pullback_from_flow(s, &flow, samples_per_segment)?;
    let (u, singular_values) = linalg::left_svd(&pullback);
    let rank = linalg::numerical_rank(&singular_values, rank_tol);
    let annihilator: Vec<DVector<f64>> =
        (rank..n).map(|j| linalg::canonical_sign(u.column(j).into_owned())).collect();

    let mut profile_times = Vec::new();
    for seg in &flow.segments {
        let ts = chebyshev_times(seg.t0(), seg.t1(), samples_per_segment);
        let skip = usize::from(!profile_times.is_empty());
        profile_times.extend(ts.into_iter().skip(skip));
    }
    let mut profiles = Vec::with_capacity(annihilator.len());
    for eta0 in &annihilator {
        let mut profile = Vec::with_capacity(profile_times.len());
        let mut eta = eta0.clone();
        for (i, seg) in flow.segments.iter().enumerate() {
            let curve = transport_along(&seg.generator, &seg.start, seg.t0(), seg.t1(), &eta, tolerances)?;
            let skip = usize::from(i > 0);
            for t in chebyshev_times(seg.t0(), seg.t1(), samples_per_segment).into_iter().skip(skip) {
                let x = curve.point_at(t)?;
                let e = curve.covector_at(t)?;
                let f = s.frame_matrix(&x)?;
                profile.push((f.transpose() * e).amax());
            }
            eta = curve.end_covector();
        }
        profiles.push(profile);
    }
    let transport_residuals: Vec<f64> = profiles.iter().map(|p| p.iter().copied().fold(0.0, f64::max)).collect();

    let max = singular_values[0];
    let near_threshold = max > 0.0
        && singular_values.iter().any(|&sv| {
            let r = sv / max;
            r >= rank_tol && r <= INDETERMINACY_FACTOR * rank_tol
        });
    let witnessed = transport_residuals.iter().any(|&r| r <= ABNORMAL_RESIDUAL_TOL);
    let (verdict, advice) = if near_threshold {
        (Verdict::Indeterminate, Some("singular value inside the indeterminacy band; raise the sample count".into()))
    } else if rank < n && witnessed {
        (Verdict::Abnormal, None)
    } else if rank < n {
        (
            Verdict::Indeterminate,
            Some("rank deficient but no annihilator survives transport; raise the sample count".into()),
        )
    } else {
        (Verdict::NotAbnormal, None)
    };
    Ok(AbnormalCertificate {
        pullback,
        singular_values,
        rank,
        rank_tol,
        annihilator,
        profile_times,
        profiles,
        transport_residuals,
        verdict,
        advice,
    })
}

/// Variation vector `V(Y, τ, δt)` at the end of a single segment from `start`.
pub fn variation_vector(
    s: &SubRiemannianStructure,
    start: &[f64],
    segment: &Segment,
    y: &VectorField,
    tau: f64,
    dt: f64,
    tolerances: Tolerances,
) -> Result<DVector<f64>> {
    let spec = PiecewiseCurveSpec::single(start.to_vec(), segment.clone())?;
    let flow = spec.flow(s, tolerances)?;
    flow.segments[0].variation_vector(y, tau, dt)
}
