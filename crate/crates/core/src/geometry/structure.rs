use nalgebra::{DMatrix, DVector};

use super::fields::{lie_derivative_covector, Jet, VectorField};
use crate::error::{Error, Result};
use crate::expr::{Chart, Expr};
use crate::linalg::{self, DEFAULT_RANK_TOL};

/// Number of quasi-random probe points used for construction-time checks.
pub const DEFAULT_PROBE_COUNT: usize = 64;

/// A sub-Riemannian structure given by a chart, a frame of the distribution
/// and a fibre metric on it.
#[derive(Debug, Clone)]
pub struct SubRiemannianStructure {
    chart: Chart,
    frame: Vec<VectorField>,
    fibre_metric: Option<Vec<Vec<Expr>>>,
    complement: Option<Vec<VectorField>>,
    anchor: Vec<f64>,
    probes: Vec<Vec<f64>>,
    rank_tol: f64,
    // frame_brackets[a][b] = [X_a, X_b]
    frame_brackets: Vec<Vec<VectorField>>,
}

pub struct StructureBuilder {
    chart: Chart,
    frame: Vec<VectorField>,
    fibre_metric: Option<Vec<Vec<Expr>>>,
    complement: Option<Vec<VectorField>>,
    anchor: Option<Vec<f64>>,
    probes: Option<Vec<Vec<f64>>>,
    probe_box: Option<Vec<(f64, f64)>>,
    rank_tol: f64,
}

impl StructureBuilder {
    /// Fibre metric `H_ab = h(X_a, X_b)`; identity when not given.
    pub fn fibre_metric(mut self, h: Vec<Vec<Expr>>) -> Self {
        self.fibre_metric = Some(h);
        self
    }

    pub fn complement(mut self, z: Vec<VectorField>) -> Self {
        self.complement = Some(z);
        self
    }

    /// Point where the complement is auto-completed.
    pub fn anchor(mut self, x: Vec<f64>) -> Self {
        self.anchor = Some(x);
        self
    }

    pub fn probes(mut self, points: Vec<Vec<f64>>) -> Self {
        self.probes = Some(points);
        self
    }

    /// Box from which the default quasi-random probes are drawn.
    pub fn probe_box(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.probe_box = Some(bounds);
        self
    }

    pub fn rank_tol(mut self, tol: f64) -> Self {
        self.rank_tol = tol;
        self
    }

    pub fn build(self) -> Result<SubRiemannianStructure> {
        let n = self.chart.dim();
        let k = self.frame.len();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("frame has {k} fields in dimension {n}")));
        }
        for x in &self.frame {
            if x.dim() != n {
                return Err(Error::Dimension { what: "frame field", expected: n, got: x.dim() });
            }
        }
        if let Some(h) = &self.fibre_metric {
            if h.len() != k || h.iter().any(|row| row.len() != k) {
                return Err(Error::Dimension { what: "fibre metric rows", expected: k, got: h.len() });
            }
        }
        if let Some(z) = &self.complement {
            if z.len() != n - k {
                return Err(Error::Dimension { what: "complement fields", expected: n - k, got: z.len() });
            }
            if z.iter().any(|f| f.dim() != n) {
                return Err(Error::Dimension { what: "complement field", expected: n, got: 0 });
            }
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidArgument("rank tolerance must lie in (0, 1)".into()));
        }
        let probe_box = match self.probe_box {
            Some(b) => {
                if b.len() != n || b.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                    return Err(Error::InvalidArgument("probe box must be finite and nonempty".into()));
                }
                b
            }
            None => default_probe_box(&self.chart),
        };
        let probes = match self.probes {
            Some(p) => p,
            None => halton_points(&probe_box, DEFAULT_PROBE_COUNT),
        };
        if probes.is_empty() {
            return Err(Error::InvalidArgument("probe set is empty".into()));
        }
        for p in &probes {
            self.chart.check_point(p)?;
        }
        let anchor = match self.anchor {
            Some(a) => a,
            None => probe_box.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect(),
        };
        self.chart.check_point(&anchor)?;

        let mut frame_brackets = Vec::with_capacity(k);
        for a in &self.frame {
            let row = self.frame.iter().map(|b| a.bracket(b)).collect::<Result<Vec<_>>>()?;
            frame_brackets.push(row);
        }
        let s = SubRiemannianStructure {
            chart: self.chart,
            frame: self.frame,
            fibre_metric: self.fibre_metric,
            complement: self.complement,
            anchor,
            probes,
            rank_tol: self.rank_tol,
            frame_brackets,
        };
        for p in &s.probes {
            s.check_regular(p)?;
        }
        Ok(s)
    }
}

fn default_probe_box(chart: &Chart) -> Vec<(f64, f64)> {
    chart
        .domain()
        .iter()
        .map(|&(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo, hi),
            (true, false) => (lo, lo + 2.0),
            (false, true) => (hi - 2.0, hi),
            (false, false) => (-1.0, 1.0),
        })
        .collect()
}

fn radical_inverse(mut index: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut result = 0.0;
    let mut f = inv;
    while index > 0 {
        result += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    inv = result;
    inv
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Halton points strictly inside `bounds`.
pub fn halton_points(bounds: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    assert!(bounds.len() <= PRIMES.len(), "halton sequence supports up to 12 dimensions");
    (1..=count)
        .map(|i| {
            bounds
                .iter()
                .zip(PRIMES)
                .map(|(&(lo, hi), base)| lo + (hi - lo) * radical_inverse(i, base))
                .collect()
        })
        .collect()
}

/// Frame data of the structure at one point, with exact first derivatives.
#[derive(Debug, Clone)]
pub struct FrameJet {
    pub point: Vec<f64>,
    /// `n × k` matrix whose columns are the frame fields.
    pub frame: DMatrix<f64>,
    pub d_frame: Vec<DMatrix<f64>>,
    pub fibre: DMatrix<f64>,
    pub fibre_inv: DMatrix<f64>,
    pub d_fibre_inv: Vec<DMatrix<f64>>,
    /// `ḡ = F H⁻¹ Fᵀ`.
    pub cometric: DMatrix<f64>,
    pub d_cometric: Vec<DMatrix<f64>>,
}

impl FrameJet {
    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn rank(&self) -> usize {
        self.frame.ncols()
    }

    /// `g(p) = ḡ p`.
    pub fn sharp_g(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.cometric * p
    }

    /// Jet of the vector field `g(α)` for a covector field jet `α`.
    pub fn g_jet(&self, alpha: &Jet) -> Jet {
        alpha.left_multiplied(&self.cometric, &self.d_cometric)
    }

    /// Jet of the frame field `X_a`.
    pub fn frame_field(&self, a: usize) -> Jet {
        let n = self.dim();
        let mut jacobian = DMatrix::zeros(n, n);
        for i in 0..n {
            jacobian.set_column(i, &self.d_frame[i].column(a));
        }
        Jet::new(self.frame.column(a).into_owned(), jacobian)
    }

    /// Jet of `Σ_a c^a X_a` with constant coefficients.
    pub fn frozen_field(&self, coefficients: &DVector<f64>) -> Jet {
        let n = self.dim();
        let mut jacobian = DMatrix::zeros(n, n);
        for i in 0..n {
            jacobian.set_column(i, &(&self.d_frame[i] * coefficients));
        }
        Jet::new(&self.frame * coefficients, jacobian)
    }

    /// Value of `ḡ(α, β)` as a scalar jet gradient `d(ḡ(α,β))`.
    pub fn d_pairing(&self, alpha: &Jet, beta: &Jet) -> DVector<f64> {
        let n = self.dim();
        let ga = &self.cometric * &alpha.value;
        let gb = &self.cometric * &beta.value;
        DVector::from_fn(n, |k, _| {
            alpha.partial(k).dot(&gb)
                + alpha.value.dot(&(&self.d_cometric[k] * &beta.value))
                + ga.dot(&beta.partial(k))
        })
    }

    /// Symmetric bracket `{α,β} = L_{g(α)}β + L_{g(β)}α − d(ḡ(α,β))`.
    pub fn symmetric_bracket(&self, alpha: &Jet, beta: &Jet) -> DVector<f64> {
        let ga = self.g_jet(alpha);
        let gb = self.g_jet(beta);
        lie_derivative_covector(&ga, beta) + lie_derivative_covector(&gb, alpha) - self.d_pairing(alpha, beta)
    }
}

impl SubRiemannianStructure {
    pub fn builder(chart: Chart, frame: Vec<VectorField>) -> StructureBuilder {
        StructureBuilder {
            chart,
            frame,
            fibre_metric: None,
            complement: None,
            anchor: None,
            probes: None,
            probe_box: None,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    /// Structure with identity fibre metric and default probes.
    pub fn new(chart: Chart, frame: Vec<VectorField>) -> Result<Self> {
        Self::builder(chart, frame).build()
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn rank(&self) -> usize {
        self.frame.len()
    }

    pub fn frame(&self) -> &[VectorField] {
        &self.frame
    }

    pub fn fibre_metric(&self) -> Option<&[Vec<Expr>]> {
        self.fibre_metric.as_deref()
    }

    pub fn complement(&self) -> Option<&[VectorField]> {
        self.complement.as_deref()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `[X_a, X_b]` as a field.
    pub fn frame_bracket(&self, a: usize, b: usize) -> &VectorField {
        &self.frame_brackets[a][b]
    }

    fn check_regular(&self, x: &[f64]) -> Result<()> {
        let f = self.frame_matrix(x)?;
        let sigma = linalg::singular_values(&f);
        let ratio = linalg::condition_ratio(&sigma, self.rank());
        if !(ratio > self.rank_tol) {
            return Err(Error::RankDeficient { point: x.to_vec(), ratio });
        }
        let h = self.fibre_matrix(x)?;
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-12 * h.amax().max(1.0) || h.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite { point: x.to_vec() });
        }
        if let Some(z) = &self.complement {
            let full = full_frame(&f, z, x)?;
            let sigma = linalg::singular_values(&full);
            if !(linalg::condition_ratio(&sigma, self.dim()) > self.rank_tol) {
                return Err(Error::CompletionFailure { point: x.to_vec() });
            }
        }
        Ok(())
    }

    pub fn frame_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut f = DMatrix::zeros(n, self.rank());
        for (a, field) in self.frame.iter().enumerate() {
            f.set_column(a, &field.eval(x)?);
        }
        Ok(f)
    }

    fn fibre_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.rank();
        match &self.fibre_metric {
            None => Ok(DMatrix::identity(k, k)),
            Some(h) => {
                let mut m = DMatrix::zeros(k, k);
                for a in 0..k {
                    for b in 0..k {
                        m[(a, b)] = h[a][b].eval(x)?;
                    }
                }
                Ok(m)
            }
        }
    }

    /// Frame, fibre metric and cometric at `x` with first derivatives.
    pub fn frame_jet(&self, x: &[f64]) -> Result<FrameJet> {
        let n = self.dim();
        let k = self.rank();
        if x.len() != n {
            return Err(Error::Dimension { what: "point", expected: n, got: x.len() });
        }
        let frame = self.frame_matrix(x)?;
        let mut d_frame = vec![DMatrix::zeros(n, k); n];
        for (a, field) in self.frame.iter().enumerate() {
            let j = field.jacobian(x)?;
            for (i, d) in d_frame.iter_mut().enumerate() {
                d.set_column(a, &j.column(i));
            }
        }
        let fibre = self.fibre_matrix(x)?;
        let fibre_inv = fibre
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite { point: x.to_vec() })?
            .inverse();
        let d_fibre_inv = match &self.fibre_metric {
            None => vec![DMatrix::zeros(k, k); n],
            Some(h) => (0..n)
                .map(|i| {
                    let mut dh = DMatrix::zeros(k, k);
                    for a in 0..k {
                        for b in 0..k {
                            dh[(a, b)] = h[a][b].derivative(i).eval(x)?;
                        }
                    }
                    Ok(-(&fibre_inv * dh * &fibre_inv))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let cometric = &frame * &fibre_inv * frame.transpose();
        let d_cometric = (0..n)
            .map(|i| {
                let a = &d_frame[i] * &fibre_inv * frame.transpose();
                let b = &frame * &d_fibre_inv[i] * frame.transpose();
                &a + a.transpose() + b
            })
            .collect();
        Ok(FrameJet { point: x.to_vec(), frame, d_frame, fibre, fibre_inv, d_fibre_inv, cometric, d_cometric })
    }

    /// `ḡ(x) = F H⁻¹ Fᵀ`.
    pub fn cometric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.frame_jet(x)?.cometric)
    }

    pub fn sharp_g(&self, x: &[f64], p: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.cometric(x)? * p)
    }

    /// `{α,β}` at `x` for two covector-field jets.
    pub fn symmetric_bracket(&self, alpha: &Jet, beta: &Jet, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.frame_jet(x)?.symmetric_bracket(alpha, beta))
    }

    /// Frame coefficients `u` with `v = F u`, and the residual `|v − F u|`.
    pub fn frame_coefficients(&self, x: &[f64], v: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let f = self.frame_matrix(x)?;
        let ftf = f.transpose() * &f;
        let u = ftf
            .cholesky()
            .ok_or_else(|| Error::RankDeficient { point: x.to_vec(), ratio: 0.0 })?
            .solve(&(f.transpose() * v));
        let residual = (v - &f * &u).norm();
        Ok((u, residual))
    }

    /// `h(v, v)` for a vector `v ∈ Q_x`.
    pub fn fibre_norm_squared(&self, x: &[f64], v: &DVector<f64>) -> Result<f64> {
        let (u, residual) = self.frame_coefficients(x, v)?;
        if residual > 1e-8 * v.norm().max(1.0) {
            return Err(Error::NotInDistribution { what: "velocity", residual });
        }
        let h = self.fibre_matrix(x)?;
        Ok(u.dot(&(h * &u)))
    }

    /// Dimensions of the bracket filtration at `x`: entry `m − 1` is the rank
    /// of all iterated brackets of frame fields of length at most `m`.
    pub fn bracket_filtration(&self, x: &[f64], depth: usize) -> Result<Filtration> {
        if depth == 0 {
            return Err(Error::InvalidArgument("filtration depth must be positive".into()));
        }
        let mut level: Vec<VectorField> = self.frame.clone();
        let mut vectors: Vec<DVector<f64>> = Vec::new();
        let mut dims = Vec::with_capacity(depth);
        for m in 1..=depth {
            if m > 1 {
                let mut next = Vec::with_capacity(level.len() * self.rank());
                for a in &self.frame {
                    for b in &level {
                        next.push(a.bracket(b)?);
                    }
                }
                level = next;
            }
            for f in &level {
                vectors.push(f.eval(x)?);
            }
            let mat = DMatrix::from_columns(&vectors);
            let sigma = linalg::singular_values(&mat);
            dims.push(linalg::numerical_rank(&sigma, self.rank_tol));
        }
        let bracket_generating = dims.iter().any(|&d| d == self.dim());
        Ok(Filtration { dims, bracket_generating })
    }

    /// Length of a curve tangent to the distribution by composite Simpson
    /// quadrature of `√h(ċ,ċ)` on its (possibly non-uniform) sample grid.
    pub fn length(&self, samples: &[CurveSample]) -> Result<f64> {
        if samples.len() < 2 {
            return Ok(0.0);
        }
        let mut speeds = Vec::with_capacity(samples.len());
        for s in samples {
            speeds.push(self.fibre_norm_squared(&s.point, &s.velocity)?.max(0.0).sqrt());
        }
        let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample times must increase strictly".into()));
        }
        Ok(simpson(&times, &speeds))
    }
}

fn full_frame(f: &DMatrix<f64>, z: &[VectorField], x: &[f64]) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let k = f.ncols();
    let mut full = DMatrix::zeros(n, n);
    full.view_mut((0, 0), (n, k)).copy_from(f);
    for (m, field) in z.iter().enumerate() {
        full.set_column(k + m, &field.eval(x)?);
    }
    Ok(full)
}

pub(crate) fn full_frame_matrix(s: &SubRiemannianStructure, z: &[VectorField], x: &[f64]) -> Result<DMatrix<f64>> {
    full_frame(&s.frame_matrix(x)?, z, x)
}

/// Composite Simpson's rule on a non-uniform grid; an odd trailing interval
/// is integrated with the quadratic through the last three nodes.
fn simpson(t: &[f64], f: &[f64]) -> f64 {
    let n = t.len();
    if n == 2 {
        return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
    }
    let pair = |i: usize| {
        let h0 = t[i + 1] - t[i];
        let h1 = t[i + 2] - t[i + 1];
        let h = h0 + h1;
        h / 6.0 * ((2.0 - h1 / h0) * f[i] + h * h / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2])
    };
    let intervals = n - 1;
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        total += pair(i);
        i += 2;
    }
    if intervals % 2 == 1 {
        // last interval [t_{n-2}, t_{n-1}] using nodes n-3, n-2, n-1
        let (a, b, c) = (t[n - 3], t[n - 2], t[n - 1]);
        let (fa, fb, fc) = (f[n - 3], f[n - 2], f[n - 1]);
        let h0 = b - a;
        let h1 = c - b;
        let alpha = (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        let beta = (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
        let gamma = h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        total += alpha * fc + beta * fb - gamma * fa;
    }
    total
}

/// A sampled point of a curve together with its velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub velocity: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    pub dims: Vec<usize>,
    pub bracket_generating: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_quadratics_for_any_grid() {
        let quad = |t: f64| 2.0 - t + 3.0 * t * t;
        let want = 2.0 * 1.7 - 1.7 * 1.7 / 2.0 + 1.7f64.powi(3);
        for grid in [vec![0.0, 0.3, 0.45, 1.0, 1.7], vec![0.0, 0.2, 0.9, 1.1, 1.4, 1.7]] {
            let vals: Vec<f64> = grid.iter().map(|&t| quad(t)).collect();
            assert!((simpson(&grid, &vals) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn simpson_is_exact_on_cubics_for_uniform_grid() {
        let f = |t: f64| 1.0 + t - 2.0 * t * t + 0.5 * t * t * t;
        let grid: Vec<f64> = (0..=6).map(|j| 0.25 * j as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
        let want = 1.5 + 1.125 - 2.25 + 0.5 * 1.5f64.powi(4) / 4.0;
        assert!((simpson(&grid, &vals) - want).abs() < 1e-12);
    }

    #[test]
    fn halton_points_are_interior_and_deterministic() {
        let b = [(0.01, 10.0), (-1.0, 1.0)];
        let p = halton_points(&b, 64);
        assert_eq!(p, halton_points(&b, 64));
        assert!(p.iter().all(|x| x[0] > 0.01 && x[0] < 10.0 && x[1] > -1.0 && x[1] < 1.0));
    }
}
