use nalgebra::{DMatrix, DVector};

use super::fields::{interior_d, Jet, VectorField};
use super::structure::{full_frame_matrix, FrameJet, SubRiemannianStructure};
use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance for membership checks of vectors in `Q_x` and covectors in `Q⁰_x`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Riemannian metric on the chart extending the fibre metric, obtained by
/// declaring a complement of the distribution orthonormal and orthogonal to it.
#[derive(Debug, Clone)]
pub struct MetricField<'a> {
    structure: &'a SubRiemannianStructure,
    complement: Vec<VectorField>,
    auto_completed: bool,
}

impl SubRiemannianStructure {
    /// Riemannian extension `G` with `G⁻¹ = F H⁻¹ Fᵀ + Z Zᵀ`. Without a
    /// user-supplied complement, coordinate fields are chosen by greedy
    /// pivoting against the frame at the anchor point.
    pub fn riemannian_extension(&self) -> Result<MetricField<'_>> {
        let (complement, auto_completed) = match self.complement() {
            Some(z) => (z.to_vec(), false),
            None => (self.auto_complement()?, true),
        };
        let m = MetricField { structure: self, complement, auto_completed };
        for p in self.probes() {
            let full = full_frame_matrix(self, &m.complement, p)?;
            let sigma = linalg::singular_values(&full);
            if !(linalg::condition_ratio(&sigma, self.dim()) > self.rank_tol()) {
                return Err(Error::CompletionFailure { point: p.clone() });
            }
        }
        Ok(m)
    }

    fn auto_complement(&self) -> Result<Vec<VectorField>> {
        let n = self.dim();
        let f = self.frame_matrix(self.anchor())?;
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
        for col in f.column_iter() {
            push_orthonormal(&mut basis, col.into_owned());
        }
        let mut chosen = Vec::with_capacity(n - self.rank());
        let mut available: Vec<usize> = (0..n).collect();
        while chosen.len() < n - self.rank() {
            let (pos, best, residual) = available
                .iter()
                .enumerate()
                .map(|(pos, &i)| {
                    let e = DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
                    (pos, i, orthogonal_residual(&basis, &e).norm())
                })
                .max_by(|a, b| a.2.total_cmp(&b.2))
                .ok_or_else(|| Error::CompletionFailure { point: self.anchor().to_vec() })?;
            if residual <= self.rank_tol() {
                return Err(Error::CompletionFailure { point: self.anchor().to_vec() });
            }
            let e = DVector::from_fn(n, |j, _| if best == j { 1.0 } else { 0.0 });
            push_orthonormal(&mut basis, e);
            available.remove(pos);
            chosen.push(best);
        }
        chosen.sort_unstable();
        Ok(chosen.into_iter().map(|i| VectorField::coordinate(n, i)).collect())
    }
}

fn orthogonal_residual(basis: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let mut r = v.clone();
    for b in basis {
        r -= b * b.dot(&r);
    }
    r
}

fn push_orthonormal(basis: &mut Vec<DVector<f64>>, v: DVector<f64>) {
    let r = orthogonal_residual(basis, &v);
    let norm = r.norm();
    if norm > 0.0 {
        basis.push(r / norm);
    }
}

impl<'a> MetricField<'a> {
    pub fn structure(&self) -> &'a SubRiemannianStructure {
        self.structure
    }

    /// Complement fields `Z_m` declared orthonormal.
    pub fn complement(&self) -> &[VectorField] {
        &self.complement
    }

    pub fn is_auto_completed(&self) -> bool {
        self.auto_completed
    }

    /// All pointwise tensors of the structure and its extension at `x`.
    pub fn at(&self, x: &[f64]) -> Result<PointGeometry> {
        let s = self.structure;
        s.chart().check_point(x)?;
        let fj = s.frame_jet(x)?;
        let n = s.dim();
        let c = self.complement.len();
        let mut z = DMatrix::zeros(n, c);
        let mut d_z = vec![DMatrix::zeros(n, c); n];
        for (m, field) in self.complement.iter().enumerate() {
            z.set_column(m, &field.eval(x)?);
            let j = field.jacobian(x)?;
            for (i, d) in d_z.iter_mut().enumerate() {
                d.set_column(m, &j.column(i));
            }
        }
        let metric_inv = &fj.cometric + &z * z.transpose();
        let d_metric_inv: Vec<DMatrix<f64>> = (0..n)
            .map(|i| {
                let a = &d_z[i] * z.transpose();
                &fj.d_cometric[i] + &a + a.transpose()
            })
            .collect();
        let metric = metric_inv
            .clone()
            .cholesky()
            .ok_or_else(|| Error::CompletionFailure { point: x.to_vec() })?
            .inverse();
        let d_metric: Vec<DMatrix<f64>> = d_metric_inv.iter().map(|d| -(&metric * d * &metric)).collect();
        let christoffel = christoffel_from(&metric_inv, &d_metric);
        let pi = &fj.cometric * &metric;
        let tau = &metric * &fj.cometric;
        let d_tau = (0..n).map(|i| &d_metric[i] * &fj.cometric + &metric * &fj.d_cometric[i]).collect();
        Ok(PointGeometry { frame: fj, z, d_z, metric, metric_inv, d_metric, d_metric_inv, christoffel, pi, tau, d_tau })
    }

    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.at(x)?.metric)
    }

    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        Ok(self.at(x)?.christoffel)
    }
}

/// Christoffel symbols: `gamma[k][(i, j)] = Γ^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub gamma: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[k][(i, j)]
    }

    /// `Γ(u, v)^k = Γ^k_ij u^i v^j`.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.gamma.len(), |k, _| (&self.gamma[k] * v).dot(u))
    }
}

/// `Γ^k_ij = ½ G^{kl}(∂_i G_lj + ∂_j G_li − ∂_l G_ij)`.
pub fn christoffel_from(metric_inv: &DMatrix<f64>, d_metric: &[DMatrix<f64>]) -> Christoffel {
    let n = metric_inv.nrows();
    // lowered[l][(i,j)] = ½(∂_i G_lj + ∂_j G_li − ∂_l G_ij)
    let lowered: Vec<DMatrix<f64>> = (0..n)
        .map(|l| DMatrix::from_fn(n, n, |i, j| 0.5 * (d_metric[i][(l, j)] + d_metric[j][(l, i)] - d_metric[l][(i, j)])))
        .collect();
    let gamma = (0..n)
        .map(|k| {
            let mut m = DMatrix::zeros(n, n);
            for (l, low) in lowered.iter().enumerate() {
                m += low * metric_inv[(k, l)];
            }
            m
        })
        .collect();
    Christoffel { gamma }
}

/// Pointwise geometry at one point: frame data, the Riemannian extension
/// with its first derivatives, Christoffel symbols and the projections.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub frame: FrameJet,
    /// Complement columns `Z_m`.
    pub z: DMatrix<f64>,
    pub d_z: Vec<DMatrix<f64>>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    pub d_metric: Vec<DMatrix<f64>>,
    pub d_metric_inv: Vec<DMatrix<f64>>,
    pub christoffel: Christoffel,
    /// `π = ḡ G`, the G-orthogonal projection onto `Q`.
    pub pi: DMatrix<f64>,
    /// `τ = G ḡ`, the dual projection onto `(Q⊥)⁰`.
    pub tau: DMatrix<f64>,
    pub d_tau: Vec<DMatrix<f64>>,
}

/// The four projections at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    pub pi: DMatrix<f64>,
    pub pi_perp: DMatrix<f64>,
    pub tau: DMatrix<f64>,
    pub tau_perp: DMatrix<f64>,
}

impl PointGeometry {
    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    pub fn point(&self) -> &[f64] {
        &self.frame.point
    }

    pub fn cometric(&self) -> &DMatrix<f64> {
        &self.frame.cometric
    }

    pub fn projections(&self) -> Projections {
        let id = DMatrix::identity(self.dim(), self.dim());
        Projections {
            pi_perp: &id - &self.pi,
            tau_perp: &id - &self.tau,
            pi: self.pi.clone(),
            tau: self.tau.clone(),
        }
    }

    pub fn pi_perp(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.pi * v
    }

    pub fn tau_perp(&self, w: &DVector<f64>) -> DVector<f64> {
        w - &self.tau * w
    }

    /// `♭_G v`.
    pub fn flat(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.metric * v
    }

    /// `♯_G ω`.
    pub fn sharp(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.metric_inv * w
    }

    /// Jet of `♭_G V` for a vector-field jet `V`.
    pub fn flat_jet(&self, v: &Jet) -> Jet {
        v.left_multiplied(&self.metric, &self.d_metric)
    }

    /// Jet of `τ(ω)`.
    pub fn tau_jet(&self, w: &Jet) -> Jet {
        w.left_multiplied(&self.tau, &self.d_tau)
    }

    /// Jet of `τ⊥(ω)`.
    pub fn tau_perp_jet(&self, w: &Jet) -> Jet {
        w - &self.tau_jet(w)
    }

    /// Jet of `g(α)`.
    pub fn g_jet(&self, alpha: &Jet) -> Jet {
        self.frame.g_jet(alpha)
    }

    /// Jet of the complement field `Z_m`.
    pub fn complement_field(&self, m: usize) -> Jet {
        let n = self.dim();
        let mut jacobian = DMatrix::zeros(n, n);
        for i in 0..n {
            jacobian.set_column(i, &self.d_z[i].column(m));
        }
        Jet::new(self.z.column(m).into_owned(), jacobian)
    }

    /// Number of annihilator basis elements, `n − k`.
    pub fn corank(&self) -> usize {
        self.z.ncols()
    }

    /// Jet of the `Q⁰` basis element `η^m = ♭_G Z_m`.
    pub fn annihilator_field(&self, m: usize) -> Jet {
        self.flat_jet(&self.complement_field(m))
    }

    /// Levi-Civita derivative `∇^G_u V` of a vector-field jet.
    pub fn covariant_vector(&self, u: &DVector<f64>, v: &Jet) -> DVector<f64> {
        &v.jacobian * u + self.christoffel.contract(u, &v.value)
    }

    /// Levi-Civita derivative `∇^G_u ω` of a covector-field jet.
    pub fn covariant_covector(&self, u: &DVector<f64>, w: &Jet) -> DVector<f64> {
        let n = self.dim();
        let mut out = &w.jacobian * u;
        for k in 0..n {
            let mut corr = 0.0;
            for l in 0..n {
                corr += w.value[l] * self.christoffel.gamma[l].column(k).dot(u);
            }
            out[k] -= corr;
        }
        out
    }

    /// Frame coefficients of `u ∈ Q_x`, rejecting vectors off the distribution.
    pub fn frame_coefficients(&self, u: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
        let f = &self.frame.frame;
        let coeffs = (f.transpose() * f)
            .cholesky()
            .ok_or_else(|| Error::RankDeficient { point: self.point().to_vec(), ratio: 0.0 })?
            .solve(&(f.transpose() * u));
        let residual = (u - f * &coeffs).norm();
        if residual > MEMBERSHIP_TOL * u.norm().max(1.0) {
            return Err(Error::NotInDistribution { what, residual });
        }
        Ok(coeffs)
    }

    /// Rejects covectors that do not annihilate `Q_x`.
    pub fn check_annihilator(&self, eta: &DVector<f64>) -> Result<()> {
        let residual = (self.frame.frame.transpose() * eta).amax();
        if residual > MEMBERSHIP_TOL * eta.amax().max(1.0) {
            return Err(Error::NotAnnihilator { residual });
        }
        Ok(())
    }

    /// `[X_a, X_b]` at the point.
    pub fn frame_bracket(&self, a: usize, b: usize) -> DVector<f64> {
        let xa = self.frame.frame.column(a);
        let xb = self.frame.frame.column(b);
        let n = self.dim();
        DVector::from_fn(n, |j, _| {
            (0..n).map(|i| xa[i] * self.frame.d_frame[i][(j, b)] - xb[i] * self.frame.d_frame[i][(j, a)]).sum()
        })
    }

    /// `Π^G(u, v) = π⊥(∇^G_u Ṽ)` with the frozen-coefficient extension `Ṽ` of `v`.
    pub fn pi_g(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.frame_coefficients(u, "first argument")?;
        let coeffs = self.frame_coefficients(v, "second argument")?;
        Ok(self.pi_perp(&self.covariant_vector(u, &self.frame.frozen_field(&coeffs))))
    }

    /// `∇^nh_u V = π(∇^G_u V)` for a vector-field jet `V` tangent to `Q`.
    pub fn nh_covariant(&self, u: &DVector<f64>, v: &Jet) -> Result<DVector<f64>> {
        self.frame_coefficients(u, "direction")?;
        Ok(&self.pi * self.covariant_vector(u, v))
    }

    /// `Π^B(u, η)`: the covector in `(Q⊥)⁰` with
    /// `⟨Π^B(u,η), X_b⟩ = −Σ_a u^a ⟨η, [X_a, X_b]⟩`.
    pub fn pi_b(&self, u: &DVector<f64>, eta: &DVector<f64>) -> Result<DVector<f64>> {
        let coeffs = self.frame_coefficients(u, "direction")?;
        self.check_annihilator(eta)?;
        Ok(self.pi_b_unchecked(&coeffs, eta))
    }

    /// `Π^B` from frame coefficients of the direction, without membership checks.
    pub fn pi_b_unchecked(&self, coeffs: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let k = self.frame.rank();
        let c = DVector::from_fn(k, |b, _| {
            -(0..k).map(|a| coeffs[a] * eta.dot(&self.frame_bracket(a, b))).sum::<f64>()
        });
        &self.metric * &self.frame.frame * (&self.frame.fibre_inv * c)
    }

    /// `Σ_b u^b [X_b, X_a]` for `a = 1..k`, the brackets with the frozen extension of `u`.
    pub fn frozen_brackets(&self, coeffs: &DVector<f64>) -> Vec<DVector<f64>> {
        let k = self.frame.rank();
        (0..k)
            .map(|a| (0..k).fold(DVector::zeros(self.dim()), |acc, b| acc + self.frame_bracket(b, a) * coeffs[b]))
            .collect()
    }

    /// `δ^B_X η = i_X dη` for a covector-field jet.
    pub fn delta_b(&self, x: &DVector<f64>, eta: &Jet) -> DVector<f64> {
        interior_d(x, eta)
    }

    /// `∇̃^B_X η = τ⊥(i_X dη)`.
    pub fn tilde_nabla_b(&self, x: &DVector<f64>, eta: &Jet) -> DVector<f64> {
        self.tau_perp(&interior_d(x, eta))
    }

    /// `g(δ^B_X η)`, which vanishes for every Q-adapted derivative that is metric.
    pub fn non_metricity(&self, x: &DVector<f64>, eta: &Jet) -> DVector<f64> {
        self.cometric() * interior_d(x, eta)
    }

    /// `∇_α β = ∇^G_{g(α)} τ(β) + i_{g(α)} d(τ⊥β)`.
    pub fn nabla_normal(&self, alpha: &Jet, beta: &Jet) -> DVector<f64> {
        let ga = self.frame.sharp_g(&alpha.value);
        self.covariant_covector(&ga, &self.tau_jet(beta)) + interior_d(&ga, &self.tau_perp_jet(beta))
    }

    /// `{α,β}` at the point.
    pub fn symmetric_bracket(&self, alpha: &Jet, beta: &Jet) -> DVector<f64> {
        self.frame.symmetric_bracket(alpha, beta)
    }
}
