use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Chart, Expr};

/// First-order jet of a vector- or covector-valued field at a point:
/// the value and its coordinate Jacobian, `jacobian[(j, i)] = ∂_i value_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

impl Jet {
    pub fn new(value: DVector<f64>, jacobian: DMatrix<f64>) -> Self {
        assert_eq!(value.len(), jacobian.nrows());
        Self { value, jacobian }
    }

    /// Jet of a field that is constant in the chart.
    pub fn constant(value: DVector<f64>) -> Self {
        let n = value.len();
        Self { jacobian: DMatrix::zeros(n, n), value }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(DVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }

    /// Partial derivative of the whole field along coordinate `i`.
    pub fn partial(&self, i: usize) -> DVector<f64> {
        self.jacobian.column(i).into_owned()
    }

    /// Product rule for `f * self`.
    pub fn scaled(&self, f: &ScalarJet) -> Jet {
        let jacobian = &self.jacobian * f.value + &self.value * f.gradient.transpose();
        Jet { value: &self.value * f.value, jacobian }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet { value: &self.value * c, jacobian: &self.jacobian * c }
    }

    /// Jet of `matrix(x) * self(x)` given the matrix and its partials.
    pub fn left_multiplied(&self, matrix: &DMatrix<f64>, partials: &[DMatrix<f64>]) -> Jet {
        let value = matrix * &self.value;
        let mut jacobian = matrix * &self.jacobian;
        for (i, dm) in partials.iter().enumerate() {
            let col = dm * &self.value;
            let mut target = jacobian.column_mut(i);
            target += col;
        }
        Jet { value, jacobian }
    }
}

impl std::ops::Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet { value: &self.value + &rhs.value, jacobian: &self.jacobian + &rhs.jacobian }
    }
}

impl std::ops::Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet { value: &self.value - &rhs.value, jacobian: &self.jacobian - &rhs.jacobian }
    }
}

/// Value and gradient of a scalar function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub gradient: DVector<f64>,
}

impl ScalarJet {
    pub fn of(e: &Expr, x: &[f64]) -> Result<Self> {
        let gradient = DVector::from_iterator(
            x.len(),
            (0..x.len()).map(|i| e.derivative(i).eval(x)).collect::<std::result::Result<
                Vec<_>,
                _,
            >>()?,
        );
        Ok(Self { value: e.eval(x)?, gradient })
    }
}

/// Component expressions together with their precomputed exact partials.
#[derive(Debug, Clone, PartialEq)]
struct Components {
    exprs: Vec<Expr>,
    // partials[j][i] = ∂_i exprs[j]
    partials: Vec<Vec<Expr>>,
}

impl Components {
    fn new(exprs: Vec<Expr>, n: usize) -> Result<Self> {
        if exprs.len() != n {
            return Err(Error::Dimension { what: "field components", expected: n, got: exprs.len() });
        }
        if let Some(bad) = exprs.iter().find(|e| e.arity() > n) {
            return Err(Error::InvalidArgument(format!(
                "component `{bad}` references a coordinate outside the chart"
            )));
        }
        let partials = exprs.iter().map(|e| (0..n).map(|i| e.derivative(i)).collect()).collect();
        Ok(Self { exprs, partials })
    }

    fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_len(x, self.exprs.len())?;
        let mut v = DVector::zeros(self.exprs.len());
        for (j, e) in self.exprs.iter().enumerate() {
            v[j] = e.eval(x)?;
        }
        Ok(v)
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.exprs.len();
        check_len(x, n)?;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                m[(j, i)] = self.partials[j][i].eval(x)?;
            }
        }
        Ok(m)
    }
}

fn check_len(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::Dimension { what: "point", expected: n, got: x.len() });
    }
    Ok(())
}

/// Vector field with components in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(Components);

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        let n = components.len();
        Ok(Self(Components::new(components, n)?))
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, components: &[S]) -> Result<Self> {
        if components.len() != chart.dim() {
            return Err(Error::Dimension {
                what: "vector field components",
                expected: chart.dim(),
                got: components.len(),
            });
        }
        let exprs = components.iter().map(|s| chart.parse(s.as_ref())).collect::<std::result::Result<_, _>>()?;
        Self::new(exprs)
    }

    /// The coordinate field `∂/∂x^i`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let exprs = (0..n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect();
        Self::new(exprs).expect("constant components")
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![Expr::zero(); n]).expect("constant components")
    }

    /// `Σ_a coefficients[a] * fields[a]`, built symbolically.
    pub fn combination(coefficients: &[Expr], fields: &[VectorField]) -> Result<Self> {
        if coefficients.len() != fields.len() || fields.is_empty() {
            return Err(Error::Dimension {
                what: "frame coefficients",
                expected: fields.len(),
                got: coefficients.len(),
            });
        }
        let n = fields[0].dim();
        let exprs = (0..n)
            .map(|j| {
                coefficients
                    .iter()
                    .zip(fields)
                    .fold(Expr::zero(), |acc, (c, f)| acc + c * &f.0.exprs[j])
            })
            .collect();
        Self::new(exprs)
    }

    pub fn dim(&self) -> usize {
        self.0.exprs.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.0.exprs
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.0.eval(x)
    }

    /// `J[(j, i)] = ∂X^j/∂x^i`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.0.jacobian(x)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        Ok(Jet::new(self.eval(x)?, self.jacobian(x)?))
    }

    /// Exact Lie bracket `[self, other]`.
    pub fn bracket(&self, other: &VectorField) -> Result<VectorField> {
        let n = self.dim();
        if other.dim() != n {
            return Err(Error::Dimension { what: "bracket operand", expected: n, got: other.dim() });
        }
        let x = &self.0;
        let y = &other.0;
        let exprs = (0..n)
            .map(|j| {
                (0..n).fold(Expr::zero(), |acc, i| {
                    acc + &x.exprs[i] * &y.partials[j][i] - &y.exprs[i] * &x.partials[j][i]
                })
            })
            .collect();
        VectorField::new(exprs)
    }
}

/// One-form with covariant components in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct OneFormField(Components);

impl OneFormField {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        let n = components.len();
        Ok(Self(Components::new(components, n)?))
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, components: &[S]) -> Result<Self> {
        if components.len() != chart.dim() {
            return Err(Error::Dimension {
                what: "one-form components",
                expected: chart.dim(),
                got: components.len(),
            });
        }
        let exprs = components.iter().map(|s| chart.parse(s.as_ref())).collect::<std::result::Result<_, _>>()?;
        Self::new(exprs)
    }

    pub fn dim(&self) -> usize {
        self.0.exprs.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.0.exprs
    }

    pub fn scaled(&self, f: &Expr) -> Result<Self> {
        Self::new(self.0.exprs.iter().map(|c| f * c).collect())
    }

    pub fn add(&self, other: &OneFormField) -> Result<Self> {
        Self::new(self.0.exprs.iter().zip(&other.0.exprs).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.0.eval(x)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        Ok(Jet::new(self.0.eval(x)?, self.0.jacobian(x)?))
    }
}

/// Interior product of `x` with the exterior derivative of `form`:
/// `(i_X dω)_k = X^i (∂_i ω_k − ∂_k ω_i)`.
pub fn interior_d(x: &DVector<f64>, form: &Jet) -> DVector<f64> {
    let d = &form.jacobian;
    // d[(k, i)] = ∂_i ω_k
    d * x - d.transpose() * x
}

/// Lie derivative of a covector field along a vector field.
pub fn lie_derivative_covector(field: &Jet, form: &Jet) -> DVector<f64> {
    &form.jacobian * &field.value + field.jacobian.transpose() * &form.value
}
