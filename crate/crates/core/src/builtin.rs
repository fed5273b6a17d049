//! Embedded example structures, described as coordinate expressions.

use crate::error::{Error, Result};
use crate::expr::Chart;
use crate::geometry::{SubRiemannianStructure, VectorField};

/// Textual definition of a structure on a single chart.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinDefinition {
    pub name: &'static str,
    pub description: &'static str,
    pub coordinates: Vec<&'static str>,
    /// Open interval per coordinate; `None` bounds are infinite.
    pub domain: Vec<(Option<f64>, Option<f64>)>,
    pub frame: Vec<Vec<&'static str>>,
    pub complement: Option<Vec<Vec<&'static str>>>,
    pub probe_box: Option<Vec<(f64, f64)>>,
}

impl BuiltinDefinition {
    pub fn chart(&self) -> Result<Chart> {
        let domain = self
            .domain
            .iter()
            .map(|&(lo, hi)| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
            .collect();
        Ok(Chart::with_domain(&self.coordinates, domain)?)
    }

    pub fn structure(&self) -> Result<SubRiemannianStructure> {
        let chart = self.chart()?;
        let frame = self.frame.iter().map(|f| VectorField::parse(&chart, f)).collect::<Result<Vec<_>>>()?;
        let mut b = SubRiemannianStructure::builder(chart.clone(), frame);
        if let Some(z) = &self.complement {
            b = b.complement(z.iter().map(|f| VectorField::parse(&chart, f)).collect::<Result<Vec<_>>>()?);
        }
        if let Some(pb) = &self.probe_box {
            b = b.probe_box(pb.clone());
        }
        b.build()
    }
}

pub const MONTGOMERY: &str = "montgomery";
pub const LIU_SUSSMANN: &str = "liu-sussmann";
pub const HEISENBERG: &str = "heisenberg";

/// Names of all built-in structures.
pub fn names() -> [&'static str; 3] {
    [MONTGOMERY, LIU_SUSSMANN, HEISENBERG]
}

/// `X1 = ∂r`, `X2 = ∂θ − F(r)∂z` with `F(r) = r²/2 − r⁴/4` on `r ∈ (0.01, 10)`.
pub fn montgomery() -> BuiltinDefinition {
    BuiltinDefinition {
        name: MONTGOMERY,
        description: "cylindrical frame with F(r) = r^2/2 - r^4/4; helices r = 1 are abnormal",
        coordinates: vec!["r", "theta", "z"],
        domain: vec![(Some(0.01), Some(10.0)), (None, None), (None, None)],
        frame: vec![vec!["1", "0", "0"], vec!["0", "1", "-(1/2*r^2 - 1/4*r^4)"]],
        complement: Some(vec![vec!["0", "0", "1"]]),
        probe_box: Some(vec![(0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0)]),
    }
}

/// `X1 = ∂x`, `X2 = (1 − x)∂y + x²∂z`.
pub fn liu_sussmann() -> BuiltinDefinition {
    BuiltinDefinition {
        name: LIU_SUSSMANN,
        description: "frame dx, (1-x)dy + x^2 dz; the lines x = 0 and x = 2 are abnormal",
        coordinates: vec!["x", "y", "z"],
        domain: vec![(None, None); 3],
        frame: vec![vec!["1", "0", "0"], vec!["0", "1 - x", "x^2"]],
        complement: Some(vec![vec!["0", "-x^2", "1 - x"]]),
        probe_box: Some(vec![(-1.0, 3.0), (-1.0, 1.0), (-1.0, 1.0)]),
    }
}

/// `X1 = ∂x − (y/2)∂z`, `X2 = ∂y + (x/2)∂z`.
pub fn heisenberg() -> BuiltinDefinition {
    BuiltinDefinition {
        name: HEISENBERG,
        description: "Heisenberg group with left-invariant orthonormal frame",
        coordinates: vec!["x", "y", "z"],
        domain: vec![(None, None); 3],
        frame: vec![vec!["1", "0", "-y/2"], vec!["0", "1", "x/2"]],
        complement: Some(vec![vec!["0", "0", "1"]]),
        probe_box: None,
    }
}

pub fn by_name(name: &str) -> Result<BuiltinDefinition> {
    match name {
        MONTGOMERY => Ok(montgomery()),
        LIU_SUSSMANN => Ok(liu_sussmann()),
        HEISENBERG => Ok(heisenberg()),
        other => Err(Error::InvalidArgument(format!("unknown built-in structure `{other}`"))),
    }
}
