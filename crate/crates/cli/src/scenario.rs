//! Scenario files: structure definition, tasks and tolerances.

use std::path::Path;

use serde::{Deserialize, Serialize};
use subrig::builtin::{self, BuiltinDefinition};
use subrig::expr::{Chart, Expr};
use subrig::geometry::{SubRiemannianStructure, VectorField};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Name of an embedded structure supplying chart, frame and complement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    /// Q-frame as coordinate components of each vector field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<String>>>,
    /// `k × k` fibre metric in the frame; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibre_metric: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub coordinates: Vec<String>,
    /// Open interval per coordinate; `null` bounds are infinite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[Option<f64>; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_rtol() -> f64 {
    1e-10
}

fn default_atol() -> f64 {
    1e-12
}

fn default_rank_tol() -> f64 {
    1e-8
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { rtol: default_rtol(), atol: default_atol(), rank_tol: default_rank_tol() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Stem of the output files; derived from position and kind when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub task: Task,
}

/// Vector field given by frame index, frame coefficients or coordinate components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Frame(usize),
    Coefficients(Vec<String>),
    Components(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    /// Generator in Q: a frame index or frame coefficients.
    pub generator: FieldSpec,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub start: Vec<f64>,
    pub segments: Vec<SegmentSpec>,
}

fn default_samples_per_segment() -> usize {
    16
}

fn default_compatibility_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    Pointwise(PointwiseTask),
    Filtration(FiltrationTask),
    Geodesic(GeodesicTask),
    RiemannianGeodesic(RiemannianGeodesicTask),
    Flow(FlowTask),
    CoadjointTransport(CoadjointTransportTask),
    PullbackSpan(PullbackSpanTask),
    AbnormalTest(AbnormalTestTask),
    VariationVector(VariationVectorTask),
    Nonholonomic(NonholonomicTask),
    AnnihilatorTransport(AnnihilatorTransportTask),
    Compatibility(CompatibilityTask),
}

/// Cometric, extension metric, projections and Christoffel symbols at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointwiseTask {
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltrationTask {
    pub point: Vec<f64>,
    pub depth: usize,
}

/// Normal extremal from `(x0, p0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicTask {
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiemannianGeodesicTask {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

/// Flow of a vector field with its Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowTask {
    pub field: FieldSpec,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoadjointTransportTask {
    pub start: Vec<f64>,
    pub segment: SegmentSpec,
    pub eta0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackSpanTask {
    pub curve: CurveSpec,
    #[serde(default = "default_samples_per_segment")]
    pub samples_per_segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbnormalTestTask {
    pub curve: CurveSpec,
    #[serde(default = "default_samples_per_segment")]
    pub samples_per_segment: usize,
    /// Overrides the scenario rank tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationVectorTask {
    pub start: Vec<f64>,
    pub segment: SegmentSpec,
    pub field: FieldSpec,
    pub tau: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonholonomicTask {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

/// Transport of an annihilating covector along a nonholonomic trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnihilatorTransportTask {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub duration: f64,
    pub eta0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatibilityTask {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub duration: f64,
    #[serde(default = "default_compatibility_tol")]
    pub tolerance: f64,
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Pointwise(_) => "pointwise",
            Task::Filtration(_) => "filtration",
            Task::Geodesic(_) => "geodesic",
            Task::RiemannianGeodesic(_) => "riemannian-geodesic",
            Task::Flow(_) => "flow",
            Task::CoadjointTransport(_) => "coadjoint-transport",
            Task::PullbackSpan(_) => "pullback-span",
            Task::AbnormalTest(_) => "abnormal-test",
            Task::VariationVector(_) => "variation-vector",
            Task::Nonholonomic(_) => "nonholonomic",
            Task::AnnihilatorTransport(_) => "annihilator-transport",
            Task::Compatibility(_) => "compatibility",
        }
    }
}

impl TaskSpec {
    pub fn new(task: Task) -> Self {
        Self { name: None, task }
    }

    pub fn named(name: &str, task: Task) -> Self {
        Self { name: Some(name.to_string()), task }
    }
}

/// Structure definition after validation, ready for computation.
pub struct Resolved {
    pub structure: SubRiemannianStructure,
    pub tolerances: ToleranceSpec,
}

fn frame_curve(start: [f64; 3], a: usize, t1: f64) -> CurveSpec {
    CurveSpec { start: start.to_vec(), segments: vec![SegmentSpec { generator: FieldSpec::Frame(a), t0: 0.0, t1 }] }
}

fn example_tasks(name: &str) -> Vec<TaskSpec> {
    match name {
        builtin::MONTGOMERY => vec![
            TaskSpec::named(
                "helix-abnormal",
                Task::AbnormalTest(AbnormalTestTask { curve: frame_curve([1.0, 0.0, 0.0], 1, 1.0), samples_per_segment: 16, rank_tol: None }),
            ),
            TaskSpec::named(
                "radial-abnormal",
                Task::AbnormalTest(AbnormalTestTask { curve: frame_curve([1.2, 0.0, 0.0], 0, 0.5), samples_per_segment: 16, rank_tol: None }),
            ),
        ],
        builtin::LIU_SUSSMANN => vec![
            TaskSpec::named(
                "line-x0-abnormal",
                Task::AbnormalTest(AbnormalTestTask { curve: frame_curve([0.0, 0.0, 0.0], 1, 1.0), samples_per_segment: 16, rank_tol: None }),
            ),
            TaskSpec::named("filtration-x0", Task::Filtration(FiltrationTask { point: vec![0.0, 0.0, 0.0], depth: 3 })),
        ],
        builtin::HEISENBERG => vec![
            TaskSpec::named(
                "line-geodesic",
                Task::Geodesic(GeodesicTask { x0: vec![0.0; 3], p0: vec![1.0, 0.0, 0.0], duration: 1.0, samples: None }),
            ),
            TaskSpec::named(
                "line-compatibility",
                Task::Compatibility(CompatibilityTask { x0: vec![0.0; 3], u0: vec![1.0, 0.0], duration: 1.0, tolerance: 1e-8 }),
            ),
        ],
        _ => Vec::new(),
    }
}

fn strings(rows: &[Vec<&str>]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

type StructureFields = (ChartSpec, Vec<Vec<String>>, Option<Vec<Vec<String>>>, Option<Vec<[f64; 2]>>);

fn structure_fields(def: &BuiltinDefinition) -> StructureFields {
    let chart = ChartSpec {
        coordinates: def.coordinates.iter().map(|s| s.to_string()).collect(),
        domain: Some(def.domain.iter().map(|&(lo, hi)| [lo, hi]).collect()),
    };
    let probe_box = def.probe_box.as_ref().map(|b| b.iter().map(|&(lo, hi)| [lo, hi]).collect());
    (chart, strings(&def.frame), def.complement.as_ref().map(|z| strings(z)), probe_box)
}

impl Scenario {
    /// Explicit scenario of a built-in structure with its example tasks.
    pub fn from_builtin(name: &str) -> Result<Self, CliError> {
        let def = builtin::by_name(name).map_err(|_| CliError::schema("builtin", format!("unknown built-in `{name}`")))?;
        let (chart, frame, complement, probe_box) = structure_fields(&def);
        Ok(Scenario {
            builtin: None,
            description: Some(def.description.to_string()),
            chart: Some(chart),
            frame: Some(frame),
            fibre_metric: None,
            complement,
            probes: None,
            probe_box,
            anchor: None,
            tolerances: ToleranceSpec::default(),
            tasks: example_tasks(name),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::schema(if path == "." { "scenario" } else { &path }, e.into_inner().to_string())
        })?;
        raw.resolve_builtin()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Replaces a `builtin` reference by the explicit structure it names.
    fn resolve_builtin(mut self) -> Result<Self, CliError> {
        let Some(name) = self.builtin.take() else {
            return Ok(self);
        };
        for (field, present) in
            [("chart", self.chart.is_some()), ("frame", self.frame.is_some()), ("complement", self.complement.is_some())]
        {
            if present {
                return Err(CliError::schema(field, "conflicts with `builtin`".into()));
            }
        }
        let def = builtin::by_name(&name).map_err(|_| CliError::schema("builtin", format!("unknown built-in `{name}`")))?;
        let (chart, frame, complement, probe_box) = structure_fields(&def);
        self.description.get_or_insert_with(|| def.description.to_string());
        self.chart = Some(chart);
        self.frame = Some(frame);
        self.complement = complement;
        if self.probes.is_none() && self.probe_box.is_none() {
            self.probe_box = probe_box;
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        crate::output::to_json(self)
    }

    fn chart(&self) -> Result<Chart, CliError> {
        let spec = self.chart.as_ref().ok_or_else(|| CliError::schema("chart", "required field is missing".into()))?;
        let chart = match &spec.domain {
            None => Chart::new(&spec.coordinates),
            Some(d) => {
                let d = d
                    .iter()
                    .map(|[lo, hi]| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
                    .collect();
                Chart::with_domain(&spec.coordinates, d)
            }
        };
        chart.map_err(|e| CliError::schema("chart", e.to_string()))
    }

    fn fields(chart: &Chart, rows: &[Vec<String>], path: &str) -> Result<Vec<VectorField>, CliError> {
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != chart.dim() {
                    return Err(CliError::schema(
                        &format!("{path}[{i}]"),
                        format!("expected {} components, got {}", chart.dim(), row.len()),
                    ));
                }
                let comps = parse_row(chart, row, &format!("{path}[{i}]"))?;
                VectorField::new(comps).map_err(|e| CliError::schema(&format!("{path}[{i}]"), e.to_string()))
            })
            .collect()
    }

    /// Parses every expression, builds the structure and checks task arguments.
    pub fn validate(&self) -> Result<Resolved, CliError> {
        let chart = self.chart()?;
        let rows = self.frame.as_ref().ok_or_else(|| CliError::schema("frame", "required field is missing".into()))?;
        if rows.is_empty() {
            return Err(CliError::schema("frame", "at least one vector field is required".into()));
        }
        let frame = Self::fields(&chart, rows, "frame")?;
        let k = frame.len();
        let mut b = SubRiemannianStructure::builder(chart.clone(), frame);
        if let Some(h) = &self.fibre_metric {
            if h.len() != k || h.iter().any(|r| r.len() != k) {
                return Err(CliError::schema("fibre_metric", format!("expected a {k}×{k} matrix")));
            }
            let h = h
                .iter()
                .enumerate()
                .map(|(i, row)| parse_row(&chart, row, &format!("fibre_metric[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            b = b.fibre_metric(h);
        }
        if let Some(z) = &self.complement {
            b = b.complement(Self::fields(&chart, z, "complement")?);
        }
        let n = chart.dim();
        if let Some(p) = &self.probes {
            for (i, x) in p.iter().enumerate() {
                check_len(&format!("probes[{i}]"), x, n)?;
            }
            b = b.probes(p.clone());
        }
        if let Some(pb) = &self.probe_box {
            if pb.len() != n {
                return Err(CliError::schema("probe_box", format!("expected {n} intervals, got {}", pb.len())));
            }
            b = b.probe_box(pb.iter().map(|&[lo, hi]| (lo, hi)).collect());
        }
        if let Some(a) = &self.anchor {
            check_len("anchor", a, n)?;
            b = b.anchor(a.clone());
        }
        let t = self.tolerances;
        if !(t.rtol > 0.0 && t.atol > 0.0) {
            return Err(CliError::schema("tolerances", "rtol and atol must be positive".into()));
        }
        if !(t.rank_tol > 0.0 && t.rank_tol < 1.0) {
            return Err(CliError::schema("tolerances.rank_tol", "must lie in (0, 1)".into()));
        }
        let structure = b.rank_tol(t.rank_tol).build().map_err(|e| CliError::schema("frame", e.to_string()))?;
        for (i, spec) in self.tasks.iter().enumerate() {
            check_task(&structure, &spec.task, &format!("tasks[{i}]"))?;
        }
        for (i, name) in self.task_names().iter().enumerate() {
            let safe = !name.is_empty()
                && !name.starts_with('.')
                && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
            if !safe || name == "bundle" || name == "timings" {
                return Err(CliError::schema(&format!("tasks[{i}].name"), format!("`{name}` is not a usable file stem")));
            }
        }
        let mut names: Vec<String> = self.task_names();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::schema("tasks", format!("duplicate task name `{}`", w[0])));
        }
        Ok(Resolved { structure, tolerances: t })
    }

    /// Output file stem of every task.
    pub fn task_names(&self) -> Vec<String> {
        self.tasks
            .iter()
            .enumerate()
            .map(|(i, t)| t.name.clone().unwrap_or_else(|| format!("{i:02}-{}", t.task.kind())))
            .collect()
    }
}

fn parse_row(chart: &Chart, row: &[String], path: &str) -> Result<Vec<Expr>, CliError> {
    row.iter()
        .enumerate()
        .map(|(j, src)| chart.parse(src).map_err(|e| CliError::schema(&format!("{path}[{j}]"), e.to_string())))
        .collect()
}

fn check_len(path: &str, v: &[f64], n: usize) -> Result<(), CliError> {
    if v.len() != n {
        return Err(CliError::schema(path, format!("expected {n} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::schema(path, "entries must be finite".into()));
    }
    Ok(())
}

/// Resolves a field reference against the structure.
pub fn field(s: &SubRiemannianStructure, spec: &FieldSpec, path: &str, in_q: bool) -> Result<VectorField, CliError> {
    let err = |m: String| CliError::schema(path, m);
    match spec {
        FieldSpec::Frame(a) => s.frame().get(*a).cloned().ok_or_else(|| err(format!("frame index {a} out of range"))),
        FieldSpec::Coefficients(c) => {
            if c.len() != s.rank() {
                return Err(err(format!("expected {} coefficients, got {}", s.rank(), c.len())));
            }
            let c = parse_row(s.chart(), c, &format!("{path}.coefficients"))?;
            VectorField::combination(&c, s.frame()).map_err(|e| err(e.to_string()))
        }
        FieldSpec::Components(c) if !in_q => {
            if c.len() != s.dim() {
                return Err(err(format!("expected {} components, got {}", s.dim(), c.len())));
            }
            let c = parse_row(s.chart(), c, &format!("{path}.components"))?;
            VectorField::new(c).map_err(|e| err(e.to_string()))
        }
        FieldSpec::Components(_) => Err(err("a section of Q is required: use `frame` or `coefficients`".into())),
    }
}

/// Frame coefficients of a segment generator.
pub fn segment_coefficients(s: &SubRiemannianStructure, spec: &FieldSpec, path: &str) -> Result<Vec<Expr>, CliError> {
    match spec {
        FieldSpec::Frame(a) if *a < s.rank() => {
            Ok((0..s.rank()).map(|b| if b == *a { Expr::one() } else { Expr::zero() }).collect())
        }
        FieldSpec::Frame(a) => Err(CliError::schema(path, format!("frame index {a} out of range"))),
        FieldSpec::Coefficients(c) if c.len() == s.rank() => parse_row(s.chart(), c, &format!("{path}.coefficients")),
        FieldSpec::Coefficients(c) => {
            Err(CliError::schema(path, format!("expected {} coefficients, got {}", s.rank(), c.len())))
        }
        FieldSpec::Components(_) => {
            Err(CliError::schema(path, "a section of Q is required: use `frame` or `coefficients`".into()))
        }
    }
}

fn check_duration(path: &str, d: f64) -> Result<(), CliError> {
    if !(d.is_finite() && d > 0.0) {
        return Err(CliError::schema(path, "must be positive and finite".into()));
    }
    Ok(())
}

fn check_samples(path: &str, samples: Option<usize>) -> Result<(), CliError> {
    if matches!(samples, Some(m) if m < 2) {
        return Err(CliError::schema(path, "at least two samples are needed".into()));
    }
    Ok(())
}

fn check_segment(s: &SubRiemannianStructure, seg: &SegmentSpec, path: &str) -> Result<(), CliError> {
    segment_coefficients(s, &seg.generator, &format!("{path}.generator"))?;
    if !(seg.t0.is_finite() && seg.t1.is_finite() && seg.t1 > seg.t0) {
        return Err(CliError::schema(path, "needs finite t0 < t1".into()));
    }
    Ok(())
}

fn check_curve(s: &SubRiemannianStructure, c: &CurveSpec, path: &str) -> Result<(), CliError> {
    check_len(&format!("{path}.start"), &c.start, s.dim())?;
    if c.segments.is_empty() {
        return Err(CliError::schema(&format!("{path}.segments"), "at least one segment is required".into()));
    }
    for (i, seg) in c.segments.iter().enumerate() {
        check_segment(s, seg, &format!("{path}.segments[{i}]"))?;
        if i > 0 && seg.t0 != c.segments[i - 1].t1 {
            return Err(CliError::schema(&format!("{path}.segments[{i}].t0"), "segments must abut".into()));
        }
    }
    Ok(())
}

fn check_task(s: &SubRiemannianStructure, task: &Task, path: &str) -> Result<(), CliError> {
    let (n, k) = (s.dim(), s.rank());
    let p = |f: &str| format!("{path}.{f}");
    match task {
        Task::Pointwise(PointwiseTask { point }) => check_len(&p("point"), point, n),
        Task::Filtration(FiltrationTask { point, depth }) => {
            check_len(&p("point"), point, n)?;
            if *depth == 0 {
                return Err(CliError::schema(&p("depth"), "must be positive".into()));
            }
            Ok(())
        }
        Task::Geodesic(GeodesicTask { x0, p0, duration, samples }) => {
            check_len(&p("x0"), x0, n)?;
            check_len(&p("p0"), p0, n)?;
            check_duration(&p("duration"), *duration)?;
            check_samples(&p("samples"), *samples)
        }
        Task::RiemannianGeodesic(RiemannianGeodesicTask { x0, v0, duration, samples }) => {
            check_len(&p("x0"), x0, n)?;
            check_len(&p("v0"), v0, n)?;
            check_duration(&p("duration"), *duration)?;
            check_samples(&p("samples"), *samples)
        }
        Task::Flow(FlowTask { field: f, x0, t0, t1, samples }) => {
            field(s, f, &p("field"), false)?;
            check_len(&p("x0"), x0, n)?;
            if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
                return Err(CliError::schema(path, "needs finite t0 < t1".into()));
            }
            check_samples(&p("samples"), *samples)
        }
        Task::CoadjointTransport(CoadjointTransportTask { start, segment, eta0, samples }) => {
            check_len(&p("start"), start, n)?;
            check_segment(s, segment, &p("segment"))?;
            check_len(&p("eta0"), eta0, n)?;
            check_samples(&p("samples"), *samples)
        }
        Task::PullbackSpan(PullbackSpanTask { curve, samples_per_segment }) | Task::AbnormalTest(AbnormalTestTask { curve, samples_per_segment, .. }) => {
            check_curve(s, curve, &p("curve"))?;
            if *samples_per_segment < 2 {
                return Err(CliError::schema(&p("samples_per_segment"), "must be at least 2".into()));
            }
            if let Task::AbnormalTest(AbnormalTestTask { rank_tol: Some(t), .. }) = task {
                if !(*t > 0.0 && *t < 1.0) {
                    return Err(CliError::schema(&p("rank_tol"), "must lie in (0, 1)".into()));
                }
            }
            Ok(())
        }
        Task::VariationVector(VariationVectorTask { start, segment, field: f, tau, dt }) => {
            check_len(&p("start"), start, n)?;
            check_segment(s, segment, &p("segment"))?;
            field(s, f, &p("field"), true)?;
            if !(*tau >= segment.t0 && *tau <= segment.t1) {
                return Err(CliError::schema(&p("tau"), "must lie in the segment interval".into()));
            }
            if !(*dt >= 0.0 && dt.is_finite()) {
                return Err(CliError::schema(&p("dt"), "must be nonnegative".into()));
            }
            Ok(())
        }
        Task::Nonholonomic(NonholonomicTask { x0, u0, duration, samples }) => {
            check_len(&p("x0"), x0, n)?;
            check_len(&p("u0"), u0, k)?;
            check_duration(&p("duration"), *duration)?;
            check_samples(&p("samples"), *samples)
        }
        Task::AnnihilatorTransport(AnnihilatorTransportTask { x0, u0, duration, eta0, samples }) => {
            check_len(&p("x0"), x0, n)?;
            check_len(&p("u0"), u0, k)?;
            check_len(&p("eta0"), eta0, n)?;
            check_duration(&p("duration"), *duration)?;
            check_samples(&p("samples"), *samples)
        }
        Task::Compatibility(CompatibilityTask { x0, u0, duration, tolerance }) => {
            check_len(&p("x0"), x0, n)?;
            check_len(&p("u0"), u0, k)?;
            check_duration(&p("duration"), *duration)?;
            if !(*tolerance > 0.0) {
                return Err(CliError::schema(&p("tolerance"), "must be positive".into()));
            }
            Ok(())
        }
    }
}
