//! Task execution and result bundle assembly.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};
use subrig::extremals::{
    abnormal_test, coadjoint_transport, hamiltonian, normal_extremal, pullback_span, riemannian_geodesic,
    variation_vector, AbnormalCertificate, CotangentState, GeodesicLiftResiduals, PiecewiseCurveSpec, Segment, Verdict,
};
use subrig::geometry::{MetricField, SubRiemannianStructure};
use subrig::integrate::{flow_with_variational, AdaptiveOptions, Tolerances};
use subrig::linalg;
use subrig::mechanics::{
    compatibility_test, nonholonomic_trajectory, tilde_nabla_b_transport, CandidateKind, CompatibilityReport,
};

use crate::error::CliError;
use crate::output::{to_json, Table};
use crate::scenario::*;

/// Command-line overrides of the scenario tolerances.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
    Indeterminate,
}

/// Bundle entry of one task.
#[derive(Debug, Clone, Serialize)]
pub struct TaskRecord {
    pub name: String,
    pub kind: &'static str,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<&'static str>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario_sha256: String,
    pub tolerances: ToleranceSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultBundle {
    pub provenance: Provenance,
    pub tasks: Vec<TaskRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub tasks: Vec<TaskTiming>,
}

/// Files and verdict produced by a successful task.
struct Produced {
    files: Vec<(String, String)>,
    verdict: Option<&'static str>,
    indeterminate: bool,
}

impl Produced {
    fn new() -> Self {
        Self { files: Vec::new(), verdict: None, indeterminate: false }
    }

    fn json<T: Serialize>(mut self, name: &str, value: &T) -> Self {
        self.files.push((format!("{name}.json"), to_json(value)));
        self
    }

    fn csv(mut self, name: &str, table: &Table) -> Self {
        self.files.push((format!("{name}.csv"), table.to_csv()));
        self
    }
}

struct Outcome {
    record: TaskRecord,
    files: Vec<(String, String)>,
    seconds: f64,
}

impl ResultBundle {
    /// 0 when every task succeeded with a definite verdict, 1 on any failure, 2 on indeterminate verdicts.
    pub fn exit_code(&self) -> i32 {
        if self.tasks.iter().any(|t| t.status == Status::Failed) {
            1
        } else if self.tasks.iter().any(|t| t.status == Status::Indeterminate) {
            2
        } else {
            0
        }
    }
}

struct Context<'a> {
    s: &'a SubRiemannianStructure,
    g: &'a MetricField<'a>,
    tol: Tolerances,
    rank_tol: f64,
}

impl Context<'_> {
    fn options(&self) -> AdaptiveOptions {
        AdaptiveOptions::new(self.tol)
    }
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn list(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Integrator nodes, or a uniform grid of `samples` points.
fn grid(nodes: &[f64], samples: Option<usize>) -> Vec<f64> {
    match samples {
        None => nodes.to_vec(),
        Some(m) => {
            let (a, b) = (nodes[0], nodes[nodes.len() - 1]);
            (0..m).map(|i| if i + 1 == m { b } else { a + (b - a) * i as f64 / (m - 1) as f64 }).collect()
        }
    }
}

fn header(prefix: &str, names: &[String]) -> Vec<String> {
    names.iter().map(|c| format!("{prefix}{c}")).collect()
}

fn indexed(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

fn segment(s: &SubRiemannianStructure, spec: &SegmentSpec, path: &str) -> Result<Segment, CliError> {
    Ok(Segment::new(segment_coefficients(s, &spec.generator, path)?, spec.t0, spec.t1))
}

fn curve(s: &SubRiemannianStructure, spec: &CurveSpec, path: &str) -> Result<PiecewiseCurveSpec, CliError> {
    let segments = spec
        .segments
        .iter()
        .enumerate()
        .map(|(i, seg)| segment(s, seg, &format!("{path}.segments[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PiecewiseCurveSpec::new(spec.start.clone(), segments)?)
}

#[derive(Serialize)]
struct PointwiseReport {
    point: Vec<f64>,
    cometric: Vec<Vec<f64>>,
    metric: Vec<Vec<f64>>,
    metric_inv: Vec<Vec<f64>>,
    pi: Vec<Vec<f64>>,
    pi_perp: Vec<Vec<f64>>,
    tau: Vec<Vec<f64>>,
    tau_perp: Vec<Vec<f64>>,
    /// `christoffel[k][i][j] = Γ^k_ij`.
    christoffel: Vec<Vec<Vec<f64>>>,
    complement_auto_completed: bool,
}

#[derive(Serialize)]
struct FiltrationReport {
    point: Vec<f64>,
    depth: usize,
    dims: Vec<usize>,
    bracket_generating: bool,
}

#[derive(Serialize)]
struct GeodesicReport {
    samples: usize,
    hamiltonian: f64,
    hamiltonian_drift: f64,
    admissibility_residual: f64,
    end_point: Vec<f64>,
    end_covector: Vec<f64>,
}

#[derive(Serialize)]
struct RiemannianGeodesicReport {
    samples: usize,
    tangency_residual: f64,
    lift_admissibility_residual: f64,
    lift_dynamics_residual: f64,
    end_point: Vec<f64>,
    end_velocity: Vec<f64>,
}

#[derive(Serialize)]
struct FlowReport {
    samples: usize,
    min_abs_det: f64,
    near_singular_at: Option<f64>,
    end_point: Vec<f64>,
    end_jacobian: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct CovectorReport {
    samples: usize,
    end_point: Vec<f64>,
    end_covector: Vec<f64>,
}

#[derive(Serialize)]
struct PullbackReport {
    rows: usize,
    columns: usize,
    rank: usize,
    singular_values: Vec<f64>,
    matrix: Vec<Vec<f64>>,
}

/// Key order of the certificate is part of the output contract.
#[derive(Serialize)]
struct CertificateReport {
    rank: usize,
    singular_values: Vec<f64>,
    annihilator: Vec<Vec<f64>>,
    residual_max: Option<f64>,
    verdict: &'static str,
    rank_tol: f64,
    sigma_ratio: f64,
    transport_residuals: Vec<f64>,
    advice: Option<String>,
}

#[derive(Serialize)]
struct VariationReport {
    tau: f64,
    dt: f64,
    vector: Vec<f64>,
}

#[derive(Serialize)]
struct NonholonomicReport {
    samples: usize,
    energy: f64,
    energy_drift: f64,
    constraint_residual: f64,
    end_point: Vec<f64>,
    end_quasi_velocity: Vec<f64>,
}

#[derive(Serialize)]
struct TransportReport {
    samples: usize,
    equation_residual: f64,
    annihilation_defect: f64,
    end_point: Vec<f64>,
    end_covector: Vec<f64>,
}

#[derive(Serialize)]
struct CandidateSummary {
    kind: String,
    eta0: Vec<f64>,
    pi_b_max: f64,
    q_defect: f64,
    bracket_defect: f64,
    equation_residual: f64,
    worst: f64,
}

#[derive(Serialize)]
struct LiftSummary {
    samples: usize,
    admissibility_residual: f64,
    auto_parallel_residual: f64,
}

#[derive(Serialize)]
struct CompatibilityJson {
    verdict: &'static str,
    vacuous_annihilator: bool,
    tolerance: f64,
    pi_g_max: f64,
    initial_annihilator: Vec<Vec<f64>>,
    best: usize,
    candidates: Vec<CandidateSummary>,
    lift: Option<LiftSummary>,
}

fn kind_name(k: CandidateKind) -> String {
    match k {
        CandidateKind::Particular => "particular".into(),
        CandidateKind::LeastSquares => "least_squares".into(),
        CandidateKind::Basis(i) => format!("basis_{i}"),
    }
}

fn certificate_json(c: &AbnormalCertificate) -> CertificateReport {
    CertificateReport {
        rank: c.rank,
        singular_values: c.singular_values.clone(),
        annihilator: c.annihilator.iter().map(list).collect(),
        residual_max: c.residual_max(),
        verdict: c.verdict.as_str(),
        rank_tol: c.rank_tol,
        sigma_ratio: c.sigma_ratio(),
        transport_residuals: c.transport_residuals.clone(),
        advice: c.advice.clone(),
    }
}

fn compatibility_json(r: &CompatibilityReport) -> CompatibilityJson {
    CompatibilityJson {
        verdict: r.verdict.as_str(),
        vacuous_annihilator: r.vacuous_annihilator,
        tolerance: r.tolerance,
        pi_g_max: r.pi_g_max,
        initial_annihilator: r.initial_annihilator.iter().map(list).collect(),
        best: r.best,
        candidates: r
            .candidates
            .iter()
            .map(|c| CandidateSummary {
                kind: kind_name(c.kind),
                eta0: list(&c.eta0),
                pi_b_max: c.pi_b_profile.iter().copied().fold(0.0, f64::max),
                q_defect: c.q_defect,
                bracket_defect: c.bracket_defect,
                equation_residual: c.equation_residual,
                worst: c.worst(),
            })
            .collect(),
        lift: r.lift.as_ref().map(|l| LiftSummary {
            samples: l.times.len(),
            admissibility_residual: l.admissibility_residual,
            auto_parallel_residual: l.auto_parallel_residual,
        }),
    }
}

fn execute(cx: &Context<'_>, name: &str, task: &Task, path: &str) -> Result<Produced, CliError> {
    let (s, g) = (cx.s, cx.g);
    let coords = s.chart().names().to_vec();
    let (n, k) = (s.dim(), s.rank());
    let mut base = vec!["t".to_string()];
    base.extend(coords.iter().cloned());
    let out = Produced::new();
    Ok(match task {
        Task::Pointwise(PointwiseTask { point }) => {
            let p = g.at(point)?;
            let pr = p.projections();
            let report = PointwiseReport {
                point: point.clone(),
                cometric: rows(p.cometric()),
                metric: rows(&p.metric),
                metric_inv: rows(&p.metric_inv),
                pi: rows(&pr.pi),
                pi_perp: rows(&pr.pi_perp),
                tau: rows(&pr.tau),
                tau_perp: rows(&pr.tau_perp),
                christoffel: p.christoffel.gamma.iter().map(rows).collect(),
                complement_auto_completed: g.is_auto_completed(),
            };
            out.json(name, &report)
        }
        Task::Filtration(FiltrationTask { point, depth }) => {
            let f = s.bracket_filtration(point, *depth)?;
            let report =
                FiltrationReport { point: point.clone(), depth: *depth, dims: f.dims, bracket_generating: f.bracket_generating };
            out.json(name, &report)
        }
        Task::Geodesic(GeodesicTask { x0, p0, duration, samples }) => {
            let p0 = vector(p0);
            let c = normal_extremal(s, x0, &p0, *duration, cx.options())?;
            let mut table = Table::new([base.clone(), header("p_", &coords)].concat());
            let times = grid(c.times(), *samples);
            for &t in &times {
                let st = c.state_at(t)?;
                table.push([vec![t], st.x, list(&st.p)].concat());
            }
            let end = c.last();
            let report = GeodesicReport {
                samples: times.len(),
                hamiltonian: hamiltonian(s, &CotangentState::new(x0.clone(), p0))?,
                hamiltonian_drift: c.hamiltonian_drift(s)?,
                admissibility_residual: c.admissibility_residual(s)?,
                end_point: end.x,
                end_covector: list(&end.p),
            };
            out.csv(name, &table).json(name, &report)
        }
        Task::RiemannianGeodesic(RiemannianGeodesicTask { x0, v0, duration, samples }) => {
            let tr = riemannian_geodesic(g, x0, &vector(v0), *duration, cx.options())?;
            let mut table = Table::new([base.clone(), header("v_", &coords)].concat());
            let times = grid(tr.times(), *samples);
            for &t in &times {
                table.push([vec![t], list(&tr.at(t)?)].concat());
            }
            let res = GeodesicLiftResiduals::of(g, &tr)?;
            let last = tr.last();
            let report = RiemannianGeodesicReport {
                samples: times.len(),
                tangency_residual: res.tangency,
                lift_admissibility_residual: res.admissibility,
                lift_dynamics_residual: res.dynamics,
                end_point: last.rows(0, n).iter().copied().collect(),
                end_velocity: last.rows(n, n).iter().copied().collect(),
            };
            out.csv(name, &table).json(name, &report)
        }
        Task::Flow(FlowTask { field: f, x0, t0, t1, samples }) => {
            let x = field(s, f, &format!("{path}.field"), false)?;
            let flow = flow_with_variational(&x, x0, *t0, *t1, cx.tol)?;
            let jac: Vec<String> = (1..=n).flat_map(|i| (1..=n).map(move |j| format!("J_{i}_{j}"))).collect();
            let mut table = Table::new([base.clone(), jac].concat());
            let times = grid(flow.trajectory().times(), *samples);
            for &t in &times {
                let (x, j, _) = flow.state_at(t)?;
                table.push([vec![t], x, rows(&j).concat()].concat());
            }
            let (end, j, _) = flow.end_state();
            let report = FlowReport {
                samples: times.len(),
                min_abs_det: flow.min_abs_det(),
                near_singular_at: flow.near_singular_at(),
                end_point: end,
                end_jacobian: rows(&j),
            };
            out.csv(name, &table).json(name, &report)
        }
        Task::CoadjointTransport(CoadjointTransportTask { start, segment: seg, eta0, samples }) => {
            let seg = segment(s, seg, &format!("{path}.segment"))?;
            let c = coadjoint_transport(s, &seg, start, &vector(eta0), cx.tol)?;
            let mut table = Table::new([base.clone(), header("eta_", &coords)].concat());
            let times = grid(c.trajectory().times(), *samples);
            for &t in &times {
                table.push([vec![t], list(&c.trajectory().at(t)?)].concat());
            }
            let last = c.trajectory().last();
            let report = CovectorReport {
                samples: times.len(),
                end_point: last.rows(0, n).iter().copied().collect(),
                end_covector: list(&c.end_covector()),
            };
            out.csv(name, &table).json(name, &report)
        }
        Task::PullbackSpan(PullbackSpanTask { curve: spec, samples_per_segment }) => {
            let spec = curve(s, spec, &format!("{path}.curve"))?;
            let m = pullback_span(s, &spec, *samples_per_segment, cx.tol)?;
            let sigma = linalg::singular_values(&m);
            let report = PullbackReport {
                rows: m.nrows(),
                columns: m.ncols(),
                rank: linalg::numerical_rank(&sigma, cx.rank_tol),
                singular_values: sigma,
                matrix: rows(&m),
            };
            out.json(name, &report)
        }
        Task::AbnormalTest(AbnormalTestTask { curve: spec, samples_per_segment, rank_tol }) => {
            let spec = curve(s, spec, &format!("{path}.curve"))?;
            let cert = abnormal_test(s, &spec, *samples_per_segment, rank_tol.unwrap_or(cx.rank_tol), cx.tol)?;
            let mut out = out.json(name, &certificate_json(&cert));
            if !cert.profiles.is_empty() {
                let mut table = Table::new([vec!["t".to_string()], indexed("defect_", cert.profiles.len())].concat());
                for (j, &t) in cert.profile_times.iter().enumerate() {
                    table.push([vec![t], cert.profiles.iter().map(|p| p[j]).collect()].concat());
                }
                out = out.csv(&format!("{name}-profiles"), &table);
            }
            out.verdict = Some(cert.verdict.as_str());
            out.indeterminate = cert.verdict == Verdict::Indeterminate;
            out
        }
        Task::VariationVector(VariationVectorTask { start, segment: seg, field: f, tau, dt }) => {
            let seg = segment(s, seg, &format!("{path}.segment"))?;
            let y = field(s, f, &format!("{path}.field"), true)?;
            let v = variation_vector(s, start, &seg, &y, *tau, *dt, cx.tol)?;
            out.json(name, &VariationReport { tau: *tau, dt: *dt, vector: list(&v) })
        }
        Task::Nonholonomic(NonholonomicTask { x0, u0, duration, samples }) => {
            let tr = nonholonomic_trajectory(g, x0, &vector(u0), *duration, cx.options())?;
            let mut table = Table::new([base.clone(), indexed("u_", k)].concat());
            let times = grid(tr.times(), *samples);
            for &t in &times {
                let st = tr.state_at(t)?;
                table.push([vec![t], st.x, list(&st.u)].concat());
            }
            let st0 = tr.start();
            let v0 = s.frame_matrix(&st0.x)? * &st0.u;
            let end = tr.state_at(tr.t1())?;
            let report = NonholonomicReport {
                samples: times.len(),
                energy: 0.5 * s.fibre_norm_squared(&st0.x, &v0)?,
                energy_drift: tr.energy_drift(g)?,
                constraint_residual: tr.constraint_residual(g)?,
                end_point: end.x,
                end_quasi_velocity: list(&end.u),
            };
            out.csv(name, &table).json(name, &report)
        }
        Task::AnnihilatorTransport(AnnihilatorTransportTask { x0, u0, duration, eta0, samples }) => {
            let tr = nonholonomic_trajectory(g, x0, &vector(u0), *duration, cx.options())?;
            let eta = tilde_nabla_b_transport(g, &tr, &vector(eta0), cx.options())?;
            let mut table = Table::new([base.clone(), indexed("u_", k), header("eta_", &coords)].concat());
            let times = grid(eta.times(), *samples);
            let mut defect: f64 = 0.0;
            for &t in &times {
                let (x, u, e) = eta.sample_at(g, t)?;
                defect = defect.max((s.frame_matrix(&x)?.transpose() * &e).amax());
                table.push([vec![t], x.clone(), list(&u), list(&e)].concat());
            }
            let (end_x, _, end_eta) = eta.sample_at(g, tr.t1())?;
            let report = TransportReport {
                samples: times.len(),
                equation_residual: eta.equation_residual(g)?,
                annihilation_defect: defect,
                end_point: end_x,
                end_covector: list(&end_eta),
            };
            out.csv(name, &table).json(name, &report)
        }
        Task::Compatibility(CompatibilityTask { x0, u0, duration, tolerance }) => {
            let tr = nonholonomic_trajectory(g, x0, &vector(u0), *duration, cx.options())?;
            let report = compatibility_test(g, &tr, *tolerance, cx.options())?;
            let mut out = out.json(name, &compatibility_json(&report));
            if let Some(lift) = &report.lift {
                let mut table = Table::new([base.clone(), header("alpha_", &coords)].concat());
                for ((t, x), a) in lift.times.iter().zip(&lift.points).zip(&lift.covectors) {
                    table.push([vec![*t], x.clone(), list(a)].concat());
                }
                out = out.csv(&format!("{name}-lift"), &table);
            }
            out.verdict = Some(report.verdict.as_str());
            out
        }
    })
}

fn run_one(cx: &Context<'_>, name: &str, task: &Task, path: &str) -> Outcome {
    let start = Instant::now();
    let result = execute(cx, name, task, path);
    let seconds = start.elapsed().as_secs_f64();
    let kind = task.kind();
    match result {
        Ok(p) => Outcome {
            record: TaskRecord {
                name: name.to_string(),
                kind,
                status: if p.indeterminate { Status::Indeterminate } else { Status::Ok },
                verdict: p.verdict,
                files: p.files.iter().map(|(f, _)| f.clone()).collect(),
                error: None,
            },
            files: p.files,
            seconds,
        },
        Err(e) => Outcome {
            record: TaskRecord {
                name: name.to_string(),
                kind,
                status: Status::Failed,
                verdict: None,
                files: Vec::new(),
                error: Some(e.to_string()),
            },
            files: Vec::new(),
            seconds,
        },
    }
}

/// Runs every task and writes its files, `bundle.json` and the `timings.json` sidecar into `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path, parallel: bool, overrides: Overrides) -> Result<ResultBundle, CliError> {
    let mut scenario = scenario.clone();
    let t = &mut scenario.tolerances;
    t.rtol = overrides.rtol.unwrap_or(t.rtol);
    t.atol = overrides.atol.unwrap_or(t.atol);
    t.rank_tol = overrides.rank_tol.unwrap_or(t.rank_tol);
    let resolved = scenario.validate()?;
    let s = &resolved.structure;
    let g = s.riemannian_extension()?;
    let cx = Context {
        s,
        g: &g,
        tol: Tolerances::new(resolved.tolerances.rtol, resolved.tolerances.atol),
        rank_tol: resolved.tolerances.rank_tol,
    };
    let names = scenario.task_names();
    let paths: Vec<String> = (0..names.len()).map(|i| format!("tasks[{i}]")).collect();
    let start = Instant::now();
    let outcomes: Vec<Outcome> = if parallel {
        std::thread::scope(|scope| {
            let cx = &cx;
            let handles: Vec<_> = scenario
                .tasks
                .iter()
                .zip(&names)
                .zip(&paths)
                .map(|((spec, name), path)| scope.spawn(move || run_one(cx, name, &spec.task, path)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("task thread panicked")).collect()
        })
    } else {
        scenario.tasks.iter().zip(&names).zip(&paths).map(|((spec, name), path)| run_one(&cx, name, &spec.task, path)).collect()
    };
    let total_seconds = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let write = |file: &str, contents: &str| {
        let p = out_dir.join(file);
        std::fs::write(&p, contents).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    };
    for o in &outcomes {
        for (file, contents) in &o.files {
            write(file, contents)?;
        }
    }
    let bundle = ResultBundle {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scenario_sha256: hex::encode(Sha256::digest(scenario.to_json().as_bytes())),
            tolerances: resolved.tolerances,
        },
        tasks: outcomes.iter().map(|o| o.record.clone()).collect(),
    };
    write("bundle.json", &to_json(&bundle))?;
    let timings = Timings {
        total_seconds,
        tasks: outcomes.iter().map(|o| TaskTiming { name: o.record.name.clone(), seconds: o.seconds }).collect(),
    };
    write("timings.json", &to_json(&timings))?;
    Ok(bundle)
}
