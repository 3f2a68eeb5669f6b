//! Schema resolution: every string of the config is parsed here, before any
//! computation, so malformed input always exits with code 2.

use fedwhit::coeff::{parse_poly, Ctx, Matrix, Monomial, Scalar, VarClass, VarContext};
use fedwhit::equivariance::{DiffOp, EquivalenceAnsatz};
use fedwhit::geometry::ConnectionMode;
use fedwhit::{Gaussian, Poly};

use crate::config::*;
use crate::error::{CliError, CliResult};

pub type PolyMatrix = Vec<Vec<Poly>>;
pub type Pair = (Poly, Poly);

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub order: Option<u32>,
    pub truncation: Option<u32>,
    pub no_symmetrize: bool,
}

#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub ctx: Ctx,
    pub pi: Option<PolyMatrix>,
    pub omega: Option<PolyMatrix>,
    pub bound: u32,
}

#[derive(Debug, Clone)]
pub enum ConnSpec {
    Flat,
    Metric { eta: PolyMatrix, mode: ConnectionMode },
    Explicit(Vec<PolyMatrix>),
}

#[derive(Debug, Clone)]
pub struct SubsetSpec {
    pub generators: Vec<Poly>,
    pub order: u32,
    pub bound: u32,
}

#[derive(Debug, Clone)]
pub enum ActionSpec {
    Finite { elements: Vec<Matrix<Gaussian>>, table: Option<Vec<Vec<usize>>> },
    Infinitesimal(Matrix<Gaussian>),
}

#[derive(Debug, Clone)]
pub struct ReductionSpec {
    pub chart: ChartSpec,
    pub conn: ConnSpec,
    pub projection: Vec<Poly>,
    pub subset: SubsetSpec,
}

/// A product compared against in an `equiv` task.
#[derive(Debug, Clone)]
pub enum Other {
    Against { conn: ConnSpec, offset: Vec<(u32, PolyMatrix)> },
    Gauge(Vec<DiffOp<Gaussian>>),
}

#[derive(Debug, Clone)]
pub enum TaskSpec {
    Validate,
    Connection,
    Fedosov { n: u32, elements: Vec<Vec<u32>>, emit_r: bool },
    Star { k: u32, n: u32, pairs: Vec<Pair>, random: Option<RandomBattery>, axioms: bool, associativity: Option<RandomBattery> },
    WhitneyStar { k: u32, n: u32, pairs: Vec<Pair>, independence: Option<RandomBattery>, associativity: Option<RandomBattery> },
    Invariance { k: u32, n: u32, pairs: Vec<Pair>, random: Option<RandomBattery>, use_subset: bool },
    ReduceCheck { k: u32, n: u32, pairs: Vec<Pair>, random: Option<RandomBattery>, sample: Option<Vec<Poly>> },
    Equiv { k: u32, n: u32, other: Other, ansatz: EquivalenceAnsatz, pairs: Vec<Pair>, held_out: Option<RandomBattery> },
}

impl TaskSpec {
    /// Execution phase: validate → connection → fedosov → consumers.
    pub fn phase(&self) -> u8 {
        match self {
            TaskSpec::Validate => 0,
            TaskSpec::Connection => 1,
            TaskSpec::Fedosov { .. } => 2,
            _ => 3,
        }
    }

    pub fn order(&self) -> Option<u32> {
        match self {
            TaskSpec::Validate | TaskSpec::Connection | TaskSpec::Fedosov { .. } => None,
            TaskSpec::Star { k, .. }
            | TaskSpec::WhitneyStar { k, .. }
            | TaskSpec::Invariance { k, .. }
            | TaskSpec::ReduceCheck { k, .. }
            | TaskSpec::Equiv { k, .. } => Some(*k),
        }
    }

    pub fn truncation(&self) -> Option<u32> {
        match self {
            TaskSpec::Validate | TaskSpec::Connection => None,
            TaskSpec::Fedosov { n, .. }
            | TaskSpec::Star { n, .. }
            | TaskSpec::WhitneyStar { n, .. }
            | TaskSpec::Invariance { n, .. }
            | TaskSpec::ReduceCheck { n, .. }
            | TaskSpec::Equiv { n, .. } => Some(*n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedTask {
    pub kind: &'static str,
    pub name: Option<String>,
    pub spec: TaskSpec,
}

#[derive(Debug, Clone)]
pub struct Job {
    pub seed: u64,
    pub chart: ChartSpec,
    pub conn: ConnSpec,
    pub offset: Vec<(u32, PolyMatrix)>,
    pub subset: Option<SubsetSpec>,
    pub action: Option<ActionSpec>,
    pub reduction: Option<ReductionSpec>,
    pub tasks: Vec<NamedTask>,
}

fn poly(ctx: &Ctx, path: &str, s: &str) -> CliResult<Poly> {
    parse_poly(ctx, s).map_err(|e| CliError::schema(path, format!("`{s}`: {e}")))
}

fn polys(ctx: &Ctx, path: &str, v: &[String]) -> CliResult<Vec<Poly>> {
    v.iter().enumerate().map(|(i, s)| poly(ctx, &format!("{path}[{i}]"), s)).collect()
}

fn poly_matrix(ctx: &Ctx, path: &str, m: &StrMatrix) -> CliResult<PolyMatrix> {
    m.iter().enumerate().map(|(i, r)| polys(ctx, &format!("{path}[{i}]"), r)).collect()
}

fn scalar(ctx: &Ctx, path: &str, s: &str) -> CliResult<Gaussian> {
    let p = poly(ctx, path, s)?;
    if !p.is_constant() {
        return Err(CliError::schema(path, format!("`{s}` is not a constant")));
    }
    Ok(p.constant_term())
}

fn scalar_matrix(ctx: &Ctx, path: &str, m: &StrMatrix) -> CliResult<Matrix<Gaussian>> {
    let rows = m
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().enumerate().map(|(j, s)| scalar(ctx, &format!("{path}[{i}][{j}]"), s)).collect())
        .collect::<CliResult<Vec<Vec<Gaussian>>>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::schema(path, "expected a non-empty square matrix"));
    }
    Ok(Matrix::from_rows(rows))
}

fn pairs(ctx: &Ctx, path: &str, v: &[[String; 2]]) -> CliResult<Vec<Pair>> {
    v.iter()
        .enumerate()
        .map(|(i, [a, b])| Ok((poly(ctx, &format!("{path}[{i}][0]"), a)?, poly(ctx, &format!("{path}[{i}][1]"), b)?)))
        .collect()
}

fn chart(path: &str, c: &ChartConfig) -> CliResult<ChartSpec> {
    let leaf: Vec<&str> = c.leaf.iter().map(String::as_str).collect();
    let transverse: Vec<&str> = c.transverse.iter().map(String::as_str).collect();
    let ctx = VarContext::base(&leaf, &transverse).map_err(|e| CliError::schema(&format!("{path}.leaf"), e))?;
    let pi = c.pi.as_ref().map(|m| poly_matrix(&ctx, &format!("{path}.pi"), m)).transpose()?;
    let omega = c.omega.as_ref().map(|m| poly_matrix(&ctx, &format!("{path}.omega"), m)).transpose()?;
    Ok(ChartSpec { ctx, pi, omega, bound: c.bound })
}

fn connection(path: &str, ctx: &Ctx, c: Option<&ConnectionConfig>, ov: &Overrides) -> CliResult<ConnSpec> {
    let Some(c) = c else { return Ok(ConnSpec::Flat) };
    let stray = |field: &str, present: bool| {
        if present {
            Err(CliError::schema(&format!("{path}.{field}"), format!("not accepted for kind {:?}", c.kind)))
        } else {
            Ok(())
        }
    };
    match c.kind {
        ConnectionKind::Flat => {
            stray("metric", c.metric.is_some())?;
            stray("mode", c.mode.is_some())?;
            stray("gamma", c.gamma.is_some())?;
            Ok(ConnSpec::Flat)
        }
        ConnectionKind::Metric => {
            stray("gamma", c.gamma.is_some())?;
            let m = c.metric.as_ref().ok_or_else(|| CliError::schema(&format!("{path}.metric"), "required for kind metric"))?;
            let eta = poly_matrix(ctx, &format!("{path}.metric"), m)?;
            let mode = match (ov.no_symmetrize, c.mode) {
                (true, _) | (false, Some(ModeConfig::Literal)) => ConnectionMode::Literal,
                _ => ConnectionMode::Symmetric,
            };
            Ok(ConnSpec::Metric { eta, mode })
        }
        ConnectionKind::Explicit => {
            stray("metric", c.metric.is_some())?;
            stray("mode", c.mode.is_some())?;
            let g = c.gamma.as_ref().ok_or_else(|| CliError::schema(&format!("{path}.gamma"), "required for kind explicit"))?;
            let gamma = g
                .iter()
                .enumerate()
                .map(|(k, m)| poly_matrix(ctx, &format!("{path}.gamma[{k}]"), m))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(ConnSpec::Explicit(gamma))
        }
    }
}

fn offset(path: &str, ctx: &Ctx, terms: &[OffsetTerm]) -> CliResult<Vec<(u32, PolyMatrix)>> {
    terms
        .iter()
        .enumerate()
        .map(|(i, t)| Ok((t.hbar, poly_matrix(ctx, &format!("{path}[{i}].form"), &t.form)?)))
        .collect()
}

fn subset(path: &str, ctx: &Ctx, s: &SubsetConfig) -> CliResult<SubsetSpec> {
    if s.generators.is_empty() {
        return Err(CliError::schema(&format!("{path}.generators"), "at least one generator is required"));
    }
    Ok(SubsetSpec { generators: polys(ctx, &format!("{path}.generators"), &s.generators)?, order: s.order, bound: s.bound })
}

fn action(ctx: &Ctx, a: &ActionConfig) -> CliResult<ActionSpec> {
    let n = ctx.len();
    let sized = |path: &str, m: Matrix<Gaussian>| {
        if m.nrows() != n {
            Err(CliError::schema(path, format!("expected a {n}×{n} matrix")))
        } else {
            Ok(m)
        }
    };
    match a.kind {
        ActionKind::Finite => {
            if a.generator.is_some() {
                return Err(CliError::schema("action.generator", "not accepted for kind finite"));
            }
            let els = a.elements.as_ref().ok_or_else(|| CliError::schema("action.elements", "required for kind finite"))?;
            let elements = els
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let path = format!("action.elements[{i}]");
                    sized(&path, scalar_matrix(ctx, &path, m)?)
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(ActionSpec::Finite { elements, table: a.table.clone() })
        }
        ActionKind::Infinitesimal => {
            if a.elements.is_some() || a.table.is_some() {
                return Err(CliError::schema("action.elements", "not accepted for kind infinitesimal"));
            }
            let g = a.generator.as_ref().ok_or_else(|| CliError::schema("action.generator", "required for kind infinitesimal"))?;
            Ok(ActionSpec::Infinitesimal(sized("action.generator", scalar_matrix(ctx, "action.generator", g)?)?))
        }
    }
}

fn gauge(path: &str, ctx: &Ctx, terms: &[GaugeTerm]) -> CliResult<Vec<DiffOp<Gaussian>>> {
    let depth = terms.iter().map(|t| t.hbar).max().unwrap_or(0) as usize;
    let mut per: Vec<Vec<(Monomial, Poly)>> = vec![Vec::new(); depth];
    for (i, t) in terms.iter().enumerate() {
        let p = format!("{path}[{i}]");
        if t.hbar == 0 {
            return Err(CliError::schema(&format!("{p}.hbar"), "gauge terms start at hbar^1"));
        }
        let d = poly(ctx, &format!("{p}.derivative"), &t.derivative)?;
        let mono = match d.leading() {
            Some((m, c)) if d.len() == 1 && *c == Gaussian::from_i64(1) => m.clone(),
            _ => return Err(CliError::schema(&format!("{p}.derivative"), format!("`{}` is not a monomial", t.derivative))),
        };
        if ctx.indices_of_class(VarClass::TransverseBase).iter().any(|&v| mono.exp(v) > 0) {
            return Err(CliError::schema(&format!("{p}.derivative"), "only leaf derivatives are allowed"));
        }
        per[t.hbar as usize - 1].push((mono, poly(ctx, &format!("{p}.coeff"), &t.coeff)?));
    }
    per.into_iter()
        .map(|terms| DiffOp::from_terms(ctx, terms).map_err(|e| CliError::schema(path, e)))
        .collect()
}

fn battery_pairs(ctx: &Ctx, path: &str, v: &[[String; 2]], random: Option<RandomBattery>) -> CliResult<Vec<Pair>> {
    let p = pairs(ctx, path, v)?;
    if p.is_empty() && random.is_none() {
        return Err(CliError::schema(path, "give `pairs` or a `random` battery"));
    }
    Ok(p)
}

impl Job {
    pub fn resolve(cfg: &JobConfig, ov: &Overrides) -> CliResult<Job> {
        let main = chart("chart", &cfg.chart)?;
        let ctx = main.ctx.clone();
        let conn = connection("connection", &ctx, cfg.connection.as_ref(), ov)?;
        let off = offset("offset", &ctx, &cfg.offset)?;
        let sub = cfg.subset.as_ref().map(|s| subset("subset", &ctx, s)).transpose()?;
        let act = cfg.action.as_ref().map(|a| action(&ctx, a)).transpose()?;
        let red = match &cfg.reduction {
            None => None,
            Some(r) => {
                let down = chart("reduction.chart", &r.chart)?;
                let conn = connection("reduction.connection", &down.ctx, r.connection.as_ref(), ov)?;
                let projection = polys(&ctx, "reduction.projection", &r.projection)?;
                let subset = subset("reduction.subset", &down.ctx, &r.subset)?;
                Some(ReductionSpec { chart: down, conn, projection, subset })
            }
        };

        let k_of = |task: Option<u32>| ov.order.or(task).or(cfg.order).unwrap_or(2);
        let n_of = |task: Option<u32>, k: u32| ov.truncation.or(task).or(cfg.truncation).unwrap_or((2 * k).max(2));
        let mut tasks = Vec::new();
        for (i, t) in cfg.tasks.iter().enumerate() {
            let path = format!("tasks[{i}]");
            let need = |what: &str, present: bool| {
                if present {
                    Ok(())
                } else {
                    Err(CliError::schema(&path, format!("task kind {} needs a `{what}` block", t.kind())))
                }
            };
            let spec = match t {
                TaskConfig::Validate(_) => TaskSpec::Validate,
                TaskConfig::Connection(_) => TaskSpec::Connection,
                TaskConfig::Fedosov(f) => {
                    let n = n_of(f.truncation, k_of(None));
                    let r = ctx.indices_of_class(VarClass::LeafBase).len();
                    let elements = match &f.elements {
                        Some(e) => {
                            if let Some(bad) = e.iter().position(|a| a.len() != r) {
                                return Err(CliError::schema(
                                    &format!("{path}.elements[{bad}]"),
                                    format!("expected {r} fiber exponents"),
                                ));
                            }
                            e.clone()
                        }
                        None => default_elements(r),
                    };
                    TaskSpec::Fedosov { n, elements, emit_r: f.emit_r.unwrap_or(true) }
                }
                TaskConfig::Star(s) => {
                    let k = k_of(s.order);
                    TaskSpec::Star {
                        k,
                        n: n_of(s.truncation, k),
                        pairs: battery_pairs(&ctx, &format!("{path}.pairs"), &s.pairs, s.random)?,
                        random: s.random,
                        axioms: s.axioms,
                        associativity: s.associativity,
                    }
                }
                TaskConfig::WhitneyStar(s) => {
                    need("subset", sub.is_some())?;
                    let k = k_of(s.order);
                    let p = pairs(&ctx, &format!("{path}.pairs"), &s.pairs)?;
                    if p.is_empty() && s.independence.is_none() && s.associativity.is_none() {
                        return Err(CliError::schema(&path, "give `pairs`, `independence` or `associativity`"));
                    }
                    TaskSpec::WhitneyStar {
                        k,
                        n: n_of(s.truncation, k),
                        pairs: p,
                        independence: s.independence,
                        associativity: s.associativity,
                    }
                }
                TaskConfig::Invariance(s) => {
                    need("action", act.is_some())?;
                    if s.random.is_some() && matches!(act, Some(ActionSpec::Infinitesimal(_))) {
                        need("reduction", red.is_some())?;
                    }
                    let k = k_of(s.order);
                    TaskSpec::Invariance {
                        k,
                        n: n_of(s.truncation, k),
                        pairs: battery_pairs(&ctx, &format!("{path}.pairs"), &s.pairs, s.random)?,
                        random: s.random,
                        use_subset: s.use_subset.unwrap_or(true) && sub.is_some(),
                    }
                }
                TaskConfig::ReduceCheck(s) => {
                    need("reduction", red.is_some())?;
                    need("subset", sub.is_some())?;
                    let down = &red.as_ref().unwrap().chart.ctx;
                    let k = k_of(s.order);
                    TaskSpec::ReduceCheck {
                        k,
                        n: n_of(s.truncation, k),
                        pairs: battery_pairs(down, &format!("{path}.pairs"), &s.pairs, s.random)?,
                        random: s.random,
                        sample: s.sample.as_ref().map(|v| polys(down, &format!("{path}.sample"), v)).transpose()?,
                    }
                }
                TaskConfig::Equiv(s) => {
                    let k = k_of(s.order);
                    let other = match (&s.against, &s.gauge) {
                        (Some(a), None) => Other::Against {
                            conn: connection(&format!("{path}.against.connection"), &ctx, a.connection.as_ref(), ov)?,
                            offset: offset(&format!("{path}.against.offset"), &ctx, &a.offset)?,
                        },
                        (None, Some(g)) => Other::Gauge(gauge(&format!("{path}.gauge"), &ctx, g)?),
                        _ => return Err(CliError::schema(&path, "give exactly one of `against` and `gauge`")),
                    };
                    let a = &s.ansatz;
                    let ansatz = EquivalenceAnsatz {
                        coefficient_degree: a.coefficient_degree,
                        derivative_order: a.derivative_order,
                        battery_degree: a.battery_degree,
                        jet_order: a.jet_order,
                    };
                    TaskSpec::Equiv {
                        k,
                        n: n_of(s.truncation, k),
                        other,
                        ansatz,
                        pairs: pairs(&ctx, &format!("{path}.pairs"), &s.pairs)?,
                        held_out: s.held_out,
                    }
                }
            };
            tasks.push(NamedTask { kind: t.kind(), name: t.name().map(str::to_owned), spec });
        }
        Ok(Job { seed: cfg.seed, chart: main, conn, offset: off, subset: sub, action: act, reduction: red, tasks })
    }
}

/// `1`, every `y^i` and every `y^i y^j` with `i < j`.
fn default_elements(r: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; r]];
    for i in 0..r {
        let mut e = vec![0; r];
        e[i] = 1;
        out.push(e);
    }
    for i in 0..r {
        for j in i + 1..r {
            let mut e = vec![0; r];
            e[i] = 1;
            e[j] = 1;
            out.push(e);
        }
    }
    out
}
