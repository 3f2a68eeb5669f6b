//! Task execution. Tasks run in dependency order (validate → connection →
//! fedosov → consumers) and are reported in declared order.

use std::path::PathBuf;
use std::sync::Arc;

use fedwhit::coeff::{Monomial, Scalar, Series};
use fedwhit::equivariance::{
    equivalence_solve, equivalence_validate, invariance_check, projection_check, reduction_compare, GaugedStar,
    GroupAction, PolyMap, ReductionSetup,
};
use fedwhit::fedosov::{associativity_residuals, star_axioms_check, StarOracle, StarProduct};
use fedwhit::geometry::check_poisson_connection;
use fedwhit::report::{Check, Report};
use fedwhit::weyl::{WeylElement, WeylKey};
use fedwhit::whitney::{jet_map, representative_independence, whitney_associativity, whitney_star, WhitneySubset};
use fedwhit::{Error, Gaussian, Poly};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RandomBattery;
use crate::engine::{build_connection, build_offset, validated_chart, Chart, Connection, StateCache};
use crate::error::{CliError, CliResult};
use crate::job::{ActionSpec, Job, NamedTask, Other, Pair, SubsetSpec, TaskSpec};
use crate::output::{CheckOut, Emitted, RunReport, Status, TaskReport};

type Sp = Arc<StarProduct<Gaussian>>;

#[derive(Default)]
struct Out {
    checks: Vec<Check>,
    emitted: Vec<Emitted>,
}

impl Out {
    fn emit(&mut self, label: impl Into<String>, value: impl ToString) {
        self.emitted.push(Emitted { label: label.into(), value: value.to_string() });
    }

    fn report(&mut self, r: Report) {
        self.checks.extend(r.checks);
    }

    /// Checks of `r`, names prefixed with `prefix`.
    fn report_as(&mut self, prefix: &str, r: Report) {
        for mut c in r.checks {
            c.name = format!("{prefix}: {}", c.name);
            self.checks.push(c);
        }
    }
}

/// A non-zero polynomial in `vars` of total degree `≤ deg` with 1–3 terms and
/// small rational coefficients.
pub fn random_poly(rng: &mut ChaCha8Rng, ctx: &fedwhit::coeff::Ctx, vars: &[usize], deg: u32) -> Poly {
    loop {
        let mut out = Poly::zero(ctx);
        for _ in 0..rng.gen_range(1..=3) {
            let mut e = vec![0u32; ctx.len()];
            let mut left = rng.gen_range(0..=deg);
            let mut order = vars.to_vec();
            order.shuffle(rng);
            for v in order {
                let x = rng.gen_range(0..=left);
                e[v] = x;
                left -= x;
            }
            let c = Gaussian::from_ratio(rng.gen_range(-3..=3), rng.gen_range(1..=2));
            out.add_assign_ref(&Poly::monomial(ctx, Monomial::from_exponents(e), c));
        }
        if !out.is_zero() {
            return out;
        }
    }
}

fn all_vars(ctx: &fedwhit::coeff::Ctx) -> Vec<usize> {
    (0..ctx.len()).collect()
}

fn random_pairs(rng: &mut ChaCha8Rng, ctx: &fedwhit::coeff::Ctx, b: Option<RandomBattery>) -> Vec<Pair> {
    let vars = all_vars(ctx);
    let Some(b) = b else { return Vec::new() };
    (0..b.count).map(|_| (random_poly(rng, ctx, &vars, b.degree), random_poly(rng, ctx, &vars, b.degree))).collect()
}

fn subset_of(s: &SubsetSpec, ctx: &fedwhit::coeff::Ctx) -> CliResult<WhitneySubset<Gaussian>> {
    Ok(WhitneySubset::new(ctx, s.generators.clone(), s.order, s.bound)?)
}

pub struct Runner<'a> {
    job: &'a Job,
    chart: Chart,
    chart_report: Report,
    conn: Option<CliResult<Connection>>,
    cache: StateCache,
}

impl<'a> Runner<'a> {
    fn connection(&mut self) -> CliResult<Connection> {
        if self.conn.is_none() {
            self.conn = Some(build_connection(&self.job.conn, &self.chart));
        }
        self.conn.clone().unwrap()
    }

    fn product(&mut self, n: u32) -> CliResult<Sp> {
        let conn = self.connection()?;
        let offset = build_offset(&self.job.offset, &self.chart, n)?;
        self.cache.get(&self.chart, &conn, offset.as_ref(), n)
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.job.seed);
        rng.set_stream(index as u64);
        rng
    }

    fn execute(&mut self, index: usize, task: &NamedTask) -> CliResult<Out> {
        let mut out = Out::default();
        let mut rng = self.rng(index);
        let ctx = self.chart.ctx().clone();
        match &task.spec {
            TaskSpec::Validate => out.report(self.chart_report.clone()),
            TaskSpec::Connection => {
                let conn = self.connection()?;
                out.report(check_poisson_connection(&conn, &self.chart));
                let r = self.chart.rank();
                for k in 0..r {
                    for i in 0..r {
                        for j in 0..r {
                            let g = conn.get(k, i, j);
                            if !g.is_exact_zero() {
                                out.emit(format!("Gamma^{}_{}{}", k + 1, i + 1, j + 1), g);
                            }
                        }
                    }
                }
            }
            TaskSpec::Fedosov { n, elements, emit_r } => {
                let sp = self.product(*n)?;
                let st = sp.state();
                let res = st.abelian_residual()?;
                out.checks.push(Check::from_residuals(
                    "delta r = R - Omega' + nabla r + (1/2) ad(r, r)",
                    if res.is_zero() { vec![] } else { vec![res.to_string()] },
                ));
                let space = self.chart.space();
                for e in elements {
                    let key = WeylKey::new(Monomial::from_exponents(e.clone()), 0, 0);
                    let a = WeylElement::monomial(space, *n, key, Series::exact(Poly::one(&ctx)));
                    let label = a.to_string();
                    let dd = st.d_squared(&a)?;
                    out.checks.push(Check::from_residuals(
                        format!("D(D({label})) = 0"),
                        if dd.is_zero() { vec![] } else { vec![dd.to_string()] },
                    ));
                }
                out.emit("r terms", st.r().nonzero_terms().count());
                if *emit_r {
                    out.emit("r", st.r());
                }
            }
            TaskSpec::Star { k, n, pairs, random, axioms, associativity } => {
                let sp = self.product(*n)?;
                let mut battery = pairs.clone();
                battery.extend(random_pairs(&mut rng, &ctx, *random));
                for (f, g) in &battery {
                    let c = sp.star(f, g, *k)?;
                    for (i, ci) in c.iter().enumerate() {
                        out.emit(format!("c{i}({f}, {g})"), ci);
                    }
                    if *axioms {
                        out.report_as(&format!("({f}, {g})"), star_axioms_check(&sp, f, g, *k)?);
                    }
                }
                if let Some(b) = associativity {
                    let vars = all_vars(&ctx);
                    for _ in 0..b.count {
                        let [f, g, h] = [0, 1, 2].map(|_| random_poly(&mut rng, &ctx, &vars, b.degree));
                        let res = associativity_residuals(&*sp, &f, &g, &h, *k)?;
                        out.checks.push(Check::from_residuals(format!("({f} * {g}) * {h} = {f} * ({g} * {h})"), res));
                    }
                }
            }
            TaskSpec::WhitneyStar { k, n, pairs, independence, associativity } => {
                let sp = self.product(*n)?;
                let x = subset_of(self.job.subset.as_ref().expect("checked in resolve"), &ctx)?;
                let vars = all_vars(&ctx);
                out.emit("order loss per derivative", x.derivative_loss());
                for (f, g) in pairs {
                    let c = whitney_star(&x, &*sp, &jet_map(&x, f)?, &jet_map(&x, g)?, *k)?;
                    for (i, ci) in c.iter().enumerate() {
                        out.emit(format!("[c{i}({f}, {g})] (order {})", x.effective_order(i as u32).max(-1)), ci);
                    }
                }
                if let Some(b) = independence {
                    let gens = x.generators().to_vec();
                    for _ in 0..b.count {
                        let f = random_poly(&mut rng, &ctx, &vars, b.degree);
                        let g = random_poly(&mut rng, &ctx, &vars, b.degree);
                        let gen = &gens[rng.gen_range(0..gens.len())];
                        let j = &random_poly(&mut rng, &ctx, &vars, 1) * &gen.pow(x.order() + 1);
                        let r = representative_independence(&x, &sp, &f, &j, &g, *k)?;
                        out.report_as(&format!("(f, j, g) = ({f}, {j}, {g})"), r);
                    }
                }
                if let Some(b) = associativity {
                    for _ in 0..b.count {
                        let [f, g, h] = [0, 1, 2].map(|_| random_poly(&mut rng, &ctx, &vars, b.degree));
                        let res = whitney_associativity(&x, &*sp, &jet_map(&x, &f)?, &jet_map(&x, &g)?, &jet_map(&x, &h)?, *k)?;
                        out.checks.push(Check::from_residuals(format!("([{f}] * [{g}]) * [{h}] = [{f}] * ([{g}] * [{h}])"), res));
                    }
                }
            }
            TaskSpec::Invariance { k, n, pairs, random, use_subset } => {
                let sp = self.product(*n)?;
                let action = match self.job.action.as_ref().expect("checked in resolve") {
                    ActionSpec::Finite { elements, table } => GroupAction::finite(elements.clone(), table.clone())?,
                    ActionSpec::Infinitesimal(m) => GroupAction::infinitesimal(m.clone())?,
                };
                let subset = match (use_subset, &self.job.subset) {
                    (true, Some(s)) => Some(subset_of(s, &ctx)?),
                    _ => None,
                };
                let mut battery = pairs.clone();
                if let Some(b) = random {
                    battery.extend(self.invariant_pairs(&mut rng, *b)?);
                }
                out.report(invariance_check(&action, &sp, subset.as_ref(), &battery, *k)?);
            }
            TaskSpec::ReduceCheck { k, n, pairs, random, sample } => {
                let red = self.job.reduction.as_ref().expect("checked in resolve");
                let (down, _) = validated_chart(&red.chart)?;
                let conn_n = build_connection(&red.conn, &down)?;
                let sp_n = self.cache.get(&down, &conn_n, None, *n)?;
                let sp_m = self.product(*n)?;
                let pi = PolyMap::new(&self.chart, &down, red.projection.clone())?;
                let x = Arc::new(subset_of(self.job.subset.as_ref().expect("checked in resolve"), &ctx)?);
                let y = Arc::new(subset_of(&red.subset, down.ctx())?);
                let generator = match &self.job.action {
                    Some(ActionSpec::Infinitesimal(m)) => Some(m.clone()),
                    _ => None,
                };
                let setup = ReductionSetup::new(pi, x, y, generator)?;
                let mut battery = pairs.clone();
                battery.extend(random_pairs(&mut rng, down.ctx(), *random));
                let sample = sample.clone().unwrap_or_else(|| {
                    let mut s: Vec<Poly> = Vec::new();
                    for p in battery.iter().flat_map(|(f, g)| [f, g]) {
                        if !s.contains(p) {
                            s.push(p.clone());
                        }
                    }
                    s
                });
                out.report(setup.validate()?);
                out.report(projection_check(&setup, &sample)?);
                out.report(reduction_compare(&setup, &*sp_m, &*sp_n, &battery, *k)?);
            }
            TaskSpec::Equiv { k, n, other, ansatz, pairs, held_out } => {
                let main = self.product(*n)?;
                let (a, b): (Arc<dyn StarOracle<Gaussian>>, Arc<dyn StarOracle<Gaussian>>) = match other {
                    Other::Against { conn, offset } => {
                        let cb = build_connection(conn, &self.chart)?;
                        let ob = build_offset(offset, &self.chart, *n)?;
                        let sp_b = self.cache.get(&self.chart, &cb, ob.as_ref(), *n)?;
                        (main, sp_b)
                    }
                    Other::Gauge(g) => {
                        for (i, d) in g.iter().enumerate() {
                            out.emit(format!("implanted T{}", i + 1), d);
                        }
                        (Arc::new(GaugedStar::new(main.clone(), g.clone())?), main)
                    }
                };
                match equivalence_solve(&*a, &*b, *k, ansatz) {
                    Ok(eq) => {
                        out.checks.push(Check::pass(format!("equivalence found through order {k}")));
                        for (i, d) in eq.operators.iter().enumerate() {
                            out.emit(format!("T{}", i + 1), d);
                        }
                        for o in &eq.orders {
                            out.emit(
                                format!("order {} system", o.order),
                                format!(
                                    "{} unknowns, {} equations, rank {}, correction rank {}",
                                    o.unknowns, o.equations, o.rank, o.correction_rank
                                ),
                            );
                        }
                        let mut battery = pairs.clone();
                        battery.extend(random_pairs(&mut rng, &ctx, *held_out));
                        if !battery.is_empty() {
                            let r = equivalence_validate(&*a, &*b, &eq.operators, &battery, *k, ansatz.jet_order)?;
                            out.report_as("held out", r);
                        }
                    }
                    Err(Error::Obstruction { order, message }) => {
                        out.checks.push(Check::fail(
                            format!("equivalence found through order {k}"),
                            vec![format!("obstruction at order {order}: {message}")],
                        ));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(out)
    }

    /// Invariant pairs: Reynolds averages `Σ_A f∘A` for a finite action, and
    /// pullbacks `π*f` of random downstairs polynomials for an infinitesimal one.
    fn invariant_pairs(&mut self, rng: &mut ChaCha8Rng, b: RandomBattery) -> CliResult<Vec<Pair>> {
        let ctx = self.chart.ctx().clone();
        match self.job.action.as_ref().expect("checked in resolve") {
            ActionSpec::Finite { elements, .. } => {
                let zero = vec![Gaussian::from_i64(0); ctx.len()];
                let maps = elements
                    .iter()
                    .map(|a| PolyMap::affine(&self.chart, &self.chart, a, &zero))
                    .collect::<fedwhit::error::Result<Vec<_>>>()?;
                let avg = |f: &Poly| -> CliResult<Poly> {
                    let mut acc = Poly::zero(&ctx);
                    for m in &maps {
                        acc.add_assign_ref(&m.pullback(f)?);
                    }
                    Ok(acc)
                };
                random_pairs(rng, &ctx, Some(b)).iter().map(|(f, g)| Ok((avg(f)?, avg(g)?))).collect()
            }
            ActionSpec::Infinitesimal(_) => {
                let red = self.job.reduction.as_ref().expect("checked in resolve");
                let (down, _) = validated_chart(&red.chart)?;
                let pi = PolyMap::new(&self.chart, &down, red.projection.clone())?;
                random_pairs(rng, down.ctx(), Some(b))
                    .iter()
                    .map(|(f, g)| Ok((pi.pullback(f)?, pi.pullback(g)?)))
                    .collect()
            }
        }
    }
}

fn task_report(index: usize, task: &NamedTask, res: CliResult<Out>) -> TaskReport {
    let mut t = TaskReport {
        index: index + 1,
        kind: task.kind.to_owned(),
        name: task.name.clone(),
        status: Status::Pass,
        order: task.spec.order(),
        truncation: task.spec.truncation(),
        checks: Vec::new(),
        emitted: Vec::new(),
        error: None,
        exit_code: 0,
    };
    match res {
        Ok(out) => {
            if out.checks.iter().any(|c| !c.passed) {
                t.status = Status::Fail;
                t.exit_code = 1;
            }
            t.checks = out.checks.into_iter().map(CheckOut::from).collect();
            t.emitted = out.emitted;
        }
        Err(e) => {
            t.status = Status::Error;
            t.exit_code = e.exit_code();
            t.error = Some(e.to_string());
        }
    }
    t
}

fn finish(seed: u64, tasks: Vec<TaskReport>, error: Option<CliError>) -> RunReport {
    let mut exit_code = tasks.iter().map(|t| t.exit_code).max().unwrap_or(0);
    if let Some(e) = &error {
        exit_code = exit_code.max(e.exit_code());
    }
    let status = match exit_code {
        0 => Status::Pass,
        1 => Status::Fail,
        _ => Status::Error,
    };
    RunReport { seed, status, exit_code, error: error.map(|e| e.to_string()), tasks }
}

/// Run every task of `job`; the chart is validated first.
pub fn run_job(job: &Job, cache_dir: Option<PathBuf>) -> RunReport {
    let (chart, chart_report) = match validated_chart(&job.chart) {
        Ok(c) => c,
        Err(e) => return finish(job.seed, Vec::new(), Some(e)),
    };
    let mut runner = Runner { job, chart, chart_report, conn: None, cache: StateCache::new(cache_dir) };
    let mut order: Vec<usize> = (0..job.tasks.len()).collect();
    order.sort_by_key(|&i| job.tasks[i].spec.phase());
    let mut reports: Vec<Option<TaskReport>> = vec![None; job.tasks.len()];
    for i in order {
        let task = &job.tasks[i];
        let res = runner.execute(i, task);
        reports[i] = Some(task_report(i, task, res));
    }
    finish(job.seed, reports.into_iter().map(|r| r.expect("every task ran")).collect(), None)
}
