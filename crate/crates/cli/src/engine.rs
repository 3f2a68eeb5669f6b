//! Engine objects built from a resolved [`Job`], and the Fedosov-state cache.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use fedwhit::coeff::{parse_poly, Monomial, Precision, Series, VarClass};
use fedwhit::fedosov::{build_fedosov, two_form, FedosovState, StarProduct};
use fedwhit::geometry::{poisson_connection, validate_chart, LeafConnection, LeafMetric, PoissonChart};
use fedwhit::report::Report;
use fedwhit::weyl::{FormSeries, WeylElement, WeylKey};
use fedwhit::{Gaussian, Poly};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::job::{ChartSpec, ConnSpec, PolyMatrix};

pub type Chart = PoissonChart<Gaussian>;
pub type Connection = LeafConnection<Gaussian>;

pub fn build_chart(spec: &ChartSpec) -> CliResult<Chart> {
    let ctx = &spec.ctx;
    let chart = match (&spec.pi, &spec.omega) {
        (Some(pi), Some(omega)) => PoissonChart::new(ctx, pi.clone(), omega.clone(), spec.bound),
        (Some(pi), None) => PoissonChart::from_pi(ctx, pi.clone(), spec.bound),
        (None, Some(omega)) => PoissonChart::from_omega(ctx, omega.clone(), spec.bound),
        (None, None) => PoissonChart::darboux(ctx),
    };
    Ok(chart?)
}

/// The chart together with its validation report; an invalid chart is a
/// precondition failure naming every offending entry.
pub fn validated_chart(spec: &ChartSpec) -> CliResult<(Chart, Report)> {
    let chart = build_chart(spec)?;
    let report = validate_chart(&chart);
    if !report.passed() {
        let why: Vec<String> = report
            .failures()
            .map(|c| format!("{}: {}", c.name, c.residuals.join("; ")))
            .collect();
        return Err(CliError::Precondition(format!("invalid Poisson chart: {}", why.join(" | "))));
    }
    Ok((chart, report))
}

pub fn build_connection(spec: &ConnSpec, chart: &Chart) -> CliResult<Connection> {
    let conn = match spec {
        ConnSpec::Flat => LeafConnection::flat(chart.ctx(), chart.rank()),
        ConnSpec::Metric { eta, mode } => poisson_connection(&LeafMetric::new(eta.clone())?, chart, *mode)?,
        ConnSpec::Explicit(gamma) => LeafConnection::from_polys(gamma.clone())?,
    };
    Ok(conn)
}

pub fn build_offset(terms: &[(u32, PolyMatrix)], chart: &Chart, n: u32) -> CliResult<Option<FormSeries<Gaussian>>> {
    if terms.is_empty() {
        return Ok(None);
    }
    let mut acc = WeylElement::zero(chart.space(), n);
    for (hbar, form) in terms {
        let r = chart.rank();
        if form.len() != r || form.iter().any(|row| row.len() != r) {
            return Err(CliError::Precondition(format!("offset forms must be {r}×{r} matrices")));
        }
        let c: Vec<Vec<Series<Gaussian>>> =
            form.iter().map(|row| row.iter().map(|p| Series::exact(p.clone())).collect()).collect();
        acc.add_assign(&two_form(chart, &c, n).shift_hbar(*hbar).with_truncation(n));
    }
    Ok(Some(FormSeries::new(acc)?))
}

/// Canonical text of everything a Fedosov state depends on.
fn state_key(chart: &Chart, conn: &Connection, offset: Option<&FormSeries<Gaussian>>, n: u32) -> String {
    let ctx = chart.ctx();
    let mut s = String::from("fedwhit-state-v1\n");
    for v in ctx.vars() {
        let class = if v.class == VarClass::LeafBase { "leaf" } else { "transverse" };
        s.push_str(&format!("var {} {class}\n", v.name));
    }
    s.push_str(&format!("bound {}\n", chart.base_degree_bound()));
    for (name, m) in [("pi", chart.pi()), ("omega", chart.omega())] {
        for (i, row) in m.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                s.push_str(&format!("{name} {i} {j} {e}\n"));
            }
        }
    }
    let r = chart.rank();
    for k in 0..r {
        for i in 0..r {
            for j in 0..r {
                s.push_str(&format!("gamma {k} {i} {j} {}\n", conn.get(k, i, j)));
            }
        }
    }
    if let Some(o) = offset {
        s.push_str(&format!("offset {}\n", o.element()));
    }
    s.push_str(&format!("truncation {n}\n"));
    s
}

#[derive(Serialize, Deserialize)]
struct CachedTerm {
    fiber: Vec<u32>,
    hbar: u32,
    form: u32,
    coeff: String,
    below: Option<i32>,
}

#[derive(Serialize, Deserialize)]
struct CachedState {
    key: String,
    truncation: u32,
    r: Vec<CachedTerm>,
}

/// Star products of Fedosov states keyed on the SHA-256 of (chart, connection, offset, N), in
/// memory and optionally on disk.
#[derive(Default)]
pub struct StateCache {
    dir: Option<PathBuf>,
    mem: HashMap<String, Arc<StarProduct<Gaussian>>>,
}

impl StateCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        StateCache { dir, mem: HashMap::new() }
    }

    pub fn get(
        &mut self,
        chart: &Chart,
        conn: &Connection,
        offset: Option<&FormSeries<Gaussian>>,
        n: u32,
    ) -> CliResult<Arc<StarProduct<Gaussian>>> {
        let key = state_key(chart, conn, offset, n);
        let hash = hex::encode(Sha256::digest(key.as_bytes()));
        if let Some(s) = self.mem.get(&hash) {
            return Ok(s.clone());
        }
        let state = match self.load(&hash, &key, chart, conn, offset, n) {
            Some(s) => s,
            None => {
                let s = build_fedosov(chart, conn, n, offset)?;
                self.store(&hash, &key, &s);
                s
            }
        };
        let sp = Arc::new(StarProduct::new(Arc::new(state)));
        self.mem.insert(hash, sp.clone());
        Ok(sp)
    }

    fn path(&self, hash: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{hash}.json")))
    }

    /// A cache entry is only used if it matches the key and passes every
    /// check of a fresh build; anything else is a miss.
    fn load(
        &self,
        hash: &str,
        key: &str,
        chart: &Chart,
        conn: &Connection,
        offset: Option<&FormSeries<Gaussian>>,
        n: u32,
    ) -> Option<FedosovState<Gaussian>> {
        let text = fs::read_to_string(self.path(hash)?).ok()?;
        let cached: CachedState = serde_json::from_str(&text).ok()?;
        if cached.key != key || cached.truncation != n {
            return None;
        }
        let ctx = chart.ctx();
        let mut r = WeylElement::zero(chart.space(), n);
        for t in cached.r {
            if t.fiber.len() != chart.rank() {
                return None;
            }
            let p: Poly = parse_poly(ctx, &t.coeff).ok()?;
            let prec = t.below.map_or(Precision::EXACT, Precision::at);
            r.add_term(WeylKey::new(Monomial::from_exponents(t.fiber), t.hbar, t.form), Series::new(p, prec));
        }
        FedosovState::from_parts(chart, conn, n, r, offset).ok()
    }

    fn store(&self, hash: &str, key: &str, state: &FedosovState<Gaussian>) {
        let Some(path) = self.path(hash) else { return };
        let r = state
            .r()
            .terms()
            .map(|(k, c)| CachedTerm {
                fiber: k.fiber.exponents().to_vec(),
                hbar: k.hbar,
                form: k.form,
                coeff: c.poly().to_string(),
                below: c.precision().bound(),
            })
            .collect();
        let cached = CachedState { key: key.to_owned(), truncation: state.truncation(), r };
        // the cache is an optimisation: write failures are not errors
        if let Some(dir) = &self.dir {
            let _ = fs::create_dir_all(dir);
        }
        if let Ok(text) = serde_json::to_string(&cached) {
            let tmp = path.with_extension("tmp");
            if fs::write(&tmp, text).is_ok() {
                let _ = fs::rename(&tmp, &path);
            }
        }
    }
}
