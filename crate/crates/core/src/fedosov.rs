//! Abelian Fedosov connections, flat sections and the induced star product.
//!
//! `D = −δ + ∇ + ad(r, ·)` with `ad(a, b) = (i/ℏ)[a, b]`. The unknowns `r` and
//! `𝔮(f)` are solved degree by degree in the Fedosov filtration: since `δ⁻¹`
//! raises the degree by exactly one, the part of degree `d` only depends on
//! parts of lower degree, which is the degree-graded form of the fixed-point
//! iteration.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::coeff::{ComplexScalar, Ctx, Monomial, Polynomial, Precision, Series};
use crate::error::{Error, Result};
use crate::geometry::{check_poisson_connection, lift_curvature, LeafConnection, PoissonChart};
use crate::report::{Check, Report};
use crate::weyl::{wedge_sign, FormSeries, WeylElement, WeylKey};

/// `∇a = Σ_k dx^k ∧ (∂_{x^k} a − Γ^l_{kj} y^j ∂_{y^l} a)`.
pub fn nabla<S: ComplexScalar>(a: &WeylElement<S>, conn: &LeafConnection<S>) -> WeylElement<S> {
    let r = a.space().rank();
    let mut out = WeylElement::zero(a.space(), a.truncation());
    for (key, c) in a.terms() {
        for k in 0..r {
            let Some(neg) = wedge_sign(1 << k, key.form) else { continue };
            let form = key.form | (1 << k);
            let signed = |s: Series<S>| if neg { s.neg() } else { s };
            let d = c.diff(k);
            if !d.is_exact_zero() {
                out.add_term(WeylKey::new(key.fiber.clone(), key.hbar, form), signed(d));
            }
            for l in 0..r {
                let al = key.fiber.exp(l);
                if al == 0 {
                    continue;
                }
                let lowered = key.fiber.with_exp(l, al - 1);
                for j in 0..r {
                    let g = conn.get(l, k, j);
                    if g.is_exact_zero() {
                        continue;
                    }
                    let fiber = lowered.with_exp(j, lowered.exp(j) + 1);
                    let coef = g.mul(c).scale(&S::from_i64(-(al as i64)));
                    out.add_term(WeylKey::new(fiber, key.hbar, form), signed(coef));
                }
            }
        }
    }
    out
}

/// Parts of `a` by Fedosov degree, index `d` holding degree `d`.
fn graded<S: ComplexScalar>(a: &WeylElement<S>) -> Vec<WeylElement<S>> {
    let n = a.truncation();
    let mut parts = vec![WeylElement::zero(a.space(), n); n as usize + 1];
    for (k, c) in a.terms() {
        parts[k.fedosov_degree() as usize].add_term(k.clone(), c.clone());
    }
    parts
}

fn sum<S: ComplexScalar>(parts: &[WeylElement<S>], like: &WeylElement<S>) -> WeylElement<S> {
    let mut out = WeylElement::zero(like.space(), like.truncation());
    for p in parts {
        out.add_assign(p);
    }
    out
}

/// `Σ_{i<j} c_{ij} dx^i ∧ dx^j` for an antisymmetric matrix of base series.
pub fn two_form<S: ComplexScalar>(chart: &PoissonChart<S>, c: &[Vec<Series<S>>], n: u32) -> WeylElement<S> {
    let r = chart.rank();
    let mut out = WeylElement::zero(chart.space(), n);
    for i in 0..r {
        for j in i + 1..r {
            out.add_term(WeylKey::new(Monomial::one(r), 0, (1 << i) | (1 << j)), c[i][j].clone());
        }
    }
    out
}

/// Abelian connection data at Fedosov truncation `N`.
#[derive(Clone, Debug)]
pub struct FedosovState<S: ComplexScalar> {
    chart: PoissonChart<S>,
    conn: LeafConnection<S>,
    n: u32,
    r: WeylElement<S>,
    curvature: WeylElement<S>,
    offset: WeylElement<S>,
}

/// Build `r` with `δ*r = 0`, `deg_F r ≥ 3` and Weyl curvature `−ω + Ω′`.
pub fn build_fedosov<S: ComplexScalar>(
    chart: &PoissonChart<S>,
    conn: &LeafConnection<S>,
    n: u32,
    offset: Option<&FormSeries<S>>,
) -> Result<FedosovState<S>> {
    if n < 2 {
        return Err(Error::Precondition(format!("Fedosov truncation N = {n} must be at least 2")));
    }
    let report = check_poisson_connection(conn, chart);
    if !report.passed() {
        let res: Vec<String> = report.failures().flat_map(|c| c.residuals.clone()).collect();
        return Err(Error::Precondition(format!("connection is not Poisson: {}", res.join("; "))));
    }
    let offset = match offset {
        Some(o) => validate_offset(o, chart, conn, n)?,
        None => WeylElement::zero(chart.space(), n),
    };
    let curvature = lift_curvature(conn, chart, n);
    let src = graded(&curvature.sub(&offset)?);
    let mut r: Vec<WeylElement<S>> = vec![WeylElement::zero(chart.space(), n); n as usize + 1];
    for d in 3..=n as usize {
        let mut rhs = src[d - 1].add(&nabla(&r[d - 1], conn))?;
        let half = S::from_ratio(1, 2);
        for a in 3..=d - 2 {
            let b = d + 1 - a;
            if b < 3 {
                continue;
            }
            rhs.add_assign(&r[a].ad(&r[b])?.fedosov_part(d as u32 - 1).scale(&half));
        }
        r[d] = rhs.delta_inv();
    }
    let r = sum(&r, &curvature);
    let state = FedosovState { chart: chart.clone(), conn: conn.clone(), n, r, curvature, offset };
    state.verify()?;
    Ok(state)
}

fn validate_offset<S: ComplexScalar>(
    o: &FormSeries<S>,
    chart: &PoissonChart<S>,
    conn: &LeafConnection<S>,
    n: u32,
) -> Result<WeylElement<S>> {
    let e = o.element();
    if !Arc::ptr_eq(e.space(), chart.space()) {
        return Err(Error::Context("curvature offset lives over another chart".into()));
    }
    if let Some((k, _)) = e.nonzero_terms().find(|(k, _)| k.form_degree() != 2 || k.hbar == 0) {
        return Err(Error::Precondition(format!(
            "curvature offset must be a sum of ℏ^k 2-forms with k ≥ 1 (found form degree {}, ℏ^{})",
            k.form_degree(),
            k.hbar
        )));
    }
    let e = e.with_truncation(n);
    let d = nabla(&e, conn);
    if !d.is_zero() {
        return Err(Error::Precondition(format!("curvature offset is not closed: d Ω′ = {d}")));
    }
    Ok(e)
}

impl<S: ComplexScalar> FedosovState<S> {
    /// Rebuild a state from a previously computed `r` (e.g. read back from a
    /// cache). Every invariant checked by [`build_fedosov`] is re-checked.
    pub fn from_parts(
        chart: &PoissonChart<S>,
        conn: &LeafConnection<S>,
        n: u32,
        r: WeylElement<S>,
        offset: Option<&FormSeries<S>>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Precondition(format!("Fedosov truncation N = {n} must be at least 2")));
        }
        if !Arc::ptr_eq(r.space(), chart.space()) || r.truncation() != n {
            return Err(Error::Context("r lives over another Weyl space or truncation".into()));
        }
        let offset = match offset {
            Some(o) => validate_offset(o, chart, conn, n)?,
            None => WeylElement::zero(chart.space(), n),
        };
        let curvature = lift_curvature(conn, chart, n);
        let state = FedosovState { chart: chart.clone(), conn: conn.clone(), n, r, curvature, offset };
        state.verify()?;
        Ok(state)
    }

    pub fn chart(&self) -> &PoissonChart<S> {
        &self.chart
    }

    pub fn connection(&self) -> &LeafConnection<S> {
        &self.conn
    }

    pub fn truncation(&self) -> u32 {
        self.n
    }

    pub fn r(&self) -> &WeylElement<S> {
        &self.r
    }

    /// The lifted curvature `R` of the Poisson connection.
    pub fn curvature(&self) -> &WeylElement<S> {
        &self.curvature
    }

    /// The central offset `Ω′` (zero unless one was supplied).
    pub fn offset(&self) -> &WeylElement<S> {
        &self.offset
    }

    /// `Ω_D = −ω + Ω′` as a leafwise form series.
    pub fn curvature_target(&self) -> FormSeries<S> {
        let r = self.chart.rank();
        let minus: Vec<Vec<Series<S>>> =
            (0..r).map(|i| (0..r).map(|j| self.chart.omega()[i][j].neg()).collect()).collect();
        let mut w = two_form(&self.chart, &minus, self.n);
        w.add_assign(&self.offset);
        FormSeries::new(w).expect("fiber-free by construction")
    }

    /// `δr − (R − Ω′ + ∇r + ½ad(r,r))`, reliable through degree `N − 1`.
    pub fn abelian_residual(&self) -> Result<WeylElement<S>> {
        let rhs = self
            .curvature
            .sub(&self.offset)?
            .add(&nabla(&self.r, &self.conn))?
            .add(&self.r.ad(&self.r)?.scale(&S::from_ratio(1, 2)))?;
        Ok(self.r.delta().sub(&rhs)?.with_truncation(self.n - 1))
    }

    fn verify(&self) -> Result<()> {
        let ds = self.r.delta_star();
        if !ds.is_zero() {
            return Err(Error::InternalConsistency(format!("δ*r ≠ 0: {ds}")));
        }
        if let Some(d) = self.r.fedosov_degree() {
            if d < 3 {
                return Err(Error::InternalConsistency(format!("deg_F(r) = {d} < 3")));
            }
        }
        let res = self.abelian_residual()?;
        if !res.is_zero() {
            return Err(Error::InternalConsistency(format!(
                "abelian condition fails (connection invalid?): {res}"
            )));
        }
        Ok(())
    }

    /// `Da = −δa + ∇a + ad(r, a)`.
    pub fn apply_d(&self, a: &WeylElement<S>) -> Result<WeylElement<S>> {
        let mut out = nabla(a, &self.conn).sub(&a.delta())?;
        out.add_assign(&self.r.ad(a)?);
        Ok(out)
    }

    /// `D(D(a))` cut to the reliable range `deg_F ≤ N − 2`.
    pub fn d_squared(&self, a: &WeylElement<S>) -> Result<WeylElement<S>> {
        let dd = self.apply_d(&self.apply_d(a)?)?;
        Ok(dd.with_truncation(self.n.saturating_sub(2)))
    }

    /// The flat section `𝔮(f)` with `σ(𝔮(f)) = f`, through degree `N`.
    pub fn quantize(&self, f: &Series<S>) -> Result<WeylElement<S>> {
        let n = self.n as usize;
        let space = self.chart.space();
        let r = graded(&self.r);
        let mut a = vec![WeylElement::zero(space, self.n); n + 1];
        a[0] = WeylElement::from_base(space, self.n, f.clone());
        for d in 1..=n {
            let mut rhs = nabla(&a[d - 1], &self.conn);
            for (dr, rp) in r.iter().enumerate().skip(3) {
                if dr > d + 1 || rp.len() == 0 {
                    continue;
                }
                let e = d + 1 - dr;
                if a[e].len() == 0 {
                    continue;
                }
                rhs.add_assign(&rp.ad(&a[e])?.fedosov_part(d as u32 - 1));
            }
            a[d] = rhs.delta_inv();
        }
        Ok(sum(&a, &a[0]))
    }

    pub fn quantize_poly(&self, f: &Polynomial<S>) -> Result<WeylElement<S>> {
        self.quantize(&Series::exact(f.clone()))
    }

    /// `D(a)` cut to the reliable range `deg_F ≤ N − 1`; zero for flat `a`.
    pub fn flatness_residual(&self, a: &WeylElement<S>) -> Result<WeylElement<S>> {
        Ok(self.apply_d(a)?.with_truncation(self.n - 1))
    }
}

/// Anything producing bidifferential coefficients `c_0..c_K`.
pub trait StarOracle<S: ComplexScalar>: Send + Sync {
    fn ctx(&self) -> &Ctx;

    /// `c_0(f,g), …, c_K(f,g)`.
    fn star(&self, f: &Polynomial<S>, g: &Polynomial<S>, k: u32) -> Result<Vec<Series<S>>>;
}

/// `σ(𝔮(f)∘𝔮(g))` with a cache of quantized operands.
pub struct StarProduct<S: ComplexScalar> {
    state: Arc<FedosovState<S>>,
    cache: Mutex<HashMap<String, Arc<WeylElement<S>>>>,
}

impl<S: ComplexScalar> StarProduct<S> {
    pub fn new(state: Arc<FedosovState<S>>) -> Self {
        StarProduct { state, cache: Mutex::new(HashMap::new()) }
    }

    pub fn state(&self) -> &Arc<FedosovState<S>> {
        &self.state
    }

    /// Largest `K` the truncation supports (`N ≥ 2K`).
    pub fn max_order(&self) -> u32 {
        self.state.n / 2
    }

    pub fn lift(&self, f: &Polynomial<S>) -> Result<Arc<WeylElement<S>>> {
        let key = f.to_string();
        if let Some(a) = self.cache.lock().unwrap().get(&key) {
            return Ok(a.clone());
        }
        let a = Arc::new(self.state.quantize_poly(f)?);
        self.cache.lock().unwrap().insert(key, a.clone());
        Ok(a)
    }
}

impl<S: ComplexScalar> StarOracle<S> for StarProduct<S> {
    fn ctx(&self) -> &Ctx {
        self.state.chart.ctx()
    }

    fn star(&self, f: &Polynomial<S>, g: &Polynomial<S>, k: u32) -> Result<Vec<Series<S>>> {
        if self.state.n < 2 * k {
            return Err(Error::Truncation {
                message: format!("star product to order ℏ^{k}"),
                required: 2 * k,
                have: self.state.n,
            });
        }
        f.check_ctx(g)?;
        self.lift(f)?.moyal_symbol(&*self.lift(g)?, k)
    }
}

/// Closed-form Moyal product for a constant Poisson matrix.
pub struct MoyalStar<S: ComplexScalar> {
    ctx: Ctx,
    pi: Vec<Vec<S>>,
}

impl<S: ComplexScalar> MoyalStar<S> {
    /// `pi` acts on the first `pi.len()` variables of `ctx`.
    pub fn new(ctx: &Ctx, pi: Vec<Vec<S>>) -> Result<Self> {
        let r = pi.len();
        if r > ctx.len() || pi.iter().any(|row| row.len() != r) {
            return Err(Error::Precondition("Moyal matrix has the wrong shape".into()));
        }
        Ok(MoyalStar { ctx: ctx.clone(), pi })
    }

    pub fn from_chart(chart: &PoissonChart<S>) -> Result<Self> {
        let r = chart.rank();
        let mut pi = vec![vec![S::zero(); r]; r];
        for i in 0..r {
            for j in 0..r {
                let s = &chart.pi()[i][j];
                if !s.is_exact() || !s.poly().is_constant() {
                    return Err(Error::Precondition("Moyal oracle needs a constant exact Π".into()));
                }
                pi[i][j] = s.poly().constant_term();
            }
        }
        Self::new(chart.ctx(), pi)
    }
}

/// Off-diagonal contraction patterns `m` with `Σm = k`.
fn patterns(entries: usize, k: u32) -> Vec<Vec<u32>> {
    if entries == 0 {
        return if k == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for v in 0..=k {
        for mut rest in patterns(entries - 1, k - v) {
            rest.insert(0, v);
            out.push(rest);
        }
    }
    out
}

impl<S: ComplexScalar> StarOracle<S> for MoyalStar<S> {
    fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    fn star(&self, f: &Polynomial<S>, g: &Polynomial<S>, k: u32) -> Result<Vec<Series<S>>> {
        f.check_ctx(g)?;
        let r = self.pi.len();
        let nv = self.ctx.len();
        let entries: Vec<(usize, usize)> =
            (0..r).flat_map(|i| (0..r).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let c = S::i().mul_ref(&S::from_ratio(-1, 2));
        let mut out = Vec::new();
        let mut ck = S::one();
        for order in 0..=k {
            let mut acc = Polynomial::zero(&self.ctx);
            for m in patterns(entries.len(), order) {
                let mut coef = ck.clone();
                let mut da = vec![0u32; nv];
                let mut db = vec![0u32; nv];
                for (e, &v) in m.iter().enumerate() {
                    if v == 0 {
                        continue;
                    }
                    let (i, j) = entries[e];
                    let p = &self.pi[i][j];
                    for _ in 0..v {
                        coef = coef.mul_ref(p);
                    }
                    let fact: i64 = (1..=v as i64).product();
                    coef = coef.mul_ref(&S::from_ratio(1, fact));
                    da[i] += v;
                    db[j] += v;
                }
                if coef.is_zero() {
                    continue;
                }
                acc.add_assign_ref(&(&f.diff_multi(&da) * &g.diff_multi(&db)).scale(&coef));
            }
            out.push(Series::exact(acc));
            ck = ck.mul_ref(&c);
        }
        Ok(out)
    }
}

/// `Σ_{i+j+k=n} c_k(a_i, b_j)` for ℏ-series operands. Precision uses that the
/// coefficients are natural: `c_k` differentiates at most `k` times per slot,
/// so an error of degree `≥ P` in an operand gives an error of degree `≥ P − 2k`.
pub fn star_series<S: ComplexScalar>(
    oracle: &dyn StarOracle<S>,
    a: &[Series<S>],
    b: &[Series<S>],
    k: u32,
) -> Result<Vec<Series<S>>> {
    let mut out = vec![Series::zero(oracle.ctx()); k as usize + 1];
    for (i, ai) in a.iter().enumerate().take(k as usize + 1) {
        for (j, bj) in b.iter().enumerate().take(k as usize + 1 - i) {
            let rest = k - (i + j) as u32;
            let c = oracle.star(ai.poly(), bj.poly(), rest)?;
            for (l, cl) in c.into_iter().enumerate() {
                let loss = 2 * l as i32;
                let prec = cl.precision().min(ai.precision().shift(-loss)).min(bj.precision().shift(-loss));
                out[i + j + l].add_assign(&cl.with_precision(prec));
            }
        }
    }
    Ok(out)
}

fn series_text<S: ComplexScalar>(s: &Series<S>) -> String {
    match s.precision().bound() {
        None => s.poly().to_string(),
        Some(b) => format!("{} + O(deg {b})", s.poly()),
    }
}

/// `c_1(f,g) − c_1(g,f) + i{f,g} = 0` (DQ3).
pub fn star_commutator_check<S: ComplexScalar>(
    sp: &StarProduct<S>,
    f: &Polynomial<S>,
    g: &Polynomial<S>,
) -> Result<Report> {
    let chart = sp.state.chart();
    let fg = sp.star(f, g, 1)?;
    let gf = sp.star(g, f, 1)?;
    let br = chart.bracket(&Series::exact(f.clone()), &Series::exact(g.clone()));
    let res = fg[1].sub(&gf[1]).add(&br.scale(&S::i()));
    let mut report = Report::new("star commutator");
    let residuals =
        if res.is_zero_mod_precision() { vec![] } else { vec![format!("c1(f,g) - c1(g,f) + i{{f,g}} = {}", series_text(&res))] };
    let mut check = Check::from_residuals("[f,g]* = -i hbar {f,g} + O(hbar^2)", residuals);
    if !res.precision().is_exact() {
        check = check.with_note(format!("verified below {}", res.precision()));
    }
    report.push(check);
    Ok(report)
}

/// `c_0 = fg`, `f⋆1 = 1⋆f = f` and DQ3 for one pair, to order `k`.
pub fn star_axioms_check<S: ComplexScalar>(
    sp: &StarProduct<S>,
    f: &Polynomial<S>,
    g: &Polynomial<S>,
    k: u32,
) -> Result<Report> {
    let one = Polynomial::one(sp.ctx());
    let mut report = Report::new("star axioms");
    let c = sp.star(f, g, k)?;
    let c0 = c[0].sub(&Series::exact(f * g));
    report.push(Check::from_residuals(
        "c0(f,g) = fg",
        if c0.is_zero_mod_precision() { vec![] } else { vec![format!("c0 - fg = {}", series_text(&c0))] },
    ));
    for (label, h) in [("f*1 = f", sp.star(f, &one, k)?), ("1*f = f", sp.star(&one, f, k)?)] {
        let mut res = Vec::new();
        for (i, hi) in h.iter().enumerate() {
            let d = if i == 0 { hi.sub(&Series::exact(f.clone())) } else { hi.clone() };
            if !d.is_zero_mod_precision() {
                res.push(format!("hbar^{i}: {}", series_text(&d)));
            }
        }
        report.push(Check::from_residuals(label, res));
    }
    if k >= 1 {
        report.extend(star_commutator_check(sp, f, g)?);
    }
    Ok(report)
}

/// `(f⋆g)⋆h − f⋆(g⋆h)` to order `k`, empty on success.
pub fn associativity_residuals<S: ComplexScalar>(
    oracle: &dyn StarOracle<S>,
    f: &Polynomial<S>,
    g: &Polynomial<S>,
    h: &Polynomial<S>,
    k: u32,
) -> Result<Vec<String>> {
    let lift = |p: &Polynomial<S>| vec![Series::exact(p.clone())];
    let left = star_series(oracle, &oracle.star(f, g, k)?, &lift(h), k)?;
    let right = star_series(oracle, &lift(f), &oracle.star(g, h, k)?, k)?;
    Ok(left
        .iter()
        .zip(&right)
        .enumerate()
        .filter_map(|(i, (l, r))| {
            let d = l.sub(r);
            (!d.is_zero_mod_precision()).then(|| format!("hbar^{i}: {}", series_text(&d)))
        })
        .collect())
}

/// `Precision` of the worst coefficient in a list.
pub fn worst_precision<S: ComplexScalar>(c: &[Series<S>]) -> Precision {
    c.iter().map(|s| s.precision()).fold(Precision::EXACT, Precision::min)
}
