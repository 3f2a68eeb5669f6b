//! Pullback functoriality, group invariance, reduction and equivalence of
//! star products.
//!
//! Maps act on functions by pullback, `Φ*F = F∘Φ`; a finite group element `A`
//! acts by `F ↦ F∘A` and a linear vector field `X = Σ (Ax)^i ∂_i` by
//! derivation. An equivalence from `⋆_A` to `⋆_B` is `T = 1 + ℏT_1 + ℏ²T_2 + …`
//! with `T(f ⋆_A g) = Tf ⋆_B Tg`, each `T_k` a leafwise differential operator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::coeff::context::same_ctx;
use crate::coeff::{ComplexScalar, Ctx, Matrix, Monomial, Polynomial, Precision, Series, SparseSystem, VarClass};
use crate::error::{Error, Result};
use crate::fedosov::{star_series, StarOracle, StarProduct};
use crate::geometry::{LeafConnection, PoissonChart, SeriesMatrix};
use crate::report::{Check, Report};
use crate::whitney::WhitneySubset;

fn series_text<S: ComplexScalar>(s: &Series<S>) -> String {
    match s.precision().bound() {
        None => s.poly().to_string(),
        Some(b) => format!("{} + O(deg {b})", s.poly()),
    }
}

fn coeffs_text<S: ComplexScalar>(c: &[Series<S>]) -> String {
    format!("[{}]", c.iter().map(series_text).collect::<Vec<_>>().join(", "))
}

fn push_residual<S: ComplexScalar>(out: &mut Vec<String>, label: String, s: &Series<S>) {
    if !s.is_zero_mod_precision() {
        out.push(format!("{label} = {}", series_text(s)));
    }
}

fn in_ctx<S: ComplexScalar>(p: &Polynomial<S>, ctx: &Ctx, what: &str) -> Result<()> {
    if same_ctx(p.ctx(), ctx) {
        Ok(())
    } else {
        Err(Error::Context(format!("{what} lives over another variable context")))
    }
}

/// Leafwise 2-form coefficient matrices of `Ω′`, keyed by ℏ power.
fn offset_forms<S: ComplexScalar>(sp: &StarProduct<S>) -> BTreeMap<u32, SeriesMatrix<S>> {
    let chart = sp.state().chart();
    let r = chart.rank();
    let mut out: BTreeMap<u32, SeriesMatrix<S>> = BTreeMap::new();
    for (key, c) in sp.state().offset().nonzero_terms() {
        let idx: Vec<usize> = (0..r).filter(|&i| key.form & (1 << i) != 0).collect();
        let m = out.entry(key.hbar).or_insert_with(|| vec![vec![Series::zero(chart.ctx()); r]; r]);
        let (i, j) = (idx[0], idx[1]);
        m[i][j].add_assign(c);
        m[j][i].add_assign(&c.neg());
    }
    out
}

/// A polynomial map `Φ: source → target` of foliated charts.
#[derive(Clone, Debug)]
pub struct PolyMap<S: ComplexScalar> {
    source: PoissonChart<S>,
    target: PoissonChart<S>,
    components: Vec<Polynomial<S>>,
}

impl<S: ComplexScalar> PolyMap<S> {
    /// `components[a]` is `Φ^a` in source variables. Leaf dimensions must agree
    /// and transverse components may not depend on leaf variables, so that
    /// leaves are mapped into leaves.
    pub fn new(source: &PoissonChart<S>, target: &PoissonChart<S>, components: Vec<Polynomial<S>>) -> Result<Self> {
        if components.len() != target.ctx().len() {
            return Err(Error::Context(format!(
                "map has {} components for {} target variables",
                components.len(),
                target.ctx().len()
            )));
        }
        for c in &components {
            in_ctx(c, source.ctx(), "map component")?;
        }
        if source.rank() != target.rank() {
            return Err(Error::Precondition(format!(
                "leaf dimensions differ ({} vs {}); Φ must be a leafwise local diffeomorphism",
                source.rank(),
                target.rank()
            )));
        }
        for (a, c) in components.iter().enumerate().skip(target.rank()) {
            if let Some(i) = (0..source.rank()).find(|&i| c.depends_on(i)) {
                return Err(Error::Precondition(format!(
                    "transverse component {} = {c} depends on leaf variable {}",
                    target.ctx().name(a),
                    source.ctx().name(i)
                )));
            }
        }
        Ok(PolyMap { source: source.clone(), target: target.clone(), components })
    }

    pub fn identity(chart: &PoissonChart<S>) -> Self {
        let comps = (0..chart.ctx().len()).map(|i| Polynomial::var(chart.ctx(), i)).collect();
        PolyMap { source: chart.clone(), target: chart.clone(), components: comps }
    }

    /// `Φ^a = Σ_b A_{ab} x^b + shift_a`.
    pub fn affine(source: &PoissonChart<S>, target: &PoissonChart<S>, a: &Matrix<S>, shift: &[S]) -> Result<Self> {
        let (n, m) = (target.ctx().len(), source.ctx().len());
        if a.nrows() != n || a.ncols() != m || shift.len() != n {
            return Err(Error::Precondition(format!("affine map needs a {n}×{m} matrix and {n} shifts")));
        }
        let ctx = source.ctx();
        let comps = (0..n)
            .map(|i| {
                let mut p = Polynomial::constant(ctx, shift[i].clone());
                for j in 0..m {
                    p.add_assign_ref(&Polynomial::var(ctx, j).scale(a.get(i, j)));
                }
                p
            })
            .collect();
        Self::new(source, target, comps)
    }

    pub fn source(&self) -> &PoissonChart<S> {
        &self.source
    }

    pub fn target(&self) -> &PoissonChart<S> {
        &self.target
    }

    pub fn components(&self) -> &[Polynomial<S>] {
        &self.components
    }

    /// `F∘Φ` for `F` over the target.
    pub fn pullback(&self, f: &Polynomial<S>) -> Result<Polynomial<S>> {
        in_ctx(f, self.target.ctx(), "pulled-back function")?;
        f.compose(&self.components, self.source.ctx())
    }

    pub fn pullback_series(&self, s: &Series<S>) -> Result<Series<S>> {
        if !same_ctx(s.ctx(), self.target.ctx()) {
            return Err(Error::Context("pulled-back series lives over another variable context".into()));
        }
        let images: Vec<Series<S>> = self.components.iter().map(|c| Series::exact(c.clone())).collect();
        s.compose(&images, self.source.ctx())
    }

    /// `J^a_i = ∂_i Φ^a` over leaf indices.
    pub fn leafwise_jacobian(&self) -> Vec<Vec<Polynomial<S>>> {
        let r = self.source.rank();
        (0..r).map(|a| (0..r).map(|i| self.components[a].diff(i)).collect()).collect()
    }

    /// `(Φ*w)_{ij} − v_{ij}` with `(Φ*w)_{ij} = Σ w_{ab}∘Φ J^a_i J^b_j`.
    fn form_residuals(&self, label: &str, v: &SeriesMatrix<S>, w: &SeriesMatrix<S>) -> Result<Vec<String>> {
        let r = self.source.rank();
        let jac = self.leafwise_jacobian();
        let ctx = self.source.ctx();
        let mut wp = vec![vec![Series::zero(ctx); r]; r];
        for a in 0..r {
            for b in 0..r {
                if !w[a][b].is_exact_zero() {
                    wp[a][b] = self.pullback_series(&w[a][b])?;
                }
            }
        }
        let mut out = Vec::new();
        for i in 0..r {
            for j in i + 1..r {
                let mut acc = v[i][j].neg();
                for a in 0..r {
                    for b in 0..r {
                        if wp[a][b].is_exact_zero() {
                            continue;
                        }
                        acc.add_assign(&wp[a][b].mul_poly(&(&jac[a][i] * &jac[b][j])));
                    }
                }
                push_residual(&mut out, format!("{label}[{},{}]", i + 1, j + 1), &acc);
            }
        }
        Ok(out)
    }

    /// `JᵀωJ = ω` on the leaves.
    pub fn symplectic_residuals(&self) -> Result<Vec<String>> {
        self.form_residuals("(J^T omega J - omega)", self.source.omega(), self.target.omega())
    }

    /// `{Φ^a, Φ^b}_source = Π^{ab}_target∘Φ` for all target coordinates.
    pub fn poisson_residuals(&self) -> Result<Vec<String>> {
        let n = self.target.ctx().len();
        let r = self.target.rank();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let br = self
                    .source
                    .bracket(&Series::exact(self.components[a].clone()), &Series::exact(self.components[b].clone()));
                let pi = if a < r && b < r { self.pullback_series(&self.target.pi()[a][b])? } else { Series::zero(self.source.ctx()) };
                push_residual(&mut out, format!("{{Phi^{}, Phi^{}}} - Pi^{}{}(Phi)", a + 1, b + 1, a + 1, b + 1), &br.sub(&pi));
            }
        }
        Ok(out)
    }

    /// `Φ*∇^target = ∇^source`: `J^c_k Γ_src^k_{ij} = ∂_i∂_jΦ^c + Γ_tgt^c_{ab}∘Φ J^a_i J^b_j`.
    pub fn connection_residuals(&self, src: &LeafConnection<S>, tgt: &LeafConnection<S>) -> Result<Vec<String>> {
        let r = self.source.rank();
        let jac = self.leafwise_jacobian();
        let mut gt = vec![vec![vec![Series::zero(self.source.ctx()); r]; r]; r];
        for (c, gc) in gt.iter_mut().enumerate() {
            for (a, ga) in gc.iter_mut().enumerate() {
                for (b, g) in ga.iter_mut().enumerate() {
                    let t = tgt.get(c, a, b);
                    if !t.is_exact_zero() {
                        *g = self.pullback_series(t)?;
                    }
                }
            }
        }
        let mut out = Vec::new();
        for c in 0..r {
            for i in 0..r {
                for j in 0..r {
                    let mut acc = Series::exact(self.components[c].diff(i).diff(j)).neg();
                    for k in 0..r {
                        acc.add_assign(&src.get(k, i, j).mul_poly(&jac[c][k]));
                    }
                    for a in 0..r {
                        for b in 0..r {
                            if !gt[c][a][b].is_exact_zero() {
                                acc.add_assign(&gt[c][a][b].mul_poly(&(&jac[a][i] * &jac[b][j])).neg());
                            }
                        }
                    }
                    push_residual(&mut out, format!("(Phi* Gamma)^{}_{}{}", c + 1, i + 1, j + 1), &acc);
                }
            }
        }
        Ok(out)
    }

    /// `Φ*Ω′_target = Ω′_source`, order by order in ℏ.
    fn offset_residuals(&self, src: &StarProduct<S>, tgt: &StarProduct<S>) -> Result<Vec<String>> {
        let (os, ot) = (offset_forms(src), offset_forms(tgt));
        let r = self.source.rank();
        let zero = |ctx: &Ctx| vec![vec![Series::zero(ctx); r]; r];
        let mut out = Vec::new();
        for h in os.keys().chain(ot.keys()).collect::<BTreeSet<_>>() {
            let v = os.get(h).cloned().unwrap_or_else(|| zero(self.source.ctx()));
            let w = ot.get(h).cloned().unwrap_or_else(|| zero(self.target.ctx()));
            out.extend(self.form_residuals(&format!("hbar^{h} (Phi* Omega' - Omega')"), &v, &w)?);
        }
        Ok(out)
    }
}

fn precondition(what: &str, res: &[String]) -> Result<()> {
    if res.is_empty() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{what}: {}", res.join("; "))))
    }
}

fn check_star_ctx<S: ComplexScalar>(sp: &dyn StarOracle<S>, chart: &PoissonChart<S>, side: &str) -> Result<()> {
    if same_ctx(sp.ctx(), chart.ctx()) {
        Ok(())
    } else {
        Err(Error::Context(format!("{side} star product is over another chart")))
    }
}

fn reduce_opt<S: ComplexScalar>(subset: Option<&WhitneySubset<S>>, s: &Series<S>, k: u32) -> Result<Series<S>> {
    match subset {
        Some(x) => x.reduce_at(s, x.effective_order(k)),
        None => Ok(s.clone()),
    }
}

/// `Φ*(F ⋆ G) − Φ*F ⋆ Φ*G` through `ℏ^K` on a battery of target pairs,
/// modulo the source subset ideal when a subset pair `(Y ⊂ source, X ⊂ target)`
/// is given.
pub fn pullback_morphism_check<S: ComplexScalar>(
    map: &PolyMap<S>,
    sp_source: &StarProduct<S>,
    sp_target: &StarProduct<S>,
    subsets: Option<(&WhitneySubset<S>, &WhitneySubset<S>)>,
    battery: &[(Polynomial<S>, Polynomial<S>)],
    k: u32,
) -> Result<Report> {
    check_star_ctx(sp_source, map.source(), "source")?;
    check_star_ctx(sp_target, map.target(), "target")?;
    precondition("leafwise Jacobian is not symplectic", &map.symplectic_residuals()?)?;
    precondition(
        "connections are not related by pullback",
        &map.connection_residuals(sp_source.state().connection(), sp_target.state().connection())?,
    )?;
    precondition("curvature offsets are not related by pullback", &map.offset_residuals(sp_source, sp_target)?)?;

    let mut report = Report::new("pullback morphism");
    report.push(Check::from_residuals("Phi is a Poisson map", map.poisson_residuals()?));
    let y = subsets.map(|(y, _)| y);
    if let Some((y, x)) = subsets {
        if !same_ctx(y.ctx(), map.source().ctx()) || !same_ctx(x.ctx(), map.target().ctx()) {
            return Err(Error::Context("subset pair does not match the map".into()));
        }
        let mut res = Vec::new();
        for g in x.generators() {
            let pg = Series::exact(map.pullback(g)?);
            let nf = y.reduce_at(&pg, 0)?;
            push_residual(&mut res, format!("Phi*({g}) mod I_Y"), &nf);
        }
        report.push(Check::from_residuals("Phi maps Y into X", res));
    }
    for (f, g) in battery {
        let ct = sp_target.star(f, g, k)?;
        let (pf, pg) = (map.pullback(f)?, map.pullback(g)?);
        let cs = sp_source.star(&pf, &pg, k)?;
        let mut res = Vec::new();
        for (i, (a, b)) in ct.iter().zip(&cs).enumerate() {
            let d = reduce_opt(y, &map.pullback_series(a)?.sub(b), i as u32)?;
            push_residual(&mut res, format!("hbar^{i}"), &d);
        }
        report.push(Check::from_residuals(format!("Phi*(f * g) = Phi*f * Phi*g at (f, g) = ({f}, {g})"), res));
    }
    Ok(report)
}

/// A symmetry: finitely many linear maps, or one linear vector field.
#[derive(Clone, Debug)]
pub enum GroupAction<S: ComplexScalar> {
    /// `table[i][j] = k` declares `A_i A_j = A_k`; without it closure is searched.
    Finite { elements: Vec<Matrix<S>>, table: Option<Vec<Vec<usize>>> },
    /// `X = Σ_{ij} A_{ij} x^j ∂_i`.
    Infinitesimal { generator: Matrix<S> },
}

fn hypothesis(c: Check, h: &str) -> Check {
    c.with_note(format!("hypothesis: {h}"))
}

/// `X(f) = Σ_i (Ax)^i ∂_i f`.
pub fn apply_vector_field<S: ComplexScalar>(a: &Matrix<S>, s: &Series<S>) -> Series<S> {
    let ctx = s.ctx();
    let mut out = Series::zero(ctx);
    for i in 0..ctx.len() {
        let d = s.diff(i);
        if d.is_exact_zero() {
            continue;
        }
        let mut xi = Polynomial::zero(ctx);
        for j in 0..ctx.len() {
            xi.add_assign_ref(&Polynomial::var(ctx, j).scale(a.get(i, j)));
        }
        if !xi.is_zero() {
            out.add_assign(&d.mul_poly(&xi));
        }
    }
    out
}

impl<S: ComplexScalar> GroupAction<S> {
    pub fn finite(elements: Vec<Matrix<S>>, table: Option<Vec<Vec<usize>>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Precondition("a finite group needs at least one element".into()));
        }
        let n = elements[0].nrows();
        for (i, e) in elements.iter().enumerate() {
            if e.nrows() != n || e.ncols() != n {
                return Err(Error::Precondition(format!("group element {i} is not {n}×{n}")));
            }
            if e.inverse().is_none() {
                return Err(Error::Precondition(format!("group element {i} is not invertible")));
            }
        }
        if let Some(t) = &table {
            if t.len() != elements.len() || t.iter().any(|r| r.len() != elements.len() || r.iter().any(|&k| k >= elements.len())) {
                return Err(Error::Precondition("group table has the wrong shape".into()));
            }
        }
        Ok(GroupAction::Finite { elements, table })
    }

    pub fn infinitesimal(generator: Matrix<S>) -> Result<Self> {
        if generator.nrows() != generator.ncols() {
            return Err(Error::Precondition("generator matrix must be square".into()));
        }
        Ok(GroupAction::Infinitesimal { generator })
    }

    /// Closure and every implementable hypothesis of the invariance theorem:
    /// the action is by Poisson maps preserving ω, ∇, `Ω′` and the subset ideal.
    pub fn validate(&self, sp: &StarProduct<S>, subset: Option<&WhitneySubset<S>>) -> Result<Report> {
        let chart = sp.state().chart();
        let n = chart.ctx().len();
        let mut report = Report::new("group action");
        match self {
            GroupAction::Finite { elements, table } => {
                if elements[0].nrows() != n {
                    return Err(Error::Precondition(format!("group elements must be {n}×{n}")));
                }
                let idx = |m: &Matrix<S>| elements.iter().position(|e| e == m);
                report.push(hypothesis(
                    Check::from_residuals(
                        "contains the identity",
                        if idx(&Matrix::identity(n)).is_some() { vec![] } else { vec!["identity matrix missing".into()] },
                    ),
                    "G is a group",
                ));
                let mut res = Vec::new();
                for (i, a) in elements.iter().enumerate() {
                    for (j, b) in elements.iter().enumerate() {
                        let p = a.mul(b);
                        match (table, idx(&p)) {
                            (Some(t), _) if elements[t[i][j]] != p => {
                                res.push(format!("A{i}*A{j} != A{} as declared", t[i][j]))
                            }
                            (None, None) => res.push(format!("A{i}*A{j} is not in the set")),
                            _ => {}
                        }
                    }
                }
                report.push(hypothesis(Check::from_residuals("closed under composition", res), "G is a group"));
                let zero = vec![S::zero(); n];
                for (i, a) in elements.iter().enumerate() {
                    let map = match PolyMap::affine(chart, chart, a, &zero) {
                        Ok(m) => m,
                        Err(e) => {
                            report.push(Check::fail(format!("A{i} preserves the foliation"), vec![e.to_string()]));
                            continue;
                        }
                    };
                    report.push(hypothesis(
                        Check::from_residuals(format!("A{i} preserves Pi"), map.poisson_residuals()?),
                        "G acts by Poisson maps",
                    ));
                    report.push(hypothesis(
                        Check::from_residuals(format!("A{i} preserves omega"), map.symplectic_residuals()?),
                        "G acts by Poisson maps",
                    ));
                    let conn = sp.state().connection();
                    report.push(hypothesis(
                        Check::from_residuals(format!("A{i} preserves the connection"), map.connection_residuals(conn, conn)?),
                        "nabla is G-invariant",
                    ));
                    report.push(hypothesis(
                        Check::from_residuals(format!("A{i} preserves the curvature offset"), map.offset_residuals(sp, sp)?),
                        "Omega is G-invariant",
                    ));
                    if let Some(x) = subset {
                        let mut res = Vec::new();
                        for g in x.generators() {
                            let nf = x.reduce_at(&Series::exact(map.pullback(g)?), 0)?;
                            push_residual(&mut res, format!("A{i}*({g}) mod I"), &nf);
                        }
                        report.push(hypothesis(
                            Check::from_residuals(format!("A{i} preserves the subset ideal"), res),
                            "X is G-invariant",
                        ));
                    }
                }
            }
            GroupAction::Infinitesimal { generator: a } => {
                if a.nrows() != n {
                    return Err(Error::Precondition(format!("generator must be {n}×{n}")));
                }
                let r = chart.rank();
                let ctx = chart.ctx();
                let mut res = Vec::new();
                for t in r..n {
                    for l in 0..r {
                        if !a.get(t, l).is_zero() {
                            res.push(format!("X^{} depends on leaf variable {}", ctx.name(t), ctx.name(l)));
                        }
                    }
                }
                report.push(hypothesis(Check::from_residuals("X preserves the foliation", res), "G acts by foliated maps"));
                let x = |s: &Series<S>| apply_vector_field(a, s);
                let (pi, om) = (chart.pi(), chart.omega());
                let mut rp = Vec::new();
                let mut ro = Vec::new();
                for i in 0..r {
                    for j in i + 1..r {
                        let mut lp = x(&pi[i][j]);
                        let mut lo = x(&om[i][j]);
                        for c in 0..r {
                            lp = lp.sub(&pi[c][j].scale(a.get(i, c))).sub(&pi[i][c].scale(a.get(j, c)));
                            lo = lo.add(&om[c][j].scale(a.get(c, i))).add(&om[i][c].scale(a.get(c, j)));
                        }
                        push_residual(&mut rp, format!("(L_X Pi)^{}{}", i + 1, j + 1), &lp);
                        push_residual(&mut ro, format!("(L_X omega)_{}{}", i + 1, j + 1), &lo);
                    }
                }
                report.push(hypothesis(Check::from_residuals("L_X Pi = 0", rp), "G acts by Poisson maps"));
                report.push(hypothesis(Check::from_residuals("L_X omega = 0", ro), "G acts by Poisson maps"));
                let conn = sp.state().connection();
                let mut rg = Vec::new();
                for k in 0..r {
                    for i in 0..r {
                        for j in 0..r {
                            let mut acc = x(conn.get(k, i, j));
                            for l in 0..r {
                                acc = acc
                                    .sub(&conn.get(l, i, j).scale(a.get(k, l)))
                                    .add(&conn.get(k, l, j).scale(a.get(l, i)))
                                    .add(&conn.get(k, i, l).scale(a.get(l, j)));
                            }
                            push_residual(&mut rg, format!("(L_X Gamma)^{}_{}{}", k + 1, i + 1, j + 1), &acc);
                        }
                    }
                }
                report.push(hypothesis(Check::from_residuals("L_X Gamma = 0", rg), "nabla is G-invariant"));
                let mut rw = Vec::new();
                for (h, m) in offset_forms(sp) {
                    for i in 0..r {
                        for j in i + 1..r {
                            let mut lo = x(&m[i][j]);
                            for c in 0..r {
                                lo = lo.add(&m[c][j].scale(a.get(c, i))).add(&m[i][c].scale(a.get(c, j)));
                            }
                            push_residual(&mut rw, format!("hbar^{h} (L_X Omega')_{}{}", i + 1, j + 1), &lo);
                        }
                    }
                }
                report.push(hypothesis(Check::from_residuals("L_X Omega' = 0", rw), "Omega is G-invariant"));
                if let Some(sub) = subset {
                    let mut res = Vec::new();
                    for g in sub.generators() {
                        let nf = sub.reduce_at(&x(&Series::exact(g.clone())), 0)?;
                        push_residual(&mut res, format!("X({g}) mod I"), &nf);
                    }
                    report.push(hypothesis(Check::from_residuals("X preserves the subset ideal", res), "X is G-invariant"));
                }
            }
        }
        Ok(report)
    }
}

/// `g·(F⋆G) − (g·F)⋆(g·G)` for every element, or `X(c_k(F,G)) − c_k(XF,G) −
/// c_k(F,XG)` for a generator, modulo the subset at order `m − k·d`.
pub fn invariance_check<S: ComplexScalar>(
    action: &GroupAction<S>,
    sp: &StarProduct<S>,
    subset: Option<&WhitneySubset<S>>,
    battery: &[(Polynomial<S>, Polynomial<S>)],
    k: u32,
) -> Result<Report> {
    let mut report = action.validate(sp, subset)?;
    if !report.passed() {
        let broken: Vec<String> = report
            .failures()
            .map(|c| if c.residuals.is_empty() { c.name.clone() } else { format!("{} ({})", c.name, c.residuals.join("; ")) })
            .collect();
        return Err(Error::Precondition(format!("invalid group action: {}", broken.join(", "))));
    }
    report.title = "invariance".into();
    let chart = sp.state().chart();
    for (f, g) in battery {
        in_ctx(f, chart.ctx(), "battery operand")?;
        in_ctx(g, chart.ctx(), "battery operand")?;
        let c = sp.star(f, g, k)?;
        match action {
            GroupAction::Finite { elements, .. } => {
                let zero = vec![S::zero(); chart.ctx().len()];
                for (e, a) in elements.iter().enumerate() {
                    let map = PolyMap::affine(chart, chart, a, &zero)?;
                    let cg = sp.star(&map.pullback(f)?, &map.pullback(g)?, k)?;
                    let mut res = Vec::new();
                    for (i, (x, y)) in c.iter().zip(&cg).enumerate() {
                        let d = reduce_opt(subset, &map.pullback_series(x)?.sub(y), i as u32)?;
                        push_residual(&mut res, format!("hbar^{i}"), &d);
                    }
                    report.push(Check::from_residuals(format!("A{e}.(f * g) = A{e}.f * A{e}.g at (f, g) = ({f}, {g})"), res));
                }
            }
            GroupAction::Infinitesimal { generator } => {
                let x = |p: &Polynomial<S>| apply_vector_field(generator, &Series::exact(p.clone())).into_poly();
                let cl = sp.star(&x(f), g, k)?;
                let cr = sp.star(f, &x(g), k)?;
                let mut res = Vec::new();
                for i in 0..=k as usize {
                    let d = apply_vector_field(generator, &c[i]).sub(&cl[i]).sub(&cr[i]);
                    push_residual(&mut res, format!("hbar^{i}"), &reduce_opt(subset, &d, i as u32)?);
                }
                report.push(Check::from_residuals(format!("X(c_k(f, g)) = c_k(Xf, g) + c_k(f, Xg) at (f, g) = ({f}, {g})"), res));
            }
        }
    }
    Ok(report)
}

/// Orbit projection `π: M → N` with the two subsets `X ⊂ M`, `Y ⊂ N`.
#[derive(Clone, Debug)]
pub struct ReductionSetup<S: ComplexScalar> {
    projection: PolyMap<S>,
    upstairs: Arc<WhitneySubset<S>>,
    downstairs: Arc<WhitneySubset<S>>,
    generator: Option<Matrix<S>>,
}

impl<S: ComplexScalar> ReductionSetup<S> {
    /// Validates that `π` is Poisson and pulls `I_Y` into `I_X`, and that the
    /// components are invariant under the optional infinitesimal generator.
    pub fn new(
        projection: PolyMap<S>,
        upstairs: Arc<WhitneySubset<S>>,
        downstairs: Arc<WhitneySubset<S>>,
        generator: Option<Matrix<S>>,
    ) -> Result<Self> {
        if !same_ctx(upstairs.ctx(), projection.source().ctx()) || !same_ctx(downstairs.ctx(), projection.target().ctx()) {
            return Err(Error::Context("subsets do not match the projection charts".into()));
        }
        let setup = ReductionSetup { projection, upstairs, downstairs, generator };
        let report = setup.validate()?;
        if !report.passed() {
            let res: Vec<String> = report.failures().flat_map(|c| c.residuals.clone()).collect();
            return Err(Error::Precondition(format!("invalid reduction setup: {}", res.join("; "))));
        }
        Ok(setup)
    }

    pub fn projection(&self) -> &PolyMap<S> {
        &self.projection
    }

    pub fn upstairs(&self) -> &WhitneySubset<S> {
        &self.upstairs
    }

    pub fn downstairs(&self) -> &WhitneySubset<S> {
        &self.downstairs
    }

    pub fn generator(&self) -> Option<&Matrix<S>> {
        self.generator.as_ref()
    }

    pub fn validate(&self) -> Result<Report> {
        let mut report = Report::new("reduction setup");
        report.push(Check::from_residuals("pi is a Poisson map", self.projection.poisson_residuals()?));
        report.push(Check::from_residuals("pi*(I_Y) in I_X", self.ideal_residuals()?));
        if let Some(a) = &self.generator {
            let mut res = Vec::new();
            for (i, c) in self.projection.components().iter().enumerate() {
                let xc = apply_vector_field(a, &Series::exact(c.clone()));
                push_residual(&mut res, format!("X(pi^{})", i + 1), &xc);
            }
            report.push(Check::from_residuals("pi is G-invariant", res));
        }
        Ok(report)
    }

    fn ideal_residuals(&self) -> Result<Vec<String>> {
        let (x, y) = (&self.upstairs, &self.downstairs);
        let mut res = Vec::new();
        for g in y.ideal().generators() {
            let pg = Series::exact(self.projection.pullback(g)?);
            push_residual(&mut res, format!("pi*({g}) mod I_X"), &x.reduce_at(&pg, x.order() as i64)?);
        }
        Ok(res)
    }

    fn pull_reduced(&self, s: &Series<S>, k: u32) -> Result<Series<S>> {
        let x = &self.upstairs;
        x.reduce_at(&self.projection.pullback_series(s)?, x.effective_order(k))
    }
}

/// `π*` as a map of jet algebras: unit, multiplicativity, ideal compatibility
/// and injectivity on a sample of downstairs polynomials.
pub fn projection_check<S: ComplexScalar>(setup: &ReductionSetup<S>, sample: &[Polynomial<S>]) -> Result<Report> {
    let (x, y, pi) = (setup.upstairs(), setup.downstairs(), setup.projection());
    let xo = x.order() as i64;
    let mut report = Report::new("projection");
    let one = pi.pullback(&Polynomial::one(pi.target().ctx()))?;
    report.push(Check::from_residuals(
        "pi*(1) = 1",
        if one.is_one() { vec![] } else { vec![format!("pi*(1) = {one}")] },
    ));
    let mut res = Vec::new();
    for (i, f) in sample.iter().enumerate() {
        for g in &sample[i..] {
            let d = pi.pullback(&(f * g))? - &pi.pullback(f)? * &pi.pullback(g)?;
            push_residual(&mut res, format!("pi*(f * g) - pi*f * pi*g at (f, g) = ({f}, {g})"), &x.reduce_at(&Series::exact(d), xo)?);
        }
    }
    report.push(Check::from_residuals("pi* is an algebra morphism on jets", res));
    let mut res = setup.ideal_residuals()?;
    let mut inj = Vec::new();
    let mut witnesses = Vec::new();
    for f in sample {
        in_ctx(f, y.ctx(), "sample jet")?;
        let jy = y.reduce_at(&Series::exact(f.clone()), y.order() as i64)?;
        let jx = x.reduce_at(&Series::exact(pi.pullback(f)?), xo)?;
        match (jy.is_zero_mod_precision(), jx.is_zero_mod_precision()) {
            (true, false) => res.push(format!("{f} in I_Y but pi*({f}) = {} mod I_X", series_text(&jx))),
            (false, true) => inj.push(format!("{f} = {} mod I_Y but pi*({f}) in I_X", series_text(&jy))),
            (false, false) => witnesses.push(format!("pi*({f}) = {}", series_text(&jx))),
            (true, true) => {}
        }
    }
    report.push(Check::from_residuals("pi*(I_Y) in I_X", res));
    let mut check = Check::from_residuals("pi* is injective on the sample", inj);
    if !witnesses.is_empty() {
        check = check.with_note(format!("witnesses: {}", witnesses.join("; ")));
    }
    report.push(check);
    Ok(report)
}

/// `π*(c_k^N(F,G)) − c_k^M(π*F, π*G)` modulo `I_X` at order `m − k·d`, plus
/// invariance of the upstairs output when a generator is known.
pub fn reduction_compare<S: ComplexScalar>(
    setup: &ReductionSetup<S>,
    sp_m: &dyn StarOracle<S>,
    sp_n: &dyn StarOracle<S>,
    battery: &[(Polynomial<S>, Polynomial<S>)],
    k: u32,
) -> Result<Report> {
    let pi = setup.projection();
    check_star_ctx(sp_m, pi.source(), "upstairs")?;
    check_star_ctx(sp_n, pi.target(), "downstairs")?;
    let x = setup.upstairs();
    let mut report = Report::new("reduction");
    for (f, g) in battery {
        let cn = sp_n.star(f, g, k)?;
        let cm = sp_m.star(&pi.pullback(f)?, &pi.pullback(g)?, k)?;
        let mut res = Vec::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for i in 0..=k as usize {
            let l = setup.pull_reduced(&cn[i], i as u32)?;
            let r = x.reduce_at(&cm[i], x.effective_order(i as u32))?;
            push_residual(&mut res, format!("hbar^{i}"), &l.sub(&r));
            if let Some(a) = setup.generator() {
                let xr = x.reduce_at(&apply_vector_field(a, &cm[i]), x.effective_order(i as u32))?;
                push_residual(&mut res, format!("upstairs output not invariant: hbar^{i} X(c)"), &xr);
            }
            left.push(l);
            right.push(r);
        }
        report.push(
            Check::from_residuals(format!("pi*(f *N g) = pi*f *M pi*g at (f, g) = ({f}, {g})"), res)
                .with_note(format!("N side {}, M side {}", coeffs_text(&left), coeffs_text(&right))),
        );
    }
    Ok(report)
}

/// `Σ_γ a_γ ∂^γ` with leaf multi-indices `γ` and polynomial coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp<S: ComplexScalar> {
    ctx: Ctx,
    terms: BTreeMap<Monomial, Polynomial<S>>,
}

impl<S: ComplexScalar> DiffOp<S> {
    pub fn zero(ctx: &Ctx) -> Self {
        DiffOp { ctx: ctx.clone(), terms: BTreeMap::new() }
    }

    /// `Σ coef·∂^γ`; every `γ` may only involve leaf variables.
    pub fn from_terms(ctx: &Ctx, terms: impl IntoIterator<Item = (Monomial, Polynomial<S>)>) -> Result<Self> {
        let mut op = Self::zero(ctx);
        for (gamma, c) in terms {
            in_ctx(&c, ctx, "operator coefficient")?;
            if gamma.nvars() != ctx.len() {
                return Err(Error::Context("derivative multi-index has the wrong length".into()));
            }
            if let Some(i) = (0..ctx.len()).find(|&i| gamma.exp(i) > 0 && ctx.class(i) != VarClass::LeafBase) {
                return Err(Error::Precondition(format!("derivative along non-leaf variable {}", ctx.name(i))));
            }
            op.add_term(gamma, &c);
        }
        Ok(op)
    }

    fn add_term(&mut self, gamma: Monomial, c: &Polynomial<S>) {
        let e = self.terms.entry(gamma.clone()).or_insert_with(|| Polynomial::zero(&self.ctx));
        e.add_assign_ref(c);
        if e.is_zero() {
            self.terms.remove(&gamma);
        }
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Polynomial<S>)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest derivative order.
    pub fn order(&self) -> u32 {
        self.terms.keys().map(|g| g.degree()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.add_term(g.clone(), c);
        }
        out
    }

    pub fn apply(&self, f: &Polynomial<S>) -> Polynomial<S> {
        let mut out = Polynomial::zero(&self.ctx);
        for (g, c) in &self.terms {
            let d = f.diff_multi(g.exponents());
            if !d.is_zero() {
                out.add_assign_ref(&(c * &d));
            }
        }
        out
    }

    pub fn apply_series(&self, s: &Series<S>) -> Series<S> {
        let mut out = Series::zero(&self.ctx);
        for (g, c) in &self.terms {
            let d = s.diff_multi(g.exponents());
            if !d.is_exact_zero() {
                out.add_assign(&d.mul_poly(c));
            }
        }
        out
    }
}

impl<S: ComplexScalar> fmt::Display for DiffOp<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(g, c)| {
                let d = Polynomial::<S>::monomial(&self.ctx, g.clone(), S::one());
                match (g.is_one(), c.is_one()) {
                    (true, _) => format!("({c})"),
                    (false, true) => format!("D[{d}]"),
                    (false, false) => format!("({c})*D[{d}]"),
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `T⁻¹(Tf ⋆ Tg)` with `T = 1 + Σ_i ℏ^i gauge[i−1]`.
pub fn gauged_star<S: ComplexScalar>(
    inner: &dyn StarOracle<S>,
    gauge: &[DiffOp<S>],
    f: &Polynomial<S>,
    g: &Polynomial<S>,
    k: u32,
) -> Result<Vec<Series<S>>> {
    let lift = |p: &Polynomial<S>| -> Vec<Series<S>> {
        (0..=k as usize)
            .map(|i| match i {
                0 => Series::exact(p.clone()),
                _ => gauge.get(i - 1).map_or_else(|| Series::zero(p.ctx()), |t| Series::exact(t.apply(p))),
            })
            .collect()
    };
    let s = star_series(inner, &lift(f), &lift(g), k)?;
    // solve T w = s
    let mut w: Vec<Series<S>> = Vec::with_capacity(s.len());
    for (n, sn) in s.iter().enumerate() {
        let mut v = sn.clone();
        for i in 1..=n {
            if let Some(t) = gauge.get(i - 1) {
                v = v.sub(&t.apply_series(&w[n - i]));
            }
        }
        w.push(v);
    }
    Ok(w)
}

/// A star product conjugated by a gauge series.
pub struct GaugedStar<S: ComplexScalar> {
    inner: Arc<dyn StarOracle<S>>,
    gauge: Vec<DiffOp<S>>,
}

impl<S: ComplexScalar> GaugedStar<S> {
    pub fn new(inner: Arc<dyn StarOracle<S>>, gauge: Vec<DiffOp<S>>) -> Result<Self> {
        if gauge.iter().any(|t| !same_ctx(t.ctx(), inner.ctx())) {
            return Err(Error::Context("gauge operator over another chart".into()));
        }
        Ok(GaugedStar { inner, gauge })
    }

    pub fn gauge(&self) -> &[DiffOp<S>] {
        &self.gauge
    }
}

impl<S: ComplexScalar> StarOracle<S> for GaugedStar<S> {
    fn ctx(&self) -> &Ctx {
        self.inner.ctx()
    }

    fn star(&self, f: &Polynomial<S>, g: &Polynomial<S>, k: u32) -> Result<Vec<Series<S>>> {
        gauged_star(&*self.inner, &self.gauge, f, g, k)
    }
}

type MonoPair = (Monomial, Monomial);

/// Bilinear cache: coefficients on monomial pairs, combined by linearity.
struct MonomialStar<'a, S: ComplexScalar> {
    inner: &'a dyn StarOracle<S>,
    k: u32,
    cache: Mutex<HashMap<MonoPair, Arc<Vec<Series<S>>>>>,
}

impl<'a, S: ComplexScalar> MonomialStar<'a, S> {
    fn new(inner: &'a dyn StarOracle<S>, k: u32) -> Self {
        MonomialStar { inner, k, cache: Mutex::new(HashMap::new()) }
    }

    fn pair(&self, a: &Monomial, b: &Monomial) -> Result<Arc<Vec<Series<S>>>> {
        let key = (a.clone(), b.clone());
        if let Some(c) = self.cache.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let ctx = self.inner.ctx();
        let c = Arc::new(self.inner.star(
            &Polynomial::monomial(ctx, a.clone(), S::one()),
            &Polynomial::monomial(ctx, b.clone(), S::one()),
            self.k,
        )?);
        self.cache.lock().unwrap().insert(key, c.clone());
        Ok(c)
    }

    /// `c_j(f, g)`.
    fn coeff(&self, f: &Polynomial<S>, g: &Polynomial<S>, j: u32) -> Result<Series<S>> {
        if j > self.k {
            return Err(Error::Truncation { message: "cached star order".into(), required: j, have: self.k });
        }
        let mut acc = Series::zero(self.inner.ctx());
        for (ma, a) in f.terms() {
            for (mb, b) in g.terms() {
                acc.add_assign(&self.pair(ma, mb)?[j as usize].scale(&a.mul_ref(b)));
            }
        }
        Ok(acc)
    }
}

/// Bounds of the equivalence ansatz.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceAnsatz {
    /// Total degree bound of the operator coefficients.
    pub coefficient_degree: u32,
    /// Derivative order of `T_k`; `None` means `2k`.
    pub derivative_order: Option<u32>,
    /// Leaf monomials of degree `1..=battery_degree` in each slot; `None` means `2K − 1`.
    pub battery_degree: Option<u32>,
    /// Only equations at total degree `≤ jet_order` are imposed (always also
    /// limited to the degrees the data determines).
    pub jet_order: Option<u32>,
}

impl EquivalenceAnsatz {
    pub fn new(coefficient_degree: u32) -> Self {
        EquivalenceAnsatz { coefficient_degree, derivative_order: None, battery_degree: None, jet_order: None }
    }
}

/// Size of the linear system solved at one order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderSolve {
    pub order: u32,
    pub unknowns: usize,
    pub equations: usize,
    pub rank: usize,
    /// Rank of the vector-field correction of `T_{k−1}` (antisymmetric part).
    pub correction_rank: usize,
}

#[derive(Clone, Debug)]
pub struct Equivalence<S: ComplexScalar> {
    /// `T_1, …, T_K`.
    pub operators: Vec<DiffOp<S>>,
    pub orders: Vec<OrderSolve>,
}

/// Exponent vectors of total degree in `lo..=hi` supported on `idx`.
fn monomials(nv: usize, idx: &[usize], lo: u32, hi: u32) -> Vec<Monomial> {
    fn rec(idx: &[usize], left: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        match idx.split_first() {
            None => out.push(Monomial::from_exponents(cur.clone())),
            Some((&i, rest)) => {
                for e in 0..=left {
                    cur[i] = e;
                    rec(rest, left - e, cur, out);
                }
                cur[i] = 0;
            }
        }
    }
    let mut out = Vec::new();
    rec(idx, hi, &mut vec![0; nv], &mut out);
    out.retain(|m| m.degree() >= lo);
    out.sort();
    out
}

/// Equation right-hand sides and columns for one battery pair, by output monomial.
struct Rows<S: ComplexScalar> {
    cols: BTreeMap<Monomial, BTreeMap<usize, S>>,
    rhs: Series<S>,
    prec: Precision,
}

impl<S: ComplexScalar> Rows<S> {
    fn new(rhs: Series<S>) -> Self {
        let prec = rhs.precision();
        Rows { cols: BTreeMap::new(), rhs, prec }
    }

    fn add_column(&mut self, col: usize, s: &Series<S>) {
        self.prec = self.prec.min(s.precision());
        for (m, c) in s.poly().terms() {
            let e = self.cols.entry(m.clone()).or_default().entry(col).or_insert_with(S::zero);
            *e = e.add_ref(c);
        }
    }

    /// Feed every determined equation; on inconsistency return the monomial and residual.
    fn feed(&self, sys: &mut SparseSystem<S>, jet: Option<u32>, count: &mut usize) -> std::result::Result<(), (Monomial, S)> {
        let mut keys: BTreeSet<&Monomial> = self.cols.keys().collect();
        keys.extend(self.rhs.poly().terms().map(|(m, _)| m));
        for m in keys {
            if !self.prec.knows(m.degree()) || jet.is_some_and(|j| m.degree() > j) {
                continue;
            }
            let row = self.cols.get(m).cloned().unwrap_or_default();
            let rhs = self.rhs.poly().coeff(m);
            if row.values().all(|v| v.is_zero()) && rhs.is_zero() {
                continue;
            }
            *count += 1;
            sys.add_equation(row, rhs).map_err(|e| (m.clone(), e.residual))?;
        }
        Ok(())
    }
}

/// `Σ_{i+j=k, i<k} T_i(c^A_j) − Σ_{a+b+c=k; a,b<k} c^B_c(T_a f, T_b g)`: the
/// order-`k` defect with `T_k = 0`. `c^B_0` is the commutative product (DQ0).
fn defect<S: ComplexScalar>(
    a: &MonomialStar<S>,
    b: &MonomialStar<S>,
    ts: &[DiffOp<S>],
    f: &Polynomial<S>,
    g: &Polynomial<S>,
    k: u32,
) -> Result<Series<S>> {
    let ku = k as usize;
    let mut left = a.coeff(f, g, k)?;
    for i in 1..ku {
        left.add_assign(&ts[i - 1].apply_series(&a.coeff(f, g, k - i as u32)?));
    }
    let lift = |p: &Polynomial<S>| -> Vec<Polynomial<S>> {
        (0..ku).map(|i| if i == 0 { p.clone() } else { ts[i - 1].apply(p) }).collect()
    };
    let (tf, tg) = (lift(f), lift(g));
    let mut right = Series::zero(f.ctx());
    for (i, x) in tf.iter().enumerate() {
        for (j, y) in tg.iter().enumerate().take(ku + 1 - i) {
            if x.is_zero() || y.is_zero() {
                continue;
            }
            let c = k - (i + j) as u32;
            if c == 0 {
                right.add_assign(&Series::exact(x * y));
            } else {
                right.add_assign(&b.coeff(x, y, c)?);
            }
        }
    }
    Ok(left.sub(&right))
}

fn obstruction<S: ComplexScalar>(
    order: u32,
    what: &str,
    f: &Polynomial<S>,
    g: &Polynomial<S>,
    m: &Monomial,
    r: &S,
    hint: &str,
) -> Error {
    let mono = Polynomial::monomial(f.ctx(), m.clone(), S::one());
    let r = Polynomial::constant(f.ctx(), r.clone());
    Error::Obstruction { order, message: format!("{what} for ({f}, {g}) at monomial {mono} reduces to 0 = {r}; {hint}") }
}

/// Order-by-order solve for `T = 1 + ℏT_1 + … + ℏ^K T_K` with
/// `T(f ⋆_A g) = Tf ⋆_B Tg` on the monomial battery.
///
/// At order `k` the antisymmetric part of the defect does not involve `T_k`
/// and is linear in a vector-field correction of `T_{k−1}` (a derivation, so
/// order `k − 1` stays solved); that correction is solved first. The full
/// equation is then linear in `T_k` through its Hochschild coboundary.
/// First-order terms are free in that coboundary and stay zero unless a
/// correction needs them.
pub fn equivalence_solve<S: ComplexScalar>(
    sp_a: &dyn StarOracle<S>,
    sp_b: &dyn StarOracle<S>,
    k: u32,
    ansatz: &EquivalenceAnsatz,
) -> Result<Equivalence<S>> {
    if !same_ctx(sp_a.ctx(), sp_b.ctx()) {
        return Err(Error::Precondition("equivalence needs both star products on the same chart".into()));
    }
    let ctx = sp_a.ctx().clone();
    let nv = ctx.len();
    let leaf = ctx.indices_of_class(VarClass::LeafBase);
    let all: Vec<usize> = (0..nv).collect();
    let a = MonomialStar::new(sp_a, k);
    let b = MonomialStar::new(sp_b, k);
    let bd = ansatz.battery_degree.unwrap_or((2 * k).saturating_sub(1).max(1));
    let battery: Vec<Polynomial<S>> =
        monomials(nv, &leaf, 1, bd).into_iter().map(|m| Polynomial::monomial(&ctx, m, S::one())).collect();
    let betas = monomials(nv, &all, 0, ansatz.coefficient_degree);
    let jet = ansatz.jet_order;
    let mut ops: Vec<DiffOp<S>> = Vec::new();
    let mut orders = Vec::new();
    for order in 1..=k {
        let dmax = ansatz.derivative_order.unwrap_or(2 * order);
        let hint = format!(
            "no solution with derivative order ≤ {dmax} and coefficient degree ≤ {}; raise the ansatz bounds \
             if the star products should be equivalent",
            ansatz.coefficient_degree
        );
        // antisymmetric part
        let fields: Vec<DiffOp<S>> = if order >= 2 {
            leaf.iter()
                .flat_map(|&l| betas.iter().map(move |beta| (l, beta)))
                .map(|(l, beta)| DiffOp {
                    ctx: ctx.clone(),
                    terms: BTreeMap::from([(Monomial::var(nv, l, 1), Polynomial::monomial(&ctx, beta.clone(), S::one()))]),
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut sys = SparseSystem::new(fields.len());
        let mut equations = 0;
        for (i, f) in battery.iter().enumerate() {
            for g in &battery[i + 1..] {
                let rhs = defect(&a, &b, &ops, f, g, order)?.sub(&defect(&a, &b, &ops, g, f, order)?).neg();
                let mut rows = Rows::new(rhs);
                if !fields.is_empty() {
                    let (afg, agf) = (a.coeff(f, g, 1)?, a.coeff(g, f, 1)?);
                    for (col, u) in fields.iter().enumerate() {
                        let l = |p: &Polynomial<S>, q: &Polynomial<S>, apq: &Series<S>| -> Result<Series<S>> {
                            Ok(u.apply_series(apq).sub(&b.coeff(&u.apply(p), q, 1)?).sub(&b.coeff(p, &u.apply(q), 1)?))
                        };
                        let s = l(f, g, &afg)?.sub(&l(g, f, &agf)?);
                        if !s.is_exact_zero() {
                            rows.add_column(col, &s);
                        }
                    }
                }
                rows.feed(&mut sys, jet, &mut equations).map_err(|(m, r)| {
                    let what = if order == 1 { "the first-order commutator difference" } else { "the antisymmetric part" };
                    obstruction(order, what, f, g, &m, &r, &hint)
                })?;
            }
        }
        let correction_rank = sys.rank();
        if correction_rank > 0 {
            let x = sys.solve();
            let mut corr = DiffOp::zero(&ctx);
            for (u, c) in fields.iter().zip(&x) {
                for (gamma, coef) in u.terms() {
                    corr.add_term(gamma.clone(), &coef.scale(c));
                }
            }
            let prev = &mut ops[order as usize - 2];
            *prev = prev.add(&corr);
        }
        // full equation, linear in T_order
        let gammas = monomials(nv, &leaf, 1, dmax);
        let ncols = gammas.len() * betas.len();
        let mut sys = SparseSystem::new(ncols);
        for f in &battery {
            for g in &battery {
                let mut rows = Rows::new(defect(&a, &b, &ops, f, g, order)?.neg());
                let fg = f * g;
                for (gi, gamma) in gammas.iter().enumerate() {
                    let e = gamma.exponents();
                    let p = &(&fg.diff_multi(e) - &(g * &f.diff_multi(e))) - &(f * &g.diff_multi(e));
                    if p.is_zero() {
                        continue;
                    }
                    for (bi, beta) in betas.iter().enumerate() {
                        let mut shifted = Polynomial::zero(&ctx);
                        shifted.add_scaled_shifted(&S::one(), beta, &p);
                        rows.add_column(gi * betas.len() + bi, &Series::exact(shifted));
                    }
                }
                rows.feed(&mut sys, jet, &mut equations)
                    .map_err(|(m, r)| obstruction(order, "the order equation", f, g, &m, &r, &hint))?;
            }
        }
        let x = sys.solve();
        let mut op = DiffOp::zero(&ctx);
        for (col, c) in x.iter().enumerate() {
            if !c.is_zero() {
                let (gamma, beta) = (&gammas[col / betas.len()], &betas[col % betas.len()]);
                op.add_term(gamma.clone(), &Polynomial::monomial(&ctx, beta.clone(), c.clone()));
            }
        }
        ops.push(op);
        orders.push(OrderSolve { order, unknowns: ncols + fields.len(), equations, rank: sys.rank(), correction_rank });
    }
    Ok(Equivalence { operators: ops, orders })
}

/// `f ⋆_A g = T⁻¹(Tf ⋆_B Tg)` on (held-out) pairs, compared at the degrees
/// both sides determine, up to `jet_order`.
pub fn equivalence_validate<S: ComplexScalar>(
    sp_a: &dyn StarOracle<S>,
    sp_b: &dyn StarOracle<S>,
    operators: &[DiffOp<S>],
    pairs: &[(Polynomial<S>, Polynomial<S>)],
    k: u32,
    jet_order: Option<u32>,
) -> Result<Report> {
    let mut report = Report::new("equivalence validation");
    for (f, g) in pairs {
        let ca = sp_a.star(f, g, k)?;
        let cb = gauged_star(sp_b, operators, f, g, k)?;
        let mut res = Vec::new();
        let mut prec = Precision::EXACT;
        for (i, (x, y)) in ca.iter().zip(&cb).enumerate() {
            let d = x.sub(y);
            prec = prec.min(d.precision());
            let kept = Polynomial::from_terms(
                f.ctx(),
                d.poly()
                    .terms()
                    .filter(|(m, _)| d.precision().knows(m.degree()) && jet_order.is_none_or(|j| m.degree() <= j))
                    .map(|(m, c)| (m.clone(), c.clone())),
            );
            if !kept.is_zero() {
                res.push(format!("hbar^{i}: {kept}"));
            }
        }
        let mut check = Check::from_residuals(format!("f *A g = T^-1(Tf *B Tg) at (f, g) = ({f}, {g})"), res);
        let limit = match (prec.bound(), jet_order) {
            (Some(p), Some(j)) => Some(format!("compared through degree {}", (p as i64 - 1).min(j as i64))),
            (Some(p), None) => Some(format!("compared through degree {}", p as i64 - 1)),
            (None, Some(j)) => Some(format!("compared through degree {j}")),
            (None, None) => None,
        };
        if let Some(l) = limit {
            check = check.with_note(l);
        }
        report.push(check);
    }
    Ok(report)
}
