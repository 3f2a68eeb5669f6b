//! Finite-order Whitney jets along `X = Z(g_1, …, g_s)`.
//!
//! Jets of order `m` are polynomials modulo `⟨g⟩^{m+1}`. A derivative along the
//! leaves maps `⟨g⟩^{m+1}` into `⟨g⟩^m` when the `g` involve leaf variables, so
//! bidifferential results are well defined only at a lower order:
//! `m − k·d` for `c_k`, with `d = 1` for leaf-dependent generators and `d = 0`
//! otherwise. [`JetClass`] carries the order its representative is reduced at.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::coeff::{ideal_power, normal_form_series, ComplexScalar, Ctx, IdealSpec, Polynomial, Series, VarClass};
use crate::error::{Error, Result};
use crate::fedosov::{StarOracle, StarProduct};
use crate::geometry::PoissonChart;
use crate::report::{Check, Report};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// A closed subset given by polynomial equations, at jet order `m`.
#[derive(Debug)]
pub struct WhitneySubset<S: ComplexScalar> {
    id: u64,
    ctx: Ctx,
    generators: Vec<Polynomial<S>>,
    order: u32,
    bound: u32,
    loss: u32,
    ideals: Mutex<BTreeMap<u32, Arc<IdealSpec<S>>>>,
}

impl<S: ComplexScalar> Clone for WhitneySubset<S> {
    fn clone(&self) -> Self {
        WhitneySubset {
            id: self.id,
            ctx: self.ctx.clone(),
            generators: self.generators.clone(),
            order: self.order,
            bound: self.bound,
            loss: self.loss,
            ideals: Mutex::new(self.ideals.lock().unwrap().clone()),
        }
    }
}

impl<S: ComplexScalar> WhitneySubset<S> {
    /// `bound` is the total degree up to which normal forms are computed.
    pub fn new(ctx: &Ctx, generators: Vec<Polynomial<S>>, order: u32, bound: u32) -> Result<Self> {
        for g in &generators {
            if g.is_zero() {
                return Err(Error::Precondition("subset generators must be nonzero".into()));
            }
            if !Arc::ptr_eq(g.ctx(), ctx) {
                return Err(Error::Context("subset generator over another variable context".into()));
            }
        }
        let leaf = ctx.indices_of_class(VarClass::LeafBase);
        let loss = u32::from(generators.iter().any(|g| leaf.iter().any(|&i| g.depends_on(i))));
        Ok(WhitneySubset {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            ctx: ctx.clone(),
            generators,
            order,
            bound,
            loss,
            ideals: Mutex::new(BTreeMap::new()),
        })
    }

    /// `X = M`: the zero ideal, jets are polynomials.
    pub fn whole(ctx: &Ctx, bound: u32) -> Self {
        Self::new(ctx, Vec::new(), 0, bound).expect("no generators")
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn generators(&self) -> &[Polynomial<S>] {
        &self.generators
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn degree_bound(&self) -> u32 {
        self.bound
    }

    /// Order drop per derivative: 1 if a generator involves leaf variables.
    pub fn derivative_loss(&self) -> u32 {
        self.loss
    }

    /// `m − k·d`, the order at which `k`-th order bidifferential data is defined.
    pub fn effective_order(&self, k: u32) -> i64 {
        self.order as i64 - (k * self.loss) as i64
    }

    pub fn ideal(&self) -> Arc<IdealSpec<S>> {
        self.ideal_at(self.order)
    }

    /// `⟨g⟩^{order+1}`.
    pub fn ideal_at(&self, order: u32) -> Arc<IdealSpec<S>> {
        let mut map = self.ideals.lock().unwrap();
        map.entry(order).or_insert_with(|| Arc::new(ideal_power(&self.generators, order))).clone()
    }

    /// Normal form at `order`; a negative order is the trivial quotient.
    pub fn reduce_at(&self, s: &Series<S>, order: i64) -> Result<Series<S>> {
        if order < 0 && !self.generators.is_empty() {
            return Ok(Series::zero(&self.ctx));
        }
        if !Arc::ptr_eq(s.ctx(), &self.ctx) {
            return Err(Error::Context("polynomial over another variable context".into()));
        }
        normal_form_series(s, &self.ideal_at(order.max(0) as u32), self.bound)
    }

    pub fn contains_at(&self, s: &Series<S>, order: i64) -> Result<bool> {
        Ok(self.reduce_at(s, order)?.is_zero_mod_precision())
    }

    /// Largest order `m' ≤ m` with `s ∈ ⟨g⟩^{m'+1}`, `-1` if none.
    pub fn sharpest_order(&self, s: &Series<S>) -> Result<i64> {
        if self.generators.is_empty() {
            return Ok(if s.is_zero_mod_precision() { self.order as i64 } else { -1 });
        }
        for o in (0..=self.order as i64).rev() {
            if self.contains_at(s, o)? {
                return Ok(o);
            }
        }
        Ok(-1)
    }

    fn class(&self, rep: Series<S>, order: i64) -> Result<JetClass<S>> {
        Ok(JetClass { subset: self.id, rep: self.reduce_at(&rep, order)?, order })
    }

    fn same(&self, f: &JetClass<S>) -> Result<()> {
        if f.subset != self.id {
            return Err(Error::Context("jet classes along different subsets".into()));
        }
        Ok(())
    }

    /// Product in the quotient, at the lower of the two orders.
    pub fn mul(&self, f: &JetClass<S>, g: &JetClass<S>) -> Result<JetClass<S>> {
        self.same(f)?;
        self.same(g)?;
        self.class(f.rep.mul(&g.rep), f.order.min(g.order))
    }

    pub fn add(&self, f: &JetClass<S>, g: &JetClass<S>) -> Result<JetClass<S>> {
        self.same(f)?;
        self.same(g)?;
        self.class(f.rep.add(&g.rep), f.order.min(g.order))
    }

    pub fn sub(&self, f: &JetClass<S>, g: &JetClass<S>) -> Result<JetClass<S>> {
        self.same(f)?;
        self.same(g)?;
        self.class(f.rep.sub(&g.rep), f.order.min(g.order))
    }
}

/// A Whitney function at finite order, held by its normal form.
#[derive(Clone, Debug, PartialEq)]
pub struct JetClass<S: ComplexScalar> {
    subset: u64,
    rep: Series<S>,
    order: i64,
}

impl<S: ComplexScalar> JetClass<S> {
    pub fn rep(&self) -> &Series<S> {
        &self.rep
    }

    /// Jet order of the quotient the representative is reduced in.
    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.rep.is_zero_mod_precision()
    }
}

impl<S: ComplexScalar> fmt::Display for JetClass<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rep.precision().bound() {
            None => write!(f, "{}", self.rep.poly()),
            Some(b) => write!(f, "{} + O(deg {b})", self.rep.poly()),
        }
    }
}

/// `J_{X;M}(f)`.
pub fn jet_map<S: ComplexScalar>(subset: &WhitneySubset<S>, f: &Polynomial<S>) -> Result<JetClass<S>> {
    subset.class(Series::exact(f.clone()), subset.order as i64)
}

pub fn jet_series<S: ComplexScalar>(subset: &WhitneySubset<S>, f: &Series<S>) -> Result<JetClass<S>> {
    subset.class(f.clone(), subset.order as i64)
}

/// Class of `Π^{ij} ∂_i f ∂_j g`, defined at order `m − d`.
pub fn whitney_bracket<S: ComplexScalar>(
    subset: &WhitneySubset<S>,
    chart: &PoissonChart<S>,
    f: &JetClass<S>,
    g: &JetClass<S>,
) -> Result<JetClass<S>> {
    subset.same(f)?;
    subset.same(g)?;
    let order = f.order.min(g.order) - subset.loss as i64;
    subset.class(chart.bracket(&f.rep, &g.rep), order)
}

/// Classes of `c_0..c_K` of the representatives, reduced at the subset order.
pub fn whitney_star<S: ComplexScalar>(
    subset: &WhitneySubset<S>,
    star: &dyn StarOracle<S>,
    f: &JetClass<S>,
    g: &JetClass<S>,
    k: u32,
) -> Result<Vec<JetClass<S>>> {
    subset.same(f)?;
    subset.same(g)?;
    let order = f.order.min(g.order);
    let c = star.star(f.rep.poly(), g.rep.poly(), k)?;
    // an operand error of degree ≥ P moves c_i by degree ≥ P − 2i (see `star_series`)
    c.into_iter()
        .enumerate()
        .map(|(i, ci)| {
            let loss = -2 * i as i32;
            let prec = ci.precision().min(f.rep.precision().shift(loss)).min(g.rep.precision().shift(loss));
            subset.class(ci.with_precision(prec), order)
        })
        .collect()
}

fn series_text<S: ComplexScalar>(s: &Series<S>) -> String {
    match s.precision().bound() {
        None => s.poly().to_string(),
        Some(b) => format!("{} + O(deg {b})", s.poly()),
    }
}

fn order_text(o: i64) -> String {
    if o < 0 {
        "none".into()
    } else {
        o.to_string()
    }
}

/// `c_k(f+j, g) ≡ c_k(f, g)` and `c_k(g, f+j) ≡ c_k(g, f)` at order `m − k·d`,
/// and `𝔮(j)` has coefficients of Fedosov degree `D` in the order `m − D·d`
/// ideal. Each check notes the sharpest order actually attained.
pub fn representative_independence<S: ComplexScalar>(
    subset: &WhitneySubset<S>,
    sp: &StarProduct<S>,
    f: &Polynomial<S>,
    j: &Polynomial<S>,
    g: &Polynomial<S>,
    k: u32,
) -> Result<Report> {
    let js = Series::exact(j.clone());
    if !subset.contains_at(&js, subset.order as i64)? {
        return Err(Error::Precondition(format!(
            "j = {j} is not in the order-{} ideal (normal form {})",
            subset.order,
            subset.reduce_at(&js, subset.order as i64)?.poly()
        )));
    }
    let mut report = Report::new("representative independence");
    let fj = f + j;
    let base_l = sp.star(f, g, k)?;
    let moved_l = sp.star(&fj, g, k)?;
    let base_r = sp.star(g, f, k)?;
    let moved_r = sp.star(g, &fj, k)?;
    for i in 0..=k as usize {
        let want = subset.effective_order(i as u32);
        let mut res = Vec::new();
        let mut sharp = subset.order as i64;
        for (side, a, b) in [("left", &moved_l[i], &base_l[i]), ("right", &moved_r[i], &base_r[i])] {
            let d = a.sub(b);
            let nf = subset.reduce_at(&d, want)?;
            if !nf.is_zero_mod_precision() {
                res.push(format!("{side}: normal form at order {} = {}", order_text(want), series_text(&nf)));
            }
            sharp = sharp.min(subset.sharpest_order(&d)?);
        }
        report.push(
            Check::from_residuals(format!("c{i} independent of representative"), res)
                .with_note(format!("required order {}, sharpest {}", order_text(want), order_text(sharp))),
        );
    }
    let q = sp.lift(j)?;
    let mut res = Vec::new();
    let mut worst_margin: Option<i64> = None;
    for (key, c) in q.terms() {
        let deg = key.fedosov_degree();
        let want = subset.order as i64 - (deg * subset.loss) as i64;
        if !subset.contains_at(c, want)? {
            let nf = subset.reduce_at(c, want)?;
            res.push(format!("deg_F {deg} term: normal form at order {} = {}", order_text(want), series_text(&nf)));
        }
        if c.is_zero_mod_precision() || want < 0 {
            continue;
        }
        let margin = subset.sharpest_order(c)? - want;
        worst_margin = Some(worst_margin.map_or(margin, |w: i64| w.min(margin)));
    }
    let note = match worst_margin {
        Some(m) => format!("order loss {} per Fedosov degree; sharpest margin {m}", subset.loss),
        None => format!("order loss {} per Fedosov degree", subset.loss),
    };
    report.push(Check::from_residuals("quantize(j) lies in the ideal", res).with_note(note));
    Ok(report)
}

/// `(F⋆G)⋆H − F⋆(G⋆H)` with reduced intermediates, at `ℏ^n` compared at order `m − n·d`.
pub fn whitney_associativity<S: ComplexScalar>(
    subset: &WhitneySubset<S>,
    star: &dyn StarOracle<S>,
    f: &JetClass<S>,
    g: &JetClass<S>,
    h: &JetClass<S>,
    k: u32,
) -> Result<Vec<String>> {
    let fg = whitney_star(subset, star, f, g, k)?;
    let gh = whitney_star(subset, star, g, h, k)?;
    let mut left = vec![Series::zero(&subset.ctx); k as usize + 1];
    let mut right = left.clone();
    for (i, (a, b)) in fg.iter().zip(&gh).enumerate() {
        let l = whitney_star(subset, star, a, h, k - i as u32)?;
        let r = whitney_star(subset, star, f, b, k - i as u32)?;
        for (n, (x, y)) in l.iter().zip(&r).enumerate() {
            left[i + n].add_assign(x.rep());
            right[i + n].add_assign(y.rep());
        }
    }
    let mut out = Vec::new();
    for n in 0..=k as usize {
        let d = subset.reduce_at(&left[n].sub(&right[n]), subset.effective_order(n as u32))?;
        if !d.is_zero_mod_precision() {
            out.push(format!("hbar^{n}: {}", series_text(&d)));
        }
    }
    Ok(out)
}
