use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::context::{same_ctx, Ctx};
use super::monomial::Monomial;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Exact multivariate polynomial over `S` in a fixed variable context.
///
/// Terms are kept in a `BTreeMap` under the graded-lex order, so iteration is
/// ascending and the canonical text walks it in reverse. Zero coefficients are
/// never stored.
#[derive(Clone, PartialEq)]
pub struct Polynomial<S: Scalar> {
    ctx: Ctx,
    terms: BTreeMap<Monomial, S>,
}

impl<S: Scalar> Polynomial<S> {
    pub fn zero(ctx: &Ctx) -> Self {
        Polynomial { ctx: ctx.clone(), terms: BTreeMap::new() }
    }

    pub fn one(ctx: &Ctx) -> Self {
        Self::constant(ctx, S::one())
    }

    pub fn constant(ctx: &Ctx, c: S) -> Self {
        Self::monomial(ctx, Monomial::one(ctx.len()), c)
    }

    pub fn monomial(ctx: &Ctx, m: Monomial, c: S) -> Self {
        debug_assert_eq!(m.nvars(), ctx.len());
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Polynomial { ctx: ctx.clone(), terms }
    }

    pub fn var(ctx: &Ctx, idx: usize) -> Self {
        Self::monomial(ctx, Monomial::var(ctx.len(), idx, 1), S::one())
    }

    pub fn var_named(ctx: &Ctx, name: &str) -> Result<Self> {
        Ok(Self::var(ctx, ctx.require(name)?))
    }

    pub fn from_terms(ctx: &Ctx, terms: impl IntoIterator<Item = (Monomial, S)>) -> Self {
        let mut p = Self::zero(ctx);
        for (m, c) in terms {
            p.add_term(m, &c);
        }
        p
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self.terms.iter().next().is_some_and(|(m, c)| m.is_one() && c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_one())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn constant_term(&self) -> S {
        self.terms.get(&Monomial::one(self.ctx.len())).cloned().unwrap_or_else(S::zero)
    }

    pub fn coeff(&self, m: &Monomial) -> S {
        self.terms.get(m).cloned().unwrap_or_else(S::zero)
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &S)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> BTreeMap<Monomial, S> {
        self.terms
    }

    /// Leading term under graded-lex.
    pub fn leading(&self) -> Option<(&Monomial, &S)> {
        self.terms.iter().next_back()
    }

    /// Maximum total degree, 0 for the zero polynomial.
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().next_back().map_or(0, |m| m.degree())
    }

    /// Minimum total degree of a stored term (`None` for zero).
    pub fn valuation(&self) -> Option<u32> {
        self.terms.keys().next().map(|m| m.degree())
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|m| m.degree());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    /// True if the polynomial mentions variable `idx`.
    pub fn depends_on(&self, idx: usize) -> bool {
        self.terms.keys().any(|m| m.exp(idx) > 0)
    }

    pub(crate) fn add_term(&mut self, m: Monomial, c: &S) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                v.add_assign_ref(c);
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c.clone());
            }
        }
    }

    pub(crate) fn add_term_owned(&mut self, m: Monomial, c: S) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                v.add_assign_ref(&c);
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn check_ctx(&self, other: &Self) -> Result<()> {
        if same_ctx(&self.ctx, &other.ctx) {
            Ok(())
        } else {
            Err(Error::Context(format!(
                "variable contexts differ: [{}] vs [{}]",
                ctx_names(&self.ctx),
                ctx_names(&other.ctx)
            )))
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_ctx(other)?;
        Ok(self + other)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_ctx(other)?;
        Ok(self - other)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_ctx(other)?;
        Ok(self.mul_truncated(other, None))
    }

    pub fn add_assign_ref(&mut self, other: &Self) {
        assert_ctx(&self.ctx, &other.ctx);
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c);
        }
    }

    pub fn sub_assign_ref(&mut self, other: &Self) {
        assert_ctx(&self.ctx, &other.ctx);
        for (m, c) in &other.terms {
            self.add_term(m.clone(), &c.neg_ref());
        }
    }

    /// `self += c * m * other`.
    pub fn add_scaled_shifted(&mut self, c: &S, m: &Monomial, other: &Self) {
        assert_ctx(&self.ctx, &other.ctx);
        if c.is_zero() {
            return;
        }
        for (n, d) in &other.terms {
            self.add_term_owned(m.mul(n), c.mul_ref(d));
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::zero(&self.ctx);
        }
        Polynomial {
            ctx: self.ctx.clone(),
            terms: self.terms.iter().map(|(m, d)| (m.clone(), d.mul_ref(c))).collect(),
        }
    }

    /// Product with all terms of total degree above `bound` dropped.
    pub fn mul_truncated(&self, other: &Self, bound: Option<u32>) -> Self {
        assert_ctx(&self.ctx, &other.ctx);
        let mut out = Self::zero(&self.ctx);
        if self.is_zero() || other.is_zero() {
            return out;
        }
        // constant factors are frequent (Π, Γ entries)
        if self.is_constant() {
            return other.scale(&self.constant_term()).truncated(bound);
        }
        if other.is_constant() {
            return self.scale(&other.constant_term()).truncated(bound);
        }
        for (ma, ca) in &self.terms {
            let da = ma.degree();
            if let Some(b) = bound {
                if da > b {
                    break;
                }
            }
            for (mb, cb) in &other.terms {
                if let Some(b) = bound {
                    if da + mb.degree() > b {
                        break;
                    }
                }
                out.add_term_owned(ma.mul(mb), ca.mul_ref(cb));
            }
        }
        out
    }

    pub fn truncated(mut self, bound: Option<u32>) -> Self {
        if let Some(b) = bound {
            self.terms.retain(|m, _| m.degree() <= b);
        }
        self
    }

    /// Terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        Polynomial {
            ctx: self.ctx.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one(&self.ctx);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Formal partial derivative by variable index.
    pub fn diff(&self, idx: usize) -> Self {
        let mut out = Self::zero(&self.ctx);
        for (m, c) in &self.terms {
            let e = m.exp(idx);
            if e > 0 {
                out.add_term_owned(m.with_exp(idx, e - 1), c.mul_ref(&S::from_i64(e as i64)));
            }
        }
        out
    }

    pub fn diff_var(&self, name: &str) -> Result<Self> {
        Ok(self.diff(self.ctx.require(name)?))
    }

    /// `∂^γ` for an exponent vector `γ` over the whole context.
    pub fn diff_multi(&self, gamma: &[u32]) -> Self {
        let mut out = self.clone();
        for (idx, &g) in gamma.iter().enumerate() {
            for _ in 0..g {
                out = out.diff(idx);
            }
        }
        out
    }

    /// Substitute `images[k]` for the k-th variable; images live in `target`.
    pub fn compose(&self, images: &[Polynomial<S>], target: &Ctx) -> Result<Self> {
        if images.len() != self.ctx.len() {
            return Err(Error::Context(format!(
                "substitution provides {} images for {} variables",
                images.len(),
                self.ctx.len()
            )));
        }
        for im in images {
            if !same_ctx(im.ctx(), target) {
                return Err(Error::Context("substitution image outside target context".into()));
            }
        }
        // cache powers of each image
        let mut powers: Vec<Vec<Polynomial<S>>> =
            images.iter().map(|_| vec![Polynomial::one(target)]).collect();
        let mut out = Polynomial::zero(target);
        for (m, c) in &self.terms {
            let mut term = Polynomial::constant(target, c.clone());
            for (k, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[k].len() <= e as usize {
                    let next = &powers[k][powers[k].len() - 1] * &images[k];
                    powers[k].push(next);
                }
                term = &term * &powers[k][e as usize];
            }
            out.add_assign_ref(&term);
        }
        Ok(out)
    }

    /// Composition with a name-keyed substitution; every variable must be mapped.
    pub fn compose_named(
        &self,
        subst: &std::collections::HashMap<String, Polynomial<S>>,
        target: &Ctx,
    ) -> Result<Self> {
        let images = self
            .ctx
            .vars()
            .iter()
            .map(|v| {
                subst.get(&v.name).cloned().ok_or_else(|| {
                    Error::Context(format!("no substitution for variable `{}`", v.name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.compose(&images, target)
    }

    /// Re-express in another context by variable name.
    pub fn embed(&self, target: &Ctx) -> Result<Self> {
        if same_ctx(&self.ctx, target) {
            return Ok(self.clone());
        }
        let map = self
            .ctx
            .vars()
            .iter()
            .map(|v| target.require(&v.name))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Polynomial::zero(target);
        for (m, c) in &self.terms {
            let mut e = vec![0; target.len()];
            for (k, &x) in m.exponents().iter().enumerate() {
                e[map[k]] = x;
            }
            out.add_term(Monomial::from_exponents(e), c);
        }
        Ok(out)
    }

    /// Make the leading coefficient one.
    pub fn monic(&self) -> Self {
        match self.leading() {
            None => self.clone(),
            Some((_, c)) => self.scale(&c.inv().expect("nonzero leading coefficient")),
        }
    }
}

pub(crate) fn assert_ctx(a: &Ctx, b: &Ctx) {
    assert!(same_ctx(a, b), "polynomial operands in different variable contexts");
}

fn ctx_names(ctx: &Ctx) -> String {
    ctx.vars().iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(",")
}

pub(crate) fn monomial_text(ctx: &Ctx, m: &Monomial) -> String {
    let mut parts = Vec::new();
    for (k, &e) in m.exponents().iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(ctx.name(k).to_string()),
            _ => parts.push(format!("{}^{}", ctx.name(k), e)),
        }
    }
    parts.join("*")
}

pub(crate) fn term_text<S: Scalar>(c: &S, mono: &str) -> String {
    if mono.is_empty() {
        return c.canonical();
    }
    if c.is_one() {
        mono.to_string()
    } else if c.is_minus_one() {
        format!("-{mono}")
    } else if c.is_compound() {
        format!("({})*{mono}", c.canonical())
    } else {
        format!("{}*{mono}", c.canonical())
    }
}

/// Join term strings with ` + ` / ` - `.
pub(crate) fn join_terms(terms: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    for (k, t) in terms.into_iter().enumerate() {
        if k == 0 {
            out.push_str(&t);
        } else if let Some(rest) = t.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(&t);
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

impl<S: Scalar> fmt::Display for Polynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = join_terms(
            self.terms
                .iter()
                .rev()
                .map(|(m, c)| term_text(c, &monomial_text(&self.ctx, m))),
        );
        f.write_str(&s)
    }
}

impl<S: Scalar> fmt::Debug for Polynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

impl<S: Scalar> Add for &Polynomial<S> {
    type Output = Polynomial<S>;
    fn add(self, rhs: Self) -> Polynomial<S> {
        let mut out = self.clone();
        out.add_assign_ref(rhs);
        out
    }
}

impl<S: Scalar> Sub for &Polynomial<S> {
    type Output = Polynomial<S>;
    fn sub(self, rhs: Self) -> Polynomial<S> {
        let mut out = self.clone();
        out.sub_assign_ref(rhs);
        out
    }
}

impl<S: Scalar> Mul for &Polynomial<S> {
    type Output = Polynomial<S>;
    fn mul(self, rhs: Self) -> Polynomial<S> {
        self.mul_truncated(rhs, None)
    }
}

impl<S: Scalar> Neg for &Polynomial<S> {
    type Output = Polynomial<S>;
    fn neg(self) -> Polynomial<S> {
        self.scale(&S::one().neg_ref())
    }
}

impl<S: Scalar> Add for Polynomial<S> {
    type Output = Polynomial<S>;
    fn add(mut self, rhs: Self) -> Polynomial<S> {
        self.add_assign_ref(&rhs);
        self
    }
}

impl<S: Scalar> Sub for Polynomial<S> {
    type Output = Polynomial<S>;
    fn sub(mut self, rhs: Self) -> Polynomial<S> {
        self.sub_assign_ref(&rhs);
        self
    }
}

impl<S: Scalar> Mul for Polynomial<S> {
    type Output = Polynomial<S>;
    fn mul(self, rhs: Self) -> Polynomial<S> {
        self.mul_truncated(&rhs, None)
    }
}

impl<S: Scalar> Neg for Polynomial<S> {
    type Output = Polynomial<S>;
    fn neg(self) -> Polynomial<S> {
        (&self).neg()
    }
}

/// Checked product, the library entry point for `a·b`.
pub fn poly_mul<S: Scalar>(a: &Polynomial<S>, b: &Polynomial<S>) -> Result<Polynomial<S>> {
    a.checked_mul(b)
}

/// Checked derivative by variable name.
pub fn poly_diff<S: Scalar>(a: &Polynomial<S>, var: &str) -> Result<Polynomial<S>> {
    a.diff_var(var)
}

/// Checked composition `f ∘ subst`.
pub fn poly_compose<S: Scalar>(
    f: &Polynomial<S>,
    subst: &std::collections::HashMap<String, Polynomial<S>>,
    target: &Ctx,
) -> Result<Polynomial<S>> {
    f.compose_named(subst, target)
}
