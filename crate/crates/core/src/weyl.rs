//! Formal Weyl algebra bundle along the leaves of a chart.
//!
//! An element is a finite sum of terms `a(x,t) · y^α · ℏ^k · dx^I` where `α`
//! and `I` run over leaf indices. Base coefficients are [`Series`] so that
//! truncated chart data propagates its precision into every term.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;

use crate::coeff::poly::{join_terms, monomial_text, term_text};
use crate::coeff::{ComplexScalar, Ctx, Monomial, Polynomial, Precision, Rational, Series};
use crate::error::{Error, Result};

/// Fiber monomial, ℏ power and form monomial of a term.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeylKey {
    pub fiber: Monomial,
    pub hbar: u32,
    /// bit `k` set means `dx^{k+1}` is present
    pub form: u32,
}

impl WeylKey {
    pub fn new(fiber: Monomial, hbar: u32, form: u32) -> Self {
        WeylKey { fiber, hbar, form }
    }

    pub fn fedosov_degree(&self) -> u32 {
        self.fiber.degree() + 2 * self.hbar
    }

    pub fn form_degree(&self) -> u32 {
        self.form.count_ones()
    }

    pub fn fiber_degree(&self) -> u32 {
        self.fiber.degree()
    }
}

impl Ord for WeylKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.fedosov_degree()
            .cmp(&other.fedosov_degree())
            .then_with(|| self.fiber.cmp(&other.fiber))
            .then_with(|| self.hbar.cmp(&other.hbar))
            .then_with(|| other.form.cmp(&self.form))
    }
}

impl PartialOrd for WeylKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Sign of `dx^I ∧ dx^J` relative to the sorted monomial, `None` if they overlap.
pub fn wedge_sign(i: u32, j: u32) -> Option<bool> {
    if i & j != 0 {
        return None;
    }
    // count pairs (a in I, b in J) with a > b
    let mut inversions = 0;
    let mut jj = j;
    while jj != 0 {
        let b = jj.trailing_zeros();
        inversions += (i >> (b + 1)).count_ones();
        jj &= jj - 1;
    }
    Some(inversions % 2 == 1)
}

/// Fiber data over a chart: base context, leaf rank and the Poisson matrix.
#[derive(Debug)]
pub struct WeylSpace<S: ComplexScalar> {
    base: Ctx,
    rank: usize,
    pi: Vec<Vec<Series<S>>>,
}

impl<S: ComplexScalar> WeylSpace<S> {
    /// `pi` is the leafwise `Π^{ij}`; leaf variables are the first `rank` of `base`.
    pub fn new(base: &Ctx, rank: usize, pi: Vec<Vec<Series<S>>>) -> Result<Arc<Self>> {
        if pi.len() != rank || pi.iter().any(|r| r.len() != rank) {
            return Err(Error::Context(format!("Π must be {rank}×{rank}")));
        }
        if rank > 31 || rank > base.len() {
            return Err(Error::Context("leaf rank exceeds the base context".into()));
        }
        Ok(Arc::new(WeylSpace { base: base.clone(), rank, pi }))
    }

    /// Constant Π in Darboux normal form `Π^{2a-1,2a} = 1`.
    pub fn darboux(base: &Ctx, rank: usize) -> Result<Arc<Self>> {
        let mut pi = vec![vec![Series::zero(base); rank]; rank];
        for a in 0..rank / 2 {
            pi[2 * a][2 * a + 1] = Series::exact(Polynomial::one(base));
            pi[2 * a + 1][2 * a] = Series::exact(-Polynomial::one(base));
        }
        Self::new(base, rank, pi)
    }

    pub fn base(&self) -> &Ctx {
        &self.base
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn pi(&self, i: usize, j: usize) -> &Series<S> {
        &self.pi[i][j]
    }

    pub fn full_form(&self) -> u32 {
        (1u32 << self.rank) - 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Contraction {
    None,
    Commutator,
    Full,
}

/// A section of the Weyl bundle truncated at Fedosov degree `trunc`.
#[derive(Clone)]
pub struct WeylElement<S: ComplexScalar> {
    space: Arc<WeylSpace<S>>,
    trunc: u32,
    terms: BTreeMap<WeylKey, Series<S>>,
}

impl<S: ComplexScalar> PartialEq for WeylElement<S> {
    fn eq(&self, other: &Self) -> bool {
        self.trunc == other.trunc && self.terms == other.terms
    }
}

fn falling(n: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::from(1), |acc, j| acc * BigInt::from(n - j))
}

fn factorial(n: u32) -> BigInt {
    falling(n, n)
}

impl<S: ComplexScalar> WeylElement<S> {
    pub fn zero(space: &Arc<WeylSpace<S>>, trunc: u32) -> Self {
        WeylElement { space: space.clone(), trunc, terms: BTreeMap::new() }
    }

    /// A fiber-free, form-free element `f`.
    pub fn from_base(space: &Arc<WeylSpace<S>>, trunc: u32, f: Series<S>) -> Self {
        let mut out = Self::zero(space, trunc);
        out.add_term(WeylKey::new(Monomial::one(space.rank), 0, 0), f);
        out
    }

    pub fn from_poly(space: &Arc<WeylSpace<S>>, trunc: u32, f: &Polynomial<S>) -> Self {
        Self::from_base(space, trunc, Series::exact(f.clone()))
    }

    pub fn one(space: &Arc<WeylSpace<S>>, trunc: u32) -> Self {
        Self::from_poly(space, trunc, &Polynomial::one(&space.base))
    }

    pub fn monomial(space: &Arc<WeylSpace<S>>, trunc: u32, key: WeylKey, c: Series<S>) -> Self {
        let mut out = Self::zero(space, trunc);
        out.add_term(key, c);
        out
    }

    /// The fiber coordinate `y^{i+1}`.
    pub fn y(space: &Arc<WeylSpace<S>>, trunc: u32, i: usize) -> Self {
        let key = WeylKey::new(Monomial::var(space.rank, i, 1), 0, 0);
        Self::monomial(space, trunc, key, Series::exact(Polynomial::one(&space.base)))
    }

    pub fn hbar(space: &Arc<WeylSpace<S>>, trunc: u32) -> Self {
        let key = WeylKey::new(Monomial::one(space.rank), 1, 0);
        Self::monomial(space, trunc, key, Series::exact(Polynomial::one(&space.base)))
    }

    /// The one-form `dx^{i+1}`.
    pub fn dx(space: &Arc<WeylSpace<S>>, trunc: u32, i: usize) -> Self {
        let key = WeylKey::new(Monomial::one(space.rank), 0, 1 << i);
        Self::monomial(space, trunc, key, Series::exact(Polynomial::one(&space.base)))
    }

    pub fn space(&self) -> &Arc<WeylSpace<S>> {
        &self.space
    }

    pub fn truncation(&self) -> u32 {
        self.trunc
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&WeylKey, &Series<S>)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, key: &WeylKey) -> Option<&Series<S>> {
        self.terms.get(key)
    }

    /// Add `c` at `key`; dropped beyond the truncation. Zero series with finite
    /// precision are kept since they record what is known.
    pub fn add_term(&mut self, key: WeylKey, c: Series<S>) {
        if key.fedosov_degree() > self.trunc {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(v) => {
                v.add_assign(&c);
                if v.is_exact_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                if !c.is_exact_zero() {
                    self.terms.insert(key, c);
                }
            }
        }
    }

    /// All reliable coefficients vanish.
    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|s| s.is_zero_mod_precision())
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(|s| s.is_exact())
    }

    /// Worst precision over all terms.
    pub fn precision(&self) -> Precision {
        self.terms.values().map(|s| s.precision()).fold(Precision::EXACT, Precision::min)
    }

    /// Terms with a nonzero reliable coefficient.
    pub fn nonzero_terms(&self) -> impl Iterator<Item = (&WeylKey, &Series<S>)> {
        self.terms.iter().filter(|(_, s)| !s.is_zero_mod_precision())
    }

    /// Minimum `|α| + 2k` over nonzero terms, `None` for zero.
    pub fn fedosov_degree(&self) -> Option<u32> {
        self.nonzero_terms().map(|(k, _)| k.fedosov_degree()).min()
    }

    /// Form degree if homogeneous, `None` if mixed or zero.
    pub fn form_degree(&self) -> Option<u32> {
        let mut degs = self.terms.keys().map(|k| k.form_degree());
        let d = degs.next()?;
        degs.all(|e| e == d).then_some(d)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.space, &other.space) {
            return Err(Error::Context("Weyl elements over different charts".into()));
        }
        if self.trunc != other.trunc {
            return Err(Error::Context(format!(
                "Weyl elements truncated at different Fedosov degrees ({} vs {})",
                self.trunc, other.trunc
            )));
        }
        Ok(())
    }

    pub fn map_terms(&self, f: impl Fn(&WeylKey, &Series<S>) -> Option<(WeylKey, Series<S>)>) -> Self {
        let mut out = Self::zero(&self.space, self.trunc);
        for (k, c) in &self.terms {
            if let Some((k2, c2)) = f(k, c) {
                out.add_term(k2, c2);
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.neg());
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert!(Arc::ptr_eq(&self.space, &other.space) && self.trunc == other.trunc);
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c.clone());
        }
    }

    pub fn neg(&self) -> Self {
        self.map_terms(|k, c| Some((k.clone(), c.neg())))
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map_terms(|k, c| Some((k.clone(), c.scale(s))))
    }

    /// Same element at another Fedosov bound (terms above it are dropped).
    pub fn with_truncation(&self, trunc: u32) -> Self {
        let mut out = Self::zero(&self.space, trunc);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    /// Part of Fedosov degree exactly `d`.
    pub fn fedosov_part(&self, d: u32) -> Self {
        self.map_terms(|k, c| (k.fedosov_degree() == d).then(|| (k.clone(), c.clone())))
    }

    /// Part of form degree exactly `q`.
    pub fn form_part(&self, q: u32) -> Self {
        self.map_terms(|k, c| (k.form_degree() == q).then(|| (k.clone(), c.clone())))
    }

    /// Raw Moyal sum over term pairs with total Fedosov degree `<= limit`.
    /// With `commutator` only odd contraction counts are kept, doubled, and
    /// multiplied by `i/ℏ`: this is `(i/ℏ)[a,b]` for the graded commutator.
    fn moyal_raw(&self, other: &Self, limit: u32, mode: Contraction, out: &mut Self) {
        let commutator = mode == Contraction::Commutator;
        let full = mode == Contraction::Full;
        let r = self.space.rank;
        let entries: Vec<(usize, usize)> =
            (0..r).flat_map(|i| (0..r).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let c = S::i().mul_ref(&S::from_ratio(-1, 2));
        let mut c_pow = vec![S::one()];
        let mut pi_pow: HashMap<Vec<u32>, Series<S>> = HashMap::new();
        let base = &self.space.base;
        let two_i = S::i().mul_ref(&S::from_i64(2));

        let b_terms: Vec<(&WeylKey, &Series<S>, u32)> =
            other.nonzero_or_inexact().map(|(k, s)| (k, s, k.fedosov_degree())).collect();
        for (ka, sa) in self.nonzero_or_inexact() {
            let fa = ka.fedosov_degree();
            for &(kb, sb, fb) in &b_terms {
                if fa + fb > limit {
                    continue;
                }
                if full && ka.fiber_degree() != kb.fiber_degree() {
                    continue;
                }
                let Some(neg) = wedge_sign(ka.form, kb.form) else { continue };
                let form = ka.form | kb.form;
                let ab = sa.mul(sb);
                if ab.is_exact_zero() {
                    continue;
                }
                // enumerate contraction matrices m (off-diagonal) within α, β
                let mut m = vec![0u32; entries.len()];
                let mut row = vec![0u32; r];
                let mut col = vec![0u32; r];
                let alpha = ka.fiber.exponents();
                let beta = kb.fiber.exponents();
                #[allow(clippy::too_many_arguments, clippy::type_complexity)]
                fn visit(
                    pos: usize,
                    entries: &[(usize, usize)],
                    alpha: &[u32],
                    beta: &[u32],
                    m: &mut Vec<u32>,
                    row: &mut Vec<u32>,
                    col: &mut Vec<u32>,
                    emit: &mut dyn FnMut(&[u32], &[u32], &[u32]),
                ) {
                    if pos == entries.len() {
                        emit(m, row, col);
                        return;
                    }
                    let (i, j) = entries[pos];
                    let max = (alpha[i] - row[i]).min(beta[j] - col[j]);
                    for v in 0..=max {
                        m[pos] = v;
                        row[i] += v;
                        col[j] += v;
                        visit(pos + 1, entries, alpha, beta, m, row, col, emit);
                        row[i] -= v;
                        col[j] -= v;
                    }
                    m[pos] = 0;
                }
                let mut emit = |m: &[u32], row: &[u32], col: &[u32]| {
                    let s: u32 = m.iter().sum();
                    if commutator && s.is_multiple_of(2) {
                        return;
                    }
                    if full && (row != alpha || col != beta) {
                        return;
                    }
                    while c_pow.len() <= s as usize {
                        let next = c_pow.last().unwrap().mul_ref(&c);
                        c_pow.push(next);
                    }
                    let mut num = BigInt::from(1);
                    let mut den = BigInt::from(1);
                    for &v in m {
                        den *= factorial(v);
                    }
                    for i in 0..r {
                        num *= falling(alpha[i], row[i]) * falling(beta[i], col[i]);
                    }
                    let mut coef = c_pow[s as usize].mul_ref(&S::from_rational(Rational::new(num, den)));
                    if commutator {
                        coef = coef.mul_ref(&two_i);
                    }
                    if neg {
                        coef = coef.neg_ref();
                    }
                    let pp = pi_pow.entry(m.to_vec()).or_insert_with(|| {
                        let mut acc = Series::exact(Polynomial::one(base));
                        for (e, &v) in m.iter().enumerate() {
                            let (i, j) = entries[e];
                            for _ in 0..v {
                                acc = acc.mul(&self.space.pi[i][j]);
                            }
                        }
                        acc
                    });
                    let fiber: Vec<u32> =
                        (0..r).map(|i| alpha[i] - row[i] + beta[i] - col[i]).collect();
                    let hbar = ka.hbar + kb.hbar + s - if commutator { 1 } else { 0 };
                    let key = WeylKey::new(Monomial::from_exponents(fiber), hbar, form);
                    out.add_term(key, ab.mul(pp).scale(&coef));
                };
                visit(0, &entries, alpha, beta, &mut m, &mut row, &mut col, &mut emit);
            }
        }
    }

    fn nonzero_or_inexact(&self) -> impl Iterator<Item = (&WeylKey, &Series<S>)> {
        self.terms.iter().filter(|(_, s)| !s.is_exact_zero())
    }

    /// Fiberwise Moyal–Weyl product, truncated at the common Fedosov bound.
    pub fn moyal(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(&self.space, self.trunc);
        self.moyal_raw(other, self.trunc, Contraction::None, &mut out);
        Ok(out)
    }

    /// `σ(a∘b)` up to `ℏ^kmax`, computing only fully contracted terms.
    pub fn moyal_symbol(&self, other: &Self, kmax: u32) -> Result<Vec<Series<S>>> {
        self.check_compatible(other)?;
        if self.terms.keys().chain(other.terms.keys()).any(|k| k.form != 0) {
            return Err(Error::Domain("symbol of a product with nonzero form degree".into()));
        }
        let mut out = Self::zero(&self.space, self.trunc.max(2 * kmax));
        self.moyal_raw(other, 2 * kmax, Contraction::Full, &mut out);
        let mut sym = out.symbol()?;
        sym.truncate(kmax as usize + 1);
        Ok(sym)
    }

    /// Graded commutator `a∘b − (−1)^{|a||b|} b∘a` for form-homogeneous terms.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ad = self.ad(other)?;
        // (i/ℏ)[a,b] = ad  ⇒  [a,b] = −iℏ·ad
        let h = Self::hbar(&self.space, self.trunc);
        Ok(h.moyal(&ad)?.scale(&S::i().neg_ref()))
    }

    /// `(i/ℏ)[a, b]`; Fedosov degree drops by 2, so pairs up to `N + 2` count.
    pub fn ad(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(&self.space, self.trunc);
        self.moyal_raw(other, self.trunc + 2, Contraction::Commutator, &mut out);
        Ok(out)
    }

    /// `δa = Σ dx^k ∧ ∂a/∂y^k`.
    pub fn delta(&self) -> Self {
        let mut out = Self::zero(&self.space, self.trunc);
        for (key, c) in &self.terms {
            for k in 0..self.space.rank {
                let e = key.fiber.exp(k);
                if e == 0 {
                    continue;
                }
                let Some(neg) = wedge_sign(1 << k, key.form) else { continue };
                let mut s = S::from_i64(e as i64);
                if neg {
                    s = s.neg_ref();
                }
                let k2 = WeylKey::new(key.fiber.with_exp(k, e - 1), key.hbar, key.form | (1 << k));
                out.add_term(k2, c.scale(&s));
            }
        }
        out
    }

    /// `δ*a = Σ y^k ι_{∂/∂x^k} a`; the truncation bound may drop top-degree terms.
    pub fn delta_star(&self) -> Self {
        self.delta_star_scaled(false)
    }

    fn delta_star_scaled(&self, homotopy: bool) -> Self {
        let mut out = Self::zero(&self.space, self.trunc);
        for (key, c) in &self.terms {
            let p = key.fiber_degree();
            let q = key.form_degree();
            if homotopy && p + q == 0 {
                continue;
            }
            for k in 0..self.space.rank {
                if key.form & (1 << k) == 0 {
                    continue;
                }
                let position = (key.form & ((1 << k) - 1)).count_ones();
                let mut s = if position % 2 == 0 { S::one() } else { S::one().neg_ref() };
                if homotopy {
                    s = s.mul_ref(&S::from_ratio(1, (p + q) as i64));
                }
                let k2 = WeylKey::new(
                    key.fiber.with_exp(k, key.fiber.exp(k) + 1),
                    key.hbar,
                    key.form & !(1 << k),
                );
                out.add_term(k2, c.scale(&s));
            }
        }
        out
    }

    /// Fedosov homotopy `δ⁻¹ = δ*/(p+q)` on bidegree `(p,q)`, zero on `(0,0)`.
    pub fn delta_inv(&self) -> Self {
        self.delta_star_scaled(true)
    }

    /// Part of bidegree (0,0): fiber- and form-free.
    pub fn bidegree_zero_part(&self) -> Self {
        self.map_terms(|k, c| (k.fiber_degree() == 0 && k.form == 0).then(|| (k.clone(), c.clone())))
    }

    /// `σ(a) = Σ_k a_{0,k} ℏ^k`, the list indexed by `k`.
    pub fn symbol(&self) -> Result<Vec<Series<S>>> {
        if self.terms.keys().any(|k| k.form != 0) {
            return Err(Error::Domain("symbol of an element with nonzero form degree".into()));
        }
        let kmax = self.trunc / 2;
        let mut out = vec![Series::zero(&self.space.base); kmax as usize + 1];
        for (k, c) in &self.terms {
            if k.fiber_degree() == 0 {
                out[k.hbar as usize].add_assign(c);
            }
        }
        Ok(out)
    }

    /// Apply `f` to every base coefficient.
    pub fn map_base(&self, f: impl Fn(&Series<S>) -> Series<S>) -> Self {
        self.map_terms(|k, c| Some((k.clone(), f(c))))
    }

    /// Multiply by `ℏ^k` (Fedosov degree +2k).
    pub fn shift_hbar(&self, k: u32) -> Self {
        self.map_terms(|key, c| Some((WeylKey::new(key.fiber.clone(), key.hbar + k, key.form), c.clone())))
    }
}

fn key_text(space_rank: usize, key: &WeylKey) -> Vec<String> {
    let mut parts = Vec::new();
    for k in 0..space_rank {
        match key.fiber.exp(k) {
            0 => {}
            1 => parts.push(format!("y{}", k + 1)),
            e => parts.push(format!("y{}^{}", k + 1, e)),
        }
    }
    match key.hbar {
        0 => {}
        1 => parts.push("hbar".into()),
        k => parts.push(format!("hbar^{k}")),
    }
    if key.form != 0 {
        let idx: Vec<String> =
            (0..space_rank).filter(|k| key.form & (1 << k) != 0).map(|k| (k + 1).to_string()).collect();
        parts.push(format!("dx[{}]", idx.join(",")));
    }
    parts
}

/// Canonical text of one Weyl term.
pub fn weyl_term_text<S: ComplexScalar>(space: &WeylSpace<S>, key: &WeylKey, c: &Series<S>) -> Vec<String> {
    let tail = key_text(space.rank, key).join("*");
    let p = c.poly();
    if c.is_exact() && p.len() == 1 {
        let (m, coef) = p.terms().next().unwrap();
        let mono = monomial_text(&space.base, m);
        let full = match (mono.is_empty(), tail.is_empty()) {
            (true, _) => tail.clone(),
            (false, true) => mono,
            (false, false) => format!("{mono}*{tail}"),
        };
        return vec![term_text(coef, &full)];
    }
    if tail.is_empty() && c.is_exact() {
        return p.terms().rev().map(|(m, coef)| term_text(coef, &monomial_text(&space.base, m))).collect();
    }
    let inner = match c.precision().bound() {
        None => p.to_string(),
        Some(b) => format!("{p} + O(deg {b})"),
    };
    if tail.is_empty() {
        vec![format!("({inner})")]
    } else {
        vec![format!("({inner})*{tail}")]
    }
}

impl<S: ComplexScalar> fmt::Display for WeylElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = self
            .terms
            .iter()
            .rev()
            .filter(|(_, c)| !c.is_exact_zero())
            .flat_map(|(k, c)| weyl_term_text(&self.space, k, c));
        f.write_str(&join_terms(parts))
    }
}

impl<S: ComplexScalar> fmt::Debug for WeylElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeylElement[N={}]({self})", self.trunc)
    }
}

/// Leafwise forms with coefficients in `ℝ[[ℏ]]`: Weyl elements without fiber part.
#[derive(Clone, Debug, PartialEq)]
pub struct FormSeries<S: ComplexScalar>(WeylElement<S>);

impl<S: ComplexScalar> FormSeries<S> {
    pub fn new(a: WeylElement<S>) -> Result<Self> {
        if a.terms().any(|(k, _)| k.fiber_degree() > 0) {
            return Err(Error::Domain("form series with fiber variables".into()));
        }
        Ok(FormSeries(a))
    }

    pub fn element(&self) -> &WeylElement<S> {
        &self.0
    }

    pub fn into_element(self) -> WeylElement<S> {
        self.0
    }
}

/// `moyal(a, b)` as a free function.
pub fn moyal<S: ComplexScalar>(a: &WeylElement<S>, b: &WeylElement<S>) -> Result<WeylElement<S>> {
    a.moyal(b)
}

pub fn delta<S: ComplexScalar>(a: &WeylElement<S>) -> WeylElement<S> {
    a.delta()
}

pub fn delta_star<S: ComplexScalar>(a: &WeylElement<S>) -> WeylElement<S> {
    a.delta_star()
}

pub fn delta_inv<S: ComplexScalar>(a: &WeylElement<S>) -> WeylElement<S> {
    a.delta_inv()
}

pub fn symbol<S: ComplexScalar>(a: &WeylElement<S>) -> Result<Vec<Series<S>>> {
    a.symbol()
}

/// `+∞` sentinel (`None`) for zero.
pub fn fedosov_degree<S: ComplexScalar>(a: &WeylElement<S>) -> Option<u32> {
    a.fedosov_degree()
}
