//! Gröbner bases under graded-lex and normal forms modulo ideal powers.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use super::monomial::Monomial;
use super::poly::Polynomial;
use super::scalar::Scalar;
use super::series::Series;
use crate::error::{Error, Result};

/// Remainder of `p` under full multivariate division by `basis`.
pub fn reduce<S: Scalar>(p: &Polynomial<S>, basis: &[Polynomial<S>]) -> Polynomial<S> {
    let ctx = p.ctx().clone();
    let leads: Vec<(Monomial, S)> = basis
        .iter()
        .filter_map(|g| g.leading().map(|(m, c)| (m.clone(), c.inv().expect("nonzero lead"))))
        .collect();
    let mut rest = p.clone();
    let mut rem = Polynomial::zero(&ctx);
    while let Some((m, c)) = rest.leading().map(|(m, c)| (m.clone(), c.clone())) {
        match leads.iter().position(|(lm, _)| lm.divides(&m)) {
            Some(k) => {
                let q = leads[k].0.quotient_of(&m);
                let f = c.mul_ref(&leads[k].1).neg_ref();
                rest.add_scaled_shifted(&f, &q, &basis[k]);
            }
            None => {
                rest.add_term(m.clone(), &c.neg_ref());
                rem.add_term_owned(m, c);
            }
        }
    }
    rem
}

fn s_polynomial<S: Scalar>(f: &Polynomial<S>, g: &Polynomial<S>) -> Polynomial<S> {
    let (mf, cf) = f.leading().expect("nonzero");
    let (mg, cg) = g.leading().expect("nonzero");
    let l = mf.lcm(mg);
    let mut out = Polynomial::zero(f.ctx());
    out.add_scaled_shifted(&cf.inv().unwrap(), &mf.quotient_of(&l), f);
    out.add_scaled_shifted(&cg.inv().unwrap().neg_ref(), &mg.quotient_of(&l), g);
    out
}

fn buchberger_impl<S: Scalar>(gens: &[Polynomial<S>], bound: Option<u32>) -> Vec<Polynomial<S>> {
    let mut basis: Vec<Polynomial<S>> =
        gens.iter().filter(|g| !g.is_zero()).map(|g| g.monic()).collect();
    let mut pairs: BTreeSet<(u32, usize, usize)> = BTreeSet::new();
    let lcm_deg = |b: &[Polynomial<S>], i: usize, j: usize| {
        b[i].leading().unwrap().0.lcm(b[j].leading().unwrap().0).degree()
    };
    for j in 0..basis.len() {
        for i in 0..j {
            pairs.insert((lcm_deg(&basis, i, j), i, j));
        }
    }
    while let Some(pair) = pairs.iter().next().cloned() {
        pairs.remove(&pair);
        let (d, i, j) = pair;
        if bound.is_some_and(|b| d > b) {
            // pairs come out by lcm degree: everything left is above the bound
            break;
        }
        let (mi, mj) = (basis[i].leading().unwrap().0, basis[j].leading().unwrap().0);
        if mi.coprime(mj) {
            continue;
        }
        let h = reduce(&s_polynomial(&basis[i], &basis[j]), &basis);
        if h.is_zero() {
            continue;
        }
        basis.push(h.monic());
        let n = basis.len() - 1;
        for i in 0..n {
            pairs.insert((lcm_deg(&basis, i, n), i, n));
        }
    }
    interreduce(basis)
}

/// Reduced basis: minimal leading terms, each element reduced by the rest.
fn interreduce<S: Scalar>(basis: Vec<Polynomial<S>>) -> Vec<Polynomial<S>> {
    let mut minimal: Vec<Polynomial<S>> = Vec::new();
    for (k, g) in basis.iter().enumerate() {
        let lm = g.leading().unwrap().0;
        let redundant = basis.iter().enumerate().any(|(l, h)| {
            let hm = h.leading().unwrap().0;
            l != k && hm.divides(lm) && (hm != lm || l < k)
        });
        if !redundant {
            minimal.push(g.clone());
        }
    }
    let mut out = Vec::with_capacity(minimal.len());
    for k in 0..minimal.len() {
        let others: Vec<Polynomial<S>> =
            minimal.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, g)| g.clone()).collect();
        let g = &minimal[k];
        let (lm, lc) = g.leading().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        let mut tail = g.clone();
        tail.add_term(lm.clone(), &lc.neg_ref());
        let mut r = reduce(&tail, &others);
        r.add_term_owned(lm, lc);
        out.push(r.monic());
    }
    out.sort_by(|a, b| a.leading().unwrap().0.cmp(b.leading().unwrap().0));
    out
}

/// Reduced Gröbner basis.
pub fn buchberger<S: Scalar>(gens: &[Polynomial<S>]) -> Vec<Polynomial<S>> {
    buchberger_impl(gens, None)
}

/// Basis giving unique normal forms on polynomials of degree `<= degree_bound`.
///
/// For homogeneous generators S-pairs above the bound cannot affect lower
/// degrees and are skipped; inhomogeneous input gets the full computation.
pub fn truncated_buchberger<S: Scalar>(
    gens: &[Polynomial<S>],
    degree_bound: u32,
) -> Vec<Polynomial<S>> {
    if gens.iter().all(|g| g.is_homogeneous()) {
        buchberger_impl(gens, Some(degree_bound))
    } else {
        buchberger_impl(gens, None)
    }
}

/// Polynomial ideal given by generators, with a per-bound basis cache.
#[derive(Debug)]
pub struct IdealSpec<S: Scalar> {
    generators: Vec<Polynomial<S>>,
    base: Vec<Polynomial<S>>,
    order: u32,
    cache: Mutex<BTreeMap<u32, Arc<Vec<Polynomial<S>>>>>,
}

impl<S: Scalar> Clone for IdealSpec<S> {
    fn clone(&self) -> Self {
        IdealSpec {
            generators: self.generators.clone(),
            base: self.base.clone(),
            order: self.order,
            cache: Mutex::new(self.cache.lock().unwrap().clone()),
        }
    }
}

impl<S: Scalar> IdealSpec<S> {
    pub fn from_generators(gens: Vec<Polynomial<S>>) -> Self {
        let generators: Vec<_> = gens.into_iter().filter(|g| !g.is_zero()).collect();
        IdealSpec { base: generators.clone(), generators, order: 0, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn zero() -> Self {
        Self::from_generators(Vec::new())
    }

    pub fn generators(&self) -> &[Polynomial<S>] {
        &self.generators
    }

    /// The generators this ideal is a power of.
    pub fn base_generators(&self) -> &[Polynomial<S>] {
        &self.base
    }

    /// Jet order `m`: the ideal is `⟨base⟩^(m+1)`.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn power(&self) -> u32 {
        self.order + 1
    }

    pub fn is_zero_ideal(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.generators.iter().all(|g| g.is_homogeneous())
    }

    pub fn basis(&self, degree_bound: u32) -> Arc<Vec<Polynomial<S>>> {
        let mut cache = self.cache.lock().unwrap();
        if let Some(b) = cache.get(&degree_bound) {
            return b.clone();
        }
        // a basis valid to a higher bound is valid here too
        if let Some((_, b)) = cache.range(degree_bound..).next() {
            return b.clone();
        }
        let b = Arc::new(truncated_buchberger(&self.generators, degree_bound));
        cache.insert(degree_bound, b.clone());
        b
    }
}

/// `⟨gens⟩^(m+1)` generated by all products of `m+1` generators.
pub fn ideal_power<S: Scalar>(gens: &[Polynomial<S>], m: u32) -> IdealSpec<S> {
    let base: Vec<Polynomial<S>> = gens.iter().filter(|g| !g.is_zero()).cloned().collect();
    if base.is_empty() {
        return IdealSpec::zero();
    }
    // multisets of size m+1, as nondecreasing index sequences
    let mut products: Vec<Polynomial<S>> = Vec::new();
    let mut stack: Vec<(usize, u32, Polynomial<S>)> = vec![(0, 0, Polynomial::one(base[0].ctx()))];
    while let Some((start, count, prod)) = stack.pop() {
        if count == m + 1 {
            if !products.contains(&prod) {
                products.push(prod);
            }
            continue;
        }
        for k in (start..base.len()).rev() {
            stack.push((k, count + 1, &prod * &base[k]));
        }
    }
    IdealSpec { generators: products, base, order: m, cache: Mutex::new(BTreeMap::new()) }
}

/// Canonical representative of `p` modulo `ideal`.
pub fn normal_form<S: Scalar>(
    p: &Polynomial<S>,
    ideal: &IdealSpec<S>,
    degree_bound: u32,
) -> Result<Polynomial<S>> {
    if ideal.is_zero_ideal() {
        return Ok(p.clone());
    }
    if p.total_degree() > degree_bound {
        return Err(Error::Truncation {
            message: format!("normal form of a degree-{} polynomial", p.total_degree()),
            required: p.total_degree(),
            have: degree_bound,
        });
    }
    Ok(reduce(p, &ideal.basis(degree_bound)))
}

/// Normal form of a truncated series; needs a homogeneous ideal so that the
/// unknown high-degree part cannot reduce into low degrees.
pub fn normal_form_series<S: Scalar>(
    p: &Series<S>,
    ideal: &IdealSpec<S>,
    degree_bound: u32,
) -> Result<Series<S>> {
    if !p.is_exact() && !ideal.is_homogeneous() {
        return Err(Error::PrecisionLoss(
            "normal form of a truncated series modulo an inhomogeneous ideal".into(),
        ));
    }
    Ok(Series::new(normal_form(p.poly(), ideal, degree_bound)?, p.precision()))
}
