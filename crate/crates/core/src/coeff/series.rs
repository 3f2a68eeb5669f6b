//! Polynomials known only modulo high total degree.
//!
//! Chart data such as `Π = ω⁻¹` is generally a power series; we carry it as a
//! polynomial together with a [`Precision`]: every term of total degree below
//! the precision is exact, nothing is known above it.

use std::fmt;

use super::context::Ctx;
use super::linalg::Matrix;
use super::poly::Polynomial;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// `None` is exact; `Some(p)` means terms of total degree `< p` are reliable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Precision(Option<i32>);

impl Precision {
    pub const EXACT: Precision = Precision(None);

    pub fn at(p: i32) -> Self {
        Precision(Some(p))
    }

    pub fn is_exact(self) -> bool {
        self.0.is_none()
    }

    pub fn bound(self) -> Option<i32> {
        self.0
    }

    pub fn min(self, other: Precision) -> Precision {
        match (self.0, other.0) {
            (None, _) => other,
            (_, None) => self,
            (Some(a), Some(b)) => Precision(Some(a.min(b))),
        }
    }

    pub fn shift(self, d: i32) -> Precision {
        Precision(self.0.map(|p| p + d))
    }

    /// True when a term of total degree `deg` is reliable.
    pub fn knows(self, deg: u32) -> bool {
        self.0.is_none_or(|p| (deg as i64) < p as i64)
    }

    /// Largest reliable degree as a truncation bound (`None`: unbounded).
    pub fn max_degree(self) -> Option<i64> {
        self.0.map(|p| p as i64 - 1)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => f.write_str("exact"),
            Some(p) => write!(f, "O(deg {p})"),
        }
    }
}

/// A polynomial valid modulo terms of degree `>= precision`.
#[derive(Clone, PartialEq)]
pub struct Series<S: Scalar> {
    poly: Polynomial<S>,
    prec: Precision,
}

impl<S: Scalar> Series<S> {
    pub fn exact(poly: Polynomial<S>) -> Self {
        Series { poly, prec: Precision::EXACT }
    }

    pub fn new(poly: Polynomial<S>, prec: Precision) -> Self {
        Series { poly: truncate_to(poly, prec), prec }
    }

    pub fn zero(ctx: &Ctx) -> Self {
        Self::exact(Polynomial::zero(ctx))
    }

    pub fn poly(&self) -> &Polynomial<S> {
        &self.poly
    }

    pub fn into_poly(self) -> Polynomial<S> {
        self.poly
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    pub fn ctx(&self) -> &Ctx {
        self.poly.ctx()
    }

    pub fn is_exact(&self) -> bool {
        self.prec.is_exact()
    }

    /// Known to vanish: exact zero.
    pub fn is_exact_zero(&self) -> bool {
        self.prec.is_exact() && self.poly.is_zero()
    }

    /// Every reliable coefficient is zero.
    pub fn is_zero_mod_precision(&self) -> bool {
        self.poly.is_zero()
    }

    /// Lower bound for the valuation of the true value.
    fn valuation_bound(&self) -> Option<i64> {
        match (self.poly.valuation(), self.prec.bound()) {
            (Some(v), Some(p)) => Some((v as i64).min(p as i64)),
            (Some(v), None) => Some(v as i64),
            (None, Some(p)) => Some(p as i64),
            (None, None) => None,
        }
    }

    pub fn with_precision(&self, prec: Precision) -> Self {
        Series::new(self.poly.clone(), self.prec.min(prec))
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        Series::new(&self.poly + &other.poly, prec)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        Series::new(&self.poly - &other.poly, prec)
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.prec = self.prec.min(other.prec);
        self.poly.add_assign_ref(&other.poly);
        if let Some(b) = self.prec.bound() {
            self.poly = truncate_to(std::mem::replace(&mut self.poly, Polynomial::zero(other.ctx())), Precision::at(b));
        }
    }

    pub fn neg(&self) -> Self {
        Series { poly: -&self.poly, prec: self.prec }
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Series::zero(self.ctx());
        }
        Series { poly: self.poly.scale(c), prec: self.prec }
    }

    /// Precision of a product: errors get multiplied by the other factor.
    pub fn product_precision(&self, other: &Self) -> Precision {
        if self.is_exact_zero() || other.is_exact_zero() {
            return Precision::EXACT;
        }
        let part = |p: Precision, v: Option<i64>| -> Precision {
            match (p.bound(), v) {
                (None, _) => Precision::EXACT,
                (Some(p), Some(v)) => Precision::at((p as i64 + v).min(i32::MAX as i64) as i32),
                (Some(p), None) => Precision::at(p),
            }
        };
        part(self.prec, other.valuation_bound()).min(part(other.prec, self.valuation_bound()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = self.product_precision(other);
        let bound = match prec.bound() {
            None => None,
            Some(b) if b <= 0 => return Series { poly: Polynomial::zero(self.ctx()), prec },
            Some(b) => Some((b - 1) as u32),
        };
        Series { poly: self.poly.mul_truncated(&other.poly, bound), prec }
    }

    pub fn mul_poly(&self, p: &Polynomial<S>) -> Self {
        self.mul(&Series::exact(p.clone()))
    }

    pub fn diff(&self, idx: usize) -> Self {
        Series::new(self.poly.diff(idx), self.prec.shift(-1))
    }

    pub fn diff_multi(&self, gamma: &[u32]) -> Self {
        let order: u32 = gamma.iter().sum();
        Series::new(self.poly.diff_multi(gamma), self.prec.shift(-(order as i32)))
    }

    /// Substitution `x ↦ images`. Inexact input needs images without constant
    /// term, otherwise unknown high-degree terms leak into low degrees.
    pub fn compose(&self, images: &[Series<S>], target: &Ctx) -> Result<Self> {
        // errors in an image enter through derivatives of self (valuation >= 0)
        let mut prec = images.iter().map(|im| im.prec).fold(Precision::EXACT, Precision::min);
        if let Some(p) = self.prec.bound() {
            let v = images.iter().filter_map(|im| im.valuation_bound()).min().unwrap_or(1);
            if v < 1 {
                return Err(Error::PrecisionLoss(
                    "composing a truncated series with a map that moves the origin".into(),
                ));
            }
            prec = prec.min(Precision::at((p as i64 * v).min(i32::MAX as i64) as i32));
        }
        let polys: Vec<Polynomial<S>> = images.iter().map(|s| s.poly.clone()).collect();
        Ok(Series::new(self.poly.compose(&polys, target)?, prec))
    }

    pub fn embed(&self, target: &Ctx) -> Result<Self> {
        Ok(Series { poly: self.poly.embed(target)?, prec: self.prec })
    }
}

fn truncate_to<S: Scalar>(p: Polynomial<S>, prec: Precision) -> Polynomial<S> {
    match prec.bound() {
        None => p,
        Some(b) if b <= 0 => Polynomial::zero(p.ctx()),
        Some(b) => p.truncated(Some((b - 1) as u32)),
    }
}

impl<S: Scalar> fmt::Display for Series<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.prec.bound() {
            None => write!(f, "{}", self.poly),
            Some(p) => write!(f, "{} + O(deg {p})", self.poly),
        }
    }
}

impl<S: Scalar> fmt::Debug for Series<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series({self})")
    }
}

/// `q` with `p·q ≡ 1` modulo total degree `> degree_bound`.
pub fn series_invert<S: Scalar>(p: &Polynomial<S>, degree_bound: u32) -> Result<Polynomial<S>> {
    let c0 = p.constant_term();
    let inv0 = c0
        .inv()
        .ok_or_else(|| Error::NotInvertible(format!("constant term of `{p}` is zero")))?;
    let ctx = p.ctx();
    // p = c0 (1 + u), 1/p = inv0 Σ (-u)^k
    let mut u = p.scale(&inv0);
    u.add_term(super::monomial::Monomial::one(ctx.len()), &S::one().neg_ref());
    let neg_u = -&u;
    let bound = Some(degree_bound);
    let mut acc = Polynomial::one(ctx);
    let mut power = Polynomial::one(ctx);
    for _ in 0..degree_bound {
        power = power.mul_truncated(&neg_u, bound);
        if power.is_zero() {
            break;
        }
        acc.add_assign_ref(&power);
    }
    Ok(acc.scale(&inv0))
}

/// Inverse of a square matrix of polynomials with invertible constant part.
///
/// Returns exact entries when the truncated inverse happens to be the true
/// inverse, otherwise entries are reliable below degree `degree_bound + 1`.
pub fn matrix_series_inverse<S: Scalar>(
    m: &[Vec<Polynomial<S>>],
    degree_bound: u32,
) -> Result<Vec<Vec<Series<S>>>> {
    let n = m.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let ctx = m[0][0].ctx().clone();
    let m0 = Matrix::from_rows(
        m.iter().map(|row| row.iter().map(|p| p.constant_term()).collect()).collect(),
    );
    let inv0 = m0
        .inverse()
        .ok_or_else(|| Error::NotInvertible("matrix is singular at the origin".into()))?;
    let bound = Some(degree_bound);
    let lift = |a: &Matrix<S>| -> Vec<Vec<Polynomial<S>>> {
        (0..n)
            .map(|i| (0..n).map(|j| Polynomial::constant(&ctx, a.get(i, j).clone())).collect())
            .collect()
    };
    let matmul = |a: &[Vec<Polynomial<S>>], b: &[Vec<Polynomial<S>>], bd: Option<u32>| {
        let mut out = vec![vec![Polynomial::zero(&ctx); n]; n];
        for i in 0..n {
            for k in 0..n {
                if a[i][k].is_zero() {
                    continue;
                }
                for j in 0..n {
                    let t = a[i][k].mul_truncated(&b[k][j], bd);
                    out[i][j].add_assign_ref(&t);
                }
            }
        }
        out
    };
    let inv0p = lift(&inv0);
    // inv0·m = I + U with U vanishing at the origin; m⁻¹ = Σ (-U)^k inv0
    let mut neg_u = matmul(&inv0p, m, None);
    for (i, row) in neg_u.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            if i == j {
                e.add_term(super::monomial::Monomial::one(ctx.len()), &S::one().neg_ref());
            }
            *e = -&*e;
        }
    }
    let mut acc = inv0p.clone();
    let mut power = inv0p;
    for _ in 0..degree_bound {
        power = matmul(&neg_u, &power, bound);
        if power.iter().all(|r| r.iter().all(|e| e.is_zero())) {
            break;
        }
        for i in 0..n {
            for j in 0..n {
                acc[i][j].add_assign_ref(&power[i][j]);
            }
        }
    }
    let check = matmul(m, &acc, None);
    let exact = check.iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, e)| if i == j { e.is_one() } else { e.is_zero() })
    });
    let prec = if exact { Precision::EXACT } else { Precision::at(degree_bound as i32 + 1) };
    Ok(acc
        .into_iter()
        .map(|row| row.into_iter().map(|e| Series::new(e, prec)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::context::VarContext;
    use crate::coeff::parse::parse_poly;
    use crate::coeff::scalar::GaussianRational;

    type P = Polynomial<GaussianRational>;

    #[test]
    fn geometric_series() {
        let c = VarContext::base(&["x"], &["t"]).unwrap();
        let p: P = parse_poly(&c, "1 + t^2").unwrap();
        let q = series_invert(&p, 4).unwrap();
        assert_eq!(q.to_string(), "t^4 - t^2 + 1");
        let two: P = parse_poly(&c, "2").unwrap();
        assert_eq!(series_invert(&two, 3).unwrap().to_string(), "1/2");
        assert_eq!(series_invert(&P::one(&c), 7).unwrap(), P::one(&c));
        assert!(matches!(series_invert(&P::var(&c, 0), 3), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn product_precision_tracks_valuation() {
        let c = VarContext::base(&["x", "y"], &[]).unwrap();
        let a = Series::new(parse_poly::<GaussianRational>(&c, "1 + x").unwrap(), Precision::at(3));
        let b = Series::exact(parse_poly::<GaussianRational>(&c, "x*y").unwrap());
        let ab = a.mul(&b);
        assert_eq!(ab.precision(), Precision::at(5));
        assert_eq!(ab.poly().to_string(), "x^2*y + x*y");
        let d = a.diff(0);
        assert_eq!(d.precision(), Precision::at(2));
        assert_eq!(d.poly().to_string(), "1");
    }

    #[test]
    fn matrix_inverse_detects_exactness() {
        let c = VarContext::base(&["x"], &[]).unwrap();
        let p = |s: &str| parse_poly::<GaussianRational>(&c, s).unwrap();
        // unipotent: inverse is polynomial
        let m = vec![vec![p("1"), p("x")], vec![p("0"), p("1")]];
        let inv = matrix_series_inverse(&m, 4).unwrap();
        assert!(inv[0][1].is_exact());
        assert_eq!(inv[0][1].poly().to_string(), "-x");
        let m = vec![vec![p("1 + x"), p("0")], vec![p("0"), p("2")]];
        let inv = matrix_series_inverse(&m, 3).unwrap();
        assert_eq!(inv[0][0].precision(), Precision::at(4));
        assert_eq!(inv[0][0].poly().to_string(), "-x^3 + x^2 - x + 1");
        assert_eq!(inv[1][1].poly().to_string(), "1/2");
    }
}
