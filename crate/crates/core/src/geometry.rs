//! Regular Poisson charts in foliated normal form, leafwise connections,
//! lifted curvature and presymplectic linear algebra.
//!
//! Leaves are the `t = const` slices; leaf variables come first in the base
//! context. The convention throughout is `Σ_k Π^{ik} ω_{kj} = δ^i_j`.

use std::sync::Arc;

use crate::coeff::{
    matrix_series_inverse, ComplexScalar, Ctx, Matrix, Monomial, Polynomial, Precision, Scalar,
    Series, VarClass,
};
use crate::error::{Error, Result};
use crate::report::{Check, Report};
use crate::weyl::{wedge_sign, WeylElement, WeylKey, WeylSpace};

pub type SeriesMatrix<S> = Vec<Vec<Series<S>>>;

/// Coordinate model of a regular Poisson manifold.
#[derive(Clone, Debug)]
pub struct PoissonChart<S: ComplexScalar> {
    ctx: Ctx,
    rank: usize,
    pi: SeriesMatrix<S>,
    omega: SeriesMatrix<S>,
    bound: u32,
    space: Arc<WeylSpace<S>>,
}

fn exact_matrix<S: Scalar>(m: &[Vec<Polynomial<S>>]) -> SeriesMatrix<S> {
    m.iter().map(|r| r.iter().map(|p| Series::exact(p.clone())).collect()).collect()
}

fn square<T>(m: &[Vec<T>], n: usize, what: &str) -> Result<()> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(Error::Precondition(format!("{what} must be a {n}×{n} matrix")));
    }
    Ok(())
}

fn leaf_rank(ctx: &Ctx) -> Result<usize> {
    let leaf = ctx.indices_of_class(VarClass::LeafBase);
    if leaf.iter().enumerate().any(|(k, &i)| k != i) {
        return Err(Error::Context("leaf variables must precede transverse ones".into()));
    }
    if ctx.vars().iter().any(|v| !matches!(v.class, VarClass::LeafBase | VarClass::TransverseBase)) {
        return Err(Error::Context("chart context may only contain base variables".into()));
    }
    Ok(leaf.len())
}

impl<S: ComplexScalar> PoissonChart<S> {
    /// Chart from both tensors. If `Π·ω = 1` holds exactly they are exact data,
    /// otherwise both are treated as known below degree `bound + 1`.
    pub fn new(
        ctx: &Ctx,
        pi: Vec<Vec<Polynomial<S>>>,
        omega: Vec<Vec<Polynomial<S>>>,
        bound: u32,
    ) -> Result<Self> {
        let rank = leaf_rank(ctx)?;
        square(&pi, rank, "Π")?;
        square(&omega, rank, "ω")?;
        let mut exact = true;
        for i in 0..rank {
            for j in 0..rank {
                let mut acc = Polynomial::zero(ctx);
                for k in 0..rank {
                    acc.add_assign_ref(&(&pi[i][k] * &omega[k][j]));
                }
                let ok = if i == j { acc.is_one() } else { acc.is_zero() };
                exact &= ok;
            }
        }
        let prec = if exact { Precision::EXACT } else { Precision::at(bound as i32 + 1) };
        let wrap = |m: &[Vec<Polynomial<S>>]| -> SeriesMatrix<S> {
            m.iter().map(|r| r.iter().map(|p| Series::new(p.clone(), prec)).collect()).collect()
        };
        Self::assemble(ctx, rank, wrap(&pi), wrap(&omega), bound)
    }

    /// Chart from the leafwise symplectic form; `Π = ω⁻¹` as a series.
    pub fn from_omega(ctx: &Ctx, omega: Vec<Vec<Polynomial<S>>>, bound: u32) -> Result<Self> {
        let rank = leaf_rank(ctx)?;
        square(&omega, rank, "ω")?;
        let pi = matrix_series_inverse(&omega, bound)?;
        Self::assemble(ctx, rank, pi, exact_matrix(&omega), bound)
    }

    /// Chart from the Poisson tensor; `ω = Π⁻¹` as a series.
    pub fn from_pi(ctx: &Ctx, pi: Vec<Vec<Polynomial<S>>>, bound: u32) -> Result<Self> {
        let rank = leaf_rank(ctx)?;
        square(&pi, rank, "Π")?;
        let omega = matrix_series_inverse(&pi, bound)?;
        Self::assemble(ctx, rank, exact_matrix(&pi), omega, bound)
    }

    /// Constant Darboux chart with `Π^{2a-1,2a} = 1`, `ω_{2a-1,2a} = -1`.
    pub fn darboux(ctx: &Ctx) -> Result<Self> {
        let rank = leaf_rank(ctx)?;
        if rank % 2 != 0 {
            return Err(Error::Precondition("leaf dimension must be even".into()));
        }
        let mut pi = vec![vec![Polynomial::zero(ctx); rank]; rank];
        for a in 0..rank / 2 {
            pi[2 * a][2 * a + 1] = Polynomial::one(ctx);
            pi[2 * a + 1][2 * a] = -Polynomial::one(ctx);
        }
        Self::from_pi(ctx, pi, 0)
    }

    fn assemble(
        ctx: &Ctx,
        rank: usize,
        pi: SeriesMatrix<S>,
        omega: SeriesMatrix<S>,
        bound: u32,
    ) -> Result<Self> {
        let space = WeylSpace::new(ctx, rank, pi.clone())?;
        Ok(PoissonChart { ctx: ctx.clone(), rank, pi, omega, bound, space })
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn transverse_dim(&self) -> usize {
        self.ctx.len() - self.rank
    }

    pub fn pi(&self) -> &SeriesMatrix<S> {
        &self.pi
    }

    pub fn omega(&self) -> &SeriesMatrix<S> {
        &self.omega
    }

    pub fn base_degree_bound(&self) -> u32 {
        self.bound
    }

    pub fn space(&self) -> &Arc<WeylSpace<S>> {
        &self.space
    }

    /// True when Π and ω are exact polynomials.
    pub fn is_exact(&self) -> bool {
        self.pi.iter().chain(&self.omega).all(|r| r.iter().all(|s| s.is_exact()))
    }

    /// `{f, g} = Π^{ij} ∂_i f ∂_j g` over leaf indices.
    pub fn bracket(&self, f: &Series<S>, g: &Series<S>) -> Series<S> {
        let mut acc = Series::zero(&self.ctx);
        for i in 0..self.rank {
            let fi = f.diff(i);
            if fi.is_exact_zero() {
                continue;
            }
            for j in 0..self.rank {
                if self.pi[i][j].is_exact_zero() {
                    continue;
                }
                acc.add_assign(&self.pi[i][j].mul(&fi).mul(&g.diff(j)));
            }
        }
        acc
    }
}

fn residual_text<S: Scalar>(label: &str, s: &Series<S>) -> Option<String> {
    (!s.is_zero_mod_precision()).then(|| format!("{label} = {}", s.poly()))
}

/// Antisymmetry, `Π·ω = 1`, Jacobi, even rank and full rank at the origin.
pub fn validate_chart<S: ComplexScalar>(chart: &PoissonChart<S>) -> Report {
    let r = chart.rank;
    let mut report = Report::new("validate");
    let bound = Precision::at(chart.bound as i32 + 1);
    let cut = |s: Series<S>| s.with_precision(bound);

    report.push(if r.is_multiple_of(2) {
        Check::pass("leaf dimension even")
    } else {
        Check::fail("leaf dimension even", vec![format!("r = {r}")])
    });

    for (name, m) in [("Pi", &chart.pi), ("omega", &chart.omega)] {
        let mut res = Vec::new();
        for i in 0..r {
            for j in i..r {
                let s = cut(m[i][j].add(&m[j][i]));
                if let Some(t) = residual_text(&format!("{name}[{},{}] + {name}[{},{}]", i + 1, j + 1, j + 1, i + 1), &s) {
                    res.push(t);
                }
            }
        }
        report.push(Check::from_residuals(format!("{name} antisymmetric"), res));
    }

    let mut res = Vec::new();
    for i in 0..r {
        for j in 0..r {
            let mut acc = Series::zero(&chart.ctx);
            for k in 0..r {
                acc.add_assign(&chart.pi[i][k].mul(&chart.omega[k][j]));
            }
            if i == j {
                acc = acc.sub(&Series::exact(Polynomial::one(&chart.ctx)));
            }
            if let Some(t) = residual_text(&format!("(Pi*omega - 1)[{},{}]", i + 1, j + 1), &cut(acc)) {
                res.push(t);
            }
        }
    }
    report.push(Check::from_residuals("Pi*omega = 1", res));

    let mut res = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            for k in j + 1..r {
                let mut acc = Series::zero(&chart.ctx);
                for l in 0..r {
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        acc.add_assign(&chart.pi[l][a].mul(&chart.pi[b][c].diff(l)));
                    }
                }
                if let Some(t) = residual_text(&format!("Jacobi[{},{},{}]", i + 1, j + 1, k + 1), &cut(acc)) {
                    res.push(t);
                }
            }
        }
    }
    report.push(Check::from_residuals("Jacobi identity", res));

    let m0 = Matrix::from_rows(
        (0..r).map(|i| (0..r).map(|j| chart.pi[i][j].poly().constant_term()).collect()).collect(),
    );
    let rank0 = m0.rank();
    report.push(if rank0 == r {
        Check::pass("full rank at origin")
    } else {
        Check::fail("full rank at origin", vec![format!("rank Pi(0) = {rank0} < {r}")])
    });
    report
}

/// Symmetric leaf metric `η_{ij}`.
#[derive(Clone, Debug)]
pub struct LeafMetric<S: ComplexScalar> {
    eta: Vec<Vec<Polynomial<S>>>,
}

impl<S: ComplexScalar> LeafMetric<S> {
    pub fn new(eta: Vec<Vec<Polynomial<S>>>) -> Result<Self> {
        let n = eta.len();
        square(&eta, n, "η")?;
        for i in 0..n {
            for j in 0..n {
                if eta[i][j] != eta[j][i] {
                    return Err(Error::Precondition(format!(
                        "metric not symmetric at [{},{}]",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(LeafMetric { eta })
    }

    pub fn identity(ctx: &Ctx, n: usize) -> Self {
        let eta = (0..n)
            .map(|i| {
                (0..n).map(|j| if i == j { Polynomial::one(ctx) } else { Polynomial::zero(ctx) }).collect()
            })
            .collect();
        LeafMetric { eta }
    }

    pub fn entries(&self) -> &[Vec<Polynomial<S>>] {
        &self.eta
    }
}

/// Christoffel symbols `Γ^k_{ij}` (index order `[k][i][j]`) over leaf indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafConnection<S: ComplexScalar> {
    gamma: Vec<Vec<Vec<Series<S>>>>,
}

impl<S: ComplexScalar> LeafConnection<S> {
    pub fn new(gamma: Vec<Vec<Vec<Series<S>>>>) -> Result<Self> {
        let n = gamma.len();
        if gamma.iter().any(|g| g.len() != n || g.iter().any(|r| r.len() != n)) {
            return Err(Error::Precondition("Christoffel array must be r×r×r".into()));
        }
        Ok(LeafConnection { gamma })
    }

    pub fn flat(ctx: &Ctx, n: usize) -> Self {
        LeafConnection { gamma: vec![vec![vec![Series::zero(ctx); n]; n]; n] }
    }

    pub fn from_polys(gamma: Vec<Vec<Vec<Polynomial<S>>>>) -> Result<Self> {
        Self::new(
            gamma
                .into_iter()
                .map(|g| g.into_iter().map(|r| r.into_iter().map(Series::exact).collect()).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// `Γ^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Series<S> {
        &self.gamma[k][i][j]
    }

    pub fn is_flat(&self) -> bool {
        self.gamma.iter().flatten().flatten().all(|s| s.is_exact_zero())
    }

    pub fn is_torsion_free(&self) -> bool {
        let n = self.dim();
        (0..n).all(|k| (0..n).all(|i| (0..n).all(|j| self.gamma[k][i][j] == self.gamma[k][j][i])))
    }

    pub fn precision(&self) -> Precision {
        self.gamma.iter().flatten().flatten().map(|s| s.precision()).fold(Precision::EXACT, Precision::min)
    }
}

/// Leafwise Levi-Civita connection of `metric`.
pub fn levi_civita<S: ComplexScalar>(
    metric: &LeafMetric<S>,
    chart: &PoissonChart<S>,
) -> Result<LeafConnection<S>> {
    let r = chart.rank;
    square(&metric.eta, r, "metric")?;
    let inv = matrix_series_inverse(&metric.eta, chart.bound)
        .map_err(|_| Error::NotInvertible("metric is degenerate at the origin".into()))?;
    let eta: SeriesMatrix<S> = exact_matrix(&metric.eta);
    let half = S::from_ratio(1, 2);
    let mut gamma = vec![vec![vec![Series::zero(&chart.ctx); r]; r]; r];
    for k in 0..r {
        for i in 0..r {
            for j in i..r {
                let mut acc = Series::zero(&chart.ctx);
                for l in 0..r {
                    let d = eta[j][l].diff(i).add(&eta[i][l].diff(j)).sub(&eta[i][j].diff(l));
                    if d.is_exact_zero() {
                        continue;
                    }
                    acc.add_assign(&inv[k][l].mul(&d));
                }
                let v = acc.scale(&half);
                gamma[k][i][j] = v.clone();
                gamma[k][j][i] = v;
            }
        }
    }
    LeafConnection::new(gamma)
}

/// `∇_k ω_{ij} = ∂_k ω_{ij} − Γ^l_{ki} ω_{lj} − Γ^l_{kj} ω_{il}`.
pub fn covariant_omega<S: ComplexScalar>(
    conn: &LeafConnection<S>,
    chart: &PoissonChart<S>,
) -> Vec<Vec<Vec<Series<S>>>> {
    let r = chart.rank;
    let w = &chart.omega;
    (0..r)
        .map(|k| {
            (0..r)
                .map(|i| {
                    (0..r)
                        .map(|j| {
                            let mut acc = w[i][j].diff(k);
                            for l in 0..r {
                                acc = acc.sub(&conn.gamma[l][k][i].mul(&w[l][j]));
                                acc = acc.sub(&conn.gamma[l][k][j].mul(&w[i][l]));
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// How the correction `Δ` of the Levi-Civita connection is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConnectionMode {
    /// Torsion-free correction `Δ^m_{ab} = ⅓(A_{abc} + A_{bac}) Π^{cm}` with
    /// `A = ∇^LC ω`; yields `∇ω = 0` whenever `ω` is leafwise closed.
    #[default]
    Symmetric,
    /// `ω(X, Δ(Y,Z)) = ∇^LC_Z ω(X,Y) − ∇^LC_Y ω(X,Z)` taken verbatim.
    Literal,
}

/// `∇ = ∇^LC + Δ`, verified to satisfy `∇ω = 0`.
pub fn poisson_connection<S: ComplexScalar>(
    metric: &LeafMetric<S>,
    chart: &PoissonChart<S>,
    mode: ConnectionMode,
) -> Result<LeafConnection<S>> {
    let r = chart.rank;
    let lc = levi_civita(metric, chart)?;
    let a = covariant_omega(&lc, chart);
    let pi = &chart.pi;
    let mut gamma = lc.gamma.clone();
    match mode {
        ConnectionMode::Symmetric => {
            let third = S::from_ratio(1, 3);
            for x in 0..r {
                for y in 0..r {
                    for m in 0..r {
                        let mut acc = Series::zero(&chart.ctx);
                        for c in 0..r {
                            let s = a[x][y][c].add(&a[y][x][c]);
                            if s.is_exact_zero() {
                                continue;
                            }
                            acc.add_assign(&s.mul(&pi[c][m]));
                        }
                        gamma[m][x][y].add_assign(&acc.scale(&third));
                    }
                }
            }
        }
        ConnectionMode::Literal => {
            for l in 0..r {
                for y in 0..r {
                    for z in 0..r {
                        let mut acc = Series::zero(&chart.ctx);
                        for x in 0..r {
                            let dp = a[z][x][y].sub(&a[y][x][z]);
                            if dp.is_exact_zero() {
                                continue;
                            }
                            acc.add_assign(&pi[l][x].mul(&dp));
                        }
                        gamma[l][y][z].add_assign(&acc);
                    }
                }
            }
        }
    }
    let conn = LeafConnection::new(gamma)?;
    let report = check_poisson_connection(&conn, chart);
    if !report.passed() {
        let residual = report.failures().flat_map(|c| c.residuals.clone()).collect::<Vec<_>>().join("; ");
        return Err(Error::Construction {
            message: format!("connection ({mode:?} correction) does not preserve ω"),
            residual,
        });
    }
    Ok(conn)
}

/// Residuals of `∇ω` for all index triples (reliable degrees only).
pub fn check_poisson_connection<S: ComplexScalar>(
    conn: &LeafConnection<S>,
    chart: &PoissonChart<S>,
) -> Report {
    let r = chart.rank;
    let mut report = Report::new("connection");
    if conn.dim() != r {
        report.push(Check::fail("dimension", vec![format!("connection has {} leaf indices, chart {r}", conn.dim())]));
        return report;
    }
    let nab = covariant_omega(conn, chart);
    let mut res = Vec::new();
    for k in 0..r {
        for i in 0..r {
            for j in i + 1..r {
                if let Some(t) = residual_text(&format!("nabla_{} omega[{},{}]", k + 1, i + 1, j + 1), &nab[k][i][j]) {
                    res.push(t);
                }
            }
        }
    }
    let prec = nab.iter().flatten().flatten().map(|s| s.precision()).fold(Precision::EXACT, Precision::min);
    let mut check = Check::from_residuals("nabla omega = 0", res);
    if !prec.is_exact() {
        check = check.with_note(format!("verified below {prec}"));
    }
    report.push(check);
    report.push(if conn.is_torsion_free() {
        Check::pass("torsion-free")
    } else {
        Check::pass("torsion-free").with_note("connection has torsion; not required")
    });
    report
}

/// `R_{ijkl} = ω_{im}(∂_kΓ^m_{lj} − ∂_lΓ^m_{kj} + Γ^m_{kn}Γ^n_{lj} − Γ^m_{ln}Γ^n_{kj})`.
pub fn curvature_tensor<S: ComplexScalar>(
    conn: &LeafConnection<S>,
    chart: &PoissonChart<S>,
) -> Vec<Vec<Vec<Vec<Series<S>>>>> {
    let r = chart.rank;
    let g = &conn.gamma;
    // R^m_{jkl}
    let mut rm = vec![vec![vec![vec![Series::zero(&chart.ctx); r]; r]; r]; r];
    for m in 0..r {
        for j in 0..r {
            for k in 0..r {
                for l in 0..r {
                    let mut acc = g[m][l][j].diff(k).sub(&g[m][k][j].diff(l));
                    for n in 0..r {
                        acc.add_assign(&g[m][k][n].mul(&g[n][l][j]));
                        acc = acc.sub(&g[m][l][n].mul(&g[n][k][j]));
                    }
                    rm[m][j][k][l] = acc;
                }
            }
        }
    }
    let mut out = vec![vec![vec![vec![Series::zero(&chart.ctx); r]; r]; r]; r];
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                for l in 0..r {
                    let mut acc = Series::zero(&chart.ctx);
                    for m in 0..r {
                        if chart.omega[i][m].is_exact_zero() {
                            continue;
                        }
                        acc.add_assign(&chart.omega[i][m].mul(&rm[m][j][k][l]));
                    }
                    out[i][j][k][l] = acc;
                }
            }
        }
    }
    out
}

/// `R = ¼ R_{ijkl} y^i y^j dx^k ∧ dx^l` in the Weyl bundle at truncation `n`.
pub fn lift_curvature<S: ComplexScalar>(
    conn: &LeafConnection<S>,
    chart: &PoissonChart<S>,
    n: u32,
) -> WeylElement<S> {
    let r = chart.rank;
    let rt = curvature_tensor(conn, chart);
    let quarter = S::from_ratio(1, 4);
    let mut out = WeylElement::zero(&chart.space, n);
    for i in 0..r {
        for j in 0..r {
            let mut fiber = vec![0u32; r];
            fiber[i] += 1;
            fiber[j] += 1;
            for k in 0..r {
                for l in 0..r {
                    if k == l || rt[i][j][k][l].is_exact_zero() {
                        continue;
                    }
                    let neg = wedge_sign(1 << k, 1 << l).unwrap();
                    let c = if neg { quarter.neg_ref() } else { quarter.clone() };
                    let key = WeylKey::new(Monomial::from_exponents(fiber.clone()), 0, (1 << k) | (1 << l));
                    out.add_term(key, rt[i][j][k][l].scale(&c));
                }
            }
        }
    }
    out
}

/// `(dim W, dim W^ω, dim W ∩ V^ω)` for a presymplectic `(V, ω)`. The triple
/// satisfies `dim W + dim W^ω = dim V + dim(W ∩ V^ω)`.
pub fn presymplectic_dims<S: Scalar>(
    v_dim: usize,
    omega: &Matrix<S>,
    w_basis: &[Vec<S>],
) -> Result<(usize, usize, usize)> {
    if omega.nrows() != v_dim || omega.ncols() != v_dim {
        return Err(Error::Precondition(format!("ω must be {v_dim}×{v_dim}")));
    }
    for i in 0..v_dim {
        for j in 0..v_dim {
            if !omega.get(i, j).add_ref(omega.get(j, i)).is_zero() {
                return Err(Error::Precondition(format!("ω not antisymmetric at [{},{}]", i + 1, j + 1)));
            }
        }
    }
    if w_basis.iter().any(|w| w.len() != v_dim) {
        return Err(Error::Precondition("basis vectors have wrong length".into()));
    }
    let k = w_basis.len();
    if k == 0 {
        return Ok((0, v_dim, 0));
    }
    let w = Matrix::from_rows(w_basis.to_vec());
    if w.rank() < k {
        return Err(Error::DependentBasis(format!("{k} vectors span a space of dimension {}", w.rank())));
    }
    // W^ω = ker(W Ω), W ∩ V^ω ≅ ker(Ω Wᵀ)
    let w_perp = v_dim - w.mul(omega).rank();
    let inter = k - omega.mul(&w.transpose()).rank();
    Ok((k, w_perp, inter))
}

/// Basis of `W^ω = {v : ω(w, v) = 0 for all w ∈ W}`.
pub fn symplectic_complement<S: Scalar>(omega: &Matrix<S>, w_basis: &[Vec<S>]) -> Vec<Vec<S>> {
    if w_basis.is_empty() {
        let id = Matrix::<S>::identity(omega.nrows());
        return (0..omega.nrows()).map(|i| id.row(i).to_vec()).collect();
    }
    Matrix::from_rows(w_basis.to_vec()).mul(omega).nullspace()
}

/// `ω` restricted to `span(basis)` is nondegenerate.
pub fn restriction_nondegenerate<S: Scalar>(omega: &Matrix<S>, basis: &[Vec<S>]) -> bool {
    if basis.is_empty() {
        return true;
    }
    let b = Matrix::from_rows(basis.to_vec());
    let gram = b.mul(omega).mul(&b.transpose());
    gram.rank() == basis.len()
}
