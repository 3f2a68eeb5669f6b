#![allow(clippy::needless_range_loop)]

use fedwhit::coeff::{parse_poly, Ctx, Matrix, Polynomial, Scalar, Series, VarContext};
use fedwhit::geometry::{
    check_poisson_connection, curvature_tensor, levi_civita, lift_curvature, poisson_connection,
    presymplectic_dims, restriction_nondegenerate, symplectic_complement, validate_chart,
    ConnectionMode, LeafConnection, LeafMetric, PoissonChart,
};
use fedwhit::{Error, Gaussian, Poly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(ctx: &Ctx, s: &str) -> Poly {
    parse_poly(ctx, s).unwrap()
}

fn antisym(ctx: &Ctx, a12: &str) -> Vec<Vec<Poly>> {
    let a = p(ctx, a12);
    vec![vec![Poly::zero(ctx), a.clone()], vec![-&a, Poly::zero(ctx)]]
}

fn check_named(report: &fedwhit::report::Report, name: &str) -> bool {
    report.checks.iter().find(|c| c.name == name).unwrap().passed
}

fn nonconstant_chart(bound: u32) -> PoissonChart<Gaussian> {
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    PoissonChart::from_omega(&ctx, antisym(&ctx, "1 + x1*x2"), bound).unwrap()
}

#[test]
fn validate_examples() {
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    let flat = PoissonChart::<Gaussian>::darboux(&ctx).unwrap();
    assert!(validate_chart(&flat).passed());

    let ctx = VarContext::base(&["x1", "x2"], &["t"]).unwrap();
    let chart =
        PoissonChart::new(&ctx, antisym(&ctx, "1 - t^2 + t^4"), antisym(&ctx, "-1 - t^2"), 4).unwrap();
    let report = validate_chart(&chart);
    assert!(report.passed(), "{report}");
    // Π·ω = 1 forces opposite signs of Π^{12} and ω_{12}
    let wrong = PoissonChart::new(&ctx, antisym(&ctx, "1 - t^2 + t^4"), antisym(&ctx, "1 + t^2"), 4).unwrap();
    assert!(!check_named(&validate_chart(&wrong), "Pi*omega = 1"));

    let zero = vec![vec![Poly::zero(&ctx); 2]; 2];
    let degenerate = PoissonChart::new(&ctx, antisym(&ctx, "x1"), zero, 4).unwrap();
    let report = validate_chart(&degenerate);
    assert!(!check_named(&report, "full rank at origin"));
    assert!(check_named(&report, "Jacobi identity"));
}

#[test]
fn validate_reports_residuals() {
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    let pi = vec![vec![Poly::zero(&ctx), p(&ctx, "1")], vec![p(&ctx, "1"), Poly::zero(&ctx)]];
    let omega = antisym(&ctx, "-1");
    let chart = PoissonChart::new(&ctx, pi, omega, 2).unwrap();
    let report = validate_chart(&chart);
    let c = report.checks.iter().find(|c| c.name == "Pi antisymmetric").unwrap();
    assert!(!c.passed);
    assert_eq!(c.residuals, vec!["Pi[1,2] + Pi[2,1] = 2".to_string()]);
}

#[test]
fn jacobi_in_four_leaf_dimensions() {
    let ctx = VarContext::base(&["x1", "x2", "x3", "x4"], &[]).unwrap();
    let z = || Poly::zero(&ctx);
    // Π = ∂1∧∂2 + x2 ∂3∧∂4: Jacobi[1,3,4] = Π^{21} ∂2 Π^{34} = -1
    let mut pi = vec![vec![z(), z(), z(), z()]; 4];
    pi[0][1] = p(&ctx, "1");
    pi[1][0] = p(&ctx, "-1");
    pi[2][3] = p(&ctx, "x2");
    pi[3][2] = p(&ctx, "-x2");
    let chart = PoissonChart::new(&ctx, pi, vec![vec![z(); 4]; 4], 3).unwrap();
    let report = validate_chart(&chart);
    let c = report.checks.iter().find(|c| c.name == "Jacobi identity").unwrap();
    assert_eq!(c.residuals, vec!["Jacobi[1,3,4] = -1".to_string()]);
}

#[test]
fn levi_civita_examples() {
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    let chart = PoissonChart::<Gaussian>::darboux(&ctx).unwrap();
    let lc = levi_civita(&LeafMetric::identity(&ctx, 2), &chart).unwrap();
    assert!(lc.is_flat());
    let constant = LeafMetric::new(vec![vec![p(&ctx, "2"), p(&ctx, "1")], vec![p(&ctx, "1"), p(&ctx, "3")]]).unwrap();
    assert!(levi_civita(&constant, &chart).unwrap().is_flat());

    let chart = PoissonChart::<Gaussian>::from_omega(&ctx, antisym(&ctx, "-1"), 6).unwrap();
    let eta = LeafMetric::new(vec![vec![p(&ctx, "1 + x1^2"), Poly::zero(&ctx)], vec![Poly::zero(&ctx), p(&ctx, "1")]])
        .unwrap();
    let lc = levi_civita(&eta, &chart).unwrap();
    // Γ¹₁₁ = ½ η^{11} ∂₁η₁₁ = x1/(1 + x1^2)
    let g111 = lc.get(0, 0, 0).mul(&Series::exact(p(&ctx, "1 + x1^2")));
    assert!(g111.sub(&Series::exact(p(&ctx, "x1"))).is_zero_mod_precision());
    assert_eq!(lc.get(0, 0, 0).poly(), &p(&ctx, "x1 - x1^3 + x1^5 - x1^7"));
    for (k, i, j) in [(0, 0, 1), (0, 1, 1), (1, 0, 0), (1, 0, 1), (1, 1, 1)] {
        assert!(lc.get(k, i, j).is_zero_mod_precision(), "Γ^{k}_{i}{j}");
    }
    assert!(lc.is_torsion_free());

    let singular = LeafMetric::new(vec![vec![p(&ctx, "x1"), Poly::zero(&ctx)], vec![Poly::zero(&ctx), p(&ctx, "1")]])
        .unwrap();
    assert!(matches!(levi_civita(&singular, &chart), Err(Error::NotInvertible(_))));
    let asym = LeafMetric::<Gaussian>::new(vec![vec![p(&ctx, "1"), p(&ctx, "x1")], vec![p(&ctx, "x2"), p(&ctx, "1")]]);
    assert!(asym.is_err());
}

#[test]
fn poisson_connection_examples() {
    let ctx = VarContext::base(&["x1", "x2"], &["t"]).unwrap();
    let id = LeafMetric::identity(&ctx, 2);
    let flat = PoissonChart::<Gaussian>::darboux(&ctx).unwrap();
    assert!(poisson_connection(&id, &flat, ConnectionMode::Symmetric).unwrap().is_flat());

    let transverse = PoissonChart::from_omega(&ctx, antisym(&ctx, "-1 - t^2"), 4).unwrap();
    let conn = poisson_connection(&id, &transverse, ConnectionMode::Symmetric).unwrap();
    assert!(conn.is_flat());

    let chart = nonconstant_chart(6);
    let ctx = chart.ctx().clone();
    let id = LeafMetric::identity(&ctx, 2);
    let conn = poisson_connection(&id, &chart, ConnectionMode::Symmetric).unwrap();
    assert!(!conn.is_flat());
    assert!(conn.is_torsion_free());
    let report = check_poisson_connection(&conn, &chart);
    assert!(report.passed(), "{report}");

    let zero = LeafConnection::flat(&ctx, 2);
    let report = check_poisson_connection(&zero, &chart);
    assert!(!report.passed());
    let c = &report.checks[0];
    assert!(c.residuals.iter().any(|r| r.starts_with("nabla_1 omega[1,2] = ")), "{report}");
}

#[test]
fn literal_correction_is_checked_not_assumed() {
    let chart = nonconstant_chart(6);
    let id = LeafMetric::identity(chart.ctx(), 2);
    match poisson_connection(&id, &chart, ConnectionMode::Literal) {
        Ok(conn) => assert!(check_poisson_connection(&conn, &chart).passed()),
        Err(Error::Construction { residual, .. }) => assert!(!residual.is_empty()),
        Err(e) => panic!("unexpected error {e}"),
    }
    // a curved metric on constant ω: the literal Δ′ leaves ∇ω ≠ 0, the symmetric one does not
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    let flat = PoissonChart::<Gaussian>::darboux(&ctx).unwrap();
    let eta = LeafMetric::new(vec![vec![p(&ctx, "1 + x1^2"), Poly::zero(&ctx)], vec![Poly::zero(&ctx), p(&ctx, "1")]])
        .unwrap();
    let flat = PoissonChart::from_omega(flat.ctx(), antisym(&ctx, "-1"), 4).unwrap();
    match poisson_connection(&eta, &flat, ConnectionMode::Literal) {
        Err(Error::Construction { residual, .. }) => assert!(residual.contains("nabla_1 omega[1,2]"), "{residual}"),
        other => panic!("expected construction failure, got {other:?}"),
    }
    let conn = poisson_connection(&eta, &flat, ConnectionMode::Symmetric).unwrap();
    assert!(check_poisson_connection(&conn, &flat).passed());
}

#[test]
fn curvature_symmetries() {
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    let flat = PoissonChart::<Gaussian>::darboux(&ctx).unwrap();
    assert!(lift_curvature(&LeafConnection::flat(&ctx, 2), &flat, 4).is_zero());

    let chart = nonconstant_chart(6);
    let conn = poisson_connection(&LeafMetric::identity(chart.ctx(), 2), &chart, ConnectionMode::Symmetric).unwrap();
    let rt = curvature_tensor(&conn, &chart);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    assert!(rt[i][j][k][l].add(&rt[i][j][l][k]).is_zero_mod_precision());
                    assert!(rt[i][j][k][l].sub(&rt[j][i][k][l]).is_zero_mod_precision());
                }
            }
        }
    }
    let lifted = lift_curvature(&conn, &chart, 4);
    assert!(!lifted.is_zero());
    assert_eq!(lifted.fedosov_degree(), Some(2));
    assert_eq!(lifted.form_degree(), Some(2));
}

fn random_q(rng: &mut ChaCha8Rng) -> Gaussian {
    let num: i64 = rng.gen_range(-3..=3);
    let den: i64 = rng.gen_range(1..=2);
    Gaussian::from_ratio(num, den)
}

fn random_antisym(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Matrix<Gaussian> {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                let v = random_q(rng);
                m.set(i, j, v.clone());
                m.set(j, i, v.neg_ref());
            }
        }
    }
    m
}

fn random_independent(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<Gaussian>> {
    loop {
        let rows: Vec<Vec<Gaussian>> = (0..k).map(|_| (0..n).map(|_| random_q(rng)).collect()).collect();
        if Matrix::from_rows(rows.clone()).rank() == k || k == 0 {
            return rows;
        }
    }
}

#[test]
fn presymplectic_identity_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let n = 2 * rng.gen_range(1..=4);
        let omega = random_antisym(&mut rng, n, 0.6);
        let k = rng.gen_range(0..=n);
        let w = random_independent(&mut rng, n, k);
        let (dw, dperp, dint) = presymplectic_dims(n, &omega, &w).unwrap();
        assert_eq!(dw, k);
        assert_eq!(dw + dperp, n + dint);
        assert_eq!(symplectic_complement(&omega, &w).len(), dperp);
    }
}

#[test]
fn presymplectic_examples_and_errors() {
    let mut std = Matrix::<Gaussian>::zeros(4, 4);
    for (i, j) in [(0, 2), (1, 3)] {
        std.set(i, j, Gaussian::from_i64(1));
        std.set(j, i, Gaussian::from_i64(1).neg_ref());
    }
    let e = |i: usize| (0..4).map(|k| if k == i { Gaussian::from_i64(1) } else { Gaussian::from_i64(0) }).collect::<Vec<_>>();
    assert_eq!(presymplectic_dims(4, &std, &[e(0), e(1)]).unwrap(), (2, 2, 0));
    let all = [e(0), e(1), e(2), e(3)];
    assert_eq!(presymplectic_dims(4, &std, &all).unwrap(), (4, 0, 0));
    let zero = Matrix::<Gaussian>::zeros(4, 4);
    assert_eq!(presymplectic_dims(4, &zero, &[e(0)]).unwrap(), (1, 4, 1));
    assert_eq!(presymplectic_dims(4, &zero, &all).unwrap(), (4, 4, 4));
    assert!(matches!(presymplectic_dims(4, &std, &[e(0), e(0)]), Err(Error::DependentBasis(_))));
    let mut bad = std.clone();
    bad.set(0, 2, Gaussian::from_i64(2));
    assert!(matches!(presymplectic_dims(4, &bad, &[e(0)]), Err(Error::Precondition(_))));
}

#[test]
fn nondegenerate_complement_corollary() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut hits = 0;
    while hits < 50 {
        let n = 2 * rng.gen_range(1..=4);
        let omega = random_antisym(&mut rng, n, 0.8);
        if omega.rank() < n {
            continue;
        }
        let k = rng.gen_range(0..=n / 2) * 2;
        let w = random_independent(&mut rng, n, k);
        if !restriction_nondegenerate(&omega, &w) {
            continue;
        }
        let perp = symplectic_complement(&omega, &w);
        assert_eq!(perp.len(), n - k);
        assert!(restriction_nondegenerate(&omega, &perp));
        hits += 1;
    }
}

#[test]
fn bracket_uses_pi() {
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    let chart = PoissonChart::<Gaussian>::darboux(&ctx).unwrap();
    let b = chart.bracket(&Series::exact(p(&ctx, "x1")), &Series::exact(p(&ctx, "x2")));
    assert_eq!(b.poly(), &Polynomial::one(&ctx));
}
