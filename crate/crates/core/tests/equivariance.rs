use std::sync::Arc;

use fedwhit::coeff::{parse_poly, Ctx, Matrix, Monomial, Scalar, VarContext};
use fedwhit::equivariance::{
    equivalence_solve, equivalence_validate, invariance_check, projection_check, pullback_morphism_check,
    reduction_compare, DiffOp, EquivalenceAnsatz, GaugedStar, GroupAction, PolyMap, ReductionSetup,
};
use fedwhit::fedosov::{associativity_residuals, build_fedosov, MoyalStar, StarOracle, StarProduct};
use fedwhit::geometry::{poisson_connection, ConnectionMode, LeafConnection, LeafMetric, PoissonChart};
use fedwhit::whitney::WhitneySubset;
use fedwhit::{Error, Gaussian, Poly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(ctx: &Ctx, s: &str) -> Poly {
    parse_poly(ctx, s).unwrap()
}

fn g(n: i64) -> Gaussian {
    Gaussian::from_i64(n)
}

fn mat(rows: &[&[i64]]) -> Matrix<Gaussian> {
    Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| g(x)).collect()).collect())
}

fn flat(chart: &PoissonChart<Gaussian>, n: u32) -> StarProduct<Gaussian> {
    let conn = LeafConnection::flat(chart.ctx(), chart.rank());
    StarProduct::new(Arc::new(build_fedosov(chart, &conn, n, None).unwrap()))
}

fn random_poly(rng: &mut ChaCha8Rng, ctx: &Ctx, vars: &[usize], deg: u32) -> Poly {
    let mut out = Poly::zero(ctx);
    for _ in 0..rng.gen_range(1..=3) {
        let mut e = vec![0u32; ctx.len()];
        let mut left = rng.gen_range(0..=deg);
        for &v in vars {
            let x = rng.gen_range(0..=left);
            e[v] = x;
            left -= x;
        }
        let c = Gaussian::from_ratio(rng.gen_range(-3..=3), rng.gen_range(1..=2));
        out.add_assign_ref(&Poly::monomial(ctx, Monomial::from_exponents(e), c));
    }
    out
}

fn pairs(rng: &mut ChaCha8Rng, ctx: &Ctx, n: usize, deg: u32) -> Vec<(Poly, Poly)> {
    let vars: Vec<usize> = (0..ctx.len()).collect();
    (0..n).map(|_| (random_poly(rng, ctx, &vars, deg), random_poly(rng, ctx, &vars, deg))).collect()
}

#[test]
fn pullback_battery_on_flat_moyal() {
    let ctx = VarContext::base(&["q", "p"], &[]).unwrap();
    let chart = PoissonChart::darboux(&ctx).unwrap();
    let sp = flat(&chart, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut battery = pairs(&mut rng, &ctx, 4, 3);
    battery.push((p(&ctx, "q"), p(&ctx, "p")));
    battery.push((p(&ctx, "q^2"), p(&ctx, "p^2")));
    let maps = [
        PolyMap::identity(&chart),
        PolyMap::new(&chart, &chart, vec![p(&ctx, "q"), p(&ctx, "p + q")]).unwrap(),
        PolyMap::affine(&chart, &chart, &mat(&[&[0, -1], &[1, 0]]), &[g(0), g(0)]).unwrap(),
        PolyMap::new(&chart, &chart, vec![p(&ctx, "q + 1"), p(&ctx, "p")]).unwrap(),
        // generators of SL(2, Z) and their inverses
        PolyMap::affine(&chart, &chart, &mat(&[&[1, 1], &[0, 1]]), &[g(0), g(0)]).unwrap(),
        PolyMap::affine(&chart, &chart, &mat(&[&[1, -1], &[0, 1]]), &[g(0), g(0)]).unwrap(),
        PolyMap::affine(&chart, &chart, &mat(&[&[0, 1], &[-1, 0]]), &[g(0), g(0)]).unwrap(),
        PolyMap::affine(&chart, &chart, &mat(&[&[-1, 0], &[0, -1]]), &[g(2), g(-3)]).unwrap(),
    ];
    for map in &maps {
        let r = pullback_morphism_check(map, &sp, &sp, None, &battery, 2).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.checks.len(), battery.len() + 1);
    }

    let scale = PolyMap::new(&chart, &chart, vec![p(&ctx, "2*q"), p(&ctx, "p")]).unwrap();
    let e = pullback_morphism_check(&scale, &sp, &sp, None, &battery, 2).unwrap_err();
    match e {
        Error::Precondition(m) => assert!(m.contains("(J^T omega J - omega)[1,2] = -1"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn pullback_between_charts_and_subsets() {
    let big = VarContext::base(&["q", "p"], &["s", "t"]).unwrap();
    let small = VarContext::base(&["q", "p"], &[]).unwrap();
    let (cm, cn) = (PoissonChart::darboux(&big).unwrap(), PoissonChart::darboux(&small).unwrap());
    let (sm, sn) = (flat(&cm, 4), flat(&cn, 4));
    let proj = PolyMap::new(&cm, &cn, vec![p(&big, "q + s^2"), p(&big, "p")]).unwrap();
    let y = WhitneySubset::new(&big, vec![p(&big, "q + s^2")], 1, 12).unwrap();
    let x = WhitneySubset::new(&small, vec![p(&small, "q")], 1, 12).unwrap();
    let battery = vec![(p(&small, "q*p"), p(&small, "p^2")), (p(&small, "q^2 + p"), p(&small, "q*p^2"))];
    let r = pullback_morphism_check(&proj, &sm, &sn, Some((&y, &x)), &battery, 2).unwrap();
    assert!(r.passed(), "{r}");

    let bad = WhitneySubset::new(&big, vec![p(&big, "q")], 1, 12).unwrap();
    let r = pullback_morphism_check(&proj, &sm, &sn, Some((&bad, &x)), &battery, 1).unwrap();
    assert!(!r.passed());
    assert_eq!(r.failures().next().unwrap().name, "Phi maps Y into X");

    // leaves must go to leaves
    assert!(PolyMap::new(&cm, &cm, vec![p(&big, "q"), p(&big, "p"), p(&big, "s + q"), p(&big, "t")]).is_err());
}

#[test]
fn pullback_requires_compatible_connections() {
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    let chart = PoissonChart::from_omega(&ctx, vec![vec![Poly::zero(&ctx), p(&ctx, "-1")], vec![p(&ctx, "1"), Poly::zero(&ctx)]], 6)
        .unwrap();
    let eta = LeafMetric::new(vec![vec![p(&ctx, "1 + x1^2"), Poly::zero(&ctx)], vec![Poly::zero(&ctx), p(&ctx, "1")]]).unwrap();
    let conn = poisson_connection(&eta, &chart, ConnectionMode::Symmetric).unwrap();
    let curved = StarProduct::new(Arc::new(build_fedosov(&chart, &conn, 4, None).unwrap()));
    let plain = flat(&chart, 4);
    let id = PolyMap::identity(&chart);
    let battery = vec![(p(&ctx, "x1"), p(&ctx, "x2^2"))];
    assert!(pullback_morphism_check(&id, &curved, &curved, None, &battery, 2).unwrap().passed());
    match pullback_morphism_check(&id, &plain, &curved, None, &battery, 2) {
        Err(Error::Precondition(m)) => assert!(m.starts_with("connections are not related by pullback"), "{m}"),
        other => panic!("{other:?}"),
    }
}

fn rotations() -> Vec<Matrix<Gaussian>> {
    let r = mat(&[&[0, -1], &[1, 0]]);
    let mut out = vec![Matrix::identity(2)];
    for _ in 0..3 {
        let next = out.last().unwrap().mul(&r);
        out.push(next);
    }
    out
}

#[test]
fn finite_rotation_invariance() {
    let ctx = VarContext::base(&["q", "p"], &[]).unwrap();
    let chart = PoissonChart::darboux(&ctx).unwrap();
    let sp = flat(&chart, 4);
    let group = GroupAction::finite(rotations(), None).unwrap();
    // Reynolds averages are invariant
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let avg = |f: &Poly| {
        let mut acc = Poly::zero(&ctx);
        for a in rotations() {
            acc.add_assign_ref(&PolyMap::affine(&chart, &chart, &a, &[g(0), g(0)]).unwrap().pullback(f).unwrap());
        }
        acc
    };
    let battery: Vec<(Poly, Poly)> = pairs(&mut rng, &ctx, 10, 4).iter().map(|(f, h)| (avg(f), avg(h))).collect();
    let r = invariance_check(&group, &sp, None, &battery, 2).unwrap();
    assert!(r.passed(), "{r}");
    let origin = WhitneySubset::new(&ctx, vec![p(&ctx, "q"), p(&ctx, "p")], 3, 12).unwrap();
    let r = invariance_check(&group, &sp, Some(&origin), &battery[..3], 2).unwrap();
    assert!(r.passed(), "{r}");

    let broken = GroupAction::finite(vec![Matrix::identity(2), mat(&[&[0, -1], &[1, 0]])], None).unwrap();
    let rep = broken.validate(&sp, None).unwrap();
    assert!(!rep.passed());
    assert!(matches!(invariance_check(&broken, &sp, None, &battery, 1), Err(Error::Precondition(_))));
    // the rotation does not preserve the 1 + x1^2 metric connection
    let eta = LeafMetric::new(vec![vec![p(&ctx, "1 + q^2"), Poly::zero(&ctx)], vec![Poly::zero(&ctx), p(&ctx, "1")]]).unwrap();
    let chart6 = PoissonChart::darboux(&ctx).unwrap();
    let chart6 = PoissonChart::new(&ctx, chart6.pi().iter().map(|r| r.iter().map(|s| s.poly().clone()).collect()).collect(),
        chart6.omega().iter().map(|r| r.iter().map(|s| s.poly().clone()).collect()).collect(), 6).unwrap();
    let conn = poisson_connection(&eta, &chart6, ConnectionMode::Symmetric).unwrap();
    let curved = StarProduct::new(Arc::new(build_fedosov(&chart6, &conn, 4, None).unwrap()));
    match invariance_check(&group, &curved, None, &battery, 1) {
        Err(Error::Precondition(m)) => assert!(m.contains("A1 preserves the connection"), "{m}"),
        other => panic!("{other:?}"),
    }
}

fn reduction_charts() -> (Ctx, Ctx, PoissonChart<Gaussian>, PoissonChart<Gaussian>) {
    let m = VarContext::base(&["q", "p"], &["s", "t"]).unwrap();
    let n = VarContext::base(&["q", "p"], &["u"]).unwrap();
    let (cm, cn) = (PoissonChart::darboux(&m).unwrap(), PoissonChart::darboux(&n).unwrap());
    (m, n, cm, cn)
}

fn transverse_rotation() -> Matrix<Gaussian> {
    // X = s d/dt - t d/ds
    let mut a = Matrix::zeros(4, 4);
    a.set(3, 2, g(1));
    a.set(2, 3, g(-1));
    a
}

#[test]
fn infinitesimal_transverse_rotation() {
    let (m, n, cm, cn) = reduction_charts();
    let sp = flat(&cm, 4);
    let x = GroupAction::infinitesimal(transverse_rotation()).unwrap();
    let cone = WhitneySubset::new(&m, vec![p(&m, "s^2 + t^2")], 1, 14).unwrap();
    let pi = PolyMap::new(&cm, &cn, vec![p(&m, "q"), p(&m, "p"), p(&m, "s^2 + t^2")]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let vars: Vec<usize> = (0..3).collect();
    let battery: Vec<(Poly, Poly)> = (0..10)
        .map(|_| {
            let f = random_poly(&mut rng, &n, &vars, 3);
            let h = random_poly(&mut rng, &n, &vars, 3);
            (pi.pullback(&f).unwrap(), pi.pullback(&h).unwrap())
        })
        .collect();
    let r = invariance_check(&x, &sp, Some(&cone), &battery, 2).unwrap();
    assert!(r.passed(), "{r}");
    let notes: Vec<_> = r.checks.iter().filter_map(|c| c.note.as_deref()).collect();
    assert!(notes.contains(&"hypothesis: nabla is G-invariant"));
    // not invariant operands: the identity still holds for a leafwise-trivial action
    let r = invariance_check(&x, &sp, None, &[(p(&m, "q*s"), p(&m, "p*t^2"))], 2).unwrap();
    assert!(r.passed(), "{r}");

    let mut scale = Matrix::zeros(4, 4);
    scale.set(0, 0, g(1));
    let bad = GroupAction::infinitesimal(scale).unwrap();
    match invariance_check(&bad, &sp, None, &battery, 1) {
        Err(Error::Precondition(m)) => assert!(m.contains("L_X Pi = 0") && m.contains("L_X omega = 0"), "{m}"),
        other => panic!("{other:?}"),
    }
    let mut mix = Matrix::zeros(4, 4);
    mix.set(2, 0, g(1));
    let bad = GroupAction::infinitesimal(mix).unwrap();
    assert!(!bad.validate(&sp, None).unwrap().passed());
}

fn reduction_setup(order: u32) -> (ReductionSetup<Gaussian>, StarProduct<Gaussian>, StarProduct<Gaussian>) {
    let (m, n, cm, cn) = reduction_charts();
    let pi = PolyMap::new(&cm, &cn, vec![p(&m, "q"), p(&m, "p"), p(&m, "s^2 + t^2")]).unwrap();
    let x = Arc::new(WhitneySubset::new(&m, vec![p(&m, "s^2 + t^2")], order, 14).unwrap());
    let y = Arc::new(WhitneySubset::new(&n, vec![p(&n, "u")], order, 14).unwrap());
    let setup = ReductionSetup::new(pi, x, y, Some(transverse_rotation())).unwrap();
    (setup, flat(&cm, 4), flat(&cn, 4))
}

#[test]
fn projection_examples() {
    let (setup, _, _) = reduction_setup(1);
    let n = setup.downstairs().ctx().clone();
    let sample = vec![p(&n, "u"), p(&n, "u^2"), p(&n, "1"), p(&n, "q*u + p"), p(&n, "q^2*u^3")];
    let r = projection_check(&setup, &sample).unwrap();
    assert!(r.passed(), "{r}");
    let inj = r.checks.iter().find(|c| c.name == "pi* is injective on the sample").unwrap();
    assert!(inj.note.as_deref().unwrap().contains("pi*(u) = s^2 + t^2"), "{:?}", inj.note);
    assert!(setup.validate().unwrap().passed());

    // a projection that is not Poisson
    let (m, _, cm, cn) = reduction_charts();
    let bad = PolyMap::new(&cm, &cn, vec![p(&m, "2*q"), p(&m, "p"), p(&m, "s^2 + t^2")]).unwrap();
    let x = Arc::new(WhitneySubset::new(&m, vec![p(&m, "s^2 + t^2")], 1, 14).unwrap());
    let y = Arc::new(WhitneySubset::new(&n, vec![p(&n, "u")], 1, 14).unwrap());
    let e = ReductionSetup::new(bad, x.clone(), y.clone(), None).unwrap_err();
    assert!(matches!(e, Error::Precondition(ref m) if m.contains("{Phi^1, Phi^2}")), "{e:?}");
    // not invariant under the rotation
    let skew = PolyMap::new(&cm, &cn, vec![p(&m, "q"), p(&m, "p"), p(&m, "s^2 + t^2 + s")]).unwrap();
    assert!(ReductionSetup::new(skew, x, y, Some(transverse_rotation())).is_err());
}

#[test]
fn reduction_commutes_with_quantization() {
    let (setup, sm, sn) = reduction_setup(1);
    let n = setup.downstairs().ctx().clone();
    let battery: Vec<(Poly, Poly)> = [("q", "p"), ("q*u", "p"), ("u", "u"), ("q^2", "p*u"), ("1", "q"), ("p^2*u", "q^3 + u^2")]
        .iter()
        .map(|(a, b)| (p(&n, a), p(&n, b)))
        .collect();
    let r = reduction_compare(&setup, &sm, &sn, &battery, 2).unwrap();
    assert!(r.passed(), "{r}");
    assert_eq!(r.checks[0].note.as_deref(), Some("N side [q*p, -1/2*i, 0], M side [q*p, -1/2*i, 0]"));
    // u is central: no hbar corrections; at order 1 u^2 is already in the ideal
    assert_eq!(r.checks[2].note.as_deref(), Some("N side [0, 0, 0], M side [0, 0, 0]"));
    let (setup, sm, sn) = reduction_setup(2);
    let r = reduction_compare(&setup, &sm, &sn, &battery[2..3], 2).unwrap();
    assert_eq!(
        r.checks[0].note.as_deref(),
        Some("N side [s^4 + 2*s^2*t^2 + t^4, 0, 0], M side [s^4 + 2*s^2*t^2 + t^4, 0, 0]")
    );

    // a downstairs product with the wrong normalisation is caught
    let (setup, sm, _) = reduction_setup(1);
    let half = MoyalStar::new(&n, vec![vec![g(0), g(2)], vec![g(-2), g(0)]]).unwrap();
    let r = reduction_compare(&setup, &sm, &half, &battery[..1], 1).unwrap();
    assert!(!r.passed());
}

fn laplacian(ctx: &Ctx) -> DiffOp<Gaussian> {
    DiffOp::from_terms(
        ctx,
        [(Monomial::from_exponents(vec![2, 0]), Poly::one(ctx)), (Monomial::from_exponents(vec![0, 2]), Poly::one(ctx))],
    )
    .unwrap()
}

#[test]
fn equivalence_examples() {
    let ctx = VarContext::base(&["q", "p"], &[]).unwrap();
    let chart = PoissonChart::darboux(&ctx).unwrap();
    let moyal: Arc<dyn StarOracle<Gaussian>> = Arc::new(MoyalStar::from_chart(&chart).unwrap());
    let ansatz = EquivalenceAnsatz::new(2);

    let same = equivalence_solve(&*moyal, &*moyal, 2, &ansatz).unwrap();
    assert!(same.operators.iter().all(|d| d.is_zero()));

    let delta = laplacian(&ctx);
    assert_eq!(delta.to_string(), "D[p^2] + D[q^2]");
    let gauged = GaugedStar::new(moyal.clone(), vec![delta.clone()]).unwrap();
    assert!(associativity_residuals(&gauged, &p(&ctx, "q^2"), &p(&ctx, "p*q"), &p(&ctx, "p^3"), 2).unwrap().is_empty());
    let eq = equivalence_solve(&gauged, &*moyal, 2, &ansatz).unwrap();
    assert_eq!(eq.operators[0], delta);
    assert!(eq.orders.iter().all(|o| o.rank > 0));
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let held_out = pairs(&mut rng, &ctx, 5, 5);
    let r = equivalence_validate(&gauged, &*moyal, &eq.operators, &held_out, 2, None).unwrap();
    assert!(r.passed(), "{r}");
    // the found operators are not interchangeable with nothing
    let r = equivalence_validate(&gauged, &*moyal, &[], &held_out, 2, None).unwrap();
    assert!(!r.passed());

    let doubled = MoyalStar::new(&ctx, vec![vec![g(0), g(2)], vec![g(-2), g(0)]]).unwrap();
    match equivalence_solve(&*moyal, &doubled, 1, &ansatz) {
        Err(Error::Obstruction { order: 1, message }) => {
            assert!(message.starts_with("the first-order commutator difference"), "{message}")
        }
        other => panic!("{other:?}"),
    }
    // an ansatz that is too small for the implanted gauge
    let tiny = EquivalenceAnsatz { derivative_order: Some(1), ..EquivalenceAnsatz::new(2) };
    match equivalence_solve(&gauged, &*moyal, 1, &tiny) {
        Err(Error::Obstruction { order: 1, message }) => assert!(message.contains("raise the ansatz bounds"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn equivalence_of_two_metrics() {
    let ctx = VarContext::base(&["x1", "x2"], &[]).unwrap();
    let omega = vec![vec![Poly::zero(&ctx), p(&ctx, "-1")], vec![p(&ctx, "1"), Poly::zero(&ctx)]];
    let chart = PoissonChart::from_omega(&ctx, omega, 6).unwrap();
    let sp_a = flat(&chart, 4);
    let eta = LeafMetric::new(vec![vec![p(&ctx, "1 + x1^2"), Poly::zero(&ctx)], vec![Poly::zero(&ctx), p(&ctx, "1")]]).unwrap();
    let conn = poisson_connection(&eta, &chart, ConnectionMode::Symmetric).unwrap();
    let sp_b = StarProduct::new(Arc::new(build_fedosov(&chart, &conn, 4, None).unwrap()));
    let ansatz = EquivalenceAnsatz { jet_order: Some(4), ..EquivalenceAnsatz::new(4) };
    let eq = equivalence_solve(&sp_a, &sp_b, 2, &ansatz).unwrap();
    assert!(!eq.operators[1].is_zero());
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let held_out = pairs(&mut rng, &ctx, 4, 4);
    let r = equivalence_validate(&sp_a, &sp_b, &eq.operators, &held_out, 2, Some(4)).unwrap();
    assert!(r.passed(), "{r}");
    let r = equivalence_validate(&sp_a, &sp_b, &[], &held_out, 2, Some(4)).unwrap();
    assert!(!r.passed());
}
