//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//! Everything is exact; a criterion passes only with zero residuals.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use fedwhit::coeff::{parse_poly, Ctx, Matrix, Monomial, Precision, Scalar, VarContext};
use fedwhit::equivariance::{pullback_morphism_check, PolyMap};
use fedwhit::fedosov::{build_fedosov, StarOracle, StarProduct};
use fedwhit::geometry::{
    presymplectic_dims, restriction_nondegenerate, symplectic_complement, LeafConnection, PoissonChart,
};
use fedwhit::{Gaussian, Poly};
use fedwhit_cli::output::TaskReport;
use fedwhit_cli::{run_config, Overrides, RunReport, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONFIGS: [&str; 9] = [
    "flat_validate",
    "moyal",
    "curved",
    "whitney_origin",
    "whitney_cone",
    "rotation",
    "reduction",
    "equiv_gauge",
    "equiv_metric",
];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, why: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why.into())
    }
}

fn config_text(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
    std::fs::read_to_string(path).unwrap()
}

fn run(name: &str) -> Result<RunReport, String> {
    let rep = run_config(&config_text(name), &Overrides::default(), None, None).map_err(|e| e.to_string())?;
    ensure(rep.status == Status::Pass && rep.exit_code == 0, format!("{name}: {}", rep.to_text()))?;
    Ok(rep)
}

fn only<'a>(rep: &'a RunReport, kind: &str) -> &'a TaskReport {
    rep.task(kind).next().unwrap_or_else(|| panic!("no {kind} task"))
}

fn count(t: &TaskReport, pred: impl Fn(&str) -> bool) -> usize {
    t.checks.iter().filter(|c| c.passed && pred(&c.name)).count()
}

fn emitted<'a>(t: &'a TaskReport, label: &str) -> Option<&'a str> {
    t.emitted.iter().find(|e| e.label == label).map(|e| e.value.as_str())
}

fn is_assoc(name: &str) -> bool {
    name.contains(") * ") && name.contains(" * (")
}

fn g(n: i64) -> Gaussian {
    Gaussian::from_i64(n)
}

fn falling(a: u32, m: u32) -> i64 {
    (0..m).map(|i| a as i64 - i as i64).product()
}

fn binom(n: u32, k: u32) -> i64 {
    falling(n, k) / falling(k, k)
}

/// `c_k(q^a p^b, q^c p^d)` of the Moyal product with `Π^{qp} = 1`, summed
/// directly from `(−i/2)^k/k! Σ_j C(k,j) (−1)^j ∂_q^{k−j}∂_p^j f · ∂_p^{k−j}∂_q^j g`.
fn moyal_by_hand(ctx: &Ctx, (a, b): (u32, u32), (c, d): (u32, u32), k: u32) -> Poly {
    let mut out = Poly::zero(ctx);
    for j in 0..=k {
        let (dq_f, dp_f, dp_g, dq_g) = (k - j, j, k - j, j);
        if dq_f > a || dp_f > b || dp_g > d || dq_g > c {
            continue;
        }
        let n = binom(k, j) * falling(a, dq_f) * falling(b, dp_f) * falling(d, dp_g) * falling(c, dq_g);
        let sign = if j % 2 == 0 { 1 } else { -1 };
        let mono = Monomial::from_exponents(vec![a - dq_f + c - dq_g, b - dp_f + d - dp_g]);
        out.add_assign_ref(&Poly::monomial(ctx, mono, g(sign * n)));
    }
    // (−i/2)^k / k!
    let mut pre = Gaussian::from_ratio(1, falling(k, k));
    for _ in 0..k {
        pre = pre.mul_ref(&Gaussian::i().mul_ref(&Gaussian::from_ratio(-1, 2)));
    }
    out.scale(&pre)
}

fn moyal_oracle() -> Outcome {
    let ctx = VarContext::base(&["q", "p"], &[]).unwrap();
    let chart = PoissonChart::darboux(&ctx).unwrap();
    let st = build_fedosov(&chart, &LeafConnection::flat(&ctx, 2), 6, None).map_err(|e| e.to_string())?;
    let sp = StarProduct::new(Arc::new(st));
    let monos: Vec<(u32, u32)> = (0..=4).flat_map(|s| (0..=s).map(move |a| (a, s - a))).collect();
    let mut n = 0;
    for &f in &monos {
        for &h in &monos {
            let fp = Poly::monomial(&ctx, Monomial::from_exponents(vec![f.0, f.1]), g(1));
            let hp = Poly::monomial(&ctx, Monomial::from_exponents(vec![h.0, h.1]), g(1));
            let c = sp.star(&fp, &hp, 3).map_err(|e| e.to_string())?;
            for (k, ck) in c.iter().enumerate() {
                let want = moyal_by_hand(&ctx, f, h, k as u32);
                ensure(ck.precision() == Precision::EXACT, format!("c{k}({fp}, {hp}) is not exact"))?;
                ensure(ck.poly() == &want, format!("c{k}({fp}, {hp}) = {} but by hand {want}", ck.poly()))?;
                n += 1;
            }
        }
    }
    Ok(format!("{} pairs q^a p^b (a + b <= 4), {n} coefficients c0..c3 at N = 6", monos.len().pow(2)))
}

fn d_squared() -> Outcome {
    let rep = run("curved")?;
    let t = only(&rep, "fedosov");
    ensure(t.truncation == Some(6), "fedosov truncation is not 6")?;
    let dd = count(t, |n| n.starts_with("D(D("));
    ensure(dd == 4, format!("{dd} D(D(a)) = 0 checks"))?;
    let g = &t.checks[0];
    ensure(g.passed && g.name.starts_with("delta r ="), "Fedosov equation check missing")?;
    Ok(format!("omega = 1 + x1*x2, N = 6: D(D(a)) = 0 for a in 1, y1, y2, y1*y2; r has {} terms", emitted(t, "r terms").unwrap()))
}

fn star_axioms() -> Outcome {
    let mut parts = vec![];
    for name in ["moyal", "curved"] {
        let rep = run(name)?;
        let (mut axioms, mut assoc) = (0, 0);
        for t in rep.task("star") {
            axioms += count(t, |n| n.ends_with("c0(f,g) = fg"));
            assoc += count(t, is_assoc);
        }
        ensure(axioms >= 25 && assoc >= 10, format!("{name}: {axioms} axiom pairs, {assoc} triples"))?;
        parts.push(format!("{name} {axioms} pairs / {assoc} triples"));
    }
    Ok(parts.join(", "))
}

fn whitney() -> Outcome {
    let mut parts = vec![];
    for (name, loss) in [("whitney_origin", "1"), ("whitney_cone", "0")] {
        let t = only(&run(name)?, "whitney-star").clone();
        let triples = count(&t, |n| n.contains("quantize(j) lies in the ideal"));
        let indep = count(&t, |n| n.contains("independent of representative"));
        ensure(triples >= 10 && indep == 3 * triples, format!("{name}: {triples} triples, {indep} coefficient checks"))?;
        ensure(emitted(&t, "order loss per derivative") == Some(loss), format!("{name}: unexpected order loss"))?;
        parts.push(format!("{name} {triples} triples (loss {loss})"));
    }
    Ok(parts.join(", "))
}

fn random_poly(rng: &mut ChaCha8Rng, ctx: &Ctx, deg: u32) -> Poly {
    let mut out = Poly::zero(ctx);
    while out.is_zero() {
        for _ in 0..rng.gen_range(1..=3) {
            let a = rng.gen_range(0..=deg);
            let b = rng.gen_range(0..=deg - a);
            let c = Gaussian::from_ratio(rng.gen_range(-3..=3), rng.gen_range(1..=2));
            out.add_assign_ref(&Poly::monomial(ctx, Monomial::from_exponents(vec![a, b]), c));
        }
    }
    out
}

fn functoriality() -> Outcome {
    let ctx = VarContext::base(&["q", "p"], &[]).unwrap();
    let chart = PoissonChart::darboux(&ctx).unwrap();
    let st = build_fedosov(&chart, &LeafConnection::flat(&ctx, 2), 4, None).map_err(|e| e.to_string())?;
    let sp = StarProduct::new(Arc::new(st));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let battery: Vec<(Poly, Poly)> = (0..8).map(|_| (random_poly(&mut rng, &ctx, 3), random_poly(&mut rng, &ctx, 3))).collect();
    let p = |s: &str| parse_poly(&ctx, s).unwrap();
    let rot = Matrix::from_rows(vec![vec![g(0), g(-1)], vec![g(1), g(0)]]);
    let maps = [
        ("identity", PolyMap::identity(&chart)),
        ("shear", PolyMap::new(&chart, &chart, vec![p("q"), p("p + q")]).unwrap()),
        ("rotation", PolyMap::affine(&chart, &chart, &rot, &[g(0), g(0)]).unwrap()),
        ("translation", PolyMap::new(&chart, &chart, vec![p("q + 1"), p("p - 2")]).unwrap()),
    ];
    for (name, map) in &maps {
        let r = pullback_morphism_check(map, &sp, &sp, None, &battery, 2).map_err(|e| e.to_string())?;
        ensure(r.passed() && r.checks.len() > battery.len(), format!("{name}: {r}"))?;
    }
    Ok(format!("identity, shear, rotation, translation on {} pairs, K = 2", battery.len()))
}

fn invariance() -> Outcome {
    let rot = run("rotation")?;
    let t = only(&rot, "invariance");
    let per: Vec<usize> = (0..4).map(|e| count(t, |n| n.starts_with(&format!("A{e}.(f * g)")))).collect();
    ensure(per.iter().all(|&n| n >= 10), format!("Z/4 pairs per element {per:?}"))?;
    let red = run("reduction")?;
    let t = only(&red, "invariance");
    let inf = count(t, |n| n.starts_with("X(c_k(f, g))"));
    ensure(inf >= 10, format!("{inf} infinitesimal pairs"))?;
    Ok(format!("Z/4: {} pairs x 4 elements; infinitesimal rotation: {inf} pairs", per[0]))
}

fn reduction() -> Outcome {
    let rep = run("reduction")?;
    let t = only(&rep, "reduce-check");
    let cmp = count(t, |n| n.starts_with("pi*(f *N g) = pi*f *M pi*g"));
    ensure(cmp == 5, format!("{cmp} reduction comparisons"))?;
    for need in ["pi is a Poisson map", "pi is G-invariant", "pi* is an algebra morphism on jets"] {
        ensure(count(t, |n| n == need) == 1, format!("missing check `{need}`"))?;
    }
    let qp = t.checks.iter().find(|c| c.name.ends_with("(f, g) = (q, p)") && c.name.starts_with("pi*(f *N"));
    let note = qp.and_then(|c| c.note.as_deref()).unwrap_or("");
    ensure(note.contains("N side [q*p, -1/2*i, 0], M side [q*p, -1/2*i, 0]"), format!("(q, p): {note}"))?;
    Ok(format!("R^4 -> R^3 by the rotation invariants: {} checks, {cmp} product comparisons", t.checks.len()))
}

fn equivalence() -> Outcome {
    let rep = run("equiv_gauge")?;
    let t = only(&rep, "equiv");
    ensure(emitted(t, "T1") == Some("D[p^2] + D[q^2]"), format!("gauge T1 = {:?}", emitted(t, "T1")))?;
    ensure(emitted(t, "T2") == Some("0"), "gauge T2 is not 0")?;
    let held = count(t, |n| n.starts_with("held out: "));
    ensure(held == 5, format!("{held} held-out gauge pairs"))?;
    let rep = run("equiv_metric")?;
    let t = only(&rep, "equiv");
    ensure(count(t, |n| n == "equivalence found through order 2") == 1, "metric: no equivalence")?;
    let held_m = count(t, |n| n.starts_with("held out: "));
    ensure(held_m == 4, format!("{held_m} held-out metric pairs"))?;
    Ok(format!("implanted gauge recovered ({held} held out); flat vs 1 + x1^2 metric equivalent through K = 2 ({held_m} held out)"))
}

fn random_q(rng: &mut ChaCha8Rng) -> Gaussian {
    Gaussian::from_ratio(rng.gen_range(-3..=3), rng.gen_range(1..=3))
}

fn random_antisym(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Matrix<Gaussian> {
    let mut m = Matrix::<Gaussian>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                let x = random_q(rng);
                m.set(j, i, x.neg_ref());
                m.set(i, j, x);
            }
        }
    }
    m
}

fn random_vectors(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<Gaussian>> {
    (0..k).map(|_| (0..n).map(|_| if rng.gen_bool(0.7) { random_q(rng) } else { g(0) }).collect()).collect()
}

fn presymplectic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut dependent = 0;
    for i in 0..200 {
        let n = rng.gen_range(1..=4);
        let omega = random_antisym(&mut rng, n, 0.6);
        let k = rng.gen_range(0..=n);
        let w = random_vectors(&mut rng, n, k);
        if Matrix::from_rows(w.clone()).rank() < k && k > 0 {
            ensure(presymplectic_dims(n, &omega, &w).is_err(), format!("instance {i}: dependent basis accepted"))?;
            dependent += 1;
            continue;
        }
        let (dw, dperp, dint) = presymplectic_dims(n, &omega, &w).map_err(|e| format!("instance {i}: {e}"))?;
        ensure(dw == k && dw + dperp == n + dint, format!("instance {i}: ({dw}, {dperp}, {dint}) in dim {n}"))?;
        ensure(symplectic_complement(&omega, &w).len() == dperp, format!("instance {i}: complement basis"))?;
    }
    let mut hits = 0;
    while hits < 50 {
        let n = 2 * rng.gen_range(1..=2);
        let omega = random_antisym(&mut rng, n, 0.8);
        let k = 2 * rng.gen_range(0..=n / 2);
        let w = random_vectors(&mut rng, n, k);
        if omega.rank() < n || (k > 0 && Matrix::from_rows(w.clone()).rank() < k) || !restriction_nondegenerate(&omega, &w) {
            continue;
        }
        let comp = symplectic_complement(&omega, &w);
        ensure(comp.len() == n - k, format!("dim W^omega = {} for dim W = {k} in dim {n}", comp.len()))?;
        ensure(restriction_nondegenerate(&omega, &comp), "omega degenerate on W^omega")?;
        let mut all = w.clone();
        all.extend(comp);
        ensure(all.is_empty() || Matrix::from_rows(all).rank() == n, "W + W^omega is not V")?;
        hits += 1;
    }
    Ok(format!("200 instances with dim V <= 4 ({dependent} dependent bases rejected); 50 nondegenerate splittings"))
}

fn determinism() -> Outcome {
    for name in CONFIGS {
        let a = run(name)?;
        let b = run(name)?;
        ensure(a.to_text() == b.to_text() && a.to_json() == b.to_json(), format!("{name}: reports differ"))?;
    }
    Ok(format!("{} configs, text and json", CONFIGS.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Fedosov star on the flat chart equals the Moyal expansion", moyal_oracle),
        ("D o D = 0 on a curved chart", d_squared),
        ("star axioms and associativity, flat and curved", star_axioms),
        ("Whitney quotient product at a point and on a cone", whitney),
        ("functoriality under symplectic pullbacks", functoriality),
        ("finite and infinitesimal invariance", invariance),
        ("reduction commutes with quantization", reduction),
        ("gauge recovery and metric equivalence", equivalence),
        ("presymplectic dimension identity and its corollary", presymplectic),
        ("cold runs are byte-identical", determinism),
    ];
    let mut failed = 0;
    for (i, (what, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {what}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {what}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
