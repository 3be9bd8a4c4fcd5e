//! Acceptance suite: one test per criterion, each printing a pass line
//! with its measured figure. Tolerances are relative residuals.
//!
//! Criterion 6's triple-integral case is `#[ignore]`d as slow-suite; run
//! it with `cargo test --test acceptance -- --ignored`.

use std::time::Instant;

use ehyp::catalog::{instantiate, verify, Instance, ParamSource, VerifyPolicy, VerifyVerdict};
use ehyp::efun::{egamma, egamma_variant, Base, GammaVariant, TruncationPolicy};
use ehyp::fubini::{check_admissibility, graph_from_spec, DEFAULT_PATH_CAP};
use ehyp::ispec::{build_density, contour_report};
use ehyp::quad::QuadPolicy;
use ehyp::sampler::SplitMix64;
use ehyp::Complex64;

fn base(p: f64, q: f64) -> Base {
    Base::real(p, q).unwrap()
}

fn inst(name: &str, n: i64, m: i64, b: &Base, seed: u64, sign: i8) -> Instance {
    instantiate(name, n, m, b, ParamSource::Seed(seed), sign)
        .unwrap_or_else(|e| panic!("instantiate {name} n={n} m={m} seed={seed}: {e}"))
}

fn check(
    name: &str,
    n: i64,
    m: i64,
    b: &Base,
    seed: u64,
    sign: i8,
    tol: f64,
    policy: &VerifyPolicy,
) -> f64 {
    let instance = inst(name, n, m, b, seed, sign);
    let report = verify(&instance, policy).unwrap_or_else(|e| panic!("verify {name}: {e}"));
    assert_eq!(
        report.verdict,
        VerifyVerdict::Pass,
        "{name} n={n} m={m} seed={seed} sign={sign}: verdict {:?}, rel_err {:.3e} (tol {tol:.1e})",
        report.verdict,
        report.rel_err
    );
    assert!(
        report.rel_err <= tol,
        "{name} n={n}: rel_err {:.3e} > {tol:.1e}",
        report.rel_err
    );
    report.rel_err
}

#[test]
fn c01_gamma_algebra() {
    let started = Instant::now();
    let pol = TruncationPolicy::default();
    let b = base(0.28, 0.21);
    let mut rng = SplitMix64::new(0x01);
    let mut worst = 0.0f64;
    let one = Complex64::new(1.0, 0.0);
    let mut random_x = |rng: &mut SplitMix64| {
        let r = 0.1 + 0.8 * rng.next_f64();
        Complex64::from_polar(r, 2.0 * std::f64::consts::PI * rng.next_f64())
    };
    for _ in 0..200 {
        // reflection
        let x = random_x(&mut rng);
        let v = egamma(x, &b, &pol).unwrap() * egamma(b.pq() / x, &b, &pol).unwrap();
        worst = worst.max((v - one).norm());
        // Gamma(x) = Gamma_{p,q^2}(x) Gamma_{p,q^2}(q x)
        let x = random_x(&mut rng);
        let lhs = egamma(x, &b, &pol).unwrap();
        let rhs = egamma_variant(x, &b, GammaVariant::Pq2, &pol).unwrap()
            * egamma_variant(b.q * x, &b, GammaVariant::Pq2, &pol).unwrap();
        worst = worst.max((lhs / rhs - one).norm());
        // hat Gamma(x) = Gamma(x, sqrt(q) x, sqrt(p) x, sqrt(pq) x)
        let x = random_x(&mut rng);
        let lhs = egamma_variant(x, &b, GammaVariant::Half, &pol).unwrap();
        let (sp, sq) = (b.p.sqrt(), b.q.sqrt());
        let rhs = egamma(x, &b, &pol).unwrap()
            * egamma(sq * x, &b, &pol).unwrap()
            * egamma(sp * x, &b, &pol).unwrap()
            * egamma(sp * sq * x, &b, &pol).unwrap();
        worst = worst.max((lhs / rhs - one).norm());
        // Gamma(x) = hat Gamma(sqrt x) hat Gamma(-sqrt x)
        let x = random_x(&mut rng);
        let r = x.sqrt();
        let lhs = egamma(x, &b, &pol).unwrap();
        let rhs = egamma_variant(r, &b, GammaVariant::Half, &pol).unwrap()
            * egamma_variant(-r, &b, GammaVariant::Half, &pol).unwrap();
        worst = worst.max((lhs / rhs - one).norm());
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(worst <= 1e-11, "worst gamma-relation residual {worst:.3e}");
    assert!(elapsed < 5.0, "took {elapsed:.2}s (budget 5s)");
    println!("criterion 01 PASS: gamma algebra, worst residual {worst:.3e} in {elapsed:.2}s");
}

#[test]
fn c02_elliptic_beta() {
    let started = Instant::now();
    let b = base(0.2, 0.25);
    let instance = inst("elliptic_beta", 1, 0, &b, 1, 1);
    let report = verify(&instance, &VerifyPolicy::default()).unwrap();
    assert_eq!(report.verdict, VerifyVerdict::Pass);
    assert!(report.rel_err <= 1e-10, "rel_err {:.3e}", report.rel_err);
    let max_grid = report.lhs.grids.iter().copied().max().unwrap_or(0);
    assert!(max_grid <= 256, "needed N = {max_grid} > 256");
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.2}s (budget 1s)");
    println!(
        "criterion 02 PASS: elliptic beta rel_err {:.3e} at N <= {max_grid} in {elapsed:.2}s",
        report.rel_err
    );
}

#[test]
fn c03_dixon() {
    let started = Instant::now();
    let b = base(0.2, 0.25);
    let pol = VerifyPolicy::default();
    let r1 = check("dixon_eval", 1, 0, &b, 1, 1, 1e-8, &pol);
    let r2 = check("dixon_transform", 1, 1, &b, 1, 1, 1e-8, &pol);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "took {elapsed:.2}s (budget 10s)");
    println!(
        "criterion 03 PASS: dixon_eval {r1:.3e}, dixon_transform {r2:.3e} in {elapsed:.2}s"
    );
}

#[test]
fn c04_selberg_and_dim_change() {
    let started = Instant::now();
    let b = base(0.2, 0.25);
    let pol = VerifyPolicy::default();
    let rp = check("selberg_e7", 1, 0, &b, 1, 1, 1e-8, &pol);
    let rm = check("selberg_e7", 1, 0, &b, 1, -1, 1e-8, &pol);
    let rd = check("dim_change", 1, 1, &b, 1, 1, 1e-8, &pol);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "took {elapsed:.2}s (budget 10s)");
    println!(
        "criterion 04 PASS: selberg_e7 s=+ {rp:.3e}, s=- {rm:.3e}, dim_change {rd:.3e} in {elapsed:.2}s"
    );
}

#[test]
fn c05_induction_enabler() {
    let started = Instant::now();
    let b = base(0.2, 0.25);
    let r1 = check(
        "induction_enabler",
        1,
        0,
        &b,
        1,
        1,
        1e-8,
        &VerifyPolicy::default(),
    );
    // n = 2 capped at the stated 128^2 grid.
    let capped = VerifyPolicy {
        n_max: Some(128),
        ..Default::default()
    };
    let r2 = check("induction_enabler", 2, 0, &b, 1, 1, 1e-6, &capped);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "took {elapsed:.2}s (budget 5min)");
    println!("criterion 05 PASS: n=1 {r1:.3e}, n=2 at 128^2 {r2:.3e} in {elapsed:.2}s");
}

#[test]
fn c06_almost_selberg() {
    let started = Instant::now();
    let b = base(0.2, 0.25);
    let instance = inst("almost_selberg", 1, 0, &b, 1, 1);
    let report = verify(&instance, &VerifyPolicy::default()).unwrap();
    assert_eq!(report.verdict, VerifyVerdict::Pass);
    assert_eq!(report.forms.len(), 2, "both equalities are checked");
    for form in &report.forms {
        assert!(
            form.rel_err <= 1e-6,
            "form {} rel_err {:.3e}",
            form.label,
            form.rel_err
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "took {elapsed:.2}s (budget 2min)");
    println!(
        "criterion 06 PASS: almost_selberg double {:.3e}, symmetric {:.3e} in {elapsed:.2}s",
        report.forms[0].rel_err, report.forms[1].rel_err
    );
}

/// Slow-suite: the triple-integral side at the stated 64^3 grid.
#[test]
#[ignore = "slow-suite: triple integral at 64^3"]
fn c06_slow_as_extended() {
    let started = Instant::now();
    let b = base(0.2, 0.25);
    let capped = VerifyPolicy {
        n_max: Some(64),
        rtol: Some(1e-2),
        ..Default::default()
    };
    let instance = inst("as_extended", 2, 0, &b, 1, 1);
    let report = verify(&instance, &capped).unwrap();
    assert_eq!(report.verdict, VerifyVerdict::Pass);
    assert!(report.rel_err <= 1e-4, "rel_err {:.3e}", report.rel_err);
    let max_grid = report.forms[0].integral.grids.iter().copied().max().unwrap();
    assert!(max_grid <= 64);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 1800.0, "took {elapsed:.2}s (budget 30min)");
    println!(
        "criterion 06 (slow) PASS: as_extended at 64^3 rel_err {:.3e} in {elapsed:.2}s",
        report.rel_err
    );
}

#[test]
fn c07_quadratic_transformations() {
    let started = Instant::now();
    let bq = base(0.1, 0.25);
    let bh = base(0.2, 0.2);
    let pol = VerifyPolicy::default();
    let q1 = check("quad_q2", 1, 0, &bq, 1, 1, 1e-8, &pol);
    let q2 = check("quad_q2", 2, 0, &bq, 1, 1, 1e-6, &pol);
    let h1 = check("quad_half", 1, 0, &bh, 1, 1, 1e-8, &pol);
    let h2 = check("quad_half", 2, 0, &bh, 1, 1, 1e-6, &pol);
    let c1 = check("corollary_q1", 1, 0, &bh, 1, 1, 1e-8, &pol);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "took {elapsed:.2}s (budget 10min)");
    println!(
        "criterion 07 PASS: quad_q2 {q1:.3e}/{q2:.3e}, quad_half {h1:.3e}/{h2:.3e}, corollary {c1:.3e} in {elapsed:.2}s"
    );
}

#[test]
fn c08_fubini_failure_reproduction() {
    let started = Instant::now();
    let b = base(0.13, 0.16);
    let instance = inst("fubini_fail_pair", 1, 0, &b, 1, 1);
    // (a) the graph checker flags the instance with the unit product.
    let graph = graph_from_spec(&instance.entry.lhs, &instance.entry.relations).unwrap();
    let verdict = check_admissibility(&graph, DEFAULT_PATH_CAP).unwrap();
    assert!(!verdict.admissible, "graph judged admissible");
    let unit = verdict
        .offending
        .iter()
        .find(|p| p.product.is_one())
        .expect("offending product reducing to 1");
    let mut labels: Vec<String> = unit.witness.labels.iter().map(|l| l.to_string()).collect();
    labels.sort();
    assert_eq!(labels, vec!["t", "t", "v1", "v2"]);
    // (b) numerically, the two iterated orders disagree: y-first is zero
    // against the intermediate scale, z-first matches the closed form.
    let report = verify(&instance, &VerifyPolicy::default()).unwrap();
    assert_eq!(report.verdict, VerifyVerdict::Pass);
    let detail = report.detail.as_ref().unwrap();
    let y_rel = detail["y_first_rel"].as_f64().unwrap();
    let cf_rel = detail["closed_form_rel"].as_f64().unwrap();
    assert!(y_rel <= 1e-6, "y-first order |value|/scale = {y_rel:.3e}");
    assert!(cf_rel <= 1e-6, "z-first vs closed form = {cf_rel:.3e}");
    assert!(detail["orders_disagree"].as_bool().unwrap());
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "took {elapsed:.2}s (budget 5min)");
    println!(
        "criterion 08 PASS: witness v1*t*t*v2 -> 1; y-first {y_rel:.3e} of scale, z-first matches closed form to {cf_rel:.3e} in {elapsed:.2}s"
    );
}

#[test]
fn c09_vanishing_identity() {
    let started = Instant::now();
    let b = base(0.2, 0.22);
    let instance = inst("vanishing_4param", 1, 0, &b, 1, 1);
    let report = verify(&instance, &VerifyPolicy::default()).unwrap();
    assert_eq!(report.verdict, VerifyVerdict::Pass);
    assert!(
        report.rel_err <= 1e-8,
        "|integral| = {:.3e} x scale",
        report.rel_err
    );
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.2}s (budget 30s)");
    println!(
        "criterion 09 PASS: deformed integral {:.3e} x largest intermediate term in {elapsed:.2}s",
        report.rel_err
    );
}

#[test]
fn c10_quadrature_properties() {
    let started = Instant::now();
    // (a) geometric refinement decay on every univariate catalog
    // integrand, until the rounding floor.
    let mut checked = 0usize;
    for meta in ehyp::catalog::list_identities() {
        let data = ehyp::catalog::entry(&meta.name).unwrap();
        let (n, m) = meta.supported[0];
        let resolved = data.resolve(n, m).unwrap();
        let b = if resolved.base.real_required {
            base(0.2, 0.25)
        } else if meta.name == "fubini_fail_pair" {
            base(0.13, 0.16)
        } else {
            base(0.2, 0.25)
        };
        let instance = inst(&meta.name, n, m, &b, 1, 1);
        for spec in std::iter::once(&instance.entry.lhs)
            .chain(instance.entry.forms.iter().map(|f| &f.integral))
        {
            let collapsed = spec.collapse();
            if collapsed.total_dim() != 1 {
                continue;
            }
            let density = build_density(
                &collapsed,
                &instance.assignment,
                &instance.base,
                &TruncationPolicy::default(),
            )
            .unwrap();
            let policy = QuadPolicy {
                n0: 8,
                n_max: 1024,
                rtol: 1e-16,
            };
            let run = density.integrate(&policy).unwrap();
            // Decay is geometric once the grid resolves the integrand;
            // below that the deltas are order-one noise. Demand the 10x
            // factor from the first resolved refinement down to the
            // rounding floor.
            let resolved = run.deltas.iter().position(|d| *d <= 1e-2);
            let resolved = resolved
                .unwrap_or_else(|| panic!("{}: never resolved: {:?}", meta.name, run.deltas));
            let mut floor_hit = false;
            for pair in run.deltas[resolved..].windows(2) {
                if pair[0] <= 1e-13 || pair[1] <= 1e-13 {
                    floor_hit = true;
                    continue;
                }
                assert!(
                    pair[1] <= pair[0] / 10.0,
                    "{}: refinement deltas {:?} decay slower than 10x",
                    meta.name,
                    run.deltas
                );
            }
            let _ = floor_hit;
            checked += 1;
        }
    }
    assert!(checked >= 10, "only {checked} univariate integrands swept");
    // (b) bit-identical reports across repeated runs and thread counts.
    let b = base(0.2, 0.25);
    let run = || {
        let instance = inst("selberg_e7", 1, 0, &b, 7, 1);
        verify(&instance, &VerifyPolicy::default()).unwrap().stable_json()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "repeated runs differ");
    for threads in [1usize, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let other = pool.install(run);
        assert_eq!(first, other, "thread count {threads} changed the report");
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 10 PASS: geometric decay on {checked} univariate integrands; reports bit-stable across runs and 1/2/4 threads in {elapsed:.2}s"
    );
}

#[test]
fn c11_no_false_alarm_sweep() {
    let started = Instant::now();
    let mut swept = 0usize;
    for meta in ehyp::catalog::list_identities() {
        let data = ehyp::catalog::entry(&meta.name).unwrap();
        for &(n, m) in &meta.supported {
            let resolved = data.resolve(n, m).unwrap();
            let b = if resolved.base.real_required {
                base(0.2, 0.25)
            } else if meta.name == "fubini_fail_pair" {
                base(0.13, 0.16)
            } else {
                base(0.2, 0.25)
            };
            let instance = inst(&meta.name, n, m, &b, 1, 1);
            // Only unit-circle-admissible instances participate.
            let all_contours_ok = std::iter::once(&instance.entry.lhs)
                .chain(instance.entry.forms.iter().map(|f| &f.integral))
                .all(|spec| {
                    contour_report(spec, &instance.assignment)
                        .map(|r| r.ok())
                        .unwrap_or(false)
                });
            if !all_contours_ok {
                continue;
            }
            for spec in std::iter::once(&instance.entry.lhs)
                .chain(instance.entry.forms.iter().map(|f| &f.integral))
            {
                let graph = graph_from_spec(spec, &instance.entry.relations).unwrap();
                let verdict = check_admissibility(&graph, DEFAULT_PATH_CAP).unwrap();
                assert!(
                    verdict.admissible,
                    "{} n={n} m={m}: contour-admissible instance judged inadmissible: {:?}",
                    meta.name,
                    verdict
                        .offending
                        .iter()
                        .map(|p| p.product.to_string())
                        .collect::<Vec<_>>()
                );
                swept += 1;
            }
        }
    }
    assert!(swept >= 20, "only {swept} sides swept");
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "took {elapsed:.2}s (budget 1min)");
    println!(
        "criterion 11 PASS: {swept} contour-admissible sides all judged admissible in {elapsed:.2}s"
    );
}
