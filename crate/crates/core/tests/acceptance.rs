//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero
//! exit status when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use emt_core::canon::{canonicalize, difference, equal, is_canonical};
use emt_core::corpus;
use emt_core::dsl::{expand_defs, parse};
use emt_core::hilbert::hilbert_emt;
use emt_core::hilbert::report::{discrepancy_report, eta_part};
use emt_core::variational::{noether_emt, noether_identity_residual, program_rules, rules_with_defaults};
use emt_core::verify::oracle::{max_jet_order, oracle_equal, OracleOptions};
use emt_core::verify::{check_property, CheckContext, Conservation, Mode, Property};
use emt_core::{Rational, Sym, TensorExpr};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|x| x.to_string())
}

fn canonical_noether(src: &str) -> Result<(TensorExpr, TensorExpr), String> {
    let p = e(parse(src))?;
    let reg = p.registry();
    let l = e(expand_defs(&p))?;
    let t = e(noether_emt(&l, &e(rules_with_defaults(&l, &[], &reg))?, &reg))?;
    Ok((l, t))
}

fn electrodynamics() -> Outcome {
    let bh = corpus::em_bessel_hagen();
    let reg = bh.registry();
    let want = e(corpus::em_emt())?;
    let n = e(noether_emt(&e(expand_defs(&bh))?, &e(program_rules(&bh))?, &reg))?;
    let h = e(hilbert_emt(&corpus::em()))?;
    ensure(e(equal(&n, &want, &reg))?, "Noether (Bessel-Hagen) differs from the reference")?;
    ensure(e(equal(&h, &want, &reg))?, "Hilbert differs from the reference")?;
    Ok("T_N == T_H == F^{ga n} F^rh_n - 1/4 eta F^2".into())
}

fn klein_gordon() -> Outcome {
    let p = corpus::kg();
    let reg = p.registry();
    let want = e(p.parse_expr("d[^ga] phi d[^rh] phi - 1/2 eta[^ga,^rh] d[a] phi d[^a] phi"))?;
    let (_, n) = canonical_noether(corpus::KG)?;
    let h = e(hilbert_emt(&p))?;
    ensure(e(equal(&n, &want, &reg))?, "Noether differs from the reference")?;
    ensure(e(equal(&h, &want, &reg))?, "Hilbert differs from the reference")?;
    ensure(e(oracle_equal(&n, &h, &reg, &OracleOptions::default()))?.is_equal(), "oracle disagrees")?;
    Ok("T_N == T_H == d^ga phi d^rh phi - 1/2 eta (d phi)^2, oracle agrees".into())
}

fn gauss_bonnet_point(t: &TensorExpr) -> TensorExpr {
    let vals: BTreeMap<Sym, Rational> = [("A", (1, 4)), ("B", (-1, 1)), ("C", (1, 4))]
        .into_iter()
        .map(|(k, (n, d))| (Sym::from(k), Rational::new(n.into(), d.into())))
        .collect();
    t.substitute_params(&vals)
}

fn gauss_bonnet_inequality() -> Outcome {
    let p = corpus::gauss_bonnet();
    let reg = p.registry();
    let h = gauss_bonnet_point(&e(hilbert_emt(&p))?);
    let n = e(corpus::gb_emt())?;
    let d = e(difference(&h, &n, &reg))?;
    ensure(!d.is_zero(), "T_H - T_N canonicalizes to zero")?;
    let r = e(oracle_equal(&h, &n, &reg, &OracleOptions { trials: 20, ..OracleOptions::default() }))?;
    ensure(!r.is_equal(), "oracle found no difference")?;
    let w = r.witness.ok_or("no witness")?;
    Ok(format!("T_H - T_N has {} canonical terms; witness at trial {} has value {}", d.len(), w.trial, w.value))
}

fn intermediate_algebra() -> Outcome {
    let r = e(discrepancy_report(&OracleOptions::default()))?;
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("gb_discrepancy_report.json");
    e(std::fs::write(&path, e(serde_json::to_string_pretty(&r))?))?;
    ensure(r.leading_coefficients_exact, "curvature-square coefficients of the eta part differ")?;
    ensure(r.certified, "report is not oracle-certified")?;
    let groups = &r.conventions[0].groups;
    let exact = groups.iter().filter(|g| g.rows.iter().all(|x| x.matches)).count();
    Ok(format!(
        "leading coefficients exact; {exact}/{} groups match exactly; certified report at {}",
        groups.len(),
        path.display()
    ))
}

fn reference_properties() -> Outcome {
    let p = corpus::gauss_bonnet();
    let t = e(corpus::gb_emt())?;
    let mut c = CheckContext::new(p.registry());
    c.gauge_rule = e(p.gauge_rules())?.into_iter().next();
    for prop in [Property::Symmetric, Property::Traceless, Property::GaugeInvariant] {
        let r = e(check_property(&t, prop, &c))?;
        ensure(r.passed(), format!("{prop:?} fails"))?;
    }
    let sym = e(check_property(&t, Property::Conserved, &c))?;
    ensure(sym.conservation != Some(Conservation::NotConserved), "symbolic conservation residual classified as not conserved")?;
    c.mode = Mode::Numeric;
    c.oracle.trials = 20;
    let num = e(check_property(&t, Property::Conserved, &c))?;
    ensure(num.passed(), "divergence nonzero on a sampled configuration")?;
    Ok(format!("symmetric, traceless, gauge invariant; conserved on 20 configurations (symbolic: {:?})", sym.conservation))
}

fn noether_identity() -> Outcome {
    for (name, src) in corpus::LAGRANGIANS {
        let p = e(parse(src))?;
        let reg = p.registry();
        let l = e(expand_defs(&p))?;
        let r = e(noether_identity_residual(&l, &e(rules_with_defaults(&l, &[], &reg))?, &reg))?;
        ensure(r.is_zero(), format!("{name}: {} residual terms", r.len()))?;
    }
    Ok(format!("residual exactly 0 for {} Lagrangians", corpus::LAGRANGIANS.len()))
}

fn canonicalizer_suite() -> Outcome {
    let reg = common::registry();
    for seed in 0..200u64 {
        let x = common::random_expr(seed, seed % 2 == 1);
        let c = e(canonicalize(&x, &reg))?;
        ensure(e(canonicalize(&c, &reg))? == c && e(is_canonical(&c, &reg))?, format!("seed {seed}: not idempotent"))?;
        ensure(e(canonicalize(&common::relabeled(&x, seed), &reg))? == c, format!("seed {seed}: relabeling changes the form"))?;
        let opts = OracleOptions { trials: 3, seed, degree: (max_jet_order(&x) + 3).max(4) };
        let r = e(oracle_equal(&x, &c, &reg, &opts))?;
        ensure(r.is_equal(), format!("seed {seed}: oracle disagrees {}", r.to_json()))?;
    }
    Ok("200 expressions: idempotent, relabeling invariant, oracle-equal at 3 points each".into())
}

fn lagrangian_eta_part() -> Outcome {
    let mut cases = vec![("kg", canonical_noether(corpus::KG)?), ("em", canonical_noether(corpus::EM)?)];
    let bh = corpus::em_bessel_hagen();
    let l = e(expand_defs(&bh))?;
    let t = e(noether_emt(&l, &e(program_rules(&bh))?, &bh.registry()))?;
    cases.push(("em (Bessel-Hagen)", (l, t)));
    for (name, (l, t)) in &cases {
        let reg = corpus::gauss_bonnet().registry();
        let part = e(eta_part(t, "ga", "rh", &reg))?;
        ensure(e(equal(&part, l, &reg))?, format!("{name}: eta part differs from L"))?;
    }
    Ok("eta^{ga rh} part of T_N equals L for kg, em and em (Bessel-Hagen)".into())
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 8] = [
        (1, "electrodynamics equivalence", electrodynamics, Duration::from_secs(10)),
        (2, "Klein-Gordon equivalence", klein_gordon, Duration::from_secs(5)),
        (3, "Gauss-Bonnet inequality", gauss_bonnet_inequality, Duration::from_secs(600)),
        (4, "intermediate algebra match or certified report", intermediate_algebra, Duration::from_secs(600)),
        (5, "reference tensor property suite", reference_properties, Duration::from_secs(300)),
        (6, "Noether identity", noether_identity, Duration::from_secs(300)),
        (7, "canonicalizer property suite", canonicalizer_suite, Duration::from_secs(300)),
        (8, "eta part of the Noether tensor is the Lagrangian", lagrangian_eta_part, Duration::from_secs(5)),
    ];
    let mut failed = 0;
    for (n, name, run, limit) in criteria {
        let t0 = Instant::now();
        let out = run();
        let dt = t0.elapsed();
        let out = match out {
            Ok(m) if dt > limit => Err(format!("{m}; took {dt:.1?}, limit {limit:?}")),
            o => o,
        };
        match out {
            Ok(m) => println!("criterion {n} PASS [{dt:.2?}] {name}: {m}"),
            Err(m) => {
                failed += 1;
                println!("criterion {n} FAIL [{dt:.2?}] {name}: {m}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
