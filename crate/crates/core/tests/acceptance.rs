//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails or overruns its time budget.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use kisin_core::gf::{FieldSpec, Fq};
use kisin_core::phimod::{Matrix2, PhiModuleSpec};
use kisin_core::sample::random_spec;
use kisin_core::verify::saturated_count;
use kisin_core::{
    case_bound, fit_zeta, frobenius_p, make_witness, run_verify, theorem_bound, Case, FieldElement,
    FrobeniusSemantics, TruncatedLaurentSeries as Series, VerifyConfig, VerifyReport, WitnessKind,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Largest extension field the sweeps build.
const MAX_EXT_FIELD: u64 = 1_000_000;
const HYGIENE_CASES: u32 = 500;
const WORKERS: usize = 4;

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn verify(spec: &PhiModuleSpec, degrees: Vec<u32>) -> Result<VerifyReport, String> {
    let mut cfg = VerifyConfig::new(degrees);
    cfg.workers = WORKERS;
    run_verify(spec, &cfg).map_err(|e| e.to_string())
}

fn counts(r: &VerifyReport) -> Vec<u128> {
    r.degrees.iter().map(|d| d.count).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Degrees `1..=k` with `q^k` at most `MAX_EXT_FIELD`, and `k <= cap`.
fn degrees_for(q: u64, cap: u32) -> Vec<u32> {
    (1..=cap).take_while(|&k| q.checked_pow(k).is_some_and(|x| x <= MAX_EXT_FIELD)).collect()
}

fn c1_one_point() -> Outcome {
    let mut runs = 0;
    for p in [3, 5] {
        for n in 1..=2 {
            for e in 1..=4 {
                let spec = make_witness(p, n, e, WitnessKind::Onepoint).map_err(|x| x.to_string())?;
                let r = verify(&spec, vec![1, 2, 3])?;
                let ctx = format!("p={p} n={n} e={e}");
                ensure(r.verdicts.saturation, || format!("{ctx}: not saturated"))?;
                ensure(counts(&r) == [1, 1, 1], || format!("{ctx}: counts {:?}", counts(&r)))?;
                let z = r.zeta.as_ref().ok_or(format!("{ctx}: {:?}", r.zeta_error))?;
                ensure(z.m == [1] && z.to_string() == "(1-T)^-1", || format!("{ctx}: zeta {z}"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} specs, count 1 at degrees 1..3, Z = (1-T)^-1"))
}

fn f9_diag(e: u32, x: i64, y: i64) -> Result<PhiModuleSpec, String> {
    let f = FieldSpec::get(3, 2).map_err(|x| x.to_string())?;
    let cap = kisin_core::laurent::precision_cap(e, 3);
    let mono = |k: i64| Series::exact(f.clone(), [(k, Fq::ONE)], cap);
    let zero = Series::exact(f.clone(), [], cap);
    let m = Matrix2::new(mono(x), zero.clone(), zero, mono(y));
    PhiModuleSpec::new(3, 1, e, f, vec![m]).map_err(|x| x.to_string())
}

fn c2_projective_line() -> Outcome {
    let spec = f9_diag(2, 2, 2)?;
    let r = verify(&spec, vec![1, 2, 3])?;
    ensure(r.pass, || format!("verify failed: {:?}", r.first_divergence))?;
    ensure(counts(&r) == [12, 84, 732], || format!("counts {:?}", counts(&r)))?;
    ensure(r.d_max == Some(1) && theorem_bound(3, 1, 2) == 1, || format!("d_max {:?}", r.d_max))?;
    let z = r.zeta.as_ref().ok_or("no zeta")?;
    ensure(z.m == [3, 1], || format!("m = {:?}", z.m))?;
    Ok(format!("counts 12, 84, 732; d_max 1; Z = {z}"))
}

fn c3_uniqueness() -> Outcome {
    const WANT: usize = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0;
    for e in 1..=3 {
        let mut found = 0;
        let mut tries = 0;
        while found < WANT {
            tries += 1;
            ensure(tries < 50 * WANT, || format!("e={e}: only {found} model-admitting specs sampled"))?;
            let n = 1 + tries % 2;
            let case = if tries % 4 < 2 { Case::Reducible } else { Case::Irreducible };
            let spec = random_spec(&mut rng, 5, n, e, case).map_err(|x| x.to_string())?;
            let mut cfg = VerifyConfig::new(vec![1, 2]);
            cfg.workers = WORKERS;
            let mut c = Vec::new();
            for k in [1, 2] {
                let (ps, sat) = saturated_count(&spec, &cfg, k).map_err(|x| x.to_string())?;
                ensure(sat, || format!("e={e}: unsaturated"))?;
                c.push(ps.count);
            }
            if c == [0, 0] {
                continue;
            }
            ensure(c == [1, 1], || format!("p=5 e={e} n={n} {case:?}: counts {c:?}"))?;
            found += 1;
        }
        total += found;
    }
    Ok(format!("{total} model-admitting specs, each exactly one point at degrees 1, 2"))
}

fn witness_check(p: u32, n: usize, e: u32, which: WitnessKind, degrees: Vec<u32>, want: i64) -> Result<String, String> {
    let spec = make_witness(p, n, e, which).map_err(|x| x.to_string())?;
    let r = verify(&spec, degrees)?;
    let ctx = format!("{} p={p} n={n} e={e}", which.as_str());
    ensure(r.pass, || format!("{ctx}: verify failed: {:?}", r.first_divergence))?;
    let case = which.case().ok_or("witness without a case")?;
    let cb = case_bound(p as i64, n as i64, e as i64, case);
    ensure(r.d_max == Some(want) && want == cb, || {
        format!("{ctx}: d_max {:?}, expected {want}, case bound {cb}", r.d_max)
    })?;
    Ok(format!("{ctx} d_max {want}"))
}

fn c4_reducible_witnesses() -> Outcome {
    let a = witness_check(3, 1, 4, WitnessKind::ReducibleA, vec![1, 2, 3, 4], 1)?;
    let b = witness_check(3, 1, 7, WitnessKind::ReducibleB, vec![1, 2, 3, 4], 2)?;
    let c = witness_check(3, 2, 7, WitnessKind::ReducibleC, vec![1, 2, 3, 4], 3)?;
    Ok(format!("{a}; {b}; {c}"))
}

fn c5_irreducible_witnesses() -> Outcome {
    let a = witness_check(3, 1, 4, WitnessKind::IrreducibleA, vec![1, 2, 3], 0)?;
    let spec = make_witness(3, 1, 4, WitnessKind::IrreducibleA).map_err(|x| x.to_string())?;
    let r = verify(&spec, vec![1, 2, 3])?;
    let c = counts(&r);
    ensure(c.windows(2).all(|w| w[0] == w[1]), || format!("irreducible_a counts not constant: {c:?}"))?;
    let b = witness_check(3, 1, 5, WitnessKind::IrreducibleB, vec![1, 2, 3], 1)?;
    Ok(format!("{a} (counts {c:?}); {b}"))
}

fn c6_bound_sweep() -> Outcome {
    const PER_CONFIG: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut specs = 0;
    let mut worst = i64::MIN;
    for p in [3u32, 5] {
        for n in 1..=2usize {
            for e in 1..=5u32 {
                let tb = theorem_bound(p as i64, n as i64, e as i64);
                let (mut found, mut tries) = (0, 0);
                while found < PER_CONFIG {
                    tries += 1;
                    let ctx = format!("p={p} n={n} e={e}");
                    ensure(tries <= 50 * PER_CONFIG, || format!("{ctx}: only {found} model-admitting specs"))?;
                    let case = if tries % 2 == 0 { Case::Reducible } else { Case::Irreducible };
                    let spec = random_spec(&mut rng, p, n, e, case).map_err(|x| x.to_string())?;
                    let r = verify(&spec, degrees_for(spec.field.size(), 3))?;
                    let ctx = format!("{ctx} {case:?}");
                    ensure(r.verdicts.saturation, || format!("{ctx}: unsaturated"))?;
                    ensure(r.verdicts.strata, || format!("{ctx}: {:?}", r.first_divergence))?;
                    if counts(&r).iter().all(|&c| c == 0) {
                        continue;
                    }
                    let d = r.d_max.ok_or(format!("{ctx}: no occupied stratum"))?;
                    ensure(d <= tb, || format!("{ctx}: d_max {d} > theorem bound {tb}"))?;
                    worst = worst.max(d - tb);
                    found += 1;
                    specs += 1;
                }
            }
        }
    }
    Ok(format!("{specs} model-admitting specs, zero violations, max(d_max - bound) = {worst}"))
}

fn c7_formulas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let k = common::random_key(&mut rng, &[3, 5, 7], 3, 11);
        common::check_key(&k)?;
    }
    Ok("1000 random keys (e <= 11, n <= 3)".into())
}

fn c8_maximizers() -> Outcome {
    let mut keys = 0;
    let mut maximizers = 0;
    for p in [3, 5, 7] {
        for n in 1..=3 {
            for e in 0..=5 {
                keys += common::check_star(n, e, p)?;
                maximizers += common::check_maximizer_bounds(n, e, p)?;
            }
        }
    }
    Ok(format!("bound checked at {keys} (key, i) pairs; {maximizers} maximizers"))
}

fn runner() -> TestRunner {
    let cfg = Config {
        cases: HYGIENE_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn poly(f: Arc<FieldSpec>, lo: i64, len: usize) -> impl Strategy<Value = Series> {
    let q = f.size() as u32;
    prop::collection::vec(0..q, len).prop_map(move |c| {
        Series::exact(f.clone(), c.into_iter().enumerate().map(|(k, x)| (lo + k as i64, Fq(x))), 24)
    })
}

fn unit_poly(f: Arc<FieldSpec>, lo: i64, len: usize) -> impl Strategy<Value = Series> {
    let q = f.size() as u32;
    (1..q, poly(f.clone(), lo + 1, len)).prop_map(move |(c, rest)| {
        Series::exact(f.clone(), [(lo, Fq(c))], 24).add(&rest).unwrap()
    })
}

fn c9_hygiene() -> Outcome {
    let f = FieldSpec::get(3, 2).map_err(|x| x.to_string())?;

    // Precision soundness: the same pipeline at prec and prec + 5 agrees below prec.
    let pair = (unit_poly(f.clone(), -2, 6), unit_poly(f.clone(), 1, 6));
    runner()
        .run(&pair, |(a, b)| {
            let run = |a: &Series, b: &Series| {
                let x = a.mul(&b.invert_max().unwrap()).unwrap();
                x.phi_component(FrobeniusSemantics::Linear).add(&a.mul(b).unwrap()).unwrap()
            };
            let wide = |x: &Series| Series::from_terms(x.spec().clone(), x.terms().to_vec(), x.prec() + 5);
            let lo = run(&a, &b);
            let hi = run(&wide(&a), &wide(&b));
            prop_assert_eq!(hi.truncate(lo.prec()), lo);
            Ok(())
        })
        .map_err(|e| format!("precision soundness: {e}"))?;

    // Valuation additivity.
    runner()
        .run(&(unit_poly(f.clone(), -3, 5), unit_poly(f.clone(), 2, 5)), |(a, b)| {
            let v = |x: &Series| x.valuation().finite().unwrap();
            prop_assert_eq!(v(&a.mul(&b).unwrap()), v(&a) + v(&b));
            Ok(())
        })
        .map_err(|e| format!("valuation additivity: {e}"))?;

    // Frobenius multiplicativity on field elements and on series.
    let q = f.size() as u32;
    let g = f.clone();
    runner()
        .run(&(0..q, 0..q), |(x, y)| {
            let (x, y) = (FieldElement::new(g.clone(), Fq(x)).unwrap(), FieldElement::new(g.clone(), Fq(y)).unwrap());
            let xy = kisin_core::field_arithmetic(&x, &y, kisin_core::FieldOp::Mul).unwrap();
            let rhs = kisin_core::field_arithmetic(&frobenius_p(&x), &frobenius_p(&y), kisin_core::FieldOp::Mul).unwrap();
            prop_assert_eq!(frobenius_p(&xy), rhs);
            Ok(())
        })
        .map_err(|e| format!("field Frobenius: {e}"))?;
    runner()
        .run(&(poly(f.clone(), -2, 6), poly(f.clone(), 0, 6), any::<bool>()), |(a, b, pp)| {
            let sem = if pp { FrobeniusSemantics::PPower } else { FrobeniusSemantics::Linear };
            let lhs = a.mul(&b).unwrap().phi_component(sem);
            let rhs = a.phi_component(sem).mul(&b.phi_component(sem)).unwrap();
            let prec = lhs.prec().min(rhs.prec());
            prop_assert_eq!(lhs.truncate(prec), rhs.truncate(prec));
            Ok(())
        })
        .map_err(|e| format!("series Frobenius: {e}"))?;

    // fit_zeta round trip, d <= 4.
    let vecs = (0usize..=4, prop::collection::vec(0i64..6, 4), 1i64..6, prop::sample::select(vec![3u64, 5, 9]));
    runner()
        .run(&vecs, |(d, m, lead, q)| {
            let mut m = m[..d].to_vec();
            m.push(lead);
            let counts: Vec<(u32, u128)> = (1..=d as u32 + 2)
                .map(|k| {
                    let qk = (q as i128).pow(k);
                    (k, m.iter().enumerate().map(|(i, &x)| x as i128 * qk.pow(i as u32)).sum::<i128>() as u128)
                })
                .collect();
            prop_assert_eq!(fit_zeta(&counts, d, q).unwrap().m, m);
            Ok(())
        })
        .map_err(|e| format!("fit round trip: {e}"))?;
    Ok(format!("5 property suites x {HYGIENE_CASES} cases"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 9] = [
        (1, "one-point moduli", c1_one_point, secs(60)),
        (2, "projective line example", c2_projective_line, secs(60)),
        (3, "uniqueness for e < p - 1", c3_uniqueness, secs(120)),
        (4, "reducible witnesses", c4_reducible_witnesses, secs(600)),
        (5, "irreducible witnesses", c5_irreducible_witnesses, secs(300)),
        (6, "theorem bound sweep", c6_bound_sweep, secs(1800)),
        (7, "formula vs brute force", c7_formulas, secs(60)),
        (8, "maximizer property suite", c8_maximizers, secs(300)),
        (9, "numerical hygiene", c9_hygiene, secs(60)),
    ];
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > budget => Err(format!("{msg}; took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {id} ({name}): PASS [{took:.2?}] {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL [{took:.2?}] {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
