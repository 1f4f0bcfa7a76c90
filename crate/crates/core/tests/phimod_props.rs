use std::sync::Arc;

use kisin_core::gf::{FieldSpec, Fq};
use kisin_core::phimod::{Matrix2, PhiModuleSpec};
use kisin_core::{
    emit_spec_json, is_model, parse_spec_json, transform_basis, FrobeniusSemantics, TruncatedLaurentSeries as Series,
};
use proptest::prelude::*;

// Generous: negative lattice exponents cost relative precision.
const CAP: i64 = 120;

fn f9() -> Arc<FieldSpec> {
    FieldSpec::get(3, 2).unwrap()
}

/// Laurent polynomials with exponents in `lo..lo + 5`.
fn poly(lo: i64) -> impl Strategy<Value = Series> {
    prop::collection::vec(0u32..9, 5).prop_map(move |c| {
        Series::exact(f9(), c.into_iter().enumerate().map(|(k, x)| (lo + k as i64, Fq(x))), CAP)
    })
}

fn matrix(lo: i64) -> impl Strategy<Value = Matrix2> {
    (poly(lo), poly(lo), poly(lo), poly(lo))
        .prop_map(|(a, b, c, d)| Matrix2::new(a, b, c, d))
        .prop_filter("invertible", |m| !m.det().unwrap().is_zero())
}

/// Triangular base changes with monomial diagonal.
fn triangular() -> impl Strategy<Value = Matrix2> {
    (-3i64..4, -3i64..4, poly(-3)).prop_map(|(s, t, v)| Matrix2::triangular(s, t, v, CAP))
}

/// Integral matrices with unit determinant: products of elementary matrices.
fn unimodular() -> impl Strategy<Value = Matrix2> {
    (poly(0), poly(0), 1u32..9, 1u32..9).prop_map(|(x, y, c, d)| {
        let f = f9();
        let one = Series::exact(f.clone(), [(0, Fq::ONE)], CAP);
        let zero = Series::exact(f.clone(), [], CAP);
        let upper = Matrix2::new(one.clone(), x, zero.clone(), one.clone());
        let lower = Matrix2::new(one.clone(), zero.clone(), y, one);
        let diag = Matrix2::new(
            Series::exact(f.clone(), [(0, Fq(c))], CAP),
            zero.clone(),
            zero,
            Series::exact(f, [(0, Fq(d))], CAP),
        );
        upper.mul(&lower).unwrap().mul(&diag).unwrap()
    })
}

fn spec_of(mats: Vec<Matrix2>, e: u32) -> PhiModuleSpec {
    let n = mats.len();
    PhiModuleSpec::new(3, n, e, f9(), mats).unwrap()
}

fn v(x: &Series) -> i64 {
    x.valuation().finite().unwrap()
}

fn same_up_to_precision(a: &Matrix2, b: &Matrix2) -> bool {
    [(a.a11(), b.a11()), (a.a12(), b.a12()), (a.a21(), b.a21()), (a.a22(), b.a22())]
        .iter()
        .all(|(x, y)| {
            let prec = x.prec().min(y.prec());
            x.truncate(prec) == y.truncate(prec)
        })
}

fn sem(pp: bool) -> FrobeniusSemantics {
    if pp {
        FrobeniusSemantics::PPower
    } else {
        FrobeniusSemantics::Linear
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn base_change_composes(
        a in prop::collection::vec(matrix(-1), 2),
        b in prop::collection::vec(triangular(), 2),
        c in prop::collection::vec(triangular(), 2),
        pp in any::<bool>(),
    ) {
        let spec = spec_of(a, 4);
        let s = sem(pp);
        let twice = transform_basis(&transform_basis(&spec, &b, s).unwrap(), &c, s).unwrap();
        let bc: Vec<Matrix2> = (0..2).map(|i| c[i].mul(&b[i]).unwrap()).collect();
        let once = transform_basis(&spec, &bc, s).unwrap();
        for i in 0..2 {
            prop_assert!(same_up_to_precision(&twice.matrices[i], &once.matrices[i]));
        }
    }

    #[test]
    fn is_model_is_invariant_under_unimodular_change(
        lattice in prop::collection::vec(triangular(), 2),
        g in prop::collection::vec(unimodular(), 2),
        e in 1u32..5,
    ) {
        // Start from a model candidate: the identity moved by a triangular lattice.
        let f = f9();
        let id = Matrix2::new(
            Series::exact(f.clone(), [(0, Fq::ONE)], CAP),
            Series::exact(f.clone(), [], CAP),
            Series::exact(f.clone(), [], CAP),
            Series::exact(f, [(e as i64, Fq::ONE)], CAP),
        );
        let spec = spec_of(vec![id.clone(), id], e);
        let moved = transform_basis(&spec, &lattice, FrobeniusSemantics::Linear).unwrap();
        let twisted = transform_basis(&moved, &g, FrobeniusSemantics::Linear).unwrap();
        prop_assert_eq!(is_model(&moved).unwrap(), is_model(&twisted).unwrap());
    }

    #[test]
    fn determinant_bookkeeping(
        a in prop::collection::vec(matrix(-1), 3),
        b in prop::collection::vec(triangular(), 3),
        pp in any::<bool>(),
    ) {
        let spec = spec_of(a, 4);
        let out = transform_basis(&spec, &b, sem(pp)).unwrap();
        let p = 3;
        let mut lhs = 0;
        let mut rhs = 0;
        for i in 0..3 {
            let da = v(&spec.matrices[i].det().unwrap());
            let db = v(&b[i].det().unwrap());
            let db1 = v(&b[(i + 1) % 3].det().unwrap());
            let dout = v(&out.matrices[i].det().unwrap());
            prop_assert_eq!(dout, p * db + da - db1);
            lhs += dout;
            rhs += da + (p - 1) * db;
        }
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn models_have_bounded_determinant(
        lattice in prop::collection::vec(triangular(), 2),
        a in prop::collection::vec(matrix(0), 2),
        e in 0u32..6,
    ) {
        let spec = spec_of(a, e);
        let out = transform_basis(&spec, &lattice, FrobeniusSemantics::Linear).unwrap();
        if is_model(&out).unwrap() {
            for m in &out.matrices {
                let d = v(&m.det().unwrap());
                prop_assert!((0..=2 * e as i64).contains(&d));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn spec_json_round_trip(a in prop::collection::vec(matrix(-2), 1..4), e in 0u32..6) {
        let n = a.len();
        let cap = kisin_core::laurent::precision_cap(e, 3);
        let mats = a
            .into_iter()
            .map(|m| {
                let re = |x: &Series| Series::exact(f9(), x.terms().to_vec(), cap);
                Matrix2::new(re(m.a11()), re(m.a12()), re(m.a21()), re(m.a22()))
            })
            .collect();
        let spec = PhiModuleSpec::new(3, n, e, f9(), mats).unwrap();
        let text = emit_spec_json(&spec);
        let back = kisin_core::phimod::SpecFile::to_spec(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(emit_spec_json(&back), text);
    }
}

#[test]
fn parse_rejects_bad_input() {
    assert!(parse_spec_json("{").is_err());
    assert!(parse_spec_json(r#"{"p":3,"n":1,"e":1,"field":{"p":3,"r":1},"matrices":[[[],[],[],[]]]}"#).is_err());
    // Unknown fields are rejected.
    let ok = r#"{"p":3,"n":1,"e":1,"field":{"p":3,"r":1},"matrices":[[[[0,[1]]],[],[],[[1,[1]]]]]}"#;
    assert!(parse_spec_json(ok).is_ok());
    let extra = ok.replace("\"e\":1,", "\"e\":1,\"x\":0,");
    assert!(parse_spec_json(&extra).is_err());
    // Coefficient vector of the wrong length.
    let bad = ok.replace("[[0,[1]]]", "[[0,[1,0]]]");
    assert!(parse_spec_json(&bad).is_err());
}

