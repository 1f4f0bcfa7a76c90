//! Zeta-function fits, dimension bounds and extremal witnesses.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{FieldSpec, Fq};
use crate::laurent::{precision_cap, TruncatedLaurentSeries as Series};
use crate::phimod::{Matrix2, PhiModuleSpec};

/// `Z(T) = prod_{i=0}^{d} (1 - q_base^i T)^(-m_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZetaFunction {
    pub q_base: u64,
    pub m: Vec<i64>,
}

impl ZetaFunction {
    pub fn d(&self) -> usize {
        self.m.len().saturating_sub(1)
    }

    /// Point count over the extension of degree `k`.
    pub fn count(&self, k: u32) -> Option<i128> {
        let qk = (self.q_base as i128).checked_pow(k)?;
        let mut acc: i128 = 0;
        let mut pw: i128 = 1;
        for &mi in &self.m {
            acc = acc.checked_add((mi as i128).checked_mul(pw)?)?;
            pw = pw.checked_mul(qk)?;
        }
        Some(acc)
    }
}

impl fmt::Display for ZetaFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (i, &mi) in self.m.iter().enumerate() {
            if mi == 0 {
                continue;
            }
            let base = match i {
                0 => "(1-T)".to_string(),
                1 => format!("(1-{}T)", self.q_base),
                _ => format!("(1-{}^{}T)", self.q_base, i),
            };
            parts.push(format!("{base}^{}", -mi));
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join(" "))
        }
    }
}

/// Solves `count_k = sum_i m_i (q_base^k)^i` for `m_0..m_d` from the first `d + 1`
/// degrees and checks the remaining ones.
pub fn fit_zeta(counts: &[(u32, u128)], d: usize, q_base: u64) -> Result<ZetaFunction> {
    if counts.len() < d + 1 {
        return Err(Error::Fit(format!("need {} degrees for d = {d}, got {}", d + 1, counts.len())));
    }
    let n = d + 1;
    let big = |x: u128| BigRational::from_integer(BigInt::from(x));
    let mut rows: Vec<Vec<BigRational>> = counts[..n]
        .iter()
        .map(|&(k, c)| {
            let qk = BigInt::from(q_base).pow(k);
            let mut row: Vec<BigRational> = (0..n)
                .map(|i| BigRational::from_integer(qk.pow(i as u32)))
                .collect();
            row.push(big(c));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .find(|&r| !rows[r][col].is_zero())
            .ok_or_else(|| Error::Fit("repeated extension degrees".into()))?;
        rows.swap(col, piv);
        let inv = rows[col][col].recip();
        for x in rows[col].iter_mut() {
            *x *= &inv;
        }
        for r in 0..n {
            if r != col && !rows[r][col].is_zero() {
                let c = rows[r][col].clone();
                for k in 0..=n {
                    let t = &rows[col][k] * &c;
                    rows[r][k] -= t;
                }
            }
        }
    }
    let sol: Vec<BigRational> = rows.iter().map(|r| r[n].clone()).collect();
    if let Some(bad) = sol.iter().find(|x| !x.is_integer()) {
        return Err(Error::Fit(format!("non-integer exponent {bad} for d = {d}")));
    }
    let m: Vec<i64> = sol
        .iter()
        .map(|x| x.to_integer().to_i64().ok_or_else(|| Error::Fit("exponent overflow".into())))
        .collect::<Result<_>>()?;
    let z = ZetaFunction { q_base, m };
    let mut residuals = Vec::new();
    for &(k, c) in counts {
        let r = BigInt::from(c) - model_count(&z, k);
        if !r.is_zero() {
            residuals.push(format!("degree {k}: residual {r}"));
        }
    }
    if !residuals.is_empty() {
        return Err(Error::Fit(residuals.join("; ")));
    }
    if z.m.last().is_some_and(|x| !x.is_positive()) {
        return Err(Error::Fit(format!("leading exponent m_{d} = {} is not positive", z.m[d])));
    }
    Ok(z)
}

fn model_count(z: &ZetaFunction, k: u32) -> BigInt {
    let qk = BigInt::from(z.q_base).pow(k);
    let mut acc = BigInt::zero();
    let mut pw = BigInt::one();
    for &mi in &z.m {
        acc += BigInt::from(mi) * &pw;
        pw *= &qk;
    }
    acc
}

/// Maximal stratum dimension over all `V`.
pub fn theorem_bound(p: i64, n: i64, e: i64) -> i64 {
    let q = p + 1;
    if n == 1 {
        (e + 2) / q
    } else {
        (n + 1) / 2 * (e / q) + (n - 2) / 2 * ((e + 1) / q) + (e + 2) / q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Reducible,
    Irreducible,
}

/// `e = (p + 1) e0 + e1` with `0 <= e1 <= p`.
pub fn split_e(p: i64, e: i64) -> (i64, i64) {
    (e / (p + 1), e % (p + 1))
}

/// Maximal dimension when `V` is reducible or absolutely irreducible.
pub fn case_bound(p: i64, n: i64, e: i64, case: Case) -> i64 {
    let (e0, e1) = split_e(p, e);
    match case {
        Case::Reducible if e1 <= p - 2 => n * e0,
        Case::Reducible if e1 == p - 1 => n * e0 + 1,
        Case::Reducible => n * e0 + (n / 2).max(1),
        Case::Irreducible if e1 == 0 => n * e0 - 1,
        Case::Irreducible if e1 < p => n * e0,
        Case::Irreducible => n * e0 + n / 2,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: i64,
    pub n: i64,
    pub e: i64,
    pub e0: i64,
    pub e1: i64,
    pub theorem_bound: i64,
    pub reducible: i64,
    pub irreducible: i64,
}

pub fn bound_report(p: i64, n: i64, e: i64) -> BoundReport {
    let (e0, e1) = split_e(p, e);
    BoundReport {
        p,
        n,
        e,
        e0,
        e1,
        theorem_bound: theorem_bound(p, n, e),
        reducible: case_bound(p, n, e, Case::Reducible),
        irreducible: case_bound(p, n, e, Case::Irreducible),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    Onepoint,
    ReducibleA,
    ReducibleB,
    ReducibleC,
    IrreducibleA,
    IrreducibleB,
    IrreducibleC,
}

impl WitnessKind {
    pub const ALL: [WitnessKind; 7] = [
        WitnessKind::Onepoint,
        WitnessKind::ReducibleA,
        WitnessKind::ReducibleB,
        WitnessKind::ReducibleC,
        WitnessKind::IrreducibleA,
        WitnessKind::IrreducibleB,
        WitnessKind::IrreducibleC,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WitnessKind::Onepoint => "onepoint",
            WitnessKind::ReducibleA => "reducible_a",
            WitnessKind::ReducibleB => "reducible_b",
            WitnessKind::ReducibleC => "reducible_c",
            WitnessKind::IrreducibleA => "irreducible_a",
            WitnessKind::IrreducibleB => "irreducible_b",
            WitnessKind::IrreducibleC => "irreducible_c",
        }
    }

    pub fn case(self) -> Option<Case> {
        match self {
            WitnessKind::Onepoint => None,
            WitnessKind::ReducibleA | WitnessKind::ReducibleB | WitnessKind::ReducibleC => Some(Case::Reducible),
            _ => Some(Case::Irreducible),
        }
    }
}

impl std::str::FromStr for WitnessKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        WitnessKind::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown witness {s:?}")))
    }
}

fn mono(f: &std::sync::Arc<FieldSpec>, k: i64, cap: i64) -> Series {
    Series::exact(f.clone(), [(k, Fq::ONE)], cap)
}

fn zero(f: &std::sync::Arc<FieldSpec>, cap: i64) -> Series {
    Series::exact(f.clone(), [], cap)
}

fn diag(f: &std::sync::Arc<FieldSpec>, x: i64, y: i64, cap: i64) -> Matrix2 {
    Matrix2::new(mono(f, x, cap), zero(f, cap), zero(f, cap), mono(f, y, cap))
}

/// The extremal example of the requested kind.
pub fn make_witness(p: u32, n: usize, e: u32, which: WitnessKind) -> Result<PhiModuleSpec> {
    if n == 0 || e == 0 {
        return Err(Error::Domain("witnesses need n >= 1 and e >= 1".into()));
    }
    let cap = precision_cap(e, p);
    let (pi, ei) = (p as i64, e as i64);
    let (e0, e1) = split_e(pi, ei);
    let need = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{} needs {what}", which.as_str())))
        }
    };
    let r = if which.case() == Some(Case::Irreducible) { 2 * n } else { n } as u32;
    let f = FieldSpec::get(p, r)?;
    // Alternating e_{0,i}: e0 for odd 1-based i, e0 + 1 for even.
    let e0i = |i: usize| if i.is_multiple_of(2) { e0 } else { e0 + 1 };
    let mats: Vec<Matrix2> = match which {
        WitnessKind::Onepoint => (0..n)
            .map(|_| Matrix2::new(mono(&f, ei, cap), mono(&f, 1, cap), zero(&f, cap), mono(&f, 0, cap)))
            .collect(),
        WitnessKind::ReducibleA => {
            need(e1 <= pi - 2, "e1 <= p - 2")?;
            (0..n).map(|_| diag(&f, e0, pi * e0, cap)).collect()
        }
        WitnessKind::ReducibleB => {
            need(e1 == pi - 1 || (e1 == pi && n == 1), "e1 = p - 1, or e1 = p with n = 1")?;
            (0..n).map(|_| diag(&f, e0, pi * e0 + pi - 1, cap)).collect()
        }
        WitnessKind::ReducibleC => {
            need(e1 == pi && n >= 2, "e1 = p and n >= 2")?;
            (0..n).map(|i| diag(&f, e0i(i), pi * (2 * e0 + 1 - e0i(i)), cap)).collect()
        }
        WitnessKind::IrreducibleA | WitnessKind::IrreducibleB | WitnessKind::IrreducibleC => {
            let m = match which {
                WitnessKind::IrreducibleA => {
                    need(e1 == 0 && e0 >= 1, "e1 = 0 and e0 >= 1")?;
                    (pi + 1) * e0 - 1
                }
                WitnessKind::IrreducibleB => {
                    need((1..=pi - 1).contains(&e1), "1 <= e1 <= p - 1")?;
                    (pi + 1) * e0 + 1
                }
                _ => {
                    need(e1 == pi, "e1 = p")?;
                    (pi + 1) * e0 + 1
                }
            };
            let first = Matrix2::new(zero(&f, cap), mono(&f, 0, cap), mono(&f, m, cap), zero(&f, cap));
            let mut v = vec![first];
            for i in 1..n {
                v.push(if which == WitnessKind::IrreducibleC {
                    diag(&f, 2 * e0 + 1 - e0i(i), pi * e0i(i), cap)
                } else {
                    diag(&f, e0, pi * e0, cap)
                });
            }
            v
        }
    };
    let spec = PhiModuleSpec::new(p, n, e, f, mats)?;
    crate::phimod::detect_normal_form(&spec)?;
    Ok(spec)
}
