//! Stratum indices, the cardinalities that give stratum dimensions, and
//! predicted point counts per stratum.
//!
//! Component indices are 0-based and cyclic: component `i - 1` of component
//! 0 is component `n - 1`.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{FieldSpec, Fq};
use crate::laurent::FrobeniusSemantics;
use crate::phimod::NormalFormKind;

/// Label of a stratum.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum StratumKey {
    Reducible { a: Vec<i64>, b: Vec<i64> },
    IrrA { a: Vec<i64>, b: Vec<i64>, r1: i64, r2: i64 },
    IrrB { a: Vec<i64>, b: Vec<i64>, r1: i64, r2: i64 },
}

impl StratumKey {
    pub fn ab(&self) -> (&[i64], &[i64]) {
        match self {
            StratumKey::Reducible { a, b } | StratumKey::IrrA { a, b, .. } | StratumKey::IrrB { a, b, .. } => (a, b),
        }
    }
}

fn join(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StratumKey::Reducible { a, b } => write!(f, "red a=({}) b=({})", join(a), join(b)),
            StratumKey::IrrA { a, b, r1, r2 } => {
                write!(f, "irrA a=({}) b=({}) R=({r1},{r2})", join(a), join(b))
            }
            StratumKey::IrrB { a, b, r1, r2 } => {
                write!(f, "irrB a=({}) b=({}) R=({r1},{r2})", join(a), join(b))
            }
        }
    }
}

/// Dimension `d` and number `g` of multiplicative factors of a stratum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDescriptor {
    pub d: i64,
    pub g: i64,
}

/// `(Q-1)^g Q^(d-g)`.
pub fn predicted_cell_count(cell: CellDescriptor, q: u64) -> Result<u128> {
    if cell.g > cell.d || cell.g < 0 {
        return Err(Error::Internal(format!("cell with g = {} > d = {}", cell.g, cell.d)));
    }
    let q = q as u128;
    let t = (q - 1)
        .checked_pow(cell.g as u32)
        .and_then(|x| x.checked_mul(q.checked_pow((cell.d - cell.g) as u32)?));
    t.ok_or_else(|| Error::Internal("predicted count overflow".into()))
}

fn prev(i: usize, n: usize) -> usize {
    (i + n - 1) % n
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// `min(a_i, e - b_i)`.
fn low_cap(a: &[i64], b: &[i64], i: usize, e: i64) -> i64 {
    a[i].min(e - b[i])
}

/// `floor(min(e - a_i, b_i) / p)`.
fn high_cap(a: &[i64], b: &[i64], i: usize, e: i64, p: i64) -> i64 {
    floor_div((e - a[i]).min(b[i]), p)
}

/// `|S_i|`: integers `1 <= r <= min(a_{i-1}, e - b_{i-1}, (e - a_i)/p, b_i/p)`.
pub fn red_card_s(a: &[i64], b: &[i64], i: usize, e: i64, p: i64) -> i64 {
    let n = a.len();
    let j = prev(i, n);
    low_cap(a, b, j, e).min(high_cap(a, b, i, e, p)).max(0)
}

/// `|T_i|`: integers `m` with `min(a_{i-1}, e - b_{i-1}) < pm + a_{i-1} - b_{i-1} <= min((e - a_i)/p, b_i/p)`.
pub fn red_card_t(a: &[i64], b: &[i64], i: usize, e: i64, p: i64) -> i64 {
    let n = a.len();
    let j = prev(i, n);
    let lo = low_cap(a, b, j, e);
    let hi = high_cap(a, b, i, e, p);
    if hi <= lo {
        return 0;
    }
    // x = pm + c ranges over (lo, hi] with x = c mod p.
    let c = a[j] - b[j];
    floor_div(hi - c, p) - floor_div(lo - c, p)
}

/// `|S_{i,j}|` for `1 <= j <= n - 1`: chains starting in component `i` and ending in `i + j`.
pub fn red_card_chain(a: &[i64], b: &[i64], i: usize, j: usize, e: i64, p: i64) -> i64 {
    let n = a.len();
    if j == 0 || j >= n {
        return 0;
    }
    let head_max = low_cap(a, b, prev(i, n), e);
    let mut count = 0;
    for r0 in 1..=head_max {
        let mut r = r0;
        let mut ok = true;
        for l in 0..j {
            let c = (i + l) % n;
            r = p * r + a[c] - b[c];
            if r <= low_cap(a, b, c, e) {
                ok = false;
                break;
            }
        }
        if ok && r <= high_cap(a, b, (i + j) % n, e, p) {
            count += 1;
        }
    }
    count
}

/// Solves the cyclic system `x_{k+1} = p x_k - d_k` (indices mod `d.len()`).
pub fn solve_cycle(d: &[i64], p: i64) -> Option<Vec<i64>> {
    let l = d.len() as u32;
    let pl = (p as i128).checked_pow(l)?;
    let mut num: i128 = 0;
    for (k, &dk) in d.iter().enumerate() {
        num += (p as i128).pow(l - 1 - k as u32) * dk as i128;
    }
    let den = pl - 1;
    if num % den != 0 {
        return None;
    }
    let mut x = Vec::with_capacity(d.len());
    let mut cur = num / den;
    for &dk in d {
        x.push(i64::try_from(cur).ok()?);
        cur = p as i128 * cur - dk as i128;
    }
    Some(x)
}

/// Whether the coefficients close up around the cycle `v_{i+1} = (beta_i/alpha_i) u^{b_i - a_i} phi(v_i)`.
pub fn unit_closure(field: &FieldSpec, alpha: &[Fq], beta: &[Fq], sem: FrobeniusSemantics) -> Result<bool> {
    if sem == FrobeniusSemantics::PPower {
        // c^{q-1} = prod(alpha/beta) is solvable after a finite extension.
        return Ok(true);
    }
    let mut prod = Fq::ONE;
    for (&x, &y) in alpha.iter().zip(beta) {
        prod = field.mul(prod, field.div(y, x)?);
    }
    Ok(prod == Fq::ONE)
}

/// `|S_{a,b}|`: 1 when the cycle `r_{i+1} = p r_i + a_i - b_i` has an integral
/// solution with every `r_{i+1} > min(a_i, e - b_i)` and the units close up.
pub fn red_card_cycle(a: &[i64], b: &[i64], e: i64, p: i64, closes: bool) -> i64 {
    let d: Vec<i64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let Some(r) = solve_cycle(&d, p) else { return 0 };
    let n = a.len();
    for i in 0..n {
        if r[(i + 1) % n] <= low_cap(a, b, i, e) {
            return 0;
        }
    }
    i64::from(closes)
}

/// The set sizes that make up a reducible stratum dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cardinalities {
    #[serde(rename = "S")]
    pub s: Vec<i64>,
    #[serde(rename = "T")]
    pub t: Vec<i64>,
    pub chains: i64,
    pub cycle: i64,
}

pub fn red_cardinalities(a: &[i64], b: &[i64], e: i64, p: i64, closes: bool) -> Cardinalities {
    let n = a.len();
    let mut chains = 0;
    for i in 0..n {
        for j in 1..n {
            chains += red_card_chain(a, b, i, j, e, p);
        }
    }
    Cardinalities {
        s: (0..n).map(|i| red_card_s(a, b, i, e, p)).collect(),
        t: (0..n).map(|i| red_card_t(a, b, i, e, p)).collect(),
        chains,
        cycle: red_card_cycle(a, b, e, p, closes),
    }
}

/// `d_{a,b} = sum |S_i| + sum |S_{i,j}| + |S_{a,b}|`.
pub fn red_dimension(a: &[i64], b: &[i64], e: i64, p: i64, closes: bool) -> i64 {
    let c = red_cardinalities(a, b, e, p, closes);
    c.s.iter().sum::<i64>() + c.chains + c.cycle
}

/// Whether `(a, b)` lies in the box `0 <= a_i, b_i <= e`.
pub fn in_reducible_box(a: &[i64], b: &[i64], e: i64) -> bool {
    a.iter().chain(b).all(|&x| (0..=e).contains(&x))
}

/// True when no integers `r'` satisfy `a_1 = b_1 - p r'_1 - r'_2` and
/// `a_i - r'_{i+1} = b_i - p r'_i` for `i >= 2` (cyclic).
pub fn diamond_check(a: &[i64], b: &[i64], p: i64, n: usize) -> bool {
    // r'_1 (q + 1) = p^{n-1} (b_1 - a_1) + sum_{i>=2} p^{n-i} (a_i - b_i).
    let p = p as i128;
    let mut num = p.pow(n as u32 - 1) * (b[0] - a[0]) as i128;
    for i in 1..n {
        num += p.pow((n - 1 - i) as u32) * (a[i] - b[i]) as i128;
    }
    num % (p.pow(n as u32) + 1) != 0
}

/// `max(-a_1, b_1 - e)`.
fn case_b_excess(a: &[i64], b: &[i64], e: i64) -> i64 {
    (-a[0]).max(b[0] - e)
}

fn is_case_a(a: &[i64], b: &[i64], e: i64) -> bool {
    (0..=e).contains(&a[0]) && (0..=e).contains(&b[0])
}

/// `m_{a,b} = floor((max(-a_1, b_1 - e) - 1) / p)`.
pub fn m_ab(a: &[i64], b: &[i64], e: i64, p: i64) -> i64 {
    floor_div(case_b_excess(a, b, e) - 1, p)
}

/// All `(R_1, R_2)` labels attached to `(a, b)`.
pub fn irr_substrata(a: &[i64], b: &[i64], e: i64, p: i64) -> Vec<StratumKey> {
    let n = a.len();
    let mut out = Vec::new();
    let top = (e - a[0]).min(b[0]);
    if is_case_a(a, b, e) {
        if top < 0 {
            return out;
        }
        for r1 in 0..=top / p {
            for r2 in 0..=top - p * r1 {
                out.push(StratumKey::IrrA {
                    a: a.to_vec(),
                    b: b.to_vec(),
                    r1,
                    r2,
                });
            }
        }
    } else if n >= 2 && case_b_excess(a, b, e) > 0 {
        let lo = case_b_excess(a, b, e);
        let mab = m_ab(a, b, e, p);
        for r2 in lo..=top {
            let rest = b[0] - a[0] - r2;
            if rest.rem_euclid(p) == 0 && rest / p > mab {
                out.push(StratumKey::IrrB {
                    a: a.to_vec(),
                    b: b.to_vec(),
                    r1: rest / p,
                    r2,
                });
            }
        }
    }
    out
}

/// Dimension of the space cut out by `-v(v_1) <= cap1`, `-v(v_2) <= cap2` and the
/// conditions on components `2..n` (1-based), for `n >= 2`.
fn capped_dimension(a: &[i64], b: &[i64], e: i64, p: i64, cap1: i64, cap2: i64) -> i64 {
    let n = a.len();
    debug_assert!(n >= 2);
    // 0-based: component 0 is v_1, component 1 is v_2.
    let mut d = cap1.min(low_cap(a, b, n - 1, e)).max(0);
    d += cap2.min(high_cap(a, b, 1, e, p)).max(0);
    for i in 2..n {
        d += red_card_s(a, b, i, e, p);
    }
    // Chains from component i to j + 1 for 1 <= i <= j <= n - 1 (0-based), the
    // last one wrapping into component 0.
    for i in 1..n {
        let head_max = if i == 1 { cap2 } else { low_cap(a, b, i - 1, e) };
        for j in i..n {
            for r0 in 1..=head_max {
                let mut r = r0;
                let mut ok = true;
                for l in i..=j {
                    r = p * r + a[l] - b[l];
                    if r <= low_cap(a, b, l, e) {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                let fits = if j + 1 == n { r <= cap1 } else { r <= high_cap(a, b, j + 1, e, p) };
                if fits {
                    d += 1;
                }
            }
        }
    }
    d
}

/// Whether the forced chain from `R_2` through components `2..n` lands on `R_1`
/// with every step strict.
pub fn chain_closes(a: &[i64], b: &[i64], e: i64, p: i64, r1: i64, r2: i64) -> bool {
    let n = a.len();
    let mut r = r2;
    for i in 1..n {
        if p * r <= (e - a[i]).min(b[i]) {
            return false;
        }
        r = p * r + a[i] - b[i];
    }
    r == r1
}

/// Cell of a Case-A key; `None` when the key is empty.
pub fn irr_dimension_a(a: &[i64], b: &[i64], r1: i64, r2: i64, e: i64, p: i64) -> Option<CellDescriptor> {
    let n = a.len();
    if !is_case_a(a, b, e) || r1 < 0 || r2 < 0 || p * r1 + r2 > (e - a[0]).min(b[0]) {
        return None;
    }
    let cell = if n == 1 {
        if r1 != r2 || (p + 1) * r1 > (e - a[0]).min(b[0]) {
            return None;
        }
        CellDescriptor {
            d: r1,
            g: i64::from(r1 > 0),
        }
    } else {
        let d = capped_dimension(a, b, e, p, r1, r2);
        let g = if r1 == 0 && r2 == 0 {
            0
        } else if r1 > 0 && r2 > 0 && !chain_closes(a, b, e, p, r1, r2) {
            2
        } else {
            1
        };
        CellDescriptor { d, g }
    };
    (cell.g <= cell.d).then_some(cell)
}

/// Integral backward chains `r_{1,i,n+1} = R_1 - i` down to their break index, for `0 <= i <= m_{a,b}`.
pub fn case_b_m_set(a: &[i64], b: &[i64], r1: i64, e: i64, p: i64) -> Vec<i64> {
    let n = a.len();
    let mab = m_ab(a, b, e, p);
    let mut out = Vec::new();
    for i in 0..=mab {
        // r[j] for 1-based j in 2..=n+1, stored at index j.
        let mut r = vec![Ratio::from_integer(0i128); n + 2];
        r[n + 1] = Ratio::from_integer((r1 - i) as i128);
        for j in (2..=n).rev() {
            r[j] = (r[j + 1] - Ratio::from_integer((a[j - 1] - b[j - 1]) as i128)) / Ratio::from_integer(p as i128);
        }
        let mut n1 = 2;
        for j in 3..=n + 1 {
            let cap = low_cap(a, b, j - 2, e) as i128;
            if r[j] <= Ratio::from_integer(cap) {
                n1 = j;
            }
        }
        if (n1..=n + 1).all(|j| r[j].is_integer()) {
            out.push(i);
        }
    }
    out
}

/// Cell of a Case-B key (`n >= 2`); `None` when the key is empty.
pub fn irr_dimension_b(a: &[i64], b: &[i64], r1: i64, r2: i64, e: i64, p: i64) -> Result<Option<CellDescriptor>> {
    let n = a.len();
    if n == 1 {
        return Err(Error::Unsupported("Case B strata are empty for n = 1".into()));
    }
    let lo = case_b_excess(a, b, e);
    let mab = m_ab(a, b, e, p);
    if lo <= 0 || p * r1 + r2 != b[0] - a[0] || r2 < lo || r2 > (e - a[0]).min(b[0]) || r1 <= mab {
        return Ok(None);
    }
    let dstar = capped_dimension(a, b, e, p, r1 - mab - 1, r2 - lo);
    let m = case_b_m_set(a, b, r1, e, p).len() as i64;
    Ok(Some(CellDescriptor { d: dstar + m, g: 1 }))
}

/// Predicted cell for any key under the spec's normal form; `None` for empty keys.
pub fn predict_cell(
    kind: &NormalFormKind,
    field: &FieldSpec,
    sem: FrobeniusSemantics,
    key: &StratumKey,
    e: i64,
    p: i64,
) -> Result<Option<CellDescriptor>> {
    match (kind, key) {
        (NormalFormKind::ReducibleTriangular(f), StratumKey::Reducible { a, b }) => {
            if !in_reducible_box(a, b, e) {
                return Ok(None);
            }
            let closes = unit_closure(field, &f.alpha, &f.beta, sem)?;
            Ok(Some(CellDescriptor {
                d: red_dimension(a, b, e, p, closes),
                g: 0,
            }))
        }
        (NormalFormKind::IrreducibleStandard(_), StratumKey::IrrA { a, b, r1, r2 }) => {
            if !diamond_check(a, b, p, a.len()) {
                return Ok(None);
            }
            Ok(irr_dimension_a(a, b, *r1, *r2, e, p))
        }
        (NormalFormKind::IrreducibleStandard(_), StratumKey::IrrB { a, b, r1, r2 }) => {
            if a.len() == 1 || !diamond_check(a, b, p, a.len()) {
                return Ok(None);
            }
            irr_dimension_b(a, b, *r1, *r2, e, p)
        }
        _ => Err(Error::Unsupported(format!("stratum {key} does not match the spec's normal form"))),
    }
}

/// Every key the formula layer considers for the spec, with its cell.
pub fn candidate_keys(kind: &NormalFormKind, n: usize, e: i64, p: i64) -> Result<Vec<StratumKey>> {
    let mut out = Vec::new();
    match kind {
        NormalFormKind::ReducibleTriangular(f) => {
            for (a, b) in boxes(n, &vec![(0, e); 2 * n]) {
                let da: Vec<i64> = (0..n).map(|i| a[i] - f.a0[i]).collect();
                let db: Vec<i64> = (0..n).map(|i| b[i] - f.b0[i]).collect();
                if solve_cycle(&da, p).is_some() && solve_cycle(&db, p).is_some() {
                    out.push(StratumKey::Reducible { a, b });
                }
            }
        }
        NormalFormKind::IrreducibleStandard(f) => {
            let mut ranges = vec![(0, e); 2 * n];
            ranges[0] = (-(e / (p - 1)), e);
            ranges[n] = (0, p * e / (p - 1));
            for (a, b) in boxes(n, &ranges) {
                if !diamond_check(&a, &b, p, n) || irr_st(f, &a, &b, p).is_none() {
                    continue;
                }
                out.extend(irr_substrata(&a, &b, e, p));
            }
        }
        NormalFormKind::Other => {
            return Err(Error::Unsupported("spec is in neither normal form".into()));
        }
    }
    Ok(out)
}

/// `(s, t)` with the given irreducible indices `(a, b)`, when integral.
pub fn irr_st(f: &crate::phimod::IrreducibleForm, a: &[i64], b: &[i64], p: i64) -> Option<(Vec<i64>, Vec<i64>)> {
    let n = a.len();
    // Cycle s_1 -> t_2 -> ... -> t_n -> t_1 -> s_2 -> ... -> s_n -> s_1.
    let mut d = vec![a[0] - f.a0[0]];
    for j in 1..n {
        d.push(b[j] - f.b0[j]);
    }
    d.push(b[0] - f.m);
    for j in 1..n {
        d.push(a[j] - f.a0[j]);
    }
    if n == 1 {
        d = vec![a[0] - f.a0[0], b[0] - f.m];
    }
    let x = solve_cycle(&d, p)?;
    let mut s = vec![0; n];
    let mut t = vec![0; n];
    s[0] = x[0];
    if n == 1 {
        t[0] = x[1];
    } else {
        t[1..n].copy_from_slice(&x[1..n]);
        t[0] = x[n];
        s[1..n].copy_from_slice(&x[n + 1..2 * n]);
    }
    Some((s, t))
}

fn boxes(n: usize, ranges: &[(i64, i64)]) -> Vec<(Vec<i64>, Vec<i64>)> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; 2 * n];
    fn rec(k: usize, ranges: &[(i64, i64)], cur: &mut Vec<i64>, n: usize, out: &mut Vec<(Vec<i64>, Vec<i64>)>) {
        if k == cur.len() {
            out.push((cur[..n].to_vec(), cur[n..].to_vec()));
            return;
        }
        for x in ranges[k].0..=ranges[k].1 {
            cur[k] = x;
            rec(k + 1, ranges, cur, n, out);
        }
    }
    rec(0, ranges, &mut cur, n, &mut out);
    out
}
