//! Brute-force enumerations of the defining inequality sets, shared by the
//! formula tests and the acceptance target.
#![allow(dead_code)]

use kisin_core::strata::{red_card_chain, red_card_cycle, red_card_s, red_card_t};
use kisin_core::zeta::split_e;
use rand::Rng;

fn prev(i: usize, n: usize) -> usize {
    (i + n - 1) % n
}

fn low(a: &[i64], b: &[i64], i: usize, e: i64) -> i64 {
    a[i].min(e - b[i])
}

/// `r` with `1 <= r`, `r <= a_{i-1}`, `r <= e - b_{i-1}`, `p r <= e - a_i`, `p r <= b_i`.
pub fn brute_s(a: &[i64], b: &[i64], i: usize, e: i64, p: i64) -> i64 {
    let j = prev(i, a.len());
    (1..=e + 2)
        .filter(|&r| r <= a[j] && r <= e - b[j] && p * r <= e - a[i] && p * r <= b[i])
        .count() as i64
}

/// `m` with `min(a_{i-1}, e - b_{i-1}) < pm + a_{i-1} - b_{i-1}` and `p (pm + a_{i-1} - b_{i-1}) <= min(e - a_i, b_i)`.
pub fn brute_t(a: &[i64], b: &[i64], i: usize, e: i64, p: i64) -> i64 {
    let j = prev(i, a.len());
    (-(2 * e + 4)..=2 * e + 4)
        .filter(|&m| {
            let x = p * m + a[j] - b[j];
            low(a, b, j, e) < x && p * x <= e - a[i] && p * x <= b[i]
        })
        .count() as i64
}

/// Every integer tuple in `[lo, hi]^len`.
fn tuples(len: usize, lo: i64, hi: i64) -> impl Iterator<Item = Vec<i64>> {
    let width = (hi - lo + 1) as u64;
    (0..width.pow(len as u32)).map(move |mut k| {
        (0..len)
            .map(|_| {
                let d = (k % width) as i64;
                k /= width;
                lo + d
            })
            .collect()
    })
}

/// Tuples `(r_i, ..., r_{i+j})` in a box satisfying the chain conditions.
pub fn brute_chain(a: &[i64], b: &[i64], i: usize, j: usize, e: i64, p: i64) -> i64 {
    let n = a.len();
    if j == 0 || j >= n {
        return 0;
    }
    tuples(j + 1, -e - 2, e + 2)
        .filter(|r| {
            if !(1 <= r[0] && r[0] <= low(a, b, prev(i, n), e)) {
                return false;
            }
            for l in 0..j {
                let c = (i + l) % n;
                if r[l + 1] != p * r[l] + a[c] - b[c] || r[l + 1] <= low(a, b, c, e) {
                    return false;
                }
            }
            let t = (i + j) % n;
            p * r[j] <= e - a[t] && p * r[j] <= b[t]
        })
        .count() as i64
}

/// Cyclic tuples with `r_{i+1} = p r_i + a_i - b_i` and `r_{i+1} > min(a_i, e - b_i)`.
pub fn brute_cycle(a: &[i64], b: &[i64], e: i64, p: i64, closes: bool) -> i64 {
    let n = a.len();
    let found = tuples(n, -e - 2, e + 2)
        .filter(|r| {
            (0..n).all(|i| {
                let nx = r[(i + 1) % n];
                nx == p * r[i] + a[i] - b[i] && nx > low(a, b, i, e)
            })
        })
        .count() as i64;
    if closes {
        found
    } else {
        0
    }
}

#[derive(Debug)]
pub struct Key {
    pub p: i64,
    pub e: i64,
    pub a: Vec<i64>,
    pub b: Vec<i64>,
}

pub fn random_key<R: Rng>(rng: &mut R, primes: &[i64], max_n: usize, max_e: i64) -> Key {
    let p = primes[rng.gen_range(0..primes.len())];
    let n = rng.gen_range(1..=max_n);
    let e = rng.gen_range(0..=max_e);
    let a = (0..n).map(|_| rng.gen_range(0..=e)).collect();
    let b = (0..n).map(|_| rng.gen_range(0..=e)).collect();
    Key { p, e, a, b }
}

/// Compares all four cardinality formulas with brute force on one key.
pub fn check_key(k: &Key) -> Result<(), String> {
    let n = k.a.len();
    let (a, b, e, p) = (&k.a[..], &k.b[..], k.e, k.p);
    for i in 0..n {
        let (f, g) = (red_card_s(a, b, i, e, p), brute_s(a, b, i, e, p));
        if f != g {
            return Err(format!("S_{i} at {k:?}: formula {f}, brute force {g}"));
        }
        let (f, g) = (red_card_t(a, b, i, e, p), brute_t(a, b, i, e, p));
        if f != g {
            return Err(format!("T_{i} at {k:?}: formula {f}, brute force {g}"));
        }
        for j in 1..n {
            let (f, g) = (red_card_chain(a, b, i, j, e, p), brute_chain(a, b, i, j, e, p));
            if f != g {
                return Err(format!("chain ({i},{j}) at {k:?}: formula {f}, brute force {g}"));
            }
        }
    }
    for closes in [false, true] {
        let (f, g) = (red_card_cycle(a, b, e, p, closes), brute_cycle(a, b, e, p, closes));
        if f != g {
            return Err(format!("cycle (closes={closes}) at {k:?}: formula {f}, brute force {g}"));
        }
        if !(0..=1).contains(&f) {
            return Err(format!("cycle count {f} at {k:?}"));
        }
    }
    Ok(())
}

/// Calls `f` on every `(a, b)` in the box `[0, e]^{2n}`.
pub fn for_each_key(n: usize, e: i64, mut f: impl FnMut(&[i64], &[i64])) {
    let w = (e + 1) as u64;
    let total = w.pow(2 * n as u32);
    let mut ab = vec![0i64; 2 * n];
    for mut k in 0..total {
        for x in ab.iter_mut() {
            *x = (k % w) as i64;
            k /= w;
        }
        f(&ab[..n], &ab[n..]);
    }
}

pub fn s_plus_t(a: &[i64], b: &[i64], i: usize, e: i64, p: i64) -> i64 {
    red_card_s(a, b, i, e, p) + red_card_t(a, b, i, e, p)
}

/// The pointwise bound on `|S_i| + |T_i|` and its equality characterization.
pub fn check_star(n: usize, e: i64, p: i64) -> Result<u64, String> {
    let mut err = None;
    let mut checked = 0u64;
    for_each_key(n, e, |a, b| {
        if err.is_some() {
            return;
        }
        for i in 0..n {
            let j = prev(i, n);
            let lhs = s_plus_t(a, b, i, e, p);
            let rhs = ((e - a[i]) / p).min(b[i] / p);
            let diff = rhs - low(a, b, j, e);
            let eq = diff <= 0 || (diff == 1 && ((e - a[j]).min(b[j]) + 1) % p == 0);
            checked += 1;
            if lhs > rhs || (lhs == rhs) != eq {
                err = Some(format!(
                    "p={p} e={e} a={a:?} b={b:?} i={i}: |S|+|T| = {lhs}, bound {rhs}, equality predicted {eq}"
                ));
                return;
            }
        }
    });
    err.map_or(Ok(checked), Err)
}

/// `|T_i| <= 1` and the two propagation implications at every maximizer of `sum(|S_i| + |T_i|)`.
pub fn check_maximizer_bounds(n: usize, e: i64, p: i64) -> Result<usize, String> {
    let mut best = -1;
    let mut argmax: Vec<(Vec<i64>, Vec<i64>)> = Vec::new();
    for_each_key(n, e, |a, b| {
        let total: i64 = (0..n).map(|i| s_plus_t(a, b, i, e, p)).sum();
        if total > best {
            best = total;
            argmax.clear();
        }
        if total == best {
            argmax.push((a.to_vec(), b.to_vec()));
        }
    });
    let (e0, e1) = split_e(p, e);
    for (a, b) in &argmax {
        let st: Vec<i64> = (0..n).map(|i| s_plus_t(a, b, i, e, p)).collect();
        let ctx = || format!("p={p} e={e} a={a:?} b={b:?} |S|+|T|={st:?}");
        for i in 0..n {
            let t = red_card_t(a, b, i, e, p);
            if t > 1 {
                return Err(format!("|T_{i}| = {t} at maximizer {}", ctx()));
            }
            let (nx, nx2) = (st[(i + 1) % n], st[(i + 2) % n]);
            let l = st[i] - e0;
            if l >= 1 && nx > e0 + e1 - p * l + 1 {
                return Err(format!("propagation (A) fails at i={i}, {}", ctx()));
            }
            if st[i] == e0 + 1 && nx == e0 + e1 - p + 1 && nx2 > e0 - (p - 1) * e1 + 1 {
                return Err(format!("propagation (B) fails at i={i}, {}", ctx()));
            }
        }
    }
    Ok(argmax.len())
}

/// Chains ending in component `h` inject into `T_h`.
pub fn check_chain_injection(n: usize, e: i64, p: i64) -> Result<(), String> {
    let mut err = None;
    for_each_key(n, e, |a, b| {
        for h in 0..n {
            let chains: i64 = (1..n)
                .map(|j| red_card_chain(a, b, (h + n - j) % n, j, e, p))
                .sum();
            let t = red_card_t(a, b, h, e, p);
            if chains > t && err.is_none() {
                err = Some(format!("p={p} e={e} a={a:?} b={b:?}: chains into {h} = {chains} > |T| = {t}"));
            }
        }
    });
    err.map_or(Ok(()), Err)
}
