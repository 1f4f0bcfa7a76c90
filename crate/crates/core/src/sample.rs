//! Random specs in either normal form, for sweeps and benchmarks.

use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::gf::{FieldSpec, Fq};
use crate::laurent::{precision_cap, TruncatedLaurentSeries as Series};
use crate::phimod::{detect_normal_form, Matrix2, NormalFormKind, PhiModuleSpec};
use crate::zeta::Case;

fn nonzero<R: Rng>(rng: &mut R, f: &FieldSpec) -> Fq {
    Fq(rng.gen_range(1..f.size() as u32))
}

fn mono(f: &Arc<FieldSpec>, c: Fq, k: i64, cap: i64) -> Series {
    Series::exact(f.clone(), [(k, c)], cap)
}

/// A random spec in the requested normal form with exponents in `0..=e`.
///
/// Reducible specs are upper triangular with a random off-diagonal polynomial
/// of nonnegative valuation; irreducible specs are resampled until the
/// divisibility condition on `m` holds.
pub fn random_spec<R: Rng>(rng: &mut R, p: u32, n: usize, e: u32, case: Case) -> Result<PhiModuleSpec> {
    let cap = precision_cap(e, p);
    let ei = e as i64;
    let r = match case {
        Case::Reducible => n,
        Case::Irreducible => 2 * n,
    } as u32;
    let f = FieldSpec::get(p, r)?;
    loop {
        let mut mats = Vec::with_capacity(n);
        for i in 0..n {
            let zero = Series::exact(f.clone(), [], cap);
            let (x, y) = (rng.gen_range(0..=ei), rng.gen_range(0..=ei));
            let (alpha, beta) = (nonzero(rng, &f), nonzero(rng, &f));
            let m = match case {
                Case::Irreducible if i == 0 => Matrix2::new(
                    zero.clone(),
                    mono(&f, alpha, x, cap),
                    mono(&f, beta, y, cap),
                    zero,
                ),
                Case::Irreducible => Matrix2::new(mono(&f, alpha, x, cap), zero.clone(), zero.clone(), mono(&f, beta, y, cap)),
                Case::Reducible => {
                    let w = if rng.gen_bool(0.5) {
                        zero.clone()
                    } else {
                        let mut terms = Vec::new();
                        for k in 0..=ei {
                            if rng.gen_bool(0.3) {
                                terms.push((k, Fq(rng.gen_range(0..f.size() as u32))));
                            }
                        }
                        Series::exact(f.clone(), terms, cap)
                    };
                    Matrix2::new(mono(&f, alpha, x, cap), w, zero.clone(), mono(&f, beta, y, cap))
                }
            };
            mats.push(m);
        }
        let spec = PhiModuleSpec::new(p, n, e, f.clone(), mats)?;
        match detect_normal_form(&spec) {
            Ok(NormalFormKind::Other) | Err(_) => continue,
            Ok(_) => return Ok(spec),
        }
    }
}
