//! Rank-2 phi-modules given by n-tuples of 2x2 matrices, lattices in
//! triangular coordinates, base change and the model predicate.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{FieldDescriptor, FieldSpec, Fq};
use crate::laurent::{precision_cap, FrobeniusSemantics, TruncatedLaurentSeries as Series, Valuation};

/// A 2x2 matrix of series, row-major `(a11, a12, a21, a22)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix2 {
    pub m: [Series; 4],
}

impl Matrix2 {
    pub fn new(a11: Series, a12: Series, a21: Series, a22: Series) -> Self {
        Matrix2 {
            m: [a11, a12, a21, a22],
        }
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        self.m[0].spec()
    }

    pub fn a11(&self) -> &Series {
        &self.m[0]
    }
    pub fn a12(&self) -> &Series {
        &self.m[1]
    }
    pub fn a21(&self) -> &Series {
        &self.m[2]
    }
    pub fn a22(&self) -> &Series {
        &self.m[3]
    }

    pub fn identity(spec: Arc<FieldSpec>, cap: i64) -> Self {
        let one = Series::exact(spec.clone(), [(0, Fq::ONE)], cap);
        let zero = Series::zero(spec, cap);
        Matrix2::new(one.clone(), zero.clone(), zero, one)
    }

    /// `[[u^s, v], [0, u^t]]`.
    pub fn triangular(s: i64, t: i64, v: Series, cap: i64) -> Self {
        let spec = v.spec().clone();
        Matrix2::new(
            Series::exact(spec.clone(), [(s, Fq::ONE)], cap),
            v,
            Series::zero(spec.clone(), cap + s.min(t)),
            Series::exact(spec, [(t, Fq::ONE)], cap),
        )
    }

    pub fn mul(&self, o: &Matrix2) -> Result<Matrix2> {
        let [a, b, c, d] = &self.m;
        let [x, y, z, w] = &o.m;
        Ok(Matrix2::new(
            a.mul(x)?.add(&b.mul(z)?)?,
            a.mul(y)?.add(&b.mul(w)?)?,
            c.mul(x)?.add(&d.mul(z)?)?,
            c.mul(y)?.add(&d.mul(w)?)?,
        ))
    }

    pub fn det(&self) -> Result<Series> {
        let [a, b, c, d] = &self.m;
        a.mul(d)?.sub(&b.mul(c)?)
    }

    /// Adjugate `[[d, -b], [-c, a]]`.
    pub fn adjugate(&self) -> Matrix2 {
        let [a, b, c, d] = &self.m;
        Matrix2::new(d.clone(), b.neg(), c.neg(), a.clone())
    }

    pub fn inverse(&self) -> Result<Matrix2> {
        let det = self.det()?;
        if det.is_zero() {
            return Err(Error::Domain("matrix is not invertible to the available precision".into()));
        }
        let dinv = det.invert_max()?;
        let adj = self.adjugate();
        Ok(Matrix2 {
            m: [
                adj.m[0].mul(&dinv)?,
                adj.m[1].mul(&dinv)?,
                adj.m[2].mul(&dinv)?,
                adj.m[3].mul(&dinv)?,
            ],
        })
    }

    pub fn phi(&self, sem: FrobeniusSemantics) -> Matrix2 {
        Matrix2 {
            m: self.m.clone().map(|x| x.phi_component(sem)),
        }
    }
}

/// The data `(p, n, e)` together with the matrices `A_1..A_n` over `F`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiModuleSpec {
    pub p: u32,
    pub n: usize,
    pub e: u32,
    pub field: Arc<FieldSpec>,
    pub matrices: Vec<Matrix2>,
}

impl PhiModuleSpec {
    /// Validates dimensions, characteristic and invertibility.
    pub fn new(p: u32, n: usize, e: u32, field: Arc<FieldSpec>, matrices: Vec<Matrix2>) -> Result<Self> {
        if field.p() != p {
            return Err(Error::InvalidInput(format!(
                "field characteristic {} differs from p = {p}",
                field.p()
            )));
        }
        if n == 0 || matrices.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected n = {n} >= 1 matrices, found {}",
                matrices.len()
            )));
        }
        for (i, a) in matrices.iter().enumerate() {
            if a.m.iter().any(|x| x.spec() != &field) {
                return Err(Error::SpecMismatch(format!("matrix {} has entries over another field", i + 1)));
            }
            if a.det()?.is_zero() {
                return Err(Error::NonInvertible { index: i + 1 });
            }
        }
        Ok(PhiModuleSpec {
            p,
            n,
            e,
            field,
            matrices,
        })
    }

    /// Precision cap used for exact inputs of this spec.
    pub fn cap(&self) -> i64 {
        precision_cap(self.e, self.p)
    }

    /// `q = p^n`.
    pub fn q(&self) -> u64 {
        (self.p as u64).pow(self.n as u32)
    }

    /// Same matrices, entries embedded into the extension of degree `k`.
    pub fn base_extend(&self, k: u32) -> Result<PhiModuleSpec> {
        let target = FieldSpec::get(self.p, self.field.r() * k)?;
        let emb = crate::gf::Embedding::get(&self.field, &target)?;
        let matrices = self
            .matrices
            .iter()
            .map(|a| Matrix2 {
                m: a.m.clone().map(|x| {
                    Series::from_terms(
                        target.clone(),
                        x.terms().iter().map(|&(e, c)| (e, emb.apply(c))),
                        x.prec(),
                    )
                }),
            })
            .collect();
        Ok(PhiModuleSpec {
            p: self.p,
            n: self.n,
            e: self.e,
            field: target,
            matrices,
        })
    }
}

/// `A'_i = phi(B_i) A_i B_{i+1}^{-1}`, indices cyclic.
pub fn transform_basis(spec: &PhiModuleSpec, b: &[Matrix2], sem: FrobeniusSemantics) -> Result<PhiModuleSpec> {
    if b.len() != spec.n {
        return Err(Error::InvalidInput(format!("expected {} base-change matrices, found {}", spec.n, b.len())));
    }
    let inverses = b.iter().map(Matrix2::inverse).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let a = b[i].phi(sem).mul(&spec.matrices[i])?.mul(&inverses[(i + 1) % spec.n])?;
        out.push(a);
    }
    Ok(PhiModuleSpec {
        matrices: out,
        ..spec.clone()
    })
}

/// Valuation is at least `bound`; errors when the precision does not decide it.
fn val_at_least(x: &Series, bound: i64) -> Result<bool> {
    match x.valuation() {
        Valuation::Finite(v) => Ok(v >= bound),
        Valuation::Infinity if x.prec() >= bound => Ok(true),
        Valuation::Infinity => Err(Error::Precision(format!(
            "series known only modulo u^{}, cannot decide valuation >= {bound}",
            x.prec()
        ))),
    }
}

/// Whether every `A_i` and every `u^e A_i^{-1}` is integral.
pub fn is_model(spec: &PhiModuleSpec) -> Result<bool> {
    for a in &spec.matrices {
        let det = a.det()?;
        let dv = det.valuation().finite().ok_or(Error::Precision(
            "determinant is zero to the available precision".into(),
        ))?;
        // u^e A^{-1} = u^{e} adj(A) / det(A): integral iff adj entries have valuation >= v(det) - e.
        let bound = 0i64.max(dv - spec.e as i64);
        for x in &a.m {
            if !val_at_least(x, bound)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A lattice `[[u^{s_i}, v_i], [0, u^{t_i}]]` in each component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeCoord {
    pub s: Vec<i64>,
    pub t: Vec<i64>,
    pub v: Vec<Series>,
}

impl LatticeCoord {
    pub fn base_change(&self, cap: i64) -> Vec<Matrix2> {
        (0..self.s.len())
            .map(|i| Matrix2::triangular(self.s[i], self.t[i], self.v[i].clone(), cap))
            .collect()
    }
}

/// Reduces each `v_i` modulo `u^{t_i}`.
pub fn canonicalize(coord: &LatticeCoord) -> Result<LatticeCoord> {
    let v = coord
        .v
        .iter()
        .zip(&coord.t)
        .map(|(x, &t)| x.reduce_mod_power(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(LatticeCoord {
        s: coord.s.clone(),
        t: coord.t.clone(),
        v,
    })
}

/// Triangular data `A_i = [[alpha_i u^{a0_i}, w0_i], [0, beta_i u^{b0_i}]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducibleForm {
    pub alpha: Vec<Fq>,
    pub beta: Vec<Fq>,
    pub a0: Vec<i64>,
    pub b0: Vec<i64>,
    pub w0: Vec<Series>,
}

/// Antidiagonal first matrix `[[0, alpha_1 u^{a0_1}], [beta_1 u^m, 0]]` and
/// diagonal `diag(alpha_i u^{a0_i}, beta_i u^{b0_i})` for `i >= 2`.
///
/// The standard form has every `a0_i = b0_i = 0` and `alpha_i = beta_i` for
/// `i >= 2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrreducibleForm {
    pub m: i64,
    pub alpha: Vec<Fq>,
    pub beta: Vec<Fq>,
    pub a0: Vec<i64>,
    pub b0: Vec<i64>,
}

impl IrreducibleForm {
    /// The exponent that plays the role of `m` after scaling the basis to
    /// the standard form; `(q+1)` must not divide it.
    pub fn effective_m(&self, p: u32) -> i64 {
        let n = self.a0.len();
        let p = p as i64;
        let mut x = p.pow(n as u32 - 1) * self.a0[0];
        let mut y = p.pow(n as u32 - 1) * self.m;
        for j in 1..n {
            let w = p.pow((n - 1 - j) as u32);
            x += w * self.b0[j];
            y += w * self.a0[j];
        }
        y - x
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NormalFormKind {
    ReducibleTriangular(ReducibleForm),
    IrreducibleStandard(IrreducibleForm),
    Other,
}

fn monomial(x: &Series) -> Option<(i64, Fq)> {
    match x.terms() {
        [(e, c)] => Some((*e, *c)),
        _ => None,
    }
}

/// Classifies the spec as triangular, irreducible normal form, or neither.
pub fn detect_normal_form(spec: &PhiModuleSpec) -> Result<NormalFormKind> {
    if let Some(f) = detect_reducible(spec) {
        return Ok(NormalFormKind::ReducibleTriangular(f));
    }
    if let Some(f) = detect_irreducible(spec) {
        let q = spec.q();
        let m_eff = f.effective_m(spec.p);
        if m_eff.rem_euclid(q as i64 + 1) == 0 {
            return Err(Error::DivisibleExponent { q, m: m_eff });
        }
        if !(spec.field.r() as usize).is_multiple_of(2 * spec.n) {
            return Err(Error::InvalidInput(format!(
                "irreducible form needs 2n = {} to divide the field degree r = {}",
                2 * spec.n,
                spec.field.r()
            )));
        }
        return Ok(NormalFormKind::IrreducibleStandard(f));
    }
    Ok(NormalFormKind::Other)
}

fn detect_reducible(spec: &PhiModuleSpec) -> Option<ReducibleForm> {
    let mut f = ReducibleForm {
        alpha: vec![],
        beta: vec![],
        a0: vec![],
        b0: vec![],
        w0: vec![],
    };
    for a in &spec.matrices {
        if !a.a21().is_zero() {
            return None;
        }
        let (ea, ca) = monomial(a.a11())?;
        let (eb, cb) = monomial(a.a22())?;
        if let Valuation::Finite(v) = a.a12().valuation() {
            if v < 0 {
                return None;
            }
        }
        f.alpha.push(ca);
        f.beta.push(cb);
        f.a0.push(ea);
        f.b0.push(eb);
        f.w0.push(a.a12().clone());
    }
    Some(f)
}

fn detect_irreducible(spec: &PhiModuleSpec) -> Option<IrreducibleForm> {
    let mut f = IrreducibleForm {
        m: 0,
        alpha: vec![],
        beta: vec![],
        a0: vec![],
        b0: vec![],
    };
    let first = &spec.matrices[0];
    if !first.a11().is_zero() || !first.a22().is_zero() {
        return None;
    }
    let (e12, c12) = monomial(first.a12())?;
    let (e21, c21) = monomial(first.a21())?;
    f.m = e21;
    f.alpha.push(c12);
    f.beta.push(c21);
    f.a0.push(e12);
    f.b0.push(e21);
    for a in &spec.matrices[1..] {
        if !a.a12().is_zero() || !a.a21().is_zero() {
            return None;
        }
        let (ea, ca) = monomial(a.a11())?;
        let (eb, cb) = monomial(a.a22())?;
        f.alpha.push(ca);
        f.beta.push(cb);
        f.a0.push(ea);
        f.b0.push(eb);
    }
    Some(f)
}

/// A matrix entry in spec files: sorted `[exponent, coefficient-vector]` pairs.
pub type EntryJson = Vec<(i64, Vec<u32>)>;

/// The on-disk form of a [`PhiModuleSpec`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub p: u32,
    pub n: usize,
    pub e: u32,
    pub field: FieldDescriptor,
    pub matrices: Vec<[EntryJson; 4]>,
}

impl SpecFile {
    pub fn from_spec(spec: &PhiModuleSpec) -> SpecFile {
        SpecFile {
            p: spec.p,
            n: spec.n,
            e: spec.e,
            field: spec.field.descriptor(),
            matrices: spec
                .matrices
                .iter()
                .map(|a| a.m.clone().map(|x| x.to_pairs()))
                .collect(),
        }
    }

    pub fn to_spec(&self) -> Result<PhiModuleSpec> {
        let field = FieldSpec::from_descriptor(self.field)
            .map_err(|e| Error::InvalidInput(format!("bad field: {e}")))?;
        let cap = precision_cap(self.e, self.p);
        let mut matrices = Vec::with_capacity(self.matrices.len());
        for entries in &self.matrices {
            let mut m = Vec::with_capacity(4);
            for entry in entries {
                let series = Series::from_pairs(field.clone(), entry, cap)
                    .map_err(|e| Error::InvalidInput(format!("bad matrix entry: {e}")))?;
                m.push(series);
            }
            let [a, b, c, d]: [Series; 4] = m.try_into().expect("four entries");
            matrices.push(Matrix2::new(a, b, c, d));
        }
        PhiModuleSpec::new(self.p, self.n, self.e, field, matrices)
    }
}

/// Serializes a spec to pretty JSON.
pub fn emit_spec_json(spec: &PhiModuleSpec) -> String {
    let mut s = serde_json::to_string_pretty(&SpecFile::from_spec(spec)).expect("serializable");
    s.push('\n');
    s
}

/// Parses and validates a spec, running normal-form detection eagerly.
pub fn parse_spec_json(text: &str) -> Result<(PhiModuleSpec, NormalFormKind)> {
    let file: SpecFile =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed spec JSON: {e}")))?;
    let spec = file.to_spec()?;
    let kind = detect_normal_form(&spec)?;
    Ok((spec, kind))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(spec: &Arc<FieldSpec>, k: i64) -> Series {
        Series::exact(spec.clone(), [(k, Fq::ONE)], 40)
    }

    fn diag(spec: &Arc<FieldSpec>, a: i64, b: i64) -> Matrix2 {
        Matrix2::new(
            mono(spec, a),
            Series::zero(spec.clone(), 40),
            Series::zero(spec.clone(), 40),
            mono(spec, b),
        )
    }

    #[test]
    fn diagonal_base_change() {
        let f = FieldSpec::get(3, 1).unwrap();
        let spec = PhiModuleSpec::new(3, 1, 2, f.clone(), vec![diag(&f, 2, 2)]).unwrap();
        let b = vec![diag(&f, 0, -1)];
        let out = transform_basis(&spec, &b, FrobeniusSemantics::Linear).unwrap();
        assert_eq!(out.matrices[0].a11().terms(), &[(2, Fq::ONE)]);
        assert_eq!(out.matrices[0].a22().terms(), &[(0, Fq::ONE)]);
    }

    #[test]
    fn model_predicate_on_diagonals() {
        let f = FieldSpec::get(3, 1).unwrap();
        let good = PhiModuleSpec::new(3, 1, 2, f.clone(), vec![diag(&f, 2, 0)]).unwrap();
        let bad = PhiModuleSpec::new(3, 1, 2, f.clone(), vec![diag(&f, 3, 0)]).unwrap();
        assert!(is_model(&good).unwrap());
        assert!(!is_model(&bad).unwrap());
    }

    #[test]
    fn detects_irreducible_and_rejects_divisible_m() {
        let f = FieldSpec::get(3, 2).unwrap();
        let anti = |m| {
            Matrix2::new(
                Series::zero(f.clone(), 40),
                mono(&f, 0),
                mono(&f, m),
                Series::zero(f.clone(), 40),
            )
        };
        let ok = PhiModuleSpec::new(3, 1, 4, f.clone(), vec![anti(3)]).unwrap();
        match detect_normal_form(&ok).unwrap() {
            NormalFormKind::IrreducibleStandard(form) => assert_eq!(form.m, 3),
            k => panic!("unexpected {k:?}"),
        }
        let bad = PhiModuleSpec::new(3, 1, 4, f.clone(), vec![anti(4)]).unwrap();
        assert!(matches!(
            detect_normal_form(&bad),
            Err(Error::DivisibleExponent { q: 3, m: 4 })
        ));
    }

    #[test]
    fn non_invertible_input_is_rejected() {
        let f = FieldSpec::get(3, 1).unwrap();
        let z = Matrix2::new(
            mono(&f, 0),
            mono(&f, 0),
            Series::zero(f.clone(), 40),
            Series::zero(f.clone(), 40),
        );
        assert!(matches!(
            PhiModuleSpec::new(3, 1, 2, f, vec![z]),
            Err(Error::NonInvertible { index: 1 })
        ));
    }
}
