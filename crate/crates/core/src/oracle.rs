//! Exhaustive enumeration of finite flat models in triangular coordinates.
//!
//! For fixed `(s, t)` the model condition on `A'_i = phi(B_i) A_i B_{i+1}^{-1}`
//! is a system of polynomial equations in the coefficients of the `v_i`.
//! Every equation is linear except for the product `phi(v_i) a21_i v_{i+1}`.
//! The linear part is solved exactly. The remaining parameters are then fixed
//! one at a time, lowest coefficient first; each fixed value turns some products
//! into linear terms, and once no product is left the linear system is counted.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{FieldSpec, Fq};
use crate::laurent::{FrobeniusSemantics, TruncatedLaurentSeries as Series};
use crate::linalg::Echelon;
use crate::phimod::{detect_normal_form, LatticeCoord, NormalFormKind, PhiModuleSpec};
use crate::strata::StratumKey;

/// Largest number of search nodes allowed for one cell.
const MAX_ENUMERATION: u128 = 50_000_000;

/// Search windows for the enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationWindows {
    pub st_lo: i64,
    pub st_hi: i64,
    pub v_floor: i64,
    pub ext_degree: u32,
}

impl EnumerationWindows {
    /// `s_i, t_i` in `[-(e+1), e+1]` and `v_floor = -(ceil(e/(p-1)) + e)`.
    pub fn default_for(p: u32, e: u32, ext_degree: u32) -> Self {
        let e = e as i64;
        let p = p as i64;
        EnumerationWindows {
            st_lo: -(e + 1),
            st_hi: e + 1,
            v_floor: -((e + p - 2) / (p - 1) + e),
            ext_degree,
        }
    }

    /// Every bound pushed out by one.
    pub fn widened(&self) -> Self {
        EnumerationWindows {
            st_lo: self.st_lo - 1,
            st_hi: self.st_hi + 1,
            v_floor: self.v_floor - 1,
            ext_degree: self.ext_degree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.st_lo > self.st_hi {
            return Err(Error::InvalidInput(format!(
                "empty s,t window {}..{}",
                self.st_lo, self.st_hi
            )));
        }
        if self.ext_degree == 0 {
            return Err(Error::InvalidInput("extension degree must be at least 1".into()));
        }
        Ok(())
    }
}

/// Knobs for [`enumerate_models`].
#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub semantics: FrobeniusSemantics,
    pub workers: usize,
    /// Points are listed explicitly when the total count is at most this.
    pub list_limit: u128,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            semantics: FrobeniusSemantics::Linear,
            workers: 1,
            list_limit: 0,
        }
    }
}

/// The models found within a window.
#[derive(Clone, Debug)]
pub struct PointSet {
    pub ext_degree: u32,
    pub field_size: u64,
    pub count: u128,
    /// Counts per stratum; empty for specs outside both normal forms.
    pub per_stratum: BTreeMap<StratumKey, u128>,
    /// Canonical points in sorted order, present when `count <= list_limit`.
    pub points: Option<Vec<LatticeCoord>>,
}

/// Sort key of a canonical coordinate: `(s, t, coefficients of each v_i)`.
pub fn point_sort_key(c: &LatticeCoord) -> (Vec<i64>, Vec<i64>, Vec<Vec<(i64, u32)>>) {
    (
        c.s.clone(),
        c.t.clone(),
        c.v.iter()
            .map(|x| x.terms().iter().map(|&(e, q)| (e, q.0)).collect())
            .collect(),
    )
}

/// Stratum of a canonical coordinate; `None` outside both normal forms.
pub fn classify_stratum(spec: &PhiModuleSpec, kind: &NormalFormKind, coord: &LatticeCoord) -> Option<StratumKey> {
    let (a, b) = stratum_ab(spec, kind, &coord.s, &coord.t)?;
    match kind {
        NormalFormKind::ReducibleTriangular(_) => Some(StratumKey::Reducible { a, b }),
        NormalFormKind::IrreducibleStandard(_) => {
            let r = |i: usize| -> i64 {
                match coord.v[i].valuation().finite() {
                    Some(low) => coord.t[i] - low,
                    None => 0,
                }
            };
            let r1 = r(0);
            let r2 = r(1 % spec.n);
            Some(irreducible_key(spec.e as i64, a, b, r1, r2))
        }
        NormalFormKind::Other => None,
    }
}

fn irreducible_key(e: i64, a: Vec<i64>, b: Vec<i64>, r1: i64, r2: i64) -> StratumKey {
    if (0..=e).contains(&a[0]) && (0..=e).contains(&b[0]) {
        StratumKey::IrrA { a, b, r1, r2 }
    } else {
        StratumKey::IrrB { a, b, r1, r2 }
    }
}

/// The valuation indices `(a, b)` of the stratum containing `(s, t)`.
pub fn stratum_ab(spec: &PhiModuleSpec, kind: &NormalFormKind, s: &[i64], t: &[i64]) -> Option<(Vec<i64>, Vec<i64>)> {
    let n = spec.n;
    let p = spec.p as i64;
    match kind {
        NormalFormKind::ReducibleTriangular(f) => {
            let a = (0..n).map(|i| f.a0[i] + p * s[i] - s[(i + 1) % n]).collect();
            let b = (0..n).map(|i| f.b0[i] + p * t[i] - t[(i + 1) % n]).collect();
            Some((a, b))
        }
        NormalFormKind::IrreducibleStandard(f) => {
            let mut a = vec![f.a0[0] + p * s[0] - t[1 % n]];
            let mut b = vec![f.m + p * t[0] - s[1 % n]];
            for i in 1..n {
                a.push(f.a0[i] + p * s[i] - s[(i + 1) % n]);
                b.push(f.b0[i] + p * t[i] - t[(i + 1) % n]);
            }
            Some((a, b))
        }
        NormalFormKind::Other => None,
    }
}

/// Whether counts are unchanged after widening every window bound by one.
pub fn saturation_check(spec: &PhiModuleSpec, win: &EnumerationWindows, cfg: &OracleConfig) -> Result<bool> {
    let cfg = OracleConfig { list_limit: 0, ..*cfg };
    let a = enumerate_models(spec, win, &cfg)?;
    let b = enumerate_models(spec, &win.widened(), &cfg)?;
    Ok(a.count == b.count && a.per_stratum == b.per_stratum)
}

/// Every canonical model within the windows, over the extension of degree `win.ext_degree`.
pub fn enumerate_models(spec: &PhiModuleSpec, win: &EnumerationWindows, cfg: &OracleConfig) -> Result<PointSet> {
    win.validate()?;
    let kind = detect_normal_form(spec)?;
    let ext = spec.base_extend(win.ext_degree)?;
    let big = ext.field.clone();
    let base = match cfg.semantics {
        FrobeniusSemantics::Linear => big.clone(),
        FrobeniusSemantics::PPower => FieldSpec::get(spec.p, 1)?,
    };
    let deg = match cfg.semantics {
        FrobeniusSemantics::Linear => 1,
        FrobeniusSemantics::PPower => big.r() as usize,
    };
    let basis: Vec<Fq> = (0..deg).map(|k| Fq((spec.p).pow(k as u32))).collect();
    let det_val = ext
        .matrices
        .iter()
        .map(|a| {
            a.det()?
                .valuation()
                .finite()
                .ok_or_else(|| Error::Precision("determinant vanishes to the available precision".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = Ctx {
        spec: &ext,
        kind: &kind,
        big,
        base,
        sem: cfg.semantics,
        deg,
        basis,
        v_floor: win.v_floor,
        det_val,
        list_limit: cfg.list_limit,
    };

    let cells = ctx.candidate_cells(win);
    let run = || -> Result<Vec<CellResult>> {
        cells
            .par_iter()
            .map(|(s, t)| ctx.solve_cell(s, t))
            .filter(|r| !matches!(r, Ok(c) if c.total == 0))
            .collect()
    };
    let results = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?
        .install(run)?;

    let mut count: u128 = 0;
    let mut per_stratum = BTreeMap::new();
    let mut points = Some(Vec::new());
    for r in results {
        count = count
            .checked_add(r.total)
            .ok_or_else(|| Error::Internal("point count overflow".into()))?;
        for (k, c) in r.per_stratum {
            *per_stratum.entry(k).or_insert(0u128) += c;
        }
        match (&mut points, r.points) {
            (Some(all), Some(mut pts)) => all.append(&mut pts),
            _ => points = None,
        }
    }
    if count > cfg.list_limit {
        points = None;
    }
    if let Some(pts) = points.as_mut() {
        pts.sort_by_cached_key(point_sort_key);
    }
    Ok(PointSet {
        ext_degree: win.ext_degree,
        field_size: ctx.big.size(),
        count,
        per_stratum,
        points,
    })
}

struct CellResult {
    total: u128,
    per_stratum: Vec<(StratumKey, u128)>,
    points: Option<Vec<LatticeCoord>>,
}

/// One equation `c + sum lin x + sum frob phi(x) + sum bil phi(x_a) x_b = 0` over F'.
#[derive(Default, Clone, Debug)]
struct RawEq {
    c: Fq,
    lin: Vec<(usize, Fq)>,
    frob: Vec<(usize, Fq)>,
    bil: Vec<(usize, usize, Fq)>,
}

impl RawEq {
    fn normalize(&mut self, f: &FieldSpec) {
        fn merge<K: Ord + Copy>(v: &mut Vec<(K, Fq)>, f: &FieldSpec) {
            v.sort_by_key(|x| x.0);
            let mut out: Vec<(K, Fq)> = Vec::with_capacity(v.len());
            for &(k, c) in v.iter() {
                match out.last_mut() {
                    Some(l) if l.0 == k => l.1 = f.add(l.1, c),
                    _ => out.push((k, c)),
                }
            }
            out.retain(|x| !x.1.is_zero());
            *v = out;
        }
        merge(&mut self.lin, f);
        merge(&mut self.frob, f);
        let mut bil: Vec<((usize, usize), Fq)> = self.bil.iter().map(|&(a, b, c)| ((a, b), c)).collect();
        merge(&mut bil, f);
        self.bil = bil.into_iter().map(|((a, b), c)| (a, b, c)).collect();
    }

    fn is_trivial(&self) -> bool {
        self.c.is_zero() && self.lin.is_empty() && self.frob.is_empty() && self.bil.is_empty()
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Const,
    Frob(usize),
    Lin(usize),
    Bil(usize, usize),
}

struct Term<'a> {
    h: i64,
    a: &'a Series,
    negate: bool,
    slot: Slot,
}

/// A variable written as `x0 + sum k[l] lambda_l`, with the same for `phi(x)`.
#[derive(Clone)]
struct Affine {
    x0: Fq,
    k: Vec<Fq>,
    px0: Fq,
    pk: Vec<Fq>,
}

/// `c + sum lin[l] lambda_l + sum g lambda_l lambda_l' = 0` over F'.
struct Quad {
    c: Fq,
    lin: Vec<Fq>,
    quad: Vec<(usize, usize, Fq)>,
}

/// Per-cell data shared by the search.
struct Search<'c> {
    quads: Vec<Quad>,
    forms: Vec<Vec<(Fq, Vec<Fq>)>>,
    irreducible: bool,
    nodes: &'c AtomicU64,
}

type Tally = BTreeMap<(i64, i64), u128>;

struct Ctx<'a> {
    spec: &'a PhiModuleSpec,
    kind: &'a NormalFormKind,
    big: Arc<FieldSpec>,
    base: Arc<FieldSpec>,
    sem: FrobeniusSemantics,
    deg: usize,
    basis: Vec<Fq>,
    v_floor: i64,
    det_val: Vec<i64>,
    list_limit: u128,
}

impl<'a> Ctx<'a> {
    fn phi(&self, x: Fq) -> Fq {
        match self.sem {
            FrobeniusSemantics::Linear => x,
            FrobeniusSemantics::PPower => self.big.frobenius(x),
        }
    }

    fn c_bound(&self, s: &[i64], t: &[i64], i: usize) -> i64 {
        let n = self.spec.n;
        let i1 = (i + 1) % n;
        let p = self.spec.p as i64;
        let delta = p * (s[i] + t[i]) - s[i1] - t[i1] + self.det_val[i];
        0.max(delta - self.spec.e as i64)
    }

    /// `(s, t)` in the window that pass the variable-free part of the model condition.
    fn candidate_cells(&self, win: &EnumerationWindows) -> Vec<(Vec<i64>, Vec<i64>)> {
        let n = self.spec.n;
        let width = (win.st_hi - win.st_lo + 1) as usize;
        let total = width.pow(2 * n as u32);
        let mut out = Vec::new();
        let mut st = vec![0i64; 2 * n];
        for idx in 0..total {
            let mut r = idx;
            for x in st.iter_mut() {
                *x = win.st_lo + (r % width) as i64;
                r /= width;
            }
            let (s, t) = st.split_at(n);
            if self.prefilter(s, t) {
                out.push((s.to_vec(), t.to_vec()));
            }
        }
        out
    }

    fn prefilter(&self, s: &[i64], t: &[i64]) -> bool {
        let n = self.spec.n;
        let p = self.spec.p as i64;
        for i in 0..n {
            let i1 = (i + 1) % n;
            let c = self.c_bound(s, t, i);
            let a = &self.spec.matrices[i];
            let val = |x: &Series| x.valuation().finite();
            match val(a.a21()) {
                Some(v21) => {
                    if v21 + p * t[i] - s[i1] < c {
                        return false;
                    }
                }
                None => {
                    if let Some(v) = val(a.a11()) {
                        if v + p * s[i] - s[i1] < c {
                            return false;
                        }
                    }
                    if let Some(v) = val(a.a22()) {
                        if v + p * t[i] - t[i1] < c {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn nvars(&self, t: &[i64]) -> (Vec<usize>, usize) {
        let mut offsets = Vec::with_capacity(t.len());
        let mut total = 0;
        for &ti in t {
            offsets.push(total);
            total += (ti - self.v_floor).max(0) as usize;
        }
        (offsets, total)
    }

    fn build_equations(&self, s: &[i64], t: &[i64], offsets: &[usize]) -> Result<Vec<RawEq>> {
        let n = self.spec.n;
        let p = self.spec.p as i64;
        let vf = self.v_floor;
        let f = &*self.big;
        let mut eqs = Vec::new();
        for i in 0..n {
            let i1 = (i + 1) % n;
            let a = &self.spec.matrices[i];
            let (si, ti, s1, t1) = (s[i], t[i], s[i1], t[i1]);
            let c = self.c_bound(s, t, i);
            let entries: [Vec<Term>; 4] = [
                vec![
                    Term { h: p * si - s1, a: a.a11(), negate: false, slot: Slot::Const },
                    Term { h: -s1, a: a.a21(), negate: false, slot: Slot::Frob(i) },
                ],
                vec![
                    Term { h: p * si - t1, a: a.a12(), negate: false, slot: Slot::Const },
                    Term { h: -t1, a: a.a22(), negate: false, slot: Slot::Frob(i) },
                    Term { h: p * si - s1 - t1, a: a.a11(), negate: true, slot: Slot::Lin(i1) },
                    Term { h: -s1 - t1, a: a.a21(), negate: true, slot: Slot::Bil(i, i1) },
                ],
                vec![Term { h: p * ti - s1, a: a.a21(), negate: false, slot: Slot::Const }],
                vec![
                    Term { h: p * ti - t1, a: a.a22(), negate: false, slot: Slot::Const },
                    Term { h: p * ti - s1 - t1, a: a.a21(), negate: true, slot: Slot::Lin(i1) },
                ],
            ];
            let has_vars = |comp: usize| t[comp] > vf;
            for terms in entries.iter() {
                let mut kmin = i64::MAX;
                for term in terms {
                    let extra = match term.slot {
                        Slot::Const => Some(0),
                        Slot::Frob(ci) => has_vars(ci).then_some(p * vf),
                        Slot::Lin(ci) => has_vars(ci).then_some(vf),
                        Slot::Bil(ca, cb) => (has_vars(ca) && has_vars(cb)).then_some(p * vf + vf),
                    };
                    let Some(extra) = extra else { continue };
                    // Highest coefficient of `a` that the equations below `c` can touch.
                    if c - 1 - term.h - extra >= term.a.prec() {
                        return Err(Error::Precision(format!(
                            "matrix {} entry known modulo u^{}, but coefficient {} is needed; raise {}",
                            i + 1,
                            term.a.prec(),
                            c - 1 - term.h - extra,
                            crate::laurent::PRECISION_ENV
                        )));
                    }
                    if let Some(v) = term.a.valuation().finite() {
                        kmin = kmin.min(term.h + v + extra);
                    }
                }
                for k in kmin.min(c)..c {
                    let mut eq = RawEq::default();
                    for term in terms {
                        self.add_term(&mut eq, term, k, t, offsets);
                    }
                    eq.normalize(f);
                    if !eq.is_trivial() {
                        eqs.push(eq);
                    }
                }
            }
        }
        Ok(eqs)
    }

    fn add_term(&self, eq: &mut RawEq, term: &Term, k: i64, t: &[i64], offsets: &[usize]) {
        let f = &*self.big;
        let p = self.spec.p as i64;
        let vf = self.v_floor;
        let sign = |c: Fq| if term.negate { f.neg(c) } else { c };
        let var = |comp: usize, j: i64| -> Option<usize> {
            (j >= vf && j < t[comp]).then(|| offsets[comp] + (j - vf) as usize)
        };
        match term.slot {
            Slot::Const => {
                let c = term.a.coeff(k - term.h).unwrap_or(Fq::ZERO);
                if !c.is_zero() {
                    eq.c = f.add(eq.c, sign(c));
                }
            }
            Slot::Frob(ci) => {
                for &(ea, ca) in term.a.terms() {
                    let rem = k - term.h - ea;
                    if rem.rem_euclid(p) == 0 {
                        if let Some(v) = var(ci, rem.div_euclid(p)) {
                            eq.frob.push((v, sign(ca)));
                        }
                    }
                }
            }
            Slot::Lin(ci) => {
                for &(ea, ca) in term.a.terms() {
                    if let Some(v) = var(ci, k - term.h - ea) {
                        eq.lin.push((v, sign(ca)));
                    }
                }
            }
            Slot::Bil(ca_comp, cb_comp) => {
                for &(ea, ca) in term.a.terms() {
                    for j in vf..t[ca_comp] {
                        let j2 = k - term.h - ea - p * j;
                        if let (Some(va), Some(vb)) = (var(ca_comp, j), var(cb_comp, j2)) {
                            eq.bil.push((va, vb, sign(ca)));
                        }
                    }
                }
            }
        }
    }

    /// Splits an F'-valued linear form into rows over the coordinate field.
    fn push_rows(&self, ech: &mut Echelon, coeffs: &[Fq], constant: Fq) -> bool {
        let b = &*self.base;
        let rhs = self.big.neg(constant);
        match self.sem {
            FrobeniusSemantics::Linear => ech.add_row(b, coeffs.to_vec(), rhs),
            FrobeniusSemantics::PPower => {
                let digits: Vec<Vec<u32>> = coeffs.iter().map(|&c| self.big.coeffs(c)).collect();
                let rd = self.big.coeffs(rhs);
                let mut changed = false;
                for l in 0..self.deg {
                    let row = digits.iter().map(|d| Fq(d[l])).collect();
                    changed |= ech.add_row(b, row, Fq(rd[l]));
                }
                changed
            }
        }
    }

    /// Value in F' of a vector of coordinates for one variable.
    fn assemble(&self, coords: &[Fq]) -> Fq {
        let f = &*self.big;
        coords
            .iter()
            .zip(&self.basis)
            .fold(Fq::ZERO, |acc, (&c, &g)| if c.is_zero() { acc } else { f.add(acc, f.mul(c, g)) })
    }

    fn pow_base(&self, k: usize) -> Result<u128> {
        (self.base.size() as u128)
            .checked_pow(k as u32)
            .ok_or_else(|| Error::Internal("point count overflow".into()))
    }

    fn solve_cell(&self, s: &[i64], t: &[i64]) -> Result<CellResult> {
        let empty = || CellResult {
            total: 0,
            per_stratum: Vec::new(),
            points: Some(Vec::new()),
        };
        let f = &*self.big;
        let (offsets, nv) = self.nvars(t);
        let eqs = self.build_equations(s, t, &offsets)?;
        let (lin_eqs, bil_eqs): (Vec<&RawEq>, Vec<&RawEq>) = eqs.iter().partition(|e| e.bil.is_empty());

        // Linear part, in coordinates over the base field.
        let ncoords = nv * self.deg;
        let mut ech = Echelon::new(ncoords);
        for eq in &lin_eqs {
            let mut row = vec![Fq::ZERO; ncoords];
            for &(v, a) in &eq.lin {
                for k in 0..self.deg {
                    let col = v * self.deg + k;
                    row[col] = f.add(row[col], f.mul(a, self.basis[k]));
                }
            }
            for &(v, b) in &eq.frob {
                for k in 0..self.deg {
                    let col = v * self.deg + k;
                    row[col] = f.add(row[col], f.mul(b, self.phi(self.basis[k])));
                }
            }
            self.push_rows(&mut ech, &row, eq.c);
            if !ech.is_consistent() {
                return Ok(empty());
            }
        }
        let z0 = ech.particular();
        let kernel = ech.kernel(&self.base);
        let dk = kernel.len();

        let affine: Vec<Affine> = (0..nv)
            .map(|v| {
                let coords = |vec: &[Fq]| self.assemble(&vec[v * self.deg..(v + 1) * self.deg]);
                let x0 = coords(&z0);
                let k: Vec<Fq> = kernel.iter().map(|kv| coords(kv)).collect();
                Affine {
                    px0: self.phi(x0),
                    pk: k.iter().map(|&x| self.phi(x)).collect(),
                    x0,
                    k,
                }
            })
            .collect();
        let quads: Vec<Quad> = bil_eqs.iter().map(|eq| self.expand(eq, &affine, dk)).collect();
        let irreducible = matches!(self.kind, NormalFormKind::IrreducibleStandard(_));
        let forms = if irreducible {
            (0..self.spec.n.min(2))
                .map(|comp| {
                    let len = (t[comp] - self.v_floor).max(0) as usize;
                    (0..len)
                        .map(|j| {
                            let a = &affine[offsets[comp] + j];
                            (a.x0, a.k.clone())
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        let nodes = AtomicU64::new(0);
        let search = Search {
            quads,
            forms,
            irreducible,
            nodes: &nodes,
        };
        let pending: Vec<usize> = (0..search.quads.len()).collect();
        let by_r = self.search(&search, Echelon::new(dk), pending, true, None)?;

        let total: u128 = by_r.values().sum();
        let cell_key = stratum_ab(self.spec, self.kind, s, t);
        let mut per_stratum = Vec::new();
        if let Some((a, b)) = cell_key {
            match self.kind {
                NormalFormKind::ReducibleTriangular(_) => {
                    if total > 0 {
                        per_stratum.push((StratumKey::Reducible { a, b }, total));
                    }
                }
                _ => {
                    for (&(r1, r2), &cnt) in &by_r {
                        if cnt > 0 {
                            per_stratum.push((irreducible_key(self.spec.e as i64, a.clone(), b.clone(), r1, r2), cnt));
                        }
                    }
                }
            }
        }
        let points = if total <= self.list_limit {
            let mut sols = Vec::new();
            let pending: Vec<usize> = (0..search.quads.len()).collect();
            self.search(&search, Echelon::new(dk), pending, false, Some(&mut sols))?;
            let f = &*self.big;
            let pts = sols
                .into_iter()
                .map(|lam| {
                    let v = (0..self.spec.n)
                        .map(|comp| {
                            let len = (t[comp] - self.v_floor).max(0) as usize;
                            let terms = (0..len).map(|j| {
                                let a = &affine[offsets[comp] + j];
                                let x = a.k.iter().zip(&lam).fold(a.x0, |acc, (&k, &l)| f.add(acc, f.mul(k, l)));
                                (self.v_floor + j as i64, x)
                            });
                            Series::from_terms(self.big.clone(), terms, t[comp])
                        })
                        .collect();
                    LatticeCoord {
                        s: s.to_vec(),
                        t: t.to_vec(),
                        v,
                    }
                })
                .collect();
            Some(pts)
        } else {
            None
        };
        Ok(CellResult {
            total,
            per_stratum,
            points,
        })
    }

    /// Substitutes the parametrization into a bilinear equation.
    fn expand(&self, eq: &RawEq, aff: &[Affine], dk: usize) -> Quad {
        let f = &*self.big;
        let mut q = Quad {
            c: eq.c,
            lin: vec![Fq::ZERO; dk],
            quad: Vec::new(),
        };
        let add_lin = |q: &mut Quad, x0: Fq, k: &[Fq], a: Fq| {
            q.c = f.add(q.c, f.mul(a, x0));
            for (l, &kl) in k.iter().enumerate() {
                q.lin[l] = f.add(q.lin[l], f.mul(a, kl));
            }
        };
        for &(v, a) in &eq.lin {
            add_lin(&mut q, aff[v].x0, &aff[v].k, a);
        }
        for &(v, b) in &eq.frob {
            add_lin(&mut q, aff[v].px0, &aff[v].pk, b);
        }
        let mut quad: BTreeMap<(usize, usize), Fq> = BTreeMap::new();
        for &(va, vb, g) in &eq.bil {
            let (xa, xb) = (&aff[va], &aff[vb]);
            add_lin(&mut q, xb.x0, &xb.k, f.mul(g, xa.px0));
            for (l, &pk) in xa.pk.iter().enumerate() {
                if pk.is_zero() {
                    continue;
                }
                let gl = f.mul(g, pk);
                q.lin[l] = f.add(q.lin[l], f.mul(gl, xb.x0));
                for (l2, &k2) in xb.k.iter().enumerate() {
                    if !k2.is_zero() {
                        let key = (l.min(l2), l.max(l2));
                        let e = quad.entry(key).or_insert(Fq::ZERO);
                        *e = f.add(*e, f.mul(gl, k2));
                    }
                }
            }
        }
        q.quad = quad.into_iter().filter(|x| !x.1.is_zero()).map(|((a, b), g)| (a, b, g)).collect();
        q
    }

    /// Counts (or lists) the solutions of the pending quadratic equations on top of `ech`,
    /// fixing one parameter at a time until every equation is linear.
    fn search(
        &self,
        sr: &Search,
        mut ech: Echelon,
        mut pending: Vec<usize>,
        top: bool,
        mut out: Option<&mut Vec<Vec<Fq>>>,
    ) -> Result<Tally> {
        if sr.nodes.fetch_add(1, Ordering::Relaxed) > MAX_ENUMERATION as u64 {
            return Err(Error::Unsupported(
                "search exceeded the node budget; lower the extension degree".into(),
            ));
        }
        let f = &*self.big;
        // Linearize whatever can be, until nothing changes.
        loop {
            let fixed = ech.determined();
            let mut rest = Vec::with_capacity(pending.len());
            let mut changed = false;
            for &qi in &pending {
                let q = &sr.quads[qi];
                if q.quad.iter().any(|&(a, b, _)| fixed[a].is_none() && fixed[b].is_none()) {
                    rest.push(qi);
                    continue;
                }
                let mut row = q.lin.clone();
                let mut c = q.c;
                for &(a, b, g) in &q.quad {
                    match (fixed[a], fixed[b]) {
                        (Some(x), Some(y)) => c = f.add(c, f.mul(g, f.mul(x, y))),
                        (Some(x), None) => row[b] = f.add(row[b], f.mul(g, x)),
                        (None, Some(y)) => row[a] = f.add(row[a], f.mul(g, y)),
                        (None, None) => unreachable!(),
                    }
                }
                changed |= self.push_rows(&mut ech, &row, c);
                if !ech.is_consistent() {
                    return Ok(Tally::new());
                }
            }
            let done = rest.len() == pending.len();
            pending = rest;
            if !changed && done || pending.is_empty() {
                if pending.is_empty() {
                    return self.leaf(sr, &ech, out);
                }
                if !changed {
                    break;
                }
            }
        }
        // Branch on the lowest free parameter that an open product depends on.
        let fixed = ech.determined();
        let col = pending
            .iter()
            .flat_map(|&qi| sr.quads[qi].quad.iter())
            .filter(|&&(a, b, _)| fixed[a].is_none() && fixed[b].is_none())
            .flat_map(|&(a, b, _)| ech.dependencies(a).into_iter().chain(ech.dependencies(b)))
            .min()
            .ok_or_else(|| Error::Internal("open product without free parameter".into()))?;
        let ncols = ech.ncols();
        let branch = |val: u32, out: Option<&mut Vec<Vec<Fq>>>| -> Result<Tally> {
            let mut e = ech.clone();
            let mut row = vec![Fq::ZERO; ncols];
            row[col] = Fq::ONE;
            e.add_row(&self.base, row, Fq(val));
            self.search(sr, e, pending.clone(), false, out)
        };
        let size = self.base.size() as u32;
        if top && out.is_none() && size >= 16 {
            (0..size)
                .into_par_iter()
                .map(|v| branch(v, None))
                .try_reduce(Tally::new, |a, b| Ok(merge_tally(a, b)))
        } else {
            let mut acc = Tally::new();
            for v in 0..size {
                acc = merge_tally(acc, branch(v, out.as_deref_mut())?);
            }
            Ok(acc)
        }
    }

    fn leaf(&self, sr: &Search, ech: &Echelon, out: Option<&mut Vec<Vec<Fq>>>) -> Result<Tally> {
        if let Some(out) = out {
            let x0 = ech.particular();
            let ker = ech.kernel(&self.base);
            let bsize = self.base.size() as u128;
            for idx in 0..bsize.pow(ker.len() as u32) {
                let mut x = x0.clone();
                let mut r = idx;
                for kv in &ker {
                    let w = Fq((r % bsize) as u32);
                    r /= bsize;
                    if !w.is_zero() {
                        for (xi, &k) in x.iter_mut().zip(kv) {
                            *xi = self.base.add(*xi, self.base.mul(w, k));
                        }
                    }
                }
                out.push(x);
            }
            return Ok(Tally::new());
        }
        let mut tally = Tally::new();
        if sr.irreducible {
            self.split_by_r(ech, &sr.forms, &mut tally)?;
        } else {
            tally.insert((0, 0), self.pow_base(ech.ncols() - ech.rank())?);
        }
        Ok(tally)
    }

    /// Distributes the solutions of `base` over `(R1, R2)`.
    fn split_by_r(&self, base: &Echelon, forms: &[Vec<(Fq, Vec<Fq>)>], out: &mut Tally) -> Result<()> {
        let count = |e: &Echelon| -> Result<u128> {
            if e.is_consistent() {
                self.pow_base(e.ncols() - e.rank())
            } else {
                Ok(0)
            }
        };
        let fa = &forms[0];
        let ra = fa.len();
        if forms.len() == 1 {
            // R1 = R2 = R; at most R means the lowest len - R coefficients vanish.
            let mut cum = vec![0u128; ra + 1];
            let mut e = base.clone();
            for pre in 0..=ra {
                if pre > 0 {
                    let (k0, co) = &fa[pre - 1];
                    self.push_rows(&mut e, co, *k0);
                }
                cum[ra - pre] = count(&e)?;
            }
            for r in 0..=ra {
                let below = if r == 0 { 0 } else { cum[r - 1] };
                let cnt = cum[r] - below;
                if cnt > 0 {
                    *out.entry((r as i64, r as i64)).or_insert(0) += cnt;
                }
            }
            return Ok(());
        }
        let fb = &forms[1];
        let rb = fb.len();
        // table[r1][r2] = solutions with R1 <= r1 and R2 <= r2.
        let mut table = vec![vec![0u128; rb + 1]; ra + 1];
        let mut ea = base.clone();
        let mut prev: Option<Vec<u128>> = None;
        for pre_a in 0..=ra {
            let mut changed = prev.is_none();
            if pre_a > 0 {
                let (k0, co) = &fa[pre_a - 1];
                changed |= self.push_rows(&mut ea, co, *k0);
            }
            let row = match (&prev, changed) {
                (Some(p), false) => p.clone(),
                _ => {
                    let mut row = vec![0u128; rb + 1];
                    let mut eb = ea.clone();
                    for pre_b in 0..=rb {
                        if pre_b > 0 {
                            let (k0, co) = &fb[pre_b - 1];
                            self.push_rows(&mut eb, co, *k0);
                        }
                        row[rb - pre_b] = count(&eb)?;
                    }
                    row
                }
            };
            table[ra - pre_a] = row.clone();
            prev = Some(row);
        }
        let at = |r1: usize, r2: usize| -> i128 { table[r1][r2] as i128 };
        for r1 in 0..=ra {
            for r2 in 0..=rb {
                let mut v = at(r1, r2);
                if r1 > 0 {
                    v -= at(r1 - 1, r2);
                }
                if r2 > 0 {
                    v -= at(r1, r2 - 1);
                }
                if r1 > 0 && r2 > 0 {
                    v += at(r1 - 1, r2 - 1);
                }
                if v < 0 {
                    return Err(Error::Internal("negative stratum count".into()));
                }
                if v > 0 {
                    *out.entry((r1 as i64, r2 as i64)).or_insert(0) += v as u128;
                }
            }
        }
        Ok(())
    }
}

fn merge_tally(mut a: Tally, b: Tally) -> Tally {
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}
