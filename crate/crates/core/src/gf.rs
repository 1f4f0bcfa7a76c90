//! Finite fields `F_{p^r}` for odd primes `p`.
//!
//! The modulus of `F_{p^r}` is the first irreducible monic polynomial of
//! degree `r`, where monic polynomials of equal degree are compared by their
//! coefficient sequences read from the constant term upward. Elements are
//! stored as [`Fq`], the integer `sum c_i p^i` of their coefficients.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest field size for which exp/log tables are built.
const TABLE_LIMIT: u64 = 1 << 21;

/// Raw field element: coefficient sequence packed as `sum c_i p^i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fq(pub u32);

impl Fq {
    pub const ZERO: Fq = Fq(0);
    pub const ONE: Fq = Fq(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Description of a field as it appears in input files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub p: u32,
    pub r: u32,
}

struct Tables {
    /// `exp[k] = g^k` for `0 <= k < 2(q-1)`.
    exp: Vec<u32>,
    /// `log[x]` for nonzero `x`.
    log: Vec<u32>,
    /// `zech[k] = log(1 + g^k)`, or `u32::MAX` when `1 + g^k = 0`.
    zech: Vec<u32>,
}

/// The field `F_{p^r}` together with its modulus.
pub struct FieldSpec {
    p: u32,
    r: u32,
    size: u64,
    modulus: Vec<u32>,
    pow_p: Vec<u32>,
    tables: Option<Tables>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("p", &self.p)
            .field("r", &self.r)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.r == other.r
    }
}

impl Eq for FieldSpec {}

fn field_cache() -> &'static Mutex<HashMap<(u32, u32), Arc<FieldSpec>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32), Arc<FieldSpec>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl FieldSpec {
    /// Returns the (cached) field `F_{p^r}`.
    pub fn get(p: u32, r: u32) -> Result<Arc<FieldSpec>> {
        if p <= 2 || !is_prime(p as u64) {
            return Err(Error::Domain(format!("p = {p} must be an odd prime")));
        }
        if r == 0 {
            return Err(Error::Domain("extension degree r must be at least 1".into()));
        }
        let size = (p as u64)
            .checked_pow(r)
            .filter(|&q| q <= u32::MAX as u64)
            .ok_or_else(|| Error::Domain(format!("field {p}^{r} is too large")))?;
        if let Some(spec) = field_cache().lock().unwrap().get(&(p, r)) {
            return Ok(spec.clone());
        }
        let spec = Arc::new(Self::build(p, r, size));
        let mut cache = field_cache().lock().unwrap();
        Ok(cache.entry((p, r)).or_insert(spec).clone())
    }

    /// Field described by a `{p, r}` descriptor.
    pub fn from_descriptor(d: FieldDescriptor) -> Result<Arc<FieldSpec>> {
        Self::get(d.p, d.r)
    }

    fn build(p: u32, r: u32, size: u64) -> FieldSpec {
        let modulus = first_irreducible(p, r as usize);
        let pow_p = (0..r).map(|i| p.pow(i)).collect();
        let mut spec = FieldSpec {
            p,
            r,
            size,
            modulus,
            pow_p,
            tables: None,
        };
        if size <= TABLE_LIMIT {
            spec.tables = Some(spec.build_tables());
        }
        spec
    }

    fn build_tables(&self) -> Tables {
        let q = self.size as usize;
        let order = self.size - 1;
        let factors = prime_factors(order);
        let mut g = 1u32;
        loop {
            g += 1;
            if g as u64 >= self.size {
                // q = 3: the generator is 2.
                g = 2;
                break;
            }
            if factors
                .iter()
                .all(|&l| self.pow_poly(Fq(g), order / l) != Fq::ONE)
            {
                break;
            }
        }
        if self.size == 3 {
            g = 2;
        }
        let mut exp = vec![0u32; 2 * (q - 1)];
        let mut log = vec![0u32; q];
        let mut x = Fq::ONE;
        for k in 0..(q - 1) {
            exp[k] = x.0;
            exp[k + q - 1] = x.0;
            log[x.0 as usize] = k as u32;
            x = self.mul_poly(x, Fq(g));
        }
        let mut zech = vec![0u32; q - 1];
        for k in 0..(q - 1) {
            let s = self.add_digits(Fq::ONE, Fq(exp[k]));
            zech[k] = if s.is_zero() { u32::MAX } else { log[s.0 as usize] };
        }
        Tables { exp, log, zech }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// Number of elements `p^r`.
    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn descriptor(&self) -> FieldDescriptor {
        FieldDescriptor { p: self.p, r: self.r }
    }

    /// Modulus coefficients from the constant term up; the last entry is 1.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn same_field(&self, other: &FieldSpec) -> bool {
        self == other
    }

    pub fn zero(&self) -> Fq {
        Fq::ZERO
    }

    pub fn one(&self) -> Fq {
        Fq::ONE
    }

    /// The class of `x` in the prime field.
    pub fn from_int(&self, x: i64) -> Fq {
        Fq(x.rem_euclid(self.p as i64) as u32)
    }

    /// The generator `x` of the polynomial basis (`x = p` as an integer for r > 1).
    pub fn generator(&self) -> Fq {
        if self.r == 1 {
            // The class of x modulo a linear modulus x - c is c.
            Fq((self.p - self.modulus[0]) % self.p)
        } else {
            Fq(self.p)
        }
    }

    /// Builds an element from its coefficient sequence (constant term first).
    pub fn from_coeffs(&self, coeffs: &[u32]) -> Result<Fq> {
        if coeffs.len() > self.r as usize {
            return Err(Error::Domain(format!(
                "coefficient vector of length {} exceeds degree {}",
                coeffs.len(),
                self.r
            )));
        }
        let mut v = 0u32;
        for (i, &c) in coeffs.iter().enumerate() {
            if c >= self.p {
                return Err(Error::Domain(format!("coefficient {c} not in [0, {})", self.p)));
            }
            v += c * self.pow_p[i];
        }
        Ok(Fq(v))
    }

    /// Coefficient sequence of `a` of length `r`, constant term first.
    pub fn coeffs(&self, a: Fq) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.r as usize);
        let mut v = a.0;
        for _ in 0..self.r {
            out.push(v % self.p);
            v /= self.p;
        }
        out
    }

    /// The `k`-th element in the order comparing coefficients from the constant term upward.
    pub fn element_in_lex_order(&self, k: u64) -> Fq {
        let mut v = k;
        let mut coeffs = vec![0u32; self.r as usize];
        for i in (0..self.r as usize).rev() {
            coeffs[i] = (v % self.p as u64) as u32;
            v /= self.p as u64;
        }
        self.from_coeffs(&coeffs).expect("in range")
    }

    /// All elements, in the coefficient order used for root selection.
    pub fn elements_lex(&self) -> impl Iterator<Item = Fq> + '_ {
        (0..self.size).map(move |k| self.element_in_lex_order(k))
    }

    fn add_digits(&self, a: Fq, b: Fq) -> Fq {
        let p = self.p;
        let (mut x, mut y) = (a.0, b.0);
        let mut out = 0u32;
        let mut place = 1u32;
        while x != 0 || y != 0 {
            let d = (x % p + y % p) % p;
            out += d * place;
            x /= p;
            y /= p;
            place = place.wrapping_mul(p);
        }
        Fq(out)
    }

    fn neg_digits(&self, a: Fq) -> Fq {
        let p = self.p;
        let mut x = a.0;
        let mut out = 0u32;
        let mut place = 1u32;
        while x != 0 {
            let d = (p - x % p) % p;
            out += d * place;
            x /= p;
            place = place.wrapping_mul(p);
        }
        Fq(out)
    }

    fn mul_poly(&self, a: Fq, b: Fq) -> Fq {
        let r = self.r as usize;
        let p = self.p as u64;
        let ca = self.coeffs(a);
        let cb = self.coeffs(b);
        let mut prod = vec![0u64; 2 * r];
        for i in 0..r {
            if ca[i] == 0 {
                continue;
            }
            for j in 0..r {
                prod[i + j] += ca[i] as u64 * cb[j] as u64;
            }
        }
        for k in (r..2 * r).rev() {
            let c = prod[k] % p;
            if c == 0 {
                continue;
            }
            prod[k] = 0;
            for i in 0..r {
                prod[k - r + i] += (p - c) * self.modulus[i] as u64 % p;
            }
        }
        let coeffs: Vec<u32> = prod[..r].iter().map(|&c| (c % p) as u32).collect();
        self.from_coeffs(&coeffs).expect("reduced")
    }

    fn pow_poly(&self, a: Fq, mut k: u64) -> Fq {
        let mut base = a;
        let mut acc = Fq::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul_poly(acc, base);
            }
            base = self.mul_poly(base, base);
            k >>= 1;
        }
        acc
    }

    #[inline]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        match &self.tables {
            Some(t) => {
                let q1 = (self.size - 1) as u32;
                let la = t.log[a.0 as usize];
                let lb = t.log[b.0 as usize];
                let d = if lb >= la { lb - la } else { lb + q1 - la };
                let z = t.zech[d as usize];
                if z == u32::MAX {
                    Fq::ZERO
                } else {
                    Fq(t.exp[(la + z) as usize])
                }
            }
            None => self.add_digits(a, b),
        }
    }

    #[inline]
    pub fn neg(&self, a: Fq) -> Fq {
        if a.is_zero() {
            return a;
        }
        match &self.tables {
            Some(t) => {
                let q1 = (self.size - 1) as u32;
                let l = t.log[a.0 as usize] + q1 / 2;
                Fq(t.exp[l as usize])
            }
            None => self.neg_digits(a),
        }
    }

    #[inline]
    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        if a.is_zero() || b.is_zero() {
            return Fq::ZERO;
        }
        match &self.tables {
            Some(t) => Fq(t.exp[(t.log[a.0 as usize] + t.log[b.0 as usize]) as usize]),
            None => self.mul_poly(a, b),
        }
    }

    /// Multiplicative inverse; zero is a domain error.
    pub fn inv(&self, a: Fq) -> Result<Fq> {
        if a.is_zero() {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(match &self.tables {
            Some(t) => {
                let q1 = (self.size - 1) as u32;
                let l = t.log[a.0 as usize];
                Fq(t.exp[((q1 - l) % q1) as usize])
            }
            None => self.pow_poly(a, self.size - 2),
        })
    }

    pub fn div(&self, a: Fq, b: Fq) -> Result<Fq> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Fq, k: u64) -> Fq {
        if k == 0 {
            return Fq::ONE;
        }
        if a.is_zero() {
            return Fq::ZERO;
        }
        match &self.tables {
            Some(t) => {
                let q1 = self.size - 1;
                let l = t.log[a.0 as usize] as u64 * (k % q1) % q1;
                Fq(t.exp[l as usize])
            }
            None => self.pow_poly(a, k),
        }
    }

    /// `a^p`.
    pub fn frobenius(&self, a: Fq) -> Fq {
        self.pow(a, self.p as u64)
    }

    /// Evaluates a polynomial with prime-field coefficients (constant first) at `x`.
    pub fn eval_prime_poly(&self, coeffs: &[u32], x: Fq) -> Fq {
        let mut acc = Fq::ZERO;
        for &c in coeffs.iter().rev() {
            acc = self.add(self.mul(acc, x), Fq(c));
        }
        acc
    }
}

// ---- polynomials over F_p, used only to select the modulus ----

fn poly_trim(a: &mut Vec<u32>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn poly_mod(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r: Vec<u32> = a.to_vec();
    poly_trim(&mut r);
    let dm = m.len() - 1;
    let lead_inv = mod_inv(m[dm], p);
    while r.len() > dm {
        let k = r.len() - 1;
        let c = (r[k] as u64 * lead_inv as u64 % p as u64) as u32;
        let shift = k - dm;
        for i in 0..=dm {
            let sub = (c as u64 * m[i] as u64 % p as u64) as u32;
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
        poly_trim(&mut r);
    }
    r
}

fn poly_mulmod(a: &[u32], b: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut prod = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p as u64;
        }
    }
    let prod: Vec<u32> = prod.into_iter().map(|c| c as u32).collect();
    poly_mod(&prod, m, p)
}

fn poly_powmod(a: &[u32], mut k: u64, m: &[u32], p: u32) -> Vec<u32> {
    let mut base = poly_mod(a, m, p);
    let mut acc = vec![1u32];
    while k > 0 {
        if k & 1 == 1 {
            acc = poly_mulmod(&acc, &base, m, p);
        }
        base = poly_mulmod(&base, &base, m, p);
        k >>= 1;
    }
    acc
}

fn poly_gcd(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    poly_trim(&mut x);
    poly_trim(&mut y);
    while !y.is_empty() {
        let r = poly_mod(&x, &y, p);
        x = y;
        y = r;
    }
    x
}

fn mod_inv(a: u32, p: u32) -> u32 {
    let mut acc = 1u64;
    let mut base = a as u64 % p as u64;
    let mut k = p - 2;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc * base % p as u64;
        }
        base = base * base % p as u64;
        k >>= 1;
    }
    acc as u32
}

/// Ben-Or irreducibility test for a monic polynomial over `F_p`.
pub fn is_irreducible_over_prime_field(f: &[u32], p: u32) -> bool {
    let deg = f.len() - 1;
    if deg == 0 {
        return false;
    }
    if deg == 1 {
        return true;
    }
    let x = vec![0u32, 1];
    let mut h = x.clone();
    for _ in 1..=deg / 2 {
        h = poly_powmod(&h, p as u64, f, p);
        let mut diff = h.clone();
        diff.resize(diff.len().max(2), 0);
        diff[1] = (diff[1] + p - 1) % p;
        let g = poly_gcd(f, &diff, p);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

/// First irreducible monic polynomial of degree `r` over `F_p`, constant term first.
pub fn first_irreducible(p: u32, r: usize) -> Vec<u32> {
    let count = (p as u64).pow(r as u32);
    for k in 0..count {
        // The constant term is the most significant digit of k.
        let mut coeffs = vec![0u32; r + 1];
        let mut v = k;
        for i in (0..r).rev() {
            coeffs[i] = (v % p as u64) as u32;
            v /= p as u64;
        }
        coeffs[r] = 1;
        if is_irreducible_over_prime_field(&coeffs, p) {
            return coeffs;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// An element together with its field.
#[derive(Clone)]
pub struct FieldElement {
    spec: Arc<FieldSpec>,
    raw: Fq,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} in F_{}^{}", self.coeffs(), self.spec.p, self.spec.r)
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.raw == other.raw
    }
}

impl Eq for FieldElement {}

/// Binary field operation selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl FieldElement {
    pub fn new(spec: Arc<FieldSpec>, raw: Fq) -> Result<Self> {
        if raw.0 as u64 >= spec.size {
            return Err(Error::Domain(format!("{} is not an element of the field", raw.0)));
        }
        Ok(FieldElement { spec, raw })
    }

    pub fn from_coeffs(spec: Arc<FieldSpec>, coeffs: &[u32]) -> Result<Self> {
        let raw = spec.from_coeffs(coeffs)?;
        Ok(FieldElement { spec, raw })
    }

    pub fn from_int(spec: Arc<FieldSpec>, x: i64) -> Self {
        let raw = spec.from_int(x);
        FieldElement { spec, raw }
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.spec
    }

    pub fn raw(&self) -> Fq {
        self.raw
    }

    pub fn coeffs(&self) -> Vec<u32> {
        self.spec.coeffs(self.raw)
    }

    pub fn is_zero(&self) -> bool {
        self.raw.is_zero()
    }

    pub fn pow(&self, k: u64) -> Self {
        FieldElement {
            spec: self.spec.clone(),
            raw: self.spec.pow(self.raw, k),
        }
    }
}

/// Exact `x op y`; both operands must live in the same field.
pub fn field_arithmetic(x: &FieldElement, y: &FieldElement, op: FieldOp) -> Result<FieldElement> {
    if x.spec != y.spec {
        return Err(Error::SpecMismatch(format!(
            "F_{}^{} vs F_{}^{}",
            x.spec.p, x.spec.r, y.spec.p, y.spec.r
        )));
    }
    let s = &x.spec;
    let raw = match op {
        FieldOp::Add => s.add(x.raw, y.raw),
        FieldOp::Sub => s.sub(x.raw, y.raw),
        FieldOp::Mul => s.mul(x.raw, y.raw),
        FieldOp::Div => s.div(x.raw, y.raw)?,
    };
    Ok(FieldElement { spec: s.clone(), raw })
}

/// `x^p`.
pub fn frobenius_p(x: &FieldElement) -> FieldElement {
    FieldElement {
        spec: x.spec.clone(),
        raw: x.spec.frobenius(x.raw),
    }
}

/// Field homomorphism sending the source generator to the first root of the
/// source modulus in the target field.
#[derive(Debug)]
pub struct Embedding {
    source: Arc<FieldSpec>,
    target: Arc<FieldSpec>,
    gen_powers: Vec<Fq>,
}

fn embedding_cache() -> &'static Mutex<HashMap<(u32, u32, u32), Arc<Embedding>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32, u32), Arc<Embedding>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Embedding {
    /// The (cached) embedding `source -> target`.
    pub fn get(source: &Arc<FieldSpec>, target: &Arc<FieldSpec>) -> Result<Arc<Embedding>> {
        if source.p != target.p {
            return Err(Error::SpecMismatch(format!(
                "characteristics differ: {} vs {}",
                source.p, target.p
            )));
        }
        if !target.r.is_multiple_of(source.r) {
            return Err(Error::Domain(format!(
                "degree {} does not divide degree {}",
                source.r, target.r
            )));
        }
        let key = (source.p, source.r, target.r);
        if let Some(e) = embedding_cache().lock().unwrap().get(&key) {
            return Ok(e.clone());
        }
        let root = target
            .elements_lex()
            .find(|&x| target.eval_prime_poly(source.modulus(), x).is_zero())
            .ok_or_else(|| Error::Internal("no root of the source modulus in target".into()))?;
        let mut gen_powers = Vec::with_capacity(source.r as usize);
        let mut acc = Fq::ONE;
        for _ in 0..source.r {
            gen_powers.push(acc);
            acc = target.mul(acc, root);
        }
        let emb = Arc::new(Embedding {
            source: source.clone(),
            target: target.clone(),
            gen_powers,
        });
        let mut cache = embedding_cache().lock().unwrap();
        Ok(cache.entry(key).or_insert(emb).clone())
    }

    pub fn source(&self) -> &Arc<FieldSpec> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FieldSpec> {
        &self.target
    }

    /// Image of the source generator.
    pub fn generator_image(&self) -> Fq {
        if self.source.r == 1 {
            self.target.from_int(self.source.generator().0 as i64)
        } else {
            self.gen_powers[1]
        }
    }

    pub fn apply(&self, x: Fq) -> Fq {
        let coeffs = self.source.coeffs(x);
        let mut acc = Fq::ZERO;
        for (c, &g) in coeffs.iter().zip(&self.gen_powers) {
            if *c != 0 {
                acc = self.target.add(acc, self.target.mul(Fq(*c), g));
            }
        }
        acc
    }
}

/// Image of `x` under the deterministic embedding into `target`.
pub fn embed(x: &FieldElement, target: &Arc<FieldSpec>) -> Result<FieldElement> {
    let emb = Embedding::get(&x.spec, target)?;
    Ok(FieldElement {
        spec: target.clone(),
        raw: emb.apply(x.raw),
    })
}
