//! Truncated Laurent series `sum c_j u^j` known modulo `u^prec`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{FieldSpec, Fq};

/// Environment variable overriding the default precision cap.
pub const PRECISION_ENV: &str = "KISIN_PRECISION";

/// How `phi` acts on coefficients in a single component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrobeniusSemantics {
    /// Coefficients are kept, exponents multiplied by `p`.
    #[default]
    #[serde(rename = "linear")]
    Linear,
    /// Coefficients are additionally raised to the `p`-th power.
    #[serde(rename = "p-power")]
    PPower,
}

impl FrobeniusSemantics {
    pub fn as_str(self) -> &'static str {
        match self {
            FrobeniusSemantics::Linear => "linear",
            FrobeniusSemantics::PPower => "p-power",
        }
    }
}

impl std::str::FromStr for FrobeniusSemantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(FrobeniusSemantics::Linear),
            "p-power" => Ok(FrobeniusSemantics::PPower),
            _ => Err(Error::InvalidInput(format!(
                "unknown frobenius semantics {s:?} (expected linear or p-power)"
            ))),
        }
    }
}

/// Number of exponents above the valuation that exact inputs are known to.
///
/// `KISIN_PRECISION` overrides the default `4ep + 16`.
pub fn precision_cap(e: u32, p: u32) -> i64 {
    if let Ok(v) = std::env::var(PRECISION_ENV) {
        if let Ok(n) = v.trim().parse::<i64>() {
            if n > 0 {
                return n;
            }
        }
    }
    4 * e as i64 * p as i64 + 16
}

/// Valuation with a distinguished infinity for the zero series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinity => write!(f, "inf"),
        }
    }
}

/// Binary series operation selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesOp {
    Add,
    Sub,
    Mul,
}

/// A Laurent series over `F_{p^r}` known modulo `u^prec`.
///
/// Terms are sorted by exponent, have nonzero coefficients and exponents
/// below `prec`.
#[derive(Clone)]
pub struct TruncatedLaurentSeries {
    spec: Arc<FieldSpec>,
    terms: Vec<(i64, Fq)>,
    prec: i64,
}

impl PartialEq for TruncatedLaurentSeries {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.terms == other.terms && self.prec == other.prec
    }
}

impl Eq for TruncatedLaurentSeries {}

impl fmt::Debug for TruncatedLaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "O(u^{})", self.prec);
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{:?}u^{}", self.spec.coeffs(*c), e)?;
        }
        write!(f, " + O(u^{})", self.prec)
    }
}

impl TruncatedLaurentSeries {
    /// Builds a series known modulo `u^prec` from arbitrary terms.
    ///
    /// Terms at or above `prec` are dropped, repeated exponents are summed.
    pub fn from_terms(spec: Arc<FieldSpec>, terms: impl IntoIterator<Item = (i64, Fq)>, prec: i64) -> Self {
        let mut v: Vec<(i64, Fq)> = terms.into_iter().filter(|&(e, _)| e < prec).collect();
        v.sort_by_key(|&(e, _)| e);
        let mut out: Vec<(i64, Fq)> = Vec::with_capacity(v.len());
        for (e, c) in v {
            match out.last_mut() {
                Some(last) if last.0 == e => last.1 = spec.add(last.1, c),
                _ => out.push((e, c)),
            }
        }
        out.retain(|&(_, c)| !c.is_zero());
        TruncatedLaurentSeries { spec, terms: out, prec }
    }

    /// An exact finite sum, recorded to `cap` exponents above its valuation.
    pub fn exact(spec: Arc<FieldSpec>, terms: impl IntoIterator<Item = (i64, Fq)>, cap: i64) -> Self {
        let v: Vec<(i64, Fq)> = terms.into_iter().collect();
        let lo = v.iter().filter(|t| !t.1.is_zero()).map(|t| t.0).min();
        let hi = v.iter().map(|t| t.0).max().unwrap_or(0);
        let prec = match lo {
            Some(lo) => (lo + cap).max(hi + 1),
            None => cap,
        };
        Self::from_terms(spec, v, prec)
    }

    pub fn zero(spec: Arc<FieldSpec>, prec: i64) -> Self {
        TruncatedLaurentSeries {
            spec,
            terms: Vec::new(),
            prec,
        }
    }

    /// `c u^k` known modulo `u^prec`.
    pub fn monomial(spec: Arc<FieldSpec>, c: Fq, k: i64, prec: i64) -> Self {
        Self::from_terms(spec, [(k, c)], prec)
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.spec
    }

    pub fn terms(&self) -> &[(i64, Fq)] {
        &self.terms
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn valuation(&self) -> Valuation {
        match self.terms.first() {
            Some(&(e, _)) => Valuation::Finite(e),
            None => Valuation::Infinity,
        }
    }

    /// Valuation, or the precision for the zero series (a lower bound in both cases).
    fn val_or_prec(&self) -> i64 {
        self.terms.first().map_or(self.prec, |t| t.0)
    }

    /// Coefficient of `u^k`; fails when `k` is not below the precision.
    pub fn coeff(&self, k: i64) -> Result<Fq> {
        if k >= self.prec {
            return Err(Error::Precision(format!(
                "coefficient of u^{k} requested from a series known modulo u^{}",
                self.prec
            )));
        }
        Ok(self
            .terms
            .binary_search_by_key(&k, |t| t.0)
            .map_or(Fq::ZERO, |i| self.terms[i].1))
    }

    /// Same series with precision lowered to `prec` (no-op when already lower).
    pub fn truncate(&self, prec: i64) -> Self {
        let prec = prec.min(self.prec);
        TruncatedLaurentSeries {
            spec: self.spec.clone(),
            terms: self.terms.iter().copied().filter(|t| t.0 < prec).collect(),
            prec,
        }
    }

    /// `u^k * self`.
    pub fn shift(&self, k: i64) -> Self {
        TruncatedLaurentSeries {
            spec: self.spec.clone(),
            terms: self.terms.iter().map(|&(e, c)| (e + k, c)).collect(),
            prec: self.prec + k,
        }
    }

    pub fn scale(&self, c: Fq) -> Self {
        let s = &self.spec;
        Self::from_terms(s.clone(), self.terms.iter().map(|&(e, x)| (e, s.mul(c, x))), self.prec)
    }

    pub fn neg(&self) -> Self {
        let s = &self.spec;
        TruncatedLaurentSeries {
            spec: s.clone(),
            terms: self.terms.iter().map(|&(e, x)| (e, s.neg(x))).collect(),
            prec: self.prec,
        }
    }

    fn check_spec(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch(format!(
                "series over F_{}^{} and F_{}^{}",
                self.spec.p(),
                self.spec.r(),
                other.spec.p(),
                other.spec.r()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_spec(other)?;
        let prec = self.prec.min(other.prec);
        Ok(Self::from_terms(
            self.spec.clone(),
            self.terms.iter().chain(other.terms.iter()).copied(),
            prec,
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_spec(other)?;
        let prec = (self.prec + other.val_or_prec()).min(other.prec + self.val_or_prec());
        let s = &self.spec;
        let mut acc: Vec<(i64, Fq)> = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(e1, c1) in &self.terms {
            for &(e2, c2) in &other.terms {
                if e1 + e2 < prec {
                    acc.push((e1 + e2, s.mul(c1, c2)));
                }
            }
        }
        Ok(Self::from_terms(s.clone(), acc, prec))
    }

    /// Multiplicative inverse modulo `u^out_prec`.
    pub fn invert(&self, out_prec: i64) -> Result<Self> {
        let v = match self.valuation() {
            Valuation::Finite(v) => v,
            Valuation::Infinity => {
                return Err(Error::Domain("cannot invert a series that is zero to its precision".into()))
            }
        };
        let attainable = self.prec - 2 * v;
        if out_prec > attainable {
            return Err(Error::Precision(format!(
                "inverse requested modulo u^{out_prec}, but only u^{attainable} is determined"
            )));
        }
        let s = &self.spec;
        let lead_inv = s.inv(self.terms[0].1)?;
        // Long division on the unit part f = u^v (c0 + c1 u + ...).
        let len = (out_prec + v).max(0) as usize;
        let unit: Vec<Fq> = (0..len)
            .map(|k| self.coeff(v + k as i64).unwrap_or(Fq::ZERO))
            .collect();
        let mut g = vec![Fq::ZERO; len];
        for k in 0..len {
            let mut acc = if k == 0 { Fq::ONE } else { Fq::ZERO };
            for j in 1..=k {
                if !unit[j].is_zero() && !g[k - j].is_zero() {
                    acc = s.sub(acc, s.mul(unit[j], g[k - j]));
                }
            }
            g[k] = s.mul(acc, lead_inv);
        }
        Ok(Self::from_terms(
            s.clone(),
            g.into_iter().enumerate().map(|(k, c)| (k as i64 - v, c)),
            out_prec,
        ))
    }

    /// Inverse to the best precision the input supports.
    pub fn invert_max(&self) -> Result<Self> {
        let v = self
            .valuation()
            .finite()
            .ok_or_else(|| Error::Domain("cannot invert a series that is zero to its precision".into()))?;
        self.invert(self.prec - 2 * v)
    }

    /// The substitution `u -> u^p`, with coefficient action per `sem`.
    pub fn phi_component(&self, sem: FrobeniusSemantics) -> Self {
        let s = &self.spec;
        let p = s.p() as i64;
        TruncatedLaurentSeries {
            spec: s.clone(),
            terms: self
                .terms
                .iter()
                .map(|&(e, c)| {
                    let c = match sem {
                        FrobeniusSemantics::Linear => c,
                        FrobeniusSemantics::PPower => s.frobenius(c),
                    };
                    (p * e, c)
                })
                .collect(),
            prec: p * self.prec,
        }
    }

    /// Drops every term of exponent `>= t`.
    pub fn reduce_mod_power(&self, t: i64) -> Result<Self> {
        if self.prec < t {
            return Err(Error::Precision(format!(
                "reduction modulo u^{t} needs precision {t}, series is known modulo u^{}",
                self.prec
            )));
        }
        Ok(TruncatedLaurentSeries {
            spec: self.spec.clone(),
            terms: self.terms.iter().copied().filter(|x| x.0 < t).collect(),
            prec: t,
        })
    }

    /// Serialized form: sorted `[exponent, coefficient-vector]` pairs.
    pub fn to_pairs(&self) -> Vec<(i64, Vec<u32>)> {
        self.terms
            .iter()
            .map(|&(e, c)| (e, self.spec.coeffs(c)))
            .collect()
    }

    pub fn from_pairs(spec: Arc<FieldSpec>, pairs: &[(i64, Vec<u32>)], cap: i64) -> Result<Self> {
        let mut terms = Vec::with_capacity(pairs.len());
        for (e, coeffs) in pairs {
            terms.push((*e, spec.from_coeffs(coeffs)?));
        }
        Ok(Self::exact(spec, terms, cap))
    }
}

/// Exact `f op g` with the tightest guaranteed precision.
pub fn series_arithmetic(
    f: &TruncatedLaurentSeries,
    g: &TruncatedLaurentSeries,
    op: SeriesOp,
) -> Result<TruncatedLaurentSeries> {
    match op {
        SeriesOp::Add => f.add(g),
        SeriesOp::Sub => f.sub(g),
        SeriesOp::Mul => f.mul(g),
    }
}

pub fn series_invert(f: &TruncatedLaurentSeries, out_prec: i64) -> Result<TruncatedLaurentSeries> {
    f.invert(out_prec)
}

pub fn phi_component(f: &TruncatedLaurentSeries, sem: FrobeniusSemantics) -> TruncatedLaurentSeries {
    f.phi_component(sem)
}

pub fn reduce_mod_power(f: &TruncatedLaurentSeries, t: i64) -> Result<TruncatedLaurentSeries> {
    f.reduce_mod_power(t)
}
