//! End-to-end check of one spec: oracle counts, predicted cells, zeta fit and bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::FrobeniusSemantics;
use crate::oracle::{enumerate_models, EnumerationWindows, OracleConfig, PointSet};
use crate::phimod::{detect_normal_form, NormalFormKind, PhiModuleSpec};
use crate::strata::{predict_cell, predicted_cell_count, CellDescriptor, StratumKey};
use crate::zeta::{case_bound, fit_zeta, theorem_bound, Case, ZetaFunction};

/// Consecutive degrees that must fit one exponent vector.
pub const STABLE_RUN: usize = 3;

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub degrees: Vec<u32>,
    /// Overrides the default `s, t` window.
    pub st_window: Option<(i64, i64)>,
    pub v_floor: Option<i64>,
    pub semantics: FrobeniusSemantics,
    pub workers: usize,
}

impl VerifyConfig {
    pub fn new(degrees: Vec<u32>) -> Self {
        VerifyConfig {
            degrees,
            st_window: None,
            v_floor: None,
            semantics: FrobeniusSemantics::Linear,
            workers: 1,
        }
    }

    pub fn windows(&self, spec: &PhiModuleSpec, degree: u32) -> EnumerationWindows {
        let mut w = EnumerationWindows::default_for(spec.p, spec.e, degree);
        if let Some((lo, hi)) = self.st_window {
            w.st_lo = lo;
            w.st_hi = hi;
        }
        if let Some(v) = self.v_floor {
            w.v_floor = v;
        }
        w
    }

    fn validate(&self) -> Result<()> {
        if self.degrees.is_empty() || self.degrees.windows(2).any(|w| w[0] >= w[1]) || self.degrees[0] == 0 {
            return Err(Error::InvalidInput("degrees must be a nonempty increasing list of positive integers".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidInput("worker count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub degree: u32,
    pub field_size: u64,
    pub count: u128,
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumRow {
    pub key: StratumKey,
    pub cell: Option<CellDescriptor>,
    pub oracle: Vec<u128>,
    pub predicted: Vec<u128>,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub saturation: bool,
    pub strata: bool,
    pub bound: bool,
    pub zeta: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub p: u32,
    pub n: usize,
    pub e: u32,
    pub field_size: u64,
    pub frobenius: String,
    pub normal_form: String,
    pub degrees: Vec<DegreeRow>,
    pub strata: Vec<StratumRow>,
    pub d_max: Option<i64>,
    pub theorem_bound: i64,
    pub case_bound: Option<i64>,
    pub stabilized_at_degree: Option<u32>,
    pub zeta: Option<ZetaFunction>,
    pub zeta_display: Option<String>,
    pub zeta_error: Option<String>,
    pub verdicts: Verdicts,
    pub pass: bool,
    pub first_divergence: Option<String>,
}

/// Oracle counts at one degree, with the widened-window comparison.
pub fn saturated_count(spec: &PhiModuleSpec, cfg: &VerifyConfig, degree: u32) -> Result<(PointSet, bool)> {
    let win = cfg.windows(spec, degree);
    let ocfg = OracleConfig {
        semantics: cfg.semantics,
        workers: cfg.workers,
        list_limit: 0,
    };
    let a = enumerate_models(spec, &win, &ocfg)?;
    let b = enumerate_models(spec, &win.widened(), &ocfg)?;
    let ok = a.count == b.count && a.per_stratum == b.per_stratum;
    Ok((a, ok))
}

/// Earliest degree from which the counts fit one exponent vector with `d`.
fn stabilize(counts: &[(u32, u128)], d: usize, q_base: u64) -> (Option<u32>, std::result::Result<ZetaFunction, String>) {
    let need = (d + 1).max(STABLE_RUN.min(counts.len()));
    let mut last_err = format!("need at least {need} degrees");
    for start in 0..counts.len() {
        let tail = &counts[start..];
        if tail.len() < need {
            break;
        }
        match fit_zeta(tail, d, q_base) {
            Ok(z) => return (Some(tail[0].0), Ok(z)),
            Err(e) => last_err = e.to_string(),
        }
    }
    (None, Err(last_err))
}

/// Smallest `d` whose fit succeeds, for specs without a stratum description.
fn infer_d(counts: &[(u32, u128)], q_base: u64) -> Option<usize> {
    (0..counts.len()).find(|&d| stabilize(counts, d, q_base).1.is_ok())
}

pub fn run_verify(spec: &PhiModuleSpec, cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let kind = detect_normal_form(spec)?;
    let (p, e) = (spec.p as i64, spec.e as i64);
    let q_base = spec.field.size();

    let mut degrees = Vec::new();
    let mut per_degree: Vec<BTreeMap<StratumKey, u128>> = Vec::new();
    for &k in &cfg.degrees {
        let (ps, sat) = saturated_count(spec, cfg, k)?;
        degrees.push(DegreeRow {
            degree: k,
            field_size: ps.field_size,
            count: ps.count,
            saturated: sat,
        });
        per_degree.push(ps.per_stratum);
    }
    let saturation = degrees.iter().all(|d| d.saturated);
    let counts: Vec<(u32, u128)> = degrees.iter().map(|d| (d.degree, d.count)).collect();

    // Per-stratum table over every key seen at any degree.
    let mut keys: Vec<StratumKey> = per_degree.iter().flat_map(|m| m.keys().cloned()).collect();
    keys.sort();
    keys.dedup();
    let mut strata = Vec::new();
    for key in keys {
        let cell = match kind {
            NormalFormKind::Other => None,
            _ => predict_cell(&kind, &spec.field, cfg.semantics, &key, e, p)?,
        };
        let oracle: Vec<u128> = per_degree.iter().map(|m| m.get(&key).copied().unwrap_or(0)).collect();
        let predicted = degrees
            .iter()
            .map(|d| match cell {
                Some(c) => predicted_cell_count(c, d.field_size),
                None => Ok(0),
            })
            .collect::<Result<Vec<_>>>()?;
        strata.push(StratumRow {
            agrees: false,
            key,
            cell,
            oracle,
            predicted,
        });
    }

    let d_max = match kind {
        NormalFormKind::Other => infer_d(&counts, q_base).map(|d| d as i64),
        _ => strata
            .iter()
            .filter(|r| r.oracle.last().is_some_and(|&c| c > 0))
            .filter_map(|r| r.cell.map(|c| c.d))
            .max(),
    };
    let empty = counts.iter().all(|&(_, c)| c == 0);
    let (stabilized_at_degree, fit) = match d_max {
        _ if empty => (
            Some(cfg.degrees[0]),
            Ok(ZetaFunction {
                q_base,
                m: Vec::new(),
            }),
        ),
        Some(d) if d >= 0 => stabilize(&counts, d as usize, q_base),
        _ => (None, Err("no occupied stratum".to_string())),
    };
    let from = stabilized_at_degree.unwrap_or(cfg.degrees[0]);
    let mut first_divergence = None;
    for row in strata.iter_mut() {
        row.agrees = match kind {
            NormalFormKind::Other => true,
            _ => degrees
                .iter()
                .zip(row.oracle.iter().zip(&row.predicted))
                .filter(|(d, _)| d.degree >= from)
                .all(|(_, (o, pr))| o == pr),
        };
        if !row.agrees && first_divergence.is_none() {
            first_divergence = Some(format!(
                "stratum {}: oracle {:?}, predicted {:?}",
                row.key, row.oracle, row.predicted
            ));
        }
    }
    let strata_ok = strata.iter().all(|r| r.agrees);
    let tb = theorem_bound(p, spec.n as i64, e);
    let cb = match kind {
        NormalFormKind::ReducibleTriangular(_) => Some(case_bound(p, spec.n as i64, e, Case::Reducible)),
        NormalFormKind::IrreducibleStandard(_) => Some(case_bound(p, spec.n as i64, e, Case::Irreducible)),
        NormalFormKind::Other => None,
    };
    let bound = empty || d_max.is_some_and(|d| d <= tb && cb.is_none_or(|c| d <= c));
    let zeta_ok = fit.is_ok();
    if first_divergence.is_none() {
        first_divergence = if !saturation {
            Some("counts change when the windows are widened".into())
        } else if !bound {
            Some(format!("d_max {d_max:?} exceeds the bound"))
        } else if let Err(err) = &fit {
            Some(format!("zeta fit: {err}"))
        } else {
            None
        };
    }
    let (zeta, zeta_error) = match fit {
        Ok(z) => (Some(z), None),
        Err(e) => (None, Some(e)),
    };
    let verdicts = Verdicts {
        saturation,
        strata: strata_ok,
        bound,
        zeta: zeta_ok,
    };
    let pass = saturation && strata_ok && bound && zeta_ok;
    Ok(VerifyReport {
        p: spec.p,
        n: spec.n,
        e: spec.e,
        field_size: q_base,
        frobenius: cfg.semantics.as_str().to_string(),
        normal_form: match kind {
            NormalFormKind::ReducibleTriangular(_) => "reducible",
            NormalFormKind::IrreducibleStandard(_) => "irreducible",
            NormalFormKind::Other => "other",
        }
        .to_string(),
        degrees,
        strata,
        d_max,
        theorem_bound: tb,
        case_bound: cb,
        stabilized_at_degree,
        zeta_display: zeta.as_ref().map(|z| z.to_string()),
        zeta,
        zeta_error,
        verdicts,
        pass,
        first_divergence,
    })
}
