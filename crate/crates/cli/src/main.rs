//! `kisin`: point counts, strata, zeta functions and bounds for finite flat models.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use kisin_core::oracle::{enumerate_models, OracleConfig};
use kisin_core::strata::{candidate_keys, predict_cell, red_cardinalities, unit_closure};
use kisin_core::verify::{run_verify, saturated_count, VerifyConfig, VerifyReport};
use kisin_core::zeta::{bound_report, make_witness, WitnessKind};
use kisin_core::{emit_spec_json, parse_spec_json, Error, FrobeniusSemantics, NormalFormKind, PhiModuleSpec, StratumKey};

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_PRECISION: u8 = 3;

/// `println!` that exits quietly when stdout is closed.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if writeln!(std::io::stdout().lock(), $($arg)*).is_err() {
            std::process::exit(EXIT_FAIL as i32);
        }
    }};
}

#[derive(Parser)]
#[command(name = "kisin", version, about = "Moduli of finite flat models of rank-2 phi-modules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact model counts per extension degree (one JSON record per degree).
    OracleCount(RunArgs),
    /// Predicted cell of every candidate stratum.
    Strata(SpecArg),
    /// Largest occupied stratum dimension.
    Dim(RunArgs),
    /// Zeta function fitted to the counts.
    Zeta(RunArgs),
    /// Dimension bounds for (p, n, e).
    Bound(BoundArgs),
    /// Emits an extremal witness spec.
    Witness(WitnessArgs),
    /// Full check: counts, strata, zeta fit and bounds.
    Verify(RunArgs),
}

#[derive(Args)]
struct SpecArg {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = Frobenius::Linear)]
    frobenius: Frobenius,
    #[arg(long, value_enum, default_value_t = Out::Json)]
    out: Out,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    /// `1..4` (inclusive) or `1,2,3`.
    #[arg(long, default_value = "1..3", value_parser = parse_degrees)]
    degrees: Degrees,
    /// Inclusive range for every s_i, t_i, e.g. `-5..5`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    window_st: Option<(i64, i64)>,
    #[arg(long, allow_hyphen_values = true)]
    v_floor: Option<i64>,
    #[arg(long, value_enum, default_value_t = Frobenius::Linear)]
    frobenius: Frobenius,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Out::Json)]
    out: Out,
    /// List the points when a degree has at most this many.
    #[arg(long, default_value_t = 0)]
    list: u128,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    p: i64,
    #[arg(long)]
    n: i64,
    #[arg(long)]
    e: i64,
    #[arg(long, value_enum, default_value_t = Out::Json)]
    out: Out,
}

#[derive(Args)]
struct WitnessArgs {
    #[arg(long)]
    p: u32,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    e: u32,
    /// onepoint, reducible_a|b|c or irreducible_a|b|c.
    #[arg(long)]
    which: String,
    /// Writes the spec here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Degrees(Vec<u32>);

#[derive(Clone, Copy, ValueEnum)]
enum Frobenius {
    Linear,
    #[value(name = "p-power")]
    PPower,
}

impl From<Frobenius> for FrobeniusSemantics {
    fn from(f: Frobenius) -> Self {
        match f {
            Frobenius::Linear => FrobeniusSemantics::Linear,
            Frobenius::PPower => FrobeniusSemantics::PPower,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Out {
    Json,
    Tsv,
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
    let lo = a.trim().parse::<i64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<i64>().map_err(|e| e.to_string())?;
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

fn parse_degrees(s: &str) -> Result<Degrees, String> {
    let v: Vec<u32> = if s.contains("..") {
        let (lo, hi) = parse_range(s)?;
        if lo < 1 {
            return Err("degrees start at 1".into());
        }
        (lo as u32..=hi as u32).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<u32>().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?
    };
    if v.is_empty() || v[0] == 0 || v.windows(2).any(|w| w[0] >= w[1]) {
        return Err("degrees must be positive and increasing".into());
    }
    Ok(Degrees(v))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Precision(_) => EXIT_PRECISION,
        Error::Fit(_) => EXIT_FAIL,
        Error::Internal(_) => EXIT_FAIL,
        _ => EXIT_INPUT,
    }
}

fn load(path: &PathBuf) -> Result<(PhiModuleSpec, NormalFormKind), Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_spec_json(&text)
}

fn verify_config(a: &RunArgs) -> VerifyConfig {
    VerifyConfig {
        degrees: a.degrees.0.clone(),
        st_window: a.window_st,
        v_floor: a.v_floor,
        semantics: a.frobenius.into(),
        workers: a.workers.max(1),
    }
}

fn print_json(v: &Value, pretty: bool) {
    if pretty {
        out!("{}", serde_json::to_string_pretty(v).expect("serializable"));
    } else {
        out!("{}", serde_json::to_string(v).expect("serializable"));
    }
}

fn oracle_count(a: &RunArgs) -> Result<u8, Error> {
    let (spec, _) = load(&a.spec)?;
    let cfg = verify_config(a);
    let mut code = 0;
    for &k in &a.degrees.0 {
        let (ps, saturated) = saturated_count(&spec, &cfg, k)?;
        let points = if ps.count <= a.list {
            let ocfg = OracleConfig {
                semantics: cfg.semantics,
                workers: cfg.workers,
                list_limit: a.list,
            };
            enumerate_models(&spec, &cfg.windows(&spec, k), &ocfg)?.points
        } else {
            None
        };
        if !saturated {
            code = EXIT_PRECISION;
        }
        match a.out {
            Out::Json => {
                let mut rec = json!({
                    "ext_degree": k,
                    "field_size": ps.field_size,
                    "count": ps.count,
                    "saturated": saturated,
                    "per_stratum": ps.per_stratum.iter().map(|(key, c)| json!({"key": key, "count": c})).collect::<Vec<_>>(),
                });
                if let Some(pts) = points {
                    rec["points"] = pts
                        .iter()
                        .map(|c| json!({"s": c.s, "t": c.t, "v": c.v.iter().map(|x| x.to_pairs()).collect::<Vec<_>>()}))
                        .collect();
                }
                print_json(&rec, false);
            }
            Out::Tsv => {
                out!("{k}\t{}\t{}\t{saturated}", ps.field_size, ps.count);
                for (key, c) in &ps.per_stratum {
                    out!("{k}\t{key}\t{c}");
                }
            }
        }
    }
    if code != 0 {
        eprintln!("error: counts are not saturated; widen --window-st / --v-floor");
    }
    Ok(code)
}

fn strata(a: &SpecArg) -> Result<u8, Error> {
    let (spec, kind) = load(&a.spec)?;
    let (p, e) = (spec.p as i64, spec.e as i64);
    let sem: FrobeniusSemantics = a.frobenius.into();
    let closes = match &kind {
        NormalFormKind::ReducibleTriangular(f) => unit_closure(&spec.field, &f.alpha, &f.beta, sem)?,
        _ => false,
    };
    for key in candidate_keys(&kind, spec.n, e, p)? {
        let Some(cell) = predict_cell(&kind, &spec.field, sem, &key, e, p)? else {
            continue;
        };
        let cards = match &key {
            StratumKey::Reducible { a, b } => Some(red_cardinalities(a, b, e, p, closes)),
            _ => None,
        };
        match a.out {
            Out::Json => print_json(
                &json!({"key": key, "d": cell.d, "g": cell.g, "cardinalities": cards}),
                false,
            ),
            Out::Tsv => out!("{key}\t{}\t{}", cell.d, cell.g),
        }
    }
    Ok(0)
}

fn verified(a: &RunArgs) -> Result<VerifyReport, Error> {
    let (spec, _) = load(&a.spec)?;
    run_verify(&spec, &verify_config(a))
}

fn dim(a: &RunArgs) -> Result<u8, Error> {
    let r = verified(a)?;
    let occupied: Vec<Value> = r
        .strata
        .iter()
        .filter(|s| s.oracle.last().is_some_and(|&c| c > 0))
        .map(|s| json!({"key": s.key, "d": s.cell.map(|c| c.d), "g": s.cell.map(|c| c.g)}))
        .collect();
    match a.out {
        Out::Json => print_json(
            &json!({"d_max": r.d_max, "theorem_bound": r.theorem_bound, "case_bound": r.case_bound, "occupied": occupied}),
            true,
        ),
        Out::Tsv => out!("{:?}\t{}\t{:?}", r.d_max, r.theorem_bound, r.case_bound),
    }
    Ok(if r.verdicts.saturation { 0 } else { EXIT_PRECISION })
}

fn zeta(a: &RunArgs) -> Result<u8, Error> {
    let r = verified(a)?;
    if !r.verdicts.saturation {
        eprintln!("error: counts are not saturated; widen --window-st / --v-floor");
        return Ok(EXIT_PRECISION);
    }
    let Some(z) = &r.zeta else {
        return Err(Error::Fit(r.zeta_error.unwrap_or_default()));
    };
    match a.out {
        Out::Json => print_json(
            &json!({"d": r.d_max, "m": z.m, "display": z.to_string(), "stabilized_at_degree": r.stabilized_at_degree}),
            true,
        ),
        Out::Tsv => out!("{:?}\t{:?}\t{z}\t{:?}", r.d_max, z.m, r.stabilized_at_degree),
    }
    Ok(0)
}

fn bound(a: &BoundArgs) -> Result<u8, Error> {
    if a.p < 3 || a.n < 1 || a.e < 1 {
        return Err(Error::InvalidInput("need p >= 3, n >= 1, e >= 1".into()));
    }
    let r = bound_report(a.p, a.n, a.e);
    match a.out {
        Out::Json => print_json(&serde_json::to_value(&r).expect("serializable"), true),
        Out::Tsv => out!("{}\t{}\t{}\t{}\t{}", r.e0, r.e1, r.theorem_bound, r.reducible, r.irreducible),
    }
    Ok(0)
}

fn witness(a: &WitnessArgs) -> Result<u8, Error> {
    let which: WitnessKind = a.which.parse()?;
    let spec = make_witness(a.p, a.n, a.e, which)?;
    let text = emit_spec_json(&spec);
    match &a.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))?,
        None => out!("{}", text.trim_end()),
    }
    Ok(0)
}

fn verify(a: &RunArgs) -> Result<u8, Error> {
    let r = verified(a)?;
    match a.out {
        Out::Json => print_json(&serde_json::to_value(&r).expect("serializable"), true),
        Out::Tsv => {
            out!("key\td\tg\toracle\tpredicted\tagrees");
            for s in &r.strata {
                let fmt = |v: &[u128]| v.iter().map(u128::to_string).collect::<Vec<_>>().join(",");
                out!(
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    s.key,
                    s.cell.map_or("-".into(), |c| c.d.to_string()),
                    s.cell.map_or("-".into(), |c| c.g.to_string()),
                    fmt(&s.oracle),
                    fmt(&s.predicted),
                    s.agrees
                );
            }
            out!("pass\t{}", r.pass);
        }
    }
    if r.pass {
        Ok(0)
    } else {
        if let Some(d) = &r.first_divergence {
            eprintln!("verification failed: {d}");
        }
        Ok(if r.verdicts.saturation { EXIT_FAIL } else { EXIT_PRECISION })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::OracleCount(a) => oracle_count(a),
        Command::Strata(a) => strata(a),
        Command::Dim(a) => dim(a),
        Command::Zeta(a) => zeta(a),
        Command::Bound(a) => bound(a),
        Command::Witness(a) => witness(a),
        Command::Verify(a) => verify(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
