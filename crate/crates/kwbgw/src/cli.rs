//! Command-line front end. Everything written to stdout or to --out files is
//! deterministic; progress and timings go to stderr.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::fock::{FockJson, FockSeries, TruncationSpec};
use crate::operators::families::{build_a_coeffs, OpFamily};
use crate::operators::script::{parse_opscript, Factor, ResolveCtx};
use crate::rational::{self, qi, Q};
use crate::series1d::{self, Direction, Series1, SeriesJson, VFieldCoeffs};
use crate::taugen;
use crate::verify::{self, identity::Mutation, Params};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_DEFECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

fn usage(m: impl fmt::Display) -> CliError {
    CliError::Usage(m.to_string())
}

fn internal(m: impl fmt::Display) -> CliError {
    CliError::Internal(m.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "kwbgw", version, about = "Exact KW/BGW tau-function engine and certificates")]
pub struct Cli {
    /// key = value file with default truncations; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a tau-function and its free energy
    Gen(GenArgs),
    /// Apply an operator script to a series
    Apply(ApplyArgs),
    /// Run a certificate and write its JSON report
    Verify(VerifyArgs),
    /// One-variable series utilities
    Series(SeriesArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Which {
    Kw,
    Bgw,
}

#[derive(Args, Debug, Default)]
struct Trunc {
    #[arg(long)]
    dq: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    hmin: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    hmax: Option<i32>,
    /// symmetric ħ window of this width, [-w/2, w - w/2]; --hmin/--hmax win
    #[arg(long)]
    window: Option<i32>,
}

#[derive(Args, Debug)]
struct GenArgs {
    which: Which,
    #[command(flatten)]
    trunc: Trunc,
    #[arg(long)]
    out: Option<PathBuf>,
    /// write the free-energy table as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    script: PathBuf,
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    name: String,
    #[command(flatten)]
    trunc: Trunc,
    #[arg(long)]
    range: Option<u32>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// negative control for z1/theorem1
    #[arg(long)]
    mutate: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SeriesOp {
    SolveH,
    FPhi,
    Qij,
    SolveA,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    op: SeriesOp,
    #[arg(long)]
    order: Option<u32>,
    /// vector-field coefficients "m=a,..." for qij; default: the aₘ of the main identity
    #[arg(long)]
    coeffs: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Defaults read from a `key = value` file; `#` starts a comment.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

const CONFIG_KEYS: [&str; 9] = ["dq", "hmin", "hmax", "window", "order", "samples", "seed", "range", "mutate"];

impl Config {
    pub fn parse(text: &str) -> Result<Config, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let k = k.trim().to_string();
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(format!("line {}: unknown key {k}", n + 1));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Config { values })
    }

    fn get<T: std::str::FromStr>(&self, k: &str) -> Result<Option<T>, CliError> {
        match self.values.get(k) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| usage(format!("config: bad value for {k}: {v}"))),
        }
    }
}

fn pick<T: std::str::FromStr>(flag: Option<T>, cfg: &Config, k: &str) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(k),
    }
}

/// (dq, hmin, hmax) with flags over config over nothing.
fn resolve_trunc(t: &Trunc, cfg: &Config) -> Result<(Option<u32>, Option<i32>, Option<i32>), CliError> {
    let dq = pick(t.dq, cfg, "dq")?;
    let window = pick(t.window, cfg, "window")?;
    if window.is_some_and(|w| w < 0) {
        return Err(usage("--window must be non-negative"));
    }
    let (wl, wh) = match window {
        Some(w) => (Some(-(w / 2)), Some(w - w / 2)),
        None => (None, None),
    };
    let hmin = pick(t.hmin, cfg, "hmin")?.or(wl);
    let hmax = pick(t.hmax, cfg, "hmax")?.or(wh);
    Ok((dq, hmin, hmax))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    w.write_record(header).map_err(internal)?;
    for r in rows {
        w.write_record(r).map_err(internal)?;
    }
    w.flush().map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// (monomial, ħ-exponent, coefficient) rows of log Z.
fn free_energy(z: &FockSeries) -> Result<Vec<Vec<String>>, CliError> {
    let f = z.log().map_err(internal)?;
    let mut rows = Vec::new();
    for (m, h) in f.iter() {
        for (e, c) in h.iter() {
            rows.push(vec![verify::mono_str(m.indices()), e.to_string(), rational::to_str(c)]);
        }
    }
    Ok(rows)
}

fn cmd_gen(a: &GenArgs, cfg: &Config) -> Result<i32, CliError> {
    let (dq, hmin, hmax) = resolve_trunc(&a.trunc, cfg)?;
    let dq = dq.unwrap_or(9);
    let t0 = Instant::now();
    let z = match a.which {
        Which::Kw => {
            let (lo, hi) = taugen::kw_exponent_range(dq);
            let t = TruncationSpec::new(dq, hmin.unwrap_or(lo).min(lo), hmax.unwrap_or(hi).max(hi)).map_err(usage)?;
            taugen::gen_kw(t).map_err(usage)?
        }
        Which::Bgw => {
            let t = TruncationSpec::new(dq, hmin.unwrap_or(0), hmax.unwrap_or(14)).map_err(usage)?;
            taugen::gen_bgw(t).map_err(usage)?
        }
    };
    eprintln!("gen {:?}: {} terms at weight <= {dq} in {:.2?}", a.which, z.len(), t0.elapsed());
    let rows = free_energy(&z)?;
    let table: Vec<_> = rows.iter().map(|r| json!({"mono": r[0], "exp": r[1].parse::<i32>().unwrap_or(0), "coeff": r[2]})).collect();
    let doc = json!({"series": z.to_json(), "free_energy": table});
    emit(a.out.as_deref(), &pretty(&doc))?;
    if a.out.is_some() {
        println!("{:<24} {:>4}  coefficient", "monomial", "h^");
        for r in &rows {
            println!("{:<24} {:>4}  {}", r[0], r[1], r[2]);
        }
    }
    if let Some(p) = &a.csv {
        write_csv(p, &["monomial", "hbar_exponent", "coefficient"], &rows)?;
    }
    Ok(EXIT_PASS)
}

fn read_series(path: &Path) -> Result<FockSeries, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    // a bare series, or the document written by `gen`
    let inner = v.get("series").cloned().unwrap_or(v);
    let j: FockJson = serde_json::from_value(inner).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    FockSeries::from_json(&j).map_err(usage)
}

fn cmd_apply(a: &ApplyArgs) -> Result<i32, CliError> {
    let text = fs::read_to_string(&a.script).map_err(|e| usage(format!("{}: {e}", a.script.display())))?;
    let pipeline = parse_opscript(&text).map_err(|e| usage(format!("{}:{e}", a.script.display())))?;
    let mut z = read_series(&a.input)?;
    let dq = z.trunc().dq;
    for (i, f) in pipeline.factors.iter().enumerate() {
        if matches!(f, Factor::Exp { op: OpFamily::P1, .. }) {
            return Err(usage(format!(
                "factor {} ({f}): exp(P1) carries ∂q3 with no ħ, so its action on a series is a q3 shift by a \
                 constant whose coefficients are infinite sums; it is only available inside conjugations (verify theorem1)",
                i + 1
            )));
        }
    }
    let a_coeffs = if pipeline.needs_a() { Some(build_a_coeffs(2 * dq as i64 + 4).map_err(internal)?) } else { None };
    let ctx = ResolveCtx { bound: dq.max(1) as u16, a: a_coeffs.as_ref() };
    let ops = pipeline.resolve(&ctx).map_err(usage)?;
    // written left to right, acting right to left
    for (i, op) in ops.iter().enumerate().rev() {
        let f = &pipeline.factors[i];
        op.exp_certificate().map_err(|e| usage(format!("factor {} ({f}) has no termination certificate: {e}", i + 1)))?;
        let t0 = Instant::now();
        z = op.exp_apply(&z).map_err(|e| usage(format!("factor {} ({f}): {e}", i + 1)))?;
        eprintln!("apply: factor {} done, {} terms, {:.2?}", i + 1, z.len(), t0.elapsed());
    }
    emit(a.out.as_deref(), &pretty(&z.to_json()))?;
    Ok(EXIT_PASS)
}

fn cmd_verify(a: &VerifyArgs, cfg: &Config) -> Result<i32, CliError> {
    if !verify::NAMES.contains(&a.name.as_str()) {
        return Err(usage(format!("unknown certificate {}; expected one of {}", a.name, verify::NAMES.join(", "))));
    }
    let (dq, hmin, hmax) = resolve_trunc(&a.trunc, cfg)?;
    let mutate: Option<String> = pick(a.mutate.clone(), cfg, "mutate")?;
    if let Some(m) = &mutate {
        if !matches!(a.name.as_str(), "z1" | "theorem1") {
            return Err(usage("--mutate applies to z1 and theorem1 only"));
        }
        if Mutation::parse(m).is_none() {
            let names: Vec<_> = Mutation::ALL.iter().map(|m| m.name()).collect();
            return Err(usage(format!("unknown mutation {m}; expected one of {}", names.join(", "))));
        }
    }
    let p = Params {
        dq,
        hmin,
        hmax,
        order: pick(a.order, cfg, "order")?,
        samples: pick(a.samples, cfg, "samples")?,
        seed: pick(a.seed, cfg, "seed")?,
        range: pick(a.range, cfg, "range")?,
        mutate,
    };
    eprintln!("verify {}: running", a.name);
    let t0 = Instant::now();
    let r = verify::run(&a.name, &p).ok_or_else(|| internal("certificate table out of sync"))?;
    for c in &r.checks {
        eprintln!("  {:<6} {} ({} compared, {} defects)", if c.passed { "pass" } else { "FAIL" }, c.name, c.compared, c.defects);
    }
    eprintln!("verify {}: {:?} in {:.2?}", a.name, r.status, t0.elapsed());
    emit(a.out.as_deref(), &r.to_json())?;
    Ok(if r.passed() { EXIT_PASS } else { EXIT_DEFECT })
}

fn parse_coeffs(s: &str) -> Result<VFieldCoeffs, CliError> {
    let mut pairs = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (m, v) = part.split_once('=').ok_or_else(|| usage(format!("coefficient {part}: expected m=value")))?;
        let m: i64 = m.trim().parse().map_err(|_| usage(format!("coefficient index {m}")))?;
        let v = rational::parse(v.trim()).ok_or_else(|| usage(format!("coefficient value {v}")))?;
        if m < 1 {
            return Err(usage("qij needs coefficients with m >= 1"));
        }
        pairs.push((m, v));
    }
    Ok(VFieldCoeffs::with(2, &pairs))
}

fn series_rows(s: &SeriesJson) -> Vec<Vec<String>> {
    s.coeffs.iter().enumerate().map(|(i, c)| vec![(s.valuation + i as i64).to_string(), c.clone()]).collect()
}

fn cmd_series(a: &SeriesArgs, cfg: &Config) -> Result<i32, CliError> {
    let order = pick(a.order, cfg, "order")?.unwrap_or(30) as i64;
    let (doc, header, rows): (serde_json::Value, Vec<&str>, Vec<Vec<String>>) = match a.op {
        SeriesOp::SolveH => {
            let h = series1d::solve_h_ode(order).to_json();
            let rows = series_rows(&h);
            (json!({"h": h}), vec!["exponent", "coefficient"], rows)
        }
        SeriesOp::FPhi => {
            let (f, phi) = series1d::compute_f_phi(order).map_err(usage)?;
            let (f, phi) = (f.to_json(), phi.to_json());
            let mut rows: Vec<Vec<String>> = series_rows(&f).into_iter().map(|r| vec!["f".into(), r[0].clone(), r[1].clone()]).collect();
            rows.extend(series_rows(&phi).into_iter().map(|r| vec!["phi".into(), r[0].clone(), r[1].clone()]));
            (json!({"f": f, "phi": phi}), vec!["series", "exponent", "coefficient"], rows)
        }
        SeriesOp::SolveA => {
            let a = build_a_coeffs(order).map_err(usage)?;
            let rows: Vec<Vec<String>> = a.coeffs.iter().map(|(m, c)| vec![m.to_string(), rational::to_str(c)]).collect();
            let map: BTreeMap<String, String> = rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
            (json!({"step": a.step, "a": map}), vec!["m", "a_m"], rows)
        }
        SeriesOp::Qij => {
            let maxdeg = order.max(2) as usize;
            let coeffs = match &a.coeffs {
                Some(s) => parse_coeffs(s)?,
                None => build_a_coeffs(maxdeg as i64 + 2).map_err(usage)?,
            };
            let z = Series1::monomial(Direction::Z, 1, qi(1), maxdeg as i64 + 2);
            let eta = series1d::vfield_exp_apply(&coeffs, &z, 1).map_err(usage)?;
            let q = series1d::qij_coeffs(&eta, maxdeg).map_err(usage)?;
            let rows: Vec<Vec<String>> = q.iter().map(|((i, j), v): (&(usize, usize), &Q)| vec![i.to_string(), j.to_string(), rational::to_str(v)]).collect();
            let list: Vec<_> = rows.iter().map(|r| json!({"i": r[0].parse::<usize>().unwrap_or(0), "j": r[1].parse::<usize>().unwrap_or(0), "q": r[2]})).collect();
            (json!({"eta": eta.to_json(), "qij": list}), vec!["i", "j", "q"], rows)
        }
    };
    emit(a.out.as_deref(), &pretty(&doc))?;
    if let Some(p) = &a.csv {
        write_csv(p, &header, &rows)?;
    }
    Ok(EXIT_PASS)
}

/// Parse, dispatch, and map every outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match &cli.config {
        None => Ok(Config::default()),
        Some(p) => fs::read_to_string(p)
            .map_err(|e| format!("{}: {e}", p.display()))
            .and_then(|t| Config::parse(&t).map_err(|e| format!("{}: {e}", p.display()))),
    };
    let res = cfg.map_err(CliError::Usage).and_then(|cfg| match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a, &cfg),
        Cmd::Apply(a) => cmd_apply(a),
        Cmd::Verify(a) => cmd_verify(a, &cfg),
        Cmd::Series(a) => cmd_series(a, &cfg),
    });
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Internal(_) => EXIT_INTERNAL,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        let c = Config::parse("# defaults\ndq = 8\nwindow=12\n").unwrap();
        assert_eq!(c.get::<u32>("dq").unwrap(), Some(8));
        assert!(Config::parse("depth = 3").is_err());
        assert!(Config::parse("dq 3").is_err());
    }

    #[test]
    fn window_is_symmetric_and_flags_win() {
        let cfg = Config::parse("window = 12\nhmax = 9").unwrap();
        let t = Trunc { window: None, ..Default::default() };
        assert_eq!(resolve_trunc(&t, &cfg).unwrap(), (None, Some(-6), Some(9)));
        let t = Trunc { hmax: Some(4), window: Some(5), ..Default::default() };
        assert_eq!(resolve_trunc(&t, &Config::default()).unwrap(), (None, Some(-2), Some(4)));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["kwbgw", "verify", "nonsense"]), EXIT_USAGE);
        assert_eq!(run(["kwbgw", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["kwbgw", "verify", "change", "--mutate", "a1"]), EXIT_USAGE);
        assert_eq!(run(["kwbgw", "verify", "z1", "--mutate", "bogus"]), EXIT_USAGE);
    }

    #[test]
    fn qij_coefficient_list_parses() {
        let a = parse_coeffs("1=1/3, 2=-1/2").unwrap();
        assert_eq!(a.get(2), rational::q(-1, 2));
        assert!(parse_coeffs("0=1").is_err());
    }
}
