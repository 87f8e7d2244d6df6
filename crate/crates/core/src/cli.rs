//! The `hllab` command line.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when a verification
//! campaign fails. Report numbers carry 12 significant digits; tensor JSON is
//! written at full precision so that it reloads bitwise.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::experiments::{
    diagonal_suite, growth_scan_with, lower_index_scan_with, random_suite, rank_one_suite, verify_constant_one,
    CampaignStatus, GrowthReport, SuiteInstance, DEFAULT_SLOPE_THRESHOLD, DEFAULT_SUITE_SIZE, DEFAULT_TOLERANCE,
};
use crate::exponents::{admissible, parse_exponent_list, Exponent, ExponentProfile, MixedExponents};
use crate::opnorm::{ascend_with, enumerate_exact, operator_norm, AscentConfig, NormEstimate, DEFAULT_RESTARTS};
use crate::tensor::CoefficientTensor;
use crate::witnesses::{diagonal_operator, lift_operator, rademacher, rademacher_matrix_norm_with, slice_operator, Direction};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "HLLAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_FAILED_CAMPAIGN: i32 = 3;

#[derive(Debug, Clone)]
pub struct ExponentList(pub Vec<Exponent>);

fn parse_exponents(s: &str) -> Result<ExponentList, String> {
    parse_exponent_list(s).map(ExponentList).map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
pub struct SizeList(pub Vec<usize>);

fn parse_sizes(s: &str) -> Result<SizeList, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad size {t:?}")))
        .collect::<Result<_, _>>()
        .map(SizeList)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "hllab", version, about = "Mixed-norm inequalities for multilinear operators on lp spaces")]
pub struct Cli {
    /// Worker thread cap (falls back to HLLAB_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub m: Option<usize>,
    /// Domain exponents, e.g. `10,10,inf`.
    #[arg(long, value_parser = parse_exponents)]
    pub p: Option<ExponentList>,
    /// Cotype of the target; 1 selects scalar targets.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
}

impl ProfileArgs {
    fn profile(&self) -> anyhow::Result<ExponentProfile> {
        let p = self.p.as_ref().ok_or_else(|| anyhow!("--p is required"))?.0.clone();
        if let Some(m) = self.m {
            if m != p.len() {
                bail!("--m {m} does not match {} exponents in --p", p.len());
            }
        }
        Ok(ExponentProfile::new(p, self.r)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Auto,
    Ascend,
    Enumerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WitnessKind {
    Diagonal,
    Lift,
    Slice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Transpose,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal thresholds λ (δ for r = 1) and, with --q, admissibility margins.
    Exponents {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_parser = parse_exponents)]
        q: Option<ExponentList>,
        #[arg(long, default_value_t = 0.0)]
        slack: f64,
    },
    /// Mixed (or flat) norm of a tensor JSON file.
    MixedNorm {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long, value_parser = parse_exponents, required_unless_present = "flat")]
        q: Option<ExponentList>,
        #[arg(long, conflicts_with = "q")]
        flat: Option<Exponent>,
    },
    /// Operator norm over the unit balls of l_{p1} x ... x l_{pm}.
    Opnorm {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long, value_parser = parse_exponents)]
        p: ExponentList,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Growth of mixed_norm / operator_norm along the diagonal witnesses.
    Growth {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_parser = parse_exponents)]
        q: Option<ExponentList>,
        #[arg(long, value_parser = parse_sizes)]
        sizes: Option<SizeList>,
        /// Index under test; k >= 2 scans the lifted lower-arity family.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_SLOPE_THRESHOLD)]
        slope_threshold: f64,
        /// JSON config replacing the flags above.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Constant-one inequality campaign.
    Verify {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_parser = parse_exponents)]
        q: Option<ExponentList>,
        /// `random:3x3:200`, `rank-one:3x3:50`, `diagonal:2,4,8` or `tensor:<path>`.
        #[arg(long)]
        suite: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        /// JSON config replacing the flags above.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rademacher matrix R_n, or with --norm its l_t -> l_s norm.
    Rademacher {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        emit: Option<Format>,
        /// `t,s` exponent pair.
        #[arg(long, value_parser = parse_exponents)]
        norm: Option<ExponentList>,
        #[arg(long, value_enum, default_value = "forward")]
        direction: DirectionArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit a witness tensor as JSON.
    Witness {
        #[arg(long, value_enum)]
        kind: WitnessKind,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long)]
        n: Option<usize>,
        /// Input tensor for lift/slice.
        #[arg(long)]
        tensor: Option<PathBuf>,
        /// Value norm of the sliced tensor.
        #[arg(long)]
        rho: Option<Exponent>,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub profile: ExponentProfile,
    pub q: MixedExponents,
    pub suites: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub profile: ExponentProfile,
    pub q: MixedExponents,
    pub sizes: Vec<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_slope_threshold")]
    pub slope_threshold: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

fn default_k() -> usize {
    1
}

fn default_slope_threshold() -> f64 {
    DEFAULT_SLOPE_THRESHOLD
}

/// Formats a number with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round12(x);
    if r == 0.0 {
        "0".into()
    } else if (1e-5..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn round12(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Rounds every float in a JSON tree to 12 significant digits.
fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(f) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round12(f)) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

fn json_report(subcommand: &str, body: Value) -> String {
    let mut doc = json!({ "schema_version": SCHEMA_VERSION, "subcommand": subcommand });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    round_json(&mut doc);
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn read_tensor(path: &PathBuf) -> anyhow::Result<CoefficientTensor> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CoefficientTensor::from_json(&text).with_context(|| format!("loading tensor {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn mixed(q: &Option<ExponentList>) -> anyhow::Result<MixedExponents> {
    let q = q.as_ref().ok_or_else(|| anyhow!("--q is required"))?;
    Ok(MixedExponents::new(q.0.clone())?)
}

fn parse_dims(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split('x')
        .map(|t| t.parse::<usize>().map_err(|_| anyhow!("bad dimension {t:?} in {s:?}")))
        .collect()
}

fn build_suite(spec: &str, profile: &ExponentProfile, seed: u64) -> anyhow::Result<Vec<SuiteInstance>> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| anyhow!("bad suite spec {spec:?}"))?;
    let shape_count = |rest: &str| -> anyhow::Result<(Vec<usize>, usize)> {
        let (dims, count) = match rest.split_once(':') {
            Some((d, c)) => (d, c.parse().map_err(|_| anyhow!("bad suite count {c:?}"))?),
            None => (rest, DEFAULT_SUITE_SIZE),
        };
        Ok((parse_dims(dims)?, count))
    };
    let suite = match kind {
        "random" => {
            let (dims, count) = shape_count(rest)?;
            random_suite(&dims, count, seed)?
        }
        "rank-one" => {
            let (dims, count) = shape_count(rest)?;
            rank_one_suite(&dims, count, seed)?
        }
        "diagonal" => diagonal_suite(profile, &parse_sizes(rest).map_err(|e| anyhow!(e))?.0)?,
        "tensor" => {
            let path = PathBuf::from(rest);
            vec![SuiteInstance {
                descriptor: format!("tensor[{rest}]"),
                tensor: read_tensor(&path)?,
                known_norm: None,
            }]
        }
        other => bail!("unknown suite kind {other:?}"),
    };
    Ok(suite)
}

fn estimate_body(e: &NormEstimate) -> Value {
    serde_json::to_value(e).expect("estimate serializes")
}

fn estimate_csv(e: &NormEstimate) -> anyhow::Result<String> {
    csv_table(
        &["value", "status", "restarts_used", "iterations", "reinitializations"],
        vec![vec![
            fmt_num(e.value),
            serde_json::to_value(e.status)?.as_str().unwrap_or_default().to_string(),
            e.restarts_used.to_string(),
            e.iterations.to_string(),
            e.reinitializations.to_string(),
        ]],
    )
}

fn growth_output(report: &GrowthReport, format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => json_report("growth", serde_json::to_value(report)?),
        Format::Csv => {
            let verdict = serde_json::to_value(report.verdict)?;
            let rows = (0..report.sizes.len())
                .map(|i| {
                    vec![
                        report.family.clone(),
                        report.sizes[i].to_string(),
                        fmt_num(report.mixed_norms[i]),
                        fmt_num(report.operator_norms[i]),
                        fmt_num(report.ratios[i]),
                        fmt_num(report.fitted_slope),
                        fmt_num(report.theoretical_slope),
                        verdict.as_str().unwrap_or_default().to_string(),
                    ]
                })
                .collect();
            csv_table(
                &[
                    "family",
                    "n",
                    "mixed_norm",
                    "operator_norm",
                    "ratio",
                    "fitted_slope",
                    "theoretical_slope",
                    "verdict",
                ],
                rows,
            )?
        }
    })
}

struct Outcome {
    text: String,
    code: i32,
}

impl From<String> for Outcome {
    fn from(text: String) -> Self {
        Outcome { text, code: EXIT_OK }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<Outcome> {
    let format = cli.format;
    match &cli.command {
        Command::Exponents { profile, q, slack } => {
            let profile = profile.profile()?;
            let thresholds = profile.thresholds()?;
            let adm = match q {
                Some(q) => Some(admissible(&profile, &MixedExponents::new(q.0.clone())?, *slack)?),
                None => None,
            };
            Ok(match format {
                Format::Json => json_report(
                    "exponents",
                    json!({ "profile": profile, "thresholds": thresholds, "admissibility": adm }),
                ),
                Format::Csv => {
                    let mut header = vec!["k", "p", "threshold"];
                    if adm.is_some() {
                        header.extend(["q", "margin", "admissible"]);
                    }
                    let rows = (0..profile.m())
                        .map(|k| {
                            let mut row = vec![
                                (k + 1).to_string(),
                                profile.p()[k].to_string(),
                                fmt_num(thresholds[k]),
                            ];
                            if let (Some(a), Some(q)) = (&adm, q) {
                                row.push(q.0[k].to_string());
                                row.push(fmt_num(a.margins[k]));
                                row.push(a.admissible.to_string());
                            }
                            row
                        })
                        .collect();
                    csv_table(&header, rows)?
                }
            }
            .into())
        }
        Command::MixedNorm { tensor, q, flat } => {
            let t = read_tensor(tensor)?;
            let (kind, value) = match flat {
                Some(s) => ("flat", t.flat_norm(*s)),
                None => ("mixed", t.mixed_norm(&mixed(q)?)?),
            };
            Ok(match format {
                Format::Json => json_report("mixed-norm", json!({ "kind": kind, "value": value })),
                Format::Csv => csv_table(&["kind", "value"], vec![vec![kind.into(), fmt_num(value)]])?,
            }
            .into())
        }
        Command::Opnorm {
            tensor,
            p,
            method,
            seed,
            restarts,
        } => {
            let t = read_tensor(tensor)?;
            let cfg = AscentConfig {
                seed: *seed,
                restarts: *restarts,
                ..AscentConfig::default()
            };
            let e = match method {
                Method::Auto => operator_norm(&t, &p.0, &cfg)?,
                Method::Ascend => ascend_with(&t, &p.0, &cfg)?,
                Method::Enumerate => enumerate_exact(&t, &p.0)?,
            };
            Ok(match format {
                Format::Json => json_report("opnorm", estimate_body(&e)),
                Format::Csv => estimate_csv(&e)?,
            }
            .into())
        }
        Command::Growth {
            profile,
            q,
            sizes,
            k,
            slope_threshold,
            config,
        } => {
            let cfg = match config {
                Some(path) => read_json::<GrowthConfig>(path)?,
                None => GrowthConfig {
                    profile: profile.profile()?,
                    q: mixed(q)?,
                    sizes: sizes.as_ref().ok_or_else(|| anyhow!("--sizes is required"))?.0.clone(),
                    k: *k,
                    slope_threshold: *slope_threshold,
                },
            };
            let report = if cfg.k <= 1 {
                growth_scan_with(&cfg.profile, &cfg.q, &cfg.sizes, cfg.slope_threshold)?
            } else {
                lower_index_scan_with(&cfg.profile, cfg.k, &cfg.q, &cfg.sizes, cfg.slope_threshold)?
            };
            Ok(growth_output(&report, format)?.into())
        }
        Command::Verify {
            profile,
            q,
            suite,
            seed,
            tolerance,
            restarts,
            config,
        } => {
            let cfg = match config {
                Some(path) => read_json::<VerifyConfig>(path)?,
                None => VerifyConfig {
                    profile: profile.profile()?,
                    q: mixed(q)?,
                    suites: suite.clone(),
                    seed: *seed,
                    tolerance: *tolerance,
                    restarts: *restarts,
                },
            };
            if cfg.suites.is_empty() {
                bail!("at least one --suite is required");
            }
            let mut instances = Vec::new();
            for (i, spec) in cfg.suites.iter().enumerate() {
                instances.extend(build_suite(spec, &cfg.profile, cfg.seed.wrapping_add(i as u64))?);
            }
            let ascent = AscentConfig {
                seed: cfg.seed,
                restarts: cfg.restarts,
                ..AscentConfig::default()
            };
            let campaign = verify_constant_one(&cfg.profile, &cfg.q, &instances, cfg.tolerance, &ascent)?;
            let text = match format {
                Format::Json => json_report("verify", serde_json::to_value(&campaign)?),
                Format::Csv => {
                    let rows = campaign
                        .reports
                        .iter()
                        .map(|r| {
                            Ok(vec![
                                r.instance.clone(),
                                fmt_num(r.mixed_norm),
                                fmt_num(r.operator_norm),
                                serde_json::to_value(r.norm_status)?.as_str().unwrap_or_default().to_string(),
                                fmt_num(r.ratio),
                                serde_json::to_value(r.verdict)?.as_str().unwrap_or_default().to_string(),
                            ])
                        })
                        .collect::<anyhow::Result<Vec<_>>>()?;
                    csv_table(&["instance", "mixed_norm", "operator_norm", "norm_status", "ratio", "verdict"], rows)?
                }
            };
            let code = if campaign.status == CampaignStatus::Failed {
                EXIT_FAILED_CAMPAIGN
            } else {
                EXIT_OK
            };
            Ok(Outcome { text, code })
        }
        Command::Rademacher {
            n,
            emit,
            norm,
            direction,
            seed,
        } => {
            let r = rademacher(*n)?;
            if let Some(pair) = norm {
                let [t, s] = pair.0[..] else {
                    bail!("--norm takes exactly two exponents t,s");
                };
                let dir = match direction {
                    DirectionArg::Forward => Direction::Forward,
                    DirectionArg::Transpose => Direction::Transpose,
                };
                let cfg = AscentConfig {
                    seed: *seed,
                    ..AscentConfig::default()
                };
                let e = rademacher_matrix_norm_with(&r, t, s, dir, &cfg)?;
                return Ok(match format {
                    Format::Json => json_report("rademacher", estimate_body(&e)),
                    Format::Csv => estimate_csv(&e)?,
                }
                .into());
            }
            Ok(match emit.unwrap_or(format) {
                Format::Csv => r.to_csv(),
                Format::Json => {
                    let rows: Vec<Vec<i8>> = (0..r.rows()).map(|i| r.row(i).to_vec()).collect();
                    json_report("rademacher", json!({ "n": r.level(), "rows": rows }))
                }
            }
            .into())
        }
        Command::Witness {
            kind,
            profile,
            n,
            tensor,
            rho,
        } => {
            let t = match kind {
                WitnessKind::Diagonal => {
                    let n = n.ok_or_else(|| anyhow!("--n is required"))?;
                    let profile = profile.profile()?;
                    let d = if profile.is_scalar() { 1 } else { n };
                    diagonal_operator(n, &profile, d)?
                }
                WitnessKind::Lift => {
                    let t = read_tensor(tensor.as_ref().ok_or_else(|| anyhow!("--tensor is required"))?)?;
                    lift_operator(&t, n.ok_or_else(|| anyhow!("--n is required"))?)?
                }
                WitnessKind::Slice => {
                    let t = read_tensor(tensor.as_ref().ok_or_else(|| anyhow!("--tensor is required"))?)?;
                    slice_operator(&t, rho.ok_or_else(|| anyhow!("--rho is required"))?)?
                }
            };
            let mut text = t.to_json();
            text.push('\n');
            Ok(text.into())
        }
    }
}

fn thread_cap(cli: &Cli) -> anyhow::Result<Option<usize>> {
    if let Some(t) = cli.threads {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| anyhow!("{THREADS_ENV}={v:?} is not a thread count")),
        Err(_) => Ok(None),
    }
}

fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    let outcome = match thread_cap(cli)? {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()?
            .install(|| dispatch(cli))?,
        None => dispatch(cli)?,
    };
    Ok(outcome)
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing results to `out` (or `--output`) and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{line}");
            return EXIT_INVALID;
        }
    };
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {}", one_line(&e));
            return EXIT_INVALID;
        }
    };
    let written = match &cli.output {
        Some(path) => fs::write(path, &outcome.text).with_context(|| format!("writing {}", path.display())),
        None => out.write_all(outcome.text.as_bytes()).map_err(anyhow::Error::from),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {}", one_line(&e));
        return EXIT_INVALID;
    }
    outcome.code
}

fn one_line(e: &anyhow::Error) -> String {
    let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
    chain.join(": ").replace('\n', " ")
}

/// Entry point used by the binary.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
