//! Command-line front end: `box`, `attack`, `verify` and `scan`.
//!
//! Exit codes: 0 on success or pass, 1 when a check fails, 2 on usage
//! errors, bad parameters and infeasible verifications.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use memattack_core::attack::{self, ScanRow};
use memattack_core::box_lab::{bias_any_box, build_unbiased_box, AnyBox, BoxParams, Mode, SinglePairBox};
use memattack_core::hash::{build_attack_partition, fixed_fits, AttackPartition, FunctionSpec};
use memattack_core::ns::{self, NsReport, Side, Violation};
use memattack_core::system::{ProductSystem, SystemEvaluator, DEFAULT_EVAL_CAP};
use memattack_core::value::{parse_rat, Fixed, Number, Rat};
use memattack_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "memattack", version, about = "Memory attack on privacy amplification with chained-Bell boxes")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rational,
    Quantum,
}

#[derive(clap::Args, Debug, Clone)]
pub struct BoxArgs {
    /// Settings per party (N).
    #[arg(long, default_value_t = 2)]
    pub n_settings: usize,
    /// Cross probability on adjacent settings, as p/q (rational mode only).
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Rational)]
    pub mode: ModeArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SigmaArg {
    None,
    #[value(name = "0")]
    Zero,
    #[value(name = "1")]
    One,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TextFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Unbiased,
    AttackZ0,
    AttackZ1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckArg {
    Ab,
    TimeOrdered,
    Subset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Alice,
    Bob,
    Both,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print a single box, optionally biased.
    Box {
        #[command(flatten)]
        params: BoxArgs,
        #[arg(long, value_enum, default_value_t = SigmaArg::None)]
        sigma: SigmaArg,
        #[arg(long, value_enum, default_value_t = TableFormat::Table)]
        format: TableFormat,
    },
    /// Run the attack against one hash function.
    Attack {
        /// xor | majority | and | or | random:<seed> | hex:<digits>
        #[arg(long)]
        function: String,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        params: BoxArgs,
        #[arg(long, value_enum, default_value_t = TextFormat::Text)]
        format: TextFormat,
    },
    /// Exhaustively check a system against a non-signalling condition.
    Verify {
        #[arg(long, value_enum)]
        system: SystemArg,
        /// Required for the attack systems.
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        params: BoxArgs,
        #[arg(long, value_enum)]
        check: CheckArg,
        /// 1-based positions, comma separated (subset check only).
        #[arg(long, value_delimiter = ',')]
        subset: Vec<usize>,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        #[arg(long, value_enum, default_value_t = TextFormat::Text)]
        format: TextFormat,
        /// Largest state space (4N²)^n to enumerate.
        #[arg(long, default_value_t = DEFAULT_EVAL_CAP)]
        eval_cap: u128,
    },
    /// Attack one function family over a range of n and write CSV.
    Scan {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n_from: usize,
        #[arg(long)]
        n_to: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[command(flatten)]
        params: BoxArgs,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure modes of a subcommand, mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            let _ = writeln!(err, "error: --threads must be positive");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    // Output is buffered so the work can run inside the pool.
    let (result, out_buf, err_buf) = pool.install(|| {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let r = dispatch(&cli.command, &mut o, &mut e);
        (r, o, e)
    });
    let _ = out.write_all(&out_buf);
    let _ = err.write_all(&err_buf);
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match command {
        Command::Box { params, sigma, format } => cmd_box(params, *sigma, *format, out),
        Command::Attack { function, n, params, format } => cmd_attack(function, *n, params, *format, out),
        Command::Verify {
            system,
            function,
            n,
            params,
            check,
            subset,
            side,
            format,
            eval_cap,
        } => cmd_verify(
            &VerifyRequest {
                system: *system,
                function: function.as_deref(),
                n: *n,
                check: *check,
                subset,
                side: *side,
                eval_cap: *eval_cap,
            },
            params,
            *format,
            out,
        ),
        Command::Scan {
            family,
            n_from,
            n_to,
            step,
            params,
            out: path,
        } => cmd_scan(family, *n_from, *n_to, *step, params, path.as_ref(), out, err),
    }
}

fn box_params(args: &BoxArgs) -> std::result::Result<BoxParams, Failure> {
    match args.mode {
        ModeArg::Rational => {
            let eps = match &args.eps {
                Some(s) => parse_rat(s)?,
                None => Rat::new(1.into(), 8.into()),
            };
            Ok(BoxParams::rational(args.n_settings, eps)?)
        }
        ModeArg::Quantum => {
            if args.eps.is_some() {
                return Err(Failure::Usage(
                    "--eps is fixed by the settings count in quantum mode".into(),
                ));
            }
            Ok(BoxParams::quantum(args.n_settings)?)
        }
    }
}

fn mode_name(mode: Mode) -> &'static str {
    attack::mode_name(mode)
}

fn params_line(params: &BoxParams) -> String {
    format!(
        "N={} eps={} mode={}",
        params.n_settings(),
        params.eps(),
        mode_name(params.mode())
    )
}

// ---- box ----

#[derive(Serialize)]
struct SquareJson {
    u: usize,
    v: usize,
    /// `cells[y][x]`.
    cells: [[Number; 2]; 2],
}

#[derive(Serialize)]
struct BoxJson {
    n_settings: usize,
    mode: &'static str,
    eps: Number,
    sigma: Option<u8>,
    bell_value: Number,
    squares: Vec<SquareJson>,
}

fn cmd_box(args: &BoxArgs, sigma: SigmaArg, format: TableFormat, out: &mut dyn Write) -> Outcome {
    let params = box_params(args)?;
    let base = build_unbiased_box(&params)?;
    let sigma = match sigma {
        SigmaArg::None => None,
        SigmaArg::Zero => Some(0),
        SigmaArg::One => Some(1),
    };
    let b = match sigma {
        Some(s) => bias_any_box(&base, s, &params)?,
        None => base,
    };
    let n = params.n_settings();
    let squares: Vec<SquareJson> = (0..n)
        .flat_map(|a| (0..n).map(move |bob| (a, bob)))
        .map(|(a, bob)| SquareJson {
            u: 2 * a,
            v: 2 * bob + 1,
            cells: [
                [b.cell(a, bob, 0, 0), b.cell(a, bob, 1, 0)],
                [b.cell(a, bob, 0, 1), b.cell(a, bob, 1, 1)],
            ],
        })
        .collect();
    match format {
        TableFormat::Json => {
            let doc = BoxJson {
                n_settings: n,
                mode: mode_name(params.mode()),
                eps: params.eps(),
                sigma,
                bell_value: b.bell_value(),
                squares,
            };
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)?;
        }
        TableFormat::Table => write_box_table(&b, &params, sigma, &squares, out)?,
    }
    Ok(EXIT_OK)
}

fn write_box_table(
    b: &AnyBox,
    params: &BoxParams,
    sigma: Option<u8>,
    squares: &[SquareJson],
    out: &mut dyn Write,
) -> io::Result<()> {
    let sigma = sigma.map_or("none".to_string(), |s| s.to_string());
    writeln!(out, "box {} sigma={}", params_line(params), sigma)?;
    writeln!(out, "bell_value {}", b.bell_value())?;
    let width = squares
        .iter()
        .flat_map(|s| s.cells.iter().flatten())
        .map(|c| c.to_string().len())
        .chain(std::iter::once(3))
        .max()
        .unwrap_or(3);
    for s in squares {
        writeln!(out)?;
        writeln!(out, "u={} v={}", s.u, s.v)?;
        writeln!(out, "     {:>w$}  {:>w$}", "x=0", "x=1", w = width)?;
        for (y, row) in s.cells.iter().enumerate() {
            writeln!(
                out,
                "y={}  {:>w$}  {:>w$}",
                y,
                row[0].to_string(),
                row[1].to_string(),
                w = width
            )?;
        }
    }
    Ok(())
}

// ---- attack ----

fn cmd_attack(function: &str, n: usize, args: &BoxArgs, format: TextFormat, out: &mut dyn Write) -> Outcome {
    let params = box_params(args)?;
    let spec: FunctionSpec = function.parse()?;
    let f = spec.build(n)?;
    let report = attack::run_attack(&f, &params)?;
    match format {
        TextFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &report)?;
            writeln!(out)?;
        }
        TextFormat::Text => {
            writeln!(out, "function {} n={}", report.function, report.n)?;
            writeln!(out, "boxes {}", params_line(&params))?;
            writeln!(out, "strategy {}", report.strategy)?;
            let labeling = serde_json::to_value(report.labeling)?;
            writeln!(out, "labeling {}", labeling.as_str().unwrap_or_default())?;
            if !report.pivotal_histogram.is_empty() {
                let hist: Vec<String> = report
                    .pivotal_histogram
                    .iter()
                    .map(|(i, c)| format!("{i}:{c}"))
                    .collect();
                writeln!(out, "pivotal_indices {}", hist.join(" "))?;
            }
            writeln!(out, "pr_k0_given_z0 {}", report.pr_k0_given_z0)?;
            writeln!(out, "distance {} ({})", report.distance, report.distance.decimal())?;
            writeln!(out, "bound {} ({})", report.bound, report.bound.decimal())?;
            writeln!(out, "passed {}", report.passed)?;
        }
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_FAIL })
}

// ---- verify ----

struct VerifyRequest<'a> {
    system: SystemArg,
    function: Option<&'a str>,
    n: usize,
    check: CheckArg,
    subset: &'a [usize],
    side: SideArg,
    eval_cap: u128,
}

/// A system in whichever numeric domain the parameters call for.
pub enum AnySystem {
    Fixed(Arc<dyn SystemEvaluator<Fixed>>),
    Rational(Arc<dyn SystemEvaluator<Rat>>),
    Float(Arc<dyn SystemEvaluator<f64>>),
}

fn unbiased_system(params: &BoxParams, n: usize) -> std::result::Result<AnySystem, Error> {
    Ok(match build_unbiased_box(params)? {
        AnyBox::Exact(b) => {
            let (mut fixed, den) = SinglePairBox::to_fixed(&[&b])?;
            if fixed_fits(&den, n) {
                AnySystem::Fixed(Arc::new(ProductSystem::iid(&fixed.pop().unwrap(), n)?))
            } else {
                AnySystem::Rational(Arc::new(ProductSystem::iid(&b, n)?))
            }
        }
        AnyBox::Float(b) => AnySystem::Float(Arc::new(ProductSystem::iid(&b, n)?)),
    })
}

fn attacked_system(params: &BoxParams, spec: &FunctionSpec, n: usize, z: u8) -> std::result::Result<AnySystem, Error> {
    let f = spec.build(n)?;
    Ok(match build_attack_partition(&f, params)? {
        AttackPartition::Fixed(s) => AnySystem::Fixed(Arc::new(s.part(z)?)),
        AttackPartition::Rational(s) => AnySystem::Rational(Arc::new(s.part(z)?)),
        AttackPartition::Float(s) => AnySystem::Float(Arc::new(s.part(z)?)),
    })
}

fn run_checks<V: memattack_core::value::Value>(
    system: &dyn SystemEvaluator<V>,
    req: &VerifyRequest<'_>,
) -> std::result::Result<Vec<NsReport>, Error> {
    let sides: Vec<Side> = match req.side {
        SideArg::Alice => vec![Side::Alice],
        SideArg::Bob => vec![Side::Bob],
        SideArg::Both => vec![Side::Alice, Side::Bob],
    };
    match req.check {
        CheckArg::Ab => Ok(vec![ns::check_ab(system, req.eval_cap)?]),
        CheckArg::TimeOrdered => {
            if req.side == SideArg::Both {
                Ok(vec![ns::check_time_ordered(system, req.eval_cap)?])
            } else {
                sides
                    .iter()
                    .map(|&s| ns::check_time_ordered_side(system, s, req.eval_cap))
                    .collect()
            }
        }
        CheckArg::Subset => sides
            .iter()
            .map(|&s| ns::check_subset(system, s, req.subset, req.eval_cap))
            .collect(),
    }
}

#[derive(Serialize)]
struct ViolationJson {
    side: String,
    summed: Vec<usize>,
    x: String,
    y: String,
    u: Vec<usize>,
    v: Vec<usize>,
    alt_u: Vec<usize>,
    alt_v: Vec<usize>,
    left: Number,
    right: Number,
}

impl From<&Violation> for ViolationJson {
    fn from(v: &Violation) -> Self {
        ViolationJson {
            side: v.side.to_string(),
            summed: v.summed.clone(),
            x: v.x.clone(),
            y: v.y.clone(),
            u: v.inputs.0.clone(),
            v: v.inputs.1.clone(),
            alt_u: v.alt_inputs.0.clone(),
            alt_v: v.alt_inputs.1.clone(),
            left: v.left.clone(),
            right: v.right.clone(),
        }
    }
}

#[derive(Serialize)]
struct ReportJson {
    condition: String,
    passed: bool,
    checks_performed: u64,
    violation_count: u64,
    violations: Vec<ViolationJson>,
}

#[derive(Serialize)]
struct VerifyJson {
    system: String,
    function: Option<String>,
    n: usize,
    n_settings: usize,
    mode: &'static str,
    eps: Number,
    reports: Vec<ReportJson>,
    passed: bool,
}

fn system_name(s: SystemArg) -> &'static str {
    match s {
        SystemArg::Unbiased => "unbiased",
        SystemArg::AttackZ0 => "attack-z0",
        SystemArg::AttackZ1 => "attack-z1",
    }
}

fn cmd_verify(req: &VerifyRequest<'_>, args: &BoxArgs, format: TextFormat, out: &mut dyn Write) -> Outcome {
    let params = box_params(args)?;
    if req.check == CheckArg::Subset && req.subset.is_empty() {
        return Err(Failure::Usage("--check subset needs --subset".into()));
    }
    if req.check != CheckArg::Subset && !req.subset.is_empty() {
        return Err(Failure::Usage("--subset only applies to --check subset".into()));
    }
    let spec = match (req.system, req.function) {
        (SystemArg::Unbiased, f) => f.map(str::parse::<FunctionSpec>).transpose()?,
        (_, Some(f)) => Some(f.parse::<FunctionSpec>()?),
        (_, None) => return Err(Failure::Usage("attack systems need --function".into())),
    };
    let system = match req.system {
        SystemArg::Unbiased => unbiased_system(&params, req.n)?,
        SystemArg::AttackZ0 => attacked_system(&params, spec.as_ref().unwrap(), req.n, 0)?,
        SystemArg::AttackZ1 => attacked_system(&params, spec.as_ref().unwrap(), req.n, 1)?,
    };
    let reports = match &system {
        AnySystem::Fixed(s) => run_checks(s.as_ref(), req)?,
        AnySystem::Rational(s) => run_checks(s.as_ref(), req)?,
        AnySystem::Float(s) => run_checks(s.as_ref(), req)?,
    };
    let passed = reports.iter().all(|r| r.passed);
    match format {
        TextFormat::Json => {
            let doc = VerifyJson {
                system: system_name(req.system).to_string(),
                function: spec.as_ref().map(|s| s.to_string()),
                n: req.n,
                n_settings: params.n_settings(),
                mode: mode_name(params.mode()),
                eps: params.eps(),
                reports: reports
                    .iter()
                    .map(|r| ReportJson {
                        condition: r.condition.to_string(),
                        passed: r.passed,
                        checks_performed: r.checks_performed,
                        violation_count: r.violation_count,
                        violations: r.violations.iter().map(ViolationJson::from).collect(),
                    })
                    .collect(),
                passed,
            };
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)?;
        }
        TextFormat::Text => {
            let function = spec.as_ref().map_or(String::new(), |s| format!(" function={s}"));
            writeln!(
                out,
                "system {}{} n={} {}",
                system_name(req.system),
                function,
                req.n,
                params_line(&params)
            )?;
            for r in &reports {
                writeln!(
                    out,
                    "check {}: {} ({} comparisons, {} violations)",
                    r.condition,
                    if r.passed { "pass" } else { "FAIL" },
                    r.checks_performed,
                    r.violation_count
                )?;
                for v in &r.violations {
                    writeln!(out, "  {v}")?;
                }
            }
            writeln!(out, "result {}", if passed { "pass" } else { "fail" })?;
        }
    }
    Ok(if passed { EXIT_OK } else { EXIT_FAIL })
}

// ---- scan ----

pub const CSV_HEADER: [&str; 11] = [
    "family",
    "n",
    "N",
    "eps",
    "strategy",
    "distance",
    "bound",
    "ratio",
    "distance_times_n",
    "distance_times_sqrt_n",
    "pr_k0_given_z0",
];

/// One CSV record. Exact values are written as `p/q`, floats as decimals.
pub fn csv_record(row: &ScanRow) -> Vec<String> {
    let mut rec = vec![
        row.family.clone(),
        row.n.to_string(),
        row.n_settings.to_string(),
        row.eps.to_string(),
    ];
    match &row.outcome {
        Ok(v) => rec.extend([
            v.strategy.to_string(),
            v.distance.to_string(),
            v.bound.to_string(),
            v.ratio.to_string(),
            v.distance_times_n.to_string(),
            Number::Float(v.distance_times_sqrt_n).decimal(),
            v.pr_k0_given_z0.to_string(),
        ]),
        Err(_) => {
            rec.push("error".into());
            rec.extend(std::iter::repeat_n(String::new(), 6));
        }
    }
    rec
}

#[allow(clippy::too_many_arguments)]
fn cmd_scan(
    family: &str,
    n_from: usize,
    n_to: usize,
    step: usize,
    args: &BoxArgs,
    path: Option<&PathBuf>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    let params = box_params(args)?;
    let spec: FunctionSpec = family.parse()?;
    if step == 0 {
        return Err(Failure::Usage("--step must be positive".into()));
    }
    if n_from == 0 || n_from > n_to {
        return Err(Failure::Usage(format!("empty range {n_from}..={n_to}")));
    }
    let ns: Vec<usize> = (n_from..=n_to).step_by(step).collect();
    let rows = attack::scan(&spec, &ns, &params);
    let mut sink: Box<dyn Write + '_> = match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(&mut *out),
    };
    {
        let mut w = csv::Writer::from_writer(&mut sink);
        w.write_record(CSV_HEADER)?;
        for row in &rows {
            w.write_record(csv_record(row))?;
        }
        w.flush()?;
    }
    sink.flush()?;
    drop(sink);
    let mut code = EXIT_OK;
    for row in &rows {
        match &row.outcome {
            Err(e) => {
                writeln!(err, "error: n={}: {e}", row.n)?;
                code = EXIT_USAGE;
            }
            Ok(v) if !v.passed => {
                writeln!(err, "bound not met: n={}", row.n)?;
                if code == EXIT_OK {
                    code = EXIT_FAIL;
                }
            }
            Ok(_) => {}
        }
    }
    Ok(code)
}
