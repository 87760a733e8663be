//! `dq`: evaluate, rewrite, and check outcome expressions from the
//! command line.
//!
//! Exit codes: 0 success (or agreement satisfied), 1 usage/parse error,
//! 2 rewrite rule mismatch, 3 agreement violated.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use deltaq::{
    apply_at, check_qta, evaluate, failure_rate, format_failure_success, normalize, parse, sample,
    BasicAssignment, Grid, OutcomeExpr, Qta, RewriteError, TreePath,
};

#[derive(Parser)]
#[command(name = "dq", version, about = "Compositional timeliness analysis of outcome expressions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate an expression to its delay distribution and export the CDF as CSV
    Eval(EvalArgs),
    /// Apply a rewrite rule at a path, or normalise the expression
    Rewrite(RewriteArgs),
    /// Extract the overall failure probability and its success complement
    Failure(CommonArgs),
    /// Check the expression against a quantitative timeliness agreement
    Check(CheckArgs),
    /// Estimate the delay distribution by Monte Carlo sampling
    Sample(SampleArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// File containing the outcome expression
    #[arg(short = 'e', long = "expr", value_name = "FILE")]
    expr: PathBuf,
    /// Basic-assignment JSON file
    #[arg(short = 'a', long = "assignment", value_name = "FILE")]
    assignment: Option<PathBuf>,
    /// Override the grid step
    #[arg(long)]
    dt: Option<f64>,
    /// Override the grid horizon
    #[arg(long)]
    tmax: Option<f64>,
    /// Output file (defaults to standard output)
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RewriteArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Rule id to apply (see `dq rewrite --list-rules`)
    #[arg(long, conflicts_with = "normalize")]
    rule: Option<String>,
    /// Path to the subtree as a string of L/R steps; `.` or empty is the root
    #[arg(long, default_value = "", requires = "rule")]
    path: String,
    /// Collapse constants and accumulate failure choices bottom-up
    #[arg(long)]
    normalize: bool,
    /// Print the rule catalog and exit
    #[arg(long)]
    list_rules: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Agreement JSON: {"points":[{"t":..,"p":..},..],"maxFailure":..}
    #[arg(long, value_name = "FILE")]
    qta: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// RNG seed; identical seeds reproduce reports byte for byte
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of independent trials
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Rewrite(args) => cmd_rewrite(args),
        Cmd::Failure(args) => cmd_failure(args),
        Cmd::Check(args) => cmd_check(args),
        Cmd::Sample(args) => cmd_sample(args),
    }
}

fn load_expr(path: &Path) -> Result<OutcomeExpr> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read expression file {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

/// Load the assignment (if any) and apply grid overrides. Without an
/// assignment file, `--tmax` is required and `--dt` defaults to tmax/1000.
fn load_assignment(common: &CommonArgs) -> Result<BasicAssignment> {
    let mut assignment = match &common.assignment {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read assignment file {}", path.display()))?;
            BasicAssignment::from_json(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => {
            let t_max = common.tmax.context(
                "no assignment file given: supply --tmax (and optionally --dt) to fix the grid",
            )?;
            let grid = match common.dt {
                Some(dt) => Grid::with_dt(dt, t_max)?,
                None => Grid::from_t_max(t_max)?,
            };
            return Ok(BasicAssignment::new(grid));
        }
    };
    if common.dt.is_some() || common.tmax.is_some() {
        let dt = common.dt.unwrap_or(assignment.grid().dt());
        let t_max = common.tmax.unwrap_or(assignment.grid().t_max());
        assignment.set_grid(Grid::with_dt(dt, t_max)?);
    }
    Ok(assignment)
}

fn warn_unassigned(expr: &OutcomeExpr, assignment: &BasicAssignment) {
    for name in assignment.unassigned_names(expr) {
        eprintln!("warning: unassigned outcome `{name}` treated as perfection");
    }
}

fn write_out(out: &Option<PathBuf>, content: &str) -> Result<bool> {
    match out {
        Some(path) => {
            fs::write(path, content)
                .with_context(|| format!("cannot write {}", path.display()))?;
            Ok(true)
        }
        None => {
            print!("{content}");
            Ok(false)
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let expr = load_expr(&args.common.expr)?;
    let assignment = load_assignment(&args.common)?;
    warn_unassigned(&expr, &assignment);
    let dq = evaluate(&expr, &assignment)?;
    let summary = format!("intangible={} overflow={}\n", dq.intangible(), dq.overflow());
    if write_out(&args.common.out, &dq.to_csv())? {
        print!("{summary}");
    } else {
        // CSV went to stdout; keep it clean for piping
        eprint!("{summary}");
    }
    Ok(0)
}

fn cmd_rewrite(args: RewriteArgs) -> Result<u8> {
    if args.list_rules {
        let mut listing = String::new();
        for rule in deltaq::rule_catalog() {
            listing.push_str(&format!("{:<26} {}\n", rule.id, rule.law));
        }
        write_out(&args.common.out, &listing)?;
        return Ok(0);
    }
    let expr = load_expr(&args.common.expr)?;
    let (rewritten, trace) = if args.normalize {
        normalize(&expr)
    } else if let Some(rule) = &args.rule {
        let path = TreePath::parse(&args.path).map_err(|e| anyhow::anyhow!(e))?;
        match apply_at(&expr, rule, &path) {
            Ok(rewritten) => {
                let mut trace = deltaq::RewriteTrace::new(expr.clone());
                trace.steps.push(deltaq::TraceStep {
                    rule: deltaq::find_rule(rule)?.id,
                    path: path.clone(),
                    before: expr.subtree(&path).expect("path checked by apply").to_string(),
                    after: rewritten.subtree(&path).map(|s| s.to_string()).unwrap_or_default(),
                    coefficients: Vec::new(),
                });
                (rewritten, trace)
            }
            Err(e @ (RewriteError::NoMatch { .. } | RewriteError::InvalidPath { .. })) => {
                eprintln!("error: {e}");
                return Ok(2);
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        bail!("give either --normalize or --rule <id> [--path <LR>]");
    };
    let mut output = format!("{rewritten}\n");
    output.push_str(&trace.render());
    write_out(&args.common.out, &output)?;
    Ok(0)
}

fn cmd_failure(args: CommonArgs) -> Result<u8> {
    let expr = load_expr(&args.expr)?;
    let assignment = load_assignment(&args)?;
    warn_unassigned(&expr, &assignment);
    let f = failure_rate(&expr, &assignment)?;
    let (failure, success) = format_failure_success(f);
    let line = format!("failure={failure} success={success}\n");
    write_out(&args.out, &line)?;
    Ok(0)
}

fn cmd_check(args: CheckArgs) -> Result<u8> {
    let expr = load_expr(&args.common.expr)?;
    let assignment = load_assignment(&args.common)?;
    warn_unassigned(&expr, &assignment);
    let qta_text = fs::read_to_string(&args.qta)
        .with_context(|| format!("cannot read QTA file {}", args.qta.display()))?;
    let qta = Qta::from_json(&qta_text)?;
    let verdict = check_qta(&expr, &assignment, &qta)?;
    let mut report = String::new();
    for pt in &qta.points {
        let observed = verdict
            .violations
            .iter()
            .find(|v| v.t == pt.t)
            .map(|v| v.observed);
        match observed {
            Some(got) => report.push_str(&format!(
                "t={}: required {} observed {} VIOLATED\n",
                pt.t, pt.p, got
            )),
            None => report.push_str(&format!("t={}: required {} ok\n", pt.t, pt.p)),
        }
    }
    report.push_str(&format!(
        "failure: observed {} allowed {}{}\n",
        verdict.failure_observed,
        verdict.failure_allowed,
        if verdict.failure_observed <= verdict.failure_allowed { "" } else { " VIOLATED" }
    ));
    report.push_str(&format!(
        "verdict: {} (slack {})\n",
        if verdict.satisfied { "satisfied" } else { "violated" },
        verdict.slack
    ));
    write_out(&args.common.out, &report)?;
    Ok(if verdict.satisfied { 0 } else { 3 })
}

fn cmd_sample(args: SampleArgs) -> Result<u8> {
    let expr = load_expr(&args.common.expr)?;
    let assignment = load_assignment(&args.common)?;
    warn_unassigned(&expr, &assignment);
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let report = sample(&expr, &assignment, args.seed, args.trials);
    write_out(&args.common.out, &report.to_csv())?;
    Ok(0)
}
