//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure (singularity,
//! gap collapse, rank loss, or a verification residual over threshold).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::contour::{
    auto_basis, continue_basis, convergence_study, steps_to_tolerance, ContourSpec, InitPolicy, RunOptions, StudyConfig,
};
use crate::error::KatoError;
use crate::matrix::CMatrix;
use crate::oracle::{check_pprop, verify_prop1, DerivativeMode, OracleConfig};
use crate::problems::{lookup, ProblemSpec, BUILTIN_IDS};
use crate::report::{flatten_csv, read_matrix_text, run_report_json, study_csv, study_rows_json, SCHEMA_VERSION};
use crate::schemes::{SchemeSpec, MAX_CLI_ORDER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Residual thresholds applied by `verify`.
pub const PROP1_TOL: f64 = 1e-7;
pub const PPROP_TOL_EXACT: f64 = 1e-9;
pub const PPROP_TOL_FD: f64 = 1e-6;
/// Number and seed of the sample points used for the `PP'P = 0` check.
pub const PPROP_SAMPLES: usize = 32;
pub const PPROP_SEED: u64 = 0x5EED;

#[derive(Debug, Parser)]
#[command(
    name = "kato",
    version,
    about = "Continue analytic bases of invariant subspaces along contours"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Continue a basis around a contour and report closure, drift and cost
    Continue(ContinueArgs),
    /// Convergence study over dyadically refined meshes
    Study(StudyArgs),
    /// Check the reduced-equation properties and the PP'P = 0 identity
    Verify(VerifyArgs),
    /// List problems and schemes
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitPolicyArg {
    Require,
    Project,
}

impl From<InitPolicyArg> for InitPolicy {
    fn from(p: InitPolicyArg) -> Self {
        match p {
            InitPolicyArg::Require => InitPolicy::Require,
            InitPolicyArg::Project => InitPolicy::Project,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Problem id: moebius, rank1, evans-toy, random:<seed>:<n>:<k>
    #[arg(long)]
    pub problem: String,
    /// circle:<re>,<im>:<radius>:<L> or polyline:<re>,<im>;...:<L_per_edge>
    /// (default: the problem's suggested contour)
    #[arg(long)]
    pub contour: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub oracle_substeps: usize,
}

#[derive(Debug, Args)]
pub struct ContinueArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// greedy1, brz1, greedy2, rich2, rich3, greedy3, lift:<scheme>
    #[arg(long)]
    pub scheme: String,
    /// Initial basis file (default: orthonormal basis of range P(λ₀))
    #[arg(long)]
    pub r0_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "require")]
    pub init_policy: InitPolicyArg,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub scheme: String,
    #[arg(long)]
    pub r0_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "require")]
    pub init_policy: InitPolicyArg,
    /// Number of mesh doublings after the contour's L
    #[arg(long, default_value_t = 4)]
    pub refinements: usize,
    /// Also find the smallest L reaching this closure error, for the scheme
    /// and for greedy1
    #[arg(long)]
    pub target_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

/// A failure tagged with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<KatoError> for Failure {
    fn from(e: KatoError) -> Self {
        Failure {
            code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn listing() -> String {
    let mut s = String::from("problems:\n");
    for id in BUILTIN_IDS {
        let spec = lookup(id).expect("builtin id");
        let f = &spec.family;
        let deriv = if f.has_exact_deriv() { "exact" } else { "fd" };
        s.push_str(&format!(
            "  {id} dim={} rank={} deriv={deriv} contour={} domain: {}\n",
            f.dim(),
            f.rank(),
            spec.contour,
            f.domain_note()
        ));
    }
    s.push_str("  random:<seed>:<n>:<k> dim=n rank=k deriv=exact\n");
    s.push_str("schemes:\n");
    for scheme in SchemeSpec::BUILTIN {
        s.push_str(&format!(
            "  {} order={} cost={}\n",
            scheme,
            scheme.nominal_order(),
            scheme.cost_signature()
        ));
    }
    s.push_str(&format!(
        "  lift:<scheme> order=<base order>+1 (up to {MAX_CLI_ORDER})\n"
    ));
    s
}

fn resolve_problem(id: &str) -> std::result::Result<ProblemSpec, Failure> {
    lookup(id).map_err(|e| match e {
        KatoError::InvalidArgument(_) | KatoError::Parse(_) => usage(format!("{e}\n\n{}", listing())),
        other => other.into(),
    })
}

fn resolve_scheme(id: &str) -> std::result::Result<SchemeSpec, Failure> {
    let scheme: SchemeSpec = id
        .parse()
        .map_err(|e: KatoError| usage(format!("{e}\n\n{}", listing())))?;
    if scheme.nominal_order() > MAX_CLI_ORDER {
        return Err(usage(format!(
            "scheme {id} has order {} but the command line allows at most {MAX_CLI_ORDER}",
            scheme.nominal_order()
        )));
    }
    Ok(scheme)
}

fn resolve_contour(spec: &ProblemSpec, given: &Option<String>) -> std::result::Result<ContourSpec, Failure> {
    match given {
        Some(s) => s.parse::<ContourSpec>().map_err(|e| usage(e.to_string())),
        None => Ok(spec.contour.clone()),
    }
}

fn oracle_config(substeps: usize) -> std::result::Result<OracleConfig, Failure> {
    if substeps == 0 {
        return Err(usage("--oracle-substeps must be at least 1"));
    }
    Ok(OracleConfig {
        substeps_per_segment: substeps,
        derivative: DerivativeMode::Exact,
    })
}

fn initial_basis(
    spec: &ProblemSpec,
    contour: &ContourSpec,
    file: &Option<PathBuf>,
) -> std::result::Result<CMatrix, Failure> {
    match file {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            read_matrix_text(&text).map_err(|e| usage(e.to_string()))
        }
        None => {
            let start = contour.mesh()?.start();
            Ok(auto_basis(spec.family.as_ref(), start)?)
        }
    }
}

fn render(doc: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("json values serialize");
            s.push('\n');
            s
        }
        Format::Csv => flatten_csv(doc),
    }
}

fn cmd_continue(args: &ContinueArgs) -> std::result::Result<(String, i32), Failure> {
    let spec = resolve_problem(&args.common.problem)?;
    let scheme = resolve_scheme(&args.scheme)?;
    let contour = resolve_contour(&spec, &args.common.contour)?;
    let mesh = contour.mesh().map_err(|e| usage(e.to_string()))?;
    let r0 = initial_basis(&spec, &contour, &args.r0_file)?;
    let opts = RunOptions {
        init_policy: args.init_policy.into(),
        ..RunOptions::default()
    };
    let report = continue_basis(spec.family.as_ref(), &scheme, &mesh, &r0, &opts)?;
    let policy = match opts.init_policy {
        InitPolicy::Require => "require",
        InitPolicy::Project => "project",
    };
    let doc = run_report_json(
        &spec.id,
        &scheme.id(),
        scheme.nominal_order(),
        &contour.to_string(),
        policy,
        &report,
    );
    Ok((render(&doc, args.common.format), EXIT_OK))
}

fn cmd_study(args: &StudyArgs) -> std::result::Result<(String, i32), Failure> {
    let spec = resolve_problem(&args.common.problem)?;
    let scheme = resolve_scheme(&args.scheme)?;
    let contour = resolve_contour(&spec, &args.common.contour)?;
    if args.refinements < 2 {
        return Err(usage("--refinements must be at least 2"));
    }
    let r0 = initial_basis(&spec, &contour, &args.r0_file)?;
    let run = RunOptions {
        init_policy: args.init_policy.into(),
        ..RunOptions::default()
    };
    let cfg = StudyConfig {
        base_steps: contour.steps(),
        refinements: args.refinements,
        oracle: Some(oracle_config(args.common.oracle_substeps)?),
        run: run.clone(),
        parallel: true,
    };
    let family = spec.family.as_ref();
    let table = convergence_study(family, &scheme, &contour, &r0, &cfg)?;

    let tolerance = match args.target_tol {
        Some(tol) if tol.is_nan() || tol <= 0.0 => return Err(usage("--target-tol must be positive")),
        Some(tol) => {
            let max_steps = 1 << 16;
            let ours = steps_to_tolerance(family, &scheme, &contour, &r0, tol, 8, max_steps, &run)?;
            let base = steps_to_tolerance(family, &SchemeSpec::Greedy1, &contour, &r0, tol, 8, max_steps, &run)?;
            Some((tol, ours, base))
        }
        None => None,
    };

    let out = match args.common.format {
        Format::Json => {
            let mut doc = json!({
                "schema": SCHEMA_VERSION,
                "command": "study",
                "problem": spec.id,
                "scheme": table.scheme,
                "nominal_order": table.nominal_order,
                "contour": contour.to_string(),
                "oracle_substeps": args.common.oracle_substeps,
                "rows": study_rows_json(&table),
                "median_order": table.median_order,
            });
            if let Some((tol, ours, base)) = tolerance {
                doc["steps_to_tolerance"] = json!({
                    "tol": tol,
                    "scheme": ours,
                    "greedy1": base,
                });
            }
            render(&doc, Format::Json)
        }
        Format::Csv => {
            let mut s = study_csv(&table);
            if let Some((tol, ours, base)) = tolerance {
                let show = |x: Option<usize>| x.map_or("none".to_string(), |v| v.to_string());
                s.push_str(&format!(
                    "# steps_to_tolerance tol={} {}={} greedy1={}\n",
                    Value::from(tol),
                    table.scheme,
                    show(ours),
                    show(base)
                ));
            }
            s
        }
    };
    Ok((out, EXIT_OK))
}

fn cmd_verify(args: &VerifyArgs) -> std::result::Result<(String, i32), Failure> {
    let mut spec = resolve_problem(&args.common.problem)?;
    let contour = resolve_contour(&spec, &args.common.contour)?;
    let mesh = contour.mesh().map_err(|e| usage(e.to_string()))?;
    let cfg = oracle_config(args.common.oracle_substeps)?;
    let family = spec.family.clone();
    let r0 = auto_basis(family.as_ref(), mesh.start())?;
    let prop1 = verify_prop1(family.as_ref(), &mesh, &r0, &cfg)?;
    spec.contour = contour.clone();
    let samples = spec.sample_points(PPROP_SEED, PPROP_SAMPLES);
    let pprop = check_pprop(family.as_ref(), &samples, DerivativeMode::Exact)?;
    let pprop_tol = if family.has_exact_deriv() {
        PPROP_TOL_EXACT
    } else {
        PPROP_TOL_FD
    };
    let pass = prop1.pr_minus_r <= PROP1_TOL
        && prop1.p_rprime <= PROP1_TOL
        && prop1.kato_vs_reduced <= PROP1_TOL
        && prop1.rank_constant
        && pprop <= pprop_tol;
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "command": "verify",
        "problem": spec.id,
        "contour": contour.to_string(),
        "oracle_substeps": cfg.substeps_per_segment,
        "derivative": if family.has_exact_deriv() { "exact" } else { "finite-difference" },
        "pr_minus_r": prop1.pr_minus_r,
        "p_rprime": prop1.p_rprime,
        "kato_vs_reduced": prop1.kato_vs_reduced,
        "rank_constant": prop1.rank_constant,
        "pprop": pprop,
        "thresholds": {
            "prop1": PROP1_TOL,
            "pprop": pprop_tol,
        },
        "pass": pass,
    });
    Ok((
        render(&doc, args.common.format),
        if pass { EXIT_OK } else { EXIT_NUMERICAL },
    ))
}

fn out_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Continue(a) => a.common.out.as_ref(),
        Command::Study(a) => a.common.out.as_ref(),
        Command::Verify(a) => a.common.out.as_ref(),
        Command::List => None,
    }
}

/// Runs the CLI on `args` (program name first), writing the report to
/// `out` (or the `--out` file) and diagnostics to `err`. Returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let Some(cmd) = cli.command else {
        let _ = out.write_all(listing().as_bytes());
        return EXIT_OK;
    };
    let result = match &cmd {
        Command::Continue(a) => cmd_continue(a),
        Command::Study(a) => cmd_study(a),
        Command::Verify(a) => cmd_verify(a),
        Command::List => Ok((listing(), EXIT_OK)),
    };
    match result {
        Ok((text, code)) => {
            let written = match out_path(&cmd) {
                Some(path) => std::fs::write(path, &text),
                None => out.write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: cannot write report: {e}");
                return EXIT_USAGE;
            }
            code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
