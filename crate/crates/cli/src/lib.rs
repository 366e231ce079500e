//! The `deltalog` command line: evaluate, trace, maintain, derive, check.
//!
//! Data goes to stdout, diagnostics to stderr. Everything written to stdout
//! is deterministic; commentary lines start with `%` so a fact listing can be
//! fed back in as a fact file.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use deltalog_core::delta::BooleanDelta;
use deltalog_core::derive::{derive_program, simplify, DeriveConfig, Mutation};
use deltalog_core::engine::{
    self, EngineError, EngineKind, EvDerivative, MaintenanceStrategy, Solution, SolverConfig, TraceStep,
};
use deltalog_core::formula::Formula;
use deltalog_core::frontend::{
    load_program, parse_delta, parse_facts, render_clause, render_delta, render_relation, FrontendError, Program,
    QuantifierStyle,
};
use deltalog_core::par::ExecMode;
use deltalog_core::props::{check_program, PropertyConfig, PropertyError};
use deltalog_core::relation::{Name, Relation, RelationError, DEFAULT_MAX_RELATION_SIZE};
use deltalog_core::semantics::{EvalError, Interpretation};

pub const MAX_RELATION_SIZE_VAR: &str = "DELTALOG_MAX_RELATION_SIZE";

pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 1;
    pub const DIVERGENCE: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const PROPERTY: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "deltalog", version, about = "Incremental Datalog via change-action derivatives")]
pub struct Cli {
    /// Evaluate predicates of a stratum on the rayon pool (when built with
    /// the `parallel` feature). Output is identical either way.
    #[arg(long, global = true)]
    pub parallel: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the least fixed point and print the IDB facts.
    Eval(EvalArgs),
    /// Apply a change to the EDB and print the resulting IDB change.
    Maintain(MaintainArgs),
    /// Print the upward and downward derivative rules.
    Derive(DeriveArgs),
    /// Check the derivative properties on random instances.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EngineArg {
    Naive,
    Seminaive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Derivative,
    Trivial,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EvArg {
    Dev1,
    Dev2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MutationArg {
    Negation,
    NablaAnd,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    pub program: PathBuf,
    pub facts: PathBuf,
    #[arg(long, value_enum, default_value = "seminaive")]
    pub engine: EngineArg,
    /// Print per-iteration tables; timings go to stderr.
    #[arg(long)]
    pub trace: bool,
    #[arg(long, default_value_t = engine::DEFAULT_MAX_ITERS, value_parser = positive)]
    pub max_iters: usize,
    /// Write the facts here instead of stdout (`-` is stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct MaintainArgs {
    pub program: PathBuf,
    pub facts: PathBuf,
    pub delta: PathBuf,
    #[arg(long, value_enum, default_value = "derivative")]
    pub strategy: StrategyArg,
    /// Compare the derivative result with recomputation.
    #[arg(long)]
    pub validate: bool,
    #[arg(long = "ev", value_enum, default_value = "dev1")]
    pub ev: EvArg,
    /// Fail with exit code 3 instead of recomputing when derivative
    /// maintenance does not converge.
    #[arg(long)]
    pub no_fallback: bool,
    #[arg(long, default_value_t = engine::DEFAULT_MAX_ITERS, value_parser = positive)]
    pub max_iters: usize,
    /// Also write the IDB change as a delta file.
    #[arg(long)]
    pub delta_out: Option<PathBuf>,
    /// Also write the updated IDB as a fact file.
    #[arg(long)]
    pub facts_out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct DeriveArgs {
    pub program: PathBuf,
    /// Always write `exists`.
    #[arg(long)]
    pub explicit: bool,
    /// Treat EDB predicates as unchanging, dropping their change atoms.
    #[arg(long)]
    pub static_edb: bool,
    #[arg(long)]
    pub symmetric_or: bool,
}

#[derive(Debug, clap::Args)]
pub struct CheckArgs {
    pub program: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of integer constants, in addition to the program's own.
    #[arg(long, default_value_t = 3)]
    pub universe: usize,
    #[arg(long)]
    pub symmetric_or: bool,
    #[arg(long, value_enum, hide = true)]
    pub mutate: Option<MutationArg>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: FrontendError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error("{MAX_RELATION_SIZE_VAR}: expected a positive integer, got `{0}`")]
    Env(String),
    #[error("could not write output: {0}")]
    Output(#[from] std::io::Error),
    #[error("{0}")]
    PropertyFailure(String),
}

fn eval_exit_code(e: &EvalError) -> i32 {
    match e {
        EvalError::Relation(RelationError::TooLarge { .. }) => exit::DIVERGENCE,
        _ => exit::INPUT,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(EngineError::Divergence { .. })
            | CliError::Engine(EngineError::Unsound { .. })
            | CliError::Engine(EngineError::NotFixedPoint { .. })
            | CliError::Engine(EngineError::Relation(RelationError::TooLarge { .. }))
            | CliError::Property(PropertyError::Relation(RelationError::TooLarge { .. })) => exit::DIVERGENCE,
            CliError::Engine(EngineError::Eval(e)) | CliError::Property(PropertyError::Eval(e)) => eval_exit_code(e),
            CliError::Engine(EngineError::NonConvergence { .. }) => exit::NON_CONVERGENCE,
            CliError::PropertyFailure(_) => exit::PROPERTY,
            _ => exit::INPUT,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    exit::OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    exit::INPUT
                }
            };
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn input<T>(path: &Path, r: std::result::Result<T, FrontendError>) -> Result<T> {
    r.map_err(|source| CliError::Input {
        path: path.to_owned(),
        source,
    })
}

fn max_relation_size() -> Result<usize> {
    match std::env::var(MAX_RELATION_SIZE_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Env(v)),
        },
        Err(_) => Ok(DEFAULT_MAX_RELATION_SIZE),
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mode = if cli.parallel { ExecMode::Parallel } else { ExecMode::Sequential };
    let base = SolverConfig {
        mode,
        max_relation_size: max_relation_size()?,
        ..SolverConfig::default()
    };
    match &cli.command {
        Command::Eval(a) => cmd_eval(a, base, out, err),
        Command::Maintain(a) => cmd_maintain(a, base, out),
        Command::Derive(a) => cmd_derive(a, out),
        Command::Check(a) => cmd_check(a, mode, out),
    }
}

fn load(path: &Path) -> Result<Program> {
    let text = read(path)?;
    input(path, load_program(&text))
}

fn load_facts(path: &Path) -> Result<Interpretation> {
    let text = read(path)?;
    input(path, parse_facts(&text))
}

/// IDB facts grouped by predicate, every IDB predicate listed.
pub fn render_solution(p: &Program, idb: &Interpretation) -> String {
    let mut out = String::new();
    for (pred, &arity) in p.idb() {
        let rel = idb
            .get(pred)
            .cloned()
            .unwrap_or_else(|| Relation::empty(deltalog_core::relation::Schema::positional(pred, arity)));
        let _ = writeln!(out, "% {pred}: {} facts", rel.len());
        out.push_str(&render_relation(pred, &rel));
    }
    out
}

fn write_target(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_owned(),
            source,
        }),
        _ => Ok(out.write_all(text.as_bytes())?),
    }
}

fn cmd_eval(a: &EvalArgs, base: SolverConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = load(&a.program)?;
    let edb = load_facts(&a.facts)?;
    let cfg = SolverConfig {
        engine: match a.engine {
            EngineArg::Naive => EngineKind::Naive,
            EngineArg::Seminaive => EngineKind::SemiNaive,
        },
        trace: a.trace,
        max_iters: a.max_iters,
        ..base
    };
    let sol = engine::solve(&p, &edb, &cfg)?;
    let mut text = String::new();
    if let Some(trace) = &sol.trace {
        text.push_str(&render_trace(&p, cfg.engine, trace));
        for step in trace {
            let _ = writeln!(
                err,
                "stratum {} iteration {}: {:?}",
                step.stratum, step.iteration, step.elapsed
            );
        }
    }
    text.push_str(&render_solution(&p, &sol.idb));
    write_target(a.output.as_deref(), &text, out)?;
    Ok(exit::OK)
}

fn set_text(r: &Relation) -> String {
    let rows: Vec<String> = r
        .rows()
        .iter()
        .map(|row| {
            let vals: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            format!("({})", vals.join(","))
        })
        .collect();
    format!("{{{}}}", rows.join(", "))
}

fn delta_text(d: &BooleanDelta) -> String {
    if d.removes().is_empty() {
        set_text(d.adds())
    } else {
        format!("+{} -{}", set_text(d.adds()), set_text(d.removes()))
    }
}

/// Per-stratum iteration tables. Repeated cells read `(as above)`.
pub fn render_trace(p: &Program, kind: EngineKind, trace: &[TraceStep]) -> String {
    let mut by_stratum: BTreeMap<usize, Vec<&TraceStep>> = BTreeMap::new();
    for s in trace {
        by_stratum.entry(s.stratum).or_default().push(s);
    }
    let mut out = String::new();
    for (stratum, steps) in by_stratum {
        let preds: Vec<Name> = steps[0].values.keys().cloned().collect();
        let names: Vec<&str> = preds.iter().map(|q| q.as_ref()).collect();
        let _ = writeln!(out, "% stratum {stratum}: {}", names.join(", "));
        let mut header = vec!["iteration".to_string()];
        for q in &names {
            match kind {
                EngineKind::Naive => {
                    header.push(format!("new {q}"));
                    header.push(q.to_string());
                }
                EngineKind::SemiNaive => {
                    header.push(format!("Δ{q}"));
                    header.push(q.to_string());
                }
            }
        }
        if kind == EngineKind::Naive {
            header.push("rederived".into());
        }
        let _ = writeln!(out, "% {}", header.join(" | "));
        let mut rows: Vec<Vec<String>> = Vec::new();
        if kind == EngineKind::Naive {
            let mut zero = vec!["0".to_string()];
            for q in &preds {
                let empty = Relation::empty(p.schema(q).expect("known predicate"));
                zero.push(set_text(&empty));
                zero.push(set_text(&empty));
            }
            zero.push("0".into());
            rows.push(zero);
        }
        for s in &steps {
            let mut row = vec![s.iteration.to_string()];
            for q in &preds {
                row.push(match kind {
                    EngineKind::Naive => set_text(s.deltas[q].adds()),
                    EngineKind::SemiNaive => delta_text(&s.deltas[q]),
                });
                row.push(set_text(&s.values[q]));
            }
            if kind == EngineKind::Naive {
                row.push(s.rederived.to_string());
            }
            rows.push(row);
        }
        let mut prev: Option<Vec<String>> = None;
        for row in rows {
            let shown: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, cell)| match &prev {
                    // Value columns only; the delta columns change meaning per row.
                    Some(prev) if i > 0 && i % 2 == 0 && i <= 2 * preds.len() && &prev[i] == cell => {
                        "(as above)".to_string()
                    }
                    _ => cell.clone(),
                })
                .collect();
            let _ = writeln!(out, "% {}", shown.join(" | "));
            prev = Some(row);
        }
    }
    out
}

fn cmd_maintain(a: &MaintainArgs, base: SolverConfig, out: &mut dyn Write) -> Result<i32> {
    let p = load(&a.program)?;
    let edb = load_facts(&a.facts)?;
    let text = read(&a.delta)?;
    let delta = input(&a.delta, parse_delta(&text))?;
    let cfg = SolverConfig {
        maintenance: match a.strategy {
            StrategyArg::Derivative => MaintenanceStrategy::Derivative,
            StrategyArg::Trivial => MaintenanceStrategy::Trivial,
        },
        ev_derivative: match a.ev {
            EvArg::Dev1 => EvDerivative::Ev1,
            EvArg::Dev2 => EvDerivative::Ev2,
        },
        validate: a.validate,
        fallback: !a.no_fallback,
        max_iters: a.max_iters,
        ..base
    };
    let quiet = SolverConfig {
        validate: false,
        ..cfg.clone()
    };
    let sol: Solution = engine::solve(&p, &edb, &quiet)?;
    let m = engine::maintain(&p, &sol, &edb, &delta, &cfg)?;
    let effective = m.effective(&sol)?;

    let mut deltas = String::new();
    for (pred, d) in &effective {
        deltas.push_str(&render_delta(pred, d));
    }
    let updated = render_solution(&p, &m.updated);

    let mut text = String::new();
    for (pred, d) in &effective {
        let _ = writeln!(
            text,
            "% change to {pred}: {} added, {} removed",
            d.adds().len(),
            d.removes().len()
        );
        text.push_str(&render_delta(pred, d));
    }
    match (a.strategy, m.fell_back, a.validate) {
        (_, true, _) => text.push_str("% validation: derivative strategy fell back to recomputation\n"),
        (StrategyArg::Derivative, false, true) => {
            text.push_str("% validation: derivative strategy matched recomputation\n")
        }
        (StrategyArg::Trivial, false, true) => text.push_str("% validation: trivial strategy recomputes\n"),
        _ => {}
    }
    text.push_str("% updated\n");
    text.push_str(&updated);
    out.write_all(text.as_bytes())?;
    if let Some(path) = &a.delta_out {
        write_target(Some(path), &deltas, out)?;
    }
    if let Some(path) = &a.facts_out {
        write_target(Some(path), &updated, out)?;
    }
    Ok(exit::OK)
}

fn all_var_names(f: &Formula, out: &mut BTreeSet<Name>) {
    match f {
        Formula::Top | Formula::Bottom => {}
        Formula::Atom(a) => out.extend(a.vars().cloned()),
        Formula::And(l, r) | Formula::Or(l, r) => {
            all_var_names(l, out);
            all_var_names(r, out);
        }
        Formula::Not(g) => all_var_names(g, out),
        Formula::Exists(v, g) => {
            out.insert(v.clone());
            all_var_names(g, out);
        }
    }
}

/// Head variable names for `pred`: those of its first rule when they do not
/// clash with variables already in `bodies`, positional names otherwise.
fn head_names(p: &Program, pred: &str, bodies: &[&Formula]) -> Vec<Name> {
    let arity = p.arity(pred).unwrap_or(0);
    let positional: Vec<Name> = (0..arity)
        .map(|i| deltalog_core::relation::positional_name(pred, i))
        .collect();
    let Some(rule) = p.rules().find(|r| r.head.pred.as_ref() == pred) else {
        return positional;
    };
    let wanted = rule.head_vars();
    let mut used = BTreeSet::new();
    for b in bodies {
        all_var_names(b, &mut used);
    }
    if wanted.iter().any(|v| used.contains(v)) {
        positional
    } else {
        wanted
    }
}

/// Derivative rules of every IDB predicate, as printed by `derive`.
pub fn render_derivatives(p: &Program, cfg: DeriveConfig, static_edb: bool, style: QuantifierStyle) -> Result<String> {
    let derivs = derive_program(p, cfg).map_err(EngineError::from)?;
    let fixed: BTreeSet<Name> = if static_edb { p.edb().keys().cloned().collect() } else { BTreeSet::new() };
    let mut out = String::new();
    for (pred, d) in &derivs {
        let up = simplify(&d.up, &fixed);
        let down = simplify(&d.down, &fixed);
        let names = head_names(p, pred, &[&up, &down]);
        let positional: Vec<Name> = (0..names.len())
            .map(|i| deltalog_core::relation::positional_name(pred, i))
            .collect();
        let mapping: BTreeMap<Name, Name> = positional.into_iter().zip(names.iter().cloned()).collect();
        let _ = writeln!(out, "% {pred}");
        for (prefix, f) in [("delta_", &up), ("nabla_", &down)] {
            let body = f.rename_free(&mapping);
            out.push_str(&render_clause(&format!("{prefix}{pred}"), &names, &body, style));
            out.push('\n');
        }
    }
    Ok(out)
}

fn cmd_derive(a: &DeriveArgs, out: &mut dyn Write) -> Result<i32> {
    let p = load(&a.program)?;
    let cfg = DeriveConfig {
        symmetric_or: a.symmetric_or,
        ..DeriveConfig::default()
    };
    let style = if a.explicit { QuantifierStyle::Explicit } else { QuantifierStyle::Implicit };
    out.write_all(render_derivatives(&p, cfg, a.static_edb, style)?.as_bytes())?;
    Ok(exit::OK)
}

fn cmd_check(a: &CheckArgs, mode: ExecMode, out: &mut dyn Write) -> Result<i32> {
    let p = load(&a.program)?;
    let cfg = PropertyConfig {
        samples: a.samples,
        seed: a.seed,
        universe: a.universe,
        derive: DeriveConfig {
            symmetric_or: a.symmetric_or,
            mutation: a.mutate.map(|m| match m {
                MutationArg::Negation => Mutation::NegationKeepsPolarity,
                MutationArg::NablaAnd => Mutation::NablaAndIntersects,
            }),
        },
        mode,
        max_relation_size: max_relation_size()?,
        ..PropertyConfig::default()
    };
    let report = check_program(&p, &cfg)?;
    let mut text = String::new();
    let preds: Vec<&str> = p.idb().keys().map(|k| k.as_ref()).collect();
    let _ = writeln!(text, "predicates: {}", preds.join(", "));
    let _ = writeln!(
        text,
        "samples: {}, universe: {} constants, seed: {}",
        report.samples, a.universe, a.seed
    );
    let names: Vec<&str> = deltalog_core::props::Property::ALL.iter().map(|q| q.name()).collect();
    let _ = writeln!(text, "properties: {}", names.join(", "));
    let _ = writeln!(
        text,
        "additivity as an equation between changes: {} of {} samples differ (effects agree)",
        report.strict_additivity_mismatches, report.samples
    );
    match &report.failure {
        None => {
            text.push_str("result: pass\n");
            out.write_all(text.as_bytes())?;
            Ok(exit::OK)
        }
        Some(f) => {
            text.push_str("result: fail\n");
            let _ = write!(text, "counterexample: {f}");
            out.write_all(text.as_bytes())?;
            Err(CliError::PropertyFailure(format!("{} fails for {}", f.property, f.target)))
        }
    }
}
