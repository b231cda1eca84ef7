//! The `numfix` command-line front end.
//!
//! Exit codes: 0 ok/consistent, 1 inconsistent, 2 parse or I/O error,
//! 3 unsupported method/constraint combination, 4 cap exceeded, 5 no fix.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::FixSearchConfig;
use crate::io::{load_instance, read_text, write_instance};
use crate::lang::{parse_constraints, parse_query, parse_schema, Constraint, Query};
use crate::model::{Instance, Schema};
use crate::query::Semantics;
use crate::rational::Rational;
use crate::report::{self, to_json, Method, Table};

#[derive(Parser, Debug)]
#[command(name = "numfix", version, about = "Least-squares repair of numerical databases under denial constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report satisfaction per constraint (exit 1 if inconsistent).
    Check(Inputs),
    /// List violation sets (exit 1 if any).
    Violations(Inputs),
    /// Compute fixes.
    Fix {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
        /// Also decide whether a fix within this distance exists.
        #[arg(long)]
        k: Option<Rational>,
        /// Directory receiving `fix-<n>/<relation>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Consistent query answers.
    Cqa {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        query: String,
        #[arg(long, value_enum, default_value = "skeptical")]
        semantics: SemanticsArg,
        /// Threshold for range answers.
        #[arg(long)]
        k: Option<Rational>,
    },
    /// Classify constraints and, optionally, a query.
    Classify {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        ic: Option<PathBuf>,
        #[arg(long)]
        query: Option<String>,
        #[arg(long, value_enum, default_value = "json")]
        output: Output,
    },
    /// Approximate the largest value of a sum query across fixes.
    ApproxSum {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        query: String,
        /// Directory receiving the chosen fix as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show the per-tuple candidates under one-atom denials.
    #[command(name = "reduce-1ad")]
    Reduce1ad(Inputs),
}

#[derive(Args, Debug)]
struct Inputs {
    /// Schema file.
    #[arg(long)]
    schema: PathBuf,
    /// Directory with one `<relation>.csv` per relation.
    #[arg(long)]
    data: PathBuf,
    /// Constraint file; no constraints when omitted.
    #[arg(long)]
    ic: Option<PathBuf>,
    /// Cap on exact-search nodes and on grid points per tuple.
    #[arg(long)]
    max_grid: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    output: Output,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Output {
    Json,
    Table,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exact,
    Greedy,
    PrimalDual,
    #[value(name = "1ad")]
    OneAtom,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SemanticsArg {
    Skeptical,
    Brave,
    Majority,
    Range,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Exact => Method::Exact,
            MethodArg::Greedy => Method::Greedy,
            MethodArg::PrimalDual => Method::PrimalDual,
            MethodArg::OneAtom => Method::OneAtom,
        }
    }
}

impl From<SemanticsArg> for Semantics {
    fn from(s: SemanticsArg) -> Semantics {
        match s {
            SemanticsArg::Skeptical => Semantics::Skeptical,
            SemanticsArg::Brave => Semantics::Brave,
            SemanticsArg::Majority => Semantics::Majority,
            SemanticsArg::Range => Semantics::Range,
        }
    }
}

struct Loaded {
    schema: Arc<Schema>,
    instance: Instance,
    ics: Vec<Constraint>,
    cfg: FixSearchConfig,
}

fn load_schema(path: &Path) -> Result<Arc<Schema>> {
    Ok(Arc::new(parse_schema(&read_text(path)?)?))
}

fn load_ics(path: Option<&Path>, schema: &Schema) -> Result<Vec<Constraint>> {
    match path {
        Some(p) => parse_constraints(&read_text(p)?, schema),
        None => Ok(Vec::new()),
    }
}

/// `--query` names a file, or holds the query text itself.
fn load_query(arg: &str, schema: &Schema) -> Result<Query> {
    let path = Path::new(arg);
    let text = if path.is_file() { read_text(path)? } else { arg.to_string() };
    parse_query(&text, schema)
}

impl Inputs {
    fn load(&self) -> Result<Loaded> {
        let schema = load_schema(&self.schema)?;
        let ics = load_ics(self.ic.as_deref(), &schema)?;
        let instance = load_instance(schema.clone(), &self.data)?;
        let mut cfg = FixSearchConfig::default();
        if let Some(g) = self.max_grid {
            cfg.max_grid_points = g;
        }
        Ok(Loaded {
            schema,
            instance,
            ics,
            cfg,
        })
    }
}

fn emit<T: Serialize + Table>(value: &T, output: Output) {
    match output {
        Output::Json => println!("{}", to_json(value)),
        Output::Table => print!("{}", value.table()),
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Check(inputs) | Command::Violations(inputs) => {
            let l = inputs.load()?;
            let r = report::check(&l.instance, &l.ics, &l.cfg)?;
            emit(&r, inputs.output);
            Ok(if r.consistent { 0 } else { 1 })
        }
        Command::Fix {
            inputs,
            method,
            k,
            out,
        } => {
            let l = inputs.load()?;
            let r = match report::fix(&l.instance, &l.ics, method.into(), k.as_ref(), &l.cfg) {
                Err(Error::NoFix) => {
                    if let Output::Json = inputs.output {
                        println!("{}", to_json(&serde_json::json!({ "ne": false, "fix_count": 0 })));
                    }
                    return Err(Error::NoFix);
                }
                other => other?,
            };
            if let Some(dir) = out {
                for (i, f) in r.fixes.iter().enumerate() {
                    write_instance(f, &dir.join(format!("fix-{}", i + 1)))?;
                }
            }
            emit(&r, inputs.output);
            Ok(0)
        }
        Command::Cqa {
            inputs,
            query,
            semantics,
            k,
        } => {
            let l = inputs.load()?;
            let q = load_query(&query, &l.schema)?;
            let r = report::cqa(&q, &l.instance, &l.ics, semantics.into(), k.as_ref(), &l.cfg)?;
            emit(&r, inputs.output);
            Ok(0)
        }
        Command::Classify {
            schema,
            ic,
            query,
            output,
        } => {
            let schema = load_schema(&schema)?;
            let ics = load_ics(ic.as_deref(), &schema)?;
            let q = query.map(|q| load_query(&q, &schema)).transpose()?;
            let r = report::classify(&schema, &ics, q.as_ref())?;
            emit(&r, output);
            Ok(0)
        }
        Command::ApproxSum { inputs, query, out } => {
            let l = inputs.load()?;
            let q = load_query(&query, &l.schema)?;
            let r = report::approx_sum(&q, &l.instance, &l.ics, &l.cfg)?;
            if let Some(dir) = out {
                write_instance(&r.fix, &dir)?;
            }
            emit(&r, inputs.output);
            Ok(0)
        }
        Command::Reduce1ad(inputs) => {
            let l = inputs.load()?;
            let r = report::reduce(&l.instance, &l.ics, &l.cfg)?;
            emit(&r, inputs.output);
            Ok(0)
        }
    }
}

/// Runs the front end on `args` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
