//! Command-line front end: argument parsing, dispatch and reports.

mod commands;
mod input;

use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

pub use input::CliError;

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "revkit", version, about = "Minimization-based belief revision workbench")]
pub struct Cli {
    /// Output rendering.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Also emit the comparability graph (orders) or Gaifman graph (structures) as DOT.
    #[arg(long, global = true)]
    pub dot: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Models of a propositional formula.
    Models {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        formula: String,
    },
    /// Canonical DNF of a model set.
    FormulaOf {
        #[arg(long)]
        n: usize,
        /// Assignments as integers, e.g. "1,2" or "{1, 2}".
        #[arg(long)]
        set: String,
    },
    /// Validates an order file (reflexivity implied, transitivity checked).
    ValidateOrder {
        #[arg(long)]
        order: String,
        /// Take the reflexive-transitive closure instead of rejecting.
        #[arg(long)]
        close: bool,
    },
    /// Regularity and regular-disconnectedness of an order.
    Regular {
        #[arg(long)]
        order: String,
    },
    /// Revises by a formula or model set over a labeled order.
    Revise {
        #[command(flatten)]
        structure: StructureArgs,
        #[arg(long)]
        phi: String,
    },
    /// Full operator table of a labeled order (n <= 4).
    Table {
        #[command(flatten)]
        structure: StructureArgs,
    },
    /// Reconstructs the order an operator minimizes over.
    Reconstruct {
        #[command(flatten)]
        operator: OperatorArgs,
        #[command(flatten)]
        verify: VerifyArgs,
    },
    /// Whether an operator is minimization over a member of a family.
    Representable {
        #[command(flatten)]
        operator: OperatorArgs,
        #[command(flatten)]
        verify: VerifyArgs,
        /// regular, regular-disconnected, extended-crown or extended-double-crown.
        #[arg(long)]
        family: String,
    },
    /// Checks a postulate (built-in name or DSL text) for an operator.
    CheckPostulate {
        #[command(flatten)]
        operator: OperatorArgs,
        /// Variable count the operator must have.
        #[arg(long)]
        n: Option<usize>,
        /// Built-in name (e.g. agm-subexpansion) or postulate text.
        #[arg(long)]
        postulate: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Translates a postulate into a sentence over <= and A1..Al.
    Translate {
        /// Built-in name or postulate text.
        #[arg(long)]
        postulate: String,
        /// Wrap in the universal set quantifier.
        #[arg(long)]
        umso: bool,
    },
    /// Evaluates an FO sentence (with --sets) or a `forallsets` sentence on an order.
    EvalMso {
        #[arg(long)]
        order: String,
        /// FO formula over <=, min and A1.., optionally prefixed by `forallsets A1 ...`.
        #[arg(long)]
        sentence: String,
        /// Interpretations of A1, A2, ... as element lists separated by ';'.
        #[arg(long)]
        sets: Option<String>,
        /// Search for sets making the body true instead.
        #[arg(long)]
        exists: bool,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Checks that postulate instances agree with the translation on extensions.
    VerifyProp1 {
        #[command(flatten)]
        structure: StructureArgs,
        /// Built-in name or postulate text.
        #[arg(long)]
        postulate: String,
        /// A single tuple of model sets separated by ';' (default: search all).
        #[arg(long)]
        phis: Option<String>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Builds or recognizes (extended) crowns and double crowns.
    Crown {
        /// Width of the (first) crown.
        #[arg(long, required_unless_present = "recognize")]
        s: Option<usize>,
        /// Width of the second crown of a double crown.
        #[arg(long)]
        s2: Option<usize>,
        /// Number of bottom elements below everything.
        #[arg(long, default_value_t = 0)]
        bottoms: usize,
        /// Emit the colored comparability graph instead of the order.
        #[arg(long)]
        graph: bool,
        /// Classify an order file instead of building.
        #[arg(long, conflicts_with_all = ["s", "s2", "graph"])]
        recognize: Option<String>,
    },
    /// Solves the q-round Ehrenfeucht-Fraisse game exactly.
    Ef {
        /// Colored graph or order file.
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Number of rounds.
        #[arg(long)]
        q: usize,
        /// Override the size cap for this q.
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Looks for a bijection preserving r-neighborhood types.
    Hanf {
        /// Colored graph or order file.
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Neighborhood radius.
        #[arg(long, conflicts_with = "q", required_unless_present = "q")]
        r: Option<usize>,
        /// Use r = (3^q - 1)/2.
        #[arg(long)]
        q: Option<usize>,
    },
    /// Splits an alternating 2-colored cycle by an edge swap.
    Swap {
        /// Colored graph file of an L1/L2-alternating cycle.
        #[arg(long)]
        graph: String,
        /// Rounds the swap must preserve; fixes r and the length bound.
        #[arg(long)]
        q: usize,
        /// Number of extension colors A1..Aell.
        #[arg(long)]
        ell: usize,
    },
    /// Splits an extended crown and compares the extended colored graphs.
    VerifyLemma5 {
        /// Crown width; the cycle has 2s vertices.
        #[arg(long)]
        s: usize,
        #[arg(long)]
        bottoms: usize,
        /// Rounds of the final game.
        #[arg(long)]
        q: usize,
        /// Number of extension sets.
        #[arg(long)]
        ell: usize,
        /// Extension sets as a JSON list of element lists.
        #[arg(long, conflicts_with = "seed", required_unless_present = "seed")]
        extension: Option<String>,
        /// Draw the extension sets at random.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Runs the acceptance criteria.
    Selftest {
        /// Criteria to run (default: all).
        #[arg(long)]
        criterion: Vec<usize>,
    },
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    /// Order JSON file with 2^n elements.
    #[arg(long)]
    pub order: String,
    /// Assignment of each element, e.g. "3,0,1,2" (default: identity).
    #[arg(long)]
    pub labeling: Option<String>,
    /// Knowledge base (default: labels of the minimal elements).
    #[arg(long)]
    pub kb: Option<String>,
}

#[derive(Debug, Args)]
pub struct OperatorArgs {
    /// Order JSON file; the operator is minimization over it.
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    pub order: Option<String>,
    /// Assignment of each element (default: identity).
    #[arg(long, requires = "order")]
    pub labeling: Option<String>,
    /// Knowledge base (default: minimal labels, or the revision by everything for --table).
    #[arg(long)]
    pub kb: Option<String>,
    /// Operator table JSON file.
    #[arg(long)]
    pub table: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// full, pairs or sampled.
    #[arg(long, default_value = "full")]
    pub verify: String,
    /// Sample count for `--verify sampled`.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Check every tuple (the default).
    #[arg(long, conflicts_with = "samples")]
    pub exhaustive: bool,
    /// Check this many pseudorandom tuples; requires --seed.
    #[arg(long, requires = "seed")]
    pub samples: Option<usize>,
    /// Seed of the sampling generator.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

/// What a command produced, before timing and rendering.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub summary: Vec<String>,
    pub result: Value,
    pub witness: Option<Value>,
    pub parameters: Option<Value>,
}

impl Outcome {
    pub fn new(pass: bool, summary: Vec<String>, result: Value) -> Self {
        Outcome {
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            summary,
            result,
            witness: None,
            parameters: None,
        }
    }

    pub fn witness(mut self, witness: Option<Value>) -> Self {
        self.witness = witness;
        self
    }

    pub fn parameters(mut self, parameters: Value) -> Self {
        self.parameters = Some(parameters);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: Vec<String>,
    pub verdict: Verdict,
    pub summary: Vec<String>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Value>,
    pub elapsed_ms: u128,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("serializable"),
            Format::Text => {
                let mut out = self.summary.clone();
                if let Some(w) = &self.witness {
                    out.push(format!("witness: {w}"));
                }
                if let Some(Value::Object(p)) = &self.parameters {
                    let parts: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    out.push(format!("parameters: {}", parts.join(" ")));
                }
                out.push(format!(
                    "verdict: {}",
                    serde_json::to_value(self.verdict)
                        .expect("serializable")
                        .as_str()
                        .unwrap_or("")
                ));
                out.join("\n")
            }
        }
    }
}

/// Exit code for a verdict: 0 pass, 1 fail.
fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Error => 2,
    }
}

/// Runs one command line (including the program name). Returns the exit
/// code, the report and the requested rendering. Argument errors yield
/// `None` for the report and clap's message.
pub fn run(argv: &[String]) -> (i32, Option<Report>, String) {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            return (code, None, e.render().to_string());
        }
    };
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    let outcome = pool.install(|| commands::dispatch(&cli));
    let (code, outcome) = match outcome {
        Ok(o) => (exit_code(o.verdict), o),
        Err(e) => (
            e.exit_code(),
            Outcome {
                verdict: Verdict::Error,
                summary: vec![format!("error: {e}")],
                result: Value::Null,
                witness: None,
                parameters: None,
            },
        ),
    };
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        command: argv.iter().skip(1).cloned().collect(),
        verdict: outcome.verdict,
        summary: outcome.summary,
        result: outcome.result,
        witness: outcome.witness,
        parameters: outcome.parameters,
        elapsed_ms: start.elapsed().as_millis(),
    };
    let text = report.render(cli.format);
    (code, Some(report), text)
}
