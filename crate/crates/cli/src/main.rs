use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dlinterp::textio::parse_concept;
use dlinterp::{Error, Ontology};
use dlinterp_cli::*;

#[derive(Parser)]
#[command(name = "dlinterp", version, about = "Interpolants and explicit definitions for EL-family ontologies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether an explicit definition or interpolant exists.
    Check(TaskArgs),
    /// Compute and verify an explicit definition or interpolant.
    Synthesize(TaskArgs),
    /// Check a given concept against the task.
    Verify {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        concept: String,
    },
    /// Print the derivation tree for `O ⊨ LHS ⊑ RHS`.
    Explain {
        #[arg(long)]
        lhs: String,
        #[arg(long)]
        rhs: String,
        #[arg(long, value_enum, default_value_t = TreeFormat::Json)]
        format: TreeFormat,
        files: Vec<PathBuf>,
    },
    /// Replay the built-in corpus and compare with the recorded outcomes.
    Corpus {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum TreeFormat {
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum Universal {
    Allow,
    Forbid,
}

#[derive(Args, Clone)]
struct TaskArgs {
    /// Concept name to define; the ontology is the union of all files.
    #[arg(long, conflicts_with = "interpolate")]
    define: Option<String>,
    /// Signature for `--define`: names separated by commas, `{a}` for individuals.
    #[arg(long, requires = "define")]
    sigma: Option<String>,
    /// Interpolate between `--c1` under the first file and `--c2` under the second.
    #[arg(long, requires_all = ["c1", "c2"])]
    interpolate: bool,
    #[arg(long)]
    c1: Option<String>,
    #[arg(long)]
    c2: Option<String>,
    #[arg(long, default_value = "auto", value_parser = DialectChoice::parse)]
    dialect: DialectChoice,
    #[arg(long, value_enum)]
    universal_role: Option<Universal>,
    /// Fixed canonical-tree depth for the ELI pipeline.
    #[arg(long)]
    depth: Option<usize>,
    /// Wall-clock limit in seconds; exceeding it is reported as a resource limit.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the derivation tree of the emitted concept's upper entailment to this file.
    #[arg(long)]
    emit_derivation: Option<PathBuf>,
    files: Vec<PathBuf>,
}

impl TaskArgs {
    fn task(&self) -> dlinterp::Result<Task> {
        let universal = self.universal_role.map(|u| matches!(u, Universal::Allow));
        let mut t = if let Some(a) = &self.define {
            let o = load_all(&self.files)?;
            Task::define(o, a, self.sigma.as_deref().unwrap_or(""), self.dialect, universal)?
        } else if self.interpolate {
            let (o1, o2) = match self.files.as_slice() {
                [] => (Ontology::empty(), Ontology::empty()),
                [a] => (load_ontology(a)?, Ontology::empty()),
                [a, b] => (load_ontology(a)?, load_ontology(b)?),
                _ => return Err(Error::Invalid("--interpolate takes at most two ontology files".into())),
            };
            Task::interpolate(o1, o2, self.c1.as_deref().unwrap(), self.c2.as_deref().unwrap(), self.dialect, universal)?
        } else {
            return Err(Error::Invalid("one of --define or --interpolate is required".into()));
        };
        t.depth = self.depth;
        Ok(t)
    }

    fn inputs(&self) -> Vec<String> {
        self.files.iter().map(|p| p.display().to_string()).collect()
    }

    fn limit(&self) -> Option<Duration> {
        self.timeout.map(Duration::from_secs_f64)
    }
}

fn emit(report: &RunReport, format: Format) -> ExitCode {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report).unwrap()),
        Format::Text => {
            let t = report.text();
            if report.error.is_some() {
                eprintln!("{t}");
            } else {
                println!("{t}");
            }
        }
    }
    ExitCode::from(report.exit_code() as u8)
}

fn timed_out(mut r: RunReport, secs: f64) -> RunReport {
    r.resource = Some(dlinterp::error::ResourceLimit { what: "wall-clock seconds".into(), limit: secs.ceil() as u64, depth: None });
    r.error = Some(format!("timeout after {secs} s"));
    r
}

fn run_task(cmd: &str, args: TaskArgs, concept: Option<String>) -> ExitCode {
    let task = match args.task() {
        Ok(t) => t,
        Err(e) => return emit(&RunReport::new(cmd, args.inputs(), None).fail(&e), args.format),
    };
    let base = RunReport::new(cmd, args.inputs(), Some(&task));
    let cmd_owned = cmd.to_string();
    let emit_path = args.emit_derivation.clone();
    let t2 = task.clone();
    let work = move || -> RunReport {
        let mut r = base.clone();
        let res = (|| -> dlinterp::Result<()> {
            match cmd_owned.as_str() {
                "check" => r.decision = Some(decide(&t2)?),
                "synthesize" => {
                    let s = synthesize(&t2)?;
                    r.decision = Some(s.exists);
                    r.verified = s.verified;
                    r.stats = s.stats;
                    if let (Some(c), Some(path)) = (&s.concept, &emit_path) {
                        let (o, upper) = match &t2.definability {
                            Some(d) => (d.o.clone(), dlinterp::Concept::name_sym(d.a.clone())),
                            None => (t2.problem.union(), t2.problem.c2.clone()),
                        };
                        let dot = path.extension().is_some_and(|e| e == "dot");
                        let tree = explain(&o, c, &upper, dot)?;
                        std::fs::write(path, tree).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
                    }
                    r.concept = s.concept.map(|c| c.to_string());
                }
                _ => {
                    let c = parse_concept(concept.as_deref().unwrap_or(""))?;
                    let v = verify(&t2, &c)?;
                    r.concept = Some(c.to_string());
                    r.verified = v.is_ok();
                    r.decision = Some(v.is_ok());
                    r.stats = json!({ "reason": v.err() });
                }
            }
            Ok(())
        })();
        match res {
            Ok(()) => r,
            Err(e) => r.fail(&e),
        }
    };
    let fallback = RunReport::new(cmd, args.inputs(), Some(&task));
    let report = match with_timeout(args.limit(), work) {
        Some(r) => r,
        None => timed_out(fallback, args.timeout.unwrap_or_default()),
    };
    if cmd == "verify" && args.format == Format::Text && report.error.is_none() {
        match &report.stats["reason"] {
            serde_json::Value::String(s) => println!("rejected: {s}"),
            _ => println!("verified"),
        }
        return ExitCode::from(report.exit_code() as u8);
    }
    emit(&report, args.format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check(a) => run_task("check", a, None),
        Command::Synthesize(a) => run_task("synthesize", a, None),
        Command::Verify { task, concept } => run_task("verify", task, Some(concept)),
        Command::Explain { lhs, rhs, format, files } => {
            let res = (|| -> dlinterp::Result<String> {
                let o = load_all(&files)?;
                explain(&o, &parse_concept(&lhs)?, &parse_concept(&rhs)?, format == TreeFormat::Dot)
            })();
            match res {
                Ok(s) => {
                    println!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(if e.is_resource_limit() { EXIT_RESOURCE } else { EXIT_ERROR } as u8)
                }
            }
        }
        Command::Corpus { format, jobs } => {
            let records = run_corpus(jobs);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&records).unwrap()),
                Format::Text => records.iter().for_each(|r| println!("{}", r.line())),
            }
            let bad = records.iter().filter(|r| !r.ok()).count();
            if bad > 0 {
                eprintln!("{bad} mismatch(es)");
                ExitCode::from(EXIT_NONE as u8)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
