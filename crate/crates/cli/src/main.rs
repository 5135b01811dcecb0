//! `fermi`: parse, run and score explanation programs; generate synthetic
//! data; build task files; validate knowledge bases; run baselines.
//!
//! Exit codes: 0 success, 1 validation failures, 2 usage error, 3 I/O error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fermi_core::baselines::constant_sweep;
use fermi_core::executor::{execute_with, render_answer, ExecOptions};
use fermi_core::kb::{KbError, KnowledgeBase};
use fermi_core::metrics::{aggregate, score_batch, GoldTarget, Outcome, Prediction, QuestionScore};
use fermi_core::par::Execution;
use fermi_core::program::parse_program;
use fermi_core::synthgen::{generate_dataset, GenConfig, GenError};
use fermi_core::tasks::{
    answer_quantity, build_task, read_gold, read_predictions, read_records, TaskError, TaskKind,
};
use fermi_core::units::{UnitMode, UnitRegistry};

#[derive(Parser)]
#[command(name = "fermi", version, about = "Fermi problem toolkit")]
struct Cli {
    /// Worker threads (default: number of processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also print errors to stderr as a JSON array.
    #[arg(long, global = true)]
    errors_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check or execute explanation programs.
    #[command(subcommand)]
    Program(ProgramCmd),
    /// Score a prediction file against gold records or an answer key.
    Score(ScoreArgs),
    /// Generate a synthetic dataset from a knowledge base.
    Gen(GenArgs),
    /// Build task files.
    #[command(subcommand)]
    Tasks(TasksCmd),
    /// Knowledge base utilities.
    #[command(subcommand)]
    Kb(KbCmd),
    /// Answer-only baselines.
    #[command(subcommand)]
    Baseline(BaselineCmd),
}

#[derive(Subcommand)]
enum ProgramCmd {
    /// Report validity of each program file; exits 0 only if all are valid.
    Check { files: Vec<PathBuf> },
    /// Execute a program and print its answer.
    Exec {
        file: PathBuf,
        /// Fail on mismatched dimensions and unknown units.
        #[arg(long)]
        strict_units: bool,
        /// Print every intermediate value.
        #[arg(long)]
        trace: bool,
    },
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    task: u8,
    /// Records file or answer key.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Report path; JSON goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
    /// Also write per-question scores to `<out>.questions.jsonl`.
    #[arg(long)]
    per_question: bool,
    /// Split label used in the report.
    #[arg(long, default_value = "all")]
    split: String,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, env = "FERMI_KB_PATH")]
    kb: PathBuf,
    #[arg(long)]
    size: usize,
    #[arg(long)]
    decompose_fraction: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum TasksCmd {
    /// Write `task<n>.jsonl` and `answer_key.jsonl`.
    Build {
        #[arg(long)]
        task: u8,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum KbCmd {
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum BaselineCmd {
    /// Log sweep of constant predictions.
    Constant {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 10)]
        points_per_decade: u32,
    },
}

struct Failure {
    code: u8,
    errors: Vec<(String, String)>,
}

impl Failure {
    fn validation(kind: &str, message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            errors: vec![(kind.into(), message.into())],
        }
    }

    fn io(message: impl Into<String>) -> Failure {
        Failure {
            code: 3,
            errors: vec![("io".into(), message.into())],
        }
    }
}

impl From<TaskError> for Failure {
    fn from(e: TaskError) -> Failure {
        match e {
            TaskError::Io { .. } => Failure::io(e.to_string()),
            TaskError::Schema { .. } => Failure::validation("schema", e.to_string()),
            TaskError::InsufficientPool { .. } => Failure::validation("insufficient_pool", e.to_string()),
            TaskError::Empty | TaskError::UnknownTask(_) => Failure::validation("usage", e.to_string()),
        }
    }
}

impl From<KbError> for Failure {
    fn from(e: KbError) -> Failure {
        match e {
            KbError::Io { .. } => Failure::io(e.to_string()),
            KbError::Invalid(diags) => Failure {
                code: 1,
                errors: diags
                    .iter()
                    .map(|d| {
                        let kind = match d {
                            fermi_core::kb::Diagnostic::Schema { .. } => "schema",
                            fermi_core::kb::Diagnostic::Dimension { .. } => "dimension",
                        };
                        (kind.to_string(), d.to_string())
                    })
                    .collect(),
            },
        }
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Failure {
        match e {
            GenError::Io(m) => Failure::io(m),
            GenError::KbTooSmall(_) => Failure::validation("kb_too_small", e.to_string()),
            _ => Failure::validation("generation", e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn task_kind(n: u8) -> Result<TaskKind, Failure> {
    TaskKind::from_number(n).ok_or(Failure {
        code: 2,
        errors: vec![("usage".into(), format!("--task must be 1, 2 or 3, got {n}"))],
    })
}

fn program_check(files: &[PathBuf]) -> CmdResult {
    let mut errors = Vec::new();
    for f in files {
        let text = read_text(f)?;
        let opts = ExecOptions::default();
        match fermi_core::executor::run_text(&text, &opts) {
            Ok(_) => println!("{}: valid", f.display()),
            Err(e) => {
                println!("{}: invalid ({}): {e}", f.display(), e.kind().as_str());
                errors.push((e.kind().as_str().to_string(), format!("{}: {e}", f.display())));
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: 1, errors })
    }
}

fn program_exec(file: &Path, strict: bool, trace: bool) -> CmdResult {
    let text = read_text(file)?;
    let program = parse_program(&text).map_err(|e| {
        Failure::validation(fermi_core::executor::ErrorKind::from(&e).as_str(), e.to_string())
    })?;
    let mode = if strict { UnitMode::Strict } else { UnitMode::Lenient };
    let result = execute_with(&program, &ExecOptions::with_mode(mode));
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if trace {
        for (id, q) in &result.trace {
            println!("{id} = {q}");
        }
    }
    match result.outcome {
        Ok(v) => {
            println!("{}", render_answer(&program, v, UnitRegistry::standard()));
            Ok(())
        }
        Err(e) => Err(Failure::validation(e.kind().as_str(), e.to_string())),
    }
}

fn score(a: &ScoreArgs, exec: Execution) -> CmdResult {
    let task = task_kind(a.task)?;
    let gold = read_gold(&a.gold, task)?;
    let preds = read_predictions(&a.pred)?;
    let mut by_id = BTreeMap::new();
    for p in preds {
        if !gold.contains_key(&p.id) {
            eprintln!("warning: prediction {:?} has no gold entry; ignored", p.id);
            continue;
        }
        by_id.insert(p.id.clone(), p);
    }
    let mut items: Vec<(String, Option<Prediction>, GoldTarget)> = Vec::new();
    for (id, g) in &gold {
        let pred = match by_id.get(id) {
            None => None,
            Some(p) => {
                let answer = match p.answer_value {
                    None => None,
                    Some(v) => Some(
                        answer_quantity(v, p.answer_unit.as_deref().unwrap_or(""))
                            .map_err(|e| Failure::validation("schema", format!("prediction {id}: {e}")))?,
                    ),
                };
                Some(Prediction {
                    answer,
                    program: p.program.clone(),
                })
            }
        };
        items.push((id.clone(), pred, g.clone()));
    }
    let present: Vec<(Prediction, GoldTarget)> = items
        .iter()
        .filter_map(|(_, p, g)| p.clone().map(|p| (p, g.clone())))
        .collect();
    let mut scored = score_batch(exec, &present).into_iter();
    let scores: Vec<(String, QuestionScore)> = items
        .iter()
        .map(|(id, p, g)| {
            let s = match p {
                Some(_) => scored.next().expect("one score per prediction"),
                None => QuestionScore::zero(Outcome::MissingPrediction, g.fact_ids.is_some()),
            };
            (id.clone(), s)
        })
        .collect();
    let only: Vec<QuestionScore> = scores.iter().map(|(_, s)| s.clone()).collect();
    let report = aggregate(&a.split, &only).map_err(|e| Failure::validation("empty", e.to_string()))?;
    let text = report.to_text();
    print!("{text}");
    write_text(&a.out, &text)?;
    let mut json_path = a.out.clone().into_os_string();
    json_path.push(".json");
    write_text(Path::new(&json_path), &(report.to_json() + "\n"))?;
    if a.per_question {
        let mut p = a.out.clone().into_os_string();
        p.push(".questions.jsonl");
        let mut body = String::new();
        for (id, s) in &scores {
            let mut v = serde_json::to_value(s).expect("scores serialize");
            v["id"] = json!(id);
            body.push_str(&v.to_string());
            body.push('\n');
        }
        write_text(Path::new(&p), &body)?;
    }
    Ok(())
}

fn gen(a: &GenArgs, exec: Execution) -> CmdResult {
    let kb = KnowledgeBase::load(&a.kb)?;
    let data = generate_dataset(
        &kb,
        &GenConfig {
            size: a.size,
            decompose_fraction: a.decompose_fraction,
            seed: a.seed,
        },
        exec,
    )?;
    data.write(&a.out)?;
    println!(
        "wrote {} records ({} decomposed) to {}",
        data.records.len(),
        data.manifest.decomposed,
        a.out.display()
    );
    Ok(())
}

fn tasks_build(task: u8, input: &Path, seed: u64, out: &Path, exec: Execution) -> CmdResult {
    let task = task_kind(task)?;
    let loaded = read_records(input)?;
    for w in &loaded.warnings {
        eprintln!("warning: line {} ({}): {}", w.line, w.id, w.message);
    }
    let built = build_task(&loaded.records, task, None, seed, exec)?;
    built.write(out)?;
    let over = built.keys.iter().filter(|k| k.over_limit).count();
    println!(
        "wrote {} task {} instances to {}{}",
        built.instances.len(),
        task.number(),
        out.display(),
        if over > 0 { format!(" ({over} over the context limit)") } else { String::new() }
    );
    Ok(())
}

fn kb_validate(file: &Path) -> CmdResult {
    let kb = KnowledgeBase::load(file);
    match kb {
        Ok(kb) => {
            let entries: usize = kb.objects().map(|o| o.attributes.len()).sum();
            println!("ok: {} objects, {entries} entries, sha256 {}", kb.len(), kb.hash());
            Ok(())
        }
        Err(e) => {
            if let KbError::Invalid(d) = &e {
                for x in d {
                    println!("{x}");
                }
            }
            Err(e.into())
        }
    }
}

fn baseline_constant(gold: &Path, ppd: u32, exec: Execution) -> CmdResult {
    let g = read_gold(gold, TaskKind::Full)?;
    let golds: Vec<f64> = g.values().map(|t| t.answer.magnitude()).collect();
    let r = constant_sweep(&golds, ppd, exec).map_err(|e| Failure::validation("metric", e.to_string()))?;
    print!("{}", r.to_text());
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    let exec = Execution::default();
    match &cli.command {
        Command::Program(ProgramCmd::Check { files }) => program_check(files),
        Command::Program(ProgramCmd::Exec {
            file,
            strict_units,
            trace,
        }) => program_exec(file, *strict_units, *trace),
        Command::Score(a) => score(a, exec),
        Command::Gen(a) => gen(a, exec),
        Command::Tasks(TasksCmd::Build {
            task,
            input,
            seed,
            out,
        }) => tasks_build(*task, input, *seed, out, exec),
        Command::Kb(KbCmd::Validate { file }) => kb_validate(file),
        Command::Baseline(BaselineCmd::Constant {
            gold,
            points_per_decade,
        }) => baseline_constant(gold, *points_per_decade, exec),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(not(feature = "parallel"))]
    let _ = cli.jobs;
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            for (kind, msg) in &f.errors {
                eprintln!("error[{kind}]: {msg}");
            }
            if cli.errors_json {
                let list: Vec<_> = f
                    .errors
                    .iter()
                    .map(|(kind, message)| json!({ "kind": kind, "message": message }))
                    .collect();
                eprintln!("{}", serde_json::Value::from(list));
            }
            ExitCode::from(f.code)
        }
    }
}
