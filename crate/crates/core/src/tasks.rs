//! Dataset records, the three task views and distractor selection.
//!
//! Every file is JSON lines whose first line is a header such as
//! `{"format":"fermi-records","version":1}`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::executor::{run_text, ExecOptions};
use crate::metrics::GoldTarget;
use crate::par::{self, Execution};
use crate::program::{parse_program, Identifier};
use crate::synthgen::{mix_seed, Bindings, Decomposition};
use crate::units::{Quantity, UnitRegistry};

pub const FORMAT_VERSION: u32 = 1;
pub const RECORDS_FORMAT: &str = "fermi-records";
pub const TASK_FORMAT: &str = "fermi-task";
pub const ANSWER_KEY_FORMAT: &str = "fermi-answer-key";
/// Facts per distractor-context instance.
pub const CONTEXT_SIZE: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactEntry {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthMeta {
    pub template_id: u8,
    pub bindings: Bindings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposed: Option<Decomposition>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermiRecord {
    pub id: String,
    pub question: String,
    /// Magnitude in `answer_unit`.
    pub answer_value: f64,
    #[serde(default)]
    pub answer_unit: String,
    pub facts: Vec<FactEntry>,
    pub program: String,
    pub source: Source,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthMeta>,
}

impl FermiRecord {
    pub fn answer(&self) -> Result<Quantity, String> {
        answer_quantity(self.answer_value, &self.answer_unit)
    }

    pub fn fact_ids(&self) -> BTreeSet<Identifier> {
        self.facts.iter().filter_map(|f| f.id.parse().ok()).collect()
    }

    /// Problems that do not prevent loading: an invalid program, or a program
    /// citing facts the record does not list.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        match run_text(&self.program, &ExecOptions::default()) {
            Err(e) => out.push(format!("program is not valid: {e}")),
            Ok((p, _)) => {
                let missing: Vec<String> = p
                    .used_fact_ids()
                    .difference(&self.fact_ids())
                    .map(|f| f.to_string())
                    .collect();
                if !missing.is_empty() {
                    out.push(format!("program cites unlisted facts {}", missing.join(", ")));
                }
            }
        }
        out
    }
}

pub fn answer_quantity(value: f64, unit: &str) -> Result<Quantity, String> {
    if unit.trim().is_empty() {
        return Quantity::dimensionless(value).map_err(|e| e.to_string());
    }
    let def = UnitRegistry::standard()
        .resolve(unit)
        .map_err(|e| e.to_string())?;
    Quantity::new(value * def.factor, def.dimension).map_err(|e| e.to_string())
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Schema {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("record {id}: only {available} distinct facts available, {needed} needed")]
    InsufficientPool {
        id: String,
        available: usize,
        needed: usize,
    },
    #[error("no records")]
    Empty,
    #[error("unknown task {0:?}; expected 1, 2 or 3")]
    UnknownTask(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> TaskError + '_ {
    move |source| TaskError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn header(format: &str, extra: Option<(&str, Value)>) -> String {
    let mut h = json!({ "format": format, "version": FORMAT_VERSION });
    if let Some((k, v)) = extra {
        h[k] = v;
    }
    h.to_string()
}

fn write_lines<T: Serialize>(path: &Path, header: String, items: &[T]) -> Result<(), TaskError> {
    let mut out = String::with_capacity(items.len() * 512);
    out.push_str(&header);
    out.push('\n');
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("records serialize"));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Reads a header-prefixed JSON lines file, returning the header and the
/// remaining non-blank lines with their line numbers.
fn read_lines(path: &Path, formats: &[&str]) -> Result<(Value, Vec<(usize, String)>), TaskError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let schema = |line, reason: String| TaskError::Schema {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (n, first) = lines.next().ok_or_else(|| schema(1, "missing header line".into()))?;
    let h: Value = serde_json::from_str(first).map_err(|e| schema(n, format!("bad header: {e}")))?;
    let format = h.get("format").and_then(Value::as_str).unwrap_or_default();
    if !formats.contains(&format) {
        return Err(schema(n, format!("expected format {}, found {format:?}", formats.join(" or "))));
    }
    if h.get("version").and_then(Value::as_u64) != Some(u64::from(FORMAT_VERSION)) {
        return Err(schema(n, format!("unsupported version {}", h["version"])));
    }
    Ok((h, lines.map(|(i, l)| (i, l.to_string())).collect()))
}

pub fn write_records(records: &[FermiRecord], path: &Path) -> Result<(), TaskError> {
    write_lines(path, header(RECORDS_FORMAT, None), records)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordWarning {
    pub line: usize,
    pub id: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedRecords {
    pub records: Vec<FermiRecord>,
    pub warnings: Vec<RecordWarning>,
}

/// Reads a records file. Structural problems are errors; invalid programs are
/// reported as warnings and the record is kept.
pub fn read_records(path: &Path) -> Result<LoadedRecords, TaskError> {
    let (_, lines) = read_lines(path, &[RECORDS_FORMAT])?;
    let schema = |line, reason: String| TaskError::Schema {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut records = Vec::with_capacity(lines.len());
    let mut seen = HashSet::new();
    let mut line_of = Vec::with_capacity(lines.len());
    for (n, l) in &lines {
        let r: FermiRecord = serde_json::from_str(l).map_err(|e| schema(*n, e.to_string()))?;
        if !seen.insert(r.id.clone()) {
            return Err(schema(*n, format!("duplicate record id {:?}", r.id)));
        }
        let mut fact_ids = HashSet::new();
        for f in &r.facts {
            if f.id.parse::<Identifier>().map_or(true, |i| i.kind != crate::program::IdKind::Fact) {
                return Err(schema(*n, format!("bad fact id {:?}", f.id)));
            }
            if !fact_ids.insert(f.id.as_str()) {
                return Err(schema(*n, format!("duplicate fact id {:?}", f.id)));
            }
        }
        r.answer().map_err(|e| schema(*n, format!("bad answer: {e}")))?;
        records.push(r);
        line_of.push(*n);
    }
    let warnings = records
        .iter()
        .zip(line_of)
        .flat_map(|(r, line)| {
            r.warnings().into_iter().map(move |message| RecordWarning {
                line,
                id: r.id.clone(),
                message,
            })
        })
        .collect();
    Ok(LoadedRecords { records, warnings })
}

// ---------------------------------------------------------------------------
// similarity

fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

type SparseVec = Vec<(usize, f64)>;

fn dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// TF-IDF vectors of a question corpus, idf = ln((1+N)/(1+df)) + 1, raw term
/// counts, L2 normalized.
#[derive(Clone, Debug)]
pub struct TfIdf {
    vocab: HashMap<String, usize>,
    idf: Vec<f64>,
    n_docs: usize,
    vectors: Vec<SparseVec>,
}

impl TfIdf {
    pub fn fit<S: AsRef<str>>(docs: &[S]) -> TfIdf {
        let mut vocab = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        let tokenized: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d.as_ref())).collect();
        for toks in &tokenized {
            let uniq: BTreeSet<&String> = toks.iter().collect();
            for t in uniq {
                let next = vocab.len();
                let id = *vocab.entry(t.clone()).or_insert(next);
                if id == df.len() {
                    df.push(0);
                }
                df[id] += 1;
            }
        }
        let n = docs.len();
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let mut model = TfIdf {
            vocab,
            idf,
            n_docs: n,
            vectors: Vec::new(),
        };
        model.vectors = tokenized.iter().map(|t| model.vectorize_tokens(t)).collect();
        model
    }

    // terms outside the corpus vocabulary are dropped
    fn vectorize_tokens(&self, toks: &[String]) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in toks {
            if let Some(&id) = self.vocab.get(t) {
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
        }
        let mut v: SparseVec = counts.into_iter().map(|(id, c)| (id, c * self.idf[id])).collect();
        normalize(&mut v);
        v
    }

    pub fn vectorize(&self, text: &str) -> SparseVec {
        self.vectorize_tokens(&tokenize(text))
    }

    /// Cosine similarity of two arbitrary texts under the corpus weights.
    /// Out-of-vocabulary terms are matched by spelling.
    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        let (ta, tb) = (tokenize(a), tokenize(b));
        let mut joint = ta.clone();
        joint.extend(tb.iter().cloned());
        // vectorize both with a shared out-of-vocabulary numbering
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &joint {
            if !self.vocab.contains_key(t) {
                let k = ids.len();
                ids.entry(t.as_str()).or_insert(k);
            }
        }
        let unseen = (1.0 + self.n_docs as f64).ln() + 1.0;
        let vec = |toks: &[String]| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for t in toks {
                let (id, w) = match self.vocab.get(t) {
                    Some(&id) => (id, self.idf[id]),
                    None => (self.idf.len() + ids[t.as_str()], unseen),
                };
                *counts.entry(id).or_insert(0.0) += w;
            }
            let mut v: SparseVec = counts.into_iter().collect();
            normalize(&mut v);
            v
        };
        dot(&vec(&ta), &vec(&tb)).clamp(0.0, 1.0)
    }

    pub fn vectors(&self) -> &[SparseVec] {
        &self.vectors
    }
}

fn normalize(v: &mut SparseVec) {
    let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in v.iter_mut() {
            *w /= norm;
        }
    }
}

/// Pairwise similarity over a fixed set of questions.
#[derive(Clone, Debug)]
pub enum SimilarityIndex {
    TfIdf(TfIdf),
    /// Externally computed dense vectors, one per question (e.g. sentence
    /// embeddings); compared by cosine.
    Vectors(Vec<Vec<f64>>),
}

impl SimilarityIndex {
    pub fn tfidf<S: AsRef<str>>(questions: &[S]) -> SimilarityIndex {
        SimilarityIndex::TfIdf(TfIdf::fit(questions))
    }

    pub fn len(&self) -> usize {
        match self {
            SimilarityIndex::TfIdf(m) => m.vectors.len(),
            SimilarityIndex::Vectors(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        match self {
            SimilarityIndex::TfIdf(m) => dot(&m.vectors[i], &m.vectors[j]),
            SimilarityIndex::Vectors(v) => {
                let (a, b) = (&v[i], &v[j]);
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
                }
            }
        }
    }

    /// Every other question ordered by decreasing similarity to `i`, ties by
    /// index.
    pub fn ranked(&self, i: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..self.len())
            .filter(|&j| j != i)
            .map(|j| (j, self.similarity(i, j)))
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        all
    }
}

// ---------------------------------------------------------------------------
// tasks

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PerfectContext,
    DistractorContext,
    Full,
}

impl TaskKind {
    pub fn number(self) -> u8 {
        match self {
            TaskKind::PerfectContext => 1,
            TaskKind::DistractorContext => 2,
            TaskKind::Full => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<TaskKind> {
        match n {
            1 => Some(TaskKind::PerfectContext),
            2 => Some(TaskKind::DistractorContext),
            3 => Some(TaskKind::Full),
            _ => None,
        }
    }

    /// Whether fact identification is scored for this task.
    pub fn scores_facts(self) -> bool {
        self != TaskKind::Full
    }
}

impl FromStr for TaskKind {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<TaskKind, TaskError> {
        s.trim()
            .parse::<u8>()
            .ok()
            .and_then(TaskKind::from_number)
            .ok_or_else(|| TaskError::UnknownTask(s.to_string()))
    }
}

/// What a model sees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub task: TaskKind,
    pub question: String,
    pub facts: Vec<FactEntry>,
}

/// Gold side of a task instance, in the instance's fact numbering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub id: String,
    pub task: TaskKind,
    pub answer_value: f64,
    pub answer_unit: String,
    /// Gold program with fact ids renumbered to match the instance.
    pub program: String,
    pub gold_fact_ids: Vec<String>,
    /// Instance fact id to the record's original fact id, gold facts only.
    pub fact_mapping: BTreeMap<String, String>,
    /// Instance fact id to `record-id:fact-id` for distractors.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub distractor_sources: BTreeMap<String, String>,
    /// Set when the record alone has more gold facts than the context size.
    #[serde(default)]
    pub over_limit: bool,
}

impl AnswerKey {
    pub fn gold_target(&self) -> Result<GoldTarget, String> {
        let ids: BTreeSet<Identifier> = self
            .gold_fact_ids
            .iter()
            .map(|s| s.parse().map_err(|_| format!("bad fact id {s:?}")))
            .collect::<Result<_, _>>()?;
        Ok(GoldTarget {
            answer: answer_quantity(self.answer_value, &self.answer_unit)?,
            fact_ids: self.task.scores_facts().then_some(ids),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskBuild {
    pub task: TaskKind,
    pub instances: Vec<TaskInstance>,
    pub keys: Vec<AnswerKey>,
}

fn gold_key(r: &FermiRecord, task: TaskKind) -> AnswerKey {
    AnswerKey {
        id: r.id.clone(),
        task,
        answer_value: r.answer_value,
        answer_unit: r.answer_unit.clone(),
        program: r.program.clone(),
        gold_fact_ids: r.facts.iter().map(|f| f.id.clone()).collect(),
        fact_mapping: r.facts.iter().map(|f| (f.id.clone(), f.id.clone())).collect(),
        distractor_sources: BTreeMap::new(),
        over_limit: false,
    }
}

fn distractor_instance(
    records: &[FermiRecord],
    index: &SimilarityIndex,
    i: usize,
    seed: u64,
) -> Result<(TaskInstance, AnswerKey), TaskError> {
    let r = &records[i];
    let gold_texts: HashSet<&str> = r.facts.iter().map(|f| f.text.as_str()).collect();
    let need = CONTEXT_SIZE.saturating_sub(r.facts.len());
    let mut chosen: Vec<(usize, &FactEntry)> = Vec::with_capacity(need);
    let mut taken: HashSet<&str> = HashSet::new();
    if need > 0 {
        'outer: for (j, _) in index.ranked(i) {
            for f in &records[j].facts {
                if gold_texts.contains(f.text.as_str()) || !taken.insert(f.text.as_str()) {
                    continue;
                }
                chosen.push((j, f));
                if chosen.len() == need {
                    break 'outer;
                }
            }
        }
    }
    if chosen.len() < need {
        return Err(TaskError::InsufficientPool {
            id: r.id.clone(),
            available: r.facts.len() + chosen.len(),
            needed: CONTEXT_SIZE,
        });
    }
    // (text, Ok(gold id) | Err(distractor source))
    let mut pool: Vec<(&str, Result<&str, String>)> = r
        .facts
        .iter()
        .map(|f| (f.text.as_str(), Ok(f.id.as_str())))
        .chain(
            chosen
                .iter()
                .map(|(j, f)| (f.text.as_str(), Err(format!("{}:{}", records[*j].id, f.id)))),
        )
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
    pool.shuffle(&mut rng);

    let mut facts = Vec::with_capacity(pool.len());
    let mut fact_mapping = BTreeMap::new();
    let mut distractor_sources = BTreeMap::new();
    let mut remap = BTreeMap::new();
    let mut gold_fact_ids = Vec::new();
    for (k, (text, origin)) in pool.into_iter().enumerate() {
        let new_id = Identifier::fact(k as u32 + 1);
        facts.push(FactEntry {
            id: new_id.to_string(),
            text: text.to_string(),
        });
        match origin {
            Ok(old) => {
                fact_mapping.insert(new_id.to_string(), old.to_string());
                gold_fact_ids.push(new_id.to_string());
                if let Ok(old_id) = old.parse::<Identifier>() {
                    remap.insert(old_id, new_id);
                }
            }
            Err(src) => {
                distractor_sources.insert(new_id.to_string(), src);
            }
        }
    }
    // a record whose program does not parse keeps its text as is
    let program = parse_program(&r.program)
        .and_then(|p| p.remap_facts(&remap))
        .map(|p| p.render())
        .unwrap_or_else(|_| r.program.clone());
    let task = TaskKind::DistractorContext;
    Ok((
        TaskInstance {
            id: r.id.clone(),
            task,
            question: r.question.clone(),
            facts,
        },
        AnswerKey {
            id: r.id.clone(),
            task,
            answer_value: r.answer_value,
            answer_unit: r.answer_unit.clone(),
            program,
            gold_fact_ids,
            fact_mapping,
            distractor_sources,
            over_limit: r.facts.len() > CONTEXT_SIZE,
        },
    ))
}

/// Builds one task view of `records`. Distractors for the distractor-context
/// task come from the facts of the most similar other questions.
pub fn build_task(
    records: &[FermiRecord],
    task: TaskKind,
    similarity: Option<&SimilarityIndex>,
    seed: u64,
    exec: Execution,
) -> Result<TaskBuild, TaskError> {
    if records.is_empty() {
        return Err(TaskError::Empty);
    }
    let (instances, keys) = match task {
        TaskKind::PerfectContext | TaskKind::Full => records
            .iter()
            .map(|r| {
                let facts = if task == TaskKind::Full {
                    Vec::new()
                } else {
                    r.facts.clone()
                };
                (
                    TaskInstance {
                        id: r.id.clone(),
                        task,
                        question: r.question.clone(),
                        facts,
                    },
                    gold_key(r, task),
                )
            })
            .unzip(),
        TaskKind::DistractorContext => {
            let owned;
            let index = match similarity {
                Some(s) => s,
                None => {
                    let qs: Vec<&str> = records.iter().map(|r| r.question.as_str()).collect();
                    owned = SimilarityIndex::tfidf(&qs);
                    &owned
                }
            };
            par::map_range(exec, records.len(), |i| distractor_instance(records, index, i, seed))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip()
        }
    };
    Ok(TaskBuild {
        task,
        instances,
        keys,
    })
}

impl TaskBuild {
    /// Writes `task<n>.jsonl` (model input) and `answer_key.jsonl`.
    pub fn write(&self, dir: &Path) -> Result<(), TaskError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let n = json!(self.task.number());
        write_lines(
            &dir.join(format!("task{}.jsonl", self.task.number())),
            header(TASK_FORMAT, Some(("task", n.clone()))),
            &self.instances,
        )?;
        write_lines(
            &dir.join("answer_key.jsonl"),
            header(ANSWER_KEY_FORMAT, Some(("task", n))),
            &self.keys,
        )
    }
}

pub fn read_task_instances(path: &Path) -> Result<Vec<TaskInstance>, TaskError> {
    parse_items(path, TASK_FORMAT)
}

pub fn read_answer_key(path: &Path) -> Result<Vec<AnswerKey>, TaskError> {
    parse_items(path, ANSWER_KEY_FORMAT)
}

fn parse_items<T: for<'de> Deserialize<'de>>(path: &Path, format: &str) -> Result<Vec<T>, TaskError> {
    let (_, lines) = read_lines(path, &[format])?;
    lines
        .into_iter()
        .map(|(n, l)| {
            serde_json::from_str(&l).map_err(|e| TaskError::Schema {
                path: path.to_path_buf(),
                line: n,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Gold targets keyed by id, from either a records file or an answer key.
/// For a records file, facts are scored unless the task is the full task.
pub fn read_gold(path: &Path, task: TaskKind) -> Result<BTreeMap<String, GoldTarget>, TaskError> {
    let (h, _) = read_lines(path, &[RECORDS_FORMAT, ANSWER_KEY_FORMAT])?;
    let schema = |reason: String| TaskError::Schema {
        path: path.to_path_buf(),
        line: 0,
        reason,
    };
    let mut out = BTreeMap::new();
    if h["format"] == RECORDS_FORMAT {
        for r in read_records(path)?.records {
            let answer = r.answer().map_err(schema)?;
            let fact_ids = task.scores_facts().then(|| r.fact_ids());
            out.insert(r.id.clone(), GoldTarget { answer, fact_ids });
        }
    } else {
        for k in read_answer_key(path)? {
            let mut g = k.gold_target().map_err(schema)?;
            if !task.scores_facts() {
                g.fact_ids = None;
            }
            out.insert(k.id.clone(), g);
        }
    }
    Ok(out)
}

/// One line of a prediction file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
}

/// Reads a prediction file: JSON lines, with or without a header line.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionLine>, TaskError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let schema = |reason: String| TaskError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let v: Value = serde_json::from_str(l).map_err(|e| schema(e.to_string()))?;
        if v.get("format").is_some() {
            continue;
        }
        let p: PredictionLine = serde_json::from_value(v).map_err(|e| schema(e.to_string()))?;
        if p.answer_value.is_none() && p.program.is_none() {
            return Err(schema(format!("prediction {:?} has neither answer nor program", p.id)));
        }
        if !seen.insert(p.id.clone()) {
            return Err(schema(format!("duplicate prediction id {:?}", p.id)));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn write_predictions(preds: &[PredictionLine], path: &Path) -> Result<(), TaskError> {
    write_lines(path, header("fermi-predictions", None), preds)
}
