//! Templated question generation from a knowledge base.
//!
//! Each template is a formula over object attributes. Instantiating one picks
//! objects (and a multiplier `k` where the template has one), renders the
//! question, and builds an explanation program whose value declarations are
//! the knowledge-base entries. The answer is the closed-form value of the
//! formula tree, computed with the same floating point operations the
//! executor performs, so executing the program reproduces it bit for bit.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Attribute, KnowledgeBase};
use crate::par::{self, Execution};
use crate::program::{
    Arg, CompBody, Identifier, MathExpr, Operator, Program, Statement, ValueRef,
};
use crate::tasks::{FactEntry, FermiRecord, Source, Split, SynthMeta, write_records};
use crate::units::{format_number, Dimension, Quantity, UnitRegistry};

pub const TEMPLATE_COUNT: usize = 12;
pub const K_RANGE: (u32, u32) = (2, 100);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    X,
    Y,
}

/// Formula pattern. `question` on an operator node is the sub-question asked
/// for that intermediate result; `{x}`, `{y}` and `{k}` are substituted.
#[derive(Clone, Debug)]
pub enum Formula {
    Attr(Slot, Attribute),
    /// `k` as a dimensionless literal argument.
    K,
    /// `k` as a value declaration in the given unit, with its own fact.
    KValue(&'static str),
    Lit(f64),
    Op {
        op: Operator,
        question: &'static str,
        args: Vec<Formula>,
    },
}

impl Formula {
    fn op(op: Operator, question: &'static str, a: Formula, b: Formula) -> Formula {
        Formula::Op {
            op,
            question,
            args: vec![a, b],
        }
    }

    fn walk<'f>(&'f self, out: &mut Vec<&'f Formula>) {
        out.push(self);
        if let Formula::Op { args, .. } = self {
            for a in args {
                a.walk(out);
            }
        }
    }

    /// Compact form, e.g. `Div($y.volume, $x.volume)`.
    pub fn pattern(&self) -> String {
        match self {
            Formula::Attr(s, a) => format!("${}.{a}", slot_name(*s)),
            Formula::K | Formula::KValue(_) => "$k".into(),
            Formula::Lit(x) => format_number(*x),
            Formula::Op { op, args, .. } => {
                let a: Vec<String> = args.iter().map(Formula::pattern).collect();
                format!("{}({})", op.name(), a.join(", "))
            }
        }
    }
}

fn slot_name(s: Slot) -> &'static str {
    match s {
        Slot::X => "x",
        Slot::Y => "y",
    }
}

#[derive(Clone, Debug)]
pub struct Template {
    pub id: u8,
    pub question: &'static str,
    pub formula: Formula,
}

impl Template {
    pub fn slots(&self) -> Vec<Slot> {
        let mut s: Vec<Slot> = self
            .required_attrs()
            .into_iter()
            .map(|(slot, _)| slot)
            .collect();
        s.dedup();
        s
    }

    /// Attributes each slot's object must have.
    pub fn required_attrs(&self) -> BTreeMap<Slot, Vec<Attribute>> {
        let mut nodes = Vec::new();
        self.formula.walk(&mut nodes);
        let mut out: BTreeMap<Slot, Vec<Attribute>> = BTreeMap::new();
        for n in nodes {
            if let Formula::Attr(s, a) = n {
                let v = out.entry(*s).or_default();
                if !v.contains(a) {
                    v.push(*a);
                }
            }
        }
        out
    }

    pub fn has_k(&self) -> bool {
        let mut nodes = Vec::new();
        self.formula.walk(&mut nodes);
        nodes
            .iter()
            .any(|n| matches!(n, Formula::K | Formula::KValue(_)))
    }
}

/// The twelve generation templates.
pub fn templates() -> &'static [Template] {
    use std::sync::OnceLock;
    static T: OnceLock<Vec<Template>> = OnceLock::new();
    T.get_or_init(build_templates)
}

pub fn template(id: u8) -> Option<&'static Template> {
    templates().iter().find(|t| t.id == id)
}

fn build_templates() -> Vec<Template> {
    use Attribute::*;
    use Formula::{Attr, Lit, K};
    use Operator::{Div, Mul};
    use Slot::{X, Y};
    let op = Formula::op;
    let q = "";
    vec![
        Template {
            id: 1,
            question: "How many {x} fit in {y}?",
            formula: op(Div, q, Attr(Y, Volume), Attr(X, Volume)),
        },
        Template {
            id: 2,
            question: "How many {x} have the same length as {y}?",
            formula: op(Div, q, Attr(Y, Length), Attr(X, Length)),
        },
        Template {
            id: 3,
            question: "How many {x} fit on {y}?",
            formula: op(Div, q, Attr(Y, Area), Attr(X, Area)),
        },
        Template {
            id: 4,
            question: "How many {y} put together contain the same information as {k} of {x}?",
            formula: op(
                Mul,
                q,
                K,
                op(
                    Div,
                    "How many {y} contain the same information as one {x}?",
                    Attr(X, Data),
                    Attr(Y, Data),
                ),
            ),
        },
        Template {
            id: 5,
            question: "How long does it take for {x} to travel across {y}?",
            formula: op(Div, q, Attr(Y, Length), Attr(X, Speed)),
        },
        Template {
            id: 6,
            question: "Assume {x}'s volume is half its value. How many {x} fit in {y}?",
            formula: op(
                Div,
                q,
                Attr(Y, Volume),
                op(Div, "What is half the volume of {x}?", Attr(X, Volume), Lit(2.0)),
            ),
        },
        Template {
            id: 7,
            question: "Assume {x}'s length is half its value. How many {x} have the same length as {y}?",
            formula: op(
                Div,
                q,
                Attr(Y, Length),
                op(Div, "What is half the length of {x}?", Attr(X, Length), Lit(2.0)),
            ),
        },
        Template {
            id: 8,
            question: "Assume {x}'s area is half its value. How many {x} fit on {y}?",
            formula: op(
                Div,
                q,
                Attr(Y, Area),
                op(Div, "What is half the area of {x}?", Attr(X, Area), Lit(2.0)),
            ),
        },
        Template {
            id: 9,
            question: "How many {x} make up {k} kgs?",
            formula: op(Div, q, Formula::KValue("kg"), Attr(X, Weight)),
        },
        Template {
            id: 10,
            question: "How many {x} can {k} of {y} buy?",
            formula: op(
                Mul,
                q,
                Attr(Y, Cost),
                op(Div, "How many {x} can {k} dollars buy?", K, Attr(X, Cost)),
            ),
        },
        Template {
            id: 11,
            question: "How long to digest {k} grams of {x}?",
            formula: op(
                Mul,
                q,
                K,
                op(
                    Div,
                    "How long does it take to digest one gram of {x}?",
                    Attr(X, Calories),
                    Lit(65.0),
                ),
            ),
        },
        Template {
            id: 12,
            question: "If {k} of {x} were to have the same density as {y}, how much would it weigh?",
            formula: op(
                Mul,
                q,
                K,
                op(
                    Mul,
                    "How much would one {x} weigh with the density of {y}?",
                    Attr(Y, Density),
                    Attr(X, Volume),
                ),
            ),
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bindings {
    pub x: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
}

impl Bindings {
    fn object(&self, s: Slot) -> &str {
        match s {
            Slot::X => &self.x,
            Slot::Y => self.y.as_deref().unwrap_or(""),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub object: String,
    pub attribute: Attribute,
    pub pivot: String,
}

/// A node of an instantiated solution tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Value {
        question: String,
        fact: String,
        text: String,
        quantity: Quantity,
        /// Set on leaves read from the knowledge base; decomposition targets.
        source: Option<(String, Attribute)>,
    },
    Literal(f64),
    Math {
        question: String,
        op: Operator,
        args: Vec<Step>,
    },
}

impl Step {
    /// Closed-form value: left fold of raw magnitude arithmetic with the
    /// dimension tracked alongside.
    pub fn evaluate(&self) -> (f64, Dimension) {
        match self {
            Step::Value { quantity, .. } => (quantity.magnitude(), quantity.dimension()),
            Step::Literal(x) => (*x, Dimension::DIMENSIONLESS),
            Step::Math { op, args, .. } => {
                let mut it = args.iter().map(Step::evaluate);
                let (mut m, mut d) = it.next().expect("operator without arguments");
                for (bm, bd) in it {
                    match op {
                        Operator::Add => m += bm,
                        Operator::Sub => m -= bm,
                        Operator::Mul => {
                            m *= bm;
                            d = d * bd;
                        }
                        Operator::Div => {
                            m /= bm;
                            d = d / bd;
                        }
                    }
                }
                (m, d)
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Step::Value { .. } => 1,
            Step::Literal(_) => 0,
            Step::Math { args, .. } => 1 + args.iter().map(Step::depth).max().unwrap_or(0),
        }
    }

    /// Paths (child indices from the root) of knowledge-base leaves.
    fn kb_leaves(&self, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match self {
            Step::Value {
                source: Some(_), ..
            } => out.push(path.clone()),
            Step::Math { args, .. } => {
                for (i, a) in args.iter().enumerate() {
                    path.push(i);
                    a.kb_leaves(path, out);
                    path.pop();
                }
            }
            _ => {}
        }
    }

    fn at_mut(&mut self, path: &[usize]) -> &mut Step {
        let mut s = self;
        for &i in path {
            s = match s {
                Step::Math { args, .. } => &mut args[i],
                _ => unreachable!("path leads through a leaf"),
            };
        }
        s
    }

    fn at(&self, path: &[usize]) -> &Step {
        let mut s = self;
        for &i in path {
            s = match s {
                Step::Math { args, .. } => &args[i],
                _ => unreachable!("path leads through a leaf"),
            };
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedRecord {
    pub template_id: u8,
    pub bindings: Bindings,
    pub decomposed: Option<Decomposition>,
    pub seed: u64,
    pub question: String,
    pub tree: Step,
    pub answer: Quantity,
}

impl GeneratedRecord {
    /// Program and facts, numbered in pre-order: the root is Q0 and
    /// questions, values and facts are numbered in the order they are met.
    pub fn program_and_facts(&self) -> (Program, Vec<(Identifier, String)>) {
        let mut b = Builder::default();
        b.visit(&self.tree, true);
        let program = Program::new(b.statements).expect("generated identifiers are unique");
        (program, b.facts)
    }

    pub fn program(&self) -> Program {
        self.program_and_facts().0
    }

    pub fn to_record(&self, id: String, split: Split) -> FermiRecord {
        let (program, facts) = self.program_and_facts();
        FermiRecord {
            id,
            question: self.question.clone(),
            answer_value: self.answer.magnitude(),
            answer_unit: self.answer.dimension().si_unit(),
            facts: facts
                .into_iter()
                .map(|(id, text)| FactEntry {
                    id: id.to_string(),
                    text,
                })
                .collect(),
            program: program.render(),
            source: Source::Synth,
            split,
            synth: Some(SynthMeta {
                template_id: self.template_id,
                bindings: self.bindings.clone(),
                decomposed: self.decomposed.clone(),
                seed: self.seed,
            }),
        }
    }
}

#[derive(Default)]
struct Builder {
    statements: Vec<Statement>,
    facts: Vec<(Identifier, String)>,
    next_q: u32,
    next_v: u32,
}

impl Builder {
    fn visit(&mut self, s: &Step, root: bool) -> Arg {
        let (question, body) = match s {
            Step::Literal(x) => return Arg::Literal(*x),
            Step::Value { question, .. } | Step::Math { question, .. } => (question, s),
        };
        let q = Identifier::question(self.next_q);
        self.next_q += 1;
        debug_assert!(!root || q == Identifier::ROOT);
        self.statements.push(Statement::Question {
            id: q,
            text: question.clone(),
        });
        let comp = match body {
            Step::Value { fact, text, .. } => {
                self.next_v += 1;
                let (a, f) = (Identifier::value(self.next_v), Identifier::fact(self.next_v));
                self.statements.push(Statement::Value {
                    id: a,
                    quantity_text: text.clone(),
                });
                self.facts.push((f, fact.clone()));
                CompBody::Value(ValueRef {
                    value: a,
                    because: f,
                })
            }
            Step::Math { op, args, .. } => {
                let args = args.iter().map(|a| self.visit(a, false)).collect();
                CompBody::Math(MathExpr { op: *op, args })
            }
            Step::Literal(_) => unreachable!(),
        };
        self.statements.push(Statement::Comp { target: q, body: comp });
        Arg::Question(q)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("template {template}: no object has the attributes needed for ${slot}")]
    NoEligibleObjects { template: u8, slot: String },
    #[error("template {0}: cannot pick distinct objects for its slots")]
    SlotCollision(u8),
    #[error("template {template}: object {object:?} lacks {attribute}")]
    MissingAttribute {
        template: u8,
        object: String,
        attribute: Attribute,
    },
    #[error("record is already decomposed")]
    AlreadyDecomposed,
    #[error("no pivot object available for decomposition")]
    NoPivotObject,
    #[error("knowledge base too small: {0}")]
    KbTooSmall(String),
    #[error("bad generation parameters: {0}")]
    BadParameters(String),
    #[error("{0}")]
    Io(String),
}

fn fill(pattern: &str, b: &Bindings) -> String {
    let mut s = pattern.replace("{x}", &b.x);
    if let Some(y) = &b.y {
        s = s.replace("{y}", y);
    }
    if let Some(k) = b.k {
        s = s.replace("{k}", &k.to_string());
    }
    s
}

fn attr_leaf(kb: &KnowledgeBase, template: u8, object: &str, attribute: Attribute) -> Result<Step, GenError> {
    let v = kb.value(object, attribute).ok_or_else(|| GenError::MissingAttribute {
        template,
        object: object.to_string(),
        attribute,
    })?;
    Ok(Step::Value {
        question: format!("What is the {attribute} of {object}?"),
        fact: format!("The {attribute} of {object} is {}.", v.text),
        text: v.text.clone(),
        quantity: v.quantity,
        source: Some((object.to_string(), attribute)),
    })
}

fn build_step(
    f: &Formula,
    t: &Template,
    b: &Bindings,
    kb: &KnowledgeBase,
    question: Option<String>,
) -> Result<Step, GenError> {
    let k = || b.k.ok_or(GenError::BadParameters(format!("template {} needs k", t.id)));
    Ok(match f {
        Formula::Attr(s, a) => attr_leaf(kb, t.id, b.object(*s), *a)?,
        Formula::K => Step::Literal(f64::from(k()?)),
        Formula::KValue(unit) => {
            let text = format!("{} {unit}", k()?);
            let quantity = UnitRegistry::standard()
                .parse_quantity(&text)
                .map_err(|e| GenError::BadParameters(e.to_string()))?;
            Step::Value {
                question: format!("How much is {text}?"),
                fact: format!("The amount to make up is {text}."),
                text,
                quantity,
                source: None,
            }
        }
        Formula::Lit(x) => Step::Literal(*x),
        Formula::Op { op, question: qp, args } => Step::Math {
            question: question.unwrap_or_else(|| fill(qp, b)),
            op: *op,
            args: args
                .iter()
                .map(|a| build_step(a, t, b, kb, None))
                .collect::<Result<_, _>>()?,
        },
    })
}

fn finish(
    template: &Template,
    bindings: Bindings,
    decomposed: Option<Decomposition>,
    seed: u64,
    question: String,
    tree: Step,
) -> Result<GeneratedRecord, GenError> {
    let (m, d) = tree.evaluate();
    let answer = Quantity::new(m, d).map_err(|e| GenError::BadParameters(e.to_string()))?;
    Ok(GeneratedRecord {
        template_id: template.id,
        bindings,
        decomposed,
        seed,
        question,
        tree,
        answer,
    })
}

/// Instantiates a template with explicit bindings.
pub fn instantiate_with(
    template: &Template,
    kb: &KnowledgeBase,
    bindings: Bindings,
    seed: u64,
) -> Result<GeneratedRecord, GenError> {
    let slots = template.slots();
    if slots.contains(&Slot::Y) {
        match &bindings.y {
            Some(y) if *y == bindings.x => return Err(GenError::SlotCollision(template.id)),
            None => return Err(GenError::BadParameters("missing $y".into())),
            _ => {}
        }
    }
    let question = fill(template.question, &bindings);
    let tree = build_step(&template.formula, template, &bindings, kb, Some(question.clone()))?;
    finish(template, bindings, None, seed, question, tree)
}

fn eligible(template: &Template, kb: &KnowledgeBase) -> Result<BTreeMap<Slot, Vec<String>>, GenError> {
    let mut out = BTreeMap::new();
    for (slot, attrs) in template.required_attrs() {
        let names: Vec<String> = kb.objects_with(&attrs).into_iter().collect();
        if names.is_empty() {
            return Err(GenError::NoEligibleObjects {
                template: template.id,
                slot: slot_name(slot).into(),
            });
        }
        out.insert(slot, names);
    }
    Ok(out)
}

/// Every distinct (x, y) binding of a template, without `k`.
fn object_pairs(template: &Template, kb: &KnowledgeBase) -> Result<Vec<(String, Option<String>)>, GenError> {
    let e = eligible(template, kb)?;
    let xs = &e[&Slot::X];
    let pairs: Vec<(String, Option<String>)> = match e.get(&Slot::Y) {
        None => xs.iter().map(|x| (x.clone(), None)).collect(),
        Some(ys) => xs
            .iter()
            .flat_map(|x| {
                ys.iter()
                    .filter(move |y| *y != x)
                    .map(move |y| (x.clone(), Some(y.clone())))
            })
            .collect(),
    };
    if pairs.is_empty() {
        return Err(GenError::SlotCollision(template.id));
    }
    Ok(pairs)
}

fn k_count(template: &Template) -> usize {
    if template.has_k() {
        (K_RANGE.1 - K_RANGE.0 + 1) as usize
    } else {
        1
    }
}

fn binding_at(template: &Template, pairs: &[(String, Option<String>)], i: usize) -> Bindings {
    let nk = k_count(template);
    let (x, y) = pairs[i / nk].clone();
    Bindings {
        x,
        y,
        k: template.has_k().then(|| K_RANGE.0 + (i % nk) as u32),
    }
}

/// Instantiates a template with objects (and `k`) drawn from `seed`.
pub fn instantiate(template: &Template, kb: &KnowledgeBase, seed: u64) -> Result<GeneratedRecord, GenError> {
    let pairs = object_pairs(template, kb)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let i = rng.gen_range(0..pairs.len() * k_count(template));
    instantiate_with(template, kb, binding_at(template, &pairs, i), seed)
}

/// Rewrites the knowledge-base leaf at `path` (child indices from the root)
/// as `Mul(ratio, pivot.attribute)`.
pub fn decompose_at(
    record: &GeneratedRecord,
    kb: &KnowledgeBase,
    path: &[usize],
    pivot: &str,
) -> Result<GeneratedRecord, GenError> {
    if record.decomposed.is_some() {
        return Err(GenError::AlreadyDecomposed);
    }
    let Step::Value {
        question,
        quantity,
        source: Some((object, attribute)),
        ..
    } = record.tree.at(path).clone()
    else {
        return Err(GenError::NoPivotObject);
    };
    if pivot == object {
        return Err(GenError::NoPivotObject);
    }
    let z = kb.value(pivot, attribute).ok_or(GenError::NoPivotObject)?;
    let ratio = quantity.magnitude() / z.quantity.magnitude();
    let ratio_text = format_number(ratio);
    let ratio_q = Quantity::dimensionless(ratio).map_err(|_| GenError::NoPivotObject)?;
    let ratio_leaf = Step::Value {
        question: format!("What is the ratio of the {attribute} of {object} and that of {pivot}?"),
        fact: format!("The ratio of the {attribute} of {object} and that of {pivot} is {ratio_text}."),
        text: ratio_text,
        quantity: ratio_q,
        source: None,
    };
    let mut pivot_leaf = attr_leaf(kb, record.template_id, pivot, attribute)?;
    if let Step::Value { source, .. } = &mut pivot_leaf {
        // the pivot itself is not decomposed again
        *source = None;
    }
    let mut tree = record.tree.clone();
    *tree.at_mut(path) = Step::Math {
        question,
        op: Operator::Mul,
        args: vec![ratio_leaf, pivot_leaf],
    };
    let template = template(record.template_id).ok_or(GenError::NoPivotObject)?;
    finish(
        template,
        record.bindings.clone(),
        Some(Decomposition {
            object,
            attribute,
            pivot: pivot.to_string(),
        }),
        record.seed,
        record.question.clone(),
        tree,
    )
}

/// Candidate leaves for decomposition: the deepest knowledge-base leaves, so
/// the rewrite always deepens the program by one level. Each comes with the
/// pivot objects available for it.
fn pivot_options(record: &GeneratedRecord, kb: &KnowledgeBase) -> Vec<(Vec<usize>, Vec<String>)> {
    let mut leaves = Vec::new();
    record.tree.kb_leaves(&mut Vec::new(), &mut leaves);
    let deepest = leaves.iter().map(Vec::len).max().unwrap_or(0);
    let used: HashSet<&str> = [Some(record.bindings.x.as_str()), record.bindings.y.as_deref()]
        .into_iter()
        .flatten()
        .collect();
    leaves
        .into_iter()
        .filter(|p| p.len() == deepest)
        .filter_map(|p| {
            let Step::Value {
                source: Some((_, a)),
                ..
            } = record.tree.at(&p)
            else {
                return None;
            };
            let pivots: Vec<String> = kb
                .objects_with(&[*a])
                .into_iter()
                .filter(|n| !used.contains(n.as_str()))
                .collect();
            (!pivots.is_empty()).then_some((p, pivots))
        })
        .collect()
}

pub fn can_decompose(record: &GeneratedRecord, kb: &KnowledgeBase) -> bool {
    record.decomposed.is_none() && !pivot_options(record, kb).is_empty()
}

/// Decomposes one deepest knowledge-base leaf against a randomly chosen
/// pivot object.
pub fn decompose(record: &GeneratedRecord, kb: &KnowledgeBase, seed: u64) -> Result<GeneratedRecord, GenError> {
    if record.decomposed.is_some() {
        return Err(GenError::AlreadyDecomposed);
    }
    let options = pivot_options(record, kb);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (path, pivots) = options.choose(&mut rng).ok_or(GenError::NoPivotObject)?;
    let pivot = pivots.choose(&mut rng).expect("non-empty pivot list");
    decompose_at(record, kb, path, pivot)
}

/// SplitMix64 step, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub size: usize,
    pub decompose_fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<GeneratedRecord>,
    pub splits: Vec<Split>,
    pub manifest: GenManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenManifest {
    pub seed: u64,
    pub size: usize,
    pub decompose_fraction: f64,
    pub decomposed: usize,
    pub kb_hash: String,
    pub template_counts: BTreeMap<u8, usize>,
    pub split_counts: BTreeMap<String, usize>,
}

/// Sizes of the train, validation and test splits (80/10/10).
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n as f64 * 0.8).round() as usize;
    let val = ((n as f64 * 0.1).round() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Generates `size` records, template `i % 12 + 1` for record `i`, each
/// template's bindings drawn without replacement. Exactly
/// `round(fraction * size)` records are decomposed.
pub fn generate_dataset(
    kb: &KnowledgeBase,
    cfg: &GenConfig,
    exec: Execution,
) -> Result<Dataset, GenError> {
    if cfg.size < TEMPLATE_COUNT {
        return Err(GenError::BadParameters(format!(
            "size must be at least {TEMPLATE_COUNT}, got {}",
            cfg.size
        )));
    }
    if !(0.0..=1.0).contains(&cfg.decompose_fraction) {
        return Err(GenError::BadParameters(format!(
            "decompose fraction must be in [0, 1], got {}",
            cfg.decompose_fraction
        )));
    }
    let ts = templates();
    // bindings per template
    let per_template: Vec<Vec<Bindings>> = ts
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let need = (cfg.size + TEMPLATE_COUNT - 1 - ti) / TEMPLATE_COUNT;
            let pairs = object_pairs(t, kb)?;
            let total = pairs.len() * k_count(t);
            if total < need {
                return Err(GenError::KbTooSmall(format!(
                    "template {} has {total} distinct instantiations, {need} needed",
                    t.id
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, u64::from(t.id)));
            Ok(sample(&mut rng, total, need)
                .into_iter()
                .map(|i| binding_at(t, &pairs, i))
                .collect())
        })
        .collect::<Result<_, _>>()?;

    let base = par::map_range(exec, cfg.size, |i| {
        let t = &ts[i % TEMPLATE_COUNT];
        let b = per_template[i % TEMPLATE_COUNT][i / TEMPLATE_COUNT].clone();
        instantiate_with(t, kb, b, mix_seed(cfg.seed, 1000 + i as u64))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let want = (cfg.decompose_fraction * cfg.size as f64).round() as usize;
    let mut order: Vec<usize> = (0..cfg.size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xDEC0));
    order.shuffle(&mut rng);
    let mut chosen = vec![false; cfg.size];
    let mut picked = 0;
    for i in order {
        if picked == want {
            break;
        }
        if can_decompose(&base[i], kb) {
            chosen[i] = true;
            picked += 1;
        }
    }
    if picked < want {
        return Err(GenError::KbTooSmall(format!(
            "only {picked} records can be decomposed, {want} requested"
        )));
    }
    let records = par::map_range(exec, cfg.size, |i| {
        if chosen[i] {
            decompose(&base[i], kb, base[i].seed)
        } else {
            Ok(base[i].clone())
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let (n_train, n_val, _) = split_sizes(cfg.size);
    let mut order: Vec<usize> = (0..cfg.size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5717));
    order.shuffle(&mut rng);
    let mut splits = vec![Split::Test; cfg.size];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }

    let mut template_counts = BTreeMap::new();
    for r in &records {
        *template_counts.entry(r.template_id).or_insert(0) += 1;
    }
    let mut split_counts = BTreeMap::new();
    for s in &splits {
        *split_counts.entry(s.to_string()).or_insert(0) += 1;
    }
    let manifest = GenManifest {
        seed: cfg.seed,
        size: cfg.size,
        decompose_fraction: cfg.decompose_fraction,
        decomposed: picked,
        kb_hash: kb.hash(),
        template_counts,
        split_counts,
    };
    Ok(Dataset {
        records,
        splits,
        manifest,
    })
}

impl Dataset {
    pub fn to_records(&self) -> Vec<FermiRecord> {
        self.records
            .iter()
            .zip(&self.splits)
            .enumerate()
            .map(|(i, (r, s))| r.to_record(format!("synth-{i:05}"), *s))
            .collect()
    }

    /// Writes `records.jsonl`, one file per split and `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<(), GenError> {
        let io = |e: std::io::Error| GenError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let all = self.to_records();
        let werr = |e: crate::tasks::TaskError| GenError::Io(e.to_string());
        write_records(&all, &dir.join("records.jsonl")).map_err(werr)?;
        for split in [Split::Train, Split::Validation, Split::Test] {
            let part: Vec<FermiRecord> = all.iter().filter(|r| r.split == split).cloned().collect();
            write_records(&part, &dir.join(format!("{split}.jsonl"))).map_err(werr)?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), manifest + "\n").map_err(io)?;
        Ok(())
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}: {} | {}", self.id, self.formula.pattern(), self.question)
    }
}
