//! Program evaluation.
//!
//! Evaluation is a memoized depth-first walk from the root question `Q0`.
//! Every question is evaluated at most once; a question that is reached again
//! while it is still being evaluated is a cycle.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::program::{parse_program, Arg, CompBody, Identifier, Operator, ParseError, Program, Statement};
use crate::units::{
    format_number, quantity_arith, round_significant, split_number, ArithOp, Quantity, UnitError,
    UnitMode, UnitRegistry,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("{0} is referenced but never defined")]
    UndefinedReference(Identifier),
    #[error("cyclic dependency through {0}")]
    CyclicDependency(Identifier),
    #[error("division by zero in {0}")]
    DivisionByZero(Identifier),
    #[error("dimension mismatch in {0}")]
    DimensionMismatch(Identifier),
    #[error("no computation for the root question Q0")]
    MissingRoot,
    #[error("value {id} is not a quantity: {reason}")]
    InvalidValue { id: Identifier, reason: String },
    #[error("non-finite result in {0}")]
    NonFinite(Identifier),
}

impl ExecError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ExecError::UndefinedReference(_) => ErrorKind::UndefinedReference,
            ExecError::CyclicDependency(_) => ErrorKind::CyclicDependency,
            ExecError::DivisionByZero(_) => ErrorKind::DivisionByZero,
            ExecError::DimensionMismatch(_) => ErrorKind::DimensionMismatch,
            ExecError::MissingRoot => ErrorKind::MissingRoot,
            ExecError::InvalidValue { .. } => ErrorKind::InvalidValue,
            ExecError::NonFinite(_) => ErrorKind::NonFinite,
        }
    }

    /// The identifier the error points at, if any.
    pub fn location(&self) -> Option<Identifier> {
        match self {
            ExecError::UndefinedReference(id)
            | ExecError::CyclicDependency(id)
            | ExecError::DivisionByZero(id)
            | ExecError::DimensionMismatch(id)
            | ExecError::NonFinite(id)
            | ExecError::InvalidValue { id, .. } => Some(*id),
            ExecError::MissingRoot => None,
        }
    }
}

/// Why a program failed to produce a value, across parsing and execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorKind {
    EmptyProgram,
    SyntaxError,
    UnknownOperator,
    DuplicateDefinition,
    UndefinedReference,
    CyclicDependency,
    DivisionByZero,
    DimensionMismatch,
    MissingRoot,
    InvalidValue,
    NonFinite,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::EmptyProgram => "empty_program",
            ErrorKind::SyntaxError => "syntax_error",
            ErrorKind::UnknownOperator => "unknown_operator",
            ErrorKind::DuplicateDefinition => "duplicate_definition",
            ErrorKind::UndefinedReference => "undefined_reference",
            ErrorKind::CyclicDependency => "cyclic_dependency",
            ErrorKind::DivisionByZero => "division_by_zero",
            ErrorKind::DimensionMismatch => "dimension_mismatch",
            ErrorKind::MissingRoot => "missing_root",
            ErrorKind::InvalidValue => "invalid_value",
            ErrorKind::NonFinite => "non_finite",
        }
    }
}

impl From<&ParseError> for ErrorKind {
    fn from(e: &ParseError) -> ErrorKind {
        match e {
            ParseError::Empty => ErrorKind::EmptyProgram,
            ParseError::Syntax { .. } => ErrorKind::SyntaxError,
            ParseError::UnknownOperator { .. } => ErrorKind::UnknownOperator,
            ParseError::DuplicateDefinition(_) => ErrorKind::DuplicateDefinition,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExecOptions<'a> {
    pub mode: UnitMode,
    /// Require every cited fact id to be declared inside the program.
    pub check_facts: bool,
    pub registry: &'a UnitRegistry,
}

impl Default for ExecOptions<'static> {
    fn default() -> Self {
        ExecOptions {
            mode: UnitMode::Lenient,
            check_facts: false,
            registry: UnitRegistry::standard(),
        }
    }
}

impl ExecOptions<'static> {
    pub fn with_mode(mode: UnitMode) -> Self {
        ExecOptions {
            mode,
            ..ExecOptions::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExecutionResult {
    pub outcome: Result<Quantity, ExecError>,
    pub warnings: Vec<String>,
    /// Sub-question values in the order they were completed.
    pub trace: Vec<(Identifier, Quantity)>,
}

impl ExecutionResult {
    pub fn is_valid(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn value(&self) -> Option<Quantity> {
        self.outcome.as_ref().ok().copied()
    }
}

pub fn execute(p: &Program, mode: UnitMode) -> ExecutionResult {
    execute_with(p, &ExecOptions::with_mode(mode))
}

pub fn execute_with(p: &Program, opts: &ExecOptions<'_>) -> ExecutionResult {
    let mut run = Run {
        comps: HashMap::new(),
        values: HashMap::new(),
        facts: p.declared_fact_ids(),
        opts,
        memo: HashMap::new(),
        warnings: Vec::new(),
        trace: Vec::new(),
        used_values: HashSet::new(),
    };
    for s in p.statements() {
        match s {
            Statement::Comp { target, body } => {
                run.comps.insert(*target, body);
            }
            Statement::Value { id, quantity_text } => {
                run.values.insert(*id, quantity_text.as_str());
            }
            _ => {}
        }
    }
    let outcome = run.evaluate(p.root());
    if outcome.is_ok() {
        run.warn_unreachable(p);
    }
    ExecutionResult {
        outcome,
        warnings: run.warnings,
        trace: run.trace,
    }
}

struct Run<'p, 'o> {
    comps: HashMap<Identifier, &'p CompBody>,
    values: HashMap<Identifier, &'p str>,
    facts: BTreeSet<Identifier>,
    opts: &'o ExecOptions<'o>,
    memo: HashMap<Identifier, Quantity>,
    warnings: Vec<String>,
    trace: Vec<(Identifier, Quantity)>,
    used_values: HashSet<Identifier>,
}

impl Run<'_, '_> {
    fn evaluate(&mut self, root: Identifier) -> Result<Quantity, ExecError> {
        if !self.comps.contains_key(&root) {
            return Err(ExecError::MissingRoot);
        }
        let mut in_progress: HashSet<Identifier> = HashSet::new();
        // (question, children already pushed)
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if self.memo.contains_key(&id) {
                continue;
            }
            let body = *self
                .comps
                .get(&id)
                .ok_or(ExecError::UndefinedReference(id))?;
            let value = match body {
                CompBody::Value(v) => self.value_ref(id, v.value, v.because)?,
                CompBody::Math(m) if !expanded => {
                    if !in_progress.insert(id) {
                        return Err(ExecError::CyclicDependency(id));
                    }
                    stack.push((id, true));
                    for arg in m.args.iter().rev() {
                        if let Arg::Question(q) = arg {
                            if in_progress.contains(q) {
                                return Err(ExecError::CyclicDependency(*q));
                            }
                            if !self.memo.contains_key(q) {
                                stack.push((*q, false));
                            }
                        }
                    }
                    continue;
                }
                CompBody::Math(m) => {
                    let op = match m.op {
                        Operator::Add => ArithOp::Add,
                        Operator::Sub => ArithOp::Sub,
                        Operator::Mul => ArithOp::Mul,
                        Operator::Div => ArithOp::Div,
                    };
                    let mut acc: Option<Quantity> = None;
                    for arg in &m.args {
                        let v = match arg {
                            Arg::Question(q) => self.memo[q],
                            Arg::Literal(x) => {
                                Quantity::dimensionless(*x).map_err(|_| ExecError::NonFinite(id))?
                            }
                        };
                        acc = Some(match acc {
                            None => v,
                            Some(a) => {
                                let (r, w) = quantity_arith(op, a, v, self.opts.mode).map_err(
                                    |e| match e {
                                        UnitError::DivisionByZero => ExecError::DivisionByZero(id),
                                        UnitError::DimensionMismatch { .. } => {
                                            ExecError::DimensionMismatch(id)
                                        }
                                        _ => ExecError::NonFinite(id),
                                    },
                                )?;
                                if let Some(w) = w {
                                    self.warnings.push(format!("{id}: {w}"));
                                }
                                r
                            }
                        });
                    }
                    in_progress.remove(&id);
                    // arity is enforced by the parser, so acc is set
                    acc.ok_or(ExecError::MissingRoot)?
                }
            };
            self.memo.insert(id, value);
            self.trace.push((id, value));
        }
        Ok(self.memo[&root])
    }

    fn value_ref(
        &mut self,
        question: Identifier,
        value: Identifier,
        because: Identifier,
    ) -> Result<Quantity, ExecError> {
        if self.opts.check_facts && !self.facts.contains(&because) {
            return Err(ExecError::UndefinedReference(because));
        }
        let text = *self
            .values
            .get(&value)
            .ok_or(ExecError::UndefinedReference(value))?;
        self.used_values.insert(value);
        let (q, warning) = self
            .opts
            .registry
            .parse_quantity_with(text, self.opts.mode)
            .map_err(|e| ExecError::InvalidValue {
                id: value,
                reason: e.to_string(),
            })?;
        if let Some(w) = warning {
            self.warnings.push(format!("{question}: {w}"));
        }
        Ok(q)
    }

    fn warn_unreachable(&mut self, p: &Program) {
        for s in p.statements() {
            match s {
                Statement::Comp { target, .. } if !self.memo.contains_key(target) => {
                    self.warnings.push(format!("{target} is never reached from the root"));
                }
                Statement::Value { id, .. } if !self.used_values.contains(id) => {
                    self.warnings.push(format!("{id} is declared but never used"));
                }
                _ => {}
            }
        }
    }
}

/// Why a program text is invalid, from either stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramFailure {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl ProgramFailure {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ProgramFailure::Parse(e) => e.into(),
            ProgramFailure::Exec(e) => e.kind(),
        }
    }
}

/// Parses and runs a program text in one step.
pub fn run_text(text: &str, opts: &ExecOptions<'_>) -> Result<(Program, ExecutionResult), ProgramFailure> {
    let p = parse_program(text)?;
    let r = execute_with(&p, opts);
    if let Err(e) = &r.outcome {
        return Err(e.clone().into());
    }
    Ok((p, r))
}

/// 1 when the text parses and evaluates to a number in lenient mode, else 0.
pub fn check_validity(text: &str) -> u8 {
    u8::from(run_text(text, &ExecOptions::default()).is_ok())
}

/// Human-readable answer: in the first declared unit of matching dimension,
/// followed by SI, e.g. `"65016 L (65.016 m**3)"`.
pub fn render_answer(p: &Program, value: Quantity, registry: &UnitRegistry) -> String {
    let si = Quantity::new(round_significant(value.magnitude(), 12), value.dimension())
        .map(|q| q.render_si())
        .unwrap_or_else(|_| value.render_si());
    if value.dimension().is_dimensionless() {
        return format_number(round_significant(value.magnitude(), 12));
    }
    let si_unit = value.dimension().si_unit();
    for s in p.statements() {
        if let Statement::Value { quantity_text, .. } = s {
            let Ok((_, unit)) = split_number(quantity_text) else {
                continue;
            };
            if unit.is_empty() || unit == si_unit {
                continue;
            }
            if let Some(text) = value.render_in(unit, registry) {
                return format!("{text} ({si})");
            }
        }
    }
    si
}
