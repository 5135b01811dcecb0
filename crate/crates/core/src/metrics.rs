//! Answer and program scoring.
//!
//! The answer score gives full credit for the exact gold magnitude and loses
//! a third of a point per order of magnitude of error:
//!
//! ```text
//! score = max(0, 1 - |log10(predicted / gold)| / 3)
//! ```
//!
//! Programs are scored on three axes: validity (does it execute), the score
//! of its executed answer, and fact F1 against the gold fact ids.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{run_text, ErrorKind, ExecOptions};
use crate::par::{self, Execution};
use crate::program::Identifier;
use crate::units::Quantity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("gold answer must be positive, got {0}")]
    InvalidGold(f64),
    #[error("nothing to aggregate")]
    EmptyInput,
}

/// Order-of-magnitude score on raw magnitudes. Non-positive predictions score 0.
pub fn fp_score_magnitudes(predicted: f64, gold: f64) -> Result<f64, MetricError> {
    if !(gold > 0.0) || !gold.is_finite() {
        return Err(MetricError::InvalidGold(gold));
    }
    if !(predicted > 0.0) || !predicted.is_finite() {
        return Ok(0.0);
    }
    // difference of logs keeps the score exactly symmetric in its arguments
    let orders = (predicted.log10() - gold.log10()).abs();
    Ok((1.0 - orders / 3.0).clamp(0.0, 1.0))
}

/// Order-of-magnitude score of two SI-normalized quantities. Dimensions are
/// not compared; see [`fp_score_checked`].
pub fn fp_score(predicted: &Quantity, gold: &Quantity) -> Result<f64, MetricError> {
    fp_score_magnitudes(predicted.magnitude(), gold.magnitude())
}

/// [`fp_score`] plus a warning when the dimensions disagree.
pub fn fp_score_checked(
    predicted: &Quantity,
    gold: &Quantity,
) -> Result<(f64, Option<String>), MetricError> {
    let s = fp_score(predicted, gold)?;
    let warning = (predicted.dimension() != gold.dimension()).then(|| {
        format!(
            "predicted dimension {} differs from gold {}; scored on magnitude",
            predicted.dimension(),
            gold.dimension()
        )
    });
    Ok((s, warning))
}

/// F1 between cited and gold fact ids. Two empty sets score 1.
pub fn fact_f1(used: &BTreeSet<Identifier>, gold: &BTreeSet<Identifier>) -> f64 {
    if used.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let hits = used.intersection(gold).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let precision = hits / used.len() as f64;
    let recall = hits / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// What happened to one scored question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The program executed.
    Valid,
    /// Only a direct answer was given.
    NoProgram,
    /// No prediction line matched this question.
    MissingPrediction,
    Failed(#[serde(with = "error_kind_serde")] ErrorKind),
}

impl Outcome {
    pub fn label(&self) -> String {
        match self {
            Outcome::Valid => "valid".into(),
            Outcome::NoProgram => "no_program".into(),
            Outcome::MissingPrediction => "missing_prediction".into(),
            Outcome::Failed(k) => k.as_str().into(),
        }
    }
}

mod error_kind_serde {
    use super::ErrorKind;
    use serde::{Deserialize, Deserializer, Serializer};

    const ALL: [ErrorKind; 11] = [
        ErrorKind::EmptyProgram,
        ErrorKind::SyntaxError,
        ErrorKind::UnknownOperator,
        ErrorKind::DuplicateDefinition,
        ErrorKind::UndefinedReference,
        ErrorKind::CyclicDependency,
        ErrorKind::DivisionByZero,
        ErrorKind::DimensionMismatch,
        ErrorKind::MissingRoot,
        ErrorKind::InvalidValue,
        ErrorKind::NonFinite,
    ];

    pub fn serialize<S: Serializer>(k: &ErrorKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(k.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ErrorKind, D::Error> {
        let s = String::deserialize(d)?;
        ALL.into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown error kind {s}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub answer_score: f64,
    pub validity: u8,
    pub pans_score: f64,
    /// `None` when gold facts were not part of the task input.
    pub fact_f1: Option<f64>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl QuestionScore {
    /// Zero credit on every axis, for questions with no usable prediction.
    pub fn zero(outcome: Outcome, facts_applicable: bool) -> QuestionScore {
        QuestionScore {
            answer_score: 0.0,
            validity: 0,
            pans_score: 0.0,
            fact_f1: facts_applicable.then_some(0.0),
            outcome,
            notes: Vec::new(),
        }
    }
}

/// A model's output for one question: a direct answer, a program, or both.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Prediction {
    pub answer: Option<Quantity>,
    pub program: Option<String>,
}

/// The gold side of a scored question.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldTarget {
    pub answer: Quantity,
    /// Gold fact ids when facts were part of the task input.
    pub fact_ids: Option<BTreeSet<Identifier>>,
}

pub fn score_prediction(pred: &Prediction, gold: &GoldTarget) -> QuestionScore {
    score_prediction_with(pred, gold, &ExecOptions::default())
}

pub fn score_prediction_with(
    pred: &Prediction,
    gold: &GoldTarget,
    opts: &ExecOptions<'_>,
) -> QuestionScore {
    let mut notes = Vec::new();
    let score_against_gold = |q: &Quantity, what: &str, notes: &mut Vec<String>| {
        match fp_score_checked(q, &gold.answer) {
            Ok((s, w)) => {
                if let Some(w) = w {
                    notes.push(format!("{what}: {w}"));
                }
                s
            }
            Err(e) => {
                notes.push(format!("{what}: {e}"));
                0.0
            }
        }
    };

    let answer_score = pred
        .answer
        .as_ref()
        .map_or(0.0, |a| score_against_gold(a, "answer", &mut notes));

    let (validity, pans_score, used, outcome) = match pred.program.as_deref() {
        None => (0, 0.0, BTreeSet::new(), Outcome::NoProgram),
        Some(text) => match run_text(text, opts) {
            Ok((program, result)) => {
                let value = result.value().expect("run_text returns only valid results");
                let s = score_against_gold(&value, "program", &mut notes);
                (1, s, program.used_fact_ids(), Outcome::Valid)
            }
            Err(e) => {
                notes.push(e.to_string());
                // a program that parses still cites facts even if it cannot run
                let used = crate::program::parse_program(text)
                    .map(|p| p.used_fact_ids())
                    .unwrap_or_default();
                (0, 0.0, used, Outcome::Failed(e.kind()))
            }
        },
    };

    QuestionScore {
        answer_score,
        validity,
        pans_score,
        fact_f1: gold.fact_ids.as_ref().map(|g| fact_f1(&used, g)),
        outcome,
        notes,
    }
}

/// Scores many questions; output order matches input order.
pub fn score_batch(exec: Execution, items: &[(Prediction, GoldTarget)]) -> Vec<QuestionScore> {
    par::map(exec, items, |(p, g)| score_prediction(p, g))
}

/// Split-level means. Rounding to two decimals happens only in
/// [`AggregateReport::to_text`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub split: String,
    pub count: usize,
    pub answer: f64,
    pub validity: f64,
    pub pans: f64,
    /// Mean fact F1 over the questions where it applies.
    pub facts: Option<f64>,
    pub facts_count: usize,
    pub outcomes: BTreeMap<String, usize>,
}

pub fn aggregate(split: &str, scores: &[QuestionScore]) -> Result<AggregateReport, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = scores.len() as f64;
    let mut answer = 0.0;
    let mut validity = 0.0;
    let mut pans = 0.0;
    let mut facts = 0.0;
    let mut facts_count = 0;
    let mut outcomes = BTreeMap::new();
    // summed in input order so the result does not depend on scheduling
    for s in scores {
        answer += s.answer_score;
        validity += f64::from(s.validity);
        pans += s.pans_score;
        if let Some(f) = s.fact_f1 {
            facts += f;
            facts_count += 1;
        }
        *outcomes.entry(s.outcome.label()).or_insert(0) += 1;
    }
    Ok(AggregateReport {
        split: split.to_string(),
        count: scores.len(),
        answer: answer / n,
        validity: validity / n,
        pans: pans / n,
        facts: (facts_count > 0).then(|| facts / facts_count as f64),
        facts_count,
        outcomes,
    })
}

impl AggregateReport {
    /// One `metric split value count` line per metric and outcome.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let split = &self.split;
        let n = self.count;
        let _ = writeln!(out, "answer {split} {:.2} {n}", self.answer);
        let _ = writeln!(out, "validity {split} {:.2} {n}", self.validity);
        let _ = writeln!(out, "pans {split} {:.2} {n}", self.pans);
        match self.facts {
            Some(f) => {
                let _ = writeln!(out, "facts {split} {f:.2} {}", self.facts_count);
            }
            None => {
                let _ = writeln!(out, "facts {split} n/a 0");
            }
        }
        for (label, c) in &self.outcomes {
            let _ = writeln!(out, "outcome.{label} {split} {:.2} {c}", *c as f64 / n as f64);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Dimension;
    use proptest::prelude::*;

    fn dimless(x: f64) -> Quantity {
        Quantity::dimensionless(x).unwrap()
    }

    #[test]
    fn paper_anchors() {
        let s = fp_score_magnitudes(100_000.0, 85_090.0).unwrap();
        assert!((s - 0.9766).abs() < 5e-4, "{s}");
        assert_eq!(fp_score_magnitudes(100.0, 1.08e15).unwrap(), 0.0);
    }

    #[test]
    fn formula_cases() {
        assert_eq!(fp_score_magnitudes(42.0, 42.0).unwrap(), 1.0);
        assert_eq!(fp_score_magnitudes(42_000.0, 42.0).unwrap(), 0.0);
        assert_eq!(fp_score_magnitudes(0.0, 42.0).unwrap(), 0.0);
        assert_eq!(fp_score_magnitudes(-5.0, 42.0).unwrap(), 0.0);
        assert_eq!(fp_score_magnitudes(5.0, 0.0), Err(MetricError::InvalidGold(0.0)));
        // jelly-bean row: formula gives ~0.084 for 10 vs 5583.33
        let s = fp_score_magnitudes(10.0, 5583.33).unwrap();
        assert!((s - 0.0844).abs() < 1e-3);
    }

    #[test]
    fn fact_f1_cases() {
        let ids = |xs: &[u32]| xs.iter().map(|&i| Identifier::fact(i)).collect::<BTreeSet<_>>();
        assert_eq!(fact_f1(&ids(&[1, 2, 3]), &ids(&[1, 2, 3])), 1.0);
        assert!((fact_f1(&ids(&[1, 2]), &ids(&[1, 2, 3])) - 0.8).abs() < 1e-12);
        assert_eq!(fact_f1(&ids(&[]), &ids(&[1])), 0.0);
        assert_eq!(fact_f1(&ids(&[1]), &ids(&[])), 0.0);
        assert_eq!(fact_f1(&ids(&[]), &ids(&[])), 1.0);
    }

    const AIRBORNE_GOLD: &str = "F1: At any given time, 1270000 people are airborne., F2: The fraction of Earth as Europe is 6.7%, Q1: How many people are airborne at any given time?, Q2: What fraction of Earth does Europe constitute?, A1: 1270000, A2: 0.067, Q2 -> A2 because  F2, Q1 -> A1 because F1, P: Mul (Q1, Q2)";
    const AIRBORNE_PRED: &str = "F1: Around 10000 people are airborne at any moment., F2: There are around 10 stations in Europe., Q1: How many flights are there in the US?, Q2: How many people are airborne at any moment?, A1: 10000, A2: 10, Q2 -> A2 because F2, Q1 -> A1 because F1, P: Mul (Q1, Q2)";

    #[test]
    fn self_scoring_is_perfect() {
        let gold = GoldTarget {
            answer: dimless(85_090.0),
            fact_ids: Some([Identifier::fact(1), Identifier::fact(2)].into()),
        };
        let pred = Prediction {
            answer: Some(dimless(85_090.0)),
            program: Some(AIRBORNE_GOLD.into()),
        };
        let s = score_prediction(&pred, &gold);
        assert_eq!((s.answer_score, s.validity, s.fact_f1), (1.0, 1, Some(1.0)));
        assert!((s.pans_score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn failure_mode_row_one() {
        let gold = GoldTarget {
            answer: dimless(85_090.0),
            fact_ids: None,
        };
        let pred = Prediction {
            answer: None,
            program: Some(AIRBORNE_PRED.into()),
        };
        let s = score_prediction(&pred, &gold);
        assert_eq!(s.validity, 1);
        assert!((s.pans_score - 0.9766).abs() < 5e-4);
        assert_eq!(s.fact_f1, None);
    }

    #[test]
    fn broken_program_scores_zero() {
        let gold = GoldTarget {
            answer: dimless(10.0),
            fact_ids: Some([Identifier::fact(1)].into()),
        };
        let pred = Prediction {
            answer: None,
            program: Some("Q0 -> Mul(Q1".into()),
        };
        let s = score_prediction(&pred, &gold);
        assert_eq!((s.answer_score, s.validity, s.pans_score, s.fact_f1), (0.0, 0, 0.0, Some(0.0)));
        assert_eq!(s.outcome, Outcome::Failed(ErrorKind::SyntaxError));
    }

    #[test]
    fn dimension_mismatch_is_scored_on_magnitude() {
        let gold = GoldTarget {
            answer: Quantity::new(2.0, Dimension::MASS).unwrap(),
            fact_ids: None,
        };
        let pred = Prediction {
            answer: Some(Quantity::new(2.0, Dimension::LENGTH).unwrap()),
            program: None,
        };
        let s = score_prediction(&pred, &gold);
        assert_eq!(s.answer_score, 1.0);
        assert_eq!(s.notes.len(), 1);
    }

    #[test]
    fn aggregation() {
        let mut a = QuestionScore::zero(Outcome::NoProgram, false);
        a.answer_score = 1.0;
        let b = QuestionScore::zero(Outcome::MissingPrediction, false);
        let r = aggregate("test", &[a, b]).unwrap();
        assert_eq!(r.answer, 0.5);
        assert_eq!(r.count, 2);
        assert_eq!(r.facts, None);
        assert_eq!(r.outcomes.values().sum::<usize>(), 2);
        assert_eq!(aggregate("test", &[]), Err(MetricError::EmptyInput));
        let text = r.to_text();
        assert!(text.starts_with("answer test 0.50 2\n"));
        let back: AggregateReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn batch_matches_sequential() {
        let items: Vec<_> = (1..200)
            .map(|i| {
                (
                    Prediction {
                        answer: Some(dimless(i as f64)),
                        program: Some(format!("Q0 -> A1 because F1, A1: {}", i * 3)),
                    },
                    GoldTarget {
                        answer: dimless(100.0),
                        fact_ids: Some([Identifier::fact(1)].into()),
                    },
                )
            })
            .collect();
        assert_eq!(
            score_batch(Execution::Sequential, &items),
            score_batch(Execution::Parallel, &items)
        );
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric(a in 1e-30f64..1e30, b in 1e-30f64..1e30) {
            let s = fp_score_magnitudes(a, b).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, fp_score_magnitudes(b, a).unwrap());
        }

        #[test]
        fn scale_law(a in 1e-20f64..1e20, k in 0i32..5) {
            let s = fp_score_magnitudes(10f64.powi(k) * a, a).unwrap();
            let expected = (1.0 - k as f64 / 3.0).max(0.0);
            prop_assert!((s - expected).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_log_error(g in 1e-10f64..1e10, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0) {
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let s_near = fp_score_magnitudes(g * 10f64.powf(near), g).unwrap();
            let s_far = fp_score_magnitudes(g * 10f64.powf(far), g).unwrap();
            prop_assert!(s_near + 1e-12 >= s_far);
        }

        #[test]
        fn unit_choice_does_not_matter(litres in 1e-3f64..1e9, gold in 1e-3f64..1e6) {
            use crate::units::parse_quantity;
            let g = parse_quantity(&format!("{gold} m**3")).unwrap();
            let in_l = parse_quantity(&format!("{litres} L")).unwrap();
            let in_m3 = parse_quantity(&format!("{} m**3", litres / 1000.0)).unwrap();
            let a = fp_score(&in_l, &g).unwrap();
            let b = fp_score(&in_m3, &g).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
