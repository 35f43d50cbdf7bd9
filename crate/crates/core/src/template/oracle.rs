//! Rule checking of realized instances, independent of how they were generated: every
//! verdict comes from the chunk annotations and surface spans stored in the instance.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::rules::Spans;
use super::BlmTemplate;
use crate::model::{BlmInstance, ChunkSpec, ErrorLabel, Sentence, CONTEXT_ROWS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleOutcome {
    pub rule: String,
    /// 1-based context rows breaking the rule.
    pub failing_rows: Vec<usize>,
}

impl RuleOutcome {
    pub fn passed(&self) -> bool {
        self.failing_rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnswerCheck {
    pub label: ErrorLabel,
    pub expected: BTreeSet<String>,
    pub detected: BTreeSet<String>,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleReport {
    pub instance: String,
    pub context: Vec<RuleOutcome>,
    pub answers: Vec<AnswerCheck>,
    /// Structural defects found before any rule was applied.
    pub problems: Vec<String>,
}

impl RuleReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
            && self.context.iter().all(RuleOutcome::passed)
            && self.answers.iter().all(|a| a.consistent)
    }

    /// Human-readable list of everything that failed.
    pub fn failures(&self) -> Vec<String> {
        let mut out = self.problems.clone();
        for r in self.context.iter().filter(|r| !r.passed()) {
            out.push(format!("context breaks '{}' at rows {:?}", r.rule, r.failing_rows));
        }
        for a in self.answers.iter().filter(|a| !a.consistent) {
            out.push(format!(
                "answer {} breaks {:?}, designed {:?}",
                a.label, a.detected, a.expected
            ));
        }
        out
    }
}

fn nominal_spans(s: &Sentence) -> Vec<String> {
    s.chunks
        .iter()
        .filter(|c| c.spec.slot != "verb" && !c.spec.slot.starts_with("fn:") && c.spec.role.is_nominal())
        .map(|c| c.span.to_lowercase())
        .collect()
}

/// Checks `instance` against the rules of `template`: every rule on every context row, and
/// for every answer the violated rules compared with the set its label is designed to break.
pub fn validate_instance(instance: &BlmInstance, template: &BlmTemplate) -> RuleReport {
    let mut problems = Vec::new();
    if instance.task != template.task {
        problems.push(format!(
            "instance task {} does not match template task {}",
            instance.task, template.task
        ));
    }
    if instance.context.len() != CONTEXT_ROWS {
        problems.push(format!(
            "{} context rows, expected {CONTEXT_ROWS}",
            instance.context.len()
        ));
    }
    let corrects = instance.answers.iter().filter(|a| a.label.is_correct()).count();
    if corrects != 1 {
        problems.push(format!("{corrects} answers labeled Correct"));
    }
    if instance
        .answers
        .get(instance.correct_index)
        .is_none_or(|a| !a.label.is_correct())
    {
        problems.push(format!(
            "correct index {} does not point at Correct",
            instance.correct_index
        ));
    }
    let mut texts = BTreeSet::new();
    for a in &instance.answers {
        if !texts.insert(a.sentence.text.as_str()) {
            problems.push(format!("duplicate answer text '{}'", a.sentence.text));
        }
    }

    let context: Vec<Vec<ChunkSpec>> = instance.context.iter().map(Sentence::specs).collect();
    let spans: Vec<Vec<String>> = instance.context.iter().map(nominal_spans).collect();
    let designed: BTreeMap<ErrorLabel, BTreeSet<String>> = template.violation_sets();

    let outcomes = template
        .rules
        .iter()
        .map(|rule| {
            let failing_rows = (0..context.len())
                .filter(|&r| {
                    let s = Spans {
                        row: &spans[r],
                        context: &spans,
                    };
                    rule.evaluate(r + 1, &context[r], &context, Some(&s)) == Some(false)
                })
                .map(|r| r + 1)
                .collect();
            RuleOutcome {
                rule: rule.id.clone(),
                failing_rows,
            }
        })
        .collect();

    let answers = instance
        .answers
        .iter()
        .map(|a| {
            let specs = a.sentence.specs();
            let row_spans = nominal_spans(&a.sentence);
            let s = Spans {
                row: &row_spans,
                context: &spans,
            };
            let detected: BTreeSet<String> = template
                .rules
                .iter()
                .filter(|rule| rule.evaluate(CONTEXT_ROWS + 1, &specs, &context, Some(&s)) == Some(false))
                .map(|rule| rule.id.clone())
                .collect();
            let expected = designed.get(&a.label).cloned().unwrap_or_default();
            AnswerCheck {
                label: a.label,
                consistent: detected == expected && (!a.label.is_correct() || corrects == 1),
                expected,
                detected,
            }
        })
        .collect();

    RuleReport {
        instance: instance.id.clone(),
        context: outcomes,
        answers,
        problems,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::builtin_lexicon;
    use crate::model::{TaskId, Variation};
    use crate::template::{builtin_template, instantiate};

    fn agr() -> (BlmTemplate, BlmInstance) {
        let t = builtin_template(TaskId::Agr, "en").unwrap();
        let lex = builtin_lexicon(TaskId::Agr, "en").unwrap();
        let inst = instantiate(&t, &lex, Variation::I, 7).unwrap();
        (t, inst)
    }

    #[test]
    fn correct_answer_has_no_violations() {
        let (t, inst) = agr();
        let report = validate_instance(&inst, &t);
        assert!(report.ok(), "{:?}", report.failures());
        let correct = report.answers.iter().find(|a| a.label.is_correct()).unwrap();
        assert!(correct.detected.is_empty());
    }

    #[test]
    fn verb_number_error_is_detected() {
        let (t, inst) = agr();
        let report = validate_instance(&inst, &t);
        let aev = report.answers.iter().find(|a| a.label.as_str() == "AEV").unwrap();
        assert!(aev.detected.contains("agreement"));
    }

    #[test]
    fn two_corrects_are_flagged() {
        let (t, mut inst) = agr();
        let other = (inst.correct_index + 1) % inst.answers.len();
        inst.answers[other].label = inst.answers[inst.correct_index].label;
        let report = validate_instance(&inst, &t);
        assert!(!report.ok());
        assert!(report.problems.iter().any(|p| p.contains("2 answers labeled Correct")));
    }

    #[test]
    fn tampered_context_fails() {
        let (t, mut inst) = agr();
        inst.context.swap(0, 1);
        let report = validate_instance(&inst, &t);
        assert!(!report.context.iter().all(RuleOutcome::passed));
    }

    #[test]
    fn wrong_template_is_reported() {
        let (_, inst) = agr();
        let cos = builtin_template(TaskId::Cos, "en").unwrap();
        assert!(!validate_instance(&inst, &cos).ok());
    }
}
