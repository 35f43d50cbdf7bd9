//! BLM templates: context and answer row specifications plus the declarative rules that
//! relate them. Builtin templates are TOML fixtures of the same format users can load.

mod generate;
mod oracle;
mod rules;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Attribute, ChunkSpec, ErrorLabel, TaskFamily, TaskId, CONTEXT_ROWS};

pub use generate::{
    agreement_structures, bank_structures, build_sentence_bank, generate, generate_dataset, generate_exhaustive,
    instantiate, type_i_combinations, GenerationMode,
};
pub use oracle::{validate_instance, AnswerCheck, RuleOutcome, RuleReport};
pub use rules::{Matcher, Rule, RuleKind, Selector};

/// How lexical variation is scoped: per row, or per paradigm (a block of rows).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariationScope {
    #[default]
    Row,
    Paradigm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowTemplate {
    pub chunks: Vec<ChunkSpec>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub paradigm: usize,
}

fn is_zero(x: &usize) -> bool {
    *x == 0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerTemplate {
    pub label: ErrorLabel,
    /// Ids of the rules this answer is designed to break.
    pub violates: BTreeSet<String>,
    pub row: RowTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlmTemplate {
    pub task: TaskId,
    pub language: String,
    pub languages: Vec<String>,
    pub max_chunks: usize,
    pub scope: VariationScope,
    pub rules: Vec<Rule>,
    pub context: Vec<RowTemplate>,
    pub answers: Vec<AnswerTemplate>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct TemplateFile {
    task: TaskId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language: Option<String>,
    languages: Vec<String>,
    max_chunks: usize,
    #[serde(default)]
    scope: VariationScope,
    rules: Vec<Rule>,
    context: Vec<RowTemplate>,
    answers: Vec<AnswerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerFile {
    label: String,
    violates: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    paradigm: usize,
    chunks: Vec<ChunkSpec>,
}

const BUILTIN: [(TaskId, &str); 6] = [
    (TaskId::Agr, include_str!("../../data/templates/agr.toml")),
    (
        TaskId::SprayLoadAltAtl,
        include_str!("../../data/templates/spray-load-alt-atl.toml"),
    ),
    (
        TaskId::SprayLoadAtlAlt,
        include_str!("../../data/templates/spray-load-atl-alt.toml"),
    ),
    (TaskId::Cos, include_str!("../../data/templates/cos.toml")),
    (TaskId::Od, include_str!("../../data/templates/od.toml")),
    (TaskId::Roll, include_str!("../../data/templates/roll.toml")),
];

/// The shipped template for a task, bound to `language`.
pub fn builtin_template(task: TaskId, language: &str) -> Result<BlmTemplate> {
    if !task.supports(language) {
        return Err(unsupported(task, language));
    }
    let src = BUILTIN
        .iter()
        .find(|(t, _)| *t == task)
        .map(|(_, s)| *s)
        .expect("every task has a builtin template");
    let mut t = BlmTemplate::from_toml_str(src)?;
    t.language = language.to_string();
    Ok(t)
}

pub(crate) fn unsupported(task: TaskId, language: &str) -> Error {
    let pairs: Vec<String> = TaskId::ALL
        .iter()
        .map(|t| format!("{}: {}", t, t.languages().join("/")))
        .collect();
    Error::Unsupported {
        task: task.to_string(),
        language: format!("{language} (supported: {})", pairs.join("; ")),
    }
}

impl BlmTemplate {
    pub fn from_toml_str(src: &str) -> Result<BlmTemplate> {
        let file: TemplateFile = toml::from_str(src).map_err(|e| Error::Template(e.to_string()))?;
        let language = file
            .language
            .clone()
            .or_else(|| file.languages.first().cloned())
            .unwrap_or_default();
        let answers = file
            .answers
            .into_iter()
            .map(|a| {
                Ok(AnswerTemplate {
                    label: ErrorLabel::parse(file.task, &a.label)?,
                    violates: a.violates,
                    row: RowTemplate {
                        chunks: a.chunks,
                        paradigm: a.paradigm,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut t = BlmTemplate {
            task: file.task,
            language,
            languages: file.languages,
            max_chunks: file.max_chunks,
            scope: file.scope,
            rules: file.rules,
            context: file.context,
            answers,
        };
        t.normalize_and_check()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BlmTemplate> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path)?;
        BlmTemplate::from_toml_str(&src).map_err(|e| Error::Template(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        let file = TemplateFile {
            task: self.task,
            language: Some(self.language.clone()),
            languages: self.languages.clone(),
            max_chunks: self.max_chunks,
            scope: self.scope,
            rules: self.rules.clone(),
            context: self.context.clone(),
            answers: self
                .answers
                .iter()
                .map(|a| AnswerFile {
                    label: a.label.as_str().to_string(),
                    violates: a.violates.clone(),
                    paradigm: a.row.paradigm,
                    chunks: a.row.chunks.clone(),
                })
                .collect(),
        };
        toml::to_string(&file).map_err(|e| Error::Template(e.to_string()))
    }

    pub fn correct_answer(&self) -> &AnswerTemplate {
        self.answers
            .iter()
            .find(|a| a.label.is_correct())
            .expect("checked at load")
    }

    pub fn answer(&self, label: ErrorLabel) -> Option<&AnswerTemplate> {
        self.answers.iter().find(|a| a.label == label)
    }

    /// Designed violation set per label.
    pub fn violation_sets(&self) -> BTreeMap<ErrorLabel, BTreeSet<String>> {
        self.answers.iter().map(|a| (a.label, a.violates.clone())).collect()
    }

    pub fn paradigm_count(&self) -> usize {
        self.context
            .iter()
            .map(|r| r.paradigm)
            .chain(self.answers.iter().map(|a| a.row.paradigm))
            .max()
            .unwrap_or(0)
            + 1
    }

    /// Lexical slots referenced by any row (function-word slots excluded).
    pub fn slots(&self) -> BTreeSet<String> {
        self.rows()
            .flat_map(|r| r.chunks.iter())
            .filter(|c| c.slot != "verb" && !c.slot.starts_with("fn:"))
            .map(|c| c.slot.clone())
            .collect()
    }

    pub(crate) fn rows(&self) -> impl Iterator<Item = &RowTemplate> {
        self.context.iter().chain(self.answers.iter().map(|a| &a.row))
    }

    fn normalize_and_check(&mut self) -> Result<()> {
        let task = self.task;
        if self.context.len() != CONTEXT_ROWS {
            return Err(Error::Template(format!(
                "{} context rows, expected {CONTEXT_ROWS}",
                self.context.len()
            )));
        }
        let expected: BTreeSet<ErrorLabel> = ErrorLabel::all(task).into_iter().collect();
        let got: Vec<ErrorLabel> = self.answers.iter().map(|a| a.label).collect();
        let got_set: BTreeSet<ErrorLabel> = got.iter().copied().collect();
        if got.len() != task.answer_count() || got_set != expected {
            return Err(Error::Template(format!(
                "answer labels [{}] do not match the {} label set of task {task}",
                got.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", "),
                task.answer_count()
            )));
        }
        let rule_ids: BTreeSet<&str> = self.rules.iter().map(|r| r.id.as_str()).collect();
        if rule_ids.len() != self.rules.len() {
            return Err(Error::Template("duplicate rule id".into()));
        }
        for a in &self.answers {
            if a.label.is_correct() && !a.violates.is_empty() {
                return Err(Error::Template("the Correct answer cannot violate rules".into()));
            }
            if let Some(bad) = a.violates.iter().find(|v| !rule_ids.contains(v.as_str())) {
                return Err(Error::Template(format!(
                    "answer {} names unknown rule '{bad}'",
                    a.label
                )));
            }
        }
        let max_chunks = self.max_chunks;
        let rows = self
            .context
            .iter_mut()
            .chain(self.answers.iter_mut().map(|a| &mut a.row));
        for row in rows {
            if row.chunks.is_empty() || row.chunks.len() > max_chunks {
                return Err(Error::Template(format!(
                    "row with {} chunks (max {max_chunks})",
                    row.chunks.len()
                )));
            }
            for c in &mut row.chunks {
                c.normalize()?;
                if !task.roles().contains(&c.role) {
                    return Err(Error::UnknownRole {
                        role: c.role.as_str().into(),
                        task: task.as_str().into(),
                    });
                }
                if task.family() == TaskFamily::Agr && c.feature(Attribute::Number).is_none() {
                    return Err(Error::Template(format!("agreement chunk {} lacks a number", c.role)));
                }
            }
        }
        for rule in &self.rules {
            rule.check_definition()?;
            for attr in rule.attributes() {
                let present = matches!(attr, "role" | "category")
                    || self
                        .rows()
                        .flat_map(|r| r.chunks.iter())
                        .any(|c| c.attribute_value(attr) != "none");
                if !present {
                    return Err(Error::Template(format!(
                        "rule '{}' refers to attribute '{attr}' that no chunk carries",
                        rule.id
                    )));
                }
            }
        }
        // The structural rules must hold on the context and produce exactly the designed
        // violations on the answers.
        let context: Vec<Vec<ChunkSpec>> = self.context.iter().map(|r| r.chunks.clone()).collect();
        for (r, row) in context.iter().enumerate() {
            for rule in &self.rules {
                if rule.evaluate(r + 1, row, &context, None) == Some(false) {
                    return Err(Error::Template(format!(
                        "context row {} breaks rule '{}'",
                        r + 1,
                        rule.id
                    )));
                }
            }
        }
        for a in &self.answers {
            let mut detected = BTreeSet::new();
            let mut lexical = BTreeSet::new();
            for rule in &self.rules {
                match rule.evaluate(CONTEXT_ROWS + 1, &a.row.chunks, &context, None) {
                    Some(false) => {
                        detected.insert(rule.id.clone());
                    }
                    None => {
                        lexical.insert(rule.id.clone());
                    }
                    Some(true) => {}
                }
            }
            let designed: BTreeSet<String> = a.violates.difference(&lexical).cloned().collect();
            if detected != designed {
                return Err(Error::Template(format!(
                    "answer {} breaks [{}] but is declared to break [{}]",
                    a.label,
                    detected.into_iter().collect::<Vec<_>>().join(", "),
                    designed.into_iter().collect::<Vec<_>>().join(", ")
                )));
            }
        }
        Ok(())
    }
}
