use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChunkRole, ChunkSpec, CONTEXT_ROWS};

/// Picks one chunk of a row: `subject`, `verb`, `last`, `complement:<k>` (k-th chunk after
/// the verb, from 0) or `role:<role>` (first chunk with that role).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Subject,
    Verb,
    Last,
    Complement(usize),
    Role(ChunkRole),
}

impl Selector {
    pub fn resolve(&self, chunks: &[ChunkSpec]) -> Option<usize> {
        match self {
            Selector::Subject => (!chunks.is_empty()).then_some(0),
            Selector::Verb => chunks.iter().position(|c| c.role.is_verbal()),
            Selector::Last => chunks.len().checked_sub(1),
            Selector::Complement(k) => {
                let v = chunks.iter().position(|c| c.role.is_verbal())?;
                let i = v + 1 + k;
                (i < chunks.len()).then_some(i)
            }
            Selector::Role(r) => chunks.iter().position(|c| c.role == *r),
        }
    }
}

impl FromStr for Selector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subject" => Ok(Selector::Subject),
            "verb" => Ok(Selector::Verb),
            "last" => Ok(Selector::Last),
            _ => {
                if let Some(k) = s.strip_prefix("complement:") {
                    k.parse()
                        .map(Selector::Complement)
                        .map_err(|_| Error::Template(format!("bad selector '{s}'")))
                } else if let Some(r) = s.strip_prefix("role:") {
                    Ok(Selector::Role(r.parse()?))
                } else {
                    Err(Error::Template(format!("bad selector '{s}'")))
                }
            }
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Subject => f.write_str("subject"),
            Selector::Verb => f.write_str("verb"),
            Selector::Last => f.write_str("last"),
            Selector::Complement(k) => write!(f, "complement:{k}"),
            Selector::Role(r) => write!(f, "role:{r}"),
        }
    }
}

impl Serialize for Selector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `attribute=value` test on a chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matcher {
    pub attribute: String,
    pub value: String,
}

impl Matcher {
    pub fn matches(&self, c: &ChunkSpec) -> bool {
        c.attribute_value(&self.attribute) == self.value
    }
}

impl FromStr for Matcher {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Template(format!("matcher '{s}' is not attribute=value")))?;
        Ok(Matcher {
            attribute: a.trim().to_string(),
            value: v.trim().to_string(),
        })
    }
}

impl Serialize for Matcher {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{}={}", self.attribute, self.value))
    }
}

impl<'de> Deserialize<'de> for Matcher {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RuleKind {
    /// The selected chunk's attribute cycles through `values`, advancing every `period` rows.
    Alternation {
        target: Selector,
        attribute: String,
        values: Vec<String>,
        period: usize,
        #[serde(default)]
        phase: usize,
    },
    /// The number of chunks matching any of `count` follows `values`, advancing every
    /// `period` rows and staying at the last value afterwards.
    Progression {
        count: Vec<Matcher>,
        values: Vec<usize>,
        period: usize,
        #[serde(default)]
        phase: usize,
    },
    /// Two selected chunks share the attribute value.
    Agreement { targets: Vec<Selector>, attribute: String },
    /// No chunk carries the value.
    Forbid { attribute: String, value: String },
    /// The missing row repeats the attribute sequence of `row` with two values swapped.
    Mirror {
        row: usize,
        attribute: String,
        swap: Vec<String>,
    },
    /// Each row repeats the attribute sequence of the row `period` rows earlier.
    Repeat { period: usize, attribute: String },
    /// Rows of a block of `block` rows draw nominal material from their own block only.
    ParadigmLexicon { block: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    #[serde(flatten)]
    pub kind: RuleKind,
}

/// Lower-cased surface spans of the nominal, lexically filled chunks of each row.
pub(crate) struct Spans<'a> {
    pub row: &'a [String],
    pub context: &'a [Vec<String>],
}

fn cycle_index(row: usize, phase: usize, period: usize) -> usize {
    (row - 1 + phase) / period
}

impl Rule {
    pub(crate) fn check_definition(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::Template(format!("rule '{}': {why}", self.id)));
        match &self.kind {
            RuleKind::Alternation { values, period, .. } => {
                if values.is_empty() || *period == 0 {
                    return bad("needs values and a positive period");
                }
            }
            RuleKind::Progression {
                count, values, period, ..
            } => {
                if count.is_empty() || values.is_empty() || *period == 0 {
                    return bad("needs matchers, values and a positive period");
                }
            }
            RuleKind::Agreement { targets, .. } => {
                if targets.len() != 2 {
                    return bad("agreement relates exactly two chunks");
                }
            }
            RuleKind::Forbid { .. } => {}
            RuleKind::Mirror { row, swap, .. } => {
                if *row == 0 || *row > CONTEXT_ROWS || swap.len() != 2 {
                    return bad("mirror needs a context row and two values to swap");
                }
            }
            RuleKind::Repeat { period, .. } => {
                if *period == 0 || *period > CONTEXT_ROWS {
                    return bad("repeat period out of range");
                }
            }
            RuleKind::ParadigmLexicon { block } => {
                if *block == 0 {
                    return bad("block size must be positive");
                }
            }
        }
        Ok(())
    }

    pub(crate) fn attributes(&self) -> Vec<&str> {
        match &self.kind {
            RuleKind::Alternation { attribute, .. }
            | RuleKind::Agreement { attribute, .. }
            | RuleKind::Forbid { attribute, .. }
            | RuleKind::Mirror { attribute, .. }
            | RuleKind::Repeat { attribute, .. } => vec![attribute.as_str()],
            RuleKind::Progression { count, .. } => count.iter().map(|m| m.attribute.as_str()).collect(),
            RuleKind::ParadigmLexicon { .. } => vec![],
        }
    }

    /// Whether `chunks`, sitting at 1-based `row`, satisfies the rule given the context.
    /// Returns `None` for lexical rules when no spans are supplied.
    pub(crate) fn evaluate(
        &self,
        row: usize,
        chunks: &[ChunkSpec],
        context: &[Vec<ChunkSpec>],
        spans: Option<&Spans<'_>>,
    ) -> Option<bool> {
        let seq = |cs: &[ChunkSpec], attribute: &str| -> Vec<String> {
            cs.iter().map(|c| c.attribute_value(attribute)).collect()
        };
        let ok = match &self.kind {
            RuleKind::Alternation {
                target,
                attribute,
                values,
                period,
                phase,
            } => match target.resolve(chunks) {
                None => true,
                Some(i) => {
                    let expected = &values[cycle_index(row, *phase, *period) % values.len()];
                    chunks[i].attribute_value(attribute) == *expected
                }
            },
            RuleKind::Progression {
                count,
                values,
                period,
                phase,
            } => {
                let n = chunks.iter().filter(|c| count.iter().any(|m| m.matches(c))).count();
                let idx = cycle_index(row, *phase, *period).min(values.len() - 1);
                n == values[idx]
            }
            RuleKind::Agreement { targets, attribute } => {
                match (targets[0].resolve(chunks), targets[1].resolve(chunks)) {
                    (Some(a), Some(b)) => chunks[a].attribute_value(attribute) == chunks[b].attribute_value(attribute),
                    _ => true,
                }
            }
            RuleKind::Forbid { attribute, value } => !chunks.iter().any(|c| c.attribute_value(attribute) == *value),
            RuleKind::Mirror {
                row: source,
                attribute,
                swap,
            } => {
                if row != CONTEXT_ROWS + 1 {
                    true
                } else {
                    let expected: Vec<String> = seq(&context[source - 1], attribute)
                        .into_iter()
                        .map(|v| {
                            if v == swap[0] {
                                swap[1].clone()
                            } else if v == swap[1] {
                                swap[0].clone()
                            } else {
                                v
                            }
                        })
                        .collect();
                    seq(chunks, attribute) == expected
                }
            }
            RuleKind::Repeat { period, attribute } => {
                if row <= *period {
                    true
                } else {
                    seq(chunks, attribute) == seq(&context[row - 1 - period], attribute)
                }
            }
            RuleKind::ParadigmLexicon { block } => {
                let spans = spans?;
                let own = (row - 1) / block;
                spans.row.iter().all(|s| {
                    let mut in_own = false;
                    let mut in_other = false;
                    for (r, ctx) in spans.context.iter().enumerate() {
                        if r + 1 == row || !ctx.contains(s) {
                            continue;
                        }
                        if r / block == own {
                            in_own = true;
                        } else {
                            in_other = true;
                        }
                    }
                    in_own || !in_other
                })
            }
        };
        Some(ok)
    }
}
