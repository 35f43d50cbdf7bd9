//! Core vocabulary: tasks, chunk annotations, sentences and BLM instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of given context rows in every BLM instance.
pub const CONTEXT_ROWS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    #[serde(rename = "agr")]
    Agr,
    #[serde(rename = "spray-load-ALT-ATL")]
    SprayLoadAltAtl,
    #[serde(rename = "spray-load-ATL-ALT")]
    SprayLoadAtlAlt,
    #[serde(rename = "cos")]
    Cos,
    #[serde(rename = "od")]
    Od,
    #[serde(rename = "roll")]
    Roll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskFamily {
    Agr,
    SprayLoad,
    Causative,
    Roll,
}

impl TaskId {
    pub const ALL: [TaskId; 6] = [
        TaskId::Agr,
        TaskId::SprayLoadAltAtl,
        TaskId::SprayLoadAtlAlt,
        TaskId::Cos,
        TaskId::Od,
        TaskId::Roll,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Agr => "agr",
            TaskId::SprayLoadAltAtl => "spray-load-ALT-ATL",
            TaskId::SprayLoadAtlAlt => "spray-load-ATL-ALT",
            TaskId::Cos => "cos",
            TaskId::Od => "od",
            TaskId::Roll => "roll",
        }
    }

    pub fn family(self) -> TaskFamily {
        match self {
            TaskId::Agr => TaskFamily::Agr,
            TaskId::SprayLoadAltAtl | TaskId::SprayLoadAtlAlt => TaskFamily::SprayLoad,
            TaskId::Cos | TaskId::Od => TaskFamily::Causative,
            TaskId::Roll => TaskFamily::Roll,
        }
    }

    pub fn answer_count(self) -> usize {
        match self.family() {
            TaskFamily::Agr => 8,
            TaskFamily::SprayLoad => 9,
            TaskFamily::Causative => 8,
            TaskFamily::Roll => 7,
        }
    }

    pub fn languages(self) -> &'static [&'static str] {
        match self {
            TaskId::Agr => &["en", "fr", "it", "ro"],
            TaskId::SprayLoadAltAtl | TaskId::SprayLoadAtlAlt => &["en"],
            TaskId::Cos | TaskId::Od => &["en", "it"],
            TaskId::Roll => &["en"],
        }
    }

    pub fn supports(self, language: &str) -> bool {
        self.languages().contains(&language)
    }

    pub fn roles(self) -> &'static [ChunkRole] {
        use ChunkRole::*;
        match self.family() {
            TaskFamily::Agr => &[SubjectNp, Pp1, Pp2, Vp, CoordNp],
            TaskFamily::SprayLoad => &[
                NpAgent,
                NpTheme,
                NpLoc,
                PpAgent,
                PpTheme,
                PpLoc,
                VerbActive,
                VerbPassive,
            ],
            TaskFamily::Causative => &[NpAgent, NpTheme, PNp, ByNp, VerbActive, VerbPassive],
            TaskFamily::Roll => &[NpAgent, NpTheme, NpLoc, VerbActive, Auxiliary],
        }
    }

    /// Attributes that distinguish chunk patterns for this task.
    pub fn pattern_attributes(self) -> &'static [Attribute] {
        use Attribute::*;
        match self.family() {
            TaskFamily::Agr => &[Number],
            _ => &[SemanticRole, Voice, PrepClass, Attachment],
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown task '{s}'")))
    }
}

/// Lexical variation level of an instance: I shares lexical material across all rows,
/// II keeps the verb but varies arguments, III varies everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variation {
    I,
    II,
    III,
}

impl Variation {
    pub const ALL: [Variation; 3] = [Variation::I, Variation::II, Variation::III];

    pub fn as_str(self) -> &'static str {
        match self {
            Variation::I => "I",
            Variation::II => "II",
            Variation::III => "III",
        }
    }
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        let t = t.strip_prefix("TYPE").unwrap_or(&t).trim_start_matches(['-', '_', ' ']);
        match t {
            "I" | "1" => Ok(Variation::I),
            "II" | "2" => Ok(Variation::II),
            "III" | "3" => Ok(Variation::III),
            _ => Err(Error::Config(format!("unknown variation '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChunkRole {
    SubjectNp,
    Pp1,
    Pp2,
    Vp,
    CoordNp,
    NpAgent,
    NpTheme,
    NpLoc,
    PpAgent,
    PpTheme,
    PpLoc,
    #[serde(rename = "p-np")]
    PNp,
    ByNp,
    VerbActive,
    VerbPassive,
    Auxiliary,
}

impl ChunkRole {
    pub fn as_str(self) -> &'static str {
        use ChunkRole::*;
        match self {
            SubjectNp => "subject-np",
            Pp1 => "pp1",
            Pp2 => "pp2",
            Vp => "vp",
            CoordNp => "coord-np",
            NpAgent => "np-agent",
            NpTheme => "np-theme",
            NpLoc => "np-loc",
            PpAgent => "pp-agent",
            PpTheme => "pp-theme",
            PpLoc => "pp-loc",
            PNp => "p-np",
            ByNp => "by-np",
            VerbActive => "verb-active",
            VerbPassive => "verb-passive",
            Auxiliary => "auxiliary",
        }
    }

    /// Coarse syntactic category: `np`, `pp`, `verb` or `aux`.
    pub fn category(self) -> &'static str {
        use ChunkRole::*;
        match self {
            SubjectNp | CoordNp | NpAgent | NpTheme | NpLoc => "np",
            Pp1 | Pp2 | PpAgent | PpTheme | PpLoc | PNp | ByNp => "pp",
            Vp | VerbActive | VerbPassive => "verb",
            Auxiliary => "aux",
        }
    }

    pub fn is_verbal(self) -> bool {
        matches!(self.category(), "verb" | "aux")
    }

    pub fn is_nominal(self) -> bool {
        !self.is_verbal()
    }

    /// Features fixed by the role itself.
    pub fn implied_features(self) -> &'static [(Attribute, FeatureValue)] {
        use Attribute as A;
        use ChunkRole::*;
        use FeatureValue as V;
        match self {
            NpAgent => &[(A::SemanticRole, V::Agent)],
            NpTheme => &[(A::SemanticRole, V::Theme)],
            NpLoc => &[(A::SemanticRole, V::Loc)],
            PpAgent => &[(A::SemanticRole, V::Agent), (A::PrepClass, V::By)],
            PpTheme => &[(A::SemanticRole, V::Theme), (A::PrepClass, V::Lexical)],
            PpLoc => &[(A::SemanticRole, V::Loc), (A::PrepClass, V::Lexical)],
            PNp => &[(A::PrepClass, V::Lexical)],
            ByNp => &[(A::PrepClass, V::By)],
            VerbActive => &[(A::Voice, V::Active)],
            VerbPassive => &[(A::Voice, V::Passive)],
            _ => &[],
        }
    }

    pub fn allowed_attributes(self) -> &'static [Attribute] {
        use Attribute::*;
        use ChunkRole::*;
        match self {
            SubjectNp | Pp1 | Pp2 | Vp | CoordNp => &[Number],
            NpAgent | NpTheme | NpLoc => &[SemanticRole, Number],
            PpAgent | PpTheme | PpLoc => &[SemanticRole, PrepClass, Attachment, Number],
            PNp => &[PrepClass],
            ByNp => &[PrepClass, SemanticRole],
            VerbActive | VerbPassive => &[Voice, Number],
            Auxiliary => &[],
        }
    }

    fn default_prep_class(self) -> Option<FeatureValue> {
        self.implied_features()
            .iter()
            .find(|(a, _)| *a == Attribute::PrepClass)
            .map(|(_, v)| *v)
    }
}

impl fmt::Display for ChunkRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChunkRole {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Template(format!("unknown chunk role '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribute {
    Number,
    SemanticRole,
    Voice,
    PrepClass,
    Attachment,
}

impl Attribute {
    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Number => "number",
            Attribute::SemanticRole => "semantic-role",
            Attribute::Voice => "voice",
            Attribute::PrepClass => "prep-class",
            Attribute::Attachment => "attachment",
        }
    }

    pub fn allows(self, value: FeatureValue) -> bool {
        use FeatureValue::*;
        match self {
            Attribute::Number => matches!(value, Sg | Pl),
            Attribute::SemanticRole => matches!(value, Agent | Theme | Loc),
            Attribute::Voice => matches!(value, Active | Passive),
            Attribute::PrepClass => matches!(value, Lexical | By | Mismatched),
            Attribute::Attachment => matches!(value, Verb | Noun),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureValue {
    Sg,
    Pl,
    Agent,
    Theme,
    Loc,
    Active,
    Passive,
    Lexical,
    By,
    Mismatched,
    Verb,
    Noun,
}

impl FeatureValue {
    pub fn as_str(self) -> &'static str {
        use FeatureValue::*;
        match self {
            Sg => "sg",
            Pl => "pl",
            Agent => "agent",
            Theme => "theme",
            Loc => "loc",
            Active => "active",
            Passive => "passive",
            Lexical => "lexical",
            By => "by",
            Mismatched => "mismatched",
            Verb => "verb",
            Noun => "noun",
        }
    }
}

/// Annotation of one chunk: its role, attribute values, and where its words come from.
///
/// `slot` names an argument list of a lexicon entry, `verb` for the entry's own forms,
/// or `fn:<key>` for a function word. `prefix` names a function word (or a filler form)
/// placed before the chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub role: ChunkRole,
    pub slot: String,
    pub form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(flatten)]
    pub features: BTreeMap<Attribute, FeatureValue>,
}

impl ChunkSpec {
    pub fn feature(&self, attribute: Attribute) -> Option<FeatureValue> {
        self.features.get(&attribute).copied()
    }

    /// Fills in role-implied features and rejects attributes the role cannot carry.
    pub fn normalize(&mut self) -> Result<()> {
        for &(a, v) in self.role.implied_features() {
            match self.features.get(&a) {
                None => {
                    self.features.insert(a, v);
                }
                Some(&existing) if existing == v => {}
                Some(&existing) => {
                    // prep-class may be overridden to mark a wrong preposition
                    let overridable = a == Attribute::PrepClass && existing == FeatureValue::Mismatched;
                    if !overridable {
                        return Err(Error::Template(format!(
                            "{}: {} = {} contradicts the role",
                            self.role,
                            a.as_str(),
                            existing.as_str()
                        )));
                    }
                }
            }
        }
        for (&a, &v) in &self.features {
            if !self.role.allowed_attributes().contains(&a) {
                return Err(Error::Template(format!(
                    "role {} does not carry attribute {}",
                    self.role,
                    a.as_str()
                )));
            }
            if !a.allows(v) {
                return Err(Error::Template(format!(
                    "value {} is not valid for attribute {}",
                    v.as_str(),
                    a.as_str()
                )));
            }
        }
        Ok(())
    }

    /// String value of a rule attribute. Besides the annotated features this covers the
    /// derived `role` and `category`; absent features read as `none`.
    pub fn attribute_value(&self, name: &str) -> String {
        match name {
            "role" => self.role.as_str().to_string(),
            "category" => self.role.category().to_string(),
            _ => {
                let attr: Option<Attribute> = serde_json::from_value(serde_json::Value::String(name.to_string())).ok();
                attr.and_then(|a| self.feature(a))
                    .map(|v| v.as_str().to_string())
                    .unwrap_or_else(|| "none".to_string())
            }
        }
    }

    pub(crate) fn pattern_token(&self, task: TaskId) -> String {
        use ChunkRole::*;
        if task.family() == TaskFamily::Agr {
            let base = match self.role {
                SubjectNp => "np",
                Pp1 => "pp1",
                Pp2 => "pp2",
                Vp => "vp",
                CoordNp => "coord",
                other => other.as_str(),
            };
            return match self.feature(Attribute::Number) {
                Some(n) => format!("{base}-{}", n.as_str()),
                None => base.to_string(),
            };
        }
        let mut token = match self.role {
            NpAgent | NpTheme | NpLoc => "np".to_string(),
            PpAgent | PpTheme | PpLoc => "pp".to_string(),
            PNp => "p-np".to_string(),
            ByNp => "by-np".to_string(),
            VerbActive | VerbPassive => "v".to_string(),
            Auxiliary => "aux".to_string(),
            other => other.as_str().to_string(),
        };
        if let Some(r) = self.feature(Attribute::SemanticRole) {
            token.push('-');
            token.push_str(r.as_str());
        }
        match self.feature(Attribute::Voice) {
            Some(FeatureValue::Active) => token.push_str("-act"),
            Some(FeatureValue::Passive) => token.push_str("-pass"),
            _ => {}
        }
        if let Some(p) = self.feature(Attribute::PrepClass) {
            if Some(p) != self.role.default_prep_class() {
                token.push('-');
                token.push_str(p.as_str());
            }
        }
        if self.feature(Attribute::Attachment) == Some(FeatureValue::Noun) {
            token.push_str("-emb");
        }
        token
    }
}

/// Chunk pattern of a sentence: its sequence of role/attribute tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatternKey(pub String);

impl PatternKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PatternKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A realized chunk: annotation plus its surface span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub spec: ChunkSpec,
    pub span: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub chunks: Vec<Chunk>,
    pub pattern: PatternKey,
}

impl Sentence {
    /// Builds a sentence whose text is the concatenation of the chunk spans.
    pub fn from_chunks(id: impl Into<String>, chunks: Vec<Chunk>, task: TaskId) -> Result<Sentence> {
        let specs: Vec<ChunkSpec> = chunks.iter().map(|c| c.spec.clone()).collect();
        let pattern = crate::pattern::pattern_of(&specs, task)?;
        let text = chunks.iter().map(|c| c.span.as_str()).collect::<Vec<_>>().join(" ");
        Ok(Sentence {
            id: id.into(),
            text,
            chunks,
            pattern,
        })
    }

    pub fn specs(&self) -> Vec<ChunkSpec> {
        self.chunks.iter().map(|c| c.spec.clone()).collect()
    }

    pub fn check(&self) -> Result<()> {
        let joined = self
            .chunks
            .iter()
            .map(|c| c.span.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        if joined != self.text {
            return Err(Error::Template(format!(
                "sentence {}: text does not match its chunk spans",
                self.id
            )));
        }
        Ok(())
    }
}

macro_rules! label_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
            fn parse(s: &str) -> Option<$name> {
                match s { $($text => Some($name::$variant),)+ _ => None }
            }
        }
    };
}

label_enum!(AgrLabel {
    Correct => "Correct", Coord => "Coord", Wna => "WNA", Wn1 => "WN1", Wn2 => "WN2",
    Aev => "AEV", Aen1 => "AEN1", Aen2 => "AEN2",
});
label_enum!(SprayLoadLabel {
    Correct => "Correct", AgentAct => "AgentAct", AltNp => "Alt-NP", AltPp => "Alt-PP",
    NoEmb => "NoEmb", LexPrep => "LexPrep", Ssm1 => "SSM-1", Ssm2 => "SSM-2", Aassm => "AASSM",
});
label_enum!(CausativeLabel {
    Correct => "Correct", IInt => "I-Int", ErPass => "ER-Pass", IerPass => "IER-Pass",
    RTrans => "R-Trans", IrTrans => "IR-Trans", EWrBy => "E-WrBy", IeWrBy => "IE-WrBy",
});
label_enum!(RollLabel {
    Correct => "Correct", Scrc => "Scrc", ScRr => "Sc-rr", Rr => "Rr",
    PscRs => "Psc-rs", PscRr => "Psc-rr", PcRr => "Pc-rr",
});

/// Answer label, scoped to the task family it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorLabel {
    Agr(AgrLabel),
    SprayLoad(SprayLoadLabel),
    Causative(CausativeLabel),
    Roll(RollLabel),
}

impl ErrorLabel {
    pub fn parse(task: TaskId, s: &str) -> Result<ErrorLabel> {
        let label = match task.family() {
            TaskFamily::Agr => AgrLabel::parse(s).map(ErrorLabel::Agr),
            TaskFamily::SprayLoad => SprayLoadLabel::parse(s).map(ErrorLabel::SprayLoad),
            TaskFamily::Causative => CausativeLabel::parse(s).map(ErrorLabel::Causative),
            TaskFamily::Roll => RollLabel::parse(s).map(ErrorLabel::Roll),
        };
        label.ok_or_else(|| Error::Template(format!("label '{s}' is not defined for task {task}")))
    }

    pub fn correct(task: TaskId) -> ErrorLabel {
        ErrorLabel::all(task)[0]
    }

    /// All labels of the task, `Correct` first.
    pub fn all(task: TaskId) -> Vec<ErrorLabel> {
        match task.family() {
            TaskFamily::Agr => AgrLabel::ALL.iter().map(|&l| ErrorLabel::Agr(l)).collect(),
            TaskFamily::SprayLoad => SprayLoadLabel::ALL.iter().map(|&l| ErrorLabel::SprayLoad(l)).collect(),
            TaskFamily::Causative => CausativeLabel::ALL.iter().map(|&l| ErrorLabel::Causative(l)).collect(),
            TaskFamily::Roll => RollLabel::ALL.iter().map(|&l| ErrorLabel::Roll(l)).collect(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorLabel::Agr(l) => l.as_str(),
            ErrorLabel::SprayLoad(l) => l.as_str(),
            ErrorLabel::Causative(l) => l.as_str(),
            ErrorLabel::Roll(l) => l.as_str(),
        }
    }

    pub fn family(self) -> TaskFamily {
        match self {
            ErrorLabel::Agr(_) => TaskFamily::Agr,
            ErrorLabel::SprayLoad(_) => TaskFamily::SprayLoad,
            ErrorLabel::Causative(_) => TaskFamily::Causative,
            ErrorLabel::Roll(_) => TaskFamily::Roll,
        }
    }

    pub fn is_correct(self) -> bool {
        self.as_str() == "Correct"
    }
}

impl Serialize for ErrorLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl fmt::Display for ErrorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub sentence: Sentence,
    pub label: ErrorLabel,
}

/// One puzzle: seven context sentences and a shuffled answer set with one correct member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceWire", into = "InstanceWire")]
pub struct BlmInstance {
    pub id: String,
    pub task: TaskId,
    pub language: String,
    pub variation: Variation,
    pub seed_id: String,
    pub context: Vec<Sentence>,
    pub answers: Vec<Answer>,
    pub correct_index: usize,
}

impl BlmInstance {
    pub fn correct(&self) -> &Sentence {
        &self.answers[self.correct_index].sentence
    }

    pub fn labels(&self) -> Vec<ErrorLabel> {
        self.answers.iter().map(|a| a.label).collect()
    }

    /// Checks the structural invariants every instance must satisfy.
    pub fn check(&self) -> Result<()> {
        let fail = |reason: String| Error::Generation {
            instance: self.id.clone(),
            reason,
        };
        if self.context.len() != CONTEXT_ROWS {
            return Err(fail(format!("{} context rows", self.context.len())));
        }
        if self.answers.len() != self.task.answer_count() {
            return Err(fail(format!(
                "{} answers, task {} needs {}",
                self.answers.len(),
                self.task,
                self.task.answer_count()
            )));
        }
        let corrects: Vec<usize> = (0..self.answers.len())
            .filter(|&i| self.answers[i].label.is_correct())
            .collect();
        if corrects != [self.correct_index] {
            return Err(fail("correct answer index does not match labels".into()));
        }
        let mut texts = BTreeSet::new();
        for a in &self.answers {
            if a.label.family() != self.task.family() {
                return Err(fail(format!("label {} does not belong to {}", a.label, self.task)));
            }
            if !texts.insert(a.sentence.text.as_str()) {
                return Err(fail(format!("duplicate answer text '{}'", a.sentence.text)));
            }
        }
        for s in self.context.iter().chain(self.answers.iter().map(|a| &a.sentence)) {
            s.check()?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct AnswerWire {
    label: String,
    sentence: Sentence,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct InstanceWire {
    id: String,
    task: TaskId,
    language: String,
    variation: Variation,
    seed_id: String,
    context: Vec<Sentence>,
    answers: Vec<AnswerWire>,
    correct_index: usize,
}

impl TryFrom<InstanceWire> for BlmInstance {
    type Error = Error;
    fn try_from(w: InstanceWire) -> Result<Self> {
        let answers = w
            .answers
            .into_iter()
            .map(|a| {
                Ok(Answer {
                    label: ErrorLabel::parse(w.task, &a.label)?,
                    sentence: a.sentence,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let inst = BlmInstance {
            id: w.id,
            task: w.task,
            language: w.language,
            variation: w.variation,
            seed_id: w.seed_id,
            context: w.context,
            answers,
            correct_index: w.correct_index,
        };
        inst.check()?;
        Ok(inst)
    }
}

impl From<BlmInstance> for InstanceWire {
    fn from(i: BlmInstance) -> Self {
        InstanceWire {
            id: i.id,
            task: i.task,
            language: i.language,
            variation: i.variation,
            seed_id: i.seed_id,
            context: i.context,
            answers: i
                .answers
                .into_iter()
                .map(|a| AnswerWire {
                    label: a.label.as_str().to_string(),
                    sentence: a.sentence,
                })
                .collect(),
            correct_index: i.correct_index,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_task_scoped() {
        assert!(ErrorLabel::parse(TaskId::Agr, "WN1").is_ok());
        assert!(ErrorLabel::parse(TaskId::Cos, "WN1").is_err());
        assert_eq!(ErrorLabel::all(TaskId::Roll).len(), 7);
        assert_eq!(ErrorLabel::all(TaskId::SprayLoadAtlAlt).len(), 9);
        for t in TaskId::ALL {
            assert_eq!(ErrorLabel::all(t).len(), t.answer_count());
            assert!(ErrorLabel::correct(t).is_correct());
        }
    }

    #[test]
    fn variation_parsing() {
        assert_eq!("type-ii".parse::<Variation>().unwrap(), Variation::II);
        assert_eq!("3".parse::<Variation>().unwrap(), Variation::III);
        assert!("IV".parse::<Variation>().is_err());
    }

    #[test]
    fn normalize_fills_implied_features() {
        let mut c = ChunkSpec {
            role: ChunkRole::PpLoc,
            slot: "locs".into(),
            form: "np".into(),
            prefix: Some("loc-prep".into()),
            features: BTreeMap::new(),
        };
        c.normalize().unwrap();
        assert_eq!(c.feature(Attribute::SemanticRole), Some(FeatureValue::Loc));
        assert_eq!(c.feature(Attribute::PrepClass), Some(FeatureValue::Lexical));

        let mut bad = c.clone();
        bad.features.insert(Attribute::SemanticRole, FeatureValue::Agent);
        assert!(bad.normalize().is_err());

        let mut vp = ChunkSpec {
            role: ChunkRole::Vp,
            slot: "verb".into(),
            form: "pred".into(),
            prefix: None,
            features: BTreeMap::from([(Attribute::Voice, FeatureValue::Active)]),
        };
        assert!(vp.normalize().is_err());
    }
}
