//! Seed lexicons and their masked-slot augmentation.
//!
//! A lexicon lists verb entries. Each entry stores its inflected forms explicitly and the
//! fillers of each argument slot, so realization never needs morphology code.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureValue, TaskFamily, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Number {
    Sg,
    Pl,
}

impl Number {
    pub fn as_str(self) -> &'static str {
        match self {
            Number::Sg => "sg",
            Number::Pl => "pl",
        }
    }

    pub fn from_feature(v: FeatureValue) -> Option<Number> {
        match v {
            FeatureValue::Sg => Some(Number::Sg),
            FeatureValue::Pl => Some(Number::Pl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    M,
    F,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::M => "m",
            Gender::F => "f",
        }
    }
}

/// One argument filler. `text` is its plain noun-phrase form; `forms` holds any other
/// realization (plural, bare, contracted with a preposition) keyed like `np.pl` or `by`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filler {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub forms: BTreeMap<String, String>,
}

impl Filler {
    pub fn new(text: impl Into<String>) -> Filler {
        Filler {
            text: text.into(),
            lemma: None,
            number: None,
            gender: None,
            forms: BTreeMap::new(),
        }
    }

    pub fn lemma(&self) -> String {
        match &self.lemma {
            Some(l) => l.clone(),
            None => self.text.split_whitespace().last().unwrap_or("").to_lowercase(),
        }
    }

    pub fn number(&self) -> Number {
        self.number.unwrap_or(Number::Sg)
    }

    /// Looks up `key` refined by number (`key.pl`) with `np` standing for `text`.
    pub fn form(&self, key: &str, number: Option<Number>) -> Option<&str> {
        lookup(&self.forms, key, number, None)
            .or_else(|| (key == "np" && number.is_none_or(|n| n == self.number())).then_some(self.text.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerbEntry {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    pub forms: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub function: BTreeMap<String, String>,
    pub slots: BTreeMap<String, Vec<Filler>>,
}

impl VerbEntry {
    pub fn lemma(&self) -> &str {
        self.lemma.as_deref().unwrap_or(&self.key)
    }

    /// Inflected form for `key`, refined by subject number and gender. Intransitive forms
    /// fall back to active ones for languages that do not distinguish them.
    pub fn form(&self, key: &str, number: Number, gender: Option<Gender>) -> Option<&str> {
        lookup(&self.forms, key, Some(number), gender).or_else(|| match key {
            "intr" => lookup(&self.forms, "act", Some(number), gender),
            _ => None,
        })
    }
}

fn lookup<'a>(
    map: &'a BTreeMap<String, String>,
    key: &str,
    number: Option<Number>,
    gender: Option<Gender>,
) -> Option<&'a str> {
    let mut keys = Vec::with_capacity(3);
    if let Some(n) = number {
        if let Some(g) = gender {
            keys.push(format!("{key}.{}.{}", n.as_str(), g.as_str()));
        }
        keys.push(format!("{key}.{}", n.as_str()));
    }
    keys.push(key.to_string());
    keys.iter().find_map(|k| map.get(k).map(String::as_str))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicon {
    pub language: String,
    #[serde(default)]
    pub function: BTreeMap<String, String>,
    pub entries: Vec<VerbEntry>,
}

const BUILTIN: [(&str, &str); 10] = [
    ("agr.en", include_str!("../data/lexicons/agr.en.toml")),
    ("agr.fr", include_str!("../data/lexicons/agr.fr.toml")),
    ("agr.it", include_str!("../data/lexicons/agr.it.toml")),
    ("agr.ro", include_str!("../data/lexicons/agr.ro.toml")),
    ("spray-load.en", include_str!("../data/lexicons/spray-load.en.toml")),
    ("cos.en", include_str!("../data/lexicons/cos.en.toml")),
    ("cos.it", include_str!("../data/lexicons/cos.it.toml")),
    ("od.en", include_str!("../data/lexicons/od.en.toml")),
    ("od.it", include_str!("../data/lexicons/od.it.toml")),
    ("roll.en", include_str!("../data/lexicons/roll.en.toml")),
];

/// The shipped seed lexicon for a task and language.
pub fn builtin_lexicon(task: TaskId, language: &str) -> Result<Lexicon> {
    if !task.supports(language) {
        return Err(crate::template::unsupported(task, language));
    }
    let stem = match task.family() {
        TaskFamily::Agr => "agr",
        TaskFamily::SprayLoad => "spray-load",
        TaskFamily::Causative if task == TaskId::Cos => "cos",
        TaskFamily::Causative => "od",
        TaskFamily::Roll => "roll",
    };
    let name = format!("{stem}.{language}");
    let src = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| crate::template::unsupported(task, language))?;
    Lexicon::from_toml_str(src)
}

impl Lexicon {
    pub fn from_toml_str(src: &str) -> Result<Lexicon> {
        let lex: Lexicon = toml::from_str(src).map_err(|e| Error::Lexicon(e.to_string()))?;
        lex.check()?;
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path)?;
        Lexicon::from_toml_str(&src).map_err(|e| Error::Lexicon(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Lexicon(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Lexicon("no entries".into()));
        }
        let mut keys = BTreeSet::new();
        for e in &self.entries {
            if !keys.insert(e.key.as_str()) {
                return Err(Error::Lexicon(format!("duplicate verb key '{}'", e.key)));
            }
            if e.forms.is_empty() {
                return Err(Error::Lexicon(format!("entry '{}': no verb forms", e.key)));
            }
            if let Some((k, _)) = e.forms.iter().find(|(_, v)| v.trim().is_empty()) {
                return Err(Error::Lexicon(format!("entry '{}': form '{k}' is empty", e.key)));
            }
            for (slot, fillers) in &e.slots {
                if fillers.is_empty() {
                    return Err(Error::Lexicon(format!("entry '{}': {slot} empty", e.key)));
                }
                if let Some(f) = fillers.iter().find(|f| f.text.trim().is_empty()) {
                    return Err(Error::Lexicon(format!(
                        "entry '{}': {slot} has an empty filler ({f:?})",
                        e.key
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fails naming the first slot some entry lacks.
    pub fn require_slots<'a>(&self, slots: impl IntoIterator<Item = &'a String>) -> Result<()> {
        let slots: Vec<&String> = slots.into_iter().collect();
        for e in &self.entries {
            for s in &slots {
                if !e.slots.contains_key(s.as_str()) {
                    return Err(Error::Lexicon(format!("entry '{}': slot {s} missing", e.key)));
                }
            }
        }
        Ok(())
    }

    /// Function word `key`, preferring the entry's own table, refined by number.
    pub fn function_word<'a>(&'a self, entry: &'a VerbEntry, key: &str, number: Number) -> Option<&'a str> {
        lookup(&entry.function, key, Some(number), None).or_else(|| lookup(&self.function, key, Some(number), None))
    }

    pub fn filler_count(&self) -> usize {
        self.entries.iter().flat_map(|e| e.slots.values()).map(Vec::len).sum()
    }
}

/// Source of replacement candidates for a masked position, ranked best first.
pub trait AlternativeProvider {
    fn candidates(&self, masked: &str, k: usize) -> std::result::Result<Vec<String>, String>;
}

/// Mask token used in provider queries.
pub const MASK: &str = "[MASK]";

/// Deterministic provider backed by a table from a masked lemma (or a full masked query)
/// to ranked candidates.
#[derive(Debug, Clone, Default)]
pub struct TableProvider {
    table: BTreeMap<String, Vec<String>>,
}

impl TableProvider {
    pub fn new(table: BTreeMap<String, Vec<String>>) -> TableProvider {
        TableProvider { table }
    }

    pub fn insert(&mut self, key: impl Into<String>, candidates: Vec<String>) {
        self.table.insert(key.into(), candidates);
    }
}

impl AlternativeProvider for TableProvider {
    fn candidates(&self, masked: &str, k: usize) -> std::result::Result<Vec<String>, String> {
        // Queries carry the masked lemma after a tab; fall back to it when the full query
        // is not tabulated.
        let (query, lemma) = masked.split_once('\t').unwrap_or((masked, masked));
        let list = self.table.get(query).or_else(|| self.table.get(lemma));
        let mut seen = BTreeSet::new();
        Ok(list
            .map(|l| l.iter().filter(|c| seen.insert(c.as_str())).take(k).cloned().collect())
            .unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditLine {
    /// `entry/slot/context`, where context is `indef`, `def` or `error`.
    pub slot_id: String,
    pub candidate: String,
    pub accepted: bool,
}

/// Masked query for `slot` of `entry` in the given article context. The original filler
/// lemma follows a tab so table providers can key on it.
///
/// Slots are laid out subject first, then modifiers of the subject, the verb, and the
/// remaining complements. The masked slot keeps the words around its lemma, so a
/// prepositional filler stays prepositional.
fn masked_query(entry: &VerbEntry, slot: &str, definite: bool) -> String {
    let article = if definite { "the" } else { "a" };
    let verb = ["act.sg", "act", "pred.sg"]
        .iter()
        .find_map(|k| entry.forms.get(*k))
        .or_else(|| {
            entry
                .forms
                .iter()
                .find(|(k, _)| k.split('.').any(|p| p == "sg"))
                .map(|(_, v)| v)
        })
        .or_else(|| entry.forms.values().next())
        .map(String::as_str)
        .unwrap_or(&entry.key);
    let mut slots: Vec<&String> = entry.slots.keys().collect();
    slots.sort_by_key(|name| (slot_rank(name), name.as_str()));
    let mut parts = Vec::new();
    let mut verb_placed = false;
    for name in slots {
        if !verb_placed && slot_rank(name) > 2 && !parts.is_empty() {
            parts.push(verb.to_string());
            verb_placed = true;
        }
        let base = &entry.slots[name][0];
        parts.push(if name == slot {
            mask_filler(base, article)
        } else {
            base.text.clone()
        });
    }
    if !verb_placed {
        parts.push(verb.to_string());
    }
    format!("{}\t{}", parts.join(" "), entry.slots[slot][0].lemma())
}

fn slot_rank(name: &str) -> u8 {
    match name {
        "subjects" | "agents" => 0,
        "attractors1" => 1,
        "attractors2" => 2,
        "themes" => 3,
        "locs" => 4,
        _ => 5,
    }
}

/// The filler text with its lemma masked and an English article in front of it replaced.
fn mask_filler(base: &Filler, article: &str) -> String {
    let lemma = base.lemma();
    let mut words: Vec<&str> = base.text.split(' ').collect();
    let Some(i) = words.iter().position(|w| *w == lemma) else {
        return format!("{article} {MASK}");
    };
    words[i] = MASK;
    if i > 0 && matches!(words[i - 1].to_lowercase().as_str(), "the" | "a" | "an") {
        words[i - 1] = article;
    }
    words.join(" ")
}

/// New filler built by substituting the candidate for the base filler's lemma in every form.
fn derive_filler(base: &Filler, candidate: &str) -> Filler {
    let lemma = base.lemma();
    let swap = |s: &str| -> Option<String> { s.contains(&lemma).then(|| s.replacen(&lemma, candidate, 1)) };
    let text = swap(&base.text).unwrap_or_else(|| candidate.to_string());
    Filler {
        text,
        lemma: Some(candidate.to_string()),
        number: base.number,
        gender: None,
        forms: base
            .forms
            .iter()
            .filter_map(|(k, v)| swap(v).map(|v| (k.clone(), v)))
            .collect(),
    }
}

/// Extends each slot with up to `k` provider candidates pooled over an indefinite and a
/// definite masking context. Originals stay first; candidates equal to an existing lemma
/// are skipped. Every added candidate is listed in the audit, marked accepted.
pub fn augment(lexicon: &Lexicon, provider: &dyn AlternativeProvider, k: usize) -> Result<(Lexicon, Vec<AuditLine>)> {
    if k == 0 {
        return Err(Error::Config("rank cutoff k must be at least 1".into()));
    }
    let mut out = lexicon.clone();
    let mut audit = Vec::new();
    for entry in out.entries.iter_mut() {
        let slot_names: Vec<String> = entry.slots.keys().cloned().collect();
        for slot in slot_names {
            let mut known: BTreeSet<String> = entry.slots[&slot].iter().map(Filler::lemma).collect();
            let mut added = Vec::new();
            for (ctx, definite) in [("indef", false), ("def", true)] {
                let query = masked_query(entry, &slot, definite);
                match provider.candidates(&query, k) {
                    Ok(cands) => {
                        for c in cands {
                            if added.len() < k && known.insert(c.clone()) {
                                added.push((ctx, c));
                            }
                        }
                    }
                    Err(reason) => audit.push(AuditLine {
                        slot_id: format!("{}/{slot}/error", entry.key),
                        candidate: reason.replace(['\t', '\n'], " "),
                        accepted: false,
                    }),
                }
            }
            let base = entry.slots[&slot][0].clone();
            for (ctx, c) in added {
                entry.slots.get_mut(&slot).unwrap().push(derive_filler(&base, &c));
                audit.push(AuditLine {
                    slot_id: format!("{}/{slot}/{ctx}", entry.key),
                    candidate: c,
                    accepted: true,
                });
            }
        }
    }
    Ok((out, audit))
}

/// Adds the accepted audit candidates to `lexicon`.
pub fn apply_audit(lexicon: &Lexicon, audit: &[AuditLine]) -> Result<Lexicon> {
    let mut out = lexicon.clone();
    for line in audit.iter().filter(|l| l.accepted) {
        let mut parts = line.slot_id.splitn(3, '/');
        let (key, slot) = match (parts.next(), parts.next()) {
            (Some(k), Some(s)) => (k, s),
            _ => return Err(Error::Lexicon(format!("bad slot id '{}'", line.slot_id))),
        };
        let entry = out
            .entries
            .iter_mut()
            .find(|e| e.key == key)
            .ok_or_else(|| Error::Lexicon(format!("audit names unknown entry '{key}'")))?;
        let fillers = entry
            .slots
            .get_mut(slot)
            .ok_or_else(|| Error::Lexicon(format!("entry '{key}': slot {slot} missing")))?;
        if fillers.iter().any(|f| f.lemma() == line.candidate) {
            continue;
        }
        let base = fillers[0].clone();
        fillers.push(derive_filler(&base, &line.candidate));
    }
    Ok(out)
}

pub fn write_audit(mut w: impl Write, lines: &[AuditLine]) -> Result<()> {
    for l in lines {
        writeln!(w, "{}\t{}\t{}", l.slot_id, l.candidate, u8::from(l.accepted))?;
    }
    Ok(())
}

pub fn read_audit(r: impl BufRead) -> Result<Vec<AuditLine>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let accepted = match fields.as_slice() {
            [_, _, "0"] => false,
            [_, _, "1"] => true,
            _ => {
                return Err(Error::Lexicon(format!(
                    "audit line {}: expected slot-id, candidate, 0|1",
                    i + 1
                )))
            }
        };
        out.push(AuditLine {
            slot_id: fields[0].to_string(),
            candidate: fields[1].to_string(),
            accepted,
        });
    }
    Ok(out)
}

/// One masking context for an external fill-mask model: `slot_id` uses the audit's
/// `entry/slot/context` form, `query` holds a single mask token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotQuery {
    pub slot_id: String,
    pub query: String,
    pub lemma: String,
}

/// The queries [`augment`] would send, one per slot and article context.
pub fn slot_queries(lexicon: &Lexicon) -> Vec<SlotQuery> {
    let mut out = Vec::new();
    for entry in &lexicon.entries {
        for slot in entry.slots.keys() {
            for (ctx, definite) in [("indef", false), ("def", true)] {
                let q = masked_query(entry, slot, definite);
                let (query, lemma) = q.split_once('\t').expect("query carries its lemma");
                out.push(SlotQuery {
                    slot_id: format!("{}/{slot}/{ctx}", entry.key),
                    query: query.to_string(),
                    lemma: lemma.to_string(),
                });
            }
        }
    }
    out
}

pub fn write_slot_queries(mut w: impl Write, queries: &[SlotQuery]) -> Result<()> {
    for q in queries {
        serde_json::to_writer(&mut w, q)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_slot_queries(r: impl BufRead) -> Result<Vec<SlotQuery>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Lexicon(format!("slot file line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spray() -> Lexicon {
        builtin_lexicon(TaskId::SprayLoadAltAtl, "en").unwrap()
    }

    #[test]
    fn shipped_spray_load_lexicon_shape() {
        let lex = spray();
        assert_eq!(lex.entries.len(), 30);
        for e in &lex.entries {
            for slot in ["agents", "themes", "locs"] {
                assert_eq!(e.slots[slot].len(), 5, "{} {slot}", e.key);
            }
        }
    }

    #[test]
    fn every_shipped_lexicon_loads() {
        for task in TaskId::ALL {
            for lang in task.languages() {
                let lex = builtin_lexicon(task, lang).unwrap();
                assert_eq!(&lex.language, lang);
            }
        }
    }

    #[test]
    fn empty_slot_is_named() {
        let src = "language = \"en\"\n[[entries]]\nkey = \"spray\"\nforms = { act = \"sprayed\" }\n[entries.slots]\nthemes = []\n";
        let err = Lexicon::from_toml_str(src).unwrap_err().to_string();
        assert!(err.contains("entry 'spray': themes empty"), "{err}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let one = "[[entries]]\nkey = \"a\"\nforms = { act = \"x\" }\n[entries.slots]\nthemes = [{ text = \"t\" }]\n";
        let src = format!("language = \"en\"\n{one}{one}");
        assert!(Lexicon::from_toml_str(&src)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
    }

    #[test]
    fn save_load_round_trip() {
        for task in [TaskId::Agr, TaskId::Cos, TaskId::Roll] {
            let lex = builtin_lexicon(task, "en").unwrap();
            let again = Lexicon::from_toml_str(&lex.to_toml_string().unwrap()).unwrap();
            assert_eq!(lex, again);
        }
    }

    #[test]
    fn form_lookup_refines_by_number_and_gender() {
        let lex = builtin_lexicon(TaskId::Cos, "it").unwrap();
        let e = &lex.entries[0];
        assert_eq!(e.form("pass", Number::Pl, Some(Gender::F)), Some("sono rotte"));
        assert_eq!(e.form("intr", Number::Sg, None), Some("si rompe"));
        let en = builtin_lexicon(TaskId::Cos, "en").unwrap();
        assert_eq!(en.entries[3].form("intr", Number::Sg, None), Some("breaks"));
        let agr = builtin_lexicon(TaskId::Agr, "en").unwrap();
        let f = &agr.entries[0].slots["subjects"][0];
        assert_eq!(f.form("np", Some(Number::Pl)), Some("the computers"));
        assert_eq!(f.form("np", Some(Number::Sg)), Some("the computer"));
    }

    #[test]
    fn empty_provider_is_identity() {
        let lex = spray();
        let (out, audit) = augment(&lex, &TableProvider::default(), 5).unwrap();
        assert_eq!(out, lex);
        assert!(audit.is_empty());
    }

    #[test]
    fn slot_queries_round_trip_and_carry_one_mask() {
        let lex = spray();
        let qs = slot_queries(&lex);
        let slots: usize = lex.entries.iter().map(|e| e.slots.len()).sum();
        assert_eq!(qs.len(), 2 * slots);
        assert!(qs.iter().all(|q| q.query.matches(MASK).count() == 1));
        let mut buf = Vec::new();
        write_slot_queries(&mut buf, &qs).unwrap();
        assert_eq!(read_slot_queries(&buf[..]).unwrap(), qs);
    }

    #[test]
    fn queries_read_in_sentence_order() {
        let agr = slot_queries(&builtin_lexicon(TaskId::Agr, "en").unwrap());
        let q = |id: &str| agr.iter().find(|q| q.slot_id == id).unwrap().query.clone();
        assert_eq!(
            q("break/subjects/indef"),
            "a [MASK] with the cable of the experiment is broken"
        );
        assert_eq!(
            q("break/attractors1/def"),
            "the computer with the [MASK] of the experiment is broken"
        );
        let spray = slot_queries(&spray());
        let first = &spray
            .iter()
            .find(|q| q.slot_id.ends_with("/themes/indef"))
            .unwrap()
            .query;
        assert!(first.contains(" a [MASK]"), "{first}");
        assert!(!first.starts_with("a [MASK]"), "{first}");
    }

    #[test]
    fn rank_cutoff_bounds_growth() {
        let lex = builtin_lexicon(TaskId::Agr, "en").unwrap();
        let mut provider = TableProvider::default();
        provider.insert(
            "computer",
            [
                "desktop", "laptop", "server", "tablet", "notebook", "terminal", "console", "monitor", "router",
            ]
            .map(String::from)
            .to_vec(),
        );
        for k in [1usize, 7] {
            let (out, audit) = augment(&lex, &provider, k).unwrap();
            for (e_in, e_out) in lex.entries.iter().zip(&out.entries) {
                for (slot, fillers) in &e_in.slots {
                    let grown = e_out.slots[slot].len() - fillers.len();
                    assert!(grown <= k);
                    assert_eq!(&e_out.slots[slot][..fillers.len()], &fillers[..]);
                }
            }
            let grown_slots = audit.len();
            assert!(grown_slots > 0);
        }
        let (out, _) = augment(&lex, &provider, 1).unwrap();
        let laptop = out.entries[0].slots["subjects"]
            .iter()
            .find(|f| f.lemma() == "desktop")
            .unwrap();
        assert_eq!(laptop.text, "the desktop");
        assert_eq!(laptop.form("np", Some(Number::Pl)), Some("the desktops"));
    }

    #[test]
    fn audit_round_trip_and_reingest() {
        let lex = builtin_lexicon(TaskId::Agr, "en").unwrap();
        let mut provider = TableProvider::default();
        provider.insert("computer", vec!["desktop".into(), "laptop".into()]);
        let (augmented, mut audit) = augment(&lex, &provider, 2).unwrap();
        let mut buf = Vec::new();
        write_audit(&mut buf, &audit).unwrap();
        assert_eq!(read_audit(&buf[..]).unwrap(), audit);
        assert_eq!(apply_audit(&lex, &audit).unwrap(), augmented);
        for l in audit.iter_mut() {
            l.accepted = false;
        }
        assert_eq!(apply_audit(&lex, &audit).unwrap(), lex);
        assert!(read_audit("a\tb\tyes\n".as_bytes()).is_err());
    }
}
