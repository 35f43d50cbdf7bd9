//! JSON-lines dataset files, train/dev/test splits and summary statistics.
//!
//! A dataset file starts with a header object and holds one record per line. Serialization
//! is stable: the same records always produce the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlmInstance, Sentence, TaskId, Variation};
use crate::seed;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    BlmDataset,
    SentenceBank,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Header {
    pub format_version: u32,
    pub kind: RecordKind,
    pub task: Option<TaskId>,
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variation: Option<Variation>,
    pub count: usize,
}

fn write_records<T: Serialize>(w: impl Write, header: &Header, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(w);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_records<T: DeserializeOwned>(r: impl BufRead, kind: RecordKind) -> Result<(Header, Vec<T>)> {
    let mut lines = r.lines();
    let first = lines.next().ok_or(Error::Dataset {
        line: 1,
        reason: "empty file, expected a header".into(),
    })??;
    let header: Header = serde_json::from_str(&first).map_err(|e| Error::Dataset {
        line: 1,
        reason: format!("bad header: {e}"),
    })?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Dataset {
            line: 1,
            reason: format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                header.format_version
            ),
        });
    }
    if header.kind != kind {
        return Err(Error::Dataset {
            line: 1,
            reason: format!("file holds {:?} records, expected {kind:?}", header.kind),
        });
    }
    let mut out = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: i + 2,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    if out.len() != header.count {
        return Err(Error::Dataset {
            line: out.len() + 2,
            reason: format!("header announces {} records, found {}", header.count, out.len()),
        });
    }
    Ok((header, out))
}

fn uniform<T: PartialEq + Clone>(mut values: impl Iterator<Item = T>) -> Option<T> {
    let first = values.next()?;
    values.all(|v| v == first).then_some(first)
}

pub fn dataset_header(instances: &[BlmInstance]) -> Header {
    Header {
        format_version: FORMAT_VERSION,
        kind: RecordKind::BlmDataset,
        task: uniform(instances.iter().map(|i| i.task)),
        language: uniform(instances.iter().map(|i| i.language.clone())),
        variation: uniform(instances.iter().map(|i| i.variation)),
        count: instances.len(),
    }
}

pub fn write_dataset_to(w: impl Write, instances: &[BlmInstance]) -> Result<()> {
    for inst in instances {
        inst.check()?;
    }
    write_records(w, &dataset_header(instances), instances)
}

pub fn write_dataset(path: impl AsRef<Path>, instances: &[BlmInstance]) -> Result<()> {
    write_dataset_to(std::fs::File::create(path)?, instances)
}

pub fn read_dataset_from(r: impl BufRead) -> Result<Vec<BlmInstance>> {
    read_records(r, RecordKind::BlmDataset).map(|(_, v)| v)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<BlmInstance>> {
    read_dataset_from(BufReader::new(std::fs::File::open(path)?))
}

pub fn write_bank_to(w: impl Write, sentences: &[Sentence], task: TaskId, language: &str) -> Result<()> {
    let header = Header {
        format_version: FORMAT_VERSION,
        kind: RecordKind::SentenceBank,
        task: Some(task),
        language: Some(language.to_string()),
        variation: None,
        count: sentences.len(),
    };
    write_records(w, &header, sentences)
}

pub fn write_bank(path: impl AsRef<Path>, sentences: &[Sentence], task: TaskId, language: &str) -> Result<()> {
    write_bank_to(std::fs::File::create(path)?, sentences, task, language)
}

pub fn read_bank_from(r: impl BufRead) -> Result<(Header, Vec<Sentence>)> {
    read_records(r, RecordKind::SentenceBank)
}

pub fn read_bank(path: impl AsRef<Path>) -> Result<(Header, Vec<Sentence>)> {
    read_bank_from(BufReader::new(std::fs::File::open(path)?))
}

/// One `{"id", "text"}` object per line: the input format of external embedding exporters.
pub fn write_sentence_texts(w: impl Write, sentences: &[&Sentence]) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        text: &'a str,
    }
    let mut w = BufWriter::new(w);
    for s in sentences {
        serde_json::to_writer(
            &mut w,
            &Line {
                id: &s.id,
                text: &s.text,
            },
        )?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sentence_texts(r: impl BufRead) -> Result<Vec<(String, String)>> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        text: String,
    }
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push((l.id, l.text));
    }
    Ok(out)
}

/// Every sentence of a dataset, context rows first, in file order.
pub fn all_sentences(instances: &[BlmInstance]) -> Vec<&Sentence> {
    instances
        .iter()
        .flat_map(|i| i.context.iter().chain(i.answers.iter().map(|a| &a.sentence)))
        .collect()
}

/// Hold out a test share first, then sample a training set from the rest and carve the
/// development set out of that sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub dev_fraction: f64,
    /// Size of the sample drawn from the non-test pool; the whole pool when absent.
    pub train_sample_size: Option<usize>,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.9,
            dev_fraction: 0.2,
            train_sample_size: Some(2000),
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn check(&self) -> Result<()> {
        for (name, f) in [
            ("train-fraction", self.train_fraction),
            ("dev-fraction", self.dev_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Split(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        Ok(())
    }
}

/// Member indices of each split, each list in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn select<T: Clone>(&self, items: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
        (pick(&self.train), pick(&self.dev), pick(&self.test))
    }
}

fn round(x: f64) -> usize {
    x.round() as usize
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.check()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(spec.seed, "split"));
    let n_test = round(n as f64 * (1.0 - spec.train_fraction));
    let pool = n - n_test;
    let sample = spec.train_sample_size.unwrap_or(pool);
    if sample > pool {
        return Err(Error::Split(format!(
            "the pool of {pool} non-test instances (of {n}) is smaller than the train sample size {sample}"
        )));
    }
    let n_dev = round(sample as f64 * spec.dev_fraction);
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitIndices {
        test: sorted(&order[..n_test]),
        dev: sorted(&order[n_test..n_test + n_dev]),
        train: sorted(&order[n_test + n_dev..n_test + sample]),
    })
}

pub fn split<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    Ok(split_indices(items.len(), spec)?.select(items))
}

/// Per-pattern proportional split of a sentence bank, `train:dev:test` as integer weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BankSplitSpec {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for BankSplitSpec {
    /// 2576:630:798 over 4004 sentences in 14 patterns, i.e. 184:45:57 per pattern.
    fn default() -> Self {
        BankSplitSpec {
            train: 184,
            dev: 45,
            test: 57,
            seed: 0,
        }
    }
}

pub fn bank_split_indices(sentences: &[Sentence], spec: &BankSplitSpec) -> Result<SplitIndices> {
    let total = spec.train + spec.dev + spec.test;
    if total == 0 || spec.train == 0 {
        return Err(Error::Split("bank split weights need a positive train share".into()));
    }
    let mut by_pattern: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in sentences.iter().enumerate() {
        by_pattern.entry(s.pattern.as_str()).or_default().push(i);
    }
    let mut out = SplitIndices {
        train: vec![],
        dev: vec![],
        test: vec![],
    };
    for (pattern, mut members) in by_pattern {
        members.shuffle(&mut seed::stream(spec.seed, &format!("bank-split:{pattern}")));
        let m = members.len();
        let n_train = m * spec.train / total;
        let n_dev = m * spec.dev / total;
        out.train.extend(&members[..n_train]);
        out.dev.extend(&members[n_train..n_train + n_dev]);
        out.test.extend(&members[n_train + n_dev..]);
    }
    for v in [&mut out.train, &mut out.dev, &mut out.test] {
        v.sort_unstable();
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GroupStats {
    pub instances: usize,
    pub context_patterns: BTreeMap<String, usize>,
    pub answer_patterns: BTreeMap<String, usize>,
    /// How many instances offer each answer label.
    pub labels: BTreeMap<String, usize>,
    pub correct_positions: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct StatsReport {
    pub total: usize,
    /// Keyed by `task/language/variation`.
    pub groups: BTreeMap<String, GroupStats>,
}

pub fn stats(instances: &[BlmInstance]) -> StatsReport {
    let mut report = StatsReport {
        total: instances.len(),
        groups: BTreeMap::new(),
    };
    for inst in instances {
        let key = format!("{}/{}/{}", inst.task, inst.language, inst.variation);
        let g = report.groups.entry(key).or_default();
        g.instances += 1;
        for s in &inst.context {
            *g.context_patterns.entry(s.pattern.0.clone()).or_default() += 1;
        }
        let mut seen = BTreeSet::new();
        for a in &inst.answers {
            *g.answer_patterns.entry(a.sentence.pattern.0.clone()).or_default() += 1;
            if seen.insert(a.label) {
                *g.labels.entry(a.label.as_str().to_string()).or_default() += 1;
            }
        }
        *g.correct_positions.entry(inst.correct_index).or_default() += 1;
    }
    report
}

impl StatsReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instances: {}", self.total);
        for (key, g) in &self.groups {
            let _ = writeln!(s, "\n{key}: {} instances", g.instances);
            let _ = writeln!(s, "  context patterns");
            for (p, c) in &g.context_patterns {
                let _ = writeln!(s, "    {c:>8}  {p}");
            }
            let _ = writeln!(s, "  answer labels");
            for (l, c) in &g.labels {
                let _ = writeln!(s, "    {c:>8}  {l}");
            }
            let positions: Vec<String> = g.correct_positions.iter().map(|(p, c)| format!("{p}:{c}")).collect();
            let _ = writeln!(s, "  correct positions  {}", positions.join(" "));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::builtin_lexicon;
    use crate::template::{build_sentence_bank, builtin_template, generate_dataset};

    fn agr(n: usize) -> Vec<BlmInstance> {
        let t = builtin_template(TaskId::Agr, "en").unwrap();
        let lex = builtin_lexicon(TaskId::Agr, "en").unwrap();
        generate_dataset(&t, &lex, n, Variation::I, 7).unwrap()
    }

    #[test]
    fn round_trip_is_lossless_and_stable() {
        let data = agr(20);
        let mut a = Vec::new();
        write_dataset_to(&mut a, &data).unwrap();
        let back = read_dataset_from(&a[..]).unwrap();
        assert_eq!(back, data);
        let mut b = Vec::new();
        write_dataset_to(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_dataset_round_trips() {
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"count\":0"), "{text}");
        assert!(read_dataset_from(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn truncated_record_names_its_line() {
        let data = agr(3);
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &data).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = text.trim_end().len() - 40;
        let err = read_dataset_from(&text.as_bytes()[..cut]).unwrap_err();
        assert!(matches!(err, Error::Dataset { line: 4, .. }), "{err}");
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &agr(1)).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replacen("\"format-version\":1", "\"format-version\":9", 1);
        let err = read_dataset_from(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("format version 9"), "{err}");
    }

    #[test]
    fn split_counts_for_a_large_set() {
        let spec = SplitSpec {
            seed: 3,
            ..SplitSpec::default()
        };
        let s = split_indices(4780, &spec).unwrap();
        assert_eq!((s.test.len(), s.train.len(), s.dev.len()), (478, 1600, 400));
        let all: BTreeSet<usize> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
        assert_eq!(all.len(), 478 + 2000);
        assert_eq!(s, split_indices(4780, &spec).unwrap());
        let err = split_indices(1000, &spec).unwrap_err().to_string();
        assert!(err.contains("900") && err.contains("2000"), "{err}");
    }

    #[test]
    fn bank_split_proportions() {
        let t = builtin_template(TaskId::Agr, "fr").unwrap();
        let lex = builtin_lexicon(TaskId::Agr, "fr").unwrap();
        let bank = build_sentence_bank(&t, &lex, 4004, 1).unwrap();
        let s = bank_split_indices(&bank, &BankSplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (2576, 630, 798));
    }

    #[test]
    fn stats_count_groups() {
        assert_eq!(stats(&[]), StatsReport::default());
        let r = stats(&agr(16));
        let g = &r.groups["agr/en/I"];
        assert_eq!(g.instances, 16);
        assert_eq!(g.labels["Correct"], 16);
        assert_eq!(g.context_patterns.values().sum::<usize>(), 16 * 7);
        assert!(r.to_table().contains("agr/en/I: 16 instances"));
    }
}
