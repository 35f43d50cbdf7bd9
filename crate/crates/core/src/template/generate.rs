use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::{BlmTemplate, RowTemplate, VariationScope};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Number};
use crate::model::{
    Answer, Attribute, BlmInstance, Chunk, ChunkRole, ChunkSpec, FeatureValue, Sentence, TaskFamily, Variation,
};
use crate::seed::{self, Rng as SeedRng};

/// Regeneration attempts when answers collide.
const RETRIES: usize = 16;
/// Restarts of the greedy lemma-disjoint search.
const RESTARTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationMode {
    /// `n` instances cycling through the lexical seeds.
    Capped(usize),
    /// Every Type I seed combination exactly once.
    Exhaustive,
}

/// A verb entry plus one filler index per slot.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Assignment {
    entry: usize,
    fillers: BTreeMap<String, usize>,
}

impl Assignment {
    fn lemmas<'a>(&self, lex: &'a Lexicon, slots: &'a BTreeSet<String>) -> impl Iterator<Item = String> + 'a {
        let entry = &lex.entries[self.entry];
        let fillers = self.fillers.clone();
        slots
            .iter()
            .filter_map(move |s| fillers.get(s).map(|&i| entry.slots[s][i].lemma()))
    }

    /// Rows sharing no slot count as different.
    fn differs_on(&self, other: &Assignment, slots: &BTreeSet<String>) -> bool {
        slots.is_empty() || slots.iter().any(|s| self.fillers.get(s) != other.fillers.get(s))
    }
}

fn row_slots(row: &RowTemplate) -> BTreeSet<String> {
    row.chunks
        .iter()
        .filter(|c| c.slot != "verb" && !c.slot.starts_with("fn:"))
        .map(|c| c.slot.clone())
        .collect()
}

fn uses_verb(row: &RowTemplate) -> bool {
    row.chunks.iter().any(|c| c.slot == "verb")
}

/// Random fillers of `entry` for `slots`, pairwise lemma-distinct and avoiding `avoid`.
fn draw(
    lex: &Lexicon,
    entry: usize,
    slots: &BTreeSet<String>,
    avoid: &BTreeSet<String>,
    rng: &mut SeedRng,
) -> Option<Assignment> {
    let e = &lex.entries[entry];
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut fillers = BTreeMap::new();
    for s in slots {
        let free: Vec<usize> = (0..e.slots[s].len())
            .filter(|&i| {
                let l = e.slots[s][i].lemma();
                !avoid.contains(&l) && !taken.contains(&l)
            })
            .collect();
        let &i = free.get(rng.random_range(0..free.len().max(1)))?;
        taken.insert(e.slots[s][i].lemma());
        fillers.insert(s.clone(), i);
    }
    Some(Assignment { entry, fillers })
}

/// Lemma-distinct filler combinations of one entry, in lexicographic slot order.
fn combinations(lex: &Lexicon, entry: usize, slots: &BTreeSet<String>) -> Vec<BTreeMap<String, usize>> {
    let e = &lex.entries[entry];
    let mut out = vec![BTreeMap::new()];
    for s in slots {
        let mut next = Vec::with_capacity(out.len() * e.slots[s].len());
        for partial in &out {
            for i in 0..e.slots[s].len() {
                let lemma = e.slots[s][i].lemma();
                let clash = partial
                    .iter()
                    .any(|(ps, &pi): (&String, &usize)| e.slots[ps][pi].lemma() == lemma);
                if !clash {
                    let mut p = partial.clone();
                    p.insert(s.clone(), i);
                    next.push(p);
                }
            }
        }
        out = next;
    }
    out
}

/// Type I lexical seeds, spread uniformly over entries: instance `i` takes entry
/// `order[i % E]` and that entry's next unused combination in a seeded order.
struct Coverage {
    order: Vec<usize>,
    combos: Vec<Vec<BTreeMap<String, usize>>>,
    combo_order: Vec<Vec<usize>>,
}

impl Coverage {
    fn new(lex: &Lexicon, slots: &BTreeSet<String>, seed: u64) -> Result<Coverage> {
        let combos: Vec<_> = (0..lex.entries.len()).map(|e| combinations(lex, e, slots)).collect();
        let mut order: Vec<usize> = (0..lex.entries.len()).filter(|&e| !combos[e].is_empty()).collect();
        if order.is_empty() {
            return Err(Error::Lexicon(
                "no entry offers lemma-distinct fillers for every slot".into(),
            ));
        }
        order.shuffle(&mut seed::stream(seed, "coverage"));
        let combo_order = (0..lex.entries.len())
            .map(|e| {
                let mut o: Vec<usize> = (0..combos[e].len()).collect();
                o.shuffle(&mut seed::stream(seed, &format!("coverage:{}", lex.entries[e].key)));
                o
            })
            .collect();
        Ok(Coverage {
            order,
            combos,
            combo_order,
        })
    }

    fn entry(&self, i: usize) -> usize {
        self.order[i % self.order.len()]
    }

    fn pick(&self, i: usize) -> (Assignment, usize) {
        let e = self.entry(i);
        let k = (i / self.order.len()) % self.combos[e].len();
        let c = self.combo_order[e][k];
        (
            Assignment {
                entry: e,
                fillers: self.combos[e][c].clone(),
            },
            c,
        )
    }
}

/// Which assignment realizes each context row and each answer.
struct Plan {
    context: Vec<Assignment>,
    answers: Vec<Assignment>,
    seed_id: String,
}

struct Generator<'a> {
    template: &'a BlmTemplate,
    lexicon: &'a Lexicon,
    slots: BTreeSet<String>,
    coverage: Coverage,
}

impl<'a> Generator<'a> {
    fn new(template: &'a BlmTemplate, lexicon: &'a Lexicon, seed: u64) -> Result<Generator<'a>> {
        if lexicon.language != template.language {
            return Err(Error::Lexicon(format!(
                "lexicon language '{}' does not match template language '{}'",
                lexicon.language, template.language
            )));
        }
        let slots = template.slots();
        lexicon.require_slots(&slots)?;
        let coverage = Coverage::new(lexicon, &slots, seed)?;
        Ok(Generator {
            template,
            lexicon,
            slots,
            coverage,
        })
    }

    fn key(&self, a: &Assignment) -> &str {
        &self.lexicon.entries[a.entry].key
    }

    fn verb_lemma(&self, a: &Assignment) -> String {
        self.lexicon.entries[a.entry].lemma().to_string()
    }

    fn plan(&self, variation: Variation, index: usize, attempt: usize, rng: &mut SeedRng) -> Result<Plan> {
        match self.template.scope {
            VariationScope::Row => self.plan_rows(variation, index, attempt, rng),
            VariationScope::Paradigm => self.plan_paradigms(variation, index, rng),
        }
    }

    fn type_i(&self, index: usize, attempt: usize, rng: &mut SeedRng) -> Result<(Assignment, String)> {
        if attempt == 0 {
            let (a, c) = self.coverage.pick(index);
            let id = format!("{}#{c}", self.key(&a));
            return Ok((a, id));
        }
        let e = self.coverage.entry(index);
        let c = rng.random_range(0..self.coverage.combos[e].len());
        let a = Assignment {
            entry: e,
            fillers: self.coverage.combos[e][c].clone(),
        };
        let id = format!("{}#{c}", self.key(&a));
        Ok((a, id))
    }

    fn plan_rows(&self, variation: Variation, index: usize, attempt: usize, rng: &mut SeedRng) -> Result<Plan> {
        let t = self.template;
        let n_answers = t.answers.len();
        match variation {
            Variation::I => {
                let (a, seed_id) = self.type_i(index, attempt, rng)?;
                Ok(Plan {
                    context: vec![a.clone(); t.context.len()],
                    answers: vec![a; n_answers],
                    seed_id,
                })
            }
            Variation::II => {
                let entry = self.coverage.entry(index);
                let answer_slots: BTreeSet<String> = t.answers.iter().flat_map(|a| row_slots(&a.row)).collect();
                'restart: for _ in 0..RESTARTS {
                    let mut rows: Vec<(Assignment, BTreeSet<String>)> = Vec::new();
                    let wanted = t
                        .context
                        .iter()
                        .map(row_slots)
                        .chain(std::iter::once(answer_slots.clone()));
                    for slots in wanted {
                        let mut found = None;
                        for _ in 0..64 {
                            let a = match draw(self.lexicon, entry, &self.slots, &BTreeSet::new(), rng) {
                                Some(a) => a,
                                None => continue 'restart,
                            };
                            if rows.iter().all(|(b, bs)| {
                                let common = bs.intersection(&slots).cloned().collect();
                                a.differs_on(b, &common)
                            }) {
                                found = Some(a);
                                break;
                            }
                        }
                        match found {
                            Some(a) => rows.push((a, slots)),
                            None => continue 'restart,
                        }
                    }
                    let answer = rows.pop().unwrap().0;
                    return Ok(Plan {
                        context: rows.into_iter().map(|(a, _)| a).collect(),
                        answers: vec![answer; n_answers],
                        seed_id: self.lexicon.entries[entry].key.clone(),
                    });
                }
                Err(self.exhausted("argument tuples of one verb cannot be kept distinct across rows"))
            }
            Variation::III => {
                for _ in 0..RESTARTS {
                    let mut used = BTreeSet::new();
                    let mut rows = Vec::new();
                    for row in &t.context {
                        match self.fresh(&mut used, uses_verb(row), rng) {
                            Some(a) => rows.push(a),
                            None => break,
                        }
                    }
                    if rows.len() < t.context.len() {
                        continue;
                    }
                    if let Some(answer) = self.fresh(&mut used, true, rng) {
                        return Ok(Plan {
                            context: rows,
                            answers: vec![answer; n_answers],
                            seed_id: "mixed".into(),
                        });
                    }
                }
                Err(self.exhausted("too few lemmas for rows with no shared lexical material"))
            }
        }
    }

    /// An assignment whose lemmas avoid `used`, which it then extends.
    fn fresh(&self, used: &mut BTreeSet<String>, with_verb: bool, rng: &mut SeedRng) -> Option<Assignment> {
        let mut entries: Vec<usize> = (0..self.lexicon.entries.len())
            .filter(|&e| !with_verb || !used.contains(self.lexicon.entries[e].lemma()))
            .collect();
        entries.shuffle(rng);
        for e in entries {
            if let Some(a) = draw(self.lexicon, e, &self.slots, used, rng) {
                used.extend(a.lemmas(self.lexicon, &self.slots));
                if with_verb {
                    used.insert(self.verb_lemma(&a));
                }
                return Some(a);
            }
        }
        None
    }

    fn plan_paradigms(&self, variation: Variation, index: usize, rng: &mut SeedRng) -> Result<Plan> {
        let t = self.template;
        let p_count = t.paradigm_count();
        for _ in 0..RESTARTS {
            let mut used = BTreeSet::new();
            let per_paradigm: Option<Vec<Assignment>> = match variation {
                Variation::I | Variation::II => {
                    let first = self.coverage.entry(index);
                    let mut entries = vec![first];
                    if variation == Variation::II {
                        let mut rest: Vec<usize> = (0..self.lexicon.entries.len()).filter(|&e| e != first).collect();
                        rest.shuffle(rng);
                        entries.extend(rest.into_iter().take(p_count - 1));
                        if entries.len() < p_count {
                            return Err(self.exhausted("fewer verbs than paradigms"));
                        }
                    } else {
                        entries.resize(p_count, first);
                    }
                    entries
                        .into_iter()
                        .map(|e| {
                            let a = draw(self.lexicon, e, &self.slots, &used, rng)?;
                            used.extend(a.lemmas(self.lexicon, &self.slots));
                            Some(a)
                        })
                        .collect()
                }
                Variation::III => None,
            };
            if let Some(pp) = per_paradigm {
                let seed_id = pp.iter().map(|a| self.key(a)).collect::<Vec<_>>().join("+");
                return Ok(Plan {
                    context: t.context.iter().map(|r| pp[r.paradigm].clone()).collect(),
                    answers: t.answers.iter().map(|a| pp[a.row.paradigm].clone()).collect(),
                    seed_id,
                });
            }
            if variation != Variation::III {
                continue;
            }
            // Every row is fresh. Answers of a paradigm that already has all its rows reuse
            // the last row's material; answers completing the open paradigm get fresh material.
            let mut rows = Vec::new();
            for row in &t.context {
                match self.fresh(&mut used, uses_verb(row), rng) {
                    Some(a) => rows.push(a),
                    None => break,
                }
            }
            if rows.len() < t.context.len() {
                continue;
            }
            let open = t.correct_answer().row.paradigm;
            let Some(fresh) = self.fresh(&mut used, true, rng) else {
                continue;
            };
            let answers = t
                .answers
                .iter()
                .map(|a| {
                    let p = a.row.paradigm;
                    match t.context.iter().rposition(|r| r.paradigm == p) {
                        Some(last) if p != open => rows[last].clone(),
                        _ => fresh.clone(),
                    }
                })
                .collect();
            return Ok(Plan {
                context: rows,
                answers,
                seed_id: "mixed".into(),
            });
        }
        Err(self.exhausted("too few lemmas to keep paradigms lexically apart"))
    }

    fn exhausted(&self, why: &str) -> Error {
        Error::Lexicon(format!("{} ({}): {why}", self.template.task, self.lexicon.language))
    }

    fn realize(&self, row: &RowTemplate, a: &Assignment, id: String) -> Result<Sentence> {
        let lex = self.lexicon;
        let entry = &lex.entries[a.entry];
        let fail = |reason: String| Error::Generation {
            instance: id.clone(),
            reason,
        };
        let filler_of = |c: &ChunkSpec| a.fillers.get(&c.slot).map(|&i| &entry.slots[&c.slot][i]);
        let number_of = |c: &ChunkSpec| c.feature(Attribute::Number).and_then(Number::from_feature);
        let subject = &row.chunks[0];
        let subject_filler = filler_of(subject);
        let clause_number = number_of(subject)
            .or_else(|| subject_filler.map(|f| f.number()))
            .unwrap_or(Number::Sg);
        let gender = subject_filler.and_then(|f| f.gender);

        let mut chunks = Vec::with_capacity(row.chunks.len());
        for c in &row.chunks {
            let (mut span, lemma) = if c.slot == "verb" {
                let n = number_of(c).unwrap_or(clause_number);
                let form = entry
                    .form(&c.form, n, gender)
                    .ok_or_else(|| fail(format!("entry '{}' has no verb form '{}'", entry.key, c.form)))?;
                (form.to_string(), Some(entry.lemma().to_string()))
            } else if let Some(key) = c.slot.strip_prefix("fn:") {
                let w = lex
                    .function_word(entry, key, clause_number)
                    .ok_or_else(|| fail(format!("no function word '{key}'")))?;
                (w.to_string(), None)
            } else {
                let f = filler_of(c).ok_or_else(|| fail(format!("slot {} unassigned", c.slot)))?;
                let n = number_of(c);
                let base = f.form(&c.form, n).ok_or_else(|| {
                    fail(format!(
                        "entry '{}': filler '{}' has no form '{}'{}",
                        entry.key,
                        f.text,
                        c.form,
                        n.map(|n| format!(" ({})", n.as_str())).unwrap_or_default()
                    ))
                })?;
                (base.to_string(), Some(f.lemma()))
            };
            if let Some(p) = &c.prefix {
                let contracted = filler_of(c).and_then(|f| f.forms.get(p.as_str()));
                span = match contracted {
                    Some(whole) if c.slot != "verb" => whole.clone(),
                    _ => {
                        let n = number_of(c).unwrap_or(clause_number);
                        let w = lex
                            .function_word(entry, p, n)
                            .ok_or_else(|| fail(format!("no function word '{p}' for entry '{}'", entry.key)))?;
                        format!("{w} {span}")
                    }
                };
            }
            chunks.push(Chunk {
                spec: c.clone(),
                span,
                lemma,
            });
        }
        if let Some(first) = chunks.first_mut() {
            first.span = capitalize(&first.span);
        }
        Sentence::from_chunks(id, chunks, self.template.task)
    }

    fn build(&self, plan: &Plan, id: &str, variation: Variation, rng: &mut SeedRng) -> Result<BlmInstance> {
        let t = self.template;
        let context = t
            .context
            .iter()
            .zip(&plan.context)
            .enumerate()
            .map(|(i, (row, a))| self.realize(row, a, format!("{id}:c{i}")))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..t.answers.len()).collect();
        order.shuffle(rng);
        let answers = order
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                let at = &t.answers[k];
                Ok(Answer {
                    sentence: self.realize(&at.row, &plan.answers[k], format!("{id}:a{j}"))?,
                    label: at.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let correct_index = answers
            .iter()
            .position(|a| a.label.is_correct())
            .expect("template has Correct");
        Ok(BlmInstance {
            id: id.to_string(),
            task: t.task,
            language: t.language.clone(),
            variation,
            seed_id: plan.seed_id.clone(),
            context,
            answers,
            correct_index,
        })
    }

    fn instance(&self, variation: Variation, index: usize, seed: u64) -> Result<BlmInstance> {
        let id = instance_id(self.template, variation, index);
        let mut rng = seed::stream(seed, &id);
        let mut last = String::new();
        for attempt in 0..RETRIES {
            let plan = self
                .plan(variation, index, attempt, &mut rng)
                .map_err(|e| with_id(e, &id))?;
            let inst = self.build(&plan, &id, variation, &mut rng)?;
            let texts: BTreeSet<&str> = inst.answers.iter().map(|a| a.sentence.text.as_str()).collect();
            if texts.len() == inst.answers.len() {
                inst.check()?;
                return Ok(inst);
            }
            last = format!("answers collide after {} attempts (seed {})", attempt + 1, plan.seed_id);
        }
        Err(Error::Generation {
            instance: id,
            reason: last,
        })
    }
}

fn with_id(e: Error, id: &str) -> Error {
    match e {
        Error::Generation { .. } => e,
        other => Error::Generation {
            instance: id.to_string(),
            reason: other.to_string(),
        },
    }
}

fn capitalize(s: &str) -> String {
    let mut cs = s.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

fn instance_id(t: &BlmTemplate, variation: Variation, index: usize) -> String {
    format!("{}-{}-{}-{index:06}", t.task, t.language, variation)
}

/// One instance, deterministic in `seed`.
pub fn instantiate(template: &BlmTemplate, lexicon: &Lexicon, variation: Variation, seed: u64) -> Result<BlmInstance> {
    Generator::new(template, lexicon, seed)?.instance(variation, 0, seed)
}

/// `n` instances with sequential ids. Instances are independent given the seed, so the
/// result does not depend on how many threads build them.
pub fn generate_dataset(
    template: &BlmTemplate,
    lexicon: &Lexicon,
    n: usize,
    variation: Variation,
    seed: u64,
) -> Result<Vec<BlmInstance>> {
    if n == 0 {
        return Err(Error::Config("n ≥ 1 required".into()));
    }
    let g = Generator::new(template, lexicon, seed)?;
    crate::par::try_map(n, |i| g.instance(variation, i, seed))
}

/// Every lemma-distinct Type I seed combination, one instance each, entry by entry.
pub fn generate_exhaustive(template: &BlmTemplate, lexicon: &Lexicon, seed: u64) -> Result<Vec<BlmInstance>> {
    if template.scope != VariationScope::Row {
        return Err(Error::Config(format!(
            "exhaustive generation needs a row-scoped template; {} varies per paradigm",
            template.task
        )));
    }
    let g = Generator::new(template, lexicon, seed)?;
    let seeds: Vec<(usize, usize)> = (0..lexicon.entries.len())
        .flat_map(|e| (0..g.coverage.combos[e].len()).map(move |c| (e, c)))
        .collect();
    crate::par::try_map(seeds.len(), |i| {
        let (e, c) = seeds[i];
        let id = instance_id(template, Variation::I, i);
        let a = Assignment {
            entry: e,
            fillers: g.coverage.combos[e][c].clone(),
        };
        let plan = Plan {
            context: vec![a.clone(); template.context.len()],
            answers: vec![a; template.answers.len()],
            seed_id: format!("{}#{c}", lexicon.entries[e].key),
        };
        let inst = g.build(&plan, &id, Variation::I, &mut seed::stream(seed, &id))?;
        inst.check()?;
        Ok(inst)
    })
}

pub fn generate(
    template: &BlmTemplate,
    lexicon: &Lexicon,
    variation: Variation,
    mode: GenerationMode,
    seed: u64,
) -> Result<Vec<BlmInstance>> {
    match mode {
        GenerationMode::Capped(n) => generate_dataset(template, lexicon, n, variation, seed),
        GenerationMode::Exhaustive if variation == Variation::I => generate_exhaustive(template, lexicon, seed),
        GenerationMode::Exhaustive => Err(Error::Config("exhaustive generation is defined for Type I only".into())),
    }
}

/// Number of lemma-distinct Type I seed combinations the lexicon offers the template.
pub fn type_i_combinations(template: &BlmTemplate, lexicon: &Lexicon) -> Result<usize> {
    let slots = template.slots();
    lexicon.require_slots(&slots)?;
    Ok((0..lexicon.entries.len())
        .map(|e| combinations(lexicon, e, &slots).len())
        .sum())
}

fn agr_chunk(role: ChunkRole, slot: &str, form: &str, n: FeatureValue) -> ChunkSpec {
    let mut c = ChunkSpec {
        role,
        slot: slot.into(),
        form: form.into(),
        prefix: None,
        features: [(Attribute::Number, n)].into_iter().collect(),
    };
    c.normalize().expect("agreement chunk");
    c
}

/// The 14 agreement sentence structures: zero, one or two attractors with every number
/// combination, the verb agreeing with the subject.
pub fn agreement_structures() -> Vec<RowTemplate> {
    use FeatureValue::{Pl, Sg};
    let mut out = Vec::new();
    for attractors in 0..=2usize {
        for combo in 0..(1usize << (attractors + 1)) {
            let num = |bit: usize| if combo >> bit & 1 == 0 { Sg } else { Pl };
            let subj = num(attractors);
            let mut chunks = vec![agr_chunk(ChunkRole::SubjectNp, "subjects", "np", subj)];
            if attractors >= 1 {
                chunks.push(agr_chunk(ChunkRole::Pp1, "attractors1", "np", num(attractors - 1)));
            }
            if attractors == 2 {
                chunks.push(agr_chunk(ChunkRole::Pp2, "attractors2", "np", num(0)));
            }
            chunks.push(agr_chunk(ChunkRole::Vp, "verb", "pred", subj));
            out.push(RowTemplate { chunks, paradigm: 0 });
        }
    }
    out
}

/// Sentence structures of a task's sentence bank: the agreement structures, or the distinct
/// context-row patterns for the other tasks.
pub fn bank_structures(template: &BlmTemplate) -> Vec<RowTemplate> {
    if template.task.family() == TaskFamily::Agr {
        return agreement_structures();
    }
    let mut seen = BTreeSet::new();
    template
        .context
        .iter()
        .filter(|r| {
            let key = crate::pattern::pattern_of(&r.chunks, template.task).expect("checked at load");
            seen.insert(key)
        })
        .map(|r| RowTemplate {
            chunks: r.chunks.clone(),
            paradigm: 0,
        })
        .collect()
}

/// `n` sentences spread evenly over the bank structures, each with its own random verb and
/// fillers. Sentence `k` has structure `k mod p`.
pub fn build_sentence_bank(template: &BlmTemplate, lexicon: &Lexicon, n: usize, seed: u64) -> Result<Vec<Sentence>> {
    let structures = bank_structures(template);
    let p = structures.len();
    if n == 0 || !n.is_multiple_of(p) {
        return Err(Error::Config(format!(
            "{n} not divisible by {p}, the pattern count of {}",
            template.task
        )));
    }
    let g = Generator::new(template, lexicon, seed)?;
    crate::par::try_map(n, |k| {
        let id = format!("{}-{}-bank-{k:05}", template.task, template.language);
        let row = &structures[k % p];
        let slots = row_slots(row);
        let mut rng = seed::stream(seed, &id);
        for _ in 0..RESTARTS {
            let e = rng.random_range(0..lexicon.entries.len());
            if let Some(a) = draw(lexicon, e, &slots, &BTreeSet::new(), &mut rng) {
                return g.realize(row, &a, id);
            }
        }
        Err(Error::Generation {
            instance: id,
            reason: "no entry offers lemma-distinct fillers".into(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::builtin_lexicon;
    use crate::model::TaskId;
    use crate::template::builtin_template;

    fn setup(task: TaskId, lang: &str) -> (BlmTemplate, Lexicon) {
        (
            builtin_template(task, lang).unwrap(),
            builtin_lexicon(task, lang).unwrap(),
        )
    }

    #[test]
    fn agreement_type_i_reads_naturally() {
        let (t, lex) = setup(TaskId::Agr, "en");
        let inst = instantiate(&t, &lex, Variation::I, 7).unwrap();
        let c = &inst.context;
        // same lemmas everywhere, number morphology only
        let lemmas = |s: &Sentence| s.chunks.iter().map(|c| c.lemma.clone()).collect::<Vec<_>>();
        assert_eq!(lemmas(&c[0])[..2], lemmas(&c[1])[..2]);
        assert_ne!(c[0].text, c[1].text);
        assert!(c[0].text.starts_with("The "), "{}", c[0].text);
        let correct = inst.correct();
        assert_eq!(correct.pattern.as_str(), "np-pl pp1-pl pp2-sg vp-pl");
    }

    #[test]
    fn coordination_uses_the_function_word() {
        let (t, lex) = setup(TaskId::Agr, "fr");
        let inst = instantiate(&t, &lex, Variation::I, 3).unwrap();
        let coord = inst.answers.iter().find(|a| a.label.as_str() == "Coord").unwrap();
        assert!(
            coord.sentence.chunks[2].span.starts_with("et "),
            "{}",
            coord.sentence.text
        );
    }

    #[test]
    fn italian_agent_phrase_is_contracted() {
        let (t, lex) = setup(TaskId::Cos, "it");
        let inst = instantiate(&t, &lex, Variation::I, 1).unwrap();
        let by = &inst.context[2].chunks[2].span;
        assert!(by.starts_with("da"), "{by}");
        assert!(!by.starts_with("da "), "{by}");
    }

    #[test]
    fn deterministic() {
        let (t, lex) = setup(TaskId::SprayLoadAltAtl, "en");
        for v in Variation::ALL {
            let a = generate_dataset(&t, &lex, 5, v, 11).unwrap();
            let b = generate_dataset(&t, &lex, 5, v, 11).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn type_ii_keeps_the_verb() {
        let (t, lex) = setup(TaskId::SprayLoadAltAtl, "en");
        let inst = instantiate(&t, &lex, Variation::II, 4).unwrap();
        let verbs: BTreeSet<_> = inst
            .context
            .iter()
            .map(|s| s.chunks.iter().find(|c| c.spec.slot == "verb").unwrap().lemma.clone())
            .collect();
        assert_eq!(verbs.len(), 1);
        let texts: BTreeSet<_> = inst.context.iter().map(|s| s.chunks[0].lemma.clone()).collect();
        assert!(texts.len() > 1);
    }

    #[test]
    fn exhaustive_agreement_counts() {
        let (t, lex) = setup(TaskId::Agr, "fr");
        assert_eq!(type_i_combinations(&t, &lex).unwrap(), 256);
        assert_eq!(generate_exhaustive(&t, &lex, 1).unwrap().len(), 256);
        let (roll, roll_lex) = setup(TaskId::Roll, "en");
        assert!(generate_exhaustive(&roll, &roll_lex, 1).is_err());
    }

    #[test]
    fn zero_instances_rejected() {
        let (t, lex) = setup(TaskId::Agr, "en");
        let err = generate_dataset(&t, &lex, 0, Variation::I, 1).unwrap_err();
        assert!(err.to_string().contains("n ≥ 1 required"));
    }

    #[test]
    fn missing_slot_is_named() {
        let (t, mut lex) = setup(TaskId::SprayLoadAltAtl, "en");
        lex.entries[3].slots.remove("locs");
        let err = instantiate(&t, &lex, Variation::I, 1).unwrap_err().to_string();
        assert!(err.contains("locs"), "{err}");
    }

    #[test]
    fn degenerate_lexicon_fails_after_retries() {
        let (t, mut lex) = setup(TaskId::Agr, "en");
        // singular and plural spelled alike: the number contrasts collapse
        for e in &mut lex.entries {
            e.forms.insert("pred.pl".into(), e.forms["pred.sg"].clone());
            for f in e.slots.values_mut().flatten() {
                for v in f.forms.values_mut() {
                    *v = v.trim_end_matches('s').to_string();
                }
                f.text = f.text.trim_end_matches('s').to_string();
            }
        }
        let err = instantiate(&t, &lex, Variation::I, 1).unwrap_err().to_string();
        assert!(err.contains("collide"), "{err}");
    }

    #[test]
    fn bank_structures_and_counts() {
        let (t, lex) = setup(TaskId::Agr, "fr");
        let keys: BTreeSet<String> = agreement_structures()
            .iter()
            .map(|r| crate::pattern::pattern_of(&r.chunks, TaskId::Agr).unwrap().0)
            .collect();
        assert_eq!(keys.len(), 14);
        let err = build_sentence_bank(&t, &lex, 10, 1).unwrap_err().to_string();
        assert!(err.contains("10 not divisible by 14"), "{err}");
        let bank = build_sentence_bank(&t, &lex, 28, 1).unwrap();
        let mut per: BTreeMap<String, usize> = BTreeMap::new();
        for s in &bank {
            *per.entry(s.pattern.0.clone()).or_default() += 1;
        }
        assert!(per.values().all(|&c| c == 2));
        let (cos, cos_lex) = setup(TaskId::Cos, "en");
        assert_eq!(bank_structures(&cos).len(), 7);
        let (roll, _) = setup(TaskId::Roll, "en");
        assert_eq!(bank_structures(&roll).len(), 4);
        assert_eq!(build_sentence_bank(&cos, &cos_lex, 14, 2).unwrap().len(), 14);
    }
}
