use std::collections::{BTreeMap, BTreeSet};

use blm::lexicon::builtin_lexicon;
use blm::model::{Sentence, TaskId, Variation};
use blm::template::{builtin_template, generate_dataset, validate_instance};

fn lexical_lemmas(s: &Sentence) -> BTreeSet<String> {
    s.chunks
        .iter()
        .filter(|c| !c.spec.slot.starts_with("fn:"))
        .filter_map(|c| c.lemma.clone())
        .collect()
}

#[test]
fn oracle_accepts_every_generated_instance() {
    for task in TaskId::ALL {
        for lang in task.languages() {
            let t = builtin_template(task, lang).unwrap();
            let lex = builtin_lexicon(task, lang).unwrap();
            // the full thousand per type for English, a smaller sweep for the other languages
            let n = if *lang == "en" { 1000 } else { 200 };
            for v in Variation::ALL {
                let data = generate_dataset(&t, &lex, n, v, 2024).unwrap();
                assert_eq!(data.len(), n);
                for inst in &data {
                    let report = validate_instance(inst, &t);
                    assert!(report.ok(), "{} {:?}", inst.id, report.failures());
                    assert_eq!(inst.answers.iter().filter(|a| a.label.is_correct()).count(), 1);
                }
            }
        }
    }
}

#[test]
fn type_iii_rows_share_no_lemma() {
    for task in TaskId::ALL {
        let t = builtin_template(task, "en").unwrap();
        let lex = builtin_lexicon(task, "en").unwrap();
        for inst in generate_dataset(&t, &lex, 200, Variation::III, 5).unwrap() {
            let sets: Vec<_> = inst.context.iter().map(lexical_lemmas).collect();
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    let shared: Vec<_> = sets[i].intersection(&sets[j]).collect();
                    assert!(shared.is_empty(), "{} rows {i},{j} share {shared:?}", inst.id);
                }
            }
        }
    }
}

#[test]
fn type_i_rows_share_all_lemmas() {
    let t = builtin_template(TaskId::Agr, "it").unwrap();
    let lex = builtin_lexicon(TaskId::Agr, "it").unwrap();
    for inst in generate_dataset(&t, &lex, 50, Variation::I, 9).unwrap() {
        let all: BTreeSet<String> = inst.context.iter().flat_map(lexical_lemmas).collect();
        let last = lexical_lemmas(&inst.context[6]);
        assert_eq!(all, last, "{}", inst.id);
    }
}

#[test]
fn type_i_covers_entries_evenly() {
    let t = builtin_template(TaskId::SprayLoadAtlAlt, "en").unwrap();
    let lex = builtin_lexicon(TaskId::SprayLoadAtlAlt, "en").unwrap();
    let data = generate_dataset(&t, &lex, 252, Variation::I, 3).unwrap();
    let mut per_verb: BTreeMap<String, usize> = BTreeMap::new();
    for inst in &data {
        let verb = inst.seed_id.split('#').next().unwrap().to_string();
        *per_verb.entry(verb).or_default() += 1;
    }
    assert_eq!(per_verb.len(), 30);
    let (lo, hi) = (per_verb.values().min().unwrap(), per_verb.values().max().unwrap());
    assert!(hi - lo <= 1, "{per_verb:?}");
    let seeds: BTreeSet<&str> = data.iter().map(|i| i.seed_id.as_str()).collect();
    assert_eq!(seeds.len(), 252);
}

#[test]
fn answers_are_shuffled() {
    let t = builtin_template(TaskId::Agr, "en").unwrap();
    let lex = builtin_lexicon(TaskId::Agr, "en").unwrap();
    let data = generate_dataset(&t, &lex, 400, Variation::II, 1).unwrap();
    let positions: BTreeSet<usize> = data.iter().map(|i| i.correct_index).collect();
    assert_eq!(positions.len(), 8);
}

#[test]
fn cross_task_contrast_holds_in_realized_data() {
    let cos = builtin_template(TaskId::Cos, "en").unwrap();
    let od = builtin_template(TaskId::Od, "en").unwrap();
    let lex = builtin_lexicon(TaskId::Cos, "en").unwrap();
    let inst = generate_dataset(&cos, &lex, 1, Variation::I, 1).unwrap().remove(0);
    let correct = inst.correct().pattern.clone();
    let od_iint = od.answers.iter().find(|a| a.label.as_str() == "I-Int").unwrap();
    let key = blm::pattern::pattern_of(&od_iint.row.chunks, TaskId::Od).unwrap();
    assert_eq!(correct, key);
}
