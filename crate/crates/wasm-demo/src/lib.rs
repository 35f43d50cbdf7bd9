//! Browser bindings for a static demo page: generate one instance, show a sentence embedding
//! as a 32×24 heatmap, and project a sentence bank onto its top two principal components.
//! Everything uses the deterministic structural embedder, so no model weights are shipped.

use blm::embedding::{embed_sentences, EmbeddedBank, EmbeddingMatrix, StructuralEmbedder};
use blm::lexicon::builtin_lexicon;
use blm::template::{build_sentence_bank, builtin_template, instantiate};
use blm::{probe, svg, BlmInstance, Result, Sentence, TaskId, Variation};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Row<'a> {
    text: &'a str,
    pattern: &'a str,
}

#[derive(Serialize)]
struct AnswerRow<'a> {
    text: &'a str,
    label: &'static str,
    correct: bool,
}

#[derive(Serialize)]
struct InstanceView<'a> {
    id: &'a str,
    context: Vec<Row<'a>>,
    answers: Vec<AnswerRow<'a>>,
}

fn instance(task: &str, lang: &str, variation: &str, seed: u64) -> Result<BlmInstance> {
    let task: TaskId = task.parse()?;
    let variation: Variation = variation.parse()?;
    let t = builtin_template(task, lang)?;
    let lex = builtin_lexicon(task, lang)?;
    instantiate(&t, &lex, variation, seed)
}

pub fn instance_json(task: &str, lang: &str, variation: &str, seed: u64) -> Result<String> {
    let inst = instance(task, lang, variation, seed)?;
    let view = InstanceView {
        id: &inst.id,
        context: inst
            .context
            .iter()
            .map(|s| Row {
                text: &s.text,
                pattern: s.pattern.as_str(),
            })
            .collect(),
        answers: inst
            .answers
            .iter()
            .enumerate()
            .map(|(i, a)| AnswerRow {
                text: &a.sentence.text,
                label: a.label.as_str(),
                correct: i == inst.correct_index,
            })
            .collect(),
    };
    Ok(serde_json::to_string(&view)?)
}

/// Heatmap of sentence `row` of the instance: context rows first, then the answers.
pub fn heatmap_svg(task: &str, lang: &str, variation: &str, seed: u64, row: usize) -> Result<String> {
    let inst = instance(task, lang, variation, seed)?;
    let sentences: Vec<&Sentence> = inst
        .context
        .iter()
        .chain(inst.answers.iter().map(|a| &a.sentence))
        .collect();
    let s = sentences.get(row).ok_or_else(|| {
        blm::Error::Config(format!(
            "row {row} is out of range, the instance has {}",
            sentences.len()
        ))
    })?;
    let store = embed_sentences(&StructuralEmbedder::new(0), &[*s])?;
    let m = EmbeddingMatrix::new(store.get(&s.id).expect("just embedded").to_vec())?;
    Ok(svg::heatmap(m.grid()?, 12.0))
}

/// Scatter of a bank's embeddings on their top two principal components.
pub fn bank_pca_svg(task: &str, lang: &str, n: usize, seed: u64) -> Result<String> {
    let task: TaskId = task.parse()?;
    let t = builtin_template(task, lang)?;
    let lex = builtin_lexicon(task, lang)?;
    let bank = build_sentence_bank(&t, &lex, n, seed)?;
    let store = embed_sentences(&StructuralEmbedder::new(0), &bank.iter().collect::<Vec<_>>())?;
    let eb = EmbeddedBank::assemble(&bank, &store)?;
    let p = probe::pca2(eb.vectors.mapv(f64::from).view())?;
    Ok(svg::scatter(&p, &eb.patterns))
}

fn js(e: blm::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = generateInstance)]
pub fn generate_instance(task: &str, lang: &str, variation: &str, seed: u64) -> std::result::Result<String, JsError> {
    instance_json(task, lang, variation, seed).map_err(js)
}

#[wasm_bindgen(js_name = embeddingHeatmap)]
pub fn embedding_heatmap(
    task: &str,
    lang: &str,
    variation: &str,
    seed: u64,
    row: usize,
) -> std::result::Result<String, JsError> {
    heatmap_svg(task, lang, variation, seed, row).map_err(js)
}

#[wasm_bindgen(js_name = bankProjection)]
pub fn bank_projection(task: &str, lang: &str, n: usize, seed: u64) -> std::result::Result<String, JsError> {
    bank_pca_svg(task, lang, n, seed).map_err(js)
}
