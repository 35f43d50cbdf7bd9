use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use blm::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, Model};
use blm::dataset::{self, BankSplitSpec, Header, RecordKind, SplitSpec};
use blm::embedding::{embed_sentences, EmbeddedBank, EmbeddedSet, EmbeddingMatrix, EmbeddingStore, StructuralEmbedder};
use blm::eval::{error_distribution, f1, spread, ErrorDistribution, Prediction, Scores};
use blm::lexicon::{self, builtin_lexicon, Lexicon};
use blm::probe;
use blm::seed;
use blm::solver::vae::{self, make_triples, SentenceModel, Triple};
use blm::solver::{ffnn, write_log};
use blm::template::{build_sentence_bank, builtin_template, generate, BlmTemplate, GenerationMode};
use blm::{svg, BlmInstance, Sentence};
use serde::Serialize;

use crate::config::{self, FileConfig, Overrides};
use crate::fail::{Fail, R};
use crate::manifest::{self, Recorder};
use crate::{
    ApplyAuditArgs, BankArgs, Cmd, EmbedArgs, EvaluateArgs, GenerateArgs, HeatmapArgs, LexiconCmd, LexiconSource,
    ProbeCmd, ProjectArgs, ProviderKind, ReplayArgs, Source, SplitArgs, StatsArgs, TrainArgs, TrainCmd, TraverseArgs,
};

pub fn run(cmd: Cmd, args: &[String], cap: Option<usize>) -> R<()> {
    match cmd {
        Cmd::Generate(a) => generate_cmd(a, args),
        Cmd::Bank(a) => bank_cmd(a, args),
        Cmd::Embed(a) => embed_cmd(a, args),
        Cmd::Split(a) => split_cmd(a, args),
        Cmd::Train { solver } => train_cmd(solver, args, cap),
        Cmd::Evaluate(a) => evaluate_cmd(a, args),
        Cmd::Probe { probe } => match probe {
            ProbeCmd::Traverse(a) => traverse_cmd(a, args),
            ProbeCmd::Project(a) => project_cmd(a, args),
            ProbeCmd::Heatmap(a) => heatmap_cmd(a, args),
        },
        Cmd::Stats(a) => stats_cmd(a, args),
        Cmd::Lexicon { op } => match op {
            LexiconCmd::Slots(a) => slots_cmd(a, args),
            LexiconCmd::ApplyAudit(a) => apply_audit_cmd(a, args),
        },
        Cmd::Replay(a) => replay_cmd(a),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> R<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Fail::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Fail::io(path, e))
}

fn out_dir(dir: &Path) -> R<()> {
    std::fs::create_dir_all(dir).map_err(|e| Fail::io(dir, e))
}

fn load_sources(s: &Source) -> R<(BlmTemplate, Lexicon)> {
    let mut t = match &s.template {
        Some(p) => BlmTemplate::load(p)?,
        None => builtin_template(s.task, &s.language)?,
    };
    if t.task != s.task {
        return Err(Fail::usage(format!(
            "template is for task {}, --task says {}",
            t.task, s.task
        )));
    }
    t.language = s.language.clone();
    let lex = match &s.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => builtin_lexicon(s.task, &s.language)?,
    };
    Ok((t, lex))
}

fn record_sources(rec: &mut Recorder, s: &Source) {
    rec.inputs(s.template.iter().chain(&s.lexicon));
}

enum Records {
    Dataset(Vec<BlmInstance>),
    Bank(Header, Vec<Sentence>),
}

impl Records {
    fn sentences(&self) -> Vec<&Sentence> {
        match self {
            Records::Dataset(d) => dataset::all_sentences(d),
            Records::Bank(_, b) => b.iter().collect(),
        }
    }
}

fn load_records(path: &Path) -> R<Records> {
    let file = std::fs::File::open(path).map_err(|e| Fail::io(path, e))?;
    let mut first = String::new();
    std::io::BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Fail::io(path, e))?;
    let header: Header = serde_json::from_str(&first)
        .map_err(|e| Fail::runtime("dataset", format!("{}: bad header: {e}", path.display())))?;
    let at = |e: blm::Error| Fail::from(e).with_path(path);
    Ok(match header.kind {
        RecordKind::BlmDataset => Records::Dataset(dataset::read_dataset(path).map_err(at)?),
        RecordKind::SentenceBank => {
            let (h, b) = dataset::read_bank(path).map_err(at)?;
            Records::Bank(h, b)
        }
    })
}

fn load_dataset(path: &Path) -> R<Vec<BlmInstance>> {
    match load_records(path)? {
        Records::Dataset(d) => Ok(d),
        Records::Bank(..) => Err(Fail::usage(format!(
            "{} is a sentence bank, a dataset is needed",
            path.display()
        ))),
    }
}

fn load_bank(path: &Path) -> R<Vec<Sentence>> {
    match load_records(path)? {
        Records::Bank(_, b) => Ok(b),
        Records::Dataset(_) => Err(Fail::usage(format!(
            "{} is a dataset, a sentence bank is needed",
            path.display()
        ))),
    }
}

fn load_store(paths: &[PathBuf]) -> R<EmbeddingStore> {
    let mut store: Option<EmbeddingStore> = None;
    for p in paths {
        let s = EmbeddingStore::read_blme(p).map_err(|e| Fail::from(e).with_path(p))?;
        match &mut store {
            None => store = Some(s),
            Some(acc) => acc.merge(s)?,
        }
    }
    store.ok_or_else(|| Fail::usage("at least one embedding file is required"))
}

impl Fail {
    fn with_path(mut self, p: &Path) -> Fail {
        self.message = format!("{}: {}", p.display(), self.message);
        self
    }
}

fn generate_cmd(a: GenerateArgs, args: &[String]) -> R<()> {
    let (t, lex) = load_sources(&a.source)?;
    let mode = match a.n {
        Some(n) => GenerationMode::Capped(n),
        None => GenerationMode::Exhaustive,
    };
    let data = generate(&t, &lex, a.variation, mode, a.seed)?;
    let mut buf = Vec::new();
    dataset::write_dataset_to(&mut buf, &data)?;
    write(&a.out, buf)?;
    let mut rec = Recorder::new(args);
    rec.config(&serde_json::json!({
        "task": a.source.task, "language": a.source.language, "variation": a.variation,
        "n": a.n, "exhaustive": a.exhaustive,
    }))?;
    rec.seed("generation", a.seed);
    record_sources(&mut rec, &a.source);
    rec.output(&a.out);
    rec.finish(&manifest::beside(&a.out))?;
    println!("wrote {} instances to {}", data.len(), a.out.display());
    Ok(())
}

fn bank_cmd(a: BankArgs, args: &[String]) -> R<()> {
    let (t, lex) = load_sources(&a.source)?;
    let bank = build_sentence_bank(&t, &lex, a.n, a.seed)?;
    let mut buf = Vec::new();
    dataset::write_bank_to(&mut buf, &bank, a.source.task, &a.source.language)?;
    write(&a.out, buf)?;
    let mut rec = Recorder::new(args);
    rec.config(&serde_json::json!({"task": a.source.task, "language": a.source.language, "n": a.n}))?;
    rec.seed("generation", a.seed);
    record_sources(&mut rec, &a.source);
    rec.output(&a.out);
    rec.finish(&manifest::beside(&a.out))?;
    let patterns: std::collections::BTreeSet<_> = bank.iter().map(|s| &s.pattern).collect();
    println!(
        "wrote {} sentences in {} patterns to {}",
        bank.len(),
        patterns.len(),
        a.out.display()
    );
    Ok(())
}

fn embed_cmd(a: EmbedArgs, args: &[String]) -> R<()> {
    let records: Vec<Records> = a.inputs.iter().map(|p| load_records(p)).collect::<R<_>>()?;
    let mut seen = BTreeMap::new();
    let mut sentences = Vec::new();
    for s in records.iter().flat_map(Records::sentences) {
        if seen.insert(s.id.as_str(), ()).is_none() {
            sentences.push(s);
        }
    }
    if a.out.is_none() && a.texts.is_none() {
        return Err(Fail::usage("nothing to do: give --out and/or --texts"));
    }
    let mut rec = Recorder::new(args);
    rec.inputs(&a.inputs);
    if let Some(t) = &a.texts {
        let mut buf = Vec::new();
        dataset::write_sentence_texts(&mut buf, &sentences)?;
        write(t, buf)?;
        rec.output(t);
    }
    if let Some(out) = &a.out {
        let store = match a.provider {
            ProviderKind::Structural => {
                if !a.from.is_empty() {
                    return Err(Fail::usage("--from is only used with --provider blme"));
                }
                let e = StructuralEmbedder {
                    noise: a.noise,
                    ..StructuralEmbedder::new(a.seed)
                };
                rec.seed("embedder", a.seed);
                embed_sentences(&e, &sentences)?
            }
            ProviderKind::Blme => {
                let all = load_store(&a.from)?;
                rec.inputs(&a.from);
                let mut store = EmbeddingStore::new(all.provider.clone(), all.dim);
                let mut missing = Vec::new();
                for s in &sentences {
                    match all.get(&s.id) {
                        Some(v) => store.insert(s.id.clone(), v.to_vec())?,
                        None => missing.push(s.id.as_str()),
                    }
                }
                if !missing.is_empty() {
                    return Err(Fail::runtime(
                        "embedding",
                        format!(
                            "{} sentences have no vector in the BLME input, e.g. {}",
                            missing.len(),
                            missing[0]
                        ),
                    ));
                }
                store
            }
        };
        let mut buf = Vec::new();
        store.write_blme_to(&mut buf)?;
        write(out, buf)?;
        rec.output(out);
        println!(
            "wrote {} vectors of dim {} ({}) to {}",
            store.len(),
            store.dim,
            store.provider,
            out.display()
        );
    }
    rec.config(&serde_json::json!({"provider": format!("{:?}", a.provider).to_lowercase(), "noise": a.noise}))?;
    let target = a.out.as_ref().or(a.texts.as_ref()).unwrap();
    rec.finish(&manifest::beside(target))?;
    Ok(())
}

fn split_cmd(a: SplitArgs, args: &[String]) -> R<()> {
    out_dir(&a.out_dir)?;
    let mut rec = Recorder::new(args);
    rec.input(&a.data);
    rec.seed("split", a.seed);
    let names = ["train", "dev", "test"];
    let mut counts = Vec::new();
    match load_records(&a.data)? {
        Records::Dataset(d) => {
            let spec = SplitSpec {
                train_fraction: a.train_fraction,
                dev_fraction: a.dev_fraction,
                train_sample_size: (!a.no_sample).then_some(a.train_sample_size),
                seed: a.seed,
            };
            rec.config(&spec)?;
            let (tr, dv, te) = dataset::split(&d, &spec)?;
            for (name, part) in names.iter().zip([tr, dv, te]) {
                let p = a.out_dir.join(format!("{name}.jsonl"));
                let mut buf = Vec::new();
                dataset::write_dataset_to(&mut buf, &part)?;
                write(&p, buf)?;
                rec.output(&p);
                counts.push(part.len());
            }
        }
        Records::Bank(h, b) => {
            let spec = BankSplitSpec {
                train: a.per_pattern[0],
                dev: a.per_pattern[1],
                test: a.per_pattern[2],
                seed: a.seed,
            };
            rec.config(&spec)?;
            let idx = dataset::bank_split_indices(&b, &spec)?;
            let (tr, dv, te) = idx.select(&b);
            let task = h
                .task
                .ok_or_else(|| Fail::runtime("dataset", "bank header names no task"))?;
            let lang = h.language.clone().unwrap_or_default();
            for (name, part) in names.iter().zip([tr, dv, te]) {
                let p = a.out_dir.join(format!("{name}.jsonl"));
                let mut buf = Vec::new();
                dataset::write_bank_to(&mut buf, &part, task, &lang)?;
                write(&p, buf)?;
                rec.output(&p);
                counts.push(part.len());
            }
        }
    }
    rec.finish(&a.out_dir.join(manifest::FILE_NAME))?;
    println!("train {} dev {} test {}", counts[0], counts[1], counts[2]);
    Ok(())
}

fn train_cmd(cmd: TrainCmd, args: &[String], cap: Option<usize>) -> R<()> {
    let (kind, a) = match cmd {
        TrainCmd::Ffnn(a) => ("ffnn", a),
        TrainCmd::VaeSentence(a) => ("vae-sentence", a),
        TrainCmd::VaeTwoLevel(a) => ("vae-two-level", a),
    };
    let TrainArgs {
        config,
        data,
        dev,
        emb,
        out,
        log,
        seed,
        epochs,
        lr,
        batch_size,
        threads,
        n_negs,
        warm_start,
    } = a;
    let file = FileConfig::load(config.as_deref())?;
    let overrides = Overrides {
        seed,
        lr,
        batch_size,
        epochs,
        threads,
        n_negs,
        data,
        dev,
        emb,
        out,
        log,
        warm_start,
    };
    let r = config::resolve(file, overrides, cap)?;
    if r.warm_start.is_some() && kind != "vae-two-level" {
        return Err(Fail::usage("--warm-start applies to vae-two-level only"));
    }
    let store = load_store(&r.emb)?;
    let mut rec = Recorder::new(args);
    rec.inputs(
        config
            .iter()
            .chain([&r.data])
            .chain(&r.dev)
            .chain(&r.emb)
            .chain(&r.warm_start),
    );
    rec.seed("train", r.train.seed);
    #[derive(Serialize)]
    struct Recorded<'a> {
        solver: &'a str,
        #[serde(flatten)]
        run: &'a config::Resolved,
    }
    rec.config(&Recorded { solver: kind, run: &r })?;
    let (model, log) = match kind {
        "ffnn" => {
            let train = EmbeddedSet::assemble(&load_dataset(&r.data)?, &store)?;
            let dev = r
                .dev
                .as_deref()
                .map(|p| load_dataset(p).and_then(|d| Ok(EmbeddedSet::assemble(&d, &store)?)))
                .transpose()?;
            let shape = ffnn::FfnnShape {
                dim: store.dim,
                ..r.ffnn
            };
            let (m, log) = ffnn::train(&train, dev.as_ref(), shape, &r.train)?;
            (Model::Ffnn(m), log)
        }
        "vae-sentence" => {
            let train = EmbeddedBank::assemble(&load_bank(&r.data)?, &store)?;
            let dev = r
                .dev
                .as_deref()
                .map(|p| load_bank(p).and_then(|b| Ok(EmbeddedBank::assemble(&b, &store)?)))
                .transpose()?;
            let (m, log) = vae::train_sentence(&train, dev.as_ref(), r.vae.sentence, r.n_negs, &r.train)?;
            (Model::Sentence(m), log)
        }
        _ => {
            let train = EmbeddedSet::assemble(&load_dataset(&r.data)?, &store)?;
            let dev = r
                .dev
                .as_deref()
                .map(|p| load_dataset(p).and_then(|d| Ok(EmbeddedSet::assemble(&d, &store)?)))
                .transpose()?;
            let warm = match &r.warm_start {
                Some(p) => match read_checkpoint(p)?.model {
                    Model::Sentence(s) => Some(s.vae),
                    other => {
                        return Err(Fail::usage(format!(
                            "--warm-start needs a vae-sentence checkpoint, got {}",
                            other.kind()
                        )))
                    }
                },
                None => None,
            };
            let (m, log) = vae::train_two_level(&train, dev.as_ref(), r.vae, &r.train, warm.as_ref())?;
            (Model::TwoLevel(m), log)
        }
    };
    let ck = Checkpoint {
        model,
        config: r.train,
        provider: store.provider.clone(),
    };
    if let Some(dir) = r.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        out_dir(dir)?;
    }
    write_checkpoint(&r.out, &ck)?;
    write(&r.log, write_log(&log)?)?;
    rec.output(&r.out);
    rec.output(&r.log);
    rec.finish(&manifest::beside(&r.out))?;
    if let Some(last) = log.last() {
        let dev = last
            .dev_accuracy
            .map(|a| format!(", dev accuracy {a:.4}"))
            .unwrap_or_default();
        println!(
            "{kind}: {} epochs, final train loss {:.6}{dev}; wrote {}",
            last.epoch,
            last.train_loss,
            r.out.display()
        );
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn check_provider(ck: &Checkpoint, store: &EmbeddingStore, model: &Path) -> R<()> {
    if ck.provider != store.provider {
        return Err(Fail::runtime(
            "embedding",
            format!(
                "{} was trained on '{}' embeddings, the input is '{}'",
                model.display(),
                ck.provider,
                store.provider
            ),
        ));
    }
    Ok(())
}

/// Bank triples for evaluating and probing a sentence model.
pub fn bank_triples(bank: &EmbeddedBank, n_negs: usize, seed: u64) -> R<Vec<Triple>> {
    Ok(make_triples(
        &bank.patterns,
        n_negs,
        &mut seed::stream(seed, "evaluate:triples"),
    )?)
}

#[derive(Serialize)]
struct RunScore {
    model: String,
    kind: &'static str,
    data: String,
    #[serde(flatten)]
    scores: Scores,
}

#[derive(Serialize)]
struct Cell {
    kind: &'static str,
    data: String,
    accuracy: blm::eval::Spread,
    f1: blm::eval::Spread,
}

fn evaluate_cmd(a: EvaluateArgs, args: &[String]) -> R<()> {
    out_dir(&a.out_dir)?;
    let store = load_store(&a.emb)?;
    let mut rec = Recorder::new(args);
    rec.inputs(a.models.iter().chain(&a.data).chain(&a.emb));
    rec.seed("triples", a.seed);
    rec.config(&serde_json::json!({"seed": a.seed}))?;
    let models: Vec<Checkpoint> = a
        .models
        .iter()
        .map(|p| read_checkpoint(p).map_err(|e| Fail::from(e).with_path(p)))
        .collect::<R<_>>()?;
    // runs of one kind on one dataset are pooled into mean ± SD; bank and dataset models
    // read different inputs, so they cannot share an invocation
    let kinds: Vec<&'static str> = models.iter().map(|m| m.model.kind()).collect();
    let mut distinct = kinds.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.contains(&"vae-sentence") && distinct.len() > 1 {
        return Err(Fail::usage(
            "vae-sentence checkpoints cannot be evaluated together with dataset solvers",
        ));
    }
    for (ck, p) in models.iter().zip(&a.models) {
        check_provider(ck, &store, p)?;
    }
    let sentence_level = distinct == ["vae-sentence"];
    let mut runs = Vec::new();
    let mut predictions = String::from(if sentence_level {
        "model,data,sentence,chosen,correct,hit,tie\n"
    } else {
        "model,data,instance,chosen,correct,label,tie\n"
    });
    let mut distributions: Vec<(String, ErrorDistribution)> = Vec::new();
    let mut errors = String::from("model,data,label,count,share\n");
    for dp in &a.data {
        let dname = stem(dp);
        if sentence_level {
            let bank = EmbeddedBank::assemble(&load_bank(dp)?, &store)?;
            for ((ck, mp), &kind) in models.iter().zip(&a.models).zip(&kinds) {
                let Model::Sentence(m) = &ck.model else { unreachable!() };
                let triples = bank_triples(&bank, m.n_negs, a.seed)?;
                let preds = vae::identify(&m.vae, &bank, &triples)?;
                let gold: Vec<usize> = triples.iter().map(|t| t.correct).collect();
                let chosen: Vec<usize> = preds.iter().map(|p| p.chosen).collect();
                for ((t, p), g) in triples.iter().zip(&preds).zip(&gold) {
                    let _ = writeln!(
                        predictions,
                        "{},{dname},{},{},{},{},{}",
                        stem(mp),
                        bank.ids[t.input],
                        bank.ids[t.candidates[p.chosen]],
                        bank.ids[t.candidates[*g]],
                        u8::from(p.chosen == *g),
                        u8::from(p.tie)
                    );
                }
                runs.push(RunScore {
                    model: stem(mp),
                    kind,
                    data: dname.clone(),
                    scores: f1(&chosen, &gold)?,
                });
            }
        } else {
            let instances = load_dataset(dp)?;
            let set = EmbeddedSet::assemble(&instances, &store)?;
            for ((ck, mp), &kind) in models.iter().zip(&a.models).zip(&kinds) {
                let preds: Vec<Prediction> = match &ck.model {
                    Model::Ffnn(m) => ffnn::evaluate(m, &set)?.1,
                    Model::TwoLevel(m) => vae::evaluate_two_level(m, &set)?.1,
                    Model::Sentence(_) => unreachable!(),
                };
                let chosen: Vec<usize> = preds.iter().map(|p| p.chosen).collect();
                let gold: Vec<usize> = set.items.iter().map(|i| i.correct).collect();
                for (item, p) in set.items.iter().zip(&preds) {
                    let _ = writeln!(
                        predictions,
                        "{},{dname},{},{},{},{},{}",
                        stem(mp),
                        item.id,
                        p.chosen,
                        item.correct,
                        item.labels[p.chosen],
                        u8::from(p.tie)
                    );
                }
                let dist = error_distribution(&chosen, &instances)?;
                for (label, n) in &dist.counts {
                    let _ = writeln!(errors, "{},{dname},{label},{n},{:.6}", stem(mp), dist.share(label));
                }
                distributions.push((format!("{}/{dname}", stem(mp)), dist));
                runs.push(RunScore {
                    model: stem(mp),
                    kind,
                    data: dname.clone(),
                    scores: f1(&chosen, &gold)?,
                });
            }
        }
    }
    let grid: Vec<Cell> = distinct
        .iter()
        .flat_map(|&kind| a.data.iter().map(move |dp| (kind, stem(dp))))
        .map(|(kind, d)| {
            let pick = |f: fn(&Scores) -> f64| {
                spread(
                    &runs
                        .iter()
                        .filter(|r| r.kind == kind && r.data == d)
                        .map(|r| f(&r.scores))
                        .collect::<Vec<_>>(),
                )
            };
            Cell {
                kind,
                accuracy: pick(|s| s.accuracy),
                f1: pick(|s| s.f1),
                data: d,
            }
        })
        .collect();
    let report = serde_json::json!({"runs": runs, "summary": grid});
    let files: Vec<(&str, String)> = {
        let mut v = vec![
            ("report.json", serde_json::to_string_pretty(&report)? + "\n"),
            ("predictions.csv", predictions),
        ];
        if !sentence_level {
            v.push(("errors.csv", errors));
            v.push(("errors.svg", svg::stacked_bars(&distributions)));
        }
        v
    };
    for (name, body) in files {
        let p = a.out_dir.join(name);
        write(&p, body)?;
        rec.output(p);
    }
    rec.finish(&a.out_dir.join(manifest::FILE_NAME))?;
    for c in &grid {
        println!(
            "{} on {}: accuracy {:.4} ± {:.4}, F1 {:.4} ± {:.4} over {} runs",
            c.kind, c.data, c.accuracy.mean, c.accuracy.sd, c.f1.mean, c.f1.sd, c.accuracy.runs
        );
    }
    Ok(())
}

fn sentence_checkpoint(path: &Path, store: &EmbeddingStore) -> R<SentenceModel> {
    let ck = read_checkpoint(path).map_err(|e| Fail::from(e).with_path(path))?;
    check_provider(&ck, store, path)?;
    match ck.model {
        Model::Sentence(m) => Ok(m),
        other => Err(Fail::usage(format!(
            "probes need a vae-sentence checkpoint, got {}",
            other.kind()
        ))),
    }
}

fn traverse_cmd(a: TraverseArgs, args: &[String]) -> R<()> {
    out_dir(&a.out_dir)?;
    let store = load_store(&a.emb)?;
    let model = sentence_checkpoint(&a.model, &store)?;
    let bank = EmbeddedBank::assemble(&load_bank(&a.bank)?, &store)?;
    let triples = bank_triples(&bank, model.n_negs, a.seed)?;
    let report = probe::traverse(&model, &bank, &triples, a.steps)?;
    let pp2 = report.one_token_pairs(Some("pp2"));
    let pair_mass: Vec<Vec<f64>> = report
        .grid
        .iter()
        .map(|row| row.iter().map(|c| c.pair_mass(&pp2)).collect())
        .collect();
    let summary = serde_json::json!({
        "items": triples.len(),
        "baseline_accuracy": report.baseline.accuracy(),
        "pp2_pairs": pp2.iter().map(|&(i, j)| [report.patterns[i].as_str(), report.patterns[j].as_str()]).collect::<Vec<_>>(),
        "baseline_pp2_pair_mass": report.baseline.pair_mass(&pp2),
        "pp2_pair_mass": pair_mass,
        "report": report,
    });
    let mut rec = Recorder::new(args);
    rec.inputs([&a.model, &a.bank].into_iter().chain(&a.emb));
    rec.seed("triples", a.seed);
    rec.config(&serde_json::json!({"steps": a.steps}))?;
    for (name, body) in [
        ("traversal.csv", report.to_csv()),
        ("traversal.json", serde_json::to_string_pretty(&summary)? + "\n"),
        ("traversal.svg", svg::traversal_grid(&report)),
    ] {
        let p = a.out_dir.join(name);
        write(&p, body)?;
        rec.output(p);
    }
    rec.finish(&a.out_dir.join(manifest::FILE_NAME))?;
    println!(
        "untraversed pattern accuracy {:.4} over {} items",
        report.baseline.accuracy(),
        triples.len()
    );
    Ok(())
}

fn project_cmd(a: ProjectArgs, args: &[String]) -> R<()> {
    out_dir(&a.out_dir)?;
    let store = load_store(&a.emb)?;
    let model = sentence_checkpoint(&a.model, &store)?;
    let bank = EmbeddedBank::assemble(&load_bank(&a.bank)?, &store)?;
    let (mu, proj) = probe::project_latents(&model, &bank)?;
    let mut clusters = serde_json::json!({
        "points": bank.len(),
        "silhouette": probe::silhouette(mu.view(), &bank.patterns)?,
        "explained_variance": proj.variances,
    });
    let mut rec = Recorder::new(args);
    rec.inputs([&a.model, &a.bank].into_iter().chain(&a.train_bank).chain(&a.emb));
    rec.config(&serde_json::json!({}))?;
    if let Some(tp) = &a.train_bank {
        let train = EmbeddedBank::assemble(&load_bank(tp)?, &store)?;
        let tmu = vae::latent_means(&model.vae, train.vectors.view())?.mapv(f64::from);
        clusters["nearest_centroid_accuracy"] =
            probe::nearest_centroid(tmu.view(), &train.patterns, mu.view(), &bank.patterns)?.into();
    }
    for (name, body) in [
        (
            "projection.csv",
            probe::projection_csv(&bank.ids, &bank.patterns, &proj),
        ),
        ("projection.svg", svg::scatter(&proj, &bank.patterns)),
        ("clusters.json", serde_json::to_string_pretty(&clusters)? + "\n"),
    ] {
        let p = a.out_dir.join(name);
        write(&p, body)?;
        rec.output(p);
    }
    rec.finish(&a.out_dir.join(manifest::FILE_NAME))?;
    println!("{}", clusters);
    Ok(())
}

fn heatmap_cmd(a: HeatmapArgs, args: &[String]) -> R<()> {
    let store = EmbeddingStore::read_blme(&a.emb)?;
    let (id, v) = match &a.id {
        Some(id) => (
            id.clone(),
            store
                .get(id)
                .ok_or_else(|| Fail::runtime("embedding", format!("no vector for '{id}'")))?
                .to_vec(),
        ),
        None => store
            .vectors
            .iter()
            .next()
            .map(|(k, v)| (k.clone(), v.clone()))
            .ok_or_else(|| Fail::runtime("embedding", "the file holds no vectors"))?,
    };
    let m = EmbeddingMatrix::new(v)?;
    write(&a.out, svg::heatmap(m.grid()?, 10.0))?;
    let mut rec = Recorder::new(args);
    rec.input(&a.emb);
    rec.config(&serde_json::json!({"id": id}))?;
    rec.output(&a.out);
    rec.finish(&manifest::beside(&a.out))?;
    println!("rendered {id} to {}", a.out.display());
    Ok(())
}

fn stats_cmd(a: StatsArgs, args: &[String]) -> R<()> {
    let mut all = Vec::new();
    for p in &a.data {
        all.extend(load_dataset(p)?);
    }
    let table = dataset::stats(&all).to_table();
    print!("{table}");
    if let Some(out) = &a.out {
        write(out, &table)?;
        let mut rec = Recorder::new(args);
        rec.inputs(&a.data);
        rec.output(out);
        rec.finish(&manifest::beside(out))?;
    }
    Ok(())
}

fn lexicon_of(s: &LexiconSource) -> R<Lexicon> {
    Ok(match &s.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => builtin_lexicon(s.task, &s.language)?,
    })
}

fn slots_cmd(a: LexiconSource, args: &[String]) -> R<()> {
    let lex = lexicon_of(&a)?;
    let qs = lexicon::slot_queries(&lex);
    let mut buf = Vec::new();
    lexicon::write_slot_queries(&mut buf, &qs)?;
    write(&a.out, buf)?;
    let mut rec = Recorder::new(args);
    rec.inputs(&a.lexicon);
    rec.output(&a.out);
    rec.finish(&manifest::beside(&a.out))?;
    println!("wrote {} slot queries to {}", qs.len(), a.out.display());
    Ok(())
}

fn apply_audit_cmd(a: ApplyAuditArgs, args: &[String]) -> R<()> {
    let lex = lexicon_of(&a.source)?;
    let file = std::fs::File::open(&a.audit).map_err(|e| Fail::io(&a.audit, e))?;
    let audit = lexicon::read_audit(std::io::BufReader::new(file))?;
    let out = lexicon::apply_audit(&lex, &audit)?;
    out.check()?;
    write(&a.source.out, out.to_toml_string()?)?;
    let mut rec = Recorder::new(args);
    rec.inputs(a.source.lexicon.iter().chain([&a.audit]));
    rec.output(&a.source.out);
    rec.finish(&manifest::beside(&a.source.out))?;
    println!(
        "applied {} accepted of {} audit lines; {} fillers now",
        audit.iter().filter(|l| l.accepted).count(),
        audit.len(),
        out.filler_count()
    );
    Ok(())
}

fn replay_cmd(a: ReplayArgs) -> R<()> {
    let m = manifest::read(&a.manifest)?;
    if m.version != env!("CARGO_PKG_VERSION") {
        return Err(Fail::runtime(
            "replay",
            format!(
                "manifest written by blm {}, this is {}",
                m.version,
                env!("CARGO_PKG_VERSION")
            ),
        ));
    }
    let changed = manifest::changed(&m.inputs);
    if !changed.is_empty() {
        return Err(Fail::runtime(
            "replay",
            format!("inputs changed since the recorded run: {}", changed.join(", ")),
        ));
    }
    if m.args.first().map(String::as_str) == Some("replay") {
        return Err(Fail::usage("a replay manifest cannot itself be replayed"));
    }
    crate::dispatch(&m.args)?;
    let differ = manifest::changed(&m.outputs);
    if !differ.is_empty() {
        return Err(Fail::runtime(
            "replay",
            format!("outputs differ from the recorded run: {}", differ.join(", ")),
        ));
    }
    println!("replay: {} outputs byte-identical", m.outputs.len());
    Ok(())
}
