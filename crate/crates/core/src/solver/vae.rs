//! Variational encoder-decoders. The sentence-level model encodes one 32×24 embedding grid
//! through a convolution into a small Gaussian latent and decodes it back through the mirrored
//! transposed convolution; it learns from (input, same-pattern positive, other-pattern
//! negatives) triples. The two-level model runs the sentence model over the 7 context
//! sentences, compresses their sampled latents into a task latent and decodes the answer.

use std::collections::BTreeMap;
use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{epoch_order, finite, EpochLog, TrainConfig};
use crate::embedding::{EmbeddedBank, EmbeddedSet};
use crate::error::{Error, Result};
use crate::eval::{f1, Prediction};
use crate::model::PatternKey;
use crate::nn::{
    kl_standard_normal, max_margin, reduce, relu, relu_backward, standard_normal, Adam, Conv2d, ConvGeom,
    ConvTranspose2d, Linear, Params, Real, LOGVAR_MAX, LOGVAR_MIN,
};
use crate::par;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeShape {
    pub geom: ConvGeom,
    pub latent: usize,
}

impl Default for VaeShape {
    /// 15×15 kernel over the 32×24 grid, 8 filters, latent size 5.
    fn default() -> VaeShape {
        VaeShape {
            geom: ConvGeom {
                channels: 1,
                height: 32,
                width: 24,
                kh: 15,
                kw: 15,
                filters: 8,
            },
            latent: 5,
        }
    }
}

impl VaeShape {
    pub fn dim(&self) -> usize {
        self.geom.image()
    }

    pub fn check(&self) -> Result<()> {
        self.geom.check()?;
        if self.latent == 0 {
            return Err(Error::Config("latent size must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian latent layer: splits an encoder output into `μ` and clamped `logσ²` and samples.
struct Latent<T> {
    mu: Array2<T>,
    lv_raw: Array2<T>,
    lv: Array2<T>,
    eps: Option<Array2<T>>,
    z: Array2<T>,
}

impl<T: Real> Latent<T> {
    fn new(e: Array2<T>, size: usize, eps: Option<ArrayView2<'_, T>>) -> Latent<T> {
        let mu = e.slice(s![.., ..size]).to_owned();
        let lv_raw = e.slice(s![.., size..]).to_owned();
        let lv = lv_raw.mapv(|v| v.max(T::lit(LOGVAR_MIN)).min(T::lit(LOGVAR_MAX)));
        let z = match eps {
            Some(u) => &mu + &(lv.mapv(|v| (v * T::lit(0.5)).exp()) * u),
            None => mu.clone(),
        };
        Latent {
            mu,
            lv_raw,
            lv,
            eps: eps.map(|u| u.to_owned()),
            z,
        }
    }

    fn kl(&self) -> T {
        let mut total = T::zero();
        for (m, l) in self.mu.outer_iter().zip(self.lv.outer_iter()) {
            total += kl_standard_normal(m.as_slice().unwrap(), l.as_slice().unwrap()).0;
        }
        total
    }

    /// Gradient in the encoder output given `dL/dz`, with the KL term included.
    fn backward(&self, dz: &Array2<T>) -> Array2<T> {
        let half = T::lit(0.5);
        let dmu = dz + &self.mu;
        let mut dlv = self.lv.mapv(|v| half * (v.exp() - T::one()));
        if let Some(u) = &self.eps {
            dlv += &(dz * u * &self.lv.mapv(|v| half * (v * half).exp()));
        }
        ndarray::Zip::from(&mut dlv).and(&self.lv_raw).for_each(|d, &r| {
            if r < T::lit(LOGVAR_MIN) || r > T::lit(LOGVAR_MAX) {
                *d = T::zero();
            }
        });
        concatenate(Axis(1), &[dmu.view(), dlv.view()]).expect("same rows")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVae<T> {
    pub shape: VaeShape,
    pub conv: Conv2d<T>,
    /// feature map → (μ, logσ²)
    pub enc: Linear<T>,
    pub dec: Linear<T>,
    pub up: ConvTranspose2d<T>,
}

struct SentPass<T> {
    cols: Array2<T>,
    c_pre: Array2<T>,
    h: Array2<T>,
    lat: Latent<T>,
    d_pre: Array2<T>,
    dh: Array2<T>,
    out: Array2<T>,
}

impl<T: Real> SentenceVae<T> {
    pub fn zeros(shape: VaeShape) -> SentenceVae<T> {
        let f = shape.geom.features();
        SentenceVae {
            shape,
            conv: Conv2d::zeros(shape.geom),
            enc: Linear::zeros(f, 2 * shape.latent),
            dec: Linear::zeros(shape.latent, f),
            up: ConvTranspose2d::zeros(shape.geom),
        }
    }

    pub fn init(shape: VaeShape, rng: &mut Rng) -> SentenceVae<T> {
        let f = shape.geom.features();
        SentenceVae {
            shape,
            conv: Conv2d::glorot(shape.geom, rng),
            enc: Linear::glorot(f, 2 * shape.latent, rng),
            dec: Linear::glorot(shape.latent, f, rng),
            up: ConvTranspose2d::glorot(shape.geom, rng),
        }
    }

    fn check_input(&self, x: ArrayView2<'_, T>) -> Result<()> {
        if x.ncols() != self.shape.dim() {
            return Err(Error::Config(format!(
                "sentence encoder expects {}×{} grids ({} values), got {}",
                self.shape.geom.height,
                self.shape.geom.width,
                self.shape.dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    fn pass(&self, x: ArrayView2<'_, T>, eps: Option<ArrayView2<'_, T>>) -> SentPass<T> {
        let (cols, c_pre) = self.conv.forward(x);
        let h = relu(&c_pre);
        let lat = Latent::new(self.enc.forward(h.view()), self.shape.latent, eps);
        let d_pre = self.dec.forward(lat.z.view());
        let dh = relu(&d_pre);
        let out = self.up.forward(dh.view());
        SentPass {
            cols,
            c_pre,
            h,
            lat,
            d_pre,
            dh,
            out,
        }
    }

    /// Accumulates the gradient of a loss whose derivative is `dout` in the decoded output and
    /// `dz_extra` in the sampled latent, plus the KL term.
    fn backward(&self, p: &SentPass<T>, dout: &Array2<T>, dz_extra: Option<&Array2<T>>, grad: &mut SentenceVae<T>) {
        let ddh = self.up.backward(p.dh.view(), dout.view(), &mut grad.up, true).unwrap();
        let dd = relu_backward(&p.d_pre, ddh);
        let mut dz = self
            .dec
            .backward(p.lat.z.view(), dd.view(), &mut grad.dec, true)
            .unwrap();
        if let Some(extra) = dz_extra {
            dz += extra;
        }
        let de = p.lat.backward(&dz);
        let dh = self.enc.backward(p.h.view(), de.view(), &mut grad.enc, true).unwrap();
        let dc = relu_backward(&p.c_pre, dh);
        self.conv.backward(&p.cols, dc.view(), &mut grad.conv, false);
    }

    /// (batch, dim) → (μ, logσ²), each (batch, latent).
    pub fn encode(&self, x: ArrayView2<'_, T>) -> Result<(Array2<T>, Array2<T>)> {
        self.check_input(x)?;
        let (_, c) = self.conv.forward(x);
        let lat = Latent::new(self.enc.forward(relu(&c).view()), self.shape.latent, None);
        Ok((lat.mu, lat.lv))
    }

    pub fn decode(&self, z: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if z.ncols() != self.shape.latent {
            return Err(Error::Config(format!(
                "latent of size {}, expected {}",
                z.ncols(),
                self.shape.latent
            )));
        }
        Ok(self.up.forward(relu(&self.dec.forward(z)).view()))
    }

    /// Encode, sample (or take `μ` when `eps` is `None`) and decode.
    pub fn reconstruct(&self, x: ArrayView2<'_, T>, eps: Option<ArrayView2<'_, T>>) -> Result<Array2<T>> {
        self.check_input(x)?;
        Ok(self.pass(x, eps).out)
    }

    /// Summed `maxM + KL` over a batch of triples and its gradient.
    pub fn triple_loss_grad(
        &self,
        x: ArrayView2<'_, T>,
        pos: ArrayView2<'_, T>,
        negs: &[ArrayView2<'_, T>],
        eps: Option<ArrayView2<'_, T>>,
    ) -> Result<(T, SentenceVae<T>)> {
        self.check_input(x)?;
        if negs.len() != x.nrows() || pos.nrows() != x.nrows() {
            return Err(Error::Config(format!(
                "{} inputs, {} positives and {} negative sets",
                x.nrows(),
                pos.nrows(),
                negs.len()
            )));
        }
        let p = self.pass(x, eps);
        let mut dout = Array2::zeros(p.out.raw_dim());
        let mut loss = p.lat.kl();
        for (b, neg) in negs.iter().enumerate() {
            let (l, g) = max_margin(p.out.row(b), pos.row(b), *neg)?;
            loss += l;
            dout.row_mut(b).assign(&g);
        }
        let mut grad = self.zeros_like();
        self.backward(&p, &dout, None, &mut grad);
        Ok((loss, grad))
    }
}

impl<T: Real> Params<T> for SentenceVae<T> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, T>> {
        let mut v = self.conv.tensors();
        v.extend(self.enc.tensors());
        v.extend(self.dec.tensors());
        v.extend(self.up.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        let mut v = self.conv.tensors_mut();
        v.extend(self.enc.tensors_mut());
        v.extend(self.dec.tensors_mut());
        v.extend(self.up.tensors_mut());
        v
    }
    fn names(&self) -> Vec<String> {
        prefixed(&[
            ("conv", &self.conv.names()),
            ("enc", &self.enc.names()),
            ("dec", &self.dec.names()),
            ("up", &self.up.names()),
        ])
    }
}

fn prefixed(parts: &[(&str, &Vec<String>)]) -> Vec<String> {
    parts
        .iter()
        .flat_map(|(p, names)| names.iter().map(move |n| format!("{p}.{n}")))
        .collect()
}

/// A sentence-level training item: indices into a bank, with the positive at `correct`
/// among `candidates`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub input: usize,
    pub candidates: Vec<usize>,
    pub correct: usize,
}

impl Triple {
    pub fn positive(&self) -> usize {
        self.candidates[self.correct]
    }

    pub fn negatives(&self) -> Vec<usize> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.correct)
            .map(|(_, c)| *c)
            .collect()
    }
}

/// Bank triples: for each sentence a different same-pattern positive and one sentence from
/// each of `n_negs` other patterns, candidates in random order.
pub fn make_triples(patterns: &[PatternKey], n_negs: usize, rng: &mut Rng) -> Result<Vec<Triple>> {
    let mut groups: BTreeMap<&PatternKey, Vec<usize>> = BTreeMap::new();
    for (i, p) in patterns.iter().enumerate() {
        groups.entry(p).or_default().push(i);
    }
    if n_negs == 0 {
        return Err(Error::Config("at least one negative is required".into()));
    }
    if groups.len() < n_negs + 1 {
        return Err(Error::Config(format!(
            "{} distinct patterns cannot supply {n_negs} negatives of distinct patterns",
            groups.len()
        )));
    }
    if let Some((p, _)) = groups.iter().find(|(_, g)| g.len() < 2) {
        return Err(Error::Config(format!(
            "pattern {} has a single sentence, no positive exists",
            p.as_str()
        )));
    }
    let keys: Vec<&PatternKey> = groups.keys().copied().collect();
    let mut out = Vec::with_capacity(patterns.len());
    for (i, p) in patterns.iter().enumerate() {
        let same: Vec<usize> = groups[p].iter().copied().filter(|&j| j != i).collect();
        let pos = *same.choose(rng).unwrap();
        let mut others: Vec<&PatternKey> = keys.iter().copied().filter(|k| *k != p).collect();
        others.shuffle(rng);
        let mut candidates = vec![pos];
        candidates.extend(others[..n_negs].iter().map(|k| *groups[k].choose(rng).unwrap()));
        candidates.shuffle(rng);
        let correct = candidates.iter().position(|&c| c == pos).unwrap();
        out.push(Triple {
            input: i,
            candidates,
            correct,
        });
    }
    Ok(out)
}

/// Triples built from one context: each row is its own positive against the other rows.
pub fn context_triples(rows: usize) -> Vec<Triple> {
    (0..rows)
        .map(|i| Triple {
            input: i,
            candidates: (0..rows).collect(),
            correct: i,
        })
        .collect()
}

/// Per-unit range of latent means over the training data, used by traversals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRanges {
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

impl LatentRanges {
    pub fn of(mu: ArrayView2<'_, f32>) -> LatentRanges {
        let min = mu.fold_axis(Axis(0), f32::INFINITY, |a, b| a.min(*b)).to_vec();
        let max = mu.fold_axis(Axis(0), f32::NEG_INFINITY, |a, b| a.max(*b)).to_vec();
        LatentRanges { min, max }
    }

    /// `steps` evenly spaced values from min to max inclusive.
    pub fn values(&self, unit: usize, steps: usize) -> Vec<f32> {
        let (lo, hi) = (self.min[unit], self.max[unit]);
        if steps == 1 {
            return vec![lo];
        }
        (0..steps)
            .map(|k| lo + (hi - lo) * k as f32 / (steps - 1) as f32)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceModel {
    pub vae: SentenceVae<f32>,
    pub n_negs: usize,
    pub ranges: Option<LatentRanges>,
}

fn draw_eps(rng: &mut Rng, rows: usize, cols: usize) -> Array2<f32> {
    Array2::from_shape_simple_fn((rows, cols), || standard_normal(rng))
}

fn sharded<P: Params<f32>>(
    n: usize,
    threads: usize,
    f: impl Fn(Range<usize>) -> Result<(f32, P)> + Sync + Send,
) -> Result<(f32, P)> {
    Ok(reduce(par::map_shards(n, threads, f)?))
}

fn bank_rows(bank: &EmbeddedBank, idx: impl Iterator<Item = usize>) -> Array2<f32> {
    let idx: Vec<usize> = idx.collect();
    bank.vectors.select(Axis(0), &idx)
}

/// Which candidate the decoded input scores highest, per triple (decoding from `μ`).
pub fn identify(vae: &SentenceVae<f32>, bank: &EmbeddedBank, triples: &[Triple]) -> Result<Vec<Prediction>> {
    let mut out = Vec::with_capacity(triples.len());
    for chunk in triples.chunks(256) {
        let x = bank_rows(bank, chunk.iter().map(|t| t.input));
        let dec = vae.reconstruct(x.view(), None)?;
        for (t, d) in chunk.iter().zip(dec.outer_iter()) {
            let cands = bank_rows(bank, t.candidates.iter().copied());
            out.push(Prediction::from_scores(cands.dot(&d).to_vec()));
        }
    }
    Ok(out)
}

/// Mean `maxM + KL` at `z = μ`, and candidate predictions.
pub fn evaluate_sentence(
    vae: &SentenceVae<f32>,
    bank: &EmbeddedBank,
    triples: &[Triple],
) -> Result<(f64, Vec<Prediction>)> {
    let mut loss = 0.0;
    for chunk in triples.chunks(256) {
        let (x, pos, negs) = triple_batch(bank, chunk);
        let nv: Vec<_> = negs.iter().map(|n| n.view()).collect();
        loss += vae.triple_loss_grad(x.view(), pos.view(), &nv, None)?.0 as f64;
    }
    Ok((loss / triples.len().max(1) as f64, identify(vae, bank, triples)?))
}

fn triple_batch(bank: &EmbeddedBank, ts: &[Triple]) -> (Array2<f32>, Array2<f32>, Vec<Array2<f32>>) {
    let x = bank_rows(bank, ts.iter().map(|t| t.input));
    let pos = bank_rows(bank, ts.iter().map(Triple::positive));
    let negs = ts.iter().map(|t| bank_rows(bank, t.negatives().into_iter())).collect();
    (x, pos, negs)
}

pub fn latent_means(vae: &SentenceVae<f32>, x: ArrayView2<'_, f32>) -> Result<Array2<f32>> {
    let mut parts = Vec::new();
    for start in (0..x.nrows()).step_by(256) {
        let end = (start + 256).min(x.nrows());
        parts.push(vae.encode(x.slice(s![start..end, ..]))?.0);
    }
    if parts.is_empty() {
        return Ok(Array2::zeros((0, vae.shape.latent)));
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("same width"))
}

/// Trains the sentence-level model on bank triples redrawn every epoch.
pub fn train_sentence(
    train: &EmbeddedBank,
    dev: Option<&EmbeddedBank>,
    shape: VaeShape,
    n_negs: usize,
    cfg: &TrainConfig,
) -> Result<(SentenceModel, Vec<EpochLog>)> {
    cfg.check()?;
    shape.check()?;
    if train.vectors.ncols() != shape.dim() {
        return Err(Error::Config(format!(
            "bank vectors have dim {}, the model expects {}",
            train.vectors.ncols(),
            shape.dim()
        )));
    }
    let mut vae = SentenceVae::init(shape, &mut seed::stream(cfg.seed, "vae-sentence:init"));
    let dev_triples = match dev {
        Some(d) if !d.is_empty() => Some(make_triples(
            &d.patterns,
            n_negs,
            &mut seed::stream(cfg.seed, "vae-sentence:dev-triples"),
        )?),
        _ => None,
    };
    let mut adam = Adam::new(cfg.adam(), &vae);
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let triples = make_triples(
            &train.patterns,
            n_negs,
            &mut seed::stream(cfg.seed, &format!("vae-sentence:triples:{epoch}")),
        )?;
        let order = epoch_order(triples.len(), cfg.seed, "vae-sentence", epoch);
        let mut noise = seed::stream(cfg.seed, &format!("vae-sentence:sample:{epoch}"));
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Triple> = idx.iter().map(|&i| triples[i].clone()).collect();
            let eps = draw_eps(&mut noise, batch.len(), shape.latent);
            let (loss, mut grad) = sharded(batch.len(), cfg.threads, |r| {
                let (x, pos, negs) = triple_batch(train, &batch[r.clone()]);
                let nv: Vec<_> = negs.iter().map(|n| n.view()).collect();
                vae.triple_loss_grad(x.view(), pos.view(), &nv, Some(eps.slice(s![r, ..])))
            })?;
            finite(loss as f64, epoch, b + 1)?;
            total += loss as f64;
            grad.scale(1.0 / batch.len() as f32);
            adam.step(&mut vae, &grad);
        }
        let mut line = EpochLog::new(epoch, total / triples.len() as f64);
        if let (Some(dev), Some(ts)) = (dev, &dev_triples) {
            let (loss, preds) = evaluate_sentence(&vae, dev, ts)?;
            let s = f1(
                &preds.iter().map(|p| p.chosen).collect::<Vec<_>>(),
                &ts.iter().map(|t| t.correct).collect::<Vec<_>>(),
            )?;
            line.dev_loss = Some(loss);
            line.dev_accuracy = Some(s.accuracy);
            line.dev_f1 = Some(s.f1);
        }
        log.push(line);
    }
    let ranges = LatentRanges::of(latent_means(&vae, train.vectors.view())?.view());
    Ok((
        SentenceModel {
            vae,
            n_negs,
            ranges: Some(ranges),
        },
        log,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoLevelShape {
    pub sentence: VaeShape,
    pub rows: usize,
    pub task_latent: usize,
}

impl Default for TwoLevelShape {
    fn default() -> TwoLevelShape {
        TwoLevelShape {
            sentence: VaeShape::default(),
            rows: 7,
            task_latent: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelVae<T> {
    pub shape: TwoLevelShape,
    pub sent: SentenceVae<T>,
    /// rows·latent → (μ, logσ²) of the task latent
    pub task_enc: Linear<T>,
    pub task_dec: Linear<T>,
}

/// Loss terms of one two-level batch; `total()` is what is optimized.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms<T> {
    pub sentence: T,
    pub task: T,
}

impl<T: Real> LossTerms<T> {
    pub fn total(&self) -> T {
        self.sentence + self.task
    }
}

/// Output of a two-level forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelOutput<T> {
    /// (batch, dim)
    pub answer: Array2<T>,
    /// (batch·rows, latent)
    pub sentence_latents: Array2<T>,
    /// (batch, task latent)
    pub task_latent: Array2<T>,
}

impl<T: Real> TwoLevelVae<T> {
    pub fn zeros(shape: TwoLevelShape) -> TwoLevelVae<T> {
        TwoLevelVae {
            shape,
            sent: SentenceVae::zeros(shape.sentence),
            task_enc: Linear::zeros(shape.rows * shape.sentence.latent, 2 * shape.task_latent),
            task_dec: Linear::zeros(shape.task_latent, shape.sentence.dim()),
        }
    }

    pub fn init(shape: TwoLevelShape, rng: &mut Rng) -> TwoLevelVae<T> {
        let sent = SentenceVae::init(shape.sentence, rng);
        TwoLevelVae {
            shape,
            sent,
            task_enc: Linear::glorot(shape.rows * shape.sentence.latent, 2 * shape.task_latent, rng),
            task_dec: Linear::glorot(shape.task_latent, shape.sentence.dim(), rng),
        }
    }

    fn check(&self, x: ArrayView2<'_, T>) -> Result<usize> {
        self.sent.check_input(x)?;
        if !x.nrows().is_multiple_of(self.shape.rows) {
            return Err(Error::Config(format!(
                "{} sentence rows do not form contexts of {}",
                x.nrows(),
                self.shape.rows
            )));
        }
        Ok(x.nrows() / self.shape.rows)
    }

    fn concat(&self, z: &Array2<T>, batch: usize) -> Array2<T> {
        z.as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch, self.shape.rows * self.shape.sentence.latent))
            .expect("contiguous")
    }

    /// `x` stacks the context rows of each item: (batch·rows, dim). Without noise every
    /// latent is its mean.
    pub fn forward(
        &self,
        x: ArrayView2<'_, T>,
        eps_sent: Option<ArrayView2<'_, T>>,
        eps_task: Option<ArrayView2<'_, T>>,
    ) -> Result<TwoLevelOutput<T>> {
        let batch = self.check(x)?;
        let sp = self.sent.pass(x, eps_sent);
        let zc = self.concat(&sp.lat.z, batch);
        let lat = Latent::new(self.task_enc.forward(zc.view()), self.shape.task_latent, eps_task);
        Ok(TwoLevelOutput {
            answer: self.task_dec.forward(lat.z.view()),
            sentence_latents: sp.lat.z,
            task_latent: lat.z,
        })
    }

    /// Summed sentence and task losses over the batch and the gradient of their sum.
    pub fn loss_grad(
        &self,
        x: ArrayView2<'_, T>,
        answers: &[ArrayView2<'_, T>],
        correct: &[usize],
        eps_sent: Option<ArrayView2<'_, T>>,
        eps_task: Option<ArrayView2<'_, T>>,
    ) -> Result<(LossTerms<T>, TwoLevelVae<T>)> {
        let batch = self.check(x)?;
        let rows = self.shape.rows;
        let sp = self.sent.pass(x, eps_sent);

        // sentence level: each row against the other rows of its context
        let mut terms = LossTerms {
            sentence: sp.lat.kl(),
            task: T::zero(),
        };
        let mut dout = Array2::zeros(sp.out.raw_dim());
        for b in 0..batch {
            for t in context_triples(rows) {
                let r = b * rows + t.input;
                let negs = x.select(Axis(0), &t.negatives().iter().map(|n| b * rows + n).collect::<Vec<_>>());
                let (l, g) = max_margin(sp.out.row(r), x.row(r), negs.view())?;
                terms.sentence += l;
                dout.row_mut(r).assign(&g);
            }
        }

        // task level
        let zc = self.concat(&sp.lat.z, batch);
        let lat = Latent::new(self.task_enc.forward(zc.view()), self.shape.task_latent, eps_task);
        let pred = self.task_dec.forward(lat.z.view());
        terms.task = lat.kl();
        let mut dpred = Array2::zeros(pred.raw_dim());
        for b in 0..batch {
            let a = answers[b];
            if correct[b] >= a.nrows() {
                return Err(Error::Config(format!(
                    "correct index {} out of {} answers",
                    correct[b],
                    a.nrows()
                )));
            }
            let others: Vec<usize> = (0..a.nrows()).filter(|&i| i != correct[b]).collect();
            let (l, g) = max_margin(pred.row(b), a.row(correct[b]), a.select(Axis(0), &others).view())?;
            terms.task += l;
            dpred.row_mut(b).assign(&g);
        }

        let mut grad = self.zeros_like();
        let dzs = self
            .task_dec
            .backward(lat.z.view(), dpred.view(), &mut grad.task_dec, true)
            .unwrap();
        let de = lat.backward(&dzs);
        let dzc = self
            .task_enc
            .backward(zc.view(), de.view(), &mut grad.task_enc, true)
            .unwrap();
        let dz = dzc
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch * rows, self.shape.sentence.latent))
            .expect("contiguous");
        self.sent.backward(&sp, &dout, Some(&dz), &mut grad.sent);
        Ok((terms, grad))
    }
}

impl<T: Real> Params<T> for TwoLevelVae<T> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, T>> {
        let mut v = self.sent.tensors();
        v.extend(self.task_enc.tensors());
        v.extend(self.task_dec.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        let mut v = self.sent.tensors_mut();
        v.extend(self.task_enc.tensors_mut());
        v.extend(self.task_dec.tensors_mut());
        v
    }
    fn names(&self) -> Vec<String> {
        prefixed(&[
            ("sent", &self.sent.names()),
            ("task_enc", &self.task_enc.names()),
            ("task_dec", &self.task_dec.names()),
        ])
    }
}

fn stack_contexts(set: &EmbeddedSet, idx: &[usize]) -> Array2<f32> {
    let views: Vec<_> = idx.iter().map(|&i| set.items[i].context.view()).collect();
    concatenate(Axis(0), &views).expect("same dim")
}

fn check_set(shape: &TwoLevelShape, set: &EmbeddedSet) -> Result<()> {
    if set.dim != shape.sentence.dim() {
        return Err(Error::Config(format!(
            "embeddings have dim {}, the model expects {}",
            set.dim,
            shape.sentence.dim()
        )));
    }
    if let Some(it) = set.items.iter().find(|i| i.context.nrows() != shape.rows) {
        return Err(Error::Config(format!(
            "{} has {} context rows",
            it.id,
            it.context.nrows()
        )));
    }
    Ok(())
}

/// Mean loss terms at `z = μ` and answer predictions.
pub fn evaluate_two_level(model: &TwoLevelVae<f32>, set: &EmbeddedSet) -> Result<(LossTerms<f64>, Vec<Prediction>)> {
    check_set(&model.shape, set)?;
    let mut terms = LossTerms {
        sentence: 0.0,
        task: 0.0,
    };
    let mut preds = Vec::with_capacity(set.items.len());
    let all: Vec<usize> = (0..set.items.len()).collect();
    for idx in all.chunks(128) {
        let x = stack_contexts(set, idx);
        let answers: Vec<_> = idx.iter().map(|&i| set.items[i].answers.view()).collect();
        let correct: Vec<_> = idx.iter().map(|&i| set.items[i].correct).collect();
        let (t, _) = model.loss_grad(x.view(), &answers, &correct, None, None)?;
        terms.sentence += t.sentence as f64;
        terms.task += t.task as f64;
        let out = model.forward(x.view(), None, None)?;
        for (a, p) in answers.iter().zip(out.answer.outer_iter()) {
            preds.push(Prediction::from_scores(a.dot(&p).to_vec()));
        }
    }
    let n = set.items.len().max(1) as f64;
    terms.sentence /= n;
    terms.task /= n;
    Ok((terms, preds))
}

/// Trains both levels jointly, from scratch or from a trained sentence model.
pub fn train_two_level(
    train: &EmbeddedSet,
    dev: Option<&EmbeddedSet>,
    shape: TwoLevelShape,
    cfg: &TrainConfig,
    warm_start: Option<&SentenceVae<f32>>,
) -> Result<(TwoLevelVae<f32>, Vec<EpochLog>)> {
    cfg.check()?;
    shape.sentence.check()?;
    check_set(&shape, train)?;
    if train.items.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut model = TwoLevelVae::init(shape, &mut seed::stream(cfg.seed, "vae-two-level:init"));
    if let Some(s) = warm_start {
        if s.shape != shape.sentence {
            return Err(Error::Config("warm-start sentence model has a different shape".into()));
        }
        model.sent = s.clone();
    }
    let mut adam = Adam::new(cfg.adam(), &model);
    let mut log = Vec::with_capacity(cfg.epochs);
    let (rows, sl, tl) = (shape.rows, shape.sentence.latent, shape.task_latent);
    for epoch in 1..=cfg.epochs {
        let order = epoch_order(train.items.len(), cfg.seed, "vae-two-level", epoch);
        let mut noise = seed::stream(cfg.seed, &format!("vae-two-level:sample:{epoch}"));
        let (mut sent_total, mut task_total) = (0.0, 0.0);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let eps_s = draw_eps(&mut noise, idx.len() * rows, sl);
            let eps_t = draw_eps(&mut noise, idx.len(), tl);
            let parts = par::map_shards(idx.len(), cfg.threads, |r| {
                let part = &idx[r.clone()];
                let x = stack_contexts(train, part);
                let answers: Vec<_> = part.iter().map(|&i| train.items[i].answers.view()).collect();
                let correct: Vec<_> = part.iter().map(|&i| train.items[i].correct).collect();
                model.loss_grad(
                    x.view(),
                    &answers,
                    &correct,
                    Some(eps_s.slice(s![r.start * rows..r.end * rows, ..])),
                    Some(eps_t.slice(s![r, ..])),
                )
            })?;
            let mut terms = LossTerms {
                sentence: 0.0f32,
                task: 0.0,
            };
            let mut grads = Vec::with_capacity(parts.len());
            for (t, g) in parts {
                terms.sentence += t.sentence;
                terms.task += t.task;
                grads.push((0.0f32, g));
            }
            let (_, mut grad) = reduce(grads);
            finite(terms.total() as f64, epoch, b + 1)?;
            sent_total += terms.sentence as f64;
            task_total += terms.task as f64;
            grad.scale(1.0 / idx.len() as f32);
            adam.step(&mut model, &grad);
        }
        let n = train.items.len() as f64;
        let mut line = EpochLog::new(epoch, (sent_total + task_total) / n);
        line.train_sentence_loss = Some(sent_total / n);
        line.train_task_loss = Some(task_total / n);
        if let Some(dev) = dev.filter(|d| !d.items.is_empty()) {
            let (t, preds) = evaluate_two_level(&model, dev)?;
            let gold: Vec<_> = dev.items.iter().map(|i| i.correct).collect();
            let s = f1(&preds.iter().map(|p| p.chosen).collect::<Vec<_>>(), &gold)?;
            line.dev_loss = Some(t.total());
            line.dev_accuracy = Some(s.accuracy);
            line.dev_f1 = Some(s.f1);
        }
        log.push(line);
    }
    Ok((model, log))
}
