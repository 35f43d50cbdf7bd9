//! Feed-forward baseline: the 7 context vectors are concatenated and compressed through three
//! dense layers into a predicted answer vector, trained with the summed hinge ranking loss.

use ndarray::{Array2, ArrayView2, ArrayViewD, ArrayViewMutD};
use serde::{Deserialize, Serialize};

use super::{epoch_order, finite, EpochLog, TrainConfig};
use crate::embedding::{EmbeddedInstance, EmbeddedSet};
use crate::error::{Error, Result};
use crate::eval::{f1, Prediction};
use crate::nn::{margin_loss, reduce, relu, relu_backward, Adam, Linear, Params, Real};
use crate::par;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FfnnShape {
    pub rows: usize,
    pub dim: usize,
    pub hidden: usize,
}

impl Default for FfnnShape {
    /// 7·768 → 3.5·768 → 3.5·768 → 768
    fn default() -> FfnnShape {
        FfnnShape {
            rows: 7,
            dim: 768,
            hidden: 2688,
        }
    }
}

impl FfnnShape {
    pub fn input(&self) -> usize {
        self.rows * self.dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ffnn<T> {
    pub shape: FfnnShape,
    pub l1: Linear<T>,
    pub l2: Linear<T>,
    pub l3: Linear<T>,
}

struct Pass<T> {
    a1: Array2<T>,
    h1: Array2<T>,
    a2: Array2<T>,
    h2: Array2<T>,
    out: Array2<T>,
}

impl<T: Real> Ffnn<T> {
    pub fn zeros(shape: FfnnShape) -> Ffnn<T> {
        Ffnn {
            shape,
            l1: Linear::zeros(shape.input(), shape.hidden),
            l2: Linear::zeros(shape.hidden, shape.hidden),
            l3: Linear::zeros(shape.hidden, shape.dim),
        }
    }

    pub fn init(shape: FfnnShape, seed: u64) -> Ffnn<T> {
        let mut rng = seed::stream(seed, "ffnn:init");
        Ffnn {
            shape,
            l1: Linear::glorot(shape.input(), shape.hidden, &mut rng),
            l2: Linear::glorot(shape.hidden, shape.hidden, &mut rng),
            l3: Linear::glorot(shape.hidden, shape.dim, &mut rng),
        }
    }

    fn pass(&self, x: ArrayView2<'_, T>) -> Pass<T> {
        let a1 = self.l1.forward(x);
        let h1 = relu(&a1);
        let a2 = self.l2.forward(h1.view());
        let h2 = relu(&a2);
        let out = self.l3.forward(h2.view());
        Pass { a1, h1, a2, h2, out }
    }

    fn check_input(&self, x: ArrayView2<'_, T>) -> Result<()> {
        if x.ncols() != self.shape.input() {
            return Err(Error::Config(format!(
                "ffnn input has {} values per item, expected {}",
                x.ncols(),
                self.shape.input()
            )));
        }
        Ok(())
    }

    /// (batch, rows·dim) → (batch, dim) predicted answer vectors.
    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(x)?;
        Ok(self.pass(x).out)
    }

    /// Summed margin loss over the batch and its gradient.
    pub fn loss_grad(
        &self,
        x: ArrayView2<'_, T>,
        answers: &[ArrayView2<'_, T>],
        correct: &[usize],
    ) -> Result<(T, Ffnn<T>)> {
        self.check_input(x)?;
        let p = self.pass(x);
        let mut dout = Array2::zeros(p.out.raw_dim());
        let mut loss = T::zero();
        for (b, (a, c)) in answers.iter().zip(correct).enumerate() {
            let (l, g) = margin_loss(p.out.row(b), *a, *c)?;
            loss += l;
            dout.row_mut(b).assign(&g);
        }
        let mut grad = self.zeros_like();
        let dh2 = self.l3.backward(p.h2.view(), dout.view(), &mut grad.l3, true).unwrap();
        let da2 = relu_backward(&p.a2, dh2);
        let dh1 = self.l2.backward(p.h1.view(), da2.view(), &mut grad.l2, true).unwrap();
        let da1 = relu_backward(&p.a1, dh1);
        self.l1.backward(x, da1.view(), &mut grad.l1, false);
        Ok((loss, grad))
    }
}

impl<T: Real> Params<T> for Ffnn<T> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, T>> {
        let mut v = self.l1.tensors();
        v.extend(self.l2.tensors());
        v.extend(self.l3.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        let mut v = self.l1.tensors_mut();
        v.extend(self.l2.tensors_mut());
        v.extend(self.l3.tensors_mut());
        v
    }
    fn names(&self) -> Vec<String> {
        ["l1", "l2", "l3"]
            .iter()
            .flat_map(|l| [format!("{l}.w"), format!("{l}.b")])
            .collect()
    }
}

fn inputs(items: &[&EmbeddedInstance], width: usize) -> Array2<f32> {
    let mut x = Array2::zeros((items.len(), width));
    for (mut row, it) in x.outer_iter_mut().zip(items) {
        row.iter_mut().zip(it.context.iter()).for_each(|(r, v)| *r = *v);
    }
    x
}

fn check_set(shape: &FfnnShape, set: &EmbeddedSet) -> Result<()> {
    if set.dim != shape.dim {
        return Err(Error::Config(format!(
            "embeddings have dim {}, the model expects {}",
            set.dim, shape.dim
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

fn batch_loss_grad(model: &Ffnn<f32>, items: &[&EmbeddedInstance], shards: usize) -> Result<(f32, Ffnn<f32>)> {
    let parts = par::map_shards(items.len(), shards, |r| {
        let part = &items[r];
        let x = inputs(part, model.shape.input());
        let answers: Vec<_> = part.iter().map(|i| i.answers.view()).collect();
        let correct: Vec<_> = part.iter().map(|i| i.correct).collect();
        model.loss_grad(x.view(), &answers, &correct)
    })?;
    Ok(reduce(parts))
}

/// Mean loss and predictions over a set.
pub fn evaluate(model: &Ffnn<f32>, set: &EmbeddedSet) -> Result<(f64, Vec<Prediction>)> {
    check_set(&model.shape, set)?;
    let mut loss = 0.0;
    let mut preds = Vec::with_capacity(set.items.len());
    for chunk in set.items.chunks(256) {
        let refs: Vec<_> = chunk.iter().collect();
        let out = model.forward(inputs(&refs, model.shape.input()).view())?;
        for (it, p) in chunk.iter().zip(out.outer_iter()) {
            loss += margin_loss(p, it.answers.view(), it.correct)?.0 as f64;
            preds.push(Prediction::from_scores(it.answers.dot(&p).to_vec()));
        }
    }
    Ok((loss / set.items.len().max(1) as f64, preds))
}

pub fn train(
    train: &EmbeddedSet,
    dev: Option<&EmbeddedSet>,
    shape: FfnnShape,
    cfg: &TrainConfig,
) -> Result<(Ffnn<f32>, Vec<EpochLog>)> {
    train_from(Ffnn::init(shape, cfg.seed), train, dev, cfg)
}

/// Trains starting from `model`.
pub fn train_from(
    mut model: Ffnn<f32>,
    train: &EmbeddedSet,
    dev: Option<&EmbeddedSet>,
    cfg: &TrainConfig,
) -> Result<(Ffnn<f32>, Vec<EpochLog>)> {
    cfg.check()?;
    check_set(&model.shape, train)?;
    if train.items.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut adam = Adam::new(cfg.adam(), &model);
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let order = epoch_order(train.items.len(), cfg.seed, "ffnn", epoch);
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let items: Vec<_> = idx.iter().map(|&i| &train.items[i]).collect();
            let (loss, mut grad) = batch_loss_grad(&model, &items, cfg.threads)?;
            finite(loss as f64, epoch, b + 1)?;
            total += loss as f64;
            grad.scale(1.0 / items.len() as f32);
            adam.step(&mut model, &grad);
        }
        let mut line = EpochLog::new(epoch, total / train.items.len() as f64);
        if let Some(dev) = dev.filter(|d| !d.items.is_empty()) {
            let (loss, preds) = evaluate(&model, dev)?;
            let gold: Vec<_> = dev.items.iter().map(|i| i.correct).collect();
            let s = f1(&preds.iter().map(|p| p.chosen).collect::<Vec<_>>(), &gold)?;
            line.dev_loss = Some(loss);
            line.dev_accuracy = Some(s.accuracy);
            line.dev_f1 = Some(s.f1);
        }
        log.push(line);
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck;
    use ndarray::{arr2, Array1};

    fn tiny() -> FfnnShape {
        FfnnShape {
            rows: 2,
            dim: 3,
            hidden: 4,
        }
    }

    #[test]
    fn zero_model_predicts_zero() {
        let m = Ffnn::<f64>::zeros(tiny());
        let out = m.forward(Array2::ones((2, 6)).view()).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
        assert!(m.forward(Array2::ones((1, 5)).view()).is_err());
    }

    #[test]
    fn affine_chain_by_hand() {
        // identity blocks with positive inputs keep every ReLU open
        let shape = FfnnShape {
            rows: 1,
            dim: 3,
            hidden: 3,
        };
        let mut m = Ffnn::<f64>::zeros(shape);
        m.l1.w = Array2::eye(3) * 2.0;
        m.l1.b = Array1::from(vec![1.0, 0.0, 0.0]);
        m.l2.w = Array2::eye(3);
        m.l3.w = arr2(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        m.l3.b = Array1::from(vec![0.0, 0.0, -1.0]);
        let out = m.forward(arr2(&[[1.0, 2.0, 3.0]]).view()).unwrap();
        assert_eq!(out, arr2(&[[3.0, 6.0, 3.0]]));
    }

    #[test]
    fn every_input_coordinate_matters() {
        let m = Ffnn::<f64>::init(tiny(), 3);
        let mut rng = seed::stream(4, "x");
        let x = Array2::from_shape_simple_fn((1, 6), || crate::nn::uniform::<f64>(&mut rng, 1.0));
        let base = m.forward(x.view()).unwrap();
        for i in 0..6 {
            let mut y = x.clone();
            y[[0, i]] += 1e-3;
            let d = (&m.forward(y.view()).unwrap() - &base).mapv(f64::abs).sum();
            assert!(d > 0.0, "input {i} has no effect");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for s in 0..4 {
            let shape = FfnnShape {
                rows: 3,
                dim: 4,
                hidden: 5,
            };
            let m = Ffnn::<f64>::init(shape, s);
            let mut rng = seed::stream(s, "data");
            let x = Array2::from_shape_simple_fn((3, 12), || crate::nn::uniform::<f64>(&mut rng, 1.0));
            let answers: Vec<Array2<f64>> = (0..3)
                .map(|_| Array2::from_shape_simple_fn((5, 4), || crate::nn::uniform::<f64>(&mut rng, 1.0)))
                .collect();
            let views: Vec<_> = answers.iter().map(|a| a.view()).collect();
            let correct = [0, 2, 4];
            let (_, grad) = m.loss_grad(x.view(), &views, &correct).unwrap();
            let r = gradcheck::check(
                &m,
                &grad,
                |p| p.loss_grad(x.view(), &views, &correct).unwrap().0,
                1e-6,
                1e-4,
            );
            assert!(r.max_rel_error < 1e-4, "{r:?}");
            assert!(r.checked > r.kinks * 10, "{r:?}");
        }
    }
}
