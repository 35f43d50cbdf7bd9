use ndarray::{Array1, ArrayView1, ArrayView2};

use super::Real;
use crate::error::{Error, Result};

pub const LOGVAR_MIN: f64 = -20.0;
pub const LOGVAR_MAX: f64 = 2.0;

pub fn score<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "score of vectors with dims {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.dot(&b))
}

/// Sum over wrong answers of `max(0, 1 − s_c + s_i)`, with its gradient in `pred`.
pub fn margin_loss<T: Real>(
    pred: ArrayView1<'_, T>,
    answers: ArrayView2<'_, T>,
    correct: usize,
) -> Result<(T, Array1<T>)> {
    if answers.nrows() < 2 {
        return Err(Error::Config("the margin loss needs at least two answers".into()));
    }
    if correct >= answers.nrows() {
        return Err(Error::Config(format!(
            "correct index {correct} out of {} answers",
            answers.nrows()
        )));
    }
    if answers.ncols() != pred.len() {
        return Err(Error::Config(format!(
            "answers of dim {}, prediction of dim {}",
            answers.ncols(),
            pred.len()
        )));
    }
    let scores = answers.dot(&pred);
    let sc = scores[correct];
    let mut loss = T::zero();
    let mut grad = Array1::zeros(pred.len());
    for (i, s) in scores.iter().enumerate() {
        if i == correct {
            continue;
        }
        let h = T::one() - sc + *s;
        if h > T::zero() {
            loss += h;
            grad += &answers.row(i);
            grad -= &answers.row(correct);
        }
    }
    Ok((loss, grad))
}

/// `max(0, 1 − score(pred, pos) + mean_j score(pred, neg_j))`, with its gradient in `pred`.
pub fn max_margin<T: Real>(
    pred: ArrayView1<'_, T>,
    pos: ArrayView1<'_, T>,
    negs: ArrayView2<'_, T>,
) -> Result<(T, Array1<T>)> {
    if negs.nrows() == 0 {
        return Err(Error::Config("max-margin needs at least one negative".into()));
    }
    if pos.len() != pred.len() || negs.ncols() != pred.len() {
        return Err(Error::Config("max-margin operands differ in dim".into()));
    }
    let n = T::lit(negs.nrows() as f64);
    let neg_mean = negs.sum_axis(ndarray::Axis(0)) / n;
    let h = T::one() - pred.dot(&pos) + pred.dot(&neg_mean);
    if h > T::zero() {
        Ok((h, neg_mean - pos))
    } else {
        Ok((T::zero(), Array1::zeros(pred.len())))
    }
}

/// KL divergence from `N(μ, diag σ²)` to `N(0, I)`, with gradients in `μ` and `logσ²`.
pub fn kl_standard_normal<T: Real>(mu: &[T], logvar: &[T]) -> (T, Vec<T>, Vec<T>) {
    let half = T::lit(0.5);
    let mut kl = T::zero();
    let mut dlv = Vec::with_capacity(mu.len());
    for (m, lv) in mu.iter().zip(logvar) {
        kl += -half * (T::one() + *lv - *m * *m - lv.exp());
        dlv.push(half * (lv.exp() - T::one()));
    }
    (kl, mu.to_vec(), dlv)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: Real>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array2};
    use proptest::prelude::*;

    #[test]
    fn score_values() {
        assert_eq!(
            score(arr1(&[1.0f64, 2.0]).view(), arr1(&[3.0, 4.0]).view()).unwrap(),
            11.0
        );
        assert_eq!(
            score(arr1(&[1.0f64, 0.0]).view(), arr1(&[0.0, 1.0]).view()).unwrap(),
            0.0
        );
        assert!(score(arr1(&[1.0f64]).view(), arr1(&[1.0, 2.0]).view()).is_err());
    }

    #[test]
    fn margin_values() {
        // pred = e0; answers score exactly their first coordinate
        let pred = arr1(&[1.0f64, 0.0]);
        let mut a = Array2::zeros((8, 2));
        a[[0, 0]] = 1.0;
        assert!(margin_loss(pred.view(), a.view(), 0).unwrap().0.abs() < 1e-9);
        let z = Array2::<f64>::zeros((8, 2));
        assert!((margin_loss(pred.view(), z.view(), 0).unwrap().0 - 7.0).abs() < 1e-9);
        let a = arr2(&[[0.5, 0.0], [0.2, 0.0], [-0.3, 0.0]]);
        assert!((margin_loss(pred.view(), a.view(), 0).unwrap().0 - 0.9).abs() < 1e-9);
        assert!(margin_loss(pred.view(), a.view(), 3).is_err());
    }

    #[test]
    fn max_margin_values() {
        let pred = arr1(&[1.0f64, 0.0]);
        let negs = Array2::<f64>::zeros((7, 2));
        assert!(
            max_margin(pred.view(), arr1(&[1.0, 0.0]).view(), negs.view())
                .unwrap()
                .0
                .abs()
                < 1e-9
        );
        assert!(
            (max_margin(pred.view(), arr1(&[0.0, 0.0]).view(), negs.view())
                .unwrap()
                .0
                - 1.0)
                .abs()
                < 1e-9
        );
        let mut negs = Array2::<f64>::zeros((7, 2));
        negs[[0, 0]] = 0.7;
        negs[[1, 0]] = 0.7;
        let l = max_margin(pred.view(), arr1(&[0.5, 0.0]).view(), negs.view())
            .unwrap()
            .0;
        assert!((l - 0.7).abs() < 1e-9, "{l}");
        assert!(max_margin(pred.view(), pred.view(), Array2::zeros((0, 2)).view()).is_err());
    }

    #[test]
    fn kl_values() {
        assert!(kl_standard_normal(&[0.0f64; 5], &[0.0; 5]).0.abs() < 1e-9);
        let kl = kl_standard_normal(&[1.0f64, 0.0, 0.0, 0.0, 0.0], &[0.0; 5]).0;
        assert!((kl - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ties_pick_the_lowest_index() {
        assert_eq!(argmax(&[0.1f64, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5f64; 4]), 0);
    }

    proptest! {
        #[test]
        fn losses_are_non_negative(
            mu in proptest::collection::vec(-5.0f64..5.0, 5),
            lv in proptest::collection::vec(LOGVAR_MIN..LOGVAR_MAX, 5),
            p in proptest::collection::vec(-2.0f64..2.0, 4),
            a in proptest::collection::vec(-2.0f64..2.0, 12),
        ) {
            prop_assert!(kl_standard_normal(&mu, &lv).0 >= 0.0);
            let pred = Array1::from(p);
            let ans = Array2::from_shape_vec((3, 4), a).unwrap();
            prop_assert!(margin_loss(pred.view(), ans.view(), 1).unwrap().0 >= 0.0);
            prop_assert!(max_margin(pred.view(), ans.row(0), ans.slice(ndarray::s![1.., ..])).unwrap().0 >= 0.0);
        }

        #[test]
        fn margin_zero_iff_separated(s in proptest::collection::vec(-3.0f64..3.0, 5)) {
            // one-hot answers make each score a coordinate of pred
            let pred = Array1::from(s.clone());
            let ans = Array2::<f64>::eye(5);
            let l = margin_loss(pred.view(), ans.view(), 0).unwrap().0;
            let separated = s[1..].iter().all(|x| s[0] - x >= 1.0);
            prop_assert_eq!(l == 0.0, separated);
        }
    }
}
