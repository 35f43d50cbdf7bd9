//! Scoring of solver predictions: accuracy and F1, spread over runs, and the distribution of
//! chosen answers over error labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BlmInstance;

/// Outcome of picking one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub chosen: usize,
    pub scores: Vec<f32>,
    /// Another candidate had the same top score and lost on index order.
    pub tie: bool,
}

impl Prediction {
    pub fn from_scores(scores: Vec<f32>) -> Prediction {
        let chosen = crate::nn::argmax(&scores);
        let tie = scores
            .iter()
            .enumerate()
            .any(|(i, s)| i != chosen && *s == scores[chosen]);
        Prediction { chosen, scores, tie }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// F1 of the "is the correct answer" class over all candidates. One pick per item means
    /// every miss is one false positive and one false negative, so this equals accuracy.
    pub f1: f64,
}

pub fn f1(predicted: &[usize], gold: &[usize]) -> Result<Scores> {
    if predicted.len() != gold.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} gold answers",
            predicted.len(),
            gold.len()
        )));
    }
    let n = predicted.len();
    let tp = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    let (fp, fneg) = (n - tp, n - tp);
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
    };
    Ok(Scores {
        n,
        correct: tp,
        accuracy: if n == 0 { 0.0 } else { tp as f64 / n as f64 },
        f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub sd: f64,
    pub runs: usize,
}

/// Mean and sample standard deviation.
pub fn spread(values: &[f64]) -> Spread {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n.max(1) as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Spread { mean, sd, runs: n }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
}

impl ErrorDistribution {
    pub fn share(&self, label: &str) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(label).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,count,share\n");
        for (k, v) in &self.counts {
            s.push_str(&format!("{k},{v},{:.6}\n", self.share(k)));
        }
        s
    }
}

/// Counts chosen answers by label.
pub fn error_distribution(predicted: &[usize], instances: &[BlmInstance]) -> Result<ErrorDistribution> {
    if predicted.len() != instances.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} instances",
            predicted.len(),
            instances.len()
        )));
    }
    let mut d = ErrorDistribution::default();
    for (p, inst) in predicted.iter().zip(instances) {
        let a = inst
            .answers
            .get(*p)
            .ok_or_else(|| Error::Config(format!("{}: answer index {p} out of range", inst.id)))?;
        *d.counts.entry(a.label.as_str().to_string()).or_default() += 1;
        d.total += 1;
    }
    Ok(d)
}
