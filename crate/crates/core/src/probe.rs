//! Latent probing of a trained sentence model: unit traversals with pattern confusion
//! matrices, 2-D principal-component projections, and cluster quality of latent means.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddedBank;
use crate::error::{Error, Result};
use crate::eval::Prediction;
use crate::model::PatternKey;
use crate::solver::vae::{latent_means, SentenceModel, Triple};

/// Counts of (true pattern, predicted pattern), indexed by the report's pattern list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    fn new(n: usize) -> Confusion {
        Confusion {
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total().max(1) as f64
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Share of items whose prediction crossed between the two members of a pair.
    pub fn pair_mass(&self, pairs: &[(usize, usize)]) -> f64 {
        let crossed: usize = pairs.iter().map(|&(a, b)| self.counts[a][b] + self.counts[b][a]).sum();
        crossed as f64 / self.total().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalReport {
    pub patterns: Vec<PatternKey>,
    /// Predictions with every unit at its mean.
    pub baseline: Confusion,
    /// `values[u][k]` is the value unit `u` takes at step `k`.
    pub values: Vec<Vec<f32>>,
    /// `grid[u][k]`: confusion with unit `u` set to `values[u][k]`.
    pub grid: Vec<Vec<Confusion>>,
}

impl TraversalReport {
    pub fn index(&self, p: &PatternKey) -> Option<usize> {
        self.patterns.binary_search(p).ok()
    }

    /// Pairs of patterns whose keys differ in exactly one token, optionally only tokens that
    /// start with `token_prefix` (e.g. `pp2` for the second attractor's number).
    pub fn one_token_pairs(&self, token_prefix: Option<&str>) -> Vec<(usize, usize)> {
        let toks: Vec<Vec<&str>> = self.patterns.iter().map(|p| p.as_str().split(' ').collect()).collect();
        let mut out = Vec::new();
        for i in 0..toks.len() {
            for j in i + 1..toks.len() {
                if toks[i].len() != toks[j].len() {
                    continue;
                }
                let diff: Vec<usize> = (0..toks[i].len()).filter(|&k| toks[i][k] != toks[j][k]).collect();
                if diff.len() == 1 && token_prefix.is_none_or(|p| toks[i][diff[0]].starts_with(p)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("unit,step,value,true_pattern,predicted_pattern,count\n");
        let mut emit = |unit: &str, step: &str, value: &str, c: &Confusion| {
            for (i, row) in c.counts.iter().enumerate() {
                for (j, n) in row.iter().enumerate() {
                    if *n > 0 {
                        s.push_str(&format!(
                            "{unit},{step},{value},{},{},{n}\n",
                            self.patterns[i], self.patterns[j]
                        ));
                    }
                }
            }
        };
        emit("none", "none", "mean", &self.baseline);
        for (u, row) in self.grid.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                emit(&u.to_string(), &k.to_string(), &format!("{:.6}", self.values[u][k]), c);
            }
        }
        s
    }
}

fn choose(bank: &EmbeddedBank, triples: &[Triple], decoded: &Array2<f32>) -> Vec<usize> {
    triples
        .iter()
        .zip(decoded.outer_iter())
        .map(|(t, d)| {
            let cands = bank.vectors.select(Axis(0), &t.candidates);
            t.candidates[Prediction::from_scores(cands.dot(&d).to_vec()).chosen]
        })
        .collect()
}

fn confusion(
    bank: &EmbeddedBank,
    triples: &[Triple],
    chosen: &[usize],
    index: &BTreeMap<&PatternKey, usize>,
) -> Confusion {
    let mut c = Confusion::new(index.len());
    for (t, pick) in triples.iter().zip(chosen) {
        c.counts[index[&bank.patterns[t.input]]][index[&bank.patterns[*pick]]] += 1;
    }
    c
}

/// Sweeps each latent unit over `steps` evenly spaced values of its training range while the
/// other units stay at the item's mean, and tabulates the predicted patterns.
pub fn traverse(
    model: &SentenceModel,
    bank: &EmbeddedBank,
    triples: &[Triple],
    steps: usize,
) -> Result<TraversalReport> {
    let ranges = model
        .ranges
        .as_ref()
        .ok_or_else(|| Error::Probe("the model carries no latent ranges; retrain or re-export it".into()))?;
    if steps == 0 {
        return Err(Error::Probe("at least one traversal step is required".into()));
    }
    let mut patterns: Vec<PatternKey> = bank.patterns.clone();
    patterns.sort();
    patterns.dedup();
    let index: BTreeMap<&PatternKey, usize> = patterns.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let inputs = bank
        .vectors
        .select(Axis(0), &triples.iter().map(|t| t.input).collect::<Vec<_>>());
    let mu = latent_means(&model.vae, inputs.view())?;
    let decode = |z: &Array2<f32>| -> Result<Array2<f32>> { model.vae.decode(z.view()) };
    let baseline = confusion(bank, triples, &choose(bank, triples, &decode(&mu)?), &index);
    let units = model.vae.shape.latent;
    let values: Vec<Vec<f32>> = (0..units).map(|u| ranges.values(u, steps)).collect();
    let mut grid = Vec::with_capacity(units);
    for (u, vals) in values.iter().enumerate() {
        let mut row = Vec::with_capacity(steps);
        for v in vals {
            let mut z = mu.clone();
            z.column_mut(u).fill(*v);
            row.push(confusion(bank, triples, &choose(bank, triples, &decode(&z)?), &index));
        }
        grid.push(row);
    }
    Ok(TraversalReport {
        patterns,
        baseline,
        values,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// (n, 2)
    pub coords: Array2<f64>,
    /// Principal axes as rows, (2, dim).
    pub axes: Array2<f64>,
    pub variances: [f64; 2],
}

/// Projects rows onto the top two principal components of their covariance. Each axis is
/// signed so its largest-magnitude coordinate is positive.
pub fn pca2(x: ArrayView2<'_, f64>) -> Result<Projection> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::Probe(format!("a projection needs at least 2 points, got {n}")));
    }
    if d < 2 {
        return Err(Error::Probe("a 2-D projection needs at least 2 dimensions".into()));
    }
    let mean = x.mean_axis(Axis(0)).unwrap();
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = Array2::zeros((2, d));
    for (k, &c) in order.iter().take(2).enumerate() {
        let col = eig.eigenvectors.column(c);
        let big = (0..d).max_by(|&i, &j| col[i].abs().total_cmp(&col[j].abs())).unwrap();
        let sign = if col[big] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            axes[[k, i]] = sign * col[i];
        }
    }
    Ok(Projection {
        coords: centered.dot(&axes.t()),
        axes,
        variances: [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]],
    })
}

pub fn projection_csv(ids: &[String], patterns: &[PatternKey], p: &Projection) -> String {
    let mut s = String::from("id,x,y,pattern\n");
    for ((id, pat), row) in ids.iter().zip(patterns).zip(p.coords.outer_iter()) {
        s.push_str(&format!("{id},{:.6},{:.6},{pat}\n", row[0], row[1]));
    }
    s
}

/// Latent means of a bank and their projection.
pub fn project_latents(model: &SentenceModel, bank: &EmbeddedBank) -> Result<(Array2<f64>, Projection)> {
    let mu = latent_means(&model.vae, bank.vectors.view())?.mapv(|v| v as f64);
    let p = pca2(mu.view())?;
    Ok((mu, p))
}

fn dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean silhouette over all points (Euclidean). Points alone in their cluster count as 0.
pub fn silhouette(x: ArrayView2<'_, f64>, labels: &[PatternKey]) -> Result<f64> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::Probe("one label per point is required".into()));
    }
    let mut groups: BTreeMap<&PatternKey, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::Probe("silhouette needs at least two clusters".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = &groups[&labels[i]];
        if own.len() < 2 {
            continue;
        }
        let mean_to = |g: &[usize]| g.iter().map(|&j| dist(x.row(i), x.row(j))).sum::<f64>();
        let a = mean_to(own) / (own.len() - 1) as f64;
        let b = groups
            .iter()
            .filter(|(k, _)| **k != &labels[i])
            .map(|(_, g)| mean_to(g) / g.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        total += if m > 0.0 { (b - a) / m } else { 0.0 };
    }
    Ok(total / n as f64)
}

/// Accuracy of assigning each test point the pattern of the nearest training centroid.
pub fn nearest_centroid(
    train: ArrayView2<'_, f64>,
    train_labels: &[PatternKey],
    test: ArrayView2<'_, f64>,
    test_labels: &[PatternKey],
) -> Result<f64> {
    if train.nrows() != train_labels.len() || test.nrows() != test_labels.len() {
        return Err(Error::Probe("one label per point is required".into()));
    }
    let mut sums: BTreeMap<&PatternKey, (ndarray::Array1<f64>, usize)> = BTreeMap::new();
    for (row, l) in train.outer_iter().zip(train_labels) {
        let e = sums.entry(l).or_insert((ndarray::Array1::zeros(train.ncols()), 0));
        e.0 += &row;
        e.1 += 1;
    }
    let centroids: Vec<(&PatternKey, ndarray::Array1<f64>)> =
        sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    if centroids.is_empty() {
        return Err(Error::Probe("no training points".into()));
    }
    let hits = test
        .outer_iter()
        .zip(test_labels)
        .filter(|(row, l)| {
            let best = centroids
                .iter()
                .min_by(|a, b| dist(row.view(), a.1.view()).total_cmp(&dist(row.view(), b.1.view())))
                .unwrap();
            best.0 == *l
        })
        .count();
    Ok(hits as f64 / test.nrows().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn key(s: &str) -> PatternKey {
        PatternKey(s.into())
    }

    #[test]
    fn pca_recovers_axis_aligned_data() {
        // spread along dims 0 and 1 only, more along 0
        let x = arr2(&[[3.0, 0.0, 0.0], [-3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]]);
        let p = pca2(x.view()).unwrap();
        assert_eq!(p.coords.nrows(), 4);
        for (i, row) in p.coords.outer_iter().enumerate() {
            assert!((row[0].abs() - x[[i, 0]].abs()).abs() < 1e-9);
            assert!((row[1].abs() - x[[i, 1]].abs()).abs() < 1e-9);
        }
        assert!(pca2(arr2(&[[1.0, 2.0]]).view()).is_err());
    }

    #[test]
    fn cluster_measures() {
        let x = arr2(&[[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]]);
        let l = vec![key("a"), key("a"), key("b"), key("b")];
        assert!(silhouette(x.view(), &l).unwrap() > 0.9);
        let swapped = vec![key("a"), key("b"), key("a"), key("b")];
        assert!(silhouette(x.view(), &swapped).unwrap() < 0.0);
        assert_eq!(nearest_centroid(x.view(), &l, x.view(), &l).unwrap(), 1.0);
    }

    #[test]
    fn pairs_and_confusion() {
        let report = TraversalReport {
            patterns: vec![
                key("np-sg pp1-sg pp2-pl"),
                key("np-sg pp1-sg pp2-sg"),
                key("np-sg pp1-pl pp2-sg"),
            ],
            baseline: Confusion {
                counts: vec![vec![2, 1, 0], vec![0, 3, 0], vec![0, 0, 4]],
            },
            values: vec![],
            grid: vec![],
        };
        assert_eq!(report.one_token_pairs(Some("pp2")), vec![(0, 1)]);
        assert_eq!(report.one_token_pairs(None).len(), 2);
        assert_eq!(report.baseline.pair_mass(&[(0, 1)]), 0.1);
        assert_eq!(report.baseline.accuracy(), 0.9);
        assert_eq!(report.baseline.row_sums(), vec![3, 3, 4]);
    }
}
