//! One-vs-rest ridge classifier with cross-validated regularization.
//!
//! Features are standardized with training statistics, labels are encoded as
//! ±1 targets per class, and the intercept is recovered from centered data so
//! it is never penalized. The penalized least-squares problem
//! `min ||Z W - Y||² + alpha ||W||²` is solved in the dual (Gram) form when
//! there are more features than rows and in the primal form otherwise.
//!
//! Cross-validation standardizes once with the full training statistics and
//! re-centers each fold exactly, which lets the dual path reuse a single Gram
//! matrix for every fold and every regularization strength.

pub mod linalg;

use std::collections::BTreeMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, streams};
use linalg::{cholesky_in_place, cholesky_solve, gram};

pub const DEFAULT_ALPHAS: [f64; 4] = [0.001, 0.01, 0.1, 1.0];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Dual when features outnumber rows, primal otherwise.
    #[default]
    Auto,
    Primal,
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub alphas: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverChoice,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            alphas: DEFAULT_ALPHAS.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            solver: SolverChoice::Auto,
        }
    }
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::Config("alpha grid is empty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Config(format!("alpha {a} must be positive and finite")));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub class_labels: Vec<usize>,
    /// One row per class, in standardized feature space.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub alpha: f64,
    /// Mean cross-validated accuracy per grid entry, in grid order.
    pub cv_accuracy: Vec<f64>,
}

impl RidgeModel {
    pub fn num_features(&self) -> usize {
        self.feature_means.len()
    }

    pub fn decision_scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.num_features() {
            return Err(Error::Shape(format!(
                "feature vector has length {}, model expects {}",
                features.len(),
                self.num_features()
            )));
        }
        let z: Vec<f64> = features
            .iter()
            .zip(self.feature_means.iter().zip(&self.feature_scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        Ok(self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| b + w.iter().zip(&z).map(|(w, z)| w * z).sum::<f64>())
            .collect())
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        let scores = self.decision_scores(features)?;
        Ok(self.class_labels[argmax(&scores)])
    }

    pub fn predict_rows(&self, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        features
            .rows()
            .into_iter()
            .map(|row| match row.as_slice() {
                Some(slice) => self.predict(slice),
                None => self.predict(&row.to_vec()),
            })
            .collect()
    }
}

/// Index of the first maximum.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Solves `(F^T F + alpha I) W = F^T Y`.
pub fn solve_primal(f: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, alpha: f64) -> Result<Array2<f64>> {
    check_system(f, y)?;
    let mut a = f.t().dot(&f);
    a.diag_mut().iter_mut().for_each(|d| *d += alpha);
    let mut rhs = f.t().dot(&y);
    factor_and_solve(a, &mut rhs)?;
    Ok(rhs)
}

/// Same minimizer through `W = F^T (F F^T + alpha I)^{-1} Y`.
pub fn solve_dual(f: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, alpha: f64) -> Result<Array2<f64>> {
    check_system(f, y)?;
    let mut k = gram(f);
    k.diag_mut().iter_mut().for_each(|d| *d += alpha);
    let mut coef = y.to_owned();
    factor_and_solve(k, &mut coef)?;
    Ok(f.t().dot(&coef))
}

fn check_system(f: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
    if f.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} target rows",
            f.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

fn factor_and_solve(mut a: Array2<f64>, rhs: &mut Array2<f64>) -> Result<()> {
    cholesky_in_place(&mut a)
        .map_err(|e| Error::Fit(format!("system is not positive definite at pivot {}", e.pivot)))?;
    cholesky_solve(&a, rhs);
    Ok(())
}

/// Assigns rows to folds: each stratum is shuffled and dealt round-robin,
/// continuing the rotation across strata so fold sizes stay balanced.
pub fn stratified_folds(strata: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &s) in strata.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::FOLDS, 0));
    let mut assignment = vec![0; strata.len()];
    let mut offset = 0;
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        for (i, &row) in members.iter().enumerate() {
            assignment[row] = (offset + i) % folds;
        }
        offset = (offset + members.len()) % folds;
    }
    assignment
}

pub fn fit(features: ArrayView2<'_, f64>, labels: &[usize], config: &RidgeConfig) -> Result<RidgeModel> {
    let mut models = fit_heads(features.to_owned(), &[labels], config)?;
    Ok(models.remove(0))
}

struct Head {
    classes: Vec<usize>,
    /// Column range of this head inside the stacked target matrix.
    columns: std::ops::Range<usize>,
    labels: Vec<usize>,
}

/// Fits several classifiers that share one feature matrix (for example the
/// activity and orientation heads). Folds are stratified on the joint label
/// tuple so that a single factorization serves every head; alpha is still
/// selected per head.
pub fn fit_heads(mut features: Array2<f64>, heads: &[&[usize]], config: &RidgeConfig) -> Result<Vec<RidgeModel>> {
    config.validate()?;
    let (n, dim) = features.dim();
    if heads.is_empty() {
        return Err(Error::Fit("no label sets given".into()));
    }
    if n < config.folds {
        return Err(Error::Fit(format!("{n} rows cannot fill {} folds", config.folds)));
    }
    if dim == 0 {
        return Err(Error::Shape("feature matrix has no columns".into()));
    }

    let mut stacked = Vec::new();
    let mut column = 0;
    for labels in heads {
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &l in labels.iter() {
            *counts.entry(l).or_default() += 1;
        }
        if counts.len() < 2 {
            return Err(Error::Fit("labels contain a single class".into()));
        }
        if let Some((class, count)) = counts.iter().find(|(_, &c)| c < config.folds) {
            return Err(Error::Fit(format!(
                "class {class} has {count} rows, fewer than {} folds",
                config.folds
            )));
        }
        let classes: Vec<usize> = counts.keys().copied().collect();
        stacked.push(Head {
            columns: column..column + classes.len(),
            classes,
            labels: labels.to_vec(),
        });
        column += stacked.last().expect("just pushed").classes.len();
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("feature matrix contains non-finite values".into()));
    }

    let (means, scales) = standardize(&mut features);
    let targets = encode_targets(&stacked, n, column);

    let mut joint: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let strata: Vec<usize> = (0..n)
        .map(|i| {
            let key: Vec<usize> = stacked.iter().map(|h| h.labels[i]).collect();
            let next = joint.len();
            *joint.entry(key).or_insert(next)
        })
        .collect();
    let assignment = stratified_folds(&strata, config.folds, config.seed);

    let use_dual = match config.solver {
        SolverChoice::Auto => dim > n,
        SolverChoice::Primal => false,
        SolverChoice::Dual => true,
    };
    let solver = if use_dual {
        Solver::Dual { kernel: gram(features.view()) }
    } else {
        Solver::Primal
    };

    // accuracy[head][alpha]
    let mut accuracy = vec![vec![0.0; config.alphas.len()]; stacked.len()];
    for fold in 0..config.folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let val: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        let scores = solver.validation_scores(&features, &targets, &train, &val, &config.alphas)?;
        for (a, score) in scores.iter().enumerate() {
            for (h, head) in stacked.iter().enumerate() {
                let correct = val
                    .iter()
                    .enumerate()
                    .filter(|(r, &i)| {
                        let row = score.slice(s![*r, head.columns.clone()]);
                        head.classes[argmax(row.as_slice().expect("row slice"))] == head.labels[i]
                    })
                    .count();
                accuracy[h][a] += correct as f64 / val.len() as f64;
            }
        }
    }
    for row in &mut accuracy {
        row.iter_mut().for_each(|v| *v /= config.folds as f64);
    }

    let chosen: Vec<f64> = accuracy.iter().map(|acc| select_alpha(&config.alphas, acc)).collect();
    let all: Vec<usize> = (0..n).collect();
    let mut finals: Vec<(f64, Array2<f64>, Array1<f64>)> = Vec::new();
    for &alpha in &chosen {
        if finals.iter().all(|(a, _, _)| *a != alpha) {
            let (w, b) = solver.fit_weights(&features, &targets, &all, alpha)?;
            finals.push((alpha, w, b));
        }
    }

    Ok(stacked
        .iter()
        .zip(&chosen)
        .zip(accuracy)
        .map(|((head, &alpha), cv_accuracy)| {
            let (_, w, b) = finals.iter().find(|(a, _, _)| *a == alpha).expect("fitted above");
            RidgeModel {
                class_labels: head.classes.clone(),
                weights: head.columns.clone().map(|c| w.column(c).to_vec()).collect(),
                intercepts: head.columns.clone().map(|c| b[c]).collect(),
                feature_means: means.clone(),
                feature_scales: scales.clone(),
                alpha,
                cv_accuracy,
            }
        })
        .collect())
}

/// Highest mean accuracy; ties go to the largest alpha.
fn select_alpha(alphas: &[f64], accuracy: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..alphas.len() {
        if accuracy[i] > accuracy[best] || (accuracy[i] == accuracy[best] && alphas[i] > alphas[best]) {
            best = i;
        }
    }
    alphas[best]
}

/// Standardizes columns in place. Constant columns keep their exact value as
/// the mean and get scale 1, so they become exactly zero.
fn standardize(features: &mut Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = features.nrows() as f64;
    let mut means = Vec::with_capacity(features.ncols());
    let mut scales = Vec::with_capacity(features.ncols());
    for mut col in features.axis_iter_mut(Axis(1)) {
        let first = col[0];
        let (mean, scale) = if col.iter().all(|&v| v == first) {
            (first, 1.0)
        } else {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            (mean, if sd > 0.0 { sd } else { 1.0 })
        };
        col.mapv_inplace(|v| (v - mean) / scale);
        means.push(mean);
        scales.push(scale);
    }
    (means, scales)
}

fn encode_targets(heads: &[Head], n: usize, columns: usize) -> Array2<f64> {
    let mut y = Array2::from_elem((n, columns), -1.0);
    for head in heads {
        for (i, label) in head.labels.iter().enumerate() {
            let c = head.classes.binary_search(label).expect("label drawn from classes");
            y[[i, head.columns.start + c]] = 1.0;
        }
    }
    y
}

fn column_means(m: ArrayView2<'_, f64>) -> Array1<f64> {
    m.mean_axis(Axis(0)).expect("at least one row")
}

enum Solver {
    Primal,
    Dual { kernel: Array2<f64> },
}

impl Solver {
    /// Scores for `val` rows under each alpha, fitting on `train` rows.
    fn validation_scores(
        &self,
        z: &Array2<f64>,
        y: &Array2<f64>,
        train: &[usize],
        val: &[usize],
        alphas: &[f64],
    ) -> Result<Vec<Array2<f64>>> {
        let y_train = y.select(Axis(0), train);
        let y_mean = column_means(y_train.view());
        let y_centered = &y_train - &y_mean;
        match self {
            Solver::Dual { kernel } => {
                let (k_train, k_val) = centered_kernels(kernel, train, val);
                alphas
                    .iter()
                    .map(|&alpha| {
                        let mut a = k_train.clone();
                        a.diag_mut().iter_mut().for_each(|d| *d += alpha);
                        let mut coef = y_centered.clone();
                        factor_and_solve(a, &mut coef)?;
                        Ok(k_val.dot(&coef) + &y_mean)
                    })
                    .collect()
            }
            Solver::Primal => {
                let z_train = z.select(Axis(0), train);
                let m = column_means(z_train.view());
                let zc = &z_train - &m;
                let zv = &z.select(Axis(0), val) - &m;
                let cov = zc.t().dot(&zc);
                let rhs = zc.t().dot(&y_centered);
                alphas
                    .iter()
                    .map(|&alpha| {
                        let mut a = cov.clone();
                        a.diag_mut().iter_mut().for_each(|d| *d += alpha);
                        let mut w = rhs.clone();
                        factor_and_solve(a, &mut w)?;
                        Ok(zv.dot(&w) + &y_mean)
                    })
                    .collect()
            }
        }
    }

    /// Weights `(dim x classes)` and intercepts for rows `rows`.
    fn fit_weights(
        &self,
        z: &Array2<f64>,
        y: &Array2<f64>,
        rows: &[usize],
        alpha: f64,
    ) -> Result<(Array2<f64>, Array1<f64>)> {
        let y_rows = y.select(Axis(0), rows);
        let y_mean = column_means(y_rows.view());
        let y_centered = &y_rows - &y_mean;
        let z_mean = if rows.len() == z.nrows() {
            column_means(z.view())
        } else {
            column_means(z.select(Axis(0), rows).view())
        };
        let w = match self {
            Solver::Dual { kernel } => {
                let (mut k, _) = centered_kernels(kernel, rows, &[]);
                k.diag_mut().iter_mut().for_each(|d| *d += alpha);
                let mut coef = y_centered;
                factor_and_solve(k, &mut coef)?;
                // W = (Z_rows - m)^T coef; the columns of coef sum to zero
                let mut w = Array2::zeros((z.ncols(), coef.ncols()));
                if rows.len() == z.nrows() {
                    general_mat_mul(1.0, &z.t(), &coef, 0.0, &mut w);
                } else {
                    let zr = z.select(Axis(0), rows);
                    general_mat_mul(1.0, &zr.t(), &coef, 0.0, &mut w);
                }
                w
            }
            Solver::Primal => {
                let zc = &z.select(Axis(0), rows) - &z_mean;
                let mut a = zc.t().dot(&zc);
                a.diag_mut().iter_mut().for_each(|d| *d += alpha);
                let mut w = zc.t().dot(&y_centered);
                factor_and_solve(a, &mut w)?;
                w
            }
        };
        let intercept = &y_mean - &z_mean.dot(&w);
        Ok((w, intercept))
    }
}

/// Gram blocks after centering on the mean of the `train` rows:
/// `(train x train, val x train)`.
fn centered_kernels(kernel: &Array2<f64>, train: &[usize], val: &[usize]) -> (Array2<f64>, Array2<f64>) {
    let inv = 1.0 / train.len() as f64;
    // r[x] = mean over train of K[x, j]
    let row_mean = |x: usize| -> f64 { train.iter().map(|&j| kernel[[x, j]]).sum::<f64>() * inv };
    let r_train: Vec<f64> = train.iter().map(|&i| row_mean(i)).collect();
    let r_val: Vec<f64> = val.iter().map(|&v| row_mean(v)).collect();
    let g = r_train.iter().sum::<f64>() * inv;

    let k_train = Array2::from_shape_fn((train.len(), train.len()), |(a, b)| {
        kernel[[train[a], train[b]]] - r_train[a] - r_train[b] + g
    });
    let k_val = Array2::from_shape_fn((val.len(), train.len()), |(a, b)| {
        kernel[[val[a], train[b]]] - r_val[a] - r_train[b] + g
    });
    (k_train, k_val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clusters() -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, cx) in [(3usize, -10.0), (8, 10.0)] {
            for _ in 0..20 {
                rows.push(cx + rng.random_range(-1.0..1.0));
                rows.push(rng.random_range(-1.0..1.0));
                labels.push(label);
            }
        }
        (Array2::from_shape_vec((40, 2), rows).unwrap(), labels)
    }

    #[test]
    fn separable_clusters_fit_perfectly_at_every_alpha() {
        let (x, y) = clusters();
        for &alpha in &DEFAULT_ALPHAS {
            let cfg = RidgeConfig { alphas: vec![alpha], ..Default::default() };
            let model = fit(x.view(), &y, &cfg).unwrap();
            assert_eq!(model.class_labels, vec![3, 8]);
            assert_eq!(model.predict_rows(x.view()).unwrap(), y);
        }
    }

    #[test]
    fn antisymmetric_data_splits_at_zero() {
        let x = Array2::from_shape_vec((4, 1), vec![-1.0, -1.0, 1.0, 1.0]).unwrap();
        let cfg = RidgeConfig { alphas: vec![1e-9], folds: 2, ..Default::default() };
        let m = fit(x.view(), &[0, 0, 1, 1], &cfg).unwrap();
        let s = m.decision_scores(&[0.0]).unwrap();
        assert!((s[0] - s[1]).abs() < 1e-9);
        assert_eq!(m.predict(&[-0.01]).unwrap(), 0);
        assert_eq!(m.predict(&[0.01]).unwrap(), 1);
    }

    #[test]
    fn single_class_and_small_classes_are_fit_errors() {
        let (x, _) = clusters();
        assert!(matches!(fit(x.view(), &[1; 40], &RidgeConfig::default()), Err(Error::Fit(_))));
        let x4 = Array2::from_shape_vec((4, 1), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(fit(x4.view(), &[0, 1, 2, 3], &RidgeConfig { folds: 2, ..Default::default() }), Err(Error::Fit(_))));
    }

    #[test]
    fn non_finite_features_are_data_errors() {
        let (mut x, y) = clusters();
        x[[3, 1]] = f64::NAN;
        assert!(matches!(fit(x.view(), &y, &RidgeConfig::default()), Err(Error::Data(_))));
    }

    #[test]
    fn zero_model_prefers_first_class() {
        let m = RidgeModel {
            class_labels: vec![4, 2, 9],
            weights: vec![vec![0.0; 3]; 3],
            intercepts: vec![0.0; 3],
            feature_means: vec![0.0; 3],
            feature_scales: vec![1.0; 3],
            alpha: 1.0,
            cv_accuracy: vec![],
        };
        assert_eq!(m.decision_scores(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(m.predict(&[1.0, 2.0, 3.0]).unwrap(), 4);
        assert!(matches!(m.predict(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn predict_agrees_with_manual_scores() {
        let (x, y) = clusters();
        let m = fit(x.view(), &y, &RidgeConfig::default()).unwrap();
        let f = [4.0, -2.0];
        let z: Vec<f64> = (0..2).map(|d| (f[d] - m.feature_means[d]) / m.feature_scales[d]).collect();
        let manual: Vec<f64> = (0..2)
            .map(|c| m.intercepts[c] + m.weights[c][0] * z[0] + m.weights[c][1] * z[1])
            .collect();
        let want = if manual[1] > manual[0] { m.class_labels[1] } else { m.class_labels[0] };
        assert_eq!(m.predict(&f).unwrap(), want);
        assert_eq!(want, 8);
    }

    #[test]
    fn constant_columns_are_ignored() {
        let (x, y) = clusters();
        let mut wide = Array2::zeros((40, 3));
        wide.slice_mut(s![.., 0..2]).assign(&x);
        wide.column_mut(2).fill(0.3);
        let m = fit(wide.view(), &y, &RidgeConfig::default()).unwrap();
        assert_eq!(m.feature_scales[2], 1.0);
        let a = m.decision_scores(&[1.0, 0.5, 0.3]).unwrap();
        let b = m.decision_scores(&[1.0, 0.5, 17.3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn alpha_ties_prefer_largest() {
        assert_eq!(select_alpha(&[0.001, 0.01, 0.1, 1.0], &[0.9, 0.95, 0.95, 0.9]), 0.1);
        assert_eq!(select_alpha(&[0.001, 0.01, 0.1, 1.0], &[1.0; 4]), 1.0);
        assert_eq!(select_alpha(&[1.0, 0.1], &[0.5, 0.5]), 1.0);
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let strata: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let a = stratified_folds(&strata, 5, 9);
        assert_eq!(a, stratified_folds(&strata, 5, 9));
        for s in 0..3 {
            let mut per_fold = [0; 5];
            for (i, &f) in a.iter().enumerate() {
                if strata[i] == s {
                    per_fold[f] += 1;
                }
            }
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            assert!(hi - lo <= 1, "{per_fold:?}");
        }
    }

    #[test]
    fn primal_and_dual_paths_give_the_same_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((30, 6), |_| rng.random_range(-1.0..1.0));
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let primal = fit(x.view(), &y, &RidgeConfig { solver: SolverChoice::Primal, ..Default::default() }).unwrap();
        let dual = fit(x.view(), &y, &RidgeConfig { solver: SolverChoice::Dual, ..Default::default() }).unwrap();
        assert_eq!(primal.alpha, dual.alpha);
        assert_eq!(primal.cv_accuracy, dual.cv_accuracy);
        for (a, b) in primal.weights.iter().flatten().zip(dual.weights.iter().flatten()) {
            assert!((a - b).abs() < 1e-8);
        }
        for (a, b) in primal.intercepts.iter().zip(&dual.intercepts) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn fitted_weights_solve_centered_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Array2::from_shape_fn((18, 4), |_| rng.random_range(0.0..1.0));
        let y: Vec<usize> = (0..18).map(|i| i % 2).collect();
        let m = fit(x.view(), &y, &RidgeConfig::default()).unwrap();
        let mut z = x.clone();
        for d in 0..4 {
            z.column_mut(d).mapv_inplace(|v| (v - m.feature_means[d]) / m.feature_scales[d]);
        }
        let zc = &z - &column_means(z.view());
        let targets = Array2::from_shape_fn((18, 2), |(i, c)| if y[i] == c { 1.0 } else { -1.0 });
        let tc = &targets - &column_means(targets.view());
        let w = Array2::from_shape_fn((4, 2), |(d, c)| m.weights[c][d]);
        let mut lhs = zc.t().dot(&zc).dot(&w);
        lhs.scaled_add(m.alpha, &w);
        let rhs = zc.t().dot(&tc);
        let resid = (&lhs - &rhs).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(resid < 1e-8, "{resid}");
    }
}
