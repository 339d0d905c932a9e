//! Dilated convolution, channel summation, quantile bias fitting and the
//! proportion-of-positive-values (PPV) transform.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::CsiSample;
use crate::error::{Error, Result};
use crate::kernel_bank::{
    build_dilation_plan, generate_kernels, DilationPlan, Kernel, KernelBankConfig,
};
use crate::seed::{derive_seed, streams};

/// Kernel bank with biases fitted on training data. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedBank {
    pub config: KernelBankConfig,
    pub plan: DilationPlan,
    pub kernels: Vec<Kernel>,
    /// One ascending list per (kernel, dilation) pair, in plan order.
    pub biases: Vec<Vec<f64>>,
    pub subcarriers: usize,
}

impl FittedBank {
    pub fn input_length(&self) -> usize {
        self.plan.input_length
    }

    pub fn num_features(&self) -> usize {
        self.plan.total_features()
    }

    fn check_shape(&self, amplitudes: ArrayView2<'_, f64>) -> Result<()> {
        let (s, t) = amplitudes.dim();
        if s != self.subcarriers || t != self.input_length() {
            return Err(Error::Shape(format!(
                "sample is {s}x{t}, bank expects {}x{}",
                self.subcarriers,
                self.input_length()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub ap_id: u32,
}

/// Golden-ratio low-discrepancy quantile levels `frac((j + 1) * phi)`.
pub fn quantile_levels(count: usize) -> Vec<f64> {
    let phi = (5f64.sqrt() + 1.0) / 2.0;
    (0..count).map(|j| ((j + 1) as f64 * phi).fract()).collect()
}

/// Quantile of ascending data with linear interpolation between order statistics.
pub fn linear_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn kernel_weights(kernel: &Kernel) -> Vec<f64> {
    kernel.weights().iter().map(|&w| f64::from(w)).collect()
}

fn receptive_field(kernel_len: usize, dilation: usize) -> usize {
    (kernel_len - 1) * dilation
}

/// `out[t] = sum_m w[m] * x[t + m*d]`; padded inputs are zero-extended by
/// `(len - 1) * d / 2` on both sides so the output keeps length `T`.
fn convolve_into(
    x: &[f64],
    weights: &[f64],
    dilation: usize,
    padded: bool,
    scratch: &mut Vec<f64>,
    out: &mut Vec<f64>,
) {
    let span = receptive_field(weights.len(), dilation);
    let (source, out_len): (&[f64], usize) = if padded {
        let pad = span / 2;
        scratch.clear();
        scratch.resize(x.len() + span, 0.0);
        scratch[pad..pad + x.len()].copy_from_slice(x);
        (scratch.as_slice(), x.len())
    } else {
        (x, x.len() - span)
    };
    out.clear();
    out.resize(out_len, 0.0);
    for (m, &w) in weights.iter().enumerate() {
        let src = &source[m * dilation..m * dilation + out_len];
        for (o, s) in out.iter_mut().zip(src) {
            *o += w * s;
        }
    }
}

pub fn convolve_dilated(x: &[f64], kernel: &Kernel, dilation: usize, padded: bool) -> Result<Vec<f64>> {
    if dilation == 0 {
        return Err(Error::Shape("dilation must be at least 1".into()));
    }
    if kernel.len().is_multiple_of(2) {
        return Err(Error::Shape("kernel length must be odd".into()));
    }
    let span = receptive_field(kernel.len(), dilation);
    if !padded && span + 1 > x.len() {
        return Err(Error::Shape(format!(
            "receptive field {} exceeds series length {}",
            span + 1,
            x.len()
        )));
    }
    let mut out = Vec::new();
    convolve_into(x, &kernel_weights(kernel), dilation, padded, &mut Vec::new(), &mut out);
    Ok(out)
}

/// Sums the subcarrier axis of an `S x T` sample.
pub fn column_sum(amplitudes: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut sum = vec![0.0; amplitudes.ncols()];
    for row in amplitudes.rows() {
        for (acc, v) in sum.iter_mut().zip(row) {
            *acc += v;
        }
    }
    sum
}

/// Convolution summed over all subcarriers. Computed on the column-summed
/// series, which equals the sum of per-row convolutions by linearity.
pub fn channel_sum(
    amplitudes: ArrayView2<'_, f64>,
    kernel: &Kernel,
    dilation: usize,
    padded: bool,
) -> Result<Vec<f64>> {
    if amplitudes.nrows() == 0 {
        return Err(Error::Shape("sample has no subcarriers".into()));
    }
    convolve_dilated(&column_sum(amplitudes), kernel, dilation, padded)
}

/// Fits one set of quantile biases per (kernel, dilation) pair from a single
/// training sample drawn with that pair's own seeded stream.
pub fn fit_biases(
    train: &[&CsiSample],
    config: &KernelBankConfig,
    plan: &DilationPlan,
    kernels: &[Kernel],
    seed: u64,
) -> Result<FittedBank> {
    let first = train
        .first()
        .ok_or_else(|| Error::Fit("cannot fit biases on an empty training set".into()))?;
    let (subcarriers, length) = first.amplitudes.dim();
    if subcarriers == 0 {
        return Err(Error::Shape("sample has no subcarriers".into()));
    }
    if length != plan.input_length {
        return Err(Error::Shape(format!(
            "training series length {length} does not match plan length {}",
            plan.input_length
        )));
    }
    if let Some(bad) = train.iter().find(|s| s.amplitudes.dim() != (subcarriers, length)) {
        return Err(Error::Shape(format!(
            "sample {} is {:?}, expected {subcarriers}x{length}",
            bad.sample_id,
            bad.amplitudes.dim()
        )));
    }
    if kernels.len() != plan.per_kernel.len() {
        return Err(Error::Shape(format!(
            "{} kernels for a plan over {} kernels",
            kernels.len(),
            plan.per_kernel.len()
        )));
    }

    let mut summed: Vec<Option<Vec<f64>>> = vec![None; train.len()];
    let weights: Vec<Vec<f64>> = kernels.iter().map(kernel_weights).collect();
    let mut scratch = Vec::new();
    let mut out = Vec::new();
    let mut biases = Vec::with_capacity(plan.num_pairs());

    for (pair, (k, entry)) in plan.pairs().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::BANK, pair as u64));
        let pick = rng.random_range(0..train.len());
        let series = summed[pick].get_or_insert_with(|| column_sum(train[pick].amplitudes.view()));
        convolve_into(series, &weights[k], entry.dilation, entry.padded, &mut scratch, &mut out);
        out.sort_by(f64::total_cmp);
        let mut b: Vec<f64> = quantile_levels(entry.num_biases)
            .into_iter()
            .map(|q| linear_quantile(&out, q))
            .collect();
        b.sort_by(f64::total_cmp);
        biases.push(b);
    }

    Ok(FittedBank {
        config: KernelBankConfig { seed, ..*config },
        plan: plan.clone(),
        kernels: kernels.to_vec(),
        biases,
        subcarriers,
    })
}

/// Builds kernels and plan for the training length, then fits biases with
/// `config.seed`.
pub fn fit_bank(train: &[&CsiSample], config: &KernelBankConfig) -> Result<FittedBank> {
    let first = train
        .first()
        .ok_or_else(|| Error::Fit("cannot fit biases on an empty training set".into()))?;
    let kernels = generate_kernels(config)?;
    let plan = build_dilation_plan(config, first.amplitudes.ncols())?;
    fit_biases(train, config, &plan, &kernels, config.seed)
}

/// Writes the PPV features of one `S x T` sample into `out` (length `D`).
pub fn extract_into(amplitudes: ArrayView2<'_, f64>, bank: &FittedBank, out: &mut [f64]) -> Result<()> {
    bank.check_shape(amplitudes)?;
    if out.len() != bank.num_features() {
        return Err(Error::Shape(format!(
            "feature buffer has {} slots, bank emits {}",
            out.len(),
            bank.num_features()
        )));
    }
    let series = column_sum(amplitudes);
    let weights: Vec<Vec<f64>> = bank.kernels.iter().map(kernel_weights).collect();
    let mut scratch = Vec::new();
    let mut conv = Vec::new();
    let mut slot = 0;
    for ((k, entry), biases) in bank.plan.pairs().zip(&bank.biases) {
        if biases.is_empty() {
            continue;
        }
        convolve_into(&series, &weights[k], entry.dilation, entry.padded, &mut scratch, &mut conv);
        let inv_len = 1.0 / conv.len() as f64;
        for &b in biases {
            let positives = conv.iter().filter(|&&v| v > b).count();
            out[slot] = positives as f64 * inv_len;
            slot += 1;
        }
    }
    Ok(())
}

pub fn extract(sample: &CsiSample, bank: &FittedBank) -> Result<FeatureVector> {
    let mut values = vec![0.0; bank.num_features()];
    extract_into(sample.amplitudes.view(), bank, &mut values)?;
    Ok(FeatureVector {
        values,
        ap_id: sample.ap_id,
    })
}

/// Extracts features for many samples, one row each, in input order.
pub fn extract_matrix(samples: &[&CsiSample], bank: &FittedBank) -> Result<Array2<f64>> {
    let mut matrix = Array2::zeros((samples.len(), bank.num_features()));
    matrix
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(samples.par_iter())
        .try_for_each(|(mut row, sample)| {
            let out = row
                .as_slice_mut()
                .expect("rows of a standard-layout matrix are contiguous");
            extract_into(sample.amplitudes.view(), bank, out)
        })?;
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn naive_convolve(x: &[f64], w: &[i32], d: usize, padded: bool) -> Vec<f64> {
        let span = (w.len() - 1) * d;
        let (pad, n) = if padded { (span / 2, x.len()) } else { (0, x.len() - span) };
        let mut out = Vec::new();
        for t in 0..n {
            let mut acc = 0.0;
            for (m, &wm) in w.iter().enumerate() {
                let idx = (t + m * d) as isize - pad as isize;
                if idx >= 0 && (idx as usize) < x.len() {
                    acc += f64::from(wm) * x[idx as usize];
                }
            }
            out.push(acc);
        }
        out
    }

    fn sample(amplitudes: Array2<f64>) -> CsiSample {
        CsiSample {
            ap_id: 1,
            sample_id: 0,
            amplitudes,
            activity: 0,
            orientation: 0,
            user_id: None,
        }
    }

    fn kernels() -> Vec<Kernel> {
        generate_kernels(&KernelBankConfig::default()).unwrap()
    }

    #[test]
    fn constant_series_gives_zero() {
        let x = vec![5.0; 40];
        for k in kernels() {
            for d in [1, 2, 4] {
                for padded in [false, true] {
                    let out = convolve_dilated(&x, &k, d, padded).unwrap();
                    // padded edges see zeros, so only interior outputs vanish
                    let pad = if padded { 4 * d } else { 0 };
                    for &v in &out[pad..out.len() - pad] {
                        assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn impulse_response_is_reversed_kernel() {
        let mut x = vec![0.0; 30];
        x[10] = 1.0;
        let k = &kernels()[17];
        let out = convolve_dilated(&x, k, 2, false).unwrap();
        assert_eq!(out.len(), 30 - 16);
        let mut expected = vec![0.0; out.len()];
        for (m, &w) in k.weights().iter().enumerate() {
            if 10 >= 2 * m {
                expected[10 - 2 * m] = f64::from(w);
            }
        }
        assert_eq!(out, expected);
        assert_eq!(out, naive_convolve(&x, k.weights(), 2, false));
    }

    #[test]
    fn random_series_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..10.0)).collect();
        let plan = build_dilation_plan(&KernelBankConfig::default(), 64).unwrap();
        for (k, kernel) in kernels().iter().enumerate() {
            for e in &plan.per_kernel[k] {
                for padded in [false, true] {
                    let got = convolve_dilated(&x, kernel, e.dilation, padded).unwrap();
                    let want = naive_convolve(&x, kernel.weights(), e.dilation, padded);
                    assert_eq!(got.len(), want.len());
                    for (g, w) in got.iter().zip(&want) {
                        assert!((g - w).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn oversized_receptive_field_is_shape_error() {
        let k = &kernels()[0];
        assert!(matches!(
            convolve_dilated(&[1.0; 16], k, 2, false),
            Err(Error::Shape(_))
        ));
        // padding lifts the bound
        assert_eq!(convolve_dilated(&[1.0; 16], k, 2, true).unwrap().len(), 16);
    }

    #[test]
    fn channel_sum_single_row_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((3, 50), |_| rng.random_range(0.0..4.0));
        let k = &kernels()[40];
        let one = channel_sum(x.slice(ndarray::s![0..1, ..]), k, 3, true).unwrap();
        assert_eq!(one, convolve_dilated(&x.row(0).to_vec(), k, 3, true).unwrap());

        let summed = channel_sum(x.view(), k, 3, false).unwrap();
        let mut per_row = vec![0.0; summed.len()];
        for row in x.rows() {
            let c = convolve_dilated(&row.to_vec(), k, 3, false).unwrap();
            for (a, v) in per_row.iter_mut().zip(c) {
                *a += v;
            }
        }
        for (a, b) in summed.iter().zip(&per_row) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn channel_sum_rejects_empty_axis() {
        let x = Array2::<f64>::zeros((0, 20));
        assert!(matches!(
            channel_sum(x.view(), &kernels()[0], 1, false),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn quantile_levels_and_interpolation() {
        let q = quantile_levels(3);
        assert!((q[0] - 0.618_033_988_749_895).abs() < 1e-12);
        assert!((q[1] - 0.236_067_977_499_79).abs() < 1e-12);
        assert!((q[2] - 0.854_101_966_249_685).abs() < 1e-12);
        let data = [0.0, 1.0, 2.0, 3.0];
        // position q*(n-1) interpolates between neighbours
        assert!((linear_quantile(&data, q[0]) - 1.854_101_966_249_685).abs() < 1e-9);
        assert!((linear_quantile(&data, q[1]) - 0.708_203_932_499_37).abs() < 1e-9);
        assert!((linear_quantile(&data, q[2]) - 2.562_305_898_749_055).abs() < 1e-9);
        assert_eq!(linear_quantile(&[7.0; 5], 0.3), 7.0);
    }

    #[test]
    fn empty_training_set_is_fit_error() {
        let cfg = KernelBankConfig::default();
        assert!(matches!(fit_bank(&[], &cfg), Err(Error::Fit(_))));
    }

    #[test]
    fn biases_are_sorted_and_sized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<CsiSample> = (0..4)
            .map(|_| sample(Array2::from_shape_fn((2, 40), |_| rng.random_range(0.0..3.0))))
            .collect();
        let refs: Vec<&CsiSample> = samples.iter().collect();
        let bank = fit_bank(&refs, &KernelBankConfig::default()).unwrap();
        assert_eq!(bank.biases.len(), bank.plan.num_pairs());
        for ((_, e), b) in bank.plan.pairs().zip(&bank.biases) {
            assert_eq!(b.len(), e.num_biases);
            assert!(b.windows(2).all(|w| w[0] <= w[1]));
        }
        let again = fit_bank(&refs, &KernelBankConfig::default()).unwrap();
        assert_eq!(bank, again);
    }

    #[test]
    fn constant_sample_features_follow_bias_sign() {
        let cfg = KernelBankConfig {
            kernel_length: 3,
            num_kernels: 3,
            total_features: 6,
            ..Default::default()
        };
        let plan = build_dilation_plan(&cfg, 12).unwrap();
        let ks = generate_kernels(&cfg).unwrap();
        let mut bank = fit_biases(
            &[&sample(Array2::from_elem((2, 12), 1.0))],
            &cfg,
            &plan,
            &ks,
            0,
        )
        .unwrap();
        for b in &mut bank.biases {
            for (i, v) in b.iter_mut().enumerate() {
                *v = if i % 2 == 0 { 0.5 } else { -0.5 };
            }
        }
        // unpadded pairs see an all-zero convolution of a constant sample
        let x = sample(Array2::from_elem((2, 12), 4.0));
        let f = extract(&x, &bank).unwrap();
        let mut slot = 0;
        for ((_, e), b) in bank.plan.pairs().zip(&bank.biases) {
            for &bias in b {
                if !e.padded {
                    assert_eq!(f.values[slot], if bias > 0.0 { 0.0 } else { 1.0 });
                }
                slot += 1;
            }
        }
    }

    #[test]
    fn extract_rejects_wrong_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample(Array2::from_shape_fn((3, 30), |_| rng.random_range(0.0..1.0)));
        let bank = fit_bank(&[&s], &KernelBankConfig::default()).unwrap();
        let wrong = sample(Array2::zeros((4, 30)));
        assert!(matches!(extract(&wrong, &bank), Err(Error::Shape(_))));
        let wrong_t = sample(Array2::zeros((3, 31)));
        assert!(matches!(extract(&wrong_t, &bank), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_convolution_values_do_not_count_as_positive() {
        let cfg = KernelBankConfig {
            kernel_length: 3,
            num_kernels: 3,
            total_features: 3,
            ..Default::default()
        };
        let s = sample(Array2::from_elem((1, 8), 2.0));
        let mut bank = fit_bank(&[&s], &cfg).unwrap();
        for b in &mut bank.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        let f = extract(&s, &bank).unwrap();
        // second feature: kernel 1 at dilation 1, unpadded, so every output is exactly zero
        assert_eq!(f.values[1], 0.0);
    }
}
