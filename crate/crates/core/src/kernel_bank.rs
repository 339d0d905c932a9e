//! Fixed convolution kernels and the per-length dilation schedule.
//!
//! Kernels have weights in {-1, 2} with exactly one third of the taps set to 2,
//! so every kernel sums to zero. All `C(len, len/3)` placements are enumerated
//! in lexicographic order; for the default length 9 this yields 84 kernels.
//!
//! For an input of length `T`, each kernel is paired with the dilations
//! `floor(2^(i * L_max / L'))` for `i = 0..=L'` (deduplicated, at most `L'`
//! distinct), where `L_max = log2((T - 1) / (len - 1))`. Every kernel receives
//! `D / K` bias slots, spread evenly over its dilations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelBankConfig {
    pub kernel_length: usize,
    pub num_kernels: usize,
    /// Upper bound on distinct dilations per kernel.
    pub max_dilations_per_kernel: usize,
    pub total_features: usize,
    pub seed: u64,
}

impl Default for KernelBankConfig {
    fn default() -> Self {
        Self {
            kernel_length: 9,
            num_kernels: 84,
            max_dilations_per_kernel: 32,
            total_features: 9_996,
            seed: 0,
        }
    }
}

impl KernelBankConfig {
    pub fn validate(&self) -> Result<()> {
        let len = self.kernel_length;
        if len < 3 || len.is_multiple_of(2) || !len.is_multiple_of(3) {
            return Err(Error::Config(format!(
                "kernel_length must be an odd multiple of 3 (got {len})"
            )));
        }
        let combos = binomial(len, len / 3);
        if combos != Some(self.num_kernels) {
            return Err(Error::Config(format!(
                "num_kernels {} does not match C({len}, {}) = {}",
                self.num_kernels,
                len / 3,
                combos.map_or_else(|| "overflow".to_string(), |c| c.to_string())
            )));
        }
        if self.max_dilations_per_kernel == 0 {
            return Err(Error::Config(
                "max_dilations_per_kernel must be at least 1".into(),
            ));
        }
        if self.total_features == 0 || !self.total_features.is_multiple_of(self.num_kernels) {
            return Err(Error::Config(format!(
                "total_features {} must be a positive multiple of num_kernels {}",
                self.total_features, self.num_kernels
            )));
        }
        Ok(())
    }

    pub fn features_per_kernel(&self) -> usize {
        self.total_features / self.num_kernels
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of kernels enumerated for `kernel_length`, i.e. `C(len, len/3)`.
pub fn kernel_count(kernel_length: usize) -> Option<usize> {
    binomial(kernel_length, kernel_length / 3)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Kernel {
    weights: Vec<i32>,
}

impl Kernel {
    /// Builds a kernel with weight 2 at `two_positions` and -1 elsewhere.
    pub fn from_positions(length: usize, two_positions: &[usize]) -> Self {
        let mut weights = vec![-1; length];
        for &p in two_positions {
            weights[p] = 2;
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[i32] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// One dilation assigned to a kernel, together with its padding flag and the
/// number of bias terms (features) it contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilationEntry {
    pub dilation: usize,
    pub padded: bool,
    pub num_biases: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilationPlan {
    pub input_length: usize,
    pub kernel_length: usize,
    /// Indexed by kernel, in bank order.
    pub per_kernel: Vec<Vec<DilationEntry>>,
}

impl DilationPlan {
    /// Iterates `(kernel index, entry)` in feature-emission order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, &DilationEntry)> {
        self.per_kernel
            .iter()
            .enumerate()
            .flat_map(|(k, entries)| entries.iter().map(move |e| (k, e)))
    }

    pub fn num_pairs(&self) -> usize {
        self.per_kernel.iter().map(Vec::len).sum()
    }

    pub fn total_features(&self) -> usize {
        self.pairs().map(|(_, e)| e.num_biases).sum()
    }

    /// Zero-padding applied on each side for a padded convolution at `dilation`.
    pub fn padding(&self, dilation: usize) -> usize {
        (self.kernel_length - 1) * dilation / 2
    }

    /// Length of the convolution output for one entry.
    pub fn output_length(&self, entry: &DilationEntry) -> usize {
        if entry.padded {
            self.input_length
        } else {
            self.input_length - (self.kernel_length - 1) * entry.dilation
        }
    }
}

/// Enumerates every placement of `len / 3` twos, lexicographic over positions.
pub fn generate_kernels(config: &KernelBankConfig) -> Result<Vec<Kernel>> {
    config.validate()?;
    let len = config.kernel_length;
    let twos = len / 3;
    let mut kernels = Vec::with_capacity(config.num_kernels);
    let mut positions: Vec<usize> = (0..twos).collect();
    loop {
        kernels.push(Kernel::from_positions(len, &positions));
        // advance to the next combination
        let mut i = twos;
        loop {
            if i == 0 {
                return Ok(kernels);
            }
            i -= 1;
            if positions[i] < len - twos + i {
                break;
            }
        }
        positions[i] += 1;
        for j in i + 1..twos {
            positions[j] = positions[j - 1] + 1;
        }
    }
}

pub fn max_dilation_exponent(input_length: usize, kernel_length: usize) -> Result<f64> {
    if kernel_length < 2 || input_length < kernel_length {
        return Err(Error::DegenerateInput(format!(
            "input length {input_length} is shorter than kernel length {kernel_length}"
        )));
    }
    Ok(((input_length - 1) as f64 / (kernel_length - 1) as f64).log2())
}

pub fn build_dilation_plan(config: &KernelBankConfig, input_length: usize) -> Result<DilationPlan> {
    config.validate()?;
    let len = config.kernel_length;
    let l_max = max_dilation_exponent(input_length, len)?;
    let steps = config.max_dilations_per_kernel;
    let cap = (input_length - 1) / (len - 1);

    let mut dilations: Vec<usize> = (0..=steps)
        .map(|i| {
            let raw = 2f64.powf(i as f64 * l_max / steps as f64).floor() as usize;
            raw.clamp(1, cap)
        })
        .collect();
    dilations.dedup();
    dilations.truncate(steps);

    let per_kernel_budget = config.features_per_kernel();
    let base = per_kernel_budget / dilations.len();
    let remainder = per_kernel_budget % dilations.len();

    let mut pair_index = 0usize;
    let per_kernel = (0..config.num_kernels)
        .map(|_| {
            dilations
                .iter()
                .enumerate()
                .map(|(l, &dilation)| {
                    let entry = DilationEntry {
                        dilation,
                        padded: pair_index.is_multiple_of(2),
                        num_biases: base + usize::from(l < remainder),
                    };
                    pair_index += 1;
                    entry
                })
                .collect()
        })
        .collect();

    Ok(DilationPlan {
        input_length,
        kernel_length: len,
        per_kernel,
    })
}
