//! RBF-kernel support vector machines trained by a from-scratch SMO solver,
//! with a one-vs-one reduction for multiclass problems.

mod io;
mod multiclass;
mod smo;

pub use io::{load_binary, load_multiclass, save_binary, save_multiclass};
pub use multiclass::{predict_multiclass, train_multiclass, MulticlassSvmModel, PairwiseModel};
pub use smo::{train_binary_smo, train_binary_smo_full};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Embedding;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training data contains a single class")]
    SingleClassInput,
    #[error("degenerate training set: all points identical across classes")]
    DegenerateInput,
    #[error("need at least two training samples, got {0}")]
    TooFewSamples(usize),
    #[error("labels must be +1 or -1, found {0}")]
    BadLabel(i8),
    #[error("feature/label length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("class {0} has no samples")]
    EmptyClass(u8),
    #[error("fewer than two classes in training labels")]
    TooFewClasses,
    #[error("training pair ({class_a}, {class_b}) failed: {source}")]
    PairFailed { class_a: u8, class_b: u8, source: Box<SvmError> },
    #[error("unknown class code {0} in model file")]
    UnknownClass(u8),
    #[error("bad magic: not an SVM1 file")]
    BadMagic,
    #[error("truncated model file")]
    TruncatedFile,
    #[error("model file has wrong kind byte {0}")]
    WrongKind(u8),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// SMO hyperparameters. Defaults are the pipeline's operating point
/// (C = 1000, gamma = 0.1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainParams {
    pub c: f64,
    pub gamma: f64,
    pub kkt_tol: f64,
    /// Stop after this many consecutive sweeps with no alpha change.
    pub max_passes: usize,
    /// Hard cap on successful pair updates; 0 means auto
    /// (ceil(10 n^2 / 100), at least 10000).
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            c: 1000.0,
            gamma: 0.1,
            kkt_tol: 1e-3,
            max_passes: 10,
            max_iter: 0,
            seed: 42,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), SvmError> {
        assert!(self.c > 0.0, "C must be positive");
        assert!(self.gamma > 0.0, "gamma must be positive");
        assert!(self.kkt_tol > 0.0, "kkt_tol must be positive");
        Ok(())
    }

    pub fn effective_max_iter(&self, n: usize) -> usize {
        if self.max_iter > 0 {
            self.max_iter
        } else {
            ((10 * n * n + 99) / 100).max(10_000)
        }
    }
}

/// Trained binary SVM: support vectors with signed dual coefficients
/// (alpha_i * y_i), a bias, and the kernel width.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Embedding>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

impl BinarySvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map(|sv| sv.dim()).unwrap_or(0)
    }

    /// Dual objective value, sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij,
    /// computed over the support vectors (zero-alpha terms vanish).
    pub fn dual_objective(&self) -> f64 {
        let lin: f64 = self.dual_coefs.iter().map(|c| c.abs()).sum();
        let mut quad = 0.0;
        for (i, svi) in self.support_vectors.iter().enumerate() {
            for (j, svj) in self.support_vectors.iter().enumerate() {
                quad += self.dual_coefs[i]
                    * self.dual_coefs[j]
                    * rbf_kernel(svi, svj, self.gamma).expect("sv dims consistent");
            }
        }
        lin - 0.5 * quad
    }
}

/// exp(-gamma * ||x - y||^2), in (0, 1].
pub fn rbf_kernel(x: &Embedding, y: &Embedding, gamma: f64) -> Result<f64, SvmError> {
    if x.dim() != y.dim() {
        return Err(SvmError::DimMismatch { expected: x.dim(), got: y.dim() });
    }
    let d2: f64 = x
        .values
        .iter()
        .zip(&y.values)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok((-gamma * d2).exp())
}

/// sum_j dual_coef_j * K(sv_j, x) + bias.
pub fn decision_function(model: &BinarySvmModel, x: &Embedding) -> Result<f64, SvmError> {
    if x.dim() != model.dim() {
        return Err(SvmError::DimMismatch { expected: model.dim(), got: x.dim() });
    }
    let mut sum = model.bias;
    for (sv, &coef) in model.support_vectors.iter().zip(&model.dual_coefs) {
        sum += coef * rbf_kernel(sv, x, model.gamma)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec())
    }

    #[test]
    fn kernel_is_one_at_zero_distance() {
        let x = emb(&[0.3, -0.7, 1.2]);
        assert_eq!(rbf_kernel(&x, &x, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn kernel_matches_analytic_value() {
        let x = emb(&[0.0, 0.0]);
        let y = emb(&[1.0, 0.0]);
        let k = rbf_kernel(&x, &y, 0.1).unwrap();
        assert!((k - (-0.1f64).exp()).abs() < 1e-12);
        assert!((k - 0.904837).abs() < 1e-6);
    }

    #[test]
    fn kernel_underflows_to_zero_but_stays_finite() {
        let x = emb(&[0.0]);
        let y = emb(&[1000.0]);
        let k = rbf_kernel(&x, &y, 0.1).unwrap();
        assert!(k.is_finite() && k >= 0.0 && k < 1e-300);
    }

    #[test]
    fn kernel_rejects_dim_mismatch() {
        let x = emb(&[0.0]);
        let y = emb(&[0.0, 1.0]);
        assert!(matches!(rbf_kernel(&x, &y, 0.1), Err(SvmError::DimMismatch { .. })));
    }

    #[test]
    fn decision_function_rejects_dim_mismatch() {
        let model = BinarySvmModel {
            support_vectors: vec![emb(&[0.0, 0.0])],
            dual_coefs: vec![1.0],
            bias: 0.0,
            gamma: 0.1,
        };
        assert!(matches!(
            decision_function(&model, &emb(&[1.0])),
            Err(SvmError::DimMismatch { .. })
        ));
    }
}
