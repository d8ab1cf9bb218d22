//! SMO solver for the RBF-SVM dual problem.
//!
//! Simplified SMO: sweep over multipliers, and for each one violating the
//! KKT conditions pick a second multiplier at random (seeded), falling back
//! to a scan from a random offset when the random pick makes no progress.
//! Terminates after `max_passes` consecutive violation-free sweeps or the
//! `max_iter` update cap.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{rbf_kernel, BinarySvmModel, SvmError, TrainParams};
use crate::embed::Embedding;

/// Kernel matrices are cached densely up to this many samples and computed
/// on the fly above it.
const DENSE_CACHE_LIMIT: usize = 4096;

/// Minimum relative alpha change for a pair step to count as progress.
const STEP_EPS: f64 = 1e-12;

enum KernelSource<'a> {
    Dense { k: Vec<f64>, n: usize },
    Lazy { x: &'a [Embedding], gamma: f64 },
}

impl KernelSource<'_> {
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            KernelSource::Dense { k, n } => k[i * n + j],
            KernelSource::Lazy { x, gamma } => {
                rbf_kernel(&x[i], &x[j], *gamma).expect("dims validated")
            }
        }
    }
}

struct Solver<'a> {
    kernel: KernelSource<'a>,
    y: Vec<f64>,
    c: f64,
    alpha: Vec<f64>,
    /// Cached decision values f(x_i) including bias.
    f: Vec<f64>,
    bias: f64,
}

impl Solver<'_> {
    /// One analytic two-multiplier optimization. Returns true if alpha moved.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a1, a2) = (self.alpha[i], self.alpha[j]);
        let (y1, y2) = (self.y[i], self.y[j]);
        let e1 = self.f[i] - y1;
        let e2 = self.f[j] - y2;
        let s = y1 * y2;

        let (lo, hi) = if (y1 - y2).abs() > 0.5 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if hi - lo < STEP_EPS {
            return false;
        }

        let k11 = self.kernel.get(i, i);
        let k12 = self.kernel.get(i, j);
        let k22 = self.kernel.get(j, j);
        let eta = k11 + k22 - 2.0 * k12;

        let mut a2_new = if eta > 1e-15 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // flat direction: compare the objective at the segment endpoints
            let f1 = y1 * e1 - a1 * k11 - s * a2 * k12;
            let f2 = y2 * e2 - s * a1 * k12 - a2 * k22;
            let l1 = a1 + s * (a2 - lo);
            let h1 = a1 + s * (a2 - hi);
            let obj_lo = l1 * f1 + lo * f2
                + 0.5 * l1 * l1 * k11
                + 0.5 * lo * lo * k22
                + s * lo * l1 * k12;
            let obj_hi = h1 * f1 + hi * f2
                + 0.5 * h1 * h1 * k11
                + 0.5 * hi * hi * k22
                + s * hi * h1 * k12;
            if obj_lo < obj_hi - 1e-12 {
                lo
            } else if obj_hi < obj_lo - 1e-12 {
                hi
            } else {
                return false;
            }
        };
        if a2_new < STEP_EPS {
            a2_new = 0.0;
        } else if a2_new > self.c - STEP_EPS {
            a2_new = self.c;
        }
        if (a2_new - a2).abs() < STEP_EPS * (a2_new + a2 + STEP_EPS) {
            return false;
        }

        let a1_new = (a1 + s * (a2 - a2_new)).clamp(0.0, self.c);
        let d1 = a1_new - a1;
        let d2 = a2_new - a2;

        let b1 = self.bias - e1 - y1 * d1 * k11 - y2 * d2 * k12;
        let b2 = self.bias - e2 - y1 * d1 * k12 - y2 * d2 * k22;
        let new_bias = if a1_new > STEP_EPS && a1_new < self.c - STEP_EPS {
            b1
        } else if a2_new > STEP_EPS && a2_new < self.c - STEP_EPS {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_bias - self.bias;

        for t in 0..self.f.len() {
            self.f[t] += y1 * d1 * self.kernel.get(i, t) + y2 * d2 * self.kernel.get(j, t) + db;
        }
        self.alpha[i] = a1_new;
        self.alpha[j] = a2_new;
        self.bias = new_bias;
        true
    }

    fn violates_kkt(&self, i: usize, tol: f64) -> bool {
        let r = (self.f[i] - self.y[i]) * self.y[i];
        (r < -tol && self.alpha[i] < self.c) || (r > tol && self.alpha[i] > 0.0)
    }
}

/// Train a binary RBF-SVM and return the model together with the full alpha
/// vector (one entry per training sample, in input order).
pub fn train_binary_smo_full(
    x: &[Embedding],
    y: &[i8],
    params: &TrainParams,
) -> Result<(BinarySvmModel, Vec<f64>), SvmError> {
    params.validate()?;
    let n = x.len();
    if n != y.len() {
        return Err(SvmError::LengthMismatch { x: n, y: y.len() });
    }
    if n < 2 {
        return Err(SvmError::TooFewSamples(n));
    }
    let dim = x[0].dim();
    for e in x {
        if e.dim() != dim {
            return Err(SvmError::DimMismatch { expected: dim, got: e.dim() });
        }
    }
    for &label in y {
        if label != 1 && label != -1 {
            return Err(SvmError::BadLabel(label));
        }
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(SvmError::SingleClassInput);
    }
    if x.iter().all(|e| e.values == x[0].values) {
        return Err(SvmError::DegenerateInput);
    }

    let kernel = if n <= DENSE_CACHE_LIMIT {
        let mut k = vec![0.0f64; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rbf_kernel(&x[i], &x[j], params.gamma)?;
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        KernelSource::Dense { k, n }
    } else {
        KernelSource::Lazy { x, gamma: params.gamma }
    };

    let yf: Vec<f64> = y.iter().map(|&l| l as f64).collect();
    let mut solver = Solver {
        kernel,
        y: yf,
        c: params.c,
        alpha: vec![0.0; n],
        f: vec![0.0; n],
        bias: 0.0,
    };

    // Examine tolerance tighter than the audited kkt_tol so the dual
    // objective lands well inside the oracle comparison band.
    let tol = (params.kkt_tol * 1e-3).max(1e-8);
    let max_iter = params.effective_max_iter(n);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut quiet_passes = 0usize;
    let mut updates = 0usize;

    'outer: while quiet_passes < params.max_passes && updates < max_iter {
        let mut changed = 0usize;
        for i in 0..n {
            if !solver.violates_kkt(i, tol) {
                continue;
            }
            let mut stepped = false;
            let j = rng.random_range(0..n);
            if solver.take_step(i, j) {
                stepped = true;
            } else {
                let start = rng.random_range(0..n);
                for off in 0..n {
                    if solver.take_step(i, (start + off) % n) {
                        stepped = true;
                        break;
                    }
                }
            }
            if stepped {
                changed += 1;
                updates += 1;
                if updates >= max_iter {
                    break 'outer;
                }
            }
        }
        if changed == 0 {
            quiet_passes += 1;
        } else {
            quiet_passes = 0;
        }
    }

    // Recompute the bias from free support vectors when any exist; the
    // running SMO bias is kept otherwise.
    let free_tol = (params.c * 1e-8).max(1e-12);
    let free: Vec<usize> = (0..n)
        .filter(|&i| solver.alpha[i] > free_tol && solver.alpha[i] < params.c - free_tol)
        .collect();
    let bias = if free.is_empty() {
        solver.bias
    } else {
        free.iter()
            .map(|&i| {
                let wx: f64 = (0..n)
                    .map(|j| solver.alpha[j] * solver.y[j] * solver.kernel.get(j, i))
                    .sum();
                solver.y[i] - wx
            })
            .sum::<f64>()
            / free.len() as f64
    };

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for i in 0..n {
        if solver.alpha[i] > 1e-12 {
            support_vectors.push(x[i].clone());
            dual_coefs.push(solver.alpha[i] * solver.y[i]);
        }
    }
    let model = BinarySvmModel { support_vectors, dual_coefs, bias, gamma: params.gamma };
    Ok((model, solver.alpha))
}

/// Train a binary RBF-SVM. See [`train_binary_smo_full`] for the variant
/// that also exposes the dual variables.
pub fn train_binary_smo(
    x: &[Embedding],
    y: &[i8],
    params: &TrainParams,
) -> Result<BinarySvmModel, SvmError> {
    train_binary_smo_full(x, y, params).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::decision_function;

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec())
    }

    #[test]
    fn two_point_symmetric_solution() {
        // unit distance, gamma 0.1: alpha = 1/(1 - e^-0.1), bias 0
        let x = vec![emb(&[0.0, 0.0]), emb(&[1.0, 0.0])];
        let y = vec![1i8, -1];
        let params = TrainParams::default();
        let (model, alpha) = train_binary_smo_full(&x, &y, &params).unwrap();
        let expected = 1.0 / (1.0 - (-0.1f64).exp());
        assert!((alpha[0] - expected).abs() < 1e-6, "alpha0 {}", alpha[0]);
        assert!((alpha[1] - expected).abs() < 1e-6, "alpha1 {}", alpha[1]);
        assert!(model.bias.abs() < 1e-6, "bias {}", model.bias);

        let mid = emb(&[0.5, 0.0]);
        assert!(decision_function(&model, &mid).unwrap().abs() < 1e-6);
        // free SV lies on the margin
        let f1 = decision_function(&model, &x[0]).unwrap();
        assert!((f1 - 1.0).abs() < 1e-3, "f(x1) {f1}");
    }

    #[test]
    fn xor_reaches_full_training_accuracy() {
        let x = vec![
            emb(&[0.0, 0.0]),
            emb(&[1.0, 1.0]),
            emb(&[0.0, 1.0]),
            emb(&[1.0, 0.0]),
        ];
        let y = vec![1i8, 1, -1, -1];
        let params = TrainParams { gamma: 0.5, ..Default::default() };
        let model = train_binary_smo(&x, &y, &params).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            let d = decision_function(&model, xi).unwrap();
            assert!(d * yi as f64 > 0.0, "point misclassified: f={d}, y={yi}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![emb(&[0.0]), emb(&[1.0])];
        assert!(matches!(
            train_binary_smo(&x, &[1, 1], &TrainParams::default()),
            Err(SvmError::SingleClassInput)
        ));
    }

    #[test]
    fn identical_points_are_degenerate() {
        let x = vec![emb(&[0.5, 0.5]), emb(&[0.5, 0.5])];
        assert!(matches!(
            train_binary_smo(&x, &[1, -1], &TrainParams::default()),
            Err(SvmError::DegenerateInput)
        ));
    }

    #[test]
    fn dual_feasibility_holds() {
        // interleaved blobs with some overlap
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..12 {
            let t = i as f32 * 0.37;
            x.push(emb(&[t.sin(), t.cos()]));
            y.push(1i8);
            x.push(emb(&[t.sin() + 1.2, t.cos() - 0.4]));
            y.push(-1i8);
        }
        let params = TrainParams { c: 5.0, gamma: 0.7, ..Default::default() };
        let (model, alpha) = train_binary_smo_full(&x, &y, &params).unwrap();
        let bal: f64 = alpha.iter().zip(&y).map(|(&a, &l)| a * l as f64).sum();
        assert!(bal.abs() < 1e-6, "sum alpha_i y_i = {bal}");
        for &a in &alpha {
            assert!((-1e-9..=params.c + 1e-9).contains(&a));
        }
        assert!(!model.support_vectors.is_empty());
    }

    #[test]
    fn retraining_is_deterministic() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            let t = i as f32 * 0.61;
            x.push(emb(&[t.sin(), (2.0 * t).cos()]));
            y.push(if i % 2 == 0 { 1i8 } else { -1 });
        }
        let params = TrainParams { c: 10.0, gamma: 0.5, ..Default::default() };
        let a = train_binary_smo(&x, &y, &params).unwrap();
        let b = train_binary_smo(&x, &y, &params).unwrap();
        assert_eq!(a, b);
    }
}
