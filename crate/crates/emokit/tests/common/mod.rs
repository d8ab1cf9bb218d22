//! Independent reference implementations used to audit the trained models.
//!
//! Nothing here shares code with the SMO path: the dual problem is solved by
//! projected gradient ascent with a bisection projection, and the multiclass
//! baseline is a plain nearest-centroid rule.

use emokit::dataset::LabeledEmbedding;
use emokit::embed::Embedding;
use emokit::svm::rbf_kernel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Project v onto {0 <= a <= C} intersected with {sum_i a_i y_i = 0}.
/// The shifted clamp sum is monotone in the multiplier, so bisection works.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let residual = |lambda: f64| -> f64 {
        v.iter()
            .zip(y)
            .map(|(&vi, &yi)| yi * (vi - lambda * yi).clamp(0.0, c))
            .sum()
    };
    let bound = c + v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    v.iter().zip(y).map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c)).collect()
}

pub fn kernel_matrix(x: &[Embedding], gamma: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = rbf_kernel(&x[i], &x[j], gamma).unwrap();
        }
    }
    k
}

pub fn dual_objective(alpha: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Reference dual solution by projected gradient ascent. Returns
/// (alpha, objective value).
pub fn pg_dual_solve(x: &[Embedding], y_i8: &[i8], c: f64, gamma: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let y: Vec<f64> = y_i8.iter().map(|&v| v as f64).collect();
    let k = kernel_matrix(x, gamma);

    // spectral radius of Q = yy' .* K is bounded by its max row sum
    let lip = (0..n)
        .map(|i| (0..n).map(|j| k[i][j].abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let step = 1.0 / lip;

    let mut alpha = project(&vec![0.0; n], &y, c);
    let mut prev_obj = f64::NEG_INFINITY;
    for iter in 0..200_000 {
        let mut grad = vec![1.0; n];
        for i in 0..n {
            let mut qa = 0.0;
            for j in 0..n {
                qa += y[i] * y[j] * k[i][j] * alpha[j];
            }
            grad[i] -= qa;
        }
        let v: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
        alpha = project(&v, &y, c);
        if iter % 500 == 499 {
            let obj = dual_objective(&alpha, &y, &k);
            if (obj - prev_obj).abs() <= 1e-12 * obj.abs().max(1.0) {
                break;
            }
            prev_obj = obj;
        }
    }
    let obj = dual_objective(&alpha, &y, &k);
    (alpha, obj)
}

/// KKT audit of an alpha vector against the stated tolerance.
/// Uses the decision values implied by alpha and a bias recovered from the
/// free support vectors (independently of the solver's stored bias).
pub fn kkt_audit(x: &[Embedding], y_i8: &[i8], alpha: &[f64], c: f64, gamma: f64, tol: f64) -> bool {
    let n = x.len();
    let y: Vec<f64> = y_i8.iter().map(|&v| v as f64).collect();
    let k = kernel_matrix(x, gamma);
    let raw: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum())
        .collect();

    let edge = 1e-6 * c;
    let free: Vec<usize> =
        (0..n).filter(|&i| alpha[i] > edge && alpha[i] < c - edge).collect();
    let bias = if free.is_empty() {
        // fall back to the midpoint of the feasible bias interval
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let v = y[i] - raw[i];
            // at alpha=0 need y f >= 1, at alpha=C need y f <= 1
            if (alpha[i] <= edge && y[i] > 0.0) || (alpha[i] >= c - edge && y[i] < 0.0) {
                lo = lo.max(v);
            } else {
                hi = hi.min(v);
            }
        }
        if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo
        } else {
            hi.min(0.0).max(-1e6)
        }
    } else {
        free.iter().map(|&i| y[i] - raw[i]).sum::<f64>() / free.len() as f64
    };

    for i in 0..n {
        let margin = y[i] * (raw[i] + bias);
        let ok = if alpha[i] <= edge {
            margin >= 1.0 - tol
        } else if alpha[i] >= c - edge {
            margin <= 1.0 + tol
        } else {
            (margin - 1.0).abs() <= tol
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Random small binary instance: two gaussian clouds with a seeded shift.
pub fn random_instance(seed: u64) -> (Vec<Embedding>, Vec<i8>, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=20usize);
    let dim = rng.random_range(1..=8usize);
    let c = [0.5, 1.0, 5.0, 10.0, 50.0][rng.random_range(0..5usize)];
    let gamma = [0.1, 0.5, 1.0][rng.random_range(0..3usize)];
    let shift: Vec<f64> =
        (0..dim).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();

    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        // alternate labels so both classes are always present
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let point: Vec<f32> = (0..dim)
            .map(|d| {
                let base = if label == 1 { shift[d] } else { -shift[d] };
                (base + rng.sample::<f64, _>(StandardNormal)) as f32
            })
            .collect();
        x.push(Embedding::new(point));
        y.push(label);
    }
    (x, y, c, gamma)
}

/// Nearest-centroid baseline over labeled embeddings.
pub struct CentroidModel {
    pub centroids: Vec<(emokit::dataset::EmotionLabel, Vec<f64>)>,
}

pub fn centroid_train(train: &[LabeledEmbedding]) -> CentroidModel {
    let mut by_class: std::collections::BTreeMap<_, (Vec<f64>, usize)> =
        std::collections::BTreeMap::new();
    for r in train {
        let dim = r.embedding.dim();
        let entry = by_class.entry(r.emotion).or_insert_with(|| (vec![0.0; dim], 0));
        for (acc, v) in entry.0.iter_mut().zip(&r.embedding.values) {
            *acc += *v as f64;
        }
        entry.1 += 1;
    }
    let centroids = by_class
        .into_iter()
        .map(|(label, (sum, count))| {
            (label, sum.into_iter().map(|s| s / count as f64).collect())
        })
        .collect();
    CentroidModel { centroids }
}

pub fn centroid_predict(model: &CentroidModel, x: &Embedding) -> emokit::dataset::EmotionLabel {
    model
        .centroids
        .iter()
        .map(|(label, c)| {
            let d: f64 = c
                .iter()
                .zip(&x.values)
                .map(|(ci, xi)| (ci - *xi as f64).powi(2))
                .sum();
            (*label, d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(label, _)| label)
        .expect("non-empty centroid model")
}
