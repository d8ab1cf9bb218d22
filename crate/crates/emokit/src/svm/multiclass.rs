//! One-vs-one multiclass reduction with majority voting.

use super::{decision_function, train_binary_smo, BinarySvmModel, SvmError, TrainParams};
use crate::embed::Embedding;

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseModel {
    /// Lower class code; mapped to +1 during pair training.
    pub class_a: u8,
    /// Higher class code; mapped to -1.
    pub class_b: u8,
    pub model: BinarySvmModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvmModel {
    /// Distinct class codes in ascending order.
    pub classes: Vec<u8>,
    /// One binary model per unordered class pair, k(k-1)/2 in total.
    pub pairwise: Vec<PairwiseModel>,
}

impl MulticlassSvmModel {
    pub fn dim(&self) -> usize {
        self.pairwise.first().map(|p| p.model.dim()).unwrap_or(0)
    }
}

/// Train one binary model per class pair, each on that pair's samples only.
pub fn train_multiclass(
    x: &[Embedding],
    labels: &[u8],
    params: &TrainParams,
) -> Result<MulticlassSvmModel, SvmError> {
    if x.len() != labels.len() {
        return Err(SvmError::LengthMismatch { x: x.len(), y: labels.len() });
    }
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(SvmError::TooFewClasses);
    }

    let mut pairwise = Vec::with_capacity(classes.len() * (classes.len() - 1) / 2);
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            let mut px = Vec::new();
            let mut py = Vec::new();
            for (xi, &li) in x.iter().zip(labels) {
                if li == a {
                    px.push(xi.clone());
                    py.push(1i8);
                } else if li == b {
                    px.push(xi.clone());
                    py.push(-1i8);
                }
            }
            let model = train_binary_smo(&px, &py, params).map_err(|e| SvmError::PairFailed {
                class_a: a,
                class_b: b,
                source: Box::new(e),
            })?;
            pairwise.push(PairwiseModel { class_a: a, class_b: b, model });
        }
    }
    Ok(MulticlassSvmModel { classes, pairwise })
}

/// Majority vote over pairwise decisions. Each pair votes for its lower
/// class when the decision value is strictly positive. Ties go to the tied
/// class with the largest sum of |decision| values (clamped to [-1, 1])
/// over pairs among the tied classes, then to the lowest class code.
pub fn predict_multiclass(model: &MulticlassSvmModel, x: &Embedding) -> Result<u8, SvmError> {
    let mut votes: Vec<usize> = vec![0; model.classes.len()];
    let mut decisions = Vec::with_capacity(model.pairwise.len());
    for pair in &model.pairwise {
        let d = decision_function(&pair.model, x)?;
        decisions.push(d);
        let winner = if d > 0.0 { pair.class_a } else { pair.class_b };
        let idx = model.classes.iter().position(|&c| c == winner).expect("class in list");
        votes[idx] += 1;
    }

    let top = *votes.iter().max().expect("at least one class");
    let tied: Vec<u8> = model
        .classes
        .iter()
        .zip(&votes)
        .filter(|&(_, &v)| v == top)
        .map(|(&c, _)| c)
        .collect();
    if tied.len() == 1 {
        return Ok(tied[0]);
    }

    let mut best = tied[0];
    let mut best_score = f64::NEG_INFINITY;
    for &c in &tied {
        let score: f64 = model
            .pairwise
            .iter()
            .zip(&decisions)
            .filter(|(p, _)| {
                (p.class_a == c && tied.contains(&p.class_b))
                    || (p.class_b == c && tied.contains(&p.class_a))
            })
            .map(|(_, &d)| d.clamp(-1.0, 1.0).abs())
            .sum();
        if score > best_score + 1e-15 {
            best_score = score;
            best = c;
        }
    }
    Ok(best)
}
