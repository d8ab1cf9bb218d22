//! Speaker-disjoint splitting, confusion matrices, accuracy and per-class
//! precision/recall/F1, and evaluation reports.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::dataset::LabeledEmbedding;
use crate::embed::Embedding;
use crate::svm::SvmError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    EmptyEval,
    #[error("length mismatch: {truth} truth labels vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {0} is not in the class list")]
    UnknownLabel(String),
    #[error("speaker-disjoint split needs at least 2 distinct speakers, found {0}")]
    TooFewSpeakers(usize),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error("prediction failed: {0}")]
    Predict(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub speaker_disjoint: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, seed: 42, speaker_disjoint: true }
    }
}

/// Split rows into train and test. In speaker-disjoint mode the distinct
/// speakers are shuffled by the seeded generator and assigned greedily to
/// train until the train utterance share reaches `train_fraction`; no
/// speaker ends up on both sides. Deterministic per seed.
pub fn split_speaker_disjoint(
    data: &[LabeledEmbedding],
    spec: &SplitSpec,
) -> Result<(Vec<LabeledEmbedding>, Vec<LabeledEmbedding>), EvalError> {
    assert!(
        spec.train_fraction > 0.0 && spec.train_fraction < 1.0,
        "train_fraction must be in (0, 1)"
    );
    if data.is_empty() {
        return Err(EvalError::EmptyEval);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    if !spec.speaker_disjoint {
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.shuffle(&mut rng);
        let n_train = (spec.train_fraction * data.len() as f64).round() as usize;
        let (a, b) = idx.split_at(n_train.min(data.len()));
        return Ok((
            a.iter().map(|&i| data[i].clone()).collect(),
            b.iter().map(|&i| data[i].clone()).collect(),
        ));
    }

    // distinct speakers in first-appearance order, then seeded shuffle
    let mut speakers: Vec<&str> = Vec::new();
    for r in data {
        if !speakers.contains(&r.speaker_id.as_str()) {
            speakers.push(&r.speaker_id);
        }
    }
    if speakers.len() < 2 {
        return Err(EvalError::TooFewSpeakers(speakers.len()));
    }
    speakers.shuffle(&mut rng);

    let total = data.len() as f64;
    let mut train_speakers: Vec<&str> = Vec::new();
    let mut train_count = 0usize;
    for &spk in &speakers {
        if train_count as f64 / total >= spec.train_fraction {
            break;
        }
        train_count += data.iter().filter(|r| r.speaker_id == spk).count();
        train_speakers.push(spk);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for r in data {
        if train_speakers.contains(&r.speaker_id.as_str()) {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    Ok((train, test))
}

/// Counts by (true, predicted) class; rows are true classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix<L> {
    pub classes: Vec<L>,
    pub counts: Vec<Vec<usize>>,
}

impl<L: Clone + Eq + fmt::Display> ConfusionMatrix<L> {
    pub fn from_pairs(truth: &[L], pred: &[L], classes: &[L]) -> Result<Self, EvalError> {
        if truth.len() != pred.len() {
            return Err(EvalError::LengthMismatch { truth: truth.len(), pred: pred.len() });
        }
        let k = classes.len();
        let mut counts = vec![vec![0usize; k]; k];
        for (t, p) in truth.iter().zip(pred) {
            let ti = classes
                .iter()
                .position(|c| c == t)
                .ok_or_else(|| EvalError::UnknownLabel(t.to_string()))?;
            let pi = classes
                .iter()
                .position(|c| c == p)
                .ok_or_else(|| EvalError::UnknownLabel(p.to_string()))?;
            counts[ti][pi] += 1;
        }
        Ok(ConfusionMatrix { classes: classes.to_vec(), counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> Result<f64, EvalError> {
        let total = self.total();
        if total == 0 {
            return Err(EvalError::EmptyEval);
        }
        Ok(self.correct() as f64 / total as f64)
    }

    /// CSV grid: header row of predicted classes, one row per true class.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let mut out = String::new();
        out.push_str("true\\pred");
        for c in &self.classes {
            out.push(',');
            out.push_str(&c.to_string());
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.counts) {
            out.push_str(&c.to_string());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class precision, recall and F1; any 0/0 is 0 by convention.
pub fn f1_per_class<L: Clone + Eq + fmt::Display>(
    cm: &ConfusionMatrix<L>,
) -> Result<Vec<(L, ClassMetrics)>, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyEval);
    }
    let k = cm.classes.len();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let tp = cm.counts[i][i] as f64;
        let fp: f64 = (0..k).filter(|&j| j != i).map(|j| cm.counts[j][i] as f64).sum();
        let fn_: f64 = (0..k).filter(|&j| j != i).map(|j| cm.counts[i][j] as f64).sum();
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        out.push((cm.classes[i].clone(), ClassMetrics { precision, recall, f1 }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<L> {
    pub confusion: ConfusionMatrix<L>,
    pub accuracy: f64,
    pub per_class: Vec<(L, ClassMetrics)>,
    pub n_discarded: usize,
}

impl<L: Serialize> EvalReport<L> {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

impl<L: DeserializeOwned> EvalReport<L> {
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

impl<L: Clone + Eq + fmt::Display> fmt::Display for EvalReport<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy: {:.4}  (n={}, discarded={})", self.accuracy, self.confusion.total(), self.n_discarded)?;
        writeln!(f, "{:<16} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1")?;
        for (label, m) in &self.per_class {
            writeln!(f, "{:<16} {:>9.4} {:>9.4} {:>9.4}", label.to_string(), m.precision, m.recall, m.f1)?;
        }
        writeln!(f, "confusion (rows = true, cols = predicted):")?;
        write!(f, "{:<10}", "")?;
        for c in &self.confusion.classes {
            write!(f, "{:>9}", c.to_string())?;
        }
        writeln!(f)?;
        for (c, row) in self.confusion.classes.iter().zip(&self.confusion.counts) {
            write!(f, "{:<10}", c.to_string())?;
            for v in row {
                write!(f, "{v:>9}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Run a predictor over every test embedding and assemble the full report.
pub fn evaluate<L, E, F>(
    mut predict: F,
    test: &[(Embedding, L)],
    classes: &[L],
    n_discarded: usize,
) -> Result<EvalReport<L>, EvalError>
where
    L: Clone + Eq + fmt::Display,
    E: Into<EvalError>,
    F: FnMut(&Embedding) -> Result<L, E>,
{
    if test.is_empty() {
        return Err(EvalError::EmptyEval);
    }
    let truth: Vec<L> = test.iter().map(|(_, l)| l.clone()).collect();
    let mut pred = Vec::with_capacity(test.len());
    for (x, _) in test {
        pred.push(predict(x).map_err(Into::into)?);
    }
    let confusion = ConfusionMatrix::from_pairs(&truth, &pred, classes)?;
    let accuracy = confusion.accuracy()?;
    let per_class = f1_per_class(&confusion)?;
    Ok(EvalReport { confusion, accuracy, per_class, n_discarded })
}
