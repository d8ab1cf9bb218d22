//! Classifier heads over utterance embeddings: flat 4-class SVM, two-stage
//! hierarchical classifier (Sad-First by default), and the binary
//! Neutral-vs-emotion detector.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::dataset::{EmotionLabel, LabeledEmbedding, FOUR_CLASS};
use crate::embed::Embedding;
use crate::svm::{
    decision_function, load_binary, load_multiclass, predict_multiclass, save_binary,
    save_multiclass, train_binary_smo, train_multiclass, BinarySvmModel, MulticlassSvmModel,
    SvmError, TrainParams,
};

impl From<ClfError> for crate::eval::EvalError {
    fn from(e: ClfError) -> Self {
        match e {
            ClfError::Svm(s) => crate::eval::EvalError::Svm(s),
            other => crate::eval::EvalError::Predict(other.to_string()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ClfError {
    #[error("missing classes in training data: {0:?}")]
    MissingClass(Vec<EmotionLabel>),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error("bad bundle: {0}")]
    BadBundle(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Two SVMs in sequence: stage 1 separates `first_class` from the rest,
/// stage 2 is a one-vs-one model over the remaining three classes and is
/// only consulted when stage 1 does not fire.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalClassifier {
    pub first_class: EmotionLabel,
    pub stage1: BinarySvmModel,
    pub stage2: MulticlassSvmModel,
}

/// Output classes of the emotion detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectorClass {
    Neutral,
    EmotionPresent,
}

impl fmt::Display for DetectorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorClass::Neutral => f.write_str("Neutral"),
            DetectorClass::EmotionPresent => f.write_str("EmotionPresent"),
        }
    }
}

fn require_classes(
    train: &[LabeledEmbedding],
    required: &[EmotionLabel],
) -> Result<(), ClfError> {
    let missing: Vec<EmotionLabel> = required
        .iter()
        .copied()
        .filter(|c| !train.iter().any(|r| r.emotion == *c))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ClfError::MissingClass(missing))
    }
}

/// Baseline head: single one-vs-one SVM over Angry/Sad/Happy/Neutral.
/// Rows outside the 4-class set are ignored.
pub fn train_flat(
    train: &[LabeledEmbedding],
    params: &TrainParams,
) -> Result<MulticlassSvmModel, ClfError> {
    require_classes(train, &FOUR_CLASS)?;
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for r in train {
        if FOUR_CLASS.contains(&r.emotion) {
            x.push(r.embedding.clone());
            labels.push(r.emotion.code());
        }
    }
    Ok(train_multiclass(&x, &labels, params)?)
}

pub fn predict_flat(
    model: &MulticlassSvmModel,
    x: &Embedding,
) -> Result<EmotionLabel, ClfError> {
    let code = predict_multiclass(model, x)?;
    EmotionLabel::from_code(code).ok_or(ClfError::Svm(SvmError::UnknownClass(code)))
}

/// Stage 1 is trained on all 4-class samples relabeled first-vs-rest;
/// stage 2 only on the non-first samples.
pub fn train_hierarchical(
    train: &[LabeledEmbedding],
    first_class: EmotionLabel,
    params: &TrainParams,
) -> Result<HierarchicalClassifier, ClfError> {
    require_classes(train, &FOUR_CLASS)?;
    let mut s1_x = Vec::new();
    let mut s1_y = Vec::new();
    let mut s2_x = Vec::new();
    let mut s2_labels = Vec::new();
    for r in train {
        if !FOUR_CLASS.contains(&r.emotion) {
            continue;
        }
        s1_x.push(r.embedding.clone());
        s1_y.push(if r.emotion == first_class { 1i8 } else { -1 });
        if r.emotion != first_class {
            s2_x.push(r.embedding.clone());
            s2_labels.push(r.emotion.code());
        }
    }
    let stage1 = train_binary_smo(&s1_x, &s1_y, params)?;
    let stage2 = train_multiclass(&s2_x, &s2_labels, params)?;
    Ok(HierarchicalClassifier { first_class, stage1, stage2 })
}

/// Stage-1 decision strictly above zero returns `first_class`; otherwise the
/// sample falls through to stage 2.
pub fn predict_hierarchical(
    hc: &HierarchicalClassifier,
    x: &Embedding,
) -> Result<EmotionLabel, ClfError> {
    if decision_function(&hc.stage1, x)? > 0.0 {
        return Ok(hc.first_class);
    }
    let code = predict_multiclass(&hc.stage2, x)?;
    EmotionLabel::from_code(code).ok_or(ClfError::Svm(SvmError::UnknownClass(code)))
}

/// Binary detector: Neutral maps to -1, every other emotion to +1.
pub fn train_detector(
    train: &[LabeledEmbedding],
    params: &TrainParams,
) -> Result<BinarySvmModel, ClfError> {
    let has_neutral = train.iter().any(|r| r.emotion == EmotionLabel::Neutral);
    let has_emotion = train.iter().any(|r| r.emotion != EmotionLabel::Neutral);
    if !has_neutral || !has_emotion {
        return Err(ClfError::MissingClass(vec![EmotionLabel::Neutral]));
    }
    let x: Vec<Embedding> = train.iter().map(|r| r.embedding.clone()).collect();
    let y: Vec<i8> = train
        .iter()
        .map(|r| if r.emotion == EmotionLabel::Neutral { -1i8 } else { 1 })
        .collect();
    Ok(train_binary_smo(&x, &y, params)?)
}

/// Decision sign, with zero treated as Neutral.
pub fn predict_detector(
    model: &BinarySvmModel,
    x: &Embedding,
) -> Result<DetectorClass, ClfError> {
    if decision_function(model, x)? > 0.0 {
        Ok(DetectorClass::EmotionPresent)
    } else {
        Ok(DetectorClass::Neutral)
    }
}

/// A trained head plus the metadata needed to reload and audit it.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierBundle {
    Flat(MulticlassSvmModel),
    Hierarchical(HierarchicalClassifier),
    Detector(BinarySvmModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub head: String,
    pub first_class: Option<EmotionLabel>,
    pub classes: Vec<u8>,
    pub dim: usize,
    pub params: TrainParams,
    pub config_hash: String,
}

/// FNV-1a over the serialized params, recorded in reports for provenance.
pub fn config_hash(params: &TrainParams) -> String {
    let json = serde_json::to_string(params).expect("params serialize");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in json.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

impl ClassifierBundle {
    pub fn head_name(&self) -> &'static str {
        match self {
            ClassifierBundle::Flat(_) => "flat",
            ClassifierBundle::Hierarchical(_) => "hierarchical",
            ClassifierBundle::Detector(_) => "detector",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ClassifierBundle::Flat(m) => m.dim(),
            ClassifierBundle::Hierarchical(h) => h.stage1.dim(),
            ClassifierBundle::Detector(m) => m.dim(),
        }
    }

    /// Serialize as a directory: stage models in SVM1 files plus a JSON
    /// manifest recording head type, classes, dim and the training params.
    pub fn save(&self, dir: impl AsRef<Path>, params: &TrainParams) -> Result<(), ClfError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let (first_class, classes) = match self {
            ClassifierBundle::Flat(m) => {
                save_multiclass(m, dir.join("flat.svm1"))?;
                (None, m.classes.clone())
            }
            ClassifierBundle::Hierarchical(h) => {
                save_binary(&h.stage1, dir.join("stage1.svm1"))?;
                save_multiclass(&h.stage2, dir.join("stage2.svm1"))?;
                let mut classes = vec![h.first_class.code()];
                classes.extend(&h.stage2.classes);
                classes.sort_unstable();
                (Some(h.first_class), classes)
            }
            ClassifierBundle::Detector(m) => {
                save_binary(m, dir.join("detector.svm1"))?;
                (None, vec![EmotionLabel::Neutral.code()])
            }
        };
        let manifest = BundleManifest {
            head: self.head_name().to_string(),
            first_class,
            classes,
            dim: self.dim(),
            params: params.clone(),
            config_hash: config_hash(params),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        fs::write(dir.join("manifest.json"), json)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<(ClassifierBundle, BundleManifest), ClfError> {
        let dir = dir.as_ref();
        let manifest: BundleManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let bundle = match manifest.head.as_str() {
            "flat" => ClassifierBundle::Flat(load_multiclass(dir.join("flat.svm1"))?),
            "hierarchical" => {
                let first_class = manifest
                    .first_class
                    .ok_or_else(|| ClfError::BadBundle("hierarchical bundle without first_class".into()))?;
                ClassifierBundle::Hierarchical(HierarchicalClassifier {
                    first_class,
                    stage1: load_binary(dir.join("stage1.svm1"))?,
                    stage2: load_multiclass(dir.join("stage2.svm1"))?,
                })
            }
            "detector" => ClassifierBundle::Detector(load_binary(dir.join("detector.svm1"))?),
            other => return Err(ClfError::BadBundle(format!("unknown head type {other}"))),
        };
        Ok((bundle, manifest))
    }

    /// Predict an emotion label; the detector reports Neutral for its
    /// negative class and keeps the true non-neutral distinction out of scope.
    pub fn predict_label(&self, x: &Embedding) -> Result<EmotionLabel, ClfError> {
        match self {
            ClassifierBundle::Flat(m) => predict_flat(m, x),
            ClassifierBundle::Hierarchical(h) => predict_hierarchical(h, x),
            ClassifierBundle::Detector(m) => match predict_detector(m, x)? {
                DetectorClass::Neutral => Ok(EmotionLabel::Neutral),
                // detector has no specific emotion; Angry stands in for "present"
                DetectorClass::EmotionPresent => Ok(EmotionLabel::Angry),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_synthetic_corpus, SynthConfig};

    fn corpus() -> Vec<LabeledEmbedding> {
        let cfg = SynthConfig {
            n_speakers: 6,
            utterances_per_cell: 3,
            dim: 16,
            emotions: FOUR_CLASS.to_vec(),
            seed: 11,
            ..Default::default()
        };
        gen_synthetic_corpus(&cfg).unwrap()
    }

    fn fast_params() -> TrainParams {
        TrainParams { c: 100.0, gamma: 0.5, ..Default::default() }
    }

    #[test]
    fn flat_requires_all_four_classes() {
        let train: Vec<LabeledEmbedding> = corpus()
            .into_iter()
            .filter(|r| r.emotion != EmotionLabel::Happy)
            .collect();
        match train_flat(&train, &fast_params()) {
            Err(ClfError::MissingClass(missing)) => assert_eq!(missing, vec![EmotionLabel::Happy]),
            other => panic!("expected MissingClass, got {other:?}"),
        }
    }

    #[test]
    fn flat_has_six_pairwise_models() {
        let model = train_flat(&corpus(), &fast_params()).unwrap();
        assert_eq!(model.pairwise.len(), 6);
        assert_eq!(model.classes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn hierarchical_default_stage2_classes() {
        let hc = train_hierarchical(&corpus(), EmotionLabel::Sad, &fast_params()).unwrap();
        assert_eq!(hc.first_class, EmotionLabel::Sad);
        assert_eq!(
            hc.stage2.classes,
            vec![
                EmotionLabel::Angry.code(),
                EmotionLabel::Happy.code(),
                EmotionLabel::Neutral.code()
            ]
        );
    }

    #[test]
    fn hierarchical_neutral_first_stage2_classes() {
        let hc = train_hierarchical(&corpus(), EmotionLabel::Neutral, &fast_params()).unwrap();
        assert_eq!(
            hc.stage2.classes,
            vec![
                EmotionLabel::Angry.code(),
                EmotionLabel::Sad.code(),
                EmotionLabel::Happy.code()
            ]
        );
    }

    #[test]
    fn hierarchical_prediction_consistent_with_stage1_sign() {
        let data = corpus();
        let hc = train_hierarchical(&data, EmotionLabel::Sad, &fast_params()).unwrap();
        for r in &data {
            let d = decision_function(&hc.stage1, &r.embedding).unwrap();
            let pred = predict_hierarchical(&hc, &r.embedding).unwrap();
            assert_eq!(pred == EmotionLabel::Sad, d > 0.0);
        }
    }

    #[test]
    fn stage1_firing_overrides_stage2() {
        let data = corpus();
        let hc = train_hierarchical(&data, EmotionLabel::Sad, &fast_params()).unwrap();
        // any sample with positive stage-1 decision must come back Sad
        let fired: Vec<_> = data
            .iter()
            .filter(|r| decision_function(&hc.stage1, &r.embedding).unwrap() > 0.0)
            .collect();
        assert!(!fired.is_empty());
        for r in fired {
            assert_eq!(predict_hierarchical(&hc, &r.embedding).unwrap(), EmotionLabel::Sad);
        }
    }

    #[test]
    fn detector_labels_and_perfect_fixture() {
        let data = corpus();
        let model = train_detector(&data, &fast_params()).unwrap();
        let mut correct = 0;
        for r in &data {
            let want = if r.emotion == EmotionLabel::Neutral {
                DetectorClass::Neutral
            } else {
                DetectorClass::EmotionPresent
            };
            if predict_detector(&model, &r.embedding).unwrap() == want {
                correct += 1;
            }
        }
        assert!(correct as f64 / data.len() as f64 >= 0.95, "{correct}/{}", data.len());
    }

    #[test]
    fn detector_requires_both_sides() {
        let only_neutral: Vec<LabeledEmbedding> = corpus()
            .into_iter()
            .filter(|r| r.emotion == EmotionLabel::Neutral)
            .collect();
        assert!(matches!(
            train_detector(&only_neutral, &fast_params()),
            Err(ClfError::MissingClass(_))
        ));
    }

    #[test]
    fn bundles_roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let data = corpus();
        let params = fast_params();

        let flat = ClassifierBundle::Flat(train_flat(&data, &params).unwrap());
        let hc = ClassifierBundle::Hierarchical(
            train_hierarchical(&data, EmotionLabel::Sad, &params).unwrap(),
        );
        let det = ClassifierBundle::Detector(train_detector(&data, &params).unwrap());

        for (name, bundle) in [("flat", flat), ("hc", hc), ("det", det)] {
            let path = dir.path().join(name);
            bundle.save(&path, &params).unwrap();
            let (loaded, manifest) = ClassifierBundle::load(&path).unwrap();
            assert_eq!(loaded, bundle);
            assert_eq!(manifest.head, bundle.head_name());
            assert_eq!(manifest.dim, bundle.dim());
            assert_eq!(manifest.config_hash, config_hash(&params));
        }
    }

    #[test]
    fn retraining_reproduces_predictions() {
        let data = corpus();
        let params = fast_params();
        let a = train_flat(&data, &params).unwrap();
        let b = train_flat(&data, &params).unwrap();
        for r in &data {
            assert_eq!(
                predict_flat(&a, &r.embedding).unwrap(),
                predict_flat(&b, &r.embedding).unwrap()
            );
        }
    }
}
