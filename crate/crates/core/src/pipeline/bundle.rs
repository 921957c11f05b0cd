use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::container::{Container, FORMAT_VERSION};
use crate::dataflow::{FeatureSchema, NormStats, RawTable, VocabMap, VocabMode};
use crate::error::{Error, Result};
use crate::lstm::{predict_table, window, window_ends, ClassifierSpec, LstmCell, LstmClassifier};
use crate::numerics::{Activation, DenseLayer, Matrix};
use crate::sae::{SaeModel, SAE_DIMS};

const KIND_BUNDLE: &str = "bundle";
const KIND_SAE: &str = "sae";
const KIND_CLASSIFIER: &str = "classifier";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SaeHeader {
    seed: u64,
    activations: Vec<Activation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleHeader {
    kind: String,
    config_fingerprint: String,
    schema: FeatureSchema,
    vocab: VocabMap,
    vocab_mode: VocabMode,
    stats: NormStats,
    sae: SaeHeader,
    classifier: ClassifierSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PartHeader<T> {
    kind: String,
    model: T,
}

fn parse_header<T: DeserializeOwned>(c: &Container, want: &str) -> Result<T> {
    let kind = c.header.get("kind").and_then(|k| k.as_str()).unwrap_or("");
    if kind != want {
        return Err(Error::Format(format!("expected a '{want}' artifact, found '{kind}'")));
    }
    serde_json::from_value(c.header.clone()).map_err(|e| Error::Integrity {
        block: "header".into(),
        msg: e.to_string(),
    })
}

fn sae_header(sae: &SaeModel) -> SaeHeader {
    SaeHeader {
        seed: sae.seed(),
        activations: sae.layers().iter().map(|l| l.activation).collect(),
    }
}

fn push_sae(c: &mut Container, sae: &SaeModel) {
    for (i, l) in sae.layers().iter().enumerate() {
        c.push(format!("sae.{i}.weights"), l.weights.clone());
        c.push_vec(format!("sae.{i}.bias"), &l.bias);
    }
}

fn take_sae(c: &mut Container, h: &SaeHeader) -> Result<SaeModel> {
    if h.activations.len() != SAE_DIMS.len() - 1 {
        return Err(Error::Integrity {
            block: "header".into(),
            msg: format!("{} sae activations listed", h.activations.len()),
        });
    }
    let layers = h
        .activations
        .iter()
        .enumerate()
        .map(|(i, &act)| {
            let (fan_in, fan_out) = (SAE_DIMS[i], SAE_DIMS[i + 1]);
            let w = c.take_shaped(&format!("sae.{i}.weights"), fan_out, fan_in)?;
            let b = c.take_vec(&format!("sae.{i}.bias"), fan_out)?;
            DenseLayer::new(w, b, act)
        })
        .collect::<Result<Vec<_>>>()?;
    SaeModel::from_layers(layers, h.seed)
}

fn push_classifier(c: &mut Container, clf: &LstmClassifier) {
    for (l, cell) in clf.cells.iter().enumerate() {
        c.push(format!("lstm.{l}.w"), cell.w.clone());
        c.push(format!("lstm.{l}.u"), cell.u.clone());
        c.push_vec(format!("lstm.{l}.b"), &cell.b);
    }
    c.push("head.weights", clf.head.weights.clone());
    c.push_vec("head.bias", &clf.head.bias);
}

fn take_classifier(c: &mut Container, spec: &ClassifierSpec) -> Result<LstmClassifier> {
    let g = 4 * spec.units;
    let cells = (0..spec.layers)
        .map(|l| {
            let d = if l == 0 { spec.input_dim } else { spec.units };
            let w = c.take_shaped(&format!("lstm.{l}.w"), g, d)?;
            let u = c.take_shaped(&format!("lstm.{l}.u"), g, spec.units)?;
            let b = c.take_vec(&format!("lstm.{l}.b"), g)?;
            LstmCell::from_parts(w, u, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let hw = c.take_shaped("head.weights", spec.classes, spec.units)?;
    let hb = c.take_vec("head.bias", spec.classes)?;
    Ok(LstmClassifier {
        cells,
        head: DenseLayer::new(hw, hb, Activation::Softmax)?,
        seq_len: spec.seq_len,
    })
}

fn ensure_consumed(c: &Container) -> Result<()> {
    match c.blocks.first() {
        Some(b) => Err(Error::Integrity {
            block: b.name.clone(),
            msg: "unexpected extra block".into(),
        }),
        None => Ok(()),
    }
}

/// Saves an SAE on its own (staged CLI workflow).
pub fn save_sae(sae: &SaeModel, path: &Path) -> Result<()> {
    let header = PartHeader {
        kind: KIND_SAE.to_string(),
        model: sae_header(sae),
    };
    let mut c = Container::new(serde_json::to_value(header)?);
    push_sae(&mut c, sae);
    c.save(path)
}

pub fn load_sae(path: &Path) -> Result<SaeModel> {
    let mut c = Container::load(path)?;
    let h: PartHeader<SaeHeader> = parse_header(&c, KIND_SAE)?;
    let sae = take_sae(&mut c, &h.model)?;
    ensure_consumed(&c)?;
    Ok(sae)
}

/// Saves a classifier on its own (staged CLI workflow).
pub fn save_classifier(clf: &LstmClassifier, path: &Path) -> Result<()> {
    let header = PartHeader {
        kind: KIND_CLASSIFIER.to_string(),
        model: clf.spec(),
    };
    let mut c = Container::new(serde_json::to_value(header)?);
    push_classifier(&mut c, clf);
    c.save(path)
}

pub fn load_classifier(path: &Path) -> Result<LstmClassifier> {
    let mut c = Container::load(path)?;
    let h: PartHeader<ClassifierSpec> = parse_header(&c, KIND_CLASSIFIER)?;
    let clf = take_classifier(&mut c, &h.model)?;
    ensure_consumed(&c)?;
    Ok(clf)
}

/// Everything needed to score raw records: preprocessing state plus both models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub format_version: u32,
    pub config_fingerprint: String,
    pub schema: FeatureSchema,
    pub vocab: VocabMap,
    pub vocab_mode: VocabMode,
    pub stats: NormStats,
    pub sae: SaeModel,
    pub classifier: LstmClassifier,
}

impl ModelBundle {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        schema: FeatureSchema,
        vocab: VocabMap,
        vocab_mode: VocabMode,
        stats: NormStats,
        sae: SaeModel,
        classifier: LstmClassifier,
        config_fingerprint: String,
    ) -> Result<Self> {
        let width = schema.feature_names().len();
        if stats.width() != width || sae.input_width() != width {
            return Err(Error::shape(
                "ModelBundle::new",
                format!("feature width {width}"),
                format!("stats {}, encoder input {}", stats.width(), sae.input_width()),
            ));
        }
        if sae.latent_width() != classifier.input_dim() {
            return Err(Error::shape(
                "ModelBundle::new",
                format!("classifier input {}", classifier.input_dim()),
                format!("encoder output {}", sae.latent_width()),
            ));
        }
        if classifier.classes() != schema.class_labels.len() {
            return Err(Error::shape(
                "ModelBundle::new",
                format!("{} classes", schema.class_labels.len()),
                classifier.classes(),
            ));
        }
        Ok(ModelBundle {
            format_version: FORMAT_VERSION,
            config_fingerprint,
            schema,
            vocab,
            vocab_mode,
            stats,
            sae,
            classifier,
        })
    }

    /// Encodes categoricals with the stored vocabularies and applies the stored scaling.
    pub fn prepare(&self, table: &RawTable) -> Result<Matrix> {
        let encoded = self.vocab.apply(table, self.vocab_mode)?;
        Ok(self.stats.apply(&encoded))
    }

    /// Latent codes of normalized rows.
    pub fn latent(&self, normalized: &Matrix) -> Result<Matrix> {
        self.sae.encode_table(normalized)
    }

    /// One prediction per window end over normalized rows.
    pub fn predict_normalized(&self, normalized: &Matrix) -> Result<Vec<usize>> {
        predict_table(&self.classifier, &self.latent(normalized)?)
    }

    /// Class probabilities per window end over normalized rows.
    pub fn probabilities_normalized(&self, normalized: &Matrix) -> Result<Vec<Vec<f64>>> {
        let z = self.latent(normalized)?;
        let t = self.classifier.seq_len;
        window_ends(z.rows(), t)
            .map(|end| self.classifier.probabilities(&window(&z, end, t)))
            .collect()
    }

    pub fn to_container(&self) -> Container {
        let header = BundleHeader {
            kind: KIND_BUNDLE.to_string(),
            config_fingerprint: self.config_fingerprint.clone(),
            schema: self.schema.clone(),
            vocab: self.vocab.clone(),
            vocab_mode: self.vocab_mode,
            stats: self.stats.clone(),
            sae: sae_header(&self.sae),
            classifier: self.classifier.spec(),
        };
        let mut c = Container::new(serde_json::to_value(header).expect("header serializes"));
        push_sae(&mut c, &self.sae);
        push_classifier(&mut c, &self.classifier);
        c
    }

    pub fn from_container(mut c: Container) -> Result<Self> {
        let h: BundleHeader = parse_header(&c, KIND_BUNDLE)?;
        let sae = take_sae(&mut c, &h.sae)?;
        let classifier = take_classifier(&mut c, &h.classifier)?;
        ensure_consumed(&c)?;
        let schema = FeatureSchema::new(h.schema.columns, h.schema.target_column, h.schema.class_labels)
            .map_err(|e| Error::Integrity {
                block: "header".into(),
                msg: e.to_string(),
            })?;
        ModelBundle::new(schema, h.vocab, h.vocab_mode, h.stats, sae, classifier, h.config_fingerprint)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_container(Container::from_bytes(bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(Container::load(path)?)
    }
}
