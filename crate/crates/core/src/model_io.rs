//! Versioned JSON model files.
//!
//! Every file is one envelope:
//!
//! ```json
//! {"format": "recourse-model", "version": 1, "role": "classifier",
//!  "schema_hash": "...", "schema": {...}, "seed": 7,
//!  "metrics": {"test_accuracy": 0.83}, "networks": {"classifier": {...}},
//!  "extras": {...}}
//! ```
//!
//! Floats are written in shortest round-trip form, so a reload reproduces
//! every weight bit-for-bit.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::engines::{CounterganConfig, GanModels};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::numerics::MlpParams;
use crate::predictors::{
    AutoencoderMeta, AutoencoderModel, ClassifierMeta, ClassifierModel, PrototypeSet,
};
use crate::profiles::ProfileSchema;

pub const MODEL_FORMAT: &str = "recourse-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    Classifier,
    Autoencoder,
    Generator,
    Discriminator,
}

impl fmt::Display for ModelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelRole::Classifier => "classifier",
            ModelRole::Autoencoder => "autoencoder",
            ModelRole::Generator => "generator",
            ModelRole::Discriminator => "discriminator",
        };
        f.write_str(s)
    }
}

/// Decoded envelope shared by all roles.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub role: ModelRole,
    pub schema: ProfileSchema,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub networks: BTreeMap<String, MlpParams>,
    pub extras: Value,
}

impl ModelFile {
    pub fn schema_hash(&self) -> String {
        self.schema.hash()
    }

    pub fn to_json(&self) -> String {
        let doc = json!({
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "role": self.role,
            "schema_hash": self.schema.hash(),
            "schema": self.schema,
            "seed": self.seed,
            "metrics": self.metrics.iter().filter(|(_, v)| v.is_finite()).collect::<BTreeMap<_, _>>(),
            "networks": self.networks,
            "extras": self.extras,
        });
        serde_json::to_string(&doc).expect("model file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::format("document", e.to_string()))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::format("document", "expected a JSON object"))?;

        let format: String = field(obj, "format")?;
        if format != MODEL_FORMAT {
            return Err(Error::format(
                "format",
                format!("expected `{MODEL_FORMAT}`, found `{format}`"),
            ));
        }
        let version: u32 = field(obj, "version")?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::format(
                "version",
                format!("unsupported version {version} (expected {MODEL_FORMAT_VERSION})"),
            ));
        }
        let role: ModelRole = field(obj, "role")?;
        let schema: ProfileSchema = field(obj, "schema")?;
        let stored_hash: String = field(obj, "schema_hash")?;
        if stored_hash != schema.hash() {
            return Err(Error::format(
                "schema_hash",
                format!("stored {stored_hash} does not match embedded schema {}", schema.hash()),
            ));
        }
        let seed: u64 = field(obj, "seed")?;
        let metrics: BTreeMap<String, f64> = field(obj, "metrics")?;
        let networks: BTreeMap<String, MlpParams> = field(obj, "networks")?;
        for (name, params) in &networks {
            params
                .validate()
                .map_err(|e| Error::format(format!("networks.{name}"), e.to_string()))?;
        }
        let extras = obj.get("extras").cloned().unwrap_or(Value::Null);
        Ok(Self {
            role,
            schema,
            seed,
            metrics,
            networks,
            extras,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn expect_role(&self, role: ModelRole) -> Result<()> {
        if self.role != role {
            return Err(Error::format(
                "role",
                format!("expected a {role} file, found {}", self.role),
            ));
        }
        Ok(())
    }

    fn take_network(&mut self, name: &str) -> Result<MlpParams> {
        self.networks
            .remove(name)
            .ok_or_else(|| Error::format(format!("networks.{name}"), "missing network"))
    }

    /// Non-finite metrics are not written, so a missing one reads back as NaN.
    fn metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }

    fn extra<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let v = self
            .extras
            .get(name)
            .ok_or_else(|| Error::format(format!("extras.{name}"), "missing field"))?;
        T::deserialize(v).map_err(|e| Error::format(format!("extras.{name}"), e.to_string()))
    }
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str) -> Result<T> {
    let v = obj
        .get(name)
        .ok_or_else(|| Error::format(name, "missing field"))?;
    T::deserialize(v).map_err(|e| Error::format(name, e.to_string()))
}

fn spec_to_format(field: &str, e: Error) -> Error {
    match e {
        Error::Format { .. } => e,
        other => Error::format(field, other.to_string()),
    }
}

pub fn classifier_file(model: &ClassifierModel) -> ModelFile {
    ModelFile {
        role: ModelRole::Classifier,
        schema: (*model.schema).clone(),
        seed: model.meta.seed,
        metrics: BTreeMap::from([
            ("train_accuracy".to_string(), model.meta.train_accuracy),
            ("test_accuracy".to_string(), model.meta.test_accuracy),
        ]),
        networks: BTreeMap::from([("classifier".to_string(), model.params.clone())]),
        extras: json!({ "epochs": model.meta.epochs }),
    }
}

pub fn classifier_from_file(mut file: ModelFile) -> Result<ClassifierModel> {
    file.expect_role(ModelRole::Classifier)?;
    let params = file.take_network("classifier")?;
    let meta = ClassifierMeta {
        seed: file.seed,
        epochs: file.extra("epochs")?,
        train_accuracy: file.metric("train_accuracy"),
        test_accuracy: file.metric("test_accuracy"),
    };
    ClassifierModel::new(params, Arc::new(file.schema), meta)
        .map_err(|e| spec_to_format("networks.classifier", e))
}

pub fn save_classifier(model: &ClassifierModel, path: &Path) -> Result<()> {
    classifier_file(model).save(path)
}

pub fn load_classifier(path: &Path) -> Result<ClassifierModel> {
    classifier_from_file(ModelFile::load(path)?)
}

/// The autoencoder file also carries the CSGP prototypes built from it.
pub fn autoencoder_file(model: &AutoencoderModel, prototypes: Option<&PrototypeSet>) -> ModelFile {
    ModelFile {
        role: ModelRole::Autoencoder,
        schema: (*model.schema).clone(),
        seed: model.meta.seed,
        metrics: BTreeMap::from([
            ("final_loss".to_string(), model.meta.final_loss),
            (
                "test_reconstruction_error".to_string(),
                model.meta.test_reconstruction_error,
            ),
        ]),
        networks: BTreeMap::from([
            ("encoder".to_string(), model.encoder.clone()),
            ("decoder".to_string(), model.decoder.clone()),
        ]),
        extras: json!({
            "epochs": model.meta.epochs,
            "noise_std": model.noise_std,
            "prototypes": prototypes,
        }),
    }
}

pub fn autoencoder_from_file(
    mut file: ModelFile,
) -> Result<(AutoencoderModel, Option<PrototypeSet>)> {
    file.expect_role(ModelRole::Autoencoder)?;
    let encoder = file.take_network("encoder")?;
    let decoder = file.take_network("decoder")?;
    let meta = AutoencoderMeta {
        seed: file.seed,
        epochs: file.extra("epochs")?,
        final_loss: file.metric("final_loss"),
        test_reconstruction_error: file.metric("test_reconstruction_error"),
    };
    let noise_std: f64 = file.extra("noise_std")?;
    let prototypes: Option<PrototypeSet> = file.extra("prototypes")?;
    let model = AutoencoderModel::new(encoder, decoder, noise_std, Arc::new(file.schema), meta)
        .map_err(|e| spec_to_format("networks", e))?;
    if let Some(p) = &prototypes {
        if p.classes.iter().any(|c| c.prototype.len() != model.latent_width()) {
            return Err(Error::format(
                "extras.prototypes",
                "prototype width differs from the latent width",
            ));
        }
    }
    Ok((model, prototypes))
}

pub fn save_autoencoder(
    model: &AutoencoderModel,
    prototypes: Option<&PrototypeSet>,
    path: &Path,
) -> Result<()> {
    autoencoder_file(model, prototypes).save(path)
}

pub fn load_autoencoder(path: &Path) -> Result<(AutoencoderModel, Option<PrototypeSet>)> {
    autoencoder_from_file(ModelFile::load(path)?)
}

/// Generator and discriminator files; the generator carries the config echo
/// and both loss traces.
pub fn gan_files(gan: &GanModels) -> (ModelFile, ModelFile) {
    let metrics = BTreeMap::from([
        (
            "final_d_loss".to_string(),
            gan.d_losses.last().copied().unwrap_or(f64::NAN),
        ),
        (
            "final_g_loss".to_string(),
            gan.g_losses.last().copied().unwrap_or(f64::NAN),
        ),
    ]);
    let generator = ModelFile {
        role: ModelRole::Generator,
        schema: (*gan.schema).clone(),
        seed: gan.config.seed,
        metrics: metrics.clone(),
        networks: BTreeMap::from([("generator".to_string(), gan.generator.clone())]),
        extras: json!({
            "config": gan.config,
            "d_losses": gan.d_losses,
            "g_losses": gan.g_losses,
        }),
    };
    let discriminator = ModelFile {
        role: ModelRole::Discriminator,
        schema: (*gan.schema).clone(),
        seed: gan.config.seed,
        metrics,
        networks: BTreeMap::from([("discriminator".to_string(), gan.discriminator.clone())]),
        extras: json!({ "config": gan.config }),
    };
    (generator, discriminator)
}

pub fn gan_from_files(mut generator: ModelFile, mut discriminator: ModelFile) -> Result<GanModels> {
    generator.expect_role(ModelRole::Generator)?;
    discriminator.expect_role(ModelRole::Discriminator)?;
    if generator.schema_hash() != discriminator.schema_hash() {
        return Err(Error::format(
            "schema_hash",
            "generator and discriminator were trained on different schemas",
        ));
    }
    let config: CounterganConfig = generator.extra("config")?;
    let d_losses: Vec<f64> = generator.extra("d_losses")?;
    let g_losses: Vec<f64> = generator.extra("g_losses")?;
    let g = generator.take_network("generator")?;
    let d = discriminator.take_network("discriminator")?;
    let mut gan = GanModels::new(g, d, config, Arc::new(generator.schema))
        .map_err(|e| spec_to_format("networks", e))?;
    gan.d_losses = d_losses;
    gan.g_losses = g_losses;
    Ok(gan)
}

pub fn save_gan(gan: &GanModels, generator_path: &Path, discriminator_path: &Path) -> Result<()> {
    let (g, d) = gan_files(gan);
    g.save(generator_path)?;
    d.save(discriminator_path)
}

pub fn load_gan(generator_path: &Path, discriminator_path: &Path) -> Result<GanModels> {
    gan_from_files(
        ModelFile::load(generator_path)?,
        ModelFile::load(discriminator_path)?,
    )
}

/// File names inside a model directory.
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const AUTOENCODER_FILE: &str = "autoencoder.json";
pub const GENERATOR_FILE: &str = "generator.json";
pub const DISCRIMINATOR_FILE: &str = "discriminator.json";

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything a model directory holds, loaded and cross-checked.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub classifier: ClassifierModel,
    pub ae: AutoencoderModel,
    pub prototypes: PrototypeSet,
    pub gan: GanModels,
    /// SHA-256 of each file's bytes, keyed by file name.
    pub file_hashes: BTreeMap<String, String>,
    /// Decoded envelopes without their network weights, keyed by role.
    pub summaries: BTreeMap<String, Value>,
}

fn summary(file: &ModelFile) -> Value {
    let mut extras = file.extras.clone();
    if let Some(obj) = extras.as_object_mut() {
        // Bulky payloads; the weights are likewise omitted.
        obj.remove("prototypes");
        obj.remove("d_losses");
        obj.remove("g_losses");
    }
    json!({
        "role": file.role,
        "seed": file.seed,
        "schema_hash": file.schema_hash(),
        "metrics": file.metrics,
        "networks": file.networks.iter()
            .map(|(k, p)| (k.clone(), json!({ "layer_sizes": p.spec.layer_sizes, "parameters": p.num_parameters() })))
            .collect::<Map<_, _>>(),
        "extras": extras,
    })
}

pub fn load_model_dir(dir: &Path) -> Result<ModelBundle> {
    let mut file_hashes = BTreeMap::new();
    let mut summaries = BTreeMap::new();
    let mut read = |name: &str| -> Result<ModelFile> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        file_hashes.insert(name.to_string(), sha256_hex(&bytes));
        let text = String::from_utf8(bytes).map_err(|e| Error::format("document", e.to_string()))?;
        let file = ModelFile::from_json(&text)?;
        summaries.insert(file.role.to_string(), summary(&file));
        Ok(file)
    };
    let c = read(CLASSIFIER_FILE)?;
    let a = read(AUTOENCODER_FILE)?;
    let g = read(GENERATOR_FILE)?;
    let d = read(DISCRIMINATOR_FILE)?;
    let expected = c.schema_hash();
    for f in [&a, &g, &d] {
        if f.schema_hash() != expected {
            return Err(Error::format(
                "schema_hash",
                format!("{} file schema {} differs from the classifier's {expected}", f.role, f.schema_hash()),
            ));
        }
    }
    let classifier = classifier_from_file(c)?;
    let (ae, prototypes) = autoencoder_from_file(a)?;
    let prototypes = prototypes
        .ok_or_else(|| Error::format("extras.prototypes", "the autoencoder file carries no prototypes"))?;
    let gan = gan_from_files(g, d)?;
    Ok(ModelBundle {
        classifier,
        ae,
        prototypes,
        gan,
        file_hashes,
        summaries,
    })
}
