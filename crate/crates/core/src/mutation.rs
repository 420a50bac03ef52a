//! Model-level mutation operators and seeded mutant-set generation.
//!
//! Each mutant applies exactly one operator at one target:
//!
//! * Gaussian fuzzing: incoming weights of a neuron get i.i.d. `N(0, 1)`
//!   noise scaled by `sigma * std(layer weights)` (population std).
//! * Weight shuffle: incoming weights of a neuron are permuted by a seeded
//!   Fisher-Yates shuffle.
//! * Neuron effect block: outgoing weights of a hidden neuron are zeroed.
//! * Neuron activation inverse: outgoing weights of a hidden neuron are
//!   negated, which turns its contribution `a(z)` into `-a(z)`.
//! * Neuron switch: incoming weights and biases of two neurons in the same
//!   hidden layer are swapped; outgoing weights stay in place.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::format::encode_model;
use crate::model::{Classifier, FcnnClassifier};
use crate::rng::SplitMix64;

/// Gaussian fuzzing strength relative to the layer's weight std.
pub const DEFAULT_GF_SIGMA: f64 = 0.5;
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MutationError {
    #[error("target out of range: {0}")]
    Target(String),
    #[error("unsupported target: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no requested mutation operator is applicable to this model")]
    NoApplicableKind,
    #[error("manifest does not match the original model (expected hash {expected}, got {actual})")]
    ModelHash { expected: String, actual: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MutantId(pub u32);

impl fmt::Display for MutantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutatorKind {
    GaussianFuzzing,
    WeightShuffle,
    NeuronEffectBlock,
    NeuronActivationInverse,
    NeuronSwitch,
}

impl MutatorKind {
    pub const ALL: [MutatorKind; 5] = [
        MutatorKind::GaussianFuzzing,
        MutatorKind::WeightShuffle,
        MutatorKind::NeuronEffectBlock,
        MutatorKind::NeuronActivationInverse,
        MutatorKind::NeuronSwitch,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            MutatorKind::GaussianFuzzing => "GF",
            MutatorKind::WeightShuffle => "WS",
            MutatorKind::NeuronEffectBlock => "NEB",
            MutatorKind::NeuronActivationInverse => "NAI",
            MutatorKind::NeuronSwitch => "NS",
        }
    }

    /// Whether two applications at the same target always give the same mutant.
    pub fn is_deterministic(self) -> bool {
        matches!(
            self,
            MutatorKind::NeuronEffectBlock | MutatorKind::NeuronActivationInverse | MutatorKind::NeuronSwitch
        )
    }
}

impl fmt::Display for MutatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MutatorKind {
    type Err = MutationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '_', ' '], "");
        Ok(match norm.as_str() {
            "gf" | "gaussianfuzzing" => MutatorKind::GaussianFuzzing,
            "ws" | "weightshuffle" => MutatorKind::WeightShuffle,
            "neb" | "neuroneffectblock" => MutatorKind::NeuronEffectBlock,
            "nai" | "neuronactivationinverse" => MutatorKind::NeuronActivationInverse,
            "ns" | "neuronswitch" => MutatorKind::NeuronSwitch,
            _ => return Err(MutationError::Parameter(format!("unknown mutator kind {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Neuron { layer: usize, neuron: usize },
    Pair { layer: usize, first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutantRecord {
    pub id: MutantId,
    pub kind: MutatorKind,
    pub target: Target,
    pub params: MutationParams,
    pub seed: u64,
    pub model: FcnnClassifier,
}

fn check_neuron(model: &FcnnClassifier, layer: usize, neuron: usize) -> Result<(), MutationError> {
    let layers = model.layers();
    if layer >= layers.len() {
        return Err(MutationError::Target(format!("layer {layer} (model has {} layers)", layers.len())));
    }
    if neuron >= layers[layer].out_dim() {
        return Err(MutationError::Target(format!(
            "neuron {neuron} in layer {layer} (width {})",
            layers[layer].out_dim()
        )));
    }
    Ok(())
}

fn check_hidden(model: &FcnnClassifier, layer: usize, neuron: usize, op: &str) -> Result<(), MutationError> {
    check_neuron(model, layer, neuron)?;
    if layer + 1 == model.layers().len() {
        return Err(MutationError::Unsupported(format!("{op} cannot target output layer {layer}")));
    }
    Ok(())
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn record(kind: MutatorKind, target: Target, sigma: Option<f64>, seed: u64, model: FcnnClassifier) -> MutantRecord {
    MutantRecord { id: MutantId(0), kind, target, params: MutationParams { sigma }, seed, model }
}

pub fn gaussian_fuzz(
    model: &FcnnClassifier,
    layer: usize,
    neuron: usize,
    sigma: f64,
    seed: u64,
) -> Result<MutantRecord, MutationError> {
    check_neuron(model, layer, neuron)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(MutationError::Parameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut mutant = model.clone();
    if sigma > 0.0 {
        let scale = sigma * population_std(model.layers()[layer].weights());
        let mut rng = SplitMix64::new(seed);
        for w in mutant.layer_mut(layer).row_mut(neuron) {
            *w += scale * rng.gaussian();
        }
    }
    Ok(record(MutatorKind::GaussianFuzzing, Target::Neuron { layer, neuron }, Some(sigma), seed, mutant))
}

pub fn weight_shuffle(
    model: &FcnnClassifier,
    layer: usize,
    neuron: usize,
    seed: u64,
) -> Result<MutantRecord, MutationError> {
    check_neuron(model, layer, neuron)?;
    let mut mutant = model.clone();
    SplitMix64::new(seed).shuffle(mutant.layer_mut(layer).row_mut(neuron));
    Ok(record(MutatorKind::WeightShuffle, Target::Neuron { layer, neuron }, None, seed, mutant))
}

fn map_outgoing(model: &FcnnClassifier, layer: usize, neuron: usize, f: impl Fn(f64) -> f64) -> FcnnClassifier {
    let mut mutant = model.clone();
    let next = mutant.layer_mut(layer + 1);
    let in_dim = next.in_dim();
    for row in next.weights_mut().chunks_mut(in_dim) {
        row[neuron] = f(row[neuron]);
    }
    mutant
}

pub fn neuron_effect_block(model: &FcnnClassifier, layer: usize, neuron: usize) -> Result<MutantRecord, MutationError> {
    check_hidden(model, layer, neuron, "neuron effect block")?;
    Ok(record(
        MutatorKind::NeuronEffectBlock,
        Target::Neuron { layer, neuron },
        None,
        0,
        map_outgoing(model, layer, neuron, |_| 0.0),
    ))
}

pub fn neuron_activation_inverse(
    model: &FcnnClassifier,
    layer: usize,
    neuron: usize,
) -> Result<MutantRecord, MutationError> {
    check_hidden(model, layer, neuron, "neuron activation inverse")?;
    Ok(record(
        MutatorKind::NeuronActivationInverse,
        Target::Neuron { layer, neuron },
        None,
        0,
        map_outgoing(model, layer, neuron, |w| -w),
    ))
}

pub fn neuron_switch(
    model: &FcnnClassifier,
    layer: usize,
    first: usize,
    second: usize,
) -> Result<MutantRecord, MutationError> {
    check_hidden(model, layer, first, "neuron switch")?;
    check_hidden(model, layer, second, "neuron switch")?;
    let mut mutant = model.clone();
    if first != second {
        let dense = mutant.layer_mut(layer);
        let in_dim = dense.in_dim();
        let (lo, hi) = (first.min(second), first.max(second));
        let (head, tail) = dense.weights_mut().split_at_mut(hi * in_dim);
        head[lo * in_dim..(lo + 1) * in_dim].swap_with_slice(&mut tail[..in_dim]);
        dense.biases_mut().swap(lo, hi);
    }
    Ok(record(MutatorKind::NeuronSwitch, Target::Pair { layer, first, second }, None, 0, mutant))
}

/// Apply `kind` at `target`; used both by generation and manifest replay.
pub fn apply(
    model: &FcnnClassifier,
    kind: MutatorKind,
    target: Target,
    params: &MutationParams,
    seed: u64,
) -> Result<MutantRecord, MutationError> {
    let rec = match (kind, target) {
        (MutatorKind::GaussianFuzzing, Target::Neuron { layer, neuron }) => {
            gaussian_fuzz(model, layer, neuron, params.sigma.unwrap_or(DEFAULT_GF_SIGMA), seed)
        }
        (MutatorKind::WeightShuffle, Target::Neuron { layer, neuron }) => weight_shuffle(model, layer, neuron, seed),
        (MutatorKind::NeuronEffectBlock, Target::Neuron { layer, neuron }) => neuron_effect_block(model, layer, neuron),
        (MutatorKind::NeuronActivationInverse, Target::Neuron { layer, neuron }) => {
            neuron_activation_inverse(model, layer, neuron)
        }
        (MutatorKind::NeuronSwitch, Target::Pair { layer, first, second }) => {
            neuron_switch(model, layer, first, second)
        }
        (kind, target) => Err(MutationError::Target(format!("{kind} cannot take target {target:?}"))),
    };
    rec.map(|r| MutantRecord { seed, ..r })
}

/// Every valid target of `kind` on `model`, in a fixed enumeration order:
/// layers ascending, then neuron (or pair `first < second`) ascending.
pub fn valid_targets(model: &FcnnClassifier, kind: MutatorKind) -> Vec<Target> {
    let layers = model.layers();
    let hidden = layers.len() - 1;
    let mut targets = Vec::new();
    match kind {
        MutatorKind::GaussianFuzzing | MutatorKind::WeightShuffle => {
            for (layer, l) in layers.iter().enumerate() {
                targets.extend((0..l.out_dim()).map(|neuron| Target::Neuron { layer, neuron }));
            }
        }
        MutatorKind::NeuronEffectBlock | MutatorKind::NeuronActivationInverse => {
            for (layer, l) in layers[..hidden].iter().enumerate() {
                targets.extend((0..l.out_dim()).map(|neuron| Target::Neuron { layer, neuron }));
            }
        }
        MutatorKind::NeuronSwitch => {
            for (layer, l) in layers[..hidden].iter().enumerate() {
                for first in 0..l.out_dim() {
                    for second in first + 1..l.out_dim() {
                        targets.push(Target::Pair { layer, first, second });
                    }
                }
            }
        }
    }
    targets
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub count: usize,
    pub kinds: Vec<MutatorKind>,
    pub seed: u64,
    pub sigma: f64,
}

impl GenerationConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { count, kinds: MutatorKind::ALL.to_vec(), seed, sigma: DEFAULT_GF_SIGMA }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutantSet {
    pub original: FcnnClassifier,
    pub mutants: Vec<MutantRecord>,
    pub generation_seed: u64,
    pub warnings: Vec<String>,
}

impl MutantSet {
    pub fn len(&self) -> usize {
        self.mutants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutants.is_empty()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            version: MANIFEST_VERSION,
            original_model_sha256: model_hash(&self.original),
            generation_seed: self.generation_seed,
            warnings: self.warnings.clone(),
            mutants: self
                .mutants
                .iter()
                .map(|m| ManifestEntry {
                    id: m.id,
                    kind: m.kind,
                    target: m.target,
                    params: m.params.clone(),
                    seed: m.seed,
                })
                .collect(),
        }
    }

    /// Re-derive every mutant from `manifest` and the original model.
    pub fn from_manifest(original: &FcnnClassifier, manifest: &Manifest) -> Result<Self, MutationError> {
        let actual = model_hash(original);
        if actual != manifest.original_model_sha256 {
            return Err(MutationError::ModelHash { expected: manifest.original_model_sha256.clone(), actual });
        }
        let mutants = manifest
            .mutants
            .iter()
            .map(|e| {
                let mut rec = apply(original, e.kind, e.target, &e.params, e.seed)?;
                rec.id = e.id;
                Ok(rec)
            })
            .collect::<Result<Vec<_>, MutationError>>()?;
        Ok(Self {
            original: original.clone(),
            mutants,
            generation_seed: manifest.generation_seed,
            warnings: manifest.warnings.clone(),
        })
    }
}

/// Seeded generation from a single stream: for each mutant, draw the kind
/// uniformly among applicable kinds, then the target uniformly among that
/// kind's [`valid_targets`], then the mutant's own 64-bit seed.
pub fn generate_mutant_set(model: &FcnnClassifier, config: &GenerationConfig) -> Result<MutantSet, MutationError> {
    if config.count == 0 {
        return Err(MutationError::Parameter("mutant count must be at least 1".into()));
    }
    if config.kinds.is_empty() {
        return Err(MutationError::Parameter("at least one mutator kind is required".into()));
    }
    let mut warnings = Vec::new();
    let mut usable = Vec::new();
    for &kind in &config.kinds {
        if usable.iter().any(|(k, _)| *k == kind) {
            continue;
        }
        let targets = valid_targets(model, kind);
        if targets.is_empty() {
            warnings.push(format!("{kind} excluded: model has no valid target"));
            log::warn!("{kind} excluded: model has no valid target");
        } else {
            usable.push((kind, targets));
        }
    }
    if usable.is_empty() {
        return Err(MutationError::NoApplicableKind);
    }
    if usable.iter().all(|(k, _)| k.is_deterministic()) {
        let distinct: usize = usable.iter().map(|(_, t)| t.len()).sum();
        if config.count > distinct {
            warnings.push(format!(
                "requested {} mutants but only {distinct} distinct targets exist; duplicates are unavoidable",
                config.count
            ));
        }
    }

    let mut rng = SplitMix64::new(config.seed);
    let mut mutants = Vec::with_capacity(config.count);
    for id in 0..config.count {
        let (kind, targets) = &usable[rng.below_usize(usable.len())];
        let target = targets[rng.below_usize(targets.len())];
        let seed = rng.next_u64();
        let params = MutationParams { sigma: (*kind == MutatorKind::GaussianFuzzing).then_some(config.sigma) };
        let mut rec = apply(model, *kind, target, &params, seed)?;
        rec.id = MutantId(id as u32);
        mutants.push(rec);
    }
    Ok(MutantSet { original: model.clone(), mutants, generation_seed: config.seed, warnings })
}

pub fn model_hash(model: &FcnnClassifier) -> String {
    hex::encode(Sha256::digest(encode_model(model)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: MutantId,
    pub kind: MutatorKind,
    pub target: Target,
    pub params: MutationParams,
    pub seed: u64,
}

/// On-disk description of a mutant set; authoritative over stored models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub original_model_sha256: String,
    pub generation_seed: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub mutants: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Accessor used by testing and spectra code for any mutant representation.
pub trait Mutant: Sync {
    fn id(&self) -> MutantId;
    fn classifier(&self) -> &dyn Classifier;
    fn label(&self) -> String {
        String::new()
    }
}

impl Mutant for MutantRecord {
    fn id(&self) -> MutantId {
        self.id
    }

    fn classifier(&self) -> &dyn Classifier {
        &self.model
    }

    fn label(&self) -> String {
        self.kind.short_name().to_string()
    }
}

/// A mutant given only by a classifier (e.g. a table of host-computed outputs).
pub struct ExternalMutant<C> {
    pub id: MutantId,
    pub model: C,
}

impl<C: Classifier> Mutant for ExternalMutant<C> {
    fn id(&self) -> MutantId {
        self.id
    }

    fn classifier(&self) -> &dyn Classifier {
        &self.model
    }
}
