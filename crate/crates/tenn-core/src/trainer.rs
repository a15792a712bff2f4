//! ADAM training over resampled collocation batches, with deterministic
//! seeding, per-term loss logging, and checkpoint persistence.
//!
//! Collocation points are resampled every epoch (stochastic batches are the
//! reason for preferring ADAM over batch-mode quasi-Newton methods here).
//! Every reduction in the pipeline runs in a fixed order, so a given config +
//! seed reproduces its loss history byte-for-byte at any worker count.

use crate::embedding::TennVariant;
use crate::graph::{ParamGraph, ParamVector};

use crate::losses::{build_losses, LossError, LossWeights, TERM_NAMES};
use crate::network::{init_params, HeadRole, NetworkError, NetworkSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

/// Training aborts when the total loss exceeds this guard (or goes
/// non-finite).
pub const DIVERGENCE_GUARD: f64 = 1e12;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// Which model family is being trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    Vanilla,
    Tenn,
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(ModelKind::Vanilla),
            "tenn" => Ok(ModelKind::Tenn),
            other => Err(format!("unknown model '{other}' (expected vanilla|tenn)")),
        }
    }
}

/// ADAM hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Full experiment definition.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub variant: TennVariant,
    pub re: f64,
    pub t_end: f64,
    pub epochs: usize,
    /// Interior collocation points resampled each epoch.
    pub interior_points: usize,
    /// t = 0 collocation points resampled each epoch.
    pub ic_points: usize,
    /// Interior minibatch size per ADAM step; 0 means full batch (one step
    /// per epoch). The IC set rides along whole with every step.
    pub batch_size: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub network: NetworkSpec,
    pub adam: AdamParams,
    pub eps_div: f64,
    pub deterministic: bool,
}

impl TrainConfig {
    /// Head role implied by (model, variant).
    pub fn head_role(&self) -> HeadRole {
        match (self.model, self.variant) {
            (ModelKind::Vanilla, _) => HeadRole::VanillaPinn,
            (ModelKind::Tenn, TennVariant::PotentialB) => HeadRole::TennPotential,
            (ModelKind::Tenn, TennVariant::SplitA) => HeadRole::TennSplit,
        }
    }

    /// Loss-weight preset for (model, variant).
    pub fn preset_weights(model: ModelKind, variant: TennVariant) -> LossWeights {
        match (model, variant) {
            (ModelKind::Vanilla, _) => LossWeights::vanilla(),
            (ModelKind::Tenn, TennVariant::PotentialB) => LossWeights::tenn(),
            (ModelKind::Tenn, TennVariant::SplitA) => LossWeights::tenn_split(),
        }
    }

    /// Desk-scale defaults for a model at a given Reynolds number.
    pub fn preset(model: ModelKind, re: f64) -> TrainConfig {
        let variant = TennVariant::PotentialB;
        let role = match model {
            ModelKind::Vanilla => HeadRole::VanillaPinn,
            ModelKind::Tenn => HeadRole::TennPotential,
        };
        TrainConfig {
            model,
            variant,
            re,
            t_end: 1.0,
            epochs: 2000,
            interior_points: 4096,
            ic_points: 1024,
            batch_size: 0,
            seed: 0,
            weights: TrainConfig::preset_weights(model, variant),
            network: NetworkSpec::default_for(role),
            adam: AdamParams::default(),
            eps_div: 1e-4,
            deterministic: true,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !self.re.is_finite() || self.re <= 0.0 {
            return Err(TrainError::Config(format!("re must be positive, got {}", self.re)));
        }
        if !self.t_end.is_finite() || self.t_end <= 0.0 {
            return Err(TrainError::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.interior_points == 0 || self.ic_points == 0 {
            return Err(TrainError::Config("collocation counts must be positive".into()));
        }
        if self.network.heads != self.head_role() {
            return Err(TrainError::Config(format!(
                "network heads {:?} do not match model/variant (expected {:?})",
                self.network.heads,
                self.head_role()
            )));
        }
        if self.weights.alpha.iter().any(|a| *a < 0.0 || !a.is_finite()) {
            return Err(TrainError::Config("loss weights must be finite and >= 0".into()));
        }
        self.network.validate().map_err(TrainError::Network)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum TrainError {
    Config(String),
    Network(NetworkError),
    Loss(LossError),
    /// Non-finite gradient; carries the epoch/step it appeared in.
    NonFiniteGradient { epoch: usize, step: usize, detail: String },
    /// Loss blew past the divergence guard; the partial report is attached.
    Diverged { epoch: usize, loss: f64, partial: Box<TrainReport> },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Config(msg) => write!(f, "invalid training config: {msg}"),
            TrainError::Network(e) => write!(f, "{e}"),
            TrainError::Loss(e) => write!(f, "{e}"),
            TrainError::NonFiniteGradient { epoch, step, detail } => {
                write!(f, "non-finite gradient at epoch {epoch}, step {step}: {detail}")
            }
            TrainError::Diverged { epoch, loss, .. } => {
                write!(f, "training diverged at epoch {epoch}: total loss {loss}")
            }
        }
    }
}

impl std::error::Error for TrainError {}

impl From<NetworkError> for TrainError {
    fn from(e: NetworkError) -> Self {
        TrainError::Network(e)
    }
}
impl From<LossError> for TrainError {
    fn from(e: LossError) -> Self {
        TrainError::Loss(e)
    }
}

// ---------------------------------------------------------------------------
// ADAM
// ---------------------------------------------------------------------------

/// First/second moment accumulators; one entry per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub hyper: AdamParams,
}

impl AdamState {
    pub fn new(n_params: usize, hyper: AdamParams) -> AdamState {
        AdamState { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0, hyper }
    }
}

/// One ADAM update: m <- b1 m + (1-b1) g, v <- b2 v + (1-b2) g^2,
/// bias-corrected, theta <- theta - lr mhat / (sqrt(vhat) + eps).
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ParamVector,
    grad: &ParamVector,
) -> Result<(), TrainError> {
    assert_eq!(state.m.len(), params.len(), "adam state shape");
    assert_eq!(grad.len(), params.len(), "gradient shape");
    if let Some(bad) = grad.values.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient {
            epoch: 0,
            step: state.step as usize,
            detail: format!("gradient entry {bad} is {}", grad.values[bad]),
        });
    }
    state.step += 1;
    let AdamParams { lr, beta1, beta2, eps } = state.hyper;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grad.values[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params.values[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Collocation sampling
// ---------------------------------------------------------------------------

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Stream seed for (run seed, epoch, purpose).
pub fn stream_seed(seed: u64, epoch: u64, purpose: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(epoch)) ^ purpose)
}

/// Uniform i.i.d. points in [0,1]^2 x [0, t_end], or on the t = 0 slice.
/// Deterministic in the seed.
pub fn sample_collocation(n: usize, seed: u64, t_end: f64, at_t0: bool) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = if at_t0 { 0.0 } else { rng.gen::<f64>() * t_end };
            let x = rng.gen::<f64>();
            let y = rng.gen::<f64>();
            [t, x, y]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// Loss record for one epoch: the six term mean-squares and the weighted
/// total, averaged over the epoch's steps.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochLosses {
    pub terms: [f64; 6],
    pub total: f64,
}

/// Training outcome: per-epoch losses, wall time, and a checksum of the
/// final parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochLosses>,
    pub wall_secs: f64,
    pub param_checksum: u64,
}

impl TrainReport {
    /// History as CSV: epoch, the six term names, total.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch");
        for name in TERM_NAMES {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",total\n");
        for (e, row) in self.history.iter().enumerate() {
            out.push_str(&format!("{e}"));
            for v in row.terms {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push_str(&format!(",{:.17e}\n", row.total));
        }
        out
    }
}

fn param_checksum(params: &ParamVector) -> u64 {
    let mut h = Sha256::new();
    for v in &params.values {
        h.update(v.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Run the configured experiment from a fresh initialization.
pub fn train(config: &TrainConfig) -> Result<(ParamVector, TrainReport), TrainError> {
    let params = init_params(&config.network, config.seed)?;
    train_from(config, params)
}

/// Run the configured experiment starting from the given parameters.
pub fn train_from(
    config: &TrainConfig,
    mut params: ParamVector,
) -> Result<(ParamVector, TrainReport), TrainError> {
    config.validate()?;
    crate::init_workers();
    let start = Instant::now();
    let mut adam = AdamState::new(params.len(), config.adam);
    let mut history: Vec<EpochLosses> = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let interior = sample_collocation(
            config.interior_points,
            stream_seed(config.seed, epoch as u64, 0),
            config.t_end,
            false,
        );
        let ic = sample_collocation(
            config.ic_points,
            stream_seed(config.seed, epoch as u64, 1),
            config.t_end,
            true,
        );

        let batch = if config.batch_size == 0 || config.batch_size >= interior.len() {
            interior.len()
        } else {
            config.batch_size
        };
        let mut acc = EpochLosses { terms: [0.0; 6], total: 0.0 };
        let mut steps = 0usize;
        for chunk in interior.chunks(batch) {
            let mut graph = ParamGraph::new(params.clone());
            let nodes = build_losses(
                &mut graph,
                &config.network,
                chunk,
                &ic,
                config.re,
                config.eps_div,
                &config.weights,
            )?;
            let total = graph.scalar(nodes.total);
            if !total.is_finite() || total > DIVERGENCE_GUARD {
                let report = TrainReport {
                    history,
                    wall_secs: start.elapsed().as_secs_f64(),
                    param_checksum: param_checksum(&params),
                };
                return Err(TrainError::Diverged { epoch, loss: total, partial: Box::new(report) });
            }
            for (i, term) in nodes.terms.iter().enumerate() {
                if let Some(id) = term {
                    acc.terms[i] += graph.scalar(*id);
                }
            }
            acc.total += total;
            let grad = graph.backward(nodes.total).map_err(|e| TrainError::NonFiniteGradient {
                epoch,
                step: steps,
                detail: e.to_string(),
            })?;
            drop(graph);
            adam_step(&mut adam, &mut params, &grad).map_err(|e| match e {
                TrainError::NonFiniteGradient { step, detail, .. } => {
                    TrainError::NonFiniteGradient { epoch, step, detail }
                }
                other => other,
            })?;
            steps += 1;
        }
        history.push(acc_scaled(acc, steps));
        debug_assert!(params.values.iter().all(|v| v.is_finite()), "non-finite parameter");
    }

    let report = TrainReport {
        history,
        wall_secs: start.elapsed().as_secs_f64(),
        param_checksum: param_checksum(&params),
    };
    Ok((params, report))
}

fn acc_scaled(mut acc: EpochLosses, steps: usize) -> EpochLosses {
    let n = steps.max(1) as f64;
    for t in &mut acc.terms {
        *t /= n;
    }
    acc.total /= n;
    acc
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CKPT_MAGIC: &[u8; 8] = b"TENNCKPT";
const CKPT_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CheckpointError {
    Io(std::io::Error),
    BadMagic,
    VersionMismatch { found: u32, expected: u32 },
    /// Truncated or otherwise structurally invalid file.
    Corrupt(String),
    /// Embedded spec hash does not match the stored hash (file tampered or
    /// assembled from mismatched parts).
    SpecHashMismatch,
    /// Checkpoint's spec differs from the spec the caller expected.
    SpecMismatch,
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "checkpoint io error: {e}"),
            CheckpointError::BadMagic => write!(f, "not a checkpoint file (bad magic)"),
            CheckpointError::VersionMismatch { found, expected } => {
                write!(f, "checkpoint version {found}, this build reads {expected}")
            }
            CheckpointError::Corrupt(msg) => write!(f, "corrupt checkpoint: {msg}"),
            CheckpointError::SpecHashMismatch => write!(f, "checkpoint spec hash mismatch"),
            CheckpointError::SpecMismatch => {
                write!(f, "checkpoint was written for a different network spec")
            }
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<std::io::Error> for CheckpointError {
    fn from(e: std::io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

/// A loaded checkpoint: parameters plus the spec and config they were
/// trained under.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ParamVector,
    pub spec: NetworkSpec,
    pub config: TrainConfig,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CheckpointMeta {
    spec: NetworkSpec,
    config: TrainConfig,
}

/// Write a checkpoint: magic, version, spec hash, JSON meta, layout
/// descriptor, then the raw little-endian parameter floats.
pub fn save_checkpoint(
    params: &ParamVector,
    spec: &NetworkSpec,
    config: &TrainConfig,
    path: &Path,
) -> Result<(), CheckpointError> {
    let meta = serde_json::to_vec(&CheckpointMeta { spec: spec.clone(), config: config.clone() })
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    buf.extend_from_slice(&spec.spec_hash());
    buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta);
    buf.extend_from_slice(&(params.layout.layers.len() as u32).to_le_bytes());
    for shape in &params.layout.layers {
        buf.extend_from_slice(&(shape.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(shape.cols as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in &params.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Read a checkpoint back, validating magic, version, spec hash, layout,
/// and length.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Result<&[u8], CheckpointError> {
        if *at + n > bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "truncated: needed {} bytes at offset {}, file has {}",
                n,
                at,
                bytes.len()
            )));
        }
        let s = &bytes[*at..*at + n];
        *at += n;
        Ok(s)
    };

    if take(&mut at, 8)? != CKPT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(CheckpointError::VersionMismatch { found: version, expected: CKPT_VERSION });
    }
    let stored_hash: [u8; 32] = take(&mut at, 32)?.try_into().unwrap();
    let meta_len = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
    let meta: CheckpointMeta = serde_json::from_slice(take(&mut at, meta_len)?)
        .map_err(|e| CheckpointError::Corrupt(format!("meta: {e}")))?;
    if meta.spec.spec_hash() != stored_hash {
        return Err(CheckpointError::SpecHashMismatch);
    }
    let n_layers = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        layers.push(crate::graph::LayerShape { rows, cols });
    }
    let layout = crate::graph::ParamLayout { layers };
    if layout != meta.spec.layout() {
        return Err(CheckpointError::Corrupt("layout does not match spec".into()));
    }
    let n_params = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
    if n_params != layout.total_len() {
        return Err(CheckpointError::Corrupt(format!(
            "parameter count {} does not match layout ({})",
            n_params,
            layout.total_len()
        )));
    }
    let mut values = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        values.push(f64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()));
    }
    let params = ParamVector::new(layout, values)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    Ok(Checkpoint { params, spec: meta.spec, config: meta.config })
}

/// Load and additionally require the stored spec to equal `expected`.
pub fn load_checkpoint_expecting(
    path: &Path,
    expected: &NetworkSpec,
) -> Result<Checkpoint, CheckpointError> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.spec != *expected {
        return Err(CheckpointError::SpecMismatch);
    }
    Ok(ckpt)
}
