//! Periodic prior-dictionary input layer and the fully-connected network.
//!
//! The dictionary maps (t, x, y) to [t, sin(2 pi k x), cos(2 pi k x),
//! sin(2 pi k y), cos(2 pi k y)] for k = 1..K, so every network output is
//! exactly 1-periodic in x and y by construction; time passes through raw.
//! Spatial coordinates are reduced modulo the period before the trigonometric
//! evaluation, which makes dyadic shifts (x + 1 with x on a binary grid)
//! bit-exact.

use crate::graph::{Block, GraphError, LayerShape, NodeId, ParamGraph, ParamLayout, ParamVector};
use crate::jet::{jet_elementwise, jet_seed_inputs, ActivationKind, ElemFn, Jet3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt;

// ---------------------------------------------------------------------------
// Spec types
// ---------------------------------------------------------------------------

/// Fixed trigonometric feature layer enforcing spatial periodicity.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PeriodicDictionary {
    /// Number of harmonics K; feature count is 4K + 1.
    pub harmonics: usize,
    /// Spatial period lengths (x, y).
    pub periods: [f64; 2],
    /// Time is always passed through raw.
    pub passthrough_time: bool,
}

impl Default for PeriodicDictionary {
    fn default() -> Self {
        PeriodicDictionary { harmonics: 2, periods: [1.0, 1.0], passthrough_time: true }
    }
}

impl PeriodicDictionary {
    pub fn feature_count(&self) -> usize {
        4 * self.harmonics + 1
    }
}

/// One hidden layer: width and activation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HiddenLayer {
    pub width: usize,
    pub activation: ActivationKind,
}

/// What the three output heads mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum HeadRole {
    /// (u_x, u_y, p)
    VanillaPinn,
    /// (v_0, v_1, v_2): spacetime potential, fluxes via the curl embedding.
    TennPotential,
    /// (v_0, u_x, u_y): potential time-component plus direct velocity heads.
    TennSplit,
}

impl HeadRole {
    pub fn head_count(&self) -> usize {
        3
    }
}

/// Network architecture: dictionary, hidden stack, output heads (linear).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetworkSpec {
    pub dictionary: PeriodicDictionary,
    pub hidden: Vec<HiddenLayer>,
    pub heads: HeadRole,
}

impl NetworkSpec {
    /// Default desk-scale architecture: 4 hidden layers of 64 tanh units, K = 2.
    pub fn default_for(heads: HeadRole) -> NetworkSpec {
        NetworkSpec {
            dictionary: PeriodicDictionary::default(),
            hidden: vec![HiddenLayer { width: 64, activation: ActivationKind::Tanh }; 4],
            heads,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.dictionary.harmonics == 0 {
            return Err(NetworkError::InvalidSpec("dictionary needs at least one harmonic".into()));
        }
        if self.dictionary.periods.iter().any(|&p| !p.is_finite() || p <= 0.0) {
            return Err(NetworkError::InvalidSpec("periods must be positive".into()));
        }
        if self.hidden.is_empty() {
            return Err(NetworkError::InvalidSpec("at least one hidden layer required".into()));
        }
        if self.hidden.iter().any(|l| l.width == 0) {
            return Err(NetworkError::InvalidSpec("hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Parameter layout: dictionary -> hidden stack -> 3 linear heads.
    pub fn layout(&self) -> ParamLayout {
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.dictionary.feature_count();
        for h in &self.hidden {
            layers.push(LayerShape { rows: h.width, cols: fan_in });
            fan_in = h.width;
        }
        layers.push(LayerShape { rows: self.heads.head_count(), cols: fan_in });
        ParamLayout { layers }
    }

    /// SHA-256 of the canonical JSON encoding; pins checkpoints to a spec.
    pub fn spec_hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("spec serializes");
        let mut h = Sha256::new();
        h.update(&json);
        h.finalize().into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkError {
    InvalidSpec(String),
    /// Parameter vector does not match the spec's layout.
    LayoutMismatch { expected: usize, actual: usize },
    Graph(GraphError),
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::InvalidSpec(msg) => write!(f, "invalid network spec: {msg}"),
            NetworkError::LayoutMismatch { expected, actual } => {
                write!(f, "parameter layout mismatch: spec needs {expected} values, got {actual}")
            }
            NetworkError::Graph(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for NetworkError {}

impl From<GraphError> for NetworkError {
    fn from(e: GraphError) -> Self {
        NetworkError::Graph(e)
    }
}

// ---------------------------------------------------------------------------
// Dictionary features
// ---------------------------------------------------------------------------

/// Reduce a coordinate jet modulo `period`. The value moves into [0, period);
/// all derivative entries are unchanged (d/dx of x mod L is 1 away from the
/// seam).
fn reduce_periodic(jet: &Jet3, period: f64) -> Jet3 {
    let mut comps = [0.0; 20];
    comps[..jet.comps().len()].copy_from_slice(jet.comps());
    comps[0] = comps[0].rem_euclid(period);
    Jet3::from_comps(&comps, jet.order())
}

/// Periodic prior-dictionary features as jets with exact derivatives:
/// [t, sin(2 pi k x), cos(2 pi k x), sin(2 pi k y), cos(2 pi k y); k=1..K].
pub fn build_periodic_features(point_jets: &[Jet3; 3], dict: &PeriodicDictionary) -> Vec<Jet3> {
    let mut feats = Vec::with_capacity(dict.feature_count());
    feats.push(point_jets[0]);
    for k in 1..=dict.harmonics {
        for axis in 0..2 {
            let reduced = reduce_periodic(&point_jets[1 + axis], dict.periods[axis]);
            let scaled =
                jet_elementwise(ElemFn::Scale(k as f64 / dict.periods[axis]), &reduced).unwrap();
            feats.push(jet_elementwise(ElemFn::Sin2Pi, &scaled).unwrap());
            feats.push(jet_elementwise(ElemFn::Cos2Pi, &scaled).unwrap());
        }
    }
    feats
}

/// Dictionary features for a batch of points, packed as a graph leaf block.
pub fn dictionary_block(points: &[[f64; 3]], dict: &PeriodicDictionary, order: usize) -> Block {
    let rows = dict.feature_count();
    let mut block = Block::zeros(rows, points.len(), order);
    for (cell, point) in points.iter().enumerate() {
        let jets = jet_seed_inputs(*point, order).expect("order validated by caller");
        let feats = build_periodic_features(&jets, dict);
        for (row, feat) in feats.iter().enumerate() {
            block.set_jet(row, cell, feat);
        }
    }
    block
}

// ---------------------------------------------------------------------------
// Initialization and forward evaluation
// ---------------------------------------------------------------------------

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases;
/// bit-deterministic in the seed.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> Result<ParamVector, NetworkError> {
    spec.validate()?;
    let layout = spec.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; layout.total_len()];
    for (l, shape) in layout.layers.iter().enumerate() {
        let bound = (6.0 / (shape.cols + shape.rows) as f64).sqrt();
        for w in &mut values[layout.weight_range(l)] {
            *w = (rng.gen::<f64>() * 2.0 - 1.0) * bound;
        }
        // biases stay zero
    }
    Ok(ParamVector::new(layout, values)?)
}

/// Record the full network forward pass for a batch of points; returns the
/// 3-row head block node. Head layers are linear (no activation).
pub fn forward_network(
    graph: &mut ParamGraph,
    spec: &NetworkSpec,
    points: &[[f64; 3]],
    order: usize,
) -> Result<NodeId, NetworkError> {
    spec.validate()?;
    let expected = spec.layout().total_len();
    if graph.params().len() != expected {
        return Err(NetworkError::LayoutMismatch { expected, actual: graph.params().len() });
    }
    let mut node = graph.leaf(dictionary_block(points, &spec.dictionary, order));
    for (l, h) in spec.hidden.iter().enumerate() {
        node = graph.affine(l, node)?;
        node = graph.elem(ElemFn::Act(h.activation), node)?;
    }
    Ok(graph.affine(spec.hidden.len(), node)?)
}

/// Evaluate the network at a single point, recording into a fresh graph.
/// Returns the head jets. (A batch of one; the batched path is
/// [`forward_network`].)
pub fn mlp_forward(
    params: &ParamVector,
    spec: &NetworkSpec,
    point: [f64; 3],
    order: usize,
) -> Result<Vec<Jet3>, NetworkError> {
    let (jets, _) = mlp_forward_recorded(params, spec, point, order)?;
    Ok(jets)
}

/// Like [`mlp_forward`] but also hands back the recorded graph and head node,
/// for callers that continue building a loss on top.
pub fn mlp_forward_recorded(
    params: &ParamVector,
    spec: &NetworkSpec,
    point: [f64; 3],
    order: usize,
) -> Result<(Vec<Jet3>, (ParamGraph, NodeId)), NetworkError> {
    if order > crate::jet::MAX_ORDER {
        return Err(NetworkError::InvalidSpec(format!("order {order} out of range")));
    }
    let mut graph = ParamGraph::new(params.clone());
    let heads = forward_network(&mut graph, spec, &[point], order)?;
    let jets = (0..spec.heads.head_count()).map(|r| graph.jet(heads, r, 0)).collect();
    Ok((jets, (graph, heads)))
}
