//! Recorded parameter graph: reverse-mode gradients of scalars built from jet
//! components.
//!
//! Nodes hold batched jet blocks (rows x cells, each cell a jet of the node's
//! order), so one node covers a whole collocation batch. The forward pass runs
//! eagerly as nodes are appended; [`ParamGraph::backward`] performs a single
//! reverse sweep, visiting each node exactly once, and returns dLoss/d(theta)
//! for every parameter (exactly zero for parameters the loss never touched).
//!
//! All reductions (matrix products, gradient accumulation, batch means) run in
//! a fixed order; parallelism is only over independent output rows, so results
//! are bit-identical for any worker count.

use crate::jet::{
    jet_deriv_adjoint, jet_deriv_into, jet_elem_adjoint, jet_elem_into, jet_mul_adjoint,
    jet_mul_into, ElemFn, Jet3, N_COMPS,
};
use rayon::prelude::*;
use std::fmt;
use std::ops::Range;

// ---------------------------------------------------------------------------
// Parameter storage
// ---------------------------------------------------------------------------

/// Shape of one affine layer: a rows x cols weight matrix plus a bias of
/// length rows. `cols == 0` describes a bare parameter block (bias only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.rows * self.cols + self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-layer descriptor of the flat parameter array.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParamLayout {
    pub layers: Vec<LayerShape>,
}

impl ParamLayout {
    pub fn total_len(&self) -> usize {
        self.layers.iter().map(LayerShape::len).sum()
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.layers[..layer].iter().map(LayerShape::len).sum()
    }

    /// Range of the row-major weight matrix of `layer` in the flat array.
    pub fn weight_range(&self, layer: usize) -> Range<usize> {
        let off = self.layer_offset(layer);
        off..off + self.layers[layer].rows * self.layers[layer].cols
    }

    /// Range of the bias vector of `layer`.
    pub fn bias_range(&self, layer: usize) -> Range<usize> {
        let w = self.weight_range(layer);
        w.end..w.end + self.layers[layer].rows
    }
}

/// Flat parameter array plus its layout.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParamVector {
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: ParamLayout, values: Vec<f64>) -> Result<ParamVector, GraphError> {
        if layout.total_len() != values.len() {
            return Err(GraphError::LayoutMismatch {
                expected: layout.total_len(),
                actual: values.len(),
            });
        }
        Ok(ParamVector { layout, values })
    }

    /// A layout-free flat vector (stored as a single bias-only layer).
    pub fn flat(values: Vec<f64>) -> ParamVector {
        let layout = ParamLayout { layers: vec![LayerShape { rows: values.len(), cols: 0 }] };
        ParamVector { layout, values }
    }

    pub fn zeros_like(&self) -> ParamVector {
        ParamVector { layout: self.layout.clone(), values: vec![0.0; self.values.len()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    ShapeMismatch { what: &'static str },
    OrderMismatch { left: usize, right: usize },
    InsufficientOrder { required: usize, actual: usize },
    LayoutMismatch { expected: usize, actual: usize },
    RowOutOfRange { row: usize, rows: usize },
    LayerOutOfRange { layer: usize },
    ParamOutOfRange { index: usize },
    /// Reciprocal of a cell whose value is exactly zero.
    Singularity { row: usize, cell: usize },
    /// Loss node passed to backward is not a 1x1 order-0 scalar.
    NotScalar,
    /// A non-finite adjoint appeared during the reverse sweep.
    NonFiniteAdjoint { node_kind: &'static str },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::ShapeMismatch { what } => write!(f, "block shape mismatch in {what}"),
            GraphError::OrderMismatch { left, right } => {
                write!(f, "jet order mismatch: {left} vs {right}")
            }
            GraphError::InsufficientOrder { required, actual } => {
                write!(f, "operation needs order >= {required}, block carries {actual}")
            }
            GraphError::LayoutMismatch { expected, actual } => {
                write!(f, "parameter layout expects {expected} values, got {actual}")
            }
            GraphError::RowOutOfRange { row, rows } => {
                write!(f, "row {row} out of range for block with {rows} rows")
            }
            GraphError::LayerOutOfRange { layer } => write!(f, "layer {layer} out of range"),
            GraphError::ParamOutOfRange { index } => write!(f, "parameter index {index} out of range"),
            GraphError::Singularity { row, cell } => {
                write!(f, "reciprocal of zero at row {row}, cell {cell}")
            }
            GraphError::NotScalar => write!(f, "backward requires a scalar (1x1, order-0) loss node"),
            GraphError::NonFiniteAdjoint { node_kind } => {
                write!(f, "non-finite adjoint at node kind {node_kind}")
            }
        }
    }
}

impl std::error::Error for GraphError {}

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

/// A batch of jets: `rows` features by `cells` evaluation points, each cell
/// carrying `N_COMPS[order]` components. Row-major, components contiguous per
/// cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub rows: usize,
    pub cells: usize,
    pub order: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn zeros(rows: usize, cells: usize, order: usize) -> Block {
        Block { rows, cells, order, data: vec![0.0; rows * cells * N_COMPS[order]] }
    }

    #[inline]
    pub fn n_comps(&self) -> usize {
        N_COMPS[self.order]
    }

    #[inline]
    fn cell_offset(&self, row: usize, cell: usize) -> usize {
        (row * self.cells + cell) * self.n_comps()
    }

    pub fn jet(&self, row: usize, cell: usize) -> Jet3 {
        let off = self.cell_offset(row, cell);
        Jet3::from_comps(&self.data[off..off + self.n_comps()], self.order)
    }

    pub fn set_jet(&mut self, row: usize, cell: usize, jet: &Jet3) {
        assert_eq!(jet.order(), self.order);
        let off = self.cell_offset(row, cell);
        let n = self.n_comps();
        self.data[off..off + n].copy_from_slice(jet.comps());
    }

    /// Value component of one cell.
    pub fn value(&self, row: usize, cell: usize) -> f64 {
        self.data[self.cell_offset(row, cell)]
    }

    fn same_shape(&self, other: &Block) -> bool {
        self.rows == other.rows && self.cells == other.cells && self.order == other.order
    }

    fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cells == 1 && self.order == 0
    }
}

// ---------------------------------------------------------------------------
// Nodes
// ---------------------------------------------------------------------------

/// Handle to a node in a [`ParamGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf,
    ParamJet { index: usize },
    Affine { layer: usize, input: NodeId },
    Elem { f: ElemFn, input: NodeId },
    Row { input: NodeId, row: usize },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Deriv { input: NodeId, axis: usize },
    Truncate { input: NodeId },
    AddConst { input: NodeId },
    Scale { input: NodeId, c: f64 },
    MeanSqValue { input: NodeId },
    WeightedSum { terms: Vec<(NodeId, f64)> },
}

impl NodeKind {
    fn name(&self) -> &'static str {
        match self {
            NodeKind::Leaf => "leaf",
            NodeKind::ParamJet { .. } => "param",
            NodeKind::Affine { .. } => "affine",
            NodeKind::Elem { .. } => "elem",
            NodeKind::Row { .. } => "row",
            NodeKind::Add { .. } => "add",
            NodeKind::Sub { .. } => "sub",
            NodeKind::Mul { .. } => "mul",
            NodeKind::Deriv { .. } => "deriv",
            NodeKind::Truncate { .. } => "truncate",
            NodeKind::AddConst { .. } => "add_const",
            NodeKind::Scale { .. } => "scale",
            NodeKind::MeanSqValue { .. } => "mean_sq_value",
            NodeKind::WeightedSum { .. } => "weighted_sum",
        }
    }
}

struct Node {
    kind: NodeKind,
    out: Block,
}

/// Recorded computation over a parameter snapshot.
pub struct ParamGraph {
    params: ParamVector,
    nodes: Vec<Node>,
}

const PAR_MIN_ELEMS: usize = 1 << 12;

impl ParamGraph {
    pub fn new(params: ParamVector) -> ParamGraph {
        ParamGraph { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn block(&self, id: NodeId) -> &Block {
        &self.nodes[id.0].out
    }

    /// Jet at (row, cell) of a node's block.
    pub fn jet(&self, id: NodeId, row: usize, cell: usize) -> Jet3 {
        self.nodes[id.0].out.jet(row, cell)
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].out.value(0, 0)
    }

    fn push(&mut self, kind: NodeKind, out: Block) -> NodeId {
        // operands always precede their consumer, so ids are a topological order
        self.nodes.push(Node { kind, out });
        NodeId(self.nodes.len() - 1)
    }

    // -- leaves ---------------------------------------------------------------

    /// A constant block (no parameter dependence).
    pub fn leaf(&mut self, block: Block) -> NodeId {
        self.push(NodeKind::Leaf, block)
    }

    /// A single parameter entry as a 1x1 constant-valued jet of `order`.
    pub fn param_jet(&mut self, index: usize, order: usize) -> Result<NodeId, GraphError> {
        if index >= self.params.len() {
            return Err(GraphError::ParamOutOfRange { index });
        }
        let mut out = Block::zeros(1, 1, order);
        out.data[0] = self.params.values[index];
        Ok(self.push(NodeKind::ParamJet { index }, out))
    }

    // -- layer operations -------------------------------------------------------

    /// Affine layer `W a + b`: the weight multiplies every jet component, the
    /// bias only shifts the value component.
    pub fn affine(&mut self, layer: usize, input: NodeId) -> Result<NodeId, GraphError> {
        if layer >= self.params.layout.layers.len() {
            return Err(GraphError::LayerOutOfRange { layer });
        }
        let shape = self.params.layout.layers[layer];
        let a = &self.nodes[input.0].out;
        if shape.cols != a.rows {
            return Err(GraphError::ShapeMismatch { what: "affine input rows" });
        }
        let n = a.cells * a.n_comps();
        let w = &self.params.values[self.params.layout.weight_range(layer)];
        let bias = &self.params.values[self.params.layout.bias_range(layer)];
        let mut out = Block::zeros(shape.rows, a.cells, a.order);
        matmul_acc(&mut out.data, w, &a.data, shape.rows, shape.cols, n);
        let comps = out.n_comps();
        for r in 0..shape.rows {
            let base = r * n;
            for cell in 0..out.cells {
                out.data[base + cell * comps] += bias[r];
            }
        }
        Ok(self.push(NodeKind::Affine { layer, input }, out))
    }

    /// Elementwise function through the chain rule, cell by cell.
    pub fn elem(&mut self, f: ElemFn, input: NodeId) -> Result<NodeId, GraphError> {
        let a = &self.nodes[input.0].out;
        let mut out = Block::zeros(a.rows, a.cells, a.order);
        if let ElemFn::Scale(c) = f {
            for (o, v) in out.data.iter_mut().zip(&a.data) {
                *o = c * v;
            }
        } else if let ElemFn::Neg = f {
            for (o, v) in out.data.iter_mut().zip(&a.data) {
                *o = -v;
            }
        } else {
            if matches!(f, ElemFn::Recip) {
                for r in 0..a.rows {
                    for cell in 0..a.cells {
                        if a.value(r, cell) == 0.0 {
                            return Err(GraphError::Singularity { row: r, cell });
                        }
                    }
                }
            }
            let comps = a.n_comps();
            let order = a.order;
            let row_len = a.cells * comps;
            let apply = |(orow, arow): (&mut [f64], &[f64])| {
                for cell in 0..arow.len() / comps {
                    let s = cell * comps;
                    let tab = f.table(arow[s]);
                    jet_elem_into(&tab, &arow[s..s + comps], &mut orow[s..s + comps], order);
                }
            };
            if a.data.len() >= PAR_MIN_ELEMS {
                out.data
                    .par_chunks_mut(row_len)
                    .zip(a.data.par_chunks(row_len))
                    .for_each(apply);
            } else {
                out.data.chunks_mut(row_len).zip(a.data.chunks(row_len)).for_each(apply);
            }
        }
        Ok(self.push(NodeKind::Elem { f, input }, out))
    }

    /// Extract one row as a 1-row block.
    pub fn row(&mut self, input: NodeId, row: usize) -> Result<NodeId, GraphError> {
        let a = &self.nodes[input.0].out;
        if row >= a.rows {
            return Err(GraphError::RowOutOfRange { row, rows: a.rows });
        }
        let n = a.cells * a.n_comps();
        let mut out = Block::zeros(1, a.cells, a.order);
        out.data.copy_from_slice(&a.data[row * n..(row + 1) * n]);
        Ok(self.push(NodeKind::Row { input, row }, out))
    }

    // -- cellwise jet arithmetic --------------------------------------------------

    fn binary_shapes(&self, a: NodeId, b: NodeId) -> Result<(usize, usize, usize), GraphError> {
        let (ba, bb) = (&self.nodes[a.0].out, &self.nodes[b.0].out);
        if ba.order != bb.order {
            return Err(GraphError::OrderMismatch { left: ba.order, right: bb.order });
        }
        if !ba.same_shape(bb) {
            return Err(GraphError::ShapeMismatch { what: "binary op" });
        }
        Ok((ba.rows, ba.cells, ba.order))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (rows, cells, order) = self.binary_shapes(a, b)?;
        let mut out = Block::zeros(rows, cells, order);
        for ((o, x), y) in
            out.data.iter_mut().zip(&self.nodes[a.0].out.data).zip(&self.nodes[b.0].out.data)
        {
            *o = x + y;
        }
        Ok(self.push(NodeKind::Add { a, b }, out))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (rows, cells, order) = self.binary_shapes(a, b)?;
        let mut out = Block::zeros(rows, cells, order);
        for ((o, x), y) in
            out.data.iter_mut().zip(&self.nodes[a.0].out.data).zip(&self.nodes[b.0].out.data)
        {
            *o = x - y;
        }
        Ok(self.push(NodeKind::Sub { a, b }, out))
    }

    /// Cellwise jet product (Leibniz at the carried order).
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (rows, cells, order) = self.binary_shapes(a, b)?;
        let comps = N_COMPS[order];
        let mut out = Block::zeros(rows, cells, order);
        let (da, db) = (&self.nodes[a.0].out.data, &self.nodes[b.0].out.data);
        for cell in 0..rows * cells {
            let s = cell * comps;
            jet_mul_into(&da[s..s + comps], &db[s..s + comps], &mut out.data[s..s + comps], order);
        }
        Ok(self.push(NodeKind::Mul { a, b }, out))
    }

    /// Jet of the partial derivative along `axis` (order drops by one).
    pub fn deriv(&mut self, input: NodeId, axis: usize) -> Result<NodeId, GraphError> {
        let a = &self.nodes[input.0].out;
        if a.order < 1 {
            return Err(GraphError::InsufficientOrder { required: 1, actual: 0 });
        }
        let (in_order, in_comps) = (a.order, a.n_comps());
        let out_comps = N_COMPS[in_order - 1];
        let mut out = Block::zeros(a.rows, a.cells, in_order - 1);
        for cell in 0..a.rows * a.cells {
            jet_deriv_into(
                &a.data[cell * in_comps..cell * in_comps + in_comps],
                axis,
                &mut out.data[cell * out_comps..cell * out_comps + out_comps],
                in_order,
            );
        }
        Ok(self.push(NodeKind::Deriv { input, axis }, out))
    }

    /// Truncate every cell to a lower carried order.
    pub fn truncate(&mut self, input: NodeId, order: usize) -> Result<NodeId, GraphError> {
        let a = &self.nodes[input.0].out;
        if order > a.order {
            return Err(GraphError::InsufficientOrder { required: order, actual: a.order });
        }
        let (in_comps, out_comps) = (a.n_comps(), N_COMPS[order]);
        let mut out = Block::zeros(a.rows, a.cells, order);
        for cell in 0..a.rows * a.cells {
            out.data[cell * out_comps..(cell + 1) * out_comps]
                .copy_from_slice(&a.data[cell * in_comps..cell * in_comps + out_comps]);
        }
        Ok(self.push(NodeKind::Truncate { input }, out))
    }

    /// Add a constant to the value component of every cell.
    pub fn add_const(&mut self, input: NodeId, c: f64) -> NodeId {
        let a = &self.nodes[input.0].out;
        let comps = a.n_comps();
        let mut out = a.clone();
        for cell in 0..a.rows * a.cells {
            out.data[cell * comps] += c;
        }
        self.push(NodeKind::AddConst { input }, out)
    }

    /// Scale every component of every cell.
    pub fn scale(&mut self, input: NodeId, c: f64) -> NodeId {
        let a = &self.nodes[input.0].out;
        let mut out = Block::zeros(a.rows, a.cells, a.order);
        for (o, v) in out.data.iter_mut().zip(&a.data) {
            *o = c * v;
        }
        self.push(NodeKind::Scale { input, c }, out)
    }

    // -- reductions ----------------------------------------------------------------

    /// Mean of squared value components over all rows and cells: the batch
    /// mean-square norm of a residual block. Produces a scalar node.
    pub fn mean_sq_value(&mut self, input: NodeId) -> NodeId {
        let a = &self.nodes[input.0].out;
        let comps = a.n_comps();
        let mut acc = 0.0;
        for cell in 0..a.rows * a.cells {
            let v = a.data[cell * comps];
            acc += v * v;
        }
        let mut out = Block::zeros(1, 1, 0);
        out.data[0] = acc / (a.rows * a.cells) as f64;
        self.push(NodeKind::MeanSqValue { input }, out)
    }

    /// Weighted sum of scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId, GraphError> {
        let mut acc = 0.0;
        for &(id, c) in terms {
            if !self.nodes[id.0].out.is_scalar() {
                return Err(GraphError::NotScalar);
            }
            acc += c * self.nodes[id.0].out.data[0];
        }
        let mut out = Block::zeros(1, 1, 0);
        out.data[0] = acc;
        Ok(self.push(NodeKind::WeightedSum { terms: terms.to_vec() }, out))
    }

    // -- reverse sweep ----------------------------------------------------------------

    /// Gradient of a scalar loss node with respect to every parameter.
    pub fn backward(&self, loss: NodeId) -> Result<ParamVector, GraphError> {
        if !self.nodes[loss.0].out.is_scalar() {
            return Err(GraphError::NotScalar);
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut adjoints: Vec<Option<Block>> = (0..self.nodes.len()).map(|_| None).collect();
        adjoints[loss.0] = Some({
            let mut b = Block::zeros(1, 1, 0);
            b.data[0] = 1.0;
            b
        });

        for idx in (0..=loss.0).rev() {
            let Some(zbar) = adjoints[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !zbar.data.iter().all(|v| v.is_finite()) {
                return Err(GraphError::NonFiniteAdjoint { node_kind: node.kind.name() });
            }
            match &node.kind {
                NodeKind::Leaf => {}
                NodeKind::ParamJet { index } => {
                    grad[*index] += zbar.data[0];
                }
                NodeKind::Affine { layer, input } => {
                    self.affine_adjoint(*layer, *input, &zbar, &mut adjoints, &mut grad);
                }
                NodeKind::Elem { f, input } => {
                    let a = &self.nodes[input.0].out;
                    let abar = get_adjoint(&mut adjoints, input.0, a);
                    elem_adjoint_block(*f, &zbar, a, abar);
                }
                NodeKind::Row { input, row } => {
                    let a = &self.nodes[input.0].out;
                    let n = a.cells * a.n_comps();
                    let abar = get_adjoint(&mut adjoints, input.0, a);
                    for (o, z) in abar.data[row * n..(row + 1) * n].iter_mut().zip(&zbar.data) {
                        *o += z;
                    }
                }
                NodeKind::Add { a, b } => {
                    accumulate(get_adjoint(&mut adjoints, a.0, &self.nodes[a.0].out), &zbar.data, 1.0);
                    accumulate(get_adjoint(&mut adjoints, b.0, &self.nodes[b.0].out), &zbar.data, 1.0);
                }
                NodeKind::Sub { a, b } => {
                    accumulate(get_adjoint(&mut adjoints, a.0, &self.nodes[a.0].out), &zbar.data, 1.0);
                    accumulate(get_adjoint(&mut adjoints, b.0, &self.nodes[b.0].out), &zbar.data, -1.0);
                }
                NodeKind::Mul { a, b } => {
                    // temporaries so that a == b (squares) accumulates both sides
                    let (ba, bb) = (&self.nodes[a.0].out, &self.nodes[b.0].out);
                    let comps = ba.n_comps();
                    let mut ta = Block::zeros(ba.rows, ba.cells, ba.order);
                    let mut tb = Block::zeros(bb.rows, bb.cells, bb.order);
                    for cell in 0..ba.rows * ba.cells {
                        let s = cell * comps;
                        jet_mul_adjoint(
                            &zbar.data[s..s + comps],
                            &ba.data[s..s + comps],
                            &bb.data[s..s + comps],
                            &mut ta.data[s..s + comps],
                            &mut tb.data[s..s + comps],
                            ba.order,
                        );
                    }
                    accumulate(get_adjoint(&mut adjoints, a.0, ba), &ta.data, 1.0);
                    accumulate(get_adjoint(&mut adjoints, b.0, bb), &tb.data, 1.0);
                }
                NodeKind::Deriv { input, axis } => {
                    let a = &self.nodes[input.0].out;
                    let (in_order, in_comps) = (a.order, a.n_comps());
                    let out_comps = N_COMPS[in_order - 1];
                    let abar = get_adjoint(&mut adjoints, input.0, a);
                    for cell in 0..a.rows * a.cells {
                        jet_deriv_adjoint(
                            &zbar.data[cell * out_comps..(cell + 1) * out_comps],
                            *axis,
                            &mut abar.data[cell * in_comps..(cell + 1) * in_comps],
                            in_order,
                        );
                    }
                }
                NodeKind::Truncate { input } => {
                    let a = &self.nodes[input.0].out;
                    let (in_comps, out_comps) = (a.n_comps(), zbar.n_comps());
                    let abar = get_adjoint(&mut adjoints, input.0, a);
                    for cell in 0..a.rows * a.cells {
                        for c in 0..out_comps {
                            abar.data[cell * in_comps + c] += zbar.data[cell * out_comps + c];
                        }
                    }
                }
                NodeKind::AddConst { input } => {
                    accumulate(
                        get_adjoint(&mut adjoints, input.0, &self.nodes[input.0].out),
                        &zbar.data,
                        1.0,
                    );
                }
                NodeKind::Scale { input, c } => {
                    accumulate(
                        get_adjoint(&mut adjoints, input.0, &self.nodes[input.0].out),
                        &zbar.data,
                        *c,
                    );
                }
                NodeKind::MeanSqValue { input } => {
                    let a = &self.nodes[input.0].out;
                    let comps = a.n_comps();
                    let w = 2.0 * zbar.data[0] / (a.rows * a.cells) as f64;
                    let abar = get_adjoint(&mut adjoints, input.0, a);
                    for cell in 0..a.rows * a.cells {
                        abar.data[cell * comps] += w * a.data[cell * comps];
                    }
                }
                NodeKind::WeightedSum { terms } => {
                    for &(id, c) in terms {
                        let abar = get_adjoint(&mut adjoints, id.0, &self.nodes[id.0].out);
                        abar.data[0] += c * zbar.data[0];
                    }
                }
            }
        }
        Ok(ParamVector { layout: self.params.layout.clone(), values: grad })
    }

    fn affine_adjoint(
        &self,
        layer: usize,
        input: NodeId,
        zbar: &Block,
        adjoints: &mut [Option<Block>],
        grad: &mut [f64],
    ) {
        let shape = self.params.layout.layers[layer];
        let a = &self.nodes[input.0].out;
        let n = a.cells * a.n_comps();
        let comps = a.n_comps();
        let (m, k) = (shape.rows, shape.cols);

        // bias gradient: sum of value-component adjoints per output row
        let brange = self.params.layout.bias_range(layer);
        for r in 0..m {
            let mut acc = 0.0;
            for cell in 0..a.cells {
                acc += zbar.data[r * n + cell * comps];
            }
            grad[brange.start + r] += acc;
        }

        // weight gradient: Wbar = Zbar * A^T
        let wrange = self.params.layout.weight_range(layer);
        let wgrad = &mut grad[wrange.clone()];
        let run = |(r, wrow): (usize, &mut [f64])| {
            let zrow = &zbar.data[r * n..(r + 1) * n];
            for (kk, wv) in wrow.iter_mut().enumerate() {
                let arow = &a.data[kk * n..(kk + 1) * n];
                let mut acc = 0.0;
                for (z, av) in zrow.iter().zip(arow) {
                    acc += z * av;
                }
                *wv += acc;
            }
        };
        if m * k * n >= PAR_MIN_ELEMS * 8 {
            wgrad.par_chunks_mut(k).enumerate().for_each(run);
        } else {
            wgrad.chunks_mut(k).enumerate().for_each(run);
        }

        // input adjoint: Abar += W^T * Zbar
        let w = &self.params.values[wrange];
        let abar = get_adjoint(adjoints, input.0, a);
        let run = |(kk, arow): (usize, &mut [f64])| {
            for r in 0..m {
                let wv = w[r * k + kk];
                if wv != 0.0 {
                    let zrow = &zbar.data[r * n..(r + 1) * n];
                    for (o, z) in arow.iter_mut().zip(zrow) {
                        *o += wv * z;
                    }
                }
            }
        };
        if m * k * n >= PAR_MIN_ELEMS * 8 {
            abar.data.par_chunks_mut(n).enumerate().for_each(run);
        } else {
            abar.data.chunks_mut(n).enumerate().for_each(run);
        }
    }
}

fn get_adjoint<'a>(adjoints: &'a mut [Option<Block>], idx: usize, like: &Block) -> &'a mut Block {
    adjoints[idx].get_or_insert_with(|| Block::zeros(like.rows, like.cells, like.order))
}

fn accumulate(dst: &mut Block, src: &[f64], c: f64) {
    for (o, s) in dst.data.iter_mut().zip(src) {
        *o += c * s;
    }
}

fn elem_adjoint_block(f: ElemFn, zbar: &Block, a: &Block, abar: &mut Block) {
    match f {
        ElemFn::Scale(c) => accumulate(abar, &zbar.data, c),
        ElemFn::Neg => accumulate(abar, &zbar.data, -1.0),
        _ => {
            let comps = a.n_comps();
            let order = a.order;
            let row_len = a.cells * comps;
            let run = |((obar, arow), zrow): ((&mut [f64], &[f64]), &[f64])| {
                for cell in 0..arow.len() / comps {
                    let s = cell * comps;
                    let tab = f.table(arow[s]);
                    jet_elem_adjoint(
                        &tab,
                        &zrow[s..s + comps],
                        &arow[s..s + comps],
                        &mut obar[s..s + comps],
                        order,
                    );
                }
            };
            if a.data.len() >= PAR_MIN_ELEMS {
                abar.data
                    .par_chunks_mut(row_len)
                    .zip(a.data.par_chunks(row_len))
                    .zip(zbar.data.par_chunks(row_len))
                    .for_each(run);
            } else {
                abar.data
                    .chunks_mut(row_len)
                    .zip(a.data.chunks(row_len))
                    .zip(zbar.data.chunks(row_len))
                    .for_each(run);
            }
        }
    }
}

/// out += w (m x k, row-major) times a (k x n, row-major). Row-parallel with a
/// fixed inner accumulation order.
fn matmul_acc(out: &mut [f64], w: &[f64], a: &[f64], m: usize, k: usize, n: usize) {
    let run = |(r, orow): (usize, &mut [f64])| {
        for kk in 0..k {
            let wv = w[r * k + kk];
            if wv != 0.0 {
                let arow = &a[kk * n..(kk + 1) * n];
                for (o, av) in orow.iter_mut().zip(arow) {
                    *o += wv * av;
                }
            }
        }
    };
    if m * k * n >= PAR_MIN_ELEMS * 8 {
        out.par_chunks_mut(n).enumerate().for_each(run);
    } else {
        out.chunks_mut(n).enumerate().for_each(run);
    }
}
