//! Transport-embedded neural networks (TENN) and a vanilla physics-informed
//! baseline for the decaying Taylor-Green vortex on the unit 2-torus.
//!
//! The crate is organized around a forward jet algebra ([`jet`]) that carries
//! input derivatives to order 3, a recorded parameter graph ([`graph`]) for
//! reverse-mode gradients of losses built from jet components, the periodic
//! network ([`network`]), the divergence-free transport embedding
//! ([`embedding`]), the analytic Taylor-Green oracle ([`oracle`]), residual
//! losses ([`losses`]), ADAM training ([`trainer`]), and evaluation /
//! verification reporting ([`report`]).

pub mod embedding;
pub mod graph;
pub mod jet;
pub mod losses;
pub mod network;
pub mod oracle;
pub mod report;
pub mod trainer;

pub use embedding::{
    assemble_m, curl_spacetime, levi_civita, recover_velocity, spacetime_div, tenn_heads,
    transport_residual, FluxFields, TennVariant,
};
pub use graph::{NodeId, ParamGraph, ParamLayout, ParamVector};
pub use jet::{
    finite_diff_check, finite_diff_report, jet_arith, jet_elementwise, jet_seed_inputs,
    ActivationKind, ArithKind, ElemFn, FdReport, Jet3, JetError,
};
pub use losses::{total_loss, LossWeights, ResidualBatch};
pub use network::{
    build_periodic_features, init_params, mlp_forward, HeadRole, NetworkSpec, PeriodicDictionary,
};
pub use oracle::{
    analytic_pressure, analytic_velocity, analytic_vorticity, ns_residual_check, FlowState,
};
pub use trainer::{
    adam_step, load_checkpoint, sample_collocation, save_checkpoint, train, AdamParams, AdamState,
    ModelKind, TrainConfig, TrainError, TrainReport,
};

/// Initialize the global worker pool from the `TENN_WORKERS` environment
/// variable. Safe to call more than once; later calls are ignored. All
/// parallel regions in the crate produce results independent of the worker
/// count (reductions run in a fixed order).
pub fn init_workers() {
    if let Ok(s) = std::env::var("TENN_WORKERS") {
        if let Ok(n) = s.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
