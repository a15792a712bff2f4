//! Rough per-epoch timing for candidate training configurations.

use std::time::Instant;
use tenn_core::jet::ActivationKind;
use tenn_core::network::{HiddenLayer, NetworkSpec};
use tenn_core::trainer::{train, ModelKind, TrainConfig};
use tenn_core::HeadRole;

fn time_config(label: &str, config: &TrainConfig) {
    let start = Instant::now();
    let (_, report) = train(config).expect(label);
    let secs = start.elapsed().as_secs_f64();
    println!(
        "{label:<40} {:>6} epochs in {:>7.2}s  ({:>7.2} ms/epoch)  final total {:.4e}",
        config.epochs,
        secs,
        1e3 * secs / config.epochs.max(1) as f64,
        report.history.last().map(|e| e.total).unwrap_or(f64::NAN),
    );
}

fn main() {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);

    let mut vanilla = TrainConfig::preset(ModelKind::Vanilla, 0.1);
    vanilla.epochs = epochs;
    vanilla.interior_points = 128;
    vanilla.ic_points = 32;
    time_config("vanilla 4x64 tanh, 128+32", &vanilla);

    let mut tenn = TrainConfig::preset(ModelKind::Tenn, 100.0);
    tenn.epochs = epochs;
    tenn.interior_points = 256;
    tenn.ic_points = 64;
    tenn.eps_div = 0.3;
    tenn.network = NetworkSpec {
        dictionary: Default::default(),
        hidden: vec![HiddenLayer { width: 64, activation: ActivationKind::Tanh }; 4],
        heads: HeadRole::TennPotential,
    };
    time_config("tenn 4x64 tanh, 256+64", &tenn);

    let mut small = tenn.clone();
    small.network.hidden = vec![HiddenLayer { width: 32, activation: ActivationKind::Sin }; 3];
    time_config("tenn 3x32 sin, 256+64", &small);
}
