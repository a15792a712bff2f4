//! Train a configuration and report grid accuracy against the analytic
//! fields. Knobs via env vars to keep iteration cheap.

use tenn_core::jet::ActivationKind;
use tenn_core::network::{HiddenLayer, NetworkSpec, PeriodicDictionary};
use tenn_core::report::{evaluate_on_grid, model_predictor, GridSpec};
use tenn_core::trainer::{train, Checkpoint, ModelKind, TrainConfig};
use tenn_core::HeadRole;

fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() {
    let model: String = env("MODEL", "tenn".to_string());
    let re: f64 = env("RE", 100.0);
    let epochs: usize = env("EPOCHS", 2000);
    let interior: usize = env("INTERIOR", 256);
    let ic: usize = env("IC", 64);
    let width: usize = env("WIDTH", 32);
    let depth: usize = env("DEPTH", 3);
    let act: String = env("ACT", "sin".to_string());
    let eps_div: f64 = env("EPS_DIV", 0.3);
    let lr: f64 = env("LR", 1e-3);
    let seed: u64 = env("SEED", 0);
    let harmonics: usize = env("K", 2);
    let eval_eps: f64 = env("EVAL_EPS", 1e-4);

    let alpha_ic: f64 = env("ALPHA_IC", 1.0);
    let alpha_curl: f64 = env("ALPHA_CURL", 1.0);
    let alpha_incmp: f64 = env("ALPHA_INCMP", 1.0);
    let alpha_flux: f64 = env("ALPHA_FLUX", 1.0);
    let variant: String = env("VARIANT", "potential".to_string());

    let kind = if model == "vanilla" { ModelKind::Vanilla } else { ModelKind::Tenn };
    let split = variant == "split";
    let role = match (kind, split) {
        (ModelKind::Vanilla, _) => HeadRole::VanillaPinn,
        (ModelKind::Tenn, false) => HeadRole::TennPotential,
        (ModelKind::Tenn, true) => HeadRole::TennSplit,
    };
    let mut config = TrainConfig::preset(kind, re);
    if kind == ModelKind::Tenn {
        config.variant =
            if split { tenn_core::TennVariant::SplitA } else { tenn_core::TennVariant::PotentialB };
        config.weights = TrainConfig::preset_weights(kind, config.variant);
        config.weights.alpha[tenn_core::losses::TERM_IC_TENN] = alpha_ic;
        config.weights.alpha[tenn_core::losses::TERM_INCMP] = alpha_incmp;
        if split {
            config.weights.alpha[tenn_core::losses::TERM_FLUX] = alpha_flux;
        } else {
            config.weights.alpha[tenn_core::losses::TERM_CURL] = alpha_curl;
        }
    }
    config.epochs = epochs;
    config.interior_points = interior;
    config.ic_points = ic;
    config.eps_div = eps_div;
    config.seed = seed;
    config.adam.lr = lr;
    config.network = NetworkSpec {
        dictionary: PeriodicDictionary { harmonics, ..Default::default() },
        hidden: vec![
            HiddenLayer { width, activation: act.parse::<ActivationKind>().unwrap() };
            depth
        ],
        heads: role,
    };

    let start = std::time::Instant::now();
    let result = train(&config);
    let (params, report) = match result {
        Ok(ok) => ok,
        Err(e) => {
            println!("TRAINING FAILED: {e}");
            return;
        }
    };
    let secs = start.elapsed().as_secs_f64();
    let first = report.history.first().map(|e| e.total).unwrap_or(f64::NAN);
    let last = report.history.last().unwrap();
    println!("trained {epochs} epochs in {secs:.1}s  loss {first:.3e} -> {:.3e}", last.total);
    println!(
        "final terms: pde {:.3e} curl {:.3e} incmp {:.3e} icv {:.3e} ict {:.3e} flux {:.3e}",
        last.terms[0], last.terms[1], last.terms[2], last.terms[3], last.terms[4], last.terms[5]
    );

    let ckpt = Checkpoint { params, spec: config.network.clone(), config: config.clone() };
    let grid = GridSpec::default();
    for eps in [eval_eps, eps_div, eps_div * 0.3, 1.0] {
        let mut pred = model_predictor(&ckpt, Some(eps));
        let eval = evaluate_on_grid(&mut pred, &grid, re);
        println!(
            "eval_eps {eps:<8.1e} rel_l2 {:<10.4} decay pred {:.4} true {:.4}  vel {:.4}  per-time {:?}",
            eval.rel_l2_overall,
            eval.decay_ratio_pred,
            eval.decay_ratio_true,
            eval.rel_l2_velocity_overall,
            eval.rel_l2_per_time.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>()
        );
    }
}
