//! Verification suites, oracle-grid evaluation, and plot-ready exports.
//!
//! `verify_identities` sweeps random networks through the embedding and
//! checks the construction-forced identities (divergence-free flux, the
//! diffusion identity, transport-by-construction), derivative correctness
//! against finite differences, exact periodicity, and the analytic oracle's
//! own residuals. `evaluate_on_grid` compares any predictor against the
//! analytic vorticity on a space-time grid and is the basis of the CLI's
//! `eval` and `export` commands.

use crate::embedding::{
    build_tenn_potential, curl_spacetime, curl_spacetime_with, levi_civita, m_jets,
    recover_velocity_jets, spacetime_div, transport_residual, AXIS_X, AXIS_Y,
};
use crate::graph::{ParamGraph, ParamVector};
use crate::jet::{finite_diff_report, ActivationKind, Jet3};
use crate::losses::{build_losses, LossWeights};
use crate::network::{forward_network, init_params, mlp_forward, HeadRole, HiddenLayer, NetworkSpec};
use crate::oracle::{analytic_velocity, analytic_vorticity, ns_residual_check, vorticity_transport_residual};
use crate::trainer::{sample_collocation, Checkpoint, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// One named check: worst observed value against its tolerance.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, worst: f64, tolerance: f64) -> CheckResult {
        CheckResult { name: name.to_string(), worst, tolerance, passed: worst <= tolerance }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<28} worst {:>12.3e}  tol {:>8.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failing(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Sweep sizes for the identity suites.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub networks: usize,
    pub points: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { networks: 20, points: 1000, seed: 0 }
    }
}

/// A small random architecture for identity sweeps.
fn random_spec(rng: &mut ChaCha8Rng, activation: ActivationKind, heads: HeadRole) -> NetworkSpec {
    let depth = rng.gen_range(1..=2);
    let hidden = (0..depth)
        .map(|_| HiddenLayer { width: rng.gen_range(8..=20), activation })
        .collect();
    let harmonics = rng.gen_range(1..=2);
    NetworkSpec {
        dictionary: crate::network::PeriodicDictionary { harmonics, ..Default::default() },
        hidden,
        heads,
    }
}

/// Head jets of a random network over a batch of points.
fn sweep_heads(
    spec: &NetworkSpec,
    params: &ParamVector,
    points: &[[f64; 3]],
    order: usize,
) -> Vec<[Jet3; 3]> {
    let mut graph = ParamGraph::new(params.clone());
    let node = forward_network(&mut graph, spec, points, order).expect("sweep forward");
    (0..points.len())
        .map(|cell| [graph.jet(node, 0, cell), graph.jet(node, 1, cell), graph.jet(node, 2, cell)])
        .collect()
}

fn for_each_sweep_net(
    opts: &VerifyOptions,
    mut body: impl FnMut(&NetworkSpec, &ParamVector, &[[f64; 3]]),
) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for net in 0..opts.networks {
        let activation = ActivationKind::ALL[net % ActivationKind::ALL.len()];
        let spec = random_spec(&mut rng, activation, HeadRole::TennPotential);
        let params = init_params(&spec, rng.gen()).expect("sweep init");
        let points = sample_collocation(opts.points, rng.gen(), 1.0, false);
        body(&spec, &params, &points);
    }
}

/// Worst |Div(T)| over the sweep, with an injectable permutation table.
pub(crate) fn lemma1_worst_with_table(
    eps: &dyn Fn(usize, usize, usize) -> i32,
    opts: &VerifyOptions,
) -> f64 {
    let mut worst = 0.0f64;
    for_each_sweep_net(opts, |spec, params, points| {
        for v in sweep_heads(spec, params, points, 2) {
            let t = curl_spacetime_with(eps, &v).expect("curl order");
            worst = worst.max(spacetime_div(&t).abs());
        }
    });
    worst
}

/// Lemma 1: the flux of any potential is divergence-free.
pub fn lemma1_worst(opts: &VerifyOptions) -> f64 {
    lemma1_worst_with_table(&levi_civita, opts)
}

/// Lemma 2: worst |Div(M) - gamma laplacian(T_0)| over the sweep and the
/// gamma presets.
pub fn lemma2_worst(opts: &VerifyOptions) -> f64 {
    let mut worst = 0.0f64;
    for_each_sweep_net(opts, |spec, params, points| {
        for v in sweep_heads(spec, params, points, 3) {
            let t = curl_spacetime(&v).expect("curl order");
            for gamma in [0.0, 0.01, 1.0, 10.0] {
                let m = m_jets(&t, gamma).expect("m order");
                let lap = t[0].hess(AXIS_X, AXIS_X) + t[0].hess(AXIS_Y, AXIS_Y);
                worst = worst.max((spacetime_div(&m) - gamma * lap).abs());
            }
        }
    });
    worst
}

/// Transport-by-construction: conservative transport residual of the
/// recovered fields (exact division, points with |omega| <= omega_floor
/// skipped), worst over the sweep.
pub fn transport_by_construction_worst(opts: &VerifyOptions, omega_floor: f64) -> f64 {
    let mut worst = 0.0f64;
    for_each_sweep_net(opts, |spec, params, points| {
        for v in sweep_heads(spec, params, points, 3) {
            let t = curl_spacetime(&v).expect("curl order");
            if t[0].value().abs() <= omega_floor {
                continue;
            }
            let gamma = 0.01;
            let m = m_jets(&t, gamma).expect("m order");
            let u = recover_velocity_jets(&m, &t[0], 0.0).expect("recovery");
            let r = transport_residual(&t[0], &u, gamma).expect("residual order");
            worst = worst.max(r.abs());
        }
    });
    worst
}

/// Finite-difference agreement of network head jets, per derivative order.
/// Step sizes are powers of two tuned per order.
pub fn finite_difference_worst(opts: &VerifyOptions) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let (mut wg, mut wh, mut wt) = (0.0f64, 0.0f64, 0.0f64);
    let nets = opts.networks.clamp(1, 8);
    let pts_per_net = (opts.points / 10).clamp(1, 20);
    for net in 0..nets {
        let activation = ActivationKind::ALL[net % ActivationKind::ALL.len()];
        let spec = random_spec(&mut rng, activation, HeadRole::TennPotential);
        let params = init_params(&spec, rng.gen()).expect("fd init");
        for _ in 0..pts_per_net {
            let point = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let head = rng.gen_range(0..3usize);
            let f = |p: [f64; 3]| mlp_forward(&params, &spec, p, 3).expect("fd forward")[head];
            wg = wg.max(finite_diff_report(&f, point, 2f64.powi(-20)).grad);
            wh = wh.max(finite_diff_report(&f, point, 2f64.powi(-17)).hess);
            wt = wt.max(finite_diff_report(&f, point, 2f64.powi(-10)).third);
        }
    }
    (wg, wh, wt)
}

/// Worst relative deviation between the recorded-graph parameter gradient of
/// the total loss and central differences, on a tiny network.
pub fn loss_gradient_worst(seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for heads in [HeadRole::VanillaPinn, HeadRole::TennPotential] {
        let spec = NetworkSpec {
            dictionary: crate::network::PeriodicDictionary { harmonics: 1, ..Default::default() },
            hidden: vec![HiddenLayer { width: 8, activation: ActivationKind::Tanh }; 2],
            heads,
        };
        let weights = match heads {
            HeadRole::VanillaPinn => LossWeights::vanilla(),
            _ => LossWeights::tenn(),
        };
        let interior = sample_collocation(16, seed ^ 1, 1.0, false);
        let ic = sample_collocation(8, seed ^ 2, 1.0, true);
        let (re, eps_div) = (10.0, 0.3);
        let params = init_params(&spec, seed).expect("init");

        let eval = |values: Vec<f64>| -> f64 {
            let p = ParamVector::new(params.layout.clone(), values).expect("layout");
            let mut g = ParamGraph::new(p);
            let nodes =
                build_losses(&mut g, &spec, &interior, &ic, re, eps_div, &weights).expect("loss");
            g.scalar(nodes.total)
        };

        let mut g = ParamGraph::new(params.clone());
        let nodes =
            build_losses(&mut g, &spec, &interior, &ic, re, eps_div, &weights).expect("loss");
        let grad = g.backward(nodes.total).expect("backward");

        let h = 1e-6;
        let scale = grad.values.iter().fold(1e-6f64, |a, g| a.max(g.abs()));
        for i in 0..params.len() {
            let mut vp = params.values.clone();
            vp[i] += h;
            let mut vm = params.values.clone();
            vm[i] -= h;
            let fd = (eval(vp) - eval(vm)) / (2.0 * h);
            worst = worst.max((grad.values[i] - fd).abs() / scale.max(fd.abs()));
        }
    }
    worst
}

/// Worst head-value deviation under a unit shift of both spatial inputs,
/// over random parameter draws and points.
pub fn periodicity_worst(opts: &VerifyOptions) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37);
    let mut worst = 0.0f64;
    for net in 0..opts.networks.clamp(1, 10) {
        let activation = ActivationKind::ALL[net % ActivationKind::ALL.len()];
        let spec = random_spec(&mut rng, activation, HeadRole::VanillaPinn);
        let params = init_params(&spec, rng.gen()).expect("init");
        for _ in 0..(opts.points / 10).max(1) {
            let (t, x, y) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let a = mlp_forward(&params, &spec, [t, x, y], 0).expect("fwd");
            let sx = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let sy = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let b = mlp_forward(&params, &spec, [t, x + sx, y + sy], 0).expect("fwd");
            for (ja, jb) in a.iter().zip(&b) {
                worst = worst.max((ja.value() - jb.value()).abs());
            }
        }
    }
    worst
}

/// Worst analytic-oracle residual (momentum, divergence, vorticity transport)
/// over random points and the Reynolds presets.
pub fn oracle_worst(opts: &VerifyOptions) -> f64 {
    let points = sample_collocation(opts.points, opts.seed ^ 0x0f, 1.0, false);
    let mut worst = 0.0f64;
    for re in [0.1, 1.0, 10.0, 100.0] {
        for p in &points {
            let r = ns_residual_check(p[1], p[2], p[0], re).expect("oracle");
            worst = worst.max(r[0].abs()).max(r[1].abs()).max(r[2].abs());
            let vt = vorticity_transport_residual(p[1], p[2], p[0], re).expect("oracle");
            worst = worst.max(vt.abs());
        }
    }
    worst
}

/// Run every identity and consistency suite.
pub fn verify_identities(opts: &VerifyOptions) -> VerifyReport {
    let mut checks = Vec::new();
    checks.push(CheckResult::new("lemma1 div-free flux", lemma1_worst(opts), 1e-10));
    checks.push(CheckResult::new("lemma2 diffusion identity", lemma2_worst(opts), 1e-9));
    checks.push(CheckResult::new(
        "transport by construction",
        transport_by_construction_worst(opts, 1e-3),
        1e-6,
    ));
    let (g, h, t) = finite_difference_worst(opts);
    checks.push(CheckResult::new("finite-diff gradient", g, 1e-5));
    checks.push(CheckResult::new("finite-diff hessian", h, 1e-3));
    checks.push(CheckResult::new("finite-diff third order", t, 1e-2));
    checks.push(CheckResult::new("loss parameter gradient", loss_gradient_worst(opts.seed), 1e-4));
    checks.push(CheckResult::new("exact periodicity", periodicity_worst(opts), 1e-13));
    checks.push(CheckResult::new("oracle residuals", oracle_worst(opts), 1e-10));
    VerifyReport { checks }
}

// ---------------------------------------------------------------------------
// Grid evaluation
// ---------------------------------------------------------------------------

/// Space-time evaluation grid definition. Spatial samples are the uniform
/// torus grid x = i/nx, y = j/ny (periodic, endpoint excluded).
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub times: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 64, ny: 64, times: vec![0.0, 0.25, 0.5, 0.75, 1.0] }
    }
}

/// Predicted vs true vorticity over the grid, with relative-L2 summaries.
/// Slices are row-major y-then-x (index iy * nx + ix).
#[derive(Debug, Clone)]
pub struct EvalGrid {
    pub nx: usize,
    pub ny: usize,
    pub times: Vec<f64>,
    pub predicted_omega: Vec<Vec<f64>>,
    pub true_omega: Vec<Vec<f64>>,
    pub abs_error: Vec<Vec<f64>>,
    pub rel_l2_per_time: Vec<f64>,
    pub rel_l2_overall: f64,
    /// Secondary velocity comparison (same norm convention).
    pub rel_l2_velocity_per_time: Vec<f64>,
    pub rel_l2_velocity_overall: f64,
    /// ||omega(t_last)||_2 / ||omega(t_0)||_2 for prediction and truth.
    pub decay_ratio_pred: f64,
    pub decay_ratio_true: f64,
}

fn rel_l2(num_sq: f64, den_sq: f64) -> f64 {
    if den_sq == 0.0 {
        if num_sq == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num_sq / den_sq).sqrt()
    }
}

/// Evaluate a batched predictor (omega, u per point) against the analytic
/// fields. The predictor is called with chunks of [t, x, y] points.
pub fn evaluate_on_grid<F>(predictor: &mut F, grid: &GridSpec, re: f64) -> EvalGrid
where
    F: FnMut(&[[f64; 3]]) -> Vec<(f64, [f64; 2])>,
{
    let (nx, ny) = (grid.nx, grid.ny);
    let cells = nx * ny;
    let mut predicted = Vec::with_capacity(grid.times.len());
    let mut truth = Vec::with_capacity(grid.times.len());
    let mut error = Vec::with_capacity(grid.times.len());
    let mut rel_per_time = Vec::new();
    let mut rel_vel_per_time = Vec::new();
    let (mut err_sq_all, mut true_sq_all) = (0.0, 0.0);
    let (mut vel_err_sq_all, mut vel_true_sq_all) = (0.0, 0.0);
    let (mut pred_sq_first, mut pred_sq_last) = (0.0, 0.0);
    let (mut true_sq_first, mut true_sq_last) = (0.0, 0.0);

    for (it, &t) in grid.times.iter().enumerate() {
        let mut points = Vec::with_capacity(cells);
        for iy in 0..ny {
            for ix in 0..nx {
                points.push([t, ix as f64 / nx as f64, iy as f64 / ny as f64]);
            }
        }
        let mut pred_slice = Vec::with_capacity(cells);
        let mut true_slice = Vec::with_capacity(cells);
        let mut err_slice = Vec::with_capacity(cells);
        let (mut err_sq, mut true_sq) = (0.0, 0.0);
        let (mut vel_err_sq, mut vel_true_sq) = (0.0, 0.0);
        let (mut pred_sq, _) = (0.0, 0.0);
        for chunk in points.chunks(512) {
            let out = predictor(chunk);
            assert_eq!(out.len(), chunk.len(), "predictor batch size");
            for (p, (w_pred, u_pred)) in chunk.iter().zip(out) {
                let w_true = analytic_vorticity(p[1], p[2], p[0], re).expect("oracle");
                let u_true = analytic_velocity(p[1], p[2], p[0], re).expect("oracle");
                let e = (w_pred - w_true).abs();
                pred_slice.push(w_pred);
                true_slice.push(w_true);
                err_slice.push(e);
                err_sq += e * e;
                true_sq += w_true * w_true;
                pred_sq += w_pred * w_pred;
                let (dx, dy) = (u_pred[0] - u_true[0], u_pred[1] - u_true[1]);
                vel_err_sq += dx * dx + dy * dy;
                vel_true_sq += u_true[0] * u_true[0] + u_true[1] * u_true[1];
            }
        }
        rel_per_time.push(rel_l2(err_sq, true_sq));
        rel_vel_per_time.push(rel_l2(vel_err_sq, vel_true_sq));
        err_sq_all += err_sq;
        true_sq_all += true_sq;
        vel_err_sq_all += vel_err_sq;
        vel_true_sq_all += vel_true_sq;
        if it == 0 {
            pred_sq_first = pred_sq;
            true_sq_first = true_sq;
        }
        if it == grid.times.len() - 1 {
            pred_sq_last = pred_sq;
            true_sq_last = true_sq;
        }
        predicted.push(pred_slice);
        truth.push(true_slice);
        error.push(err_slice);
    }

    EvalGrid {
        nx,
        ny,
        times: grid.times.clone(),
        predicted_omega: predicted,
        true_omega: truth,
        abs_error: error,
        rel_l2_per_time: rel_per_time,
        rel_l2_overall: rel_l2(err_sq_all, true_sq_all),
        rel_l2_velocity_per_time: rel_vel_per_time,
        rel_l2_velocity_overall: rel_l2(vel_err_sq_all, vel_true_sq_all),
        decay_ratio_pred: rel_l2(pred_sq_last, pred_sq_first),
        decay_ratio_true: rel_l2(true_sq_last, true_sq_first),
    }
}

/// Batched predictor for a trained checkpoint. Vorticity is always the
/// convention-consistent spatial curl d(u_y)/dx - d(u_x)/dy of the model's
/// velocity, for cross-model comparability. For the potential variant the
/// recovery regularizer defaults to the artifact default (1e-4) rather than
/// the training value; override to taste.
pub fn model_predictor(
    ckpt: &Checkpoint,
    eps_div: Option<f64>,
) -> impl FnMut(&[[f64; 3]]) -> Vec<(f64, [f64; 2])> + '_ {
    let eps = eps_div.unwrap_or(1e-4);
    move |points: &[[f64; 3]]| -> Vec<(f64, [f64; 2])> {
        let mut graph = ParamGraph::new(ckpt.params.clone());
        match ckpt.spec.heads {
            HeadRole::VanillaPinn | HeadRole::TennSplit => {
                let heads = forward_network(&mut graph, &ckpt.spec, points, 1).expect("forward");
                (0..points.len())
                    .map(|cell| {
                        let ux_row = if ckpt.spec.heads == HeadRole::VanillaPinn { 0 } else { 1 };
                        let ux = graph.jet(heads, ux_row, cell);
                        let uy = graph.jet(heads, ux_row + 1, cell);
                        let omega = uy.grad(AXIS_X) - ux.grad(AXIS_Y);
                        (omega, [ux.value(), uy.value()])
                    })
                    .collect()
            }
            HeadRole::TennPotential => {
                let heads = forward_network(&mut graph, &ckpt.spec, points, 3).expect("forward");
                let nodes = build_tenn_potential(&mut graph, heads, 1.0 / ckpt.config.re, eps)
                    .expect("embedding");
                (0..points.len())
                    .map(|cell| {
                        let ux = graph.jet(nodes.u[0], 0, cell);
                        let uy = graph.jet(nodes.u[1], 0, cell);
                        let omega = uy.grad(AXIS_X) - ux.grad(AXIS_Y);
                        (omega, [ux.value(), uy.value()])
                    })
                    .collect()
            }
        }
    }
}

/// The analytic fields as a predictor (test hook; rel-L2 is identically 0).
pub fn oracle_predictor(re: f64) -> impl FnMut(&[[f64; 3]]) -> Vec<(f64, [f64; 2])> {
    move |points: &[[f64; 3]]| {
        points
            .iter()
            .map(|p| {
                (
                    analytic_vorticity(p[1], p[2], p[0], re).expect("oracle"),
                    analytic_velocity(p[1], p[2], p[0], re).expect("oracle"),
                )
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

/// Heatmap CSV: header `x,y,t,pred,true,abs_err`, one row per cell, times
/// outermost, then rows in y, then x. 17 significant digits.
pub fn export_heatmap_csv(grid: &EvalGrid, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,y,t,pred,true,abs_err")?;
    for (it, &t) in grid.times.iter().enumerate() {
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let i = iy * grid.nx + ix;
                writeln!(
                    f,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    ix as f64 / grid.nx as f64,
                    iy as f64 / grid.ny as f64,
                    t,
                    grid.predicted_omega[it][i],
                    grid.true_omega[it][i],
                    grid.abs_error[it][i],
                )?;
            }
        }
    }
    Ok(())
}

/// Parse a heatmap CSV back into (pred, true, err) slices per time, in file
/// order. Used by round-trip checks and downstream tooling.
pub fn read_heatmap_csv(path: &Path) -> std::io::Result<Vec<(f64, f64, f64, f64, f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 {
            continue;
        }
        let mut parts = line.split(',').map(|s| s.parse::<f64>());
        let mut next = || {
            parts
                .next()
                .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "short row"))?
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        };
        rows.push((next()?, next()?, next()?, next()?, next()?, next()?));
    }
    Ok(rows)
}

/// 8-bit P5 heatmaps per time slice (pred / true / err), min-max normalized
/// per file, with the scales recorded in a sidecar text file. Returns the
/// paths written.
pub fn export_heatmap_pgm(grid: &EvalGrid, dir: &Path, stem: &str) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let sidecar_path = dir.join(format!("{stem}_scales.txt"));
    let mut sidecar = std::io::BufWriter::new(std::fs::File::create(&sidecar_path)?);
    writeln!(sidecar, "file min max degenerate")?;
    for (it, _) in grid.times.iter().enumerate() {
        for (kind, data) in [
            ("pred", &grid.predicted_omega[it]),
            ("true", &grid.true_omega[it]),
            ("err", &grid.abs_error[it]),
        ] {
            let name = format!("{stem}_{kind}_t{it:02}.pgm");
            let path = dir.join(&name);
            let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let degenerate = lo == hi;
            let mut bytes = Vec::with_capacity(data.len());
            for &v in data.iter() {
                let g = if degenerate { 128 } else { ((v - lo) / (hi - lo) * 255.0).round() as u8 };
                bytes.push(g);
            }
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            write!(f, "P5\n{} {}\n255\n", grid.nx, grid.ny)?;
            f.write_all(&bytes)?;
            writeln!(sidecar, "{name} {lo:.16e} {hi:.16e} {}", if degenerate { 1 } else { 0 })?;
            written.push(path);
        }
    }
    written.push(sidecar_path);
    Ok(written)
}

/// Evaluation summary CSV: one row per time plus an `overall` row, with the
/// vorticity and (secondary) velocity relative-L2 columns.
pub fn export_eval_summary(grid: &EvalGrid, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "time,rel_l2_omega,rel_l2_velocity")?;
    for (it, &t) in grid.times.iter().enumerate() {
        writeln!(
            f,
            "{:.6},{:.16e},{:.16e}",
            t, grid.rel_l2_per_time[it], grid.rel_l2_velocity_per_time[it]
        )?;
    }
    writeln!(f, "overall,{:.16e},{:.16e}", grid.rel_l2_overall, grid.rel_l2_velocity_overall)?;
    writeln!(f, "decay_ratio_pred,{:.16e},", grid.decay_ratio_pred)?;
    writeln!(f, "decay_ratio_true,{:.16e},", grid.decay_ratio_true)?;
    Ok(())
}

/// Argmax cell of |error| at a time slice, and whether it falls in the
/// lowest-|omega| quartile of that slice (the error-location property).
pub fn error_location_in_low_vorticity_quartile(grid: &EvalGrid, it: usize) -> (usize, bool) {
    let err = &grid.abs_error[it];
    let tru = &grid.true_omega[it];
    let argmax = err
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut mags: Vec<f64> = tru.iter().map(|w| w.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = mags[mags.len() / 4];
    (argmax, tru[argmax].abs() <= q1)
}

/// Run manifest text: config echo, seed, versions.
pub fn run_manifest(config: &TrainConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("tenn-core version = {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("seed = {}\n", config.seed));
    out.push_str(&format!(
        "config = {}\n",
        serde_json::to_string_pretty(config).unwrap_or_else(|_| "<unserializable>".into())
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_opts() -> VerifyOptions {
        VerifyOptions { networks: 4, points: 60, seed: 1 }
    }

    #[test]
    fn identity_checks_pass_on_small_sweep() {
        let report = verify_identities(&small_opts());
        for c in &report.checks {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn corrupted_levi_civita_fails_lemma1() {
        // fault injection: breaking the antisymmetry must be caught by name
        let bad = |i: usize, j: usize, k: usize| -> i32 {
            if (i, j, k) == (1, 0, 2) {
                1 // should be -1
            } else {
                levi_civita(i, j, k)
            }
        };
        let worst = lemma1_worst_with_table(&bad, &small_opts());
        assert!(worst > 1e-10, "corrupted table must violate lemma 1, got {worst}");
        let ok = lemma1_worst(&small_opts());
        assert!(ok <= 1e-10);
    }

    #[test]
    fn oracle_predictor_gives_zero_error() {
        let grid = GridSpec { nx: 16, ny: 16, times: vec![0.0, 0.5] };
        let mut pred = oracle_predictor(10.0);
        let eval = evaluate_on_grid(&mut pred, &grid, 10.0);
        assert_eq!(eval.rel_l2_overall, 0.0);
        assert_eq!(eval.rel_l2_velocity_overall, 0.0);
        assert!((eval.decay_ratio_pred - eval.decay_ratio_true).abs() < 1e-12);
    }

    #[test]
    fn scaled_prediction_gives_scaling_error() {
        // prediction = 1.04 x truth everywhere -> rel_l2 = 4%
        let grid = GridSpec { nx: 16, ny: 16, times: vec![0.0, 0.25] };
        let mut pred = |points: &[[f64; 3]]| -> Vec<(f64, [f64; 2])> {
            points
                .iter()
                .map(|p| {
                    let w = analytic_vorticity(p[1], p[2], p[0], 10.0).unwrap();
                    let u = analytic_velocity(p[1], p[2], p[0], 10.0).unwrap();
                    (1.04 * w, u)
                })
                .collect()
        };
        let eval = evaluate_on_grid(&mut pred, &grid, 10.0);
        assert!((eval.rel_l2_overall - 0.04).abs() < 1e-12);
        for r in &eval.rel_l2_per_time {
            assert!((r - 0.04).abs() < 1e-12);
        }
        // scale-consistency: scaling both fields leaves rel_l2 unchanged
        // (here truth is fixed, so this is the direct ratio claim)
    }

    #[test]
    fn static_prediction_decay_diagnostics() {
        // static omega(x, y, 0) prediction at Re = 0.1: predicted decay ratio
        // is 1, the true ratio is e^{-80 pi^2} (which underflows to 0)
        let re = 0.1;
        let grid = GridSpec { nx: 16, ny: 16, times: vec![0.0, 1.0] };
        let mut pred = |points: &[[f64; 3]]| -> Vec<(f64, [f64; 2])> {
            points
                .iter()
                .map(|p| {
                    let w = analytic_vorticity(p[1], p[2], 0.0, re).unwrap();
                    let u = analytic_velocity(p[1], p[2], 0.0, re).unwrap();
                    (w, u)
                })
                .collect()
        };
        let eval = evaluate_on_grid(&mut pred, &grid, re);
        assert!((eval.decay_ratio_pred - 1.0).abs() < 1e-12);
        assert!(eval.decay_ratio_true < 1e-100);
        assert!(!eval.rel_l2_per_time[1].is_nan());
    }

    #[test]
    fn csv_round_trip() {
        let grid = GridSpec { nx: 8, ny: 4, times: vec![0.0, 0.5, 1.0] };
        let mut pred = oracle_predictor(7.0);
        let eval = evaluate_on_grid(&mut pred, &grid, 7.0);
        let dir = std::env::temp_dir().join(format!("tenn-report-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("heatmap.csv");
        export_heatmap_csv(&eval, &path).unwrap();
        let rows = read_heatmap_csv(&path).unwrap();
        assert_eq!(rows.len(), 8 * 4 * 3);
        for (it, &t) in eval.times.iter().enumerate() {
            for iy in 0..4 {
                for ix in 0..8 {
                    let row = rows[it * 32 + iy * 8 + ix];
                    assert_eq!(row.0, ix as f64 / 8.0);
                    assert_eq!(row.1, iy as f64 / 4.0);
                    assert_eq!(row.2, t);
                    let i = iy * 8 + ix;
                    assert!((row.3 - eval.predicted_omega[it][i]).abs() <= 1e-12);
                    assert!((row.4 - eval.true_omega[it][i]).abs() <= 1e-12);
                }
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn pgm_export_format() {
        let grid = GridSpec { nx: 64, ny: 64, times: vec![0.0] };
        let mut pred = oracle_predictor(5.0);
        let eval = evaluate_on_grid(&mut pred, &grid, 5.0);
        let dir = std::env::temp_dir().join(format!("tenn-pgm-{}", std::process::id()));
        let files = export_heatmap_pgm(&eval, &dir, "tg").unwrap();
        // pred/true/err + sidecar
        assert_eq!(files.len(), 4);
        let bytes = std::fs::read(&files[0]).unwrap();
        let header = b"P5\n64 64\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 64 * 64);

        // degenerate slice: the error of the oracle against itself is zero
        let sidecar = std::fs::read_to_string(files.last().unwrap()).unwrap();
        let err_line = sidecar.lines().find(|l| l.contains("_err_")).unwrap();
        assert!(err_line.trim_end().ends_with(" 1"), "degenerate flag: {err_line}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn error_location_helper() {
        let grid = GridSpec { nx: 16, ny: 16, times: vec![0.5] };
        // prediction = truth except one corrupted cell placed on a low-|omega|
        // line (x = 0.25)
        let mut pred = |points: &[[f64; 3]]| -> Vec<(f64, [f64; 2])> {
            points
                .iter()
                .map(|p| {
                    let mut w = analytic_vorticity(p[1], p[2], p[0], 10.0).unwrap();
                    if (p[1] - 0.25).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12 {
                        w += 3.0;
                    }
                    (w, analytic_velocity(p[1], p[2], p[0], 10.0).unwrap())
                })
                .collect()
        };
        let eval = evaluate_on_grid(&mut pred, &grid, 10.0);
        let (argmax, in_quartile) = error_location_in_low_vorticity_quartile(&eval, 0);
        assert_eq!(argmax, 8 * 16 + 4); // iy = 8 (y = 0.5), ix = 4 (x = 0.25)
        assert!(in_quartile);
    }
}
