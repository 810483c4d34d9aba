//! Experiment orchestration: resolve a validated run description into the
//! graph → tree → certificate pipeline, draw reproducible initial conditions,
//! execute the hybrid run, and write the result file set.
//!
//! Output directory layout (every float printed as `{:.16e}` so round-trips
//! are exact to the bit; every file uses LF line endings):
//!
//! | file                  | contents                                           |
//! |-----------------------|----------------------------------------------------|
//! | `trace.csv`           | one row per step: `t, mu, phase, V, norm_x_e,      |
//! |                       | norm_v_e, norm_omega`, then per-edge relative       |
//! |                       | positions `xe_k_d` and velocities `ve_k_d`          |
//! |                       | (edge `k`, component `d`, both 1-based)             |
//! | `positions.csv`       | node positions `x_i_d` on the coarse grid           |
//! | `velocities.csv`      | node velocities `v_i_d` on the coarse grid          |
//! | `edge_positions.csv`  | `x_e` on the coarse grid (plot-sized)               |
//! | `edge_velocities.csv` | `v_e` on the coarse grid                            |
//! | `zoom.csv`            | one row per zoom event: `t, event, mu, k`           |
//! | `summary.txt`         | run verdict, invariant checks, certificate numbers  |
//! | `config.cfg`          | the resolved configuration in canonical form        |
//!
//! Runs are deterministic: the initial state is drawn from a ChaCha8 stream
//! keyed by the config seed, and the integrator itself is exact for held
//! inputs, so two runs of the same config produce byte-identical files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{print_config, RunConfig, SigmaChoice};
use crate::error::Result;
use crate::graph::{
    build_matrices, decompose, decompose_with_tree, DirectedGraph, GraphMatrices,
    TreeDecomposition,
};
use crate::quantizer::{bit_budget, QuantizerConfig};
use crate::sim::{run, RunOutcome, SimInputs, SimTrace};
use crate::stability::{build_certificate, sigma_floor, solve_lyapunov, StabilityCertificate};

/// Factor applied to the σ floor when the config asks for `sigma = auto`.
/// Large σ inflates the quantizer-noise gain Θ and slows the certified decay
/// rate, so the automatic choice stays just above the floor.
const AUTO_SIGMA_MARGIN: f64 = 1.05;

/// Coarse-grid stride for the node and edge plot files.
const COARSE_EVERY: usize = 10;

/// Everything derived from a config before any dynamics run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub graph: DirectedGraph,
    pub matrices: GraphMatrices,
    pub decomposition: TreeDecomposition,
    pub certificate: StabilityCertificate,
}

/// A finished run plus the rendered artifacts.
#[derive(Debug)]
pub struct ExperimentResult {
    pub pipeline: Pipeline,
    pub outcome: RunOutcome,
    pub summary_text: String,
    pub out_dir: PathBuf,
    pub wall_clock_s: f64,
}

/// Builds graph matrices, the spanning-tree reduction, and the stability
/// certificate for a config, resolving `sigma = auto` to 5% above the floor.
pub fn build_pipeline(cfg: &RunConfig) -> Result<Pipeline> {
    let graph = DirectedGraph::new(cfg.nodes, &cfg.edges)?;
    let matrices = build_matrices(&graph);
    let decomposition = match &cfg.tree_edges {
        Some(ids) => {
            let zero_based: Vec<usize> = ids.iter().map(|&k| k - 1).collect();
            decompose_with_tree(&graph, &matrices, &zero_based)?
        }
        None => decompose(&graph, &matrices)?,
    };
    let quantizer = QuantizerConfig::new(cfg.delta, cfg.range_m)?;
    let sigma = match cfg.sigma {
        SigmaChoice::Fixed(s) => s,
        SigmaChoice::Auto => {
            let h = solve_lyapunov(&decomposition.l_hat_e)?;
            sigma_floor(&h)? * AUTO_SIGMA_MARGIN
        }
    };
    let certificate = build_certificate(&decomposition, sigma, cfg.epsilon, quantizer, cfg.n)?;
    Ok(Pipeline {
        graph,
        matrices,
        decomposition,
        certificate,
    })
}

/// Deterministic initial condition for a seed: all positions first, uniform
/// in [-5, 5], then all velocities, uniform in [-1, 1], drawn in index order
/// (node-major, component-minor) from a ChaCha8 stream so every platform
/// reproduces the same run.
pub fn seeded_initial_state(
    node_count: usize,
    n: usize,
    seed: u64,
) -> (DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DVector::from_fn(node_count * n, |_, _| rng.gen_range(-5.0..=5.0));
    let v = DVector::from_fn(node_count * n, |_, _| rng.gen_range(-1.0..=1.0));
    (x, v)
}

/// Runs the experiment a config describes and writes the full file set into
/// `cfg.out_dir`. A divergence abort still returns `Ok` — the truncated trace
/// and the abort record are part of the result — so the caller decides the
/// process exit separately.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    let pipeline = build_pipeline(cfg)?;
    let (x0, v0) = seeded_initial_state(cfg.nodes, cfg.n, cfg.seed);
    let inputs = SimInputs {
        graph: &pipeline.graph,
        matrices: &pipeline.matrices,
        decomposition: &pipeline.decomposition,
        certificate: &pipeline.certificate,
        x0,
        v0,
        mu0: cfg.mu0,
        tau: cfg.tau,
        gamma_out: cfg.gamma_out,
        dt: cfg.dt,
        horizon: cfg.horizon,
        kappa: cfg.kappa,
        floor: cfg.floor,
        full_every: COARSE_EVERY,
    };
    let started = Instant::now();
    let outcome = run(&inputs)?;
    let wall_clock_s = started.elapsed().as_secs_f64();
    let summary_text = render_summary(&pipeline.certificate, &outcome, wall_clock_s);

    let out_dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&out_dir)?;
    let l = pipeline.graph.edge_count();
    let n = cfg.n;
    write_trace_csv(&out_dir.join("trace.csv"), &outcome.trace, l, n)?;
    write_node_csv(
        &out_dir.join("positions.csv"),
        &outcome.trace,
        n,
        Column::Position,
    )?;
    write_node_csv(
        &out_dir.join("velocities.csv"),
        &outcome.trace,
        n,
        Column::Velocity,
    )?;
    write_edge_csv(
        &out_dir.join("edge_positions.csv"),
        &outcome.trace,
        l,
        n,
        Column::Position,
    )?;
    write_edge_csv(
        &out_dir.join("edge_velocities.csv"),
        &outcome.trace,
        l,
        n,
        Column::Velocity,
    )?;
    write_zoom_csv(&out_dir.join("zoom.csv"), &outcome.trace, initial_mu(cfg))?;
    fs::write(out_dir.join("summary.txt"), &summary_text)?;
    fs::write(out_dir.join("config.cfg"), print_config(cfg))?;
    Ok(ExperimentResult {
        pipeline,
        outcome,
        summary_text,
        out_dir,
        wall_clock_s,
    })
}

/// Builds the pipeline only and renders the certificate block, plus whether
/// the zoom protocol is feasible under it.
pub fn certificate_report(cfg: &RunConfig) -> Result<(String, bool)> {
    let pipeline = build_pipeline(cfg)?;
    let cert = &pipeline.certificate;
    let mut text = String::from("[certificate]\n");
    text.push_str(&render_certificate(cert));
    Ok((text, cert.feasible()))
}

fn initial_mu(cfg: &RunConfig) -> f64 {
    cfg.mu0.unwrap_or(1.0)
}

/// `{:.16e}` keeps 17 significant digits: enough to reproduce any f64 exactly.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_else(|| "none".into())
}

/// Row-major nested-list rendering, e.g. `[[a, b], [c, d]]`.
fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = (0..m.ncols()).map(|j| fmt(m[(i, j)])).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn render_summary(cert: &StabilityCertificate, out: &RunOutcome, wall_clock_s: f64) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let status = if out.aborted.is_some() {
        "aborted"
    } else if out.converged_at.is_some() {
        "converged"
    } else {
        "horizon_exhausted"
    };
    let _ = writeln!(s, "status = {status}");
    if let Some(info) = &out.aborted {
        let _ = writeln!(s, "aborted_at = {}", fmt(info.t));
        let _ = writeln!(s, "aborted_reason = {}", info.detail);
    }
    let _ = writeln!(s, "t_detect = {}", fmt_opt(out.t_detect));
    let _ = writeln!(s, "t_zoom_in_start = {}", fmt_opt(out.t_zoom_in_start));
    let _ = writeln!(s, "zoom_in_intervals = {}", out.zoom_in_intervals);
    let _ = writeln!(s, "converged_at = {}", fmt_opt(out.converged_at));
    let _ = writeln!(s, "final_norm_x_e = {}", fmt(out.final_norm_x_e));
    let _ = writeln!(s, "final_norm_v_e = {}", fmt(out.final_norm_v_e));
    let _ = writeln!(s, "final_mu = {}", fmt(out.final_mu));
    let _ = writeln!(s, "samples = {}", out.trace.samples.len());
    let _ = writeln!(s, "wall_clock_s = {}", fmt(wall_clock_s));
    for (name, pass) in out.checks.rows() {
        let _ = writeln!(s, "check.{name} = {}", if pass { "pass" } else { "fail" });
    }
    let _ = writeln!(s, "defect_mean = {}", fmt(out.defect_mean));
    let _ = writeln!(s, "defect_max = {}", fmt(out.defect_max));
    let _ = writeln!(s, "defect_samples = {}", out.defect_samples);
    let _ = writeln!(s, "decay_samples = {}", out.decay_samples);
    let _ = writeln!(s, "decay_violations = {}", out.decay_violations);
    let _ = writeln!(s);
    let _ = writeln!(s, "[certificate]");
    s.push_str(&render_certificate(cert));
    s
}

fn render_certificate(cert: &StabilityCertificate) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "sigma = {}", fmt(cert.sigma));
    let _ = writeln!(s, "sigma_floor = {}", fmt(cert.sigma_floor));
    let _ = writeln!(s, "epsilon = {}", fmt(cert.epsilon));
    let _ = writeln!(s, "n = {}", cert.n);
    let _ = writeln!(s, "edge_count = {}", cert.edge_count);
    let _ = writeln!(s, "delta = {}", fmt(cert.quantizer.delta()));
    let _ = writeln!(s, "range = {}", fmt(cert.quantizer.range_m()));
    let _ = writeln!(s, "lambda_min_p = {}", fmt(cert.lambda_min_p));
    let _ = writeln!(s, "lambda_max_p = {}", fmt(cert.lambda_max_p));
    let _ = writeln!(s, "lambda_min_q = {}", fmt(cert.lambda_min_q));
    let _ = writeln!(s, "lambda_max_q = {}", fmt(cert.lambda_max_q));
    let _ = writeln!(s, "norm_p_lt1 = {}", fmt(cert.norm_p_lt1));
    let _ = writeln!(s, "theta_const = {}", fmt(cert.theta_const));
    let _ = writeln!(s, "alpha_rate = {}", fmt(cert.alpha_rate));
    let _ = writeln!(s, "dwell_t = {}", fmt(cert.dwell_t));
    let _ = writeln!(s, "omega_factor = {}", fmt(cert.omega_factor));
    let _ = writeln!(s, "shrink = {}", fmt(cert.shrink));
    let _ = writeln!(s, "cond1_ok = {}", cert.cond1_ok);
    let _ = writeln!(s, "feasible = {}", cert.feasible());
    let _ = writeln!(s, "condition = {}", cert.condition_detail());
    match bit_budget(&cert.quantizer) {
        Ok(b) => {
            let _ = writeln!(s, "levels = {}", b.levels);
            let _ = writeln!(s, "bits = {}", b.bits);
            let _ = writeln!(s, "state_unit_cells = {}", b.state_unit_cells);
            let _ = writeln!(s, "state_unit_bits = {}", b.state_unit_bits);
        }
        Err(_) => {
            let _ = writeln!(
                s,
                "channel_budget = not applicable (range is not an integer level count)"
            );
        }
    }
    let _ = writeln!(s, "h = {}", fmt_matrix(&cert.h));
    let _ = writeln!(s, "p = {}", fmt_matrix(&cert.p));
    let _ = writeln!(s, "q = {}", fmt_matrix(&cert.q));
    s
}

#[derive(Clone, Copy)]
enum Column {
    Position,
    Velocity,
}

fn write_trace_csv(path: &Path, trace: &SimTrace, l: usize, n: usize) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let mut header = String::from("t,mu,phase,V,norm_x_e,norm_v_e,norm_omega");
    for k in 1..=l {
        for d in 1..=n {
            header.push_str(&format!(",xe_{k}_{d}"));
        }
    }
    for k in 1..=l {
        for d in 1..=n {
            header.push_str(&format!(",ve_{k}_{d}"));
        }
    }
    writeln!(w, "{header}")?;
    for smp in &trace.samples {
        write!(
            w,
            "{},{},{},{},{},{},{}",
            fmt(smp.t),
            fmt(smp.mu),
            smp.phase.name(),
            fmt(smp.v_lyap),
            fmt(smp.norm_x_e),
            fmt(smp.norm_v_e),
            fmt(smp.norm_omega)
        )?;
        for val in smp.x_e.iter() {
            write!(w, ",{}", fmt(*val))?;
        }
        for val in smp.v_e.iter() {
            write!(w, ",{}", fmt(*val))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_node_csv(path: &Path, trace: &SimTrace, n: usize, which: Column) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let prefix = match which {
        Column::Position => "x",
        Column::Velocity => "v",
    };
    let node_count = trace
        .node_samples
        .first()
        .map(|smp| smp.x.len() / n)
        .unwrap_or(0);
    let mut header = String::from("t");
    for i in 1..=node_count {
        for d in 1..=n {
            header.push_str(&format!(",{prefix}_{i}_{d}"));
        }
    }
    writeln!(w, "{header}")?;
    for smp in &trace.node_samples {
        write!(w, "{}", fmt(smp.t))?;
        let values = match which {
            Column::Position => &smp.x,
            Column::Velocity => &smp.v,
        };
        for val in values.iter() {
            write!(w, ",{}", fmt(*val))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_edge_csv(path: &Path, trace: &SimTrace, l: usize, n: usize, which: Column) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let prefix = match which {
        Column::Position => "xe",
        Column::Velocity => "ve",
    };
    let mut header = String::from("t");
    for k in 1..=l {
        for d in 1..=n {
            header.push_str(&format!(",{prefix}_{k}_{d}"));
        }
    }
    writeln!(w, "{header}")?;
    let last = trace.samples.len().saturating_sub(1);
    for (i, smp) in trace.samples.iter().enumerate() {
        if i % COARSE_EVERY != 0 && i != last {
            continue;
        }
        write!(w, "{}", fmt(smp.t))?;
        let values = match which {
            Column::Position => &smp.x_e,
            Column::Velocity => &smp.v_e,
        };
        for val in values.iter() {
            write!(w, ",{}", fmt(*val))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_zoom_csv(path: &Path, trace: &SimTrace, mu_start: f64) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,event,mu,k")?;
    writeln!(w, "{},start,{},0", fmt(0.0), fmt(mu_start))?;
    for ev in &trace.events {
        writeln!(w, "{},{},{},{}", fmt(ev.t), ev.kind.label(), fmt(ev.mu), ev.k)?;
    }
    w.flush()?;
    Ok(())
}
