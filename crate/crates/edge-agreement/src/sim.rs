//! Hybrid closed-loop simulator: N double integrators in ℝⁿ coupled through
//! quantized relative measurements, with the zoom variable μ driven by the
//! two-phase schedule.
//!
//! Dynamics per agent: `ẋ_i = v_i`, `v̇_i = u_i` with the quantized protocol
//!
//! ```text
//!   u = −σ²·(E_in_w⊗I_n)·q_μ((Eᵀ⊗I_n)x) − σ³·(E_in_w⊗I_n)·q_μ((Eᵀ⊗I_n)v)
//! ```
//!
//! equivalently `u_i = σ²·Σ_j a_ij·q_μ(x_j − x_i) + σ³·Σ_j a_ij·q_μ(v_j − v_i)`
//! over in-neighbors; both assembly paths are implemented and cross-checked.
//!
//! Time stepping is sample-and-hold: the quantized values (hence `u`) are
//! frozen at each step start — digital-channel semantics — and the plant is
//! advanced one fixed step. For a double integrator with held input the
//! fourth-order Runge–Kutta stages collapse exactly to
//!
//! ```text
//!   x⁺ = x + dt·v + dt²/2·u,    v⁺ = v + dt·u
//! ```
//!
//! which is also the exact flow of the held-input system, so the only
//! integration error in the closed loop is the O(dt²) sample-and-hold defect
//! of the quantizer inputs (measured and reported per run).
//!
//! Schedule semantics ([`run`]):
//!
//! * **Zoom-out** (skipped when `mu0` is supplied): `u = 0`, μ starts at 1,
//!   and at every tick instant `t = j·τ` (including `t = 0`) the quantized
//!   norm `|q_μ(z_T)|` is tested first; on success the zoom-in phase starts
//!   with μ unchanged, otherwise μ ← γ_out·μ.
//! * **Zoom-in**: the protocol is active; every dwell interval the state is
//!   checked against R2(μ) and μ contracts by Ω, which lands the state in
//!   R1(Ω·μ) — the invariance chain. μ follows the exact staircase
//!   `μ_anchor·Ω^k`.
//! * **Convergence** is declared (and the run stops) when both `‖x_e‖` and
//!   `‖v_e‖` fall below `max(κ·μ·Δ, floor)`. The quantizer's half-cell offset
//!   keeps exciting the loop at scale μΔ, so exact equilibrium is never
//!   reached; μ → 0 is what drives the edge states to zero.
//!
//! All per-step invariant checks (edge consistency, quantization error
//! bound, μ monotonicity and staircase exactness, ellipsoid membership at
//! dwell boundaries, Lyapunov decay rate in the R2–R1 band) are accumulated
//! in [`RunChecks`] and reported in the [`RunOutcome`].

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, GraphMatrices, TreeDecomposition};
use crate::linalg::kron_apply;
use crate::quantizer::{
    in_range_detect, quantize_scalar, quantize_vector, zoom_step, QuantizerConfig, ZoomEvent,
    ZoomPhase, ZoomState,
};
use crate::stability::StabilityCertificate;

/// Stacked plant state: positions and velocities in ℝ^{nN} plus time.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    /// Seconds since the start of the run.
    pub t: f64,
}

/// Edge-coordinate view of one plant state at one zoom level.
#[derive(Debug, Clone)]
pub struct EdgeView {
    /// x_e = (Eᵀ⊗I_n)·x, edge-relative positions in original edge order.
    pub x_e: DVector<f64>,
    /// v_e = (Eᵀ⊗I_n)·v.
    pub v_e: DVector<f64>,
    /// Tree-edge position block (tree order).
    pub x_t: DVector<f64>,
    /// Tree-edge velocity block.
    pub v_t: DVector<f64>,
    /// Co-tree position block (co-tree order).
    pub x_c: DVector<f64>,
    /// Co-tree velocity block.
    pub v_c: DVector<f64>,
    /// z = [x_e; v_e].
    pub z: DVector<f64>,
    /// Reduced state z_T = [x_T; v_T].
    pub z_t: DVector<f64>,
    /// Quantization errors e_xe = q_μ(x_e) − x_e.
    pub e_xe: DVector<f64>,
    /// Quantization errors e_ve = q_μ(v_e) − v_e.
    pub e_ve: DVector<f64>,
    /// ω = [e_xe; e_ve], the reduced model's input.
    pub omega: DVector<f64>,
}

/// Computes the edge/tree/co-tree coordinates of `state` together with the
/// quantization errors at zoom level `mu`. The co-tree reconstruction
/// identity `x_C = (Tᵀ⊗I_n)·x_T` and the in-range error bound
/// `‖ω‖ ≤ √(2nL)·μΔ` are verified when debug assertions are enabled.
pub fn edge_views(
    state: &AgentState,
    m: &GraphMatrices,
    d: &TreeDecomposition,
    cfg: &QuantizerConfig,
    mu: f64,
    n: usize,
) -> Result<EdgeView> {
    let l = m.incidence.ncols();
    if state.x.len() != m.incidence.nrows() * n || state.v.len() != state.x.len() {
        return Err(Error::Dimension(format!(
            "state has {} positions for {} nodes of dimension {}",
            state.x.len(),
            m.incidence.nrows(),
            n
        )));
    }
    let e_t = m.incidence.transpose();
    let x_e = kron_apply(&e_t, &state.x, n);
    let v_e = kron_apply(&e_t, &state.v, n);

    let gather = |src: &DVector<f64>, idx: &[usize]| -> DVector<f64> {
        let mut out = DVector::zeros(idx.len() * n);
        for (b, &k) in idx.iter().enumerate() {
            out.rows_mut(b * n, n).copy_from(&src.rows(k * n, n));
        }
        out
    };
    let x_t = gather(&x_e, &d.tree_edges);
    let v_t = gather(&v_e, &d.tree_edges);
    let x_c = gather(&x_e, &d.cotree_edges);
    let v_c = gather(&v_e, &d.cotree_edges);

    #[cfg(debug_assertions)]
    {
        let x_c_rec = kron_apply(&d.t_matrix.transpose(), &x_t, n);
        let scale = 1.0 + x_e.norm();
        debug_assert!(
            (&x_c_rec - &x_c).norm() <= 1e-8 * scale,
            "co-tree reconstruction from tree states failed"
        );
    }

    let mut z = DVector::zeros(2 * l * n);
    z.rows_mut(0, l * n).copy_from(&x_e);
    z.rows_mut(l * n, l * n).copy_from(&v_e);
    let tree_len = d.tree_edges.len() * n;
    let mut z_t = DVector::zeros(2 * tree_len);
    z_t.rows_mut(0, tree_len).copy_from(&x_t);
    z_t.rows_mut(tree_len, tree_len).copy_from(&v_t);

    let e_xe = quantize_vector(&x_e, cfg, mu)? - &x_e;
    let e_ve = quantize_vector(&v_e, cfg, mu)? - &v_e;
    let mut omega = DVector::zeros(2 * l * n);
    omega.rows_mut(0, l * n).copy_from(&e_xe);
    omega.rows_mut(l * n, l * n).copy_from(&e_ve);

    #[cfg(debug_assertions)]
    {
        let range = mu * cfg.range_m();
        if x_e.amax() <= range && v_e.amax() <= range {
            let bound = (2.0 * n as f64 * l as f64).sqrt() * mu * cfg.delta();
            debug_assert!(
                omega.norm() <= bound * (1.0 + 1e-12),
                "quantization error bound violated in range"
            );
        }
    }

    Ok(EdgeView {
        x_e,
        v_e,
        x_t,
        v_t,
        x_c,
        v_c,
        z,
        z_t,
        e_xe,
        e_ve,
        omega,
    })
}

/// Stacked-form control: `u = −σ²·(E_in_w⊗I_n)·q_μ(x_e) − σ³·(E_in_w⊗I_n)·q_μ(v_e)`.
pub fn control_input(
    x: &DVector<f64>,
    v: &DVector<f64>,
    m: &GraphMatrices,
    cfg: &QuantizerConfig,
    mu: f64,
    sigma: f64,
    n: usize,
) -> Result<DVector<f64>> {
    if x.len() != m.incidence.nrows() * n || v.len() != x.len() {
        return Err(Error::Dimension(format!(
            "control input needs {} states, got {} positions / {} velocities",
            m.incidence.nrows() * n,
            x.len(),
            v.len()
        )));
    }
    let e_t = m.incidence.transpose();
    let q_xe = quantize_vector(&kron_apply(&e_t, x, n), cfg, mu)?;
    let q_ve = quantize_vector(&kron_apply(&e_t, v, n), cfg, mu)?;
    let s2 = sigma * sigma;
    let s3 = s2 * sigma;
    Ok(kron_apply(&m.weighted_in_incidence, &q_xe, n) * (-s2)
        + kron_apply(&m.weighted_in_incidence, &q_ve, n) * (-s3))
}

/// Neighbor-sum form of the same control law:
/// `u_i = σ²·Σ_{k: head(k)=i} w_k·q_μ(x_tail(k) − x_i) + σ³·(…velocities…)`.
/// Used as an independent cross-check of [`control_input`].
pub fn control_input_neighbor_sum(
    x: &DVector<f64>,
    v: &DVector<f64>,
    g: &DirectedGraph,
    cfg: &QuantizerConfig,
    mu: f64,
    sigma: f64,
    n: usize,
) -> Result<DVector<f64>> {
    if x.len() != g.node_count() * n || v.len() != x.len() {
        return Err(Error::Dimension(format!(
            "control input needs {} states, got {} positions / {} velocities",
            g.node_count() * n,
            x.len(),
            v.len()
        )));
    }
    let s2 = sigma * sigma;
    let s3 = s2 * sigma;
    let mut u = DVector::zeros(x.len());
    for e in g.edges() {
        // Node ids are 1-based; state vectors are indexed from 0.
        let (tail, head, w) = (e.tail - 1, e.head - 1, e.weight);
        for dim in 0..n {
            let dx = x[tail * n + dim] - x[head * n + dim];
            let dv = v[tail * n + dim] - v[head * n + dim];
            u[head * n + dim] +=
                s2 * w * quantize_scalar(dx, cfg, mu)? + s3 * w * quantize_scalar(dv, cfg, mu)?;
        }
    }
    Ok(u)
}

/// One fixed step of `ẋ = v`, `v̇ = u` with `u` held constant: the exact
/// held-input flow (equal to the collapsed RK4 stages, see module docs).
pub fn step(state: &AgentState, u: &DVector<f64>, dt: f64) -> Result<AgentState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Dimension(format!("step size must be > 0, got {dt}")));
    }
    if u.len() != state.v.len() {
        return Err(Error::Dimension(format!(
            "control has {} entries for {} velocity states",
            u.len(),
            state.v.len()
        )));
    }
    let x = &state.x + &state.v * dt + u * (dt * dt / 2.0);
    let v = &state.v + u * dt;
    let t = state.t + dt;
    if x.iter().chain(v.iter()).any(|a| !a.is_finite()) {
        return Err(Error::Divergence {
            t,
            detail: "non-finite state after integration step".into(),
        });
    }
    Ok(AgentState { x, v, t })
}

/// Everything a deterministic run needs; borrowed pieces are built once by
/// the caller (graph → matrices → decomposition → certificate).
#[derive(Debug, Clone)]
pub struct SimInputs<'a> {
    pub graph: &'a DirectedGraph,
    pub matrices: &'a GraphMatrices,
    pub decomposition: &'a TreeDecomposition,
    pub certificate: &'a StabilityCertificate,
    /// Initial positions, length `node_count · n`.
    pub x0: DVector<f64>,
    /// Initial velocities, same length.
    pub v0: DVector<f64>,
    /// `Some(μ0)`: skip zoom-out, verify the initial state lies in R1(μ0)
    /// and start contracting from μ0. `None`: full zoom-out from μ = 1.
    pub mu0: Option<f64>,
    /// Zoom-out tick interval (seconds).
    pub tau: f64,
    /// Zoom-out growth factor (> 1).
    pub gamma_out: f64,
    /// Integration step (seconds).
    pub dt: f64,
    /// Run horizon (seconds).
    pub horizon: f64,
    /// Convergence threshold multiplier: declare at `‖·‖ ≤ max(κ·μ·Δ, floor)`.
    pub kappa: f64,
    /// Absolute convergence floor.
    pub floor: f64,
    /// Record node positions/velocities every this many steps (0 = only the
    /// final state).
    pub full_every: usize,
}

/// One per-step trace record.
#[derive(Debug, Clone)]
pub struct SimSample {
    pub t: f64,
    pub mu: f64,
    pub phase: ZoomPhase,
    /// V(z_T) under the certificate's quadratic form.
    pub v_lyap: f64,
    pub norm_x_e: f64,
    pub norm_v_e: f64,
    pub norm_omega: f64,
    pub x_e: DVector<f64>,
    pub v_e: DVector<f64>,
}

/// Subsampled node-state record (for plot data).
#[derive(Debug, Clone)]
pub struct NodeSample {
    pub t: f64,
    pub x: DVector<f64>,
    pub v: DVector<f64>,
}

/// What happened at a zoom-schedule instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoomEventKind {
    /// Zoom-out growth tick (detection did not fire).
    ZoomOutTick,
    /// The quantized capture test fired; zoom-in begins.
    Detection,
    /// Zoom-in dwell boundary; μ contracted by Ω.
    ZoomInBoundary,
    /// Convergence threshold reached; run stops.
    Converged,
}

impl ZoomEventKind {
    pub fn label(&self) -> &'static str {
        match self {
            ZoomEventKind::ZoomOutTick => "zoom_out_tick",
            ZoomEventKind::Detection => "detection",
            ZoomEventKind::ZoomInBoundary => "zoom_in_boundary",
            ZoomEventKind::Converged => "converged",
        }
    }
}

/// A zoom event with the state of μ *after* the event.
#[derive(Debug, Clone, Copy)]
pub struct ZoomEventRecord {
    pub t: f64,
    pub kind: ZoomEventKind,
    pub mu: f64,
    /// Tick counter within the current phase, after the event.
    pub k: u32,
}

/// Complete time-indexed record of one run.
#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub samples: Vec<SimSample>,
    pub node_samples: Vec<NodeSample>,
    pub events: Vec<ZoomEventRecord>,
}

/// Pass/fail of every invariant watched during a run. All default to `true`
/// and latch `false` on the first violation; vacuous checks stay `true`.
#[derive(Debug, Clone, Copy)]
pub struct RunChecks {
    /// x_e recomputed from node states matches the stored value bit-for-bit.
    pub edge_consistency: bool,
    /// ‖ω‖ ≤ √(2nL)·μΔ at every in-range step.
    pub quant_error_bound: bool,
    /// μ strictly grows on zoom-out ticks and strictly shrinks on zoom-in
    /// boundaries.
    pub zoom_monotone: bool,
    /// μ equals `anchor·Ω^k` bit-for-bit at every zoom-in boundary.
    pub mu_staircase: bool,
    /// z_T ∈ R2(μ) at the end of every dwell interval.
    pub r2_at_boundaries: bool,
    /// z_T ∈ R1(μ′) right after each contraction μ′ = Ω·μ.
    pub invariance_chain: bool,
    /// ΔV/Δt ≤ −α_rate·V within 5% slack while V sits between R2 and R1.
    pub decay_rate: bool,
    /// No non-finite state was ever produced.
    pub finite_state: bool,
}

impl Default for RunChecks {
    fn default() -> Self {
        RunChecks {
            edge_consistency: true,
            quant_error_bound: true,
            zoom_monotone: true,
            mu_staircase: true,
            r2_at_boundaries: true,
            invariance_chain: true,
            decay_rate: true,
            finite_state: true,
        }
    }
}

impl RunChecks {
    pub fn all(&self) -> bool {
        self.failures().is_empty()
    }

    /// Names of the checks that failed, for reporting.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut push = |ok: bool, name: &'static str| {
            if !ok {
                out.push(name);
            }
        };
        push(self.edge_consistency, "edge_consistency");
        push(self.quant_error_bound, "quant_error_bound");
        push(self.zoom_monotone, "zoom_monotone");
        push(self.mu_staircase, "mu_staircase");
        push(self.r2_at_boundaries, "r2_at_boundaries");
        push(self.invariance_chain, "invariance_chain");
        push(self.decay_rate, "decay_rate");
        push(self.finite_state, "finite_state");
        out
    }

    /// (name, pass) pairs in fixed order, for the summary document.
    pub fn rows(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("edge_consistency", self.edge_consistency),
            ("quant_error_bound", self.quant_error_bound),
            ("zoom_monotone", self.zoom_monotone),
            ("mu_staircase", self.mu_staircase),
            ("r2_at_boundaries", self.r2_at_boundaries),
            ("invariance_chain", self.invariance_chain),
            ("decay_rate", self.decay_rate),
            ("finite_state", self.finite_state),
        ]
    }
}

/// Where and why a run aborted.
#[derive(Debug, Clone)]
pub struct DivergenceInfo {
    pub t: f64,
    pub detail: String,
}

/// Trace plus run-level measurements and invariant results.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: SimTrace,
    pub checks: RunChecks,
    /// When zoom-in began (0 on the skip-zoom-out path).
    pub t_zoom_in_start: Option<f64>,
    /// Detection instant, when the zoom-out phase actually ran.
    pub t_detect: Option<f64>,
    /// Dwell boundaries executed.
    pub zoom_in_intervals: u32,
    pub converged_at: Option<f64>,
    pub final_norm_x_e: f64,
    pub final_norm_v_e: f64,
    pub final_mu: f64,
    /// Mean one-step defect ‖z_T(t+dt) − z_T(t) − dt·ż_T(t)‖ of the reduced
    /// model during zoom-in (O(dt²); halving dt quarters it).
    pub defect_mean: f64,
    pub defect_max: f64,
    pub defect_samples: usize,
    /// Step pairs that sat in the R2–R1 band (decay-rate check population).
    pub decay_samples: usize,
    pub decay_violations: usize,
    /// Set when the run aborted on a non-finite state; the trace holds the
    /// prefix up to and including the offending instant.
    pub aborted: Option<DivergenceInfo>,
}

fn validate_inputs(inp: &SimInputs) -> Result<()> {
    let mut errors = Vec::new();
    let n = inp.certificate.n;
    let want = inp.graph.node_count() * n;
    if inp.x0.len() != want || inp.v0.len() != want {
        errors.push(format!(
            "initial state needs {want} entries ({} nodes × n = {n}), got {} positions / {} velocities",
            inp.graph.node_count(),
            inp.x0.len(),
            inp.v0.len()
        ));
    }
    if inp.x0.iter().chain(inp.v0.iter()).any(|a| !a.is_finite()) {
        errors.push("initial state contains non-finite entries".into());
    }
    if !(inp.dt > 0.0) || !inp.dt.is_finite() {
        errors.push(format!("dt must be > 0, got {}", inp.dt));
    } else {
        if !(inp.horizon >= inp.dt) || !inp.horizon.is_finite() {
            errors.push(format!(
                "horizon must cover at least one step of {}, got {}",
                inp.dt, inp.horizon
            ));
        }
        if inp.mu0.is_none() && (inp.tau / inp.dt).round() < 1.0 {
            errors.push(format!(
                "zoom-out tick interval {} is shorter than one step of {}",
                inp.tau, inp.dt
            ));
        }
    }
    if inp.mu0.is_none() {
        if !(inp.tau > 0.0) || !inp.tau.is_finite() {
            errors.push(format!("tau must be > 0, got {}", inp.tau));
        }
        if !(inp.gamma_out > 1.0) || !inp.gamma_out.is_finite() {
            errors.push(format!("gamma_out must be > 1, got {}", inp.gamma_out));
        }
    }
    if let Some(mu0) = inp.mu0 {
        if !(mu0 > 0.0) || !mu0.is_finite() {
            errors.push(format!("mu0 must be > 0, got {mu0}"));
        }
    }
    if !(inp.kappa >= 0.0) || !inp.kappa.is_finite() {
        errors.push(format!("kappa must be ≥ 0, got {}", inp.kappa));
    }
    if !(inp.floor >= 0.0) || !inp.floor.is_finite() {
        errors.push(format!("floor must be ≥ 0, got {}", inp.floor));
    }
    if inp.certificate.edge_count != inp.graph.edge_count() {
        errors.push(format!(
            "certificate was built for {} edges, graph has {}",
            inp.certificate.edge_count,
            inp.graph.edge_count()
        ));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errors))
    }
}

/// Executes the full hybrid run. See the module docs for the schedule; the
/// returned [`RunOutcome`] is deterministic given the inputs.
pub fn run(inp: &SimInputs) -> Result<RunOutcome> {
    validate_inputs(inp)?;
    let cert = inp.certificate;
    let cfg = &cert.quantizer;
    let n = cert.n;
    let m = inp.matrices;
    let d = inp.decomposition;
    let delta = cfg.delta();

    if !cert.feasible() {
        return Err(Error::Infeasible(cert.condition_detail()));
    }

    let dt = inp.dt;
    let n_steps = (inp.horizon / dt).round() as usize;
    let steps_of = |seconds: f64| -> usize { (seconds / dt).round() as usize };
    if steps_of(cert.dwell_t) < 1 {
        return Err(Error::Config(vec![format!(
            "dwell interval {} is shorter than one integration step {}",
            cert.dwell_t, dt
        )]));
    }

    let mut state = AgentState {
        x: inp.x0.clone(),
        v: inp.v0.clone(),
        t: 0.0,
    };

    let mut zoom;
    let mut t_zoom_in_start = None;
    let mut t_detect = None;
    let mut zoom_in_anchor = f64::NAN;
    // Step index of the next zoom-out tick / zoom-in dwell boundary.
    let mut next_tick = 0usize;
    let mut tick_count = 0u64;
    let mut next_boundary = usize::MAX;
    let mut base_step = 0usize;

    match inp.mu0 {
        Some(mu0) => {
            let ev0 = edge_views(&state, m, d, cfg, mu0, n)?;
            let v0 = cert.lyapunov(&ev0.z_t);
            let bound = cert.r1_bound(mu0);
            if v0 > bound {
                return Err(Error::Infeasible(format!(
                    "initial state lies outside R1(μ0 = {mu0}): V(z_T) = {v0:.6} > {bound:.6}; \
                     increase mu0 or choose a different seed"
                )));
            }
            zoom = ZoomState::start_zoom_in(mu0, inp.tau, cert.dwell_t)?;
            zoom_in_anchor = mu0;
            t_zoom_in_start = Some(0.0);
            base_step = 0;
            next_boundary = steps_of(cert.dwell_t);
        }
        None => {
            zoom = ZoomState::start_zoom_out(1.0, inp.tau, cert.dwell_t)?;
        }
    }

    let mut trace = SimTrace::default();
    let mut checks = RunChecks::default();
    let mut converged_at = None;
    let mut aborted: Option<DivergenceInfo> = None;

    let root_2nl = (2.0 * n as f64 * inp.graph.edge_count() as f64).sqrt();
    let e_t = m.incidence.transpose();

    let mut pending_defect: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut defect_sum = 0.0_f64;
    let mut defect_max = 0.0_f64;
    let mut defect_samples = 0usize;
    // (V, μ, phase) at the previous sample, for the decay-rate quotient.
    let mut prev_v: Option<(f64, f64, ZoomPhase)> = None;
    let mut decay_samples = 0usize;
    let mut decay_violations = 0usize;

    for i in 0..=n_steps {
        let t = i as f64 * dt;
        let is_final = i == n_steps;

        let mut ev = edge_views(&state, m, d, cfg, zoom.mu, n)?;

        if let Some((z_prev, rhs)) = pending_defect.take() {
            let defect = (&ev.z_t - &z_prev - &rhs * dt).norm();
            defect_sum += defect;
            defect_max = defect_max.max(defect);
            defect_samples += 1;
        }

        if state.x.iter().chain(state.v.iter()).any(|a| !a.is_finite()) {
            checks.finite_state = false;
            aborted = Some(DivergenceInfo {
                t,
                detail: "non-finite plant state".into(),
            });
        }

        if aborted.is_none() && !is_final {
            match zoom.phase {
                ZoomPhase::ZoomOut if i == next_tick => {
                    let q_z = quantize_vector(&ev.z_t, cfg, zoom.mu)?;
                    if in_range_detect(q_z.norm(), cfg, zoom.mu, cert.shrink)? {
                        zoom = zoom_step(&zoom, ZoomEvent::DetectionSuccess, cert.omega_factor, inp.gamma_out)?;
                        zoom_in_anchor = zoom.mu;
                        t_detect = Some(t);
                        t_zoom_in_start = Some(t);
                        base_step = i;
                        next_boundary = base_step + steps_of(cert.dwell_t);
                        trace.events.push(ZoomEventRecord {
                            t,
                            kind: ZoomEventKind::Detection,
                            mu: zoom.mu,
                            k: zoom.k,
                        });
                    } else {
                        let mu_prev = zoom.mu;
                        zoom = zoom_step(&zoom, ZoomEvent::ScheduleTick, cert.omega_factor, inp.gamma_out)?;
                        checks.zoom_monotone &= zoom.mu > mu_prev;
                        trace.events.push(ZoomEventRecord {
                            t,
                            kind: ZoomEventKind::ZoomOutTick,
                            mu: zoom.mu,
                            k: zoom.k,
                        });
                        tick_count += 1;
                        next_tick = steps_of(tick_count as f64 * inp.tau);
                        ev = edge_views(&state, m, d, cfg, zoom.mu, n)?;
                    }
                }
                ZoomPhase::ZoomIn if i == next_boundary => {
                    let v_l = cert.lyapunov(&ev.z_t);
                    checks.r2_at_boundaries &= v_l <= cert.r2_bound(zoom.mu) * (1.0 + 1e-12);
                    let mu_prev = zoom.mu;
                    zoom = zoom_step(&zoom, ZoomEvent::ScheduleTick, cert.omega_factor, inp.gamma_out)?;
                    checks.zoom_monotone &= zoom.mu < mu_prev;
                    checks.mu_staircase &=
                        zoom.mu == zoom_in_anchor * cert.omega_factor.powi(zoom.k as i32);
                    checks.invariance_chain &= v_l <= cert.r1_bound(zoom.mu) * (1.0 + 1e-12);
                    trace.events.push(ZoomEventRecord {
                        t,
                        kind: ZoomEventKind::ZoomInBoundary,
                        mu: zoom.mu,
                        k: zoom.k,
                    });
                    next_boundary = base_step + steps_of((zoom.k + 1) as f64 * cert.dwell_t);
                    ev = edge_views(&state, m, d, cfg, zoom.mu, n)?;
                }
                _ => {}
            }

            if zoom.phase == ZoomPhase::ZoomIn {
                let threshold = (inp.kappa * zoom.mu * delta).max(inp.floor);
                if ev.x_e.norm() <= threshold && ev.v_e.norm() <= threshold {
                    zoom = zoom.declare_converged();
                    converged_at = Some(t);
                    trace.events.push(ZoomEventRecord {
                        t,
                        kind: ZoomEventKind::Converged,
                        mu: zoom.mu,
                        k: zoom.k,
                    });
                }
            }
        }

        // Invariants on the recorded sample.
        let x_e_recheck = kron_apply(&e_t, &state.x, n);
        checks.edge_consistency &= x_e_recheck
            .iter()
            .zip(ev.x_e.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        let range = zoom.mu * cfg.range_m();
        if ev.x_e.amax() <= range && ev.v_e.amax() <= range {
            checks.quant_error_bound &=
                ev.omega.norm() <= root_2nl * zoom.mu * delta * (1.0 + 1e-12);
        }

        let v_l = cert.lyapunov(&ev.z_t);
        trace.samples.push(SimSample {
            t,
            mu: zoom.mu,
            phase: zoom.phase,
            v_lyap: v_l,
            norm_x_e: ev.x_e.norm(),
            norm_v_e: ev.v_e.norm(),
            norm_omega: ev.omega.norm(),
            x_e: ev.x_e.clone(),
            v_e: ev.v_e.clone(),
        });
        let done = is_final || aborted.is_some() || converged_at.is_some();
        if (inp.full_every > 0 && i % inp.full_every == 0) || done {
            trace.node_samples.push(NodeSample {
                t,
                x: state.x.clone(),
                v: state.v.clone(),
            });
        }

        if let Some((v_prev, mu_prev, phase_prev)) = prev_v {
            if phase_prev == ZoomPhase::ZoomIn
                && v_prev > cert.r2_bound(mu_prev)
                && v_prev <= cert.r1_bound(mu_prev)
            {
                decay_samples += 1;
                if (v_l - v_prev) / dt > -0.95 * cert.alpha_rate * v_prev {
                    decay_violations += 1;
                }
            }
        }
        prev_v = Some((v_l, zoom.mu, zoom.phase));

        if done {
            break;
        }

        let u = if zoom.phase == ZoomPhase::ZoomIn {
            let u = control_input(&state.x, &state.v, m, cfg, zoom.mu, cert.sigma, n)?;
            #[cfg(debug_assertions)]
            {
                let u_ns = control_input_neighbor_sum(
                    &state.x, &state.v, inp.graph, cfg, zoom.mu, cert.sigma, n,
                )?;
                debug_assert!(
                    (&u - &u_ns).norm() <= 1e-9 * (1.0 + u.norm()),
                    "stacked and neighbor-sum control paths disagree"
                );
            }
            // Reduced-model defect bookkeeping: ż_T at this instant.
            let rhs = kron_apply(&cert.l_t, &ev.z_t, n) + kron_apply(&cert.l_t1, &ev.omega, n);
            pending_defect = Some((ev.z_t.clone(), rhs));
            u
        } else {
            DVector::zeros(state.x.len())
        };

        match step(&state, &u, dt) {
            Ok(next) => state = next,
            Err(Error::Divergence { t: td, detail }) => {
                checks.finite_state = false;
                aborted = Some(DivergenceInfo { t: td, detail });
                break;
            }
            Err(other) => return Err(other),
        }
    }

    checks.decay_rate = decay_violations == 0;
    let last = trace
        .samples
        .last()
        .expect("a run always records at least one sample");

    Ok(RunOutcome {
        final_norm_x_e: last.norm_x_e,
        final_norm_v_e: last.norm_v_e,
        final_mu: last.mu,
        trace,
        checks,
        t_zoom_in_start,
        t_detect,
        zoom_in_intervals: if zoom.phase == ZoomPhase::ZoomOut {
            0
        } else {
            zoom.k
        },
        converged_at,
        defect_mean: if defect_samples > 0 {
            defect_sum / defect_samples as f64
        } else {
            0.0
        },
        defect_max,
        defect_samples,
        decay_samples,
        decay_violations,
        aborted,
    })
}
