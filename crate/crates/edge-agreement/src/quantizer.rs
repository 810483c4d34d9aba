//! The dynamic uniform quantizer `q_μ` and the zoom-variable state machine.
//!
//! The unit quantizer maps `y` onto the midpoint of its cell of width `Δ`,
//! saturating at magnitude `M − Δ/2`:
//!
//! ```text
//!   q_u(y) = (⌊y/Δ⌋ + 1/2)·Δ     for |y| ≤ M   (clamped to ±(M − Δ/2))
//!   q_u(y) = sign(y)·(M − Δ/2)   otherwise
//! ```
//!
//! and the dynamic quantizer scales it by the zoom variable, exactly:
//! `q_μ(x) = μ·q_u(x/μ)` — implemented literally in that form so the scaling
//! identity holds bit-for-bit, not merely to tolerance. The top cell is
//! clamped to the saturation level because the raw midpoint formula would
//! exceed it at `|y| = M`, breaking both monotonicity and the finiteness of
//! the output set; the clamp binds only in the top partial cell and keeps the
//! in-range error within `μΔ/2`.
//!
//! The midpoint offset means `q_μ` never outputs zero: a closed loop driven
//! by quantized measurements is persistently excited at scale `μΔ`, which is
//! why the zoom-in schedule (μ contracted by Ω each dwell interval) is what
//! actually drives the state to the origin.
//!
//! Zoom protocol: during *zoom-out* the controller is silent and μ grows by
//! `γ_out > 1` each tick until the quantized measurement certifies that the
//! true state is captured in the ellipsoid R1(μ) ([`in_range_detect`]);
//! during *zoom-in* μ contracts by `Ω ∈ (0,1)` each dwell interval. μ is
//! recomputed as `anchor·factor^k` rather than by repeated multiplication so
//! the staircase `μ(k) = μ(0)·Ω^k` is exact in floating point.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Quantizer parameters, both in state units: cell width `Δ > 0` and range
/// `M > Δ` (so at least one interior cell exists).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig {
    delta: f64,
    range_m: f64,
}

impl QuantizerConfig {
    pub fn new(delta: f64, range_m: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Quantizer(format!("delta must be > 0, got {delta}")));
        }
        if !(range_m > delta) || !range_m.is_finite() {
            return Err(Error::Quantizer(format!(
                "range M must exceed delta ({delta}), got {range_m}"
            )));
        }
        Ok(QuantizerConfig { delta, range_m })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn range_m(&self) -> f64 {
        self.range_m
    }

    /// Saturation magnitude of the unit quantizer, `M − Δ/2`.
    pub fn saturation(&self) -> f64 {
        self.range_m - 0.5 * self.delta
    }
}

/// Unit quantizer (μ = 1); see module docs for the boundary clamp.
fn quantize_unit(y: f64, cfg: &QuantizerConfig) -> f64 {
    let sat = cfg.saturation();
    if y.abs() <= cfg.range_m {
        (((y / cfg.delta).floor() + 0.5) * cfg.delta).clamp(-sat, sat)
    } else {
        // sign(0) := +1 for totality; unreachable here since 0 is in range.
        let sign = if y < 0.0 { -1.0 } else { 1.0 };
        sign * sat
    }
}

/// Dynamic uniform quantizer `q_μ(x) = μ·q_u(x/μ)`.
pub fn quantize_scalar(x: f64, cfg: &QuantizerConfig, mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Quantizer(format!("mu must be > 0, got {mu}")));
    }
    Ok(mu * quantize_unit(x / mu, cfg))
}

/// Componentwise `q_μ`. If every component is in range, the error norm is at
/// most `√dim·μΔ/2` (and a fortiori the coarser bound `√dim·μΔ`).
pub fn quantize_vector(x: &DVector<f64>, cfg: &QuantizerConfig, mu: f64) -> Result<DVector<f64>> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Quantizer(format!("mu must be > 0, got {mu}")));
    }
    Ok(DVector::from_iterator(
        x.len(),
        x.iter().map(|&xi| mu * quantize_unit(xi / mu, cfg)),
    ))
}

/// Zoom-out capture test using only quantized data: with
/// `shrink = √(λ_min(P)/λ_max(P))`, a quantized-measurement norm satisfying
/// `|q_μ(z)| ≤ (shrink·M − Δ)·μ` certifies that the true state lies in the
/// ellipsoid R1(μ).
pub fn in_range_detect(
    q_value_norm: f64,
    cfg: &QuantizerConfig,
    mu: f64,
    shrink: f64,
) -> Result<bool> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Quantizer(format!("mu must be > 0, got {mu}")));
    }
    if !(shrink > 0.0 && shrink <= 1.0) {
        return Err(Error::Quantizer(format!(
            "shrink must lie in (0, 1], got {shrink}"
        )));
    }
    if !(q_value_norm >= 0.0) {
        return Err(Error::Quantizer(format!(
            "quantized norm must be nonnegative, got {q_value_norm}"
        )));
    }
    Ok(q_value_norm <= (shrink * cfg.range_m - cfg.delta) * mu)
}

/// Phase of the zoom schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoomPhase {
    ZoomOut,
    ZoomIn,
    Converged,
}

impl ZoomPhase {
    /// Stable lower-snake name used in trace files.
    pub fn name(&self) -> &'static str {
        match self {
            ZoomPhase::ZoomOut => "zoom_out",
            ZoomPhase::ZoomIn => "zoom_in",
            ZoomPhase::Converged => "converged",
        }
    }
}

/// Events driving [`zoom_step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoomEvent {
    /// A schedule boundary: a zoom-out tick (every τ) or a zoom-in dwell
    /// boundary (every dwell_T).
    ScheduleTick,
    /// The quantized capture test fired during zoom-out.
    DetectionSuccess,
}

/// Zoom-variable state: μ is piecewise constant between update instants and
/// always equals `anchor·factor^k`, where `anchor` is μ at the current
/// phase's entry and `k` counts ticks since then.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomState {
    pub mu: f64,
    pub phase: ZoomPhase,
    /// Ticks since the current phase began.
    pub k: u32,
    /// Zoom-out tick interval (seconds).
    pub tau: f64,
    /// Zoom-in dwell interval (seconds).
    pub dwell_t: f64,
    anchor: f64,
}

impl ZoomState {
    pub fn start_zoom_out(mu: f64, tau: f64, dwell_t: f64) -> Result<Self> {
        Self::start(mu, tau, dwell_t, ZoomPhase::ZoomOut)
    }

    pub fn start_zoom_in(mu: f64, tau: f64, dwell_t: f64) -> Result<Self> {
        Self::start(mu, tau, dwell_t, ZoomPhase::ZoomIn)
    }

    fn start(mu: f64, tau: f64, dwell_t: f64, phase: ZoomPhase) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Quantizer(format!("mu must be > 0, got {mu}")));
        }
        Ok(ZoomState {
            mu,
            phase,
            k: 0,
            tau,
            dwell_t,
            anchor: mu,
        })
    }

    /// Terminal convergence marker; ticks leave a converged state unchanged.
    pub fn declare_converged(&self) -> ZoomState {
        ZoomState {
            phase: ZoomPhase::Converged,
            ..*self
        }
    }
}

/// Advances the zoom state machine:
///
/// * `ZoomOut` + tick → μ ← γ_out·μ (requires γ_out > 1)
/// * `ZoomOut` + detection → phase ← `ZoomIn`, k ← 0, μ unchanged
/// * `ZoomIn` + tick → μ ← Ω·μ (requires Ω ∈ (0,1))
/// * `Converged` + tick → unchanged
/// * detection outside `ZoomOut` → protocol error
pub fn zoom_step(
    z: &ZoomState,
    event: ZoomEvent,
    omega: f64,
    gamma_out: f64,
) -> Result<ZoomState> {
    match (z.phase, event) {
        (ZoomPhase::ZoomOut, ZoomEvent::ScheduleTick) => {
            if !(gamma_out > 1.0) || !gamma_out.is_finite() {
                return Err(Error::ZoomProtocol(format!(
                    "zoom-out growth factor must be > 1, got {gamma_out}"
                )));
            }
            let k = z.k + 1;
            Ok(ZoomState {
                mu: z.anchor * gamma_out.powi(k as i32),
                k,
                ..*z
            })
        }
        (ZoomPhase::ZoomOut, ZoomEvent::DetectionSuccess) => Ok(ZoomState {
            phase: ZoomPhase::ZoomIn,
            k: 0,
            anchor: z.mu,
            ..*z
        }),
        (ZoomPhase::ZoomIn, ZoomEvent::ScheduleTick) => {
            if !(omega > 0.0 && omega < 1.0) {
                return Err(Error::ZoomProtocol(format!(
                    "zoom-in factor must lie in (0, 1), got {omega}"
                )));
            }
            let k = z.k + 1;
            Ok(ZoomState {
                mu: z.anchor * omega.powi(k as i32),
                k,
                ..*z
            })
        }
        (ZoomPhase::Converged, ZoomEvent::ScheduleTick) => Ok(*z),
        (ZoomPhase::ZoomIn | ZoomPhase::Converged, ZoomEvent::DetectionSuccess) => {
            Err(Error::ZoomProtocol(format!(
                "detection fired during {:?}; detection is a zoom-out-only event",
                z.phase
            )))
        }
    }
}

/// Transmission budget for one quantized channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitBudget {
    /// Nominal level count `2M + 1` (M read as an integer level parameter).
    pub levels: u64,
    /// Nominal bits `⌈log₂(2M)⌉`.
    pub bits: u32,
    /// Cell count when M and Δ are both read in state units: `⌈2M/Δ⌉`.
    pub state_unit_cells: u64,
    /// Bits for the state-unit cell count.
    pub state_unit_bits: u32,
}

fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 2);
    64 - (x - 1).leading_zeros()
}

/// Level/bit counts under the nominal reading (`levels = 2M+1`,
/// `bits = ⌈log₂(2M)⌉`, M an integer). The alternative state-unit reading
/// `2M/Δ` cells is reported alongside because the two are inconsistent
/// unless Δ = 1; the discrepancy is documented, not resolved.
pub fn bit_budget(cfg: &QuantizerConfig) -> Result<BitBudget> {
    let m = cfg.range_m;
    if m.fract() != 0.0 || m < 1.0 {
        return Err(Error::Quantizer(format!(
            "bit budget needs the integer level-parameter reading of M, got {m}"
        )));
    }
    let m = m as u64;
    let cells = (2.0 * cfg.range_m / cfg.delta).ceil() as u64;
    Ok(BitBudget {
        levels: 2 * m + 1,
        bits: ceil_log2(2 * m),
        state_unit_cells: cells,
        state_unit_bits: ceil_log2(cells.max(2)),
    })
}
