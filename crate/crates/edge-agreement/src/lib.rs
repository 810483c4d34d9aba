//! Edge agreement of second-order multi-agent systems over directed graphs
//! with dynamically quantized relative measurements.
//!
//! The crate builds the full pipeline from a weighted digraph to a verified
//! closed-loop simulation:
//!
//! 1. [`graph`] — incidence machinery, the directed edge Laplacian
//!    `L_e = Eᵀ·E_in_w`, and the spanning-tree reduction onto the essential
//!    edge Laplacian `L̂_e` that carries every nonzero eigenvalue.
//! 2. [`quantizer`] — the dynamic uniform quantizer `q_μ` with saturation and
//!    the zoom-variable state machine (grow μ until the state is certifiably
//!    captured, then contract μ geometrically).
//! 3. [`stability`] — the Lyapunov certificate: solve `H·L̂_e + L̂_eᵀ·H = I`,
//!    assemble `P` and `Q`, and derive the dwell time, contraction factor Ω,
//!    decay rate, and the nested invariant ellipsoids R1/R2.
//! 4. [`sim`] — deterministic sample-and-hold RK4 simulation of N double
//!    integrators in ℝⁿ under the quantized relative-state protocol, with μ
//!    driven by the zoom schedule and all proof-level invariants checked on
//!    the trace.
//! 5. [`config`] / [`runner`] / [`fixture`] — the config-driven experiment
//!    front end used by the `edge-agreement` binary, including the shipped
//!    five-node reference fixture and its verification report.

pub mod config;
pub mod error;
pub mod fixture;
pub mod graph;
pub mod linalg;
pub mod quantizer;
pub mod runner;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
