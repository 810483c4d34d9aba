//! Error types shared across the crate.
//!
//! Every fallible operation returns [`Error`]; the CLI maps variants onto its
//! documented exit codes (1 = validation, 2 = infeasible certificate,
//! 3 = divergence) via [`Error::exit_code`].

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The graph violates a structural invariant (self-loop, bad node index,
    /// nonpositive weight). The message names the offending edge.
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// No node reaches every other node along directed edges, so no directed
    /// spanning tree exists and the decomposition is undefined.
    #[error("no spanning tree: graph is not quasi-strongly connected")]
    NoSpanningTree,

    /// An explicitly supplied tree-edge list does not form a spanning tree.
    #[error("invalid tree selection: {0}")]
    InvalidTree(String),

    /// A quantizer argument is outside its domain (μ ≤ 0, shrink ∉ (0,1], …).
    #[error("quantizer domain error: {0}")]
    Quantizer(String),

    /// The zoom state machine received an event that is illegal in its
    /// current phase.
    #[error("zoom protocol error: {0}")]
    ZoomProtocol(String),

    /// Certificate construction failed (σ at or below the positive-definiteness
    /// floor, Lyapunov solve failure, spectrum in the wrong half-plane).
    #[error("certificate error: {0}")]
    Certificate(String),

    /// The certificate is well-formed but infeasible: the range/resolution
    /// condition fails or the contraction factor is not < 1, so the zoom-in
    /// phase must not start.
    #[error("infeasible certificate: {0}")]
    Infeasible(String),

    /// Configuration problems. Carries *all* violations found, one message per
    /// line, each prefixed with the offending line number where applicable.
    #[error("invalid config:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// The simulated state left the representable range (NaN/∞).
    #[error("simulation diverged at t = {t}: {detail}")]
    Divergence { t: f64, detail: String },

    /// Mismatched dimensions between caller-supplied vectors/matrices.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An internal identity that must hold by construction failed; indicates a
    /// bug or severe ill-conditioning, not user error.
    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code for this error: 1 validation, 2 infeasible certificate,
    /// 3 divergence. Internal failures map to 1 as well (they are still a
    /// refusal to produce output, and 2/3 carry specific contracts).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Certificate(_) | Error::Infeasible(_) => 2,
            Error::Divergence { .. } => 3,
            _ => 1,
        }
    }
}
