//! Lyapunov-based stability certificate for the quantized edge-agreement
//! loop.
//!
//! Given the essential edge Laplacian `L̂_e` (all eigenvalues in the open
//! right half-plane), the certificate is built from the Lyapunov solution
//!
//! ```text
//!   H·L̂_e + L̂_eᵀ·H = I,    H = Hᵀ ≻ 0
//! ```
//!
//! With coupling gains `α = σ²`, `β = σ³` the reduced tree dynamics are
//! `ż_T = (L_T⊗I_n)·z_T + (L_T1⊗I_n)·ω` where
//!
//! ```text
//!   L_T  = [[0, I], [−σ²·L̂_e, −σ³·L̂_e]]
//!   L_T1 = [[0, 0], [−σ²·L̂_O, −σ³·L̂_O]]
//! ```
//!
//! and ω stacks the quantization errors. The quadratic form uses
//! `P = [[σH, H], [H, σH]]`; then `Q = −(P·L_T + L_Tᵀ·P)` has the closed form
//! `[[σ²I, σ³I − σH], [σ³I − σH, σ⁴I − 2H]]` (both are computed and must
//! agree), and both `P` and `Q` are positive definite for any
//! `σ > √(λ_max(H)/2 + 1)` ([`sigma_floor`]).
//!
//! Derived constants, for state dimension `n` and edge count `L`:
//!
//! ```text
//!   Θ       = 2·√(2nL)·‖P·L_T1‖ / λ_min(Q)
//!   α_rate  = λ_min(Q)·ε / (λ_max(P)·(1+ε))
//!   dwell_T = (1/α_rate)·ln( λ_min(P)·M² / (λ_max(P)·Θ²·Δ²·(1+ε)²) )
//!   Ω       = √(λ_max(P))·Θ·Δ·(1+ε) / (√(λ_min(P))·M)
//! ```
//!
//! together with the nested ellipsoids of `V(z_T) = z_Tᵀ·(P⊗I_n)·z_T`:
//! `R1(μ): V ≤ λ_min(P)·M²·μ²` (certifiably captured by the quantizer range)
//! and `R2(μ): V ≤ λ_max(P)·Θ²·Δ²·(1+ε)²·μ²` (the quantization-noise floor).
//! A dwell interval after entering R1 the state is inside R2, and
//! `R2(μ) = R1(Ω·μ)` by construction — contracting μ by Ω each dwell interval
//! keeps the chain invariant and drives the state to the origin.
//!
//! The feasibility flag follows the range-vs-resolution condition
//! `√(λ_min(P)/λ_max(P))·M > 2Δ·max{1, √(2nL)·‖P·L_T1‖/λ_min(Q)}`. Note the
//! condition by itself bounds Ω below `1+ε` only; the simulator additionally
//! requires Ω < 1 before entering zoom-in (see [`StabilityCertificate::feasible`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::TreeDecomposition;
use crate::linalg::{spectral_norm, symmetric_eig_bounds};
use crate::quantizer::QuantizerConfig;

/// Solves `H·L̂_e + L̂_eᵀ·H = I` by vectorizing into an (N−1)²-dimensional
/// linear system, with one pass of iterative refinement if the residual
/// exceeds 1e-9. Errors when `L̂_e` has an eigenvalue with nonpositive real
/// part (no positive definite solution exists).
pub fn solve_lyapunov(l_hat_e: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = l_hat_e.nrows();
    if l_hat_e.ncols() != m {
        return Err(Error::Dimension(format!(
            "Lyapunov solve needs a square matrix, got {}x{}",
            m,
            l_hat_e.ncols()
        )));
    }
    let eigs = l_hat_e.complex_eigenvalues();
    if eigs.iter().any(|l| l.re <= 1e-12) {
        return Err(Error::Certificate(
            "essential edge Laplacian has an eigenvalue with nonpositive real part: \
             graph not quasi-strongly connected or numerical failure"
                .into(),
        ));
    }

    let eye_m = DMatrix::<f64>::identity(m, m);
    let lt = l_hat_e.transpose();
    // vec(H·L̂) = (L̂ᵀ⊗I)·vec(H), vec(L̂ᵀ·H) = (I⊗L̂ᵀ)·vec(H) (column-major vec).
    let k = lt.kronecker(&eye_m) + eye_m.kronecker(&lt);
    let lu = k.lu();
    let rhs = DVector::from_column_slice(eye_m.as_slice());
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Certificate("vectorized Lyapunov system is singular".into()))?;
    let h = DMatrix::from_column_slice(m, m, sol.as_slice());
    let mut h = (&h + h.transpose()) * 0.5;

    let residual = |h: &DMatrix<f64>| -> DMatrix<f64> { &eye_m - (h * l_hat_e + &lt * h) };
    if spectral_norm(&residual(&h)) > 1e-9 {
        let r = residual(&h);
        if let Some(corr) = lu.solve(&DVector::from_column_slice(r.as_slice())) {
            let dh = DMatrix::from_column_slice(m, m, corr.as_slice());
            h += (&dh + dh.transpose()) * 0.5;
        }
    }
    let res_norm = spectral_norm(&residual(&h));
    if res_norm > 1e-9 {
        return Err(Error::Certificate(format!(
            "Lyapunov residual {res_norm:.3e} exceeds 1e-9"
        )));
    }
    let (min_eig, _) = symmetric_eig_bounds(&h);
    if min_eig <= 0.0 {
        return Err(Error::Certificate(
            "Lyapunov solution is not positive definite".into(),
        ));
    }
    Ok(h)
}

/// The positive-definiteness floor for σ: any `σ > √(λ_max(H)/2 + 1)` makes
/// both `P` and `Q` positive definite. Errors unless `H` is symmetric
/// positive definite.
pub fn sigma_floor(h: &DMatrix<f64>) -> Result<f64> {
    if h.nrows() != h.ncols() {
        return Err(Error::Dimension("sigma_floor needs a square H".into()));
    }
    if (h - h.transpose()).amax() > 1e-9 * (1.0 + h.amax()) {
        return Err(Error::Certificate("H is not symmetric".into()));
    }
    let (min_eig, max_eig) = symmetric_eig_bounds(h);
    if min_eig <= 0.0 {
        return Err(Error::Certificate("H is not positive definite".into()));
    }
    Ok((max_eig / 2.0 + 1.0).sqrt())
}

/// Evaluates `V = z_Tᵀ·(P⊗I_n)·z_T` blockwise (block i of `z_T` has length
/// `n`): `V = Σ_ij P[i,j]·⟨z_i, z_j⟩`. Nonnegative for positive semidefinite
/// `P`, zero iff `z_T = 0` for definite `P`.
pub fn lyapunov_value(z_t: &DVector<f64>, p: &DMatrix<f64>, n: usize) -> f64 {
    assert_eq!(
        z_t.len(),
        p.nrows() * n,
        "lyapunov_value: state length {} does not match {} blocks of size {}",
        z_t.len(),
        p.nrows(),
        n
    );
    let mut v = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let c = p[(i, j)];
            if c != 0.0 {
                let mut dot = 0.0;
                for d in 0..n {
                    dot += z_t[i * n + d] * z_t[j * n + d];
                }
                v += c * dot;
            }
        }
    }
    v
}

/// The full Theorem-style certificate; see the module docs for every formula.
#[derive(Debug, Clone)]
pub struct StabilityCertificate {
    /// Coupling base σ (gains are α = σ², β = σ³).
    pub sigma: f64,
    /// Ellipsoid margin ε > 0.
    pub epsilon: f64,
    /// Per-agent state dimension n.
    pub n: usize,
    /// Edge count L of the underlying graph.
    pub edge_count: usize,
    /// Quantizer parameters (Δ, M) the certificate was built against.
    pub quantizer: QuantizerConfig,
    /// Lyapunov solution H.
    pub h: DMatrix<f64>,
    /// P = [[σH, H], [H, σH]].
    pub p: DMatrix<f64>,
    /// Q = −(P·L_T + L_Tᵀ·P) (stored via the closed form; both agree ≤ 1e-9).
    pub q: DMatrix<f64>,
    /// Reduced closed-loop matrix L_T.
    pub l_t: DMatrix<f64>,
    /// Reduced quantization-error input matrix L_T1.
    pub l_t1: DMatrix<f64>,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub lambda_min_q: f64,
    pub lambda_max_q: f64,
    /// Spectral norm ‖P·L_T1‖.
    pub norm_p_lt1: f64,
    /// Θ = 2·√(2nL)·‖P·L_T1‖ / λ_min(Q).
    pub theta_const: f64,
    /// Exponential decay rate of V between R1 and R2.
    pub alpha_rate: f64,
    /// Dwell interval guaranteeing R1 → R2 transit.
    pub dwell_t: f64,
    /// Zoom-in contraction factor Ω.
    pub omega_factor: f64,
    /// The range-vs-resolution condition.
    pub cond1_ok: bool,
    /// √(λ_max(H)/2 + 1): σ must exceed this.
    pub sigma_floor: f64,
    /// √(λ_min(P)/λ_max(P)), the zoom-out detection shrink factor.
    pub shrink: f64,
}

impl StabilityCertificate {
    /// R1(μ) threshold on V.
    pub fn r1_bound(&self, mu: f64) -> f64 {
        let m = self.quantizer.range_m();
        self.lambda_min_p * m * m * mu * mu
    }

    /// R2(μ) threshold on V.
    pub fn r2_bound(&self, mu: f64) -> f64 {
        let d = self.quantizer.delta();
        let s = self.theta_const * d * (1.0 + self.epsilon) * mu;
        self.lambda_max_p * s * s
    }

    /// Membership of `z_T` in the nested ellipsoids (non-strict boundaries).
    pub fn ellipsoid_membership(&self, z_t: &DVector<f64>, mu: f64) -> (bool, bool) {
        let v = self.lyapunov(z_t);
        (v <= self.r1_bound(mu), v <= self.r2_bound(mu))
    }

    /// V(z_T) under this certificate's P and n.
    pub fn lyapunov(&self, z_t: &DVector<f64>) -> f64 {
        lyapunov_value(z_t, &self.p, self.n)
    }

    /// True when the zoom-in phase may run: the range condition holds *and*
    /// the contraction factor actually contracts.
    pub fn feasible(&self) -> bool {
        self.cond1_ok && self.omega_factor < 1.0
    }

    /// Human-readable account of the range-vs-resolution condition: both
    /// sides with numbers, and which side failed when infeasible.
    pub fn condition_detail(&self) -> String {
        let m = self.quantizer.range_m();
        let delta = self.quantizer.delta();
        let lhs = self.shrink * m;
        let rhs = 2.0
            * delta
            * f64::max(
                1.0,
                (2.0 * self.n as f64 * self.edge_count as f64).sqrt() * self.norm_p_lt1
                    / self.lambda_min_q,
            );
        if !self.cond1_ok {
            format!(
                "quantizer range side failed: √(λ_min(P)/λ_max(P))·M = {lhs:.6} must exceed \
                 2Δ·max{{1, √(2nL)·‖P·L_T1‖/λ_min(Q)}} = {rhs:.6}; increase range or decrease delta"
            )
        } else if self.omega_factor >= 1.0 {
            format!(
                "contraction side failed: Ω = {:.6} ≥ 1 even though the range condition holds \
                 ({lhs:.6} > {rhs:.6}); decrease delta relative to the range",
                self.omega_factor
            )
        } else {
            format!(
                "range condition holds: √(λ_min(P)/λ_max(P))·M = {lhs:.6} > \
                 2Δ·max{{1, √(2nL)·‖P·L_T1‖/λ_min(Q)}} = {rhs:.6}, and Ω = {:.6} < 1",
                self.omega_factor
            )
        }
    }
}

/// Builds the certificate from a tree decomposition. Errors when σ is at or
/// below [`sigma_floor`] or ε is not positive; an infeasible range condition
/// is *not* an error here — it is reported through `cond1_ok` and
/// [`StabilityCertificate::feasible`].
pub fn build_certificate(
    d: &TreeDecomposition,
    sigma: f64,
    epsilon: f64,
    quantizer: QuantizerConfig,
    n: usize,
) -> Result<StabilityCertificate> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Certificate(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if n == 0 {
        return Err(Error::Certificate("state dimension n must be ≥ 1".into()));
    }
    let h = solve_lyapunov(&d.l_hat_e)?;
    let floor = sigma_floor(&h)?;
    if !(sigma > floor) {
        return Err(Error::Certificate(format!(
            "sigma = {sigma} is at or below the positive-definiteness floor {floor}"
        )));
    }

    let m = h.nrows();
    let l = d.l_hat_o.ncols();
    let s2 = sigma * sigma;
    let s3 = s2 * sigma;
    let s4 = s2 * s2;

    let mut p = DMatrix::<f64>::zeros(2 * m, 2 * m);
    p.view_mut((0, 0), (m, m)).copy_from(&(&h * sigma));
    p.view_mut((0, m), (m, m)).copy_from(&h);
    p.view_mut((m, 0), (m, m)).copy_from(&h);
    p.view_mut((m, m), (m, m)).copy_from(&(&h * sigma));

    let mut l_t = DMatrix::<f64>::zeros(2 * m, 2 * m);
    l_t.view_mut((0, m), (m, m)).fill_with_identity();
    l_t.view_mut((m, 0), (m, m)).copy_from(&(&d.l_hat_e * -s2));
    l_t.view_mut((m, m), (m, m)).copy_from(&(&d.l_hat_e * -s3));

    let mut l_t1 = DMatrix::<f64>::zeros(2 * m, 2 * l);
    l_t1.view_mut((m, 0), (m, l)).copy_from(&(&d.l_hat_o * -s2));
    l_t1.view_mut((m, l), (m, l)).copy_from(&(&d.l_hat_o * -s3));

    // Q both from the definition and from the closed form; they must agree.
    let q_def = -(&p * &l_t + l_t.transpose() * &p);
    let eye_m = DMatrix::<f64>::identity(m, m);
    let off = &eye_m * s3 - &h * sigma;
    let mut q = DMatrix::<f64>::zeros(2 * m, 2 * m);
    q.view_mut((0, 0), (m, m)).copy_from(&(&eye_m * s2));
    q.view_mut((0, m), (m, m)).copy_from(&off);
    q.view_mut((m, 0), (m, m)).copy_from(&off);
    q.view_mut((m, m), (m, m))
        .copy_from(&(&eye_m * s4 - &h * 2.0));
    if (&q_def - &q).amax() > 1e-9 {
        return Err(Error::Internal(format!(
            "Q from the definition deviates from the closed form by {:.3e}",
            (&q_def - &q).amax()
        )));
    }

    let (lambda_min_p, lambda_max_p) = symmetric_eig_bounds(&p);
    let (lambda_min_q, lambda_max_q) = symmetric_eig_bounds(&q);
    debug_assert!(lambda_min_p > 0.0 && lambda_min_q > 0.0);

    let norm_p_lt1 = spectral_norm(&(&p * &l_t1));
    let root_2nl = (2.0 * n as f64 * l as f64).sqrt();
    let theta_const = 2.0 * root_2nl * norm_p_lt1 / lambda_min_q;
    let alpha_rate = lambda_min_q * epsilon / (lambda_max_p * (1.0 + epsilon));

    let m_range = quantizer.range_m();
    let delta = quantizer.delta();
    let shrink = (lambda_min_p / lambda_max_p).sqrt();
    let cond1_ok = shrink * m_range > 2.0 * delta * f64::max(1.0, root_2nl * norm_p_lt1 / lambda_min_q);

    let one_eps = 1.0 + epsilon;
    let dwell_t = (lambda_min_p * m_range * m_range
        / (lambda_max_p * theta_const * theta_const * delta * delta * one_eps * one_eps))
        .ln()
        / alpha_rate;
    let omega_factor =
        lambda_max_p.sqrt() * theta_const * delta * one_eps / (lambda_min_p.sqrt() * m_range);

    Ok(StabilityCertificate {
        sigma,
        epsilon,
        n,
        edge_count: l,
        quantizer,
        h,
        p,
        q,
        l_t,
        l_t1,
        lambda_min_p,
        lambda_max_p,
        lambda_min_q,
        lambda_max_q,
        norm_p_lt1,
        theta_const,
        alpha_rate,
        dwell_t,
        omega_factor,
        cond1_ok,
        sigma_floor: floor,
        shrink,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_matrices, decompose, DirectedGraph};
    use nalgebra::dmatrix;

    fn five_node_decomposition() -> TreeDecomposition {
        let g = DirectedGraph::new(
            5,
            &[
                (1, 2, 0.12),
                (2, 3, 0.24),
                (3, 4, 0.44),
                (3, 5, 0.43),
                (5, 1, 0.09),
            ],
        )
        .unwrap();
        let m = build_matrices(&g);
        decompose(&g, &m).unwrap()
    }

    fn five_node_certificate() -> StabilityCertificate {
        build_certificate(
            &five_node_decomposition(),
            1.64,
            0.75,
            QuantizerConfig::new(0.1, 63.0).unwrap(),
            3,
        )
        .unwrap()
    }

    #[test]
    fn scalar_and_diagonal_lyapunov_solutions() {
        let h = solve_lyapunov(&dmatrix![0.5]).unwrap();
        assert!((h[(0, 0)] - 1.0).abs() < 1e-12);
        let h = solve_lyapunov(&dmatrix![1.0, 0.0; 0.0, 2.0]).unwrap();
        assert!((&h - dmatrix![0.5, 0.0; 0.0, 0.25]).amax() < 1e-12);
    }

    #[test]
    fn lyapunov_rejects_wrong_half_plane() {
        assert!(matches!(
            solve_lyapunov(&dmatrix![-1.0]),
            Err(Error::Certificate(_))
        ));
        assert!(matches!(
            solve_lyapunov(&dmatrix![0.0]),
            Err(Error::Certificate(_))
        ));
        assert!(solve_lyapunov(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn five_node_lyapunov_solution_matches_reference() {
        let d = five_node_decomposition();
        let h = solve_lyapunov(&d.l_hat_e).unwrap();
        let reference = dmatrix![
            2.47, 0.16, 0.07, -0.26;
            0.16, 2.86, 0.39, 0.45;
            0.07, 0.39, 1.14, -0.01;
            -0.26, 0.45, -0.01, 1.22
        ];
        assert!((&h - reference).amax() < 0.01);
        let residual = &h * &d.l_hat_e + d.l_hat_e.transpose() * &h
            - DMatrix::<f64>::identity(4, 4);
        assert!(spectral_norm(&residual) <= 1e-9);
        let (_, lam_max) = symmetric_eig_bounds(&h);
        assert!((lam_max - 3.067_413_857_602_014_5).abs() / lam_max < 1e-9);
    }

    #[test]
    fn sigma_floor_examples() {
        assert!((sigma_floor(&dmatrix![1.0]).unwrap() - 1.5_f64.sqrt()).abs() < 1e-12);
        assert!(
            (sigma_floor(&DMatrix::<f64>::identity(4, 4)).unwrap() - 1.5_f64.sqrt()).abs() < 1e-12
        );
        let d = five_node_decomposition();
        let h = solve_lyapunov(&d.l_hat_e).unwrap();
        let floor = sigma_floor(&h).unwrap();
        assert!((floor - 1.591_762_208_623_199_5).abs() / floor < 1e-9);
        assert!(1.64 > floor);
        assert!(sigma_floor(&dmatrix![-1.0]).is_err());
        assert!(sigma_floor(&dmatrix![1.0, 2.0; 0.0, 1.0]).is_err());
    }

    #[test]
    fn single_edge_certificate_matches_hand_arithmetic() {
        let g = DirectedGraph::new(2, &[(1, 2, 0.5)]).unwrap();
        let m = build_matrices(&g);
        let d = decompose(&g, &m).unwrap();
        let cert = build_certificate(&d, 1.3, 0.75, QuantizerConfig::new(0.1, 63.0).unwrap(), 1)
            .unwrap();
        assert!((&cert.h - dmatrix![1.0]).amax() < 1e-12);
        assert!((&cert.p - dmatrix![1.3, 1.0; 1.0, 1.3]).amax() < 1e-12);
        assert!((cert.lambda_min_p - 0.3).abs() < 1e-12);
        assert!((cert.lambda_max_p - 2.3).abs() < 1e-12);
        assert!((&cert.q - dmatrix![1.69, 0.897; 0.897, 0.8561]).amax() < 1e-12);
    }

    #[test]
    fn five_node_certificate_constants_match_frozen_values() {
        let cert = five_node_certificate();
        let close = |got: f64, want: f64, rel: f64| (got - want).abs() <= rel * want.abs();
        assert!(close(cert.lambda_max_p, 8.097_972_584_069_32, 1e-8));
        assert!(close(cert.lambda_min_p, 0.615_687_111_988_615_1, 1e-8));
        assert!(close(cert.norm_p_lt1, 6.712_144_302_118_363_5, 1e-8));
        assert!(close(cert.lambda_min_q, 0.878_255_539_045_299_3, 1e-8));
        assert!(close(cert.theta_const, 83.720_345_162_784_67, 1e-8));
        assert!(close(cert.alpha_rate, 0.046_480_180_947_991_216, 1e-8));
        assert!(close(cert.dwell_t, 7.328_153_709_976_819, 1e-8));
        assert!(close(cert.omega_factor, 0.843_405_889_012_538_8, 1e-8));
        assert!(close(cert.shrink, 0.275_734_989_962_361, 1e-8));
        assert!(cert.cond1_ok);
        assert!(cert.feasible());
        // R2(μ) = R1(Ω·μ): the invariance chain is exact by construction.
        let r2 = cert.r2_bound(10.0);
        let r1_next = cert.r1_bound(10.0 * cert.omega_factor);
        assert!((r2 - r1_next).abs() <= 1e-9 * r2);
    }

    #[test]
    fn certificate_rejects_bad_sigma_and_epsilon() {
        let d = five_node_decomposition();
        let qc = QuantizerConfig::new(0.1, 63.0).unwrap();
        let err = build_certificate(&d, 1.5, 0.75, qc, 3).unwrap_err();
        match err {
            Error::Certificate(msg) => assert!(msg.contains("floor")),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(build_certificate(&d, 1.64, 0.0, qc, 3).is_err());
        assert!(build_certificate(&d, 1.64, -1.0, qc, 3).is_err());
        assert!(build_certificate(&d, 1.64, 0.75, qc, 0).is_err());
    }

    #[test]
    fn infeasible_range_condition_is_flagged_not_erred() {
        // Tiny range M relative to Δ: cond1 fails, Ω ≥ 1, but the
        // certificate is still returned for inspection.
        let d = five_node_decomposition();
        let qc = QuantizerConfig::new(0.1, 1.0).unwrap();
        let cert = build_certificate(&d, 1.64, 0.75, qc, 3).unwrap();
        assert!(!cert.cond1_ok);
        assert!(cert.omega_factor >= 1.0);
        assert!(!cert.feasible());
        assert!(cert.dwell_t <= 0.0);
    }

    #[test]
    fn lyapunov_value_examples_and_blockwise_equivalence() {
        let p = DMatrix::<f64>::identity(2, 2);
        assert_eq!(lyapunov_value(&DVector::zeros(4), &p, 2), 0.0);
        let unit = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(lyapunov_value(&unit, &p, 1), 1.0);

        let cert = five_node_certificate();
        let z = DVector::from_element(8 * 3, 1.0);
        let dense = cert.p.kronecker(&DMatrix::<f64>::identity(3, 3));
        let brute = (z.transpose() * &dense * &z)[(0, 0)];
        let val = cert.lyapunov(&z);
        assert!((val - brute).abs() <= 1e-9 * brute.abs());
    }

    #[test]
    fn ellipsoid_membership_boundary_conventions() {
        let cert = five_node_certificate();
        let mu = 10.0;
        let (r1, r2) = cert.ellipsoid_membership(&DVector::zeros(24), mu);
        assert!(r1 && r2);
        // Scale a state onto (just inside) the R1 boundary: in R1, out of R2.
        let mut z = DVector::from_element(24, 1.0);
        let v0 = cert.lyapunov(&z);
        z *= (cert.r1_bound(mu) / v0).sqrt() * (1.0 - 1e-12);
        let (r1, r2) = cert.ellipsoid_membership(&z, mu);
        assert!(r1 && !r2);
        // Just outside R1: neither.
        let z_out = &z * 1.01;
        let (r1, r2) = cert.ellipsoid_membership(&z_out, mu);
        assert!(!r1 && !r2);
        // Between the thresholds (scale to just inside R2): both hold.
        let mut z2 = DVector::from_element(24, 1.0);
        let v0 = cert.lyapunov(&z2);
        z2 *= (cert.r2_bound(mu) / v0).sqrt() * (1.0 - 1e-12);
        let (r1, r2) = cert.ellipsoid_membership(&z2, mu);
        assert!(r1 && r2);
    }
}
