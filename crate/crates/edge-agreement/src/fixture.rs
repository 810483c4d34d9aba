//! The embedded five-node reference experiment and its verification report.
//!
//! The crate ships one fully worked reference: a five-node digraph with one
//! cycle (edges 1→2, 2→3, 3→4, 3→5, 5→1, weights 0.12/0.24/0.44/0.43/0.09,
//! tree = edges 1–4), state dimension n = 3, σ = 1.64, Δ = 0.1, M = 63,
//! ε = 0.75, μ0 = 10. [`verify_fixture`] recomputes every derived quantity
//! from that graph and compares against the reference values embedded below
//! (the decomposition matrices at their printed 2-decimal precision, the
//! certificate constants at their printed precision), printing a pass/fail
//! table with residuals.
//!
//! Two reference rows deserve a note, recorded here and in the README:
//!
//! * `dwell_T`: the dwell-interval formula evaluates to 7.3282 s from this
//!   crate's (cross-checked) certificate constants, while the embedded
//!   reference records 6.2597 s. No consistent reading of the formula and
//!   the other reference constants reproduces 6.2597, so this row fails
//!   honestly rather than being retuned.
//! * `lambda_min_q` has no printed reference; the computed value is frozen
//!   as a regression row so any future drift in the eigensolve is caught.

use std::fmt;

use nalgebra::{dmatrix, DMatrix};

use crate::config::{parse_config, RunConfig, SigmaChoice};
use crate::error::{Error, Result};
use crate::graph::{build_matrices, decompose_with_tree, DirectedGraph, TreeDecomposition};
use crate::quantizer::QuantizerConfig;
use crate::stability::{build_certificate, StabilityCertificate};

/// The shipped reference configuration (also on disk as
/// `fixtures/five_node.cfg`).
pub const FIVE_NODE_CONFIG: &str = include_str!("../../../fixtures/five_node.cfg");

/// Parses the embedded reference configuration.
pub fn reference_config() -> RunConfig {
    parse_config(FIVE_NODE_CONFIG).expect("embedded reference config is valid")
}

/// Builds the reference graph.
pub fn reference_graph() -> DirectedGraph {
    let cfg = reference_config();
    DirectedGraph::new(cfg.nodes, &cfg.edges).expect("embedded reference graph is valid")
}

/// Graph, decomposition, and certificate of the reference experiment.
pub fn reference_pipeline() -> (DirectedGraph, TreeDecomposition, StabilityCertificate) {
    let cfg = reference_config();
    let g = reference_graph();
    let m = build_matrices(&g);
    let tree: Vec<usize> = cfg
        .tree_edges
        .as_ref()
        .expect("embedded reference pins its tree")
        .iter()
        .map(|e| e - 1)
        .collect();
    let d = decompose_with_tree(&g, &m, &tree).expect("embedded reference tree spans the graph");
    let sigma = match cfg.sigma {
        SigmaChoice::Fixed(s) => s,
        SigmaChoice::Auto => unreachable!("embedded reference pins sigma"),
    };
    let q = QuantizerConfig::new(cfg.delta, cfg.range_m).expect("embedded quantizer is valid");
    let cert =
        build_certificate(&d, sigma, cfg.epsilon, q, cfg.n).expect("embedded certificate builds");
    (g, d, cert)
}

/// How a row's residual is measured against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToleranceKind {
    /// `residual = max |computed − reference|` (entrywise for matrices).
    Absolute,
    /// `residual = |computed − reference| / |reference|`.
    Relative,
}

impl ToleranceKind {
    fn label(&self) -> &'static str {
        match self {
            ToleranceKind::Absolute => "abs",
            ToleranceKind::Relative => "rel",
        }
    }
}

/// One comparison row of the verification report.
#[derive(Debug, Clone)]
pub struct FixtureRow {
    pub name: &'static str,
    pub kind: ToleranceKind,
    pub tolerance: f64,
    pub residual: f64,
    pub pass: bool,
    /// For scalar rows: "computed … reference …". Empty for matrix rows.
    pub detail: String,
}

/// The full verification report; displays as an aligned pass/fail table.
#[derive(Debug, Clone)]
pub struct FixtureReport {
    pub rows: Vec<FixtureRow>,
}

impl FixtureReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name)
            .collect()
    }
}

impl fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>12} {:>14}  {:<6} {}",
            "check", "tolerance", "residual", "status", "detail"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<24} {:>8.1e} {:>3} {:>14.6e}  {:<6} {}",
                r.name,
                r.tolerance,
                r.kind.label(),
                r.residual,
                if r.pass { "PASS" } else { "FAIL" },
                r.detail
            )?;
        }
        let failing = self.failing();
        if failing.is_empty() {
            writeln!(f, "all checks passed")
        } else {
            writeln!(f, "failing: {}", failing.join(", "))
        }
    }
}

fn matrix_row(
    name: &'static str,
    computed: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    tolerance: f64,
) -> FixtureRow {
    let residual = if computed.shape() == reference.shape() {
        (computed - reference).amax()
    } else {
        f64::INFINITY
    };
    FixtureRow {
        name,
        kind: ToleranceKind::Absolute,
        tolerance,
        residual,
        pass: residual <= tolerance,
        detail: String::new(),
    }
}

fn scalar_row(
    name: &'static str,
    computed: f64,
    reference: f64,
    tolerance: f64,
    kind: ToleranceKind,
) -> FixtureRow {
    let residual = match kind {
        ToleranceKind::Absolute => (computed - reference).abs(),
        ToleranceKind::Relative => (computed - reference).abs() / reference.abs(),
    };
    FixtureRow {
        name,
        kind,
        tolerance,
        residual,
        pass: residual <= tolerance,
        detail: format!("computed {computed:.7} reference {reference:.7}"),
    }
}

/// Reference decomposition matrices at their printed 2-decimal precision.
pub fn reference_t() -> DMatrix<f64> {
    dmatrix![-1.0; -1.0; 0.0; -1.0]
}

pub fn reference_r() -> DMatrix<f64> {
    dmatrix![
        1.0, 0.0, 0.0, 0.0, -1.0;
        0.0, 1.0, 0.0, 0.0, -1.0;
        0.0, 0.0, 1.0, 0.0, 0.0;
        0.0, 0.0, 0.0, 1.0, -1.0
    ]
}

pub fn reference_l_hat_e() -> DMatrix<f64> {
    dmatrix![
        0.21, 0.09, 0.0, 0.09;
        -0.12, 0.24, 0.0, 0.0;
        0.0, -0.24, 0.44, 0.0;
        0.0, -0.24, 0.0, 0.43
    ]
}

pub fn reference_l_hat_o() -> DMatrix<f64> {
    dmatrix![
        0.12, 0.0, 0.0, 0.0, -0.09;
        -0.12, 0.24, 0.0, 0.0, 0.0;
        0.0, -0.24, 0.44, 0.0, 0.0;
        0.0, -0.24, 0.0, 0.43, 0.0
    ]
}

pub fn reference_h() -> DMatrix<f64> {
    dmatrix![
        2.47, 0.16, 0.07, -0.26;
        0.16, 2.86, 0.39, 0.45;
        0.07, 0.39, 1.14, -0.01;
        -0.26, 0.45, -0.01, 1.22
    ]
}

/// Reference certificate constants at their printed precision.
pub const REF_LAMBDA_MAX_P: f64 = 8.098;
pub const REF_LAMBDA_MIN_P: f64 = 0.6157;
pub const REF_NORM_P_LT1: f64 = 6.7121;
/// See the module docs: the formula gives 7.3282 s; this row fails honestly.
pub const REF_DWELL_T: f64 = 6.2597;
/// Frozen regression value (no printed reference exists for λ_min(Q)).
pub const REG_LAMBDA_MIN_Q: f64 = 0.878_255_539_045_299_3;

/// Recomputes all reference quantities from an arbitrary five-node variant
/// (the reference itself, or a perturbed copy for sensitivity tests).
pub fn verify_graph_against_reference(
    g: &DirectedGraph,
    tree_edges: &[usize],
    sigma: f64,
    epsilon: f64,
    quantizer: QuantizerConfig,
    n: usize,
) -> Result<FixtureReport> {
    let m = build_matrices(g);
    let d = decompose_with_tree(g, &m, tree_edges)?;

    let mut rows = vec![
        matrix_row("T", &d.t_matrix, &reference_t(), 0.005),
        matrix_row("R", &d.r_matrix, &reference_r(), 0.005),
        matrix_row("L_hat_e", &d.l_hat_e, &reference_l_hat_e(), 0.005),
        matrix_row("L_hat_O", &d.l_hat_o, &reference_l_hat_o(), 0.005),
    ];

    // A perturbed graph may make the certificate unbuildable (e.g. σ drops
    // below its floor). The report still renders: the certificate-dependent
    // rows fail with the reason instead of aborting the comparison.
    match build_certificate(&d, sigma, epsilon, quantizer, n) {
        Ok(cert) => {
            rows.push(matrix_row("H", &cert.h, &reference_h(), 0.01));
            rows.push(scalar_row(
                "lambda_max_p",
                cert.lambda_max_p,
                REF_LAMBDA_MAX_P,
                1e-3,
                ToleranceKind::Relative,
            ));
            rows.push(scalar_row(
                "lambda_min_p",
                cert.lambda_min_p,
                REF_LAMBDA_MIN_P,
                1e-3,
                ToleranceKind::Relative,
            ));
            rows.push(scalar_row(
                "norm_p_lt1",
                cert.norm_p_lt1,
                REF_NORM_P_LT1,
                1e-3,
                ToleranceKind::Relative,
            ));
            rows.push(scalar_row(
                "dwell_T",
                cert.dwell_t,
                REF_DWELL_T,
                1e-2,
                ToleranceKind::Absolute,
            ));
            rows.push(scalar_row(
                "lambda_min_q (regression)",
                cert.lambda_min_q,
                REG_LAMBDA_MIN_Q,
                1e-8,
                ToleranceKind::Relative,
            ));
        }
        Err(e) => {
            let reason = format!("certificate unavailable: {e}");
            for (name, tolerance, kind) in [
                ("H", 0.01, ToleranceKind::Absolute),
                ("lambda_max_p", 1e-3, ToleranceKind::Relative),
                ("lambda_min_p", 1e-3, ToleranceKind::Relative),
                ("norm_p_lt1", 1e-3, ToleranceKind::Relative),
                ("dwell_T", 1e-2, ToleranceKind::Absolute),
                ("lambda_min_q (regression)", 1e-8, ToleranceKind::Relative),
            ] {
                rows.push(FixtureRow {
                    name,
                    kind,
                    tolerance,
                    residual: f64::INFINITY,
                    pass: false,
                    detail: reason.clone(),
                });
            }
        }
    }
    Ok(FixtureReport { rows })
}

/// Recomputes everything from the shipped reference graph and compares
/// against the embedded values. The `dwell_T` row fails by design (see the
/// module docs); every other row passes.
pub fn verify_fixture() -> Result<FixtureReport> {
    let cfg = reference_config();
    let g = reference_graph();
    let tree: Vec<usize> = cfg
        .tree_edges
        .as_ref()
        .expect("embedded reference pins its tree")
        .iter()
        .map(|e| e - 1)
        .collect();
    let sigma = match cfg.sigma {
        SigmaChoice::Fixed(s) => s,
        SigmaChoice::Auto => {
            return Err(Error::Internal(
                "embedded reference must pin sigma".into(),
            ))
        }
    };
    let q = QuantizerConfig::new(cfg.delta, cfg.range_m)?;
    verify_graph_against_reference(&g, &tree, sigma, cfg.epsilon, q, cfg.n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_config_parses_to_the_reference_parameter_set() {
        let cfg = reference_config();
        assert_eq!(cfg.nodes, 5);
        assert_eq!(
            cfg.edges,
            vec![
                (1, 2, 0.12),
                (2, 3, 0.24),
                (3, 4, 0.44),
                (3, 5, 0.43),
                (5, 1, 0.09)
            ]
        );
        assert_eq!(cfg.tree_edges, Some(vec![1, 2, 3, 4]));
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.sigma, SigmaChoice::Fixed(1.64));
        assert_eq!(cfg.delta, 0.1);
        assert_eq!(cfg.range_m, 63.0);
        assert_eq!(cfg.epsilon, 0.75);
        assert_eq!(cfg.mu0, Some(10.0));
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn shipped_fixture_rows_behave_as_documented() {
        let report = verify_fixture().unwrap();
        assert_eq!(report.rows.len(), 10);
        // Every row except the dwell interval passes.
        assert_eq!(report.failing(), vec!["dwell_T"]);
        assert!(!report.all_pass());
        let dwell = report.rows.iter().find(|r| r.name == "dwell_T").unwrap();
        assert!((dwell.residual - 1.068_453_709_976_819).abs() < 1e-6);
        // Rendering smoke test: the table mentions both outcomes.
        let text = report.to_string();
        assert!(text.contains("PASS") && text.contains("FAIL"));
        assert!(text.contains("dwell_T"));
    }

    #[test]
    fn weight_perturbation_trips_the_h_row() {
        let cfg = reference_config();
        let mut edges = cfg.edges.clone();
        edges[1].2 *= 1.10; // +10% on the second weight
        let g = DirectedGraph::new(cfg.nodes, &edges).unwrap();
        let q = QuantizerConfig::new(cfg.delta, cfg.range_m).unwrap();
        let report =
            verify_graph_against_reference(&g, &[0, 1, 2, 3], 1.64, cfg.epsilon, q, cfg.n)
                .unwrap();
        let h = report.rows.iter().find(|r| r.name == "H").unwrap();
        assert!(!h.pass, "H must fail after a 10% weight perturbation");
        assert!(h.residual > 0.01);
    }

    #[test]
    fn tree_swap_trips_the_reduced_laplacian_rows() {
        let g = reference_graph();
        let cfg = reference_config();
        let q = QuantizerConfig::new(cfg.delta, cfg.range_m).unwrap();
        // Swap the tree/co-tree roles of the last two edges. The cycle
        // coefficients are symmetric under this exchange — the reference tree
        // writes e5 = −e1 − e2 + 0·e3 − e4 and the swapped tree writes
        // e4 = −e1 − e2 + 0·e3 − e5 — so T (and with it R) is numerically
        // invariant and must still PASS. The swap is visible in the reduced
        // edge matrices instead: the fourth row of the tree incidence block
        // changes, so L_hat_e and L_hat_O fail.
        let report =
            verify_graph_against_reference(&g, &[0, 1, 2, 4], 1.64, cfg.epsilon, q, cfg.n)
                .unwrap();
        let row = |name: &str| report.rows.iter().find(|r| r.name == name).unwrap();
        assert!(row("T").pass, "T is invariant under the e4/e5 swap");
        assert!(row("R").pass, "R is invariant under the e4/e5 swap");
        assert!(!row("L_hat_e").pass, "L_hat_e must expose the swap");
        assert!(!row("L_hat_O").pass, "L_hat_O must expose the swap");
    }
}
