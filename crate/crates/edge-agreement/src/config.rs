//! Run-configuration grammar: a flat, line-oriented `key = value` format.
//!
//! ```text
//! # comment lines start with '#'; blank lines are ignored
//! nodes      = 5
//! edge       = 1 2 0.12        # tail head weight, repeatable, order fixed
//! tree_edges = 1 2 3 4         # optional 1-based edge numbers for the tree
//! n          = 3
//! sigma      = 1.64            # or "auto" = 1.05 × the certificate floor
//! delta      = 0.1
//! range      = 63
//! epsilon    = 0.75
//! mu0        = 10              # optional: skip zoom-out, start contracting
//! tau        = 1
//! gamma_out  = 2
//! dt         = 0.001
//! horizon    = 30
//! seed       = 42
//! kappa      = 10
//! floor      = 0.000001
//! out_dir    = out
//! ```
//!
//! Parsing is total over the input: every syntax and semantic problem is
//! collected (with its line number where one applies) and returned together,
//! never just the first. [`print_config`] renders a canonical form with a
//! fixed key order such that `parse_config(print_config(cfg)) == cfg`
//! exactly (float formatting is round-trip faithful).

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Coupling base selection: a fixed value or "auto" (5% above the
/// positive-definiteness floor computed from the Lyapunov solution).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaChoice {
    Auto,
    Fixed(f64),
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Node count N (nodes are numbered 1..=N in the file format).
    pub nodes: usize,
    /// Ordered `(tail, head, weight)` triples, 1-based node ids.
    pub edges: Vec<(usize, usize, f64)>,
    /// Optional explicit spanning-tree selection, 1-based edge numbers.
    pub tree_edges: Option<Vec<usize>>,
    /// Per-agent state dimension.
    pub n: usize,
    pub sigma: SigmaChoice,
    /// Quantization step parameter Δ.
    pub delta: f64,
    /// Quantization range M.
    pub range_m: f64,
    /// Ellipsoid margin ε.
    pub epsilon: f64,
    /// `Some(μ0)` selects the skip-zoom-out path.
    pub mu0: Option<f64>,
    /// Zoom-out tick interval (seconds).
    pub tau: f64,
    /// Zoom-out growth factor.
    pub gamma_out: f64,
    /// Integration step (seconds).
    pub dt: f64,
    /// Run horizon (seconds).
    pub horizon: f64,
    /// RNG seed for the default initial conditions.
    pub seed: u64,
    /// Convergence threshold multiplier κ.
    pub kappa: f64,
    /// Absolute convergence floor.
    pub floor: f64,
    /// Output directory for the emitted file set.
    pub out_dir: String,
}

impl RunConfig {
    /// The documented defaults for everything except the graph itself.
    fn with_graph(nodes: usize, edges: Vec<(usize, usize, f64)>) -> Self {
        RunConfig {
            nodes,
            edges,
            tree_edges: None,
            n: 1,
            sigma: SigmaChoice::Auto,
            delta: 0.1,
            range_m: 63.0,
            epsilon: 0.75,
            mu0: None,
            tau: 1.0,
            gamma_out: 2.0,
            dt: 1e-3,
            horizon: 30.0,
            seed: 0,
            kappa: 10.0,
            floor: 1e-6,
            out_dir: "out".to_string(),
        }
    }
}

/// Scalar keys that may appear at most once.
const SCALAR_KEYS: &[&str] = &[
    "nodes",
    "tree_edges",
    "n",
    "sigma",
    "delta",
    "range",
    "epsilon",
    "mu0",
    "tau",
    "gamma_out",
    "dt",
    "horizon",
    "seed",
    "kappa",
    "floor",
    "out_dir",
];

/// Parses the documented format, collecting **all** problems. On failure the
/// error carries one message per problem, each prefixed with `line N:` when
/// it belongs to a specific line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut errors: Vec<String> = Vec::new();
    let mut seen: Vec<(&str, usize)> = Vec::new();

    let mut nodes: Option<usize> = None;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut edge_lines: Vec<usize> = Vec::new();
    let mut tree_edges: Option<Vec<usize>> = None;
    let mut n: Option<usize> = None;
    let mut sigma: Option<SigmaChoice> = None;
    let mut delta: Option<f64> = None;
    let mut range_m: Option<f64> = None;
    let mut epsilon: Option<f64> = None;
    let mut mu0: Option<f64> = None;
    let mut tau: Option<f64> = None;
    let mut gamma_out: Option<f64> = None;
    let mut dt: Option<f64> = None;
    let mut horizon: Option<f64> = None;
    let mut seed: Option<u64> = None;
    let mut kappa: Option<f64> = None;
    let mut floor: Option<f64> = None;
    let mut out_dir: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // Strip a trailing comment introduced by whitespace + '#'.
        let line = match line.find(" #") {
            Some(pos) => line[..pos].trim_end(),
            None => line,
        };
        let Some((key_raw, value_raw)) = line.split_once('=') else {
            errors.push(format!("line {lineno}: expected 'key = value', got '{line}'"));
            continue;
        };
        let key = key_raw.trim();
        let value = value_raw.trim();

        if key != "edge" {
            if let Some(k) = SCALAR_KEYS.iter().find(|k| **k == key) {
                if let Some((_, first)) = seen.iter().find(|(s, _)| s == k) {
                    errors.push(format!(
                        "line {lineno}: duplicate key '{key}' (first set on line {first})"
                    ));
                    continue;
                }
                seen.push((k, lineno));
            }
        }

        let mut parse_f64 = |what: &str| -> Option<f64> {
            match value.parse::<f64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    errors.push(format!(
                        "line {lineno}: key '{what}': cannot parse '{value}' as a number"
                    ));
                    None
                }
            }
        };

        match key {
            "nodes" => match value.parse::<usize>() {
                Ok(v) => nodes = Some(v),
                Err(_) => errors.push(format!(
                    "line {lineno}: key 'nodes': cannot parse '{value}' as a positive integer"
                )),
            },
            "edge" => {
                let tokens: Vec<&str> = value.split_whitespace().collect();
                if tokens.len() != 3 {
                    errors.push(format!(
                        "line {lineno}: key 'edge': expected 'tail head weight', got '{value}'"
                    ));
                    continue;
                }
                let tail = tokens[0].parse::<usize>();
                let head = tokens[1].parse::<usize>();
                let weight = tokens[2].parse::<f64>();
                match (tail, head, weight) {
                    (Ok(t), Ok(h), Ok(w)) => {
                        edges.push((t, h, w));
                        edge_lines.push(lineno);
                    }
                    _ => errors.push(format!(
                        "line {lineno}: key 'edge': cannot parse '{value}' as 'tail head weight'"
                    )),
                }
            }
            "tree_edges" => {
                let mut parsed = Vec::new();
                let mut ok = true;
                for tok in value.split_whitespace() {
                    match tok.parse::<usize>() {
                        Ok(v) => parsed.push(v),
                        Err(_) => {
                            errors.push(format!(
                                "line {lineno}: key 'tree_edges': cannot parse '{tok}' as an edge number"
                            ));
                            ok = false;
                        }
                    }
                }
                if ok {
                    tree_edges = Some(parsed);
                }
            }
            "n" => match value.parse::<usize>() {
                Ok(v) => n = Some(v),
                Err(_) => errors.push(format!(
                    "line {lineno}: key 'n': cannot parse '{value}' as a positive integer"
                )),
            },
            "sigma" => {
                if value == "auto" {
                    sigma = Some(SigmaChoice::Auto);
                } else if let Some(v) = parse_f64("sigma") {
                    sigma = Some(SigmaChoice::Fixed(v));
                }
            }
            "delta" => delta = parse_f64("delta"),
            "range" => range_m = parse_f64("range"),
            "epsilon" => epsilon = parse_f64("epsilon"),
            "mu0" => mu0 = parse_f64("mu0"),
            "tau" => tau = parse_f64("tau"),
            "gamma_out" => gamma_out = parse_f64("gamma_out"),
            "dt" => dt = parse_f64("dt"),
            "horizon" => horizon = parse_f64("horizon"),
            "seed" => match value.parse::<u64>() {
                Ok(v) => seed = Some(v),
                Err(_) => errors.push(format!(
                    "line {lineno}: key 'seed': cannot parse '{value}' as an unsigned integer"
                )),
            },
            "kappa" => kappa = parse_f64("kappa"),
            "floor" => floor = parse_f64("floor"),
            "out_dir" => {
                if value.is_empty() {
                    errors.push(format!("line {lineno}: key 'out_dir': must not be empty"));
                } else {
                    out_dir = Some(value.to_string());
                }
            }
            other => errors.push(format!("line {lineno}: unknown key '{other}'")),
        }
    }

    // Required pieces.
    let nodes_v = match nodes {
        Some(v) if v >= 2 => v,
        Some(v) => {
            errors.push(format!("key 'nodes': need at least 2 nodes, got {v}"));
            0
        }
        None => {
            errors.push("missing required key 'nodes'".to_string());
            0
        }
    };
    if edges.is_empty() {
        errors.push("at least one 'edge' line is required".to_string());
    }

    // Per-edge semantics (only when the node count itself made sense).
    if nodes_v >= 2 {
        for (i, ((t, h, w), line)) in edges.iter().zip(&edge_lines).enumerate() {
            let id = i + 1;
            if *t < 1 || *t > nodes_v || *h < 1 || *h > nodes_v {
                errors.push(format!(
                    "line {line}: edge {id} = ({t}, {h}, {w}): node ids must lie in [1, {nodes_v}]"
                ));
            }
            if t == h {
                errors.push(format!(
                    "line {line}: edge {id} = ({t}, {h}, {w}): self-loops are not allowed"
                ));
            }
            if !(*w > 0.0) || !w.is_finite() {
                errors.push(format!(
                    "line {line}: edge {id} = ({t}, {h}, {w}): weight must be strictly positive"
                ));
            }
        }
        if let Some(te) = &tree_edges {
            let l = edges.len();
            if te.len() != nodes_v - 1 {
                errors.push(format!(
                    "key 'tree_edges': a spanning tree of {nodes_v} nodes needs {} edges, got {}",
                    nodes_v - 1,
                    te.len()
                ));
            }
            for &e in te {
                if e < 1 || e > l {
                    errors.push(format!(
                        "key 'tree_edges': edge number {e} out of range [1, {l}]"
                    ));
                }
            }
            let mut sorted = te.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != te.len() {
                errors.push("key 'tree_edges': edge numbers must be distinct".to_string());
            }
        }
    }

    let mut cfg = RunConfig::with_graph(nodes_v, edges);
    cfg.tree_edges = tree_edges;
    if let Some(v) = n {
        cfg.n = v;
    }
    if let Some(v) = sigma {
        cfg.sigma = v;
    }
    if let Some(v) = delta {
        cfg.delta = v;
    }
    if let Some(v) = range_m {
        cfg.range_m = v;
    }
    if let Some(v) = epsilon {
        cfg.epsilon = v;
    }
    cfg.mu0 = mu0;
    if let Some(v) = tau {
        cfg.tau = v;
    }
    if let Some(v) = gamma_out {
        cfg.gamma_out = v;
    }
    if let Some(v) = dt {
        cfg.dt = v;
    }
    if let Some(v) = horizon {
        cfg.horizon = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if let Some(v) = kappa {
        cfg.kappa = v;
    }
    if let Some(v) = floor {
        cfg.floor = v;
    }
    if let Some(v) = out_dir {
        cfg.out_dir = v;
    }

    // Cross-field semantics.
    let mut need = |ok: bool, msg: String| {
        if !ok {
            errors.push(msg);
        }
    };
    need(cfg.n >= 1, "key 'n': state dimension must be ≥ 1".into());
    if let SigmaChoice::Fixed(s) = cfg.sigma {
        need(
            s > 0.0 && s.is_finite(),
            format!("key 'sigma': must be > 0 or 'auto', got {s}"),
        );
    }
    need(
        cfg.delta > 0.0 && cfg.delta.is_finite(),
        format!("key 'delta': must be > 0, got {}", cfg.delta),
    );
    need(
        cfg.range_m > cfg.delta && cfg.range_m.is_finite(),
        format!(
            "key 'range': must exceed delta = {}, got {}",
            cfg.delta, cfg.range_m
        ),
    );
    need(
        cfg.epsilon > 0.0 && cfg.epsilon.is_finite(),
        format!("key 'epsilon': must be > 0, got {}", cfg.epsilon),
    );
    if let Some(m) = cfg.mu0 {
        need(
            m > 0.0 && m.is_finite(),
            format!("key 'mu0': must be > 0, got {m}"),
        );
    }
    need(
        cfg.tau > 0.0 && cfg.tau.is_finite(),
        format!("key 'tau': must be > 0, got {}", cfg.tau),
    );
    need(
        cfg.gamma_out > 1.0 && cfg.gamma_out.is_finite(),
        format!("key 'gamma_out': must be > 1, got {}", cfg.gamma_out),
    );
    need(
        cfg.dt > 0.0 && cfg.dt.is_finite(),
        format!("key 'dt': must be > 0, got {}", cfg.dt),
    );
    need(
        cfg.horizon > 0.0 && cfg.horizon.is_finite(),
        format!("key 'horizon': must be > 0, got {}", cfg.horizon),
    );
    need(
        cfg.kappa >= 0.0 && cfg.kappa.is_finite(),
        format!("key 'kappa': must be ≥ 0, got {}", cfg.kappa),
    );
    need(
        cfg.floor >= 0.0 && cfg.floor.is_finite(),
        format!("key 'floor': must be ≥ 0, got {}", cfg.floor),
    );

    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

/// Renders the canonical form: fixed key order, one edge per line, optional
/// keys omitted when unset. `parse_config(print_config(cfg)) == cfg`.
pub fn print_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "nodes = {}", cfg.nodes);
    for (t, h, w) in &cfg.edges {
        let _ = writeln!(s, "edge = {t} {h} {w}");
    }
    if let Some(te) = &cfg.tree_edges {
        let list = te
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(s, "tree_edges = {list}");
    }
    let _ = writeln!(s, "n = {}", cfg.n);
    match cfg.sigma {
        SigmaChoice::Auto => {
            let _ = writeln!(s, "sigma = auto");
        }
        SigmaChoice::Fixed(v) => {
            let _ = writeln!(s, "sigma = {v}");
        }
    }
    let _ = writeln!(s, "delta = {}", cfg.delta);
    let _ = writeln!(s, "range = {}", cfg.range_m);
    let _ = writeln!(s, "epsilon = {}", cfg.epsilon);
    if let Some(m) = cfg.mu0 {
        let _ = writeln!(s, "mu0 = {m}");
    }
    let _ = writeln!(s, "tau = {}", cfg.tau);
    let _ = writeln!(s, "gamma_out = {}", cfg.gamma_out);
    let _ = writeln!(s, "dt = {}", cfg.dt);
    let _ = writeln!(s, "horizon = {}", cfg.horizon);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "kappa = {}", cfg.kappa);
    let _ = writeln!(s, "floor = {}", cfg.floor);
    let _ = writeln!(s, "out_dir = {}", cfg.out_dir);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let cfg = parse_config("nodes = 2\nedge = 1 2 0.5\n").unwrap();
        assert_eq!(cfg.nodes, 2);
        assert_eq!(cfg.edges, vec![(1, 2, 0.5)]);
        assert_eq!(cfg.tree_edges, None);
        assert_eq!(cfg.n, 1);
        assert_eq!(cfg.sigma, SigmaChoice::Auto);
        assert_eq!(cfg.delta, 0.1);
        assert_eq!(cfg.range_m, 63.0);
        assert_eq!(cfg.epsilon, 0.75);
        assert_eq!(cfg.mu0, None);
        assert_eq!(cfg.tau, 1.0);
        assert_eq!(cfg.gamma_out, 2.0);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.horizon, 30.0);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.kappa, 10.0);
        assert_eq!(cfg.floor, 1e-6);
        assert_eq!(cfg.out_dir, "out");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# experiment\n\nnodes = 2\nedge = 1 2 0.5  # the only edge\n\n# done\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.edges, vec![(1, 2, 0.5)]);
    }

    #[test]
    fn zero_weight_error_names_the_edge_and_line() {
        let err = parse_config("nodes = 3\nedge = 1 2 0.5\nedge = 2 3 0\n").unwrap_err();
        match err {
            crate::Error::Config(msgs) => {
                assert!(
                    msgs.iter().any(|m| m.contains("line 3") && m.contains("edge 2")),
                    "got {msgs:?}"
                );
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn all_problems_are_collected_not_just_the_first() {
        let text = "nodes = 1\nedge = 1 1 -2\nwat = 7\ndt = 0\ndt = 1\nbroken line\n";
        let err = parse_config(text).unwrap_err();
        match err {
            crate::Error::Config(msgs) => {
                let all = msgs.join("\n");
                assert!(all.contains("at least 2 nodes"), "{all}");
                assert!(all.contains("unknown key 'wat'"), "{all}");
                assert!(all.contains("duplicate key 'dt'"), "{all}");
                assert!(all.contains("expected 'key = value'"), "{all}");
                assert!(msgs.len() >= 5, "{msgs:?}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tree_edges_are_validated() {
        let base = "nodes = 3\nedge = 1 2 0.5\nedge = 2 3 0.5\nedge = 1 3 0.5\n";
        let ok = parse_config(&format!("{base}tree_edges = 1 2\n")).unwrap();
        assert_eq!(ok.tree_edges, Some(vec![1, 2]));
        for bad in ["tree_edges = 1\n", "tree_edges = 1 9\n", "tree_edges = 2 2\n"] {
            assert!(
                parse_config(&format!("{base}{bad}")).is_err(),
                "{bad} should be rejected"
            );
        }
    }

    #[test]
    fn hand_round_trip_with_optional_fields() {
        let text = "nodes = 5\nedge = 1 2 0.12\nedge = 2 3 0.24\nedge = 3 4 0.44\n\
                    edge = 3 5 0.43\nedge = 5 1 0.09\ntree_edges = 1 2 3 4\nn = 3\n\
                    sigma = 1.64\nmu0 = 10\nhorizon = 80\nseed = 42\nkappa = 0.01\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.sigma, SigmaChoice::Fixed(1.64));
        assert_eq!(cfg.mu0, Some(10.0));
        let reparsed = parse_config(&print_config(&cfg)).unwrap();
        assert_eq!(cfg, reparsed);
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (2usize..6)
            .prop_flat_map(|nodes| {
                let edge = (1..=nodes, 1..=nodes, 0.05f64..1.0).prop_map(move |(t, h, w)| {
                    if t == h {
                        (t, h % nodes + 1, w)
                    } else {
                        (t, h, w)
                    }
                });
                (
                    Just(nodes),
                    prop::collection::vec(edge, 1..8),
                    1usize..4,
                    prop_oneof![
                        Just(SigmaChoice::Auto),
                        (1.0f64..3.0).prop_map(SigmaChoice::Fixed)
                    ],
                    (0.01f64..0.5, 1.0f64..100.0, 0.05f64..2.0),
                    (prop::option::of(0.1f64..100.0), 0.1f64..5.0, 1.1f64..4.0),
                    (1e-4f64..1e-2, 1.0f64..100.0, prop::num::u64::ANY),
                    (0.0f64..20.0, 0.0f64..1e-3, "[a-z][a-z0-9_]{0,7}"),
                )
            })
            .prop_filter_map(
                "range must exceed delta",
                |(
                    nodes,
                    edges,
                    n,
                    sigma,
                    (delta, range_m, epsilon),
                    (mu0, tau, gamma_out),
                    (dt, horizon, seed),
                    (kappa, floor, out_dir),
                )| {
                    if range_m <= delta {
                        return None;
                    }
                    let mut cfg = RunConfig::with_graph(nodes, edges);
                    cfg.n = n;
                    cfg.sigma = sigma;
                    cfg.delta = delta;
                    cfg.range_m = range_m;
                    cfg.epsilon = epsilon;
                    cfg.mu0 = mu0;
                    cfg.tau = tau;
                    cfg.gamma_out = gamma_out;
                    cfg.dt = dt;
                    cfg.horizon = horizon;
                    cfg.seed = seed;
                    cfg.kappa = kappa;
                    cfg.floor = floor;
                    cfg.out_dir = out_dir;
                    Some(cfg)
                },
            )
    }

    proptest! {
        #[test]
        fn prop_print_parse_round_trip(cfg in arb_config()) {
            let printed = print_config(&cfg);
            let reparsed = parse_config(&printed).expect("canonical form must parse");
            prop_assert_eq!(cfg, reparsed);
        }
    }
}
