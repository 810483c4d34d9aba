//! Directed-graph machinery: incidence matrices, the directed edge Laplacian,
//! and the spanning-tree model reduction.
//!
//! For a digraph with `N` nodes and `L` weighted edges `e_k = (tail j, head i)`
//! (information flows j → i with weight `w_k > 0`):
//!
//! ```text
//!   E       N×L   incidence:     E[j,k] = +1 (tail), E[i,k] = −1 (head)
//!   E_in    N×L   in-incidence:  E_in[i,k] = −1 at the head only
//!   E_in_w  N×L   E_in·W,        W = diag(w_1 … w_L)
//!   L_G     N×N   graph Laplacian   E_in_w·Eᵀ
//!   L_e     L×L   edge  Laplacian   Eᵀ·E_in_w
//! ```
//!
//! `L_G` and `L_e` share their nonzero spectra, and when the graph is
//! quasi-strongly connected (it contains a directed spanning tree) `L_e` has
//! exactly `L−N+1` zero eigenvalues — the dimension of the flow space
//! (null space of `E`). Splitting the edges into spanning-tree columns `E_T`
//! and co-tree columns `E_C` gives the reduction
//!
//! ```text
//!   T = (E_Tᵀ·E_T)⁻¹·E_Tᵀ·E_C      (co-tree columns in tree coordinates)
//!   R = [I, T]                      so that  E·Π = E_T·R
//!   L̂_e = E_Tᵀ·E_in_w·Πᵀ·Rᵀ        essential edge Laplacian, (N−1)×(N−1)
//!   L̂_O = E_Tᵀ·E_in_w               tree-row input map, (N−1)×L
//! ```
//!
//! where `Π` is the tree-first column permutation. `L̂_e` carries every
//! nonzero eigenvalue of `L_e`, all in the open right half-plane; the
//! similarity transform `S_e = [Rᵀ, θ]` (with `θ` an orthonormal flow-space
//! basis) block-triangularizes `L_e` with `L̂_e` in the top-left corner and
//! zeros across the bottom rows. These identities are what the stability and
//! simulation modules rely on, and they are enforced here at construction
//! time.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::orthonormal_columns;

/// A weighted directed edge `tail → head` with 1-based node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
}

/// A validated weighted digraph. Node indices are 1-based (matching the
/// conventional presentation of the matrices); edge order is fixed at
/// construction and defines the column order of every derived matrix.
#[derive(Debug, Clone)]
pub struct DirectedGraph {
    node_count: usize,
    edges: Vec<Edge>,
}

impl DirectedGraph {
    /// Builds and validates a digraph from `(tail, head, weight)` triples.
    /// Rejects self-loops, out-of-range node indices, and nonpositive or
    /// non-finite weights, naming the offending edge (1-based).
    pub fn new(node_count: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        let mut edges = Vec::with_capacity(triples.len());
        for (k, &(tail, head, weight)) in triples.iter().enumerate() {
            let name = || format!("edge {} = ({}, {}, {})", k + 1, tail, head, weight);
            if tail < 1 || tail > node_count || head < 1 || head > node_count {
                return Err(Error::InvalidGraph(format!(
                    "{}: node index out of range 1..={}",
                    name(),
                    node_count
                )));
            }
            if tail == head {
                return Err(Error::InvalidGraph(format!("{}: self-loop", name())));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "{}: weight must be strictly positive and finite",
                    name()
                )));
            }
            edges.push(Edge { tail, head, weight });
        }
        Ok(DirectedGraph { node_count, edges })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
}

/// The five standard matrices derived from a digraph. Column `k` of `E`,
/// `E_in`, and `E_in_w` corresponds to edge `k` in the graph's edge order.
#[derive(Debug, Clone)]
pub struct GraphMatrices {
    /// `E`: +1 at the tail row, −1 at the head row of each edge column.
    pub incidence: DMatrix<f64>,
    /// `E_in`: −1 at the head row only.
    pub in_incidence: DMatrix<f64>,
    /// `E_in_w = E_in·W`.
    pub weighted_in_incidence: DMatrix<f64>,
    /// `L_G = E_in_w·Eᵀ` (N×N).
    pub graph_laplacian: DMatrix<f64>,
    /// `L_e = Eᵀ·E_in_w` (L×L).
    pub edge_laplacian: DMatrix<f64>,
}

/// Builds all derived matrices. Infallible because `DirectedGraph` is
/// validated at construction; the defining products hold exactly by
/// construction.
pub fn build_matrices(g: &DirectedGraph) -> GraphMatrices {
    let (n, l) = (g.node_count(), g.edge_count());
    let mut e = DMatrix::<f64>::zeros(n, l);
    let mut e_in = DMatrix::<f64>::zeros(n, l);
    let mut e_in_w = DMatrix::<f64>::zeros(n, l);
    for (k, edge) in g.edges().iter().enumerate() {
        e[(edge.tail - 1, k)] = 1.0;
        e[(edge.head - 1, k)] = -1.0;
        e_in[(edge.head - 1, k)] = -1.0;
        e_in_w[(edge.head - 1, k)] = -edge.weight;
    }
    let graph_laplacian = &e_in_w * e.transpose();
    let edge_laplacian = e.transpose() * &e_in_w;
    GraphMatrices {
        incidence: e,
        in_incidence: e_in,
        weighted_in_incidence: e_in_w,
        graph_laplacian,
        edge_laplacian,
    }
}

/// Nodes reachable from `root` (1-based) along directed edges.
fn reach_count(g: &DirectedGraph, root: usize) -> usize {
    let n = g.node_count();
    let mut seen = vec![false; n + 1];
    let mut queue = std::collections::VecDeque::new();
    seen[root] = true;
    queue.push_back(root);
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for edge in g.edges() {
            if edge.tail == u && !seen[edge.head] {
                seen[edge.head] = true;
                count += 1;
                queue.push_back(edge.head);
            }
        }
    }
    count
}

/// Returns the smallest node (1-based) that reaches every other node along
/// directed edges, if one exists. `Some(_)` iff the graph is quasi-strongly
/// connected (equivalently: it contains a directed spanning tree).
pub fn smallest_root(g: &DirectedGraph) -> Option<usize> {
    (1..=g.node_count()).find(|&r| reach_count(g, r) == g.node_count())
}

/// True iff some node reaches all others along directed edges.
pub fn is_quasi_strongly_connected(g: &DirectedGraph) -> bool {
    smallest_root(g).is_some()
}

/// Spanning-tree/co-tree partition with the reduction matrices.
///
/// Edge-space coordinates come in two orders and each field documents which
/// one it uses: the *original* order (the graph's edge list) and the
/// *permuted* order (tree edges first in discovery order, then co-tree edges
/// in original order — see [`TreeDecomposition::edge_order`]).
#[derive(Debug, Clone)]
pub struct TreeDecomposition {
    /// Root node (1-based) the tree was grown from.
    pub root: usize,
    /// Tree edge indices (0-based into the graph's edge list), discovery order.
    pub tree_edges: Vec<usize>,
    /// Co-tree edge indices (0-based), original order.
    pub cotree_edges: Vec<usize>,
    /// `T = (E_Tᵀ·E_T)⁻¹·E_Tᵀ·E_C`, (N−1)×(L−N+1): each co-tree column in
    /// tree-edge coordinates, satisfying `E_T·T = E_C`.
    pub t_matrix: DMatrix<f64>,
    /// `R = [I, T]`, (N−1)×L; columns in permuted edge order.
    pub r_matrix: DMatrix<f64>,
    /// Orthonormal flow-space basis, L×(L−N+1); rows in permuted edge order.
    /// Satisfies `E_perm·θ = 0` and `θᵀ·θ = I`; sign convention: the first
    /// nonzero entry of each column is positive.
    pub theta: DMatrix<f64>,
    /// Essential edge Laplacian `L̂_e = E_Tᵀ·E_in_w·Πᵀ·Rᵀ`, (N−1)×(N−1);
    /// carries exactly the nonzero eigenvalues of `L_e`.
    pub l_hat_e: DMatrix<f64>,
    /// `L̂_O = E_Tᵀ·E_in_w`, (N−1)×L; columns in **original** edge order.
    pub l_hat_o: DMatrix<f64>,
}

impl TreeDecomposition {
    /// The permuted edge order: original indices of tree edges (discovery
    /// order) followed by co-tree edges (original order).
    pub fn edge_order(&self) -> Vec<usize> {
        let mut order = self.tree_edges.clone();
        order.extend_from_slice(&self.cotree_edges);
        order
    }

    /// Gathers columns of an edge-indexed matrix into the permuted order.
    pub fn permute_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let order = self.edge_order();
        let mut out = DMatrix::zeros(m.nrows(), order.len());
        for (p, &orig) in order.iter().enumerate() {
            out.set_column(p, &m.column(orig));
        }
        out
    }

    /// Reorders a stacked edge-block vector (blocks of length `n`) from the
    /// original edge order into the permuted order.
    pub fn permute_edge_blocks(&self, y: &DVector<f64>, n: usize) -> DVector<f64> {
        let order = self.edge_order();
        let mut out = DVector::zeros(y.len());
        for (p, &orig) in order.iter().enumerate() {
            for d in 0..n {
                out[p * n + d] = y[orig * n + d];
            }
        }
        out
    }
}

/// Decomposes along the directed BFS tree grown from the smallest valid root;
/// tree edges are taken in discovery order. Errors when no directed spanning
/// tree exists.
pub fn decompose(g: &DirectedGraph, m: &GraphMatrices) -> Result<TreeDecomposition> {
    let root = smallest_root(g).ok_or(Error::NoSpanningTree)?;
    let mut seen = vec![false; g.node_count() + 1];
    let mut queue = std::collections::VecDeque::new();
    let mut tree_edges = Vec::with_capacity(g.node_count() - 1);
    seen[root] = true;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        for (k, edge) in g.edges().iter().enumerate() {
            if edge.tail == u && !seen[edge.head] {
                seen[edge.head] = true;
                tree_edges.push(k);
                queue.push_back(edge.head);
            }
        }
    }
    debug_assert_eq!(tree_edges.len(), g.node_count() - 1);
    decompose_from_tree(g, m, root, tree_edges)
}

/// Decomposes along an explicitly supplied tree-edge list (0-based indices,
/// in the order given). The list must select `N−1` distinct edges whose
/// incidence columns have full rank and reproduce the co-tree columns via
/// `E_T·T = E_C`; directedness of the subtree is not required (the reduction
/// identities need only the rank condition).
pub fn decompose_with_tree(
    g: &DirectedGraph,
    m: &GraphMatrices,
    tree_edges: &[usize],
) -> Result<TreeDecomposition> {
    let want = g.node_count() - 1;
    if tree_edges.len() != want {
        return Err(Error::InvalidTree(format!(
            "expected {} tree edges, got {}",
            want,
            tree_edges.len()
        )));
    }
    let mut used = vec![false; g.edge_count()];
    for &k in tree_edges {
        if k >= g.edge_count() {
            return Err(Error::InvalidTree(format!(
                "edge index {} out of range (graph has {} edges)",
                k + 1,
                g.edge_count()
            )));
        }
        if used[k] {
            return Err(Error::InvalidTree(format!("edge {} listed twice", k + 1)));
        }
        used[k] = true;
    }
    let root = smallest_root(g).ok_or(Error::NoSpanningTree)?;
    decompose_from_tree(g, m, root, tree_edges.to_vec())
}

/// Common construction once the tree-edge set is fixed.
fn decompose_from_tree(
    g: &DirectedGraph,
    m: &GraphMatrices,
    root: usize,
    tree_edges: Vec<usize>,
) -> Result<TreeDecomposition> {
    let n1 = g.node_count() - 1;
    let l = g.edge_count();
    let c = l - n1;
    let in_tree = {
        let mut mask = vec![false; l];
        for &k in &tree_edges {
            mask[k] = true;
        }
        mask
    };
    let cotree_edges: Vec<usize> = (0..l).filter(|&k| !in_tree[k]).collect();

    let gather = |cols: &[usize]| {
        let mut out = DMatrix::<f64>::zeros(g.node_count(), cols.len());
        for (p, &k) in cols.iter().enumerate() {
            out.set_column(p, &m.incidence.column(k));
        }
        out
    };
    let e_t = gather(&tree_edges);
    let e_c = gather(&cotree_edges);

    // T from the normal equations (E_Tᵀ·E_T is the tree's edge Gram matrix,
    // invertible exactly when the selected columns have full rank N−1).
    let gram = e_t.transpose() * &e_t;
    let rhs = e_t.transpose() * &e_c;
    let t_matrix = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidTree("selected edges do not span the graph".into()))?;
    let recon = &e_t * &t_matrix - &e_c;
    if recon.amax() > 1e-10 {
        return Err(Error::InvalidTree(format!(
            "selected edges are not a spanning tree: E_T*T - E_C deviates by {:.3e}",
            recon.amax()
        )));
    }

    let mut r_matrix = DMatrix::<f64>::zeros(n1, l);
    r_matrix.view_mut((0, 0), (n1, n1)).fill_with_identity();
    r_matrix.view_mut((0, n1), (n1, c)).copy_from(&t_matrix);

    // Flow-space basis from the cycle space: K = [−T; I] satisfies
    // E_perm·K = E_T·(−T) + E_C = 0 exactly, so orthonormalizing K keeps the
    // null-space identity at roundoff level (an eigen/SVD null basis of EᵀE
    // would only reach ~√eps).
    let mut k = DMatrix::<f64>::zeros(l, c);
    k.view_mut((0, 0), (n1, c)).copy_from(&(-&t_matrix));
    k.view_mut((n1, 0), (c, c)).fill_with_identity();
    let theta = orthonormal_columns(&k);

    let l_hat_o = e_t.transpose() * &m.weighted_in_incidence;
    // Permute L̂_O's columns tree-first before contracting with Rᵀ.
    let mut l_hat_o_perm = DMatrix::<f64>::zeros(n1, l);
    for (p, &orig) in tree_edges.iter().chain(cotree_edges.iter()).enumerate() {
        l_hat_o_perm.set_column(p, &l_hat_o.column(orig));
    }
    let l_hat_e = &l_hat_o_perm * r_matrix.transpose();

    Ok(TreeDecomposition {
        root,
        tree_edges,
        cotree_edges,
        t_matrix,
        r_matrix,
        theta,
        l_hat_e,
        l_hat_o,
    })
}

/// The four blocks of `S_e⁻¹·L_e·S_e` with `S_e = [Rᵀ, θ]` (permuted edge
/// order). For a valid decomposition the top-left block equals `L̂_e` and the
/// bottom two blocks vanish.
#[derive(Debug, Clone)]
pub struct SimilarityBlocks {
    pub top_left: DMatrix<f64>,
    pub top_right: DMatrix<f64>,
    pub bottom_left: DMatrix<f64>,
    pub bottom_right: DMatrix<f64>,
}

/// Conjugates the (permuted) edge Laplacian by `S_e = [Rᵀ, θ]`, using the
/// closed-form inverse `S_e⁻¹ = [(R·Rᵀ)⁻¹·R; θᵀ]` (valid because `R·θ = 0`).
pub fn similarity_blocks(m: &GraphMatrices, d: &TreeDecomposition) -> Result<SimilarityBlocks> {
    let n1 = d.tree_edges.len();
    let l = n1 + d.cotree_edges.len();
    let c = d.cotree_edges.len();

    let e_perm = d.permute_columns(&m.incidence);
    let e_in_w_perm = d.permute_columns(&m.weighted_in_incidence);
    let l_e_perm = e_perm.transpose() * &e_in_w_perm;

    let mut s = DMatrix::<f64>::zeros(l, l);
    s.view_mut((0, 0), (l, n1))
        .copy_from(&d.r_matrix.transpose());
    s.view_mut((0, n1), (l, c)).copy_from(&d.theta);

    let rrt = &d.r_matrix * d.r_matrix.transpose();
    let rrt_inv = rrt.try_inverse().ok_or_else(|| {
        Error::Internal("R*R^T is singular; decomposition is inconsistent".into())
    })?;
    let mut s_inv = DMatrix::<f64>::zeros(l, l);
    s_inv
        .view_mut((0, 0), (n1, l))
        .copy_from(&(&rrt_inv * &d.r_matrix));
    s_inv
        .view_mut((n1, 0), (c, l))
        .copy_from(&d.theta.transpose());

    let check = &s_inv * &s;
    if (check - DMatrix::<f64>::identity(l, l)).amax() > 1e-9 {
        return Err(Error::Internal(
            "S_e^{-1}·S_e deviates from identity beyond 1e-9".into(),
        ));
    }

    let transformed = s_inv * l_e_perm * s;
    Ok(SimilarityBlocks {
        top_left: transformed.view((0, 0), (n1, n1)).into_owned(),
        top_right: transformed.view((0, n1), (n1, c)).into_owned(),
        bottom_left: transformed.view((n1, 0), (c, n1)).into_owned(),
        bottom_right: transformed.view((n1, n1), (c, c)).into_owned(),
    })
}
