//! Graph representation and structural utilities: symmetric normalization,
//! connected components, dummy-node padding, synthetic generators, edge
//! splits, and a Weisfeiler-Lehman isomorphism heuristic.

pub mod gen;
pub mod split;
pub mod wl;

use thiserror::Error;

use crate::tensor::Mat;

pub use gen::{generate, generate_with, GenParams, GraphFamily};
pub use split::{split_edges, EdgeSplit};
pub use wl::{wl_test, WlOutcome, WlVerdict};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GraphError {
    #[error("adjacency must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("edge ({u},{v}) out of range for {n} nodes")]
    EdgeOutOfRange { u: usize, v: usize, n: usize },
    #[error("feature matrix has {rows} rows for {n} nodes")]
    FeatureRowMismatch { rows: usize, n: usize },
    #[error("label vector has {len} entries for {n} nodes")]
    LabelLenMismatch { len: usize, n: usize },
    #[error("cannot pad {n} nodes down to {n_max}")]
    PadTooSmall { n: usize, n_max: usize },
    #[error("graph is empty")]
    Empty,
    #[error("regular graph with n={n}, degree={degree} is infeasible (n*d odd)")]
    InfeasibleRegular { n: usize, degree: usize },
    #[error("{family} generator exhausted its retry budget ({retries} attempts)")]
    GeneratorRetriesExhausted { family: &'static str, retries: usize },
    #[error("edge split infeasible: need {needed} removable edges, only {available} off-tree edges")]
    SplitInfeasible { needed: usize, available: usize },
    #[error("negative sampling exhausted its retry budget ({needed} non-edges requested)")]
    NegativeSamplingExhausted { needed: usize },
    #[error("graph must be connected for this operation")]
    NotConnected,
}

/// Undirected graph over dense storage: symmetric adjacency with zero
/// diagonal, optional node features, optional per-node class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: Mat,
    features: Option<Mat>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Build from an undirected edge list; duplicates and self-loops are
    /// dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adjacency = Mat::zeros(n, n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::EdgeOutOfRange { u, v, n });
            }
            if u == v {
                continue;
            }
            adjacency.set(u, v, 1.0);
            adjacency.set(v, u, 1.0);
        }
        Ok(Graph { n, adjacency, features: None, labels: None })
    }

    /// Wrap an existing adjacency matrix. The matrix must be square and
    /// symmetric; the diagonal is zeroed.
    pub fn from_adjacency(mut adjacency: Mat) -> Result<Self, GraphError> {
        let (rows, cols) = adjacency.shape();
        if rows != cols {
            return Err(GraphError::NotSquare { rows, cols });
        }
        for i in 0..rows {
            for j in (i + 1)..cols {
                if adjacency.get(i, j) != adjacency.get(j, i) {
                    return Err(GraphError::NotSymmetric { i, j });
                }
            }
            adjacency.set(i, i, 0.0);
        }
        Ok(Graph { n: rows, adjacency, features: None, labels: None })
    }

    pub fn with_features(mut self, features: Mat) -> Result<Self, GraphError> {
        if features.rows() != self.n {
            return Err(GraphError::FeatureRowMismatch { rows: features.rows(), n: self.n });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, GraphError> {
        if labels.len() != self.n {
            return Err(GraphError::LabelLenMismatch { len: labels.len(), n: self.n });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }

    pub fn features(&self) -> Option<&Mat> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency.row(i).iter().sum()
    }

    /// Undirected edges (u < v) with nonzero weight.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.adjacency.get(u, v) != 0.0 {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        let mut count = 0;
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.adjacency.get(u, v) != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.get(u, v) != 0.0
    }

    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|u| (0..self.n).filter(|&v| self.adjacency.get(u, v) != 0.0).collect())
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        component_of(self, 0).len() == self.n
    }

    /// Induced subgraph on `keep` (in the given order), slicing features and
    /// labels along with the adjacency.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Graph {
        let m = keep.len();
        let mut adjacency = Mat::zeros(m, m);
        for (a, &u) in keep.iter().enumerate() {
            for (b, &v) in keep.iter().enumerate() {
                adjacency.set(a, b, self.adjacency.get(u, v));
            }
        }
        let features = self.features.as_ref().map(|f| {
            let mut out = Mat::zeros(m, f.cols());
            for (a, &u) in keep.iter().enumerate() {
                out.row_mut(a).copy_from_slice(f.row(u));
            }
            out
        });
        let labels = self.labels.as_ref().map(|l| keep.iter().map(|&u| l[u]).collect());
        Graph { n: m, adjacency, features, labels }
    }
}

fn component_of(graph: &Graph, start: usize) -> Vec<usize> {
    let mut seen = vec![false; graph.n];
    let mut stack = vec![start];
    let mut out = Vec::new();
    seen[start] = true;
    while let Some(u) = stack.pop() {
        out.push(u);
        for v in 0..graph.n {
            if !seen[v] && graph.adjacency.get(u, v) != 0.0 {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Symmetric degree normalization `D^{-1/2} A D^{-1/2}`. Zero-degree nodes
/// get all-zero rows and columns (their `D^{-1/2}` entry is taken as 0), so
/// isolated and dummy nodes exchange no messages.
pub fn normalize_sym(adjacency: &Mat) -> Mat {
    let n = adjacency.rows();
    debug_assert_eq!(n, adjacency.cols());
    let mut inv_sqrt = vec![0.0; n];
    for i in 0..n {
        let deg: f64 = adjacency.row(i).iter().sum();
        if deg > 0.0 {
            inv_sqrt[i] = 1.0 / deg.sqrt();
        }
    }
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        let si = inv_sqrt[i];
        if si == 0.0 {
            continue;
        }
        let row_in = adjacency.row(i);
        let row_out = out.row_mut(i);
        for j in 0..n {
            let a = row_in[j];
            if a != 0.0 {
                row_out[j] = si * a * inv_sqrt[j];
            }
        }
    }
    out
}

/// `normalize_sym` after adding self-loops (`A + I`), the renormalized
/// propagation variant.
pub fn normalize_sym_self_loops(adjacency: &Mat) -> Mat {
    let n = adjacency.rows();
    let mut with_loops = adjacency.clone();
    for i in 0..n {
        with_loops.set(i, i, with_loops.get(i, i) + 1.0);
    }
    normalize_sym(&with_loops)
}

/// Largest connected component as an induced subgraph. Ties are broken in
/// favor of the component containing the smallest original node index.
pub fn largest_connected_component(graph: &Graph) -> Result<Graph, GraphError> {
    if graph.n == 0 {
        return Err(GraphError::Empty);
    }
    let mut seen = vec![false; graph.n];
    let mut best: Option<Vec<usize>> = None;
    for start in 0..graph.n {
        if seen[start] {
            continue;
        }
        let comp = component_of(graph, start);
        for &u in &comp {
            seen[u] = true;
        }
        // Scanning starts from index 0, so the first component of a given
        // size wins the tie (smallest minimum index).
        let better = match &best {
            None => true,
            Some(b) => comp.len() > b.len(),
        };
        if better {
            best = Some(comp);
        }
    }
    Ok(graph.induced_subgraph(&best.expect("non-empty graph has a component")))
}

/// Extend to `n_max` nodes with disconnected dummy nodes: zero adjacency
/// rows/columns, zero feature rows.
pub fn pad_with_dummy_nodes(graph: &Graph, n_max: usize) -> Result<Graph, GraphError> {
    if graph.n > n_max {
        return Err(GraphError::PadTooSmall { n: graph.n, n_max });
    }
    if graph.n == n_max {
        return Ok(graph.clone());
    }
    let mut adjacency = Mat::zeros(n_max, n_max);
    for i in 0..graph.n {
        adjacency.row_mut(i)[..graph.n].copy_from_slice(graph.adjacency.row(i));
    }
    let features = graph.features.as_ref().map(|f| {
        let mut out = Mat::zeros(n_max, f.cols());
        for i in 0..graph.n {
            out.row_mut(i).copy_from_slice(f.row(i));
        }
        out
    });
    let labels = graph.labels.as_ref().map(|l| {
        let mut out = l.clone();
        out.resize(n_max, 0);
        out
    });
    Ok(Graph { n: n_max, adjacency, features, labels })
}
