//! Connectivity-preserving edge holdout for link prediction.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, GraphError};

/// Training subgraph plus held-out positive and negative pair lists.
#[derive(Clone, Debug)]
pub struct EdgeSplit {
    pub train_graph: Graph,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

/// Hold out `val_frac` and `test_frac` of the edges as positives, plus an
/// equal number of sampled non-edges as negatives.
///
/// A uniformly random spanning tree is drawn first and its edges are never
/// held out, so the training subgraph always stays connected. Held-out
/// positives are a uniform sample of the remaining edges.
pub fn split_edges(
    graph: &Graph,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> Result<EdgeSplit, GraphError> {
    if !graph.is_connected() {
        return Err(GraphError::NotConnected);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = graph.edges();
    let m = edges.len();
    let n_val = (val_frac * m as f64).floor() as usize;
    let n_test = (test_frac * m as f64).floor() as usize;

    let (val_pos, test_pos) = if n_val + n_test == 0 {
        (Vec::new(), Vec::new())
    } else {
        let tree: HashSet<(usize, usize)> = uniform_spanning_tree(graph, &mut rng).into_iter().collect();
        let mut removable: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|e| !tree.contains(e))
            .collect();
        if removable.len() < n_val + n_test {
            return Err(GraphError::SplitInfeasible {
                needed: n_val + n_test,
                available: removable.len(),
            });
        }
        removable.shuffle(&mut rng);
        let val: Vec<_> = removable[..n_val].to_vec();
        let test: Vec<_> = removable[n_val..n_val + n_test].to_vec();
        (val, test)
    };

    let mut train_adj = graph.adjacency().clone();
    for &(u, v) in val_pos.iter().chain(&test_pos) {
        train_adj.set(u, v, 0.0);
        train_adj.set(v, u, 0.0);
    }
    let mut train_graph = Graph::from_adjacency(train_adj)?;
    if let Some(f) = graph.features() {
        train_graph = train_graph.with_features(f.clone())?;
    }
    if let Some(l) = graph.labels() {
        train_graph = train_graph.with_labels(l.to_vec())?;
    }

    let val_neg = sample_non_edges(graph, n_val, &mut rng, &HashSet::new())?;
    let taken: HashSet<(usize, usize)> = val_neg.iter().copied().collect();
    let test_neg = sample_non_edges(graph, n_test, &mut rng, &taken)?;

    Ok(EdgeSplit { train_graph, val_pos, val_neg, test_pos, test_neg })
}

/// Wilson's loop-erased random walk; uniform over spanning trees.
fn uniform_spanning_tree(graph: &Graph, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = graph.n();
    let neighbors = graph.neighbor_lists();
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    let root = rng.random_range(0..n);
    in_tree[root] = true;
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for start in 0..n {
        if in_tree[start] {
            continue;
        }
        let mut u = start;
        while !in_tree[u] {
            next[u] = neighbors[u][rng.random_range(0..neighbors[u].len())];
            u = next[u];
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            let v = next[u];
            edges.push(if u < v { (u, v) } else { (v, u) });
            u = v;
        }
    }
    edges
}

fn sample_non_edges(
    graph: &Graph,
    count: usize,
    rng: &mut ChaCha8Rng,
    exclude: &HashSet<(usize, usize)>,
) -> Result<Vec<(usize, usize)>, GraphError> {
    let n = graph.n();
    let mut out = Vec::with_capacity(count);
    let mut chosen: HashSet<(usize, usize)> = HashSet::new();
    let budget = 1000 * count.max(1);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(GraphError::NegativeSamplingExhausted { needed: count });
        }
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let key = if u < v { (u, v) } else { (v, u) };
        if graph.has_edge(key.0, key.1) || chosen.contains(&key) || exclude.contains(&key) {
            continue;
        }
        chosen.insert(key);
        out.push(key);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen::{generate, GraphFamily};

    fn dense_test_graph(n: usize, seed: u64) -> Graph {
        // Connected ER-style graph with a guaranteed path backbone.
        let mut g = generate(GraphFamily::ErdosRenyi, n, seed).unwrap();
        loop {
            if g.is_connected() {
                return g;
            }
            g = generate(GraphFamily::ErdosRenyi, n, seed + 1000).unwrap();
        }
    }

    #[test]
    fn hundred_edge_graph_splits_five_ten_eightyfive() {
        let mut g = dense_test_graph(20, 1);
        let mut seed = 2u64;
        while g.num_edges() != 100 {
            g = dense_test_graph(20, seed);
            seed += 1;
        }
        let split = split_edges(&g, 0.05, 0.10, 9).unwrap();
        assert_eq!(split.val_pos.len(), 5);
        assert_eq!(split.test_pos.len(), 10);
        assert_eq!(split.train_graph.num_edges(), 85);
        assert_eq!(split.val_neg.len(), 5);
        assert_eq!(split.test_neg.len(), 10);
    }

    #[test]
    fn zero_fractions_leave_graph_untouched() {
        let g = dense_test_graph(12, 3);
        let split = split_edges(&g, 0.0, 0.0, 5).unwrap();
        assert_eq!(split.train_graph.adjacency(), g.adjacency());
        assert!(split.val_pos.is_empty() && split.test_pos.is_empty());
        assert!(split.val_neg.is_empty() && split.test_neg.is_empty());
    }

    #[test]
    fn negatives_are_non_edges_of_the_original_graph() {
        let g = dense_test_graph(16, 7);
        let split = split_edges(&g, 0.05, 0.10, 11).unwrap();
        for &(u, v) in split.val_neg.iter().chain(&split.test_neg) {
            assert!(!g.has_edge(u, v), "({u},{v}) is an edge");
            assert_ne!(u, v);
        }
    }

    #[test]
    fn train_graph_stays_connected_and_partitions_edges() {
        for seed in 0..10 {
            let g = dense_test_graph(18, 100 + seed);
            let split = split_edges(&g, 0.05, 0.10, seed).unwrap();
            assert!(split.train_graph.is_connected(), "seed {seed}");
            // Union of train edges and held-out positives is the original set.
            let mut union: Vec<(usize, usize)> = split.train_graph.edges();
            union.extend(&split.val_pos);
            union.extend(&split.test_pos);
            union.sort_unstable();
            let mut original = g.edges();
            original.sort_unstable();
            assert_eq!(union, original, "seed {seed}");
        }
    }

    #[test]
    fn all_five_sets_are_pairwise_disjoint() {
        let g = dense_test_graph(20, 21);
        let split = split_edges(&g, 0.10, 0.10, 13).unwrap();
        let mut all: Vec<(usize, usize)> = Vec::new();
        all.extend(split.train_graph.edges());
        all.extend(&split.val_pos);
        all.extend(&split.test_pos);
        all.extend(&split.val_neg);
        all.extend(&split.test_neg);
        let unique: HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
    }

    #[test]
    fn disconnected_input_is_rejected() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(split_edges(&g, 0.05, 0.10, 0), Err(GraphError::NotConnected)));
    }

    #[test]
    fn infeasible_split_is_an_error() {
        // A tree has no off-tree edges to remove.
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let err = split_edges(&g, 0.4, 0.4, 0).unwrap_err();
        assert!(matches!(err, GraphError::SplitInfeasible { .. }));
    }
}
