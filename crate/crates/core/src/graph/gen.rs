//! Synthetic graph generators for the six benchmark families.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, GraphError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFamily {
    ErdosRenyi,
    Ego,
    Regular,
    Geometric,
    PowerlawTree,
    BarabasiAlbert,
}

impl GraphFamily {
    pub const ALL: [GraphFamily; 6] = [
        GraphFamily::ErdosRenyi,
        GraphFamily::Ego,
        GraphFamily::Regular,
        GraphFamily::Geometric,
        GraphFamily::PowerlawTree,
        GraphFamily::BarabasiAlbert,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GraphFamily::ErdosRenyi => "erdos_renyi",
            GraphFamily::Ego => "ego",
            GraphFamily::Regular => "regular",
            GraphFamily::Geometric => "geometric",
            GraphFamily::PowerlawTree => "powerlaw_tree",
            GraphFamily::BarabasiAlbert => "barabasi_albert",
        }
    }
}

impl std::str::FromStr for GraphFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "erdos_renyi" => Ok(GraphFamily::ErdosRenyi),
            "ego" => Ok(GraphFamily::Ego),
            "regular" => Ok(GraphFamily::Regular),
            "geometric" => Ok(GraphFamily::Geometric),
            "powerlaw_tree" => Ok(GraphFamily::PowerlawTree),
            "barabasi_albert" => Ok(GraphFamily::BarabasiAlbert),
            other => Err(format!(
                "unknown graph family `{other}` (expected one of erdos_renyi, ego, regular, geometric, powerlaw_tree, barabasi_albert)"
            )),
        }
    }
}

impl std::fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Family parameters; defaults are the benchmark values.
#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    /// Edge probability for Erdos-Renyi and the ego base graph.
    pub er_edge_prob: f64,
    /// Degree of random regular graphs.
    pub regular_degree: usize,
    /// Connection radius for random geometric graphs on the unit square.
    pub geometric_radius: f64,
    /// Power-law exponent for the tree degree distribution.
    pub powerlaw_gamma: f64,
    /// Edges added per new node in preferential attachment.
    pub ba_attach: usize,
    /// Rejection retries for the pairing and tree constructions.
    pub retries: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            er_edge_prob: 0.5,
            regular_degree: 4,
            geometric_radius: 0.5,
            powerlaw_gamma: 3.0,
            ba_attach: 4,
            retries: 2000,
        }
    }
}

/// Sample one graph with the default family parameters.
pub fn generate(family: GraphFamily, n: usize, seed: u64) -> Result<Graph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with(family, n, &GenParams::default(), &mut rng)
}

pub fn generate_with(
    family: GraphFamily,
    n: usize,
    params: &GenParams,
    rng: &mut ChaCha8Rng,
) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::Empty);
    }
    match family {
        GraphFamily::ErdosRenyi => Ok(erdos_renyi(n, params.er_edge_prob, rng)),
        GraphFamily::Ego => Ok(ego(n, params.er_edge_prob, rng)),
        GraphFamily::Regular => regular(n, params.regular_degree, params.retries, rng),
        GraphFamily::Geometric => Ok(geometric_with_points(n, params.geometric_radius, rng).0),
        GraphFamily::PowerlawTree => powerlaw_tree(n, params.powerlaw_gamma, params.retries, rng),
        GraphFamily::BarabasiAlbert => barabasi_albert(n, params.ba_attach, params.retries, rng),
    }
}

fn erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("generated edges are in range")
}

/// Erdos-Renyi base graph with one uniformly chosen node wired to all others.
fn ego(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let base = erdos_renyi(n, p, rng);
    let hub = rng.random_range(0..n);
    let mut edges = base.edges();
    for v in 0..n {
        if v != hub {
            edges.push((hub, v));
        }
    }
    Graph::from_edges(n, &edges).expect("generated edges are in range")
}

/// Uniform random regular graph via the pairing (configuration) model with
/// rejection of self-loops and multi-edges.
fn regular(n: usize, degree: usize, retries: usize, rng: &mut ChaCha8Rng) -> Result<Graph, GraphError> {
    if n * degree % 2 != 0 || degree >= n {
        return Err(GraphError::InfeasibleRegular { n, degree });
    }
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
    'attempt: for _ in 0..retries {
        stubs.shuffle(rng);
        let mut adj = vec![false; n * n];
        let mut edges = Vec::with_capacity(n * degree / 2);
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || adj[u * n + v] {
                continue 'attempt;
            }
            adj[u * n + v] = true;
            adj[v * n + u] = true;
            edges.push((u, v));
        }
        return Ok(Graph::from_edges(n, &edges).expect("generated edges are in range"));
    }
    Err(GraphError::GeneratorRetriesExhausted { family: "regular", retries })
}

/// Random geometric graph; also returns the sampled points so the edge rule
/// can be re-checked externally.
pub fn geometric_with_points(n: usize, radius: f64, rng: &mut ChaCha8Rng) -> (Graph, Vec<[f64; 2]>) {
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let dx = points[u][0] - points[v][0];
            let dy = points[u][1] - points[v][1];
            if (dx * dx + dy * dy).sqrt() < radius {
                edges.push((u, v));
            }
        }
    }
    (Graph::from_edges(n, &edges).expect("generated edges are in range"), points)
}

/// Random tree whose degree sequence is drawn from p(d) proportional to
/// d^(-gamma), repaired to sum to 2(n-1), then realized with a shuffled
/// Pruefer sequence.
fn powerlaw_tree(n: usize, gamma: f64, retries: usize, rng: &mut ChaCha8Rng) -> Result<Graph, GraphError> {
    if n == 1 {
        return Graph::from_edges(1, &[]);
    }
    if n == 2 {
        return Graph::from_edges(2, &[(0, 1)]);
    }
    let max_degree = n - 1;
    let weights: Vec<f64> = (1..=max_degree).map(|d| (d as f64).powf(-gamma)).collect();
    let total: f64 = weights.iter().sum();
    let sample_degree = |rng: &mut ChaCha8Rng| -> usize {
        let mut u = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            u -= w;
            if u <= 0.0 {
                return i + 1;
            }
        }
        max_degree
    };

    for _ in 0..retries {
        let mut degrees: Vec<usize> = (0..n).map(|_| sample_degree(rng)).collect();
        let target = 2 * (n - 1);
        let mut budget = 100 * n * n;
        loop {
            let sum: usize = degrees.iter().sum();
            if sum == target {
                break;
            }
            if budget == 0 {
                break;
            }
            budget -= 1;
            let i = rng.random_range(0..n);
            if sum > target && degrees[i] > 1 {
                degrees[i] -= 1;
            } else if sum < target && degrees[i] < max_degree {
                degrees[i] += 1;
            }
        }
        if degrees.iter().sum::<usize>() != target {
            continue;
        }
        // Each node appears degree-1 times in the Pruefer sequence.
        let mut seq: Vec<usize> = degrees
            .iter()
            .enumerate()
            .flat_map(|(v, &d)| std::iter::repeat(v).take(d - 1))
            .collect();
        seq.shuffle(rng);
        return Ok(prufer_decode(n, &seq));
    }
    Err(GraphError::GeneratorRetriesExhausted { family: "powerlaw_tree", retries })
}

fn prufer_decode(n: usize, seq: &[usize]) -> Graph {
    debug_assert_eq!(seq.len(), n - 2);
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut used = vec![false; n];
    for &a in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1 && !used[v]).expect("a leaf always exists");
        edges.push((leaf, a));
        used[leaf] = true;
        degree[leaf] -= 1;
        degree[a] -= 1;
    }
    let mut rest = (0..n).filter(|&v| !used[v] && degree[v] == 1);
    let (u, v) = (rest.next().unwrap(), rest.next().unwrap());
    edges.push((u, v));
    Graph::from_edges(n, &edges).expect("generated edges are in range")
}

/// Preferential attachment starting from `m` isolated seed nodes; the first
/// attached node links to every seed, so the edge count is exactly (n-m)*m.
fn barabasi_albert(n: usize, m: usize, retries: usize, rng: &mut ChaCha8Rng) -> Result<Graph, GraphError> {
    if m == 0 || n <= m {
        return Err(GraphError::GeneratorRetriesExhausted { family: "barabasi_albert", retries: 0 });
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity((n - m) * m);
    // Endpoint pool for degree-proportional sampling.
    let mut pool: Vec<usize> = Vec::new();
    for s in 0..m {
        edges.push((m, s));
        pool.push(m);
        pool.push(s);
    }
    for v in (m + 1)..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        let mut attempts = 0usize;
        while targets.len() < m {
            let t = pool[rng.random_range(0..pool.len())];
            if !targets.contains(&t) {
                targets.push(t);
            } else {
                attempts += 1;
                if attempts > retries * m.max(1) * 100 {
                    return Err(GraphError::GeneratorRetriesExhausted {
                        family: "barabasi_albert",
                        retries,
                    });
                }
            }
        }
        for t in targets {
            edges.push((v, t));
            pool.push(v);
            pool.push(t);
        }
    }
    Graph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_graph_has_exact_degrees() {
        let g = generate(GraphFamily::Regular, 10, 3).unwrap();
        for i in 0..10 {
            assert_eq!(g.degree(i), 4.0);
        }
        assert_eq!(g.num_edges(), 20);
    }

    #[test]
    fn regular_rejects_odd_stub_count() {
        let params = GenParams { regular_degree: 3, ..GenParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = generate_with(GraphFamily::Regular, 5, &params, &mut rng).unwrap_err();
        assert!(matches!(err, GraphError::InfeasibleRegular { n: 5, degree: 3 }));
    }

    #[test]
    fn barabasi_albert_edge_count_is_deterministic() {
        for seed in 0..5 {
            let g = generate(GraphFamily::BarabasiAlbert, 20, seed).unwrap();
            assert_eq!(g.num_edges(), (20 - 4) * 4);
        }
    }

    #[test]
    fn erdos_renyi_mean_edges_matches_binomial() {
        let mut total = 0usize;
        for seed in 0..1000 {
            total += generate(GraphFamily::ErdosRenyi, 10, seed).unwrap().num_edges();
        }
        let mean = total as f64 / 1000.0;
        // E|E| = C(10,2) * 0.5 = 22.5.
        assert!((mean - 22.5).abs() < 1.5, "mean |E| = {mean}");
    }

    #[test]
    fn powerlaw_tree_is_a_tree() {
        for seed in 0..50 {
            let n = 10 + (seed as usize) % 11;
            let g = generate(GraphFamily::PowerlawTree, n, seed).unwrap();
            assert_eq!(g.num_edges(), n - 1, "seed {seed}");
            assert!(g.is_connected(), "seed {seed}");
        }
    }

    #[test]
    fn geometric_edges_match_distance_rule() {
        use rand::SeedableRng;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (g, points) = geometric_with_points(15, 0.5, &mut rng);
            for u in 0..15 {
                for v in (u + 1)..15 {
                    let dx = points[u][0] - points[v][0];
                    let dy = points[u][1] - points[v][1];
                    let within = (dx * dx + dy * dy).sqrt() < 0.5;
                    assert_eq!(g.has_edge(u, v), within, "seed {seed} pair ({u},{v})");
                }
            }
        }
    }

    #[test]
    fn ego_graph_has_a_universal_node() {
        for seed in 0..20 {
            let g = generate(GraphFamily::Ego, 12, seed).unwrap();
            assert!((0..12).any(|i| g.degree(i) == 11.0), "seed {seed}");
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        for family in GraphFamily::ALL {
            let a = generate(family, 14, 77).unwrap();
            let b = generate(family, 14, 77).unwrap();
            assert_eq!(a, b, "{family}");
        }
    }
}
