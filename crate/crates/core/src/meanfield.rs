//! Numerical check that a suitably instantiated message-passing layer
//! reproduces the first-order Taylor approximation of mean-field embedding
//! updates.
//!
//! The update operator maps the vector of neighboring embeddings to a new
//! embedding. Its first-order expansion around zero is `O(0) + N . grad O(0)`,
//! and the equivalent layer uses identity activation, per-node bias `O(0)`,
//! unit weight, and one scaled-adjacency transformation per neighbor slot.
//! Test operators are supplied explicitly (linear, sine-sum, quadratic,
//! logistic-of-sum) rather than derived from graphical-model potentials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::gnn::{gnn_layer, Activation, GnnLayer};
use crate::graph::Graph;
use crate::tensor::{Mat, Tape, TensorError};

/// Smooth map from an n-vector of neighbor embeddings to a scalar embedding.
#[derive(Debug, Clone)]
pub enum UpdateOperator {
    /// offset + sum_j coef_j x_j
    Linear { offset: f64, coefs: Vec<f64> },
    /// sum_j coef_j sin(x_j)
    SineSum { coefs: Vec<f64> },
    /// offset + sum_j lin_j x_j + sum_j quad_j x_j^2
    Quadratic { offset: f64, lin: Vec<f64>, quad: Vec<f64> },
    /// logistic(offset + sum_j coef_j x_j)
    LogisticSum { offset: f64, coefs: Vec<f64> },
}

impl UpdateOperator {
    pub fn name(&self) -> &'static str {
        match self {
            UpdateOperator::Linear { .. } => "linear",
            UpdateOperator::SineSum { .. } => "sine_sum",
            UpdateOperator::Quadratic { .. } => "quadratic",
            UpdateOperator::LogisticSum { .. } => "logistic_sum",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            UpdateOperator::Linear { coefs, .. }
            | UpdateOperator::SineSum { coefs }
            | UpdateOperator::LogisticSum { coefs, .. } => coefs.len(),
            UpdateOperator::Quadratic { lin, .. } => lin.len(),
        }
    }

    pub fn eval(&self, neighbors: &[f64]) -> f64 {
        match self {
            UpdateOperator::Linear { offset, coefs } => {
                let mut acc = *offset;
                for (&c, &x) in coefs.iter().zip(neighbors) {
                    acc += c * x;
                }
                acc
            }
            UpdateOperator::SineSum { coefs } => {
                let mut acc = 0.0;
                for (&c, &x) in coefs.iter().zip(neighbors) {
                    acc += c * x.sin();
                }
                acc
            }
            UpdateOperator::Quadratic { offset, lin, quad } => {
                let mut acc = *offset;
                for ((&b, &a), &x) in lin.iter().zip(quad).zip(neighbors) {
                    acc += b * x + a * x * x;
                }
                acc
            }
            UpdateOperator::LogisticSum { offset, coefs } => {
                let mut acc = *offset;
                for (&c, &x) in coefs.iter().zip(neighbors) {
                    acc += c * x;
                }
                crate::tensor::sigmoid(acc)
            }
        }
    }

    pub fn value_at_zero(&self) -> f64 {
        self.eval(&vec![0.0; self.arity()])
    }

    /// Closed-form gradient at the origin.
    pub fn grad_at_zero(&self) -> Vec<f64> {
        match self {
            UpdateOperator::Linear { coefs, .. } => coefs.clone(),
            UpdateOperator::SineSum { coefs } => coefs.clone(), // cos(0) = 1
            UpdateOperator::Quadratic { lin, .. } => lin.clone(),
            UpdateOperator::LogisticSum { offset, coefs } => {
                let s = crate::tensor::sigmoid(*offset);
                coefs.iter().map(|c| c * s * (1.0 - s)).collect()
            }
        }
    }

    /// Central-difference gradient at the origin, for operators without a
    /// usable closed form.
    pub fn grad_at_zero_numeric(&self, epsilon: f64) -> Vec<f64> {
        let n = self.arity();
        let mut point = vec![0.0; n];
        (0..n)
            .map(|j| {
                point[j] = epsilon;
                let plus = self.eval(&point);
                point[j] = -epsilon;
                let minus = self.eval(&point);
                point[j] = 0.0;
                (plus - minus) / (2.0 * epsilon)
            })
            .collect()
    }
}

/// Vector of neighboring embeddings for node `i`: entry j is the embedding
/// of j when `A_ij` is nonzero and zero otherwise.
pub fn neighbor_vector(adjacency: &Mat, embeddings: &[f64], i: usize) -> Vec<f64> {
    (0..embeddings.len())
        .map(|j| if adjacency.get(i, j) != 0.0 { embeddings[j] } else { 0.0 })
        .collect()
}

/// One synchronous mean-field embedding sweep: every node's embedding
/// becomes the operator applied to its neighbor vector.
pub fn mf_embedding_update(operator: &UpdateOperator, adjacency: &Mat, embeddings: &[f64]) -> Vec<f64> {
    (0..embeddings.len())
        .map(|i| operator.eval(&neighbor_vector(adjacency, embeddings, i)))
        .collect()
}

/// First-order expansion around the origin: `O(0) + N . grad O(0)`.
pub fn taylor_first_order(operator: &UpdateOperator, neighbor_vec: &[f64]) -> f64 {
    let grad = operator.grad_at_zero();
    let mut dot = 0.0;
    for (&n, &g) in neighbor_vec.iter().zip(&grad) {
        dot += n * g;
    }
    operator.value_at_zero() + dot
}

/// The explicit layer instantiation equivalent to the first-order update:
/// identity activation, per-node bias `O(0)`, unit weight, and one
/// transformation per neighbor slot scaling that slot's adjacency column by
/// the matching partial derivative.
pub struct ConstructedGnn {
    pub operators: Vec<Mat>,
    pub bias: Mat,
    pub weight: Mat,
    pub activation: Activation,
}

pub fn construct_equivalent_gnn(operator: &UpdateOperator, adjacency: &Mat) -> ConstructedGnn {
    let n = adjacency.rows();
    let grad = operator.grad_at_zero();
    let operators = (0..n)
        .map(|j| {
            let mut f = Mat::zeros(n, n);
            for i in 0..n {
                f.set(i, j, grad[j] * adjacency.get(i, j));
            }
            f
        })
        .collect();
    ConstructedGnn {
        operators,
        bias: Mat::filled(n, 1, operator.value_at_zero()),
        weight: Mat::scalar(1.0),
        activation: Activation::Identity,
    }
}

impl ConstructedGnn {
    /// Run the constructed layer on the current embeddings.
    pub fn apply(&self, embeddings: &[f64]) -> Result<Vec<f64>, TensorError> {
        let tape = Tape::new();
        let ops: Vec<_> = self.operators.iter().map(|m| tape.constant(m.clone())).collect();
        let h = tape.constant(Mat::from_vec(embeddings.len(), 1, embeddings.to_vec()));
        let layer = GnnLayer {
            weight: tape.constant(self.weight.clone()),
            bias: Some(tape.constant(self.bias.clone())),
            activation: self.activation,
        };
        let out = gnn_layer(&ops, Some(&h), &layer)?;
        Ok(out.value().data().to_vec())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RemainderPoint {
    pub scale: f64,
    pub max_abs_remainder: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub operator: String,
    pub nodes: usize,
    /// Worst-case |constructed layer - first-order expansion| over nodes.
    pub max_abs_diff_vs_taylor: f64,
    /// |exact update - expansion| at successively halved embeddings.
    pub remainders: Vec<RemainderPoint>,
    /// Remainder ratios between successive scales (about 4 for quadratic
    /// operators).
    pub remainder_ratios: Vec<f64>,
}

/// Verify the layer/expansion equality and measure how the expansion
/// remainder decays as the embeddings shrink.
pub fn check_theorem(
    operator: &UpdateOperator,
    adjacency: &Mat,
    embeddings: &[f64],
) -> Result<TheoremReport, TensorError> {
    let n = embeddings.len();
    let constructed = construct_equivalent_gnn(operator, adjacency);
    let gnn_out = constructed.apply(embeddings)?;
    let mut max_diff = 0.0f64;
    for i in 0..n {
        let taylor = taylor_first_order(operator, &neighbor_vector(adjacency, embeddings, i));
        max_diff = max_diff.max((gnn_out[i] - taylor).abs());
    }

    let scales = [1.0, 0.5, 0.25];
    let mut remainders = Vec::with_capacity(scales.len());
    for &scale in &scales {
        let scaled: Vec<f64> = embeddings.iter().map(|&v| v * scale).collect();
        let exact = mf_embedding_update(operator, adjacency, &scaled);
        let mut worst = 0.0f64;
        for i in 0..n {
            let taylor = taylor_first_order(operator, &neighbor_vector(adjacency, &scaled, i));
            worst = worst.max((exact[i] - taylor).abs());
        }
        remainders.push(RemainderPoint { scale, max_abs_remainder: worst });
    }
    let remainder_ratios = remainders
        .windows(2)
        .filter(|w| w[1].max_abs_remainder > 0.0)
        .map(|w| w[0].max_abs_remainder / w[1].max_abs_remainder)
        .collect();

    Ok(TheoremReport {
        operator: operator.name().to_string(),
        nodes: n,
        max_abs_diff_vs_taylor: max_diff,
        remainders,
        remainder_ratios,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub trials: usize,
    pub max_abs_diff_vs_taylor: f64,
    pub quadratic_ratio_min: f64,
    pub quadratic_ratio_max: f64,
    pub reports: Vec<TheoremReport>,
}

fn random_operator(kind: usize, n: usize, rng: &mut ChaCha8Rng) -> UpdateOperator {
    let coefs = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>();
    match kind % 4 {
        0 => UpdateOperator::Linear { offset: rng.random::<f64>() - 0.5, coefs: coefs(rng) },
        1 => UpdateOperator::SineSum { coefs: coefs(rng) },
        2 => UpdateOperator::Quadratic {
            offset: rng.random::<f64>() - 0.5,
            lin: coefs(rng),
            quad: (0..n).map(|_| rng.random::<f64>() + 0.2).collect(),
        },
        _ => UpdateOperator::LogisticSum { offset: rng.random::<f64>() + 0.5, coefs: coefs(rng) },
    }
}

/// Randomized sweep over graphs and operators of every kind.
pub fn run_theorem_suite(trials: usize, seed: u64) -> Result<SuiteReport, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(trials);
    let mut max_diff = 0.0f64;
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = f64::NEG_INFINITY;
    for trial in 0..trials {
        let n = 4 + trial % 5;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < 0.5 {
                    edges.push((u, v));
                }
            }
        }
        let graph = Graph::from_edges(n, &edges).expect("edges in range");
        let embeddings: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let operator = random_operator(trial, n, &mut rng);
        let report = check_theorem(&operator, graph.adjacency(), &embeddings)?;
        max_diff = max_diff.max(report.max_abs_diff_vs_taylor);
        if matches!(operator, UpdateOperator::Quadratic { .. }) {
            for &r in &report.remainder_ratios {
                ratio_min = ratio_min.min(r);
                ratio_max = ratio_max.max(r);
            }
        }
        reports.push(report);
    }
    Ok(SuiteReport {
        trials,
        max_abs_diff_vs_taylor: max_diff,
        quadratic_ratio_min: ratio_min,
        quadratic_ratio_max: ratio_max,
        reports,
    })
}

/// The vector-valued extension: embeddings of width d, a shared per-neighbor
/// Jacobian at the origin, and the single-transformation layer
/// `A . M . J(0)^T + bias`.
pub mod vector {
    use super::*;

    /// Smooth map from summed neighbor embeddings to a d-vector.
    pub enum VectorOperator {
        /// value0 + J . sum_j N_j
        Affine { value0: Vec<f64>, jac: Mat },
        /// tanh(pre + J . sum_j N_j), elementwise
        TanhSum { pre: Vec<f64>, jac: Mat },
    }

    impl VectorOperator {
        pub fn dim(&self) -> usize {
            match self {
                VectorOperator::Affine { value0, .. } => value0.len(),
                VectorOperator::TanhSum { pre, .. } => pre.len(),
            }
        }

        pub fn eval(&self, neighbors: &Mat) -> Vec<f64> {
            let d = self.dim();
            let mut summed = vec![0.0; d];
            for i in 0..neighbors.rows() {
                for (s, &v) in summed.iter_mut().zip(neighbors.row(i)) {
                    *s += v;
                }
            }
            match self {
                VectorOperator::Affine { value0, jac } => (0..d)
                    .map(|r| {
                        let mut acc = value0[r];
                        for c in 0..d {
                            acc += jac.get(r, c) * summed[c];
                        }
                        acc
                    })
                    .collect(),
                VectorOperator::TanhSum { pre, jac } => (0..d)
                    .map(|r| {
                        let mut acc = pre[r];
                        for c in 0..d {
                            acc += jac.get(r, c) * summed[c];
                        }
                        acc.tanh()
                    })
                    .collect(),
            }
        }

        pub fn value_at_zero(&self) -> Vec<f64> {
            match self {
                VectorOperator::Affine { value0, .. } => value0.clone(),
                VectorOperator::TanhSum { pre, .. } => pre.iter().map(|v| v.tanh()).collect(),
            }
        }

        /// Jacobian with respect to any single neighbor embedding, at zero.
        pub fn jacobian_at_zero(&self) -> Mat {
            match self {
                VectorOperator::Affine { jac, .. } => jac.clone(),
                VectorOperator::TanhSum { pre, jac } => {
                    let d = pre.len();
                    let mut out = Mat::zeros(d, d);
                    for r in 0..d {
                        let t = pre[r].tanh();
                        let scale = 1.0 - t * t;
                        for c in 0..d {
                            out.set(r, c, scale * jac.get(r, c));
                        }
                    }
                    out
                }
            }
        }
    }

    /// Neighbor matrix for node `i`: row j is embedding j masked by `A_ij`.
    pub fn neighbor_matrix(adjacency: &Mat, embeddings: &Mat, i: usize) -> Mat {
        let mut out = Mat::zeros(embeddings.rows(), embeddings.cols());
        for j in 0..embeddings.rows() {
            if adjacency.get(i, j) != 0.0 {
                out.row_mut(j).copy_from_slice(embeddings.row(j));
            }
        }
        out
    }

    pub fn taylor_first_order(operator: &VectorOperator, neighbors: &Mat) -> Vec<f64> {
        let jac = operator.jacobian_at_zero();
        let d = operator.dim();
        let mut out = operator.value_at_zero();
        for j in 0..neighbors.rows() {
            let row = neighbors.row(j);
            for (r, o) in out.iter_mut().enumerate().take(d) {
                let mut acc = 0.0;
                for c in 0..d {
                    acc += jac.get(r, c) * row[c];
                }
                *o += acc;
            }
        }
        out
    }

    /// Layer equivalent for the vector case: `A . M . J(0)^T + bias`, where
    /// rows of the bias are the operator value at zero.
    pub fn constructed_update(operator: &VectorOperator, adjacency: &Mat, embeddings: &Mat) -> Result<Mat, TensorError> {
        let n = embeddings.rows();
        let d = operator.dim();
        let tape = Tape::new();
        let op = tape.constant(adjacency.clone());
        let h = tape.constant(embeddings.clone());
        let value0 = operator.value_at_zero();
        let mut bias = Mat::zeros(n, d);
        for i in 0..n {
            bias.row_mut(i).copy_from_slice(&value0);
        }
        let layer = GnnLayer {
            weight: tape.constant(operator.jacobian_at_zero().transpose()),
            bias: Some(tape.constant(bias)),
            activation: Activation::Identity,
        };
        Ok((*gnn_layer(std::slice::from_ref(&op), Some(&h), &layer)?.value()).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen::{generate, GraphFamily};

    fn c3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn neighbor_vector_of_isolated_node_is_zero() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let nv = neighbor_vector(g.adjacency(), &[1.0, 2.0, 3.0], 2);
        assert_eq!(nv, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn neighbor_vector_on_complete_graph_sees_all_others() {
        let g = c3();
        let nv = neighbor_vector(g.adjacency(), &[1.0, 2.0, 3.0], 0);
        assert_eq!(nv, vec![0.0, 2.0, 3.0]);
    }

    #[test]
    fn neighbor_vector_of_star_center_has_three_entries() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let nv = neighbor_vector(g.adjacency(), &[9.0, 1.0, 2.0, 3.0], 0);
        assert_eq!(nv.iter().filter(|&&v| v != 0.0).count(), 3);
    }

    #[test]
    fn constant_operator_floods_all_nodes() {
        let g = c3();
        let op = UpdateOperator::Linear { offset: 2.5, coefs: vec![0.0; 3] };
        let next = mf_embedding_update(&op, g.adjacency(), &[1.0, 2.0, 3.0]);
        assert_eq!(next, vec![2.5, 2.5, 2.5]);
    }

    #[test]
    fn sum_operator_on_triangle_matches_hand_result() {
        let g = c3();
        let op = UpdateOperator::Linear { offset: 0.0, coefs: vec![1.0; 3] };
        let next = mf_embedding_update(&op, g.adjacency(), &[1.0, 2.0, 3.0]);
        assert_eq!(next, vec![5.0, 4.0, 3.0]);
    }

    #[test]
    fn non_neighbors_never_influence_updates() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let op = UpdateOperator::LogisticSum { offset: 0.3, coefs: vec![0.7, -1.1, 0.4, 0.9] };
        let base = mf_embedding_update(&op, g.adjacency(), &[0.1, 0.2, 0.3, 0.4]);
        // Node 3 is not adjacent to node 0; perturbing embedding 3 must not
        // change node 0's update.
        let perturbed = mf_embedding_update(&op, g.adjacency(), &[0.1, 0.2, 0.3, 40.0]);
        assert_eq!(base[0], perturbed[0]);
        assert_ne!(base[2], perturbed[2]);
    }

    #[test]
    fn taylor_of_linear_operator_is_exact() {
        let op = UpdateOperator::Linear { offset: 1.0, coefs: vec![2.0, -1.0, 0.5] };
        let nv = vec![0.3, 0.7, -0.2];
        assert_eq!(taylor_first_order(&op, &nv), op.eval(&nv));
    }

    #[test]
    fn taylor_of_sine_sum_reduces_to_weighted_sum() {
        let op = UpdateOperator::SineSum { coefs: vec![1.0, 1.0, 1.0] };
        let nv = vec![0.1, 0.2, 0.3];
        assert!((taylor_first_order(&op, &nv) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn taylor_at_origin_is_value_at_zero() {
        let op = UpdateOperator::LogisticSum { offset: 0.8, coefs: vec![1.0, 2.0] };
        assert_eq!(taylor_first_order(&op, &[0.0, 0.0]), op.value_at_zero());
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let ops = [
            UpdateOperator::Linear { offset: 0.2, coefs: vec![1.0, -2.0, 0.3] },
            UpdateOperator::SineSum { coefs: vec![0.4, 1.5, -0.7] },
            UpdateOperator::Quadratic { offset: 0.1, lin: vec![0.5, -0.25, 2.0], quad: vec![1.0, 0.5, 0.25] },
            UpdateOperator::LogisticSum { offset: 0.9, coefs: vec![-1.0, 0.6, 1.2] },
        ];
        for op in &ops {
            let analytic = op.grad_at_zero();
            let numeric = op.grad_at_zero_numeric(1e-6);
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!((a - n).abs() < 1e-8, "{}: {a} vs {n}", op.name());
            }
        }
    }

    #[test]
    fn constructed_layer_equals_taylor_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..20 {
            let n = 4 + trial % 5;
            let g = generate(GraphFamily::ErdosRenyi, n, trial as u64).unwrap();
            let embeddings: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let op = random_operator(trial, n, &mut rng);
            let constructed = construct_equivalent_gnn(&op, g.adjacency());
            let out = constructed.apply(&embeddings).unwrap();
            for i in 0..n {
                let taylor = taylor_first_order(&op, &neighbor_vector(g.adjacency(), &embeddings, i));
                assert!((out[i] - taylor).abs() <= 1e-12, "trial {trial} node {i}");
            }
        }
    }

    #[test]
    fn linear_operator_constructed_layer_equals_exact_update() {
        let g = generate(GraphFamily::ErdosRenyi, 6, 9).unwrap();
        let op = UpdateOperator::Linear { offset: 0.4, coefs: vec![1.0, -0.5, 0.25, 2.0, -1.5, 0.75] };
        let embeddings = vec![0.3, -0.6, 0.9, 0.1, -0.2, 0.5];
        let constructed = construct_equivalent_gnn(&op, g.adjacency());
        let layer_out = constructed.apply(&embeddings).unwrap();
        let exact = mf_embedding_update(&op, g.adjacency(), &embeddings);
        for (a, b) in layer_out.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn quadratic_remainder_shrinks_fourfold_under_halving() {
        let g = c3();
        let op = UpdateOperator::Quadratic { offset: 0.0, lin: vec![0.0; 3], quad: vec![1.0, 2.0, 0.5] };
        let report = check_theorem(&op, g.adjacency(), &[0.8, -0.6, 0.4]).unwrap();
        assert!(report.max_abs_diff_vs_taylor <= 1e-12);
        for ratio in &report.remainder_ratios {
            assert!((3.5..=4.5).contains(ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn affine_operator_has_zero_remainder() {
        let g = c3();
        let op = UpdateOperator::Linear { offset: 0.7, coefs: vec![1.0, 2.0, 3.0] };
        let report = check_theorem(&op, g.adjacency(), &[0.5, -0.25, 0.75]).unwrap();
        for point in &report.remainders {
            assert!(point.max_abs_remainder <= 1e-12);
        }
    }

    #[test]
    fn suite_equality_holds_over_many_trials() {
        let suite = run_theorem_suite(40, 7).unwrap();
        assert!(suite.max_abs_diff_vs_taylor <= 1e-12, "{}", suite.max_abs_diff_vs_taylor);
        assert!(suite.quadratic_ratio_min >= 3.5 && suite.quadratic_ratio_max <= 4.5);
    }

    #[test]
    fn vector_extension_equality() {
        use super::vector::*;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..10 {
            let n = 5;
            let d = 3;
            let g = generate(GraphFamily::ErdosRenyi, n, 100 + trial).unwrap();
            let embeddings = Mat::from_vec(n, d, (0..n * d).map(|_| rng.random::<f64>() - 0.5).collect());
            let jac = Mat::from_vec(d, d, (0..d * d).map(|_| rng.random::<f64>() - 0.5).collect());
            let op = if trial % 2 == 0 {
                VectorOperator::Affine { value0: vec![0.1, -0.2, 0.3], jac }
            } else {
                VectorOperator::TanhSum { pre: vec![0.4, -0.1, 0.6], jac }
            };
            let layer_out = constructed_update(&op, g.adjacency(), &embeddings).unwrap();
            for i in 0..n {
                let taylor = taylor_first_order(&op, &neighbor_matrix(g.adjacency(), &embeddings, i));
                for (c, &t) in taylor.iter().enumerate() {
                    assert!((layer_out.get(i, c) - t).abs() <= 1e-12, "trial {trial} node {i}");
                }
            }
        }
    }
}
