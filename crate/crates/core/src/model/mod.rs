//! The Graphite model family: GNN encoder, iterative inner-product /
//! message-passing decoder, variational and autoencoding objectives.
//!
//! GAE and VGAE are the zero-refinement special case: no decoder
//! parameters, a single inner-product readout, and (for GAE) no sampling.

pub mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnn::{gnn_forward, Activation, GnnLayer, GnnLayerSpec};
use crate::graph::{normalize_sym, normalize_sym_self_loops, Graph};
use crate::tensor::{
    bce_with_logits_sum, sampled_gram_bce, Bound, Mat, ParamStore, Tensor, TensorError,
};

#[derive(Error, Debug)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GraphiteVae,
    GraphiteAe,
    Vgae,
    Gae,
}

impl ModelKind {
    pub fn is_variational(&self) -> bool {
        matches!(self, ModelKind::GraphiteVae | ModelKind::Vgae)
    }

    /// Whether the decoder has learnable refinement layers.
    pub fn has_refinement(&self) -> bool {
        matches!(self, ModelKind::GraphiteVae | ModelKind::GraphiteAe)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::GraphiteVae => "graphite-vae",
            ModelKind::GraphiteAe => "graphite-ae",
            ModelKind::Vgae => "vgae",
            ModelKind::Gae => "gae",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graphite-vae" | "graphite_vae" => Ok(ModelKind::GraphiteVae),
            "graphite-ae" | "graphite_ae" => Ok(ModelKind::GraphiteAe),
            "vgae" => Ok(ModelKind::Vgae),
            "gae" => Ok(ModelKind::Gae),
            other => Err(format!(
                "unknown model `{other}` (expected graphite-vae, graphite-ae, vgae, gae)"
            )),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the initial and refined embeddings are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    /// (1 - lambda) Z + lambda Z*
    Convex,
    /// Z + lambda Z* / ||Z*||_F
    Incremental,
}

impl std::str::FromStr for SkipMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "convex" => Ok(SkipMode::Convex),
            "incremental" => Ok(SkipMode::Incremental),
            other => Err(format!("unknown skip mode `{other}` (expected convex or incremental)")),
        }
    }
}

/// Reading of the similarity normalization in the intermediate graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityNorm {
    /// Per-row unit normalization: cosine similarity plus one. Default.
    RowCosine,
    /// Single global Frobenius-norm divisor.
    GlobalFrobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationModel {
    /// Logistic edge probabilities; cross-entropy reconstruction.
    Bernoulli,
    /// Real-valued edges; squared-error reconstruction scaled by the fixed
    /// noise variance.
    Gaussian { noise_scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Width of the input activations: the feature dimension, or the node
    /// count when featureless (identity input).
    pub input_dim: usize,
    pub featureless: bool,
    /// Hidden widths of the shared encoder trunk.
    pub encoder_hidden: Vec<usize>,
    /// Embedding width produced by the encoder heads.
    pub latent_dim: usize,
    /// Hidden widths of the (round-shared) decoder refinement network; its
    /// output width is always `latent_dim`.
    pub decoder_hidden: Vec<usize>,
    /// Refinement rounds. Forced to zero for VGAE/GAE.
    pub refine_rounds: usize,
    pub lambda: f64,
    pub skip_mode: SkipMode,
    /// Merge after every round (successively induced embeddings) instead of
    /// once at the end.
    pub skip_per_round: bool,
    /// Hidden width of an optional two-layer dense network applied to the
    /// sampled embedding before decoding.
    pub dense_head_hidden: Option<usize>,
    pub observation: ObservationModel,
    pub similarity: SimilarityNorm,
    /// Add self-loops before degree normalization.
    pub renormalize: bool,
    /// Treat diagonal entries as present edges in reconstruction targets.
    pub include_diagonal: bool,
}

impl ModelConfig {
    /// Architecture used for link prediction: 32-32 encoder trunk, width-16
    /// embeddings, two refinement rounds through a 32-unit hidden layer.
    pub fn link_prediction(kind: ModelKind, input_dim: usize, featureless: bool) -> Self {
        let refinement = kind.has_refinement();
        ModelConfig {
            kind,
            input_dim,
            featureless,
            encoder_hidden: vec![32, 32],
            latent_dim: 16,
            decoder_hidden: if refinement { vec![32] } else { vec![] },
            refine_rounds: if refinement { 2 } else { 0 },
            lambda: 0.5,
            skip_mode: SkipMode::Convex,
            skip_per_round: false,
            dense_head_hidden: None,
            observation: ObservationModel::Bernoulli,
            similarity: SimilarityNorm::RowCosine,
            renormalize: false,
            include_diagonal: true,
        }
    }

    /// Architecture used for whole-graph density estimation on graphs padded
    /// to `n_max` nodes: featureless identity input, a dense head on the
    /// sampled embedding, and per-round convex merging across the
    /// successively induced embeddings.
    pub fn density_estimation(kind: ModelKind, n_max: usize) -> Self {
        let refinement = kind.has_refinement();
        ModelConfig {
            kind,
            input_dim: n_max,
            featureless: true,
            encoder_hidden: vec![32],
            latent_dim: 16,
            decoder_hidden: if refinement { vec![32] } else { vec![] },
            refine_rounds: if refinement { 2 } else { 0 },
            lambda: 0.5,
            skip_mode: SkipMode::Convex,
            skip_per_round: true,
            dense_head_hidden: Some(32),
            observation: ObservationModel::Bernoulli,
            similarity: SimilarityNorm::RowCosine,
            renormalize: false,
            include_diagonal: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_dim == 0 || self.latent_dim == 0 {
            return Err(ModelError::Config("dimensions must be positive".into()));
        }
        if self.encoder_hidden.iter().chain(&self.decoder_hidden).any(|&d| d == 0) {
            return Err(ModelError::Config("hidden widths must be positive".into()));
        }
        if !self.kind.has_refinement() && self.refine_rounds != 0 {
            return Err(ModelError::Config(format!(
                "{} admits no refinement rounds",
                self.kind
            )));
        }
        if matches!(self.skip_mode, SkipMode::Convex) && !(0.0..=1.0).contains(&self.lambda) {
            return Err(ModelError::Config(format!(
                "convex skip needs lambda in [0,1], got {}",
                self.lambda
            )));
        }
        if let ObservationModel::Gaussian { noise_scale } = self.observation {
            if noise_scale <= 0.0 {
                return Err(ModelError::Config("gaussian noise scale must be positive".into()));
            }
        }
        Ok(())
    }

    /// Feature width seen by the decoder concatenation (zero when
    /// featureless: the identity input conditions the encoder only).
    fn decoder_feature_dim(&self) -> usize {
        if self.featureless {
            0
        } else {
            self.input_dim
        }
    }

    fn encoder_specs(&self) -> Vec<GnnLayerSpec> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.encoder_hidden);
        dims.windows(2)
            .map(|w| GnnLayerSpec::new(w[0], w[1], Activation::Relu))
            .collect()
    }

    fn decoder_specs(&self) -> Vec<GnnLayerSpec> {
        let mut dims = vec![self.latent_dim + self.decoder_feature_dim()];
        dims.extend(&self.decoder_hidden);
        dims.push(self.latent_dim);
        let last = dims.len() - 2;
        dims.windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Identity } else { Activation::Relu };
                GnnLayerSpec::new(w[0], w[1], act)
            })
            .collect()
    }
}

/// Per-node Gaussian posterior: mean and (clamped) log standard deviation.
pub struct LatentPosterior {
    pub mu: Tensor,
    pub log_sigma: Tensor,
}

impl LatentPosterior {
    pub fn sigma(&self) -> Result<Tensor, TensorError> {
        self.log_sigma.exp()
    }
}

/// Clamp bound for log standard deviations.
pub const LOG_SIGMA_CLAMP: f64 = 10.0;

/// Parameterized model: configuration plus named weight matrices.
pub struct GraphiteModel {
    config: ModelConfig,
    params: ParamStore,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let scale = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect())
}

impl GraphiteModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (i, spec) in config.encoder_specs().iter().enumerate() {
            params.insert(format!("enc.trunk{i}.w"), glorot(&mut rng, spec.in_dim, spec.out_dim));
            params.insert(format!("enc.trunk{i}.b"), Mat::zeros(1, spec.out_dim));
        }
        let trunk_out = *config.encoder_hidden.last().unwrap_or(&config.input_dim);
        params.insert("enc.mu.w", glorot(&mut rng, trunk_out, config.latent_dim));
        params.insert("enc.mu.b", Mat::zeros(1, config.latent_dim));
        if config.kind.is_variational() {
            params.insert("enc.logsig.w", glorot(&mut rng, trunk_out, config.latent_dim));
            params.insert("enc.logsig.b", Mat::zeros(1, config.latent_dim));
        }
        if let Some(hidden) = config.dense_head_hidden {
            params.insert("head0.w", glorot(&mut rng, config.latent_dim, hidden));
            params.insert("head0.b", Mat::zeros(1, hidden));
            params.insert("head1.w", glorot(&mut rng, hidden, config.latent_dim));
            params.insert("head1.b", Mat::zeros(1, config.latent_dim));
        }
        if config.refine_rounds > 0 {
            for (i, spec) in config.decoder_specs().iter().enumerate() {
                params.insert(format!("dec{i}.w"), glorot(&mut rng, spec.in_dim, spec.out_dim));
                params.insert(format!("dec{i}.b"), Mat::zeros(1, spec.out_dim));
            }
        }
        Ok(GraphiteModel { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(GraphiteModel { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Degree-normalized propagation operator for a graph, honoring the
    /// renormalization flag.
    pub fn norm_adjacency(&self, graph: &Graph) -> Mat {
        if self.config.renormalize {
            normalize_sym_self_loops(graph.adjacency())
        } else {
            normalize_sym(graph.adjacency())
        }
    }

    fn bind_layers(&self, bound: &Bound<'_>, prefix: &str, specs: &[GnnLayerSpec]) -> Result<Vec<GnnLayer>, ModelError> {
        specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                Ok(GnnLayer {
                    weight: bound.param(&format!("{prefix}{i}.w"))?,
                    bias: Some(bound.param(&format!("{prefix}{i}.b"))?),
                    activation: spec.activation,
                })
            })
            .collect()
    }

    /// Shared encoder trunk output.
    fn trunk(&self, bound: &Bound<'_>, norm_adj: &Tensor, x: Option<&Tensor>) -> Result<Tensor, ModelError> {
        let layers = self.bind_layers(bound, "enc.trunk", &self.config.encoder_specs())?;
        if layers.is_empty() {
            return match x {
                Some(h) => Ok(h.clone()),
                None => Ok(bound.tape().constant(Mat::identity(norm_adj.rows()))),
            };
        }
        Ok(gnn_forward(std::slice::from_ref(norm_adj), x, &layers)?)
    }

    /// Deterministic embedding: the mean head of the encoder.
    pub fn embed(&self, bound: &Bound<'_>, norm_adj: &Tensor, x: Option<&Tensor>) -> Result<Tensor, ModelError> {
        let h = self.trunk(bound, norm_adj, x)?;
        let mu_layer = GnnLayer {
            weight: bound.param("enc.mu.w")?,
            bias: Some(bound.param("enc.mu.b")?),
            activation: Activation::Identity,
        };
        Ok(crate::gnn::gcn_layer(norm_adj, Some(&h), &mu_layer)?)
    }

    /// Variational posterior (mean and log standard deviation heads).
    pub fn encode(&self, bound: &Bound<'_>, norm_adj: &Tensor, x: Option<&Tensor>) -> Result<LatentPosterior, ModelError> {
        if !self.config.kind.is_variational() {
            return Err(ModelError::Invalid(format!(
                "{} has no variational posterior; use embed",
                self.config.kind
            )));
        }
        let h = self.trunk(bound, norm_adj, x)?;
        let mu_layer = GnnLayer {
            weight: bound.param("enc.mu.w")?,
            bias: Some(bound.param("enc.mu.b")?),
            activation: Activation::Identity,
        };
        let logsig_layer = GnnLayer {
            weight: bound.param("enc.logsig.w")?,
            bias: Some(bound.param("enc.logsig.b")?),
            activation: Activation::Identity,
        };
        let mu = crate::gnn::gcn_layer(norm_adj, Some(&h), &mu_layer)?;
        let log_sigma = crate::gnn::gcn_layer(norm_adj, Some(&h), &logsig_layer)?
            .clamp(-LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP)?;
        Ok(LatentPosterior { mu, log_sigma })
    }

    fn dense_head(&self, bound: &Bound<'_>, z: &Tensor) -> Result<Tensor, ModelError> {
        if self.config.dense_head_hidden.is_none() {
            return Ok(z.clone());
        }
        let h = z
            .matmul(&bound.param("head0.w")?)?
            .add_bias(&bound.param("head0.b")?)?
            .relu()?;
        Ok(h.matmul(&bound.param("head1.w")?)?.add_bias(&bound.param("head1.b")?)?)
    }

    /// One refinement pass over an explicitly materialized intermediate
    /// graph: the decoder network applied to `[Z | X]`.
    pub fn refine(
        &self,
        bound: &Bound<'_>,
        a_hat: &Tensor,
        z: &Tensor,
        x: Option<&Tensor>,
    ) -> Result<Tensor, ModelError> {
        let layers = self.bind_layers(bound, "dec", &self.config.decoder_specs())?;
        let input = match x {
            Some(features) => z.concat_cols(features)?,
            None => z.clone(),
        };
        Ok(gnn_forward(std::slice::from_ref(a_hat), Some(&input), &layers)?)
    }

    /// Same refinement pass without materializing the intermediate graph.
    fn refine_fast(
        &self,
        bound: &Bound<'_>,
        z_sim: &Tensor,
        z: &Tensor,
        x: Option<&Tensor>,
    ) -> Result<Tensor, ModelError> {
        let layers = self.bind_layers(bound, "dec", &self.config.decoder_specs())?;
        let mut h = match x {
            Some(features) => z.concat_cols(features)?,
            None => z.clone(),
        };
        for layer in &layers {
            let projected = h.matmul(&layer.weight)?;
            let mut out = decode_fast(z_sim, &projected, self.config.similarity)?;
            if let Some(bias) = &layer.bias {
                out = out.add_bias(bias)?;
            }
            h = layer.activation.apply(&out)?;
        }
        Ok(h)
    }

    /// Full decoder: optional dense head, `refine_rounds` message-passing
    /// rounds over successively induced intermediate graphs, and the skip
    /// combination. `dense` selects the materialized intermediate-graph path
    /// (numerically equal, quadratic cost).
    pub fn decode(
        &self,
        bound: &Bound<'_>,
        z0: &Tensor,
        x: Option<&Tensor>,
        dense: bool,
    ) -> Result<Tensor, ModelError> {
        let mut z = self.dense_head(bound, z0)?;
        let initial = z.clone();
        for _ in 0..self.config.refine_rounds {
            let refined = if dense {
                let a_hat = intermediate_graph(&z, self.config.similarity)?;
                self.refine(bound, &a_hat, &z, x)?
            } else {
                self.refine_fast(bound, &z, &z, x)?
            };
            z = if self.config.skip_per_round {
                combine_skip(&z, &refined, self.config.lambda, self.config.skip_mode)?
            } else {
                refined
            };
        }
        if !self.config.skip_per_round && self.config.refine_rounds > 0 {
            z = combine_skip(&initial, &z, self.config.lambda, self.config.skip_mode)?;
        }
        Ok(z)
    }
}

/// Z = mu + sigma (element-wise) noise; differentiable in both heads.
pub fn reparam_sample(posterior: &LatentPosterior, noise: &Tensor) -> Result<Tensor, TensorError> {
    posterior.mu.add(&posterior.sigma()?.hadamard(noise)?)
}

/// Dense intermediate graph from embeddings: pairwise similarity plus one,
/// entries in [0, 2], symmetric. All-zero rows contribute zero similarity,
/// so their entries are exactly 1.
pub fn intermediate_graph(z: &Tensor, similarity: SimilarityNorm) -> Result<Tensor, TensorError> {
    let n = z.rows();
    let ones = z.tape().constant(Mat::filled(n, n, 1.0));
    match similarity {
        SimilarityNorm::RowCosine => {
            let normed = z.row_l2_normalize()?;
            normed.matmul(&normed.transpose()?)?.add(&ones)
        }
        SimilarityNorm::GlobalFrobenius => {
            let gram = z.matmul(&z.transpose()?)?;
            let sq_norm = z.hadamard(z)?.reduce_sum()?;
            let inv = sq_norm.log()?.scalar_mul(-1.0)?.exp()?;
            gram.scale_by(&inv)?.add(&ones)
        }
    }
}

/// Product of the intermediate graph with `h`, computed by right
/// multiplication so the n x n similarity matrix is never formed:
/// `N (N^T h) + 1 (1^T h)` for row-normalized `N`. Cost O(nkd + nd).
pub fn decode_fast(z: &Tensor, h: &Tensor, similarity: SimilarityNorm) -> Result<Tensor, TensorError> {
    if z.rows() != h.rows() {
        return Err(TensorError::Invalid {
            op: "decode_fast",
            msg: format!("{} embedding rows vs {} activation rows", z.rows(), h.rows()),
        });
    }
    let ones = z.tape().constant(Mat::filled(z.rows(), 1, 1.0));
    let col_sums = ones.transpose()?.matmul(h)?;
    let broadcast = ones.matmul(&col_sums)?;
    match similarity {
        SimilarityNorm::RowCosine => {
            let normed = z.row_l2_normalize()?;
            let projected = normed.transpose()?.matmul(h)?;
            normed.matmul(&projected)?.add(&broadcast)
        }
        SimilarityNorm::GlobalFrobenius => {
            let projected = z.transpose()?.matmul(h)?;
            let sq_norm = z.hadamard(z)?.reduce_sum()?;
            let inv = sq_norm.log()?.scalar_mul(-1.0)?.exp()?;
            z.matmul(&projected)?.scale_by(&inv)?.add(&broadcast)
        }
    }
}

/// Merge the initial and refined embeddings.
pub fn combine_skip(
    z: &Tensor,
    z_star: &Tensor,
    lambda: f64,
    mode: SkipMode,
) -> Result<Tensor, TensorError> {
    if z.shape() != z_star.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "combine_skip",
            lhs_rows: z.rows(),
            lhs_cols: z.cols(),
            rhs_rows: z_star.rows(),
            rhs_cols: z_star.cols(),
        });
    }
    match mode {
        SkipMode::Convex => z.scalar_mul(1.0 - lambda)?.add(&z_star.scalar_mul(lambda)?),
        SkipMode::Incremental => {
            let norm = z_star.value().frobenius_norm();
            if norm == 0.0 {
                return Err(TensorError::Invalid {
                    op: "combine_skip",
                    msg: "incremental skip needs a nonzero refined embedding".into(),
                });
            }
            // The norm is treated as a stop-gradient scale.
            z.add(&z_star.scalar_mul(lambda / norm)?)
        }
    }
}

/// Inner-product readout: logits of the edge distribution.
pub fn edge_logits(z_final: &Tensor) -> Result<Tensor, TensorError> {
    z_final.matmul(&z_final.transpose()?)
}

/// Edge parameter matrix: probabilities under the bernoulli observation
/// model, means under the gaussian one.
pub fn edge_distribution(z_final: &Tensor, observation: ObservationModel) -> Result<Tensor, TensorError> {
    let logits = edge_logits(z_final)?;
    match observation {
        ObservationModel::Bernoulli => logits.sigmoid(),
        ObservationModel::Gaussian { .. } => Ok(logits),
    }
}

/// Analytic KL(q || standard normal) for a diagonal Gaussian posterior:
/// -1/2 sum(1 + 2 log sigma - mu^2 - sigma^2).
pub fn kl_standard_normal(posterior: &LatentPosterior) -> Result<Tensor, TensorError> {
    let two_log_sigma = posterior.log_sigma.scalar_mul(2.0)?;
    let sigma_sq = two_log_sigma.exp()?;
    let mu_sq = posterior.mu.hadamard(&posterior.mu)?;
    let ones = posterior
        .mu
        .tape()
        .constant(Mat::filled(posterior.mu.rows(), posterior.mu.cols(), 1.0));
    let inner = ones.add(&two_log_sigma)?.sub(&mu_sq)?.sub(&sigma_sq)?;
    inner.reduce_sum()?.scalar_mul(-0.5)
}

/// Reconstruction targets and per-entry weights derived from an adjacency
/// matrix. Diagonal entries are treated as self-links (target 1) when
/// `include_diagonal` is set, and masked out (weight 0) otherwise. Optional
/// positive-class weighting balances sparse graphs with
/// `(#zero entries)/(#one entries)`.
#[derive(Clone, Debug)]
pub struct ReconTargets {
    pub targets: Mat,
    pub weights: Option<Mat>,
    pub reduction: Reduction,
}

impl ReconTargets {
    pub fn from_adjacency(
        adjacency: &Mat,
        include_diagonal: bool,
        positive_weighting: bool,
        reduction: Reduction,
    ) -> Self {
        let n = adjacency.rows();
        let mut targets = adjacency.clone();
        for i in 0..n {
            targets.set(i, i, if include_diagonal { 1.0 } else { 0.0 });
        }
        let mut weights = None;
        if positive_weighting || !include_diagonal {
            let mut w = Mat::filled(n, n, 1.0);
            if positive_weighting {
                let positives = targets.sum();
                let negatives = (n * n) as f64 - positives;
                let pos_weight = if positives > 0.0 { negatives / positives } else { 1.0 };
                for i in 0..n {
                    for j in 0..n {
                        if targets.get(i, j) == 1.0 {
                            w.set(i, j, pos_weight);
                        }
                    }
                }
            }
            if !include_diagonal {
                for i in 0..n {
                    w.set(i, i, 0.0);
                }
            }
            weights = Some(w);
        }
        ReconTargets { targets, weights, reduction }
    }

    pub fn n(&self) -> usize {
        self.targets.rows()
    }
}

/// Reconstruction objective between edge logits (bernoulli) or means
/// (gaussian) and the target adjacency.
pub fn reconstruction_loss(
    logits: &Tensor,
    recon: &ReconTargets,
    observation: ObservationModel,
) -> Result<Tensor, TensorError> {
    let tape = logits.tape();
    let targets = tape.constant(recon.targets.clone());
    let weights = recon.weights.as_ref().map(|w| tape.constant(w.clone()));
    let total_entries = (recon.n() * recon.n()) as f64;
    let loss = match observation {
        ObservationModel::Bernoulli => bce_with_logits_sum(logits, &targets, weights.as_ref())?,
        ObservationModel::Gaussian { noise_scale } => {
            let diff = logits.sub(&targets)?;
            let mut sq = diff.hadamard(&diff)?;
            if let Some(w) = &weights {
                sq = sq.hadamard(w)?;
            }
            sq.reduce_sum()?.scalar_mul(1.0 / (2.0 * noise_scale * noise_scale))?
        }
    };
    match recon.reduction {
        Reduction::Sum => Ok(loss),
        Reduction::Mean => loss.scalar_mul(1.0 / total_entries),
    }
}

/// Unbiased subsampled estimate of the full (sum-reduced) bernoulli
/// reconstruction term: `count` entries drawn uniformly with replacement,
/// scaled by n^2/count. When `count == n^2` every entry is visited exactly
/// once (exhaustive stratification) and the estimate equals the full sum.
pub fn mc_subsample_recon(
    z_final: &Tensor,
    recon: &ReconTargets,
    count: usize,
    seed: u64,
) -> Result<Tensor, TensorError> {
    if count == 0 {
        return Err(TensorError::Invalid { op: "mc_subsample_recon", msg: "count must be >= 1".into() });
    }
    let n = recon.n();
    if z_final.rows() != n {
        return Err(TensorError::Invalid {
            op: "mc_subsample_recon",
            msg: format!("{} embedding rows vs {} target rows", z_final.rows(), n),
        });
    }
    let mut pairs = Vec::with_capacity(count);
    if count == n * n {
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                pairs.push((i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            pairs.push((rng.random_range(0..n) as u32, rng.random_range(0..n) as u32));
        }
    }
    let targets: Vec<f64> = pairs.iter().map(|&(i, j)| recon.targets.get(i as usize, j as usize)).collect();
    let weights: Vec<f64> = match &recon.weights {
        Some(w) => pairs.iter().map(|&(i, j)| w.get(i as usize, j as usize)).collect(),
        None => vec![1.0; pairs.len()],
    };
    let scale = (n * n) as f64 / count as f64;
    sampled_gram_bce(z_final, pairs, targets, weights, scale)
}

/// Scalar loss with the reconstruction and divergence parts reported
/// separately (as plain values).
pub struct LossBreakdown {
    pub total: Tensor,
    pub recon: f64,
    pub kl: f64,
}

/// How the reconstruction term is evaluated.
#[derive(Clone, Copy, Debug)]
pub enum ReconEstimator {
    Full,
    Subsampled { count: usize, seed: u64 },
}

impl GraphiteModel {
    /// Negative evidence lower bound for variational kinds: reconstruction
    /// term plus analytic KL to the standard-normal prior, from one
    /// reparameterized sample.
    pub fn negative_elbo(
        &self,
        bound: &Bound<'_>,
        norm_adj: &Tensor,
        x: Option<&Tensor>,
        recon: &ReconTargets,
        noise: &Mat,
        estimator: ReconEstimator,
    ) -> Result<LossBreakdown, ModelError> {
        let posterior = self.encode(bound, norm_adj, x)?;
        let noise_t = bound.tape().constant(noise.clone());
        let z = reparam_sample(&posterior, &noise_t)?;
        let z_final = self.decode(bound, &z, x, false)?;
        let recon_term = match estimator {
            ReconEstimator::Full => {
                let logits = edge_logits(&z_final)?;
                reconstruction_loss(&logits, recon, self.config.observation)?
            }
            ReconEstimator::Subsampled { count, seed } => {
                let term = mc_subsample_recon(&z_final, recon, count, seed)?;
                match recon.reduction {
                    Reduction::Sum => term,
                    Reduction::Mean => term.scalar_mul(1.0 / (recon.n() * recon.n()) as f64)?,
                }
            }
        };
        let kl = kl_standard_normal(&posterior)?;
        let kl_term = match recon.reduction {
            Reduction::Sum => kl,
            Reduction::Mean => kl.scalar_mul(1.0 / (recon.n() * recon.n()) as f64)?,
        };
        let total = recon_term.add(&kl_term)?;
        Ok(LossBreakdown { total, recon: recon_term.item()?, kl: kl_term.item()? })
    }

    /// Evidence lower bound (the value being maximized).
    pub fn elbo(
        &self,
        bound: &Bound<'_>,
        norm_adj: &Tensor,
        x: Option<&Tensor>,
        recon: &ReconTargets,
        noise: &Mat,
        estimator: ReconEstimator,
    ) -> Result<Tensor, ModelError> {
        Ok(self.negative_elbo(bound, norm_adj, x, recon, noise, estimator)?.total.scalar_mul(-1.0)?)
    }

    /// Deterministic autoencoder objective: the mean head is used as the
    /// embedding directly; no sampling, no divergence term.
    pub fn ae_loss(
        &self,
        bound: &Bound<'_>,
        norm_adj: &Tensor,
        x: Option<&Tensor>,
        recon: &ReconTargets,
        estimator: ReconEstimator,
    ) -> Result<LossBreakdown, ModelError> {
        let z = self.embed(bound, norm_adj, x)?;
        let z_final = self.decode(bound, &z, x, false)?;
        let recon_term = match estimator {
            ReconEstimator::Full => {
                let logits = edge_logits(&z_final)?;
                reconstruction_loss(&logits, recon, self.config.observation)?
            }
            ReconEstimator::Subsampled { count, seed } => mc_subsample_recon(&z_final, recon, count, seed)?,
        };
        Ok(LossBreakdown { recon: recon_term.item()?, kl: 0.0, total: recon_term })
    }

    /// Training loss selected by the model kind.
    pub fn loss(
        &self,
        bound: &Bound<'_>,
        norm_adj: &Tensor,
        x: Option<&Tensor>,
        recon: &ReconTargets,
        noise: &Mat,
        estimator: ReconEstimator,
    ) -> Result<LossBreakdown, ModelError> {
        if self.config.kind.is_variational() {
            self.negative_elbo(bound, norm_adj, x, recon, noise, estimator)
        } else {
            self.ae_loss(bound, norm_adj, x, recon, estimator)
        }
    }
}
