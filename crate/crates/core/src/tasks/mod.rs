//! Experiment harnesses: density estimation over graph families, link
//! prediction, semi-supervised node classification, and the tiny-scale
//! quadrature oracle for the marginal likelihood.

pub mod classify;
pub mod density;
pub mod link;
pub mod oracle;

use serde::Serialize;
use thiserror::Error;

use crate::graph::GraphError;
use crate::metrics::MetricsError;
use crate::model::{ModelError, ModelKind, SkipMode};
use crate::tensor::TensorError;

#[derive(Error, Debug)]
pub enum TaskError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Reconstruction-term estimator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsample {
    /// Evaluate the full n^2 objective.
    Off,
    /// Sample as many entries as the training graph has edges.
    Edges,
    /// Sample a fixed number of entries.
    Count(usize),
}

impl Subsample {
    pub fn resolve(&self, num_edges: usize) -> Option<usize> {
        match self {
            Subsample::Off => None,
            Subsample::Edges => Some(num_edges.max(1)),
            Subsample::Count(c) => Some(*c),
        }
    }
}

/// Experiment configuration shared by the harnesses. Grids apply to the
/// hyperparameters selected on validation; everything else is fixed.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub decoder_hidden: Vec<usize>,
    pub refine_rounds: usize,
    pub lambda_grid: Vec<f64>,
    pub dropout_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub skip_mode: SkipMode,
    pub learning_rate: f64,
    pub iterations: usize,
    pub eval_every: usize,
    pub seeds: Vec<u64>,
    pub val_frac: f64,
    pub test_frac: f64,
    pub subsample: Subsample,
    pub eval_samples: usize,
    pub use_features: bool,
    pub renormalize: bool,
    /// Transductive split sizes for classification (clamped to the graph).
    pub labeled_per_class: usize,
    pub val_nodes: usize,
    pub test_nodes: usize,
}

impl RunConfig {
    pub fn new(model: ModelKind) -> Self {
        let refinement = model.has_refinement();
        RunConfig {
            model,
            encoder_hidden: vec![32, 32],
            latent_dim: 16,
            decoder_hidden: if refinement { vec![32] } else { vec![] },
            refine_rounds: if refinement { 2 } else { 0 },
            lambda_grid: vec![0.5],
            dropout_grid: vec![0.0],
            gamma_grid: vec![0.5],
            skip_mode: SkipMode::Convex,
            learning_rate: 0.01,
            iterations: 500,
            eval_every: 10,
            seeds: (0..10).collect(),
            val_frac: 0.05,
            test_frac: 0.10,
            subsample: Subsample::Off,
            eval_samples: 16,
            use_features: false,
            renormalize: false,
            labeled_per_class: 20,
            val_nodes: 500,
            test_nodes: 1000,
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.iterations == 0 {
            return Err(TaskError::Config("iterations must be positive".into()));
        }
        if self.lambda_grid.is_empty() || self.dropout_grid.is_empty() || self.gamma_grid.is_empty() {
            return Err(TaskError::Config("hyperparameter grids must be non-empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(TaskError::Config("at least one seed required".into()));
        }
        if !(0.0..1.0).contains(&self.val_frac) || !(0.0..1.0).contains(&self.test_frac) {
            return Err(TaskError::Config("split fractions must lie in [0,1)".into()));
        }
        if self.eval_every == 0 {
            return Err(TaskError::Config("eval_every must be positive".into()));
        }
        if let Subsample::Count(0) = self.subsample {
            return Err(TaskError::Config("subsample count must be positive".into()));
        }
        for &d in &self.dropout_grid {
            if !(0.0..1.0).contains(&d) {
                return Err(TaskError::Config(format!("edge dropout {d} must lie in [0,1)")));
            }
        }
        Ok(())
    }
}

/// One row of the flat results table.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub task: String,
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub lambda: f64,
    pub dropout: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neg_elbo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recon_error: Option<f64>,
}

impl RunRecord {
    pub fn blank(task: &str, dataset: &str, model: ModelKind, seed: u64) -> Self {
        RunRecord {
            config_hash: String::new(),
            task: task.to_string(),
            dataset: dataset.to_string(),
            model: model.name().to_string(),
            seed,
            lambda: 0.0,
            dropout: 0.0,
            gamma: 0.0,
            val_auc: None,
            test_auc: None,
            test_ap: None,
            accuracy: None,
            neg_elbo: None,
            recon_error: None,
        }
    }
}

/// FNV-1a over the resolved config text; stable across runs.
pub fn config_hash(text: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

const CSV_HEADER: &str =
    "config_hash,task,dataset,model,seed,lambda,dropout,gamma,val_auc,test_auc,test_ap,accuracy,neg_elbo,recon_error";

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Flat CSV, one row per run; deterministic formatting.
pub fn render_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.config_hash,
            r.task,
            r.dataset,
            r.model,
            r.seed,
            r.lambda,
            r.dropout,
            r.gamma,
            csv_opt(r.val_auc),
            csv_opt(r.test_auc),
            csv_opt(r.test_ap),
            csv_opt(r.accuracy),
            csv_opt(r.neg_elbo),
            csv_opt(r.recon_error),
        ));
    }
    out
}

/// Mix a run seed with a grid index into a fresh stream seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(stream).rotate_left(17) ^ stream
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_catches_empty_grids() {
        let mut config = RunConfig::new(ModelKind::GraphiteVae);
        config.lambda_grid.clear();
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = config_hash("model = vgae\niters = 500\n");
        let b = config_hash("model = vgae\niters = 500\n");
        let c = config_hash("model = vgae\niters = 501\n");
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn csv_renders_missing_fields_empty() {
        let mut record = RunRecord::blank("link-prediction", "toy", ModelKind::Vgae, 3);
        record.test_auc = Some(0.875);
        let csv = render_csv(&[record]);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("config_hash,task"));
        let row = lines.next().unwrap();
        assert!(row.contains(",0.875,,"), "{row}");
    }

    #[test]
    fn subsample_resolution() {
        assert_eq!(Subsample::Off.resolve(10), None);
        assert_eq!(Subsample::Edges.resolve(10), Some(10));
        assert_eq!(Subsample::Count(7).resolve(10), Some(7));
    }
}
