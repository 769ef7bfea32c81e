//! Co-occurrence loss over the inter network, gradients and the Adam loop.
//!
//! Every undirected inter edge contributes two directed terms, `p(v|u)` and
//! `p(u|v)`, where `p` renormalizes edge weights over the source node's
//! neighborhood. Each term is a binary cross-entropy between `p` and a
//! Gaussian kernel on the fused vectors of the two endpoints.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavnet::{GraphError, HetNet, NodeId};
use crate::dataset::Cad;
use crate::model::{forward, EmbeddingTable, ForwardPass, ModelError, NecaConfig, NecaParams};
use crate::numeric::log_sum_exp;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("the inter network has no edges")]
    NoEdges,
    #[error("non-finite value in {tensor}")]
    NonFinite {
        tensor: String,
        report: Option<Box<TrainReport>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_epochs: usize,
    pub rel_tol: f64,
    pub kernel_sigma: f64,
    pub clamp_eps: f64,
    /// Recorded for provenance. Full-batch training draws no random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_epochs: 200,
            rel_tol: 1e-5,
            kernel_sigma: 1.0,
            clamp_eps: 1e-7,
            seed: 0,
        }
    }
}

impl TrainConfig {
    // negated comparisons so that NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad(format!(
                "adam_epsilon must be positive, got {}",
                self.adam_epsilon
            ));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return bad(format!("rel_tol must be nonnegative, got {}", self.rel_tol));
        }
        if !(self.kernel_sigma > 0.0 && self.kernel_sigma.is_finite()) {
            return bad(format!(
                "kernel_sigma must be positive, got {}",
                self.kernel_sigma
            ));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return bad(format!(
                "clamp_eps must lie in (0, 0.5), got {}",
                self.clamp_eps
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Converged,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::Converged => "converged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub beta_inter: f64,
    pub beta_intra: f64,
    pub wall_time_secs: f64,
}

/// One line of progress, emitted after each epoch's loss is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub beta_inter: f64,
    pub beta_intra: f64,
}

/// `p(neighbor | target)`: the inter weight renormalized over the target's neighborhood.
pub fn impacting_strength(
    net: &HetNet,
    target: NodeId,
    neighbor: NodeId,
) -> Result<f64, GraphError> {
    let inter = net.inter();
    let edge = inter
        .edge_between(target, neighbor)
        .ok_or(GraphError::NotAdjacent { target, neighbor })?;
    let logs: Vec<f64> = inter
        .neighbors(target)
        .iter()
        .map(|&(_, idx)| inter.edges()[idx].log_weight)
        .collect();
    Ok((edge.log_weight - log_sum_exp(&logs)).exp())
}

pub fn gaussian_similarity(
    f_u: ndarray::ArrayView1<f64>,
    f_v: ndarray::ArrayView1<f64>,
    sigma: f64,
) -> f64 {
    assert_eq!(f_u.len(), f_v.len(), "vectors must have equal length");
    let dist2: f64 = f_u.iter().zip(f_v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-dist2 / (2.0 * sigma * sigma)).exp()
}

/// `-(p ln G + (1-p) ln(1-G))` with `G` clamped into `[eps, 1-eps]`.
pub fn edge_cross_entropy(p: f64, g: f64, clamp_eps: f64) -> f64 {
    let g = g.clamp(clamp_eps, 1.0 - clamp_eps);
    -(p * g.ln() + (1.0 - p) * (1.0 - g).ln())
}

/// A directed loss term `source → target` with strength `p(target | source)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerm {
    pub source: NodeId,
    pub target: NodeId,
    pub p: f64,
}

/// The terms the loss averages over: both directions of every inter edge.
pub fn loss_terms(net: &HetNet) -> Result<Vec<LossTerm>, TrainError> {
    let inter = net.inter();
    if inter.is_empty() {
        return Err(TrainError::NoEdges);
    }
    let lse: Vec<f64> = (0..inter.node_count())
        .map(|u| {
            let logs: Vec<f64> = inter
                .neighbors(u)
                .iter()
                .map(|&(_, idx)| inter.edges()[idx].log_weight)
                .collect();
            log_sum_exp(&logs)
        })
        .collect();
    let mut terms = Vec::with_capacity(2 * inter.len());
    for e in inter.edges() {
        terms.push(LossTerm {
            source: e.u,
            target: e.v,
            p: (e.log_weight - lse[e.u]).exp(),
        });
        terms.push(LossTerm {
            source: e.v,
            target: e.u,
            p: (e.log_weight - lse[e.v]).exp(),
        });
    }
    Ok(terms)
}

fn loss_from_terms(terms: &[LossTerm], fused: ArrayView2<f64>, config: &TrainConfig) -> f64 {
    let total: f64 = terms
        .iter()
        .map(|t| {
            let g = gaussian_similarity(
                fused.row(t.source),
                fused.row(t.target),
                config.kernel_sigma,
            );
            edge_cross_entropy(t.p, g, config.clamp_eps)
        })
        .sum();
    total / terms.len() as f64
}

pub fn neca_loss(
    net: &HetNet,
    fused: ArrayView2<f64>,
    config: &TrainConfig,
) -> Result<f64, TrainError> {
    let terms = loss_terms(net)?;
    if fused.nrows() != net.nodes().len() {
        return Err(ModelError::Shape {
            expected: format!("{} fused rows", net.nodes().len()),
            found: format!("{}", fused.nrows()),
        }
        .into());
    }
    Ok(loss_from_terms(&terms, fused, config))
}

/// Gradient of `scale · loss` with respect to the fused vectors.
fn loss_grad_fused(
    terms: &[LossTerm],
    fused: ArrayView2<f64>,
    config: &TrainConfig,
    scale: f64,
) -> Array2<f64> {
    let mut grad = Array2::zeros(fused.raw_dim());
    let n = terms.len() as f64;
    let sigma2 = config.kernel_sigma * config.kernel_sigma;
    for t in terms {
        let diff = &fused.row(t.source) - &fused.row(t.target);
        let g = (-diff.dot(&diff) / (2.0 * sigma2)).exp();
        if g < config.clamp_eps || g > 1.0 - config.clamp_eps {
            continue;
        }
        let d_g = -scale / n * (t.p / g - (1.0 - t.p) / (1.0 - g));
        // dG/df_source = -G (f_source - f_target) / σ²
        let coef = -d_g * g / sigma2;
        grad.row_mut(t.source).scaled_add(coef, &diff);
        grad.row_mut(t.target).scaled_add(-coef, &diff);
    }
    grad
}

fn check_pass(pass: &ForwardPass) -> Result<(), TrainError> {
    let non_finite = |name: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(TrainError::NonFinite {
                tensor: name.to_string(),
                report: None,
            })
        }
    };
    non_finite(
        "inter embeddings",
        pass.inter.output.iter().all(|x| x.is_finite()),
    )?;
    non_finite(
        "intra embeddings",
        pass.intra.output.iter().all(|x| x.is_finite()),
    )?;
    non_finite(
        "importance scores",
        pass.gamma_inter.is_finite() && pass.gamma_intra.is_finite(),
    )?;
    non_finite("fused embeddings", pass.fused.iter().all(|x| x.is_finite()))
}

fn gradients_from_pass(
    pass: &ForwardPass,
    terms: &[LossTerm],
    params: &NecaParams,
    model_config: &NecaConfig,
    train_config: &TrainConfig,
    scale: f64,
) -> Result<NecaParams, TrainError> {
    let g_fused = loss_grad_fused(terms, pass.fused.view(), train_config, scale);
    let grads = pass.backward(params, model_config, g_fused.view());
    if let Some(name) = grads.first_non_finite() {
        return Err(TrainError::NonFinite {
            tensor: format!("gradient of {name}"),
            report: None,
        });
    }
    Ok(grads)
}

pub(crate) fn scaled_gradients(
    net: &HetNet,
    params: &NecaParams,
    model_config: &NecaConfig,
    train_config: &TrainConfig,
    scale: f64,
) -> Result<(f64, NecaParams), TrainError> {
    let terms = loss_terms(net)?;
    let pass = forward(net, params, model_config)?;
    check_pass(&pass)?;
    let loss = loss_from_terms(&terms, pass.fused.view(), train_config);
    let grads = gradients_from_pass(&pass, &terms, params, model_config, train_config, scale)?;
    Ok((scale * loss, grads))
}

/// Loss and its exact gradient with respect to every parameter tensor.
pub fn gradients(
    net: &HetNet,
    params: &NecaParams,
    model_config: &NecaConfig,
    train_config: &TrainConfig,
) -> Result<(f64, NecaParams), TrainError> {
    scaled_gradients(net, params, model_config, train_config, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: NecaParams,
    pub v: NecaParams,
    /// Index of the last step taken; 0 before the first.
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &NecaParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(
    params: &mut NecaParams,
    grads: &NecaParams,
    state: &mut AdamState,
    config: &TrainConfig,
    t: u64,
) {
    assert!(t >= 1, "Adam steps are 1-based");
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    let g_all = grads.tensors();
    let mut m_all = state.m.tensors_mut();
    let mut v_all = state.v.tensors_mut();
    for (((_, theta), (_, g)), ((_, m), (_, v))) in params
        .tensors_mut()
        .into_iter()
        .zip(g_all)
        .zip(m_all.iter_mut().zip(v_all.iter_mut()))
    {
        assert_eq!(theta.len(), g.len(), "gradient shape mismatch");
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
        }
    }
    state.t = t;
}

pub struct TrainOutcome {
    pub params: NecaParams,
    pub embeddings: EmbeddingTable,
    pub report: TrainReport,
}

/// Trains from a fresh initialization seeded by `model_config.seed`.
pub fn train(
    cad: &Cad,
    net: &HetNet,
    model_config: &NecaConfig,
    train_config: &TrainConfig,
    observer: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, TrainError> {
    let params = NecaParams::init(model_config, net.nodes().len())?;
    train_from(cad, net, params, model_config, train_config, observer)
}

/// Full-batch training starting at `params`.
///
/// Each epoch records the loss of the current parameters, then either stops
/// or takes one Adam step. No step follows the last recorded loss, so the
/// returned embeddings are the ones that loss was measured on.
pub fn train_from(
    cad: &Cad,
    net: &HetNet,
    mut params: NecaParams,
    model_config: &NecaConfig,
    train_config: &TrainConfig,
    mut observer: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, TrainError> {
    train_config.validate()?;
    model_config.validate()?;
    params.check_shapes(model_config, net.nodes().len())?;
    let start = Instant::now();
    let terms = loss_terms(net)?;
    let mut adam = AdamState::new(&params);
    let mut history: Vec<f64> = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut last_pass = None;

    for epoch in 1..=train_config.max_epochs {
        let pass = forward(net, &params, model_config)?;
        let loss = loss_from_terms(&terms, pass.fused.view(), train_config);
        let partial_report = |history: &[f64], pass: &ForwardPass| TrainReport {
            loss_history: history.to_vec(),
            epochs_run: history.len(),
            stop_reason,
            beta_inter: pass.beta_inter,
            beta_intra: pass.beta_intra,
            wall_time_secs: start.elapsed().as_secs_f64(),
        };
        if let Err(TrainError::NonFinite { tensor, .. }) = check_pass(&pass) {
            return Err(TrainError::NonFinite {
                tensor,
                report: Some(Box::new(partial_report(&history, &pass))),
            });
        }
        if !loss.is_finite() {
            return Err(TrainError::NonFinite {
                tensor: "loss".into(),
                report: Some(Box::new(partial_report(&history, &pass))),
            });
        }
        observer(&EpochLog {
            epoch,
            loss,
            beta_inter: pass.beta_inter,
            beta_intra: pass.beta_intra,
        });
        let converged = match history.last() {
            _ if train_config.rel_tol == f64::INFINITY => true,
            Some(&prev) => (loss - prev).abs() / prev.abs().max(1e-12) < train_config.rel_tol,
            None => false,
        };
        history.push(loss);
        if converged {
            stop_reason = StopReason::Converged;
            last_pass = Some(pass);
            break;
        }
        if epoch == train_config.max_epochs {
            last_pass = Some(pass);
            break;
        }
        let grads =
            match gradients_from_pass(&pass, &terms, &params, model_config, train_config, 1.0) {
                Ok(g) => g,
                Err(TrainError::NonFinite { tensor, .. }) => {
                    return Err(TrainError::NonFinite {
                        tensor,
                        report: Some(Box::new(partial_report(&history, &pass))),
                    })
                }
                Err(e) => return Err(e),
            };
        adam_step(&mut params, &grads, &mut adam, train_config, epoch as u64);
    }

    let pass = last_pass.expect("at least one epoch runs");
    let report = TrainReport {
        epochs_run: history.len(),
        loss_history: history,
        stop_reason,
        beta_inter: pass.beta_inter,
        beta_intra: pass.beta_intra,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    let embeddings = EmbeddingTable::from_pass(cad, net, pass)?;
    Ok(TrainOutcome {
        params,
        embeddings,
        report,
    })
}

/// Per-network embeddings for the given parameters, without training.
pub fn embed(
    cad: &Cad,
    net: &HetNet,
    params: &NecaParams,
    model_config: &NecaConfig,
) -> Result<EmbeddingTable, TrainError> {
    let pass = forward(net, params, model_config)?;
    check_pass(&pass)?;
    Ok(EmbeddingTable::from_pass(cad, net, pass)?)
}
