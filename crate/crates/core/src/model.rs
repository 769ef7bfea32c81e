//! Multi-head attention embedding over each network, dataset-level fusion of
//! the two network views, and per-object assembly.
//!
//! Node features are one-hot, so projecting node `v` with a `d × |V|` matrix
//! is a column lookup. Each head scores neighbors with
//! `leaky_relu(a · [h_target || h_neighbor])`, softmax-normalizes the scores
//! over the neighborhood and applies ELU to the weighted sum of neighbor
//! projections. Head outputs are concatenated.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavnet::{CavNodeSet, HetNet, Network, NodeId};
use crate::dataset::Cad;
use crate::numeric::{elu, elu_grad, leaky_relu, leaky_relu_grad, softmax};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("node {node} has no neighbors in the {network} network")]
    IsolatedNode { network: Network, node: NodeId },
    #[error("record {record}, attribute {attribute}: value not in the node set")]
    UnknownValue { record: usize, attribute: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecaConfig {
    pub heads: usize,
    pub head_dim: usize,
    pub fusion_dim: usize,
    pub leaky_slope: f64,
    pub elu_alpha: f64,
    pub include_self_loop: bool,
    /// Use one projection per head for both networks.
    pub share_projection: bool,
    pub seed: u64,
}

impl Default for NecaConfig {
    fn default() -> Self {
        Self {
            heads: 8,
            head_dim: 8,
            fusion_dim: 16,
            leaky_slope: 0.2,
            elu_alpha: 1.0,
            include_self_loop: false,
            share_projection: false,
            seed: 0,
        }
    }
}

impl NecaConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.heads == 0 || self.head_dim == 0 || self.fusion_dim == 0 {
            return Err(ModelError::Config(
                "heads, head_dim and fusion_dim must be >= 1".into(),
            ));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(ModelError::Config(format!(
                "leaky_slope must lie in (0, 1), got {}",
                self.leaky_slope
            )));
        }
        if !(self.elu_alpha > 0.0 && self.elu_alpha.is_finite()) {
            return Err(ModelError::Config(format!(
                "elu_alpha must be positive, got {}",
                self.elu_alpha
            )));
        }
        Ok(())
    }

    /// Width of one node embedding, `K·d`.
    pub fn embedding_dim(&self) -> usize {
        self.heads * self.head_dim
    }
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecaParams {
    /// `d × |V|` projections; `heads` entries when shared, otherwise inter heads then intra heads.
    pub projections: Vec<Array2<f64>>,
    /// Attention vectors of length `2d`, inter heads then intra heads.
    pub attention: Vec<Array1<f64>>,
    /// `d′ × K·d`.
    pub w2: Array2<f64>,
    pub b: Array1<f64>,
    pub s: Array1<f64>,
    pub heads: usize,
    pub shared_projection: bool,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound))
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Array1<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array1::from_shape_simple_fn(len, || rng.gen_range(-bound..=bound))
}

impl NecaParams {
    /// Uniform in `±1/√fan_in`, drawn from a generator seeded with `config.seed`.
    pub fn init(config: &NecaConfig, node_count: usize) -> Result<Self, ModelError> {
        config.validate()?;
        let (k, d, dp) = (config.heads, config.head_dim, config.fusion_dim);
        let kd = config.embedding_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let slots = if config.share_projection { k } else { 2 * k };
        let projections = (0..slots)
            .map(|_| uniform_matrix(&mut rng, d, node_count, node_count))
            .collect();
        let attention = (0..2 * k)
            .map(|_| uniform_vector(&mut rng, 2 * d, 2 * d))
            .collect();
        let w2 = uniform_matrix(&mut rng, dp, kd, kd);
        let b = uniform_vector(&mut rng, dp, kd);
        let s = uniform_vector(&mut rng, dp, dp);
        Ok(Self {
            projections,
            attention,
            w2,
            b,
            s,
            heads: k,
            shared_projection: config.share_projection,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            projections: self
                .projections
                .iter()
                .map(|p| Array2::zeros(p.raw_dim()))
                .collect(),
            attention: self
                .attention
                .iter()
                .map(|a| Array1::zeros(a.raw_dim()))
                .collect(),
            w2: Array2::zeros(self.w2.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            s: Array1::zeros(self.s.raw_dim()),
            heads: self.heads,
            shared_projection: self.shared_projection,
        }
    }

    fn projection_slot(&self, network: Network, head: usize) -> usize {
        match (self.shared_projection, network) {
            (true, _) | (false, Network::Inter) => head,
            (false, Network::Intra) => self.heads + head,
        }
    }

    fn attention_slot(&self, network: Network, head: usize) -> usize {
        match network {
            Network::Inter => head,
            Network::Intra => self.heads + head,
        }
    }

    pub fn projection(&self, network: Network, head: usize) -> &Array2<f64> {
        &self.projections[self.projection_slot(network, head)]
    }

    pub fn attention_vector(&self, network: Network, head: usize) -> &Array1<f64> {
        &self.attention[self.attention_slot(network, head)]
    }

    fn projection_name(&self, slot: usize) -> String {
        if self.shared_projection {
            format!("shared.head{slot}.W1")
        } else if slot < self.heads {
            format!("inter.head{slot}.W1")
        } else {
            format!("intra.head{}.W1", slot - self.heads)
        }
    }

    fn attention_name(&self, slot: usize) -> String {
        if slot < self.heads {
            format!("inter.head{slot}.a")
        } else {
            format!("intra.head{}.a", slot - self.heads)
        }
    }

    /// Named flat views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (i, p) in self.projections.iter().enumerate() {
            out.push((
                self.projection_name(i),
                p.as_slice().expect("standard layout"),
            ));
        }
        for (i, a) in self.attention.iter().enumerate() {
            out.push((
                self.attention_name(i),
                a.as_slice().expect("standard layout"),
            ));
        }
        out.push((
            "fusion.W2".into(),
            self.w2.as_slice().expect("standard layout"),
        ));
        out.push((
            "fusion.b".into(),
            self.b.as_slice().expect("standard layout"),
        ));
        out.push((
            "fusion.s".into(),
            self.s.as_slice().expect("standard layout"),
        ));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let names: Vec<String> = self.tensors().into_iter().map(|(n, _)| n).collect();
        let mut slices: Vec<&mut [f64]> = Vec::new();
        for p in &mut self.projections {
            slices.push(p.as_slice_mut().expect("standard layout"));
        }
        for a in &mut self.attention {
            slices.push(a.as_slice_mut().expect("standard layout"));
        }
        slices.push(self.w2.as_slice_mut().expect("standard layout"));
        slices.push(self.b.as_slice_mut().expect("standard layout"));
        slices.push(self.s.as_slice_mut().expect("standard layout"));
        names.into_iter().zip(slices).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// First tensor holding a non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n)
    }

    /// Checks shapes against a config and node count.
    pub fn check_shapes(&self, config: &NecaConfig, node_count: usize) -> Result<(), ModelError> {
        let expect = |what: &str, found: Vec<usize>, expected: Vec<usize>| {
            if found == expected {
                Ok(())
            } else {
                Err(ModelError::Shape {
                    expected: format!("{what} {expected:?}"),
                    found: format!("{found:?}"),
                })
            }
        };
        let slots = if config.share_projection {
            config.heads
        } else {
            2 * config.heads
        };
        expect(
            "projection count",
            vec![self.projections.len()],
            vec![slots],
        )?;
        expect(
            "attention count",
            vec![self.attention.len()],
            vec![2 * config.heads],
        )?;
        for p in &self.projections {
            expect("W1", p.shape().to_vec(), vec![config.head_dim, node_count])?;
        }
        for a in &self.attention {
            expect("a", a.shape().to_vec(), vec![2 * config.head_dim])?;
        }
        expect(
            "W2",
            self.w2.shape().to_vec(),
            vec![config.fusion_dim, config.embedding_dim()],
        )?;
        expect("b", self.b.shape().to_vec(), vec![config.fusion_dim])?;
        expect("s", self.s.shape().to_vec(), vec![config.fusion_dim])?;
        Ok(())
    }
}

/// One-hot node features: the `|V| × |V|` identity.
pub fn init_node_features(nodes: &CavNodeSet) -> Array2<f64> {
    Array2::eye(nodes.len())
}

pub fn project(w1: &Array2<f64>, feature: ArrayView1<f64>) -> Result<Array1<f64>, ModelError> {
    if w1.ncols() != feature.len() {
        return Err(ModelError::Shape {
            expected: format!("feature of length {}", w1.ncols()),
            found: format!("length {}", feature.len()),
        });
    }
    Ok(w1.dot(&feature))
}

/// `leaky_relu(a · [h_target || h_neighbor])`. The target occupies the first half of `a`.
pub fn attention_logit(
    a: ArrayView1<f64>,
    h_target: ArrayView1<f64>,
    h_neighbor: ArrayView1<f64>,
    slope: f64,
) -> f64 {
    let d = h_target.len();
    assert_eq!(a.len(), 2 * d, "attention vector must have length 2d");
    assert_eq!(h_neighbor.len(), d, "projections must share a dimension");
    let z = a.slice(s![..d]).dot(&h_target) + a.slice(s![d..]).dot(&h_neighbor);
    leaky_relu(z, slope)
}

/// Softmax over a neighborhood's logits.
pub fn neighbor_weights(logits: &[f64]) -> Result<Vec<f64>, ModelError> {
    if logits.is_empty() {
        return Err(ModelError::Config(
            "isolated node: empty neighborhood".into(),
        ));
    }
    Ok(softmax(logits))
}

/// `elu(Σ weight_i · projection_i)`.
pub fn aggregate(weights: &[f64], projections: &[ArrayView1<f64>], elu_alpha: f64) -> Array1<f64> {
    assert_eq!(weights.len(), projections.len());
    let d = projections.first().map_or(0, |p| p.len());
    let mut acc = Array1::<f64>::zeros(d);
    for (&w, p) in weights.iter().zip(projections) {
        acc.scaled_add(w, p);
    }
    acc.mapv_into(|z| elu(z, elu_alpha))
}

/// `(1/|V|) Σ_v s · tanh(W2 · x_v + b)` over the rows of `vectors`.
pub fn importance_score(
    vectors: ArrayView2<f64>,
    s: ArrayView1<f64>,
    w2: ArrayView2<f64>,
    b: ArrayView1<f64>,
) -> f64 {
    let (score, _) = importance_with_activations(vectors, s, w2, b);
    score
}

fn importance_with_activations(
    vectors: ArrayView2<f64>,
    s: ArrayView1<f64>,
    w2: ArrayView2<f64>,
    b: ArrayView1<f64>,
) -> (f64, Array2<f64>) {
    let mut act = vectors.dot(&w2.t());
    act += &b;
    act.mapv_inplace(f64::tanh);
    let total: f64 = act.rows().into_iter().map(|row| row.dot(&s)).sum();
    (total / vectors.nrows() as f64, act)
}

/// Two-way softmax of the network importances.
pub fn fusion_weights(gamma_inter: f64, gamma_intra: f64) -> (f64, f64) {
    let p = softmax(&[gamma_inter, gamma_intra]);
    (p[0], p[1])
}

pub fn fuse(
    e: ArrayView1<f64>,
    a: ArrayView1<f64>,
    beta_inter: f64,
    beta_intra: f64,
) -> Array1<f64> {
    &e * beta_inter + &a * beta_intra
}

/// Concatenates, in attribute order, the fused vectors of each record's values.
pub fn assemble_objects(
    cad: &Cad,
    nodes: &CavNodeSet,
    fused: ArrayView2<f64>,
) -> Result<Array2<f64>, ModelError> {
    let width = fused.ncols();
    let m = cad.m();
    let mut out = Array2::zeros((cad.n(), m * width));
    for (i, rec) in cad.records().iter().enumerate() {
        for (j, &l) in rec.iter().enumerate() {
            let token = &cad.domain(j)[l];
            let id = nodes
                .index_of(j, token)
                .filter(|&id| id < fused.nrows())
                .ok_or(ModelError::UnknownValue {
                    record: i,
                    attribute: j,
                })?;
            out.slice_mut(s![i, j * width..(j + 1) * width])
                .assign(&fused.row(id));
        }
    }
    Ok(out)
}

/// Cached quantities of one attention head over one network.
#[derive(Debug, Clone)]
pub struct HeadPass {
    /// Projected nodes, `|V| × d`.
    pub projected: Array2<f64>,
    /// Pre-activation attention scores, aligned with the network's neighborhoods.
    pub scores: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    /// Weighted neighbor sums before ELU, `|V| × d`.
    pub pre_activation: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct NetworkPass {
    pub network: Network,
    pub neighborhoods: Vec<Vec<NodeId>>,
    pub heads: Vec<HeadPass>,
    /// Concatenated head outputs, `|V| × K·d`.
    pub output: Array2<f64>,
}

fn neighborhoods(
    net: &HetNet,
    which: Network,
    self_loop: bool,
) -> Result<Vec<Vec<NodeId>>, ModelError> {
    let set = net.network(which);
    (0..net.nodes().len())
        .map(|v| {
            let mut hood: Vec<NodeId> = set.neighbors(v).iter().map(|&(n, _)| n).collect();
            if self_loop {
                hood.insert(0, v);
            }
            if hood.is_empty() {
                Err(ModelError::IsolatedNode {
                    network: which,
                    node: v,
                })
            } else {
                Ok(hood)
            }
        })
        .collect()
}

fn head_pass(
    hoods: &[Vec<NodeId>],
    which: Network,
    k: usize,
    params: &NecaParams,
    config: &NecaConfig,
) -> Result<HeadPass, ModelError> {
    let d = config.head_dim;
    // one-hot features: row v of W1ᵀ is the projection of node v
    let projected = params.projection(which, k).t().to_owned();
    let a = params.attention_vector(which, k).view();
    let (a_target, a_neighbor) = (a.slice(s![..d]), a.slice(s![d..]));
    let mut scores = Vec::with_capacity(hoods.len());
    let mut weights = Vec::with_capacity(hoods.len());
    let mut pre = Array2::zeros((hoods.len(), d));
    for (t, hood) in hoods.iter().enumerate() {
        let self_term = a_target.dot(&projected.row(t));
        let z: Vec<f64> = hood
            .iter()
            .map(|&n| self_term + a_neighbor.dot(&projected.row(n)))
            .collect();
        let logits: Vec<f64> = z
            .iter()
            .map(|&x| leaky_relu(x, config.leaky_slope))
            .collect();
        let alpha = neighbor_weights(&logits)?;
        let mut row = pre.row_mut(t);
        for (&w, &n) in alpha.iter().zip(hood) {
            row.scaled_add(w, &projected.row(n));
        }
        scores.push(z);
        weights.push(alpha);
    }
    Ok(HeadPass {
        projected,
        scores,
        weights,
        pre_activation: pre,
    })
}

fn network_pass(
    net: &HetNet,
    which: Network,
    params: &NecaParams,
    config: &NecaConfig,
) -> Result<NetworkPass, ModelError> {
    let hoods = neighborhoods(net, which, config.include_self_loop)?;
    let d = config.head_dim;
    // heads are independent; collecting in head order keeps results thread-count independent
    let heads: Vec<HeadPass> = (0..config.heads)
        .into_par_iter()
        .map(|k| head_pass(&hoods, which, k, params, config))
        .collect::<Result<_, _>>()?;
    let mut output = Array2::zeros((hoods.len(), config.embedding_dim()));
    for (k, head) in heads.iter().enumerate() {
        output
            .slice_mut(s![.., k * d..(k + 1) * d])
            .assign(&head.pre_activation.mapv(|x| elu(x, config.elu_alpha)));
    }
    Ok(NetworkPass {
        network: which,
        neighborhoods: hoods,
        heads,
        output,
    })
}

/// Per-node `K·d` embeddings of one network (`e` for inter, `a` for intra).
pub fn embed_network(
    net: &HetNet,
    which: Network,
    params: &NecaParams,
    config: &NecaConfig,
) -> Result<Array2<f64>, ModelError> {
    Ok(network_pass(net, which, params, config)?.output)
}

/// Everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub inter: NetworkPass,
    pub intra: NetworkPass,
    pub gamma_inter: f64,
    pub gamma_intra: f64,
    pub beta_inter: f64,
    pub beta_intra: f64,
    tanh_inter: Array2<f64>,
    tanh_intra: Array2<f64>,
    /// Fused node vectors, `|V| × K·d`.
    pub fused: Array2<f64>,
}

pub fn forward(
    net: &HetNet,
    params: &NecaParams,
    config: &NecaConfig,
) -> Result<ForwardPass, ModelError> {
    config.validate()?;
    params.check_shapes(config, net.nodes().len())?;
    let inter = network_pass(net, Network::Inter, params, config)?;
    let intra = network_pass(net, Network::Intra, params, config)?;
    let (gamma_inter, tanh_inter) = importance_with_activations(
        inter.output.view(),
        params.s.view(),
        params.w2.view(),
        params.b.view(),
    );
    let (gamma_intra, tanh_intra) = importance_with_activations(
        intra.output.view(),
        params.s.view(),
        params.w2.view(),
        params.b.view(),
    );
    let (beta_inter, beta_intra) = fusion_weights(gamma_inter, gamma_intra);
    let fused = &inter.output * beta_inter + &intra.output * beta_intra;
    Ok(ForwardPass {
        inter,
        intra,
        gamma_inter,
        gamma_intra,
        beta_inter,
        beta_intra,
        tanh_inter,
        tanh_intra,
        fused,
    })
}

impl ForwardPass {
    /// Gradients of a scalar with respect to every parameter, given its gradient
    /// with respect to the fused node vectors.
    pub fn backward(
        &self,
        params: &NecaParams,
        config: &NecaConfig,
        grad_fused: ArrayView2<f64>,
    ) -> NecaParams {
        let mut grads = params.zeros_like();
        let (bi, ba) = (self.beta_inter, self.beta_intra);
        let mut g_inter = &grad_fused * bi;
        let mut g_intra = &grad_fused * ba;
        let g_beta_inter = (&grad_fused * &self.inter.output).sum();
        let g_beta_intra = (&grad_fused * &self.intra.output).sum();
        let g_gamma_inter = bi * ba * (g_beta_inter - g_beta_intra);

        let size = self.fused.nrows() as f64;
        for (g_gamma, act, out, g_out) in [
            (
                g_gamma_inter,
                &self.tanh_inter,
                &self.inter.output,
                &mut g_inter,
            ),
            (
                -g_gamma_inter,
                &self.tanh_intra,
                &self.intra.output,
                &mut g_intra,
            ),
        ] {
            let scale = g_gamma / size;
            grads.s.scaled_add(scale, &act.sum_axis(Axis(0)));
            // rows: gradient at the tanh pre-activation for each node
            let mut g_pre = act.mapv(|u| 1.0 - u * u);
            g_pre *= &params.s;
            g_pre *= scale;
            grads.w2 += &g_pre.t().dot(out);
            grads.b += &g_pre.sum_axis(Axis(0));
            *g_out += &g_pre.dot(&params.w2);
        }

        network_backward(&self.inter, params, config, g_inter.view(), &mut grads);
        network_backward(&self.intra, params, config, g_intra.view(), &mut grads);
        grads
    }
}

fn head_backward(
    pass: &NetworkPass,
    k: usize,
    params: &NecaParams,
    config: &NecaConfig,
    g_out: ArrayView2<f64>,
) -> (Array2<f64>, Array1<f64>) {
    let d = config.head_dim;
    let head = &pass.heads[k];
    let a = params.attention_vector(pass.network, k);
    let (a_target, a_neighbor) = (a.slice(s![..d]), a.slice(s![d..]));
    let mut g_proj = Array2::<f64>::zeros(head.projected.raw_dim());
    let mut g_a = Array1::<f64>::zeros(2 * d);
    for (t, hood) in pass.neighborhoods.iter().enumerate() {
        let mut g_sum = g_out.slice(s![t, k * d..(k + 1) * d]).to_owned();
        Zip::from(&mut g_sum)
            .and(head.pre_activation.row(t))
            .for_each(|g, &z| *g *= elu_grad(z, config.elu_alpha));
        let alpha = &head.weights[t];
        let g_alpha: Vec<f64> = hood
            .iter()
            .map(|&n| g_sum.dot(&head.projected.row(n)))
            .collect();
        let mean: f64 = alpha.iter().zip(&g_alpha).map(|(p, g)| p * g).sum();
        let h_t = head.projected.row(t);
        for (i, &n) in hood.iter().enumerate() {
            g_proj.row_mut(n).scaled_add(alpha[i], &g_sum);
            let g_z = alpha[i]
                * (g_alpha[i] - mean)
                * leaky_relu_grad(head.scores[t][i], config.leaky_slope);
            if g_z == 0.0 {
                continue;
            }
            let h_n = head.projected.row(n);
            g_a.slice_mut(s![..d]).scaled_add(g_z, &h_t);
            g_a.slice_mut(s![d..]).scaled_add(g_z, &h_n);
            g_proj.row_mut(t).scaled_add(g_z, &a_target);
            g_proj.row_mut(n).scaled_add(g_z, &a_neighbor);
        }
    }
    (g_proj, g_a)
}

fn network_backward(
    pass: &NetworkPass,
    params: &NecaParams,
    config: &NecaConfig,
    g_out: ArrayView2<f64>,
    grads: &mut NecaParams,
) {
    let per_head: Vec<(Array2<f64>, Array1<f64>)> = (0..pass.heads.len())
        .into_par_iter()
        .map(|k| head_backward(pass, k, params, config, g_out))
        .collect();
    // accumulate in head order; shared projections receive both networks' terms
    for (k, (g_proj, g_a)) in per_head.into_iter().enumerate() {
        let p_slot = grads.projection_slot(pass.network, k);
        grads.projections[p_slot] += &g_proj.t();
        let a_slot = grads.attention_slot(pass.network, k);
        grads.attention[a_slot] += &g_a;
    }
}

/// Learned vectors for every node and object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub inter: Array2<f64>,
    pub intra: Array2<f64>,
    pub fused: Array2<f64>,
    pub gamma_inter: f64,
    pub gamma_intra: f64,
    pub beta_inter: f64,
    pub beta_intra: f64,
    /// `n × m·K·d`.
    pub objects: Array2<f64>,
}

impl EmbeddingTable {
    pub fn from_pass(cad: &Cad, net: &HetNet, pass: ForwardPass) -> Result<Self, ModelError> {
        let objects = assemble_objects(cad, net.nodes(), pass.fused.view())?;
        Ok(Self {
            inter: pass.inter.output,
            intra: pass.intra.output,
            fused: pass.fused,
            gamma_inter: pass.gamma_inter,
            gamma_intra: pass.gamma_intra,
            beta_inter: pass.beta_inter,
            beta_intra: pass.beta_intra,
            objects,
        })
    }
}
