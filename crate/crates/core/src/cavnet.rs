//! Attribute-value nodes and the two weighted networks built over them.
//!
//! The inter network links values of different attributes that co-occur in at
//! least one record. The intra network links every pair of values within an
//! attribute, plus one randomly drawn connectivity edge per node towards a
//! foreign attribute. Both weight sets are a softmax over all edges of the
//! network, computed in log space. Neighborhoods are structural: an edge
//! exists or it does not, regardless of how small its weight underflows to.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Cad;
use crate::numeric::log_softmax;

pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{network} network requires >= 2 attributes, dataset has {m}")]
    TooFewAttributes { network: Network, m: usize },
    #[error("nodes {0} and {1} belong to the same attribute")]
    SameAttribute(NodeId, NodeId),
    #[error("nodes {0} and {1} belong to different attributes")]
    DifferentAttributes(NodeId, NodeId),
    #[error("node pair ({0}, {0}) is not an edge")]
    SelfPair(NodeId),
    #[error("node {neighbor} is not an inter neighbor of {target}")]
    NotAdjacent { target: NodeId, neighbor: NodeId },
    #[error("node id {0} out of range")]
    UnknownNode(NodeId),
    #[error("connectivity coefficient must be finite and > 0, got {0}")]
    InvalidBeta(f64),
    #[error("edge list: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    Inter,
    Intra,
}

impl Network {
    pub const BOTH: [Network; 2] = [Network::Inter, Network::Intra];
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Network::Inter => "inter",
            Network::Intra => "intra",
        })
    }
}

impl std::str::FromStr for Network {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inter" => Ok(Network::Inter),
            "intra" => Ok(Network::Intra),
            other => Err(format!(
                "unknown network `{other}` (expected inter or intra)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CavNode {
    pub attribute: usize,
    pub value: usize,
    pub token: String,
}

/// Every observed (attribute, value) pair, numbered attribute by attribute.
#[derive(Debug, Clone)]
pub struct CavNodeSet {
    nodes: Vec<CavNode>,
    offsets: Vec<usize>,
    counts: Vec<usize>,
    attribute_names: Vec<String>,
    index: HashMap<(usize, String), NodeId>,
}

impl CavNodeSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of attributes.
    pub fn m(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn nodes(&self) -> &[CavNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &CavNode {
        &self.nodes[id]
    }

    pub fn id(&self, attribute: usize, value: usize) -> NodeId {
        self.offsets[attribute] + value
    }

    pub fn index_of(&self, attribute: usize, token: &str) -> Option<NodeId> {
        self.index.get(&(attribute, token.to_string())).copied()
    }

    /// Occurrence count g of a node.
    pub fn count(&self, id: NodeId) -> usize {
        self.counts[id]
    }

    pub fn attribute_of(&self, id: NodeId) -> usize {
        self.nodes[id].attribute
    }

    pub fn attribute_range(&self, attribute: usize) -> Range<NodeId> {
        self.offsets[attribute]..self.offsets[attribute + 1]
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    /// `attribute=token`, unambiguous across attributes.
    pub fn label(&self, id: NodeId) -> String {
        let node = &self.nodes[id];
        format!("{}={}", self.attribute_names[node.attribute], node.token)
    }
}

pub fn build_node_set(cad: &Cad) -> CavNodeSet {
    let counts_by_attr = cad.value_counts();
    let mut nodes = Vec::new();
    let mut offsets = Vec::with_capacity(cad.m() + 1);
    let mut counts = Vec::new();
    let mut index = HashMap::new();
    for (j, domain) in cad.domains().iter().enumerate() {
        offsets.push(nodes.len());
        for (l, token) in domain.iter().enumerate() {
            index.insert((j, token.clone()), nodes.len());
            nodes.push(CavNode {
                attribute: j,
                value: l,
                token: token.clone(),
            });
            counts.push(counts_by_attr[j][l]);
        }
    }
    offsets.push(nodes.len());
    CavNodeSet {
        nodes,
        offsets,
        counts,
        attribute_names: cad.attribute_names().to_vec(),
        index,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    CoOccurrence,
    WithinAttribute,
    Connectivity,
}

impl EdgeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeKind::CoOccurrence => "co_occurrence",
            EdgeKind::WithinAttribute => "within_attribute",
            EdgeKind::Connectivity => "connectivity",
        }
    }
}

impl std::str::FromStr for EdgeKind {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "co_occurrence" => Ok(EdgeKind::CoOccurrence),
            "within_attribute" => Ok(EdgeKind::WithinAttribute),
            "connectivity" => Ok(EdgeKind::Connectivity),
            other => Err(GraphError::Format(format!("unknown edge kind `{other}`"))),
        }
    }
}

/// Undirected edge stored once with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub raw: f64,
    pub log_weight: f64,
    pub weight: f64,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub struct EdgeSet {
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeId, usize)>>,
}

impl EdgeSet {
    /// Normalizes raw scores with a softmax over every edge. Duplicate pairs keep the first entry.
    pub fn from_raw_edges(
        node_count: usize,
        raw_edges: impl IntoIterator<Item = (NodeId, NodeId, f64, EdgeKind)>,
    ) -> Result<Self, GraphError> {
        let mut unique: BTreeMap<(NodeId, NodeId), (f64, EdgeKind)> = BTreeMap::new();
        for (a, b, raw, kind) in raw_edges {
            if a == b {
                return Err(GraphError::SelfPair(a));
            }
            if a >= node_count || b >= node_count {
                return Err(GraphError::UnknownNode(a.max(b)));
            }
            unique.entry((a.min(b), a.max(b))).or_insert((raw, kind));
        }
        let raws: Vec<f64> = unique.values().map(|(r, _)| *r).collect();
        let log_w = log_softmax(&raws);
        let mut adjacency = vec![Vec::new(); node_count];
        let edges: Vec<Edge> = unique
            .into_iter()
            .zip(log_w)
            .enumerate()
            .map(|(idx, (((u, v), (raw, kind)), lw))| {
                adjacency[u].push((v, idx));
                adjacency[v].push((u, idx));
                Edge {
                    u,
                    v,
                    raw,
                    log_weight: lw,
                    weight: lw.exp(),
                    kind,
                }
            })
            .collect();
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { edges, adjacency })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Structural neighbors of `node` with the index of the connecting edge, sorted by neighbor id.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, usize)] {
        &self.adjacency[node]
    }

    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<&Edge> {
        self.adjacency
            .get(a)?
            .binary_search_by_key(&b, |&(n, _)| n)
            .ok()
            .map(|pos| &self.edges[self.adjacency[a][pos].1])
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }
}

/// Number of records in which the tokens of `u` and `v` appear together.
pub fn co_occurrence(
    cad: &Cad,
    nodes: &CavNodeSet,
    u: NodeId,
    v: NodeId,
) -> Result<usize, GraphError> {
    for id in [u, v] {
        if id >= nodes.len() {
            return Err(GraphError::UnknownNode(id));
        }
    }
    let (a, b) = (nodes.node(u), nodes.node(v));
    if a.attribute == b.attribute {
        return Err(GraphError::SameAttribute(u, v));
    }
    Ok(cad
        .records()
        .iter()
        .filter(|r| r[a.attribute] == a.value && r[b.attribute] == b.value)
        .count())
}

pub fn build_inter_network(cad: &Cad, nodes: &CavNodeSet) -> Result<EdgeSet, GraphError> {
    let m = cad.m();
    if m < 2 {
        return Err(GraphError::TooFewAttributes {
            network: Network::Inter,
            m,
        });
    }
    let size = nodes.len();
    let mut counts = vec![0u32; size * size];
    let mut ids = vec![0usize; m];
    for rec in cad.records() {
        for (j, &l) in rec.iter().enumerate() {
            ids[j] = nodes.id(j, l);
        }
        for a in 0..m {
            for b in (a + 1)..m {
                // node ids grow with attribute index, so ids[a] < ids[b]
                counts[ids[a] * size + ids[b]] += 1;
            }
        }
    }
    let raw = (0..size).flat_map(|u| {
        let counts = &counts;
        ((u + 1)..size).filter_map(move |v| {
            let c = counts[u * size + v];
            (c > 0).then_some((u, v, c as f64, EdgeKind::CoOccurrence))
        })
    });
    EdgeSet::from_raw_edges(size, raw)
}

/// Raw intra affinity: `n / (g(u) + g(v))` within an attribute, `beta` across attributes.
pub fn intra_affinity(
    nodes: &CavNodeSet,
    n: usize,
    u: NodeId,
    v: NodeId,
    beta: f64,
) -> Result<f64, GraphError> {
    if u == v {
        return Err(GraphError::SelfPair(u));
    }
    if u >= nodes.len() || v >= nodes.len() {
        return Err(GraphError::UnknownNode(u.max(v)));
    }
    if nodes.attribute_of(u) == nodes.attribute_of(v) {
        Ok(n as f64 / (nodes.count(u) + nodes.count(v)) as f64)
    } else {
        Ok(beta)
    }
}

pub fn build_intra_network(
    cad: &Cad,
    nodes: &CavNodeSet,
    beta: f64,
    seed: u64,
) -> Result<EdgeSet, GraphError> {
    let m = cad.m();
    if m < 2 {
        return Err(GraphError::TooFewAttributes {
            network: Network::Intra,
            m,
        });
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(GraphError::InvalidBeta(beta));
    }
    let n = cad.n();
    let mut raw = Vec::new();
    for j in 0..m {
        let range = nodes.attribute_range(j);
        for u in range.clone() {
            for v in (u + 1)..range.end {
                raw.push((
                    u,
                    v,
                    intra_affinity(nodes, n, u, v, beta)?,
                    EdgeKind::WithinAttribute,
                ));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for u in 0..nodes.len() {
        let own = nodes.attribute_of(u);
        let mut other = rng.gen_range(0..m - 1);
        if other >= own {
            other += 1;
        }
        let range = nodes.attribute_range(other);
        let v = rng.gen_range(range);
        raw.push((u, v, beta, EdgeKind::Connectivity));
    }
    EdgeSet::from_raw_edges(nodes.len(), raw)
}

/// The two weighted networks over one node set.
#[derive(Debug, Clone)]
pub struct HetNet {
    nodes: CavNodeSet,
    n_records: usize,
    inter: EdgeSet,
    intra: EdgeSet,
    beta: f64,
    seed: u64,
}

impl HetNet {
    pub fn build(cad: &Cad, beta: f64, seed: u64) -> Result<Self, GraphError> {
        let nodes = build_node_set(cad);
        let inter = build_inter_network(cad, &nodes)?;
        let intra = build_intra_network(cad, &nodes, beta, seed)?;
        Ok(Self {
            nodes,
            n_records: cad.n(),
            inter,
            intra,
            beta,
            seed,
        })
    }

    /// Assembles a network from hand-built edge sets.
    pub fn from_parts(
        nodes: CavNodeSet,
        n_records: usize,
        inter: EdgeSet,
        intra: EdgeSet,
        beta: f64,
        seed: u64,
    ) -> Result<Self, GraphError> {
        for set in [&inter, &intra] {
            if set.node_count() != nodes.len() {
                return Err(GraphError::UnknownNode(set.node_count().max(nodes.len())));
            }
        }
        Ok(Self {
            nodes,
            n_records,
            inter,
            intra,
            beta,
            seed,
        })
    }

    pub fn nodes(&self) -> &CavNodeSet {
        &self.nodes
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    pub fn network(&self, which: Network) -> &EdgeSet {
        match which {
            Network::Inter => &self.inter,
            Network::Intra => &self.intra,
        }
    }

    pub fn inter(&self) -> &EdgeSet {
        &self.inter
    }

    pub fn intra(&self) -> &EdgeSet {
        &self.intra
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// One row of an exported edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub u: String,
    pub v: String,
    pub raw: f64,
    pub weight: f64,
    pub kind: EdgeKind,
}

const EDGE_HEADER: &str = "u\tv\traw\tweight\tkind";

pub fn write_edge_list<W: Write>(
    net: &HetNet,
    which: Network,
    mut out: W,
) -> Result<(), GraphError> {
    writeln!(out, "{EDGE_HEADER}")?;
    for e in net.network(which).edges() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            net.nodes.label(e.u),
            net.nodes.label(e.v),
            e.raw,
            e.weight,
            e.kind.as_str()
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_edge_list(
    net: &HetNet,
    which: Network,
    path: &std::path::Path,
) -> Result<(), GraphError> {
    let file = std::fs::File::create(path)?;
    write_edge_list(net, which, std::io::BufWriter::new(file))
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<Vec<EdgeRecord>, GraphError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if line != EDGE_HEADER {
                return Err(GraphError::Format(format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(GraphError::Format(format!(
                "line {}: expected 5 fields",
                idx + 1
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| GraphError::Format(format!("line {}: bad number `{s}`", idx + 1)))
        };
        out.push(EdgeRecord {
            u: fields[0].to_string(),
            v: fields[1].to_string(),
            raw: num(fields[2])?,
            weight: num(fields[3])?,
            kind: fields[4].parse()?,
        });
    }
    Ok(out)
}
