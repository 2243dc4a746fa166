//! Generalized feedforward multilayer perceptrons under a direct encoding.
//!
//! A [`Network`] holds two dense `(m + n_max + n)²` matrices, one of 0/1
//! connection flags and one of weights, plus one bias weight per non-input
//! node. Nodes are ordered inputs first, then hidden slots, then outputs, and
//! node `i` may receive a connection from any earlier node `j < i`. The
//! constant bias source has value [`BIAS_SOURCE`].
//!
//! Active hidden nodes always occupy the first `N` hidden slots; the
//! remaining `n_max - N` slots have all-zero rows and columns. Deleting or
//! splitting a hidden node re-packs the slots so strict lower-triangularity
//! is preserved.

use std::fmt::Write as _;
use std::ops::Range;

use rand::Rng;

use crate::error::{config, Error, Result};

/// Value of the constant bias source feeding every non-input node.
pub const BIAS_SOURCE: f64 = 1.0;

/// Logistic activation `1 / (1 + e^-z)`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// How bias weights are initialized by [`random_network`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BiasInit {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
}

impl BiasInit {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BiasInit::Constant(v) => v,
            BiasInit::Uniform { lo, hi } => uniform(rng, lo, hi),
        }
    }
}

pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    inputs: usize,
    outputs: usize,
    max_hidden: usize,
    hidden: usize,
    connectivity: Vec<bool>,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Node values and pre-activation sums from one forward pass.
///
/// Both vectors span every node slot; inactive hidden slots hold `0.0`, and
/// `net_values` is `0.0` at input positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActivationTrace {
    pub node_values: Vec<f64>,
    pub net_values: Vec<f64>,
}

impl Network {
    /// A network with `hidden` active hidden nodes and no connections.
    pub fn empty(inputs: usize, outputs: usize, max_hidden: usize, hidden: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(config("networks need at least one input and one output"));
        }
        if hidden == 0 || hidden > max_hidden {
            return Err(config(format!(
                "hidden node count {hidden} outside [1, {max_hidden}]"
            )));
        }
        let d = inputs + max_hidden + outputs;
        Ok(Self {
            inputs,
            outputs,
            max_hidden,
            hidden,
            connectivity: vec![false; d * d],
            weights: vec![0.0; d * d],
            bias: vec![0.0; max_hidden + outputs],
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn max_hidden(&self) -> usize {
        self.max_hidden
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden
    }

    /// Total number of node slots, `m + n_max + n`.
    pub fn node_count(&self) -> usize {
        self.inputs + self.max_hidden + self.outputs
    }

    /// Slot indices of the active hidden nodes.
    pub fn hidden_nodes(&self) -> Range<usize> {
        self.inputs..self.inputs + self.hidden
    }

    /// Slot indices of the output nodes.
    pub fn output_nodes(&self) -> Range<usize> {
        let start = self.inputs + self.max_hidden;
        start..start + self.outputs
    }

    pub fn is_active(&self, node: usize) -> bool {
        node < self.inputs + self.hidden || self.output_nodes().contains(&node)
    }

    /// Active non-input nodes in evaluation order.
    pub fn computing_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.hidden_nodes().chain(self.output_nodes())
    }

    /// Whether `to` may receive a connection from `from` given the current
    /// set of active nodes.
    pub fn is_legal(&self, to: usize, from: usize) -> bool {
        from < to && to >= self.inputs && self.is_active(to) && self.is_active(from)
    }

    #[inline]
    fn idx(&self, to: usize, from: usize) -> usize {
        to * self.node_count() + from
    }

    pub fn is_connected(&self, to: usize, from: usize) -> bool {
        self.connectivity[self.idx(to, from)]
    }

    pub fn weight(&self, to: usize, from: usize) -> f64 {
        self.weights[self.idx(to, from)]
    }

    /// Adds (or overwrites) the connection `from -> to`.
    pub fn connect(&mut self, to: usize, from: usize, weight: f64) -> Result<()> {
        if !self.is_legal(to, from) {
            return Err(config(format!("connection {from} -> {to} is not feedforward-legal")));
        }
        let k = self.idx(to, from);
        self.connectivity[k] = true;
        self.weights[k] = weight;
        Ok(())
    }

    /// Sets the weight of an existing connection.
    pub fn set_weight(&mut self, to: usize, from: usize, weight: f64) -> Result<()> {
        if !self.is_connected(to, from) {
            return Err(config(format!("no connection {from} -> {to}")));
        }
        let k = self.idx(to, from);
        self.weights[k] = weight;
        Ok(())
    }

    pub fn disconnect(&mut self, to: usize, from: usize) {
        let k = self.idx(to, from);
        self.connectivity[k] = false;
        self.weights[k] = 0.0;
    }

    pub fn bias(&self, node: usize) -> f64 {
        self.bias[node - self.inputs]
    }

    pub fn set_bias(&mut self, node: usize, weight: f64) {
        let k = node - self.inputs;
        self.bias[k] = weight;
    }

    pub fn connection_count(&self) -> usize {
        self.connectivity.iter().filter(|&&c| c).count()
    }

    /// Present connections as `(to, from)` pairs in row-major order.
    pub fn connections(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.node_count();
        self.connectivity
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(k, _)| (k / d, k % d))
    }

    /// Every feedforward-legal `(to, from)` pair among active nodes, present
    /// or not, in row-major order.
    pub fn legal_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.computing_nodes().flat_map(move |to| {
            (0..to)
                .filter(move |&from| self.is_active(from))
                .map(move |from| (to, from))
        })
    }

    /// Legal pairs that are currently absent.
    pub fn virtual_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.legal_pairs().filter(|&(to, from)| !self.is_connected(to, from))
    }

    /// Raw row-major weight matrix.
    pub fn weight_matrix(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weight_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_vector_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Bias weights, one per hidden slot then one per output.
    pub fn bias_vector(&self) -> &[f64] {
        &self.bias
    }

    /// Evaluates the network on one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = ActivationTrace::default();
        self.forward_into(input, &mut trace)?;
        Ok(trace.node_values[self.output_nodes()].to_vec())
    }

    /// Evaluates the network and returns every node's value.
    pub fn trace(&self, input: &[f64]) -> Result<ActivationTrace> {
        let mut trace = ActivationTrace::default();
        self.forward_into(input, &mut trace)?;
        Ok(trace)
    }

    /// Forward pass into a reusable buffer.
    pub fn forward_into(&self, input: &[f64], trace: &mut ActivationTrace) -> Result<()> {
        if input.len() != self.inputs {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.inputs,
                found: input.len(),
            });
        }
        let d = self.node_count();
        trace.node_values.clear();
        trace.node_values.resize(d, 0.0);
        trace.net_values.clear();
        trace.net_values.resize(d, 0.0);
        trace.node_values[..self.inputs].copy_from_slice(input);
        for i in self.computing_nodes() {
            let row = &self.weights[i * d..i * d + i];
            let mut net = self.bias[i - self.inputs] * BIAS_SOURCE;
            for (w, x) in row.iter().zip(&trace.node_values[..i]) {
                net += w * x;
            }
            trace.net_values[i] = net;
            trace.node_values[i] = sigmoid(net);
        }
        Ok(())
    }

    /// Number of entries in a flattened genome: present connections plus the
    /// bias weights of active non-input nodes.
    pub fn genome_len(&self) -> usize {
        self.connection_count() + self.hidden + self.outputs
    }

    /// Flattens the trainable parameters.
    ///
    /// Order: present connection weights in row-major order over the
    /// connectivity matrix, then bias weights of active hidden nodes and
    /// outputs in node order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut genome = Vec::with_capacity(self.genome_len());
        genome.extend(self.connections().map(|(to, from)| self.weight(to, from)));
        genome.extend(self.computing_nodes().map(|i| self.bias(i)));
        genome
    }

    /// Copies `genome` into a clone of `self` (the template), using the
    /// ordering documented on [`Network::flatten`].
    pub fn unflatten(&self, genome: &[f64]) -> Result<Network> {
        let mut net = self.clone();
        net.load_genome(genome)?;
        Ok(net)
    }

    /// In-place variant of [`Network::unflatten`].
    pub fn load_genome(&mut self, genome: &[f64]) -> Result<()> {
        let expected = self.genome_len();
        if genome.len() != expected {
            return Err(Error::Dimension {
                context: "genome length",
                expected,
                found: genome.len(),
            });
        }
        let mut values = genome.iter();
        for (k, &c) in self.connectivity.iter().enumerate() {
            if c {
                self.weights[k] = *values.next().expect("length checked");
            }
        }
        let m = self.inputs;
        for i in self.hidden_nodes().chain(self.output_nodes()) {
            self.bias[i - m] = *values.next().expect("length checked");
        }
        Ok(())
    }

    /// Removes hidden node `node`, shifting later hidden nodes down one slot.
    pub fn delete_hidden(&mut self, node: usize) -> Result<()> {
        if !self.hidden_nodes().contains(&node) {
            return Err(config(format!("{node} is not an active hidden node")));
        }
        if self.hidden == 1 {
            return Err(config("cannot delete the last hidden node"));
        }
        let map = |slot: usize| -> Option<usize> {
            if slot == node {
                None
            } else if slot > node && slot < self.inputs + self.max_hidden {
                Some(slot - 1)
            } else {
                Some(slot)
            }
        };
        *self = self.remap(map, self.hidden - 1);
        Ok(())
    }

    /// Splits hidden node `node` into two nodes with identical incoming
    /// weights. Each outgoing weight `w` becomes `(1 + beta) w` on the
    /// original and `-beta w` on the copy, so the network function is
    /// unchanged. Returns the slot of the new node (`node + 1`).
    pub fn split_hidden(&mut self, node: usize, beta: f64) -> Result<usize> {
        if !self.hidden_nodes().contains(&node) {
            return Err(config(format!("{node} is not an active hidden node")));
        }
        if self.hidden == self.max_hidden {
            return Err(config("hidden node limit reached"));
        }
        let hidden_end = self.inputs + self.max_hidden;
        let map = |slot: usize| -> Option<usize> {
            if slot > node && slot < hidden_end {
                Some(slot + 1)
            } else {
                Some(slot)
            }
        };
        let mut net = self.remap(map, self.hidden + 1);
        let copy = node + 1;
        let d = net.node_count();
        for from in 0..node {
            let k_src = node * d + from;
            let k_dst = copy * d + from;
            net.connectivity[k_dst] = net.connectivity[k_src];
            net.weights[k_dst] = net.weights[k_src];
        }
        net.bias[copy - net.inputs] = net.bias[node - net.inputs];
        for to in copy + 1..d {
            let k_src = to * d + node;
            if net.connectivity[k_src] {
                let w = net.weights[k_src];
                net.weights[k_src] = (1.0 + beta) * w;
                let k_dst = to * d + copy;
                net.connectivity[k_dst] = true;
                net.weights[k_dst] = -beta * w;
            }
        }
        *self = net;
        Ok(copy)
    }

    fn remap(&self, map: impl Fn(usize) -> Option<usize>, hidden: usize) -> Network {
        let d = self.node_count();
        let mut out = Network {
            hidden,
            connectivity: vec![false; d * d],
            weights: vec![0.0; d * d],
            bias: vec![0.0; self.bias.len()],
            ..*self
        };
        for old in 0..d {
            let Some(new) = map(old) else { continue };
            if old >= self.inputs {
                out.bias[new - self.inputs] = self.bias[old - self.inputs];
            }
            for from_old in 0..old {
                let Some(from_new) = map(from_old) else { continue };
                let k_old = old * d + from_old;
                let k_new = new * d + from_new;
                out.connectivity[k_new] = self.connectivity[k_old];
                out.weights[k_new] = self.weights[k_old];
            }
        }
        out
    }

    /// Checks every structural invariant of the encoding.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let d = self.node_count();
        if self.hidden == 0 || self.hidden > self.max_hidden {
            return Err(format!("hidden count {} outside [1, {}]", self.hidden, self.max_hidden));
        }
        for to in 0..d {
            for from in 0..d {
                let k = to * d + from;
                let c = self.connectivity[k];
                if c && from >= to {
                    return Err(format!("connection {from} -> {to} is not lower-triangular"));
                }
                if c && to < self.inputs {
                    return Err(format!("input node {to} has an incoming connection"));
                }
                if !c && self.weights[k] != 0.0 {
                    return Err(format!("absent connection {from} -> {to} has weight"));
                }
                if (c || self.weights[k] != 0.0) && (!self.is_active(to) || !self.is_active(from)) {
                    return Err(format!("inactive node touched by {from} -> {to}"));
                }
            }
        }
        for slot in self.inputs + self.hidden..self.inputs + self.max_hidden {
            if self.bias[slot - self.inputs] != 0.0 {
                return Err(format!("inactive hidden slot {slot} has a bias weight"));
            }
        }
        Ok(())
    }

    /// Plain-text dump: header `m n n_max N`, then the connectivity rows,
    /// the weight rows and the bias vector, space separated.
    pub fn dump(&self) -> String {
        let d = self.node_count();
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {} {}", self.inputs, self.outputs, self.max_hidden, self.hidden);
        for to in 0..d {
            let row: Vec<&str> = (0..d)
                .map(|from| if self.is_connected(to, from) { "1" } else { "0" })
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        for to in 0..d {
            let row: Vec<String> = (0..d).map(|from| self.weight(to, from).to_string()).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let bias: Vec<String> = self.bias.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "{}", bias.join(" "));
        s
    }

    /// Parses the format written by [`Network::dump`].
    pub fn parse_dump(text: &str) -> Result<Network> {
        let bad = |msg: String| Error::Dump(msg);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("empty input".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad header token {t:?}"))))
            .collect::<Result<_>>()?;
        let [m, n, n_max, hidden] = header[..] else {
            return Err(bad("header must have four fields".into()));
        };
        let mut net = Network::empty(m, n, n_max, hidden).map_err(|e| bad(e.to_string()))?;
        let d = net.node_count();
        let mut row_values = |what: &str, len: usize| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {what} row")))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad {what} value {t:?}"))))
                .collect::<Result<_>>()?;
            if values.len() != len {
                return Err(bad(format!("{what} row has {} values, expected {len}", values.len())));
            }
            Ok(values)
        };
        for to in 0..d {
            for (from, v) in row_values("connectivity", d)?.into_iter().enumerate() {
                net.connectivity[to * d + from] = match v {
                    0.0 => false,
                    1.0 => true,
                    other => return Err(bad(format!("connectivity entry {other} is not 0/1"))),
                };
            }
        }
        for to in 0..d {
            let row = row_values("weight", d)?;
            net.weights[to * d..(to + 1) * d].copy_from_slice(&row);
        }
        net.bias = row_values("bias", n_max + n)?;
        net.check_invariants().map_err(bad)?;
        Ok(net)
    }
}

/// Parameters for [`random_network`].
#[derive(Clone, Debug, PartialEq)]
pub struct RandomNetworkParams {
    pub inputs: usize,
    pub outputs: usize,
    pub max_hidden: usize,
    pub hidden_range: (usize, usize),
    pub density: f64,
    pub weight_range: (f64, f64),
    pub bias_init: BiasInit,
}

/// Draws a random network: hidden count uniform in `hidden_range`, each legal
/// connection present with probability `density`, weights uniform in
/// `weight_range`.
pub fn random_network<R: Rng + ?Sized>(params: &RandomNetworkParams, rng: &mut R) -> Result<Network> {
    let (lo, hi) = params.hidden_range;
    if lo == 0 || lo > hi || hi > params.max_hidden {
        return Err(config(format!(
            "hidden range ({lo}, {hi}) must satisfy 1 <= lo <= hi <= {}",
            params.max_hidden
        )));
    }
    if !(0.0..=1.0).contains(&params.density) {
        return Err(config(format!("density {} outside [0, 1]", params.density)));
    }
    let (wlo, whi) = params.weight_range;
    if !(wlo <= whi) || !wlo.is_finite() || !whi.is_finite() {
        return Err(config(format!("empty weight range ({wlo}, {whi})")));
    }
    let hidden = rng.random_range(lo..=hi);
    let mut net = Network::empty(params.inputs, params.outputs, params.max_hidden, hidden)?;
    let pairs: Vec<(usize, usize)> = net.legal_pairs().collect();
    for (to, from) in pairs {
        if rng.random::<f64>() < params.density {
            let w = uniform(rng, wlo, whi);
            net.connect(to, from, w)?;
        }
    }
    let nodes: Vec<usize> = net.computing_nodes().collect();
    for node in nodes {
        let b = params.bias_init.sample(rng);
        net.set_bias(node, b);
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(inputs: usize, outputs: usize, hidden: (usize, usize), density: f64) -> RandomNetworkParams {
        RandomNetworkParams {
            inputs,
            outputs,
            max_hidden: 6,
            hidden_range: hidden,
            density,
            weight_range: (-0.5, 0.5),
            bias_init: BiasInit::Uniform { lo: -0.5, hi: 0.5 },
        }
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        for z in [-3.0, -0.7, 0.1, 2.5, 10.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
        // 1 / (1 + e^-2) to 16 digits.
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!(sigmoid(1.0) > sigmoid(0.999));
    }

    #[test]
    fn zero_weights_give_half() {
        let mut net = Network::empty(3, 2, 4, 2).unwrap();
        let pairs: Vec<_> = net.legal_pairs().collect();
        for (to, from) in pairs {
            net.connect(to, from, 0.0).unwrap();
        }
        assert_eq!(net.forward(&[0.3, -1.0, 7.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn single_direct_connection() {
        let mut net = Network::empty(1, 1, 1, 1).unwrap();
        let out = net.output_nodes().start;
        net.connect(out, 0, 1.0).unwrap();
        assert_eq!(net.forward(&[0.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn two_sigmoid_composition() {
        let mut net = Network::empty(1, 1, 1, 1).unwrap();
        let h = net.hidden_nodes().start;
        let o = net.output_nodes().start;
        net.connect(h, 0, 1.0).unwrap();
        net.connect(o, h, 2.0).unwrap();
        let y = net.forward(&[2.0]).unwrap()[0];
        // f(2) = 0.8807970779778823, 2 f(2) = 1.7615941559557646,
        // f(1.7615941559557646) = 0.8534092045709026 (hand evaluation).
        assert!((y - 0.853_409_204_570_902_6).abs() < 1e-12, "{y}");
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = Network::empty(2, 1, 1, 1).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn full_density_connects_every_legal_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = random_network(&params(9, 2, (3, 3), 1.0), &mut rng).unwrap();
        assert_eq!(net.hidden_count(), 3);
        // m*h + h(h-1)/2 + n(m+h) + n(n-1)/2
        assert_eq!(net.connection_count(), 27 + 3 + 24 + 1);
        assert_eq!(net.virtual_pairs().count(), 0);
        net.check_invariants().unwrap();
    }

    #[test]
    fn zero_density_leaves_only_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = random_network(&params(4, 2, (1, 3), 0.0), &mut rng).unwrap();
        assert_eq!(net.connection_count(), 0);
        let out = net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        for (k, node) in net.output_nodes().enumerate() {
            assert_eq!(out[k], sigmoid(net.bias(node)));
        }
    }

    #[test]
    fn infeasible_parameters_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(random_network(&params(2, 1, (0, 2), 1.0), &mut rng).is_err());
        assert!(random_network(&params(2, 1, (3, 2), 1.0), &mut rng).is_err());
        assert!(random_network(&params(2, 1, (1, 7), 1.0), &mut rng).is_err());
        assert!(random_network(&params(2, 1, (1, 2), 1.5), &mut rng).is_err());
    }

    #[test]
    fn genome_counts_connections_and_biases() {
        let mut net = Network::empty(2, 1, 3, 1).unwrap();
        let h = net.hidden_nodes().start;
        let o = net.output_nodes().start;
        net.connect(h, 0, 0.1).unwrap();
        net.connect(h, 1, 0.2).unwrap();
        net.connect(o, h, 0.3).unwrap();
        assert_eq!(net.genome_len(), 5);
        let zero = net.unflatten(&[0.0; 5]).unwrap();
        assert_eq!(zero.forward(&[3.0, -4.0]).unwrap(), vec![0.5]);
        assert!(net.unflatten(&[0.0; 4]).is_err());
    }

    #[test]
    fn delete_hidden_repacks_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = random_network(&params(3, 2, (3, 3), 1.0), &mut rng).unwrap();
        let last = net.hidden_nodes().end - 1;
        let w_last_out = net.weight(net.output_nodes().start, last);
        net.delete_hidden(net.hidden_nodes().start).unwrap();
        assert_eq!(net.hidden_count(), 2);
        net.check_invariants().unwrap();
        // The former third hidden node now sits in the second slot.
        assert_eq!(net.weight(net.output_nodes().start, last - 1), w_last_out);
        let mut single = Network::empty(1, 1, 2, 1).unwrap();
        assert!(single.delete_hidden(1).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = random_network(&params(3, 2, (1, 4), 0.7), &mut rng).unwrap();
        let parsed = Network::parse_dump(&net.dump()).unwrap();
        assert_eq!(parsed, net);
        assert!(Network::parse_dump("1 1 1").is_err());
    }

    proptest! {
        #[test]
        fn flatten_round_trip(seed in any::<u64>(), density in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_network(&params(3, 2, (1, 4), density), &mut rng).unwrap();
            let genome = net.flatten();
            prop_assert_eq!(genome.len(), net.genome_len());
            let blank = net.unflatten(&vec![0.0; genome.len()]).unwrap();
            let back = blank.unflatten(&genome).unwrap();
            prop_assert_eq!(&back, &net);
            prop_assert_eq!(back.forward(&[0.2, 0.4, 0.9]).unwrap(), net.forward(&[0.2, 0.4, 0.9]).unwrap());
        }

        #[test]
        fn constructors_keep_invariants(seed in any::<u64>(), density in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = random_network(&params(4, 3, (1, 5), density), &mut rng).unwrap();
            prop_assert!(net.check_invariants().is_ok());
            let h = net.hidden_nodes().start;
            net.split_hidden(h, 0.3).unwrap();
            prop_assert!(net.check_invariants().is_ok());
            if net.hidden_count() > 1 {
                net.delete_hidden(net.hidden_nodes().end - 1).unwrap();
                prop_assert!(net.check_invariants().is_ok());
            }
        }

        #[test]
        fn single_path_monotone(w1 in 0.0f64..3.0, dw in 0.0f64..3.0, x in 0.0f64..2.0, w2 in 0.0f64..3.0) {
            let mut net = Network::empty(1, 1, 1, 1).unwrap();
            let h = net.hidden_nodes().start;
            let o = net.output_nodes().start;
            net.connect(h, 0, w1).unwrap();
            net.connect(o, h, w2).unwrap();
            let before = net.forward(&[x]).unwrap()[0];
            net.set_weight(h, 0, w1 + dw).unwrap();
            let after = net.forward(&[x]).unwrap()[0];
            prop_assert!(after >= before);
        }

        #[test]
        fn forward_is_pure(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_network(&params(2, 2, (1, 3), 0.8), &mut rng).unwrap();
            let a = net.forward(&[0.1, 0.9]).unwrap();
            let b = net.forward(&[0.1, 0.9]).unwrap();
            prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
