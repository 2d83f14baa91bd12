//! Measurement-based computation on cluster states: the elementary
//! teleportation step, gates by change of measurement basis, graph states with
//! nullifier checks and sequential measurement programs.

use crate::branch::{cz_average, cz_branch, outcome_grid, Ancilla, BranchOptions, DvrLadder};
use crate::fock::{moments, FockDensity, FockSpace, FockState, PositionBasis};
use crate::gaussian::{symplectic_form, GaussianOp, GaussianState};
use crate::measurement::{MeasurementRecord, DEFAULT_GRID_POINTS};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest graph built on the Gaussian backend.
pub const MAX_GAUSSIAN_NODES: usize = 12;

/// Largest graph built on the Fock backend.
pub const MAX_FOCK_NODES: usize = 5;

/// Simple undirected graph with a squeezing parameter per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGraph {
    adjacency: Vec<Vec<usize>>,
    squeezing: Vec<f64>,
}

impl ClusterGraph {
    pub fn new(nodes: usize, edges: &[(usize, usize)], squeezing: Vec<f64>) -> Result<Self> {
        if squeezing.len() != nodes {
            return Err(Error::Graph(format!("{} squeezing values for {nodes} nodes", squeezing.len())));
        }
        if let Some(r) = squeezing.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::Graph(format!("squeezing {r} must be ≥ 0")));
        }
        let mut adjacency = vec![Vec::new(); nodes];
        for &(a, b) in edges {
            if a >= nodes || b >= nodes {
                return Err(Error::Graph(format!("edge ({a}, {b}) outside {nodes} nodes")));
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop on node {a}")));
            }
            if adjacency[a].contains(&b) {
                return Err(Error::Graph(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { adjacency, squeezing })
    }

    pub fn uniform(nodes: usize, edges: &[(usize, usize)], r: f64) -> Result<Self> {
        Self::new(nodes, edges, vec![r; nodes])
    }

    /// Path `0 − 1 − … − (n−1)`.
    pub fn linear(nodes: usize, r: f64) -> Result<Self> {
        let edges: Vec<_> = (1..nodes).map(|k| (k - 1, k)).collect();
        Self::uniform(nodes, &edges, r)
    }

    pub fn nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn squeezing(&self) -> &[f64] {
        &self.squeezing
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// `{"adjacency": [[...], ...], "squeezing": [...]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ClusterGraph = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let n = raw.adjacency.len();
        let mut edges = Vec::new();
        for (a, list) in raw.adjacency.iter().enumerate() {
            for &b in list {
                if b >= n {
                    return Err(Error::Graph(format!("neighbor {b} of node {a} outside {n} nodes")));
                }
                if !raw.adjacency[b].contains(&a) {
                    return Err(Error::Graph(format!("adjacency not symmetric at ({a}, {b})")));
                }
                if b > a {
                    edges.push((a, b));
                } else if b == a {
                    return Err(Error::Graph(format!("self-loop on node {a}")));
                }
            }
        }
        let graph = Self::new(n, &edges, raw.squeezing)?;
        if graph.adjacency.iter().zip(&raw.adjacency).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Graph("duplicate adjacency entries".into()));
        }
        Ok(graph)
    }

    fn check_size(&self, limit: usize) -> Result<()> {
        if self.nodes() == 0 || self.nodes() > limit {
            return Err(Error::Graph(format!("{} nodes outside 1..={limit}", self.nodes())));
        }
        Ok(())
    }
}

/// Canonical cluster on the Gaussian backend: p-squeezed nodes joined by `C_Z`.
pub fn build_cluster(graph: &ClusterGraph) -> Result<GaussianState> {
    graph.check_size(MAX_GAUSSIAN_NODES)?;
    let mut ops: Vec<GaussianOp> = graph.squeezing.iter().enumerate().map(|(mode, &r)| GaussianOp::Squeeze { mode, r, phi: PI }).collect();
    ops.extend(graph.edges().into_iter().map(|(m1, m2)| GaussianOp::ControlledPhase { m1, m2, g: 1.0 }));
    GaussianState::vacuum(graph.nodes()).evolve_all(&ops)
}

/// `exp(i Σ_edges x̂_a x̂_b)` on a Fock register, applied exactly in the
/// position eigenbasis of the truncated `x̂` so every edge commutes.
pub fn apply_cz_edges(state: &FockState, edges: &[(usize, usize)]) -> Result<FockState> {
    let space = state.space();
    for &(a, b) in edges {
        space.check_mode(a)?;
        space.check_mode(b)?;
    }
    let basis = PositionBasis::new(space.cutoff())?;
    let v = basis.vectors().map(|x| C64::new(x, 0.0));
    let vt = v.transpose();
    let mut amps: Vec<C64> = state.amplitudes().iter().cloned().collect();
    for m in 0..space.modes() {
        space.apply_local(&mut amps, &[m], &vt)?;
    }
    let nodes = basis.nodes();
    for (idx, z) in amps.iter_mut().enumerate() {
        let d = space.digits(idx);
        let phase: f64 = edges.iter().map(|&(a, b)| nodes[d[a]] * nodes[d[b]]).sum();
        *z *= C64::from_polar(1.0, phase);
    }
    for m in 0..space.modes() {
        space.apply_local(&mut amps, &[m], &v)?;
    }
    FockState::from_amplitudes(space, amps)
}

/// Canonical cluster on the Fock backend.
pub fn build_cluster_fock(graph: &ClusterGraph, cutoff: usize) -> Result<FockState> {
    graph.check_size(MAX_FOCK_NODES)?;
    let mut state: Option<FockState> = None;
    for &r in &graph.squeezing {
        let node = FockState::squeezed_vacuum(cutoff, r, PI)?;
        state = Some(match state {
            None => node,
            Some(s) => s.tensor(&node)?,
        });
    }
    apply_cz_edges(&state.expect("at least one node"), &graph.edges())
}

/// Coefficient vector of `p̂_a − Σ_{b∈N(a)} x̂_b`.
fn nullifier_vector(graph: &ClusterGraph, a: usize) -> DVector<f64> {
    let mut n = DVector::zeros(2 * graph.nodes());
    n[2 * a + 1] = 1.0;
    for &b in graph.neighbors(a) {
        n[2 * b] = -1.0;
    }
    n
}

fn nullifiers_from_cov(graph: &ClusterGraph, cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    if cov.nrows() != 2 * graph.nodes() {
        return Err(Error::DimensionMismatch { expected: 2 * graph.nodes(), got: cov.nrows() });
    }
    Ok((0..graph.nodes())
        .map(|a| {
            let n = nullifier_vector(graph, a);
            (n.transpose() * cov * &n)[(0, 0)]
        })
        .collect())
}

/// `Var(p̂_a − Σ_{b∈N(a)} x̂_b)` for every node.
pub fn nullifiers(graph: &ClusterGraph, state: &GaussianState) -> Result<Vec<f64>> {
    nullifiers_from_cov(graph, state.cov())
}

pub fn nullifiers_fock(graph: &ClusterGraph, state: &FockState) -> Result<Vec<f64>> {
    nullifiers_from_cov(graph, &moments(state)?.cov)
}

/// CSV `node,variance` of nullifier variances.
pub fn nullifier_csv(values: &[f64]) -> String {
    let mut out = String::from("node,variance\n");
    for (a, v) in values.iter().enumerate() {
        out.push_str(&format!("{a},{v:.16e}\n"));
    }
    out
}

/// Squeezed inputs followed by a beam-splitter and phase network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNetwork {
    /// x-squeezing of each input mode
    pub squeezing: Vec<f64>,
    pub ops: Vec<GaussianOp>,
}

impl ClusterNetwork {
    /// Network reproducing the canonical cluster of `graph`.
    ///
    /// The squeezed directions of the target covariance fix an orthogonal
    /// symplectic map, which is factored into beam splitters and phases by
    /// Givens elimination of the corresponding unitary.
    pub fn for_graph(graph: &ClusterGraph) -> Result<Self> {
        Self::for_state(&build_cluster(graph)?)
    }

    pub fn for_state(target: &GaussianState) -> Result<Self> {
        let m = target.modes();
        let cov = target.cov();
        let omega = symplectic_form(m);
        let eig = cov.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..2 * m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite spectrum"));
        // isotropic squeezed directions a_k, completed greedily through Ω
        let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(m);
        for &j in &order {
            if dirs.len() == m {
                break;
            }
            let mut c = eig.eigenvectors.column(j).into_owned();
            for a in &dirs {
                let b = -(&omega * a);
                c -= a * a.dot(&c);
                c -= &b * b.dot(&c);
            }
            let norm = c.norm();
            if norm > 1e-6 {
                dirs.push(c / norm);
            }
        }
        if dirs.len() != m {
            return Err(Error::InvalidParameter("covariance has no isotropic squeezed frame".into()));
        }
        let mut squeezing = Vec::with_capacity(m);
        let mut u = DMatrix::<C64>::zeros(m, m);
        for (k, a) in dirs.iter().enumerate() {
            let var = (a.transpose() * cov * a)[(0, 0)];
            squeezing.push(-0.5 * (2.0 * var).ln());
            for j in 0..m {
                u[(j, k)] = C64::new(a[2 * j], a[2 * j + 1]);
            }
        }
        Ok(Self { squeezing, ops: passive_ops(&u)? })
    }

    pub fn state(&self) -> Result<GaussianState> {
        let mut ops: Vec<GaussianOp> = self.squeezing.iter().enumerate().map(|(mode, &r)| GaussianOp::Squeeze { mode, r, phi: 0.0 }).collect();
        ops.extend(self.ops.iter().cloned());
        GaussianState::vacuum(self.squeezing.len()).evolve_all(&ops)
    }
}

/// `diag(e^{ia}, e^{ib}) · R(φ) · diag(e^{ic}, e^{id})` with `φ ∈ [0, π/2]`.
fn factor_two_mode(v: &DMatrix<C64>) -> (f64, f64, f64, f64, f64) {
    let (c, s) = (v[(0, 0)].norm(), v[(1, 0)].norm());
    let phi = s.atan2(c);
    if s < 1e-14 {
        (v[(0, 0)].arg(), v[(1, 1)].arg(), 0.0, 0.0, 0.0)
    } else if c < 1e-14 {
        (0.0, v[(1, 0)].arg(), 0.0, (-v[(0, 1)]).arg(), phi)
    } else {
        let a = v[(0, 0)].arg();
        (a, v[(1, 0)].arg(), 0.0, (-v[(0, 1)]).arg() - a, phi)
    }
}

/// Phases and beam splitters whose mode map `a → U a` equals `u`.
fn passive_ops(u: &DMatrix<C64>) -> Result<Vec<GaussianOp>> {
    let m = u.nrows();
    let mut w = u.clone();
    // rotations T with T_L ⋯ T_1 U = D, stored as (rows, T)
    let mut rots: Vec<(usize, usize, DMatrix<C64>)> = Vec::new();
    for j in 0..m {
        for i in (j + 1..m).rev() {
            let (x, y) = (w[(i - 1, j)], w[(i, j)]);
            let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
            if y.norm() < 1e-15 {
                continue;
            }
            let t = DMatrix::from_row_slice(2, 2, &[x.conj() / n, y.conj() / n, -y / n, x / n]);
            for col in 0..m {
                let (p, q) = (w[(i - 1, col)], w[(i, col)]);
                w[(i - 1, col)] = t[(0, 0)] * p + t[(0, 1)] * q;
                w[(i, col)] = t[(1, 0)] * p + t[(1, 1)] * q;
            }
            rots.push((i - 1, i, t));
        }
    }
    let mut ops = Vec::new();
    // U = T_1† ⋯ T_L† D: D acts first
    for k in 0..m {
        let theta = w[(k, k)].arg();
        if theta.abs() > 1e-15 {
            ops.push(GaussianOp::Phase { mode: k, theta });
        }
    }
    for (m1, m2, t) in rots.iter().rev() {
        let (a, b, c, d, phi) = factor_two_mode(&t.adjoint());
        for (mode, theta) in [(*m1, c), (*m2, d)] {
            if theta.abs() > 1e-15 {
                ops.push(GaussianOp::Phase { mode, theta });
            }
        }
        ops.push(GaussianOp::BeamSplit { m1: *m1, m2: *m2, t: phi.cos().powi(2) });
        for (mode, theta) in [(*m1, a), (*m2, b)] {
            if theta.abs() > 1e-15 {
                ops.push(GaussianOp::Phase { mode, theta });
            }
        }
    }
    Ok(ops)
}

/// Polynomial phase `f(x) = Σ c_k x^k`, defining `U = exp(i f(x̂))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseFunction {
    pub coeffs: Vec<f64>,
}

impl PhaseFunction {
    pub fn identity() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// `f(x) = a x + b x²/2`.
    pub fn quadratic(a: f64, b: f64) -> Self {
        Self { coeffs: vec![0.0, a, 0.5 * b] }
    }

    pub fn cubic(chi: f64) -> Self {
        Self { coeffs: vec![0.0, 0.0, 0.0, chi] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> PhaseFunction {
        Self { coeffs: self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect() }
    }

    /// `f(x + s)`.
    pub fn shifted(&self, s: f64) -> PhaseFunction {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        // binomial expansion of each monomial
        for (k, &c) in self.coeffs.iter().enumerate() {
            let mut binom = 1.0;
            for j in 0..=k {
                out[j] += c * binom * s.powi((k - j) as i32);
                binom *= (k - j) as f64 / (j + 1) as f64;
            }
        }
        Self { coeffs: out }
    }

    pub fn sub(&self, other: &PhaseFunction) -> PhaseFunction {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
        Self { coeffs: (0..n).map(|k| get(&self.coeffs, k) - get(&other.coeffs, k)).collect() }
    }

    /// `(f'(0), f''(0))`, the measured observable `p̂ + f'(0) + f''(0) x̂`.
    pub fn quadratic_part(&self) -> Result<(f64, f64)> {
        if self.degree() > 2 {
            return Err(Error::NonQuadratic(self.degree()));
        }
        let get = |k: usize| self.coeffs.get(k).copied().unwrap_or(0.0);
        Ok((get(1), 2.0 * get(2)))
    }

    /// Gaussian ops realizing `exp(i f(x̂))` up to a global phase.
    pub fn gaussian_ops(&self, mode: usize) -> Result<Vec<GaussianOp>> {
        let (a, b) = self.quadratic_part()?;
        let mut ops = Vec::new();
        if b != 0.0 {
            ops.push(GaussianOp::Shear { mode, sigma: b });
        }
        if a != 0.0 {
            ops.push(GaussianOp::Displace { mode, re: 0.0, im: a / std::f64::consts::SQRT_2 });
        }
        Ok(ops)
    }
}

/// Result of a sampled run.
#[derive(Debug, Clone)]
pub struct ElementaryOutcome<S> {
    pub state: S,
    pub record: MeasurementRecord,
}

fn check_single(input: &GaussianState) -> Result<()> {
    if input.modes() != 1 {
        return Err(Error::InvalidParameter("elementary teleportation needs a single-mode input".into()));
    }
    Ok(())
}

/// Input and p-squeezed ancilla coupled by `C_Z`.
fn coupled(input: &GaussianState, r: f64) -> Result<GaussianState> {
    check_single(input)?;
    input.tensor(&GaussianState::squeezed_vacuum(r, PI)).evolve(&GaussianOp::ControlledPhase { m1: 0, m2: 1, g: 1.0 })
}

/// Elementary teleportation averaged over the outcome: tends to `F|ψ⟩`.
pub fn elementary_teleport(input: &GaussianState, r: f64) -> Result<GaussianState> {
    gate_by_basis_change(input, &PhaseFunction::identity(), r)
}

/// Elementary teleportation at the forced outcome `s`, with `X(−s)` applied;
/// returns the state and the outcome density.
pub fn elementary_teleport_at(input: &GaussianState, r: f64, s: f64) -> Result<(GaussianState, f64)> {
    let (cond, density) = coupled(input, r)?.condition(0, [0.0, 1.0], s)?;
    Ok((cond.evolve(&GaussianOp::Displace { mode: 0, re: -s / std::f64::consts::SQRT_2, im: 0.0 })?, density))
}

/// Elementary teleportation with a sampled outcome.
pub fn elementary_teleport_sampled(input: &GaussianState, r: f64, seed: u64) -> Result<ElementaryOutcome<GaussianState>> {
    let joint = coupled(input, r)?;
    let (mean, var) = (joint.mean()[1], joint.cov()[(1, 1)]);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // Box–Muller on two uniforms
    let (u1, u2): (f64, f64) = (1.0 - rng.gen::<f64>(), rng.gen());
    let s = mean + var.sqrt() * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
    let (state, density) = elementary_teleport_at(input, r, s)?;
    let mut record = MeasurementRecord::with_seed(seed);
    record.push_homodyne(0, PI / 2.0, s, density);
    Ok(ElementaryOutcome { state, record })
}

/// Measuring `U†p̂U = p̂ + f'(x̂)` instead of `p̂`: tends to `F U|ψ⟩`.
pub fn gate_by_basis_change(input: &GaussianState, basis: &PhaseFunction, r: f64) -> Result<GaussianState> {
    let (a, b) = basis.quadratic_part()?;
    coupled(input, r)?.measure_feedforward(0, [b, 1.0], a, &[(0, 0, -1.0)])
}

/// Fock-backend elementary teleportation at the forced outcome `s`.
pub fn elementary_teleport_fock_at(input: &FockState, r: f64, s: f64, out_cutoff: usize) -> Result<(FockState, f64)> {
    let mut ladder = DvrLadder::new();
    let opts = BranchOptions::new(out_cutoff);
    let b = cz_branch(input, &Ancilla::Squeezed { r }, s, &|_| C64::new(1.0, 0.0), &mut ladder, &opts)?;
    let (out, _) = b.displaced(-s, out_cutoff);
    let mut st = FockState::from_vector(FockSpace::new(1, out_cutoff)?, out)?;
    let density = st.normalize()?;
    Ok((st, density))
}

/// Fock-backend elementary teleportation averaged over outcomes; returns the
/// output and the weight lost beyond `out_cutoff`.
pub fn elementary_teleport_fock(input: &FockState, r: f64, out_cutoff: usize) -> Result<(FockDensity, f64)> {
    let anc = Ancilla::Squeezed { r };
    let grid = outcome_grid(input, &anc, DEFAULT_GRID_POINTS)?;
    cz_average(input, &anc, &grid, &|_, _| C64::new(1.0, 0.0), &|s| -s, &BranchOptions::new(out_cutoff))
}

/// What follows a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedforward {
    /// `X(−s)` on the target and `Z(−s)` on its other unmeasured neighbours
    Standard,
    /// leave the byproduct in place
    None,
}

/// One measurement in a program. Node 0 is the input, node `k + 1` is cluster
/// node `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramStep {
    pub node: usize,
    pub basis: PhaseFunction,
    pub feedforward: Feedforward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementProgram {
    pub steps: Vec<ProgramStep>,
}

impl MeasurementProgram {
    /// Measures the input and then nodes `0..n−1` of a chain, one basis each.
    pub fn chain(bases: Vec<PhaseFunction>) -> Self {
        Self { steps: bases.into_iter().enumerate().map(|(node, basis)| ProgramStep { node, basis, feedforward: Feedforward::Standard }).collect() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.steps).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let steps = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self { steps })
    }
}

/// Output of [`run_program`].
#[derive(Debug, Clone)]
pub struct ProgramOutput {
    pub state: GaussianState,
    /// node labels of the remaining modes, in order
    pub nodes: Vec<usize>,
}

/// Attaches `input` to cluster node 0 by `C_Z`, then measures and feeds
/// forward step by step, averaging over outcomes.
pub fn run_program(graph: &ClusterGraph, input: &GaussianState, program: &MeasurementProgram) -> Result<ProgramOutput> {
    check_single(input)?;
    let n = graph.nodes() + 1;
    // extended adjacency with the input as node 0
    let mut adj: Vec<Vec<usize>> = vec![vec![1]];
    for a in 0..graph.nodes() {
        let mut list: Vec<usize> = graph.neighbors(a).iter().map(|&b| b + 1).collect();
        if a == 0 {
            list.insert(0, 0);
        }
        adj.push(list);
    }
    let mut state = input.tensor(&build_cluster(graph)?).evolve(&GaussianOp::ControlledPhase { m1: 0, m2: 1, g: 1.0 })?;
    let mut alive: Vec<usize> = (0..n).collect();
    for (k, step) in program.steps.iter().enumerate() {
        let pos = alive.iter().position(|&v| v == step.node).ok_or_else(|| Error::Program(format!("step {k}: node {} missing or already measured", step.node)))?;
        let open: Vec<usize> = adj[step.node].iter().copied().filter(|b| alive.contains(b)).collect();
        if open.len() != 1 {
            return Err(Error::Program(format!("step {k}: node {} has {} unmeasured neighbours, need exactly one", step.node, open.len())));
        }
        let target = open[0];
        let (a, b) = step.basis.quadratic_part()?;
        let index_after = |node: usize| alive.iter().filter(|&&v| v != step.node).position(|&v| v == node).expect("alive node");
        let mut gains = Vec::new();
        if step.feedforward == Feedforward::Standard {
            gains.push((index_after(target), 0, -1.0));
            for &c in &adj[target] {
                if c != step.node && alive.contains(&c) {
                    gains.push((index_after(c), 1, -1.0));
                }
            }
        }
        state = state.measure_feedforward(pos, [b, 1.0], a, &gains)?;
        alive.remove(pos);
    }
    Ok(ProgramOutput { state, nodes: alive })
}
