//! Elements of the free space over a finite metric space and their norm:
//! balanced chains, molecules, an exact min-cost transport solver for the
//! Kantorovich-Rubinstein norm, and norming 1-Lipschitz dual certificates.
//!
//! The primal solver runs successive shortest augmenting paths with node
//! potentials on the bipartite reduction (sources carry the positive
//! weights, sinks the negative ones). The optimal sink potentials extend by
//! the 1-Lipschitz inf-envelope to a dual function on the whole space, which
//! certifies the flow cost.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{gap_tolerance, Config};
use crate::error::{Error, Result};
use crate::lipschitz::LipschitzFunction;
use crate::space::{FiniteMetricSpace, PairId, SpaceHandle};

/// Weights below this magnitude are dropped when a chain is built.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// A finitely supported signed weight vector summing to zero.
///
/// Stored sparsely with deterministic (index-ordered) iteration. Duplicate
/// entries are merged and weights below [`WEIGHT_FLOOR`] are dropped at
/// construction.
#[derive(Debug, Clone)]
pub struct Chain {
    space: SpaceHandle,
    weights: BTreeMap<usize, f64>,
}

impl Chain {
    pub fn new(space: SpaceHandle, entries: &[(usize, f64)], cfg: &Config) -> Result<Self> {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(index, weight) in entries {
            space.check_index(index)?;
            *merged.entry(index).or_insert(0.0) += weight;
        }
        let sum: f64 = merged.values().sum();
        let total_abs: f64 = merged.values().map(|w| w.abs()).sum();
        if sum.abs() > cfg.eq_slack(total_abs) {
            return Err(Error::UnbalancedChain { sum });
        }
        merged.retain(|_, w| w.abs() >= WEIGHT_FLOOR);
        Ok(Chain {
            space,
            weights: merged,
        })
    }

    /// The zero element.
    pub fn zero(space: SpaceHandle) -> Self {
        Chain {
            space,
            weights: BTreeMap::new(),
        }
    }

    /// The evaluation chain of a point: `+1` at `x`, `-1` at the base point.
    /// Zero when `x` is the base point itself.
    pub fn unit(space: SpaceHandle, x: usize, cfg: &Config) -> Result<Self> {
        let base = space.base();
        Chain::new(space, &[(x, 1.0), (base, -1.0)], cfg)
    }

    /// The difference chain `+1` at `x`, `-1` at `y`.
    pub fn point_difference(space: SpaceHandle, x: usize, y: usize, cfg: &Config) -> Result<Self> {
        space.check_pair(x, y)?;
        Chain::new(space, &[(x, 1.0), (y, -1.0)], cfg)
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn space_handle(&self) -> &SpaceHandle {
        &self.space
    }

    pub fn weights(&self) -> &BTreeMap<usize, f64> {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights.get(&index).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> Vec<usize> {
        self.weights.keys().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.is_empty()
    }

    /// Scalar multiple; scaling by zero gives the zero chain.
    pub fn scaled(&self, c: f64) -> Self {
        let mut weights: BTreeMap<usize, f64> =
            self.weights.iter().map(|(&i, &w)| (i, c * w)).collect();
        weights.retain(|_, w| w.abs() >= WEIGHT_FLOOR);
        Chain {
            space: Arc::clone(&self.space),
            weights,
        }
    }

    /// Pointwise sum.
    pub fn plus(&self, other: &Chain) -> Self {
        let mut weights = self.weights.clone();
        for (&i, &w) in &other.weights {
            *weights.entry(i).or_insert(0.0) += w;
        }
        weights.retain(|_, w| w.abs() >= WEIGHT_FLOOR);
        Chain {
            space: Arc::clone(&self.space),
            weights,
        }
    }

    /// Duality pairing `sum of w(i) * f(i)`.
    pub fn pairing(&self, f: &LipschitzFunction) -> f64 {
        self.weights.iter().map(|(&i, &w)| w * f.value(i)).sum()
    }
}

/// The normalized two-point chain `(delta_x - delta_y) / d(x,y)`.
#[derive(Debug, Clone)]
pub struct Molecule {
    pub pair: PairId,
    pub chain: Chain,
}

/// Builds the molecule of a pair. Its norm is exactly the pair distance
/// divided by itself, certified at 1 by `kr_norm`.
pub fn molecule(space: &SpaceHandle, x: usize, y: usize, cfg: &Config) -> Result<Molecule> {
    space.check_pair(x, y)?;
    let inv = 1.0 / space.d(x, y);
    let chain = Chain::new(Arc::clone(space), &[(x, inv), (y, -inv)], cfg)?;
    Ok(Molecule {
        pair: PairId::new(x, y)?,
        chain,
    })
}

/// One arc of an optimal transport plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub amount: f64,
}

/// An optimal min-cost flow attaining the chain norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSolution {
    pub arcs: Vec<FlowArc>,
    pub cost: f64,
}

impl FlowSolution {
    /// Net outflow per point; equals the chain weights at solver precision.
    pub fn divergence(&self, n: usize) -> Vec<f64> {
        let mut div = vec![0.0; n];
        for arc in &self.arcs {
            div[arc.from] += arc.amount;
            div[arc.to] -= arc.amount;
        }
        div
    }
}

/// A norming 1-Lipschitz function together with its pairing value.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub f: LipschitzFunction,
    pub value: f64,
}

/// Primal and dual solution of one norm computation.
#[derive(Debug, Clone)]
pub struct KrNorm {
    pub flow: FlowSolution,
    pub certificate: DualCertificate,
}

impl KrNorm {
    /// Absolute primal/dual gap.
    pub fn gap(&self) -> f64 {
        (self.flow.cost - self.certificate.value).abs()
    }

    /// Whether the gap closes at the solver tolerance.
    pub fn gap_closed(&self) -> bool {
        self.gap() <= gap_tolerance(self.flow.cost)
    }
}

/// Computes the chain norm: the optimal transport cost from the positive to
/// the negative part over the ground metric, plus the certifying dual.
pub fn kr_norm(chain: &Chain) -> Result<KrNorm> {
    let space = chain.space_handle();
    let mut sources: Vec<(usize, f64)> = Vec::new();
    let mut sinks: Vec<(usize, f64)> = Vec::new();
    for (&i, &w) in chain.weights() {
        if w > 0.0 {
            sources.push((i, w));
        } else {
            sinks.push((i, -w));
        }
    }
    if sources.is_empty() && sinks.is_empty() {
        let f = LipschitzFunction::from_fn(space, |_| 0.0)?;
        return Ok(KrNorm {
            flow: FlowSolution {
                arcs: Vec::new(),
                cost: 0.0,
            },
            certificate: DualCertificate { f, value: 0.0 },
        });
    }
    if sources.is_empty() || sinks.is_empty() {
        // a balanced chain with one-sided support can only carry rounding mass
        let sum: f64 = chain.weights().values().sum();
        return Err(Error::UnbalancedChain { sum });
    }

    let (flow_matrix, potentials) = solve_transport(space, &sources, &sinks)?;

    let mut arcs = Vec::new();
    let mut cost = 0.0;
    for (si, &(sp, _)) in sources.iter().enumerate() {
        for (ti, &(tp, _)) in sinks.iter().enumerate() {
            let amount = flow_matrix[si][ti];
            if amount > 0.0 {
                arcs.push(FlowArc {
                    from: sp,
                    to: tp,
                    amount,
                });
                cost += amount * space.d(sp, tp);
            }
        }
    }

    // sink potentials extend to the whole space by the 1-Lipschitz
    // inf-envelope, which preserves the pairing value
    let s_count = sources.len();
    let sink_values: Vec<f64> = sinks
        .iter()
        .enumerate()
        .map(|(ti, _)| -potentials[s_count + ti])
        .collect();
    let f = LipschitzFunction::from_fn(space, |z| {
        sinks
            .iter()
            .zip(&sink_values)
            .map(|(&(tp, _), &fv)| space.d(z, tp) + fv)
            .fold(f64::INFINITY, f64::min)
    })?
    .rebased();
    let value = chain.pairing(&f);

    Ok(KrNorm {
        flow: FlowSolution { arcs, cost },
        certificate: DualCertificate { f, value },
    })
}

/// Primal side only: the optimal flow and its cost.
pub fn kr_norm_primal(chain: &Chain) -> Result<FlowSolution> {
    Ok(kr_norm(chain)?.flow)
}

/// Dual side only: a norming 1-Lipschitz function vanishing at the base.
pub fn kr_norm_dual(chain: &Chain) -> Result<DualCertificate> {
    Ok(kr_norm(chain)?.certificate)
}

/// Successive shortest augmenting paths with node potentials on the dense
/// bipartite source/sink graph. Returns the flow matrix and final
/// potentials; reduced costs stay nonnegative throughout, so every
/// augmentation runs Dijkstra (dense scan, deterministic tie-breaks).
fn solve_transport(
    space: &FiniteMetricSpace,
    sources: &[(usize, f64)],
    sinks: &[(usize, f64)],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let s_count = sources.len();
    let t_count = sinks.len();
    let v = s_count + t_count;

    let mut flow = vec![vec![0.0_f64; t_count]; s_count];
    let mut potential = vec![0.0_f64; v];
    let mut rem_supply: Vec<f64> = sources.iter().map(|&(_, a)| a).collect();
    let mut rem_demand: Vec<f64> = sinks.iter().map(|&(_, b)| b).collect();

    let max_abs = rem_supply
        .iter()
        .chain(rem_demand.iter())
        .fold(0.0_f64, |acc, &w| acc.max(w));
    // residual mass below this is rounding noise left by an almost-balanced
    // input chain
    let eps_term = 1e-13 * (1.0 + max_abs);
    let max_iterations = 16 * v * v + 64;
    let mut iterations = 0usize;

    loop {
        let supply_left: f64 = rem_supply.iter().sum();
        let demand_left: f64 = rem_demand.iter().sum();
        if supply_left.min(demand_left) <= eps_term {
            break;
        }
        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::SolverStall { iterations });
        }

        // dense Dijkstra over reduced costs
        let mut dist = vec![f64::INFINITY; v];
        let mut prev: Vec<Option<usize>> = vec![None; v];
        let mut visited = vec![false; v];
        for (si, &r) in rem_supply.iter().enumerate() {
            if r > eps_term {
                dist[si] = 0.0;
            }
        }
        loop {
            let mut current: Option<usize> = None;
            for u in 0..v {
                if !visited[u] && dist[u].is_finite() && current.map_or(true, |c| dist[u] < dist[c])
                {
                    current = Some(u);
                }
            }
            let Some(u) = current else { break };
            visited[u] = true;
            if u < s_count {
                for ti in 0..t_count {
                    let w = s_count + ti;
                    let rc =
                        (space.d(sources[u].0, sinks[ti].0) + potential[u] - potential[w]).max(0.0);
                    if dist[u] + rc < dist[w] {
                        dist[w] = dist[u] + rc;
                        prev[w] = Some(u);
                    }
                }
            } else {
                let ti = u - s_count;
                for si in 0..s_count {
                    if flow[si][ti] > 0.0 {
                        let rc =
                            (potential[u] - potential[si] - space.d(sources[si].0, sinks[ti].0))
                                .max(0.0);
                        if dist[u] + rc < dist[si] {
                            dist[si] = dist[u] + rc;
                            prev[si] = Some(u);
                        }
                    }
                }
            }
        }

        // nearest sink that still needs mass
        let mut target: Option<usize> = None;
        for ti in 0..t_count {
            if rem_demand[ti] > eps_term
                && dist[s_count + ti].is_finite()
                && target.map_or(true, |t| dist[s_count + ti] < dist[s_count + t])
            {
                target = Some(ti);
            }
        }
        let Some(target) = target else {
            return Err(Error::SolverStall { iterations });
        };
        let target_node = s_count + target;
        let reach = dist[target_node];
        for u in 0..v {
            potential[u] += dist[u].min(reach);
        }

        // walk the path back to its source, collecting the bottleneck
        let mut path: Vec<(usize, usize, bool)> = Vec::new();
        let mut node = target_node;
        let mut bottleneck = rem_demand[target];
        while let Some(p) = prev[node] {
            if node >= s_count {
                path.push((p, node - s_count, true));
            } else {
                let ti = p - s_count;
                path.push((node, ti, false));
                bottleneck = bottleneck.min(flow[node][ti]);
            }
            node = p;
        }
        let start = node;
        bottleneck = bottleneck.min(rem_supply[start]);

        for &(si, ti, forward) in &path {
            if forward {
                flow[si][ti] += bottleneck;
            } else if bottleneck == flow[si][ti] {
                flow[si][ti] = 0.0;
            } else {
                flow[si][ti] -= bottleneck;
            }
        }
        if bottleneck == rem_supply[start] {
            rem_supply[start] = 0.0;
        } else {
            rem_supply[start] -= bottleneck;
        }
        if bottleneck == rem_demand[target] {
            rem_demand[target] = 0.0;
        } else {
            rem_demand[target] -= bottleneck;
        }
    }

    Ok((flow, potential))
}

/// Whether the norm-one chain lies in the slice cut by `f` at depth `alpha`,
/// that is whether the pairing exceeds `1 - alpha`.
pub fn slice_membership(
    f: &LipschitzFunction,
    alpha: f64,
    chain: &Chain,
    cfg: &Config,
) -> Result<bool> {
    if (f.norm() - 1.0).abs() > cfg.tol_eq {
        return Err(Error::NotNormalized {
            what: "function",
            norm: f.norm(),
        });
    }
    let norm = kr_norm_primal(chain)?.cost;
    if (norm - 1.0).abs() > gap_tolerance(1.0) {
        return Err(Error::NotNormalized {
            what: "chain",
            norm,
        });
    }
    Ok(chain.pairing(f) > 1.0 - alpha)
}

/// A convex split of a molecule across an interior segment point.
#[derive(Debug, Clone)]
pub struct MoleculeDecomposition {
    /// Positive coefficients summing to one.
    pub coefficients: (f64, f64),
    pub parts: (Molecule, Molecule),
}

/// Splits the molecule of `(x, y)` across a point `z` strictly inside the
/// metric segment:
/// the coefficients are `d(x,z)/d(x,y)` and `d(z,y)/d(x,y)` and the parts
/// are the molecules of `(x, z)` and `(z, y)`.
pub fn molecule_decompose(
    space: &SpaceHandle,
    x: usize,
    y: usize,
    z: usize,
    cfg: &Config,
) -> Result<MoleculeDecomposition> {
    space.check_pair(x, y)?;
    space.check_index(z)?;
    if z == x || z == y {
        return Err(Error::NotBetween { x, y, z });
    }
    let dxy = space.d(x, y);
    if space.d(x, z) + space.d(z, y) > dxy + cfg.eq_slack(space.diameter()) {
        return Err(Error::NotBetween { x, y, z });
    }
    let lambda1 = space.d(x, z) / dxy;
    let lambda2 = space.d(z, y) / dxy;
    Ok(MoleculeDecomposition {
        coefficients: (lambda1, lambda2),
        parts: (molecule(space, x, z, cfg)?, molecule(space, z, y, cfg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Config {
        Config::default()
    }

    fn line_space(points: &[f64]) -> SpaceHandle {
        let matrix = points
            .iter()
            .map(|&a| points.iter().map(|&b| (a - b).abs()).collect())
            .collect();
        Arc::new(FiniteMetricSpace::validate(matrix, 0, &cfg()).unwrap())
    }

    #[test]
    fn chain_requires_balance() {
        let m = line_space(&[0.0, 1.0]);
        assert!(matches!(
            Chain::new(Arc::clone(&m), &[(0, 1.0), (1, -0.5)], &cfg()),
            Err(Error::UnbalancedChain { .. })
        ));
    }

    #[test]
    fn chain_merges_and_drops_zero_weights() {
        let m = line_space(&[0.0, 1.0, 2.0]);
        let c = Chain::new(
            Arc::clone(&m),
            &[(0, 1.0), (0, -1.0), (1, 2.0), (2, -2.0)],
            &cfg(),
        )
        .unwrap();
        assert_eq!(c.support(), vec![1, 2]);
    }

    #[test]
    fn molecule_norm_is_one() {
        let m = line_space(&[0.0, 1.0, 3.0]);
        for (x, y) in [(0, 1), (0, 2), (1, 2)] {
            let mol = molecule(&m, x, y, &cfg()).unwrap();
            let norm = kr_norm(&mol.chain).unwrap();
            assert!((norm.flow.cost - 1.0).abs() < 1e-9, "pair ({x},{y})");
            assert!(norm.gap_closed());
        }
    }

    #[test]
    fn molecule_orientation_swaps_sign() {
        let m = line_space(&[0.0, 2.0]);
        let fwd = molecule(&m, 0, 1, &cfg()).unwrap();
        let bwd = molecule(&m, 1, 0, &cfg()).unwrap();
        assert_eq!(fwd.chain.weight(0), -bwd.chain.weight(0));
        let n1 = kr_norm_primal(&fwd.chain).unwrap().cost;
        let n2 = kr_norm_primal(&bwd.chain).unwrap().cost;
        assert!((n1 - n2).abs() < 1e-12);
    }

    #[test]
    fn point_difference_costs_the_distance() {
        let m = line_space(&[0.0, 1.0, 3.0]);
        let c = Chain::point_difference(Arc::clone(&m), 0, 2, &cfg()).unwrap();
        let result = kr_norm(&c).unwrap();
        assert!((result.flow.cost - 3.0).abs() < 1e-12);
        assert!(result.gap_closed());
        // certificate achieves slope 1 across the pair
        assert!((result.certificate.f.slope(0, 2).abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_sources_one_sink() {
        // mass at 1 and 3 flowing to a double sink at 0 costs 1 + 3
        let m = line_space(&[0.0, 1.0, 3.0]);
        let c = Chain::new(Arc::clone(&m), &[(1, 1.0), (2, 1.0), (0, -2.0)], &cfg()).unwrap();
        let result = kr_norm(&c).unwrap();
        assert!((result.flow.cost - 4.0).abs() < 1e-12);
        assert!(result.gap_closed());
        // flow is balanced at every point
        let div = result.flow.divergence(3);
        assert!((div[0] + 2.0).abs() < 1e-12);
        assert!((div[1] - 1.0).abs() < 1e-12);
        assert!((div[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_chain_has_zero_norm() {
        let m = line_space(&[0.0, 1.0]);
        let c = Chain::zero(Arc::clone(&m));
        let result = kr_norm(&c).unwrap();
        assert_eq!(result.flow.cost, 0.0);
        assert_eq!(result.certificate.value, 0.0);
    }

    #[test]
    fn certificate_is_one_lipschitz_and_based() {
        let m = line_space(&[0.0, 0.5, 1.0, 2.0, 2.5]);
        let c = Chain::new(
            Arc::clone(&m),
            &[(1, 0.7), (4, 0.3), (0, -0.2), (3, -0.8)],
            &cfg(),
        )
        .unwrap();
        let result = kr_norm(&c).unwrap();
        assert!(result.certificate.f.norm() <= 1.0 + 1e-9);
        assert_eq!(result.certificate.f.value(m.base()), 0.0);
        assert!(result.gap_closed());
    }

    #[test]
    fn norm_is_homogeneous() {
        let m = line_space(&[0.0, 1.0, 2.5, 4.0]);
        let c = Chain::new(Arc::clone(&m), &[(0, 1.5), (2, -0.5), (3, -1.0)], &cfg()).unwrap();
        let base = kr_norm_primal(&c).unwrap().cost;
        let scaled = kr_norm_primal(&c.scaled(-2.0)).unwrap().cost;
        assert!((scaled - 2.0 * base).abs() < 1e-9 * (1.0 + 2.0 * base));
    }

    #[test]
    fn slice_membership_examples() {
        let m = line_space(&[0.0, 1.0, 3.0]);
        let mol = molecule(&m, 1, 2, &cfg()).unwrap();
        // the norming quotient function lands in every slice
        let f = crate::lipschitz::f_xy(&m, 1, 2).unwrap().rebased();
        assert!(slice_membership(&f, 0.1, &mol.chain, &cfg()).unwrap());
        // an orthogonal direction misses a shallow slice
        let g = LipschitzFunction::from_fn(&m, |i| if i == 0 { 0.0 } else { 1.0 }).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-12);
        assert!(!slice_membership(&g, 0.5, &mol.chain, &cfg()).unwrap());
    }

    #[test]
    fn slice_membership_rejects_unnormalized() {
        let m = line_space(&[0.0, 1.0]);
        let mol = molecule(&m, 0, 1, &cfg()).unwrap();
        let f = LipschitzFunction::from_fn(&m, |i| 2.0 * i as f64).unwrap();
        assert!(matches!(
            slice_membership(&f, 0.1, &mol.chain, &cfg()),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn decompose_at_midpoint_and_quarter() {
        let m = line_space(&[0.0, 0.5, 1.0]);
        let d = molecule_decompose(&m, 0, 2, 1, &cfg()).unwrap();
        assert!((d.coefficients.0 - 0.5).abs() < 1e-12);
        assert!((d.coefficients.1 - 0.5).abs() < 1e-12);

        let m = line_space(&[0.0, 0.25, 1.0]);
        let d = molecule_decompose(&m, 0, 2, 1, &cfg()).unwrap();
        assert!((d.coefficients.0 - 0.25).abs() < 1e-12);
        assert!((d.coefficients.1 - 0.75).abs() < 1e-12);
        assert!((d.coefficients.0 + d.coefficients.1 - 1.0).abs() < 1e-12);

        // the convex combination reproduces the molecule weights
        let mol = molecule(&m, 0, 2, &cfg()).unwrap();
        let combo = d
            .parts
            .0
            .chain
            .scaled(d.coefficients.0)
            .plus(&d.parts.1.chain.scaled(d.coefficients.1));
        for i in 0..3 {
            assert!((combo.weight(i) - mol.chain.weight(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_rejects_outside_segment() {
        let m = line_space(&[0.0, 0.5, 1.0, 2.0, 2.5, 3.0]);
        for z in [0, 1, 4, 5] {
            assert!(matches!(
                molecule_decompose(&m, 2, 3, z, &cfg()),
                Err(Error::NotBetween { .. })
            ));
        }
    }

    #[test]
    fn norm_satisfies_triangle_inequality() {
        let m = line_space(&[0.0, 0.7, 1.9, 3.2]);
        let a = Chain::new(Arc::clone(&m), &[(0, 1.0), (2, -1.0)], &cfg()).unwrap();
        let b = Chain::new(Arc::clone(&m), &[(1, 2.0), (3, -2.0)], &cfg()).unwrap();
        let na = kr_norm_primal(&a).unwrap().cost;
        let nb = kr_norm_primal(&b).unwrap().cost;
        let nab = kr_norm_primal(&a.plus(&b)).unwrap().cost;
        assert!(nab <= na + nb + 1e-9);
    }
}
