//! Stage-wise independent scenario trees.
//!
//! Every stage `t >= 2` carries `b` realization blocks shared by all parents.
//! Nodes are never stored: ids are laid out stage by stage, so parents,
//! children and blocks follow from arithmetic on the id.

use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::{stream_rng, STREAM_TREE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub branching: usize,
    /// Demand standard deviation per stage step.
    pub demand_sigma: f64,
    /// Poisson rate of disruptions per facility and stage.
    pub disruption_rate: f64,
    pub seed: u64,
    /// Draw an independent demand factor per location instead of one per branch.
    #[serde(default)]
    pub per_location_demand: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            branching: 2,
            demand_sigma: 0.5,
            disruption_rate: 0.5,
            seed: 1,
            per_location_demand: false,
        }
    }
}

/// Demand per location and throughput rate per facility for one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub demand: Vec<f64>,
    pub throughput: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub stage: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub probability: f64,
    pub conditional_probability: f64,
    pub block: usize,
    pub demand: Vec<f64>,
    pub throughput: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree {
    pub horizon: usize,
    pub params: TreeParams,
    /// `blocks[t - 1]` holds the realizations of stage `t`.
    pub blocks: Vec<Vec<Realization>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioPath {
    pub nodes: Vec<usize>,
}

/// Demand multiplier for stage `t`: normal with mean 1 and standard
/// deviation `(t - 1) * sigma`, truncated below at zero.
pub fn sample_demand_factor<R: Rng + ?Sized>(t: usize, sigma: f64, rng: &mut R) -> f64 {
    let sd = (t.saturating_sub(1)) as f64 * sigma;
    if t <= 1 || sd.is_nan() || sd <= 0.0 {
        return 1.0;
    }
    let normal = Normal::new(1.0, sd).expect("finite positive standard deviation");
    loop {
        let x = normal.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
}

/// Interval of the throughput multiplier after `x` disruptions.
pub fn throughput_interval(disruptions: u64) -> (f64, f64) {
    match disruptions {
        0 => (1.0, 1.0),
        1 => (0.8, 0.99),
        2 => (0.6, 0.79),
        _ => (0.0, 0.59),
    }
}

/// Draws the number of disruptions from Poisson(`rate`) and a throughput
/// multiplier uniformly from the matching interval.
pub fn sample_throughput_factor<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let x = if rate > 0.0 {
        Poisson::new(rate)
            .expect("positive finite rate")
            .sample(rng) as u64
    } else {
        0
    };
    sample_throughput_given(x, rng)
}

pub fn sample_throughput_given<R: Rng + ?Sized>(disruptions: u64, rng: &mut R) -> f64 {
    let (lo, hi) = throughput_interval(disruptions);
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Builds a stage-wise independent tree over the instance horizon.
pub fn build_tree(instance: &Instance, params: &TreeParams) -> Result<ScenarioTree> {
    let b = params.branching;
    if b == 0 {
        return Err(Error::Config("branching factor must be at least 1".into()));
    }
    let horizon = instance.horizon;
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let mut total: usize = 0;
    for t in 1..=horizon {
        let size = b
            .checked_pow((t - 1) as u32)
            .and_then(|s| total.checked_add(s).map(|tot| (s, tot)));
        match size {
            Some((_, tot)) => total = tot,
            None => return Err(Error::Config("scenario tree is too large to index".into())),
        }
    }

    let mut rng = stream_rng(params.seed, STREAM_TREE);
    let rate = instance.capacity.nominal_rate;
    let nj = instance.n_facilities();
    let mut blocks = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let nominal = &instance.demand_forecast[t - 1];
        if t == 1 {
            blocks.push(alloc::vec![Realization {
                demand: nominal.clone(),
                throughput: alloc::vec![rate; nj],
            }]);
            continue;
        }
        let mut stage = Vec::with_capacity(b);
        for _ in 0..b {
            let demand = if params.per_location_demand {
                nominal
                    .iter()
                    .map(|d| d * sample_demand_factor(t, params.demand_sigma, &mut rng))
                    .collect()
            } else {
                let xi = sample_demand_factor(t, params.demand_sigma, &mut rng);
                nominal.iter().map(|d| d * xi).collect()
            };
            let throughput = (0..nj)
                .map(|_| rate * sample_throughput_factor(params.disruption_rate, &mut rng))
                .collect();
            stage.push(Realization { demand, throughput });
        }
        blocks.push(stage);
    }
    Ok(ScenarioTree {
        horizon,
        params: params.clone(),
        blocks,
    })
}

impl ScenarioTree {
    pub fn branching(&self) -> usize {
        self.params.branching
    }

    /// Number of nodes at stage `t`.
    pub fn stage_size(&self, t: usize) -> usize {
        self.branching().pow((t - 1) as u32)
    }

    /// Id of the first node at stage `t`.
    pub fn stage_offset(&self, t: usize) -> usize {
        (1..t).map(|s| self.stage_size(s)).sum()
    }

    pub fn stage_nodes(&self, t: usize) -> Range<usize> {
        let start = self.stage_offset(t);
        start..start + self.stage_size(t)
    }

    pub fn node_count(&self) -> usize {
        self.stage_offset(self.horizon + 1)
    }

    pub fn leaf_count(&self) -> usize {
        self.stage_size(self.horizon)
    }

    pub fn stage_of(&self, id: usize) -> usize {
        let mut t = 1;
        let mut end = 1;
        while id >= end {
            t += 1;
            end += self.stage_size(t);
        }
        t
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        let t = self.stage_of(id);
        (t > 1).then(|| {
            let k = id - self.stage_offset(t);
            self.stage_offset(t - 1) + k / self.branching()
        })
    }

    pub fn children(&self, id: usize) -> Range<usize> {
        let t = self.stage_of(id);
        if t >= self.horizon {
            return id..id;
        }
        let b = self.branching();
        let k = id - self.stage_offset(t);
        let start = self.stage_offset(t + 1) + k * b;
        start..start + b
    }

    /// Realization block index of a node.
    pub fn block_of(&self, id: usize) -> usize {
        let t = self.stage_of(id);
        if t == 1 {
            0
        } else {
            (id - self.stage_offset(t)) % self.branching()
        }
    }

    pub fn realization(&self, id: usize) -> &Realization {
        &self.blocks[self.stage_of(id) - 1][self.block_of(id)]
    }

    pub fn stage_blocks(&self, t: usize) -> &[Realization] {
        &self.blocks[t - 1]
    }

    /// Probability of a single block at stage `t` given its parent.
    pub fn block_probability(&self, t: usize) -> f64 {
        if t <= 1 {
            1.0
        } else {
            1.0 / self.branching() as f64
        }
    }

    pub fn conditional_probability(&self, id: usize) -> f64 {
        self.block_probability(self.stage_of(id))
    }

    pub fn probability(&self, id: usize) -> f64 {
        let t = self.stage_of(id);
        libm::pow(self.branching() as f64, -((t - 1) as f64))
    }

    /// Probability-weighted mean demand per location at stage `t`.
    pub fn expected_demand(&self, t: usize) -> Vec<f64> {
        let blocks = self.stage_blocks(t);
        let p = self.block_probability(t);
        let mut out = alloc::vec![0.0; blocks[0].demand.len()];
        for r in blocks {
            for (o, d) in out.iter_mut().zip(&r.demand) {
                *o += p * d;
            }
        }
        out
    }

    pub fn node(&self, id: usize) -> Node {
        let r = self.realization(id);
        Node {
            id,
            stage: self.stage_of(id),
            parent: self.parent(id),
            children: self.children(id).collect(),
            probability: self.probability(id),
            conditional_probability: self.conditional_probability(id),
            block: self.block_of(id),
            demand: r.demand.clone(),
            throughput: r.throughput.clone(),
        }
    }

    pub fn nodes(&self) -> Vec<Node> {
        (0..self.node_count()).map(|id| self.node(id)).collect()
    }

    /// Root-to-leaf node ids ending at `leaf`.
    pub fn path_to(&self, leaf: usize) -> ScenarioPath {
        let mut nodes = alloc::vec![leaf];
        let mut cur = leaf;
        while let Some(p) = self.parent(cur) {
            nodes.push(p);
            cur = p;
        }
        nodes.reverse();
        ScenarioPath { nodes }
    }
}

/// `count` independent root-to-leaf walks.
pub fn sample_forward_paths<R: Rng + ?Sized>(
    tree: &ScenarioTree,
    count: usize,
    rng: &mut R,
) -> Vec<ScenarioPath> {
    (0..count)
        .map(|_| {
            let mut nodes = Vec::with_capacity(tree.horizon);
            let mut cur = 0;
            nodes.push(cur);
            for _ in 1..tree.horizon {
                let kids = tree.children(cur);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = kids.end - 1;
                for c in kids {
                    acc += tree.conditional_probability(c);
                    if u < acc {
                        pick = c;
                        break;
                    }
                }
                cur = pick;
                nodes.push(cur);
            }
            ScenarioPath { nodes }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_synthetic_instance, SyntheticConfig};
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn instance(horizon: usize) -> Instance {
        generate_synthetic_instance(&SyntheticConfig {
            horizon,
            ..SyntheticConfig::default()
        })
    }

    fn normal_cdf(x: f64) -> f64 {
        0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
    }

    #[test]
    fn demand_factor_edge_cases() {
        let mut rng = stream_rng(1, 9);
        assert_eq!(sample_demand_factor(1, 0.5, &mut rng), 1.0);
        assert_eq!(sample_demand_factor(3, 0.0, &mut rng), 1.0);
        let tiny: f64 = (0..100)
            .map(|_| sample_demand_factor(2, 1e-12, &mut rng))
            .sum();
        assert!((tiny / 100.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn demand_factor_matches_truncated_normal_moments() {
        let mut rng = stream_rng(2, 9);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_demand_factor(3, 0.5, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        // Normal(1, 1) truncated to [0, inf).
        let (mu, s) = (1.0, 1.0);
        let alpha = -mu / s;
        let phi = libm::exp(-0.5 * alpha * alpha) / libm::sqrt(core::f64::consts::TAU);
        let z = 1.0 - normal_cdf(alpha);
        let lam = phi / z;
        let t_mean = mu + s * lam;
        let t_var = s * s * (1.0 + alpha * lam - lam * lam);
        assert!((mean - t_mean).abs() < 0.01, "{mean} vs {t_mean}");
        assert!((var - t_var).abs() < 0.02, "{var} vs {t_var}");
        assert!(draws.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn throughput_factor() {
        let mut rng = stream_rng(3, 9);
        assert!((0..1000).all(|_| sample_throughput_factor(0.0, &mut rng) == 1.0));
        for _ in 0..1000 {
            let d = sample_throughput_given(2, &mut rng);
            assert!((0.6..=0.79).contains(&d));
        }
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_throughput_factor(0.5, &mut rng) == 1.0)
            .count();
        let p = ones as f64 / n as f64;
        assert!((p - libm::exp(-0.5)).abs() < 0.01, "{p}");
    }

    #[test]
    fn tree_shapes() {
        let inst = instance(3);
        let t1 = build_tree(
            &inst,
            &TreeParams {
                branching: 1,
                ..TreeParams::default()
            },
        )
        .unwrap();
        assert!(t1.nodes().iter().all(|n| n.probability == 1.0));

        let t2 = build_tree(
            &inst,
            &TreeParams {
                branching: 2,
                ..TreeParams::default()
            },
        )
        .unwrap();
        assert_eq!(t2.leaf_count(), 4);
        for id in t2.stage_nodes(3) {
            assert_eq!(t2.probability(id), 0.25);
        }

        let inst6 = instance(6);
        let t4 = build_tree(
            &inst6,
            &TreeParams {
                branching: 4,
                ..TreeParams::default()
            },
        )
        .unwrap();
        assert_eq!(t4.leaf_count(), 1024);
    }

    #[test]
    fn tree_is_reproducible() {
        let inst = instance(4);
        let p = TreeParams {
            branching: 3,
            seed: 11,
            ..TreeParams::default()
        };
        assert_eq!(
            build_tree(&inst, &p).unwrap(),
            build_tree(&inst, &p).unwrap()
        );
    }

    #[test]
    fn paths() {
        let inst = instance(3);
        let t1 = build_tree(
            &inst,
            &TreeParams {
                branching: 1,
                ..TreeParams::default()
            },
        )
        .unwrap();
        let mut rng = stream_rng(1, 1);
        let p = sample_forward_paths(&t1, 4, &mut rng);
        assert!(p.iter().all(|x| x == &p[0]));

        let t2 = build_tree(
            &inst,
            &TreeParams {
                branching: 2,
                ..TreeParams::default()
            },
        )
        .unwrap();
        let p = sample_forward_paths(&t2, 5, &mut rng);
        assert_eq!(p.len(), 5);
        for path in &p {
            assert_eq!(path.nodes.len(), 3);
            for w in path.nodes.windows(2) {
                assert_eq!(t2.parent(w[1]), Some(w[0]));
            }
        }
    }

    #[test]
    fn child_frequencies_follow_conditional_probabilities() {
        let inst = instance(2);
        let tree = build_tree(
            &inst,
            &TreeParams {
                branching: 4,
                ..TreeParams::default()
            },
        )
        .unwrap();
        let mut rng = stream_rng(5, 1);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for p in sample_forward_paths(&tree, n, &mut rng) {
            counts[tree.block_of(p.nodes[1])] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    proptest! {
        #[test]
        fn probability_conservation(b in 1usize..5, horizon in 1usize..5, seed in 0u64..100) {
            let inst = instance(horizon);
            let tree = build_tree(&inst, &TreeParams { branching: b, seed, ..TreeParams::default() }).unwrap();
            let nodes = tree.nodes();
            prop_assert_eq!(nodes[0].probability, 1.0);
            prop_assert!(nodes[0].parent.is_none());
            for t in 1..=horizon {
                let s: f64 = tree.stage_nodes(t).map(|id| nodes[id].probability).sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                prop_assert_eq!(tree.stage_nodes(t).len(), b.pow((t - 1) as u32));
            }
            for n in &nodes {
                if !n.children.is_empty() {
                    let cs: f64 = n.children.iter().map(|&c| nodes[c].conditional_probability).sum();
                    prop_assert!((cs - 1.0).abs() < 1e-9);
                    for &c in &n.children {
                        prop_assert_eq!(nodes[c].parent, Some(n.id));
                        let want = n.probability * nodes[c].conditional_probability;
                        prop_assert!((nodes[c].probability - want).abs() < 1e-12);
                    }
                }
                prop_assert!(n.demand.iter().all(|&d| d >= 0.0));
                prop_assert!(n.throughput.iter().all(|&k| (0.0..=inst.capacity.nominal_rate).contains(&k)));
            }
            // Stage-wise independence: every parent sees the same child realizations.
            if horizon >= 2 {
                for p in tree.stage_nodes(horizon - 1) {
                    let kids: Vec<_> = tree.children(p).map(|c| tree.realization(c).clone()).collect();
                    prop_assert_eq!(&kids, &tree.blocks[horizon - 1]);
                }
            }
        }
    }
}
