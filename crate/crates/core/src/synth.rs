//! Synthetic bipartite networks with heavy-tailed degrees and tunable
//! degree correlations.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::BipartiteNetwork;
use crate::nullmodel::Rewirer;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationTarget {
    Negative,
    Positive,
}

impl std::str::FromStr for CorrelationTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "negative" | "neg" | "-" => Ok(CorrelationTarget::Negative),
            "positive" | "pos" | "+" => Ok(CorrelationTarget::Positive),
            other => Err(Error::InvalidParameter(format!("unknown correlation target {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub user_count: usize,
    pub item_count: usize,
    pub user_exponent: f64,
    pub item_exponent: f64,
    pub user_k_min: u32,
    pub user_k_max: u32,
    pub item_k_min: u32,
    pub item_k_max: u32,
    /// `None` leaves the configuration-model correlations untouched.
    pub target: Option<CorrelationTarget>,
    /// Swap proposals for correlation tuning, as a multiple of the link count.
    pub tuning_budget_per_link: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            user_count: 10_000,
            item_count: 5_000,
            user_exponent: 2.5,
            item_exponent: 2.2,
            user_k_min: 1,
            user_k_max: 1_000,
            item_k_min: 1,
            item_k_max: 1_000,
            target: Some(CorrelationTarget::Negative),
            tuning_budget_per_link: 10.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.user_count < 2 || self.item_count < 2 {
            return bad("need at least two users and two items".into());
        }
        for (name, g) in [("user", self.user_exponent), ("item", self.item_exponent)] {
            if g.is_nan() || g <= 1.0 {
                return bad(format!("{name} exponent must exceed 1, got {g}"));
            }
        }
        for (name, lo, hi) in [
            ("user", self.user_k_min, self.user_k_max),
            ("item", self.item_k_min, self.item_k_max),
        ] {
            if lo < 1 || lo > hi {
                return bad(format!("{name} degree bounds must satisfy 1 <= k_min <= k_max"));
            }
        }
        if self.tuning_budget_per_link.is_nan() || self.tuning_budget_per_link < 0.0 {
            return bad("tuning budget must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub config: GeneratorConfig,
    pub users: usize,
    pub items: usize,
    pub links: usize,
    /// Stubs removed from the heavier side to equalize degree sums.
    pub balance_decrements: u64,
    pub repair_swaps: u64,
    pub tuning: Option<TuneReport>,
    pub correlation_before_tuning: Option<f64>,
    pub correlation: Option<f64>,
}

/// Draws `count` degrees from `P(k) ∝ k^-exponent` on `[k_min, k_max]`.
///
/// With `k_max = None` the support is unbounded and the discrete law is
/// approximated by rounding a continuous Pareto draw.
pub fn sample_degree_sequence(count: usize, exponent: f64, k_min: u32, k_max: Option<u32>, seed: u64) -> Result<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_degrees_with(&mut rng, count, exponent, k_min, k_max)
}

fn sample_degrees_with<R: Rng>(rng: &mut R, count: usize, exponent: f64, k_min: u32, k_max: Option<u32>) -> Result<Vec<u32>> {
    if k_min < 1 {
        return Err(Error::InvalidParameter("k_min must be at least 1".into()));
    }
    match k_max {
        Some(k_max) => {
            if k_max < k_min {
                return Err(Error::InvalidParameter(format!("k_max {k_max} below k_min {k_min}")));
            }
            let mut cdf = Vec::with_capacity((k_max - k_min + 1) as usize);
            let mut acc = 0.0;
            for k in k_min..=k_max {
                acc += (k as f64).powf(-exponent);
                cdf.push(acc);
            }
            let last = cdf.len() - 1;
            Ok((0..count)
                .map(|_| {
                    let u = rng.gen::<f64>() * acc;
                    k_min + cdf.partition_point(|&c| c <= u).min(last) as u32
                })
                .collect())
        }
        None => {
            if exponent.is_nan() || exponent <= 1.0 {
                return Err(Error::NonNormalizable(exponent));
            }
            let shift = k_min as f64 - 0.5;
            Ok((0..count)
                .map(|_| {
                    let u: f64 = rng.gen();
                    let x = shift * (1.0 - u).powf(-1.0 / (exponent - 1.0)) + 0.5;
                    x.floor().clamp(k_min as f64, u32::MAX as f64) as u32
                })
                .collect())
        }
    }
}

/// Decrements the largest degree on the heavier side, one stub at a time,
/// until both sides sum to the same total. Ties go to the lowest index.
/// Returns the number of decrements.
pub fn balance_degree_sums(users: &mut [u32], items: &mut [u32]) -> Result<u64> {
    let su: u64 = users.iter().map(|&k| k as u64).sum();
    let si: u64 = items.iter().map(|&k| k as u64).sum();
    let (heavy, excess) = if su >= si { (users, su - si) } else { (items, si - su) };
    let mut heap: BinaryHeap<(u32, Reverse<usize>)> = heavy.iter().enumerate().map(|(i, &k)| (k, Reverse(i))).collect();
    for _ in 0..excess {
        let (k, Reverse(i)) = heap.pop().expect("non-empty side");
        if k <= 1 {
            return Err(Error::InvalidParameter(
                "degree sums cannot be balanced without isolating a node".into(),
            ));
        }
        heavy[i] = k - 1;
        heap.push((k - 1, Reverse(i)));
    }
    Ok(excess)
}

/// Random simple bipartite graph with exactly the given degree sequences.
///
/// Stubs are matched uniformly at random; links that came out duplicated are
/// then moved by link crossing with a random partner link, up to a budget of
/// ten proposals per link.
pub fn configuration_model(user_degrees: &[u32], item_degrees: &[u32], seed: u64) -> Result<BipartiteNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    configuration_with(&mut rng, user_degrees, item_degrees).map(|(net, _)| net)
}

fn configuration_with<R: Rng>(rng: &mut R, user_degrees: &[u32], item_degrees: &[u32]) -> Result<(BipartiteNetwork, u64)> {
    let su: u64 = user_degrees.iter().map(|&k| k as u64).sum();
    let si: u64 = item_degrees.iter().map(|&k| k as u64).sum();
    if su != si {
        return Err(Error::InvalidParameter(format!("degree sums differ: {su} users vs {si} items")));
    }
    if user_degrees.iter().chain(item_degrees).any(|&k| k == 0) {
        return Err(Error::InvalidParameter("every degree must be at least 1".into()));
    }
    let mut item_stubs: Vec<u32> = item_degrees
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i as u32, k as usize))
        .collect();
    item_stubs.shuffle(rng);
    let mut edges: Vec<(u32, u32)> = user_degrees
        .iter()
        .enumerate()
        .flat_map(|(u, &k)| std::iter::repeat_n(u as u32, k as usize))
        .zip(item_stubs)
        .collect();

    let key = |(u, i): (u32, u32)| (u as u64) << 32 | i as u64;
    let mut multiplicity: HashMap<u64, u32> = HashMap::with_capacity(edges.len());
    let mut collisions = Vec::new();
    for (slot, &e) in edges.iter().enumerate() {
        let c = multiplicity.entry(key(e)).or_insert(0);
        *c += 1;
        if *c > 1 {
            collisions.push(slot);
        }
    }

    let w = edges.len();
    let budget = 10 * w as u64;
    let mut attempts = 0u64;
    let mut swaps = 0u64;
    while let Some(&slot) = collisions.last() {
        if multiplicity[&key(edges[slot])] <= 1 {
            collisions.pop();
            continue;
        }
        if attempts >= budget || w < 2 {
            break;
        }
        attempts += 1;
        let partner = rng.gen_range(0..w);
        let (i, a) = edges[slot];
        let (j, b) = edges[partner];
        if i == j || a == b || multiplicity.contains_key(&key((i, b))) || multiplicity.contains_key(&key((j, a))) {
            continue;
        }
        for old in [(i, a), (j, b)] {
            let c = multiplicity.get_mut(&key(old)).unwrap();
            *c -= 1;
            if *c == 0 {
                multiplicity.remove(&key(old));
            }
        }
        multiplicity.insert(key((i, b)), 1);
        multiplicity.insert(key((j, a)), 1);
        edges[slot] = (i, b);
        edges[partner] = (j, a);
        swaps += 1;
        collisions.pop();
    }
    let remaining: usize = multiplicity.values().map(|&c| c as usize - 1).sum();
    if remaining > 0 {
        return Err(Error::UnrealizableSequence(remaining));
    }
    let net = BipartiteNetwork::from_index_edges(user_degrees.len(), item_degrees.len(), edges)?;
    Ok((net, swaps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TuneReport {
    pub attempts: u64,
    pub accepted: u64,
}

/// Greedy degree-preserving rewiring that accepts a link crossing only when
/// it moves the edge-wise degree correlation toward `target`.
///
/// The correlation's means and variances are fixed by the degree sequences,
/// so a crossing of `(i, a)`, `(j, b)` changes it in proportion to
/// `-(k_i - k_j)(k_a - k_b)`.
pub fn tune_assortativity(
    network: &BipartiteNetwork,
    target: CorrelationTarget,
    swap_budget: u64,
    seed: u64,
) -> Result<(BipartiteNetwork, TuneReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tune_with(&mut rng, network, target, swap_budget)
}

fn tune_with<R: Rng>(
    rng: &mut R,
    network: &BipartiteNetwork,
    target: CorrelationTarget,
    swap_budget: u64,
) -> Result<(BipartiteNetwork, TuneReport)> {
    let ku = network.degrees(crate::network::Side::User);
    let ki = network.degrees(crate::network::Side::Item);
    let mut rewirer = Rewirer::new(network);
    let mut accepted = 0;
    if rewirer.len() >= 2 {
        for _ in 0..swap_budget {
            let (e, f) = rewirer.pick_pair(rng);
            let ok = rewirer.try_swap(e, f, |[(i, a), (j, b)], _| {
                let du = ku[i as usize] as i64 - ku[j as usize] as i64;
                let di = ki[a as usize] as i64 - ki[b as usize] as i64;
                let delta = -du * di;
                match target {
                    CorrelationTarget::Negative => delta < 0,
                    CorrelationTarget::Positive => delta > 0,
                }
            });
            if ok {
                accepted += 1;
            }
        }
    }
    let report = TuneReport {
        attempts: swap_budget,
        accepted,
    };
    Ok((rewirer.into_network(network)?, report))
}

/// Full pipeline: sample both sequences, balance, match stubs, tune.
pub fn generate(config: &GeneratorConfig) -> Result<(BipartiteNetwork, GenerationReport)> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut users = sample_degrees_with(
        &mut rng,
        config.user_count,
        config.user_exponent,
        config.user_k_min,
        Some(config.user_k_max),
    )?;
    let mut items = sample_degrees_with(
        &mut rng,
        config.item_count,
        config.item_exponent,
        config.item_k_min,
        Some(config.item_k_max),
    )?;
    let balance_decrements = balance_degree_sums(&mut users, &mut items)?;
    let (network, repair_swaps) = configuration_with(&mut rng, &users, &items)?;
    let correlation_before_tuning = stats::degree_correlation(&network);
    let (network, tuning) = match config.target {
        Some(target) => {
            let budget = (config.tuning_budget_per_link * network.link_count() as f64).round() as u64;
            let (net, report) = tune_with(&mut rng, &network, target, budget)?;
            (net, Some(report))
        }
        None => (network, None),
    };
    let report = GenerationReport {
        config: config.clone(),
        users: network.user_count(),
        items: network.item_count(),
        links: network.link_count(),
        balance_decrements,
        repair_swaps,
        tuning,
        correlation_before_tuning,
        correlation: stats::degree_correlation(&network),
    };
    Ok((network, report))
}
