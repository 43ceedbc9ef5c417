//! Cold-start promotion experiments.
//!
//! A new item `eta` may be linked to `R` existing users. Users are chosen by
//! a degree-based rule with selection weight `k^tau` (`tau = +inf` picks the
//! most active users, `-inf` the least active), and the outcome `H` counts
//! the other users whose top-`L` list then contains `eta`.
//!
//! Adding `eta` changes neither the co-purchase counts nor the degrees of
//! existing items, so item-item similarities and every user's baseline
//! scores stay as they were. Evaluation therefore only needs `sim(eta, g)`
//! and, per user, the `L`-th best baseline score ([`UserThresholds`]).
//! `eta` loses every score tie: it makes the list of user `i` iff its score
//! is strictly above that threshold.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{BipartiteNetwork, Side};
use crate::recsys::{self, cosine, IcfScorer, ItemSimilarity};

/// Default recommendation list length.
pub const DEFAULT_LIST_LENGTH: usize = 6;

/// Rule for choosing the users a new item is linked to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Strategy {
    /// Highest degrees first, ties in random order.
    MaxD,
    /// Lowest degrees first, ties in random order.
    MinD,
    /// Degree-proportional sampling, `tau = 1`.
    Pa,
    /// Uniform sampling, `tau = 0`.
    Ran,
    /// Sampling without replacement with weight `k^tau`.
    Exponent(f64),
}

impl Strategy {
    pub fn tau(&self) -> f64 {
        match *self {
            Strategy::MaxD => f64::INFINITY,
            Strategy::MinD => f64::NEG_INFINITY,
            Strategy::Pa => 1.0,
            Strategy::Ran => 0.0,
            Strategy::Exponent(t) => t,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::MaxD => "MaxD",
            Strategy::MinD => "MinD",
            Strategy::Pa => "PA",
            Strategy::Ran => "RAN",
            Strategy::Exponent(_) => "TAU",
        }
    }

    /// The four named strategies.
    pub fn classic() -> [Strategy; 4] {
        [Strategy::MaxD, Strategy::MinD, Strategy::Pa, Strategy::Ran]
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Exponent(t) => write!(f, "TAU({t})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "maxd" => Ok(Strategy::MaxD),
            "mind" => Ok(Strategy::MinD),
            "pa" => Ok(Strategy::Pa),
            "ran" => Ok(Strategy::Ran),
            lower => {
                let inner = lower
                    .strip_prefix("tau(")
                    .and_then(|r| r.strip_suffix(')'))
                    .or_else(|| lower.strip_prefix("tau="))
                    .unwrap_or(lower);
                inner
                    .parse::<f64>()
                    .ok()
                    .filter(|t| t.is_finite())
                    .map(Strategy::Exponent)
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy {s:?}")))
            }
        }
    }
}

/// Picks `r` distinct users according to `strategy`.
pub fn select_users<R: Rng>(network: &BipartiteNetwork, strategy: Strategy, r: usize, rng: &mut R) -> Result<Vec<u32>> {
    let n = network.user_count();
    if r > n {
        return Err(Error::TooManyUsers {
            requested: r,
            available: n,
        });
    }
    let degrees = network.degrees(Side::User);
    let picked = match strategy {
        Strategy::MaxD | Strategy::MinD => {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.shuffle(rng);
            // stable sort keeps the random order within each degree class
            if strategy == Strategy::MaxD {
                order.sort_by_key(|&u| std::cmp::Reverse(degrees[u as usize]));
            } else {
                order.sort_by_key(|&u| degrees[u as usize]);
            }
            order.truncate(r);
            order
        }
        other => {
            let tau = other.tau();
            let weights: Vec<f64> = degrees.iter().map(|&k| (k as f64).powf(tau)).collect();
            weighted_sample_without_replacement(&weights, r, rng)
        }
    };
    Ok(picked)
}

/// Sequential sampling without replacement: each draw picks an index with
/// probability proportional to its weight among those not yet drawn.
///
/// A sum tree gives `O(log n)` draws; sums are recomputed from children on
/// every update so removed weights leave no residue.
pub fn weighted_sample_without_replacement<R: Rng>(weights: &[f64], count: usize, rng: &mut R) -> Vec<u32> {
    let n = weights.len();
    let size = n.next_power_of_two().max(1);
    let mut tree = vec![0.0f64; 2 * size];
    tree[size..size + n].copy_from_slice(weights);
    for node in (1..size).rev() {
        tree[node] = tree[2 * node] + tree[2 * node + 1];
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count.min(n) {
        let total = tree[1];
        if total.is_nan() || total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut node = 1;
        while node < size {
            let left = tree[2 * node];
            if target < left || tree[2 * node + 1] <= 0.0 {
                node *= 2;
            } else {
                target -= left;
                node = 2 * node + 1;
            }
        }
        // rounding can land on an exhausted leaf only when its sibling subtree
        // is empty as well; walk to the nearest live leaf in that case
        let mut leaf = node - size;
        if tree[node] <= 0.0 {
            leaf = (0..n).find(|&i| tree[size + i] > 0.0).expect("positive total");
        }
        out.push(leaf as u32);
        let mut node = size + leaf;
        tree[node] = 0.0;
        while node > 1 {
            node /= 2;
            tree[node] = tree[2 * node] + tree[2 * node + 1];
        }
    }
    out
}

/// The base network plus a new item `eta` linked to a set of users.
/// The base network is borrowed and never modified.
#[derive(Debug, Clone)]
pub struct InjectionView<'a> {
    base: &'a BipartiteNetwork,
    linked: Vec<u32>,
    mask: Vec<bool>,
}

impl<'a> InjectionView<'a> {
    pub fn new(base: &'a BipartiteNetwork, users: &[u32]) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidParameter("a new item needs at least one link".into()));
        }
        let mut mask = vec![false; base.user_count()];
        for &u in users {
            let slot = mask.get_mut(u as usize).ok_or_else(|| {
                Error::InvalidParameter(format!("user {u} out of range for {} users", base.user_count()))
            })?;
            if *slot {
                return Err(Error::DuplicateUser(u));
            }
            *slot = true;
        }
        let mut linked = users.to_vec();
        linked.sort_unstable();
        Ok(InjectionView { base, linked, mask })
    }

    pub fn base(&self) -> &'a BipartiteNetwork {
        self.base
    }

    /// Index the new item would take in the augmented network.
    pub fn new_item(&self) -> u32 {
        self.base.item_count() as u32
    }

    /// Degree of the new item, `R`.
    pub fn degree(&self) -> usize {
        self.linked.len()
    }

    pub fn linked(&self) -> &[u32] {
        &self.linked
    }

    pub fn is_linked(&self, user: u32) -> bool {
        self.mask[user as usize]
    }

    pub(crate) fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Materializes the augmented network, with the new item last and
    /// identified as `eta`.
    pub fn augmented(&self) -> BipartiteNetwork {
        let mut item_ids = self.base.ids(Side::Item).to_vec();
        item_ids.push("eta".to_owned());
        let eta = self.new_item();
        let edges = self.base.edges().chain(self.linked.iter().map(|&u| (u, eta)));
        BipartiteNetwork::from_edges(self.base.ids(Side::User).to_vec(), item_ids, edges)
            .expect("augmenting a valid network keeps it valid")
            .0
    }
}

/// `sim(eta, g)` for every item `g` bought by some linked user, ascending by `g`.
pub fn target_similarities(view: &InjectionView) -> Vec<(u32, f64)> {
    let net = view.base;
    let mut counts: std::collections::BTreeMap<u32, u32> = std::collections::BTreeMap::new();
    for &u in &view.linked {
        for &g in net.items_of(u) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    let r = view.degree() as u32;
    counts.into_iter().map(|(g, c)| (g, cosine(c, r, net.item_degree(g)))).collect()
}

/// Per-user `L`-th largest positive baseline score (zero when the user has
/// fewer than `L` positive candidates).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserThresholds {
    pub list_length: usize,
    pub values: Vec<f64>,
}

pub fn compute_thresholds(network: &BipartiteNetwork, similarity: &ItemSimilarity, list_length: usize) -> Result<UserThresholds> {
    if list_length == 0 {
        return Err(Error::InvalidParameter("list length must be at least 1".into()));
    }
    let values = (0..network.user_count() as u32)
        .into_par_iter()
        .map_init(
            || (IcfScorer::new(network.item_count()), Vec::new()),
            |(scorer, buf): &mut (IcfScorer, Vec<f64>), u| {
                buf.clear();
                scorer.for_each_score(network, similarity, u, |_, s| buf.push(s));
                lth_largest(buf, list_length)
            },
        )
        .collect();
    Ok(UserThresholds { list_length, values })
}

fn lth_largest(scores: &mut [f64], l: usize) -> f64 {
    if scores.len() < l {
        return 0.0;
    }
    let (_, nth, _) = scores.select_nth_unstable_by(l - 1, |a, b| b.partial_cmp(a).expect("finite scores"));
    *nth
}

/// 1-based position of a target scoring `target` among `scores`, placed
/// after every candidate with an equal score.
pub fn pessimistic_rank(scores: &[(u32, f64)], target: f64) -> usize {
    1 + scores.iter().filter(|&&(_, s)| s >= target).count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HitOutcome {
    /// Number of users whose list contains the new item.
    pub hits: usize,
    /// Per-user membership; always false for linked users.
    pub flags: Vec<bool>,
}

/// Computes `H` for one injection.
pub trait HitEvaluator: Sync {
    fn list_length(&self) -> usize;
    fn evaluate(&self, view: &InjectionView) -> HitOutcome;
    fn engine(&self) -> Engine;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Icf,
    Ucf,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "icf" => Ok(Engine::Icf),
            "ucf" => Ok(Engine::Ucf),
            other => Err(Error::InvalidParameter(format!("unknown engine {other:?}"))),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Icf => "icf",
            Engine::Ucf => "ucf",
        })
    }
}

/// Exact incremental `H` under item-based CF.
pub fn evaluate_h(view: &InjectionView, thresholds: &UserThresholds) -> HitOutcome {
    let net = view.base;
    let n = net.user_count();
    let mut score = vec![0.0f64; n];
    let mut touched = Vec::new();
    for (g, s) in target_similarities(view) {
        for &i in net.users_of(g) {
            if view.mask[i as usize] {
                continue;
            }
            if score[i as usize] == 0.0 {
                touched.push(i);
            }
            score[i as usize] += s;
        }
    }
    let mut flags = vec![false; n];
    let mut hits = 0;
    for i in touched {
        if score[i as usize] > thresholds.values[i as usize] {
            flags[i as usize] = true;
            hits += 1;
        }
    }
    HitOutcome { hits, flags }
}

pub struct IcfEvaluator<'a> {
    thresholds: &'a UserThresholds,
}

impl<'a> IcfEvaluator<'a> {
    pub fn new(thresholds: &'a UserThresholds) -> Self {
        IcfEvaluator { thresholds }
    }
}

impl HitEvaluator for IcfEvaluator<'_> {
    fn list_length(&self) -> usize {
        self.thresholds.list_length
    }

    fn evaluate(&self, view: &InjectionView) -> HitOutcome {
        evaluate_h(view, self.thresholds)
    }

    fn engine(&self) -> Engine {
        Engine::Icf
    }
}

/// Exact `H` under user-based CF.
///
/// Linking `eta` raises the degree of each linked user by one, which lowers
/// their similarity to everyone else and with it the baseline scores of
/// users near them. Only users sharing an item with a linked user can see
/// `eta` at all; each of them is rescored with the adjusted degrees.
pub struct UcfEvaluator<'a> {
    network: &'a BipartiteNetwork,
    list_length: usize,
}

impl<'a> UcfEvaluator<'a> {
    pub fn new(network: &'a BipartiteNetwork, list_length: usize) -> Result<Self> {
        if list_length == 0 {
            return Err(Error::InvalidParameter("list length must be at least 1".into()));
        }
        Ok(UcfEvaluator { network, list_length })
    }
}

impl HitEvaluator for UcfEvaluator<'_> {
    fn list_length(&self) -> usize {
        self.list_length
    }

    fn engine(&self) -> Engine {
        Engine::Ucf
    }

    fn evaluate(&self, view: &InjectionView) -> HitOutcome {
        let net = self.network;
        let mask = view.mask();
        let mut seen = vec![false; net.user_count()];
        let mut candidates = Vec::new();
        for &j in view.linked() {
            for &a in net.items_of(j) {
                for &i in net.users_of(a) {
                    if !mask[i as usize] && !seen[i as usize] {
                        seen[i as usize] = true;
                        candidates.push(i);
                    }
                }
            }
        }
        candidates.sort_unstable();
        let l = self.list_length;
        let hit_users: Vec<u32> = candidates
            .into_par_iter()
            .filter(|&i| {
                let row = recsys::user_similarity_row(net, i, Some(mask));
                let mut target = 0.0;
                for &(j, s) in &row {
                    if mask[j as usize] {
                        target += s;
                    }
                }
                if target.is_nan() || target <= 0.0 {
                    return false;
                }
                let scores = recsys::ucf_scores_from_row(net, i, &row);
                pessimistic_rank(&scores, target) <= l
            })
            .collect();
        let mut flags = vec![false; net.user_count()];
        for &i in &hit_users {
            flags[i as usize] = true;
        }
        HitOutcome {
            hits: hit_users.len(),
            flags,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub strategy: Strategy,
    pub engine: Engine,
    pub links: usize,
    pub list_length: usize,
    pub master_seed: u64,
    /// `H` per realization, in realization order.
    pub samples: Vec<usize>,
    pub mean: f64,
    /// Sample standard deviation (zero for a single realization).
    pub std: f64,
}

impl ExperimentResult {
    pub fn realizations(&self) -> usize {
        self.samples.len()
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.samples.len() as f64).sqrt()
    }
}

fn mean_std(samples: &[usize]) -> (f64, f64) {
    let n = samples.len() as f64;
    let sum: u64 = samples.iter().map(|&h| h as u64).sum();
    let mean = sum as f64 / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = samples.iter().map(|&h| (h as f64 - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Generator for realization `index` under `master_seed`: the master seed
/// keys the generator and the realization index selects its stream.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Runs `realizations` independent select/inject/evaluate rounds.
/// Results do not depend on scheduling or thread count.
pub fn run_experiment<E: HitEvaluator + ?Sized>(
    network: &BipartiteNetwork,
    evaluator: &E,
    strategy: Strategy,
    links: usize,
    realizations: usize,
    master_seed: u64,
) -> Result<ExperimentResult> {
    if realizations == 0 {
        return Err(Error::InvalidParameter("need at least one realization".into()));
    }
    if links == 0 {
        return Err(Error::InvalidParameter("R must be at least 1".into()));
    }
    let samples = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = realization_rng(master_seed, r);
            let users = select_users(network, strategy, links, &mut rng)?;
            let view = InjectionView::new(network, &users)?;
            Ok(evaluator.evaluate(&view).hits)
        })
        .collect::<Result<Vec<usize>>>()?;
    let (mean, std) = mean_std(&samples);
    Ok(ExperimentResult {
        strategy,
        engine: evaluator.engine(),
        links,
        list_length: evaluator.list_length(),
        master_seed,
        samples,
        mean,
        std,
    })
}

/// Full cross product of strategies and `R` values, in that nesting order.
pub fn sweep<E: HitEvaluator + ?Sized>(
    network: &BipartiteNetwork,
    evaluator: &E,
    strategies: &[Strategy],
    links: &[usize],
    realizations: usize,
    master_seed: u64,
) -> Result<Vec<ExperimentResult>> {
    if strategies.is_empty() || links.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be non-empty".into()));
    }
    let n = network.user_count();
    if let Some(&r) = links.iter().find(|&&r| r > n) {
        return Err(Error::TooManyUsers {
            requested: r,
            available: n,
        });
    }
    let mut out = Vec::with_capacity(strategies.len() * links.len());
    for &strategy in strategies {
        for &r in links {
            out.push(run_experiment(network, evaluator, strategy, r, realizations, master_seed)?);
        }
    }
    Ok(out)
}

pub const SWEEP_CSV_HEADER: &str = "strategy,tau,R,L,mean_H,std_H,realizations,seed";

fn format_tau(tau: f64) -> String {
    if tau == f64::INFINITY {
        "inf".into()
    } else if tau == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{tau}")
    }
}

pub fn write_sweep_csv<W: Write>(results: &[ExperimentResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.strategy.name(),
            format_tau(r.strategy.tau()),
            r.links,
            r.list_length,
            r.mean,
            r.std,
            r.realizations(),
            r.master_seed
        )?;
    }
    out.flush()
}

/// Thirteen roughly log-spaced values from 1 to 1000.
pub fn default_links_grid() -> Vec<usize> {
    let mut grid: Vec<usize> = (0..=12).map(|i| 10f64.powf(i as f64 * 0.25).round() as usize).collect();
    grid.dedup();
    grid
}

/// `tau` from -4 to 4 in steps of 0.5.
pub fn default_tau_grid() -> Vec<f64> {
    (-8..=8).map(|i| i as f64 * 0.5).collect()
}
