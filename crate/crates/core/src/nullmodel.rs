//! Degree-preserving randomization by link crossing.
//!
//! Two links `(i, a)` and `(j, b)` are drawn at random and rewired to
//! `(i, b)` and `(j, a)` whenever neither new link already exists. Both
//! degree sequences are invariant under the move.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::network::BipartiteNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReshuffleReport {
    pub attempts: u64,
    pub successful_swaps: u64,
    pub seed: u64,
}

impl ReshuffleReport {
    pub fn success_ratio(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successful_swaps as f64 / self.attempts as f64
        }
    }
}

/// Number of proposals used when the caller does not specify one: three per link.
pub fn default_attempts(network: &BipartiteNetwork) -> u64 {
    3 * network.link_count() as u64
}

/// Randomizes `network` with `attempts` link-crossing proposals.
///
/// Rejected proposals (shared endpoint, or a rewired link that already
/// exists) still count as attempts.
pub fn reshuffle(network: &BipartiteNetwork, attempts: u64, seed: u64) -> Result<(BipartiteNetwork, ReshuffleReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rewirer = Rewirer::new(network);
    let mut successful_swaps = 0;
    if rewirer.len() >= 2 {
        for _ in 0..attempts {
            let (e, f) = rewirer.pick_pair(&mut rng);
            if rewirer.try_swap(e, f, |_, _| true) {
                successful_swaps += 1;
            }
        }
    }
    let report = ReshuffleReport {
        attempts,
        successful_swaps,
        seed,
    };
    Ok((rewirer.into_network(network)?, report))
}

/// Mutable edge list with sorted per-user rows for O(log k) membership tests.
pub(crate) struct Rewirer {
    edges: Vec<(u32, u32)>,
    rows: Vec<Vec<u32>>,
}

impl Rewirer {
    pub(crate) fn new(network: &BipartiteNetwork) -> Self {
        let rows = (0..network.user_count() as u32)
            .map(|u| network.items_of(u).to_vec())
            .collect();
        Rewirer {
            edges: network.edges().collect(),
            rows,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.edges.len()
    }

    /// Two distinct edge slots, uniformly at random.
    pub(crate) fn pick_pair<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let w = self.edges.len();
        let e = rng.gen_range(0..w);
        let mut f = rng.gen_range(0..w - 1);
        if f >= e {
            f += 1;
        }
        (e, f)
    }

    fn contains(&self, user: u32, item: u32) -> bool {
        self.rows[user as usize].binary_search(&item).is_ok()
    }

    /// Rewires slots `e = (i, a)` and `f = (j, b)` into `(i, b)` and `(j, a)`
    /// if the result stays simple and `accept(old, new)` agrees, where each
    /// argument lists the two links before and after the move.
    pub(crate) fn try_swap<F>(&mut self, e: usize, f: usize, accept: F) -> bool
    where
        F: FnOnce([(u32, u32); 2], [(u32, u32); 2]) -> bool,
    {
        let (i, a) = self.edges[e];
        let (j, b) = self.edges[f];
        if i == j || a == b || self.contains(i, b) || self.contains(j, a) {
            return false;
        }
        if !accept([(i, a), (j, b)], [(i, b), (j, a)]) {
            return false;
        }
        replace_sorted(&mut self.rows[i as usize], a, b);
        replace_sorted(&mut self.rows[j as usize], b, a);
        self.edges[e] = (i, b);
        self.edges[f] = (j, a);
        true
    }

    pub(crate) fn into_network(self, template: &BipartiteNetwork) -> Result<BipartiteNetwork> {
        template.with_same_ids(self.edges)
    }
}

fn replace_sorted(row: &mut Vec<u32>, old: u32, new: u32) {
    let pos = row.binary_search(&old).expect("edge present in row");
    row.remove(pos);
    let pos = row.binary_search(&new).unwrap_err();
    row.insert(pos, new);
}
