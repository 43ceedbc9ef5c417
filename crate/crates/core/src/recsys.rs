//! Collaborative-filtering recommenders on binary purchase data.
//!
//! The main engine is item-based CF with cosine similarity
//! `sim(a, b) = c_ab / sqrt(k_a * k_b)`, where `c_ab` counts common buyers,
//! and accumulative user scores `w_ia = sum over purchased g of sim(a, g)`.
//! A top-k pruned variant and the mirrored user-based engine are included.
//!
//! Scores are accumulated in ascending order of the summed index, so every
//! code path that evaluates the same sum produces the same bits.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::network::{BipartiteNetwork, Side};

/// Basket size above which similarity construction logs a cost warning.
pub const DEFAULT_BASKET_WARNING: usize = 10_000;

/// Cosine of two binary vectors given their overlap and sizes.
#[inline]
pub fn cosine(common: u32, size_a: u32, size_b: u32) -> f64 {
    common as f64 / ((size_a as u64 * size_b as u64) as f64).sqrt()
}

/// Sparse symmetric item-item cosine matrix. Each row is sorted by neighbor
/// index and holds only positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSimilarity {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    values: Vec<f64>,
    item_degrees: Vec<u32>,
}

impl ItemSimilarity {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>, item_degrees: Vec<u32>) -> Self {
        let total = rows.iter().map(Vec::len).sum();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut neighbors = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        offsets.push(0);
        for row in rows {
            for (b, s) in row {
                neighbors.push(b);
                values.push(s);
            }
            offsets.push(neighbors.len());
        }
        ItemSimilarity {
            offsets,
            neighbors,
            values,
            item_degrees,
        }
    }

    pub fn item_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Stored entries counting both `(a, b)` and `(b, a)`.
    pub fn nonzeros(&self) -> usize {
        self.neighbors.len()
    }

    pub fn item_degrees(&self) -> &[u32] {
        &self.item_degrees
    }

    /// `(neighbor, similarity)` pairs of `item`, ascending by neighbor.
    pub fn row(&self, item: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let range = self.offsets[item as usize]..self.offsets[item as usize + 1];
        self.neighbors[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn row_len(&self, item: u32) -> usize {
        self.offsets[item as usize + 1] - self.offsets[item as usize]
    }

    /// Similarity of two items; zero when they share no buyer.
    pub fn get(&self, a: u32, b: u32) -> f64 {
        let range = self.offsets[a as usize]..self.offsets[a as usize + 1];
        match self.neighbors[range.clone()].binary_search(&b) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }
}

/// Exact item-item cosine matrix.
///
/// Co-purchase counts are gathered per item from its buyers' baskets, which
/// enumerates each user's item pairs and costs `O(sum_i k_i^2)` overall.
pub fn item_similarity(network: &BipartiteNetwork) -> ItemSimilarity {
    item_similarity_with_warning(network, DEFAULT_BASKET_WARNING)
}

pub fn item_similarity_with_warning(network: &BipartiteNetwork, basket_warning: usize) -> ItemSimilarity {
    let large = network
        .degrees(Side::User)
        .iter()
        .filter(|&&k| k as usize > basket_warning)
        .count();
    if large > 0 {
        log::warn!("{large} users have baskets above {basket_warning} items; similarity construction is quadratic in basket size");
    }
    let m = network.item_count();
    let degrees = network.degrees(Side::Item);
    let rows: Vec<Vec<(u32, f64)>> = (0..m as u32)
        .into_par_iter()
        .map_init(
            || (vec![0u32; m], Vec::new()),
            |(counts, touched), a| {
                for &u in network.users_of(a) {
                    for &b in network.items_of(u) {
                        if b == a {
                            continue;
                        }
                        if counts[b as usize] == 0 {
                            touched.push(b);
                        }
                        counts[b as usize] += 1;
                    }
                }
                touched.sort_unstable();
                let ka = degrees[a as usize];
                let row = touched
                    .iter()
                    .map(|&b| (b, cosine(counts[b as usize], ka, degrees[b as usize])))
                    .collect();
                for &b in touched.iter() {
                    counts[b as usize] = 0;
                }
                touched.clear();
                row
            },
        )
        .collect();
    ItemSimilarity::from_rows(rows, degrees.to_vec())
}

/// Keeps, for every item, its `k` most similar neighbors (ties by ascending
/// neighbor index). A pair survives if either endpoint keeps the other.
pub fn item_similarity_topk(similarity: &ItemSimilarity, k: usize) -> ItemSimilarity {
    let m = similarity.item_count();
    let kept: Vec<Vec<u32>> = (0..m as u32)
        .map(|a| {
            let mut row: Vec<(u32, f64)> = similarity.row(a).collect();
            row.sort_by(|x, y| desc_score_asc_index(*x, *y));
            row.truncate(k);
            let mut ids: Vec<u32> = row.into_iter().map(|(b, _)| b).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    let rows = (0..m as u32)
        .map(|a| {
            similarity
                .row(a)
                .filter(|&(b, _)| kept[a as usize].binary_search(&b).is_ok() || kept[b as usize].binary_search(&a).is_ok())
                .collect()
        })
        .collect();
    ItemSimilarity::from_rows(rows, similarity.item_degrees.clone())
}

/// Positive scores of a user's unpurchased items, ascending by item index.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoreVector {
    pub user: u32,
    pub scores: Vec<(u32, f64)>,
}

impl ScoreVector {
    pub fn get(&self, item: u32) -> f64 {
        match self.scores.binary_search_by_key(&item, |&(i, _)| i) {
            Ok(pos) => self.scores[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// The `l` best items: descending score, ties by ascending index.
    pub fn top(&self, l: usize) -> RecommendationList {
        let mut items = self.scores.clone();
        let l = l.min(items.len());
        if l < items.len() && l > 0 {
            items.select_nth_unstable_by(l - 1, |x, y| desc_score_asc_index(*x, *y));
        }
        items.truncate(l);
        items.sort_by(|x, y| desc_score_asc_index(*x, *y));
        RecommendationList {
            user: self.user,
            items,
            capacity: l.max(1),
        }
    }
}

pub(crate) fn desc_score_asc_index(x: (u32, f64), y: (u32, f64)) -> Ordering {
    y.1.partial_cmp(&x.1).unwrap_or(Ordering::Equal).then(x.0.cmp(&y.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationList {
    pub user: u32,
    /// `(item, score)` in recommendation order.
    pub items: Vec<(u32, f64)>,
    pub capacity: usize,
}

impl RecommendationList {
    pub fn contains(&self, item: u32) -> bool {
        self.items.iter().any(|&(i, _)| i == item)
    }
}

/// Reusable scratch space for item-based scoring.
pub struct IcfScorer {
    acc: Vec<f64>,
    owned: Vec<bool>,
    touched: Vec<u32>,
}

impl IcfScorer {
    pub fn new(item_count: usize) -> Self {
        IcfScorer {
            acc: vec![0.0; item_count],
            owned: vec![false; item_count],
            touched: Vec::new(),
        }
    }

    /// Calls `visit(item, score)` for every unpurchased item with a positive
    /// score, in ascending item order.
    pub fn for_each_score<F>(&mut self, network: &BipartiteNetwork, similarity: &ItemSimilarity, user: u32, mut visit: F)
    where
        F: FnMut(u32, f64),
    {
        let basket = network.items_of(user);
        for &g in basket {
            self.owned[g as usize] = true;
        }
        for &g in basket {
            for (a, s) in similarity.row(g) {
                if self.owned[a as usize] {
                    continue;
                }
                if self.acc[a as usize] == 0.0 {
                    self.touched.push(a);
                }
                self.acc[a as usize] += s;
            }
        }
        self.touched.sort_unstable();
        for &a in &self.touched {
            visit(a, self.acc[a as usize]);
            self.acc[a as usize] = 0.0;
        }
        self.touched.clear();
        for &g in basket {
            self.owned[g as usize] = false;
        }
    }

    pub fn score(&mut self, network: &BipartiteNetwork, similarity: &ItemSimilarity, user: u32) -> ScoreVector {
        let mut scores = Vec::new();
        self.for_each_score(network, similarity, user, |a, s| scores.push((a, s)));
        ScoreVector { user, scores }
    }
}

pub fn score_user(network: &BipartiteNetwork, similarity: &ItemSimilarity, user: u32) -> ScoreVector {
    IcfScorer::new(network.item_count()).score(network, similarity, user)
}

pub fn recommend(network: &BipartiteNetwork, similarity: &ItemSimilarity, user: u32, l: usize) -> RecommendationList {
    let mut list = score_user(network, similarity, user).top(l);
    list.capacity = l;
    list
}

/// Item-based lists for many users in parallel, in the order given.
pub fn recommend_many(network: &BipartiteNetwork, similarity: &ItemSimilarity, users: &[u32], l: usize) -> Vec<RecommendationList> {
    users
        .par_iter()
        .map_init(
            || IcfScorer::new(network.item_count()),
            |scorer, &u| {
                let mut list = scorer.score(network, similarity, u).top(l);
                list.capacity = l;
                list
            },
        )
        .collect()
}

/// Cosine similarities between `user` and every user sharing an item with
/// it, ascending by the other user's index.
///
/// `bumped` marks users whose degree counts one extra purchase that no
/// other user shares; pass `None` for the plain network.
pub fn user_similarity_row(network: &BipartiteNetwork, user: u32, bumped: Option<&[bool]>) -> Vec<(u32, f64)> {
    let mut counts = std::collections::BTreeMap::<u32, u32>::new();
    for &a in network.items_of(user) {
        for &j in network.users_of(a) {
            if j != user {
                *counts.entry(j).or_insert(0) += 1;
            }
        }
    }
    let degree = |v: u32| network.user_degree(v) + bumped.map_or(0, |b| b[v as usize] as u32);
    let ki = degree(user);
    counts.into_iter().map(|(j, c)| (j, cosine(c, ki, degree(j)))).collect()
}

/// User-based CF scores `w_ia = sum over j != i of sim(i, j) a_ja` for the
/// unpurchased items of `user`.
pub fn ucf_score_user(network: &BipartiteNetwork, user: u32) -> ScoreVector {
    let row = user_similarity_row(network, user, None);
    ScoreVector {
        user,
        scores: ucf_scores_from_row(network, user, &row),
    }
}

pub(crate) fn ucf_scores_from_row(network: &BipartiteNetwork, user: u32, row: &[(u32, f64)]) -> Vec<(u32, f64)> {
    let basket = network.items_of(user);
    let mut acc = std::collections::BTreeMap::<u32, f64>::new();
    for &(j, s) in row {
        for &a in network.items_of(j) {
            if basket.binary_search(&a).is_err() {
                *acc.entry(a).or_insert(0.0) += s;
            }
        }
    }
    acc.into_iter().filter(|&(_, s)| s > 0.0).collect()
}

pub fn ucf_recommend(network: &BipartiteNetwork, user: u32, l: usize) -> RecommendationList {
    let mut list = ucf_score_user(network, user).top(l);
    list.capacity = l;
    list
}
