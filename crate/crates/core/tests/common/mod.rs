//! Brute-force reference implementations shared by the integration tests.
//!
//! Everything here works on dense 0/1 matrices of the augmented network and
//! builds complete recommendation lists, without touching the sparse or
//! incremental code paths under test.

#![allow(dead_code)]

use coldstart_core::BipartiteNetwork;
use rand::Rng;

pub const FIVE_EDGES: &str = "u1 o1\nu1 o2\nu2 o1\nu2 o3\nu3 o2\n";

pub fn five_edge() -> BipartiteNetwork {
    BipartiteNetwork::ingest(FIVE_EDGES.as_bytes()).unwrap().network
}

/// Random network with `n, m` in `[2, max]` and every node covered.
pub fn random_small_network<R: Rng>(rng: &mut R, max: usize) -> BipartiteNetwork {
    let n = rng.gen_range(2..=max);
    let m = rng.gen_range(2..=max);
    let density = rng.gen_range(0.1..0.6);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for i in 0..m as u32 {
            if rng.gen_bool(density) {
                edges.push((u, i));
            }
        }
    }
    for u in 0..n as u32 {
        edges.push((u, rng.gen_range(0..m as u32)));
    }
    for i in 0..m as u32 {
        edges.push((rng.gen_range(0..n as u32), i));
    }
    BipartiteNetwork::from_index_edges(n, m, edges).unwrap()
}

/// Dense adjacency of the network with an extra last column for the new item.
pub fn augmented_dense(net: &BipartiteNetwork, linked: &[u32]) -> Vec<Vec<bool>> {
    let m = net.item_count();
    (0..net.user_count() as u32)
        .map(|u| {
            let mut row: Vec<bool> = (0..m as u32).map(|i| net.has_edge(u, i)).collect();
            row.push(linked.contains(&u));
            row
        })
        .collect()
}

/// Full item-item cosine matrix of a dense adjacency.
pub fn dense_item_cosine(a: &[Vec<bool>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = a[0].len();
    let k: Vec<u64> = (0..m).map(|x| (0..n).filter(|&s| a[s][x]).count() as u64).collect();
    (0..m)
        .map(|x| {
            (0..m)
                .map(|y| {
                    if x == y || k[x] == 0 || k[y] == 0 {
                        return 0.0;
                    }
                    let common = (0..n).filter(|&s| a[s][x] && a[s][y]).count();
                    common as f64 / ((k[x] * k[y]) as f64).sqrt()
                })
                .collect()
        })
        .collect()
}

/// Full user-user cosine matrix of a dense adjacency.
pub fn dense_user_cosine(a: &[Vec<bool>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = a[0].len();
    let k: Vec<u64> = a.iter().map(|row| row.iter().filter(|&&x| x).count() as u64).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    let common = (0..m).filter(|&x| a[i][x] && a[j][x]).count();
                    common as f64 / ((k[i] * k[j]) as f64).sqrt()
                })
                .collect()
        })
        .collect()
}

/// Whether `target` lands in the top `l` of `scores` (item -> score over all
/// unpurchased items), with zero scores never listed and the target placed
/// after every item it ties with.
pub fn target_in_full_list(scores: &[(usize, f64)], target: usize, l: usize) -> bool {
    let mut listed: Vec<(usize, f64)> = scores.iter().copied().filter(|&(_, s)| s > 0.0).collect();
    listed.sort_by(|x, y| {
        y.1.partial_cmp(&x.1)
            .unwrap()
            .then((x.0 == target).cmp(&(y.0 == target)))
            .then(x.0.cmp(&y.0))
    });
    listed.iter().take(l).any(|&(i, _)| i == target)
}

/// Per-user membership of the new item in item-based CF lists of length `l`,
/// recomputed from scratch on the augmented network.
pub fn brute_force_icf_flags(net: &BipartiteNetwork, linked: &[u32], l: usize) -> Vec<bool> {
    let a = augmented_dense(net, linked);
    let sim = dense_item_cosine(&a);
    let m = a[0].len();
    let eta = m - 1;
    (0..a.len())
        .map(|i| {
            if a[i][eta] {
                return false;
            }
            let scores: Vec<(usize, f64)> = (0..m)
                .filter(|&x| !a[i][x])
                .map(|x| {
                    let mut w = 0.0;
                    for g in 0..m {
                        if g != x && a[i][g] {
                            w += sim[x][g];
                        }
                    }
                    (x, w)
                })
                .collect();
            target_in_full_list(&scores, eta, l)
        })
        .collect()
}

/// Same as [`brute_force_icf_flags`] for user-based CF.
pub fn brute_force_ucf_flags(net: &BipartiteNetwork, linked: &[u32], l: usize) -> Vec<bool> {
    let a = augmented_dense(net, linked);
    let sim = dense_user_cosine(&a);
    let n = a.len();
    let m = a[0].len();
    let eta = m - 1;
    (0..n)
        .map(|i| {
            if a[i][eta] {
                return false;
            }
            let scores: Vec<(usize, f64)> = (0..m)
                .filter(|&x| !a[i][x])
                .map(|x| {
                    let mut w = 0.0;
                    for j in 0..n {
                        if j != i && a[j][x] {
                            w += sim[i][j];
                        }
                    }
                    (x, w)
                })
                .collect();
            target_in_full_list(&scores, eta, l)
        })
        .collect()
}

/// Sorted multiset of a degree sequence.
pub fn multiset(degrees: &[u32]) -> Vec<u32> {
    let mut d = degrees.to_vec();
    d.sort_unstable();
    d
}
