//! Structural statistics: summary scalars, degree distributions with
//! power-law exponent fits, and nearest-neighbor degree curves.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{BipartiteNetwork, Side};

/// Minimum number of tail observations accepted by the exponent estimators.
pub const MIN_TAIL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub users: usize,
    pub items: usize,
    pub links: usize,
    pub mean_user_degree: f64,
    pub mean_item_degree: f64,
    /// `links / (users * items)`.
    pub sparsity: f64,
}

impl NetworkSummary {
    pub fn from_counts(users: usize, items: usize, links: usize) -> Self {
        NetworkSummary {
            users,
            items,
            links,
            mean_user_degree: links as f64 / users as f64,
            mean_item_degree: links as f64 / items as f64,
            sparsity: links as f64 / (users as f64 * items as f64),
        }
    }
}

pub fn summarize(network: &BipartiteNetwork) -> NetworkSummary {
    NetworkSummary::from_counts(network.user_count(), network.item_count(), network.link_count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub k_min: u32,
    /// Observations at or above `k_min` used by the fit.
    pub tail_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeBin {
    pub k: u32,
    pub count: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeDistribution {
    pub side: Side,
    /// Ascending in `k`; only degrees that occur are listed.
    pub bins: Vec<DegreeBin>,
    pub fit: Option<PowerLawFit>,
}

impl DegreeDistribution {
    pub fn from_sequence(side: Side, degrees: &[u32]) -> Self {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &k in degrees {
            *counts.entry(k).or_default() += 1;
        }
        let total = degrees.len() as f64;
        let bins = counts
            .into_iter()
            .map(|(k, count)| DegreeBin {
                k,
                count,
                probability: count as f64 / total,
            })
            .collect();
        DegreeDistribution { side, bins, fit: None }
    }

    /// Attaches an exact discrete MLE fit when the tail is large enough.
    pub fn with_fit(mut self, degrees: &[u32], k_min: u32) -> Self {
        self.fit = powerlaw_exponent_mle(degrees, k_min).ok().map(|exponent| PowerLawFit {
            exponent,
            k_min,
            tail_size: degrees.iter().filter(|&&k| k >= k_min).count(),
        });
        self
    }

    /// CSV with header `k,value,count`, value being `P(k)`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,value,count")?;
        for bin in &self.bins {
            writeln!(out, "{},{},{}", bin.k, bin.probability, bin.count)?;
        }
        out.flush()
    }
}

pub fn degree_distribution(network: &BipartiteNetwork, side: Side) -> DegreeDistribution {
    DegreeDistribution::from_sequence(side, network.degrees(side))
}

fn tail(degrees: &[u32], k_min: u32) -> Result<Vec<u32>> {
    if k_min < 1 {
        return Err(Error::InvalidParameter("k_min must be at least 1".into()));
    }
    let tail: Vec<u32> = degrees.iter().copied().filter(|&k| k >= k_min).collect();
    if tail.len() < MIN_TAIL {
        return Err(Error::InsufficientTail {
            found: tail.len(),
            required: MIN_TAIL,
        });
    }
    if tail.iter().all(|&k| k == k_min) {
        return Err(Error::DegenerateSample);
    }
    Ok(tail)
}

/// Closed-form discrete power-law estimate
/// `1 + N / sum(ln(k / (k_min - 0.5)))` over observations `k >= k_min`.
///
/// Cheap, but noticeably biased for `k_min` below about 6; prefer
/// [`powerlaw_exponent_mle`] for degree data that starts at 1.
pub fn powerlaw_exponent_approx(degrees: &[u32], k_min: u32) -> Result<f64> {
    let tail = tail(degrees, k_min)?;
    let shift = k_min as f64 - 0.5;
    let log_sum: f64 = tail.iter().map(|&k| (k as f64 / shift).ln()).sum();
    Ok(1.0 + tail.len() as f64 / log_sum)
}

/// Exact maximum-likelihood exponent of the discrete power law
/// `P(k) = k^-g / zeta(g, k_min)` for observations `k >= k_min`.
///
/// The log-likelihood is concave in `g`, so a golden-section search over
/// `(1, 50]` finds the unique maximum.
pub fn powerlaw_exponent_mle(degrees: &[u32], k_min: u32) -> Result<f64> {
    let tail = tail(degrees, k_min)?;
    let count = tail.len() as f64;
    let log_sum: f64 = tail.iter().map(|&k| (k as f64).ln()).sum();
    let q = k_min as f64;
    let neg_log_likelihood = |g: f64| g * log_sum + count * hurwitz_zeta(g, q).ln();

    let (mut lo, mut hi) = (1.0 + 1e-9, 50.0);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (neg_log_likelihood(a), neg_log_likelihood(b));
    while hi - lo > 1e-10 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = neg_log_likelihood(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = neg_log_likelihood(b);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Hurwitz zeta `sum_{j>=0} (q + j)^-s` for `s > 1`, `q > 0`: a direct sum
/// followed by an Euler-Maclaurin tail.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const DIRECT: usize = 24;
    let mut sum = 0.0;
    for j in 0..DIRECT {
        sum += (q + j as f64).powf(-s);
    }
    let x = q + DIRECT as f64;
    let xs = x.powf(-s);
    sum += x * xs / (s - 1.0);
    sum += xs / 2.0;
    sum += s * xs / x / 12.0;
    sum -= s * (s + 1.0) * (s + 2.0) * xs / x.powi(3) / 720.0;
    sum += s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * xs / x.powi(5) / 30240.0;
    sum
}

/// Mean degree of the neighbors of `node` on `side`.
pub fn nn_degree(network: &BipartiteNetwork, side: Side, node: u32) -> f64 {
    let far = network.degrees(side.opposite());
    let neighbors = network.neighbors(side, node);
    let total: u64 = neighbors.iter().map(|&v| far[v as usize] as u64).sum();
    total as f64 / neighbors.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KnnPoint {
    pub k: u32,
    /// Mean of `d_nn` over nodes of degree `k`.
    pub value: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssortativityProfile {
    pub side: Side,
    pub curve: Vec<KnnPoint>,
    /// `d_nn` for every node on `side`, by dense index.
    pub per_node: Vec<f64>,
    /// Pearson correlation of endpoint degrees over edges; `None` when either
    /// endpoint degree has zero variance.
    pub correlation: Option<f64>,
}

impl AssortativityProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,value,count")?;
        for p in &self.curve {
            writeln!(out, "{},{},{}", p.k, p.value, p.count)?;
        }
        out.flush()
    }
}

pub fn knn_by_degree(network: &BipartiteNetwork, side: Side) -> AssortativityProfile {
    let count = network.count(side);
    let per_node: Vec<f64> = (0..count as u32).map(|v| nn_degree(network, side, v)).collect();
    let degrees = network.degrees(side);
    let mut groups: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (v, &d) in per_node.iter().enumerate() {
        let entry = groups.entry(degrees[v]).or_default();
        entry.0 += d;
        entry.1 += 1;
    }
    let curve = groups
        .into_iter()
        .map(|(k, (sum, count))| KnnPoint {
            k,
            value: sum / count as f64,
            count,
        })
        .collect();
    AssortativityProfile {
        side,
        curve,
        per_node,
        correlation: degree_correlation(network),
    }
}

/// Pearson correlation between user degree and item degree across edges.
pub fn degree_correlation(network: &BipartiteNetwork) -> Option<f64> {
    let w = network.link_count() as f64;
    let ku = network.degrees(Side::User);
    let ki = network.degrees(Side::Item);
    let (mut su, mut si, mut suu, mut sii, mut sui) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (u, i) in network.edges() {
        let a = ku[u as usize] as f64;
        let b = ki[i as usize] as f64;
        su += a;
        si += b;
        suu += a * a;
        sii += b * b;
        sui += a * b;
    }
    let var_u = suu / w - (su / w).powi(2);
    let var_i = sii / w - (si / w).powi(2);
    let scale_u = suu / w;
    let scale_i = sii / w;
    if var_u <= 1e-12 * scale_u || var_i <= 1e-12 * scale_i {
        return None;
    }
    Some((sui / w - (su / w) * (si / w)) / (var_u * var_i).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::five_edge;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Inverse-CDF sampler over `[k_min, k_max]`, kept separate from the
    /// generator module so the estimator is checked against an independent source.
    fn planted(count: usize, exponent: f64, k_min: u32, k_max: u32, seed: u64) -> Vec<u32> {
        let weights: Vec<f64> = (k_min..=k_max).map(|k| (k as f64).powf(-exponent)).collect();
        let total: f64 = weights.iter().sum();
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w / total;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let u: f64 = rng.gen();
                let pos = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                k_min + pos as u32
            })
            .collect()
    }

    #[test]
    fn table_one_scalars() {
        let tm = NetworkSummary::from_counts(103_867, 83_342, 113_624);
        assert_eq!(format!("{:.2}", tm.mean_user_degree), "1.09");
        assert_eq!(format!("{:.2}", tm.mean_item_degree), "1.36");
        assert_eq!(format!("{:.2e}", tm.sparsity), "1.31e-5");
        let coo8 = NetworkSummary::from_counts(77_947, 18_751, 94_457);
        assert_eq!(format!("{:.2}", coo8.mean_user_degree), "1.21");
        assert_eq!(format!("{:.2}", coo8.mean_item_degree), "5.04");
        assert_eq!(format!("{:.2e}", coo8.sparsity), "6.46e-5");
    }

    #[test]
    fn complete_bipartite_is_dense() {
        let edges = (0..3).flat_map(|u| (0..4).map(move |i| (u, i)));
        let net = BipartiteNetwork::from_index_edges(3, 4, edges).unwrap();
        let s = summarize(&net);
        assert_eq!(s.sparsity, 1.0);
        assert!((s.sparsity - s.mean_user_degree / 4.0).abs() < 1e-15);
        let profile = knn_by_degree(&net, Side::User);
        assert_eq!(profile.curve.len(), 1);
        assert_eq!(profile.curve[0].value, 3.0);
        assert_eq!(profile.correlation, None);
    }

    #[test]
    fn five_edge_user_distribution() {
        let dist = degree_distribution(&five_edge(), Side::User);
        assert_eq!(dist.bins.len(), 2);
        assert_eq!((dist.bins[0].k, dist.bins[0].probability), (1, 1.0 / 3.0));
        assert_eq!((dist.bins[1].k, dist.bins[1].probability), (2, 2.0 / 3.0));
    }

    #[test]
    fn planted_histogram_is_reproduced() {
        let seq = planted(5000, 2.2, 1, 200, 3);
        let dist = DegreeDistribution::from_sequence(Side::Item, &seq);
        let mut hist = std::collections::HashMap::new();
        for &k in &seq {
            *hist.entry(k).or_insert(0usize) += 1;
        }
        assert_eq!(dist.bins.len(), hist.len());
        for bin in &dist.bins {
            assert_eq!(bin.count, hist[&bin.k]);
        }
        let total: f64 = dist.bins.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn approx_estimator_closed_form() {
        let expected = 1.0 + 5.0 / (3.0 * 2f64.ln() + 4f64.ln() + 8f64.ln());
        // The five-point sample repeated twice has the same estimate and
        // clears the minimum tail size.
        let seq: Vec<u32> = [1, 1, 1, 2, 4].repeat(2);
        let got = powerlaw_exponent_approx(&seq, 1).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn degenerate_and_short_samples() {
        assert!(matches!(powerlaw_exponent_mle(&[3; 20], 3), Err(Error::DegenerateSample)));
        assert!(matches!(powerlaw_exponent_approx(&[1; 20], 1), Err(Error::DegenerateSample)));
        assert!(matches!(
            powerlaw_exponent_mle(&[1, 2, 3], 1),
            Err(Error::InsufficientTail { found: 3, .. })
        ));
    }

    #[test]
    fn hurwitz_zeta_known_values() {
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((hurwitz_zeta(2.0, 1.0) - zeta2).abs() < 1e-12);
        assert!((hurwitz_zeta(2.0, 3.0) - (zeta2 - 1.0 - 0.25)).abs() < 1e-12);
        // zeta(1.5) = 2.612375348685488...
        assert!((hurwitz_zeta(1.5, 1.0) - 2.612_375_348_685_488).abs() < 1e-11);
    }

    #[test]
    fn mle_bias_shrinks_with_sample_size() {
        for (count, tol) in [(10_000, 0.06), (100_000, 0.02)] {
            let seq = planted(count, 2.5, 1, 1000, 11);
            let est = powerlaw_exponent_mle(&seq, 1).unwrap();
            assert!((est - 2.5).abs() < tol, "n={count}: {est}");
        }
    }

    #[test]
    fn mle_with_larger_k_min() {
        let seq = planted(50_000, 2.2, 1, 1000, 5);
        let est = powerlaw_exponent_mle(&seq, 4).unwrap();
        assert!((est - 2.2).abs() < 0.05, "{est}");
    }

    #[test]
    fn nn_degree_examples() {
        let net = five_edge();
        assert_eq!(nn_degree(&net, Side::User, 2), 2.0);
        let star = BipartiteNetwork::from_index_edges(1, 5, (0..5).map(|i| (0, i))).unwrap();
        assert_eq!(nn_degree(&star, Side::User, 0), 1.0);
        // three neighbors with degrees 5, 3, 2
        let mut edges = vec![(0, 0), (0, 1), (0, 2)];
        edges.extend((1..5).map(|u| (u, 0)));
        edges.extend((1..3).map(|u| (u, 1)));
        edges.push((1, 2));
        let net = BipartiteNetwork::from_index_edges(5, 3, edges).unwrap();
        assert_eq!(nn_degree(&net, Side::User, 0), 10.0 / 3.0);
    }

    #[test]
    fn five_edge_knn_curve() {
        let profile = knn_by_degree(&five_edge(), Side::User);
        let pts: Vec<(u32, f64, usize)> = profile.curve.iter().map(|p| (p.k, p.value, p.count)).collect();
        assert_eq!(pts, vec![(1, 2.0, 1), (2, 1.75, 2)]);
    }

    #[test]
    fn curve_is_consistent_with_edges() {
        let seq_u = planted(300, 2.5, 1, 40, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut edges = Vec::new();
        for (u, &k) in seq_u.iter().enumerate() {
            for _ in 0..k {
                edges.push((u as u32, rng.gen_range(0..200)));
            }
        }
        // guarantee every item is covered
        edges.extend((0..200).map(|i| (rng.gen_range(0..300), i)));
        let net = BipartiteNetwork::from_index_edges(300, 200, edges).unwrap();
        for side in [Side::User, Side::Item] {
            let profile = knn_by_degree(&net, side);
            let lhs: f64 = profile.curve.iter().map(|p| p.value * p.k as f64 * p.count as f64).sum();
            let far = net.degrees(side.opposite());
            let rhs: u64 = net
                .edges()
                .map(|(u, i)| match side {
                    Side::User => far[i as usize] as u64,
                    Side::Item => far[u as usize] as u64,
                })
                .sum();
            assert!((lhs - rhs as f64).abs() < 1e-6 * rhs as f64);
            let near = net.degrees(side.opposite());
            let (lo, hi) = (*near.iter().min().unwrap() as f64, *near.iter().max().unwrap() as f64);
            assert!(profile.per_node.iter().all(|&d| d >= lo && d <= hi));
        }
    }
}
