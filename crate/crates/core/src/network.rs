//! Binary user-item purchase network.
//!
//! Users and items are addressed by dense `u32` indices. Both adjacency
//! directions are stored in compressed sparse row form with each row sorted
//! ascending, so neighbor lists can be intersected by merging and membership
//! checked by binary search.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::User => Side::Item,
            Side::Item => Side::User,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One direction of the adjacency relation in CSR layout.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    degrees: Vec<u32>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut targets = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        let mut degrees = Vec::with_capacity(rows.len());
        offsets.push(0);
        for row in rows {
            degrees.push(row.len() as u32);
            targets.extend(row);
            offsets.push(targets.len());
        }
        Csr {
            offsets,
            targets,
            degrees,
        }
    }

    #[inline]
    fn row(&self, idx: usize) -> &[u32] {
        &self.targets[self.offsets[idx]..self.offsets[idx + 1]]
    }

    fn len(&self) -> usize {
        self.degrees.len()
    }
}

/// Immutable bipartite purchase graph.
///
/// Equality compares adjacency and external identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteNetwork {
    users: Csr,
    items: Csr,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

/// Result of parsing an edge list.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub network: BipartiteNetwork,
    /// Repeated `(user, item)` lines that were collapsed into one edge.
    pub duplicates: usize,
}

impl BipartiteNetwork {
    /// Builds a network from dense-index edges. Duplicate edges are collapsed
    /// and their number returned alongside the network.
    ///
    /// Every index in `0..user_ids.len()` and `0..item_ids.len()` must carry at
    /// least one edge.
    pub fn from_edges<I>(user_ids: Vec<String>, item_ids: Vec<String>, edges: I) -> Result<(Self, usize)>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let n = user_ids.len();
        let m = item_ids.len();
        let mut user_rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, i) in edges {
            if u as usize >= n || i as usize >= m {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {i}) out of range for {n} users and {m} items"
                )));
            }
            user_rows[u as usize].push(i);
        }
        let mut duplicates = 0;
        for row in &mut user_rows {
            row.sort_unstable();
            let before = row.len();
            row.dedup();
            duplicates += before - row.len();
        }
        if user_rows.iter().all(Vec::is_empty) {
            return Err(Error::EmptyNetwork);
        }
        if let Some(u) = user_rows.iter().position(Vec::is_empty) {
            return Err(Error::InvalidParameter(format!("user {u} has no edges")));
        }
        let item_rows = transpose(&user_rows, m);
        if let Some(i) = item_rows.iter().position(Vec::is_empty) {
            return Err(Error::InvalidParameter(format!("item {i} has no edges")));
        }
        Ok((
            BipartiteNetwork {
                users: Csr::from_rows(user_rows),
                items: Csr::from_rows(item_rows),
                user_ids,
                item_ids,
            },
            duplicates,
        ))
    }

    /// Builds a network from dense-index edges with identifiers `u<idx>` and `o<idx>`.
    pub fn from_index_edges<I>(user_count: usize, item_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let user_ids = (0..user_count).map(|u| format!("u{u}")).collect();
        let item_ids = (0..item_count).map(|i| format!("o{i}")).collect();
        Self::from_edges(user_ids, item_ids, edges).map(|(net, _)| net)
    }

    /// Assembles a network from both adjacency views without any checking.
    ///
    /// Rows are stored as given; use [`BipartiteNetwork::validate`] to find out
    /// whether they describe a consistent simple graph.
    pub fn from_adjacency_unchecked(user_rows: Vec<Vec<u32>>, item_rows: Vec<Vec<u32>>) -> Self {
        let user_ids = (0..user_rows.len()).map(|u| format!("u{u}")).collect();
        let item_ids = (0..item_rows.len()).map(|i| format!("o{i}")).collect();
        BipartiteNetwork {
            users: Csr::from_rows(user_rows),
            items: Csr::from_rows(item_rows),
            user_ids,
            item_ids,
        }
    }

    /// Parses a whitespace-separated `user_id item_id` edge list.
    ///
    /// Dense indices follow the order of first appearance on each side. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn ingest<R: BufRead>(reader: R) -> Result<Ingested> {
        let mut users = IdInterner::default();
        let mut items = IdInterner::default();
        let edges = parse_edges(reader, &mut users, &mut items, false)?;
        Self::finish_ingest(users, items, edges)
    }

    /// Parses an edge list using previously written mapping files, so that the
    /// dense indices of the original network are reproduced exactly.
    pub fn ingest_with_mapping<R, U, I>(reader: R, user_map: U, item_map: I) -> Result<Ingested>
    where
        R: BufRead,
        U: BufRead,
        I: BufRead,
    {
        let mut users = IdInterner::from_mapping(user_map)?;
        let mut items = IdInterner::from_mapping(item_map)?;
        let edges = parse_edges(reader, &mut users, &mut items, true)?;
        Self::finish_ingest(users, items, edges)
    }

    fn finish_ingest(users: IdInterner, items: IdInterner, edges: Vec<(u32, u32)>) -> Result<Ingested> {
        if edges.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        let (network, duplicates) = Self::from_edges(users.ids, items.ids, edges)?;
        if duplicates > 0 {
            log::warn!("collapsed {duplicates} duplicate edges");
        }
        Ok(Ingested {
            network,
            duplicates,
        })
    }

    /// Writes one `user_id<TAB>item_id` line per edge, ordered by
    /// `(user index, item index)`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for u in 0..self.user_count() {
            let uid = &self.user_ids[u];
            for &i in self.items_of(u as u32) {
                writeln!(out, "{}\t{}", uid, self.item_ids[i as usize])?;
            }
        }
        out.flush()
    }

    /// Writes `dense_index<TAB>external_id` lines for one side.
    pub fn write_mapping<W: Write>(&self, side: Side, mut out: W) -> std::io::Result<()> {
        for (idx, id) in self.ids(side).iter().enumerate() {
            writeln!(out, "{idx}\t{id}")?;
        }
        out.flush()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn link_count(&self) -> usize {
        self.users.targets.len()
    }

    pub fn count(&self, side: Side) -> usize {
        match side {
            Side::User => self.user_count(),
            Side::Item => self.item_count(),
        }
    }

    /// Sorted items purchased by `user`.
    #[inline]
    pub fn items_of(&self, user: u32) -> &[u32] {
        self.users.row(user as usize)
    }

    /// Sorted users who purchased `item`.
    #[inline]
    pub fn users_of(&self, item: u32) -> &[u32] {
        self.items.row(item as usize)
    }

    #[inline]
    pub fn neighbors(&self, side: Side, node: u32) -> &[u32] {
        match side {
            Side::User => self.items_of(node),
            Side::Item => self.users_of(node),
        }
    }

    #[inline]
    pub fn user_degree(&self, user: u32) -> u32 {
        self.users.degrees[user as usize]
    }

    #[inline]
    pub fn item_degree(&self, item: u32) -> u32 {
        self.items.degrees[item as usize]
    }

    /// Degree sequence of one side, indexed by dense node index.
    pub fn degrees(&self, side: Side) -> &[u32] {
        match side {
            Side::User => &self.users.degrees,
            Side::Item => &self.items.degrees,
        }
    }

    pub fn has_edge(&self, user: u32, item: u32) -> bool {
        self.items_of(user).binary_search(&item).is_ok()
    }

    /// All edges as `(user, item)` pairs, ordered by user then item.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.user_count() as u32).flat_map(move |u| self.items_of(u).iter().map(move |&i| (u, i)))
    }

    pub fn ids(&self, side: Side) -> &[String] {
        match side {
            Side::User => &self.user_ids,
            Side::Item => &self.item_ids,
        }
    }

    /// Same external identifiers, different edge set. Used by rewiring code.
    pub(crate) fn with_same_ids<I>(&self, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        Self::from_edges(self.user_ids.clone(), self.item_ids.clone(), edges).map(|(net, _)| net)
    }

    /// Checks every structural invariant and reports offenders.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.user_count();
        let m = self.item_count();

        let user_sum: u64 = self.users.degrees.iter().map(|&d| d as u64).sum();
        let item_sum: u64 = self.items.degrees.iter().map(|&d| d as u64).sum();
        if user_sum != item_sum {
            report.degree_sum = Some((user_sum, item_sum));
        }

        for (side, csr, bound) in [(Side::User, &self.users, m), (Side::Item, &self.items, n)] {
            for idx in 0..csr.len() {
                let row = csr.row(idx);
                if row.is_empty() {
                    report.isolated.push((side, idx as u32));
                }
                if row.windows(2).any(|w| w[0] >= w[1]) {
                    report.unsorted_or_duplicate.push((side, idx as u32));
                }
                if row.iter().any(|&t| t as usize >= bound) {
                    report.out_of_range.push((side, idx as u32));
                }
            }
        }

        for u in 0..n {
            for &i in self.users.row(u) {
                if (i as usize) < m && self.items.row(i as usize).binary_search(&(u as u32)).is_err() {
                    report.transpose_mismatch.push((u as u32, i));
                }
            }
        }
        for i in 0..m {
            for &u in self.items.row(i) {
                if (u as usize) < n && self.users.row(u as usize).binary_search(&(i as u32)).is_err() {
                    report.transpose_mismatch.push((u, i as u32));
                }
            }
        }
        report.transpose_mismatch.sort_unstable();
        report.transpose_mismatch.dedup();
        report
    }
}

/// Outcome of [`BipartiteNetwork::validate`]. Empty lists mean the check passed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// `(sum of user degrees, sum of item degrees)` when they differ.
    pub degree_sum: Option<(u64, u64)>,
    /// `(user, item)` pairs present in one adjacency view but not the other.
    pub transpose_mismatch: Vec<(u32, u32)>,
    pub isolated: Vec<(Side, u32)>,
    pub unsorted_or_duplicate: Vec<(Side, u32)>,
    pub out_of_range: Vec<(Side, u32)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.degree_sum.is_none()
            && self.transpose_mismatch.is_empty()
            && self.isolated.is_empty()
            && self.unsorted_or_duplicate.is_empty()
            && self.out_of_range.is_empty()
    }

    pub fn degree_sums_ok(&self) -> bool {
        self.degree_sum.is_none()
    }

    pub fn transpose_ok(&self) -> bool {
        self.transpose_mismatch.is_empty()
    }

    pub fn min_degree_ok(&self) -> bool {
        self.isolated.is_empty()
    }

    pub fn simple_sorted_ok(&self) -> bool {
        self.unsorted_or_duplicate.is_empty() && self.out_of_range.is_empty()
    }
}

fn transpose(rows: &[Vec<u32>], width: usize) -> Vec<Vec<u32>> {
    let mut counts = vec![0usize; width];
    for row in rows {
        for &t in row {
            counts[t as usize] += 1;
        }
    }
    let mut out: Vec<Vec<u32>> = counts.into_iter().map(Vec::with_capacity).collect();
    // Rows are visited in ascending order, so each output row comes out sorted.
    for (src, row) in rows.iter().enumerate() {
        for &t in row {
            out[t as usize].push(src as u32);
        }
    }
    out
}

#[derive(Default)]
struct IdInterner {
    index: HashMap<String, u32>,
    ids: Vec<String>,
}

impl IdInterner {
    fn intern(&mut self, id: &str) -> u32 {
        if let Some(&idx) = self.index.get(id) {
            return idx;
        }
        let idx = self.ids.len() as u32;
        self.index.insert(id.to_owned(), idx);
        self.ids.push(id.to_owned());
        idx
    }

    fn from_mapping<R: BufRead>(reader: R) -> Result<Self> {
        let mut interner = IdInterner::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let (Some(idx), Some(id), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::MalformedLine {
                    line: lineno + 1,
                    content: line.clone(),
                });
            };
            let idx: usize = idx.parse().map_err(|_| Error::MalformedLine {
                line: lineno + 1,
                content: line.clone(),
            })?;
            if idx != interner.ids.len() || interner.index.contains_key(id) {
                return Err(Error::MalformedLine {
                    line: lineno + 1,
                    content: line.clone(),
                });
            }
            interner.intern(id);
        }
        Ok(interner)
    }
}

fn parse_edges<R: BufRead>(
    reader: R,
    users: &mut IdInterner,
    items: &mut IdInterner,
    closed: bool,
) -> Result<Vec<(u32, u32)>> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (Some(user), Some(item), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::MalformedLine {
                line: lineno + 1,
                content: line.clone(),
            });
        };
        if closed && (!users.index.contains_key(user) || !items.index.contains_key(item)) {
            return Err(Error::MalformedLine {
                line: lineno + 1,
                content: line.clone(),
            });
        }
        edges.push((users.intern(user), items.intern(item)));
    }
    Ok(edges)
}
