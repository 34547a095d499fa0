//! Distance matrix, neighbor-joining guide tree, progressive multiple
//! alignment and guide-tree cluster extraction.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::align::{fractional_identity, global_align, profile_align, Profile, ScoringScheme};
use crate::scalar::Real;
use crate::seqio::{is_residue, write_fasta_entry, SeqError, SeqRecord};

#[derive(Debug, thiserror::Error)]
pub enum MsaError {
    #[error("need at least 2 sequences, got {0}")]
    TooFewSequences(usize),
    #[error("guide tree leaves do not match the sequence ids")]
    LeafMismatch,
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("aligned rows have unequal lengths")]
    RaggedRows,
    #[error("alignment has no columns")]
    EmptyAlignment,
    #[error("invalid symbol {symbol:?} in aligned row {id}")]
    InvalidSymbol { id: String, symbol: char },
    #[error("malformed guide tree: {0}")]
    InvalidTree(&'static str),
    #[error("invalid cluster bounds {min}..={max}")]
    InvalidClusterBounds { min: usize, max: usize },
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Symmetric pairwise distances in [0, 1] with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix<T> {
    ids: Vec<String>,
    d: Vec<T>,
}

impl<T: Real> DistanceMatrix<T> {
    /// Builds from a full row-major matrix; checks shape, symmetry and the
    /// zero diagonal. Additive test matrices may exceed 1, so only
    /// non-negativity is enforced here.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<T>>) -> Option<Self> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return None;
        }
        for i in 0..n {
            if rows[i][i] != T::zero() {
                return None;
            }
            for j in 0..n {
                if rows[i][j] != rows[j][i] || rows[i][j] < T::zero() {
                    return None;
                }
            }
        }
        Some(Self {
            ids,
            d: rows.into_iter().flatten().collect(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.d[i * self.ids.len() + j]
    }
}

/// `d = 1 - fractional identity` of the global alignment of each pair.
pub fn distance_matrix<T: Real>(
    seqs: &[SeqRecord],
    scheme: &ScoringScheme,
) -> Result<DistanceMatrix<T>, MsaError> {
    let n = seqs.len();
    if n < 2 {
        return Err(MsaError::TooFewSequences(n));
    }
    check_unique(seqs.iter().map(|s| s.id.as_str()))?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let dist: Vec<T> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let al = global_align(&seqs[i].residues, &seqs[j].residues, scheme);
            // global alignments of non-empty sequences are never empty
            T::one() - fractional_identity::<T>(&al).unwrap_or(T::zero())
        })
        .collect();
    let mut d = vec![T::zero(); n * n];
    for (&(i, j), &v) in pairs.iter().zip(&dist) {
        d[i * n + j] = v;
        d[j * n + i] = v;
    }
    Ok(DistanceMatrix {
        ids: seqs.iter().map(|s| s.id.clone()).collect(),
        d,
    })
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), MsaError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(MsaError::DuplicateId(id.to_owned()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TreeNode<T> {
    Leaf {
        id: String,
    },
    /// Two children with the branch lengths leading to them.
    Internal {
        children: [(usize, T); 2],
    },
}

/// Rooted binary guide tree stored as an arena.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuideTree<T> {
    nodes: Vec<TreeNode<T>>,
    root: usize,
}

impl<T: Real> GuideTree<T> {
    /// Assembles a tree from an arena. Every node other than `root` must be
    /// the child of exactly one internal node, leaf ids must be unique and
    /// branch lengths non-negative.
    pub fn from_nodes(nodes: Vec<TreeNode<T>>, root: usize) -> Result<Self, MsaError> {
        if root >= nodes.len() {
            return Err(MsaError::InvalidTree("root out of range"));
        }
        let mut parent_count = vec![0usize; nodes.len()];
        for n in &nodes {
            if let TreeNode::Internal { children } = n {
                for &(c, len) in children {
                    if c >= nodes.len() {
                        return Err(MsaError::InvalidTree("child out of range"));
                    }
                    if !(len >= T::zero()) {
                        return Err(MsaError::InvalidTree("negative branch length"));
                    }
                    parent_count[c] += 1;
                }
            }
        }
        let shape_ok = parent_count
            .iter()
            .enumerate()
            .all(|(i, &c)| if i == root { c == 0 } else { c == 1 });
        if !shape_ok {
            return Err(MsaError::InvalidTree(
                "every non-root node needs exactly one parent",
            ));
        }
        let tree = Self { nodes, root };
        // with one parent per node, reaching every node from the root rules out cycles
        let mut seen = vec![false; tree.nodes.len()];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                return Err(MsaError::InvalidTree("cycle"));
            }
            if let TreeNode::Internal { children } = &tree.nodes[v] {
                stack.extend(children.iter().map(|c| c.0));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(MsaError::InvalidTree("unreachable nodes"));
        }
        check_unique(tree.leaves().into_iter())?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &TreeNode<T> {
        &self.nodes[i]
    }

    /// Leaf ids under `node`, left to right.
    pub fn leaves_under(&self, node: usize) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match &self.nodes[v] {
                TreeNode::Leaf { id } => out.push(id.as_str()),
                TreeNode::Internal { children } => {
                    stack.push(children[1].0);
                    stack.push(children[0].0);
                }
            }
        }
        out
    }

    pub fn leaves(&self) -> Vec<&str> {
        self.leaves_under(self.root)
    }

    pub fn leaf_count(&self, node: usize) -> usize {
        self.leaves_under(node).len()
    }

    /// Path length between two leaves.
    pub fn path_length(&self, a: &str, b: &str) -> Option<T> {
        let depth = self.root_distances();
        let parents = self.parents();
        let find = |id: &str| {
            self.nodes
                .iter()
                .position(|n| matches!(n, TreeNode::Leaf { id: x } if x == id))
        };
        let (ia, ib) = (find(a)?, find(b)?);
        let mut ancestors = HashSet::new();
        let mut v = Some(ia);
        while let Some(x) = v {
            ancestors.insert(x);
            v = parents[x];
        }
        let mut v = ib;
        while !ancestors.contains(&v) {
            v = parents[v]?;
        }
        Some(depth[ia] + depth[ib] - depth[v] - depth[v])
    }

    fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let TreeNode::Internal { children } = n {
                p[children[0].0] = Some(i);
                p[children[1].0] = Some(i);
            }
        }
        p
    }

    fn root_distances(&self) -> Vec<T> {
        let mut depth = vec![T::zero(); self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if let TreeNode::Internal { children } = &self.nodes[v] {
                for &(c, len) in children {
                    depth[c] = depth[v] + len;
                    stack.push(c);
                }
            }
        }
        depth
    }

    /// Leaf bipartitions induced by each internal edge, each given as the
    /// sorted side not containing the first leaf (sorted by name).
    pub fn splits(&self) -> HashSet<Vec<String>> {
        let mut all: Vec<String> = self.leaves().iter().map(|s| s.to_string()).collect();
        all.sort();
        let anchor = all[0].clone();
        let mut out = HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if i == self.root || matches!(n, TreeNode::Leaf { .. }) {
                continue;
            }
            let mut side: Vec<String> =
                self.leaves_under(i).iter().map(|s| s.to_string()).collect();
            if side.len() < 2 || side.len() > all.len() - 2 {
                continue;
            }
            if side.contains(&anchor) {
                side = all.iter().filter(|x| !side.contains(x)).cloned().collect();
            }
            side.sort();
            out.insert(side);
        }
        out
    }

    /// Newick with branch lengths at 6 decimals.
    pub fn to_newick(&self) -> String {
        let mut s = String::new();
        self.newick_node(self.root, &mut s);
        s.push(';');
        s
    }

    fn newick_node(&self, v: usize, out: &mut String) {
        match &self.nodes[v] {
            TreeNode::Leaf { id } => out.push_str(id),
            TreeNode::Internal { children } => {
                out.push('(');
                for (k, &(c, len)) in children.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    self.newick_node(c, out);
                    let _ = write!(out, ":{:.6}", len.to_f64().unwrap_or(f64::NAN));
                }
                out.push(')');
            }
        }
    }
}

/// Neighbor joining with the standard Q criterion. Ties go to the pair
/// with the smallest indices; negative branch lengths are clamped to zero
/// with the remainder moved to the sibling. The last two clusters are
/// joined at the root: a leaf facing an internal node takes the whole
/// remaining distance, otherwise it is split evenly.
pub fn build_guide_tree<T: Real>(dm: &DistanceMatrix<T>) -> Result<GuideTree<T>, MsaError> {
    let n = dm.len();
    if n < 2 {
        return Err(MsaError::TooFewSequences(n));
    }
    let total = 2 * n - 1;
    let mut nodes: Vec<TreeNode<T>> = dm
        .ids()
        .iter()
        .map(|id| TreeNode::Leaf { id: id.clone() })
        .collect();
    let mut d = vec![T::zero(); total * total];
    for i in 0..n {
        for j in 0..n {
            d[i * total + j] = dm.get(i, j);
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let two = T::lit(2.0);

    while active.len() > 2 {
        let k = active.len();
        let kk = T::from_count(k - 2);
        let r: Vec<T> = active
            .iter()
            .map(|&i| active.iter().map(|&j| d[i * total + j]).sum())
            .collect();
        let mut best: Option<(T, usize, usize)> = None;
        for p in 0..k {
            for q in p + 1..k {
                let val = kk * d[active[p] * total + active[q]] - r[p] - r[q];
                if best.is_none_or(|(b, _, _)| val < b) {
                    best = Some((val, p, q));
                }
            }
        }
        let (_, p, q) = best.expect("at least one pair");
        let (a, b) = (active[p], active[q]);
        let dab = d[a * total + b];
        let mut la = dab / two + (r[p] - r[q]) / (two * kk);
        let mut lb = dab - la;
        if la < T::zero() {
            la = T::zero();
            lb = dab;
        } else if lb < T::zero() {
            lb = T::zero();
            la = dab;
        }
        let u = nodes.len();
        nodes.push(TreeNode::Internal {
            children: [(a, la), (b, lb)],
        });
        for &x in &active {
            if x != a && x != b {
                let v = (d[a * total + x] + d[b * total + x] - dab) / two;
                d[u * total + x] = v;
                d[x * total + u] = v;
            }
        }
        active.remove(q);
        active.remove(p);
        active.push(u);
    }

    let (x, y) = (active[0], active[1]);
    let dxy = d[x * total + y].max(T::zero());
    let is_leaf = |i: usize| matches!(nodes[i], TreeNode::Leaf { .. });
    let (lx, ly) = match (is_leaf(x), is_leaf(y)) {
        (true, false) => (dxy, T::zero()),
        (false, true) => (T::zero(), dxy),
        _ => (dxy / two, dxy / two),
    };
    let root = nodes.len();
    nodes.push(TreeNode::Internal {
        children: [(x, lx), (y, ly)],
    });
    Ok(GuideTree { nodes, root })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MsaRow {
    pub id: String,
    pub description: String,
    /// Gapped residues over `{A, C, G, U, N, -}`.
    pub gapped: Vec<u8>,
}

impl MsaRow {
    pub fn degapped(&self) -> Vec<u8> {
        self.gapped.iter().copied().filter(|&b| b != b'-').collect()
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.gapped).unwrap()
    }

    /// 1-based MSA column of each residue (residue position `p` maps to
    /// `columns[p - 1]`).
    pub fn residue_columns(&self) -> Vec<usize> {
        self.gapped
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != b'-')
            .map(|(c, _)| c + 1)
            .collect()
    }
}

/// A multiple alignment: equal-length rows, no all-gap column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Msa {
    rows: Vec<MsaRow>,
}

impl Msa {
    /// Validates rows and drops any all-gap columns.
    pub fn new(mut rows: Vec<MsaRow>) -> Result<Self, MsaError> {
        check_unique(rows.iter().map(|r| r.id.as_str()))?;
        let width = rows.first().map_or(0, |r| r.gapped.len());
        if rows.iter().any(|r| r.gapped.len() != width) {
            return Err(MsaError::RaggedRows);
        }
        for r in &rows {
            if let Some(&b) = r.gapped.iter().find(|&&b| b != b'-' && !is_residue(b)) {
                return Err(MsaError::InvalidSymbol {
                    id: r.id.clone(),
                    symbol: b as char,
                });
            }
        }
        let keep: Vec<bool> = (0..width)
            .map(|c| rows.iter().any(|r| r.gapped[c] != b'-'))
            .collect();
        if keep.iter().any(|k| !k) {
            for r in &mut rows {
                r.gapped = r
                    .gapped
                    .iter()
                    .zip(&keep)
                    .filter(|(_, &k)| k)
                    .map(|(&b, _)| b)
                    .collect();
            }
        }
        if rows.is_empty() || rows[0].gapped.is_empty() {
            return Err(MsaError::EmptyAlignment);
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[MsaRow] {
        &self.rows
    }

    pub fn row(&self, id: &str) -> Option<&MsaRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows[0].gapped.len()
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = u8> + '_ {
        self.rows.iter().map(move |r| r.gapped[c])
    }
}

/// Progressive alignment along the guide tree. Rows come out in the order
/// of `seqs`.
pub fn progressive_msa<T: Real>(
    seqs: &[SeqRecord],
    tree: &GuideTree<T>,
    scheme: &ScoringScheme,
) -> Result<Msa, MsaError> {
    check_unique(seqs.iter().map(|s| s.id.as_str()))?;
    let by_id: HashMap<&str, &SeqRecord> = seqs.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut leaves = tree.leaves();
    leaves.sort_unstable();
    let mut ids: Vec<&str> = by_id.keys().copied().collect();
    ids.sort_unstable();
    if leaves != ids {
        return Err(MsaError::LeafMismatch);
    }

    let profile = align_subtree::<T>(tree, tree.root(), &by_id, scheme);
    let mut gapped: HashMap<String, Vec<u8>> = profile.into_rows().into_iter().collect();
    let rows = seqs
        .iter()
        .map(|s| MsaRow {
            id: s.id.clone(),
            description: s.description.clone(),
            gapped: gapped.remove(&s.id).expect("every leaf aligned"),
        })
        .collect();
    Msa::new(rows)
}

fn align_subtree<T: Real>(
    tree: &GuideTree<T>,
    node: usize,
    seqs: &HashMap<&str, &SeqRecord>,
    scheme: &ScoringScheme,
) -> Profile<T> {
    match tree.node(node) {
        TreeNode::Leaf { id } => Profile::from_sequence(id, &seqs[id.as_str()].residues),
        TreeNode::Internal { children } => {
            let left = align_subtree(tree, children[0].0, seqs, scheme);
            let right = align_subtree(tree, children[1].0, seqs, scheme);
            profile_align(&left, &right, scheme).profile
        }
    }
}

/// Distance matrix, guide tree and progressive alignment in one call.
pub fn align_all<T: Real>(
    seqs: &[SeqRecord],
    scheme: &ScoringScheme,
) -> Result<(GuideTree<T>, Msa), MsaError> {
    let dm = distance_matrix::<T>(seqs, scheme)?;
    let tree = build_guide_tree(&dm)?;
    let msa = progressive_msa(seqs, &tree, scheme)?;
    Ok((tree, msa))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub ids: Vec<String>,
    /// Smaller than the minimum size and could not be merged.
    pub undersized: bool,
}

/// Cuts the guide tree into clusters of at most `max_size` leaves.
///
/// Descending from the root, every subtree with at most `max_size` leaves
/// becomes a cluster. At each split node, a child that became a single
/// cluster smaller than `min_size` is merged into the smallest cluster on
/// the other side when the result stays within `max_size`. Clusters still
/// below `min_size` are flagged.
pub fn extract_clusters<T: Real>(
    tree: &GuideTree<T>,
    min_size: usize,
    max_size: usize,
) -> Result<Vec<Cluster>, MsaError> {
    if min_size < 1 || min_size > max_size {
        return Err(MsaError::InvalidClusterBounds {
            min: min_size,
            max: max_size,
        });
    }
    let groups = cut(tree, tree.root(), min_size, max_size);
    Ok(groups
        .into_iter()
        .map(|ids| Cluster {
            undersized: ids.len() < min_size,
            ids,
        })
        .collect())
}

fn cut<T: Real>(tree: &GuideTree<T>, node: usize, min: usize, max: usize) -> Vec<Vec<String>> {
    let leaves = tree.leaves_under(node);
    if leaves.len() <= max {
        return vec![leaves.into_iter().map(str::to_owned).collect()];
    }
    let TreeNode::Internal { children } = tree.node(node) else {
        unreachable!("a leaf never exceeds max_size >= 1");
    };
    let mut left = cut(tree, children[0].0, min, max);
    let mut right = cut(tree, children[1].0, min, max);
    absorb_single(&mut left, &mut right, min, max, true);
    absorb_single(&mut right, &mut left, min, max, false);
    left.extend(right);
    left
}

/// Moves a lone undersized cluster of `from` into the smallest cluster of
/// `into`, keeping left-to-right leaf order.
fn absorb_single(
    from: &mut Vec<Vec<String>>,
    into: &mut [Vec<String>],
    min: usize,
    max: usize,
    from_is_left: bool,
) {
    if from.len() != 1 || from[0].len() >= min {
        return;
    }
    let Some(target) = into
        .iter()
        .enumerate()
        .min_by_key(|(i, c)| (c.len(), *i))
        .map(|(i, _)| i)
    else {
        return;
    };
    if from[0].len() + into[target].len() > max {
        return;
    }
    let moved = from.pop().expect("one cluster");
    if from_is_left {
        let mut merged = moved;
        merged.append(&mut into[target]);
        into[target] = merged;
    } else {
        into[target].extend(moved);
    }
}

/// Aligned FASTA: gapped rows under their original headers.
pub fn write_aligned_fasta<W: Write>(mut w: W, msa: &Msa) -> io::Result<()> {
    for r in msa.rows() {
        write_fasta_entry(&mut w, &r.id, &r.description, &r.gapped)?;
    }
    Ok(())
}

/// Reads aligned FASTA; `.` is read as a gap, residues are normalized and
/// `;` lines are comments.
pub fn parse_aligned_fasta<R: BufRead>(reader: R) -> Result<Msa, MsaError> {
    let mut rows: Vec<MsaRow> = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.starts_with(';') {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            let header = header.trim();
            let (id, desc) = header
                .split_once(char::is_whitespace)
                .unwrap_or((header, ""));
            rows.push(MsaRow {
                id: id.to_owned(),
                description: desc.trim().to_owned(),
                gapped: Vec::new(),
            });
            continue;
        }
        let Some(row) = rows.last_mut() else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(SeqError::MissingHeader(line_no + 1).into());
        };
        for ch in line.chars().filter(|c| !c.is_whitespace()) {
            let b = match ch.to_ascii_uppercase() {
                '-' | '.' => b'-',
                'T' => b'U',
                c @ ('A' | 'C' | 'G' | 'U' | 'N') => c as u8,
                _ => {
                    return Err(MsaError::InvalidSymbol {
                        id: row.id.clone(),
                        symbol: ch,
                    })
                }
            };
            row.gapped.push(b);
        }
    }
    if let Some(r) = rows.iter().find(|r| r.gapped.iter().all(|&b| b == b'-')) {
        return Err(SeqError::EmptyRecord(r.id.clone()).into());
    }
    Msa::new(rows)
}

/// Clustal-like blocks of 60 columns: `id<padding>slice<space>count`,
/// where count is the number of residues of the row up to the block end.
pub fn write_clustal<W: Write>(mut w: W, msa: &Msa) -> io::Result<()> {
    let pad = msa.rows().iter().map(|r| r.id.len()).max().unwrap_or(0) + 4;
    writeln!(w, "CLUSTAL multiple sequence alignment")?;
    let mut counts = vec![0usize; msa.depth()];
    for start in (0..msa.width()).step_by(60) {
        let end = (start + 60).min(msa.width());
        writeln!(w)?;
        for (r, count) in msa.rows().iter().zip(counts.iter_mut()) {
            let slice = &r.gapped[start..end];
            *count += slice.iter().filter(|&&b| b != b'-').count();
            writeln!(
                w,
                "{:<pad$}{} {}",
                r.id,
                std::str::from_utf8(slice).unwrap(),
                count
            )?;
        }
    }
    Ok(())
}

/// `cluster_index<TAB>size<TAB>flag<TAB>ids`, 1-based indices.
pub fn write_cluster_report<W: Write>(mut w: W, clusters: &[Cluster]) -> io::Result<()> {
    writeln!(w, "#cluster_index\tsize\tflag\tids")?;
    for (i, c) in clusters.iter().enumerate() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            i + 1,
            c.ids.len(),
            if c.undersized { "undersized" } else { "ok" },
            c.ids.join(",")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::{normalize, SeqKind};

    fn rec(id: &str, s: &str) -> SeqRecord {
        SeqRecord::new(id, SeqKind::Precursor, normalize(s).unwrap())
    }

    #[test]
    fn distance_examples() {
        let sc = ScoringScheme::default();
        let dm = distance_matrix::<f64>(&[rec("a", "ACGUAC"), rec("b", "ACGUAC")], &sc).unwrap();
        assert_eq!(dm.get(0, 1), 0.0);
        let dm = distance_matrix::<f64>(&[rec("a", "AAAA"), rec("b", "CCCC")], &sc).unwrap();
        assert_eq!(dm.get(0, 1), 1.0);
        let dm =
            distance_matrix::<f64>(&[rec("a", "ACGUACGU"), rec("b", "ACGUACGA")], &sc).unwrap();
        assert!((dm.get(1, 0) - 0.125).abs() < 1e-12);
        assert!(matches!(
            distance_matrix::<f64>(&[rec("a", "ACGU")], &sc),
            Err(MsaError::TooFewSequences(1))
        ));
    }

    #[test]
    fn two_leaf_tree() {
        let dm = DistanceMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 0.4], vec![0.4, 0.0]],
        )
        .unwrap();
        let t = build_guide_tree(&dm).unwrap();
        assert_eq!(t.nodes().len(), 3);
        assert_eq!(t.to_newick(), "(a:0.200000,b:0.200000);");
    }

    #[test]
    fn three_leaf_branch_lengths() {
        let dm = DistanceMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![0.0, 0.2, 0.3],
                vec![0.2, 0.0, 0.3],
                vec![0.3, 0.3, 0.0],
            ],
        )
        .unwrap();
        let t = build_guide_tree(&dm).unwrap();
        assert_eq!(
            t.to_newick(),
            "(c:0.200000,(a:0.100000,b:0.100000):0.000000);"
        );
    }

    #[test]
    fn msa_small_examples() {
        let sc = ScoringScheme::default();
        let seqs = vec![
            rec("x", "ACGUAGG"),
            rec("y", "ACGUAGG"),
            rec("z", "ACGUAGG"),
        ];
        let (_, msa) = align_all::<f64>(&seqs, &sc).unwrap();
        assert!(msa.rows().iter().all(|r| !r.gapped.contains(&b'-')));

        let seqs = vec![rec("x", "ACGU"), rec("y", "ACGU"), rec("z", "AGU")];
        let (_, msa) = align_all::<f64>(&seqs, &sc).unwrap();
        assert_eq!(msa.width(), 4);
        assert_eq!(msa.rows()[2].as_str(), "A-GU");
    }

    #[test]
    fn msa_rejects_bad_rows() {
        let row = |id: &str, g: &[u8]| MsaRow {
            id: id.into(),
            description: String::new(),
            gapped: g.to_vec(),
        };
        assert!(matches!(
            Msa::new(vec![row("a", b"AC"), row("b", b"A")]),
            Err(MsaError::RaggedRows)
        ));
        let m = Msa::new(vec![row("a", b"A-C"), row("b", b"A-G")]).unwrap();
        assert_eq!(m.width(), 2);
        assert!(matches!(
            Msa::new(vec![row("a", b"--")]),
            Err(MsaError::EmptyAlignment)
        ));
    }

    #[test]
    fn clustal_layout() {
        let row = |id: &str, g: &str| MsaRow {
            id: id.into(),
            description: String::new(),
            gapped: g.as_bytes().to_vec(),
        };
        let long: String = "ACGU".repeat(16);
        let gapped = format!("--{}", &long[2..]);
        let msa = Msa::new(vec![row("aa", &long), row("b", &gapped)]).unwrap();
        let mut out = Vec::new();
        write_clustal(&mut out, &msa).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "CLUSTAL multiple sequence alignment");
        assert_eq!(lines[2], format!("aa    {} 60", &long[..60]));
        assert_eq!(lines[3], format!("b     {} 58", &gapped[..60]));
        assert_eq!(lines[6], "b     ACGU 62");
    }

    #[test]
    fn aligned_fasta_roundtrip() {
        let text = ">a first\nACAGU\n>b\nac.gt\n";
        let msa = parse_aligned_fasta(text.as_bytes()).unwrap();
        assert_eq!(msa.rows()[1].as_str(), "AC-GU");
        let msa = parse_aligned_fasta(">a\nA-C\n>b\nA-G\n".as_bytes()).unwrap();
        assert_eq!(msa.width(), 2);
        let mut out = Vec::new();
        write_aligned_fasta(&mut out, &msa).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), ">a\nAC\n>b\nAG\n");
    }
}
