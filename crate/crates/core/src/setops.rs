//! Mature sequences shared between species: pairwise counts and Venn
//! region counts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::Serialize;

use crate::seqio::{Corpus, NucleotideString, SeqKind};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SetOpsError {
    #[error("unknown species {0}")]
    UnknownSpecies(String),
    #[error("need 2 to 4 species, got {0}")]
    SpeciesCount(usize),
    #[error("species {0} listed twice")]
    DuplicateSpecies(String),
}

/// A distinct mature sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MatureKey {
    pub canonical: NucleotideString,
}

impl MatureKey {
    pub fn new(seq: NucleotideString) -> Self {
        Self { canonical: seq }
    }

    /// Equal length and at most `tolerance` substitutions apart.
    pub fn matches(&self, other: &MatureKey, tolerance: usize) -> bool {
        let (a, b) = (self.canonical.as_bytes(), other.canonical.as_bytes());
        a.len() == b.len() && a.iter().zip(b).filter(|(x, y)| x != y).count() <= tolerance
    }
}

/// Distinct mature sequences of a species: annotated matures of its
/// precursors plus its mature records.
pub fn mature_keys(corpus: &Corpus, species: &str) -> Result<BTreeSet<MatureKey>, SetOpsError> {
    if !corpus.has_species(species) {
        return Err(SetOpsError::UnknownSpecies(species.to_owned()));
    }
    let mut keys = BTreeSet::new();
    for rec in corpus.records_of(species) {
        match rec.kind {
            SeqKind::Mature => {
                keys.insert(MatureKey::new(rec.residues.clone()));
            }
            SeqKind::Precursor => {
                for ann in corpus.annotations_for(&rec.id) {
                    if let Some(seq) = corpus.mature_sequence(ann) {
                        keys.insert(MatureKey::new(seq));
                    }
                }
            }
            SeqKind::Genome => {}
        }
    }
    Ok(keys)
}

/// Exact intersection size at tolerance 0; otherwise a maximum bipartite
/// matching where keys match when equal-length and within `tolerance`
/// substitutions.
pub fn pairwise_shared(
    a: &BTreeSet<MatureKey>,
    b: &BTreeSet<MatureKey>,
    tolerance: usize,
) -> usize {
    if tolerance == 0 {
        return a.intersection(b).count();
    }
    let left: Vec<&MatureKey> = a.iter().collect();
    let right: Vec<&MatureKey> = b.iter().collect();
    let adj: Vec<Vec<usize>> = left
        .iter()
        .map(|x| {
            right
                .iter()
                .enumerate()
                .filter(|(_, y)| x.matches(y, tolerance))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    max_matching(&adj, right.len())
}

/// Kuhn's augmenting-path matching.
fn max_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    let mut size = 0;
    for u in 0..adj.len() {
        let mut seen = vec![false; n_right];
        if augment(u, adj, &mut seen, &mut owner) {
            size += 1;
        }
    }
    size
}

/// Region counts over every non-empty subset of the species, plus the
/// derived pairwise matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntersectionReport {
    pub species: Vec<String>,
    /// Subset bitmask (bit `i` = `species[i]`) to the number of keys found
    /// in exactly that subset.
    pub region_counts: BTreeMap<u32, usize>,
    /// Shared counts; the diagonal is left at zero and printed as `X`.
    pub pairwise: Vec<Vec<usize>>,
}

impl IntersectionReport {
    /// Subsets in canonical order: by size, then lexicographically by
    /// species position.
    pub fn subsets(&self) -> Vec<u32> {
        let n = self.species.len();
        let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
        masks.sort_by_key(|&m| {
            let members: Vec<u32> = (0..n as u32).filter(|i| m & (1 << i) != 0).collect();
            (members.len(), members)
        });
        masks
    }

    pub fn label(&self, mask: u32) -> String {
        self.species
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, s)| s.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn count(&self, mask: u32) -> usize {
        self.region_counts.get(&mask).copied().unwrap_or(0)
    }

    pub fn union_size(&self) -> usize {
        self.region_counts.values().sum()
    }
}

/// Venn region counts for 2 to 4 species.
///
/// At tolerance 0 each distinct sequence is one element. With a tolerance,
/// elements are the connected components of the "within tolerance" graph
/// over all keys, and a component belongs to every species contributing a
/// key to it.
pub fn venn(
    corpus: &Corpus,
    species: &[&str],
    tolerance: usize,
) -> Result<IntersectionReport, SetOpsError> {
    if !(2..=4).contains(&species.len()) {
        return Err(SetOpsError::SpeciesCount(species.len()));
    }
    let mut sets = Vec::with_capacity(species.len());
    for (i, s) in species.iter().enumerate() {
        if species[..i].contains(s) {
            return Err(SetOpsError::DuplicateSpecies(s.to_string()));
        }
        sets.push(mature_keys(corpus, s)?);
    }
    Ok(venn_from_sets(species, &sets, tolerance))
}

pub fn venn_from_sets(
    species: &[&str],
    sets: &[BTreeSet<MatureKey>],
    tolerance: usize,
) -> IntersectionReport {
    let mut membership: BTreeMap<&MatureKey, u32> = BTreeMap::new();
    for (i, set) in sets.iter().enumerate() {
        for k in set {
            *membership.entry(k).or_default() |= 1 << i;
        }
    }
    let keys: Vec<(&MatureKey, u32)> = membership.into_iter().collect();
    let masks: Vec<u32> = if tolerance == 0 {
        keys.iter().map(|(_, m)| *m).collect()
    } else {
        component_masks(&keys, tolerance)
    };
    let mut region_counts = BTreeMap::new();
    for m in masks {
        *region_counts.entry(m).or_insert(0) += 1;
    }
    let n = species.len();
    let mut pairwise = vec![vec![0; n]; n];
    for (&mask, &count) in &region_counts {
        for a in 0..n {
            for b in 0..n {
                if a != b && mask & (1 << a) != 0 && mask & (1 << b) != 0 {
                    pairwise[a][b] += count;
                }
            }
        }
    }
    IntersectionReport {
        species: species.iter().map(|s| s.to_string()).collect(),
        region_counts,
        pairwise,
    }
}

fn component_masks(keys: &[(&MatureKey, u32)], tolerance: usize) -> Vec<u32> {
    let n = keys.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if keys[i].0.matches(keys[j].0, tolerance) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut comp: BTreeMap<usize, u32> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        *comp.entry(r).or_default() |= keys[i].1;
    }
    comp.into_values().collect()
}

/// Square matrix with a species header row and `X` on the diagonal.
pub fn write_matrix<W: Write>(mut w: W, report: &IntersectionReport) -> io::Result<()> {
    writeln!(w, "species\t{}", report.species.join("\t"))?;
    for (i, s) in report.species.iter().enumerate() {
        let cells: Vec<String> = (0..report.species.len())
            .map(|j| {
                if i == j {
                    "X".to_owned()
                } else {
                    report.pairwise[i][j].to_string()
                }
            })
            .collect();
        writeln!(w, "{s}\t{}", cells.join("\t"))?;
    }
    Ok(())
}

pub fn write_venn<W: Write>(mut w: W, report: &IntersectionReport) -> io::Result<()> {
    writeln!(w, "#subset\tcount")?;
    for mask in report.subsets() {
        writeln!(w, "{}\t{}", report.label(mask), report.count(mask))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::{assemble_corpus, normalize, SeqRecord};

    fn key(s: &str) -> MatureKey {
        MatureKey::new(normalize(s).unwrap())
    }

    fn set(items: &[&str]) -> BTreeSet<MatureKey> {
        items.iter().map(|s| key(s)).collect()
    }

    #[test]
    fn keys_are_distinct_sequences() {
        let recs = vec![
            SeqRecord::new(
                "ame-miR-1",
                SeqKind::Mature,
                normalize("UGGAAUGUAAAGAAGUAUGGAG").unwrap(),
            ),
            SeqRecord::new(
                "ame-miR-1b",
                SeqKind::Mature,
                normalize("UGGAAUGUAAAGAAGUAUGGAG").unwrap(),
            ),
            SeqRecord::new(
                "bmo-miR-1",
                SeqKind::Mature,
                normalize("UGGAAUGUAAAGAAGUAUGGAG").unwrap(),
            ),
            SeqRecord::new(
                "bmo-miR-2",
                SeqKind::Mature,
                normalize("UAUCACAGCCAGCUUUGAUGAGC").unwrap(),
            ),
            SeqRecord::new(
                "bmo-miR-3",
                SeqKind::Mature,
                normalize("UCACUGGGCAAAGUGUGUCUCA").unwrap(),
            ),
        ];
        let corpus = assemble_corpus(recs, vec![]).unwrap();
        assert_eq!(mature_keys(&corpus, "ame").unwrap().len(), 1);
        assert_eq!(mature_keys(&corpus, "bmo").unwrap().len(), 3);
        assert_eq!(
            mature_keys(&corpus, "xxx"),
            Err(SetOpsError::UnknownSpecies("xxx".into()))
        );
    }

    #[test]
    fn pairwise_examples() {
        let a = set(&["ACGUACGU", "UUUUCCCC", "GGGGAAAA"]);
        assert_eq!(pairwise_shared(&a, &a, 0), 3);
        assert_eq!(pairwise_shared(&a, &set(&["CCCCCCCC"]), 0), 0);
        assert_eq!(pairwise_shared(&a, &set(&["ACGUACGA"]), 0), 0);
        assert_eq!(pairwise_shared(&a, &set(&["ACGUACGA"]), 1), 1);
        // different lengths never match
        assert_eq!(pairwise_shared(&a, &set(&["ACGUACG"]), 3), 0);
    }

    #[test]
    fn matching_avoids_double_counting() {
        // both left keys are within 1 of the single right key
        let a = set(&["AAAA", "AAAC"]);
        let b = set(&["AAAG"]);
        assert_eq!(pairwise_shared(&a, &b, 1), 1);
    }

    #[test]
    fn venn_labels_in_canonical_order() {
        let sets = vec![
            set(&["AAAA"]),
            set(&["AAAA", "CCCC"]),
            set(&["CCCC", "GGGG"]),
        ];
        let r = venn_from_sets(&["dme", "bmo", "ame"], &sets, 0);
        let labels: Vec<String> = r.subsets().iter().map(|&m| r.label(m)).collect();
        assert_eq!(
            labels,
            vec![
                "dme",
                "bmo",
                "ame",
                "dme+bmo",
                "dme+ame",
                "bmo+ame",
                "dme+bmo+ame"
            ]
        );
        assert_eq!(r.count(0b011), 1);
        assert_eq!(r.count(0b110), 1);
        assert_eq!(r.count(0b100), 1);
        let mut out = Vec::new();
        write_matrix(&mut out, &r).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "species\tdme\tbmo\tame\ndme\tX\t1\t0\nbmo\t1\tX\t1\name\t0\t1\tX\n"
        );
    }
}
