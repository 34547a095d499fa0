//! Column conservation, conserved blocks, and where mature sequences fall
//! relative to them.

use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use crate::msa::Msa;
use crate::scalar::Real;
use crate::seqio::MatureAnnotation;

/// How far past a block edge a mature may reach and still count as near.
pub const NEAR_LIMIT: usize = 2;

pub const DEFAULT_MIN_BLOCK_LEN: usize = 15;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConservationError {
    #[error("no alignment row for precursor {0}")]
    AnnotationRowMissing(String),
    #[error("annotation {0} lies outside its alignment row")]
    AnnotationOutOfRange(String),
    #[error("no localizations to summarize")]
    EmptyInput,
    #[error("invalid threshold or block length")]
    InvalidParameter,
}

/// Default column threshold, whatever the alignment depth.
pub const DEFAULT_TAU: f64 = 0.9;

/// Per-column share of rows carrying the most frequent residue. Gaps never
/// count toward the majority but do count in the denominator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationProfile<T> {
    pub scores: Vec<T>,
}

pub fn conservation_profile<T: Real>(msa: &Msa) -> ConservationProfile<T> {
    let depth = T::from_count(msa.depth());
    let scores = (0..msa.width())
        .map(|c| {
            let mut counts = [0usize; 5];
            for b in msa.column(c) {
                match b {
                    b'A' => counts[0] += 1,
                    b'C' => counts[1] += 1,
                    b'G' => counts[2] += 1,
                    b'U' => counts[3] += 1,
                    b'N' => counts[4] += 1,
                    _ => {}
                }
            }
            T::from_count(counts.into_iter().max().unwrap_or(0)) / depth
        })
        .collect();
    ConservationProfile { scores }
}

/// One row's share of a block, in sequence coordinates (1-based,
/// inclusive). A row with no residues in the block has a zero span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockRow {
    pub id: String,
    pub seq_start: usize,
    pub seq_end: usize,
    pub subsequence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservedBlock<T> {
    /// 1-based inclusive MSA columns.
    pub start_col: usize,
    pub end_col: usize,
    pub mean_score: T,
    pub rows: Vec<BlockRow>,
}

impl<T> ConservedBlock<T> {
    pub fn len(&self) -> usize {
        self.end_col + 1 - self.start_col
    }

    pub fn is_empty(&self) -> bool {
        self.end_col < self.start_col
    }

    pub fn row(&self, id: &str) -> Option<&BlockRow> {
        self.rows.iter().find(|r| r.id == id)
    }
}

/// Maximal runs of columns scoring at least `tau`, kept when at least
/// `min_len` long, left to right.
pub fn conserved_blocks<T: Real>(
    msa: &Msa,
    profile: &ConservationProfile<T>,
    tau: T,
    min_len: usize,
) -> Result<Vec<ConservedBlock<T>>, ConservationError> {
    if !(tau > T::zero() && tau <= T::one()) || min_len == 0 {
        return Err(ConservationError::InvalidParameter);
    }
    let mut spans = Vec::new();
    let mut run_start = None;
    for (c, &s) in profile.scores.iter().enumerate() {
        match (s >= tau, run_start) {
            (true, None) => run_start = Some(c),
            (false, Some(st)) => {
                spans.push((st, c));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(st) = run_start {
        spans.push((st, profile.scores.len()));
    }
    Ok(spans
        .into_iter()
        .filter(|(s, e)| e - s >= min_len)
        .map(|(s, e)| make_block(msa, profile, s, e))
        .collect())
}

fn make_block<T: Real>(
    msa: &Msa,
    profile: &ConservationProfile<T>,
    s: usize,
    e: usize,
) -> ConservedBlock<T> {
    let mean = profile.scores[s..e].iter().copied().sum::<T>() / T::from_count(e - s);
    let rows = msa
        .rows()
        .iter()
        .map(|r| {
            let before = r.gapped[..s].iter().filter(|&&b| b != b'-').count();
            let sub: String = r.gapped[s..e]
                .iter()
                .filter(|&&b| b != b'-')
                .map(|&b| b as char)
                .collect();
            let (seq_start, seq_end) = if sub.is_empty() {
                (0, 0)
            } else {
                (before + 1, before + sub.len())
            };
            BlockRow {
                id: r.id.clone(),
                seq_start,
                seq_end,
                subsequence: sub,
            }
        })
        .collect();
    ConservedBlock {
        start_col: s + 1,
        end_col: e,
        mean_score: mean,
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Inside,
    /// Within [`NEAR_LIMIT`] residues of lying wholly inside a block.
    Near(usize),
    Outside,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Inside => f.write_str("inside"),
            Relation::Near(_) => f.write_str("near"),
            Relation::Outside => f.write_str("outside"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatureLocalization {
    pub mature_id: String,
    pub precursor_id: String,
    /// 1-based block index; `None` when outside every block.
    pub block_index: Option<usize>,
    pub relation: Relation,
    /// MSA columns of the first and last mature residue.
    pub columns: (usize, usize),
}

/// Maps the mature through its row's gaps and counts, for each block, how
/// many mature residues fall outside the block's columns. The block with
/// the fewest wins (earliest on ties): zero is inside, up to two is near.
pub fn localize_mature<T>(
    msa: &Msa,
    blocks: &[ConservedBlock<T>],
    ann: &MatureAnnotation,
) -> Result<MatureLocalization, ConservationError> {
    let row = msa
        .row(&ann.precursor_id)
        .ok_or_else(|| ConservationError::AnnotationRowMissing(ann.precursor_id.clone()))?;
    let cols = row.residue_columns();
    if ann.start == 0 || ann.start > ann.end || ann.end > cols.len() {
        return Err(ConservationError::AnnotationOutOfRange(
            ann.mature_id.clone(),
        ));
    }
    let mature_cols = &cols[ann.start - 1..ann.end];
    let mut best: Option<(usize, usize)> = None;
    for (i, b) in blocks.iter().enumerate() {
        let outside = mature_cols
            .iter()
            .filter(|&&c| c < b.start_col || c > b.end_col)
            .count();
        if best.is_none_or(|(_, o)| outside < o) {
            best = Some((i, outside));
        }
    }
    let (block_index, relation) = match best {
        Some((i, 0)) => (Some(i + 1), Relation::Inside),
        Some((i, o)) if o <= NEAR_LIMIT => (Some(i + 1), Relation::Near(o)),
        _ => (None, Relation::Outside),
    };
    Ok(MatureLocalization {
        mature_id: ann.mature_id.clone(),
        precursor_id: ann.precursor_id.clone(),
        block_index,
        relation,
        columns: (mature_cols[0], *mature_cols.last().unwrap()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationStats {
    pub inside_pct: f64,
    pub near_pct: f64,
    pub outside_pct: f64,
    pub n: usize,
}

fn pct(count: usize, n: usize) -> f64 {
    (count as f64 * 1000.0 / n as f64).round() / 10.0
}

/// Percentages to one decimal.
pub fn conservation_stats(
    locs: &[MatureLocalization],
) -> Result<ConservationStats, ConservationError> {
    if locs.is_empty() {
        return Err(ConservationError::EmptyInput);
    }
    let n = locs.len();
    let count = |f: fn(&Relation) -> bool| locs.iter().filter(|l| f(&l.relation)).count();
    Ok(ConservationStats {
        inside_pct: pct(count(|r| matches!(r, Relation::Inside)), n),
        near_pct: pct(count(|r| matches!(r, Relation::Near(_))), n),
        outside_pct: pct(count(|r| matches!(r, Relation::Outside)), n),
        n,
    })
}

/// A family whose alignment has more than one conserved block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MultiRegionReport {
    pub family: String,
    pub block_count: usize,
    /// Mature ids inside or near each block, indexed by block.
    pub occupants: Vec<Vec<String>>,
}

impl MultiRegionReport {
    pub fn empty_blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupants
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_empty())
            .map(|(i, _)| i + 1)
    }
}

pub fn detect_multi_region<T>(
    family: &str,
    blocks: &[ConservedBlock<T>],
    locs: &[MatureLocalization],
) -> Option<MultiRegionReport> {
    if blocks.len() < 2 {
        return None;
    }
    let mut occupants = vec![Vec::new(); blocks.len()];
    for l in locs {
        if let Some(i) = l.block_index {
            occupants[i - 1].push(l.mature_id.clone());
        }
    }
    Some(MultiRegionReport {
        family: family.to_owned(),
        block_count: blocks.len(),
        occupants,
    })
}

/// Everything computed for one aligned family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyAnalysis<T> {
    pub family: String,
    pub blocks: Vec<ConservedBlock<T>>,
    pub localizations: Vec<MatureLocalization>,
    pub multi_region: Option<MultiRegionReport>,
}

/// Profile, blocks and localizations of every annotation whose precursor
/// is a row of `msa`. Annotations for other precursors are ignored.
pub fn analyze_family<T: Real>(
    family: &str,
    msa: &Msa,
    annotations: &[MatureAnnotation],
    tau: T,
    min_len: usize,
) -> Result<FamilyAnalysis<T>, ConservationError> {
    let profile = conservation_profile::<T>(msa);
    let blocks = conserved_blocks(msa, &profile, tau, min_len)?;
    let localizations = annotations
        .iter()
        .filter(|a| msa.row(&a.precursor_id).is_some())
        .map(|a| localize_mature(msa, &blocks, a))
        .collect::<Result<Vec<_>, _>>()?;
    let multi_region = detect_multi_region(family, &blocks, &localizations);
    Ok(FamilyAnalysis {
        family: family.to_owned(),
        blocks,
        localizations,
        multi_region,
    })
}

pub fn write_block_report<T: Real, W: Write>(
    mut w: W,
    family: &str,
    blocks: &[ConservedBlock<T>],
) -> io::Result<()> {
    writeln!(
        w,
        "#family\tblock_index\tmsa_start\tmsa_end\tlength\tmean_score"
    )?;
    writeln!(w, "#row_id\tseq_start\tseq_end\tsubsequence")?;
    for (i, b) in blocks.iter().enumerate() {
        writeln!(
            w,
            "{family}\t{}\t{}\t{}\t{}\t{:.3}",
            i + 1,
            b.start_col,
            b.end_col,
            b.len(),
            b.mean_score.to_f64().unwrap_or(f64::NAN)
        )?;
        for r in &b.rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                r.id, r.seq_start, r.seq_end, r.subsequence
            )?;
        }
    }
    Ok(())
}

pub fn write_localizations<W: Write>(
    mut w: W,
    family: &str,
    locs: &[MatureLocalization],
) -> io::Result<()> {
    writeln!(w, "#mature_id\tfamily\trelation\tblock_index\toffset")?;
    for l in locs {
        let block = l.block_index.map_or(".".to_owned(), |i| i.to_string());
        let offset = match l.relation {
            Relation::Near(k) => k,
            _ => 0,
        };
        writeln!(
            w,
            "{}\t{family}\t{}\t{block}\t{offset}",
            l.mature_id, l.relation
        )?;
    }
    Ok(())
}

pub fn write_stats<W: Write>(mut w: W, stats: &ConservationStats) -> io::Result<()> {
    writeln!(w, "#inside_pct\tnear_pct\toutside_pct\tn")?;
    writeln!(
        w,
        "{:.1}\t{:.1}\t{:.1}\t{}",
        stats.inside_pct, stats.near_pct, stats.outside_pct, stats.n
    )
}

/// `family<TAB>block_index<TAB>occupants`, with `none` for an empty block.
pub fn write_multi_region<W: Write>(mut w: W, reports: &[MultiRegionReport]) -> io::Result<()> {
    writeln!(w, "#family\tblock_index\toccupants")?;
    for r in reports {
        for (i, occ) in r.occupants.iter().enumerate() {
            let who = if occ.is_empty() {
                "none".to_owned()
            } else {
                occ.join(",")
            };
            writeln!(w, "{}\t{}\t{}", r.family, i + 1, who)?;
        }
    }
    Ok(())
}
