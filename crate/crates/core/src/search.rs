//! Seed-and-extend homology search of miRNA queries against long subjects.
//!
//! Queries are indexed-subject scanned for exact `w`-mer seeds on both
//! strands, each seed is extended without gaps under an X-drop rule, and the
//! resulting hits pass an E-value cutoff, a mature-overlap filter and a
//! mature-length filter before the best survivor is classified by how far
//! it deviates from the query's mature sequence.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::align::{local_align_bytes, AlignOp, PairwiseAlignment, ScoringScheme};
use crate::scalar::Real;
use crate::seqio::{
    reverse_complement, Corpus, MatureAnnotation, NucleotideString, SeqKind, SeqRecord,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SearchError {
    #[error("subject of length {len} is shorter than word size {word_size}")]
    SubjectTooShort { len: usize, word_size: usize },
    #[error("word size {0} outside 4..=32")]
    InvalidWordSize(usize),
    #[error("expected score under the background is not negative")]
    NonNegativeExpectedScore,
    #[error("background probabilities must be non-negative and sum to 1")]
    InvalidBackground,
    #[error("query {0} has no mature annotation")]
    MissingAnnotation(String),
    #[error("invalid search parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Strand {
    Forward,
    ReverseComplement,
}

impl fmt::Display for Strand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strand::Forward => "plus",
            Strand::ReverseComplement => "minus",
        })
    }
}

/// Which strands of the subject to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strands {
    Both,
    Plus,
    Minus,
}

impl Strands {
    pub fn iter(self) -> impl Iterator<Item = Strand> {
        let v: &'static [Strand] = match self {
            Strands::Both => &[Strand::Forward, Strand::ReverseComplement],
            Strands::Plus => &[Strand::Forward],
            Strands::Minus => &[Strand::ReverseComplement],
        };
        v.iter().copied()
    }
}

impl fmt::Display for Strands {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strands::Both => "both",
            Strands::Plus => "plus",
            Strands::Minus => "minus",
        })
    }
}

impl std::str::FromStr for Strands {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(Strands::Both),
            "plus" | "forward" => Ok(Strands::Plus),
            "minus" | "reverse" => Ok(Strands::Minus),
            other => Err(format!("unknown strand selection {other:?}")),
        }
    }
}

#[inline]
fn base_code(b: u8) -> Option<u64> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'U' => Some(3),
        _ => None,
    }
}

/// Codes of every N-free window, as (0-based start, code).
fn kmer_codes(seq: &[u8], w: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
    let mask = if w == 32 {
        u64::MAX
    } else {
        (1u64 << (2 * w)) - 1
    };
    let mut code = 0u64;
    let mut run = 0usize;
    seq.iter()
        .enumerate()
        .filter_map(move |(i, &b)| match base_code(b) {
            Some(c) => {
                code = ((code << 2) | c) & mask;
                run += 1;
                (run >= w).then(|| (i + 1 - w, code))
            }
            None => {
                run = 0;
                None
            }
        })
}

fn encode(kmer: &[u8]) -> Option<u64> {
    kmer.iter()
        .try_fold(0u64, |acc, &b| Some((acc << 2) | base_code(b)?))
}

const DENSE_MAX_WORD: usize = 12;

#[derive(Debug, Clone)]
enum Table {
    /// Direct-addressed buckets for short words.
    Dense {
        offsets: Vec<u32>,
        positions: Vec<u32>,
    },
    /// Sorted (code, position) pairs.
    Sparse { entries: Vec<(u64, u32)> },
}

/// Positions of every N-free `w`-mer of a subject. Positions are 1-based
/// and sorted within each key.
#[derive(Debug, Clone)]
pub struct KmerIndex {
    word_size: usize,
    subject_len: usize,
    table: Table,
}

pub fn build_index(subject: &NucleotideString, word_size: usize) -> Result<KmerIndex, SearchError> {
    if !(4..=32).contains(&word_size) {
        return Err(SearchError::InvalidWordSize(word_size));
    }
    let seq = subject.as_bytes();
    if seq.len() < word_size {
        return Err(SearchError::SubjectTooShort {
            len: seq.len(),
            word_size,
        });
    }
    let table = if word_size <= DENSE_MAX_WORD {
        let buckets = 1usize << (2 * word_size);
        let mut offsets = vec![0u32; buckets + 1];
        for (_, code) in kmer_codes(seq, word_size) {
            offsets[code as usize + 1] += 1;
        }
        for i in 0..buckets {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut positions = vec![0u32; offsets[buckets] as usize];
        for (start, code) in kmer_codes(seq, word_size) {
            let slot = &mut fill[code as usize];
            positions[*slot as usize] = (start + 1) as u32;
            *slot += 1;
        }
        Table::Dense { offsets, positions }
    } else {
        let mut entries: Vec<(u64, u32)> = kmer_codes(seq, word_size)
            .map(|(start, code)| (code, (start + 1) as u32))
            .collect();
        entries.sort_unstable();
        Table::Sparse { entries }
    };
    Ok(KmerIndex {
        word_size,
        subject_len: seq.len(),
        table,
    })
}

impl KmerIndex {
    pub fn word_size(&self) -> usize {
        self.word_size
    }

    pub fn subject_len(&self) -> usize {
        self.subject_len
    }

    /// Number of indexed windows.
    pub fn len(&self) -> usize {
        match &self.table {
            Table::Dense { positions, .. } => positions.len(),
            Table::Sparse { entries } => entries.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 1-based start positions of `kmer` in the subject.
    pub fn positions(&self, kmer: &[u8]) -> Vec<u32> {
        if kmer.len() != self.word_size {
            return Vec::new();
        }
        let Some(code) = encode(kmer) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        self.for_each_position(code, |p| out.push(p));
        out
    }

    fn for_each_position(&self, code: u64, mut f: impl FnMut(u32)) {
        match &self.table {
            Table::Dense { offsets, positions } => {
                let c = code as usize;
                positions[offsets[c] as usize..offsets[c + 1] as usize]
                    .iter()
                    .for_each(|&p| f(p));
            }
            Table::Sparse { entries } => {
                let lo = entries.partition_point(|e| e.0 < code);
                entries[lo..]
                    .iter()
                    .take_while(|e| e.0 == code)
                    .for_each(|e| f(e.1));
            }
        }
    }
}

/// An exact `w`-mer match. `query_pos` is 1-based in the query as oriented
/// by `strand` (the reverse complement for [`Strand::ReverseComplement`]);
/// `subject_pos` is 1-based on the forward subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SeedMatch {
    pub query_pos: usize,
    pub subject_pos: usize,
    pub strand: Strand,
}

fn oriented(query: &[u8], strand: Strand) -> Vec<u8> {
    match strand {
        Strand::Forward => query.to_vec(),
        Strand::ReverseComplement => reverse_complement(query),
    }
}

/// All exact seed matches, sorted by (subject_pos, query_pos).
pub fn seed_hits(query: &NucleotideString, index: &KmerIndex, strand: Strand) -> Vec<SeedMatch> {
    let w = index.word_size;
    if query.len() < w {
        return Vec::new();
    }
    let q = oriented(query.as_bytes(), strand);
    let mut out = Vec::new();
    for (start, code) in kmer_codes(&q, w) {
        index.for_each_position(code, |p| {
            out.push(SeedMatch {
                query_pos: start + 1,
                subject_pos: p as usize,
                strand,
            })
        });
    }
    out.sort_unstable_by_key(|s| (s.subject_pos, s.query_pos));
    out
}

/// Ungapped two-sided X-drop extension of a seed. The returned alignment
/// is against the query oriented by the seed's strand.
pub fn extend_hit(
    seed: &SeedMatch,
    query: &NucleotideString,
    subject: &NucleotideString,
    scheme: &ScoringScheme,
    x_drop: i32,
    word_size: usize,
) -> PairwiseAlignment {
    let q = oriented(query.as_bytes(), seed.strand);
    extend_oriented(seed, &q, subject.as_bytes(), scheme, x_drop, word_size)
}

fn extend_oriented(
    seed: &SeedMatch,
    q: &[u8],
    s: &[u8],
    scheme: &ScoringScheme,
    x_drop: i32,
    word_size: usize,
) -> PairwiseAlignment {
    let q0 = seed.query_pos - 1;
    let s0 = seed.subject_pos - 1;
    let seed_score: i32 = (0..word_size)
        .map(|k| scheme.substitution(q[q0 + k], s[s0 + k]))
        .sum();

    // rightward from the end of the seed
    let (mut run, mut best, mut best_len) = (0i32, 0i32, 0usize);
    let mut k = 0;
    while q0 + word_size + k < q.len() && s0 + word_size + k < s.len() {
        run += scheme.substitution(q[q0 + word_size + k], s[s0 + word_size + k]);
        k += 1;
        if run > best {
            best = run;
            best_len = k;
        } else if best - run > x_drop {
            break;
        }
    }
    let (right_score, right_len) = (best, best_len);

    let (mut run, mut best, mut best_len) = (0i32, 0i32, 0usize);
    let mut k = 0;
    while k < q0 && k < s0 {
        run += scheme.substitution(q[q0 - 1 - k], s[s0 - 1 - k]);
        k += 1;
        if run > best {
            best = run;
            best_len = k;
        } else if best - run > x_drop {
            break;
        }
    }
    let (left_score, left_len) = (best, best_len);

    let len = left_len + word_size + right_len;
    let ops = vec![AlignOp::Pair; len];
    let al = PairwiseAlignment::from_ops(q, s, q0 - left_len, s0 - left_len, &ops, scheme);
    debug_assert_eq!(al.score, seed_score + left_score + right_score);
    al
}

/// Karlin-Altschul statistics for a scoring scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KarlinAltschulParams<T> {
    pub lambda: T,
    pub k: T,
    pub background: [T; 4],
}

pub const DEFAULT_K: f64 = 0.1;

fn pair_terms<T: Real>(scheme: &ScoringScheme, bg: &[T; 4]) -> Vec<(T, T)> {
    let mut v = Vec::with_capacity(16);
    for (i, &pi) in bg.iter().enumerate() {
        for (j, &pj) in bg.iter().enumerate() {
            let s = if i == j {
                scheme.match_score
            } else {
                scheme.mismatch_score
            };
            v.push((pi * pj, T::from_score(s)));
        }
    }
    v
}

/// `sum p_i p_j exp(lambda * s_ij) - 1`.
pub fn lambda_residual<T: Real>(scheme: &ScoringScheme, background: &[T; 4], lambda: T) -> T {
    pair_terms(scheme, background)
        .into_iter()
        .map(|(w, s)| w * (lambda * s).exp())
        .sum::<T>()
        - T::one()
}

/// Solves for lambda by bisection on (0, 10]; `k` is taken as given.
pub fn calibrate<T: Real>(
    scheme: &ScoringScheme,
    background: [T; 4],
    k: T,
) -> Result<KarlinAltschulParams<T>, SearchError> {
    let total: T = background.iter().copied().sum();
    if background.iter().any(|p| *p < T::zero()) || (total - T::one()).abs() > T::lit(1e-6) {
        return Err(SearchError::InvalidBackground);
    }
    let expected: T = pair_terms(scheme, &background)
        .into_iter()
        .map(|(w, s)| w * s)
        .sum();
    if expected >= T::zero() || scheme.match_score <= 0 {
        return Err(SearchError::NonNegativeExpectedScore);
    }
    let (mut lo, mut hi) = (T::zero(), T::lit(10.0));
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if lambda_residual(scheme, &background, mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = if lambda_residual(scheme, &background, lo).abs()
        <= lambda_residual(scheme, &background, hi).abs()
    {
        lo
    } else {
        hi
    };
    Ok(KarlinAltschulParams {
        lambda,
        k,
        background,
    })
}

pub fn uniform_background<T: Real>() -> [T; 4] {
    [T::lit(0.25); 4]
}

/// `E = k * m * n * exp(-lambda * score)`.
pub fn e_value<T: Real>(
    score: i32,
    query_len: usize,
    subject_len: usize,
    params: &KarlinAltschulParams<T>,
) -> T {
    params.k
        * T::from_count(query_len)
        * T::from_count(subject_len)
        * (-params.lambda * T::from_score(score)).exp()
}

/// Deviation class of the best surviving hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchClass {
    Exact,
    OneMismatch,
    TwoMismatch,
    NotSignificant,
}

impl fmt::Display for MatchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchClass::Exact => "exact",
            MatchClass::OneMismatch => "one_mismatch",
            MatchClass::TwoMismatch => "two_mismatch",
            MatchClass::NotSignificant => "not_significant",
        })
    }
}

/// How a hit sits on one mature annotation of its query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MatureFootprint {
    /// Query positions of the mature covered by the hit.
    pub overlap: usize,
    /// Subject residues aligned inside the mature span.
    pub hit_mature_len: usize,
    /// Mismatched pair columns inside the mature span.
    pub mismatches: usize,
    /// Gap columns inside the mature span.
    pub gaps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit<T> {
    pub query_id: String,
    pub subject_id: String,
    pub strand: Strand,
    /// Against the oriented query; see [`SeedMatch`].
    pub alignment: PairwiseAlignment,
    pub query_len: usize,
    pub e_value: T,
    pub mature_id: Option<String>,
    pub mature_overlap: usize,
    pub footprint: MatureFootprint,
    pub match_class: MatchClass,
}

impl<T> SearchHit<T> {
    /// Query span on the forward query, 1-based inclusive.
    pub fn query_span(&self) -> (usize, usize) {
        map_query_span(
            self.strand,
            self.query_len,
            self.alignment.a_start,
            self.alignment.a_end,
        )
    }

    pub fn subject_span(&self) -> (usize, usize) {
        (self.alignment.b_start, self.alignment.b_end)
    }
}

fn map_query_span(strand: Strand, m: usize, a: usize, b: usize) -> (usize, usize) {
    match strand {
        Strand::Forward => (a, b),
        Strand::ReverseComplement => (m + 1 - b, m + 1 - a),
    }
}

/// Mature footprint of an alignment over an oriented query.
pub fn mature_footprint(
    al: &PairwiseAlignment,
    strand: Strand,
    query_len: usize,
    ann: &MatureAnnotation,
) -> MatureFootprint {
    let mut fp = MatureFootprint::default();
    if al.is_empty() {
        return fp;
    }
    let fwd = |p: usize| match strand {
        Strand::Forward => p,
        Strand::ReverseComplement => query_len + 1 - p,
    };
    let inside = |p: usize| p >= 1 && p <= query_len && (ann.start..=ann.end).contains(&fwd(p));
    // oriented position of the next query residue
    let mut qpos = al.a_start;
    for (x, y) in al.aligned_a.bytes().zip(al.aligned_b.bytes()) {
        if x == b'-' {
            if qpos > al.a_start && inside(qpos - 1) && inside(qpos) {
                fp.gaps += 1;
                fp.hit_mature_len += 1;
            }
            continue;
        }
        if inside(qpos) {
            fp.overlap += 1;
            if y == b'-' {
                fp.gaps += 1;
            } else {
                fp.hit_mature_len += 1;
                if x != y || x == b'N' {
                    fp.mismatches += 1;
                }
            }
        }
        qpos += 1;
    }
    fp
}

/// Keeps a hit iff its query span shares at least one position with the
/// mature span. Returns the decision and the shared length.
pub fn mature_overlap_filter<T>(hit: &SearchHit<T>, ann: &MatureAnnotation) -> (bool, usize) {
    let (qs, qe) = hit.query_span();
    let lo = qs.max(ann.start);
    let hi = qe.min(ann.end);
    let overlap = if hi >= lo { hi - lo + 1 } else { 0 };
    (overlap >= 1, overlap)
}

/// Keeps a candidate iff the mature lengths differ by at most 2 nt.
pub fn length_diff_filter(hit_mature_len: usize, query_mature_len: usize) -> bool {
    hit_mature_len.abs_diff(query_mature_len) <= 2
}

/// Total deviation of a hit from the full mature: mismatches and gap
/// columns inside the span plus mature positions the hit does not cover.
pub fn mature_deviation(fp: &MatureFootprint, mature_len: usize) -> usize {
    fp.mismatches + fp.gaps + mature_len.saturating_sub(fp.overlap)
}

/// Class of a query given its best surviving hit (or none).
pub fn classify_match(best: Option<(&MatureFootprint, usize)>) -> MatchClass {
    match best.map(|(fp, len)| mature_deviation(fp, len)) {
        Some(0) => MatchClass::Exact,
        Some(1) => MatchClass::OneMismatch,
        Some(2) => MatchClass::TwoMismatch,
        _ => MatchClass::NotSignificant,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchParams<T> {
    pub word_size: usize,
    pub e_cutoff: T,
    pub scheme: ScoringScheme,
    pub x_drop: i32,
    pub strands: Strands,
    pub k: T,
    /// Rescore each extension with a gapped local alignment around it.
    pub gapped: bool,
}

impl<T: Real> Default for SearchParams<T> {
    fn default() -> Self {
        Self {
            word_size: 7,
            e_cutoff: T::lit(10.0),
            scheme: ScoringScheme::default(),
            x_drop: 20,
            strands: Strands::Both,
            k: T::lit(DEFAULT_K),
            gapped: false,
        }
    }
}

impl<T: Real> SearchParams<T> {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(4..=32).contains(&self.word_size) {
            return Err(SearchError::InvalidWordSize(self.word_size));
        }
        if !(self.e_cutoff >= T::zero()) {
            return Err(SearchError::InvalidParameter(
                "e_cutoff must be non-negative",
            ));
        }
        if self.x_drop < 0 {
            return Err(SearchError::InvalidParameter("x_drop must be non-negative"));
        }
        if !(self.k > T::zero()) {
            return Err(SearchError::InvalidParameter("k must be positive"));
        }
        self.scheme
            .validate()
            .map_err(|_| SearchError::InvalidParameter("invalid scoring scheme"))
    }

    /// One-line `key=value` rendering of every parameter.
    pub fn describe(&self) -> String {
        format!(
            "word_size={} e_cutoff={} match={} mismatch={} gap_open={} gap_extend={} x_drop={} strands={} k={} gapped={}",
            self.word_size,
            self.e_cutoff,
            self.scheme.match_score,
            self.scheme.mismatch_score,
            self.scheme.gap_open,
            self.scheme.gap_extend,
            self.x_drop,
            self.strands,
            self.k,
            self.gapped
        )
    }
}

/// A query precursor (or mature) with the mature spans hits must touch.
#[derive(Debug, Clone)]
pub struct Query<'a> {
    pub record: &'a SeqRecord,
    pub matures: Vec<MatureAnnotation>,
}

impl<'a> Query<'a> {
    /// Mature records are their own mature span; precursors need at least
    /// one annotation in the corpus.
    pub fn from_corpus(corpus: &'a Corpus, record: &'a SeqRecord) -> Result<Self, SearchError> {
        let matures: Vec<MatureAnnotation> = if record.kind == SeqKind::Mature {
            vec![MatureAnnotation::new(
                &record.id,
                &record.id,
                1,
                record.len(),
            )]
        } else {
            corpus.annotations_for(&record.id).cloned().collect()
        };
        if matures.is_empty() {
            return Err(SearchError::MissingAnnotation(record.id.clone()));
        }
        Ok(Self { record, matures })
    }

    /// Every precursor and mature record of the corpus, optionally
    /// restricted to one species, in corpus order.
    pub fn all(corpus: &'a Corpus, species: Option<&str>) -> Result<Vec<Self>, SearchError> {
        corpus
            .records()
            .iter()
            .filter(|r| r.kind != SeqKind::Genome)
            .filter(|r| species.is_none_or(|s| r.species == s))
            .map(|r| Self::from_corpus(corpus, r))
            .collect()
    }
}

/// Outcome for one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryOutcome<T> {
    pub query_id: String,
    pub class: MatchClass,
    pub best: Option<SearchHit<T>>,
    /// Classes of every hit that passed the filters, best hit included.
    pub survivors: Tally,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub exact: usize,
    pub one_mismatch: usize,
    pub two_mismatch: usize,
    pub not_significant: usize,
}

impl Tally {
    pub fn add(&mut self, class: MatchClass) {
        match class {
            MatchClass::Exact => self.exact += 1,
            MatchClass::OneMismatch => self.one_mismatch += 1,
            MatchClass::TwoMismatch => self.two_mismatch += 1,
            MatchClass::NotSignificant => self.not_significant += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.exact + self.one_mismatch + self.two_mismatch + self.not_significant
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport<T> {
    pub subject_ids: Vec<String>,
    /// Total subject residues, the `n` of every E-value.
    pub search_space: usize,
    pub outcomes: Vec<QueryOutcome<T>>,
    pub tally: Tally,
}

/// Indexes the subject and searches every query against it.
pub fn search<T: Real>(
    queries: &[Query<'_>],
    subject: &SeqRecord,
    params: &SearchParams<T>,
) -> Result<SearchReport<T>, SearchError> {
    search_many(queries, std::slice::from_ref(subject), params)
}

/// Searches against several subject records (the chromosomes of one
/// genome) as one search space. Subjects are indexed one at a time; each
/// query keeps its best hit over all of them, earlier subjects winning
/// otherwise exact ties.
pub fn search_many<T: Real>(
    queries: &[Query<'_>],
    subjects: &[SeqRecord],
    params: &SearchParams<T>,
) -> Result<SearchReport<T>, SearchError> {
    params.validate()?;
    let stats = calibrate(&params.scheme, uniform_background::<T>(), params.k)?;
    let space: usize = subjects.iter().map(SeqRecord::len).sum();
    let mut per_query: Vec<(Option<SearchHit<T>>, Tally)> =
        vec![(None, Tally::default()); queries.len()];
    for subject in subjects {
        if subject.len() < params.word_size {
            continue;
        }
        let index = build_index(&subject.residues, params.word_size)?;
        let found: Vec<Vec<SearchHit<T>>> = queries
            .par_iter()
            .map(|q| survivors(q, subject, &index, params, &stats, space))
            .collect();
        for (slot, hits) in per_query.iter_mut().zip(found) {
            hits.iter().for_each(|h| slot.1.add(h.match_class));
            slot.0 = best_of(slot.0.take().into_iter().chain(hits));
        }
    }
    Ok(report(queries, subjects, space, per_query))
}

/// Searches one subject with a prebuilt index.
pub fn search_indexed<T: Real>(
    queries: &[Query<'_>],
    subject: &SeqRecord,
    index: &KmerIndex,
    params: &SearchParams<T>,
) -> Result<SearchReport<T>, SearchError> {
    params.validate()?;
    if index.word_size() != params.word_size || index.subject_len() != subject.len() {
        return Err(SearchError::InvalidParameter(
            "index does not belong to this subject or word size",
        ));
    }
    let stats = calibrate(&params.scheme, uniform_background::<T>(), params.k)?;
    let per_query: Vec<(Option<SearchHit<T>>, Tally)> = queries
        .par_iter()
        .map(|q| {
            let hits = survivors(q, subject, index, params, &stats, subject.len());
            let mut n = Tally::default();
            hits.iter().for_each(|h| n.add(h.match_class));
            (best_of(hits), n)
        })
        .collect();
    Ok(report(
        queries,
        std::slice::from_ref(subject),
        subject.len(),
        per_query,
    ))
}

fn report<T: Real>(
    queries: &[Query<'_>],
    subjects: &[SeqRecord],
    space: usize,
    per_query: Vec<(Option<SearchHit<T>>, Tally)>,
) -> SearchReport<T> {
    let mut tally = Tally::default();
    let outcomes: Vec<QueryOutcome<T>> = queries
        .iter()
        .zip(per_query)
        .map(|(q, (best, n))| {
            let class = best
                .as_ref()
                .map_or(MatchClass::NotSignificant, |h| h.match_class);
            tally.add(class);
            QueryOutcome {
                query_id: q.record.id.clone(),
                class,
                best,
                survivors: n,
            }
        })
        .collect();
    SearchReport {
        subject_ids: subjects.iter().map(|s| s.id.clone()).collect(),
        search_space: space,
        outcomes,
        tally,
    }
}

/// Maximum score, then lower E, then lower subject position, then the
/// forward strand. The first of otherwise equal hits wins.
fn best_of<T: Real>(hits: impl IntoIterator<Item = SearchHit<T>>) -> Option<SearchHit<T>> {
    let better = |a: &SearchHit<T>, b: &SearchHit<T>| {
        b.alignment
            .score
            .cmp(&a.alignment.score)
            .then(
                a.e_value
                    .partial_cmp(&b.e_value)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(a.alignment.b_start.cmp(&b.alignment.b_start))
            .then(a.strand.cmp(&b.strand))
            == std::cmp::Ordering::Less
    };
    let mut best: Option<SearchHit<T>> = None;
    for h in hits {
        if best.as_ref().is_none_or(|b| better(&h, b)) {
            best = Some(h);
        }
    }
    best
}

/// Extended, deduplicated hits of one query on one strand, before any
/// filtering. Alignments are against the oriented query.
pub fn strand_hits(
    query: &NucleotideString,
    subject: &NucleotideString,
    index: &KmerIndex,
    strand: Strand,
    scheme: &ScoringScheme,
    x_drop: i32,
    gapped: bool,
) -> Vec<PairwiseAlignment> {
    let w = index.word_size();
    let q = oriented(query.as_bytes(), strand);
    let s = subject.as_bytes();
    let mut reached: HashMap<isize, usize> = HashMap::new();
    let mut hits: Vec<PairwiseAlignment> = Vec::new();
    for seed in seed_hits(query, index, strand) {
        let diag = seed.subject_pos as isize - seed.query_pos as isize;
        if reached
            .get(&diag)
            .is_some_and(|&end| seed.subject_pos + w - 1 <= end)
        {
            continue;
        }
        let mut al = extend_oriented(&seed, &q, s, scheme, x_drop, w);
        reached.insert(diag, al.b_end);
        if gapped {
            let pad = q.len();
            let lo = al.b_start.saturating_sub(pad + 1);
            let hi = (al.b_end + pad).min(s.len());
            let local = local_align_bytes(&q, &s[lo..hi], scheme);
            if local.score > al.score {
                al = local;
                al.b_start += lo;
                al.b_end += lo;
            }
        }
        hits.push(al);
    }
    hits.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(a.b_start.cmp(&b.b_start))
            .then(a.a_start.cmp(&b.a_start))
    });
    let mut kept: Vec<PairwiseAlignment> = Vec::new();
    for h in hits {
        let overlaps = kept.iter().any(|k| {
            h.b_start <= k.b_end
                && k.b_start <= h.b_end
                && h.a_start <= k.a_end
                && k.a_start <= h.a_end
        });
        if !overlaps {
            kept.push(h);
        }
    }
    kept
}

/// Hits of one query on one subject that pass the E-value cutoff and
/// both mature filters.
fn survivors<T: Real>(
    query: &Query<'_>,
    subject: &SeqRecord,
    index: &KmerIndex,
    params: &SearchParams<T>,
    stats: &KarlinAltschulParams<T>,
    search_space: usize,
) -> Vec<SearchHit<T>> {
    let qseq = &query.record.residues;
    let m = qseq.len();
    let mut out: Vec<SearchHit<T>> = Vec::new();
    for strand in params.strands.iter() {
        for al in strand_hits(
            qseq,
            &subject.residues,
            index,
            strand,
            &params.scheme,
            params.x_drop,
            params.gapped,
        ) {
            let e = e_value(al.score, m, search_space, stats);
            if !(e <= params.e_cutoff) {
                continue;
            }
            let mut hit = SearchHit {
                query_id: query.record.id.clone(),
                subject_id: subject.id.clone(),
                strand,
                alignment: al,
                query_len: m,
                e_value: e,
                mature_id: None,
                mature_overlap: 0,
                footprint: MatureFootprint::default(),
                match_class: MatchClass::NotSignificant,
            };
            // annotation with the largest overlap; first wins ties
            let mut chosen: Option<(&MatureAnnotation, usize)> = None;
            for ann in &query.matures {
                let (keep, overlap) = mature_overlap_filter(&hit, ann);
                if keep && chosen.is_none_or(|(_, o)| overlap > o) {
                    chosen = Some((ann, overlap));
                }
            }
            let Some((ann, overlap)) = chosen else {
                continue;
            };
            let fp = mature_footprint(&hit.alignment, strand, m, ann);
            if !length_diff_filter(fp.hit_mature_len, ann.len()) {
                continue;
            }
            hit.mature_id = Some(ann.mature_id.clone());
            hit.mature_overlap = overlap;
            hit.footprint = fp;
            hit.match_class = classify_match(Some((&fp, ann.len())));
            out.push(hit);
        }
    }
    out
}

/// Three significant digits; scientific notation below 1e-2.
pub fn format_evalue(e: f64) -> String {
    if e == 0.0 {
        return "0.00e0".to_owned();
    }
    if e < 1e-2 {
        return format!("{e:.2e}");
    }
    let magnitude = e.log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    format!("{e:.decimals$}")
}

pub const HIT_COLUMNS: &str =
    "query_id\tsubject_id\tstrand\tq_start\tq_end\ts_start\ts_end\tscore\tevalue\tmismatches\tgaps\tclass";

/// One line per query. Queries without a surviving hit carry `.` in the
/// hit fields.
pub fn write_hit_report<T: Real, W: Write>(mut w: W, report: &SearchReport<T>) -> io::Result<()> {
    writeln!(w, "#{HIT_COLUMNS}")?;
    for o in &report.outcomes {
        match &o.best {
            Some(h) => {
                let (qs, qe) = h.query_span();
                let (ss, se) = h.subject_span();
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    o.query_id,
                    h.subject_id,
                    h.strand,
                    qs,
                    qe,
                    ss,
                    se,
                    h.alignment.score,
                    format_evalue(h.e_value.to_f64().unwrap_or(f64::NAN)),
                    h.alignment.mismatches,
                    h.alignment.gap_columns,
                    o.class
                )?;
            }
            None => writeln!(
                w,
                "{}\t.\t.\t.\t.\t.\t.\t.\t.\t.\t.\t{}",
                o.query_id, o.class
            )?,
        }
    }
    Ok(())
}

pub fn write_tally<W: Write>(mut w: W, tally: &Tally) -> io::Result<()> {
    writeln!(w, "#exact\tone_mismatch\ttwo_mismatch\tnot_significant")?;
    writeln!(
        w,
        "{}\t{}\t{}\t{}",
        tally.exact, tally.one_mismatch, tally.two_mismatch, tally.not_significant
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::normalize;

    fn ns(s: &str) -> NucleotideString {
        normalize(s).unwrap()
    }

    #[test]
    fn index_examples() {
        let idx = build_index(&ns("ACGUACGU"), 7).unwrap();
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.positions(b"ACGUACG"), vec![1]);
        assert_eq!(idx.positions(b"CGUACGU"), vec![2]);

        let idx = build_index(&ns("ACGNACGUACGU"), 7).unwrap();
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.positions(b"ACGUACG"), vec![5]);

        assert_eq!(
            build_index(&ns("ACG"), 7).unwrap_err(),
            SearchError::SubjectTooShort {
                len: 3,
                word_size: 7
            }
        );
        assert_eq!(
            build_index(&ns("ACGUACGU"), 3).unwrap_err(),
            SearchError::InvalidWordSize(3)
        );
    }

    #[test]
    fn sparse_index_matches_dense_layout() {
        let s = ns("ACGUUGCAACGGUUACGUUGCAACGGUUAACC");
        let idx = build_index(&s, 14).unwrap();
        let k = &s.as_bytes()[0..14];
        assert_eq!(idx.positions(k), vec![1, 15]);
        let seeds = seed_hits(&ns("ACGUUGCAACGGUUA"), &idx, Strand::Forward);
        assert_eq!(seeds.len(), 4);
    }

    #[test]
    fn extension_stops_at_flanks() {
        let sc = ScoringScheme::default();
        // seed core GUACGUA flanked by mismatches on both sides
        let q = ns("AAGUACGUAAA");
        let s = ns("CCGUACGUACC");
        let seed = SeedMatch {
            query_pos: 3,
            subject_pos: 3,
            strand: Strand::Forward,
        };
        let al = extend_hit(&seed, &q, &s, &sc, 20, 7);
        assert_eq!((al.score, al.len(), al.a_start, al.b_start), (35, 7, 3, 3));
    }

    #[test]
    fn overlap_and_length_filters() {
        assert!(length_diff_filter(22, 22));
        assert!(length_diff_filter(22, 24));
        assert!(!length_diff_filter(22, 25));
        assert!(length_diff_filter(24, 22));
    }

    #[test]
    fn evalue_formatting() {
        assert_eq!(format_evalue(3.94e-4), "3.94e-4");
        assert_eq!(format_evalue(0.0123), "0.0123");
        assert_eq!(format_evalue(1.5), "1.50");
        assert_eq!(format_evalue(9.2), "9.20");
        assert_eq!(format_evalue(123.4), "123");
        assert_eq!(format_evalue(0.0), "0.00e0");
    }

    #[test]
    fn classify_by_deviation() {
        let fp = |mismatches, gaps, overlap| MatureFootprint {
            overlap,
            hit_mature_len: overlap,
            mismatches,
            gaps,
        };
        assert_eq!(classify_match(Some((&fp(0, 0, 22), 22))), MatchClass::Exact);
        assert_eq!(
            classify_match(Some((&fp(1, 0, 22), 22))),
            MatchClass::OneMismatch
        );
        assert_eq!(
            classify_match(Some((&fp(0, 0, 21), 22))),
            MatchClass::OneMismatch
        );
        assert_eq!(
            classify_match(Some((&fp(2, 0, 22), 22))),
            MatchClass::TwoMismatch
        );
        assert_eq!(
            classify_match(Some((&fp(1, 1, 22), 22))),
            MatchClass::TwoMismatch
        );
        assert_eq!(
            classify_match(Some((&fp(3, 0, 22), 22))),
            MatchClass::NotSignificant
        );
        assert_eq!(classify_match(None), MatchClass::NotSignificant);
    }

    #[test]
    fn calibrate_rejects_non_negative_expectation() {
        let sc = ScoringScheme::new(1, 0, 0, 0);
        assert_eq!(
            calibrate(&sc, uniform_background::<f64>(), 0.1).unwrap_err(),
            SearchError::NonNegativeExpectedScore
        );
        assert_eq!(
            calibrate(&ScoringScheme::default(), [0.5f64, 0.5, 0.5, 0.5], 0.1).unwrap_err(),
            SearchError::InvalidBackground
        );
    }

    #[test]
    fn calibrate_in_single_precision() {
        let p = calibrate(
            &ScoringScheme::new(1, -1, 0, 0),
            uniform_background::<f32>(),
            0.1,
        )
        .unwrap();
        assert!((p.lambda - 3f32.ln()).abs() < 1e-5);
    }
}
