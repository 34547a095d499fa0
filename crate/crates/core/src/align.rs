//! Affine-gap dynamic-programming kernels: global, local and
//! profile-profile alignment.
//!
//! All three share one three-state (Gotoh) engine that is generic over the
//! score scalar. Traceback ties prefer the diagonal, then a gap in `a`,
//! then a gap in `b`. A gap run of length `L` costs `gap_open + L * gap_extend`.

use serde::Serialize;

use crate::scalar::{AlignScalar, Real};
use crate::seqio::NucleotideString;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("alignment is empty")]
    EmptyAlignment,
    #[error("invalid scoring scheme: {0}")]
    InvalidScheme(&'static str),
}

/// Match/mismatch scores and affine gap penalties (penalties are positive
/// and subtracted).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScoringScheme {
    pub match_score: i32,
    pub mismatch_score: i32,
    pub gap_open: i32,
    pub gap_extend: i32,
}

impl Default for ScoringScheme {
    fn default() -> Self {
        Self {
            match_score: 5,
            mismatch_score: -4,
            gap_open: 10,
            gap_extend: 1,
        }
    }
}

impl ScoringScheme {
    pub fn new(match_score: i32, mismatch_score: i32, gap_open: i32, gap_extend: i32) -> Self {
        Self {
            match_score,
            mismatch_score,
            gap_open,
            gap_extend,
        }
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if self.match_score <= 0 {
            return Err(AlignError::InvalidScheme("match score must be positive"));
        }
        if self.mismatch_score >= 0 {
            return Err(AlignError::InvalidScheme("mismatch score must be negative"));
        }
        if self.gap_open < 0 || self.gap_extend < 0 {
            return Err(AlignError::InvalidScheme(
                "gap penalties must be non-negative",
            ));
        }
        if self.match_score + 3 * self.mismatch_score >= 0 {
            return Err(AlignError::InvalidScheme(
                "expected score under a uniform background must be negative",
            ));
        }
        Ok(())
    }

    /// Substitution score. `N` never matches, not even itself.
    #[inline]
    pub fn substitution(&self, a: u8, b: u8) -> i32 {
        if a == b && a != b'N' {
            self.match_score
        } else {
            self.mismatch_score
        }
    }

    pub fn gap_cost(&self, len: usize) -> i32 {
        if len == 0 {
            0
        } else {
            self.gap_open + self.gap_extend * len as i32
        }
    }
}

/// One alignment column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignOp {
    /// Residue of `a` against residue of `b`.
    Pair,
    /// Gap in `a` against a residue of `b`.
    GapInA,
    /// Residue of `a` against a gap in `b`.
    GapInB,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Global,
    Local,
}

const FROM_M: u8 = 0;
const FROM_X: u8 = 1;
const FROM_Y: u8 = 2;
const FROM_START: u8 = 3;

pub(crate) struct Traced<S> {
    pub score: S,
    pub ops: Vec<AlignOp>,
    /// 0-based half-open spans consumed in `a` and `b`.
    pub a_span: (usize, usize),
    pub b_span: (usize, usize),
}

#[inline]
fn pick3<S: AlignScalar>(m: S, x: S, y: S) -> (S, u8) {
    let mut best = (m, FROM_M);
    if x > best.0 {
        best = (x, FROM_X);
    }
    if y > best.0 {
        best = (y, FROM_Y);
    }
    best
}

/// Three-state affine engine. `sub(i, j)` scores `a[i]` against `b[j]`
/// (0-based). State M ends in a pair, X in a gap in `a`, Y in a gap in `b`.
fn gotoh<S: AlignScalar>(
    n: usize,
    m: usize,
    sub: impl Fn(usize, usize) -> S,
    open: S,
    extend: S,
    mode: Mode,
) -> Traced<S> {
    let neg = S::neg_inf();
    let zero = S::zero();
    let w = m + 1;
    // per cell: bits 0-1 M source, 2-3 X source, 4-5 Y source
    let mut trace = vec![0u8; (n + 1) * w];

    let mut pm = vec![neg; w];
    let mut px = vec![neg; w];
    let mut py = vec![neg; w];
    let mut cm = vec![neg; w];
    let mut cx = vec![neg; w];
    let mut cy = vec![neg; w];

    if mode == Mode::Global {
        pm[0] = zero;
        for j in 1..=m {
            let (v, src) = pick3(
                pm[j - 1] - open - extend,
                px[j - 1] - extend,
                py[j - 1] - open - extend,
            );
            px[j] = v;
            trace[j] |= src << 2;
        }
    }

    let mut best_local = (zero, 0usize, 0usize);

    for i in 1..=n {
        cm[0] = neg;
        cx[0] = neg;
        if mode == Mode::Global {
            let (v, src) = pick3(pm[0] - open - extend, px[0] - open - extend, py[0] - extend);
            cy[0] = v;
            trace[i * w] |= src << 4;
        } else {
            cy[0] = neg;
        }
        for j in 1..=m {
            let cell = i * w + j;
            let (mut diag, mut msrc) = pick3(pm[j - 1], px[j - 1], py[j - 1]);
            if mode == Mode::Local && !(diag > zero) {
                diag = zero;
                msrc = FROM_START;
            }
            let mv = diag + sub(i - 1, j - 1);
            let (xv, xsrc) = pick3(
                cm[j - 1] - open - extend,
                cx[j - 1] - extend,
                cy[j - 1] - open - extend,
            );
            let (yv, ysrc) = pick3(pm[j] - open - extend, px[j] - open - extend, py[j] - extend);
            cm[j] = mv;
            cx[j] = xv;
            cy[j] = yv;
            trace[cell] = msrc | (xsrc << 2) | (ysrc << 4);
            if mode == Mode::Local && mv > best_local.0 {
                best_local = (mv, i, j);
            }
        }
        std::mem::swap(&mut pm, &mut cm);
        std::mem::swap(&mut px, &mut cx);
        std::mem::swap(&mut py, &mut cy);
    }

    let (score, mut i, mut j, mut state) = match mode {
        Mode::Global => {
            let (v, s) = pick3(pm[m], px[m], py[m]);
            (v, n, m, s)
        }
        Mode::Local => {
            let (v, i, j) = best_local;
            if !(v > zero) {
                return Traced {
                    score: zero,
                    ops: Vec::new(),
                    a_span: (0, 0),
                    b_span: (0, 0),
                };
            }
            (v, i, j, FROM_M)
        }
    };
    let (a_end, b_end) = (i, j);

    let mut ops = Vec::with_capacity(n + m);
    loop {
        if mode == Mode::Global && i == 0 && j == 0 {
            break;
        }
        let t = trace[i * w + j];
        match state {
            FROM_M => {
                ops.push(AlignOp::Pair);
                state = t & 3;
                i -= 1;
                j -= 1;
                if state == FROM_START {
                    break;
                }
            }
            FROM_X => {
                ops.push(AlignOp::GapInA);
                state = (t >> 2) & 3;
                j -= 1;
            }
            _ => {
                ops.push(AlignOp::GapInB);
                state = (t >> 4) & 3;
                i -= 1;
            }
        }
        if mode == Mode::Global && state == FROM_M && i == 0 && j == 0 {
            break;
        }
    }
    ops.reverse();
    Traced {
        score,
        ops,
        a_span: (i, a_end),
        b_span: (j, b_end),
    }
}

/// A pairwise alignment with 1-based inclusive spans into the originals.
/// An empty local alignment has all spans set to 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairwiseAlignment {
    pub aligned_a: String,
    pub aligned_b: String,
    pub a_start: usize,
    pub a_end: usize,
    pub b_start: usize,
    pub b_end: usize,
    pub score: i32,
    pub identities: usize,
    pub mismatches: usize,
    pub gap_columns: usize,
}

impl PairwiseAlignment {
    pub fn len(&self) -> usize {
        self.aligned_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aligned_a.is_empty()
    }

    pub(crate) fn empty() -> Self {
        Self {
            aligned_a: String::new(),
            aligned_b: String::new(),
            a_start: 0,
            a_end: 0,
            b_start: 0,
            b_end: 0,
            score: 0,
            identities: 0,
            mismatches: 0,
            gap_columns: 0,
        }
    }

    /// Builds an alignment from columns over `a[a0..]` and `b[b0..]`
    /// (0-based offsets), counting identities and scoring under `scheme`.
    pub(crate) fn from_ops(
        a: &[u8],
        b: &[u8],
        a0: usize,
        b0: usize,
        ops: &[AlignOp],
        scheme: &ScoringScheme,
    ) -> Self {
        if ops.is_empty() {
            return Self::empty();
        }
        let mut aligned_a = String::with_capacity(ops.len());
        let mut aligned_b = String::with_capacity(ops.len());
        let (mut i, mut j) = (a0, b0);
        let (mut ident, mut mism, mut gaps) = (0, 0, 0);
        for op in ops {
            match op {
                AlignOp::Pair => {
                    aligned_a.push(a[i] as char);
                    aligned_b.push(b[j] as char);
                    if scheme.substitution(a[i], b[j]) == scheme.match_score && a[i] == b[j] {
                        ident += 1;
                    } else {
                        mism += 1;
                    }
                    i += 1;
                    j += 1;
                }
                AlignOp::GapInA => {
                    aligned_a.push('-');
                    aligned_b.push(b[j] as char);
                    gaps += 1;
                    j += 1;
                }
                AlignOp::GapInB => {
                    aligned_a.push(a[i] as char);
                    aligned_b.push('-');
                    gaps += 1;
                    i += 1;
                }
            }
        }
        let mut al = Self {
            aligned_a,
            aligned_b,
            a_start: a0 + 1,
            a_end: i,
            b_start: b0 + 1,
            b_end: j,
            score: 0,
            identities: ident,
            mismatches: mism,
            gap_columns: gaps,
        };
        al.score = al.rescore(scheme);
        al
    }

    /// Score recomputed column by column; each maximal run of gaps on the
    /// same side is charged `gap_open` once plus `gap_extend` per column.
    pub fn rescore(&self, scheme: &ScoringScheme) -> i32 {
        let mut score = 0;
        let mut prev: Option<AlignOp> = None;
        for (x, y) in self.aligned_a.bytes().zip(self.aligned_b.bytes()) {
            let op = match (x, y) {
                (b'-', _) => AlignOp::GapInA,
                (_, b'-') => AlignOp::GapInB,
                _ => AlignOp::Pair,
            };
            score += match op {
                AlignOp::Pair => scheme.substitution(x, y),
                _ if prev == Some(op) => -scheme.gap_extend,
                _ => -scheme.gap_open - scheme.gap_extend,
            };
            prev = Some(op);
        }
        score
    }

    pub fn ops(&self) -> Vec<AlignOp> {
        self.aligned_a
            .bytes()
            .zip(self.aligned_b.bytes())
            .map(|(x, y)| match (x, y) {
                (b'-', _) => AlignOp::GapInA,
                (_, b'-') => AlignOp::GapInB,
                _ => AlignOp::Pair,
            })
            .collect()
    }
}

/// Optimal end-to-end alignment with affine gaps.
pub fn global_align(
    a: &NucleotideString,
    b: &NucleotideString,
    scheme: &ScoringScheme,
) -> PairwiseAlignment {
    global_align_bytes(a.as_bytes(), b.as_bytes(), scheme)
}

pub(crate) fn global_align_bytes(a: &[u8], b: &[u8], scheme: &ScoringScheme) -> PairwiseAlignment {
    let t = gotoh(
        a.len(),
        b.len(),
        |i, j| scheme.substitution(a[i], b[j]),
        scheme.gap_open,
        scheme.gap_extend,
        Mode::Global,
    );
    let al = PairwiseAlignment::from_ops(a, b, 0, 0, &t.ops, scheme);
    debug_assert_eq!(al.score, t.score);
    al
}

/// Optimal local alignment with affine gaps; empty when nothing scores
/// above zero.
pub fn local_align(
    a: &NucleotideString,
    b: &NucleotideString,
    scheme: &ScoringScheme,
) -> PairwiseAlignment {
    local_align_bytes(a.as_bytes(), b.as_bytes(), scheme)
}

pub(crate) fn local_align_bytes(a: &[u8], b: &[u8], scheme: &ScoringScheme) -> PairwiseAlignment {
    let t = gotoh(
        a.len(),
        b.len(),
        |i, j| scheme.substitution(a[i], b[j]),
        scheme.gap_open,
        scheme.gap_extend,
        Mode::Local,
    );
    let al = PairwiseAlignment::from_ops(a, b, t.a_span.0, t.b_span.0, &t.ops, scheme);
    debug_assert_eq!(al.score, t.score);
    al
}

/// identities / alignment length.
pub fn fractional_identity<T: Real>(al: &PairwiseAlignment) -> Result<T, AlignError> {
    let len = al.identities + al.mismatches + al.gap_columns;
    if len == 0 {
        return Err(AlignError::EmptyAlignment);
    }
    Ok(T::from_count(al.identities) / T::from_count(len))
}

/// Profile symbol order.
pub const PROFILE_SYMBOLS: [u8; 6] = *b"ACGUN-";
const GAP: usize = 5;

fn symbol_index(b: u8) -> usize {
    match b {
        b'A' => 0,
        b'C' => 1,
        b'G' => 2,
        b'U' => 3,
        b'N' => 4,
        _ => GAP,
    }
}

/// A set of equal-length gapped rows with per-column symbol frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile<T> {
    rows: Vec<(String, Vec<u8>)>,
    columns: Vec<[T; 6]>,
}

impl<T: Real> Profile<T> {
    pub fn from_sequence(id: &str, seq: &NucleotideString) -> Self {
        Self::from_rows(vec![(id.to_owned(), seq.as_bytes().to_vec())])
    }

    /// Rows must be non-empty and of equal length.
    pub fn from_rows(rows: Vec<(String, Vec<u8>)>) -> Self {
        assert!(!rows.is_empty(), "profile needs at least one row");
        let width = rows[0].1.len();
        assert!(
            rows.iter().all(|r| r.1.len() == width),
            "ragged profile rows"
        );
        let inv = T::one() / T::from_count(rows.len());
        let mut columns = vec![[T::zero(); 6]; width];
        for (_, row) in &rows {
            for (c, &b) in row.iter().enumerate() {
                columns[c][symbol_index(b)] = columns[c][symbol_index(b)] + inv;
            }
        }
        Self { rows, columns }
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[[T; 6]] {
        &self.columns
    }

    pub fn rows(&self) -> &[(String, Vec<u8>)] {
        &self.rows
    }

    pub fn member_ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|(id, _)| id.as_str())
    }

    pub fn into_rows(self) -> Vec<(String, Vec<u8>)> {
        self.rows
    }
}

/// Result of merging two profiles.
#[derive(Debug, Clone)]
pub struct ProfileAlignment<T> {
    pub profile: Profile<T>,
    pub score: T,
    /// For each merged column, the source column in `p` and in `q`.
    pub mapping: Vec<(Option<usize>, Option<usize>)>,
}

fn symbol_scores<T: Real>(scheme: &ScoringScheme) -> [[T; 6]; 6] {
    let mut s = [[T::zero(); 6]; 6];
    for (x, &bx) in PROFILE_SYMBOLS.iter().enumerate() {
        for (y, &by) in PROFILE_SYMBOLS.iter().enumerate() {
            s[x][y] = match (x == GAP, y == GAP) {
                (true, true) => T::zero(),
                (true, false) | (false, true) => -T::from_score(scheme.gap_extend),
                _ => T::from_score(scheme.substitution(bx, by)),
            };
        }
    }
    s
}

/// Aligns two profiles globally. Column scores are frequency-weighted
/// sums of pair scores; existing gaps cost `gap_extend` against residues
/// and nothing against gaps. New gap columns pay the affine penalty.
pub fn profile_align<T: Real>(
    p: &Profile<T>,
    q: &Profile<T>,
    scheme: &ScoringScheme,
) -> ProfileAlignment<T> {
    assert!(p.width() > 0 && q.width() > 0, "profiles must be non-empty");
    let s = symbol_scores::<T>(scheme);
    // expected score of each symbol against each q column
    let q_weights: Vec<[T; 6]> = q
        .columns
        .iter()
        .map(|col| {
            let mut w = [T::zero(); 6];
            for x in 0..6 {
                w[x] = (0..6).map(|y| col[y] * s[x][y]).sum();
            }
            w
        })
        .collect();
    let t = gotoh(
        p.width(),
        q.width(),
        |i, j| {
            let pc = &p.columns[i];
            let qw = &q_weights[j];
            (0..6).map(|x| pc[x] * qw[x]).sum()
        },
        T::from_score(scheme.gap_open),
        T::from_score(scheme.gap_extend),
        Mode::Global,
    );

    let mut mapping = Vec::with_capacity(t.ops.len());
    let (mut i, mut j) = (0, 0);
    for op in &t.ops {
        match op {
            AlignOp::Pair => {
                mapping.push((Some(i), Some(j)));
                i += 1;
                j += 1;
            }
            AlignOp::GapInA => {
                mapping.push((None, Some(j)));
                j += 1;
            }
            AlignOp::GapInB => {
                mapping.push((Some(i), None));
                i += 1;
            }
        }
    }
    let project =
        |rows: &[(String, Vec<u8>)],
         pick: &dyn Fn(&(Option<usize>, Option<usize>)) -> Option<usize>| {
            rows.iter()
                .map(|(id, row)| {
                    let body = mapping
                        .iter()
                        .map(|m| pick(m).map_or(b'-', |c| row[c]))
                        .collect::<Vec<u8>>();
                    (id.clone(), body)
                })
                .collect::<Vec<_>>()
        };
    let mut rows = project(&p.rows, &|m| m.0);
    rows.extend(project(&q.rows, &|m| m.1));
    ProfileAlignment {
        profile: Profile::from_rows(rows),
        score: t.score,
        mapping,
    }
}
