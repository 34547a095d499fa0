//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use hexamir::ScoringScheme;
use rand::Rng;

pub const BASES: [u8; 4] = *b"ACGU";

pub fn random_seq<R: Rng>(rng: &mut R, len: usize) -> String {
    (0..len)
        .map(|_| BASES[rng.gen_range(0..4)] as char)
        .collect()
}

fn sub(s: &ScoringScheme, x: u8, y: u8) -> i64 {
    if x == y && x != b'N' {
        s.match_score as i64
    } else {
        s.mismatch_score as i64
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Last {
    Start,
    Pair,
    GapA,
    GapB,
}

/// Best (global, local) scores over every alignment of `a` and `b`,
/// enumerated one by one.
///
/// Local scores come from the observation that every local alignment is a
/// window of some global alignment that starts and ends with a pair
/// column; the window optimum is tracked while walking each path.
pub fn brute_force_scores(a: &[u8], b: &[u8], s: &ScoringScheme) -> (i64, i64) {
    struct Walk<'a> {
        a: &'a [u8],
        b: &'a [u8],
        s: &'a ScoringScheme,
        best_global: i64,
        best_local: i64,
    }
    fn go(
        w: &mut Walk<'_>,
        i: usize,
        j: usize,
        last: Last,
        global: i64,
        window: Option<i64>,
        best_window: i64,
    ) {
        if i == w.a.len() && j == w.b.len() {
            w.best_global = w.best_global.max(global);
            w.best_local = w.best_local.max(best_window);
            return;
        }
        let open = w.s.gap_open as i64;
        let ext = w.s.gap_extend as i64;
        if i < w.a.len() && j < w.b.len() {
            let v = sub(w.s, w.a[i], w.b[j]);
            let win = window.unwrap_or(0).max(0) + v;
            go(
                w,
                i + 1,
                j + 1,
                Last::Pair,
                global + v,
                Some(win),
                best_window.max(win),
            );
        }
        if j < w.b.len() {
            let c = if last == Last::GapA { ext } else { open + ext };
            go(
                w,
                i,
                j + 1,
                Last::GapA,
                global - c,
                window.map(|x| x - c),
                best_window,
            );
        }
        if i < w.a.len() {
            let c = if last == Last::GapB { ext } else { open + ext };
            go(
                w,
                i + 1,
                j,
                Last::GapB,
                global - c,
                window.map(|x| x - c),
                best_window,
            );
        }
    }
    let mut w = Walk {
        a,
        b,
        s,
        best_global: i64::MIN,
        best_local: 0,
    };
    go(&mut w, 0, 0, Last::Start, 0, None, 0);
    (w.best_global, w.best_local)
}

/// Score of a rendered pairwise alignment, recomputed from its columns.
pub fn column_score(aligned_a: &str, aligned_b: &str, s: &ScoringScheme) -> i64 {
    let mut total = 0i64;
    let mut prev: Option<u8> = None;
    for (x, y) in aligned_a.bytes().zip(aligned_b.bytes()) {
        let kind = if x == b'-' {
            b'a'
        } else if y == b'-' {
            b'b'
        } else {
            b'p'
        };
        total += match kind {
            b'p' => sub(s, x, y),
            k if prev == Some(k) => -(s.gap_extend as i64),
            _ => -(s.gap_open as i64 + s.gap_extend as i64),
        };
        prev = Some(kind);
    }
    total
}

pub fn degap(s: &str) -> String {
    s.chars().filter(|&c| c != '-').collect()
}

/// All 1-based start positions of exact `w`-mer matches, N-free.
pub fn brute_force_seeds(query: &[u8], subject: &[u8], w: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if query.len() < w || subject.len() < w {
        return out;
    }
    for j in 0..=subject.len() - w {
        for i in 0..=query.len() - w {
            let q = &query[i..i + w];
            if q == &subject[j..j + w] && !q.contains(&b'N') {
                out.push((i + 1, j + 1));
            }
        }
    }
    out
}

/// Corpus of mature records where each `(mask, count)` entry contributes
/// `count` fresh random 22-mers to every species whose bit is set.
pub fn venn_corpus(species: &[&str], regions: &[(u32, usize)], seed: u64) -> hexamir::Corpus {
    use hexamir::seqio::{assemble_corpus, SeqKind, SeqRecord};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut used = std::collections::HashSet::new();
    let mut recs = Vec::new();
    let mut n = 0;
    for &(mask, count) in regions {
        for _ in 0..count {
            let seq = loop {
                let s = random_seq(&mut rng, 22);
                if used.insert(s.clone()) {
                    break s;
                }
            };
            for (i, sp) in species.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    n += 1;
                    recs.push(SeqRecord::new(
                        &format!("{sp}-miR-{n}"),
                        SeqKind::Mature,
                        seq.parse().unwrap(),
                    ));
                }
            }
        }
    }
    assemble_corpus(recs, Vec::new()).unwrap()
}
