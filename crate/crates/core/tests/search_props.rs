mod common;

use common::{brute_force_seeds, random_seq};
use hexamir::search::{
    build_index, calibrate, classify_match, e_value, extend_hit, lambda_residual,
    length_diff_filter, search, search_many, seed_hits, strand_hits, uniform_background,
    write_hit_report, MatchClass, MatureFootprint, Query, SearchError, SearchParams, SeedMatch,
    Strand,
};
use hexamir::seqio::{assemble_corpus, Corpus, MatureAnnotation, SeqKind, SeqRecord};
use hexamir::{NucleotideString, ScoringScheme};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LET7: &str = "UGAGGUAGUAGGUUGUAUAGU";

fn ns(s: &str) -> NucleotideString {
    s.parse().unwrap()
}

fn rc(s: &str) -> String {
    ns(s).reverse_complement().as_str().to_owned()
}

/// Best ungapped extent around a seed by trying every left/right length.
fn best_extent(q: &[u8], s: &[u8], seed: &SeedMatch, w: usize, sc: &ScoringScheme) -> (i32, usize) {
    let (q0, s0) = (seed.query_pos - 1, seed.subject_pos - 1);
    let score = |l: usize, r: usize| -> i32 {
        (0..l + w + r)
            .map(|k| sc.substitution(q[q0 - l + k], s[s0 - l + k]))
            .sum()
    };
    let mut best = (i32::MIN, 0);
    for l in 0..=q0.min(s0) {
        for r in 0..=(q.len() - q0 - w).min(s.len() - s0 - w) {
            let v = score(l, r);
            if v > best.0 || (v == best.0 && l + w + r < best.1) {
                best = (v, l + w + r);
            }
        }
    }
    best
}

fn mature_corpus(ids_seqs: &[(&str, &str)]) -> Corpus {
    let recs = ids_seqs
        .iter()
        .map(|(id, s)| SeqRecord::new(id, SeqKind::Mature, ns(s)))
        .collect();
    assemble_corpus(recs, Vec::new()).unwrap()
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

    assert!(matches!(
        build_index(&ns("ACG"), 7),
        Err(SearchError::SubjectTooShort { .. })
    ));
}

#[test]
fn planted_seeds_on_one_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let subject = format!(
        "{}{}{}",
        random_seq(&mut rng, 300),
        LET7,
        random_seq(&mut rng, 300)
    );
    let idx = build_index(&ns(&subject), 7).unwrap();
    let fwd = seed_hits(&ns(LET7), &idx, Strand::Forward);
    let on_diag = fwd
        .iter()
        .filter(|s| s.subject_pos - s.query_pos == 300)
        .count();
    assert_eq!(on_diag, 15);
    let oracle = brute_force_seeds(LET7.as_bytes(), subject.as_bytes(), 7);
    assert_eq!(
        fwd.iter()
            .map(|s| (s.query_pos, s.subject_pos))
            .collect::<Vec<_>>(),
        oracle
    );

    // planted as reverse complement
    let subject = format!(
        "{}{}{}",
        random_seq(&mut rng, 300),
        rc(LET7),
        random_seq(&mut rng, 300)
    );
    let idx = build_index(&ns(&subject), 7).unwrap();
    let fwd = seed_hits(&ns(LET7), &idx, Strand::Forward);
    let rev = seed_hits(&ns(LET7), &idx, Strand::ReverseComplement);
    assert_eq!(
        rev.iter()
            .filter(|s| s.subject_pos - s.query_pos == 300)
            .count(),
        15
    );
    assert!(fwd
        .iter()
        .all(|s| s.subject_pos < 300 || s.subject_pos > 321));
    let oracle = brute_force_seeds(rc(LET7).as_bytes(), subject.as_bytes(), 7);
    assert_eq!(
        rev.iter()
            .map(|s| (s.query_pos, s.subject_pos))
            .collect::<Vec<_>>(),
        oracle
    );

    let idx = build_index(&ns(&"A".repeat(100)), 7).unwrap();
    assert!(seed_hits(&ns(&"C".repeat(21)), &idx, Strand::Forward).is_empty());
}

#[test]
fn extension_examples() {
    let sc = ScoringScheme::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let left = random_seq(&mut rng, 150);
    let right = random_seq(&mut rng, 150);

    let subject = format!("{left}{LET7}{right}");
    let seed = SeedMatch {
        query_pos: 8,
        subject_pos: 158,
        strand: Strand::Forward,
    };
    let al = extend_hit(&seed, &ns(LET7), &ns(&subject), &sc, 20, 7);
    assert_eq!(
        (al.score, al.len(), al.b_start, al.b_end),
        (105, 21, 151, 171)
    );
    assert_eq!(
        best_extent(LET7.as_bytes(), subject.as_bytes(), &seed, 7, &sc),
        (105, 21)
    );

    let mut mutated = LET7.as_bytes().to_vec();
    mutated[10] = if mutated[10] == b'A' { b'C' } else { b'A' };
    let subject = format!("{left}{}{right}", String::from_utf8(mutated).unwrap());
    let seed = SeedMatch {
        query_pos: 1,
        subject_pos: 151,
        strand: Strand::Forward,
    };
    let al = extend_hit(&seed, &ns(LET7), &ns(&subject), &sc, 20, 7);
    assert_eq!((al.score, al.len(), al.mismatches), (96, 21, 1));
    assert_eq!(
        best_extent(LET7.as_bytes(), subject.as_bytes(), &seed, 7, &sc),
        (96, 21)
    );

    let q = "CCCCACGUACGCCCC";
    let s = "GGGGACGUACGGGGG";
    let seed = SeedMatch {
        query_pos: 5,
        subject_pos: 5,
        strand: Strand::Forward,
    };
    let al = extend_hit(&seed, &ns(q), &ns(s), &sc, 20, 7);
    assert_eq!((al.score, al.len()), (35, 7));
    assert_eq!(
        best_extent(q.as_bytes(), s.as_bytes(), &seed, 7, &sc),
        (35, 7)
    );
}

/// Root of 0.25 e^{a l} + 0.75 e^{-b l} = 1 by Newton's method from a
/// start to the right of the root (the function is convex).
fn newton_lambda(a: f64, b: f64) -> f64 {
    let mut l: f64 = 5.0;
    for _ in 0..200 {
        let f = 0.25 * (a * l).exp() + 0.75 * (-b * l).exp() - 1.0;
        let df = 0.25 * a * (a * l).exp() - 0.75 * b * (-b * l).exp();
        l -= f / df;
    }
    l
}

#[test]
fn calibration_examples() {
    let p = calibrate(
        &ScoringScheme::new(1, -1, 0, 0),
        uniform_background::<f64>(),
        0.1,
    )
    .unwrap();
    assert!((p.lambda - 3f64.ln()).abs() < 1e-6);

    let sc = ScoringScheme::default();
    let p = calibrate(&sc, uniform_background::<f64>(), 0.1).unwrap();
    let residual = 0.25 * (5.0 * p.lambda).exp() + 0.75 * (-4.0 * p.lambda).exp() - 1.0;
    assert!(residual.abs() < 1e-9);
    assert!((p.lambda - newton_lambda(5.0, 4.0)).abs() < 1e-9);
    assert!((p.lambda - 0.1915).abs() < 5e-4);
    assert!(lambda_residual(&sc, &uniform_background::<f64>(), p.lambda).abs() < 1e-9);

    assert_eq!(
        calibrate(
            &ScoringScheme::new(1, 0, 0, 0),
            uniform_background::<f64>(),
            0.1
        )
        .unwrap_err(),
        SearchError::NonNegativeExpectedScore
    );
}

#[test]
fn e_value_examples() {
    let p = calibrate(&ScoringScheme::default(), uniform_background::<f64>(), 0.1).unwrap();
    let e = e_value(105, 21, 100_000, &p);
    let direct = 0.1 * 21.0 * 1e5 * (-p.lambda * 105.0).exp();
    assert!((e - direct).abs() <= 1e-15 * direct.max(1.0));
    assert!(e > 3e-4 && e < 5e-4, "{e}");
    assert!((e_value(105, 21, 200_000, &p) - 2.0 * e).abs() < 1e-15);
    for s in 0..200 {
        assert!(e_value(s + 1, 21, 100_000, &p) < e_value(s, 21, 100_000, &p));
    }
}

#[test]
fn filter_and_class_examples() {
    assert!(length_diff_filter(22, 22));
    assert!(length_diff_filter(22, 24));
    assert!(!length_diff_filter(22, 25));
    let full = MatureFootprint {
        overlap: 21,
        hit_mature_len: 21,
        mismatches: 0,
        gaps: 0,
    };
    assert_eq!(classify_match(Some((&full, 21))), MatchClass::Exact);
    let two = MatureFootprint {
        mismatches: 2,
        ..full
    };
    assert_eq!(classify_match(Some((&two, 21))), MatchClass::TwoMismatch);
    assert_eq!(classify_match(None), MatchClass::NotSignificant);
}

#[test]
fn hits_outside_the_mature_are_discarded() {
    // precursor whose mature is at 41..61; the subject only contains the loop
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let loop_part = random_seq(&mut rng, 40);
    let precursor = format!("{loop_part}{LET7}{}", random_seq(&mut rng, 20));
    let rec = SeqRecord::new("bmo-mir-let7", SeqKind::Precursor, ns(&precursor));
    let ann = MatureAnnotation::new("bmo-mir-let7", "bmo-let-7", 41, 61);
    let corpus = assemble_corpus(vec![rec], vec![ann]).unwrap();
    let subject = format!(
        "{}{loop_part}{}",
        random_seq(&mut rng, 500),
        random_seq(&mut rng, 500)
    );
    let subject = SeqRecord::new("chr", SeqKind::Genome, ns(&subject));
    let queries = Query::all(&corpus, None).unwrap();
    let report = search::<f64>(&queries, &subject, &SearchParams::default()).unwrap();
    assert_eq!(report.outcomes[0].class, MatchClass::NotSignificant);
    assert!(report.outcomes[0].best.is_none());
}

#[test]
fn queries_without_shared_words_are_not_significant() {
    let subject = SeqRecord::new("chr", SeqKind::Genome, ns(&"A".repeat(5000)));
    let seqs: Vec<(String, String)> = (0..10)
        .map(|i| {
            (
                format!("q-{i}"),
                format!("{}{}", "CG".repeat(8), ["C", "G", "U"][i % 3].repeat(4 + i)),
            )
        })
        .collect();
    let refs: Vec<(&str, &str)> = seqs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let corpus = mature_corpus(&refs);
    let queries = Query::all(&corpus, None).unwrap();
    let report = search::<f64>(&queries, &subject, &SearchParams::default()).unwrap();
    assert_eq!(report.tally.not_significant, 10);
    assert_eq!(report.tally.total(), 10);
}

#[test]
fn several_subjects_form_one_search_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let chr1 = SeqRecord::new("chr1", SeqKind::Genome, ns(&random_seq(&mut rng, 30_000)));
    let mut s2 = random_seq(&mut rng, 20_000);
    s2.replace_range(999..1020, LET7);
    let chr2 = SeqRecord::new("chr2", SeqKind::Genome, ns(&s2));
    let tiny = SeqRecord::new("scaffold", SeqKind::Genome, ns("ACG"));
    let corpus = mature_corpus(&[("bmo-let-7", LET7), ("bmo-miR-x", "CCCCCCCCCCCCCCCCCCCC")]);
    let queries = Query::all(&corpus, None).unwrap();
    let report = search_many::<f64>(
        &queries,
        &[chr1, tiny, chr2.clone()],
        &SearchParams::default(),
    )
    .unwrap();
    assert_eq!(report.search_space, 50_003);
    let best = report.outcomes[0].best.as_ref().unwrap();
    assert_eq!(
        (best.subject_id.as_str(), best.subject_span()),
        ("chr2", (1000, 1020))
    );
    let single = search::<f64>(&queries, &chr2, &SearchParams::default()).unwrap();
    assert!(single.outcomes[0].best.as_ref().unwrap().e_value < best.e_value);

    let mut out = Vec::new();
    write_hit_report(&mut out, &report).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("#query_id\tsubject_id"));
    assert!(lines[1].starts_with("bmo-let-7\tchr2\tplus\t1\t21\t1000\t1020\t105\t"));
    assert!(lines[1].ends_with("\t0\t0\texact"));
    assert_eq!(
        lines[2],
        "bmo-miR-x\t.\t.\t.\t.\t.\t.\t.\t.\t.\t.\tnot_significant"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seeds_equal_brute_force(seed in any::<u64>(), qlen in 7usize..40, slen in 7usize..1000, w in 4usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_seq(&mut rng, qlen);
        let s: String = random_seq(&mut rng, slen)
            .chars()
            .map(|c| if rng.gen_ratio(1, 50) { 'N' } else { c })
            .collect();
        prop_assume!(q.len() >= w);
        let idx = build_index(&ns(&s), w).unwrap();
        for strand in [Strand::Forward, Strand::ReverseComplement] {
            let oriented = if strand == Strand::Forward { q.clone() } else { rc(&q) };
            let got: Vec<_> = seed_hits(&ns(&q), &idx, strand).iter().map(|m| (m.query_pos, m.subject_pos)).collect();
            let mut want = brute_force_seeds(oriented.as_bytes(), s.as_bytes(), w);
            want.sort_by_key(|&(qp, sp)| (sp, qp));
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn strand_involution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_seq(&mut rng, 22);
        let mut s = random_seq(&mut rng, 3000);
        let at = rng.gen_range(0..2900);
        s.replace_range(at..at + 22, &rc(&q));
        let sc = ScoringScheme::default();
        let idx = build_index(&ns(&s), 7).unwrap();
        let minus = strand_hits(&ns(&q), &ns(&s), &idx, Strand::ReverseComplement, &sc, 20, false);
        let plus_of_rc = strand_hits(&ns(&rc(&q)), &ns(&s), &idx, Strand::Forward, &sc, 20, false);
        prop_assert!(!minus.is_empty());
        prop_assert_eq!(minus, plus_of_rc);
    }

    #[test]
    fn planted_motif_is_recovered(seed in any::<u64>(), len in 18usize..=25, minus in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_seq(&mut rng, len);
        let mut s = random_seq(&mut rng, 50_000);
        let at = rng.gen_range(0..50_000 - len);
        let planted = if minus { rc(&q) } else { q.clone() };
        s.replace_range(at..at + len, &planted);
        let corpus = mature_corpus(&[("dme-miR-x", q.as_str())]);
        let subject = SeqRecord::new("chr", SeqKind::Genome, ns(&s));
        let queries = Query::all(&corpus, None).unwrap();
        let report = search::<f64>(&queries, &subject, &SearchParams::default()).unwrap();
        let best = report.outcomes[0].best.as_ref().unwrap();
        prop_assert_eq!(report.outcomes[0].class, MatchClass::Exact);
        prop_assert_eq!(best.subject_span(), (at + 1, at + len));
        prop_assert_eq!(best.query_span(), (1, len));
        prop_assert_eq!(best.strand, if minus { Strand::ReverseComplement } else { Strand::Forward });
    }

    #[test]
    fn higher_scores_never_have_higher_e(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_seq(&mut rng, 22);
        let s = random_seq(&mut rng, 20_000);
        let sc = ScoringScheme::default();
        let p = calibrate(&sc, uniform_background::<f64>(), 0.1).unwrap();
        let idx = build_index(&ns(&s), 7).unwrap();
        let mut hits = strand_hits(&ns(&q), &ns(&s), &idx, Strand::Forward, &sc, 20, false);
        hits.extend(strand_hits(&ns(&q), &ns(&s), &idx, Strand::ReverseComplement, &sc, 20, false));
        let scored: Vec<(i32, f64)> = hits.iter().map(|h| (h.score, e_value(h.score, 22, s.len(), &p))).collect();
        for a in &scored {
            for b in &scored {
                if a.0 > b.0 {
                    prop_assert!(a.1 <= b.1);
                }
            }
        }
    }

    #[test]
    fn tally_partitions_queries(seed in any::<u64>(), n in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_seq(&mut rng, 20_000);
        let seqs: Vec<(String, String)> = (0..n).map(|i| (format!("bmo-miR-{i}"), random_seq(&mut rng, 21))).collect();
        for (i, (_, q)) in seqs.iter().enumerate().take(n / 2) {
            let at = 500 + i * 700;
            s.replace_range(at..at + 21, q);
        }
        let refs: Vec<(&str, &str)> = seqs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let corpus = mature_corpus(&refs);
        let subject = SeqRecord::new("chr", SeqKind::Genome, ns(&s));
        let queries = Query::all(&corpus, None).unwrap();
        let report = search::<f64>(&queries, &subject, &SearchParams::default()).unwrap();
        prop_assert_eq!(report.tally.total(), n);
        prop_assert!(report.tally.exact >= n / 2);
    }
}
