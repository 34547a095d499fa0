//! Homology analysis of miRNA corpora.
//!
//! The pipeline runs in four independent stages that share the sequence
//! model in [`seqio`]:
//!
//! - [`search`]: seed-and-extend search of query miRNAs against long
//!   subjects, filtered and classified by deviation from the mature.
//! - [`msa`]: distance matrix, neighbor-joining guide tree, progressive
//!   alignment and cluster extraction.
//! - [`conservation`]: conserved blocks of an alignment and where the
//!   mature sequences fall relative to them.
//! - [`setops`]: mature sequences shared between species.
//!
//! Numeric code is generic over [`scalar::Real`]; the aliases below fix it
//! to `f64`.

pub mod align;
pub mod conservation;
pub mod msa;
pub mod scalar;
pub mod search;
pub mod seqio;
pub mod setops;
pub mod synth;

pub use align::{global_align, local_align, AlignError, AlignOp, PairwiseAlignment, ScoringScheme};
pub use msa::{Cluster, Msa, MsaError, MsaRow};
pub use search::{MatchClass, SearchError, SeedMatch, Strand, Strands, Tally};
pub use seqio::{Corpus, MatureAnnotation, NucleotideString, SeqError, SeqKind, SeqRecord};
pub use setops::{IntersectionReport, MatureKey};

pub type Profile = align::Profile<f64>;
pub type ProfileAlignment = align::ProfileAlignment<f64>;
pub type DistanceMatrix = msa::DistanceMatrix<f64>;
pub type GuideTree = msa::GuideTree<f64>;
pub type KarlinAltschulParams = search::KarlinAltschulParams<f64>;
pub type SearchParams = search::SearchParams<f64>;
pub type SearchHit = search::SearchHit<f64>;
pub type SearchReport = search::SearchReport<f64>;
pub type ConservationProfile = conservation::ConservationProfile<f64>;
pub type ConservedBlock = conservation::ConservedBlock<f64>;

pub type ProfileF32 = align::Profile<f32>;
pub type DistanceMatrixF32 = msa::DistanceMatrix<f32>;
pub type GuideTreeF32 = msa::GuideTree<f32>;
