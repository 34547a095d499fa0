//! Deterministic synthetic genomes with planted sequences, used as
//! stand-ins for real genome subjects.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::search::Strand;
use crate::seqio::{reverse_complement, NucleotideString, SeqError};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("plants {0} and {1} overlap")]
    Overlap(String, String),
    #[error("plant {0} does not fit in the genome")]
    OutOfBounds(String),
    #[error("plant {name}: mutation position {position} outside the planted sequence")]
    BadMutation { name: String, position: usize },
    #[error("genome length must be positive")]
    EmptyGenome,
    #[error("malformed plant spec {0:?}")]
    BadSpec(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Plant {
    pub name: String,
    pub sequence: NucleotideString,
    /// 1-based start on the forward genome.
    pub offset: usize,
    pub strand: Strand,
    /// 1-based positions within `sequence` to substitute.
    pub mutations: Vec<usize>,
}

impl Plant {
    /// Parses `name:sequence:offset[:strand[:pos,pos,...]]`, strand being
    /// `+` or `-`.
    pub fn parse(spec: &str) -> Result<Self, SynthError> {
        let bad = || SynthError::BadSpec(spec.to_owned());
        let parts: Vec<&str> = spec.split(':').collect();
        if !(3..=5).contains(&parts.len()) || parts[0].is_empty() {
            return Err(bad());
        }
        let sequence = crate::seqio::normalize(parts[1]).map_err(|_: SeqError| bad())?;
        let offset: usize = parts[2].parse().map_err(|_| bad())?;
        let strand = match parts.get(3).copied() {
            None | Some("+") | Some("") => Strand::Forward,
            Some("-") => Strand::ReverseComplement,
            _ => return Err(bad()),
        };
        let mutations = match parts.get(4) {
            Some(m) if !m.is_empty() => m
                .split(',')
                .map(|p| p.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?,
            _ => Vec::new(),
        };
        Ok(Self {
            name: parts[0].to_owned(),
            sequence,
            offset,
            strand,
            mutations,
        })
    }

    pub fn end(&self) -> usize {
        self.offset + self.sequence.len() - 1
    }

    /// The residues written into the genome, forward strand.
    pub fn planted(&self) -> Result<Vec<u8>, SynthError> {
        let mut s = self.sequence.as_bytes().to_vec();
        for &p in &self.mutations {
            if p == 0 || p > s.len() {
                return Err(SynthError::BadMutation {
                    name: self.name.clone(),
                    position: p,
                });
            }
            s[p - 1] = substitute(s[p - 1]);
        }
        Ok(match self.strand {
            Strand::Forward => s,
            Strand::ReverseComplement => reverse_complement(&s),
        })
    }
}

/// Fixed substitution used for mutations: A->C->G->U->A.
pub fn substitute(b: u8) -> u8 {
    match b {
        b'A' => b'C',
        b'C' => b'G',
        b'G' => b'U',
        _ => b'A',
    }
}

/// Uniform random genome from `seed`, with `plants` written over it.
pub fn generate_genome(
    seed: u64,
    length: usize,
    plants: &[Plant],
) -> Result<NucleotideString, SynthError> {
    if length == 0 {
        return Err(SynthError::EmptyGenome);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const BASES: [u8; 4] = *b"ACGU";
    let mut genome: Vec<u8> = (0..length).map(|_| BASES[rng.gen_range(0..4)]).collect();

    for p in plants {
        if p.offset == 0 || p.end() > length {
            return Err(SynthError::OutOfBounds(p.name.clone()));
        }
    }
    let mut order: Vec<&Plant> = plants.iter().collect();
    order.sort_by_key(|p| p.offset);
    for pair in order.windows(2) {
        if pair[1].offset <= pair[0].end() {
            return Err(SynthError::Overlap(
                pair[0].name.clone(),
                pair[1].name.clone(),
            ));
        }
    }
    for p in plants {
        let body = p.planted()?;
        genome[p.offset - 1..p.end()].copy_from_slice(&body);
    }
    Ok(NucleotideString::from_residues(genome).expect("generated residues are valid"))
}

/// `name<TAB>offset<TAB>end<TAB>strand<TAB>mutations<TAB>planted`.
pub fn write_manifest<W: Write>(mut w: W, plants: &[Plant]) -> io::Result<()> {
    writeln!(w, "#name\toffset\tend\tstrand\tmutations\tplanted")?;
    for p in plants {
        let muts = if p.mutations.is_empty() {
            ".".to_owned()
        } else {
            p.mutations
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let planted = p.planted().unwrap_or_default();
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.name,
            p.offset,
            p.end(),
            p.strand,
            muts,
            String::from_utf8_lossy(&planted)
        )?;
    }
    Ok(())
}
