//! Sequence corpora: normalization, FASTA and annotation parsing, and the
//! immutable [`Corpus`] every other module reads from.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::Serialize;

/// Largest record accepted, in residues.
pub const MAX_RECORD_LEN: usize = i32::MAX as usize;

/// Sanity range for a mature miRNA length.
pub const MATURE_LEN_RANGE: std::ops::RangeInclusive<usize> = 16..=30;

#[derive(Debug, thiserror::Error)]
pub enum SeqError {
    #[error("invalid residue {symbol:?} at position {position}")]
    InvalidResidue { position: usize, symbol: char },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("record {0} has no sequence")]
    EmptyRecord(String),
    #[error("duplicate record id {0}")]
    DuplicateId(String),
    #[error("record {0} is longer than {MAX_RECORD_LEN} residues")]
    RecordTooLarge(String),
    #[error("sequence data before the first '>' header (line {0})")]
    MissingHeader(usize),
    #[error("malformed annotation line {0}")]
    MalformedLine(usize),
    #[error("non-positive coordinate on annotation line {0}")]
    NonPositiveCoordinate(usize),
    #[error("annotation references unknown precursor {0}")]
    DanglingAnnotation(String),
    #[error("annotation {0} lies outside its precursor")]
    AnnotationOutOfRange(String),
    #[error("mature {id} has length {len}, outside 16..=30")]
    MatureLength { id: String, len: usize },
    #[error("record {id}: {source}")]
    InRecord {
        id: String,
        #[source]
        source: Box<SeqError>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An RNA string over `{A, C, G, U, N}`, never empty.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "String")]
pub struct NucleotideString(Vec<u8>);

impl NucleotideString {
    /// Wraps residues already known to be valid.
    pub fn from_residues(residues: Vec<u8>) -> Result<Self, SeqError> {
        if residues.is_empty() {
            return Err(SeqError::EmptySequence);
        }
        if let Some(p) = residues.iter().position(|b| !is_residue(*b)) {
            return Err(SeqError::InvalidResidue {
                position: p + 1,
                symbol: residues[p] as char,
            });
        }
        Ok(Self(residues))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        // only ASCII residues are ever stored
        std::str::from_utf8(&self.0).unwrap()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based inclusive slice.
    pub fn slice(&self, start: usize, end: usize) -> Option<NucleotideString> {
        if start == 0 || start > end || end > self.len() {
            return None;
        }
        Some(Self(self.0[start - 1..end].to_vec()))
    }

    pub fn reverse_complement(&self) -> NucleotideString {
        Self(reverse_complement(&self.0))
    }
}

impl fmt::Debug for NucleotideString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl fmt::Display for NucleotideString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<NucleotideString> for String {
    fn from(s: NucleotideString) -> String {
        s.as_str().to_owned()
    }
}

impl std::str::FromStr for NucleotideString {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize(s)
    }
}

pub fn is_residue(b: u8) -> bool {
    matches!(b, b'A' | b'C' | b'G' | b'U' | b'N')
}

pub fn complement(b: u8) -> u8 {
    match b {
        b'A' => b'U',
        b'U' => b'A',
        b'C' => b'G',
        b'G' => b'C',
        other => other,
    }
}

pub fn reverse_complement(residues: &[u8]) -> Vec<u8> {
    residues.iter().rev().map(|&b| complement(b)).collect()
}

/// Folds raw text to the canonical RNA alphabet.
///
/// Case is folded, `T` becomes `U`, whitespace and digits are dropped.
/// Positions in errors are 1-based character offsets into `raw`.
pub fn normalize(raw: &str) -> Result<NucleotideString, SeqError> {
    let mut out = Vec::with_capacity(raw.len());
    for (i, ch) in raw.chars().enumerate() {
        if ch.is_whitespace() || ch.is_ascii_digit() {
            continue;
        }
        let up = ch.to_ascii_uppercase();
        let b = match up {
            'A' | 'C' | 'G' | 'U' | 'N' => up as u8,
            'T' => b'U',
            _ => {
                return Err(SeqError::InvalidResidue {
                    position: i + 1,
                    symbol: ch,
                })
            }
        };
        out.push(b);
    }
    if out.is_empty() {
        return Err(SeqError::EmptySequence);
    }
    Ok(NucleotideString(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeqKind {
    Precursor,
    Mature,
    Genome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeqRecord {
    pub id: String,
    pub species: String,
    pub kind: SeqKind,
    pub residues: NucleotideString,
    pub description: String,
}

impl SeqRecord {
    pub fn new(id: &str, kind: SeqKind, residues: NucleotideString) -> Self {
        Self {
            id: id.to_owned(),
            species: species_of(id),
            kind,
            residues,
            description: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }
}

/// Species code from a miRBase-style id (`bmo-mir-276` -> `bmo`).
/// Ids without a `-` map to `unk`.
pub fn species_of(id: &str) -> String {
    match id.split_once('-') {
        Some((prefix, _)) if !prefix.is_empty() => prefix.to_owned(),
        _ => "unk".to_owned(),
    }
}

/// Reads FASTA records. `species` overrides the id-derived code for every
/// record when given. Lines starting with `;` are comments.
pub fn parse_fasta<R: BufRead>(
    reader: R,
    species: Option<&str>,
    kind: SeqKind,
) -> Result<Vec<SeqRecord>, SeqError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<(String, String, String)> = None;

    let finish = |cur: (String, String, String),
                  out: &mut Vec<SeqRecord>,
                  seen: &mut HashSet<String>|
     -> Result<(), SeqError> {
        let (id, desc, body) = cur;
        if !seen.insert(id.clone()) {
            return Err(SeqError::DuplicateId(id));
        }
        let residues = match normalize(&body) {
            Ok(r) => r,
            Err(SeqError::EmptySequence) => return Err(SeqError::EmptyRecord(id)),
            Err(e) => {
                return Err(SeqError::InRecord {
                    id,
                    source: Box::new(e),
                })
            }
        };
        if residues.len() > MAX_RECORD_LEN {
            return Err(SeqError::RecordTooLarge(id));
        }
        out.push(SeqRecord {
            species: species
                .map(str::to_owned)
                .unwrap_or_else(|| species_of(&id)),
            id,
            kind,
            residues,
            description: desc,
        });
        Ok(())
    };

    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.starts_with(';') {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            if let Some(cur) = current.take() {
                finish(cur, &mut out, &mut seen)?;
            }
            let header = header.trim();
            let (id, desc) = match header.split_once(char::is_whitespace) {
                Some((id, rest)) => (id, rest.trim()),
                None => (header, ""),
            };
            current = Some((id.to_owned(), desc.to_owned(), String::new()));
        } else if let Some((_, _, body)) = current.as_mut() {
            body.push_str(line);
        } else if !line.trim().is_empty() {
            return Err(SeqError::MissingHeader(line_no + 1));
        }
    }
    if let Some(cur) = current.take() {
        finish(cur, &mut out, &mut seen)?;
    }
    Ok(out)
}

/// Writes records as FASTA with 60-residue lines.
pub fn write_fasta<W: Write>(mut w: W, records: &[SeqRecord]) -> io::Result<()> {
    for rec in records {
        write_fasta_entry(&mut w, &rec.id, &rec.description, rec.residues.as_bytes())?;
    }
    Ok(())
}

pub(crate) fn write_fasta_entry<W: Write>(
    w: &mut W,
    id: &str,
    description: &str,
    body: &[u8],
) -> io::Result<()> {
    if description.is_empty() {
        writeln!(w, ">{id}")?;
    } else {
        writeln!(w, ">{id} {description}")?;
    }
    for chunk in body.chunks(60) {
        w.write_all(chunk)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Position of a mature miRNA inside its precursor, 1-based inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatureAnnotation {
    pub precursor_id: String,
    pub mature_id: String,
    pub start: usize,
    pub end: usize,
}

impl MatureAnnotation {
    pub fn new(precursor_id: &str, mature_id: &str, start: usize, end: usize) -> Self {
        Self {
            precursor_id: precursor_id.to_owned(),
            mature_id: mature_id.to_owned(),
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

/// Reads `precursor_id<TAB>mature_id<TAB>start<TAB>end` lines.
pub fn parse_annotations<R: BufRead>(reader: R) -> Result<Vec<MatureAnnotation>, SeqError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(SeqError::MalformedLine(line_no));
        }
        let coord = |s: &str| -> Result<usize, SeqError> {
            let v: i64 = s
                .trim()
                .parse()
                .map_err(|_| SeqError::MalformedLine(line_no))?;
            if v <= 0 {
                return Err(SeqError::NonPositiveCoordinate(line_no));
            }
            usize::try_from(v).map_err(|_| SeqError::MalformedLine(line_no))
        };
        let start = coord(fields[2])?;
        let end = coord(fields[3])?;
        out.push(MatureAnnotation::new(fields[0], fields[1], start, end));
    }
    Ok(out)
}

/// Immutable, validated collection of records and mature annotations.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<SeqRecord>,
    by_id: BTreeMap<String, usize>,
    annotations: Vec<MatureAnnotation>,
    species_index: BTreeMap<String, Vec<usize>>,
}

pub fn assemble_corpus(
    records: Vec<SeqRecord>,
    annotations: Vec<MatureAnnotation>,
) -> Result<Corpus, SeqError> {
    let mut by_id = BTreeMap::new();
    let mut species_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        if rec.id.is_empty() {
            return Err(SeqError::MalformedLine(0));
        }
        if by_id.insert(rec.id.clone(), i).is_some() {
            return Err(SeqError::DuplicateId(rec.id.clone()));
        }
        species_index
            .entry(rec.species.clone())
            .or_default()
            .push(i);
    }
    for ann in &annotations {
        let rec = match by_id.get(&ann.precursor_id) {
            Some(&i) if records[i].kind == SeqKind::Precursor => &records[i],
            _ => return Err(SeqError::DanglingAnnotation(ann.precursor_id.clone())),
        };
        if ann.start == 0 || ann.start > ann.end || ann.end > rec.len() {
            return Err(SeqError::AnnotationOutOfRange(ann.mature_id.clone()));
        }
        if !MATURE_LEN_RANGE.contains(&ann.len()) {
            return Err(SeqError::MatureLength {
                id: ann.mature_id.clone(),
                len: ann.len(),
            });
        }
    }
    Ok(Corpus {
        records,
        by_id,
        annotations,
        species_index,
    })
}

impl Corpus {
    pub fn records(&self) -> &[SeqRecord] {
        &self.records
    }

    pub fn annotations(&self) -> &[MatureAnnotation] {
        &self.annotations
    }

    pub fn get(&self, id: &str) -> Option<&SeqRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Species codes in sorted order.
    pub fn species(&self) -> impl Iterator<Item = &str> {
        self.species_index.keys().map(String::as_str)
    }

    pub fn has_species(&self, species: &str) -> bool {
        self.species_index.contains_key(species)
    }

    pub fn records_of<'a>(&'a self, species: &str) -> impl Iterator<Item = &'a SeqRecord> + 'a {
        self.species_index
            .get(species)
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    pub fn annotations_for<'a>(
        &'a self,
        precursor_id: &'a str,
    ) -> impl Iterator<Item = &'a MatureAnnotation> + 'a {
        self.annotations
            .iter()
            .filter(move |a| a.precursor_id == precursor_id)
    }

    /// Mature subsequence of an annotation belonging to this corpus.
    pub fn mature_sequence(&self, ann: &MatureAnnotation) -> Option<NucleotideString> {
        self.get(&ann.precursor_id)?
            .residues
            .slice(ann.start, ann.end)
    }
}
