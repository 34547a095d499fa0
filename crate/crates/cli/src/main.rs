use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hexamir::conservation::{
    analyze_family, conservation_stats, write_block_report, write_localizations,
    write_multi_region, write_stats, DEFAULT_MIN_BLOCK_LEN, DEFAULT_TAU,
};
use hexamir::msa::{
    align_all, extract_clusters, parse_aligned_fasta, write_aligned_fasta, write_clustal,
    write_cluster_report,
};
use hexamir::search::{search_many, write_hit_report, write_tally, Query, Strands};
use hexamir::seqio::{
    assemble_corpus, parse_annotations, parse_fasta, write_fasta, MatureAnnotation, SeqKind,
    SeqRecord,
};
use hexamir::setops::{venn, write_matrix, write_venn};
use hexamir::synth::{generate_genome, write_manifest, Plant};
use hexamir::{MsaError, ScoringScheme, SearchParams, SeqError};
use serde::Serialize;

const EXIT_IO: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hexamir",
    version,
    about = "miRNA homology search, alignment, conservation and set analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic genome with planted sequences.
    Gen(GenArgs),
    /// Search query miRNAs against subject sequences.
    Search(SearchArgs),
    /// Align sequences progressively and cut the guide tree into clusters.
    Msa(MsaArgs),
    /// Find conserved blocks and localize mature sequences.
    Conserve(ConserveArgs),
    /// Count mature sequences shared between species.
    Intersect(IntersectArgs),
}

#[derive(Args)]
struct Output {
    /// Directory for all output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write a JSON document next to every report.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SchemeArgs {
    #[arg(long = "match", default_value_t = 5, allow_negative_numbers = true)]
    match_score: i32,
    #[arg(long = "mismatch", default_value_t = -4, allow_negative_numbers = true)]
    mismatch_score: i32,
    #[arg(long, default_value_t = 10)]
    gap_open: i32,
    #[arg(long, default_value_t = 1)]
    gap_extend: i32,
}

impl SchemeArgs {
    fn scheme(&self) -> Result<ScoringScheme> {
        let s = ScoringScheme::new(
            self.match_score,
            self.mismatch_score,
            self.gap_open,
            self.gap_extend,
        );
        s.validate()?;
        Ok(s)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    length: usize,
    /// `name:sequence:offset[:+|-[:pos,pos,...]]`; repeatable.
    #[arg(long = "plant")]
    plants: Vec<String>,
    /// Record id of the generated genome.
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SearchArgs {
    /// Query FASTA. Records are matures unless --annotations is given.
    #[arg(long)]
    queries: PathBuf,
    /// Mature annotations; query records are then precursors.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Subject FASTA; all its records form one search space.
    #[arg(long)]
    subject: PathBuf,
    /// Only search queries of this species code.
    #[arg(long)]
    species: Option<String>,
    #[arg(long, default_value_t = 7)]
    word_size: usize,
    #[arg(long, default_value_t = 10.0)]
    e_cutoff: f64,
    #[arg(long, default_value_t = 20)]
    x_drop: i32,
    /// both, plus or minus.
    #[arg(long, default_value = "both")]
    strands: Strands,
    #[arg(long, default_value_t = 0.1)]
    k: f64,
    /// Rescore extensions with a gapped local alignment.
    #[arg(long)]
    gapped: bool,
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct MsaArgs {
    /// Unaligned FASTA.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 8)]
    min_cluster: usize,
    #[arg(long, default_value_t = 27)]
    max_cluster: usize,
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct ConserveArgs {
    /// Aligned FASTA of one family.
    #[arg(
        long,
        conflicts_with = "sequences",
        required_unless_present = "sequences"
    )]
    msa: Option<PathBuf>,
    /// Unaligned FASTA of one family, aligned first.
    #[arg(long)]
    sequences: Option<PathBuf>,
    #[arg(long)]
    annotations: PathBuf,
    /// Family name used in the reports; defaults to the input file stem.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_BLOCK_LEN)]
    lmin: usize,
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct IntersectArgs {
    /// Mature FASTA files; repeatable.
    #[arg(long = "matures")]
    matures: Vec<PathBuf>,
    /// Precursor FASTA whose annotated matures join the sets.
    #[arg(long, requires = "annotations")]
    precursors: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Species codes, comma separated, in report order.
    #[arg(long, value_delimiter = ',', required = true)]
    species: Vec<String>,
    /// Substitutions allowed between matched matures.
    #[arg(long, default_value_t = 0)]
    tolerance: usize,
    #[command(flatten)]
    out: Output,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Search(a) => cmd_search(a),
        Command::Msa(a) => cmd_msa(a),
        Command::Conserve(a) => cmd_conserve(a),
        Command::Intersect(a) => cmd_intersect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hexamir: {e:#}");
            ExitCode::from(if is_io(&e) { EXIT_IO } else { EXIT_INVALID })
        }
    }
}

fn is_io(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<io::Error>()
            || matches!(c.downcast_ref::<SeqError>(), Some(SeqError::Io(_)))
            || matches!(c.downcast_ref::<MsaError>(), Some(MsaError::Io(_)))
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_fasta(path: &Path, kind: SeqKind) -> Result<Vec<SeqRecord>> {
    parse_fasta(open(path)?, None, kind).with_context(|| format!("reading {}", path.display()))
}

fn read_annotations(path: &Path) -> Result<Vec<MatureAnnotation>> {
    parse_annotations(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Collects report files and writes them together once everything succeeded.
struct Reports<'a> {
    out: &'a Output,
    header: String,
    files: Vec<(String, Vec<u8>)>,
}

impl<'a> Reports<'a> {
    fn new(out: &'a Output, header: String) -> Self {
        Self {
            out,
            header,
            files: Vec::new(),
        }
    }

    /// A TSV report, preceded by the run header line.
    fn tsv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<()> {
        let mut buf = format!("# {}\n", self.header).into_bytes();
        body(&mut buf)?;
        self.files.push((name.to_owned(), buf));
        Ok(())
    }

    fn raw(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        body(&mut buf)?;
        self.files.push((name.to_owned(), buf));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.out.json {
            let mut buf = serde_json::to_vec_pretty(value)?;
            buf.push(b'\n');
            self.files.push((name.to_owned(), buf));
        }
        Ok(())
    }

    fn write(self) -> Result<()> {
        let dir = &self.out.out_dir;
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for (name, bytes) in self.files {
            let path = dir.join(&name);
            File::create(&path)
                .and_then(|mut f| f.write_all(&bytes))
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(())
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let plants = a
        .plants
        .iter()
        .map(|p| Plant::parse(p))
        .collect::<Result<Vec<_>, _>>()?;
    let genome = generate_genome(a.seed, a.length, &plants)?;
    let record = SeqRecord::new(&a.name, SeqKind::Genome, genome);
    let header = format!(
        "hexamir gen seed={} length={} plants={}",
        a.seed,
        a.length,
        plants.len()
    );
    let mut r = Reports::new(&a.out, header);
    r.raw("genome.fa", |w| {
        write_fasta(w, std::slice::from_ref(&record))
    })?;
    r.tsv("plants.tsv", |w| write_manifest(w, &plants))?;
    r.json("plants.json", &plants)?;
    r.write()
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let params = SearchParams {
        word_size: a.word_size,
        e_cutoff: a.e_cutoff,
        scheme: a.scheme.scheme()?,
        x_drop: a.x_drop,
        strands: a.strands,
        k: a.k,
        gapped: a.gapped,
    };
    params.validate()?;
    let (kind, annotations) = match &a.annotations {
        Some(p) => (SeqKind::Precursor, read_annotations(p)?),
        None => (SeqKind::Mature, Vec::new()),
    };
    let records = read_fasta(&a.queries, kind)?;
    let corpus = assemble_corpus(records, annotations)?;
    let queries = Query::all(&corpus, a.species.as_deref())?;
    if queries.is_empty() {
        bail!("no queries");
    }
    let subjects = read_fasta(&a.subject, SeqKind::Genome)?;
    if subjects.is_empty() {
        bail!("no subject sequences");
    }
    let report = search_many(&queries, &subjects, &params)?;
    let mut r = Reports::new(&a.out, format!("hexamir search {}", params.describe()));
    r.tsv("hits.tsv", |w| write_hit_report(w, &report))?;
    r.tsv("tally.tsv", |w| write_tally(w, &report.tally))?;
    r.json("hits.json", &report)?;
    r.json("tally.json", &report.tally)?;
    r.write()
}

fn cmd_msa(a: MsaArgs) -> Result<()> {
    let scheme = a.scheme.scheme()?;
    let seqs = read_fasta(&a.input, SeqKind::Precursor)?;
    let (tree, msa) = align_all::<f64>(&seqs, &scheme)?;
    let clusters = extract_clusters(&tree, a.min_cluster, a.max_cluster)?;
    let header = format!(
        "hexamir msa min_cluster={} max_cluster={} match={} mismatch={} gap_open={} gap_extend={}",
        a.min_cluster,
        a.max_cluster,
        scheme.match_score,
        scheme.mismatch_score,
        scheme.gap_open,
        scheme.gap_extend
    );
    let mut r = Reports::new(&a.out, header);
    r.raw("alignment.fa", |w| write_aligned_fasta(w, &msa))?;
    r.raw("alignment.aln", |w| write_clustal(w, &msa))?;
    r.raw("tree.nwk", |w| writeln!(w, "{}", tree.to_newick()))?;
    r.tsv("clusters.tsv", |w| write_cluster_report(w, &clusters))?;
    r.json("alignment.json", &msa)?;
    r.json("tree.json", &tree)?;
    r.json("clusters.json", &clusters)?;
    r.write()
}

fn cmd_conserve(a: ConserveArgs) -> Result<()> {
    let annotations = read_annotations(&a.annotations)?;
    let (input, msa) = match (&a.msa, &a.sequences) {
        (Some(p), _) => {
            let msa = parse_aligned_fasta(open(p)?)
                .with_context(|| format!("reading {}", p.display()))?;
            (p, msa)
        }
        (None, Some(p)) => {
            let seqs = read_fasta(p, SeqKind::Precursor)?;
            (p, align_all::<f64>(&seqs, &a.scheme.scheme()?)?.1)
        }
        (None, None) => bail!("either --msa or --sequences is required"),
    };
    let family = match &a.family {
        Some(f) => f.clone(),
        None => input
            .file_stem()
            .map(|s| {
                s.to_string_lossy()
                    .split('.')
                    .next()
                    .unwrap_or_default()
                    .to_owned()
            })
            .unwrap_or_else(|| "family".to_owned()),
    };
    let fam = analyze_family(&family, &msa, &annotations, a.tau, a.lmin)?;
    if fam.localizations.is_empty() {
        bail!("no annotation refers to a row of the alignment");
    }
    let stats = conservation_stats(&fam.localizations)?;
    let multi: Vec<_> = fam.multi_region.iter().cloned().collect();
    let header = format!(
        "hexamir conserve family={} tau={} lmin={}",
        family, a.tau, a.lmin
    );
    let mut r = Reports::new(&a.out, header);
    r.tsv("blocks.tsv", |w| {
        write_block_report(w, &family, &fam.blocks)
    })?;
    r.tsv("localizations.tsv", |w| {
        write_localizations(w, &family, &fam.localizations)
    })?;
    r.tsv("stats.tsv", |w| write_stats(w, &stats))?;
    r.tsv("multi_region.tsv", |w| write_multi_region(w, &multi))?;
    r.json("conservation.json", &fam)?;
    r.json("stats.json", &stats)?;
    r.write()
}

fn cmd_intersect(a: IntersectArgs) -> Result<()> {
    let mut records = Vec::new();
    for p in &a.matures {
        records.extend(read_fasta(p, SeqKind::Mature)?);
    }
    let mut annotations = Vec::new();
    if let Some(p) = &a.precursors {
        records.extend(read_fasta(p, SeqKind::Precursor)?);
        annotations = read_annotations(
            a.annotations
                .as_deref()
                .expect("clap enforces --annotations"),
        )?;
    }
    if records.is_empty() {
        bail!("no input sequences; give --matures or --precursors");
    }
    let corpus = assemble_corpus(records, annotations)?;
    let species: Vec<&str> = a.species.iter().map(String::as_str).collect();
    let report = venn(&corpus, &species, a.tolerance)?;
    let header = format!(
        "hexamir intersect species={} tolerance={}",
        a.species.join(","),
        a.tolerance
    );
    let mut r = Reports::new(&a.out, header);
    r.tsv("matrix.tsv", |w| write_matrix(w, &report))?;
    r.tsv("venn.tsv", |w| write_venn(w, &report))?;
    r.json("intersect.json", &report)?;
    r.write()
}
