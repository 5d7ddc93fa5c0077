//! FASTA input and similarity-graph triplet output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alphabet;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    /// Dense 0-based id assigned in file order.
    pub id: usize,
    /// First whitespace-delimited token of the description line.
    pub header: String,
    /// Upper-cased residues over the 25-symbol alphabet.
    pub residues: Vec<u8>,
}

/// An accepted, canonical (`i < j`) edge of the similarity graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityEdge {
    pub i: usize,
    pub j: usize,
    pub score: i32,
    pub identity: f64,
    pub coverage_i: f64,
    pub coverage_j: f64,
}

impl SimilarityEdge {
    /// One output line without the trailing newline.
    pub fn format_line(&self, header_i: &str, header_j: &str) -> String {
        format!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}",
            header_i, header_j, self.score, self.identity, self.coverage_i, self.coverage_j
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FastaStats {
    /// Residue bytes outside the alphabet that were replaced by `X`.
    pub replaced_bytes: u64,
}

pub fn read_fasta(path: impl AsRef<Path>) -> Result<Vec<SequenceRecord>> {
    read_fasta_with_stats(path).map(|(records, _)| records)
}

pub fn read_fasta_with_stats(path: impl AsRef<Path>) -> Result<(Vec<SequenceRecord>, FastaStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_fasta(BufReader::new(file), path)
}

/// Parses FASTA from any buffered reader; `origin` only labels errors.
pub fn parse_fasta<R: BufRead>(reader: R, origin: &Path) -> Result<(Vec<SequenceRecord>, FastaStats)> {
    let mut records: Vec<SequenceRecord> = Vec::new();
    let mut stats = FastaStats::default();
    let mut current: Option<(String, Vec<u8>)> = None;

    let finish = |records: &mut Vec<SequenceRecord>, (header, residues): (String, Vec<u8>)| {
        if residues.is_empty() {
            return Err(Error::EmptyRecord {
                path: origin.to_path_buf(),
                header,
            });
        }
        let id = records.len();
        records.push(SequenceRecord { id, header, residues });
        Ok(())
    };

    for (lineno, line) in reader.split(b'\n').enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if let Some(desc) = line.strip_prefix(b">") {
            if let Some(rec) = current.take() {
                finish(&mut records, rec)?;
            }
            let desc = String::from_utf8_lossy(desc);
            let header = desc.split_whitespace().next().unwrap_or("").to_string();
            current = Some((header, Vec::new()));
            continue;
        }
        let Some((_, residues)) = current.as_mut() else {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            return Err(Error::MissingHeader {
                path: origin.to_path_buf(),
                line: lineno + 1,
            });
        };
        for &b in line.iter().filter(|b| !b.is_ascii_whitespace()) {
            let up = b.to_ascii_uppercase();
            if alphabet::code_of(up).is_some() {
                residues.push(up);
            } else {
                stats.replaced_bytes += 1;
                residues.push(b'X');
            }
        }
    }
    if let Some(rec) = current.take() {
        finish(&mut records, rec)?;
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(origin.to_path_buf()));
    }
    if stats.replaced_bytes > 0 {
        log::warn!(
            "{}: {} residue byte(s) outside the alphabet mapped to X",
            origin.display(),
            stats.replaced_bytes
        );
    }
    Ok((records, stats))
}

/// Writes records as FASTA with 60-residue lines.
pub fn write_fasta(path: impl AsRef<Path>, records: &[SequenceRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for rec in records {
        writeln!(w, ">{}", rec.header).map_err(io)?;
        for chunk in rec.residues.chunks(60) {
            w.write_all(chunk).map_err(io)?;
            w.write_all(b"\n").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Streaming triplet writer; edges may arrive in any order.
pub struct EdgeWriter {
    path: PathBuf,
    out: BufWriter<File>,
    count: usize,
}

impl EdgeWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(EdgeWriter {
            path,
            out: BufWriter::new(file),
            count: 0,
        })
    }

    pub fn write<S: AsRef<str>>(&mut self, edge: &SimilarityEdge, headers: &[S]) -> Result<()> {
        debug_assert!(edge.i < edge.j, "edges must be canonical");
        let line = edge.format_line(headers[edge.i].as_ref(), headers[edge.j].as_ref());
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.count)
    }
}

/// Writes every edge of `edges` and returns the number of lines written.
pub fn write_edges<'a, S: AsRef<str>>(
    path: impl AsRef<Path>,
    edges: impl IntoIterator<Item = &'a SimilarityEdge>,
    headers: &[S],
) -> Result<usize> {
    let mut w = EdgeWriter::create(path)?;
    for e in edges {
        w.write(e, headers)?;
    }
    w.finish()
}

/// Sorts lines bytewise so equal edge sets produce byte-identical files.
pub fn canonical_lines(text: &[u8]) -> Vec<u8> {
    let mut lines: Vec<&[u8]> = text
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty())
        .collect();
    lines.sort_unstable();
    let mut out = Vec::with_capacity(text.len() + 1);
    for l in lines {
        out.extend_from_slice(l);
        out.push(b'\n');
    }
    out
}

pub fn canonicalize_output(path_in: impl AsRef<Path>, path_out: impl AsRef<Path>) -> Result<()> {
    let (path_in, path_out) = (path_in.as_ref(), path_out.as_ref());
    let text = std::fs::read(path_in).map_err(|e| Error::io(path_in, e))?;
    std::fs::write(path_out, canonical_lines(&text)).map_err(|e| Error::io(path_out, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Vec<SequenceRecord>> {
        parse_fasta(text.as_bytes(), Path::new("mem")).map(|(r, _)| r)
    }

    #[test]
    fn parses_records_in_order() {
        let recs = parse(">a\nMKV\n>b\nGG\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!((recs[0].id, recs[0].header.as_str(), &recs[0].residues[..]), (0, "a", &b"MKV"[..]));
        assert_eq!((recs[1].id, recs[1].header.as_str(), &recs[1].residues[..]), (1, "b", &b"GG"[..]));
    }

    #[test]
    fn concatenates_lines_and_truncates_header() {
        let recs = parse(">a desc text\nMK\nVA\n").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].header, "a");
        assert_eq!(recs[0].residues, b"MKVA");
    }

    #[test]
    fn normalises_case_whitespace_and_unknown_bytes() {
        let (recs, stats) = parse_fasta(">x\r\nmk v\r\nJ1\n".as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(recs[0].residues, b"MKVXX");
        assert_eq!(stats.replaced_bytes, 2);
    }

    #[test]
    fn rejects_empty_inputs() {
        assert!(matches!(parse(""), Err(Error::EmptyInput(_))));
        assert!(matches!(parse("\n\n"), Err(Error::EmptyInput(_))));
        match parse(">a\nMK\n>b\n>c\nG\n") {
            Err(Error::EmptyRecord { header, .. }) => assert_eq!(header, "b"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("MK\n>a\nG\n"), Err(Error::MissingHeader { line: 1, .. })));
    }

    #[test]
    fn formats_edge_lines() {
        let e = SimilarityEdge { i: 0, j: 1, score: 52, identity: 0.8125, coverage_i: 0.9, coverage_j: 1.0 };
        assert_eq!(e.format_line("a", "b"), "a\tb\t52\t0.8125\t0.9000\t1.0000");
        // exact binary ties round to even
        let tie = SimilarityEdge { identity: 0.03125, ..e };
        assert!(tie.format_line("a", "b").contains("\t0.0312\t"));
    }

    #[test]
    fn writes_empty_and_non_empty_edge_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        assert_eq!(write_edges(&p, [], &["a", "b"]).unwrap(), 0);
        assert_eq!(std::fs::read(&p).unwrap(), b"");
        let e = SimilarityEdge { i: 0, j: 1, score: 52, identity: 0.8125, coverage_i: 0.9, coverage_j: 1.0 };
        assert_eq!(write_edges(&p, [&e], &["a", "b"]).unwrap(), 1);
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a\tb\t52\t0.8125\t0.9000\t1.0000\n");
    }

    #[test]
    fn canonicalize_sorts_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
        std::fs::write(&a, "b\ta\t1\n a\tb\t2\n".replace(" ", "")).unwrap();
        canonicalize_output(&a, &b).unwrap();
        assert_eq!(std::fs::read_to_string(&b).unwrap(), "a\tb\t2\nb\ta\t1\n");
        canonicalize_output(&b, &c).unwrap();
        assert_eq!(std::fs::read(&b).unwrap(), std::fs::read(&c).unwrap());
    }

    fn record_set() -> impl Strategy<Value = Vec<(String, Vec<u8>)>> {
        let residue = proptest::sample::select(alphabet::ALPHABET.to_vec());
        proptest::collection::vec(
            ("[A-Za-z0-9_|.]{1,12}", proptest::collection::vec(residue, 1..200)),
            1..20,
        )
    }

    proptest! {
        #[test]
        fn fasta_round_trip(set in record_set()) {
            let records: Vec<SequenceRecord> = set
                .into_iter()
                .enumerate()
                .map(|(id, (header, residues))| SequenceRecord { id, header, residues })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.fa");
            write_fasta(&p, &records).unwrap();
            prop_assert_eq!(read_fasta(&p).unwrap(), records);
        }

        #[test]
        fn canonical_form_ignores_line_order(mut lines in proptest::collection::vec("[a-c\t0-9]{1,8}", 0..30), seed in any::<u64>()) {
            let joined = |ls: &[String]| ls.iter().map(|l| format!("{l}\n")).collect::<String>();
            let before = canonical_lines(joined(&lines).as_bytes());
            use rand::{seq::SliceRandom, SeedableRng};
            lines.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let after = canonical_lines(joined(&lines).as_bytes());
            prop_assert_eq!(&before, &after);
            prop_assert_eq!(canonical_lines(&before), before);
        }
    }
}
