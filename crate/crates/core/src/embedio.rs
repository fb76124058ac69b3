//! Embedding persistence.
//!
//! Text format (word2vec-compatible): a `V d` header line followed by one
//! `token v1 ... vd` line per word, space-separated, newline-terminated.
//! Values use shortest round-trip formatting, so a table survives
//! export/import bit-exactly.
//!
//! Checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! "SCBW" | version u32 | V u64 | d u64 | V*d f64 rows
//! vocab:     V x (len u32, utf-8 bytes) | has_counts u8 [V x u64] | min_count u64
//! optimizer: present u8 [seed u64 | epochs_done u64 | batches_done u64 | total_batches u64]
//! ```

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::corpus::Vocabulary;
use crate::model::{EmbeddingMatrix, TrainState};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SCBW";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Vocabulary plus matching matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocabulary,
    pub matrix: EmbeddingMatrix,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, matrix: EmbeddingMatrix) -> Result<Self> {
        if vocab.len() != matrix.vocab_size() {
            return Err(Error::InvalidConfig(format!(
                "{} tokens for {} matrix rows",
                vocab.len(),
                matrix.vocab_size()
            )));
        }
        Ok(EmbeddingTable { vocab, matrix })
    }
}

pub fn write_text<W: Write>(table: &EmbeddingTable, out: W) -> Result<()> {
    if let Some(bad) = table
        .vocab
        .tokens()
        .iter()
        .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
    {
        return Err(Error::Serialization(format!(
            "token {bad:?} cannot be represented in the text format"
        )));
    }
    let mut out = BufWriter::new(out);
    writeln!(out, "{} {}", table.matrix.vocab_size(), table.matrix.dim())?;
    for (i, token) in table.vocab.tokens().iter().enumerate() {
        out.write_all(token.as_bytes())?;
        for v in table.matrix.row(i) {
            write!(out, " {v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_text(table: &EmbeddingTable, path: &Path) -> Result<()> {
    // validate before touching the file system
    let mut buf = Vec::new();
    write_text(table, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_text<R: BufRead>(input: R) -> Result<EmbeddingTable> {
    let mut lines = input.lines().enumerate();
    let (rows, dim) = match lines.next() {
        Some((_, line)) => parse_header(&line?)?,
        None => return Err(Error::parse(1, "missing header")),
    };
    let mut tokens = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows.saturating_mul(dim).min(1 << 26));
    let mut last_line = 1;
    for (i, line) in lines {
        let line_no = i + 1;
        last_line = line_no;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if tokens.len() == rows {
            return Err(Error::parse(line_no, format!("more rows than the {rows} declared")));
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-blank line has a field");
        let before = values.len();
        for field in fields {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid number `{field}`")))?;
            values.push(v);
        }
        if values.len() - before != dim {
            return Err(Error::parse(
                line_no,
                format!("expected {dim} components, found {}", values.len() - before),
            ));
        }
        tokens.push(token.to_string());
    }
    if tokens.len() != rows {
        return Err(Error::parse(
            last_line,
            format!("header declares {rows} rows, body has {}", tokens.len()),
        ));
    }
    let vocab = Vocabulary::from_tokens(tokens).map_err(|e| Error::parse(0, e.to_string()))?;
    let matrix = EmbeddingMatrix::from_values(rows, dim, values)?;
    EmbeddingTable::new(vocab, matrix)
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(1, format!("invalid header `{line}`")));
    match fields.as_slice() {
        [v, d] => {
            let (v, d) = (parse(v)?, parse(d)?);
            if v == 0 || d == 0 {
                return Err(Error::parse(1, "header declares an empty table"));
            }
            Ok((v, d))
        }
        _ => Err(Error::parse(1, format!("invalid header `{line}`"))),
    }
}

pub fn import_text(path: &Path) -> Result<EmbeddingTable> {
    read_text(BufReader::new(File::open(path)?))
}

/// A table together with optional training position.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub table: EmbeddingTable,
    pub state: Option<TrainState>,
}

pub fn encode_checkpoint(checkpoint: &Checkpoint) -> Vec<u8> {
    let table = &checkpoint.table;
    let (rows, dim) = (table.matrix.vocab_size(), table.matrix.dim());
    let mut out = Vec::with_capacity(32 + rows * dim * 8);
    // writes into a Vec cannot fail
    let w = &mut out;
    w.extend_from_slice(CHECKPOINT_MAGIC);
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION).unwrap();
    w.write_u64::<LittleEndian>(rows as u64).unwrap();
    w.write_u64::<LittleEndian>(dim as u64).unwrap();
    for v in table.matrix.values() {
        w.write_f64::<LittleEndian>(*v).unwrap();
    }
    for token in table.vocab.tokens() {
        w.write_u32::<LittleEndian>(token.len() as u32).unwrap();
        w.extend_from_slice(token.as_bytes());
    }
    match table.vocab.counts() {
        Some(counts) => {
            w.write_u8(1).unwrap();
            for c in counts {
                w.write_u64::<LittleEndian>(*c).unwrap();
            }
        }
        None => w.write_u8(0).unwrap(),
    }
    w.write_u64::<LittleEndian>(table.vocab.min_count()).unwrap();
    match &checkpoint.state {
        Some(s) => {
            w.write_u8(1).unwrap();
            for v in [s.seed, s.epochs_done, s.batches_done, s.total_batches] {
                w.write_u64::<LittleEndian>(v).unwrap();
            }
        }
        None => w.write_u8(0).unwrap(),
    }
    out
}

fn incompatible(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::IncompatibleCheckpoint("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(incompatible)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::IncompatibleCheckpoint("bad magic bytes".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(incompatible)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::IncompatibleCheckpoint(format!("unsupported version {version}")));
    }
    let rows = r.read_u64::<LittleEndian>().map_err(incompatible)? as usize;
    let dim = r.read_u64::<LittleEndian>().map_err(incompatible)? as usize;
    let n = rows
        .checked_mul(dim)
        .filter(|n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
        .ok_or_else(|| Error::IncompatibleCheckpoint("file is truncated".into()))?;
    let mut values = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut values).map_err(incompatible)?;

    let mut tokens = Vec::with_capacity(rows);
    for _ in 0..rows {
        let len = r.read_u32::<LittleEndian>().map_err(incompatible)? as usize;
        if len > bytes.len() {
            return Err(Error::IncompatibleCheckpoint("file is truncated".into()));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(incompatible)?;
        tokens.push(
            String::from_utf8(buf).map_err(|_| Error::IncompatibleCheckpoint("token is not UTF-8".into()))?,
        );
    }
    let counts = match r.read_u8().map_err(incompatible)? {
        0 => None,
        1 => {
            let mut counts = vec![0u64; rows];
            r.read_u64_into::<LittleEndian>(&mut counts).map_err(incompatible)?;
            Some(counts)
        }
        f => return Err(Error::IncompatibleCheckpoint(format!("bad count flag {f}"))),
    };
    let min_count = r.read_u64::<LittleEndian>().map_err(incompatible)?;
    let state = match r.read_u8().map_err(incompatible)? {
        0 => None,
        1 => {
            let mut s = [0u64; 4];
            r.read_u64_into::<LittleEndian>(&mut s).map_err(incompatible)?;
            Some(TrainState {
                seed: s[0],
                epochs_done: s[1],
                batches_done: s[2],
                total_batches: s[3],
            })
        }
        f => return Err(Error::IncompatibleCheckpoint(format!("bad optimizer flag {f}"))),
    };
    if (r.position() as usize) != bytes.len() {
        return Err(Error::IncompatibleCheckpoint("trailing bytes".into()));
    }
    let bad = |e: Error| Error::IncompatibleCheckpoint(e.to_string());
    let vocab = Vocabulary::from_parts(tokens, counts, min_count).map_err(bad)?;
    let matrix = EmbeddingMatrix::from_values(rows, dim, values).map_err(bad)?;
    Ok(Checkpoint {
        table: EmbeddingTable::new(vocab, matrix).map_err(bad)?,
        state,
    })
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(checkpoint))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

/// Loads either format, deciding by the leading magic bytes.
pub fn load_table(path: &Path) -> Result<EmbeddingTable> {
    let mut head = [0u8; 4];
    let is_checkpoint = {
        let mut f = File::open(path)?;
        f.read_exact(&mut head).is_ok() && &head == CHECKPOINT_MAGIC
    };
    if is_checkpoint {
        Ok(load_checkpoint(path)?.table)
    } else {
        import_text(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EmbeddingTable> {
        read_text(text.as_bytes())
    }

    fn table(tokens: &[&str], rows: &[Vec<f64>]) -> EmbeddingTable {
        EmbeddingTable::new(
            Vocabulary::from_tokens(tokens.iter().copied()).unwrap(),
            EmbeddingMatrix::from_rows(rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn text_export_format() {
        let mut out = Vec::new();
        write_text(&table(&["a"], &[vec![0.5, -1.0]]), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1 2\na 0.5 -1\n");
    }

    #[test]
    fn text_rejects_unrepresentable_tokens() {
        let t = table(&["a b"], &[vec![1.0]]);
        assert!(matches!(write_text(&t, Vec::new()), Err(Error::Serialization(_))));
        let t = table(&["tab\there"], &[vec![1.0]]);
        assert!(matches!(write_text(&t, Vec::new()), Err(Error::Serialization(_))));
    }

    #[test]
    fn text_import_cases() {
        let t = parse("2 2\na 1 0\nb 0 1\n").unwrap();
        assert_eq!(t.vocab.tokens(), ["a", "b"]);
        assert_eq!(t.matrix.row(1), [0.0, 1.0]);
        assert!(t.vocab.counts().is_none());

        // trailing space as written by the original word2vec tool
        assert!(parse("1 2\na 1 0 \n").is_ok());

        assert!(matches!(parse("2 2\na 1 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("1 2\na 1 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("1 2\na 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("1 2\na 1 2\nb 3 4\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse("x y\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("2 1\na 1\na 2\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn checkpoint_corruption() {
        let t = table(&["a", "b"], &[vec![0.1, 0.2], vec![0.3, 0.4]]);
        let bytes = encode_checkpoint(&Checkpoint { table: t.clone(), state: None });
        for cut in [0, 3, 10, 30, bytes.len() - 1] {
            assert!(
                matches!(decode_checkpoint(&bytes[..cut]), Err(Error::IncompatibleCheckpoint(_))),
                "cut at {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::IncompatibleCheckpoint(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::IncompatibleCheckpoint(_))));
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(decode_checkpoint(&bad), Err(Error::IncompatibleCheckpoint(_))));
        assert_eq!(decode_checkpoint(&bytes).unwrap().table, t);
    }
}
