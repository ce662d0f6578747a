//! Text and binary formats for measurement records and unitary lists.
//!
//! Records (line oriented, `#` starts a comment line):
//!
//! ```text
//! shadow-records v1
//! dim 2
//! settings 1
//! shots 3
//! seed 42
//! U
//! 1 0 0 0
//! 0 0 1 0
//! counts 2 1
//! ```
//!
//! Each `U` block holds D rows of D `re im` pairs (row-major) followed by a
//! `counts` line with K = D integers summing to `shots`.
//!
//! Unitary lists come in two encodings. Text: blocks of D rows of `re im`
//! pairs separated by blank lines. Binary: the magic `SHDU`, then little-endian
//! `u32` version (1), dimension and count, then `count·D·D` pairs of `f64`
//! (re, im) in row-major order.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c, unitarity_deviation, CMatrix};
use crate::measurement::MeasurementRecord;
use crate::quantum::RankOnePovm;

/// Largest dimension accepted from a file (ten qubits).
pub const MAX_DIM: usize = 1024;
const MAX_SETTINGS: usize = 1 << 24;
const RECORDS_MAGIC: &str = "shadow-records v1";
pub const UNITARY_MAGIC: &[u8; 4] = b"SHDU";
const UNITARY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct RecordsFile {
    pub dim: usize,
    pub shots: u64,
    pub seed: u64,
    pub records: Vec<MeasurementRecord>,
}

fn write_matrix_rows(out: &mut String, u: &CMatrix) {
    for i in 0..u.nrows() {
        let row: Vec<String> = (0..u.ncols())
            .map(|j| format!("{} {}", u[(i, j)].re, u[(i, j)].im))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

/// Serializes records. Floats use the shortest representation that reads
/// back to the same value.
pub fn records_to_string(file: &RecordsFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RECORDS_MAGIC}");
    let _ = writeln!(out, "dim {}", file.dim);
    let _ = writeln!(out, "settings {}", file.records.len());
    let _ = writeln!(out, "shots {}", file.shots);
    let _ = writeln!(out, "seed {}", file.seed);
    for rec in &file.records {
        out.push_str("U\n");
        write_matrix_rows(&mut out, rec.povm().unitary());
        let counts: Vec<String> = rec.counts().iter().map(|f| f.to_string()).collect();
        let _ = writeln!(out, "counts {}", counts.join(" "));
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next line that is neither blank nor a comment, with its 1-based number.
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((i + 1, line));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_content().ok_or_else(|| {
            perr(
                self.last + 1,
                format!("unexpected end of input, expected {what}"),
            )
        })
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| perr(line, format!("invalid number '{tok}'")))?;
    if !v.is_finite() {
        return Err(perr(line, format!("non-finite number '{tok}'")));
    }
    Ok(v)
}

fn parse_row(line: &str, lineno: usize, d: usize) -> Result<Vec<crate::linalg::C64>> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 2 * d {
        return Err(perr(
            lineno,
            format!(
                "expected {} numbers ({} re/im pairs), found {}",
                2 * d,
                d,
                toks.len()
            ),
        ));
    }
    toks.chunks(2)
        .map(|p| Ok(c(parse_f64(p[0], lineno)?, parse_f64(p[1], lineno)?)))
        .collect()
}

fn header_value<T: std::str::FromStr>(lines: &mut Lines<'_>, key: &str) -> Result<T> {
    let (n, line) = lines.expect(key)?;
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(perr(n, format!("expected '{key} <value>'")));
    }
    let value = it
        .next()
        .ok_or_else(|| perr(n, format!("missing value for '{key}'")))?;
    if it.next().is_some() {
        return Err(perr(n, format!("trailing tokens after '{key}'")));
    }
    value
        .parse()
        .map_err(|_| perr(n, format!("invalid value '{value}' for '{key}'")))
}

pub fn parse_records(text: &str) -> Result<RecordsFile> {
    let mut lines = Lines::new(text);
    let (n, magic) = lines.expect("header")?;
    if magic != RECORDS_MAGIC {
        return Err(perr(n, format!("expected '{RECORDS_MAGIC}'")));
    }
    let dim: usize = header_value(&mut lines, "dim")?;
    let settings: usize = header_value(&mut lines, "settings")?;
    let shots: u64 = header_value(&mut lines, "shots")?;
    let seed: u64 = header_value(&mut lines, "seed")?;
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(perr(
            lines.last,
            format!("dim {dim} outside [1, {MAX_DIM}]"),
        ));
    }
    if !(1..=MAX_SETTINGS).contains(&settings) {
        return Err(perr(
            lines.last,
            format!("settings {settings} outside [1, {MAX_SETTINGS}]"),
        ));
    }
    if shots < 1 {
        return Err(perr(lines.last, "shots must be >= 1"));
    }

    let mut records = Vec::new();
    for _ in 0..settings {
        let (n, tag) = lines.expect("'U'")?;
        if tag != "U" {
            return Err(perr(n, "expected 'U'"));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..dim {
            let (n, row) = lines.expect("unitary row")?;
            entries.extend(parse_row(row, n, dim)?);
        }
        let u = CMatrix::from_row_slice(dim, dim, &entries);
        let povm = RankOnePovm::new(u).map_err(|e| perr(n, e.to_string()))?;

        let (n, line) = lines.expect("counts")?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some("counts") {
            return Err(perr(n, "expected 'counts'"));
        }
        let counts = toks
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|_| perr(n, format!("invalid count '{t}'")))
            })
            .collect::<Result<Vec<u64>>>()?;
        if counts.len() != dim {
            return Err(perr(
                n,
                format!("expected {dim} counts, found {}", counts.len()),
            ));
        }
        let rec = MeasurementRecord::new(povm, counts).map_err(|e| perr(n, e.to_string()))?;
        if rec.shots() != shots {
            return Err(perr(
                n,
                format!("counts sum to {}, header says {shots}", rec.shots()),
            ));
        }
        records.push(rec);
    }
    if let Some((n, _)) = lines.next_content() {
        return Err(perr(n, "trailing content after last record"));
    }
    Ok(RecordsFile {
        dim,
        shots,
        seed,
        records,
    })
}

fn check_unitaries(list: &[CMatrix], line: usize) -> Result<()> {
    for (i, u) in list.iter().enumerate() {
        let dev = unitarity_deviation(u);
        if !(dev <= UNITARY_TOL) {
            return Err(perr(
                line,
                format!("matrix {i} is not unitary (deviation {dev:e})"),
            ));
        }
    }
    Ok(())
}

pub fn unitaries_to_text(list: &[CMatrix]) -> String {
    let mut out = String::new();
    for (i, u) in list.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_matrix_rows(&mut out, u);
    }
    out
}

pub fn parse_unitaries_text(text: &str) -> Result<Vec<CMatrix>> {
    let mut blocks: Vec<Vec<(usize, &str)>> = vec![Vec::new()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !blocks.last().is_some_and(|b| b.is_empty()) {
                blocks.push(Vec::new());
            }
            continue;
        }
        blocks.last_mut().expect("non-empty").push((i + 1, line));
    }
    blocks.retain(|b| !b.is_empty());
    let first = blocks.first().ok_or_else(|| perr(1, "no matrices found"))?;
    let tokens = first[0].1.split_whitespace().count();
    if tokens == 0 || tokens % 2 != 0 {
        return Err(perr(first[0].0, "row must hold an even number of values"));
    }
    let d = tokens / 2;
    if d > MAX_DIM {
        return Err(perr(first[0].0, format!("dimension {d} exceeds {MAX_DIM}")));
    }
    let mut out = Vec::with_capacity(blocks.len());
    for block in &blocks {
        if block.len() != d {
            return Err(perr(
                block[0].0,
                format!("expected {d} rows in block, found {}", block.len()),
            ));
        }
        let mut entries = Vec::with_capacity(d * d);
        for &(n, row) in block {
            entries.extend(parse_row(row, n, d)?);
        }
        out.push(CMatrix::from_row_slice(d, d, &entries));
    }
    check_unitaries(&out, blocks[0][0].0)?;
    Ok(out)
}

pub fn unitaries_to_binary(list: &[CMatrix]) -> Vec<u8> {
    let d = list.first().map_or(0, |u| u.nrows());
    let mut out = Vec::with_capacity(16 + list.len() * d * d * 16);
    out.extend_from_slice(UNITARY_MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(list.len() as u32).to_le_bytes());
    for u in list {
        for i in 0..d {
            for j in 0..d {
                out.extend_from_slice(&u[(i, j)].re.to_le_bytes());
                out.extend_from_slice(&u[(i, j)].im.to_le_bytes());
            }
        }
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn parse_unitaries_binary(bytes: &[u8]) -> Result<Vec<CMatrix>> {
    if bytes.len() < 16 || &bytes[0..4] != UNITARY_MAGIC {
        return Err(perr(0, "missing SHDU header"));
    }
    let version = read_u32(bytes, 4);
    if version != 1 {
        return Err(perr(0, format!("unsupported version {version}")));
    }
    let d = read_u32(bytes, 8) as usize;
    let count = read_u32(bytes, 12) as usize;
    if !(1..=MAX_DIM).contains(&d) {
        return Err(perr(0, format!("dimension {d} outside [1, {MAX_DIM}]")));
    }
    if count < 1 {
        return Err(perr(0, "no matrices"));
    }
    let expected = count
        .checked_mul(d * d)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| perr(0, "size overflow"))?;
    if bytes.len() != expected {
        return Err(perr(
            0,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let mut out = Vec::with_capacity(count);
    let mut at = 16;
    for _ in 0..count {
        let mut entries = Vec::with_capacity(d * d);
        for _ in 0..d * d {
            let re = f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(bytes[at + 8..at + 16].try_into().expect("8 bytes"));
            if !re.is_finite() || !im.is_finite() {
                return Err(perr(0, format!("non-finite entry at byte {at}")));
            }
            entries.push(c(re, im));
            at += 16;
        }
        out.push(CMatrix::from_row_slice(d, d, &entries));
    }
    check_unitaries(&out, 0)?;
    Ok(out)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Reads a unitary list, choosing the binary decoder when the file starts
/// with the `SHDU` magic.
pub fn load_unitaries(path: &Path) -> Result<Vec<CMatrix>> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(UNITARY_MAGIC) {
        parse_unitaries_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| io_err(path, e))?;
        parse_unitaries_text(text)
    }
}

pub fn load_records(path: &Path) -> Result<RecordsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_records(&text)
}

pub fn save_records(path: &Path, file: &RecordsFile) -> Result<()> {
    std::fs::write(path, records_to_string(file)).map_err(|e| io_err(path, e))
}
