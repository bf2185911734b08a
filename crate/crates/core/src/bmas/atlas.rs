//! Versioned text format for candidate tables.
//!
//! ```text
//! bmas-atlas 1
//! constellation qam4
//! mts 2
//! rows 2
//! pair_bits 4
//! delta 0.05
//! keep all
//! cap 32
//! budget 32
//! total_sfs 12
//! entries 12
//! lists 12
//! unresolved_sfs 0
//! sfs <index> <re> <im> activity <a> partition <hash> list <id>
//! list <id> <count>
//! <rows> <cols> <hex> <dmin> <unresolved> <residual>
//! checksum <sha256 of all preceding bytes>
//! ```

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::offline::{Candidate, CandidateTable, PruneSettings, SfsEntry};
use crate::error::{Error, Result};
use crate::modem::Modulation;
use crate::sfs::MappingScore;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "bmas-atlas";

/// Header fields that identify the scenario a table was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct AtlasHeader {
    pub version: u32,
    pub modulation: Modulation,
    pub mts: usize,
    pub rows: usize,
    pub settings: PruneSettings,
}

impl std::fmt::Display for AtlasHeader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{MAGIC} {} constellation={} mts={} rows={} keep={} delta={} cap={}",
            self.version,
            self.modulation,
            self.mts,
            self.rows,
            self.settings.keep.map_or("all".to_string(), |k| k.to_string()),
            self.settings.delta,
            self.settings.cap
        )
    }
}

impl CandidateTable {
    pub fn header(&self) -> AtlasHeader {
        AtlasHeader {
            version: FORMAT_VERSION,
            modulation: self.modulation,
            mts: self.mts,
            rows: self.rows,
            settings: self.settings,
        }
    }

    fn body_text(&self) -> String {
        let mut s = String::new();
        let keep = self.settings.keep.map_or("all".to_string(), |k| k.to_string());
        let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(s, "constellation {}", self.modulation);
        let _ = writeln!(s, "mts {}", self.mts);
        let _ = writeln!(s, "rows {}", self.rows);
        let _ = writeln!(s, "pair_bits {}", self.pair_bits());
        let _ = writeln!(s, "delta {}", self.settings.delta);
        let _ = writeln!(s, "keep {keep}");
        let _ = writeln!(s, "cap {}", self.settings.cap);
        let _ = writeln!(s, "budget {}", self.settings.budget);
        let _ = writeln!(s, "total_sfs {}", self.total_sfs);
        let _ = writeln!(s, "entries {}", self.entries.len());
        let _ = writeln!(s, "lists {}", self.lists.len());
        let _ = writeln!(s, "unresolved_sfs {}", self.unresolved_sfs());
        for e in &self.entries {
            let _ = writeln!(
                s,
                "sfs {} {} {} activity {} partition {} list {}",
                e.index, e.value.re, e.value.im, e.activity, e.partition_hash, e.list
            );
        }
        for (id, list) in self.lists.iter().enumerate() {
            let _ = writeln!(s, "list {id} {}", list.len());
            for c in list {
                let _ = writeln!(
                    s,
                    "{} {} {} {}",
                    c.matrix.to_text(),
                    c.score.dmin,
                    c.score.unresolved,
                    c.score.residual
                );
            }
        }
        s
    }

    /// Serialized atlas including the trailing checksum line.
    pub fn to_atlas_string(&self) -> String {
        let body = self.body_text();
        let sum = checksum(&body);
        format!("{body}checksum {sum}\n")
    }

    pub fn from_atlas_str(text: &str) -> Result<Self> {
        let body = verify_checksum(text)?;
        parse_body(body)
    }

    /// Writes atomically: a temporary file in the target directory is renamed
    /// into place.
    pub fn write_atlas(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_atlas_string().as_bytes())
    }

    pub fn read_atlas(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_atlas_str(&text)
    }
}

pub fn checksum(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

/// Checks the trailing checksum and returns the covered body.
pub fn verify_checksum(text: &str) -> Result<&str> {
    let trimmed = text.strip_suffix('\n').unwrap_or(text);
    let (body, last) = match trimmed.rfind('\n') {
        Some(i) => (&text[..=i], &trimmed[i + 1..]),
        None => return Err(Error::Atlas("missing checksum line".into())),
    };
    let stored = last
        .strip_prefix("checksum ")
        .ok_or_else(|| Error::Atlas("missing checksum line".into()))?
        .trim()
        .to_string();
    let computed = checksum(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    Ok(body)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Atlas("unexpected end of file".into()))
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let (n, line) = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::Atlas(format!("line {n}: expected `{key}`, found `{line}`")))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.field(key)?;
        raw.trim()
            .parse()
            .map_err(|_| Error::Atlas(format!("bad value `{raw}` for `{key}`")))
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Atlas(format!("line {line}: missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::Atlas(format!("line {line}: bad {what} `{tok}`")))
}

fn expect(tok: Option<&str>, word: &str, line: usize) -> Result<()> {
    if tok == Some(word) {
        Ok(())
    } else {
        Err(Error::Atlas(format!("line {line}: expected `{word}`")))
    }
}

fn parse_body(body: &str) -> Result<CandidateTable> {
    let mut lines = Lines {
        inner: body.lines().enumerate(),
    };
    let version: u32 = lines.parsed(MAGIC)?;
    if version != FORMAT_VERSION {
        return Err(Error::Atlas(format!(
            "unsupported atlas version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    let modulation: Modulation = lines.parsed("constellation")?;
    let mts: usize = lines.parsed("mts")?;
    let rows: usize = lines.parsed("rows")?;
    let pair_bits: usize = lines.parsed("pair_bits")?;
    if pair_bits != 2 * modulation.bits_per_symbol() {
        return Err(Error::Atlas(format!("pair_bits {pair_bits} does not match {modulation}")));
    }
    let delta: f64 = lines.parsed("delta")?;
    let keep = match lines.field("keep")? {
        "all" => None,
        k => Some(
            k.parse()
                .map_err(|_| Error::Atlas(format!("bad keep value `{k}`")))?,
        ),
    };
    let cap: usize = lines.parsed("cap")?;
    let budget: u32 = lines.parsed("budget")?;
    let total_sfs: usize = lines.parsed("total_sfs")?;
    let n_entries: usize = lines.parsed("entries")?;
    let n_lists: usize = lines.parsed("lists")?;
    let _unresolved: usize = lines.parsed("unresolved_sfs")?;

    let mut entries = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let (n, line) = lines.next_line()?;
        let mut t = line.split_whitespace();
        expect(t.next(), "sfs", n)?;
        let index: usize = num(t.next(), "sfs index", n)?;
        let re: f64 = num(t.next(), "real part", n)?;
        let im: f64 = num(t.next(), "imaginary part", n)?;
        expect(t.next(), "activity", n)?;
        let activity: f64 = num(t.next(), "activity", n)?;
        expect(t.next(), "partition", n)?;
        let partition_hash = t
            .next()
            .ok_or_else(|| Error::Atlas(format!("line {n}: missing partition hash")))?
            .to_string();
        expect(t.next(), "list", n)?;
        let list: usize = num(t.next(), "list id", n)?;
        if list >= n_lists {
            return Err(Error::Atlas(format!("line {n}: list id {list} out of range")));
        }
        entries.push(SfsEntry {
            index,
            value: Complex64::new(re, im),
            activity,
            partition_hash,
            list,
        });
    }

    let mut lists = Vec::with_capacity(n_lists);
    for id in 0..n_lists {
        let (n, line) = lines.next_line()?;
        let mut t = line.split_whitespace();
        expect(t.next(), "list", n)?;
        let got: usize = num(t.next(), "list id", n)?;
        if got != id {
            return Err(Error::Atlas(format!("line {n}: expected list {id}, found {got}")));
        }
        let count: usize = num(t.next(), "candidate count", n)?;
        if count == 0 {
            return Err(Error::Atlas(format!("line {n}: empty candidate list {id}")));
        }
        let mut list = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = lines.next_line()?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 6 {
                return Err(Error::Atlas(format!("line {n}: malformed candidate `{line}`")));
            }
            let matrix = t[..3]
                .join(" ")
                .parse()
                .map_err(|e| Error::Atlas(format!("line {n}: {e}")))?;
            let score = MappingScore {
                dmin: num(Some(t[3]), "dmin", n)?,
                unresolved: num(Some(t[4]), "unresolved count", n)?,
                residual: num(Some(t[5]), "residual", n)?,
            };
            list.push(Candidate { matrix, score });
        }
        lists.push(list);
    }
    if let Ok((n, line)) = lines.next_line() {
        return Err(Error::Atlas(format!("line {n}: unexpected trailing content `{line}`")));
    }
    let table = CandidateTable {
        modulation,
        mts,
        rows,
        settings: PruneSettings {
            keep,
            delta,
            cap,
            budget,
        },
        total_sfs,
        entries,
        lists,
    };
    for (id, list) in table.lists.iter().enumerate() {
        for c in list {
            if c.matrix.rows() != rows || c.matrix.cols() != pair_bits {
                return Err(Error::Atlas(format!(
                    "list {id}: matrix is {}x{}, header says {rows}x{pair_bits}",
                    c.matrix.rows(),
                    c.matrix.cols()
                )));
            }
        }
    }
    Ok(table)
}
