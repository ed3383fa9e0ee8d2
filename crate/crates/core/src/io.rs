//! Text formats.
//!
//! * Edge lists: one `s t weight` line per nonzero coupling, nodes numbered
//!   from 1. A `# p = N` comment fixes the node count; otherwise it is the
//!   largest node mentioned. Other `#` lines and blank lines are ignored.
//! * Sample CSVs: one row per sample, one column per node, entries `-1`/`+1`
//!   (or `0`/`1` with [`SampleFormat::binary01`]).
//! * Task manifests: a TOML file listing one sample CSV per task.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{IsingParameter, SampleMatrix};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Parses an edge list. `path` is only used in error messages.
pub fn parse_edge_list(text: &str, path: &Path) -> Result<IsingParameter> {
    let mut declared_p = None;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim().strip_prefix("p") {
                if let Some(value) = rest.trim().strip_prefix('=') {
                    let p = value.trim().parse::<usize>().map_err(|e| parse_err(path, line_no, format!("bad node count: {e}")))?;
                    declared_p = Some(p);
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        if fields.len() != 3 {
            return Err(parse_err(path, line_no, format!("expected 's t weight', got {} fields", fields.len())));
        }
        let node = |f: &str| -> Result<usize> {
            match f.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(parse_err(path, line_no, format!("bad node '{f}' (nodes are numbered from 1)"))),
            }
        };
        let (s, t) = (node(fields[0])?, node(fields[1])?);
        let w: f64 = fields[2].parse().map_err(|_| parse_err(path, line_no, format!("bad weight '{}'", fields[2])))?;
        if s == t {
            return Err(parse_err(path, line_no, "self-loop"));
        }
        if !w.is_finite() {
            return Err(parse_err(path, line_no, "weight is not finite"));
        }
        edges.push((s.min(t), s.max(t), w, line_no));
    }
    let max_node = edges.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    let p = match declared_p {
        Some(p) if p < max_node => return Err(parse_err(path, 0, format!("node {max_node} exceeds declared p = {p}"))),
        Some(p) => p,
        None => max_node,
    };
    let mut theta = IsingParameter::zeros(p).map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();
    for (s, t, w, line_no) in edges {
        if !seen.insert((s, t)) {
            return Err(parse_err(path, line_no, format!("pair ({}, {}) listed twice", s + 1, t + 1)));
        }
        theta.set(s, t, w);
    }
    Ok(theta)
}

pub fn read_edge_list(path: &Path) -> Result<IsingParameter> {
    parse_edge_list(&fs::read_to_string(path)?, path)
}

/// Formats `theta` as an edge list with a `# p = N` header.
pub fn format_edge_list(theta: &IsingParameter) -> String {
    let mut out = format!("# p = {}\n", theta.p());
    for (s, t, w) in theta.edges() {
        writeln!(out, "{} {} {}", s + 1, t + 1, w).unwrap();
    }
    out
}

pub fn write_edge_list(path: &Path, theta: &IsingParameter) -> Result<()> {
    fs::write(path, format_edge_list(theta))?;
    Ok(())
}

/// How a sample CSV is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleFormat {
    /// Read `0` as `-1` and `1` as `+1`.
    pub binary01: bool,
    /// Skip the first row.
    pub header: bool,
}

/// Parses a sample CSV. `path` is only used in error messages.
pub fn parse_samples(text: &str, path: &Path, format: SampleFormat) -> Result<SampleMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(format.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut width = None;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |pos| pos.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |pos| pos.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(path, line, format!("row has {} entries, expected {w}", record.len())));
            }
            _ => {}
        }
        for field in &record {
            let v = match (field, format.binary01) {
                ("1" | "+1", _) => 1,
                ("-1", false) | ("0", true) => -1,
                _ => {
                    let allowed = if format.binary01 { "0 or 1" } else { "-1 or +1" };
                    return Err(parse_err(path, line, format!("entry '{field}' is not {allowed}")));
                }
            };
            values.push(v);
        }
    }
    let p = width.ok_or_else(|| parse_err(path, 0, "no samples"))?;
    SampleMatrix::new(p, values).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn read_samples(path: &Path, format: SampleFormat) -> Result<SampleMatrix> {
    parse_samples(&fs::read_to_string(path)?, path, format)
}

/// Formats samples as headerless `-1`/`1` CSV.
pub fn format_samples(samples: &SampleMatrix) -> String {
    let mut out = String::with_capacity(samples.n() * samples.p() * 3);
    for row in samples.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_samples(path: &Path, samples: &SampleMatrix) -> Result<()> {
    fs::write(path, format_samples(samples))?;
    Ok(())
}

/// A list of per-task sample files.
///
/// ```toml
/// binary01 = true
/// tasks = ["subject01.csv", "subject02.csv"]
/// ```
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskManifest {
    pub tasks: Vec<PathBuf>,
    #[serde(flatten)]
    pub format: SampleFormat,
}

impl TaskManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut manifest: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for task in &mut manifest.tasks {
            if task.is_relative() {
                *task = base.join(&*task);
            }
        }
        Ok(manifest)
    }
}

/// Reads one sample set per path and checks they share a node count.
pub fn ingest_samples(paths: &[PathBuf], format: SampleFormat) -> Result<Vec<SampleMatrix>> {
    if paths.is_empty() {
        return Err(Error::Config("no sample files given".into()));
    }
    let mut sets: Vec<SampleMatrix> = Vec::with_capacity(paths.len());
    for path in paths {
        let set = read_samples(path, format)?;
        if let Some(first) = sets.first() {
            if first.p() != set.p() {
                return Err(parse_err(
                    path,
                    1,
                    format!("{} columns, but {} has {}", set.p(), paths[0].display(), first.p()),
                ));
            }
        }
        sets.push(set);
    }
    Ok(sets)
}

pub fn ingest_manifest(manifest: &Path) -> Result<Vec<SampleMatrix>> {
    let m = TaskManifest::read(manifest)?;
    ingest_samples(&m.tasks, m.format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn four_by_three() {
        let s = parse_samples("1,-1,1\n-1,-1,1\n1,1,1\n-1,1,-1\n", p(), SampleFormat::default()).unwrap();
        assert_eq!((s.n(), s.p()), (4, 3));
        assert_eq!(s.row(3), &[-1, 1, -1]);
    }

    #[test]
    fn binary01_mapping() {
        let fmt = SampleFormat { binary01: true, header: true };
        let s = parse_samples("a,b\n0,1\n1,0\n", p(), fmt).unwrap();
        assert_eq!(s.values(), &[-1, 1, 1, -1]);
        assert!(parse_samples("-1,1\n", p(), SampleFormat { binary01: true, header: false }).is_err());
        assert!(parse_samples("0,1\n", p(), SampleFormat::default()).is_err());
    }

    #[test]
    fn bad_entry_names_line() {
        let err = parse_samples("1,-1\n1,2\n", p(), SampleFormat::default()).unwrap_err();
        match err {
            Error::Parse { path, line, msg } => {
                assert_eq!(path, Path::new("mem.csv"));
                assert_eq!(line, 2);
                assert!(msg.contains("'2'"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let msg = parse_samples("1,-1\n1,1\n1\n", p(), SampleFormat::default()).unwrap_err().to_string();
        assert!(msg.contains("mem.csv") && msg.contains('3'), "{msg}");
    }

    #[test]
    fn samples_round_trip() {
        let s = SampleMatrix::from_rows(&[vec![1, -1, 1], vec![-1, -1, -1]]).unwrap();
        let back = parse_samples(&format_samples(&s), p(), SampleFormat::default()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn edge_list_round_trip() {
        let theta = IsingParameter::from_edges(5, &[(0, 2, 0.5), (3, 4, -0.25)]).unwrap();
        let text = format_edge_list(&theta);
        assert_eq!(text, "# p = 5\n1 3 0.5\n4 5 -0.25\n");
        assert_eq!(parse_edge_list(&text, p()).unwrap(), theta);
        let inferred = parse_edge_list("1 2 0.5\n# note\n\n2 3 -1\n", p()).unwrap();
        assert_eq!(inferred.p(), 3);
        assert_eq!(inferred.get(1, 2), -1.0);
    }

    #[test]
    fn edge_list_errors() {
        for bad in ["1 1 0.5\n", "0 2 0.5\n", "1 2\n", "1 2 x\n", "# p = 2\n1 3 0.1\n", "1 2 0.1\n2 1 0.3\n"] {
            assert!(parse_edge_list(bad, p()).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn manifest_ingest_checks_widths() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "1,0,1\n0,0,1\n").unwrap();
        fs::write(dir.path().join("b.csv"), "1,1,1\n").unwrap();
        fs::write(dir.path().join("c.csv"), "1,1\n").unwrap();
        let manifest = dir.path().join("tasks.toml");
        fs::write(&manifest, "binary01 = true\ntasks = [\"a.csv\", \"b.csv\"]\n").unwrap();
        let sets = ingest_manifest(&manifest).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].row(1), &[-1, -1, 1]);
        fs::write(&manifest, "binary01 = true\ntasks = [\"a.csv\", \"c.csv\"]\n").unwrap();
        let msg = ingest_manifest(&manifest).unwrap_err().to_string();
        assert!(msg.contains("c.csv"), "{msg}");
    }
}
