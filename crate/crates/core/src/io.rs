//! Edge-list ingestion and emission.
//!
//! A temporal edge list is a text file with one interaction per row —
//! source, destination, timestamp in a configurable column order — plus
//! optional comment lines. Parsing remaps arbitrary node labels to dense
//! ids (the mapping is kept on the dataset), converts timestamps to model
//! time by optional zero-basing and scaling, drops self-loops with a count,
//! and keeps duplicate rows (one row per recipient is a real pattern in
//! email data).
//!
//! The writer renders timestamps with Rust's shortest-round-trip float
//! formatting and records the observation horizon in a `# horizon …`
//! comment, so a write → parse cycle reproduces a dataset exactly.

use crate::dataset::{Interaction, InteractionDataset};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// A field of an edge-list row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Src,
    Dst,
    Time,
}

/// How to read a temporal edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeListSpec {
    /// Meaning of the first three fields of each row, a permutation of
    /// src/dst/time.
    pub columns: [Column; 3],
    /// `None` splits rows on ASCII whitespace; `Some(c)` on that character.
    pub delimiter: Option<char>,
    /// Multiplies every timestamp (after zero-basing): e.g. `1/86400`
    /// converts Unix seconds to days.
    pub time_scale: f64,
    /// Shift times so the earliest interaction sits at 0.
    pub zero_base: bool,
    /// Lines starting with this character are skipped (a `horizon`
    /// directive in a comment is still honored).
    pub comment: Option<char>,
}

impl Default for EdgeListSpec {
    fn default() -> Self {
        EdgeListSpec {
            columns: [Column::Src, Column::Dst, Column::Time],
            delimiter: None,
            time_scale: 1.0,
            zero_base: true,
            comment: Some('#'),
        }
    }
}

impl EdgeListSpec {
    pub fn validate(&self) -> Result<()> {
        let mut seen = [false; 3];
        for c in self.columns {
            seen[c as usize] = true;
        }
        if seen != [true; 3] {
            return Err(Error::Config(
                "column order must be a permutation of src, dst, time".into(),
            ));
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return Err(Error::invalid(
                "time_scale",
                self.time_scale,
                "must be positive and finite",
            ));
        }
        Ok(())
    }

    /// Parses a `--format`-style column list like `"time,src,dst"`.
    pub fn parse_columns(format: &str) -> Result<[Column; 3]> {
        let names: Vec<&str> = format.split(',').map(str::trim).collect();
        if names.len() != 3 {
            return Err(Error::Config(format!(
                "format `{format}` must list exactly three columns"
            )));
        }
        let mut columns = [Column::Src; 3];
        for (slot, name) in columns.iter_mut().zip(&names) {
            *slot = match *name {
                "src" => Column::Src,
                "dst" => Column::Dst,
                "time" => Column::Time,
                other => {
                    return Err(Error::Config(format!(
                        "unknown column `{other}` (expected src, dst, time)"
                    )))
                }
            };
        }
        let spec = EdgeListSpec { columns, ..EdgeListSpec::default() };
        spec.validate()?;
        Ok(columns)
    }
}

/// A parsed edge list: the dataset (labels attached) plus what was dropped.
#[derive(Debug, Clone)]
pub struct ParsedEdgeList {
    pub dataset: InteractionDataset,
    /// Rows removed because source equalled destination.
    pub self_loops_dropped: usize,
}

/// Reads a temporal edge list from disk. See [`parse_edge_list_str`].
pub fn parse_edge_list(path: impl AsRef<Path>, spec: &EdgeListSpec) -> Result<ParsedEdgeList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_edge_list_str(&path.display().to_string(), &text, spec)
}

/// Parses edge-list text. `name` labels the source in error messages.
///
/// Node labels are remapped to dense ids `0..V` in numeric order when every
/// label is an unsigned integer, lexicographic order otherwise; the ordered
/// labels are stored on the dataset so the mapping round-trips. The horizon
/// is the latest transformed timestamp unless a `# horizon t` comment says
/// otherwise (the directive undergoes the same zero-basing and scaling as
/// the data). A file whose events all share one timestamp gets a unit
/// horizon so the degenerate window stays representable.
pub fn parse_edge_list_str(
    name: &str,
    text: &str,
    spec: &EdgeListSpec,
) -> Result<ParsedEdgeList> {
    spec.validate()?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: name.to_string(),
        line,
        message,
    };

    let mut rows: Vec<(String, String, f64)> = Vec::new();
    let mut self_loops_dropped = 0usize;
    let mut horizon_directive: Option<f64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = spec.comment {
            if let Some(rest) = line.strip_prefix(c) {
                let mut words = rest.split_whitespace();
                if words.next() == Some("horizon") {
                    let value = words.next().ok_or_else(|| {
                        parse_err(line_no, "horizon directive missing a value".into())
                    })?;
                    horizon_directive = Some(value.parse::<f64>().map_err(|_| {
                        parse_err(line_no, format!("cannot parse horizon `{value}`"))
                    })?);
                }
                continue;
            }
        }
        let fields: Vec<&str> = match spec.delimiter {
            None => line.split_whitespace().collect(),
            Some(d) => line.split(d).map(str::trim).collect(),
        };
        if fields.len() < 3 {
            return Err(parse_err(
                line_no,
                format!("expected at least 3 fields, got {}", fields.len()),
            ));
        }
        let mut src = "";
        let mut dst = "";
        let mut time_field = "";
        for (column, field) in spec.columns.iter().zip(&fields) {
            match column {
                Column::Src => src = field,
                Column::Dst => dst = field,
                Column::Time => time_field = field,
            }
        }
        let time: f64 = time_field
            .parse()
            .map_err(|_| parse_err(line_no, format!("cannot parse time `{time_field}`")))?;
        if !time.is_finite() {
            return Err(parse_err(line_no, format!("non-finite time `{time_field}`")));
        }
        if src == dst {
            self_loops_dropped += 1;
            continue;
        }
        rows.push((src.to_string(), dst.to_string(), time));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("edge list has no interactions"));
    }

    // Dense ids in a canonical label order, so parsing is reproducible.
    let mut labels: Vec<String> = rows
        .iter()
        .flat_map(|(s, d, _)| [s.clone(), d.clone()])
        .collect();
    labels.sort_unstable();
    labels.dedup();
    let all_numeric = labels.iter().all(|l| l.parse::<u64>().is_ok());
    if all_numeric {
        labels.sort_by(|a, b| {
            let (x, y) = (a.parse::<u64>().unwrap(), b.parse::<u64>().unwrap());
            x.cmp(&y).then_with(|| a.cmp(b))
        });
    }
    let ids: BTreeMap<&str, u32> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();

    let t_min = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let shift = if spec.zero_base { t_min } else { 0.0 };
    let transform = |t: f64| (t - shift) * spec.time_scale;
    let interactions: Vec<Interaction> = rows
        .iter()
        .map(|(s, d, t)| Interaction {
            time: transform(*t),
            src: ids[s.as_str()],
            dst: ids[d.as_str()],
        })
        .collect();
    if let Some(bad) = interactions.iter().find(|e| e.time < 0.0) {
        return Err(Error::invalid(
            "time",
            bad.time,
            "negative after transformation; enable zero-basing or shift the data",
        ));
    }
    let t_max = interactions.iter().map(|e| e.time).fold(0.0, f64::max);
    let horizon = match horizon_directive.map(transform) {
        Some(h) if h >= t_max && h > 0.0 => h,
        Some(h) => {
            return Err(Error::invalid(
                "horizon",
                h,
                "declared horizon does not cover the interactions",
            ))
        }
        None if t_max > 0.0 => t_max,
        None => 1.0,
    };
    let mut dataset = InteractionDataset::new(interactions, labels.len(), horizon)?;
    dataset.labels = Some(labels);
    Ok(ParsedEdgeList { dataset, self_loops_dropped })
}

/// Renders an edge list: header comments (each line prefixed `# `), a
/// `# horizon` directive, then one `src dst time` row per interaction with
/// shortest-round-trip timestamps. Node labels are used when the dataset
/// has them, dense ids otherwise.
pub fn render_edge_list(dataset: &InteractionDataset, header: &[String]) -> String {
    let mut out = String::new();
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "# horizon {}", dataset.horizon());
    let label = |id: u32| match &dataset.labels {
        Some(labels) => labels[id as usize].clone(),
        None => id.to_string(),
    };
    for ev in dataset.interactions() {
        let _ = writeln!(out, "{} {} {}", label(ev.src), label(ev.dst), ev.time);
    }
    out
}

/// Writes [`render_edge_list`] output to disk.
pub fn write_edge_list(
    path: impl AsRef<Path>,
    dataset: &InteractionDataset,
    header: &[String],
) -> Result<()> {
    std::fs::write(path, render_edge_list(dataset, header))?;
    Ok(())
}

/// Spec for reading data written by [`write_edge_list`] back verbatim: no
/// zero-basing or rescaling, `#` comments.
pub fn round_trip_spec() -> EdgeListSpec {
    EdgeListSpec {
        zero_base: false,
        ..EdgeListSpec::default()
    }
}
