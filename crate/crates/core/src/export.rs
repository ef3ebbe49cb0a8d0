//! Surface CSV files.
//!
//! ```text
//! # meta: alpha=0.9 span=0.75 open_hour=6 hours=17 days=7 ...
//! day,hour,alpha,q_hat
//! 1,6,0.9,12.84
//! ```
//!
//! `hour` is the wall-clock hour (`open_hour + t − 1`); `day` is the 1-based
//! day class. Values are written in shortest round-trip form so reading a
//! file back reproduces the fitted grid bit for bit.

use std::io::{self, BufRead, BufReader, Read, Write};

use thiserror::Error;

use crate::qam::QuantileSurface;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("surface file: {0}")]
    Format(String),
}

/// Extra `key=value` pairs echoed on the `# meta:` line after the
/// `alpha`, `open_hour`, `hours` and `days` keys the writer always emits.
pub type Meta = Vec<(String, String)>;

pub fn write_surface_csv<W: Write>(mut w: W, surface: &QuantileSurface, open_hour: u32, meta: &Meta) -> io::Result<()> {
    write!(
        w,
        "# meta: alpha={} open_hour={open_hour} hours={} days={}",
        surface.alpha,
        surface.t_count(),
        surface.j_count()
    )?;
    for (k, v) in meta {
        if !matches!(k.as_str(), "alpha" | "open_hour" | "hours" | "days") {
            write!(w, " {k}={v}")?;
        }
    }
    writeln!(w)?;
    writeln!(w, "day,hour,alpha,q_hat")?;
    for (t, j, v) in surface.cells() {
        writeln!(w, "{j},{},{},{v}", open_hour as usize + t - 1, surface.alpha)?;
    }
    Ok(())
}

/// A surface read back from disk.
#[derive(Debug, Clone)]
pub struct SurfaceFile {
    pub surface: QuantileSurface,
    pub open_hour: u32,
    pub meta: Meta,
}

impl SurfaceFile {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn parse_meta(line: &str) -> Meta {
    line.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn read_surface_csv<R: Read>(source: R) -> Result<SurfaceFile, ExportError> {
    let mut reader = BufReader::new(source);
    let mut meta = Meta::new();
    let mut body = String::new();
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        if let Some(rest) = line.trim_start().strip_prefix("# meta:") {
            meta.extend(parse_meta(rest));
        } else if !line.trim_start().starts_with('#') {
            body.push_str(&line);
        }
        line.clear();
    }
    let lookup = |key: &str| meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    let parse_num = |key: &str| -> Result<Option<usize>, ExportError> {
        lookup(key)
            .map(|v| v.parse::<usize>().map_err(|_| ExportError::Format(format!("bad meta {key}={v}"))))
            .transpose()
    };
    let open_hour = parse_num("open_hour")?.unwrap_or(6) as u32;

    let mut rows = Vec::new();
    let mut alpha = None;
    let mut csv_reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = csv_reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ExportError::Format(format!("missing column `{name}`")))
    };
    let (ci_day, ci_hour, ci_alpha, ci_q) = (col("day")?, col("hour")?, col("alpha")?, col("q_hat")?);
    for rec in csv_reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| ExportError::Format(format!("line {line}: bad {what}"));
        let day: usize = rec[ci_day].parse().map_err(|_| bad("day"))?;
        let hour: u32 = rec[ci_hour].parse().map_err(|_| bad("hour"))?;
        let a: f64 = rec[ci_alpha].parse().map_err(|_| bad("alpha"))?;
        let q: f64 = rec[ci_q].parse().map_err(|_| bad("q_hat"))?;
        if hour < open_hour || day == 0 {
            return Err(bad("day/hour"));
        }
        alpha.get_or_insert(a);
        rows.push(((hour - open_hour + 1) as usize, day, q));
    }
    let t_count = parse_num("hours")?.unwrap_or(0).max(rows.iter().map(|r| r.0).max().unwrap_or(0));
    let j_count = parse_num("days")?.unwrap_or(0).max(rows.iter().map(|r| r.1).max().unwrap_or(0));
    if t_count == 0 || j_count == 0 {
        return Err(ExportError::Format("no rows".into()));
    }
    let mut grid = vec![None; t_count * j_count];
    for (t, j, q) in rows {
        grid[(j - 1) * t_count + (t - 1)] = Some(q);
    }
    let alpha = alpha.unwrap_or(f64::NAN);
    Ok(SurfaceFile {
        surface: QuantileSurface::from_grid(alpha, t_count, j_count, grid),
        open_hour,
        meta,
    })
}
