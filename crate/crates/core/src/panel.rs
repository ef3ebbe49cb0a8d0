//! Hourly sales records and the replicated (hour, day-class) panel.
//!
//! Observations are stored flat, ordered by day class, then hour, then
//! replicate in input order. Hours `t` and day classes `j` are 1-based
//! throughout the crate: `t ∈ 1..=T`, `j ∈ 1..=J`.

use std::fmt;
use std::io::Read;
use std::ops::Range;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal, Normal, Poisson};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("CSV read error: {0}")]
    Csv(#[from] csv::Error),
    #[error("record {index} ({date}): hour index {hour} outside 1..={t_count}")]
    HourOutOfRange {
        index: usize,
        date: NaiveDate,
        hour: usize,
        t_count: usize,
    },
    #[error("record {index} ({date}): day class {day} outside 1..={j_count}")]
    DayClassOutOfRange {
        index: usize,
        date: NaiveDate,
        day: usize,
        j_count: usize,
    },
    #[error("unsupported distribution `{0}` (expected normal, lognormal or poisson)")]
    UnsupportedDistribution(String),
    #[error("invalid panel: {0}")]
    Invalid(String),
}

/// One hourly sales count. `hour` is the model index `t`, already shifted so
/// that the store's opening hour maps to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SalesRecord {
    pub date: NaiveDate,
    pub hour: usize,
    pub quantity: f64,
}

/// Column names and hour mapping for [`parse_csv`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub date_col: String,
    pub hour_col: String,
    pub qty_col: String,
    /// Wall-clock hour that maps to `t = 1`.
    pub open_hour: u32,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_col: "date".into(),
            hour_col: "hour".into(),
            qty_col: "qty".into(),
            open_hour: 6,
        }
    }
}

/// Parses hourly sales rows. The first malformed row aborts the parse with
/// its line number; nothing is dropped silently.
pub fn parse_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<Vec<SalesRecord>, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    };
    let date_idx = column(&schema.date_col)?;
    let hour_idx = column(&schema.hour_col)?;
    let qty_idx = column(&schema.qty_col)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| PanelError::Row { line, message };
        let field = |idx: usize| row.get(idx).unwrap_or("");

        let date = NaiveDate::parse_from_str(field(date_idx), "%Y-%m-%d")
            .map_err(|e| err(format!("bad date `{}`: {e}", field(date_idx))))?;
        let clock: u32 = field(hour_idx)
            .parse()
            .map_err(|_| err(format!("bad hour `{}`", field(hour_idx))))?;
        if clock < schema.open_hour {
            return Err(err(format!(
                "hour {clock} is before the opening hour {}",
                schema.open_hour
            )));
        }
        let quantity: f64 = field(qty_idx)
            .parse()
            .map_err(|_| err(format!("bad quantity `{}`", field(qty_idx))))?;
        if !quantity.is_finite() {
            return Err(err(format!("non-finite quantity `{}`", field(qty_idx))));
        }
        if quantity < 0.0 {
            return Err(err(format!("negative quantity {quantity}")));
        }
        records.push(SalesRecord {
            date,
            hour: (clock - schema.open_hour + 1) as usize,
            quantity,
        });
    }
    Ok(records)
}

/// ISO day of week, Monday = 1 through Sunday = 7.
pub fn iso_weekday(date: NaiveDate) -> usize {
    date.weekday().number_from_monday() as usize
}

pub const WEEKDAY_NAMES: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

/// Replicated observations `y[t][j][i]`, immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SalesPanel {
    t_count: usize,
    j_count: usize,
    /// Start of each cell in the flat vector, cell index `(j-1)*T + (t-1)`,
    /// with a trailing sentinel equal to `n`.
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl SalesPanel {
    /// Builds a panel from per-cell replicate lists indexed `cells[j-1][t-1]`.
    pub fn from_cells(cells: Vec<Vec<Vec<f64>>>, t_count: usize) -> Result<Self, PanelError> {
        if t_count == 0 || cells.is_empty() {
            return Err(PanelError::Invalid("panel needs T >= 1 and J >= 1".into()));
        }
        let j_count = cells.len();
        let mut offsets = Vec::with_capacity(t_count * j_count + 1);
        let mut values = Vec::new();
        for (j, day) in cells.into_iter().enumerate() {
            if day.len() != t_count {
                return Err(PanelError::Invalid(format!(
                    "day class {} has {} hours, expected {t_count}",
                    j + 1,
                    day.len()
                )));
            }
            for cell in day {
                offsets.push(values.len());
                values.extend(cell);
            }
        }
        offsets.push(values.len());
        Ok(Self {
            t_count,
            j_count,
            offsets,
            values,
        })
    }

    pub fn t_count(&self) -> usize {
        self.t_count
    }

    pub fn j_count(&self) -> usize {
        self.j_count
    }

    /// Total observation count `n`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flattened observations.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn cell_index(&self, t: usize, j: usize) -> usize {
        assert!(
            (1..=self.t_count).contains(&t) && (1..=self.j_count).contains(&j),
            "cell ({t}, {j}) outside {}x{} panel",
            self.t_count,
            self.j_count
        );
        (j - 1) * self.t_count + (t - 1)
    }

    /// Flat positions of cell `(t, j)`.
    pub fn cell_range(&self, t: usize, j: usize) -> Range<usize> {
        let c = self.cell_index(t, j);
        self.offsets[c]..self.offsets[c + 1]
    }

    pub fn cell(&self, t: usize, j: usize) -> &[f64] {
        &self.values[self.cell_range(t, j)]
    }

    pub fn cell_count(&self, t: usize, j: usize) -> usize {
        self.cell_range(t, j).len()
    }

    /// Flat positions of every observation in day class `j`.
    pub fn day_range(&self, j: usize) -> Range<usize> {
        self.cell_range(1, j).start..self.cell_range(self.t_count, j).end
    }

    /// Position of replicate `i` (1-based) of cell `(t, j)`.
    pub fn flat_index(&self, t: usize, j: usize, i: usize) -> Option<usize> {
        if !(1..=self.t_count).contains(&t) || !(1..=self.j_count).contains(&j) || i == 0 {
            return None;
        }
        let range = self.cell_range(t, j);
        let pos = range.start + i - 1;
        (pos < range.end).then_some(pos)
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn locate(&self, pos: usize) -> Option<(usize, usize, usize)> {
        if pos >= self.values.len() {
            return None;
        }
        // last cell whose start is <= pos; empty cells share starts, so take the
        // last one
        let cell = self.offsets.partition_point(|&o| o <= pos) - 1;
        let t = cell % self.t_count + 1;
        let j = cell / self.t_count + 1;
        Some((t, j, pos - self.offsets[cell] + 1))
    }

    /// Iterates `(t, j, range)` over non-empty cells in flat order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Range<usize>)> + '_ {
        (0..self.t_count * self.j_count).filter_map(move |c| {
            let range = self.offsets[c]..self.offsets[c + 1];
            (!range.is_empty()).then(|| (c % self.t_count + 1, c / self.t_count + 1, range))
        })
    }

    /// Hour index `t` of every observation, in flat order.
    pub fn obs_hours(&self) -> Vec<usize> {
        let mut hours = vec![0; self.len()];
        for (t, _, range) in self.cells() {
            hours[range].fill(t);
        }
        hours
    }
}

/// Groups records into a panel with `t_count` hours and `j_count` day classes.
pub fn build_panel<F>(
    records: &[SalesRecord],
    t_count: usize,
    j_count: usize,
    day_class: F,
) -> Result<SalesPanel, PanelError>
where
    F: Fn(NaiveDate) -> usize,
{
    if t_count == 0 || j_count == 0 {
        return Err(PanelError::Invalid("panel needs T >= 1 and J >= 1".into()));
    }
    let mut cells = vec![vec![Vec::new(); t_count]; j_count];
    for (index, rec) in records.iter().enumerate() {
        if !(1..=t_count).contains(&rec.hour) {
            return Err(PanelError::HourOutOfRange {
                index,
                date: rec.date,
                hour: rec.hour,
                t_count,
            });
        }
        let day = day_class(rec.date);
        if !(1..=j_count).contains(&day) {
            return Err(PanelError::DayClassOutOfRange {
                index,
                date: rec.date,
                day,
                j_count,
            });
        }
        cells[day - 1][rec.hour - 1].push(rec.quantity);
    }
    SalesPanel::from_cells(cells, t_count)
}

/// [`build_panel`] with ISO day-of-week classes (`J = 7`).
pub fn build_weekday_panel(records: &[SalesRecord], t_count: usize) -> Result<SalesPanel, PanelError> {
    build_panel(records, t_count, 7, iso_weekday)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Normal,
    LogNormal,
    /// Uses the cell mean as rate; the cell sd is ignored.
    Poisson,
}

impl FromStr for Distribution {
    type Err = PanelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Self::Normal),
            "lognormal" | "log-normal" => Ok(Self::LogNormal),
            "poisson" => Ok(Self::Poisson),
            _ => Err(PanelError::UnsupportedDistribution(s.to_string())),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Normal => "normal",
            Self::LogNormal => "lognormal",
            Self::Poisson => "poisson",
        })
    }
}

type CellFn = Box<dyn Fn(usize, usize) -> f64 + Send + Sync>;

/// Recipe for a synthetic panel with i.i.d. replicates per cell.
pub struct SyntheticSpec {
    pub t_count: usize,
    pub j_count: usize,
    pub replicates: usize,
    /// Cell mean as a function of `(t, j)`.
    pub mean_fn: CellFn,
    /// Cell standard deviation as a function of `(t, j)`.
    pub sd_fn: CellFn,
    pub distribution: Distribution,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(
        t_count: usize,
        j_count: usize,
        replicates: usize,
        mean_fn: impl Fn(usize, usize) -> f64 + Send + Sync + 'static,
        sd_fn: impl Fn(usize, usize) -> f64 + Send + Sync + 'static,
        distribution: Distribution,
        seed: u64,
    ) -> Self {
        Self {
            t_count,
            j_count,
            replicates,
            mean_fn: Box::new(mean_fn),
            sd_fn: Box::new(sd_fn),
            distribution,
            seed,
        }
    }
}

impl fmt::Debug for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyntheticSpec")
            .field("t_count", &self.t_count)
            .field("j_count", &self.j_count)
            .field("replicates", &self.replicates)
            .field("distribution", &self.distribution)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// Draws a panel from `spec`. Cells are filled in flat order from a single
/// ChaCha8 stream, so the output is a pure function of the spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SalesPanel, PanelError> {
    if spec.replicates == 0 {
        return Err(PanelError::Invalid("replicates must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cells = Vec::with_capacity(spec.j_count);
    for j in 1..=spec.j_count {
        let mut day = Vec::with_capacity(spec.t_count);
        for t in 1..=spec.t_count {
            let mean = (spec.mean_fn)(t, j);
            let sd = (spec.sd_fn)(t, j);
            if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
                return Err(PanelError::Invalid(format!(
                    "cell ({t}, {j}): mean {mean}, sd {sd}"
                )));
            }
            let cell = draw_cell(&mut rng, spec.distribution, mean, sd, spec.replicates)
                .map_err(|m| PanelError::Invalid(format!("cell ({t}, {j}): {m}")))?;
            day.push(cell);
        }
        cells.push(day);
    }
    SalesPanel::from_cells(cells, spec.t_count)
}

fn draw_cell(
    rng: &mut ChaCha8Rng,
    dist: Distribution,
    mean: f64,
    sd: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    match dist {
        Distribution::Normal => {
            let d = Normal::new(mean, sd).map_err(|e| e.to_string())?;
            Ok((0..n).map(|_| d.sample(rng)).collect())
        }
        Distribution::LogNormal => {
            if mean <= 0.0 {
                return Err(format!("lognormal needs a positive mean, got {mean}"));
            }
            if sd == 0.0 {
                return Ok(vec![mean; n]);
            }
            // moment matching on the log scale
            let s2 = (1.0 + (sd / mean).powi(2)).ln();
            let d = LogNormal::new(mean.ln() - 0.5 * s2, s2.sqrt()).map_err(|e| e.to_string())?;
            Ok((0..n).map(|_| d.sample(rng)).collect())
        }
        Distribution::Poisson => {
            if mean < 0.0 {
                return Err(format!("poisson needs a non-negative mean, got {mean}"));
            }
            if mean == 0.0 {
                return Ok(vec![0.0; n]);
            }
            let d = Poisson::new(mean).map_err(|e| e.to_string())?;
            Ok((0..n).map(|_| d.sample(rng)).collect())
        }
    }
}
