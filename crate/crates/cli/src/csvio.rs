//! Panel CSV files.
//!
//! Layout: a header row, a key column (`t`, `date`, `DATE` or
//! `observation_date`), then `y1..yq`, `x1..xr`, `w1..ws` in any order.
//! Several files are inner-joined on the key, which is how single-series
//! FRED exports are combined.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use breakscan::TimeSeriesPanel;
use nalgebra::DMatrix;

/// Missing-value marker in FRED exports.
const FRED_MISSING: &str = ".";

/// A panel together with the key of every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPanel {
    pub panel: TimeSeriesPanel,
    /// Key column values, one per observation.
    pub labels: Vec<String>,
    /// Whether the key column holds dates.
    pub dated: bool,
}

/// How to read the input files.
#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    /// `(from, to)` column renames applied after joining; `to == "_"` drops
    /// the column.
    pub renames: Vec<(String, String)>,
    pub trend: bool,
    pub intercept: bool,
    /// Skip rows holding the FRED missing-value marker instead of failing.
    pub drop_missing: bool,
}

struct Table {
    key_name: String,
    columns: Vec<String>,
    /// `(key, line, cells)` in file order.
    rows: Vec<(String, u64, Vec<String>)>,
    source: String,
}

fn is_key(name: &str) -> bool {
    matches!(
        name.to_ascii_lowercase().as_str(),
        "t" | "date" | "observation_date"
    )
}

fn read_table(path: &Path) -> Result<Table> {
    let source = path.display().to_string();
    let file = File::open(path).with_context(|| format!("cannot open {source}"))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .with_context(|| format!("{source}: cannot read header"))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        bail!("{source}: empty input");
    }
    if !is_key(&header[0]) {
        bail!(
            "{source}: line 1: first column must be t, date or DATE, found '{}'",
            header[0]
        );
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("{source}: malformed row"))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            bail!(
                "{source}: line {line}: expected {} fields, found {}",
                header.len(),
                record.len()
            );
        }
        let cells: Vec<String> = record.iter().map(str::to_string).collect();
        rows.push((cells[0].clone(), line, cells[1..].to_vec()));
    }
    if rows.is_empty() {
        bail!("{source}: no observations");
    }
    Ok(Table {
        key_name: header[0].clone(),
        columns: header[1..].to_vec(),
        rows,
        source,
    })
}

/// Role of a column: `(kind, 1-based position)`.
fn role(name: &str) -> Option<(char, usize)> {
    let mut chars = name.chars();
    let kind = chars.next()?.to_ascii_lowercase();
    if !matches!(kind, 'y' | 'x' | 'w') {
        return None;
    }
    let k: usize = chars.as_str().parse().ok()?;
    (k >= 1).then_some((kind, k))
}

/// Reads and joins `paths` into a panel.
pub fn read_panel(paths: &[impl AsRef<Path>], options: &ReadOptions) -> Result<LabeledPanel> {
    if paths.is_empty() {
        bail!("no input files");
    }
    let tables = paths
        .iter()
        .map(|p| read_table(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let dated = !tables[0].key_name.eq_ignore_ascii_case("t");

    // Columns across files, with the file and position they come from.
    let mut columns: Vec<(String, usize, usize)> = Vec::new();
    for (f, table) in tables.iter().enumerate() {
        for (c, name) in table.columns.iter().enumerate() {
            let mut name = name.clone();
            if let Some((_, to)) = options.renames.iter().find(|(from, _)| *from == name) {
                name = to.clone();
            }
            if name == "_" {
                continue;
            }
            if columns.iter().any(|(n, _, _)| *n == name) {
                bail!("column '{name}' appears more than once");
            }
            columns.push((name, f, c));
        }
    }
    for (from, _) in &options.renames {
        if !tables.iter().any(|t| t.columns.contains(from)) {
            bail!("--map refers to unknown column '{from}'");
        }
    }

    let mut by_role: HashMap<char, Vec<(usize, usize, usize)>> = HashMap::new();
    for (name, f, c) in &columns {
        let (kind, k) = role(name).ok_or_else(|| {
            anyhow!("column '{name}' has no role; rename it to y<k>, x<k> or w<k> with --map, or drop it with --map {name}=_")
        })?;
        by_role.entry(kind).or_default().push((k, *f, *c));
    }
    for (kind, cols) in by_role.iter_mut() {
        cols.sort_unstable();
        for (i, (k, _, _)) in cols.iter().enumerate() {
            if *k != i + 1 {
                bail!("{kind} columns must be numbered 1..{} without gaps", cols.len());
            }
        }
    }
    if by_role.get(&'y').is_none_or(Vec::is_empty) {
        bail!("no response columns (y1, y2, ...)");
    }

    // Inner join on the key, in the order of the first file.
    let lookups: Vec<HashMap<&str, usize>> = tables
        .iter()
        .map(|t| t.rows.iter().enumerate().map(|(i, r)| (r.0.as_str(), i)).collect())
        .collect();
    let mut labels = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let order: Vec<(char, usize, usize)> = ['y', 'x', 'w']
        .iter()
        .flat_map(|kind| {
            by_role
                .get(kind)
                .into_iter()
                .flatten()
                .map(move |(_, f, c)| (*kind, *f, *c))
        })
        .collect();
    'rows: for (key, _, _) in &tables[0].rows {
        let mut row = Vec::with_capacity(order.len());
        for &(_, f, c) in &order {
            let Some(&i) = lookups[f].get(key.as_str()) else {
                continue 'rows;
            };
            let (_, line, cells) = &tables[f].rows[i];
            let cell = cells[c].as_str();
            if cell == FRED_MISSING || cell.is_empty() {
                if options.drop_missing {
                    continue 'rows;
                }
                bail!(
                    "{}: line {line}: missing value in column '{}' (use --drop-missing to skip such rows)",
                    tables[f].source,
                    tables[f].columns[c]
                );
            }
            let v: f64 = cell.parse().map_err(|_| {
                anyhow!(
                    "{}: line {line}: cannot parse '{cell}' in column '{}' as a number",
                    tables[f].source,
                    tables[f].columns[c]
                )
            })?;
            row.push(v);
        }
        labels.push(key.clone());
        values.push(row);
    }
    if values.is_empty() {
        bail!("no observations left after joining the inputs");
    }
    let t_len = values.len();
    let count = |kind| by_role.get(&kind).map_or(0, Vec::len);
    let (q, r, s) = (count('y'), count('x'), count('w'));
    let block = |offset: usize, rows: usize| DMatrix::from_fn(rows, t_len, |i, t| values[t][offset + i]);
    let panel = TimeSeriesPanel::new(
        block(0, q),
        block(q, r),
        block(q + r, s),
        options.trend,
        options.intercept,
    )?;
    Ok(LabeledPanel {
        panel,
        labels,
        dated,
    })
}

/// Formats a value with 17 significant digits, enough to round-trip any
/// `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `panel` in the layout read by [`read_panel`]. Without labels the
/// key column is `t = 1..T`.
pub fn write_panel(path: &Path, panel: &TimeSeriesPanel, labels: Option<&[String]>) -> Result<()> {
    let mut out = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let (q, r, s) = (panel.q(), panel.r(), panel.s());
    let mut header = vec![if labels.is_some() { "date".to_string() } else { "t".to_string() }];
    header.extend((1..=q).map(|i| format!("y{i}")));
    header.extend((1..=r).map(|i| format!("x{i}")));
    header.extend((1..=s).map(|i| format!("w{i}")));
    out.write_record(&header)?;
    for t in 0..panel.t_len() {
        let mut row = vec![labels.map_or_else(|| (t + 1).to_string(), |l| l[t].clone())];
        row.extend(panel.y().column(t).iter().map(|v| fmt_f64(*v)));
        row.extend(panel.x().column(t).iter().map(|v| fmt_f64(*v)));
        row.extend(panel.w().column(t).iter().map(|v| fmt_f64(*v)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a CSV from a header and rows of preformatted cells.
pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut out = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roles() {
        assert_eq!(role("y1"), Some(('y', 1)));
        assert_eq!(role("W12"), Some(('w', 12)));
        assert_eq!(role("y0"), None);
        assert_eq!(role("GS10"), None);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
