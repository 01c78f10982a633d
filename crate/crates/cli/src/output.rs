//! Result tables, CSV and plot-data writers, run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

/// Long-format view of a table: one output row per `(row, y column)`.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub figure: &'static str,
    pub x: &'static str,
    pub series: Vec<&'static str>,
    pub y: Vec<&'static str>,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<String>>,
    pub plot: Option<PlotSpec>,
}

impl ResultTable {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn with_plot(mut self, plot: PlotSpec) -> Self {
        self.plot = Some(plot);
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    fn index(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .unwrap_or_else(|| panic!("{} has no column {name}", self.name))
    }
}

/// Shortest round-trip representation; empty for missing values.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn text(x: impl ToString) -> String {
    x.to_string()
}

#[derive(Debug, Serialize)]
pub struct TableEntry {
    pub file: String,
    pub rows: usize,
    pub columns: Vec<Column>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot_file: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_path: Option<String>,
    pub config_hash: String,
    pub schema_version: u32,
    pub seed: u64,
    pub trials: usize,
    pub created_utc: String,
    pub tables: Vec<TableEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
}

pub struct Writer {
    pub dir: PathBuf,
    pub config_hash: String,
    pub plot_data: bool,
}

impl Writer {
    fn csv_writer(path: &Path) -> std::io::Result<csv::Writer<fs::File>> {
        csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(std::io::Error::other)
    }

    /// Writes `<name>.csv` (and `<name>.plot.csv`) with a leading config hash column.
    pub fn write_table(&self, table: &ResultTable) -> std::io::Result<TableEntry> {
        let file = format!("{}.csv", table.name);
        let mut w = Self::csv_writer(&self.dir.join(&file))?;
        let header = std::iter::once("config_hash").chain(table.columns.iter().map(|c| c.name));
        w.write_record(header).map_err(std::io::Error::other)?;
        for row in &table.rows {
            let record =
                std::iter::once(self.config_hash.as_str()).chain(row.iter().map(String::as_str));
            w.write_record(record).map_err(std::io::Error::other)?;
        }
        w.flush()?;

        let plot_file = match (&table.plot, self.plot_data) {
            (Some(plot), true) => Some(self.write_plot(table, plot)?),
            _ => None,
        };
        Ok(TableEntry {
            file,
            rows: table.rows.len(),
            columns: table.columns.clone(),
            plot_file,
        })
    }

    fn write_plot(&self, table: &ResultTable, plot: &PlotSpec) -> std::io::Result<String> {
        let file = format!("{}.plot.csv", table.name);
        let mut w = Self::csv_writer(&self.dir.join(&file))?;
        w.write_record([
            "config_hash",
            "figure",
            "series",
            "x_name",
            "x",
            "y_name",
            "y",
        ])
        .map_err(std::io::Error::other)?;
        let x = table.index(plot.x);
        let series: Vec<usize> = plot.series.iter().map(|s| table.index(s)).collect();
        let ys: Vec<usize> = plot.y.iter().map(|y| table.index(y)).collect();
        for row in &table.rows {
            let key = series
                .iter()
                .map(|&i| format!("{}={}", table.columns[i].name, row[i]))
                .collect::<Vec<_>>()
                .join(";");
            for &y in &ys {
                if row[y].is_empty() {
                    continue;
                }
                w.write_record([
                    self.config_hash.as_str(),
                    plot.figure,
                    &key,
                    plot.x,
                    &row[x],
                    table.columns[y].name,
                    &row[y],
                ])
                .map_err(std::io::Error::other)?;
            }
        }
        w.flush()?;
        Ok(file)
    }

    pub fn write_manifest(
        &self,
        subcommand: &str,
        manifest: &Manifest,
    ) -> std::io::Result<PathBuf> {
        let path = self.dir.join(format!("{subcommand}.manifest.json"));
        let mut body = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
        body.push('\n');
        fs::write(&path, body)?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut body = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        body.push('\n');
        fs::write(&path, body)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new(
            "demo",
            vec![col("g_db", "dB"), col("kind", ""), col("p", "probability")],
        )
        .with_plot(PlotSpec {
            figure: "demo",
            x: "g_db",
            series: vec!["kind"],
            y: vec!["p"],
        });
        t.push(vec![num(0.0), text("a"), num(0.25)]);
        t.push(vec![num(5.0), text("a"), opt(None)]);
        t
    }

    #[test]
    fn csv_and_plot_files() {
        let dir = tempfile::tempdir().unwrap();
        let w = Writer {
            dir: dir.path().to_path_buf(),
            config_hash: "abc".into(),
            plot_data: true,
        };
        let entry = w.write_table(&table()).unwrap();
        assert_eq!(entry.rows, 2);
        let body = fs::read_to_string(dir.path().join("demo.csv")).unwrap();
        assert_eq!(body, "config_hash,g_db,kind,p\nabc,0,a,0.25\nabc,5,a,\n");
        let plot = fs::read_to_string(dir.path().join("demo.plot.csv")).unwrap();
        assert_eq!(
            plot,
            "config_hash,figure,series,x_name,x,y_name,y\nabc,demo,kind=a,g_db,0,p,0.25\n"
        );
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_are_rejected() {
        table().push(vec![num(1.0)]);
    }
}
