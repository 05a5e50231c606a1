use std::fs;
use std::path::Path;

use crate::{CliError, CliResult};

/// Round-trip CSV number: 17 significant digits in scientific notation.
pub fn fmt_csv(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub(crate) fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_csv)
}

/// Column label for percentile `p`: `p15`, `p2.5`.
pub(crate) fn percentile_label(p: f64) -> String {
    format!("p{p}")
}

/// In-memory CSV table written in one go.
pub(crate) struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub(crate) fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer
            .write_record(header.iter().map(AsRef::as_ref))
            .expect("in-memory write");
        Table { writer }
    }

    pub(crate) fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        self.writer
            .write_record(cells.iter().map(AsRef::as_ref))
            .expect("in-memory write");
    }

    pub(crate) fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create output directory {}: {e}", dir.display())))
}

pub(crate) fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

/// Two-column aligned text table.
pub(crate) fn aligned(rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in rows {
        let pad = width - k.chars().count();
        s.push_str(k);
        s.push_str(&" ".repeat(pad + 2));
        s.push_str(v);
        s.push('\n');
    }
    s
}
