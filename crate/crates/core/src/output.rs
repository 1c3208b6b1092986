//! Float formatting and small file helpers shared by every writer.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// Shortest decimal that round-trips to the same `f64` (never more than 17 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    fs::write(path, to_json(value))
}

/// Join already-formatted cells into one CSV line (no quoting needed for our columns).
pub fn csv_line<I, S>(cells: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut line = cells.into_iter().map(|c| c.as_ref().to_string()).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// Snapshot file name, e.g. `snap_003_t0.25.csv`.
pub fn snapshot_name(index: usize, time: f64) -> String {
    format!("snap_{index:03}_t{}.csv", fmt_float(time))
}
