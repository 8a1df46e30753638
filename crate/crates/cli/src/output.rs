//! CSV tables, run reports and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::render;
use crate::settings::Settings;

/// Writes `bytes` to a temporary sibling, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

/// A CSV table with a fixed header.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table { writer, width: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.width);
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn save(self, path: &Path) -> Result<()> {
        let bytes = self.writer.into_inner().context("flushing CSV")?;
        write_atomic(path, &bytes)
    }
}

/// Shortest text that parses back to the same value.
pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

/// `<stem><suffix>.csv` next to `primary`.
pub fn sibling(primary: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Everything needed to rerun: command, seed, tool version, outputs and
/// every parameter.
pub fn write_report(
    primary: &Path,
    command: &str,
    seed: u64,
    settings: &Settings,
    outputs: &[PathBuf],
    notes: &[(String, String)],
) -> Result<PathBuf> {
    let path = sibling(primary, "", "report");
    let mut header = vec![
        format!("bhdtwin {} run report", env!("CARGO_PKG_VERSION")),
        format!("command: {command}"),
        format!("seed: {seed}"),
    ];
    for out in outputs {
        header.push(format!("output: {}", out.file_name().unwrap_or_default().to_string_lossy()));
    }
    for (k, v) in notes {
        header.push(format!("{k}: {v}"));
    }
    write_atomic(&path, render(&header, &settings.entries()).as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn table_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]).unwrap();
        t.row(&[num(1.5), num(f64::NEG_INFINITY)]).unwrap();
        t.save(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n1.5,-inf\n");
    }

    #[test]
    fn sibling_names() {
        let p = Path::new("out/qpsk.csv");
        assert_eq!(sibling(p, "_constellation", "csv"), Path::new("out/qpsk_constellation.csv"));
        assert_eq!(sibling(p, "", "report"), Path::new("out/qpsk.report"));
    }
}
