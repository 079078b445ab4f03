use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

/// Six significant digits unless `raw`, in which case the shortest
/// round-tripping representation.
pub fn fmt_num(x: f64, raw: bool) -> String {
    if raw || !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    rounded.to_string()
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(
    dir: &Path,
    name: &str,
    fill: impl FnOnce(&mut dyn Write) -> Result<(), String>,
) -> Result<PathBuf, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(|e| e.to_string())?;
    }
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(path)
}

pub fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf, String> {
    write_atomic(dir, name, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header).map_err(|e| e.to_string())?;
        for r in rows {
            out.write_record(r).map_err(|e| e.to_string())?;
        }
        out.flush().map_err(|e| e.to_string())
    })
}
