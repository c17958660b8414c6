use std::path::Path;

use serde::Serialize;

use crate::Failure;

/// Writes a header-first CSV table atomically.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<(), Failure>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    let to_failure = |e: csv::Error| Failure::internal(format!("{}: {e}", path.display()));
    writer.write_record(header).map_err(to_failure)?;
    for row in rows {
        writer.write_record(row).map_err(to_failure)?;
    }
    let bytes = writer.into_inner().map_err(|e| Failure::internal(e.to_string()))?;
    Ok(assortify::io::write_atomic(path, &bytes)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::internal(e.to_string()))?;
    text.push('\n');
    Ok(assortify::io::write_atomic(path, text.as_bytes())?)
}

/// File-name-safe form of an id.
pub fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
