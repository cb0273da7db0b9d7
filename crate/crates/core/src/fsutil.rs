//! Atomic artifact writes: content goes to a sibling temp file that is
//! renamed over the destination once fully flushed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub struct AtomicWriter {
    target: PathBuf,
    temp: PathBuf,
    inner: BufWriter<File>,
}

impl AtomicWriter {
    pub fn create(target: impl AsRef<Path>) -> Result<Self> {
        let target = target.as_ref().to_path_buf();
        if let Some(parent) = target.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let mut name = target
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(".tmp");
        let temp = target.with_file_name(name);
        let file = File::create(&temp).map_err(|e| Error::io(&temp, e))?;
        Ok(AtomicWriter {
            target,
            temp,
            inner: BufWriter::with_capacity(1 << 20, file),
        })
    }

    pub fn commit(self) -> Result<()> {
        let AtomicWriter { target, temp, inner } = self;
        let file = inner
            .into_inner()
            .map_err(|e| Error::io(&temp, e.into_error()))?;
        file.sync_all().map_err(|e| Error::io(&temp, e))?;
        drop(file);
        std::fs::rename(&temp, &target).map_err(|e| Error::io(&target, e))
    }

    pub fn path(&self) -> &Path {
        &self.target
    }
}

impl Write for AtomicWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.inner.write(buf)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

pub fn write_atomic(target: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let mut w = AtomicWriter::create(target)?;
    let path = w.path().to_path_buf();
    w.write_all(contents).map_err(|e| Error::io(&path, e))?;
    w.commit()
}

pub fn write_json<T: serde::Serialize>(target: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(target, text.as_bytes())
}

/// Reads a one-entry-per-line file, skipping blanks and `#` comments.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Replaces tabs and line breaks so a value fits in one TSV cell.
pub fn tsv_cell(s: &str) -> String {
    s.chars()
        .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("sub/out.txt");
        write_atomic(&target, b"hello").unwrap();
        assert_eq!(std::fs::read_to_string(&target).unwrap(), "hello");
        let entries: Vec<_> = std::fs::read_dir(target.parent().unwrap()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
