//! Atomic file output shared by every writer in the crate.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// Runs `write` against a temporary file beside `path`, then renames it into
/// place. On error the temporary file is removed and `path` is untouched.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(File) -> Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    let handle = tmp.reopen().map_err(|e| Error::io(tmp.path(), e))?;
    write(handle)?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Atomically writes a byte buffer.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |mut f| {
        use std::io::Write;
        f.write_all(bytes).and_then(|_| f.flush()).map_err(|e| Error::io(path, e))
    })
}
