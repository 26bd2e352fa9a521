//! Atomic file output: everything is written to a temporary file in the
//! destination directory and renamed into place once complete.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Parent directory of `path`, created if missing.
fn parent_dir(path: &Path) -> Result<PathBuf> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = parent_dir(path)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes).with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Writes several files; if any write fails the ones already placed are removed.
pub fn write_all_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = parent_dir(path)?;
        let mut tmp =
            tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating a file in {}", dir.display()))?;
        tmp.write_all(bytes).with_context(|| format!("writing {}", path.display()))?;
        staged.push((tmp, path));
    }
    let mut placed: Vec<&PathBuf> = Vec::new();
    for (tmp, path) in staged {
        if let Err(e) = tmp.persist(path) {
            for p in placed {
                let _ = std::fs::remove_file(p);
            }
            return Err(e).with_context(|| format!("renaming into {}", path.display()));
        }
        placed.push(path);
    }
    Ok(())
}

/// Builds a directory next to `dir` with `fill`, then renames it to `dir`.
/// `dir` must not exist yet.
pub fn write_dir_atomic(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if dir.exists() {
        anyhow::bail!("{} already exists", dir.display());
    }
    let parent = parent_dir(dir)?;
    let tmp = tempfile::tempdir_in(&parent).with_context(|| format!("creating a directory in {}", parent.display()))?;
    fill(tmp.path())?;
    std::fs::rename(tmp.path(), dir).with_context(|| format!("renaming into {}", dir.display()))?;
    let _ = tmp.keep();
    Ok(())
}
