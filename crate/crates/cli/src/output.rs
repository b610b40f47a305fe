//! Atomic file output with provenance headers.

use anyhow::{Context, Result};
use std::path::{Path, PathBuf};

/// Writes via a temp file in the same directory and renames into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    }
    let tmp: PathBuf = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, contents)
        .with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move output into place at {}", path.display()))?;
    Ok(())
}

/// `# key = value` comment lines embedded at the top of every CSV.
pub fn provenance_header(config_hash: &str, seed: u64) -> String {
    format!("# config_hash = {config_hash}\n# seed = {seed}\n")
}
