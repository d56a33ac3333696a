//! Location of the bundled level tables and scenarios.

use std::path::{Path, PathBuf};

pub const DATA_ENV: &str = "CLOCKCLOSURE_DATA";

/// The bundled data directory, or `$CLOCKCLOSURE_DATA` when set.
pub fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Resolves a user-supplied path. Absolute paths and paths that exist as
/// given win; otherwise `base` (typically the config directory), the data
/// directory and its `subdir` are searched in that order.
pub fn resolve(path: &Path, base: Option<&Path>, subdir: &str) -> Option<PathBuf> {
    let tidy = |p: PathBuf| p.canonicalize().unwrap_or(p);
    if path.is_absolute() || path.exists() {
        return path.exists().then(|| tidy(path.to_path_buf()));
    }
    let data = data_dir();
    let mut candidates = Vec::new();
    if let Some(base) = base {
        candidates.push(base.join(path));
    }
    candidates.push(data.join(path));
    candidates.push(data.join(subdir).join(path));
    candidates.into_iter().find(|p| p.exists()).map(tidy)
}
