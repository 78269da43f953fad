//! Atomic file output: write a sibling temp file, then rename over the target.

use std::path::{Path, PathBuf};

use crate::CliError;

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Run `write` against a temp path, then rename it onto `path`.
pub fn atomic_save<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&Path) -> morphnet::Result<()>,
{
    let tmp = temp_sibling(path);
    let result = write(&tmp).map_err(CliError::from).and_then(|()| {
        std::fs::rename(&tmp, path).map_err(|e| {
            CliError::Input(format!("cannot move output into {}: {e}", path.display()))
        })
    });
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
