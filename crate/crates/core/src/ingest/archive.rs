//! File-based checkpointing: processed raw files move to an archive root.
//! Recovery after a crash is the set difference raw − archived; re-archiving
//! an already-archived file is a no-op.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::IngestError;

/// Moves fully-processed files from `raw_root` into `archive_root`
/// (idempotent per file). Returns the number of files actually moved.
pub fn archive_processed(files: &[PathBuf], raw_root: &Path, archive_root: &Path) -> Result<usize, IngestError> {
    std::fs::create_dir_all(archive_root)?;
    let mut moved = 0usize;
    for f in files {
        let name = f
            .strip_prefix(raw_root)
            .map_err(|_| IngestError::MalformedFeed(format!("{} is not under the raw root", f.display())))?;
        let dest = archive_root.join(name);
        if dest.exists() {
            if f.exists() {
                std::fs::remove_file(f)?;
            }
            continue; // already archived
        }
        if !f.exists() {
            continue;
        }
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::rename(f, &dest)?;
        moved += 1;
    }
    Ok(moved)
}

/// Files still awaiting processing: present under raw but not under archive.
pub fn recovery_scan(raw_root: &Path, archive_root: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let raw = list_files(raw_root)?;
    let archived: BTreeSet<PathBuf> = list_files(archive_root)?
        .into_iter()
        .map(|p| p.strip_prefix(archive_root).unwrap().to_path_buf())
        .collect();
    Ok(raw
        .into_iter()
        .filter(|p| !archived.contains(p.strip_prefix(raw_root).unwrap()))
        .collect())
}

fn list_files(root: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut out = Vec::new();
    if !root.exists() {
        return Ok(out);
    }
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            let path = entry.path();
            if entry.file_type()?.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, names: &[&str]) -> Vec<PathBuf> {
        names
            .iter()
            .map(|n| {
                let p = dir.join(n);
                std::fs::write(&p, n.as_bytes()).unwrap();
                p
            })
            .collect()
    }

    #[test]
    fn crash_midway_leaves_exact_remainder() {
        let tmp = tempfile::tempdir().unwrap();
        let raw = tmp.path().join("raw");
        let arch = tmp.path().join("archive");
        std::fs::create_dir_all(&raw).unwrap();
        let names: Vec<String> = (0..10).map(|i| format!("f{i:02}.pb")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let files = touch(&raw, &refs);
        // "Crash" after archiving 4.
        archive_processed(&files[..4], &raw, &arch).unwrap();
        let remaining = recovery_scan(&raw, &arch).unwrap();
        assert_eq!(remaining.len(), 6);
        let got: Vec<String> = remaining.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(got, names[4..].to_vec());
    }

    #[test]
    fn empty_raw_dir() {
        let tmp = tempfile::tempdir().unwrap();
        let raw = tmp.path().join("raw");
        std::fs::create_dir_all(&raw).unwrap();
        assert!(recovery_scan(&raw, &tmp.path().join("archive")).unwrap().is_empty());
    }

    #[test]
    fn double_archive_is_noop() {
        let tmp = tempfile::tempdir().unwrap();
        let raw = tmp.path().join("raw");
        let arch = tmp.path().join("archive");
        std::fs::create_dir_all(&raw).unwrap();
        let files = touch(&raw, &["a.pb"]);
        assert_eq!(archive_processed(&files, &raw, &arch).unwrap(), 1);
        let before = std::fs::read(arch.join("a.pb")).unwrap();
        assert_eq!(archive_processed(&files, &raw, &arch).unwrap(), 0);
        assert_eq!(std::fs::read(arch.join("a.pb")).unwrap(), before);
        assert!(recovery_scan(&raw, &arch).unwrap().is_empty());
    }
}
