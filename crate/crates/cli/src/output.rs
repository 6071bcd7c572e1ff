//! All-or-nothing file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use tempfile::NamedTempFile;

/// Collects outputs in temp files next to their destinations and renames
/// them only once every write succeeded. Dropped without `commit`, nothing
/// appears on disk.
#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, contents: &[u8]) -> anyhow::Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
        tmp.write_all(contents)?;
        tmp.as_file().sync_all()?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> anyhow::Result<()> {
        for (tmp, path) in self.files {
            tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

/// `--out` target, or stdout when absent.
pub fn emit(staged: &mut Staged, out: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => staged.add(path, contents.as_bytes()),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// `results.json` -> `results.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_lands_without_commit() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let mut s = Staged::default();
        s.add(&a, b"{}").unwrap();
        drop(s);
        assert!(!a.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

        let mut s = Staged::default();
        s.add(&a, b"{}").unwrap();
        s.commit().unwrap();
        assert_eq!(std::fs::read_to_string(&a).unwrap(), "{}");
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("out/run.json"), "schedule.csv"), Path::new("out/run.schedule.csv"));
    }
}
