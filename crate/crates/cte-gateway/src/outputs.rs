//! OUT-directory projection: dated result files and DACTE slips.
//!
//! The journal is the system of record; every file here is a pure
//! projection of it. Normal ticks append, which keeps the hot path cheap.
//! `reconcile_results` rebuilds any dated file whose bytes drifted from
//! the journal (the aftermath of a torn write), so recovery converges on
//! the same bytes a crash-free run produces.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use cte_store::{OutLine, State};

use crate::dacte;
use crate::hooks::EffectHooks;
use crate::TickError;

/// `2026-03-01` -> `results-20260301.txt`.
pub fn results_file_name(date: &str) -> String {
    format!("results-{}.txt", date.replace('-', ""))
}

pub struct OutputWriter {
    out_dir: PathBuf,
}

impl OutputWriter {
    pub fn new(out_dir: &Path) -> Self {
        OutputWriter {
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn dacte_path(&self, access_key: &str) -> PathBuf {
        self.out_dir.join(dacte::file_name(access_key))
    }

    /// Appends freshly produced OUT lines to their dated files.
    pub fn append(&self, hooks: &dyn EffectHooks, lines: &[OutLine]) -> Result<(), TickError> {
        let mut grouped: BTreeMap<&str, String> = BTreeMap::new();
        for line in lines {
            let buf = grouped.entry(line.date.as_str()).or_default();
            buf.push_str(&line.text);
            buf.push('\n');
        }
        for (date, content) in grouped {
            hooks.before_effect("out-results")?;
            use io::Write;
            let path = self.out_dir.join(results_file_name(date));
            let mut file = fs::OpenOptions::new().create(true).append(true).open(&path)?;
            file.write_all(content.as_bytes())?;
        }
        Ok(())
    }

    /// Rebuilds every dated results file whose content differs from the
    /// journal's projection. Runs at open, before any new effects.
    pub fn reconcile_results(&self, state: &State) -> io::Result<()> {
        let mut expected: BTreeMap<&str, String> = BTreeMap::new();
        for line in state.out_lines() {
            let buf = expected.entry(line.date.as_str()).or_default();
            buf.push_str(&line.text);
            buf.push('\n');
        }
        for (date, content) in &expected {
            let path = self.out_dir.join(results_file_name(date));
            if fs::read(&path).ok().as_deref() != Some(content.as_bytes()) {
                fs::write(&path, content)?;
            }
        }
        Ok(())
    }

    /// Writes a DACTE unless the identical bytes are already on disk.
    /// Returns whether a write happened.
    pub fn write_dacte(
        &self,
        hooks: &dyn EffectHooks,
        access_key: &str,
        rendered: &str,
    ) -> Result<bool, TickError> {
        let path = self.dacte_path(access_key);
        if fs::read(&path).ok().as_deref() == Some(rendered.as_bytes()) {
            return Ok(false);
        }
        hooks.before_effect("out-dacte")?;
        fs::write(&path, rendered)?;
        Ok(true)
    }
}
