//! Reproducible run outputs: CSV fields with full double precision, a
//! line-delimited summary record, and a manifest carrying the exact resolved
//! configuration plus its hash.

use hskdv_core::{Error, Grid1D, Result, SpaceTimeField};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Deterministic run directory <root>/<name>-<confighash8>.
    pub fn create(root: &Path, name: &str, canonical_config: &str) -> Result<RunDir> {
        let digest = Sha256::digest(canonical_config.as_bytes());
        let hash = hex8(&digest);
        let path = root.join(format!("{name}-{hash}"));
        fs::create_dir_all(&path)
            .map_err(|e| Error::config(format!("cannot create run dir {}: {e}", path.display())))?;
        Ok(RunDir { path })
    }

    pub fn write_manifest(&self, canonical_config: &str, seed: u64) -> Result<()> {
        let digest = Sha256::digest(canonical_config.as_bytes());
        let mut text = String::new();
        text.push_str(canonical_config);
        text.push_str(&format!("config_sha256 = {}\n", hex_full(&digest)));
        text.push_str(&format!("rng_seed = {seed}\n"));
        self.write_text("manifest.txt", &text)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path.join(name);
        let mut f = fs::File::create(&p)
            .map_err(|e| Error::config(format!("cannot create {}: {e}", p.display())))?;
        f.write_all(text.as_bytes())
            .map_err(|e| Error::config(format!("cannot write {}: {e}", p.display())))?;
        Ok(())
    }

    /// Space-time field as CSV: header row carries the x nodes, each data row
    /// starts with its time value.
    pub fn write_field(&self, name: &str, field: &SpaceTimeField) -> Result<()> {
        let grid = field.grid();
        let tg = field.tgrid();
        let mut text = String::new();
        text.push('t');
        for j in 0..grid.n_nodes() {
            text.push_str(&format!(",{:.17e}", grid.node(j)));
        }
        text.push('\n');
        for k in 0..tg.n_nodes() {
            text.push_str(&format!("{:.17e}", tg.time(k)));
            for v in field.slice(k) {
                text.push_str(&format!(",{v:.17e}"));
            }
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    /// Single profile as CSV with a labelled abscissa column.
    pub fn write_profile(
        &self,
        name: &str,
        abscissa_label: &str,
        xs: &[f64],
        value_label: &str,
        values: &[f64],
    ) -> Result<()> {
        let mut text = format!("{abscissa_label},{value_label}\n");
        for (x, v) in xs.iter().zip(values) {
            text.push_str(&format!("{x:.17e},{v:.17e}\n"));
        }
        self.write_text(name, &text)
    }

    /// Spatial slices side by side (e.g. p(0) and q(0)).
    pub fn write_slices(
        &self,
        name: &str,
        grid: &Grid1D,
        labels: &[&str],
        slices: &[&[f64]],
    ) -> Result<()> {
        let mut text = String::from("x");
        for l in labels {
            text.push(',');
            text.push_str(l);
        }
        text.push('\n');
        for j in 0..grid.n_nodes() {
            text.push_str(&format!("{:.17e}", grid.node(j)));
            for s in slices {
                text.push_str(&format!(",{:.17e}", s[j]));
            }
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    pub fn write_rows(&self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut text = format!("{header}\n");
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        self.write_text(name, &text)
    }
}

fn hex8(d: &[u8]) -> String {
    d.iter().take(4).map(|b| format!("{b:02x}")).collect()
}

fn hex_full(d: &[u8]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builder for the line-delimited summary record.
#[derive(Default)]
pub struct Summary {
    lines: Vec<String>,
}

impl Summary {
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn push_float(&mut self, key: &str, value: f64) {
        self.lines.push(format!("{key} = {value:.17e}"));
    }

    pub fn text(&self) -> String {
        let mut t = self.lines.join("\n");
        t.push('\n');
        t
    }
}
