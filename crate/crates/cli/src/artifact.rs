//! CSV/JSON/SVG artifact plumbing: deterministic bytes, 17-significant-digit
//! floats, and checksums recorded in the JSON summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Render a float with 17 significant digits (round-trippable in f64).
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureArtifact {
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
    pub json_summary_path: PathBuf,
    /// SHA-256 of the CSV bytes.
    pub csv_sha256: String,
}

/// One pass/fail assertion recorded in the command summary.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.to_string(), passed, detail: detail.into() }
    }
}

pub struct ArtifactWriter {
    out_dir: PathBuf,
    stem: String,
}

impl ArtifactWriter {
    pub fn new(out_dir: &Path, stem: &str) -> std::io::Result<ArtifactWriter> {
        fs::create_dir_all(out_dir)?;
        Ok(ArtifactWriter { out_dir: out_dir.to_path_buf(), stem: stem.to_string() })
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out_dir.join(format!("{}.csv", self.stem))
    }

    /// Write the CSV (header plus rows) and return its checksum.
    pub fn write_csv(&self, header: &str, rows: &[Vec<String>]) -> std::io::Result<String> {
        let mut text = String::with_capacity(rows.len() * 64 + header.len() + 2);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(self.csv_path(), &text)?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        Ok(hex_string(&hasher.finalize()))
    }

    pub fn write_svg(&self, svg: &str) -> std::io::Result<PathBuf> {
        let path = self.out_dir.join(format!("{}.svg", self.stem));
        fs::write(&path, svg)?;
        Ok(path)
    }

    /// Write the JSON summary and assemble the artifact record.
    pub fn finish<S: Serialize>(
        &self,
        csv_sha256: String,
        summary: &S,
    ) -> std::io::Result<FigureArtifact> {
        let json_path = self.out_dir.join(format!("{}.json", self.stem));
        fs::write(&json_path, serde_json::to_string_pretty(summary)?)?;
        Ok(FigureArtifact {
            csv_path: self.csv_path(),
            svg_path: self.out_dir.join(format!("{}.svg", self.stem)),
            json_summary_path: json_path,
            csv_sha256,
        })
    }
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
