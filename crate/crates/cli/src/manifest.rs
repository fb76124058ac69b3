//! Key-value run manifest written next to every trained artifact.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    #[cfg(test)]
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Manifest { entries }
    }
}

/// SHA-256 over the corpus bytes; a directory hashes its regular files in
/// name order, each prefixed by its file name.
pub fn corpus_digest(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<io::Result<_>>()?;
        files.retain(|p| p.is_file());
        files.sort();
        for file in files {
            hasher.update(file.file_name().unwrap_or_default().to_string_lossy().as_bytes());
            hasher.update([0]);
            hasher.update(fs::read(&file)?);
        }
    } else {
        hasher.update(fs::read(path)?);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_parse() {
        let mut m = Manifest::default();
        m.push("dim", 300).push("lr", 0.0001);
        let text = m.render();
        assert_eq!(text, "dim = 300\nlr = 0.0001\n");
        let back = Manifest::parse(&text);
        assert_eq!(back.get("dim"), Some("300"));
        assert_eq!(back.get("missing"), None);
    }

    #[test]
    fn digest_is_content_based() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        fs::write(&a, "one\ntwo\n").unwrap();
        let d1 = corpus_digest(&a).unwrap();
        assert_eq!(d1.len(), 64);
        fs::write(&a, "one\nthree\n").unwrap();
        assert_ne!(d1, corpus_digest(&a).unwrap());
    }
}
