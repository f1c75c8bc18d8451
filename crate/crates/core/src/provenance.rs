//! Provenance headers written at the top of every CSV artifact as `#` lines.

use std::io::{self, Write};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Ordered key/value pairs describing how an artifact was produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    /// Starts a header with the tool version and artifact kind.
    pub fn new(artifact: &str) -> Self {
        let mut p = Provenance::default();
        p.push(
            "generator",
            concat!("cryoshield ", env!("CARGO_PKG_VERSION")),
        );
        p.push("artifact", artifact);
        p
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.push(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write(&self, w: &mut impl Write) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }

    /// Parses the leading `# key: value` lines of a text artifact.
    pub fn parse(text: &str) -> Provenance {
        let entries = text
            .lines()
            .map_while(|l| l.strip_prefix("# "))
            .filter_map(|l| l.split_once(": "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Provenance { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trips() {
        let p = Provenance::new("solve")
            .with("seed", 42)
            .with("config_sha256", sha256_hex(b"x"));
        let mut buf = Vec::new();
        p.write(&mut buf).unwrap();
        buf.extend_from_slice(b"node,T_K\n");
        assert_eq!(Provenance::parse(std::str::from_utf8(&buf).unwrap()), p);
        assert_eq!(p.get("seed"), Some("42"));
    }
}
