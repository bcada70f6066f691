use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// CSV with a metadata comment line and a header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(hash: &str, seed: u64, header: &[&str]) -> Self {
        Csv {
            text: format!("# config_sha256={hash} seed={seed}\n{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, &self.text)?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(beliefctl_core::Error::from)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            config_hash(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("ab", 7, &["x", "y"]);
        c.row(&["1".into(), "2".into()]);
        assert_eq!(c.text, "# config_sha256=ab seed=7\nx,y\n1,2\n");
    }
}
