//! Key-value run reports with provenance.

use std::fmt::Display;

/// Point estimates, intervals and diagnostics of one inference run, plus
/// the provenance needed to reproduce it (seed and config digest).
/// Serializes to deterministic `key = value` text.
#[derive(Debug, Clone)]
pub struct InferenceReport {
    title: String,
    seed: u64,
    config_hash: String,
    entries: Vec<(String, String)>,
}

impl InferenceReport {
    pub fn new(title: impl Into<String>, seed: u64, config_hash: impl Into<String>) -> Self {
        Self { title: title.into(), seed, config_hash: config_hash.into(), entries: Vec::new() }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_interval(&mut self, key: &str, interval: (f64, f64)) -> &mut Self {
        self.entries.push((format!("{key}_lo"), interval.0.to_string()));
        self.entries.push((format!("{key}_hi"), interval.1.to_string()));
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.title);
        out.push_str(&format!("config_hash = {}\n", self.config_hash));
        out.push_str(&format!("seed = {}\n", self.seed));
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_in_insertion_order_with_provenance_first() {
        let mut r = InferenceReport::new("fit", 42, "deadbeef");
        r.push("beta_hat", 0.7).push_interval("ci_beta", (0.1, 1.2));
        let text = r.to_text();
        assert_eq!(
            text,
            "# fit\nconfig_hash = deadbeef\nseed = 42\nbeta_hat = 0.7\nci_beta_lo = 0.1\nci_beta_hi = 1.2\n"
        );
    }
}
