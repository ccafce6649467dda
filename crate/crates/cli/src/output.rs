//! Report envelope, configuration hash and artifact files.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::PathBuf;

use crate::args::Command;
use crate::CliError;

/// The resolved configuration: the command with every parameter, and the
/// seed actually used.
#[derive(Debug, Serialize)]
pub struct ExperimentConfig<'a> {
    pub seed: u64,
    #[serde(flatten)]
    pub command: &'a Command,
}

impl ExperimentConfig<'_> {
    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// What a command produced besides its data files.
pub struct Outcome {
    pub paper_condition: String,
    pub summary: String,
    /// `false` when the run completed but a numerical check failed.
    pub passed: bool,
    pub result: serde_json::Value,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    paper_condition: &'a str,
    config: &'a ExperimentConfig<'a>,
    config_hash: String,
    passed: bool,
    summary: &'a str,
    files: &'a [String],
    result: &'a serde_json::Value,
}

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output { dir, files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_report(&mut self, name: &str, config: &ExperimentConfig, outcome: &Outcome) -> Result<(), CliError> {
        let files = self.files.clone();
        let env = Envelope {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            paper_condition: &outcome.paper_condition,
            config,
            config_hash: config.hash(),
            passed: outcome.passed,
            summary: &outcome.summary,
            files: &files,
            result: &outcome.result,
        };
        let json = serde_json::to_string_pretty(&env).map_err(|e| CliError::Input(e.to_string()))?;
        self.write(name, &(json + "\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::{CounterexampleArgs, CounterexampleMode};

    fn cmd(kmax: u32) -> Command {
        Command::Counterexample(CounterexampleArgs {
            kmax,
            mode: CounterexampleMode::Series,
            replicas: 200,
        })
    }

    #[test]
    fn config_embeds_command_and_seed() {
        let c = cmd(4);
        let cfg = ExperimentConfig { seed: 9, command: &c };
        let v: serde_json::Value = serde_json::to_value(&cfg).unwrap();
        assert_eq!(v["command"], "counterexample");
        assert_eq!(v["seed"], 9);
        assert_eq!(v["kmax"], 4);
        assert_eq!(v["mode"], "series");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let (a, b) = (cmd(4), cmd(5));
        let h = ExperimentConfig { seed: 1, command: &a }.hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, ExperimentConfig { seed: 1, command: &a }.hash());
        assert_ne!(h, ExperimentConfig { seed: 2, command: &a }.hash());
        assert_ne!(h, ExperimentConfig { seed: 1, command: &b }.hash());
    }
}
