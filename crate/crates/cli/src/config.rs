//! Flat `key = value` config files that mirror the command-line flags.
//!
//! Entries are spliced into the argument list right after the subcommand, so
//! any flag given on the command line (which comes later) overrides them.
//! Keys the chosen subcommand does not accept are ignored, which lets one
//! file serve every subcommand.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Command};

use crate::error::{validation, CliResult};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "GROUPTEST_CONFIG";

/// Parsed config entries in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return validation(format!("config line {}: expected key = value, got {line:?}", i + 1));
            };
            let key = key.trim().trim_start_matches("--");
            if key.is_empty() {
                return validation(format!("config line {}: empty key", i + 1));
            }
            entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Flags for `subcommand`, skipping keys it does not accept.
    pub fn to_args(&self, subcommand: &Command) -> CliResult<Vec<OsString>> {
        let mut args = Vec::new();
        for (key, value) in &self.entries {
            let Some(arg) = subcommand
                .get_arguments()
                .find(|a| a.get_long() == Some(key.as_str()))
            else {
                continue;
            };
            if matches!(arg.get_action(), ArgAction::SetTrue) {
                match value.as_str() {
                    "true" => args.push(format!("--{key}").into()),
                    "false" => {}
                    other => return validation(format!("config key {key}: expected true or false, got {other:?}")),
                }
            } else {
                args.push(format!("--{key}").into());
                args.push(value.into());
            }
        }
        Ok(args)
    }
}

/// Long flags that take a value at the top level, so their values are not
/// mistaken for the subcommand name.
fn top_level_value_flags(cmd: &Command) -> BTreeSet<String> {
    cmd.get_arguments()
        .filter(|a| a.get_action().takes_values())
        .filter_map(|a| a.get_long().map(|l| format!("--{l}")))
        .collect()
}

/// Position of the subcommand token in `args`.
fn subcommand_position(cmd: &Command, args: &[OsString]) -> Option<usize> {
    let value_flags = top_level_value_flags(cmd);
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if value_flags.contains(a.as_ref()) {
            i += 2;
            continue;
        }
        if cmd.find_subcommand(a.as_ref()).is_some() {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// The argument list with config entries for the chosen subcommand spliced in.
pub fn with_config(cmd: &Command, args: Vec<OsString>, config: Option<&PathBuf>, subcommand: &str) -> CliResult<Vec<OsString>> {
    let Some(path) = config else { return Ok(args) };
    let file = ConfigFile::load(path)?;
    let Some(sub) = cmd.find_subcommand(subcommand) else { return Ok(args) };
    let Some(at) = subcommand_position(cmd, &args) else { return Ok(args) };
    let injected = file.to_args(sub)?;
    let mut out = args[..=at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Arg;

    fn sub() -> Command {
        Command::new("design")
            .arg(Arg::new("prevalence").long("prevalence"))
            .arg(Arg::new("presumptive").long("presumptive").action(ArgAction::SetTrue))
    }

    #[test]
    fn parses_comments_and_prefixes() {
        let f = ConfigFile::parse("# lab defaults\n\n--prevalence = 0.02\nseed=7\n").unwrap();
        assert_eq!(f.entries, vec![("prevalence".into(), "0.02".into()), ("seed".into(), "7".into())]);
        assert!(ConfigFile::parse("prevalence 0.02").is_err());
    }

    #[test]
    fn keeps_only_accepted_keys() {
        let f = ConfigFile::parse("prevalence = 0.02\nseed = 7\npresumptive = true").unwrap();
        let args: Vec<String> = f.to_args(&sub()).unwrap().into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(args, vec!["--prevalence", "0.02", "--presumptive"]);
        let f = ConfigFile::parse("presumptive = maybe").unwrap();
        assert!(f.to_args(&sub()).is_err());
    }
}
