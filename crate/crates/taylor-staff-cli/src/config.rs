//! Run-configuration files: a flat `key = value` format whose keys mirror
//! the command-line flags of the invoked subcommand.
//!
//! Merging happens by argv injection before the strict parse, so clap
//! remains the single authority on typing and validation. Precedence is
//! command line, then environment, then config file, then built-in
//! defaults; a config value is injected only when the flag was not given
//! explicitly. Unknown keys are rejected rather than ignored so typos
//! cannot silently fall back to defaults.

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, CommandFactory};
use std::collections::HashMap;
use std::ffi::OsString;
use std::path::Path;
use taylor_staff::{Error, Result};

/// One flag the active subcommand accepts: its clap identifier and
/// whether it is a boolean switch.
struct FlagInfo {
    id: String,
    is_switch: bool,
}

/// Reads `path` and returns `argv` with one `--key value` pair appended
/// per config entry that the command line and environment left unset.
pub fn merged_argv(matches: &ArgMatches, path: &Path, argv: &[OsString]) -> Result<Vec<OsString>> {
    let entries = parse_file(path)?;
    if entries.is_empty() {
        return Ok(argv.to_vec());
    }
    // Without a subcommand there is nothing to merge into; the strict
    // parse will report the missing subcommand as a usage error.
    let Some((sub_name, sub_matches)) = matches.subcommand() else {
        return Ok(argv.to_vec());
    };

    let flags = known_flags(sub_name);
    let mut merged = argv.to_vec();
    for (key, value, line) in entries {
        let info = flags.get(key.as_str()).ok_or_else(|| {
            Error::Invalid(format!(
                "config key `{key}` (line {line}) is not a flag of `{sub_name}`"
            ))
        })?;
        // Global flags propagate into the subcommand matches, so one
        // lookup covers both levels.
        let given = matches!(
            sub_matches.value_source(&info.id),
            Some(ValueSource::CommandLine | ValueSource::EnvVariable)
        );
        if given {
            continue;
        }
        if info.is_switch {
            match value.as_str() {
                "true" => merged.push(format!("--{key}").into()),
                "false" => {}
                other => {
                    return Err(Error::Invalid(format!(
                        "config key `{key}` (line {line}) must be true or false, got `{other}`"
                    )));
                }
            }
        } else {
            merged.push(format!("--{key}").into());
            merged.push(value.into());
        }
    }
    Ok(merged)
}

/// Collects the long flags accepted by `sub_name`, including the global
/// flags defined on the top-level command. `config`, `help`, and
/// `version` are deliberately absent: a config file cannot nest another
/// config or trigger meta output.
fn known_flags(sub_name: &str) -> HashMap<String, FlagInfo> {
    let root = super::Cli::command();
    let mut flags = HashMap::new();
    let subcommand = root.get_subcommands().find(|c| c.get_name() == sub_name);
    let args = root
        .get_arguments()
        .chain(subcommand.into_iter().flat_map(|c| c.get_arguments()));
    for arg in args {
        let Some(long) = arg.get_long() else { continue };
        if matches!(long, "config" | "help" | "version") {
            continue;
        }
        let is_switch = matches!(arg.get_action(), ArgAction::SetTrue | ArgAction::SetFalse);
        flags.insert(long.to_string(), FlagInfo { id: arg.get_id().to_string(), is_switch });
    }
    flags
}

/// Parses the file into `(key, value, line_number)` triples. Keys are
/// normalized to flag spelling (underscores become hyphens); duplicates
/// are rejected so the effective value is never order-dependent.
fn parse_file(path: &Path) -> Result<Vec<(String, String, usize)>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Invalid(format!("cannot read config file {}: {e}", path.display()))
    })?;
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::Invalid(format!(
                "config line {line} is not `key = value`: `{trimmed}`"
            )));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Invalid(format!("config line {line} has an empty key")));
        }
        if entries.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::Invalid(format!(
                "config key `{key}` (line {line}) appears more than once"
            )));
        }
        entries.push((key, value, line));
    }
    Ok(entries)
}
