//! JSON run configurations.
//!
//! ```json
//! {"command": "reliable", "args": {"tree": 3, "width": 81, "trials": 10000, "seed": 7},
//!  "out": "tree3.csv", "format": "csv"}
//! ```
//!
//! `args` keys are the subcommand's flag names (`_` or `-`). `true` sets a
//! switch, arrays become comma lists. Unknown keys are rejected.

use std::path::Path;

use clap::{CommandFactory, Parser};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::output::{in_file, read};
use crate::{dispatch, Cli, Status, UsageError};

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    #[serde(default)]
    pub args: Map<String, Value>,
    pub out: Option<String>,
    pub format: Option<String>,
}

const STOCHASTIC: &[&str] = &["reliable", "sweep"];

fn scalar(key: &str, v: &Value) -> Result<String, UsageError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Array(items) => Ok(items
            .iter()
            .map(|i| scalar(key, i))
            .collect::<Result<Vec<_>, _>>()?
            .join(",")),
        _ => Err(UsageError(format!("config key `{key}` has an unsupported value {v}"))),
    }
}

/// Argument vector equivalent to the configuration.
pub fn to_argv(cfg: &RunConfig) -> Result<Vec<String>, UsageError> {
    if cfg.command == "run" {
        return Err(UsageError("a run configuration cannot invoke `run`".into()));
    }
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&cfg.command) else {
        return Err(UsageError(format!("unknown command `{}`", cfg.command)));
    };
    if STOCHASTIC.contains(&cfg.command.as_str()) {
        let trials = cfg.args.get("trials").and_then(Value::as_u64).unwrap_or(0);
        if trials > 0 && !cfg.args.contains_key("seed") {
            return Err(UsageError("`seed` is mandatory for runs with trials > 0".into()));
        }
    }
    let positionals: Vec<String> = sub.get_positionals().map(|a| a.get_id().to_string()).collect();
    let mut argv = vec!["l2mbqc".to_string(), cfg.command.clone()];
    let mut flags = Vec::new();
    for (key, value) in &cfg.args {
        let key = key.replace('_', "-");
        if positionals.contains(&key) {
            argv.push(scalar(&key, value)?);
            continue;
        }
        match value {
            Value::Bool(true) => flags.push(format!("--{key}")),
            Value::Bool(false) | Value::Null => {}
            v => {
                flags.push(format!("--{key}"));
                flags.push(scalar(&key, v)?);
            }
        }
    }
    argv.extend(flags);
    if let Some(out) = &cfg.out {
        argv.extend(["--out".into(), out.clone()]);
    }
    if let Some(format) = &cfg.format {
        argv.extend(["--format".into(), format.clone()]);
    }
    Ok(argv)
}

pub fn run(path: &Path) -> Result<Status, UsageError> {
    let cfg: RunConfig = in_file(path, serde_json::from_str(&read(path)?))?;
    let argv = to_argv(&cfg)?;
    let cli = in_file(
        path,
        Cli::try_parse_from(&argv).map_err(|e| {
            let text = e.to_string();
            text.trim_start_matches("error: ").trim_end().to_string()
        }),
    )?;
    dispatch(cli.command)
}
