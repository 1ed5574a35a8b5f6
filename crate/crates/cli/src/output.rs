use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{Format, OutputArgs, UsageError};

pub const OUT_DIR_VAR: &str = "L2MBQC_OUT_DIR";

/// Where an artifact goes: `--out`, else `$L2MBQC_OUT_DIR/<default_name>`,
/// else stdout.
pub fn destination(args: &OutputArgs, default_name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_VAR).map(PathBuf::from);
    match (&args.out, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => Some(d.join(default_name)),
        (None, None) => None,
    }
}

pub fn format(args: &OutputArgs, default: Format) -> Format {
    args.format.unwrap_or(default)
}

pub fn emit(args: &OutputArgs, default_name: &str, content: &str) -> Result<(), UsageError> {
    match destination(args, default_name) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| UsageError(format!("{}: {e}", parent.display())))?;
            }
            fs::write(&path, content).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => match std::io::stdout().write_all(content.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(())
}

pub fn emit_json(args: &OutputArgs, default_name: &str, value: &serde_json::Value) -> Result<(), UsageError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(args, default_name, &text)
}

pub fn read(path: &Path) -> Result<String, UsageError> {
    fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

/// Prefixes core errors with the file they came from.
pub fn in_file<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Result<T, UsageError> {
    r.map_err(|e| UsageError(format!("{}: {e}", path.display())))
}
