use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

pub const OUT_DIR_ENV: &str = "LPGRAD_OUT_DIR";

/// Entries of a flat `key = value` file, in file order.
pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), i + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("{}:{}: empty key", path.display(), i + 1));
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}

/// Value of `--config` in `argv`, if present.
pub fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut iter = argv.iter().skip(1);
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn takes_value(arg: &str) -> bool {
    matches!(arg, "--config" | "--out-dir" | "--workers" | "--seed")
}

/// Inserts config entries as flags right after the subcommand so that
/// later command-line flags override them. `out-dir` is returned separately
/// because the environment variable ranks above the file.
pub fn inject(argv: Vec<OsString>, entries: &[(String, String)]) -> (Vec<OsString>, Option<PathBuf>) {
    let mut out_dir = None;
    let mut flags = Vec::new();
    for (key, value) in entries {
        if key == "out-dir" {
            out_dir = Some(PathBuf::from(value));
        } else if key == "config" {
            continue;
        } else {
            flags.push(OsString::from(format!("--{key}")));
            flags.push(OsString::from(value));
        }
    }
    let mut position = None;
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if takes_value(&s) {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            position = Some(i + 1);
            break;
        }
        i += 1;
    }
    let mut merged = argv;
    if let Some(at) = position {
        merged.splice(at..at, flags);
    } else {
        merged.extend(flags);
    }
    (merged, out_dir)
}

pub fn resolve_out_dir(flag: Option<PathBuf>, env: Option<OsString>, file: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .or(file)
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_flags_precede_command_line_flags() {
        let argv = os(&["lpgrad", "--workers", "2", "kq", "--q", "3"]);
        let entries = vec![("q".to_string(), "1".to_string()), ("out-dir".to_string(), "x".to_string())];
        let (merged, out) = inject(argv, &entries);
        assert_eq!(merged, os(&["lpgrad", "--workers", "2", "kq", "--q", "1", "--q", "3"]));
        assert_eq!(out, Some(PathBuf::from("x")));
    }

    #[test]
    fn out_dir_precedence() {
        let flag = Some(PathBuf::from("a"));
        let env = Some(OsString::from("b"));
        let file = Some(PathBuf::from("c"));
        assert_eq!(resolve_out_dir(flag, env.clone(), file.clone()), PathBuf::from("a"));
        assert_eq!(resolve_out_dir(None, env, file.clone()), PathBuf::from("b"));
        assert_eq!(resolve_out_dir(None, None, file), PathBuf::from("c"));
        assert_eq!(resolve_out_dir(None, None, None), PathBuf::from("."));
    }

    #[test]
    fn finds_config_path() {
        assert_eq!(config_path(&os(&["lpgrad", "kq", "--config", "f.cfg"])), Some(PathBuf::from("f.cfg")));
        assert_eq!(config_path(&os(&["lpgrad", "--config=g"])), Some(PathBuf::from("g")));
        assert_eq!(config_path(&os(&["lpgrad", "kq"])), None);
    }
}
