//! `key = value` config files, expanded into long flags.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::Path;

use crate::error::{usage, CliResult};

/// Global flags that take a value and may precede the subcommand.
const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--workers", "--config"];

/// Removes `--config FILE` from `args` and splices the file's settings in
/// after the subcommand. Flags given on the command line win.
pub fn expand(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    rest.extend(it.next());
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = Some(it.next().ok_or_else(|| usage("--config needs a file"))?);
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(OsString::from(v));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let present: HashSet<String> = rest
        .iter()
        .filter_map(|a| a.to_str())
        .filter(|a| a.starts_with("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_owned())
        .collect();
    let extra = read(Path::new(&path))?
        .into_iter()
        .filter(|(k, _)| !present.contains(&format!("--{k}")))
        .flat_map(|(k, v)| match v.as_str() {
            "true" => vec![OsString::from(format!("--{k}"))],
            "false" => vec![],
            _ => vec![OsString::from(format!("--{k}")), OsString::from(v)],
        });
    let at = subcommand_position(&rest).map_or(rest.len(), |p| p + 1);
    rest.splice(at..at, extra);
    Ok(rest)
}

fn subcommand_position(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_ref()) {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn read(path: &Path) -> CliResult<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected `key = value`", path.display(), no + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        let v = v.trim().trim_matches('"').to_owned();
        if k.is_empty() {
            return Err(usage(format!("{}:{}: empty key", path.display(), no + 1)));
        }
        out.push((k, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_values_follow_subcommand_and_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        std::fs::write(&cfg, "# comment\nmin_size = 3\ncriterion = surprise\nsymmetrize = true\nquiet = false\n").unwrap();
        let args = os(&["catrank", "--workers", "1", "--config", cfg.to_str().unwrap(), "rank", "--criterion", "conductance"]);
        let got = expand(args).unwrap();
        assert_eq!(
            got,
            os(&["catrank", "--workers", "1", "rank", "--min-size", "3", "--symmetrize", "--criterion", "conductance"])
        );
    }

    #[test]
    fn malformed_config_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.conf");
        std::fs::write(&cfg, "no equals sign\n").unwrap();
        let err = expand(os(&["catrank", "rank", &format!("--config={}", cfg.display())])).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
