//! `key = value` config files merged into the command line. Keys are flag
//! names (`log_limit` and `log-limit` both work); flags given on the command
//! line win over the file.

use std::path::Path;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse(text: &str, origin: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ConfigError(format!(
                "{origin}:{}: expected `key = value`, got `{line}`",
                i + 1
            ))
        })?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(ConfigError(format!("{origin}:{}: empty key", i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Value of `--config`, in either `--config path` or `--config=path` form.
fn config_path(args: &[String]) -> Option<String> {
    args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

fn has_flag(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&prefix))
}

/// `args` with the entries of the `--config` file inserted after the
/// subcommand, skipping keys already given as flags. `true`/`false` values
/// turn into a bare switch or nothing.
pub fn merge(args: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| ConfigError(format!("cannot read config file `{path}`: {e}")))?;
    let entries = parse(&text, &path)?;
    let at = args
        .iter()
        .position(|a| subcommands.contains(&a.as_str()))
        .map_or(args.len(), |i| i + 1);
    let mut extra = Vec::new();
    for (k, v) in entries {
        if k == "config" || has_flag(&args, &k) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(format!("--{k}")),
            "false" => {}
            _ => extra.push(format!("--{k}={v}")),
        }
    }
    let mut out = args;
    out.splice(at..at, extra);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let p = parse("# run\nlog_limit = 4\n\nseed=7 # fixed\n", "f").unwrap();
        assert_eq!(
            p,
            vec![
                ("log-limit".to_string(), "4".to_string()),
                ("seed".to_string(), "7".to_string())
            ]
        );
        assert!(parse("novalue\n", "f").unwrap_err().0.contains("f:1"));
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "n = 5\nseed = 1\nquiet = true\nloud = false\n").unwrap();
        let args = strings(&[
            "bin",
            "--config",
            path.to_str().unwrap(),
            "ballot",
            "--seed=9",
        ]);
        let merged = merge(args, &["ballot"]).unwrap();
        assert_eq!(
            merged[3..],
            strings(&["ballot", "--n=5", "--quiet", "--seed=9"])[..]
        );
    }

    #[test]
    fn missing_file_is_an_error() {
        let args = strings(&["bin", "--config=/nonexistent/x", "sieve"]);
        assert!(merge(args, &["sieve"]).is_err());
    }
}
