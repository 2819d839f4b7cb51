//! Flat `key = value` configuration files.
//!
//! Keys are flag names without the leading dashes. Values `true` and
//! `false` switch boolean flags; any other value is passed as the flag's
//! argument. Keys given several times repeat the flag. Blank lines and
//! lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Converts the file at `path` into command-line arguments.
pub fn config_args(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse(&text).with_context(|| format!("in config {}", path.display()))
}

fn parse(text: &str) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value", n + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.starts_with('-') {
            bail!("line {}: invalid key '{key}'", n + 1);
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

/// Splices the arguments of a `--config` file in front of the flags given on
/// the command line, so those take precedence. The file arguments go right
/// after the subcommand name.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            match it.next() {
                Some(p) => path = Some(p),
                None => bail!("--config needs a path"),
            }
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let extra = config_args(Path::new(&path))?;
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map_or(rest.len(), |i| i + 2);
    rest.splice(at..at, extra);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags_and_values() {
        let args = parse("# comment\nmax-breaks = 40\n\nno-refine = true\ndrop-missing = false\nmap = GS10=y1\n").unwrap();
        assert_eq!(args, ["--max-breaks", "40", "--no-refine", "--map", "GS10=y1"]);
        assert!(parse("oops").is_err());
    }
}
