//! `key = value` config files, merged into argv ahead of the user's flags.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;

#[derive(Debug)]
pub struct ConfigError(pub String);

/// Mutually exclusive flags: a flag on the command line suppresses the config
/// value of its partner.
const EXCLUSIVE: &[(&str, &str)] = &[("va", "optimize-va")];

/// Reads `--config FILE` from `argv` (if present) and returns argv with the
/// file's entries inserted after the subcommand name. Entries whose flag is
/// already on the command line are dropped, so flags always win.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(path) = config_path(&args) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ConfigError(format!("cannot read config file {path}: {e}")))?;
    let entries = parse(&text, Path::new(&path))?;

    let cmd = Cli::command();
    let sub_names: Vec<&str> = cmd.get_subcommands().map(|s| s.get_name()).collect();
    let Some(sub_idx) = args.iter().position(|a| sub_names.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let sub = cmd
        .find_subcommand(&args[sub_idx])
        .expect("name came from the subcommand list");

    let on_cli = |key: &str| {
        args.iter().any(|a| {
            a.strip_prefix("--")
                .map(|f| f.split('=').next() == Some(key))
                .unwrap_or(false)
        })
    };

    let mut extra = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(ConfigError("config files cannot include other config files".into()));
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                ConfigError(format!("unknown config key `{key}` for `{}`", sub.get_name()))
            })?;
        let partner_on_cli = EXCLUSIVE.iter().any(|&(a, b)| {
            (key == a && on_cli(b)) || (key == b && on_cli(a))
        });
        if on_cli(&key) || partner_on_cli {
            continue;
        }
        if arg.get_action().takes_values() {
            extra.push(format!("--{key}={value}"));
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => extra.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                _ => {
                    return Err(ConfigError(format!(
                        "config key `{key}` is a switch; use true or false, got `{value}`"
                    )))
                }
            }
        }
    }

    let mut out: Vec<OsString> = argv[..=sub_idx].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend(argv[sub_idx + 1..].iter().cloned());
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// keys may use `_` or `-`.
pub fn parse(text: &str, path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ConfigError(format!("{}:{}: expected `key = value`", path.display(), n + 1))
        })?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        let value = v.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(ConfigError(format!("{}:{}: empty key", path.display(), n + 1)));
        }
        out.push((key, value));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines() {
        let got = parse("# c\n\neta = 0.5\nattack=collective\nrate_convention = \"channel-use\"\n", Path::new("x")).unwrap();
        assert_eq!(
            got,
            vec![
                ("eta".into(), "0.5".into()),
                ("attack".into(), "collective".into()),
                ("rate-convention".into(), "channel-use".into()),
            ]
        );
        assert!(parse("eta 0.5", Path::new("x")).is_err());
    }
}
