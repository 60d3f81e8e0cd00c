//! `key=value` config files merged under the command-line flags.
//!
//! Keys are long flag names (`sigma-p`, or `sigma_p`). Global keys are placed
//! before the subcommand and the rest right after it, ahead of the user's own
//! flags, so anything given on the command line wins.

use std::fs;
use std::path::Path;

use clap::Command;
use rssiloc_core::{Error, Result};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid("config", format!("line {}: expected `key=value`", i + 1)))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn global_value_flags(cmd: &Command) -> Vec<String> {
    cmd.get_arguments()
        .filter(|a| a.is_global_set() && a.get_action().takes_values())
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}

/// Index of the subcommand token and the `--config` value, if any.
fn scan(cmd: &Command, argv: &[String]) -> (Option<usize>, Option<String>) {
    let valued = global_value_flags(cmd);
    let mut sub = None;
    let mut config = None;
    let mut i = 1;
    while i < argv.len() {
        let tok = &argv[i];
        if let Some(flag) = tok.strip_prefix("--") {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n, Some(v.to_string())),
                None => (flag, None),
            };
            if valued.iter().any(|v| v == name) {
                let value = match inline {
                    Some(v) => Some(v),
                    None => {
                        i += 1;
                        argv.get(i).cloned()
                    }
                };
                if name == "config" {
                    config = value;
                }
            }
        } else if sub.is_none() && !tok.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    (sub, config)
}

fn to_flags(cmd: &Command, key: &str, value: &str) -> Option<Vec<String>> {
    let arg = cmd.get_arguments().find(|a| a.get_long() == Some(key))?;
    if arg.get_action().takes_values() {
        return Some(vec![format!("--{key}={value}")]);
    }
    Some(match value {
        "true" | "yes" | "1" => vec![format!("--{key}")],
        _ => Vec::new(),
    })
}

/// Returns `argv` with the config file's entries spliced in.
pub fn expand(cmd: &Command, argv: Vec<String>) -> Result<Vec<String>> {
    let (sub_at, config) = scan(cmd, &argv);
    let Some(path) = config else { return Ok(argv) };
    let entries = parse(&fs::read_to_string(Path::new(&path))?)?;
    let sub = sub_at.and_then(|i| cmd.find_subcommand(&argv[i]));

    let mut globals = Vec::new();
    let mut locals = Vec::new();
    for (k, v) in &entries {
        if k == "config" {
            return Err(Error::invalid("config", "config files cannot include other config files"));
        }
        if let Some(flags) = to_flags(cmd, k, v) {
            globals.extend(flags);
        } else if let Some(flags) = sub.and_then(|s| to_flags(s, k, v)) {
            locals.extend(flags);
        } else {
            return Err(Error::invalid("config", format!("unknown key `{k}`")));
        }
    }
    let mut out = vec![argv[0].clone()];
    out.extend(globals);
    match sub_at {
        Some(i) => {
            out.extend(argv[1..=i].iter().cloned());
            out.extend(locals);
            out.extend(argv[i + 1..].iter().cloned());
        }
        None => out.extend(argv[1..].iter().cloned()),
    }
    Ok(out)
}
