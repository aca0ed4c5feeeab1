//! Declarative run files.
//!
//! ```toml
//! command = "crossed berezin-test"
//! seed = 7
//!
//! [args]
//! kind = "circle"
//! alpha = 0.2
//! p = [2, 4]
//! ```
//!
//! Keys become `--key value` flags (underscores turn into hyphens), `true`
//! becomes a bare flag, `false` is dropped and arrays are comma-joined.
//! Top-level keys other than `command` and `args` are flags as well.
//! Flags given on the command line after `--config` override the file.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use toml::{Table, Value};

fn scalar(v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Array(items) => items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(","),
        other => bail!("unsupported value `{other}` in run file"),
    })
}

fn push_flags(table: &Table, out: &mut Vec<String>) -> Result<()> {
    for (k, v) in table {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            Value::Boolean(true) => out.push(flag),
            Value::Boolean(false) => {}
            Value::Table(_) => bail!("nested table `{k}` is not a flag"),
            v => {
                out.push(flag);
                out.push(scalar(v)?);
            }
        }
    }
    Ok(())
}

/// `argv` tokens (without the program name) described by a run file.
pub fn expand(text: &str) -> Result<Vec<String>> {
    let table: Table = text.parse().context("run file is not valid TOML")?;
    let command = table
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("run file needs a string `command`"))?;
    let mut out: Vec<String> = command.split_whitespace().map(String::from).collect();
    if out.is_empty() {
        bail!("run file `command` is empty");
    }
    let mut top = table.clone();
    top.remove("command");
    let args = top.remove("args");
    push_flags(&top, &mut out)?;
    match args {
        Some(Value::Table(t)) => push_flags(&t, &mut out)?,
        Some(_) => bail!("`args` must be a table"),
        None => {}
    }
    Ok(out)
}

/// Replaces `--config <file>` in `argv` by the file's tokens; the remaining
/// arguments follow so they take precedence.
pub fn resolve_argv(argv: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut file: Option<String> = None;
    let mut it = argv.into_iter();
    let program = it.next().unwrap_or_else(|| "fraclap".into());
    while let Some(a) = it.next() {
        if a == "--config" {
            file = Some(it.next().ok_or_else(|| anyhow!("--config needs a file"))?);
        } else if let Some(f) = a.strip_prefix("--config=") {
            file = Some(f.to_string());
        } else {
            rest.push(a);
        }
    }
    let mut out = vec![program];
    if let Some(f) = file {
        let text = std::fs::read_to_string(Path::new(&f)).with_context(|| format!("reading run file {f}"))?;
        out.extend(expand(&text)?);
    }
    out.extend(rest);
    Ok(out)
}
