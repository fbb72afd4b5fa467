//! Flat `key = value` config files, spliced into argv as long flags so that
//! explicit command-line flags given later take precedence.

use std::ffi::OsString;
use std::fs;

pub fn file_args(path: &str) -> Result<Vec<OsString>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("{path}:{}: expected key = value", lineno + 1));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(format!("{path}:{}: invalid key", lineno + 1));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Moves `--config FILE` (or `--config=FILE`) out of `args` and inserts the
/// file's flags right after the subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut files = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => match it.next() {
                Some(p) => files.push(p.to_string_lossy().into_owned()),
                None => return Err("--config needs a file".into()),
            },
            Some(s) if s.starts_with("--config=") => files.push(s["--config=".len()..].to_string()),
            _ => rest.push(a),
        }
    }
    if files.is_empty() {
        return Ok(rest);
    }
    let Some(sub) = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Err("--config needs a subcommand".into());
    };
    let mut spliced: Vec<OsString> = rest[..=sub].to_vec();
    for f in &files {
        spliced.extend(file_args(f)?);
    }
    spliced.extend_from_slice(&rest[sub + 1..]);
    Ok(spliced)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(
            &path,
            "# comment\nn = 8\nbeta=0.5\nunbounded = true\nshow_all = false\n",
        )
        .unwrap();
        let args: Vec<OsString> = [
            "sos",
            "simulate",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "3",
        ]
        .iter()
        .map(OsString::from)
        .collect();
        let out = expand(args).unwrap();
        let got: Vec<String> = out
            .iter()
            .map(|a| a.to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            got,
            [
                "sos",
                "simulate",
                "--n",
                "8",
                "--beta",
                "0.5",
                "--unbounded",
                "--seed",
                "3"
            ]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        fs::write(&path, "n 8\n").unwrap();
        assert!(file_args(path.to_str().unwrap()).is_err());
    }
}
