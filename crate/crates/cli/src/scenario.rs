//! Scenario files: TOML mirroring `ScenarioSpec`, or the name of a shipped
//! preset.

use std::fs;
use std::path::Path;

use platoon_core::sim::{preset, Issue, Section};
use platoon_core::ScenarioSpec;

use crate::Failure;

/// Resolve `arg` as a file if one exists, else as a preset name.
pub fn load(arg: &str) -> Result<ScenarioSpec, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let src = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{arg}: {e}")))?;
        return parse(&src, arg);
    }
    let spec =
        preset(arg).ok_or_else(|| Failure::invalid(format!("{arg}: no such file or preset")))?;
    let issues = spec.issues();
    if issues.is_empty() {
        Ok(spec)
    } else {
        Err(Failure::invalid(
            issues
                .iter()
                .map(|i| format!("{arg}: {i}"))
                .collect::<Vec<_>>()
                .join("\n"),
        ))
    }
}

/// Parse and validate scenario text. Errors carry `origin:line:col`.
pub fn parse(src: &str, origin: &str) -> Result<ScenarioSpec, Failure> {
    let spec: ScenarioSpec = toml::from_str(src).map_err(|e| {
        let at = e.span().map(|s| line_col(src, s.start)).unwrap_or((1, 1));
        Failure::invalid(format!(
            "{origin}:{}:{}: {}",
            at.0,
            at.1,
            e.message().trim_end()
        ))
    })?;
    let issues = spec.issues();
    if issues.is_empty() {
        return Ok(spec);
    }
    let lines: Vec<String> = issues
        .iter()
        .map(|i| match locate(src, i) {
            Some(line) => format!("{origin}:{line}: {i}"),
            None => format!("{origin}: {i}"),
        })
        .collect();
    Err(Failure::invalid(lines.join("\n")))
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |nl| before.len() - nl - 1)
        + 1;
    (line, col)
}

fn header(line: &str) -> Option<&str> {
    let t = line.trim();
    t.starts_with('[')
        .then(|| t.trim_matches(|c| c == '[' || c == ']').trim())
}

fn assigns(line: &str, key: &str) -> bool {
    line.trim_start()
        .strip_prefix(key)
        .is_some_and(|rest| rest.trim_start().starts_with('='))
}

/// 1-based line of the key an issue refers to, falling back to the header
/// of its table.
fn locate(src: &str, issue: &Issue) -> Option<usize> {
    let table = match &issue.section {
        Section::Top => None,
        Section::Policy => Some(("policy", 0)),
        Section::Limits => Some(("limits", 0)),
        Section::Vehicle(i) => Some(("vehicles", *i)),
        Section::LaneChange => Some(("lane_change", 0)),
        Section::Disturbance => Some(("disturbance", 0)),
        Section::Mpc => Some(("mpc", 0)),
    };
    let lines: Vec<&str> = src.lines().collect();
    let (start, end) = match table {
        None => (
            0,
            lines
                .iter()
                .position(|l| header(l).is_some())
                .unwrap_or(lines.len()),
        ),
        Some((name, nth)) => {
            let start = lines
                .iter()
                .enumerate()
                .filter(|(_, l)| header(l) == Some(name))
                .nth(nth)
                .map(|(k, _)| k)?;
            let end = lines[start + 1..]
                .iter()
                .position(|l| header(l).is_some())
                .map_or(lines.len(), |k| start + 1 + k);
            (start, end)
        }
    };
    (start..end)
        .find(|&k| assigns(lines[k], issue.key))
        .or(table.map(|_| start))
        .map(|k| k + 1)
}
