//! Output-directory resolution and CSV emission. Files are fully rendered in
//! memory and written in one call, so a failed run leaves no partial files.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CFSL_OUT_DIR";

/// Resolve the output directory: explicit flag, then the environment
/// variable, then `./out`. The directory is created if missing.
pub fn resolve_out_dir(flag: Option<&Path>) -> Result<PathBuf> {
    let dir = match flag {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(v) => PathBuf::from(v),
            None => PathBuf::from("out"),
        },
    };
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

/// Write one fully rendered file.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Render a CSV from a header and rows of already formatted cells.
pub fn render_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Render the per-episode reward trace (header-only when empty).
pub fn render_reward_trace(trace: &[f64]) -> String {
    let rows: Vec<Vec<String>> = trace
        .iter()
        .enumerate()
        .map(|(i, r)| vec![(i + 1).to_string(), format!("{r:.17e}")])
        .collect();
    render_csv(&["episode", "reward"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(render_reward_trace(&[]), "episode,reward\n");
    }

    #[test]
    fn trace_has_one_row_per_episode() {
        let t = [1.0, -2.5, 3.25];
        let csv = render_reward_trace(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,"));
        assert!(lines[3].starts_with("3,"));
    }

    #[test]
    fn csv_shape() {
        let csv = render_csv(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(csv, "a,b\n1,2\n");
    }
}
