//! Comparison of pipeline output with the golden fixture.

use std::path::{Path, PathBuf};

/// Output files checked against the fixture.
pub const GOLDEN_FILES: [&str; 3] = ["signals.csv", "holdings.csv", "backtest_returns.csv"];

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden")
}

fn numeric_columns(header: &str) -> Vec<bool> {
    const NUMERIC: [&str; 7] = [
        "marginal_cash_value",
        "avg_cash_value",
        "b_raw",
        "b_winsorized",
        "weight",
        "portfolio_return",
        "cumulative_return",
    ];
    header.split(',').map(|h| NUMERIC.contains(&h)).collect()
}

/// Round every numeric field to 10 decimal places; anything that rounds to zero becomes `0`.
pub fn canonical(text: &str) -> String {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let numeric = numeric_columns(header);
    let mut out = String::from(header);
    out.push('\n');
    for line in lines {
        let fields: Vec<String> = line
            .split(',')
            .zip(&numeric)
            .map(|(f, &is_num)| match (is_num, f.parse::<f64>()) {
                (true, Ok(v)) => {
                    let s = format!("{v:.10}");
                    if s.trim_start_matches('-').trim_matches(['0', '.']).is_empty() {
                        "0".to_string()
                    } else {
                        s
                    }
                }
                _ => f.to_string(),
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Names of golden files whose canonical form differs from the output in `out`.
pub fn mismatches(out: &Path) -> Vec<String> {
    let expected = golden_dir().join("expected");
    GOLDEN_FILES
        .iter()
        .filter(|name| {
            let got = std::fs::read_to_string(out.join(name)).unwrap_or_default();
            let want = std::fs::read_to_string(expected.join(name)).expect("golden file");
            canonical(&got) != want
        })
        .map(|s| s.to_string())
        .collect()
}
