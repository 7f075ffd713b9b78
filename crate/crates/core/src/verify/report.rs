//! Plain-text summary and CSV export of check results.

use std::fmt::Write;

use super::{CheckResult, CheckStatus, Location};

fn coords(v: &Option<Vec<f64>>) -> String {
    v.as_ref().map(|c| c.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")).unwrap_or_default()
}

fn loc_fields(l: &Location) -> String {
    let idx = |v: Option<usize>| v.map_or(String::new(), |v| (v + 1).to_string());
    format!(
        "{},{},{},{},{}",
        l.t.map_or(String::new(), |t| format!("{t}")),
        coords(&l.x),
        coords(&l.y),
        idx(l.h),
        idx(l.k)
    )
}

/// One row per `(check, sample)` with a header; indices are 1-based.
pub fn results_csv(results: &[CheckResult]) -> String {
    let mut s = String::from("check,status,t,x,y,h,k,value,reference,violation,tolerance,fingerprint\n");
    for r in results {
        for sm in &r.samples {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{:e},{:e},{}",
                r.id,
                r.status.name(),
                loc_fields(&sm.location),
                sm.value,
                sm.reference,
                sm.violation,
                r.tolerance,
                r.fingerprint
            );
        }
    }
    s
}

/// Pass/fail matrix with worst violations, metrics and notes.
pub fn summary(title: &str, results: &[CheckResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {title}");
    let _ = writeln!(s);
    for r in results {
        let _ = writeln!(s, "{}", r.line());
    }
    let count = |st: CheckStatus| results.iter().filter(|r| r.status == st).count();
    let _ = writeln!(
        s,
        "\n{} pass, {} fail, {} inconclusive",
        count(CheckStatus::Pass),
        count(CheckStatus::Fail),
        count(CheckStatus::Inconclusive)
    );
    for r in results.iter().filter(|r| !r.metrics.is_empty() || !r.notes.is_empty()) {
        let _ = writeln!(s, "\n## {} [{}]", r.id, r.fingerprint);
        for (k, v) in &r.metrics {
            let _ = writeln!(s, "  {k} = {v:.6e}");
        }
        for n in &r.notes {
            let _ = writeln!(s, "  note: {n}");
        }
    }
    s
}
