//! Acceptance battery: runs every criterion at its pinned tolerance and
//! prints one pass/fail line per criterion (visible with --nocapture or
//! on failure).

use carnot::suite::{run_criterion, CRITERIA};

#[test]
fn acceptance_criteria() {
    let start = std::time::Instant::now();
    let mut failures = Vec::new();
    for i in 1..=CRITERIA {
        let r = run_criterion(i, 0);
        println!("{}", r.summary_line());
        for note in &r.notes {
            println!("    {note}");
        }
        let budget = match r.id.as_str() {
            "C01" | "C04" => Some(10.0),
            "C02" => Some(30.0),
            _ => None,
        };
        if let Some(limit) = budget {
            let t = r.runtime.as_secs_f64();
            if t >= limit {
                failures.push(format!("{} runtime {t:.1}s exceeded the {limit}s budget", r.id));
            }
        }
        if !r.pass {
            let detail: Vec<String> = r
                .rows
                .iter()
                .filter(|row| !row.pass)
                .map(|row| format!("{} residual {:.3e} tol {:.1e}", row.id, row.residual, row.tolerance))
                .collect();
            failures.push(format!("{} failed: {}", r.id, detail.join("; ")));
        }
    }
    let total = start.elapsed().as_secs_f64();
    println!("full battery wall time: {total:.2}s");
    assert!(total < 300.0, "suite exceeded the five-minute target: {total:.1}s");
    assert!(failures.is_empty(), "\n{}", failures.join("\n"));
}
