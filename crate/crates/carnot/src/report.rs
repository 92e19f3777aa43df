//! Machine-readable reports: CSV rows plus a JSON mirror that echoes the
//! resolved configuration. Formatting is fixed-width scientific so that
//! repeated runs with the same seeds produce byte-identical files.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub id: String,
    pub identity: String,
    pub group: String,
    pub domain: String,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn csv_header() -> &'static str {
        "id,identity,group,domain,p,lhs,rhs,residual,tolerance,pass"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.12e},{:.12e},{:.12e},{:.3e},{}",
            self.id,
            self.identity,
            self.group,
            self.domain,
            self.p,
            self.lhs,
            self.rhs,
            self.residual,
            self.tolerance,
            self.pass
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportDoc {
    pub command: String,
    /// Full resolved configuration (defaults included).
    pub config: serde_json::Value,
    pub rows: Vec<CheckRow>,
    pub passed: usize,
    pub failed: usize,
}

impl ReportDoc {
    pub fn new(command: &str, config: serde_json::Value, rows: Vec<CheckRow>) -> Self {
        let passed = rows.iter().filter(|r| r.pass).count();
        let failed = rows.len() - passed;
        ReportDoc {
            command: command.to_string(),
            config,
            rows,
            passed,
            failed,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }

    /// Writes <stem>.csv and <stem>.json under the output directory.
    pub fn write(&self, out_dir: &Path, stem: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let mut csv = String::from(CheckRow::csv_header());
        csv.push('\n');
        for row in &self.rows {
            csv.push_str(&row.to_csv());
            csv.push('\n');
        }
        std::fs::write(out_dir.join(format!("{stem}.csv")), csv)?;
        let mut f = std::fs::File::create(out_dir.join(format!("{stem}.json")))?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        f.write_all(json.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Sort rows by id for deterministic ordering regardless of how the
/// checks were scheduled.
pub fn sort_rows(rows: &mut [CheckRow]) {
    rows.sort_by(|a, b| a.id.cmp(&b.id));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str) -> CheckRow {
        CheckRow {
            id: id.into(),
            identity: "divergence".into(),
            group: "H1".into(),
            domain: "box".into(),
            p: 2.0,
            lhs: 1.0,
            rhs: 1.0 + 1e-13,
            residual: 1e-13,
            tolerance: 1e-10,
            pass: true,
        }
    }

    #[test]
    fn csv_is_stable() {
        let a = row("a").to_csv();
        let b = row("a").to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("a,divergence,H1,box,2,"));
    }

    #[test]
    fn rows_sort_by_id() {
        let mut rows = vec![row("b"), row("a"), row("c")];
        sort_rows(&mut rows);
        let ids: Vec<&str> = rows.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }
}
