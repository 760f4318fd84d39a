use std::fmt::Write as _;

use super::experiment::RunResult;
use super::metrics::mean_std;
use super::record::format_real;

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub mae_mean: f64,
    pub mae_std: f64,
    /// 1 for the lowest mean MSE; methods without a successful run rank last.
    pub rank: usize,
}

/// Mean and sample standard deviation of the final metrics per method, over
/// the successful repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<MethodSummary>,
}

impl ComparisonTable {
    /// One row per method name, sorted by name.
    pub fn from_results(results: &[RunResult]) -> Self {
        let mut names: Vec<String> = results.iter().map(|r| r.method.clone()).collect();
        names.sort();
        names.dedup();
        let mut rows: Vec<MethodSummary> = names
            .into_iter()
            .map(|method| {
                let runs: Vec<&RunResult> = results.iter().filter(|r| r.method == method).collect();
                let ok: Vec<&&RunResult> = runs.iter().filter(|r| r.is_ok()).collect();
                let mse: Vec<f64> = ok.iter().map(|r| r.mse).collect();
                let mae: Vec<f64> = ok.iter().map(|r| r.mae).collect();
                let (mse_mean, mse_std) = mean_std(&mse);
                let (mae_mean, mae_std) = mean_std(&mae);
                MethodSummary {
                    method,
                    n_ok: ok.len(),
                    n_failed: runs.len() - ok.len(),
                    mse_mean,
                    mse_std,
                    mae_mean,
                    mae_std,
                    rank: 0,
                }
            })
            .collect();
        let mut by_score: Vec<usize> = (0..rows.len()).collect();
        by_score.sort_by(|&a, &b| {
            let key = |i: usize| if rows[i].n_ok > 0 { rows[i].mse_mean } else { f64::INFINITY };
            key(a).total_cmp(&key(b)).then(rows[a].method.cmp(&rows[b].method))
        });
        for (rank, i) in by_score.into_iter().enumerate() {
            rows[i].rank = rank + 1;
        }
        Self { rows }
    }

    pub fn get(&self, method: &str) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,n_ok,n_failed,mse_mean,mse_std,mae_mean,mae_std,rank\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.method,
                r.n_ok,
                r.n_failed,
                format_real(r.mse_mean),
                format_real(r.mse_std),
                format_real(r.mae_mean),
                format_real(r.mae_std),
                r.rank
            );
        }
        out
    }
}
