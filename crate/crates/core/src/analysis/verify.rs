//! The full convergence verification as one pass/fail table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::lemma::{
    random_scenarios, run_lemma_batch, run_lemma_suite, sample_positivity_inequality, LemmaCheck, LemmaReport,
    LemmaScenario, Status,
};
use crate::config::SimConfig;
use crate::error::Result;
use crate::par::Exec;
use crate::plasticity::{delay_delta_d, stdp_delta_w, PairTiming};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub inequality_samples: usize,
    pub scenarios: usize,
    pub repetitions: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 42,
            inequality_samples: 10_000,
            scenarios: 100,
            repetitions: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub name: String,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| !matches!(r.status, Status::Fail(_)))
    }

    pub fn failures(&self) -> Vec<&VerifyRow> {
        self.rows.iter().filter(|r| matches!(r.status, Status::Fail(_))).collect()
    }

    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(out, "{:width$}  {}", r.name, r.status);
        }
        out
    }
}

fn combine(per_scenario: &[&Status]) -> Status {
    if let Some((i, why)) = per_scenario.iter().enumerate().find_map(|(i, s)| match s {
        Status::Fail(why) => Some((i, why)),
        _ => None,
    }) {
        let n = per_scenario.iter().filter(|s| matches!(s, Status::Fail(_))).count();
        return Status::Fail(format!("{n} scenario(s), first #{i}: {why}"));
    }
    if !per_scenario.is_empty() && per_scenario.iter().all(|s| matches!(s, Status::Skipped(_))) {
        if let Status::Skipped(why) = per_scenario[0] {
            return Status::Skipped(why.clone());
        }
    }
    Status::Pass
}

fn lemma_rows(prefix: &str, reports: &[LemmaReport], rows: &mut Vec<VerifyRow>) {
    for check in LemmaCheck::ALL {
        let statuses: Vec<&Status> = reports.iter().map(|r| r.status(check)).collect();
        rows.push(VerifyRow {
            name: format!("{prefix}{}", check.label()),
            status: combine(&statuses),
        });
    }
}

/// Sign structure of both learning windows under `cfg`.
fn rule_signs(cfg: &SimConfig) -> (Status, Status) {
    let grid: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.05).chain([-1e-6, 1e-6]).collect();
    let mut w_bad = None;
    let mut d_bad = None;
    for &dt in &grid {
        let t = PairTiming(dt);
        let dw = stdp_delta_w(t, cfg);
        let dd = delay_delta_d(t, cfg);
        if w_bad.is_none() && ((dt >= 0.0 && dw < 0.0) || (dt < 0.0 && dw > 0.0)) {
            w_bad = Some(format!("dt {dt}: dw {dw}"));
        }
        if d_bad.is_none() && ((dt >= 0.0 && dd > 0.0) || (dt < 0.0 && dd < 0.0)) {
            d_bad = Some(format!("dt {dt}: dd {dd}"));
        }
    }
    let status = |bad: Option<String>| bad.map_or(Status::Pass, Status::Fail);
    (status(w_bad), status(d_bad))
}

/// Positivity inequality sampling, the check suite on random scenarios, the
/// suite on a fixed pattern with the rule parameters of `cfg`, and the sign
/// structure of both learning windows.
pub fn run_verification(cfg: &SimConfig, opts: VerifyOptions, exec: Exec) -> Result<VerifyReport> {
    let mut rows = Vec::new();

    let sample = sample_positivity_inequality(opts.seed, opts.inequality_samples, 8.0, exec);
    rows.push(VerifyRow {
        name: "positivity-inequality".into(),
        status: if sample.violations == 0 {
            Status::Pass
        } else {
            Status::Fail(format!("{} of {} samples", sample.violations, sample.samples))
        },
    });

    let scenarios = random_scenarios(opts.seed, opts.scenarios, opts.repetitions);
    let reports = run_lemma_batch(&scenarios, exec).into_iter().collect::<Result<Vec<_>>>()?;
    lemma_rows("random ", &reports, &mut rows);

    let mut fixed = LemmaScenario::new(vec![0.0, 1.0, 3.0], vec![10.0; 3], cfg.b_minus, cfg.sigma_minus, opts.repetitions);
    fixed.b_plus = cfg.b_plus;
    fixed.sigma_plus = cfg.sigma_plus;
    let report = run_lemma_suite(&fixed)?;
    lemma_rows("config ", &[report], &mut rows);

    let (w, d) = rule_signs(cfg);
    rows.push(VerifyRow {
        name: "weight-window-sign".into(),
        status: w,
    });
    rows.push(VerifyRow {
        name: "delay-window-sign".into(),
        status: d,
    });
    Ok(VerifyReport { rows })
}
