//! Reference-experiment checks: run both shipped configurations and compare
//! peaks and solutions against the published values.

use std::path::Path;

use dopsar_core::geometry::Vec3;

use crate::config::RunConfig;
use crate::pipeline::{self, RunOutcome};

pub const PAPER_WB_TOML: &str = include_str!("../configs/paper-wb.toml");
pub const PAPER_UNB_TOML: &str = include_str!("../configs/paper-unb.toml");

/// Expected values of the reference experiment.
pub mod expected {
    /// Wideband image peaks (x, y) in meters, tolerance one pixel.
    pub const WB_PEAK_1: [f64; 2] = [-41.0, -31.0];
    pub const WB_PEAK_2: [f64; 2] = [-48.0, -31.0];
    /// Ultra-narrowband image peaks.
    pub const UNB_PEAK_1: [f64; 2] = [-34.0, -31.0];
    pub const UNB_PEAK_2: [f64; 2] = [-48.0, -31.0];
    /// Recovered scatterer position, tolerance (1 m, 1 m, 0.5 m).
    pub const TARGET: [f64; 3] = [-20.0, -31.0, 50.0];
    pub const PEAK_TOL: f64 = 1.0;
    pub const GROUND_TOL: f64 = 1.0;
    pub const HEIGHT_TOL: f64 = 0.5;
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub got: String,
    pub pass: bool,
}

fn peak_check(name: &str, got: [f64; 2], want: [f64; 2]) -> Check {
    let pass = (got[0] - want[0]).abs() <= expected::PEAK_TOL
        && (got[1] - want[1]).abs() <= expected::PEAK_TOL;
    Check {
        name: name.into(),
        expected: format!("({:.0}, {:.0}) m +- 1 px", want[0], want[1]),
        got: format!("({:.2}, {:.2}) m", got[0], got[1]),
        pass,
    }
}

fn solution_check(name: &str, got: Vec3) -> Check {
    let want = expected::TARGET;
    let pass = (got.x - want[0]).abs() <= expected::GROUND_TOL
        && (got.y - want[1]).abs() <= expected::GROUND_TOL
        && (got.z - want[2]).abs() <= expected::HEIGHT_TOL;
    Check {
        name: name.into(),
        expected: format!(
            "({:.0}, {:.0}, {:.0}) m +- ({}, {}, {})",
            want[0],
            want[1],
            want[2],
            expected::GROUND_TOL,
            expected::GROUND_TOL,
            expected::HEIGHT_TOL
        ),
        got: format!("({:.2}, {:.2}, {:.2}) m", got.x, got.y, got.z),
        pass,
    }
}

pub fn checks_for(wb: &RunOutcome, unb: &RunOutcome) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Some(w) = &wb.wideband {
        checks.push(peak_check("wideband antenna-1 peak", w.peak1_m, expected::WB_PEAK_1));
        checks.push(peak_check("wideband antenna-2 peak", w.peak2_m, expected::WB_PEAK_2));
        checks.push(solution_check("wideband height solution", w.solution_position));
    }
    if let Some(u) = &unb.unb {
        checks.push(peak_check("unb antenna-1 peak", u.peak1_m, expected::UNB_PEAK_1));
        checks.push(peak_check("unb antenna-2 peak", u.peak2_m, expected::UNB_PEAK_2));
        checks.push(solution_check("unb height solution", u.solution_position));
    }
    checks
}

/// Run both shipped configurations under `out_dir` and evaluate the checks.
pub fn run_reference(out_dir: &Path, full: bool) -> anyhow::Result<(Vec<Check>, RunOutcome, RunOutcome)> {
    let wb_cfg = RunConfig::from_toml_str(PAPER_WB_TOML, "paper-wb.toml")
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let unb_cfg = RunConfig::from_toml_str(PAPER_UNB_TOML, "paper-unb.toml")
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let wb_out = pipeline::run(&wb_cfg, PAPER_WB_TOML, &out_dir.join("paper-wb"), !full)?;
    let unb_out = pipeline::run(&unb_cfg, PAPER_UNB_TOML, &out_dir.join("paper-unb"), !full)?;
    let checks = checks_for(&wb_out, &unb_out);
    Ok((checks, wb_out, unb_out))
}

pub fn print_table(checks: &[Check]) {
    let name_w = checks.iter().map(|c| c.name.len()).max().unwrap_or(10).max(5);
    let exp_w = checks.iter().map(|c| c.expected.len()).max().unwrap_or(10).max(8);
    let got_w = checks.iter().map(|c| c.got.len()).max().unwrap_or(10).max(6);
    println!("{:name_w$}  {:exp_w$}  {:got_w$}  status", "check", "expected", "got");
    for c in checks {
        println!(
            "{:name_w$}  {:exp_w$}  {:got_w$}  {}",
            c.name,
            c.expected,
            c.got,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
}
