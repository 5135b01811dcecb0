//! Answer-only baselines.

use serde::{Deserialize, Serialize};

use crate::metrics::{fp_score_magnitudes, MetricError};
use crate::par::{self, Execution};

pub const DEFAULT_POINTS_PER_DECADE: u32 = 10;
pub const GRID_MIN_EXP: i32 = -10;
pub const GRID_MAX_EXP: i32 = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantSweepResult {
    pub best_constant: f64,
    pub best_score: f64,
    /// `(constant, mean score)` in increasing order of the constant.
    pub grid: Vec<(f64, f64)>,
}

impl ConstantSweepResult {
    /// Two columns, constant and mean score, plus a trailing `best` line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("constant\tmean_score\n");
        for (c, s) in &self.grid {
            out.push_str(&format!("{c:e}\t{s:.6}\n"));
        }
        out.push_str(&format!("best\t{:e}\t{:.6}\n", self.best_constant, self.best_score));
        out
    }
}

/// Log-spaced constants `10^(-10 + i / ppd)` for `i = 0..=20 * ppd`.
pub fn log_grid(points_per_decade: u32) -> Vec<f64> {
    let ppd = points_per_decade.max(1);
    let n = (GRID_MAX_EXP - GRID_MIN_EXP) as u32 * ppd;
    (0..=n)
        .map(|i| 10f64.powf(f64::from(GRID_MIN_EXP) + f64::from(i) / f64::from(ppd)))
        .collect()
}

/// Mean score of predicting `c` for every gold. Per-question scores are
/// summed in sorted order so the mean does not depend on input order.
pub fn mean_constant_score(c: f64, golds: &[f64]) -> Result<f64, MetricError> {
    if golds.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut scores = golds
        .iter()
        .map(|&g| fp_score_magnitudes(c, g))
        .collect::<Result<Vec<f64>, _>>()?;
    scores.sort_by(f64::total_cmp);
    Ok(scores.iter().sum::<f64>() / golds.len() as f64)
}

/// Sweeps constant predictions over the log grid and returns the best one;
/// ties go to the smaller constant.
pub fn constant_sweep(
    golds: &[f64],
    points_per_decade: u32,
    exec: Execution,
) -> Result<ConstantSweepResult, MetricError> {
    if golds.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if let Some(&g) = golds.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(MetricError::InvalidGold(g));
    }
    let grid = log_grid(points_per_decade);
    let grid: Vec<(f64, f64)> = par::map(exec, &grid, |&c| {
        (c, mean_constant_score(c, golds).expect("golds checked"))
    });
    let (best_constant, best_score) = grid
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, (c, s)| if s > best.1 { (c, s) } else { best });
    Ok(ConstantSweepResult {
        best_constant,
        best_score,
        grid,
    })
}
