use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which total-space bound an algorithm run is held to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BudgetMode {
    /// Õ(m): polylog(N)·m words.
    #[default]
    #[serde(rename = "m", alias = "linear")]
    Linear,
    /// Õ(km): polylog(N)·k·m words.
    #[serde(rename = "km", alias = "k_times")]
    KTimes,
}

/// Model constants. Every field has a default, so a config file may set any
/// subset of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// s must be at least `c_s·⌈log₂ N⌉`.
    pub c_s: usize,
    pub c_sort: usize,
    pub c_idx: usize,
    pub c_ps: usize,
    pub c_copy: usize,
    pub c_nbr: usize,
    /// Machine count multiplier over the bare word requirement.
    pub slack: f64,
    pub space_budget_mode: BudgetMode,
    /// Exponent of ln N in the polylog factor of the space budget.
    pub budget_log_power: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            c_s: 2,
            c_sort: 1,
            c_idx: 1,
            c_ps: 1,
            c_copy: 1,
            c_nbr: 1,
            slack: 4.0,
            space_budget_mode: BudgetMode::Linear,
            budget_log_power: 3.0,
        }
    }
}

pub(crate) fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let consts = [
            ("c_s", self.c_s),
            ("c_sort", self.c_sort),
            ("c_idx", self.c_idx),
            ("c_ps", self.c_ps),
            ("c_copy", self.c_copy),
            ("c_nbr", self.c_nbr),
        ];
        if let Some((name, _)) = consts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Param(format!("{name} must be positive")));
        }
        if !(self.slack >= 1.0) {
            return Err(Error::Param(format!("slack must be at least 1, got {}", self.slack)));
        }
        if !(self.budget_log_power >= 0.0) {
            return Err(Error::Param("budget_log_power must be non-negative".into()));
        }
        Ok(())
    }

    /// Smallest admissible s for N vertices.
    pub fn min_s(&self, vertex_count: usize) -> usize {
        self.c_s * ceil_log2(vertex_count)
    }

    /// max(c_s·⌈log₂ N⌉, 8).
    pub fn default_s(&self, vertex_count: usize) -> usize {
        self.min_s(vertex_count).max(8)
    }

    /// ⌈words·slack/s⌉, at least one machine.
    pub fn machines_for(&self, words: usize, s: usize) -> usize {
        ((words as f64 * self.slack / s as f64).ceil() as usize).max(1)
    }

    /// Total-space budget in words for a graph with `edges` edges.
    pub fn space_budget(&self, vertex_count: usize, edges: usize, k: usize) -> usize {
        let polylog = (vertex_count.max(3) as f64).ln().powf(self.budget_log_power);
        let mult = match self.space_budget_mode {
            BudgetMode::Linear => 1.0,
            BudgetMode::KTimes => k as f64,
        };
        (polylog * mult * edges.max(1) as f64).ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_floor() {
        let c = MpcConfig::default();
        assert_eq!(c.min_s(256), 16);
        assert_eq!(c.default_s(4), 8);
        assert_eq!(c.default_s(4096), 24);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(257), 9);
    }

    #[test]
    fn budget_modes() {
        let mut c = MpcConfig::default();
        let lin = c.space_budget(1000, 500, 4);
        c.space_budget_mode = BudgetMode::KTimes;
        let km = c.space_budget(1000, 500, 4);
        assert!(km >= 4 * lin - 4);
    }
}
