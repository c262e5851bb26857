//! Analysis configuration: a TOML key-value file.
//!
//! ```toml
//! # chart interval and kind ("top_radial" | "bures" | "log_ls")
//! alpha_min = 0.25
//! alpha_max = 2.5
//! chart = "top_radial"
//! ls_window_lo = 1          # log_ls only; default window is 1..=ceil(d/2)
//! ls_window_hi = 8
//! ls_normalized_intercept = false
//!
//! eps = [0.3, 0.1, 0.03]    # truncation-rank thresholds
//! normalize = true          # rescale layers to ||W||_F^2 = d on load
//! reg_epsilon = 0.0         # Gram regularization for rank-deficient layers
//!
//! budget_amplitude = 8.0    # optional uniform-budget hypotheses
//! budget_zero_slack = true
//! budget_residual_rate = 0.0
//!
//! seed = 42
//! synth_d = 16              # synthesis parameters (synth subcommand)
//! synth_depth = 8
//! synth_alphas = [0.5, 0.75, 1.0]   # overrides the ramp below
//! synth_alpha_lo = 0.5
//! synth_alpha_hi = 1.0
//! synth_delta_pl = 0.0
//!
//! [tolerances]              # optional overrides, defaults otherwise
//! pass_rel = 1e-8
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::chain::BudgetHypotheses;
use crate::charts::{ChartKind, RankWindow};
use crate::error::{Error, Result};
use crate::orbit::{ExponentInterval, Width};
use crate::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ChartName {
    TopRadial,
    Bures,
    LogLs,
}

/// Synthesis parameters.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub d: usize,
    pub alphas: Vec<f64>,
    pub delta_pl: f64,
}

/// Validated analysis configuration.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub interval: ExponentInterval,
    chart_name: ChartName,
    ls_window: Option<(usize, usize)>,
    ls_normalized_intercept: bool,
    pub eps: Vec<f64>,
    pub normalize: bool,
    pub reg_epsilon: f64,
    pub budget: Option<BudgetHypotheses>,
    pub seed: u64,
    pub synth: SynthSpec,
    pub tol: Tolerances,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    alpha_min: Option<f64>,
    alpha_max: Option<f64>,
    chart: Option<String>,
    ls_window_lo: Option<usize>,
    ls_window_hi: Option<usize>,
    ls_normalized_intercept: Option<bool>,
    eps: Option<Vec<f64>>,
    normalize: Option<bool>,
    reg_epsilon: Option<f64>,
    budget_amplitude: Option<f64>,
    budget_zero_slack: Option<bool>,
    budget_residual_rate: Option<f64>,
    seed: Option<u64>,
    synth_d: Option<usize>,
    synth_depth: Option<usize>,
    synth_alphas: Option<Vec<f64>>,
    synth_alpha_lo: Option<f64>,
    synth_alpha_hi: Option<f64>,
    synth_delta_pl: Option<f64>,
    tolerances: Option<RawTolerances>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    bisection_residual: Option<f64>,
    bisection_max_iter: Option<usize>,
    grid_points: Option<usize>,
    alpha_tol: Option<f64>,
    eig_nonneg: Option<f64>,
    pass_abs: Option<f64>,
    pass_rel: Option<f64>,
    full_rank: Option<f64>,
    frobenius_rel: Option<f64>,
    svd_cutoff: Option<usize>,
    kink_factor: Option<f64>,
}

impl RawTolerances {
    fn fold(self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(v) = self.bisection_residual {
            t.bisection_residual = v;
        }
        if let Some(v) = self.bisection_max_iter {
            t.bisection_max_iter = v;
        }
        if let Some(v) = self.grid_points {
            t.grid_points = v;
        }
        if let Some(v) = self.alpha_tol {
            t.alpha_tol = v;
        }
        if let Some(v) = self.eig_nonneg {
            t.eig_nonneg = v;
        }
        if let Some(v) = self.pass_abs {
            t.pass_abs = v;
        }
        if let Some(v) = self.pass_rel {
            t.pass_rel = v;
        }
        if let Some(v) = self.full_rank {
            t.full_rank = v;
        }
        if let Some(v) = self.frobenius_rel {
            t.frobenius_rel = v;
        }
        if let Some(v) = self.svd_cutoff {
            t.svd_cutoff = v;
        }
        if let Some(v) = self.kink_factor {
            t.kink_factor = v;
        }
        t
    }
}

impl AnalysisConfig {
    /// Built-in defaults (used when no config file is supplied).
    pub fn default_config() -> Self {
        RawConfig::default().build().expect("defaults are valid")
    }

    /// Parse and validate a TOML config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.build()
    }

    /// Materialize the chart for a concrete width (the default LS window
    /// depends on d).
    pub fn chart_for(&self, d: Width) -> Result<ChartKind> {
        Ok(match self.chart_name {
            ChartName::TopRadial => ChartKind::TopRadial,
            ChartName::Bures => ChartKind::BuresProjection,
            ChartName::LogLs => {
                let window = match self.ls_window {
                    Some((lo, hi)) => {
                        let window = RankWindow::contiguous(lo, hi)?;
                        window.validate_for(d)?;
                        window
                    }
                    None => RankWindow::default_for(d),
                };
                ChartKind::LogLeastSquares {
                    window,
                    normalized_intercept: self.ls_normalized_intercept,
                }
            }
        })
    }

    pub fn chart_label(&self) -> &'static str {
        match self.chart_name {
            ChartName::TopRadial => "top_radial",
            ChartName::Bures => "bures",
            ChartName::LogLs => "log_ls",
        }
    }
}

impl RawConfig {
    fn build(self) -> Result<AnalysisConfig> {
        let interval = ExponentInterval::new(
            self.alpha_min.unwrap_or(0.1),
            self.alpha_max.unwrap_or(3.0),
        )?;
        let chart_name = match self.chart.as_deref().unwrap_or("top_radial") {
            "top_radial" => ChartName::TopRadial,
            "bures" => ChartName::Bures,
            "log_ls" => ChartName::LogLs,
            other => {
                return Err(Error::Config(format!(
                    "unknown chart {other:?}; expected top_radial, bures, or log_ls"
                )))
            }
        };
        let ls_window = match (self.ls_window_lo, self.ls_window_hi) {
            (None, None) => None,
            (lo, hi) => {
                let lo = lo.unwrap_or(1);
                let hi = hi.ok_or_else(|| {
                    Error::Config("ls_window_hi required when ls_window_lo is set".into())
                })?;
                Some((lo, hi))
            }
        };
        let eps = self.eps.unwrap_or_else(|| vec![0.3, 0.1, 0.03]);
        for &e in &eps {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidEpsilon(e));
            }
        }
        let budget = self.budget_amplitude.map(|amplitude| BudgetHypotheses {
            amplitude,
            zero_slack: self.budget_zero_slack.unwrap_or(false),
            residual_rate: self.budget_residual_rate,
        });
        if let Some(b) = &budget {
            if b.amplitude < 1.0 {
                return Err(Error::Config(format!(
                    "budget_amplitude must be >= 1, got {}",
                    b.amplitude
                )));
            }
        }
        let reg_epsilon = self.reg_epsilon.unwrap_or(0.0);
        if reg_epsilon < 0.0 {
            return Err(Error::Config("reg_epsilon must be nonnegative".into()));
        }

        let depth = self.synth_depth.unwrap_or(8);
        let alphas = match self.synth_alphas {
            Some(list) if !list.is_empty() => list,
            _ => {
                let lo = self.synth_alpha_lo.unwrap_or(0.5);
                let hi = self.synth_alpha_hi.unwrap_or(1.0);
                if depth < 2 {
                    return Err(Error::Config("synth_depth must be at least 2".into()));
                }
                (0..depth)
                    .map(|k| lo + (hi - lo) * k as f64 / (depth - 1) as f64)
                    .collect()
            }
        };
        let delta_pl = self.synth_delta_pl.unwrap_or(0.0);
        if !(0.0..1.0).contains(&delta_pl) {
            return Err(Error::Config("synth_delta_pl must lie in [0, 1)".into()));
        }
        let synth = SynthSpec {
            d: self.synth_d.unwrap_or(16),
            alphas,
            delta_pl,
        };

        Ok(AnalysisConfig {
            interval,
            chart_name,
            ls_window,
            ls_normalized_intercept: self.ls_normalized_intercept.unwrap_or(false),
            eps,
            normalize: self.normalize.unwrap_or(true),
            reg_epsilon,
            budget,
            seed: self.seed.unwrap_or(42),
            synth,
            tol: self.tolerances.map(RawTolerances::fold).unwrap_or_default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_sane() {
        let cfg = AnalysisConfig::default_config();
        assert_eq!(cfg.chart_label(), "top_radial");
        assert_eq!(cfg.eps.len(), 3);
        assert!(cfg.normalize);
        assert_eq!(cfg.synth.alphas.len(), 8);
    }

    #[test]
    fn full_config_parses_and_validates() {
        let cfg = AnalysisConfig::from_toml(
            r#"
alpha_min = 0.2
alpha_max = 1.5
chart = "log_ls"
ls_window_lo = 1
ls_window_hi = 4
eps = [0.2]
budget_amplitude = 4.0
budget_zero_slack = true
seed = 7
synth_d = 10
synth_alphas = [0.4, 0.6]
[tolerances]
pass_rel = 1e-7
"#,
        )
        .unwrap();
        assert_eq!(cfg.interval.lo(), 0.2);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.tol.pass_rel, 1e-7);
        assert_eq!(cfg.tol.pass_abs, 1e-10, "unset knobs keep defaults");
        let chart = cfg.chart_for(Width::new(10).unwrap()).unwrap();
        assert_eq!(chart.name(), "log_ls");
        assert!(cfg.budget.unwrap().zero_slack);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(AnalysisConfig::from_toml("alpha_min = -1.0").is_err());
        assert!(AnalysisConfig::from_toml("chart = \"fancy\"").is_err());
        assert!(AnalysisConfig::from_toml("eps = [1.5]").is_err());
        assert!(AnalysisConfig::from_toml("budget_amplitude = 0.5").is_err());
        assert!(AnalysisConfig::from_toml("unknown_key = 1").is_err());
        // LS window too large for the width is caught at materialization
        let cfg = AnalysisConfig::from_toml(
            "chart = \"log_ls\"\nls_window_lo = 1\nls_window_hi = 40\n",
        )
        .unwrap();
        assert!(cfg.chart_for(Width::new(8).unwrap()).is_err());
    }
}
