//! Report assembly: one flat delimited table and one hierarchical JSON
//! document with identical numeric content, plus per-layer series files.

use serde::Serialize;

use crate::chain::{BudgetHypotheses, RigidityReport};
use crate::error::Result;
use crate::ranktail::{
    energy_measure, interface_window_stability, orbit_rank, rank_sandwich, tail_residual,
    transition_localization, truncation_rank, ChainBudget, InterfaceRankRow, RankSandwich,
    TransitionReport,
};
use crate::orbit::Width;
use crate::Tolerances;

/// Rank-window analysis attached to a rigidity report.
#[derive(Debug, Clone, Serialize)]
pub struct RankAnalysis {
    pub eps: Vec<f64>,
    /// `R_eps(W_k)` per layer, per threshold.
    pub actual_ranks: Vec<Vec<usize>>,
    /// `R_eps(alpha_k)` per layer, per threshold.
    pub fitted_ranks: Vec<Vec<usize>>,
    /// Tail residual of each layer at its fitted exponent.
    pub tail_residuals: Vec<f64>,
    /// Sandwich per layer per threshold; `None` when the tail residual
    /// leaves no margin around the threshold.
    pub sandwiches: Vec<Vec<Option<RankSandwich>>>,
    /// Transition localization of the fitted exponent path, per threshold.
    pub transitions: Vec<TransitionReport>,
    /// Interface rank-window stability rows, per threshold.
    pub interface_stability: Vec<Vec<InterfaceRankRow>>,
    /// Conjunction of the theorem checks in this analysis.
    pub all_pass: bool,
}

/// Run the rank-tail analysis for every configured threshold.
pub fn rank_analysis(
    report: &RigidityReport,
    eps_list: &[f64],
    budget: Option<&BudgetHypotheses>,
    tol: &Tolerances,
) -> Result<RankAnalysis> {
    let d = Width::new(report.d)?;
    let alphas: Vec<f64> = report.layers.iter().map(|l| l.alpha).collect();
    let mut actual_ranks = vec![Vec::new(); report.layers.len()];
    let mut fitted_ranks = vec![Vec::new(); report.layers.len()];
    let mut sandwiches = vec![Vec::new(); report.layers.len()];
    let tail_residuals: Vec<f64> = report
        .layers
        .iter()
        .map(|l| tail_residual(&l.spectrum, l.alpha))
        .collect();
    let mut all_pass = true;
    for (k, layer) in report.layers.iter().enumerate() {
        let mu = energy_measure(&layer.spectrum);
        for &eps in eps_list {
            actual_ranks[k].push(truncation_rank(&mu, eps)?);
            fitted_ranks[k].push(orbit_rank(d, layer.alpha, eps)?);
            let sandwich = match rank_sandwich(&layer.spectrum, layer.alpha, eps) {
                Ok(s) => {
                    all_pass &= s.low <= s.actual && s.actual <= s.high;
                    Some(s)
                }
                Err(crate::Error::MarginTooSmall { .. }) => None,
                Err(e) => return Err(e),
            };
            sandwiches[k].push(sandwich);
        }
    }
    let chain_budget = ChainBudget {
        sum_b: report.interfaces.iter().map(|i| i.margins.b).sum(),
        tv_r: report.tv_r,
        m_d: report.m_d,
    };
    let mut transitions = Vec::new();
    let mut interface_stability = Vec::new();
    for &eps in eps_list {
        let tr = transition_localization(
            &alphas,
            d,
            eps,
            &report.interval,
            None,
            Some(&chain_budget),
            tol,
        )?;
        all_pass &= tr.local_lower_ok;
        transitions.push(tr);
        interface_stability.push(interface_window_stability(report, eps, budget, tol)?);
    }
    Ok(RankAnalysis {
        eps: eps_list.to_vec(),
        actual_ranks,
        fitted_ranks,
        tail_residuals,
        sandwiches,
        transitions,
        interface_stability,
        all_pass,
    })
}

/// Complete analysis document: rigidity plus rank analysis.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub rigidity: RigidityReport,
    pub rank: RankAnalysis,
    pub all_pass: bool,
}

impl AnalysisReport {
    pub fn new(rigidity: RigidityReport, rank: RankAnalysis) -> Self {
        let all_pass = rigidity.all_pass && rank.all_pass;
        Self {
            rigidity,
            rank,
            all_pass,
        }
    }

    /// Hierarchical JSON document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat tab-separated table with one row class per line. Each numeric
    /// column's defining formula is documented in the header.
    pub fn to_tsv(&self) -> String {
        let r = &self.rigidity;
        let mut out = String::new();
        let fb = |b: bool| if b { "pass" } else { "FAIL" };
        out.push_str("# spectral-rigidity analysis\n");
        out.push_str(&format!(
            "# d={} depth={} chart={} interval=[{}, {}]\n",
            r.d,
            r.depth,
            r.chart.name(),
            r.interval.lo(),
            r.interval.hi()
        ));
        out.push_str("# column definitions\n");
        out.push_str("#   alpha       fitted exponent of the chart map on [alpha_min, alpha_max]\n");
        out.push_str("#   r           signed radial residual rho_d(P_k) - g_d(alpha_k), rho_d(P) = log(d lambda_1(P)/tr P)/2\n");
        out.push_str("#   e_log       sup-norm log-Cartan chart error ||c(P_k) - c(G_d(alpha_k))||_inf\n");
        out.push_str("#   e_bw        Bures chart error d_BW(Cart(P_k), G_d(alpha_k))\n");
        out.push_str("#   e_bw_norm   e_bw / sqrt(d), the Hellinger distance of energy measures\n");
        out.push_str("#   delta_tau   sup_r |mu_k({r+1..d}) - tau_alpha(r)| (spectral-tail chart residual)\n");
        out.push_str("#   R_eps       truncation rank min{r : tail energy <= eps} (actual | fitted orbit)\n");
        out.push_str("#   lambda      interface amplitude ||W_{k+1} W_k||_2 / sqrt(||W_{k+1}||_2 ||W_k||_2)\n");
        out.push_str("#   eta_nb      non-backtracking slack [log(max(||W_{k+1}||_2,||W_k||_2)/||W_{k+1}W_k||_2)]_+\n");
        out.push_str("#   b           combined local radial margin log(lambda) + eta_nb\n");
        out.push_str("#   alpha_step  |alpha_{k+1} - alpha_k|\n");
        out.push_str("#   r_step      |r_{k+1} - r_k|\n");
        out.push_str("#   local_bound (2 b_k + r_step) / m_d(I), m_d(I) = min_I g_d'\n");
        out.push_str("#   margin_ratio m_d(I) alpha_step / (2 b_k + r_step); NA when the denominator is below tolerance; <= 1 when defined\n");
        out.push_str("#   conv_lower  ((|g(alpha_{k+1}) - g(alpha_k)| - r_step)/2)_+ <= b_k\n");
        out.push_str(&format!(
            "meta\tm_d\t{}\tv_max\t{}\ti_max\t{}\n",
            r.m_d, r.v_max, r.i_max
        ));

        // layer rows
        out.push_str("layer\tk\talpha\tr\te_log\te_bw\te_bw_norm\tdelta_tau");
        for eps in &self.rank.eps {
            out.push_str(&format!("\tR_{eps}(W)\tR_{eps}(orbit)"));
        }
        out.push('\n');
        for (k, layer) in r.layers.iter().enumerate() {
            out.push_str(&format!(
                "layer\t{k}\t{}\t{}\t{}\t{}\t{}\t{}",
                layer.alpha,
                layer.r,
                layer.e_log,
                layer.e_bw,
                layer.e_bw_normalized,
                self.rank.tail_residuals[k]
            ));
            for e in 0..self.rank.eps.len() {
                out.push_str(&format!(
                    "\t{}\t{}",
                    self.rank.actual_ranks[k][e], self.rank.fitted_ranks[k][e]
                ));
            }
            out.push('\n');
        }

        // interface rows
        out.push_str(
            "interface\tk\tlambda\teta_nb\tb\talpha_step\tr_step\tlocal_bound\tmargin_ratio\tlocal\tconv_lower\tconverse\n",
        );
        for (k, (iface, conv)) in r.interfaces.iter().zip(&r.converse).enumerate() {
            let ratio = match iface.margin_ratio {
                Some(v) => format!("{v}"),
                None => "NA".to_string(),
            };
            out.push_str(&format!(
                "interface\t{k}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                iface.margins.lambda,
                iface.margins.eta_nb,
                iface.margins.b,
                iface.alpha_step,
                iface.residual_step,
                iface.local_bound,
                ratio,
                fb(iface.local_pass),
                conv.lower_bound,
                fb(conv.pass),
            ));
        }

        // global scalars
        for (name, value) in [
            ("tv_alpha", r.tv_alpha),
            ("tv_r", r.tv_r),
            ("tv_bw_chart", r.residual_variations.tv_bw),
            ("tv_log_chart", r.residual_variations.tv_log),
            ("tv_bound", r.tv_bound),
            ("tv_crude_bound", r.tv_crude_bound),
            ("fitted_bw", r.path.fitted_bw),
            ("fitted_rhs", r.path.fitted_rhs),
            ("fitted_rhs_budget", r.path.fitted_rhs_budget),
            ("actual_bw", r.path.actual_bw),
            ("actual_rhs_variation", r.path.actual_rhs_variation),
            ("actual_rhs_endpoint", r.path.actual_rhs_endpoint),
            ("actual_log", r.path.actual_log),
            ("actual_log_rhs", r.path.actual_log_rhs),
            ("kl_action", r.actions.kl_action),
            ("kl_rhs", r.actions.kl_rhs),
            ("bw_action", r.actions.bw_action),
            ("bw_rhs", r.actions.bw_rhs),
        ] {
            out.push_str(&format!("global\t{name}\t{value}\n"));
        }

        // theorem flags
        for (name, pass) in [
            ("radial_pairs", r.radial_pairs_pass),
            ("alpha_pairs", r.alpha_pairs_pass),
            ("tv", r.tv_pass),
            ("tv_crude", r.tv_crude_pass),
            ("fitted_path", r.path.fitted_pass),
            ("fitted_path_budget", r.path.fitted_budget_pass),
            ("actual_path_variation", r.path.actual_variation_pass),
            ("actual_path_endpoint", r.path.actual_endpoint_pass),
            ("actual_log_path", r.path.actual_log_pass),
            ("kl_action", r.actions.kl_pass),
            ("bw_action", r.actions.bw_pass),
            ("rank_analysis", self.rank.all_pass),
            ("all", self.all_pass),
        ] {
            out.push_str(&format!("check\t{name}\t{}\n", fb(pass)));
        }
        if let Some(sm) = &r.small_margin {
            out.push_str(&format!(
                "budget\tamplitude_ok\t{}\tzero_slack_ok\t{}\tresidual_const_ok\t{}\n",
                sm.amplitude_ok, sm.zero_slack_ok, sm.residual_const_ok
            ));
            out.push_str(&format!(
                "budget\tmax_alpha_step\t{}\tuniform_local_bound\t{}\tuniform_local\t{}\n",
                sm.max_alpha_step,
                sm.uniform_local_bound,
                sm.uniform_local_pass.map(fb).unwrap_or("skipped"),
            ));
            out.push_str(&format!(
                "budget\tuniform_tv_bound\t{}\tuniform_tv\t{}\n",
                sm.uniform_tv_bound,
                sm.uniform_tv_pass.map(fb).unwrap_or("skipped"),
            ));
        }
        // transition summaries per threshold
        for (e, tr) in self.rank.transitions.iter().enumerate() {
            out.push_str(&format!(
                "transitions\teps\t{}\tcount\t{}\tlocal_lower\t{}\tplateaus\t{}\n",
                self.rank.eps[e],
                tr.transitions.len(),
                fb(tr.local_lower_ok),
                tr.plateaus.len()
            ));
        }
        out
    }

    /// Two-column series of the fitted exponents, `k alpha_k`.
    pub fn alpha_series(&self) -> String {
        let mut out = String::from("# k\talpha\n");
        for (k, layer) in self.rigidity.layers.iter().enumerate() {
            out.push_str(&format!("{k}\t{}\n", layer.alpha));
        }
        out
    }

    /// Two-column series of the interface margins, `k b_k`.
    pub fn margin_series(&self) -> String {
        let mut out = String::from("# k\tb\n");
        for (k, iface) in self.rigidity.interfaces.iter().enumerate() {
            out.push_str(&format!("{k}\t{}\n", iface.margins.b));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::rigidity_report;
    use crate::charts::ChartKind;
    use crate::nearid::synth_powerlaw_chain;
    use crate::orbit::ExponentInterval;

    #[test]
    fn report_document_is_deterministic_and_flagged_pass() {
        let tol = Tolerances::default();
        let chain = synth_powerlaw_chain(8, &[0.5, 0.7, 0.9], 3, &tol).unwrap();
        let iv = ExponentInterval::new(0.2, 1.4).unwrap();
        let rigidity = rigidity_report(&chain, &iv, &ChartKind::TopRadial, None, &tol).unwrap();
        let rank = rank_analysis(&rigidity, &[0.3, 0.1], None, &tol).unwrap();
        let report = AnalysisReport::new(rigidity, rank);
        assert!(report.all_pass);

        let tsv = report.to_tsv();
        assert!(tsv.contains("check\tall\tpass"));
        assert!(tsv.lines().filter(|l| l.starts_with("layer\t")).count() == 4); // header + 3
        let json = report.to_json();
        assert!(json.contains("\"all_pass\": true"));

        let again = AnalysisReport::new(
            rigidity_report(&chain, &iv, &ChartKind::TopRadial, None, &tol).unwrap(),
            rank_analysis(&report.rigidity, &[0.3, 0.1], None, &tol).unwrap(),
        );
        assert_eq!(tsv, again.to_tsv());
        assert_eq!(json, again.to_json());
    }
}
