//! Subcommand implementations behind the `specrig` binary.
//!
//! Exit contract: commands return `Ok(true)` when every theorem check
//! passed, `Ok(false)` on an inequality violation (a defect), and `Err` on
//! input or configuration problems. The binary maps these to exit codes
//! 0 / 1 / 2.

use std::fs;
use std::path::{Path, PathBuf};

use crate::chain::{rigidity_report, LayerChain};
use crate::charts::{ChartKind, RankWindow};
use crate::error::{Error, Result};
use crate::io::config::AnalysisConfig;
use crate::io::container;
use crate::io::report::{rank_analysis, AnalysisReport};
use crate::nearid::{
    expansion_check, explicit_margin_check, synth_perturbed_chain, GeneratorChain,
};
use crate::orbit::{self, ExponentInterval, Width};
use crate::ranktail::{
    rank_sandwich, tail_profile, tail_residual, transition_localization, window_stability,
};
use crate::Tolerances;

fn load_config(path: Option<&Path>) -> Result<AnalysisConfig> {
    match path {
        Some(p) => AnalysisConfig::from_path(p),
        None => Ok(AnalysisConfig::default_config()),
    }
}

fn resolve_inputs(manifest: Option<&Path>, files: &[PathBuf]) -> Result<Vec<PathBuf>> {
    match manifest {
        Some(m) => {
            if !files.is_empty() {
                return Err(Error::Usage(
                    "give either --manifest or positional files, not both".into(),
                ));
            }
            container::read_manifest(m)
        }
        None if files.is_empty() => Err(Error::Usage(
            "no input: pass matrix files or --manifest".into(),
        )),
        None => Ok(files.to_vec()),
    }
}

/// Build the full analysis report for a chain on disk.
pub fn analyze_chain(config: &AnalysisConfig, paths: &[PathBuf]) -> Result<AnalysisReport> {
    let chain = container::load_chain(paths, config.normalize, config.reg_epsilon, &config.tol)?;
    let chart = config.chart_for(chain.width())?;
    let rigidity = rigidity_report(
        &chain,
        &config.interval,
        &chart,
        config.budget.as_ref(),
        &config.tol,
    )?;
    let rank = rank_analysis(&rigidity, &config.eps, config.budget.as_ref(), &config.tol)?;
    Ok(AnalysisReport::new(rigidity, rank))
}

/// `analyze`: fit charts, evaluate every inequality, emit reports.
pub fn run_analyze(
    config_path: Option<&Path>,
    manifest: Option<&Path>,
    files: &[PathBuf],
    out_dir: Option<&Path>,
) -> Result<bool> {
    let config = load_config(config_path)?;
    let paths = resolve_inputs(manifest, files)?;
    let report = analyze_chain(&config, &paths)?;
    let tsv = report.to_tsv();
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.tsv"), &tsv)?;
            fs::write(dir.join("report.json"), report.to_json())?;
            fs::write(dir.join("alpha_series.tsv"), report.alpha_series())?;
            fs::write(dir.join("margin_series.tsv"), report.margin_series())?;
            println!(
                "analyze: d={} depth={} chart={} all_pass={} -> {}",
                report.rigidity.d,
                report.rigidity.depth,
                report.rigidity.chart.name(),
                report.all_pass,
                dir.display()
            );
        }
        None => print!("{tsv}"),
    }
    Ok(report.all_pass)
}

/// `synth`: generate a seeded synthetic chain and write it with a manifest.
pub fn run_synth(config_path: Option<&Path>, out_dir: &Path) -> Result<()> {
    let config = load_config(config_path)?;
    let spec = &config.synth;
    let (chain, delta_effective) = synth_perturbed_chain(
        spec.d,
        &spec.alphas,
        spec.delta_pl,
        config.seed,
        &config.tol,
    )?;
    fs::create_dir_all(out_dir)?;
    let mut names = Vec::new();
    for (k, layer) in chain.layers().iter().enumerate() {
        let name = format!("layer_{k:03}.cca");
        container::write_matrix(&out_dir.join(&name), layer)?;
        names.push(name);
    }
    container::write_manifest(&out_dir.join("chain.manifest"), &names)?;
    println!(
        "synth: d={} depth={} delta_pl={} (effective {:.3e}) seed={} -> {}",
        spec.d,
        spec.alphas.len(),
        spec.delta_pl,
        delta_effective,
        config.seed,
        out_dir.display()
    );
    Ok(())
}

/// `orbit`: print coordinates and consecutive Bures distances for one width.
pub fn run_orbit(d: usize, alphas: &[f64]) -> Result<()> {
    let width = Width::new(d)?;
    if alphas.is_empty() {
        return Err(Error::Usage("orbit needs at least one alpha".into()));
    }
    for &alpha in alphas {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::NegativeExponent(alpha));
        }
    }
    if width.is_degenerate() {
        println!("# d = 1 is degenerate: the orbit is a single point and g' = 0");
    }
    println!("alpha\tg\tg_prime\tvariance\tfisher\tentropy\tbures_to_prev");
    let mut prev: Option<f64> = None;
    for &alpha in alphas {
        let stats = orbit::gibbs_stats(width, alpha);
        let bures = prev
            .map(|p| orbit::bures_orbit(width, p, alpha))
            .map(|v| v.to_string())
            .unwrap_or_else(|| "NA".into());
        println!(
            "{alpha}\t{}\t{}\t{}\t{}\t{}\t{bures}",
            orbit::g(width, alpha),
            orbit::g_prime(width, alpha),
            stats.var_log_rank,
            stats.fisher_info,
            orbit::entropy(width, alpha),
        );
        prev = Some(alpha);
    }
    Ok(())
}

/// `rank`: energy measures, truncation ranks, tail residuals, sandwich
/// bounds, and rank transitions for a chain.
pub fn run_rank(
    config_path: Option<&Path>,
    manifest: Option<&Path>,
    files: &[PathBuf],
) -> Result<bool> {
    let config = load_config(config_path)?;
    let paths = resolve_inputs(manifest, files)?;
    let report = analyze_chain(&config, &paths)?;
    let rank = &report.rank;
    println!("# rank analysis: d={} depth={}", report.rigidity.d, report.rigidity.depth);
    print!("layer\talpha\tdelta_tau");
    for eps in &rank.eps {
        print!("\tR_{eps}\tsandwich");
    }
    println!();
    for (k, layer) in report.rigidity.layers.iter().enumerate() {
        print!("{k}\t{}\t{}", layer.alpha, rank.tail_residuals[k]);
        for (e, _) in rank.eps.iter().enumerate() {
            let sandwich = match &rank.sandwiches[k][e] {
                Some(s) => format!("[{}, {}]", s.low, s.high),
                None => "NA".into(),
            };
            print!("\t{}\t{sandwich}", rank.actual_ranks[k][e]);
        }
        println!();
    }
    for (k, layer) in report.rigidity.layers.iter().enumerate() {
        let weights: Vec<String> = crate::ranktail::energy_measure(&layer.spectrum)
            .weights()
            .iter()
            .map(|w| w.to_string())
            .collect();
        println!("energy\t{k}\t{}", weights.join("\t"));
    }
    for (e, tr) in rank.transitions.iter().enumerate() {
        println!(
            "transitions eps={}: {:?} local_lower_ok={} plateaus={}",
            rank.eps[e],
            tr.transitions,
            tr.local_lower_ok,
            tr.plateaus.len()
        );
    }
    Ok(rank.all_pass)
}

fn verify_stage(name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "[verify] {name}: {} {detail}",
        if pass { "ok" } else { "FAIL" }
    );
    pass
}

/// `verify`: the randomized theorem-inequality suite over chains, rank
/// tails, and near-identity cocycles. Deterministic for a given seed count.
pub fn run_verify(seeds: u64, config_path: Option<&Path>) -> Result<bool> {
    let config = load_config(config_path)?;
    let tol = &config.tol;
    let mut all = true;

    // randomized rigidity sweep over the (d, depth) grid and all charts
    let grid = [
        (4usize, 3usize),
        (16, 8),
        (64, 32),
        (4, 8),
        (16, 32),
        (64, 3),
        (4, 32),
        (16, 3),
        (64, 8),
    ];
    let iv = ExponentInterval::new(0.05, 3.0).unwrap();
    let mut checked = 0usize;
    let mut violations = 0usize;
    for seed in 0..seeds {
        let (d, depth) = grid[(seed % grid.len() as u64) as usize];
        let chain = random_normalized_chain(seed, d, depth, tol)?;
        let width = chain.width();
        let charts = [
            ChartKind::TopRadial,
            ChartKind::BuresProjection,
            ChartKind::LogLeastSquares {
                window: RankWindow::default_for(width),
                normalized_intercept: false,
            },
        ];
        let chart = &charts[(seed % 3) as usize];
        let report = rigidity_report(&chain, &iv, chart, None, tol)?;
        checked += 1;
        if !report.all_pass {
            violations += 1;
            eprintln!("[verify] violation: seed={seed} d={d} depth={depth} chart={}", chart.name());
        }
    }
    all &= verify_stage(
        "rigidity",
        violations == 0,
        &format!("({checked} chains, 0 expected violations, got {violations})"),
    );

    // rank-tail sweep: monotonicity, Lipschitz, stability, sandwich
    let mut tail_ok = true;
    let d = Width::new(24)?;
    let alphas: Vec<f64> = (1..=30).map(|k| 0.08 * k as f64).collect();
    for r in 0..=24 {
        let mut prev = f64::INFINITY;
        for &a in &alphas {
            let t = tail_profile(d, a).tau[r];
            tail_ok &= t <= prev + 1e-14;
            prev = t;
        }
    }
    for (i, &a) in alphas.iter().enumerate() {
        for &b in &alphas[i..] {
            let ws = window_stability(d, a, b, 0.15)?;
            tail_ok &= ws.lipschitz_ok;
            if ws.stable {
                tail_ok &= ws.rank_alpha == ws.rank_beta;
            }
        }
    }
    for seed in 0..10u64 {
        let (chain, _) =
            synth_perturbed_chain(20, &[0.6, 0.8, 1.0], 0.15, seed, tol)?;
        for (spectrum, &alpha) in chain.spectra()?.iter().zip(&[0.6, 0.8, 1.0]) {
            match rank_sandwich(spectrum, alpha, 0.2) {
                Ok(s) => tail_ok &= s.low <= s.actual && s.actual <= s.high,
                Err(Error::MarginTooSmall { .. }) => {}
                Err(e) => return Err(e),
            }
            tail_ok &= tail_residual(spectrum, alpha) >= 0.0;
        }
    }
    let ramp: Vec<f64> = (0..12).map(|k| 0.4 + 0.12 * k as f64).collect();
    let tr = transition_localization(&ramp, d, 0.15, &iv, Some(1e-3), None, tol)?;
    tail_ok &= tr.local_lower_ok && tr.count_tv_ok.unwrap_or(false);
    all &= verify_stage("rank-tail", tail_ok, "(monotonicity, Lipschitz, stability, sandwich)");

    // near-identity expansions and the coarse margin bound
    let mut nearid_ok = true;
    let ts: Vec<f64> = (0..5).map(|k| 1e-2 / f64::powi(2.0, k)).collect();
    for seed in 0..8u64 {
        let gens = GeneratorChain::random(16, 3, 1.0, seed);
        let report = expansion_check(&gens, &ts, tol)?;
        for fit in &report.fits {
            if let Some(ratio) = fit.final_ratio {
                nearid_ok &= (3.5..=4.5).contains(&ratio);
            }
        }
        let margin = explicit_margin_check(&gens, 0.1, None, None, tol)?;
        nearid_ok &= margin.pass.iter().all(|&p| p);
    }
    let adversarial = GeneratorChain::cancellation_pair(16, 1.0, 1234);
    let margin = explicit_margin_check(&adversarial, 0.25, None, None, tol)?;
    nearid_ok &= margin.pass.iter().all(|&p| p);
    all &= verify_stage("near-identity", nearid_ok, "(order fits, 18Ct margin)");

    // synthetic round trip: charted exponents recover the generator inputs
    let mut synth_ok = true;
    let alphas = [0.5, 0.65, 0.8, 0.95];
    let chain = crate::nearid::synth_powerlaw_chain(16, &alphas, config.seed, tol)?;
    let report = rigidity_report(&chain, &iv, &ChartKind::TopRadial, None, tol)?;
    synth_ok &= report.all_pass;
    for (layer, &alpha) in report.layers.iter().zip(&alphas) {
        synth_ok &= (layer.alpha - alpha).abs() <= 1e-8;
        synth_ok &= layer.r.abs() <= 1e-8 && layer.e_bw <= 1e-8;
    }
    all &= verify_stage("synthesis", synth_ok, "(exponent recovery, zero residuals)");

    Ok(all)
}

/// Seeded Gaussian chain, Frobenius normalized.
fn random_normalized_chain(
    seed: u64,
    d: usize,
    depth: usize,
    tol: &Tolerances,
) -> Result<LayerChain> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let layers = (0..depth)
        .map(|_| {
            nalgebra::DMatrix::from_fn(d, d, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            })
        })
        .collect();
    LayerChain::new(layers, true, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_suite_passes_quickly_on_a_small_seed_count() {
        assert!(run_verify(6, None).unwrap());
    }

    #[test]
    fn synth_analyze_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.toml");
        std::fs::write(
            &cfg_path,
            "seed = 9\nsynth_d = 12\nsynth_alphas = [0.5, 0.7, 0.9]\nalpha_min = 0.2\nalpha_max = 1.5\n",
        )
        .unwrap();
        let out = dir.path().join("chain");
        run_synth(Some(&cfg_path), &out).unwrap();

        let config = AnalysisConfig::from_path(&cfg_path).unwrap();
        let paths = container::read_manifest(&out.join("chain.manifest")).unwrap();
        let report = analyze_chain(&config, &paths).unwrap();
        assert!(report.all_pass);
        for (layer, alpha) in report.rigidity.layers.iter().zip([0.5, 0.7, 0.9]) {
            assert!(
                (layer.alpha - alpha).abs() < 1e-8,
                "recovered {} vs {alpha}",
                layer.alpha
            );
        }
    }

    #[test]
    fn rank_command_reports_passing_checks() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.toml");
        std::fs::write(
            &cfg_path,
            "seed = 4\nsynth_d = 10\nsynth_alphas = [0.6, 0.8]\neps = [0.25]\n",
        )
        .unwrap();
        let out = dir.path().join("chain");
        run_synth(Some(&cfg_path), &out).unwrap();
        let ok = run_rank(
            Some(&cfg_path),
            Some(&out.join("chain.manifest")),
            &[],
        )
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn orbit_command_accepts_degenerate_width() {
        run_orbit(1, &[0.5, 1.0]).unwrap();
        assert!(run_orbit(0, &[0.5]).is_err());
        assert!(run_orbit(4, &[]).is_err());
    }
}
