use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, GaussianMethod, Source, Sweep};
use super::output::{self, audit, render, sidecar_path, AuditViolation, Row, Sidecar};
use crate::discrete::{histogram_stats, rd_curve_discrete, DiscreteSolverConfig};
use crate::error::{Error, Result};
use crate::gaussian::{batch_bottleneck_matrix, iterative_gib, rd_curve_gaussian, IterativeConfig};
use crate::hull::convex_hull_lower_indices;
use crate::model::{entropy_triple, rd_bounds, DiscreteFamily, GaussianModel, SourceEntropies};
use crate::optim::MultiStartConfig;
use crate::scaling::gap_series;
use crate::streaming::{
    comprehensive_k2_scalar, run_online, run_twopass, BetaPolicy, ComprehensiveConfig, StreamState,
};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;

#[derive(Debug)]
pub struct RunReport {
    pub rows: Vec<Row>,
    pub data_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub non_converged: usize,
    pub violations: Vec<AuditViolation>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.non_converged > 0 || !self.violations.is_empty() {
            EXIT_FLAGGED
        } else {
            EXIT_OK
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model_label: String,
}

impl Ctx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(&self, k: usize, param_kind: &'static str, param: f64, series: &str, rate: f64, distortion: f64, bracket: (f64, f64), n_active: usize, converged: bool) -> Row {
        Row {
            experiment: self.cfg.experiment.name().to_string(),
            model: self.model_label.clone(),
            seed: self.cfg.seed,
            k,
            param_kind,
            param,
            series: series.to_string(),
            rate,
            distortion,
            h_x_given_data: bracket.0,
            h_x: bracket.1,
            n_active,
            converged,
        }
    }
}

/// Validate the config and compute every output row in grid order.
pub fn compute_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let source = cfg.validate()?;
    let ctx = Ctx { cfg, model_label: cfg.model.label() };
    match (cfg.experiment, &source) {
        (ExperimentKind::BatchDiscrete, Source::Discrete(f)) => batch_discrete(&ctx, f),
        (ExperimentKind::BatchGaussian, Source::Gaussian(m)) => batch_gaussian(&ctx, m),
        (ExperimentKind::StreamOnline, Source::Gaussian(m)) => stream(&ctx, m, false),
        (ExperimentKind::StreamTwopass, Source::Gaussian(m)) => stream(&ctx, m, true),
        (ExperimentKind::StreamComprehensive, Source::Gaussian(m)) => comprehensive(&ctx, m),
        (ExperimentKind::Scaling, Source::Gaussian(m)) => scaling(&ctx, m),
        (ExperimentKind::Bounds, _) => bounds(&ctx, &source),
        _ => Err(Error::Config("model kind does not match the experiment".into())),
    }
}

fn betas(cfg: &ExperimentConfig) -> Vec<f64> {
    match cfg.sweep() {
        Sweep::Betas(b) => b,
        _ => unreachable!("validated: beta grid present"),
    }
}

fn discrete_config(cfg: &ExperimentConfig, k: usize) -> DiscreteSolverConfig {
    DiscreteSolverConfig::new(cfg.t_size.unwrap_or(k + 1), cfg.seed.unwrap_or(0))
}

fn sorted_betas(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut b = betas(cfg);
    b.sort_by(f64::total_cmp);
    b
}

fn batch_discrete(ctx: &Ctx, family: &DiscreteFamily) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let betas = sorted_betas(cfg);
    let mut rows = Vec::new();
    for &k in cfg.k_values.as_deref().unwrap_or_default() {
        let stats = histogram_stats(family, k as u32)?;
        let bracket = (stats.entropy_x_given_data(), stats.entropy_x());
        let curve = rd_curve_discrete(&stats, &betas, &discrete_config(cfg, k), cfg.restarts.unwrap_or(1), false)?;
        for c in &curve {
            rows.push(ctx.row(k, "beta", c.point.beta, "ib", c.point.rate, c.point.distortion, bracket, c.point.n_active, c.converged));
        }
        if cfg.hull {
            let pairs: Vec<(f64, f64)> = curve.iter().map(|c| (c.point.rate, c.point.distortion)).collect();
            for i in convex_hull_lower_indices(&pairs) {
                let c = &curve[i];
                rows.push(ctx.row(k, "beta", c.point.beta, "ib-hull", c.point.rate, c.point.distortion, bracket, c.point.n_active, c.converged));
            }
        }
    }
    Ok(rows)
}

fn batch_gaussian(ctx: &Ctx, model: &GaussianModel) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let method = cfg.method.unwrap_or_default();
    let mut rows = Vec::new();
    for &k in cfg.k_values.as_deref().unwrap_or_default() {
        let triple = entropy_triple(model, k)?;
        let bracket = (triple.h_x_given_data, triple.h_x);
        let spectrum = batch_bottleneck_matrix(model, k)?.spectrum;
        // (param_kind, param, beta, reachable)
        let targets: Vec<(&'static str, f64, f64, bool)> = match cfg.sweep() {
            Sweep::Betas(b) => {
                let mut b = b;
                b.sort_by(f64::total_cmp);
                b.into_iter().map(|beta| ("beta", beta, beta, true)).collect()
            }
            Sweep::RateBudgets(r) => r
                .into_iter()
                .map(|nats| {
                    let (beta, ok) = spectrum.beta_for_rate(nats, 1e-10);
                    ("rate_budget", nats / cfg.units.scale(), beta, ok)
                })
                .collect(),
            Sweep::Schedules(_) => unreachable!("validated"),
        };
        let points: Vec<(crate::model::RDPoint, bool)> = match method {
            GaussianMethod::ClosedForm => {
                let grid: Vec<f64> = targets.iter().map(|t| t.2).collect();
                rd_curve_gaussian(model, k, &grid)?.into_iter().map(|p| (p, true)).collect()
            }
            GaussianMethod::Iterative => {
                let it = IterativeConfig::new(cfg.seed.unwrap_or(0));
                targets
                    .par_iter()
                    .map(|t| iterative_gib(model, k, t.2, &it).map(|o| (o.point, o.converged)))
                    .collect::<Result<_>>()?
            }
        };
        let rows_k: Vec<Row> = targets
            .iter()
            .zip(&points)
            .map(|(t, (p, conv))| ctx.row(k, t.0, t.1, "gib", p.rate, p.distortion, bracket, p.n_active, *conv && t.3))
            .collect();
        if cfg.hull {
            let pairs: Vec<(f64, f64)> = rows_k.iter().map(|r| (r.rate, r.distortion)).collect();
            let hull: Vec<Row> = convex_hull_lower_indices(&pairs)
                .into_iter()
                .map(|i| Row { series: "gib-hull".into(), ..rows_k[i].clone() })
                .collect();
            rows.extend(rows_k);
            rows.extend(hull);
        } else {
            rows.extend(rows_k);
        }
    }
    Ok(rows)
}

fn stream_policies(cfg: &ExperimentConfig) -> Vec<(&'static str, f64, BetaPolicy)> {
    match cfg.sweep() {
        Sweep::Betas(b) => b.into_iter().map(|beta| ("beta", beta, BetaPolicy::Fixed(beta))).collect(),
        Sweep::RateBudgets(r) => r
            .into_iter()
            .map(|nats| ("rate_budget", nats / cfg.units.scale(), BetaPolicy::RateBudget(vec![nats])))
            .collect(),
        Sweep::Schedules(_) => unreachable!("validated"),
    }
}

fn stream_rows(ctx: &Ctx, series: &str, kind: &'static str, param: f64, state: &StreamState, brackets: &[(f64, f64)]) -> Vec<Row> {
    let rounds = state.round;
    let mut rows = Vec::with_capacity(rounds + 2);
    for l in 0..rounds {
        rows.push(ctx.row(
            l + 1,
            kind,
            param,
            series,
            state.rates[l],
            state.distortions[l],
            brackets[l],
            state.blocks[l].nrows(),
            !state.unreachable[l],
        ));
    }
    let all_ok = state.unreachable.iter().all(|u| !u);
    let total_rate: f64 = state.rates.iter().sum();
    let total_dist: f64 = state.distortions.iter().sum();
    let summed = brackets[..rounds].iter().fold((0.0, 0.0), |acc, b| (acc.0 + b.0, acc.1 + b.1));
    let active: usize = state.blocks.iter().map(|b| b.nrows()).sum();
    rows.push(ctx.row(rounds, kind, param, &format!("{series}-total"), total_rate, total_dist, summed, active, all_ok));
    rows.push(ctx.row(
        rounds,
        kind,
        param,
        &format!("{series}-final"),
        total_rate,
        state.distortions[rounds - 1],
        brackets[rounds - 1],
        active,
        all_ok,
    ));
    rows
}

fn round_brackets(model: &GaussianModel, rounds: usize) -> Result<Vec<(f64, f64)>> {
    (1..=rounds)
        .map(|l| entropy_triple(model, l).map(|t| (t.h_x_given_data, t.h_x)))
        .collect()
}

fn stream(ctx: &Ctx, model: &GaussianModel, twopass: bool) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let rounds = cfg.rounds.expect("validated");
    let brackets = round_brackets(model, rounds)?;
    let passes = cfg.passes.unwrap_or(1);
    let per_point: Vec<Vec<Row>> = stream_policies(cfg)
        .par_iter()
        .map(|(kind, param, policy)| -> Result<Vec<Row>> {
            let online = run_online(model, rounds, policy)?;
            let mut rows = stream_rows(ctx, "online", kind, *param, &online, &brackets);
            if twopass {
                let tp = run_twopass(model, rounds, policy, passes)?;
                rows.extend(stream_rows(ctx, "twopass", kind, *param, &tp, &brackets));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn comprehensive(ctx: &Ctx, model: &GaussianModel) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let weights = betas(cfg);
    let brackets = round_brackets(model, 2)?;
    let summed = (brackets[0].0 + brackets[1].0, brackets[0].1 + brackets[1].1);
    let search = MultiStartConfig { seed: cfg.seed.expect("validated"), ..MultiStartConfig::default() };
    let result = comprehensive_k2_scalar(model, &ComprehensiveConfig { weights: weights.clone(), search })?;

    let mut rows = Vec::new();
    for p in &result.points {
        let active = usize::from(p.params[0] != 0.0) + usize::from(p.params[1] != 0.0 || p.params[2] != 0.0);
        rows.push(ctx.row(2, "weight", p.weight, "comprehensive-total", p.total_rate, p.total_distortion, summed, active, p.converged));
    }
    for &(rate, dist) in &result.hull {
        let p = result
            .points
            .iter()
            .find(|p| p.total_rate == rate && p.total_distortion == dist)
            .expect("hull points come from the solved points");
        let active = usize::from(p.params[0] != 0.0) + usize::from(p.params[1] != 0.0 || p.params[2] != 0.0);
        rows.push(ctx.row(2, "weight", p.weight, "comprehensive-hull", rate, dist, summed, active, p.converged));
    }
    let others: Vec<Vec<Row>> = weights
        .par_iter()
        .map(|&w| -> Result<Vec<Row>> {
            let policy = BetaPolicy::Fixed(w);
            let online = run_online(model, 2, &policy)?;
            let mut out: Vec<Row> = stream_rows(ctx, "online", "weight", w, &online, &brackets)
                .into_iter()
                .filter(|r| r.series.ends_with("-total"))
                .collect();
            if let Some(passes) = cfg.passes {
                let tp = run_twopass(model, 2, &policy, passes)?;
                out.extend(stream_rows(ctx, "twopass", "weight", w, &tp, &brackets).into_iter().filter(|r| r.series.ends_with("-total")));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    rows.extend(others.into_iter().flatten());
    Ok(rows)
}

fn scaling(ctx: &Ctx, model: &GaussianModel) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let k_max = cfg.k_max.expect("validated");
    let configured = cfg.schedules.clone().unwrap_or_default();
    let Sweep::Schedules(in_nats) = cfg.sweep() else { unreachable!("validated") };
    let spectra = (1..=k_max)
        .into_par_iter()
        .map(|k| batch_bottleneck_matrix(model, k).map(|b| b.spectrum))
        .collect::<Result<Vec<_>>>()?;
    let h_x = entropy_triple(model, 1)?.h_x;
    let mut rows = Vec::new();
    for (shown, schedule) in configured.iter().zip(&in_nats) {
        let label = shown.label();
        for rec in gap_series(model, schedule, k_max)? {
            let n_active = spectra[rec.k - 1].n_active(rec.beta);
            rows.push(ctx.row(
                rec.k,
                "schedule",
                shown.coefficient,
                &label,
                rec.rate,
                rec.h_x_given_t,
                (rec.h_x_given_data, h_x),
                n_active,
                rec.reachable,
            ));
        }
    }
    Ok(rows)
}

fn bounds(ctx: &Ctx, source: &Source) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let betas = sorted_betas(cfg);
    let mut rows = Vec::new();
    for &k in cfg.k_values.as_deref().unwrap_or_default() {
        let (curve, bracket, entropies): (Vec<(f64, f64, f64, usize, bool)>, (f64, f64), SourceEntropies) = match source {
            Source::Discrete(f) => {
                let stats = histogram_stats(f, k as u32)?;
                let curve = rd_curve_discrete(&stats, &betas, &discrete_config(cfg, k), cfg.restarts.unwrap_or(1), true)?;
                (
                    curve.iter().map(|c| (c.point.beta, c.point.rate, c.point.distortion, c.point.n_active, c.converged)).collect(),
                    (stats.entropy_x_given_data(), stats.entropy_x()),
                    SourceEntropies { h_x: stats.entropy_x(), discrete: Some((f.entropy_theta(), f.alphabet_size())) },
                )
            }
            Source::Gaussian(m) => {
                let t = entropy_triple(m, k)?;
                let curve = rd_curve_gaussian(m, k, &betas)?;
                (
                    curve.iter().map(|p| (p.beta, p.rate, p.distortion, p.n_active, true)).collect(),
                    (t.h_x_given_data, t.h_x),
                    SourceEntropies { h_x: t.h_x, discrete: None },
                )
            }
        };
        for &(beta, rate, dist, n_active, conv) in &curve {
            rows.push(ctx.row(k, "beta", beta, "curve", rate, dist, bracket, n_active, conv));
        }
        for &(beta, _, dist, _, _) in &curve {
            let b = rd_bounds(&entropies, dist);
            rows.push(ctx.row(k, "beta", beta, "lower", b.lower.max(0.0), dist, bracket, 0, true));
            if let Some(upper) = b.upper {
                rows.push(ctx.row(k, "beta", beta, "upper", upper, dist, bracket, 0, true));
            }
        }
    }
    Ok(rows)
}

/// Resolve the output path against the config's directory.
pub fn resolve_output(cfg: &ExperimentConfig, config_dir: Option<&Path>) -> PathBuf {
    let p = &cfg.output.path;
    match config_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.clone(),
    }
}

/// Compute, write the data file and its metadata sidecar, and audit the rows.
pub fn run_experiment(cfg: &ExperimentConfig, config_text: Option<&str>, data_path: &Path) -> Result<RunReport> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let rows = compute_rows(cfg)?;
    if let Some(dir) = data_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(data_path, render(&rows, cfg.output.format, cfg.units)?)?;
    let violations = audit(&rows);
    for v in &violations {
        log::warn!("row {} ({}, k={}): distortion {} outside [{}, {}]", v.row, v.series, v.k, v.distortion, v.lower, v.upper);
    }
    let non_converged = rows.iter().filter(|r| !r.converged).count();
    let sidecar = sidecar_path(data_path);
    let meta = Sidecar {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        config_text,
        data_file: data_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        format: cfg.output.format,
        units: cfg.units,
        columns: output::column_docs(),
        rows: rows.len(),
        non_converged,
        audit_violations: &violations,
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(&sidecar, text + "\n")?;
    Ok(RunReport { rows, data_path: data_path.to_path_buf(), sidecar_path: sidecar, non_converged, violations })
}
