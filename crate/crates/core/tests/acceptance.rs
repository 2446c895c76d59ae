//! Acceptance checks, one printed PASS/FAIL line per criterion.

use std::process::Command;
use std::time::{Duration, Instant};

use ib_distill::discrete::{
    brute_force_rd_oracle, encoder_change, histogram_stats, ib_update_step, rd_curve_discrete, DiscreteIBState, DiscreteSolverConfig, HistogramStats,
};
use ib_distill::experiment::{figure_names, figure_text};
use ib_distill::gaussian::{
    batch_bottleneck_matrix, closed_form_rd, distortion_at_rate, distortion_from_projection, iterative_gib,
    IterativeConfig,
};
use ib_distill::hull::{hull_value, interpolate};
use ib_distill::linalg::{self, Matrix, Vector};
use ib_distill::model::{entropy_triple, DiscreteFamily, GaussianModel};
use ib_distill::scaling::{gap_series, RateSchedule, ScheduleKind};
use ib_distill::streaming::{
    comprehensive_k2_scalar, conditional_covariances, conditional_on_rounds, monte_carlo_moments, online_round, run_online, run_twopass,
    stream_joint_cov, total_accounting, BetaPolicy, ComprehensiveConfig, StreamState,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn gaussian_sweep() -> Vec<(GaussianModel, usize, Vec<f64>)> {
    (0..20u64)
        .map(|i| {
            let d = [1, 3, 6][i as usize % 3];
            let k = [1, 5, 20][(i as usize / 3) % 3];
            (GaussianModel::random(d, i).unwrap(), k, log_grid(1.5, 300.0, 10))
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut worst_rate: f64 = 0.0;
    let mut worst_dist: f64 = 0.0;
    let mut unconverged = 0;
    for (i, (m, k, betas)) in gaussian_sweep().into_iter().enumerate() {
        for (j, &beta) in betas.iter().enumerate() {
            let (closed, _) = closed_form_rd(&m, k, beta).unwrap();
            let cfg = IterativeConfig { max_iter: 200_000, ..IterativeConfig::new((i * 100 + j) as u64) };
            let it = iterative_gib(&m, k, beta, &cfg).unwrap();
            if !it.converged {
                unconverged += 1;
            }
            worst_rate = worst_rate.max((it.point.rate - closed.rate).abs());
            worst_dist = worst_dist.max((it.point.distortion - closed.distortion).abs());
        }
    }
    outcome(
        worst_rate <= 1e-5 && worst_dist <= 1e-5,
        format!("max |dR| = {worst_rate:.2e}, max |dD| = {worst_dist:.2e} over 200 solves ({unconverged} hit max_iter)"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for (m, k, betas) in gaussian_sweep() {
        for beta in betas {
            let (p, sol) = closed_form_rd(&m, k, beta).unwrap();
            let direct = distortion_from_projection(&m, k, &sol.a_matrix, &sol.sigma_z).unwrap();
            worst = worst.max((direct - p.distortion).abs());
        }
    }
    outcome(worst <= 1e-8, format!("max |D_sum - D_projection| = {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let m = GaussianModel::scalar(1.0, 1.0).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for k in [1usize, 4, 100] {
        let t = entropy_triple(&m, k).unwrap();
        let bc = batch_bottleneck_matrix(&m, k).unwrap().spectrum.critical_betas()[0];
        for beta in [0.5, 1.0, bc * 0.999, bc] {
            let (p, _) = closed_form_rd(&m, k, beta).unwrap();
            ok &= p.distortion == t.h_x;
        }
        let (p, _) = closed_form_rd(&m, k, 1e6).unwrap();
        let gap = (p.distortion - t.h_x_given_data).abs();
        ok &= gap <= 1e-5;
        notes.push(format!("k={k}: |D(1e6)-h(X|X^k)|={gap:.1e}"));
    }
    for (k, lam, bc) in [(1usize, 0.75, 4.0), (4, 0.6, 2.5)] {
        let s = batch_bottleneck_matrix(&m, k).unwrap().spectrum;
        let dl = (s.eigenvalues[0] - lam).abs();
        let db = (s.critical_betas()[0] - bc).abs();
        ok &= dl <= 1e-12 && db <= 1e-12;
        notes.push(format!("k={k}: dlambda={dl:.1e} dbeta_c={db:.1e}"));
    }
    outcome(ok, notes.join("; "))
}

fn bernoulli_fixture(k: u32) -> HistogramStats {
    let fam = DiscreteFamily::bernoulli(&[0.2, 0.8], vec![0.5, 0.5]).unwrap();
    histogram_stats(&fam, k).unwrap()
}

/// `I(X; X^k)` by summing over all `2^k` binary sequences.
fn sequence_information(thetas: &[f64], prior: &[f64], k: u32) -> f64 {
    let mut p_x = [0.0; 2];
    for (t, w) in thetas.iter().zip(prior) {
        p_x[1] += w * t;
        p_x[0] += w * (1.0 - t);
    }
    let h_x = -p_x.iter().map(|p| p * p.ln()).sum::<f64>();
    let mut h_cond = 0.0;
    for seq in 0..(1u32 << k) {
        let ones = seq.count_ones() as i32;
        let zeros = k as i32 - ones;
        let mut joint = [0.0; 2];
        for (t, w) in thetas.iter().zip(prior) {
            let p_seq = w * t.powi(ones) * (1.0 - t).powi(zeros);
            joint[1] += p_seq * t;
            joint[0] += p_seq * (1.0 - t);
        }
        let p_seq: f64 = joint.iter().sum();
        for j in joint {
            if j > 0.0 {
                h_cond -= j * (j / p_seq).ln();
            }
        }
    }
    h_x - h_cond
}

fn criterion_4() -> Outcome {
    let stats = bernoulli_fixture(2);
    let ixx = sequence_information(&[0.2, 0.8], &[0.5, 0.5], 2);
    let mut worst_rise: f64 = f64::NEG_INFINITY;
    let mut worst_fixed: f64 = 0.0;
    let mut worst_dpi: f64 = f64::NEG_INFINITY;
    let mut all_converged = true;
    for (i, beta) in [0.5, 1.5, 3.0, 5.0, 10.0, 50.0, 1000.0].into_iter().enumerate() {
        for seed in 0..5u64 {
            let mut state = DiscreteIBState::random(beta, 3, &stats, seed + 10 * i as u64);
            let mut loss = state.lagrangian(&stats);
            let mut converged = false;
            for _ in 0..10_000 {
                let next = ib_update_step(&state, &stats);
                let next_loss = next.lagrangian(&stats);
                worst_rise = worst_rise.max(next_loss - loss);
                let change = encoder_change(&state, &next);
                state = next;
                loss = next_loss;
                if change < 1e-9 {
                    converged = true;
                    break;
                }
            }
            all_converged &= converged;
            let again = ib_update_step(&state, &stats);
            let dec: f64 = again
                .decoder
                .iter()
                .zip(&state.decoder)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            let marg: f64 = again.marginal.iter().zip(&state.marginal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_fixed = worst_fixed.max(encoder_change(&state, &again)).max(dec).max(marg);
            let (_, ixt) = state.informations(&stats);
            worst_dpi = worst_dpi.max(ixt - ixx);
        }
    }
    outcome(
        worst_rise <= 1e-9 && worst_fixed <= 1e-8 && worst_dpi <= 1e-12 && all_converged,
        format!(
            "largest loss rise {worst_rise:.1e}, fixed-point residual {worst_fixed:.1e}, max I(X;T)-I(X;X^k) {worst_dpi:.1e}, all converged: {all_converged}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let stats = bernoulli_fixture(2);
    let budgets: Vec<f64> = (0..=60).map(|i| i as f64 * 0.7 / 60.0).collect();
    let oracle = brute_force_rd_oracle(&stats, 2, &budgets).unwrap();
    let slack = oracle.windows(2).map(|w| w[0].distortion - w[1].distortion).fold(0.0, f64::max);
    let curve = rd_curve_discrete(&stats, &log_grid(0.5, 200.0, 60), &DiscreteSolverConfig::new(2, 3), 5, false).unwrap();
    let mut worst: f64 = f64::NEG_INFINITY;
    for c in &curve {
        let best_oracle = oracle
            .iter()
            .filter(|o| o.rate <= c.point.rate + 1e-12)
            .map(|o| o.distortion)
            .fold(f64::INFINITY, f64::min);
        if best_oracle.is_finite() {
            worst = worst.max(c.point.distortion - best_oracle);
        }
    }
    outcome(worst <= slack, format!("worst domination {worst:.2e} vs slack {slack:.2e} ({} oracle points)", oracle.len()))
}

fn criterion_6() -> Outcome {
    let fam = DiscreteFamily::bernoulli_uniform(101).unwrap();
    let stats = histogram_stats(&fam, 4).unwrap();
    let betas = log_grid(1.0, 1000.0, 40);
    let curves: Vec<Vec<(f64, f64, f64)>> = [5usize, 8]
        .iter()
        .map(|&t| {
            let cfg = DiscreteSolverConfig::new(t, 0);
            let pts = rd_curve_discrete(&stats, &betas, &cfg, 5, true).unwrap();
            let mut v: Vec<_> = pts.iter().map(|c| (c.point.beta, c.point.rate, c.point.distortion)).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut matched = 0;
    for &(beta, _, d5) in &curves[0] {
        if let Some(&(_, _, d8)) = curves[1].iter().find(|c| c.0 == beta) {
            worst = worst.max((d5 - d8).abs());
            matched += 1;
        }
    }
    outcome(
        worst <= 1e-6 && matched > 0,
        format!(
            "hull sizes {} and {}, {matched} shared betas, max |dD| {worst:.2e}",
            curves[0].len(),
            curves[1].len()
        ),
    )
}

fn curve_monotone_in_k(curves: &[Vec<(f64, f64)>]) -> f64 {
    let mut worst: f64 = f64::NEG_INFINITY;
    for pair in curves.windows(2) {
        let (small, large) = (&pair[0], &pair[1]);
        let hi = small.last().unwrap().0.min(large.last().unwrap().0);
        for i in 0..=400 {
            let r = hi * i as f64 / 400.0;
            if let (Some(a), Some(b)) = (interpolate(small, r), interpolate(large, r)) {
                worst = worst.max(b - a);
            }
        }
    }
    worst
}

fn criterion_7() -> Outcome {
    let fam = DiscreteFamily::bernoulli_uniform(101).unwrap();
    let betas = log_grid(1.0, 2000.0, 120);
    let discrete: Vec<Vec<(f64, f64)>> = [4u32, 10, 20]
        .iter()
        .map(|&k| {
            let stats = histogram_stats(&fam, k).unwrap();
            let cfg = DiscreteSolverConfig::new(k as usize + 1, 0);
            let pts = rd_curve_discrete(&stats, &betas, &cfg, 3, true).unwrap();
            pts.iter().map(|c| (c.point.rate, c.point.distortion)).collect()
        })
        .collect();
    let worst_discrete = curve_monotone_in_k(&discrete);

    let m = GaussianModel::random(6, 0).unwrap();
    let max_rate = [5usize, 20, 100]
        .iter()
        .map(|&k| batch_bottleneck_matrix(&m, k).unwrap().spectrum.max_rate())
        .fold(f64::INFINITY, f64::min)
        .min(15.0);
    let mut worst_gauss: f64 = f64::NEG_INFINITY;
    for i in 0..=300 {
        let r = max_rate * i as f64 / 300.0;
        let d: Vec<f64> = [5usize, 20, 100].iter().map(|&k| distortion_at_rate(&m, k, r, 1e-10).unwrap().1).collect();
        worst_gauss = worst_gauss.max(d[1] - d[0]).max(d[2] - d[1]);
    }
    outcome(
        worst_discrete <= 1e-6 && worst_gauss <= 1e-6,
        format!("largest increase with k: discrete {worst_discrete:.2e}, Gaussian {worst_gauss:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let mut worst_batch: f64 = 0.0;
    for seed in 0..5u64 {
        let m = GaussianModel::random(1 + seed as usize, seed).unwrap();
        for beta in log_grid(1.5, 500.0, 8) {
            let r = online_round(&m, 1, &StreamState::new(&m), beta).unwrap();
            let (p, _) = closed_form_rd(&m, 1, beta).unwrap();
            worst_batch = worst_batch.max((r.rate - p.rate).abs()).max((r.distortion - p.distortion).abs());
        }
    }
    ok &= worst_batch <= 1e-10;
    notes.push(format!("round 1 vs batch {worst_batch:.1e}"));

    let unit = GaussianModel::scalar(1.0, 1.0).unwrap();
    let st = run_online(&unit, 3, &BetaPolicy::Fixed(8.0)).unwrap();
    let decreasing = st.distortions.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    notes.push(format!("scalar distortions strictly decreasing: {decreasing}"));

    let m = GaussianModel::random(2, 1).unwrap();
    let st = run_online(&m, 3, &BetaPolicy::Fixed(20.0)).unwrap();
    let (z, entries) = monte_carlo_check(&m, &st.blocks);
    ok &= z <= 3.0;
    notes.push(format!("Monte-Carlo: {entries} covariance entries, max |z| {z:.2}"));
    outcome(ok, notes.join("; "))
}

/// Largest z-score of every analytic covariance of a run against 10⁶ seeded
/// draws: the joint covariance of `(X, S̄, T)`, and per round the residual
/// covariances that define `Σ_{S̄_k|T^{−k}}`, `Σ_{S̄_k|X,T^{−k}}` and
/// `Σ_{X|T^k}`.
fn monte_carlo_check(m: &GaussianModel, blocks: &[Matrix]) -> (f64, usize) {
    let d = m.dim();
    let kk = blocks.len();
    let joint = stream_joint_cov(m, blocks);
    let raw = monte_carlo_moments(m, blocks, 1_000_000, 20240, |v: &Vector| v.clone()).unwrap();
    let mut worst = raw.max_z_score(&joint);
    let mut entries = joint.nrows() * (joint.nrows() + 1) / 2;

    let offsets: Vec<usize> = blocks
        .iter()
        .scan(d + kk * d, |acc, a| {
            let o = *acc;
            *acc += a.nrows();
            Some(o)
        })
        .collect();
    for k in 1..=kk {
        let covs = conditional_covariances(m, k, blocks).unwrap();
        let hist: Vec<usize> = (0..k - 1).flat_map(|l| offsets[l]..offsets[l] + blocks[l].nrows()).collect();
        let upto: Vec<usize> = (0..k).flat_map(|l| offsets[l]..offsets[l] + blocks[l].nrows()).collect();
        let s_idx: Vec<usize> = (d + (k - 1) * d..d + k * d).collect();
        let x_idx: Vec<usize> = (0..d).collect();
        let with_x: Vec<usize> = x_idx.iter().copied().chain(hist.iter().copied()).collect();

        let residual = |target: &[usize], given: &[usize]| -> (Matrix, Matrix) {
            let var_g = joint.select_rows(given).select_columns(given);
            let cov_tg = joint.select_rows(target).select_columns(given);
            let coef = if given.is_empty() {
                Matrix::zeros(target.len(), 0)
            } else {
                &cov_tg * linalg::spd_inverse(&var_g).unwrap()
            };
            (coef, linalg::schur_complement(&joint.select_rows(target).select_columns(target), &cov_tg, &var_g).unwrap())
        };
        let checks = [
            (s_idx.clone(), hist.clone(), covs.source.clone()),
            (s_idx.clone(), with_x.clone(), covs.source_given_x.clone()),
            (x_idx.clone(), upto.clone(), test_given_features(m, &blocks[..k])),
        ];
        for (target, given, analytic) in checks {
            let (coef, schur) = residual(&target, &given);
            assert!((&schur - &analytic).amax() < 1e-9, "joint and direct conditioning disagree");
            let t2 = target.clone();
            let g2 = given.clone();
            let mc = monte_carlo_moments(m, blocks, 1_000_000, 20240 + k as u64, move |v: &Vector| {
                let tv = Vector::from_iterator(t2.len(), t2.iter().map(|&i| v[i]));
                let gv = Vector::from_iterator(g2.len(), g2.iter().map(|&i| v[i]));
                tv - &coef * gv
            })
            .unwrap();
            worst = worst.max(mc.max_z_score(&analytic));
            entries += target.len() * (target.len() + 1) / 2;
        }
    }
    (worst, entries)
}

/// `Σ_{X|T^k}` from the features of rounds `1..=k`.
fn test_given_features(m: &GaussianModel, blocks: &[Matrix]) -> Matrix {
    let rounds: Vec<(usize, &Matrix)> = blocks.iter().enumerate().map(|(i, a)| (i + 1, a)).collect();
    conditional_on_rounds(m, blocks.len(), &rounds).unwrap().test
}

fn criterion_9() -> Outcome {
    let unit = GaussianModel::scalar(1.0, 1.0).unwrap();
    let comp = comprehensive_k2_scalar(&unit, &ComprehensiveConfig::default()).unwrap();
    let mut worst_comp: f64 = f64::NEG_INFINITY;
    for beta in log_grid(1.01, 1e5, 200) {
        let st = run_online(&unit, 2, &BetaPolicy::Fixed(beta)).unwrap();
        let (r, d) = total_accounting(&st);
        if let Some(h) = hull_value(&comp.hull, r) {
            worst_comp = worst_comp.max(h - d);
        }
    }

    let m = GaussianModel::random(10, 0).unwrap();
    let one = twopass_gap(&m, 1);
    let two = twopass_gap(&m, 2);
    outcome(
        worst_comp <= 1e-4 && one.0 <= 1e-6,
        format!(
            "comprehensive hull minus online: max {worst_comp:.2e} ({} stagnated weights); two-pass N=1 minus online: max {:.2e} (K={}, rate {:.3}); for reference N=2: max {:.2e}",
            comp.stagnated(),
            one.0,
            one.1,
            one.2,
            two.0
        ),
    )
}

/// Largest excess of two-pass final distortion `h(X|T^K)` over online at
/// matched total rate, over `K ∈ {3, 4}`: `(excess, K, rate)`.
fn twopass_gap(m: &GaussianModel, passes: usize) -> (f64, usize, f64) {
    let betas: Vec<f64> = log_grid(1e-3, 1e4, 240).into_iter().map(|b| 1.0 + b).collect();
    let mut worst = (f64::NEG_INFINITY, 0, 0.0);
    for rounds in [3usize, 4] {
        let curve = |two: bool| -> Vec<(f64, f64)> {
            betas
                .iter()
                .map(|&b| {
                    let p = BetaPolicy::Fixed(b);
                    let st = if two { run_twopass(m, rounds, &p, passes).unwrap() } else { run_online(m, rounds, &p).unwrap() };
                    (st.rates.iter().sum::<f64>(), *st.distortions.last().unwrap())
                })
                .collect()
        };
        let online = curve(false);
        let twopass = curve(true);
        let hi = online.last().unwrap().0.min(twopass.last().unwrap().0);
        for i in 0..=2000 {
            let r = hi * i as f64 / 2000.0;
            if let (Some(a), Some(b)) = (interpolate(&online, r), interpolate(&twopass, r)) {
                if b - a > worst.0 {
                    worst = (b - a, rounds, r);
                }
            }
        }
    }
    worst
}

fn criterion_10() -> Outcome {
    let unit = GaussianModel::scalar(1.0, 1.0).unwrap();
    let log = gap_series(&unit, &RateSchedule::new(ScheduleKind::Log, 1.0), 50).unwrap();
    let k0 = (1..=50).find(|&k0| log[k0 - 1..].iter().all(|r| r.gap_t_xk < 1e-2));
    let constant = gap_series(&unit, &RateSchedule::new(ScheduleKind::Constant, 1.0), 50).unwrap();
    let tail = constant.last().unwrap().gap_t_xk;
    let limit = 0.5 * (1.0 + (-2.0f64).exp()).ln();
    let ok = k0.is_some_and(|k| k <= 10) && tail > 1e-2 && limit > 1e-2;
    outcome(
        ok,
        format!("log schedule c=1: k0 = {k0:?}; constant 1 nat: gap(50) = {tail:.4}, limit {limit:.4}"),
    )
}

fn run_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_ib-distill"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut configs: Vec<(String, String)> = figure_names().map(|n| (n.to_string(), figure_text(n).unwrap().to_string())).collect();
    let json = figure_text("rate-dis-recursive").unwrap().replace("rate-dis-recursive.csv\"", "recursive.json\"\nformat = \"json\"");
    configs.push(("recursive-json".into(), json));
    let mut differing = Vec::new();
    let mut codes = Vec::new();
    for (name, text) in &configs {
        let cfg_path = dir.path().join(format!("{name}.toml"));
        std::fs::write(&cfg_path, text).unwrap();
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let out = dir.path().join(format!("{name}-{attempt}.out"));
            codes.push(run_cli(&["run", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]));
            outputs.push(std::fs::read(&out).unwrap_or_default());
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            differing.push(name.clone());
        }
    }
    let bad_exit = codes.iter().any(|c| *c != 0 && *c != 2);
    outcome(
        differing.is_empty() && !bad_exit,
        format!("{} configs run twice, byte-identical outputs; differing: {differing:?}; exit codes {codes:?}", configs.len()),
    )
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 11] = [
        (1, "closed form vs iterative", Duration::from_secs(60), criterion_1),
        (2, "parametric formula vs projection", Duration::MAX, criterion_2),
        (3, "limit attainment", Duration::MAX, criterion_3),
        (4, "discrete IB soundness", Duration::from_secs(10), criterion_4),
        (5, "brute-force envelope", Duration::MAX, criterion_5),
        (6, "cardinality |T|=5 vs |T|=8", Duration::from_secs(120), criterion_6),
        (7, "monotonicity in k", Duration::MAX, criterion_7),
        (8, "streaming reductions and Monte-Carlo", Duration::from_secs(90), criterion_8),
        (9, "solution hierarchy", Duration::from_secs(600), criterion_9),
        (10, "scaling experiment", Duration::MAX, criterion_10),
        (11, "CLI determinism", Duration::MAX, criterion_11),
    ];
    // Optional criterion numbers on the command line restrict the run.
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (n, name, budget, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= budget;
        if !pass {
            failures += 1;
        }
        let limit = if budget == Duration::MAX { String::new() } else { format!(", limit {}s", budget.as_secs()) };
        println!(
            "criterion {n:>2} {}: {name}: {} [{:.1}s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
