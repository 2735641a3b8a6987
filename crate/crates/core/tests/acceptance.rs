//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use warnsim_core::dissemination::{
    availability, distance_factor, forwarding_game_equilibrium, utility, vod_forward_probability, GameConfig,
    UtilityInputs,
};
use warnsim_core::experiment::{run_experiment, Experiment, ExperimentOptions};
use warnsim_core::message::MessageKind;
use warnsim_core::radio::{abe_estimate, atb_interval, lqf, LinkQualityInputs};
use warnsim_core::routing::{dsw_update, gpsr_greedy_next, route_static, MetricVector, MetricWeights, StaticTopology};
use warnsim_core::scenario::{preset, Protocol, ScenarioConfig};
use warnsim_core::{NodeId, Point};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn run(cfg: &ScenarioConfig) -> Experiment {
    run_experiment(cfg, &ExperimentOptions { seeds: None, jobs: jobs(), strict: false }).expect("experiment runs")
}

/// Mean and CI half-width of `metric` in one group.
fn stat(exp: &Experiment, p: Protocol, density: f64, sweep: Option<f64>, metric: &str) -> (f64, f64) {
    let g = exp.group(p, density, sweep).unwrap_or_else(|| panic!("no group {p:?} {density} {sweep:?}"));
    let m = g.metric(metric).unwrap_or_else(|| panic!("no metric {metric}"));
    (m.mean, m.half_width.unwrap_or(0.0))
}

// Criterion 1: closed forms against hand-written formulas.

fn df_oracle(d_sr: f64, d_rint: f64, r_max: f64) -> f64 {
    if d_rint > r_max {
        d_sr / r_max
    } else {
        1.0 - d_rint / (d_rint + 1.0)
    }
}

fn closed_forms() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |what: &str, got: f64, want: f64| {
        if !close(got, want, 1e-12) {
            failures.push(format!("{what}: got {got}, want {want}"));
        }
    };
    let u = |df: f64, lq: f64| utility(&UtilityInputs::with_defaults(df, lq).unwrap());
    check("utility(1,1)", u(1.0, 1.0), 1.0);
    check("utility(0,0)", u(0.0, 0.0), 1e10);
    check("utility(.5,.5)", u(0.5, 0.5), 1e5);
    let d = |a, b, c| distance_factor(a, b, c).unwrap();
    check("df(150,400,300)", d(150.0, 400.0, 300.0), 0.5);
    check("df(_,0,300)", d(120.0, 0.0, 300.0), 1.0);
    check("df(300,400,300)", d(300.0, 400.0, 300.0), 1.0);
    check("df(_,300,300)", d(120.0, 300.0, 300.0), 1.0 - 300.0 / 301.0);
    let q = |s, c, k| lqf(&LinkQualityInputs::new(s, c, k).unwrap());
    check("lqf(1,1,0)", q(1.0, 1.0, 0.0), 1.0);
    check("lqf(0,0,1)", q(0.0, 0.0, 1.0), 0.0);
    check("lqf(.5,.5,.5)", q(0.5, 0.5, 0.5), 0.5);
    check("abe(.25,6e6)", abe_estimate(0.25, 6e6), 4.5e6);
    check("atb(.5,.1,1)", atb_interval(0.5, 0.1, 1.0), 0.325);
    check("availability(150,300,.5)", availability(150.0, 300.0, 0.5), 0.5);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let a1 = rng.random_range(0.0..=10.0);
        let a2 = 10.0 - a1;
        let (df, lq) = (rng.random::<f64>(), rng.random::<f64>());
        let got = utility(&UtilityInputs::new(df, lq, a1, a2).unwrap());
        check("utility", got, 10f64.powf(10.0 - (a1 * df + a2 * lq)));
        let r_max = rng.random_range(50.0..500.0);
        let d_rint = rng.random_range(0.0..2.0 * r_max);
        let d_sr = rng.random_range(0.0..=r_max);
        check("df", d(d_sr, d_rint, r_max), df_oracle(d_sr, d_rint, r_max));
        let (s, c, k) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        check("lqf", q(s, c, k), (s + c + (1.0 - k)) / 3.0);
        let busy = rng.random::<f64>();
        let bitrate = rng.random_range(1e5..1e8);
        check("abe", abe_estimate(busy, bitrate), (1.0 - busy) * bitrate);
        let i_min = rng.random_range(0.01..1.0);
        let i_max = i_min + rng.random_range(0.0..5.0);
        check("atb", atb_interval(busy, i_min, i_max), i_min + (i_max - i_min) * busy * busy);
        let abe_norm = rng.random::<f64>();
        check("availability", availability(d_sr, r_max, abe_norm), 0.5 * d_sr / r_max + 0.5 * abe_norm);
    }
    let n = failures.len();
    outcome(n == 0, if n == 0 { "all examples and 60000 substitutions within 1e-12".into() } else { failures[0].clone() })
}

// Criterion 2: greedy next hop against exhaustive search, and a void.

fn argmin_oracle(pos: &[Point], cur: usize, range: f64, dest: &Point) -> Option<NodeId> {
    let own = pos[cur].distance(dest);
    let mut best: Option<(usize, f64)> = None;
    for (j, p) in pos.iter().enumerate() {
        if j == cur || p.distance(&pos[cur]) > range {
            continue;
        }
        let d = p.distance(dest);
        if d < own && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best.map(|(j, _)| NodeId(j as u32))
}

fn routing_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let range = 250.0;
    let mut mismatches = 0;
    let mut queries = 0;
    for _ in 0..200 {
        let pos: Vec<Point> =
            (0..50).map(|_| Point::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0))).collect();
        for cur in 0..pos.len() {
            let dest = Point::new(rng.random_range(-200.0..1200.0), rng.random_range(-200.0..1200.0));
            let nbrs: Vec<(NodeId, Point)> = pos
                .iter()
                .enumerate()
                .filter(|&(j, p)| j != cur && p.distance(&pos[cur]) <= range)
                .map(|(j, p)| (NodeId(j as u32), *p))
                .collect();
            let got = gpsr_greedy_next(&pos[cur], nbrs.iter().map(|(id, p)| (*id, p)), &dest);
            queries += 1;
            if got != argmin_oracle(&pos, cur, range, &dest) {
                mismatches += 1;
            }
        }
    }
    // A source facing a gap toward the destination: its only neighbor is a
    // dead end, and the way around goes up and over.
    let void = StaticTopology {
        positions: vec![
            Point::new(0.0, 0.0),
            Point::new(140.0, 0.0),
            Point::new(0.0, 140.0),
            Point::new(130.0, 200.0),
            Point::new(270.0, 210.0),
            Point::new(380.0, 120.0),
            Point::new(400.0, 0.0),
        ],
        range: 150.0,
    };
    let greedy = route_static(&void, 0, 6, 64, false);
    let full = route_static(&void, 0, 6, 64, true);
    let void_ok = !greedy.delivered && full.delivered && full.perimeter_hops > 0;
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && void_ok && elapsed < 5.0,
        format!(
            "{mismatches}/{queries} greedy mismatches; void: greedy delivered={}, perimeter delivered={} in {} hops; {elapsed:.2}s",
            greedy.delivered,
            full.delivered,
            full.hops()
        ),
    )
}

// Criterion 3: sampling and best-response checks.

fn fg_payoff(i: usize, p_i: f64, probs: &[f64], avails: &[f64], benefit: f64, cost: f64) -> f64 {
    let mut none_other = 1.0;
    for (j, p) in probs.iter().enumerate() {
        if j != i {
            none_other *= 1.0 - p;
        }
    }
    let gain = benefit * avails[i];
    p_i * (gain - cost) + (1.0 - p_i) * gain * (1.0 - none_other)
}

fn game_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 1_000_000u32;
    let mut worst_sigma: f64 = 0.0;
    for (u, n, k) in [(10.0, 2, 1.0), (10.0, 3, 1.0), (3.0, 2, 1.0), (2.0, 4, 1.0), (1e8, 2, 1e7), (1.0, 5, 1.0)] {
        let p = vod_forward_probability(u, n, k);
        let hits = (0..draws).filter(|_| rng.random::<f64>() < p).count() as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let dev = (hits / draws as f64 - p).abs();
        let z = if sigma > 0.0 { dev / sigma } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
        worst_sigma = worst_sigma.max(z);
    }

    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let levels = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
    let mut worst_regret: f64 = 0.0;
    let mut fixtures = 0;
    for (benefit, cost) in [(2.0, 1.0), (4.0, 1.0), (3.0, 2.0)] {
        let cfg = GameConfig { fg_benefit: benefit, fg_cost: cost, ..GameConfig::default() };
        for n in 1..=3usize {
            let mut idx = vec![0usize; n];
            loop {
                let avails: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
                let eq = forwarding_game_equilibrium(&avails, &cfg);
                fixtures += 1;
                for i in 0..n {
                    let at = fg_payoff(i, eq.probs[i], &eq.probs, &avails, benefit, cost);
                    let best = grid
                        .iter()
                        .map(|&p| fg_payoff(i, p, &eq.probs, &avails, benefit, cost))
                        .fold(f64::NEG_INFINITY, f64::max);
                    worst_regret = worst_regret.max(best - at);
                }
                // Next combination of availability levels.
                let mut d = 0;
                while d < n {
                    idx[d] += 1;
                    if idx[d] < levels.len() {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == n {
                    break;
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst_sigma <= 3.0 && worst_regret <= 1e-3 && elapsed < 30.0,
        format!(
            "worst Monte Carlo deviation {worst_sigma:.2}σ; worst regret {worst_regret:.2e} over {fixtures} fixtures; {elapsed:.2}s"
        ),
    )
}

// Criteria 4 to 8: qualitative orderings over ten seeds.

fn add_vs_baselines(exp: &Experiment) -> Outcome {
    let m = "fdr_600";
    let fd = stat(exp, Protocol::FloodingDistance, 40.0, None, m);
    let nsf = stat(exp, Protocol::Nsf, 40.0, None, m);
    let mut pass = true;
    let mut parts = vec![format!("flooding {:.4}, nsf {:.4}±{:.4}", fd.0, nsf.0, nsf.1)];
    for p in [Protocol::AddVod, Protocol::AddFg] {
        let add = stat(exp, p, 40.0, None, m);
        pass &= add.0 >= fd.0;
        pass &= add.0 >= nsf.0 || nsf.0 - add.0 <= add.1.max(nsf.1);
        parts.push(format!("{} {:.4}±{:.4}", p.name(), add.0, add.1));
    }
    outcome(pass, format!("FDR@600 d=40: {}", parts.join(", ")))
}

fn density_benefit(exp: &Experiment) -> Outcome {
    let m = "fdr_1200";
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [Protocol::AddVod, Protocol::AddFg] {
        let lo = stat(exp, p, 40.0, None, m).0;
        let hi = stat(exp, p, 100.0, None, m).0;
        pass &= hi >= lo;
        parts.push(format!("{} d40 {lo:.4} d100 {hi:.4}", p.name()));
    }
    outcome(pass, format!("FDR@1200: {}", parts.join(", ")))
}

fn timer_schemes() -> Outcome {
    let cfg = preset("timers-25").unwrap();
    let t_min = cfg.timers.t_min;
    let t_max = cfg.timers.t_max;
    let exp = run(&cfg);
    let dup_speed = stat(&exp, Protocol::TimerSpeed, 25.0, Some(t_min), "duplicates").0;
    let dup_fixed = stat(&exp, Protocol::TimerFixed, 25.0, Some(t_min), "duplicates").0;
    let cov_map = stat(&exp, Protocol::TimerMap, 25.0, Some(t_max), "coverage").0;
    let cov_fixed = stat(&exp, Protocol::TimerFixed, 25.0, Some(t_max), "coverage").0;
    outcome(
        dup_speed < dup_fixed && cov_map >= cov_fixed,
        format!(
            "duplicates speed {dup_speed:.0} < fixed(T={t_min}) {dup_fixed:.0}; coverage map {cov_map:.4} >= fixed(T={t_max}) {cov_fixed:.4}"
        ),
    )
}

fn ctd_efficiency() -> Outcome {
    let mut cfg = preset("ctd-1000").unwrap();
    let p_a = 0.2;
    if let Some(s) = cfg.sweep.as_mut() {
        s.values = vec![p_a];
    }
    let exp = run(&cfg);
    let sweep = Some(p_a);
    let query = stat(&exp, Protocol::CtdQuery, 0.0, sweep, "messages_total").0;
    let none = stat(&exp, Protocol::NoneAssessment, 0.0, sweep, "messages_total").0;
    let passive_replies: u64 = exp
        .runs
        .iter()
        .filter(|r| r.key.protocol == Protocol::CtdPassive)
        .map(|r| r.ledger.messages(MessageKind::CtdReply))
        .sum();
    outcome(
        query < none && passive_replies == 0,
        format!("p_a={p_a}: messages ctd-query {query:.1} < none-assessment {none:.1}; ctd-passive replies {passive_replies}"),
    )
}

fn routing_loss() -> Outcome {
    let mut cfg = preset("routing-3mrp").unwrap();
    cfg.densities = vec![100.0];
    cfg.protocols = vec![Protocol::Gpsr, Protocol::MrpDsw];
    let exp = run(&cfg);
    let gpsr = stat(&exp, Protocol::Gpsr, 100.0, None, "e2e_loss").0;
    let dsw = stat(&exp, Protocol::MrpDsw, 100.0, None, "e2e_loss").0;
    outcome(dsw <= gpsr, format!("e2e loss 3mrp-dsw {dsw:.4} <= gpsr {gpsr:.4} at loss {}", cfg.radio.per_link_loss))
}

// Criterion 9: property suites.

fn invariant_suites() -> Outcome {
    let mut runner = TestRunner::new(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() });
    let protocols = proptest::sample::select(PROTOCOLS.to_vec());
    let mut failures = Vec::new();

    if let Err(e) = runner.run(&(protocols.clone(), 0u64..1000), |(p, seed)| {
        check_determinism(p, seed).map_err(TestCaseError::fail)
    }) {
        failures.push(format!("determinism: {e}"));
    }
    if let Err(e) = runner.run(&(protocols, 0u64..1000), |(p, seed)| {
        let out = run_logged(p, seed);
        check_run(p, &out, small_config(p).routing.w_floor).map_err(TestCaseError::fail)
    }) {
        failures.push(format!("run log: {e}"));
    }
    let chains = (
        proptest::collection::vec(
            proptest::collection::vec(proptest::array::uniform5(0.0..1.0f64), 0..12),
            1..20,
        ),
        0.0..=1.0f64,
        0.0..=0.2f64,
    );
    if let Err(e) = runner.run(&chains, |(rounds, lambda, floor)| {
        let mut w = MetricWeights::equal();
        for snaps in rounds {
            let snaps: Vec<MetricVector> = snaps.into_iter().map(MetricVector::from_array).collect();
            w = dsw_update(&snaps, &w, lambda, floor);
            check_weight_vector(&w, floor).map_err(TestCaseError::fail)?;
        }
        Ok(())
    }) {
        failures.push(format!("weights: {e}"));
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "determinism, conservation, weights, at-most-once and TTL hold on 144 generated cases".into()
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let mut leganes = preset("leganes-add").unwrap();
    leganes.protocols = vec![Protocol::AddVod, Protocol::AddFg, Protocol::FloodingDistance, Protocol::Nsf];
    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome>)> = vec![
        (1, Box::new(closed_forms)),
        (2, Box::new(routing_oracle)),
        (3, Box::new(game_correctness)),
        (4, Box::new({
            let leganes = leganes.clone();
            move || {
                let mut cfg = leganes.clone();
                cfg.densities = vec![40.0];
                add_vs_baselines(&run(&cfg))
            }
        })),
        (5, Box::new({
            let leganes = leganes.clone();
            move || {
                let mut cfg = leganes.clone();
                cfg.protocols = vec![Protocol::AddVod, Protocol::AddFg];
                density_benefit(&run(&cfg))
            }
        })),
        (6, Box::new(timer_schemes)),
        (7, Box::new(ctd_efficiency)),
        (8, Box::new(routing_loss)),
        (9, Box::new(invariant_suites)),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n}: {verdict} ({}) [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
