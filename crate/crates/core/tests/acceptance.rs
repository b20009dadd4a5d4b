//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schedtune::action::{cardinality, table2_specs, SampleMode};
use schedtune::cem::{optimize_step, EpochStats, SearchDistribution};
use schedtune::experiment::{self, evaluate_fresh, run_experiment, ExperimentConfig, RunOptions};
use schedtune::kpi::{
    self, check_constraints, summarize, AggregatedBin, CellCounter, UeBin, CELL_COUNTER_COUNT,
    HIGH_LOAD_TTIS, MID_LOAD_TTIS, UE_SLOTS,
};
use schedtune::objective::ObjectiveConfig;
use schedtune::sim::{
    run_session, AppKind, AppPhase, CoverageClass, Outcome, Scenario, SimConfig, UeProfile,
};
use schedtune::{ActionSpace, KpiVector, Param, ParameterSet};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

const TABLE1: [f64; 5] = [0.22, 0.29, 0.28, 0.15, 0.06];

fn reward_arithmetic() -> Verdict {
    let mut cfg = ObjectiveConfig::default();
    cfg.entries.truncate(5);
    cfg.validate().map_err(|e| e.to_string())?;
    let all = cfg.weighted_sum(&[1.0; 5]).map_err(|e| e.to_string())?;
    ensure(all == 1.0, format!("all-ones gave {all}"))?;
    let first = cfg.weighted_sum(&[1.0, 0.0, 0.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    ensure(first == 0.22, format!("MAC-only gave {first}"))?;

    let full = ObjectiveConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = KpiVector {
            dl_mac_throughput_bps: rng.random_range(-1e8..1.5e9),
            dl_rlc_throughput_bps: rng.random_range(-1e8..1.5e9),
            dl_ack_ratio: rng.random_range(-0.2..1.2),
            ul_ack_ratio: rng.random_range(-0.2..1.2),
            dl_mean_mcs: rng.random_range(-2.0..30.0),
            cce2_utilization: rng.random_range(0.0..1.0),
        };
        // Oracle: clamp each KPI by hand and take the dot product with the default weights.
        let his = [1.2e9, 1.2e9, 1.0, 1.0, 27.0];
        let raw = [
            k.dl_mac_throughput_bps,
            k.dl_rlc_throughput_bps,
            k.dl_ack_ratio,
            k.ul_ack_ratio,
            k.dl_mean_mcs,
        ];
        let oracle: f64 = (0..5)
            .map(|i| TABLE1[i] * (raw[i] / his[i]).clamp(0.0, 1.0))
            .sum();
        let r = full.reward(&k).map_err(|e| e.to_string())?;
        worst = worst.max((r - oracle).abs());
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("r(1)=1, r(e1)=0.22, 1000 vectors max |dev| {worst:.1e}"))
}

fn action_cardinality() -> Verdict {
    let c = cardinality(&table2_specs());
    ensure(c == 101 * 2 * 2 * 201 * 8 * 2, format!("got {c}"))?;
    ensure(c == 1_299_264 && c > 600_000, format!("got {c}"))?;
    Ok(format!("{c}"))
}

fn bins_with(counts: &[u64]) -> Vec<AggregatedBin> {
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut cell = [0.0; CELL_COUNTER_COUNT];
            cell[CellCounter::ScheduledDlTtis as usize] = c as f64;
            AggregatedBin {
                bin_index: i,
                cell,
                ues: [UeBin::default(); UE_SLOTS],
                mcs_sum: 0,
            }
        })
        .collect()
}

fn constraint_thresholds() -> Verdict {
    ensure(HIGH_LOAD_TTIS == 1280 && MID_LOAD_TTIS == 320, "threshold constants")?;
    let high = |c: u64| check_constraints(&bins_with(&[c]), 1, 0);
    let mid = |c: u64| check_constraints(&bins_with(&[c]), 0, 1);
    let cases = [
        (1279, false, true),
        (1280, false, true),
        (1281, true, false),
        (319, false, false),
        (320, false, true),
        (321, false, true),
    ];
    for (c, want_high, want_mid) in cases {
        ensure(high(c) == want_high, format!("high band at {c}"))?;
        ensure(mid(c) == want_mid, format!("mid band at {c}"))?;
    }
    Ok("high > 1280, mid in [320, 1280]; six boundary cases".into())
}

fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let n = rng.random_range(1..=4);
    let kinds = [AppKind::VideoStream, AppKind::Messaging, AppKind::SpeedTest, AppKind::Idle];
    let ues = (0..n)
        .map(|i| {
            let class = CoverageClass::ALL[rng.random_range(0..3)];
            let mut phases = Vec::new();
            let mut t = 0.0;
            while t < 4.0 {
                let d = rng.random_range(0.3..2.0);
                let kind = kinds[rng.random_range(0..4)];
                phases.push(AppPhase::new(kind, t, d, rng.random_range(1e5..8e7)));
                t += d;
            }
            UeProfile::new(
                i as u8,
                class,
                class.default_mean_sinr_db() + rng.random_range(-3.0..3.0),
                rng.random_range(0.0..5.0),
                phases,
            )
        })
        .collect();
    Scenario {
        name: "random".into(),
        ues,
        cycle_s: None,
        sim: SimConfig::default(),
    }
}

fn simulator_conservation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let space = ActionSpace::unconstrained();
    let mut tbs = 0u64;
    for trial in 0..100 {
        let scenario = random_scenario(&mut rng);
        let params = space
            .sample_candidate(SampleMode::UniformRandom, &mut rng)
            .map_err(|e| e.to_string())?;
        let seed = rng.random();
        let duration = rng.random_range(1.0..4.0);
        let traces = run_session(&scenario, &params, seed, duration).map_err(|e| e.to_string())?;
        let mut scheduled = 0u64;
        let mut outcomes = 0u64;
        for t in &traces {
            for u in &t.ues {
                scheduled += u64::from(u.scheduled);
                outcomes += u64::from(matches!(u.outcome, Outcome::Ack | Outcome::Nack | Outcome::Dtx));
                ensure(
                    u.scheduled == (u.outcome != Outcome::NotScheduled),
                    format!("trial {trial}: outcome without grant at slot {}", t.tti_index),
                )?;
            }
        }
        ensure(scheduled == outcomes, format!("trial {trial}: {outcomes} outcomes, {scheduled} TBs"))?;
        let bins = kpi::aggregate_with_rbs(&traces, scenario.sim.n_rbs);
        for b in &bins {
            let fb = b.get(CellCounter::DlAckCount) + b.get(CellCounter::DlNackCount) + b.get(CellCounter::DlDtxCount);
            ensure(fb == b.get(CellCounter::DlTbCount), format!("trial {trial}: bin {} feedback mismatch", b.bin_index))?;
            ensure(
                b.get(CellCounter::DlRlcBits) <= b.get(CellCounter::DlMacBits),
                format!("trial {trial}: bin {} RLC above MAC", b.bin_index),
            )?;
        }
        let k = summarize(&bins);
        ensure(
            k.dl_rlc_throughput_bps <= k.dl_mac_throughput_bps,
            format!("trial {trial}: session RLC above MAC"),
        )?;
        tbs += scheduled;
    }
    Ok(format!("100 random triples, {tbs} TBs all accounted for"))
}

fn olla_convergence() -> Verdict {
    let mut details = Vec::new();
    for target in [0.1, 0.3] {
        let ue = UeProfile::new(
            0,
            CoverageClass::Medium,
            12.0,
            0.0,
            vec![AppPhase::new(AppKind::SpeedTest, 0.0, 1e6, 0.0)],
        );
        let scenario = Scenario {
            name: "static".into(),
            ues: vec![ue],
            cycle_s: None,
            sim: SimConfig::default(),
        };
        let params = ParameterSet::sme_default()
            .with(Param::IblerTarget, target)
            .map_err(|e| e.to_string())?;
        // 64 s gives 102,400 downlink slots.
        let traces = run_session(&scenario, &params, 17, 64.0).map_err(|e| e.to_string())?;
        let (mut scheduled, mut initial, mut nack) = (0u64, 0u64, 0u64);
        for t in &traces {
            let u = &t.ues[0];
            scheduled += u64::from(u.scheduled);
            if u.scheduled && !u.is_retx {
                initial += 1;
                nack += u64::from(u.outcome == Outcome::Nack);
            }
        }
        let rate = nack as f64 / initial as f64;
        ensure(scheduled >= 100_000, format!("only {scheduled} scheduled slots"))?;
        ensure((rate - target).abs() <= 0.03, format!("target {target}: initial NACK rate {rate:.4}"))?;
        details.push(format!("target {target}: {rate:.4} over {initial} initial TBs in {scheduled} slots"));
    }
    Ok(details.join(", "))
}

fn cem_analytic() -> Verdict {
    let mut worst_iter = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let target: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = |w: &[f64]| -w.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut dist = SearchDistribution {
            mean: vec![0.0; 10],
            stddev: vec![1.0; 10],
            epoch: 0,
        };
        let mut reached = None;
        for it in 1..=100 {
            dist = optimize_step(&dist, 50, 0.2, 0.01, &mut rng, f).map_err(|e| e.to_string())?.0;
            let err = dist.mean.iter().zip(&target).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if err < 0.01 {
                reached = Some(it);
                break;
            }
        }
        let it = reached.ok_or(format!("seed {seed} did not reach 0.01 in 100 iterations"))?;
        worst_iter = worst_iter.max(it);
    }
    Ok(format!("10/10 seeds, slowest at iteration {worst_iter}"))
}

fn end_to_end() -> Verdict {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut passed = 0;
    let mut fresh_ok = true;
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let mut cfg = ExperimentConfig::desk();
        cfg.seed = seed;
        cfg.env.base_seed = seed;
        cfg.output_dir = root.path().join(format!("seed{seed}"));
        let r = run_experiment(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
        let env = cfg.environment().map_err(|e| e.to_string())?;
        let fresh = evaluate_fresh(&env, &r.final_best, seed, 20).map_err(|e| e.to_string())?;
        let milestone = r.milestones.first_median_at_or_above_baseline;
        if milestone.is_some_and(|e| e <= 50) {
            passed += 1;
        }
        fresh_ok &= fresh >= r.baseline - 0.02;
        lines.push(format!(
            "seed {seed}: baseline {:.4}, median reaches it at epoch {:?}, final best over 20 fresh sessions {fresh:.4}",
            r.baseline, milestone
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    ensure(passed >= 8, format!("median milestone by epoch 50 in {passed}/10 seeds"))?;
    ensure(fresh_ok, "a final best fell more than 0.02 below its baseline")?;
    Ok(format!("median >= baseline by epoch 50 in {passed}/10 seeds; final bests within tolerance"))
}

fn determinism_and_resume() -> Verdict {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_for = |name: &str| {
        let mut cfg = ExperimentConfig::default();
        cfg.env.session_duration_s = 5.0;
        cfg.env.x_seconds = 2;
        cfg.env.y_seconds = 2;
        cfg.optimizer.population = 8;
        cfg.optimizer.epochs = 20;
        cfg.baseline.n_sessions = 5;
        cfg.seed = 21;
        cfg.output_dir = root.path().join(name);
        cfg
    };
    let err = |e: experiment::ExperimentError| e.to_string();
    run_experiment(&cfg_for("a"), RunOptions::default()).map_err(err)?;
    run_experiment(&cfg_for("b"), RunOptions::default()).map_err(err)?;
    let c = cfg_for("c");
    let partial = run_experiment(&c, RunOptions { stop_after_epochs: Some(10) }).map_err(err)?;
    ensure(partial.completed_epochs == 10, "interrupted run did not stop at 10")?;
    experiment::resume(&c.output_dir.join("checkpoint.json"), RunOptions::default()).map_err(err)?;
    let read = |d: &str, f: &str| std::fs::read(root.path().join(d).join(f)).map_err(|e| format!("{d}/{f}: {e}"));
    ensure(read("a", "epochs.csv")? == read("b", "epochs.csv")?, "repeat run epochs.csv differs")?;
    for f in ["epochs.csv", "steps.csv", "kpis.csv", "best_params.json"] {
        ensure(read("a", f)? == read("c", f)?, format!("resumed {f} differs"))?;
    }
    let rows = String::from_utf8_lossy(&read("a", "epochs.csv")?).lines().count() - 1;
    ensure(rows == 20, format!("{rows} epoch rows"))?;
    Ok("repeat and resume-at-10 runs byte-identical over 20 epochs".into())
}

/// Linear interpolation at q·(n−1), written against a fresh sort.
fn oracle_percentile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = q * (s.len() - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= s.len() {
        s[s.len() - 1]
    } else {
        s[i] + (h - i as f64) * (s[i + 1] - s[i])
    }
}

fn statistics_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ex = EpochStats::summarize(0, vec![0.1, 0.2, 0.3, 0.4], ParameterSet::sme_default(), 0.0, 0.2);
    ensure(
        (ex.p25 - 0.175).abs() <= 1e-12 && (ex.median - 0.25).abs() <= 1e-12 && (ex.p75 - 0.325).abs() <= 1e-12,
        "worked example",
    )?;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=80);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let s = EpochStats::summarize(0, rewards.clone(), ParameterSet::sme_default(), 0.0, 0.2);
        let mean = rewards.iter().sum::<f64>() / n as f64;
        for (got, want) in [
            (s.p25, oracle_percentile(&rewards, 0.25)),
            (s.median, oracle_percentile(&rewards, 0.5)),
            (s.mean, mean),
            (s.p75, oracle_percentile(&rewards, 0.75)),
        ] {
            worst = worst.max((got - want).abs());
        }
        ensure(s.p25 <= s.median && s.median <= s.p75, "percentile ordering")?;
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("1000 lists, max |dev| {worst:.1e}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 reward arithmetic", reward_arithmetic),
        ("2 action-space cardinality", action_cardinality),
        ("3 constraint thresholds", constraint_thresholds),
        ("4 simulator conservation", simulator_conservation),
        ("5 OLLA convergence", olla_convergence),
        ("6 CEM analytic convergence", cem_analytic),
        ("7 end-to-end baseline beating", end_to_end),
        ("8 determinism and resume", determinism_and_resume),
        ("9 percentile oracle", statistics_oracle),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail}) [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why}) [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
