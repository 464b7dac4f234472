//! Cross-module behavior of full runs: determinism, traffic independence
//! from the policy, conservation, and report invariants.

use beamsim::config::{Mode, SimConfig};
use beamsim::sim::{run_experiment, RunOptions};

fn short_cfg(mode: Mode, seed: u64, duration_s: f64) -> SimConfig {
    SimConfig {
        mode,
        seed,
        duration_s,
        ..SimConfig::desk_preset()
    }
}

#[test]
fn baseline_and_eval_share_traffic_traces() {
    // Traffic generation must not depend on the policy: same seed, same
    // arrivals, byte for byte.
    let base = run_experiment(&short_cfg(Mode::Baseline, 11, 2.0), &RunOptions::default())
        .unwrap()
        .report;
    let eval = run_experiment(&short_cfg(Mode::Eval, 11, 2.0), &RunOptions::default())
        .unwrap()
        .report;
    assert_eq!(base.generated_bytes, eval.generated_bytes);
    for (b, e) in base.per_mt.iter().zip(eval.per_mt.iter()) {
        assert_eq!(b.generated_bytes, e.generated_bytes);
        assert_eq!(b.first_arrival_s, e.first_arrival_s);
        assert_eq!(b.serving_sector, e.serving_sector);
    }
}

#[test]
fn assignment_count_matches_intervals() {
    let cfg = short_cfg(Mode::Baseline, 3, 2.0); // 2 s = 50 intervals at 40 ms
    let report = run_experiment(&cfg, &RunOptions::default()).unwrap().report;
    assert_eq!(report.intervals, 50);
    for m in &report.per_mt {
        assert_eq!(m.assignments, 50);
    }
}

#[test]
fn reports_are_bit_identical_across_runs() {
    let cfg = short_cfg(Mode::Train, 17, 1.0);
    let a = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let b = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let (ra, rb) = (a.report, b.report);
    assert_eq!(ra.generated_bytes, rb.generated_bytes);
    assert_eq!(ra.delivered_bytes, rb.delivered_bytes);
    assert_eq!(ra.backlog_bytes, rb.backlog_bytes);
    for (x, y) in ra.per_mt.iter().zip(rb.per_mt.iter()) {
        assert_eq!(x.overall_bps.to_bits(), y.overall_bps.to_bits());
        assert_eq!(x.scheduled_ttis, y.scheduled_ttis);
    }
    let (na, nb) = (a.qnet.unwrap(), b.qnet.unwrap());
    for (x, y) in na.params_flat().iter().zip(nb.params_flat().iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn conservation_and_report_invariants() {
    for mode in [Mode::Baseline, Mode::Eval, Mode::Train] {
        let report = run_experiment(&short_cfg(mode, 5, 1.5), &RunOptions::default())
            .unwrap()
            .report;
        assert_eq!(
            report.generated_bytes,
            report.delivered_bytes + report.backlog_bytes
        );
        assert_eq!(report.scheduler_bytes, report.delivered_bytes);
        assert_eq!(report.audit.pairing_violations, 0);
        assert_eq!(report.audit.reward_violations, 0);
        assert!(report.audit.max_coscheduled <= 3);
        // effective throughput divides by a smaller denominator
        for m in &report.per_mt {
            if let Some(eff) = m.effective_bps {
                assert!(
                    eff >= m.overall_bps - 1e-9,
                    "mt {}: eff {eff} < overall {}",
                    m.mt_id,
                    m.overall_bps
                );
            }
        }
        let cdf = report.cosched_cdf();
        assert_eq!(cdf.len(), 3);
        assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn eval_timeseries_has_zero_epsilon_and_train_decays() {
    let eval = run_experiment(&short_cfg(Mode::Eval, 7, 2.0), &RunOptions::default())
        .unwrap()
        .report;
    assert!(eval.timeseries.iter().all(|p| p.epsilon == 0.0));

    let train = run_experiment(&short_cfg(Mode::Train, 7, 4.0), &RunOptions::default())
        .unwrap()
        .report;
    let first = train.timeseries.first().unwrap().epsilon;
    let last = train.timeseries.last().unwrap().epsilon;
    assert!(first > last, "epsilon should decay: {first} -> {last}");
}
