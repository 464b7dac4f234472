use beamsim::config::{Mode, SimConfig};
use beamsim::sim::{run_experiment, RunOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let train_s: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(600.0);
    let bw: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(100e6);
    let gamma: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0.9);
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(1);

    let mut cfg = SimConfig::desk_preset();
    cfg.bandwidth_hz = bw;
    cfg.elements_per_dim = 8;
    cfg.inter_site_distance_m = 400.0;
    cfg.tx_power_dbm = 10.0;
    cfg.discount = gamma;

    cfg.mode = Mode::Train;
    cfg.seed = seed;
    cfg.duration_s = train_s;
    let out = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let ts = &out.report.timeseries;
    print!("trajectory(30s): ");
    for chunk in ts.chunks(30) {
        let m = chunk.iter().map(|p| p.avg_mt_throughput_mbps).sum::<f64>() / chunk.len() as f64;
        print!("{m:.1} ");
    }
    println!();
    let net = out.qnet.unwrap();

    cfg.duration_s = 60.0;
    cfg.seed = seed + 1000;
    cfg.mode = Mode::Eval;
    let eval = run_experiment(&cfg, &RunOptions { initial_net: Some(net), ..Default::default() }).unwrap();
    cfg.mode = Mode::Baseline;
    let base = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let g = beamsim::metrics::compare(&base.report, &eval.report);
    let le = eval.report.latency.unwrap();
    let lb = base.report.latency.unwrap();
    println!(
        "bw={} gamma={gamma} seed={seed}: eval_gm={:.3} base_gm={:.3} gain={:+.2}% lat {:.0}/{:.0}ms factor={:.2}\n  cosched_eval={:?} cosched_base={:?} del_eval={:.3} del_base={:.3}",
        bw / 1e6,
        eval.report.gm_overall_bps.value.unwrap() / 1e6,
        base.report.gm_overall_bps.value.unwrap() / 1e6,
        g.gm_overall_gain_pct.unwrap(),
        le.mean_s * 1e3, lb.mean_s * 1e3,
        g.latency_mean_factor.unwrap(),
        eval.report.cosched_counts, base.report.cosched_counts,
        eval.report.delivered_bytes as f64 / eval.report.generated_bytes as f64,
        base.report.delivered_bytes as f64 / base.report.generated_bytes as f64,
    );
}
