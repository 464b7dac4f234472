//! Experiment orchestration: the TTI loop, beam-switching events, training
//! hooks, metrics aggregation, and file outputs.

use crate::codebook::{build_codebook, AngularGrid, CorrelationMatrix, PanelConfig};
use crate::config::{Mode, RewardPool, SimConfig};
use crate::ddqn::{
    epsilon_at, load_checkpoint, save_checkpoint, EpsilonSchedule, Hyperparams, Mlp, ReplayBuffer,
    Trainer, TrainOutcome,
};
use crate::error::{Result, SimError};
use crate::measurement::{clip_and_normalize, ActivationHistory, AgentState};
use crate::metrics::{
    geometric_mean, sig6, LatencyAccum, LatencySummary, MetricsReport, MtMetrics, ScheduleAudit,
    SummaryValues, TimePoint, TrainSummary,
};
use crate::policy::{
    assign_interval, close_transitions, compute_rewards, AssignInput, BaselineSelector,
    BeamSelector, RewardSample, RlSelector,
};
use crate::scheduler::{run_tti, PfState, TtiInputs};
use crate::topology::{place_terminals, rx_power_dbm, step_mobility, LinkState, NetworkLayout};
use crate::traffic::{ftp3_arrivals, PacketBuffer, TrafficConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub debug_dumps: bool,
    pub checkpoint_in: Option<PathBuf>,
    /// Pre-built network (takes precedence over `checkpoint_in`).
    pub initial_net: Option<Mlp>,
}

pub struct RunOutput {
    pub report: MetricsReport,
    /// Final online network for train/eval modes.
    pub qnet: Option<Mlp>,
}

/// Panel geometry of one sector in its own frame.
pub fn sector_panels(cfg: &SimConfig, layout: &NetworkLayout) -> Vec<PanelConfig> {
    layout
        .panel_boresights_deg
        .iter()
        .map(|&b| PanelConfig {
            elements_per_dim: cfg.elements_per_dim,
            element_spacing_wl: cfg.element_spacing_wl,
            boresight_azimuth_deg: b,
            element_gain_dbi: cfg.element_gain_dbi,
        })
        .collect()
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

struct CsvSink {
    writer: Option<BufWriter<File>>,
}

impl CsvSink {
    fn open(dir: Option<&Path>, name: &str, header: &str) -> Result<CsvSink> {
        match dir {
            None => Ok(CsvSink { writer: None }),
            Some(d) => {
                let mut w = BufWriter::new(File::create(d.join(name))?);
                writeln!(w, "{header}")?;
                Ok(CsvSink { writer: Some(w) })
            }
        }
    }

    fn closed() -> CsvSink {
        CsvSink { writer: None }
    }

    fn row(&mut self, line: &str) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some(mut w) = self.writer {
            w.flush()?;
        }
        Ok(())
    }
}

pub fn run_experiment(cfg: &SimConfig, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    if let Some(dir) = opts.out_dir.as_deref() {
        std::fs::create_dir_all(dir)?;
    }
    let layout = NetworkLayout::from_config(cfg)?;
    let codebook = build_codebook(
        &sector_panels(cfg, &layout),
        cfg.beams_azimuth,
        cfg.beams_elevation,
        cfg.backlobe_suppression_db,
    )?;
    let beams = codebook.beam_count();
    let grid = AngularGrid::new(cfg.correlation_grid_deg, cfg.elevation_range_deg);
    let rho = CorrelationMatrix::compute(&codebook, &grid, cfg.correlation_floor_db);

    let mut mts = place_terminals(&layout, &codebook, cfg.mt_count, cfg.mt_speed_kmh, cfg.seed);
    let sector_count = layout.sector_count();
    let mut mts_per_sector: Vec<Vec<usize>> = vec![Vec::new(); sector_count];
    for mt in &mts {
        mts_per_sector[mt.serving_sector].push(mt.id);
    }

    // Independent RNG streams so exploration can never desynchronize traffic.
    let mut traffic_rngs: Vec<ChaCha8Rng> = (0..cfg.mt_count)
        .map(|mt| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(0x7AFF_0000 + mt as u64);
            r
        })
        .collect();
    let mut policy_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    policy_rng.set_stream(0xE9);
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(0x0E7);
    let mut replay_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    replay_rng.set_stream(0x5A77);

    let mut net_dims = vec![cfg.net_input_dim];
    net_dims.extend_from_slice(&cfg.net_hidden);
    net_dims.push(beams);
    let qnet: Option<Mlp> = match cfg.mode {
        Mode::Baseline => None,
        Mode::Train | Mode::Eval => {
            let net = if let Some(net) = opts.initial_net.clone() {
                net
            } else if let Some(path) = opts.checkpoint_in.as_deref() {
                let (net, _header) = load_checkpoint(path)?;
                net
            } else {
                Mlp::new(&net_dims, &mut init_rng)?
            };
            if net.dims() != net_dims.as_slice() {
                return Err(SimError::Config(format!(
                    "checkpoint dims {:?} do not match configured network {:?}",
                    net.dims(),
                    net_dims
                )));
            }
            Some(net)
        }
    };
    let hp = Hyperparams {
        discount: cfg.discount,
        learning_rate: cfg.learning_rate,
        adam_beta1: cfg.adam_beta1,
        adam_beta2: cfg.adam_beta2,
        adam_epsilon: cfg.adam_epsilon,
        batch_size: cfg.batch_size,
        target_sync_period: cfg.target_sync_period,
        loss_fn: cfg.loss_fn,
    };
    let mut trainer: Option<Trainer> = match cfg.mode {
        Mode::Train => Some(Trainer::from_network(qnet.clone().unwrap(), hp)),
        _ => None,
    };
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);

    let tti_s = cfg.tti_s();
    let total_ttis = (cfg.duration_s / tti_s).round() as u64;
    let tpi = cfg.ttis_per_interval() as u64;
    let total_intervals = total_ttis.div_ceil(tpi);
    let planned_steps = total_intervals * cfg.train_epochs as u64;
    let schedule = EpsilonSchedule {
        start: cfg.epsilon_start,
        end: cfg.epsilon_end,
        decay_horizon: planned_steps / 2,
    };

    let traffic_cfg = TrafficConfig {
        offered_load_bps: cfg.offered_load_bps(),
        packet_bytes: cfg.packet_bytes,
    };
    let mut buffers: Vec<PacketBuffer> = (0..cfg.mt_count).map(|_| PacketBuffer::new()).collect();
    let mut pf = PfState::new(cfg.mt_count, cfg.pf_ema_ttis, cfg.pf_rate_floor_bps);
    let mut histories: Vec<ActivationHistory> = (0..sector_count)
        .map(|_| ActivationHistory::new(beams, tpi as u32))
        .collect();

    let rb_total = cfg.rb_count();
    let rb_bw_hz = cfg.rb_bandwidth_hz();
    let noise_fullband_mw = dbm_to_mw(cfg.noise_density_dbm_hz)
        * rb_bw_hz
        * rb_total as f64
        * dbm_to_mw(cfg.noise_figure_db);

    // Per-interval channel caches.
    let mut serv_rx_dbm: Vec<Vec<f64>> = vec![vec![0.0; beams]; cfg.mt_count];
    let mut serv_rx_mw: Vec<Vec<f64>> = vec![vec![0.0; beams]; cfg.mt_count];
    let mut other_rx_mw: Vec<Vec<Vec<f64>>> =
        vec![vec![vec![0.0; beams]; sector_count]; cfg.mt_count];

    let mut serving_beams: Vec<usize> = vec![0; cfg.mt_count];
    let mut prev_logs: Vec<Vec<(usize, AgentState, usize)>> = vec![Vec::new(); sector_count];
    let mut interval_delivered: Vec<u64> = vec![0; cfg.mt_count];
    let mut active_prev: Vec<Vec<usize>> = vec![Vec::new(); sector_count];

    let mut audit = ScheduleAudit::default();
    let mut cosched_counts: Vec<u64> = vec![0; cfg.panels_per_sector];
    let mut scheduled_ttis: Vec<u64> = vec![0; cfg.mt_count];
    let mut assignments: Vec<u64> = vec![0; cfg.mt_count];
    let mut latency_all = LatencyAccum::new();
    let mut latency_per_mt: Vec<LatencyAccum> =
        (0..cfg.mt_count).map(|_| LatencyAccum::new()).collect();
    let mut scheduler_bytes: u64 = 0;
    let mut train_steps: u64 = 0;
    let mut last_loss = 0.0f64;
    let mut epsilon_now = match cfg.mode {
        Mode::Train => epsilon_at(0, &schedule),
        _ => 0.0,
    };

    let ttis_per_sec = (1.0 / tti_s).round() as u64;
    let mut sec_bytes: u64 = 0;
    let mut timeseries: Vec<TimePoint> = Vec::new();

    let out = opts.out_dir.as_deref();
    let dump = opts.debug_dumps;
    let mut latency_csv = if cfg.mode == Mode::Train {
        CsvSink::closed()
    } else {
        CsvSink::open(out, "latency.csv", "mt_id,packet_id,arrival_s,completion_s,latency_ms")?
    };
    let mut train_csv = if cfg.mode == Mode::Train {
        CsvSink::open(out, "train.csv", "step,loss,epsilon,replay_size")?
    } else {
        CsvSink::closed()
    };
    let mut schedule_csv = if dump {
        CsvSink::open(out, "schedule.csv", "tti,sector,mt,beam,rbs,sinr_db,bytes")?
    } else {
        CsvSink::closed()
    };
    let mut states_csv = if dump {
        CsvSink::open(out, "states.csv", "mt_id,tti,state")?
    } else {
        CsvSink::closed()
    };
    if dump {
        if let Some(dir) = out {
            let mut w = BufWriter::new(File::create(dir.join("rho.csv"))?);
            writeln!(w, "b,j,rho")?;
            for b in 0..beams {
                for j in 0..beams {
                    writeln!(w, "{b},{j},{:.6}", rho.get(b, j))?;
                }
            }
            w.flush()?;
        }
    }

    let mut interval_index: u64 = 0;

    for tti in 0..total_ttis {
        let t0 = tti as f64 * tti_s;
        let now_end = (tti + 1) as f64 * tti_s;

        if tti % tpi == 0 {
            // ---- beam-switching boundary ----
            let links = LinkState::compute(&layout, &mts, cfg.seed);
            for mt in &mts {
                let s = mt.serving_sector;
                for b in 0..beams {
                    let dbm = rx_power_dbm(&layout, &links, &codebook, mt, s, b);
                    serv_rx_dbm[mt.id][b] = dbm;
                    serv_rx_mw[mt.id][b] = dbm_to_mw(dbm);
                }
                for os in 0..sector_count {
                    if os == s {
                        continue;
                    }
                    for b in 0..beams {
                        other_rx_mw[mt.id][os][b] =
                            dbm_to_mw(rx_power_dbm(&layout, &links, &codebook, mt, os, b));
                    }
                }
            }

            // Reward samples for the interval that just completed.
            let closing = interval_index > 0;
            let mut rewards_by_sector: Vec<Vec<RewardSample>> = vec![Vec::new(); sector_count];
            if closing {
                match cfg.reward_pool {
                    RewardPool::Sector => {
                        for (s, ids) in mts_per_sector.iter().enumerate() {
                            let pool: Vec<(usize, u64)> = prev_logs[s]
                                .iter()
                                .map(|(mt, _, _)| (*mt, interval_delivered[*mt]))
                                .collect();
                            let _ = ids;
                            rewards_by_sector[s] = compute_rewards(&pool);
                        }
                    }
                    RewardPool::Network => {
                        let max = interval_delivered.iter().copied().max().unwrap_or(0);
                        for (s, log) in prev_logs.iter().enumerate() {
                            rewards_by_sector[s] = log
                                .iter()
                                .map(|(mt, _, _)| RewardSample {
                                    mt: *mt,
                                    delivered_bytes: interval_delivered[*mt],
                                    reward: if max == 0 {
                                        0.0
                                    } else {
                                        interval_delivered[*mt] as f64 / max as f64
                                    },
                                })
                                .collect();
                        }
                    }
                }
                for samples in &rewards_by_sector {
                    for s in samples {
                        if !(0.0..=1.0).contains(&s.reward) {
                            audit.reward_violations += 1;
                        }
                    }
                }
            }

            // Sweep reports, previous-interval history, and the assignment pass.
            epsilon_now = match cfg.mode {
                Mode::Train => epsilon_at(interval_index * cfg.train_epochs as u64, &schedule),
                _ => 0.0,
            };
            let mut new_logs: Vec<Vec<(usize, AgentState, usize)>> =
                vec![Vec::new(); sector_count];
            for s in 0..sector_count {
                let ids = &mts_per_sector[s];
                if ids.is_empty() {
                    continue;
                }
                let h_prev = histories[s].normalized();
                histories[s].reset();
                let mut order: Vec<usize> = ids.clone();
                order.sort_by(|a, b| {
                    pf.avg_bps(*b)
                        .partial_cmp(&pf.avg_bps(*a))
                        .unwrap()
                        .then(a.cmp(b))
                });
                let z_by_mt: Vec<(usize, Vec<f64>)> = order
                    .iter()
                    .map(|&mt| (mt, clip_and_normalize(&serv_rx_dbm[mt]).unwrap()))
                    .collect();
                let inputs: Vec<AssignInput> = order
                    .iter()
                    .zip(z_by_mt.iter())
                    .map(|(&mt, (_, z))| AssignInput {
                        mt,
                        raw_rsrp_dbm: &serv_rx_dbm[mt],
                        z,
                        h: &h_prev,
                    })
                    .collect();
                let mut baseline = BaselineSelector;
                let mut rl;
                let selector: &mut dyn BeamSelector = match (cfg.mode, qnet.as_ref(), trainer.as_ref())
                {
                    (Mode::Baseline, _, _) => &mut baseline,
                    (Mode::Eval, Some(net), _) => {
                        rl = RlSelector {
                            qnet: net,
                            epsilon: 0.0,
                            rng: &mut policy_rng,
                            training: false,
                        };
                        &mut rl
                    }
                    (Mode::Train, _, Some(tr)) => {
                        rl = RlSelector {
                            qnet: &tr.online,
                            epsilon: epsilon_now,
                            rng: &mut policy_rng,
                            training: true,
                        };
                        &mut rl
                    }
                    _ => unreachable!("policy/network wiring"),
                };
                let (assignment, log) =
                    assign_interval(interval_index, &inputs, &rho, cfg.panels_per_sector, selector)?;
                for &(mt, beam) in &assignment.chosen {
                    serving_beams[mt] = beam;
                    assignments[mt] += 1;
                }
                if dump {
                    for (mt, state, _) in &log {
                        let flat = state.flattened();
                        let mut row = format!("{mt},{tti}");
                        for v in flat {
                            row.push(',');
                            row.push_str(&sig6(v));
                        }
                        states_csv.row(&row)?;
                    }
                }
                new_logs[s] = log;
            }

            // Close transitions into replay and run the training epochs.
            if cfg.mode == Mode::Train {
                if closing {
                    for s in 0..sector_count {
                        if prev_logs[s].is_empty() {
                            continue;
                        }
                        let next: Vec<(usize, AgentState)> = prev_logs[s]
                            .iter()
                            .map(|(mt, _, _)| {
                                let found = new_logs[s]
                                    .iter()
                                    .find(|(m, _, _)| m == mt)
                                    .expect("terminal stays in its sector");
                                (*mt, found.1.clone())
                            })
                            .collect();
                        for exp in
                            close_transitions(&prev_logs[s], &rewards_by_sector[s], &next, false)?
                        {
                            replay.push(exp);
                        }
                    }
                    let tr = trainer.as_mut().unwrap();
                    for _ in 0..cfg.train_epochs {
                        match tr.train_step(&replay, &mut replay_rng)? {
                            TrainOutcome::Stepped { loss } => {
                                train_steps += 1;
                                last_loss = loss;
                                train_csv.row(&format!(
                                    "{},{},{},{}",
                                    tr.steps_done,
                                    sig6(loss),
                                    sig6(epsilon_now),
                                    replay.len()
                                ))?;
                            }
                            TrainOutcome::Underfull => {}
                        }
                    }
                }
                prev_logs = new_logs;
            }
            interval_delivered.iter_mut().for_each(|v| *v = 0);
            interval_index += 1;
        }

        // ---- traffic arrivals ----
        for mt in 0..cfg.mt_count {
            for pkt in ftp3_arrivals(&traffic_cfg, t0, tti_s, &mut traffic_rngs[mt]) {
                buffers[mt].enqueue(pkt);
            }
        }

        // ---- per-sector scheduling against the stale interference snapshot ----
        let mut inter_mw: Vec<f64> = vec![0.0; cfg.mt_count];
        for mt in &mts {
            let mut acc = 0.0;
            for (os, beams_active) in active_prev.iter().enumerate() {
                if os == mt.serving_sector {
                    continue;
                }
                for &b in beams_active {
                    acc += other_rx_mw[mt.id][os][b];
                }
            }
            inter_mw[mt.id] = acc;
        }
        let mut active_next: Vec<Vec<usize>> = vec![Vec::new(); sector_count];
        for s in 0..sector_count {
            let inputs = TtiInputs {
                tti,
                sector: s,
                mt_ids: &mts_per_sector[s],
                serving_beams: &serving_beams,
                serv_rx_mw: &serv_rx_mw,
                inter_mw: &inter_mw,
                noise_fullband_mw,
                rho: &rho,
                pairing_threshold: cfg.correlation_threshold,
                panels: cfg.panels_per_sector,
                beams_per_panel: cfg.beams_per_panel,
                rb_total,
                rb_bw_hz,
                tti_s,
                se_cap: cfg.se_cap_bps_hz,
                now_s: now_end,
            };
            let decision = run_tti(&inputs, &mut pf, &mut buffers, &mut histories[s], |mt, rec| {
                let lat = rec.latency_s();
                latency_all.record(lat);
                latency_per_mt[mt].record(lat);
                let _ = latency_csv.row(&format!(
                    "{mt},{},{},{},{}",
                    rec.packet_id,
                    sig6(rec.arrival_s),
                    sig6(rec.completion_s),
                    sig6(lat * 1e3)
                ));
            })?;
            if decision
                .verify(&rho, cfg.correlation_threshold, cfg.panels_per_sector, cfg.beams_per_panel)
                .is_err()
            {
                audit.pairing_violations += 1;
            }
            if !decision.entries.is_empty() {
                audit.scheduled_ttis += 1;
                let k = decision.entries.len();
                cosched_counts[k - 1] += 1;
                audit.max_coscheduled = audit.max_coscheduled.max(k);
                active_next[s] = decision.entries.iter().map(|e| e.beam).collect();
                for e in &decision.entries {
                    scheduled_ttis[e.mt] += 1;
                    interval_delivered[e.mt] += e.bytes;
                    scheduler_bytes += e.bytes;
                    sec_bytes += e.bytes;
                    if dump {
                        schedule_csv.row(&format!(
                            "{tti},{s},{},{},{},{},{}",
                            e.mt,
                            e.beam,
                            e.rb_count,
                            sig6(e.sinr_db),
                            e.bytes
                        ))?;
                    }
                }
            }
            audit.ttis += 1;
        }
        active_prev = active_next;

        // ---- mobility ----
        for mt in &mut mts {
            *mt = step_mobility(mt, &layout.region, tti_s);
        }

        if (tti + 1) % ttis_per_sec == 0 {
            timeseries.push(TimePoint {
                t_s: ((tti + 1) / ttis_per_sec) as f64,
                avg_mt_throughput_mbps: sec_bytes as f64 * 8.0 / cfg.mt_count as f64 / 1e6,
                epsilon: epsilon_now,
            });
            sec_bytes = 0;
        }
    }

    // Final transitions close with done=true; the successor state is unused.
    if cfg.mode == Mode::Train {
        for log in prev_logs.iter().filter(|l| !l.is_empty()) {
            let pool: Vec<(usize, u64)> = log
                .iter()
                .map(|(mt, _, _)| (*mt, interval_delivered[*mt]))
                .collect();
            let rewards = compute_rewards(&pool);
            let next: Vec<(usize, AgentState)> =
                log.iter().map(|(mt, s, _)| (*mt, s.clone())).collect();
            for exp in close_transitions(log, &rewards, &next, true)? {
                replay.push(exp);
            }
        }
    }

    // ---- aggregate metrics ----
    let run_end_s = total_ttis as f64 * tti_s;
    let mut per_mt = Vec::with_capacity(cfg.mt_count);
    let mut overall_list = Vec::with_capacity(cfg.mt_count);
    let mut effective_list = Vec::with_capacity(cfg.mt_count);
    let mut generated = 0u64;
    let mut delivered = 0u64;
    let mut backlog = 0u64;
    for mt in 0..cfg.mt_count {
        let buf = &buffers[mt];
        generated += buf.generated_bytes;
        delivered += buf.delivered_bytes;
        backlog += buf.backlog_bytes();
        let t = crate::metrics::throughputs(
            buf.delivered_bytes,
            buf.first_arrival_s,
            run_end_s,
            scheduled_ttis[mt],
            tti_s,
        );
        overall_list.push(t.overall_bps);
        effective_list.push(t.effective_bps.unwrap_or(0.0));
        per_mt.push(MtMetrics {
            mt_id: mt,
            serving_sector: mts[mt].serving_sector,
            overall_bps: t.overall_bps,
            effective_bps: t.effective_bps,
            mean_latency_s: latency_per_mt[mt].mean_s(),
            p95_latency_s: latency_per_mt[mt].percentile_s(95.0),
            scheduled_ttis: scheduled_ttis[mt],
            delivered_bytes: buf.delivered_bytes,
            generated_bytes: buf.generated_bytes,
            backlog_bytes: buf.backlog_bytes(),
            first_arrival_s: buf.first_arrival_s,
            assignments: assignments[mt],
        });
    }

    let report = MetricsReport {
        mode: cfg.mode,
        seed: cfg.seed,
        duration_s: cfg.duration_s,
        per_mt,
        gm_overall_bps: geometric_mean(&overall_list),
        gm_effective_bps: geometric_mean(&effective_list),
        latency: LatencySummary::from_accum(&latency_all),
        cosched_counts,
        timeseries,
        audit,
        generated_bytes: generated,
        delivered_bytes: delivered,
        backlog_bytes: backlog,
        scheduler_bytes,
        intervals: interval_index,
        train: (cfg.mode == Mode::Train).then_some(TrainSummary {
            steps: train_steps,
            final_epsilon: epsilon_now,
            final_loss: last_loss,
        }),
    };

    if report.scheduler_bytes != report.delivered_bytes {
        return Err(SimError::InternalInvariant(format!(
            "scheduler bytes {} != delivered bytes {}",
            report.scheduler_bytes, report.delivered_bytes
        )));
    }
    if report.generated_bytes != report.delivered_bytes + report.backlog_bytes {
        return Err(SimError::InternalInvariant(
            "byte conservation violated".into(),
        ));
    }

    latency_csv.finish()?;
    train_csv.finish()?;
    schedule_csv.finish()?;
    states_csv.finish()?;

    let final_net: Option<Mlp> = match (cfg.mode, trainer) {
        (Mode::Train, Some(tr)) => Some(tr.online),
        (Mode::Eval, _) => qnet,
        _ => None,
    };
    if let Some(dir) = out {
        write_report_files(dir, cfg, &report)?;
        if cfg.mode == Mode::Train {
            if let Some(net) = final_net.as_ref() {
                save_checkpoint(&dir.join("qnet.ckpt"), net, cfg.discount, cfg.learning_rate)?;
            }
        }
    }
    Ok(RunOutput {
        report,
        qnet: final_net,
    })
}

fn write_report_files(dir: &Path, cfg: &SimConfig, report: &MetricsReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("per_mt_metrics.csv"))?);
    writeln!(
        w,
        "mt_id,overall_mbps,effective_mbps,mean_latency_ms,p95_latency_ms,scheduled_ttis"
    )?;
    for m in &report.per_mt {
        let eff = m
            .effective_bps
            .map_or_else(|| "nodata".to_string(), |v| sig6(v / 1e6));
        let mean = m
            .mean_latency_s
            .map_or_else(|| "nodata".to_string(), |v| sig6(v * 1e3));
        let p95 = m
            .p95_latency_s
            .map_or_else(|| "nodata".to_string(), |v| sig6(v * 1e3));
        writeln!(
            w,
            "{},{},{eff},{mean},{p95},{}",
            m.mt_id,
            sig6(m.overall_bps / 1e6),
            m.scheduled_ttis
        )?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("timeseries.csv"))?);
    writeln!(w, "t_s,avg_mt_thpt_mbps,epsilon")?;
    for p in &report.timeseries {
        writeln!(
            w,
            "{},{},{}",
            sig6(p.t_s),
            sig6(p.avg_mt_throughput_mbps),
            sig6(p.epsilon)
        )?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("coscheduled_cdf.csv"))?);
    writeln!(w, "k,cdf")?;
    for (k, cdf) in report.cosched_cdf() {
        writeln!(w, "{k},{}", sig6(cdf))?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("summary.txt"))?);
    write_summary(&mut w, cfg, report)?;
    w.flush()?;
    Ok(())
}

pub fn write_summary(w: &mut impl Write, cfg: &SimConfig, report: &MetricsReport) -> Result<()> {
    let vals = SummaryValues::from_report(report);
    let opt = |v: Option<f64>| v.map_or_else(|| "nodata".to_string(), sig6);
    writeln!(w, "mode={}", report.mode)?;
    writeln!(w, "seed={}", report.seed)?;
    writeln!(w, "duration_s={}", sig6(report.duration_s))?;
    writeln!(w, "mts={}", cfg.mt_count)?;
    writeln!(w, "gm_overall_mbps={}", opt(vals.gm_overall_mbps))?;
    writeln!(w, "gm_overall_excluded={}", report.gm_overall_bps.excluded)?;
    writeln!(w, "gm_effective_mbps={}", opt(vals.gm_effective_mbps))?;
    writeln!(
        w,
        "gm_effective_excluded={}",
        report.gm_effective_bps.excluded
    )?;
    writeln!(w, "latency_mean_ms={}", opt(vals.latency_mean_ms))?;
    writeln!(
        w,
        "latency_p50_ms={}",
        opt(report.latency.map(|l| l.p50_s * 1e3))
    )?;
    writeln!(w, "latency_p95_ms={}", opt(vals.latency_p95_ms))?;
    writeln!(
        w,
        "latency_p99_ms={}",
        opt(report.latency.map(|l| l.p99_s * 1e3))
    )?;
    writeln!(
        w,
        "packets_completed={}",
        report.latency.map_or(0, |l| l.count)
    )?;
    writeln!(w, "generated_bytes={}", report.generated_bytes)?;
    writeln!(w, "delivered_bytes={}", report.delivered_bytes)?;
    writeln!(w, "backlog_bytes={}", report.backlog_bytes)?;
    writeln!(w, "intervals={}", report.intervals)?;
    writeln!(w, "max_coscheduled={}", report.audit.max_coscheduled)?;
    writeln!(w, "pairing_violations={}", report.audit.pairing_violations)?;
    writeln!(w, "reward_violations={}", report.audit.reward_violations)?;
    if let Some(t) = report.train {
        writeln!(w, "train_steps={}", t.steps)?;
        writeln!(w, "final_epsilon={}", sig6(t.final_epsilon))?;
    }
    Ok(())
}

/// Compare two completed runs from their output directories and write the
/// comparison summary.
pub fn compare_dirs(baseline: &Path, candidate: &Path, out: &Path) -> Result<crate::metrics::Gains> {
    let base = crate::metrics::parse_summary(&std::fs::read_to_string(
        baseline.join("summary.txt"),
    )?)?;
    let cand = crate::metrics::parse_summary(&std::fs::read_to_string(
        candidate.join("summary.txt"),
    )?)?;
    let gains = crate::metrics::compare_values(&base, &cand);
    std::fs::create_dir_all(out)?;
    let mut w = BufWriter::new(File::create(out.join("comparison.txt"))?);
    let opt = |v: Option<f64>| v.map_or_else(|| "nodata".to_string(), sig6);
    writeln!(w, "baseline_dir={}", baseline.display())?;
    writeln!(w, "candidate_dir={}", candidate.display())?;
    writeln!(w, "gm_overall_gain_pct={}", opt(gains.gm_overall_gain_pct))?;
    writeln!(
        w,
        "gm_effective_gain_pct={}",
        opt(gains.gm_effective_gain_pct)
    )?;
    writeln!(w, "latency_mean_factor={}", opt(gains.latency_mean_factor))?;
    writeln!(w, "latency_p95_factor={}", opt(gains.latency_p95_factor))?;
    w.flush()?;
    Ok(gains)
}
