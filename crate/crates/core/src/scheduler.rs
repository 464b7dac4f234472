//! Per-TTI proportional-fair MU-MIMO scheduling: correlation-threshold user
//! pairing under the one-beam-per-panel constraint, SINR evaluation against a
//! one-TTI-stale interference snapshot, and capped-Shannon rate mapping.

use crate::codebook::CorrelationMatrix;
use crate::error::{Result, SimError};
use crate::measurement::ActivationHistory;
use crate::traffic::{PacketBuffer, PacketRecord};

/// Exponential-moving-average throughput per terminal for PF priorities.
#[derive(Debug, Clone)]
pub struct PfState {
    avg_bps: Vec<f64>,
    alpha: f64,
    floor_bps: f64,
}

impl PfState {
    pub fn new(mt_count: usize, ema_ttis: f64, floor_bps: f64) -> PfState {
        PfState {
            avg_bps: vec![0.0; mt_count],
            alpha: 1.0 / ema_ttis,
            floor_bps,
        }
    }

    pub fn avg_bps(&self, mt: usize) -> f64 {
        self.avg_bps[mt]
    }

    pub fn priority(&self, mt: usize, inst_rate_bps: f64) -> f64 {
        pf_priority(inst_rate_bps, self.avg_bps[mt], self.floor_bps)
    }

    /// Fold one TTI's served rate into the average (0 for unscheduled TTIs).
    pub fn update(&mut self, mt: usize, rate_bps: f64) {
        self.avg_bps[mt] = (1.0 - self.alpha) * self.avg_bps[mt] + self.alpha * rate_bps;
    }
}

pub fn pf_priority(inst_rate_bps: f64, avg_bps: f64, floor_bps: f64) -> f64 {
    inst_rate_bps / avg_bps.max(floor_bps)
}

#[derive(Debug, Clone, Copy)]
pub struct SinrResult {
    pub signal_mw: f64,
    pub intra_mw: f64,
    pub inter_mw: f64,
    pub noise_mw: f64,
}

impl SinrResult {
    pub fn sinr_db(&self) -> f64 {
        10.0 * (self.signal_mw / (self.intra_mw + self.inter_mw + self.noise_mw)).log10()
    }
}

/// SINR for one scheduled terminal. Co-scheduled same-sector beams leak power
/// proportional to rho^2; other-sector beams contribute their pattern-weighted
/// received power. Every term scales with the allocated bandwidth share, so
/// the ratio itself is share-invariant.
pub fn compute_sinr(
    own_rx_mw: f64,
    co_scheduled: &[(f64, f64)], // (rho vs own beam, rx power of that beam at this MT)
    inter_rx_mw: f64,
    noise_fullband_mw: f64,
    rb_share: f64,
) -> SinrResult {
    let intra: f64 = co_scheduled.iter().map(|(rho, rx)| rho * rho * rx).sum();
    SinrResult {
        signal_mw: own_rx_mw * rb_share,
        intra_mw: intra * rb_share,
        inter_mw: inter_rx_mw * rb_share,
        noise_mw: noise_fullband_mw * rb_share,
    }
}

/// Capped-Shannon link-to-system mapping: bytes deliverable in one TTI.
pub fn rate_bytes(sinr_db: f64, rb_count: usize, rb_bw_hz: f64, tti_s: f64, se_cap: f64) -> u64 {
    let sinr_lin = 10f64.powf(sinr_db / 10.0);
    let se = (1.0 + sinr_lin).log2().min(se_cap);
    (se * rb_bw_hz * rb_count as f64 * tti_s / 8.0).floor() as u64
}

/// Greedy pairing in priority order: a candidate is admitted iff its serving
/// beam's panel is still free and its correlation against every admitted beam
/// stays within the threshold. Stops at `panels` admitted terminals.
pub fn pair_mts(
    ranked_beams: &[usize],
    rho: &CorrelationMatrix,
    threshold: f64,
    panels: usize,
    beams_per_panel: usize,
) -> Vec<usize> {
    let mut admitted: Vec<usize> = Vec::with_capacity(panels);
    for (idx, &beam) in ranked_beams.iter().enumerate() {
        if admitted.len() >= panels {
            break;
        }
        let panel = beam / beams_per_panel;
        let panel_taken = admitted
            .iter()
            .any(|&a| ranked_beams[a] / beams_per_panel == panel);
        if panel_taken {
            continue;
        }
        let correlated = admitted
            .iter()
            .any(|&a| rho.get(beam, ranked_beams[a]) > threshold);
        if correlated {
            continue;
        }
        admitted.push(idx);
    }
    admitted
}

#[derive(Debug, Clone)]
pub struct ScheduleEntry {
    pub mt: usize,
    pub beam: usize,
    pub rb_count: usize,
    pub sinr_db: f64,
    /// Bytes actually drained from the terminal's buffer this TTI.
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct ScheduleDecision {
    pub tti: u64,
    pub sector: usize,
    pub entries: Vec<ScheduleEntry>,
}

impl ScheduleDecision {
    /// Structural invariants: one beam per panel, co-scheduling cap, pairing
    /// correlation within threshold.
    pub fn verify(
        &self,
        rho: &CorrelationMatrix,
        threshold: f64,
        panels: usize,
        beams_per_panel: usize,
    ) -> Result<()> {
        if self.entries.len() > panels {
            return Err(SimError::InternalInvariant(format!(
                "tti {}: {} co-scheduled terminals exceeds {panels} panels",
                self.tti,
                self.entries.len()
            )));
        }
        for (i, a) in self.entries.iter().enumerate() {
            for b in self.entries.iter().skip(i + 1) {
                if a.beam / beams_per_panel == b.beam / beams_per_panel {
                    return Err(SimError::InternalInvariant(format!(
                        "tti {}: beams {} and {} share a panel",
                        self.tti, a.beam, b.beam
                    )));
                }
                if rho.get(a.beam, b.beam) > threshold {
                    return Err(SimError::InternalInvariant(format!(
                        "tti {}: paired beams {} and {} exceed rho threshold",
                        self.tti, a.beam, b.beam
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything one sector needs for one scheduling tick. Per-terminal tables
/// are indexed by global terminal id.
pub struct TtiInputs<'a> {
    pub tti: u64,
    pub sector: usize,
    /// Terminals attached to this sector.
    pub mt_ids: &'a [usize],
    /// Serving beam per terminal (sector-local index), fixed for the interval.
    pub serving_beams: &'a [usize],
    /// Received power of every sector beam at each terminal, mW.
    pub serv_rx_mw: &'a [Vec<f64>],
    /// Stale inter-sector interference per terminal, mW.
    pub inter_mw: &'a [f64],
    pub noise_fullband_mw: f64,
    pub rho: &'a CorrelationMatrix,
    pub pairing_threshold: f64,
    pub panels: usize,
    pub beams_per_panel: usize,
    pub rb_total: usize,
    pub rb_bw_hz: f64,
    pub tti_s: f64,
    pub se_cap: f64,
    /// Completion timestamp for packets drained this TTI (TTI end).
    pub now_s: f64,
}

/// One scheduling tick for one sector: rank backlogged terminals by PF
/// priority, pair them, split resource blocks equally, drain buffers, update
/// the PF average for every attached terminal, and record beam activations.
pub fn run_tti(
    inp: &TtiInputs,
    pf: &mut PfState,
    buffers: &mut [PacketBuffer],
    history: &mut ActivationHistory,
    mut completed: impl FnMut(usize, PacketRecord),
) -> Result<ScheduleDecision> {
    struct Candidate {
        mt: usize,
        beam: usize,
        priority: f64,
    }
    let full_band_hz = inp.rb_bw_hz * inp.rb_total as f64;
    let mut candidates: Vec<Candidate> = Vec::with_capacity(inp.mt_ids.len());
    for &mt in inp.mt_ids {
        if !buffers[mt].is_backlogged() {
            continue;
        }
        let beam = inp.serving_beams[mt];
        let su = compute_sinr(
            inp.serv_rx_mw[mt][beam],
            &[],
            inp.inter_mw[mt],
            inp.noise_fullband_mw,
            1.0,
        );
        let se = (1.0 + 10f64.powf(su.sinr_db() / 10.0)).log2().min(inp.se_cap);
        let su_rate_bps = se * full_band_hz;
        candidates.push(Candidate {
            mt,
            beam,
            priority: pf.priority(mt, su_rate_bps),
        });
    }
    candidates.sort_by(|a, b| {
        b.priority
            .partial_cmp(&a.priority)
            .unwrap()
            .then(a.mt.cmp(&b.mt))
    });

    let ranked_beams: Vec<usize> = candidates.iter().map(|c| c.beam).collect();
    let admitted = pair_mts(
        &ranked_beams,
        inp.rho,
        inp.pairing_threshold,
        inp.panels,
        inp.beams_per_panel,
    );

    let mut entries = Vec::with_capacity(admitted.len());
    if !admitted.is_empty() {
        let n = admitted.len();
        let base = inp.rb_total / n;
        let rem = inp.rb_total % n;
        for (slot, &idx) in admitted.iter().enumerate() {
            let cand = &candidates[idx];
            let rb_count = base + usize::from(slot < rem);
            let co: Vec<(f64, f64)> = admitted
                .iter()
                .filter(|&&other| other != idx)
                .map(|&other| {
                    let ob = candidates[other].beam;
                    (inp.rho.get(cand.beam, ob), inp.serv_rx_mw[cand.mt][ob])
                })
                .collect();
            let sinr = compute_sinr(
                inp.serv_rx_mw[cand.mt][cand.beam],
                &co,
                inp.inter_mw[cand.mt],
                inp.noise_fullband_mw,
                rb_count as f64 / inp.rb_total as f64,
            );
            let sinr_db = sinr.sinr_db();
            let capacity = rate_bytes(sinr_db, rb_count, inp.rb_bw_hz, inp.tti_s, inp.se_cap);
            let before = buffers[cand.mt].backlog_bytes();
            for rec in buffers[cand.mt].drain(capacity, inp.now_s) {
                completed(cand.mt, rec);
            }
            let bytes = before - buffers[cand.mt].backlog_bytes();
            entries.push(ScheduleEntry {
                mt: cand.mt,
                beam: cand.beam,
                rb_count,
                sinr_db,
                bytes,
            });
        }
    }

    // PF averages move for every attached terminal, scheduled or not.
    for &mt in inp.mt_ids {
        let rate = entries
            .iter()
            .find(|e| e.mt == mt)
            .map_or(0.0, |e| e.bytes as f64 * 8.0 / inp.tti_s);
        pf.update(mt, rate);
    }
    if !entries.is_empty() {
        let beams: Vec<usize> = entries.iter().map(|e| e.beam).collect();
        history.record(&beams)?;
    }
    Ok(ScheduleDecision {
        tti: inp.tti,
        sector: inp.sector,
        entries,
    })
}
