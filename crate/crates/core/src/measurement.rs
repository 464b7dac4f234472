//! Beam-sweep measurement processing: RSRP clipping/normalization, per-sector
//! beam activation history, the cumulative cross-correlation feature, and
//! assembly of the agent state vector [z, h, c].

use crate::codebook::CorrelationMatrix;
use crate::error::{Result, SimError};

pub const RSRP_CLIP_LOW_DBM: f64 = -140.0;
pub const RSRP_CLIP_HIGH_DBM: f64 = -44.0;
pub const RSRP_RANGE_DB: f64 = RSRP_CLIP_HIGH_DBM - RSRP_CLIP_LOW_DBM;

/// One terminal's sweep report over all B beams of its serving sector.
#[derive(Debug, Clone)]
pub struct RsrpReport {
    pub mt: usize,
    pub raw_dbm: Vec<f64>,
    pub normalized: Vec<f64>,
    pub tti: u64,
}

impl RsrpReport {
    pub fn new(mt: usize, raw_dbm: Vec<f64>, tti: u64) -> Result<RsrpReport> {
        let normalized = clip_and_normalize(&raw_dbm)?;
        Ok(RsrpReport {
            mt,
            raw_dbm,
            normalized,
            tti,
        })
    }
}

/// Clip raw RSRP into the reporting range and map it onto [0,1].
pub fn clip_and_normalize(raw_dbm: &[f64]) -> Result<Vec<f64>> {
    raw_dbm
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(SimError::Validation(format!(
                    "clip_and_normalize: non-finite RSRP {v}"
                )));
            }
            Ok((v.clamp(RSRP_CLIP_LOW_DBM, RSRP_CLIP_HIGH_DBM) - RSRP_CLIP_LOW_DBM) / RSRP_RANGE_DB)
        })
        .collect()
}

/// Per-sector scheduled-beam counters over one beam-switching interval.
#[derive(Debug, Clone)]
pub struct ActivationHistory {
    counts: Vec<u32>,
    /// TTIs per interval; upper bound for any single counter.
    cap: u32,
}

impl ActivationHistory {
    pub fn new(beams: usize, ttis_per_interval: u32) -> ActivationHistory {
        ActivationHistory {
            counts: vec![0; beams],
            cap: ttis_per_interval,
        }
    }

    /// Record the beams scheduled in one TTI (at most one count per beam per TTI).
    pub fn record(&mut self, scheduled_beams: &[usize]) -> Result<()> {
        for &b in scheduled_beams {
            if b >= self.counts.len() {
                return Err(SimError::Validation(format!(
                    "record_activation: beam {b} out of range"
                )));
            }
            if self.counts[b] >= self.cap {
                return Err(SimError::InternalInvariant(format!(
                    "activation count for beam {b} would exceed {} TTIs per interval",
                    self.cap
                )));
            }
            self.counts[b] += 1;
        }
        Ok(())
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.cap as f64)
            .collect()
    }

    pub fn reset(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
    }
}

/// Sum cross-correlation of every candidate beam against the beams already
/// assigned to higher-priority terminals, scaled by 1/(M_p - 1) so the
/// feature stays in [0,1]. Empty assignment yields the zero vector.
pub fn cumulative_crosscorr(
    assigned: &[usize],
    rho: &CorrelationMatrix,
    panels_per_sector: usize,
) -> Result<Vec<f64>> {
    let b = rho.size();
    for (i, &x) in assigned.iter().enumerate() {
        if x >= b {
            return Err(SimError::Validation(format!(
                "cumulative_crosscorr: beam {x} out of range"
            )));
        }
        if assigned[..i].contains(&x) {
            return Err(SimError::Validation(format!(
                "cumulative_crosscorr: duplicate beam {x} in assigned set"
            )));
        }
    }
    if assigned.is_empty() {
        return Ok(vec![0.0; b]);
    }
    let denom = (panels_per_sector.saturating_sub(1)).max(1) as f64;
    Ok((0..b)
        .map(|cand| {
            let sum: f64 = assigned.iter().map(|&j| rho.get(cand, j)).sum();
            (sum / denom).clamp(0.0, 1.0)
        })
        .collect())
}

/// The MDP state: normalized RSRP, activation history, and correlation
/// context, flattened in that fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl AgentState {
    pub fn beams(&self) -> usize {
        self.z.len()
    }

    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.z.len());
        out.extend_from_slice(&self.z);
        out.extend_from_slice(&self.h);
        out.extend_from_slice(&self.c);
        out
    }
}

pub fn assemble_state(z: Vec<f64>, h: Vec<f64>, c: Vec<f64>) -> Result<AgentState> {
    if z.len() != h.len() || z.len() != c.len() {
        return Err(SimError::Validation(format!(
            "assemble_state: component lengths differ (z={}, h={}, c={})",
            z.len(),
            h.len(),
            c.len()
        )));
    }
    for (name, vec) in [("z", &z), ("h", &h), ("c", &c)] {
        for &v in vec.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::Validation(format!(
                    "assemble_state: {name} component {v} outside [0,1]"
                )));
            }
        }
    }
    Ok(AgentState { z, h, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::CorrelationMatrix;
    use proptest::prelude::*;

    #[test]
    fn normalize_endpoints_and_midpoint() {
        let out = clip_and_normalize(&[-140.0, -92.0, -44.0]).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 0.5);
        assert_eq!(out[2], 1.0);
    }

    #[test]
    fn normalize_clips_out_of_range() {
        let out = clip_and_normalize(&[-200.0, 0.0]).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 1.0);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        assert!(clip_and_normalize(&[f64::NAN]).is_err());
        assert!(clip_and_normalize(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn history_zero_full_and_half() {
        let mut h = ActivationHistory::new(4, 160);
        for _ in 0..160 {
            h.record(&[1]).unwrap();
        }
        for _ in 0..80 {
            h.record(&[2]).unwrap();
        }
        let n = h.normalized();
        assert_eq!(n[0], 0.0);
        assert_eq!(n[1], 1.0);
        assert_eq!(n[2], 0.5);
    }

    #[test]
    fn history_overflow_is_internal_invariant() {
        let mut h = ActivationHistory::new(2, 3);
        for _ in 0..3 {
            h.record(&[0]).unwrap();
        }
        let err = h.record(&[0]).unwrap_err();
        assert!(matches!(err, SimError::InternalInvariant(_)));
    }

    #[test]
    fn history_reset_starts_from_zero() {
        let mut h = ActivationHistory::new(2, 10);
        h.record(&[0, 1]).unwrap();
        h.reset();
        assert!(h.normalized().iter().all(|&v| v == 0.0));
    }

    fn rho3() -> CorrelationMatrix {
        // 3 beams with known off-diagonal values.
        CorrelationMatrix::from_raw(
            3,
            vec![1.0, 0.2, 0.7, 0.2, 1.0, 0.4, 0.7, 0.4, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn crosscorr_empty_assignment_is_zero() {
        let c = cumulative_crosscorr(&[], &rho3(), 3).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn crosscorr_single_assignment_unit_diagonal() {
        let c = cumulative_crosscorr(&[1], &rho3(), 3).unwrap();
        assert_eq!(c[1], 0.5); // rho[1][1]/(M_p-1)
        assert_eq!(c[0], 0.1);
        assert_eq!(c[2], 0.2);
    }

    #[test]
    fn crosscorr_matches_brute_force_sum() {
        let rho = rho3();
        let c = cumulative_crosscorr(&[0, 2], &rho, 3).unwrap();
        for cand in 0..3 {
            let direct = (rho.get(cand, 0) + rho.get(cand, 2)) / 2.0;
            assert!((c[cand] - direct.clamp(0.0, 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn crosscorr_rejects_duplicates() {
        assert!(cumulative_crosscorr(&[1, 1], &rho3(), 3).is_err());
    }

    #[test]
    fn state_flatten_order_and_length() {
        let z = vec![0.1; 48];
        let h = vec![0.2; 48];
        let c = vec![0.3; 48];
        let s = assemble_state(z, h, c).unwrap();
        let f = s.flattened();
        assert_eq!(f.len(), 144);
        assert!(f[..48].iter().all(|&v| v == 0.1));
        assert!(f[48..96].iter().all(|&v| v == 0.2));
        assert!(f[96..].iter().all(|&v| v == 0.3));
    }

    #[test]
    fn state_all_zero() {
        let s = assemble_state(vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]).unwrap();
        assert!(s.flattened().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn state_rejects_length_mismatch() {
        assert!(assemble_state(vec![0.0; 4], vec![0.0; 3], vec![0.0; 4]).is_err());
    }

    #[test]
    fn state_permutation_equivariant() {
        let z = vec![0.1, 0.2, 0.3];
        let h = vec![0.4, 0.5, 0.6];
        let c = vec![0.7, 0.8, 0.9];
        let perm = [2usize, 0, 1];
        let direct = assemble_state(
            perm.iter().map(|&i| z[i]).collect(),
            perm.iter().map(|&i| h[i]).collect(),
            perm.iter().map(|&i| c[i]).collect(),
        )
        .unwrap()
        .flattened();
        let orig = assemble_state(z, h, c).unwrap().flattened();
        for (block, _) in [(0usize, "z"), (1, "h"), (2, "c")] {
            for (i, &p) in perm.iter().enumerate() {
                assert_eq!(direct[block * 3 + i], orig[block * 3 + p]);
            }
        }
    }

    proptest! {
        #[test]
        fn normalization_round_trips(raw in proptest::collection::vec(-140.0f64..=-44.0, 1..64)) {
            let norm = clip_and_normalize(&raw).unwrap();
            for (r, n) in raw.iter().zip(norm.iter()) {
                prop_assert!((n * RSRP_RANGE_DB + RSRP_CLIP_LOW_DBM - r).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(n));
            }
        }
    }
}
