//! Beam assignment at each beam-switching interval: legacy max-RSRP selection,
//! epsilon-greedy selection over Q-values, the sequential per-terminal
//! assignment pass with cumulative correlation context, reward computation,
//! and transition bookkeeping for training.

use crate::codebook::CorrelationMatrix;
use crate::ddqn::{argmax, Experience, Mlp};
use crate::error::{Result, SimError};
use crate::measurement::{assemble_state, cumulative_crosscorr, AgentState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyTag {
    Baseline,
    RlTrain,
    RlEval,
}

/// Beam choice per terminal for one beam-switching interval.
#[derive(Debug, Clone)]
pub struct BeamAssignment {
    pub interval: u64,
    /// (mt id, sector-local beam index) in assignment order.
    pub chosen: Vec<(usize, usize)>,
    pub policy_tag: PolicyTag,
}

/// Legacy selection: argmax over raw RSRP, ties to the lowest beam index.
pub fn baseline_select(raw_rsrp_dbm: &[f64]) -> usize {
    argmax(raw_rsrp_dbm)
}

/// Epsilon-greedy selection over the Q-network output.
pub fn rl_select(
    state: &AgentState,
    qnet: &Mlp,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let beams = qnet.output_dim();
    if epsilon > 0.0 && rng.gen_range(0.0..1.0) < epsilon {
        return Ok(rng.gen_range(0..beams));
    }
    let q = qnet.forward(&state.flattened())?;
    Ok(argmax(&q))
}

/// Policy plugged into the assignment pass.
pub trait BeamSelector {
    fn tag(&self) -> PolicyTag;
    fn select(&mut self, raw_rsrp_dbm: &[f64], state: &AgentState) -> Result<usize>;
}

pub struct BaselineSelector;

impl BeamSelector for BaselineSelector {
    fn tag(&self) -> PolicyTag {
        PolicyTag::Baseline
    }

    fn select(&mut self, raw_rsrp_dbm: &[f64], _state: &AgentState) -> Result<usize> {
        Ok(baseline_select(raw_rsrp_dbm))
    }
}

pub struct RlSelector<'a> {
    pub qnet: &'a Mlp,
    pub epsilon: f64,
    pub rng: &'a mut ChaCha8Rng,
    pub training: bool,
}

impl BeamSelector for RlSelector<'_> {
    fn tag(&self) -> PolicyTag {
        if self.training {
            PolicyTag::RlTrain
        } else {
            PolicyTag::RlEval
        }
    }

    fn select(&mut self, _raw_rsrp_dbm: &[f64], state: &AgentState) -> Result<usize> {
        rl_select(state, self.qnet, self.epsilon, self.rng)
    }
}

/// Input for one terminal in the assignment pass, already ordered by
/// scheduling priority (descending PF average, ties by id).
pub struct AssignInput<'a> {
    pub mt: usize,
    pub raw_rsrp_dbm: &'a [f64],
    pub z: &'a [f64],
    /// Previous completed interval's normalized activation history of the
    /// terminal's sector.
    pub h: &'a [f64],
}

/// Sequential assignment for one sector. Each terminal's correlation context
/// is built from the most recent assignments already made in this pass,
/// capped at panels-1 beams.
pub fn assign_interval(
    interval: u64,
    ordered: &[AssignInput<'_>],
    rho: &CorrelationMatrix,
    panels: usize,
    selector: &mut dyn BeamSelector,
) -> Result<(BeamAssignment, Vec<(usize, AgentState, usize)>)> {
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(ordered.len());
    let mut log = Vec::with_capacity(ordered.len());
    for input in ordered {
        let recent: Vec<usize> = {
            let mut seen = Vec::new();
            for &(_, beam) in chosen.iter().rev() {
                if seen.len() >= panels.saturating_sub(1) {
                    break;
                }
                if !seen.contains(&beam) {
                    seen.push(beam);
                }
            }
            seen
        };
        let c = cumulative_crosscorr(&recent, rho, panels)?;
        let state = assemble_state(input.z.to_vec(), input.h.to_vec(), c)?;
        let beam = selector.select(input.raw_rsrp_dbm, &state)?;
        chosen.push((input.mt, beam));
        log.push((input.mt, state, beam));
    }
    Ok((
        BeamAssignment {
            interval,
            chosen,
            policy_tag: selector.tag(),
        },
        log,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct RewardSample {
    pub mt: usize,
    pub delivered_bytes: u64,
    pub reward: f64,
}

/// Delivered-bytes rewards normalized by the pool maximum. An all-zero pool
/// yields zero rewards for everyone.
pub fn compute_rewards(delivered: &[(usize, u64)]) -> Vec<RewardSample> {
    let max = delivered.iter().map(|&(_, b)| b).max().unwrap_or(0);
    delivered
        .iter()
        .map(|&(mt, bytes)| RewardSample {
            mt,
            delivered_bytes: bytes,
            reward: if max == 0 {
                0.0
            } else {
                bytes as f64 / max as f64
            },
        })
        .collect()
}

/// Pair the previous interval's (state, action) log with its rewards and the
/// states observed at the next boundary. Logs must line up terminal by
/// terminal.
pub fn close_transitions(
    prev_log: &[(usize, AgentState, usize)],
    rewards: &[RewardSample],
    next_states: &[(usize, AgentState)],
    done: bool,
) -> Result<Vec<Experience>> {
    if prev_log.len() != rewards.len() || prev_log.len() != next_states.len() {
        return Err(SimError::Validation(format!(
            "close_transitions: misaligned logs ({} states, {} rewards, {} next)",
            prev_log.len(),
            rewards.len(),
            next_states.len()
        )));
    }
    prev_log
        .iter()
        .zip(rewards.iter())
        .zip(next_states.iter())
        .map(|(((mt, state, action), reward), (next_mt, next_state))| {
            if mt != &reward.mt || mt != next_mt {
                return Err(SimError::Validation(format!(
                    "close_transitions: terminal mismatch ({mt} vs {} vs {next_mt})",
                    reward.mt
                )));
            }
            if !(0.0..=1.0).contains(&reward.reward) {
                return Err(SimError::InternalInvariant(format!(
                    "reward {} outside [0,1]",
                    reward.reward
                )));
            }
            Ok(Experience {
                state: state.flattened(),
                action: *action,
                reward: reward.reward,
                next_state: next_state.flattened(),
                done,
            })
        })
        .collect()
}
