//! Run configuration: flat key-value config files, presets, and validation.
//!
//! The config format is one `key = value` pair per line, `#` starts a comment.
//! Unknown keys are rejected so typos cannot silently fall back to defaults.

use crate::error::{Result, SimError};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    Baseline,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "train" => Ok(Mode::Train),
            "eval" => Ok(Mode::Eval),
            "baseline" => Ok(Mode::Baseline),
            other => Err(SimError::Config(format!(
                "mode: expected train|eval|baseline, got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
            Mode::Baseline => "baseline",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossFn {
    Mse,
    Huber,
}

/// Scope of the reward normalization pool (the `max_j` in the reward).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardPool {
    Sector,
    Network,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    // deployment geometry
    pub sites: usize,
    pub inter_site_distance_m: f64,
    pub sectors_per_site: usize,
    pub panels_per_sector: usize, // M_p
    pub beams_per_panel: usize,   // L_p
    pub beams_azimuth: usize,     // L_az
    pub beams_elevation: usize,   // L_el
    pub elements_per_dim: usize,  // N (panel is N x N)
    pub element_gain_dbi: f64,
    pub element_spacing_wl: f64,

    // radio
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    pub scs_khz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub noise_density_dbm_hz: f64,
    pub shadowing_sigma_db: f64,
    pub min_pathloss_distance_m: f64,
    pub backlobe_suppression_db: f64,

    // beam management
    pub beam_switch_interval_ms: f64,
    pub correlation_threshold: f64,
    pub correlation_grid_deg: f64,
    pub correlation_floor_db: f64,
    pub elevation_range_deg: f64,

    // terminals and traffic
    pub mt_count: usize,
    pub mt_speed_kmh: f64,
    pub offered_load_mbps: f64,
    pub packet_bytes: u64,

    // scheduler
    pub pf_ema_ttis: f64,
    pub pf_rate_floor_bps: f64,
    pub se_cap_bps_hz: f64,

    // learning
    pub discount: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync_period: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub train_epochs: usize, // gradient steps per beam-switching interval
    pub net_input_dim: usize,
    pub net_hidden: Vec<usize>,
    pub loss_fn: LossFn,
    pub reward_pool: RewardPool,

    // run control
    pub duration_s: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::desk_preset()
    }
}

impl SimConfig {
    /// Desk-scale preset: one site, three sectors, 24 MTs, small codebook.
    /// Bandwidth is sized so that a sector is load-contended when its MTs end
    /// up serialized on one panel but comfortable when spread across panels.
    pub fn desk_preset() -> Self {
        SimConfig {
            sites: 1,
            inter_site_distance_m: 200.0,
            sectors_per_site: 3,
            panels_per_sector: 3,
            beams_per_panel: 8,
            beams_azimuth: 4,
            beams_elevation: 2,
            elements_per_dim: 4,
            element_gain_dbi: 5.0,
            element_spacing_wl: 0.5,
            carrier_ghz: 30.0,
            bandwidth_hz: 20e6,
            scs_khz: 60.0,
            tx_power_dbm: 40.0,
            noise_figure_db: 3.0,
            noise_density_dbm_hz: -174.0,
            shadowing_sigma_db: 4.0,
            min_pathloss_distance_m: 10.0,
            backlobe_suppression_db: 30.0,
            beam_switch_interval_ms: 40.0,
            correlation_threshold: 0.4,
            correlation_grid_deg: 1.0,
            correlation_floor_db: -50.0,
            elevation_range_deg: 30.0,
            mt_count: 24,
            mt_speed_kmh: 3.0,
            offered_load_mbps: 21.0,
            packet_bytes: 600,
            pf_ema_ttis: 100.0,
            pf_rate_floor_bps: 1e3,
            se_cap_bps_hz: 7.8,
            discount: 0.9,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 32,
            replay_capacity: 5000,
            target_sync_period: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            train_epochs: 4,
            net_input_dim: 72,
            net_hidden: vec![128, 256],
            loss_fn: LossFn::Mse,
            reward_pool: RewardPool::Sector,
            duration_s: 60.0,
            seed: 1,
            mode: Mode::Baseline,
        }
    }

    /// Full-scale preset matching the reference deployment (slow).
    pub fn full_preset() -> Self {
        SimConfig {
            sites: 7,
            beams_per_panel: 16,
            beams_azimuth: 8,
            beams_elevation: 2,
            elements_per_dim: 8,
            bandwidth_hz: 200e6,
            mt_count: 210,
            net_input_dim: 144,
            ..Self::desk_preset()
        }
    }

    pub fn beams_per_sector(&self) -> usize {
        self.panels_per_sector * self.beams_per_panel
    }

    pub fn sector_count(&self) -> usize {
        self.sites * self.sectors_per_site
    }

    pub fn tti_s(&self) -> f64 {
        // One 14-symbol slot: 1 ms at 15 kHz SCS, scaling inversely with SCS.
        15.0 / self.scs_khz * 1e-3
    }

    /// TTIs per beam-switching interval (the activation-counter cap).
    pub fn ttis_per_interval(&self) -> usize {
        (self.beam_switch_interval_ms * 1e-3 / self.tti_s()).round() as usize
    }

    pub fn rb_bandwidth_hz(&self) -> f64 {
        12.0 * self.scs_khz * 1e3
    }

    pub fn rb_count(&self) -> usize {
        (self.bandwidth_hz / self.rb_bandwidth_hz()).floor() as usize
    }

    pub fn offered_load_bps(&self) -> f64 {
        self.offered_load_mbps * 1e6
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Config(format!("{name}: must be positive, got {v}")))
            }
        }
        if self.sites == 0 || self.sites > 7 {
            return Err(SimError::Config(format!(
                "sites: expected 1..=7, got {}",
                self.sites
            )));
        }
        positive("inter_site_distance_m", self.inter_site_distance_m)?;
        if self.sectors_per_site != 3 {
            return Err(SimError::Config(format!(
                "sectors_per_site: only 3 is supported (120 degree sectors), got {}",
                self.sectors_per_site
            )));
        }
        if self.panels_per_sector == 0 {
            return Err(SimError::Config("panels_per_sector: must be >= 1".into()));
        }
        if self.beams_azimuth * self.beams_elevation != self.beams_per_panel {
            return Err(SimError::Config(format!(
                "beams_per_panel: {} is not beams_azimuth*beams_elevation = {}*{}",
                self.beams_per_panel, self.beams_azimuth, self.beams_elevation
            )));
        }
        if self.beams_azimuth > self.elements_per_dim || self.beams_elevation > self.elements_per_dim
        {
            return Err(SimError::Config(format!(
                "beams_azimuth/beams_elevation: DFT grid {}x{} exceeds panel size {0}x{0} \
                 (orthogonality requires L_az <= N and L_el <= N)",
                self.beams_azimuth, self.beams_elevation
            )));
        }
        positive("element_spacing_wl", self.element_spacing_wl)?;
        positive("carrier_ghz", self.carrier_ghz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("scs_khz", self.scs_khz)?;
        positive("shadowing_sigma_db", self.shadowing_sigma_db + 1.0)?; // sigma >= 0
        positive("min_pathloss_distance_m", self.min_pathloss_distance_m)?;
        positive("beam_switch_interval_ms", self.beam_switch_interval_ms)?;
        if !(0.0..=1.0).contains(&self.correlation_threshold) {
            return Err(SimError::Config(format!(
                "correlation_threshold: expected [0,1], got {}",
                self.correlation_threshold
            )));
        }
        if self.correlation_grid_deg < 0.01 {
            return Err(SimError::Config(
                "correlation_grid_deg: must be >= 0.01".into(),
            ));
        }
        positive("elevation_range_deg", self.elevation_range_deg)?;
        positive("mt_speed_kmh", self.mt_speed_kmh + 1.0)?; // speed >= 0
        if self.offered_load_mbps < 0.0 {
            return Err(SimError::Config("offered_load_mbps: must be >= 0".into()));
        }
        if self.packet_bytes == 0 {
            return Err(SimError::Config("packet_bytes: must be positive".into()));
        }
        positive("pf_ema_ttis", self.pf_ema_ttis)?;
        positive("pf_rate_floor_bps", self.pf_rate_floor_bps)?;
        positive("se_cap_bps_hz", self.se_cap_bps_hz)?;
        if !(0.0..1.0).contains(&self.discount) {
            return Err(SimError::Config(format!(
                "discount: expected [0,1), got {}",
                self.discount
            )));
        }
        positive("learning_rate", self.learning_rate)?;
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err(SimError::Config(format!(
                "batch_size: expected 1..=replay_capacity({}), got {}",
                self.replay_capacity, self.batch_size
            )));
        }
        if self.target_sync_period == 0 {
            return Err(SimError::Config("target_sync_period: must be >= 1".into()));
        }
        for (name, eps) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(SimError::Config(format!(
                    "{name}: expected [0,1], got {eps}"
                )));
            }
        }
        if self.train_epochs == 0 {
            return Err(SimError::Config("train_epochs: must be >= 1".into()));
        }
        let expected_input = 3 * self.beams_per_sector();
        if self.net_input_dim != expected_input {
            return Err(SimError::Config(format!(
                "net_input_dim: must equal 3*panels_per_sector*beams_per_panel = {expected_input}, got {}",
                self.net_input_dim
            )));
        }
        if self.net_hidden.is_empty() {
            return Err(SimError::Config("net_hidden: must list at least one layer".into()));
        }
        positive("duration_s", self.duration_s)?;
        if self.rb_count() == 0 {
            return Err(SimError::Config(
                "bandwidth_hz: too small for a single resource block".into(),
            ));
        }
        Ok(())
    }

    /// Parse a config file on top of the desk preset defaults.
    pub fn from_file(path: &Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_overrides(&text)
    }

    pub fn from_str_overrides(text: &str) -> Result<SimConfig> {
        let mut cfg = SimConfig::desk_preset();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn f(key: &str, v: &str) -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| SimError::Config(format!("{key}: not a number: '{v}'")))
        }
        fn u(key: &str, v: &str) -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| SimError::Config(format!("{key}: not a non-negative integer: '{v}'")))
        }
        match key {
            "sites" => self.sites = u(key, value)?,
            "inter_site_distance_m" => self.inter_site_distance_m = f(key, value)?,
            "sectors_per_site" => self.sectors_per_site = u(key, value)?,
            "panels_per_sector" => self.panels_per_sector = u(key, value)?,
            "beams_per_panel" => self.beams_per_panel = u(key, value)?,
            "beams_azimuth" => self.beams_azimuth = u(key, value)?,
            "beams_elevation" => self.beams_elevation = u(key, value)?,
            "elements_per_dim" => self.elements_per_dim = u(key, value)?,
            "element_gain_dbi" => self.element_gain_dbi = f(key, value)?,
            "element_spacing_wl" => self.element_spacing_wl = f(key, value)?,
            "carrier_ghz" => self.carrier_ghz = f(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = f(key, value)?,
            "scs_khz" => self.scs_khz = f(key, value)?,
            "tx_power_dbm" => self.tx_power_dbm = f(key, value)?,
            "noise_figure_db" => self.noise_figure_db = f(key, value)?,
            "noise_density_dbm_hz" => self.noise_density_dbm_hz = f(key, value)?,
            "shadowing_sigma_db" => self.shadowing_sigma_db = f(key, value)?,
            "min_pathloss_distance_m" => self.min_pathloss_distance_m = f(key, value)?,
            "backlobe_suppression_db" => self.backlobe_suppression_db = f(key, value)?,
            "beam_switch_interval_ms" => self.beam_switch_interval_ms = f(key, value)?,
            "correlation_threshold" => self.correlation_threshold = f(key, value)?,
            "correlation_grid_deg" => self.correlation_grid_deg = f(key, value)?,
            "correlation_floor_db" => self.correlation_floor_db = f(key, value)?,
            "elevation_range_deg" => self.elevation_range_deg = f(key, value)?,
            "mt_count" => self.mt_count = u(key, value)?,
            "mt_speed_kmh" => self.mt_speed_kmh = f(key, value)?,
            "offered_load_mbps" => self.offered_load_mbps = f(key, value)?,
            "packet_bytes" => {
                self.packet_bytes = value.parse::<u64>().map_err(|_| {
                    SimError::Config(format!("packet_bytes: not an integer: '{value}'"))
                })?
            }
            "pf_ema_ttis" => self.pf_ema_ttis = f(key, value)?,
            "pf_rate_floor_bps" => self.pf_rate_floor_bps = f(key, value)?,
            "se_cap_bps_hz" => self.se_cap_bps_hz = f(key, value)?,
            "discount" => self.discount = f(key, value)?,
            "learning_rate" => self.learning_rate = f(key, value)?,
            "adam_beta1" => self.adam_beta1 = f(key, value)?,
            "adam_beta2" => self.adam_beta2 = f(key, value)?,
            "adam_epsilon" => self.adam_epsilon = f(key, value)?,
            "batch_size" => self.batch_size = u(key, value)?,
            "replay_capacity" => self.replay_capacity = u(key, value)?,
            "target_sync_period" => self.target_sync_period = u(key, value)?,
            "epsilon_start" => self.epsilon_start = f(key, value)?,
            "epsilon_end" => self.epsilon_end = f(key, value)?,
            "train_epochs" => self.train_epochs = u(key, value)?,
            "net_input_dim" => self.net_input_dim = u(key, value)?,
            "net_hidden" => {
                let dims: Result<Vec<usize>> = value
                    .split(',')
                    .map(|d| u("net_hidden", d.trim()))
                    .collect();
                self.net_hidden = dims?;
            }
            "loss_fn" => {
                self.loss_fn = match value {
                    "mse" => LossFn::Mse,
                    "huber" => LossFn::Huber,
                    other => {
                        return Err(SimError::Config(format!(
                            "loss_fn: expected mse|huber, got '{other}'"
                        )))
                    }
                }
            }
            "reward_pool" => {
                self.reward_pool = match value {
                    "sector" => RewardPool::Sector,
                    "network" => RewardPool::Network,
                    other => {
                        return Err(SimError::Config(format!(
                            "reward_pool: expected sector|network, got '{other}'"
                        )))
                    }
                }
            }
            "duration_s" => self.duration_s = f(key, value)?,
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| SimError::Config(format!("seed: not an integer: '{value}'")))?
            }
            "mode" => self.mode = Mode::parse(value)?,
            unknown => {
                return Err(SimError::Config(format!("unknown key '{unknown}'")));
            }
        }
        Ok(())
    }
}
