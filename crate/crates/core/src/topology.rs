//! Multi-cell layout, terminal placement/mobility, and the large-scale channel:
//! parametric pathloss, per-(MT, sector) log-normal shadowing frozen for the
//! whole run, and beam-pattern receive power.

use crate::codebook::GobCodebook;
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const SPEED_KMH_TO_MPS: f64 = 1000.0 / 3600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn distance(&self, other: &Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Regular hexagonal service region (intersection of six half-planes).
#[derive(Debug, Clone, Copy)]
pub struct HexRegion {
    pub center: Vec2,
    pub circumradius: f64,
}

// Outward normals of the six edges, one every 60 degrees.
const HEX_NORMAL_ANGLES_DEG: [f64; 6] = [0.0, 60.0, 120.0, 180.0, 240.0, 300.0];

impl HexRegion {
    pub fn apothem(&self) -> f64 {
        self.circumradius * 3f64.sqrt() / 2.0
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let a = self.apothem();
        HEX_NORMAL_ANGLES_DEG.iter().all(|deg| {
            let (s, c) = deg.to_radians().sin_cos();
            (p.x - self.center.x) * c + (p.y - self.center.y) * s <= a + 1e-9
        })
    }

    /// Specular reflection of a point (and its heading) back into the region.
    /// Reflects across the most-violated edge repeatedly; bounded iteration
    /// because each reflection strictly reduces the violation for sane steps.
    pub fn reflect(&self, mut p: Vec2, mut heading: f64) -> (Vec2, f64) {
        for _ in 0..16 {
            let a = self.apothem();
            let mut worst: Option<(f64, f64, f64)> = None; // (excess, nx, ny)
            for deg in HEX_NORMAL_ANGLES_DEG {
                let (s, c) = deg.to_radians().sin_cos();
                let excess = (p.x - self.center.x) * c + (p.y - self.center.y) * s - a;
                if excess > 0.0 && worst.map_or(true, |(w, _, _)| excess > w) {
                    worst = Some((excess, c, s));
                }
            }
            match worst {
                None => break,
                Some((excess, nx, ny)) => {
                    p.x -= 2.0 * excess * nx;
                    p.y -= 2.0 * excess * ny;
                    let (vy, vx) = heading.sin_cos();
                    let dot = vx * nx + vy * ny;
                    heading = (vy - 2.0 * dot * ny).atan2(vx - 2.0 * dot * nx);
                }
            }
        }
        (p, heading)
    }
}

#[derive(Debug, Clone)]
pub struct NetworkLayout {
    pub sites: Vec<Vec2>,
    pub inter_site_distance_m: f64,
    pub sectors_per_site: usize,
    /// Boresight of each sector within a site, global azimuth degrees.
    pub sector_boresights_deg: Vec<f64>,
    pub panels_per_sector: usize,
    /// Panel boresight offsets within a sector, degrees relative to the sector boresight.
    pub panel_boresights_deg: Vec<f64>,
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub min_pathloss_distance_m: f64,
    pub shadowing_sigma_db: f64,
    pub region: HexRegion,
}

impl NetworkLayout {
    pub fn from_config(cfg: &SimConfig) -> Result<NetworkLayout> {
        let isd = cfg.inter_site_distance_m;
        let mut sites = vec![Vec2::new(0.0, 0.0)];
        for k in 0..cfg.sites.saturating_sub(1) {
            let ang = (60.0 * k as f64).to_radians();
            sites.push(Vec2::new(isd * ang.cos(), isd * ang.sin()));
        }
        let sector_boresights_deg: Vec<f64> = (0..cfg.sectors_per_site)
            .map(|s| 360.0 * s as f64 / cfg.sectors_per_site as f64)
            .collect();
        for w in sector_boresights_deg.windows(2) {
            if (w[1] - w[0] - 120.0).abs() > 1e-9 {
                return Err(SimError::Config(
                    "sector boresights must be 120 degrees apart".into(),
                ));
            }
        }
        // Panels evenly fan out over the 120-degree sector.
        let m_p = cfg.panels_per_sector;
        let panel_boresights_deg: Vec<f64> = (0..m_p)
            .map(|p| (p as f64 - (m_p as f64 - 1.0) / 2.0) * 120.0 / m_p as f64)
            .collect();
        let max_site_dist = sites
            .iter()
            .map(|s| s.distance(&Vec2::new(0.0, 0.0)))
            .fold(0.0, f64::max);
        let region = HexRegion {
            center: Vec2::new(0.0, 0.0),
            circumradius: max_site_dist + isd / 3f64.sqrt(),
        };
        Ok(NetworkLayout {
            sites,
            inter_site_distance_m: isd,
            sectors_per_site: cfg.sectors_per_site,
            sector_boresights_deg,
            panels_per_sector: m_p,
            panel_boresights_deg,
            carrier_ghz: cfg.carrier_ghz,
            bandwidth_hz: cfg.bandwidth_hz,
            tx_power_dbm: cfg.tx_power_dbm,
            noise_density_dbm_hz: cfg.noise_density_dbm_hz,
            noise_figure_db: cfg.noise_figure_db,
            min_pathloss_distance_m: cfg.min_pathloss_distance_m,
            shadowing_sigma_db: cfg.shadowing_sigma_db,
            region,
        })
    }

    pub fn sector_count(&self) -> usize {
        self.sites.len() * self.sectors_per_site
    }

    pub fn sector_site(&self, sector: usize) -> usize {
        sector / self.sectors_per_site
    }

    pub fn sector_position(&self, sector: usize) -> Vec2 {
        self.sites[self.sector_site(sector)]
    }

    /// Global boresight azimuth of a sector in degrees.
    pub fn sector_boresight_deg(&self, sector: usize) -> f64 {
        self.sector_boresights_deg[sector % self.sectors_per_site]
    }
}

#[derive(Debug, Clone)]
pub struct MobileTerminal {
    pub id: usize,
    pub position: Vec2,
    pub speed_kmh: f64,
    pub heading_rad: f64,
    pub serving_sector: usize,
    /// Sector-local beam index, refreshed every beam-switching interval.
    pub serving_beam: usize,
}

/// Large-scale link snapshot: pathloss follows the terminals, shadowing is
/// frozen per (MT, sector) for the whole run.
#[derive(Debug, Clone)]
pub struct LinkState {
    /// [mt][sector] pathloss in dB.
    pub pathloss_db: Vec<Vec<f64>>,
    /// [mt][sector] shadowing in dB.
    pub shadowing_db: Vec<Vec<f64>>,
    /// [mt][sector] azimuth of departure, global degrees.
    pub aod_deg: Vec<Vec<f64>>,
}

impl LinkState {
    pub fn compute(layout: &NetworkLayout, mts: &[MobileTerminal], seed: u64) -> LinkState {
        let n_sec = layout.sector_count();
        let mut pathloss_db = Vec::with_capacity(mts.len());
        let mut shadowing_db = Vec::with_capacity(mts.len());
        let mut aod_deg = Vec::with_capacity(mts.len());
        for mt in mts {
            let mut pl = Vec::with_capacity(n_sec);
            let mut sh = Vec::with_capacity(n_sec);
            let mut aod = Vec::with_capacity(n_sec);
            for s in 0..n_sec {
                let site = layout.sector_position(s);
                let d = site.distance(&mt.position).max(layout.min_pathloss_distance_m);
                pl.push(pathloss_db_clamped(
                    d,
                    layout.carrier_ghz,
                    layout.min_pathloss_distance_m,
                ));
                sh.push(shadowing_draw_db(
                    seed,
                    mt.id,
                    s,
                    layout.shadowing_sigma_db,
                ));
                aod.push(
                    (mt.position.y - site.y)
                        .atan2(mt.position.x - site.x)
                        .to_degrees(),
                );
            }
            pathloss_db.push(pl);
            shadowing_db.push(sh);
            aod_deg.push(aod);
        }
        LinkState {
            pathloss_db,
            shadowing_db,
            aod_deg,
        }
    }
}

/// Simplified urban-macro style pathloss. Distances below `d_min` are clamped.
pub fn pathloss_db(distance_m: f64, freq_ghz: f64) -> f64 {
    pathloss_db_clamped(distance_m, freq_ghz, 10.0)
}

pub fn pathloss_db_clamped(distance_m: f64, freq_ghz: f64, d_min: f64) -> f64 {
    let d = if distance_m < d_min {
        log::debug!("pathloss: distance {distance_m:.3} m clamped to {d_min} m");
        d_min
    } else {
        distance_m
    };
    28.0 + 22.0 * d.log10() + 20.0 * freq_ghz.log10()
}

/// Frozen shadowing draw, a pure function of (seed, MT id, sector id).
pub fn shadowing_draw_db(seed: u64, mt_id: usize, sector: usize, sigma_db: f64) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5AD0_0000_0000 ^ ((mt_id as u64) << 16) ^ sector as u64);
    Normal::new(0.0, sigma_db).unwrap().sample(&mut rng)
}

/// Raw received power of one beam at one terminal, in dBm. No clipping here;
/// the measurement stage clips for reporting.
pub fn rx_power_dbm(
    layout: &NetworkLayout,
    links: &LinkState,
    codebook: &GobCodebook,
    mt: &MobileTerminal,
    sector: usize,
    beam: usize,
) -> f64 {
    let aod_global = links.aod_deg[mt.id][sector];
    let az_sector = aod_global - layout.sector_boresight_deg(sector);
    let gain = codebook.beam_gain_dbi(beam, az_sector, 0.0);
    layout.tx_power_dbm + gain - links.pathloss_db[mt.id][sector]
        - links.shadowing_db[mt.id][sector]
}

/// Best-beam received power of a sector toward a terminal (used for attachment).
pub fn best_beam_rx_dbm(
    layout: &NetworkLayout,
    links: &LinkState,
    codebook: &GobCodebook,
    mt: &MobileTerminal,
    sector: usize,
) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for b in 0..codebook.beam_count() {
        let p = rx_power_dbm(layout, links, codebook, mt, sector, b);
        if p > best.1 {
            best = (b, p);
        }
    }
    best
}

/// Drop `count` terminals uniformly over the service region and attach each to
/// the sector with the strongest wideband (best-beam) received power.
pub fn place_terminals(
    layout: &NetworkLayout,
    codebook: &GobCodebook,
    count: usize,
    speed_kmh: f64,
    seed: u64,
) -> Vec<MobileTerminal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x91ace);
    let region = layout.region;
    let r = region.circumradius;
    let mut mts = Vec::with_capacity(count);
    for id in 0..count {
        let position = loop {
            let p = Vec2::new(
                region.center.x + rng.gen_range(-r..r),
                region.center.y + rng.gen_range(-r..r),
            );
            if region.contains(p) {
                break p;
            }
        };
        let heading_rad = rng.gen_range(0.0..std::f64::consts::TAU);
        mts.push(MobileTerminal {
            id,
            position,
            speed_kmh,
            heading_rad,
            serving_sector: 0,
            serving_beam: 0,
        });
    }
    // Attachment needs link state for the freshly placed terminals.
    let links = LinkState::compute(layout, &mts, seed);
    for mt in &mut mts {
        let mut best_sector = 0;
        let mut best_dbm = f64::NEG_INFINITY;
        for s in 0..layout.sector_count() {
            let (_, p) = best_beam_rx_dbm(layout, &links, codebook, mt, s);
            if p > best_dbm {
                best_dbm = p;
                best_sector = s;
            }
        }
        mt.serving_sector = best_sector;
    }
    mts
}

/// Advance a terminal along its heading with specular reflection at the
/// region boundary. Serving sector is never changed here.
pub fn step_mobility(mt: &MobileTerminal, region: &HexRegion, dt_s: f64) -> MobileTerminal {
    let v = mt.speed_kmh * SPEED_KMH_TO_MPS;
    let (s, c) = mt.heading_rad.sin_cos();
    let proposed = Vec2::new(mt.position.x + v * dt_s * c, mt.position.y + v * dt_s * s);
    let (position, heading_rad) = if region.contains(proposed) {
        (proposed, mt.heading_rad)
    } else {
        region.reflect(proposed, mt.heading_rad)
    };
    MobileTerminal {
        position,
        heading_rad,
        ..mt.clone()
    }
}
