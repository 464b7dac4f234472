//! Grid-of-beams DFT codebooks on uniform squared planar arrays, beam pattern
//! evaluation, and the spatial cross-correlation matrix shared by the
//! scheduler and the learning state.
//!
//! Each panel carries an N x N array. Beams are 2D DFT vectors on an
//! L_az x L_el grid of half-integer-offset frequency indices, so same-panel
//! beams stay mutually orthogonal while the grid remains symmetric around the
//! panel boresight (no endfire beam).

use crate::error::{Result, SimError};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct PanelConfig {
    pub elements_per_dim: usize,
    pub element_spacing_wl: f64,
    /// Panel boresight azimuth, degrees in the sector frame.
    pub boresight_azimuth_deg: f64,
    pub element_gain_dbi: f64,
}

#[derive(Debug, Clone)]
pub struct Beam {
    pub panel: usize,
    pub local_index: usize,
    pub global_index: usize,
    /// Unit-norm steering weights, element order m*N + n (m = azimuth dim).
    pub steering_weights: Vec<Complex64>,
    /// DFT frequency indices (half-integer offsets from broadside).
    pub q_az: f64,
    pub q_el: f64,
    /// Pointing direction, degrees in the sector frame.
    pub pointing_az_deg: f64,
    pub pointing_el_deg: f64,
}

#[derive(Debug, Clone)]
pub struct GobCodebook {
    pub panels: Vec<PanelConfig>,
    pub beams: Vec<Beam>,
    pub beams_per_panel: usize,
    pub beams_azimuth: usize,
    pub beams_elevation: usize,
    pub backlobe_suppression_db: f64,
}

/// Angular grid for pattern-overlap integration. Azimuth spans the full
/// circle, elevation spans +-el_range_deg around the horizon.
#[derive(Debug, Clone, Copy)]
pub struct AngularGrid {
    pub step_deg: f64,
    pub el_range_deg: f64,
}

impl AngularGrid {
    pub fn new(step_deg: f64, el_range_deg: f64) -> Self {
        AngularGrid {
            step_deg,
            el_range_deg,
        }
    }

    fn azimuths(&self) -> impl Iterator<Item = f64> + '_ {
        let n = (360.0 / self.step_deg).round() as usize;
        (0..n).map(move |i| -180.0 + i as f64 * self.step_deg)
    }

    fn elevations(&self) -> impl Iterator<Item = f64> + '_ {
        let n = (2.0 * self.el_range_deg / self.step_deg).round() as usize + 1;
        (0..n).map(move |i| -self.el_range_deg + i as f64 * self.step_deg)
    }
}

/// DFT frequency index for beam `i` of `l` beams on an `n`-element dimension:
/// half-integer offsets symmetric around broadside. Differences between two
/// indices are integers, which is what keeps the beams orthogonal.
fn dft_index(i: usize, l: usize) -> f64 {
    i as f64 - (l as f64 - 1.0) / 2.0
}

/// Magnitude of the normalized Dirichlet kernel (1/N) * sum_m e^{j2pi m x}.
fn dirichlet_mag(x: f64, n: usize) -> f64 {
    let sx = (PI * x).sin();
    if sx.abs() < 1e-12 {
        1.0
    } else {
        ((PI * n as f64 * x).sin() / (n as f64 * sx)).abs()
    }
}

pub fn build_codebook(
    panels: &[PanelConfig],
    beams_azimuth: usize,
    beams_elevation: usize,
    backlobe_suppression_db: f64,
) -> Result<GobCodebook> {
    if panels.is_empty() {
        return Err(SimError::Config("codebook: need at least one panel".into()));
    }
    if beams_azimuth == 0 || beams_elevation == 0 {
        return Err(SimError::Config(
            "codebook: beam grid dimensions must be >= 1".into(),
        ));
    }
    let beams_per_panel = beams_azimuth * beams_elevation;
    let mut beams = Vec::with_capacity(panels.len() * beams_per_panel);
    for (p, panel) in panels.iter().enumerate() {
        let n = panel.elements_per_dim;
        if n == 0 {
            return Err(SimError::Config("codebook: elements_per_dim must be >= 1".into()));
        }
        if beams_azimuth > n || beams_elevation > n {
            return Err(SimError::Config(format!(
                "codebook: {beams_azimuth}x{beams_elevation} beam grid does not fit \
                 an orthogonal DFT on a {n}x{n} panel"
            )));
        }
        if panel.element_spacing_wl <= 0.0 {
            return Err(SimError::Config("codebook: element spacing must be positive".into()));
        }
        for i_az in 0..beams_azimuth {
            for i_el in 0..beams_elevation {
                let local_index = i_az * beams_elevation + i_el;
                let q_az = dft_index(i_az, beams_azimuth);
                let q_el = dft_index(i_el, beams_elevation);
                let nf = n as f64;
                let mut steering_weights = Vec::with_capacity(n * n);
                for m in 0..n {
                    for v in 0..n {
                        let phase = 2.0 * PI * (m as f64 * q_az + v as f64 * q_el) / nf;
                        steering_weights
                            .push(Complex64::new(phase.cos(), phase.sin()) / nf);
                    }
                }
                let denom = nf * panel.element_spacing_wl;
                let sin_el = (q_el / denom).clamp(-1.0, 1.0);
                let el = sin_el.asin();
                let sin_az = (q_az / (denom * el.cos())).clamp(-1.0, 1.0);
                let az = sin_az.asin();
                beams.push(Beam {
                    panel: p,
                    local_index,
                    global_index: p * beams_per_panel + local_index,
                    steering_weights,
                    q_az,
                    q_el,
                    pointing_az_deg: panel.boresight_azimuth_deg + az.to_degrees(),
                    pointing_el_deg: el.to_degrees(),
                });
            }
        }
    }
    Ok(GobCodebook {
        panels: panels.to_vec(),
        beams,
        beams_per_panel,
        beams_azimuth,
        beams_elevation,
        backlobe_suppression_db,
    })
}

impl GobCodebook {
    pub fn beam_count(&self) -> usize {
        self.beams.len()
    }

    pub fn panel_of(&self, beam: usize) -> usize {
        beam / self.beams_per_panel
    }

    pub fn decode(&self, beam: usize) -> (usize, usize) {
        (beam / self.beams_per_panel, beam % self.beams_per_panel)
    }

    pub fn encode(&self, panel: usize, local: usize) -> usize {
        panel * self.beams_per_panel + local
    }

    /// Beam gain in dBi toward a direction given in the sector frame.
    ///
    /// The planar-array inner product separates into two Dirichlet kernels,
    /// one per array dimension. Directions behind the panel plane get a fixed
    /// backlobe suppression on top of the (front/back symmetric) array factor.
    pub fn beam_gain_dbi(&self, beam: usize, azimuth_deg: f64, elevation_deg: f64) -> f64 {
        let b = &self.beams[beam];
        let panel = &self.panels[b.panel];
        let n = panel.elements_per_dim;
        let nf = n as f64;
        let az_local = (azimuth_deg - panel.boresight_azimuth_deg).to_radians();
        let el = elevation_deg.to_radians();
        let s = panel.element_spacing_wl;
        let x_az = b.q_az / nf - s * el.cos() * az_local.sin();
        let x_el = b.q_el / nf - s * el.sin();
        let dot = dirichlet_mag(x_az, n) * dirichlet_mag(x_el, n);
        let mut gain = 10.0 * (dot * dot * nf * nf).max(1e-300).log10() + panel.element_gain_dbi;
        if el.cos() * az_local.cos() < 0.0 {
            gain -= self.backlobe_suppression_db;
        }
        gain
    }

    /// Linear-power pattern of one beam sampled on a grid, with values below
    /// the configured dB floor (relative to the pattern peak) zeroed out.
    pub fn pattern_on_grid(&self, beam: usize, grid: &AngularGrid, floor_db: f64) -> Vec<f64> {
        let mut g = Vec::new();
        for el in grid.elevations() {
            for az in grid.azimuths() {
                g.push(10f64.powf(self.beam_gain_dbi(beam, az, el) / 10.0));
            }
        }
        let peak = g.iter().cloned().fold(0.0, f64::max);
        let floor = peak * 10f64.powf(floor_db / 10.0);
        for v in &mut g {
            if *v < floor {
                *v = 0.0;
            }
        }
        g
    }

    /// Normalized pattern overlap between two beams on the given grid.
    pub fn cross_correlation(&self, b: usize, j: usize, grid: &AngularGrid, floor_db: f64) -> f64 {
        if b == j {
            return 1.0;
        }
        let gb = self.pattern_on_grid(b, grid, floor_db);
        let gj = self.pattern_on_grid(j, grid, floor_db);
        correlation_from_patterns(&gb, &gj)
    }
}

/// Normalized overlap of two sampled linear-power patterns. Invariant to
/// scaling either pattern by a positive constant.
pub fn correlation_from_patterns(ga: &[f64], gb: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (a, b) in ga.iter().zip(gb.iter()) {
        num += a * b;
        na += a * a;
        nb += b * b;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (num / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0)
}

/// Precomputed B x B spatial cross-correlation matrix.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    size: usize,
    rho: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn compute(codebook: &GobCodebook, grid: &AngularGrid, floor_db: f64) -> CorrelationMatrix {
        let b = codebook.beam_count();
        let patterns: Vec<Vec<f64>> = (0..b)
            .map(|i| codebook.pattern_on_grid(i, grid, floor_db))
            .collect();
        let mut rho = vec![0.0; b * b];
        for i in 0..b {
            rho[i * b + i] = 1.0;
            for j in (i + 1)..b {
                let v = correlation_from_patterns(&patterns[i], &patterns[j]);
                rho[i * b + j] = v;
                rho[j * b + i] = v;
            }
        }
        CorrelationMatrix { size: b, rho }
    }

    pub fn from_raw(size: usize, rho: Vec<f64>) -> Result<CorrelationMatrix> {
        if rho.len() != size * size {
            return Err(SimError::Validation(format!(
                "correlation matrix: expected {}x{} values",
                size, size
            )));
        }
        Ok(CorrelationMatrix { size, rho })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, b: usize, j: usize) -> f64 {
        self.rho[b * self.size + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_panels(count: usize, n: usize, gain: f64) -> Vec<PanelConfig> {
        (0..count)
            .map(|p| PanelConfig {
                elements_per_dim: n,
                element_spacing_wl: 0.5,
                boresight_azimuth_deg: (p as f64 - (count as f64 - 1.0) / 2.0) * 40.0,
                element_gain_dbi: gain,
            })
            .collect()
    }

    #[test]
    fn full_scale_beam_count() {
        let cb = build_codebook(&uniform_panels(3, 8, 5.0), 8, 2, 30.0).unwrap();
        assert_eq!(cb.beam_count(), 48);
    }

    #[test]
    fn steering_weights_unit_norm() {
        let cb = build_codebook(&uniform_panels(3, 4, 5.0), 4, 2, 30.0).unwrap();
        for beam in &cb.beams {
            let norm: f64 = beam.steering_weights.iter().map(|w| w.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_panel_beams_orthogonal() {
        let cb = build_codebook(&uniform_panels(1, 8, 0.0), 8, 2, 30.0).unwrap();
        for a in &cb.beams {
            for b in &cb.beams {
                if a.global_index == b.global_index {
                    continue;
                }
                let dot: Complex64 = a
                    .steering_weights
                    .iter()
                    .zip(b.steering_weights.iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                assert!(dot.norm() <= 1e-10, "|<w,w'>| = {}", dot.norm());
            }
        }
    }

    #[test]
    fn gain_at_pointing_is_coherent_sum() {
        // Elevation-centered grid so the pointing direction is exact.
        let cb = build_codebook(&uniform_panels(1, 4, 5.0), 4, 1, 30.0).unwrap();
        for beam in &cb.beams {
            let g = cb.beam_gain_dbi(beam.global_index, beam.pointing_az_deg, beam.pointing_el_deg);
            let expect = 10.0 * 16f64.log10() + 5.0;
            assert!((g - expect).abs() < 1e-9, "gain {g} expect {expect}");
            assert!((expect - 17.0412).abs() < 1e-4);
        }
    }

    #[test]
    fn gain_max_attained_at_pointing() {
        let cb = build_codebook(&uniform_panels(3, 4, 5.0), 4, 2, 30.0).unwrap();
        for beam in &cb.beams {
            let peak = cb.beam_gain_dbi(beam.global_index, beam.pointing_az_deg, beam.pointing_el_deg);
            let mut az = -180.0;
            while az < 180.0 {
                let mut el = -30.0;
                while el <= 30.0 {
                    assert!(cb.beam_gain_dbi(beam.global_index, az, el) <= peak + 1e-6);
                    el += 1.0;
                }
                az += 1.0;
            }
        }
    }

    #[test]
    fn gain_deep_null_at_orthogonal_beam_pointing() {
        let cb = build_codebook(&uniform_panels(1, 4, 5.0), 4, 1, 30.0).unwrap();
        let peak = 10.0 * 16f64.log10() + 5.0;
        for a in &cb.beams {
            for b in &cb.beams {
                if a.global_index == b.global_index {
                    continue;
                }
                let g = cb.beam_gain_dbi(a.global_index, b.pointing_az_deg, b.pointing_el_deg);
                assert!(
                    g - peak <= -30.0,
                    "beam {} at pointing of {}: {g} dBi vs peak {peak}",
                    a.global_index,
                    b.global_index
                );
            }
        }
    }

    #[test]
    fn gain_symmetric_around_boresight_beam() {
        // Odd azimuth count gives a broadside beam (q_az = 0).
        let cb = build_codebook(&uniform_panels(1, 4, 3.0), 3, 1, 30.0).unwrap();
        let center = &cb.beams[1];
        assert!(center.q_az.abs() < 1e-12);
        for delta in [1.0, 5.0, 17.0, 44.0] {
            let lhs = cb.beam_gain_dbi(center.global_index, delta, 0.0);
            let rhs = cb.beam_gain_dbi(center.global_index, -delta, 0.0);
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn pointing_increases_in_local_index_order() {
        let cb = build_codebook(&uniform_panels(2, 8, 5.0), 8, 2, 30.0).unwrap();
        for w in cb.beams.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.panel != b.panel {
                continue;
            }
            if b.local_index % cb.beams_elevation == 0 {
                // new azimuth row
                assert!(b.pointing_az_deg > a.pointing_az_deg);
            } else {
                assert!(b.pointing_el_deg > a.pointing_el_deg);
                assert!((b.pointing_az_deg - a.pointing_az_deg).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn index_bijection() {
        let cb = build_codebook(&uniform_panels(3, 4, 5.0), 4, 2, 30.0).unwrap();
        for b in 0..cb.beam_count() {
            let (p, j) = cb.decode(b);
            assert_eq!(cb.encode(p, j), b);
            assert_eq!(cb.beams[b].panel, p);
            assert_eq!(cb.beams[b].local_index, j);
        }
    }

    #[test]
    fn self_correlation_exactly_one() {
        let cb = build_codebook(&uniform_panels(1, 4, 5.0), 4, 2, 30.0).unwrap();
        let grid = AngularGrid::new(2.0, 30.0);
        assert_eq!(cb.cross_correlation(1, 1, &grid, -50.0), 1.0);
    }

    #[test]
    fn orthogonal_pair_correlation_matches_fine_grid_oracle() {
        let cb = build_codebook(&uniform_panels(1, 4, 5.0), 4, 1, 30.0).unwrap();
        let coarse = cb.cross_correlation(0, 1, &AngularGrid::new(1.0, 30.0), -50.0);
        assert!(
            (0.0..=0.3).contains(&coarse),
            "same-panel orthogonal pair rho = {coarse}"
        );

        // Independent quadrature at 0.1 degrees: accumulate the overlap sums
        // directly from gain evaluation, bypassing pattern_on_grid.
        let (mut num, mut na, mut nb) = (0.0, 0.0, 0.0);
        let (mut ga_all, mut gb_all) = (Vec::new(), Vec::new());
        let steps_az = 3600;
        let steps_el = 601;
        for ie in 0..steps_el {
            let el = -30.0 + ie as f64 * 0.1;
            for ia in 0..steps_az {
                let az = -180.0 + ia as f64 * 0.1;
                ga_all.push(10f64.powf(cb.beam_gain_dbi(0, az, el) / 10.0));
                gb_all.push(10f64.powf(cb.beam_gain_dbi(1, az, el) / 10.0));
            }
        }
        let pa = ga_all.iter().cloned().fold(0.0, f64::max) * 1e-5;
        let pb = gb_all.iter().cloned().fold(0.0, f64::max) * 1e-5;
        for (a, b) in ga_all.iter().zip(gb_all.iter()) {
            let a = if *a < pa { 0.0 } else { *a };
            let b = if *b < pb { 0.0 } else { *b };
            num += a * b;
            na += a * a;
            nb += b * b;
        }
        let fine = num / (na.sqrt() * nb.sqrt());
        assert!(
            (coarse - fine).abs() <= 0.02,
            "1 deg grid {coarse} vs 0.1 deg oracle {fine}"
        );
    }

    #[test]
    fn correlation_matrix_invariants() {
        let cb = build_codebook(&uniform_panels(3, 4, 5.0), 4, 2, 30.0).unwrap();
        let rho = CorrelationMatrix::compute(&cb, &AngularGrid::new(2.0, 30.0), -50.0);
        let b = rho.size();
        assert_eq!(b, cb.beam_count());
        for i in 0..b {
            assert_eq!(rho.get(i, i), 1.0);
            for j in 0..b {
                assert_eq!(rho.get(i, j).to_bits(), rho.get(j, i).to_bits());
                assert!((0.0..=1.0).contains(&rho.get(i, j)));
            }
        }
    }

    #[test]
    fn correlation_scale_invariant() {
        let ga = vec![0.0, 1.0, 3.0, 0.5, 0.0, 2.0];
        let gb = vec![0.5, 0.2, 1.0, 0.0, 0.1, 1.5];
        let base = correlation_from_patterns(&ga, &gb);
        for k in [1e-6, 0.3, 7.0, 1e9] {
            let scaled: Vec<f64> = ga.iter().map(|v| v * k).collect();
            assert!((correlation_from_patterns(&scaled, &gb) - base).abs() < 1e-12);
            let scaled_b: Vec<f64> = gb.iter().map(|v| v * k).collect();
            assert!((correlation_from_patterns(&ga, &scaled_b) - base).abs() < 1e-12);
        }
    }
}
