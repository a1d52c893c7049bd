//! Synthetic multipath channels with ground-truth user positions.
//!
//! The base station sits at the origin. Every user gets an optional
//! line-of-sight path (amplitude `1/d`, phase `exp(-j 2 pi d / lambda)`,
//! delay `d/c`) and single-bounce paths through the nearest of a fixed set of
//! point scatterers shared by all users. A scattered path through scatterer
//! `s` has amplitude `|Gamma_s| / (d1 d2)`, phase `arg Gamma_s - 2 pi (d1 + d2)
//! / lambda` and delay `(d1 + d2)/c`, where `d1 = |s|`, `d2 = |p - s|`. The
//! channel is `sum_p g_p f(tau_p) ⊗ e(v_p)`.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with `rng_seed`.
//! Stream 0 draws scatterers and then user positions in index order; stream
//! `2i + 1` draws user `i`'s LoS flag and stream `2i + 2` its noise, so the
//! output does not depend on how users are spread over threads.

mod config;

pub use config::{
    preset_deepmimo_like, preset_quadriga_like, Area, ArrayGeometry, ArrayKind, ScenarioConfig,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelDataset, ChannelVector, Points};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn length(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn unit(a: Vec3) -> Result<Vec3> {
    let l = length(a);
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Domain("direction must be a nonzero finite vector".into()));
    }
    Ok([a[0] / l, a[1] / l, a[2] / l])
}

fn phase_ramp(count: usize, step: f64) -> impl Iterator<Item = Complex64> {
    let scale = 1.0 / (count as f64).sqrt();
    (0..count).map(move |a| Complex64::from_polar(scale, -2.0 * PI * a as f64 * step))
}

/// Array response to a plane wave from `direction`, unit norm.
///
/// Element spacing is taken relative to `wavelength`, so ULA entry `a` is
/// `exp(-j 2 pi a spacing <v, axis>) / sqrt(A)`. A UPA is the Kronecker
/// product of its vertical and horizontal ULA factors, horizontal index
/// fastest.
pub fn steering_vector(geometry: &ArrayGeometry, direction: Vec3, wavelength: f64) -> Result<Vec<Complex64>> {
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::Domain("wavelength must be positive".into()));
    }
    geometry.validate()?;
    let v = unit(direction)?;
    let (h_axis, v_axis) = geometry.axes()?;
    let spacing = geometry.element_spacing;
    Ok(match geometry.kind {
        ArrayKind::Ula { count } => phase_ramp(count, spacing * dot(v, h_axis)).collect(),
        ArrayKind::Upa {
            horizontal,
            vertical,
        } => {
            let h: Vec<_> = phase_ramp(horizontal, spacing * dot(v, h_axis)).collect();
            phase_ramp(vertical, spacing * dot(v, v_axis))
                .flat_map(|ev| h.iter().map(move |&eh| ev * eh))
                .collect()
        }
    })
}

/// `f_s = f_c + B ((s-1)/(S-1) - 1/2)`, or `[f_c]` for a single subcarrier.
pub fn frequency_grid(center_frequency: f64, bandwidth: f64, subcarriers: usize) -> Vec<f64> {
    if subcarriers <= 1 {
        return vec![center_frequency; subcarriers];
    }
    (0..subcarriers)
        .map(|s| center_frequency + bandwidth * (s as f64 / (subcarriers - 1) as f64 - 0.5))
        .collect()
}

/// Per-subcarrier phase of a path with delay `delay`:
/// `exp(-j 2 pi delay (f_s - f_c)) / sqrt(S)`.
pub fn frequency_vector(delay: f64, frequency_grid: &[f64], center_frequency: f64) -> Vec<Complex64> {
    let scale = 1.0 / (frequency_grid.len() as f64).sqrt();
    frequency_grid
        .iter()
        .map(|&f| Complex64::from_polar(scale, -2.0 * PI * delay * (f - center_frequency)))
        .collect()
}

/// One propagation path as seen from the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
    /// Unit vector from the base station.
    pub direction: Vec3,
}

/// `sum_p gain_p f(tau_p) ⊗ e(v_p)` in the `m = s A + a` layout.
pub fn channel_from_paths(
    paths: &[PathComponent],
    geometry: &ArrayGeometry,
    frequency_grid: &[f64],
    center_frequency: f64,
) -> Result<ChannelVector> {
    let a_count = geometry.antenna_count();
    let s_count = frequency_grid.len();
    let wavelength = SPEED_OF_LIGHT / center_frequency;
    let mut entries = vec![Complex64::new(0.0, 0.0); a_count * s_count];
    for path in paths {
        let e = steering_vector(geometry, path.direction, wavelength)?;
        let f = frequency_vector(path.delay, frequency_grid, center_frequency);
        for (s, fs) in f.iter().enumerate() {
            let g = path.gain * fs;
            for (a, ea) in e.iter().enumerate() {
                entries[s * a_count + a] += g * ea;
            }
        }
    }
    ChannelVector::new(entries, a_count, s_count)
}

/// Point scatterer shared by all users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: Vec3,
    pub reflection: Complex64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_normal(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn draw_in_area(rng: &mut impl Rng, config: &ScenarioConfig) -> Vec3 {
    // rejection of the singular point at the base station
    loop {
        let a = &config.area;
        let p = [
            rng.random_range(a.x_min..a.x_max),
            rng.random_range(a.y_min..a.y_max),
            config.user_height,
        ];
        if length(p) > 0.0 {
            return p;
        }
    }
}

fn draw_scatterers(rng: &mut impl Rng, config: &ScenarioConfig) -> Vec<Scatterer> {
    (0..config.scatterer_count)
        .map(|_| {
            let position = draw_in_area(rng, config);
            Scatterer {
                position,
                reflection: complex_normal(rng, 1.0),
            }
        })
        .collect()
}

/// Paths reaching a user at `position`.
pub fn user_paths(
    config: &ScenarioConfig,
    scatterers: &[Scatterer],
    position: Vec3,
    line_of_sight: bool,
) -> Result<Vec<PathComponent>> {
    let d = length(position);
    if d == 0.0 {
        return Err(Error::Domain("user located at the base station".into()));
    }
    let k = 2.0 * PI / config.wavelength();
    let mut paths = Vec::with_capacity(config.paths_per_user);
    if line_of_sight {
        paths.push(PathComponent {
            gain: Complex64::from_polar(1.0 / d, -k * d),
            delay: d / SPEED_OF_LIGHT,
            direction: unit(position)?,
        });
    }
    let wanted = config.paths_per_user - paths.len();
    let mut order: Vec<(f64, usize)> = scatterers
        .iter()
        .enumerate()
        .map(|(i, s)| (length(sub(position, s.position)), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(d2, i) in order.iter().take(wanted) {
        let s = &scatterers[i];
        let d1 = length(s.position);
        let d2 = d2.max(f64::MIN_POSITIVE);
        paths.push(PathComponent {
            gain: s.reflection * Complex64::from_polar(1.0 / (d1 * d2), -k * (d1 + d2)),
            delay: (d1 + d2) / SPEED_OF_LIGHT,
            direction: unit(s.position)?,
        });
    }
    Ok(paths)
}

/// Draws a full scenario: user positions uniform in the area, channels, and
/// noise. Deterministic in `config` (including the seed).
pub fn generate_scenario(config: &ScenarioConfig) -> Result<ChannelDataset> {
    config.validate()?;
    let mut master = stream_rng(config.rng_seed, 0);
    let scatterers = draw_scatterers(&mut master, config);
    let positions: Vec<Vec3> = (0..config.user_count)
        .map(|_| draw_in_area(&mut master, config))
        .collect();
    synthesize(config, &scatterers, &positions, 2)
}

/// Channels for users at the given positions (2-D positions are lifted to
/// `user_height`). Scatterers are drawn exactly as in [`generate_scenario`];
/// the area and user count of `config` are not used for placement.
pub fn synthesize_at(config: &ScenarioConfig, positions: &Points) -> Result<ChannelDataset> {
    let mut cfg = config.clone();
    cfg.user_count = positions.len().max(2);
    cfg.validate()?;
    let mut master = stream_rng(config.rng_seed, 0);
    let scatterers = draw_scatterers(&mut master, config);
    let lifted: Vec<Vec3> = positions
        .rows()
        .map(|r| match *r {
            [x, y] => Ok([x, y, config.user_height]),
            [x, y, z] => Ok([x, y, z]),
            _ => Err(Error::Domain("positions must be 2-D or 3-D".into())),
        })
        .collect::<Result<_>>()?;
    synthesize(config, &scatterers, &lifted, positions.dim())
}

fn synthesize(
    config: &ScenarioConfig,
    scatterers: &[Scatterer],
    positions: &[Vec3],
    stored_dim: usize,
) -> Result<ChannelDataset> {
    let grid = frequency_grid(config.center_frequency, config.bandwidth, config.subcarrier_count);
    let clean: Vec<ChannelVector> = crate::exec::try_map_range(positions.len(), |i| {
        let mut rng = stream_rng(config.rng_seed, 2 * i as u64 + 1);
        let los = rng.random::<f64>() < config.los_probability;
        let paths = user_paths(config, scatterers, positions[i], los)?;
        channel_from_paths(&paths, &config.geometry, &grid, config.center_frequency)
    })?;

    let channels = match config.snr_db {
        None => clean,
        Some(snr_db) => {
            let m = config.channel_dim() as f64;
            let mean_energy =
                clean.iter().map(|h| h.norm().powi(2)).sum::<f64>() / clean.len() as f64;
            let noise_var = mean_energy / m / 10f64.powf(snr_db / 10.0);
            let t = config.snapshot_count;
            crate::exec::try_map_range(clean.len(), |i| {
                let mut rng = stream_rng(config.rng_seed, 2 * i as u64 + 2);
                let h = &clean[i];
                let mut acc = vec![Complex64::new(0.0, 0.0); h.dim()];
                for _ in 0..t {
                    for (a, x) in acc.iter_mut().zip(h.entries()) {
                        *a += x + complex_normal(&mut rng, noise_var);
                    }
                }
                let inv = 1.0 / t as f64;
                acc.iter_mut().for_each(|a| *a *= inv);
                ChannelVector::new(acc, h.antennas(), h.subcarriers())
            })?
        }
    };

    let coords: Vec<f64> = positions
        .iter()
        .flat_map(|p| p[..stored_dim].to_vec())
        .collect();
    let metadata = format!(
        "synthetic: f_c={} Hz, B={} Hz, A={}, S={}, N={}, P={}, snr_db={}, T={}, seed={}",
        config.center_frequency,
        config.bandwidth,
        config.antenna_count(),
        config.subcarrier_count,
        positions.len(),
        config.paths_per_user,
        config.snr_db.map_or("none".to_string(), |s| s.to_string()),
        config.snapshot_count,
        config.rng_seed,
    );
    ChannelDataset::new(channels, Some(Points::new(stored_dim, coords)?), grid, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{dist_normalized, dist_phase_insensitive};

    fn los_only(subcarriers: usize) -> ScenarioConfig {
        ScenarioConfig {
            subcarrier_count: subcarriers,
            center_frequency: 3.5e9,
            bandwidth: 20e6,
            paths_per_user: 1,
            los_probability: 1.0,
            scatterer_count: 0,
            snr_db: None,
            snapshot_count: 1,
            ..preset_quadriga_like()
        }
    }

    #[test]
    fn broadside_steering_is_flat() {
        for a in [1, 2, 7, 32] {
            let g = ArrayGeometry::ula(a);
            let e = steering_vector(&g, [0.0, 1.0, 0.0], 0.1).unwrap();
            for z in e {
                assert!((z - Complex64::new(1.0 / (a as f64).sqrt(), 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn endfire_two_element_steering() {
        let g = ArrayGeometry::ula(2);
        let (axis, _) = g.axes().unwrap();
        let e = steering_vector(&g, axis, 0.1).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((e[0] - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((e[1] - Complex64::new(-r, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_has_unit_norm_and_flat_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for geometry in [ArrayGeometry::ula(8), ArrayGeometry::upa(4, 3)] {
            let a = geometry.antenna_count() as f64;
            for _ in 0..20 {
                let dir = [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ];
                let e = steering_vector(&geometry, dir, 0.15).unwrap();
                let norm: f64 = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
                assert!(e.iter().all(|z| (z.norm() - 1.0 / a.sqrt()).abs() < 1e-12));
            }
        }
        assert!(steering_vector(&ArrayGeometry::ula(4), [0.0; 3], 0.1).is_err());
    }

    #[test]
    fn upa_is_kronecker_of_factors() {
        let g = ArrayGeometry::upa(3, 2);
        let dir = [0.3, 0.8, -0.2];
        let e = steering_vector(&g, dir, 0.1).unwrap();
        let u = unit(dir).unwrap();
        let (h_axis, _) = g.axes().unwrap();
        assert_eq!(h_axis, [-1.0, 0.0, 0.0]);
        let h = phase_ramp(3, 0.5 * dot(u, h_axis)).collect::<Vec<_>>();
        let v = phase_ramp(2, 0.5 * u[2]).collect::<Vec<_>>();
        for iv in 0..2 {
            for ih in 0..3 {
                assert!((e[iv * 3 + ih] - v[iv] * h[ih]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn frequency_vector_examples() {
        assert_eq!(frequency_vector(1e-6, &[2e9], 2e9), vec![Complex64::new(1.0, 0.0)]);
        let grid = frequency_grid(3.5e9, 20e6, 16);
        for z in frequency_vector(0.0, &grid, 3.5e9) {
            assert!((z.re - 0.25).abs() < 1e-15 && z.im == 0.0);
        }
        // S = 2 symmetric grid, tau = 1/(f2 - f1): phases -2 pi tau (-B/2) = pi and -pi
        let grid = frequency_grid(1e9, 1e6, 2);
        assert_eq!(grid, vec![1e9 - 0.5e6, 1e9 + 0.5e6]);
        let tau = 1.0 / (grid[1] - grid[0]);
        let f = frequency_vector(tau, &grid, 1e9);
        let r = 1.0 / 2f64.sqrt();
        assert!((f[0] - Complex64::from_polar(r, PI)).norm() < 1e-12);
        assert!((f[1] - Complex64::from_polar(r, -PI)).norm() < 1e-12);
        let norm: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frequency_grid_is_centered_and_spans_bandwidth() {
        let g = frequency_grid(2e9, 20e6, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[2], 2e9);
        assert!((g[4] - g[0] - 20e6).abs() < 1e-6);
        assert_eq!(frequency_grid(2e9, 20e6, 1), vec![2e9]);
    }

    #[test]
    fn half_wavelength_pair_is_antipodal() {
        let cfg = los_only(1);
        let lambda = cfg.wavelength();
        let dir = unit([0.3, 0.9, 0.0]).unwrap();
        let d = 100.0;
        let p = |r: f64| vec![r * dir[0], r * dir[1]];
        let pts = Points::from_rows(&[p(d), p(d + lambda / 2.0)]).unwrap();
        let ds = synthesize_at(&cfg, &pts).unwrap();
        let (h1, h2) = (ds.channel(0), ds.channel(1));
        let u1: Vec<_> = h1.entries().iter().map(|z| z / h1.norm()).collect();
        let u2: Vec<_> = h2.entries().iter().map(|z| z / h2.norm()).collect();
        for (a, b) in u1.iter().zip(&u2) {
            assert!((a + b).norm() < 1e-9);
        }
        assert!((dist_normalized(h1, h2).unwrap() - 2.0).abs() < 1e-9);
        assert!(dist_phase_insensitive(h1, h2).unwrap() < 1e-9);
    }

    #[test]
    fn single_path_matches_model() {
        let cfg = los_only(8);
        let pts = Points::from_rows(&[[40.0, 75.0], [-120.0, 30.0]]).unwrap();
        let ds = synthesize_at(&cfg, &pts).unwrap();
        for (i, row) in pts.rows().enumerate() {
            let p = [row[0], row[1], 0.0];
            let tau = length(p) / SPEED_OF_LIGHT;
            let model = channel_from_paths(
                &[PathComponent {
                    gain: Complex64::new(1.0, 0.0),
                    delay: tau,
                    direction: p,
                }],
                &cfg.geometry,
                ds.frequency_grid(),
                cfg.center_frequency,
            )
            .unwrap();
            assert!(dist_phase_insensitive(ds.channel(i), &model).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn generation_is_deterministic_and_thread_independent() {
        let cfg = ScenarioConfig {
            user_count: 50,
            subcarrier_count: 4,
            los_probability: 0.6,
            ..preset_quadriga_like()
        };
        let a = generate_scenario(&cfg).unwrap();
        let b = crate::exec::sequential(|| generate_scenario(&cfg).unwrap());
        assert_eq!(a, b);
        let other = generate_scenario(&ScenarioConfig { rng_seed: 2, ..cfg.clone() }).unwrap();
        assert_ne!(a, other);
        let p = a.positions().unwrap();
        assert_eq!(p.len(), 50);
        assert!(p.rows().all(|r| (-500.0..500.0).contains(&r[0]) && (0.0..500.0).contains(&r[1])));
    }

    #[test]
    fn snapshot_averaging_concentrates() {
        let base = ScenarioConfig {
            user_count: 20,
            geometry: ArrayGeometry::ula(8),
            subcarrier_count: 2,
            ..preset_quadriga_like()
        };
        let noisy_cfg = ScenarioConfig {
            snr_db: Some(0.0),
            snapshot_count: 10_000,
            ..base.clone()
        };
        let clean = generate_scenario(&ScenarioConfig { snr_db: None, ..base }).unwrap();
        let noisy = generate_scenario(&noisy_cfg).unwrap();
        let (mut err, mut energy) = (0.0, 0.0);
        for (h, g) in clean.channels().iter().zip(noisy.channels()) {
            for (x, y) in h.entries().iter().zip(g.entries()) {
                err += (x - y).norm_sqr();
                energy += x.norm_sqr();
            }
        }
        let rel = (err / energy).sqrt();
        assert!(rel <= 5.0 / (10_000f64).sqrt(), "relative error {rel}");
        assert!(rel > 0.0);
    }

    #[test]
    fn noise_level_matches_snr() {
        let base = ScenarioConfig {
            user_count: 200,
            geometry: ArrayGeometry::ula(16),
            snapshot_count: 1,
            ..preset_quadriga_like()
        };
        let clean = generate_scenario(&ScenarioConfig { snr_db: None, ..base.clone() }).unwrap();
        let noisy = generate_scenario(&ScenarioConfig { snr_db: Some(10.0), ..base }).unwrap();
        let (mut noise, mut energy) = (0.0, 0.0);
        for (h, g) in clean.channels().iter().zip(noisy.channels()) {
            for (x, y) in h.entries().iter().zip(g.entries()) {
                noise += (x - y).norm_sqr();
                energy += x.norm_sqr();
            }
        }
        let snr = 10.0 * (energy / noise).log10();
        assert!((snr - 10.0).abs() < 0.2, "measured {snr} dB");
    }

    #[test]
    fn nlos_users_use_nearest_scatterers() {
        let cfg = ScenarioConfig {
            los_probability: 0.0,
            paths_per_user: 2,
            scatterer_count: 5,
            ..preset_quadriga_like()
        };
        let mut rng = stream_rng(cfg.rng_seed, 0);
        let scatterers = draw_scatterers(&mut rng, &cfg);
        let p = [10.0, 200.0, 0.0];
        let paths = user_paths(&cfg, &scatterers, p, false).unwrap();
        assert_eq!(paths.len(), 2);
        let mut dists: Vec<f64> = scatterers.iter().map(|s| length(sub(p, s.position))).collect();
        dists.sort_by(f64::total_cmp);
        for (path, d2) in paths.iter().zip(&dists) {
            let s = scatterers
                .iter()
                .find(|s| (length(sub(p, s.position)) - d2).abs() < 1e-12)
                .unwrap();
            let d1 = length(s.position);
            assert!((path.delay - (d1 + d2) / SPEED_OF_LIGHT).abs() < 1e-18);
            assert!((path.gain.norm() - s.reflection.norm() / (d1 * d2)).abs() < 1e-15);
        }
        assert!(user_paths(&cfg, &scatterers, [0.0; 3], true).is_err());
    }
}
