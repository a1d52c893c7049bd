//! Channel distance measures and distance-matrix construction.
//!
//! Three measures are provided: plain Euclidean, Euclidean between
//! unit-normalized channels, and the phase-insensitive distance
//!
//! ```text
//! d*(h_k, h_l)^2 = min_phi || h_k/|h_k| - e^{j phi} h_l/|h_l| ||^2
//!                = 2 - 2 |h_k^H h_l| / (|h_k| |h_l|)
//! ```
//!
//! which ignores the global phase rotation caused by sub-wavelength movement.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::{ChannelDataset, ChannelVector, DistanceMatrix};
use crate::error::{Error, Result};

/// Below this value of `2 - 2|cos|` the closed form loses most of its
/// significant digits, and the aligned difference is evaluated directly.
const REFINE_BELOW: f64 = 1e-4;

/// Inner product `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            re[k] += x[k].re * y[k].re + x[k].im * y[k].im;
            im[k] += x[k].re * y[k].im - x[k].im * y[k].re;
        }
    }
    for (x, y) in ra.iter().zip(rb) {
        re[0] += x.re * y.re + x.im * y.im;
        im[0] += x.re * y.im - x.im * y.re;
    }
    Complex64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]))
}

pub fn norm(a: &[Complex64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.chunks_exact(4);
    let rest = chunks.remainder();
    for x in chunks {
        for k in 0..4 {
            acc[k] += x[k].norm_sqr();
        }
    }
    for x in rest {
        acc[0] += x.norm_sqr();
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])).sqrt()
}

fn check_dims(a: &ChannelVector, b: &ChannelVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Domain(format!(
            "channel dimensions differ ({} vs {})",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

fn positive_norms(a: &ChannelVector, b: &ChannelVector) -> Result<(f64, f64)> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 {
        return Err(Error::ZeroNorm { index: 0 });
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm { index: 1 });
    }
    Ok((na, nb))
}

/// `|| a - b ||_2`.
pub fn dist_euclidean(a: &ChannelVector, b: &ChannelVector) -> Result<f64> {
    check_dims(a, b)?;
    Ok(euclidean_kernel(a.entries(), b.entries()))
}

fn euclidean_kernel(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `|| a/|a| - b/|b| ||_2`, in `[0, 2]`.
pub fn dist_normalized(a: &ChannelVector, b: &ChannelVector) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = positive_norms(a, b)?;
    Ok(normalized_kernel(a.entries(), na, b.entries(), nb))
}

fn normalized_kernel(a: &[Complex64], na: f64, b: &[Complex64], nb: f64) -> f64 {
    let (sa, sb) = (1.0 / na, 1.0 / nb);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x * sa - y * sb).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Phase-insensitive distance `d*`, in `[0, sqrt(2)]`.
pub fn dist_phase_insensitive(a: &ChannelVector, b: &ChannelVector) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = positive_norms(a, b)?;
    Ok(phase_insensitive_kernel(a.entries(), na, b.entries(), nb))
}

pub(crate) fn phase_insensitive_kernel(a: &[Complex64], na: f64, b: &[Complex64], nb: f64) -> f64 {
    let ip = inner(a, b);
    let radicand = (2.0 - 2.0 * (ip.norm() / (na * nb))).max(0.0);
    if radicand > REFINE_BELOW {
        return radicand.sqrt();
    }
    // Averaging both orientations keeps d*(a, b) == d*(b, a) bit-for-bit.
    0.5 * (aligned_difference(a, na, b, nb, ip) + aligned_difference(b, nb, a, na, ip.conj()))
}

/// `|| a/|a| - w b/|b| ||` with `w = conj(ip)/|ip|`, the optimal rotation.
fn aligned_difference(a: &[Complex64], na: f64, b: &[Complex64], nb: f64, ip: Complex64) -> f64 {
    let mag = ip.norm();
    if mag == 0.0 {
        return std::f64::consts::SQRT_2;
    }
    let w = ip.conj() / mag;
    let (sa, sb) = (1.0 / na, 1.0 / nb);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x * sa - w * (y * sb)).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Brute-force minimum of `|| a/|a| - e^{j phi} b/|b| ||` over
/// `phi = 2 pi t / grid_size`, evaluating the norm directly for each phase.
pub fn dist_phase_insensitive_variational(
    a: &ChannelVector,
    b: &ChannelVector,
    grid_size: usize,
) -> Result<f64> {
    check_dims(a, b)?;
    if grid_size < 4 {
        return Err(Error::Domain(format!("grid size {grid_size} < 4")));
    }
    let (na, nb) = positive_norms(a, b)?;
    let ua: Vec<Complex64> = a.entries().iter().map(|x| x / na).collect();
    let ub: Vec<Complex64> = b.entries().iter().map(|x| x / nb).collect();
    let best = crate::exec::map_range(grid_size, |t| {
        let phi = 2.0 * PI * t as f64 / grid_size as f64;
        let (s, c) = phi.sin_cos();
        let mut acc = [0.0f64; 2];
        for (k, (x, y)) in ua.iter().zip(&ub).enumerate() {
            let dr = x.re - (c * y.re - s * y.im);
            let di = x.im - (s * y.re + c * y.im);
            acc[k & 1] += dr * dr + di * di;
        }
        acc[0] + acc[1]
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok(best.sqrt())
}

/// Phase `phi* = -arg(a^H b)` in `(-pi, pi]` that aligns `b` onto `a`.
pub fn optimal_phase(a: &ChannelVector, b: &ChannelVector) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = positive_norms(a, b)?;
    let ip = inner(a.entries(), b.entries());
    if ip.norm() <= 1e-13 * na * nb {
        return Err(Error::PhaseUndefined);
    }
    let phi = -ip.arg();
    Ok(if phi <= -PI { phi + 2.0 * PI } else { phi })
}

/// Distance measure used to build a [`DistanceMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    Euclidean,
    Normalized,
    #[default]
    PhaseInsensitive,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Euclidean => "euclidean",
            Measure::Normalized => "normalized",
            Measure::PhaseInsensitive => "phase-insensitive",
        }
    }

    pub fn eval(self, a: &ChannelVector, b: &ChannelVector) -> Result<f64> {
        match self {
            Measure::Euclidean => dist_euclidean(a, b),
            Measure::Normalized => dist_normalized(a, b),
            Measure::PhaseInsensitive => dist_phase_insensitive(a, b),
        }
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Measure::Euclidean),
            "normalized" => Ok(Measure::Normalized),
            "phase-insensitive" | "phase_insensitive" => Ok(Measure::PhaseInsensitive),
            other => Err(Error::Domain(format!("unknown measure '{other}'"))),
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Pairwise distances between all channels of `dataset`; `O(M N^2)`.
pub fn build_distance_matrix(dataset: &ChannelDataset, measure: Measure) -> Result<DistanceMatrix> {
    let channels = dataset.channels();
    let norms: Vec<f64> = crate::exec::map_range(channels.len(), |i| channels[i].norm());
    if measure != Measure::Euclidean {
        if let Some(index) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::ZeroNorm { index });
        }
    }
    DistanceMatrix::from_pairs(channels.len(), |i, j| {
        let (a, b) = (channels[i].entries(), channels[j].entries());
        Ok(match measure {
            Measure::Euclidean => euclidean_kernel(a, b),
            Measure::Normalized => normalized_kernel(a, norms[i], b, norms[j]),
            Measure::PhaseInsensitive => phase_insensitive_kernel(a, norms[i], b, norms[j]),
        })
    })
}
