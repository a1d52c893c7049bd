//! Domain types: channel vectors, datasets, point sets, distance matrices and charts.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One user's uplink channel over `A` antennas and `S` subcarriers.
///
/// Entries are stored antenna-major within subcarrier blocks: entry
/// `m = s * A + a` holds antenna `a` on subcarrier `s`, which is the layout of
/// the Kronecker product `f(tau) ⊗ e(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    entries: Vec<Complex64>,
    antennas: usize,
    subcarriers: usize,
}

impl ChannelVector {
    pub fn new(entries: Vec<Complex64>, antennas: usize, subcarriers: usize) -> Result<Self> {
        if antennas == 0 || subcarriers == 0 {
            return Err(Error::Invariant(format!(
                "antenna count ({antennas}) and subcarrier count ({subcarriers}) must be positive"
            )));
        }
        if entries.len() != antennas * subcarriers {
            return Err(Error::Invariant(format!(
                "channel has {} entries, expected A*S = {}*{} = {}",
                entries.len(),
                antennas,
                subcarriers,
                antennas * subcarriers
            )));
        }
        Ok(Self {
            entries,
            antennas,
            subcarriers,
        })
    }

    /// Wraps a single-subcarrier channel.
    pub fn from_antennas(entries: Vec<Complex64>) -> Result<Self> {
        let a = entries.len();
        Self::new(entries, a, 1)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Total dimension `M = A * S`.
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, antenna: usize, subcarrier: usize) -> Complex64 {
        self.entries[subcarrier * self.antennas + antenna]
    }

    pub fn norm(&self) -> f64 {
        crate::distance::norm(&self.entries)
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            entries: self.entries.iter().map(|&x| x * factor).collect(),
            antennas: self.antennas,
            subcarriers: self.subcarriers,
        }
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.entries
    }
}

/// `n` points of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invariant("point dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Invariant(format!(
                "{} coordinates do not split into rows of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != dim {
                return Err(Error::Invariant(format!(
                    "point {i} has dimension {}, expected {dim}",
                    r.as_ref().len()
                )));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut means = vec![0.0; self.dim];
        for row in self.rows() {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.squared_distance(i, j).sqrt()
    }
}

/// A set of channels sharing one array/frequency configuration.
///
/// Immutable once built. `metadata` is a runtime description only; the binary
/// dataset format does not persist it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset {
    channels: Vec<ChannelVector>,
    positions: Option<Points>,
    frequency_grid: Vec<f64>,
    metadata: String,
}

impl ChannelDataset {
    pub fn new(
        channels: Vec<ChannelVector>,
        positions: Option<Points>,
        frequency_grid: Vec<f64>,
        metadata: impl Into<String>,
    ) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Invariant("dataset must hold at least one channel".into()))?;
        let (a, s) = (first.antennas(), first.subcarriers());
        for (i, ch) in channels.iter().enumerate() {
            if ch.antennas() != a || ch.subcarriers() != s {
                return Err(Error::Invariant(format!(
                    "channel {i} has shape A={}, S={}; dataset shape is A={a}, S={s}",
                    ch.antennas(),
                    ch.subcarriers()
                )));
            }
            if ch.entries().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Invariant(format!("channel {i} has a non-finite entry")));
            }
        }
        if frequency_grid.len() != s {
            return Err(Error::Invariant(format!(
                "frequency grid has {} entries, expected S = {s}",
                frequency_grid.len()
            )));
        }
        if frequency_grid.iter().any(|f| !f.is_finite())
            || frequency_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Invariant(
                "frequency grid must be finite and strictly increasing".into(),
            ));
        }
        if let Some(p) = &positions {
            if p.len() != channels.len() {
                return Err(Error::Invariant(format!(
                    "{} positions for {} channels",
                    p.len(),
                    channels.len()
                )));
            }
            if !(p.dim() == 2 || p.dim() == 3) {
                return Err(Error::Invariant(format!(
                    "positions must be 2-D or 3-D, got {}-D",
                    p.dim()
                )));
            }
            if !p.is_finite() {
                return Err(Error::Invariant("non-finite position".into()));
            }
        }
        Ok(Self {
            channels,
            positions,
            frequency_grid,
            metadata: metadata.into(),
        })
    }

    pub fn channels(&self) -> &[ChannelVector] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &ChannelVector {
        &self.channels[i]
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn antennas(&self) -> usize {
        self.channels[0].antennas()
    }

    pub fn subcarriers(&self) -> usize {
        self.channels[0].subcarriers()
    }

    pub fn channel_dim(&self) -> usize {
        self.antennas() * self.subcarriers()
    }

    pub fn positions(&self) -> Option<&Points> {
        self.positions.as_ref()
    }

    pub fn frequency_grid(&self) -> &[f64] {
        &self.frequency_grid
    }

    pub fn metadata(&self) -> &str {
        &self.metadata
    }
}

/// Symmetric `N x N` matrix of nonnegative distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds the matrix by evaluating `f(i, j)` once for every `i < j` and
    /// mirroring the result, so symmetry holds bit-for-bit.
    pub fn from_pairs<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync + Send,
    {
        let upper = crate::exec::try_map_range(n, |i| {
            ((i + 1)..n).map(|j| f(i, j)).collect::<Result<Vec<f64>>>()
        })?;
        let mut values = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            for (off, d) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self::from_values(n, values)
    }

    /// Validates a full row-major matrix.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Invariant(format!(
                "distance matrix of size {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::Invariant(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let d = values[i * n + j];
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::Invariant(format!(
                        "entry ({i}, {j}) = {d} is not a finite nonnegative distance"
                    )));
                }
                if d.to_bits() != values[j * n + i].to_bits() {
                    return Err(Error::Invariant(format!("asymmetric entry ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Chart coordinates, one point per training channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    points: Points,
}

impl Chart {
    pub fn new(points: Points) -> Result<Self> {
        if !points.is_finite() {
            return Err(Error::Invariant("chart has a non-finite coordinate".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Points {
        self.points
    }

    /// Column means within `tol` times the column standard deviation.
    pub fn is_centered(&self, tol: f64) -> bool {
        let means = self.points.column_means();
        let n = self.len().max(1) as f64;
        (0..self.dim()).all(|c| {
            let var = self
                .points
                .rows()
                .map(|r| (r[c] - means[c]).powi(2))
                .sum::<f64>()
                / n;
            means[c].abs() <= tol * var.sqrt().max(f64::MIN_POSITIVE)
        })
    }
}
