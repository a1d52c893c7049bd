//! Neighborhood-preservation scores for charts and a linear PCA baseline.
//!
//! Continuity and trustworthiness compare Euclidean proximity ranks in the
//! true positions and in the chart. With `r(i, j)` the rank of `j` among the
//! neighbors of `i` (nearest is 1, self excluded, ties by index):
//!
//! ```text
//! CT(K) = 1 - 2 / (N K (2N - 3K - 1)) * sum_i sum_{j in V_i} (r_chart(i, j) - K)
//! ```
//!
//! where `V_i` holds the `K` spatial neighbors of `i` that are not among its
//! `K` chart neighbors. Trustworthiness swaps the roles of space and chart.

use crate::channel::{Chart, ChannelDataset, Points};
use crate::error::{Error, Result};
use crate::linalg::{fix_sign, leading_eigenpairs, SolverOptions, SymMatrix};

/// Proximity ranks: `rank(i, j)` for `j != i` runs over `1..N`; the
/// diagonal holds 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    n: usize,
    ranks: Vec<u32>,
}

impl RankTable {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rank(&self, i: usize, j: usize) -> u32 {
        self.ranks[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ranks[i * self.n..(i + 1) * self.n]
    }
}

/// Euclidean proximity ranks per row, ties broken by ascending index.
pub fn rank_table(points: &Points) -> Result<RankTable> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Domain("rank table needs at least two points".into()));
    }
    if u32::try_from(n).is_err() {
        return Err(Error::Domain(format!("{n} points exceed the rank range")));
    }
    if !points.is_finite() {
        return Err(Error::Domain("non-finite coordinate".into()));
    }
    let mut ranks = vec![0u32; n * n];
    crate::exec::for_each_row(&mut ranks, n, |i, row| {
        let d: Vec<f64> = (0..n).map(|j| points.squared_distance(i, j)).collect();
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_unstable_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        for (r, j) in order.into_iter().enumerate() {
            row[j] = r as u32 + 1;
        }
    });
    Ok(RankTable { n, ranks })
}

/// True when `K` keeps the normalizer `2 / (N K (2N - 3K - 1))` positive.
///
/// The normalizer is the worst-case penalty only for `2K < N`; above that a
/// badly scrambled chart can score below zero.
pub fn valid_k(k: usize, n: usize) -> bool {
    k >= 1 && 3 * k + 1 < 2 * n
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if valid_k(k, n) {
        Ok(())
    } else {
        Err(Error::InvalidK { k, n })
    }
}

/// `1 - norm * sum (r_penal(i, j) - K)` over pairs that are `K`-neighbors
/// under `select` but not under `penal`.
fn neighborhood_score(select: &RankTable, penal: &RankTable, k: usize) -> f64 {
    let n = select.len();
    let kk = k as u32;
    let per_row = crate::exec::map_range(n, |i| {
        select
            .row(i)
            .iter()
            .zip(penal.row(i))
            .filter(|&(&s, &p)| s != 0 && s <= kk && p > kk)
            .map(|(_, &p)| u64::from(p - kk))
            .sum::<u64>()
    });
    let total: u64 = per_row.iter().sum();
    let (nf, kf) = (n as f64, k as f64);
    1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * total as f64
}

fn check_pair(positions: &Points, chart: &Points) -> Result<()> {
    if positions.len() != chart.len() {
        return Err(Error::Domain(format!(
            "{} positions but {} chart points",
            positions.len(),
            chart.len()
        )));
    }
    Ok(())
}

/// Continuity of `chart` with respect to `positions` at neighborhood size `k`.
pub fn continuity(positions: &Points, chart: &Points, k: usize) -> Result<f64> {
    check_pair(positions, chart)?;
    check_k(k, positions.len())?;
    Ok(neighborhood_score(&rank_table(positions)?, &rank_table(chart)?, k))
}

/// Trustworthiness; equals `continuity(chart, positions, k)`.
pub fn trustworthiness(positions: &Points, chart: &Points, k: usize) -> Result<f64> {
    check_pair(positions, chart)?;
    check_k(k, positions.len())?;
    Ok(neighborhood_score(&rank_table(chart)?, &rank_table(positions)?, k))
}

/// Scores over a list of neighborhood sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityCurve {
    pub ks: Vec<usize>,
    pub scores: Vec<f64>,
}

impl QualityCurve {
    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            return f64::NAN;
        }
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

/// Continuity and trustworthiness for every `K` in `ks`; rank tables are
/// computed once.
pub fn quality_curves(positions: &Points, chart: &Points, ks: &[usize]) -> Result<(QualityCurve, QualityCurve)> {
    check_pair(positions, chart)?;
    for &k in ks {
        check_k(k, positions.len())?;
    }
    let space = rank_table(positions)?;
    let embedded = rank_table(chart)?;
    let ct = ks.iter().map(|&k| neighborhood_score(&space, &embedded, k)).collect();
    let tw = ks.iter().map(|&k| neighborhood_score(&embedded, &space, k)).collect();
    Ok((
        QualityCurve {
            ks: ks.to_vec(),
            scores: ct,
        },
        QualityCurve {
            ks: ks.to_vec(),
            scores: tw,
        },
    ))
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Domain("spearman needs two equal-length samples of size >= 2".into()));
    }
    let (ra, rb) = (average_ranks(a)?, average_ranks(b)?);
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Domain("spearman undefined for a constant sample".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

fn average_ranks(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        order[start..end].iter().for_each(|&i| ranks[i] = avg);
        start = end;
    }
    Ok(ranks)
}

/// Real-stacked, centered channel features: row `i` holds the real parts of
/// channel `i` followed by its imaginary parts, minus the column mean.
pub fn centered_features(dataset: &ChannelDataset) -> Points {
    let n = dataset.len();
    let m = dataset.channel_dim();
    let width = 2 * m;
    let mut data = Vec::with_capacity(n * width);
    for h in dataset.channels() {
        data.extend(h.entries().iter().map(|z| z.re));
        data.extend(h.entries().iter().map(|z| z.im));
    }
    let mut mean = vec![0.0; width];
    for row in data.chunks(width) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for row in data.chunks_mut(width) {
        row.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
    }
    Points::new(width, data).expect("rectangular by construction")
}

/// Which matrix the PCA eigensolve runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaRoute {
    /// Feature covariance, `2M x 2M`.
    Covariance,
    /// Sample Gram matrix, `N x N`; same nonzero spectrum.
    Gram,
}

/// Projects the channels onto their top `dim` principal directions.
///
/// Picks the smaller of the covariance and Gram eigenproblems. Each chart
/// column's sign is fixed so that its largest-magnitude entry is positive,
/// which makes both routes return the same chart.
pub fn pca_baseline(dataset: &ChannelDataset, dim: usize) -> Result<Chart> {
    let x = centered_features(dataset);
    let route = if x.dim() <= x.len() {
        PcaRoute::Covariance
    } else {
        PcaRoute::Gram
    };
    pca_with_route(&x, dim, route)
}

/// PCA of centered feature rows through a chosen route.
pub fn pca_with_route(x: &Points, dim: usize, route: PcaRoute) -> Result<Chart> {
    let (n, w) = (x.len(), x.dim());
    if dim == 0 || dim >= n {
        return Err(Error::Domain(format!("chart dimension {dim} must lie in 1..{n}")));
    }
    if dim > w {
        return Err(Error::RankDeficient { dim });
    }
    let rows = x.as_slice();
    let nf = n as f64;
    let (matrix, order) = match route {
        PcaRoute::Covariance => {
            let mut c = vec![0.0; w * w];
            crate::exec::for_each_row(&mut c, w, |a, out| {
                for r in rows.chunks(w) {
                    let xa = r[a];
                    if xa != 0.0 {
                        out.iter_mut().zip(r).for_each(|(o, xb)| *o += xa * xb);
                    }
                }
                out.iter_mut().for_each(|o| *o /= nf);
            });
            (symmetrize(c, w), w)
        }
        PcaRoute::Gram => {
            let mut g = vec![0.0; n * n];
            crate::exec::for_each_row(&mut g, n, |i, out| {
                let ri = &rows[i * w..(i + 1) * w];
                for (o, rj) in out.iter_mut().zip(rows.chunks(w)) {
                    *o = ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>() / nf;
                }
            });
            (symmetrize(g, n), n)
        }
    };
    let pairs = leading_eigenpairs(&SymMatrix::new(order, matrix)?, dim, SolverOptions::default())?;
    let top = pairs.values[0].max(0.0);
    if top <= 0.0 || pairs.values[dim - 1] <= 1e-12 * top {
        return Err(Error::RankDeficient { dim });
    }
    let mut columns: Vec<Vec<f64>> = match route {
        PcaRoute::Covariance => pairs
            .vectors
            .iter()
            .map(|v| rows.chunks(w).map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect())
            .collect(),
        PcaRoute::Gram => pairs
            .values
            .iter()
            .zip(&pairs.vectors)
            .map(|(lambda, u)| {
                let s = (nf * lambda).sqrt();
                u.iter().map(|x| s * x).collect()
            })
            .collect(),
    };
    columns.iter_mut().for_each(|c| fix_sign(c));
    let data = (0..n).flat_map(|i| columns.iter().map(move |c| c[i])).collect();
    Chart::new(Points::new(dim, data)?)
}

/// Averages mirrored entries so the matrix is exactly symmetric.
fn symmetrize(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
    a
}
