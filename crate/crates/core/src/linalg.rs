//! Dense symmetric eigensolvers.
//!
//! [`leading_eigenpairs`] runs block subspace iteration with Rayleigh-Ritz
//! projection from a fixed identity start, so the result is a pure function
//! of the matrix. The projected problems are solved with cyclic Jacobi.

use crate::error::{Error, Result};

/// Extra block columns iterated beyond the requested count; they speed up
/// convergence from `lambda_{count+1}/lambda_count` to
/// `lambda_{count+GUARD+1}/lambda_count`.
pub const GUARD_COLUMNS: usize = 8;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Invariant(format!(
                "matrix of order {n} needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `self * block` for a row-major `n x width` block.
    fn apply(&self, block: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n * width];
        crate::exec::for_each_row(&mut out, width, |i, out_row| {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    let b = &block[k * width..(k + 1) * width];
                    for (o, &x) in out_row.iter_mut().zip(b) {
                        *o += a * x;
                    }
                }
            }
        });
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
        }
    }
}

/// Leading eigenpairs, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// `vectors[c]` is the unit eigenvector for `values[c]`.
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of a row-major `p x p` matrix.
pub fn jacobi_eigen(matrix: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
            .map(|(i, j)| a[i * p + j] * a[i * p + j])
            .sum();
        let diag: f64 = (0..p).map(|i| a[i * p + i] * a[i * p + i]).sum();
        if off == 0.0 || off <= 1e-32 * diag {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let aij = a[i * p + j];
                if aij == 0.0 {
                    continue;
                }
                let theta = (a[j * p + j] - a[i * p + i]) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (aki, akj) = (a[k * p + i], a[k * p + j]);
                    a[k * p + i] = c * aki - s * akj;
                    a[k * p + j] = s * aki + c * akj;
                }
                for k in 0..p {
                    let (aik, ajk) = (a[i * p + k], a[j * p + k]);
                    a[i * p + k] = c * aik - s * ajk;
                    a[j * p + k] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let (vki, vkj) = (v[k * p + i], v[k * p + j]);
                    v[k * p + i] = c * vki - s * vkj;
                    v[k * p + j] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y * p + y].total_cmp(&a[x * p + x]).then(x.cmp(&y)));
    let values = order.iter().map(|&c| a[c * p + c]).collect();
    let mut vectors = vec![0.0; p * p];
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..p {
            vectors[r * p + new_c] = v[r * p + old_c];
        }
    }
    (values, vectors)
}

/// Orthonormalizes the columns of a row-major `n x width` block in place by
/// twice-applied modified Gram-Schmidt. Columns that collapse are replaced by
/// the next identity column that is independent of the ones kept.
fn orthonormalize(block: &mut [f64], n: usize, width: usize) {
    let col_dot = |b: &[f64], x: usize, y: usize| (0..n).map(|r| b[r * width + x] * b[r * width + y]).sum::<f64>();
    let mut next_identity = width;
    for c in 0..width {
        let mut attempts = 0;
        loop {
            let before = col_dot(block, c, c).sqrt();
            for _pass in 0..2 {
                for prev in 0..c {
                    let proj = col_dot(block, prev, c);
                    for r in 0..n {
                        block[r * width + c] -= proj * block[r * width + prev];
                    }
                }
            }
            let after = col_dot(block, c, c).sqrt();
            if after > 1e-10 * before && after > f64::MIN_POSITIVE * 1e10 {
                for r in 0..n {
                    block[r * width + c] /= after;
                }
                break;
            }
            attempts += 1;
            if attempts > n {
                for r in 0..n {
                    block[r * width + c] = 0.0;
                }
                break;
            }
            for r in 0..n {
                block[r * width + c] = 0.0;
            }
            block[(next_identity % n) * width + c] = 1.0;
            next_identity += 1;
        }
    }
}

/// Makes the entry of largest magnitude positive (ties: lowest index).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `count` algebraically largest eigenpairs of `matrix` among its
/// dominant invariant subspace, by block subspace iteration with
/// Rayleigh-Ritz. Converged when every requested Ritz pair has residual
/// `||A x - theta x|| <= tolerance * max|theta|`.
pub fn leading_eigenpairs(matrix: &SymMatrix, count: usize, opts: SolverOptions) -> Result<Eigenpairs> {
    let n = matrix.order();
    if count == 0 || count > n {
        return Err(Error::Domain(format!(
            "cannot extract {count} eigenpairs from a matrix of order {n}"
        )));
    }
    let p = (count + GUARD_COLUMNS).min(n);
    let mut q = vec![0.0; n * p];
    for c in 0..p {
        q[c * p + c] = 1.0;
    }
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        let z = matrix.apply(&q, p);
        let mut h = vec![0.0; p * p];
        for r in 0..n {
            let (qr, zr) = (&q[r * p..(r + 1) * p], &z[r * p..(r + 1) * p]);
            for a in 0..p {
                for b in 0..p {
                    h[a * p + b] += qr[a] * zr[b];
                }
            }
        }
        for a in 0..p {
            for b in (a + 1)..p {
                let s = 0.5 * (h[a * p + b] + h[b * p + a]);
                h[a * p + b] = s;
                h[b * p + a] = s;
            }
        }
        let (theta, w) = jacobi_eigen(&h, p);
        // Ritz vectors X = Q W and their images A X = Z W.
        let mut x = vec![0.0; n * p];
        let mut ax = vec![0.0; n * p];
        for r in 0..n {
            for a in 0..p {
                let (qa, za) = (q[r * p + a], z[r * p + a]);
                if qa == 0.0 && za == 0.0 {
                    continue;
                }
                for c in 0..p {
                    x[r * p + c] += qa * w[a * p + c];
                    ax[r * p + c] += za * w[a * p + c];
                }
            }
        }
        let scale = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        residual = (0..count)
            .map(|c| {
                (0..n)
                    .map(|r| (ax[r * p + c] - theta[c] * x[r * p + c]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if residual <= opts.tolerance * scale {
            let vectors = (0..count)
                .map(|c| {
                    let mut v: Vec<f64> = (0..n).map(|r| x[r * p + c]).collect();
                    let len = v.iter().map(|e| e * e).sum::<f64>().sqrt();
                    if len > 0.0 {
                        v.iter_mut().for_each(|e| *e /= len);
                    }
                    fix_sign(&mut v);
                    v
                })
                .collect();
            return Ok(Eigenpairs {
                values: theta[..count].to_vec(),
                vectors,
                iterations: iteration,
            });
        }
        orthonormalize(&mut ax, n, p);
        q = ax;
    }
    let scale = matrix.frobenius_norm().max(f64::MIN_POSITIVE);
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        residual: residual / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                data[i * n + j] = x;
                data[j * n + i] = x;
            }
        }
        SymMatrix::new(n, data).unwrap()
    }

    fn oracle(m: &SymMatrix) -> Vec<f64> {
        let n = m.order();
        let dense = nalgebra::DMatrix::from_row_slice(n, n, m.data());
        let mut vals: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        vals
    }

    #[test]
    fn jacobi_matches_dense_oracle() {
        for (n, seed) in [(1, 1), (3, 2), (7, 3), (12, 4)] {
            let m = random_symmetric(n, seed);
            let (vals, vecs) = jacobi_eigen(m.data(), n);
            let expected = oracle(&m);
            for (a, b) in vals.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            // A v = lambda v
            for c in 0..n {
                for r in 0..n {
                    let av: f64 = (0..n).map(|k| m.get(r, k) * vecs[k * n + c]).sum();
                    assert!((av - vals[c] * vecs[r * n + c]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn subspace_iteration_finds_dominant_pairs() {
        // positive semidefinite with a clear gap: G G^T
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g: Vec<f64> = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = (0..3).map(|k| g[i * 3 + k] * g[j * 3 + k]).sum();
            }
        }
        let m = SymMatrix::new(n, data).unwrap();
        let pairs = leading_eigenpairs(&m, 2, SolverOptions::default()).unwrap();
        let expected = oracle(&m);
        assert!((pairs.values[0] - expected[0]).abs() < 1e-9 * expected[0]);
        assert!((pairs.values[1] - expected[1]).abs() < 1e-9 * expected[0]);
        for v in &pairs.vectors {
            let len: f64 = v.iter().map(|x| x * x).sum();
            assert!((len - 1.0).abs() < 1e-12);
            let (imax, _) = v.iter().enumerate().fold((0, 0.0f64), |b, (i, x)| if x.abs() > b.1 { (i, x.abs()) } else { b });
            assert!(v[imax] > 0.0);
        }
    }

    #[test]
    fn handles_zero_and_tiny_matrices() {
        let zero = SymMatrix::new(3, vec![0.0; 9]).unwrap();
        let pairs = leading_eigenpairs(&zero, 2, SolverOptions::default()).unwrap();
        assert_eq!(pairs.values, vec![0.0, 0.0]);
        let one = SymMatrix::new(1, vec![4.0]).unwrap();
        assert_eq!(leading_eigenpairs(&one, 1, SolverOptions::default()).unwrap().values, vec![4.0]);
        assert!(leading_eigenpairs(&one, 2, SolverOptions::default()).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let m = random_symmetric(60, 5);
        let opts = SolverOptions {
            tolerance: 1e-14,
            max_iterations: 2,
        };
        assert!(matches!(leading_eigenpairs(&m, 2, opts), Err(Error::Convergence { iterations: 2, .. })));
    }

    #[test]
    fn fix_sign_prefers_lowest_index_on_ties() {
        let mut v = vec![-1.0, 1.0, 0.5];
        fix_sign(&mut v);
        assert_eq!(v, vec![1.0, -1.0, -0.5]);
    }
}
