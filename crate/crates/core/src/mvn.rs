//! Multivariate normal crossing probabilities.
//!
//! [`union_crossing_probability`] returns `P(Z_d >= b_d for some d)` for a
//! standard normal vector with the given correlation. One dimension is closed
//! form; two and three dimensions use one-dimensional quadrature ([`crate::normal::bvn_lower`], [`crate::normal::tvn_lower`]);
//! higher dimensions use Genz's separation-of-variables transform with
//! variable reordering, where the last two or three variables are integrated
//! in closed form and the rest over randomly shifted rank-1 lattices with the
//! baker's transform and antithetic sampling. Shifts come from a
//! seeded generator so results are reproducible bit for bit.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LATTICES;
use crate::normal::{
    bvn_lower, normal_cdf, normal_pdf, normal_sf, quantile_unchecked, tvn_lower, tvn_lower_with,
};

/// Symmetry tolerance for correlation input.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues in `(-PSD_REPAIR_TOL, 0)` are clipped; anything lower is rejected.
pub const PSD_REPAIR_TOL: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-10;
const SHIFTS: usize = 12;
/// Error attributed to closed-form evaluations in up to three dimensions.
const EXACT_ERROR: f64 = 1e-14;
/// Integration fails once its error estimate exceeds this multiple of the tolerance.
pub const FAILURE_FACTOR: f64 = 1000.0;
/// A comparison is settled once the estimate is this many error bounds away.
pub const SETTLE_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal and range, then checks positive
    /// semidefiniteness, repairing tiny negative eigenvalues.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidCorrelation("matrix is empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: format!("correlation row {}", i + 1),
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        for i in 0..dim {
            if (rows[i][i] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidCorrelation(format!(
                    "diagonal entry {} is {}, expected 1",
                    i + 1,
                    rows[i][i]
                )));
            }
            for j in 0..dim {
                let v = rows[i][j];
                if !v.is_finite() || v.abs() > 1.0 + SYMMETRY_TOL {
                    return Err(Error::InvalidCorrelation(format!(
                        "entry ({}, {}) = {v} is outside [-1, 1]",
                        i + 1,
                        j + 1
                    )));
                }
                if (v - rows[j][i]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidCorrelation(format!(
                        "not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let v = if i == j {
                    1.0
                } else {
                    (0.5 * (rows[i][j] + rows[j][i])).clamp(-1.0, 1.0)
                };
                data.push(v);
            }
        }
        let matrix = Self { dim, data };
        let min_eig = matrix.min_eigenvalue();
        if min_eig < -PSD_REPAIR_TOL {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min_eig,
            });
        }
        if min_eig < 0.0 {
            Ok(matrix.clip_eigenvalues())
        } else {
            Ok(matrix)
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Principal sub-matrix on `indices`, in the given order.
    pub fn principal(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim) {
            return Err(Error::IndexOutOfRange {
                what: "correlation matrix".into(),
                index: bad,
                size: self.dim,
            });
        }
        let dim = indices.len();
        let mut data = Vec::with_capacity(dim * dim);
        for &i in indices {
            for &j in indices {
                data.push(self.get(i, j));
            }
        }
        Ok(Self { dim, data })
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn clip_eigenvalues(&self) -> Self {
        let eig = SymmetricEigen::new(self.to_dmatrix());
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        let rebuilt =
            &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let d: Vec<f64> = (0..self.dim)
            .map(|i| rebuilt[(i, i)].max(f64::MIN_POSITIVE).sqrt())
            .collect();
        let mut data = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = if i == j {
                    1.0
                } else {
                    (0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]) / (d[i] * d[j])).clamp(-1.0, 1.0)
                };
                data.push(v);
            }
        }
        Self {
            dim: self.dim,
            data,
        }
    }

    /// Lower-triangular factor `L` with `L L^T = R`; zero columns for
    /// directions with no remaining variance.
    pub fn cholesky(&self) -> Vec<Vec<f64>> {
        let n = self.dim;
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    l[i][i] = if s > PIVOT_EPS { s.sqrt() } else { 0.0 };
                } else if l[j][j] > 0.0 {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MvnSettings {
    /// Target absolute error of each probability.
    pub tol: f64,
    pub seed: u64,
    /// Largest integration dimension accepted.
    pub max_dim: usize,
    /// Budget of integrand evaluations per probability.
    pub max_evaluations: usize,
}

impl Default for MvnSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            seed: 20_230_801,
            max_dim: 20,
            max_evaluations: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProbability {
    pub value: f64,
    /// Estimated absolute integration error (three standard errors across shifts).
    pub error_bound: f64,
}

/// `P(∪_d {Z_d >= b_d})`. Bounds of `+inf` are dropped before integration.
pub fn union_crossing_probability(
    bounds: &[f64],
    corr: &CorrelationMatrix,
    settings: &MvnSettings,
) -> Result<TailProbability> {
    union_crossing(bounds, corr, settings, None)
}

/// Like [`union_crossing_probability`], but integration may stop as soon as
/// the estimate is clearly on one side of `threshold`. The returned value is
/// then only good for that comparison.
pub fn union_crossing_versus(
    bounds: &[f64],
    corr: &CorrelationMatrix,
    settings: &MvnSettings,
    threshold: f64,
) -> Result<TailProbability> {
    union_crossing(bounds, corr, settings, Some(threshold))
}

fn union_crossing(
    bounds: &[f64],
    corr: &CorrelationMatrix,
    settings: &MvnSettings,
    threshold: Option<f64>,
) -> Result<TailProbability> {
    if bounds.len() != corr.dim() {
        return Err(Error::DimensionMismatch {
            what: "crossing bounds".into(),
            expected: corr.dim(),
            found: bounds.len(),
        });
    }
    if !(settings.tol > 0.0) {
        return Err(Error::OutOfRange {
            what: "integration tolerance".into(),
            range: "(0, inf)",
            value: settings.tol,
        });
    }
    if bounds.iter().any(|b| b.is_nan()) {
        return Err(Error::InvalidCorrelation("crossing bound is NaN".into()));
    }
    if bounds.contains(&f64::NEG_INFINITY) {
        return Ok(TailProbability {
            value: 1.0,
            error_bound: 0.0,
        });
    }
    let keep: Vec<usize> = (0..bounds.len())
        .filter(|&i| bounds[i].is_finite())
        .collect();
    if keep.len() > settings.max_dim {
        return Err(Error::DimensionCap {
            dim: keep.len(),
            cap: settings.max_dim,
        });
    }
    let b: Vec<f64> = keep.iter().map(|&i| bounds[i]).collect();
    let r = |a: usize, c: usize| corr.get(keep[a], keep[c]);
    let exact = |below: f64| TailProbability {
        value: (1.0 - below).clamp(0.0, 1.0),
        error_bound: EXACT_ERROR,
    };
    match keep.len() {
        0 => Ok(TailProbability {
            value: 0.0,
            error_bound: 0.0,
        }),
        1 => Ok(TailProbability {
            value: normal_sf(b[0]),
            error_bound: EXACT_ERROR,
        }),
        2 => Ok(exact(bvn_lower(b[0], b[1], r(0, 1)))),
        3 => Ok(exact(tvn_lower(
            [b[0], b[1], b[2]],
            r(0, 1),
            r(0, 2),
            r(1, 2),
        ))),
        _ => {
            let sub = corr.principal(&keep)?;
            let (below, error_bound, settled) =
                lattice_orthant(&b, &sub, settings, threshold.map(|t| 1.0 - t));
            if !settled && error_bound > FAILURE_FACTOR * settings.tol {
                return Err(Error::IntegrationTolerance {
                    error_bound,
                    allowed: FAILURE_FACTOR * settings.tol,
                });
            }
            Ok(TailProbability {
                value: (1.0 - below).clamp(0.0, 1.0),
                error_bound,
            })
        }
    }
}

/// Reordered Cholesky factor for the separation-of-variables integrand.
struct Transformed {
    dim: usize,
    /// Row-major lower triangle.
    chol: Vec<f64>,
    bounds: Vec<f64>,
    /// The last variables integrated in closed form given the others.
    tail: Option<Tail>,
}

struct Tail {
    sd: Vec<f64>,
    /// `(r12, r13, r23)`; only `r12` is used for a pair.
    r: [f64; 3],
}

/// Conditional standard deviations below this leave the tail to sampling.
const TAIL_MIN_SD: f64 = 1e-4;
/// Quadrature tolerance of the closed-form tail.
const TAIL_EPS: f64 = 1e-10;

impl Transformed {
    /// Pivot on the variable with the smallest expected conditional
    /// probability at each step.
    fn new(bounds: &[f64], corr: &CorrelationMatrix) -> Self {
        let n = bounds.len();
        let mut cov: Vec<f64> = (0..n * n).map(|x| corr.get(x / n, x % n)).collect();
        let mut b = bounds.to_vec();
        let mut l = vec![0.0; n * n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut best = i;
            let mut best_val = f64::INFINITY;
            for j in i..n {
                let mut var = cov[j * n + j];
                let mut mean = 0.0;
                for k in 0..i {
                    var -= l[j * n + k] * l[j * n + k];
                    mean += l[j * n + k] * y[k];
                }
                let val = if var > PIVOT_EPS {
                    normal_cdf((b[j] - mean) / var.sqrt())
                } else {
                    f64::INFINITY
                };
                if val < best_val {
                    best_val = val;
                    best = j;
                }
            }
            if best != i {
                b.swap(i, best);
                for k in 0..n {
                    cov.swap(i * n + k, best * n + k);
                }
                for k in 0..n {
                    cov.swap(k * n + i, k * n + best);
                }
                for k in 0..i {
                    l.swap(i * n + k, best * n + k);
                }
            }
            let mut var = cov[i * n + i];
            for k in 0..i {
                var -= l[i * n + k] * l[i * n + k];
            }
            let lii = if var > PIVOT_EPS { var.sqrt() } else { 0.0 };
            l[i * n + i] = lii;
            for j in i + 1..n {
                let mut s = cov[j * n + i];
                for k in 0..i {
                    s -= l[j * n + k] * l[i * n + k];
                }
                l[j * n + i] = if lii > 0.0 { s / lii } else { 0.0 };
            }
            // mean of the truncated variable feeds the next pivot choice
            y[i] = if lii > 0.0 {
                let mut mean = 0.0;
                for k in 0..i {
                    mean += l[i * n + k] * y[k];
                }
                let z = (b[i] - mean) / lii;
                let p = normal_cdf(z);
                if p > 1e-300 {
                    -normal_pdf(z) / p
                } else {
                    z
                }
            } else {
                0.0
            };
        }
        // a trivariate tail pays off in low dimension, a bivariate one beyond
        let size = if n <= 5 { 3 } else { 2 };
        let tail = (n >= 4).then(|| Self::tail(&l, n, size)).flatten();
        Self {
            dim: n,
            chol: l,
            bounds: b,
            tail,
        }
    }

    /// Residual covariance of the last `size` variables given the rest.
    fn tail(l: &[f64], n: usize, size: usize) -> Option<Tail> {
        let outer = n - size;
        let cov = |i: usize, j: usize| {
            (outer..=i.min(j))
                .map(|k| l[i * n + k] * l[j * n + k])
                .sum::<f64>()
        };
        let sd: Vec<f64> = (outer..n).map(|i| cov(i, i).sqrt()).collect();
        if sd.iter().any(|&v| !(v > TAIL_MIN_SD)) {
            return None;
        }
        let r = |a: usize, c: usize| (cov(outer + a, outer + c) / (sd[a] * sd[c])).clamp(-1.0, 1.0);
        let r = if size == 3 {
            [r(0, 1), r(0, 2), r(1, 2)]
        } else {
            [r(0, 1), 0.0, 0.0]
        };
        Some(Tail { sd, r })
    }

    /// Number of integration variables.
    fn sampled(&self) -> usize {
        match &self.tail {
            Some(t) => self.dim - t.sd.len(),
            None => self.dim - 1,
        }
    }

    /// Integrand over `[0,1]^sampled` whose mean is `P(Z < b)`.
    #[inline]
    fn integrand(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let n = self.dim;
        let stop = self.tail.as_ref().map_or(n, |t| n - t.sd.len());
        let mut f = 1.0;
        for i in 0..stop {
            let row = &self.chol[i * n..i * n + i + 1];
            let mut s = 0.0;
            for k in 0..i {
                s += row[k] * y[k];
            }
            let lii = row[i];
            let e = if lii > 0.0 {
                normal_cdf((self.bounds[i] - s) / lii)
            } else if s < self.bounds[i] {
                1.0
            } else {
                0.0
            };
            f *= e;
            if f == 0.0 {
                return 0.0;
            }
            if i + 1 < n {
                y[i] = if lii > 0.0 {
                    quantile_unchecked((w[i] * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
                } else {
                    0.0
                };
            }
        }
        let Some(tail) = &self.tail else { return f };
        let mut h = [0.0; 3];
        for (q, i) in (stop..n).enumerate() {
            let row = &self.chol[i * n..i * n + stop];
            let s: f64 = row.iter().zip(&y[..stop]).map(|(a, b)| a * b).sum();
            h[q] = (self.bounds[i] - s) / tail.sd[q];
        }
        let [r12, r13, r23] = tail.r;
        f * if tail.sd.len() == 3 {
            tvn_lower_with(h, r12, r13, r23, TAIL_EPS)
        } else {
            bvn_lower(h[0], h[1], r12)
        }
    }
}

/// `(P(Z < b), error_bound, settled)` for dimension four or more. Works
/// through the embedded rank-1 lattices in increasing size until the error
/// estimate is within tolerance or the budget runs out; `settled` means it
/// stopped early on a clear comparison.
fn lattice_orthant(
    bounds: &[f64],
    corr: &CorrelationMatrix,
    settings: &MvnSettings,
    settle_at: Option<f64>,
) -> (f64, f64, bool) {
    let t = Transformed::new(bounds, corr);
    let s = t.sampled();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let shifts: Vec<Vec<f64>> = (0..SHIFTS)
        .map(|_| (0..s).map(|_| rng.random::<f64>()).collect())
        .collect();

    let mut x = vec![0.0; s];
    let mut xa = vec![0.0; s];
    let mut y = vec![0.0; t.dim];
    let mut spent = 0usize;

    let mut best = (0.0, f64::INFINITY);
    for &(n, ref z) in &LATTICES {
        let cost = 2 * SHIFTS * n;
        if spent > 0 && spent + cost > settings.max_evaluations {
            break;
        }
        spent += cost;
        let step: Vec<f64> = z[..s].iter().map(|&g| g as f64 / n as f64).collect();
        let means: Vec<f64> = shifts
            .iter()
            .map(|shift| {
                let mut acc = 0.0;
                for i in 0..n {
                    let fi = i as f64;
                    for d in 0..s {
                        let u = (fi * step[d] + shift[d]).fract();
                        let v = (2.0 * u - 1.0).abs();
                        x[d] = v;
                        xa[d] = 1.0 - v;
                    }
                    acc += t.integrand(&x, &mut y) + t.integrand(&xa, &mut y);
                }
                acc / (2 * n) as f64
            })
            .collect();
        let mean = means.iter().sum::<f64>() / SHIFTS as f64;
        let var =
            means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (SHIFTS * (SHIFTS - 1)) as f64;
        best = (mean.clamp(0.0, 1.0), 3.0 * var.sqrt());
        if best.1 <= settings.tol {
            break;
        }
        if settle_at.is_some_and(|t| (best.0 - t).abs() > SETTLE_MARGIN * best.1) {
            return (best.0, best.1, true);
        }
    }
    (best.0, best.1, false)
}
