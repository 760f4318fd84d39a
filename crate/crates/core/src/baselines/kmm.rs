use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{check_kernel_inputs, gaussian_kernel_matrix, median_bandwidth, WeightVector};
use crate::error::{Error, Result};

const JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmmConfig {
    /// Gaussian kernel σ; `None` uses the median pairwise distance.
    pub kernel_bandwidth: Option<f64>,
    /// Upper bound on each weight.
    pub b: f64,
    /// Allowed relative deviation of `Σw` from `m`; `None` uses `(√m − 1)/√m`.
    pub eps: Option<f64>,
    pub max_iter: usize,
    /// Stop once an iteration lowers the objective by less than this.
    pub tol: f64,
}

impl Default for KmmConfig {
    fn default() -> Self {
        Self {
            kernel_bandwidth: None,
            b: 1000.0,
            eps: None,
            max_iter: 20_000,
            tol: 1e-14,
        }
    }
}

impl KmmConfig {
    pub fn eps_for(&self, m: usize) -> f64 {
        self.eps.unwrap_or_else(|| {
            let r = (m as f64).sqrt();
            (r - 1.0) / r
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmmSolution {
    pub weights: WeightVector,
    /// `‖(1/m) Σ wᵢ φ(xᵢ) − (1/n) Σ φ(x'ⱼ)‖²` at the solution.
    pub objective: f64,
    pub iterations: usize,
    pub bandwidth: f64,
    pub eps: f64,
}

/// Quadratic pieces of the squared RKHS distance as a function of `w`.
struct Quadratic {
    /// `K + jitter·I` over source rows.
    k: Array2<f64>,
    /// `κᵢ = Σⱼ k(xᵢ, x'ⱼ)`.
    kappa: Array1<f64>,
    /// `Σⱼₗ k(x'ⱼ, x'ₗ) / n²`.
    constant: f64,
    m: f64,
    n: f64,
}

impl Quadratic {
    fn new(source_x: ArrayView2<f64>, target_x: ArrayView2<f64>, bandwidth: f64) -> Self {
        let mut k = gaussian_kernel_matrix(source_x, source_x, bandwidth);
        for i in 0..k.nrows() {
            k[[i, i]] += JITTER;
        }
        let cross = gaussian_kernel_matrix(source_x, target_x, bandwidth);
        let kappa = cross.sum_axis(ndarray::Axis(1));
        let tt = gaussian_kernel_matrix(target_x, target_x, bandwidth);
        let n = target_x.nrows() as f64;
        Self {
            k,
            kappa,
            constant: tt.sum() / (n * n),
            m: source_x.nrows() as f64,
            n,
        }
    }

    fn value(&self, w: ArrayView1<f64>) -> f64 {
        let kw = self.k.dot(&w);
        w.dot(&kw) / (self.m * self.m) - 2.0 * w.dot(&self.kappa) / (self.m * self.n) + self.constant
    }

    fn gradient(&self, w: ArrayView1<f64>) -> Array1<f64> {
        let kw = self.k.dot(&w);
        kw * (2.0 / (self.m * self.m)) - &self.kappa * (2.0 / (self.m * self.n))
    }

    /// Upper bound on the gradient's Lipschitz constant (Gershgorin on a
    /// nonnegative matrix).
    fn lipschitz(&self) -> f64 {
        let max_row = self
            .k
            .rows()
            .into_iter()
            .map(|r| r.sum())
            .fold(0.0, f64::max);
        2.0 * max_row / (self.m * self.m)
    }
}

/// Cholesky factorization attempt; fails on a matrix that is not positive definite.
fn check_positive_definite(k: &Array2<f64>) -> Result<()> {
    let n = k.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = k[[j, j]];
        for p in 0..j {
            d -= l[[j, p]] * l[[j, p]];
        }
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "kernel matrix is not positive definite after jitter (pivot {j})"
            )));
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = k[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(())
}

/// Euclidean projection onto `{0 ≤ wᵢ ≤ B, lo ≤ Σw ≤ hi}`:
/// `wᵢ = clamp(vᵢ − λ, 0, B)` with the shift `λ` found by bisection.
fn project(v: &Array1<f64>, b: f64, lo: f64, hi: f64) -> Array1<f64> {
    let shifted_sum = |lambda: f64| v.iter().map(|x| (x - lambda).clamp(0.0, b)).sum::<f64>();
    let s0 = shifted_sum(0.0);
    let lambda = if s0 > hi {
        bisect(shifted_sum, 0.0, v.iter().copied().fold(f64::MIN, f64::max), hi)
    } else if s0 < lo {
        let low = v.iter().copied().fold(f64::MAX, f64::min) - b;
        bisect(shifted_sum, low, 0.0, lo)
    } else {
        0.0
    };
    v.mapv(|x| (x - lambda).clamp(0.0, b))
}

/// Finds λ in `[a, z]` with `f(λ) = level` for a non-increasing `f`, returning
/// the end of the final bracket on the feasible side (`f` between the level
/// and the original sum).
fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut z: f64, level: f64) -> f64 {
    // invariant: f(a) ≥ level ≥ f(z)
    let from_above = f(0.0) > level;
    for _ in 0..200 {
        let mid = 0.5 * (a + z);
        if mid <= a || mid >= z {
            break;
        }
        if f(mid) >= level {
            a = mid;
        } else {
            z = mid;
        }
    }
    // approaching from above we need f ≤ level (take z); from below f ≥ level (take a)
    if from_above {
        z
    } else {
        a
    }
}

/// Solves the kernel mean matching quadratic program by projected gradient.
pub fn kmm_solve(source_x: ArrayView2<f64>, target_x: ArrayView2<f64>, config: &KmmConfig) -> Result<KmmSolution> {
    check_kernel_inputs(source_x, target_x)?;
    if !(config.b > 0.0) {
        return Err(Error::invalid("KMM weight cap B must be positive"));
    }
    let m = source_x.nrows();
    let eps = config.eps_for(m);
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("KMM eps must lie in [0, 1), got {eps}")));
    }
    let bandwidth = config
        .kernel_bandwidth
        .unwrap_or_else(|| median_bandwidth(source_x, target_x));
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid("kernel bandwidth must be positive"));
    }
    let lo = m as f64 * (1.0 - eps);
    let hi = m as f64 * (1.0 + eps);
    if lo > m as f64 * config.b {
        return Err(Error::Infeasible("Σw ≥ m(1 − eps) cannot hold with weights ≤ B".into()));
    }

    let q = Quadratic::new(source_x, target_x, bandwidth);
    check_positive_definite(&q.k)?;
    let step = 1.0 / q.lipschitz();

    let mut w = project(&Array1::ones(m), config.b, lo, hi);
    let mut value = q.value(w.view());
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let g = q.gradient(w.view());
        let next = project(&(&w - &(g * step)), config.b, lo, hi);
        let next_value = q.value(next.view());
        let decrease = value - next_value;
        w = next;
        value = next_value;
        if decrease < config.tol {
            break;
        }
    }
    Ok(KmmSolution {
        weights: WeightVector::new(w)?,
        objective: value,
        iterations,
        bandwidth,
        eps,
    })
}

/// Source weights from [`kmm_solve`].
pub fn kmm_weights(source_x: ArrayView2<f64>, target_x: ArrayView2<f64>, config: &KmmConfig) -> Result<WeightVector> {
    Ok(kmm_solve(source_x, target_x, config)?.weights)
}

/// `‖(1/m) Σ wᵢ φ(xᵢ) − (1/n) Σ φ(x'ⱼ)‖²` for arbitrary `w`, without jitter.
pub fn kmm_objective(source_x: ArrayView2<f64>, target_x: ArrayView2<f64>, w: ArrayView1<f64>, bandwidth: f64) -> f64 {
    let kss = gaussian_kernel_matrix(source_x, source_x, bandwidth);
    let kst = gaussian_kernel_matrix(source_x, target_x, bandwidth);
    let ktt = gaussian_kernel_matrix(target_x, target_x, bandwidth);
    let m = source_x.nrows() as f64;
    let n = target_x.nrows() as f64;
    w.dot(&kss.dot(&w)) / (m * m) - 2.0 * w.dot(&kst.sum_axis(ndarray::Axis(1))) / (m * n) + ktt.sum() / (n * n)
}
