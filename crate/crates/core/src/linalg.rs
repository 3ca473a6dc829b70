//! Small dense least-squares kernels: Householder QR for tall, skinny
//! design matrices and a pivoted Gaussian solve for tiny square systems.

/// Householder QR of an `n x k` matrix stored column-major.
#[derive(Debug, Clone)]
pub(crate) struct Qr {
    n: usize,
    k: usize,
    /// Householder vectors below (and on) the diagonal, R strictly above.
    a: Vec<f64>,
    rdiag: Vec<f64>,
}

impl Qr {
    /// Factorizes `a` (column-major, `n` rows, `k` columns). Returns `None`
    /// when the matrix is numerically rank deficient.
    pub(crate) fn new(mut a: Vec<f64>, n: usize, k: usize) -> Option<Qr> {
        debug_assert_eq!(a.len(), n * k);
        if n < k {
            return None;
        }
        let col_norms: Vec<f64> = (0..k)
            .map(|j| {
                a[j * n..(j + 1) * n]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mut rdiag = vec![0.0; k];
        for j in 0..k {
            let norm = a[j * n + j..(j + 1) * n]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if norm <= 1e-12 * col_norms[j] || norm == 0.0 {
                return None;
            }
            let ajj = a[j * n + j];
            let alpha = if ajj > 0.0 { -norm } else { norm };
            a[j * n + j] = ajj - alpha;
            let vnorm2: f64 = a[j * n + j..(j + 1) * n].iter().map(|v| v * v).sum();
            for l in j + 1..k {
                let s: f64 = (j..n).map(|i| a[j * n + i] * a[l * n + i]).sum();
                let f = 2.0 * s / vnorm2;
                for i in j..n {
                    a[l * n + i] -= f * a[j * n + i];
                }
            }
            rdiag[j] = alpha;
        }
        Some(Qr { n, k, a, rdiag })
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.rdiag[i]
        } else {
            self.a[j * self.n + i]
        }
    }

    /// Least-squares solution of `A x ≈ y`.
    pub(crate) fn solve(&self, y: &[f64]) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        let mut z = y.to_vec();
        for j in 0..k {
            let v = &self.a[j * n + j..(j + 1) * n];
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            let s: f64 = v.iter().zip(&z[j..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * s / vnorm2;
            for (zi, vi) in z[j..].iter_mut().zip(v) {
                *zi -= f * vi;
            }
        }
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = z[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.r(i, j) * xj;
            }
            x[i] = s / self.rdiag[i];
        }
        x
    }

    /// `(AᵀA)⁻¹ e` via two triangular solves with R.
    pub(crate) fn gram_inverse_times(&self, e: &[f64]) -> Vec<f64> {
        let k = self.k;
        // Rᵀ w = e
        let mut w = vec![0.0; k];
        for i in 0..k {
            let mut s = e[i];
            for (j, wj) in w.iter().enumerate().take(i) {
                s -= self.r(j, i) * wj;
            }
            w[i] = s / self.rdiag[i];
        }
        // R x = w
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = w[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.r(i, j) * xj;
            }
            x[i] = s / self.rdiag[i];
        }
        x
    }
}

/// Solves the square system `m x = rhs` (row-major `m`) by Gaussian
/// elimination with partial pivoting.
pub(crate) fn solve_dense(m: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let k = rhs.len();
    let mut a = m.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..k {
        let piv =
            (col..k).max_by(|&i, &j| a[i * k + col].abs().total_cmp(&a[j * k + col].abs()))?;
        if a[piv * k + col] == 0.0 {
            return None;
        }
        if piv != col {
            for j in 0..k {
                a.swap(col * k + j, piv * k + j);
            }
            b.swap(col, piv);
        }
        for i in col + 1..k {
            let f = a[i * k + col] / a[col * k + col];
            for j in col..k {
                a[i * k + j] -= f * a[col * k + j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[i * k + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * k + i];
    }
    Some(x)
}

/// Ordinary least squares of `y` on `1, t, ..., t^order`. Returns the
/// coefficients, or `None` when the design is rank deficient.
pub(crate) fn polyfit(t: &[f64], y: &[f64], order: usize) -> Option<Vec<f64>> {
    let n = t.len();
    let k = order + 1;
    let mut a = Vec::with_capacity(n * k);
    for j in 0..k {
        a.extend(t.iter().map(|&v| v.powi(j as i32)));
    }
    Qr::new(a, n, k).map(|qr| qr.solve(y))
}

pub(crate) fn polyval(coef: &[f64], t: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
}
