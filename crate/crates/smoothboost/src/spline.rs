//! Natural cubic smoothing spline machinery in value form.
//!
//! The penalized least squares problem min ‖y − f‖² + λ∫f″² over natural cubic
//! splines with knots at the design points has fitted values (I + λK)⁻¹y where
//! K = Q R⁻¹ Qᵗ is built from the second-difference matrix Q and the tridiagonal
//! Gram matrix R of the knot gaps. The hat matrix is assembled from one symmetric
//! eigendecomposition of K, so its eigenvalues are 1/(1+λμⱼ) ∈ (0,1] exactly and
//! tr(S_λ) is O(n) for any λ — the λ-grids in the simulation harness reuse the
//! same decomposition.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Design-dependent, λ-independent part of the spline smoother.
#[derive(Debug, Clone)]
pub(crate) struct SplineBasis {
    /// Sorted distinct knots (the design points in ascending order).
    pub knots: Vec<f64>,
    /// order[a] = original sample index of the a-th knot.
    pub order: Vec<usize>,
    /// Γ = R⁻¹Qᵗ, (n−2)×n: maps knot values to interior second derivatives.
    pub gamma_map: DMatrix<f64>,
    /// Eigenvalues μⱼ ≥ 0 of the penalty matrix K (ascending).
    pub penalty_eigvals: DVector<f64>,
    /// Eigenvectors of K (columns), in knot order.
    pub penalty_eigvecs: DMatrix<f64>,
}

impl SplineBasis {
    pub fn build(x: &[f64]) -> Result<Self> {
        let n = x.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
        let knots: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        for w in knots.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DegenerateDesign(format!(
                    "duplicate x value {} makes the spline system singular",
                    w[0]
                )));
            }
        }

        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let m = n - 2;
        let mut q = DMatrix::<f64>::zeros(n, m);
        let mut r = DMatrix::<f64>::zeros(m, m);
        for c in 0..m {
            q[(c, c)] = 1.0 / h[c];
            q[(c + 1, c)] = -1.0 / h[c] - 1.0 / h[c + 1];
            q[(c + 2, c)] = 1.0 / h[c + 1];
            r[(c, c)] = (h[c] + h[c + 1]) / 3.0;
            if c + 1 < m {
                r[(c, c + 1)] = h[c + 1] / 6.0;
                r[(c + 1, c)] = h[c + 1] / 6.0;
            }
        }

        let chol = nalgebra::linalg::Cholesky::new(r).ok_or_else(|| {
            Error::DegenerateDesign("spline gap matrix is not positive definite".into())
        })?;
        let gamma_map = chol.solve(&q.transpose()); // (n-2) x n

        let mut k = &q * &gamma_map; // n x n penalty matrix
        let kt = k.transpose();
        k += kt;
        k.scale_mut(0.5);

        let eig = nalgebra::linalg::SymmetricEigen::new(k);
        let mut penalty_eigvals = eig.eigenvalues;
        // K = QR⁻¹Qᵗ annihilates exactly the constant and linear functions, so
        // its two smallest eigenvalues are zero up to decomposition noise; pin
        // them (and any negative roundoff) to exactly zero
        let mut idx: Vec<usize> = (0..penalty_eigvals.len()).collect();
        idx.sort_by(|&a, &b| penalty_eigvals[a].partial_cmp(&penalty_eigvals[b]).unwrap());
        for &j in idx.iter().take(2) {
            penalty_eigvals[j] = 0.0;
        }
        for v in penalty_eigvals.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }

        Ok(Self {
            knots,
            order,
            gamma_map,
            penalty_eigvals,
            penalty_eigvecs: eig.eigenvectors,
        })
    }

    pub fn n(&self) -> usize {
        self.knots.len()
    }

    /// Effective degrees of freedom tr(S_λ) = Σ 1/(1+λμⱼ).
    pub fn dof(&self, lambda: f64) -> f64 {
        self.penalty_eigvals
            .iter()
            .map(|&mu| 1.0 / (1.0 + lambda * mu))
            .sum()
    }

    /// Eigenvalues of S_λ.
    pub fn smoother_eigvals(&self, lambda: f64) -> Vec<f64> {
        self.penalty_eigvals
            .iter()
            .map(|&mu| 1.0 / (1.0 + lambda * mu))
            .collect()
    }

    /// Hat matrix in knot order: U diag(1/(1+λμⱼ)) Uᵗ.
    pub fn hat_matrix_sorted(&self, lambda: f64) -> DMatrix<f64> {
        let n = self.n();
        let mut scaled = self.penalty_eigvecs.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= 1.0 / (1.0 + lambda * self.penalty_eigvals[j]);
        }
        let mut s = scaled * self.penalty_eigvecs.transpose();
        // roundoff symmetrization; the exact matrix is symmetric
        for a in 0..n {
            for b in (a + 1)..n {
                let v = 0.5 * (s[(a, b)] + s[(b, a)]);
                s[(a, b)] = v;
                s[(b, a)] = v;
            }
        }
        s
    }

    /// Hat matrix scattered back to sample order.
    pub fn hat_matrix(&self, lambda: f64) -> DMatrix<f64> {
        let n = self.n();
        let sorted = self.hat_matrix_sorted(lambda);
        let mut s = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                s[(self.order[a], self.order[b])] = sorted[(a, b)];
            }
        }
        s
    }

    /// Evaluation functional of natural cubic interpolation at `x`: the vector
    /// L with g(x) = Lᵗ·(knot values), including linear extrapolation beyond
    /// the boundary knots. Knot order.
    pub fn interp_weights_sorted(&self, x: f64) -> DVector<f64> {
        let n = self.n();
        let t = &self.knots;
        let mut l = DVector::<f64>::zeros(n);
        let add_gamma_row = |l: &mut DVector<f64>, interior_idx: usize, coef: f64| {
            // gamma at knot (interior_idx+1) equals row interior_idx of gamma_map
            for j in 0..n {
                l[j] += coef * self.gamma_map[(interior_idx, j)];
            }
        };
        if x <= t[0] {
            // g(x) = f_0 + (x - t_0) g'(t_0), g'(t_0) = (f_1-f_0)/h_0 - h_0 γ_1 / 6
            let h0 = t[1] - t[0];
            let d = x - t[0];
            l[0] += 1.0 - d / h0;
            l[1] += d / h0;
            add_gamma_row(&mut l, 0, -d * h0 / 6.0);
        } else if x >= t[n - 1] {
            let hl = t[n - 1] - t[n - 2];
            let d = x - t[n - 1];
            l[n - 1] += 1.0 + d / hl;
            l[n - 2] -= d / hl;
            add_gamma_row(&mut l, n - 3, d * hl / 6.0);
        } else {
            // interval with t[i] <= x < t[i+1]
            let i = match t.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                Ok(i) => i,
                Err(ins) => ins - 1,
            };
            let i = i.min(n - 2);
            let hh = t[i + 1] - t[i];
            let u = x - t[i];
            let v = t[i + 1] - x;
            l[i] += v / hh;
            l[i + 1] += u / hh;
            let c_lo = -u * v / 6.0 * (1.0 + v / hh); // coefficient on γ_i
            let c_hi = -u * v / 6.0 * (1.0 + u / hh); // coefficient on γ_{i+1}
            if i >= 1 {
                add_gamma_row(&mut l, i - 1, c_lo);
            }
            if i < n - 2 {
                add_gamma_row(&mut l, i, c_hi);
            }
        }
        l
    }

    /// Same functional scattered to sample order.
    pub fn interp_weights(&self, x: f64) -> DVector<f64> {
        let sorted = self.interp_weights_sorted(x);
        let mut l = DVector::<f64>::zeros(self.n());
        for (a, &orig) in self.order.iter().enumerate() {
            l[orig] = sorted[a];
        }
        l
    }
}
