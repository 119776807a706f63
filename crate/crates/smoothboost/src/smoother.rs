//! Linear smoothers as explicit n×n matrices with out-of-sample weight rules.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::sample::DesignSample;
use crate::spline::SplineBasis;

/// Which smoother to build, with its tuning parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SmootherSpec {
    /// Nadaraya-Watson kernel smoother.
    Kernel(KernelSpec),
    /// K-nearest-neighbor running mean. The neighbor set of a point includes
    /// the point itself; distance ties break by ascending index.
    Knn { neighbors: usize },
    /// Natural cubic smoothing spline with penalty λ > 0 and knots at all
    /// (distinct) design points.
    Spline { lambda: f64 },
    /// Equal-count bin smoother (an orthogonal projection).
    Bin { num_bins: usize },
}

impl SmootherSpec {
    pub fn kernel(spec: KernelSpec) -> Self {
        SmootherSpec::Kernel(spec)
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            SmootherSpec::Kernel(k) => {
                if !k.bandwidth.is_finite() || k.bandwidth <= 0.0 {
                    return Err(Error::InvalidInput("bandwidth must be > 0".into()));
                }
            }
            SmootherSpec::Knn { neighbors } => {
                if *neighbors == 0 || *neighbors > n {
                    return Err(Error::InvalidInput(format!(
                        "neighbors must be in 1..={n}, got {neighbors}"
                    )));
                }
            }
            SmootherSpec::Spline { lambda } => {
                if !lambda.is_finite() || *lambda <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "lambda must be a positive real, got {lambda}"
                    )));
                }
            }
            SmootherSpec::Bin { num_bins } => {
                if *num_bins == 0 || *num_bins > n {
                    return Err(Error::InvalidInput(format!(
                        "num_bins must be in 1..={n}, got {num_bins}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            SmootherSpec::Kernel(k) => format!("kernel({}, h={})", k.family.name(), k.bandwidth),
            SmootherSpec::Knn { neighbors } => format!("knn(K={neighbors})"),
            SmootherSpec::Spline { lambda } => format!("spline(lambda={lambda})"),
            SmootherSpec::Bin { num_bins } => format!("bin({num_bins})"),
        }
    }
}

#[derive(Debug, Clone)]
enum WeightRule {
    Kernel,
    Knn,
    Spline(SplineBasis),
    Bin {
        /// interior boundaries in x space; bin(x) = #edges strictly below x
        edges: Vec<f64>,
        /// member original indices per bin
        bins: Vec<Vec<usize>>,
    },
}

/// A fitted linear smoother: the matrix S with `fitted = S·y`, plus a rule
/// producing the weight vector S(x) at any query point.
#[derive(Debug, Clone)]
pub struct LinearSmoother {
    matrix: DMatrix<f64>,
    sample: DesignSample,
    spec: SmootherSpec,
    rule: WeightRule,
}

/// Construct the smoothing matrix and weight rule for `spec` on `sample`.
pub fn build_smoother(sample: &DesignSample, spec: &SmootherSpec) -> Result<LinearSmoother> {
    let n = sample.len();
    spec.validate(n)?;
    let x = sample.x();
    let (matrix, rule) = match spec {
        SmootherSpec::Kernel(kspec) => {
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                let mut row_sum = 0.0;
                for j in 0..n {
                    let w = kspec.eval_scaled(x[i] - x[j]);
                    m[(i, j)] = w;
                    row_sum += w;
                }
                if row_sum <= 0.0 {
                    return Err(Error::KernelSupport(format!(
                        "row {i} of the kernel weight matrix sums to zero (x = {})",
                        x[i]
                    )));
                }
                for j in 0..n {
                    m[(i, j)] /= row_sum;
                }
            }
            (m, WeightRule::Kernel)
        }
        SmootherSpec::Knn { neighbors } => {
            let mut m = DMatrix::<f64>::zeros(n, n);
            let w = 1.0 / *neighbors as f64;
            for i in 0..n {
                for j in knn_indices(x, x[i], *neighbors) {
                    m[(i, j)] = w;
                }
            }
            (m, WeightRule::Knn)
        }
        SmootherSpec::Spline { lambda } => {
            let basis = SplineBasis::build(x)?;
            let m = basis.hat_matrix(*lambda);
            (m, WeightRule::Spline(basis))
        }
        SmootherSpec::Bin { num_bins } => {
            let (edges, bins) = equal_count_bins(x, *num_bins)?;
            let mut m = DMatrix::<f64>::zeros(n, n);
            for members in &bins {
                let w = 1.0 / members.len() as f64;
                for &i in members {
                    for &j in members {
                        m[(i, j)] = w;
                    }
                }
            }
            (m, WeightRule::Bin { edges, bins })
        }
    };
    Ok(LinearSmoother {
        matrix,
        sample: sample.clone(),
        spec: spec.clone(),
        rule,
    })
}

/// Indices of the K nearest design points to `x`, self included when `x` is a
/// design point, ties broken by ascending index.
fn knn_indices(xs: &[f64], x: f64, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (xs[a] - x).abs();
        let db = (xs[b] - x).abs();
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

/// Equal-count bins over sorted x. Tied x values are kept in one bin so that
/// bin membership is a function of the x value alone.
fn equal_count_bins(x: &[f64], num_bins: usize) -> Result<(Vec<f64>, Vec<Vec<usize>>)> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));

    let mut cuts = Vec::with_capacity(num_bins + 1);
    cuts.push(0usize);
    for b in 1..num_bins {
        let mut c = (b * n + num_bins / 2) / num_bins;
        // never split a group of tied x values
        while c < n && c > 0 && x[order[c]] == x[order[c - 1]] {
            c += 1;
        }
        let last = *cuts.last().unwrap();
        if c > last && c < n {
            cuts.push(c);
        }
    }
    cuts.push(n);
    cuts.dedup();
    if cuts.len() < num_bins + 1 {
        return Err(Error::DegenerateDesign(format!(
            "cannot form {num_bins} nonempty bins over {n} points with these ties"
        )));
    }

    let mut edges = Vec::with_capacity(num_bins - 1);
    let mut bins = Vec::with_capacity(num_bins);
    for w in cuts.windows(2) {
        bins.push(order[w[0]..w[1]].to_vec());
    }
    for w in cuts.windows(2).skip(1) {
        let lo = w[0];
        edges.push(0.5 * (x[order[lo - 1]] + x[order[lo]]));
    }
    Ok((edges, bins))
}

impl LinearSmoother {
    pub fn n(&self) -> usize {
        self.sample.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn sample(&self) -> &DesignSample {
        &self.sample
    }

    pub fn spec(&self) -> &SmootherSpec {
        &self.spec
    }

    /// The weight vector S(x): fitted value at `x` is S(x)ᵗ·y for the one-pass
    /// smoother, and S(x)ᵗ·β̂_k after k boosting iterations.
    pub fn weights_at(&self, x: f64) -> Result<DVector<f64>> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("query point {x} not finite")));
        }
        let n = self.n();
        let xs = self.sample.x();
        match &self.rule {
            WeightRule::Kernel => {
                let kspec = match &self.spec {
                    SmootherSpec::Kernel(k) => k,
                    _ => unreachable!(),
                };
                let mut w = DVector::<f64>::zeros(n);
                let mut sum = 0.0;
                for j in 0..n {
                    let v = kspec.eval_scaled(x - xs[j]);
                    w[j] = v;
                    sum += v;
                }
                if sum <= 0.0 {
                    return Err(Error::KernelSupport(format!(
                        "all kernel weights vanish at x = {x}"
                    )));
                }
                w /= sum;
                Ok(w)
            }
            WeightRule::Knn => {
                let k = match &self.spec {
                    SmootherSpec::Knn { neighbors } => *neighbors,
                    _ => unreachable!(),
                };
                let mut w = DVector::<f64>::zeros(n);
                for j in knn_indices(xs, x, k) {
                    w[j] = 1.0 / k as f64;
                }
                Ok(w)
            }
            WeightRule::Spline(basis) => {
                // w(x) = S · L(x): evaluate the boosted/plain fit at the knots,
                // then natural-cubic interpolation of those fitted values.
                let l = basis.interp_weights(x);
                Ok(&self.matrix * l)
            }
            WeightRule::Bin { edges, bins } => {
                let b = edges.partition_point(|&e| e < x);
                let members = &bins[b];
                let mut w = DVector::<f64>::zeros(n);
                for &j in members {
                    w[j] = 1.0 / members.len() as f64;
                }
                Ok(w)
            }
        }
    }

    /// Eigenvalues of a symmetric matrix with the same spectrum as S, when one
    /// exists: the spline and bin matrices are themselves symmetric, and the
    /// kernel matrix S = D𝕂 is similar to A = D^½𝕂D^½. k-NN has none.
    pub fn symmetric_spectrum(&self) -> Option<Vec<f64>> {
        match &self.rule {
            WeightRule::Kernel => {
                let a = self.kernel_symmetric_equivalent()?;
                let eig = nalgebra::linalg::SymmetricEigen::new(a);
                Some(eig.eigenvalues.iter().copied().collect())
            }
            WeightRule::Knn => None,
            WeightRule::Spline(basis) => {
                let lambda = match &self.spec {
                    SmootherSpec::Spline { lambda } => *lambda,
                    _ => unreachable!(),
                };
                Some(basis.smoother_eigvals(lambda))
            }
            WeightRule::Bin { bins, .. } => {
                let mut v = vec![0.0; self.n()];
                for e in v.iter_mut().take(bins.len()) {
                    *e = 1.0;
                }
                Some(v)
            }
        }
    }

    /// The symmetric matrix A = D^½𝕂D^½ sharing the spectrum of a kernel S.
    pub fn kernel_symmetric_equivalent(&self) -> Option<DMatrix<f64>> {
        let kspec = match &self.spec {
            SmootherSpec::Kernel(k) => k,
            _ => return None,
        };
        let n = self.n();
        let xs = self.sample.x();
        let mut km = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                km[(i, j)] = kspec.eval_scaled(xs[i] - xs[j]);
            }
        }
        let rs: Vec<f64> = (0..n).map(|i| km.row(i).sum()).collect();
        for i in 0..n {
            for j in 0..n {
                km[(i, j)] /= (rs[i] * rs[j]).sqrt();
            }
        }
        Some(km)
    }

    /// True for the kinds whose matrix is symmetric by construction.
    pub fn is_symmetric_kind(&self) -> bool {
        matches!(self.spec, SmootherSpec::Spline { .. } | SmootherSpec::Bin { .. })
    }
}
