//! Spectral diagnostics: does boosting this smoother converge?
//!
//! The k-step fit is [I − (I−μS)^k]y, so everything hinges on powers of
//! I − μS_eff. The report carries its singular values; the classification is
//! made on the eigenvalues whenever a symmetric matrix with the spectrum of
//! S_eff exists (spline and bin matrices are symmetric, the kernel S = D𝕂 is
//! similar to A = D^½𝕂D^½, the symmetrized S⋆ = SSᵗ is symmetric). Powers of
//! these matrices grow or die with max|1−μλⱼ|; raw singular values of the
//! non-normal kernel I−S sit a hair above 1 even when every eigenvalue is
//! inside [0,1] and the iteration converges. For k-NN no symmetric equivalent
//! exists and the singular values themselves decide (a singular value above
//! one is exactly the failure the appendix proves for k-NN).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::boost::BoostVariant;
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::sample::DesignSample;
use crate::smoother::{LinearSmoother, SmootherSpec};

/// Tolerance around 1 below which a spectrum is called "boundary".
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Convergent,
    Divergent,
    Boundary,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::Convergent => "convergent",
            Classification::Divergent => "divergent",
            Classification::Boundary => "boundary",
        }
    }
}

/// A 3×3 principal minor of the kernel Gram matrix 𝕂 with negative
/// determinant: a certificate that 𝕂 (hence A, hence the spectrum of S) is not
/// positive semidefinite.
#[derive(Debug, Clone, Serialize)]
pub struct MinorWitness {
    /// Original sample indices, ascending.
    pub indices: [usize; 3],
    pub determinant: f64,
}

/// Spectrum of I − μS_eff and the convergence classification.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Singular values of I − μS_eff, descending.
    pub singular_values: Vec<f64>,
    /// Eigenvalues of the symmetric equivalent of S_eff (descending), when one
    /// exists: A for kernels, S itself for splines/bins, SSᵗ for the
    /// symmetrized variant.
    pub symmetric_equivalent_eigenvalues: Option<Vec<f64>>,
    pub max_singular: f64,
    pub classification: Classification,
    pub witness: Option<MinorWitness>,
    pub mu: f64,
    pub variant: BoostVariant,
}

#[derive(Serialize)]
struct ReportExport<'a> {
    max_singular: f64,
    classification: &'a str,
    singular_values: &'a [f64],
    witness: Option<&'a MinorWitness>,
}

impl SpectrumReport {
    /// JSON export with the singular values truncated to the top 20.
    pub fn to_json(&self) -> serde_json::Value {
        let top = &self.singular_values[..self.singular_values.len().min(20)];
        serde_json::to_value(ReportExport {
            max_singular: self.max_singular,
            classification: self.classification.name(),
            singular_values: top,
            witness: self.witness.as_ref(),
        })
        .expect("report serialization cannot fail")
    }
}

/// Compute the spectrum of I − μS_eff and classify the boosted sequence.
pub fn analyze(smoother: &LinearSmoother, mu: f64, variant: BoostVariant) -> Result<SpectrumReport> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidInput(format!("mu must lie in (0, 1], got {mu}")));
    }
    let n = smoother.n();
    let s_eff: DMatrix<f64> = match variant {
        BoostVariant::Plain => smoother.matrix().clone(),
        BoostVariant::Symmetrized => smoother.matrix() * smoother.matrix().transpose(),
    };
    let iteration = DMatrix::<f64>::identity(n, n) - s_eff.scale(mu);
    let svd = nalgebra::linalg::SVD::new(iteration, false, false);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max_singular = singular_values[0];

    let sym_eigs: Option<Vec<f64>> = match variant {
        BoostVariant::Symmetrized => {
            let eig = nalgebra::linalg::SymmetricEigen::new(s_eff);
            Some(eig.eigenvalues.iter().copied().collect())
        }
        BoostVariant::Plain => smoother.symmetric_spectrum(),
    };
    let sym_eigs = sym_eigs.map(|mut v| {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    });

    // spectral radius of I − μS_eff where computable exactly; otherwise the
    // singular values are all we have (k-NN)
    let decisive = match &sym_eigs {
        Some(eigs) => eigs
            .iter()
            .map(|&l| (1.0 - mu * l).abs())
            .fold(0.0f64, f64::max),
        None => max_singular,
    };
    let classification = if decisive > 1.0 + BOUNDARY_TOL {
        Classification::Divergent
    } else if (decisive - 1.0).abs() <= BOUNDARY_TOL {
        Classification::Boundary
    } else {
        Classification::Convergent
    };

    let witness = match smoother.spec() {
        SmootherSpec::Kernel(kspec) if !kspec.family.positive_definite() => {
            principal_minor_witness(smoother.sample(), kspec)?
        }
        _ => None,
    };

    Ok(SpectrumReport {
        singular_values,
        symmetric_equivalent_eigenvalues: sym_eigs,
        max_singular,
        classification,
        witness,
        mu,
        variant,
    })
}

/// Search for a 3×3 principal minor of 𝕂 = [K_h(X_i−X_j)] with negative
/// determinant. Uniform case: triples with both consecutive gaps below h and
/// range above h. Epanechnikov case: triples with range below h. Returns the
/// first qualifying triple (in sorted-x order) whose determinant is negative.
pub fn principal_minor_witness(
    sample: &DesignSample,
    kernel: &KernelSpec,
) -> Result<Option<MinorWitness>> {
    if kernel.family.positive_definite() {
        return Err(Error::NotApplicable(format!(
            "{} is positive definite; no negative principal minor exists",
            kernel.family.name()
        )));
    }
    let h = kernel.bandwidth;
    let n = sample.len();
    let xs = sample.x();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap().then(a.cmp(&b)));
    let sx: Vec<f64> = order.iter().map(|&i| xs[i]).collect();

    let det3 = |a: f64, b: f64, c: f64| -> f64 {
        // symmetric 3x3 with unit-scaled structure [[k0, kab, kac], [kab, k0, kbc], [kac, kbc, k0]]
        let k0 = kernel.eval_scaled(0.0);
        let kab = kernel.eval_scaled(b - a);
        let kbc = kernel.eval_scaled(c - b);
        let kac = kernel.eval_scaled(c - a);
        k0 * (k0 * k0 - kbc * kbc) - kab * (kab * k0 - kbc * kac) + kac * (kab * kbc - kac * k0)
    };

    for i1 in 0..n {
        for i2 in (i1 + 1)..n {
            let gap1 = sx[i2] - sx[i1];
            match kernel.family {
                KernelFamily::Uniform if gap1 >= h => break,
                KernelFamily::Epanechnikov if gap1 >= h => break,
                _ => {}
            }
            for i3 in (i2 + 1)..n {
                let gap2 = sx[i3] - sx[i2];
                let range = sx[i3] - sx[i1];
                let qualifies = match kernel.family {
                    KernelFamily::Uniform => gap1 < h && gap2 < h && range > h,
                    KernelFamily::Epanechnikov => range < h,
                    _ => unreachable!(),
                };
                if range >= 2.0 * h {
                    break;
                }
                if !qualifies {
                    continue;
                }
                let d = det3(sx[i1], sx[i2], sx[i3]);
                if d < 0.0 {
                    let mut idx = [order[i1], order[i2], order[i3]];
                    idx.sort_unstable();
                    return Ok(Some(MinorWitness {
                        indices: idx,
                        determinant: d,
                    }));
                }
            }
        }
    }
    Ok(None)
}
