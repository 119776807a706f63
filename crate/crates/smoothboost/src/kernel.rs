use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.3989422804014327; // 1/sqrt(2*pi)

/// Kernel families for the Nadaraya-Watson smoother.
///
/// All four are symmetric probability densities. Gaussian and triangular are
/// positive definite; uniform and epanechnikov are not, which is what makes
/// their boosted sequences diverge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Epanechnikov,
    Uniform,
    Triangular,
}

impl KernelFamily {
    /// Evaluate the unscaled kernel K(u).
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            KernelFamily::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            KernelFamily::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            KernelFamily::Triangular => {
                if u.abs() <= 1.0 {
                    1.0 - u.abs()
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether K has compact support [-1, 1].
    pub fn compact_support(self) -> bool {
        matches!(self, KernelFamily::Epanechnikov | KernelFamily::Uniform | KernelFamily::Triangular)
    }

    /// Whether K is a positive definite function (inverse Fourier-Stieltjes
    /// transform is a positive finite measure).
    pub fn positive_definite(self) -> bool {
        matches!(self, KernelFamily::Gaussian | KernelFamily::Triangular)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Uniform => "uniform",
            KernelFamily::Triangular => "triangular",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "uniform" => Ok(KernelFamily::Uniform),
            "triangular" => Ok(KernelFamily::Triangular),
            other => Err(Error::InvalidInput(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// A kernel family together with a bandwidth h > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be a positive real, got {bandwidth}"
            )));
        }
        Ok(Self { family, bandwidth })
    }

    /// The scaled kernel K_h(t) = K(t/h)/h.
    pub fn eval_scaled(&self, t: f64) -> f64 {
        self.family.eval(t / self.bandwidth) / self.bandwidth
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_values_at_zero() {
        assert_relative_eq!(KernelFamily::Gaussian.eval(0.0), INV_SQRT_2PI);
        assert_relative_eq!(KernelFamily::Epanechnikov.eval(0.0), 0.75);
        assert_relative_eq!(KernelFamily::Uniform.eval(0.0), 0.5);
        assert_relative_eq!(KernelFamily::Triangular.eval(0.0), 1.0);
    }

    #[test]
    fn kernels_are_symmetric_nonnegative_and_integrate_to_one() {
        // trapezoid over [-8, 8] catches the gaussian tails as well
        let fams = [
            KernelFamily::Gaussian,
            KernelFamily::Epanechnikov,
            KernelFamily::Uniform,
            KernelFamily::Triangular,
        ];
        let m = 160_000;
        for fam in fams {
            let mut integral = 0.0;
            let (a, b) = (-8.0, 8.0);
            let dt = (b - a) / m as f64;
            for i in 0..=m {
                let u = a + i as f64 * dt;
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                integral += w * fam.eval(u) * dt;
                assert!(fam.eval(u) >= 0.0);
                assert_relative_eq!(fam.eval(u), fam.eval(-u));
            }
            assert_relative_eq!(integral, 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn scaled_kernel() {
        let spec = KernelSpec::new(KernelFamily::Uniform, 2.0).unwrap();
        assert_relative_eq!(spec.eval_scaled(0.0), 0.25);
        assert_relative_eq!(spec.eval_scaled(1.9), 0.25);
        assert_relative_eq!(spec.eval_scaled(2.1), 0.0);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(KernelSpec::new(KernelFamily::Gaussian, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Gaussian, -1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Gaussian, f64::NAN).is_err());
    }
}
