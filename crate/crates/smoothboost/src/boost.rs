//! The iterative bias-correction recursion and its closed form.
//!
//! One iteration smooths the current residuals to estimate the bias of the
//! current fit and subtracts it: m̂_{k+1} = m̂_k + μ·S·R_k. In coefficient form
//! (β̂_1 = y, β̂_{k+1} = β̂_k + R_k, m̂_k = μ·S·β̂_k) each iteration costs one
//! matrix-vector product, which is what makes k ~ 10⁶ reachable. The closed
//! form m̂_k = [I − (I−μS)^k]·y is kept as an independent cross-check.

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoother::LinearSmoother;

/// Which matrix drives the recursion: S itself or the symmetrized S⋆ = SSᵗ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoostVariant {
    #[default]
    Plain,
    Symmetrized,
}

impl std::str::FromStr for BoostVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(BoostVariant::Plain),
            "symmetrized" => Ok(BoostVariant::Symmetrized),
            other => Err(Error::InvalidInput(format!("unknown variant {other:?}"))),
        }
    }
}

/// Configuration of a boosting run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostConfig {
    /// Number of iterations M (the candidate set is {1, …, M}).
    pub max_iterations: usize,
    /// Convergence factor μ ∈ (0, 1]; μ < 1 takes a partial bias-correction step.
    pub mu: f64,
    pub variant: BoostVariant,
    /// Soft abort threshold: stop once ‖R_k‖ > guard·‖y‖.
    pub divergence_guard: f64,
    /// Iterations at which full state (β̂_k, m̂_k) is retained. Sorted, deduped,
    /// values outside 1..=M are dropped.
    pub checkpoints: Vec<usize>,
}

impl BoostConfig {
    /// Default schedule: every k ≤ 200, then geometrically spaced (⌈1.1k⌉) up
    /// to and including M.
    pub fn default_checkpoints(m: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = (1..=m.min(200)).collect();
        let mut k = 200usize;
        while k < m {
            k = ((k as f64) * 1.1).ceil() as usize;
            ks.push(k.min(m));
        }
        ks.dedup();
        ks
    }

    pub fn new(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            mu: 1.0,
            variant: BoostVariant::Plain,
            divergence_guard: 1e6,
            checkpoints: Self::default_checkpoints(max_iterations),
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_variant(mut self, variant: BoostVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_checkpoints(mut self, ks: Vec<usize>) -> Self {
        self.checkpoints = ks;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be >= 1".into()));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "mu must lie in (0, 1], got {}",
                self.mu
            )));
        }
        if !self.divergence_guard.is_finite() || self.divergence_guard <= 0.0 {
            return Err(Error::InvalidInput("divergence_guard must be > 0".into()));
        }
        Ok(())
    }

    fn normalized_checkpoints(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self
            .checkpoints
            .iter()
            .copied()
            .filter(|&k| k >= 1 && k <= self.max_iterations)
            .collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// Full recorded state at one checkpoint iteration.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub k: usize,
    /// β̂_k with m̂_k = μ·S_eff·β̂_k.
    pub beta: DVector<f64>,
    /// Fitted values m̂_k at the design points.
    pub fitted: DVector<f64>,
    /// ‖y − m̂_k‖.
    pub residual_norm: f64,
    /// ‖S_eff·R_k‖, the size of the bias estimate at this fit.
    pub bias_norm: f64,
    /// tr(S_k) = tr(I − (I−μS_eff)^k), the effective degrees of freedom;
    /// `None` when no spectral route exists (non-symmetric S with n > 200).
    pub trace: Option<f64>,
}

/// Per-iteration record of one boosting run.
#[derive(Debug, Clone)]
pub struct BoostTrajectory {
    checkpoints: Vec<Checkpoint>,
    residual_norms: Vec<f64>,
    bias_norms: Vec<f64>,
    diverged: bool,
    diverged_at: Option<usize>,
    last_k: usize,
    mu: f64,
    variant: BoostVariant,
    n: usize,
    trace_note: Option<String>,
}

impl BoostTrajectory {
    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }

    pub fn checkpoint(&self, k: usize) -> Option<&Checkpoint> {
        self.checkpoints
            .binary_search_by_key(&k, |c| c.k)
            .ok()
            .map(|i| &self.checkpoints[i])
    }

    pub fn recorded_ks(&self) -> Vec<usize> {
        self.checkpoints.iter().map(|c| c.k).collect()
    }

    /// ‖R_k‖ for k = 1..=last_k (every iteration, not only checkpoints).
    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    /// ‖S_eff·R_k‖ for k = 1..=last_k.
    pub fn bias_norms(&self) -> &[f64] {
        &self.bias_norms
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn diverged_at(&self) -> Option<usize> {
        self.diverged_at
    }

    pub fn last_k(&self) -> usize {
        self.last_k
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn variant(&self) -> BoostVariant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Why tr(S_k) is unavailable, when it is.
    pub fn trace_note(&self) -> Option<&str> {
        self.trace_note.as_deref()
    }

    /// σ̂²(k) = ‖y − m̂_k‖²/n at a recorded k.
    pub fn sigma_hat_sq(&self, k: usize) -> Option<f64> {
        self.checkpoint(k)
            .map(|c| c.residual_norm * c.residual_norm / self.n as f64)
    }

    /// CSV export: `k,residual_norm,bias_norm,trace` per recorded checkpoint.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,residual_norm,bias_norm,trace")?;
        for c in &self.checkpoints {
            match c.trace {
                Some(t) => writeln!(w, "{},{:.17e},{:.17e},{:.17e}", c.k, c.residual_norm, c.bias_norm, t)?,
                None => writeln!(w, "{},{:.17e},{:.17e},", c.k, c.residual_norm, c.bias_norm)?,
            }
        }
        Ok(())
    }

    /// Wide CSV export: `k,fitted_0,…,fitted_{n-1}` per recorded checkpoint.
    pub fn write_fitted_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "k")?;
        for i in 0..self.n {
            write!(w, ",fitted_{i}")?;
        }
        writeln!(w)?;
        for c in &self.checkpoints {
            write!(w, "{}", c.k)?;
            for i in 0..self.n {
                write!(w, ",{:.17e}", c.fitted[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Spectral route for per-k traces: tr(S_k) = Σⱼ (1 − (1−μaⱼ)^k) over the
/// eigenvalues aⱼ of S_eff.
enum TraceEngine {
    Real(Vec<f64>),
    Complex(Vec<Complex<f64>>),
    Unavailable(String),
}

impl TraceEngine {
    fn build(smoother: &LinearSmoother, variant: BoostVariant, s_eff: &DMatrix<f64>) -> Self {
        match variant {
            BoostVariant::Symmetrized => {
                let eig = nalgebra::linalg::SymmetricEigen::new(s_eff.clone());
                TraceEngine::Real(eig.eigenvalues.iter().copied().collect())
            }
            BoostVariant::Plain => match smoother.symmetric_spectrum() {
                Some(vals) => TraceEngine::Real(vals),
                None => {
                    let n = smoother.n();
                    if n <= 200 {
                        let eig = s_eff.clone().complex_eigenvalues();
                        TraceEngine::Complex(eig.iter().copied().collect())
                    } else {
                        TraceEngine::Unavailable(format!(
                            "non-symmetric smoother with n = {n} > 200"
                        ))
                    }
                }
            },
        }
    }

    fn trace_at(&self, mu: f64, k: usize) -> Option<f64> {
        match self {
            TraceEngine::Real(vals) => {
                let mut t = 0.0;
                for &a in vals {
                    t += 1.0 - powi_f(1.0 - mu * a, k);
                }
                Some(t)
            }
            TraceEngine::Complex(vals) => {
                let mut acc = Complex::new(0.0, 0.0);
                for &a in vals {
                    acc += powi_c(Complex::new(1.0, 0.0) - a.scale(mu), k);
                }
                Some(vals.len() as f64 - acc.re)
            }
            TraceEngine::Unavailable(_) => None,
        }
    }

    fn note(&self) -> Option<String> {
        match self {
            TraceEngine::Unavailable(s) => Some(s.clone()),
            _ => None,
        }
    }
}

fn powi_f(b: f64, k: usize) -> f64 {
    let mut acc = 1.0f64;
    let mut base = b;
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

fn powi_c(b: Complex<f64>, k: usize) -> Complex<f64> {
    let mut acc = Complex::new(1.0, 0.0);
    let mut base = b;
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

fn effective_matrix(smoother: &LinearSmoother, variant: BoostVariant) -> DMatrix<f64> {
    match variant {
        BoostVariant::Plain => smoother.matrix().clone(),
        BoostVariant::Symmetrized => smoother.matrix() * smoother.matrix().transpose(),
    }
}

/// Run the bias-correction recursion for `config.max_iterations` steps or
/// until the divergence guard trips (soft: the trajectory is truncated and
/// flagged, not an error).
pub fn run_boost(
    smoother: &LinearSmoother,
    y: &DVector<f64>,
    config: &BoostConfig,
) -> Result<BoostTrajectory> {
    config.validate()?;
    let n = smoother.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "smoother is {n}x{n} but y has {} entries",
            y.len()
        )));
    }
    let s_raw = effective_matrix(smoother, config.variant);
    let engine = TraceEngine::build(smoother, config.variant, &s_raw);
    let checkpoints_wanted = config.normalized_checkpoints();
    let mut want = checkpoints_wanted.iter().copied().peekable();

    let mu = config.mu;
    let y_norm = y.norm();
    let guard = config.divergence_guard * y_norm;

    let mut beta = y.clone();
    let mut fitted = DVector::<f64>::zeros(n);
    fitted.gemv(mu, &s_raw, &beta, 0.0); // m̂_1 = μ S β̂_1
    let mut resid = y - &fitted;
    let mut bias = DVector::<f64>::zeros(n);
    bias.gemv(1.0, &s_raw, &resid, 0.0); // b̂_1 = S R_1

    let mut checkpoints = Vec::with_capacity(checkpoints_wanted.len());
    let mut residual_norms = Vec::new();
    let mut bias_norms = Vec::new();
    let mut diverged = false;
    let mut diverged_at = None;
    let mut last_k = 0usize;

    for k in 1..=config.max_iterations {
        if k > 1 {
            beta += &resid; // β̂_k = β̂_{k-1} + R_{k-1}
            fitted.axpy(mu, &bias, 1.0); // m̂_k = m̂_{k-1} + μ b̂_{k-1}
            resid.copy_from(y);
            resid -= &fitted;
            bias.gemv(1.0, &s_raw, &resid, 0.0);
        }
        let rn = resid.norm();
        last_k = k;
        residual_norms.push(rn);
        bias_norms.push(bias.norm());
        if !rn.is_finite() || rn > guard {
            diverged = true;
            diverged_at = Some(k);
            break;
        }
        if want.peek() == Some(&k) {
            want.next();
            checkpoints.push(Checkpoint {
                k,
                beta: beta.clone(),
                fitted: fitted.clone(),
                residual_norm: rn,
                bias_norm: bias.norm(),
                trace: engine.trace_at(mu, k),
            });
        }
    }

    Ok(BoostTrajectory {
        checkpoints,
        residual_norms,
        bias_norms,
        diverged,
        diverged_at,
        last_k,
        mu,
        variant: config.variant,
        n,
        trace_note: engine.note(),
    })
}

/// The k-step fit [I − (I−μS_eff)^k]·y computed directly: repeated
/// matrix-vector products, or the eigen form for symmetric smoothers when k is
/// large. Independent of the recursion in [`run_boost`].
pub fn closed_form_fit(
    smoother: &LinearSmoother,
    y: &DVector<f64>,
    k: usize,
    mu: f64,
    variant: BoostVariant,
) -> Result<DVector<f64>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let n = smoother.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "smoother is {n}x{n} but y has {} entries",
            y.len()
        )));
    }
    let s_raw = effective_matrix(smoother, variant);
    let symmetric = smoother.is_symmetric_kind() || variant == BoostVariant::Symmetrized;
    if symmetric && k > 2_000 {
        // eigen form: m̂_k = U diag(1 − (1−μλⱼ)^k) Uᵗ y
        let eig = nalgebra::linalg::SymmetricEigen::new(s_raw);
        let mut coeffs = eig.eigenvectors.transpose() * y;
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c *= 1.0 - powi_f(1.0 - mu * eig.eigenvalues[j], k);
        }
        return Ok(&eig.eigenvectors * coeffs);
    }
    let mut v = y.clone();
    let mut tmp = DVector::<f64>::zeros(n);
    for _ in 0..k {
        tmp.gemv(1.0, &s_raw, &v, 0.0);
        v.axpy(-mu, &tmp, 1.0); // v ← (I − μS) v
    }
    Ok(y - v)
}

/// Out-of-sample evaluator for a recorded iteration: m̂_k(x) = S_eff(x)ᵗ·β̂_k.
///
/// For the plain variant the weight functional at x is μ·S(x); for the
/// symmetrized variant S⋆(x)ᵗ = S(x)ᵗSᵗ, so the evaluation reduces to an inner
/// product of S(x) with the precomputed vector μ·Sᵗβ̂_k.
pub struct Predictor<'a> {
    smoother: &'a LinearSmoother,
    coeffs: DVector<f64>,
}

impl<'a> Predictor<'a> {
    pub fn new(
        trajectory: &BoostTrajectory,
        smoother: &'a LinearSmoother,
        k: usize,
    ) -> Result<Self> {
        let cp = trajectory
            .checkpoint(k)
            .ok_or(Error::CheckpointNotRecorded(k))?;
        let coeffs = match trajectory.variant {
            BoostVariant::Plain => cp.beta.scale(trajectory.mu),
            BoostVariant::Symmetrized => (smoother.matrix().transpose() * &cp.beta).scale(trajectory.mu),
        };
        Ok(Self { smoother, coeffs })
    }

    pub fn predict(&self, x: f64) -> Result<f64> {
        let w = self.smoother.weights_at(x)?;
        Ok(w.dot(&self.coeffs))
    }
}

/// Evaluate the boosted fit at `x` for a recorded iteration k.
pub fn predict_at(
    trajectory: &BoostTrajectory,
    smoother: &LinearSmoother,
    x: f64,
    k: usize,
) -> Result<f64> {
    Predictor::new(trajectory, smoother, k)?.predict(x)
}

/// Exact squared bias and total variance of the k-step fit (plain variant,
/// μ = 1): B² = ‖(I−S)^k m‖² and tr(V) = σ²·‖I − (I−S)^k‖²_F.
pub fn exact_bias_variance(
    smoother: &LinearSmoother,
    m_true: &DVector<f64>,
    sigma2: f64,
    k: usize,
) -> Result<(f64, f64)> {
    let n = smoother.n();
    if m_true.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "smoother is {n}x{n} but m has {} entries",
            m_true.len()
        )));
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidInput("sigma2 must be >= 0".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let s = smoother.matrix();
    let mut p = DMatrix::<f64>::identity(n, n);
    for _ in 0..k {
        p -= s * &p; // P ← (I − S) P
    }
    let bias_vec = &p * m_true;
    let squared_bias = bias_vec.norm_squared();
    let b_k = DMatrix::<f64>::identity(n, n) - &p;
    let variance_trace = sigma2 * b_k.norm_squared(); // Frobenius
    Ok((squared_bias, variance_trace))
}
