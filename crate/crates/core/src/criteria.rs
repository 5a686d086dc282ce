//! Generalised AIC scores, noise-variance estimators and rank estimators.
//!
//! Scores are `-2 * (maximised log-likelihood) + gamma * (parameter count)`
//! under the spiked GOE likelihood, with every term that does not depend on
//! the candidate rank `j` dropped: the argmin is unchanged, and the GOE
//! normalising constant never has to be evaluated.

use serde::{Deserialize, Serialize};

use crate::spectral::{semicircle_upper_quantile, truncated_second_moment, Spectrum};
use crate::{Error, Result};

/// How the noise level enters the scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// Plug in this value of `sigma^2` (oracle or an estimate).
    Known(f64),
    /// Maximise the likelihood over `sigma^2` as well, per candidate model.
    Unknown,
}

/// GAIC scores for candidate ranks `j = 0..=q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
    gamma: f64,
    mode: SigmaMode,
}

impl ScoreVector {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mode(&self) -> SigmaMode {
        self.mode
    }

    /// Largest candidate rank `q`.
    pub fn q(&self) -> usize {
        self.scores.len() - 1
    }

    /// Index of the minimum score; see [`select_min`].
    pub fn argmin(&self) -> usize {
        select_min(&self.scores)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMethod {
    Oracle,
    Naive,
    Trimmed { alpha: f64 },
    PerModel { j: usize },
}

/// An estimate of `sigma^2` together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub value: f64,
    pub method: SigmaMethod,
}

impl SigmaEstimate {
    pub fn oracle(sigma2: f64) -> Result<Self> {
        positive_variance(sigma2)?;
        Ok(SigmaEstimate {
            value: sigma2,
            method: SigmaMethod::Oracle,
        })
    }

    pub fn naive(spec: &Spectrum) -> Result<Self> {
        Ok(SigmaEstimate {
            value: sigma2_naive(spec)?,
            method: SigmaMethod::Naive,
        })
    }

    pub fn trimmed(spec: &Spectrum, alpha: f64) -> Result<Self> {
        Ok(SigmaEstimate {
            value: sigma2_trimmed(spec, alpha)?,
            method: SigmaMethod::Trimmed { alpha },
        })
    }

    pub fn sigma(&self) -> f64 {
        self.value.sqrt()
    }
}

fn positive_variance(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain("sigma2", sigma2, "(0, inf)"));
    }
    Ok(())
}

fn check_q(spec: &Spectrum, q: usize) -> Result<()> {
    if q >= spec.n() {
        return Err(Error::IndexOutOfRange {
            index: q,
            len: spec.n(),
        });
    }
    Ok(())
}

/// Free parameters of a rank-`j` symmetric signal: `N j - j (j - 1) / 2`.
fn signal_parameters(n: usize, j: usize) -> f64 {
    let (n, j) = (n as f64, j as f64);
    n * j - j * (j - 1.0) / 2.0
}

/// Penalty coefficient `gamma_N = 2 + c / sqrt(N)`.
pub fn gamma_delta(n: usize, delta_coefficient: f64) -> f64 {
    2.0 + delta_coefficient / (n as f64).sqrt()
}

/// MLE of `sigma^2` under model `M_j`: `(1 / (N + 1)) sum_{i > j} l_i^2`.
pub fn sigma2_mle(spec: &Spectrum, j: usize) -> Result<f64> {
    let n = spec.n();
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    Ok(spec.tail_sums_of_squares()[j] / (n as f64 + 1.0))
}

/// `||X||_F^2 / (N + 1)`. Biased upwards by large spikes at moderate `N`.
pub fn sigma2_naive(spec: &Spectrum) -> Result<f64> {
    if spec.n() == 0 {
        return Err(Error::InvalidDimension("empty spectrum".into()));
    }
    sigma2_mle(spec, 0)
}

/// Trimmed estimator: discards the top and bottom `alpha` fractions of the
/// spectrum and rescales by the matching truncated semicircle moment.
///
/// Kept are the descending ranks `r` (one-based) with
/// `floor(alpha N) <= r <= floor((1 - alpha) N)`.
pub fn sigma2_trimmed(spec: &Spectrum, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::domain("alpha", alpha, "(0, 1/2)"));
    }
    let n = spec.n();
    let lo = (alpha * n as f64).floor() as usize;
    let hi = ((1.0 - alpha) * n as f64).floor() as usize;
    if lo < 1 {
        return Err(Error::InvalidDimension(format!(
            "trimming alpha = {alpha} removes nothing at N = {n}"
        )));
    }
    let kept: f64 = (lo..=hi).map(|r| spec.ell(r) * spec.ell(r)).sum();
    let q = semicircle_upper_quantile(alpha)?;
    Ok(kept / n as f64 / truncated_second_moment(q)?)
}

/// Known-`sigma` scores
/// `(N / (2 sigma^2)) sum_{i > j} l_i^2 + gamma (N j - j (j - 1) / 2)`.
pub fn gaic_scores_known_sigma(
    spec: &Spectrum,
    gamma: f64,
    sigma2: f64,
    q: usize,
) -> Result<ScoreVector> {
    check_q(spec, q)?;
    check_gamma(gamma)?;
    positive_variance(sigma2)?;
    let n = spec.n();
    let tails = spec.tail_sums_of_squares();
    let fit = n as f64 / (2.0 * sigma2);
    let scores = (0..=q)
        .map(|j| fit * tails[j] + gamma * signal_parameters(n, j))
        .collect();
    Ok(ScoreVector {
        scores,
        gamma,
        mode: SigmaMode::Known(sigma2),
    })
}

/// Unknown-`sigma` scores
/// `(N (N + 1) / 2) log sigma2_j + gamma (1 + N j - j (j - 1) / 2)`,
/// where `sigma2_j` is the per-model MLE. The fit term of the profiled
/// likelihood equals the constant `N (N + 1) / 2` and is dropped.
pub fn gaic_scores_unknown_sigma(spec: &Spectrum, gamma: f64, q: usize) -> Result<ScoreVector> {
    check_q(spec, q)?;
    check_gamma(gamma)?;
    let n = spec.n();
    let nf = n as f64;
    let tails = spec.tail_sums_of_squares();
    let scores = (0..=q)
        .map(|j| {
            let s2 = tails[j] / (nf + 1.0);
            if !(s2 > 0.0) {
                return Err(Error::DegenerateModel(j));
            }
            Ok(nf * (nf + 1.0) / 2.0 * s2.ln() + gamma * (1.0 + signal_parameters(n, j)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreVector {
        scores,
        gamma,
        mode: SigmaMode::Unknown,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain("gamma", gamma, "[0, inf)"));
    }
    Ok(())
}

/// GAIC scores in the requested noise mode.
pub fn gaic_scores(spec: &Spectrum, gamma: f64, mode: SigmaMode, q: usize) -> Result<ScoreVector> {
    match mode {
        SigmaMode::Known(sigma2) => gaic_scores_known_sigma(spec, gamma, sigma2, q),
        SigmaMode::Unknown => gaic_scores_unknown_sigma(spec, gamma, q),
    }
}

/// Smallest index attaining the minimum, so ties go to the simpler model.
/// NaN scores never win. Returns 0 for an empty slice.
pub fn select_min(scores: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (j, &s) in scores.iter().enumerate() {
        if s < best_score {
            best = j;
            best_score = s;
        }
    }
    best
}

/// `k_gamma`: minimiser of the GAIC scores over `j = 0..=q`.
pub fn khat_gamma(spec: &Spectrum, gamma: f64, mode: SigmaMode, q: usize) -> Result<usize> {
    Ok(gaic_scores(spec, gamma, mode, q)?.argmin())
}

/// Plain AIC, i.e. `gamma = 2`.
pub fn khat_aic(spec: &Spectrum, mode: SigmaMode, q: usize) -> Result<usize> {
    khat_gamma(spec, 2.0, mode, q)
}

/// Soft-AIC threshold `(1 / (q B)) sum_{j=1}^{q} (l_j^2 - 4 sigma2) / (2 sigma2)`.
pub fn xi_hat(spec: &Spectrum, q: usize, b: f64, sigma2_hat: f64) -> Result<f64> {
    check_q(spec, q)?;
    positive_variance(sigma2_hat)?;
    if !(b >= 1.0) {
        return Err(Error::domain("B", b, "[1, inf)"));
    }
    if q == 0 {
        return Ok(0.0);
    }
    let sum: f64 = (1..=q)
        .map(|j| (spec.ell(j).powi(2) - 4.0 * sigma2_hat) / (2.0 * sigma2_hat))
        .sum();
    Ok(sum / (q as f64 * b))
}

/// Smallest `j` whose AIC score, scaled by `1 / N`, is within `xi / 3` of
/// the minimum. Falls back to the plain argmin when `xi <= 0` or no index
/// qualifies.
pub fn soft_select(aic: &ScoreVector, n: usize, xi: f64) -> usize {
    let scores = aic.scores();
    let fallback = aic.argmin();
    if !(xi > 0.0) {
        return fallback;
    }
    let min = scores[fallback];
    let band = xi / 3.0;
    scores
        .iter()
        .position(|&s| ((s - min) / n as f64).abs() < band)
        .unwrap_or(fallback)
}

/// Soft minimiser of AIC. `sigma2_hat` feeds the threshold; `mode` selects
/// the AIC scores (known with a plug-in value, or unknown).
pub fn soft_aic(
    spec: &Spectrum,
    q: usize,
    b: f64,
    sigma2_hat: f64,
    mode: SigmaMode,
) -> Result<usize> {
    let xi = xi_hat(spec, q, b, sigma2_hat)?;
    if q == 0 {
        return Ok(0);
    }
    let aic = gaic_scores(spec, 2.0, mode, q)?;
    Ok(soft_select(&aic, spec.n(), xi))
}

/// Scree-plot estimator: the largest `j <= q` with `l_j > 2 sigma_hat`,
/// or 0 when there is none.
pub fn scree(spec: &Spectrum, q: usize, sigma_hat: f64) -> Result<usize> {
    check_q(spec, q)?;
    if !(sigma_hat > 0.0 && sigma_hat.is_finite()) {
        return Err(Error::domain("sigma_hat", sigma_hat, "(0, inf)"));
    }
    Ok((1..=q)
        .rev()
        .find(|&j| spec.ell(j) / (2.0 * sigma_hat) > 1.0)
        .unwrap_or(0))
}
