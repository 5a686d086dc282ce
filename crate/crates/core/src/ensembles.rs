//! Noise ensembles and spiked observations.
//!
//! Every sampler fills the upper triangle (diagonal included) and mirrors it,
//! so the returned matrices are exactly symmetric. Draw order is fixed
//! (column-major over the upper triangle), which makes every sampler a pure
//! function of the dimension and the generator state.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Noise law of the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseProfile {
    /// Gaussian orthogonal ensemble; used as `sigma * G`.
    #[serde(rename = "goe")]
    Goe,
    /// Wigner matrix with random-sign entries (diagonal included).
    #[serde(rename = "rademacher")]
    RademacherWigner,
    /// Entrywise product of independent symmetric Toeplitz and Hankel
    /// Gaussian matrices; entries are dependent but uncorrelated.
    #[serde(rename = "toeplitz-hankel")]
    ToeplitzHankel,
}

impl NoiseProfile {
    pub const ALL: [NoiseProfile; 3] = [
        NoiseProfile::Goe,
        NoiseProfile::RademacherWigner,
        NoiseProfile::ToeplitzHankel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseProfile::Goe => "goe",
            NoiseProfile::RademacherWigner => "rademacher",
            NoiseProfile::ToeplitzHankel => "toeplitz-hankel",
        }
    }

    /// Draws the noise matrix already scaled to unit bulk radius `2`:
    /// `G` for GOE and `W / sqrt(n)` for the Wigner-type profiles.
    pub fn sample_normalized<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Result<Matrix> {
        match self {
            NoiseProfile::Goe => sample_goe(n, rng),
            NoiseProfile::RademacherWigner => {
                let w = sample_rademacher_wigner(n, rng)?;
                Ok(scaled(w, 1.0 / (n as f64).sqrt()))
            }
            NoiseProfile::ToeplitzHankel => {
                let w = sample_toeplitz_hankel(n, rng)?;
                Ok(scaled(w, 1.0 / (n as f64).sqrt()))
            }
        }
    }
}

impl fmt::Display for NoiseProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "goe" => Ok(NoiseProfile::Goe),
            "rademacher" | "rad" | "rademacher-wigner" => Ok(NoiseProfile::RademacherWigner),
            "toeplitz-hankel" | "th" | "toeplitz_hankel" => Ok(NoiseProfile::ToeplitzHankel),
            _ => Err(Error::config(
                "profile",
                format!("unknown noise profile {s:?} (expected goe, rademacher or toeplitz-hankel)"),
            )),
        }
    }
}

/// Signal eigenvalues `lambda_1 >= ... >= lambda_k > 0` and noise level `sigma`.
///
/// Sub-threshold spikes (`lambda_k <= sigma`) are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeConfig {
    pub lambdas: Vec<f64>,
    pub sigma: f64,
}

impl SpikeConfig {
    pub fn new(lambdas: Vec<f64>, sigma: f64) -> Result<Self> {
        let spikes = SpikeConfig { lambdas, sigma };
        spikes.validate()?;
        if spikes.sigma <= 0.0 {
            return Err(Error::domain("sigma", spikes.sigma, "(0, inf)"));
        }
        Ok(spikes)
    }

    /// A noise-free configuration (`sigma = 0`); only meaningful for
    /// assembling observations, the estimators need a positive noise level.
    pub fn noiseless(lambdas: Vec<f64>) -> Result<Self> {
        let spikes = SpikeConfig {
            lambdas,
            sigma: 0.0,
        };
        spikes.validate()?;
        Ok(spikes)
    }

    /// Checks ordering and positivity; `sigma = 0` passes.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::domain("sigma", self.sigma, "[0, inf)"));
        }
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::domain("lambda", l, "(0, inf)"));
            }
            if i > 0 && l > self.lambdas[i - 1] {
                return Err(Error::config(
                    "lambdas",
                    "spike eigenvalues must be in descending order",
                ));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.lambdas.len()
    }
}

/// An `n x k` matrix with orthonormal columns.
#[derive(Debug, Clone)]
pub struct Frame {
    columns: Matrix,
}

impl Frame {
    pub fn columns(&self) -> &Matrix {
        &self.columns
    }

    pub fn n(&self) -> usize {
        self.columns.nrows()
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    /// Largest entry of `|U^T U - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.k();
        let gram = self.columns.transpose() * &self.columns;
        let mut worst = 0.0_f64;
        for j in 0..k {
            for i in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidDimension("matrix dimension must be at least 1".into()));
    }
    Ok(())
}

fn scaled(mut m: Matrix, factor: f64) -> Matrix {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= factor;
        }
    }
    m
}

/// Builds a symmetric matrix from a generator of upper-triangle entries.
fn symmetric_from_upper(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = entry(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// GOE matrix: off-diagonal entries `N(0, 1/n)`, diagonal entries `N(0, 2/n)`.
pub fn sample_goe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix> {
    check_dim(n)?;
    let off = (1.0 / n as f64).sqrt();
    let diag = (2.0 / n as f64).sqrt();
    Ok(symmetric_from_upper(n, |i, j| {
        let z: f64 = StandardNormal.sample(rng);
        if i == j {
            z * diag
        } else {
            z * off
        }
    }))
}

/// Unit-variance Wigner matrix with i.i.d. random signs on and above the diagonal.
pub fn sample_rademacher_wigner<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix> {
    check_dim(n)?;
    Ok(symmetric_from_upper(n, |_, _| {
        if rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }))
}

/// `T ⊙ H` with `T_ij = t_|i-j|` and `H_ij = h_(i+j+1)` (zero-based `i, j`),
/// all `t`, `h` i.i.d. standard normal. Entries have unit variance.
pub fn sample_toeplitz_hankel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix> {
    check_dim(n)?;
    let t: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    // h[m] holds h_(m+1), m = 0..2n-2
    let h: Vec<f64> = (0..2 * n - 1).map(|_| StandardNormal.sample(rng)).collect();
    Ok(symmetric_from_upper(n, |i, j| t[j - i] * h[i + j]))
}

/// Uniformly distributed `k`-frame in `R^n`.
///
/// Gaussian columns are orthonormalised by Gram-Schmidt with a second
/// reorthogonalisation pass; the implied triangular factor has a positive
/// diagonal, which is what makes the result Haar distributed.
pub fn sample_spike_frame<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Frame> {
    if k > n {
        return Err(Error::InvalidDimension(format!(
            "frame with {k} columns does not fit in dimension {n}"
        )));
    }
    let mut u = Matrix::zeros(n, k);
    for j in 0..k {
        for i in 0..n {
            u[(i, j)] = StandardNormal.sample(rng);
        }
    }
    for j in 0..k {
        for _pass in 0..2 {
            for p in 0..j {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += u[(i, p)] * u[(i, j)];
                }
                for i in 0..n {
                    let v = u[(i, p)];
                    u[(i, j)] -= dot * v;
                }
            }
        }
        let norm = (0..n).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidDimension(
                "degenerate Gaussian draw while sampling a frame".into(),
            ));
        }
        for i in 0..n {
            u[(i, j)] /= norm;
        }
    }
    Ok(Frame { columns: u })
}

/// `X = sum_i lambda_i u_i u_i^T + noise` with a freshly sampled frame.
///
/// Noise is `sigma * G` for GOE and `(sigma / sqrt(n)) * W` otherwise. The
/// noise is drawn before the frame.
pub fn assemble_observation<R: Rng + ?Sized>(
    spikes: &SpikeConfig,
    profile: NoiseProfile,
    n: usize,
    rng: &mut R,
) -> Result<Matrix> {
    spikes.validate()?;
    check_dim(n)?;
    let k = spikes.k();
    if k > n {
        return Err(Error::InvalidDimension(format!(
            "{k} spikes do not fit in dimension {n}"
        )));
    }
    let noise = profile.sample_normalized(n, rng)?;
    let frame = sample_spike_frame(n, k, rng)?;
    let u = frame.columns();
    let sigma = spikes.sigma;
    Ok(symmetric_from_upper(n, |i, j| {
        let signal: f64 = spikes
            .lambdas
            .iter()
            .enumerate()
            .map(|(c, &l)| l * u[(i, c)] * u[(j, c)])
            .sum();
        signal + sigma * noise[(i, j)]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigenvalues_desc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn assert_exactly_symmetric(m: &Matrix) {
        for j in 0..m.ncols() {
            for i in 0..j {
                assert_eq!(m[(i, j)].to_bits(), m[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(sample_goe(0, &mut rng(1)), Err(Error::InvalidDimension(_))));
        assert!(sample_rademacher_wigner(0, &mut rng(1)).is_err());
        assert!(sample_toeplitz_hankel(0, &mut rng(1)).is_err());
    }

    #[test]
    fn goe_one_by_one_has_variance_two() {
        let draws: Vec<f64> = (0..20_000)
            .map(|s| sample_goe(1, &mut rng(s)).unwrap()[(0, 0)])
            .collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        assert!((var - 2.0).abs() < 0.1, "var = {var}");
    }

    #[test]
    fn goe_moments_at_n_1000() {
        let n = 1000;
        let g = sample_goe(n, &mut rng(7)).unwrap();
        assert_exactly_symmetric(&g);
        let (mut off, mut count, mut diag) = (0.0, 0usize, 0.0);
        for j in 0..n {
            diag += g[(j, j)] * g[(j, j)];
            for i in 0..j {
                off += g[(i, j)] * g[(i, j)];
                count += 1;
            }
        }
        let off = off / count as f64;
        let diag = diag / n as f64;
        assert!((off * n as f64 - 1.0).abs() < 0.05, "off-diagonal {off}");
        assert!((diag * n as f64 - 2.0).abs() < 0.3, "diagonal {diag}");
    }

    #[test]
    fn goe_is_deterministic() {
        let a = sample_goe(4, &mut rng(11)).unwrap();
        let b = sample_goe(4, &mut rng(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rademacher_support_and_symmetry() {
        let n = 1000;
        let w = sample_rademacher_wigner(n, &mut rng(3)).unwrap();
        assert_exactly_symmetric(&w);
        let mut plus = 0usize;
        for j in 0..n {
            for i in 0..n {
                let v = w[(i, j)];
                assert!(v == 1.0 || v == -1.0);
                plus += (v > 0.0) as usize;
            }
        }
        let frac = plus as f64 / (n * n) as f64;
        assert!((frac - 0.5).abs() < 0.01);
    }

    #[test]
    fn toeplitz_hankel_unrolled_at_n_2() {
        let mut r1 = rng(5);
        let w = sample_toeplitz_hankel(2, &mut r1).unwrap();
        let mut r2 = rng(5);
        let t: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut r2)).collect();
        let h: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut r2)).collect();
        assert_eq!(w[(0, 0)], t[0] * h[0]);
        assert_eq!(w[(0, 1)], t[1] * h[1]);
        assert_eq!(w[(1, 0)], t[1] * h[1]);
        assert_eq!(w[(1, 1)], t[0] * h[2]);
    }

    #[test]
    fn toeplitz_hankel_entry_variance() {
        let n = 1000;
        let w = sample_toeplitz_hankel(n, &mut rng(9)).unwrap();
        assert_exactly_symmetric(&w);
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                acc += w[(i, j)] * w[(i, j)];
            }
        }
        let var = acc / (n * n) as f64;
        assert!((var - 1.0).abs() < 0.1, "var = {var}");
    }

    #[test]
    fn frame_contracts() {
        let empty = sample_spike_frame(10, 0, &mut rng(1)).unwrap();
        assert_eq!((empty.n(), empty.k()), (10, 0));

        let f = sample_spike_frame(10, 3, &mut rng(2)).unwrap();
        assert!(f.orthonormality_defect() <= 1e-10);

        let full = sample_spike_frame(30, 30, &mut rng(3)).unwrap();
        assert!(full.orthonormality_defect() <= 1e-10);

        let mut r = rng(4);
        let a = sample_spike_frame(50, 2, &mut r).unwrap();
        let b = sample_spike_frame(50, 2, &mut r).unwrap();
        assert_ne!(a.columns(), b.columns());

        assert!(matches!(
            sample_spike_frame(3, 4, &mut rng(1)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn noiseless_observation_has_spike_spectrum() {
        let spikes = SpikeConfig::noiseless(vec![5.0]).unwrap();
        for profile in NoiseProfile::ALL {
            let x = assemble_observation(&spikes, profile, 40, &mut rng(8)).unwrap();
            let spec = eigenvalues_desc(&x).unwrap();
            assert!((spec.values()[0] - 5.0).abs() < 1e-8);
            for &v in &spec.values()[1..] {
                assert!(v.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn observation_is_deterministic_and_symmetric() {
        let spikes = SpikeConfig::new(vec![3.0, 2.0], 1.0).unwrap();
        for profile in NoiseProfile::ALL {
            let a = assemble_observation(&spikes, profile, 30, &mut rng(21)).unwrap();
            let b = assemble_observation(&spikes, profile, 30, &mut rng(21)).unwrap();
            assert_eq!(a, b);
            assert_exactly_symmetric(&a);
        }
    }

    #[test]
    fn pure_goe_edge_near_two_sigma() {
        let sigma = 1.5;
        let spikes = SpikeConfig::new(vec![], sigma).unwrap();
        let x = assemble_observation(&spikes, NoiseProfile::Goe, 1000, &mut rng(31)).unwrap();
        let top = eigenvalues_desc(&x).unwrap().values()[0];
        assert!((top - 2.0 * sigma).abs() < 0.2, "top = {top}");
    }

    #[test]
    fn spike_validation() {
        assert!(SpikeConfig::new(vec![1.0, 2.0], 1.0).is_err());
        assert!(SpikeConfig::new(vec![2.0, -1.0], 1.0).is_err());
        assert!(SpikeConfig::new(vec![2.0], 0.0).is_err());
        assert!(SpikeConfig::noiseless(vec![2.0]).is_ok());
        // sub-threshold spikes stay allowed
        assert!(SpikeConfig::new(vec![0.5], 1.0).is_ok());
    }

    #[test]
    fn too_many_spikes_rejected() {
        let spikes = SpikeConfig::new(vec![3.0, 2.0, 1.0], 1.0).unwrap();
        assert!(assemble_observation(&spikes, NoiseProfile::Goe, 2, &mut rng(1)).is_err());
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("GOE".parse::<NoiseProfile>().unwrap(), NoiseProfile::Goe);
        assert_eq!(
            "toeplitz-hankel".parse::<NoiseProfile>().unwrap(),
            NoiseProfile::ToeplitzHankel
        );
        assert!("cauchy".parse::<NoiseProfile>().is_err());
    }
}
