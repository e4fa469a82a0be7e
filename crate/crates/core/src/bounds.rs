//! Closed-form values and lower bounds for `s(X;Y)` and mCor in the
//! rare-correlation examples, plus the mixture scaling laws of the classical
//! measures. All bounds are in nats and floored at zero.

use serde::{Deserialize, Serialize};

use crate::types::binary_entropy;
use crate::{Error, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("|rho| must be below 1, got {rho}")))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k >= 2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("k must be at least 2, got {k}")))
    }
}

fn check_eps(k: usize, eps: f64) -> Result<()> {
    let max = (k as f64 - 1.0) / k as f64;
    if (0.0..=max).contains(&eps) {
        Ok(())
    } else {
        Err(Error::Domain(format!("eps must lie in [0, {max}], got {eps}")))
    }
}

/// `s(X;Y) = ρ²` for a jointly Gaussian pair.
pub fn gaussian_s(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(rho * rho)
}

/// Lower bound on `s(X;Y)` when `(X, Y)` is standard bivariate Gaussian with
/// correlation `ρ` on a region of probability `α`:
///
/// `[ln 1/(1−ρ²) + ln 1/(1+ρ²)] / [ln 1/(1−ρ²) + H(α)/α]`.
pub fn gaussian_mixture_bound(rho: f64, alpha: f64) -> Result<f64> {
    check_rho(rho)?;
    check_alpha(alpha)?;
    let r2 = rho * rho;
    let a = -(1.0 - r2).ln();
    let num = a - (1.0 + r2).ln();
    let den = a + binary_entropy(alpha)? / alpha;
    if den <= 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).max(0.0))
}

/// `ln k / (ln k + ln 1/α)`: lower bound when `Y = X` is uniform on `k`
/// symbols inside a region of probability `α`.
pub fn identity_mixture_bound(k: usize, alpha: f64) -> Result<f64> {
    check_k(k)?;
    check_alpha(alpha)?;
    let lk = (k as f64).ln();
    Ok(lk / (lk - alpha.ln()))
}

/// `(ln k − H(ε) − ε ln(k−1)) / ln(k/α)` for the random-corruption model.
pub fn noisy_identity_bound(k: usize, alpha: f64, eps: f64) -> Result<f64> {
    check_k(k)?;
    check_alpha(alpha)?;
    check_eps(k, eps)?;
    let kf = k as f64;
    let num = kf.ln() - binary_entropy(eps)? - eps * (kf - 1.0).ln();
    let den = kf.ln() - alpha.ln();
    Ok((num / den).max(0.0))
}

/// mCor in the random-corruption model, `√α (1 − kε/(k−1))`.
pub fn noisy_identity_mcor(k: usize, alpha: f64, eps: f64) -> Result<f64> {
    check_k(k)?;
    check_alpha(alpha)?;
    check_eps(k, eps)?;
    let kf = k as f64;
    Ok((alpha.sqrt() * (1.0 - kf * eps / (kf - 1.0))).max(0.0))
}

/// Mixture-level predictions from rare-part values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixturePrediction {
    /// `√α · mCor(X_r, Y)`, exact.
    pub mcor: f64,
    /// `α · dCor(X_r, Y)`, exact.
    pub dcor: f64,
    /// `α · MIC(X_r, Y)`, an upper bound only.
    pub mic_upper: f64,
}

pub fn mixture_scalings(alpha: f64, mcor_r: f64, dcor_r: f64, mic_r: f64) -> Result<MixturePrediction> {
    check_alpha(alpha)?;
    for (name, v) in [("mcor", mcor_r), ("dcor", dcor_r), ("mic", mic_r)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    Ok(MixturePrediction {
        mcor: alpha.sqrt() * mcor_r,
        dcor: alpha * dcor_r,
        mic_upper: alpha * mic_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        assert_eq!(gaussian_s(0.0).unwrap(), 0.0);
        assert_eq!(gaussian_s(0.5).unwrap(), 0.25);
        assert!((gaussian_s(-0.9).unwrap() - 0.81).abs() < 1e-15);
        assert!(gaussian_s(1.0).is_err());
    }

    #[test]
    fn gaussian_mixture_values() {
        assert!(gaussian_mixture_bound(1e-6, 0.1).unwrap() < 1e-9);
        let direct = {
            let a = -(1.0f64 - 0.64).ln();
            (a - 1.64f64.ln()) / a
        };
        let b = gaussian_mixture_bound(0.8, 1.0).unwrap();
        assert!((b - direct).abs() < 1e-15);
        assert!((b - 0.5158).abs() < 5e-5, "{b}");
        assert!(gaussian_mixture_bound(0.9, 0.5).unwrap() > gaussian_mixture_bound(0.9, 0.1).unwrap());
        assert!(gaussian_mixture_bound(0.9, 0.0).is_err());
        assert!(gaussian_mixture_bound(1.0, 0.5).is_err());
    }

    #[test]
    fn identity_mixture_values() {
        assert!((identity_mixture_bound(2, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(identity_mixture_bound(5, 1.0).unwrap(), 1.0);
        let direct = 4f64.ln() / (4f64.ln() + 10f64.ln());
        assert!((identity_mixture_bound(4, 0.1).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.3758).abs() < 5e-5);
        assert!(identity_mixture_bound(1, 0.5).is_err());
        for k in 2..10 {
            assert!(identity_mixture_bound(k + 1, 0.3).unwrap() > identity_mixture_bound(k, 0.3).unwrap());
        }
        assert!(identity_mixture_bound(3, 0.4).unwrap() > identity_mixture_bound(3, 0.3).unwrap());
    }

    #[test]
    fn noisy_identity_values() {
        for k in 2..7 {
            for &a in &[0.05, 0.3, 1.0] {
                assert_eq!(
                    noisy_identity_bound(k, a, 0.0).unwrap(),
                    identity_mixture_bound(k, a).unwrap()
                );
            }
        }
        assert!(noisy_identity_bound(2, 0.3, 0.5).unwrap().abs() < 1e-15);
        let h = -0.1 * 0.1f64.ln() - 0.9 * 0.9f64.ln();
        let direct = (3f64.ln() - h - 0.1 * 2f64.ln()) / 30f64.ln();
        assert!((noisy_identity_bound(3, 0.1, 0.1).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.20705).abs() < 5e-6, "{direct}");
        assert!(noisy_identity_bound(3, 0.1, 0.7).is_err());
    }

    #[test]
    fn noisy_identity_mcor_values() {
        assert_eq!(noisy_identity_mcor(4, 1.0, 0.0).unwrap(), 1.0);
        assert!(noisy_identity_mcor(3, 0.5, 2.0 / 3.0).unwrap().abs() < 1e-15);
        let direct = 0.1f64.sqrt() * 0.85;
        assert!((noisy_identity_mcor(3, 0.1, 0.1).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.2688).abs() < 5e-5);
    }

    #[test]
    fn scalings() {
        let id = mixture_scalings(1.0, 0.3, 0.4, 0.5).unwrap();
        assert_eq!((id.mcor, id.dcor, id.mic_upper), (0.3, 0.4, 0.5));
        assert_eq!(mixture_scalings(0.25, 1.0, 0.0, 0.0).unwrap().mcor, 0.5);
        assert!((mixture_scalings(0.1, 0.0, 0.8, 0.0).unwrap().dcor - 0.08).abs() < 1e-15);
        assert!(mixture_scalings(0.0, 0.1, 0.1, 0.1).is_err());
        assert!(mixture_scalings(0.5, 1.1, 0.1, 0.1).is_err());
    }
}
