use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};

/// Discrete forward-diffusion schedule. Timesteps are 1-based: `t` in `1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl Default for NoiseSchedule {
    /// Linear betas from 1e-4 to 2e-2 over 1000 steps.
    fn default() -> Self {
        NoiseSchedule::linear(1000, 1e-4, 2e-2).expect("valid default schedule")
    }
}

impl NoiseSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        let betas = if steps == 1 {
            vec![beta_start]
        } else {
            (0..steps)
                .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
                .collect()
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::InvalidArgument("betas must lie in (0, 1)".into()));
        }
        let alpha_bars = betas
            .iter()
            .scan(1.0, |acc, b| {
                *acc *= 1.0 - b;
                Some(*acc)
            })
            .collect();
        Ok(NoiseSchedule { betas, alpha_bars })
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.len() {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} outside 1..={}",
                self.len()
            )));
        }
        Ok(self.alpha_bars[t - 1])
    }

    /// Uniform over `1..=T`.
    pub fn sample_timestep<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(1..=self.len())
    }
}

/// `sqrt(a) * z0 + sqrt(1 - a) * eps`.
pub fn noise_with_alpha_bar(z0: &DVector<f64>, eps: &DVector<f64>, alpha_bar: f64) -> DVector<f64> {
    z0 * alpha_bar.sqrt() + eps * (1.0 - alpha_bar).sqrt()
}

pub fn noise_image(
    z0: &DVector<f64>,
    t: usize,
    eps: &DVector<f64>,
    schedule: &NoiseSchedule,
) -> Result<DVector<f64>> {
    if z0.len() != eps.len() {
        return Err(Error::DimensionMismatch {
            what: "noise",
            expected: z0.len(),
            actual: eps.len(),
        });
    }
    Ok(noise_with_alpha_bar(z0, eps, schedule.alpha_bar(t)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_bars_strictly_decrease_in_unit_interval() {
        let s = NoiseSchedule::default();
        assert_eq!(s.len(), 1000);
        let ab = s.alpha_bars();
        assert!(ab[0] < 1.0 && ab[0] > 0.0);
        assert!(ab.windows(2).all(|w| w[1] < w[0]));
        assert!(*ab.last().unwrap() > 0.0);
    }

    #[test]
    fn limits() {
        let z0 = DVector::from_vec(vec![1.0, -2.0]);
        let eps = DVector::from_vec(vec![0.5, 0.25]);
        assert_eq!(noise_with_alpha_bar(&z0, &eps, 1.0), z0);
        assert_eq!(noise_with_alpha_bar(&z0, &eps, 0.0), eps);
    }

    #[test]
    fn timestep_bounds() {
        let s = NoiseSchedule::default();
        let z = DVector::zeros(2);
        assert!(noise_image(&z, 0, &z, &s).is_err());
        assert!(noise_image(&z, 1001, &z, &s).is_err());
        assert!(noise_image(&z, 1000, &z, &s).is_ok());
        assert!(NoiseSchedule::from_betas(vec![0.1, 1.0]).is_err());
    }
}
