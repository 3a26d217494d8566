use super::coupling::RealCoupling;
use super::density::LevelDensity;
use super::lkernel::LevelKernel;
use crate::error::{Error, Result};
use crate::measure::RealMeasure;
use crate::tol;

/// A threshold of a lower orthant, on the real line or directly on levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Real(f64),
    Level(f64),
}

/// Law of a chain started from `λ` on levels and moved by level kernels.
/// Optional marginals translate real thresholds into levels.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainLaw {
    steps: Vec<LevelKernel>,
    marginals: Option<Vec<RealMeasure>>,
}

impl MarkovChainLaw {
    pub fn new(steps: Vec<LevelKernel>) -> Self {
        Self { steps, marginals: None }
    }

    pub fn with_marginals(steps: Vec<LevelKernel>, marginals: Vec<RealMeasure>) -> Result<Self> {
        if marginals.len() != steps.len() + 1 {
            return Err(Error::LengthMismatch { expected: steps.len() + 1, got: marginals.len() });
        }
        Ok(Self { steps, marginals: Some(marginals) })
    }

    /// Catenation of real couplings. Between two steps the level is
    /// re-drawn uniformly inside the atom it sits in, since only the real
    /// value is remembered.
    pub fn from_real_couplings(steps: &[RealCoupling]) -> Result<Self> {
        let first = steps.first().ok_or_else(|| Error::Invalid("empty chain".into()))?;
        let mut kernels = vec![first.level.kernel().clone()];
        let mut marginals = vec![first.left.clone(), first.right.clone()];
        for w in steps.windows(2) {
            let deviation = w[0].right.kolmogorov(&w[1].left);
            if deviation > tol::CMP {
                return Err(Error::MarginalMismatch { deviation });
            }
            let atoms: Vec<(f64, f64)> = w[1].left.atoms().iter().map(|a| a.level_interval).collect();
            let ell = LevelKernel::averaging(&atoms);
            kernels.push(ell.compose(w[1].level.kernel())?);
            marginals.push(w[1].right.clone());
        }
        Self::with_marginals(kernels, marginals)
    }

    pub fn steps(&self) -> &[LevelKernel] {
        &self.steps
    }

    pub fn time_points(&self) -> usize {
        self.steps.len() + 1
    }

    fn level_of(&self, i: usize, t: Threshold) -> Result<f64> {
        match t {
            Threshold::Level(u) => Ok(u.clamp(0.0, 1.0)),
            Threshold::Real(x) => {
                let m = self
                    .marginals
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("real thresholds need marginals".into()))?;
                Ok(m[i].cdf(x))
            }
        }
    }

    /// Lower-orthant mass `P(X_0 ≤ x_0, ..., X_d ≤ x_d)`.
    pub fn fd_cdf(&self, thresholds: &[Threshold]) -> Result<f64> {
        if thresholds.len() != self.time_points() {
            return Err(Error::LengthMismatch { expected: self.time_points(), got: thresholds.len() });
        }
        let mut theta = LevelDensity::lebesgue().restrict(self.level_of(0, thresholds[0])?);
        for (i, k) in self.steps.iter().enumerate() {
            if theta.mass() <= 0.0 {
                return Ok(0.0);
            }
            theta = k.apply(&theta).restrict(self.level_of(i + 1, thresholds[i + 1])?);
        }
        Ok(theta.mass())
    }
}

pub fn fd_cdf(chain: &MarkovChainLaw, thresholds: &[Threshold]) -> Result<f64> {
    chain.fd_cdf(thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_chain_is_comonotone() {
        let c = MarkovChainLaw::new(vec![LevelKernel::identity()]);
        let m = c.fd_cdf(&[Threshold::Level(0.3), Threshold::Level(0.7)]).unwrap();
        assert!((m - 0.3).abs() < 1e-15);
    }

    #[test]
    fn averaging_chain_is_independent() {
        let c = MarkovChainLaw::new(vec![LevelKernel::full_averaging()]);
        let m = c.fd_cdf(&[Threshold::Level(0.3), Threshold::Level(0.7)]).unwrap();
        assert!((m - 0.21).abs() < 1e-15);
    }

    #[test]
    fn length_is_checked() {
        let c = MarkovChainLaw::new(vec![LevelKernel::identity()]);
        assert_eq!(c.fd_cdf(&[Threshold::Level(0.3)]), Err(Error::LengthMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn catenation_breaks_at_atoms() {
        let flag = RealMeasure::discrete(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let zero = RealMeasure::dirac(0.0);
        let q1 = RealCoupling::quantile(&flag, &zero);
        let q2 = RealCoupling::quantile(&zero, &flag);
        let c = MarkovChainLaw::from_real_couplings(&[q1, q2]).unwrap();
        let m = c.fd_cdf(&[Threshold::Real(0.0), Threshold::Real(0.0), Threshold::Real(0.0)]).unwrap();
        assert!((m - 0.25).abs() < 1e-15);
    }
}
