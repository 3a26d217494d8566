//! The Markov-quantile process and its relatives: pair couplings,
//! finite-dimensional laws, path simulation, Markov diagnosis and jump
//! rates of integer-valued families.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{pushforward_coupling, LevelKernel, MarkovChainLaw, RealCoupling, Threshold};
use crate::levels::{l_finite, l_span, MarginalFamily, Refinement, TimeSpan};
use crate::measure::RealMeasure;
use crate::random::open_unit;
use crate::tol;

/// Which process on the marginals of a family.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessVariant {
    /// Comonotone law: one level drives every time.
    Quantile,
    /// Quantile law made Markov at the listed times.
    MadeMarkovAt(Vec<f64>),
    MarkovQuantile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessHandle {
    pub family: MarginalFamily,
    pub variant: ProcessVariant,
    pub refinement: Refinement,
}

/// Sampled trajectories on a common time grid, equally weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    /// One row per path.
    pub paths: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Up and down jump rates at a state, side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRates {
    /// From the derivative of `t ↦ μ_t((-∞, k])`.
    pub analytic: (f64, f64),
    /// `P(X_{t+h} = k±1 | X_t = k) / h`, extrapolated from steps `h` and `h/2`.
    pub empirical: (f64, f64),
    /// The plain ratio at step `h`.
    pub empirical_raw: (f64, f64),
}

/// Outcome of the Markov diagnosis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovReport {
    pub deviation: f64,
    pub markov: bool,
}

/// `MQ^{s,t}`.
pub fn mq_coupling(family: &MarginalFamily, s: f64, t: f64, refinement: &Refinement) -> Result<RealCoupling> {
    ProcessHandle::new(family.clone(), ProcessVariant::MarkovQuantile).with_refinement(*refinement).coupling(s, t)
}

impl ProcessHandle {
    pub fn new(family: MarginalFamily, variant: ProcessVariant) -> Self {
        Self { family, variant, refinement: Refinement::default() }
    }

    pub fn with_refinement(mut self, refinement: Refinement) -> Self {
        self.refinement = refinement;
        self
    }

    /// Level kernel carrying the process from `s` to `t`. The Markov-quantile
    /// step uses the closed span `[s,t]`; the extra end factors act inside
    /// atoms only, so pushforwards are unchanged and consecutive steps
    /// compose exactly.
    pub fn level_step(&self, s: f64, t: f64) -> Result<LevelKernel> {
        if t < s {
            return Err(Error::Invalid(format!("times out of order: {s} > {t}")));
        }
        match &self.variant {
            ProcessVariant::Quantile => Ok(LevelKernel::identity()),
            ProcessVariant::MadeMarkovAt(r) => {
                let pts: Vec<f64> = r.iter().copied().filter(|&x| x > s && x <= t).collect();
                Ok(l_finite(&self.family, &pts)?.into_kernel())
            }
            ProcessVariant::MarkovQuantile => {
                Ok(l_span(&self.family, &TimeSpan::closed(s, t), &self.refinement)?.0.into_kernel())
            }
        }
    }

    /// Pair law of `(X_s, X_t)`.
    pub fn coupling(&self, s: f64, t: f64) -> Result<RealCoupling> {
        let k = self.level_step(s, t)?;
        Ok(pushforward_coupling(&self.family.marginal(s)?, &self.family.marginal(t)?, &k.into()))
    }

    fn steps(&self, times: &[f64]) -> Result<Vec<LevelKernel>> {
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("times must be strictly increasing".into()));
        }
        times.par_windows(2).map(|w| self.level_step(w[0], w[1])).collect()
    }

    fn marginals(&self, times: &[f64]) -> Result<Vec<RealMeasure>> {
        times.iter().map(|&t| self.family.marginal(t)).collect()
    }

    /// Chain law on the given times.
    pub fn chain(&self, times: &[f64]) -> Result<MarkovChainLaw> {
        MarkovChainLaw::with_marginals(self.steps(times)?, self.marginals(times)?)
    }

    /// `P(X_{t_0} ≤ x_0, ..., X_{t_d} ≤ x_d)`.
    pub fn fd_cdf(&self, times: &[f64], xs: &[f64]) -> Result<f64> {
        if times.len() != xs.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: xs.len() });
        }
        let thresholds: Vec<Threshold> = xs.iter().map(|&x| Threshold::Real(x)).collect();
        self.chain(times)?.fd_cdf(&thresholds)
    }

    /// Compares the finite-dimensional law on `times` with the catenation of
    /// its own pair laws, on a grid of thresholds built from the marginal
    /// breakpoints and their midpoints.
    pub fn markov_check(&self, times: &[f64], tol: f64) -> Result<MarkovReport> {
        if times.len() < 3 {
            return Err(Error::Invalid("the Markov check needs at least three times".into()));
        }
        let own = self.chain(times)?;
        let pairs = times.windows(2).map(|w| self.coupling(w[0], w[1])).collect::<Result<Vec<_>>>()?;
        let cat = MarkovChainLaw::from_real_couplings(&pairs)?;
        let grids: Vec<Vec<f64>> = self.marginals(times)?.iter().map(|m| thresholds_for(m, 9)).collect();
        let total: usize = grids.iter().map(|g| g.len()).product();
        let deviation = (0..total)
            .into_par_iter()
            .map(|mut idx| {
                let th: Vec<Threshold> = grids
                    .iter()
                    .map(|g| {
                        let x = g[idx % g.len()];
                        idx /= g.len();
                        Threshold::Real(x)
                    })
                    .collect();
                Ok((own.fd_cdf(&th)? - cat.fd_cdf(&th)?).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(MarkovReport { deviation, markov: deviation <= tol })
    }

    /// Paths sampled on `grid` by stepping the level with the kernel between
    /// consecutive grid times and reading it through the quantile function.
    /// Path `i` uses its own stream of the generator seeded by `seed`.
    pub fn simulate(&self, grid: &[f64], n: usize, seed: u64) -> Result<PathEnsemble> {
        if n == 0 || grid.is_empty() {
            return Err(Error::Invalid("need at least one path and one time".into()));
        }
        let steps = self.steps(grid)?;
        let marginals = self.marginals(grid)?;
        let paths = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut u = open_unit(&mut rng);
                let mut path = Vec::with_capacity(grid.len());
                path.push(marginals[0].g(u));
                for (k, m) in steps.iter().zip(&marginals[1..]) {
                    let w1 = open_unit(&mut rng);
                    let w2 = open_unit(&mut rng);
                    u = k.sample_row(u, w1, w2).clamp(f64::MIN_POSITIVE, 1.0);
                    path.push(m.g(u));
                }
                path
            })
            .collect();
        Ok(PathEnsemble { times: grid.to_vec(), paths, seed })
    }
}

/// Breakpoints of `m`, midpoints between them and one point beyond each
/// end, thinned to at most `max` values.
pub(crate) fn thresholds_for(m: &RealMeasure, max: usize) -> Vec<f64> {
    let bp = m.x_breakpoints();
    let mut xs = bp.clone();
    xs.extend(bp.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let (lo, hi) = m.support();
    xs.push(lo - 1.0);
    xs.push(hi + 1.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() <= max {
        return xs;
    }
    let step = (xs.len() - 1) as f64 / (max - 1) as f64;
    let mut out: Vec<f64> = (0..max).map(|i| xs[(i as f64 * step).round() as usize]).collect();
    out.dedup();
    out
}

/// Jump rates at state `k` of an integer-valued family at time `t`.
pub fn jump_rates(family: &MarginalFamily, t: f64, k: i64, h: f64, refinement: &Refinement) -> Result<JumpRates> {
    if h <= 0.0 {
        return Err(Error::Invalid("step must be positive".into()));
    }
    let kf = k as f64;
    let mu = family.marginal(t)?;
    let mass = mu.mass_at(kf);
    if mass <= tol::REPR {
        return Err(Error::ZeroMass(mass));
    }
    let deriv = |x: f64| -> Result<f64> {
        if let Some(d) = family.cdf_derivative(t, x) {
            return Ok(d);
        }
        let fwd = |step: f64| -> Result<f64> { Ok((family.marginal(t + step)?.cdf(x) - mu.cdf(x)) / step) };
        Ok(2.0 * fwd(h / 2.0)? - fwd(h)?)
    };
    let analytic = ((-deriv(kf)?).max(0.0) / mass, deriv(kf - 1.0)?.max(0.0) / mass);
    // Over a short step the refinement only needs to resolve a fraction of
    // the transition mass, which scales like h.
    let fine = Refinement { tol: refinement.tol.min(0.1 * h * h), ..*refinement };
    let ratio = |step: f64| -> Result<(f64, f64)> {
        let p = mq_coupling(family, t, t + step, &fine)?;
        Ok((p.point_mass(kf, kf + 1.0) / mass / step, p.point_mass(kf, kf - 1.0) / mass / step))
    };
    let raw = ratio(h)?;
    let half = ratio(h / 2.0)?;
    let empirical = (2.0 * half.0 - raw.0, 2.0 * half.1 - raw.1);
    Ok(JumpRates { analytic, empirical, empirical_raw: raw })
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[i]).collect()
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.paths.iter().map(|p| p[i]).sum::<f64>() / self.paths.len() as f64
    }

    /// Empirical `P(X_{t_i} ≤ x)`.
    pub fn cdf(&self, i: usize, x: f64) -> f64 {
        self.paths.iter().filter(|p| p[i] <= x).count() as f64 / self.paths.len() as f64
    }

    /// Empirical `P(X_{t_i} ≤ x, X_{t_j} ≤ y)`.
    pub fn pair_cdf(&self, i: usize, j: usize, x: f64, y: f64) -> f64 {
        self.paths.iter().filter(|p| p[i] <= x && p[j] <= y).count() as f64 / self.paths.len() as f64
    }

    /// Largest distance between the empirical CDF at time `i` and `m`,
    /// checked on both sides of every sample value.
    pub fn kolmogorov(&self, i: usize, m: &RealMeasure) -> f64 {
        let mut xs = self.column(i);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mut worst: f64 = 0.0;
        let mut k = 0;
        while k < xs.len() {
            let x = xs[k];
            let below = k as f64 / n;
            let end = xs.partition_point(|&y| y <= x);
            let upto = end as f64 / n;
            worst = worst.max((m.cdf_left(x) - below).abs()).max((m.cdf(x) - upto).abs());
            k = end;
        }
        worst
    }

    /// Sup distance between the empirical pair CDF of `(t_i, t_j)` and `p`
    /// at the sample values of both coordinates.
    pub fn pair_distance(&self, i: usize, j: usize, p: &RealCoupling, max_points: usize) -> f64 {
        let pick = |c: usize| {
            let mut v = self.column(c);
            v.sort_by(f64::total_cmp);
            v.dedup();
            if v.len() > max_points {
                let step = v.len() as f64 / max_points as f64;
                v = (0..max_points).map(|k| v[(k as f64 * step) as usize]).collect();
            }
            v
        };
        let xs = pick(i);
        let ys = pick(j);
        let n = self.paths.len() as f64;
        // Tabulate the empirical CDF on the chosen points with one sweep per row.
        let mut pts: Vec<(f64, f64)> = self.paths.iter().map(|p| (p[i], p[j])).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let exact = p.cdf_grid(&xs, &ys);
        xs.par_iter()
            .zip(exact.par_chunks(ys.len()))
            .map(|(&x, row)| {
                let upto = pts.partition_point(|q| q.0 <= x);
                let mut col: Vec<f64> = pts[..upto].iter().map(|q| q.1).collect();
                col.sort_by(f64::total_cmp);
                ys.iter()
                    .zip(row)
                    .map(|(&y, f)| {
                        let emp = col.partition_point(|&v| v <= y) as f64 / n;
                        (emp - f).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Every path is non-decreasing along the grid.
    pub fn is_nondecreasing(&self) -> bool {
        self.paths.iter().all(|p| p.windows(2).all(|w| w[1] >= w[0] - tol::REPR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::{Background, Builtin, ExplicitFamily};

    fn flag() -> MarginalFamily {
        let two = RealMeasure::discrete(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let pts = vec![
            (-1.0, two.clone()),
            (-0.5, two.clone()),
            (0.0, RealMeasure::dirac(0.0)),
            (0.5, two.clone()),
            (1.0, two),
        ];
        MarginalFamily::Explicit(ExplicitFamily::new(pts, vec![], Background::Undefined, true).unwrap())
    }

    #[test]
    fn flag_pair_laws() {
        let p = mq_coupling(&flag(), -1.0, 1.0, &Refinement::default()).unwrap();
        for (x, y) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            assert!((p.point_mass(x, y) - 0.25).abs() < 1e-12);
        }
        let p = mq_coupling(&flag(), -1.0, -0.5, &Refinement::default()).unwrap();
        assert!((p.point_mass(0.0, 0.0) - 0.5).abs() < 1e-12);
        assert!(p.point_mass(0.0, 1.0).abs() < 1e-12);
    }

    #[test]
    fn variants_fd_cdf() {
        let q = ProcessHandle::new(flag(), ProcessVariant::Quantile);
        assert!((q.fd_cdf(&[-1.0, 1.0], &[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
        let m = ProcessHandle::new(flag(), ProcessVariant::MadeMarkovAt(vec![0.0]));
        assert!((m.fd_cdf(&[-1.0, 1.0], &[0.0, 0.0]).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn quantile_flag_is_not_markov() {
        let q = ProcessHandle::new(flag(), ProcessVariant::Quantile);
        let r = q.markov_check(&[-1.0, 0.0, 1.0], 1e-9).unwrap();
        assert!(!r.markov && r.deviation >= 0.2);
        let m = ProcessHandle::new(flag(), ProcessVariant::MarkovQuantile);
        assert!(m.markov_check(&[-1.0, 0.0, 1.0], 1e-9).unwrap().markov);
    }

    #[test]
    fn simulation_is_deterministic_and_monotone() {
        let fam = MarginalFamily::Parametric(Builtin::Poisson { rate: 1.0, max_atoms: 40 });
        let p = ProcessHandle::new(fam, ProcessVariant::MarkovQuantile).with_refinement(Refinement::with_tol(1e-4));
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let a = p.simulate(&grid, 200, 7).unwrap();
        let b = p.simulate(&grid, 200, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.is_nondecreasing());
    }

    #[test]
    fn poisson_rates() {
        let fam = MarginalFamily::Parametric(Builtin::Poisson { rate: 1.0, max_atoms: 40 });
        let r = jump_rates(&fam, 0.5, 2, 1e-2, &Refinement::default()).unwrap();
        assert!((r.analytic.0 - 1.0).abs() < 1e-9 && r.analytic.1 == 0.0);
        assert!((r.empirical_raw.0 - 1.0).abs() < 5e-2);
        assert!(r.empirical_raw.1.abs() < 1e-9);
    }
}
