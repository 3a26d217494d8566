//! Energy of curves of measures in Wasserstein space, action of sampled
//! path ensembles, and displacement-interpolation ensembles.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::levels::MarginalFamily;
use crate::mq::{PathEnsemble, ProcessHandle, ProcessVariant};

/// Finite increasing list of times `r_0 < ... < r_{m+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    points: Vec<f64>,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("a partition needs at least two points".into()));
        }
        if let Some(k) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotone { index: k + 1 });
        }
        Ok(Self { points })
    }

    /// `m` equal intervals of `[a,b]`.
    pub fn uniform(a: f64, b: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("need at least one interval".into()));
        }
        Self::new((0..=m).map(|i| if i == m { b } else { a + (b - a) * i as f64 / m as f64 }).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn mesh(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Adds every midpoint.
    pub fn doubled(&self) -> Self {
        let mut pts = Vec::with_capacity(2 * self.points.len() - 1);
        for w in self.points.windows(2) {
            pts.push(w[0]);
            pts.push(0.5 * (w[0] + w[1]));
        }
        pts.push(*self.points.last().unwrap());
        Self { points: pts }
    }

    /// Keeps every other point, and always the last one.
    pub fn coarsened(&self) -> Self {
        let mut pts: Vec<f64> = self.points.iter().step_by(2).copied().collect();
        let last = *self.points.last().unwrap();
        if *pts.last().unwrap() != last {
            pts.push(last);
        }
        Self { points: pts }
    }

    pub fn contains_all(&self, other: &Partition) -> bool {
        other.points.iter().all(|p| self.points.iter().any(|q| q == p))
    }
}

/// Energy of a family at one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub partition: Vec<f64>,
    /// `W₂(μ_{r_k}, μ_{r_{k+1}})² / (r_{k+1} - r_k)`.
    pub terms: Vec<f64>,
    pub total: f64,
}

/// `Σ_k W₂(μ_{r_k}, μ_{r_{k+1}})² / (r_{k+1} - r_k)`.
pub fn energy(family: &MarginalFamily, r: &Partition) -> Result<EnergyReport> {
    let marginals = r.points.par_iter().map(|&t| family.marginal(t)).collect::<Result<Vec<_>>>()?;
    let terms: Vec<f64> = marginals
        .par_windows(2)
        .zip(r.points.par_windows(2))
        .map(|(m, t)| m[0].w2_squared(&m[1]) / (t[1] - t[0]))
        .collect();
    let total = terms.iter().sum();
    Ok(EnergyReport { partition: r.points.clone(), terms, total })
}

/// Limit of the energies along dyadic refinements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyValue {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLimit {
    pub value: EnergyValue,
    /// `(number of intervals, energy)` for every partition visited.
    pub history: Vec<(usize, f64)>,
}

/// Settings of [`energy_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRefinement {
    pub tol: f64,
    /// Energies above this are reported as infinite.
    pub ceiling: f64,
    /// Largest number of doublings of the single-interval partition.
    pub max_depth: u32,
}

impl Default for EnergyRefinement {
    fn default() -> Self {
        Self { tol: crate::tol::REFINE, ceiling: 1e6, max_depth: 24 }
    }
}

/// Energy of the curve on `[a,b]`, from uniform partitions with `2^n`
/// intervals. The energies do not decrease along the refinement; the loop
/// stops when two successive values differ by less than `tol`.
pub fn energy_limit(family: &MarginalFamily, a: f64, b: f64, settings: &EnergyRefinement) -> Result<EnergyLimit> {
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    for n in 0..=settings.max_depth {
        let e = energy(family, &Partition::uniform(a, b, 1 << n)?)?.total;
        history.push((1usize << n, e));
        if e > settings.ceiling {
            return Ok(EnergyLimit { value: EnergyValue::Infinite, history });
        }
        if let Some(p) = prev {
            if (e - p).abs() < settings.tol {
                return Ok(EnergyLimit { value: EnergyValue::Finite(e), history });
            }
        }
        prev = Some(e);
    }
    Err(Error::NoConvergence {
        depth: settings.max_depth,
        last_gap: history.windows(2).last().map_or(f64::NAN, |w| (w[1].1 - w[0].1).abs()),
    })
}

/// `Σ (Δx)² / Δt` along one path.
pub fn path_energy(times: &[f64], path: &[f64]) -> f64 {
    times.windows(2).zip(path.windows(2)).map(|(t, x)| (x[1] - x[0]).powi(2) / (t[1] - t[0])).sum()
}

/// Action of an ensemble on its own grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionReport {
    pub action: f64,
    /// Standard error of the mean over paths.
    pub std_error: f64,
    /// Action on the grid minus action on the grid with every other time
    /// dropped; estimates the distance to the continuum value.
    pub grid_bias: f64,
}

fn sub_times(times: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..times.len()).step_by(2).collect();
    if *idx.last().unwrap() != times.len() - 1 {
        idx.push(times.len() - 1);
    }
    idx
}

pub fn action(e: &PathEnsemble) -> Result<ActionReport> {
    if e.times.len() < 2 || e.paths.is_empty() {
        return Err(Error::Invalid("the action needs two times and one path".into()));
    }
    let energies: Vec<f64> = e.paths.par_iter().map(|p| path_energy(&e.times, p)).collect();
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = if energies.len() > 1 {
        energies.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let grid_bias = if e.times.len() >= 3 {
        let idx = sub_times(&e.times);
        let ts: Vec<f64> = idx.iter().map(|&i| e.times[i]).collect();
        let coarse: f64 = e
            .paths
            .par_iter()
            .map(|p| {
                let xs: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
                path_energy(&ts, &xs)
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
            / n;
        mean - coarse
    } else {
        0.0
    };
    Ok(ActionReport { action: mean, std_error: (var / n).sqrt(), grid_bias })
}

/// Paths made of optimal couplings between consecutive points of `r`,
/// Markov at those points and affine in between, read on `times`.
pub fn disp_ensemble(family: &MarginalFamily, r: &Partition, times: &[f64], n: usize, seed: u64) -> Result<PathEnsemble> {
    let (lo, hi) = (r.points[0], *r.points.last().unwrap());
    if times.iter().any(|&t| t < lo || t > hi) {
        return Err(Error::Invalid("output times must lie inside the partition".into()));
    }
    let process = ProcessHandle::new(family.clone(), ProcessVariant::MadeMarkovAt(r.points.clone()));
    let knots = process.simulate(&r.points, n, seed)?;
    let paths = knots
        .paths
        .par_iter()
        .map(|p| {
            times
                .iter()
                .map(|&t| {
                    let k = r.points.partition_point(|&x| x <= t).clamp(1, r.points.len() - 1);
                    let (t0, t1) = (r.points[k - 1], r.points[k]);
                    let s = (t - t0) / (t1 - t0);
                    (1.0 - s) * p[k - 1] + s * p[k]
                })
                .collect()
        })
        .collect();
    Ok(PathEnsemble { times: times.to_vec(), paths, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::{Builtin, TimeFunction};

    #[test]
    fn translation_energy_is_one() {
        let fam = MarginalFamily::Parametric(Builtin::UniformShift);
        let e = energy(&fam, &Partition::new(vec![0.0, 0.3, 1.0]).unwrap()).unwrap();
        assert!((e.total - 1.0).abs() < 1e-12);
        let l = energy_limit(&fam, 0.0, 1.0, &EnergyRefinement::default()).unwrap();
        assert_eq!(l.value, EnergyValue::Finite(e.total));
    }

    #[test]
    fn two_atom_path_has_infinite_energy() {
        let a = TimeFunction::PiecewiseLinear(vec![(0.0, 1.0), (1.0, 0.0)]);
        let fam = MarginalFamily::Parametric(Builtin::TwoAtom { a });
        let e = energy(&fam, &Partition::uniform(0.0, 1.0, 8).unwrap()).unwrap();
        assert!((e.total - 8.0).abs() < 1e-9);
        let l = energy_limit(&fam, 0.0, 1.0, &EnergyRefinement::default()).unwrap();
        assert_eq!(l.value, EnergyValue::Infinite);
    }

    #[test]
    fn parabola_energy() {
        let g = TimeFunction::Polynomial(vec![0.0, 0.0, 1.0]);
        let fam = MarginalFamily::Parametric(Builtin::DiracPath { g });
        let l = energy_limit(&fam, 0.0, 1.0, &EnergyRefinement::default()).unwrap();
        match l.value {
            EnergyValue::Finite(v) => assert!((v - 4.0 / 3.0).abs() < 1e-5),
            EnergyValue::Infinite => panic!("finite energy expected"),
        }
        assert!(l.history.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12));
    }

    #[test]
    fn path_action() {
        let times = vec![0.0, 0.25, 0.5, 1.0];
        assert!((path_energy(&times, &times) - 1.0).abs() < 1e-15);
        let e = PathEnsemble { times: times.clone(), paths: vec![vec![2.0; 4]; 3], seed: 0 };
        assert_eq!(action(&e).unwrap().action, 0.0);
    }

    #[test]
    fn disp_of_translation_is_a_shift() {
        let fam = MarginalFamily::Parametric(Builtin::UniformShift);
        let r = Partition::new(vec![0.0, 1.0]).unwrap();
        let e = disp_ensemble(&fam, &r, &[0.0, 0.5, 1.0], 50, 3).unwrap();
        for p in &e.paths {
            assert!((p[1] - p[0] - 0.5).abs() < 1e-12 && (p[2] - p[0] - 1.0).abs() < 1e-12);
        }
    }
}
