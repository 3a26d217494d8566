//! Brute-force validator: level kernels as row-stochastic matrices on `N`
//! equal bins of `(0,1)`.
//!
//! When every breakpoint sits on the bin grid, a kernel maps the uniform law
//! of a bin to a law that is uniform inside each bin, so the matrix is an
//! exact representation and composition becomes matrix multiplication.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{LevelCoupling, LevelKernel};
use crate::levels::AtomicLevelSet;
use crate::tol;

#[derive(Debug, Clone, PartialEq)]
pub struct BinKernel {
    n: usize,
    m: Vec<f64>,
}

fn bin_index(x: f64, n: usize) -> Result<usize> {
    let y = x * n as f64;
    let k = y.round();
    if (y - k).abs() > tol::REPR * n as f64 {
        return Err(Error::GridMisaligned(x));
    }
    Ok(k as usize)
}

impl BinKernel {
    pub fn identity(n: usize) -> Self {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        Self { n, m }
    }

    pub fn from_matrix(n: usize, m: Vec<f64>) -> Result<Self> {
        if m.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, got: m.len() });
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.m
    }

    /// Averaging on each interval of `a`, identity elsewhere.
    pub fn ell(a: &AtomicLevelSet, n: usize) -> Result<Self> {
        let mut k = Self::identity(n);
        for &(lo, hi) in a.intervals() {
            let (i0, i1) = (bin_index(lo, n)?, bin_index(hi, n)?);
            let w = 1.0 / (i1 - i0) as f64;
            for i in i0..i1 {
                for j in 0..n {
                    k.m[i * n + j] = if (i0..i1).contains(&j) { w } else { 0.0 };
                }
            }
        }
        Ok(k)
    }

    /// Matrix of a mixture-form kernel whose breakpoints lie on the grid.
    pub fn of_kernel(k: &LevelKernel, n: usize) -> Result<Self> {
        for &b in &k.all_breaks() {
            bin_index(b, n)?;
        }
        let h = 1.0 / n as f64;
        // Mass of every target in every bin.
        let masses: Vec<Vec<f64>> = k
            .targets()
            .iter()
            .map(|t| (0..n).map(|j| t.integral(j as f64 * h, (j + 1) as f64 * h)).collect())
            .collect();
        let mut m = vec![0.0; n * n];
        m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let c = k.cell_of((i as f64 + 0.5) * h);
            row[i] += k.identity_weights()[c];
            for (j, &w) in k.row_coefficients(c).iter().enumerate() {
                if w > 0.0 {
                    for (r, &p) in row.iter_mut().zip(&masses[j]) {
                        *r += w * p;
                    }
                }
            }
        });
        Ok(Self { n, m })
    }

    /// "First `self`, then `other`".
    pub fn compose(&self, other: &BinKernel) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::LengthMismatch { expected: self.n, got: other.n });
        }
        let n = self.n;
        let mut m = vec![0.0; n * n];
        m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for k in 0..n {
                let a = self.m[i * n + k];
                if a != 0.0 {
                    for (r, &b) in row.iter_mut().zip(&other.m[k * n..(k + 1) * n]) {
                        *r += a * b;
                    }
                }
            }
        });
        Ok(Self { n, m })
    }

    /// `self` followed by the averaging kernel of `a`, in `O(N²)`.
    pub fn then_ell(&self, a: &AtomicLevelSet) -> Result<Self> {
        let n = self.n;
        let blocks = a
            .intervals()
            .iter()
            .map(|&(lo, hi)| Ok((bin_index(lo, n)?, bin_index(hi, n)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut m = self.m.clone();
        m.par_chunks_mut(n).for_each(|row| {
            for &(i0, i1) in &blocks {
                let mean = row[i0..i1].iter().sum::<f64>() / (i1 - i0) as f64;
                row[i0..i1].iter_mut().for_each(|x| *x = mean);
            }
        });
        Ok(Self { n, m })
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[j * n + i] = self.m[i * n + j];
            }
        }
        Self { n, m }
    }

    /// Largest deviation of the column sums from 1.
    pub fn stationarity_defect(&self) -> f64 {
        let n = self.n;
        (0..n).map(|j| ((0..n).map(|i| self.m[i * n + j]).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `L([0, i/N] × [0, j/N])` for all corners, `(N+1)²` values row-major.
    pub fn corner_cdf(&self) -> Vec<f64> {
        let n = self.n;
        let h = 1.0 / n as f64;
        let mut f = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            let mut run = 0.0;
            for j in 0..n {
                run += self.m[i * n + j] * h;
                f[(i + 1) * (n + 1) + j + 1] = f[i * (n + 1) + j + 1] + run;
            }
        }
        f
    }

    /// Lower-orthant mass of the chain started from `λ` and moved by
    /// `steps`, at level thresholds on the grid.
    pub fn fd_cdf(steps: &[BinKernel], levels: &[f64]) -> Result<f64> {
        if levels.len() != steps.len() + 1 {
            return Err(Error::LengthMismatch { expected: steps.len() + 1, got: levels.len() });
        }
        let n = steps.first().map_or(1, |s| s.n);
        let mut v = vec![1.0 / n as f64; n];
        let cut = |v: &mut Vec<f64>, u: f64| -> Result<()> {
            let k = bin_index(u.clamp(0.0, 1.0), n)?;
            v[k..].iter_mut().for_each(|x| *x = 0.0);
            Ok(())
        };
        cut(&mut v, levels[0])?;
        for (s, &u) in steps.iter().zip(&levels[1..]) {
            let mut w = vec![0.0; n];
            for (i, &vi) in v.iter().enumerate() {
                if vi != 0.0 {
                    for (wj, &mij) in w.iter_mut().zip(&s.m[i * n..(i + 1) * n]) {
                        *wj += vi * mij;
                    }
                }
            }
            v = w;
            cut(&mut v, u)?;
        }
        Ok(v.iter().sum())
    }

    /// CSV dump, one row of the matrix per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.m.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Largest absolute difference between the CDF of `exact` and that of the
/// matrix on every corner `(i/N, j/N)`.
pub fn oracle_compare(exact: &LevelCoupling, approx: &BinKernel) -> Result<f64> {
    let n = approx.n;
    for &b in &exact.kernel().all_breaks() {
        bin_index(b, n)?;
    }
    let pts: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let e = exact.cdf_table(&pts);
    let o = approx.corner_cdf();
    Ok(e.par_iter().zip(o.par_iter()).map(|(a, b)| (a - b).abs()).reduce(|| 0.0, f64::max))
}

/// `ℓ_{r_1} ⋯ ℓ_{r_m}` on `N` bins.
pub fn oracle_l(sets: &[AtomicLevelSet], n: usize) -> Result<BinKernel> {
    sets.iter().try_fold(BinKernel::identity(n), |acc, a| acc.then_ell(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::ell_of;

    #[test]
    fn ell_matrices() {
        let a = AtomicLevelSet::new(vec![(0.0, 0.5)]).unwrap();
        let k = BinKernel::ell(&a, 4).unwrap();
        assert_eq!(&k.matrix()[0..4], &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(&k.matrix()[8..12], &[0.0, 0.0, 1.0, 0.0]);
        let full = BinKernel::ell(&AtomicLevelSet::new(vec![(0.0, 1.0)]).unwrap(), 2).unwrap();
        assert!(full.matrix().iter().all(|&x| x == 0.5));
        assert_eq!(BinKernel::of_kernel(&LevelKernel::identity(), 8).unwrap(), BinKernel::identity(8));
    }

    #[test]
    fn exact_matches_own_matrix() {
        let a = AtomicLevelSet::new(vec![(0.25, 0.75)]).unwrap();
        let l = LevelCoupling::new(ell_of(&a));
        assert!(oracle_compare(&l, &BinKernel::ell(&a, 16).unwrap()).unwrap() < 1e-12);
        let full = BinKernel::ell(&AtomicLevelSet::new(vec![(0.0, 1.0)]).unwrap(), 2).unwrap();
        assert!(oracle_compare(&LevelCoupling::product(), &full).unwrap() < 1e-15);
    }

    #[test]
    fn misaligned_breakpoints_are_rejected() {
        let a = AtomicLevelSet::new(vec![(1.0 / 3.0, 0.5)]).unwrap();
        assert!(matches!(BinKernel::ell(&a, 8), Err(Error::GridMisaligned(_))));
    }

    #[test]
    fn averaging_example() {
        // 2·1_(0,½) through averaging on (⅓,⅚): densities 2, ⅔, 0.
        let a = AtomicLevelSet::new(vec![(1.0 / 3.0, 5.0 / 6.0)]).unwrap();
        let k = BinKernel::ell(&a, 6).unwrap();
        let theta = [2.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 0.0, 0.0, 0.0];
        let out: Vec<f64> = (0..6).map(|j| (0..6).map(|i| theta[i] * k.entry(i, j)).sum::<f64>() * 6.0).collect();
        let expect = [2.0, 2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 0.0];
        assert!(out.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
