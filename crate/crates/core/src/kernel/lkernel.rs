use std::collections::HashMap;

use super::density::LevelDensity;
use crate::error::{Error, Result};
use crate::grid;
use crate::tol;

/// Maximum number of distinct target measures a kernel may carry.
pub const TARGET_CAP: usize = 4096;

/// Kernel on `(0,1)` in mixture form.
///
/// On source cell `i = (grid[i], grid[i+1]]` the row is
/// `ident[i] δ_x + Σ_j coef[i][j] η_j`, where every target `η_j` is a
/// probability density that is piecewise constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelKernel {
    grid: Vec<f64>,
    ident: Vec<f64>,
    targets: Vec<LevelDensity>,
    coef: Vec<f64>,
}

impl LevelKernel {
    pub fn identity() -> Self {
        Self { grid: vec![0.0, 1.0], ident: vec![1.0], targets: Vec::new(), coef: Vec::new() }
    }

    /// Every row equals the (normalized) density `eta`.
    pub fn constant(eta: &LevelDensity) -> Result<Self> {
        Ok(Self { grid: vec![0.0, 1.0], ident: vec![0.0], targets: vec![eta.normalize()?], coef: vec![1.0] })
    }

    /// Every row equals Lebesgue measure.
    pub fn full_averaging() -> Self {
        Self::constant(&LevelDensity::lebesgue()).unwrap()
    }

    /// Uniform averaging on each of the given disjoint open intervals and
    /// the identity elsewhere.
    pub fn averaging(intervals: &[(f64, f64)]) -> Self {
        let mut iv: Vec<(f64, f64)> = intervals.iter().copied().filter(|(a, b)| b - a > tol::REPR).collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        if iv.is_empty() {
            return Self::identity();
        }
        let mut pts = vec![0.0];
        for &(a, b) in &iv {
            pts.push(a);
            pts.push(b);
        }
        pts.push(1.0);
        let pts = grid::merge(&[&pts]);
        let cells = pts.len() - 1;
        let mut ident = vec![1.0; cells];
        let mut coef = vec![0.0; cells * iv.len()];
        let targets: Vec<LevelDensity> = iv.iter().map(|&(a, b)| LevelDensity::uniform_on(a, b)).collect();
        for c in 0..cells {
            let m = 0.5 * (pts[c] + pts[c + 1]);
            if let Some(j) = iv.iter().position(|&(a, b)| a < m && m < b) {
                ident[c] = 0.0;
                coef[c * iv.len() + j] = 1.0;
            }
        }
        Self::from_raw(pts, ident, targets, coef)
    }

    /// Builds a kernel from explicit rows; each row must sum to one and each
    /// target must be a probability density.
    pub fn from_rows(grid: Vec<f64>, ident: Vec<f64>, targets: Vec<LevelDensity>, coef: Vec<f64>) -> Result<Self> {
        let cells = grid.len().saturating_sub(1);
        if cells == 0 || ident.len() != cells || coef.len() != cells * targets.len() {
            return Err(Error::LengthMismatch { expected: cells, got: ident.len() });
        }
        if grid[0] != 0.0 || grid[cells] != 1.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("kernel grid must increase from 0 to 1".into()));
        }
        for t in &targets {
            let m = t.mass();
            if (m - 1.0).abs() > tol::REPR {
                return Err(Error::BadMass { total: m });
            }
        }
        let j = targets.len();
        for c in 0..cells {
            let row = &coef[c * j..(c + 1) * j];
            if ident[c] < 0.0 || row.iter().any(|&x| x < 0.0) {
                return Err(Error::Invalid(format!("negative weight in row {c}")));
            }
            let total = ident[c] + row.iter().sum::<f64>();
            if (total - 1.0).abs() > tol::REPR {
                return Err(Error::BadMass { total });
            }
        }
        Ok(Self::from_raw(grid, ident, targets, coef))
    }

    pub(crate) fn from_raw(grid: Vec<f64>, ident: Vec<f64>, targets: Vec<LevelDensity>, coef: Vec<f64>) -> Self {
        let mut k = Self { grid, ident, targets, coef };
        k.canonicalize();
        k
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn identity_weights(&self) -> &[f64] {
        &self.ident
    }

    pub fn targets(&self) -> &[LevelDensity] {
        &self.targets
    }

    pub fn n_cells(&self) -> usize {
        self.ident.len()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    /// Coefficients of the targets on source cell `c`.
    pub fn row_coefficients(&self, c: usize) -> &[f64] {
        let j = self.targets.len();
        &self.coef[c * j..(c + 1) * j]
    }

    pub fn cell_of(&self, x: f64) -> usize {
        grid::cell_of(&self.grid, x)
    }

    /// `k(x, [0, v])`.
    pub fn row_cdf(&self, x: f64, v: f64) -> f64 {
        let c = self.cell_of(x);
        let mut acc = if x <= v { self.ident[c] } else { 0.0 };
        for (w, t) in self.row_coefficients(c).iter().zip(&self.targets) {
            if *w > 0.0 {
                acc += w * t.cdf(v);
            }
        }
        acc
    }

    /// Every breakpoint used by the grid or a target.
    pub fn all_breaks(&self) -> Vec<f64> {
        let mut parts: Vec<&[f64]> = vec![&self.grid];
        parts.extend(self.targets.iter().map(|t| t.breaks()));
        grid::merge(&parts)
    }

    /// Same shape, with weights and target densities equal within `eps`.
    pub fn approx_eq(&self, other: &LevelKernel, eps: f64) -> bool {
        let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= eps);
        self.grid == other.grid
            && close(&self.ident, &other.ident)
            && close(&self.coef, &other.coef)
            && self.targets.len() == other.targets.len()
            && self.targets.iter().zip(&other.targets).all(|(a, b)| a.approx_eq(b, eps))
    }

    fn canonicalize(&mut self) {
        let j = self.targets.len();
        for w in self.coef.iter_mut().chain(self.ident.iter_mut()) {
            if *w < 0.0 || *w < 1e-300 {
                *w = 0.0;
            }
        }
        // Merge equal targets and drop unused ones.
        let mut map: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut remap = vec![usize::MAX; j];
        let mut kept: Vec<LevelDensity> = Vec::new();
        let mut used = vec![false; j];
        for (i, w) in self.coef.iter().enumerate() {
            if *w > 0.0 {
                used[i % j] = true;
            }
        }
        for (idx, t) in self.targets.iter().enumerate() {
            if !used[idx] {
                continue;
            }
            let key = fingerprint(t);
            let slot = *map.entry(key).or_insert_with(|| {
                kept.push(t.clone());
                kept.len() - 1
            });
            remap[idx] = slot;
        }
        let nj = kept.len();
        let cells = self.ident.len();
        let mut coef = vec![0.0; cells * nj];
        for c in 0..cells {
            for idx in 0..j {
                let w = self.coef[c * j + idx];
                if w > 0.0 {
                    coef[c * nj + remap[idx]] += w;
                }
            }
        }
        // Merge adjacent identical rows.
        let mut g = vec![self.grid[0]];
        let mut ident: Vec<f64> = Vec::with_capacity(cells);
        let mut rows: Vec<f64> = Vec::with_capacity(coef.len());
        for c in 0..cells {
            let row = &coef[c * nj..(c + 1) * nj];
            let same = !ident.is_empty() && {
                let last = ident.len() - 1;
                (ident[last] - self.ident[c]).abs() <= ROW_EQ
                    && rows[last * nj..].iter().zip(row).all(|(a, b)| (a - b).abs() <= ROW_EQ)
            };
            if same {
                *g.last_mut().unwrap() = self.grid[c + 1];
            } else {
                ident.push(self.ident[c]);
                rows.extend_from_slice(row);
                g.push(self.grid[c + 1]);
            }
        }
        self.grid = g;
        self.ident = ident;
        self.coef = rows;
        self.targets = kept;
    }

    /// Kernel of "first `self`, then `next`".
    pub fn compose(&self, next: &LevelKernel) -> Result<LevelKernel> {
        let j1 = self.targets.len();
        let j2 = next.targets.len();
        let next_rows: Vec<Vec<(usize, f64)>> = (0..next.n_cells())
            .map(|c| {
                next.row_coefficients(c).iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, w)| (i, *w)).collect()
            })
            .collect();
        // For each target of `self`: mass kept by the identity part of `next`
        // and its transfer to the targets of `next`.
        let mut kept_mass = vec![0.0; j1];
        let mut transfer: Vec<Vec<(usize, f64)>> = vec![Vec::new(); j1];
        let mut new_targets: Vec<LevelDensity> = Vec::with_capacity(j1 + j2);
        let mut tau_index = vec![usize::MAX; j1];
        for (j, eta) in self.targets.iter().enumerate() {
            let mut p = vec![0.0; j2];
            let mut m = 0.0;
            let eb = eta.breaks();
            let ed = eta.densities();
            for (e, &d) in ed.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let (lo, hi) = (eb[e], eb[e + 1]);
                let mut c = next.grid.partition_point(|&g| g <= lo).saturating_sub(1);
                while c < next.n_cells() && next.grid[c] < hi {
                    let w = d * grid::overlap(lo, hi, next.grid[c], next.grid[c + 1]);
                    if w > 0.0 {
                        m += w * next.ident[c];
                        for &(i, cw) in &next_rows[c] {
                            p[i] += w * cw;
                        }
                    }
                    c += 1;
                }
            }
            kept_mass[j] = m;
            transfer[j] = p.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, w)| (i, *w)).collect();
            if m > tol::REPR * 1e-3 {
                tau_index[j] = new_targets.len();
                new_targets.push(eta.multiply(&next.grid, &next.ident).scale(1.0 / m));
            }
        }
        let offset = new_targets.len();
        new_targets.extend(next.targets.iter().cloned());
        let nj = new_targets.len();
        // The breakpoints of `next` only matter where `self` keeps an identity
        // part; elsewhere they would merely be snapped against ours.
        let mut g: Vec<f64> = self.grid.clone();
        for &p in &next.grid {
            let c = self.cell_of(p);
            if self.ident[c] > 0.0 && p - self.grid[c] > tol::REPR && self.grid[c + 1] - p > tol::REPR {
                g.push(p);
            }
        }
        g.sort_by(f64::total_cmp);
        let g = grid::snap_sorted(g);
        let cells = g.len() - 1;
        let mut ident = vec![0.0; cells];
        let mut coef = vec![0.0; cells * nj];
        // Rows of `self` contribute the same transfer on every merged cell of
        // a source cell; cache it per source cell.
        let mut cache: Option<(usize, Vec<f64>)> = None;
        for c in 0..cells {
            let x = 0.5 * (g[c] + g[c + 1]);
            let c1 = self.cell_of(x);
            let c2 = next.cell_of(x);
            let a = self.ident[c1];
            let a2 = next.ident[c2];
            ident[c] = a * a2;
            let row = &mut coef[c * nj..(c + 1) * nj];
            if cache.as_ref().map(|(k, _)| *k) != Some(c1) {
                let mut base = vec![0.0; nj];
                for (j, &w) in self.row_coefficients(c1).iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    if tau_index[j] != usize::MAX {
                        base[tau_index[j]] += w * kept_mass[j];
                    }
                    for &(i, p) in &transfer[j] {
                        base[offset + i] += w * p;
                    }
                }
                cache = Some((c1, base));
            }
            row.copy_from_slice(&cache.as_ref().unwrap().1);
            if a > 0.0 {
                for &(i, w) in &next_rows[c2] {
                    row[offset + i] += a * w;
                }
            }
        }
        let k = Self::from_raw(g, ident, new_targets, coef);
        if k.targets.len() > TARGET_CAP {
            return Err(Error::Capacity { needed: k.targets.len(), cap: TARGET_CAP });
        }
        Ok(k)
    }

    /// Image of a density on levels: `(θ.k)(A) = ∫ k(y, A) θ(dy)`.
    pub fn apply(&self, theta: &LevelDensity) -> LevelDensity {
        let mut parts: Vec<(f64, &LevelDensity)> = Vec::with_capacity(self.targets.len());
        let weights = self.target_weights(theta);
        for (w, t) in weights.iter().zip(&self.targets) {
            if *w > 0.0 {
                parts.push((*w, t));
            }
        }
        let stay = theta.multiply(&self.grid, &self.ident);
        sum_densities(&stay, &parts)
    }

    /// `∫ θ c_j` for every target `j`.
    fn target_weights(&self, theta: &LevelDensity) -> Vec<f64> {
        let nj = self.targets.len();
        let mut w = vec![0.0; nj];
        if nj == 0 {
            return w;
        }
        let tb = theta.breaks();
        let td = theta.densities();
        let mut c = 0;
        for (e, &d) in td.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let (lo, hi) = (tb[e], tb[e + 1]);
            while c + 1 < self.n_cells() && self.grid[c + 1] <= lo {
                c += 1;
            }
            let mut k = c;
            while k < self.n_cells() && self.grid[k] < hi {
                let m = d * grid::overlap(lo, hi, self.grid[k], self.grid[k + 1]);
                if m > 0.0 {
                    for (acc, cw) in w.iter_mut().zip(self.row_coefficients(k)) {
                        *acc += m * cw;
                    }
                }
                k += 1;
            }
        }
        w
    }

    /// `λ.k`.
    pub fn second_marginal(&self) -> LevelDensity {
        self.apply(&LevelDensity::lebesgue())
    }

    /// Sup distance between the cumulative functions of `λ.k` and `λ`.
    pub fn stationarity_defect(&self) -> f64 {
        self.second_marginal().cdf_distance(&LevelDensity::lebesgue())
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        self.stationarity_defect() <= tol::CMP
    }

    /// Kernel of the reversed joint law `Joint(λ, k)` with respect to `λ`.
    pub fn transpose(&self) -> Result<LevelKernel> {
        let deviation = self.stationarity_defect();
        if deviation > tol::CMP {
            return Err(Error::NotDoublyStochastic { deviation });
        }
        let nj = self.targets.len();
        let mut masses = vec![0.0; nj];
        let mut new_targets: Vec<LevelDensity> = Vec::new();
        let mut index = vec![usize::MAX; nj];
        for j in 0..nj {
            let vals: Vec<f64> = (0..self.n_cells()).map(|c| self.coef[c * nj + j]).collect();
            let m: f64 = vals.iter().zip(self.grid.windows(2)).map(|(v, w)| v * (w[1] - w[0])).sum();
            masses[j] = m;
            if m > 0.0 {
                index[j] = new_targets.len();
                new_targets.push(LevelDensity::from_parts(self.grid.clone(), vals).scale(1.0 / m));
            }
        }
        let g = self.all_breaks();
        let cells = g.len() - 1;
        let tj = new_targets.len();
        let mut ident = vec![0.0; cells];
        let mut coef = vec![0.0; cells * tj];
        for c in 0..cells {
            let x = 0.5 * (g[c] + g[c + 1]);
            let a = self.ident[self.cell_of(x)];
            let row = &mut coef[c * tj..(c + 1) * tj];
            let mut total = a;
            for j in 0..nj {
                if index[j] != usize::MAX {
                    let w = masses[j] * self.targets[j].density_at(x);
                    row[index[j]] = w;
                    total += w;
                }
            }
            // Remove the rounding left over by the stationarity defect.
            if total > 0.0 {
                for w in row.iter_mut() {
                    *w /= total;
                }
            }
            ident[c] = if total > 0.0 { a / total } else { 1.0 };
        }
        Ok(Self::from_raw(g, ident, new_targets, coef))
    }

    /// `x ↦ k(x, ·)` is non-decreasing for the stochastic order.
    pub fn is_increasing(&self) -> bool {
        let cells = self.n_cells();
        if cells < 2 {
            return true;
        }
        let v = self.all_breaks();
        let cdfs: Vec<Vec<f64>> = self.targets.iter().map(|t| v.iter().map(|&u| t.cdf(u)).collect()).collect();
        let h = |c: usize| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for (w, cdf) in self.row_coefficients(c).iter().zip(&cdfs) {
                if *w != 0.0 {
                    out.iter_mut().zip(cdf).for_each(|(o, f)| *o += w * f);
                }
            }
            out
        };
        let eps = tol::CMP;
        let mut h0 = h(0);
        for c in 0..cells - 1 {
            let g = self.grid[c + 1];
            let h1 = h(c + 1);
            for (k, &vk) in v.iter().enumerate() {
                if vk <= g + tol::REPR && h0[k] < h1[k] - eps {
                    return false;
                }
                if vk >= g - tol::REPR && self.ident[c] + h0[k] < self.ident[c + 1] + h1[k] - eps {
                    return false;
                }
            }
            h0 = h1;
        }
        true
    }

    /// Maps every bounded non-increasing density to a non-increasing one.
    ///
    /// The cone of such densities is generated by the `λ|[0,x]`, so it is
    /// enough to push those forward; the image density is affine in `x`
    /// between breakpoints and is checked at both ends of every cell.
    pub fn preserves_decreasing(&self) -> bool {
        let g = self.all_breaks();
        let cells = g.len() - 1;
        let nj = self.targets.len();
        let a: Vec<f64> = (0..cells).map(|c| self.ident[self.cell_of(0.5 * (g[c] + g[c + 1]))]).collect();
        let dens: Vec<Vec<f64>> =
            self.targets.iter().map(|t| (0..cells).map(|c| t.density_at(0.5 * (g[c] + g[c + 1]))).collect()).collect();
        let mut cum = vec![0.0; nj];
        let ok = |vals: &[f64]| vals.windows(2).all(|w| w[1] <= w[0] + tol::CMP * (1.0 + w[0].abs()));
        for k in 0..=cells {
            if k > 0 {
                let c = k - 1;
                let src = self.cell_of(0.5 * (g[c] + g[c + 1]));
                for (acc, w) in cum.iter_mut().zip(self.row_coefficients(src)) {
                    *acc += w * (g[c + 1] - g[c]);
                }
            }
            let t: Vec<f64> = (0..cells).map(|c| (0..nj).map(|j| cum[j] * dens[j][c]).sum()).collect();
            // x just above g[k] and just below g[k]: the straddled cell splits.
            for straddle in [k, k.wrapping_sub(1)] {
                if straddle >= cells {
                    continue;
                }
                let mut vals = Vec::with_capacity(cells + 1);
                for c in 0..cells {
                    if c < straddle {
                        vals.push(a[c] + t[c]);
                    } else if c == straddle {
                        vals.push(a[c] + t[c]);
                        vals.push(t[c]);
                    } else {
                        vals.push(t[c]);
                    }
                }
                if !ok(&vals) {
                    return false;
                }
            }
        }
        true
    }

    /// Draws from the row at `x` using two independent uniforms.
    pub fn sample_row(&self, x: f64, w1: f64, w2: f64) -> f64 {
        let c = self.cell_of(x);
        let a = self.ident[c];
        if w1 < a {
            return x;
        }
        let row = self.row_coefficients(c);
        let mut acc = a;
        let mut last = None;
        for (j, &cw) in row.iter().enumerate() {
            if cw > 0.0 {
                last = Some(j);
                acc += cw;
                if w1 < acc {
                    return self.targets[j].sample(w2);
                }
            }
        }
        match last {
            Some(j) => self.targets[j].sample(w2),
            None => x,
        }
    }
}

/// Rows closer than this are merged. It sits well below the representation
/// tolerance: long chains of compositions would otherwise drift.
const ROW_EQ: f64 = 1e-14;

fn fingerprint(t: &LevelDensity) -> Vec<u64> {
    // Round away the last 8 mantissa bits so that densities equal up to
    // rounding noise collide.
    const MASK: u64 = !((1u64 << 8) - 1);
    t.breaks().iter().chain(t.densities()).map(|x| (x + 0.0).to_bits() & MASK).collect()
}

/// `base + Σ w_i η_i` on the union of all breakpoints.
pub(crate) fn sum_densities(base: &LevelDensity, parts: &[(f64, &LevelDensity)]) -> LevelDensity {
    let mut all: Vec<&[f64]> = vec![base.breaks()];
    all.extend(parts.iter().map(|p| p.1.breaks()));
    let pts = grid::merge(&all);
    let n = pts.len() - 1;
    let mut acc = vec![0.0; n];
    let mut add = |d: &LevelDensity, w: f64| {
        let b = d.breaks();
        let v = d.densities();
        let mut k = 0;
        for c in 0..n {
            let m = 0.5 * (pts[c] + pts[c + 1]);
            while k + 1 < v.len() && b[k + 1] < m {
                k += 1;
            }
            acc[c] += w * v[k];
        }
    };
    add(base, 1.0);
    for &(w, d) in parts {
        add(d, w);
    }
    LevelDensity::from_parts(pts, acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap() -> LevelKernel {
        LevelKernel::from_rows(
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.0],
            vec![LevelDensity::uniform_on(0.5, 1.0), LevelDensity::uniform_on(0.0, 0.5)],
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn apply_examples() {
        let theta = LevelDensity::indicator(0.0, 0.5, 2.0);
        let out = LevelKernel::full_averaging().apply(&theta);
        assert!(out.approx_eq(&LevelDensity::lebesgue(), 1e-12));
        let l = LevelKernel::averaging(&[(1.0 / 3.0, 5.0 / 6.0)]);
        let out = l.apply(&theta);
        assert!((out.density_at(0.2) - 2.0).abs() < 1e-12);
        assert!((out.density_at(0.5) - 2.0 / 3.0).abs() < 1e-12);
        assert!(out.density_at(0.9).abs() < 1e-12);
        assert_eq!(LevelKernel::identity().apply(&theta), theta);
    }

    #[test]
    fn averaging_is_idempotent() {
        let l = LevelKernel::averaging(&[(0.25, 0.75)]);
        assert_eq!(l.compose(&l).unwrap(), l);
    }

    #[test]
    fn remark_row_at_half_is_lebesgue() {
        let third = 1.0 / 3.0;
        let k = LevelKernel::averaging(&[(third, 5.0 / 6.0)])
            .compose(&LevelKernel::averaging(&[(2.0 * third, 1.0)]))
            .unwrap()
            .compose(&LevelKernel::averaging(&[(0.0, 2.0 * third)]))
            .unwrap();
        for v in [0.1, 0.3, 0.5, 0.7, 0.9] {
            assert!((k.row_cdf(0.5, v) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_examples() {
        let l = LevelKernel::averaging(&[(0.2, 0.6)]);
        assert_eq!(l.transpose().unwrap(), l);
        let s = swap();
        assert_eq!(s.transpose().unwrap().transpose().unwrap(), s);
        let not_ds = LevelKernel::constant(&LevelDensity::indicator(0.0, 0.5, 2.0)).unwrap();
        assert!(matches!(not_ds.transpose(), Err(Error::NotDoublyStochastic { .. })));
    }

    #[test]
    fn increasing_examples() {
        assert!(LevelKernel::averaging(&[(0.2, 0.6)]).is_increasing());
        assert!(LevelKernel::constant(&LevelDensity::indicator(0.1, 0.4, 1.0)).unwrap().is_increasing());
        assert!(!swap().is_increasing());
        assert!(LevelKernel::identity().is_increasing());
    }

    #[test]
    fn decreasing_cone_examples() {
        assert!(LevelKernel::averaging(&[(0.2, 0.6)]).preserves_decreasing());
        assert!(!swap().preserves_decreasing());
        assert!(LevelKernel::full_averaging().preserves_decreasing());
    }

    #[test]
    fn sampling_respects_identity_weight() {
        let l = LevelKernel::averaging(&[(0.0, 0.5)]);
        assert_eq!(l.sample_row(0.75, 0.3, 0.9), 0.75);
        let y = l.sample_row(0.25, 0.3, 0.5);
        assert!((y - 0.25).abs() < 1e-12);
    }
}
