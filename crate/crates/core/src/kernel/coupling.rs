use rayon::prelude::*;

use super::density::LevelDensity;
use super::lkernel::LevelKernel;
use crate::error::{Error, Result};
use crate::grid;
use crate::measure::RealMeasure;
use crate::tol;

/// `Joint(λ, k)` on `(0,1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCoupling {
    kernel: LevelKernel,
}

impl From<LevelKernel> for LevelCoupling {
    fn from(kernel: LevelKernel) -> Self {
        Self { kernel }
    }
}

/// Fast evaluation of `F(u,v) = A(min(u,v)) + Σ_j C_j(u) H_j(v)`.
struct Evaluator<'a> {
    k: &'a LevelKernel,
    a_cum: Vec<f64>,
    c_cum: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(k: &'a LevelKernel) -> Self {
        let cells = k.n_cells();
        let nj = k.n_targets();
        let g = k.grid();
        let mut a_cum = vec![0.0; cells + 1];
        let mut c_cum = vec![0.0; (cells + 1) * nj];
        for c in 0..cells {
            let len = g[c + 1] - g[c];
            a_cum[c + 1] = a_cum[c] + k.identity_weights()[c] * len;
            let row = k.row_coefficients(c);
            for j in 0..nj {
                c_cum[(c + 1) * nj + j] = c_cum[c * nj + j] + row[j] * len;
            }
        }
        Self { k, a_cum, c_cum }
    }

    fn a(&self, u: f64) -> f64 {
        let c = self.k.cell_of(u);
        let g = self.k.grid();
        self.a_cum[c] + self.k.identity_weights()[c] * (u - g[c]).clamp(0.0, g[c + 1] - g[c])
    }

    fn c_into(&self, u: f64, out: &mut [f64]) {
        let c = self.k.cell_of(u);
        let g = self.k.grid();
        let nj = self.k.n_targets();
        let d = (u - g[c]).clamp(0.0, g[c + 1] - g[c]);
        let row = self.k.row_coefficients(c);
        for j in 0..nj {
            out[j] = self.c_cum[c * nj + j] + row[j] * d;
        }
    }

    fn cdf(&self, u: f64, v: f64) -> f64 {
        let nj = self.k.n_targets();
        let mut cu = vec![0.0; nj];
        self.c_into(u, &mut cu);
        let mut acc = self.a(u.min(v));
        for (cj, t) in cu.iter().zip(self.k.targets()) {
            if *cj > 0.0 {
                acc += cj * t.cdf(v);
            }
        }
        acc
    }

    /// Corner table on `pts × pts`, row-major. Built from the masses of the
    /// grid rectangles, which are sparse for averaging kernels, and summed.
    fn table(&self, pts: &[f64]) -> Vec<f64> {
        let nj = self.k.n_targets();
        let n = pts.len();
        // Target masses on `(pts[k-1], pts[k]]`, with `pts[-1] = 0`.
        let masses: Vec<Vec<(usize, f64)>> = self
            .k
            .targets()
            .par_iter()
            .map(|t| {
                let (tb, td) = (t.breaks(), t.densities());
                let mut out = Vec::new();
                let (mut acc, mut prev, mut e) = (0.0, 0.0, 0);
                for (k, &v) in pts.iter().enumerate() {
                    while e < td.len() && tb[e + 1] <= v {
                        acc += td[e] * (tb[e + 1] - tb[e]);
                        e += 1;
                    }
                    let h = acc + if e < td.len() && v > tb[e] { td[e] * (v - tb[e]) } else { 0.0 };
                    if h > prev {
                        out.push((k, h - prev));
                    }
                    prev = h;
                }
                out
            })
            .collect();
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let mut hi = vec![0.0; nj];
            self.c_into(pts[i], &mut hi);
            let mut lo = vec![0.0; nj];
            if i > 0 {
                self.c_into(pts[i - 1], &mut lo);
            }
            for j in 0..nj {
                let w = hi[j] - lo[j];
                if w > 0.0 {
                    for &(k, m) in &masses[j] {
                        row[k] += w * m;
                    }
                }
            }
            for k in 1..n {
                row[k] += row[k - 1];
            }
        });
        for i in 1..n {
            let (done, rest) = out.split_at_mut(i * n);
            let above = &done[(i - 1) * n..];
            for (x, a) in rest[..n].iter_mut().zip(above) {
                *x += a;
            }
        }
        let a: Vec<f64> = pts.iter().map(|&u| self.a(u)).collect();
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (k, x) in row.iter_mut().enumerate() {
                *x += a[i.min(k)];
            }
        });
        out
    }
}

/// Extremes of `F1 - F2` over the allowed part of the unit square.
#[derive(Debug, Clone, Copy)]
struct Extremes {
    /// `sup (F1 - F2)`
    above: f64,
    /// `sup (F2 - F1)`
    below: f64,
}

fn inside_any(x: f64, iv: &[(f64, f64)]) -> bool {
    iv.iter().any(|&(a, b)| x > a + tol::REPR && x < b - tol::REPR)
}

fn extremes(k1: &LevelKernel, k2: &LevelKernel, ex_u: &[(f64, f64)], ex_v: &[(f64, f64)]) -> Extremes {
    let b1 = k1.all_breaks();
    let b2 = k2.all_breaks();
    let mut ends: Vec<f64> = ex_u.iter().chain(ex_v).flat_map(|&(a, b)| [a, b]).collect();
    ends.sort_by(f64::total_cmp);
    let pts = grid::merge(&[&b1, &b2, &ends]);
    let n = pts.len();
    let e1 = Evaluator::new(k1);
    let e2 = Evaluator::new(k2);
    let t1 = e1.table(&pts);
    let t2 = e2.table(&pts);
    let ok_u: Vec<bool> = pts.iter().map(|&x| !inside_any(x, ex_u)).collect();
    let ok_v: Vec<bool> = pts.iter().map(|&x| !inside_any(x, ex_v)).collect();
    let mut ext = Extremes { above: f64::NEG_INFINITY, below: f64::NEG_INFINITY };
    for i in 0..n {
        if !ok_u[i] {
            continue;
        }
        for k in 0..n {
            if !ok_v[k] {
                continue;
            }
            let d = t1[i * n + k] - t2[i * n + k];
            ext.above = ext.above.max(d);
            ext.below = ext.below.max(-d);
        }
    }
    // On diagonal cells `A(min(u,v))` bends along `u = v`; the difference is
    // quadratic there and may peak strictly inside the cell.
    for i in 0..n - 1 {
        let (s0, s1) = (pts[i], pts[i + 1]);
        let sm = 0.5 * (s0 + s1);
        if inside_any(sm, ex_u) || inside_any(sm, ex_v) {
            continue;
        }
        let f = |s: f64| e1.cdf(s, s) - e2.cdf(s, s);
        let (f0, fm, f1) = (t1[i * n + i] - t2[i * n + i], f(sm), t1[(i + 1) * n + i + 1] - t2[(i + 1) * n + i + 1]);
        let c = 2.0 * (f1 - 2.0 * fm + f0);
        let b = f1 - f0 - c;
        if c.abs() > 0.0 {
            let t = -b / (2.0 * c);
            if t > 0.0 && t < 1.0 {
                let d = f(s0 + t * (s1 - s0));
                ext.above = ext.above.max(d);
                ext.below = ext.below.max(-d);
            }
        }
        ext.above = ext.above.max(fm);
        ext.below = ext.below.max(-fm);
    }
    ext
}

impl LevelCoupling {
    pub fn new(kernel: LevelKernel) -> Self {
        Self { kernel }
    }

    /// The diagonal coupling `(id, id)_# λ`.
    pub fn identity() -> Self {
        Self { kernel: LevelKernel::identity() }
    }

    /// `λ ⊗ λ`.
    pub fn product() -> Self {
        Self { kernel: LevelKernel::full_averaging() }
    }

    pub fn kernel(&self) -> &LevelKernel {
        &self.kernel
    }

    pub fn into_kernel(self) -> LevelKernel {
        self.kernel
    }

    /// `L([0,u] × [0,v])`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        Evaluator::new(&self.kernel).cdf(u.clamp(0.0, 1.0), v.clamp(0.0, 1.0))
    }

    /// CDF values on `us × vs`, row-major.
    pub fn cdf_grid(&self, us: &[f64], vs: &[f64]) -> Vec<f64> {
        let e = Evaluator::new(&self.kernel);
        us.iter().flat_map(|&u| vs.iter().map(move |&v| (u, v))).map(|(u, v)| e.cdf(u, v)).collect()
    }

    /// CDF values on `pts × pts`, row-major; `pts` must be sorted.
    pub fn cdf_table(&self, pts: &[f64]) -> Vec<f64> {
        Evaluator::new(&self.kernel).table(pts)
    }

    pub fn second_marginal(&self) -> LevelDensity {
        self.kernel.second_marginal()
    }

    pub fn compose(&self, other: &LevelCoupling) -> Result<LevelCoupling> {
        Ok(Self { kernel: self.kernel.compose(&other.kernel)? })
    }

    pub fn transpose(&self) -> Result<LevelCoupling> {
        Ok(Self { kernel: self.kernel.transpose()? })
    }

    fn check_marginals(&self, other: &LevelCoupling) -> Result<()> {
        let deviation = self.second_marginal().cdf_distance(&other.second_marginal());
        if deviation > tol::CMP {
            return Err(Error::MarginalMismatch { deviation });
        }
        Ok(())
    }

    /// `‖F_self − F_other‖_∞`.
    pub fn rho(&self, other: &LevelCoupling) -> Result<f64> {
        self.check_marginals(other)?;
        let e = extremes(&self.kernel, &other.kernel, &[], &[]);
        Ok(e.above.max(e.below).max(0.0))
    }

    /// `F_self ≥ F_other` everywhere (lower-orthant order `self ≼ other`).
    pub fn lo_leq(&self, other: &LevelCoupling) -> Result<bool> {
        self.check_marginals(other)?;
        Ok(extremes(&self.kernel, &other.kernel, &[], &[]).below <= tol::CMP)
    }

    /// `sup (F_other − F_self)`: by how much `self ≼ other` fails.
    pub fn lo_excess(&self, other: &LevelCoupling) -> Result<f64> {
        self.check_marginals(other)?;
        Ok(extremes(&self.kernel, &other.kernel, &[], &[]).below.max(0.0))
    }

    /// `rho` and `lo_leq` from a single pass over the grid.
    pub fn compare(&self, other: &LevelCoupling) -> Result<(f64, bool)> {
        self.check_marginals(other)?;
        let e = extremes(&self.kernel, &other.kernel, &[], &[]);
        Ok((e.above.max(e.below).max(0.0), e.below <= tol::CMP))
    }
}

/// Coupling of two measures on the real line, `(G_left ⊗ G_right)_# level`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealCoupling {
    pub left: RealMeasure,
    pub right: RealMeasure,
    pub level: LevelCoupling,
}

pub fn pushforward_coupling(left: &RealMeasure, right: &RealMeasure, level: &LevelCoupling) -> RealCoupling {
    RealCoupling { left: left.clone(), right: right.clone(), level: level.clone() }
}

fn atom_intervals(m: &RealMeasure) -> Vec<(f64, f64)> {
    m.atoms().iter().map(|a| a.level_interval).collect()
}

impl RealCoupling {
    /// The comonotone coupling of `left` and `right`.
    pub fn quantile(left: &RealMeasure, right: &RealMeasure) -> Self {
        pushforward_coupling(left, right, &LevelCoupling::identity())
    }

    pub fn product(left: &RealMeasure, right: &RealMeasure) -> Self {
        pushforward_coupling(left, right, &LevelCoupling::product())
    }

    /// The same coupling with coordinates swapped.
    pub fn transpose(&self) -> Result<Self> {
        Ok(Self { left: self.right.clone(), right: self.left.clone(), level: self.level.transpose()? })
    }

    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        self.level.cdf(self.left.cdf(x), self.right.cdf(y))
    }

    /// CDF values on `xs × ys`, row-major, from a single corner table.
    pub fn cdf_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let us: Vec<f64> = xs.iter().map(|&x| self.left.cdf(x).clamp(0.0, 1.0)).collect();
        let vs: Vec<f64> = ys.iter().map(|&y| self.right.cdf(y).clamp(0.0, 1.0)).collect();
        let mut pts: Vec<f64> = us.iter().chain(&vs).copied().collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let table = self.level.cdf_table(&pts);
        let at = |u: f64| pts.partition_point(|&p| p < u);
        let n = pts.len();
        us.iter().flat_map(|&u| vs.iter().map(move |&v| (u, v))).map(|(u, v)| table[at(u) * n + at(v)]).collect()
    }

    /// Mass of the point `(x, y)`.
    pub fn point_mass(&self, x: f64, y: f64) -> f64 {
        let (u0, u1) = (self.left.cdf_left(x), self.left.cdf(x));
        let (v0, v1) = (self.right.cdf_left(y), self.right.cdf(y));
        self.rect_mass(u0, u1, v0, v1)
    }

    /// Mass of the level rectangle `(u0,u1] × (v0,v1]`.
    pub fn rect_mass(&self, u0: f64, u1: f64, v0: f64, v1: f64) -> f64 {
        let f = self.level.cdf_grid(&[u0, u1], &[v0, v1]);
        f[3] - f[2] - f[1] + f[0]
    }

    fn check_marginals(&self, other: &RealCoupling) -> Result<()> {
        let deviation = self.left.kolmogorov(&other.left).max(self.right.kolmogorov(&other.right));
        if deviation > tol::CMP {
            return Err(Error::MarginalMismatch { deviation });
        }
        Ok(())
    }

    fn extremes(&self, other: &RealCoupling) -> Result<Extremes> {
        self.check_marginals(other)?;
        Ok(extremes(
            self.level.kernel(),
            other.level.kernel(),
            &atom_intervals(&self.left),
            &atom_intervals(&self.right),
        ))
    }

    pub fn rho(&self, other: &RealCoupling) -> Result<f64> {
        let e = self.extremes(other)?;
        Ok(e.above.max(e.below).max(0.0))
    }

    pub fn lo_leq(&self, other: &RealCoupling) -> Result<bool> {
        Ok(self.extremes(other)?.below <= tol::CMP)
    }

    /// `sup (F_other − F_self)` over the real plane.
    pub fn lo_excess(&self, other: &RealCoupling) -> Result<f64> {
        Ok(self.extremes(other)?.below.max(0.0))
    }

    /// `{x ≤ y}` has full mass.
    pub fn is_monotone(&self) -> bool {
        // P(X > y ≥ Y) = F_right(y) - F(y, y) must vanish for every y;
        // probe breakpoints and the midpoints between them.
        let mut ys = self.left.x_breakpoints();
        ys.extend(self.right.x_breakpoints());
        ys.sort_by(f64::total_cmp);
        let mids: Vec<f64> = ys.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        ys.extend(mids);
        ys.iter().all(|&y| {
            let v = self.right.cdf(y);
            (self.level.cdf(self.left.cdf(y), v) - v).abs() <= tol::CMP
        })
    }
}

/// A lower-orthant CDF tabulated on a product grid, with `F = 0` implied
/// below the first row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

/// Cell of a product grid whose rectangle increment is negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub mass: f64,
}

impl GridCdf {
    /// CDF of finitely many weighted points `(x, y, w)`.
    pub fn from_points(points: &[(f64, f64, f64)], xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let values = xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
            .map(|(x, y)| points.iter().filter(|p| p.0 <= x && p.1 <= y).map(|p| p.2).sum())
            .collect();
        Self { xs, ys, values }
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.ys.len() + k]
    }

    /// First rectangle with negative mass, scanning from the lower-left.
    pub fn first_negative_cell(&self) -> Option<Witness> {
        let f = |i: Option<usize>, k: Option<usize>| match (i, k) {
            (Some(i), Some(k)) => self.at(i, k),
            _ => 0.0,
        };
        for i in 0..self.xs.len() {
            for k in 0..self.ys.len() {
                let (ip, kp) = (i.checked_sub(1), k.checked_sub(1));
                let m = f(Some(i), Some(k)) - f(ip, Some(k)) - f(Some(i), kp) + f(ip, kp);
                if m < -tol::CMP {
                    let lo_x = ip.map_or(f64::NEG_INFINITY, |p| self.xs[p]);
                    let lo_y = kp.map_or(f64::NEG_INFINITY, |p| self.ys[p]);
                    return Some(Witness { x: (lo_x, self.xs[i]), y: (lo_y, self.ys[k]), mass: m });
                }
            }
        }
        None
    }
}

/// Pointwise minimum of CDF tables on a shared grid, or a rectangle of
/// negative mass when that minimum is not a CDF.
pub fn losup_tables(tables: &[GridCdf]) -> Result<std::result::Result<GridCdf, Witness>> {
    let first = tables.first().ok_or_else(|| Error::Invalid("empty family of couplings".into()))?;
    if tables.iter().any(|t| t.xs != first.xs || t.ys != first.ys) {
        return Err(Error::Invalid("tables must share one grid".into()));
    }
    let values = (0..first.values.len())
        .map(|i| tables.iter().map(|t| t.values[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let m = GridCdf { xs: first.xs.clone(), ys: first.ys.clone(), values };
    Ok(match m.first_negative_cell() {
        Some(w) => Err(w),
        None => Ok(m),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum LosupOutcome {
    Coupling(LevelCoupling),
    Invalid(Witness),
}

/// Lower-orthant supremum of level couplings with a common second marginal.
///
/// The candidate is the pointwise minimum of the CDFs at the corners of the
/// merged grid. When one input lies above all others it is returned exactly;
/// otherwise the result carries the cell masses of the candidate, spread
/// uniformly inside each cell.
pub fn losup_couplings(ls: &[LevelCoupling]) -> Result<LosupOutcome> {
    let first = ls.first().ok_or_else(|| Error::Invalid("empty family of couplings".into()))?;
    for l in &ls[1..] {
        first.check_marginals(l)?;
    }
    // Corner values cannot tell an identity cell from an averaged one, so
    // attainment is decided on the exact CDFs.
    for l in ls {
        if ls.iter().map(|m| m.lo_excess(l)).collect::<Result<Vec<_>>>()?.iter().all(|&e| e <= tol::REPR) {
            return Ok(LosupOutcome::Coupling(l.clone()));
        }
    }
    let mut parts: Vec<Vec<f64>> = ls.iter().map(|l| l.kernel.all_breaks()).collect();
    parts.push(vec![0.0, 1.0]);
    let refs: Vec<&[f64]> = parts.iter().map(|p| p.as_slice()).collect();
    let pts = grid::merge(&refs);
    let inner: Vec<f64> = pts[1..].to_vec();
    let tables: Vec<GridCdf> = ls
        .iter()
        .map(|l| GridCdf { xs: inner.clone(), ys: inner.clone(), values: Evaluator::new(&l.kernel).table(&inner) })
        .collect();
    let m = match losup_tables(&tables)? {
        Ok(m) => m,
        Err(w) => return Ok(LosupOutcome::Invalid(w)),
    };
    let n = inner.len();
    let f = |i: usize, k: usize| if i == 0 || k == 0 { 0.0 } else { m.at(i - 1, k - 1) };
    let targets: Vec<LevelDensity> = (0..n).map(|k| LevelDensity::uniform_on(pts[k], pts[k + 1])).collect();
    let mut coef = vec![0.0; n * n];
    for i in 0..n {
        let len = pts[i + 1] - pts[i];
        let mut row_total = 0.0;
        for k in 0..n {
            let mass = (f(i + 1, k + 1) - f(i, k + 1) - f(i + 1, k) + f(i, k)).max(0.0);
            coef[i * n + k] = mass / len;
            row_total += mass / len;
        }
        for k in 0..n {
            coef[i * n + k] /= row_total;
        }
    }
    let kernel = LevelKernel::from_raw(pts.clone(), vec![0.0; n], targets, coef);
    Ok(LosupOutcome::Coupling(LevelCoupling::new(kernel)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        assert!((LevelCoupling::identity().cdf(0.3, 0.7) - 0.3).abs() < 1e-15);
        assert!((LevelCoupling::product().cdf(0.5, 0.5) - 0.25).abs() < 1e-15);
        let l = LevelCoupling::new(LevelKernel::averaging(&[(0.0, 0.5)]));
        assert!((l.cdf(0.25, 0.25) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn rho_examples() {
        let id = LevelCoupling::identity();
        let prod = LevelCoupling::product();
        assert_eq!(id.rho(&id).unwrap(), 0.0);
        assert!((id.rho(&prod).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(id.rho(&prod).unwrap(), prod.rho(&id).unwrap());
        let skew = LevelCoupling::new(LevelKernel::constant(&LevelDensity::indicator(0.0, 0.5, 2.0)).unwrap());
        assert!(matches!(id.rho(&skew), Err(Error::MarginalMismatch { .. })));
    }

    #[test]
    fn lo_order_examples() {
        let id = LevelCoupling::identity();
        let prod = LevelCoupling::product();
        assert!(id.lo_leq(&prod).unwrap());
        assert!(!prod.lo_leq(&id).unwrap());
        let low = LevelCoupling::new(LevelKernel::averaging(&[(0.0, 0.5)]));
        let high = LevelCoupling::new(LevelKernel::averaging(&[(0.5, 1.0)]));
        assert!(!low.lo_leq(&high).unwrap());
        assert!(!high.lo_leq(&low).unwrap());
    }

    #[test]
    fn pushforward_examples() {
        let mu = RealMeasure::discrete(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let nu = RealMeasure::uniform(0.0, 1.0);
        let q = RealCoupling::quantile(&mu, &nu);
        assert!((q.cdf(0.0, 0.5) - 0.5).abs() < 1e-15);
        let p = RealCoupling::product(&mu, &nu);
        assert!((p.cdf(0.0, 0.5) - 0.25).abs() < 1e-15);
        assert!((p.point_mass(1.0, 0.3)).abs() < 1e-15);
    }

    #[test]
    fn discrete_losup_has_no_cdf() {
        let g = vec![0.0, 1.0, 2.0];
        let p1 = GridCdf::from_points(&[(1.0, 0.0, 0.5), (0.0, 1.0, 0.5)], g.clone(), g.clone());
        let p2 = GridCdf::from_points(&[(0.0, 0.0, 0.5), (2.0, 2.0, 0.5)], g.clone(), g);
        let w = losup_tables(&[p1, p2]).unwrap().unwrap_err();
        assert_eq!(w.x, (0.0, 1.0));
        assert_eq!(w.y, (0.0, 1.0));
        assert_eq!(w.mass, -0.5);
    }

    #[test]
    fn losup_of_chain_is_its_top() {
        let a = LevelCoupling::identity();
        let b = LevelCoupling::new(LevelKernel::averaging(&[(0.25, 0.5)]));
        let c = LevelCoupling::new(LevelKernel::averaging(&[(0.0, 0.5)]));
        assert!(a.lo_leq(&b).unwrap() && b.lo_leq(&c).unwrap());
        assert_eq!(losup_couplings(&[a, b, c.clone()]).unwrap(), LosupOutcome::Coupling(c));
    }
}
