use crate::error::{Error, Result};
use crate::grid;
use crate::tol;

/// Piecewise-constant non-negative density on `(0,1)`.
///
/// `breaks` always runs from 0 to 1; `dens[i]` is the density on
/// `(breaks[i], breaks[i+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDensity {
    breaks: Vec<f64>,
    dens: Vec<f64>,
}

impl LevelDensity {
    pub fn new(breaks: Vec<f64>, dens: Vec<f64>) -> Result<Self> {
        if breaks.len() != dens.len() + 1 || dens.is_empty() {
            return Err(Error::LengthMismatch { expected: breaks.len().saturating_sub(1), got: dens.len() });
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("density breakpoints must increase from 0 to 1".into()));
        }
        if dens.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::Invalid("density must be finite and non-negative".into()));
        }
        Ok(Self::canonical(breaks, dens))
    }

    pub(crate) fn from_parts(breaks: Vec<f64>, dens: Vec<f64>) -> Self {
        debug_assert_eq!(breaks.len(), dens.len() + 1);
        Self::canonical(breaks, dens)
    }

    fn canonical(breaks: Vec<f64>, dens: Vec<f64>) -> Self {
        let mut b = vec![0.0];
        let mut d: Vec<f64> = Vec::with_capacity(dens.len());
        for (i, &v) in dens.iter().enumerate() {
            let hi = breaks[i + 1];
            if hi - b[b.len() - 1] <= tol::REPR && i + 1 < dens.len() {
                // sliver: fold into the next cell
                continue;
            }
            match d.last() {
                Some(&last) if grid::approx_eq(last, v, tol::REPR) => {
                    *b.last_mut().unwrap() = hi;
                }
                _ => {
                    d.push(v);
                    b.push(hi);
                }
            }
        }
        *b.last_mut().unwrap() = 1.0;
        Self { breaks: b, dens: d }
    }

    /// Lebesgue measure on `(0,1)`.
    pub fn lebesgue() -> Self {
        Self { breaks: vec![0.0, 1.0], dens: vec![1.0] }
    }

    /// `height` times the indicator of `(lo, hi)`.
    pub fn indicator(lo: f64, hi: f64, height: f64) -> Self {
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(lo, 1.0);
        let pts = grid::merge(&[&[0.0, lo, hi, 1.0]]);
        let dens = pts
            .windows(2)
            .map(|w| if w[0] >= lo && w[1] <= hi { height } else { 0.0 })
            .collect();
        Self::from_parts(pts, dens)
    }

    /// Normalized uniform law on `(lo, hi)`.
    pub fn uniform_on(lo: f64, hi: f64) -> Self {
        Self::indicator(lo, hi, 1.0 / (hi - lo))
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn densities(&self) -> &[f64] {
        &self.dens
    }

    pub fn mass(&self) -> f64 {
        self.dens.iter().zip(self.breaks.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum()
    }

    pub fn density_at(&self, u: f64) -> f64 {
        self.dens[grid::cell_of(&self.breaks, u)]
    }

    /// `∫_0^u` of the density.
    pub fn cdf(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &d) in self.dens.iter().enumerate() {
            let (a, b) = (self.breaks[i], self.breaks[i + 1]);
            if u >= b {
                acc += d * (b - a);
            } else {
                if u > a {
                    acc += d * (u - a);
                }
                break;
            }
        }
        acc
    }

    /// `∫_lo^hi` of the density.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let first = grid::cell_of(&self.breaks, lo);
        let mut acc = 0.0;
        for i in first..self.dens.len() {
            let (a, b) = (self.breaks[i], self.breaks[i + 1]);
            if a >= hi {
                break;
            }
            acc += self.dens[i] * grid::overlap(a, b, lo, hi);
        }
        acc
    }

    /// Restriction to `[0, u]`.
    pub fn restrict(&self, u: f64) -> Self {
        if u >= 1.0 {
            return self.clone();
        }
        let pts = grid::merge(&[&self.breaks, &[u]]);
        let dens = pts
            .windows(2)
            .map(|w| if w[1] <= u + tol::REPR { self.density_at(0.5 * (w[0] + w[1])) } else { 0.0 })
            .collect();
        Self::from_parts(pts, dens)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { breaks: self.breaks.clone(), dens: self.dens.iter().map(|d| d * c).collect() }
    }

    /// Rescaled to mass one; `ZeroMass` if the mass vanishes.
    pub fn normalize(&self) -> Result<Self> {
        let m = self.mass();
        if m <= tol::REPR {
            return Err(Error::ZeroMass(m));
        }
        Ok(self.scale(1.0 / m))
    }

    /// Pointwise `self + c * other`.
    pub fn add_scaled(&self, other: &LevelDensity, c: f64) -> Self {
        let pts = grid::merge(&[&self.breaks, &other.breaks]);
        let dens = pts
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                self.density_at(m) + c * other.density_at(m)
            })
            .collect();
        Self::from_parts(pts, dens)
    }

    /// Pointwise product with a piecewise-constant function given on `grid`.
    pub fn multiply(&self, grid_pts: &[f64], values: &[f64]) -> Self {
        let pts = grid::merge(&[&self.breaks, grid_pts]);
        let dens = pts
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                self.density_at(m) * values[grid::cell_of(grid_pts, m)]
            })
            .collect();
        Self::from_parts(pts, dens)
    }

    /// Member of the cone of bounded non-increasing densities.
    pub fn is_decreasing(&self) -> bool {
        self.dens.windows(2).all(|w| w[1] <= w[0] + tol::REPR * (1.0 + w[0].abs()))
    }

    /// Stochastic order between two densities of equal mass.
    pub fn sto_leq(&self, other: &LevelDensity) -> bool {
        let pts = grid::merge(&[&self.breaks, &other.breaks]);
        pts.iter().all(|&u| self.cdf(u) >= other.cdf(u) - tol::CMP)
    }

    /// Cellwise equality within `eps`, relative to the larger value.
    pub fn approx_eq(&self, other: &LevelDensity, eps: f64) -> bool {
        let pts = grid::merge(&[&self.breaks, &other.breaks]);
        pts.windows(2).all(|w| {
            let m = 0.5 * (w[0] + w[1]);
            grid::approx_eq(self.density_at(m), other.density_at(m), eps)
        })
    }

    /// Sup distance of the two cumulative mass functions.
    pub fn cdf_distance(&self, other: &LevelDensity) -> f64 {
        let pts = grid::merge(&[&self.breaks, &other.breaks]);
        pts.iter().map(|&u| (self.cdf(u) - other.cdf(u)).abs()).fold(0.0, f64::max)
    }

    /// Inverse-CDF sample of the normalized density at level `w` in `(0,1)`.
    pub fn sample(&self, w: f64) -> f64 {
        let total = self.mass();
        let target = w * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &d) in self.dens.iter().enumerate() {
            let (a, b) = (self.breaks[i], self.breaks[i + 1]);
            let m = d * (b - a);
            if m > 0.0 {
                last = i;
                if acc + m >= target {
                    return (a + (target - acc) / d).clamp(a, b);
                }
            }
            acc += m;
        }
        self.breaks[last + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_and_cdf() {
        let d = LevelDensity::indicator(0.0, 0.5, 2.0);
        assert_eq!(d.mass(), 1.0);
        assert_eq!(d.cdf(0.25), 0.5);
        assert_eq!(d.cdf(0.75), 1.0);
        assert!(d.is_decreasing());
        assert!(!LevelDensity::indicator(0.5, 1.0, 2.0).is_decreasing());
    }

    #[test]
    fn restriction_cuts_inside_a_cell() {
        let r = LevelDensity::lebesgue().restrict(0.3);
        assert!((r.mass() - 0.3).abs() < 1e-15);
        assert_eq!(r.breaks(), &[0.0, 0.3, 1.0]);
    }

    #[test]
    fn sampling_inverts_cdf() {
        let d = LevelDensity::new(vec![0.0, 0.25, 1.0], vec![2.0, 2.0 / 3.0]).unwrap();
        for w in [0.1, 0.5, 0.9] {
            let u = d.sample(w);
            assert!((d.cdf(u) - w).abs() < 1e-12);
        }
    }

    #[test]
    fn sto_order_of_densities() {
        let low = LevelDensity::indicator(0.0, 0.5, 2.0);
        assert!(low.sto_leq(&LevelDensity::lebesgue()));
        assert!(!LevelDensity::lebesgue().sto_leq(&low));
    }
}
