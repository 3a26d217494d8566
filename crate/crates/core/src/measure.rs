//! Probability measures on the real line stored through their quantile
//! function.
//!
//! A [`RealMeasure`] is a finite stack of level pieces `(u_{k-1}, u_k]`; on
//! each piece the quantile function `G` is either constant (an atom) or affine
//! (a uniform segment). This class is closed under stochastic suprema and
//! infima, and every query below is answered exactly from the pieces.

use std::cmp::Ordering;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid;
use crate::tol;

/// Shape of the quantile function on one level piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// `G` is constant: the piece is (part of) an atom at this location.
    Atom(f64),
    /// `G` is affine from `lo` to `hi`: a uniform law on `[lo, hi]`.
    Segment { lo: f64, hi: f64 },
}

impl Piece {
    pub fn start(&self) -> f64 {
        match *self {
            Piece::Atom(x) => x,
            Piece::Segment { lo, .. } => lo,
        }
    }

    pub fn end(&self) -> f64 {
        match *self {
            Piece::Atom(x) => x,
            Piece::Segment { hi, .. } => hi,
        }
    }

    /// Value at relative position `f` in `[0,1]` of the piece.
    #[inline]
    pub fn at(&self, f: f64) -> f64 {
        match *self {
            Piece::Atom(x) => x,
            Piece::Segment { lo, hi } => lo + (hi - lo) * f,
        }
    }
}

/// An atom together with the open interval of quantile levels it absorbs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomInfo {
    pub location: f64,
    pub weight: f64,
    /// `(F(x-), F(x))`.
    pub level_interval: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealMeasure {
    levels: Vec<f64>,
    pieces: Vec<Piece>,
}

/// An affine stretch `(p, q]` on which two quantile functions are both affine.
#[derive(Debug, Clone, Copy)]
struct Stretch {
    p: f64,
    q: f64,
    a: (f64, f64),
    b: (f64, f64),
}

fn scale_eq(a: f64, b: f64) -> bool {
    grid::approx_eq(a, b, tol::REPR)
}

impl RealMeasure {
    /// Builds a measure from consecutive `(level mass, piece)` pairs.
    pub fn new(pieces: &[(f64, Piece)]) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::BadMass { total: 0.0 });
        }
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        if pieces.iter().any(|p| !(p.0 > 0.0)) || (total - 1.0).abs() > tol::REPR {
            return Err(Error::BadMass { total });
        }
        for (i, (_, piece)) in pieces.iter().enumerate() {
            if let Piece::Segment { lo, hi } = *piece {
                if !(lo.is_finite() && hi.is_finite()) || hi < lo {
                    return Err(Error::NonMonotone { index: i });
                }
            }
            if let Piece::Atom(x) = *piece {
                if !x.is_finite() {
                    return Err(Error::Invalid(format!("atom location {x}")));
                }
            }
            if i > 0 {
                let prev = pieces[i - 1].1.end();
                if piece.start() < prev && !scale_eq(piece.start(), prev) {
                    return Err(Error::NonMonotone { index: i });
                }
            }
        }
        let mut levels = Vec::with_capacity(pieces.len() + 1);
        levels.push(0.0);
        let mut acc = 0.0;
        for (m, _) in pieces {
            acc += m;
            levels.push(acc / total);
        }
        *levels.last_mut().unwrap() = 1.0;
        Ok(Self::canonical(levels, pieces.iter().map(|p| p.1).collect()))
    }

    pub fn dirac(x: f64) -> Self {
        Self { levels: vec![0.0, 1.0], pieces: vec![Piece::Atom(x)] }
    }

    /// Uniform law on `[lo, hi]`; degenerates to a Dirac mass when `lo == hi`.
    pub fn uniform(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "uniform needs lo <= hi");
        Self::canonical(vec![0.0, 1.0], vec![Piece::Segment { lo, hi }])
    }

    /// Finite discrete law from `(location, weight)` pairs in any order.
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::from_mixture(atoms, &[])
    }

    /// Mixture of atoms `(x, w)` and uniform segments `(lo, hi, w)`, which
    /// may overlap freely.
    pub fn from_mixture(atoms: &[(f64, f64)], segments: &[(f64, f64, f64)]) -> Result<Self> {
        let mut point_mass: Vec<(f64, f64)> = Vec::new();
        let mut segs: Vec<(f64, f64, f64)> = Vec::new();
        let mut total = 0.0;
        for &(x, w) in atoms {
            if w < 0.0 || !x.is_finite() {
                return Err(Error::Invalid(format!("atom ({x}, {w})")));
            }
            total += w;
            if w > 0.0 {
                point_mass.push((x, w));
            }
        }
        for &(lo, hi, w) in segments {
            if w < 0.0 || hi < lo || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Invalid(format!("segment ({lo}, {hi}, {w})")));
            }
            total += w;
            if w > 0.0 {
                if hi - lo <= tol::REPR * (1.0 + lo.abs()) {
                    point_mass.push((lo, w));
                } else {
                    segs.push((lo, hi, w));
                }
            }
        }
        if (total - 1.0).abs() > tol::REPR {
            return Err(Error::BadMass { total });
        }
        let mut xs: Vec<f64> = point_mass.iter().map(|a| a.0).collect();
        for s in &segs {
            xs.push(s.0);
            xs.push(s.1);
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut pieces = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            let w: f64 = point_mass.iter().filter(|a| a.0 == x).map(|a| a.1).sum();
            if w > 0.0 {
                pieces.push((w, Piece::Atom(x)));
            }
            if let Some(&y) = xs.get(i + 1) {
                let dens: f64 = segs
                    .iter()
                    .filter(|s| s.0 <= x && s.1 >= y)
                    .map(|s| s.2 / (s.1 - s.0))
                    .sum();
                if dens > 0.0 {
                    pieces.push((dens * (y - x), Piece::Segment { lo: x, hi: y }));
                }
            }
        }
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        let pieces: Vec<(f64, Piece)> = pieces.into_iter().map(|(m, p)| (m / total, p)).collect();
        Self::new(&pieces)
    }

    /// Stacks measures in level order: the first gets the lowest levels.
    /// Zero weights are skipped; the supports must be ordered.
    pub fn concat(parts: &[(f64, &RealMeasure)]) -> Result<Self> {
        let mut pieces = Vec::new();
        for &(w, m) in parts {
            if w < 0.0 {
                return Err(Error::BadMass { total: w });
            }
            if w == 0.0 {
                continue;
            }
            for (k, p) in m.pieces.iter().enumerate() {
                pieces.push((w * (m.levels[k + 1] - m.levels[k]), *p));
            }
        }
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        if (total - 1.0).abs() > tol::REPR {
            return Err(Error::BadMass { total });
        }
        let pieces: Vec<(f64, Piece)> = pieces.into_iter().map(|(m, p)| (m / total, p)).collect();
        Self::new(&pieces)
    }

    fn canonical(levels: Vec<f64>, pieces: Vec<Piece>) -> Self {
        // Drop slivers narrower than the representation tolerance.
        let mut lv = vec![0.0];
        let mut ps: Vec<Piece> = Vec::new();
        for (k, p) in pieces.iter().enumerate() {
            let (a, b) = (levels[k], levels[k + 1]);
            if b - a <= tol::REPR && pieces.len() > 1 {
                continue;
            }
            let p = match *p {
                Piece::Segment { lo, hi } if scale_eq(lo, hi) => Piece::Atom(lo),
                other => other,
            };
            ps.push(p);
            lv.push(b);
        }
        if ps.is_empty() {
            ps.push(pieces[0]);
            lv.push(1.0);
        }
        *lv.last_mut().unwrap() = 1.0;
        // Merge equal atoms and collinear segments.
        let mut out_lv = vec![0.0];
        let mut out: Vec<Piece> = Vec::new();
        for (k, p) in ps.iter().enumerate() {
            let (a, b) = (lv[k], lv[k + 1]);
            if let Some(last) = out.last_mut() {
                let start = out_lv[out_lv.len() - 2];
                let mid = a;
                let merged = match (*last, *p) {
                    (Piece::Atom(x), Piece::Atom(y)) if scale_eq(x, y) => Some(Piece::Atom(x)),
                    (Piece::Segment { lo: l1, hi: h1 }, Piece::Segment { lo: l2, hi: h2 })
                        if scale_eq(h1, l2) =>
                    {
                        let predicted = l1 + (h2 - l1) * (mid - start) / (b - start);
                        if scale_eq(predicted, h1) {
                            Some(Piece::Segment { lo: l1, hi: h2 })
                        } else {
                            None
                        }
                    }
                    _ => None,
                };
                if let Some(m) = merged {
                    *last = m;
                    *out_lv.last_mut().unwrap() = b;
                    continue;
                }
            }
            out.push(*p);
            out_lv.push(b);
        }
        Self { levels: out_lv, pieces: out }
    }

    /// Level breakpoints `0 = u_0 < ... < u_K = 1`.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// `(mass, piece)` pairs, the inverse of [`RealMeasure::new`].
    pub fn weighted_pieces(&self) -> Vec<(f64, Piece)> {
        self.pieces
            .iter()
            .enumerate()
            .map(|(k, p)| (self.levels[k + 1] - self.levels[k], *p))
            .collect()
    }

    fn piece_at_level(&self, q: f64) -> usize {
        grid::cell_of(&self.levels, q)
    }

    /// Left-continuous generalized inverse of the CDF.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::OutOfRange(q));
        }
        Ok(self.g(q))
    }

    /// Quantile function without range check; `q` is clamped into `[0,1]`.
    #[inline]
    pub fn g(&self, q: f64) -> f64 {
        let k = self.piece_at_level(q);
        let (a, b) = (self.levels[k], self.levels[k + 1]);
        self.pieces[k].at(((q - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// `mu((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.end() <= x);
        if k == self.pieces.len() {
            return 1.0;
        }
        self.partial_level(k, x, false)
    }

    /// `mu((-inf, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.end() < x);
        if k == self.pieces.len() {
            return 1.0;
        }
        self.partial_level(k, x, true)
    }

    fn partial_level(&self, k: usize, x: f64, strict: bool) -> f64 {
        let (a, b) = (self.levels[k], self.levels[k + 1]);
        match self.pieces[k] {
            Piece::Segment { lo, hi } if lo < x || (!strict && lo == x) => {
                if hi > lo {
                    a + (b - a) * ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    a
                }
            }
            _ => a,
        }
    }

    pub fn atoms(&self) -> Vec<AtomInfo> {
        self.pieces
            .iter()
            .enumerate()
            .filter_map(|(k, p)| match *p {
                Piece::Atom(x) => Some(AtomInfo {
                    location: x,
                    weight: self.levels[k + 1] - self.levels[k],
                    level_interval: (self.levels[k], self.levels[k + 1]),
                }),
                Piece::Segment { .. } => None,
            })
            .collect()
    }

    /// Mass of the atom at `x` (zero when `x` is not an atom).
    pub fn mass_at(&self, x: f64) -> f64 {
        self.cdf(x) - self.cdf_left(x)
    }

    pub fn is_diffuse(&self) -> bool {
        self.pieces.iter().all(|p| matches!(p, Piece::Segment { .. }))
    }

    /// Essential infimum and supremum of the support.
    pub fn support(&self) -> (f64, f64) {
        (self.pieces[0].start(), self.pieces[self.pieces.len() - 1].end())
    }

    /// Every location where the CDF may fail to be affine.
    pub fn x_breakpoints(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.pieces.iter().flat_map(|p| [p.start(), p.end()]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    pub fn mean(&self) -> f64 {
        self.weighted_pieces().iter().map(|(m, p)| m * 0.5 * (p.start() + p.end())).sum()
    }

    fn stretches(&self, other: &RealMeasure) -> Vec<Stretch> {
        let lv = grid::merge(&[&self.levels, &other.levels]);
        lv.windows(2)
            .map(|w| {
                let (p, q) = (w[0], w[1]);
                Stretch { p, q, a: self.affine_on(p, q), b: other.affine_on(p, q) }
            })
            .collect()
    }

    /// `(G(p+), G(q))` on a stretch `(p, q]` inside a single piece.
    fn affine_on(&self, p: f64, q: f64) -> (f64, f64) {
        let k = grid::cell_containing(&self.levels, p, q);
        let (a, b) = (self.levels[k], self.levels[k + 1]);
        let piece = self.pieces[k];
        let f = |u: f64| piece.at(((u - a) / (b - a)).clamp(0.0, 1.0));
        (f(p), f(q))
    }

    /// `self ≼_sto other`, i.e. `G_self <= G_other` on `(0,1]`.
    pub fn sto_leq(&self, other: &RealMeasure) -> bool {
        self.stretches(other).iter().all(|s| {
            let ok = |x: f64, y: f64| x <= y || scale_eq(x, y);
            ok(s.a.0, s.b.0) && ok(s.a.1, s.b.1)
        })
    }

    /// Stochastic supremum: the CDF is the pointwise minimum of the CDFs.
    pub fn stosup(ms: &[RealMeasure]) -> Result<RealMeasure> {
        Self::fold_envelope(ms, Ordering::Greater)
    }

    /// Stochastic infimum: the CDF is the pointwise maximum of the CDFs.
    pub fn stoinf(ms: &[RealMeasure]) -> Result<RealMeasure> {
        Self::fold_envelope(ms, Ordering::Less)
    }

    fn fold_envelope(ms: &[RealMeasure], keep: Ordering) -> Result<RealMeasure> {
        let (first, rest) = ms
            .split_first()
            .ok_or_else(|| Error::Invalid("empty family of measures".into()))?;
        rest.iter().try_fold(first.clone(), |acc, m| acc.envelope(m, keep))
    }

    fn envelope(&self, other: &RealMeasure, keep: Ordering) -> Result<RealMeasure> {
        let pick = |x: f64, y: f64| if x.total_cmp(&y) == keep { x } else { y };
        let mut bits: Vec<(f64, f64, f64)> = Vec::new();
        for s in self.stretches(other) {
            let d0 = s.a.0 - s.b.0;
            let d1 = s.a.1 - s.b.1;
            if d0 * d1 < 0.0 {
                let f = d0 / (d0 - d1);
                let m = s.p + f * (s.q - s.p);
                let xm = s.a.0 + f * (s.a.1 - s.a.0);
                bits.push((m - s.p, pick(s.a.0, s.b.0), xm));
                bits.push((s.q - m, xm, pick(s.a.1, s.b.1)));
            } else {
                let use_a = if d0 != 0.0 { d0.total_cmp(&0.0) == keep } else { d1.total_cmp(&0.0) == keep };
                let (lo, hi) = if use_a { s.a } else { s.b };
                bits.push((s.q - s.p, lo, hi));
            }
        }
        let mut pieces: Vec<(f64, Piece)> = Vec::with_capacity(bits.len());
        let mut floor = f64::NEG_INFINITY;
        for (w, lo, hi) in bits {
            if w <= 0.0 {
                continue;
            }
            let lo = lo.max(floor);
            let hi = hi.max(lo);
            floor = hi;
            let piece = if scale_eq(lo, hi) { Piece::Atom(lo) } else { Piece::Segment { lo, hi } };
            pieces.push((w, piece));
        }
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        let pieces: Vec<(f64, Piece)> = pieces.into_iter().map(|(m, p)| (m / total, p)).collect();
        RealMeasure::new(&pieces)
    }

    /// Displacement interpolation: the quantile function is
    /// `(1 - s) G_self + s G_other`.
    pub fn interpolate(&self, other: &RealMeasure, s: f64) -> RealMeasure {
        let pieces: Vec<(f64, Piece)> = self
            .stretches(other)
            .iter()
            .filter(|st| st.q > st.p)
            .map(|st| {
                let lo = (1.0 - s) * st.a.0 + s * st.b.0;
                let hi = ((1.0 - s) * st.a.1 + s * st.b.1).max(lo);
                (st.q - st.p, Piece::Segment { lo, hi })
            })
            .collect();
        RealMeasure::new(&pieces).expect("convex combination of quantile functions is monotone")
    }

    /// Quadratic Wasserstein distance, integrated exactly piece by piece.
    pub fn w2(&self, other: &RealMeasure) -> f64 {
        self.w2_squared(other).sqrt()
    }

    pub fn w2_squared(&self, other: &RealMeasure) -> f64 {
        self.stretches(other)
            .iter()
            .map(|s| {
                let d0 = s.a.0 - s.b.0;
                let d1 = s.a.1 - s.b.1;
                (s.q - s.p) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0
            })
            .sum::<f64>()
            .max(0.0)
    }

    /// Kolmogorov distance `sup_x |F_self(x) - F_other(x)|`.
    pub fn kolmogorov(&self, other: &RealMeasure) -> f64 {
        let mut xs = self.x_breakpoints();
        xs.extend(other.x_breakpoints());
        xs.iter()
            .map(|&x| {
                let d1 = (self.cdf(x) - other.cdf(x)).abs();
                let d2 = (self.cdf_left(x) - other.cdf_left(x)).abs();
                d1.max(d2)
            })
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &RealMeasure, eps: f64) -> bool {
        self.kolmogorov(other) <= eps
    }

    /// Atoms as `(x, w)` and segments as `(lo, hi, w)`.
    pub fn to_mixture(&self) -> (Vec<(f64, f64)>, Vec<(f64, f64, f64)>) {
        let mut atoms = Vec::new();
        let mut segments = Vec::new();
        for (w, p) in self.weighted_pieces() {
            match p {
                Piece::Atom(x) => atoms.push((x, w)),
                Piece::Segment { lo, hi } => segments.push((lo, hi, w)),
            }
        }
        (atoms, segments)
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureLiteral {
    #[serde(default)]
    atoms: Vec<[f64; 2]>,
    #[serde(default)]
    segments: Vec<[f64; 3]>,
}

impl Serialize for RealMeasure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (atoms, segments) = self.to_mixture();
        MeasureLiteral {
            atoms: atoms.into_iter().map(|(x, w)| [x, w]).collect(),
            segments: segments.into_iter().map(|(a, b, w)| [a, b, w]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RealMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let lit = MeasureLiteral::deserialize(d)?;
        let atoms: Vec<(f64, f64)> = lit.atoms.iter().map(|a| (a[0], a[1])).collect();
        let segs: Vec<(f64, f64, f64)> = lit.segments.iter().map(|s| (s[0], s[1], s[2])).collect();
        RealMeasure::from_mixture(&atoms, &segs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_atoms() -> RealMeasure {
        RealMeasure::new(&[(0.5, Piece::Atom(0.0)), (0.5, Piece::Atom(1.0))]).unwrap()
    }

    #[test]
    fn construction_examples() {
        let d = RealMeasure::new(&[(1.0, Piece::Atom(0.0))]).unwrap();
        assert_eq!(d.pieces().len(), 1);
        let t = two_atoms();
        assert_eq!(t.levels(), &[0.0, 0.5, 1.0]);
        let u = RealMeasure::new(&[(1.0, Piece::Segment { lo: 0.0, hi: 1.0 })]).unwrap();
        assert_eq!(u.g(0.3), 0.3);
    }

    #[test]
    fn construction_errors() {
        let e = RealMeasure::new(&[(0.5, Piece::Atom(1.0)), (0.5, Piece::Atom(0.0))]);
        assert_eq!(e, Err(Error::NonMonotone { index: 1 }));
        let e = RealMeasure::new(&[(0.5, Piece::Atom(0.0)), (0.6, Piece::Atom(1.0))]);
        assert!(matches!(e, Err(Error::BadMass { .. })));
    }

    #[test]
    fn canonical_merges() {
        let m = RealMeasure::new(&[
            (0.25, Piece::Segment { lo: 0.0, hi: 0.25 }),
            (0.25, Piece::Segment { lo: 0.25, hi: 0.5 }),
            (0.25, Piece::Atom(2.0)),
            (0.25, Piece::Atom(2.0)),
        ])
        .unwrap();
        assert_eq!(m.pieces().len(), 2);
        assert_eq!(m.levels(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn quantile_examples() {
        let t = two_atoms();
        assert_eq!(t.quantile(0.5).unwrap(), 0.0);
        assert_eq!(t.quantile(0.75).unwrap(), 1.0);
        assert_eq!(RealMeasure::uniform(0.0, 1.0).quantile(0.3).unwrap(), 0.3);
        assert_eq!(t.quantile(0.0), Err(Error::OutOfRange(0.0)));
        assert_eq!(t.quantile(1.2), Err(Error::OutOfRange(1.2)));
        assert_eq!(t.quantile(1.0).unwrap(), 1.0);
    }

    #[test]
    fn cdf_examples() {
        let t = two_atoms();
        assert!((RealMeasure::uniform(0.0, 1.0).cdf(0.3) - 0.3).abs() < 1e-15);
        assert_eq!(t.cdf(0.0), 0.5);
        assert_eq!(t.cdf(-1.0), 0.0);
        assert_eq!(t.cdf_left(0.0), 0.0);
        assert_eq!(t.mass_at(1.0), 0.5);
    }

    #[test]
    fn atoms_examples() {
        let t = two_atoms();
        let a = t.atoms();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0], AtomInfo { location: 0.0, weight: 0.5, level_interval: (0.0, 0.5) });
        assert_eq!(a[1], AtomInfo { location: 1.0, weight: 0.5, level_interval: (0.5, 1.0) });
        assert!(RealMeasure::uniform(0.0, 1.0).atoms().is_empty());
        assert_eq!(RealMeasure::dirac(0.0).atoms()[0].level_interval, (0.0, 1.0));
    }

    #[test]
    fn sto_examples() {
        let d0 = RealMeasure::dirac(0.0);
        let d1 = RealMeasure::dirac(1.0);
        assert!(d0.sto_leq(&d1));
        assert!(!d1.sto_leq(&d0));
        let m = RealMeasure::discrete(&[(0.0, 0.5), (2.0, 0.5)]).unwrap();
        assert!(m.sto_leq(&m));
        assert!(!m.sto_leq(&d1));
        assert!(!d1.sto_leq(&m));
    }

    #[test]
    fn stosup_examples() {
        let m = RealMeasure::discrete(&[(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let d1 = RealMeasure::dirac(1.0);
        let sup = RealMeasure::stosup(&[m.clone(), d1.clone()]).unwrap();
        let expected = RealMeasure::discrete(&[(1.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(sup, expected);
        assert_eq!(RealMeasure::stosup(&[m.clone()]).unwrap(), m);
        let d0 = RealMeasure::dirac(0.0);
        assert_eq!(RealMeasure::stosup(&[d0.clone(), d1.clone()]).unwrap(), d1);
        assert_eq!(RealMeasure::stoinf(&[d0.clone(), d1]).unwrap(), d0);
        assert!(RealMeasure::stosup(&[]).is_err());
    }

    #[test]
    fn stosup_of_crossing_segments_splits_at_crossing() {
        // G1(u) = u, G2(u) = 1 - u restricted to a monotone variant: 0.5 constant.
        let a = RealMeasure::uniform(0.0, 1.0);
        let b = RealMeasure::dirac(0.5);
        let sup = RealMeasure::stosup(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(sup.levels(), &[0.0, 0.5, 1.0]);
        assert_eq!(sup.pieces()[0], Piece::Atom(0.5));
        assert_eq!(sup.g(0.75), 0.75);
        let inf = RealMeasure::stoinf(&[a, b]).unwrap();
        assert_eq!(inf.g(0.25), 0.25);
        assert_eq!(inf.g(0.9), 0.5);
    }

    /// Midpoint-rule quadrature of the squared quantile difference.
    fn w2_quadrature(a: &RealMeasure, b: &RealMeasure, n: usize) -> f64 {
        let s: f64 = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                (a.g(u) - b.g(u)).powi(2)
            })
            .sum();
        (s / n as f64).sqrt()
    }

    #[test]
    fn w2_examples() {
        assert_eq!(RealMeasure::dirac(0.0).w2(&RealMeasure::dirac(1.0)), 1.0);
        let t = 0.37;
        let d = RealMeasure::uniform(0.0, 1.0).w2(&RealMeasure::uniform(t, t + 1.0));
        assert!((d - t).abs() < 1e-15);
        // sqrt(1/3), frozen from the midpoint quadrature below.
        let oracle = w2_quadrature(&RealMeasure::dirac(0.0), &RealMeasure::uniform(0.0, 1.0), 200_000);
        assert!((oracle - 0.577_350_269_189_625_8).abs() < 1e-9);
        let exact = RealMeasure::dirac(0.0).w2(&RealMeasure::uniform(0.0, 1.0));
        assert!((exact - 0.577_350_269_189_625_8).abs() < 1e-15);
    }

    #[test]
    fn mixture_with_atom_inside_segment() {
        let m = RealMeasure::from_mixture(&[(0.0, 0.5)], &[(-0.5, 0.5, 0.5)]).unwrap();
        assert_eq!(m.levels(), &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(m.atoms()[0].level_interval, (0.25, 0.75));
        assert!((m.cdf(0.0) - 0.75).abs() < 1e-15);
        assert!((m.cdf_left(0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn literal_round_trip() {
        let m = RealMeasure::from_mixture(&[(0.0, 0.25), (3.0, 0.25)], &[(1.0, 2.0, 0.5)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: RealMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let lit: RealMeasure = serde_json::from_str(r#"{"atoms":[[0,0.5],[1,0.5]]}"#).unwrap();
        assert_eq!(lit, two_atoms());
    }

    #[test]
    fn pushforward_matches_cdf_within_dkw() {
        // DKW at confidence 0.999: eps = sqrt(ln(2/0.001) / (2 N)).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let eps = ((2.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
        for _ in 0..5 {
            let m = random::measure(&mut rng, 5);
            let mut xs: Vec<f64> = (0..n).map(|_| m.g(random::open_unit(&mut rng))).collect();
            xs.sort_by(f64::total_cmp);
            let mut dev: f64 = 0.0;
            for &x in &xs {
                let le = xs.partition_point(|&y| y <= x) as f64 / n as f64;
                let lt = xs.partition_point(|&y| y < x) as f64 / n as f64;
                dev = dev.max((m.cdf(x) - le).abs()).max((m.cdf_left(x) - lt).abs());
            }
            assert!(dev <= eps, "dev {dev} > {eps}");
        }
    }

    proptest! {
        #[test]
        fn section_identity(seed in any::<u64>(), q in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random::measure(&mut rng, 6);
            let (lo, hi) = m.support();
            let x = lo + q * (hi - lo);
            let level = m.cdf(x);
            if level > 0.0 {
                let back = m.g(level);
                prop_assert!(back <= x + 1e-9);
            }
            // On the support's breakpoints the section is exact.
            for b in m.x_breakpoints() {
                let l = m.cdf(b);
                if l > 0.0 && m.cdf_left(b) < l {
                    prop_assert!((m.g(l) - b).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn atoms_partition_levels(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random::measure(&mut rng, 6);
            let atoms = m.atoms();
            let atom_mass: f64 = atoms.iter().map(|a| a.weight).sum();
            let seg_mass: f64 = m.weighted_pieces().iter().filter(|p| matches!(p.1, Piece::Segment{..})).map(|p| p.0).sum();
            prop_assert!((atom_mass + seg_mass - 1.0).abs() < 1e-12);
            for a in &atoms {
                prop_assert!((a.level_interval.1 - a.level_interval.0 - a.weight).abs() < 1e-15);
                prop_assert!((m.mass_at(a.location) - a.weight).abs() < 1e-12);
            }
            for w in atoms.windows(2) {
                prop_assert!(w[0].level_interval.1 <= w[1].level_interval.0);
            }
        }

        #[test]
        fn sto_is_partial_order(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random::measure(&mut rng, 4);
            let b = random::shifted_up(&mut rng, &a);
            let c = random::shifted_up(&mut rng, &b);
            prop_assert!(a.sto_leq(&a));
            prop_assert!(a.sto_leq(&b) && b.sto_leq(&c) && a.sto_leq(&c));
            if a.sto_leq(&b) && b.sto_leq(&a) {
                prop_assert!(a.approx_eq(&b, 1e-12));
            }
            let d = random::measure(&mut rng, 4);
            if a.sto_leq(&d) && d.sto_leq(&c) {
                prop_assert!(a.sto_leq(&c));
            }
        }

        #[test]
        fn stosup_is_least_upper_bound(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ms: Vec<RealMeasure> = (0..3).map(|_| random::measure(&mut rng, 4)).collect();
            let sup = RealMeasure::stosup(&ms).unwrap();
            for m in &ms {
                prop_assert!(m.sto_leq(&sup));
            }
            // Any common upper bound dominates the supremum.
            let bound = random::shifted_up(&mut rng, &sup);
            prop_assert!(ms.iter().all(|m| m.sto_leq(&bound)));
            prop_assert!(sup.sto_leq(&bound));
            let inf = RealMeasure::stoinf(&ms).unwrap();
            for m in &ms {
                prop_assert!(inf.sto_leq(m));
            }
        }

        #[test]
        fn w2_is_metric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random::measure(&mut rng, 5);
            let b = random::measure(&mut rng, 5);
            let c = random::measure(&mut rng, 5);
            prop_assert!(a.w2(&a) < 1e-7);
            prop_assert!((a.w2(&b) - b.w2(&a)).abs() < 1e-12);
            prop_assert!(a.w2(&c) <= a.w2(&b) + b.w2(&c) + 1e-12);
        }
    }
}
