//! Atomic level sets, the averaging kernels `ℓ_r`, level couplings `L_R`
//! over finite time sets and their limits over intervals, and detection of
//! essential atomic times.

mod family;

pub use family::{Background, Builtin, ExplicitFamily, MarginalFamily, TimeFunction};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{LevelCoupling, LevelKernel};
use crate::measure::RealMeasure;
use crate::tol;

/// Disjoint open subintervals of `(0,1)`: the levels merged by the atoms of
/// one marginal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicLevelSet {
    intervals: Vec<(f64, f64)>,
}

impl AtomicLevelSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.retain(|(a, b)| b - a > tol::REPR);
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(a, b) in &intervals {
            if a < -tol::REPR || b > 1.0 + tol::REPR {
                return Err(Error::OutOfRange(if a < 0.0 { a } else { b }));
            }
        }
        if intervals.windows(2).any(|w| w[1].0 < w[0].1 - tol::REPR) {
            return Err(Error::Invalid("atomic level intervals overlap".into()));
        }
        Ok(Self { intervals })
    }

    pub fn of(m: &RealMeasure) -> Self {
        Self { intervals: m.atoms().iter().map(|a| a.level_interval).collect() }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure of the set.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    fn same_as(&self, other: &AtomicLevelSet) -> bool {
        self.intervals.len() == other.intervals.len()
            && self
                .intervals
                .iter()
                .zip(&other.intervals)
                .all(|(a, b)| (a.0 - b.0).abs() <= tol::REPR && (a.1 - b.1).abs() <= tol::REPR)
    }
}

/// `ℓ_r`: identity outside the set, uniform averaging on each interval.
pub fn ell_of(a: &AtomicLevelSet) -> LevelKernel {
    LevelKernel::averaging(&a.intervals)
}

/// Interval of times, each end open or closed. A singleton is `[t,t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpan {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl TimeSpan {
    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn singleton(t: f64) -> Self {
        Self::closed(t, t)
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo || (self.hi == self.lo && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above && below
    }

    pub fn intersects(&self, other: &TimeSpan) -> bool {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        !TimeSpan { lo, hi, lo_closed, hi_closed }.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self { lo: -self.hi, hi: -self.lo, lo_closed: self.hi_closed, hi_closed: self.lo_closed }
    }

    pub fn length(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}

/// Stopping rule of the dyadic refinement of parametric families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    /// Threshold on the `ρ` gap between consecutive depths.
    pub tol: f64,
    /// Number of doublings allowed past the starting depth.
    pub max_doublings: u32,
}

impl Default for Refinement {
    fn default() -> Self {
        Self { tol: tol::REFINE, max_doublings: 20 }
    }
}

impl Refinement {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Evidence attached to a refined limit.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCertificate {
    /// Dyadic depth of the returned coupling.
    pub depth: u32,
    /// `ρ` between consecutive depths, oldest first.
    pub gaps: Vec<f64>,
    /// Every depth was `≼lo` the next one.
    pub monotone: bool,
}

/// `L_R` for a finite set of times, composed in increasing time order.
pub fn l_finite(family: &MarginalFamily, times: &[f64]) -> Result<LevelCoupling> {
    let mut ts = times.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let sets = ts.iter().map(|&t| family.atomic_levels(t)).collect::<Result<Vec<_>>>()?;
    Ok(LevelCoupling::new(compose_sets(&sets)?))
}

/// Composition of `ℓ` over a time-ordered list of level sets. Repeated
/// neighbours are dropped since `ℓ_r ℓ_r = ℓ_r`.
pub(crate) fn compose_sets(sets: &[AtomicLevelSet]) -> Result<LevelKernel> {
    let mut kept: Vec<&AtomicLevelSet> = Vec::with_capacity(sets.len());
    for s in sets {
        if s.is_empty() {
            continue;
        }
        if kept.last().is_some_and(|l| l.same_as(s)) {
            continue;
        }
        kept.push(s);
    }
    const CHUNK: usize = 16;
    let mut partial: Vec<LevelKernel> = kept
        .par_chunks(CHUNK)
        .map(|c| c.iter().try_fold(LevelKernel::identity(), |acc, s| acc.compose(&ell_of(s))))
        .collect::<Result<Vec<_>>>()?;
    // Pairwise reduction keeps both operands of each composition small.
    while partial.len() > 1 {
        partial = partial
            .par_chunks(2)
            .map(|p| if p.len() == 2 { p[0].compose(&p[1]) } else { Ok(p[0].clone()) })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(partial.pop().unwrap_or_else(LevelKernel::identity))
}

/// Refinement points at depth `n`: multiples of `2^-n` inside the span,
/// `3n` points approaching each open end geometrically, the family's
/// anchors inside the span, and the closed endpoints.
pub fn refinement_points(family: &MarginalFamily, span: &TimeSpan, n: u32, extra: &[f64]) -> Vec<f64> {
    let step = (0.5f64).powi(n as i32);
    let mut pts: Vec<f64> = Vec::new();
    let first = (span.lo / step).floor() as i64;
    let last = (span.hi / step).ceil() as i64;
    for k in first..=last {
        let t = k as f64 * step;
        if span.contains(t) {
            pts.push(t);
        }
    }
    // Open ends get points clustering geometrically, so the unreached
    // boundary costs `8^-n` instead of `2^-n`.
    let len = span.hi - span.lo;
    for j in 1..=3 * n as i32 {
        let d = len * (0.5f64).powi(j);
        if !span.lo_closed {
            pts.push(span.lo + d);
        }
        if !span.hi_closed {
            pts.push(span.hi - d);
        }
    }
    pts.retain(|&t| span.contains(t));
    pts.extend(family.anchors().into_iter().chain(extra.iter().copied()).filter(|&t| span.contains(t)));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn start_depth(span: &TimeSpan) -> u32 {
    let len = span.length();
    if len <= 0.0 {
        return 0;
    }
    let mut n = 0i32;
    while (0.5f64).powi(n) > len / 2.0 {
        n += 1;
    }
    while n > 0 && (0.5f64).powi(n - 1) <= len / 2.0 {
        n -= 1;
    }
    n.max(0) as u32
}

/// `L_{R_n}` with `R_n` the refinement points of depth `n` in `span`.
pub fn l_at_depth(family: &MarginalFamily, span: &TimeSpan, n: u32) -> Result<LevelCoupling> {
    let pts = refinement_points(family, span, n, &[]);
    l_finite(family, &pts)
}

/// `L` over a span. Exact for explicit families; a refined limit with its
/// certificate for parametric ones.
pub fn l_span(
    family: &MarginalFamily,
    span: &TimeSpan,
    refinement: &Refinement,
) -> Result<(LevelCoupling, Option<LimitCertificate>)> {
    l_span_with(family, span, refinement, &[])
}

fn l_span_with(
    family: &MarginalFamily,
    span: &TimeSpan,
    refinement: &Refinement,
    extra: &[f64],
) -> Result<(LevelCoupling, Option<LimitCertificate>)> {
    if span.is_empty() {
        return Ok((LevelCoupling::identity(), None));
    }
    if family.is_exact() {
        let sets = family.exact_sets_in(span)?;
        return Ok((LevelCoupling::new(compose_sets(&sets)?), None));
    }
    let n0 = start_depth(span);
    let at = |n: u32| -> Result<LevelCoupling> {
        let pts = refinement_points(family, span, n, extra);
        let sets = pts.iter().map(|&t| family.atomic_levels(t)).collect::<Result<Vec<_>>>()?;
        Ok(LevelCoupling::new(compose_sets(&sets)?))
    };
    let mut prev = at(n0)?;
    let mut gaps = Vec::new();
    let mut monotone = true;
    for n in n0 + 1..=n0 + refinement.max_doublings {
        let next = at(n)?;
        let (gap, ordered) = prev.compare(&next)?;
        gaps.push(gap);
        monotone &= ordered;
        prev = next;
        if gaps.len() >= 2 && gaps[gaps.len() - 2..].iter().all(|&g| g < refinement.tol) {
            return Ok((prev, Some(LimitCertificate { depth: n, gaps, monotone })));
        }
    }
    Err(Error::NoConvergence { depth: n0 + refinement.max_doublings, last_gap: gaps.last().copied().unwrap_or(f64::NAN) })
}

/// `L_{]s,t[}`.
pub fn l_interval(family: &MarginalFamily, s: f64, t: f64, tol: f64) -> Result<LevelCoupling> {
    if s >= t {
        return Err(Error::Invalid(format!("empty interval ({s}, {t})")));
    }
    Ok(l_span(family, &TimeSpan::open(s, t), &Refinement::with_tol(tol))?.0)
}

/// Verdict of the essential-interval test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Essential {
    Yes,
    No,
    /// The gap lies within a factor 10 of the tolerance.
    Indeterminate,
}

impl Essential {
    pub fn from_gap(gap: f64, tol: f64) -> Self {
        if gap > 10.0 * tol {
            Essential::Yes
        } else if gap < tol / 10.0 {
            Essential::No
        } else {
            Essential::Indeterminate
        }
    }
}

/// Whether the closed interval `interval` (possibly a singleton) is
/// essential inside the probe `]s,t[`. Returns the verdict and the gap
/// `ρ(L_{]s,t[}, L_{]s,a[} L_{]b,t[})`.
pub fn essential(
    family: &MarginalFamily,
    interval: (f64, f64),
    probe: (f64, f64),
    tol: f64,
) -> Result<(Essential, f64)> {
    let (a, b) = interval;
    let (s, t) = probe;
    if !(s < a && a <= b && b < t) {
        return Err(Error::Invalid(format!("probe ({s}, {t}) must strictly contain [{a}, {b}]")));
    }
    let r = Refinement::with_tol(tol);
    let whole = l_span_with(family, &TimeSpan::open(s, t), &r, &[a, b])?.0;
    let left = l_span(family, &TimeSpan::open(s, a), &r)?.0;
    let right = l_span(family, &TimeSpan::open(b, t), &r)?.0;
    let split = left.compose(&right)?;
    let gap = whole.rho(&split)?;
    Ok((Essential::from_gap(gap, tol), gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::LevelDensity;

    fn flag() -> MarginalFamily {
        let two = RealMeasure::discrete(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        MarginalFamily::Explicit(
            ExplicitFamily::new(
                vec![(-0.5, two.clone()), (0.0, RealMeasure::dirac(0.0)), (0.5, two)],
                vec![],
                Background::Undefined,
                true,
            )
            .unwrap(),
        )
    }

    #[test]
    fn ell_examples() {
        assert_eq!(ell_of(&AtomicLevelSet::default()), LevelKernel::identity());
        let full = ell_of(&AtomicLevelSet::new(vec![(0.0, 1.0)]).unwrap());
        assert!(LevelCoupling::new(full).rho(&LevelCoupling::product()).unwrap() < 1e-15);
        let k = ell_of(&AtomicLevelSet::new(vec![(1.0 / 3.0, 5.0 / 6.0)]).unwrap());
        assert!((k.row_cdf(0.5, 0.5) - (0.5 - 1.0 / 3.0) / 0.5).abs() < 1e-12);
        assert_eq!(k.row_cdf(0.9, 0.89), 0.0);
        assert_eq!(k.row_cdf(0.9, 0.91), 1.0);
    }

    #[test]
    fn flag_family_mixes_completely() {
        let l = l_finite(&flag(), &[-0.5, 0.0, 0.5]).unwrap();
        assert!(l.rho(&LevelCoupling::product()).unwrap() < 1e-12);
    }

    #[test]
    fn two_atom_density_after_one_step() {
        let two = |a: f64| RealMeasure::discrete(&[(0.0, a), (1.0, 1.0 - a)]).unwrap();
        let fam = MarginalFamily::Explicit(
            ExplicitFamily::new(vec![(0.0, two(0.5)), (1.0, two(0.6))], vec![], Background::Undefined, true).unwrap(),
        );
        let l = l_finite(&fam, &[0.0, 1.0]).unwrap();
        let theta = LevelDensity::lebesgue().restrict(0.5).normalize().unwrap();
        let out = l.kernel().apply(&theta);
        assert!((out.density_at(0.3) - 1.0 / 0.6).abs() < 1e-12);
        assert!(out.density_at(0.8).abs() < 1e-12);
    }

    #[test]
    fn span_membership() {
        let s = TimeSpan::open(0.0, 1.0);
        assert!(!s.contains(0.0) && s.contains(0.5));
        assert!(!s.intersects(&TimeSpan::closed(1.0, 2.0)));
        assert!(TimeSpan::closed(0.0, 1.0).intersects(&TimeSpan::closed(1.0, 2.0)));
        assert_eq!(start_depth(&TimeSpan::open(0.0, 1.0)), 1);
        assert_eq!(start_depth(&TimeSpan::open(0.0, 1e-3)), 11);
    }

    #[test]
    fn diffuse_parametric_limit_is_identity() {
        let fam = MarginalFamily::Parametric(Builtin::UniformShift);
        let (l, cert) = l_span(&fam, &TimeSpan::open(0.0, 1.0), &Refinement::default()).unwrap();
        assert_eq!(l, LevelCoupling::identity());
        assert!(cert.unwrap().monotone);
    }

    #[test]
    fn atom_lower_levels_limit() {
        let b = TimeFunction::PiecewiseLinear(vec![(0.0, 0.2), (0.5, 0.4), (1.0, 0.1)]);
        let fam = MarginalFamily::Parametric(Builtin::AtomLowerLevels { b });
        let (l, _) = l_span(&fam, &TimeSpan::closed(0.0, 1.0), &Refinement::default()).unwrap();
        let alpha = 0.4;
        // Below α the row is uniform on (0, α); above it the identity.
        assert!((l.kernel().row_cdf(0.1, 0.2) - 0.2 / alpha).abs() < 1e-9);
        assert!((l.kernel().row_cdf(0.7, 0.69)).abs() < 1e-9);
        assert!((l.kernel().row_cdf(0.7, 0.71) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn essential_singleton() {
        let fam = MarginalFamily::Explicit(
            ExplicitFamily::new(
                vec![(-1.0, RealMeasure::uniform(0.0, 1.0)), (0.0, RealMeasure::dirac(0.0)), (1.0, RealMeasure::uniform(0.0, 1.0))],
                vec![],
                Background::Interpolate,
                true,
            )
            .unwrap(),
        );
        let (v, gap) = essential(&fam, (0.0, 0.0), (-0.5, 0.5), 1e-6).unwrap();
        assert_eq!(v, Essential::Yes);
        assert!((gap - 0.25).abs() < 1e-12);
        let (v, _) = essential(&fam, (0.2, 0.2), (-0.5 + 0.6, 0.5), 1e-6).unwrap();
        assert_eq!(v, Essential::No);
    }
}
