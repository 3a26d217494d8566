use crate::error::{Error, Result};
use crate::measure::RealMeasure;
use crate::tol;

use super::{AtomicLevelSet, TimeSpan};

/// Real function of time used as a parameter of builtin families.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeFunction {
    /// Linear interpolation between knots, constant outside.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// Coefficients in increasing degree.
    Polynomial(Vec<f64>),
}

impl TimeFunction {
    pub fn constant(c: f64) -> Self {
        TimeFunction::Polynomial(vec![c])
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeFunction::PiecewiseLinear(k) => {
                if k.is_empty() {
                    return 0.0;
                }
                if t <= k[0].0 {
                    return k[0].1;
                }
                for w in k.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    if t <= t1 {
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                k[k.len() - 1].1
            }
            TimeFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * t + a),
        }
    }

    /// Right derivative.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeFunction::PiecewiseLinear(k) => {
                for w in k.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    if t >= t0 && t < t1 {
                        return (v1 - v0) / (t1 - t0);
                    }
                }
                0.0
            }
            TimeFunction::Polynomial(c) => {
                c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, &a)| acc * t + i as f64 * a)
            }
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        match self {
            TimeFunction::PiecewiseLinear(k) => k.iter().map(|p| p.0).collect(),
            TimeFunction::Polynomial(_) => Vec::new(),
        }
    }
}

/// Builtin parametric families of marginals.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// Poisson law of parameter `rate * t`, `t ≥ 0`, truncated to at most
    /// `max_atoms + 1` atoms.
    Poisson { rate: f64, max_atoms: usize },
    /// Binomial law `B(n, t)`, `t ∈ [0,1]`.
    Binomial { n: u32 },
    /// `a(t) δ_0 + (1 - a(t)) δ_1`.
    TwoAtom { a: TimeFunction },
    /// `δ_{g(t)}`.
    DiracPath { g: TimeFunction },
    /// `½ U[t-2, t-1] + ½ U[1-t, 2-t]`.
    CrossingUniforms,
    /// `½ U[t-3/4, t-1/4] + ½ δ_0`.
    AtomOverDiffuse,
    /// `B(t) δ_0 + (1 - B(t)) Exp(1)`, the exponential replaced by its
    /// piecewise-linear CDF interpolant.
    AtomLowerLevels { b: TimeFunction },
    /// `U[t, t+1]`.
    UniformShift,
}

/// What an explicit family does at times it does not list.
#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    /// No marginal is defined there.
    Undefined,
    /// A fixed diffuse measure.
    Constant(RealMeasure),
    /// Displacement interpolation between the neighbouring listed times.
    Interpolate,
}

/// Finitely described family: isolated atomic times, closed regimes of
/// constant marginal, and a diffuse background.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitFamily {
    points: Vec<(f64, RealMeasure)>,
    regimes: Vec<(TimeSpan, RealMeasure)>,
    background: Background,
    atomically_complete: bool,
}

/// One listed item of an explicit family, in time order.
#[derive(Debug, Clone, PartialEq)]
enum Item<'a> {
    Point(f64, &'a RealMeasure),
    Regime(TimeSpan, &'a RealMeasure),
}

impl ExplicitFamily {
    pub fn new(
        points: Vec<(f64, RealMeasure)>,
        regimes: Vec<(TimeSpan, RealMeasure)>,
        background: Background,
        atomically_complete: bool,
    ) -> Result<Self> {
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Invalid("listed times must be strictly increasing".into()));
        }
        let mut regimes = regimes;
        regimes.sort_by(|a, b| a.0.lo.total_cmp(&b.0.lo));
        for w in regimes.windows(2) {
            if w[1].0.lo < w[0].0.hi || (w[1].0.lo == w[0].0.hi && w[0].0.hi_closed && w[1].0.lo_closed) {
                return Err(Error::Invalid("regimes overlap".into()));
            }
        }
        for (t, _) in &points {
            if regimes.iter().any(|r| r.0.contains(*t)) {
                return Err(Error::Invalid(format!("time {t} lies inside a regime")));
            }
        }
        if let Background::Constant(m) = &background {
            if !m.is_diffuse() {
                return Err(Error::Invalid("background measure must be diffuse".into()));
            }
        }
        let fam = Self { points, regimes, background, atomically_complete };
        if fam.background == Background::Interpolate {
            fam.check_interpolation()?;
        }
        Ok(fam)
    }

    pub fn points(&self) -> &[(f64, RealMeasure)] {
        &self.points
    }

    pub fn regimes(&self) -> &[(TimeSpan, RealMeasure)] {
        &self.regimes
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn atomically_complete(&self) -> bool {
        self.atomically_complete
    }

    /// Listed anchors with their measures, in time order; a regime
    /// contributes both ends.
    fn knots(&self) -> Vec<(f64, &RealMeasure)> {
        let mut k: Vec<(f64, &RealMeasure)> = self.points.iter().map(|(t, m)| (*t, m)).collect();
        for (span, m) in &self.regimes {
            k.push((span.lo, m));
            k.push((span.hi, m));
        }
        k.sort_by(|a, b| a.0.total_cmp(&b.0));
        k
    }

    fn check_interpolation(&self) -> Result<()> {
        let k = self.knots();
        for w in k.windows(2) {
            if w[1].0 - w[0].0 <= tol::REPR || std::ptr::eq(w[0].1, w[1].1) {
                continue;
            }
            let a = w[0].1.atoms();
            let b = w[1].1.atoms();
            for x in &a {
                for y in &b {
                    let lo = x.level_interval.0.max(y.level_interval.0);
                    let hi = x.level_interval.1.min(y.level_interval.1);
                    if hi - lo > tol::REPR {
                        return Err(Error::Invalid(format!(
                            "interpolating between times {} and {} creates atoms",
                            w[0].0, w[1].0
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn listed(&self, t: f64) -> Option<&RealMeasure> {
        if let Some((_, m)) = self.points.iter().find(|(s, _)| (s - t).abs() <= tol::REPR) {
            return Some(m);
        }
        self.regimes.iter().find(|(span, _)| span.contains(t)).map(|(_, m)| m)
    }

    pub fn marginal(&self, t: f64) -> Result<RealMeasure> {
        if let Some(m) = self.listed(t) {
            return Ok(m.clone());
        }
        match &self.background {
            Background::Undefined => Err(Error::UndefinedTime(t)),
            Background::Constant(m) => Ok(m.clone()),
            Background::Interpolate => {
                let k = self.knots();
                let after = k.partition_point(|p| p.0 < t);
                if after == 0 {
                    return k.first().map(|p| p.1.clone()).ok_or(Error::UndefinedTime(t));
                }
                if after == k.len() {
                    return Ok(k[k.len() - 1].1.clone());
                }
                let (t0, m0) = k[after - 1];
                let (t1, m1) = k[after];
                Ok(m0.interpolate(m1, (t - t0) / (t1 - t0)))
            }
        }
    }

    fn items_in(&self, span: &TimeSpan) -> Vec<Item<'_>> {
        let mut items: Vec<(f64, Item<'_>)> = Vec::new();
        for (t, m) in &self.points {
            if span.contains(*t) {
                items.push((*t, Item::Point(*t, m)));
            }
        }
        for (r, m) in &self.regimes {
            if r.intersects(span) {
                items.push((r.lo, Item::Regime(*r, m)));
            }
        }
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        items.into_iter().map(|p| p.1).collect()
    }

    /// Atomic level sets met inside `span`, in time order. A regime counts
    /// once: its averaging kernel is idempotent.
    pub fn atomic_sets_in(&self, span: &TimeSpan) -> Result<Vec<AtomicLevelSet>> {
        if !self.atomically_complete {
            return Err(Error::IncompleteFamily);
        }
        Ok(self
            .items_in(span)
            .into_iter()
            .map(|it| match it {
                Item::Point(_, m) | Item::Regime(_, m) => AtomicLevelSet::of(m),
            })
            .filter(|a| !a.is_empty())
            .collect())
    }

    /// Every time at which the listed marginal changes.
    pub fn anchors(&self) -> Vec<f64> {
        self.knots().iter().map(|k| k.0).collect()
    }
}

/// Time-indexed family of probability measures on the real line.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalFamily {
    Explicit(ExplicitFamily),
    Parametric(Builtin),
    /// The family `t ↦ μ_{-t}`.
    Reversed(Box<MarginalFamily>),
}

fn exponential_interpolant() -> RealMeasure {
    // Nodes x_i = i ln2 / 2 have CDF 1 - 2^{-i/2}; the tail beyond the last
    // node carries less than 1e-12.
    let nodes: Vec<f64> = (0..=80).map(|i| i as f64 * std::f64::consts::LN_2 / 2.0).collect();
    let cdf = |x: f64| 1.0 - (-x).exp();
    let pieces: Vec<(f64, crate::measure::Piece)> = nodes
        .windows(2)
        .map(|w| (cdf(w[1]) - cdf(w[0]), crate::measure::Piece::Segment { lo: w[0], hi: w[1] }))
        .collect();
    let total: f64 = pieces.iter().map(|p| p.0).sum();
    let pieces: Vec<_> = pieces.into_iter().map(|(m, p)| (m / total, p)).collect();
    RealMeasure::new(&pieces).expect("exponential interpolant")
}

/// Drops empty atoms and renormalizes.
fn prune(atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let kept: Vec<(f64, f64)> = atoms.into_iter().filter(|a| a.1 > 0.0).collect();
    let total: f64 = kept.iter().map(|a| a.1).sum();
    kept.into_iter().map(|(x, w)| (x, w / total)).collect()
}

fn poisson_weights(lambda: f64, max_atoms: usize) -> Vec<(f64, f64)> {
    if lambda <= 0.0 {
        return vec![(0.0, 1.0)];
    }
    let mut p = (-lambda).exp();
    let mut acc = 0.0;
    let mut out = Vec::new();
    for k in 0..=max_atoms {
        if k > 0 {
            p *= lambda / k as f64;
        }
        out.push((k as f64, p));
        acc += p;
        if 1.0 - acc < tol::REPR && k as f64 > lambda {
            break;
        }
    }
    prune(out)
}

fn binomial_weights(n: u32, t: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut c = 1.0;
    for k in 0..=n {
        if k > 0 {
            c *= (n - k + 1) as f64 / k as f64;
        }
        let w = c * t.powi(k as i32) * (1.0 - t).powi((n - k) as i32);
        out.push((k as f64, w));
    }
    prune(out)
}

impl Builtin {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Builtin::Poisson { .. } => (0.0, f64::INFINITY),
            Builtin::Binomial { .. } => (0.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn marginal(&self, t: f64) -> Result<RealMeasure> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::UndefinedTime(t));
        }
        match self {
            Builtin::Poisson { rate, max_atoms } => RealMeasure::discrete(&poisson_weights(rate * t, *max_atoms)),
            Builtin::Binomial { n } => RealMeasure::discrete(&binomial_weights(*n, t)),
            Builtin::TwoAtom { a } => {
                let a = a.value(t).clamp(0.0, 1.0);
                RealMeasure::discrete(&prune(vec![(0.0, a), (1.0, 1.0 - a)]))
            }
            Builtin::DiracPath { g } => Ok(RealMeasure::dirac(g.value(t))),
            Builtin::CrossingUniforms => {
                RealMeasure::from_mixture(&[], &[(t - 2.0, t - 1.0, 0.5), (1.0 - t, 2.0 - t, 0.5)])
            }
            Builtin::AtomOverDiffuse => RealMeasure::from_mixture(&[(0.0, 0.5)], &[(t - 0.75, t - 0.25, 0.5)]),
            Builtin::AtomLowerLevels { b } => {
                let b = b.value(t).clamp(0.0, 1.0);
                let exp = exponential_interpolant();
                RealMeasure::concat(&[(b, &RealMeasure::dirac(0.0)), (1.0 - b, &exp)])
            }
            Builtin::UniformShift => Ok(RealMeasure::uniform(t, t + 1.0)),
        }
    }

    /// Times where the atomic structure may change non-smoothly.
    pub fn anchors(&self) -> Vec<f64> {
        match self {
            Builtin::Poisson { .. } => vec![0.0],
            Builtin::Binomial { .. } => vec![0.0, 1.0],
            Builtin::TwoAtom { a } => a.knots(),
            Builtin::DiracPath { g } => g.knots(),
            Builtin::CrossingUniforms => vec![1.0, 1.5, 2.0],
            Builtin::AtomOverDiffuse => vec![0.25, 0.75],
            Builtin::AtomLowerLevels { b } => b.knots(),
            Builtin::UniformShift => Vec::new(),
        }
    }

    /// `d/dt μ_t((-∞, k])` where a closed form exists.
    pub fn cdf_derivative(&self, t: f64, k: f64) -> Option<f64> {
        match self {
            Builtin::Poisson { rate, max_atoms } => {
                let w = poisson_weights(rate * t, *max_atoms);
                let pk = w.iter().find(|a| a.0 == k.floor()).map_or(0.0, |a| a.1);
                Some(-rate * pk)
            }
            Builtin::Binomial { n } => {
                let k = k.floor();
                if k < 0.0 || k >= *n as f64 {
                    return Some(0.0);
                }
                // -n C(n-1, k) t^k (1-t)^(n-1-k)
                let m = *n - 1;
                let w = binomial_weights(m, t);
                let pk = w.iter().find(|a| a.0 == k).map_or(0.0, |a| a.1);
                Some(-(*n as f64) * pk)
            }
            Builtin::TwoAtom { a } => {
                if (0.0..1.0).contains(&k) {
                    Some(a.derivative(t))
                } else {
                    Some(0.0)
                }
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Poisson { .. } => "poisson",
            Builtin::Binomial { .. } => "binomial",
            Builtin::TwoAtom { .. } => "two_atom",
            Builtin::DiracPath { .. } => "dirac_path",
            Builtin::CrossingUniforms => "crossing_uniforms",
            Builtin::AtomOverDiffuse => "atom_over_diffuse",
            Builtin::AtomLowerLevels { .. } => "atom_lower_levels",
            Builtin::UniformShift => "uniform_shift",
        }
    }
}

impl MarginalFamily {
    pub fn marginal(&self, t: f64) -> Result<RealMeasure> {
        match self {
            MarginalFamily::Explicit(e) => e.marginal(t),
            MarginalFamily::Parametric(b) => b.marginal(t),
            MarginalFamily::Reversed(f) => f.marginal(-t),
        }
    }

    pub fn atomic_levels(&self, t: f64) -> Result<AtomicLevelSet> {
        match self {
            MarginalFamily::Explicit(e) => {
                if !e.atomically_complete {
                    return Err(Error::IncompleteFamily);
                }
                Ok(e.listed(t).map(AtomicLevelSet::of).unwrap_or_default())
            }
            _ => Ok(AtomicLevelSet::of(&self.marginal(t)?)),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            MarginalFamily::Explicit(_) => (f64::NEG_INFINITY, f64::INFINITY),
            MarginalFamily::Parametric(b) => b.domain(),
            MarginalFamily::Reversed(f) => {
                let (a, b) = f.domain();
                (-b, -a)
            }
        }
    }

    pub fn anchors(&self) -> Vec<f64> {
        match self {
            MarginalFamily::Explicit(e) => e.anchors(),
            MarginalFamily::Parametric(b) => b.anchors(),
            MarginalFamily::Reversed(f) => f.anchors().iter().rev().map(|t| -t).collect(),
        }
    }

    /// Level couplings over spans are exact compositions (no refinement).
    pub fn is_exact(&self) -> bool {
        match self {
            MarginalFamily::Explicit(_) => true,
            MarginalFamily::Parametric(_) => false,
            MarginalFamily::Reversed(f) => f.is_exact(),
        }
    }

    pub fn reversed(&self) -> MarginalFamily {
        match self {
            MarginalFamily::Reversed(f) => (**f).clone(),
            other => MarginalFamily::Reversed(Box::new(other.clone())),
        }
    }

    /// Atomic level sets of an exact family inside `span`, in time order.
    pub(crate) fn exact_sets_in(&self, span: &TimeSpan) -> Result<Vec<AtomicLevelSet>> {
        match self {
            MarginalFamily::Explicit(e) => e.atomic_sets_in(span),
            MarginalFamily::Reversed(f) => {
                let mut sets = f.exact_sets_in(&span.negated())?;
                sets.reverse();
                Ok(sets)
            }
            MarginalFamily::Parametric(_) => Err(Error::Invalid("parametric families need refinement".into())),
        }
    }

    pub fn name(&self) -> String {
        match self {
            MarginalFamily::Explicit(_) => "explicit".into(),
            MarginalFamily::Parametric(b) => b.name().into(),
            MarginalFamily::Reversed(f) => format!("reversed {}", f.name()),
        }
    }

    /// `d/dt μ_t((-∞, k])` in closed form, when available.
    pub fn cdf_derivative(&self, t: f64, k: f64) -> Option<f64> {
        match self {
            MarginalFamily::Parametric(b) => b.cdf_derivative(t, k),
            MarginalFamily::Reversed(f) => f.cdf_derivative(-t, k).map(|d| -d),
            MarginalFamily::Explicit(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_functions() {
        let p = TimeFunction::Polynomial(vec![0.0, 0.0, 1.0]);
        assert_eq!(p.value(3.0), 9.0);
        assert_eq!(p.derivative(3.0), 6.0);
        let l = TimeFunction::PiecewiseLinear(vec![(0.0, 1.0), (1.0, 0.0)]);
        assert_eq!(l.value(0.25), 0.75);
        assert_eq!(l.derivative(0.5), -1.0);
        assert_eq!(l.value(2.0), 0.0);
    }

    #[test]
    fn poisson_marginal_is_truncated_and_normalized() {
        let m = Builtin::Poisson { rate: 1.0, max_atoms: 40 }.marginal(0.5).unwrap();
        let atoms = m.atoms();
        assert!(atoms.len() < 20);
        assert!((atoms[0].weight - (-0.5f64).exp()).abs() < 1e-12);
        assert_eq!(Builtin::Poisson { rate: 1.0, max_atoms: 40 }.marginal(0.0).unwrap(), RealMeasure::dirac(0.0));
    }

    #[test]
    fn binomial_derivative_matches_rate() {
        let b = Builtin::Binomial { n: 5 };
        let t = 0.3;
        let m = b.marginal(t).unwrap();
        for k in 0..5 {
            let d = b.cdf_derivative(t, k as f64).unwrap();
            let rate = -d / m.mass_at(k as f64);
            assert!((rate - (5 - k) as f64 / (1.0 - t)).abs() < 1e-9);
        }
    }

    #[test]
    fn exponential_interpolant_is_close() {
        let e = exponential_interpolant();
        for x in [0.1, 0.5, 1.0, 3.0] {
            assert!((e.cdf(x) - (1.0 - (-x as f64).exp())).abs() < 0.02);
        }
        assert!(e.is_diffuse());
    }

    #[test]
    fn interpolated_background() {
        let f = ExplicitFamily::new(
            vec![(-1.0, RealMeasure::uniform(0.0, 1.0)), (0.0, RealMeasure::dirac(0.0)), (1.0, RealMeasure::uniform(0.0, 1.0))],
            vec![],
            Background::Interpolate,
            true,
        )
        .unwrap();
        let m = f.marginal(0.5).unwrap();
        assert!(m.approx_eq(&RealMeasure::uniform(0.0, 0.5), 1e-12));
        let bad = ExplicitFamily::new(
            vec![(0.0, RealMeasure::dirac(0.0)), (1.0, RealMeasure::dirac(1.0))],
            vec![],
            Background::Interpolate,
            true,
        );
        assert!(bad.is_err());
    }
}
