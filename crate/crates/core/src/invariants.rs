//! Named property checks run by `mq check`.
//!
//! Properties of the algebra (measures, kernels, level sets, the matrix
//! oracle) run on seeded random instances; properties of the process and of
//! the energy run on the family under test, at up to five times spread over
//! its window.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{action, disp_ensemble, energy, Partition};
use crate::error::{Error, Result};
use crate::io::{coupling_json, ensemble_csv, to_json, FamilySpec};
use crate::kernel::{
    losup_couplings, losup_tables, pushforward_coupling, GridCdf, LevelCoupling, LevelKernel, LosupOutcome,
    MarkovChainLaw, RealCoupling, Threshold,
};
use crate::levels::{
    ell_of, essential, l_finite, l_span, refinement_points, AtomicLevelSet, Essential, MarginalFamily, Refinement,
    TimeSpan,
};
use crate::measure::{Piece, RealMeasure};
use crate::mq::{PathEnsemble, ProcessHandle, ProcessVariant};
use crate::oracle::BinKernel;
use crate::random;
use crate::tol;

/// Monte-Carlo confidence used by every statistical bound.
pub const CONFIDENCE: f64 = 0.999;

/// Family, settings and cached computations shared by the checks.
pub struct Context {
    pub family: MarginalFamily,
    pub window: (f64, f64),
    pub seed: u64,
    /// Refinement tolerance for parametric limits.
    pub tol: f64,
    pub n_paths: usize,
    /// Number of random instances per algebraic property.
    pub cases: usize,
    steps: OnceLock<Result<BTreeMap<(usize, usize), LevelKernel>>>,
    ensemble: OnceLock<Result<PathEnsemble>>,
}

impl Context {
    pub fn new(family: MarginalFamily, window: (f64, f64)) -> Self {
        Self {
            family,
            window,
            seed: 0,
            tol: tol::REFINE,
            n_paths: 20_000,
            cases: 100,
            steps: OnceLock::new(),
            ensemble: OnceLock::new(),
        }
    }

    pub fn from_spec(spec: &FamilySpec) -> Self {
        Self { seed: spec.seed, tol: spec.refine_tol, ..Self::new(spec.family.clone(), spec.window) }
    }

    fn refinement(&self) -> Refinement {
        Refinement::with_tol(self.tol)
    }

    /// Allowed error of a comparison involving refined limits.
    fn slack(&self) -> f64 {
        if self.family.is_exact() {
            tol::CMP
        } else {
            tol::CMP + 10.0 * self.tol
        }
    }

    fn rng(&self, name: &str) -> ChaCha8Rng {
        // FNV-1a of the property name picks the stream.
        let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x1000_0000_01b3));
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(h);
        r
    }

    fn defined(&self, t: f64) -> bool {
        self.family.marginal(t).is_ok()
    }

    /// Up to five times of the window where the family is defined.
    pub fn sample_times(&self) -> Vec<f64> {
        let (a, b) = self.window;
        let mut ts: Vec<f64> = (0..=8).map(|i| a + (b - a) * i as f64 / 8.0).collect();
        ts.extend(self.family.anchors().into_iter().filter(|&t| t >= a && t <= b));
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() <= tol::REPR);
        ts.retain(|&t| self.defined(t));
        if ts.len() <= 5 {
            return ts;
        }
        let last = ts.len() - 1;
        let mut out: Vec<f64> = (0..5).map(|i| ts[(i * last + 2) / 4]).collect();
        out.dedup();
        out
    }

    fn handle(&self, variant: ProcessVariant) -> ProcessHandle {
        ProcessHandle::new(self.family.clone(), variant).with_refinement(self.refinement())
    }

    /// Markov-quantile level kernels between every pair of sample times.
    fn mq_steps(&self) -> Result<&BTreeMap<(usize, usize), LevelKernel>> {
        self.steps
            .get_or_init(|| {
                let ts = self.sample_times();
                let h = self.handle(ProcessVariant::MarkovQuantile);
                let pairs: Vec<(usize, usize)> =
                    (0..ts.len()).flat_map(|i| (i + 1..ts.len()).map(move |j| (i, j))).collect();
                pairs
                    .par_iter()
                    .map(|&(i, j)| Ok(((i, j), h.level_step(ts[i], ts[j])?)))
                    .collect::<Result<BTreeMap<_, _>>>()
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn mq_coupling(&self, i: usize, j: usize) -> Result<RealCoupling> {
        let ts = self.sample_times();
        let k = self.mq_steps()?.get(&(i, j)).ok_or_else(|| Error::Invalid("no such pair".into()))?;
        Ok(pushforward_coupling(&self.family.marginal(ts[i])?, &self.family.marginal(ts[j])?, &k.clone().into()))
    }

    /// Markov-quantile paths on the sample times.
    fn mq_ensemble(&self) -> Result<&PathEnsemble> {
        self.ensemble
            .get_or_init(|| {
                self.handle(ProcessVariant::MarkovQuantile).simulate(&self.sample_times(), self.n_paths, self.seed)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Uniform partition of the window, when the family is defined on it.
    fn window_partition(&self, m: usize) -> Option<Partition> {
        let p = Partition::uniform(self.window.0, self.window.1, m).ok()?;
        p.points().iter().all(|&t| self.defined(t)).then_some(p)
    }
}

/// Result of one property.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass(String),
    Fail(String),
    /// The family does not meet the hypotheses of the property.
    NotApplicable(String),
}

impl Outcome {
    pub fn passed(&self) -> bool {
        !matches!(self, Outcome::Fail(_))
    }

    pub fn detail(&self) -> &str {
        match self {
            Outcome::Pass(s) | Outcome::Fail(s) | Outcome::NotApplicable(s) => s,
        }
    }
}

pub struct Property {
    pub name: &'static str,
    pub check: fn(&Context) -> Result<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: &'static str,
    pub outcome: Outcome,
    pub seconds: f64,
}

fn within(worst: f64, bound: f64, what: &str) -> Outcome {
    let msg = format!("{what} {worst:.3e} (bound {bound:.1e})");
    if worst <= bound {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn tally(failures: usize, total: usize, first: Option<String>) -> Outcome {
    match first {
        None => Outcome::Pass(format!("{total} cases")),
        Some(f) => Outcome::Fail(format!("{failures} of {total} cases fail; first: {f}")),
    }
}

/// Counts failing cases, remembering the first message.
#[derive(Default)]
struct Tally {
    total: usize,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.total += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(msg());
            }
        }
    }

    fn outcome(self) -> Outcome {
        tally(self.failures, self.total, self.first)
    }
}

fn dkw(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

// ---------------------------------------------------------------- measure

fn quantile_cdf_section(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("measure.quantile_cdf_section");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let m = random::measure(&mut r, 6);
        for (_, p) in m.weighted_pieces() {
            let xs = match p {
                Piece::Atom(x) => vec![x],
                Piece::Segment { lo, hi } => vec![0.5 * (lo + hi), hi],
            };
            for x in xs {
                let q = m.cdf(x);
                if q > 0.0 {
                    let g = m.quantile(q)?;
                    t.check((g - x).abs() <= tol::CMP * (1.0 + x.abs()), || format!("G(F({x})) = {g}"));
                }
            }
        }
        for w in m.x_breakpoints().windows(2) {
            let x = 0.5 * (w[0] + w[1]);
            let q = m.cdf(x);
            if q > 0.0 {
                let g = m.quantile(q)?;
                t.check(g <= x + tol::REPR, || format!("G(F({x})) = {g} above {x}"));
            }
        }
    }
    Ok(t.outcome())
}

fn pushforward_law(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("measure.pushforward_law");
    let n = 10_000;
    let cases = ctx.cases.min(20);
    let bound = dkw(n, (1.0 - CONFIDENCE) / cases as f64);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let m = random::measure(&mut r, 6);
        let paths: Vec<Vec<f64>> = (0..n).map(|_| vec![m.g(random::open_unit(&mut r))]).collect();
        let e = PathEnsemble { times: vec![0.0], paths, seed: ctx.seed };
        worst = worst.max(e.kolmogorov(0, &m));
    }
    Ok(within(worst, bound, "largest Kolmogorov distance"))
}

fn sto_partial_order(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("measure.sto_partial_order");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let a = random::measure(&mut r, 5);
        let b = random::shifted_up(&mut r, &a);
        let c = random::shifted_up(&mut r, &b);
        t.check(a.sto_leq(&a), || "not reflexive".into());
        t.check(a.sto_leq(&b) && b.sto_leq(&c), || "shifted measure not above".into());
        t.check(a.sto_leq(&c), || "not transitive".into());
        if b.sto_leq(&a) {
            t.check(a.approx_eq(&b, tol::REPR), || "not antisymmetric".into());
        }
        let x = random::measure(&mut r, 3);
        let y = random::measure(&mut r, 3);
        if x.sto_leq(&y) && y.sto_leq(&x) {
            t.check(x.approx_eq(&y, tol::REPR), || "not antisymmetric".into());
        }
    }
    Ok(t.outcome())
}

fn stosup_least_upper_bound(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("measure.stosup_least_upper_bound");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let k = r.gen_range(2..=4);
        let set: Vec<RealMeasure> = (0..k).map(|_| random::measure(&mut r, 4)).collect();
        let sup = RealMeasure::stosup(&set)?;
        let inf = RealMeasure::stoinf(&set)?;
        t.check(set.iter().all(|m| m.sto_leq(&sup) && inf.sto_leq(m)), || "not a bound".into());
        let mut more = set.clone();
        more.push(random::measure(&mut r, 4));
        let upper = RealMeasure::stosup(&more)?;
        let lower = RealMeasure::stoinf(&more)?;
        let shifted = random::shifted_up(&mut r, &upper);
        t.check(sup.sto_leq(&upper) && sup.sto_leq(&shifted), || "stosup above an upper bound".into());
        t.check(lower.sto_leq(&inf), || "stoinf below a lower bound".into());
    }
    Ok(t.outcome())
}

fn w2_metric(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("measure.w2_metric");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let a = random::measure(&mut r, 5);
        let b = random::measure(&mut r, 5);
        let c = random::measure(&mut r, 5);
        let (ab, bc, ac) = (a.w2(&b), b.w2(&c), a.w2(&c));
        t.check(a.w2(&a) <= tol::REPR, || "w2(a,a) > 0".into());
        t.check((ab - b.w2(&a)).abs() <= tol::REPR, || "not symmetric".into());
        t.check(ac <= ab + bc + tol::REPR, || format!("triangle: {ac} > {ab} + {bc}"));
    }
    Ok(t.outcome())
}

fn atom_levels_partition(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("measure.atom_levels_partition");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let m = random::measure(&mut r, 6);
        let atoms = m.atoms();
        let (_, segments) = m.to_mixture();
        let atom_mass: f64 = atoms.iter().map(|a| a.weight).sum();
        let seg_mass: f64 = segments.iter().map(|s| s.2).sum();
        t.check((atom_mass + seg_mass - 1.0).abs() <= tol::REPR, || "total mass is not 1".into());
        t.check(
            atoms.iter().all(|a| (a.level_interval.1 - a.level_interval.0 - a.weight).abs() <= tol::REPR),
            || "atom weight differs from its level length".into(),
        );
        t.check(atoms.windows(2).all(|w| w[0].level_interval.1 <= w[1].level_interval.0 + tol::REPR), || {
            "atom level intervals overlap".into()
        });
        t.check((AtomicLevelSet::of(&m).measure() - atom_mass).abs() <= tol::REPR, || {
            "atomic level set misses mass".into()
        });
    }
    Ok(t.outcome())
}

fn stosup_not_a_limit(_: &Context) -> Result<Outcome> {
    let s = RealMeasure::stosup(&[RealMeasure::discrete(&[(0.0, 0.5), (2.0, 0.5)])?, RealMeasure::dirac(1.0)])?;
    let expect = RealMeasure::discrete(&[(1.0, 0.5), (2.0, 0.5)])?;
    Ok(if s == expect {
        Outcome::Pass("stosup{½(δ0+δ2), δ1} = ½(δ1+δ2)".into())
    } else {
        Outcome::Fail(format!("got {:?}", s.to_mixture()))
    })
}

// ----------------------------------------------------------------- kernel

fn ds_kernel(r: &mut ChaCha8Rng) -> LevelKernel {
    if r.gen_bool(0.5) {
        random::averaging_kernel(r, 16)
    } else {
        random::doubly_stochastic_kernel(r, 4)
    }
}

fn closure_canonical(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.closure_canonical");
    let mut t = Tally::default();
    let id = LevelKernel::identity();
    for _ in 0..ctx.cases {
        let bins = r.gen_range(2..=8);
        let k = random::kernel(&mut r, bins);
        let c1 = k.compose(&id)?;
        let c2 = c1.compose(&id)?;
        let c3 = id.compose(&c1)?;
        t.check(c1.approx_eq(&c2, tol::REPR) && c1.approx_eq(&c3, tol::REPR), || "canonical form not idempotent".into());
        t.check(LevelCoupling::new(k).rho(&LevelCoupling::new(c1))? <= tol::REPR, || "identity changes kernel".into());
        let d = ds_kernel(&mut r);
        let back = d.transpose()?.transpose()?;
        t.check(LevelCoupling::new(d).rho(&LevelCoupling::new(back))? <= tol::REPR, || "transpose twice".into());
    }
    Ok(t.outcome())
}

fn stationarity_preserved(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.stationarity_preserved");
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cases {
        let k = ds_kernel(&mut r).compose(&ds_kernel(&mut r))?;
        worst = worst.max(k.stationarity_defect());
    }
    Ok(within(worst, tol::REPR, "largest defect of λ·(k1∘k2)"))
}

fn increasing_closure(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.increasing_closure");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let a = random::increasing_kernel(&mut r, 8);
        let b = random::increasing_kernel(&mut r, 8);
        t.check(a.is_increasing() && b.is_increasing(), || "generated kernel not increasing".into());
        t.check(a.compose(&b)?.is_increasing(), || "composition not increasing".into());
    }
    Ok(t.outcome())
}

fn decreasing_cone(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.decreasing_cone");
    let mut t = Tally::default();
    let (mut inc, mut not_inc) = (0, 0);
    for _ in 0..ctx.cases {
        let k = if r.gen_bool(0.5) { ds_kernel(&mut r) } else { random::averaging_kernel(&mut r, 8) };
        let tk = k.transpose()?;
        let increasing = k.is_increasing();
        if increasing {
            inc += 1;
        } else {
            not_inc += 1;
        }
        t.check(increasing == tk.preserves_decreasing(), || format!("increasing = {increasing}, transpose disagrees"));
        let theta = random::decreasing_density(&mut r, 16);
        if increasing {
            t.check(tk.apply(&theta).is_decreasing(), || "image of a decreasing density increases".into());
        }
    }
    Ok(match t.outcome() {
        Outcome::Pass(s) => Outcome::Pass(format!("{s} ({inc} increasing, {not_inc} not)")),
        o => o,
    })
}

fn rho_contraction(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.rho_contraction");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let p = LevelCoupling::new(ds_kernel(&mut r));
        let q = LevelCoupling::new(ds_kernel(&mut r));
        let d = p.rho(&q)?;
        let inc = LevelCoupling::new(random::increasing_kernel(&mut r, 8));
        if inc.kernel().is_doubly_stochastic() {
            let right = p.compose(&inc)?.rho(&q.compose(&inc)?)?;
            t.check(right <= d + tol::REPR, || format!("ρ(PR,QR) = {right} > ρ(P,Q) = {d}"));
        }
        let pres = LevelCoupling::new(random::averaging_kernel(&mut r, 8));
        if pres.kernel().preserves_decreasing() {
            let left = pres.compose(&p)?.rho(&pres.compose(&q)?)?;
            t.check(left <= d + tol::REPR, || format!("ρ(RP,RQ) = {left} > ρ(P,Q) = {d}"));
        }
    }
    Ok(t.outcome())
}

fn dyadic_blocks(n: u32) -> LevelKernel {
    let m = 1u32 << n;
    let iv: Vec<(f64, f64)> = (0..m).map(|i| (i as f64 / m as f64, (i + 1) as f64 / m as f64)).collect();
    LevelKernel::averaging(&iv)
}

fn catenation_continuity(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.catenation_continuity");
    let mut t = Tally::default();
    let mut last = 0.0f64;
    for _ in 0..ctx.cases.min(20) {
        let a = LevelCoupling::new(random::averaging_kernel(&mut r, 16));
        let b = LevelCoupling::new(random::averaging_kernel(&mut r, 16));
        let ab = a.compose(&b)?;
        for n in 1..=8 {
            let e = LevelCoupling::new(dyadic_blocks(n));
            let (pn, qn) = (a.compose(&e)?, e.compose(&b)?);
            let d = pn.compose(&qn)?.rho(&ab)?;
            let bound = pn.rho(&a)? + qn.rho(&b)?;
            t.check(d <= bound + tol::REPR, || format!("depth {n}: {d} above the bound {bound}"));
            t.check(d <= 0.5f64.powi(n as i32 + 1) + tol::REPR, || format!("depth {n}: {d} above 2^-{}", n + 1));
            if n == 8 {
                last = last.max(d);
            }
        }
    }
    Ok(match t.outcome() {
        Outcome::Pass(s) => Outcome::Pass(format!("{s}; largest ρ at depth 8: {last:.3e}")),
        o => o,
    })
}

/// `q_r ᵗq_r` on `n` bins, from the quantile function alone.
fn back_and_forth(m: &RealMeasure, n: usize) -> BinKernel {
    let mut mat = vec![0.0; n * n];
    for i in 0..n {
        let x = m.g((i as f64 + 0.5) / n as f64);
        if m.mass_at(x) > 0.0 {
            let (lo, hi) = ((m.cdf_left(x) * n as f64).round() as usize, (m.cdf(x) * n as f64).round() as usize);
            for j in lo..hi {
                mat[i * n + j] = 1.0 / (hi - lo) as f64;
            }
        } else {
            mat[i * n + i] = 1.0;
        }
    }
    BinKernel::from_matrix(n, mat).expect("square")
}

fn thresholds(ms: &[&RealMeasure]) -> Vec<f64> {
    let mut xs: Vec<f64> = ms.iter().flat_map(|m| m.x_breakpoints()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mids: Vec<f64> = xs.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    xs.extend(mids);
    xs.push(xs[0] - 1.0);
    xs
}

fn quantile_algebra(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.quantile_algebra");
    let mut t = Tally::default();
    let n = 64;
    for _ in 0..ctx.cases {
        let m = random::dyadic_measure(&mut r, 6, 64);
        let other = random::measure(&mut r, 5);
        let ell = ell_of(&AtomicLevelSet::of(&m));
        let exact = BinKernel::of_kernel(&ell, n)?;
        let brute = back_and_forth(&m, n);
        let dev = exact.matrix().iter().zip(brute.matrix()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        t.check(dev <= tol::REPR, || format!("q ᵗq differs from ℓ by {dev}"));
        let lc = LevelCoupling::new(ell);
        let diag = pushforward_coupling(&m, &m, &lc);
        let q = RealCoupling::quantile(&m, &other);
        let via = pushforward_coupling(&m, &other, &lc);
        let xs = thresholds(&[&m, &other]);
        for &x in &xs {
            for &y in &xs {
                let d1 = (diag.cdf(x, y) - m.cdf(x.min(y))).abs();
                let d2 = (q.cdf(x, y) - via.cdf(x, y)).abs();
                t.check(d1 <= tol::REPR && d2 <= tol::REPR, || format!("at ({x}, {y}): {d1:.2e}, {d2:.2e}"));
            }
        }
    }
    Ok(t.outcome())
}

fn fd_cdf_two_points(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.fd_cdf_two_points");
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cases {
        let k = random::kernel(&mut r, 8);
        let chain = MarkovChainLaw::new(vec![k.clone()]);
        let l = LevelCoupling::new(k);
        for _ in 0..16 {
            let (u, v) = (r.gen_range(0.0..=1.0), r.gen_range(0.0..=1.0));
            let d = (chain.fd_cdf(&[Threshold::Level(u), Threshold::Level(v)])? - l.cdf(u, v)).abs();
            worst = worst.max(d);
        }
    }
    Ok(within(worst, tol::REPR, "largest difference"))
}

fn losup_without_cdf(_: &Context) -> Result<Outcome> {
    let xs = vec![0.0, 1.0, 2.0];
    let p1 = GridCdf::from_points(&[(1.0, 0.0, 0.5), (0.0, 1.0, 0.5)], xs.clone(), xs.clone());
    let p2 = GridCdf::from_points(&[(0.0, 0.0, 0.5), (2.0, 2.0, 0.5)], xs.clone(), xs);
    Ok(match losup_tables(&[p1, p2])? {
        Err(w) => Outcome::Pass(format!("witness {:?} × {:?} with mass {}", w.x, w.y, w.mass)),
        Ok(_) => Outcome::Fail("pointwise minimum accepted as a CDF".into()),
    })
}

fn losup_of_nested(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("kernel.losup_of_nested");
    let mut t = Tally::default();
    for _ in 0..ctx.cases.min(50) {
        let sets: Vec<AtomicLevelSet> = (0..r.gen_range(1..=5))
            .map(|_| AtomicLevelSet::new(random::level_set(&mut r, 16, 3)))
            .collect::<Result<_>>()?;
        let mut chain = Vec::new();
        let mut acc = Vec::new();
        for s in &sets {
            acc.push(s.clone());
            chain.push(LevelCoupling::new(compose(&acc)?));
        }
        let top = chain.last().unwrap().clone();
        match losup_couplings(&chain)? {
            LosupOutcome::Coupling(c) => {
                let d = c.rho(&top)?;
                t.check(d <= tol::REPR, || format!("supremum off by {d}"));
            }
            LosupOutcome::Invalid(w) => t.check(false, || format!("invalid at {w:?}")),
        }
    }
    Ok(t.outcome())
}

// ----------------------------------------------------------------- levels

fn compose(sets: &[AtomicLevelSet]) -> Result<LevelKernel> {
    sets.iter().try_fold(LevelKernel::identity(), |k, s| k.compose(&ell_of(s)))
}

fn random_sets(r: &mut ChaCha8Rng, max: usize) -> Result<Vec<AtomicLevelSet>> {
    (0..r.gen_range(1..=max)).map(|_| AtomicLevelSet::new(random::level_set(r, 64, 3))).collect()
}

/// Random sub-list, keeping order.
fn sub_list(r: &mut ChaCha8Rng, sets: &[AtomicLevelSet]) -> Vec<AtomicLevelSet> {
    sets.iter().filter(|_| r.gen_bool(0.5)).cloned().collect()
}

fn ell_idempotent(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("levels.ell_idempotent");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let k = ell_of(&AtomicLevelSet::new(random::level_set(&mut r, 64, 4))?);
        t.check(k.compose(&k)? == k, || "ℓ∘ℓ ≠ ℓ".into());
    }
    Ok(t.outcome())
}

fn lambda_invariance(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("levels.lambda_invariance");
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cases {
        worst = worst.max(compose(&random_sets(&mut r, 6)?)?.stationarity_defect());
    }
    match l_finite(&ctx.family, &ctx.sample_times()) {
        Ok(l) => worst = worst.max(l.kernel().stationarity_defect()),
        Err(Error::IncompleteFamily) => {}
        Err(e) => return Err(e),
    }
    Ok(within(worst, tol::REPR, "largest defect of λ·L_R"))
}

fn monotone_in_r(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("levels.monotone_in_r");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let big = random_sets(&mut r, 6)?;
        let small = sub_list(&mut r, &big);
        let theta = random::decreasing_density(&mut r, 64);
        let a = compose(&small)?.apply(&theta);
        let b = compose(&big)?.apply(&theta);
        t.check(a.sto_leq(&b), || "θ·ℓ_R not below θ·ℓ_R'".into());
    }
    Ok(t.outcome())
}

fn order_bounds(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("levels.order_bounds");
    let mut t = Tally::default();
    let product = LevelCoupling::product();
    for _ in 0..ctx.cases {
        let big = random_sets(&mut r, 6)?;
        let small = sub_list(&mut r, &big);
        let (ls, lb) = (LevelCoupling::new(compose(&small)?), LevelCoupling::new(compose(&big)?));
        t.check(ls.lo_leq(&lb)?, || "L_R' not below L_R".into());
        t.check(lb.lo_leq(&product)?, || "L_R not below λ⊗λ".into());
    }
    Ok(t.outcome())
}

fn decreasing_stability(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("levels.decreasing_stability");
    let mut t = Tally::default();
    for _ in 0..ctx.cases {
        let k = compose(&random_sets(&mut r, 6)?)?;
        let theta = random::decreasing_density(&mut r, 64);
        let out = k.apply(&theta);
        t.check(out.is_decreasing(), || "θ·ℓ_R not decreasing".into());
        t.check(theta.sto_leq(&out), || "θ not below θ·ℓ_R".into());
    }
    Ok(t.outcome())
}

fn split_composition(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("levels.split_composition");
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cases {
        let sets = random_sets(&mut r, 6)?;
        let cut = r.gen_range(0..=sets.len());
        let whole = LevelCoupling::new(compose(&sets)?);
        let split = LevelCoupling::new(compose(&sets[..cut])?.compose(&compose(&sets[cut..])?)?);
        worst = worst.max(whole.rho(&split)?);
    }
    let ts = ctx.sample_times();
    if ts.len() < 3 {
        return Ok(within(worst, tol::CMP, "random level sets"));
    }
    let (a, m, b) = (ts[0], ts[ts.len() / 2], ts[ts.len() - 1]);
    let left = TimeSpan::closed(a, m);
    let right = TimeSpan { lo: m, hi: b, lo_closed: false, hi_closed: true };
    let whole = TimeSpan::closed(a, b);
    let fam = &ctx.family;
    let mut msg = String::new();
    if !fam.is_exact() {
        // Finite point sets on both sides and their union.
        let n = 4 + (1.0 / (b - a)).log2().ceil().max(0.0) as u32;
        let (pl, pr) = (refinement_points(fam, &left, n, &[]), refinement_points(fam, &right, n, &[]));
        let lw = l_finite(fam, &[pl.as_slice(), pr.as_slice()].concat())?;
        let ll = l_finite(fam, &pl)?;
        let lr = l_finite(fam, &pr)?;
        worst = worst.max(lw.rho(&ll.compose(&lr)?)?);
    }
    let r = ctx.refinement();
    let (lw, ll, lr) = (l_span(fam, &whole, &r)?.0, l_span(fam, &left, &r)?.0, l_span(fam, &right, &r)?.0);
    let limit = lw.rho(&ll.compose(&lr)?)?;
    if fam.is_exact() {
        worst = worst.max(limit);
    } else {
        msg = format!("; refined limits differ by {limit:.3e}");
        if limit > ctx.slack() {
            return Ok(Outcome::Fail(format!("refined limits differ by {limit:.3e} (bound {:.1e})", ctx.slack())));
        }
    }
    Ok(match within(worst, tol::CMP, "exact compositions") {
        Outcome::Pass(s) => Outcome::Pass(s + &msg),
        o => o,
    })
}

fn essential_times(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("levels.essential_times");
    let (a, b) = ctx.window;
    let anchors: Vec<f64> = ctx.family.anchors();
    let mut candidates: Vec<(f64, bool)> =
        anchors.iter().filter(|&&t| t > a && t < b).map(|&t| (t, true)).collect();
    for _ in 0..2 {
        candidates.push((r.gen_range(a..b), false));
    }
    let (lo, hi) = ctx.family.domain();
    let mut found = Vec::new();
    let mut undecided = Vec::new();
    for (t, anchored) in candidates {
        let delta = ((b - a) / 8.0).min(t - lo).min(hi - t) * 0.999;
        if delta <= 0.0 || !ctx.defined(t) {
            continue;
        }
        let (v, gap) = match essential(&ctx.family, (t, t), (t - delta, t + delta), ctx.tol) {
            Err(Error::UndefinedTime(_)) | Err(Error::IncompleteFamily) => continue,
            other => other?,
        };
        match v {
            Essential::Yes if !anchored => {
                return Ok(Outcome::Fail(format!("{t} is essential (gap {gap:.3e}) but no refinement contains it")));
            }
            Essential::Yes => found.push(t),
            Essential::Indeterminate => undecided.push(t),
            Essential::No => {}
        }
    }
    Ok(Outcome::Pass(format!("essential: {found:?}; undecided: {undecided:?}")))
}

fn family_levels(ctx: &Context) -> Result<Outcome> {
    let mut t = Tally::default();
    let mut ts = ctx.sample_times();
    ts.extend(ctx.family.anchors().into_iter().filter(|&x| ctx.defined(x)));
    for x in ts {
        let set = match ctx.family.atomic_levels(x) {
            Err(Error::IncompleteFamily) => return Ok(Outcome::NotApplicable("family not atomically complete".into())),
            other => other?,
        };
        let valid = AtomicLevelSet::new(set.intervals().to_vec()).is_ok();
        let mass: f64 = ctx.family.marginal(x)?.atoms().iter().map(|a| a.weight).sum();
        t.check(valid && (set.measure() - mass).abs() <= tol::REPR, || format!("levels at {x}"));
    }
    Ok(t.outcome())
}

// --------------------------------------------------------------------- mq

fn consecutive(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

fn needs_times(ctx: &Context, k: usize) -> Option<Outcome> {
    let n = ctx.sample_times().len();
    (n < k).then(|| Outcome::NotApplicable(format!("only {n} defined times in the window")))
}

fn chapman_kolmogorov(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 3) {
        return Ok(o);
    }
    let ts = ctx.sample_times();
    let steps = ctx.mq_steps()?;
    let n = ts.len();
    let mut triples: Vec<(usize, usize, usize)> = (2..n).map(|i| (i - 2, i - 1, i)).collect();
    triples.push((0, n / 2, n - 1));
    let mut limit: f64 = 0.0;
    let mut exact: f64 = 0.0;
    let fam = &ctx.family;
    for (i, j, k) in triples {
        let direct = LevelCoupling::new(steps[&(i, k)].clone());
        let split = LevelCoupling::new(steps[&(i, j)].compose(&steps[&(j, k)])?);
        limit = limit.max(direct.rho(&split)?);
        if !fam.is_exact() {
            let (s, t, u) = (ts[i], ts[j], ts[k]);
            let d = 4 + (1.0 / (u - s)).log2().ceil().max(0.0) as u32;
            let whole = l_finite(fam, &refinement_points(fam, &TimeSpan::closed(s, u), d, &[t]))?;
            let l = l_finite(fam, &refinement_points(fam, &TimeSpan::closed(s, t), d, &[]))?;
            let r = l_finite(fam, &refinement_points(fam, &TimeSpan::closed(t, u), d, &[]))?;
            exact = exact.max(whole.rho(&l.compose(&r)?)?);
        }
    }
    if fam.is_exact() {
        return Ok(within(limit, tol::CMP, "largest ρ"));
    }
    Ok(match (exact <= tol::CMP, limit <= ctx.slack()) {
        (true, true) => Outcome::Pass(format!("common depth {exact:.3e}; refined limits {limit:.3e}")),
        _ => Outcome::Fail(format!(
            "common depth {exact:.3e} (bound {:.1e}); refined limits {limit:.3e} (bound {:.1e})",
            tol::CMP,
            ctx.slack()
        )),
    })
}

fn mq_increasing(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 2) {
        return Ok(o);
    }
    let mut t = Tally::default();
    for ((i, j), k) in ctx.mq_steps()? {
        t.check(k.is_increasing(), || format!("kernel between times {i} and {j}"));
    }
    Ok(t.outcome())
}

fn mq_supremum(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 2) {
        return Ok(o);
    }
    let mut r = ctx.rng("mq.supremum");
    let ts = ctx.sample_times();
    let mut worst: f64 = 0.0;
    let listed: Vec<f64> = ctx.family.anchors();
    for (i, j) in consecutive(ts.len()) {
        let (s, t) = (ts[i], ts[j]);
        let mq = ctx.mq_coupling(i, j)?;
        for _ in 0..3 {
            let mut pool: Vec<f64> = listed.iter().copied().filter(|&x| x > s && x < t).collect();
            pool.extend((0..4).map(|_| r.gen_range(s..t)));
            let rs: Vec<f64> = pool.into_iter().filter(|&x| ctx.defined(x) && r.gen_bool(0.6)).collect();
            let q = ctx.handle(ProcessVariant::MadeMarkovAt(rs)).coupling(s, t)?;
            worst = worst.max(q.lo_excess(&mq)?);
        }
    }
    Ok(within(worst, ctx.slack(), "largest excess of Q_[R] over MQ"))
}

fn mq_below_product(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 2) {
        return Ok(o);
    }
    let mut worst: f64 = 0.0;
    for &(i, j) in ctx.mq_steps()?.keys() {
        let mq = ctx.mq_coupling(i, j)?;
        let prod = RealCoupling::product(&mq.left, &mq.right);
        worst = worst.max(mq.lo_excess(&prod)?);
    }
    Ok(within(worst, tol::CMP, "largest excess of MQ over the product"))
}

fn time_reversal(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 2) {
        return Ok(o);
    }
    let ts = ctx.sample_times();
    let rev = ProcessHandle::new(ctx.family.reversed(), ProcessVariant::MarkovQuantile).with_refinement(ctx.refinement());
    let steps = ctx.mq_steps()?;
    let worst = consecutive(ts.len())
        .par_iter()
        .map(|&(i, j)| {
            let back = LevelCoupling::new(rev.level_step(-ts[j], -ts[i])?);
            back.rho(&LevelCoupling::new(steps[&(i, j)].transpose()?))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(within(worst, tol::CMP, "largest ρ to the transpose"))
}

fn monotone_paths(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 2) {
        return Ok(o);
    }
    let ts = ctx.sample_times();
    let ms = ts.iter().map(|&t| ctx.family.marginal(t)).collect::<Result<Vec<_>>>()?;
    if !ms.windows(2).all(|w| w[0].sto_leq(&w[1])) {
        return Ok(Outcome::NotApplicable("marginals are not increasing".into()));
    }
    let mut t = Tally::default();
    for &(i, j) in ctx.mq_steps()?.keys() {
        t.check(ctx.mq_coupling(i, j)?.is_monotone(), || format!("coupling between times {i} and {j}"));
    }
    t.check(ctx.mq_ensemble()?.is_nondecreasing(), || "a simulated path decreases".into());
    Ok(t.outcome())
}

fn simulation_pairs(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 2) {
        return Ok(o);
    }
    let n = ts_len(ctx);
    let e = ctx.mq_ensemble()?;
    let mut pairs = consecutive(n);
    if n > 2 {
        pairs.push((0, n - 1));
    }
    // 0.01 with 10⁵ paths, scaled with the number of paths.
    let bound = 0.01 * (1e5 / ctx.n_paths as f64).sqrt();
    let mut worst: f64 = 0.0;
    for (i, j) in pairs {
        worst = worst.max(e.pair_distance(i, j, &ctx.mq_coupling(i, j)?, 200));
    }
    Ok(within(worst, bound, "largest pair CDF distance"))
}

fn ts_len(ctx: &Context) -> usize {
    ctx.sample_times().len()
}

fn simulation_marginals(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 1) {
        return Ok(o);
    }
    let ts = ctx.sample_times();
    let e = ctx.mq_ensemble()?;
    let bound = dkw(ctx.n_paths, (1.0 - CONFIDENCE) / ts.len() as f64);
    let mut worst: f64 = 0.0;
    for (i, &t) in ts.iter().enumerate() {
        worst = worst.max(e.kolmogorov(i, &ctx.family.marginal(t)?));
    }
    Ok(within(worst, bound, "largest Kolmogorov distance"))
}

fn mq_is_markov(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 3) {
        return Ok(o);
    }
    let ts = ctx.sample_times();
    let pick = [ts[0], ts[ts.len() / 2], ts[ts.len() - 1]];
    let rep = ctx.handle(ProcessVariant::MarkovQuantile).markov_check(&pick, tol::CMP)?;
    Ok(within(rep.deviation, tol::CMP, "deviation from the catenation"))
}

fn quantile_markov_when_diffuse(ctx: &Context) -> Result<Outcome> {
    if let Some(o) = needs_times(ctx, 3) {
        return Ok(o);
    }
    let ts = ctx.sample_times();
    if !ts.iter().all(|&t| ctx.family.marginal(t).is_ok_and(|m| m.is_diffuse())) {
        return Ok(Outcome::NotApplicable("some marginal has atoms".into()));
    }
    let rep = ctx.handle(ProcessVariant::Quantile).markov_check(&ts, tol::CMP)?;
    Ok(within(rep.deviation, tol::CMP, "deviation from the catenation"))
}

// ----------------------------------------------------------------- action

fn energy_refinement(ctx: &Context) -> Result<Outcome> {
    if ctx.window_partition(16).is_none() {
        return Ok(Outcome::NotApplicable("family undefined on part of the window".into()));
    }
    let mut r = ctx.rng("action.energy_refinement");
    let (a, b) = ctx.window;
    let mut t = Tally::default();
    for _ in 0..ctx.cases.min(50) {
        let mut pts = vec![a, b];
        pts.extend((0..3).map(|_| r.gen_range(a..b)));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut finer = pts.clone();
        finer.extend((0..4).map(|_| r.gen_range(a..b)));
        finer.sort_by(f64::total_cmp);
        finer.dedup();
        let e0 = energy(&ctx.family, &Partition::new(pts)?)?.total;
        let e1 = energy(&ctx.family, &Partition::new(finer)?)?.total;
        t.check(e1 >= e0 - tol::REPR * (1.0 + e0), || format!("finer partition gives {e1} < {e0}"));
    }
    Ok(t.outcome())
}

fn chasles(ctx: &Context) -> Result<Outcome> {
    if ctx.window_partition(16).is_none() {
        return Ok(Outcome::NotApplicable("family undefined on part of the window".into()));
    }
    let mut r = ctx.rng("action.chasles");
    let (a, b) = ctx.window;
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cases.min(50) {
        let c = r.gen_range(a..b);
        let mut left = vec![a, c];
        let mut right = vec![c, b];
        left.extend((0..2).map(|_| r.gen_range(a..c)));
        right.extend((0..2).map(|_| r.gen_range(c..b)));
        for v in [&mut left, &mut right] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let mut all = left.clone();
        all.extend(&right[1..]);
        let e = energy(&ctx.family, &Partition::new(all)?)?.total;
        let parts = energy(&ctx.family, &Partition::new(left)?)?.total + energy(&ctx.family, &Partition::new(right)?)?.total;
        worst = worst.max((e - parts).abs() / (1.0 + e));
    }
    Ok(within(worst, tol::REPR, "largest relative difference"))
}

fn action_lower_bound(ctx: &Context) -> Result<Outcome> {
    let (Some(g), Some(r)) = (ctx.window_partition(16), ctx.window_partition(4)) else {
        return Ok(Outcome::NotApplicable("family undefined on part of the window".into()));
    };
    let n = (ctx.n_paths / 4).max(1000);
    // The displacement process only has the right marginals at its own knots,
    // so it is measured on the coarse grid.
    let ensembles = [
        ("quantile", &g, ctx.handle(ProcessVariant::Quantile).simulate(g.points(), n, ctx.seed)?),
        ("markov-quantile", &g, ctx.handle(ProcessVariant::MarkovQuantile).simulate(g.points(), n, ctx.seed)?),
        ("displacement", &r, disp_ensemble(&ctx.family, &r, r.points(), n, ctx.seed)?),
    ];
    let mut msgs = Vec::new();
    let mut ok = true;
    for (name, p, ens) in &ensembles {
        let e = energy(&ctx.family, p)?.total;
        let rep = action(ens)?;
        let margin = rep.action - e + 3.0 * rep.std_error + tol::REPR * (1.0 + e);
        ok &= margin >= 0.0;
        msgs.push(format!("{name} {:.6} ± {:.1e} vs energy {e:.6}", rep.action, rep.std_error));
    }
    let msg = msgs.join(", ");
    Ok(if ok { Outcome::Pass(msg) } else { Outcome::Fail(msg) })
}

fn made_markov_action(ctx: &Context) -> Result<Outcome> {
    let (Some(g), Some(r)) = (ctx.window_partition(16), ctx.window_partition(4)) else {
        return Ok(Outcome::NotApplicable("family undefined on part of the window".into()));
    };
    let n = (ctx.n_paths / 4).max(1000);
    let grid = g.points();
    let made = action(&ctx.handle(ProcessVariant::MadeMarkovAt(r.points().to_vec())).simulate(grid, n, ctx.seed)?)?;
    let quant = action(&ctx.handle(ProcessVariant::Quantile).simulate(grid, n, ctx.seed ^ 1)?)?;
    let bound = 3.0 * (made.std_error.powi(2) + quant.std_error.powi(2)).sqrt() + tol::REPR;
    Ok(within((made.action - quant.action).abs(), bound, "action difference"))
}

fn disp_convergence(ctx: &Context) -> Result<Outcome> {
    if ctx.window_partition(8).is_none() {
        return Ok(Outcome::NotApplicable("family undefined on part of the window".into()));
    }
    let (a, b) = ctx.window;
    let h = ProcessHandle::new(ctx.family.clone(), ProcessVariant::MarkovQuantile).with_refinement(ctx.refinement());
    let mq = h.coupling(a, b)?;
    let bound = 0.01 * (1e5 / ctx.n_paths as f64).sqrt();
    let mut exact_prev = f64::INFINITY;
    let mut msgs = Vec::new();
    let mut ok = true;
    for depth in 1..=3 {
        let r = Partition::uniform(a, b, 1 << depth)?;
        let q = ctx.handle(ProcessVariant::MadeMarkovAt(r.points().to_vec())).coupling(a, b)?;
        let exact = q.rho(&mq)?;
        let ens = disp_ensemble(&ctx.family, &r, &[a, b], ctx.n_paths, ctx.seed)?;
        let emp = ens.pair_distance(0, 1, &mq, 200);
        ok &= exact <= exact_prev + ctx.slack() && emp <= exact + bound;
        exact_prev = exact;
        msgs.push(format!("depth {depth}: exact {exact:.3e}, sampled {emp:.3e}"));
    }
    let msg = msgs.join("; ");
    Ok(if ok { Outcome::Pass(msg) } else { Outcome::Fail(msg) })
}

// ----------------------------------------------------------------- oracle

fn oracle_functoriality(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("oracle.functoriality");
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cases.min(50) {
        let (k1, k2) = (random::kernel(&mut r, 8), random::kernel(&mut r, 8));
        let whole = BinKernel::of_kernel(&k1.compose(&k2)?, 64)?;
        let prod = BinKernel::of_kernel(&k1, 64)?.compose(&BinKernel::of_kernel(&k2, 64)?)?;
        let d = whole.matrix().iter().zip(prod.matrix()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    Ok(within(worst, tol::REPR, "largest entry difference"))
}

fn oracle_transpose(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("oracle.transpose");
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cases.min(50) {
        let k = ds_kernel(&mut r);
        let a = BinKernel::of_kernel(&k.transpose()?, 64)?;
        let b = BinKernel::of_kernel(&k, 64)?.transpose();
        worst = worst.max(a.matrix().iter().zip(b.matrix()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    Ok(within(worst, tol::REPR, "largest entry difference"))
}

fn oracle_fd_cdf(ctx: &Context) -> Result<Outcome> {
    let mut r = ctx.rng("oracle.fd_cdf");
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cases.min(50) {
        let steps: Vec<LevelKernel> = (0..3).map(|_| random::kernel(&mut r, 8)).collect();
        let bins = steps.iter().map(|k| BinKernel::of_kernel(k, 64)).collect::<Result<Vec<_>>>()?;
        let chain = MarkovChainLaw::new(steps);
        for _ in 0..8 {
            let levels: Vec<f64> = (0..4).map(|_| r.gen_range(0..=8) as f64 / 8.0).collect();
            let th: Vec<Threshold> = levels.iter().map(|&u| Threshold::Level(u)).collect();
            worst = worst.max((chain.fd_cdf(&th)? - BinKernel::fd_cdf(&bins, &levels)?).abs());
        }
    }
    Ok(within(worst, tol::CMP, "largest difference"))
}

// --------------------------------------------------------------------- io

fn determinism(ctx: &Context) -> Result<Outcome> {
    let ts = ctx.sample_times();
    if ts.len() < 2 {
        return Ok(Outcome::NotApplicable("fewer than two defined times".into()));
    }
    let h = ProcessHandle::new(ctx.family.clone(), ProcessVariant::MadeMarkovAt(ts.clone()));
    let run = || -> Result<(String, String)> {
        let csv = ensemble_csv(&h.simulate(&ts, 2000, ctx.seed)?);
        let json = to_json(&coupling_json(ts[0], ts[ts.len() - 1], &h.coupling(ts[0], ts[ts.len() - 1])?));
        Ok((csv, json))
    };
    let reference = run()?;
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
        if pool.install(run)? != reference {
            return Ok(Outcome::Fail(format!("output differs with {threads} threads")));
        }
    }
    Ok(Outcome::Pass("byte-identical output with 1, 3 and the default number of threads".into()))
}

/// Every property, in report order.
pub const PROPERTIES: &[Property] = &[
    Property { name: "measure.quantile_cdf_section", check: quantile_cdf_section },
    Property { name: "measure.pushforward_law", check: pushforward_law },
    Property { name: "measure.sto_partial_order", check: sto_partial_order },
    Property { name: "measure.stosup_least_upper_bound", check: stosup_least_upper_bound },
    Property { name: "measure.w2_metric", check: w2_metric },
    Property { name: "measure.atom_levels_partition", check: atom_levels_partition },
    Property { name: "measure.stosup_not_a_limit", check: stosup_not_a_limit },
    Property { name: "kernel.closure_canonical", check: closure_canonical },
    Property { name: "kernel.stationarity_preserved", check: stationarity_preserved },
    Property { name: "kernel.increasing_closure", check: increasing_closure },
    Property { name: "kernel.decreasing_cone", check: decreasing_cone },
    Property { name: "kernel.rho_contraction", check: rho_contraction },
    Property { name: "kernel.catenation_continuity", check: catenation_continuity },
    Property { name: "kernel.quantile_algebra", check: quantile_algebra },
    Property { name: "kernel.fd_cdf_two_points", check: fd_cdf_two_points },
    Property { name: "kernel.losup_without_cdf", check: losup_without_cdf },
    Property { name: "kernel.losup_of_nested", check: losup_of_nested },
    Property { name: "levels.ell_idempotent", check: ell_idempotent },
    Property { name: "levels.lambda_invariance", check: lambda_invariance },
    Property { name: "levels.monotone_in_r", check: monotone_in_r },
    Property { name: "levels.order_bounds", check: order_bounds },
    Property { name: "levels.decreasing_stability", check: decreasing_stability },
    Property { name: "levels.split_composition", check: split_composition },
    Property { name: "levels.essential_times", check: essential_times },
    Property { name: "levels.family_levels", check: family_levels },
    Property { name: "mq.chapman_kolmogorov", check: chapman_kolmogorov },
    Property { name: "mq.increasing_kernels", check: mq_increasing },
    Property { name: "mq.supremum", check: mq_supremum },
    Property { name: "mq.below_product", check: mq_below_product },
    Property { name: "mq.time_reversal", check: time_reversal },
    Property { name: "mq.monotone_paths", check: monotone_paths },
    Property { name: "mq.simulation_pairs", check: simulation_pairs },
    Property { name: "mq.simulation_marginals", check: simulation_marginals },
    Property { name: "mq.is_markov", check: mq_is_markov },
    Property { name: "mq.quantile_markov_when_diffuse", check: quantile_markov_when_diffuse },
    Property { name: "action.energy_refinement", check: energy_refinement },
    Property { name: "action.chasles", check: chasles },
    Property { name: "action.lower_bound", check: action_lower_bound },
    Property { name: "action.made_markov", check: made_markov_action },
    Property { name: "action.disp_convergence", check: disp_convergence },
    Property { name: "oracle.functoriality", check: oracle_functoriality },
    Property { name: "oracle.transpose", check: oracle_transpose },
    Property { name: "oracle.fd_cdf", check: oracle_fd_cdf },
    Property { name: "io.determinism", check: determinism },
];

/// Number of registered properties; removing one must be deliberate.
pub const MANIFEST_COUNT: usize = 44;

pub fn run_one(p: &Property, ctx: &Context) -> Report {
    let start = Instant::now();
    let outcome = match (p.check)(ctx) {
        Ok(o) => o,
        Err(e) => Outcome::Fail(format!("error: {e}")),
    };
    Report { name: p.name, outcome, seconds: start.elapsed().as_secs_f64() }
}

/// Runs the properties whose name starts with `filter`, in order.
pub fn run(ctx: &Context, filter: Option<&str>) -> Vec<Report> {
    PROPERTIES.iter().filter(|p| filter.is_none_or(|f| p.name.starts_with(f))).map(|p| run_one(p, ctx)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_count() {
        assert_eq!(PROPERTIES.len(), MANIFEST_COUNT);
        let mut names: Vec<&str> = PROPERTIES.iter().map(|p| p.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), MANIFEST_COUNT);
    }

    #[test]
    fn sample_times_stay_in_window() {
        let ctx = Context::new(MarginalFamily::Parametric(crate::levels::Builtin::Binomial { n: 3 }), (0.0, 1.0));
        assert_eq!(ctx.sample_times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
