//! Acceptance criteria. Prints one line per criterion and exits non-zero
//! when any of them fails.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use markov_quantile::action::{action, disp_ensemble, energy_limit, EnergyRefinement, EnergyValue, Partition};
use markov_quantile::invariants::{self, Context};
use markov_quantile::io::load_family;
use markov_quantile::kernel::{losup_tables, GridCdf};
use markov_quantile::oracle::{oracle_compare, oracle_l, BinKernel};
use markov_quantile::{
    ell_of, essential, jump_rates, l_finite, random, AtomicLevelSet, Background, Builtin, Essential, ExplicitFamily,
    LevelKernel, MarginalFamily, MarkovChainLaw, ProcessHandle, ProcessVariant, RealCoupling,
    RealMeasure, Refinement, Result, Threshold, TimeFunction,
};

type Verdict = Result<(bool, String)>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"))
}

fn context(name: &str) -> Context {
    let spec = load_family(fixture(name).to_str().unwrap()).unwrap();
    Context::from_spec(&spec)
}

fn poisson() -> MarginalFamily {
    MarginalFamily::Parametric(Builtin::Poisson { rate: 1.0, max_atoms: 40 })
}

fn poisson_rate() -> Verdict {
    let start = Instant::now();
    let fam = poisson();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for h in [1e-2, 1e-3] {
        for k in 0..=5 {
            let r = jump_rates(&fam, 0.5, k, h, &Refinement::default())?;
            let err = (r.empirical.0 - 1.0).abs();
            ok &= err <= 5.0 * h;
            worst = worst.max(err / h);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 10.0;
    Ok((ok, format!("largest |rate - 1| / h = {worst:.3}, {secs:.2}s")))
}

fn binomial_rate() -> Verdict {
    let fam = MarginalFamily::Parametric(Builtin::Binomial { n: 5 });
    let h = 1e-3;
    let (mut worst, mut worst_raw): (f64, f64) = (0.0, 0.0);
    for t in [0.25, 0.5] {
        for k in 0..5 {
            let r = jump_rates(&fam, t, k, h, &Refinement::default())?;
            let q = (5 - k) as f64 / (1.0 - t);
            worst = worst.max((r.empirical.0 - q).abs());
            worst_raw = worst_raw.max((r.empirical_raw.0 - q).abs());
        }
    }
    Ok((worst <= 5.0 * h, format!("largest error {worst:.3e} (bound {:.1e}); plain ratio {worst_raw:.3e}", 5.0 * h)))
}

fn row_error(k: &LevelKernel, x: f64) -> f64 {
    let mut vs: Vec<f64> = (0..=1200).map(|i| i as f64 / 1200.0).collect();
    vs.extend(k.all_breaks());
    vs.iter().map(|&v| (k.row_cdf(x, v) - v).abs()).fold(0.0, f64::max)
}

fn level_identity() -> Verdict {
    let set = |a: f64, b: f64| AtomicLevelSet::new(vec![(a, b)]);
    let (a1, a2, a3, a4) = (set(1.0 / 3.0, 5.0 / 6.0)?, set(2.0 / 3.0, 1.0)?, set(0.5, 5.0 / 6.0)?, set(0.0, 2.0 / 3.0)?);
    let compose = |sets: &[&AtomicLevelSet]| -> Result<LevelKernel> {
        sets.iter().try_fold(LevelKernel::identity(), |k, s| k.compose(&ell_of(s)))
    };
    let without = row_error(&compose(&[&a1, &a2, &a4])?, 0.5);
    let with = row_error(&compose(&[&a1, &a2, &a3, &a4])?, 0.5);
    Ok((
        without <= 1e-12 && with > 1e-3,
        format!("row at 1/2 is λ up to {without:.2e}; with the third set it is {with:.3e} away"),
    ))
}

/// Explicit family on `0, 1, ..., m-1` with dyadic level breakpoints.
fn random_explicit(r: &mut ChaCha8Rng, max_times: usize) -> Result<(MarginalFamily, Vec<f64>)> {
    let m = r.gen_range(1..=max_times);
    let points: Vec<(f64, RealMeasure)> = (0..m).map(|i| (i as f64, random::dyadic_measure(r, 6, 64))).collect();
    let times = points.iter().map(|p| p.0).collect();
    Ok((MarginalFamily::Explicit(ExplicitFamily::new(points, vec![], Background::Undefined, true)?), times))
}

fn oracle_equivalence() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let n = 1024;
    let (mut worst, mut worst_fd): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let (fam, times) = random_explicit(&mut r, 6)?;
        let sets = times.iter().map(|&t| fam.atomic_levels(t)).collect::<Result<Vec<_>>>()?;
        let exact = l_finite(&fam, &times)?;
        worst = worst.max(oracle_compare(&exact, &oracle_l(&sets, n)?)?);
        // Three-time law of the chain ℓ_{A_0}, then ℓ over the remaining sets.
        let split = r.gen_range(0..=sets.len());
        let (first, second) = sets.split_at(split);
        let exact_steps: Vec<LevelKernel> = [first, second]
            .iter()
            .map(|s| s.iter().try_fold(LevelKernel::identity(), |k, a| k.compose(&ell_of(a))))
            .collect::<Result<_>>()?;
        let bins = [oracle_l(first, n)?, oracle_l(second, n)?];
        let chain = MarkovChainLaw::new(exact_steps);
        for _ in 0..8 {
            let levels: Vec<f64> = (0..3).map(|_| r.gen_range(0..=64) as f64 / 64.0).collect();
            let th: Vec<Threshold> = levels.iter().map(|&u| Threshold::Level(u)).collect();
            worst_fd = worst_fd.max((chain.fd_cdf(&th)? - BinKernel::fd_cdf(&bins, &levels)?).abs());
        }
    }
    Ok((worst <= 1e-9 && worst_fd <= 1e-9, format!("largest ρ {worst:.3e}, largest fd_cdf difference {worst_fd:.3e}")))
}

fn thresholds(m: &RealMeasure, k: usize) -> Vec<f64> {
    let (lo, hi) = (m.quantile(1e-12).unwrap(), m.quantile(1.0).unwrap());
    (0..k).map(|i| lo - 0.1 + (hi - lo + 0.2) * i as f64 / (k - 1) as f64).collect()
}

fn hoeffding_frechet() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (a, b) = (random::measure(&mut r, 6), random::measure(&mut r, 6));
        let q = RealCoupling::quantile(&a, &b);
        for &x in &thresholds(&a, 64) {
            for &y in &thresholds(&b, 64) {
                worst = worst.max((q.cdf(x, y) - a.cdf(x).min(b.cdf(y))).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("largest difference {worst:.3e}")))
}

fn run_properties(ctx: &Context, names: &[&str]) -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    let mut count = 0;
    for name in names {
        for rep in invariants::run(ctx, Some(name)) {
            count += 1;
            if !rep.outcome.passed() {
                failures.push(format!("{}: {}", rep.name, rep.outcome.detail()));
            }
        }
    }
    (count, failures)
}

const FIXTURES: &[&str] = &["ex1_24", "ex4_29", "ex6_2", "ex6_3", "ex6_4", "ex6_6", "ex6_9", "ex6_10", "flag", "diffuse"];

fn order_suite() -> Verdict {
    let names = ["levels.monotone_in_r", "levels.decreasing_stability", "levels.order_bounds", "levels.split_composition"];
    let mut ctx = context("ex1_24");
    ctx.cases = 1000;
    let (mut count, mut failures) = run_properties(&ctx, &names);
    for f in ["ex6_9", "ex6_10"] {
        let (c, fs) = run_properties(&context(f), &["levels.split_composition"]);
        count += c;
        failures.extend(fs);
    }
    Ok((failures.is_empty(), format!("{count} runs, {} failed {}", failures.len(), failures.join("; "))))
}

fn mq_structure() -> Verdict {
    let names = ["mq.chapman_kolmogorov", "mq.increasing_kernels", "mq.supremum", "mq.below_product"];
    let mut count = 0;
    let mut failures = Vec::new();
    for f in FIXTURES {
        let (c, fs) = run_properties(&context(f), &names);
        count += c;
        failures.extend(fs.into_iter().map(|s| format!("{f} {s}")));
    }
    let mut r = ChaCha8Rng::seed_from_u64(7);
    for i in 0..100 {
        let (fam, times) = random_explicit(&mut r, 6)?;
        let window = (times[0], *times.last().unwrap());
        let (c, fs) = run_properties(&Context::new(fam, window), &names);
        count += c;
        failures.extend(fs.into_iter().map(|s| format!("random {i} {s}")));
    }
    Ok((failures.is_empty(), format!("{count} runs, {} failed {}", failures.len(), failures.join("; "))))
}

fn essential_fixtures() -> Verdict {
    let fam = |name: &str| load_family(fixture(name).to_str().unwrap()).unwrap().family;
    let tol = 1e-6;
    let mut msgs = Vec::new();
    let mut ok = true;
    let mut expect = |what: String, got: (Essential, f64), want: Essential| {
        ok &= got.0 == want;
        msgs.push(format!("{what} {:?} ({:.2e})", got.0, got.1));
    };
    let e124 = fam("ex1_24");
    expect("1.24 {0}".into(), essential(&e124, (0.0, 0.0), (-0.5, 0.5), tol)?, Essential::Yes);
    expect("1.24 {0.5}".into(), essential(&e124, (0.5, 0.5), (0.25, 0.75), tol)?, Essential::No);
    let e429 = fam("ex4_29");
    for t in [-0.25, -0.1, 0.0, 0.25] {
        expect(format!("4.29 {{{t}}}"), essential(&e429, (t, t), (-0.5, 0.5), tol)?, Essential::No);
    }
    expect("4.29 I".into(), essential(&e429, (-0.25, 0.25), (-0.5, 0.5), tol)?, Essential::Yes);
    let diffuse = fam("diffuse");
    for t in [0.25, 0.5, 0.75] {
        expect(format!("diffuse {{{t}}}"), essential(&diffuse, (t, t), (0.1, 0.9), tol)?, Essential::No);
    }
    expect("diffuse [0.3,0.6]".into(), essential(&diffuse, (0.3, 0.6), (0.1, 0.9), tol)?, Essential::No);
    Ok((ok, msgs.join(", ")))
}

fn markov_diagnosis() -> Verdict {
    let flag = load_family(fixture("flag").to_str().unwrap())?.family;
    let q = ProcessHandle::new(flag, ProcessVariant::Quantile).markov_check(&[-1.0, 0.0, 1.0], 1e-9)?;
    let diffuse = load_family(fixture("diffuse").to_str().unwrap())?.family;
    let d = ProcessHandle::new(diffuse, ProcessVariant::Quantile).markov_check(&[0.0, 0.3, 0.7, 1.0], 1e-9)?;
    let shift = ProcessHandle::new(MarginalFamily::Parametric(Builtin::UniformShift), ProcessVariant::Quantile)
        .markov_check(&[0.0, 0.5, 1.0], 1e-9)?;
    Ok((
        !q.markov && q.deviation >= 0.2 && d.markov && shift.markov,
        format!(
            "flag deviation {:.3}; diffuse deviations {:.1e} and {:.1e}",
            q.deviation, d.deviation, shift.deviation
        ),
    ))
}

fn action_equality() -> Verdict {
    let fam = MarginalFamily::Parametric(Builtin::CrossingUniforms);
    let limit = energy_limit(&fam, 0.0, 3.0, &EnergyRefinement::default())?;
    let EnergyValue::Finite(e) = limit.value else {
        return Ok((false, "crossing family reported infinite energy".into()));
    };
    let grid: Vec<f64> = (0..=384).map(|i| i as f64 / 128.0).collect();
    let handle = ProcessHandle::new(fam, ProcessVariant::MarkovQuantile);
    let rep = action(&handle.simulate(&grid, 100_000, 11)?)?;
    let bound = 3.0 * rep.std_error + rep.grid_bias.abs();
    let two = MarginalFamily::Parametric(Builtin::TwoAtom { a: TimeFunction::PiecewiseLinear(vec![(0.0, 0.2), (1.0, 0.8)]) });
    let infinite = energy_limit(&two, 0.0, 1.0, &EnergyRefinement::default())?.value == EnergyValue::Infinite;
    Ok((
        (rep.action - e).abs() <= bound && infinite,
        format!(
            "action {:.5} vs energy {e:.5}, bound {bound:.2e}; two-atom energy {}",
            rep.action,
            if infinite { "infinite" } else { "finite" }
        ),
    ))
}

fn disp_convergence() -> Verdict {
    let fam = poisson();
    let r = Partition::uniform(0.0, 1.0, 32)?;
    let times = [0.25, 0.5, 1.0];
    let ens = disp_ensemble(&fam, &r, &times, 100_000, 13)?;
    let handle = ProcessHandle::new(fam, ProcessVariant::MarkovQuantile);
    let mut worst: f64 = 0.0;
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        worst = worst.max(ens.pair_distance(i, j, &handle.coupling(times[i], times[j])?, 200));
    }
    Ok((worst <= 0.02, format!("largest pair CDF distance {worst:.3e} at depth 5")))
}

fn order_fixtures() -> Verdict {
    let s = RealMeasure::stosup(&[RealMeasure::discrete(&[(0.0, 0.5), (2.0, 0.5)])?, RealMeasure::dirac(1.0)])?;
    let exact = s == RealMeasure::discrete(&[(1.0, 0.5), (2.0, 0.5)])?;
    let xs = vec![0.0, 1.0, 2.0];
    let p1 = GridCdf::from_points(&[(1.0, 0.0, 0.5), (0.0, 1.0, 0.5)], xs.clone(), xs.clone());
    let p2 = GridCdf::from_points(&[(0.0, 0.0, 0.5), (2.0, 2.0, 0.5)], xs.clone(), xs);
    Ok(match losup_tables(&[p1, p2])? {
        Err(w) => (exact, format!("stosup exact: {exact}; witness {:?} × {:?} with mass {}", w.x, w.y, w.mass)),
        Ok(_) => (false, "pointwise minimum accepted as a CDF".into()),
    })
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("Poisson jump rate", poisson_rate),
        ("binomial jump rate", binomial_rate),
        ("composed averaging row", level_identity),
        ("oracle equivalence", oracle_equivalence),
        ("Hoeffding-Fréchet bound", hoeffding_frechet),
        ("order suite", order_suite),
        ("Markov-quantile structure", mq_structure),
        ("essential times", essential_fixtures),
        ("Markov diagnosis", markov_diagnosis),
        ("action equals energy", action_equality),
        ("displacement convergence", disp_convergence),
        ("stosup and losup fixtures", order_fixtures),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|a| a == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "criterion {n:>2} {:<4} {name:<28} {:>7.2}s  {detail}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
