//! Random instances for property checks: measures, decreasing densities,
//! atomic level sets and kernels of the mixture class.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::kernel::{LevelDensity, LevelKernel};
use crate::measure::{Piece, RealMeasure};

/// Uniform draw from the open interval `(0,1)`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Random mixture of up to `max_pieces` atoms and segments.
pub fn measure<R: Rng + ?Sized>(rng: &mut R, max_pieces: usize) -> RealMeasure {
    let k = rng.gen_range(1..=max_pieces.max(1));
    let masses: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = masses.iter().sum();
    pieces_from_masses(rng, &masses.iter().map(|m| m / total).collect::<Vec<_>>())
}

/// Random measure whose piece masses are multiples of `1/denom`, so that
/// its atomic levels sit on the dyadic grid when `denom` is a power of two.
pub fn dyadic_measure<R: Rng + ?Sized>(rng: &mut R, max_pieces: usize, denom: u32) -> RealMeasure {
    let k = rng.gen_range(1..=max_pieces.max(1).min(denom as usize));
    let mut cuts: Vec<u32> = (1..denom).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<u32> = cuts.into_iter().take(k - 1).collect();
    cuts.push(0);
    cuts.push(denom);
    cuts.sort_unstable();
    let masses: Vec<f64> = cuts.windows(2).map(|w| (w[1] - w[0]) as f64 / denom as f64).collect();
    pieces_from_masses(rng, &masses)
}

fn pieces_from_masses<R: Rng + ?Sized>(rng: &mut R, masses: &[f64]) -> RealMeasure {
    let mut x: f64 = rng.gen_range(-2.0..2.0);
    let mut pieces = Vec::with_capacity(masses.len());
    for &m in masses {
        if rng.gen_bool(0.7) {
            x += rng.gen_range(0.0..1.0);
        }
        if rng.gen_bool(0.5) {
            pieces.push((m, Piece::Atom(x)));
        } else {
            let hi = x + rng.gen_range(0.05..1.0);
            pieces.push((m, Piece::Segment { lo: x, hi }));
            x = hi;
        }
    }
    RealMeasure::new(&pieces).expect("generated pieces are monotone")
}

/// A measure stochastically above `m`.
pub fn shifted_up<R: Rng + ?Sized>(rng: &mut R, m: &RealMeasure) -> RealMeasure {
    let c: f64 = rng.gen_range(0.0..1.0);
    let shifted: Vec<(f64, Piece)> = m
        .weighted_pieces()
        .into_iter()
        .map(|(w, p)| {
            let p = match p {
                Piece::Atom(x) => Piece::Atom(x + c),
                Piece::Segment { lo, hi } => Piece::Segment { lo: lo + c, hi: hi + c },
            };
            (w, p)
        })
        .collect();
    let shifted = RealMeasure::new(&shifted).expect("translation keeps monotonicity");
    if rng.gen_bool(0.5) {
        RealMeasure::stosup(&[shifted, measure(rng, 4)]).expect("non-empty")
    } else {
        shifted
    }
}

/// Probability density on `(0,1)` that is non-increasing, with breakpoints
/// on the grid `i / denom`.
pub fn decreasing_density<R: Rng + ?Sized>(rng: &mut R, denom: u32) -> LevelDensity {
    let support = rng.gen_range(1..=denom);
    let mut vals: Vec<f64> = (0..support).map(|_| rng.gen_range(0.0..1.0)).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals[0] += 0.1;
    let mut dens = vals;
    dens.resize(denom as usize, 0.0);
    let breaks: Vec<f64> = (0..=denom).map(|i| i as f64 / denom as f64).collect();
    LevelDensity::new(breaks, dens).unwrap().normalize().unwrap()
}

/// Disjoint open intervals with endpoints on the grid `i / denom`.
pub fn level_set<R: Rng + ?Sized>(rng: &mut R, denom: u32, max_intervals: usize) -> Vec<(f64, f64)> {
    let k = rng.gen_range(0..=max_intervals);
    let mut pts: Vec<u32> = (0..=denom).collect();
    pts.shuffle(rng);
    let mut pts: Vec<u32> = pts.into_iter().take(2 * k).collect();
    pts.sort_unstable();
    pts.chunks(2)
        .filter(|c| c.len() == 2 && c[1] > c[0])
        .map(|c| (c[0] as f64 / denom as f64, c[1] as f64 / denom as f64))
        .collect()
}

/// Composition of a few random averaging kernels: doubly stochastic and
/// increasing.
pub fn averaging_kernel<R: Rng + ?Sized>(rng: &mut R, denom: u32) -> LevelKernel {
    let n = rng.gen_range(1..=3);
    let mut k = LevelKernel::identity();
    for _ in 0..n {
        k = k.compose(&LevelKernel::averaging(&level_set(rng, denom, 3))).unwrap();
    }
    k
}

/// Kernel whose rows are uniform laws on windows that move up with the
/// source cell, mixed with an averaging kernel; always increasing.
pub fn increasing_kernel<R: Rng + ?Sized>(rng: &mut R, denom: u32) -> LevelKernel {
    match rng.gen_range(0..3) {
        0 => averaging_kernel(rng, denom),
        1 => window_kernel(rng, denom),
        _ => window_kernel(rng, denom).compose(&averaging_kernel(rng, denom)).unwrap(),
    }
}

fn window_kernel<R: Rng + ?Sized>(rng: &mut R, denom: u32) -> LevelKernel {
    let cells = rng.gen_range(1..=denom.min(8));
    let grid: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
    let mut lo: Vec<u32> = (0..cells).map(|_| rng.gen_range(0..denom)).collect();
    lo.sort_unstable();
    let mut hi: Vec<u32> = lo.iter().map(|&l| rng.gen_range(l + 1..=denom)).collect();
    for i in 1..hi.len() {
        hi[i] = hi[i].max(hi[i - 1]);
    }
    let targets: Vec<LevelDensity> = lo
        .iter()
        .zip(&hi)
        .map(|(&l, &h)| LevelDensity::uniform_on(l as f64 / denom as f64, h as f64 / denom as f64))
        .collect();
    let n = cells as usize;
    let mut coef = vec![0.0; n * n];
    for i in 0..n {
        coef[i * n + i] = 1.0;
    }
    LevelKernel::from_rows(grid, vec![0.0; n], targets, coef).unwrap()
}

/// Convex combination of the identity and of block permutations on
/// `bins` equal bins: doubly stochastic, usually not increasing.
pub fn doubly_stochastic_kernel<R: Rng + ?Sized>(rng: &mut R, bins: u32) -> LevelKernel {
    let n = bins as usize;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let targets: Vec<LevelDensity> = (0..n).map(|i| LevelDensity::uniform_on(grid[i], grid[i + 1])).collect();
    let perms = rng.gen_range(1..=3);
    let mut weights: Vec<f64> = (0..=perms).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let ident = vec![weights[0]; n];
    let mut coef = vec![0.0; n * n];
    for &w in &weights[1..] {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(rng);
        for (i, &j) in p.iter().enumerate() {
            coef[i * n + j] += w;
        }
    }
    LevelKernel::from_rows(grid, ident, targets, coef).unwrap()
}

/// General row-stochastic kernel on `bins` equal bins.
pub fn kernel<R: Rng + ?Sized>(rng: &mut R, bins: u32) -> LevelKernel {
    let n = bins as usize;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let nt = rng.gen_range(1..=3);
    let targets: Vec<LevelDensity> = (0..nt)
        .map(|_| {
            let d: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect();
            let mut d = d;
            d[rng.gen_range(0..n)] += 0.5;
            LevelDensity::new(grid.clone(), d).unwrap().normalize().unwrap()
        })
        .collect();
    let mut ident = vec![0.0; n];
    let mut coef = vec![0.0; n * nt];
    for i in 0..n {
        let mut w: Vec<f64> = (0..=nt).map(|_| rng.gen_range(0.0..1.0)).collect();
        if rng.gen_bool(0.3) {
            w[0] = 0.0;
        }
        let s: f64 = w.iter().sum();
        ident[i] = w[0] / s;
        for j in 0..nt {
            coef[i * nt + j] = w[j + 1] / s;
        }
    }
    LevelKernel::from_rows(grid, ident, targets, coef).unwrap()
}
