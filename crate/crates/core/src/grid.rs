//! Breakpoint grids on `[0,1]` and small helpers shared by the exact modules.

use crate::tol;

/// Sorted union of several breakpoint lists. Points closer than
/// [`tol::REPR`] to an already accepted point are dropped.
pub fn merge(grids: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = grids.iter().flat_map(|g| g.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    snap_sorted(all)
}

/// Removes near-duplicates from a sorted list.
pub fn snap_sorted(sorted: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for p in sorted {
        match out.last() {
            Some(&q) if p - q <= tol::REPR => {}
            _ => out.push(p),
        }
    }
    out
}

/// Index `i` of the cell `(grid[i], grid[i+1]]` containing `x`, clamped to
/// the first and last cells.
pub fn cell_of(grid: &[f64], x: f64) -> usize {
    debug_assert!(grid.len() >= 2);
    let n = grid.len() - 1;
    let k = grid.partition_point(|&b| b < x);
    k.saturating_sub(1).min(n - 1)
}

/// Cell of `grid` that contains the open cell `(lo, hi)` of a finer grid.
pub fn cell_containing(grid: &[f64], lo: f64, hi: f64) -> usize {
    cell_of(grid, 0.5 * (lo + hi))
}

/// Overlap length of `[a, b]` and `[c, d]`.
#[inline]
pub fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// `0, 1/n, ..., 1`.
pub fn uniform(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

pub(crate) fn approx_eq(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps * (1.0 + a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_drops_near_duplicates() {
        let g = merge(&[&[0.0, 0.5, 1.0], &[0.25, 0.5 + 1e-14, 1.0]]);
        assert_eq!(g, vec![0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn cell_lookup_is_left_open() {
        let g = [0.0, 0.5, 1.0];
        assert_eq!(cell_of(&g, 0.5), 0);
        assert_eq!(cell_of(&g, 0.50001), 1);
        assert_eq!(cell_of(&g, 0.0), 0);
        assert_eq!(cell_of(&g, 1.0), 1);
    }
}
