//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use optnav::domain::CSpaceMap;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `K₀(x) = ∫₀^∞ exp(-x cosh t) dt`, truncated where the integrand drops below e^-700.
pub fn k0_quadrature(x: f64) -> f64 {
    let upper = (700.0 / x).max(1.0).acosh() + 1.0;
    let f = |t: f64| (-x * t.cosh()).exp();
    // the integrand is at most e^-x, so scale the tolerance with it
    integrate(&f, 0.0, upper, 1e-14 * (-x).exp())
}

#[derive(Copy, Clone, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 8-connected path length (metric units) from the center of cell
/// `start` to the center of the nearest goal cell, moving through free cells.
/// Diagonal moves require both adjacent orthogonal cells to be passable.
pub fn dijkstra_8(map: &CSpaceMap, start: usize) -> Option<f64> {
    let grid = map.grid();
    assert_eq!(grid.dim(), 2);
    let (nx, ny) = (grid.counts()[0] as isize, grid.counts()[1] as isize);
    let (hx, hy) = (grid.axis(0).spacing, grid.axis(1).spacing);
    let passable = |i: isize, j: isize| {
        i >= 0 && j >= 0 && i < nx && j < ny && {
            let c = map.cell(grid.index(&[i as usize, j as usize]));
            c.is_free() || c.is_goal()
        }
    };
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Entry(0.0, start));
    while let Some(Entry(d, k)) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        if map.cell(k).is_goal() {
            return Some(d);
        }
        let (i, j) = (grid.coord(k, 0) as isize, grid.coord(k, 1) as isize);
        for di in -1..=1isize {
            for dj in -1..=1isize {
                if (di, dj) == (0, 0) || !passable(i + di, j + dj) {
                    continue;
                }
                if di != 0 && dj != 0 && !(passable(i + di, j) && passable(i, j + dj)) {
                    continue;
                }
                let w = ((di as f64 * hx).powi(2) + (dj as f64 * hy).powi(2)).sqrt();
                let n = grid.index(&[(i + di) as usize, (j + dj) as usize]);
                if d + w < dist[n] {
                    dist[n] = d + w;
                    heap.push(Entry(d + w, n));
                }
            }
        }
    }
    None
}

/// Free cells reachable from `start` through face-adjacent free cells.
pub fn flood_fill(map: &CSpaceMap, start: usize) -> Vec<bool> {
    let grid = map.grid();
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(k) = queue.pop_front() {
        for a in 0..grid.dim() {
            for d in [-1isize, 1] {
                if let Some(n) = grid.neighbor(k, a, d) {
                    if !seen[n] && map.cell(n).is_free() {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    seen
}
