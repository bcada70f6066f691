//! Uniform grid on the probability simplex.
//!
//! Grid points are compositions `β` of the resolution `ρ` into `dim`
//! nonnegative parts, scaled by `1/ρ`, stored in ascending lexicographic
//! order of `β`. Index order is the tie-break order for nearest-neighbor
//! queries.

use std::cell::RefCell;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Default cap on the number of grid points.
pub const DEFAULT_CAPACITY: u128 = 10_000_000;

/// Distances within this tolerance (in simplex units) count as ties.
pub const TIE_TOL: f64 = 1e-9;

/// `C(ρ + dim − 1, dim − 1)`, saturating at `u128::MAX`.
pub fn representative_count(dim: usize, resolution: u32) -> u128 {
    if dim == 0 {
        return 0;
    }
    binomial((resolution as u128) + dim as u128 - 1, dim as u128 - 1)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for t in 0..k {
        // acc * (n - t) / (t + 1) stays integral at every step.
        acc = match acc.checked_mul(n - t) {
            Some(v) => v / (t + 1),
            None => return u128::MAX,
        };
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepresentativeSet {
    dim: usize,
    resolution: u32,
    /// Flattened compositions, `dim` entries per point.
    betas: Vec<u32>,
    /// `binom[a * (dim + 1) + b] = C(a, b)` for `a ≤ ρ + dim`, `b ≤ dim`.
    binom: Vec<u64>,
}

impl RepresentativeSet {
    pub fn enumerate(dim: usize, resolution: u32) -> Result<Self> {
        Self::enumerate_with_capacity(dim, resolution, DEFAULT_CAPACITY)
    }

    pub fn enumerate_with_capacity(dim: usize, resolution: u32, capacity: u128) -> Result<Self> {
        if dim == 0 || resolution == 0 {
            return Err(Error::InvalidArgument(
                "feature count and resolution must be at least 1".into(),
            ));
        }
        let count = representative_count(dim, resolution);
        if count > capacity {
            return Err(Error::CapacityExceeded {
                what: "representative feature beliefs",
                required: count,
                limit: capacity,
            });
        }
        let count = count as usize;
        let mut betas = Vec::with_capacity(count * dim);
        let mut beta = vec![0u32; dim];
        beta[dim - 1] = resolution;
        loop {
            betas.extend_from_slice(&beta);
            if !next_composition(&mut beta) {
                break;
            }
        }
        debug_assert_eq!(betas.len(), count * dim);
        Ok(RepresentativeSet {
            dim,
            resolution,
            betas,
            binom: binomial_table(resolution as usize + dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.betas.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn composition(&self, index: usize) -> &[u32] {
        &self.betas[index * self.dim..(index + 1) * self.dim]
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let rho = self.resolution as f64;
        self.composition(index)
            .iter()
            .map(|&b| b as f64 / rho)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.betas.chunks(self.dim)
    }

    fn c(&self, a: usize, b: usize) -> u64 {
        self.binom[a * (self.dim + 1) + b]
    }

    /// Lexicographic rank of a composition of `ρ`.
    pub fn rank(&self, beta: &[u32]) -> usize {
        debug_assert_eq!(beta.len(), self.dim);
        let m = self.dim;
        let mut remaining = self.resolution as usize;
        let mut rank: u64 = 0;
        for (p, &b) in beta.iter().enumerate().take(m - 1) {
            let b = b as usize;
            // Compositions with prefix fixed before p and a smaller value v at
            // p: Σ_{v<b} C(R − v + k, k) with k = m − p − 2 parts left over,
            // which telescopes to C(R + k + 1, k + 1) − C(R − b + k + 1, k + 1).
            let k = m - p - 2;
            rank += self.c(remaining + k + 1, k + 1) - self.c(remaining - b + k + 1, k + 1);
            remaining -= b;
        }
        rank as usize
    }

    /// Index of the grid point nearest to `q` in the max norm, ties broken
    /// toward the smallest index.
    pub fn nearest(&self, q: &[f64]) -> usize {
        SCRATCH.with(|cell| {
            let s = &mut *cell.borrow_mut();
            let mut beta = std::mem::take(&mut s.beta);
            beta.resize(self.dim, 0);
            self.nearest_with(q, &mut beta, s);
            let rank = self.rank(&beta);
            s.beta = beta;
            rank
        })
    }

    /// Writes the nearest composition into `beta` and returns its max-norm
    /// distance to `q` in simplex units.
    pub fn nearest_composition(&self, q: &[f64], beta: &mut [u32]) -> f64 {
        SCRATCH.with(|cell| self.nearest_with(q, beta, &mut cell.borrow_mut()))
    }

    fn nearest_with(&self, q: &[f64], beta: &mut [u32], s: &mut Scratch) -> f64 {
        debug_assert_eq!(q.len(), self.dim);
        let rho = self.resolution as f64;
        let slack = TIE_TOL * rho;
        s.x.clear();
        s.x.extend(q.iter().map(|v| v * rho));
        let x = &s.x;

        // The optimal deviation (in grid units) is attained where some
        // coordinate hits an integer, so it is 0 or a fractional distance.
        let candidates = &mut s.candidates;
        candidates.clear();
        candidates.push(0.0);
        for &xi in x {
            let f = xi - xi.floor();
            candidates.push(f);
            candidates.push(1.0 - f);
        }
        candidates.sort_unstable_by(|a, b| a.total_cmp(b));

        let target = self.resolution as i64;
        s.lo.resize(self.dim, 0);
        s.hi.resize(self.dim, 0);
        let (lo, hi) = (&mut s.lo, &mut s.hi);
        let found = candidates
            .iter()
            .any(|&t| bounds(x, t + slack, target, lo, hi));
        if !found {
            // Deviation below one grid unit is always achievable for a
            // normalized q; larger radii cover inputs off the simplex.
            let mut t = 1.0;
            while !bounds(x, t + slack, target, lo, hi) {
                t *= 2.0;
            }
        }

        // Lexicographically smallest composition inside the box.
        let mut rest_hi: i64 = hi.iter().sum();
        let mut remaining = target;
        for y in 0..self.dim {
            rest_hi -= hi[y];
            let v = lo[y].max(remaining - rest_hi);
            beta[y] = v as u32;
            remaining -= v;
        }
        beta.iter()
            .zip(q)
            .map(|(&b, &qy)| (b as f64 / rho - qy).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Default)]
struct Scratch {
    x: Vec<f64>,
    candidates: Vec<f64>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    beta: Vec<u32>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

/// Integer box `[lo, hi]` of coordinates within `radius` of `x`, clipped to
/// `[0, target]`. Returns whether it contains a composition of `target`.
fn bounds(x: &[f64], radius: f64, target: i64, lo: &mut [i64], hi: &mut [i64]) -> bool {
    let (mut sum_lo, mut sum_hi) = (0i64, 0i64);
    for (k, &xi) in x.iter().enumerate() {
        let l = ((xi - radius).ceil() as i64).max(0);
        let h = ((xi + radius).floor() as i64).min(target);
        if l > h {
            return false;
        }
        lo[k] = l;
        hi[k] = h;
        sum_lo += l;
        sum_hi += h;
    }
    sum_lo <= target && target <= sum_hi
}

/// Advances `beta` to the next composition in ascending lexicographic order.
fn next_composition(beta: &mut [u32]) -> bool {
    let m = beta.len();
    if m < 2 {
        return false;
    }
    let mut tail = beta[m - 1];
    let mut p = m - 1;
    // Find the rightmost p ≤ m − 2 with positive mass strictly after it.
    while p > 0 {
        p -= 1;
        if tail > 0 {
            beta[p] += 1;
            for v in &mut beta[p + 1..m - 1] {
                *v = 0;
            }
            beta[m - 1] = tail - 1;
            return true;
        }
        tail += beta[p];
    }
    false
}

fn binomial_table(max_n: usize, max_k: usize) -> Vec<u64> {
    let w = max_k + 1;
    let mut t = vec![0u64; (max_n + 1) * w];
    for a in 0..=max_n {
        t[a * w] = 1;
        for b in 1..=max_k.min(a) {
            t[a * w + b] = t[(a - 1) * w + b - 1].saturating_add(t[(a - 1) * w + b]);
        }
    }
    t
}

#[derive(Serialize, Deserialize)]
struct RepresentativeDoc {
    dimension: usize,
    resolution: u32,
    points: Vec<Vec<u32>>,
}

impl Serialize for RepresentativeSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RepresentativeDoc {
            dimension: self.dim,
            resolution: self.resolution,
            points: self.iter().map(<[u32]>::to_vec).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RepresentativeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = RepresentativeDoc::deserialize(d)?;
        let set = RepresentativeSet::enumerate(doc.dimension, doc.resolution)
            .map_err(D::Error::custom)?;
        let matches = doc.points.len() == set.len()
            && doc
                .points
                .iter()
                .zip(set.iter())
                .all(|(a, b)| a.as_slice() == b);
        if !matches {
            return Err(D::Error::custom(
                "representative list is not the canonical grid",
            ));
        }
        Ok(set)
    }
}
