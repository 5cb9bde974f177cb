//! Deterministic sampling helpers: axis-aligned boxes and Halton
//! low-discrepancy sequences. All multistart seeding and quasi-random
//! validation sampling in this crate goes through these, so identical inputs
//! reproduce identical runs bit for bit.

use crate::State;

/// Axis-aligned box in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds must share a dimension");
        assert!(
            lo.iter().zip(&hi).all(|(a, b)| a < b),
            "box must have positive extent on every axis"
        );
        SampleBox { lo, hi }
    }

    /// Symmetric cube [-r, r]^d.
    pub fn centered(dim: usize, r: f64) -> Self {
        SampleBox::new(vec![-r; dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &State) -> bool {
        u.iter()
            .enumerate()
            .all(|(i, &x)| x >= self.lo[i] && x <= self.hi[i])
    }

    /// Euclidean length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Map a point of the unit cube into the box.
    pub fn map_unit(&self, q: &[f64]) -> State {
        State::from_iterator(
            self.dim(),
            q.iter()
                .enumerate()
                .map(|(i, &x)| self.lo[i] + x * (self.hi[i] - self.lo[i])),
        )
    }

    /// True when `u` lies within `margin` of some face.
    pub fn near_boundary(&self, u: &State, margin: f64) -> bool {
        u.iter()
            .enumerate()
            .any(|(i, &x)| x - self.lo[i] <= margin || self.hi[i] - x <= margin)
    }
}

const HALTON_PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical-inverse of `index` in base `b`.
fn radical_inverse(mut index: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let base = b as f64;
    while index > 0 {
        f /= base;
        r += f * (index % b) as f64;
        index /= b;
    }
    r
}

/// Halton sequence over the unit cube in `dim` dimensions.
///
/// `seed` offsets the start index, which is enough to decorrelate repeated
/// draws while keeping every run reproducible.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= HALTON_PRIMES.len(), "Halton supports dim <= 8");
        // index 0 is the all-zero corner; skip it.
        Halton {
            dim,
            index: 1 + seed,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let idx = self.index;
        self.index += 1;
        (0..self.dim)
            .map(|k| radical_inverse(idx, HALTON_PRIMES[k]))
            .collect()
    }

    /// Next sample mapped into `sbox`.
    pub fn next_in(&mut self, sbox: &SampleBox) -> State {
        let q = self.next_point();
        sbox.map_unit(&q)
    }
}

/// Deterministic near-uniform directions on the unit sphere in R^d.
///
/// In one dimension this is the pair {+1, -1}; otherwise Halton points of the
/// cube are recentred and normalized, skipping near-zero vectors.
pub fn unit_directions(dim: usize, n: usize) -> Vec<State> {
    if dim == 1 {
        return (0..n)
            .map(|k| State::from_element(1, if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
    }
    if dim == 2 {
        // evenly spaced angles: exact coverage matters more than discrepancy
        return (0..n)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
                State::from_vec(vec![phi.cos(), phi.sin()])
            })
            .collect();
    }
    let mut h = Halton::new(dim, 0);
    let mut dirs = Vec::with_capacity(n);
    while dirs.len() < n {
        let q = h.next_point();
        let v = State::from_iterator(dim, q.iter().map(|&x| 2.0 * x - 1.0));
        let nrm = v.norm();
        if nrm > 1e-6 {
            dirs.push(v / nrm);
        }
    }
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_is_deterministic_and_in_unit_cube() {
        let mut a = Halton::new(3, 7);
        let mut b = Halton::new(3, 7);
        for _ in 0..100 {
            let pa = a.next_point();
            let pb = b.next_point();
            assert_eq!(pa, pb);
            assert!(pa.iter().all(|&x| (0.0..1.0).contains(&x)));
        }
    }

    #[test]
    fn box_mapping_respects_bounds() {
        let sbox = SampleBox::new(vec![-2.0, 1.0], vec![3.0, 4.0]);
        let mut h = Halton::new(2, 0);
        for _ in 0..200 {
            let u = h.next_in(&sbox);
            assert!(sbox.contains(&u));
        }
        assert!((sbox.diameter() - (25.0f64 + 9.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn directions_are_unit() {
        for dim in 1..=3 {
            for v in unit_directions(dim, 16) {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
