//! Deterministic quasi-random (Halton) sampling.

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while i > 0 {
        acc += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    acc
}

/// Halton sequence in `dim` dimensions; index 0 (the origin) is skipped.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    next: u64,
}

impl Halton {
    pub fn new(dim: usize) -> Self {
        Self::starting_at(dim, 1)
    }

    pub fn starting_at(dim: usize, index: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension above {}", PRIMES.len());
        Self { dim, next: index.max(1) }
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        PRIMES[..self.dim]
            .iter()
            .map(|&b| radical_inverse(index, b))
            .collect()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let p = self.point(self.next);
        self.next += 1;
        p
    }

    pub fn position(&self) -> u64 {
        self.next
    }
}

/// Number of unit-cube coordinates consumed by [`unit_direction`].
pub fn direction_dims(d: usize) -> usize {
    match d {
        1 | 2 => 1,
        _ => d + d % 2,
    }
}

/// Maps unit-cube coordinates to a Euclidean unit vector in ℝᵈ.
pub fn unit_direction(u: &[f64], d: usize) -> Vec<f64> {
    match d {
        1 => vec![if u[0] < 0.5 { -1.0 } else { 1.0 }],
        2 => {
            let a = 2.0 * std::f64::consts::PI * u[0];
            vec![a.cos(), a.sin()]
        }
        _ => {
            let mut g = Vec::with_capacity(d + 1);
            for pair in u.chunks(2) {
                let r = (-2.0 * (1.0 - pair[0]).max(1e-300).ln()).sqrt();
                let a = 2.0 * std::f64::consts::PI * pair[1];
                g.push(r * a.cos());
                g.push(r * a.sin());
            }
            g.truncate(d);
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            g.iter().map(|v| v / n).collect()
        }
    }
}
