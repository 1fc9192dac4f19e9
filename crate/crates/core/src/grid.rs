//! Uniform spatial grids on [-X, X)ᵈ and scale grids on [s_min, s_max).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic grid of n points per axis, x_k = -X + k·h with h = 2X/n.
/// Flat indices are row-major: axis 0 varies slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpatialGrid {
    pub d: usize,
    pub n: usize,
    pub half_extent: f64,
}

impl SpatialGrid {
    pub fn new(d: usize, n: usize, half_extent: f64) -> Result<Self> {
        if d == 0 || n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "spatial grid needs d ≥ 1 and an even n ≥ 2 (d={d}, n={n})"
            )));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::InvalidParameter(format!("half extent must be positive, got {half_extent}")));
        }
        if (n as f64).powi(d as i32) > 1e8 {
            return Err(Error::InvalidParameter(format!("grid of {n}^{d} points is too large")));
        }
        Ok(Self { d, n, half_extent })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_extent / self.n as f64
    }
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }
    pub fn coord(&self, k: usize) -> f64 {
        -self.half_extent + k as f64 * self.h()
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &k| acc * self.n + k)
    }

    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for a in (0..self.d).rev() {
            out[a] = self.coord(rem % self.n);
            rem /= self.n;
        }
    }

    pub fn point_vec(&self, idx: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        self.point(idx, &mut v);
        v
    }

    /// Flat index of the origin (k = n/2 on every axis).
    pub fn origin_index(&self) -> usize {
        self.flat_index(&vec![self.n / 2; self.d])
    }

    /// Signed integer offset along an axis for periodic index k.
    pub fn signed(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn freq_step(&self) -> f64 {
        1.0 / (2.0 * self.half_extent)
    }

    pub fn nyquist(&self) -> f64 {
        self.n as f64 * self.freq_step() / 2.0
    }

    /// Frequency vector of DFT bin `idx` (signed bins times 1/(2X)).
    pub fn frequency(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        let step = self.freq_step();
        for a in (0..self.d).rev() {
            out[a] = self.signed(rem % self.n) as f64 * step;
            rem /= self.n;
        }
    }

    pub fn lattice_offset(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for a in (0..self.d).rev() {
            out[a] = self.signed(rem % self.n) as f64 * self.h();
            rem /= self.n;
        }
    }

    pub fn refine(&self) -> Self {
        Self { n: self.n * 2, ..*self }
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// m left-endpoint samples s_j = s_min + jΔs, Δs = (s_max - s_min)/m; sample j
/// represents the cell [s_j, s_j + Δs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleGrid {
    pub m: usize,
    pub s_min: f64,
    pub s_max: f64,
}

impl ScaleGrid {
    pub fn new(m: usize, s_min: f64, s_max: f64) -> Result<Self> {
        if m == 0 || !(s_max > s_min) || !s_min.is_finite() || !s_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale grid needs m ≥ 1 and s_min < s_max (m={m}, [{s_min}, {s_max}])"
            )));
        }
        Ok(Self { m, s_min, s_max })
    }

    /// Parses `smin:smax:m`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("scale grid '{text}' is not smin:smax:m")));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'")));
        let m = parts[2].trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad count '{}'", parts[2])))?;
        Self::new(m, num(parts[0])?, num(parts[1])?)
    }

    pub fn step(&self) -> f64 {
        (self.s_max - self.s_min) / self.m as f64
    }

    pub fn sample(&self, j: usize) -> f64 {
        self.s_min + j as f64 * self.step()
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.sample(j)).collect()
    }

    /// ∫ over cell j of |det A|^{-s} ds.
    pub fn haar_weight(&self, j: usize, abs_det: f64) -> f64 {
        cell_mass(self.sample(j), self.step(), abs_det.ln())
    }

    pub fn haar_weights(&self, abs_det: f64) -> Vec<f64> {
        (0..self.m).map(|j| self.haar_weight(j, abs_det)).collect()
    }

    /// Index j with s_j = s (up to 1e-9 of a step), if s is a sample.
    pub fn index_of(&self, s: f64) -> Option<usize> {
        let u = (s - self.s_min) / self.step();
        let k = u.round();
        if (u - k).abs() < 1e-9 && k >= 0.0 && (k as usize) < self.m {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn refine(&self) -> Self {
        Self { m: self.m * 2, ..*self }
    }
}

/// ∫_a^{a+w} e^{-s·ln_det} ds.
pub fn cell_mass(a: f64, w: f64, ln_det: f64) -> f64 {
    let x = w * ln_det;
    if x.abs() < 1e-8 {
        (-a * ln_det).exp() * w * (1.0 - x / 2.0)
    } else {
        (-a * ln_det).exp() * (-(-x).exp_m1()) / ln_det
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_grid_geometry() {
        let g = SpatialGrid::new(2, 8, 2.0).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.len(), 64);
        assert_eq!(g.point_vec(g.origin_index()), vec![0.0, 0.0]);
        assert_eq!(g.point_vec(1), vec![-2.0, -1.5]);
        let mut f = [0.0; 2];
        g.frequency(g.flat_index(&[7, 3]), &mut f);
        assert_eq!(f, [-0.25, 0.75]);
        assert!(SpatialGrid::new(1, 7, 1.0).is_err());
    }

    #[test]
    fn scale_weights_integrate_exactly() {
        let sg = ScaleGrid::new(16, -2.0, 3.0).unwrap();
        for det in [2.0f64, 4.0, 8.0] {
            let total: f64 = sg.haar_weights(det).iter().sum();
            let exact = (det.powf(2.0) - det.powf(-3.0)) / det.ln();
            assert!((total - exact).abs() < 1e-12 * exact);
        }
        assert_eq!(sg.index_of(sg.sample(5)), Some(5));
        assert_eq!(sg.index_of(0.1), None);
        assert_eq!(ScaleGrid::parse("-2:2:32").unwrap(), ScaleGrid::new(32, -2.0, 2.0).unwrap());
    }
}
