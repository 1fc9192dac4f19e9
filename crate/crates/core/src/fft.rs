//! n-dimensional FFTs and the continuous Fourier transform on a periodic grid,
//! f̂(ξ) = ∫ f(x) e^{-2πi x·ξ} dx.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::SpatialGrid;

#[derive(Clone)]
pub struct Spectral {
    grid: SpatialGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self { grid, fwd: planner.plan_fft_forward(grid.n), inv: planner.plan_fft_inverse(grid.n) }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let d = self.grid.d;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        if d == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..d - 1 {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = data[base + off + k * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        data[base + off + k * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT over all axes.
    pub fn dft(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd.clone());
    }

    /// Unnormalized inverse DFT over all axes.
    pub fn idft(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv.clone());
    }

    fn parity(&self, idx: usize) -> bool {
        let mut rem = idx;
        let mut s = 0;
        for _ in 0..self.grid.d {
            s += rem % self.grid.n;
            rem /= self.grid.n;
        }
        s % 2 == 1
    }

    /// Samples of f̂ at the grid frequencies from samples of f.
    pub fn to_fourier(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut out = samples.to_vec();
        self.dft(&mut out);
        let vol = self.grid.cell_volume();
        for (i, v) in out.iter_mut().enumerate() {
            *v *= if self.parity(i) { -vol } else { vol };
        }
        out
    }

    /// Samples of f on the grid from samples of f̂ (consumes the buffer).
    pub fn from_fourier(&self, mut spectrum: Vec<Complex64>) -> Vec<Complex64> {
        let dxi = self.grid.freq_step().powi(self.grid.d as i32);
        for (i, v) in spectrum.iter_mut().enumerate() {
            *v *= if self.parity(i) { -dxi } else { dxi };
        }
        self.idft(&mut spectrum);
        spectrum
    }
}

/// Places samples of `grid` in the middle of the larger `padded` grid (same
/// spacing, zeros elsewhere).
pub fn embed_centered(grid: &SpatialGrid, padded: &SpatialGrid, samples: &[Complex64]) -> Vec<Complex64> {
    let off = (padded.n - grid.n) / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); padded.len()];
    let mut multi = vec![0usize; grid.d];
    for (k, v) in samples.iter().enumerate() {
        grid.multi_index(k, &mut multi);
        multi.iter_mut().for_each(|m| *m += off);
        out[padded.flat_index(&multi)] = *v;
    }
    out
}

/// The inverse of [`embed_centered`]: the middle block of a padded array.
pub fn extract_centered(grid: &SpatialGrid, padded: &SpatialGrid, samples: &[Complex64]) -> Vec<Complex64> {
    let off = (padded.n - grid.n) / 2;
    let mut multi = vec![0usize; grid.d];
    (0..grid.len())
        .map(|k| {
            grid.multi_index(k, &mut multi);
            multi.iter_mut().for_each(|m| *m += off);
            samples[padded.flat_index(&multi)]
        })
        .collect()
}

pub fn l2_norm(samples: &[Complex64], cell_volume: f64) -> f64 {
    (samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell_volume).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_transform_is_gaussian() {
        let g = SpatialGrid::new(2, 128, 6.0).unwrap();
        let sp = Spectral::new(g);
        let f: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let x = g.point_vec(i);
                Complex64::new((-std::f64::consts::PI * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0)
            })
            .collect();
        let fh = sp.to_fourier(&f);
        let mut xi = [0.0; 2];
        for (i, v) in fh.iter().enumerate() {
            g.frequency(i, &mut xi);
            let want = (-std::f64::consts::PI * (xi[0] * xi[0] + xi[1] * xi[1])).exp();
            assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
        let back = sp.from_fourier(fh);
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn shifted_gaussian_picks_up_phase() {
        let g = SpatialGrid::new(1, 128, 8.0).unwrap();
        let sp = Spectral::new(g);
        let f: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((-std::f64::consts::PI * (g.coord(i) - 1.0).powi(2)).exp(), 0.0))
            .collect();
        let fh = sp.to_fourier(&f);
        let mut xi = [0.0];
        for (i, v) in fh.iter().enumerate() {
            g.frequency(i, &mut xi);
            let want = Complex64::from_polar((-std::f64::consts::PI * xi[0] * xi[0]).exp(), -2.0 * std::f64::consts::PI * xi[0]);
            assert!((v - want).norm() < 1e-12);
        }
    }
}
