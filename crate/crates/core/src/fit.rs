//! Log-log regression of max-modulus envelopes.

use serde::Serialize;

use crate::anisotropy::Dilation;
use crate::grid::SpatialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

impl DecayFit {
    pub fn flat() -> Self {
        Self { slope: 0.0, intercept: 0.0, r2: 1.0, points: 0 }
    }
}

/// Least-squares line through (x, y).
pub fn regression(xs: &[f64], ys: &[f64]) -> DecayFit {
    let n = xs.len();
    if n < 2 {
        return DecayFit { slope: 0.0, intercept: ys.first().copied().unwrap_or(0.0), r2: 1.0, points: n };
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return DecayFit { slope: 0.0, intercept: my, r2: 1.0, points: n };
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    DecayFit { slope, intercept: my - slope * mx, r2, points: n }
}

/// Points (ln(1+ρ), ln envelope) for shells that lie inside the box, beyond
/// the peak and above the noise floor. The envelope of shell j is the largest
/// modulus found in shells ≥ j.
pub fn spatial_envelope(values: &[f64], grid: &SpatialGrid, dil: &Dilation) -> Vec<(f64, f64)> {
    let det = dil.abs_det();
    let mut x = vec![0.0; grid.d];
    let mut shells: Vec<(i32, f64)> = Vec::new();
    let mut peak = 0.0f64;
    let mut peak_shell = i32::MIN;
    for (k, &v) in values.iter().enumerate() {
        grid.point(k, &mut x);
        let Some(j) = dil.shell(&x) else { continue };
        if v > peak {
            peak = v;
            peak_shell = j;
        }
        match shells.binary_search_by_key(&j, |e| e.0) {
            Ok(i) => shells[i].1 = shells[i].1.max(v),
            Err(i) => shells.insert(i, (j, v)),
        }
    }
    if peak == 0.0 {
        return Vec::new();
    }
    // a shell is inside the box if its outer ellipsoid A^{j+1}Ω fits
    let inside = |j: i32| {
        dil.ellipsoid_extent((j + 1) as f64).map(|e| e.iter().all(|&w| w < grid.half_extent)).unwrap_or(false)
    };
    let mut running = 0.0f64;
    let mut env: Vec<(i32, f64)> = shells.iter().rev().map(|&(j, v)| {
        running = running.max(v);
        (j, running)
    }).collect();
    env.reverse();
    let floor = peak * 1e-13;
    env.into_iter()
        .filter(|&(j, e)| j >= peak_shell.max(0) && inside(j) && e > floor)
        .map(|(j, e)| ((1.0 + det.powi(j)).ln(), e.ln()))
        .collect()
}

pub fn spatial_decay(values: &[f64], grid: &SpatialGrid, dil: &Dilation) -> DecayFit {
    let pts = spatial_envelope(values, grid, dil);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    regression(&xs, &ys)
}

/// Points (|s|, ln envelope) where the envelope at |s| is the largest modulus
/// at any |s'| ≥ |s|, restricted to values above the noise floor.
pub fn scale_envelope(samples: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|&(s, v)| (s.abs(), v.abs())).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scales"));
    let peak = pts.iter().fold(0.0f64, |m, p| m.max(p.1));
    if peak == 0.0 {
        return Vec::new();
    }
    let mut running = 0.0f64;
    let mut env: Vec<(f64, f64)> = pts.iter().rev().map(|&(s, v)| {
        running = running.max(v);
        (s, running)
    }).collect();
    env.reverse();
    env.dedup_by(|a, b| a.0 == b.0);
    env.into_iter().filter(|p| p.1 > peak * 1e-13).map(|(s, e)| (s, e.ln())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x).collect();
        let f = regression(&xs, &ys);
        assert!((f.slope + 2.0).abs() < 1e-14 && (f.intercept - 1.5).abs() < 1e-14 && f.r2 > 0.999_999);
    }

    #[test]
    fn constant_envelope_has_zero_slope() {
        let env = scale_envelope(&[(-1.0, 2.0), (0.0, 2.0), (1.0, 2.0), (2.0, 2.0)]);
        let (xs, ys): (Vec<f64>, Vec<f64>) = env.into_iter().unzip();
        assert_eq!(regression(&xs, &ys).slope, 0.0);
    }
}
