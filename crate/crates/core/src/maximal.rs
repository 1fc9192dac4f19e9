//! Anisotropic maximal operators on sampled data: Hardy–Littlewood over
//! quasi-norm balls, Peetre-type maxima of convolution slices, and local
//! maximal functions on the group.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Dilation;
use crate::error::{Error, Result};
use crate::fft::{embed_centered, extract_centered, Spectral};
use crate::grid::SpatialGrid;
use crate::group::GroupField;
use crate::linalg::flatten;

/// Ball levels j of the balls y + AʲΩ; `None` picks the level from the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HlConfig {
    #[serde(default)]
    pub j_min: Option<i32>,
    #[serde(default)]
    pub j_max: Option<i32>,
    #[serde(default)]
    pub centers: Centers,
}

/// Admissible ball centers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centers {
    /// Lattice points only.
    Grid,
    /// Lattice points plus centers putting the point on the ball boundary,
    /// with ball averages interpolated between lattice centers.
    #[default]
    Refined,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Data outside the box is zero.
    #[default]
    Zero,
    /// Offsets wrap around the box.
    Periodic,
}

/// The neighborhood [−N, N]ᵈ × [−N, N] of the identity, sampled on a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QBox {
    pub half_width: f64,
    /// Points per axis.
    pub samples: usize,
    /// Closed symmetric samples −N..N instead of the half-open [−N, N).
    #[serde(default)]
    pub symmetric: bool,
}

impl Default for QBox {
    fn default() -> Self {
        Self { half_width: 1.0, samples: 4, symmetric: false }
    }
}

impl QBox {
    pub fn identity() -> Self {
        Self { half_width: 0.0, samples: 1, symmetric: true }
    }

    /// Axis samples; always contains 0.
    pub fn axis(&self) -> Vec<f64> {
        let n = self.half_width;
        let k = self.samples.max(1);
        let mut pts: Vec<f64> = if n == 0.0 || k == 1 {
            vec![0.0]
        } else if self.symmetric {
            (0..k).map(|i| -n + 2.0 * n * i as f64 / (k - 1) as f64).collect()
        } else {
            (0..k).map(|i| -n + 2.0 * n * i as f64 / k as f64).collect()
        };
        if !pts.contains(&0.0) {
            pts.push(0.0);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// All sampled (a, σ) ∈ Q.
    pub fn points(&self, d: usize) -> Vec<(Vec<f64>, f64)> {
        let axis = self.axis();
        let k = axis.len();
        let mut out = Vec::with_capacity(k.pow(d as u32 + 1));
        for idx in 0..k.pow(d as u32 + 1) {
            let mut rem = idx;
            let mut a = vec![0.0; d];
            for v in a.iter_mut() {
                *v = axis[rem % k];
                rem /= k;
            }
            out.push((a, axis[rem % k]));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MaximalConfig {
    #[serde(default)]
    pub hl: HlConfig,
    pub beta: f64,
    #[serde(default)]
    pub q: QBox,
    #[serde(default)]
    pub boundary: Boundary,
}

/// Lattice offsets z (in units of h) with ‖A⁻ʲhz‖_P < c, stored as runs along
/// the last axis. `count` is the full lattice count; runs are clipped to
/// offsets that can connect two points of the box.
#[derive(Debug, Clone)]
pub struct Footprint {
    pub level: i32,
    pub runs: Vec<Run>,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub prefix: Vec<i64>,
    pub lo: i64,
    pub hi: i64,
}

pub fn footprint(grid: &SpatialGrid, dil: &Dilation, j: i32) -> Footprint {
    let d = grid.d;
    let h = grid.h();
    let inv = dil.matrix().integer_power(-j);
    let q = inv.transpose() * &dil.ellipsoid().p * &inv * (h * h);
    let qf = flatten(&q);
    let c2 = dil.ellipsoid().c.powi(2);
    let inside = |z: &[i64]| -> bool {
        let mut acc = 0.0;
        for a in 0..d {
            for b in 0..d {
                acc += qf[a * d + b] * z[a] as f64 * z[b] as f64;
            }
        }
        acc < c2
    };
    let ext = dil.ellipsoid_extent(j as f64).expect("integer powers always exist");
    let reach: Vec<i64> = ext.iter().map(|e| (e / h).floor() as i64 + 1).collect();
    let lim = grid.n as i64 - 1;
    let last = d - 1;
    let qdd = qf[last * d + last];
    let mut runs = Vec::new();
    let mut count = 0.0;
    let mut prefix: Vec<i64> = reach[..last].iter().map(|r| -r).collect();
    let mut z = vec![0i64; d];
    loop {
        // qdd x² + 2 b x + c0 < c²
        let b: f64 = (0..last).map(|a| qf[a * d + last] * prefix[a] as f64).sum();
        let mut c0 = 0.0;
        for a in 0..last {
            for e in 0..last {
                c0 += qf[a * d + e] * prefix[a] as f64 * prefix[e] as f64;
            }
        }
        let disc = b * b - qdd * (c0 - c2);
        if disc > 0.0 {
            let root = disc.sqrt();
            let mut lo = ((-b - root) / qdd).ceil() as i64;
            let mut hi = ((-b + root) / qdd).floor() as i64;
            z[..last].copy_from_slice(&prefix);
            z[last] = lo;
            while lo <= hi && !inside(&z) {
                lo += 1;
                z[last] = lo;
            }
            z[last] = lo - 1;
            while inside(&z) {
                lo -= 1;
                z[last] = lo - 1;
            }
            z[last] = hi;
            while hi >= lo && !inside(&z) {
                hi -= 1;
                z[last] = hi;
            }
            z[last] = hi + 1;
            while inside(&z) {
                hi += 1;
                z[last] = hi + 1;
            }
            if lo <= hi {
                count += (hi - lo + 1) as f64;
                let (cl, ch) = (lo.max(-lim), hi.min(lim));
                if cl <= ch && prefix.iter().all(|p| p.abs() <= lim) {
                    runs.push(Run { prefix: prefix.clone(), lo: cl, hi: ch });
                }
            }
        }
        // odometer over the prefix box
        let mut a = last;
        loop {
            if a == 0 {
                return Footprint { level: j, runs, count };
            }
            a -= 1;
            prefix[a] += 1;
            if prefix[a] <= reach[a] {
                break;
            }
            prefix[a] = -reach[a];
        }
    }
}

/// The ball levels actually used: from the largest level whose footprint is a
/// single point to the smallest whose ball contains every box offset.
pub fn ball_levels(grid: &SpatialGrid, dil: &Dilation, cfg: &HlConfig) -> Result<(i32, i32)> {
    let j_min = match cfg.j_min {
        Some(j) => j,
        None => {
            let mut j = 0;
            if footprint(grid, dil, j).count <= 1.0 {
                while footprint(grid, dil, j + 1).count <= 1.0 {
                    j += 1;
                }
            } else {
                while footprint(grid, dil, j).count > 1.0 {
                    j -= 1;
                }
            }
            j
        }
    };
    let j_max = match cfg.j_max {
        Some(j) => j,
        None => {
            let d = grid.d;
            let span = (grid.n - 1) as f64 * grid.h();
            let covers = |j: i32| {
                (0..1usize << d).all(|corner| {
                    let z: Vec<f64> = (0..d).map(|a| if corner >> a & 1 == 1 { span } else { -span }).collect();
                    dil.p_norm(&dil.power_vec(-j, &z)) < dil.ellipsoid().c
                })
            };
            let mut j = j_min;
            while !covers(j) {
                j += 1;
            }
            j
        }
    };
    if j_min > j_max {
        return Err(Error::EmptyBallRange(j_min, j_max));
    }
    Ok((j_min, j_max))
}

/// Row `r` of a grid (all axes but the last fixed) as a multi-index prefix.
fn row_prefix(grid: &SpatialGrid, r: usize) -> Vec<i64> {
    let mut out = vec![0i64; grid.d - 1];
    let mut rem = r;
    for a in (0..grid.d - 1).rev() {
        out[a] = (rem % grid.n) as i64;
        rem /= grid.n;
    }
    out
}

fn shifted_row(grid: &SpatialGrid, prefix: &[i64], by: &[i64]) -> Option<usize> {
    let n = grid.n as i64;
    let mut r = 0usize;
    for (p, b) in prefix.iter().zip(by) {
        let v = p + b;
        if v < 0 || v >= n {
            return None;
        }
        r = r * grid.n + v as usize;
    }
    Some(r)
}

/// Average of `values` over the footprint centred at every grid point.
fn ball_averages(values: &[f64], grid: &SpatialGrid, fp: &Footprint) -> Vec<f64> {
    let n = grid.n;
    let rows = grid.len() / n;
    let cums: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            let mut c = vec![0.0; n + 1];
            for k in 0..n {
                c[k + 1] = c[k] + values[r * n + k];
            }
            c
        })
        .collect();
    let out = crate::par::map_indices(rows, |r| {
        let pre = row_prefix(grid, r);
        let mut acc = vec![0.0; n];
        for run in &fp.runs {
            let Some(src) = shifted_row(grid, &pre, &run.prefix) else { continue };
            let c = &cums[src];
            for (k, a) in acc.iter_mut().enumerate() {
                let lo = (k as i64 + run.lo).max(0);
                let hi = (k as i64 + run.hi).min(n as i64 - 1);
                if lo <= hi {
                    *a += c[hi as usize + 1] - c[lo as usize];
                }
            }
        }
        acc.iter_mut().for_each(|v| *v /= fp.count);
        acc
    });
    out.concat()
}

/// max over the footprint of `values` around every grid point, centers
/// restricted to the box.
fn footprint_max(values: &[f64], grid: &SpatialGrid, fp: &Footprint) -> Vec<f64> {
    let n = grid.n;
    let rows = grid.len() / n;
    let out = crate::par::map_indices(rows, |r| {
        let pre = row_prefix(grid, r);
        let mut best = vec![f64::NEG_INFINITY; n];
        let mut dq: VecDeque<usize> = VecDeque::with_capacity(n);
        for run in &fp.runs {
            let Some(src) = shifted_row(grid, &pre, &run.prefix) else { continue };
            let row = &values[src * n..(src + 1) * n];
            dq.clear();
            let mut next = 0i64;
            for (k, b) in best.iter_mut().enumerate() {
                let lo = k as i64 + run.lo;
                let hi = (k as i64 + run.hi).min(n as i64 - 1);
                while next <= hi {
                    if next >= 0 {
                        let v = row[next as usize];
                        while dq.back().is_some_and(|&i| row[i] <= v) {
                            dq.pop_back();
                        }
                        dq.push_back(next as usize);
                    }
                    next += 1;
                }
                while dq.front().is_some_and(|&i| (i as i64) < lo) {
                    dq.pop_front();
                }
                if let Some(&i) = dq.front() {
                    *b = b.max(row[i]);
                }
            }
        }
        best
    });
    out.concat()
}

/// M_{ρ_A} of |values|: the largest average over grid-centred balls y + AʲΩ
/// containing each point, for j in the configured range; zero outside the box.
pub fn hl_maximal(values: &[f64], grid: &SpatialGrid, dil: &Dilation, cfg: &HlConfig) -> Result<Vec<f64>> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
    }
    if dil.dim() != grid.d {
        return Err(Error::DimensionMismatch { expected: grid.d, got: dil.dim() });
    }
    let (j_min, j_max) = ball_levels(grid, dil, cfg)?;
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let mut out = abs.clone();
    for j in j_min..=j_max {
        let fp = footprint(grid, dil, j);
        let avg = ball_averages(&abs, grid, &fp);
        for (o, m) in out.iter_mut().zip(footprint_max(&avg, grid, &fp)) {
            *o = o.max(m);
        }
        if cfg.centers == Centers::Refined {
            let rim = boundary_offsets(grid, dil, j);
            let top = avg.iter().cloned().fold(0.0, f64::max);
            let current = &out;
            let edge = crate::par::map_indices(grid.len(), |k| {
                let mut best = f64::NEG_INFINITY;
                if current[k] >= top {
                    return best;
                }
                let x = grid.point_vec(k);
                let mut y = vec![0.0; grid.d];
                for b in &rim {
                    for a in 0..grid.d {
                        y[a] = x[a] + b[a];
                    }
                    if let Some(v) = interpolate(&avg, grid, &y) {
                        best = best.max(v);
                    }
                }
                best
            });
            for (o, m) in out.iter_mut().zip(edge) {
                *o = o.max(m);
            }
        }
    }
    Ok(out)
}

/// Points of the sphere ∂(AʲΩ), about one per four lattice cells of its
/// circumference (between 16 and 64 in the plane). At an optimal boundary
/// center the gradient of the average is normal to the sphere, so the
/// tangential spacing only enters to second order.
fn boundary_offsets(grid: &SpatialGrid, dil: &Dilation, j: i32) -> Vec<Vec<f64>> {
    let d = grid.d;
    let c = dil.ellipsoid().c;
    let dirs: Vec<Vec<f64>> = match d {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => {
            let ext = dil.ellipsoid_extent(j as f64).expect("integer powers always exist");
            let r = ext.iter().cloned().fold(0.0, f64::max);
            let k = ((std::f64::consts::TAU * r / (4.0 * grid.h())).ceil() as usize).clamp(16, 64);
            (0..k).map(|i| crate::sampling::unit_direction(&[i as f64 / k as f64], 2)).collect()
        }
        _ => {
            let mut h = crate::sampling::Halton::new(crate::sampling::direction_dims(d));
            (0..64).map(|_| crate::sampling::unit_direction(&h.next_point(), d)).collect()
        }
    };
    dirs.iter()
        .map(|u| {
            let p = dil.p_unit(u);
            let v: Vec<f64> = p.iter().map(|x| x * c).collect();
            dil.power_vec(j, &v)
        })
        .collect()
}

/// Multilinear interpolation of grid values; `None` outside the box.
pub fn interpolate(values: &[f64], grid: &SpatialGrid, x: &[f64]) -> Option<f64> {
    let d = grid.d;
    let h = grid.h();
    let mut base = [0usize; 8];
    let mut frac = [0.0f64; 8];
    for a in 0..d {
        let u = (x[a] + grid.half_extent) / h;
        if u < -1e-9 || u > (grid.n - 1) as f64 + 1e-9 {
            return None;
        }
        let k = (u.floor().max(0.0) as usize).min(grid.n - 2);
        base[a] = k;
        frac[a] = (u - k as f64).clamp(0.0, 1.0);
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = 0usize;
        for a in 0..d {
            let up = corner >> (d - 1 - a) & 1 == 1;
            w *= if up { frac[a] } else { 1.0 - frac[a] };
            idx = idx * grid.n + base[a] + up as usize;
        }
        if w != 0.0 {
            acc += values[idx] * w;
        }
    }
    Some(acc)
}

/// sup |M[f∘Aʲ] − [Mf]∘Aʲ| / sup [Mf]∘Aʲ over points whose images stay in the
/// inner half of the box; the side evaluated off the lattice is interpolated.
pub fn dilation_commutation_defect(
    f: &dyn Fn(&[f64]) -> f64,
    j: i32,
    grid: &SpatialGrid,
    dil: &Dilation,
    cfg: &HlConfig,
) -> Result<f64> {
    if j == 0 {
        return Ok(0.0);
    }
    let sample = |g: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
        let mut x = vec![0.0; grid.d];
        (0..grid.len())
            .map(|k| {
                grid.point(k, &mut x);
                g(&x)
            })
            .collect()
    };
    let plain = hl_maximal(&sample(f), grid, dil, cfg)?;
    let dilated = hl_maximal(&sample(&|x: &[f64]| f(&dil.power_vec(j, x))), grid, dil, cfg)?;
    let inner = |x: &[f64]| x.iter().all(|v| v.abs() <= grid.half_extent / 2.0);
    let mut x = vec![0.0; grid.d];
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for k in 0..grid.len() {
        grid.point(k, &mut x);
        // j > 0: x on the lattice, Aʲx interpolated in Mf; j < 0: y = x on the
        // lattice, A⁻ʲy interpolated in M[f∘Aʲ]
        let (l, r) = if j > 0 {
            let ax = dil.power_vec(j, &x);
            if !inner(&ax) || !inner(&x) {
                continue;
            }
            match interpolate(&plain, grid, &ax) {
                Some(r) => (dilated[k], r),
                None => continue,
            }
        } else {
            let ay = dil.power_vec(-j, &x);
            if !inner(&ay) || !inner(&x) {
                continue;
            }
            match interpolate(&dilated, grid, &ay) {
                Some(l) => (l, plain[k]),
                None => continue,
            }
        };
        diff = diff.max((l - r).abs());
        scale = scale.max(r.abs());
    }
    Ok(if scale == 0.0 { 0.0 } else { diff / scale })
}

/// Lattice offsets sorted by their scale coordinate, for Peetre maxima.
#[derive(Debug, Clone)]
pub struct PeetreOffsets {
    grid: SpatialGrid,
    boundary: Boundary,
    /// Offsets in lattice units, d per entry.
    deltas: Vec<i64>,
    /// t(hz) when the dilation has a logarithm, else the shell index.
    t: Vec<f64>,
    continuous: bool,
}

impl PeetreOffsets {
    pub fn new(grid: SpatialGrid, dil: &Dilation, boundary: Boundary) -> Result<Self> {
        let d = grid.d;
        let (lo, width) = match boundary {
            Boundary::Zero => (-(grid.n as i64 - 1), 2 * grid.n - 1),
            Boundary::Periodic => (-(grid.n as i64 / 2), grid.n),
        };
        let total = width.pow(d as u32);
        let continuous = dil.has_log();
        let h = grid.h();
        let entries = crate::par::map_indices(total, |i| {
            let mut rem = i;
            let mut z = vec![0i64; d];
            for a in (0..d).rev() {
                z[a] = lo + (rem % width) as i64;
                rem /= width;
            }
            if z.iter().all(|&v| v == 0) {
                return Ok(None);
            }
            let x: Vec<f64> = z.iter().map(|&v| v as f64 * h).collect();
            let t = if continuous { dil.scale(&x)? } else { dil.shell(&x).expect("nonzero offset") as f64 };
            Ok(Some((z, t)))
        });
        let mut list: Vec<(Vec<i64>, f64)> = entries.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
        list.sort_by(|a, b| a.1.total_cmp(&b.1));
        let t = list.iter().map(|e| e.1).collect();
        let deltas = list.into_iter().flat_map(|e| e.0).collect();
        Ok(Self { grid, boundary, deltas, t, continuous })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// (1 + ρ_A(A^s hz))^{-β} with ρ_A(A^s x) = |det A|^{⌊t(x)+s⌋}, in offset order.
    fn weights(&self, s: f64, beta: f64, dil: &Dilation) -> Result<Vec<f64>> {
        if !self.continuous && s.fract() != 0.0 {
            return Err(Error::LogarithmUnavailable);
        }
        Ok(self.t.iter().map(|t| (1.0 + dil.quasi_norm_from_scale(Some(*t), s)).powf(-beta)).collect())
    }
}

/// φ**_{s,β}: max over offsets z of |F(x+z)| / (1 + ρ_A(A^s z))^β, exact; the
/// scan stops once the remaining weights times max|F| cannot beat the current
/// value.
pub fn peetre_maximal(slice: &[f64], s: f64, beta: f64, offsets: &PeetreOffsets, dil: &Dilation) -> Result<Vec<f64>> {
    let grid = offsets.grid;
    if slice.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: slice.len() });
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let d = grid.d;
    let n = grid.n as i64;
    let weights = offsets.weights(s, beta, dil)?;
    let abs: Vec<f64> = slice.iter().map(|v| v.abs()).collect();
    let fmax = abs.iter().fold(0.0f64, |m, v| m.max(*v));
    let periodic = offsets.boundary == Boundary::Periodic;
    Ok(crate::par::map_indices(grid.len(), |k| {
        let mut multi = vec![0usize; d];
        grid.multi_index(k, &mut multi);
        let mut best = abs[k];
        'scan: for (i, w) in weights.iter().enumerate() {
            if w * fmax <= best {
                break;
            }
            let z = &offsets.deltas[i * d..(i + 1) * d];
            let mut idx = 0usize;
            for a in 0..d {
                let mut v = multi[a] as i64 + z[a];
                if periodic {
                    v = v.rem_euclid(n);
                } else if v < 0 || v >= n {
                    continue 'scan;
                }
                idx = idx * grid.n + v as usize;
            }
            best = best.max(abs[idx] * w);
        }
        best
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PeetreFit {
    /// max over the grid of φ**(x) / [M(|F|^{1/β})(x)]^β.
    pub constant: f64,
    pub at: usize,
}

/// The smallest C with φ**_{s,β} ≤ C·[M_{ρ_A}|F|^{1/β}]^β over the inner half
/// of the box, where neither maximal function is cut off by the box edge.
pub fn peetre_constant(
    slice: &[f64],
    s: f64,
    beta: f64,
    offsets: &PeetreOffsets,
    dil: &Dilation,
    cfg: &HlConfig,
) -> Result<PeetreFit> {
    let grid = offsets.grid;
    let pm = peetre_maximal(slice, s, beta, offsets, dil)?;
    let root: Vec<f64> = slice.iter().map(|v| v.abs().powf(1.0 / beta)).collect();
    let m = hl_maximal(&root, &grid, dil, cfg)?;
    let mut fit = PeetreFit { constant: 0.0, at: 0 };
    let mut x = vec![0.0; grid.d];
    for (k, (p, mv)) in pm.iter().zip(&m).enumerate() {
        grid.point(k, &mut x);
        if x.iter().any(|v| v.abs() > grid.half_extent / 2.0) {
            continue;
        }
        let den = mv.powf(beta);
        if den > 0.0 && p / den > fit.constant {
            fit = PeetreFit { constant: p / den, at: k };
        }
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// M_Q F(g) = sup_{u,v∈Q} |F(ugv)|.
    Two,
    /// M^L_Q F(g) = sup_{u∈Q} |F(gu)|.
    Left,
}

fn right_maximal(f: &GroupField, pts: &[(Vec<f64>, f64)], dil: &Dilation) -> Result<GroupField> {
    let grid = f.spatial;
    let sg = f.scales;
    let d = grid.d;
    // A^{s_j} a for every scale sample and Q point
    let moved: Vec<Vec<Vec<f64>>> = (0..sg.m)
        .map(|j| pts.iter().map(|(a, _)| dil.continuous_power_vec(sg.sample(j), a)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let n = grid.len();
    let slices = crate::par::map_indices(sg.m, |j| {
        let s = sg.sample(j);
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        (0..n)
            .map(|k| {
                grid.point(k, &mut x);
                let mut best = f.value(k, j).norm();
                for (q, (_, sigma)) in pts.iter().enumerate() {
                    for a in 0..d {
                        y[a] = x[a] + moved[j][q][a];
                    }
                    best = best.max(f.sample(&y, s + sigma).norm());
                }
                Complex64::new(best, 0.0)
            })
            .collect::<Vec<_>>()
    });
    GroupField::new(grid, sg, slices.concat())
}

fn left_maximal(f: &GroupField, pts: &[(Vec<f64>, f64)], dil: &Dilation) -> Result<GroupField> {
    let grid = f.spatial;
    let sg = f.scales;
    let d = grid.d;
    let n = grid.len();
    // u g = (a + A^σ x, σ + s)
    let powers: Vec<Vec<f64>> = pts.iter().map(|(_, sigma)| dil.matrix().power(*sigma).map(|m| flatten(&m))).collect::<Result<_>>()?;
    let slices = crate::par::map_indices(sg.m, |j| {
        let s = sg.sample(j);
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        (0..n)
            .map(|k| {
                grid.point(k, &mut x);
                let mut best = f.value(k, j).norm();
                for (q, (a, sigma)) in pts.iter().enumerate() {
                    crate::linalg::matvec(&powers[q], d, &x, &mut y);
                    for (yv, av) in y.iter_mut().zip(a) {
                        *yv += av;
                    }
                    best = best.max(f.sample(&y, s + sigma).norm());
                }
                Complex64::new(best, 0.0)
            })
            .collect::<Vec<_>>()
    });
    GroupField::new(grid, sg, slices.concat())
}

/// Local maximal function over the sampled neighborhood Q; off-lattice points
/// are interpolated and the box is zero-extended.
pub fn local_maximal(f: &GroupField, q: &QBox, side: Side, dil: &Dilation) -> Result<GroupField> {
    if dil.dim() != f.spatial.d {
        return Err(Error::DimensionMismatch { expected: f.spatial.d, got: dil.dim() });
    }
    let pts = q.points(f.spatial.d);
    let right = right_maximal(f, &pts, dil)?;
    match side {
        Side::Left => Ok(right),
        Side::Two => left_maximal(&right, &pts, dil),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MajorantReport {
    /// max over the grid of (|f∗g| − ‖Θ‖·Mf)₊ with the lattice norm of Θ.
    pub defect: f64,
    /// h^d Σ_{z∈ℤᵈ} Θ(hz), the constant matching the sampled convolution.
    pub theta_l1_lattice: f64,
    /// ∫ Θ = Σⱼ θ(|det A|ʲ)|det A|ʲ(|det A| − 1).
    pub theta_l1: f64,
}

/// Checks |f∗g| ≤ ‖Θ‖₁ M_{ρ_A}f for |g| ≤ Θ = θ∘ρ_A with θ decreasing.
pub fn majorant_check(
    f: &[Complex64],
    g: &[Complex64],
    theta: &dyn Fn(f64) -> f64,
    grid: &SpatialGrid,
    dil: &Dilation,
) -> Result<MajorantReport> {
    for v in [f.len(), g.len()] {
        if v != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: v });
        }
    }
    let mut x = vec![0.0; grid.d];
    for (k, gv) in g.iter().enumerate() {
        grid.point(k, &mut x);
        let bound = theta(dil.quasi_norm(&x));
        if gv.norm() > bound * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::InvalidParameter(format!("|g| exceeds the majorant at {x:?}")));
        }
    }
    // zero-padded linear convolution h^d Σ_y f(x−y) g(y)
    let padded = SpatialGrid { d: grid.d, n: grid.n * 2, half_extent: grid.half_extent * 2.0 };
    let spec = Spectral::new(padded);
    let fh = spec.to_fourier(&embed_centered(grid, &padded, f));
    let gh = spec.to_fourier(&embed_centered(grid, &padded, g));
    let conv = spec.from_fourier(fh.iter().zip(&gh).map(|(a, b)| a * b).collect());
    let conv = extract_centered(grid, &padded, &conv);

    let cfg = HlConfig::default();
    let (j_min, j_max) = ball_levels(grid, dil, &cfg)?;
    let det = dil.abs_det();
    let vol = grid.cell_volume();
    // layer cake over lattice shells: Θ(0) at the origin, θ(Dʲ) on Fⱼ₊₁ \ Fⱼ
    let mut lattice = theta(0.0) * vol;
    let mut prev = 1.0;
    for j in j_min..j_max + 1 {
        let next = footprint(grid, dil, j + 1).count;
        lattice += theta(det.powi(j)) * (next - prev) * vol;
        prev = next;
    }
    let mut j = j_max + 1;
    loop {
        let term = theta(det.powi(j)) * det.powi(j) * (det - 1.0);
        lattice += term;
        j += 1;
        if term <= 1e-16 * lattice || j > j_max + 200 {
            break;
        }
    }
    let mut continuous = 0.0;
    for j in -200..=j_max + 200 {
        continuous += theta(det.powi(j)) * det.powi(j) * (det - 1.0);
    }
    let abs: Vec<f64> = f.iter().map(|v| v.norm()).collect();
    let m = hl_maximal(&abs, grid, dil, &cfg)?;
    let defect = conv.iter().zip(&m).map(|(c, mv)| (c.norm() - lattice * mv).max(0.0)).fold(0.0, f64::max);
    Ok(MajorantReport { defect, theta_l1_lattice: lattice, theta_l1: continuous })
}

fn mixed_norm(family: &[Vec<f64>], p: f64, q: f64, cell: f64) -> f64 {
    let n = family[0].len();
    let mut acc = 0.0;
    for k in 0..n {
        let inner = if q.is_infinite() {
            family.iter().fold(0.0f64, |m, f| m.max(f[k].abs()))
        } else {
            family.iter().map(|f| f[k].abs().powf(q)).sum::<f64>().powf(1.0 / q)
        };
        acc += inner.powf(p);
    }
    (acc * cell).powf(1.0 / p)
}

/// ‖(Σ (Mfᵢ)^q)^{1/q}‖_p / ‖(Σ |fᵢ|^q)^{1/q}‖_p.
pub fn fefferman_stein_monitor(
    family: &[Vec<f64>],
    p: f64,
    q: f64,
    grid: &SpatialGrid,
    dil: &Dilation,
    cfg: &HlConfig,
) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, ∞), got {p}")));
    }
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("q must lie in (1, ∞], got {q}")));
    }
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty family".into()));
    }
    let maxed = family.iter().map(|f| hl_maximal(f, grid, dil, cfg)).collect::<Result<Vec<_>>>()?;
    let cell = grid.cell_volume();
    let den = mixed_norm(family, p, q, cell);
    Ok(if den == 0.0 { 1.0 } else { mixed_norm(&maxed, p, q, cell) / den })
}
