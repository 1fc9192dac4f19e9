//! The semidirect product G_A = ℝᵈ ⋊_A ℝ and sampled fields on it.
//!
//! A [`GroupField`] stores one value per cell [x_k, x_k + h)ᵈ × [s_j, s_j + Δs)
//! at the left endpoints; Haar weights are exact cell integrals of
//! |det A|^{-s} ds dx.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Dilation;
use crate::error::{Error, Result};
use crate::fft::{embed_centered, Spectral};
use crate::grid::{ScaleGrid, SpatialGrid};
use crate::linalg::{flatten, matvec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: Vec<f64>,
    pub s: f64,
}

impl GroupElement {
    pub fn new(x: Vec<f64>, s: f64) -> Self {
        Self { x, s }
    }
    pub fn identity(d: usize) -> Self {
        Self { x: vec![0.0; d], s: 0.0 }
    }
}

/// (x,s)(y,t) = (x + Aˢy, s + t).
pub fn multiply(g: &GroupElement, h: &GroupElement, dil: &Dilation) -> Result<GroupElement> {
    let ay = dil.continuous_power_vec(g.s, &h.x)?;
    Ok(GroupElement { x: g.x.iter().zip(&ay).map(|(a, b)| a + b).collect(), s: g.s + h.s })
}

/// (x,s)⁻¹ = (−A⁻ˢx, −s).
pub fn invert(g: &GroupElement, dil: &Dilation) -> Result<GroupElement> {
    let ax = dil.continuous_power_vec(-g.s, &g.x)?;
    Ok(GroupElement { x: ax.iter().map(|v| -v).collect(), s: -g.s })
}

/// Δ(x,s) = |det A|^{-s}.
pub fn modular(g: &GroupElement, dil: &Dilation) -> f64 {
    dil.abs_det().powf(-g.s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupField {
    pub spatial: SpatialGrid,
    pub scales: ScaleGrid,
    /// Scale-major storage: `values[j * spatial.len() + k]`.
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct Translated {
    pub field: GroupField,
    pub interpolated: bool,
}

impl GroupField {
    pub fn new(spatial: SpatialGrid, scales: ScaleGrid, values: Vec<Complex64>) -> Result<Self> {
        let want = spatial.len() * scales.m;
        if values.len() != want {
            return Err(Error::DimensionMismatch { expected: want, got: values.len() });
        }
        Ok(Self { spatial, scales, values })
    }

    pub fn zeros(spatial: SpatialGrid, scales: ScaleGrid) -> Self {
        Self { spatial, scales, values: vec![ZERO; spatial.len() * scales.m] }
    }

    pub fn from_fn(spatial: SpatialGrid, scales: ScaleGrid, f: impl Fn(&[f64], f64) -> Complex64) -> Self {
        let mut out = Self::zeros(spatial, scales);
        let n = spatial.len();
        let mut x = vec![0.0; spatial.d];
        for j in 0..scales.m {
            let s = scales.sample(j);
            for k in 0..n {
                spatial.point(k, &mut x);
                out.values[j * n + k] = f(&x, s);
            }
        }
        out
    }

    pub fn slice(&self, j: usize) -> &[Complex64] {
        let n = self.spatial.len();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn slice_mut(&mut self, j: usize) -> &mut [Complex64] {
        let n = self.spatial.len();
        &mut self.values[j * n..(j + 1) * n]
    }

    pub fn value(&self, k: usize, j: usize) -> Complex64 {
        self.values[j * self.spatial.len() + k]
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        self.spatial.check_same(&other.spatial)?;
        if self.scales != other.scales {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.scales, other.scales)));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn abs(&self) -> Self {
        self.map(|v| Complex64::new(v.norm(), 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(), ..self.clone() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(), ..self.clone() })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// ∫ F dμ over the box, with exact cell masses.
    pub fn haar_integral(&self, abs_det: f64) -> Complex64 {
        let vol = self.spatial.cell_volume();
        (0..self.scales.m)
            .map(|j| self.slice(j).iter().sum::<Complex64>() * self.scales.haar_weight(j, abs_det) * vol)
            .sum()
    }

    /// ‖F‖_{L²(G_A)} over the box.
    pub fn l2_norm(&self, abs_det: f64) -> f64 {
        let vol = self.spatial.cell_volume();
        (0..self.scales.m)
            .map(|j| self.slice(j).iter().map(|v| v.norm_sqr()).sum::<f64>() * self.scales.haar_weight(j, abs_det) * vol)
            .sum::<f64>()
            .sqrt()
    }

    /// Spatial multilinear interpolation inside slice j; zero outside [-X, X)ᵈ,
    /// periodic wrap for the last cell of each axis.
    pub fn sample_slice(&self, j: usize, x: &[f64]) -> Complex64 {
        let g = &self.spatial;
        let d = g.d;
        let h = g.h();
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        for a in 0..d {
            if x[a] < -g.half_extent || x[a] >= g.half_extent {
                return ZERO;
            }
            let u = (x[a] + g.half_extent) / h;
            let k = (u.floor() as usize).min(g.n - 1);
            base[a] = k;
            frac[a] = u - k as f64;
        }
        let slice = self.slice(j);
        let mut acc = ZERO;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for a in 0..d {
                let up = corner >> (d - 1 - a) & 1 == 1;
                let k = if up { (base[a] + 1) % g.n } else { base[a] };
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx = idx * g.n + k;
            }
            if w != 0.0 {
                acc += slice[idx] * w;
            }
        }
        acc
    }

    /// Multilinear interpolation in (x, s); zero outside the box.
    pub fn sample(&self, x: &[f64], s: f64) -> Complex64 {
        let sg = &self.scales;
        if s < sg.s_min || s >= sg.s_max {
            return ZERO;
        }
        let v = (s - sg.s_min) / sg.step();
        let j = (v.floor() as usize).min(sg.m - 1);
        let f = v - j as f64;
        let lo = self.sample_slice(j, x);
        if f < 1e-12 || j + 1 >= sg.m {
            return if j + 1 >= sg.m { lo * (1.0 - f) } else { lo };
        }
        lo * (1.0 - f) + self.sample_slice(j + 1, x) * f
    }

    /// (L_g F)(x,s) = F(g⁻¹(x,s)).
    pub fn translate_left(&self, g: &GroupElement, dil: &Dilation) -> Result<Translated> {
        let d = self.spatial.d;
        if g.x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.x.len() });
        }
        if g.s == 0.0 {
            if let Some(shift) = self.lattice_steps(&g.x) {
                return Ok(Translated { field: self.shift_periodic(&shift), interpolated: false });
            }
        }
        let gi = invert(g, dil)?;
        let field = self.resample(|x, s| {
            let h = multiply(&gi, &GroupElement::new(x.to_vec(), s), dil).expect("power exists");
            (h.x, h.s)
        });
        Ok(Translated { field, interpolated: true })
    }

    /// L_g F sampled on the image grid: spatial box a^t·X and scales shifted
    /// by t, so values are re-indexed without interpolation. Needs A = a·I
    /// with a > 0 and y on the image lattice a^t·hℤᵈ; the spatial shift wraps.
    pub fn translate_left_image(&self, g: &GroupElement, dil: &Dilation) -> Result<Self> {
        let d = self.spatial.d;
        if g.x.len() != d || dil.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.x.len().max(dil.dim()) });
        }
        let m = dil.matrix().matrix();
        let a = m[(0, 0)];
        let scalar = (0..d).all(|r| (0..d).all(|c| m[(r, c)] == if r == c { a } else { 0.0 }));
        if !(scalar && a > 0.0) {
            return Err(Error::Unsupported("image-grid translation needs A = a·I with a > 0".into()));
        }
        let stretch = a.powf(g.s);
        let spatial = SpatialGrid::new(d, self.spatial.n, self.spatial.half_extent * stretch)?;
        let scales = ScaleGrid::new(self.scales.m, self.scales.s_min + g.s, self.scales.s_max + g.s)?;
        let y: Vec<f64> = g.x.iter().map(|v| v / stretch).collect();
        let shift = self
            .lattice_steps(&y)
            .ok_or_else(|| Error::InvalidParameter("translation is not on the image lattice".into()))?;
        let moved = self.shift_periodic(&shift);
        Ok(Self { spatial, scales, values: moved.values })
    }

    /// (R_g F)(x,s) = F((x,s)g).
    pub fn translate_right(&self, g: &GroupElement, dil: &Dilation) -> Result<Translated> {
        let d = self.spatial.d;
        if g.x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.x.len() });
        }
        let steps = g.s / self.scales.step();
        if g.x.iter().all(|&v| v == 0.0) && (steps - steps.round()).abs() < 1e-9 {
            let shift = steps.round() as i64;
            let mut out = Self::zeros(self.spatial, self.scales);
            for j in 0..self.scales.m {
                let src = j as i64 + shift;
                if src >= 0 && (src as usize) < self.scales.m {
                    out.slice_mut(j).copy_from_slice(self.slice(src as usize));
                }
            }
            return Ok(Translated { field: out, interpolated: false });
        }
        let field = self.resample(|x, s| {
            let h = multiply(&GroupElement::new(x.to_vec(), s), g, dil).expect("power exists");
            (h.x, h.s)
        });
        Ok(Translated { field, interpolated: true })
    }

    /// Integer lattice steps for y if y ∈ hℤᵈ.
    fn lattice_steps(&self, y: &[f64]) -> Option<Vec<i64>> {
        let h = self.spatial.h();
        y.iter()
            .map(|&v| {
                let k = (v / h).round();
                ((v / h - k).abs() < 1e-9).then_some(k as i64)
            })
            .collect()
    }

    fn shift_periodic(&self, shift: &[i64]) -> Self {
        let g = self.spatial;
        let n = g.n as i64;
        let mut out = Self::zeros(g, self.scales);
        let mut mi = vec![0usize; g.d];
        let mut src = vec![0usize; g.d];
        for k in 0..g.len() {
            g.multi_index(k, &mut mi);
            for a in 0..g.d {
                src[a] = (mi[a] as i64 - shift[a]).rem_euclid(n) as usize;
            }
            let from = g.flat_index(&src);
            for j in 0..self.scales.m {
                out.values[j * g.len() + k] = self.values[j * g.len() + from];
            }
        }
        out
    }

    fn resample(&self, map: impl Fn(&[f64], f64) -> (Vec<f64>, f64)) -> Self {
        let g = self.spatial;
        let mut out = Self::zeros(g, self.scales);
        let mut x = vec![0.0; g.d];
        for j in 0..self.scales.m {
            let s = self.scales.sample(j);
            for k in 0..g.len() {
                g.point(k, &mut x);
                let (y, t) = map(&x, s);
                out.values[j * g.len() + k] = self.sample(&y, t);
            }
        }
        out
    }

    /// Writes the GAF1 binary format: magic, d, n, X, m, s_min, s_max, then
    /// complex128 values with the spatial index outermost.
    pub fn write_gaf<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"GAF1")?;
        w.write_all(&(self.spatial.d as u64).to_le_bytes())?;
        w.write_all(&(self.spatial.n as u64).to_le_bytes())?;
        w.write_all(&self.spatial.half_extent.to_le_bytes())?;
        w.write_all(&(self.scales.m as u64).to_le_bytes())?;
        w.write_all(&self.scales.s_min.to_le_bytes())?;
        w.write_all(&self.scales.s_max.to_le_bytes())?;
        let n = self.spatial.len();
        let mut buf = Vec::with_capacity(n * self.scales.m * 16);
        for k in 0..n {
            for j in 0..self.scales.m {
                let v = self.values[j * n + k];
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_gaf<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"GAF1" {
            return Err(Error::Parse("missing GAF1 magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let d = u64::from_le_bytes(next(&mut r)?) as usize;
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let x = f64::from_le_bytes(next(&mut r)?);
        let m = u64::from_le_bytes(next(&mut r)?) as usize;
        let s_min = f64::from_le_bytes(next(&mut r)?);
        let s_max = f64::from_le_bytes(next(&mut r)?);
        let spatial = SpatialGrid::new(d, n, x)?;
        let scales = ScaleGrid::new(m, s_min, s_max)?;
        let len = spatial.len();
        let mut raw = vec![0u8; len * m * 16];
        r.read_exact(&mut raw).map_err(|e| Error::Parse(format!("truncated GAF1 payload: {e}")))?;
        let mut values = vec![ZERO; len * m];
        for (i, chunk) in raw.chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
            let (k, j) = (i / m, i % m);
            values[j * len + k] = Complex64::new(re, im);
        }
        Self::new(spatial, scales, values)
    }

    /// CSV of one scale slice: grid coordinates, then re, im, abs.
    pub fn write_slice_csv<W: Write>(&self, j: usize, mut w: W) -> Result<()> {
        let d = self.spatial.d;
        let s = self.scales.sample(j);
        writeln!(w, "# scale slice s = {s}; columns: x_1..x_d, re, im, abs")?;
        let cols: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
        writeln!(w, "{},re,im,abs", cols.join(","))?;
        let mut x = vec![0.0; d];
        for (k, v) in self.slice(j).iter().enumerate() {
            self.spatial.point(k, &mut x);
            let xs: Vec<String> = x.iter().map(|c| format!("{c}")).collect();
            writeln!(w, "{},{},{},{}", xs.join(","), v.re, v.im, v.norm())?;
        }
        Ok(())
    }
}

/// Haar-weighted group convolution (F∗G)(g) = ∫ F(h) G(h⁻¹g) dμ(h), evaluated
/// as ∫ F(gk⁻¹) G(k) Δ(k⁻¹) dμ(k).
///
/// For output scale s and kernel scale u the spatial integral
/// ∫ G(y, u) F(x − A^{s−u}y, s − u) dy is a convolution whose Fourier
/// transform is F̂(ξ, s − u)·Ĝ((A*)^{s−u}ξ, u). Ĝ is read off a zero-padded
/// FFT of the kernel slice by cubic interpolation; F is interpolated linearly
/// in scale and taken as zero outside the box.
pub fn group_convolve(f: &GroupField, g: &GroupField, dil: &Dilation) -> Result<GroupField> {
    f.same_grid(g)?;
    let grid = f.spatial;
    let sg = f.scales;
    let n = grid.len();
    let d = grid.d;
    let spec = Spectral::new(grid);
    let det = dil.abs_det();
    let step = sg.step();

    let f_hat: Vec<Option<Vec<Complex64>>> = crate::par::map_indices(sg.m, |j| {
        let sl = f.slice(j);
        sl.iter().any(|v| *v != ZERO).then(|| spec.to_fourier(sl))
    });
    let pad = if d == 1 { 8 } else { 4 };
    let padded = PaddedSpectrum::grid(&grid, pad);
    let pspec = Spectral::new(padded);
    let g_hat: Vec<Option<Vec<Complex64>>> = crate::par::map_indices(sg.m, |j| {
        let sl = g.slice(j);
        sl.iter().any(|v| *v != ZERO).then(|| pspec.to_fourier(&embed_centered(&grid, &padded, sl)))
    });
    // (A*)^{(i-j)Δs} for every scale difference
    let powers: Vec<Vec<f64>> = (0..2 * sg.m - 1)
        .map(|k| dil.matrix().power((k as f64 - (sg.m - 1) as f64) * step).map(|m| flatten(&m.transpose())))
        .collect::<Result<_>>()?;
    let mut freqs = vec![0.0; n * d];
    for k in 0..n {
        grid.frequency(k, &mut freqs[k * d..(k + 1) * d]);
    }
    // ∫cell |det A|^{-u} du · |det A|^{u_j}
    let weights: Vec<f64> = (0..sg.m).map(|j| sg.haar_weight(j, det) * det.powf(sg.sample(j))).collect();

    let out_slice = |i: usize| -> Vec<Complex64> {
        let mut acc = vec![ZERO; n];
        let mut eta = vec![0.0; d];
        let mut any = false;
        for j in 0..sg.m {
            let Some(gh) = g_hat[j].as_ref() else { continue };
            let sigma = sg.sample(i) - sg.sample(j);
            let v = (sigma - sg.s_min) / step;
            let k0 = v.floor();
            let frac = v - k0;
            let mut parts: Vec<(&Vec<Complex64>, f64)> = Vec::with_capacity(2);
            for (k, w) in [(k0, 1.0 - frac), (k0 + 1.0, frac)] {
                if w > 1e-12 && k >= 0.0 && (k as usize) < sg.m {
                    if let Some(fh) = f_hat[k as usize].as_ref() {
                        parts.push((fh, w));
                    }
                }
            }
            if parts.is_empty() {
                continue;
            }
            let t = &powers[i + sg.m - 1 - j];
            for (q, a) in acc.iter_mut().enumerate() {
                let fv: Complex64 = parts.iter().map(|(fh, w)| fh[q] * *w).sum();
                if fv == ZERO {
                    continue;
                }
                matvec(t, d, &freqs[q * d..(q + 1) * d], &mut eta);
                *a += fv * PaddedSpectrum::interpolate(&padded, gh, &eta) * weights[j];
            }
            any = true;
        }
        if any { spec.from_fourier(acc) } else { acc }
    };

    let slices: Vec<Vec<Complex64>> = crate::par::map_indices(sg.m, out_slice);
    let mut out = GroupField::zeros(grid, sg);
    for (i, sl) in slices.into_iter().enumerate() {
        out.slice_mut(i).copy_from_slice(&sl);
    }
    Ok(out)
}

/// Continuous Fourier transforms off the frequency lattice, from an FFT of the
/// samples zero-padded to `pad` times the box.
struct PaddedSpectrum;

impl PaddedSpectrum {
    fn grid(grid: &SpatialGrid, pad: usize) -> SpatialGrid {
        SpatialGrid { d: grid.d, n: grid.n * pad, half_extent: grid.half_extent * pad as f64 }
    }

    /// Keys cubic interpolation on the padded lattice; zero past its Nyquist box.
    fn interpolate(padded: &SpatialGrid, hat: &[Complex64], eta: &[f64]) -> Complex64 {
        let d = padded.d;
        let n = padded.n as i64;
        let step = padded.freq_step();
        let mut base = [0i64; 8];
        let mut wts = [[0.0f64; 4]; 8];
        for a in 0..d {
            let u = eta[a] / step;
            if u.abs() > (n / 2 - 2) as f64 {
                return ZERO;
            }
            let b = u.floor();
            base[a] = b as i64 - 1;
            let t = u - b;
            wts[a] = keys(t);
        }
        let mut acc = ZERO;
        for tap in 0..4usize.pow(d as u32) {
            let mut rem = tap;
            let mut idx = 0usize;
            let mut w = 1.0;
            for a in 0..d {
                let o = rem % 4;
                rem /= 4;
                w *= wts[a][o];
                idx = idx * padded.n + (base[a] + o as i64).rem_euclid(n) as usize;
            }
            acc += hat[idx] * w;
        }
        acc
    }
}

/// Keys (a = −1/2) cubic weights for the taps at −1, 0, 1, 2 around offset t.
fn keys(t: f64) -> [f64; 4] {
    let k = |x: f64| {
        let x = x.abs();
        if x <= 1.0 {
            1.5 * x * x * x - 2.5 * x * x + 1.0
        } else if x < 2.0 {
            -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0
        } else {
            0.0
        }
    };
    [k(t + 1.0), k(t), k(1.0 - t), k(2.0 - t)]
}
