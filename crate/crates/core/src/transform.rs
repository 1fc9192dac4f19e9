//! Sampled wavelet transform on the group, reconstruction, and the defect
//! meters built on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Dilation;
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::fit::{self, DecayFit};
use crate::grid::ScaleGrid;
use crate::group::{group_convolve, GroupField};
use crate::signal::{Band, TestSignal};
use crate::spectra::{simpson, FrequencyScales, SpectralWindow, Warning};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct Transform {
    pub field: GroupField,
    pub warnings: Vec<Warning>,
}

/// Share of the windowed energy sitting in the outer tenth of the frequency
/// box beyond which a scale is flagged as aliased.
const ALIAS_SHARE: f64 = 1e-10;

fn check_grids(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales) -> Result<()> {
    f.grid.check_same(&fs.grid)?;
    if wnd.dual().dim() != f.grid.d {
        return Err(Error::DimensionMismatch { expected: f.grid.d, got: wnd.dual().dim() });
    }
    Ok(())
}

fn edge_mask(fs: &FrequencyScales) -> Vec<bool> {
    let grid = fs.grid;
    let lim = 0.9 * grid.nyquist();
    let mut xi = vec![0.0; grid.d];
    (0..grid.len())
        .map(|k| {
            grid.frequency(k, &mut xi);
            xi.iter().any(|v| v.abs() > lim)
        })
        .collect()
}

/// W_ψf(x, s_j) = |det A|^{s_j/2} F⁻¹[f̂ · ψ̂((A*)^{s_j}·)‾](x) for every scale
/// sample. A scale is flagged when the product f̂·ψ̂ carries energy next to the
/// Nyquist boundary.
pub fn wavelet_transform(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales, scales: &ScaleGrid) -> Result<Transform> {
    check_grids(f, wnd, fs)?;
    let grid = f.grid;
    let spec = Spectral::new(grid);
    let det = wnd.dual().abs_det();
    let edge = edge_mask(fs);
    let slices = crate::par::map_indices(scales.m, |j| {
        let s = scales.sample(j);
        let win = wnd.sample_dilated(fs, s);
        let amp = det.powf(s / 2.0);
        let mut total = 0.0;
        let mut outer = 0.0;
        let mut prod = Vec::with_capacity(grid.len());
        for ((fv, w), e) in f.spectrum.iter().zip(&win).zip(&edge) {
            let v = fv * (w * amp);
            let en = v.norm_sqr();
            total += en;
            if *e {
                outer += en;
            }
            prod.push(v);
        }
        let aliased = total > 0.0 && outer > ALIAS_SHARE * total;
        if total == 0.0 {
            return (vec![ZERO; grid.len()], false);
        }
        (spec.from_fourier(prod), aliased)
    });
    let mut field = GroupField::zeros(grid, *scales);
    let mut warnings = Vec::new();
    for (j, (sl, aliased)) in slices.into_iter().enumerate() {
        field.slice_mut(j).copy_from_slice(&sl);
        if aliased && warnings.is_empty() {
            let s = scales.sample(j);
            let extent = wnd.support_extent(s)?.into_iter().fold(0.0, f64::max);
            warnings.push(Warning::Alias { scale: s, extent, nyquist: grid.nyquist() });
        }
    }
    Ok(Transform { field, warnings })
}

/// f = Σⱼ μ(cell j)·|det A|^{s_j/2} F⁻¹[ψ̂((A*)^{s_j}·) Ŵ(·, s_j)], the sampled
/// form of ∫ W(g) π(g)ψ dμ(g). Pass the dual window of a Calderón pair.
pub fn reconstruct(w: &GroupField, wnd: &SpectralWindow, fs: &FrequencyScales) -> Result<TestSignal> {
    w.spatial.check_same(&fs.grid)?;
    let grid = w.spatial;
    let spec = Spectral::new(grid);
    let sg = w.scales;
    let det = wnd.dual().abs_det();
    let parts = crate::par::map_indices(sg.m, |j| {
        let sl = w.slice(j);
        if sl.iter().all(|v| *v == ZERO) {
            return None;
        }
        let s = sg.sample(j);
        let c = sg.haar_weight(j, det) * det.powf(s / 2.0);
        let mut hat = spec.to_fourier(sl);
        for (h, win) in hat.iter_mut().zip(wnd.sample_dilated(fs, s)) {
            *h *= win * c;
        }
        Some(hat)
    });
    let mut acc = vec![ZERO; grid.len()];
    for p in parts.into_iter().flatten() {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    TestSignal::from_spectrum(grid, acc)
}

fn relative(diff: f64, base: f64) -> f64 {
    if base == 0.0 {
        if diff == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        diff / base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IsometryReport {
    pub ratio: f64,
    /// Relative energy of f̂ outside the scale box, ∫|f̂|²(1 − ∫_box |ψ̂((A*)^s ξ)|² ds) / ‖f‖².
    pub tail: f64,
}

/// ‖W_ψf‖_{L²(G_A)} / ‖f‖_{L²}, with the exact spectral truncation tail.
pub fn isometry_ratio(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales, scales: &ScaleGrid) -> Result<IsometryReport> {
    let w = wavelet_transform(f, wnd, fs, scales)?;
    let det = wnd.dual().abs_det();
    let fnorm = f.norm();
    let ratio = relative(w.field.l2_norm(det), fnorm);
    let (a, b) = wnd.profile().support();
    let energy = crate::par::map_indices(f.spectrum.len(), |k| {
        let e = f.spectrum[k].norm_sqr();
        match fs.t[k] {
            Some(t) if e > 0.0 => {
                let lo = scales.s_min.max(a - t);
                let hi = scales.s_max.min(b - t);
                let cov = if hi > lo { simpson(|s| wnd.at_scale(t + s).powi(2), lo, hi, 400) } else { 0.0 };
                (e, e * (1.0 - cov).max(0.0))
            }
            _ => (e, e),
        }
    });
    let (tot, miss) = energy.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok(IsometryReport { ratio, tail: relative(miss, tot) })
}

/// The scale box [a − hi, b − lo) covering every orbit of a band [lo, hi] for a
/// window supported on [a, b].
pub fn covering_scales(wnd: &SpectralWindow, band: Band, m: usize) -> Result<ScaleGrid> {
    let (a, b) = wnd.profile().support();
    ScaleGrid::new(m, a - band.hi, b - band.lo)
}

/// The symmetric box [-R, R) holding both the transform of a band [lo, hi]
/// and the kernel W_φψ of windows supported on [a, b].
pub fn reproducing_scales(wnd: &SpectralWindow, band: Band, m: usize) -> Result<ScaleGrid> {
    let (a, b) = wnd.profile().support();
    let r = (a - band.hi).abs().max((b - band.lo).abs()).max(b - a);
    ScaleGrid::new(m, -r, r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReproducingReport {
    pub defect: f64,
    pub lhs_norm: f64,
    pub warnings: Vec<Warning>,
}

/// ‖W_φf − W_ψf ∗ W_φψ‖ / ‖W_φf‖ on one grid; `dil` is A.
pub fn reproducing_defect(
    f: &TestSignal,
    phi: &SpectralWindow,
    psi: &SpectralWindow,
    fs: &FrequencyScales,
    scales: &ScaleGrid,
    dil: &Dilation,
) -> Result<ReproducingReport> {
    let det = dil.abs_det();
    let lhs = wavelet_transform(f, phi, fs, scales)?;
    let lhs_norm = lhs.field.l2_norm(det);
    if f.spectrum.iter().all(|v| *v == ZERO) {
        return Ok(ReproducingReport { defect: 0.0, lhs_norm, warnings: lhs.warnings });
    }
    let wf = wavelet_transform(f, psi, fs, scales)?;
    let psi_hat: Vec<Complex64> = psi.sample_dilated(fs, 0.0).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let psi_sig = TestSignal::from_spectrum(f.grid, psi_hat)?;
    let kernel = wavelet_transform(&psi_sig, phi, fs, scales)?;
    let rhs = group_convolve(&wf.field, &kernel.field, dil)?;
    let diff = lhs.field.sub(&rhs)?.l2_norm(det);
    let mut warnings = lhs.warnings;
    warnings.extend(wf.warnings);
    warnings.dedup();
    Ok(ReproducingReport { defect: relative(diff, lhs_norm), lhs_norm, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayAxis {
    Spatial,
    Scale,
}

/// Slope of the max-modulus envelope: against ln(1 + ρ_A(x)) on the slice
/// nearest s = 0, or against |s| at the grid point x = 0.
pub fn decay_fit(w: &GroupField, axis: DecayAxis, dil: &Dilation) -> Result<DecayFit> {
    if dil.dim() != w.spatial.d {
        return Err(Error::DimensionMismatch { expected: w.spatial.d, got: dil.dim() });
    }
    let sg = w.scales;
    Ok(match axis {
        DecayAxis::Spatial => {
            let j = (0..sg.m)
                .min_by(|&a, &b| sg.sample(a).abs().total_cmp(&sg.sample(b).abs()))
                .expect("scale grid is nonempty");
            let mods: Vec<f64> = w.slice(j).iter().map(|v| v.norm()).collect();
            if mods.iter().all(|&v| v == mods[0]) {
                return Ok(DecayFit::flat());
            }
            fit::spatial_decay(&mods, &w.spatial, dil)
        }
        DecayAxis::Scale => {
            let k = w.spatial.origin_index();
            let samples: Vec<(f64, f64)> = (0..sg.m).map(|j| (sg.sample(j), w.value(k, j).norm())).collect();
            let pts = fit::scale_envelope(&samples);
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            fit::regression(&xs, &ys)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::ExpansiveMatrix;
    use crate::grid::SpatialGrid;
    use crate::signal::{battery, SignalDescriptor, BATTERY_SEED};
    use crate::spectra::{build_admissible, ScaleProfile};

    struct Setup {
        dil: Dilation,
        fs: FrequencyScales,
        wnd: SpectralWindow,
    }

    fn setup(diag: &[f64], n: usize, x: f64, profile: ScaleProfile) -> Setup {
        let dil = Dilation::new(ExpansiveMatrix::diagonal(diag).unwrap()).unwrap();
        let grid = SpatialGrid::new(diag.len(), n, x).unwrap();
        let fs = FrequencyScales::new(grid, &dil.adjoint().unwrap()).unwrap();
        let wnd = build_admissible(&dil, profile).unwrap();
        Setup { dil, fs, wnd }
    }

    #[test]
    fn zero_signal_gives_zero_field() {
        let st = setup(&[2.0], 64, 8.0, ScaleProfile::default_annulus());
        let f = TestSignal::from_samples(st.fs.grid, vec![ZERO; 64]).unwrap();
        let sg = ScaleGrid::new(8, -2.0, 2.0).unwrap();
        let w = wavelet_transform(&f, &st.wnd, &st.fs, &sg).unwrap();
        assert_eq!(w.field.max_abs(), 0.0);
        assert_eq!(reconstruct(&w.field, &st.wnd, &st.fs).unwrap().norm(), 0.0);
        let r = reproducing_defect(&f, &st.wnd, &st.wnd, &st.fs, &sg, &st.dil).unwrap();
        assert_eq!(r.defect, 0.0);
    }

    #[test]
    fn isometry_and_round_trip_on_battery() {
        let st = setup(&[2.0], 128, 8.0, ScaleProfile::tight(0.5, 0.75));
        let band = Band::new(0.0, 1.0);
        let sig = battery(&st.fs, &st.dil.adjoint().unwrap(), band, BATTERY_SEED).unwrap();
        let sg = covering_scales(&st.wnd, band, 48).unwrap();
        for f in &sig {
            let iso = isometry_ratio(f, &st.wnd, &st.fs, &sg).unwrap();
            assert!((iso.ratio - 1.0).abs() < 0.05, "{iso:?}");
            assert!(iso.tail < 1e-8, "{iso:?}");
            let w = wavelet_transform(f, &st.wnd, &st.fs, &sg).unwrap();
            assert!(w.warnings.is_empty());
            let back = reconstruct(&w.field, &st.wnd, &st.fs).unwrap();
            let err: Vec<Complex64> = back.samples.iter().zip(&f.samples).map(|(a, b)| a - b).collect();
            let rel = crate::fft::l2_norm(&err, f.grid.cell_volume()) / f.norm();
            assert!(rel < 0.05, "{rel}");
        }
    }

    #[test]
    fn isometry_error_is_first_order() {
        let st = setup(&[2.0], 128, 8.0, ScaleProfile::tight(0.5, 0.75));
        let band = Band::new(0.0, 1.0);
        let f = &battery(&st.fs, &st.dil.adjoint().unwrap(), band, BATTERY_SEED).unwrap()[0];
        let e1 = (1.0 - isometry_ratio(f, &st.wnd, &st.fs, &covering_scales(&st.wnd, band, 16).unwrap()).unwrap().ratio).abs();
        let e2 = (1.0 - isometry_ratio(f, &st.wnd, &st.fs, &covering_scales(&st.wnd, band, 32).unwrap()).unwrap().ratio).abs();
        assert!((e1 / e2 - 2.0).abs() < 0.4, "{e1} {e2}");
    }

    #[test]
    fn reconstruction_is_linear() {
        let st = setup(&[2.0], 64, 8.0, ScaleProfile::default_annulus());
        let sg = ScaleGrid::new(12, -3.0, 3.0).unwrap();
        let a = GroupField::from_fn(st.fs.grid, sg, |x, s| Complex64::new((-x[0] * x[0]).exp() * s, 0.0));
        let b = GroupField::from_fn(st.fs.grid, sg, |x, s| Complex64::new(x[0].sin(), s.cos()));
        let r1 = reconstruct(&a, &st.wnd, &st.fs).unwrap();
        let r2 = reconstruct(&b, &st.wnd, &st.fs).unwrap();
        let r3 = reconstruct(&a.add(&b).unwrap(), &st.wnd, &st.fs).unwrap();
        for ((u, v), w) in r1.samples.iter().zip(&r2.samples).zip(&r3.samples) {
            assert!((u + v - w).norm() < 1e-12);
        }
    }

    #[test]
    fn wavelet_at_aligned_point_peaks_at_its_norm() {
        let st = setup(&[2.0], 256, 16.0, ScaleProfile::default_annulus());
        let sg = ScaleGrid::new(32, -4.0, 4.0).unwrap();
        // π(g)ψ with g = (x0, 1): spectrum |det A|^{1/2} ψ̂(A* ξ) e^{-2πi x0 ξ}
        let (x0, s0) = (2.0, 1.0);
        let mut xi = [0.0];
        let hat: Vec<Complex64> = (0..st.fs.grid.len())
            .map(|k| {
                st.fs.grid.frequency(k, &mut xi);
                let w = st.fs.t[k].map_or(0.0, |t| st.wnd.at_scale(t + s0));
                Complex64::from_polar(2f64.powf(s0 / 2.0) * w, -2.0 * std::f64::consts::PI * x0 * xi[0])
            })
            .collect();
        let f = TestSignal::from_spectrum(st.fs.grid, hat).unwrap();
        let w = wavelet_transform(&f, &st.wnd, &st.fs, &sg).unwrap().field;
        let (mut best, mut at) = (0.0, (0, 0));
        for j in 0..sg.m {
            for k in 0..st.fs.grid.len() {
                if w.value(k, j).norm() > best {
                    best = w.value(k, j).norm();
                    at = (k, j);
                }
            }
        }
        assert_eq!(st.fs.grid.point_vec(at.0), vec![x0]);
        assert_eq!(sg.sample(at.1), s0);
        // ‖ψ‖² as the inner product ⟨ψ, ψ⟩ over the spatial samples
        let psi_hat: Vec<Complex64> = st.wnd.sample_dilated(&st.fs, 0.0).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        let psi = crate::fft::Spectral::new(st.fs.grid).from_fourier(psi_hat);
        let norm2: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * st.fs.grid.cell_volume();
        assert!((best / norm2 - 1.0).abs() < 0.02, "{best} {norm2}");
    }

    #[test]
    fn reproducing_formula_with_tight_window() {
        let st = setup(&[2.0], 64, 8.0, ScaleProfile::tight(0.5, 0.75));
        let band = Band::new(0.0, 1.0);
        let desc = SignalDescriptor::ModulatedGaussian { center: vec![0.5], width: 1.0, frequency: vec![0.8], phase: 0.3 };
        let f = TestSignal::new(st.fs.grid, desc, Some((band, &st.fs))).unwrap();
        let sg = reproducing_scales(&st.wnd, band, 48).unwrap();
        let r1 = reproducing_defect(&f, &st.wnd, &st.wnd, &st.fs, &sg, &st.dil).unwrap();
        let r2 = reproducing_defect(&f, &st.wnd, &st.wnd, &st.fs, &sg.refine(), &st.dil).unwrap();
        assert!(r1.defect < 0.05 && r2.defect < r1.defect, "{r1:?} {r2:?}");
    }

    #[test]
    fn constant_field_is_flat_and_decay_is_negative() {
        let st = setup(&[2.0], 512, 64.0, ScaleProfile::for_spatial_decay(4.0));
        let sg = ScaleGrid::new(64, -4.0, 4.0).unwrap();
        let c = GroupField::from_fn(st.fs.grid, sg, |_, _| Complex64::new(1.0, 0.0));
        assert_eq!(decay_fit(&c, DecayAxis::Spatial, &st.dil).unwrap().slope, 0.0);
        assert_eq!(decay_fit(&c, DecayAxis::Scale, &st.dil).unwrap().slope, 0.0);
        let psi: Vec<Complex64> = st.wnd.sample_dilated(&st.fs, 0.0).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        let f = TestSignal::from_spectrum(st.fs.grid, psi).unwrap();
        let w = wavelet_transform(&f, &st.wnd, &st.fs, &sg).unwrap().field;
        assert!(decay_fit(&w, DecayAxis::Spatial, &st.dil).unwrap().slope <= -4.0);
        assert!(decay_fit(&w, DecayAxis::Scale, &st.dil).unwrap().slope < -2.0 * 2f64.ln());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let st = setup(&[2.0], 64, 8.0, ScaleProfile::default_annulus());
        let other = SpatialGrid::new(1, 32, 8.0).unwrap();
        let f = TestSignal::from_samples(other, vec![ZERO; 32]).unwrap();
        let sg = ScaleGrid::new(4, 0.0, 1.0).unwrap();
        assert!(matches!(wavelet_transform(&f, &st.wnd, &st.fs, &sg), Err(Error::GridMismatch(_))));
    }
}
