//! Fourier-side windows built from smooth profiles of the continuous scale
//! coordinate t_{A*}(ξ): admissible vectors, Calderón pairs, dilation and
//! synthesis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Dilation;
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::fit::{self, DecayFit};
use crate::grid::SpatialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Bump,
    PlateauBump,
    /// Squared-cosine partition profile with Σⱼ w(t+j)² ≡ 1.
    Tight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleProfile {
    pub kind: ProfileKind,
    pub center: f64,
    pub halfwidth: f64,
    #[serde(default)]
    pub plateau_halfwidth: f64,
    /// Exponent a of the bump exp(a(1 − 1/(1 − u²))); larger values concentrate
    /// the profile and speed up the spatial decay of the synthesized window.
    #[serde(default = "unit_sharpness")]
    pub sharpness: f64,
}

fn unit_sharpness() -> f64 {
    1.0
}

/// C^∞ step: 0 for u ≤ 0, 1 for u ≥ 1.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

impl ScaleProfile {
    pub fn bump(center: f64, halfwidth: f64) -> Self {
        Self { kind: ProfileKind::Bump, center, halfwidth, plateau_halfwidth: 0.0, sharpness: 1.0 }
    }
    pub fn plateau_bump(center: f64, halfwidth: f64, plateau_halfwidth: f64) -> Self {
        Self { kind: ProfileKind::PlateauBump, center, halfwidth, plateau_halfwidth, sharpness: 1.0 }
    }
    /// Default-annulus bump sharp enough that the synthesized window shows a
    /// log-log spatial slope of at most −L on desk-scale grids.
    pub fn for_spatial_decay(l: f64) -> Self {
        Self::default_annulus().with_sharpness(2f64.powf((l - 1.0).max(0.0)))
    }

    pub fn with_sharpness(self, sharpness: f64) -> Self {
        Self { sharpness, ..self }
    }
    pub fn tight(center: f64, halfwidth: f64) -> Self {
        Self { kind: ProfileKind::Tight, center, halfwidth, plateau_halfwidth: 0.0, sharpness: 1.0 }
    }

    /// Bump over the default annulus t ∈ [-1, 2].
    pub fn default_annulus() -> Self {
        Self::bump(0.5, 1.5)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.halfwidth > 0.0 && self.halfwidth.is_finite() && self.center.is_finite()) {
            return bad(format!("profile halfwidth must be positive, got {}", self.halfwidth));
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return bad(format!("profile sharpness must be positive, got {}", self.sharpness));
        }
        match self.kind {
            ProfileKind::Bump => Ok(()),
            ProfileKind::PlateauBump if self.plateau_halfwidth >= 0.0 && self.plateau_halfwidth < self.halfwidth => Ok(()),
            ProfileKind::PlateauBump => bad(format!(
                "plateau halfwidth must lie in [0, {}), got {}",
                self.halfwidth, self.plateau_halfwidth
            )),
            ProfileKind::Tight if self.halfwidth > 0.5 && self.halfwidth <= 1.0 => Ok(()),
            ProfileKind::Tight => bad(format!("tight profile halfwidth must lie in (1/2, 1], got {}", self.halfwidth)),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.halfwidth, self.center + self.halfwidth)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let r = (t - self.center).abs();
        if r >= self.halfwidth {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Bump => {
                let u = r / self.halfwidth;
                (self.sharpness * (1.0 - 1.0 / (1.0 - u * u))).exp()
            }
            ProfileKind::PlateauBump => {
                if r <= self.plateau_halfwidth {
                    1.0
                } else {
                    smooth_step((self.halfwidth - r) / (self.halfwidth - self.plateau_halfwidth))
                }
            }
            ProfileKind::Tight => {
                let eps = self.halfwidth - 0.5;
                let edge = 0.5 - eps;
                if r <= edge {
                    1.0
                } else {
                    (std::f64::consts::FRAC_PI_2 * smooth_step((r - edge) / (2.0 * eps))).cos()
                }
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let (a, b) = self.support();
        simpson(|t| self.eval(t).powi(2), a, b, 8192).sqrt()
    }

    /// Σⱼ w(t+j)².
    pub fn periodized_energy(&self, t: f64) -> f64 {
        let (a, b) = self.support();
        let lo = (a - t).floor() as i64;
        let hi = (b - t).ceil() as i64;
        (lo..=hi).map(|j| self.eval(t + j as f64).powi(2)).sum()
    }

    pub fn min_periodized_energy(&self) -> f64 {
        (0..4096).map(|i| self.periodized_energy(i as f64 / 4096.0)).fold(f64::INFINITY, f64::min)
    }
}

pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowRule {
    /// w(t)/‖w‖_{L²}: admissible vector.
    Normalized,
    /// w(t): analyzing half of a Calderón pair.
    Raw,
    /// w(t)/Σₖ w(t+k)²: dual half of a Calderón pair.
    CalderonDual,
}

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// The window support at some sampled scale reaches past the Nyquist box.
    Alias { scale: f64, extent: f64, nyquist: f64 },
}

#[derive(Debug, Clone)]
pub struct SpectralWindow {
    dual: Dilation,
    profile: ScaleProfile,
    rule: WindowRule,
    l2: f64,
}

/// t_{A*}(ξ) at every grid frequency (`None` at ξ = 0).
#[derive(Debug, Clone)]
pub struct FrequencyScales {
    pub grid: SpatialGrid,
    pub t: Vec<Option<f64>>,
}

impl FrequencyScales {
    pub fn new(grid: SpatialGrid, dual: &Dilation) -> Result<Self> {
        let d = grid.d;
        let t = crate::par::map_indices(grid.len(), |k| {
            let mut xi = vec![0.0; d];
            grid.frequency(k, &mut xi);
            if xi.iter().all(|&v| v == 0.0) {
                Ok(None)
            } else {
                dual.scale(&xi).map(Some)
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, t })
    }
}

impl SpectralWindow {
    /// `dual` is the dilation built from A*.
    pub fn new(dual: Dilation, profile: ScaleProfile, rule: WindowRule) -> Result<Self> {
        profile.validate()?;
        let l2 = profile.l2_norm();
        if !(l2 > 0.0) {
            return Err(Error::ProfileDegenerate);
        }
        if !dual.has_log() {
            return Err(Error::LogarithmUnavailable);
        }
        Ok(Self { dual, profile, rule, l2 })
    }

    pub fn profile(&self) -> &ScaleProfile {
        &self.profile
    }
    pub fn rule(&self) -> WindowRule {
        self.rule
    }
    pub fn dual(&self) -> &Dilation {
        &self.dual
    }

    /// The window as a function of the scale coordinate.
    pub fn at_scale(&self, t: f64) -> f64 {
        let w = self.profile.eval(t);
        if w == 0.0 {
            return 0.0;
        }
        match self.rule {
            WindowRule::Normalized => w / self.l2,
            WindowRule::Raw => w,
            WindowRule::CalderonDual => w / self.profile.periodized_energy(t),
        }
    }

    /// ψ̂(ξ).
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        if xi.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        Ok(self.at_scale(self.dual.scale(xi)?))
    }

    /// ψ̂((A*)^s ξ) at all grid frequencies.
    pub fn sample_dilated(&self, fs: &FrequencyScales, s: f64) -> Vec<f64> {
        fs.t.iter().map(|t| t.map_or(0.0, |t| self.at_scale(t + s))).collect()
    }

    /// Half-width of the frequency support of ξ ↦ ψ̂((A*)^s ξ) along each axis.
    pub fn support_extent(&self, s: f64) -> Result<Vec<f64>> {
        self.dual.ellipsoid_extent(self.profile.support().1 - s)
    }

    pub fn alias_warning(&self, grid: &SpatialGrid, s: f64) -> Result<Option<Warning>> {
        let ext = self.support_extent(s)?.into_iter().fold(0.0, f64::max);
        let nyq = grid.nyquist();
        Ok((ext > nyq).then_some(Warning::Alias { scale: s, extent: ext, nyquist: nyq }))
    }
}

pub fn build_admissible(dil: &Dilation, profile: ScaleProfile) -> Result<SpectralWindow> {
    SpectralWindow::new(dil.adjoint()?, profile, WindowRule::Normalized)
}

#[derive(Debug, Clone)]
pub struct CalderonPair {
    pub analyzing: SpectralWindow,
    pub dual: SpectralWindow,
    pub min_coverage: f64,
}

pub fn build_calderon_pair(dil: &Dilation, profile: ScaleProfile) -> Result<CalderonPair> {
    profile.validate()?;
    let min_coverage = profile.min_periodized_energy();
    if min_coverage < 1e-8 {
        return Err(Error::CoverageGap(min_coverage));
    }
    let dual = dil.adjoint()?;
    Ok(CalderonPair {
        analyzing: SpectralWindow::new(dual.clone(), profile, WindowRule::Raw)?,
        dual: SpectralWindow::new(dual, profile, WindowRule::CalderonDual)?,
        min_coverage,
    })
}

/// |∫ |ψ̂((A*)^s ξ)|² ds − 1|, with (A*)^s ξ formed by the matrix exponential
/// and its scale re-solved at every quadrature node.
pub fn admissibility_defect(wnd: &SpectralWindow, xi: &[f64]) -> Result<f64> {
    let t0 = wnd.dual.scale(xi)?;
    let (a, b) = wnd.profile.support();
    let (lo, hi) = (a - t0 - 0.25, b - t0 + 0.25);
    let nodes = 1200;
    let h = (hi - lo) / nodes as f64;
    let mut acc = 0.0;
    for i in 0..=nodes {
        let s = lo + i as f64 * h;
        let eta = wnd.dual.continuous_power_vec(s, xi)?;
        let v = wnd.at_scale(wnd.dual.scale(&eta)?);
        acc += v * v * if i == 0 || i == nodes { 0.5 } else { 1.0 };
    }
    Ok((acc * h - 1.0).abs())
}

/// |Σⱼ φ̂ψ̂((A*)ʲξ) − 1| with integer powers applied to ξ directly.
pub fn calderon_defect(pair: &CalderonPair, xi: &[f64]) -> Result<f64> {
    let dual = &pair.analyzing.dual;
    let t0 = dual.scale(xi)?;
    let (a, b) = pair.analyzing.profile.support();
    let mut acc = 0.0;
    for j in (a - t0).floor() as i32 - 1..=(b - t0).ceil() as i32 + 1 {
        let eta = dual.power_vec(j, xi);
        let t = dual.scale(&eta)?;
        acc += pair.analyzing.at_scale(t) * pair.dual.at_scale(t);
    }
    Ok((acc - 1.0).abs())
}

/// Grid samples of φ̂_s(ξ) = φ̂((A*)^{-s}ξ).
pub fn dilate_fourier(wnd: &SpectralWindow, s: f64, fs: &FrequencyScales) -> Vec<f64> {
    wnd.sample_dilated(fs, -s)
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub samples: Vec<Complex64>,
    pub max_imag: f64,
    pub decay: DecayFit,
    pub warnings: Vec<Warning>,
}

/// Spatial samples of the window by inverse FFT, with a fitted decay slope
/// against ln(1 + ρ_A(x)); `dil` is the spatial dilation A.
pub fn synthesize(wnd: &SpectralWindow, fs: &FrequencyScales, dil: &Dilation) -> Result<Synthesis> {
    let grid = fs.grid;
    let spec = Spectral::new(grid);
    let hat: Vec<Complex64> = wnd.sample_dilated(fs, 0.0).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let samples = spec.from_fourier(hat);
    let max_imag = samples.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    let mods: Vec<f64> = samples.iter().map(|v| v.norm()).collect();
    let decay = fit::spatial_decay(&mods, &grid, dil);
    let warnings = wnd.alias_warning(&grid, 0.0)?.into_iter().collect();
    Ok(Synthesis { samples, max_imag, decay, warnings })
}
