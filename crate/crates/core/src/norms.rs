//! Triebel–Lizorkin norms in Littlewood–Paley, Peetre and sequence form,
//! mixed and Peetre-type norms on the group, and coorbit norms.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Dilation;
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::grid::{ScaleGrid, SpatialGrid};
use crate::group::{GroupElement, GroupField};
use crate::linalg::{flatten, matvec};
use crate::maximal::{local_maximal, peetre_maximal, PeetreOffsets, QBox, Side};
use crate::signal::TestSignal;
use crate::spectra::{FrequencyScales, SpectralWindow};
use crate::transform::wavelet_transform;

/// Exponents at or above this are treated as ∞.
pub const Q_INFINITE: f64 = 64.0;

/// Uncovered share of ‖f̂‖² tolerated before `CoverageGap`.
const COVERAGE_TOL: f64 = 1e-6;

/// Frequencies with |f̂|² below this share of the peak are ignored when
/// choosing the shell range.
const SUPPORT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TLParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl TLParams {
    pub fn new(p: f64, q: f64, alpha: f64, beta: f64) -> Result<Self> {
        let out = Self { p, q, alpha, beta };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must lie in (0, ∞), got {}", self.p)));
        }
        if !(self.q > 0.0) {
            return Err(Error::InvalidParameter(format!("q must lie in (0, ∞], got {}", self.q)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    /// Parses `p=2,q=2,alpha=0,beta=1.1`; `q=inf` is accepted.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vals: BTreeMap<&str, f64> = BTreeMap::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::Parse(format!("'{part}' is not key=value")))?;
            let v = v.trim();
            let num = if v.eq_ignore_ascii_case("inf") { f64::INFINITY } else {
                v.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{v}' for {k}")))?
            };
            match k.trim() {
                key @ ("p" | "q" | "alpha" | "beta") => {
                    vals.insert(key, num);
                }
                other => return Err(Error::Parse(format!("unknown parameter '{other}'"))),
            }
        }
        let get = |k: &str| vals.get(k).copied().ok_or_else(|| Error::Parse(format!("missing parameter '{k}'")));
        Self::new(get("p")?, get("q")?, vals.get("alpha").copied().unwrap_or(0.0), get("beta")?)
    }

    pub fn q_infinite(&self) -> bool {
        self.q >= Q_INFINITE
    }

    /// 1/q, zero for q = ∞.
    pub fn inv_q(&self) -> f64 {
        if self.q_infinite() { 0.0 } else { 1.0 / self.q }
    }

    /// r = min{1, p, q}.
    pub fn r(&self) -> f64 {
        1.0f64.min(self.p).min(self.q)
    }

    /// α′ = α + 1/2 − 1/q.
    pub fn alpha_prime(&self) -> f64 {
        self.alpha + 0.5 - self.inv_q()
    }

    /// β > max{1/p, 1/q}, the hypothesis of the norm equivalences.
    pub fn check_equivalence(&self) -> Result<()> {
        let need = (1.0 / self.p).max(self.inv_q());
        if self.beta > need {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("beta = {} must exceed max(1/p, 1/q) = {need}", self.beta)))
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }
}

/// Pointwise inner L^q accumulator: Σ w·v^q, or max v for q = ∞.
struct InnerLq {
    q: f64,
    infinite: bool,
    acc: Vec<f64>,
}

impl InnerLq {
    fn new(len: usize, q: f64) -> Self {
        Self { q, infinite: q >= Q_INFINITE, acc: vec![0.0; len] }
    }

    fn add(&mut self, weight: f64, values: &[f64]) {
        if weight <= 0.0 {
            return;
        }
        if self.infinite {
            for (a, v) in self.acc.iter_mut().zip(values) {
                *a = a.max(*v);
            }
        } else {
            for (a, v) in self.acc.iter_mut().zip(values) {
                if *v > 0.0 {
                    *a += weight * v.powf(self.q);
                }
            }
        }
    }

    /// (cell · Σₓ inner(x)^p)^{1/p}.
    fn outer(self, p: f64, cell: f64) -> f64 {
        let sum: f64 = if self.infinite {
            self.acc.iter().map(|v| v.powf(p)).sum()
        } else {
            self.acc.iter().map(|v| v.powf(p / self.q)).sum()
        };
        (cell * sum).powf(1.0 / p)
    }
}

fn check_window(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales) -> Result<()> {
    f.grid.check_same(&fs.grid)?;
    if wnd.dual().dim() != f.grid.d {
        return Err(Error::DimensionMismatch { expected: f.grid.d, got: wnd.dual().dim() });
    }
    Ok(())
}

/// Range of t_{A*}(ξ) over the frequencies carrying f̂; `None` if f̂ = 0.
fn spectral_t_range(f: &TestSignal, fs: &FrequencyScales) -> Option<(f64, f64)> {
    let peak = f.spectrum.iter().fold(0.0f64, |m, v| m.max(v.norm_sqr()));
    if peak == 0.0 {
        return None;
    }
    let mut range: Option<(f64, f64)> = None;
    for (v, t) in f.spectrum.iter().zip(&fs.t) {
        if let Some(t) = t {
            if v.norm_sqr() > SUPPORT_FLOOR * peak {
                range = Some(range.map_or((*t, *t), |(a, b)| (a.min(*t), b.max(*t))));
            }
        }
    }
    range
}

/// Integer levels j whose window φ̂((A*)^{-j}·) meets the support of f̂.
pub fn shell_range(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales) -> Option<(i32, i32)> {
    let (lo, hi) = spectral_t_range(f, fs)?;
    let (a, b) = wnd.profile().support();
    Some(((lo - b).floor() as i32, (hi - a).ceil() as i32))
}

/// Continuous scales meeting the support of f̂, sampled with m cells.
pub fn peetre_scales(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales, m: usize) -> Result<Option<ScaleGrid>> {
    match spectral_t_range(f, fs) {
        None => Ok(None),
        Some((lo, hi)) => {
            let (a, b) = wnd.profile().support();
            ScaleGrid::new(m, lo - b, hi - a).map(Some)
        }
    }
}

/// Share of ‖f̂‖² at frequencies where some window with scale coordinate
/// shift in [lo, hi] is nonzero, i.e. a < t(ξ) − s < b for some s.
fn coverage_between(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales, lo: f64, hi: f64) -> f64 {
    let (a, b) = wnd.profile().support();
    let mut total = 0.0;
    let mut covered = 0.0;
    for (v, t) in f.spectrum.iter().zip(&fs.t) {
        let e = v.norm_sqr();
        total += e;
        if let Some(t) = t {
            if *t > lo + a && *t < hi + b {
                covered += e;
            }
        }
    }
    if total == 0.0 { 1.0 } else { covered / total }
}

/// Covered share of ‖f̂‖² for the integer levels j_lo..=j_hi.
pub fn coverage_fraction(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales, levels: (i32, i32)) -> f64 {
    coverage_between(f, wnd, fs, levels.0 as f64, levels.1 as f64)
}

fn require_coverage(share: f64) -> Result<()> {
    if share < 1.0 - COVERAGE_TOL {
        Err(Error::CoverageGap(1.0 - share))
    } else {
        Ok(())
    }
}

/// |f ∗ φ_s| on the grid, with φ̂_s(ξ) = φ̂((A*)^{-s}ξ).
fn band_modulus(f: &TestSignal, wnd: &SpectralWindow, fs: &FrequencyScales, spec: &Spectral, s: f64) -> Vec<f64> {
    let win = wnd.sample_dilated(fs, -s);
    if win.iter().zip(&f.spectrum).all(|(w, v)| *w == 0.0 || v.norm_sqr() == 0.0) {
        return vec![0.0; f.grid.len()];
    }
    let prod = f.spectrum.iter().zip(&win).map(|(v, w)| v * *w).collect();
    spec.from_fourier(prod).into_iter().map(|v| v.norm()).collect()
}

/// ‖(Σⱼ(|det A|^{jα}|f∗φⱼ|)^q)^{1/q}‖_{L^p} with φ̂ⱼ = φ̂((A*)^{-j}·); `levels`
/// defaults to every j meeting the support of f̂.
pub fn tl_norm_lp(
    f: &TestSignal,
    phi: &SpectralWindow,
    fs: &FrequencyScales,
    params: &TLParams,
    levels: Option<(i32, i32)>,
) -> Result<f64> {
    params.validate()?;
    check_window(f, phi, fs)?;
    let Some(levels) = levels.or_else(|| shell_range(f, phi, fs)) else {
        return Ok(0.0);
    };
    require_coverage(coverage_fraction(f, phi, fs, levels))?;
    let grid = f.grid;
    let spec = Spectral::new(grid);
    let det = phi.dual().abs_det();
    let js: Vec<i32> = (levels.0..=levels.1).collect();
    let slices = crate::par::map_slice(&js, |&j| band_modulus(f, phi, fs, &spec, j as f64));
    let mut inner = InnerLq::new(grid.len(), params.q);
    for (j, mut sl) in js.iter().zip(slices) {
        let amp = det.powf(*j as f64 * params.alpha);
        sl.iter_mut().for_each(|v| *v *= amp);
        inner.add(1.0, &sl);
    }
    Ok(inner.outer(params.p, grid.cell_volume()))
}

/// |det A|^{αs}·φ**_{s,β}f on the grid.
#[allow(clippy::too_many_arguments)]
fn peetre_slice(
    f: &TestSignal,
    phi: &SpectralWindow,
    fs: &FrequencyScales,
    spec: &Spectral,
    s: f64,
    params: &TLParams,
    offsets: &PeetreOffsets,
    dil: &Dilation,
) -> Result<Vec<f64>> {
    let band = band_modulus(f, phi, fs, spec, s);
    let mut out = peetre_maximal(&band, s, params.beta, offsets, dil)?;
    let amp = dil.abs_det().powf(params.alpha * s);
    out.iter_mut().for_each(|v| *v *= amp);
    Ok(out)
}

fn check_offsets(f: &TestSignal, offsets: &PeetreOffsets, dil: &Dilation) -> Result<()> {
    f.grid.check_same(&offsets.grid())?;
    if dil.dim() != f.grid.d {
        return Err(Error::DimensionMismatch { expected: f.grid.d, got: dil.dim() });
    }
    Ok(())
}

/// ‖(∫(|det A|^{αs}φ**_{s,β}f)^q ds)^{1/q}‖_{L^p} with the trapezoid rule on
/// the m + 1 nodes s_min, …, s_max.
pub fn tl_norm_peetre_cont(
    f: &TestSignal,
    phi: &SpectralWindow,
    fs: &FrequencyScales,
    params: &TLParams,
    scales: &ScaleGrid,
    offsets: &PeetreOffsets,
    dil: &Dilation,
) -> Result<f64> {
    params.validate()?;
    params.check_equivalence()?;
    check_window(f, phi, fs)?;
    check_offsets(f, offsets, dil)?;
    if spectral_t_range(f, fs).is_none() {
        return Ok(0.0);
    }
    require_coverage(coverage_between(f, phi, fs, scales.s_min, scales.s_max))?;
    let spec = Spectral::new(f.grid);
    let step = scales.step();
    let mut inner = InnerLq::new(f.grid.len(), params.q);
    for i in 0..=scales.m {
        let s = scales.s_min + i as f64 * step;
        let w = if i == 0 || i == scales.m { step / 2.0 } else { step };
        inner.add(w, &peetre_slice(f, phi, fs, &spec, s, params, offsets, dil)?);
    }
    Ok(inner.outer(params.p, f.grid.cell_volume()))
}

/// ‖(Σⱼ(|det A|^{jα}φ**_{j,β}f)^q)^{1/q}‖_{L^p} over integer j.
pub fn tl_norm_peetre_disc(
    f: &TestSignal,
    phi: &SpectralWindow,
    fs: &FrequencyScales,
    params: &TLParams,
    levels: Option<(i32, i32)>,
    offsets: &PeetreOffsets,
    dil: &Dilation,
) -> Result<f64> {
    params.validate()?;
    params.check_equivalence()?;
    check_window(f, phi, fs)?;
    check_offsets(f, offsets, dil)?;
    let Some(levels) = levels.or_else(|| shell_range(f, phi, fs)) else {
        return Ok(0.0);
    };
    require_coverage(coverage_fraction(f, phi, fs, levels))?;
    let spec = Spectral::new(f.grid);
    let mut inner = InnerLq::new(f.grid.len(), params.q);
    for j in levels.0..=levels.1 {
        inner.add(1.0, &peetre_slice(f, phi, fs, &spec, j as f64, params, offsets, dil)?);
    }
    Ok(inner.outer(params.p, f.grid.cell_volume()))
}

/// One coefficient c_{j,k} of a finitely supported sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqEntry {
    pub j: i32,
    pub k: Vec<i64>,
    pub value: f64,
}

/// Sums repeated indices and drops zeros.
fn merge(c: &[SeqEntry], d: usize) -> Result<Vec<SeqEntry>> {
    let mut map: BTreeMap<(i32, Vec<i64>), f64> = BTreeMap::new();
    for e in c {
        if e.k.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: e.k.len() });
        }
        if !e.value.is_finite() {
            return Err(Error::InvalidParameter(format!("coefficient at j={} is not finite", e.j)));
        }
        *map.entry((e.j, e.k.clone())).or_insert(0.0) += e.value;
    }
    Ok(map.into_iter().filter(|(_, v)| *v != 0.0).map(|((j, k), value)| SeqEntry { j, k, value }).collect())
}

fn combine(vals: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q >= Q_INFINITE {
        vals.fold(0.0, f64::max)
    } else {
        vals.map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn is_diagonal(dil: &Dilation) -> bool {
    let m = dil.matrix().matrix();
    let d = m.nrows();
    (0..d).all(|r| (0..d).all(|c| r == c || m[(r, c)] == 0.0))
}

fn sorted_breaks(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// ∫ Fᵖ over the product partition cut by the axis-aligned cells.
fn product_partition(boxes: &[(Vec<(f64, f64)>, f64)], d: usize, p: f64, q: f64) -> f64 {
    let breaks: Vec<Vec<f64>> =
        (0..d).map(|a| sorted_breaks(boxes.iter().flat_map(|(b, _)| [b[a].0, b[a].1]).collect())).collect();
    let counts: Vec<usize> = breaks.iter().map(|b| b.len() - 1).collect();
    let total: usize = counts.iter().product();
    let mut sum = 0.0;
    let mut mid = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        let mut vol = 1.0;
        for a in (0..d).rev() {
            let i = rem % counts[a];
            rem /= counts[a];
            mid[a] = 0.5 * (breaks[a][i] + breaks[a][i + 1]);
            vol *= breaks[a][i + 1] - breaks[a][i];
        }
        let inside = boxes.iter().filter(|(b, _)| b.iter().zip(&mid).all(|((lo, hi), x)| lo < x && x < hi)).map(|(_, v)| *v);
        let fv = combine(inside, q);
        if fv > 0.0 {
            sum += vol * fv.powf(p);
        }
    }
    sum
}

/// x-coordinate where segments (p0,p1) and (r0,r1) cross, if they do.
fn crossing(p0: [f64; 2], p1: [f64; 2], r0: [f64; 2], r1: [f64; 2]) -> Option<f64> {
    let d1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let d2 = [r1[0] - r0[0], r1[1] - r0[1]];
    let den = d1[0] * d2[1] - d1[1] * d2[0];
    if den.abs() < 1e-300 {
        return None;
    }
    let w = [r0[0] - p0[0], r0[1] - p0[1]];
    let u = (w[0] * d2[1] - w[1] * d2[0]) / den;
    let v = (w[0] * d1[1] - w[1] * d1[0]) / den;
    ((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)).then(|| p0[0] + u * d1[0])
}

/// ∫ Fᵖ over the plane for convex quadrilateral cells: vertical slabs between
/// all vertex and edge-crossing abscissae, inside which every region is a
/// trapezoid whose area is its width times its midline height.
fn slab_partition(cells: &[([[f64; 2]; 4], f64)], p: f64, q: f64) -> f64 {
    let edges: Vec<([f64; 2], [f64; 2])> =
        cells.iter().flat_map(|(v, _)| (0..4).map(move |i| (v[i], v[(i + 1) % 4]))).collect();
    let mut xs: Vec<f64> = cells.iter().flat_map(|(v, _)| v.iter().map(|p| p[0])).collect();
    for i in 0..edges.len() {
        for e in &edges[i + 1..] {
            if let Some(x) = crossing(edges[i].0, edges[i].1, e.0, e.1) {
                xs.push(x);
            }
        }
    }
    let xs = sorted_breaks(xs);
    let mut sum = 0.0;
    for w in xs.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        let um = 0.5 * (w[0] + w[1]);
        let spans: Vec<(f64, f64, f64)> = cells
            .iter()
            .filter_map(|(v, val)| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..4 {
                    let (a, b) = (v[i], v[(i + 1) % 4]);
                    if (a[0] - um) * (b[0] - um) < 0.0 {
                        let y = a[1] + (b[1] - a[1]) * (um - a[0]) / (b[0] - a[0]);
                        lo = lo.min(y);
                        hi = hi.max(y);
                    }
                }
                (hi > lo).then_some((lo, hi, *val))
            })
            .collect();
        let ys = sorted_breaks(spans.iter().flat_map(|s| [s.0, s.1]).collect());
        for y in ys.windows(2) {
            let ym = 0.5 * (y[0] + y[1]);
            let fv = combine(spans.iter().filter(|s| s.0 < ym && ym < s.1).map(|s| s.2), q);
            if fv > 0.0 {
                sum += width * (y[1] - y[0]) * fv.powf(p);
            }
        }
    }
    sum
}

/// ‖(Σ_{j,k}(|det A|^{j(α+1/2)}|c_{j,k}|1_{A^{-j}([0,1)ᵈ+k)})^q)^{1/q}‖_{L^p},
/// integrated exactly over the partition cut by the cells. Any d for diagonal
/// A, d = 2 otherwise.
pub fn seq_norm(c: &[SeqEntry], params: &TLParams, dil: &Dilation) -> Result<f64> {
    params.validate()?;
    let d = dil.dim();
    let c = merge(c, d)?;
    if c.is_empty() {
        return Ok(0.0);
    }
    let det = dil.abs_det();
    let amp = |e: &SeqEntry| det.powf(e.j as f64 * (params.alpha + 0.5)) * e.value.abs();
    let sum = if is_diagonal(dil) {
        let diag: Vec<f64> = (0..d).map(|a| dil.matrix().matrix()[(a, a)]).collect();
        let boxes: Vec<(Vec<(f64, f64)>, f64)> = c
            .iter()
            .map(|e| {
                let b = (0..d)
                    .map(|a| {
                        let s = diag[a].powi(-e.j);
                        let (x, y) = (s * e.k[a] as f64, s * (e.k[a] + 1) as f64);
                        (x.min(y), x.max(y))
                    })
                    .collect();
                (b, amp(e))
            })
            .collect();
        product_partition(&boxes, d, params.p, params.q)
    } else if d == 2 {
        let cells: Vec<([[f64; 2]; 4], f64)> = c
            .iter()
            .map(|e| {
                let corner = |u: i64, v: i64| {
                    let y = dil.power_vec(-e.j, &[(e.k[0] + u) as f64, (e.k[1] + v) as f64]);
                    [y[0], y[1]]
                };
                ([corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)], amp(e))
            })
            .collect();
        slab_partition(&cells, params.p, params.q)
    } else {
        return Err(Error::Unsupported(format!("exact sequence quadrature for a non-diagonal matrix in d = {d}")));
    };
    Ok(sum.powf(1.0 / params.p))
}

/// Σ_k |c_{ℓ,k}|·1_{A^{-ℓ}([−1,1)ᵈ+k)} sampled on the grid, per level ℓ.
fn level_rasters(c: &[SeqEntry], grid: &SpatialGrid, dil: &Dilation) -> BTreeMap<i32, Vec<f64>> {
    let d = grid.d;
    let mut out: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for e in c {
        let power = flatten(&dil.matrix().integer_power(e.j));
        let raster = out.entry(e.j).or_insert_with(|| vec![0.0; grid.len()]);
        for (idx, r) in raster.iter_mut().enumerate() {
            grid.point(idx, &mut x);
            matvec(&power, d, &x, &mut y);
            if y.iter().zip(&e.k).all(|(v, k)| {
                let u = v - *k as f64;
                (-1.0..1.0).contains(&u)
            }) {
                *r += e.value.abs();
            }
        }
    }
    out
}

/// The sequence maximal functional
/// ‖(∫(sup_z |det A|^{−(α+1/2)s}(1+ρ_A(A^{−s}z))^{−β} Σ_{ℓ,k}|c_{ℓ,k}|
/// 1_{A^{−ℓ}([−1,1)ᵈ+k)}(·+z) 1_{−ℓ+[−1,1)}(s))^q ds)^{1/q}‖_{L^p}
/// on the grid of `offsets`, with `per_unit` midpoint nodes per unit of s.
pub fn seq_maximal_norm(
    c: &[SeqEntry],
    params: &TLParams,
    offsets: &PeetreOffsets,
    dil: &Dilation,
    per_unit: usize,
) -> Result<f64> {
    params.validate()?;
    let grid = offsets.grid();
    let c = merge(c, grid.d)?;
    if c.is_empty() {
        return Ok(0.0);
    }
    if per_unit == 0 {
        return Err(Error::InvalidParameter("per_unit must be positive".into()));
    }
    let rasters = level_rasters(&c, &grid, dil);
    let l_min = *rasters.keys().next().expect("nonempty");
    let l_max = *rasters.keys().next_back().expect("nonempty");
    let s_lo = (-l_max - 1) as f64;
    let nodes = (l_max - l_min + 2) as usize * per_unit;
    let ds = 1.0 / per_unit as f64;
    let det = dil.abs_det();
    let slices = crate::par::map_indices(nodes, |i| -> Result<Vec<f64>> {
        let s = s_lo + (i as f64 + 0.5) * ds;
        let mut h = vec![0.0; grid.len()];
        for (l, r) in &rasters {
            let l = *l as f64;
            if -l - 1.0 <= s && s < -l + 1.0 {
                h.iter_mut().zip(r).for_each(|(a, b)| *a += b);
            }
        }
        let mut g = peetre_maximal(&h, -s, params.beta, offsets, dil)?;
        let amp = det.powf(-(params.alpha + 0.5) * s);
        g.iter_mut().for_each(|v| *v *= amp);
        Ok(g)
    });
    let mut inner = InnerLq::new(grid.len(), params.q);
    for g in slices {
        inner.add(ds, &g?);
    }
    Ok(inner.outer(params.p, grid.cell_volume()))
}

fn check_field(f: &GroupField, dil: &Dilation) -> Result<()> {
    if dil.dim() != f.spatial.d {
        return Err(Error::DimensionMismatch { expected: f.spatial.d, got: dil.dim() });
    }
    Ok(())
}

/// ‖x ↦ (∫(|det A|^{αs} sup_z |F(x+z,s)|/(1+ρ_A(A^{−s}z))^β)^q ds/|det A|^s)^{1/q}‖_{L^p}
/// with exact cell masses in s.
pub fn peetre_space_norm(f: &GroupField, params: &TLParams, offsets: &PeetreOffsets, dil: &Dilation) -> Result<f64> {
    params.validate()?;
    check_field(f, dil)?;
    f.spatial.check_same(&offsets.grid())?;
    let det = dil.abs_det();
    let sg = f.scales;
    let slices = crate::par::map_indices(sg.m, |j| -> Result<Option<Vec<f64>>> {
        let abs: Vec<f64> = f.slice(j).iter().map(|v| v.norm()).collect();
        if abs.iter().all(|v| *v == 0.0) {
            return Ok(None);
        }
        let s = sg.sample(j);
        let mut out = peetre_maximal(&abs, -s, params.beta, offsets, dil)?;
        let amp = det.powf(params.alpha * s);
        out.iter_mut().for_each(|v| *v *= amp);
        Ok(Some(out))
    });
    let mut inner = InnerLq::new(f.spatial.len(), params.q);
    for (j, sl) in slices.into_iter().enumerate() {
        if let Some(sl) = sl? {
            inner.add(sg.haar_weight(j, det), &sl);
        }
    }
    Ok(inner.outer(params.p, f.spatial.cell_volume()))
}

/// Weight on the group for `mixed_lpq_norm`.
pub type GroupWeight<'a> = &'a dyn Fn(&[f64], f64) -> f64;

/// ‖x ↦ ‖w(x,·)F(x,·)‖_{L^q(|det A|^{−s}ds)}‖_{L^p}.
pub fn mixed_lpq_norm(f: &GroupField, weight: Option<GroupWeight>, p: f64, q: f64, dil: &Dilation) -> Result<f64> {
    TLParams::new(p, q, 0.0, 1.0)?;
    check_field(f, dil)?;
    let grid = f.spatial;
    let sg = f.scales;
    let det = dil.abs_det();
    let mut inner = InnerLq::new(grid.len(), q);
    let mut x = vec![0.0; grid.d];
    for j in 0..sg.m {
        let s = sg.sample(j);
        let vals: Vec<f64> = f
            .slice(j)
            .iter()
            .enumerate()
            .map(|(k, v)| match weight {
                None => v.norm(),
                Some(w) => {
                    grid.point(k, &mut x);
                    w(&x, s) * v.norm()
                }
            })
            .collect();
        inner.add(sg.haar_weight(j, det), &vals);
    }
    Ok(inner.outer(p, grid.cell_volume()))
}

/// ‖M^L_Q W_ψf‖ in the Peetre-type space with smoothness −α′.
#[allow(clippy::too_many_arguments)]
pub fn coorbit_norm(
    f: &TestSignal,
    psi: &SpectralWindow,
    fs: &FrequencyScales,
    params: &TLParams,
    q: &QBox,
    scales: &ScaleGrid,
    offsets: &PeetreOffsets,
    dil: &Dilation,
) -> Result<f64> {
    params.validate()?;
    let w = wavelet_transform(f, psi, fs, scales)?.field;
    if w.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let m = local_maximal(&w, q, Side::Left, dil)?;
    peetre_space_norm(&m, &params.with_alpha(-params.alpha_prime()), offsets, dil)
}

/// The box [−N, N)ᵈ × [−N, N) around the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UBox {
    pub half_width: f64,
}

impl Default for UBox {
    fn default() -> Self {
        Self { half_width: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PeetreSeqReport {
    pub norm: f64,
    /// Largest number of sets γU covering one grid point.
    pub max_multiplicity: usize,
}

/// Σ_γ |c_γ|·1_{γU} on the group grid, with the largest overlap count.
pub fn rasterize_atoms(
    atoms: &[(GroupElement, f64)],
    u: &UBox,
    spatial: SpatialGrid,
    scales: ScaleGrid,
    dil: &Dilation,
) -> Result<(GroupField, usize)> {
    let d = spatial.d;
    let n = u.half_width;
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("U half width must be positive, got {n}")));
    }
    let inv: Vec<Vec<f64>> = atoms
        .iter()
        .map(|(g, _)| {
            if g.x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: g.x.len() });
            }
            dil.matrix().power(-g.s).map(|m| flatten(&m))
        })
        .collect::<Result<_>>()?;
    let mut field = GroupField::zeros(spatial, scales);
    let mut count = vec![0usize; field.values.len()];
    let mut x = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut y = vec![0.0; d];
    let inside = |v: f64| -n <= v && v < n;
    for ((g, c), m) in atoms.iter().zip(&inv) {
        let js: Vec<usize> = (0..scales.m).filter(|&j| inside(scales.sample(j) - g.s)).collect();
        if js.is_empty() {
            continue;
        }
        for k in 0..spatial.len() {
            spatial.point(k, &mut x);
            for a in 0..d {
                diff[a] = x[a] - g.x[a];
            }
            matvec(m, d, &diff, &mut y);
            if y.iter().all(|&v| inside(v)) {
                for &j in &js {
                    let idx = j * spatial.len() + k;
                    field.values[idx].re += c.abs();
                    count[idx] += 1;
                }
            }
        }
    }
    Ok((field, count.into_iter().max().unwrap_or(0)))
}

/// ‖Σ_γ |c_γ|·1_{γU}‖ in the Peetre-type space, rasterized on the group grid.
pub fn peetre_seq_norm(
    atoms: &[(GroupElement, f64)],
    u: &UBox,
    params: &TLParams,
    scales: ScaleGrid,
    offsets: &PeetreOffsets,
    dil: &Dilation,
) -> Result<PeetreSeqReport> {
    params.validate()?;
    let (field, max_multiplicity) = rasterize_atoms(atoms, u, offsets.grid(), scales, dil)?;
    let norm = if atoms.is_empty() { 0.0 } else { peetre_space_norm(&field, params, offsets, dil)? };
    Ok(PeetreSeqReport { norm, max_multiplicity })
}

/// The regular point set {(A^{-j}k, −j)} carrying the coefficients of c.
pub fn regular_atoms(c: &[SeqEntry], dil: &Dilation) -> Vec<(GroupElement, f64)> {
    c.iter()
        .map(|e| {
            let k: Vec<f64> = e.k.iter().map(|&v| v as f64).collect();
            (GroupElement::new(dil.power_vec(-e.j, &k), -(e.j as f64)), e.value)
        })
        .collect()
}

/// A seeded sparse sequence: `count` coefficients in [−1, 1] at levels
/// j ∈ [levels.0, levels.1] and translations |kᵢ| ≤ k_max.
pub fn random_sequence(seed: u64, d: usize, count: usize, levels: (i32, i32), k_max: i64) -> Vec<SeqEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| SeqEntry {
            j: rng.random_range(levels.0..=levels.1),
            k: (0..d).map(|_| rng.random_range(-k_max..=k_max)).collect(),
            value: rng.random_range(-1.0..=1.0),
        })
        .collect()
}
