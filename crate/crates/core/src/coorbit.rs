//! Weight calculus on the group: the weight v, standard envelopes, control
//! weights, Wiener amalgam norms, envelope integrability and molecule criteria.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Dilation;
use crate::error::{Error, Result};
use crate::fit::{regression, DecayFit};
use crate::grid::ScaleGrid;
use crate::group::{invert, GroupElement, GroupField};
use crate::linalg::{flatten, matvec};
use crate::maximal::{local_maximal, QBox, Side};
use crate::norms::{mixed_lpq_norm, GroupWeight, TLParams};
use crate::sampling::{direction_dims, unit_direction, Halton};
use crate::signal::TestSignal;
use crate::spectra::{FrequencyScales, SpectralWindow};
use crate::transform::wavelet_transform;

/// ρ_A(A^{-s}x): exact shell shift for integer s, scale coordinate otherwise.
pub fn rho_shifted(dil: &Dilation, x: &[f64], s: f64) -> Result<f64> {
    let Some(j) = dil.shell(x) else {
        return Ok(0.0);
    };
    if s.fract() == 0.0 {
        return Ok(dil.abs_det().powf(j as f64 - s));
    }
    Ok(dil.quasi_norm_from_scale(Some(dil.scale(x)?), -s))
}

/// Ξ_{σ,L}(x,s) = θ_σ(s)·η_L(x,s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub sigma: (f64, f64),
    #[serde(rename = "L")]
    pub l: f64,
}

impl Envelope {
    pub fn new(sigma: (f64, f64), l: f64) -> Result<Self> {
        if !(sigma.0 > 0.0 && sigma.1 > 0.0 && sigma.0.is_finite() && sigma.1.is_finite()) {
            return Err(Error::InvalidParameter(format!("envelope needs σ ∈ (0,∞)², got {sigma:?}")));
        }
        if !l.is_finite() {
            return Err(Error::InvalidParameter(format!("envelope exponent must be finite, got {l}")));
        }
        Ok(Self { sigma, l })
    }

    /// θ_σ(s) = σ₁ˢ for s ≥ 0, σ₂ˢ for s < 0.
    pub fn theta(&self, s: f64) -> f64 {
        if s >= 0.0 { self.sigma.0.powf(s) } else { self.sigma.1.powf(s) }
    }

    /// η_L(x,s) = (1 + min{ρ_A(x), ρ_A(A^{-s}x)})^{-L}.
    pub fn eta(&self, x: &[f64], s: f64, dil: &Dilation) -> Result<f64> {
        if self.l == 0.0 {
            return Ok(1.0);
        }
        let m = dil.quasi_norm(x).min(rho_shifted(dil, x, s)?);
        Ok((1.0 + m).powf(-self.l))
    }

    /// (1 + ρ_A(A^{-s⁺}x))^{-L}, the comparable form of η_L.
    pub fn eta_alternative(&self, x: &[f64], s: f64, dil: &Dilation) -> Result<f64> {
        Ok((1.0 + rho_shifted(dil, x, s.max(0.0))?).powf(-self.l))
    }

    pub fn eval(&self, g: &GroupElement, dil: &Dilation) -> Result<f64> {
        Ok(self.theta(g.s) * self.eta(&g.x, g.s, dil)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VMode {
    BruteForce,
    ClosedForm,
}

/// 1 + |det A|^{-t} + ρ_A(A^{-t}y).
pub fn weight_v_closed(g: &GroupElement, dil: &Dilation) -> Result<f64> {
    Ok(1.0 + dil.abs_det().powf(-g.s) + rho_shifted(dil, &g.x, g.s)?)
}

/// Largest box level for the brute-force sup.
const V_MAX_LEVEL: usize = 8;
/// Relative change per level below which the running sup counts as settled.
const V_SETTLE: f64 = 0.01;
/// Scale-coordinate samples per unit in the brute-force sweep.
const V_PER_UNIT: usize = 4;
/// Scale-coordinate half range added per level.
const V_RANGE_STEP: usize = 4;

/// Log-polar probe points A^τ·c·u for the brute-force sup of v: the box
/// of level ℓ spans τ ∈ [−4ℓ, 4ℓ].
#[derive(Debug, Clone)]
pub struct VSampler {
    d: usize,
    /// (τ, flattened A^τ) for τ on the level-8 range.
    powers: Vec<(f64, Vec<f64>)>,
    /// P-unit directions scaled to the ellipsoid boundary.
    dirs: Vec<Vec<f64>>,
}

impl VSampler {
    pub fn new(dil: &Dilation) -> Result<Self> {
        let d = dil.dim();
        let span = (V_MAX_LEVEL * V_RANGE_STEP * V_PER_UNIT) as i64;
        let powers = (-span..=span)
            .map(|i| {
                let tau = i as f64 / V_PER_UNIT as f64;
                dil.matrix().power(tau).map(|m| (tau, flatten(&m)))
            })
            .collect::<Result<Vec<_>>>()?;
        let count = match d {
            1 => 2,
            2 => 16,
            _ => 64,
        };
        let c = dil.ellipsoid().c;
        let dirs = if d == 1 {
            vec![vec![c * dil.p_unit(&[1.0])[0]], vec![-c * dil.p_unit(&[1.0])[0]]]
        } else {
            let h = Halton::new(direction_dims(d));
            (0..count as u64)
                .map(|i| {
                    let u = if d == 2 {
                        let a = std::f64::consts::TAU * i as f64 / count as f64;
                        vec![a.cos(), a.sin()]
                    } else {
                        unit_direction(&h.point(i), d)
                    };
                    dil.p_unit(&u).into_iter().map(|v| v * c).collect()
                })
                .collect()
        };
        Ok(Self { d, powers, dirs })
    }

    fn level_points(&self, level: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        let mid = self.powers.len() / 2;
        let half = level * V_RANGE_STEP * V_PER_UNIT;
        self.powers[mid - half..=mid + half].iter().flat_map(move |(_, m)| {
            self.dirs.iter().map(move |u| {
                let mut w = vec![0.0; self.d];
                matvec(m, self.d, u, &mut w);
                w
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VEstimate {
    pub value: f64,
    /// Box level at which the running sup settled.
    pub level: usize,
}

/// sup over the sampled w of (1 + ρ_A(w))/(1 + ρ_A(Aᵗw − y)). Because
/// A^{-u}Aᵗz = Aᵗ(A^{-u}z), the sup over (z, u) equals this sup over w = A^{-u}z.
/// Probes are log-polar around 0 and around A^{-t}y, where the denominator
/// vanishes, with the box growing one level at a time until the sup settles.
pub fn weight_v_brute(g: &GroupElement, sampler: &VSampler, dil: &Dilation) -> Result<VEstimate> {
    let d = dil.dim();
    if g.x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: g.x.len() });
    }
    let at = flatten(&dil.matrix().power(g.s)?);
    let center = dil.continuous_power_vec(-g.s, &g.x)?;
    let mut moved = vec![0.0; d];
    let mut ratio = |w: &[f64]| {
        matvec(&at, d, w, &mut moved);
        for (m, y) in moved.iter_mut().zip(&g.x) {
            *m -= y;
        }
        (1.0 + dil.quasi_norm(w)) / (1.0 + dil.quasi_norm(&moved))
    };
    let mut best = ratio(&vec![0.0; d]).max(ratio(&center));
    let mut prev = best;
    for level in 1..=V_MAX_LEVEL {
        for w in sampler.level_points(level) {
            best = best.max(ratio(&w));
            let shifted: Vec<f64> = w.iter().zip(&center).map(|(a, b)| a + b).collect();
            best = best.max(ratio(&shifted));
        }
        if level > 1 && best <= prev * (1.0 + V_SETTLE) {
            return Ok(VEstimate { value: best, level });
        }
        prev = best;
    }
    Err(Error::NonConvergent(V_MAX_LEVEL))
}

pub fn weight_v(g: &GroupElement, mode: VMode, sampler: &VSampler, dil: &Dilation) -> Result<f64> {
    match mode {
        VMode::ClosedForm => weight_v_closed(g, dil),
        VMode::BruteForce => weight_v_brute(g, sampler, dil).map(|e| e.value),
    }
}

/// The standard control weight surrogate Ξ_{σ,0} + Ξ_{κ,−β}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ControlWeightSpec {
    pub params: TLParams,
    pub r: f64,
    /// γ = α + 1/p − 1/q.
    pub gamma: f64,
    /// δ = α − 1/q.
    pub delta: f64,
    pub sigma: (f64, f64),
    pub kappa: (f64, f64),
    /// Whether α ≥ −(1/r + β − 2/q)/2 selected the first κ branch.
    pub upper_branch: bool,
}

pub fn control_weight(params: &TLParams, abs_det: f64) -> Result<ControlWeightSpec> {
    params.validate()?;
    if !(abs_det > 1.0) {
        return Err(Error::InvalidParameter(format!("|det A| must exceed 1, got {abs_det}")));
    }
    let r = params.r();
    let iq = params.inv_q();
    let alpha = params.alpha;
    let beta = params.beta;
    let gamma = alpha + 1.0 / params.p - iq;
    let delta = alpha - iq;
    let sigma = (abs_det.powf(1.0 / r + gamma.abs()), abs_det.powf(-gamma.abs()));
    let upper_branch = alpha >= -(1.0 / r + beta - 2.0 * iq) / 2.0;
    let kappa = if upper_branch {
        (abs_det.powf(1.0 / r + alpha + beta - iq), abs_det.powf(-(alpha + beta - iq)))
    } else {
        (abs_det.powf(-(alpha - iq)), abs_det.powf(1.0 / r + alpha - iq))
    };
    Ok(ControlWeightSpec { params: *params, r, gamma, delta, sigma, kappa, upper_branch })
}

impl ControlWeightSpec {
    pub fn envelopes(&self) -> (Envelope, Envelope) {
        (Envelope { sigma: self.sigma, l: 0.0 }, Envelope { sigma: self.kappa, l: -self.params.beta })
    }

    pub fn eval(&self, g: &GroupElement, dil: &Dilation) -> Result<f64> {
        let (a, b) = self.envelopes();
        Ok(a.eval(g, dil)? + b.eval(g, dil)?)
    }

    /// |w(g) − Δ^{1/r}(g⁻¹)·w(g⁻¹)| / w(g).
    pub fn symmetry_residual(&self, g: &GroupElement, dil: &Dilation) -> Result<f64> {
        let gi = invert(g, dil)?;
        let w = self.eval(g, dil)?;
        let mirrored = dil.abs_det().powf(-gi.s / self.r) * self.eval(&gi, dil)?;
        Ok((w - mirrored).abs() / w)
    }
}

/// ‖M_Q F‖_{L^r_w(G_A)} with the two-sided local maximal function.
pub fn wiener_amalgam_norm(f: &GroupField, q: &QBox, r: f64, weight: Option<GroupWeight>, dil: &Dilation) -> Result<f64> {
    let m = local_maximal(f, q, Side::Two, dil)?;
    mixed_lpq_norm(&m, weight, r, r, dil)
}

/// F∨(g) = F(g⁻¹), interpolated on the grid of F.
pub fn involution(f: &GroupField, dil: &Dilation) -> Result<GroupField> {
    let mut out = GroupField::zeros(f.spatial, f.scales);
    let mut x = vec![0.0; f.spatial.d];
    for j in 0..f.scales.m {
        let s = f.scales.sample(j);
        for k in 0..f.spatial.len() {
            f.spatial.point(k, &mut x);
            let gi = invert(&GroupElement::new(x.clone(), s), dil)?;
            out.values[j * f.spatial.len() + k] = f.sample(&gi.x, gi.s);
        }
    }
    Ok(out)
}

/// Partial values of a truncated integral at doubling truncations.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Certificate {
    pub converged: bool,
    /// (truncation, partial value).
    pub partials: Vec<(f64, f64)>,
}

/// Converged when the last doubling changed a finite partial value by at
/// most 1e-6 of itself.
fn certify(partials: Vec<(f64, f64)>) -> Certificate {
    let n = partials.len();
    let last = partials[n - 1].1;
    let step = last - partials[n - 2].1;
    let converged = last.is_finite() && step.abs() <= 1e-6 * last.abs();
    Certificate { converged, partials }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Integrability {
    /// σ₁ < 1, σ₂ > |det A|^{1/r} and L > 1/r.
    pub finite: bool,
    /// ‖Ξ‖^r_{L^r} when finite.
    pub value: Option<f64>,
    /// Scale integral ∫θ_σ(s)^r |det A|^{s⁺−s} ds over [−S, S].
    pub scale: Certificate,
    /// Shell sums Σ_{|k|≤K}(1+|det A|ᵏ)^{−Lr}(|det A|^{k+1} − |det A|ᵏ).
    pub shells: Certificate,
}

/// Σ_{k=−K}^{K−1}(1+Dᵏ)^{−Lr}·(D^{k+1} − Dᵏ): the x-integral of η_L^r at s = 0
/// over the shells |k| ≤ K, with shell volumes from |Ω| = 1.
fn shell_sum(det: f64, lr: f64, k_max: i32) -> f64 {
    (-k_max..k_max).map(|k| (1.0 + det.powi(k)).powf(-lr) * (det.powi(k + 1) - det.powi(k))).sum()
}

/// Whether Ξ_{σ,L} ∈ L^r(G_A). The s-integral is closed form, since
/// ∫η_L(x,s)^r dx = |det A|^{s⁺}·∫η_L(x,0)^r dx exactly for the step
/// quasi-norm; the x-integral is a shell sum. Both carry numeric partial
/// values at doubling truncations as convergence or divergence evidence.
pub fn envelope_integrability(env: &Envelope, r: f64, abs_det: f64) -> Result<Integrability> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("r must be positive, got {r}")));
    }
    if !(abs_det > 1.0) {
        return Err(Error::InvalidParameter(format!("|det A| must exceed 1, got {abs_det}")));
    }
    let (s1, s2) = env.sigma;
    let lr = env.l * r;
    let ln_d = abs_det.ln();
    let finite = s1 < 1.0 && s2 > abs_det.powf(1.0 / r) && env.l > 1.0 / r;
    let value = finite.then(|| {
        let pos = 1.0 / (-r * s1.ln());
        let neg = 1.0 / (r * s2.ln() - ln_d);
        let shells = shell_sum(abs_det, lr, 4096.min(((60.0 / (lr - 1.0) / ln_d).ceil() as i32).max(64)));
        shells * (pos + neg)
    });
    let integrand = |s: f64| env.theta(s).powf(r) * abs_det.powf(s.max(0.0) - s);
    let scale = certify(
        (1..=8)
            .map(|k| {
                let cut = 2f64.powi(k);
                let steps = (cut * 64.0) as usize;
                let h = 2.0 * cut / steps as f64;
                let mut acc = 0.5 * (integrand(-cut) + integrand(cut));
                for i in 1..steps {
                    acc += integrand(-cut + i as f64 * h);
                }
                (cut, acc * h)
            })
            .collect(),
    );
    let shells = certify((1..=8).map(|k| (2f64.powi(k), shell_sum(abs_det, lr, 1 << k))).collect());
    Ok(Integrability { finite, value, scale, shells })
}

/// max over the points of M_QΞ(g)/Ξ(g), with M_Q the two-sided sup over the
/// sampled Q.
pub fn envelope_maximal_constant(env: &Envelope, q: &QBox, points: &[GroupElement], dil: &Dilation) -> Result<f64> {
    let d = dil.dim();
    let qp = q.points(d);
    let powers: Vec<Vec<f64>> = qp.iter().map(|(_, s)| dil.matrix().power(*s).map(|m| flatten(&m))).collect::<Result<_>>()?;
    let ratios = crate::par::map_slice(points, |g| -> Result<f64> {
        let base = env.eval(g, dil)?;
        let gs = flatten(&dil.matrix().power(g.s)?);
        let mut best: f64 = 1.0;
        let mut ax = vec![0.0; d];
        let mut bv = vec![0.0; d];
        for (iu, (a, su)) in qp.iter().enumerate() {
            // u g = (a + A^{σ_u} x, σ_u + s)
            matvec(&powers[iu], d, &g.x, &mut ax);
            for (v, w) in ax.iter_mut().zip(a) {
                *v += w;
            }
            let s_ug = su + g.s;
            let ug_power = if *su == 0.0 { gs.clone() } else { flatten(&dil.matrix().power(s_ug)?) };
            for (b, sv) in &qp {
                // (u g) v = (x' + A^{s'} b, s' + σ_v)
                matvec(&ug_power, d, b, &mut bv);
                let x: Vec<f64> = ax.iter().zip(&bv).map(|(p, q)| p + q).collect();
                best = best.max(env.eval(&GroupElement::new(x, s_ug + sv), dil)? / base);
            }
        }
        Ok(best)
    });
    ratios.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MoleculeCheck {
    pub pass: bool,
    /// λ₋^{δN}.
    pub lambda_power: f64,
    /// The largest of the three |det A| powers λ₋^{δN} must beat.
    pub threshold: f64,
    /// ln(λ₋^{δN}/threshold), positive when the first inequality holds.
    pub lambda_margin: f64,
    /// L(1−δ) − (1/r + β), positive when the second inequality holds.
    pub decay_margin: f64,
}

/// The two vector conditions: λ₋^{δN} > max{…} and L(1−δ) > 1/r + β.
pub fn molecule_param_check(
    params: &TLParams,
    l: f64,
    n: u32,
    delta: f64,
    lambda_minus: f64,
    abs_det: f64,
) -> Result<MoleculeCheck> {
    params.validate()?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(lambda_minus > 1.0) {
        return Err(Error::InvalidParameter(format!("lambda_minus must exceed 1, got {lambda_minus}")));
    }
    if !(l > 1.0) {
        return Err(Error::InvalidParameter(format!("L must exceed 1, got {l}")));
    }
    let r = params.r();
    let iq = params.inv_q();
    let a = params.alpha;
    let gamma = a + 1.0 / params.p - iq;
    let threshold = [1.0 / r - 0.5 + gamma.abs(), -0.5 + 1.0 / r + a + params.beta - iq, -0.5 - (a - iq)]
        .into_iter()
        .map(|e| abs_det.powf(e))
        .fold(0.0, f64::max);
    let lambda_power = lambda_minus.powf(delta * n as f64);
    let lambda_margin = (lambda_power / threshold).ln();
    let decay_margin = l * (1.0 - delta) - (1.0 / r + params.beta);
    Ok(MoleculeCheck { pass: lambda_margin > 0.0 && decay_margin > 0.0, lambda_power, threshold, lambda_margin, decay_margin })
}

/// Pass/fail of the vector conditions for λ₋ spread over (1, min|σ(A)|).
pub fn lambda_sensitivity(
    params: &TLParams,
    l: f64,
    n: u32,
    delta: f64,
    dil: &Dilation,
    samples: usize,
) -> Result<Vec<(f64, MoleculeCheck)>> {
    let top = dil.matrix().min_modulus();
    (1..=samples)
        .map(|i| {
            let lam = 1.0 + (top - 1.0) * i as f64 / (samples + 1) as f64;
            molecule_param_check(params, l, n, delta, lam, dil.abs_det()).map(|c| (lam, c))
        })
        .collect()
}

/// C·Ξ_{σ,L}, an envelope evaluable anywhere on the group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledEnvelope {
    pub constant: f64,
    pub shape: Envelope,
}

impl ScaledEnvelope {
    /// The smallest multiple of the shape above |F| on the grid, times `slack`.
    pub fn fit(f: &GroupField, shape: Envelope, slack: f64, dil: &Dilation) -> Result<Self> {
        let mut c: f64 = 0.0;
        let mut x = vec![0.0; f.spatial.d];
        for j in 0..f.scales.m {
            let s = f.scales.sample(j);
            for k in 0..f.spatial.len() {
                let v = f.value(k, j).norm();
                if v > 0.0 {
                    f.spatial.point(k, &mut x);
                    c = c.max(v / shape.eval(&GroupElement::new(x.clone(), s), dil)?);
                }
            }
        }
        Ok(Self { constant: c * slack, shape })
    }

    pub fn eval(&self, g: &GroupElement, dil: &Dilation) -> Result<f64> {
        Ok(self.constant * self.shape.eval(g, dil)?)
    }
}

/// π(y,t)ψ with (π(y,t)ψ)^(ξ) = |det A|^{t/2} e^{−2πi⟨y,ξ⟩} ψ̂((A*)ᵗξ).
pub fn orbit_vector(psi: &SpectralWindow, fs: &FrequencyScales, g: &GroupElement) -> Result<TestSignal> {
    let grid = fs.grid;
    if g.x.len() != grid.d {
        return Err(Error::DimensionMismatch { expected: grid.d, got: g.x.len() });
    }
    let amp = psi.dual().abs_det().powf(g.s / 2.0);
    let win = psi.sample_dilated(fs, g.s);
    let mut xi = vec![0.0; grid.d];
    let spectrum = win
        .iter()
        .enumerate()
        .map(|(k, w)| {
            grid.frequency(k, &mut xi);
            let phase: f64 = -std::f64::consts::TAU * xi.iter().zip(&g.x).map(|(a, b)| a * b).sum::<f64>();
            Complex64::from_polar(amp * w, phase)
        })
        .collect();
    TestSignal::from_spectrum(grid, spectrum)
}

/// max over γ and grid points g of (|W_ψφ_γ(g)| − Φ(γ⁻¹g))₊.
pub fn molecule_envelope_defect(
    family: &[TestSignal],
    gamma: &[GroupElement],
    psi: &SpectralWindow,
    fs: &FrequencyScales,
    scales: &ScaleGrid,
    envelope: &dyn Fn(&GroupElement) -> Result<f64>,
    dil: &Dilation,
) -> Result<f64> {
    if family.len() != gamma.len() {
        return Err(Error::DimensionMismatch { expected: gamma.len(), got: family.len() });
    }
    let period = 2.0 * fs.grid.half_extent;
    let mut worst: f64 = 0.0;
    for (phi, g) in family.iter().zip(gamma) {
        let w = wavelet_transform(phi, psi, fs, scales)?.field;
        let gi = invert(g, dil)?;
        let mut x = vec![0.0; fs.grid.d];
        for j in 0..scales.m {
            let s = scales.sample(j);
            for k in 0..fs.grid.len() {
                fs.grid.point(k, &mut x);
                let v = w.value(k, j).norm();
                if v <= worst {
                    continue;
                }
                let env = periodic_envelope(&gi, &x, s, period, envelope, dil)?;
                worst = worst.max(v - env);
            }
        }
    }
    Ok(worst)
}

/// Largest Φ(γ⁻¹(x + P·k, s)) over the neighbouring periodic images k ∈ {−1, 0, 1}^d.
///
/// The grid transform is periodic in x, so each grid point stands for all of its images.
fn periodic_envelope(
    gi: &GroupElement,
    x: &[f64],
    s: f64,
    period: f64,
    envelope: &dyn Fn(&GroupElement) -> Result<f64>,
    dil: &Dilation,
) -> Result<f64> {
    let d = x.len();
    let mut best: f64 = 0.0;
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let shifted: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let k = (c % 3) as f64 - 1.0;
                c /= 3;
                xi + period * k
            })
            .collect();
        let h = crate::group::multiply(gi, &GroupElement::new(shifted, s), dil)?;
        best = best.max(envelope(&h)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayBounds {
    /// max |W| / (|det A|^{−|s|/2}(1+ρ_A(A^{−s⁺}x))^{−L}).
    pub spatial_constant: f64,
    /// max over s ≥ 0 of max_x|W| / (|det A|^{−s/2}‖A^{−s}‖_∞^N).
    pub scale_constant: f64,
    /// Largest normalized moment ∫x^a f dx, |a| < N.
    pub max_moment: f64,
    pub moments_vanish: bool,
    /// Fit of ln max_x|W(·,s)| against s ≥ 0.
    pub scale_fit: DecayFit,
    /// The fitted slope is worse than −N·ln λ₋.
    pub flagged: bool,
}

/// Moment tolerance for the vanishing-moment precondition.
const MOMENT_TOL: f64 = 1e-6;

/// max over |a| < N of |∫x^a f| / ∫|x^a||f|.
fn max_moment(f: &TestSignal, n: u32) -> f64 {
    let grid = f.grid;
    let d = grid.d;
    let mut worst: f64 = 0.0;
    let mut x = vec![0.0; d];
    let mut exps = vec![0u32; d];
    for order in 0..n {
        // every multi-index a with |a| = order
        let total = (order as usize + 1).pow(d as u32);
        for idx in 0..total {
            let mut rem = idx;
            for e in exps.iter_mut() {
                *e = (rem % (order as usize + 1)) as u32;
                rem /= order as usize + 1;
            }
            if exps.iter().sum::<u32>() != order {
                continue;
            }
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for (k, v) in f.samples.iter().enumerate() {
                grid.point(k, &mut x);
                let mono: f64 = x.iter().zip(&exps).map(|(a, e)| a.powi(*e as i32)).product();
                num += v * mono;
                den += v.norm() * mono.abs();
            }
            if den > 0.0 {
                worst = worst.max(num.norm() / den);
            }
        }
    }
    worst
}

/// Checks the two decay bounds of W_ψf on the grid: spatial decay with
/// exponent L and scale decay with N vanishing moments.
#[allow(clippy::too_many_arguments)]
pub fn wavelet_decay_bounds_check(
    f: &TestSignal,
    psi: &SpectralWindow,
    fs: &FrequencyScales,
    scales: &ScaleGrid,
    l: f64,
    n: u32,
    lambda_minus: f64,
    dil: &Dilation,
) -> Result<DecayBounds> {
    let w = wavelet_transform(f, psi, fs, scales)?.field;
    let det = dil.abs_det();
    let grid = f.grid;
    let peak = w.max_abs();
    let mut spatial_constant: f64 = 0.0;
    let mut scale_constant: f64 = 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut x = vec![0.0; grid.d];
    for j in 0..scales.m {
        let s = scales.sample(j);
        let mut slice_max: f64 = 0.0;
        for k in 0..grid.len() {
            let v = w.value(k, j).norm();
            if v == 0.0 {
                continue;
            }
            slice_max = slice_max.max(v);
            grid.point(k, &mut x);
            let bound = det.powf(-s.abs() / 2.0) * (1.0 + rho_shifted(dil, &x, s.max(0.0))?).powf(-l);
            spatial_constant = spatial_constant.max(v / bound);
        }
        if s >= 0.0 {
            let inv: DMatrix<f64> = dil.matrix().power(-s)?;
            let row_sum = (0..grid.d).map(|r| (0..grid.d).map(|c| inv[(r, c)].abs()).sum::<f64>()).fold(0.0, f64::max);
            scale_constant = scale_constant.max(slice_max / (det.powf(-s / 2.0) * row_sum.powi(n as i32)));
            if slice_max > 1e-12 * peak {
                xs.push(s);
                ys.push(slice_max.ln());
            }
        }
    }
    let scale_fit = regression(&xs, &ys);
    let max_moment = max_moment(f, n);
    Ok(DecayBounds {
        spatial_constant,
        scale_constant,
        max_moment,
        moments_vanish: max_moment < MOMENT_TOL,
        scale_fit,
        flagged: xs.len() >= 2 && scale_fit.slope > -(n as f64) * lambda_minus.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::ExpansiveMatrix;
    use crate::grid::SpatialGrid;
    use crate::norms::random_sequence;
    use crate::signal::SignalDescriptor;
    use crate::spectra::{build_admissible, ScaleProfile};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> Dilation {
        Dilation::new(ExpansiveMatrix::diagonal(v).unwrap()).unwrap()
    }

    fn matrices() -> Vec<Dilation> {
        vec![diag(&[2.0]), diag(&[2.0, 4.0]), Dilation::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap()]
    }

    fn g(x: &[f64], s: f64) -> GroupElement {
        GroupElement::new(x.to_vec(), s)
    }

    #[test]
    fn envelope_examples() {
        let dil = diag(&[3.0]);
        let env = Envelope::new((2.0, 3.0), 1.5).unwrap();
        assert_eq!(env.eval(&g(&[0.0], 0.0), &dil).unwrap(), 1.0);
        let flat = Envelope::new((2.0, 3.0), 0.0).unwrap();
        assert_eq!(flat.eval(&g(&[5.0], 1.5), &dil).unwrap(), 2f64.powf(1.5));
        assert_eq!(flat.eval(&g(&[5.0], -2.0), &dil).unwrap(), 1.0 / 9.0);
        let one = Envelope::new((1.0, 1.0), 1.0).unwrap();
        let x = [2.0];
        assert_eq!(dil.quasi_norm(&x), 3.0);
        assert!((one.eval(&g(&x, 0.0), &dil).unwrap() - 0.25).abs() < 1e-15);
        assert!(Envelope::new((0.0, 1.0), 1.0).is_err());
        assert!(Envelope::new((1.0, 1.0), f64::NAN).is_err());
    }

    #[test]
    fn eta_matches_its_alternative_form() {
        for dil in matrices() {
            let d = dil.dim();
            let env = Envelope::new((1.0, 1.0), 2.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for _ in 0..400 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-20.0..20.0)).collect();
                let s = rng.random_range(-4.0..4.0);
                let r = env.eta(&x, s, &dil).unwrap() / env.eta_alternative(&x, s, &dil).unwrap();
                lo = lo.min(r);
                hi = hi.max(r);
            }
            assert!(lo >= 1.0 - 1e-12 && hi <= dil.abs_det().powf(2.0 * 2.0), "{lo} {hi}");
        }
    }

    #[test]
    fn weight_v_examples() {
        for dil in matrices() {
            let d = dil.dim();
            let sampler = VSampler::new(&dil).unwrap();
            let e = g(&vec![0.0; d], 0.0);
            assert_eq!(weight_v_closed(&e, &dil).unwrap(), 2.0);
            assert!(weight_v_brute(&e, &sampler, &dil).unwrap().value >= 1.0);
            let far = weight_v_closed(&g(&vec![0.0; d], 40.0), &dil).unwrap();
            assert!(far - 1.0 < 1e-12);
        }
    }

    #[test]
    fn weight_v_is_comparable_and_submultiplicative() {
        for dil in matrices() {
            let d = dil.dim();
            let sampler = VSampler::new(&dil).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let pts: Vec<GroupElement> =
                (0..60).map(|_| g(&(0..d).map(|_| rng.random_range(-8.0..8.0)).collect::<Vec<_>>(), rng.random_range(-3.0..3.0))).collect();
            let vals: Vec<f64> = pts.iter().map(|p| weight_v_brute(p, &sampler, &dil).unwrap().value).collect();
            for (p, v) in pts.iter().zip(&vals) {
                let r = v / weight_v_closed(p, &dil).unwrap();
                assert!(r > 0.1 && r < 10.0, "{p:?} {r}");
            }
            for i in 0..30 {
                let gh = crate::group::multiply(&pts[i], &pts[i + 30], &dil).unwrap();
                let v = weight_v_brute(&gh, &sampler, &dil).unwrap().value;
                assert!(v <= 1.05 * vals[i] * vals[i + 30]);
            }
        }
    }

    #[test]
    fn control_weight_examples() {
        let pr = TLParams::new(2.0, 2.0, 0.0, 1.0).unwrap();
        let w = control_weight(&pr, 4.0).unwrap();
        assert_eq!(w.r, 1.0);
        assert_eq!(w.sigma, (4.0, 1.0));
        assert!(w.upper_branch);
        assert_eq!(w.kappa, (8.0, 0.5));
        let pr = TLParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let w = control_weight(&pr, 3.0).unwrap();
        assert_eq!(w.sigma, (3.0, 1.0));
        let dil = diag(&[2.0, 4.0]);
        let w = control_weight(&pr, dil.abs_det()).unwrap();
        assert_eq!(w.eval(&GroupElement::identity(2), &dil).unwrap(), 2.0);
        assert!(control_weight(&pr, 1.0).is_err());
    }

    /// Exponents from the growth of Ξ_{σ,0} and Ξ_{κ,−β} at x = 0.
    fn oracle(p: f64, q: f64, alpha: f64, beta: f64) -> ((f64, f64), (f64, f64)) {
        let r = p.min(q).min(1.0);
        let gamma = alpha + 1.0 / p - 1.0 / q;
        let delta = alpha - 1.0 / q;
        let set = [0.0, 1.0 / r, gamma, -gamma, 1.0 / r + gamma, 1.0 / r - gamma];
        let hi = set.iter().cloned().fold(f64::MIN, f64::max);
        let lo = set.iter().cloned().fold(f64::MAX, f64::min);
        let k1 = (delta + 1.0 / r + beta).max(-delta);
        let k2 = (delta + 1.0 / r).min(-delta - beta);
        ((hi, lo), (k1, k2))
    }

    #[test]
    fn control_weight_matches_the_oracle() {
        let det = 2.0f64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = rng.random_range(0.5..4.0);
            let q = rng.random_range(0.5..4.0);
            let alpha = rng.random_range(-2.0..2.0);
            let beta = rng.random_range(0.5..3.0);
            let w = control_weight(&TLParams::new(p, q, alpha, beta).unwrap(), det).unwrap();
            let ((s1, s2), (k1, k2)) = oracle(p, q, alpha, beta);
            for (got, want) in [(w.sigma.0, s1), (w.sigma.1, s2), (w.kappa.0, k1), (w.kappa.1, k2)] {
                assert!((got.log2() - want).abs() < 1e-12, "{got} vs 2^{want}");
            }
        }
    }

    #[test]
    fn control_weight_symmetry_and_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for dil in matrices() {
            let d = dil.dim();
            for pr in [TLParams::new(2.0, 2.0, 0.0, 1.1).unwrap(), TLParams::new(0.7, 3.0, -1.2, 2.0).unwrap()] {
                let w = control_weight(&pr, dil.abs_det()).unwrap();
                for _ in 0..100 {
                    let p = g(&(0..d).map(|_| rng.random_range(-10.0..10.0)).collect::<Vec<_>>(), rng.random_range(-4.0..4.0));
                    assert!(w.symmetry_residual(&p, &dil).unwrap() < 1e-9);
                    assert!(w.eval(&p, &dil).unwrap() >= 1.0);
                }
            }
        }
    }

    fn small_field(dil: &Dilation) -> GroupField {
        let grid = SpatialGrid::new(1, 32, 4.0).unwrap();
        let sg = ScaleGrid::new(16, -2.0, 2.0).unwrap();
        let _ = dil;
        GroupField::from_fn(grid, sg, |x, s| Complex64::new((-(x[0] - 0.3).powi(2) - 2.0 * s * s).exp(), 0.0))
    }

    #[test]
    fn wiener_amalgam_basics() {
        let dil = diag(&[2.0]);
        let f = small_field(&dil);
        let zero = GroupField::zeros(f.spatial, f.scales);
        let q = QBox::default();
        assert_eq!(wiener_amalgam_norm(&zero, &q, 1.0, None, &dil).unwrap(), 0.0);
        let w = control_weight(&TLParams::new(2.0, 2.0, 0.0, 1.1).unwrap(), 2.0).unwrap();
        let wf = |x: &[f64], s: f64| w.eval(&GroupElement::new(x.to_vec(), s), &dil).unwrap();
        for r in [0.5, 1.0, 2.0] {
            let plain = mixed_lpq_norm(&f, Some(&wf), r, r, &dil).unwrap();
            let small = wiener_amalgam_norm(&f, &QBox { half_width: 0.5, samples: 2, symmetric: false }, r, Some(&wf), &dil).unwrap();
            let big = wiener_amalgam_norm(&f, &QBox { half_width: 1.0, samples: 4, symmetric: false }, r, Some(&wf), &dil).unwrap();
            assert!(plain <= small && small <= big, "{plain} {small} {big}");
        }
    }

    #[test]
    fn involution_is_an_involution_at_the_identity_scale() {
        let dil = diag(&[2.0]);
        let f = small_field(&dil);
        let back = involution(&involution(&f, &dil).unwrap(), &dil).unwrap();
        let j = f.scales.m / 2;
        let k = f.spatial.len() / 2;
        assert!((back.value(k, j) - f.value(k, j)).norm() < 0.05);
    }

    #[test]
    fn integrability_examples() {
        let det = 2.0;
        let fin = envelope_integrability(&Envelope::new((0.5, 4.0 * det), 2.0).unwrap(), 1.0, det).unwrap();
        assert!(fin.finite && fin.scale.converged && fin.shells.converged);
        let exact = fin.value.unwrap();
        let partial = fin.scale.partials.last().unwrap().1 * fin.shells.partials.last().unwrap().1;
        assert!((exact / partial - 1.0).abs() < 1e-4, "{exact} {partial}");
        let edge = envelope_integrability(&Envelope::new((1.0, 4.0 * det), 2.0).unwrap(), 1.0, det).unwrap();
        assert!(!edge.finite && !edge.scale.converged);
        let p = &edge.scale.partials;
        assert!(p[7].1 / p[6].1 > 1.9);
        let log = envelope_integrability(&Envelope::new((0.5, 4.0 * det), 1.0).unwrap(), 1.0, det).unwrap();
        assert!(!log.finite && !log.shells.converged);
        let s = &log.shells.partials;
        let steps: Vec<f64> = s.windows(2).map(|w| w[1].1 - w[0].1).collect();
        assert!(steps.windows(2).all(|w| w[1] > 1.5 * w[0]));
        assert!(envelope_integrability(&fin_env(), 0.0, det).is_err());
    }

    fn fin_env() -> Envelope {
        Envelope::new((0.5, 8.0), 2.0).unwrap()
    }

    #[test]
    fn integrability_predicate_agrees_with_certificates() {
        for det in [2.0f64, 8.0] {
            for r in [0.5, 1.0, 2.0] {
                for s1 in [0.5, 1.0, 2.0] {
                    for l in [1.0 / r + 1.0, 1.0 / r, 1.0 / r - 0.5] {
                        let env = Envelope::new((s1, 2.0 * det.powf(1.0 / r)), l).unwrap();
                        let rep = envelope_integrability(&env, r, det).unwrap();
                        assert_eq!(rep.finite, rep.scale.converged && rep.shells.converged, "{det} {r} {s1} {l}");
                    }
                }
                let low = Envelope::new((0.5, det.powf(1.0 / r)), 3.0 / r).unwrap();
                let rep = envelope_integrability(&low, r, det).unwrap();
                assert!(!rep.finite && !rep.scale.converged);
            }
        }
    }

    #[test]
    fn envelope_maximal_constant_is_location_independent() {
        let dil = diag(&[2.0]);
        let q = QBox::default();
        let env = Envelope::new((0.5, 4.0), 2.0).unwrap();
        let near: Vec<GroupElement> = (0..20).map(|i| g(&[i as f64 * 0.5 - 5.0], 0.3 * i as f64 - 3.0)).collect();
        let far: Vec<GroupElement> = (0..20).map(|i| g(&[i as f64 * 50.0 - 500.0], 0.9 * i as f64 - 9.0)).collect();
        let a = envelope_maximal_constant(&env, &q, &near, &dil).unwrap();
        let b = envelope_maximal_constant(&env, &q, &far, &dil).unwrap();
        assert!(a >= 1.0 && b >= 1.0);
        assert!(a.max(b) / a.min(b) < 1.1 * 4.0, "{a} {b}");
        assert_eq!(envelope_maximal_constant(&env, &QBox::identity(), &near, &dil).unwrap(), 1.0);
    }

    fn check(n: u32, l: f64, delta: f64) -> MoleculeCheck {
        let pr = TLParams::new(2.0, 2.0, 0.0, 1.0).unwrap();
        molecule_param_check(&pr, l, n, delta, 1.9, 2.0).unwrap()
    }

    #[test]
    fn molecule_examples() {
        let pass = check(3, 5.0, 0.5);
        assert!(pass.pass);
        assert_eq!(pass.threshold, 2.0);
        assert!((pass.lambda_power - 1.9f64.powf(1.5)).abs() < 1e-12);
        assert!((pass.decay_margin - 0.5).abs() < 1e-12);
        let low = check(1, 5.0, 0.5);
        assert!(!low.pass && low.lambda_margin < 0.0);
        let edge = check(3, 5.0, 0.999);
        assert!(!edge.pass && edge.decay_margin < 0.0);
        let pr = TLParams::new(2.0, 2.0, 0.0, 1.0).unwrap();
        assert!(molecule_param_check(&pr, 5.0, 3, 1.0, 1.9, 2.0).is_err());
        assert!(molecule_param_check(&pr, 5.0, 3, 0.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn molecule_check_is_monotone() {
        for n in 1..=10u32 {
            for li in 1..=10 {
                let l = 1.0 + li as f64;
                let c = check(n, l, 0.4);
                if c.pass {
                    assert!(check(n + 1, l, 0.4).pass && check(n, l + 1.0, 0.4).pass);
                }
            }
        }
    }

    #[test]
    fn lambda_sensitivity_covers_the_interval() {
        let dil = diag(&[2.0]);
        let pr = TLParams::new(2.0, 2.0, 0.0, 1.0).unwrap();
        let rep = lambda_sensitivity(&pr, 5.0, 3, 0.5, &dil, 9).unwrap();
        assert_eq!(rep.len(), 9);
        assert!(rep.iter().all(|(lam, _)| *lam > 1.0 && *lam < 2.0));
        assert!(!rep[0].1.pass && rep[8].1.pass);
    }

    #[test]
    fn orbit_system_defects() {
        let dil = diag(&[2.0]);
        let grid = SpatialGrid::new(1, 128, 16.0).unwrap();
        let fs = FrequencyScales::new(grid, &dil.adjoint().unwrap()).unwrap();
        let psi = build_admissible(&dil, ScaleProfile::default_annulus()).unwrap();
        let sg = ScaleGrid::new(24, -3.0, 3.0).unwrap();
        let w = wavelet_transform(&orbit_vector(&psi, &fs, &GroupElement::identity(1)).unwrap(), &psi, &fs, &sg).unwrap().field;
        let shape = Envelope::new((0.5f64.sqrt(), 2f64.sqrt()), 2.0).unwrap();
        let fit = ScaledEnvelope::fit(&w, shape, 1.05, &dil).unwrap();
        let gamma = vec![g(&[0.0], 0.0), g(&[2.0], 1.0), g(&[-1.0], -1.0)];
        let family: Vec<TestSignal> = gamma.iter().map(|p| orbit_vector(&psi, &fs, p).unwrap()).collect();
        let env = |h: &GroupElement| fit.eval(h, &dil);
        assert_eq!(molecule_envelope_defect(&family, &gamma, &psi, &fs, &sg, &env, &dil).unwrap(), 0.0);
        let half = |h: &GroupElement| fit.eval(h, &dil).map(|v| 0.5 * v);
        assert!(molecule_envelope_defect(&family, &gamma, &psi, &fs, &sg, &half, &dil).unwrap() > 0.0);
        assert_eq!(molecule_envelope_defect(&[], &[], &psi, &fs, &sg, &env, &dil).unwrap(), 0.0);
    }

    #[test]
    fn decay_bounds_flag_missing_moments() {
        let dil = diag(&[2.0]);
        let grid = SpatialGrid::new(1, 256, 32.0).unwrap();
        let fs = FrequencyScales::new(grid, &dil.adjoint().unwrap()).unwrap();
        let psi = build_admissible(&dil, ScaleProfile::for_spatial_decay(3.0)).unwrap();
        let sg = ScaleGrid::new(32, -3.0, 5.0).unwrap();
        let window = orbit_vector(&psi, &fs, &GroupElement::identity(1)).unwrap();
        let good = wavelet_decay_bounds_check(&window, &psi, &fs, &sg, 3.0, 1, 1.9, &dil).unwrap();
        assert!(good.moments_vanish && !good.flagged, "{good:?}");
        assert!(good.spatial_constant.is_finite() && good.scale_constant.is_finite());
        let bump = TestSignal::new(grid, SignalDescriptor::Gaussian { center: vec![0.0], width: 1.0 }, None).unwrap();
        let bad = wavelet_decay_bounds_check(&bump, &psi, &fs, &sg, 3.0, 1, 1.9, &dil).unwrap();
        assert!(!bad.moments_vanish && bad.flagged, "{bad:?}");
    }

    #[test]
    fn random_sequences_are_seeded() {
        assert_eq!(random_sequence(1, 2, 5, (-1, 1), 3), random_sequence(1, 2, 5, (-1, 1), 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn envelopes_are_positive_and_bounded_by_theta(
            x in -50.0f64..50.0, s in -6.0f64..6.0, s1 in 0.1f64..4.0, s2 in 0.1f64..4.0, l in 0.0f64..4.0,
        ) {
            let dil = diag(&[3.0]);
            let env = Envelope::new((s1, s2), l).unwrap();
            let v = env.eval(&g(&[x], s), &dil).unwrap();
            prop_assert!(v > 0.0 && v <= env.theta(s) * (1.0 + 1e-12));
        }
    }
}
