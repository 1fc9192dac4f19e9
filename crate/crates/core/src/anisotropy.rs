//! Expansive dilations: spectral bounds, continuous powers, the ellipsoid Ω_A,
//! the step quasi-norm ρ_A and the smooth scale coordinate.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, eigenvalues, expm, flatten, matvec, principal_log, quad_form};
use crate::sampling::{direction_dims, unit_direction, Halton};

const SINGULAR_DET: f64 = 1e-12;
const POWER_CACHE: i32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpansiveCheck {
    pub expansive: bool,
    pub min_modulus: f64,
    pub max_modulus: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

pub fn check_expansive(a: &DMatrix<f64>) -> Result<ExpansiveCheck> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::Parse("dilation must be a non-empty square matrix".into()));
    }
    let det = a.determinant();
    if !det.is_finite() || det.abs() <= SINGULAR_DET {
        return Err(Error::SingularMatrix(det.abs()));
    }
    let moduli: Vec<f64> = eigenvalues(a).iter().map(|z| z.norm()).collect();
    let min_modulus = moduli.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_modulus = moduli.iter().cloned().fold(0.0, f64::max);
    Ok(ExpansiveCheck {
        expansive: min_modulus > 1.0,
        min_modulus,
        max_modulus,
        lambda_minus: ((min_modulus + 1.0) / 2.0).max(1.0 + f64::EPSILON),
        lambda_plus: max_modulus * 1.01,
    })
}

#[derive(Debug, Clone)]
pub struct ExpansiveMatrix {
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    log: Option<DMatrix<f64>>,
    det: f64,
    min_modulus: f64,
    max_modulus: f64,
    lambda_minus: f64,
    lambda_plus: f64,
}

impl ExpansiveMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let check = check_expansive(&a)?;
        if !check.expansive {
            return Err(Error::NotExpansive(check.min_modulus));
        }
        let a_inv = a.clone().try_inverse().ok_or(Error::SingularMatrix(0.0))?;
        let log = principal_log(&a);
        Ok(Self {
            det: a.determinant(),
            a,
            a_inv,
            log,
            min_modulus: check.min_modulus,
            max_modulus: check.max_modulus,
            lambda_minus: check.lambda_minus,
            lambda_plus: check.lambda_plus,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(linalg::matrix_from_rows(rows)?)
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let d = entries.len();
        Self::new(DMatrix::from_fn(d, d, |i, j| if i == j { entries[i] } else { 0.0 }))
    }

    /// Overrides λ₋ and λ₊; requires 1 < λ₋ < min|σ(A)| and λ₊ > max|σ(A)|.
    pub fn with_lambdas(mut self, lambda_minus: f64, lambda_plus: f64) -> Result<Self> {
        if !(lambda_minus > 1.0 && lambda_minus < self.min_modulus) {
            return Err(Error::InvalidParameter(format!(
                "lambda_minus must lie in (1, {}), got {lambda_minus}",
                self.min_modulus
            )));
        }
        if !(lambda_plus > self.max_modulus) {
            return Err(Error::InvalidParameter(format!(
                "lambda_plus must exceed {}, got {lambda_plus}",
                self.max_modulus
            )));
        }
        self.lambda_minus = lambda_minus;
        self.lambda_plus = lambda_plus;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.a_inv
    }
    pub fn log(&self) -> Option<&DMatrix<f64>> {
        self.log.as_ref()
    }
    pub fn det(&self) -> f64 {
        self.det
    }
    pub fn abs_det(&self) -> f64 {
        self.det.abs()
    }
    pub fn min_modulus(&self) -> f64 {
        self.min_modulus
    }
    pub fn max_modulus(&self) -> f64 {
        self.max_modulus
    }
    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }
    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }
    pub fn zeta_minus(&self) -> f64 {
        self.lambda_minus.ln() / self.abs_det().ln()
    }
    pub fn zeta_plus(&self) -> f64 {
        self.lambda_plus.ln() / self.abs_det().ln()
    }

    pub fn integer_power(&self, j: i32) -> DMatrix<f64> {
        let base = if j >= 0 { &self.a } else { &self.a_inv };
        let d = self.dim();
        let mut out = DMatrix::identity(d, d);
        for _ in 0..j.unsigned_abs() {
            out = &out * base;
        }
        out
    }

    /// A^s = exp(sB). Without a principal logarithm only integer s is served.
    pub fn power(&self, s: f64) -> Result<DMatrix<f64>> {
        match &self.log {
            Some(b) => Ok(expm(&(b * s))),
            None if s.fract() == 0.0 && s.abs() < i32::MAX as f64 => Ok(self.integer_power(s as i32)),
            None => Err(Error::LogarithmUnavailable),
        }
    }

    /// The transpose A*, sharing λ₋ and λ₊.
    pub fn adjoint(&self) -> Result<Self> {
        let mut t = Self::new(self.a.transpose())?;
        t.lambda_minus = self.lambda_minus;
        t.lambda_plus = self.lambda_plus;
        Ok(t)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnisotropicEllipsoid {
    #[serde(serialize_with = "ser_matrix")]
    pub p: DMatrix<f64>,
    pub c: f64,
    pub r: f64,
    pub terms: usize,
    /// |vol(Ω) − 1|, recomputed from c, P and the unit-ball volume.
    pub volume_defect: f64,
    /// Smallest eigenvalue of P^{-1/2}(BᵀP+PB)P^{-1/2}/2; positive values
    /// certify that t ↦ ‖A^{-t}x‖_P is strictly decreasing.
    pub scale_slope: Option<f64>,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    linalg::matrix_to_rows(m).serialize(s)
}

pub fn unit_ball_volume(d: usize) -> f64 {
    // ω_d = π^{d/2} / Γ(d/2 + 1) via the two-step recurrence ω_d = 2π/d · ω_{d-2}
    let mut w = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        w *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    w
}

pub fn build_ellipsoid(m: &ExpansiveMatrix) -> Result<AnisotropicEllipsoid> {
    let d = m.dim();
    let r0 = (1.0 + m.lambda_minus()) / 2.0;
    let mut p = DMatrix::<f64>::identity(d, d);
    let mut pw = DMatrix::<f64>::identity(d, d);
    let mut terms = 1;
    let mut converged = false;
    for j in 1..=10_000usize {
        pw = &pw * m.inverse();
        let term = pw.transpose() * &pw * r0.powi(2 * j as i32);
        p += &term;
        terms = j + 1;
        let tn = linalg::sym_eigenvalues(&term).max();
        if tn < 1e-13 * linalg::sym_eigenvalues(&p).max() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure { what: "ellipsoid series", iterations: 10_000 });
    }
    let det_p = p.determinant();
    p /= det_p.powf(1.0 / d as f64);
    let chol = p.clone().cholesky().ok_or(Error::ConvergenceFailure {
        what: "ellipsoid Cholesky factorization",
        iterations: 0,
    })?;
    let l_inv = chol.l().try_inverse().ok_or(Error::SingularMatrix(0.0))?;
    let contraction = &l_inv * m.inverse().transpose() * &p * m.inverse() * l_inv.transpose();
    let r = 1.0 / linalg::sym_eigenvalues(&contraction).max().sqrt();
    let omega = unit_ball_volume(d);
    let c = omega.powf(-1.0 / d as f64);
    let volume = c.powi(d as i32) * omega / p.determinant().sqrt();
    let scale_slope = m.log().map(|b| {
        let s = b.transpose() * &p + &p * b;
        linalg::sym_eigenvalues(&(&l_inv * s * l_inv.transpose())).min() / 2.0
    });
    Ok(AnisotropicEllipsoid { p, c, r, terms, volume_defect: (volume - 1.0).abs(), scale_slope })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StructuralConstants {
    pub c_triangle: f64,
    pub c_power: f64,
    pub c_homog: f64,
    pub samples: usize,
}

/// An expansive matrix together with its ellipsoid and cached flat kernels.
#[derive(Debug, Clone)]
pub struct Dilation {
    m: ExpansiveMatrix,
    e: AnisotropicEllipsoid,
    d: usize,
    p: Vec<f64>,
    b: Option<Vec<f64>>,
    pb: Option<Vec<f64>>,
    powers: Vec<Vec<f64>>,
    c2: f64,
    ln_det: f64,
    p_chol_inv_t: DMatrix<f64>,
}

impl Dilation {
    pub fn new(m: ExpansiveMatrix) -> Result<Self> {
        let e = build_ellipsoid(&m)?;
        let d = m.dim();
        let powers = (-POWER_CACHE..=POWER_CACHE)
            .map(|j| flatten(&m.integer_power(j)))
            .collect();
        let b = m.log().map(flatten);
        let pb = m.log().map(|b| flatten(&(&e.p * b)));
        let l = e.p.clone().cholesky().expect("ellipsoid form is positive definite").l();
        let p_chol_inv_t = l.try_inverse().expect("Cholesky factor is invertible").transpose();
        Ok(Self {
            d,
            p: flatten(&e.p),
            b,
            pb,
            powers,
            c2: e.c * e.c,
            ln_det: m.abs_det().ln(),
            p_chol_inv_t,
            m,
            e,
        })
    }

    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        Self::new(ExpansiveMatrix::new(a)?)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(ExpansiveMatrix::from_rows(rows)?)
    }

    /// The dilation built from A*, used for frequency-side scales.
    pub fn adjoint(&self) -> Result<Self> {
        Self::new(self.m.adjoint()?)
    }

    pub fn matrix(&self) -> &ExpansiveMatrix {
        &self.m
    }
    pub fn ellipsoid(&self) -> &AnisotropicEllipsoid {
        &self.e
    }
    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn abs_det(&self) -> f64 {
        self.m.abs_det()
    }
    pub fn ln_det(&self) -> f64 {
        self.ln_det
    }
    pub fn has_log(&self) -> bool {
        self.b.is_some()
    }

    pub fn p_norm(&self, x: &[f64]) -> f64 {
        quad_form(&self.p, self.d, x).max(0.0).sqrt()
    }

    fn p_norm2(&self, x: &[f64]) -> f64 {
        quad_form(&self.p, self.d, x)
    }

    /// out = Aʲ x for integer j.
    pub fn apply_power(&self, j: i32, x: &[f64], out: &mut [f64]) {
        if j.abs() <= POWER_CACHE {
            matvec(&self.powers[(j + POWER_CACHE) as usize], self.d, x, out);
            return;
        }
        let step = if j > 0 { POWER_CACHE } else { -POWER_CACHE };
        let mut cur = x.to_vec();
        let mut left = j;
        while left != 0 {
            let k = if left.abs() > POWER_CACHE { step } else { left };
            matvec(&self.powers[(k + POWER_CACHE) as usize], self.d, &cur, out);
            cur.copy_from_slice(out);
            left -= k;
        }
    }

    pub fn power_vec(&self, j: i32, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.apply_power(j, x, &mut out);
        out
    }

    /// A^s x for real s via exp(sB)x.
    pub fn continuous_power_vec(&self, s: f64, x: &[f64]) -> Result<Vec<f64>> {
        if s.fract() == 0.0 && s.abs() < 1e6 {
            return Ok(self.power_vec(s as i32, x));
        }
        let b = self.b.as_ref().ok_or(Error::LogarithmUnavailable)?;
        let whole = s.floor();
        let base = self.power_vec(whole as i32, x);
        let mut out = vec![0.0; self.d];
        linalg::expm_apply(b, self.d, s - whole, &base, &mut out);
        Ok(out)
    }

    /// The shell index j with ‖A⁻ʲx‖_P ≥ c > ‖A⁻⁽ʲ⁺¹⁾x‖_P, or `None` for x = 0.
    pub fn shell(&self, x: &[f64]) -> Option<i32> {
        let n2 = self.p_norm2(x);
        if !(n2 > 0.0) {
            return None;
        }
        let est = (self.d as f64 * 0.5 * (n2 / self.c2).ln() / self.ln_det).floor();
        let mut j = est.clamp(-1e6, 1e6) as i32;
        let mut y = vec![0.0; self.d];
        let mut z = vec![0.0; self.d];
        self.apply_power(-j, x, &mut y);
        for _ in 0..100_000 {
            if self.p_norm2(&y) < self.c2 {
                j -= 1;
                z.copy_from_slice(&y);
                self.apply_power(1, &z, &mut y);
                continue;
            }
            self.apply_power(-1, &y, &mut z);
            if self.p_norm2(&z) < self.c2 {
                return Some(j);
            }
            j += 1;
            y.copy_from_slice(&z);
        }
        unreachable!("shell walk is bounded by the expansion factor")
    }

    /// ρ_A(x) = |det A|ʲ for x in shell j, and 0 at the origin.
    pub fn quasi_norm(&self, x: &[f64]) -> f64 {
        match self.shell(x) {
            None => 0.0,
            Some(j) => self.abs_det().powi(j),
        }
    }

    /// ρ_A evaluated from a cached scale coordinate: ρ_A(A^s x) = |det A|^{⌊t(x)+s⌋}.
    pub fn quasi_norm_from_scale(&self, t: Option<f64>, s: f64) -> f64 {
        match t {
            None => 0.0,
            Some(t) => {
                let v = t + s;
                let r = v.round();
                let k = if (v - r).abs() < 1e-9 { r } else { v.floor() };
                self.abs_det().powf(k)
            }
        }
    }

    /// The real t with ‖A⁻ᵗx‖_P = c.
    pub fn scale(&self, x: &[f64]) -> Result<f64> {
        let b = self.b.as_ref().ok_or(Error::LogarithmUnavailable)?;
        let pb = self.pb.as_ref().expect("P·B cached with B");
        let j = self.shell(x).ok_or(Error::ZeroVector)?;
        let y = self.power_vec(-j, x);
        let d = self.d;
        let target = self.c2.ln() / 2.0;
        let mut yt = vec![0.0; d];
        let mut pby = vec![0.0; d];
        let eval = |theta: f64, yt: &mut Vec<f64>, pby: &mut Vec<f64>| {
            linalg::expm_apply(b, d, -theta, &y, yt);
            let n2 = quad_form(&self.p, d, yt);
            matvec(pb, d, yt, pby);
            let num: f64 = yt.iter().zip(pby.iter()).map(|(a, b)| a * b).sum();
            (n2.ln() / 2.0 - target, -num / n2)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut theta = 0.5;
        for _ in 0..200 {
            let (g, dg) = eval(theta, &mut yt, &mut pby);
            if g > 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            let newton = theta - g / dg;
            let next = if dg < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let step = (next - theta).abs();
            theta = next;
            if step < 1e-15 || hi - lo < 1e-15 {
                break;
            }
        }
        Ok(j as f64 + theta)
    }

    /// Per-axis half-widths of the ellipsoid A^τ Ω.
    pub fn ellipsoid_extent(&self, tau: f64) -> Result<Vec<f64>> {
        let at = self.m.power(tau)?;
        let p_inv = self.e.p.clone().try_inverse().ok_or(Error::SingularMatrix(0.0))?;
        let cov = &at * p_inv * at.transpose();
        Ok((0..self.d).map(|i| self.e.c * cov[(i, i)].max(0.0).sqrt()).collect())
    }

    /// A Euclidean vector mapped to the P-unit sphere (‖·‖_P = 1).
    pub fn p_unit(&self, u: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_row_slice(u);
        let w = &self.p_chol_inv_t * v;
        w.iter().cloned().collect()
    }

    /// Quasi-random point of the shell-0 annulus AΩ \ Ω.
    pub fn annulus_sample(&self, h: &mut Halton) -> Vec<f64> {
        let d = self.d;
        let outer = self.e.c * self.m.max_modulus().max(1.0) * 4.0;
        let ratio = (outer / self.e.c).powi(d as i32);
        loop {
            let u = h.next_point();
            let dir = self.p_unit(&unit_direction(&u[..direction_dims(d)], d));
            let rad = self.e.c * (1.0 + u[direction_dims(d)] * (ratio - 1.0)).powf(1.0 / d as f64);
            let x: Vec<f64> = dir.iter().map(|v| v * rad).collect();
            if self.shell(&x) == Some(0) {
                return x;
            }
        }
    }

    pub fn annulus_sampler(&self) -> Halton {
        Halton::new(direction_dims(self.d) + 1)
    }

    /// Empirical suprema of the triangle, continuous-power and homogeneity ratios.
    pub fn structural_constants(&self, samples: usize) -> StructuralConstants {
        let d = self.d;
        let det = self.abs_det();
        let mut hx = self.annulus_sampler();
        let mut hy = Halton::starting_at(direction_dims(d) + 1, 7919);
        let mut hs = Halton::new(1);
        let exponential = self.has_log();
        let mut c_triangle = 1.0f64;
        let mut c_power = 1.0f64;
        let mut c_homog = 1.0f64;
        let lm = self.m.lambda_minus();
        let lp = self.m.lambda_plus();
        let euclid = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for i in 0..samples {
            let x = self.annulus_sample(&mut hx);
            let y0 = self.annulus_sample(&mut hy);
            let y = self.power_vec((i % 3) as i32 - 1, &y0);
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let ratio = self.quasi_norm(&sum) / (self.quasi_norm(&x) + self.quasi_norm(&y));
            c_triangle = c_triangle.max(ratio);

            let u = hs.next_point()[0];
            let s = if exponential { -3.0 + 6.0 * u } else { (-3.0 + 7.0 * u).floor().min(3.0) };
            let Ok(ax) = self.continuous_power_vec(s, &x) else { continue };
            let nx = euclid(&x);
            let nax = euclid(&ax);
            let (low, high) = if s >= 0.0 { (lm.powf(s), lp.powf(s)) } else { (lp.powf(s), lm.powf(s)) };
            c_power = c_power.max(low * nx / nax).max(nax / (high * nx));
            let xs = self.power_vec((i % 5) as i32 - 2, &x);
            let Ok(axs) = self.continuous_power_vec(s, &xs) else { continue };
            let hom = self.quasi_norm(&axs) / (det.powf(s) * self.quasi_norm(&xs));
            c_homog = c_homog.max(hom).max(1.0 / hom);
        }
        StructuralConstants { c_triangle, c_power, c_homog, samples }
    }
}
