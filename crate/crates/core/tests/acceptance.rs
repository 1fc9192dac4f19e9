//! Acceptance battery: every criterion prints one PASS/FAIL line, and the
//! process exits nonzero if any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use anisowave::anisotropy::Dilation;
use anisowave::campaign::{run_campaign, CampaignReport, ExperimentConfig};
use anisowave::coorbit::*;
use anisowave::grid::{ScaleGrid, SpatialGrid};
use anisowave::group::{GroupElement, GroupField};
use anisowave::maximal::*;
use anisowave::norms::*;
use anisowave::signal::{battery, Band, TestSignal, BATTERY_SEED};
use anisowave::spectra::*;
use anisowave::transform::*;
use anisowave::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: pass flag and a one-line summary.
struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

/// The three test matrices with closed-form continuous powers of A*.
struct Case {
    rows: Vec<Vec<f64>>,
    adjoint_power: fn(f64, &[f64]) -> Vec<f64>,
}

fn cases() -> Vec<Case> {
    vec![
        Case { rows: vec![vec![2.0, 0.0], vec![0.0, 2.0]], adjoint_power: |s, x| x.iter().map(|v| 2f64.powf(s) * v).collect() },
        Case { rows: vec![vec![2.0, 0.0], vec![0.0, 4.0]], adjoint_power: |s, x| vec![2f64.powf(s) * x[0], 4f64.powf(s) * x[1]] },
        // (A*)^s = 2^s [[1, 0], [s/2, 1]] for A = [[2, 1], [0, 2]]
        Case { rows: vec![vec![2.0, 1.0], vec![0.0, 2.0]],
            adjoint_power: |s, x| {
                let c = 2f64.powf(s);
                vec![c * x[0], c * (0.5 * s * x[0] + x[1])]
            },
        },
    ]
}

fn dilation(rows: &[Vec<f64>]) -> Dilation {
    Dilation::from_rows(rows).expect("test matrices are expansive")
}

fn dyadic() -> Dilation {
    dilation(&[vec![2.0]])
}

/// A frequency with log-uniform radius in [1e-2, 1e2] and uniform direction.
fn random_frequency(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r = 10f64.powf(rng.random_range(-2.0..2.0));
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    vec![r * a.cos(), r * a.sin()]
}

/// Composite Simpson rule with an even number of intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// ∫|ψ̂((A*)^s ξ)|² ds from the closed-form powers: a coarse scan brackets the
/// support, then Simpson integrates across it.
fn orbit_integral(psi: &SpectralWindow, power: fn(f64, &[f64]) -> Vec<f64>, xi: &[f64]) -> Result<f64> {
    let f = |s: f64| psi.eval(&power(s, xi)).map(|v| v * v);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in -150..=150 {
        let s = i as f64 * 0.1;
        if f(s)? > 0.0 {
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    if lo > hi {
        return Ok(0.0);
    }
    Ok(simpson(|s| f(s).unwrap_or(f64::NAN), lo - 0.1, hi + 0.1, 1000))
}

fn admissibility() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut lib: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    for case in cases() {
        let dil = dilation(&case.rows);
        let psi = build_admissible(&dil, ScaleProfile::tight(0.5, 0.75))?;
        for _ in 0..1000 {
            let xi = random_frequency(&mut rng);
            lib = lib.max(admissibility_defect(&psi, &xi)?);
            oracle = oracle.max((orbit_integral(&psi, case.adjoint_power, &xi)? - 1.0).abs());
        }
    }
    verdict(lib < 1e-6 && oracle < 1e-6, format!("max defect {lib:.2e}, Simpson oracle {oracle:.2e} (3 matrices x 1000 frequencies)"))
}

fn calderon() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    for case in cases() {
        let dil = dilation(&case.rows);
        let dual = dil.adjoint()?;
        for profile in [ScaleProfile::tight(0.5, 0.75), ScaleProfile::default_annulus()] {
            let pair = build_calderon_pair(&dil, profile)?;
            let mut sampler = dual.annulus_sampler();
            for j in -3..=3 {
                for _ in 0..100 {
                    let u = dual.annulus_sample(&mut sampler);
                    let xi = (case.adjoint_power)(j as f64, &u);
                    worst = worst.max(calderon_defect(&pair, &xi)?);
                    let mut sum = 0.0;
                    for k in -60..=60 {
                        let eta = (case.adjoint_power)(k as f64, &xi);
                        sum += pair.analyzing.eval(&eta)? * pair.dual.eval(&eta)?;
                    }
                    oracle = oracle.max((sum - 1.0).abs());
                }
            }
        }
    }
    verdict(worst < 1e-6 && oracle < 1e-6, format!("sup defect {worst:.2e}, direct sum oracle {oracle:.2e} (7 annuli, 2 profiles)"))
}

/// d = 1, A = 2 setup on [-X, X) with n points and the default band.
struct Line {
    dil: Dilation,
    fs: FrequencyScales,
    signals: Vec<TestSignal>,
    band: Band,
}

fn line(n: usize, half_extent: f64) -> Result<Line> {
    let dil = dyadic();
    let dual = dil.adjoint()?;
    let fs = FrequencyScales::new(SpatialGrid::new(1, n, half_extent)?, &dual)?;
    let band = Band::new(0.0, 1.0);
    let signals = battery(&fs, &dual, band, BATTERY_SEED)?;
    Ok(Line { dil, fs, signals, band })
}

fn isometry() -> Result<Verdict> {
    let st = line(128, 8.0)?;
    let psi = build_admissible(&st.dil, ScaleProfile::tight(0.5, 0.75))?;
    let err = |m: usize| -> Result<(f64, f64, f64)> {
        let sg = covering_scales(&psi, st.band, m)?;
        let (mut lo, mut hi, mut e) = (f64::INFINITY, 0.0f64, 0.0f64);
        for f in &st.signals {
            let r = isometry_ratio(f, &psi, &st.fs, &sg)?.ratio;
            lo = lo.min(r);
            hi = hi.max(r);
            e = e.max((r - 1.0).abs());
        }
        Ok((lo, hi, e))
    };
    let (lo, hi, e1) = err(48)?;
    let (_, _, e2) = err(96)?;
    let halving = e1 / e2;
    let pass = lo >= 0.95 && hi <= 1.05 && (1.6..=2.4).contains(&halving);
    verdict(pass, format!("ratios in [{lo:.4}, {hi:.4}] at m=48; error {e1:.4} -> {e2:.4} at m=96, factor {halving:.3}"))
}

fn reproducing() -> Result<Verdict> {
    let st = line(64, 8.0)?;
    let psi = build_admissible(&st.dil, ScaleProfile::tight(0.5, 0.75))?;
    let defects = |m: usize| -> Result<Vec<f64>> {
        let sg = reproducing_scales(&psi, st.band, m)?;
        st.signals.iter().map(|f| Ok(reproducing_defect(f, &psi, &psi, &st.fs, &sg, &st.dil)?.defect)).collect()
    };
    let coarse = defects(48)?;
    let fine = defects(96)?;
    let worst = coarse.iter().cloned().fold(0.0, f64::max);
    let refined = fine.iter().cloned().fold(0.0, f64::max);
    let decreasing = coarse.iter().zip(&fine).all(|(a, b)| b < a);
    verdict(worst < 0.05 && decreasing, format!("max defect {worst:.4} at m=48, {refined:.4} at m=96; every signal decreases: {decreasing}"))
}

fn norm_equivalence() -> Result<Verdict> {
    let params = [(2.0, 2.0, 0.0, 1.1), (1.0, 2.0, 0.0, 1.1), (2.0, 2.0, 0.5, 1.1), (0.8, 2.0, 0.0, 1.6)];
    let mut spreads = vec![Vec::new(); params.len()];
    let mut lp_error: f64 = 0.0;
    for (n, m) in [(128, 16), (256, 32)] {
        let st = line(n, 8.0)?;
        let pair = build_calderon_pair(&st.dil, ScaleProfile::tight(0.5, 0.75))?;
        let off = PeetreOffsets::new(st.fs.grid, &st.dil, Boundary::Zero)?;
        for (i, &(p, q, a, b)) in params.iter().enumerate() {
            let pr = TLParams::new(p, q, a, b)?;
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for f in &st.signals {
                let l = tl_norm_lp(f, &pair.analyzing, &st.fs, &pr, None)?;
                let sg = peetre_scales(f, &pair.analyzing, &st.fs, m)?.expect("battery signals are nonzero");
                let c = tl_norm_peetre_cont(f, &pair.analyzing, &st.fs, &pr, &sg, &off, &st.dil)?;
                let d = tl_norm_peetre_disc(f, &pair.analyzing, &st.fs, &pr, None, &off, &st.dil)?;
                let values = [l, c, d];
                let top = values.iter().cloned().fold(0.0, f64::max);
                let bottom = values.iter().cloned().fold(f64::INFINITY, f64::min);
                lo = lo.min(bottom / top);
                hi = hi.max(top / bottom);
                if p == 2.0 && q == 2.0 && a == 0.0 {
                    lp_error = lp_error.max((l / f.norm() - 1.0).abs());
                }
            }
            spreads[i].push(hi / lo);
        }
    }
    let drifts: Vec<f64> = spreads.iter().map(|s| (s[1] / s[0] - 1.0).abs()).collect();
    let worst = drifts.iter().cloned().fold(0.0, f64::max);
    let finite = spreads.iter().flatten().all(|v| v.is_finite());
    let coarse: Vec<String> = spreads.iter().map(|s| format!("{:.3}", s[0])).collect();
    verdict(
        finite && worst < 0.1 && lp_error <= 0.02,
        format!("spreads [{}], max drift {:.2}%, LP vs L2 {:.2e}", coarse.join(", "), 100.0 * worst, lp_error),
    )
}

fn sequence_equivalence() -> Result<Verdict> {
    let dil = dyadic();
    let mut worst: f64 = 0.0;
    let mut summary = Vec::new();
    for pr in [TLParams::new(2.0, 2.0, 0.0, 1.1)?, TLParams::new(1.0, 1.0, 0.0, 2.1)?] {
        let mut bounds = Vec::new();
        for (n, per_unit) in [(128, 4), (256, 8)] {
            let off = PeetreOffsets::new(SpatialGrid::new(1, n, 16.0)?, &dil, Boundary::Zero)?;
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for i in 0..20 {
                let c = random_sequence(BATTERY_SEED + i, 1, 6, (-1, 1), 2);
                let r = seq_maximal_norm(&c, &pr, &off, &dil, per_unit)? / seq_norm(&c, &pr, &dil)?;
                lo = lo.min(r);
                hi = hi.max(r);
            }
            bounds.push((lo, hi));
        }
        let (a, b) = (bounds[0], bounds[1]);
        let ok = a.0 > 0.0 && a.1.is_finite();
        worst = worst.max((b.0 / a.0 - 1.0).abs()).max((b.1 / a.1 - 1.0).abs());
        if !ok {
            worst = f64::INFINITY;
        }
        summary.push(format!("[{:.3}, {:.3}]", a.0, a.1));
    }
    verdict(worst < 0.1, format!("ratio bounds {}, max drift {:.2}%", summary.join(" and "), 100.0 * worst))
}

fn maximal_dilation() -> Result<Verdict> {
    let dil = dilation(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
    let grid = SpatialGrid::new(2, 256, 2.0)?;
    let g = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
    let mut worst: f64 = 0.0;
    let mut each = Vec::new();
    for j in [-1, 0, 1, 2] {
        let e = dilation_commutation_defect(&g, j, &grid, &dil, &HlConfig::default())?;
        worst = worst.max(e);
        each.push(format!("{j}: {:.3}%", 100.0 * e));
    }
    verdict(worst < 0.02, format!("defects {}", each.join(", ")))
}

fn peetre() -> Result<Verdict> {
    let scales = ScaleGrid::new(6, -1.5, 1.5)?;
    let fit = |n: usize, beta: f64| -> Result<f64> {
        let st = line(n, 8.0)?;
        let psi = build_admissible(&st.dil, ScaleProfile::tight(0.5, 0.75))?;
        let off = PeetreOffsets::new(st.fs.grid, &st.dil, Boundary::Zero)?;
        let mut c: f64 = 0.0;
        for f in &st.signals {
            let w = wavelet_transform(f, &psi, &st.fs, &scales)?.field;
            for j in 0..scales.m {
                let slice: Vec<f64> = w.slice(j).iter().map(|v| v.norm()).collect();
                c = c.max(peetre_constant(&slice, -scales.sample(j), beta, &off, &st.dil, &HlConfig::default())?.constant);
            }
        }
        Ok(c)
    };
    let mut worst: f64 = 0.0;
    let mut summary = Vec::new();
    for beta in [1.1, 2.0] {
        let (a, b) = (fit(128, beta)?, fit(256, beta)?);
        worst = worst.max((b / a - 1.0).abs());
        summary.push(format!("beta {beta}: {a:.4} -> {b:.4}"));
    }
    verdict(worst < 0.1, format!("{}, max drift {:.2}%", summary.join("; "), 100.0 * worst))
}

fn translation() -> Result<Verdict> {
    let params = [
        TLParams::new(2.0, 2.0, 0.0, 1.1)?,
        TLParams::new(1.0, 3.0, 0.5, 2.0)?,
        TLParams::new(0.7, 2.0, -0.4, 1.5)?,
    ];
    // left: exact on the image grid, for A = 2 and A = 2I
    let mut left: f64 = 0.0;
    for d in [1usize, 2] {
        let rows: Vec<Vec<f64>> = (0..d).map(|r| (0..d).map(|c| if r == c { 2.0 } else { 0.0 }).collect()).collect();
        let dil = dilation(&rows);
        let grid = SpatialGrid::new(d, if d == 1 { 64 } else { 16 }, 4.0)?;
        let sg = ScaleGrid::new(12, -1.5, 1.5)?;
        let f = GroupField::from_fn(grid, sg, |x, s| {
            let r2: f64 = x.iter().enumerate().map(|(i, v)| (v - 0.5 * i as f64 - 0.25).powi(2)).sum();
            Complex64::new((-r2 - s * s).exp(), 0.2 * s)
        });
        for pr in &params {
            let base = PeetreOffsets::new(grid, &dil, Boundary::Periodic)?;
            let n0 = peetre_space_norm(&f, pr, &base, &dil)?;
            for (k, t) in [(1.0, 0.25), (3.0, -0.5), (-5.0, 1.0), (2.0, 0.0), (0.0, -1.25)] {
                let y = vec![k * grid.h() * 2f64.powf(t); d];
                let moved = f.translate_left_image(&GroupElement::new(y, t), &dil)?;
                let off = PeetreOffsets::new(moved.spatial, &dil, Boundary::Periodic)?;
                let ratio = peetre_space_norm(&moved, pr, &off, &dil)? / n0;
                let want = dil.abs_det().powf(t * (pr.alpha + 1.0 / pr.p - pr.inv_q()));
                left = left.max((ratio / want - 1.0).abs());
            }
        }
    }
    // right: ratio against |det A|^{-t(α-1/q)} v(y,t)^β with brute-force v
    let dil = dyadic();
    let sampler = VSampler::new(&dil)?;
    let grid = SpatialGrid::new(1, 64, 8.0)?;
    let sg = ScaleGrid::new(32, -4.0, 4.0)?;
    let f = GroupField::from_fn(grid, sg, |x, s| Complex64::new((-(x[0] - 0.3).powi(2) / 2.0 - s * s).exp(), 0.0));
    let off = PeetreOffsets::new(grid, &dil, Boundary::Zero)?;
    let (mut violations, mut checked, mut tightest) = (0usize, 0usize, 0.0f64);
    for pr in &params {
        let n0 = peetre_space_norm(&f, pr, &off, &dil)?;
        for y in [0.0, 0.5, -1.0, 2.0] {
            for t in [-1.0, -0.5, 0.0, 0.25, 1.0] {
                let g = GroupElement::new(vec![y], t);
                let moved = f.translate_right(&g, &dil)?.field;
                let ratio = peetre_space_norm(&moved, pr, &off, &dil)? / n0;
                let bound = dil.abs_det().powf(-t * (pr.alpha - pr.inv_q())) * weight_v_brute(&g, &sampler, &dil)?.value.powf(pr.beta);
                checked += 1;
                tightest = tightest.max(ratio / bound);
                if ratio > bound {
                    violations += 1;
                }
            }
        }
    }
    verdict(
        left < 1e-9 && violations == 0,
        format!("left max relative error {left:.1e}; right {violations}/{checked} violations, largest ratio/bound {tightest:.3}"),
    )
}

fn weight_v() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut summary = Vec::new();
    let mut pass = true;
    let mats = [vec![vec![2.0]], vec![vec![2.0, 0.0], vec![0.0, 4.0]], vec![vec![2.0, 1.0], vec![0.0, 2.0]]];
    for rows in &mats {
        let dil = dilation(rows);
        let d = dil.dim();
        let sampler = VSampler::new(&dil)?;
        let point = |rng: &mut ChaCha8Rng| GroupElement::new((0..d).map(|_| rng.random_range(-10.0..10.0)).collect(), rng.random_range(-4.0..4.0));
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..1000 {
            let g = point(&mut rng);
            let r = weight_v_brute(&g, &sampler, &dil)?.value / weight_v_closed(&g, &dil)?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let c = hi.max(1.0 / lo);
        let mut violations = 0;
        for _ in 0..1000 {
            let (g, h) = (point(&mut rng), point(&mut rng));
            let gh = anisowave::group::multiply(&g, &h, &dil)?;
            let v = |p: &GroupElement| weight_v_brute(p, &sampler, &dil).map(|e| e.value);
            if v(&gh)? > 1.05 * v(&g)? * v(&h)? {
                violations += 1;
            }
        }
        pass &= c.is_finite() && c <= 100.0 && violations == 0;
        summary.push(format!("d={d} C={c:.3} violations={violations}"));
    }
    verdict(pass, summary.join("; "))
}

/// σ and κ straight from the printed formulas, in the exponent of |det A|.
fn printed_exponents(p: f64, q: f64, alpha: f64, beta: f64) -> ((f64, f64), (f64, f64)) {
    let r = 1f64.min(p).min(q);
    let g = (alpha + 1.0 / p - 1.0 / q).abs();
    let sigma = (1.0 / r + g, -g);
    let kappa = if alpha >= -(1.0 / r + beta - 2.0 / q) / 2.0 {
        (1.0 / r + alpha + beta - 1.0 / q, -(alpha + beta - 1.0 / q))
    } else {
        (-(alpha - 1.0 / q), 1.0 / r + alpha - 1.0 / q)
    };
    (sigma, kappa)
}

fn control_weights() -> Result<Verdict> {
    // dyadic parameters keep every exponent exact, so the powers must agree bit for bit
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pick = |rng: &mut ChaCha8Rng, set: &[f64]| set[rng.random_range(0..set.len())];
    let mut mismatches = 0;
    for _ in 0..20 {
        let p = pick(&mut rng, &[0.5, 1.0, 2.0, 4.0]);
        let q = pick(&mut rng, &[0.5, 1.0, 2.0, 4.0]);
        let alpha = rng.random_range(-8..=8) as f64 / 4.0;
        let beta = rng.random_range(2..=12) as f64 / 4.0;
        for det in [2.0f64, 8.0] {
            let w = control_weight(&TLParams::new(p, q, alpha, beta)?, det)?;
            let ((s1, s2), (k1, k2)) = printed_exponents(p, q, alpha, beta);
            let want = [det.powf(s1), det.powf(s2), det.powf(k1), det.powf(k2)];
            if [w.sigma.0, w.sigma.1, w.kappa.0, w.kappa.1] != want {
                mismatches += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut residual: f64 = 0.0;
    for case in cases() {
        let dil = dilation(&case.rows);
        for pr in [TLParams::new(2.0, 2.0, 0.0, 1.1)?, TLParams::new(0.7, 3.0, -1.2, 2.0)?, TLParams::new(1.5, 0.6, 0.8, 1.0)?] {
            let w = control_weight(&pr, dil.abs_det())?;
            for _ in 0..200 {
                let g = GroupElement::new(vec![rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)], rng.random_range(-5.0..5.0));
                residual = residual.max(w.symmetry_residual(&g, &dil)?);
            }
        }
    }
    verdict(mismatches == 0 && residual < 1e-9, format!("{mismatches}/40 mismatches on 20 tuples; symmetry residual {residual:.1e}"))
}

fn integrability() -> Result<Verdict> {
    let (mut agree, mut total) = (0, 0);
    for det in [2.0f64, 8.0] {
        for r in [0.5, 1.0, 2.0] {
            let s2 = 2.0 * det.powf(1.0 / r);
            for s1 in [0.5, 1.0, 2.0] {
                for l in [1.0 / r + 1.0, 1.0 / r, 1.0 / r - 0.5] {
                    let rep = envelope_integrability(&Envelope::new((s1, s2), l)?, r, det)?;
                    total += 1;
                    if rep.finite == (rep.scale.converged && rep.shells.converged) {
                        agree += 1;
                    }
                }
            }
        }
    }
    verdict(agree == total, format!("{agree}/{total} agree (sigma1 x L grids at |det A| in {{2, 8}}, r in {{0.5, 1, 2}})"))
}

/// Points hugging the shell and scale boundaries: x = ±2^{j−1} just above a
/// power of two or halfway, s on the half-integers and just above them.
fn structured_points(k: i32) -> Vec<GroupElement> {
    let mut pts = Vec::new();
    for j in -6 * k..=6 * k {
        for dj in [1e-9, 0.5] {
            let r = 0.5 * 2f64.powf(j as f64 + dj);
            for sign in [-1.0, 1.0] {
                for i in -4 * k..=4 * k {
                    for ds in [0.0, 1e-9, 0.5] {
                        pts.push(GroupElement::new(vec![sign * r], i as f64 * 0.5 + ds));
                    }
                }
            }
        }
    }
    pts
}

fn envelope_maximal() -> Result<Verdict> {
    let dil = dyadic();
    let det = dil.abs_det();
    let q = QBox::default();
    let envelopes = [
        Envelope::new((0.5, 4.0), 2.0)?,
        Envelope::new((det, 1.0), 0.0)?,
        Envelope::new((det.powf(1.5), det.powf(-0.5)), -1.1)?,
        Envelope::new((0.25, 2.0 * det), 3.0)?,
    ];
    let windows: Vec<Vec<GroupElement>> = (1..=4).map(structured_points).collect();
    let mut worst: f64 = 0.0;
    let mut summary = Vec::new();
    for env in &envelopes {
        let cs: Vec<f64> = windows.iter().map(|pts| envelope_maximal_constant(env, &q, pts, &dil)).collect::<Result<_>>()?;
        let hi = cs.iter().cloned().fold(0.0, f64::max);
        let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi / lo - 1.0);
        summary.push(format!("{hi:.3}"));
    }
    verdict(worst < 0.1, format!("C = [{}], max spread across 4 windows {:.2}%", summary.join(", "), 100.0 * worst))
}

fn molecules() -> Result<Verdict> {
    let pr = TLParams::new(2.0, 2.0, 0.0, 1.0)?;
    let pass = molecule_param_check(&pr, 5.0, 3, 0.5, 1.9, 2.0)?;
    let low = molecule_param_check(&pr, 5.0, 1, 0.5, 1.9, 2.0)?;
    let edge = molecule_param_check(&pr, 5.0, 3, 0.999, 1.9, 2.0)?;
    let examples = pass.pass
        && pass.threshold == 2.0
        && (pass.lambda_power - 1.9f64.powf(1.5)).abs() < 1e-12
        && (pass.decay_margin - 0.5).abs() < 1e-12
        && !low.pass
        && low.lambda_margin < 0.0
        && !edge.pass
        && edge.decay_margin < 0.0;
    let mut breaks = 0;
    for pr in [pr, TLParams::new(1.0, 2.0, 0.5, 1.1)?, TLParams::new(0.7, 3.0, -0.4, 2.0)?] {
        for delta in [0.3, 0.5, 0.7] {
            let ok = |n: u32, l: f64| molecule_param_check(&pr, l, n, delta, 1.9, 2.0).map(|c| c.pass);
            for n in 1..=10u32 {
                for li in 1..=10 {
                    let l = 1.0 + li as f64;
                    if ok(n, l)? && !(ok(n + 1, l)? && ok(n, l + 1.0)?) {
                        breaks += 1;
                    }
                }
            }
        }
    }
    let defect = orbit_defect_line()?.max(orbit_defect_plane()?);
    verdict(examples && breaks == 0 && defect == 0.0, format!("examples {}; monotonicity breaks {breaks}; orbit-system defect {defect:.1e}", if examples { "match" } else { "differ" }))
}

/// Orbit system {π(γ)ψ} against its fitted envelope at d = 1.
fn orbit_defect_line() -> Result<f64> {
    let dil = dyadic();
    let fs = FrequencyScales::new(SpatialGrid::new(1, 128, 16.0)?, &dil.adjoint()?)?;
    let psi = build_admissible(&dil, ScaleProfile::default_annulus())?;
    let sg = ScaleGrid::new(24, -3.0, 3.0)?;
    let gamma = vec![GroupElement::new(vec![0.0], 0.0), GroupElement::new(vec![2.0], 1.0), GroupElement::new(vec![-1.0], -1.0), GroupElement::new(vec![0.75], 0.5)];
    orbit_defect(&dil, &fs, &psi, &sg, &gamma)
}

/// The same for A = diag(2, 4) on a 48² grid.
fn orbit_defect_plane() -> Result<f64> {
    let dil = dilation(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
    let fs = FrequencyScales::new(SpatialGrid::new(2, 48, 8.0)?, &dil.adjoint()?)?;
    let psi = build_admissible(&dil, ScaleProfile::tight(0.0, 0.75))?;
    let sg = covering_scales(&psi, Band::new(-0.5, 0.5), 48)?;
    let gamma = vec![GroupElement::identity(2), GroupElement::new(vec![1.0, 1.0], 0.5), GroupElement::new(vec![-0.5, -0.5], 1.0)];
    orbit_defect(&dil, &fs, &psi, &sg, &gamma)
}

fn orbit_defect(dil: &Dilation, fs: &FrequencyScales, psi: &SpectralWindow, sg: &ScaleGrid, gamma: &[GroupElement]) -> Result<f64> {
    let det = dil.abs_det();
    let d = dil.dim();
    let w = wavelet_transform(&orbit_vector(psi, fs, &GroupElement::identity(d))?, psi, fs, sg)?.field;
    let fit = ScaledEnvelope::fit(&w, Envelope::new((det.powf(-0.5), det.powf(0.5)), 2.0)?, 1.05, dil)?;
    let family: Vec<TestSignal> = gamma.iter().map(|g| orbit_vector(psi, fs, g)).collect::<Result<_>>()?;
    let env = |h: &GroupElement| fit.eval(h, dil);
    molecule_envelope_defect(&family, gamma, psi, fs, sg, &env, dil)
}

fn decay() -> Result<Verdict> {
    let dil = dyadic();
    let dual = dil.adjoint()?;
    let ln_lambda = dil.matrix().lambda_minus().ln();
    let fs = FrequencyScales::new(SpatialGrid::new(1, 512, 64.0)?, &dual)?;
    let sg = ScaleGrid::new(64, -6.0, 6.0)?;
    let mut pass = true;
    let mut summary = Vec::new();
    for (l, n) in [(3.0, 1u32), (4.0, 2)] {
        let psi = build_admissible(&dil, ScaleProfile::for_spatial_decay(l))?;
        let window = orbit_vector(&psi, &fs, &GroupElement::identity(1))?;
        let w = wavelet_transform(&window, &psi, &fs, &sg)?.field;
        let spatial = decay_fit(&w, DecayAxis::Spatial, &dil)?.slope;
        let scale = decay_fit(&w, DecayAxis::Scale, &dil)?.slope;
        let ok = spatial <= -0.9 * l && scale <= -0.9 * n as f64 * ln_lambda;
        pass &= ok;
        summary.push(format!("(L={l}, N={n}): spatial {spatial:.3} vs {:.3}, scale {scale:.3} vs {:.3}", -l, -(n as f64) * ln_lambda));
    }
    verdict(pass, summary.join("; "))
}

fn small_config() -> Result<ExperimentConfig> {
    ExperimentConfig::parse(
        r#"{
            "matrix": [[2]],
            "grid": { "d": 1, "n": 64, "halfExtent": 8, "m": 32 },
            "params": [{ "p": 2, "q": 2, "alpha": 0, "beta": 1.1 }, { "p": 1, "q": 2, "alpha": 0.5, "beta": 2 }],
            "seed": 4242
        }"#,
    )
}

fn render(r: &CampaignReport) -> String {
    let mut out = r.to_json();
    for s in &r.suites {
        out.push_str(&CampaignReport::suite_csv(s));
    }
    for p in &r.plots {
        out.push_str(&p.to_csv());
    }
    out
}

fn determinism() -> Result<Verdict> {
    let cfg = small_config()?;
    let first = render(&run_campaign(&cfg)?);
    let second = render(&run_campaign(&cfg)?);
    let one = anisowave::par::with_threads(1, || run_campaign(&cfg).map(|r| render(&r)))?;
    let two = anisowave::par::with_threads(2, || run_campaign(&cfg).map(|r| render(&r)))?;
    let same = first == second && first == one && first == two;
    verdict(same, format!("{} bytes; repeat {}, 1 thread {}, 2 threads {}", first.len(), first == second, first == one, first == two))
}

type Criterion = (&'static str, fn() -> Result<Verdict>);

fn main() -> ExitCode {
    let criteria: [Criterion; 16] = [
        ("admissibility", admissibility),
        ("calderon pair", calderon),
        ("isometry", isometry),
        ("reproducing formula", reproducing),
        ("norm equivalence", norm_equivalence),
        ("sequence equivalence", sequence_equivalence),
        ("maximal dilation commutation", maximal_dilation),
        ("peetre inequality", peetre),
        ("translation norms", translation),
        ("weight v", weight_v),
        ("control weight", control_weights),
        ("envelope integrability", integrability),
        ("envelope maximal stability", envelope_maximal),
        ("molecule checker", molecules),
        ("decay", decay),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let secs = start.elapsed().as_secs_f64();
        println!("{} {:>2} {name}: {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
