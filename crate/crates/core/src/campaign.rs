//! Config-driven verification campaigns: suites of checks over one dilation
//! and one grid, a JSON summary, per-suite CSV tables and plot data.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Dilation;
use crate::coorbit::{
    control_weight, molecule_param_check, orbit_vector, wavelet_decay_bounds_check, weight_v_brute, weight_v_closed, Envelope,
    ScaledEnvelope, VSampler,
};
use crate::error::{Error, Result};
use crate::fit::spatial_envelope;
use crate::grid::{ScaleGrid, SpatialGrid};
use crate::group::{multiply, GroupElement};
use crate::maximal::{Boundary, PeetreOffsets};
use crate::norms::{
    peetre_scales, random_sequence, seq_maximal_norm, seq_norm, tl_norm_lp, tl_norm_peetre_cont, tl_norm_peetre_disc, TLParams,
};
use crate::sampling::Halton;
use crate::signal::{battery, Band, SignalDescriptor, TestSignal};
use crate::spectra::{admissibility_defect, build_admissible, build_calderon_pair, calderon_defect, FrequencyScales, ScaleProfile, SpectralWindow};
use crate::transform::{covering_scales, isometry_ratio, reproducing_defect, reproducing_scales, wavelet_transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Admissibility,
    Isometry,
    Reproducing,
    #[serde(alias = "norm-equivalence")]
    NormEquiv,
    #[serde(alias = "sequence-equivalence")]
    SeqEquiv,
    Weight,
    Molecule,
    Decay,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Admissibility,
        Suite::Isometry,
        Suite::Reproducing,
        Suite::NormEquiv,
        Suite::SeqEquiv,
        Suite::Weight,
        Suite::Molecule,
        Suite::Decay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Admissibility => "admissibility",
            Suite::Isometry => "isometry",
            Suite::Reproducing => "reproducing",
            Suite::NormEquiv => "norm-equiv",
            Suite::SeqEquiv => "seq-equiv",
            Suite::Weight => "weight",
            Suite::Molecule => "molecule",
            Suite::Decay => "decay",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(text.trim().to_string()))
            .map_err(|_| Error::Config(format!("unknown suite '{text}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub d: Option<usize>,
    pub n: usize,
    #[serde(alias = "X")]
    pub half_extent: f64,
    pub m: usize,
    #[serde(default)]
    pub s_min: Option<f64>,
    #[serde(default)]
    pub s_max: Option<f64>,
    /// Scale nodes of the continuous Peetre form.
    #[serde(default = "default_peetre_m")]
    pub peetre_m: usize,
}

fn default_peetre_m() -> usize {
    16
}

fn default_window() -> ScaleProfile {
    ScaleProfile::tight(0.5, 0.75)
}

fn default_band() -> Band {
    Band::new(0.0, 1.0)
}

fn default_seed() -> u64 {
    crate::signal::BATTERY_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Row-major A.
    pub matrix: Vec<Vec<f64>>,
    pub grid: GridSpec,
    #[serde(default = "default_window")]
    pub window: ScaleProfile,
    #[serde(default = "default_band")]
    pub band: Band,
    pub params: Vec<TLParams>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<Suite>>,
}

impl ExperimentConfig {
    /// Parses and validates; errors name the line, column or field at fault.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let dil = self.dilation()?;
        let d = dil.dim();
        if let Some(gd) = self.grid.d {
            if gd != d {
                return Err(Error::Config(format!("grid.d: {gd} does not match the {d}×{d} matrix")));
            }
        }
        self.spatial_grid().map_err(|e| Error::Config(format!("grid: {e}")))?;
        if self.grid.m < 2 || self.grid.peetre_m < 2 {
            return Err(Error::Config(format!(
                "grid.m, grid.peetreM: need at least 2 scale samples, got {} and {}",
                self.grid.m, self.grid.peetre_m
            )));
        }
        if self.grid.s_min.is_some() != self.grid.s_max.is_some() {
            return Err(Error::Config("grid: sMin and sMax must be given together".into()));
        }
        self.window.validate().map_err(|e| Error::Config(format!("window: {e}")))?;
        if !(self.band.lo < self.band.hi) {
            return Err(Error::Config(format!("band: lo {} must lie below hi {}", self.band.lo, self.band.hi)));
        }
        if self.params.is_empty() {
            return Err(Error::Config("params: list is empty".into()));
        }
        for (i, p) in self.params.iter().enumerate() {
            p.validate().and_then(|_| p.check_equivalence()).map_err(|e| Error::Config(format!("params[{i}]: {e}")))?;
        }
        if let Some(s) = &self.suites {
            if s.is_empty() {
                return Err(Error::Config("suites: list is empty".into()));
            }
        }
        Ok(())
    }

    pub fn dilation(&self) -> Result<Dilation> {
        Dilation::from_rows(&self.matrix).map_err(|e| Error::Config(format!("matrix: {e}")))
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.matrix.len(), self.grid.n, self.grid.half_extent)
    }

    pub fn selected(&self) -> Vec<Suite> {
        let mut out = self.suites.clone().unwrap_or_else(|| Suite::ALL.to_vec());
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtMost, bound, pass: value <= bound }
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtLeast, bound, pass: value >= bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteReport {
    pub suite: Suite,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Slice,
    Ratio,
    Decay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub kind: PlotKind,
    pub name: String,
    pub comment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    /// `# comment`, a header row, then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.comment.lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CampaignReport {
    pub config: ExperimentConfig,
    pub pass: bool,
    pub suites: Vec<SuiteReport>,
    #[serde(skip)]
    pub plots: Vec<PlotData>,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn suite_csv(report: &SuiteReport) -> String {
        let mut out = String::from("check,value,relation,bound,pass\n");
        for c in &report.checks {
            let rel = if c.relation == Relation::AtMost { "<=" } else { ">=" };
            let _ = writeln!(out, "{},{:e},{rel},{:e},{}", c.name, c.value, c.bound, c.pass);
        }
        if let Some(e) = &report.error {
            let _ = writeln!(out, "error: {},NaN,<=,NaN,false", e.replace(',', ";"));
        }
        out
    }

    /// summary.json, checks-<suite>.csv and plot-<name>.csv in `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.json"), self.to_json() + "\n")?;
        for s in &self.suites {
            std::fs::write(dir.join(format!("checks-{}.csv", s.suite.name())), Self::suite_csv(s))?;
        }
        for p in &self.plots {
            std::fs::write(dir.join(format!("plot-{}.csv", p.name)), p.to_csv())?;
        }
        Ok(())
    }
}

/// Shared state for the suites of one campaign.
struct Context {
    cfg: ExperimentConfig,
    dil: Dilation,
    fs: FrequencyScales,
    psi: SpectralWindow,
    signals: Vec<TestSignal>,
    scales: ScaleGrid,
    offsets: PeetreOffsets,
}

impl Context {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let dil = cfg.dilation()?;
        let grid = cfg.spatial_grid()?;
        let dual = dil.adjoint()?;
        let fs = FrequencyScales::new(grid, &dual)?;
        let psi = build_admissible(&dil, cfg.window)?;
        let signals = battery(&fs, &dual, cfg.band, cfg.seed)?;
        let scales = match (cfg.grid.s_min, cfg.grid.s_max) {
            (Some(a), Some(b)) => ScaleGrid::new(cfg.grid.m, a, b)?,
            _ => covering_scales(&psi, cfg.band, cfg.grid.m)?,
        };
        let offsets = PeetreOffsets::new(grid, &dil, Boundary::Zero)?;
        Ok(Self { cfg: cfg.clone(), dil, fs, psi, signals, scales, offsets })
    }

    fn lambda_minus(&self) -> f64 {
        1.0 + 0.9 * (self.dil.matrix().min_modulus() - 1.0)
    }
}

fn label(p: &TLParams) -> String {
    format!("(p={} q={} alpha={} beta={})", p.p, p.q, p.alpha, p.beta)
}

fn admissibility(cx: &Context) -> Result<Vec<Check>> {
    let d = cx.dil.dim();
    let pair = build_calderon_pair(&cx.dil, cx.cfg.window)?;
    let mut h = Halton::new(d);
    let (mut adm, mut cal) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let xi: Vec<f64> = h.next_point().into_iter().map(|u| 4.0 * u - 2.0).collect();
        if xi.iter().all(|&v| v == 0.0) {
            continue;
        }
        adm = adm.max(admissibility_defect(&cx.psi, &xi)?);
        cal = cal.max(calderon_defect(&pair, &xi)?);
    }
    Ok(vec![Check::at_most("orbit-integral defect", adm, 1e-6), Check::at_most("calderon defect", cal, 1e-6)])
}

fn isometry(cx: &Context) -> Result<Vec<Check>> {
    let (mut err, mut tail) = (0.0f64, 0.0f64);
    for f in &cx.signals {
        let r = isometry_ratio(f, &cx.psi, &cx.fs, &cx.scales)?;
        err = err.max((r.ratio - 1.0).abs());
        tail = tail.max(r.tail);
    }
    Ok(vec![Check::at_most("max |ratio - 1|", err, 0.05), Check::at_most("max truncation tail", tail, 1e-6)])
}

fn reproducing(cx: &Context) -> Result<Vec<Check>> {
    let tight = build_calderon_pair(&cx.dil, cx.cfg.window)?.analyzing;
    let sg = reproducing_scales(&tight, cx.cfg.band, cx.cfg.grid.m)?;
    let mut worst = 0.0f64;
    for f in &cx.signals {
        worst = worst.max(reproducing_defect(f, &tight, &tight, &cx.fs, &sg, &cx.dil)?.defect);
    }
    Ok(vec![Check::at_most("max relative defect", worst, 0.05)])
}

fn norm_equiv(cx: &Context, plots: &mut Vec<PlotData>) -> Result<Vec<Check>> {
    let phi = build_calderon_pair(&cx.dil, cx.cfg.window)?.analyzing;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (ip, pr) in cx.cfg.params.iter().enumerate() {
        let mut spread = 0.0f64;
        let mut l2 = 0.0f64;
        for (i, f) in cx.signals.iter().enumerate() {
            let lp = tl_norm_lp(f, &phi, &cx.fs, pr, None)?;
            let sg = peetre_scales(f, &phi, &cx.fs, cx.cfg.grid.peetre_m)?.ok_or(Error::ZeroVector)?;
            let cont = tl_norm_peetre_cont(f, &phi, &cx.fs, pr, &sg, &cx.offsets, &cx.dil)?;
            let disc = tl_norm_peetre_disc(f, &phi, &cx.fs, pr, None, &cx.offsets, &cx.dil)?;
            let hi = lp.max(cont).max(disc);
            let lo = lp.min(cont).min(disc);
            spread = spread.max(hi / lo);
            if pr.p == 2.0 && pr.q == 2.0 && pr.alpha == 0.0 {
                l2 = l2.max((lp / f.norm() - 1.0).abs());
            }
            rows.push(vec![ip as f64, i as f64, lp, cont, disc]);
        }
        checks.push(Check::at_most(format!("three-way spread {}", label(pr)), spread, 10.0));
        if pr.p == 2.0 && pr.q == 2.0 && pr.alpha == 0.0 {
            checks.push(Check::at_most(format!("|lp / l2 - 1| {}", label(pr)), l2, 0.02));
        }
    }
    plots.push(PlotData {
        kind: PlotKind::Ratio,
        name: "norm-equiv".into(),
        comment: "norm-equivalence forms per parameter set and battery signal\ncolumns: params index, signal index, LP form, continuous Peetre form, discrete Peetre form".into(),
        columns: ["params", "signal", "lp", "peetre_cont", "peetre_disc"].map(String::from).to_vec(),
        rows,
    });
    Ok(checks)
}

fn seq_equiv(cx: &Context) -> Result<Vec<Check>> {
    let d = cx.dil.dim();
    let mut checks = Vec::new();
    for pr in &cx.cfg.params {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..10 {
            let c = random_sequence(cx.cfg.seed + i, d, 6, (-1, 1), 2);
            let r = seq_maximal_norm(&c, pr, &cx.offsets, &cx.dil, 4)? / seq_norm(&c, pr, &cx.dil)?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        checks.push(Check::at_least(format!("min ratio {}", label(pr)), lo, 1.0));
        checks.push(Check::at_most(format!("max/min ratio {}", label(pr)), hi / lo, 10.0));
    }
    Ok(checks)
}

fn weight(cx: &Context) -> Result<Vec<Check>> {
    let d = cx.dil.dim();
    let sampler = VSampler::new(&cx.dil)?;
    let mut h = Halton::new(d + 1);
    let pts: Vec<GroupElement> = (0..200)
        .map(|_| {
            let u = h.next_point();
            GroupElement::new(u[..d].iter().map(|v| 16.0 * v - 8.0).collect(), 6.0 * u[d] - 3.0)
        })
        .collect();
    let vals = crate::par::map_slice(&pts, |g| weight_v_brute(g, &sampler, &cx.dil).map(|e| e.value));
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (g, v) in pts.iter().zip(&vals) {
        let r = v / weight_v_closed(g, &cx.dil)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let mut violations = 0usize;
    for i in 0..100 {
        let gh = multiply(&pts[i], &pts[i + 100], &cx.dil)?;
        if weight_v_brute(&gh, &sampler, &cx.dil)?.value > 1.05 * vals[i] * vals[i + 100] {
            violations += 1;
        }
    }
    let mut checks = vec![
        Check::at_most("fitted C of v brute/closed", (hi / lo).sqrt(), 100.0),
        Check::at_most("submultiplicativity violations", violations as f64, 0.0),
    ];
    for pr in &cx.cfg.params {
        let w = control_weight(pr, cx.dil.abs_det())?;
        let (mut res, mut low) = (0.0f64, f64::INFINITY);
        for g in &pts {
            res = res.max(w.symmetry_residual(g, &cx.dil)?);
            low = low.min(w.eval(g, &cx.dil)?);
        }
        checks.push(Check::at_most(format!("symmetry residual {}", label(pr)), res, 1e-9));
        checks.push(Check::at_least(format!("min control weight {}", label(pr)), low, 1.0));
    }
    Ok(checks)
}

fn molecule(cx: &Context) -> Result<Vec<Check>> {
    let det = cx.dil.abs_det();
    let lam = cx.lambda_minus();
    let mut checks = Vec::new();
    for pr in &cx.cfg.params {
        let mut breaks = 0usize;
        for n in 1..=10u32 {
            for li in 1..=10 {
                let l = 1.0 + li as f64;
                if molecule_param_check(pr, l, n, 0.5, lam, det)?.pass
                    && !(molecule_param_check(pr, l, n + 1, 0.5, lam, det)?.pass && molecule_param_check(pr, l + 1.0, n, 0.5, lam, det)?.pass)
                {
                    breaks += 1;
                }
            }
        }
        checks.push(Check::at_most(format!("monotonicity breaks {}", label(pr)), breaks as f64, 0.0));
    }
    let d = cx.dil.dim();
    let id = GroupElement::identity(d);
    let w = wavelet_transform(&orbit_vector(&cx.psi, &cx.fs, &id)?, &cx.psi, &cx.fs, &cx.scales)?.field;
    let shape = Envelope::new((det.powf(-0.5), det.powf(0.5)), 2.0)?;
    let fit = ScaledEnvelope::fit(&w, shape, 1.05, &cx.dil)?;
    let gamma = [id.clone(), GroupElement::new(vec![1.0; d], 0.5), GroupElement::new(vec![-0.5; d], 1.0)];
    let family: Vec<TestSignal> = gamma.iter().map(|g| orbit_vector(&cx.psi, &cx.fs, g)).collect::<Result<_>>()?;
    let env = |h: &GroupElement| fit.eval(h, &cx.dil);
    let defect = crate::coorbit::molecule_envelope_defect(&family, &gamma, &cx.psi, &cx.fs, &cx.scales, &env, &cx.dil)?;
    checks.push(Check::at_most("orbit-system envelope defect", defect / fit.constant, 0.0));
    Ok(checks)
}

fn decay(cx: &Context, plots: &mut Vec<PlotData>) -> Result<Vec<Check>> {
    let d = cx.dil.dim();
    let grid = cx.fs.grid;
    let lam = cx.lambda_minus();
    let window = orbit_vector(&cx.psi, &cx.fs, &GroupElement::identity(d))?;
    let good = wavelet_decay_bounds_check(&window, &cx.psi, &cx.fs, &cx.scales, 2.0, 1, lam, &cx.dil)?;
    let gauss = TestSignal::new(grid, SignalDescriptor::Gaussian { center: vec![0.0; d], width: 1.0 }, None)?;
    let bad = wavelet_decay_bounds_check(&gauss, &cx.psi, &cx.fs, &cx.scales, 2.0, 1, lam, &cx.dil)?;
    let mods = window.moduli();
    let pts = spatial_envelope(&mods, &grid, &cx.dil);
    plots.push(PlotData {
        kind: PlotKind::Decay,
        name: "decay".into(),
        comment: "spatial decay of the synthesized window\ncolumns: ln(1 + rho_A(x)) per shell, ln of the shell max-modulus envelope".into(),
        columns: vec!["log_radius".into(), "log_max_modulus".into()],
        rows: pts.into_iter().map(|(a, b)| vec![a, b]).collect(),
    });
    let w = wavelet_transform(&cx.signals[0], &cx.psi, &cx.fs, &cx.scales)?.field;
    let j = (0..cx.scales.m).min_by(|&a, &b| cx.scales.sample(a).abs().total_cmp(&cx.scales.sample(b).abs())).unwrap_or(0);
    plots.push(slice_plot(w.slice(j), &grid, cx.scales.sample(j)));
    Ok(vec![
        Check::at_most("window moment residual", good.max_moment, 1e-6),
        Check::at_most("window scale-decay flagged", good.flagged as u8 as f64, 0.0),
        Check::at_least("gaussian scale-decay flagged", bad.flagged as u8 as f64, 1.0),
        Check::at_most("spatial constant non-finite", (!good.spatial_constant.is_finite()) as u8 as f64, 0.0),
    ])
}

fn slice_plot(values: &[Complex64], grid: &SpatialGrid, s: f64) -> PlotData {
    let d = grid.d;
    let mut columns: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    columns.extend(["re", "im", "abs"].map(String::from));
    let rows = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut row = grid.point_vec(k);
            row.extend([v.re, v.im, v.norm()]);
            row
        })
        .collect();
    PlotData {
        kind: PlotKind::Slice,
        name: "slice".into(),
        comment: format!("wavelet transform of battery signal 0 at scale s = {s}\ncolumns: spatial coordinates, real part, imaginary part, modulus"),
        columns,
        rows,
    }
}

/// Runs the selected suites. Failures inside a suite are recorded in its
/// report; only an invalid config is an error.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let cx = Context::new(cfg)?;
    let mut plots = Vec::new();
    let mut suites = Vec::new();
    for suite in cfg.selected() {
        let res = match suite {
            Suite::Admissibility => admissibility(&cx),
            Suite::Isometry => isometry(&cx),
            Suite::Reproducing => reproducing(&cx),
            Suite::NormEquiv => norm_equiv(&cx, &mut plots),
            Suite::SeqEquiv => seq_equiv(&cx),
            Suite::Weight => weight(&cx),
            Suite::Molecule => molecule(&cx),
            Suite::Decay => decay(&cx, &mut plots),
        };
        suites.push(match res {
            Ok(checks) => SuiteReport { suite, pass: checks.iter().all(|c| c.pass), checks, error: None },
            Err(e) => SuiteReport { suite, pass: false, checks: Vec::new(), error: Some(e.to_string()) },
        });
    }
    Ok(CampaignReport { config: cfg.clone(), pass: suites.iter().all(|s| s.pass), suites, plots })
}
