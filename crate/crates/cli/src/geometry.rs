use std::path::PathBuf;

use anisowave::anisotropy::check_expansive;
use anisowave::grid::SpatialGrid;
use anisowave::linalg::parse_matrix;
use anisowave::spectra::{admissibility_defect, build_admissible, synthesize, FrequencyScales, ProfileKind, ScaleProfile};
use anisowave::{Dilation, Error, Result};
use clap::Subcommand;
use serde_json::json;

use crate::input::{self, WindowFile};
use crate::Outcome;

#[derive(Debug, Subcommand)]
pub enum MatrixOp {
    /// Eigenvalue moduli, ellipsoid and fitted quasi-norm constants.
    Check {
        /// Row-major matrix, `2,0;0,4` or `[[2,0],[0,4]]`.
        #[arg(long)]
        matrix: String,
        /// Samples for the constants; drift compares against twice as many.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum QuasinormOp {
    /// ρ_A, shell index and continuous scale at one point.
    Eval {
        #[arg(long)]
        matrix: String,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// CSV of ρ_A along the ray r·u for r = 2^e, e ∈ [from, to].
    Table {
        #[arg(long)]
        matrix: String,
        #[arg(long, allow_hyphen_values = true)]
        direction: String,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
        to: f64,
        /// Rows per unit of e.
        #[arg(long, default_value_t = 4)]
        per_unit: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum WaveletOp {
    /// Writes a window file for a dilation and a scale profile.
    Build {
        #[arg(long)]
        matrix: String,
        /// bump, plateau-bump or tight.
        #[arg(long, default_value = "tight")]
        kind: String,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        center: f64,
        #[arg(long, default_value_t = 0.75)]
        halfwidth: f64,
        #[arg(long, default_value_t = 0.0)]
        plateau: f64,
        #[arg(long, default_value_t = 1.0)]
        sharpness: f64,
        /// Destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Admissibility defect and spatial decay of a window file.
    Inspect {
        #[arg(long)]
        window: PathBuf,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 8.0)]
        half_extent: f64,
        /// Frequencies for the admissibility defect.
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
}

pub fn matrix(op: MatrixOp) -> Result<Outcome> {
    let MatrixOp::Check { matrix, samples } = op;
    let a = parse_matrix(&matrix)?;
    let check = check_expansive(&a)?;
    if !check.expansive {
        input::emit(&json!({ "det": a.determinant(), "check": check }))?;
        return Ok(Outcome::Fail);
    }
    let dil = Dilation::from_matrix(a.clone())?;
    let coarse = dil.structural_constants(samples);
    let fine = dil.structural_constants(2 * samples);
    let drift = |c: f64, f: f64| (f - c).abs() / f;
    let constants = [
        ("triangle", coarse.c_triangle, fine.c_triangle),
        ("power", coarse.c_power, fine.c_power),
        ("homogeneity", coarse.c_homog, fine.c_homog),
    ]
    .map(|(name, c, f)| json!({ "name": name, "constant": f, "samples": fine.samples, "drift": drift(c, f) }));
    input::emit(&json!({
        "det": a.determinant(),
        "check": check,
        "hasLog": dil.has_log(),
        "ellipsoid": dil.ellipsoid(),
        "constants": constants,
    }))?;
    Ok(Outcome::Pass)
}

pub fn quasinorm(op: QuasinormOp) -> Result<Outcome> {
    match op {
        QuasinormOp::Eval { matrix, x } => {
            let dil = input::dilation(&matrix)?;
            let x = point(&x, &dil)?;
            let scale = match dil.scale(&x) {
                Ok(t) => Some(t),
                Err(Error::LogarithmUnavailable | Error::ZeroVector) => None,
                Err(e) => return Err(e),
            };
            input::emit(&json!({ "x": x, "rho": dil.quasi_norm(&x), "shell": dil.shell(&x), "scale": scale }))?;
        }
        QuasinormOp::Table { matrix, direction, from, to, per_unit } => {
            let dil = input::dilation(&matrix)?;
            let u = point(&direction, &dil)?;
            if !(from <= to) || per_unit == 0 {
                return Err(Error::InvalidParameter(format!("need from ≤ to and per-unit ≥ 1 (from {from}, to {to})")));
            }
            println!("# rho_A along r*u, u = {u:?}\n# columns: log2 radius, radius, shell, rho");
            println!("log2_r,r,shell,rho");
            let rows = ((to - from) * per_unit as f64).round() as usize;
            for i in 0..=rows {
                let e = from + i as f64 / per_unit as f64;
                let r = e.exp2();
                let x: Vec<f64> = u.iter().map(|v| v * r).collect();
                let shell = dil.shell(&x).map_or("none".to_string(), |j| j.to_string());
                println!("{e},{r},{shell},{:e}", dil.quasi_norm(&x));
            }
        }
    }
    Ok(Outcome::Pass)
}

fn point(text: &str, dil: &Dilation) -> Result<Vec<f64>> {
    let x = input::vector(text)?;
    if x.len() != dil.dim() {
        return Err(Error::DimensionMismatch { expected: dil.dim(), got: x.len() });
    }
    Ok(x)
}

pub fn wavelet(op: WaveletOp) -> Result<Outcome> {
    match op {
        WaveletOp::Build { matrix, kind, center, halfwidth, plateau, sharpness, out } => {
            let kind: ProfileKind = serde_json::from_value(serde_json::Value::String(kind.clone()))
                .map_err(|_| Error::Parse(format!("unknown profile kind '{kind}'")))?;
            let profile = ScaleProfile { kind, center, halfwidth, plateau_halfwidth: plateau, sharpness };
            let file = WindowFile { matrix: input::matrix_rows(&matrix)?, profile };
            build_admissible(&file.dilation()?, profile)?;
            let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Io(e.to_string()))?;
            match out {
                Some(path) => input::write_file(&path, (text + "\n").as_bytes())?,
                None => println!("{text}"),
            }
        }
        WaveletOp::Inspect { window, n, half_extent, samples } => {
            let file: WindowFile = input::read_json(&window)?;
            let dil = file.dilation()?;
            let psi = build_admissible(&dil, file.profile)?;
            let dual = psi.dual();
            let mut h = dual.annulus_sampler();
            let mut defect = 0.0f64;
            for _ in 0..samples {
                defect = defect.max(admissibility_defect(&psi, &dual.annulus_sample(&mut h))?);
            }
            let grid = SpatialGrid::new(dil.dim(), n, half_extent)?;
            let fs = FrequencyScales::new(grid, dual)?;
            let syn = synthesize(&psi, &fs, &dil)?;
            input::emit(&json!({
                "profile": file.profile,
                "l2Norm": file.profile.l2_norm(),
                "minPeriodizedEnergy": file.profile.min_periodized_energy(),
                "admissibilityDefect": defect,
                "frequencies": samples,
                "grid": grid,
                "maxImag": syn.max_imag,
                "spatialDecay": syn.decay,
                "warnings": syn.warnings,
            }))?;
        }
    }
    Ok(Outcome::Pass)
}
