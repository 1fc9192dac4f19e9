use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anisowave::grid::ScaleGrid;
use anisowave::group::GroupField;
use anisowave::maximal::{hl_maximal, local_maximal, peetre_maximal, Boundary, HlConfig, PeetreOffsets, QBox, Side};
use anisowave::norms::{
    coorbit_norm, coverage_fraction, peetre_scales, seq_norm, shell_range, tl_norm_lp, tl_norm_peetre_cont, tl_norm_peetre_disc,
    SeqEntry, TLParams,
};
use num_complex::Complex64;
use anisowave::spectra::{build_admissible, build_calderon_pair};
use anisowave::transform::wavelet_transform;
use anisowave::{Error, Result};
use clap::{Args, ValueEnum};
use serde_json::json;

use crate::input::{self, WindowFile};
use crate::Outcome;

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Signal file: {grid, signal, band?}.
    #[arg(long)]
    signal: PathBuf,
    /// Window file from `wavelet build`.
    #[arg(long)]
    window: PathBuf,
    /// smin:smax:m.
    #[arg(long, allow_hyphen_values = true)]
    scales: String,
    /// GAF1 destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Writes the CSV of this scale slice to `--csv`.
    #[arg(long, requires = "csv")]
    slice: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MaximalKind {
    /// Hardy-Littlewood maximal function of each scale slice.
    Hl,
    /// Peetre maximal function of each scale slice.
    Peetre,
    /// Local maximal function over a neighborhood of the identity.
    Local,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SideArg {
    Left,
    Two,
}

#[derive(Debug, Args)]
pub struct MaximalArgs {
    kind: MaximalKind,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    matrix: String,
    #[arg(long, default_value_t = 1.5)]
    beta: f64,
    #[arg(long, value_enum, default_value_t = SideArg::Two)]
    side: SideArg,
    /// Half width N of the neighborhood [−N, N)ᵈ × [−N, N).
    #[arg(long, default_value_t = 1.0)]
    q_half_width: f64,
    /// Points per axis of the neighborhood.
    #[arg(long, default_value_t = 4)]
    q_samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormKind {
    /// Littlewood-Paley form over integer levels.
    Tl,
    /// Peetre form over continuous scales.
    PeetreCont,
    /// Peetre form over integer levels.
    PeetreDisc,
    /// Sequence norm of a coefficient file.
    Seq,
    /// Norm of the local maximal function of the wavelet transform.
    Coorbit,
}

#[derive(Debug, Args)]
pub struct NormArgs {
    kind: NormKind,
    #[arg(long)]
    signal: Option<PathBuf>,
    #[arg(long)]
    window: Option<PathBuf>,
    /// Coefficient file, a JSON list of {j, k, value}.
    #[arg(long)]
    seq: Option<PathBuf>,
    /// Dilation for `seq`; other kinds take it from the window file.
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long, default_value = "p=2,q=2,alpha=0,beta=1.1")]
    params: String,
    /// Integer levels lo:hi; derived from the spectrum when absent.
    #[arg(long, allow_hyphen_values = true)]
    levels: Option<String>,
    /// Scale nodes of the continuous forms.
    #[arg(long, default_value_t = 16)]
    peetre_m: usize,
}

fn read_field(path: &Path) -> Result<GroupField> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    GroupField::read_gaf(BufReader::new(file))
}

fn write_field(path: &Path, f: &GroupField) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_gaf(BufWriter::new(file))
}

pub fn transform(args: TransformArgs) -> Result<Outcome> {
    let wnd: WindowFile = input::read_json(&args.window)?;
    let dil = wnd.dilation()?;
    let psi = build_admissible(&dil, wnd.profile)?;
    let (f, fs) = input::load_signal(&args.signal, &dil)?;
    let scales = ScaleGrid::parse(&args.scales)?;
    let w = wavelet_transform(&f, &psi, &fs, &scales)?;
    if let Some(path) = &args.out {
        write_field(path, &w.field)?;
    }
    if let (Some(j), Some(path)) = (args.slice, &args.csv) {
        if j >= scales.m {
            return Err(Error::InvalidParameter(format!("slice {j} is outside 0..{}", scales.m)));
        }
        let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        w.field.write_slice_csv(j, BufWriter::new(file))?;
    }
    input::emit(&json!({
        "grid": f.grid,
        "scales": scales,
        "maxAbs": w.field.max_abs(),
        "isometryRatio": w.field.l2_norm(dil.abs_det()) / f.norm(),
        "warnings": w.warnings,
    }))?;
    Ok(Outcome::Pass)
}

pub fn maximal(args: MaximalArgs) -> Result<Outcome> {
    let dil = input::dilation(&args.matrix)?;
    let f = read_field(&args.input)?;
    if f.spatial.d != dil.dim() {
        return Err(Error::DimensionMismatch { expected: f.spatial.d, got: dil.dim() });
    }
    let out = match args.kind {
        MaximalKind::Hl => per_slice(&f, |_, abs| hl_maximal(abs, &f.spatial, &dil, &HlConfig::default()))?,
        MaximalKind::Peetre => {
            let offsets = PeetreOffsets::new(f.spatial, &dil, Boundary::Zero)?;
            // Peetre weights use the frequency-side scale, so slices enter with −s.
            per_slice(&f, |s, abs| peetre_maximal(abs, -s, args.beta, &offsets, &dil))?
        }
        MaximalKind::Local => {
            let q = QBox { half_width: args.q_half_width, samples: args.q_samples, symmetric: false };
            let side = match args.side {
                SideArg::Left => Side::Left,
                SideArg::Two => Side::Two,
            };
            local_maximal(&f, &q, side, &dil)?
        }
    };
    if let Some(path) = &args.out {
        write_field(path, &out)?;
    }
    input::emit(&json!({ "maxIn": f.max_abs(), "maxOut": out.max_abs(), "scales": f.scales, "grid": f.spatial }))?;
    Ok(Outcome::Pass)
}

fn per_slice(f: &GroupField, op: impl Fn(f64, &[f64]) -> Result<Vec<f64>>) -> Result<GroupField> {
    let mut values = Vec::with_capacity(f.values.len());
    for j in 0..f.scales.m {
        let abs: Vec<f64> = f.slice(j).iter().map(|v| v.norm()).collect();
        values.extend(op(f.scales.sample(j), &abs)?.into_iter().map(|v| Complex64::new(v, 0.0)));
    }
    GroupField::new(f.spatial, f.scales, values)
}

pub fn norm(args: NormArgs) -> Result<Outcome> {
    let params = TLParams::parse(&args.params)?;
    if args.kind == NormKind::Seq {
        let (Some(path), Some(matrix)) = (&args.seq, &args.matrix) else {
            return Err(Error::Config("norm seq needs --seq and --matrix".into()));
        };
        let dil = input::dilation(matrix)?;
        let c: Vec<SeqEntry> = input::read_json(path)?;
        let value = seq_norm(&c, &params, &dil)?;
        input::emit(&json!({ "value": value, "coverageFraction": null, "gridMeta": { "entries": c.len(), "d": dil.dim() } }))?;
        return Ok(Outcome::Pass);
    }
    let (Some(signal), Some(window)) = (&args.signal, &args.window) else {
        return Err(Error::Config("this norm needs --signal and --window".into()));
    };
    let wnd: WindowFile = input::read_json(window)?;
    let dil = wnd.dilation()?;
    let (f, fs) = input::load_signal(signal, &dil)?;
    let levels = args.levels.as_deref().map(input::levels).transpose()?;
    let offsets = PeetreOffsets::new(fs.grid, &dil, Boundary::Zero)?;
    let phi = build_calderon_pair(&dil, wnd.profile)?.analyzing;
    let covered = levels.or_else(|| shell_range(&f, &phi, &fs));
    let coverage = covered.map(|lv| coverage_fraction(&f, &phi, &fs, lv));
    let continuous = || peetre_scales(&f, &phi, &fs, args.peetre_m);
    let (value, scales) = match args.kind {
        NormKind::Tl => (tl_norm_lp(&f, &phi, &fs, &params, levels)?, None),
        NormKind::PeetreDisc => (tl_norm_peetre_disc(&f, &phi, &fs, &params, levels, &offsets, &dil)?, None),
        NormKind::PeetreCont => match continuous()? {
            None => (0.0, None),
            Some(sg) => (tl_norm_peetre_cont(&f, &phi, &fs, &params, &sg, &offsets, &dil)?, Some(sg)),
        },
        NormKind::Coorbit => {
            let psi = build_admissible(&dil, wnd.profile)?;
            match peetre_scales(&f, &psi, &fs, args.peetre_m)? {
                None => (0.0, None),
                Some(sg) => (coorbit_norm(&f, &psi, &fs, &params, &QBox::default(), &sg, &offsets, &dil)?, Some(sg)),
            }
        }
        NormKind::Seq => unreachable!("handled above"),
    };
    input::emit(&json!({
        "value": value,
        "coverageFraction": coverage,
        "gridMeta": { "grid": fs.grid, "levels": covered, "scales": scales },
    }))?;
    Ok(Outcome::Pass)
}
