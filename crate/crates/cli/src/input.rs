use std::path::Path;

use anisowave::grid::SpatialGrid;
use anisowave::linalg::{matrix_to_rows, parse_matrix};
use anisowave::signal::{Band, SignalDescriptor, TestSignal};
use anisowave::spectra::{FrequencyScales, ScaleProfile};
use anisowave::{Dilation, Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A window file: the dilation and the radial-in-scale profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WindowFile {
    pub matrix: Vec<Vec<f64>>,
    pub profile: ScaleProfile,
}

impl WindowFile {
    pub fn dilation(&self) -> Result<Dilation> {
        Dilation::from_rows(&self.matrix)
    }
}

/// A signal file: grid, descriptor and an optional band filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SignalFile {
    pub grid: SpatialGrid,
    pub signal: SignalDescriptor,
    #[serde(default)]
    pub band: Option<Band>,
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn dilation(text: &str) -> Result<Dilation> {
    Dilation::from_matrix(parse_matrix(text)?)
}

pub fn matrix_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    Ok(matrix_to_rows(&parse_matrix(text)?))
}

/// Comma-separated reals.
pub fn vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}' in '{text}'"))))
        .collect()
}

/// `lo:hi` as an integer range.
pub fn levels(text: &str) -> Result<(i32, i32)> {
    let (a, b) = text.split_once(':').ok_or_else(|| Error::Parse(format!("levels '{text}' are not lo:hi")))?;
    let num = |s: &str| s.trim().parse::<i32>().map_err(|_| Error::Parse(format!("bad level '{s}'")));
    let (lo, hi) = (num(a)?, num(b)?);
    if lo > hi {
        return Err(Error::EmptyBallRange(lo, hi));
    }
    Ok((lo, hi))
}

/// The signal sampled on its grid, with the frequency scales of `dil`'s adjoint.
pub fn load_signal(path: &Path, dil: &Dilation) -> Result<(TestSignal, FrequencyScales)> {
    let file: SignalFile = read_json(path)?;
    let grid = SpatialGrid::new(file.grid.d, file.grid.n, file.grid.half_extent)?;
    if grid.d != dil.dim() {
        return Err(Error::DimensionMismatch { expected: dil.dim(), got: grid.d });
    }
    let fs = FrequencyScales::new(grid, &dil.adjoint()?)?;
    let band = file.band.map(|b| (b, &fs));
    let f = TestSignal::new(grid, file.signal, band)?;
    Ok((f, fs))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn emit<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}
