//! Browser bindings: ρ_A shell maps, spatial window moduli and the molecule
//! vector conditions. The plain functions carry the logic; the
//! `wasm_bindgen` wrappers only translate errors.

use anisowave::coorbit::molecule_param_check;
use anisowave::grid::SpatialGrid;
use anisowave::linalg::parse_matrix;
use anisowave::norms::TLParams;
use anisowave::spectra::{build_admissible, synthesize, FrequencyScales, ScaleProfile};
use anisowave::Dilation;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Shell index reported for the origin, where ρ_A vanishes.
pub const ORIGIN_SHELL: i32 = i32::MIN;

fn dilation2(matrix: &str) -> Result<Dilation, String> {
    let dil = Dilation::from_matrix(parse_matrix(matrix).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if dil.dim() != 2 {
        return Err(format!("the demo draws the plane; got a {0}×{0} matrix", dil.dim()));
    }
    Ok(dil)
}

/// Shell indices of ρ_A on an n×n grid over [−X, X)², with the first coordinate outermost.
pub fn shells(matrix: &str, n: usize, extent: f64) -> Result<Vec<i32>, String> {
    let dil = dilation2(matrix)?;
    let grid = SpatialGrid::new(2, n, extent).map_err(|e| e.to_string())?;
    Ok((0..grid.len()).map(|k| dil.shell(&grid.point_vec(k)).unwrap_or(ORIGIN_SHELL)).collect())
}

/// |ψ| of the admissible window with a tight profile, on an n×n grid over [−X, X)².
pub fn window_moduli(matrix: &str, center: f64, halfwidth: f64, n: usize, extent: f64) -> Result<Vec<f64>, String> {
    let dil = dilation2(matrix)?;
    let psi = build_admissible(&dil, ScaleProfile::tight(center, halfwidth)).map_err(|e| e.to_string())?;
    let grid = SpatialGrid::new(2, n, extent).map_err(|e| e.to_string())?;
    let fs = FrequencyScales::new(grid, psi.dual()).map_err(|e| e.to_string())?;
    let syn = synthesize(&psi, &fs, &dil).map_err(|e| e.to_string())?;
    Ok(syn.samples.iter().map(|v| v.norm()).collect())
}

/// JSON verdict of the two molecule vector conditions, with λ₋ = 1 + 0.9(min|σ(A)| − 1).
pub fn molecule_report(matrix: &str, params: &str, l: f64, n: u32, delta: f64) -> Result<String, String> {
    let dil = Dilation::from_matrix(parse_matrix(matrix).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let params = TLParams::parse(params).map_err(|e| e.to_string())?;
    let lam = 1.0 + 0.9 * (dil.matrix().min_modulus() - 1.0);
    let check = molecule_param_check(&params, l, n, delta, lam, dil.abs_det()).map_err(|e| e.to_string())?;
    Ok(json!({ "lambdaMinus": lam, "absDet": dil.abs_det(), "check": check }).to_string())
}

#[wasm_bindgen(js_name = shellMap)]
pub fn shell_map(matrix: &str, n: usize, extent: f64) -> Result<Vec<i32>, JsError> {
    shells(matrix, n, extent).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = windowModuli)]
pub fn window_moduli_js(matrix: &str, center: f64, halfwidth: f64, n: usize, extent: f64) -> Result<Vec<f64>, JsError> {
    window_moduli(matrix, center, halfwidth, n, extent).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = moleculeCheck)]
pub fn molecule_check(matrix: &str, params: &str, l: f64, n: u32, delta: f64) -> Result<String, JsError> {
    molecule_report(matrix, params, l, n, delta).map_err(|e| JsError::new(&e))
}
