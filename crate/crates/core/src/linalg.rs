//! Small dense linear-algebra helpers: principal logarithm, matrix exponential
//! applied to vectors, and flat row-major kernels used in hot loops.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    a.complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect()
}

/// Principal matrix logarithm by real Schur reduction and inverse
/// scaling-and-squaring. `None` when an eigenvalue lies on the closed
/// negative real axis.
pub fn principal_log(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = a.nrows();
    for z in eigenvalues(a) {
        if z.re <= 0.0 && z.im.abs() <= 1e-12 * z.norm().max(1e-300) {
            return None;
        }
    }
    let schur = a.clone().schur();
    let (q, t) = schur.unpack();
    let ident = DMatrix::<f64>::identity(d, d);
    let mut y = t;
    let mut k = 0u32;
    while (&y - &ident).norm() > 0.25 {
        y = sqrtm_db(&y)?;
        k += 1;
        if k > 64 {
            return None;
        }
    }
    let x = &y - &ident;
    // log(I+X) = 2 atanh(Z), Z = X (2I + X)^{-1}
    let z = &x * (&ident * 2.0 + &x).try_inverse()?;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut acc = z.clone();
    for i in 1..40 {
        term = &term * &z2;
        let add = &term / (2 * i + 1) as f64;
        acc += &add;
        if add.norm() < 1e-18 * acc.norm().max(1e-300) {
            break;
        }
    }
    let log_t = acc * 2.0 * 2f64.powi(k as i32);
    Some(&q * log_t * q.transpose())
}

/// Denman–Beavers square root iteration.
fn sqrtm_db(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(d, d);
    for _ in 0..100 {
        let yi = y.clone().try_inverse()?;
        let zi = z.clone().try_inverse()?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.norm() {
            return Some(y);
        }
    }
    Some(y)
}

pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// Computes exp(theta * b) y for a flat row-major d×d matrix `b`, splitting the
/// step so that each Taylor series sees an operator of norm at most 1/2.
pub fn expm_apply(b: &[f64], d: usize, theta: f64, y: &[f64], out: &mut [f64]) {
    let norm: f64 = b.iter().map(|v| v.abs()).sum::<f64>() * theta.abs();
    let steps = (norm / 0.5).ceil().max(1.0) as usize;
    let h = theta / steps as f64;
    let mut cur = y.to_vec();
    let mut term = vec![0.0; d];
    let mut next = vec![0.0; d];
    for _ in 0..steps {
        term.copy_from_slice(&cur);
        let mut acc = cur.clone();
        for k in 1..40 {
            matvec(b, d, &term, &mut next);
            let f = h / k as f64;
            let mut mag = 0.0f64;
            for i in 0..d {
                term[i] = next[i] * f;
                acc[i] += term[i];
                mag = mag.max(term[i].abs());
            }
            let scale = acc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if mag <= 1e-18 * scale.max(1e-300) {
                break;
            }
        }
        cur = acc;
    }
    out.copy_from_slice(&cur);
}

#[inline]
pub fn matvec(m: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        let mut acc = 0.0;
        for j in 0..d {
            acc += row[j] * x[j];
        }
        out[i] = acc;
    }
}

/// xᵀ P x for a flat row-major symmetric P.
#[inline]
pub fn quad_form(p: &[f64], d: usize, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += p[i * d + j] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

pub fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * m.ncols());
    for i in 0..d {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues()
}

/// Parses `"2,0;0,4"` (rows separated by `;`) or a JSON row-major nested array.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let t = text.trim();
    let rows: Vec<Vec<f64>> = if t.starts_with('[') {
        serde_json::from_str(t).map_err(|e| Error::Parse(format!("matrix JSON: {e}")))?
    } else {
        t.split(';')
            .map(|row| {
                row.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Parse(format!("bad matrix entry '{}'", v.trim())))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?
    };
    matrix_from_rows(&rows)
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    for r in rows {
        if r.len() != d {
            return Err(Error::Parse(format!(
                "matrix must be square: row of length {} in a {d}-row matrix",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn log_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let b = principal_log(&a).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![2f64.ln(), 4f64.ln()]));
        assert!(close(&b, &want, 1e-13));
    }

    #[test]
    fn log_roundtrips_through_exp() {
        for rows in [
            vec![vec![2.0, 1.0], vec![0.0, 2.0]],
            vec![vec![1.0, -1.0], vec![1.0, 1.0]],
            vec![vec![0.0, 2.0], vec![-3.0, 0.5]],
            vec![vec![3.0, 0.2, 0.0], vec![0.1, 2.0, 0.3], vec![0.0, -0.4, 1.5]],
        ] {
            let a = matrix_from_rows(&rows).unwrap();
            let b = principal_log(&a).unwrap();
            assert!(close(&expm(&b), &a, 1e-11), "{a}");
        }
    }

    #[test]
    fn negative_real_eigenvalue_has_no_log() {
        let a = matrix_from_rows(&[vec![-2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert!(principal_log(&a).is_none());
    }

    #[test]
    fn expm_apply_matches_dense_exp() {
        let b = matrix_from_rows(&[vec![0.7, 0.5], vec![-0.2, 1.3]]).unwrap();
        let flat = flatten(&b);
        let y = [0.3, -1.1];
        let mut out = [0.0; 2];
        for theta in [-3.0, -0.4, 0.0, 0.9, 2.5] {
            expm_apply(&flat, 2, theta, &y, &mut out);
            let want = expm(&(&b * theta)) * DVector::from_row_slice(&y);
            assert!((out[0] - want[0]).abs() < 1e-12 * want.norm().max(1.0));
            assert!((out[1] - want[1]).abs() < 1e-12 * want.norm().max(1.0));
        }
    }

    #[test]
    fn parses_both_matrix_syntaxes() {
        let a = parse_matrix("2,0;0,4").unwrap();
        let b = parse_matrix("[[2,0],[0,4]]").unwrap();
        assert_eq!(a, b);
        assert!(parse_matrix("1,2;3").is_err());
        assert!(parse_matrix("1,x;3,4").is_err());
    }
}
