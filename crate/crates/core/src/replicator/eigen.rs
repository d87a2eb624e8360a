//! Eigenvalues of small dense real matrices via a real Schur decomposition.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;
const MAX_ITER: usize = 10_000;

/// All eigenvalues of a square matrix, sorted by descending real part and then
/// by imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!("{}x{} is not square", n, m.ncols())));
    }
    if n > MAX_DIM {
        return Err(Error::Shape(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, MAX_ITER)
        .ok_or(Error::NoConvergence(n))?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    sort_spectrum(&mut ev);
    Ok(ev)
}

pub(crate) fn sort_spectrum(ev: &mut [Complex<f64>]) {
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
}

/// Largest distance between two eigenvalue multisets under greedy
/// nearest-neighbour matching. `None` when the sizes differ.
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))?;
        used[k] = true;
        worst = worst.max(d);
    }
    Some(worst)
}
