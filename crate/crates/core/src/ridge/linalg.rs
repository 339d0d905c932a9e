//! Dense symmetric positive-definite solves.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2};

const PANEL: usize = 64;
const UPDATE_BLOCK: usize = 256;
const GRAM_BLOCK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

/// Lower Cholesky factor in place; the strict upper triangle is zeroed.
pub fn cholesky_in_place(a: &mut Array2<f64>) -> Result<(), NotPositiveDefinite> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    if !a.is_standard_layout() {
        *a = a.as_standard_layout().into_owned();
    }

    for k0 in (0..n).step_by(PANEL) {
        let k1 = (k0 + PANEL).min(n);
        {
            let data = a.as_slice_mut().expect("standard layout");
            // diagonal block, left-looking within the panel
            for j in k0..k1 {
                let row_j = j * n;
                let dot: f64 = data[row_j + k0..row_j + j].iter().map(|v| v * v).sum();
                let d = data[row_j + j] - dot;
                if d.is_nan() || d <= 0.0 || d.is_infinite() {
                    return Err(NotPositiveDefinite { pivot: j });
                }
                let ljj = d.sqrt();
                data[row_j + j] = ljj;
                // everything below the diagonal in this panel column, including
                // the rows below the block (triangular solve against L11)
                for i in j + 1..n {
                    let row_i = i * n;
                    let mut acc = data[row_i + j];
                    for p in k0..j {
                        acc -= data[row_i + p] * data[row_j + p];
                    }
                    data[row_i + j] = acc / ljj;
                }
            }
        }
        if k1 == n {
            break;
        }
        let panel = a.slice(s![k1.., k0..k1]).to_owned();
        for c0 in (k1..n).step_by(UPDATE_BLOCK) {
            let c1 = (c0 + UPDATE_BLOCK).min(n);
            let lhs = panel.slice(s![c0 - k1.., ..]);
            let rhs = panel.slice(s![c0 - k1..c1 - k1, ..]);
            let mut target = a.slice_mut(s![c0.., c0..c1]);
            general_mat_mul(-1.0, &lhs, &rhs.t(), 1.0, &mut target);
        }
    }

    for i in 0..n {
        for j in i + 1..n {
            a[[i, j]] = 0.0;
        }
    }
    Ok(())
}

/// Solves `L L^T X = B` in place given the lower factor `L`.
pub fn cholesky_solve(l: &Array2<f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    assert_eq!(b.nrows(), n);
    let cols = b.ncols();
    let mut rows: Vec<Vec<f64>> = b.rows().into_iter().map(|r| r.to_vec()).collect();

    for i in 0..n {
        let (done, rest) = rows.split_at_mut(i);
        let target = &mut rest[0];
        for (p, src) in done.iter().enumerate() {
            let lip = l[[i, p]];
            if lip != 0.0 {
                for (t, s) in target.iter_mut().zip(src) {
                    *t -= lip * s;
                }
            }
        }
        let lii = l[[i, i]];
        target.iter_mut().for_each(|t| *t /= lii);
    }
    for i in (0..n).rev() {
        let lii = l[[i, i]];
        rows[i].iter_mut().for_each(|t| *t /= lii);
        let (head, tail) = rows.split_at_mut(i);
        let xi = &tail[0];
        for (p, target) in head.iter_mut().enumerate() {
            let lip = l[[i, p]];
            if lip != 0.0 {
                for (t, s) in target.iter_mut().zip(xi) {
                    *t -= lip * s;
                }
            }
        }
    }
    for (i, r) in rows.iter().enumerate() {
        for j in 0..cols {
            b[[i, j]] = r[j];
        }
    }
}

/// `Z Z^T`, computing the lower block triangle and mirroring it.
pub fn gram(z: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = z.nrows();
    let mut g = Array2::zeros((n, n));
    for i0 in (0..n).step_by(GRAM_BLOCK) {
        let i1 = (i0 + GRAM_BLOCK).min(n);
        let lhs = z.slice(s![i0..i1, ..]);
        let rhs = z.slice(s![..i1, ..]);
        let mut target = g.slice_mut(s![i0..i1, ..i1]);
        general_mat_mul(1.0, &lhs, &rhs.t(), 0.0, &mut target);
    }
    for i in 0..n {
        for j in i + 1..n {
            g[[i, j]] = g[[j, i]];
        }
    }
    g
}
