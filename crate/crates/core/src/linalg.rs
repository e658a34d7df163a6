//! Small dense helpers on top of nalgebra: norms, complex embeddings,
//! null spaces and the matrix exponential.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn cinf_norm(m: &CMat) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut k = 0;
    for b in blocks {
        out.view_mut((k, k), (b.nrows(), b.ncols())).copy_from(b);
        k += b.nrows();
    }
    out
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Singular values in ascending order together with the matching right
/// singular vectors (as columns).
pub fn csvd_ascending(m: &CMat) -> (Vec<f64>, CMat) {
    let ncols = m.ncols();
    // nalgebra needs at least as many rows as columns to return all of V.
    let padded;
    let src = if m.nrows() < ncols {
        padded = {
            let mut p = CMat::zeros(ncols, ncols);
            p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let svd = src.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let vals = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = CMat::zeros(ncols, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        let row = vt.row(i);
        for j in 0..ncols {
            v[(j, k)] = row[j].conj();
        }
    }
    (vals, v)
}

pub fn svd_ascending(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let ncols = m.ncols();
    let padded;
    let src = if m.nrows() < ncols {
        padded = {
            let mut p = DMatrix::zeros(ncols, ncols);
            p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let svd = src.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let vals = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(ncols, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        v.set_column(k, &vt.row(i).transpose());
    }
    (vals, v)
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(f64::total_cmp);
    s
}

pub fn csingular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Orthonormal basis (columns) of the span of the `k` right singular
/// vectors of `m` with the smallest singular values.
pub fn cnull_basis(m: &CMat, k: usize) -> (Vec<f64>, CMat) {
    let (vals, v) = csvd_ascending(m);
    (vals, v.columns(0, k).into_owned())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let hs = (h + h.adjoint()).map(|z| z * 0.5);
    let mut e: Vec<f64> = hs.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let hs = (h + h.adjoint()).map(|z| z * 0.5);
    let eig = hs.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(h.nrows(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_sym_eigenvalue(p: &DMatrix<f64>) -> f64 {
    symmetrize(p).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Modified Gram–Schmidt on the columns; drops columns that become
/// numerically dependent.
pub fn corthonormalize(m: &CMat) -> CMat {
    let mut cols: Vec<CVec> = Vec::new();
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let n = v.norm();
        if n > 1e-12 {
            cols.push(v / Complex64::new(n, 0.0));
        }
    }
    if cols.is_empty() {
        return CMat::zeros(m.nrows(), 0);
    }
    CMat::from_columns(&cols)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the [13/13] Padé
/// approximant (Higham 2005). 2×2 traceless inputs take a closed form.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 2 && (a[(0, 0)] + a[(1, 1)]).abs() <= 1e-14 * (1.0 + inf_norm(a)) {
        return expm_traceless_2x2(a);
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// exp(M) for tr M = 0, using M² = −det(M)·I.
fn expm_traceless_2x2(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let (ch, sh) = if d.abs() < 1e-8 {
        // Taylor in d: cos√d ≈ 1 − d/2 + d²/24, sin√d/√d ≈ 1 − d/6 + d²/120.
        (1.0 - d / 2.0 + d * d / 24.0, 1.0 - d / 6.0 + d * d / 120.0)
    } else if d > 0.0 {
        let w = d.sqrt();
        (w.cos(), w.sin() / w)
    } else {
        let w = (-d).sqrt();
        (w.cosh(), w.sinh() / w)
    };
    let mut out = m * sh;
    out[(0, 0)] += ch;
    out[(1, 1)] += ch;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: plain Taylor summation after scaling.
    fn taylor_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let s = 12;
        let a = a / 2f64.powi(s);
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &a / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn pade_matches_series() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[0.3, -1.2, 0.5, 2.0, 1.1, 0.0, -0.7, 0.4, -2.5, 0.9, 0.1, 1.3, 0.2, -0.6, 3.0, -0.4],
        );
        for scale in [0.01, 1.0, 4.0] {
            let m = &a * scale;
            let e = expm(&m);
            let t = taylor_exp(&m);
            assert!((&e - &t).norm() <= 1e-9 * t.norm(), "scale {scale}");
        }
    }

    #[test]
    fn closed_form_2x2() {
        for m in [
            DMatrix::from_row_slice(2, 2, &[0.0, -1.3, 1.3, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.4, 2.0, 1.0, -0.4]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1e-5, 0.0, 0.0]),
        ] {
            let e = expm(&m);
            let t = taylor_exp(&m);
            assert!((&e - &t).norm() <= 1e-12 * (1.0 + t.norm()));
        }
    }

    #[test]
    fn null_basis_of_rank_deficient() {
        let m = to_complex(&DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]));
        let (vals, b) = cnull_basis(&m, 1);
        assert!(vals[0] < 1e-14);
        assert!((b[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }
}
