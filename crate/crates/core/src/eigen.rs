//! Dense symmetric eigensolver backing every spectral computation in the crate.
//!
//! The algorithm is the classic EISPACK pair: Householder reduction to
//! tridiagonal form (tred2) followed by the implicit-shift QL iteration
//! (tql2), with optional accumulation of the orthogonal transformations.
//! Interval bases produce genuinely tridiagonal stiffness matrices and enter
//! directly at the QL stage; periodic bases carry wraparound corners and go
//! through the full reduction.
//!
//! Everything here is deterministic: fixed sweep order, no pivoting
//! randomness, an explicit iteration cap that surfaces as
//! [`Error::ConvergenceFailure`] instead of spinning.

use crate::error::Error;

/// Iteration cap per eigenvalue in the QL loop.
const MAX_QL_ITER: usize = 60;

/// Dense symmetric matrix, row-major full storage.
#[derive(Debug, Clone)]
pub struct SymMat {
    n: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Adds `v` to entry (i, j) and, when off-diagonal, to (j, i).
    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Largest symmetry defect `max |a_ij - a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.at(i, j) - self.at(j, i)).abs());
            }
        }
        worst
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }
}

/// Result of a symmetric eigensolve: ascending eigenvalues and, when
/// requested, the matching orthonormal eigenvectors (`vectors[k]` pairs with
/// `values[k]`).
pub struct EigenOutput {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<Vec<f64>>>,
}

/// Full eigensolve of a dense symmetric matrix.
pub fn solve_dense(a: &SymMat, want_vectors: bool) -> Result<EigenOutput, Error> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigenOutput {
            values: vec![],
            vectors: want_vectors.then(Vec::new),
        });
    }
    let mut v = a.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e, want_vectors);
    // tred2 runs on the transposed array, so the accumulated basis already
    // has one candidate eigenvector per contiguous row
    if !want_vectors {
        v = Vec::new();
    }
    let mut z = want_vectors.then_some(&mut v[..]);
    tql2(n, &mut d, &mut e, z.as_deref_mut())?;
    Ok(finish(n, d, v, want_vectors))
}

/// Eigensolve of a symmetric tridiagonal matrix given its diagonal and
/// subdiagonal (`off.len() == diag.len() - 1`).
pub fn solve_tridiagonal(
    diag: &[f64],
    off: &[f64],
    want_vectors: bool,
) -> Result<EigenOutput, Error> {
    let n = diag.len();
    assert_eq!(off.len(), n.saturating_sub(1), "subdiagonal length");
    let mut d = diag.to_vec();
    // tql2 reads e[i] as the coupling between i and i+1 after its own shift,
    // so feed the subdiagonal as e[1..] in EISPACK layout.
    let mut e = vec![0.0; n];
    e[1..].copy_from_slice(off);
    let mut w = vec![0.0; if want_vectors { n * n } else { 0 }];
    if want_vectors {
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
    }
    // tql2 expects e shifted down by one (e[i] couples d[i] and d[i+1]).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    if n > 0 {
        e[n - 1] = 0.0;
    }
    let mut z = want_vectors.then_some(&mut w[..]);
    tql2_inner(n, &mut d, &mut e, z.as_deref_mut())?;
    Ok(finish(n, d, w, want_vectors))
}

/// Sorts eigenpairs ascending with a deterministic tie-break and packages the
/// output. `w` holds candidate eigenvectors as contiguous rows when
/// `want_vectors`.
fn finish(n: usize, d: Vec<f64>, w: Vec<f64>, want_vectors: bool) -> EigenOutput {
    let mut order: Vec<usize> = (0..n).collect();
    if want_vectors {
        order.sort_by(|&a, &b| {
            d[a].partial_cmp(&d[b]).unwrap().then_with(|| {
                // exact ties: lexicographic on the eigenvector entries
                let (ra, rb) = (&w[a * n..(a + 1) * n], &w[b * n..(b + 1) * n]);
                for (x, y) in ra.iter().zip(rb.iter()) {
                    match x.partial_cmp(y).unwrap() {
                        std::cmp::Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                std::cmp::Ordering::Equal
            })
        });
    } else {
        order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    }
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let vectors = want_vectors.then(|| {
        order
            .iter()
            .map(|&k| w[k * n..(k + 1) * n].to_vec())
            .collect()
    });
    EigenOutput { values, vectors }
}

/// Householder reduction of the symmetric matrix in `v` (row-major, n x n) to
/// tridiagonal form. On return `d` holds the diagonal, `e[1..]` the
/// subdiagonal, and when `accumulate` is set `v` holds the orthogonal
/// transformation with one basis vector per contiguous row.
///
/// The classic formulation walks columns in its hot loops; since the input
/// is symmetric, the identical algorithm runs on the transposed array with
/// every index pair swapped, which turns those column walks into contiguous
/// row walks and leaves the accumulated basis in row-per-vector layout.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let idx = |i: usize, j: usize| j * n + i; // transposed access
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }

    for i in (1..n).rev() {
        // Scale to avoid under/overflow.
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i.wrapping_sub(1)];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            // Generate Householder vector.
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            // Apply similarity transformation to remaining columns.
            for j in 0..i {
                let f = d[j];
                v[idx(j, i)] = f;
                let mut g = e[j] + v[idx(j, j)] * f;
                let row_j = &v[j * n..j * n + i]; // v[idx(k, j)] for k in 0..i
                for k in (j + 1)..i {
                    g += row_j[k] * d[k];
                    e[k] += row_j[k] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let fj = d[j];
                let gj = e[j];
                let row_j = &mut v[j * n..j * n + i];
                for k in j..i {
                    row_j[k] -= fj * e[k] + gj * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if accumulate {
        for i in 0..(n - 1) {
            v[idx(n - 1, i)] = v[idx(i, i)];
            v[idx(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                let row_next = &v[(i + 1) * n..(i + 1) * n + (i + 1)];
                for (dk, vk) in d[..=i].iter_mut().zip(row_next.iter()) {
                    *dk = vk / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    {
                        let (left, right) = v.split_at((i + 1) * n);
                        let row_j = &left[j * n..j * n + (i + 1)];
                        let row_next = &right[..(i + 1)];
                        for k in 0..=i {
                            g += row_next[k] * row_j[k];
                        }
                    }
                    let row_j = &mut v[j * n..j * n + (i + 1)];
                    for k in 0..=i {
                        row_j[k] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[idx(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = v[idx(n - 1, j)];
            v[idx(n - 1, j)] = 0.0;
        }
        v[idx(n - 1, n - 1)] = 1.0;
    } else {
        // Without accumulation the reduced diagonal still sits on v's
        // diagonal; the Householder bookkeeping above never touches it.
        for j in 0..n {
            d[j] = v[idx(j, j)];
        }
    }
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal (d, e) in EISPACK layout
/// (`e[i]` couples `d[i-1]` and `d[i]`; `e[0]` unused). Shifts e down before
/// delegating to the main loop.
fn tql2(n: usize, d: &mut [f64], e: &mut [f64], v: Option<&mut [f64]>) -> Result<(), Error> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    tql2_inner(n, d, e, v)
}

/// QL main loop; expects `e[i]` to couple `d[i]` and `d[i+1]`.
fn tql2_inner(
    n: usize,
    d: &mut [f64],
    e: &mut [f64],
    mut v: Option<&mut [f64]>,
) -> Result<(), Error> {
    if n == 0 {
        return Ok(());
    }
    let mut f = 0.0_f64;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut iter = 0;
        loop {
            // Find small subdiagonal element.
            let mut m = l;
            while m < n - 1 {
                if e[m].abs() <= eps * tst1 {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter >= MAX_QL_ITER {
                return Err(Error::ConvergenceFailure {
                    size: n,
                    iterations: iter,
                    mu: None,
                });
            }
            iter += 1;

            // Compute implicit shift.
            let g = d[l];
            let mut p = (d[l + 1] - g) / (2.0 * e[l]);
            let mut r = p.hypot(1.0);
            if p < 0.0 {
                r = -r;
            }
            d[l] = e[l] / (p + r);
            d[l + 1] = e[l] * (p + r);
            let dl1 = d[l + 1];
            let mut h = g - d[l];
            for item in d.iter_mut().take(n).skip(l + 2) {
                *item -= h;
            }
            f += h;

            // Implicit QL transformation.
            p = d[m];
            let mut c = 1.0;
            let mut c2 = c;
            let mut c3 = c;
            let el1 = e[l + 1];
            let mut s = 0.0;
            let mut s2 = 0.0;
            for i in (l..m).rev() {
                c3 = c2;
                c2 = c;
                s2 = s;
                let g = c * e[i];
                h = c * p;
                r = p.hypot(e[i]);
                e[i + 1] = s * r;
                s = e[i] / r;
                c = p / r;
                p = c * d[i] - s * g;
                d[i + 1] = h + s * (c * g + s * d[i]);

                if let Some(z) = v.as_deref_mut() {
                    // rotate candidate eigenvectors i and i+1 (contiguous rows)
                    let (head, tail) = z.split_at_mut((i + 1) * n);
                    let row_i = &mut head[i * n..];
                    let row_j = &mut tail[..n];
                    for k in 0..n {
                        let h = row_j[k];
                        row_j[k] = s * row_i[k] + c * h;
                        row_i[k] = c * row_i[k] - s * h;
                    }
                }
            }
            p = -s * s2 * c3 * el1 * e[l] / dl1;
            e[l] = s * p;
            d[l] = c * p;

            if e[l].abs() <= eps * tst1 {
                break;
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cyclic Jacobi rotations; independent oracle for the QL path.
    fn jacobi_eigenvalues(a: &SymMat) -> Vec<f64> {
        let n = a.dim();
        let mut m = a.data.clone();
        let idx = |i: usize, j: usize| i * n + j;
        for _sweep in 0..100 {
            let mut off = 0.0_f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += m[idx(i, j)] * m[idx(i, j)];
                }
            }
            if off.sqrt() < 1e-14 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[idx(p, q)];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[idx(q, q)] - m[idx(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = m[idx(k, p)];
                        let akq = m[idx(k, q)];
                        m[idx(k, p)] = c * akp - s * akq;
                        m[idx(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = m[idx(p, k)];
                        let aqk = m[idx(q, k)];
                        m[idx(p, k)] = c * apk - s * aqk;
                        m[idx(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut vals: Vec<f64> = (0..n).map(|i| m[idx(i, i)]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    fn seeded_symmetric(n: usize, seed: u64) -> SymMat {
        // small deterministic LCG; avoids pulling rand into this module
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut a = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        a
    }

    #[test]
    fn fixed_2x2() {
        let mut a = SymMat::zeros(2);
        a.set(0, 0, 2.0);
        a.set(1, 1, 2.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        let out = solve_dense(&a, true).unwrap();
        assert!((out.values[0] - 1.0).abs() < 1e-14);
        assert!((out.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_matrix_is_its_own_spectrum() {
        let mut a = SymMat::zeros(5);
        for (i, v) in [3.0, -1.0, 0.5, 7.0, 0.0].iter().enumerate() {
            a.set(i, i, *v);
        }
        let out = solve_dense(&a, true).unwrap();
        let expect = [-1.0, 0.0, 0.5, 3.0, 7.0];
        for (got, want) in out.values.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_jacobi_oracle_on_random_matrices() {
        for (k, &n) in [3usize, 7, 12, 25].iter().enumerate() {
            let a = seeded_symmetric(n, 1000 + k as u64);
            let out = solve_dense(&a, true).unwrap();
            let oracle = jacobi_eigenvalues(&a);
            for (got, want) in out.values.iter().zip(oracle.iter()) {
                assert!(
                    (got - want).abs() < 1e-11,
                    "n={n}: {got} vs jacobi {want}"
                );
            }
        }
    }

    #[test]
    fn values_only_matches_full_solve() {
        let a = seeded_symmetric(20, 7);
        let full = solve_dense(&a, true).unwrap();
        let vals = solve_dense(&a, false).unwrap();
        for (x, y) in full.values.iter().zip(vals.values.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenpairs_satisfy_residual_and_orthogonality() {
        let n = 30;
        let a = seeded_symmetric(n, 99);
        let out = solve_dense(&a, true).unwrap();
        let vecs = out.vectors.as_ref().unwrap();
        let scale: f64 = out.values.iter().fold(0.0, |m, v| m.max(v.abs()));
        for (k, v) in vecs.iter().enumerate() {
            let av = a.mul_vec(v);
            for i in 0..n {
                assert!(
                    (av[i] - out.values[k] * v[i]).abs() < 1e-11 * (1.0 + scale),
                    "residual too large at pair {k}"
                );
            }
        }
        for i in 0..n {
            for j in i..n {
                let dot: f64 = vecs[i].iter().zip(vecs[j].iter()).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn tridiagonal_path_matches_dense_path() {
        let n = 16;
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| -1.0 + 0.01 * i as f64).collect();
        let mut a = SymMat::zeros(n);
        for i in 0..n {
            a.set(i, i, diag[i]);
            if i + 1 < n {
                a.set(i, i + 1, off[i]);
                a.set(i + 1, i, off[i]);
            }
        }
        let dense = solve_dense(&a, true).unwrap();
        let tri = solve_tridiagonal(&diag, &off, true).unwrap();
        for (x, y) in dense.values.iter().zip(tri.values.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn free_laplacian_tridiagonal_closed_form() {
        // Dirichlet 3-point Laplacian on n interior nodes of (0, n+1):
        // eigenvalues 2 - 2 cos(k pi / (n+1)).
        let n = 24;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let out = solve_tridiagonal(&diag, &off, false).unwrap();
        for (k, lam) in out.values.iter().enumerate() {
            let expect = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((lam - expect).abs() < 1e-12, "k={k}: {lam} vs {expect}");
        }
    }
}
