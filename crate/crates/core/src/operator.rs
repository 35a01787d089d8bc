//! The weighted base operator and its eigenproblem.
//!
//! Separation of variables on a warped product turns each fiber eigenvalue
//! `mu` into an operator on the base whose 1-D divergence form is
//!
//! ```text
//! (f^m u')' - mu f^(m-2) u = -lambda f^m u
//! ```
//!
//! Discretized conservatively this is the generalized symmetric pencil
//! `K u = lambda W u` with
//!
//! - stiffness `K`: face fluxes `-f_face^m / h` off the diagonal, diagonal
//!   equal to minus the sum of its off-diagonal couplings plus the zero-order
//!   term `mu f_i^(m-2) h` (so constants are exactly in the kernel at mu = 0);
//! - weight `W = diag(f_i^m h)`, the discrete volume measure.
//!
//! The pencil is reduced by the similarity `M = W^(-1/2) K W^(-1/2)` and
//! solved densely (periodic bases) or on the tridiagonal fast path (interval
//! bases); eigenvectors map back through `W^(-1/2)` and are orthonormal in
//! the weighted inner product by construction.

use serde::Serialize;

use crate::eigen::{self, SymMat};
use crate::error::{Error, Result};
use crate::fiber::FiberSpectrum;
use crate::mesh::{BaseMesh, BoundaryCondition};
use crate::par::ordered_map;
use crate::warp::WarpField;

/// Relative gap below which adjacent eigenvalues are treated as one numerical
/// cluster for basis canonicalization.
pub const CLUSTER_GAP: f64 = 1e-9;

/// Discrete pencil (K, W) for one fiber eigenvalue.
#[derive(Debug, Clone)]
pub struct WeightedOperator {
    stiffness: SymMat,
    weight: Vec<f64>,
    pub mu: f64,
    pub warp: WarpField,
    tridiagonal: bool,
}

impl WeightedOperator {
    pub fn stiffness(&self) -> &SymMat {
        &self.stiffness
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    /// Quadratic form `u' K u` (the weighted Dirichlet energy plus the
    /// zero-order mu term).
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let ku = self.stiffness.mul_vec(u);
        u.iter().zip(ku.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Builds the pencil for the given warp and fiber eigenvalue `mu >= 0`.
pub fn assemble_operator(warp: &WarpField, mu: f64) -> Result<WeightedOperator> {
    assert!(mu >= 0.0 && mu.is_finite(), "fiber eigenvalue must be >= 0");
    let mesh = &warp.mesh;
    let n = mesh.n;
    let h = mesh.h;
    let m = warp.m_fiber as i32;
    let fm_face = warp.mid_power(m);
    let fm2_node = warp.node_power(m - 2);
    let fm_node = warp.node_power(m);

    let mut k = SymMat::zeros(n);
    match mesh.bc {
        BoundaryCondition::Periodic => {
            for face in 0..n {
                let i = face;
                let j = (face + 1) % n;
                let c = fm_face[face] / h;
                k.add_sym(i, i, c);
                k.add_sym(j, j, c);
                k.add_sym(i, j, -c);
            }
        }
        BoundaryCondition::Dirichlet => {
            // boundary faces couple to the zero boundary value: diagonal only
            k.add_sym(0, 0, fm_face[0] / h);
            k.add_sym(n - 1, n - 1, fm_face[n] / h);
            for face in 1..n {
                let (i, j) = (face - 1, face);
                let c = fm_face[face] / h;
                k.add_sym(i, i, c);
                k.add_sym(j, j, c);
                k.add_sym(i, j, -c);
            }
        }
        BoundaryCondition::Neumann => {
            // boundary faces carry zero flux and contribute nothing
            for face in 1..n {
                let (i, j) = (face - 1, face);
                let c = fm_face[face] / h;
                k.add_sym(i, i, c);
                k.add_sym(j, j, c);
                k.add_sym(i, j, -c);
            }
        }
    }
    for i in 0..n {
        k.add_sym(i, i, mu * fm2_node[i] * h);
    }
    let weight: Vec<f64> = fm_node.iter().map(|f| f * h).collect();
    Ok(WeightedOperator {
        stiffness: k,
        weight,
        mu,
        warp: warp.clone(),
        tridiagonal: mesh.bc != BoundaryCondition::Periodic,
    })
}

/// Weighted-orthonormal eigenpairs of one pencil, ascending.
#[derive(Debug, Clone, Serialize)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` is the node array paired with `eigenvalues[k]`,
    /// normalized so that `sum_i phi_i^2 w_i = 1`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub mu: f64,
    /// Diagonal of the weight matrix W.
    pub weight: Vec<f64>,
    #[serde(skip)]
    pub mesh: BaseMesh,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Weighted inner product of two node arrays under this decomposition's
    /// weight.
    pub fn weighted_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(self.weight.iter())
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Largest deviation of `<phi_a, phi_b>_W` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..self.len() {
            for b in a..self.len() {
                let dot = self.weighted_dot(&self.eigenvectors[a], &self.eigenvectors[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).abs());
            }
        }
        worst
    }

    /// Largest scaled residual `||K phi - lambda W phi||_inf / (1 + |lambda|)`.
    pub fn max_residual(&self, op: &WeightedOperator) -> f64 {
        let mut worst = 0.0_f64;
        for (lambda, phi) in self.eigenvalues.iter().zip(self.eigenvectors.iter()) {
            let kphi = op.stiffness.mul_vec(phi);
            for i in 0..phi.len() {
                let r = (kphi[i] - lambda * self.weight[i] * phi[i]).abs();
                worst = worst.max(r / (1.0 + lambda.abs()));
            }
        }
        worst
    }

    /// Gap from eigenvalue `j` to its nearest neighbor.
    pub fn isolation_gap(&self, j: usize) -> f64 {
        let mut gap = f64::INFINITY;
        if j > 0 {
            gap = gap.min((self.eigenvalues[j] - self.eigenvalues[j - 1]).abs());
        }
        if j + 1 < self.len() {
            gap = gap.min((self.eigenvalues[j + 1] - self.eigenvalues[j]).abs());
        }
        gap
    }

    /// Indices of the numerical cluster containing eigenvalue `j` (adjacent
    /// gaps below `tol * (1 + |lambda|)`).
    pub fn cluster_around(&self, j: usize, tol: f64) -> std::ops::Range<usize> {
        let lam = self.eigenvalues[j];
        let width = tol * (1.0 + lam.abs());
        let mut lo = j;
        while lo > 0 && (self.eigenvalues[lo] - self.eigenvalues[lo - 1]).abs() <= width {
            lo -= 1;
        }
        let mut hi = j;
        while hi + 1 < self.len() && (self.eigenvalues[hi + 1] - self.eigenvalues[hi]).abs() <= width
        {
            hi += 1;
        }
        lo..hi + 1
    }
}

/// Full symmetric eigensolve of the pencil. `k` truncates the output to the
/// lowest k pairs; `None` keeps everything.
pub fn eigensolve(op: &WeightedOperator, k: Option<usize>) -> Result<EigenDecomposition> {
    let n = op.dim();
    let inv_sqrt_w: Vec<f64> = op.weight.iter().map(|w| 1.0 / w.sqrt()).collect();

    let output = if op.tridiagonal {
        let mut d = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n - 1);
        for i in 0..n {
            d.push(op.stiffness.at(i, i) * inv_sqrt_w[i] * inv_sqrt_w[i]);
            if i + 1 < n {
                e.push(op.stiffness.at(i, i + 1) * inv_sqrt_w[i] * inv_sqrt_w[i + 1]);
            }
        }
        eigen::solve_tridiagonal(&d, &e, true)
    } else {
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, op.stiffness.at(i, j) * inv_sqrt_w[i] * inv_sqrt_w[j]);
            }
        }
        eigen::solve_dense(&m, true)
    }
    .map_err(|err| match err {
        Error::ConvergenceFailure {
            size, iterations, ..
        } => Error::ConvergenceFailure {
            size,
            iterations,
            mu: Some(op.mu),
        },
        other => other,
    })?;

    let values = output.values;
    let mut vectors = output.vectors.expect("vectors requested");
    canonicalize_clusters(&values, &mut vectors);
    for v in &mut vectors {
        sign_fix(v);
    }
    // back-map to the weighted problem: phi = W^(-1/2) v
    for v in &mut vectors {
        for (x, s) in v.iter_mut().zip(inv_sqrt_w.iter()) {
            *x *= s;
        }
    }

    let keep = k.map_or(n, |k| k.min(n));
    Ok(EigenDecomposition {
        eigenvalues: values[..keep].to_vec(),
        eigenvectors: vectors[..keep].to_vec(),
        mu: op.mu,
        weight: op.weight.clone(),
        mesh: op.warp.mesh.clone(),
    })
}

/// Eigenvalues only; used where eigenvectors would be dead weight (the 2-D
/// product validator).
pub fn eigensolve_values(op: &WeightedOperator) -> Result<Vec<f64>> {
    let n = op.dim();
    let inv_sqrt_w: Vec<f64> = op.weight.iter().map(|w| 1.0 / w.sqrt()).collect();
    let output = if op.tridiagonal {
        let mut d = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n - 1);
        for i in 0..n {
            d.push(op.stiffness.at(i, i) * inv_sqrt_w[i] * inv_sqrt_w[i]);
            if i + 1 < n {
                e.push(op.stiffness.at(i, i + 1) * inv_sqrt_w[i] * inv_sqrt_w[i + 1]);
            }
        }
        eigen::solve_tridiagonal(&d, &e, false)
    } else {
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, op.stiffness.at(i, j) * inv_sqrt_w[i] * inv_sqrt_w[j]);
            }
        }
        eigen::solve_dense(&m, false)
    }
    .map_err(|err| match err {
        Error::ConvergenceFailure {
            size, iterations, ..
        } => Error::ConvergenceFailure {
            size,
            iterations,
            mu: Some(op.mu),
        },
        other => other,
    })?;
    Ok(output.values)
}

/// Fixes the overall sign of a vector: the first component that is not
/// negligible relative to the largest one is made positive.
fn sign_fix(v: &mut [f64]) {
    let maxabs = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if maxabs == 0.0 {
        return;
    }
    for &x in v.iter() {
        if x.abs() > 1e-8 * maxabs {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

/// Replaces the eigenvector basis of each numerical cluster by the
/// Gram-Schmidt orthonormalization of the projections of the canonical unit
/// vectors onto the cluster span. The result depends only on the subspace,
/// not on the arbitrary rotation the solver happened to produce.
fn canonicalize_clusters(values: &[f64], vectors: &mut [Vec<f64>]) {
    let n = values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && (values[end] - values[end - 1]).abs()
                <= CLUSTER_GAP * (1.0 + values[end].abs())
        {
            end += 1;
        }
        let p = end - start;
        if p > 1 {
            let dim = vectors[start].len();
            let cluster: Vec<&Vec<f64>> = (start..end).map(|k| &vectors[k]).collect();
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
            for c in 0..dim {
                if basis.len() == p {
                    break;
                }
                // projection of e_c onto the cluster span
                let mut w = vec![0.0; dim];
                for v in &cluster {
                    let coef = v[c];
                    for (wi, vi) in w.iter_mut().zip(v.iter()) {
                        *wi += coef * vi;
                    }
                }
                for b in &basis {
                    let dot: f64 = w.iter().zip(b.iter()).map(|(a, x)| a * x).sum();
                    for (wi, bi) in w.iter_mut().zip(b.iter()) {
                        *wi -= dot * bi;
                    }
                }
                let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    for wi in w.iter_mut() {
                        *wi /= norm;
                    }
                    basis.push(w);
                }
            }
            if basis.len() == p {
                for (offset, b) in basis.into_iter().enumerate() {
                    vectors[start + offset] = b;
                }
            }
            // if the greedy pass failed to find p directions (it will not for
            // any orthonormal input), the solver basis is kept as-is
        }
        start = end;
    }
}

/// One solved fiber branch of the family.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyBranch {
    pub fiber_index: usize,
    pub mu: f64,
    pub decomposition: EigenDecomposition,
}

/// A fiber eigenvalue skipped by the spectral lower bound
/// `lambda >= mu / max(f)^2`.
#[derive(Debug, Clone, Serialize)]
pub struct SkippedMu {
    pub fiber_index: usize,
    pub mu: f64,
    pub min_possible_lambda: f64,
}

/// Per-mu decompositions of the family, plus the record of which fiber
/// eigenvalues were provably above the cutoff.
#[derive(Debug, Clone, Serialize)]
pub struct FamilySpectrum {
    pub branches: Vec<FamilyBranch>,
    pub skipped: Vec<SkippedMu>,
    pub lambda_max: f64,
}

/// Truncation guard: branches keep eigenvalues slightly past `lambda_max` so
/// that a level sitting exactly on the cutoff is never half-dropped; the
/// assembler applies the exact cut on clustered level positions.
pub(crate) fn truncation_guard(lambda_max: f64) -> f64 {
    1e-6 * (1.0 + lambda_max.abs())
}

/// Solves the base operator for every retained fiber eigenvalue. Branches
/// are independent and run in input order (in parallel under the `parallel`
/// feature; results are identical either way).
pub fn spectrum_of_family(
    warp: &WarpField,
    fiber: &FiberSpectrum,
    lambda_max: f64,
) -> Result<FamilySpectrum> {
    fiber.validate()?;
    let max_f = warp.max_node_value();
    let mut retained = Vec::new();
    let mut skipped = Vec::new();
    for (fiber_index, entry) in fiber.entries.iter().enumerate() {
        let min_possible_lambda = entry.mu / (max_f * max_f);
        if min_possible_lambda > lambda_max {
            skipped.push(SkippedMu {
                fiber_index,
                mu: entry.mu,
                min_possible_lambda,
            });
        } else {
            retained.push((fiber_index, entry.mu));
        }
    }
    let guard = truncation_guard(lambda_max);
    let solved = ordered_map(retained, |(fiber_index, mu)| -> Result<FamilyBranch> {
        let op = assemble_operator(warp, mu)?;
        let mut dec = eigensolve(&op, None)?;
        let keep = dec
            .eigenvalues
            .iter()
            .take_while(|&&l| l <= lambda_max + guard)
            .count();
        dec.eigenvalues.truncate(keep);
        dec.eigenvectors.truncate(keep);
        Ok(FamilyBranch {
            fiber_index,
            mu,
            decomposition: dec,
        })
    });
    let mut branches = Vec::with_capacity(solved.len());
    for b in solved {
        branches.push(b?);
    }
    Ok(FamilySpectrum {
        branches,
        skipped,
        lambda_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::circle_fiber;
    use crate::warp::WarpingSpec;
    use std::f64::consts::PI;

    fn circle_warp(n: usize, spec: WarpingSpec, m: usize) -> WarpField {
        let mesh = BaseMesh::circle(2.0 * PI, n).unwrap();
        spec.sample(&mesh, m).unwrap()
    }

    #[test]
    fn flat_periodic_stiffness_is_three_point_laplacian() {
        let warp = circle_warp(8, WarpingSpec::constant(1.0), 1);
        let op = assemble_operator(&warp, 0.0).unwrap();
        let h = warp.mesh.h;
        for i in 0..8 {
            assert!((op.stiffness().at(i, i) - 2.0 / h).abs() < 1e-14);
            assert!((op.stiffness().at(i, (i + 1) % 8) + 1.0 / h).abs() < 1e-14);
            assert!((op.weight()[i] - h).abs() < 1e-15);
        }
    }

    #[test]
    fn row_sums_vanish_without_zero_order_term() {
        for (warp, _) in [
            (circle_warp(16, WarpingSpec::fourier(2.0, vec![1.0], vec![]), 2), 0),
            (
                {
                    let mesh =
                        BaseMesh::interval(1.0, 12, BoundaryCondition::Neumann).unwrap();
                    WarpingSpec::fourier(2.0, vec![0.5], vec![0.25])
                        .sample(&mesh, 3)
                        .unwrap()
                },
                1,
            ),
        ] {
            let op = assemble_operator(&warp, 0.0).unwrap();
            let scale = (0..op.dim())
                .map(|i| op.stiffness().at(i, i).abs())
                .fold(0.0_f64, f64::max);
            for i in 0..op.dim() {
                let sum: f64 = op.stiffness().row(i).iter().sum();
                assert!(
                    sum.abs() <= 16.0 * f64::EPSILON * scale,
                    "row {i} sums to {sum}"
                );
            }
        }
    }

    #[test]
    fn stiffness_is_exactly_symmetric() {
        let warp = circle_warp(24, WarpingSpec::fourier(2.0, vec![1.0], vec![0.3]), 2);
        let op = assemble_operator(&warp, 1.5).unwrap();
        assert_eq!(op.stiffness().symmetry_defect(), 0.0);
    }

    #[test]
    fn flat_circle_spectrum_matches_discrete_symbol() {
        let n = 64;
        let warp = circle_warp(n, WarpingSpec::constant(1.0), 1);
        let op = assemble_operator(&warp, 0.0).unwrap();
        let dec = eigensolve(&op, None).unwrap();
        let h = warp.mesh.h;
        assert!(dec.eigenvalues[0].abs() < 1e-11);
        let lam1 = 2.0 * (1.0 - h.cos()) / (h * h);
        assert!((dec.eigenvalues[1] - lam1).abs() < 1e-10);
        assert!((dec.eigenvalues[2] - lam1).abs() < 1e-10);
        // constant eigenvector at lambda = 0
        let c = dec.eigenvectors[0][0];
        assert!(dec.eigenvectors[0].iter().all(|x| (x - c).abs() < 1e-9));
    }

    #[test]
    fn constant_warp_shifts_spectrum_exactly() {
        let n = 64;
        let flat = {
            let warp = circle_warp(n, WarpingSpec::constant(1.0), 1);
            eigensolve(&assemble_operator(&warp, 0.0).unwrap(), None).unwrap()
        };
        for (c, m, mu) in [(2.0, 1usize, 1.0), (0.5, 2, 4.0), (2.0, 3, 0.0)] {
            let warp = circle_warp(n, WarpingSpec::constant(c), m);
            let dec = eigensolve(&assemble_operator(&warp, mu).unwrap(), None).unwrap();
            for (got, flat_l) in dec.eigenvalues.iter().zip(flat.eigenvalues.iter()) {
                let expect = flat_l + mu / (c * c);
                assert!(
                    (got - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                    "c={c} m={m} mu={mu}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn weighted_orthonormality_and_residual_bounds() {
        let warp = circle_warp(48, WarpingSpec::fourier(2.0, vec![1.0], vec![-0.4]), 2);
        let op = assemble_operator(&warp, 3.0).unwrap();
        let dec = eigensolve(&op, None).unwrap();
        assert!(dec.orthonormality_defect() <= 1e-10);
        assert!(dec.max_residual(&op) <= 1e-8);

        let mesh = BaseMesh::interval(1.0, 40, BoundaryCondition::Dirichlet).unwrap();
        let warp = WarpingSpec::fourier(1.5, vec![0.3], vec![0.2])
            .sample(&mesh, 1)
            .unwrap();
        let op = assemble_operator(&warp, 2.0).unwrap();
        let dec = eigensolve(&op, None).unwrap();
        assert!(dec.orthonormality_defect() <= 1e-10);
        assert!(dec.max_residual(&op) <= 1e-8);
    }

    #[test]
    fn mu_monotonicity_sandwich() {
        let warp = circle_warp(32, WarpingSpec::fourier(2.0, vec![1.0], vec![]), 1);
        let (mu_a, mu_b) = (0.5, 2.5);
        let dec_a = eigensolve(&assemble_operator(&warp, mu_a).unwrap(), None).unwrap();
        let dec_b = eigensolve(&assemble_operator(&warp, mu_b).unwrap(), None).unwrap();
        let fmax = warp.max_node_value();
        let fmin = warp.min_node_value();
        let d = mu_b - mu_a;
        for (la, lb) in dec_a.eigenvalues.iter().zip(dec_b.eigenvalues.iter()) {
            let slack = 1e-9 * (1.0 + la.abs());
            assert!(la + d / (fmax * fmax) <= lb + slack);
            assert!(*lb <= la + d / (fmin * fmin) + slack);
        }
    }

    #[test]
    fn convergence_is_second_order_for_smooth_warp() {
        let lam1 = |n: usize| {
            let warp = circle_warp(n, WarpingSpec::fourier(2.0, vec![1.0], vec![]), 1);
            eigensolve(&assemble_operator(&warp, 0.0).unwrap(), None).unwrap().eigenvalues[1]
        };
        let (a, b, c) = (lam1(32), lam1(64), lam1(128));
        let ratio = (a - b) / (b - c);
        assert!((3.5..=4.5).contains(&ratio), "Richardson ratio {ratio}");
    }

    #[test]
    fn dirichlet_interval_spectrum_closed_form() {
        // flat dirichlet: lambda_k = 2(1 - cos(k pi / (n+1))) / h^2
        let n = 32;
        let mesh = BaseMesh::interval(1.0, n, BoundaryCondition::Dirichlet).unwrap();
        let warp = WarpingSpec::constant(1.0).sample(&mesh, 1).unwrap();
        let dec = eigensolve(&assemble_operator(&warp, 0.0).unwrap(), None).unwrap();
        let h = mesh.h;
        for (k, lam) in dec.eigenvalues.iter().enumerate() {
            let expect = 2.0 * (1.0 - ((k + 1) as f64 * PI * h).cos()) / (h * h);
            assert!((lam - expect).abs() < 1e-9 * (1.0 + expect));
        }
    }

    #[test]
    fn family_solve_retains_and_skips_by_lower_bound() {
        let warp = circle_warp(16, WarpingSpec::constant(1.0), 1);
        let fiber = circle_fiber(2.0 * PI, 16.0).unwrap(); // mu = 0, 1, 4, 9, 16
        let family = spectrum_of_family(&warp, &fiber, 5.0).unwrap();
        let retained: Vec<f64> = family.branches.iter().map(|b| b.mu).collect();
        assert_eq!(retained, vec![0.0, 1.0, 4.0]);
        let skipped: Vec<f64> = family.skipped.iter().map(|s| s.mu).collect();
        assert_eq!(skipped, vec![9.0, 16.0]);
        // constant warp: each branch is the flat branch shifted by mu
        for b in &family.branches {
            for (j, lam) in b.decomposition.eigenvalues.iter().enumerate() {
                let flat = family.branches[0].decomposition.eigenvalues[j];
                assert!((lam - (flat + b.mu)).abs() < 1e-11 * (1.0 + lam.abs()));
            }
        }
        // negative cutoff retains nothing
        let empty = spectrum_of_family(&warp, &fiber, -1.0).unwrap();
        assert!(empty.branches.is_empty());
        assert_eq!(empty.skipped.len(), fiber.entries.len());
    }

    #[test]
    fn eigensolve_truncation_keeps_lowest_pairs() {
        let warp = circle_warp(16, WarpingSpec::constant(1.0), 1);
        let op = assemble_operator(&warp, 0.0).unwrap();
        let full = eigensolve(&op, None).unwrap();
        let head = eigensolve(&op, Some(3)).unwrap();
        assert_eq!(head.len(), 3);
        for k in 0..3 {
            assert_eq!(full.eigenvalues[k], head.eigenvalues[k]);
        }
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let warp = circle_warp(24, WarpingSpec::fourier(2.0, vec![0.7], vec![0.1]), 1);
        let op = assemble_operator(&warp, 1.0).unwrap();
        let a = eigensolve(&op, None).unwrap();
        let b = eigensolve(&op, None).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn degenerate_pair_basis_is_orthonormal_after_canonicalization() {
        // flat circle: exact double eigenvalues
        let warp = circle_warp(32, WarpingSpec::constant(1.0), 1);
        let dec = eigensolve(&assemble_operator(&warp, 0.0).unwrap(), None).unwrap();
        assert!(dec.orthonormality_defect() <= 1e-10);
        let cluster = dec.cluster_around(1, 1e-9);
        assert_eq!(cluster, 1..3);
    }

    #[test]
    fn self_adjointness_of_the_pencil() {
        // <K u, v> = <u, K v> holds exactly because K is exactly symmetric
        let warp = circle_warp(20, WarpingSpec::fourier(1.5, vec![0.4], vec![0.2]), 2);
        let op = assemble_operator(&warp, 2.0).unwrap();
        let u: Vec<f64> = (0..20).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let v: Vec<f64> = (0..20).map(|i| ((i * 5 + 1) % 13) as f64 - 6.0).collect();
        let ku = op.stiffness().mul_vec(&u);
        let kv = op.stiffness().mul_vec(&v);
        let a: f64 = ku.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
        let b: f64 = kv.iter().zip(u.iter()).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
