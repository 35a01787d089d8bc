//! First variation of eigenvalues along warping perturbations
//! `f(t) = f0 + t r`, with independent oracles.
//!
//! Three routes to the same slope:
//!
//! 1. the continuum formula
//!    `lambda' = -sum_i [(m lambda + (2-m) mu / f0^2) phi^2 - m |grad phi|^2]
//!    f0^(m-1) r h` with the gradient magnitude averaged onto nodes from the
//!    midpoint fluxes (an O(h^2)-accurate discretization);
//! 2. the same formula with the squared gradient expanded through the
//!    operator identity `L(phi^2) = 2 phi L phi + 2 |grad phi|^2 +
//!    (mu/f^2) phi^2`, algebraically identical, asserted to agree to
//!    rounding;
//! 3. the discrete Hellmann-Feynman slope `phi' (K' - lambda W') phi`, exact
//!    for the pencil, cross-checked against central finite differences of
//!    re-solved eigenvalues.
//!
//! The weight exponent on `f0` is `m - 1`; the `m + 1` variant is kept
//! selectable because it is the natural misreading of the formula and fails
//! both oracles by a factor of `f0^2` (the constant-warp closed form
//! `lambda(t) = lambda_flat + mu/(c + t s)^2` pins the correct power).
//! Degenerate clusters get the quadratic-form treatment: the split slopes
//! are the eigenvalues of the slope matrix on the eigenspace.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assemble::{assemble_spectrum, AssembledLevel};
use crate::eigen::{self, SymMat};
use crate::error::{Error, Result};
use crate::fiber::FiberSpectrum;
use crate::operator::{assemble_operator, eigensolve, EigenDecomposition};
use crate::par::ordered_map;
use crate::warp::{face_slopes, PerturbationDirection, WarpField};

/// Isolation tolerance (relative) below which an eigenvalue is treated as
/// part of a degenerate cluster by the scalar derivative routes.
pub const SIMPLE_GAP_TOL: f64 = 1e-8;

/// Minimum eigenvector overlap for branch matching across solves.
pub const OVERLAP_THRESHOLD: f64 = 0.9;

/// Agreement required between the Hellmann-Feynman slope and central
/// differences, as a factor on `1 + |slope|`.
pub const FD_TOL: f64 = 1e-8;

/// Power of `f0` weighting the derivative integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightExponent {
    /// `f0^(m-1)`; agrees with the Hellmann-Feynman and finite-difference
    /// oracles.
    MMinusOne,
    /// `f0^(m+1)`; kept for comparison, off by `f0^2`.
    MPlusOne,
}

impl WeightExponent {
    pub fn value(self, m_fiber: usize) -> i32 {
        match self {
            WeightExponent::MMinusOne => m_fiber as i32 - 1,
            WeightExponent::MPlusOne => m_fiber as i32 + 1,
        }
    }
}

fn check_same_grid(warp: &WarpField, r: &PerturbationDirection) -> Result<()> {
    if !warp.mesh.same_grid(&r.mesh) {
        return Err(Error::InconsistentFamily {
            detail: "perturbation direction sampled on a different grid than the warp".into(),
        });
    }
    Ok(())
}

fn check_normalized(dec: &EigenDecomposition, j: usize) -> Result<()> {
    let phi = &dec.eigenvectors[j];
    let norm_sq = dec.weighted_dot(phi, phi);
    if (norm_sq - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm_sq });
    }
    Ok(())
}

fn check_simple(dec: &EigenDecomposition, j: usize) -> Result<()> {
    let cluster = dec.cluster_around(j, SIMPLE_GAP_TOL);
    if cluster.len() > 1 {
        return Err(Error::DegenerateEigenvalue {
            index: j,
            lambda: dec.eigenvalues[j],
            gap: dec.isolation_gap(j),
        });
    }
    Ok(())
}

/// Node-averaged gradient pairing `G_i^{ab} = (s^a s^b at the left face +
/// s^a s^b at the right face) / 2` from the midpoint fluxes.
fn gradient_pairing(
    slopes_a: &[f64],
    slopes_b: &[f64],
    warp: &WarpField,
) -> Vec<f64> {
    let n = warp.mesh.n;
    let periodic = warp.mesh.is_periodic();
    (0..n)
        .map(|i| {
            let (left, right) = if periodic {
                ((i + n - 1) % n, i)
            } else {
                (i, i + 1)
            };
            0.5 * (slopes_a[left] * slopes_b[left] + slopes_a[right] * slopes_b[right])
        })
        .collect()
}

/// Shared integrand of the formula routes:
/// `-sum_i [(m lambda + (2-m) mu / f^2) phi_a phi_b - m G_i^{ab}] f^e r h`.
fn slope_form(
    warp: &WarpField,
    r: &PerturbationDirection,
    mu: f64,
    lambda: f64,
    phi_a: &[f64],
    phi_b: &[f64],
    exponent: WeightExponent,
) -> Result<f64> {
    let m = warp.m_fiber as f64;
    let e = exponent.value(warp.m_fiber);
    let h = warp.mesh.h;
    let fe = warp.node_power(e);
    let slopes_a = face_slopes(phi_a, &warp.mesh)?;
    let slopes_b = face_slopes(phi_b, &warp.mesh)?;
    let g = gradient_pairing(&slopes_a, &slopes_b, warp);
    let mut acc = 0.0;
    for i in 0..warp.mesh.n {
        let f = warp.node_values[i];
        let zero_order = (m * lambda + (2.0 - m) * mu / (f * f)) * phi_a[i] * phi_b[i];
        acc += (zero_order - m * g[i]) * fe[i] * r.node_values[i] * h;
    }
    Ok(-acc)
}

/// Slope of a simple eigenvalue from the continuum derivative formula.
pub fn eigenvalue_derivative(
    warp: &WarpField,
    r: &PerturbationDirection,
    dec: &EigenDecomposition,
    j: usize,
    exponent: WeightExponent,
) -> Result<f64> {
    check_same_grid(warp, r)?;
    check_normalized(dec, j)?;
    check_simple(dec, j)?;
    slope_form(
        warp,
        r,
        dec.mu,
        dec.eigenvalues[j],
        &dec.eigenvectors[j],
        &dec.eigenvectors[j],
        exponent,
    )
}

/// Same slope with the gradient term routed through the operator identity
/// `L(phi^2) = 2 phi L phi + 2 |grad phi|^2 + (mu/f^2) phi^2` (using
/// `L phi = -lambda phi`); agrees with [`eigenvalue_derivative`] to
/// rounding because the two expressions are algebraically identical.
pub fn eigenvalue_derivative_via_l(
    warp: &WarpField,
    r: &PerturbationDirection,
    dec: &EigenDecomposition,
    j: usize,
    exponent: WeightExponent,
) -> Result<f64> {
    check_same_grid(warp, r)?;
    check_normalized(dec, j)?;
    check_simple(dec, j)?;
    let m = warp.m_fiber as f64;
    let e = exponent.value(warp.m_fiber);
    let h = warp.mesh.h;
    let mu = dec.mu;
    let lambda = dec.eigenvalues[j];
    let phi = &dec.eigenvectors[j];
    let fe = warp.node_power(e);
    let slopes = face_slopes(phi, &warp.mesh)?;
    let g = gradient_pairing(&slopes, &slopes, warp);
    let mut acc = 0.0;
    for i in 0..warp.mesh.n {
        let f = warp.node_values[i];
        let phi_sq = phi[i] * phi[i];
        let l_phi_sq = 2.0 * phi[i] * (-lambda * phi[i]) + 2.0 * g[i] + mu / (f * f) * phi_sq;
        let integrand = m * l_phi_sq + (m - 4.0) * mu / (f * f) * phi_sq;
        acc += integrand * fe[i] * r.node_values[i] * h;
    }
    Ok(0.5 * acc)
}

/// Exact derivative of a simple eigenvalue of the discrete pencil:
/// `phi' (K' - lambda W') phi / (phi' W phi)` with the entrywise derivatives
/// of K and W in `t` (face term `m f^(m-1) r` on the fluxes, node terms
/// `mu (m-2) f^(m-3) r h` and `m f^(m-1) r h` on the diagonals).
pub fn hellmann_feynman_slope(
    warp: &WarpField,
    r: &PerturbationDirection,
    dec: &EigenDecomposition,
    j: usize,
) -> Result<f64> {
    check_same_grid(warp, r)?;
    check_simple(dec, j)?;
    let m = warp.m_fiber as f64;
    let mi = warp.m_fiber as i32;
    let h = warp.mesh.h;
    let mu = dec.mu;
    let lambda = dec.eigenvalues[j];
    let phi = &dec.eigenvectors[j];

    let slopes = face_slopes(phi, &warp.mesh)?;
    let fm1_face = warp.mid_power(mi - 1);
    let mut k_flux = 0.0;
    for (s, (fw, rv)) in slopes
        .iter()
        .zip(fm1_face.iter().zip(r.midpoint_values.iter()))
    {
        k_flux += m * fw * rv * s * s * h;
    }
    let fm3 = warp.node_power(mi - 3);
    let fm1 = warp.node_power(mi - 1);
    let fm = warp.node_power(mi);
    let mut k_zero = 0.0;
    let mut w_prime = 0.0;
    let mut w_norm = 0.0;
    for i in 0..warp.mesh.n {
        let phi_sq = phi[i] * phi[i];
        k_zero += mu * (m - 2.0) * fm3[i] * r.node_values[i] * phi_sq * h;
        w_prime += m * fm1[i] * r.node_values[i] * phi_sq * h;
        w_norm += fm[i] * phi_sq * h;
    }
    Ok((k_flux + k_zero - lambda * w_prime) / w_norm)
}

/// Central-difference slope with the step chosen from a descending list.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdSlope {
    pub value: f64,
    pub step_used: f64,
}

/// W0-weighted cosine between two node arrays.
fn overlap(a: &[f64], b: &[f64], w0: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i] * w0[i];
        na += a[i] * a[i] * w0[i];
        nb += b[i] * b[i] * w0[i];
    }
    dot.abs() / (na.sqrt() * nb.sqrt())
}

fn weight_of(warp: &WarpField) -> Vec<f64> {
    warp.node_power(warp.m_fiber as i32)
        .iter()
        .map(|f| f * warp.mesh.h)
        .collect()
}

/// Central differences `(lambda_j(t) - lambda_j(-t)) / 2t` of the re-solved
/// pencil. Steps are tried in the given descending order; branches at +-t are
/// matched to branch j at t = 0 by weighted eigenvector overlap, and the
/// returned slope is the one at the smallest step that is stable against its
/// predecessor.
pub fn fd_slope(
    warp: &WarpField,
    r: &PerturbationDirection,
    mu: f64,
    j: usize,
    steps: &[f64],
) -> Result<FdSlope> {
    check_same_grid(warp, r)?;
    assert!(!steps.is_empty(), "need at least one step");
    let dec0 = eigensolve(&assemble_operator(warp, mu)?, None)?;
    if j >= dec0.len() {
        return Err(Error::SizeMismatch {
            detail: format!("branch index {j} out of range ({} eigenpairs)", dec0.len()),
        });
    }
    let w0 = weight_of(warp);
    let phi0 = &dec0.eigenvectors[j];

    let mut slopes: Vec<(f64, f64)> = Vec::new(); // (t, slope)
    let mut last_positivity_err = None;
    let mut worst_overlap: f64 = 1.0;
    for &t in steps {
        assert!(t > 0.0, "steps must be positive");
        let plus = match warp.perturbed(r, t) {
            Ok(f) => f,
            Err(e) => {
                last_positivity_err = Some(e);
                continue;
            }
        };
        let minus = match warp.perturbed(r, -t) {
            Ok(f) => f,
            Err(e) => {
                last_positivity_err = Some(e);
                continue;
            }
        };
        let dec_p = eigensolve(&assemble_operator(&plus, mu)?, None)?;
        let dec_m = eigensolve(&assemble_operator(&minus, mu)?, None)?;
        let match_branch = |dec: &EigenDecomposition| -> Option<(usize, f64)> {
            let mut best = (0usize, -1.0f64);
            for (b, v) in dec.eigenvectors.iter().enumerate() {
                let o = overlap(phi0, v, &w0);
                if o > best.1 {
                    best = (b, o);
                }
            }
            (best.1 >= OVERLAP_THRESHOLD).then_some(best)
        };
        let (bp, op_) = match match_branch(&dec_p) {
            Some(x) => x,
            None => {
                worst_overlap = worst_overlap.min(best_overlap_value(phi0, &dec_p, &w0));
                continue;
            }
        };
        let (bm, om) = match match_branch(&dec_m) {
            Some(x) => x,
            None => {
                worst_overlap = worst_overlap.min(best_overlap_value(phi0, &dec_m, &w0));
                continue;
            }
        };
        let _ = (op_, om);
        slopes.push((t, (dec_p.eigenvalues[bp] - dec_m.eigenvalues[bm]) / (2.0 * t)));
    }
    if slopes.is_empty() {
        return Err(match last_positivity_err {
            Some(e) => e,
            None => Error::MatchingAmbiguous {
                overlap: worst_overlap,
                t_lo: -steps[0],
                t_hi: steps[0],
            },
        });
    }
    if slopes.len() == 1 {
        return Ok(FdSlope {
            value: slopes[0].1,
            step_used: slopes[0].0,
        });
    }
    // pick the smallest step whose slope moved least from its predecessor
    let mut best = 1usize;
    let mut best_diff = f64::INFINITY;
    for k in 1..slopes.len() {
        let diff = (slopes[k].1 - slopes[k - 1].1).abs();
        if diff <= best_diff {
            best_diff = diff;
            best = k;
        }
    }
    Ok(FdSlope {
        value: slopes[best].1,
        step_used: slopes[best].0,
    })
}

fn best_overlap_value(phi0: &[f64], dec: &EigenDecomposition, w0: &[f64]) -> f64 {
    dec.eigenvectors
        .iter()
        .map(|v| overlap(phi0, v, w0))
        .fold(0.0, f64::max)
}

/// Slope matrix of a degenerate cluster: the bilinear extension of the
/// derivative formula on the eigenspace. Its eigenvalues approximate the
/// one-sided slopes of the analytic eigenvalue curves through the cluster.
#[derive(Debug, Clone, Serialize)]
pub struct DegenerateReport {
    pub cluster_start: usize,
    pub cluster_len: usize,
    pub lambda: f64,
    pub matrix: Vec<Vec<f64>>,
    /// Eigenvalues of the slope matrix, ascending: the split slopes.
    pub split_slopes: Vec<f64>,
}

pub fn degenerate_derivative_matrix(
    warp: &WarpField,
    r: &PerturbationDirection,
    dec: &EigenDecomposition,
    cluster: std::ops::Range<usize>,
    exponent: WeightExponent,
) -> Result<DegenerateReport> {
    check_same_grid(warp, r)?;
    let p = cluster.len();
    assert!(p >= 1 && cluster.end <= dec.len(), "invalid cluster range");
    // basis must be weighted-orthonormal on the cluster
    let mut defect = 0.0_f64;
    for a in cluster.clone() {
        for b in cluster.clone() {
            let dot = dec.weighted_dot(&dec.eigenvectors[a], &dec.eigenvectors[b]);
            let expect = if a == b { 1.0 } else { 0.0 };
            defect = defect.max((dot - expect).abs());
        }
    }
    if defect > 1e-8 {
        return Err(Error::NotOrthonormal { defect });
    }
    let lambda = cluster
        .clone()
        .map(|k| dec.eigenvalues[k])
        .sum::<f64>()
        / p as f64;
    let mut q = SymMat::zeros(p);
    for (qa, a) in cluster.clone().enumerate() {
        for (qb, b) in cluster.clone().enumerate().skip(qa) {
            let val = slope_form(
                warp,
                r,
                dec.mu,
                lambda,
                &dec.eigenvectors[a],
                &dec.eigenvectors[b],
                exponent,
            )?;
            q.set(qa, qb, val);
            q.set(qb, qa, val);
        }
    }
    let out = eigen::solve_dense(&q, false)?;
    Ok(DegenerateReport {
        cluster_start: cluster.start,
        cluster_len: p,
        lambda,
        matrix: (0..p).map(|i| q.row(i).to_vec()).collect(),
        split_slopes: out.values,
    })
}

/// Central-difference slopes of the p analytic curves through a degenerate
/// cluster: the cluster branches at +t and -t are paired by weighted
/// eigenvector overlap (maximizing total overlap over pairings) and each
/// pair differences to one slope. Returned ascending.
pub fn fd_cluster_slopes(
    warp: &WarpField,
    r: &PerturbationDirection,
    mu: f64,
    cluster: std::ops::Range<usize>,
    t: f64,
) -> Result<Vec<f64>> {
    check_same_grid(warp, r)?;
    assert!(t > 0.0);
    let plus = warp.perturbed(r, t)?;
    let minus = warp.perturbed(r, -t)?;
    let dec_p = eigensolve(&assemble_operator(&plus, mu)?, None)?;
    let dec_m = eigensolve(&assemble_operator(&minus, mu)?, None)?;
    let p = cluster.len();
    if cluster.end > dec_p.len() || cluster.end > dec_m.len() {
        return Err(Error::SizeMismatch {
            detail: "cluster range exceeds the perturbed spectrum".into(),
        });
    }
    let w0 = weight_of(warp);
    let mut o = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            o[a][b] = overlap(
                &dec_p.eigenvectors[cluster.start + a],
                &dec_m.eigenvectors[cluster.start + b],
                &w0,
            );
        }
    }
    let (perm, min_overlap) = best_assignment(&o);
    if min_overlap < OVERLAP_THRESHOLD {
        return Err(Error::MatchingAmbiguous {
            overlap: min_overlap,
            t_lo: -t,
            t_hi: t,
        });
    }
    let mut slopes: Vec<f64> = (0..p)
        .map(|a| {
            (dec_p.eigenvalues[cluster.start + a] - dec_m.eigenvalues[cluster.start + perm[a]])
                / (2.0 * t)
        })
        .collect();
    slopes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(slopes)
}

/// Assignment maximizing total overlap: exhaustive over permutations for
/// small p (clusters are small), greedy beyond that. Returns the permutation
/// and the smallest matched overlap.
fn best_assignment(o: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let p = o.len();
    if p <= 7 {
        let mut perm: Vec<usize> = (0..p).collect();
        let mut best_perm = perm.clone();
        let mut best_total = f64::NEG_INFINITY;
        permute(&mut perm, 0, &mut |candidate| {
            let total: f64 = candidate.iter().enumerate().map(|(a, &b)| o[a][b]).sum();
            if total > best_total {
                best_total = total;
                best_perm = candidate.to_vec();
            }
        });
        let min = best_perm
            .iter()
            .enumerate()
            .map(|(a, &b)| o[a][b])
            .fold(f64::INFINITY, f64::min);
        (best_perm, min)
    } else {
        let mut taken = vec![false; p];
        let mut perm = vec![0usize; p];
        let mut min = f64::INFINITY;
        for a in 0..p {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for b in 0..p {
                if !taken[b] && o[a][b] > best.1 {
                    best = (b, o[a][b]);
                }
            }
            taken[best.0] = true;
            perm[a] = best.0;
            min = min.min(best.1);
        }
        (perm, min)
    }
}

fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

/// Full derivative report for one (mu, j) target: formula, identity route,
/// Hellmann-Feynman, finite differences, and the degenerate slope matrix
/// when j sits in a cluster.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub mu: f64,
    pub index: usize,
    pub lambda0: f64,
    pub exponent: WeightExponent,
    pub slope_formula: Option<f64>,
    pub slope_via_l: Option<f64>,
    pub slope_hf: Option<f64>,
    pub slope_fd: Option<FdSlope>,
    pub residual_formula_vs_hf: Option<f64>,
    pub residual_hf_vs_fd: Option<f64>,
    pub fd_tol: f64,
    pub degenerate: Option<DegenerateReport>,
}

pub fn derivative_report(
    warp: &WarpField,
    r: &PerturbationDirection,
    mu: f64,
    j: usize,
    steps: &[f64],
    exponent: WeightExponent,
) -> Result<DerivativeReport> {
    check_same_grid(warp, r)?;
    let dec = eigensolve(&assemble_operator(warp, mu)?, None)?;
    if j >= dec.len() {
        return Err(Error::SizeMismatch {
            detail: format!("branch index {j} out of range ({} eigenpairs)", dec.len()),
        });
    }
    let cluster = dec.cluster_around(j, SIMPLE_GAP_TOL);
    let lambda0 = dec.eigenvalues[j];
    if cluster.len() == 1 {
        let slope_formula = eigenvalue_derivative(warp, r, &dec, j, exponent)?;
        let slope_via_l = eigenvalue_derivative_via_l(warp, r, &dec, j, exponent)?;
        let slope_hf = hellmann_feynman_slope(warp, r, &dec, j)?;
        let fd = fd_slope(warp, r, mu, j, steps)?;
        Ok(DerivativeReport {
            mu,
            index: j,
            lambda0,
            exponent,
            slope_formula: Some(slope_formula),
            slope_via_l: Some(slope_via_l),
            slope_hf: Some(slope_hf),
            slope_fd: Some(fd),
            residual_formula_vs_hf: Some((slope_formula - slope_hf).abs()),
            residual_hf_vs_fd: Some((slope_hf - fd.value).abs()),
            fd_tol: FD_TOL,
            degenerate: None,
        })
    } else {
        let degenerate = degenerate_derivative_matrix(warp, r, &dec, cluster, exponent)?;
        Ok(DerivativeReport {
            mu,
            index: j,
            lambda0,
            exponent,
            slope_formula: None,
            slope_via_l: None,
            slope_hf: None,
            slope_fd: None,
            residual_formula_vs_hf: None,
            residual_hf_vs_fd: None,
            fd_tol: FD_TOL,
            degenerate: Some(degenerate),
        })
    }
}

/// Candidate perturbation directions for the splitting search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CandidateDirections {
    Explicit(Vec<crate::warp::WarpingSpec>),
    SeededFourier {
        seed: u64,
        degree: usize,
        count: usize,
    },
}

/// Low-degree random Fourier directions from a seeded generator. The draw
/// order is fixed (a0, then a_k, b_k for k = 1..=degree, per candidate) so a
/// recorded seed replays the exact directions.
pub fn fourier_candidates(seed: u64, degree: usize, count: usize) -> Vec<crate::warp::WarpingSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a0 = rng.gen_range(-1.0..1.0);
            let mut cos_coeffs = Vec::with_capacity(degree);
            let mut sin_coeffs = Vec::with_capacity(degree);
            for _ in 0..degree {
                cos_coeffs.push(rng.gen_range(-1.0..1.0));
                sin_coeffs.push(rng.gen_range(-1.0..1.0));
            }
            crate::warp::WarpingSpec::fourier(a0, cos_coeffs, sin_coeffs)
        })
        .collect()
}

impl CandidateDirections {
    pub fn materialize(&self) -> Vec<crate::warp::WarpingSpec> {
        match self {
            CandidateDirections::Explicit(v) => v.clone(),
            CandidateDirections::SeededFourier {
                seed,
                degree,
                count,
            } => fourier_candidates(*seed, *degree, *count),
        }
    }
}

/// One atom (mu, j) tracked through a splitting search.
#[derive(Debug, Clone, Serialize)]
pub struct TrackedAtom {
    pub fiber_index: usize,
    pub mu: f64,
    pub base_index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateOutcome {
    pub index: usize,
    pub spec: crate::warp::WarpingSpec,
    pub positivity_ok: bool,
    /// Perturbed eigenvalues of the tracked atoms, in tracked order.
    pub perturbed_values: Vec<f64>,
    /// Smallest pairwise gap among the tracked atoms after perturbation.
    pub min_gap: Option<f64>,
    pub achieved_split: bool,
    /// Warped-simple flags of the perturbed levels containing tracked atoms.
    pub tracked_levels_warped_simple: Vec<bool>,
    /// Whether every assembled level (lambda <= lambda_max) of the perturbed
    /// warp is warped-simple.
    pub all_levels_warped_simple: Option<bool>,
}

/// Outcome of a splitting search around one assembled level.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub target_lambda: f64,
    pub tracked: Vec<TrackedAtom>,
    pub t: f64,
    pub gap_tol: f64,
    pub cluster_tol: f64,
    pub lambda_max: f64,
    pub candidates: Vec<CandidateOutcome>,
    /// Index of the first candidate achieving `min_gap > gap_tol`, if any.
    pub chosen: Option<usize>,
}

/// Tries candidate directions on a clustered level: re-solves at
/// `f0 + t r`, measures the gaps the former cluster opened up, and
/// classifies the perturbed spectrum. Returns the first candidate whose
/// minimal gap exceeds `gap_tol`, else records the best gap found.
#[allow(clippy::too_many_arguments)]
pub fn split_search(
    warp: &WarpField,
    fiber: &FiberSpectrum,
    target: &AssembledLevel,
    candidates: &CandidateDirections,
    t: f64,
    gap_tol: f64,
    lambda_max: f64,
    cluster_tol: f64,
) -> Result<PerturbationReport> {
    assert!(t > 0.0, "perturbation size must be positive");
    let tracked: Vec<TrackedAtom> = target
        .sources
        .iter()
        .flat_map(|s| {
            s.base_indices.iter().map(move |&j| TrackedAtom {
                fiber_index: s.fiber_index,
                mu: s.mu,
                base_index: j,
            })
        })
        .collect();
    let specs = candidates.materialize();

    let outcomes = ordered_map(
        specs.into_iter().enumerate().collect::<Vec<_>>(),
        |(index, spec)| -> Result<CandidateOutcome> {
            let r = spec.sample_direction(&warp.mesh)?;
            let perturbed = match warp.perturbed(&r, t) {
                Ok(f) => f,
                Err(_) => {
                    return Ok(CandidateOutcome {
                        index,
                        spec,
                        positivity_ok: false,
                        perturbed_values: vec![],
                        min_gap: None,
                        achieved_split: false,
                        tracked_levels_warped_simple: vec![],
                        all_levels_warped_simple: None,
                    })
                }
            };
            // tracked branches re-solved without cutoff so an atom drifting
            // past lambda_max is still observed
            let mut perturbed_values = Vec::with_capacity(tracked.len());
            for atom in &tracked {
                let dec = eigensolve(&assemble_operator(&perturbed, atom.mu)?, None)?;
                perturbed_values.push(dec.eigenvalues[atom.base_index]);
            }
            let mut min_gap = f64::INFINITY;
            for a in 0..perturbed_values.len() {
                for b in (a + 1)..perturbed_values.len() {
                    min_gap = min_gap.min((perturbed_values[a] - perturbed_values[b]).abs());
                }
            }
            let min_gap = (perturbed_values.len() > 1).then_some(min_gap);

            let family = crate::operator::spectrum_of_family(&perturbed, fiber, lambda_max)?;
            let classified = assemble_spectrum(&family, fiber, lambda_max, cluster_tol)?;
            let tracked_levels_warped_simple: Vec<bool> = tracked
                .iter()
                .map(|atom| {
                    classified
                        .levels
                        .iter()
                        .find(|level| {
                            level.sources.iter().any(|s| {
                                s.fiber_index == atom.fiber_index
                                    && s.base_indices.contains(&atom.base_index)
                            })
                        })
                        .map(|level| level.warped_simple)
                        .unwrap_or(false)
                })
                .collect();
            let all = classified.levels.iter().all(|l| l.warped_simple);
            Ok(CandidateOutcome {
                index,
                spec,
                positivity_ok: true,
                perturbed_values,
                min_gap,
                achieved_split: min_gap.map(|g| g > gap_tol).unwrap_or(false),
                tracked_levels_warped_simple,
                all_levels_warped_simple: Some(all),
            })
        },
    );
    let mut candidates_out = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        candidates_out.push(o?);
    }
    if !candidates_out.is_empty() && candidates_out.iter().all(|c| !c.positivity_ok) {
        return Err(Error::PositivityLost { t });
    }
    let chosen = candidates_out.iter().position(|c| c.achieved_split);
    Ok(PerturbationReport {
        target_lambda: target.lambda,
        tracked,
        t,
        gap_tol,
        cluster_tol,
        lambda_max,
        candidates: candidates_out,
        chosen,
    })
}

/// One traced eigenvalue branch.
#[derive(Debug, Clone, Serialize)]
pub struct CurveBranch {
    pub branch_id: usize,
    pub fiber_index: usize,
    pub mu: f64,
    /// Base index of the branch at the first grid point.
    pub base_index: usize,
    /// lambda at each grid point, matched by eigenvector overlap.
    pub lambdas: Vec<f64>,
}

/// Grid interval on which two branches from different fiber eigenvalues
/// cross (their difference changes sign).
#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub branch_a: usize,
    pub branch_b: usize,
    pub t_lo: f64,
    pub t_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenCurves {
    pub t_grid: Vec<f64>,
    pub branches: Vec<CurveBranch>,
    pub crossings: Vec<Crossing>,
}

/// Padding above the tracked window when matching branches across steps.
const TRACE_PAD: usize = 4;
/// Maximum bisection depth when an overlap match is ambiguous.
const MAX_BISECT: usize = 6;

/// Traces the k lowest eigenvalue curves of the family along
/// `f(t) = f0 + t r` over an ascending grid. Within each fiber branch,
/// consecutive grid points are matched by maximal weighted eigenvector
/// overlap; an ambiguous match bisects the step (re-solving at midpoints) up
/// to [`MAX_BISECT`] times before failing.
pub fn trace_curves(
    warp: &WarpField,
    r: &PerturbationDirection,
    t_grid: &[f64],
    fiber: &FiberSpectrum,
    k: usize,
    lambda_max: f64,
) -> Result<EigenCurves> {
    check_same_grid(warp, r)?;
    assert!(!t_grid.is_empty(), "empty t grid");
    assert!(
        t_grid.windows(2).all(|w| w[0] < w[1]),
        "t grid must be strictly ascending"
    );
    fiber.validate()?;

    // positivity over the whole grid, and the loosest retention bound
    let mut max_f_any = f64::NEG_INFINITY;
    for &t in t_grid {
        let f_t = warp.perturbed(r, t)?;
        max_f_any = max_f_any.max(f_t.max_node_value());
    }
    let retained: Vec<(usize, f64)> = fiber
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.mu / (max_f_any * max_f_any) <= lambda_max)
        .map(|(i, e)| (i, e.mu))
        .collect();
    if retained.is_empty() {
        return Ok(EigenCurves {
            t_grid: t_grid.to_vec(),
            branches: vec![],
            crossings: vec![],
        });
    }

    let solve_at = |t: f64, mu: f64| -> Result<EigenDecomposition> {
        let f_t = warp.perturbed(r, t)?;
        eigensolve(&assemble_operator(&f_t, mu)?, None)
    };

    // solve the whole (t, mu) grid up front; items are independent
    let jobs: Vec<(usize, usize)> = (0..t_grid.len())
        .flat_map(|ti| (0..retained.len()).map(move |mi| (ti, mi)))
        .collect();
    let solved = ordered_map(jobs, |(ti, mi)| {
        solve_at(t_grid[ti], retained[mi].1).map(|dec| (ti, mi, dec))
    });
    let mut grid: Vec<Vec<Option<EigenDecomposition>>> =
        (0..t_grid.len()).map(|_| vec![None; retained.len()]).collect();
    for item in solved {
        let (ti, mi, dec) = item?;
        grid[ti][mi] = Some(dec);
    }

    // select the k lowest branches at the first grid point
    let mut seeds: Vec<(f64, usize, usize)> = Vec::new(); // (lambda, mi, j)
    for (mi, _) in retained.iter().enumerate() {
        let dec = grid[0][mi].as_ref().unwrap();
        for (j, &lam) in dec.eigenvalues.iter().enumerate() {
            seeds.push((lam, mi, j));
        }
    }
    seeds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    seeds.truncate(k);

    // per fiber branch, the tracked window and the running permutation
    let w0 = weight_of(warp);
    let n = warp.mesh.n;
    let mut branches: Vec<CurveBranch> = Vec::new();
    for (branch_id, &(lam0, mi, j0)) in seeds.iter().enumerate() {
        let _ = lam0;
        branches.push(CurveBranch {
            branch_id,
            fiber_index: retained[mi].0,
            mu: retained[mi].1,
            base_index: j0,
            lambdas: Vec::with_capacity(t_grid.len()),
        });
    }

    for (mi, &(_, mu)) in retained.iter().enumerate() {
        let tracked_js: Vec<usize> = seeds
            .iter()
            .filter(|s| s.1 == mi)
            .map(|s| s.2)
            .collect();
        if tracked_js.is_empty() {
            continue;
        }
        let window = (tracked_js.iter().copied().max().unwrap() + 1 + TRACE_PAD).min(n);
        // perm[j] = index of the curve that started at base index j
        let mut perm: Vec<usize> = (0..window).collect();
        for (ti, _) in t_grid.iter().enumerate() {
            let dec = grid[ti][mi].as_ref().unwrap();
            if ti > 0 {
                let prev = grid[ti - 1][mi].as_ref().unwrap();
                let step = match_window(
                    prev,
                    dec,
                    window,
                    &w0,
                    t_grid[ti - 1],
                    t_grid[ti],
                    mu,
                    &|t, m| solve_at(t, m),
                    0,
                )?;
                // compose: the curve at slot j moved to step[j]
                perm = perm.iter().map(|&slot| step[slot]).collect();
            }
            for (seed_idx, seed) in seeds.iter().enumerate() {
                if seed.1 == mi {
                    let slot = perm[seed.2];
                    branches[seed_idx].lambdas.push(dec.eigenvalues[slot]);
                }
            }
        }
    }

    // crossings between branches from different fiber eigenvalues
    let mut crossings = Vec::new();
    for a in 0..branches.len() {
        for b in (a + 1)..branches.len() {
            if branches[a].fiber_index == branches[b].fiber_index {
                continue;
            }
            for ti in 0..t_grid.len() - 1 {
                let d0 = branches[a].lambdas[ti] - branches[b].lambdas[ti];
                let d1 = branches[a].lambdas[ti + 1] - branches[b].lambdas[ti + 1];
                if d0 == 0.0 || d0 * d1 < 0.0 {
                    crossings.push(Crossing {
                        branch_a: a,
                        branch_b: b,
                        t_lo: t_grid[ti],
                        t_hi: t_grid[ti + 1],
                    });
                }
            }
        }
    }

    Ok(EigenCurves {
        t_grid: t_grid.to_vec(),
        branches,
        crossings,
    })
}

/// Matches the lowest `window` branches of `prev` to `next` by overlap.
/// Returns `step` with `step[j]` = index in `next` of the branch that was at
/// index `j` in `prev`. Bisects on ambiguity.
#[allow(clippy::too_many_arguments)]
fn match_window(
    prev: &EigenDecomposition,
    next: &EigenDecomposition,
    window: usize,
    w0: &[f64],
    t_prev: f64,
    t_next: f64,
    mu: f64,
    solve_at: &dyn Fn(f64, f64) -> Result<EigenDecomposition>,
    depth: usize,
) -> Result<Vec<usize>> {
    let w = window.min(prev.len()).min(next.len());
    let mut o = vec![vec![0.0; w]; w];
    for a in 0..w {
        for b in 0..w {
            o[a][b] = overlap(&prev.eigenvectors[a], &next.eigenvectors[b], w0);
        }
    }
    let (perm, min_overlap) = best_assignment(&o);
    if min_overlap >= OVERLAP_THRESHOLD {
        return Ok(perm);
    }
    if depth >= MAX_BISECT {
        return Err(Error::MatchingAmbiguous {
            overlap: min_overlap,
            t_lo: t_prev,
            t_hi: t_next,
        });
    }
    let t_mid = 0.5 * (t_prev + t_next);
    let mid = solve_at(t_mid, mu)?;
    let first = match_window(prev, &mid, window, w0, t_prev, t_mid, mu, solve_at, depth + 1)?;
    let second = match_window(&mid, next, window, w0, t_mid, t_next, mu, solve_at, depth + 1)?;
    Ok(first.iter().map(|&k| second[k]).collect())
}
