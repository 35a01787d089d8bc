//! Independent 2-D discretization of the warped product `B x_f S^1`.
//!
//! For a circle fiber (m = 1) the product Laplacian is
//! `f^(-1) (f u_x)_x + f^(-2) u_yy`; multiplying through by the volume
//! weight `f` gives the symmetric pencil on the tensor grid:
//!
//! - base-direction fluxes `f_face` between column neighbors,
//! - fiber-direction fluxes `f_i^(-1)` between row neighbors,
//! - weight `W = diag(f_i h_x h_y)`.
//!
//! On the tensor grid the separation of variables is exact: every product
//! eigenvalue is a base eigenvalue of the 1-D pencil taken at a *discrete*
//! fiber eigenvalue. Comparing the full 2-D spectrum against the assembled
//! one with the discrete fiber therefore tests the assembly path to
//! eigensolver roundoff, not to discretization error.

use serde::Serialize;

use crate::eigen::{self, SymMat};
use crate::error::{Error, Result};
use crate::fiber::discrete_circle_fiber;
use crate::operator::{assemble_operator, eigensolve_values};
use crate::par::ordered_map;
use crate::warp::WarpField;

/// Dense-solve budget for the tensor grid.
pub const PRODUCT_BUDGET: usize = 4096;

/// The 2-D pencil (K2, W2) on the `n_b x n_f` tensor grid; row-major index
/// `i * n_f + j` with `i` the base node and `j` the fiber node.
#[derive(Debug, Clone)]
pub struct ProductOperator {
    stiffness: SymMat,
    weight: Vec<f64>,
    pub n_b: usize,
    pub n_f: usize,
    pub fiber_circumference: f64,
    pub warp: WarpField,
}

impl ProductOperator {
    pub fn stiffness(&self) -> &SymMat {
        &self.stiffness
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }
}

/// Assembles the full product operator. The warp must carry `m_fiber = 1`
/// (circle fiber); larger fiber dimensions are validated through closed
/// forms instead of a 3-D grid.
pub fn assemble_full_product(
    warp: &WarpField,
    n_f: usize,
    fiber_circumference: f64,
) -> Result<ProductOperator> {
    assert_eq!(warp.m_fiber, 1, "the 2-D validator needs a circle fiber");
    if n_f < 4 {
        return Err(Error::TooCoarse { n: n_f, min: 4 });
    }
    if !(fiber_circumference > 0.0) {
        return Err(Error::NonPositiveLength {
            length: fiber_circumference,
        });
    }
    let n_b = warp.mesh.n;
    let size = n_b * n_f;
    if size > PRODUCT_BUDGET {
        return Err(Error::BudgetExceeded {
            size,
            max: PRODUCT_BUDGET,
        });
    }
    let hx = warp.mesh.h;
    let hy = fiber_circumference / n_f as f64;
    let f_face = &warp.midpoint_values;
    let f_inv: Vec<f64> = warp.node_values.iter().map(|f| 1.0 / f).collect();

    let idx = |i: usize, j: usize| i * n_f + j;
    let mut k = SymMat::zeros(size);

    // base-direction fluxes, mirroring the 1-D assembly per fiber row
    use crate::mesh::BoundaryCondition::*;
    for j in 0..n_f {
        match warp.mesh.bc {
            Periodic => {
                for face in 0..n_b {
                    let a = idx(face, j);
                    let b = idx((face + 1) % n_b, j);
                    let c = f_face[face] * hy / hx;
                    k.add_sym(a, a, c);
                    k.add_sym(b, b, c);
                    k.add_sym(a, b, -c);
                }
            }
            Dirichlet => {
                k.add_sym(idx(0, j), idx(0, j), f_face[0] * hy / hx);
                k.add_sym(idx(n_b - 1, j), idx(n_b - 1, j), f_face[n_b] * hy / hx);
                for face in 1..n_b {
                    let a = idx(face - 1, j);
                    let b = idx(face, j);
                    let c = f_face[face] * hy / hx;
                    k.add_sym(a, a, c);
                    k.add_sym(b, b, c);
                    k.add_sym(a, b, -c);
                }
            }
            Neumann => {
                for face in 1..n_b {
                    let a = idx(face - 1, j);
                    let b = idx(face, j);
                    let c = f_face[face] * hy / hx;
                    k.add_sym(a, a, c);
                    k.add_sym(b, b, c);
                    k.add_sym(a, b, -c);
                }
            }
        }
    }
    // fiber-direction fluxes (periodic)
    for i in 0..n_b {
        let c = f_inv[i] * hx / hy;
        for face in 0..n_f {
            let a = idx(i, face);
            let b = idx(i, (face + 1) % n_f);
            k.add_sym(a, a, c);
            k.add_sym(b, b, c);
            k.add_sym(a, b, -c);
        }
    }

    let mut weight = vec![0.0; size];
    for i in 0..n_b {
        for j in 0..n_f {
            weight[idx(i, j)] = warp.node_values[i] * hx * hy;
        }
    }
    Ok(ProductOperator {
        stiffness: k,
        weight,
        n_b,
        n_f,
        fiber_circumference,
        warp: warp.clone(),
    })
}

/// All eigenvalues of the product pencil, ascending (values-only solve).
pub fn product_eigenvalues(op: &ProductOperator) -> Result<Vec<f64>> {
    let size = op.dim();
    let inv_sqrt_w: Vec<f64> = op.weight.iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut m = SymMat::zeros(size);
    for i in 0..size {
        for j in 0..size {
            m.set(i, j, op.stiffness.at(i, j) * inv_sqrt_w[i] * inv_sqrt_w[j]);
        }
    }
    let out = eigen::solve_dense(&m, false)?;
    Ok(out.values)
}

/// The assembled-side reference: every base eigenvalue of the pencil at
/// every *discrete* fiber eigenvalue, expanded by fiber multiplicity and
/// sorted. This is the exact multiset the 2-D operator must reproduce.
pub fn assembled_discrete_multiset(
    warp: &WarpField,
    n_f: usize,
    fiber_circumference: f64,
) -> Result<Vec<f64>> {
    let fiber = discrete_circle_fiber(n_f, fiber_circumference)?;
    let jobs: Vec<(f64, usize)> = fiber.entries.iter().map(|e| (e.mu, e.mult)).collect();
    let solved = ordered_map(jobs, |(mu, mult)| -> Result<(Vec<f64>, usize)> {
        let values = eigensolve_values(&assemble_operator(warp, mu)?)?;
        Ok((values, mult))
    });
    let mut all = Vec::with_capacity(warp.mesh.n * n_f);
    for item in solved {
        let (values, mult) = item?;
        for v in values {
            for _ in 0..mult {
                all.push(v);
            }
        }
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(all)
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelDeviation {
    pub index: usize,
    pub full: f64,
    pub assembled: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub max_abs_dev: f64,
    pub k: usize,
    pub pass: bool,
    /// Pass criterion: deviation <= tol_scale * (1 + lambda) per level.
    pub tol_scale: f64,
    pub per_level: Vec<LevelDeviation>,
}

/// Compares the sorted full 2-D spectrum against the sorted assembled
/// multiset over the first `k` levels.
pub fn validate_separation(
    product: &ProductOperator,
    assembled: &[f64],
    k: usize,
) -> Result<ValidationReport> {
    let full = product_eigenvalues(product)?;
    if full.len() < k || assembled.len() < k {
        return Err(Error::SizeMismatch {
            detail: format!(
                "need {k} levels, have {} (full) and {} (assembled)",
                full.len(),
                assembled.len()
            ),
        });
    }
    let tol_scale = 1e-8;
    let mut per_level = Vec::with_capacity(k);
    let mut max_abs_dev = 0.0_f64;
    let mut pass = true;
    for index in 0..k {
        let deviation = (full[index] - assembled[index]).abs();
        max_abs_dev = max_abs_dev.max(deviation);
        if deviation > tol_scale * (1.0 + full[index].abs()) {
            pass = false;
        }
        per_level.push(LevelDeviation {
            index,
            full: full[index],
            assembled: assembled[index],
            deviation,
        });
    }
    Ok(ValidationReport {
        max_abs_dev,
        k,
        pass,
        tol_scale,
        per_level,
    })
}
