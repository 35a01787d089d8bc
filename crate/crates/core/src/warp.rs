//! Warping functions sampled on a base mesh, and the weighted quadrature
//! primitives built on them.
//!
//! A warping function scales the fiber metric and everything downstream of it:
//! the measure on the base is `f^m dx` (m the fiber dimension), operator
//! fluxes carry `f^m` at faces, and the perturbation formulas need `f^(m-1)`,
//! `f^(m-2)` and `f^(m-3)`. [`WarpField`] stores node and face samples once
//! and serves the integer powers on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::BaseMesh;

/// Closed-form (truncated Fourier) or raw-sample description of a function of
/// arclength on the base:
///
/// ```text
/// f(x) = a0 + sum_k cos_coeffs[k-1] cos(2 pi k x / L)
///           + sum_k sin_coeffs[k-1] sin(2 pi k x / L)
/// ```
///
/// The same formula is used on intervals; periodicity is not assumed there,
/// the trigonometric terms are just functions of arclength. Raw samples, when
/// present, take precedence and must match the mesh node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingSpec {
    pub a0: f64,
    #[serde(default)]
    pub cos_coeffs: Vec<f64>,
    #[serde(default)]
    pub sin_coeffs: Vec<f64>,
    #[serde(default)]
    pub raw: Option<Vec<f64>>,
}

impl WarpingSpec {
    pub fn constant(a0: f64) -> Self {
        WarpingSpec {
            a0,
            cos_coeffs: vec![],
            sin_coeffs: vec![],
            raw: None,
        }
    }

    pub fn fourier(a0: f64, cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Self {
        WarpingSpec {
            a0,
            cos_coeffs,
            sin_coeffs,
            raw: None,
        }
    }

    pub fn from_raw(samples: Vec<f64>) -> Self {
        WarpingSpec {
            a0: 0.0,
            cos_coeffs: vec![],
            sin_coeffs: vec![],
            raw: Some(samples),
        }
    }

    /// Closed-form evaluation at arclength `x` on a base of total length
    /// `length`. Ignores `raw`.
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        let omega = 2.0 * std::f64::consts::PI / length;
        let mut v = self.a0;
        for (k, a) in self.cos_coeffs.iter().enumerate() {
            v += a * ((k + 1) as f64 * omega * x).cos();
        }
        for (k, b) in self.sin_coeffs.iter().enumerate() {
            v += b * ((k + 1) as f64 * omega * x).sin();
        }
        v
    }

    fn node_and_face_values(&self, mesh: &BaseMesh) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.raw {
            Some(samples) => {
                if samples.len() != mesh.n {
                    return Err(Error::LengthMismatch {
                        expected: mesh.n,
                        got: samples.len(),
                    });
                }
                if samples.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteInput { what: "raw samples" });
                }
                let nodes = samples.clone();
                // Face values by arithmetic mean of the adjacent nodes; on
                // intervals the two boundary faces copy the nearest node.
                let faces = if mesh.is_periodic() {
                    (0..mesh.n)
                        .map(|i| 0.5 * (nodes[i] + nodes[(i + 1) % mesh.n]))
                        .collect()
                } else {
                    let mut faces = Vec::with_capacity(mesh.n + 1);
                    faces.push(nodes[0]);
                    for i in 0..mesh.n - 1 {
                        faces.push(0.5 * (nodes[i] + nodes[i + 1]));
                    }
                    faces.push(nodes[mesh.n - 1]);
                    faces
                };
                Ok((nodes, faces))
            }
            None => {
                let nodes: Vec<f64> = mesh
                    .nodes
                    .iter()
                    .map(|&x| self.eval(x, mesh.length))
                    .collect();
                let faces: Vec<f64> = mesh
                    .face_positions()
                    .iter()
                    .map(|&x| self.eval(x, mesh.length))
                    .collect();
                if nodes.iter().chain(faces.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteInput {
                        what: "warping spec evaluation",
                    });
                }
                Ok((nodes, faces))
            }
        }
    }

    /// Samples a warping function: positivity is enforced at every node and
    /// face value.
    pub fn sample(&self, mesh: &BaseMesh, m_fiber: usize) -> Result<WarpField> {
        assert!(m_fiber >= 1, "fiber dimension must be at least 1");
        let (node_values, midpoint_values) = self.node_and_face_values(mesh)?;
        check_positive(&node_values, "node")?;
        check_positive(&midpoint_values, "face")?;
        Ok(WarpField {
            node_values,
            midpoint_values,
            m_fiber,
            mesh: mesh.clone(),
        })
    }

    /// Samples a perturbation direction: finite values only, no positivity
    /// requirement.
    pub fn sample_direction(&self, mesh: &BaseMesh) -> Result<PerturbationDirection> {
        let (node_values, midpoint_values) = self.node_and_face_values(mesh)?;
        Ok(PerturbationDirection {
            spec: self.clone(),
            node_values,
            midpoint_values,
            mesh: mesh.clone(),
        })
    }
}

fn check_positive(values: &[f64], location: &'static str) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveWarp {
                index,
                value,
                location,
            });
        }
    }
    Ok(())
}

/// A sampled, strictly positive warping function together with the fiber
/// dimension it scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpField {
    pub node_values: Vec<f64>,
    /// Face samples in the layout of [`BaseMesh::face_positions`].
    pub midpoint_values: Vec<f64>,
    pub m_fiber: usize,
    pub mesh: BaseMesh,
}

impl WarpField {
    /// `f_i^e` at the nodes; `e` may be negative (f is strictly positive).
    pub fn node_power(&self, e: i32) -> Vec<f64> {
        self.node_values.iter().map(|v| v.powi(e)).collect()
    }

    /// `f^e` at the faces.
    pub fn mid_power(&self, e: i32) -> Vec<f64> {
        self.midpoint_values.iter().map(|v| v.powi(e)).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.node_values
            .iter()
            .chain(self.midpoint_values.iter())
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min_value(&self) -> f64 {
        self.node_values
            .iter()
            .chain(self.midpoint_values.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Largest node value; the spectral lower bound `mu / max(f)^2` uses node
    /// samples only (the zero-order coefficient lives on nodes).
    pub fn max_node_value(&self) -> f64 {
        self.node_values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min_node_value(&self) -> f64 {
        self.node_values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// The field `f + t r`, failing with [`Error::PositivityLost`] when any
    /// node or face value drops to zero or below.
    pub fn perturbed(&self, r: &PerturbationDirection, t: f64) -> Result<WarpField> {
        assert!(
            self.mesh.same_grid(&r.mesh),
            "perturbation direction sampled on a different grid"
        );
        let node_values: Vec<f64> = self
            .node_values
            .iter()
            .zip(r.node_values.iter())
            .map(|(f, rv)| f + t * rv)
            .collect();
        let midpoint_values: Vec<f64> = self
            .midpoint_values
            .iter()
            .zip(r.midpoint_values.iter())
            .map(|(f, rv)| f + t * rv)
            .collect();
        if node_values
            .iter()
            .chain(midpoint_values.iter())
            .any(|&v| !(v > 0.0))
        {
            return Err(Error::PositivityLost { t });
        }
        Ok(WarpField {
            node_values,
            midpoint_values,
            m_fiber: self.m_fiber,
            mesh: self.mesh.clone(),
        })
    }
}

/// A sampled perturbation direction `r`; same storage layout as
/// [`WarpField`] but without the positivity requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDirection {
    pub spec: WarpingSpec,
    pub node_values: Vec<f64>,
    pub midpoint_values: Vec<f64>,
    pub mesh: BaseMesh,
}

/// Discrete weighted inner product `<u, v> = sum_i u_i v_i f_i^m h`,
/// realizing the volume weight `f^m dx` on the base.
pub fn weighted_inner(u: &[f64], v: &[f64], warp: &WarpField) -> Result<f64> {
    let n = warp.mesh.n;
    if u.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: u.len(),
        });
    }
    if v.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: v.len(),
        });
    }
    if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput {
            what: "weighted_inner operand",
        });
    }
    let m = warp.m_fiber as i32;
    let h = warp.mesh.h;
    let mut acc = 0.0;
    for i in 0..n {
        acc += u[i] * v[i] * warp.node_values[i].powi(m) * h;
    }
    Ok(acc)
}

/// Face slopes `(u_{i+1} - u_i) / h` in the face layout of the mesh.
/// Dirichlet bases see zero beyond the boundary, Neumann bases see zero flux.
pub fn face_slopes(u: &[f64], mesh: &BaseMesh) -> Result<Vec<f64>> {
    if u.len() != mesh.n {
        return Err(Error::LengthMismatch {
            expected: mesh.n,
            got: u.len(),
        });
    }
    let h = mesh.h;
    let n = mesh.n;
    let slopes = match mesh.bc {
        crate::mesh::BoundaryCondition::Periodic => (0..n)
            .map(|i| (u[(i + 1) % n] - u[i]) / h)
            .collect::<Vec<_>>(),
        crate::mesh::BoundaryCondition::Dirichlet => {
            let mut s = Vec::with_capacity(n + 1);
            s.push(u[0] / h);
            for i in 0..n - 1 {
                s.push((u[i + 1] - u[i]) / h);
            }
            s.push(-u[n - 1] / h);
            s
        }
        crate::mesh::BoundaryCondition::Neumann => {
            let mut s = Vec::with_capacity(n + 1);
            s.push(0.0);
            for i in 0..n - 1 {
                s.push((u[i + 1] - u[i]) / h);
            }
            s.push(0.0);
            s
        }
    };
    Ok(slopes)
}

/// Weighted Dirichlet energy `sum_faces f_face^e ((u_{i+1} - u_i) / h)^2 h`
/// with the boundary handling of [`face_slopes`]. The exponents `m - 1` and
/// `m` are the ones the derivative formulas and the stiffness form use.
pub fn dirichlet_energy(u: &[f64], warp: &WarpField, weight_exponent: i32) -> Result<f64> {
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput {
            what: "dirichlet_energy operand",
        });
    }
    let slopes = face_slopes(u, &warp.mesh)?;
    let w = warp.mid_power(weight_exponent);
    let h = warp.mesh.h;
    Ok(slopes
        .iter()
        .zip(w.iter())
        .map(|(s, fw)| fw * s * s * h)
        .sum())
}
