//! Discretized compact 1-D base manifolds.
//!
//! Three grids are supported:
//!
//! - circle of circumference `length`: n equispaced nodes, periodic wrap;
//! - interval with Dirichlet ends: n interior nodes, h = length / (n + 1),
//!   zero boundary values;
//! - interval with Neumann ends: n cell centers, h = length / n, reflected
//!   ghost cells (zero flux through the boundary faces).
//!
//! Faces sit midway between neighboring unknowns (plus the two boundary
//! faces on intervals); conservative flux assembly samples coefficients
//! there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Circle,
    Interval,
}

impl std::fmt::Display for BaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaseKind::Circle => write!(f, "circle"),
            BaseKind::Interval => write!(f, "interval"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
    Neumann,
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Periodic => write!(f, "periodic"),
            BoundaryCondition::Dirichlet => write!(f, "dirichlet"),
            BoundaryCondition::Neumann => write!(f, "neumann"),
        }
    }
}

/// Uniform grid on a compact 1-D base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseMesh {
    pub kind: BaseKind,
    pub length: f64,
    pub n: usize,
    pub bc: BoundaryCondition,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl BaseMesh {
    pub fn new(kind: BaseKind, length: f64, n: usize, bc: BoundaryCondition) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::NonPositiveLength { length });
        }
        if n < MIN_NODES {
            return Err(Error::TooCoarse { n, min: MIN_NODES });
        }
        let compatible = matches!(
            (kind, bc),
            (BaseKind::Circle, BoundaryCondition::Periodic)
                | (BaseKind::Interval, BoundaryCondition::Dirichlet)
                | (BaseKind::Interval, BoundaryCondition::Neumann)
        );
        if !compatible {
            return Err(Error::IncompatibleBoundary {
                kind: kind.to_string(),
                bc: bc.to_string(),
            });
        }
        let (h, nodes) = match (kind, bc) {
            (BaseKind::Circle, _) => {
                let h = length / n as f64;
                (h, (0..n).map(|i| i as f64 * h).collect())
            }
            (_, BoundaryCondition::Dirichlet) => {
                let h = length / (n as f64 + 1.0);
                (h, (0..n).map(|i| (i as f64 + 1.0) * h).collect())
            }
            (_, BoundaryCondition::Neumann) => {
                let h = length / n as f64;
                (h, (0..n).map(|i| (i as f64 + 0.5) * h).collect())
            }
            _ => unreachable!(),
        };
        Ok(BaseMesh {
            kind,
            length,
            n,
            bc,
            h,
            nodes,
        })
    }

    pub fn circle(length: f64, n: usize) -> Result<Self> {
        Self::new(BaseKind::Circle, length, n, BoundaryCondition::Periodic)
    }

    pub fn interval(length: f64, n: usize, bc: BoundaryCondition) -> Result<Self> {
        Self::new(BaseKind::Interval, length, n, bc)
    }

    pub fn is_periodic(&self) -> bool {
        self.bc == BoundaryCondition::Periodic
    }

    /// Number of faces: n on the circle (face i sits between nodes i and
    /// i+1 mod n), n + 1 on intervals (including the two boundary faces).
    pub fn face_count(&self) -> usize {
        if self.is_periodic() {
            self.n
        } else {
            self.n + 1
        }
    }

    /// Coordinates of the faces, in the layout documented on
    /// [`BaseMesh::face_count`].
    pub fn face_positions(&self) -> Vec<f64> {
        match self.bc {
            BoundaryCondition::Periodic => {
                (0..self.n).map(|i| (i as f64 + 0.5) * self.h).collect()
            }
            BoundaryCondition::Dirichlet => (0..=self.n)
                .map(|j| (j as f64 + 0.5) * self.h)
                .collect(),
            BoundaryCondition::Neumann => (0..=self.n).map(|j| j as f64 * self.h).collect(),
        }
    }

    /// True when the other mesh represents the identical grid.
    pub fn same_grid(&self, other: &BaseMesh) -> bool {
        self.kind == other.kind
            && self.bc == other.bc
            && self.n == other.n
            && self.length == other.length
    }
}
