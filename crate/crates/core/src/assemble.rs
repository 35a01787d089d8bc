//! Assembly of the warped-product spectrum from the per-mu base branches.
//!
//! Every eigenvalue of the product comes from a pair (mu, j): the j-th base
//! eigenvalue of the weighted operator for fiber eigenvalue mu, contributing
//! the fiber multiplicity of mu. The total multiplicity of a product level
//! is the sum over contributing fiber eigenvalues of
//! `m_L(lambda) * m_F(mu)`.
//!
//! Floating point has no exact coincidence, so "same eigenvalue" means
//! single-linkage clustering with an explicit relative tolerance: adjacent
//! atoms merge while the gap stays below `cluster_tol * (1 + |lambda|)`.
//! Multiplicity totals are stable under small perturbation at cluster level,
//! which is what justifies counting per cluster rather than per exact value.
//!
//! Classification:
//!
//! - a level is *warped-simple* when exactly one fiber eigenvalue feeds it
//!   and does so with base multiplicity 1 (total multiplicity = fiber
//!   multiplicity);
//! - a level is *G-simple* when it is warped-simple and its single source
//!   carries an irreducible-representation label whose real dimension equals
//!   the fiber multiplicity (the eigenspace is one irreducible).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiber::{FiberSpectrum, IrrepLabel};
use crate::operator::{truncation_guard, FamilySpectrum, SkippedMu};

/// Eigenvalue-only view of one family branch; what the assembler actually
/// consumes. Closed-form references use this directly.
#[derive(Debug, Clone, Serialize)]
pub struct BranchEigenvalues {
    pub fiber_index: usize,
    pub mu: f64,
    pub lambdas: Vec<f64>,
}

/// One fiber eigenvalue's contribution to an assembled level.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSource {
    pub fiber_index: usize,
    pub mu: f64,
    /// Base indices j whose eigenvalue lambda_j^mu fell in this cluster.
    pub base_indices: Vec<usize>,
    /// Multiplicity of the level in the base operator for this mu.
    pub m_l: usize,
    /// Fiber multiplicity of mu.
    pub m_f: usize,
    pub label: Option<IrrepLabel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssembledLevel {
    pub lambda: f64,
    pub sources: Vec<LevelSource>,
    pub total_mult: usize,
    pub warped_simple: bool,
    /// Present only when the fiber carries representation labels.
    pub g_simple: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumClassification {
    pub levels: Vec<AssembledLevel>,
    pub cluster_tol: f64,
    pub lambda_max: f64,
    pub skipped: Vec<SkippedMu>,
    pub labels_present: bool,
    /// Why G-simplicity was not evaluated, when it was not.
    pub g_simple_skip_reason: Option<String>,
}

impl SpectrumClassification {
    pub fn total_multiplicity(&self) -> usize {
        self.levels.iter().map(|l| l.total_mult).sum()
    }

    /// The level nearest to `lambda`.
    pub fn level_nearest(&self, lambda: f64) -> Option<&AssembledLevel> {
        self.levels.iter().min_by(|a, b| {
            (a.lambda - lambda)
                .abs()
                .partial_cmp(&(b.lambda - lambda).abs())
                .unwrap()
        })
    }
}

/// Warped-simple flag for one level's sources: a single fiber eigenvalue
/// contributing with base multiplicity 1.
pub fn classify_warped_simple(sources: &[LevelSource]) -> bool {
    sources.len() == 1 && sources[0].m_l == 1
}

/// G-simple flag for one level's sources: warped-simple with the single
/// source labeled by an irreducible of real dimension equal to the fiber
/// multiplicity.
pub fn classify_g_simple(sources: &[LevelSource]) -> bool {
    classify_warped_simple(sources)
        && sources[0]
            .label
            .as_ref()
            .map(|l| l.real_dim == sources[0].m_f)
            .unwrap_or(false)
}

/// Assembles levels from raw branch eigenvalues. `skipped` carries the
/// truncation bookkeeping from the family solve so a report never silently
/// hides fiber eigenvalues that were cut off.
pub fn assemble_from_branches(
    branches: &[BranchEigenvalues],
    fiber: &FiberSpectrum,
    lambda_max: f64,
    cluster_tol: f64,
    skipped: Vec<SkippedMu>,
) -> Result<SpectrumClassification> {
    if !(cluster_tol > 0.0) || !cluster_tol.is_finite() {
        return Err(Error::NonPositiveTolerance { tol: cluster_tol });
    }
    fiber.validate()?;
    for b in branches {
        if b.fiber_index >= fiber.entries.len() {
            return Err(Error::SizeMismatch {
                detail: format!(
                    "branch fiber index {} out of range ({} fiber entries)",
                    b.fiber_index,
                    fiber.entries.len()
                ),
            });
        }
    }

    // one atom per (mu, j) eigenvalue
    struct Atom {
        lambda: f64,
        fiber_index: usize,
        base_index: usize,
    }
    let guard = truncation_guard(lambda_max);
    let mut atoms: Vec<Atom> = Vec::new();
    for b in branches {
        for (j, &lambda) in b.lambdas.iter().enumerate() {
            if lambda <= lambda_max + guard {
                atoms.push(Atom {
                    lambda,
                    fiber_index: b.fiber_index,
                    base_index: j,
                });
            }
        }
    }
    atoms.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .unwrap()
            .then(a.fiber_index.cmp(&b.fiber_index))
            .then(a.base_index.cmp(&b.base_index))
    });

    let mut levels: Vec<AssembledLevel> = Vec::new();
    let mut start = 0;
    while start < atoms.len() {
        let mut end = start + 1;
        while end < atoms.len()
            && atoms[end].lambda - atoms[end - 1].lambda
                <= cluster_tol * (1.0 + atoms[end - 1].lambda.abs())
        {
            end += 1;
        }
        let cluster = &atoms[start..end];

        // level position: fiber-multiplicity-weighted mean of the atoms
        let mut wsum = 0.0;
        let mut lsum = 0.0;
        for a in cluster {
            let w = fiber.entries[a.fiber_index].mult as f64;
            wsum += w;
            lsum += w * a.lambda;
        }
        let lambda = lsum / wsum;

        // group atoms by fiber eigenvalue
        let mut sources: Vec<LevelSource> = Vec::new();
        for a in cluster {
            let entry = &fiber.entries[a.fiber_index];
            match sources.iter_mut().find(|s| s.fiber_index == a.fiber_index) {
                Some(s) => {
                    s.base_indices.push(a.base_index);
                    s.m_l += 1;
                }
                None => sources.push(LevelSource {
                    fiber_index: a.fiber_index,
                    mu: entry.mu,
                    base_indices: vec![a.base_index],
                    m_l: 1,
                    m_f: entry.mult,
                    label: entry.label.clone(),
                }),
            }
        }
        sources.sort_by(|a, b| a.fiber_index.cmp(&b.fiber_index));
        let total_mult = sources.iter().map(|s| s.m_l * s.m_f).sum();
        let warped_simple = classify_warped_simple(&sources);
        let g_simple = fiber.has_labels().then(|| classify_g_simple(&sources));

        if lambda <= lambda_max {
            levels.push(AssembledLevel {
                lambda,
                sources,
                total_mult,
                warped_simple,
                g_simple,
            });
        }
        start = end;
    }

    let labels_present = fiber.has_labels();
    Ok(SpectrumClassification {
        levels,
        cluster_tol,
        lambda_max,
        skipped,
        labels_present,
        g_simple_skip_reason: (!labels_present)
            .then(|| "fiber spectrum carries no representation labels".to_string()),
    })
}

/// Assembles the spectrum of a solved family. `lambda_max` must not exceed
/// the cutoff the family was solved with, otherwise the skip bookkeeping
/// would no longer guarantee complete multiplicities.
pub fn assemble_spectrum(
    family: &FamilySpectrum,
    fiber: &FiberSpectrum,
    lambda_max: f64,
    cluster_tol: f64,
) -> Result<SpectrumClassification> {
    if lambda_max > family.lambda_max {
        return Err(Error::InvalidCutoff {
            what: format!(
                "assembly cutoff {lambda_max} exceeds the family solve cutoff {}",
                family.lambda_max
            ),
        });
    }
    if let Some(first) = family.branches.first() {
        for b in &family.branches {
            if !b.decomposition.mesh.same_grid(&first.decomposition.mesh) {
                return Err(Error::InconsistentFamily {
                    detail: format!(
                        "branch mu = {} solved on a different grid than mu = {}",
                        b.mu, first.mu
                    ),
                });
            }
        }
    }
    let branches: Vec<BranchEigenvalues> = family
        .branches
        .iter()
        .map(|b| BranchEigenvalues {
            fiber_index: b.fiber_index,
            mu: b.mu,
            lambdas: b.decomposition.eigenvalues.clone(),
        })
        .collect();
    assemble_from_branches(
        &branches,
        fiber,
        lambda_max,
        cluster_tol,
        family.skipped.clone(),
    )
}

/// Closed-form branches of the flat product (f = 1) over a circle base:
/// lambda = (2 pi j / length)^2 + mu, each j > 0 twice. Reference object for
/// cross-checking assembled spectra without any discretization error.
pub fn flat_circle_branches(
    base_length: f64,
    fiber: &FiberSpectrum,
    lambda_max: f64,
) -> Vec<BranchEigenvalues> {
    let guard = truncation_guard(lambda_max);
    let mut out = Vec::new();
    for (fiber_index, entry) in fiber.entries.iter().enumerate() {
        if entry.mu > lambda_max + guard {
            continue;
        }
        let mut lambdas = vec![entry.mu];
        let mut j = 1u64;
        loop {
            let base = (2.0 * std::f64::consts::PI * j as f64 / base_length).powi(2);
            let lambda = base + entry.mu;
            if lambda > lambda_max + guard {
                break;
            }
            lambdas.push(lambda);
            lambdas.push(lambda);
            j += 1;
        }
        out.push(BranchEigenvalues {
            fiber_index,
            mu: entry.mu,
            lambdas,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{circle_fiber, discrete_circle_fiber, FiberEntry};
    use crate::mesh::BaseMesh;
    use crate::operator::spectrum_of_family;
    use crate::warp::WarpingSpec;
    use std::f64::consts::PI;

    fn flat_torus(lambda_max: f64) -> SpectrumClassification {
        let fiber = circle_fiber(2.0 * PI, lambda_max).unwrap();
        let branches = flat_circle_branches(2.0 * PI, &fiber, lambda_max);
        assemble_from_branches(&branches, &fiber, lambda_max, 1e-9, vec![]).unwrap()
    }

    /// Brute-force lattice count of j^2 + k^2 = target over signed pairs.
    fn lattice_count(target: i64) -> usize {
        let bound = (target as f64).sqrt() as i64 + 1;
        let mut count = 0;
        for j in -bound..=bound {
            for k in -bound..=bound {
                if j * j + k * k == target {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn flat_torus_multiplicities_match_lattice_count() {
        let spec = flat_torus(10.0);
        for target in [0i64, 1, 2, 4, 5, 8, 9, 10] {
            let level = spec.level_nearest(target as f64).unwrap();
            assert!((level.lambda - target as f64).abs() < 1e-9);
            assert_eq!(
                level.total_mult,
                lattice_count(target),
                "level {target}: {:?}",
                level.sources
            );
        }
        assert_eq!(spec.level_nearest(0.0).unwrap().total_mult, 1);
        assert_eq!(spec.level_nearest(5.0).unwrap().total_mult, 8);
    }

    #[test]
    fn flat_torus_level_one_sources() {
        let spec = flat_torus(10.0);
        let level = spec.level_nearest(1.0).unwrap();
        // mu = 0 contributes j = +-1 (m_l = 2, m_f = 1); mu = 1 contributes
        // j = 0 (m_l = 1, m_f = 2): total 4, not warped-simple
        assert_eq!(level.total_mult, 4);
        assert!(!level.warped_simple);
        assert_eq!(level.sources.len(), 2);
        let s0 = &level.sources[0];
        let s1 = &level.sources[1];
        assert_eq!((s0.m_l, s0.m_f), (2, 1));
        assert_eq!((s1.m_l, s1.m_f), (1, 2));
    }

    #[test]
    fn warped_simple_classification_rules() {
        let entry = |fi, mu, m_l, m_f, label: Option<&str>| LevelSource {
            fiber_index: fi,
            mu,
            base_indices: (0..m_l).collect(),
            m_l,
            m_f,
            label: label.map(|name| IrrepLabel {
                name: name.to_string(),
                real_dim: m_f,
            }),
        };
        // single source, m_l = 1: warped-simple with total mult = m_f
        let src = vec![entry(1, 1.0, 1, 2, None)];
        assert!(classify_warped_simple(&src));
        // m_l != 1: not warped-simple
        assert!(!classify_warped_simple(&[entry(0, 0.0, 2, 1, None)]));
        // two sources: not warped-simple
        assert!(!classify_warped_simple(&[
            entry(0, 0.0, 1, 1, None),
            entry(1, 1.0, 1, 2, None)
        ]));
        // g-simple: labeled irreducible of matching dimension
        assert!(classify_g_simple(&[entry(1, 2.0, 1, 3, Some("so3_irrep_dim_3"))]));
        assert!(classify_g_simple(&[entry(1, 1.0, 1, 2, Some("rotation_k=1"))]));
        // unlabeled source is never g-simple
        assert!(!classify_g_simple(&[entry(1, 1.0, 1, 2, None)]));
    }

    #[test]
    fn discrete_completeness_sums_to_grid_size() {
        let n_b = 12;
        let n_f = 8;
        let mesh = BaseMesh::circle(2.0 * PI, n_b).unwrap();
        let warp = WarpingSpec::fourier(2.0, vec![1.0], vec![])
            .sample(&mesh, 1)
            .unwrap();
        let fiber = discrete_circle_fiber(n_f, 2.0 * PI).unwrap();
        let family = spectrum_of_family(&warp, &fiber, f64::INFINITY).unwrap();
        let spec = assemble_spectrum(&family, &fiber, f64::INFINITY, 1e-9).unwrap();
        assert_eq!(spec.total_multiplicity(), n_b * n_f);
    }

    #[test]
    fn flat_numeric_assembly_matches_closed_form_multiset() {
        let n_b = 16;
        let mesh = BaseMesh::circle(2.0 * PI, n_b).unwrap();
        let warp = WarpingSpec::constant(1.0).sample(&mesh, 1).unwrap();
        let fiber = circle_fiber(2.0 * PI, 6.0).unwrap();
        let family = spectrum_of_family(&warp, &fiber, 4.0).unwrap();
        let spec = assemble_spectrum(&family, &fiber, 4.0, 1e-7).unwrap();
        // reference: base discrete symbols + mu, brute-force multiset
        let h = mesh.h;
        let mut reference: Vec<f64> = Vec::new();
        for entry in &fiber.entries {
            if entry.mu / (warp.max_node_value().powi(2)) > 4.0 {
                continue;
            }
            for j in 0..n_b {
                let base = 2.0 * (1.0 - (2.0 * PI * j as f64 / n_b as f64).cos()) / (h * h);
                let lam = base + entry.mu;
                if lam <= 4.0 + 1e-6 {
                    for _ in 0..entry.mult {
                        reference.push(lam);
                    }
                }
            }
        }
        reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut assembled_expanded: Vec<f64> = Vec::new();
        for level in &spec.levels {
            for _ in 0..level.total_mult {
                assembled_expanded.push(level.lambda);
            }
        }
        assert_eq!(assembled_expanded.len(), reference.len());
        for (a, b) in assembled_expanded.iter().zip(reference.iter()) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn recount_oracle_agrees_with_assembler() {
        // independent recount: for each level, count atoms within the
        // cluster window directly from the raw branches
        let lambda_max = 12.0;
        let fiber = circle_fiber(2.0 * PI, lambda_max).unwrap();
        let branches = flat_circle_branches(2.0 * PI, &fiber, lambda_max);
        let tol = 1e-9;
        let spec =
            assemble_from_branches(&branches, &fiber, lambda_max, tol, vec![]).unwrap();
        for level in &spec.levels {
            let mut recount = 0;
            for b in &branches {
                let m_f = fiber.entries[b.fiber_index].mult;
                recount += b
                    .lambdas
                    .iter()
                    .filter(|&&l| (l - level.lambda).abs() <= tol * (1.0 + level.lambda.abs()))
                    .count()
                    * m_f;
            }
            assert_eq!(recount, level.total_mult, "level {}", level.lambda);
        }
    }

    #[test]
    fn enlarging_tolerance_never_increases_level_count() {
        let n_b = 12;
        let mesh = BaseMesh::circle(2.0 * PI, n_b).unwrap();
        let warp = WarpingSpec::fourier(2.0, vec![0.8], vec![0.3])
            .sample(&mesh, 1)
            .unwrap();
        let fiber = circle_fiber(2.0 * PI, 20.0).unwrap();
        let family = spectrum_of_family(&warp, &fiber, 6.0).unwrap();
        let mut previous = usize::MAX;
        for tol in [1e-12, 1e-9, 1e-6, 1e-3, 1e-1, 1.0] {
            let spec = assemble_spectrum(&family, &fiber, 6.0, tol).unwrap();
            assert!(spec.levels.len() <= previous, "tol {tol}");
            previous = spec.levels.len();
        }
    }

    #[test]
    fn rejects_bad_tolerance_and_oversized_cutoff() {
        let fiber = circle_fiber(2.0 * PI, 2.0).unwrap();
        let branches = flat_circle_branches(2.0 * PI, &fiber, 2.0);
        assert!(matches!(
            assemble_from_branches(&branches, &fiber, 2.0, 0.0, vec![]),
            Err(Error::NonPositiveTolerance { .. })
        ));
        let mesh = BaseMesh::circle(2.0 * PI, 8).unwrap();
        let warp = WarpingSpec::constant(1.0).sample(&mesh, 1).unwrap();
        let family = spectrum_of_family(&warp, &fiber, 2.0).unwrap();
        assert!(matches!(
            assemble_spectrum(&family, &fiber, 5.0, 1e-7),
            Err(Error::InvalidCutoff { .. })
        ));
    }

    #[test]
    fn mixed_grid_family_is_rejected() {
        let fiber = circle_fiber(2.0 * PI, 2.0).unwrap();
        let mesh_a = BaseMesh::circle(2.0 * PI, 8).unwrap();
        let mesh_b = BaseMesh::circle(2.0 * PI, 12).unwrap();
        let warp_a = WarpingSpec::constant(1.0).sample(&mesh_a, 1).unwrap();
        let warp_b = WarpingSpec::constant(1.0).sample(&mesh_b, 1).unwrap();
        let fam_a = spectrum_of_family(&warp_a, &fiber, 2.0).unwrap();
        let fam_b = spectrum_of_family(&warp_b, &fiber, 2.0).unwrap();
        let mut mixed = fam_a.clone();
        mixed.branches[1] = fam_b.branches[1].clone();
        assert!(matches!(
            assemble_spectrum(&mixed, &fiber, 2.0, 1e-7),
            Err(Error::InconsistentFamily { .. })
        ));
    }

    #[test]
    fn duplicate_label_sources_are_not_g_simple() {
        // two sources with identical labels: the eigenspace is two copies of
        // the same irreducible, hence reducible
        let fiber = crate::fiber::custom_fiber(
            vec![
                FiberEntry::labeled(0.0, 1, "trivial"),
                FiberEntry::labeled(1.0, 2, "sigma"),
                FiberEntry::labeled(2.0, 2, "sigma"),
            ],
            1,
        )
        .unwrap();
        let branches = vec![
            BranchEigenvalues {
                fiber_index: 1,
                mu: 1.0,
                lambdas: vec![3.0],
            },
            BranchEigenvalues {
                fiber_index: 2,
                mu: 2.0,
                lambdas: vec![3.0 + 1e-12],
            },
        ];
        let spec = assemble_from_branches(&branches, &fiber, 5.0, 1e-9, vec![]).unwrap();
        assert_eq!(spec.levels.len(), 1);
        assert!(!spec.levels[0].warped_simple);
        assert_eq!(spec.levels[0].g_simple, Some(false));
        assert_eq!(spec.levels[0].total_mult, 4);
    }
}
