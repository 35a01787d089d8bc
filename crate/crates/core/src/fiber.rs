//! Fiber spectra in closed form.
//!
//! The fiber only ever enters through its eigenvalue list: each entry is
//! (mu, multiplicity, optional irreducible-representation label). Nothing is
//! solved numerically on the fiber; circles and round spheres have classical
//! spectra, the discrete circle is the exact companion of the 2-D product
//! validator, and arbitrary lists can be supplied directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque tag naming an irreducible real representation and its dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrepLabel {
    pub name: String,
    pub real_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberEntry {
    pub mu: f64,
    pub mult: usize,
    pub label: Option<IrrepLabel>,
}

impl FiberEntry {
    pub fn new(mu: f64, mult: usize) -> Self {
        FiberEntry {
            mu,
            mult,
            label: None,
        }
    }

    pub fn labeled(mu: f64, mult: usize, name: impl Into<String>) -> Self {
        FiberEntry {
            mu,
            mult,
            label: Some(IrrepLabel {
                name: name.into(),
                real_dim: mult,
            }),
        }
    }
}

/// Eigenvalue list of the fiber Laplacian, ascending and duplicate-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSpectrum {
    pub entries: Vec<FiberEntry>,
    pub fiber_dim: usize,
    pub description: String,
}

impl FiberSpectrum {
    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.mult).sum()
    }

    pub fn has_labels(&self) -> bool {
        self.entries.iter().all(|e| e.label.is_some())
    }

    /// Checks the structural invariants: strictly ascending eigenvalues,
    /// nonnegative values, positive multiplicities, and label dimensions
    /// matching multiplicities.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyFiber);
        }
        for e in &self.entries {
            if !(e.mu >= 0.0) || !e.mu.is_finite() {
                return Err(Error::NegativeEigenvalue { mu: e.mu });
            }
            if e.mult == 0 {
                return Err(Error::ZeroMultiplicity { mu: e.mu });
            }
            if let Some(label) = &e.label {
                if label.real_dim != e.mult {
                    return Err(Error::SizeMismatch {
                        detail: format!(
                            "label {} declares dim {} but entry mu = {} has mult {}",
                            label.name, label.real_dim, e.mu, e.mult
                        ),
                    });
                }
            }
        }
        for w in self.entries.windows(2) {
            if !(w[0].mu < w[1].mu) {
                return Err(Error::SizeMismatch {
                    detail: format!("entries not strictly ascending at mu = {}", w[1].mu),
                });
            }
        }
        Ok(())
    }
}

/// Spectrum of a circle fiber of the given circumference, truncated at
/// `mu_max`: mu_k = (2 pi k / circumference)^2, multiplicity 1 for k = 0 and
/// 2 for k >= 1 (the real rotation representations).
pub fn circle_fiber(circumference: f64, mu_max: f64) -> Result<FiberSpectrum> {
    if !(circumference > 0.0) || !circumference.is_finite() {
        return Err(Error::NonPositiveLength {
            length: circumference,
        });
    }
    let mut entries = vec![FiberEntry::labeled(0.0, 1, "rotation_k=0")];
    let mut k = 1u64;
    loop {
        let freq = 2.0 * std::f64::consts::PI * k as f64 / circumference;
        let mu = freq * freq;
        if mu > mu_max {
            break;
        }
        entries.push(FiberEntry::labeled(mu, 2, format!("rotation_k={k}")));
        k += 1;
    }
    let spectrum = FiberSpectrum {
        entries,
        fiber_dim: 1,
        description: format!("circle fiber, circumference {circumference}, mu <= {mu_max}"),
    };
    spectrum.validate()?;
    Ok(spectrum)
}

/// Spectrum of the unit round 2-sphere up to degree `l_max`:
/// mu_l = l(l+1) with multiplicity 2l+1, each level one irreducible
/// representation of the rotation group.
pub fn sphere_fiber(l_max: i64) -> Result<FiberSpectrum> {
    if l_max < 0 {
        return Err(Error::InvalidCutoff {
            what: format!("sphere degree cutoff l_max = {l_max} must be nonnegative"),
        });
    }
    let entries = (0..=l_max)
        .map(|l| {
            let dim = (2 * l + 1) as usize;
            FiberEntry::labeled((l * (l + 1)) as f64, dim, format!("so3_irrep_dim_{dim}"))
        })
        .collect();
    let spectrum = FiberSpectrum {
        entries,
        fiber_dim: 2,
        description: format!("unit round sphere fiber, l <= {l_max}"),
    };
    spectrum.validate()?;
    Ok(spectrum)
}

/// Spectrum of the 3-point periodic discrete Laplacian on `n_f` fiber nodes:
/// mu_k = 2 (1 - cos(2 pi k / n_f)) / h^2 for k = 0..floor(n_f/2), h the
/// fiber spacing. Multiplicity 1 at k = 0 and at k = n_f/2 (even n_f), else
/// 2. The total multiplicity is exactly n_f, which makes assembled spectra
/// directly comparable to the full 2-D product operator.
pub fn discrete_circle_fiber(n_f: usize, circumference: f64) -> Result<FiberSpectrum> {
    if n_f < 4 {
        return Err(Error::TooCoarse { n: n_f, min: 4 });
    }
    if !(circumference > 0.0) || !circumference.is_finite() {
        return Err(Error::NonPositiveLength {
            length: circumference,
        });
    }
    let h = circumference / n_f as f64;
    let mut entries = Vec::with_capacity(n_f / 2 + 1);
    for k in 0..=(n_f / 2) {
        let mu = 2.0 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n_f as f64).cos())
            / (h * h);
        let mult = if k == 0 || (n_f % 2 == 0 && k == n_f / 2) {
            1
        } else {
            2
        };
        entries.push(FiberEntry::labeled(mu, mult, format!("rotation_k={k}")));
    }
    let spectrum = FiberSpectrum {
        entries,
        fiber_dim: 1,
        description: format!("discrete circle fiber, {n_f} nodes, circumference {circumference}"),
    };
    spectrum.validate()?;
    Ok(spectrum)
}

/// Validates and normalizes a user-supplied entry list: sorts ascending and
/// merges duplicate eigenvalues by adding multiplicities. A merge keeps the
/// label only when every merged entry carries the same label and the summed
/// multiplicity still equals its declared dimension; otherwise the combined
/// eigenspace is reducible and the label is dropped.
pub fn custom_fiber(mut entries: Vec<FiberEntry>, fiber_dim: usize) -> Result<FiberSpectrum> {
    if entries.is_empty() {
        return Err(Error::EmptyFiber);
    }
    for e in &entries {
        if !(e.mu >= 0.0) || !e.mu.is_finite() {
            return Err(Error::NegativeEigenvalue { mu: e.mu });
        }
        if e.mult == 0 {
            return Err(Error::ZeroMultiplicity { mu: e.mu });
        }
    }
    entries.sort_by(|a, b| a.mu.partial_cmp(&b.mu).unwrap());
    let mut merged: Vec<FiberEntry> = Vec::with_capacity(entries.len());
    for e in entries {
        match merged.last_mut() {
            Some(last) if last.mu == e.mu => {
                last.mult += e.mult;
                let same_label = last.label == e.label;
                let dim_ok = last
                    .label
                    .as_ref()
                    .map(|l| l.real_dim == last.mult)
                    .unwrap_or(false);
                if !(same_label && dim_ok) {
                    last.label = None;
                }
            }
            _ => merged.push(e),
        }
    }
    let spectrum = FiberSpectrum {
        entries: merged,
        fiber_dim,
        description: "custom fiber".to_string(),
    };
    spectrum.validate()?;
    Ok(spectrum)
}
