//! Quasi-homogeneous random initial point measures.
//!
//! A measure is built from i.i.d. per-unit-interval counts `theta_j` and a
//! placement rule for the points inside each interval `[j, j+1)`; counts and
//! placements are independent across intervals. Homogeneous Poisson measures
//! (Poisson counts, uniform placement) and deterministic lattices
//! (deterministic counts, fixed offsets) are the two extremes.
//!
//! Count laws are restricted to families with all moments finite; the theory
//! needs `E theta^3 < infinity` (a finite second moment is conjectured to
//! suffice, but heavy-tailed counts are deliberately not constructible here).

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable::{StableDensity, StableParams};
use crate::testfn::TestFunction;
use crate::numerics::adaptive_simpson;

/// Law of the per-interval particle count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaLaw {
    Deterministic { k: u32 },
    Poisson { mean: f64 },
    /// `probs[k] = P(theta = k)`.
    Categorical { probs: Vec<f64> },
}

impl ThetaLaw {
    pub fn deterministic(k: u32) -> Self {
        Self::Deterministic { k }
    }

    pub fn poisson(mean: f64) -> Result<Self> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: format!("Poisson mean must be nonnegative, got {mean}"),
            });
        }
        Ok(Self::Poisson { mean })
    }

    pub fn categorical(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "probs",
                reason: "probabilities must be nonnegative and finite".into(),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "probs",
                reason: format!("probabilities must sum to 1, got {total}"),
            });
        }
        Ok(Self::Categorical { probs })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Deterministic { .. } => Ok(()),
            Self::Poisson { mean } => Self::poisson(*mean).map(|_| ()),
            Self::Categorical { probs } => Self::categorical(probs.clone()).map(|_| ()),
        }
    }

    fn moment(&self, p: u32) -> f64 {
        match self {
            Self::Deterministic { k } => (*k as f64).powi(p as i32),
            Self::Poisson { mean } => match p {
                1 => *mean,
                2 => mean * (mean + 1.0),
                3 => mean.powi(3) + 3.0 * mean * mean + mean,
                _ => unreachable!(),
            },
            Self::Categorical { probs } => probs
                .iter()
                .enumerate()
                .map(|(k, pr)| pr * (k as f64).powi(p as i32))
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        (self.moment(2) - self.mean() * self.mean()).max(0.0)
    }

    pub fn third_moment(&self) -> f64 {
        self.moment(3)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            Self::Deterministic { k } => *k,
            Self::Poisson { mean } => {
                if *mean == 0.0 {
                    0
                } else {
                    Poisson::new(*mean).unwrap().sample(rng) as u32
                }
            }
            Self::Categorical { probs } => {
                let mut u: f64 = rng.gen();
                for (k, p) in probs.iter().enumerate() {
                    if u < *p {
                        return k as u32;
                    }
                    u -= p;
                }
                (probs.len() - 1) as u32
            }
        }
    }
}

/// Where the `theta_j` points land inside their interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlacementRule {
    /// All points at the left endpoint `j`.
    LeftEndpoint,
    /// `offsets[k]` lists the k fixed offsets in `[0,1)` used when the
    /// realized count is `k`; a missing or mis-sized list is a construction
    /// error.
    FixedOffsets { offsets: Vec<Vec<f64>> },
    /// Independent uniforms on `[j, j+1)`.
    IidUniform,
}

impl PlacementRule {
    pub fn validate(&self) -> Result<()> {
        if let Self::FixedOffsets { offsets } = self {
            for (k, list) in offsets.iter().enumerate() {
                if list.len() != k {
                    return Err(Error::InvalidParameter {
                        name: "offsets",
                        reason: format!(
                            "count {k} must carry exactly {k} offsets, got {}",
                            list.len()
                        ),
                    });
                }
                if list.iter().any(|&o| !(0.0..1.0).contains(&o)) {
                    return Err(Error::InvalidParameter {
                        name: "offsets",
                        reason: format!("offsets for count {k} must lie in [0, 1)"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Append the positions for a realized count inside `[j, j+1)`.
    pub fn place<R: Rng + ?Sized>(
        &self,
        j: i64,
        count: u32,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let base = j as f64;
        match self {
            Self::LeftEndpoint => {
                for _ in 0..count {
                    out.push(base);
                }
            }
            Self::FixedOffsets { offsets } => {
                let list = offsets
                    .get(count as usize)
                    .filter(|l| l.len() == count as usize)
                    .ok_or(Error::MissingOffsets { count: count as usize })?;
                out.extend(list.iter().map(|o| base + o));
            }
            Self::IidUniform => {
                for _ in 0..count {
                    out.push(base + rng.gen::<f64>());
                }
            }
        }
        Ok(())
    }
}

/// Integer window `[lo, hi)` of unit intervals carrying the truncated measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo >= hi {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: format!("window [{lo}, {hi}) is empty"),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(halfwidth: i64) -> Self {
        Self { lo: -halfwidth, hi: halfwidth }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn intervals(&self) -> impl Iterator<Item = i64> {
        self.lo..self.hi
    }
}

/// One realization of the (window-truncated) initial measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointMeasure {
    pub window: Window,
    /// Sorted atom positions.
    pub atoms: Vec<f64>,
}

impl PointMeasure {
    /// Number of atoms in `[j, j+1)`.
    pub fn count_in(&self, j: i64) -> usize {
        self.atoms
            .iter()
            .filter(|&&a| a >= j as f64 && a < (j + 1) as f64)
            .count()
    }
}

/// Draw a measure: independent `(theta_j, placements)` per unit interval.
pub fn build_measure<R: Rng + ?Sized>(
    theta: &ThetaLaw,
    placement: &PlacementRule,
    window: Window,
    rng: &mut R,
) -> Result<PointMeasure> {
    theta.validate()?;
    placement.validate()?;
    let mut atoms = Vec::new();
    for j in window.intervals() {
        let count = theta.sample(rng);
        placement.place(j, count, rng, &mut atoms)?;
    }
    atoms.sort_by(f64::total_cmp);
    Ok(PointMeasure { window, atoms })
}

// ---------------------------------------------------------------------------
// Mean occupation functionals
// ---------------------------------------------------------------------------

/// Mass of `T_s phi` escaping the window, `int phi(y) P(y + eta_s outside) dy`.
pub fn escape_mass(
    stable: StableParams,
    s: f64,
    phi: &TestFunction,
    window: Window,
) -> f64 {
    let (lo, hi) = (window.lo as f64, window.hi as f64);
    let (a, b) = phi.support_hull(1e-12);
    if s == 0.0 {
        let mut out = 0.0;
        if a < lo {
            out += adaptive_simpson(&|y| phi.eval(y), a, lo.min(b), 1e-12);
        }
        if b > hi {
            out += adaptive_simpson(&|y| phi.eval(y), hi.max(a), b, 1e-12);
        }
        return out;
    }
    let density = StableDensity::cached(stable);
    let scale = s.powf(-1.0 / stable.alpha());
    let f = |y: f64| {
        let up = density.survival_unit((hi - y) * scale);
        let down = density.survival_unit((y - lo) * scale);
        phi.eval(y) * (up + down)
    };
    adaptive_simpson(&f, a, b, 1e-12 * phi.integral().abs().max(1e-6))
}

/// Full-line lattice sum `sum_j T_s phi(j + offset)` by Poisson summation,
/// available when `phi` has a closed-form Fourier transform.
fn lattice_sum_full_line(
    stable: StableParams,
    s: f64,
    phi: &TestFunction,
    offset: f64,
) -> Option<f64> {
    let alpha = stable.alpha();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut sum = phi.fourier_modulus(0.0)?;
    for m in 1..200 {
        let omega = two_pi * m as f64;
        let modulus = phi.fourier_modulus(omega)?;
        let damp = (-s * omega.powf(alpha)).exp();
        let term = 2.0 * modulus * damp * (omega * (offset - phi.center())).cos();
        sum += term;
        if (modulus * damp).abs() < 1e-16 * sum.abs().max(1e-300) {
            break;
        }
    }
    Some(sum)
}

/// Lattice tail `sum_{j outside window} T_s phi(j + offset)`, approximated by
/// the escape integral of the offset-shifted bump. The Euler-Maclaurin
/// correction terms are of the order of the boundary density and negligible
/// at the window sizes produced by the design rule.
fn lattice_tail(
    stable: StableParams,
    s: f64,
    phi: &TestFunction,
    offset: f64,
    window: Window,
) -> f64 {
    let shifted = match *phi {
        TestFunction::GaussianBump { center, width, amplitude } => {
            TestFunction::GaussianBump { center: center - offset, width, amplitude }
        }
        TestFunction::InversePower { .. } => *phi,
    };
    escape_mass(stable, s, &shifted, window)
}

/// `E <N_s, phi>` of the window-truncated system; the placement decides the
/// computational route (exact integral for uniform placement, Poisson
/// summation for lattice placements).
pub fn mean_occupation_mass(
    theta: &ThetaLaw,
    placement: &PlacementRule,
    stable: StableParams,
    phi: &TestFunction,
    s: f64,
    window: Window,
) -> Result<f64> {
    assert!(s >= 0.0, "time must be nonnegative");
    let e_theta = theta.mean();
    match placement {
        PlacementRule::IidUniform => {
            // Exact: sum of interval integrals telescopes to the window integral.
            Ok(e_theta * (phi.integral() - escape_mass(stable, s, phi, window)))
        }
        PlacementRule::LeftEndpoint => {
            let full = lattice_sum_full_line(stable, s, phi, 0.0).ok_or_else(|| {
                Error::Truncation(
                    "lattice mean needs a closed-form Fourier transform for this test function"
                        .into(),
                )
            })?;
            Ok(e_theta * (full - lattice_tail(stable, s, phi, 0.0, window)))
        }
        PlacementRule::FixedOffsets { offsets } => {
            let mut total = 0.0;
            match theta {
                ThetaLaw::Deterministic { k } => {
                    for o in offsets
                        .get(*k as usize)
                        .filter(|l| l.len() == *k as usize)
                        .ok_or(Error::MissingOffsets { count: *k as usize })?
                    {
                        let full = lattice_sum_full_line(stable, s, phi, *o)
                            .ok_or_else(|| Error::Truncation(
                                "lattice mean needs a closed-form Fourier transform".into(),
                            ))?;
                        total += full - lattice_tail(stable, s, phi, *o, window);
                    }
                }
                ThetaLaw::Categorical { probs } => {
                    for (k, p) in probs.iter().enumerate().filter(|(_, p)| **p > 0.0) {
                        let list = offsets
                            .get(k)
                            .filter(|l| l.len() == k)
                            .ok_or(Error::MissingOffsets { count: k })?;
                        for o in list {
                            let full = lattice_sum_full_line(stable, s, phi, *o)
                                .ok_or_else(|| Error::Truncation(
                                    "lattice mean needs a closed-form Fourier transform".into(),
                                ))?;
                            total += p * (full - lattice_tail(stable, s, phi, *o, window));
                        }
                    }
                }
                ThetaLaw::Poisson { .. } => {
                    return Err(Error::Inconsistent(
                        "fixed offsets need a bounded count law (offsets are per-count lists)"
                            .into(),
                    ))
                }
            }
            Ok(total)
        }
    }
}
