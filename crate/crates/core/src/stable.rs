//! The standard symmetric alpha-stable Levy process on the line.
//!
//! Normalization: characteristic function `exp(-t |xi|^alpha)`, so the unit
//! density obeys the scaling `p_t(x) = t^{-1/alpha} p_1(t^{-1/alpha} x)` and
//! `p_1(0) = Gamma(1/alpha) / (alpha pi)`.
//!
//! Sampling uses the Chambers-Mallows-Stuck construction with the Gaussian
//! (`alpha = 2`) and Cauchy (`alpha = 1`) cases handled directly. Densities
//! come from numerical Fourier inversion of the characteristic function,
//! cached on splines because the oracles evaluate them millions of times:
//!
//! * `alpha > 1`: the cosine integral `(1/pi) int cos(x xi) exp(-xi^alpha)`
//!   summed between consecutive zeros of the cosine;
//! * `alpha < 1`: the same integral after rotating the contour onto the
//!   positive imaginary axis, which removes the oscillation;
//! * `|x| > 32`: the convergent (alpha < 1) or asymptotic (alpha > 1) tail
//!   series in powers of `|x|^{-alpha}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use statrs::function::erf::erf;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::grid::{apply_fourier_multiplier, Grid, GridFn, DEFAULT_TAIL_TOL};
use crate::numerics::{adaptive_simpson, neumaier_sum, UniformSpline};

/// Stability index of the motion.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct StableParams {
    alpha: f64,
}

impl StableParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must lie in (0, 2], got {alpha}"),
            });
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_gaussian(&self) -> bool {
        self.alpha == 2.0
    }

    pub fn is_cauchy(&self) -> bool {
        self.alpha == 1.0
    }

    /// Density of the motion at time `t` evaluated at `x` (cached).
    pub fn density(&self, t: f64, x: f64) -> f64 {
        StableDensity::cached(*self).density(t, x)
    }
}

/// Uniform variate strictly inside (0, 1); the CMS formulas blow up at the ends.
fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// One increment of the motion over time `dt`: law with characteristic
/// function `exp(-dt |xi|^alpha)`.
pub fn sample_increment<R: Rng + ?Sized>(params: StableParams, dt: f64, rng: &mut R) -> f64 {
    assert!(dt > 0.0, "increment duration must be positive");
    let alpha = params.alpha;
    if alpha == 2.0 {
        let z: f64 = rng.sample(StandardNormal);
        return (2.0 * dt).sqrt() * z;
    }
    if alpha == 1.0 {
        return dt * (PI * (open_unit(rng) - 0.5)).tan();
    }
    dt.powf(1.0 / alpha) * sample_standard_cms(alpha, rng)
}

/// Chambers-Mallows-Stuck draw of the standard symmetric law (`alpha != 1, 2`).
fn sample_standard_cms<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let theta = PI * (open_unit(rng) - 0.5);
    let w = -open_unit(rng).ln();
    let s = (alpha * theta).sin() / theta.cos().powf(1.0 / alpha);
    s * (((1.0 - alpha) * theta).cos() / w).powf((1.0 - alpha) / alpha)
}

// ---------------------------------------------------------------------------
// Density of the unit-time law by Fourier inversion
// ---------------------------------------------------------------------------

/// Where the spline cache hands over to the tail series.
const TAIL_SWITCH: f64 = 32.0;
/// `exp(-41.5)` is below f64 noise for every quantity we integrate.
const EXP_CUTOFF: f64 = 41.5;

pub fn unit_density_at_zero(alpha: f64) -> f64 {
    gamma(1.0 / alpha) / (alpha * PI)
}

/// Cosine-transform inversion for `alpha > 1`, summed between zeros of the
/// cosine so the alternating pieces cancel stably.
fn invert_oscillatory(alpha: f64, x: f64) -> f64 {
    let xi_max = EXP_CUTOFF.powf(1.0 / alpha);
    let f = |xi: f64| (x * xi).cos() * (-xi.powf(alpha)).exp();
    if x * xi_max < 8.0 * PI {
        return adaptive_simpson(&f, 0.0, xi_max, 1e-14) / PI;
    }
    let mut cells = Vec::new();
    let head = PI / (2.0 * x);
    cells.push(adaptive_simpson(&f, 0.0, head.min(xi_max), 1e-15));
    let mut a = head;
    while a < xi_max {
        let b = (a + PI / x).min(xi_max);
        cells.push(adaptive_simpson(&f, a, b, 1e-16));
        a = b;
    }
    neumaier_sum(cells) / PI
}

/// Rotated-contour inversion for `alpha < 1`: with `c = cos(pi alpha / 2)` and
/// `s = sin(pi alpha / 2)`,
/// `p_1(x) = (1/(pi alpha)) int_0^inf u^{1/alpha - 1}
///            exp(-x u^{1/alpha} - c u) sin(s u) du`,
/// valid for x >= 0; non-oscillatory thanks to the exponential envelope.
fn invert_rotated(alpha: f64, x: f64) -> f64 {
    let c = (PI * alpha / 2.0).cos();
    let s = (PI * alpha / 2.0).sin();
    let inv_alpha = 1.0 / alpha;
    let f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let envelope = -x * u.powf(inv_alpha) - c * u;
        if envelope < -700.0 {
            return 0.0;
        }
        u.powf(inv_alpha - 1.0) * envelope.exp() * (s * u).sin()
    };
    let period = PI / s;
    // The x-damping concentrates the integrand near u ~ x^{-alpha}; seed the
    // first period geometrically so adaptive probing cannot overlook a spike
    // much narrower than the period.
    let mut acc = 0.0f64;
    let mut prev = 0.0f64;
    if x > 0.0 {
        let mut edge = (1.0 / x).powf(alpha);
        while edge < period {
            acc += adaptive_simpson(&f, prev, edge, 1e-15);
            prev = edge;
            edge *= 4.0;
        }
    }
    acc += adaptive_simpson(&f, prev, period, 1e-15);
    let mut scale = acc.abs();
    let mut a = period;
    loop {
        let b = a + period;
        let cell = adaptive_simpson(&f, a, b, 1e-15);
        acc += cell;
        scale = scale.max(cell.abs());
        a = b;
        // Envelope bound over the next cell.
        let exponent = c * a + if x > 0.0 { x * a.powf(inv_alpha) } else { 0.0 };
        let bound = (-exponent).exp() * (a + period).powf(inv_alpha - 1.0);
        if exponent > EXP_CUTOFF || bound < 1e-18 * scale.max(1e-300) {
            break;
        }
    }
    acc / (PI * alpha)
}

fn invert_cf(alpha: f64, x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return unit_density_at_zero(alpha);
    }
    if alpha > 1.0 {
        invert_oscillatory(alpha, x)
    } else {
        invert_rotated(alpha, x)
    }
}

/// Series tail of the unit density, `p_1(x) = (1/pi) sum_k (-1)^{k+1}
/// Gamma(alpha k + 1)/k! sin(k pi alpha/2) x^{-alpha k - 1}`.
/// Convergent for `alpha < 1`, asymptotic (stop at the smallest term) for
/// `alpha > 1`.
fn tail_density(alpha: f64, x: f64) -> f64 {
    tail_series(alpha, x, 1.0)
}

/// Series tail of the survival function `P(X > x)`; same series with
/// `Gamma(alpha k)` in place of `Gamma(alpha k + 1)` and `x^{-alpha k}`.
fn tail_survival(alpha: f64, x: f64) -> f64 {
    tail_series(alpha, x, 0.0)
}

fn tail_series(alpha: f64, x: f64, density: f64) -> f64 {
    debug_assert!(x > 1.0);
    let lx = x.ln();
    let mut sum = 0.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..=400u32 {
        let kf = k as f64;
        let sin_term = (kf * PI * alpha / 2.0).sin();
        let ln_mag =
            ln_gamma(alpha * kf + density) - ln_gamma(kf + 1.0) - (alpha * kf + density) * lx;
        let mag = ln_mag.exp();
        if alpha > 1.0 && mag > prev {
            break; // asymptotic regime: truncate at the smallest term
        }
        prev = mag;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * sin_term * mag;
        if mag < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    (sum / PI).max(0.0)
}

// ---------------------------------------------------------------------------
// Cached density with spline interpolation
// ---------------------------------------------------------------------------

/// One spline patch. The spline extends `MARGIN_NODES` beyond the core range
/// on both sides: natural end conditions create an O(h^2) boundary layer that
/// decays geometrically per node, so only the shielded core is ever evaluated.
#[derive(Debug)]
struct Segment {
    core_min: f64,
    core_max: f64,
    spline: UniformSpline,
}

const MARGIN_NODES: usize = 8;

#[derive(Debug)]
enum DensityKind {
    Gaussian,
    Cauchy,
    Numeric {
        /// Patches over [0,1], [1,8], [8,32]; innermost resolves the peak.
        segments: Vec<Segment>,
        /// Rescale of the numeric CDF so it meets the tail series at x = 32.
        cdf_norm: f64,
    },
}

/// Unit-time density/CDF evaluator for one stability index, built once and
/// shared; all methods are `&self` and thread-safe.
#[derive(Debug)]
pub struct StableDensity {
    params: StableParams,
    kind: DensityKind,
}

fn global_cache() -> &'static Mutex<HashMap<u64, Arc<StableDensity>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<StableDensity>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl StableDensity {
    /// Shared evaluator for `params`, built on first use.
    pub fn cached(params: StableParams) -> Arc<StableDensity> {
        let key = params.alpha.to_bits();
        if let Some(hit) = global_cache().lock().unwrap().get(&key) {
            return hit.clone();
        }
        let built = Arc::new(StableDensity::new(params));
        global_cache()
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(built)
            .clone()
    }

    pub fn new(params: StableParams) -> Self {
        let alpha = params.alpha;
        let kind = if alpha == 2.0 {
            DensityKind::Gaussian
        } else if alpha == 1.0 {
            DensityKind::Cauchy
        } else {
            // Peak curvature scale; small alpha has a sharp central spike.
            let scale = (gamma(1.0 / alpha) / gamma(3.0 / alpha)).sqrt();
            let h0 = (scale / 16.0).clamp(1.0 / 4096.0, 1.0 / 64.0);
            let n0 = (1.0 / h0).ceil() as usize + 1;
            let segments = vec![
                build_segment(alpha, 0.0, 1.0, 1.0 / (n0 - 1) as f64, n0),
                build_segment(alpha, 1.0, 8.0, 1.0 / 64.0, 449),
                build_segment(alpha, 8.0, TAIL_SWITCH, 1.0 / 16.0, 385),
            ];
            let raw_cdf: f64 = segments.iter().map(core_integral_full).sum();
            let cdf_at_switch = 0.5 - tail_survival(alpha, TAIL_SWITCH);
            DensityKind::Numeric { segments, cdf_norm: cdf_at_switch / raw_cdf }
        };
        Self { params, kind }
    }

    pub fn params(&self) -> StableParams {
        self.params
    }

    /// Unit-time density `p_1(x)`.
    pub fn density_unit(&self, x: f64) -> f64 {
        let ax = x.abs();
        match &self.kind {
            DensityKind::Gaussian => (-ax * ax / 4.0).exp() / (2.0 * PI.sqrt()),
            DensityKind::Cauchy => 1.0 / (PI * (1.0 + ax * ax)),
            DensityKind::Numeric { segments, .. } => {
                if ax >= TAIL_SWITCH {
                    tail_density(self.params.alpha, ax)
                } else {
                    let seg = segments
                        .iter()
                        .rev()
                        .find(|s| ax >= s.core_min)
                        .unwrap_or(&segments[0]);
                    seg.spline.eval(ax).max(0.0)
                }
            }
        }
    }

    /// Density at time `t` via the self-similarity `p_t(x) = a^{-1/alpha}
    /// p_1(a^{-1/alpha} x)` with `a = t`.
    pub fn density(&self, t: f64, x: f64) -> f64 {
        assert!(t > 0.0, "density requires t > 0");
        let scale = t.powf(-1.0 / self.params.alpha);
        scale * self.density_unit(scale * x)
    }

    /// Unit-time CDF.
    pub fn cdf_unit(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0 - self.cdf_unit(-x);
        }
        match &self.kind {
            DensityKind::Gaussian => 0.5 * (1.0 + erf(x / 2.0)),
            DensityKind::Cauchy => 0.5 + x.atan() / PI,
            DensityKind::Numeric { segments, cdf_norm } => {
                if x >= TAIL_SWITCH {
                    return 1.0 - tail_survival(self.params.alpha, x);
                }
                let mut acc = 0.0;
                for seg in segments {
                    if x >= seg.core_max {
                        acc += core_integral_full(seg);
                    } else if x > seg.core_min {
                        acc += seg.spline.integral_to(x) - seg.spline.integral_to(seg.core_min);
                    }
                }
                0.5 + acc * cdf_norm
            }
        }
    }

    pub fn cdf(&self, t: f64, x: f64) -> f64 {
        assert!(t > 0.0);
        self.cdf_unit(t.powf(-1.0 / self.params.alpha) * x)
    }

    /// Upper tail `P(eta_1 > x)`; accurate deep into the tail.
    pub fn survival_unit(&self, x: f64) -> f64 {
        match &self.kind {
            DensityKind::Gaussian => 0.5 * statrs::function::erf::erfc(x / 2.0),
            _ if x >= TAIL_SWITCH => tail_survival(self.params.alpha, x),
            _ => 1.0 - self.cdf_unit(x),
        }
    }
}

fn build_segment(alpha: f64, core_min: f64, core_max: f64, h: f64, n_core: usize) -> Segment {
    let x_start = core_min - MARGIN_NODES as f64 * h;
    let n = n_core + 2 * MARGIN_NODES;
    let values: Vec<f64> =
        (0..n).map(|i| invert_cf(alpha, x_start + i as f64 * h)).collect();
    Segment { core_min, core_max, spline: UniformSpline::new(x_start, h, values) }
}

fn core_integral_full(seg: &Segment) -> f64 {
    seg.spline.integral_to(seg.core_max) - seg.spline.integral_to(seg.core_min)
}

// ---------------------------------------------------------------------------
// Semigroup and density grids
// ---------------------------------------------------------------------------

/// `T_t f = p_t * f` on the grid, computed spectrally: multiply the DFT of `f`
/// by `exp(-t |omega|^alpha)` and invert. Exact for band-limited periodic
/// extensions; the aliasing check guards the "mass outside the grid" premise.
pub fn semigroup_apply(
    params: StableParams,
    t: f64,
    f: &GridFn,
    aliasing_tol: f64,
) -> Result<GridFn> {
    assert!(t >= 0.0, "semigroup time must be nonnegative");
    f.check_aliasing(aliasing_tol)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let alpha = params.alpha;
    Ok(apply_fourier_multiplier(f, |omega| {
        (-t * omega.abs().powf(alpha)).exp()
    }))
}

/// Convenience wrapper with the default tail tolerance.
pub fn semigroup_apply_default(params: StableParams, t: f64, f: &GridFn) -> Result<GridFn> {
    semigroup_apply(params, t, f, DEFAULT_TAIL_TOL)
}

/// Sampled density `p_t` on a grid, validated against its invariants
/// (nonnegativity, near-unit trapezoid mass, symmetry on symmetric grids).
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub t: f64,
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(params: StableParams, t: f64, grid: Grid, tail_tol: f64) -> Result<Self> {
        if t <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("density grid requires t > 0, got {t}"),
            });
        }
        let density = StableDensity::cached(params);
        let values: Vec<f64> = grid.xs().map(|x| density.density(t, x)).collect();
        let f = GridFn { grid, values };
        let mass = f.integral();
        if mass < 1.0 - tail_tol {
            return Err(Error::Truncation(format!(
                "density grid holds mass {mass:.12}, below 1 - {tail_tol:.1e}; \
                 widen the extent for alpha = {}",
                params.alpha
            )));
        }
        Ok(Self { t, grid, values: f.values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;

    #[test]
    fn rejects_bad_alpha() {
        assert!(StableParams::new(0.0).is_err());
        assert!(StableParams::new(2.1).is_err());
        assert!(StableParams::new(f64::NAN).is_err());
        assert!(StableParams::new(1.3).is_ok());
    }

    #[test]
    fn unit_density_at_zero_closed_forms() {
        // Gaussian with variance 2 and standard Cauchy.
        assert_relative_eq!(unit_density_at_zero(2.0), 1.0 / (2.0 * PI.sqrt()), epsilon = 1e-14);
        assert_relative_eq!(unit_density_at_zero(1.0), 1.0 / PI, epsilon = 1e-14);
    }

    #[test]
    fn numeric_density_matches_closed_form_neighbours() {
        // alpha slightly away from the closed forms should stay close to them.
        let d = StableDensity::new(StableParams::new(1.0 + 1e-6).unwrap());
        for &x in &[0.0, 0.5, 1.0, 3.0, 10.0] {
            assert_relative_eq!(d.density_unit(x), 1.0 / (PI * (1.0 + x * x)), epsilon = 1e-4);
        }
    }

    #[test]
    fn density_spline_consistent_with_direct_inversion() {
        for &alpha in &[0.6, 0.75, 1.5, 1.9] {
            let d = StableDensity::new(StableParams::new(alpha).unwrap());
            for &x in &[0.0, 0.13, 0.9, 1.7, 6.3, 20.0, 31.0] {
                let direct = invert_cf(alpha, x);
                assert_relative_eq!(d.density_unit(x), direct, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn tail_series_continues_the_spline() {
        for &alpha in &[0.5, 0.8, 1.2, 1.7] {
            let d = StableDensity::new(StableParams::new(alpha).unwrap());
            let below = d.density_unit(TAIL_SWITCH - 1e-9);
            let above = d.density_unit(TAIL_SWITCH + 1e-9);
            assert_relative_eq!(below, above, max_relative = 1e-6);
        }
    }

    #[test]
    fn cdf_is_monotone_and_normalized() {
        let d = StableDensity::new(StableParams::new(0.7).unwrap());
        let mut prev = 0.0;
        for i in 0..200 {
            let x = -100.0 + i as f64;
            let c = d.cdf_unit(x);
            assert!(c >= prev - 1e-15, "cdf must be monotone");
            prev = c;
        }
        assert_abs_diff_eq!(d.cdf_unit(0.0), 0.5, epsilon = 1e-12);
        assert!(d.cdf_unit(1e6) > 0.999);
    }

    #[test]
    fn gaussian_increment_variance() {
        let params = StableParams::new(2.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let mut m2 = 0.0;
        for _ in 0..n {
            let v = sample_increment(params, 1.0, &mut rng);
            m2 += v * v;
        }
        let var = m2 / n as f64;
        // Var = 2 for cf exp(-xi^2); SE of the estimate ~ sqrt(2/n)*2.
        assert_abs_diff_eq!(var, 2.0, epsilon = 0.03);
    }

    #[test]
    fn cms_alpha_limit_consistency() {
        // CMS at alpha ~ 2 must look like the Gaussian branch.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut m2 = 0.0;
        for _ in 0..n {
            let v = sample_standard_cms(1.999_999, &mut rng);
            m2 += v * v;
        }
        assert_abs_diff_eq!(m2 / n as f64, 2.0, epsilon = 0.05);
    }

    #[test]
    fn semigroup_preserves_lebesgue_mass() {
        let grid = Grid::symmetric(64.0, 1 << 12);
        let f = GridFn::sample(grid, |x| (-(x - 1.0) * (x - 1.0) / 2.0).exp());
        for &alpha in &[0.7, 1.0, 1.6, 2.0] {
            let params = StableParams::new(alpha).unwrap();
            let out = semigroup_apply(params, 0.8, &f, 1e-6).unwrap();
            assert_abs_diff_eq!(out.integral(), f.integral(), epsilon = 1e-10);
        }
    }

    #[test]
    fn semigroup_rejects_narrow_grid() {
        let grid = Grid::symmetric(4.0, 1 << 8);
        let f = GridFn::sample(grid, |x| (-x * x / 32.0).exp());
        let params = StableParams::new(1.5).unwrap();
        match semigroup_apply(params, 1.0, &f, 1e-8) {
            Err(Error::Aliasing { .. }) => {}
            other => panic!("expected aliasing error, got {other:?}"),
        }
    }

    #[test]
    fn density_grid_invariants() {
        let params = StableParams::new(2.0).unwrap();
        let grid = Grid::symmetric(64.0, 1 << 12);
        let dg = DensityGrid::new(params, 1.0, grid, 1e-8).unwrap();
        assert!(dg.values.iter().all(|&v| v >= 0.0));
        // Symmetric grid: value(x) = value(-x) exactly (node 0 is unpaired).
        let n = grid.n();
        for i in 1..n / 2 {
            assert_eq!(dg.values[i], dg.values[n - i]);
        }
        // Heavy tail at small alpha cannot meet a 1e-8 mass target on [-64, 64].
        let heavy = StableParams::new(0.5).unwrap();
        assert!(matches!(
            DensityGrid::new(heavy, 1.0, grid, 1e-8),
            Err(Error::Truncation(_))
        ));
    }
}
