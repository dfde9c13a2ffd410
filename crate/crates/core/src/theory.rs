//! Closed-form limit theory: regime classification, limit constants,
//! covariance kernels, the potential operator, and exact finite-time moment
//! oracles for the particle systems.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::measure::ThetaLaw;
use crate::numerics::adaptive_simpson;
use crate::stable::{semigroup_apply, StableParams};
use crate::testfn::TestFunction;

// ---------------------------------------------------------------------------
// Covariance kernels
// ---------------------------------------------------------------------------

/// Sub-fractional Brownian motion covariance
/// `C^H(s,t) = s^{2H} + t^{2H} - ((s+t)^{2H} + |s-t|^{2H})/2`.
pub fn subfbm_cov(h: f64, s: f64, t: f64) -> f64 {
    check_kernel_args(h, s, t);
    let p = 2.0 * h;
    s.powf(p) + t.powf(p) - 0.5 * ((s + t).powf(p) + (s - t).abs().powf(p))
}

/// Covariance of the companion process,
/// `Q^H(s,t) = sgn(2H-1) ((s+t)^{2H} - s^{2H} - t^{2H}) / 2`; identically zero
/// at `H = 1/2`.
pub fn theta_cov(h: f64, s: f64, t: f64) -> f64 {
    check_kernel_args(h, s, t);
    if h == 0.5 {
        return 0.0;
    }
    let p = 2.0 * h;
    0.5 * (p - 1.0).signum() * ((s + t).powf(p) - s.powf(p) - t.powf(p))
}

/// Covariance of the mixture `sqrt(E theta) zeta^H + sqrt(Var theta) theta^H`.
pub fn xi_cov(e_theta: f64, var_theta: f64, h: f64, s: f64, t: f64) -> f64 {
    assert!(e_theta >= 0.0 && var_theta >= 0.0);
    e_theta * subfbm_cov(h, s, t) + var_theta * theta_cov(h, s, t)
}

/// Fractional Brownian motion covariance with unit variance at t = 1.
pub fn fbm_cov(h: f64, s: f64, t: f64) -> f64 {
    check_kernel_args(h, s, t);
    let p = 2.0 * h;
    0.5 * (s.powf(p) + t.powf(p) - (s - t).abs().powf(p))
}

fn check_kernel_args(h: f64, s: f64, t: f64) {
    assert!(h > 0.0 && h < 1.0, "Hurst parameter must lie in (0,1), got {h}");
    assert!(s >= 0.0 && t >= 0.0, "kernel times must be nonnegative");
}

/// Covariance between unit increments `P(a+1)-P(a)` and `P(a+tau+1)-P(a+tau)`
/// of a process with covariance kernel `k`.
pub fn increment_cov<K: Fn(f64, f64) -> f64>(k: K, a: f64, tau: f64) -> f64 {
    k(a + 1.0, a + tau + 1.0) - k(a + 1.0, a + tau) - k(a, a + tau + 1.0) + k(a, a + tau)
}

// ---------------------------------------------------------------------------
// Regimes and limit constants
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    /// Non-branching, `alpha > 1`: long-memory mixture limit.
    NbLow,
    /// Non-branching, `alpha = 1`: Brownian limit with `sqrt(T log T)`.
    NbCritical,
    /// Non-branching, `alpha < 1`: distribution-valued Wiener limit.
    NbHigh,
    /// Branching, `1/2 < alpha < 1`: sub-fractional limit.
    BLow,
    /// Branching, `alpha = 1/2`: Brownian limit with `sqrt(T log T)`.
    BCritical,
    /// Branching, `alpha < 1/2`: distribution-valued Wiener limit.
    BHigh,
    /// Branching with `alpha >= 1` needs high-density scaling; out of scope.
    BUnsupported,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NbLow => "NB_low",
            Self::NbCritical => "NB_critical",
            Self::NbHigh => "NB_high",
            Self::BLow => "B_low",
            Self::BCritical => "B_critical",
            Self::BHigh => "B_high",
            Self::BUnsupported => "B_unsupported",
        }
    }
}

/// Which theorem case applies, with its Hurst parameter, norming and constant.
#[derive(Debug, Clone, Serialize)]
pub struct Regime {
    pub label: RegimeLabel,
    pub alpha: f64,
    pub branching: bool,
    pub rate_v: f64,
    pub e_theta: f64,
    pub var_theta: f64,
    /// Hurst-type parameter for the low regimes, `1/2` for the critical ones.
    pub hurst: Option<f64>,
    /// Limit constant `K_1..K_4`; absent for the Wiener (high) regimes.
    pub k_const: Option<f64>,
}

/// `K_1`/`K_3` radical shared by the low regimes (with `E theta * V = 1` it is
/// exactly `K_1`).
fn low_regime_radical(alpha: f64, h: f64) -> f64 {
    (gamma(2.0 - 2.0 * h) / (2.0 * PI * alpha * h * (2.0 * h - 1.0))).sqrt()
}

/// Decide which part of the limit theorems governs `(alpha, branching)` and
/// evaluate its constants.
pub fn classify_regime(
    alpha: f64,
    branching: bool,
    theta: &ThetaLaw,
    rate_v: f64,
) -> Result<Regime> {
    let params = StableParams::new(alpha)?;
    if rate_v < 0.0 {
        return Err(Error::InvalidParameter {
            name: "rate_v",
            reason: format!("branching rate must be nonnegative, got {rate_v}"),
        });
    }
    let alpha = params.alpha();
    let e_theta = theta.mean();
    let var_theta = theta.variance();
    let v = if branching { rate_v } else { 0.0 };

    let (label, hurst, k_const) = if !branching {
        if alpha > 1.0 {
            let h = 1.0 - 1.0 / (2.0 * alpha);
            (RegimeLabel::NbLow, Some(h), Some(low_regime_radical(alpha, h)))
        } else if alpha == 1.0 {
            (RegimeLabel::NbCritical, Some(0.5), Some((2.0 * e_theta / PI).sqrt()))
        } else {
            (RegimeLabel::NbHigh, None, None)
        }
    } else if alpha >= 1.0 {
        (RegimeLabel::BUnsupported, None, None)
    } else if alpha > 0.5 {
        let h = (3.0 - 1.0 / alpha) / 2.0;
        (
            RegimeLabel::BLow,
            Some(h),
            Some((e_theta * v).sqrt() * low_regime_radical(alpha, h)),
        )
    } else if alpha == 0.5 {
        (RegimeLabel::BCritical, Some(0.5), Some((2.0 * v * e_theta / PI).sqrt()))
    } else {
        (RegimeLabel::BHigh, None, None)
    };

    Ok(Regime {
        label,
        alpha,
        branching,
        rate_v: v,
        e_theta,
        var_theta,
        hurst,
        k_const,
    })
}

impl Regime {
    pub fn is_supported(&self) -> bool {
        self.label != RegimeLabel::BUnsupported
    }

    pub fn is_high(&self) -> bool {
        matches!(self.label, RegimeLabel::NbHigh | RegimeLabel::BHigh)
    }

    /// Symbolic norming form.
    pub fn norming_symbol(&self) -> &'static str {
        match self.label {
            RegimeLabel::NbLow => "T^(1 - 1/(2 alpha))",
            RegimeLabel::NbCritical | RegimeLabel::BCritical => "sqrt(T log T)",
            RegimeLabel::NbHigh | RegimeLabel::BHigh => "sqrt(T)",
            RegimeLabel::BLow => "T^((3 - 1/alpha)/2)",
            RegimeLabel::BUnsupported => "unsupported",
        }
    }

    /// Norming `F_T` evaluated at horizon `T` (natural logarithm).
    pub fn norming(&self, t: f64) -> f64 {
        assert!(t > 1.0, "norming needs T > 1");
        match self.label {
            RegimeLabel::NbLow => t.powf(1.0 - 1.0 / (2.0 * self.alpha)),
            RegimeLabel::NbCritical | RegimeLabel::BCritical => (t * t.ln()).sqrt(),
            RegimeLabel::NbHigh | RegimeLabel::BHigh => t.sqrt(),
            RegimeLabel::BLow => t.powf((3.0 - 1.0 / self.alpha) / 2.0),
            RegimeLabel::BUnsupported => panic!("no norming for the unsupported regime"),
        }
    }

    /// Temporal covariance of the limit's real-valued factor, including the
    /// `K^2` constant but excluding the `(int phi)(int psi)` pairing; `None`
    /// for the distribution-valued high regimes.
    pub fn scalar_limit_cov(&self, s: f64, t: f64) -> Option<f64> {
        let k2 = self.k_const.map(|k| k * k)?;
        match self.label {
            RegimeLabel::NbLow => {
                let h = self.hurst.unwrap();
                Some(k2 * xi_cov(self.e_theta, self.var_theta, h, s, t))
            }
            RegimeLabel::BLow => {
                let h = self.hurst.unwrap();
                Some(k2 * subfbm_cov(h, s, t))
            }
            RegimeLabel::NbCritical | RegimeLabel::BCritical => Some(k2 * s.min(t)),
            _ => None,
        }
    }

    /// Export used by the CLI: `{label, H, F_T, K, alpha, branching, V,
    /// Etheta, Vartheta}`.
    pub fn export_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label.as_str(),
            "H": self.hurst,
            "F_T": self.norming_symbol(),
            "K": self.k_const,
            "alpha": self.alpha,
            "branching": self.branching,
            "V": self.rate_v,
            "Etheta": self.e_theta,
            "Vartheta": self.var_theta,
        })
    }
}

// ---------------------------------------------------------------------------
// Potential operator G (alpha < 1)
// ---------------------------------------------------------------------------

/// Constant of the Riesz-type kernel,
/// `C_alpha = Gamma((1-alpha)/2) / (2^alpha sqrt(pi) Gamma(alpha/2))`.
pub fn potential_constant(alpha: f64) -> f64 {
    gamma((1.0 - alpha) / 2.0) / (2.0f64.powf(alpha) * PI.sqrt() * gamma(alpha / 2.0))
}

/// `G phi(x) = C_alpha int phi(y) |x-y|^{alpha-1} dy`, defined for alpha < 1.
#[derive(Debug, Clone, Copy)]
pub struct PotentialOperator {
    alpha: f64,
    c_alpha: f64,
}

impl PotentialOperator {
    pub fn new(params: StableParams) -> Result<Self> {
        let alpha = params.alpha();
        if alpha >= 1.0 {
            return Err(Error::RegimeMismatch(format!(
                "the potential operator requires alpha < 1, got {alpha}"
            )));
        }
        Ok(Self { alpha, c_alpha: potential_constant(alpha) })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    /// Nodal kernel weights `v(m) = int |mh - y|^{alpha-1} hat(y) dy`:
    /// the exact action of the kernel on the piecewise-linear hat function.
    /// The `|u|^{alpha-1}` singularity is integrated in closed form.
    fn hat_weights(&self, h: f64, len: usize) -> Vec<f64> {
        let a = self.alpha;
        let p0 = |u: f64| u.signum() * u.abs().powf(a) / a;
        let p1 = |u: f64| u.abs().powf(a + 1.0) / (a + 1.0);
        (0..len)
            .map(|m| {
                let (ua, uc, ub) =
                    ((m as f64 - 1.0) * h, m as f64 * h, (m as f64 + 1.0) * h);
                (p1(uc) - p1(ua) - ua * (p0(uc) - p0(ua)) + ub * (p0(ub) - p0(uc))
                    - (p1(ub) - p1(uc)))
                    / h
            })
            .collect()
    }

    /// Apply the operator to a sampled function: exact potential of the
    /// piecewise-linear interpolant, evaluated at the nodes.
    pub fn apply(&self, f: &GridFn) -> GridFn {
        let n = f.grid.n();
        let h = f.grid.dx();
        let weights = self.hat_weights(h, n);
        // Toeplitz convolution g_i = sum_j v(|i-j|) f_j via zero-padded FFT.
        let padded = Grid::new(0.0, 1.0, 2 * n);
        let mut kernel = vec![0.0; 2 * n];
        kernel[0] = weights[0];
        for m in 1..n {
            kernel[m] = weights[m];
            kernel[2 * n - m] = weights[m];
        }
        let mut source = vec![0.0; 2 * n];
        source[..n].copy_from_slice(&f.values);
        let spec_k = crate::grid::fft_forward(&GridFn { grid: padded, values: kernel });
        let spec_f = crate::grid::fft_forward(&GridFn { grid: padded, values: source });
        let prod: Vec<_> = spec_k.iter().zip(&spec_f).map(|(a, b)| a * b).collect();
        let conv = crate::grid::fft_inverse(padded, prod);
        GridFn {
            grid: f.grid,
            values: conv[..n].iter().map(|v| v * self.c_alpha).collect(),
        }
    }

    /// `G phi` sampled on `grid`.
    pub fn apply_to_test_fn(&self, phi: &TestFunction, grid: Grid) -> GridFn {
        self.apply(&GridFn::sample(grid, |x| phi.eval(x)))
    }

    /// Exact integral `int (pl phi) K (pl psi)`, i.e. `int phi G psi` with both
    /// functions replaced by piecewise-linear interpolants on `grid`.
    /// Structurally symmetric in `(phi, psi)`.
    pub fn pairing(&self, phi: &TestFunction, psi: &TestFunction, grid: Grid) -> f64 {
        let f: Vec<f64> = grid.xs().map(|x| phi.eval(x)).collect();
        let g: Vec<f64> = grid.xs().map(|x| psi.eval(x)).collect();
        let n = grid.n();
        let w = self.pair_weights(grid.dx(), n);
        let mut acc = w[0] * f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        for m in 1..n {
            let mut cross = 0.0;
            for k in 0..n - m {
                cross += f[k] * g[k + m] + f[k + m] * g[k];
            }
            acc += w[m] * cross;
        }
        self.c_alpha * acc
    }

    /// Same pairing with one Richardson step (h and h/2), killing the O(h^2)
    /// interpolation error of smooth test functions.
    pub fn pairing_refined(&self, phi: &TestFunction, psi: &TestFunction, grid: Grid) -> f64 {
        let coarse = self.pairing(phi, psi, grid);
        let fine_grid = Grid::new(grid.x0(), grid.dx() / 2.0, grid.n() * 2);
        let fine = self.pairing(phi, psi, fine_grid);
        (4.0 * fine - coarse) / 3.0
    }

    /// Bilinear weights `w(m) = int int hat(x) |x - y + mh|^{alpha-1} hat(y)`,
    /// computed through the hat autocorrelation `B` (a cubic B-spline bump):
    /// `w(m) = int_{-2h}^{2h} B(sigma) K(mh - sigma) d sigma`.
    fn pair_weights(&self, h: f64, len: usize) -> Vec<f64> {
        let a = self.alpha;
        let b = |sigma: f64| {
            let tau = (sigma / h).abs();
            if tau >= 2.0 {
                0.0
            } else if tau >= 1.0 {
                let c = 2.0 - tau;
                h * c * c * c / 6.0
            } else {
                h * (2.0 / 3.0 - tau * tau + tau * tau * tau / 2.0)
            }
        };
        (0..len)
            .map(|mi| {
                let m = mi as f64;
                if mi >= 3 {
                    // Smooth integrand: K is regular on the whole window.
                    adaptive_simpson(
                        &|s: f64| b(s) * (m * h - s).abs().powf(a - 1.0),
                        -2.0 * h,
                        2.0 * h,
                        1e-14 * h.powf(a + 1.0),
                    )
                } else {
                    // Singularity at sigma = mh: substitute u = rho^{1/alpha}
                    // on each side so the integrand becomes bounded.
                    let sing = m * h;
                    let mut total = 0.0;
                    for (lo, hi) in [(-2.0 * h, sing), (sing, 2.0 * h)] {
                        let span = (hi - lo).abs();
                        if span < 1e-300 {
                            continue;
                        }
                        let rho_max = span.powf(a);
                        total += adaptive_simpson(
                            &|rho: f64| {
                                if rho <= 0.0 {
                                    return 0.0;
                                }
                                let u = rho.powf(1.0 / a);
                                let sigma = if hi == sing { sing - u } else { sing + u };
                                b(sigma) / a
                            },
                            0.0,
                            rho_max,
                            1e-14 * h.powf(a + 1.0),
                        );
                    }
                    total
                }
            })
            .collect()
    }
}

/// Fourier-side evaluation of `int phi G psi` = `(1/2pi) int |w|^{-alpha}
/// phihat(w) psihat(w)* dw`; an independent quadrature route used to
/// cross-check the grid scheme (valid for alpha < 1 and closed-form
/// transforms).
pub fn pairing_fourier(
    alpha: f64,
    phi: &TestFunction,
    psi: &TestFunction,
) -> Option<f64> {
    phi.fourier_modulus(0.1)?;
    psi.fourier_modulus(0.1)?;
    let dc = phi.center() - psi.center();
    // omega = rho^{1/(1-alpha)} absorbs the |omega|^{-alpha} endpoint
    // singularity exactly: the substituted integrand is bounded at rho = 0.
    let q = 1.0 / (1.0 - alpha);
    let f = |rho: f64| {
        let omega = rho.max(0.0).powf(q);
        phi.fourier_modulus(omega).unwrap()
            * psi.fourier_modulus(omega).unwrap()
            * (omega * dc).cos()
            * q
    };
    // Transforms die off by |omega| ~ 40 for width >= 0.3 bumps; unit panels
    // keep the adaptive rule from converging on an unsampled spike.
    let rho_max = 60.0f64.powf(1.0 - alpha);
    let mut acc = 0.0;
    let mut a = 0.0;
    while a < rho_max {
        let b = (a + 1.0).min(rho_max);
        acc += adaptive_simpson(&f, a, b, 1e-14);
        a = b;
    }
    Some(acc / PI)
}

// ---------------------------------------------------------------------------
// Wiener covariances of the high regimes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WienerKind {
    /// Non-branching, alpha < 1 (covariance `2 E theta (s^t) int phi G psi`).
    NonBranching,
    /// Branching, alpha < 1/2 (adds `V int (G phi)(G psi)`).
    Branching,
}

/// Quadrature layout for the Wiener covariances.
#[derive(Debug, Clone, Copy)]
pub struct WienerOptions {
    /// Fine grid carrying the `int phi G psi` pairing.
    pub fine_extent: f64,
    pub fine_nodes: usize,
    /// Wide grid for `int (G phi)(G psi)`, whose integrand decays like
    /// `|x|^{2(alpha-1)}`.
    pub wide_extent: f64,
    pub wide_nodes: usize,
}

impl Default for WienerOptions {
    fn default() -> Self {
        Self {
            fine_extent: 32.0,
            fine_nodes: 1 << 13,
            wide_extent: 512.0,
            wide_nodes: 1 << 13,
        }
    }
}

/// Spatial pairings entering the Wiener covariances, frozen once per
/// test-function pair.
#[derive(Debug, Clone, Copy)]
pub struct WienerPairing {
    pub phi_g_psi: f64,
    pub g_phi_g_psi: f64,
}

pub fn wiener_pairing(
    params: StableParams,
    phi: &TestFunction,
    psi: &TestFunction,
    opts: &WienerOptions,
) -> Result<WienerPairing> {
    let op = PotentialOperator::new(params)?;
    let fine = Grid::symmetric(opts.fine_extent, opts.fine_nodes);
    let phi_g_psi = op.pairing_refined(phi, psi, fine);

    let wide = Grid::symmetric(opts.wide_extent, opts.wide_nodes);
    let g_phi = op.apply_to_test_fn(phi, wide);
    let g_psi = op.apply_to_test_fn(psi, wide);
    let body: f64 = g_phi
        .values
        .iter()
        .zip(&g_psi.values)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * wide.dx();
    // Beyond the wide grid, G phi ~ C_alpha (int phi) |x|^{alpha-1}; add the
    // analytic tail (finite only for alpha < 1/2).
    let alpha = op.alpha();
    let tail = if alpha < 0.5 {
        op.c_alpha() * op.c_alpha() * phi.integral() * psi.integral() * 2.0
            * opts.wide_extent.powf(2.0 * alpha - 1.0)
            / (1.0 - 2.0 * alpha)
    } else {
        0.0
    };
    Ok(WienerPairing { phi_g_psi, g_phi_g_psi: body + tail })
}

/// Covariance `E <X(t), phi><X(s), psi>` of the high-regime Wiener limits.
pub fn wiener_cov(
    kind: WienerKind,
    params: StableParams,
    e_theta: f64,
    rate_v: f64,
    phi: &TestFunction,
    psi: &TestFunction,
    s: f64,
    t: f64,
    opts: &WienerOptions,
) -> Result<f64> {
    let alpha = params.alpha();
    match kind {
        WienerKind::NonBranching if alpha >= 1.0 => {
            return Err(Error::RegimeMismatch(format!(
                "non-branching Wiener covariance requires alpha < 1, got {alpha}"
            )))
        }
        WienerKind::Branching if alpha >= 0.5 => {
            return Err(Error::RegimeMismatch(format!(
                "branching Wiener covariance requires alpha < 1/2, got {alpha}"
            )))
        }
        _ => {}
    }
    let pairing = wiener_pairing(params, phi, psi, opts)?;
    Ok(wiener_cov_from_pairing(kind, e_theta, rate_v, &pairing, s, t))
}

pub fn wiener_cov_from_pairing(
    kind: WienerKind,
    e_theta: f64,
    rate_v: f64,
    pairing: &WienerPairing,
    s: f64,
    t: f64,
) -> f64 {
    let st = s.min(t);
    match kind {
        WienerKind::NonBranching => 2.0 * e_theta * st * pairing.phi_g_psi,
        WienerKind::Branching => {
            e_theta * st * (2.0 * pairing.phi_g_psi + rate_v * pairing.g_phi_g_psi)
        }
    }
}

// ---------------------------------------------------------------------------
// Covariance models (everything the theorems predict, evaluable)
// ---------------------------------------------------------------------------

/// Evaluable bivariate covariance of a limit process. Wiener kinds are frozen
/// against a test-function pair at construction, after which every kind is a
/// plain kernel on time pairs.
#[derive(Debug, Clone)]
pub enum CovarianceModel {
    SubFbm { h: f64 },
    ThetaProc { h: f64 },
    Xi { e_theta: f64, var_theta: f64, h: f64 },
    Brownian { scale: f64 },
    WienerNb { coefficient: f64 },
    WienerB { coefficient: f64 },
}

impl CovarianceModel {
    pub fn wiener_nb(
        params: StableParams,
        e_theta: f64,
        phi: &TestFunction,
        psi: &TestFunction,
        opts: &WienerOptions,
    ) -> Result<Self> {
        if params.alpha() >= 1.0 {
            return Err(Error::RegimeMismatch(
                "wiener_nb needs alpha < 1".into(),
            ));
        }
        let pairing = wiener_pairing(params, phi, psi, opts)?;
        Ok(Self::WienerNb { coefficient: 2.0 * e_theta * pairing.phi_g_psi })
    }

    pub fn wiener_b(
        params: StableParams,
        e_theta: f64,
        rate_v: f64,
        phi: &TestFunction,
        psi: &TestFunction,
        opts: &WienerOptions,
    ) -> Result<Self> {
        if params.alpha() >= 0.5 {
            return Err(Error::RegimeMismatch(
                "wiener_b needs alpha < 1/2".into(),
            ));
        }
        let pairing = wiener_pairing(params, phi, psi, opts)?;
        Ok(Self::WienerB {
            coefficient: e_theta * (2.0 * pairing.phi_g_psi + rate_v * pairing.g_phi_g_psi),
        })
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match *self {
            Self::SubFbm { h } => subfbm_cov(h, s, t),
            Self::ThetaProc { h } => theta_cov(h, s, t),
            Self::Xi { e_theta, var_theta, h } => xi_cov(e_theta, var_theta, h, s, t),
            Self::Brownian { scale } => scale * s.min(t),
            Self::WienerNb { coefficient } | Self::WienerB { coefficient } => {
                coefficient * s.min(t)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SubFbm { .. } => "subfbm",
            Self::ThetaProc { .. } => "theta_proc",
            Self::Xi { .. } => "xi",
            Self::Brownian { .. } => "brownian",
            Self::WienerNb { .. } => "wiener_nb",
            Self::WienerB { .. } => "wiener_b",
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-time moment oracles
// ---------------------------------------------------------------------------

/// Grid and aliasing tolerance adequate for semigroup oracles at a given
/// stability index; heavy tails force wide grids and looser boundary checks.
pub fn oracle_grid(alpha: f64) -> (Grid, f64) {
    if alpha == 2.0 {
        (Grid::symmetric(64.0, 1 << 12), 1e-8)
    } else if alpha > 1.0 {
        (Grid::symmetric(256.0, 1 << 12), 1e-4)
    } else {
        (Grid::symmetric(1024.0, 1 << 13), 1e-4)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub grid: Option<Grid>,
    pub aliasing_tol: Option<f64>,
    /// Simpson panels for the branching time integral; doubled until the
    /// Richardson check passes or the cap is hit.
    pub base_panels: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { grid: None, aliasing_tol: None, base_panels: 64 }
    }
}

/// Exact mixed moment `E <N^x_r, phi><N^x_{r'}, psi>` of the single-ancestor
/// system at finite times: `T_r(phi T_{r'-r} psi)(x)` for the free motion,
/// plus `V int_0^r T_u((T_{r-u} phi)(T_{r'-u} psi))(x) du` under critical
/// binary branching at rate `V`.
pub fn moment_oracle(
    params: StableParams,
    branching: bool,
    rate_v: f64,
    x: f64,
    r: f64,
    r_prime: f64,
    phi: &TestFunction,
    psi: &TestFunction,
    opts: &OracleOptions,
) -> Result<f64> {
    // Symmetrize so r <= r'.
    let (r, r_prime, phi, psi) = if r <= r_prime {
        (r, r_prime, phi, psi)
    } else {
        (r_prime, r, psi, phi)
    };
    assert!(r >= 0.0, "times must be nonnegative");
    if r_prime == 0.0 {
        // T_0 is the identity twice over.
        return Ok(phi.eval(x) * psi.eval(x));
    }

    let (default_grid, default_tol) = oracle_grid(params.alpha());
    let grid = opts.grid.unwrap_or(default_grid);
    let tol = opts.aliasing_tol.unwrap_or(default_tol);

    let phi_f = GridFn::sample(grid, |y| phi.eval(y));
    let psi_f = GridFn::sample(grid, |y| psi.eval(y));

    let free = {
        let inner = semigroup_apply(params, r_prime - r, &psi_f, tol)?;
        let product = GridFn {
            grid,
            values: phi_f.values.iter().zip(&inner.values).map(|(a, b)| a * b).collect(),
        };
        semigroup_apply(params, r, &product, tol)?.interp_cubic(x)
    };
    if !branching || rate_v == 0.0 || r == 0.0 {
        return Ok(free);
    }

    let integrand = |u: f64| -> Result<f64> {
        let a = semigroup_apply(params, r - u, &phi_f, tol)?;
        let b = semigroup_apply(params, r_prime - u, &psi_f, tol)?;
        let product = GridFn {
            grid,
            values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        };
        Ok(semigroup_apply(params, u, &product, tol)?.interp_cubic(x))
    };

    // Composite Simpson in u with a Richardson check.
    let mut panels = opts.base_panels.max(8);
    let mut coarse = simpson_over(&integrand, r, panels / 2)?;
    let mut fine = simpson_over(&integrand, r, panels)?;
    while (fine - coarse).abs() > 1e-8 * fine.abs().max(1e-12) && panels < 512 {
        panels *= 2;
        coarse = fine;
        fine = simpson_over(&integrand, r, panels)?;
    }
    let branch_term = fine + (fine - coarse) / 15.0;
    Ok(free + rate_v * branch_term)
}

fn simpson_over<F: Fn(f64) -> Result<f64>>(f: &F, upper: f64, panels: usize) -> Result<f64> {
    let evals: Result<Vec<f64>> =
        (0..=panels).map(|i| f(upper * i as f64 / panels as f64)).collect();
    let evals = evals?;
    let h = upper / panels as f64;
    let mut acc = evals[0] + evals[panels];
    for (i, v) in evals.iter().enumerate().take(panels).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(acc * h / 3.0)
}

/// `int phi(x) T_u phi(x) dx` on a shared grid; building block of the exact
/// finite-T variance of occupation integrals.
pub fn pair_with_semigroup(
    params: StableParams,
    u: f64,
    phi: &GridFn,
    psi: &GridFn,
    tol: f64,
) -> Result<f64> {
    let moved = semigroup_apply(params, u, psi, tol)?;
    Ok(phi
        .values
        .iter()
        .zip(&moved.values)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * phi.grid.dx())
}

/// Exact variance of the uncentered occupation integral
/// `int_0^T <N_s, phi> ds` for a Poisson-type system (uniform placement,
/// `E theta = Var theta`) on the full line:
/// `E theta * 2 int_0^T (T - u) int phi T_u phi du`.
pub fn occupation_variance_poisson(
    params: StableParams,
    e_theta: f64,
    horizon: f64,
    phi: &TestFunction,
    grid: Grid,
    tol: f64,
) -> Result<f64> {
    let phi_f = GridFn::sample(grid, |y| phi.eval(y));
    let inner = |u: f64| pair_with_semigroup(params, u, &phi_f, &phi_f, tol);
    let mut acc = 0.0;
    let panels = 256;
    let h = horizon / panels as f64;
    for i in 0..=panels {
        let u = i as f64 * h;
        let w = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (horizon - u) * inner(u)?;
    }
    Ok(e_theta * 2.0 * acc * h / 3.0)
}
