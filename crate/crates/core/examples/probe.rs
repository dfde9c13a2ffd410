use occufluct::numerics::adaptive_simpson;
use occufluct::stable::{StableDensity, StableParams};

fn direct_panels(alpha: f64, x: f64) -> f64 {
    let xi_max = 42.0f64.powf(1.0 / alpha);
    let panel = if x > 0.0 { (std::f64::consts::PI / (2.0 * x)).min(0.5) } else { 0.5 };
    let f = |xi: f64| (x * xi).cos() * (-xi.powf(alpha)).exp();
    let mut acc = 0.0;
    let mut a = 0.0;
    while a < xi_max {
        let b = (a + panel).min(xi_max);
        acc += adaptive_simpson(&f, a, b, 1e-15);
        a = b;
    }
    acc / std::f64::consts::PI
}

fn main() {
    let alpha = 0.75;
    let d = StableDensity::new(StableParams::new(alpha).unwrap());
    for xx in [0.0f64, 0.05, 0.1, 0.10676, 0.15625, 0.2, 0.25, 0.5, 1.0] {
        let node = (xx as f64 / (1.0/64.0)).fract() == 0.0;
        println!("x={xx:<9} node={node:<5} spline {:.14} direct {:.14} reldiff {:.2e}",
            d.density_unit(xx), direct_panels(alpha, xx),
            (d.density_unit(xx)/direct_panels(alpha, xx) - 1.0).abs());
    }
}
