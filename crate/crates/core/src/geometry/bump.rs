//! Compactly supported C∞ bump on [-1, 1] together with its first two
//! antiderivatives. Convolving a polyline with the scaled bump replaces each
//! corner by a C∞ arc that leaves the straight parts untouched.

use std::sync::OnceLock;

use crate::quadrature;

const SUBINTERVALS: usize = 24;

fn raw(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// ∫_{-1}^{x} g(t) dt for x in [-1, 0] by composite Gauss–Legendre.
fn integrate_left(x: f64, g: impl Fn(f64) -> f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    let rule = quadrature::rule(16);
    let h = (x + 1.0) / SUBINTERVALS as f64;
    (0..SUBINTERVALS)
        .map(|k| {
            let a = -1.0 + k as f64 * h;
            rule.integrate(a, a + h, &g)
        })
        .sum()
}

fn half_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| integrate_left(0.0, raw))
}

/// Normalized bump: nonnegative, supported in [-1, 1], unit integral.
pub fn density(x: f64) -> f64 {
    raw(x) / (2.0 * half_mass())
}

/// Smooth step B(x) = ∫_{-1}^{x} density; 0 left of -1, 1 right of 1.
pub fn step(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else if x > 0.0 {
        1.0 - step(-x)
    } else {
        integrate_left(x, raw) / (2.0 * half_mass())
    }
}

/// G(x) = ∫_{-1}^{x} B; equals 0 left of -1 and x right of 1.
pub fn ramp(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        x
    } else if x > 0.0 {
        x + ramp(-x)
    } else {
        // integration by parts: G(x) = x B(x) - ∫ t η(t) dt
        let moment = integrate_left(x, |t| t * raw(t)) / (2.0 * half_mass());
        x * step(x) - moment
    }
}
