//! Poiseuille channel flow, Papkovich–Fadle eigenvalues and decay fitting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoiseuilleError {
    #[error("transverse coordinate {y} lies outside the channel [-{half_width}, {half_width}]")]
    OutOfChannel { y: f64, half_width: f64 },
    #[error("root search failed: {0}")]
    RootSearchFailed(String),
    #[error("cannot fit an exponential: value {value} at x = {x} is not positive")]
    NonPositiveValues { x: f64, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Fully developed flow with flux `flux` in a channel of half-width L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoiseuilleProfile {
    pub half_width: f64,
    pub flux: f64,
    pub viscosity: f64,
}

impl PoiseuilleProfile {
    pub fn new(half_width: f64, flux: f64, viscosity: f64) -> Self {
        Self {
            half_width,
            flux,
            viscosity,
        }
    }

    /// dp/dx = −3μF/(2L³).
    pub fn pressure_gradient(&self) -> f64 {
        -3.0 * self.viscosity * self.flux / (2.0 * self.half_width.powi(3))
    }

    /// Axial velocity; zero exactly at the walls.
    pub fn velocity(&self, y: f64) -> Result<f64, PoiseuilleError> {
        let l = self.half_width;
        if y.abs() > l {
            return Err(PoiseuilleError::OutOfChannel { y, half_width: l });
        }
        Ok(self.velocity_unchecked(y))
    }

    pub(crate) fn velocity_unchecked(&self, y: f64) -> f64 {
        let l = self.half_width;
        3.0 * self.flux / (4.0 * l * l * l) * (l - y) * (l + y)
    }

    /// ∂u/∂y, the vorticity of the profile.
    pub fn shear(&self, y: f64) -> f64 {
        -3.0 * self.flux / (2.0 * self.half_width.powi(3)) * y
    }
}

/// u(y) of `profile`, as a free function.
pub fn profile_velocity(profile: &PoiseuilleProfile, y: f64) -> Result<f64, PoiseuilleError> {
    profile.velocity(y)
}

/// Papkovich–Fadle eigenvalues `p` with Re p > 0, Im p ≥ 0, sorted by real
/// part. Every `p` solves sin²p = p², i.e. z = p/2 solves
/// sin²(2z) = 4z², and the decay factor of mode n is exp(−p_n·x/W).
#[derive(Debug, Clone, PartialEq)]
pub struct PapkovichSpectrum {
    pub roots: Vec<C64>,
    /// |sin²(2z) − 4z²| at z = p/2 (equal to |sin²p − p²|).
    pub residuals: Vec<f64>,
}

fn characteristic(p: C64) -> C64 {
    let s = p.sin();
    (s - p) * (s + p)
}

/// Newton on whichever linear factor sin p ∓ p vanishes; better conditioned
/// than the product at large |p|.
fn polish(mut p: C64) -> C64 {
    let s = p.sin();
    let sign = if (s - p).norm() < (s + p).norm() { 1.0 } else { -1.0 };
    for _ in 0..4 {
        let step = (p.sin() - sign * p) / (p.cos() - sign);
        p -= step;
        if step.norm() <= 1e-16 * p.norm() {
            break;
        }
    }
    p
}

fn characteristic_derivative(p: C64) -> C64 {
    (p * 2.0).sin() - p * 2.0
}

/// Winding number of `characteristic` along the boundary of the box, or
/// `None` if the function comes too close to zero on the boundary.
fn box_count(lo: C64, hi: C64) -> Option<i64> {
    let corners = [lo, C64::new(hi.re, lo.im), hi, C64::new(lo.re, hi.im), lo];
    let mut total = 0.0;
    for e in corners.windows(2) {
        total += edge_phase(e[0], e[1], 0)?;
    }
    Some((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

fn edge_phase(a: C64, b: C64, depth: usize) -> Option<f64> {
    let fa = characteristic(a);
    let fb = characteristic(b);
    let scale = 1.0 + a.norm_sqr();
    if fa.norm() < 1e-9 * scale || fb.norm() < 1e-9 * scale {
        return None;
    }
    let dphase = (fb / fa).arg();
    if dphase.abs() < 0.5 && (b - a).norm() <= 0.125 {
        // confirm on the midpoint that the phase does not wrap unseen
        let m = 0.5 * (a + b);
        let fm = characteristic(m);
        let p1 = (fm / fa).arg();
        let p2 = (fb / fm).arg();
        if (p1 + p2 - dphase).abs() < 1e-9 && p1.abs() < 0.5 && p2.abs() < 0.5 {
            return Some(dphase);
        }
    }
    if depth > 60 {
        return None;
    }
    let m = 0.5 * (a + b);
    Some(edge_phase(a, m, depth + 1)? + edge_phase(m, b, depth + 1)?)
}

fn newton(mut p: C64) -> Option<C64> {
    for _ in 0..100 {
        let step = characteristic(p) / characteristic_derivative(p);
        p -= step;
        if step.norm() < 1e-15 * p.norm() {
            return Some(p);
        }
    }
    None
}

fn locate(lo: C64, hi: C64, count: i64, depth: usize, out: &mut Vec<C64>) -> Result<(), PoiseuilleError> {
    if count == 0 {
        return Ok(());
    }
    if depth > 60 {
        return Err(PoiseuilleError::RootSearchFailed(format!(
            "box subdivision exhausted near {}",
            0.5 * (lo + hi)
        )));
    }
    if count == 1 {
        if let Some(p) = newton(0.5 * (lo + hi)) {
            if p.re >= lo.re && p.re <= hi.re && p.im >= lo.im && p.im <= hi.im {
                out.push(polish(p));
                return Ok(());
            }
        }
    }
    // split the longer side, nudging the cut off any root on it
    let wide = hi.re - lo.re >= hi.im - lo.im;
    for nudge in [0.5, 0.4871, 0.5129, 0.4613, 0.5387] {
        let (a_hi, b_lo) = if wide {
            let x = lo.re + nudge * (hi.re - lo.re);
            (C64::new(x, hi.im), C64::new(x, lo.im))
        } else {
            let y = lo.im + nudge * (hi.im - lo.im);
            (C64::new(hi.re, y), C64::new(lo.re, y))
        };
        if let (Some(c1), Some(c2)) = (box_count(lo, a_hi), box_count(b_lo, hi)) {
            if c1 + c2 == count && c1 >= 0 && c2 >= 0 {
                locate(lo, a_hi, c1, depth + 1, out)?;
                return locate(b_lo, hi, c2, depth + 1, out);
            }
        }
    }
    Err(PoiseuilleError::RootSearchFailed(format!(
        "could not split box [{lo}, {hi}] cleanly"
    )))
}

/// The `count` Papkovich–Fadle eigenvalues of smallest real part, located
/// by argument-principle box counting and polished by Newton.
pub fn papkovich_roots(count: usize) -> Result<PapkovichSpectrum, PoiseuilleError> {
    if count == 0 {
        return Err(PoiseuilleError::InvalidInput("count must be at least 1".into()));
    }
    let mut re_max = 8.0_f64;
    loop {
        let im_max = 3.0 + (4.0 * re_max).ln();
        let lo = C64::new(1.0, 0.0);
        let hi = C64::new(re_max + 0.0173, im_max);
        let total = box_count(lo, hi)
            .ok_or_else(|| PoiseuilleError::RootSearchFailed("root on the search box boundary".into()))?;
        if total as usize > count {
            let mut roots = Vec::new();
            // coarse strips keep boxes near unit aspect ratio
            let strips = ((hi.re - lo.re) / 2.0).ceil() as usize;
            let width = (hi.re - lo.re) / strips as f64;
            for s in 0..strips {
                let a = C64::new(lo.re + s as f64 * width, lo.im);
                let b = C64::new(lo.re + (s + 1) as f64 * width, hi.im);
                let c = box_count(a, b)
                    .ok_or_else(|| PoiseuilleError::RootSearchFailed("root on a strip boundary".into()))?;
                locate(a, b, c, 0, &mut roots)?;
            }
            if roots.len() != total as usize {
                return Err(PoiseuilleError::RootSearchFailed(format!(
                    "found {} roots, argument principle counted {total}",
                    roots.len()
                )));
            }
            roots.sort_by(|a, b| a.re.total_cmp(&b.re));
            roots.truncate(count);
            let residuals = roots.iter().map(|&p| characteristic(p).norm()).collect();
            return Ok(PapkovichSpectrum { roots, residuals });
        }
        re_max *= 2.0;
        if re_max > 1e5 {
            return Err(PoiseuilleError::RootSearchFailed("too many roots requested".into()));
        }
    }
}

/// Return-to-Poiseuille decay rate Re(p₁)/W per unit axial length.
pub fn decay_rate(width: f64) -> Result<f64, PoiseuilleError> {
    if !(width > 0.0) {
        return Err(PoiseuilleError::InvalidInput("width must be positive".into()));
    }
    Ok(papkovich_roots(1)?.roots[0].re / width)
}

/// Zero-flux axial velocity profile on [−L, L] from a sine series.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroFluxProfile {
    pub half_width: f64,
    /// Coefficient of sin(kπ(y + L)/(2L)) for k = 1, 2, ...
    pub coefficients: Vec<f64>,
}

impl ZeroFluxProfile {
    pub fn velocity(&self, y: f64) -> f64 {
        let l = self.half_width;
        if y.abs() >= l {
            return 0.0;
        }
        let t = std::f64::consts::PI * (y + l) / (2.0 * l);
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * t).sin())
            .sum()
    }

    /// Exact integral of the profile over the channel.
    pub fn flux(&self) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, a)| a * sine_mass(k + 1, self.half_width))
            .sum()
    }
}

fn sine_mass(k: usize, l: f64) -> f64 {
    if k % 2 == 1 {
        4.0 * l / (k as f64 * std::f64::consts::PI)
    } else {
        0.0
    }
}

/// Random sine-series profile with zero flux, deterministic per seed.
pub fn random_zero_flux_profile(half_width: f64, seed: u64, modes: usize) -> Result<ZeroFluxProfile, PoiseuilleError> {
    if modes < 2 {
        return Err(PoiseuilleError::InvalidInput("at least two modes are needed".into()));
    }
    if !(half_width > 0.0) {
        return Err(PoiseuilleError::InvalidInput("half-width must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m: Vec<f64> = (1..=modes).map(|k| sine_mass(k, half_width)).collect();
    let am: f64 = a.iter().zip(&m).map(|(x, y)| x * y).sum();
    let mm: f64 = m.iter().map(|y| y * y).sum();
    for (x, y) in a.iter_mut().zip(&m) {
        *x -= am / mm * y;
    }
    Ok(ZeroFluxProfile {
        half_width,
        coefficients: a,
    })
}

/// Least-squares line through (x, ln value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of ln(value).
    pub residual: f64,
}

pub fn fit_exponential(xs: &[f64], values: &[f64]) -> Result<ExponentialFit, PoiseuilleError> {
    if xs.len() != values.len() || xs.len() < 2 {
        return Err(PoiseuilleError::InvalidInput(
            "need at least two samples with matching lengths".into(),
        ));
    }
    if let Some((x, v)) = xs.iter().zip(values).find(|(_, v)| !(**v > 0.0)) {
        return Err(PoiseuilleError::NonPositiveValues { x: *x, value: *v });
    }
    let n = xs.len() as f64;
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(PoiseuilleError::InvalidInput("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentialFit {
        slope,
        intercept,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centerline_velocity() {
        let p = PoiseuilleProfile::new(0.5, 1.0, 1.0);
        assert!((p.velocity(0.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(p.velocity(0.5).unwrap(), 0.0);
        assert_eq!(p.velocity(-0.5).unwrap(), 0.0);
        assert!(matches!(p.velocity(0.6), Err(PoiseuilleError::OutOfChannel { .. })));
        let zero = PoiseuilleProfile::new(0.5, 0.0, 1.0);
        assert_eq!(zero.velocity(0.2).unwrap(), 0.0);
    }

    #[test]
    fn profile_integrates_to_flux() {
        let p = PoiseuilleProfile::new(0.7, 2.3, 1.0);
        let q = crate::quadrature::rule(16).integrate(-0.7, 0.7, |y| p.velocity(y).unwrap());
        assert!((q - 2.3).abs() < 1e-14 * 2.3);
    }

    #[test]
    fn first_root_matches_decay_rate() {
        let s = papkovich_roots(1).unwrap();
        let p = s.roots[0];
        assert!(p.re > 4.15 && p.re < 4.25, "{p}");
        assert!(s.residuals[0] <= 1e-12);
        // regression value, 12 digits
        assert!((p - C64::new(4.212_392_230_490_66, 2.250_728_611_601_86)).norm() < 1e-9, "{p}");
        let w1 = decay_rate(1.0).unwrap();
        let w2 = decay_rate(2.0).unwrap();
        assert!((w1 - 2.0 * w2).abs() < 1e-14);
    }

    #[test]
    fn ten_roots_are_accurate_and_sorted() {
        let s = papkovich_roots(10).unwrap();
        assert_eq!(s.roots.len(), 10);
        for (n, (p, r)) in s.roots.iter().zip(&s.residuals).enumerate() {
            // half an ulp in p moves the residual by |g'(p)|·ulp/2
            let floor = characteristic_derivative(*p).norm() * f64::EPSILON * p.norm();
            assert!(*r <= floor.max(1e-12), "{p}: {r} vs {floor}");
            if n < 8 {
                assert!(*r <= 1e-12, "{p}: {r}");
            }
            assert!(p.re > 0.0 && p.im >= 0.0);
            assert!((characteristic(p.conj()) - characteristic(*p).conj()).norm() <= 1e-12);
        }
        assert!(s.roots.windows(2).all(|w| w[0].re <= w[1].re));
        // mpmath reference for the ninth root, correctly rounded
        assert_eq!(s.roots[8], C64::new(29.708_119_825_276_04, 4.093_704_924_765_334));
    }

    #[test]
    fn exact_exponentials_are_fitted() {
        let xs: Vec<f64> = (0..11).map(|k| k as f64 * 0.5).collect();
        let v: Vec<f64> = xs.iter().map(|x| 3.0 * (-2.0 * x).exp()).collect();
        let f = fit_exponential(&xs, &v).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-13);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-13);
        let v: Vec<f64> = xs.iter().map(|x| (-4.2 * x).exp()).collect();
        assert!((fit_exponential(&xs, &v).unwrap().slope + 4.2).abs() < 1e-13);
        let bad = [1.0, 0.0];
        assert!(matches!(
            fit_exponential(&[0.0, 1.0], &bad),
            Err(PoiseuilleError::NonPositiveValues { .. })
        ));
    }

    #[test]
    fn random_profile_is_deterministic() {
        let a = random_zero_flux_profile(0.5, 7, 8).unwrap();
        let b = random_zero_flux_profile(0.5, 7, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_zero_flux_profile(0.5, 8, 8).unwrap());
        assert_eq!(a.velocity(0.5), 0.0);
        assert_eq!(a.velocity(-0.5), 0.0);
    }

    proptest! {
        #[test]
        fn random_profiles_carry_no_flux(seed in any::<u64>(), modes in 2usize..16, l in 0.1f64..3.0) {
            let p = random_zero_flux_profile(l, seed, modes).unwrap();
            prop_assert!(p.flux().abs() < 1e-15 * l.max(1.0) * modes as f64);
            // independent check by quadrature
            let q: f64 = (0..8).map(|k| {
                let a = -l + 2.0 * l * k as f64 / 8.0;
                crate::quadrature::rule(32).integrate(a, a + 2.0 * l / 8.0, |y| p.velocity(y))
            }).sum();
            prop_assert!(q.abs() < 1e-13 * l.max(1.0));
        }

        #[test]
        fn profile_vanishes_at_walls(l in 0.01f64..10.0, f in -5.0f64..5.0) {
            let p = PoiseuilleProfile::new(l, f, 1.0);
            prop_assert_eq!(p.velocity(l).unwrap(), 0.0);
            prop_assert_eq!(p.velocity(-l).unwrap(), 0.0);
        }
    }
}
