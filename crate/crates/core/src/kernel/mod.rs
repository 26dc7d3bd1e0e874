//! Reference kernel `q`, boundary factor `psi_gamma` and the two-sided band.

pub mod time;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::geometry::{dist, DomainGeometry};

/// Global scalar context: dimension, stability index, boundary exponent and
/// comparison constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub d: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub c0: f64,
}

impl KernelParams {
    pub fn new(d: usize, alpha: f64, gamma: f64, c0: f64) -> Result<Self> {
        let p = KernelParams { d, alpha, gamma, c0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return domain("dimension must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return domain(format!("alpha must lie in (0,2), got {}", self.alpha));
        }
        let cap = self.alpha.min(self.d as f64);
        if !(self.gamma >= 0.0 && self.gamma < cap) {
            return domain(format!("gamma must lie in [0, {cap}), got {}", self.gamma));
        }
        if !(self.c0 > 1.0 && self.c0.is_finite()) {
            return domain(format!("c0 must exceed 1, got {}", self.c0));
        }
        Ok(())
    }

    /// `d + alpha`, the exponent of the jump kernel.
    pub fn da(&self) -> f64 {
        self.d as f64 + self.alpha
    }

    /// Parabolic length scale `t^{1/alpha}`.
    pub fn scale(&self, t: f64) -> f64 {
        t.powf(1.0 / self.alpha)
    }
}

/// `q` as a function of `r = |x - y|`.
#[inline]
pub fn q_radial(d: usize, alpha: f64, t: f64, r: f64) -> f64 {
    let on_diag = t.powf(-(d as f64) / alpha);
    if r == 0.0 {
        return on_diag;
    }
    on_diag.min(t * r.powf(-(d as f64 + alpha)))
}

/// `ln q`, usable where the kernel itself underflows.
#[inline]
pub fn ln_q_radial(d: usize, alpha: f64, t: f64, r: f64) -> f64 {
    let on_diag = -(d as f64) / alpha * t.ln();
    if r == 0.0 {
        return on_diag;
    }
    on_diag.min(t.ln() - (d as f64 + alpha) * r.ln())
}

pub fn q_eval(params: &KernelParams, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("q requires t > 0, got {t}"));
    }
    Ok(q_radial(params.d, params.alpha, t, dist(x, y)))
}

/// `(1 ∧ delta / t^{1/alpha})`; short-circuits to 1 for the whole space.
#[inline]
pub fn clip(delta: f64, t: f64, alpha: f64) -> f64 {
    if delta == f64::INFINITY {
        return 1.0;
    }
    (delta / t.powf(1.0 / alpha)).min(1.0)
}

/// `(1 ∧ delta / t^{1/alpha})^gamma`.
#[inline]
pub fn clip_pow(delta: f64, t: f64, alpha: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 1.0;
    }
    clip(delta, t, alpha).powf(gamma)
}

/// Boundary factor from the two distances directly.
#[inline]
pub fn psi_from_deltas(params: &KernelParams, t: f64, dx: f64, dy: f64) -> f64 {
    clip_pow(dx, t, params.alpha, params.gamma) * clip_pow(dy, t, params.alpha, params.gamma)
}

pub fn psi_gamma(params: &KernelParams, geom: &DomainGeometry, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("psi requires t > 0, got {t}"));
    }
    let (dx, dy) = (geom.delta(x), geom.delta(y));
    if dx <= 0.0 || dy <= 0.0 {
        return domain("psi requires both points inside D");
    }
    Ok(psi_from_deltas(params, t, dx, dy))
}

pub fn delta_d(geom: &DomainGeometry, x: &[f64]) -> f64 {
    geom.delta(x)
}

/// `(C0^{-1} psi q, C0 psi q)`.
pub fn surrogate_band(
    params: &KernelParams,
    geom: &DomainGeometry,
    t: f64,
    x: &[f64],
    y: &[f64],
) -> Result<(f64, f64)> {
    if !(t > 0.0 && t <= 1.0) {
        return domain(format!("the band is asserted on t in (0,1], got {t}"));
    }
    let mid = psi_gamma(params, geom, t, x, y)? * q_eval(params, t, x, y)?;
    Ok((mid / params.c0, mid * params.c0))
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Spatial mass of `q(t, x, .)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassBounds {
    /// Mass computed at the requested `t`.
    pub value: f64,
    /// Lower and upper comparison values `(1/C0, C0)`.
    pub lower: f64,
    pub upper: f64,
}

impl MassBounds {
    pub fn holds(&self) -> bool {
        self.lower <= self.value && self.value <= self.upper
    }
}

/// Integrates `q(t, x, .)` radially, splitting at `r = t^{1/alpha}`; both
/// pieces are power integrals and the tail is exact.
pub fn q_mass(params: &KernelParams, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("mass requires t > 0, got {t}"));
    }
    let d = params.d as f64;
    let r0 = params.scale(t);
    // inner: t^{-d/a} r0^d / d ; outer: t * r0^{-a} / a
    let inner = t.powf(-d / params.alpha) * r0.powf(d) / d;
    let outer = t * r0.powf(-params.alpha) / params.alpha;
    let m = sphere_area(params.d) * (inner + outer);
    let closed = sphere_area(params.d) * (1.0 / d + 1.0 / params.alpha);
    if !m.is_finite() || ((m - closed) / closed).abs() > 1e-9 {
        return Err(Error::Numeric(format!(
            "mass of q at t = {t} came out {m}, the scale-free value is {closed}"
        )));
    }
    Ok(m)
}

pub fn q_mass_bounds(params: &KernelParams, t: f64) -> Result<MassBounds> {
    let value = q_mass(params, t)?;
    Ok(MassBounds { value, lower: 1.0 / params.c0, upper: params.c0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: usize, a: f64, g: f64) -> KernelParams {
        KernelParams::new(d, a, g, 2.0).unwrap()
    }

    #[test]
    fn q_examples() {
        let k = p(1, 1.0, 0.0);
        assert_eq!(q_eval(&k, 1.0, &[0.0], &[0.0]).unwrap(), 1.0);
        // d + alpha = 2, so the off-diagonal branch is 2^{-2}
        assert_eq!(q_eval(&k, 1.0, &[0.0], &[2.0]).unwrap(), 0.25);
        let k2 = p(2, 1.5, 0.0);
        let v = q_eval(&k2, 0.5, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((v - 0.5f64.min(0.5f64.powf(-4.0 / 3.0))).abs() < 1e-15);
        assert!(q_eval(&k, 0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn param_guards() {
        assert!(KernelParams::new(1, 2.0, 0.0, 2.0).is_err());
        assert!(KernelParams::new(1, 1.0, 1.0, 2.0).is_err());
        assert!(KernelParams::new(1, 1.0, 0.5, 1.0).is_err());
        assert!(KernelParams::new(0, 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn psi_examples() {
        let k = KernelParams::new(2, 1.0, 0.999, 2.0).unwrap();
        let v = psi_gamma(&k, &DomainGeometry::HalfSpace, 1.0, &[2.0, 0.0], &[0.5, 0.0]).unwrap();
        assert!((v - 0.5f64.powf(0.999)).abs() < 1e-15);
        assert!(psi_gamma(&k, &DomainGeometry::HalfSpace, 1.0, &[-1.0, 0.0], &[0.5, 0.0]).is_err());
        let k0 = p(1, 1.0, 0.0);
        assert_eq!(psi_gamma(&k0, &DomainGeometry::WholeSpace, 3.0, &[1.0], &[2.0]).unwrap(), 1.0);
    }

    #[test]
    fn band_ratio_is_c0_squared() {
        let k = KernelParams::new(1, 1.2, 0.5, 3.0).unwrap();
        let g = DomainGeometry::intervals(vec![(0.0, 1.0)]);
        let (lo, hi) = surrogate_band(&k, &g, 0.3, &[0.2], &[0.7]).unwrap();
        assert!((hi / lo - 9.0).abs() < 1e-12);
    }

    #[test]
    fn mass_closed_form() {
        let m = q_mass(&p(1, 1.0, 0.0), 0.37).unwrap();
        assert!((m - 4.0).abs() < 1e-12);
        let k = p(2, 0.5, 0.0);
        let a = q_mass(&k, 0.1).unwrap();
        let b = q_mass(&k, 1.0).unwrap();
        assert!((a / b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
    }
}
