//! Perturbation specs: signed measures `mu` and jump functionals `F`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, DomainGeometry};

/// Closed catalog of signed densities on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DensityFn {
    Constant { value: f64 },
    /// `value` on the box `[lo, hi]`, zero elsewhere.
    Box { value: f64, lo: Vec<f64>, hi: Vec<f64> },
    /// `value` on the open ball.
    Ball { value: f64, center: Vec<f64>, radius: f64 },
    /// `c |x - center|^{-exponent}`, restricted to `|x - center| < radius`
    /// when a radius is given.
    RadialPower { c: f64, center: Vec<f64>, exponent: f64, radius: Option<f64> },
    /// `value (1 + amplitude sin(freq x_1))`.
    Oscillating { value: f64, amplitude: f64, freq: f64 },
    Sum { terms: Vec<DensityFn> },
}

impl DensityFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DensityFn::Constant { value } => *value,
            DensityFn::Box { value, lo, hi } => {
                if x.iter().zip(lo.iter().zip(hi)).all(|(p, (a, b))| *p >= *a && *p <= *b) {
                    *value
                } else {
                    0.0
                }
            }
            DensityFn::Ball { value, center, radius } => {
                if dist(x, center) < *radius {
                    *value
                } else {
                    0.0
                }
            }
            DensityFn::RadialPower { c, center, exponent, radius } => {
                let r = dist(x, center);
                if radius.is_some_and(|rad| r >= rad) {
                    0.0
                } else {
                    c * r.powf(-exponent)
                }
            }
            DensityFn::Oscillating { value, amplitude, freq } => value * (1.0 + amplitude * (freq * x[0]).sin()),
            DensityFn::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    /// Upper bound for `|V|`; infinite for singular densities.
    pub fn sup_abs(&self) -> f64 {
        match self {
            DensityFn::Constant { value } | DensityFn::Box { value, .. } | DensityFn::Ball { value, .. } => value.abs(),
            DensityFn::RadialPower { c, exponent, .. } => {
                if *exponent > 0.0 && *c != 0.0 {
                    f64::INFINITY
                } else {
                    c.abs()
                }
            }
            DensityFn::Oscillating { value, amplitude, .. } => value.abs() * (1.0 + amplitude.abs()),
            DensityFn::Sum { terms } => terms.iter().map(|t| t.sup_abs()).sum(),
        }
    }

    /// Points where the density is singular.
    pub fn singular_points(&self) -> Vec<Vec<f64>> {
        match self {
            DensityFn::RadialPower { center, exponent, .. } if *exponent > 0.0 => vec![center.clone()],
            DensityFn::Sum { terms } => terms.iter().flat_map(|t| t.singular_points()).collect(),
            _ => vec![],
        }
    }

    /// Representative points of the support (centers, corners) used as sup
    /// candidates.
    pub fn landmarks(&self) -> Vec<Vec<f64>> {
        match self {
            DensityFn::Box { lo, hi, .. } => {
                let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                vec![mid, lo.clone(), hi.clone()]
            }
            DensityFn::Ball { center, .. } | DensityFn::RadialPower { center, .. } => vec![center.clone()],
            DensityFn::Sum { terms } => terms.iter().flat_map(|t| t.landmarks()).collect(),
            _ => vec![],
        }
    }

    /// Restricts a ray `origin + r dir`, `r in [0, r_max]`, to the support.
    /// Returns `None` when the support is unbounded along the ray; kinks and
    /// singular radii are appended to the given buffers.
    pub fn ray_support(
        &self,
        origin: &[f64],
        dir: &[f64],
        r_max: f64,
        kinks: &mut Vec<f64>,
        singular: &mut Vec<f64>,
    ) -> Option<Vec<(f64, f64)>> {
        match self {
            DensityFn::Constant { .. } | DensityFn::Oscillating { .. } => None,
            DensityFn::Box { lo, hi, .. } => {
                let (mut a, mut b) = (0.0f64, r_max);
                for i in 0..origin.len() {
                    if dir[i] == 0.0 {
                        if origin[i] < lo[i] || origin[i] > hi[i] {
                            return Some(vec![]);
                        }
                        continue;
                    }
                    let (r0, r1) = ((lo[i] - origin[i]) / dir[i], (hi[i] - origin[i]) / dir[i]);
                    a = a.max(r0.min(r1));
                    b = b.min(r0.max(r1));
                }
                kinks.extend([a, b]);
                Some(if b > a { vec![(a, b)] } else { vec![] })
            }
            DensityFn::Ball { center, radius, .. } => {
                let segs = DomainGeometry::ball(center.clone(), *radius).ray_segments(origin, dir, r_max);
                kinks.extend(segs.iter().flat_map(|s| [s.0, s.1]));
                Some(segs)
            }
            DensityFn::RadialPower { center, radius, exponent, .. } => {
                if *exponent > 0.0 {
                    if let Some(r) = center_on_ray(origin, dir, center) {
                        singular.push(r);
                    }
                }
                match radius {
                    Some(rad) => {
                        let segs = DomainGeometry::ball(center.clone(), *rad).ray_segments(origin, dir, r_max);
                        kinks.extend(segs.iter().flat_map(|s| [s.0, s.1]));
                        Some(segs)
                    }
                    None => None,
                }
            }
            DensityFn::Sum { terms } => {
                let mut all = Vec::new();
                let mut unbounded = false;
                for t in terms {
                    match t.ray_support(origin, dir, r_max, kinks, singular) {
                        Some(s) => all.extend(s),
                        None => unbounded = true,
                    }
                }
                if unbounded {
                    None
                } else {
                    Some(union(all))
                }
            }
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let check = |v: &Vec<f64>, what: &str| -> Result<()> {
            if v.len() != d {
                return Err(Error::Config(format!("{what} has {} coordinates, expected {d}", v.len())));
            }
            Ok(())
        };
        match self {
            DensityFn::Box { lo, hi, .. } => {
                check(lo, "box lo")?;
                check(hi, "box hi")?;
                if lo.iter().zip(hi).any(|(a, b)| b <= a) {
                    return Err(Error::Config("box needs lo < hi in every coordinate".into()));
                }
                Ok(())
            }
            DensityFn::Ball { center, radius, .. } => {
                check(center, "ball center")?;
                if *radius <= 0.0 {
                    return Err(Error::Config("ball radius must be positive".into()));
                }
                Ok(())
            }
            DensityFn::RadialPower { center, .. } => check(center, "radial-power center"),
            DensityFn::Sum { terms } => terms.iter().try_for_each(|t| t.validate(d)),
            _ => Ok(()),
        }
    }
}

fn center_on_ray(origin: &[f64], dir: &[f64], center: &[f64]) -> Option<f64> {
    let r: f64 = center.iter().zip(origin).zip(dir).map(|((c, o), u)| (c - o) * u).sum();
    if r < 0.0 {
        return None;
    }
    let off: f64 = center
        .iter()
        .zip(origin)
        .zip(dir)
        .map(|((c, o), u)| (o + r * u - c).powi(2))
        .sum::<f64>()
        .sqrt();
    (off <= 1e-12 * (1.0 + r)).then_some(r)
}

fn union(mut segs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    segs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for s in segs {
        match out.last_mut() {
            Some(l) if s.0 <= l.1 => l.1 = l.1.max(s.1),
            _ => out.push(s),
        }
    }
    out
}

/// Point mass of a signed atomic measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Signed measure `mu` on `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureSpec {
    Zero,
    Density { density: DensityFn },
    Atomic { atoms: Vec<Atom> },
    /// `c delta_D(x)^{-beta} dx`.
    PowerBoundary { c: f64, beta: f64 },
}

impl MeasureSpec {
    pub fn density(density: DensityFn) -> Self {
        MeasureSpec::Density { density }
    }

    pub fn constant(v: f64) -> Self {
        MeasureSpec::Density { density: DensityFn::Constant { value: v } }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            MeasureSpec::Zero => true,
            MeasureSpec::Density { density } => density.sup_abs() == 0.0,
            MeasureSpec::Atomic { atoms } => atoms.iter().all(|a| a.weight == 0.0),
            MeasureSpec::PowerBoundary { c, .. } => *c == 0.0,
        }
    }

    /// Signed density at `x` (zero for atomic measures).
    pub fn density_at(&self, geom: &DomainGeometry, x: &[f64]) -> f64 {
        match self {
            MeasureSpec::Zero | MeasureSpec::Atomic { .. } => 0.0,
            MeasureSpec::Density { density } => density.eval(x),
            MeasureSpec::PowerBoundary { c, beta } => {
                let dl = geom.delta(x);
                if dl > 0.0 {
                    c * dl.powf(-beta)
                } else {
                    0.0
                }
            }
        }
    }

    /// `|mu|` density at `x`.
    pub fn abs_density_at(&self, geom: &DomainGeometry, x: &[f64]) -> f64 {
        self.density_at(geom, x).abs()
    }

    /// Bound on `|V|` used by per-path weight checks.
    pub fn sup_abs(&self) -> f64 {
        match self {
            MeasureSpec::Zero => 0.0,
            MeasureSpec::Density { density } => density.sup_abs(),
            MeasureSpec::Atomic { .. } => f64::INFINITY,
            MeasureSpec::PowerBoundary { c, beta } => {
                if *beta > 0.0 && *c != 0.0 {
                    f64::INFINITY
                } else {
                    c.abs()
                }
            }
        }
    }

    /// The absolute-value measure `|mu|`.
    pub fn abs(&self) -> MeasureSpec {
        fn abs_density(d: &DensityFn) -> DensityFn {
            match d {
                DensityFn::Constant { value } => DensityFn::Constant { value: value.abs() },
                DensityFn::Box { value, lo, hi } => DensityFn::Box { value: value.abs(), lo: lo.clone(), hi: hi.clone() },
                DensityFn::Ball { value, center, radius } => {
                    DensityFn::Ball { value: value.abs(), center: center.clone(), radius: *radius }
                }
                DensityFn::RadialPower { c, center, exponent, radius } => {
                    DensityFn::RadialPower { c: c.abs(), center: center.clone(), exponent: *exponent, radius: *radius }
                }
                DensityFn::Oscillating { value, amplitude, freq } if amplitude.abs() <= 1.0 => {
                    DensityFn::Oscillating { value: value.abs(), amplitude: *amplitude, freq: *freq }
                }
                // sign changes inside a sum or a large oscillation: bound by the sum of magnitudes
                DensityFn::Oscillating { value, amplitude, .. } => {
                    DensityFn::Constant { value: value.abs() * (1.0 + amplitude.abs()) }
                }
                DensityFn::Sum { terms } => DensityFn::Sum { terms: terms.iter().map(abs_density).collect() },
            }
        }
        match self {
            MeasureSpec::Zero => MeasureSpec::Zero,
            MeasureSpec::Density { density } => MeasureSpec::Density { density: abs_density(density) },
            MeasureSpec::Atomic { atoms } => MeasureSpec::Atomic {
                atoms: atoms.iter().map(|a| Atom { point: a.point.clone(), weight: a.weight.abs() }).collect(),
            },
            MeasureSpec::PowerBoundary { c, beta } => MeasureSpec::PowerBoundary { c: c.abs(), beta: *beta },
        }
    }

    /// Multiplies the measure by `k`.
    pub fn scaled(&self, k: f64) -> MeasureSpec {
        fn scale(d: &DensityFn, k: f64) -> DensityFn {
            match d {
                DensityFn::Constant { value } => DensityFn::Constant { value: k * value },
                DensityFn::Box { value, lo, hi } => DensityFn::Box { value: k * value, lo: lo.clone(), hi: hi.clone() },
                DensityFn::Ball { value, center, radius } => {
                    DensityFn::Ball { value: k * value, center: center.clone(), radius: *radius }
                }
                DensityFn::RadialPower { c, center, exponent, radius } => {
                    DensityFn::RadialPower { c: k * c, center: center.clone(), exponent: *exponent, radius: *radius }
                }
                DensityFn::Oscillating { value, amplitude, freq } => {
                    DensityFn::Oscillating { value: k * value, amplitude: *amplitude, freq: *freq }
                }
                DensityFn::Sum { terms } => DensityFn::Sum { terms: terms.iter().map(|t| scale(t, k)).collect() },
            }
        }
        match self {
            MeasureSpec::Zero => MeasureSpec::Zero,
            MeasureSpec::Density { density } => MeasureSpec::Density { density: scale(density, k) },
            MeasureSpec::Atomic { atoms } => MeasureSpec::Atomic {
                atoms: atoms.iter().map(|a| Atom { point: a.point.clone(), weight: k * a.weight }).collect(),
            },
            MeasureSpec::PowerBoundary { c, beta } => MeasureSpec::PowerBoundary { c: k * c, beta: *beta },
        }
    }

    pub fn validate(&self, d: usize, geom: &DomainGeometry) -> Result<()> {
        match self {
            MeasureSpec::Zero => Ok(()),
            MeasureSpec::Density { density } => density.validate(d),
            MeasureSpec::Atomic { atoms } => {
                for a in atoms {
                    if a.point.len() != d {
                        return Err(Error::Config("atom point has the wrong dimension".into()));
                    }
                    if !geom.contains(&a.point) {
                        return Err(Error::Config(format!("atom at {:?} lies outside D", a.point)));
                    }
                }
                Ok(())
            }
            MeasureSpec::PowerBoundary { beta, .. } => {
                if !geom.is_bounded() {
                    return Err(Error::Config("power-boundary measures need a bounded geometry".into()));
                }
                if *beta < 0.0 {
                    return Err(Error::Config("power-boundary exponent must be nonnegative".into()));
                }
                Ok(())
            }
        }
    }

    /// Whether the boundary exponent lies in the sufficient range
    /// `beta < gamma + (alpha - gamma) / d`.
    pub fn power_boundary_admissible(&self, d: usize, alpha: f64, gamma: f64) -> Option<bool> {
        match self {
            MeasureSpec::PowerBoundary { beta, .. } => Some(*beta < gamma + (alpha - gamma) / d as f64),
            _ => None,
        }
    }
}

/// Radial profile `f(|z - w|)` of a jump functional `F(z, w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum JumpProfile {
    Zero,
    /// `value` off the diagonal.
    Constant { value: f64 },
    /// `a (rho^beta ∧ 1)`.
    PowerCap { a: f64, beta: f64 },
    /// `ln phi(m^{1/alpha} rho)` for the relativistic transform in
    /// dimension `d`.
    LnPhi { m: f64, d: usize, alpha: f64 },
}

impl JumpProfile {
    pub fn eval(&self, rho: f64) -> f64 {
        if rho == 0.0 {
            return 0.0;
        }
        match self {
            JumpProfile::Zero => 0.0,
            JumpProfile::Constant { value } => *value,
            JumpProfile::PowerCap { a, beta } => a * rho.powf(*beta).min(1.0),
            JumpProfile::LnPhi { m, d, alpha } => {
                if *m == 0.0 {
                    0.0
                } else {
                    crate::models::ln_phi_fast(*d, *alpha, m.powf(1.0 / alpha) * rho)
                }
            }
        }
    }
}

/// Envelope `|F|(z, w) <= a (|z - w|^beta ∧ 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub a: f64,
    pub beta: f64,
}

/// Bounded jump functional `F(z, w) = T(f(|z - w|))`, where `T` applies
/// `x -> e^x - 1` `exp_depth` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpFunctionalSpec {
    pub profile: JumpProfile,
    #[serde(default)]
    pub exp_depth: u8,
    /// `||F||_inf`.
    pub bound: f64,
    #[serde(default)]
    pub envelope: Option<Envelope>,
    /// Jumps shorter than the cutoff are ignored by the norm.
    #[serde(default)]
    pub cutoff: Option<f64>,
}

impl JumpFunctionalSpec {
    pub fn zero() -> Self {
        JumpFunctionalSpec { profile: JumpProfile::Zero, exp_depth: 0, bound: 0.0, envelope: None, cutoff: None }
    }

    /// `F = a (|z - w|^beta ∧ 1)` with its own envelope.
    pub fn power_cap(a: f64, beta: f64) -> Self {
        JumpFunctionalSpec {
            profile: JumpProfile::PowerCap { a, beta },
            exp_depth: 0,
            bound: a.abs(),
            envelope: Some(Envelope { a: a.abs(), beta }),
            cutoff: None,
        }
    }

    /// `F = value` off the diagonal; only usable with a cutoff.
    pub fn constant(value: f64, cutoff: Option<f64>) -> Self {
        JumpFunctionalSpec { profile: JumpProfile::Constant { value }, exp_depth: 0, bound: value.abs(), envelope: None, cutoff }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.profile, JumpProfile::Zero) || self.bound == 0.0
    }

    pub fn eval_radial(&self, rho: f64) -> f64 {
        let mut v = self.profile.eval(rho);
        for _ in 0..self.exp_depth {
            v = v.exp_m1();
        }
        v
    }

    pub fn eval(&self, z: &[f64], w: &[f64]) -> f64 {
        self.eval_radial(dist(z, w))
    }

    /// `|F|(z, w) + |F|(w, z)` as a function of `|z - w|`.
    pub fn sym_abs(&self, rho: f64) -> f64 {
        if let Some(c) = self.cutoff {
            if rho < c {
                return 0.0;
            }
        }
        2.0 * self.eval_radial(rho).abs()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound.is_finite() && self.bound >= 0.0) {
            return Err(Error::Config("jump functional needs a finite sup-norm bound".into()));
        }
        if let Some(e) = self.envelope {
            if !(e.a >= 0.0 && e.beta > 0.0) {
                return Err(Error::Config("envelope needs a >= 0 and beta > 0".into()));
            }
        }
        Ok(())
    }
}

/// `F_1 = e^F - 1` with bound `e^{||F||} - 1` and envelope scaled by
/// `e^{||F||}`.
pub fn derive_f1(f: &JumpFunctionalSpec) -> JumpFunctionalSpec {
    let k = f.bound.exp();
    JumpFunctionalSpec {
        profile: f.profile.clone(),
        exp_depth: f.exp_depth + 1,
        bound: f.bound.exp_m1(),
        envelope: f.envelope.map(|e| Envelope { a: k * e.a, beta: e.beta }),
        cutoff: f.cutoff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        let z = derive_f1(&JumpFunctionalSpec::zero());
        assert_eq!(z.eval_radial(0.3), 0.0);
        let c = derive_f1(&JumpFunctionalSpec::constant(2f64.ln(), Some(0.1)));
        assert!((c.eval_radial(0.5) - 1.0).abs() < 1e-15);
        assert!((c.bound - 1.0).abs() < 1e-15);
        let p = derive_f1(&JumpFunctionalSpec::power_cap(0.5, 2.0));
        let e = p.envelope.unwrap();
        assert!((e.a - 0.5 * 0.5f64.exp()).abs() < 1e-15);
        assert_eq!(e.beta, 2.0);
    }

    #[test]
    fn diagonal_vanishes() {
        for f in [JumpFunctionalSpec::constant(1.0, None), JumpFunctionalSpec::power_cap(3.0, 1.7)] {
            assert_eq!(f.eval(&[0.4], &[0.4]), 0.0);
            assert_eq!(derive_f1(&f).eval(&[0.4], &[0.4]), 0.0);
        }
    }

    #[test]
    fn box_ray_support() {
        let b = DensityFn::Box { value: 1.0, lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
        let (mut k, mut s) = (vec![], vec![]);
        let segs = b.ray_support(&[0.0, 0.0], &[1.0, 0.0], 10.0, &mut k, &mut s).unwrap();
        assert_eq!(segs, vec![(0.0, 1.0)]);
        let segs = b.ray_support(&[-3.0, 0.5], &[1.0, 0.0], 10.0, &mut k, &mut s).unwrap();
        assert_eq!(segs, vec![(2.0, 4.0)]);
    }

    #[test]
    fn abs_and_scale() {
        let m = MeasureSpec::constant(-0.3);
        let g = DomainGeometry::WholeSpace;
        assert_eq!(m.abs().density_at(&g, &[0.0]), 0.3);
        assert!((m.scaled(2.0).density_at(&g, &[0.0]) + 0.6).abs() < 1e-15);
    }
}
