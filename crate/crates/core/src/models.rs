//! Concrete processes and perturbations: the jump-intensity constant, the
//! relativistic profile `phi`, and named presets.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::kernel::KernelParams;
use crate::measure::{Envelope, JumpFunctionalSpec, JumpProfile, MeasureSpec};
use crate::quad::{integrate_polar, QuadOpts, SphereRule};

/// Jump-intensity constant `A(d, -alpha)` of the isotropic stable process
/// normalized by `E exp(i xi X_t) = exp(-t |xi|^alpha)`.
pub fn levy_constant(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    alpha * 2f64.powf(alpha - 1.0) * gamma((df + alpha) / 2.0) / (PI.powf(df / 2.0) * gamma(1.0 - alpha / 2.0))
}

/// `ln phi(r)` by trapezoidal quadrature in `u = ln s`.
///
/// Below `r = 1` the integral of `1 - phi` (positive integrand, no
/// cancellation) is used so that `ln phi` keeps relative accuracy as `r -> 0`.
pub fn ln_phi(d: usize, alpha: f64, r: f64) -> f64 {
    let a = (d as f64 + alpha) / 2.0;
    let r2 = r * r;
    let norm = 2.0 * a * 2f64.ln() + ln_gamma(a);
    if r == 0.0 {
        return log_trapezoid(|u| a * u - 0.25 * u.exp(), -46.0 / a - 10.0, 8.0) - norm;
    }
    if r < 1.0 {
        let lo = r2.ln() - 46.0 / a.min(1.0) - 10.0;
        let omp = log_trapezoid(|u| a * u - 0.25 * u.exp() + (-(-r2 * (-u).exp()).exp_m1()).ln(), lo, 8.0) - norm;
        return (-omp.exp()).ln_1p();
    }
    let s_star = 2.0 * (a + (a * a + r2).sqrt());
    let span = 46.0 / a.min(1.0) + 10.0;
    log_trapezoid(|u| a * u - 0.25 * u.exp() - r2 * (-u).exp(), s_star.ln() - span, s_star.ln() + 6.0) - norm
}

// ln ∫_lo^hi exp(f(u)) du on a uniform grid; f is unimodal and negligible at both ends.
fn log_trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let h = 0.02;
    let n = ((hi - lo) / h).ceil() as usize;
    let vals: Vec<f64> = (0..=n).map(|i| f(lo + h * i as f64)).collect();
    let peak = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = vals.iter().map(|v| (v - peak).exp()).sum();
    peak + (sum * h).ln()
}

/// `phi(r)`; equals 1 at the origin and decreases.
pub fn phi_eval(d: usize, alpha: f64, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("phi needs r >= 0, got {r}")));
    }
    let v = ln_phi(d, alpha, r).exp();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("phi quadrature failed at r = {r}")));
    }
    Ok(v)
}

/// Tabulated `ln phi` on a log grid, interpolating `ln(-ln phi)` against
/// `ln r` with Catmull-Rom cubics.
struct PhiTable {
    d: usize,
    alpha: f64,
    lr0: f64,
    step: f64,
    vals: Vec<f64>,
}

const TABLE_R_MIN: f64 = 1e-8;
const TABLE_R_MAX: f64 = 400.0;
const TABLE_N: usize = 4000;

impl PhiTable {
    fn build(d: usize, alpha: f64) -> Self {
        let lr0 = TABLE_R_MIN.ln();
        let step = (TABLE_R_MAX.ln() - lr0) / (TABLE_N - 1) as f64;
        let vals = (0..TABLE_N)
            .map(|i| {
                let r = (lr0 + step * i as f64).exp();
                (-ln_phi(d, alpha, r)).ln()
            })
            .collect();
        PhiTable { d, alpha, lr0, step, vals }
    }

    fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= TABLE_R_MAX {
            return ln_phi(self.d, self.alpha, r);
        }
        let x = (r.ln() - self.lr0) / self.step;
        if x < 0.0 {
            // power law below the table
            let slope = (self.vals[1] - self.vals[0]) / self.step;
            return -(self.vals[0] + slope * x * self.step).exp();
        }
        let i = (x.floor() as usize).min(TABLE_N - 2);
        let f = x - i as f64;
        let p = |k: isize| self.vals[(i as isize + k).clamp(0, TABLE_N as isize - 1) as usize];
        let (p0, p1, p2, p3) = (p(-1), p(0), p(1), p(2));
        let v = p1
            + 0.5
                * f
                * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
        -v.exp()
    }
}

type TableMap = Mutex<HashMap<(usize, u64), Arc<PhiTable>>>;

fn table(d: usize, alpha: f64) -> Arc<PhiTable> {
    static TABLES: OnceLock<TableMap> = OnceLock::new();
    let map = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, alpha.to_bits());
    if let Some(t) = map.lock().expect("phi table lock").get(&key) {
        return t.clone();
    }
    let t = Arc::new(PhiTable::build(d, alpha));
    map.lock().expect("phi table lock").entry(key).or_insert(t).clone()
}

/// Fast `ln phi(r)` through the cached table.
pub fn ln_phi_fast(d: usize, alpha: f64, r: f64) -> f64 {
    table(d, alpha).eval(r)
}

/// Ratio `phi(r) / (e^{-r} (1 + r^{(d+alpha-1)/2}))`.
pub fn phi_asymptotic_ratio(d: usize, alpha: f64, r: f64) -> f64 {
    let e = (d as f64 + alpha - 1.0) / 2.0;
    (ln_phi(d, alpha, r) + r - (1.0 + r.powf(e)).ln()).exp()
}

/// Envelope constant `c = max |ln phi(m^{1/alpha} r)| / (r^2 ∧ 1)` over
/// `r in (0, diam]`, maximized on a log grid.
pub fn relativistic_envelope(d: usize, alpha: f64, m: f64, diam: f64) -> f64 {
    let n = 4000;
    let (lo, hi) = (1e-6f64.ln(), diam.ln());
    (0..=n)
        .map(|i| {
            let r = (lo + (hi - lo) * i as f64 / n as f64).exp();
            (-ln_phi_fast(d, alpha, m.powf(1.0 / alpha) * r)) / (r * r).min(1.0)
        })
        .fold(0.0, f64::max)
}

/// `F_m(x, y) = ln phi(m^{1/alpha} |x - y|)` with envelope `(c, 2)`.
pub fn relativistic_f(params: &KernelParams, m: f64, geom: &DomainGeometry) -> Result<JumpFunctionalSpec> {
    if !(m >= 0.0) {
        return Err(Error::Domain(format!("mass parameter must be nonnegative, got {m}")));
    }
    if !geom.is_bounded() {
        return Err(Error::Config("the relativistic envelope constant needs a bounded geometry".into()));
    }
    let diam = geom.diameter();
    let (d, alpha) = (params.d, params.alpha);
    let c = if m == 0.0 { 0.0 } else { relativistic_envelope(d, alpha, m, diam) };
    let bound = if m == 0.0 { 0.0 } else { -ln_phi_fast(d, alpha, m.powf(1.0 / alpha) * diam) };
    Ok(JumpFunctionalSpec {
        profile: JumpProfile::LnPhi { m, d, alpha },
        exp_depth: 0,
        bound,
        envelope: Some(Envelope { a: c, beta: 2.0 }),
        cutoff: None,
    })
}

/// `g_m(x) = A(d,-alpha) ∫_D (1 - phi(m^{1/alpha}|x-y|)) |x-y|^{-d-alpha} dy`,
/// which equals `m` on the whole space.
pub fn relativistic_g(params: &KernelParams, m: f64, geom: &DomainGeometry, x: &[f64]) -> Result<f64> {
    if m == 0.0 {
        return Ok(0.0);
    }
    if geom.delta(x) <= 0.0 {
        return Err(Error::Domain("g_m needs x inside D".into()));
    }
    let (d, alpha) = (params.d, params.alpha);
    let scale = m.powf(1.0 / alpha);
    let rule = SphereRule::new(d, 24)?;
    let da = d as f64 + alpha;
    let knee = 1.0 / scale;
    let v = integrate_polar(geom, x, &rule, &[0.0, knee], f64::INFINITY, &QuadOpts::fine(), |_, r| {
        -(ln_phi_fast(d, alpha, scale * r)).exp_m1() * r.powf(-da)
    });
    let g = levy_constant(d, alpha) * v;
    if !g.is_finite() {
        return Err(Error::Numeric("g_m quadrature produced a non-finite value".into()));
    }
    if g > m * (1.0 + 1e-6) {
        return Err(Error::Numeric(format!("g_m = {g} exceeds m = {m}")));
    }
    Ok(g.min(m))
}

/// Non-negative symmetric jump intensity `c(x, y)` bounded in `[1/C0, C0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Intensity {
    Constant { c: f64 },
    /// `c (1 + amplitude sin(freq (x_1 + y_1)))`.
    Oscillating { c: f64, amplitude: f64, freq: f64 },
}

impl Intensity {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Intensity::Constant { c } => c,
            Intensity::Oscillating { c, amplitude, freq } => c * (1.0 + amplitude * (freq * (x[0] + y[0])).sin()),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Intensity::Constant { c } => c,
            Intensity::Oscillating { c, amplitude, .. } => c * (1.0 + amplitude.abs()),
        }
    }

    pub fn inf(&self) -> f64 {
        match *self {
            Intensity::Constant { c } => c,
            Intensity::Oscillating { c, amplitude, .. } => c * (1.0 - amplitude.abs()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Intensity::Constant { .. })
    }
}

/// A named `(process, mu, F)` instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPreset {
    pub name: String,
    pub params: KernelParams,
    pub geometry: DomainGeometry,
    pub mu: MeasureSpec,
    pub jump: JumpFunctionalSpec,
    pub intensity: Intensity,
    /// Whether the Monte Carlo simulator can run this preset.
    pub simulable: bool,
}

/// Optional overrides applied when building a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresetOverrides {
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub c0: Option<f64>,
    pub m: Option<f64>,
}

pub const PRESET_NAMES: [&str; 5] = ["stable-like-d-set", "killed-stable", "relativistic", "censored", "drift"];

/// Boundary exponent attached to each preset family.
pub fn expected_gamma(name: &str, alpha: f64) -> Option<f64> {
    match name {
        "stable-like-d-set" => Some(0.0),
        "killed-stable" | "relativistic" | "drift" => Some(alpha / 2.0),
        "censored" => Some(alpha - 1.0),
        _ => None,
    }
}

fn default_domain(d: usize) -> DomainGeometry {
    if d == 1 {
        DomainGeometry::intervals(vec![(-1.0, 1.0)])
    } else {
        DomainGeometry::ball(vec![0.0; d], 1.0)
    }
}

pub fn preset(name: &str, ov: &PresetOverrides) -> Result<ModelPreset> {
    let d = ov.d.unwrap_or(if name == "drift" { 2 } else { 1 });
    let alpha = ov.alpha.unwrap_or(match name {
        "censored" | "drift" => 1.5,
        _ => 1.0,
    });
    let c0 = ov.c0.unwrap_or(if d == 1 && alpha == 1.0 { 2.0 * PI } else { 10.0 });
    let gamma = expected_gamma(name, alpha).ok_or_else(|| {
        Error::Config(format!("unknown preset '{name}'; expected one of {}", PRESET_NAMES.join(", ")))
    })?;
    let params = KernelParams::new(d, alpha, gamma, c0)?;
    let a = levy_constant(d, alpha);
    let constant = Intensity::Constant { c: a };
    let out = match name {
        "stable-like-d-set" => ModelPreset {
            name: name.into(),
            params,
            geometry: DomainGeometry::WholeSpace,
            mu: MeasureSpec::Zero,
            jump: JumpFunctionalSpec::zero(),
            intensity: Intensity::Oscillating { c: a, amplitude: 0.5, freq: 1.0 },
            simulable: false,
        },
        "killed-stable" => ModelPreset {
            name: name.into(),
            params,
            geometry: default_domain(d),
            mu: MeasureSpec::Zero,
            jump: JumpFunctionalSpec::zero(),
            intensity: constant,
            simulable: true,
        },
        "relativistic" => {
            let m = ov.m.unwrap_or(1.0);
            let geometry = default_domain(d);
            let jump = relativistic_f(&params, m, &geometry)?;
            ModelPreset {
                name: name.into(),
                params,
                mu: if m == 0.0 { MeasureSpec::Zero } else { MeasureSpec::constant(m) },
                geometry,
                jump,
                intensity: constant,
                simulable: true,
            }
        }
        "censored" => {
            if !(alpha > 1.0) {
                return Err(Error::Config("the censored preset needs alpha in (1,2)".into()));
            }
            ModelPreset {
                name: name.into(),
                params,
                geometry: default_domain(d),
                mu: MeasureSpec::Zero,
                jump: JumpFunctionalSpec::zero(),
                intensity: constant,
                simulable: false,
            }
        }
        "drift" => {
            if d < 2 || !(alpha > 1.0) {
                return Err(Error::Config("the drift preset needs d >= 2 and alpha in (1,2)".into()));
            }
            ModelPreset {
                name: name.into(),
                params,
                geometry: default_domain(d),
                mu: MeasureSpec::Zero,
                jump: JumpFunctionalSpec::zero(),
                intensity: constant,
                simulable: false,
            }
        }
        _ => unreachable!(),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levy_constant_values() {
        assert!((levy_constant(1, 1.0) - 1.0 / PI).abs() < 1e-14);
        // d = 3, alpha = 1: Gamma(2) / (pi^{3/2} Gamma(1/2)) = 1 / pi^2
        assert!((levy_constant(3, 1.0) - 1.0 / (PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn phi_at_origin_and_closed_form() {
        assert!((phi_eval(1, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((phi_eval(2, 1.3, 0.0).unwrap() - 1.0).abs() < 1e-12);
        for r in [1e-7, 0.01, 0.5, 1.0, 3.0, 20.0, 45.0] {
            // d + alpha = 3
            let exact = (1.0f64 + r).ln() - r;
            let v = ln_phi(2, 1.0, r);
            assert!((v - exact).abs() < 1e-11 * exact.abs().max(1e-3), "r = {r}: {v} vs {exact}");
        }
    }

    #[test]
    fn table_matches_direct() {
        for (d, alpha) in [(1, 1.0), (1, 0.5), (2, 1.5), (3, 1.0)] {
            for r in [1e-8, 2e-7, 3e-5, 1e-3, 0.2, 0.999, 1.0, 7.0, 60.0, 390.0] {
                let exact = ln_phi(d, alpha, r);
                let fast = ln_phi_fast(d, alpha, r);
                assert!(((fast - exact) / exact).abs() < 1e-7, "d={d} a={alpha} r={r}: {fast} vs {exact}");
            }
        }
    }

    #[test]
    fn whole_space_g_is_m() {
        let p = KernelParams::new(1, 1.0, 0.0, 2.0).unwrap();
        for m in [0.5, 1.0, 3.0] {
            let g = relativistic_g(&p, m, &DomainGeometry::WholeSpace, &[0.0]).unwrap();
            assert!((g - m).abs() < 1e-6 * m, "m={m}: {g}");
        }
    }

    #[test]
    fn presets_have_catalog_gamma() {
        for name in PRESET_NAMES {
            let p = preset(name, &PresetOverrides::default()).unwrap();
            assert_eq!(p.params.gamma, expected_gamma(name, p.params.alpha).unwrap());
        }
        assert!(preset("nope", &PresetOverrides::default()).is_err());
    }
}
