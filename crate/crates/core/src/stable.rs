//! Isotropic symmetric alpha-stable densities normalized by
//! `E exp(i xi . X_t) = exp(-t |xi|^alpha)`, evaluated by radial Fourier
//! inversion with a convergent (or asymptotic) power series at large radius.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernel::sphere_area;
use crate::quad::{gl, graded_panels, QuadOpts};

/// `J_0` by its power series below 12 and the Hankel expansion above.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 12.0 {
        let q = -0.25 * x * x;
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        for k in 1..80 {
            term *= q / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        return sum;
    }
    // a_k = prod_{j<=k} (-(2j-1)^2) / (k! 8^k)
    let (mut p, mut q) = (0.0f64, 0.0f64);
    let mut a = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 0..60usize {
        if k > 0 {
            let j = (2 * k - 1) as f64;
            a *= -(j * j) / (k as f64 * 8.0);
        }
        let term = a / x.powi(k as i32);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        // P takes even k with sign (-1)^{k/2}, Q odd k with sign (-1)^{(k-1)/2}
        if k % 2 == 0 {
            p += if (k / 2) % 2 == 0 { term } else { -term };
        } else {
            q += if ((k - 1) / 2) % 2 == 0 { term } else { -term };
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Profile value at the origin, `|S^{d-1}| Gamma(d/alpha) / (alpha (2 pi)^d)`.
pub fn profile_at_zero(d: usize, alpha: f64) -> f64 {
    sphere_area(d) * ln_gamma(d as f64 / alpha).exp() / (alpha * (2.0 * PI).powi(d as i32))
}

/// Large-radius series `sum_n c_n rho^{-n alpha - d}`; `None` when it does not
/// reach full precision at this radius.
pub fn profile_series(d: usize, alpha: f64, rho: f64) -> Option<f64> {
    if rho <= 0.0 {
        return None;
    }
    let df = d as f64;
    let lr = rho.ln();
    let mut sum = 0.0f64;
    let mut max_term: f64 = 0.0;
    let mut last = f64::INFINITY;
    for n in 1..=80usize {
        let nf = n as f64;
        let s = (nf * PI * alpha / 2.0).sin();
        let ln_mag = nf * alpha * 2f64.ln() + ln_gamma((nf * alpha + df) / 2.0) + ln_gamma(nf * alpha / 2.0 + 1.0)
            - ln_gamma(nf + 1.0)
            - (df / 2.0 + 1.0) * PI.ln()
            - (nf * alpha + df) * lr;
        let mag = ln_mag.exp();
        if mag > last * 1.0001 && mag > 1e-17 * sum.abs() {
            // asymptotic series started to diverge before converging
            return None;
        }
        last = mag;
        let term = if n % 2 == 1 { mag * s } else { -mag * s };
        sum += term;
        max_term = max_term.max(term.abs());
        if mag < 1e-17 * sum.abs() {
            return (max_term < 1e2 * sum.abs() && sum > 0.0).then_some(sum);
        }
    }
    None
}

fn radial_weight(d: usize, x: f64) -> f64 {
    match d {
        1 => x.cos(),
        2 => bessel_j0(x),
        _ => {
            if x < 1e-4 {
                1.0 - x * x / 6.0
            } else {
                x.sin() / x
            }
        }
    }
}

/// Fourier inversion `|S^{d-1}|/(2 pi)^d int_0^inf k^{d-1} e^{-k^alpha} w_d(k rho) dk`
/// with `nodes` Gauss points per panel.
pub fn profile_quadrature(d: usize, alpha: f64, rho: f64, nodes: usize) -> f64 {
    let df = d as f64;
    let mut k_end = 45f64.powf(1.0 / alpha);
    for _ in 0..4 {
        k_end = (45.0 + (df - 1.0) * k_end.max(1.0).ln()).powf(1.0 / alpha);
    }
    let h = if rho > 0.0 { (PI / rho).min(1.0) } else { 1.0 };
    let f = |k: f64| {
        if k <= 0.0 {
            return if d == 1 { 1.0 } else { 0.0 };
        }
        k.powi(d as i32 - 1) * (-k.powf(alpha)).exp() * radial_weight(d, k * rho)
    };
    let opts = QuadOpts { nodes, ratio: 0.3, rel_floor: 1e-13, panels: 1 };
    let mut total = 0.0;
    for (a, b) in graded_panels(0.0, h, true, false, &opts) {
        total += gl(f, a, b, nodes);
    }
    let n_panels = ((k_end - h) / h).ceil().max(0.0) as usize;
    for i in 0..n_panels {
        let a = h * (i + 1) as f64;
        total += gl(f, a, a + h, nodes);
    }
    sphere_area(d) / (2.0 * PI).powi(d as i32) * total
}

fn check_dim(d: usize, alpha: f64) -> Result<()> {
    if !(1..=3).contains(&d) {
        return Err(Error::Unsupported(format!("stable density inversion implemented for d <= 3, got d = {d}")));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    Ok(())
}

/// Profile `f(rho)`, the density at `t = 1` and radius `rho`.
pub fn profile(d: usize, alpha: f64, rho: f64) -> Result<f64> {
    check_dim(d, alpha)?;
    if rho == 0.0 {
        return Ok(profile_at_zero(d, alpha));
    }
    if let Some(v) = profile_series(d, alpha, rho) {
        return Ok(v);
    }
    let a = profile_quadrature(d, alpha, rho, 10);
    let b = profile_quadrature(d, alpha, rho, 16);
    let scale = profile_at_zero(d, alpha);
    if (a - b).abs() > 1e-12 * scale + 1e-10 * b.abs() {
        return Err(Error::Numeric(format!(
            "Fourier inversion residual {:e} at rho = {rho} exceeds tolerance",
            (a - b).abs()
        )));
    }
    Ok(b)
}

/// Transition density `t^{-d/alpha} f(r t^{-1/alpha})`.
pub fn density(d: usize, alpha: f64, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("density requires t > 0, got {t}")));
    }
    let s = t.powf(1.0 / alpha);
    Ok(profile(d, alpha, r / s)? / s.powi(d as i32))
}

const TABLE_MIN: f64 = 1e-4;
const TABLE_PER_UNIT: f64 = 300.0;

/// Cached log-log table of the profile for use inside nested quadrature.
pub struct ProfileTable {
    d: usize,
    alpha: f64,
    f0: f64,
    lr0: f64,
    step: f64,
    rho_max: f64,
    vals: Vec<f64>,
}

impl ProfileTable {
    fn build(d: usize, alpha: f64) -> Result<Self> {
        check_dim(d, alpha)?;
        // the series takes over from the first radius where it converges
        let mut rho_max = 1.0;
        while profile_series(d, alpha, rho_max).is_none() {
            rho_max *= 1.5;
            if rho_max > 1e8 {
                return Err(Error::Numeric("stable profile series never converged".into()));
            }
        }
        let lr0 = TABLE_MIN.ln();
        let n = (((rho_max.ln() - lr0) * TABLE_PER_UNIT).ceil() as usize).max(16);
        let step = (rho_max.ln() - lr0) / (n - 1) as f64;
        let mut vals = Vec::with_capacity(n);
        for i in 0..n {
            let rho = (lr0 + step * i as f64).exp();
            vals.push(profile(d, alpha, rho)?.ln());
        }
        Ok(ProfileTable { d, alpha, f0: profile_at_zero(d, alpha), lr0, step, rho_max, vals })
    }

    pub fn eval(&self, rho: f64) -> f64 {
        if rho < TABLE_MIN {
            let edge = self.vals[0].exp();
            return self.f0 + (edge - self.f0) * (rho / TABLE_MIN).powi(2);
        }
        if rho >= self.rho_max {
            if let Some(v) = profile_series(self.d, self.alpha, rho) {
                return v;
            }
        }
        let n = self.vals.len();
        let x = ((rho.ln() - self.lr0) / self.step).min((n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        let p = |k: isize| self.vals[(i as isize + k).clamp(0, n as isize - 1) as usize];
        let (p0, p1, p2, p3) = (p(-1), p(0), p(1), p(2));
        let v = p1
            + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
        v.exp()
    }

    /// Tabulated transition density.
    pub fn density(&self, t: f64, r: f64) -> f64 {
        let s = t.powf(1.0 / self.alpha);
        self.eval(r / s) / s.powi(self.d as i32)
    }
}

type Tables = Mutex<HashMap<(usize, u64), Arc<ProfileTable>>>;

/// Shared table for `(d, alpha)`, built on first use.
pub fn profile_table(d: usize, alpha: f64) -> Result<Arc<ProfileTable>> {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    let map = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, alpha.to_bits());
    if let Some(t) = map.lock().expect("profile table lock").get(&key) {
        return Ok(t.clone());
    }
    let t = Arc::new(ProfileTable::build(d, alpha)?);
    Ok(map.lock().expect("profile table lock").entry(key).or_insert(t).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::levy_constant;

    #[test]
    fn j0_values() {
        // J0(1), J0(5), J0(20) from standard tables
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(5.0) + 0.177_596_771_314_338_3).abs() < 1e-13);
        assert!((bessel_j0(20.0) - 0.167_024_664_340_583_3).abs() < 1e-10);
    }

    #[test]
    fn cauchy_profile() {
        for rho in [0.0, 0.01, 0.3, 1.0, 1.7, 4.0, 30.0] {
            let v = profile(1, 1.0, rho).unwrap();
            let exact = 1.0 / (PI * (1.0 + rho * rho));
            assert!((v - exact).abs() < 1e-12, "rho={rho}: {v} vs {exact}");
        }
    }

    #[test]
    fn gaussian_limit_and_leading_tail() {
        // leading coefficient of the series is the Levy constant
        for (d, a) in [(1, 0.5), (2, 1.5), (3, 1.0)] {
            let rho = 1e4;
            let v = profile(d, a, rho).unwrap();
            let lead = levy_constant(d, a) * rho.powf(-(d as f64) - a);
            assert!((v / lead - 1.0).abs() < 1e-2, "d={d} a={a}");
        }
    }

    #[test]
    fn three_dim_cauchy() {
        // d = 3, alpha = 1: f(rho) = 1 / (pi^2 (1 + rho^2)^2)
        for rho in [0.0, 0.5, 2.0, 10.0] {
            let v = profile(3, 1.0, rho).unwrap();
            let exact = 1.0 / (PI * PI * (1.0 + rho * rho).powi(2));
            assert!((v / exact - 1.0).abs() < 1e-9, "rho={rho}");
        }
    }

    #[test]
    fn two_dim_cauchy() {
        // d = 2, alpha = 1: f(rho) = 1 / (2 pi (1 + rho^2)^{3/2})
        for rho in [0.0, 0.5, 2.0, 10.0] {
            let v = profile(2, 1.0, rho).unwrap();
            let exact = 1.0 / (2.0 * PI * (1.0 + rho * rho).powf(1.5));
            assert!((v / exact - 1.0).abs() < 1e-8, "rho={rho}: {v} {exact}");
        }
    }

    #[test]
    fn table_matches_direct() {
        let t = profile_table(1, 0.7).unwrap();
        for rho in [1e-5, 0.003, 0.2, 1.0, 3.3, 50.0, 800.0] {
            let a = t.eval(rho);
            let b = profile(1, 0.7, rho).unwrap();
            assert!((a / b - 1.0).abs() < 1e-8, "rho={rho}: {a} {b}");
        }
    }
}
