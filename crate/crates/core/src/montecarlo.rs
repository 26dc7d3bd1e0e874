//! Monte Carlo estimator of the Feynman-Kac density with killing.
//!
//! Paths are built from a compound Poisson process of jumps longer than `eps`
//! plus a Gaussian stand-in for the shorter ones, inspected on a fixed grid
//! and at every jump for exit from `D`.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{random_direction, DomainGeometry};
use crate::kernel::{sphere_area, KernelParams};
use crate::measure::{JumpFunctionalSpec, MeasureSpec};
use crate::models::levy_constant;
use crate::quad::{integrate_split, QuadOpts};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) || alpha > 2.0 - 1e-6 {
        return Err(Error::Domain(format!("stable index must lie in (0, 2) away from 2, got {alpha}")));
    }
    Ok(())
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Standard symmetric stable variable in one dimension, `E e^{i xi X} = e^{-|xi|^alpha}`.
fn cms_symmetric<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w = exp1(rng);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable variable with `E e^{-l S} = e^{-l^beta}`, `0 < beta < 1`
/// (Kanter's representation).
fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let w = exp1(rng);
    let a = (beta * u).sin().powf(beta / (1.0 - beta)) * ((1.0 - beta) * u).sin() / u.sin().powf(1.0 / (1.0 - beta));
    (a / w).powf((1.0 - beta) / beta)
}

/// Isotropic stable increment over `dt` with `E e^{i xi . X} = e^{-dt |xi|^alpha}`.
/// One dimension uses Chambers-Mallows-Stuck; higher dimensions subordinate
/// a Gaussian to a positive `alpha/2`-stable clock.
pub fn sample_stable_increment<R: Rng + ?Sized>(d: usize, alpha: f64, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(dt > 0.0) || d == 0 {
        return Err(Error::Domain(format!("increment needs dt > 0 and d >= 1, got dt = {dt}")));
    }
    let scale = dt.powf(1.0 / alpha);
    if d == 1 {
        return Ok(vec![scale * cms_symmetric(alpha, rng)]);
    }
    let s = positive_stable(alpha / 2.0, rng);
    let sd = (2.0 * s).sqrt() * scale;
    Ok((0..d).map(|_| sd * normal(rng)).collect::<Vec<f64>>())
}

/// How jumps below the cutoff enter the jump sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compensation {
    None,
    LevyCompensator,
}

/// Path resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOpts {
    /// Jump cutoff; `eps_factor * t^{1/alpha}` when absent.
    pub eps: Option<f64>,
    pub eps_factor: f64,
    pub inspections_per_unit: f64,
    pub min_inspections: usize,
}

impl Default for PathOpts {
    fn default() -> Self {
        PathOpts { eps: None, eps_factor: 0.01, inspections_per_unit: 256.0, min_inspections: 16 }
    }
}

impl PathOpts {
    pub fn eps_for(&self, alpha: f64, t: f64) -> f64 {
        self.eps.unwrap_or(self.eps_factor * t.powf(1.0 / alpha))
    }
}

/// Jump-skeleton of one path. Event 0 is the start; `left` holds `X_{s-}`
/// and `right` holds `X_s`, flattened with stride `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub d: usize,
    pub times: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub is_jump: Vec<bool>,
    /// First detected time outside `D`; infinite for surviving paths.
    pub exit_time: f64,
    pub alive: bool,
    pub horizon: f64,
    pub eps: f64,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn left_at(&self, i: usize) -> &[f64] {
        &self.left[i * self.d..(i + 1) * self.d]
    }

    pub fn right_at(&self, i: usize) -> &[f64] {
        &self.right[i * self.d..(i + 1) * self.d]
    }

    pub fn end(&self) -> &[f64] {
        self.right_at(self.len() - 1)
    }

    pub fn jump_count(&self) -> usize {
        self.is_jump.iter().filter(|j| **j).count()
    }
}

/// Rate of jumps longer than `eps`: `A(d,-alpha) |S^{d-1}| eps^{-alpha} / alpha`.
pub fn big_jump_rate(d: usize, alpha: f64, eps: f64) -> f64 {
    levy_constant(d, alpha) * sphere_area(d) * eps.powf(-alpha) / alpha
}

/// Per-coordinate variance rate of the jumps shorter than `eps`.
pub fn small_jump_variance(d: usize, alpha: f64, eps: f64) -> f64 {
    levy_constant(d, alpha) * sphere_area(d) / d as f64 * eps.powf(2.0 - alpha) / (2.0 - alpha)
}

/// Simulates one path on `[0, t]` from `x`, stopped at the first detected
/// exit from `D`.
pub fn simulate_path<R: Rng + ?Sized>(
    params: &KernelParams,
    geom: &DomainGeometry,
    t: f64,
    x: &[f64],
    opts: &PathOpts,
    rng: &mut R,
) -> Result<PathSample> {
    check_alpha(params.alpha)?;
    let d = params.d;
    if x.len() != d || !(t > 0.0) {
        return Err(Error::Domain("path needs t > 0 and a start point of dimension d".into()));
    }
    if !geom.contains(x) {
        return Err(Error::Domain("path start must lie in D".into()));
    }
    let eps = opts.eps_for(params.alpha, t);
    if !(eps > 0.0) {
        return Err(Error::Config("jump cutoff must be positive".into()));
    }
    let rate = big_jump_rate(d, params.alpha, eps);
    let sigma = small_jump_variance(d, params.alpha, eps).sqrt();
    let n_insp = ((opts.inspections_per_unit * t).ceil() as usize).max(opts.min_inspections).max(1);
    let dt_insp = t / n_insp as f64;
    let check = !geom.is_whole_space();

    let mut p = PathSample {
        d,
        times: vec![0.0],
        left: x.to_vec(),
        right: x.to_vec(),
        is_jump: vec![false],
        exit_time: f64::INFINITY,
        alive: true,
        horizon: t,
        eps,
    };
    let mut pos = x.to_vec();
    let mut now = 0.0;
    let mut next_jump = now + exp1(rng) / rate;
    let mut k_insp = 1usize;
    loop {
        let next_insp = k_insp as f64 * dt_insp;
        let jump = next_jump < next_insp && next_jump < t;
        let te = if jump { next_jump } else { next_insp.min(t) };
        let dt = te - now;
        if dt > 0.0 && sigma > 0.0 {
            let s = sigma * dt.sqrt();
            for c in pos.iter_mut() {
                *c += s * normal(rng);
            }
        }
        p.left.extend_from_slice(&pos);
        let mut killed = check && !geom.contains(&pos);
        if jump && !killed {
            let rho = eps * rng.random::<f64>().powf(-1.0 / params.alpha);
            let dir = random_direction(d, rng);
            for (c, u) in pos.iter_mut().zip(&dir) {
                *c += rho * u;
            }
            killed = check && !geom.contains(&pos);
        }
        p.right.extend_from_slice(&pos);
        p.times.push(te);
        p.is_jump.push(jump);
        now = te;
        if killed {
            p.exit_time = te;
            p.alive = false;
            break;
        }
        if jump {
            next_jump = now + exp1(rng) / rate;
        } else {
            k_insp += 1;
            if te >= t {
                break;
            }
        }
    }
    Ok(p)
}

/// Additive functional of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkAccumulator {
    /// `∫_0^t V(X_s) ds` by the trapezoidal rule on the skeleton.
    pub a_mu: f64,
    /// Sum of `F(X_{s-}, X_s)` over resolved jumps.
    pub jump_sum: f64,
    /// Expected contribution of jumps below the cutoff.
    pub compensator: f64,
}

impl FkAccumulator {
    pub fn total(&self) -> f64 {
        self.a_mu + self.jump_sum + self.compensator
    }

    pub fn weight(&self) -> f64 {
        self.total().exp()
    }
}

/// `t A(d,-alpha) |S^{d-1}| ∫_0^eps F(rho) rho^{-1-alpha} d rho`.
pub fn compensator(
    params: &KernelParams,
    f: &JumpFunctionalSpec,
    t: f64,
    eps: f64,
    mode: Compensation,
) -> Result<f64> {
    if mode == Compensation::None || f.is_zero() {
        return Ok(0.0);
    }
    if let Some(c) = f.cutoff {
        if c >= eps {
            return Ok(0.0);
        }
    }
    let alpha = params.alpha;
    match f.envelope {
        Some(e) if e.beta > alpha => {}
        _ => {
            return Err(Error::Config(
                "the jump compensator needs an envelope with beta > alpha; use compensation none".into(),
            ))
        }
    }
    let lo = f.cutoff.unwrap_or(0.0);
    let opts = QuadOpts { nodes: 10, ratio: 0.15, rel_floor: 1e-14, panels: 1 };
    let inner = integrate_split(|r| f.eval_radial(r) * r.powf(-1.0 - alpha), lo, eps, &[lo], &[], &opts);
    Ok(t * levy_constant(params.d, alpha) * sphere_area(params.d) * inner)
}

/// Closed-form bound on the compensator from the envelope.
pub fn compensator_bound(params: &KernelParams, f: &JumpFunctionalSpec, t: f64, eps: f64) -> Option<f64> {
    let e = f.envelope?;
    if e.beta <= params.alpha {
        return None;
    }
    let eps = eps.min(1.0);
    Some(e.a * t * levy_constant(params.d, params.alpha) * sphere_area(params.d) * eps.powf(e.beta - params.alpha) / (e.beta - params.alpha))
}

/// Accumulates `A^mu`, the resolved jump sum and the compensator along a path.
pub fn accumulate_fk(
    path: &PathSample,
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    f: &JumpFunctionalSpec,
    mode: Compensation,
) -> Result<FkAccumulator> {
    if matches!(mu, MeasureSpec::Atomic { .. }) {
        return Err(Error::Unsupported("atomic measures are not simulated; use the series".into()));
    }
    let mut a_mu = 0.0;
    if !mu.is_zero() {
        let mut prev = mu.density_at(geom, path.right_at(0));
        for i in 1..path.len() {
            let dt = path.times[i] - path.times[i - 1];
            let cur = mu.density_at(geom, path.left_at(i));
            a_mu += 0.5 * (prev + cur) * dt;
            prev = mu.density_at(geom, path.right_at(i));
        }
    }
    let mut jump_sum = 0.0;
    if !f.is_zero() {
        for i in 1..path.len() {
            if path.is_jump[i] {
                let rho = crate::geometry::dist(path.left_at(i), path.right_at(i));
                if f.cutoff.is_none_or(|c| rho >= c) {
                    jump_sum += f.eval_radial(rho);
                }
            }
        }
    }
    let elapsed = path.times[path.len() - 1];
    let comp = compensator(params, f, elapsed, path.eps, mode)?;
    Ok(FkAccumulator { a_mu, jump_sum, compensator: comp })
}

/// Estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOpts {
    pub n_paths: usize,
    pub seed: u64,
    pub path: PathOpts,
    /// Defaults to the compensator when `F` declares an envelope.
    pub compensation: Option<Compensation>,
    /// Half-width of the bins across the first coordinate for `d >= 2`;
    /// half the bin width when absent.
    pub transverse: Option<f64>,
}

impl McOpts {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        McOpts { n_paths, seed, path: PathOpts::default(), compensation: None, transverse: None }
    }
}

/// Paths per RNG stream; the stream index is the chunk index, so results do
/// not depend on the worker count.
pub const CHUNK: usize = 1024;

/// Weighted histogram of surviving endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub eps: f64,
    pub compensation: Compensation,
    pub survived: usize,
    /// `E[weight; alive]`.
    pub total_mass: f64,
    pub total_mass_stderr: f64,
    pub max_weight: f64,
}

#[derive(Clone)]
struct Partial {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    mass: f64,
    mass_sq: f64,
    survived: usize,
    max_w: f64,
}

impl Partial {
    fn new(n: usize) -> Self {
        Partial { sum: vec![0.0; n], sum_sq: vec![0.0; n], mass: 0.0, mass_sq: 0.0, survived: 0, max_w: 0.0 }
    }

    fn merge(mut self, o: &Partial) -> Self {
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sum_sq[i] += o.sum_sq[i];
        }
        self.mass += o.mass;
        self.mass_sq += o.mass_sq;
        self.survived += o.survived;
        self.max_w = self.max_w.max(o.max_w);
        self
    }
}

/// Histogram estimate of `y -> q_D(t, x, y)` over bins in the first
/// coordinate.
#[allow(clippy::too_many_arguments)]
pub fn estimate_density(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    f: &JumpFunctionalSpec,
    t: f64,
    x: &[f64],
    edges: &[f64],
    opts: &McOpts,
) -> Result<DensityEstimate> {
    params.validate()?;
    geom.validate(params.d)?;
    mu.validate(params.d, geom)?;
    f.validate()?;
    if opts.n_paths < 1000 {
        return Err(Error::Config(format!("at least 1000 paths are required, got {}", opts.n_paths)));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("bin edges must be strictly increasing".into()));
    }
    let mode = opts.compensation.unwrap_or(if f.envelope.is_some() { Compensation::LevyCompensator } else { Compensation::None });
    let eps = opts.path.eps_for(params.alpha, t);
    // fail early on configuration errors
    compensator(params, f, t, eps, mode)?;
    let nb = edges.len() - 1;
    let d = params.d;
    let v_sup = mu.sup_abs();
    let f_sup = f.bound;

    let n_chunks = opts.n_paths.div_ceil(CHUNK);
    let partials: Vec<Result<Partial>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(opts.n_paths - c * CHUNK);
            let mut part = Partial::new(nb);
            for _ in 0..n {
                let path = simulate_path(params, geom, t, x, &opts.path, &mut rng)?;
                if !path.alive {
                    continue;
                }
                let acc = accumulate_fk(&path, params, geom, mu, f, mode)?;
                let w = acc.weight();
                let budget = v_sup * t + path.jump_count() as f64 * f_sup + acc.compensator.abs();
                if !(w > 0.0) || w > budget.exp() * (1.0 + 1e-12) {
                    return Err(Error::Numeric(format!("path weight {w} violates the bound exp({budget})")));
                }
                part.survived += 1;
                part.mass += w;
                part.mass_sq += w * w;
                part.max_w = part.max_w.max(w);
                let end = path.end();
                if d > 1 {
                    let half = opts.transverse.unwrap_or(f64::NAN);
                    let idx = edges.partition_point(|e| *e <= end[0]);
                    if idx == 0 || idx > nb {
                        continue;
                    }
                    let h = if half.is_nan() { 0.5 * (edges[idx] - edges[idx - 1]) } else { half };
                    if (1..d).any(|i| (end[i] - x[i]).abs() > h) {
                        continue;
                    }
                }
                let idx = edges.partition_point(|e| *e <= end[0]);
                if idx >= 1 && idx <= nb {
                    part.sum[idx - 1] += w;
                    part.sum_sq[idx - 1] += w * w;
                }
            }
            Ok(part)
        })
        .collect();
    let mut total = Partial::new(nb);
    for p in partials {
        total = total.merge(&p?);
    }
    let n = opts.n_paths as f64;
    if total.sum.iter().all(|s| *s == 0.0) {
        return Err(Error::Degenerate(format!(
            "no surviving path ended in the requested window ({} of {} survived)",
            total.survived, opts.n_paths
        )));
    }
    let mut values = Vec::with_capacity(nb);
    let mut stderr = Vec::with_capacity(nb);
    for i in 0..nb {
        let width = edges[i + 1] - edges[i];
        let vol = if d > 1 {
            let h = opts.transverse.unwrap_or(0.5 * width);
            width * (2.0 * h).powi(d as i32 - 1)
        } else {
            width
        };
        let mean = total.sum[i] / n;
        let var = (total.sum_sq[i] / n - mean * mean).max(0.0);
        values.push(mean / vol);
        stderr.push((var / (n - 1.0)).sqrt() / vol);
    }
    let mm = total.mass / n;
    let mvar = (total.mass_sq / n - mm * mm).max(0.0);
    Ok(DensityEstimate {
        edges: edges.to_vec(),
        centers: edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        values,
        stderr,
        n_paths: opts.n_paths,
        seed: opts.seed,
        eps,
        compensation: mode,
        survived: total.survived,
        total_mass: mm,
        total_mass_stderr: (mvar / (n - 1.0)).sqrt(),
        max_weight: total.max_w,
    })
}

/// Per-bin agreement with a reference: `|est - ref| <= k stderr + abs_tol`.
pub fn bins_agree(est: &DensityEstimate, reference: &[f64], k: f64, abs_tol: f64) -> Vec<(usize, f64, f64)> {
    est.values
        .iter()
        .zip(&est.stderr)
        .zip(reference)
        .enumerate()
        .filter(|(_, ((v, s), r))| (*v - *r).abs() > k * *s + abs_tol)
        .map(|(i, ((v, _), r))| (i, *v, *r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn cauchy_median() {
        let mut r = rng(1);
        let dt = 0.3;
        let mut v: Vec<f64> = (0..200_001).map(|_| sample_stable_increment(1, 1.0, dt, &mut r).unwrap()[0].abs()).collect();
        v.sort_by(f64::total_cmp);
        let med = v[100_000];
        // median of |Cauchy| has density 2/(pi dt) there; stderr ~ pi dt / (4 sqrt(n))
        assert!((med - dt).abs() < 3.0 * PI * dt / (4.0 * 200_000f64.sqrt()) * 2.0, "{med}");
        assert!(sample_stable_increment(1, 2.0 - 1e-9, dt, &mut r).is_err());
        assert!(sample_stable_increment(1, 1.0, 0.0, &mut r).is_err());
    }

    #[test]
    fn characteristic_function() {
        for (d, alpha) in [(1, 0.7), (1, 1.5), (2, 1.2), (3, 0.8)] {
            let mut r = rng(7 + d as u64);
            let n = 100_000;
            let dt = 0.5;
            let xs: Vec<Vec<f64>> = (0..n).map(|_| sample_stable_increment(d, alpha, dt, &mut r).unwrap()).collect();
            for xi in [0.3, 1.0, 2.0] {
                let vals: Vec<f64> = xs.iter().map(|x| (xi * x[0]).cos()).collect();
                let m = vals.iter().sum::<f64>() / n as f64;
                let sd = (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
                let want = (-dt * f64::powf(xi, alpha)).exp();
                assert!((m - want).abs() < 3.5 * sd + 1e-4, "d={d} alpha={alpha} xi={xi}: {m} vs {want}");
            }
        }
    }

    #[test]
    fn jump_counts_are_poisson() {
        let p = KernelParams::new(1, 1.2, 0.0, 4.0).unwrap();
        let g = DomainGeometry::WholeSpace;
        let opts = PathOpts { eps: Some(0.05), ..Default::default() };
        let mut r = rng(3);
        let n = 4000;
        let t = 0.4;
        let counts: Vec<f64> = (0..n).map(|_| simulate_path(&p, &g, t, &[0.0], &opts, &mut r).unwrap().jump_count() as f64).collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let want = t * big_jump_rate(1, 1.2, 0.05);
        assert!((mean - want).abs() < 3.0 * (want / n as f64).sqrt(), "{mean} vs {want}");
    }

    #[test]
    fn whole_space_never_exits_and_constant_potential_is_exact() {
        let p = KernelParams::new(1, 1.0, 0.0, 4.0).unwrap();
        let g = DomainGeometry::WholeSpace;
        let mut r = rng(5);
        let mu = MeasureSpec::constant(0.7);
        for _ in 0..100 {
            let path = simulate_path(&p, &g, 0.3, &[0.0], &PathOpts::default(), &mut r).unwrap();
            assert!(path.alive && path.exit_time.is_infinite());
            let acc = accumulate_fk(&path, &p, &g, &mu, &JumpFunctionalSpec::zero(), Compensation::None).unwrap();
            assert!((acc.a_mu - 0.21).abs() < 1e-14);
            let z = accumulate_fk(&path, &p, &g, &MeasureSpec::Zero, &JumpFunctionalSpec::zero(), Compensation::LevyCompensator).unwrap();
            assert_eq!(z.total(), 0.0);
        }
    }

    #[test]
    fn half_line_survival_increases_with_start() {
        let p = KernelParams::new(1, 1.0, 0.5, 4.0).unwrap();
        let g = DomainGeometry::HalfSpace;
        let opts = PathOpts::default();
        let surv: Vec<f64> = [0.05, 0.2, 0.8]
            .iter()
            .map(|&x| {
                let mut r = rng(11);
                (0..4000).filter(|_| simulate_path(&p, &g, 0.5, &[x], &opts, &mut r).unwrap().alive).count() as f64 / 4000.0
            })
            .collect();
        assert!(surv[0] < surv[1] && surv[1] < surv[2], "{surv:?}");
    }

    #[test]
    fn compensator_within_envelope_bound() {
        let p = KernelParams::new(1, 1.0, 0.0, 4.0).unwrap();
        let f = JumpFunctionalSpec::power_cap(0.8, 1.5);
        for eps in [0.1, 0.05, 0.025] {
            let c = compensator(&p, &f, 0.5, eps, Compensation::LevyCompensator).unwrap();
            let b = compensator_bound(&p, &f, 0.5, eps).unwrap();
            assert!(c.abs() <= b * (1.0 + 1e-10));
        }
        let bad = JumpFunctionalSpec::power_cap(0.8, 0.9);
        assert!(compensator(&p, &bad, 0.5, 0.1, Compensation::LevyCompensator).is_err());
        assert_eq!(compensator(&p, &bad, 0.5, 0.1, Compensation::None).unwrap(), 0.0);
    }

    #[test]
    fn cauchy_histogram_and_reproducibility() {
        let p = KernelParams::new(1, 1.0, 0.0, 2.0 * PI).unwrap();
        let g = DomainGeometry::WholeSpace;
        let edges: Vec<f64> = (0..=20).map(|i| -2.0 + 0.2 * i as f64).collect();
        let t = 0.5;
        let opts = McOpts::new(20_000, 42);
        let est = estimate_density(&p, &g, &MeasureSpec::Zero, &JumpFunctionalSpec::zero(), t, &[0.0], &edges, &opts).unwrap();
        let want: Vec<f64> = edges.windows(2).map(|w| ((w[1] / t).atan() - (w[0] / t).atan()) / (PI * (w[1] - w[0]))).collect();
        let bad = bins_agree(&est, &want, 4.0, 0.0);
        assert!(bad.is_empty(), "{bad:?}");
        assert!((est.total_mass - 1.0).abs() < 1e-12);
        let again = estimate_density(&p, &g, &MeasureSpec::Zero, &JumpFunctionalSpec::zero(), t, &[0.0], &edges, &opts).unwrap();
        assert_eq!(est, again);
    }
}
