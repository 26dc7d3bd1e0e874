//! Kato-class norm functionals for measures and jump functionals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, DomainGeometry};
use crate::kernel::time::int_clip_q;
use crate::kernel::KernelParams;
use crate::measure::{JumpFunctionalSpec, MeasureSpec};
use crate::quad::{integrate_split, integrate_tail, QuadOpts, SphereRule};

/// Resolution knobs for norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatoOpts {
    /// Outer spatial quadrature.
    #[serde(skip, default = "QuadOpts::default")]
    pub quad: QuadOpts,
    /// Inner quadrature of the jump kernel.
    #[serde(skip, default = "QuadOpts::coarse")]
    pub inner: QuadOpts,
    /// Sphere-rule resolution for `d >= 2`.
    pub sphere_n: usize,
    /// Boundary offsets `2^{-k}`, `k < boundary_levels`, in the candidate grid.
    pub boundary_levels: usize,
    /// Random fill points in the candidate grid.
    pub random_fill: usize,
    /// Pattern-search iterations around the best candidates.
    pub refine: usize,
    /// Half-width of the sampling box for unbounded domains.
    pub extent: f64,
    pub seed: u64,
    /// Recompute the maximizer with deeper grading and fail on disagreement.
    pub divergence_check: bool,
}

impl Default for KatoOpts {
    fn default() -> Self {
        KatoOpts {
            quad: QuadOpts::default(),
            inner: QuadOpts::coarse(),
            sphere_n: 16,
            boundary_levels: 12,
            random_fill: 16,
            refine: 8,
            extent: 2.0,
            seed: 0x5eed,
            divergence_check: true,
        }
    }
}

impl KatoOpts {
    /// Cheaper settings for nested use inside the harness.
    pub fn fast() -> Self {
        KatoOpts {
            quad: QuadOpts::coarse(),
            inner: QuadOpts { nodes: 5, ratio: 0.1, rel_floor: 1e-8, panels: 1 },
            sphere_n: 8,
            boundary_levels: 8,
            random_fill: 6,
            refine: 4,
            divergence_check: false,
            ..KatoOpts::default()
        }
    }
}

/// `∫_0^t (1 ∧ δ/s^{1/α})^γ q(s, r) ds`.
#[inline]
pub fn time_kernel(params: &KernelParams, t: f64, delta: f64, r: f64) -> f64 {
    int_clip_q(params.d, params.alpha, params.gamma, &[delta], r, 0.0, t)
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(p, q) in a {
        for &(u, v) in b {
            let (lo, hi) = (p.max(u), q.min(v));
            if hi > lo {
                out.push((lo, hi));
            }
        }
    }
    out
}

/// Integrates `kernel(y, r) |mu|(dy)` over `D ∩ B(x, r_max)` in polar
/// coordinates around `x` (atoms are summed exactly).
#[allow(clippy::too_many_arguments)]
pub fn polar_measure_integral<K: Fn(&[f64], f64) -> f64>(
    geom: &DomainGeometry,
    x: &[f64],
    mu: &MeasureSpec,
    rule: &SphereRule,
    kinks: &[f64],
    r_max: f64,
    opts: &QuadOpts,
    kernel: K,
) -> f64 {
    match mu {
        MeasureSpec::Zero => 0.0,
        MeasureSpec::Atomic { atoms } => atoms
            .iter()
            .filter(|a| dist(&a.point, x) <= r_max)
            .map(|a| a.weight.abs() * kernel(&a.point, dist(&a.point, x)))
            .sum(),
        MeasureSpec::Density { .. } | MeasureSpec::PowerBoundary { .. } => {
            let d = x.len();
            let mut total = 0.0;
            let mut y = vec![0.0; d];
            let mut k_buf = Vec::new();
            let mut s_buf = Vec::new();
            for (u, wu) in rule.dirs.iter().zip(&rule.weights) {
                let dsegs = geom.ray_segments(x, u, r_max);
                k_buf.clear();
                s_buf.clear();
                s_buf.push(0.0);
                let segs = match mu {
                    MeasureSpec::Density { density } => match density.ray_support(x, u, r_max, &mut k_buf, &mut s_buf) {
                        Some(sup) => intersect(&dsegs, &sup),
                        None => dsegs,
                    },
                    _ => dsegs,
                };
                k_buf.extend_from_slice(kinks);
                let mut g = |r: f64| {
                    for i in 0..d {
                        y[i] = x[i] + r * u[i];
                    }
                    let v = mu.abs_density_at(geom, &y);
                    if v == 0.0 {
                        return 0.0;
                    }
                    v * kernel(&y, r) * r.powi(d as i32 - 1)
                };
                let mut along = 0.0;
                for (r0, r1) in segs {
                    // kinks are graded too: the kernel changes power law there
                    let mut sing: Vec<f64> = s_buf.iter().chain(&k_buf).copied().collect();
                    sing.push(r0);
                    if r1.is_infinite() {
                        let knee = k_buf.iter().chain(&s_buf).copied().filter(|v| v.is_finite()).fold(r0.max(1.0), f64::max);
                        let knee = knee.max(2.0 * r0).max(1.0);
                        along += integrate_split(&mut g, r0, knee, &sing, &k_buf, opts);
                        along += integrate_tail(&mut g, knee, opts);
                    } else {
                        sing.push(r1);
                        along += integrate_split(&mut g, r0, r1, &sing, &k_buf, opts);
                    }
                }
                total += wu * along;
            }
            total
        }
    }
}

/// `∫_0^t ∫_D (1 ∧ δ(y)/s^{1/α})^γ q(s, x, y) |mu|(dy) ds` at a fixed `x`.
pub fn measure_integral_at(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    t: f64,
    x: &[f64],
    opts: &KatoOpts,
) -> Result<f64> {
    let rule = SphereRule::new(params.d, opts.sphere_n)?;
    let tau = params.scale(t);
    Ok(polar_measure_integral(geom, x, mu, &rule, &[tau], f64::INFINITY, &opts.quad, |y, r| {
        time_kernel(params, t, geom.delta(y), r)
    }))
}

/// Inner jump kernel `G_t(y, z) = ∫_D (1 + (|z-w| ∧ τ)/|y-z|)^γ
/// (|F|(z,w) + |F|(w,z)) |z-w|^{-d-α} dw`.
pub fn jump_inner(
    params: &KernelParams,
    geom: &DomainGeometry,
    f: &JumpFunctionalSpec,
    tau: f64,
    ryz: f64,
    z: &[f64],
    rule: &SphereRule,
    opts: &QuadOpts,
) -> f64 {
    let da = params.da();
    let gamma = params.gamma;
    let mut kinks = vec![tau, 1.0];
    if let Some(c) = f.cutoff {
        kinks.push(c);
    }
    let d = z.len();
    let mut total = 0.0;
    for (u, wu) in rule.dirs.iter().zip(&rule.weights) {
        let mut along = 0.0;
        for (r0, r1) in geom.ray_segments(z, u, f64::INFINITY) {
            let g = |rho: f64| {
                let mut v = f.sym_abs(rho) * rho.powf(-da) * rho.powi(d as i32 - 1);
                if gamma != 0.0 && v != 0.0 {
                    v *= (1.0 + rho.min(tau) / ryz).powf(gamma);
                }
                v
            };
            if r1.is_infinite() {
                let knee = kinks.iter().copied().fold(r0.max(1.0), f64::max).max(2.0 * r0);
                let sing: Vec<f64> = [0.0, r0].iter().chain(&kinks).copied().collect();
                along += integrate_split(g, r0, knee, &sing, &[], opts);
                along += integrate_tail(g, knee, opts);
            } else {
                let sing: Vec<f64> = [0.0, r0, r1].iter().chain(&kinks).copied().collect();
                along += integrate_split(g, r0, r1, &sing, &[], opts);
            }
        }
        total += wu * along;
    }
    total
}

fn check_jump(params: &KernelParams, f: &JumpFunctionalSpec) -> Result<()> {
    f.validate()?;
    if f.is_zero() {
        return Ok(());
    }
    match (f.envelope, f.cutoff) {
        (None, None) => Err(Error::Config(
            "jump functional needs an envelope (A, beta > alpha) or a diagonal cutoff for its norm".into(),
        )),
        (Some(e), None) if e.beta <= params.alpha => Err(Error::Numeric(format!(
            "envelope exponent beta = {} does not exceed alpha = {}; the jump integral diverges at the diagonal",
            e.beta, params.alpha
        ))),
        _ => Ok(()),
    }
}

/// Jump-norm integrand at a fixed `y`.
pub fn jump_integral_at(
    params: &KernelParams,
    geom: &DomainGeometry,
    f: &JumpFunctionalSpec,
    t: f64,
    y: &[f64],
    opts: &KatoOpts,
) -> Result<f64> {
    check_jump(params, f)?;
    if f.is_zero() {
        return Ok(0.0);
    }
    let rule = SphereRule::new(params.d, opts.sphere_n)?;
    let inner_rule = SphereRule::new(params.d, (opts.sphere_n / 2).max(4))?;
    let tau = params.scale(t);
    // with gamma = 0 on the whole space the inner kernel is translation invariant
    let constant_inner = (params.gamma == 0.0 && geom.is_whole_space())
        .then(|| jump_inner(params, geom, f, tau, 1.0, y, &inner_rule, &opts.inner));
    let mu = MeasureSpec::constant(1.0);
    Ok(polar_measure_integral(geom, y, &mu, &rule, &[tau], f64::INFINITY, &opts.quad, |z, r| {
        let tk = time_kernel(params, t, geom.delta(z), r);
        if tk == 0.0 {
            return 0.0;
        }
        let g = match constant_inner {
            Some(c) => c,
            None => jump_inner(params, geom, f, tau, r, z, &inner_rule, &opts.inner),
        };
        tk * g
    }))
}

/// Candidate points for the sup: boundary offsets, landmarks and a seeded
/// random fill.
pub fn candidate_points(
    params: &KernelParams,
    geom: &DomainGeometry,
    landmarks: &[Vec<f64>],
    opts: &KatoOpts,
) -> Vec<Vec<f64>> {
    let d = params.d;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pts: Vec<Vec<f64>> = Vec::new();
    match geom {
        DomainGeometry::IntervalUnion { intervals } => {
            for &(a, b) in intervals {
                let half = 0.5 * (b - a);
                pts.push(vec![a + half]);
                for k in 0..opts.boundary_levels {
                    let off = half * 0.5f64.powi(k as i32 + 1);
                    pts.push(vec![a + off]);
                    pts.push(vec![b - off]);
                }
            }
        }
        DomainGeometry::WholeSpace => pts.push(vec![0.0; d]),
        _ => {
            let scale = if geom.is_bounded() { 0.5 * geom.diameter() } else { 1.0 };
            for k in 0..opts.boundary_levels {
                let depth = scale * 0.5f64.powi(k as i32);
                pts.push(geom.sample_at_depth(d, depth, opts.extent, &mut rng));
            }
        }
    }
    for p in landmarks {
        if p.len() == d && geom.contains(p) {
            pts.push(p.clone());
        }
    }
    for _ in 0..opts.random_fill {
        pts.push(geom.sample_uniform(d, opts.extent, &mut rng));
    }
    pts
}

/// Value of a norm together with its maximizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormValue {
    pub value: f64,
    pub argmax: Vec<f64>,
}

fn sup_over<F>(geom: &DomainGeometry, cands: Vec<Vec<f64>>, refine: usize, eval: F) -> Result<NormValue>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let vals: Vec<Result<f64>> = cands.par_iter().map(|p| eval(p)).collect();
    let mut best = NormValue { value: f64::NEG_INFINITY, argmax: vec![] };
    for (p, v) in cands.iter().zip(vals) {
        let v = v?;
        if v.is_nan() {
            return Err(Error::Numeric("norm integrand evaluated to NaN".into()));
        }
        if v > best.value {
            best = NormValue { value: v, argmax: p.clone() };
        }
    }
    if best.value.is_infinite() || refine == 0 || best.argmax.is_empty() {
        return Ok(best);
    }
    // pattern search from the best candidate
    let d = best.argmax.len();
    let mut step = if geom.is_bounded() { 0.05 * geom.diameter() } else { 0.25 };
    for _ in 0..refine {
        let mut moved = false;
        for i in 0..d {
            for s in [-1.0, 1.0] {
                let mut p = best.argmax.clone();
                p[i] += s * step;
                if !geom.contains(&p) {
                    continue;
                }
                let v = eval(&p)?;
                if v > best.value {
                    best = NormValue { value: v, argmax: p };
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(best)
}

fn deeper(opts: &KatoOpts) -> KatoOpts {
    let mut o = *opts;
    o.quad.rel_floor *= 1e-4;
    o.quad.nodes += 4;
    o
}

/// Constant `C` of the linear bound `N_F(t) <= C A t` for
/// `|F| <= A (ρ^β ∧ 1)` with `β > α`, any domain.
///
/// The clip factor is at most 1 and the jump integral of the envelope is
/// `I = |S| (1/(β-α) + 1/α)`. For `γ > 0` the weight is split with
/// `(1+x)^γ <= max(1, 2^{γ-1}) (1 + x^γ)`, and the `x^γ` half integrates in
/// closed form against `q`:
/// `∫ q(s, y, w) |y-w|^{-γ} dw = |S| s^{-γ/α} (1/(d-γ) + 1/(α+γ))`.
pub fn linear_jump_constant(params: &KernelParams, beta: f64) -> Result<f64> {
    let (a, g) = (params.alpha, params.gamma);
    if !(beta > a) {
        return Err(Error::Domain(format!("the linear bound needs beta > alpha, got {beta} <= {a}")));
    }
    let d = params.d as f64;
    if !(g < a.min(d)) {
        return Err(Error::Domain(format!("the linear bound needs gamma < alpha ∧ d, got {g}")));
    }
    let s = crate::kernel::sphere_area(params.d);
    let jump = s * (1.0 / (beta - a) + 1.0 / a);
    let mass = s * (1.0 / d + 1.0 / a);
    if g == 0.0 {
        return Ok(2.0 * jump * mass);
    }
    let weighted = s * (1.0 / (d - g) + 1.0 / (a + g)) * a / (a - g);
    Ok(2.0 * jump * 2f64.powf(g - 1.0).max(1.0) * (mass + weighted))
}

/// `N_mu^{alpha,gamma}(t)` with its maximizer.
pub fn kato_norm_measure_with(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    t: f64,
    opts: &KatoOpts,
) -> Result<NormValue> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("norm requires t > 0, got {t}")));
    }
    if mu.is_zero() {
        return Ok(NormValue { value: 0.0, argmax: vec![] });
    }
    let mut marks = match mu {
        MeasureSpec::Density { density } => {
            let mut l = density.landmarks();
            l.extend(density.singular_points());
            l
        }
        MeasureSpec::Atomic { atoms } => atoms.iter().map(|a| a.point.clone()).collect(),
        _ => vec![],
    };
    marks.retain(|p| geom.contains(p));
    let cands = candidate_points(params, geom, &marks, opts);
    let best = sup_over(geom, cands, opts.refine, |x| measure_integral_at(params, geom, mu, t, x, opts))?;
    if !best.value.is_finite() {
        return Err(Error::Numeric(format!("|mu| is not integrable against q near {:?}", best.argmax)));
    }
    if opts.divergence_check && best.value > 0.0 {
        let again = measure_integral_at(params, geom, mu, t, &best.argmax, &deeper(opts))?;
        if ((again - best.value) / best.value).abs() > 1e-3 {
            return Err(Error::Numeric(format!(
                "quadrature diverges under refinement at {:?} ({} -> {}); |mu| is not integrable",
                best.argmax, best.value, again
            )));
        }
    }
    Ok(best)
}

pub fn kato_norm_measure(params: &KernelParams, geom: &DomainGeometry, mu: &MeasureSpec, t: f64) -> Result<f64> {
    Ok(kato_norm_measure_with(params, geom, mu, t, &KatoOpts::default())?.value)
}

/// `N_F^{alpha,gamma}(t)` with its maximizer.
pub fn kato_norm_jump_with(
    params: &KernelParams,
    geom: &DomainGeometry,
    f: &JumpFunctionalSpec,
    t: f64,
    opts: &KatoOpts,
) -> Result<NormValue> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("norm requires t > 0, got {t}")));
    }
    check_jump(params, f)?;
    if f.is_zero() {
        return Ok(NormValue { value: 0.0, argmax: vec![] });
    }
    let cands = candidate_points(params, geom, &[], opts);
    let best = sup_over(geom, cands, opts.refine, |y| jump_integral_at(params, geom, f, t, y, opts))?;
    if !best.value.is_finite() {
        return Err(Error::Numeric("jump norm integral is not finite".into()));
    }
    Ok(best)
}

pub fn kato_norm_jump(params: &KernelParams, geom: &DomainGeometry, f: &JumpFunctionalSpec, t: f64) -> Result<f64> {
    Ok(kato_norm_jump_with(params, geom, f, t, &KatoOpts::default())?.value)
}

/// `N_{mu,F}(t) = N_mu(t) + N_F(t)`.
pub fn kato_norm_combined(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    f: &JumpFunctionalSpec,
    t: f64,
    opts: &KatoOpts,
) -> Result<f64> {
    Ok(kato_norm_measure_with(params, geom, mu, t, opts)?.value + kato_norm_jump_with(params, geom, f, t, opts)?.value)
}

/// Sampled norm curve `t -> N(t)`, sorted by increasing `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoNormCurve {
    pub points: Vec<(f64, f64)>,
    /// Log-log slope over the three smallest `t`.
    pub tail_slope: f64,
}

impl KatoNormCurve {
    pub fn new(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tail: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0 && p.1.is_finite()).take(3).collect();
        let tail_slope = if tail.len() >= 2 {
            let (a, b) = (tail[0], tail[tail.len() - 1]);
            (b.1.ln() - a.1.ln()) / (b.0.ln() - a.0.ln())
        } else {
            f64::NAN
        };
        KatoNormCurve { points, tail_slope }
    }

    /// Evaluates `N` at each `t`, recording divergence as `+inf`.
    pub fn sample<F: Fn(f64) -> Result<f64>>(ts: &[f64], eval: F) -> Result<Self> {
        let mut pts = Vec::with_capacity(ts.len());
        for &t in ts {
            let v = match eval(t) {
                Ok(v) => v,
                Err(Error::Numeric(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            pts.push((t, v));
        }
        Ok(KatoNormCurve::new(pts))
    }

    /// Log-log interpolation; exact at sampled nodes.
    pub fn at(&self, t: f64) -> Option<f64> {
        let p = &self.points;
        if p.is_empty() {
            return None;
        }
        if let Some(q) = p.iter().find(|q| (q.0 - t).abs() <= 1e-12 * t) {
            return Some(q.1);
        }
        let i = p.iter().position(|q| q.0 > t)?;
        if i == 0 {
            return None;
        }
        let (a, b) = (p[i - 1], p[i]);
        if a.1 <= 0.0 || b.1 <= 0.0 {
            return Some(a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0));
        }
        let w = (t.ln() - a.0.ln()) / (b.0.ln() - a.0.ln());
        Some((a.1.ln() + w * (b.1.ln() - a.1.ln())).exp())
    }

    /// Largest increase `N(t_i) - N(t_{i+1})` relative to `N(t_{i+1})`.
    pub fn monotonicity_defect(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| if w[1].1 > 0.0 { (w[0].1 - w[1].1) / w[1].1 } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// Geometric sample times `4^{-k}`, `k = 0..=levels`.
pub fn default_times(levels: usize) -> Vec<f64> {
    (0..=levels).map(|k| 0.25f64.powi(k as i32)).collect()
}

/// Thresholds `N(t_k) <= f_k N(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub entries: Vec<(f64, f64)>,
}

impl Default for ThresholdSchedule {
    fn default() -> Self {
        ThresholdSchedule { entries: (1..=8).map(|k| (0.25f64.powi(k), 0.5f64.powi(k))).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    InClass,
    OutOfClass,
    Inconclusive,
}

/// Certifies decay to resolution; a limit statement cannot be proven here.
pub fn kato_class_probe(curve: &KatoNormCurve, schedule: &ThresholdSchedule) -> Verdict {
    if curve.points.iter().any(|p| !p.1.is_finite()) {
        return Verdict::OutOfClass;
    }
    let Some(n1) = curve.at(1.0) else {
        return Verdict::Inconclusive;
    };
    if n1 == 0.0 {
        return Verdict::InClass;
    }
    let met = schedule.entries.iter().all(|&(t, frac)| curve.at(t).is_some_and(|v| v <= frac * n1));
    if met {
        return Verdict::InClass;
    }
    let floor = curve.points.first().map(|p| p.1).unwrap_or(0.0);
    if curve.tail_slope.abs() < 0.05 && floor > 0.1 * n1 {
        return Verdict::OutOfClass;
    }
    Verdict::Inconclusive
}

/// `sup_x ∫_{B(x,r) ∩ D} k(|x-y|) |mu|(dy)` with `k(ρ) = ρ^{α-d}`
/// (`ln(r/ρ)` when `d = α`), the local criterion for the classical class.
pub fn kd_alpha_diagnostic(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    r: f64,
    opts: &KatoOpts,
) -> Result<f64> {
    let rule = SphereRule::new(params.d, opts.sphere_n)?;
    let expo = params.alpha - params.d as f64;
    let marks: Vec<Vec<f64>> = match mu {
        MeasureSpec::Density { density } => density.landmarks().into_iter().chain(density.singular_points()).collect(),
        MeasureSpec::Atomic { atoms } => atoms.iter().map(|a| a.point.clone()).collect(),
        _ => vec![],
    };
    let cands = candidate_points(params, geom, &marks, opts);
    let best = sup_over(geom, cands, 0, |x| {
        Ok(polar_measure_integral(geom, x, mu, &rule, &[], r, &opts.quad, |_, rho| {
            if expo == 0.0 {
                (r / rho).ln()
            } else {
                rho.powf(expo)
            }
        }))
    })?;
    Ok(best.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::q_mass;
    use crate::measure::{derive_f1, DensityFn};

    #[test]
    fn zero_measure_and_zero_jump() {
        let p = KernelParams::new(1, 1.0, 0.5, 2.0).unwrap();
        let g = DomainGeometry::intervals(vec![(-1.0, 1.0)]);
        assert_eq!(kato_norm_measure(&p, &g, &MeasureSpec::Zero, 0.3).unwrap(), 0.0);
        assert_eq!(kato_norm_jump(&p, &g, &JumpFunctionalSpec::zero(), 0.3).unwrap(), 0.0);
    }

    #[test]
    fn lebesgue_scaling_is_linear() {
        let p = KernelParams::new(1, 1.0, 0.0, 8.0).unwrap();
        let mu = MeasureSpec::constant(1.0);
        let mass = q_mass(&p, 1.0).unwrap();
        for t in [0.01, 0.1, 1.0] {
            let n = kato_norm_measure(&p, &DomainGeometry::WholeSpace, &mu, t).unwrap();
            assert!((n / (mass * t) - 1.0).abs() < 1e-6, "t={t}: {n}");
        }
    }

    #[test]
    fn missing_envelope_is_config_error() {
        let p = KernelParams::new(1, 1.0, 0.0, 8.0).unwrap();
        let f = JumpFunctionalSpec::constant(0.1, None);
        assert!(matches!(kato_norm_jump(&p, &DomainGeometry::WholeSpace, &f, 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn nonintegrable_density_is_detected() {
        let p = KernelParams::new(2, 1.0, 0.0, 8.0).unwrap();
        let mu = MeasureSpec::density(DensityFn::RadialPower { c: 1.0, center: vec![0.0, 0.0], exponent: 2.0, radius: Some(0.5) });
        let g = DomainGeometry::WholeSpace;
        assert!(matches!(kato_norm_measure(&p, &g, &mu, 0.1), Err(Error::Numeric(_))));
    }

    #[test]
    fn probe_verdicts() {
        let zero = KatoNormCurve::new(default_times(8).into_iter().map(|t| (t, 0.0)).collect());
        assert_eq!(kato_class_probe(&zero, &ThresholdSchedule::default()), Verdict::InClass);
        let lin = KatoNormCurve::new(default_times(8).into_iter().map(|t| (t, 3.0 * t)).collect());
        assert_eq!(kato_class_probe(&lin, &ThresholdSchedule::default()), Verdict::InClass);
        let flat = KatoNormCurve::new(default_times(8).into_iter().map(|t| (t, 5.0 + t)).collect());
        assert_eq!(kato_class_probe(&flat, &ThresholdSchedule::default()), Verdict::OutOfClass);
    }

    #[test]
    fn linear_constant_is_attained_on_the_whole_space() {
        let p = KernelParams::new(1, 1.0, 0.0, 8.0).unwrap();
        assert_eq!(linear_jump_constant(&p, 1.5).unwrap(), 48.0);
        assert!(linear_jump_constant(&p, 1.0).is_err());
        let n = kato_norm_jump(&p, &DomainGeometry::WholeSpace, &JumpFunctionalSpec::power_cap(1.0, 1.5), 0.01).unwrap();
        assert!((n / 0.48 - 1.0).abs() < 1e-4);
        // half line, gamma = 1/2: 2 * 6 * (4 + 2 (2 + 2/3) 2)
        let h = KernelParams::new(1, 1.0, 0.5, 8.0).unwrap();
        assert!((linear_jump_constant(&h, 1.5).unwrap() - 12.0 * (4.0 + 32.0 / 3.0)).abs() < 1e-12);
        let n = kato_norm_jump(&h, &DomainGeometry::HalfSpace, &JumpFunctionalSpec::power_cap(1.0, 1.5), 0.01).unwrap();
        assert!(n <= 0.01 * linear_jump_constant(&h, 1.5).unwrap());
    }

    #[test]
    fn jump_norm_whole_space_closed_form() {
        // gamma = 0, whole space: N_F(t) = mass * t * 2 ∫ |f|(ρ) ρ^{-d-α} dρ over R
        let p = KernelParams::new(1, 1.0, 0.0, 8.0).unwrap();
        let f = JumpFunctionalSpec::power_cap(1.0, 1.5);
        let t = 0.01;
        let n = kato_norm_jump(&p, &DomainGeometry::WholeSpace, &f, t).unwrap();
        // 2 sides * 2 (symmetrization) * (∫_0^1 ρ^{-0.5} + ∫_1^∞ ρ^{-2}) = 4 * 3
        let exact = q_mass(&p, t).unwrap() * t * 12.0;
        assert!((n / exact - 1.0).abs() < 1e-4, "{n} vs {exact}");
        let f1 = derive_f1(&f);
        assert!(kato_norm_jump(&p, &DomainGeometry::WholeSpace, &f1, t).unwrap() > n);
    }
}
