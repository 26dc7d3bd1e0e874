//! Perturbation series `q_D = sum_k p^k` on one-dimensional space-time grids,
//! the constants that control it, and extension to larger times.
//!
//! Each iterate is stored as a ratio table `r^k = p^k / p^0` over
//! `(log t, x, y)`: the ratios stay bounded where the kernels themselves vary
//! over many decades, so interpolation between nodes is benign.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::kato::Verdict;
use crate::kernel::{clip_pow, q_radial, KernelParams};
use crate::measure::{JumpFunctionalSpec, MeasureSpec};
use crate::models::levy_constant;
use crate::quad::{gl, graded_panels, integrate_split, integrate_tail, QuadOpts};
use crate::stable::{self, ProfileTable};

/// Where the unperturbed kernel `p^0` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Cauchy kernel, `d = 1`, `alpha = 1`, whole line.
    ClosedForm,
    /// Whole-space symmetric stable density by radial inversion.
    FourierInversion,
    /// Midband `psi_gamma * q`, defined for `t <= 1`.
    Surrogate,
    /// Caller-supplied table, e.g. a Monte Carlo estimate.
    Table,
}

type CustomFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

/// The unperturbed kernel `p^0(t, x, y)`.
#[derive(Clone)]
pub struct BaseKernel {
    pub provenance: Provenance,
    pub params: KernelParams,
    pub geom: DomainGeometry,
    table: Option<Arc<ProfileTable>>,
    custom: Option<CustomFn>,
    symmetric: bool,
}

impl fmt::Debug for BaseKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseKernel")
            .field("provenance", &self.provenance)
            .field("params", &self.params)
            .field("geom", &self.geom)
            .finish()
    }
}

impl BaseKernel {
    /// Cauchy kernel `t / (pi (t^2 + r^2))` with `C_0 = 2 pi`.
    pub fn cauchy() -> Self {
        BaseKernel {
            provenance: Provenance::ClosedForm,
            params: KernelParams { d: 1, alpha: 1.0, gamma: 0.0, c0: 2.0 * PI },
            geom: DomainGeometry::WholeSpace,
            table: None,
            custom: None,
            symmetric: true,
        }
    }

    pub fn fourier(params: KernelParams) -> Result<Self> {
        params.validate()?;
        Ok(BaseKernel {
            provenance: Provenance::FourierInversion,
            params,
            geom: DomainGeometry::WholeSpace,
            table: Some(stable::profile_table(params.d, params.alpha)?),
            custom: None,
            symmetric: true,
        })
    }

    pub fn surrogate(params: KernelParams, geom: DomainGeometry) -> Result<Self> {
        params.validate()?;
        geom.validate(params.d)?;
        Ok(BaseKernel { provenance: Provenance::Surrogate, params, geom, table: None, custom: None, symmetric: true })
    }

    /// Wraps an external kernel; `symmetric` declares `p(t,x,y) = p(t,y,x)`.
    pub fn custom<F>(params: KernelParams, geom: DomainGeometry, symmetric: bool, f: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        params.validate()?;
        geom.validate(params.d)?;
        Ok(BaseKernel { provenance: Provenance::Table, params, geom, table: None, custom: Some(Arc::new(f)), symmetric })
    }

    /// Cauchy on the whole line when it applies, otherwise Fourier on the
    /// whole space, otherwise the surrogate.
    pub fn for_problem(params: KernelParams, geom: &DomainGeometry) -> Result<Self> {
        if geom.is_whole_space() {
            if params.d == 1 && params.alpha == 1.0 {
                let mut b = BaseKernel::cauchy();
                b.params = params;
                return Ok(b);
            }
            return BaseKernel::fourier(params);
        }
        BaseKernel::surrogate(params, geom.clone())
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Fast evaluation used inside nested quadrature; zero off `D`.
    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let r = crate::geometry::dist(x, y);
        match self.provenance {
            Provenance::ClosedForm => t / (PI * (t * t + r * r)),
            Provenance::FourierInversion => self.table.as_ref().map(|tb| tb.density(t, r)).unwrap_or(0.0),
            Provenance::Surrogate => {
                let (dx, dy) = (self.geom.delta(x), self.geom.delta(y));
                if dx <= 0.0 || dy <= 0.0 {
                    return 0.0;
                }
                let p = &self.params;
                clip_pow(dx, t, p.alpha, p.gamma) * clip_pow(dy, t, p.alpha, p.gamma) * q_radial(p.d, p.alpha, t, r)
            }
            Provenance::Table => self.custom.as_ref().map(|f| f(t, x, y)).unwrap_or(0.0),
        }
    }

    #[inline]
    pub fn eval1(&self, t: f64, x: f64, y: f64) -> f64 {
        self.eval(t, &[x], &[y])
    }

    /// Largest `max(p / (psi q), psi q / p)` over a grid: the smallest `C_0`
    /// for which the kernel sits in the band there.
    pub fn band_constant(&self, times: &[f64], points: &[Vec<f64>]) -> f64 {
        let p = &self.params;
        let mut c: f64 = 1.0;
        for &t in times {
            for x in points {
                for y in points {
                    let (dx, dy) = (self.geom.delta(x), self.geom.delta(y));
                    if dx <= 0.0 || dy <= 0.0 {
                        continue;
                    }
                    let mid = clip_pow(dx, t, p.alpha, p.gamma)
                        * clip_pow(dy, t, p.alpha, p.gamma)
                        * q_radial(p.d, p.alpha, t, crate::geometry::dist(x, y));
                    let v = self.eval(t, x, y);
                    if v > 0.0 && mid > 0.0 {
                        c = c.max(v / mid).max(mid / v);
                    }
                }
            }
        }
        c
    }
}

/// Checked evaluation of `p^0`; Fourier provenance uses direct inversion.
pub fn p0_eval(base: &BaseKernel, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("p0 requires t > 0, got {t}")));
    }
    if base.provenance == Provenance::Surrogate && t > 1.0 {
        return Err(Error::Domain(format!("surrogate kernel is defined for t <= 1, got {t}")));
    }
    if x.len() != base.params.d || y.len() != base.params.d {
        return Err(Error::Domain("point dimension does not match d".into()));
    }
    match base.provenance {
        Provenance::FourierInversion => {
            stable::density(base.params.d, base.params.alpha, t, crate::geometry::dist(x, y))
        }
        _ => Ok(base.eval(t, x, y)),
    }
}

/// The perturbation: `mu`, the jump functional `F_1 = e^F - 1`, and the
/// Levy-system intensity constant `c`.
#[derive(Debug, Clone)]
pub struct SeriesProblem {
    pub base: BaseKernel,
    pub mu: MeasureSpec,
    pub f1: JumpFunctionalSpec,
    pub levy_c: f64,
}

impl SeriesProblem {
    /// Uses the symmetric stable intensity `A(d, -alpha)`.
    pub fn new(base: BaseKernel, mu: MeasureSpec, f1: JumpFunctionalSpec) -> Result<Self> {
        let levy_c = levy_constant(base.params.d, base.params.alpha);
        SeriesProblem::with_intensity(base, mu, f1, levy_c)
    }

    pub fn with_intensity(base: BaseKernel, mu: MeasureSpec, f1: JumpFunctionalSpec, levy_c: f64) -> Result<Self> {
        if base.params.d != 1 {
            return Err(Error::Unsupported(format!("series grids are one-dimensional, got d = {}", base.params.d)));
        }
        mu.validate(1, &base.geom)?;
        f1.validate()?;
        let c0 = base.params.c0;
        if !(levy_c >= 1.0 / c0 && levy_c <= c0) {
            return Err(Error::Config(format!("jump intensity {levy_c} lies outside [1/C0, C0] = [{}, {c0}]", 1.0 / c0)));
        }
        Ok(SeriesProblem { base, mu, f1, levy_c })
    }

    fn params(&self) -> &KernelParams {
        &self.base.params
    }
}

/// Tensor grid: log-spaced times, shared `x`/`y` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesGrid {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
}

impl SeriesGrid {
    pub fn new(times: Vec<f64>, xs: Vec<f64>) -> Result<Self> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if times.is_empty() || !(times[0] > 0.0) || !increasing(&times) {
            return Err(Error::Config("series times must be positive and strictly increasing".into()));
        }
        if xs.len() < 2 || !increasing(&xs) || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("series nodes must be finite, strictly increasing, at least two".into()));
        }
        Ok(SeriesGrid { times, xs })
    }

    pub fn log_times(t_lo: f64, t_hi: f64, n: usize) -> Vec<f64> {
        if n <= 1 {
            return vec![t_hi];
        }
        let (a, b) = (t_lo.ln(), t_hi.ln());
        (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
    }

    /// Uniform nodes on `[lo, hi]` plus points at distance `h 2^{-k}` on both
    /// sides of each edge, `k = 1..=levels`.
    pub fn refined_nodes(lo: f64, hi: f64, n: usize, edges: &[f64], levels: usize) -> Vec<f64> {
        let n = n.max(2);
        let h = (hi - lo) / (n - 1) as f64;
        let mut v: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
        for &e in edges {
            if e >= lo && e <= hi {
                v.push(e);
            }
            for k in 1..=levels {
                for s in [-1.0, 1.0] {
                    let p = e + s * h * 0.5f64.powi(k as i32);
                    if p > lo && p < hi {
                        v.push(p);
                    }
                }
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
        v
    }

    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn len(&self) -> usize {
        self.nt() * self.nx() * self.nx()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ti: usize, xi: usize, yi: usize) -> usize {
        (ti * self.nx() + xi) * self.nx() + yi
    }

    pub fn window(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.nx() - 1])
    }
}

fn bracket(v: &[f64], x: f64) -> (usize, f64) {
    let n = v.len();
    if x <= v[0] {
        return (0, 0.0);
    }
    if x >= v[n - 1] {
        return (n - 2, 1.0);
    }
    let i = v.partition_point(|&p| p <= x) - 1;
    let i = i.min(n - 2);
    (i, (x - v[i]) / (v[i + 1] - v[i]))
}

/// Ratio `p^k / p^0` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub grid: Arc<SeriesGrid>,
    pub vals: Vec<f64>,
}

impl RatioTable {
    /// Trilinear in `(log t, x, y)`; times below the grid hold the first slice.
    pub fn lookup(&self, tau: f64, z: f64, y: f64) -> f64 {
        let g = &self.grid;
        let (ti, tf) = if g.nt() == 1 || tau <= g.times[0] {
            (0, 0.0)
        } else {
            let (i, _) = bracket(&g.times, tau);
            let f = ((tau.ln() - g.times[i].ln()) / (g.times[i + 1].ln() - g.times[i].ln())).clamp(0.0, 1.0);
            (i, f)
        };
        let (xi, xf) = bracket(&g.xs, z);
        let (yi, yf) = bracket(&g.xs, y);
        let slice = |t: usize| {
            let v = |a: usize, b: usize| self.vals[g.index(t, a, b)];
            let lo = v(xi, yi) * (1.0 - yf) + v(xi, yi + 1) * yf;
            let hi = v(xi + 1, yi) * (1.0 - yf) + v(xi + 1, yi + 1) * yf;
            lo * (1.0 - xf) + hi * xf
        };
        if tf == 0.0 || g.nt() == 1 {
            slice(ti)
        } else {
            slice(ti) * (1.0 - tf) + slice(ti + 1) * tf
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The previous iterate entering one Duhamel step.
#[derive(Debug, Clone, Copy)]
pub enum Prev<'a> {
    Base,
    Table(&'a RatioTable),
}

/// Quadrature settings of the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOpts {
    pub k_max: usize,
    /// Stop once the largest term ratio drops below this.
    pub tol: f64,
    pub quad_s: QuadOpts,
    pub quad_z: QuadOpts,
    pub quad_w: QuadOpts,
    /// Refuse grids extending past this horizon.
    pub t1: Option<f64>,
}

impl Default for SeriesOpts {
    fn default() -> Self {
        SeriesOpts {
            k_max: 20,
            tol: 1e-14,
            quad_s: QuadOpts { nodes: 6, ratio: 0.15, rel_floor: 1e-9, panels: 1 },
            quad_z: QuadOpts { nodes: 6, ratio: 0.2, rel_floor: 1e-7, panels: 1 },
            quad_w: QuadOpts { nodes: 5, ratio: 0.2, rel_floor: 1e-6, panels: 1 },
            t1: None,
        }
    }
}

fn clip_segments(segs: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    segs.iter().filter_map(|&(a, b)| {
        let (a, b) = (a.max(lo), b.min(hi));
        (b > a).then_some((a, b))
    })
    .collect()
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

/// Support of `mu` inside `[lo, hi]` with extra breakpoints; errors when the
/// support reaches beyond the window.
pub(crate) fn measure_segments(mu: &MeasureSpec, geom: &DomainGeometry, lo: f64, hi: f64) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let dsegs = clip_segments(&geom.segments_1d(), lo, hi);
    let mut pts = Vec::new();
    let beyond = |origin: f64, dir: f64| -> bool {
        let dray = geom.ray_segments(&[origin], &[dir], f64::INFINITY);
        let dray: Vec<(f64, f64)> = dray.into_iter().filter(|s| s.1 - s.0 > 1e-12).collect();
        if dray.is_empty() {
            return false;
        }
        match mu {
            MeasureSpec::Density { density } => {
                let (mut k, mut s) = (Vec::new(), Vec::new());
                match density.ray_support(&[origin], &[dir], f64::INFINITY, &mut k, &mut s) {
                    None => true,
                    Some(sup) => intersect(&dray, &sup).iter().any(|s| s.1 - s.0 > 1e-12),
                }
            }
            MeasureSpec::PowerBoundary { .. } => true,
            _ => false,
        }
    };
    if beyond(lo, -1.0) || beyond(hi, 1.0) {
        return Err(Error::Resolution(format!(
            "the support of mu extends beyond the spatial window [{lo}, {hi}]; widen the grid"
        )));
    }
    let segs = match mu {
        MeasureSpec::Density { density } => {
            let mut s = Vec::new();
            match density.ray_support(&[lo], &[1.0], hi - lo, &mut pts, &mut s) {
                Some(sup) => {
                    let sup: Vec<(f64, f64)> = sup.iter().map(|&(a, b)| (lo + a, lo + b)).collect();
                    pts = pts.iter().map(|r| lo + r).collect();
                    pts.extend(s.iter().map(|r| lo + r));
                    intersect(&dsegs, &sup)
                }
                None => {
                    pts = pts.iter().map(|r| lo + r).collect();
                    pts.extend(s.iter().map(|r| lo + r));
                    dsegs
                }
            }
        }
        MeasureSpec::PowerBoundary { .. } => dsegs,
        _ => vec![],
    };
    Ok((segs, pts))
}

fn integrate_segments<F: FnMut(f64) -> f64>(mut f: F, segs: &[(f64, f64)], pts: &[f64], opts: &QuadOpts) -> f64 {
    let mut total = 0.0;
    let mut sing: Vec<f64> = Vec::with_capacity(pts.len() + 2);
    for &(a, b) in segs {
        sing.clear();
        sing.extend(pts.iter().copied().filter(|p| *p >= a && *p <= b));
        sing.push(a);
        sing.push(b);
        total += integrate_split(&mut f, a, b, &sing, &[], opts);
    }
    total
}

/// One Duhamel step at `(t, x, y)`, returned as `(measure part, jump part)`.
/// The spatial integrals run over `D ∩ [window]`.
pub fn duhamel_step_parts(
    problem: &SeriesProblem,
    prev: Prev<'_>,
    t: f64,
    x: f64,
    y: f64,
    window: (f64, f64),
    opts: &SeriesOpts,
) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("duhamel step requires t > 0, got {t}")));
    }
    let (lo, hi) = window;
    if let Prev::Table(tab) = prev {
        let g = &tab.grid;
        let (glo, ghi) = g.window();
        let tmax = g.times[g.nt() - 1];
        if t > tmax * (1.0 + 1e-12) || x < glo || x > ghi || y < glo || y > ghi || lo < glo || hi > ghi {
            return Err(Error::Resolution(format!(
                "(t, x, y) = ({t:e}, {x}, {y}) or window lies outside the previous iterate's grid"
            )));
        }
    }
    let base = &problem.base;
    let alpha = problem.params().alpha;
    let scale = |s: f64| s.powf(1.0 / alpha);
    let pprev = |tau: f64, z: f64| -> f64 {
        let p = base.eval1(tau, z, y);
        match prev {
            Prev::Base => p,
            Prev::Table(tab) => {
                if p == 0.0 {
                    0.0
                } else {
                    p * tab.lookup(tau, z, y)
                }
            }
        }
    };
    let sq = &opts.quad_s;

    // measure part
    let mut m_part = 0.0;
    match &problem.mu {
        MeasureSpec::Zero => {}
        MeasureSpec::Atomic { atoms } => {
            for a in atoms {
                if !base.geom.contains(&a.point) || a.point[0] < lo || a.point[0] > hi {
                    continue;
                }
                let z = a.point[0];
                let g = |s: f64| base.eval1(s, x, z) * pprev(t - s, z);
                m_part += a.weight * integrate_split(g, 0.0, t, &[0.0, t], &[0.5 * t], sq);
            }
        }
        mu => {
            let (segs, extra) = measure_segments(mu, &base.geom, lo, hi)?;
            let geom = &base.geom;
            let g = |s: f64| {
                let (a, b) = (scale(s), scale(t - s));
                let mut pts = extra.clone();
                pts.extend([x, y, x - a, x + a, y - b, y + b]);
                integrate_segments(
                    |z| {
                        let v = mu.density_at(geom, &[z]);
                        if v == 0.0 {
                            return 0.0;
                        }
                        let p = base.eval1(s, x, z);
                        if p == 0.0 {
                            return 0.0;
                        }
                        p * v * pprev(t - s, z)
                    },
                    &segs,
                    &pts,
                    &opts.quad_z,
                )
            };
            m_part = integrate_split(g, 0.0, t, &[0.0, t], &[0.5 * t], sq);
        }
    }

    // jump part
    let mut j_part = 0.0;
    let f1 = &problem.f1;
    if !f1.is_zero() {
        if f1.envelope.is_none() && f1.cutoff.is_none() {
            return Err(Error::Config("F1 needs an envelope or a diagonal cutoff for the jump part".into()));
        }
        let dsegs = clip_segments(&base.geom.segments_1d(), lo, hi);
        let da = 1.0 + alpha;
        let c = problem.levy_c;
        let g = |s: f64| {
            let (a, b) = (scale(s), scale(t - s));
            let mut zpts = vec![x, y, x - a, x + a];
            zpts.push(y);
            integrate_segments(
                |z| {
                    let p = base.eval1(s, x, z);
                    if p == 0.0 {
                        return 0.0;
                    }
                    let mut wpts = vec![z, y, y - b, y + b];
                    if let Some(cut) = f1.cutoff {
                        wpts.extend([z - cut, z + cut]);
                    }
                    let inner = integrate_segments(
                        |w| {
                            let rho = (z - w).abs();
                            if rho == 0.0 {
                                return 0.0;
                            }
                            if let Some(cut) = f1.cutoff {
                                if rho < cut {
                                    return 0.0;
                                }
                            }
                            let fv = f1.eval_radial(rho);
                            if fv == 0.0 {
                                return 0.0;
                            }
                            c * fv * rho.powf(-da) * pprev(t - s, w)
                        },
                        &dsegs,
                        &wpts,
                        &opts.quad_w,
                    );
                    p * inner
                },
                &dsegs,
                &zpts,
                &opts.quad_z,
            )
        };
        j_part = integrate_split(g, 0.0, t, &[0.0, t], &[0.5 * t], sq);
    }
    Ok((m_part, j_part))
}

/// `p^k(t, x, y)` from `p^{k-1}`.
pub fn duhamel_step(
    problem: &SeriesProblem,
    prev: Prev<'_>,
    t: f64,
    x: f64,
    y: f64,
    window: (f64, f64),
    opts: &SeriesOpts,
) -> Result<f64> {
    let (m, j) = duhamel_step_parts(problem, prev, t, x, y, window, opts)?;
    Ok(m + j)
}

/// Diagnostics of one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub k: usize,
    /// `max |p^k| / p^0` over the grid.
    pub term_ratio: f64,
    /// Same maximum per time slice.
    pub per_time: Vec<f64>,
    pub ratios: RatioTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub grid: Arc<SeriesGrid>,
    pub provenance: Provenance,
    pub p0: Vec<f64>,
    pub terms: Vec<SeriesTerm>,
    /// `q_D = sum_k p^k` at the nodes.
    pub q: Vec<f64>,
    /// `sum_k |p^k| / p^0` at the nodes, `k = 0` included.
    pub abs_ratio_sum: Vec<f64>,
    pub converged: bool,
}

impl SeriesResult {
    pub fn max_abs_ratio_sum(&self) -> f64 {
        self.abs_ratio_sum.iter().copied().fold(0.0, f64::max)
    }

    /// `sum_k r^k` interpolated at `(x, y)` for time slice `ti`.
    pub fn ratio_sum_at(&self, ti: usize, x: f64, y: f64) -> f64 {
        let t = self.grid.times[ti];
        1.0 + self.terms.iter().map(|term| term.ratios.lookup(t, x, y)).sum::<f64>()
    }

    /// `q_D(t_i, x, y)` for `x, y` inside the grid window.
    pub fn q_at(&self, base: &BaseKernel, ti: usize, x: f64, y: f64) -> Result<f64> {
        let (lo, hi) = self.grid.window();
        if x < lo || x > hi || y < lo || y > hi {
            return Err(Error::Resolution(format!("({x}, {y}) outside the series window [{lo}, {hi}]")));
        }
        Ok(base.eval1(self.grid.times[ti], x, y) * self.ratio_sum_at(ti, x, y))
    }

    /// `(1 / |B|) ∫_B q_D(t_i, x_i, y) dy` over the bin `B = [lo, hi]`.
    pub fn bin_average(&self, base: &BaseKernel, ti: usize, xi: usize, lo: f64, hi: f64) -> Result<f64> {
        let x = self.grid.xs[xi];
        let (wlo, whi) = self.grid.window();
        if lo < wlo || hi > whi || !(hi > lo) {
            return Err(Error::Resolution(format!("bin [{lo}, {hi}] outside the series window")));
        }
        let t = self.grid.times[ti];
        let s = t.powf(1.0 / base.params.alpha);
        let mut pts: Vec<f64> = self.grid.xs.iter().copied().filter(|p| *p > lo && *p < hi).collect();
        pts.extend([x, x - s, x + s].into_iter().filter(|p| *p > lo && *p < hi));
        pts.push(lo);
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in pts.windows(2) {
            total += gl(|y| base.eval1(t, x, y) * self.ratio_sum_at(ti, x, y), w[0], w[1], 16);
        }
        Ok(total / (hi - lo))
    }
}

/// Sums the series on `grid` up to `opts.k_max` orders.
pub fn series_sum(problem: &SeriesProblem, grid: SeriesGrid, opts: &SeriesOpts) -> Result<SeriesResult> {
    let grid = Arc::new(grid);
    let t_top = grid.times[grid.nt() - 1];
    if let Some(t1) = opts.t1 {
        if t_top > t1 * (1.0 + 1e-12) {
            return Err(Error::BeyondHorizon { t: t_top, t1 });
        }
    }
    let base = &problem.base;
    if base.provenance == Provenance::Surrogate && t_top > 1.0 {
        return Err(Error::Domain("surrogate kernel is defined for t <= 1".into()));
    }
    let n = grid.len();
    let nx = grid.nx();
    let mut p0 = vec![0.0; n];
    for ti in 0..grid.nt() {
        for xi in 0..nx {
            for yi in 0..nx {
                p0[grid.index(ti, xi, yi)] = base.eval1(grid.times[ti], grid.xs[xi], grid.xs[yi]);
            }
        }
    }
    let symmetric = base.is_symmetric();
    let nodes: Vec<(usize, usize, usize)> = (0..grid.nt())
        .flat_map(|ti| (0..nx).flat_map(move |xi| (0..nx).map(move |yi| (ti, xi, yi))))
        .filter(|&(_, xi, yi)| !symmetric || yi >= xi)
        .collect();
    let window = grid.window();
    let perturbed = !(problem.mu.is_zero() && problem.f1.is_zero());

    let mut terms: Vec<SeriesTerm> = Vec::new();
    let mut converged = !perturbed;
    if perturbed {
        for k in 1..=opts.k_max {
            let prev = match terms.last() {
                None => Prev::Base,
                Some(t) => Prev::Table(&t.ratios),
            };
            let vals: Vec<Result<f64>> = nodes
                .par_iter()
                .map(|&(ti, xi, yi)| {
                    let i = grid.index(ti, xi, yi);
                    if p0[i] == 0.0 {
                        return Ok(0.0);
                    }
                    let v = duhamel_step(problem, prev, grid.times[ti], grid.xs[xi], grid.xs[yi], window, opts)?;
                    Ok(v / p0[i])
                })
                .collect();
            let mut table = vec![0.0; n];
            for (&(ti, xi, yi), v) in nodes.iter().zip(vals) {
                let v = v?;
                table[grid.index(ti, xi, yi)] = v;
                if symmetric {
                    table[grid.index(ti, yi, xi)] = v;
                }
            }
            let per_time: Vec<f64> = (0..grid.nt())
                .map(|ti| table[ti * nx * nx..(ti + 1) * nx * nx].iter().fold(0.0, |m: f64, v| m.max(v.abs())))
                .collect();
            let term_ratio = per_time.iter().copied().fold(0.0, f64::max);
            let t1 = opts.t1.unwrap_or(f64::NAN);
            if !term_ratio.is_finite() {
                return Err(Error::Divergence { order: k, reason: "non-finite term".into(), t1 });
            }
            if let Some(last) = terms.last() {
                if term_ratio > last.term_ratio * (1.0 + 1e-9) && term_ratio > 1e-300 {
                    return Err(Error::Divergence {
                        order: k,
                        reason: format!("term ratio grew from {:e} to {:e}", last.term_ratio, term_ratio),
                        t1,
                    });
                }
            }
            terms.push(SeriesTerm { k, term_ratio, per_time, ratios: RatioTable { grid: grid.clone(), vals: table } });
            if term_ratio < opts.tol {
                converged = true;
                break;
            }
        }
    }
    let mut q = p0.clone();
    let mut abs_ratio_sum = vec![1.0; n];
    for (i, qi) in q.iter_mut().enumerate() {
        if p0[i] == 0.0 {
            abs_ratio_sum[i] = 0.0;
            continue;
        }
        let s: f64 = terms.iter().map(|t| t.ratios.vals[i]).sum();
        let a: f64 = terms.iter().map(|t| t.ratios.vals[i].abs()).sum();
        *qi = p0[i] * (1.0 + s);
        abs_ratio_sum[i] = 1.0 + a;
    }
    Ok(SeriesResult { grid, provenance: base.provenance, p0, terms, q, abs_ratio_sum, converged })
}

/// Constants controlling the series: `M`, `C_0^2 M`, the horizon threshold
/// and the term bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantLedger {
    pub d: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub c0: f64,
    /// Empirical constants of the two boundary-factor transfer bounds (exactly 1 when
    /// `gamma = 0`).
    pub c1: f64,
    pub c4: f64,
    /// Right-hand side of the strict inequality for `M`.
    pub m_min: f64,
    pub m: f64,
    pub c0sq_m: f64,
    /// `||F_1||_inf`.
    pub f1_norm: f64,
}

impl ConstantLedger {
    /// `M = 2 * (alpha / (alpha - gamma)) 2^{2 gamma / alpha + d + alpha + 1} C_0^4 max(C_1, C_4)`.
    pub fn new(params: &KernelParams, c1: f64, c4: f64, f1_norm: f64) -> Result<Self> {
        let m_min = Self::m_lower(params, c1, c4)?;
        Self::with_m(params, c1, c4, f1_norm, 2.0 * m_min)
    }

    pub fn with_m(params: &KernelParams, c1: f64, c4: f64, f1_norm: f64, m: f64) -> Result<Self> {
        params.validate()?;
        let m_min = Self::m_lower(params, c1, c4)?;
        if !(m > m_min) {
            return Err(Error::Config(format!("M = {m} must exceed {m_min}")));
        }
        if !(f1_norm.is_finite() && f1_norm >= 0.0) {
            return Err(Error::Config("||F1|| must be finite and nonnegative".into()));
        }
        Ok(ConstantLedger {
            d: params.d,
            alpha: params.alpha,
            gamma: params.gamma,
            c0: params.c0,
            c1,
            c4,
            m_min,
            m,
            c0sq_m: params.c0 * params.c0 * m,
            f1_norm,
        })
    }

    pub fn m_lower(params: &KernelParams, c1: f64, c4: f64) -> Result<f64> {
        if !(c1 > 0.0 && c4 > 0.0 && c1.is_finite() && c4.is_finite()) {
            return Err(Error::Config("C1 and C4 must be positive and finite".into()));
        }
        let (a, g) = (params.alpha, params.gamma);
        Ok(a / (a - g) * 2f64.powf(2.0 * g / a + params.d as f64 + a + 1.0) * params.c0.powi(4) * c1.max(c4))
    }

    /// `(3 C_0^2 M)^{-1} ∧ (9 (C_0^2 M)^2 ||F_1||)^{-1}`.
    pub fn threshold(&self) -> f64 {
        let a = 1.0 / (3.0 * self.c0sq_m);
        if self.f1_norm > 0.0 {
            a.min(1.0 / (9.0 * self.c0sq_m * self.c0sq_m * self.f1_norm))
        } else {
            a
        }
    }

    pub fn lambda(&self, n: f64) -> f64 {
        self.c0sq_m * n
    }

    pub fn c_coef(&self) -> f64 {
        self.f1_norm * self.c0sq_m
    }

    /// `lambda^k + c k lambda^{k-1}`.
    pub fn term_bound(&self, k: usize, n: f64) -> f64 {
        let l = self.lambda(n);
        let c = self.c_coef();
        if k == 0 {
            return 1.0;
        }
        l.powi(k as i32) + c * k as f64 * l.powi(k as i32 - 1)
    }

    /// `1/(1 - lambda) + c/(1 - lambda)^2`, infinite for `lambda >= 1`.
    pub fn tail_bound(&self, n: f64) -> f64 {
        let l = self.lambda(n);
        if l >= 1.0 {
            return f64::INFINITY;
        }
        1.0 / (1.0 - l) + self.c_coef() / (1.0 - l).powi(2)
    }

    /// `3/2 + (9/4) ||F_1|| C_0^2 M`, the value of the tail bound at
    /// `lambda = 1/3`.
    pub fn sum_bound(&self) -> f64 {
        1.5 + 2.25 * self.f1_norm * self.c0sq_m
    }

    /// Upper-band constant `C_6`.
    pub fn c6(&self) -> f64 {
        self.sum_bound()
    }
}

/// Largest sampled `t <= 1` with `N(t)` at or below the horizon threshold.
pub fn select_t1(ledger: &ConstantLedger, curve: &crate::kato::KatoNormCurve) -> Result<f64> {
    let thr = ledger.threshold();
    let ok: Vec<f64> = curve.points.iter().filter(|p| p.0 <= 1.0 && p.1 <= thr).map(|p| p.0).collect();
    ok.iter().copied().fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t)))).ok_or_else(|| {
        let smallest = curve.points.first().map(|p| p.1).unwrap_or(f64::NAN);
        Error::OutOfClass(format!("N(t) never fell below the horizon threshold {thr:e} (smallest sampled value {smallest:e})"))
    })
}

/// `select_t1` followed by log-bisection against `norm` up to the next grid
/// point that fails.
pub fn select_t1_refined<F: Fn(f64) -> Result<f64>>(
    ledger: &ConstantLedger,
    curve: &crate::kato::KatoNormCurve,
    norm: F,
    iters: usize,
) -> Result<f64> {
    let thr = ledger.threshold();
    let mut lo = select_t1(ledger, curve)?;
    let Some(mut hi) = curve.points.iter().map(|p| p.0).filter(|t| *t > lo && *t <= 1.0).fold(None, |m: Option<f64>, t| {
        Some(m.map_or(t, |m| m.min(t)))
    }) else {
        return Ok(lo);
    };
    for _ in 0..iters {
        let mid = (lo.ln() * 0.5 + hi.ln() * 0.5).exp();
        if norm(mid)? <= thr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Certified lower bound `q_D >= 2^{-k} p^0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub k: f64,
    /// `log2` of the certified factor, `-k`; the factor itself underflows
    /// for realistic constants.
    pub log2_factor: f64,
}

impl LowerBound {
    pub fn factor(&self) -> f64 {
        2f64.powf(self.log2_factor)
    }

    /// Nodes where `q_D < 2^{-k} p^0 (1 - tol)`, as `(index, ln margin)`.
    pub fn violations(&self, result: &SeriesResult, tol: f64) -> Vec<(usize, f64)> {
        let ln2 = std::f64::consts::LN_2;
        result
            .q
            .iter()
            .zip(&result.p0)
            .enumerate()
            .filter(|(_, (_, p))| **p > 0.0)
            .filter_map(|(i, (q, p))| {
                let margin = if *q > 0.0 { q.ln() - (p.ln() + self.log2_factor * ln2) } else { f64::NEG_INFINITY };
                (margin < (1.0 - tol).ln()).then_some((i, margin))
            })
            .collect()
    }
}

/// `k = 2 (C_0^2 M N_{|mu|,|F|}(1) + C_0^2 M ||F||)`; refuses unless `F`
/// itself was probed in class.
pub fn lower_bound_certificate(
    ledger: &ConstantLedger,
    n_abs_at_1: f64,
    f_norm: f64,
    f_verdict: Verdict,
) -> Result<LowerBound> {
    if f_verdict != Verdict::InClass {
        return Err(Error::OutOfClass(format!(
            "lower bound needs F itself in the jump Kato class; probe verdict was {f_verdict:?}"
        )));
    }
    if !(n_abs_at_1.is_finite() && n_abs_at_1 >= 0.0 && f_norm.is_finite() && f_norm >= 0.0) {
        return Err(Error::Config("lower bound inputs must be finite and nonnegative".into()));
    }
    let k = 2.0 * (ledger.c0sq_m * n_abs_at_1 + ledger.c0sq_m * f_norm);
    Ok(LowerBound { k, log2_factor: -k })
}

/// Nodes where `q_D > C_6 psi_gamma q (1 + tol)`, as `(index, ratio)`.
pub fn upper_band_violations(
    result: &SeriesResult,
    params: &KernelParams,
    geom: &DomainGeometry,
    c6: f64,
    tol: f64,
) -> Vec<(usize, f64)> {
    let g = &result.grid;
    let mut out = Vec::new();
    for ti in 0..g.nt() {
        let t = g.times[ti];
        for xi in 0..g.nx() {
            for yi in 0..g.nx() {
                let i = g.index(ti, xi, yi);
                let (x, y) = (g.xs[xi], g.xs[yi]);
                let (dx, dy) = (geom.delta(&[x]), geom.delta(&[y]));
                if dx <= 0.0 || dy <= 0.0 {
                    continue;
                }
                let band = c6
                    * clip_pow(dx, t, params.alpha, params.gamma)
                    * clip_pow(dy, t, params.alpha, params.gamma)
                    * q_radial(1, params.alpha, t, (x - y).abs());
                let r = result.q[i] / band;
                if r > 1.0 + tol {
                    out.push((i, r));
                }
            }
        }
    }
    out
}

/// Orders and times where `max |r^k| > lambda^k + c k lambda^{k-1}`, with
/// `lambda` taken from `norms[ti] = N(t_i)`.
pub fn term_bound_violations(result: &SeriesResult, ledger: &ConstantLedger, norms: &[f64], tol: f64) -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for term in &result.terms {
        for (ti, &v) in term.per_time.iter().enumerate() {
            let b = ledger.term_bound(term.k, norms[ti]);
            if v > b * (1.0 + tol) {
                out.push((term.k, ti, v, b));
            }
        }
    }
    out
}

/// One Gauss-Legendre panel of the time-extension node set, parametrized by
/// `s in [-1, 1]`.
#[derive(Debug, Clone, Copy)]
enum Panel {
    Affine { c: f64, h: f64 },
    /// `z = z0 + dir * l * (1/v - 1)` with `v = vc + vh * s`.
    Tail { z0: f64, dir: f64, l: f64, vc: f64, vh: f64 },
}

impl Panel {
    fn map(&self, s: f64) -> (f64, f64) {
        match *self {
            Panel::Affine { c, h } => (c + h * s, h),
            Panel::Tail { z0, dir, l, vc, vh } => {
                let v = vc + vh * s;
                if v <= 0.0 {
                    return (f64::INFINITY * dir, 0.0);
                }
                (z0 + dir * l * (1.0 / v - 1.0), vh * l / (v * v))
            }
        }
    }

    fn range(&self) -> (f64, f64) {
        let (a, b) = (self.map(-1.0).0, self.map(1.0).0);
        (a.min(b), a.max(b))
    }
}

struct NodeSet {
    zs: Vec<f64>,
    ws: Vec<f64>,
    panels: Vec<Panel>,
    nodes: usize,
}

/// Spatial quadrature nodes covering `D` on scale `scale` around `centers`:
/// uniform panels on a core, geometric panels outside it, then a mapped tail.
fn spatial_nodes(geom: &DomainGeometry, centers: &[f64], scale: f64, nodes: usize) -> Result<NodeSet> {
    let (cmin, cmax) = centers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let (core_lo, core_hi) = (cmin - 200.0 * scale, cmax + 200.0 * scale);
    let graded = QuadOpts { nodes, ratio: 0.3, rel_floor: 1e-8, panels: 1 };
    let mut panels = Vec::new();
    let affine = |u: f64, v: f64, panels: &mut Vec<Panel>| panels.push(Panel::Affine { c: 0.5 * (u + v), h: 0.5 * (v - u) });
    for (a, b) in geom.segments_1d() {
        let (lo, hi) = (a.max(core_lo), b.min(core_hi));
        if hi > lo {
            let n = ((hi - lo) / (0.75 * scale)).ceil() as usize;
            if n > 20_000 {
                return Err(Error::Resolution("spatial node set for time extension is too large".into()));
            }
            let h = (hi - lo) / n as f64;
            for i in 0..n {
                let (p, q) = (lo + h * i as f64, lo + h * (i + 1) as f64);
                let left = i == 0 && a.is_finite() && a >= core_lo;
                let right = i == n - 1 && b.is_finite() && b <= core_hi;
                for (u, v) in graded_panels(p, q, left, right, &graded) {
                    affine(u, v, &mut panels);
                }
            }
        }
        for (dir, start, end) in [(1.0, core_hi.max(a), b), (-1.0, core_lo.min(b), a)] {
            if (dir > 0.0 && start >= end) || (dir < 0.0 && start <= end) {
                continue;
            }
            let far = 1e4 * scale.max(1.0);
            let (mut p, mut w) = (start, scale);
            loop {
                let q = p + dir * w;
                let (u, v) = if dir > 0.0 { (p, q.min(end)) } else { (q.max(end), p) };
                if (dir > 0.0 && q >= end) || (dir < 0.0 && q <= end) {
                    for (s, t) in graded_panels(u, v, dir < 0.0, dir > 0.0, &graded) {
                        affine(s, t, &mut panels);
                    }
                    break;
                }
                affine(u, v, &mut panels);
                if (q - start).abs() > far {
                    let l = (q - start).abs();
                    for (s, t) in graded_panels(0.0, 1.0, true, false, &graded) {
                        panels.push(Panel::Tail { z0: q, dir, l, vc: 0.5 * (s + t), vh: 0.5 * (t - s) });
                    }
                    break;
                }
                p = q;
                w *= 1.5;
            }
        }
    }
    let (xg, wg) = crate::quad::gauss_legendre(nodes);
    let mut zs = Vec::with_capacity(panels.len() * nodes);
    let mut ws = Vec::with_capacity(panels.len() * nodes);
    for pn in &panels {
        for (x, w) in xg.iter().zip(wg.iter()) {
            let (z, j) = pn.map(*x);
            zs.push(z);
            ws.push(w * j);
        }
    }
    Ok(NodeSet { zs, ws, panels, nodes })
}

impl NodeSet {
    /// `∫ U(w) q(h, w, z) dw` where `U` interpolates `u` on the nodes. Wide
    /// panels near `z` use the polynomial interpolant of `u` against an
    /// adaptive rule for the kernel; the rest use the nodes directly.
    fn apply<Q: Fn(f64, f64, f64) -> f64>(&self, q: &Q, h: f64, scale: f64, u: &[f64], z: f64) -> f64 {
        let (xg, _) = crate::quad::gauss_legendre(self.nodes);
        let n = self.nodes;
        let opts = QuadOpts { nodes: 10, ratio: 0.2, rel_floor: 1e-12, panels: 1 };
        let mut total = 0.0;
        for (pi, pn) in self.panels.iter().enumerate() {
            let (lo, hi) = pn.range();
            let width = hi - lo;
            let gap = if z < lo { lo - z } else if z > hi { z - hi } else { 0.0 };
            let vals = &u[pi * n..(pi + 1) * n];
            if width <= 2.0 * scale || gap >= width {
                for k in 0..n {
                    let i = pi * n + k;
                    total += self.ws[i] * vals[k] * q(h, self.zs[i], z);
                }
                continue;
            }
            // barycentric interpolation on the Gauss-Legendre nodes
            let bw: Vec<f64> = (0..n)
                .map(|k| {
                    let prod: f64 = (0..n).filter(|&m| m != k).map(|m| xg[k] - xg[m]).product();
                    1.0 / prod
                })
                .collect();
            let interp = |s: f64| {
                let (mut num, mut den) = (0.0, 0.0);
                for k in 0..n {
                    let d = s - xg[k];
                    if d == 0.0 {
                        return vals[k];
                    }
                    let c = bw[k] / d;
                    num += c * vals[k];
                    den += c;
                }
                num / den
            };
            let mut sing = vec![-1.0, 1.0];
            if gap == 0.0 {
                // locate z in parameter space by bisection; the map is monotone
                let (mut a, mut b) = (-1.0f64, 1.0f64);
                let inc = pn.map(1.0).0 > pn.map(-1.0).0;
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if (pn.map(m).0 < z) == inc {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                sing.push(0.5 * (a + b));
            }
            total += integrate_split(
                |s| {
                    let (w, j) = pn.map(s);
                    if j == 0.0 || !w.is_finite() {
                        return 0.0;
                    }
                    interp(s) * q(h, w, z) * j
                },
                -1.0,
                1.0,
                &sing,
                &[],
                &opts,
            );
        }
        total
    }
}

/// `∫_D a(z) b(z) dz` over the one-dimensional domain, graded at `points`.
pub fn compose_1d<A: Fn(f64) -> f64, B: Fn(f64) -> f64>(
    geom: &DomainGeometry,
    a: A,
    b: B,
    points: &[f64],
    scale: f64,
    opts: &QuadOpts,
) -> f64 {
    let f = |z: f64| {
        let u = a(z);
        if u == 0.0 {
            0.0
        } else {
            u * b(z)
        }
    };
    let (pmin, pmax) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(m, n), &p| (m.min(p), n.max(p)));
    let reach = 20.0 * scale.max(1e-300) + 1.0;
    let mut total = 0.0;
    for (lo, hi) in geom.segments_1d() {
        let a0 = if lo.is_finite() { lo } else { pmin.min(hi) - reach };
        let b0 = if hi.is_finite() { hi } else { pmax.max(lo) + reach };
        let mut sing: Vec<f64> = points.iter().copied().filter(|p| *p >= a0 && *p <= b0).collect();
        sing.extend([a0, b0]);
        total += integrate_split(f, a0, b0, &sing, &[], opts);
        if !hi.is_finite() {
            let l = reach;
            total += integrate_tail(|r| f(b0 + r - l), l, opts);
        }
        if !lo.is_finite() {
            let l = reach;
            total += integrate_tail(|r| f(a0 - r + l), l, opts);
        }
    }
    total
}

/// `∫_D q(s, x, z) q(t, z, y) dz`.
#[allow(clippy::too_many_arguments)]
pub fn semigroup_compose<Q: Fn(f64, f64, f64) -> f64>(
    q: &Q,
    geom: &DomainGeometry,
    alpha: f64,
    s: f64,
    t: f64,
    x: f64,
    y: f64,
    opts: &QuadOpts,
) -> f64 {
    let (a, b) = (s.powf(1.0 / alpha), t.powf(1.0 / alpha));
    let pts = [x, y, x - a, x + a, y - b, y + b];
    compose_1d(geom, |z| q(s, x, z), |z| q(t, z, y), &pts, a.max(b), opts)
}

/// Settings of the time extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendOpts {
    pub nodes: usize,
    /// Largest tolerated relative mass defect of the node set.
    pub mass_tol: f64,
    pub quad: QuadOpts,
}

impl Default for ExtendOpts {
    fn default() -> Self {
        ExtendOpts { nodes: 8, mass_tol: 1e-6, quad: QuadOpts::fine() }
    }
}

/// Cap on the number of composition steps in [`extend_time`].
pub const MAX_EXTEND_STEPS: usize = 10_000;

/// `q_D(big_t, x, y)` from a kernel known on `(0, t1]`, by splitting `big_t`
/// into `ceil(big_t / t1)` equal steps and composing them.
#[allow(clippy::too_many_arguments)]
pub fn extend_time<Q: Fn(f64, f64, f64) -> f64 + Sync>(
    q: &Q,
    geom: &DomainGeometry,
    alpha: f64,
    t1: f64,
    big_t: f64,
    x: f64,
    y: f64,
    opts: &ExtendOpts,
) -> Result<f64> {
    if !(t1 > 0.0 && big_t > 0.0) {
        return Err(Error::Domain("time extension needs positive times".into()));
    }
    let n = (big_t / t1 * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    if n == 1 {
        return Ok(q(big_t, x, y));
    }
    if n > MAX_EXTEND_STEPS {
        return Err(Error::Resolution(format!(
            "extending to T = {big_t} from t1 = {t1:e} needs {n} steps, more than {MAX_EXTEND_STEPS}"
        )));
    }
    let h = big_t / n as f64;
    if n == 2 {
        return Ok(semigroup_compose(q, geom, alpha, h, h, x, y, &opts.quad));
    }
    let scale = h.powf(1.0 / alpha);
    let set = spatial_nodes(geom, &[x, y], scale, opts.nodes)?;
    let (zs, ws) = (&set.zs, &set.ws);
    let m_nodes: f64 = zs.iter().zip(ws).map(|(z, w)| w * q(h, x, *z)).sum();
    let m_ref = compose_1d(geom, |z| q(h, x, z), |_| 1.0, &[x, x - scale, x + scale], scale, &opts.quad);
    if (m_nodes - m_ref).abs() > opts.mass_tol * m_ref.abs().max(1e-300) {
        return Err(Error::Numeric(format!(
            "spatial truncation mass defect {:e} exceeds tolerance {:e}",
            (m_nodes - m_ref).abs() / m_ref.abs().max(1e-300),
            opts.mass_tol
        )));
    }
    let mut u: Vec<f64> = zs.iter().map(|z| q(h, x, *z)).collect();
    for _ in 0..n - 2 {
        u = zs.par_iter().map(|zj| set.apply(q, h, scale, &u, *zj)).collect();
    }
    Ok(zs.iter().zip(ws).zip(&u).map(|((z, w), a)| w * a * q(h, *z, y)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DensityFn;
    use crate::quad::adaptive;

    fn cauchy(t: f64, x: f64, y: f64) -> f64 {
        t / (PI * (t * t + (x - y) * (x - y)))
    }

    #[test]
    fn cauchy_origin() {
        let b = BaseKernel::cauchy();
        assert!((p0_eval(&b, 1.0, &[0.0], &[0.0]).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(p0_eval(&b, 0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn fourier_matches_cauchy() {
        let p = KernelParams::new(1, 1.0, 0.0, 2.0 * PI).unwrap();
        let b = BaseKernel::fourier(p).unwrap();
        for i in 0..100 {
            let t = 0.05 + 0.95 * (i % 10) as f64 / 9.0;
            let y = -5.0 + 10.0 * (i / 10) as f64 / 9.0;
            let v = p0_eval(&b, t, &[0.0], &[y]).unwrap();
            assert!((v - cauchy(t, 0.0, y)).abs() < 1e-8);
        }
    }

    #[test]
    fn surrogate_with_zero_gamma_is_q() {
        let p = KernelParams::new(1, 1.5, 0.0, 4.0).unwrap();
        let b = BaseKernel::surrogate(p, DomainGeometry::intervals(vec![(-1.0, 1.0)])).unwrap();
        let v = p0_eval(&b, 0.3, &[0.1], &[0.7]).unwrap();
        assert_eq!(v, q_radial(1, 1.5, 0.3, 0.6));
        assert!(p0_eval(&b, 1.5, &[0.1], &[0.7]).is_err());
    }

    #[test]
    fn empty_perturbation_returns_base() {
        let prob = SeriesProblem::new(BaseKernel::cauchy(), MeasureSpec::Zero, JumpFunctionalSpec::zero()).unwrap();
        let grid = SeriesGrid::new(vec![0.1, 0.2], vec![-1.0, 0.0, 1.0]).unwrap();
        let r = series_sum(&prob, grid, &SeriesOpts::default()).unwrap();
        assert!(r.terms.is_empty());
        assert_eq!(r.q, r.p0);
        let v = duhamel_step(&prob, Prev::Base, 0.1, 0.0, 0.5, (-1.0, 1.0), &SeriesOpts::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn first_order_matches_double_quadrature() {
        let v = 0.7;
        let mu = MeasureSpec::density(DensityFn::Box { value: v, lo: vec![-1.0], hi: vec![1.0] });
        let prob = SeriesProblem::new(BaseKernel::cauchy(), mu, JumpFunctionalSpec::zero()).unwrap();
        let opts = SeriesOpts::default();
        for (t, x, y) in [(0.2, 0.0, 0.3), (0.05, 0.9, -0.4), (0.5, 1.5, 2.0)] {
            let got = duhamel_step(&prob, Prev::Base, t, x, y, (-3.0, 3.0), &opts).unwrap();
            let inner = |s: f64| {
                let mut pts = vec![-1.0, x, y, 1.0];
                pts.retain(|p| *p >= -1.0 && *p <= 1.0);
                pts.sort_by(f64::total_cmp);
                pts.windows(2)
                    .map(|w| adaptive(|z| cauchy(s, x, z) * cauchy(t - s, z, y), w[0], w[1], 1e-13, 1e-11, 4000).unwrap().0)
                    .sum::<f64>()
            };
            let (want, _) = adaptive(|s| v * inner(s), 0.0, t, 1e-12, 1e-9, 4000).unwrap();
            assert!((got / want - 1.0).abs() < 1e-5, "({t},{x},{y}): {got} vs {want}");
        }
    }

    #[test]
    fn first_order_is_additive_in_mu() {
        let b1 = MeasureSpec::density(DensityFn::Box { value: 0.3, lo: vec![-1.0], hi: vec![0.2] });
        let b2 = MeasureSpec::density(DensityFn::Box { value: 0.5, lo: vec![0.0], hi: vec![1.0] });
        let both = MeasureSpec::density(DensityFn::Sum {
            terms: vec![
                DensityFn::Box { value: 0.3, lo: vec![-1.0], hi: vec![0.2] },
                DensityFn::Box { value: 0.5, lo: vec![0.0], hi: vec![1.0] },
            ],
        });
        let opts = SeriesOpts::default();
        let f = |mu: MeasureSpec| {
            let p = SeriesProblem::new(BaseKernel::cauchy(), mu, JumpFunctionalSpec::zero()).unwrap();
            duhamel_step(&p, Prev::Base, 0.1, 0.1, 0.4, (-2.0, 2.0), &opts).unwrap()
        };
        let (a, b, c) = (f(b1), f(b2), f(both));
        assert!(((a + b) / c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cauchy_semigroup() {
        let g = DomainGeometry::WholeSpace;
        for (s, t, x, y) in [(0.3, 0.5, 0.0, 0.4), (0.1, 0.9, -1.0, 2.0), (0.02, 0.05, 0.0, 0.0)] {
            let v = semigroup_compose(&cauchy, &g, 1.0, s, t, x, y, &QuadOpts::fine());
            assert!((v / cauchy(s + t, x, y) - 1.0).abs() < 1e-6, "{v}");
        }
        let e = extend_time(&cauchy, &g, 1.0, 0.25, 0.9, 0.0, 0.3, &ExtendOpts::default()).unwrap();
        assert!((e / cauchy(0.9, 0.0, 0.3) - 1.0).abs() < 1e-6, "{e}");
        assert_eq!(extend_time(&cauchy, &g, 1.0, 0.5, 0.4, 0.0, 0.3, &ExtendOpts::default()).unwrap(), cauchy(0.4, 0.0, 0.3));
    }

    #[test]
    fn ledger_arithmetic() {
        let p = KernelParams::new(1, 1.0, 0.0, 2.0 * PI).unwrap();
        let l = ConstantLedger::new(&p, 1.0, 1.0, 0.0).unwrap();
        let want = 2.0 * 8.0 * (2.0 * PI).powi(4);
        assert!((l.m / want - 1.0).abs() < 1e-14);
        assert_eq!(l.c6(), 1.5);
        assert!((l.tail_bound(l.threshold()) - 1.5).abs() < 1e-12);
        assert!(ConstantLedger::with_m(&p, 1.0, 1.0, 0.0, l.m_min).is_err());
        let lb = lower_bound_certificate(&l, 0.0, 0.0, Verdict::InClass).unwrap();
        assert_eq!(lb.factor(), 1.0);
        assert!(lower_bound_certificate(&l, 0.0, 0.0, Verdict::Inconclusive).is_err());
    }

    #[test]
    fn t1_for_linear_norm() {
        let p = KernelParams::new(1, 1.0, 0.0, 2.0 * PI).unwrap();
        let l = ConstantLedger::new(&p, 1.0, 1.0, 0.0).unwrap();
        let slope = 0.8;
        let ts: Vec<f64> = (0..80).map(|k| 0.5f64.powi(k)).collect();
        let curve = crate::kato::KatoNormCurve::new(ts.iter().map(|&t| (t, slope * t)).collect());
        let t1 = select_t1_refined(&l, &curve, |t| Ok(slope * t), 60).unwrap();
        assert!((t1 / (l.threshold() / slope) - 1.0).abs() < 1e-9);
        let zero = crate::kato::KatoNormCurve::new(ts.iter().map(|&t| (t, 0.0)).collect());
        assert_eq!(select_t1(&l, &zero).unwrap(), 1.0);
        let l2 = ConstantLedger::new(&p, 1.0, 1.0, 0.5).unwrap();
        let l3 = ConstantLedger::new(&p, 1.0, 1.0, 0.25).unwrap();
        assert!(select_t1(&l3, &curve).unwrap() >= select_t1(&l2, &curve).unwrap());
    }
}
