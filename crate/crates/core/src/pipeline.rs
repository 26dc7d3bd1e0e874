//! End-to-end runs shared by the command line and the test suites: the
//! norm curve and horizon, the series with its band checks, and the
//! series/Monte Carlo comparison.

use serde::{Deserialize, Serialize};

use crate::duhamel::{
    lower_bound_certificate, series_sum, select_t1_refined, term_bound_violations, upper_band_violations, BaseKernel,
    ConstantLedger, LowerBound, Provenance, SeriesGrid, SeriesOpts, SeriesProblem, SeriesResult,
};
use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::kato::{
    default_times, kato_class_probe, kato_norm_jump_with, kato_norm_measure_with, KatoNormCurve, KatoOpts, ThresholdSchedule,
    Verdict,
};
use crate::kernel::KernelParams;
use crate::measure::{derive_f1, DensityFn, JumpFunctionalSpec, MeasureSpec};
use crate::montecarlo::{bins_agree, estimate_density, DensityEstimate, McOpts};

/// Settings of a series run. Every field has a default so the resolved
/// configuration can be echoed in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesSetup {
    /// Largest grid time; the horizon `t1` when absent.
    pub t_max: Option<f64>,
    /// Smallest grid time relative to the largest.
    pub t_span: f64,
    pub n_times: usize,
    pub nx: usize,
    /// Spatial window; the domain or the support of `mu` widened by
    /// `margin` when absent.
    pub window: Option<(f64, f64)>,
    pub margin: f64,
    /// Refinement levels around domain and support edges.
    pub edge_levels: usize,
    /// Boundary-transfer constants; exactly 1 when `gamma = 0`.
    pub c1: Option<f64>,
    pub c4: Option<f64>,
    /// `M`; twice its lower bound when absent.
    pub m: Option<f64>,
    pub k_max: usize,
    /// Halvings `2^{-k}` sampled for the horizon search.
    pub horizon_levels: usize,
    pub bisection_steps: usize,
    /// Relative tolerance of the band and term-bound checks.
    pub check_tol: f64,
}

impl Default for SeriesSetup {
    fn default() -> Self {
        SeriesSetup {
            t_max: None,
            t_span: 0.01,
            n_times: 4,
            nx: 21,
            window: None,
            margin: 0.5,
            edge_levels: 4,
            c1: None,
            c4: None,
            m: None,
            k_max: 20,
            horizon_levels: 60,
            bisection_steps: 30,
            check_tol: 1e-6,
        }
    }
}

/// Horizon data: the ledger, the sampled norm curve and `t1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub ledger: ConstantLedger,
    /// `N_{|mu|,|F_1|}` at `2^{-k}`.
    pub curve: KatoNormCurve,
    pub t1: f64,
}

/// `N_{|mu|}(t) + N_{|F_1|}(t)`.
pub fn perturbation_norm(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    f1: &JumpFunctionalSpec,
    t: f64,
    opts: &KatoOpts,
) -> Result<f64> {
    let a = if mu.is_zero() { 0.0 } else { kato_norm_measure_with(params, geom, &mu.abs(), t, opts)?.value };
    let b = if f1.is_zero() { 0.0 } else { kato_norm_jump_with(params, geom, f1, t, opts)?.value };
    Ok(a + b)
}

fn boundary_constants(params: &KernelParams, setup: &SeriesSetup, trivial: bool) -> Result<(f64, f64)> {
    // with no perturbation the constants never enter a bound
    if params.gamma == 0.0 || trivial {
        return Ok((setup.c1.unwrap_or(1.0), setup.c4.unwrap_or(1.0)));
    }
    match (setup.c1, setup.c4) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Config(
            "gamma > 0 needs c1 and c4 (empirical constants from the certify command)".into(),
        )),
    }
}

/// Ledger and horizon `t1` for `(mu, F)`.
pub fn horizon(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    f: &JumpFunctionalSpec,
    setup: &SeriesSetup,
    kato: &KatoOpts,
) -> Result<Horizon> {
    let f1 = derive_f1(f);
    let (c1, c4) = boundary_constants(params, setup, mu.is_zero() && f1.is_zero())?;
    let ledger = match setup.m {
        Some(m) => ConstantLedger::with_m(params, c1, c4, f1.bound, m)?,
        None => ConstantLedger::new(params, c1, c4, f1.bound)?,
    };
    let ts: Vec<f64> = (0..=setup.horizon_levels).map(|k| 0.5f64.powi(k as i32)).collect();
    let norm = |t: f64| perturbation_norm(params, geom, mu, &f1, t, kato);
    let curve = KatoNormCurve::sample(&ts, norm)?;
    let t1 = select_t1_refined(&ledger, &curve, norm, setup.bisection_steps)?;
    Ok(Horizon { ledger, curve, t1 })
}

fn series_window(geom: &DomainGeometry, mu: &MeasureSpec, setup: &SeriesSetup) -> Result<(f64, f64)> {
    if let Some(w) = setup.window {
        return Ok(w);
    }
    let segs = geom.segments_1d();
    let (dlo, dhi) = (segs.first().map(|s| s.0).unwrap_or(f64::NEG_INFINITY), segs.last().map(|s| s.1).unwrap_or(f64::INFINITY));
    if dlo.is_finite() && dhi.is_finite() {
        return Ok((dlo, dhi));
    }
    let support = match mu {
        MeasureSpec::Density { density } => density_extent(density),
        MeasureSpec::Atomic { atoms } => {
            let xs: Vec<f64> = atoms.iter().map(|a| a.point[0]).collect();
            xs.iter().copied().fold(None, |m: Option<(f64, f64)>, x| Some(m.map_or((x, x), |(a, b)| (a.min(x), b.max(x)))))
        }
        _ => Some((-1.0, 1.0)),
    };
    let (a, b) = support.ok_or_else(|| Error::Config("the support of mu is unbounded; set an explicit window".into()))?;
    Ok(((a - setup.margin).max(dlo), (b + setup.margin).min(dhi)))
}

fn density_extent(d: &DensityFn) -> Option<(f64, f64)> {
    match d {
        DensityFn::Box { lo, hi, .. } => Some((lo[0], hi[0])),
        DensityFn::Ball { center, radius, .. } => Some((center[0] - radius, center[0] + radius)),
        DensityFn::RadialPower { center, radius: Some(r), .. } => Some((center[0] - r, center[0] + r)),
        DensityFn::Sum { terms } => terms.iter().try_fold(None, |acc: Option<(f64, f64)>, t| {
            let (a, b) = density_extent(t)?;
            Some(Some(acc.map_or((a, b), |(p, q)| (p.min(a), q.max(b)))))
        })?,
        _ => None,
    }
}

fn edge_points(geom: &DomainGeometry, mu: &MeasureSpec) -> Vec<f64> {
    let mut e: Vec<f64> = geom.segments_1d().iter().flat_map(|s| [s.0, s.1]).filter(|v| v.is_finite()).collect();
    if let MeasureSpec::Density { density } = mu {
        if let Some((a, b)) = density_extent(density) {
            e.extend([a, b]);
        }
    }
    e
}

/// Series run with every certificate checked on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesOutcome {
    pub horizon: Horizon,
    pub result: SeriesResult,
    /// `N_{|mu|,|F_1|}` at the grid times.
    pub grid_norms: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `(k, time index, term ratio, bound)` above the term bound.
    pub term_violations: Vec<(usize, usize, f64, f64)>,
    pub sum_bound: f64,
    pub c6: f64,
    /// `(node, ratio)` above `C_6 ψ q`.
    pub upper_violations: Vec<(usize, f64)>,
    pub lower: Option<LowerBound>,
    /// Why no lower bound was certified.
    pub lower_refusal: Option<String>,
    pub lower_violations: Vec<(usize, f64)>,
    pub passed: bool,
}

/// Horizon, series, and the band checks.
pub fn run_series(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    f: &JumpFunctionalSpec,
    setup: &SeriesSetup,
    kato: &KatoOpts,
) -> Result<SeriesOutcome> {
    if params.d != 1 {
        return Err(Error::Unsupported(format!("series grids are one-dimensional, got d = {}", params.d)));
    }
    let hz = horizon(params, geom, mu, f, setup, kato)?;
    let t_hi = setup.t_max.unwrap_or(hz.t1);
    if t_hi > hz.t1 {
        return Err(Error::BeyondHorizon { t: t_hi, t1: hz.t1 });
    }
    let times = SeriesGrid::log_times(t_hi * setup.t_span, t_hi, setup.n_times);
    let (lo, hi) = series_window(geom, mu, setup)?;
    let xs: Vec<f64> = SeriesGrid::refined_nodes(lo, hi, setup.nx, &edge_points(geom, mu), setup.edge_levels)
        .into_iter()
        .filter(|x| geom.contains(&[*x]))
        .collect();
    let grid = SeriesGrid::new(times.clone(), xs)?;
    let f1 = derive_f1(f);
    let base = BaseKernel::for_problem(*params, geom)?;
    let problem = SeriesProblem::new(base, mu.clone(), f1.clone())?;
    let opts = SeriesOpts { k_max: setup.k_max, t1: Some(hz.t1), ..SeriesOpts::default() };
    let result = series_sum(&problem, grid, &opts)?;

    let grid_norms: Vec<f64> = times.iter().map(|&t| perturbation_norm(params, geom, mu, &f1, t, kato)).collect::<Result<_>>()?;
    let lambdas: Vec<f64> = grid_norms.iter().map(|n| hz.ledger.lambda(*n)).collect();
    let term_violations = term_bound_violations(&result, &hz.ledger, &grid_norms, setup.check_tol);
    let sum_bound = hz.ledger.sum_bound();
    let c6 = hz.ledger.c6();
    let upper_violations = upper_band_violations(&result, params, geom, c6, setup.check_tol);

    let f_abs = JumpFunctionalSpec { bound: f.bound.abs(), ..f.clone() };
    let verdict = if f.is_zero() {
        Verdict::InClass
    } else {
        let curve = KatoNormCurve::sample(&default_times(8), |t| Ok(kato_norm_jump_with(params, geom, &f_abs, t, kato)?.value))?;
        kato_class_probe(&curve, &ThresholdSchedule::default())
    };
    let n_abs_1 = perturbation_norm(params, geom, mu, &f_abs, 1.0, kato)?;
    let (lower, lower_refusal) = match lower_bound_certificate(&hz.ledger, n_abs_1, f.bound.abs(), verdict) {
        Ok(l) => (Some(l), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let lower_violations = lower.map(|l| l.violations(&result, setup.check_tol)).unwrap_or_default();
    let passed = result.converged
        && term_violations.is_empty()
        && upper_violations.is_empty()
        && lower_violations.is_empty()
        && result.max_abs_ratio_sum() <= sum_bound * (1.0 + setup.check_tol)
        && lambdas.iter().all(|l| *l <= 1.0 / 3.0 * (1.0 + setup.check_tol));
    Ok(SeriesOutcome {
        horizon: hz,
        result,
        grid_norms,
        lambdas,
        term_violations,
        sum_bound,
        c6,
        upper_violations,
        lower,
        lower_refusal,
        lower_violations,
        passed,
    })
}

/// Settings of the series/Monte Carlo comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSetup {
    pub n_paths: usize,
    pub seed: u64,
    /// Bins per start point.
    pub bins: usize,
    /// Half-width of the binned region in units of `t^{1/alpha}`.
    pub half_width: f64,
    /// Grid node indices used as start points; the node nearest the window
    /// center when empty.
    pub starts: Vec<usize>,
    /// Grid time index; the largest time when absent.
    pub time_index: Option<usize>,
    pub k_stderr: f64,
    pub abs_tol: f64,
}

impl Default for CompareSetup {
    fn default() -> Self {
        CompareSetup {
            n_paths: 100_000,
            seed: 7,
            bins: 12,
            half_width: 6.0,
            starts: vec![],
            time_index: None,
            k_stderr: 3.0,
            abs_tol: 1e-4,
        }
    }
}

/// Per-start comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinComparison {
    pub x: f64,
    pub t: f64,
    pub estimate: DensityEstimate,
    pub series: Vec<f64>,
    /// `(bin, estimate, series)` outside the acceptance interval.
    pub disagreements: Vec<(usize, f64, f64)>,
}

/// How Monte Carlo bins are judged against the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    /// Exact base kernel: `|mc - series| <= k stderr + abs_tol`.
    Exact,
    /// Surrogate base kernel: the true kernel is only known up to the
    /// factor `c0`, so the estimate must land in `[series/c0, c0 series]`
    /// widened by `k stderr + abs_tol`.
    Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutcome {
    pub mode: CompareMode,
    pub band_factor: f64,
    /// With `mu = 0` and `F = 0`: whether `q` equals `p0` at every node.
    pub passthrough: Option<bool>,
    pub comparisons: Vec<BinComparison>,
    pub passed: bool,
}

/// Monte Carlo estimates against series bin averages.
pub fn run_compare(
    params: &KernelParams,
    geom: &DomainGeometry,
    mu: &MeasureSpec,
    f: &JumpFunctionalSpec,
    series: &SeriesOutcome,
    setup: &CompareSetup,
) -> Result<CompareOutcome> {
    let res = &series.result;
    let g = &res.grid;
    let ti = setup.time_index.unwrap_or(g.nt() - 1);
    if ti >= g.nt() {
        return Err(Error::Config(format!("time index {ti} outside the grid ({} times)", g.nt())));
    }
    let t = g.times[ti];
    let (lo, hi) = g.window();
    let starts = if setup.starts.is_empty() {
        let mid = 0.5 * (lo + hi);
        let i = (0..g.nx()).min_by(|a, b| (g.xs[*a] - mid).abs().total_cmp(&(g.xs[*b] - mid).abs())).unwrap_or(0);
        vec![i]
    } else {
        setup.starts.clone()
    };
    let base = BaseKernel::for_problem(*params, geom)?;
    let (mode, factor) = match base.provenance {
        Provenance::ClosedForm | Provenance::FourierInversion => (CompareMode::Exact, 1.0),
        _ => (CompareMode::Band, params.c0),
    };
    let passthrough = (mu.is_zero() && f.is_zero()).then(|| res.q.iter().zip(&res.p0).all(|(a, b)| a == b));
    let scale = t.powf(1.0 / params.alpha);
    let mut comparisons = Vec::new();
    for xi in starts {
        if xi >= g.nx() {
            return Err(Error::Config(format!("start index {xi} outside the grid ({} nodes)", g.nx())));
        }
        let x = g.xs[xi];
        let a = (x - setup.half_width * scale).max(lo);
        let b = (x + setup.half_width * scale).min(hi);
        let mut edges: Vec<f64> = (0..=setup.bins).map(|i| a + (b - a) * i as f64 / setup.bins as f64).collect();
        edges[setup.bins] = b;
        let opts = McOpts::new(setup.n_paths, setup.seed);
        let estimate = estimate_density(params, geom, mu, f, t, &[x], &edges, &opts)?;
        let series_vals: Vec<f64> = edges.windows(2).map(|w| res.bin_average(&base, ti, xi, w[0], w[1])).collect::<Result<_>>()?;
        let disagreements = match mode {
            CompareMode::Exact => bins_agree(&estimate, &series_vals, setup.k_stderr, setup.abs_tol),
            CompareMode::Band => (0..series_vals.len())
                .filter_map(|i| {
                    let (e, s) = (estimate.values[i], series_vals[i]);
                    let slack = setup.k_stderr * estimate.stderr[i] + setup.abs_tol;
                    (e < s / factor - slack || e > s * factor + slack).then_some((i, e, s))
                })
                .collect(),
        };
        comparisons.push(BinComparison { x, t, estimate, series: series_vals, disagreements });
    }
    let passed = passthrough != Some(false) && comparisons.iter().all(|c| c.disagreements.is_empty());
    Ok(CompareOutcome { mode, band_factor: factor, passthrough, comparisons, passed })
}
