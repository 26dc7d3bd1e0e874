//! Quadrature toolkit: Gauss-Legendre panels graded toward singular points,
//! adaptive Gauss-Kronrod, sphere rules and polar integration over a domain.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;

const MAX_GL: usize = 64;
static GL_CACHE: [OnceLock<(Vec<f64>, Vec<f64>)>; MAX_GL + 1] = [const { OnceLock::new() }; MAX_GL + 1];

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    assert!((1..=MAX_GL).contains(&n), "Gauss-Legendre order {n} unsupported");
    GL_CACHE[n].get_or_init(|| compute_gl(n))
}

fn compute_gl(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = if n == 1 { 2.0 } else { 2.0 / ((1.0 - z * z) * dp * dp) };
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Fixed-order Gauss-Legendre on `[a, b]`.
#[inline]
pub fn gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let (h, c) = (0.5 * (b - a), 0.5 * (b + a));
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(c + h * xi);
    }
    s * h
}

/// Settings for graded composite Gauss-Legendre integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOpts {
    /// Nodes per panel.
    pub nodes: usize,
    /// Geometric ratio between consecutive graded panels.
    pub ratio: f64,
    /// Smallest panel width relative to the segment length.
    pub rel_floor: f64,
    /// Ungraded panels per segment.
    pub panels: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts { nodes: 8, ratio: 0.2, rel_floor: 1e-14, panels: 1 }
    }
}

impl QuadOpts {
    pub fn coarse() -> Self {
        QuadOpts { nodes: 6, ratio: 0.15, rel_floor: 1e-10, panels: 1 }
    }

    pub fn fine() -> Self {
        QuadOpts { nodes: 12, ratio: 0.25, rel_floor: 1e-15, panels: 2 }
    }
}

/// Panels of `[u, v]` graded geometrically toward the flagged ends.
pub fn graded_panels(u: f64, v: f64, left: bool, right: bool, opts: &QuadOpts) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if !(v > u) {
        return out;
    }
    if left && right {
        let m = 0.5 * (u + v);
        out.extend(graded_panels(u, m, true, false, opts));
        out.extend(graded_panels(m, v, false, true, opts));
        return out;
    }
    let len = v - u;
    if !left && !right {
        let k = opts.panels.max(1);
        for i in 0..k {
            out.push((u + len * i as f64 / k as f64, u + len * (i + 1) as f64 / k as f64));
        }
        return out;
    }
    let floor = (len * opts.rel_floor).max(64.0 * f64::EPSILON * u.abs().max(v.abs()));
    let mut w = len;
    let mut edges = vec![len];
    while w > floor {
        w *= opts.ratio;
        edges.push(w);
    }
    edges.push(0.0);
    for pair in edges.windows(2) {
        let (hi, lo) = (pair[0], pair[1]);
        if left {
            out.push((u + lo, u + hi));
        } else {
            out.push((v - hi, v - lo));
        }
    }
    out
}

/// Integral over `[a, b]`, splitting at `singular` points (graded on both
/// sides) and `kinks` (plain splits). Points outside `(a, b)` are ignored;
/// `a` and `b` are graded when listed in `singular`.
pub fn integrate_split<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    singular: &[f64],
    kinks: &[f64],
    opts: &QuadOpts,
) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut pts: Vec<(f64, bool)> = vec![(a, false), (b, false)];
    for &s in singular {
        if s >= a && s <= b {
            pts.push((s, true));
        }
    }
    for &k in kinks {
        if k > a && k < b {
            pts.push((k, false));
        }
    }
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    // merge duplicates, keeping the singular flag
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(pts.len());
    for (x, s) in pts {
        match merged.last_mut() {
            Some(last) if (x - last.0).abs() <= 1e-15 * (1.0 + x.abs()) => last.1 |= s,
            _ => merged.push((x, s)),
        }
    }
    let mut total = 0.0;
    for w in merged.windows(2) {
        for (p, q) in graded_panels(w[0].0, w[1].0, w[0].1, w[1].1, opts) {
            total += gl(&mut f, p, q, opts.nodes);
        }
    }
    total
}

/// Integral over `[a, inf)` of an integrand decaying at least like a power,
/// through `r = a / v`.
pub fn integrate_tail<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: &QuadOpts) -> f64 {
    assert!(a > 0.0);
    let g = |v: f64| {
        if v <= 0.0 {
            0.0
        } else {
            let r = a / v;
            f(r) * a / (v * v)
        }
    };
    integrate_split(g, 0.0, 1.0, &[0.0], &[], opts)
}

/// Nodes and weights of the rule used by [`integrate_split`].
pub fn split_rule(a: f64, b: f64, singular: &[f64], kinks: &[f64], opts: &QuadOpts) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    integrate_split(
        |x| {
            out.push((x, 0.0));
            0.0
        },
        a,
        b,
        singular,
        kinks,
        opts,
    );
    // recover weights panel by panel: the rule is a concatenation of
    // Gauss-Legendre panels visited in order
    let (_, gw) = gauss_legendre(opts.nodes);
    let mut i = 0;
    let mut pts: Vec<(f64, bool)> = vec![(a, false), (b, false)];
    pts.extend(singular.iter().filter(|s| **s >= a && **s <= b).map(|s| (*s, true)));
    pts.extend(kinks.iter().filter(|k| **k > a && **k < b).map(|k| (*k, false)));
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(pts.len());
    for (x, s) in pts {
        match merged.last_mut() {
            Some(last) if (x - last.0).abs() <= 1e-15 * (1.0 + x.abs()) => last.1 |= s,
            _ => merged.push((x, s)),
        }
    }
    for w in merged.windows(2) {
        for (p, q) in graded_panels(w[0].0, w[1].0, w[0].1, w[1].1, opts) {
            let h = 0.5 * (q - p);
            for wi in gw {
                out[i].1 = wi * h;
                i += 1;
            }
        }
    }
    debug_assert_eq!(i, out.len());
    out
}

/// Nodes and weights of the rule used by [`integrate_tail`].
pub fn tail_rule(a: f64, opts: &QuadOpts) -> Vec<(f64, f64)> {
    split_rule(0.0, 1.0, &[0.0], &[], opts)
        .into_iter()
        .filter(|(v, _)| *v > 0.0)
        .map(|(v, w)| (a / v, w * a / (v * v)))
        .collect()
}

/// Adaptive Gauss-Kronrod (7, 15) with global error control.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64)> {
    let mut heap: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    heap.push((a, b, v, e));
    loop {
        let (tot, err): (f64, f64) = heap.iter().fold((0.0, 0.0), |(s, r), x| (s + x.2, r + x.3));
        if !tot.is_finite() {
            return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= abs_tol.max(rel_tol * tot.abs()) {
            return Ok((tot, err));
        }
        if heap.len() >= max_intervals {
            return Err(Error::Numeric(format!(
                "adaptive quadrature on [{a}, {b}] stalled at error {err:e} (value {tot:e})"
            )));
        }
        let (i, _) = heap
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.total_cmp(&q.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = heap.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Numeric(format!("interval [{lo}, {hi}] cannot be bisected further")));
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        heap.push((lo, mid, v1, e1));
        heap.push((mid, hi, v2, e2));
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Quadrature on the unit sphere `S^{d-1}`; weights sum to its area.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dirs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// `n` controls resolution: ignored for `d = 1`, angles for `d = 2`,
    /// polar nodes for `d = 3` (with `2n` azimuths).
    pub fn new(d: usize, n: usize) -> Result<Self> {
        match d {
            1 => Ok(SphereRule { dirs: vec![vec![1.0], vec![-1.0]], weights: vec![1.0, 1.0] }),
            2 => {
                let dirs = (0..n)
                    .map(|i| {
                        let th = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                        vec![th.cos(), th.sin()]
                    })
                    .collect();
                Ok(SphereRule { dirs, weights: vec![2.0 * PI / n as f64; n] })
            }
            3 => {
                let (x, w) = gauss_legendre(n.min(MAX_GL));
                let m = 2 * n;
                let mut dirs = Vec::with_capacity(x.len() * m);
                let mut weights = Vec::with_capacity(x.len() * m);
                for (ct, wt) in x.iter().zip(w) {
                    let st = (1.0 - ct * ct).sqrt();
                    for j in 0..m {
                        let ph = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                        dirs.push(vec![st * ph.cos(), st * ph.sin(), *ct]);
                        weights.push(wt * 2.0 * PI / m as f64);
                    }
                }
                Ok(SphereRule { dirs, weights })
            }
            _ => Err(Error::Unsupported(format!("sphere rules are provided for d <= 3, got {d}"))),
        }
    }
}

/// `∫_D f(y) dy` in polar coordinates around `center`.
///
/// `radial(dir, r)` must return the integrand at `center + r dir` (the
/// Jacobian `r^{d-1}` is applied here). `singular_r` lists radii where the
/// integrand is singular or kinked along every ray (for example `0`), and
/// `r_max` truncates unbounded domains; beyond it the mapped tail is used
/// when `r_max` is infinite.
pub fn integrate_polar<F: FnMut(&[f64], f64) -> f64>(
    geom: &DomainGeometry,
    center: &[f64],
    rule: &SphereRule,
    singular_r: &[f64],
    r_max: f64,
    opts: &QuadOpts,
    mut radial: F,
) -> f64 {
    let d = center.len();
    let mut total = 0.0;
    let mut p = vec![0.0; d];
    for (u, wu) in rule.dirs.iter().zip(&rule.weights) {
        let segs = geom.ray_segments(center, u, r_max);
        let mut along = 0.0;
        for (r0, r1) in segs {
            let mut g = |r: f64| {
                for i in 0..d {
                    p[i] = center[i] + r * u[i];
                }
                radial(&p, r) * r.powi(d as i32 - 1)
            };
            if r1.is_infinite() {
                let knee = singular_r
                    .iter()
                    .copied()
                    .filter(|s| s.is_finite())
                    .fold(r0.max(1.0), f64::max)
                    .max(2.0 * r0);
                along += integrate_split(&mut g, r0, knee, &[r0], singular_r, opts);
                along += integrate_tail(&mut g, knee, opts);
            } else {
                along += integrate_split(&mut g, r0, r1, &[r0, r1], singular_r, opts);
            }
        }
        total += wu * along;
    }
    total
}
