//! Exact time integrals of products of clipped boundary factors and `q`.
//!
//! Each factor is a monomial in `s` on either side of a single breakpoint, so
//! the product is piecewise monomial and integrates in closed form.

/// One factor of the integrand, as a function of `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// `(1 ∧ delta / s^{1/alpha})^gamma`.
    Clip { delta: f64, gamma: f64 },
    /// `q(s, r)` in dimension `d`.
    Q { r: f64 },
    /// `exp(ln_c) * s^p`.
    Mono { ln_c: f64, p: f64 },
}

const MAX_PIECES: usize = 8;

/// Integral over `[a, b]` of the product of `pieces`.
///
/// Returns `+inf` when the integrand is not integrable at `s = 0`.
pub fn integrate(d: usize, alpha: f64, pieces: &[Piece], a: f64, b: f64) -> f64 {
    assert!(pieces.len() <= MAX_PIECES, "too many factors");
    if !(b > a) {
        return 0.0;
    }
    let mut cuts = [0.0f64; MAX_PIECES + 2];
    let mut n = 0;
    cuts[n] = a;
    n += 1;
    for p in pieces {
        let c = match *p {
            Piece::Clip { delta, gamma } if gamma != 0.0 && delta.is_finite() => delta.powf(alpha),
            Piece::Q { r } if r > 0.0 => r.powf(alpha),
            _ => continue,
        };
        if c > a && c < b {
            cuts[n] = c;
            n += 1;
        }
    }
    cuts[n] = b;
    n += 1;
    cuts[..n].sort_by(f64::total_cmp);

    let da = d as f64 + alpha;
    let mut total = 0.0;
    for w in cuts[..n].windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        // branch selection at the midpoint of the panel
        let mid = if u > 0.0 { (u * v).sqrt() } else { 0.5 * v };
        let (mut ln_c, mut pw) = (0.0f64, 0.0f64);
        for p in pieces {
            match *p {
                Piece::Clip { delta, gamma } => {
                    if gamma != 0.0 && delta.is_finite() && mid > delta.powf(alpha) {
                        ln_c += gamma * delta.ln();
                        pw -= gamma / alpha;
                    }
                }
                Piece::Q { r } => {
                    if r > 0.0 && mid < r.powf(alpha) {
                        ln_c -= da * r.ln();
                        pw += 1.0;
                    } else {
                        pw -= d as f64 / alpha;
                    }
                }
                Piece::Mono { ln_c: c, p } => {
                    ln_c += c;
                    pw += p;
                }
            }
        }
        total += mono_integral(ln_c, pw, u, v);
    }
    total
}

/// `∫_u^v exp(ln_c) s^p ds`, stable near `p = -1`.
pub fn mono_integral(ln_c: f64, p: f64, u: f64, v: f64) -> f64 {
    let e = p + 1.0;
    if u == 0.0 {
        if e <= 0.0 {
            return f64::INFINITY;
        }
        return (ln_c + e * v.ln()).exp() / e;
    }
    let l = (u / v).ln();
    let factor = if e.abs() < 1e-14 { -l } else { -(e * l).exp_m1() / e };
    (ln_c + e * v.ln()).exp() * factor
}

/// `∫_a^b Π_i (1 ∧ δ_i / s^{1/α})^γ q(s, r) ds`.
pub fn int_clip_q(d: usize, alpha: f64, gamma: f64, deltas: &[f64], r: f64, a: f64, b: f64) -> f64 {
    let mut pieces = [Piece::Q { r }; MAX_PIECES];
    let mut n = 1;
    for &delta in deltas {
        pieces[n] = Piece::Clip { delta, gamma };
        n += 1;
    }
    integrate(d, alpha, &pieces[..n], a, b)
}

/// `∫_a^b Π_i (1 ∧ δ_i / s^{1/α})^γ ds`.
pub fn int_clip(alpha: f64, gamma: f64, deltas: &[f64], a: f64, b: f64) -> f64 {
    let mut pieces = [Piece::Mono { ln_c: 0.0, p: 0.0 }; MAX_PIECES];
    let mut n = 1;
    for &delta in deltas {
        pieces[n] = Piece::Clip { delta, gamma };
        n += 1;
    }
    integrate(1, alpha, &pieces[..n], a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{clip_pow, q_radial};

    fn brute(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        // midpoint rule on a log grid plus a uniform grid
        let n = 200_000;
        let mut s = 0.0;
        let la = a.max(1e-14).ln();
        let lb = b.ln();
        for i in 0..n {
            let x0 = (la + (lb - la) * i as f64 / n as f64).exp();
            let x1 = (la + (lb - la) * (i + 1) as f64 / n as f64).exp();
            s += f(0.5 * (x0 + x1)) * (x1 - x0);
        }
        s
    }

    #[test]
    fn matches_brute_force() {
        for &(d, alpha, gamma, delta, r) in &[
            (1usize, 1.0, 0.5, 0.1, 0.3),
            (2, 1.5, 0.75, 0.02, 0.5),
            (1, 0.5, 0.25, 0.5, 0.01),
            (3, 1.2, 0.0, 1.0, 0.2),
        ] {
            let t = 0.8;
            let exact = int_clip_q(d, alpha, gamma, &[delta], r, 0.0, t);
            let num = brute(|s| clip_pow(delta, s, alpha, gamma) * q_radial(d, alpha, s, r), 1e-14, t);
            assert!((exact / num - 1.0).abs() < 1e-5, "{d} {alpha} {gamma}: {exact} vs {num}");
        }
    }

    #[test]
    fn log_case() {
        // s^{-1} on [1, e] integrates to 1
        let v = integrate(1, 1.0, &[Piece::Mono { ln_c: 0.0, p: -1.0 }], 1.0, std::f64::consts::E);
        assert!((v - 1.0).abs() < 1e-14);
        let near = integrate(1, 1.0, &[Piece::Mono { ln_c: 0.0, p: -1.0 + 1e-12 }], 1.0, std::f64::consts::E);
        assert!((near - 1.0).abs() < 1e-10);
    }

    #[test]
    fn divergent_at_zero() {
        // d = 1, alpha = 0.5: q(s,0) = s^{-2} is not integrable
        assert!(int_clip_q(1, 0.5, 0.0, &[], 0.0, 0.0, 1.0).is_infinite());
    }

    #[test]
    fn clip_only_matches_closed_form() {
        // ∫_0^{t/2} (1 ∧ δ/s^{1/α})^γ ds for δ ≥ (t/2)^{1/α} is t/2
        assert!((int_clip(1.0, 0.5, &[10.0], 0.0, 0.5) - 0.5).abs() < 1e-15);
        let (alpha, gamma, delta, t) = (1.5, 0.5, 0.1f64, 1.0f64);
        let exact = int_clip(alpha, gamma, &[delta], 0.0, t);
        let c = delta.powf(alpha);
        let e = 1.0 - gamma / alpha;
        let closed = c + delta.powf(gamma) * (t.powf(e) - c.powf(e)) / e;
        assert!((exact - closed).abs() < 1e-14);
    }
}
