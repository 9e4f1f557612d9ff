//! Linear stability of the homogeneous steady state.
//!
//! Linearising about `(c1*, c2*, h*)` and projecting on a Neumann eigenmode of
//! `−Δ` with eigenvalue `k` gives a 3×3 Jacobian `J(k, b)` whose characteristic
//! polynomial is the monic cubic `λ³ + A2 λ² + A1 λ + A0`. `A2` and `A1` do not
//! depend on `b`; `A0` is affine in `b` with slope `ψ2 k`. The Routh–Hurwitz gap
//! `T(b, k) = A2 A1 − A0 = ψ1(k) − ψ2 b k` therefore vanishes at
//! `b = ψ(k) = ψ1(k)/(ψ2 k)`, and the critical sensitivity is the smallest `ψ`
//! over the nonzero spectrum.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Domain;
use crate::model::{steady_state, ModelParams, SteadyState};

/// Geometry whose Neumann spectrum is enumerated.
pub type SpectrumSpec = Domain;

const DEDUP_RELATIVE: f64 = 1e-12;
const TIE_RELATIVE: f64 = 1e-10;

/// Coefficients of `λ³ + a2 λ² + a1 λ + a0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharCoeffs {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl CharCoeffs {
    /// Coefficients of `(λ − r1)(λ − r2)(λ − r3)` for real roots.
    pub fn from_real_roots(r1: f64, r2: f64, r3: f64) -> Self {
        Self {
            a2: -(r1 + r2 + r3),
            a1: r1 * r2 + r1 * r3 + r2 * r3,
            a0: -r1 * r2 * r3,
        }
    }

    /// The Routh–Hurwitz gap `A2 A1 − A0`.
    pub fn hurwitz_gap(&self) -> f64 {
        self.a2 * self.a1 - self.a0
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        ((lambda + self.a2) * lambda + self.a1) * lambda + self.a0
    }

    fn eval_derivative(&self, lambda: Complex64) -> Complex64 {
        (3.0 * lambda + 2.0 * self.a2) * lambda + self.a1
    }
}

/// Ascending polynomial in `k`, degree ≤ 3.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct KPoly([f64; 4]);

impl KPoly {
    fn linear(c0: f64, c1: f64) -> Self {
        KPoly([c0, c1, 0.0, 0.0])
    }

    fn eval(&self, k: f64) -> f64 {
        let c = &self.0;
        ((c[3] * k + c[2]) * k + c[1]) * k + c[0]
    }

    fn add(self, o: Self) -> Self {
        let mut r = self.0;
        r.iter_mut().zip(o.0).for_each(|(a, b)| *a += b);
        KPoly(r)
    }

    fn scale(self, s: f64) -> Self {
        KPoly(self.0.map(|a| a * s))
    }

    fn mul(self, o: Self) -> Self {
        let mut r = [0.0; 4];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                if *a != 0.0 && *b != 0.0 {
                    assert!(i + j < 4, "degree overflow in characteristic polynomial");
                    r[i + j] += a * b;
                }
            }
        }
        KPoly(r)
    }
}

/// The linearisation of the model at its steady state, with the Jacobian
/// entries expanded as polynomials in the Laplacian eigenvalue `k`.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub steady: SteadyState,
    a2: KPoly,
    a1: KPoly,
    a0_without_taxis: KPoly,
    /// `ψ2`: slope of `A0` in `b k`.
    pub psi2: f64,
}

impl Linearization {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let s = steady_state(p)?;
        let (c1, c2, h) = (s.c1_star, s.c2_star, s.h_star);

        // J = [[j11, j12, b c1 k], [α, j22, 0], [0, j32, j33]]
        let j11 = KPoly::linear(-p.alpha + p.beta * p.logistic_factor(c1, c2) - p.beta * c1 / p.kc1, -p.a1);
        let j12 = KPoly::linear(p.delta - p.beta * c1 / p.logistic_c2_capacity(), 0.0);
        let j22 = KPoly::linear(-p.delta, -p.a2);
        let j32 = -p.gamma1 * h + p.gamma2 * p.kc2 / ((p.kc2 + c2) * (p.kc2 + c2));
        let j33 = KPoly::linear(-p.gamma1 * c2, 0.0);

        let trace = j11.add(j22).add(j33);
        let minors = j11
            .mul(j22)
            .add(j12.scale(-p.alpha))
            .add(j11.mul(j33))
            .add(j22.mul(j33));
        // det without the taxis entry; the taxis contribution is (b c1 k) α j32
        let det = j11.mul(j22).mul(j33).add(j12.mul(j33).scale(-p.alpha));

        Ok(Self {
            steady: s,
            a2: trace.scale(-1.0),
            a1: minors,
            a0_without_taxis: det.scale(-1.0),
            psi2: -c1 * p.alpha * j32,
        })
    }

    pub fn char_coeffs(&self, k: f64, b: f64) -> CharCoeffs {
        CharCoeffs {
            a2: self.a2.eval(k),
            a1: self.a1.eval(k),
            a0: self.a0_without_taxis.eval(k) + self.psi2 * b * k,
        }
    }

    /// `[B1, B2, B3, B4]` with `ψ1(k) = B1 k³ + B2 k² + B3 k + B4`.
    pub fn psi_coefficients(&self) -> [f64; 4] {
        let t = self.a2.mul(self.a1).add(self.a0_without_taxis.scale(-1.0)).0;
        [t[3], t[2], t[1], t[0]]
    }

    pub fn psi(&self, k: f64) -> Result<f64> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Domain(format!("psi requires a positive eigenvalue, got {k}")));
        }
        let [b1, b2, b3, b4] = self.psi_coefficients();
        let psi1 = ((b1 * k + b2) * k + b3) * k + b4;
        Ok(psi1 / (self.psi2 * k))
    }

    /// Minimiser of `ψ` over `k > 0`: the positive root of
    /// `2 B1 k³ + B2 k² − B4`, located by bisection.
    pub fn continuous_minimizer(&self) -> Result<f64> {
        let [b1, b2, _, b4] = self.psi_coefficients();
        let g = |k: f64| (2.0 * b1 * k + b2) * k * k - b4;
        if !(g(0.0) < 0.0) {
            return Err(Error::Domain("psi has no interior minimum (B4 <= 0)".into()));
        }
        let mut hi = 1.0;
        while g(hi) <= 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Domain("psi has no interior minimum".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Characteristic coefficients at eigenvalue `k` and sensitivity `b`.
pub fn char_coeffs(p: &ModelParams, k: f64, b: f64) -> Result<CharCoeffs> {
    if !(k >= 0.0) {
        return Err(Error::Domain(format!("eigenvalue must be nonnegative, got {k}")));
    }
    Ok(Linearization::new(p)?.char_coeffs(k, b))
}

/// Critical sensitivity of a single mode.
pub fn psi(p: &ModelParams, k: f64) -> Result<f64> {
    Linearization::new(p)?.psi(k)
}

/// True iff every root of the cubic has negative real part.
pub fn routh_hurwitz_stable(c: &CharCoeffs) -> bool {
    c.a2 > 0.0 && c.a1 > 0.0 && c.a0 > 0.0 && c.hurwitz_gap() > 0.0
}

/// The three roots of `λ³ + a2 λ² + a1 λ + a0`, real root(s) first.
/// Non-real roots are returned as an exact conjugate pair.
pub fn cubic_roots(c: &CharCoeffs) -> [Complex64; 3] {
    let real = polish_real(c, largest_real_root(c));
    // deflate by the largest-magnitude real root
    let q1 = c.a2 + real;
    let q0 = if real.abs() > 1.0 && real != 0.0 {
        -c.a0 / real
    } else {
        c.a1 + real * q1
    };
    let disc = q1 * q1 - 4.0 * q0;
    if disc >= 0.0 {
        let s = -0.5 * (q1 + q1.signum() * disc.sqrt());
        let (r1, r2) = if s == 0.0 { (0.0, 0.0) } else { (s, q0 / s) };
        let r1 = polish_real(c, r1);
        let r2 = polish_real(c, r2);
        [real.into(), r1.into(), r2.into()]
    } else {
        let z = polish_complex(c, Complex64::new(-0.5 * q1, 0.5 * (-disc).sqrt()));
        let z = Complex64::new(z.re, z.im.abs());
        [real.into(), z, z.conj()]
    }
}

/// Largest real part among the roots.
pub fn spectral_abscissa(c: &CharCoeffs) -> f64 {
    cubic_roots(c).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn largest_real_root(c: &CharCoeffs) -> f64 {
    let (a, b, d) = (c.a2, c.a1, c.a0);
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
    let half_q = 0.5 * q;
    let disc = half_q * half_q + (p / 3.0).powi(3);
    let t = if p == 0.0 && q == 0.0 {
        0.0
    } else if disc > 0.0 {
        let u = (-half_q - half_q.signum() * disc.sqrt()).cbrt();
        if u == 0.0 {
            0.0
        } else {
            u - p / (3.0 * u)
        }
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|j| m * (theta - 2.0 * PI * f64::from(j) / 3.0).cos())
            .max_by(|x, y| (x - shift).abs().total_cmp(&(y - shift).abs()))
            .unwrap_or(0.0)
    };
    t - shift
}

fn polish_real(c: &CharCoeffs, mut x: f64) -> f64 {
    let f = |x: f64| ((x + c.a2) * x + c.a1) * x + c.a0;
    let df = |x: f64| (3.0 * x + 2.0 * c.a2) * x + c.a1;
    for _ in 0..4 {
        let (fx, dfx) = (f(x), df(x));
        if fx == 0.0 || dfx == 0.0 {
            break;
        }
        let next = x - fx / dfx;
        if !next.is_finite() || f(next).abs() >= fx.abs() {
            break;
        }
        x = next;
    }
    x
}

fn polish_complex(c: &CharCoeffs, mut z: Complex64) -> Complex64 {
    for _ in 0..4 {
        let (fz, dfz) = (c.eval(z), c.eval_derivative(z));
        if fz.norm() == 0.0 || dfz.norm() == 0.0 {
            break;
        }
        let next = z - fz / dfz;
        if !next.is_finite() || c.eval(next).norm() >= fz.norm() {
            break;
        }
        z = next;
    }
    z
}

/// The first `count` distinct eigenvalues of `−Δ` with Neumann conditions,
/// ascending, starting with 0.
pub fn laplacian_eigenvalues(spec: &SpectrumSpec, count: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Domain("eigenvalue count must be positive".into()));
    }
    match *spec {
        Domain::Interval { length } => Ok((0..count).map(|j| (j as f64 * PI / length).powi(2)).collect()),
        Domain::Rectangle { lx, ly } => {
            let mut bound = (PI / lx.max(ly)).powi(2) * count as f64;
            loop {
                let ks = spectrum_up_to(spec, bound);
                if ks.len() >= count {
                    return Ok(ks[..count].to_vec());
                }
                bound *= 2.0;
            }
        }
    }
}

/// Every distinct eigenvalue not exceeding `bound`, ascending.
pub fn spectrum_up_to(spec: &SpectrumSpec, bound: f64) -> Vec<f64> {
    let mut ks = match *spec {
        Domain::Interval { length } => {
            let jmax = (bound.sqrt() * length / PI).floor() as usize;
            (0..=jmax)
                .map(|j| (j as f64 * PI / length).powi(2))
                .filter(|k| *k <= bound)
                .collect()
        }
        Domain::Rectangle { lx, ly } => {
            let mmax = (bound.sqrt() * lx / PI).floor() as usize;
            let nmax = (bound.sqrt() * ly / PI).floor() as usize;
            let mut ks = Vec::with_capacity((mmax + 1) * (nmax + 1));
            for m in 0..=mmax {
                for n in 0..=nmax {
                    let k = (m as f64 * PI / lx).powi(2) + (n as f64 * PI / ly).powi(2);
                    if k <= bound {
                        ks.push(k);
                    }
                }
            }
            ks
        }
    };
    ks.sort_by(f64::total_cmp);
    ks.dedup_by(|a, b| (*a - *b).abs() <= DEDUP_RELATIVE * b.abs().max(*a));
    ks
}

/// One row of the `ψ` table: spectrum index, eigenvalue, `ψ(k_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiEntry {
    pub j: usize,
    pub k: f64,
    pub psi: f64,
}

/// Complex-pair crossing at the critical sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfCrossing {
    /// Real negative root `λ0` at `b_c`.
    pub real_root: f64,
    /// Real part of the critical pair at `b_c`.
    pub pair_real_part: f64,
    pub omega0: f64,
    /// Centred finite-difference estimate of `d Re λ_pair / db` at `b_c`.
    pub transversality_slope: f64,
    /// Closed form `ψ2 k / (2 (ω0² + λ0²))` of the same derivative.
    pub transversality_slope_closed_form: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HopfStatus {
    NotComputed,
    /// The minimum of `ψ` is attained by more than one eigenvalue.
    DegenerateHopf,
    Crossing(HopfCrossing),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub b_c: f64,
    pub j0: usize,
    pub k_j0: f64,
    pub degenerate: bool,
    /// Minimiser of `ψ` over the continuum `k > 0`.
    pub k_continuous: f64,
    /// `[B1, B2, B3, B4]`.
    pub psi_coefficients: [f64; 4],
    /// False if some `B_i` is negative; reported rather than corrected.
    pub psi_coefficients_nonnegative: bool,
    pub psi2: f64,
    /// Every nonzero eigenvalue that was examined.
    pub table: Vec<PsiEntry>,
    pub hopf: HopfStatus,
}

impl StabilityReport {
    pub fn omega0(&self) -> Option<f64> {
        match self.hopf {
            HopfStatus::Crossing(c) => Some(c.omega0),
            _ => None,
        }
    }

    pub fn transversality_slope(&self) -> Option<f64> {
        match self.hopf {
            HopfStatus::Crossing(c) => Some(c.transversality_slope),
            _ => None,
        }
    }
}

/// Critical taxis sensitivity `b_c = min_{k_j > 0} ψ(k_j)`.
///
/// `ψ` is strictly convex, so only eigenvalues up to the continuous minimiser
/// and the two after it need to be examined.
pub fn critical_b(p: &ModelParams, spec: &SpectrumSpec) -> Result<StabilityReport> {
    spec.validate()?;
    let lin = Linearization::new(p)?;
    let k_star = lin.continuous_minimizer()?;

    let first_nonzero = laplacian_eigenvalues(spec, 2)?[1];
    let mut bound = 2.0 * k_star.max(first_nonzero);
    let ks = loop {
        let ks = spectrum_up_to(spec, bound);
        if ks.iter().filter(|k| **k > k_star).count() >= 2 {
            break ks;
        }
        bound *= 2.0;
    };
    let past = ks.iter().position(|k| *k > k_star).unwrap_or(ks.len() - 1);
    let last = (past + 1).min(ks.len() - 1);

    let mut table = Vec::with_capacity(last);
    for (j, &k) in ks.iter().enumerate().take(last + 1).skip(1) {
        table.push(PsiEntry { j, k, psi: lin.psi(k)? });
    }
    let best = table
        .iter()
        .copied()
        .min_by(|a, b| a.psi.total_cmp(&b.psi))
        .ok_or_else(|| Error::Domain("empty nonzero spectrum".into()))?;
    let degenerate = table
        .iter()
        .filter(|e| e.j != best.j)
        .any(|e| (e.psi - best.psi).abs() <= TIE_RELATIVE * best.psi.abs());

    let coeffs = lin.psi_coefficients();
    Ok(StabilityReport {
        b_c: best.psi,
        j0: best.j,
        k_j0: best.k,
        degenerate,
        k_continuous: k_star,
        psi_coefficients: coeffs,
        psi_coefficients_nonnegative: coeffs.iter().all(|b| *b >= 0.0),
        psi2: lin.psi2,
        table,
        hopf: HopfStatus::NotComputed,
    })
}

/// Splits roots into (real root, upper member of the complex pair).
fn split_pair(roots: &[Complex64; 3]) -> Option<(f64, Complex64)> {
    let mut idx = [0, 1, 2];
    idx.sort_by(|a, b| roots[*a].im.abs().total_cmp(&roots[*b].im.abs()));
    let pair = roots[idx[2]];
    if pair.im == 0.0 {
        return None;
    }
    Some((roots[idx[0]].re, Complex64::new(pair.re, pair.im.abs())))
}

/// `critical_b` plus the purely-imaginary-pair check and transversality at `b_c`.
pub fn hopf_diagnostics(p: &ModelParams, spec: &SpectrumSpec) -> Result<StabilityReport> {
    let mut report = critical_b(p, spec)?;
    if report.degenerate {
        report.hopf = HopfStatus::DegenerateHopf;
        return Ok(report);
    }
    let lin = Linearization::new(p)?;
    let (k, b_c) = (report.k_j0, report.b_c);
    let roots = cubic_roots(&lin.char_coeffs(k, b_c));
    let (real_root, pair) = split_pair(&roots)
        .ok_or_else(|| Error::Domain("no complex pair at the critical sensitivity".into()))?;

    let pair_re = |b: f64| {
        split_pair(&cubic_roots(&lin.char_coeffs(k, b)))
            .map(|(_, z)| z.re)
            .unwrap_or(f64::NAN)
    };
    let eps = 1e-5 * b_c;
    let slope = (pair_re(b_c + eps) - pair_re(b_c - eps)) / (2.0 * eps);
    let omega0 = pair.im;
    let closed = lin.psi2 * k / (2.0 * (omega0 * omega0 + real_root * real_root));

    report.hopf = HopfStatus::Crossing(HopfCrossing {
        real_root,
        pair_real_part: pair.re,
        omega0,
        transversality_slope: slope,
        transversality_slope_closed_form: closed,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// The displayed closed-form coefficients for `Kc1 = Kc2 = K`, evaluated
    /// term by term independently of the Jacobian expansion.
    fn closed_form(p: &ModelParams, k: f64, b: f64) -> CharCoeffs {
        let (a1, a2, al, de, be, g1, g2, kc) = (p.a1, p.a2, p.alpha, p.delta, p.beta, p.gamma1, p.gamma2, p.kc1);
        let c = kc * de / (de + al);
        let a2c = be * c / kc + g1 * al / de * c + al + de + (a1 + a2) * k;
        let a1c = a1 * a2 * k * k
            + (a1 * de + a2 * al + a2 * be * c / kc + al * g1 * (a1 + a2) / de * c) * k
            + be * de * c / kc
            + al * be * c / kc
            + al * g1 * c
            + al * al * g1 / de * c
            + al * be * g1 / de * c * c / kc;
        let denom = kc + al / de * c;
        let a0c = a1 * a2 * al * g1 / de * c * k * k
            + (al * al * b * g2 / de * c * c / (denom * denom)
                + a1 * al * g1 * c
                + a2 * al * be * g1 / de * c * c / kc
                + a2 * g1 * al * al / de * c)
                * k
            + al * al * be * g1 / de * c * c / kc
            + al * be * g1 * c * c / kc;
        CharCoeffs {
            a2: a2c,
            a1: a1c,
            a0: a0c,
        }
    }

    fn assert_coeffs_close(a: CharCoeffs, b: CharCoeffs, tol: f64) {
        assert_relative_eq!(a.a2, b.a2, max_relative = tol);
        assert_relative_eq!(a.a1, b.a1, max_relative = tol);
        assert_relative_eq!(a.a0, b.a0, max_relative = tol);
    }

    #[test]
    fn jacobian_expansion_matches_closed_form() {
        let p = ModelParams::default();
        for k in [0.0, 0.5, PI * PI, 40.0, 300.0] {
            for b in [0.0, 1.8, 3.7] {
                assert_coeffs_close(char_coeffs(&p, k, b).unwrap(), closed_form(&p, k, b), 1e-12);
            }
        }
        let q = ModelParams {
            kc1: 2.3,
            kc2: 2.3,
            alpha: 0.4,
            beta: 0.3,
            ..ModelParams::default()
        };
        assert_coeffs_close(char_coeffs(&q, 3.0, 2.0).unwrap(), closed_form(&q, 3.0, 2.0), 1e-12);
    }

    #[test]
    fn homogeneous_coefficients_reference_values() {
        // c1* = 0.8: trace part 0.04 + 0.02 + 0.15 + 0.6 = 0.81
        let c = char_coeffs(&ModelParams::default(), 0.0, 5.0).unwrap();
        assert_relative_eq!(c.a2, 0.81, max_relative = 1e-14);
        // βδc/K + αβc/K + αγ1c + αβγ1c²/(δK) + γ1α²c/δ
        let a1 = 0.05 * 0.6 * 0.8 + 0.15 * 0.05 * 0.8 + 0.15 * 0.1 * 0.8 + 0.15 * 0.05 * 0.1 * 0.64 / 0.6
            + 0.1 * 0.0225 * 0.8 / 0.6;
        assert_relative_eq!(c.a1, a1, max_relative = 1e-14);
        assert_relative_eq!(c.a1, 0.0458, max_relative = 1e-12);
        let a0 = 0.0225 * 0.05 * 0.1 * 0.64 / 0.6 + 0.15 * 0.05 * 0.1 * 0.64;
        assert_relative_eq!(c.a0, a0, max_relative = 1e-14);
        assert_relative_eq!(c.a0, 0.0006, max_relative = 1e-12);
        assert!(routh_hurwitz_stable(&c));
    }

    #[test]
    fn diffusion_alone_never_destabilises() {
        let p = ModelParams::default();
        for k in [0.0, 1e-3, 1.0, 10.0, 1e3, 1e6] {
            let c = char_coeffs(&p, k, 0.0).unwrap();
            assert!(c.hurwitz_gap() > 0.0);
            assert!(routh_hurwitz_stable(&c));
        }
    }

    #[test]
    fn a0_is_affine_in_b() {
        let lin = Linearization::new(&ModelParams::default()).unwrap();
        let k = 7.0;
        let c0 = lin.char_coeffs(k, 0.0);
        let c1 = lin.char_coeffs(k, 1.0);
        let c2 = lin.char_coeffs(k, 2.0);
        assert_eq!(c0.a2, c2.a2);
        assert_eq!(c0.a1, c2.a1);
        assert_relative_eq!(c1.a0 - c0.a0, lin.psi2 * k, max_relative = 1e-12);
        assert_relative_eq!(c2.a0 - c1.a0, c1.a0 - c0.a0, max_relative = 1e-12);
    }

    #[test]
    fn routh_hurwitz_textbook_cases() {
        assert!(routh_hurwitz_stable(&CharCoeffs::from_real_roots(-1.0, -1.0, -1.0)));
        assert!(!routh_hurwitz_stable(&CharCoeffs::from_real_roots(1.0, -1.0, -2.0)));
        let c = CharCoeffs::from_real_roots(1.0, -1.0, -2.0);
        assert_eq!((c.a2, c.a1, c.a0), (2.0, -1.0, -2.0));
    }

    #[test]
    fn cubic_triple_zero() {
        let r = cubic_roots(&CharCoeffs {
            a2: 0.0,
            a1: 0.0,
            a0: 0.0,
        });
        assert!(r.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn cubic_factored() {
        let mut r: Vec<f64> = cubic_roots(&CharCoeffs {
            a2: -6.0,
            a1: 11.0,
            a0: -6.0,
        })
        .iter()
        .map(|z| {
            assert!(z.im.abs() < 1e-12);
            z.re
        })
        .collect();
        r.sort_by(f64::total_cmp);
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn cubic_complex_pair_is_conjugate() {
        // (λ + 2)(λ² + 2λ + 5): roots −2, −1 ± 2i
        let c = CharCoeffs {
            a2: 4.0,
            a1: 9.0,
            a0: 10.0,
        };
        let r = cubic_roots(&c);
        assert_relative_eq!(r[0].re, -2.0, max_relative = 1e-12);
        assert_eq!(r[1], r[2].conj());
        assert_relative_eq!(r[1].re, -1.0, max_relative = 1e-12);
        assert_relative_eq!(r[1].im, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn eigenvalue_lists() {
        let ks = laplacian_eigenvalues(&Domain::Interval { length: 1.0 }, 3).unwrap();
        assert_eq!(ks, vec![0.0, PI * PI, 4.0 * PI * PI]);
        let long = laplacian_eigenvalues(&Domain::Interval { length: 2.0 }, 6).unwrap();
        let unit = laplacian_eigenvalues(&Domain::Interval { length: 1.0 }, 6).unwrap();
        for (a, b) in long.iter().zip(&unit) {
            assert_relative_eq!(*a, b / 4.0, max_relative = 1e-14);
        }
        let sq = laplacian_eigenvalues(&Domain::Rectangle { lx: 10.0, ly: 10.0 }, 4).unwrap();
        assert_eq!(sq[0], 0.0);
        assert_relative_eq!(sq[1], 0.098_696_044_010_893_58, max_relative = 1e-14);
        // (1,1) then (2,0)
        assert_relative_eq!(sq[2], 2.0 * sq[1], max_relative = 1e-14);
        assert_relative_eq!(sq[3], 4.0 * sq[1], max_relative = 1e-14);
        assert!(laplacian_eigenvalues(&Domain::Interval { length: 1.0 }, 0).is_err());
    }

    #[test]
    fn rectangle_spectrum_deduplicates_coincidences() {
        // 5² + 0² = 3² + 4² on the unit square
        let ks = spectrum_up_to(&Domain::Rectangle { lx: 1.0, ly: 1.0 }, 25.0 * PI * PI * 1.000001);
        let hits = ks.iter().filter(|k| (**k / (PI * PI) - 25.0).abs() < 1e-9).count();
        assert_eq!(hits, 1);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn psi_defining_identity() {
        let lin = Linearization::new(&ModelParams::default()).unwrap();
        for k in [0.1, 1.0, PI * PI, 50.0, 1e3] {
            let b = lin.psi(k).unwrap();
            let c = lin.char_coeffs(k, b);
            assert!(c.hurwitz_gap().abs() <= 1e-10 * (c.a2 * c.a1).abs(), "k = {k}");
        }
        assert!(lin.psi(0.0).is_err());
        assert!(lin.psi(-1.0).is_err());
    }

    #[test]
    fn psi_blows_up_at_both_ends_and_is_convex() {
        let lin = Linearization::new(&ModelParams::default()).unwrap();
        let k_star = lin.continuous_minimizer().unwrap();
        let inner = lin.psi(k_star).unwrap();
        assert!(lin.psi(1e-6).unwrap() > inner);
        assert!(lin.psi(1e6).unwrap() > inner);
        let grid: Vec<f64> = (0..200).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 199.0)).collect();
        let vals: Vec<f64> = grid.iter().map(|k| lin.psi(*k).unwrap()).collect();
        for i in 1..grid.len() - 1 {
            // second divided difference on a nonuniform grid
            let (h0, h1) = (grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
            let d2 = 2.0 * (vals[i + 1] * h0 - vals[i] * (h0 + h1) + vals[i - 1] * h1) / (h0 * h1 * (h0 + h1));
            assert!(d2 > 0.0, "not convex near k = {}", grid[i]);
        }
    }

    #[test]
    fn reference_psi_coefficients_are_nonnegative() {
        let lin = Linearization::new(&ModelParams::default()).unwrap();
        assert!(lin.psi_coefficients().iter().all(|b| *b > 0.0));
        assert!(lin.psi2 > 0.0);
    }

    #[test]
    fn reference_critical_sensitivity() {
        let p = ModelParams::default();
        let r = critical_b(&p, &Domain::Interval { length: 1.0 }).unwrap();
        assert_eq!(r.j0, 1);
        assert_relative_eq!(r.k_j0, PI * PI, max_relative = 1e-15);
        assert!((r.b_c - 3.34).abs() < 0.05, "b_c = {}", r.b_c);
        assert!(!r.degenerate);
        // the table reaches past the continuous minimiser
        assert!(r.table.last().unwrap().k > r.k_continuous);
    }

    #[test]
    fn threshold_brackets_stability() {
        let p = ModelParams::default();
        for spec in [
            Domain::Interval { length: 1.0 },
            Domain::Interval { length: 3.3 },
            Domain::Rectangle { lx: 2.0, ly: 1.5 },
        ] {
            let r = critical_b(&p, &spec).unwrap();
            let lin = Linearization::new(&p).unwrap();
            for k in laplacian_eigenvalues(&spec, 60).unwrap() {
                assert!(routh_hurwitz_stable(&lin.char_coeffs(k, 0.99 * r.b_c)), "{spec:?} k = {k}");
            }
            assert!(!routh_hurwitz_stable(&lin.char_coeffs(r.k_j0, 1.01 * r.b_c)));
        }
    }

    #[test]
    fn tied_minimum_is_flagged_degenerate() {
        // choose L so that ψ(k1) = ψ(k2) = ψ(4 k1) for the first two interval modes
        let p = ModelParams::default();
        let lin = Linearization::new(&p).unwrap();
        let f = |k: f64| lin.psi(k).unwrap() - lin.psi(4.0 * k).unwrap();
        let (mut lo, mut hi) = (0.1, lin.continuous_minimizer().unwrap());
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k1 = 0.5 * (lo + hi);
        let length = PI / k1.sqrt();
        let r = hopf_diagnostics(&p, &Domain::Interval { length }).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.hopf, HopfStatus::DegenerateHopf);
    }

    #[test]
    fn reference_hopf_crossing() {
        let p = ModelParams::default();
        let r = hopf_diagnostics(&p, &Domain::Interval { length: 1.0 }).unwrap();
        let HopfStatus::Crossing(h) = r.hopf else {
            panic!("expected a crossing, got {:?}", r.hopf)
        };
        assert!(h.real_root < 0.0);
        assert!(h.pair_real_part.abs() <= 1e-8 * h.omega0);
        let a1 = char_coeffs(&p, r.k_j0, r.b_c).unwrap().a1;
        assert_relative_eq!(h.omega0 * h.omega0, a1, max_relative = 1e-8);
        assert!(h.transversality_slope > 0.0);
        assert_relative_eq!(h.transversality_slope, h.transversality_slope_closed_form, max_relative = 1e-5);
    }
}
