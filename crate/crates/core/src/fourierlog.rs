//! Certified Fourier-series approximation of `ln p` on `[p_min, 1]`.
//!
//! The pipeline is: truncated Taylor series of `ln p` in `x = 1 − p`, then a
//! conversion of that polynomial into a Fourier series in `e^{iπmx/2}`, then a
//! rewrite into real `cos(t_m p)`, `sin(t_m p)` terms. Every returned series
//! carries a grid certificate; the certificate, not the construction, is the
//! accuracy contract.
//!
//! The polynomial-to-Fourier step substitutes `x = (2/π)·arcsin(y)` with
//! `y = sin(πx/2)`. Powers of `x` become power series in `y` with non-negative
//! coefficients summing to one, so the composed series keeps `‖c‖₁ ≤ ‖a‖₁`.
//! That series is truncated at a degree where `|y| ≤ cos(πδ/2)` makes the tail
//! negligible, and each `y^j = sin^j(πx/2)` is expanded binomially, keeping
//! only frequencies `|m| ≤ M`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of uniformly spaced points (endpoints included) used to certify a log series.
pub const CERTIFICATE_GRID: usize = 10_001;

/// `Σ_{k=1}^{K} a_k (1 − p)^k` with `a_k = −1/k`, so the series itself approximates `ln p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorSeries {
    pub order: usize,
    /// `a_1..a_K`.
    pub coeffs: Vec<f64>,
}

impl TaylorSeries {
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a.abs()).sum()
    }

    pub fn evaluate(&self, p: f64) -> f64 {
        let x = 1.0 - p;
        self.coeffs.iter().rev().fold(0.0, |acc, a| (acc + a) * x)
    }

    /// Coefficients of `x^0..x^K` in `x = 1 − p`.
    pub fn polynomial(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.coeffs.iter().copied()).collect()
    }
}

/// `(1 − p_min)^K / (K + 1)`, the truncation remainder bound at order `K`.
pub fn taylor_remainder_bound(p_min: f64, order: usize) -> f64 {
    (1.0 - p_min).powi(order as i32) / (order as f64 + 1.0)
}

/// Smallest `K ≥ 1` with `(1 − p_min)^K / (K + 1) ≤ eps / 4`.
pub fn choose_taylor_truncation(p_min: f64, eps: f64) -> Result<usize> {
    if !(p_min > 0.0 && p_min <= 1.0) {
        return Err(Error::validation(format!("p_min must lie in (0, 1], got {p_min}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::validation(format!("eps must be positive, got {eps}")));
    }
    let target = eps / 4.0;
    let q = 1.0 - p_min;
    let mut power = q;
    let mut k = 1usize;
    while power / (k as f64 + 1.0) > target {
        k += 1;
        power *= q;
        if k > 10_000_000 {
            return Err(Error::Resource(format!(
                "Taylor order for p_min={p_min}, eps={eps} exceeds 10^7"
            )));
        }
    }
    Ok(k)
}

/// Smallest `K ≥ 1` whose true tail `Σ_{k>K} (1−p_min)^k/k ≤ (1−p_min)^{K+1}/((K+1)·p_min)`
/// is at most `eps / 4`. This is the order used by [`build_log_series`].
///
/// [`choose_taylor_truncation`] drops the `1/p_min` factor and so undershoots the
/// `ε/4` budget near `p = p_min` whenever `p_min < 1 − 1/e`.
pub fn choose_taylor_truncation_certified(p_min: f64, eps: f64) -> Result<usize> {
    let mut k = choose_taylor_truncation(p_min, eps)?;
    let target = eps / 4.0;
    let q = 1.0 - p_min;
    let mut power = q.powi(k as i32 + 1);
    while power / ((k as f64 + 1.0) * p_min) > target {
        k += 1;
        power *= q;
        if k > 10_000_000 {
            return Err(Error::Resource(format!(
                "Taylor order for p_min={p_min}, eps={eps} exceeds 10^7"
            )));
        }
    }
    Ok(k)
}

pub fn taylor_log(order: usize) -> Result<TaylorSeries> {
    if order == 0 {
        return Err(Error::validation("Taylor order must be at least 1"));
    }
    Ok(TaylorSeries {
        order,
        coeffs: (1..=order).map(|k| -1.0 / k as f64).collect(),
    })
}

/// Fourier degree `M = 2⌈ln(4‖a‖₁/ε)/δ⌉` for a polynomial of 1-norm `a_norm`.
pub fn fourier_degree(a_norm: f64, delta: f64, eps: f64) -> usize {
    let v = (4.0 * a_norm / eps).ln() / delta;
    2 * v.max(0.0).ceil() as usize
}

/// Truncation bounds recorded while converting a polynomial to a Fourier series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionBounds {
    /// Degree at which the power series in `y = sin(πx/2)` was cut.
    pub y_degree: usize,
    /// Bound on the error from dropping `y`-powers above `y_degree`.
    pub degree_tail: f64,
    /// Exact 1-norm of the dropped frequencies `|m| > M`.
    pub frequency_tail: f64,
}

impl ConversionBounds {
    pub fn total(&self) -> f64 {
        self.degree_tail + self.frequency_tail
    }
}

/// `Σ_{m=−M}^{M} c_m e^{iπmx/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexFourierSeries {
    pub max_freq: usize,
    /// `c_{−M}..c_{M}`.
    pub coeffs: Vec<Complex64>,
    pub bounds: ConversionBounds,
}

impl ComplexFourierSeries {
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::validation("need an odd number of coefficients c_{-M}..c_M"));
        }
        Ok(Self {
            max_freq: coeffs.len() / 2,
            coeffs,
            bounds: ConversionBounds {
                y_degree: 0,
                degree_tail: 0.0,
                frequency_tail: 0.0,
            },
        })
    }

    pub fn coeff(&self, m: i64) -> Complex64 {
        let idx = m + self.max_freq as i64;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn evaluate(&self, x: f64) -> Complex64 {
        let m0 = self.max_freq as f64;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * Complex64::from_polar(1.0, FRAC_PI_2 * (i as f64 - m0) * x))
            .sum()
    }
}

pub fn taylor_to_fourier(ts: &TaylorSeries, delta: f64, eps: f64) -> Result<ComplexFourierSeries> {
    polynomial_to_fourier(&ts.polynomial(), delta, eps)
}

/// Fourier series approximating `Σ_k poly[k]·x^k` on `[−1+δ, 1−δ]` to within `3ε/4`.
///
/// `poly` holds coefficients from degree 0 upward. `M` follows
/// [`fourier_degree`] and `‖c‖₁ ≤ ‖poly‖₁`.
pub fn polynomial_to_fourier(poly: &[f64], delta: f64, eps: f64) -> Result<ComplexFourierSeries> {
    if poly.is_empty() || poly.iter().any(|a| !a.is_finite()) {
        return Err(Error::validation("polynomial must have finite coefficients"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::validation(format!("delta must lie in (0, 1], got {delta}")));
    }
    let a_norm: f64 = poly.iter().map(|a| a.abs()).sum();
    if !(eps > 0.0 && eps <= 4.0 * a_norm) {
        return Err(Error::validation(format!(
            "eps must lie in (0, 4‖a‖₁] = (0, {}], got {eps}",
            4.0 * a_norm
        )));
    }
    let max_freq = fourier_degree(a_norm, delta, eps);

    // Half the 3ε/4 conversion budget goes to the y-degree cut; the frequency cut
    // is far below that at M, and is measured exactly below.
    let y_max = (FRAC_PI_2 * delta).cos();
    let poly_degree = poly.len() - 1;
    let y_degree = if y_max <= 1e-300 {
        poly_degree
    } else {
        let need = (8.0 * a_norm / (3.0 * eps)).ln() / -y_max.ln();
        (need.ceil().max(1.0) as usize).max(poly_degree)
    };
    if y_degree > 5_000_000 {
        return Err(Error::Resource(format!(
            "y-degree {y_degree} too large for delta={delta}, eps={eps}"
        )));
    }

    let d = compose_with_arcsin(poly, y_degree);
    let retained: f64 = d.iter().map(|v| v.abs()).sum();
    let degree_tail = (a_norm - retained).max(0.0) * y_max.max(0.0).powi(y_degree as i32 + 1);

    let ln_fact = log_factorials(y_degree);
    let ln2 = std::f64::consts::LN_2;
    let width = 2 * max_freq + 1;
    let mut re = vec![0.0f64; width];
    let mut im = vec![0.0f64; width];
    let mut frequency_tail = 0.0;

    for (j, &dj) in d.iter().enumerate() {
        if dj == 0.0 {
            continue;
        }
        // sin^j(u) = (2i)^{-j} Σ_l C(j,l) (−1)^l e^{iu(j−2l)}
        let (scale, into_real) = match j % 4 {
            0 => (dj, true),
            1 => (-dj, false),
            2 => (-dj, true),
            _ => (dj, false),
        };
        let jm = j as i64;
        let lo = ((jm - max_freq as i64 + 1).div_euclid(2)).max(0);
        let hi = ((jm + max_freq as i64).div_euclid(2)).min(jm);
        let mut kept = 0.0;
        for l in lo..=hi {
            let lu = l as usize;
            let w = (ln_fact[j] - ln_fact[lu] - ln_fact[j - lu] - j as f64 * ln2).exp();
            kept += w;
            let term = if l % 2 == 0 { scale * w } else { -scale * w };
            let idx = (jm - 2 * l + max_freq as i64) as usize;
            if into_real {
                re[idx] += term;
            } else {
                im[idx] += term;
            }
        }
        frequency_tail += dj.abs() * (1.0 - kept).max(0.0);
    }

    let coeffs = re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect();
    Ok(ComplexFourierSeries {
        max_freq,
        coeffs,
        bounds: ConversionBounds {
            y_degree,
            degree_tail,
            frequency_tail,
        },
    })
}

/// Taylor coefficients `d_0..d_L` of `y ↦ Σ_k poly[k]·((2/π)·arcsin y)^k`.
///
/// Evaluated by a discrete Cauchy integral on a circle of radius `R < 1`, where the
/// composed function is bounded by `‖poly‖₁`; aliasing is suppressed by oversampling.
pub(crate) fn compose_with_arcsin(poly: &[f64], degree: usize) -> Vec<f64> {
    let len = degree + 1;
    let n = (8 * len).next_power_of_two();
    let radius = (-4.0 / len as f64).exp();
    let mut samples: Vec<Complex64> = (0..n)
        .map(|k| {
            let y = Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64);
            let x = y.asin() * (2.0 / PI);
            poly.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a)
        })
        .collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(n)
        .process(&mut samples);
    let mut inv_rj = 1.0 / n as f64;
    let inv_r = 1.0 / radius;
    (0..len)
        .map(|j| {
            let v = samples[j].re * inv_rj;
            inv_rj *= inv_r;
            v
        })
        .collect()
}

/// `ln(k!)` for `k = 0..=n`, compensated summation.
fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for k in 1..=n {
        let y = (k as f64).ln() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        out.push(sum);
    }
    out
}

/// `constant + Σ_{m=1}^{M} b1_m cos(t_m p) + b2_m sin(t_m p)` with `t_m = πm/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealFourierSeries {
    #[serde(rename = "M")]
    pub max_freq: usize,
    pub constant: f64,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub t: Vec<f64>,
}

impl RealFourierSeries {
    /// `‖b1‖₁ + ‖b2‖₁`; the constant term needs no circuit and is excluded.
    pub fn l1_norm(&self) -> f64 {
        self.b1.iter().chain(&self.b2).map(|b| b.abs()).sum()
    }

    pub fn evaluate(&self, p: f64) -> f64 {
        let mut acc = self.constant;
        for ((b1, b2), t) in self.b1.iter().zip(&self.b2).zip(&self.t) {
            let (s, c) = (t * p).sin_cos();
            acc += b1 * c + b2 * s;
        }
        acc
    }

    /// Drops the highest `drop` frequencies.
    pub fn truncated(&self, drop: usize) -> Self {
        let keep = self.max_freq.saturating_sub(drop);
        Self {
            max_freq: keep,
            constant: self.constant,
            b1: self.b1[..keep].to_vec(),
            b2: self.b2[..keep].to_vec(),
            t: self.t[..keep].to_vec(),
        }
    }

    /// Structural checks for series read from disk.
    pub fn validate(&self) -> Result<()> {
        let m = self.max_freq;
        if self.b1.len() != m || self.b2.len() != m || self.t.len() != m {
            return Err(Error::validation(format!(
                "series arrays must all have length M = {m}"
            )));
        }
        let all = std::iter::once(&self.constant).chain(&self.b1).chain(&self.b2);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("series coefficients must be finite"));
        }
        for (i, &t) in self.t.iter().enumerate() {
            let expect = FRAC_PI_2 * (i + 1) as f64;
            if (t - expect).abs() > 1e-9 * expect {
                return Err(Error::validation(format!("t[{i}] = {t}, expected π·{}/2", i + 1)));
            }
        }
        Ok(())
    }
}

/// Rewrites `Re Σ_m c_m e^{iπm(1−p)/2}` as a real cosine/sine series in `p`.
pub fn to_real_form(cf: &ComplexFourierSeries) -> RealFourierSeries {
    let m_max = cf.max_freq;
    // γ_m = c_m · e^{iπm/2} = c_m · i^m
    let gamma = |m: i64| -> Complex64 {
        let rot = match m.rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        cf.coeff(m) * rot
    };
    let mut b1 = Vec::with_capacity(m_max);
    let mut b2 = Vec::with_capacity(m_max);
    let mut t = Vec::with_capacity(m_max);
    for m in 1..=m_max as i64 {
        let (gp, gm) = (gamma(m), gamma(-m));
        // γ_m e^{−it p} + γ_{−m} e^{it p} = (γ_m + γ_{−m}) cos + i(γ_{−m} − γ_m) sin
        b1.push((gp + gm).re);
        b2.push(gp.im - gm.im);
        t.push(FRAC_PI_2 * m as f64);
    }
    RealFourierSeries {
        max_freq: m_max,
        constant: gamma(0).re,
        b1,
        b2,
        t,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    pub grid_size: usize,
    pub max_error: f64,
    /// Grid point where `max_error` was attained.
    pub worst_point: f64,
    pub target_eps: f64,
    pub passed: bool,
}

/// Maximum of `|target − series|` over `grid_size` uniform points on `[lo, hi]`
/// (endpoints included; a single point evaluates `lo` only).
pub fn verify_error<S, T>(series: S, target: T, interval: (f64, f64), grid_size: usize, eps: f64) -> ErrorCertificate
where
    S: Fn(f64) -> f64 + Sync,
    T: Fn(f64) -> f64 + Sync,
{
    let (lo, hi) = interval;
    let n = grid_size.max(1);
    let point = |i: usize| {
        if n == 1 {
            lo
        } else if i == n - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let (max_error, worst) = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = point(i);
            let e = (target(p) - series(p)).abs();
            (if e.is_nan() { f64::INFINITY } else { e }, i)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
                    a
                } else {
                    b
                }
            },
        );
    ErrorCertificate {
        grid_size: n,
        max_error,
        worst_point: point(worst.min(n - 1)),
        target_eps: eps,
        passed: max_error <= eps,
    }
}

/// A real Fourier series for `ln p` together with its construction parameters
/// and certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedLogSeries {
    pub p_min: f64,
    pub eps: f64,
    #[serde(flatten)]
    pub series: RealFourierSeries,
    pub taylor_order: usize,
    /// `ε/4`, spent on the Taylor truncation.
    pub taylor_budget: f64,
    /// `3ε/4`, spent on the polynomial-to-Fourier conversion.
    pub conversion_budget: f64,
    pub conversion_bounds: ConversionBounds,
    pub certificate: ErrorCertificate,
}

fn check_log_params(p_min: f64, eps: f64) -> Result<()> {
    if !(p_min > 0.0 && p_min < 1.0) {
        return Err(Error::validation(format!("p_min must lie in (0, 1), got {p_min}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::validation(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// Builds and certifies a series but returns it whether or not the certificate passed.
pub fn assemble_log_series(p_min: f64, eps: f64) -> Result<CertifiedLogSeries> {
    check_log_params(p_min, eps)?;
    let order = choose_taylor_truncation_certified(p_min, eps)?;
    let taylor = taylor_log(order)?;
    let conv_eps = eps.min(4.0 * taylor.l1_norm());
    let complex = taylor_to_fourier(&taylor, p_min, conv_eps)?;
    let series = to_real_form(&complex);
    let certificate = verify_error(
        |p| series.evaluate(p),
        f64::ln,
        (p_min, 1.0),
        CERTIFICATE_GRID,
        eps,
    );
    Ok(CertifiedLogSeries {
        p_min,
        eps,
        series,
        taylor_order: order,
        taylor_budget: eps / 4.0,
        conversion_budget: 0.75 * eps,
        conversion_bounds: complex.bounds,
        certificate,
    })
}

/// Certified series for `ln p` on `[p_min, 1]` within `eps`; a failed
/// certificate is an error.
pub fn build_log_series(p_min: f64, eps: f64) -> Result<CertifiedLogSeries> {
    let built = assemble_log_series(p_min, eps)?;
    if !built.certificate.passed {
        return Err(Error::CertificateFailed(Box::new(built.certificate)));
    }
    Ok(built)
}
