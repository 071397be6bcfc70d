//! Measurement statistics of the entropy and energy estimation circuits,
//! finite-shot sampling, and query-cost models.
//!
//! The oracles are not compiled to gates. Their outcome probabilities are
//! evaluated in closed form from the state spectrum or the LCU data.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourierlog::{build_log_series, RealFourierSeries};
use crate::hamiltonians::LcuDecomposition;
use crate::numkernel::{DensityMatrix, PureStateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Cos,
    Sin,
}

impl TermKind {
    /// Ancilla phase selecting this term in [`fourier_term_probability`].
    pub fn phase(self) -> f64 {
        match self {
            TermKind::Cos => 0.0,
            TermKind::Sin => -FRAC_PI_2,
        }
    }
}

/// `Tr(ρ cos(ρt))` or `Tr(ρ sin(ρt))`, from the spectrum of `ρ`.
pub fn fourier_term_expectation(rho: &DensityMatrix, t: f64, kind: TermKind) -> f64 {
    rho.spectrum()
        .iter()
        .map(|&p| match kind {
            TermKind::Cos => p * (p * t).cos(),
            TermKind::Sin => p * (p * t).sin(),
        })
        .sum()
}

/// Probability of the `+` outcome, `½(1 + Tr(ρ cos(ρt + θ)))`.
pub fn fourier_term_probability(rho: &DensityMatrix, t: f64, phase: f64) -> f64 {
    let tr: f64 = rho.spectrum().iter().map(|&p| p * (p * t + phase).cos()).sum();
    (0.5 * (1.0 + tr)).clamp(0.0, 1.0)
}

/// Probability of the `+1` outcome, `½(1 + ⟨ψ|Σ α_k V_k|ψ⟩ / ‖α‖₁)`.
pub fn energy_probability(psi: &PureStateVector, lcu: &LcuDecomposition) -> Result<f64> {
    if psi.dim() != lcu.dim() {
        return Err(Error::DimensionMismatch {
            expected: lcu.dim(),
            found: psi.dim(),
        });
    }
    let mut energy = 0.0;
    for (a, v) in lcu.alphas.iter().zip(&lcu.unitaries) {
        energy += a * psi.expectation(v)?.re;
    }
    Ok((0.5 * (1.0 + energy / lcu.alpha_norm)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotResult {
    pub shots: u64,
    pub plus_count: u64,
    /// `2·plus_count/shots − 1`.
    pub estimate: f64,
}

/// `shots` Bernoulli(`p`) trials summarized by their `+` count.
pub fn sample_bernoulli(p: f64, shots: u64, seed: u64) -> Result<ShotResult> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(format!("probability must lie in [0, 1], got {p}")));
    }
    if shots == 0 {
        return Err(Error::validation("shots must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Binomial::new(shots, p).map_err(|e| Error::validation(e.to_string()))?;
    let plus_count = dist.sample(&mut rng);
    Ok(ShotResult {
        shots,
        plus_count,
        estimate: 2.0 * plus_count as f64 / shots as f64 - 1.0,
    })
}

/// Queries to learn a probability to additive error `eps` by amplitude
/// estimation, modelled as `⌈π/eps⌉`.
pub fn amplitude_estimation_cost(eps: f64) -> Result<u64> {
    check_eps(eps)?;
    Ok(((PI / eps).ceil() as u64).max(1))
}

/// Query count with the named quantities it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCostReport {
    pub oracle_name: String,
    pub eps: f64,
    pub query_count: u64,
    pub formula_terms: BTreeMap<String, f64>,
}

impl QueryCostReport {
    /// Recomputes `query_count` from `formula_terms` alone.
    pub fn recompute(&self) -> Result<u64> {
        let term = |k: &str| {
            self.formula_terms
                .get(k)
                .copied()
                .ok_or_else(|| Error::validation(format!("missing formula term {k}")))
        };
        match self.oracle_name.as_str() {
            ENTROPY_ORACLE => Ok(entropy_count(
                term("b_norm")?,
                term("eps")?,
                term("sum_t")?,
                term("sum_log_inv_eps")?,
                term("sum_log_b_norm")?,
            )),
            ENERGY_ORACLE => amplitude_estimation_cost(term("eps")? / term("alpha_norm")?),
            other => Err(Error::validation(format!("unknown oracle {other}"))),
        }
    }
}

pub const ENTROPY_ORACLE: &str = "purified_state_preparation";
pub const ENERGY_ORACLE: &str = "lcu_select_prepare";

fn entropy_count(b_norm: f64, eps: f64, sum_t: f64, sum_log_eps: f64, sum_log_b: f64) -> u64 {
    ((b_norm / eps) * (sum_t + sum_log_eps + sum_log_b)).ceil().max(1.0) as u64
}

/// State-preparation queries for entropy estimation to error `eps` with the
/// series certified for `p_min` at the same `eps`.
pub fn entropy_estimation_cost(p_min: f64, eps: f64) -> Result<QueryCostReport> {
    check_eps(eps)?;
    let series = build_log_series(p_min, eps)?;
    let mut report = entropy_estimation_cost_for_series(&series.series, eps)?;
    report.formula_terms.insert("p_min".into(), p_min);
    Ok(report)
}

/// `⌈(‖b‖₁/ε)·Σ_{m=1}^{M} (t_m + ln(1/ε) + ln‖b‖₁)⌉` for a given series.
pub fn entropy_estimation_cost_for_series(series: &RealFourierSeries, eps: f64) -> Result<QueryCostReport> {
    check_eps(eps)?;
    let m = series.max_freq as f64;
    let b_norm = series.l1_norm();
    if b_norm <= 0.0 {
        return Err(Error::validation("series has no oscillating terms"));
    }
    let sum_t: f64 = series.t.iter().sum();
    let sum_log_eps = m * (1.0 / eps).ln();
    let sum_log_b = m * b_norm.ln();
    let query_count = entropy_count(b_norm, eps, sum_t, sum_log_eps, sum_log_b);
    let formula_terms = BTreeMap::from([
        ("M".to_string(), m),
        ("b_norm".to_string(), b_norm),
        ("eps".to_string(), eps),
        ("sum_t".to_string(), sum_t),
        ("sum_log_inv_eps".to_string(), sum_log_eps),
        ("sum_log_b_norm".to_string(), sum_log_b),
    ]);
    Ok(QueryCostReport {
        oracle_name: ENTROPY_ORACLE.into(),
        eps,
        query_count,
        formula_terms,
    })
}

/// Applications of the LCU oracles for energy estimation to error `eps`.
pub fn energy_estimation_cost(alpha_norm: f64, eps: f64) -> Result<QueryCostReport> {
    check_eps(eps)?;
    if !(alpha_norm > 0.0 && alpha_norm.is_finite()) {
        return Err(Error::validation(format!("alpha_norm must be positive, got {alpha_norm}")));
    }
    let query_count = amplitude_estimation_cost(eps / alpha_norm)?;
    Ok(QueryCostReport {
        oracle_name: ENERGY_ORACLE.into(),
        eps,
        query_count,
        formula_terms: BTreeMap::from([
            ("alpha_norm".to_string(), alpha_norm),
            ("eps".to_string(), eps),
        ]),
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::validation(format!("eps must be positive and finite, got {eps}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{lcu_decompose, PauliSum};
    use crate::numkernel::{random_density_matrix, random_spectrum};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn h(terms: &[(f64, &str)]) -> PauliSum {
        let n = terms[0].1.len();
        PauliSum::new(n, terms.iter().map(|(c, s)| (*c, s.parse().unwrap())).collect()).unwrap()
    }

    #[test]
    fn expectation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density_matrix(&random_spectrum(4, 0.0, &mut rng).unwrap(), &mut rng).unwrap();
        assert_abs_diff_eq!(fourier_term_expectation(&rho, 0.0, TermKind::Cos), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fourier_term_expectation(&rho, 0.0, TermKind::Sin), 0.0, epsilon = 1e-12);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        for t in [0.3, 1.0, 2.5] {
            assert_abs_diff_eq!(
                fourier_term_expectation(&mixed, t, TermKind::Cos),
                (t / 2.0).cos(),
                epsilon = 1e-14
            );
        }
        assert_abs_diff_eq!(fourier_term_expectation(&mixed, PI, TermKind::Cos), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn probability_examples() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        assert_abs_diff_eq!(fourier_term_probability(&rho, 0.0, 0.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fourier_term_probability(&rho, 0.0, -FRAC_PI_2), 0.5, epsilon = 1e-14);
        for kind in [TermKind::Cos, TermKind::Sin] {
            for t in [0.1, 1.7, 9.0] {
                let p = fourier_term_probability(&rho, t, kind.phase());
                assert_abs_diff_eq!(2.0 * p - 1.0, fourier_term_expectation(&rho, t, kind), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn energy_probability_examples() {
        let z = lcu_decompose(&h(&[(1.0, "Z")])).unwrap();
        let x = lcu_decompose(&h(&[(1.0, "X")])).unwrap();
        let zero = PureStateVector::basis(2, 0).unwrap();
        assert_abs_diff_eq!(energy_probability(&zero, &z).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(energy_probability(&zero, &x).unwrap(), 0.5, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = PureStateVector::from_vec(vec![Complex64::new(s, 0.0); 2]).unwrap();
        let zx = lcu_decompose(&h(&[(0.5, "Z"), (0.5, "X")])).unwrap();
        assert_abs_diff_eq!(energy_probability(&plus, &zx).unwrap(), 0.75, epsilon = 1e-14);
        let two = PureStateVector::basis(4, 0).unwrap();
        assert!(energy_probability(&two, &z).is_err());
    }

    #[test]
    fn bernoulli_examples() {
        let r = sample_bernoulli(1.0, 100, 3).unwrap();
        assert_eq!(r.plus_count, 100);
        assert_eq!(r.estimate, 1.0);
        assert_eq!(sample_bernoulli(0.0, 100, 3).unwrap().estimate, -1.0);
        assert!(sample_bernoulli(1.5, 10, 0).is_err());
        assert!(sample_bernoulli(-0.1, 10, 0).is_err());
        assert!(sample_bernoulli(0.5, 0, 0).is_err());
        assert_eq!(sample_bernoulli(0.3, 1000, 9).unwrap(), sample_bernoulli(0.3, 1000, 9).unwrap());
    }

    #[test]
    fn bernoulli_hoeffding() {
        let shots = 10_000u64;
        let within = (0..100)
            .filter(|&seed| {
                sample_bernoulli(0.5, shots, seed).unwrap().estimate.abs() <= 5.0 / (shots as f64).sqrt()
            })
            .count();
        assert!(within >= 95, "{within}");
    }

    #[test]
    fn amplitude_cost_examples() {
        assert_eq!(amplitude_estimation_cost(PI).unwrap(), 1);
        assert_eq!(amplitude_estimation_cost(0.01).unwrap(), 315);
        let a = amplitude_estimation_cost(0.003).unwrap();
        let b = amplitude_estimation_cost(0.0015).unwrap();
        assert!((b as i64 - 2 * a as i64).abs() <= 1);
        assert!(amplitude_estimation_cost(0.0).is_err());
    }

    #[test]
    fn energy_cost_examples() {
        assert_eq!(energy_estimation_cost(1.0, PI).unwrap().query_count, 1);
        let r = energy_estimation_cost(2.0, 0.01).unwrap();
        assert_eq!(r.query_count, 629);
        assert_eq!(r.recompute().unwrap(), 629);
        let a = energy_estimation_cost(1.3, 0.01).unwrap().query_count;
        let b = energy_estimation_cost(2.6, 0.01).unwrap().query_count;
        assert!((b as i64 - 2 * a as i64).abs() <= 1);
        assert!(energy_estimation_cost(0.0, 0.1).is_err());
    }

    #[test]
    fn entropy_cost_monotone_and_reproducible() {
        let a = entropy_estimation_cost(0.1, 1e-2).unwrap();
        let b = entropy_estimation_cost(0.05, 1e-2).unwrap();
        assert!(b.query_count > a.query_count);
        let c = entropy_estimation_cost(0.1, 1e-3).unwrap();
        assert!(c.query_count > a.query_count);
        for r in [&a, &b, &c] {
            assert_eq!(r.recompute().unwrap(), r.query_count);
            assert!(r.query_count >= 1);
        }
        assert_eq!(a.formula_terms["M"] as usize, build_log_series(0.1, 1e-2).unwrap().series.max_freq);
    }

    #[test]
    fn report_json_round_trip() {
        let r = entropy_estimation_cost(0.2, 1e-2).unwrap();
        let back: QueryCostReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back.recompute().unwrap(), r.query_count);
    }
}
