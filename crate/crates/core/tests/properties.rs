//! Property tests for the module invariants.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vargibbs_core::ansatz::{thetas_from_phis, AnsatzCircuit, AnsatzConfig, AnsatzParameters};
use vargibbs_core::circuits::{
    energy_probability, entropy_estimation_cost, fourier_term_expectation, fourier_term_probability,
    TermKind,
};
use vargibbs_core::fourierlog::{
    build_log_series, choose_taylor_truncation, taylor_log, taylor_remainder_bound, taylor_to_fourier,
    to_real_form,
};
use vargibbs_core::hamiltonians::{
    gibbs_free_energy, gibbs_state, lcu_decompose, random_instance, AdiabaticFamily, Coupling, PauliString,
    PauliSum,
};
use vargibbs_core::numkernel::{
    hermitian_eig, identity, kron, matrix_function, partial_trace, random_density_matrix, random_hermitian,
    random_spectrum, spectral_norm, trace_distance, ComplexMatrix, DensityMatrix, PureStateVector, Subsystem,
};
use vargibbs_core::variational::{
    entropy_fourier, run_experiment, von_neumann_entropy, EntropyMode, FreeEnergyObjective, Init,
    ObjectiveConfig, OptimizerChoice, Readout,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_pauli_sum(n: usize, terms: usize, r: &mut ChaCha8Rng) -> PauliSum {
    let letters = ['I', 'X', 'Y', 'Z'];
    let terms = (0..terms)
        .map(|_| {
            let s: String = (0..n).map(|_| letters[r.random_range(0..4)]).collect();
            (r.random_range(-2.0..2.0), s.parse::<PauliString>().unwrap())
        })
        .collect();
    PauliSum::new(n, terms).unwrap()
}

fn random_state(dim: usize, r: &mut ChaCha8Rng) -> DensityMatrix {
    let spec = random_spectrum(dim, 0.0, r).unwrap();
    random_density_matrix(&spec, r).unwrap()
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn feasible_params(r: usize, d: usize, g: &mut ChaCha8Rng) -> AnsatzParameters {
    let w: Vec<f64> = (0..d).map(|_| -g.random::<f64>().ln()).collect();
    let total: f64 = w.iter().sum();
    AnsatzParameters {
        phi: (0..r).map(|_| g.random_range(-3.0..3.0)).collect(),
        probs: w[..d - 1].iter().map(|x| x / total).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eig_reconstructs_hermitian(seed in any::<u64>(), n in 1usize..=4) {
        let m = random_hermitian(1 << n, &mut rng(seed));
        let err = spectral_norm(&(hermitian_eig(&m).unwrap().reconstruct() - &m));
        prop_assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn identity_function_is_identity(seed in any::<u64>(), n in 1usize..=4) {
        let m = random_hermitian(1 << n, &mut rng(seed));
        let f = matrix_function(&m, |x| Complex64::new(x, 0.0)).unwrap();
        prop_assert!(max_abs(&(f - &m)) <= 1e-12);
    }

    #[test]
    fn exp_times_inverse_exp_is_identity(seed in any::<u64>(), n in 1usize..=4, scale in 0.0f64..=2.0) {
        // Rounding in exp(m)·exp(−m) grows like e^{2‖m‖}, so the norm is capped.
        let m = random_hermitian(1 << n, &mut rng(seed));
        let m = m.scale(scale / spectral_norm(&m));
        let a = matrix_function(&m, |x| Complex64::new(x.exp(), 0.0)).unwrap();
        let b = matrix_function(&m, |x| Complex64::new((-x).exp(), 0.0)).unwrap();
        prop_assert!(max_abs(&(a * b - identity(1 << n))) <= 1e-10);
    }

    #[test]
    fn partial_trace_of_product_keeps_factor(seed in any::<u64>(), na in 1usize..=2, nb in 1usize..=2) {
        let mut g = rng(seed);
        let (da, db) = (1 << na, 1 << nb);
        let a = random_state(da, &mut g);
        let b = random_state(db, &mut g);
        let ab = DensityMatrix::new(kron(a.matrix(), b.matrix())).unwrap();
        let ka = partial_trace(&ab, da, db, Subsystem::A).unwrap();
        let kb = partial_trace(&ab, da, db, Subsystem::B).unwrap();
        prop_assert!(max_abs(&(ka.matrix() - a.matrix())) <= 1e-12);
        prop_assert!(max_abs(&(kb.matrix() - b.matrix())) <= 1e-12);
    }

    #[test]
    fn trace_distance_triangle(seed in any::<u64>(), n in 1usize..=3) {
        let mut g = rng(seed);
        let [a, b, c] = [(); 3].map(|_| random_state(1 << n, &mut g));
        let ab = trace_distance(&a, &b).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10);
    }

    #[test]
    fn lcu_reconstructs_and_bounds_norm(seed in any::<u64>(), n in 1usize..=4, k in 1usize..=10) {
        let h = random_pauli_sum(n, k, &mut rng(seed));
        prop_assume!(h.terms().iter().any(|(c, _)| *c != 0.0));
        let m = h.to_matrix().unwrap();
        let lcu = lcu_decompose(&h).unwrap();
        prop_assert!(max_abs(&(lcu.reconstruct() - &m)) <= 1e-12);
        prop_assert!(lcu.alpha_norm >= spectral_norm(&m) - 1e-12);
    }

    #[test]
    fn gibbs_state_minimizes_free_energy(seed in any::<u64>(), n in 1usize..=3, beta in 0.1f64..5.0) {
        let mut g = rng(seed);
        let h = random_pauli_sum(n, 6, &mut g);
        let hm = h.to_matrix().unwrap();
        let f = |s: &DensityMatrix| s.expectation(&hm).unwrap() - von_neumann_entropy(s) / beta;
        let gibbs = gibbs_state(&h, beta).unwrap();
        let f_gibbs = gibbs_free_energy(&h, beta).unwrap();
        prop_assert!((f(&gibbs) - f_gibbs).abs() <= 1e-9);
        for _ in 0..4 {
            let sigma = random_state(1 << n, &mut g);
            prop_assert!(f(&sigma) >= f_gibbs - 1e-10);
        }
    }

    #[test]
    fn interpolation_is_affine(seed in any::<u64>(), n in 1usize..=4, s1 in -2.0f64..2.0, s2 in -2.0f64..2.0) {
        let mut g = rng(seed);
        let fam = AdiabaticFamily::new(random_pauli_sum(n, 5, &mut g), random_pauli_sum(n, 5, &mut g)).unwrap();
        let mid = fam.interpolate(0.5 * (s1 + s2));
        let avg = fam.interpolate(s1).add(&fam.interpolate(s2)).unwrap().scaled(0.5);
        for (c, s) in mid.terms().iter().chain(avg.terms()) {
            prop_assert!((mid.coeff(s) - avg.coeff(s)).abs() <= 1e-12, "{s}: {c}");
        }
    }

    #[test]
    fn circuit_views_agree(seed in any::<u64>(), n in 1usize..=3, t in -40.0f64..40.0) {
        let rho = random_state(1 << n, &mut rng(seed));
        let pc = fourier_term_probability(&rho, t, TermKind::Cos.phase());
        let ps = fourier_term_probability(&rho, t, TermKind::Sin.phase());
        prop_assert!((2.0 * pc - 1.0 - fourier_term_expectation(&rho, t, TermKind::Cos)).abs() <= 1e-12);
        prop_assert!((2.0 * ps - 1.0 - fourier_term_expectation(&rho, t, TermKind::Sin)).abs() <= 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&pc));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ps));
    }

    #[test]
    fn energy_probability_in_range(seed in any::<u64>(), n in 1usize..=3) {
        let mut g = rng(seed);
        let h = random_pauli_sum(n, 5, &mut g);
        prop_assume!(h.terms().iter().any(|(c, _)| *c != 0.0));
        let amps: Vec<Complex64> = (0..1 << n).map(|_| Complex64::new(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let psi = PureStateVector::from_vec(amps.iter().map(|a| a / norm).collect()).unwrap();
        let p = energy_probability(&psi, &lcu_decompose(&h).unwrap()).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
    }

    #[test]
    fn entropy_cost_monotone(p_min in 0.02f64..0.5, eps in 1e-3f64..0.1) {
        let base = entropy_estimation_cost(p_min, eps).unwrap().query_count;
        prop_assert!(entropy_estimation_cost(p_min / 2.0, eps).unwrap().query_count > base);
        prop_assert!(entropy_estimation_cost(p_min, eps / 2.0).unwrap().query_count > base);
    }

    #[test]
    fn taylor_truncation_is_minimal(p_min in 0.01f64..1.0, eps in 1e-6f64..0.5) {
        let k = choose_taylor_truncation(p_min, eps).unwrap();
        prop_assert!(taylor_remainder_bound(p_min, k) <= eps / 4.0);
        if k > 1 {
            prop_assert!(taylor_remainder_bound(p_min, k - 1) > eps / 4.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ansatz_preserves_spectrum_and_norm(seed in any::<u64>(), n in 1usize..=2, r in 0usize..=4, t in 0.0f64..6.0) {
        let mut g = rng(seed);
        let fam = random_instance(n, seed, Coupling::AllPairs).unwrap();
        let cfg = AnsatzConfig::new(n, r, t).unwrap();
        let params = feasible_params(r, cfg.d(), &mut g);
        let circuit = AnsatzCircuit::new(&fam, cfg.clone()).unwrap();
        let psi = circuit.evolve(&params).unwrap();
        let norm = psi.amplitudes().norm();
        prop_assert!((norm - 1.0).abs() <= 1e-10);
        let spec = circuit.reduced_state(&params).unwrap().spectrum().to_vec();
        let mut want = params.full_probs();
        want.sort_by(f64::total_cmp);
        for (a, b) in spec.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-10, "{spec:?} vs {want:?}");
        }
    }

    #[test]
    fn path_segments_telescope(phi in proptest::collection::vec(-10.0f64..10.0, 0..8)) {
        let params = AnsatzParameters { phi, probs: vec![] };
        let th = thetas_from_phis(&params);
        let total: f64 = th.windows(2).map(|w| w[1] - w[0]).sum();
        prop_assert_eq!(th[0], 0.0);
        prop_assert_eq!(*th.last().unwrap(), 1.0);
        prop_assert!((total - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn trotter_split_exact_for_commuting_terms(seed in any::<u64>(), r in 0usize..=3, t in 0.0f64..5.0) {
        let mut g = rng(seed);
        let z = |s: &str, c: f64| (c, s.parse::<PauliString>().unwrap());
        let h0 = PauliSum::new(2, vec![z("ZI", g.random_range(-1.0..1.0)), z("IZ", g.random_range(-1.0..1.0))]).unwrap();
        let h1 = PauliSum::new(2, vec![z("ZZ", g.random_range(-1.0..1.0)), z("IZ", g.random_range(-1.0..1.0))]).unwrap();
        let fam = AdiabaticFamily::new(h0, h1).unwrap();
        let params = feasible_params(r, 4, &mut g);
        let one = AnsatzConfig::new(2, r, t).unwrap();
        let ten = AnsatzConfig { segment_substeps: 10, ..one.clone() };
        let a = AnsatzCircuit::new(&fam, one).unwrap().evolve(&params).unwrap();
        let b = AnsatzCircuit::new(&fam, ten).unwrap().evolve(&params).unwrap();
        prop_assert!((a.amplitudes() - b.amplitudes()).norm() <= 1e-10);
    }

    #[test]
    fn free_energy_bounded_by_gibbs(seed in any::<u64>(), n in 1usize..=2, r in 1usize..=4, beta in 0.2f64..3.0) {
        let mut g = rng(seed);
        let fam = random_instance(n, seed, Coupling::AllPairs).unwrap();
        let acfg = AnsatzConfig::new(n, r, g.random_range(0.0..6.0)).unwrap();
        let obj = FreeEnergyObjective::new(&fam, acfg.clone(), ObjectiveConfig::exact(beta)).unwrap();
        let f_gibbs = gibbs_free_energy(&fam.target(), beta).unwrap();
        for i in 0..3 {
            let params = feasible_params(r, acfg.d(), &mut g);
            prop_assert!(obj.free_energy(&params, i).unwrap() >= f_gibbs - 1e-9);
        }
    }

    #[test]
    fn fourier_entropy_within_eps(seed in any::<u64>(), n in 1usize..=3, which in 0usize..3) {
        let (p_floor, eps) = [(0.05, 1e-2), (0.1, 1e-2), (0.2, 1e-3)][which];
        // Spectra in [p_floor, 1] need p_floor · D ≤ 1.
        prop_assume!(p_floor * (1 << n) as f64 <= 1.0);
        let series = build_log_series(p_floor, eps).unwrap();
        let mut g = rng(seed);
        let spec = random_spectrum(1 << n, p_floor, &mut g).unwrap();
        let rho = random_density_matrix(&spec, &mut g).unwrap();
        let est = entropy_fourier(&rho, &series, Readout::Exact).unwrap();
        prop_assert!(!est.below_p_min);
        prop_assert!((est.value - von_neumann_entropy(&rho)).abs() <= eps);
    }
}

/// Pointwise agreement of the complex and real forms, and the coefficient norm chain.
#[test]
fn series_forms_agree_and_norms_chain() {
    let mut g = rng(9);
    for (p_min, eps) in [(0.05, 1e-2), (0.1, 1e-3), (0.2, 1e-2)] {
        let s = build_log_series(p_min, eps).unwrap();
        let taylor = taylor_log(s.taylor_order).unwrap();
        let complex = taylor_to_fourier(&taylor, p_min, eps.min(4.0 * taylor.l1_norm())).unwrap();
        let real = to_real_form(&complex);
        assert_eq!(real, s.series);
        for _ in 0..1000 {
            let p: f64 = g.random();
            let diff = (real.evaluate(p) - complex.evaluate(1.0 - p).re).abs();
            assert!(diff <= 1e-12, "p={p}: {diff}");
        }
        let b = real.l1_norm();
        let c = complex.l1_norm();
        let a = taylor.l1_norm();
        let k = s.taylor_order as f64;
        assert!(b <= 2.0 * c + 1e-12 && c <= a + 1e-12 && a <= k.ln() + 1.0 + 1e-12, "{b} {c} {a}");
    }
}

fn small_experiment(seed: u64, mode: EntropyMode) -> String {
    let fam = random_instance(2, seed, Coupling::Chain).unwrap();
    let acfg = AnsatzConfig::new(2, 2, 2.0).unwrap();
    let ocfg = ObjectiveConfig {
        entropy_mode: mode,
        p_min: Some(0.05),
        series_eps: Some(1e-2),
        shots_per_term: 200,
        base_seed: seed,
        ..ObjectiveConfig::exact(1.0)
    };
    let opt = OptimizerChoice::Powell { ftol: 1e-10, max_evals: 120 };
    let res = run_experiment(&fam, &acfg, &ocfg, Init::PerturbedTruth { sigma: 0.2 }, opt, seed, 10).unwrap();
    for w in res.records.windows(2) {
        assert!(w[1].best_f <= w[0].best_f && w[1].delta_f <= w[0].delta_f);
    }
    serde_json::to_string(&res).unwrap()
}

#[test]
fn experiments_are_deterministic_across_thread_counts() {
    for mode in [EntropyMode::Exact, EntropyMode::FourierShots] {
        let runs: Vec<String> = [1, 4]
            .iter()
            .map(|&threads| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .unwrap()
                    .install(|| small_experiment(3, mode))
            })
            .collect();
        assert_eq!(runs[0], runs[1], "{mode:?}");
    }
}

#[test]
fn gradient_descent_traces_never_rise() {
    let fam = random_instance(2, 21, Coupling::AllPairs).unwrap();
    let acfg = AnsatzConfig::new(2, 3, 3.0).unwrap();
    let opt = OptimizerChoice::GradientDescent { rate: 5e-2, iters: 30, tol: 0.0, delta: 1e-4 };
    let res = run_experiment(&fam, &acfg, &ObjectiveConfig::exact(1.0), Init::Random, opt, 21, 7).unwrap();
    assert!(res.records.len() >= 2);
    for w in res.records.windows(2) {
        assert!(w[1].best_f <= w[0].best_f && w[1].delta_f <= w[0].delta_f);
    }
}
