use num_complex::Complex64;
use proptest::prelude::*;

use pcnn_core::circulant::{dft_multipliers_fft, fourier_mode};
use pcnn_core::factorization::depth_bound_holds;
use pcnn_core::network::merged_linear_stage;
use pcnn_core::spectral::{empirical_spectrum, sample_grid, TorusRidge};
use pcnn_core::{
    as_matrix, build_knots, build_ridge_network, check_order, circular_convolve, compose_filters,
    dft_multipliers, factorize, flat_sum_eval, lower_bound, nested_eval, reconvolve, ridge_spectrum,
    CoordinateBox, Filter, FrequencyLattice, ProfileKind, ProfileSpec, ReluKnotSequence, RidgeSpec,
    SamplingPlan,
};

fn filter_and_input() -> impl Strategy<Value = (Filter, Vec<f64>)> {
    (1usize..=16).prop_flat_map(|d| {
        (
            prop::collection::vec(-2.0f64..2.0, 1..=d).prop_map(move |c| Filter::new(c, d).unwrap()),
            prop::collection::vec(-2.0f64..2.0, d),
        )
    })
}

fn filter_pair() -> impl Strategy<Value = (Filter, Filter, Vec<f64>)> {
    (1usize..=12).prop_flat_map(|d| {
        (
            prop::collection::vec(-1.0f64..1.0, 1..=d).prop_map(move |c| Filter::new(c, d).unwrap()),
            prop::collection::vec(-1.0f64..1.0, 1..=d).prop_map(move |c| Filter::new(c, d).unwrap()),
            prop::collection::vec(-1.0f64..1.0, d),
        )
    })
}

fn filter_triple() -> impl Strategy<Value = (Filter, Filter, Filter)> {
    (1usize..=10).prop_flat_map(|d| {
        let f = move || prop::collection::vec(-1.0f64..1.0, 1..=d).prop_map(move |c| Filter::new(c, d).unwrap());
        (f(), f(), f())
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn convolution_matches_dense_matrix((w, x) in filter_and_input()) {
        let d = w.period();
        let fast = circular_convolve(&w, &x).unwrap();
        let dense = as_matrix(&w, d).unwrap().matvec(&x).unwrap();
        prop_assert!(close(&fast, &dense, 1e-12));
    }

    #[test]
    fn convolution_is_linear((w, x) in filter_and_input(), k in -3.0f64..3.0) {
        let scaled: Vec<f64> = x.iter().map(|v| k * v).collect();
        let a: Vec<f64> = circular_convolve(&w, &x).unwrap().iter().map(|v| k * v).collect();
        prop_assert!(close(&a, &circular_convolve(&w, &scaled).unwrap(), 1e-11));
    }

    #[test]
    fn composition_is_sequential_application((a, b, x) in filter_pair()) {
        let ab = compose_filters(&a, &b).unwrap();
        let seq = circular_convolve(&a, &circular_convolve(&b, &x).unwrap()).unwrap();
        prop_assert!(close(&circular_convolve(&ab, &x).unwrap(), &seq, 1e-12));
        // circulant matrices commute
        let ba = compose_filters(&b, &a).unwrap();
        prop_assert!(close(&ab.dense(), &ba.dense(), 1e-14));
    }

    #[test]
    fn composition_is_associative((a, b, c) in filter_triple()) {
        let left = compose_filters(&a, &compose_filters(&b, &c).unwrap()).unwrap();
        let right = compose_filters(&compose_filters(&a, &b).unwrap(), &c).unwrap();
        prop_assert!(close(&left.dense(), &right.dense(), 1e-12));
    }

    #[test]
    fn last_coordinate_of_reversed_filter_is_dot_product(
        a in prop::collection::vec(-3.0f64..3.0, 1..12),
        seed in prop::collection::vec(-1.0f64..1.0, 12),
    ) {
        let d = a.len();
        let w = Filter::new((0..d).map(|k| a[d - 1 - k]).collect(), d).unwrap();
        let x = &seed[..d];
        let dot: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
        prop_assert!((circular_convolve(&w, x).unwrap()[d - 1] - dot).abs() <= 1e-12);
    }

    #[test]
    fn multipliers_of_composition_are_products((a, b, _x) in filter_pair()) {
        let d = a.period();
        let ab = dft_multipliers(&compose_filters(&a, &b).unwrap(), d).unwrap();
        let prod = dft_multipliers(&a, d).unwrap().pointwise(&dft_multipliers(&b, d).unwrap()).unwrap();
        prop_assert!(ab.max_abs_diff(&prod) <= 1e-12);
    }

    #[test]
    fn fft_path_matches_direct((w, _x) in filter_and_input()) {
        let direct = dft_multipliers(&w, w.period()).unwrap();
        prop_assert!(direct.max_abs_diff(&dft_multipliers_fft(&w)) <= 1e-12);
    }

    #[test]
    fn eigenvectors_and_reconstruction((w, _x) in filter_and_input()) {
        let d = w.period();
        let m = as_matrix(&w, d).unwrap();
        let hat = dft_multipliers(&w, d).unwrap();
        for l in 0..d {
            let v = fourier_mode(l, d);
            let cv = m.matvec_complex(&v).unwrap();
            for (a, b) in cv.iter().zip(&v) {
                prop_assert!((a - hat.values[l] * b).norm() <= 1e-12);
            }
        }
        let back = hat.reconstruct();
        for (i, row) in back.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                prop_assert!((v - Complex64::from(m.entry(i, k))).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn factorization_round_trip(
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..=10),
        lead in prop_oneof![-1.0f64..-0.1, 0.1f64..1.0],
        s in 2usize..=5,
    ) {
        let mut c = coeffs;
        c.push(lead);
        let m = c.len() - 1;
        let w = Filter::new(c, 16).unwrap();
        let r = factorize(&w, s, 1e-8).unwrap();
        prop_assert!(r.factors.iter().all(|f| f.support_size() <= s + 1));
        prop_assert!(depth_bound_holds(r.depth, m, s));
        let back = reconvolve(&r.factors).unwrap();
        prop_assert!(close(&back.dense(), &w.dense(), 1e-8));
    }

    #[test]
    fn ordered_sequences_collapse(
        pairs in prop::collection::vec((0.01f64..4.0, -3.0f64..3.0), 0..30),
        ys in prop::collection::vec(-4.0f64..4.0, 1..20),
    ) {
        let seq = ReluKnotSequence::from_tuples(&pairs).unwrap().into_ordered();
        prop_assert!(check_order(&seq));
        for y in ys {
            let (n, f) = (nested_eval(&seq, y), flat_sum_eval(&seq, y));
            prop_assert!((n - f).abs() <= 1e-12 * (1.0 + f.abs()), "{} vs {}", n, f);
        }
    }

    #[test]
    fn interpolant_hits_knots(n in 1usize..80, lo in -3.0f64..0.0, width in 0.1f64..4.0) {
        let p = ProfileSpec::from_kind(&ProfileKind::GaussianPeriodic { width: 0.3 }, lo, lo + width).unwrap();
        let k = build_knots(&p, n).unwrap();
        for (t, v) in k.knots.iter().zip(&k.values) {
            prop_assert!((k.evaluate(*t) - v).abs() <= 1e-12);
        }
        prop_assert!(check_order(&k.rising) && check_order(&k.falling));
    }

    #[test]
    fn lattice_contains_combinations(
        gens in prop::collection::vec(prop::collection::vec(-4i64..=4, 3), 1..4),
        c in prop::collection::vec(-5i64..=5, 3),
    ) {
        let l = FrequencyLattice::from_generators(3, gens.clone()).unwrap();
        let u: Vec<i64> = (0..3).map(|j| gens.iter().zip(&c).map(|(g, ci)| g[j] * ci).sum()).collect();
        prop_assert!(l.member(&u).unwrap());
        for g in &gens {
            prop_assert!(l.member(g).unwrap());
        }
        let mut reversed = gens.clone();
        reversed.reverse();
        prop_assert!(l.same_span(&FrequencyLattice::from_generators(3, reversed).unwrap()));
        // adding a member as a generator does not change the lattice
        let mut more = gens;
        more.push(u);
        let bigger = FrequencyLattice::from_generators(3, more).unwrap();
        prop_assert_eq!(l.hnf_basis(), bigger.hnf_basis());
    }

    #[test]
    fn membership_of_a_vector_is_membership_of_its_line(
        gens in prop::collection::vec(prop::collection::vec(-3i64..=3, 3), 1..4),
        u in prop::collection::vec(-4i64..=4, 3),
    ) {
        let l = FrequencyLattice::from_generators(3, gens).unwrap();
        let whole_line = (-5i64..=5).all(|m| {
            let mu: Vec<i64> = u.iter().map(|v| m * v).collect();
            l.member(&mu).unwrap()
        });
        prop_assert_eq!(l.member(&u).unwrap(), whole_line);
    }

    #[test]
    fn lower_bound_is_zero_inside_lattice(
        dir in prop::collection::vec(-3i64..=3, 3),
        amps in prop::collection::vec(-1.0f64..1.0, 1..4),
    ) {
        let terms: Vec<(i64, f64)> = amps.iter().enumerate().map(|(m, a)| (m as i64 + 1, *a)).collect();
        let r = TorusRidge::cosine_sum(dir.clone(), &terms).unwrap();
        let own = FrequencyLattice::from_generators(3, vec![dir]).unwrap();
        prop_assert_eq!(lower_bound(&r, &own).unwrap(), 0.0);
        let trivial = FrequencyLattice::trivial(3);
        let spec = ridge_spectrum(&r).unwrap();
        let nonconstant: f64 = spec.iter().filter(|(k, _)| k.iter().any(|&v| v != 0)).map(|(_, c)| c.norm_sqr()).sum();
        prop_assert!((lower_bound(&r, &trivial).unwrap() - nonconstant.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn grid_spectrum_satisfies_parseval(
        dir in prop::collection::vec(-2i64..=2, 2),
        amps in prop::collection::vec(-1.0f64..1.0, 1..3),
        n in 6usize..20,
    ) {
        let terms: Vec<(i64, f64)> = amps.iter().enumerate().map(|(m, a)| (m as i64 + 1, *a)).collect();
        let r = TorusRidge::cosine_sum(dir, &terms).unwrap();
        let samples = sample_grid(|x| r.evaluate(x), 2, n).unwrap();
        let mean_sq = samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64;
        let s = empirical_spectrum(|x| r.evaluate(x), 2, n).unwrap();
        prop_assert!((s.energy() - mean_sq).abs() <= 1e-10);
        prop_assert!(s.is_conjugate_symmetric(1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ridge_network_tracks_the_interpolant(
        dir in prop::collection::vec(-2i64..=2, 5..=7),
        s in 2usize..=4,
        n in 2usize..24,
        seed in any::<u64>(),
    ) {
        prop_assume!(dir.iter().any(|&v| v != 0));
        let a: Vec<f64> = dir.iter().map(|&v| v as f64).collect();
        let d = a.len();
        let region = CoordinateBox::cube(d, -0.5, 1.0).unwrap();
        let (lo, hi) = region.project_range(&a);
        let p = ProfileSpec::from_kind(&ProfileKind::Cos { frequency: 0.7 }, lo, hi).unwrap();
        let spec = RidgeSpec::new(a, p).unwrap();
        let net = build_ridge_network(&spec, s, n, &region, SamplingPlan { samples: 300, seed }).unwrap();
        prop_assert!(net.report.construction_gap <= 1e-9, "gap {}", net.report.construction_gap);
        prop_assert!(net.network.layers().iter().all(|l| l.filter.support_size() <= s + 1));
        prop_assert!(net.network.layers().iter().all(|l| l.bias.has_repeated_middle()));

        // the factor layers act as one merged affine layer on the box
        let stage = &net.network.layers()[..net.linear_depth];
        let (w, b) = merged_linear_stage(stage).unwrap();
        for x in region.sample_points(100, seed ^ 1) {
            let mut h = x.clone();
            for layer in stage {
                h = circular_convolve(&layer.filter, &h).unwrap()
                    .iter()
                    .zip(layer.bias.values())
                    .map(|(p, q)| (p - q).max(0.0))
                    .collect();
            }
            let merged: Vec<f64> = circular_convolve(&w, &x).unwrap()
                .iter()
                .zip(&b)
                .map(|(p, q)| (p - q).max(0.0))
                .collect();
            prop_assert!(close(&h, &merged, 1e-10));
        }
    }
}
