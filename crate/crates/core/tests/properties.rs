use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uhdtest::procedure::{dr_threshold, prepare_splits, TestConfig, ThresholdMode};
use uhdtest::rmtlab::{stieltjes_fixed_point, PopulationSpectrum};
use uhdtest::seeds::{rng_for, Stream};
use uhdtest::simharness::haar_orthogonal;
use uhdtest::spectra::centered_gram_eigenvalues;
use uhdtest::splitkit::{split_once, Sample, SplitTag};
use uhdtest::teststat::{local_statistic, mollifier, KERNEL_SUPPORT};
use uhdtest::tuning::upper_order_statistic;
use uhdtest::{sample_covariance_spectrum, variance_constant, DataMatrix, Spectrum};

fn matrix(n: usize, p: usize) -> impl Strategy<Value = DataMatrix> {
    prop::collection::vec(-3.0f64..3.0, n * p).prop_map(move |v| DataMatrix::new(n, p, v).unwrap())
}

fn sized_matrix(n: std::ops::RangeInclusive<usize>, p: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DataMatrix> {
    (n, p).prop_flat_map(|(n, p)| matrix(n, p))
}

/// Nonzero eigenvalues of the `p x p` scaled centered covariance.
fn covariance_route(x: &DataMatrix) -> Vec<f64> {
    let (n, p) = (x.n(), x.p());
    let m = DMatrix::from_row_slice(n, p, x.values());
    let mean = m.row_mean();
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let cov = c.transpose() * &c / ((n * p) as f64).sqrt();
    let mut e: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

fn nonzero(v: &[f64], scale: f64) -> Vec<f64> {
    v.iter().copied().filter(|e| *e > 1e-9 * scale).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gram_route_matches_covariance_route(x in sized_matrix(3..=6, 1..=8)) {
        let gram = sample_covariance_spectrum(&x).unwrap().eigenvalues;
        let cov = covariance_route(&x);
        let scale = cov[0].max(f64::MIN_POSITIVE);
        let (a, b) = (nonzero(&gram, scale), nonzero(&cov, scale));
        prop_assert_eq!(a.len(), b.len());
        for (u, w) in a.iter().zip(&b) {
            prop_assert!((u - w).abs() <= 1e-9 * w.abs(), "{} vs {}", u, w);
        }
    }

    #[test]
    fn scaling_data_scales_eigenvalues_quadratically(x in sized_matrix(3..=8, 2..=12), c in 0.1f64..10.0) {
        let base = sample_covariance_spectrum(&x).unwrap().eigenvalues;
        let scaled = sample_covariance_spectrum(&x.scaled(c).unwrap()).unwrap().eigenvalues;
        let top = base[0].max(1e-300);
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((b - c * c * a).abs() <= 1e-9 * c * c * top);
        }
    }

    #[test]
    fn rotation_leaves_spectrum_unchanged(x in sized_matrix(3..=8, 2..=10), seed in any::<u64>()) {
        let q = haar_orthogonal(x.p(), &mut ChaCha8Rng::seed_from_u64(seed));
        let m = DMatrix::from_row_slice(x.n(), x.p(), x.values()) * q;
        let rotated: Vec<f64> = (0..x.n()).flat_map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect();
        let rotated = DataMatrix::new(x.n(), x.p(), rotated).unwrap();
        let a = sample_covariance_spectrum(&x).unwrap().eigenvalues;
        let b = sample_covariance_spectrum(&rotated).unwrap().eigenvalues;
        let top = a[0].max(1e-300);
        for (u, w) in a.iter().zip(&b) {
            prop_assert!((u - w).abs() <= 1e-9 * top);
        }
    }

    #[test]
    fn centered_gram_has_one_structural_zero(x in sized_matrix(3..=8, 12..=20)) {
        let full = centered_gram_eigenvalues(&x).unwrap();
        prop_assert_eq!(full.len(), x.n());
        prop_assert!(full[full.len() - 1].abs() <= 1e-9 * full[0]);
        prop_assert!(full[full.len() - 2] > 1e-9 * full[0]);
    }

    #[test]
    fn eigenvalues_outside_the_window_do_not_matter(
        inside in prop::collection::vec(-0.99f64..0.99, 1..10),
        outside in prop::collection::vec(1.06f64..5.0, 1..10),
        moved in prop::collection::vec(1.06f64..5.0, 1..10),
        gamma in -2.0f64..2.0,
        eta0 in 0.05f64..1.0,
    ) {
        let build = |far: &[f64]| {
            let mut v: Vec<f64> = inside.iter().map(|u| gamma + u * eta0).collect();
            v.extend(far.iter().enumerate().map(|(i, &d)| gamma + (if i % 2 == 0 { d } else { -d }) * eta0));
            Spectrum::from_values(v)
        };
        let a = local_statistic(&build(&outside), gamma, eta0).unwrap();
        let b = local_statistic(&build(&moved), gamma, eta0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn stieltjes_map_is_conjugate_symmetric(re in -2.0f64..10.0, im in 1e-3f64..3.0, phi in 2.0f64..200.0) {
        let pop = PopulationSpectrum::new(vec![0.5, 1.0, 1.0, 2.0]).unwrap();
        let z = Complex64::new(re, im);
        let m = stieltjes_fixed_point(z, &pop, phi).unwrap();
        let mc = stieltjes_fixed_point(z.conj(), &pop, phi).unwrap();
        prop_assert!(m.im > 0.0);
        prop_assert!((mc - m.conj()).norm() <= 1e-9 * m.norm().max(1.0));
    }

    #[test]
    fn split_indices_are_disjoint_and_reproducible(n1 in 20usize..60, n2 in 20usize..60, seed in any::<u64>()) {
        let n = 5;
        let x = DataMatrix::new(n1, 2, vec![0.0; n1 * 2]).unwrap();
        let y = DataMatrix::new(n2, 2, vec![0.0; n2 * 2]).unwrap();
        let a = split_once(&x, &y, n, &mut rng_for(seed, Stream::Split, 3)).unwrap();
        let b = split_once(&x, &y, n, &mut rng_for(seed, Stream::Split, 3)).unwrap();
        prop_assert_eq!(&a, &b);
        let parent = if a.z_source == Sample::X { &a.x_indices } else { &a.y_indices };
        prop_assert!(a.z_indices.iter().all(|i| !parent.contains(i)));
        prop_assert_eq!(a.z_source == Sample::X, n1 >= n2);
        for set in [&a.x_indices, &a.y_indices, &a.z_indices] {
            let mut s = set.clone();
            s.sort_unstable();
            s.dedup();
            prop_assert_eq!(s.len(), n);
        }
    }

    #[test]
    fn order_statistic_is_monotone_in_level(mut xs in prop::collection::vec(0.0f64..1.0, 1..200), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(upper_order_statistic(&xs, lo) <= upper_order_statistic(&xs, hi));
        xs.sort_by(f64::total_cmp);
        prop_assert!(xs.contains(&upper_order_statistic(&xs, hi)));
    }

    #[test]
    fn thresholds_are_probabilities(k in 1usize..3000, alpha in 0.001f64..0.5) {
        for mode in [ThresholdMode::Binomial, ThresholdMode::Gaussian] {
            let t = dr_threshold(k, alpha, mode);
            prop_assert!(t >= 0.0 && t.is_finite());
        }
        prop_assert!(dr_threshold(k, alpha, ThresholdMode::Binomial) <= 1.0);
    }
}

#[test]
fn kernel_is_even_and_non_increasing_on_the_shoulder() {
    let n = 10_000;
    let mut prev = mollifier(1.0);
    for i in 0..=n {
        let x = 1.0 + (KERNEL_SUPPORT - 1.0) * i as f64 / n as f64;
        let k = mollifier(x);
        assert_eq!(k, mollifier(-x));
        assert!(k <= prev, "increase at {x}");
        prev = k;
    }
    for i in 0..=n {
        let x = -3.0 + 6.0 * i as f64 / n as f64;
        assert_eq!(mollifier(x), mollifier(-x));
    }
}

#[test]
fn decision_ratio_is_a_proportion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draw = |rng: &mut ChaCha8Rng, shift: f64| {
        let v: Vec<f64> = (0..40 * 60).map(|_| shift * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)).collect();
        DataMatrix::new(40, 60, v).unwrap()
    };
    let x = draw(&mut rng, 1.0);
    let y = draw(&mut rng, 1.3);
    let config = TestConfig { k_splits: 40, ..TestConfig::default() };
    let v = variance_constant().unwrap();
    let prepared = prepare_splits(&x, &y, &config).unwrap();
    for theta in [0.05, 0.3, 1.0, 3.0] {
        let e = prepared.evaluate(theta, 0.05, &v).unwrap();
        assert!((0.0..=1.0).contains(&e.dr));
        assert_eq!(e.n_auto_reject + e.n_efficient + e.n_discarded, 40);
    }
}

#[test]
fn auto_reject_only_runs_have_unit_ratio() {
    // Disjoint bulks: every split is an automatic rejection.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut draw = |scale: f64| {
        let v: Vec<f64> = (0..30 * 80).map(|_| scale * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng)).collect();
        DataMatrix::new(30, 80, v).unwrap()
    };
    let x = draw(1.0);
    let y = draw(20.0);
    let config = TestConfig { k_splits: 25, ..TestConfig::default() };
    let v = variance_constant().unwrap();
    let e = prepare_splits(&x, &y, &config).unwrap().evaluate(0.3, 0.05, &v).unwrap();
    assert!(e.records.iter().all(|r| r.class.tag == SplitTag::AutoReject));
    assert_eq!(e.dr, 1.0);
}
