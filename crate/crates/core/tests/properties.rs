use nalgebra::DMatrix;
use proptest::prelude::*;

use nhsense::conditions::{check_c1, check_c2, check_c3, repair_to_c1, synthesize_balanced_gain};
use nhsense::model::{assemble_generator, build_chain, build_h_p, build_h_x, build_noise_input_map, net_noise};
use nhsense::oracle::BalancedTransform;
use nhsense::params::derive_params;
use nhsense::stability::{analyze, char_poly_coeffs, tridiagonal_char_poly_dn, RouthVerdict};
use nhsense::{SensorParams, TemplateEntry};

fn odd_n() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![3usize, 5, 7])
}

fn params() -> impl Strategy<Value = SensorParams> {
    (odd_n(), 0.2f64..3.0, 0.0f64..1.5, 0.5f64..20.0)
        .prop_map(|(n, j, a, k)| SensorParams::from_hopping(n, j, a, k, 1.0, 1.0).unwrap())
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn params_and_z() -> impl Strategy<Value = (SensorParams, DMatrix<f64>)> {
    (params(), 1usize..4).prop_flat_map(|(p, k)| (Just(p), matrix(p.n_sites, k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derive_params_round_trip(w in 0.1f64..1e3, a in 0.0f64..5.0) {
        let d = derive_params(w, w * a.tanh()).unwrap();
        prop_assert!((d.amp_a - a).abs() < 1e-9 * (1.0 + a));
        prop_assert!((d.hop_j - w / a.cosh()).abs() < 1e-9 * w);
    }

    #[test]
    fn template_entry_at_zero_amp_is_coefficient(c in -10.0f64..10.0, k in -3i32..4) {
        prop_assert_eq!(TemplateEntry::new(c, k).value(0.0), c);
    }

    #[test]
    fn repair_is_idempotent_contraction((p, z) in params_and_z()) {
        let hp = build_h_p(&p);
        let r = repair_to_c1(&z, &hp);
        prop_assert!((repair_to_c1(&r, &hp) - &r).norm() < 1e-10 * (1.0 + z.norm()));
        prop_assert!(r.norm() <= z.norm() * (1.0 + 1e-12));
        prop_assert!(check_c1(&r, &hp, 1e-9).holds);
    }

    #[test]
    fn c3_implies_c1((p, coef) in params().prop_flat_map(|p| (Just(p), matrix(p.n_sites - 2, 2)))) {
        let hp = build_h_p(&p);
        let z = hp.columns(1, p.n_sites - 2) * coef;
        prop_assert!(check_c3(&z, &hp, 1e-9).holds);
        prop_assert!(check_c1(&z, &hp, 1e-9).holds);
    }

    #[test]
    fn balanced_gain_cancels_net_noise((_p, z) in params_and_z()) {
        let y = synthesize_balanced_gain(&z);
        prop_assert!(check_c2(&y, &z, 1e-12).holds);
        prop_assert_eq!(net_noise(&z, &y).unwrap().amax(), 0.0);
    }

    #[test]
    fn generator_block_structure((p, z) in params_and_z(), eps in -1.0f64..1.0) {
        let n = p.n_sites;
        let y = DMatrix::zeros(n, 0);
        let m = assemble_generator(&p, &z, &y, eps).unwrap().to_matrix();
        let w = net_noise(&z, &y).unwrap();
        prop_assert_eq!(m.view((0, 0), (n, n)).into_owned(), build_h_x(&p) + &w);
        prop_assert_eq!(m.view((n, n), (n, n)).into_owned(), build_h_p(&p) + &w);
        let mut off = m.view((0, n), (n, n)).into_owned();
        prop_assert_eq!(off[(n - 1, n - 1)], eps);
        off[(n - 1, n - 1)] = 0.0;
        prop_assert_eq!(off.amax(), 0.0);
        let mut off = m.view((n, 0), (n, n)).into_owned();
        prop_assert_eq!(off[(n - 1, n - 1)], -eps);
        off[(n - 1, n - 1)] = 0.0;
        prop_assert_eq!(off.amax(), 0.0);
    }

    #[test]
    fn noise_map_covariance((p, z) in params_and_z(), gy in 0usize..3) {
        let n = p.n_sites;
        let y = z.columns(0, gy.min(z.ncols())).into_owned() * 0.5;
        let map = build_noise_input_map(&p, &z, &y).unwrap();
        prop_assert_eq!(map.channels(), 2 + 2 * (y.ncols() + z.ncols()));
        let llt = &map.matrix * map.matrix.transpose();
        let mut expect = (&y * y.transpose() + &z * z.transpose()) * 2.0;
        expect[(0, 0)] += p.kappa;
        let tol = 1e-12 * (1.0 + expect.amax());
        prop_assert!((llt.view((0, 0), (n, n)) - &expect).amax() < tol);
        prop_assert!((llt.view((n, n), (n, n)) - &expect).amax() < tol);
        // each bath drives X and P through separate channels
        prop_assert_eq!(llt.view((0, n), (n, n)).amax(), 0.0);
    }

    #[test]
    fn routh_agrees_with_spectrum(n in 2usize..7, seed in matrix(6, 6), shift in -1.5f64..1.5) {
        let mut m = seed.view((0, 0), (n, n)).into_owned();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let r = analyze(&m, 1e-9).unwrap();
        prop_assume!(r.spectral_abscissa.abs() > 1e-3);
        prop_assert!(r.routh_verdict != RouthVerdict::Skipped);
        prop_assert!(r.consistent(), "{:?}", r);
    }

    #[test]
    fn balanced_similarity(n in odd_n(), j in 0.2f64..3.0, a in 0.0f64..2.0, k in 0.5f64..20.0) {
        let h0 = build_chain(n, k, j, 0.0);
        let t = BalancedTransform::new(n, a);
        let tol = 1e-12 * j * (2.0 * a).exp();
        prop_assert!((t.conjugate(&h0) - build_chain(n, k, j, a)).amax() < tol);
        prop_assert!((t.conjugate_inv(&h0) - build_chain(n, k, j, -a)).amax() < tol);
    }

    #[test]
    fn undamped_chain_char_poly(n in 1usize..10, j in 0.2f64..2.0) {
        let c = char_poly_coeffs(&build_chain(n, 0.0, j, 0.0));
        let d = tridiagonal_char_poly_dn(n, j);
        let scale = (1.0 + j * j).powi(n as i32);
        for (a, b) in c.iter().zip(&d) {
            prop_assert!((a - b).abs() < 1e-10 * scale, "{:?} vs {:?}", c, d);
        }
    }
}
