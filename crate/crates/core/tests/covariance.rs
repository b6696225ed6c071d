use ppr_core::covariance::{
    correlation_matrix, effect_covariance, sd_profile, spd_solve, CovarianceSpec, Matrix,
    SdProfile,
};
use ppr_core::error::PprError;
use ppr_core::weights::TimeGrid;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn equal(m: usize) -> TimeGrid {
    TimeGrid::equal_spaced(m).unwrap()
}

mod matrices {
    use super::*;

    #[test]
    fn from_rows_validates() {
        assert!(Matrix::from_rows(vec![]).is_err());
        assert!(Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Matrix::from_rows(vec![vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.get(1, 0), 3.0);
    }

    #[test]
    fn cholesky_small_anchor() {
        let a = Matrix::from_rows(vec![vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let l = a.cholesky().unwrap();
        assert_eq!(l.get(0, 0), 2.0);
        assert_eq!(l.get(1, 0), 1.0);
        assert_eq!(l.get(1, 1), 2.0);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn cholesky_reports_the_failing_minor() {
        // third leading minor of equal correlation -0.6 goes negative
        let mut a = Matrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                a.set(i, j, if i == j { 1.0 } else { -0.6 });
            }
        }
        match a.cholesky() {
            Err(PprError::NotPositiveDefinite { minor }) => assert_eq!(minor, 3),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn solve_identity_and_hand_case() {
        let eye = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(spd_solve(&eye, &[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);

        // [[2, 1], [1, 3]] x = [3, 5] has x = [4/5, 7/5]
        let a = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = spd_solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() <= 1e-14);
        assert!((x[1] - 1.4).abs() <= 1e-14);

        assert!(matches!(
            spd_solve(&a, &[1.0]),
            Err(PprError::GridMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn solve_random_spd_residuals_stay_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[3usize, 10, 33, 66] {
            let r: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let mut a = Matrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = if i == j { 0.5 } else { 0.0 };
                    for k in 0..n {
                        s += r[i][k] * r[j][k];
                    }
                    a.set(i, j, s);
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = spd_solve(&a, &b).unwrap();
            for i in 0..n {
                let mut ax = 0.0;
                for j in 0..n {
                    ax += a.get(i, j) * x[j];
                }
                assert!((ax - b[i]).abs() <= 1e-9, "n={n}, row {i}");
            }
        }
    }
}

mod specs {
    use super::*;

    #[test]
    fn parameter_validation() {
        assert!(CovarianceSpec::ar_with_k(0.0, 0.8, 1.0, SdProfile::IndexLinear).is_err());
        assert!(CovarianceSpec::ar_with_k(1.0, 1.0, 1.0, SdProfile::IndexLinear).is_err());
        assert!(CovarianceSpec::ar_with_k(0.6, 1.1, 1.0, SdProfile::IndexLinear).is_err());
        assert!(CovarianceSpec::ar_with_k(0.6, 0.8, 0.0, SdProfile::IndexLinear).is_err());
        let err = CovarianceSpec::ar_with_k(0.9, 0.8, 1.0, SdProfile::IndexLinear).unwrap_err();
        assert!(err.to_string().contains("rho <= k <= 1"));

        assert!(CovarianceSpec::compound_symmetric(0.0, 0.5).is_err());
        assert!(CovarianceSpec::compound_symmetric(1.0, 1.0).is_err());
        assert!(CovarianceSpec::compound_symmetric(1.0, -1.0).is_err());
        assert!(CovarianceSpec::exponential_decay(1.0, 0.0).is_err());
        assert!(CovarianceSpec::exponential_decay(1.0, 1.0).is_err());
        assert!(CovarianceSpec::exponential_decay(-1.0, 0.5).is_err());
    }

    #[test]
    fn unstructured_accepts_fp_noise_and_rejects_real_asymmetry() {
        let near = Matrix::from_rows(vec![
            vec![2.0, 0.5 + 1e-12],
            vec![0.5 - 1e-12, 2.0],
        ])
        .unwrap();
        match CovarianceSpec::unstructured(near).unwrap() {
            CovarianceSpec::Unstructured(sym) => {
                assert_eq!(sym.get(0, 1), sym.get(1, 0));
                assert!((sym.get(0, 1) - 0.5).abs() <= 1e-12);
            }
            other => panic!("unexpected variant {other:?}"),
        }

        let skew =
            Matrix::from_rows(vec![vec![2.0, 0.6], vec![0.4, 2.0]]).unwrap();
        assert!(CovarianceSpec::unstructured(skew).is_err());
    }
}

mod profiles {
    use super::*;

    #[test]
    fn index_linear_interpolates_by_visit_number() {
        let spec =
            CovarianceSpec::ar_with_k(0.6, 0.8, SQRT2, SdProfile::IndexLinear).unwrap();
        let sd = sd_profile(&spec, &equal(5));
        assert_eq!(sd[0], 1.0);
        assert!((sd[2] - (1.0 + (SQRT2 - 1.0) * 0.5)).abs() <= 1e-15);
        assert_eq!(sd[4], SQRT2);
    }

    #[test]
    fn profiles_agree_on_equal_grids_and_split_on_uneven_ones() {
        let by_index =
            CovarianceSpec::ar_with_k(0.6, 0.8, 2.0, SdProfile::IndexLinear).unwrap();
        let by_time =
            CovarianceSpec::ar_with_k(0.6, 0.8, 2.0, SdProfile::TimeLinear).unwrap();
        let g = equal(6);
        for (a, b) in sd_profile(&by_index, &g)
            .iter()
            .zip(sd_profile(&by_time, &g))
        {
            assert!((a - b).abs() <= 1e-15);
        }
        let uneven = TimeGrid::new(vec![0.0, 0.1, 0.9, 1.0]).unwrap();
        let idx = sd_profile(&by_index, &uneven);
        let tim = sd_profile(&by_time, &uneven);
        assert!((idx[1] - (1.0 + 1.0 / 3.0)).abs() <= 1e-15);
        assert!((tim[1] - 1.1).abs() <= 1e-15);
    }

    #[test]
    fn constant_profiles() {
        let cs = CovarianceSpec::compound_symmetric(1.7, 0.4).unwrap();
        assert_eq!(sd_profile(&cs, &equal(4)), vec![1.7; 4]);
        let un = CovarianceSpec::unstructured(
            Matrix::from_rows(vec![vec![4.0, 1.0], vec![1.0, 9.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(sd_profile(&un, &equal(2)), vec![2.0, 3.0]);
    }
}

mod correlations {
    use super::*;

    #[test]
    fn plateau_model_hits_both_named_parameters() {
        let spec =
            CovarianceSpec::ar_with_k(0.6, 0.8, SQRT2, SdProfile::IndexLinear).unwrap();
        let corr = correlation_matrix(&spec, &equal(5)).unwrap();
        // endpoints one unit apart recover rho exactly
        assert!((corr.get(0, 4) - 0.6).abs() <= 1e-15);
        // adjacent visits approach the plateau k
        assert!((corr.get(0, 1) - 0.8 * 0.75f64.powf(0.25)).abs() <= 1e-15);
        for i in 0..5 {
            assert_eq!(corr.get(i, i), 1.0);
            for j in 0..5 {
                assert_eq!(corr.get(i, j), corr.get(j, i));
            }
        }
    }

    #[test]
    fn plateau_at_k_equals_rho_degenerates_to_equal_correlation() {
        let ar = CovarianceSpec::ar_with_k(0.6, 0.6, 1.0, SdProfile::IndexLinear).unwrap();
        let cs = CovarianceSpec::compound_symmetric(1.0, 0.6).unwrap();
        let g = equal(5);
        let a = correlation_matrix(&ar, &g).unwrap();
        let b = correlation_matrix(&cs, &g).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a.get(i, j), b.get(i, j));
            }
        }
    }

    #[test]
    fn exponential_decay_anchor() {
        let spec = CovarianceSpec::exponential_decay(1.0, 0.5).unwrap();
        let corr = correlation_matrix(&spec, &equal(3)).unwrap();
        assert!((corr.get(0, 1) - 0.5f64.sqrt()).abs() <= 1e-15);
        assert_eq!(corr.get(0, 2), 0.5);
    }

    #[test]
    fn unstructured_correlation_normalizes_the_diagonal() {
        let m = Matrix::from_rows(vec![vec![4.0, 3.0], vec![3.0, 9.0]]).unwrap();
        let spec = CovarianceSpec::unstructured(m).unwrap();
        let corr = correlation_matrix(&spec, &equal(2)).unwrap();
        assert_eq!(corr.get(0, 0), 1.0);
        assert_eq!(corr.get(1, 1), 1.0);
        assert!((corr.get(0, 1) - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn rounded_plateau_correlations_match_the_reference_grid() {
        // adjacent / skip-one / skip-two / endpoint correlations on five
        // equally spaced visits, rounded to two decimals
        let cases: [(f64, [f64; 4]); 4] = [
            (0.6, [0.60, 0.60, 0.60, 0.60]),
            (0.7, [0.67, 0.65, 0.62, 0.60]),
            (0.8, [0.74, 0.69, 0.64, 0.60]),
            (0.9, [0.81, 0.73, 0.66, 0.60]),
        ];
        for (k, lags) in cases {
            let spec =
                CovarianceSpec::ar_with_k(0.6, k, SQRT2, SdProfile::IndexLinear).unwrap();
            let corr = correlation_matrix(&spec, &equal(5)).unwrap();
            for (lag, want) in lags.iter().enumerate() {
                let got = corr.get(0, lag + 1);
                assert!(
                    ((got * 100.0).round() / 100.0 - want).abs() <= 1e-12,
                    "k={k}, lag {}: got {got}, want {want}",
                    lag + 1
                );
            }
        }
    }
}

mod effect_matrices {
    use super::*;

    #[test]
    fn matches_frozen_reference_matrix() {
        // rho 0.6, k 0.8, sigma_end sqrt(2), index-linear sd, five visits
        let spec =
            CovarianceSpec::ar_with_k(0.6, 0.8, SQRT2, SdProfile::IndexLinear).unwrap();
        let got = effect_covariance(&spec, &equal(5)).unwrap();
        let want = [
            [
                1.0,
                0.82157771805175828,
                0.83630811007041106,
                0.84503760685996465,
                0.84852813742385702,
            ],
            [
                0.82157771805175828,
                1.2178300858899105,
                0.99173203473204674,
                1.002083867398792,
                1.006223096633496,
            ],
            [
                0.83630811007041106,
                0.99173203473204674,
                1.4571067811865475,
                1.1778530065524668,
                1.1827182715841864,
            ],
            [
                0.84503760685996465,
                1.002083867398792,
                1.1778530065524668,
                1.7178300858899109,
                1.3799406335130184,
            ],
            [
                0.84852813742385702,
                1.006223096633496,
                1.1827182715841864,
                1.3799406335130184,
                2.0000000000000004,
            ],
        ];
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(got.matrix().get(i, j), want[i][j], "({i}, {j})");
            }
        }
    }

    #[test]
    fn symmetry_is_bitwise() {
        let specs = [
            CovarianceSpec::ar_with_k(0.6, 0.9, 5f64.sqrt(), SdProfile::TimeLinear).unwrap(),
            CovarianceSpec::compound_symmetric(1.3, 0.45).unwrap(),
            CovarianceSpec::exponential_decay(2.0, 0.37).unwrap(),
        ];
        let grid = TimeGrid::gauss_legendre_augmented(7).unwrap();
        for spec in &specs {
            let cov = effect_covariance(&spec.clone(), &grid).unwrap();
            for i in 0..7 {
                for j in 0..7 {
                    assert_eq!(cov.matrix().get(i, j), cov.matrix().get(j, i));
                }
            }
        }
    }

    #[test]
    fn non_positive_definite_input_is_refused() {
        let g = equal(4);
        let cs = CovarianceSpec::compound_symmetric(1.0, -0.6).unwrap();
        match effect_covariance(&cs, &g) {
            Err(PprError::NotPositiveDefinite { minor }) => assert_eq!(minor, 3),
            other => panic!("expected failure, got {other:?}"),
        }

        let singular = CovarianceSpec::unstructured(
            Matrix::from_rows(vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ])
            .unwrap(),
        )
        .unwrap();
        match effect_covariance(&singular, &g) {
            Err(PprError::NotPositiveDefinite { minor }) => assert_eq!(minor, 2),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn unstructured_dimension_must_match_the_grid() {
        let m3 = CovarianceSpec::unstructured(
            Matrix::from_rows(vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ])
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(
            effect_covariance(&m3, &equal(4)),
            Err(PprError::GridMismatch {
                expected: 4,
                got: 3
            })
        ));
        assert!(correlation_matrix(&m3, &equal(4)).is_err());
    }

    #[test]
    fn diagonal_carries_the_squared_sd_profile() {
        let spec =
            CovarianceSpec::ar_with_k(0.6, 0.7, 3f64.sqrt(), SdProfile::TimeLinear).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.2, 0.55, 1.0]).unwrap();
        let cov = effect_covariance(&spec, &grid).unwrap();
        let sd = sd_profile(&spec, &grid);
        for i in 0..4 {
            assert_eq!(cov.matrix().get(i, i), sd[i] * sd[i]);
        }
        assert_eq!(cov.grid().points(), grid.points());
    }
}
