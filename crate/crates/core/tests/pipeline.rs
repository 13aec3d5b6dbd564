use dsw_core::elliptic::{complete_elliptic_k, Modulus};
use dsw_core::evolution::{random_smooth_data, simulate, SimOptions};
use dsw_core::hill::{classify_theta, integrate_hill_ivp};
use dsw_core::index::{assemble_dmatrix, hamiltonian_index};
use dsw_core::normal_form::{normal_form_t, symbol, TrigPolynomial};
use dsw_core::spectra::{assemble, morse_index, unstable_modes, OperatorKind};
use dsw_core::wave::{params_from_kappa, params_from_speed};
use dsw_core::Error;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn theta_sign_matches_collocation_morse_count() {
    for (l, k) in [(2.0, 0.3), (4.0, 0.7), (10.0, 0.2)] {
        let p = params_from_kappa(l, k).unwrap();
        let from_theta = classify_theta(integrate_hill_ivp(&p, 1e-12).unwrap().theta).unwrap();
        let m = morse_index(&assemble(OperatorKind::Lplus, &p, 256).unwrap(), None).unwrap();
        assert_eq!(from_theta.n_minus, m.n_neg, "L={l} κ={k}");
        assert_eq!(m.n_zero, 1);
    }
}

#[test]
fn spectrum_and_quadrature_agree_on_negative_directions() {
    let p = params_from_kappa(2.0, 0.5).unwrap();
    let d = assemble_dmatrix(&p).unwrap();
    let r = unstable_modes(&p, 256, Some(&d)).unwrap();
    assert_eq!(r.k_ham(), r.n_h.saturating_sub(d.n_negative));
    assert_eq!(r.count_identity_measured(), Some(true));
    assert!(hamiltonian_index(&d).is_ok());
}

#[test]
fn speed_and_modulus_parametrizations_agree() {
    let a = params_from_kappa(4.0, 0.6).unwrap();
    let b = params_from_speed(4.0, a.c).unwrap();
    assert!((b.kappa.value() - 0.6).abs() < 1e-10);
    assert!((b.alpha - a.alpha).abs() < 1e-9 * a.alpha);
    let k = complete_elliptic_k(Modulus::new(0.6).unwrap());
    assert!((a.alpha - 2.0 * k / 4.0).abs() < 1e-12);
}

#[test]
fn random_data_conserves_invariants_and_halving_dt_helps() {
    let (u, v) = random_smooth_data(2.0 * std::f64::consts::PI, 64, 3, 11).unwrap();
    let opts = SimOptions { sample_every: 1, ..SimOptions::default() };
    let coarse = simulate(&u, &v, 0.2, 4e-3, opts).unwrap();
    let fine = simulate(&u, &v, 0.2, 2e-3, opts).unwrap();
    for q in 0..4 {
        assert!(fine.max_drift[q] < 1e-8, "{:?}", fine.max_drift);
    }
    assert!(fine.max_drift[2] < coarse.max_drift[2]);
    assert!(fine.max_drift[1] < 1e-14);
}

#[test]
fn normal_form_rejects_mean_in_second_argument() {
    let f = TrigPolynomial::mode(1, Complex64::new(1.0, 0.0));
    let g = TrigPolynomial::from_terms([(0, Complex64::new(1.0, 0.0)), (2, Complex64::new(0.5, 0.0))]);
    assert!(matches!(normal_form_t(&f, &g), Err(Error::MeanZero(_))));
    assert!(normal_form_t(&f, &g.without_mean()).is_ok());
}

proptest! {
    #[test]
    fn symbol_is_symmetric_under_sign_flip(k1 in -40i64..40, k2 in 1i64..40) {
        prop_assert!((symbol(k1, k2) - symbol(-k1, -k2)).abs() < 1e-15);
        prop_assert!(symbol(k1, k2) < 0.0);
    }

    #[test]
    fn real_inputs_give_real_output(a in -1.0f64..1.0, b in -1.0f64..1.0, k1 in 1i64..10, k2 in 1i64..10) {
        let f = TrigPolynomial::from_terms([(k1, Complex64::new(a, 0.3)), (-k1, Complex64::new(a, -0.3))]);
        let g = TrigPolynomial::from_terms([(k2, Complex64::new(b, -0.7)), (-k2, Complex64::new(b, 0.7))]);
        let out = normal_form_t(&f, &g).unwrap();
        prop_assert!(out.is_hermitian(1e-12));
    }
}

#[test]
fn det_d_scales_as_fifth_power_of_period() {
    for k in [0.2, 0.4, 0.8] {
        let base = assemble_dmatrix(&params_from_kappa(1.0, k).unwrap()).unwrap().det;
        for l in [2.0, 4.0] {
            let det = assemble_dmatrix(&params_from_kappa(l, k).unwrap()).unwrap().det;
            let ratio = det / base;
            assert!((ratio / f64::powi(l, 5) - 1.0).abs() < 1e-6, "κ={k} L={l}: {ratio}");
        }
    }
}
