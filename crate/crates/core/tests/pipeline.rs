use arma_el::classic::{portmanteau, residual_acf, rw_bootstrap_test, PortmanteauKind};
use arma_el::el::{profile_el_test, ElMode};
use arma_el::estimation::{ls_fit, residuals};
use arma_el::model::{simulate, ArmaSpec, DgpConfig, GarchSpec};
use arma_el::stats_util::SeedPath;
use arma_el::Error;

fn series(a: f64, b: f64, c: f64, n: usize, seed: u64) -> Vec<f64> {
    simulate(&DgpConfig {
        arma: ArmaSpec::new(0.0, vec![0.3], vec![0.4]).unwrap(),
        garch: GarchSpec::new(0.2, vec![a], vec![b]).unwrap(),
        c,
        n,
        burn_in: 500,
        seed,
    })
    .unwrap()
    .into_inner()
}

#[test]
fn heavy_tailed_fits_converge() {
    for i in [479u64, 0, 1, 2, 3, 17, 250] {
        let x = series(0.33, 0.66, 0.0, 400, SeedPath::with_path(99, &[i]).seed());
        let fit = ls_fit(&x, 1, 1, None).unwrap();
        assert!(fit.converged, "seed {i}: score {}", fit.score_norm);
        assert!(fit.score_norm < 1e-6 * 400.0);
        assert!(fit.sum_squares <= fit.initial_sum_squares);
    }
}

#[test]
fn constant_series_is_a_degenerate_design() {
    let err = ls_fit(&[3.0; 100], 1, 1, None).unwrap_err();
    assert!(matches!(err, Error::DegenerateDesign), "{err:?}");
}

#[test]
fn every_test_runs_on_one_shared_fit() {
    let x = series(0.1, 0.15, 0.0, 300, 11);
    let fit = ls_fit(&x, 1, 1, None).unwrap();
    let eps = residuals(&fit.theta_hat, &x);
    let acf = residual_acf(&eps, 3).unwrap();
    let bp = portmanteau(&acf, PortmanteauKind::BoxPierce).unwrap();
    let lb = portmanteau(&acf, PortmanteauKind::LjungBox).unwrap();
    assert!(lb.stat >= bp.stat);
    let rw = rw_bootstrap_test(&x, &fit, 3, 200, 5).unwrap();
    for mode in [ElMode::El, ElMode::Wel] {
        let out = profile_el_test(&x, 1, 1, 3, mode, Some(&fit)).unwrap();
        assert!(out.stat >= 0.0 && (0.0..=1.0).contains(&out.p_value));
    }
    assert!((0.0..=1.0).contains(&rw.p_value));
}

#[test]
fn local_alternative_is_mostly_rejected() {
    let rejected = (0..20u64)
        .filter(|&seed| {
            let x = series(0.1, 0.15, 15.0, 400, seed);
            let fit = ls_fit(&x, 1, 1, None).unwrap();
            profile_el_test(&x, 1, 1, 2, ElMode::El, Some(&fit)).unwrap().p_value < 0.05
        })
        .count();
    assert!(rejected >= 12, "{rejected} of 20 rejected");
}
