use leggett_core::experiment::{interleaved_phi_grid_deg, run_scan, ScanConfig, SCAN_MEAN_PAIRS};
use leggett_core::{CorrelationModel, ScanRow};
use proptest::prelude::*;

fn deg(d: f64) -> f64 {
    d.to_radians()
}

fn scan(phis: &[f64], v: f64, mean_pairs: f64, seed: u64) -> Vec<ScanRow> {
    let cfg = ScanConfig::new(
        phis.iter().map(|&p| deg(p)).collect(),
        CorrelationModel::singlet(v).unwrap(),
        mean_pairs,
        seed,
    );
    run_scan(&cfg).unwrap()
}

#[test]
fn ideal_singlet_within_four_sigma() {
    let phis = interleaved_phi_grid_deg();
    for seed in 0..20 {
        for r in scan(&phis, 1.0, 5e3, seed) {
            let expected = 2.0 * (0.5 * r.phi).cos();
            assert!(
                (r.l_exp.value - expected).abs() <= 4.0 * r.l_exp.sigma,
                "seed {seed}, φ {}: {} vs {expected}",
                r.phi.to_degrees(),
                r.l_exp.value
            );
        }
    }
}

#[test]
fn significance_grows_with_counts() {
    for phi in [20.0, 30.0, -40.0] {
        let sig: Vec<f64> = [1e3, 1e4, 1e5, 1e6]
            .iter()
            .map(|&n| scan(&[phi], 0.984, n, 4)[0].sigmas.unwrap())
            .collect();
        assert!(sig.windows(2).all(|w| w[1] > w[0]), "φ {phi}: {sig:?}");
    }
}

#[test]
fn interleaved_halves_agree() {
    // Two interleaved series at 10° spacing, different seeds, compared
    // through their residuals against the model.
    let grid = interleaved_phi_grid_deg();
    let (a, b) = grid.split_at(12);
    let residual = |rows: Vec<ScanRow>| -> (f64, f64) {
        let z: Vec<f64> = rows.iter().map(|r| (r.l_exp.value - r.l_qm) / r.l_exp.sigma).collect();
        let n = z.len() as f64;
        (z.iter().sum::<f64>() / n, 1.0 / n.sqrt())
    };
    let mut offsets = Vec::new();
    for seed in 0..40u64 {
        let (ma, sa) = residual(scan(a, 0.984, SCAN_MEAN_PAIRS, 1000 + seed));
        let (mb, sb) = residual(scan(b, 0.984, SCAN_MEAN_PAIRS, 5000 + seed));
        offsets.push((ma - mb) / sa.hypot(sb));
    }
    let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
    // Mean of 40 unit normals: standard error ≈ 0.16.
    assert!(mean.abs() < 0.6, "systematic offset {mean}");
}

#[test]
fn scans_are_reproducible() {
    let phis = interleaved_phi_grid_deg();
    assert_eq!(scan(&phis, 0.984, 2e3, 77), scan(&phis, 0.984, 2e3, 77));
    assert_ne!(scan(&phis, 0.984, 2e3, 77), scan(&phis, 0.984, 2e3, 78));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn l_stays_in_range(phi in -170.0f64..170.0, v in 0.0f64..=1.0, n in 10.0f64..1e5, seed in any::<u64>()) {
        for r in scan(&[phi], v, n, seed) {
            prop_assert!((0.0..=2.0).contains(&r.l_exp.value));
            prop_assert!(r.l_exp.sigma >= 0.0);
        }
    }
}
