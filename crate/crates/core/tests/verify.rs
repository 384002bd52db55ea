use susphom::io::{convergence_csv, dilute_csv};
use susphom::verify::{convergence_study, dilute_study, DiluteConfig, StudyConfig};
use susphom::Error;

fn small() -> StudyConfig {
    StudyConfig {
        eps: vec![0.5, 0.25],
        seeds: vec![4, 5],
        h_per_cell: 0.25,
        macro_n: 12,
        ..Default::default()
    }
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-13 * x.abs().max(y.abs()).max(1e-300)
}

#[test]
fn study_is_reproducible_across_worker_counts() {
    let a = convergence_study(&small()).unwrap();
    let again = convergence_study(&small()).unwrap();
    assert_eq!(convergence_csv(&a).render(), convergence_csv(&again).render());
    let b = convergence_study(&StudyConfig { jobs: 2, ..small() }).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!((x.eps, x.seed, x.picard_iterations), (y.eps, y.seed, y.picard_iterations));
        for (p, q) in [
            (x.energy_micro, y.energy_micro),
            (x.energy_star, y.energy_star),
            (x.l2, y.l2),
            (x.h1, y.h1),
            (x.corrected_h1, y.corrected_h1),
            (x.corrector_l2, y.corrector_l2),
        ] {
            assert!(close(p, q), "{p} vs {q}");
        }
    }
    assert_eq!(a.rows.len(), 4);
    assert_eq!(a.metadata.scales.len(), 2);
    // every row shares one homogenized solution
    assert!(a.rows.iter().all(|r| r.energy_star == a.rows[0].energy_star));
    for r in &a.rows {
        assert!((r.energy_gap - (r.energy_micro - r.energy_star).abs()).abs() == 0.0);
        assert!(r.l2 <= r.h1 && r.corrected_h1.is_finite());
    }
    let v = a.verdicts();
    assert_eq!(v.seeds, 2);
    assert_eq!(v.required(), 2);
}

#[test]
fn study_rejects_bad_configs() {
    let r = convergence_study(&StudyConfig { seeds: vec![], ..small() });
    assert!(matches!(r, Err(Error::InvalidInput(_))));
    let r = convergence_study(&StudyConfig { eps: vec![0.25, -1.0], ..small() });
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}

#[test]
fn dilute_study_checks_its_range() {
    let bad = DiluteConfig {
        phis: vec![0.01, 0.1],
        ..Default::default()
    };
    assert!(dilute_study(&bad).is_err());
    let three = DiluteConfig { dim: 3, ..Default::default() };
    assert!(dilute_study(&three).is_err());
}

#[test]
fn coarse_dilute_study_is_consistent() {
    let cfg = DiluteConfig {
        phis: vec![0.01, 0.02],
        h: 1.0 / 16.0,
        ..Default::default()
    };
    let r = dilute_study(&cfg).unwrap();
    assert_eq!(r.rows.len(), 4);
    assert!(r.rows.iter().all(|row| row.shear_excess > 0.0 && row.c_trace > 0.0));
    assert!(r.oracle_slope > 2.0 && r.oracle_slope < 2.3);
    assert!(r.relative_error.is_finite());
    let csv = dilute_csv(&r).render();
    assert_eq!(csv.lines().count(), 2 + 4);
    assert_eq!(dilute_study(&cfg).unwrap(), r);
}
