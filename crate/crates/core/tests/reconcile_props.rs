mod common;

use common::oracle;
use hfts::hierarchy::HierarchySpec;
use hfts::reconcile::{gls_reconcile, BaseForecasts, DispersionMatrix, GlsReconciler};
use hfts::{Curve, Grid, Hierarchy};
use proptest::prelude::*;

fn australia() -> Hierarchy {
    HierarchySpec::star("Australia", &["NSW", "QLD", "SA", "TAS", "VIC"])
        .build()
        .unwrap()
}

fn two_level() -> Hierarchy {
    HierarchySpec::new()
        .node("T", None)
        .node("A", Some("T"))
        .node("B", Some("T"))
        .node("a1", Some("A"))
        .node("a2", Some("A"))
        .node("b1", Some("B"))
        .node("b2", Some("B"))
        .node("b3", Some("B"))
        .build()
        .unwrap()
}

fn dense(h: &Hierarchy) -> Vec<Vec<f64>> {
    h.summing_matrix()
        .to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(f64::from).collect())
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn case() -> impl Strategy<Value = (bool, Vec<f64>, Vec<f64>)> {
    any::<bool>().prop_flat_map(|big| {
        let rows = if big { 8 } else { 6 };
        (
            Just(big),
            prop::collection::vec(-100.0..100.0f64, rows),
            prop::collection::vec(0.01..100.0f64, rows),
        )
    })
}

fn hierarchy(big: bool) -> Hierarchy {
    if big {
        two_level()
    } else {
        australia()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn consistent_forecasts_are_fixed((big, r, w) in case()) {
        let h = hierarchy(big);
        let s = h.summing_matrix();
        let bottom = &r[h.first_leaf()..];
        let consistent = s.aggregate(bottom);
        let rec = GlsReconciler::new(s, &DispersionMatrix::new(w).unwrap()).unwrap();
        for (a, b) in rec.reconcile_point(&consistent).iter().zip(&consistent) {
            prop_assert!(close(*a, *b, 1e-10));
        }
    }

    #[test]
    fn output_is_aggregation_consistent((big, r, w) in case()) {
        let h = hierarchy(big);
        let rec = GlsReconciler::new(h.summing_matrix(), &DispersionMatrix::new(w).unwrap()).unwrap();
        let out = rec.reconcile_point(&r);
        for row in 0..h.first_leaf() {
            let sum: f64 = h.children(row).iter().map(|&c| out[c]).sum();
            prop_assert!(close(out[row], sum, 1e-9));
        }
        let again = rec.reconcile_point(&out);
        for (a, b) in again.iter().zip(&out) {
            prop_assert!(close(*a, *b, 1e-10));
        }
    }

    #[test]
    fn dispersion_scale_does_not_matter((big, r, w) in case(), k in 1e-3..1e3f64) {
        let h = hierarchy(big);
        let w = DispersionMatrix::new(w).unwrap();
        let a = GlsReconciler::new(h.summing_matrix(), &w).unwrap().reconcile_point(&r);
        let b = GlsReconciler::new(h.summing_matrix(), &w.scaled(k).unwrap()).unwrap().reconcile_point(&r);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(close(*x, *y, 1e-12));
        }
    }

    #[test]
    fn matches_dense_normal_equations((big, r, w) in case()) {
        let h = hierarchy(big);
        let want = oracle::gls(&dense(&h), &w, &r);
        let got = GlsReconciler::new(h.summing_matrix(), &DispersionMatrix::new(w).unwrap())
            .unwrap()
            .reconcile_point(&r);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!(close(*a, *b, 1e-10));
        }
    }
}

#[test]
fn curves_are_reconciled_pointwise() {
    let h = australia();
    let grid = Grid::new(23.5, 48).unwrap();
    let base: Vec<Curve> = (0..6)
        .map(|i| Curve::from_fn(grid, |t| (i as f64 + 1.0) * (t / 4.0).sin() + 10.0 * i as f64).unwrap())
        .collect();
    let w = DispersionMatrix::new(vec![4.0, 1.0, 2.0, 0.5, 0.1, 3.0]).unwrap();
    let out = gls_reconcile(&BaseForecasts::new(base.clone()).unwrap(), h.summing_matrix(), &w).unwrap();
    for t in 0..48 {
        let r: Vec<f64> = base.iter().map(|c| c.values()[t]).collect();
        let want = oracle::gls(&dense(&h), w.diagonal(), &r);
        for (c, v) in out.full.iter().zip(&want) {
            assert!(close(c.values()[t], *v, 1e-10));
        }
    }
    assert_eq!(out.bottom.len(), 5);
}
