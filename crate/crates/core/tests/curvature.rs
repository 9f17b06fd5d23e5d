use lpgrad_core::counterexample::{remark_surface, RemarkSpec};
use lpgrad_core::curvature::*;
use lpgrad_core::{ConformalSurface, Point};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn constant_factor_is_flat() {
    let s = ConformalSurface::constant(0.4).unwrap();
    // geodesic radius 0.2 is Euclidean radius 0.5
    let exact = PI * 0.04;
    let mut previous = f64::INFINITY;
    for h in [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let c = k_local(&s, Point::ORIGIN, 2.0, 0.2, 0.0, 2, &BallGrid::new(h)).unwrap();
        assert_eq!(c.k, 0.0);
        let err = (c.volume - exact).abs();
        assert!(err < previous, "h = {h}: volume {}", c.volume);
        previous = err;
    }
    assert!(previous <= 0.02 * exact);
}

#[test]
fn levels_shift_the_deficit() {
    let s = ConformalSurface::flat();
    let g = BallGrid::new(1.0 / 32.0);
    let rows = k_local_many(&s, Point::ORIGIN, &[1.0, 2.0], 0.5, &[0.0, 1.0, -1.0], 2, &g).unwrap();
    assert_eq!(rows[0], vec![0.0, 0.0]);
    // ρ_K = K on flat for K > 0, so k = R² K
    for &k in &rows[1] {
        assert!((k - 0.25).abs() < 1e-12);
    }
    assert_eq!(rows[2], vec![0.0, 0.0]);
}

#[test]
fn integral_curvature_is_monotone_in_q() {
    let s = remark_surface(&RemarkSpec::default()).unwrap();
    let g = BallGrid::new(1.0 / 64.0);
    let x = Point::new(4.3, 0.0);
    let rows = k_local_many(&s, x, &[1.0, 2.0, 4.0], 0.5, &[0.0], 2, &g).unwrap();
    let r = &rows[0];
    assert!(r[0] > 0.0);
    assert!(r[0] <= r[1] && r[1] <= r[2], "{r:?}");
}

#[test]
fn stats_collect_every_center() {
    let s = ConformalSurface::flat();
    let centers = [Point::ORIGIN, Point::new(1.0, 0.0)];
    let st = k_global(&s, &centers, 2.0, 0.25, 0.5, 3, &BallGrid::new(1.0 / 32.0)).unwrap();
    assert_eq!(st.per_center.len(), 2);
    // ρ_K = (n - 1) K
    assert!((st.sampled_sup - 0.0625).abs() < 1e-12);
    assert_eq!(st.to_csv().lines().count(), 3);
}

#[test]
fn bad_arguments_are_rejected() {
    let s = ConformalSurface::flat();
    let g = BallGrid::new(1.0 / 16.0);
    assert!(k_local(&s, Point::ORIGIN, 0.5, 0.3, 0.0, 2, &g).is_err());
    assert!(k_local(&s, Point::ORIGIN, 2.0, -0.3, 0.0, 2, &g).is_err());
    assert!(k_local(&s, Point::ORIGIN, 2.0, 0.3, 0.0, 1, &g).is_err());
}

proptest! {
    #[test]
    fn space_form_volume_is_monotone(k in -4.0..1.0f64, r in 0.01..1.5f64, dr in 0.001..0.5f64) {
        let a = space_form_volume(k, r).unwrap();
        let b = space_form_volume(k, r + dr).unwrap();
        prop_assert!(a < b);
        let flatter = space_form_volume(k + 0.1, r).unwrap();
        prop_assert!(flatter <= a);
    }
}
