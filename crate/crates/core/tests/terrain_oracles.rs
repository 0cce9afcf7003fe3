mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wetmap::terrain::*;
use wetmap::{GeoTransform, Raster, NODATA};

/// Samples `f` at cell centres of a grid centred on the origin.
fn sample(rows: usize, cols: usize, dx: f64, dy: f64, f: impl Fn(f64, f64) -> f64) -> Raster {
    let t = GeoTransform::new(-(cols as f64) * dx / 2.0, rows as f64 * dy / 2.0, dx, dy).unwrap();
    let mut r = Raster::filled(rows, cols, t, 0.0);
    for row in 0..rows {
        for col in 0..cols {
            let p = r.cell_center(row, col).unwrap();
            r.set(row, col, f(p.x, p.y));
        }
    }
    r
}

/// z = a x² + b x y + c y² + d x + e y + f
#[derive(Debug, Clone, Copy)]
struct Quadratic([f64; 6]);

impl Quadratic {
    fn z(&self, x: f64, y: f64) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * x * x + b * x * y + c * y * y + d * x + e * y + f
    }

    /// Analytic (p, q, r, s, t).
    fn derivs(&self, x: f64, y: f64) -> (f64, f64, f64, f64, f64) {
        let [a, b, c, d, e, _] = self.0;
        (
            2.0 * a * x + b * y + d,
            b * x + 2.0 * c * y + e,
            2.0 * a,
            b,
            2.0 * c,
        )
    }
}

fn random_quadratic(rng: &mut impl Rng) -> Quadratic {
    let mut c = [0.0; 6];
    for v in c.iter_mut().take(3) {
        *v = rng.random_range(-0.01..0.01);
    }
    c[3] = rng.random_range(-1.0..1.0);
    c[4] = rng.random_range(-1.0..1.0);
    c[5] = rng.random_range(0.0..500.0);
    Quadratic(c)
}

/// Second directional derivative of z along the unit gradient, divided by the
/// arc-length factor: the analytic profile curvature.
fn analytic_profile(p: f64, q: f64, r: f64, s: f64, t: f64) -> f64 {
    let g2 = p * p + q * q;
    let (ux, uy) = (p / g2.sqrt(), q / g2.sqrt());
    let d2 = ux * ux * r + 2.0 * ux * uy * s + uy * uy * t;
    d2 / (1.0 + g2).powf(1.5)
}

/// Curvature of the contour line through the point, from the implicit-curve
/// formula, signed so that contours bending around a low point are positive.
fn analytic_plan(p: f64, q: f64, r: f64, s: f64, t: f64) -> f64 {
    let g2 = p * p + q * q;
    // Second derivative along the unit contour tangent (-q, p)/|g|.
    let (tx, ty) = (-q / g2.sqrt(), p / g2.sqrt());
    (tx * tx * r + 2.0 * tx * ty * s + ty * ty * t) / g2.sqrt()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn derivatives_match_closed_forms_on_quadratics() {
    let mut rng = rng(31);
    for _ in 0..200 {
        let quad = random_quadratic(&mut rng);
        let (dx, dy) = (rng.random_range(5.0..40.0), rng.random_range(5.0..40.0));
        let dem = sample(9, 11, dx, dy, |x, y| quad.z(x, y));
        let (sl, plan, prof) = (slope(&dem), plan_curvature(&dem), profile_curvature(&dem));
        for row in 1..8 {
            for col in 1..10 {
                let c = dem.cell_center(row, col).unwrap();
                let (p, q, r, s, t) = quad.derivs(c.x, c.y);
                let fit = surface_fit(&dem, row, col).unwrap().unwrap();
                assert!(close(fit.p, p, 1e-9) && close(fit.q, q, 1e-9));
                assert!(close(fit.r, r, 1e-9) && close(fit.s, s, 1e-9) && close(fit.t, t, 1e-9));
                let g = (p * p + q * q).sqrt();
                assert!(close(sl.get(row, col).unwrap(), g.atan(), 1e-9));
                if g > 1e-3 {
                    assert!(close(
                        plan.get(row, col).unwrap(),
                        analytic_plan(p, q, r, s, t),
                        1e-9
                    ));
                    assert!(close(
                        prof.get(row, col).unwrap(),
                        analytic_profile(p, q, r, s, t),
                        1e-9
                    ));
                }
            }
        }
    }
}

#[test]
fn planes_have_zero_curvature_and_exact_slope() {
    let mut rng = rng(32);
    for _ in 0..100 {
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let dem = sample(7, 7, 30.0, 30.0, |x, y| a * x + b * y + 100.0);
        let expected = (a * a + b * b).sqrt().atan();
        for i in 0..dem.len() {
            if let Some(s) = slope(&dem).at(i) {
                assert!((s - expected).abs() < 1e-9);
                assert!(plan_curvature(&dem).at(i).unwrap().abs() < 1e-9);
                assert!(profile_curvature(&dem).at(i).unwrap().abs() < 1e-9);
            }
        }
    }
}

#[test]
fn bowl_and_dome_signs() {
    let bowl = sample(11, 11, 10.0, 10.0, |x, y| 0.01 * (x * x + y * y));
    let dome = sample(11, 11, 10.0, 10.0, |x, y| -0.01 * (x * x + y * y));
    for (row, col) in [(2, 5), (5, 8), (3, 3), (8, 7)] {
        assert!(plan_curvature(&bowl).get(row, col).unwrap() > 0.0);
        assert!(profile_curvature(&bowl).get(row, col).unwrap() > 0.0);
        assert!(plan_curvature(&dome).get(row, col).unwrap() < 0.0);
        assert!(profile_curvature(&dome).get(row, col).unwrap() < 0.0);
    }
}

#[test]
fn tpi_matches_disk_enumeration() {
    let mut rng = rng(33);
    for case in 0..20 {
        let dem = random_dem(&mut rng, 40, 40, if case % 2 == 0 { 0.05 } else { 0.0 });
        for radius in [30.0, 75.0, 500.0] {
            let fast = tpi(&dem, radius).unwrap();
            let oracle = brute_tpi(&dem, radius);
            for i in 0..dem.len() {
                match (fast.at(i), oracle[i]) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
                    (a, b) => assert_eq!(a, b),
                }
            }
        }
    }
}

#[test]
fn constant_raster_gives_neutral_outputs() {
    let dem = sample(12, 12, 30.0, 30.0, |_, _| 321.5);
    assert!(tpi(&dem, 500.0).unwrap().values().iter().all(|&v| v == 0.0));
    for i in 0..dem.len() {
        if let Some(s) = slope(&dem).at(i) {
            assert_eq!(s, 0.0);
            assert_eq!(plan_curvature(&dem).at(i), Some(0.0));
            assert_eq!(profile_curvature(&dem).at(i), Some(0.0));
            assert_eq!(aspect(&dem).at(i), None);
        }
    }
}

fn rough(seed: u64) -> Raster {
    let mut rng = rng(seed);
    let dem = random_dem(&mut rng, 16, 16, 0.0);
    // Add a tilt so no window is flat.
    let t = *dem.transform();
    let values = (0..dem.len())
        .map(|i| dem.values()[i] + 0.37 * (i % 16) as f64 + 0.11 * (i / 16) as f64)
        .collect();
    Raster::new(16, 16, t, values, NODATA).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn shift_invariance(seed in 0u64..10_000, shift in -500.0f64..500.0) {
        let dem = rough(seed);
        let shifted = dem.derive(dem.values().iter().map(|v| v + shift).collect());
        for (a, b) in [
            (slope(&dem), slope(&shifted)),
            (aspect(&dem), aspect(&shifted)),
            (plan_curvature(&dem), plan_curvature(&shifted)),
            (profile_curvature(&dem), profile_curvature(&shifted)),
            (tpi(&dem, 90.0).unwrap(), tpi(&shifted, 90.0).unwrap()),
            (convergence_index(&aspect(&dem)), convergence_index(&aspect(&shifted))),
        ] {
            for i in 0..dem.len() {
                match (a.at(i), b.at(i)) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-6 * (1.0 + x.abs())),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }
    }

    #[test]
    fn scaling_scales_tpi_and_keeps_aspect(seed in 0u64..10_000, lambda in 0.1f64..10.0) {
        let dem = rough(seed);
        let scaled = dem.derive(dem.values().iter().map(|v| v * lambda).collect());
        let (t0, t1) = (tpi(&dem, 90.0).unwrap(), tpi(&scaled, 90.0).unwrap());
        let (a0, a1) = (aspect(&dem), aspect(&scaled));
        for i in 0..dem.len() {
            let (x, y) = (t0.at(i).unwrap(), t1.at(i).unwrap());
            prop_assert!((x * lambda - y).abs() < 1e-9 * (1.0 + y.abs()));
            if let (Some(x), Some(y)) = (a0.at(i), a1.at(i)) {
                let d = (x - y).abs();
                prop_assert!(d.min(360.0 - d) < 1e-9);
            }
        }
    }

    #[test]
    fn ci_is_bounded(seed in 0u64..10_000) {
        let ci = convergence_index(&aspect(&rough(seed)));
        for v in ci.values().iter().filter(|&&v| v != NODATA) {
            prop_assert!((-100.0..=100.0).contains(v));
        }
    }

    #[test]
    fn aspect_in_range(seed in 0u64..10_000) {
        let a = aspect(&rough(seed));
        for v in a.values().iter().filter(|&&v| v != NODATA) {
            prop_assert!((0.0..360.0).contains(v));
        }
    }
}

#[test]
fn twi_monotonicity_on_random_pairs() {
    let mut rng = rng(34);
    for _ in 0..1000 {
        let acc = rng.random_range(1.0..1e5);
        let beta = rng.random_range(0.0..1.5);
        let a = acc * 30.0;
        let base = twi_value(a, beta);
        assert!(base.is_finite());
        assert!(twi_value(a * 1.5, beta) > base);
        assert!((twi_value(2.0 * a, beta) - base - 2f64.ln()).abs() < 1e-12);
        let steeper = beta + rng.random_range(0.001..0.05);
        if beta.tan() > TWI_TAN_FLOOR {
            assert!(twi_value(a, steeper) < base);
        } else {
            assert!(twi_value(a, steeper) <= base);
        }
    }
}
