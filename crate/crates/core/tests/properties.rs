use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;

use warpfin::curvature::{
    berwald_from_scalars, douglas_from_scalars, landsberg_contraction, landsberg_from_scalars,
};
use warpfin::family::Domain;
use warpfin::{
    derived_scalars, douglas_ode_residuals, spray, EvalPoint, Expr, ExprFunction, FamilySpec, FundamentalTensor, Jet,
    MetricFamily, SharedFn,
};

fn shared(src: &str) -> SharedFn {
    ExprFunction::shared(src).unwrap()
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (norm > 0.1).then(|| v.iter().map(|a| a / norm).collect())
}

/// Random `(x, y)` with `r ∈ [0.05, 0.9]` and `|ȳ| ∈ [0.5, 2]`.
fn point(n: usize) -> impl Strategy<Value = EvalPoint> {
    (
        prop::collection::vec(-1.0..1.0f64, n),
        prop::collection::vec(-1.0..1.0f64, n),
        0.05..0.9f64,
        0.5..2.0f64,
        -1.5..1.5f64,
        -1.0..1.0f64,
    )
        .prop_filter_map("degenerate direction", |(xd, yd, r, u, y0, x0)| {
            let xbar = unit(&xd)?.into_iter().map(|v| v * r).collect();
            let ybar = unit(&yd)?.into_iter().map(|v| v * u).collect();
            EvalPoint::new(x0, xbar, y0, ybar).ok()
        })
}

fn orthogonal(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_filter_map("singular", move |a| {
        let m = nalgebra::DMatrix::from_row_slice(n, n, &a);
        if m.determinant().abs() < 1e-3 {
            return None;
        }
        let q = m.qr().q();
        Some((0..n * n).map(|k| q[(k / n, k % n)]).collect())
    })
}

/// Largest difference of Taylor coefficients `∂_z^i ∂_r^j f / (i! j!)`.
fn taylor_diff(a: &Jet, b: &Jet) -> f64 {
    let (nz, nr) = a.orders();
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..=nz {
        for j in 0..=nr {
            worst = worst.max((a.get(i, j) - b.get(i, j)).abs() / (fact(i) * fact(j)));
        }
    }
    worst
}

fn perturbed(amplitude: f64) -> MetricFamily {
    let spec = FamilySpec::Custom {
        phi: format!("(sqrt(z^2+1) + {amplitude}*r^2*sqrt(z^2+4))^2"),
    };
    MetricFamily::from_spec(&spec, Domain::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_division_inverts_multiplication(z in -2.0..2.0f64, r in 0.1..0.9f64) {
        let zj = Jet::var_z(z, r);
        let rj = Jet::var_r(z, r);
        let f = (&zj * &zj + &rj * 3.0).exp().unwrap();
        let g = (&zj * &rj + 2.0).sqrt().unwrap();
        let back = (&f * &g).div(&g).unwrap();
        let zero = Jet::constant(0.0, z, r);
        let size = taylor_diff(&f, &zero);
        let err = taylor_diff(&back, &f);
        prop_assert!(err <= 1e-12 * size, "{err:e} vs {size:e}");
    }

    #[test]
    fn jet_sqrt_squares_back(z in -3.0..3.0f64, r in 0.1..0.9f64) {
        let zj = Jet::var_z(z, r);
        let rj = Jet::var_r(z, r);
        let f = &zj * &zj + &rj * &rj + 0.5;
        let s = f.sqrt().unwrap();
        prop_assert!(taylor_diff(&(&s * &s), &f) < 1e-12);
    }

    #[test]
    fn jet_ln_undoes_exp(z in -1.0..1.0f64, r in 0.1..0.9f64) {
        let zj = Jet::var_z(z, r);
        let rj = Jet::var_r(z, r);
        let f = &zj * &rj + &zj * 0.5;
        let back = f.exp().unwrap().ln().unwrap();
        prop_assert!(taylor_diff(&back, &f) < 1e-12);
    }

    #[test]
    fn univariate_exponential_derivatives(a in -2.0..2.0f64, t in -1.0..1.0f64) {
        let e = Expr::parse(&format!("exp({a}*t)")).unwrap();
        let d = e.derivatives_1d(t, 6).unwrap();
        for (k, v) in d.iter().enumerate() {
            let want = a.powi(k as i32) * (a * t).exp();
            prop_assert!((v - want).abs() <= 1e-12 * want.abs().max(1.0), "k = {k}: {v} vs {want}");
        }
    }

    #[test]
    fn integer_power_matches_repeated_product(t in -2.0..2.0f64) {
        let a = Expr::parse("(1+t^2)^3").unwrap().derivatives_1d(t, 5).unwrap();
        let b = Expr::parse("(1+t*t)*(1+t*t)*(1+t*t)").unwrap().derivatives_1d(t, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_g_families_are_douglas(
        a in 0.2..2.0f64,
        c in -0.5..0.5f64,
        k in 0.1..2.0f64,
        p in point(3),
    ) {
        let fam = MetricFamily::g_family(
            shared(&format!("1+{k}*r^2")),
            shared(&format!("sqrt(t^2+{a})+{c}*t")),
            Domain::default(),
        );
        let ds = derived_scalars(&fam, &p).unwrap();
        let d = douglas_from_scalars(&ds, &p).sup_norm() * p.u();
        prop_assert!(d < 1e-9, "{d}");
        let ode = douglas_ode_residuals(&ds);
        prop_assert!(ode.iter().all(|v| v.abs() < 1e-10), "{ode:?}");
    }

    #[test]
    fn random_randers_families_are_douglas(
        k in 0.0..1.0f64,
        m in 0.0..1.0f64,
        b in 0.05..0.8f64,
        p in point(2),
    ) {
        let fam = MetricFamily::randers(
            shared(&format!("1+{k}*r")),
            shared(&format!("1+{m}*r^2")),
            shared(&format!("{b}")),
            Domain::default(),
        );
        let ds = derived_scalars(&fam, &p).unwrap();
        prop_assert!(douglas_from_scalars(&ds, &p).sup_norm() * p.u() < 1e-9);
    }

    #[test]
    fn finsler_and_spray_are_homogeneous(amp in 0.0..0.8f64, lambda in 0.1..5.0f64, p in point(3)) {
        let fam = perturbed(amp);
        let q = p.scale_y(lambda);
        assert_relative_eq!(fam.finsler(&q).unwrap(), lambda * fam.finsler(&p).unwrap(), max_relative = 1e-13);
        let (g, h) = (spray(&fam, &p).unwrap(), spray(&fam, &q).unwrap());
        let scale = g.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (a, b) in g.iter().zip(&h) {
            prop_assert!((lambda * lambda * a - b).abs() <= 1e-12 * lambda * lambda * scale);
        }
    }

    #[test]
    fn fundamental_tensor_identities(amp in 0.0..0.8f64, p in point(3)) {
        let fam = perturbed(amp);
        let ds = derived_scalars(&fam, &p).unwrap();
        let ft = FundamentalTensor::from_scalars(&ds, &p);
        prop_assert!(ft.is_positive_definite());
        prop_assert!(ft.inverse_residual() < 1e-10);
        prop_assert!((ft.det - ft.det_closed).abs() < 1e-10 * ft.det.abs());
    }

    #[test]
    fn tensors_rotate_with_the_base(amp in 0.1..0.8f64, p in point(3), o in orthogonal(3)) {
        let fam = perturbed(amp);
        let q = p.transform_bar(&o);
        let (dp, dq) = (derived_scalars(&fam, &p).unwrap(), derived_scalars(&fam, &q).unwrap());
        let b = berwald_from_scalars(&dp, &p);
        let scale = b.sup_norm();
        prop_assert!(berwald_from_scalars(&dq, &q).max_abs_diff(&b.rotate_bar(&o)) < 1e-11 * scale);
        let d = douglas_from_scalars(&dp, &p);
        prop_assert!(douglas_from_scalars(&dq, &q).max_abs_diff(&d.rotate_bar(&o)) < 1e-11 * scale);
        let l = landsberg_from_scalars(&dp, &p);
        let lscale = l.sup_norm().max(1e-300);
        prop_assert!(landsberg_from_scalars(&dq, &q).max_abs_diff(&l.rotate_bar(&o)) < 1e-11 * lscale);
    }

    #[test]
    fn tensors_are_symmetric_and_trace_free(amp in 0.1..0.8f64, p in point(3)) {
        let fam = perturbed(amp);
        let ds = derived_scalars(&fam, &p).unwrap();
        let d = douglas_from_scalars(&ds, &p);
        let b = berwald_from_scalars(&ds, &p);
        prop_assert_eq!(d.symmetry_defect(), 0.0);
        prop_assert_eq!(b.symmetry_defect(), 0.0);
        let tr = d.trace().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(tr * p.u() < 1e-9, "{tr}");
    }

    #[test]
    fn landsberg_is_the_berwald_contraction(amp in 0.0..0.8f64, p in point(2)) {
        let fam = perturbed(amp);
        let ds = derived_scalars(&fam, &p).unwrap();
        let b = berwald_from_scalars(&ds, &p);
        let closed = landsberg_from_scalars(&ds, &p);
        let contracted = landsberg_contraction(&ds, &p, &b);
        prop_assert!(closed.max_abs_diff(&contracted) <= 1e-10 * contracted.sup_norm().max(1.0));
    }

    #[test]
    fn berwald_randers_is_landsberg(b in 0.05..0.6f64, p in point(3)) {
        // f²g is constant.
        let fam = MetricFamily::randers(
            shared("1/sqrt(1+r^2)"),
            shared("1+r^2"),
            shared(&format!("{b}")),
            Domain::default(),
        );
        let ds = derived_scalars(&fam, &p).unwrap();
        prop_assert!(berwald_from_scalars(&ds, &p).sup_norm() * p.u() < 1e-9);
        prop_assert!(landsberg_from_scalars(&ds, &p).sup_norm() < 1e-9);
    }
}

#[test]
fn shared_functions_are_reused_across_threads() {
    let f: SharedFn = shared("1+r^2");
    let fam = MetricFamily::g_family(Arc::clone(&f), shared("sqrt(t^2+1)"), Domain::default());
    let p = EvalPoint::new(0.0, vec![0.3, 0.1], 0.4, vec![1.0, 0.2]).unwrap();
    let a = std::thread::scope(|s| s.spawn(|| fam.finsler(&p).unwrap()).join().unwrap());
    assert_eq!(a, fam.finsler(&p).unwrap());
}
