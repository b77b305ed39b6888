use warpfin::curvature::landsberg_from_scalars;
use warpfin::oracle::{berwald_fd, divergence_fd, douglas_fd, hessian_fd, ricci_fd};
use warpfin::{
    berwald_tensor, derived_scalars, douglas_tensor, preset, ricci_scalar, spray_divergence, CampaignSpec, FdConfig,
    FundamentalTensor, MetricFamily,
};

fn sampled(name: &str, n: usize, count: usize) -> (MetricFamily, Vec<warpfin::EvalPoint>) {
    let spec = CampaignSpec {
        family: preset(name).unwrap(),
        n,
        seed: 21,
        ..CampaignSpec::default()
    };
    let fam = spec.build_family().unwrap();
    (fam, (0..count).map(|i| spec.sample_point(i).unwrap()).collect())
}

#[test]
fn ricci_scalar_matches_finite_differences() {
    let cfg = FdConfig::default();
    for name in ["perturbed", "randers", "ricci-r1", "example-2"] {
        for n in [2, 3] {
            let (fam, pts) = sampled(name, n, 8);
            for p in &pts {
                let closed = ricci_scalar(&fam, p).unwrap();
                let fd = ricci_fd(&fam, p, &cfg).unwrap();
                let scale = closed.abs().max(p.u() * p.u());
                assert!((closed - fd).abs() < 1e-5 * scale, "{name} n={n}: {closed} vs {fd}");
            }
        }
    }
}

#[test]
fn spray_divergence_matches_finite_differences() {
    let cfg = FdConfig::default();
    let (fam, pts) = sampled("perturbed", 3, 10);
    for p in &pts {
        let closed = spray_divergence(&fam, p).unwrap();
        let fd = divergence_fd(&fam, p, &cfg).unwrap();
        assert!((closed - fd).abs() < 1e-6 * closed.abs().max(p.u()), "{closed} vs {fd}");
    }
}

#[test]
fn douglas_family_tensors_match_oracle() {
    let cfg = FdConfig::default();
    for name in ["randers", "example-4", "randers-berwald"] {
        let (fam, pts) = sampled(name, 2, 6);
        for p in &pts {
            let b = berwald_tensor(&fam, p).unwrap();
            let d = douglas_tensor(&fam, p).unwrap();
            let scale = b.sup_norm().max(1.0 / p.u());
            assert!(b.max_abs_diff(&berwald_fd(&fam, p, &cfg).unwrap()) < 1e-5 * scale, "{name}");
            assert!(d.max_abs_diff(&douglas_fd(&fam, p, &cfg).unwrap()) < 1e-5 * scale, "{name}");
        }
    }
}

#[test]
fn hessian_oracle_on_the_gc_construction() {
    let cfg = FdConfig::default();
    for name in ["example-3", "example-5"] {
        let (fam, pts) = sampled(name, 3, 6);
        for p in &pts {
            let ds = derived_scalars(&fam, p).unwrap();
            let g = FundamentalTensor::from_scalars(&ds, p).g;
            let fd = hessian_fd(&fam, p, &cfg).unwrap();
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let dev = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(dev < 1e-6 * scale, "{name}: {dev:e}");
            assert!(landsberg_from_scalars(&ds, p).sup_norm() < 1e-9);
        }
    }
}
