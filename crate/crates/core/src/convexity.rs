//! Strong-convexity scans and rotation-invariance checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::campaign::{random_orthogonal, random_unit};
use crate::error::{Error, Result};
use crate::family::{Domain, MetricFamily};
use crate::point::EvalPoint;
use crate::tensor::FundamentalTensor;

/// Grid of `(z, r)` values to scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityGrid {
    pub z_values: Vec<f64>,
    pub r_values: Vec<f64>,
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![a],
        _ => (0..count)
            .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl ConvexityGrid {
    pub fn uniform(z_range: (f64, f64), z_count: usize, r_range: (f64, f64), r_count: usize) -> Self {
        Self {
            z_values: linspace(z_range.0, z_range.1, z_count),
            r_values: linspace(r_range.0, r_range.1, r_count),
        }
    }

    /// `z ∈ [-50, 50]` (201 values) and `r` across the admissible radii.
    pub fn for_domain(domain: &Domain, r_count: usize) -> Self {
        Self::uniform((-50.0, 50.0), 201, (domain.r_min, 0.99 * domain.rho), r_count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityFailure {
    pub z: f64,
    pub r: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// `Ω > 0`, `Λ > 0` and the family's own constraints hold everywhere.
    pub ok: bool,
    pub points_checked: usize,
    pub min_omega: f64,
    pub min_lambda: f64,
    pub first_failing_r: Option<f64>,
    /// At most [`MAX_LISTED_FAILURES`] entries, smallest `r` first.
    pub failures: Vec<ConvexityFailure>,
    pub failure_count: usize,
    /// Grid points where the positive-definiteness of `g` was tested directly.
    pub hessian_checks: usize,
    /// Whether `g > 0` agreed with `Ω > 0 ∧ Λ > 0` at every tested point.
    pub hessian_agreement: bool,
    /// Largest `|det g - Ω^{n-1}Λ/2^{n+1}| / |det g|` over tested points.
    pub det_identity_max_rel: f64,
}

pub const MAX_LISTED_FAILURES: usize = 20;
const HESSIAN_SAMPLES: usize = 10;

fn omega_lambda(phi: f64, phi_z: f64, phi_zz: f64, z: f64) -> (f64, f64) {
    (2.0 * phi - z * phi_z, 2.0 * phi * phi_zz - phi_z * phi_z)
}

/// Scans `Ω > 0` and `Λ > 0` over the grid, then cross-checks the criterion
/// against eigenvalues of `g` at a few seeded grid points.
pub fn convexity_check(family: &MetricFamily, grid: &ConvexityGrid, n: usize, seed: u64) -> Result<ConvexityReport> {
    if n < 2 {
        return Err(Error::Config("dimension n must be at least 2".into()));
    }
    let mut failures = Vec::new();
    let (mut min_omega, mut min_lambda) = (f64::INFINITY, f64::INFINITY);
    for &r in &grid.r_values {
        for &z in &grid.z_values {
            match family.phi_jet_with_orders(z, r, 2, 0) {
                Ok(phi) => {
                    let (om, lam) = omega_lambda(phi.value(), phi.get(1, 0), phi.get(2, 0), z);
                    min_omega = min_omega.min(om);
                    min_lambda = min_lambda.min(lam);
                    if !(om > 0.0 && lam > 0.0) {
                        failures.push(ConvexityFailure {
                            z,
                            r,
                            reason: format!("Ω = {om:e}, Λ = {lam:e}"),
                        });
                    }
                }
                Err(e) => failures.push(ConvexityFailure {
                    z,
                    r,
                    reason: e.to_string(),
                }),
            }
        }
    }
    failures.sort_by(|a, b| a.r.total_cmp(&b.r).then(a.z.total_cmp(&b.z)));
    let first_failing_r = failures.first().map(|f| f.r);
    let failure_count = failures.len();
    failures.truncate(MAX_LISTED_FAILURES);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hessian_checks = 0;
    let mut agreement = true;
    let mut det_rel: f64 = 0.0;
    if !grid.z_values.is_empty() && !grid.r_values.is_empty() {
        for k in 0..HESSIAN_SAMPLES {
            // Half the probes go to failing points when there are any.
            let (z, r) = if k % 2 == 1 && !failures.is_empty() {
                let f = &failures[rng.random_range(0..failures.len())];
                (f.z, f.r)
            } else {
                (
                    grid.z_values[rng.random_range(0..grid.z_values.len())],
                    grid.r_values[rng.random_range(0..grid.r_values.len())],
                )
            };
            let Ok(phi) = family.phi_jet_unguarded(z, r, 2, 0) else {
                continue;
            };
            let (p0, p1, p2) = (phi.value(), phi.get(1, 0), phi.get(2, 0));
            let (om, lam) = omega_lambda(p0, p1, p2, z);
            let mut xbar = vec![0.0; n];
            xbar[0] = r;
            let p = EvalPoint::new(0.0, xbar, z, random_unit(&mut rng, n))?;
            let ft = FundamentalTensor::from_phi_values(p0, p1, p2, &p);
            let pd = ft.eigenvalues().first().is_some_and(|&e| e > 0.0);
            if pd != (om > 0.0 && lam > 0.0) {
                agreement = false;
            }
            if ft.det != 0.0 {
                det_rel = det_rel.max((ft.det - ft.det_closed).abs() / ft.det.abs());
            }
            hessian_checks += 1;
        }
    }

    Ok(ConvexityReport {
        ok: failure_count == 0,
        points_checked: grid.z_values.len() * grid.r_values.len(),
        min_omega,
        min_lambda,
        first_failing_r,
        failures,
        failure_count,
        hessian_checks,
        hessian_agreement: agreement,
        det_identity_max_rel: det_rel,
    })
}

/// Largest `|F(Ox, Oy) - F(x, y)| / F(x, y)` over random points and random
/// orthogonal `O` acting on `x̄` and `ȳ`.
pub fn rotation_invariance_check(family: &MetricFamily, n: usize, trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = family.domain();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let r = rng.random_range(d.r_min..0.95 * d.rho);
        let xbar: Vec<f64> = random_unit(&mut rng, n).into_iter().map(|v| v * r).collect();
        let ybar: Vec<f64> = random_unit(&mut rng, n).into_iter().map(|v| v * rng.random_range(0.5..2.0)).collect();
        let p = EvalPoint::new(rng.random_range(-1.0..1.0), xbar, rng.random_range(-1.5..1.5), ybar)?;
        let q = p.transform_bar(&random_orthogonal(&mut rng, n));
        let (f, g) = (family.finsler(&p)?, family.finsler(&q)?);
        worst = worst.max((f - g).abs() / f);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilySpec;

    #[test]
    fn presets_are_convex() {
        for name in ["flat", "example-1", "example-2", "example-3", "example-5", "randers", "perturbed"] {
            let fam = MetricFamily::preset(name).unwrap();
            let grid = ConvexityGrid::for_domain(&fam.domain(), 12);
            let rep = convexity_check(&fam, &grid, 3, 7).unwrap();
            assert!(rep.ok, "{name}: {:?}", rep.failures.first());
            assert!(rep.hessian_agreement, "{name}");
            let near = ConvexityGrid::uniform((-3.0, 3.0), 31, (0.05, 0.95), 12);
            let rep = convexity_check(&fam, &near, 3, 7).unwrap();
            assert!(rep.det_identity_max_rel < 1e-10, "{name} {}", rep.det_identity_max_rel);
        }
    }

    #[test]
    fn randers_violation_has_negative_eigenvalue() {
        // b² > f²g for r > 0.5.
        let spec = FamilySpec::Randers {
            f: "1".into(),
            g: "1".into(),
            b: "2*r".into(),
        };
        let fam = MetricFamily::from_spec(&spec, Domain::default()).unwrap();
        let grid = ConvexityGrid::uniform((-20.0, 20.0), 81, (0.1, 0.9), 17);
        let rep = convexity_check(&fam, &grid, 2, 1).unwrap();
        assert!(!rep.ok);
        let r = rep.first_failing_r.unwrap();
        assert!((0.45..=0.55).contains(&r), "{r}");
        assert!(rep.hessian_agreement);

        // A point with Φ < 0 has an indefinite g.
        let phi = fam.phi_jet_unguarded(-10.0, 0.9, 2, 0).unwrap();
        let p = EvalPoint::new(0.0, vec![0.9, 0.0], -10.0, vec![1.0, 0.0]).unwrap();
        let ft = FundamentalTensor::from_phi_values(phi.value(), phi.get(1, 0), phi.get(2, 0), &p);
        assert!(ft.eigenvalues()[0] <= 0.0);
    }

    #[test]
    fn presets_are_rotation_invariant() {
        for name in ["example-2", "randers", "perturbed"] {
            let fam = MetricFamily::preset(name).unwrap();
            assert!(rotation_invariance_check(&fam, 3, 20, 5).unwrap() < 1e-12);
        }
    }
}
