//! Derived scalars, fundamental tensor and geodesic spray.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MetricFamily;
use crate::jet::{Jet, R_MAX, Z_MAX};
use crate::point::EvalPoint;

/// Threshold below which `Ω` or `Λ` counts as vanishing.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Jets of the scalars every curvature formula is written in.
///
/// From `φ` at orders `(6, 2)`: `Ω` and `Λ` at `(5, 2)` and `(4, 2)`,
/// `U`, `V` at `(4, 1)`, `W` at `(5, 1)`, and the Douglas (`R`, `T`) and
/// Berwald (`E`, `H`) combinations at `(3, 1)`.
#[derive(Debug, Clone)]
pub struct DerivedScalars {
    pub n: usize,
    pub z: f64,
    pub r: f64,
    pub phi: Jet,
    pub omega: Jet,
    pub lambda: Jet,
    pub u: Jet,
    pub v: Jet,
    pub w: Jet,
    pub douglas_r: Jet,
    pub douglas_t: Jet,
    pub berwald_e: Jet,
    pub berwald_h: Jet,
}

fn guard(which: &'static str, j: &Jet) -> Result<()> {
    if j.value().abs() <= DEGENERACY_EPS || !j.value().is_finite() {
        Err(Error::Degenerate {
            which,
            value: j.value(),
        })
    } else {
        Ok(())
    }
}

impl DerivedScalars {
    pub fn new(family: &MetricFamily, z: f64, r: f64, n: usize) -> Result<Self> {
        Self::with_orders(family, z, r, n, Z_MAX, R_MAX)
    }

    /// Same as [`DerivedScalars::new`] with `φ` expanded to `(nz, nr)`;
    /// requires `nz >= 3` and `nr >= 1`.
    pub fn with_orders(
        family: &MetricFamily,
        z: f64,
        r: f64,
        n: usize,
        nz: usize,
        nr: usize,
    ) -> Result<Self> {
        if nz < 3 || nr < 1 {
            return Err(Error::Config(format!(
                "derived scalars need φ orders of at least (3, 1), got ({nz}, {nr})"
            )));
        }
        Self::from_phi(family.phi_jet_with_orders(z, r, nz, nr)?, n)
    }

    pub fn from_phi(phi: Jet, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("dimension n must be at least 2".into()));
        }
        let (z, r) = (phi.z0(), phi.r0());
        let (nz, nr) = phi.orders();
        let zj = Jet::var_z_with_orders(z, r, nz, nr);
        let two_r = Jet::var_r_with_orders(z, r, nz, nr).scale(2.0);

        let phi_z = phi.dz()?;
        let phi_zz = phi_z.dz()?;
        let phi_r = phi.dr()?;
        let phi_zr = phi_z.dr()?;

        let omega = &phi.scale(2.0) - &(&zj * &phi_z);
        let lambda = &(&phi * &phi_zz).scale(2.0) - &(&phi_z * &phi_z);
        guard("Ω", &omega)?;
        guard("Λ", &lambda)?;

        let two_r_lambda = &two_r * &lambda;
        let u = (&(&phi * &phi_zr).scale(2.0) - &(&phi_z * &phi_r)).div(&two_r_lambda)?;
        let v = (&(&phi_r * &phi_zz) - &(&phi_z * &phi_zr)).div(&two_r_lambda)?;
        let w = phi_r.div(&(&two_r * &omega))?;

        let nf = n as f64;
        let u_z = u.dz()?;
        let douglas_r = &u - &(&zj * &(&u_z + &w.scale(nf - 1.0))).scale(1.0 / (nf + 2.0));
        let douglas_t = (&w.scale(3.0) - &u_z).scale(1.0 / (nf + 2.0));
        let berwald_e = &u + &(&zj * &v);
        let berwald_h = &v + &w;

        Ok(Self {
            n,
            z,
            r,
            phi,
            omega,
            lambda,
            u,
            v,
            w,
            douglas_r,
            douglas_t,
            berwald_e,
            berwald_h,
        })
    }

    /// `Ω_z = φ_z - z φ_zz`.
    pub fn omega_z(&self) -> f64 {
        self.phi.get(1, 0) - self.z * self.phi.get(2, 0)
    }

    pub fn spray_scalars(&self) -> SprayScalars {
        SprayScalars {
            n: self.n,
            u: self.u.value(),
            u_z: self.u.get(1, 0),
            v: self.v.value(),
            w: self.w.value(),
        }
    }
}

/// Derived scalars for the metric at `point`.
pub fn derived_scalars(family: &MetricFamily, point: &EvalPoint) -> Result<DerivedScalars> {
    DerivedScalars::new(family, point.z(), point.r(), point.n())
}

/// The values of `U`, `U_z`, `V`, `W`, enough for the spray and its
/// divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprayScalars {
    pub n: usize,
    pub u: f64,
    pub u_z: f64,
    pub v: f64,
    pub w: f64,
}

impl SprayScalars {
    /// Cheap evaluation from a `(3, 1)` jet of `φ`.
    pub fn compute(family: &MetricFamily, z: f64, r: f64, n: usize) -> Result<Self> {
        Ok(DerivedScalars::with_orders(family, z, r, n, 3, 1)?.spray_scalars())
    }

    /// Geodesic spray coefficients `G^A`.
    pub fn spray(&self, p: &EvalPoint) -> Vec<f64> {
        let (u, xy, z) = (p.u(), p.xy(), p.z());
        let mut g = Vec::with_capacity(p.n() + 1);
        g.push(u * xy * (self.u + z * self.v));
        for (xi, yi) in p.xbar.iter().zip(&p.ybar) {
            g.push(xy * (self.v + self.w) * yi - u * u * self.w * xi);
        }
        g
    }

    /// `∂G^A/∂y^A = u s [U_z + (n + 2) V + (n - 1) W]`.
    pub fn divergence(&self, p: &EvalPoint) -> f64 {
        let nf = self.n as f64;
        p.xy() * (self.u_z + (nf + 2.0) * self.v + (nf - 1.0) * self.w)
    }

    /// Projective representative with vanishing divergence,
    /// `Ĝ^A = G^A - y^A (∂G^B/∂y^B)/(n + 2)`.
    pub fn douglas_spray(&self, p: &EvalPoint) -> Vec<f64> {
        let div = self.divergence(p) / (self.n as f64 + 2.0);
        self.spray(p)
            .into_iter()
            .zip(p.y_full())
            .map(|(g, y)| g - y * div)
            .collect()
    }
}

/// `g_AB = ½ ∂²F²/∂y^A∂y^B` with its closed-form inverse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FundamentalTensor {
    /// `n + 1`.
    pub dim: usize,
    /// Row-major `dim × dim`.
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    /// Determinant of `g` by LU.
    pub det: f64,
    /// `Ω^{n-1} Λ / 2^{n+1}`.
    pub det_closed: f64,
}

impl FundamentalTensor {
    pub fn from_scalars(ds: &DerivedScalars, p: &EvalPoint) -> Self {
        Self::from_phi_values(ds.phi.value(), ds.phi.get(1, 0), ds.phi.get(2, 0), p)
    }

    /// Builds `g` from `φ`, `φ_z`, `φ_zz` at `(z, r)` of `p`, without any
    /// degeneracy guard.
    pub fn from_phi_values(phi: f64, phi_z: f64, phi_zz: f64, p: &EvalPoint) -> Self {
        let n = p.n();
        let dim = n + 1;
        let (u, z) = (p.u(), p.z());
        let om = 2.0 * phi - z * phi_z;
        let om_z = phi_z - z * phi_zz;
        let lam = 2.0 * phi * phi_zz - phi_z * phi_z;

        let mut g = vec![0.0; dim * dim];
        let mut gi = vec![0.0; dim * dim];
        g[0] = 0.5 * phi_zz;
        gi[0] = 2.0 / lam * (om - z * om_z);
        for i in 0..n {
            let yi = p.ybar[i] / u;
            g[i + 1] = 0.5 * om_z * yi;
            g[(i + 1) * dim] = g[i + 1];
            gi[i + 1] = -2.0 / lam * om_z * yi;
            gi[(i + 1) * dim] = gi[i + 1];
            for j in 0..n {
                let yj = p.ybar[j] / u;
                let delta = if i == j { 1.0 } else { 0.0 };
                g[(i + 1) * dim + j + 1] = 0.5 * om * delta - 0.5 * z * om_z * yi * yj;
                gi[(i + 1) * dim + j + 1] = 2.0 / om * delta
                    + 2.0 * phi_z * (phi_z - z * phi_zz) / (om * lam) * yi * yj;
            }
        }
        let det = DMatrix::from_row_slice(dim, dim, &g).lu().determinant();
        let det_closed = om.powi(n as i32 - 1) * lam / 2f64.powi(n as i32 + 1);
        Self {
            dim,
            g,
            ginv: gi,
            det,
            det_closed,
        }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.g[a * self.dim + b]
    }

    pub fn inv(&self, a: usize, b: usize) -> f64 {
        self.ginv[a * self.dim + b]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.g)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn is_positive_definite(&self) -> bool {
        self.matrix().cholesky().is_some()
    }

    /// `max |g · ginv - I|`.
    pub fn inverse_residual(&self) -> f64 {
        let prod = self.matrix() * DMatrix::from_row_slice(self.dim, self.dim, &self.ginv);
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((prod[(a, b)] - target).abs());
            }
        }
        worst
    }
}

pub fn fundamental_tensor(family: &MetricFamily, p: &EvalPoint) -> Result<FundamentalTensor> {
    let ds = DerivedScalars::with_orders(family, p.z(), p.r(), p.n(), 3, 1)?;
    Ok(FundamentalTensor::from_scalars(&ds, p))
}

/// Geodesic spray `G^A` at `p`.
pub fn spray(family: &MetricFamily, p: &EvalPoint) -> Result<Vec<f64>> {
    Ok(SprayScalars::compute(family, p.z(), p.r(), p.n())?.spray(p))
}

/// `Σ_A ∂G^A/∂y^A` at `p`.
pub fn spray_divergence(family: &MetricFamily, p: &EvalPoint) -> Result<f64> {
    Ok(SprayScalars::compute(family, p.z(), p.r(), p.n())?.divergence(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::MetricFamily;
    use approx::assert_relative_eq;

    fn pt() -> EvalPoint {
        EvalPoint::new(0.2, vec![0.3, -0.2, 0.1], 0.7, vec![0.5, 0.4, -0.9]).unwrap()
    }

    #[test]
    fn euclidean_fundamental_tensor_is_identity() {
        let fam = MetricFamily::preset("flat").unwrap();
        let p = pt();
        let ft = fundamental_tensor(&fam, &p).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let id = if a == b { 1.0 } else { 0.0 };
                assert_relative_eq!(ft.get(a, b), id, epsilon = 1e-12);
                assert_relative_eq!(ft.inv(a, b), id, epsilon = 1e-12);
            }
        }
        assert_relative_eq!(ft.det, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_and_determinant_identities() {
        for name in ["example-1", "example-2", "randers", "perturbed", "example-3"] {
            let fam = MetricFamily::preset(name).unwrap();
            let ft = fundamental_tensor(&fam, &pt()).unwrap();
            assert!(ft.inverse_residual() < 1e-12, "{name}");
            assert_relative_eq!(ft.det, ft.det_closed, max_relative = 1e-10);
            assert!(ft.is_positive_definite(), "{name}");
        }
    }

    #[test]
    fn exponential_warp_scalars() {
        // h = e^{r²/2}: U = z/2, V = W = -1/2.
        let fam = MetricFamily::g_family(
            crate::func::ExprFunction::shared("exp(r^2/2)").unwrap(),
            crate::func::ExprFunction::shared("sqrt(t^2+0.5)+0.3*t").unwrap(),
            crate::family::Domain::default(),
        );
        for &(z, r) in &[(0.3, 0.4), (-1.1, 0.7)] {
            let ds = DerivedScalars::new(&fam, z, r, 3).unwrap();
            assert_relative_eq!(ds.u.value(), z / 2.0, epsilon = 1e-12);
            assert_relative_eq!(ds.v.value(), -0.5, epsilon = 1e-12);
            assert_relative_eq!(ds.w.value(), -0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn flat_spray_vanishes() {
        let fam = MetricFamily::preset("flat").unwrap();
        let g = spray(&fam, &pt()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn douglas_spray_is_divergence_free_in_scalars() {
        let fam = MetricFamily::preset("perturbed").unwrap();
        let p = pt();
        let ds = derived_scalars(&fam, &p).unwrap();
        let sc = ds.spray_scalars();
        let s = p.s();
        let u = p.u();
        let hat = sc.douglas_spray(&p);
        assert_relative_eq!(hat[0], u * u * s * ds.douglas_r.value(), max_relative = 1e-12);
        for i in 0..p.n() {
            let expected = u * s * ds.douglas_t.value() * p.ybar[i] - u * u * ds.w.value() * p.xbar[i];
            assert_relative_eq!(hat[i + 1], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let fam = MetricFamily::from_spec(
            &crate::family::FamilySpec::Custom { phi: "1+0*z+0*r".into() },
            crate::family::Domain::default(),
        )
        .unwrap();
        let err = DerivedScalars::new(&fam, 0.1, 0.5, 2).unwrap_err();
        assert!(matches!(err, Error::Degenerate { which: "Λ", .. }));
    }
}
