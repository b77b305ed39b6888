//! Metric families `φ(z, r)` and their jets.
//!
//! Every family yields the jet of `φ` at `(z, r)` with all partials up to the
//! requested orders. The Finsler function is `F = |ȳ| √φ(z, r)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::func::{ExprFunction, GcFunction, ScalarFunction1D, SharedFn};
use crate::jet::{Jet, R_MAX, Z_MAX};
use crate::point::EvalPoint;

/// Default `g(r)` for presets whose `g` is an arbitrary positive function.
pub const DEFAULT_G: &str = "1+r^2/4";

/// Serializable family description, as accepted by the CLI and campaign
/// configs. Functions are expressions in one variable (any name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    /// `φ = h(r)⁻² G²(h(r) z)`.
    GFamily {
        h: String,
        #[serde(rename = "G")]
        profile: String,
    },
    /// `φ = (f(r) √(g(r) z² + 1) + b(r) z)²`; `b` is normally constant.
    Randers { f: String, g: String, b: String },
    /// G-family with `h = g` and `G = G_c` built from `kernel` and `c`.
    Gc { kernel: String, c: f64, g: String },
    /// `φ = G(z)²`, projectively flat.
    Flat {
        #[serde(rename = "G")]
        profile: String,
    },
    /// Any `φ(z, r)` as an expression in `z` and `r`.
    Custom { phi: String },
    /// A named preset, see [`preset_names`].
    Preset { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    /// Radius `ρ` of the ball.
    pub rho: f64,
    /// Smallest admissible `r`; every derived scalar divides by `r`.
    pub r_min: f64,
}

impl Domain {
    pub fn new(rho: f64, r_min: Option<f64>) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Config(format!("rho must be positive, got {rho}")));
        }
        let r_min = r_min.unwrap_or(0.05 * rho);
        if !(r_min > 0.0 && r_min < rho) {
            return Err(Error::Config(format!(
                "r_min must lie in (0, rho), got {r_min}"
            )));
        }
        Ok(Self { rho, r_min })
    }

    pub fn check_radius(&self, r: f64) -> Result<()> {
        if r >= self.r_min && r < self.rho {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "r = {r} outside [{}, {})",
                self.r_min, self.rho
            )))
        }
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self {
            rho: 1.0,
            r_min: 0.05,
        }
    }
}

#[derive(Clone)]
enum Kind {
    G { h: SharedFn, profile: SharedFn },
    Randers { f: SharedFn, g: SharedFn, b: SharedFn },
    Gc { g: SharedFn, profile: Arc<GcFunction> },
    Flat { profile: SharedFn },
    Custom { phi: Expr },
}

/// Which structural class a family belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyClass {
    GFamily,
    Randers,
    Gc,
    Flat,
    Custom,
}

/// An immutable, thread-safe metric family.
#[derive(Clone)]
pub struct MetricFamily {
    kind: Kind,
    domain: Domain,
    spec: FamilySpec,
    label: String,
}

impl fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricFamily")
            .field("label", &self.label)
            .field("spec", &self.spec)
            .field("domain", &self.domain)
            .finish()
    }
}

fn positive(name: &str, v: f64, r: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name}(r) = {v:e} must be positive at r = {r}")))
    }
}

fn radial(func: &dyn ScalarFunction1D, z: f64, r: f64, nz: usize, nr: usize) -> Result<Jet> {
    Jet::var_r_with_orders(z, r, nz, nr).compose(&func.derivatives(r, nz + nr)?)
}

/// `φ = h(r)⁻² G²(h(r) z)` with default orders.
pub fn phi_g_family(h: &dyn ScalarFunction1D, profile: &dyn ScalarFunction1D, z: f64, r: f64) -> Result<Jet> {
    g_family_jet(h, profile, z, r, Z_MAX, R_MAX)
}

fn g_family_jet(
    h: &dyn ScalarFunction1D,
    profile: &dyn ScalarFunction1D,
    z: f64,
    r: f64,
    nz: usize,
    nr: usize,
) -> Result<Jet> {
    let hj = radial(h, z, r, nz, nr)?;
    positive("h", hj.value(), r)?;
    let t = &hj * &Jet::var_z_with_orders(z, r, nz, nr);
    let gj = t.compose(&profile.derivatives(t.value(), nz + nr)?)?;
    if !(gj.value() > 0.0) {
        return Err(Error::Domain(format!(
            "G(t) = {:e} must be positive at t = {}",
            gj.value(),
            t.value()
        )));
    }
    let phi_root = gj.div(&hj)?;
    Ok(&phi_root * &phi_root)
}

/// `φ = (f √(g z² + 1) + b z)²` with default orders.
pub fn phi_randers(
    f: &dyn ScalarFunction1D,
    g: &dyn ScalarFunction1D,
    b: &dyn ScalarFunction1D,
    z: f64,
    r: f64,
) -> Result<Jet> {
    randers_jet(f, g, b, z, r, Z_MAX, R_MAX, true)
}

#[allow(clippy::too_many_arguments)]
fn randers_jet(
    f: &dyn ScalarFunction1D,
    g: &dyn ScalarFunction1D,
    b: &dyn ScalarFunction1D,
    z: f64,
    r: f64,
    nz: usize,
    nr: usize,
    guard: bool,
) -> Result<Jet> {
    let fj = radial(f, z, r, nz, nr)?;
    let gj = radial(g, z, r, nz, nr)?;
    let bj = radial(b, z, r, nz, nr)?;
    positive("f", fj.value(), r)?;
    positive("g", gj.value(), r)?;
    let bound = fj.value() * fj.value() * gj.value();
    if guard && !(bj.value() * bj.value() < bound) {
        return Err(Error::ConvexityViolation {
            r,
            detail: format!("b² = {:e} is not below f²g = {bound:e}", bj.value() * bj.value()),
        });
    }
    let zj = Jet::var_z_with_orders(z, r, nz, nr);
    let root = (&(&gj * &(&zj * &zj)) + 1.0).sqrt()?;
    let phi_root = &(&fj * &root) + &(&bj * &zj);
    Ok(&phi_root * &phi_root)
}

/// G-family built on `G_c` from `kernel` and `c`, with `h = g`.
pub fn phi_gc_family(
    kernel: SharedFn,
    c: f64,
    g: &dyn ScalarFunction1D,
    z: f64,
    r: f64,
) -> Result<Jet> {
    let gc = GcFunction::new(kernel, c);
    g_family_jet(g, &gc, z, r, Z_MAX, R_MAX)
}

/// Names accepted by [`FamilySpec::Preset`].
pub fn preset_names() -> &'static [&'static str] {
    &[
        "flat",
        "example-1",
        "example-2",
        "example-3",
        "example-4",
        "example-5",
        "g-family",
        "randers",
        "randers-g2",
        "randers-berwald",
        "ricci-r2",
        "ricci-r1",
        "perturbed",
    ]
}

/// Resolves a preset name to a concrete family description.
///
/// The `example-*` presets take `g(r) = 1 + r²/4` ([`DEFAULT_G`]) for the
/// free positive function. `example-3` uses `c = 2` and `example-5` uses
/// `c = 7/8`; see [`closed_form_example3`] and [`closed_form_example5`].
pub fn preset(name: &str) -> Result<FamilySpec> {
    let g = DEFAULT_G.to_string();
    Ok(match name {
        "flat" => FamilySpec::Flat {
            profile: "sqrt(t^2+1)".into(),
        },
        "example-1" => FamilySpec::GFamily {
            h: g,
            profile: "sqrt(t^2+0.5)".into(),
        },
        "example-2" => FamilySpec::GFamily {
            h: g,
            profile: "sqrt(t^2+0.5)+0.3*t".into(),
        },
        "example-3" => FamilySpec::Gc {
            kernel: "3/(t^2+1)^(5/2)".into(),
            c: 2.0,
            g,
        },
        "example-4" => FamilySpec::GFamily {
            h: g,
            profile: "(2*t^2+1)/sqrt(t^2+1)+2*t".into(),
        },
        "example-5" => FamilySpec::Gc {
            kernel: "(t^2+1)^(-3)".into(),
            c: 0.875,
            g,
        },
        "g-family" => FamilySpec::GFamily {
            h: "1+r^2".into(),
            profile: "sqrt(t^2+0.5)+0.3*t".into(),
        },
        "randers" => FamilySpec::Randers {
            f: "1+r".into(),
            g: "1".into(),
            b: "0.3".into(),
        },
        "randers-g2" => FamilySpec::Randers {
            f: "1+r".into(),
            g: "2".into(),
            b: "0.3".into(),
        },
        // f²g constant, hence Berwald.
        "randers-berwald" => FamilySpec::Randers {
            f: "1.2/sqrt(1+r^2/4)".into(),
            g: g.clone(),
            b: "0.3".into(),
        },
        "ricci-r2" => FamilySpec::GFamily {
            h: "r^2".into(),
            profile: "sqrt(t^2+0.5)+0.3*t".into(),
        },
        "ricci-r1" => FamilySpec::GFamily {
            h: "r".into(),
            profile: "sqrt(t^2+0.5)+0.3*t".into(),
        },
        // Convex but outside every Douglas class.
        "perturbed" => FamilySpec::Custom {
            phi: "(sqrt(z^2+1) + 0.5*r^2*sqrt(z^2+4))^2".into(),
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (known: {})",
                preset_names().join(", ")
            )))
        }
    })
}

impl MetricFamily {
    pub fn from_spec(spec: &FamilySpec, domain: Domain) -> Result<Self> {
        let label = match spec {
            FamilySpec::Preset { name } => name.clone(),
            FamilySpec::GFamily { .. } => "g-family".into(),
            FamilySpec::Randers { .. } => "randers".into(),
            FamilySpec::Gc { .. } => "gc".into(),
            FamilySpec::Flat { .. } => "flat".into(),
            FamilySpec::Custom { .. } => "custom".into(),
        };
        let resolved = match spec {
            FamilySpec::Preset { name } => preset(name)?,
            other => other.clone(),
        };
        let kind = match &resolved {
            FamilySpec::GFamily { h, profile } => Kind::G {
                h: ExprFunction::shared(h)?,
                profile: ExprFunction::shared(profile)?,
            },
            FamilySpec::Randers { f, g, b } => Kind::Randers {
                f: ExprFunction::shared(f)?,
                g: ExprFunction::shared(g)?,
                b: ExprFunction::shared(b)?,
            },
            FamilySpec::Gc { kernel, c, g } => Kind::Gc {
                g: ExprFunction::shared(g)?,
                profile: Arc::new(GcFunction::new(ExprFunction::shared(kernel)?, *c)),
            },
            FamilySpec::Flat { profile } => Kind::Flat {
                profile: ExprFunction::shared(profile)?,
            },
            FamilySpec::Custom { phi } => {
                let expr = Expr::parse(phi)?;
                if let Some(bad) = expr.variables().into_iter().find(|v| v != "z" && v != "r") {
                    return Err(Error::Config(format!(
                        "custom φ may only use z and r, found '{bad}'"
                    )));
                }
                Kind::Custom { phi: expr }
            }
            FamilySpec::Preset { .. } => unreachable!("presets resolve to concrete specs"),
        };
        Ok(Self {
            kind,
            domain,
            spec: spec.clone(),
            label,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::from_spec(
            &FamilySpec::Preset {
                name: name.to_string(),
            },
            Domain::default(),
        )
    }

    /// G-family from Rust-side functions.
    pub fn g_family(h: SharedFn, profile: SharedFn, domain: Domain) -> Self {
        Self {
            kind: Kind::G { h, profile },
            domain,
            spec: FamilySpec::Custom {
                phi: "<g-family from code>".into(),
            },
            label: "g-family".into(),
        }
    }

    /// Randers family from Rust-side functions.
    pub fn randers(f: SharedFn, g: SharedFn, b: SharedFn, domain: Domain) -> Self {
        Self {
            kind: Kind::Randers { f, g, b },
            domain,
            spec: FamilySpec::Custom {
                phi: "<randers from code>".into(),
            },
            label: "randers".into(),
        }
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn class(&self) -> FamilyClass {
        match self.kind {
            Kind::G { .. } => FamilyClass::GFamily,
            Kind::Randers { .. } => FamilyClass::Randers,
            Kind::Gc { .. } => FamilyClass::Gc,
            Kind::Flat { .. } => FamilyClass::Flat,
            Kind::Custom { .. } => FamilyClass::Custom,
        }
    }

    /// Jet of `φ` at `(z, r)` with the default orders and domain guard.
    pub fn phi_jet(&self, z: f64, r: f64) -> Result<Jet> {
        self.phi_jet_with_orders(z, r, Z_MAX, R_MAX)
    }

    pub fn phi_jet_with_orders(&self, z: f64, r: f64, nz: usize, nr: usize) -> Result<Jet> {
        self.domain.check_radius(r)?;
        self.phi_jet_raw(z, r, nz, nr, true)
    }

    /// Jet of `φ` without the domain guard and without the family's own
    /// convexity guard (Randers `b² < f²g`). Used to probe convexity
    /// failures directly.
    pub fn phi_jet_unguarded(&self, z: f64, r: f64, nz: usize, nr: usize) -> Result<Jet> {
        self.phi_jet_raw(z, r, nz, nr, false)
    }

    fn phi_jet_raw(&self, z: f64, r: f64, nz: usize, nr: usize, guard: bool) -> Result<Jet> {
        match &self.kind {
            Kind::G { h, profile } => g_family_jet(h.as_ref(), profile.as_ref(), z, r, nz, nr),
            Kind::Gc { g, profile } => g_family_jet(g.as_ref(), profile.as_ref(), z, r, nz, nr),
            Kind::Randers { f, g, b } => {
                randers_jet(f.as_ref(), g.as_ref(), b.as_ref(), z, r, nz, nr, guard)
            }
            Kind::Flat { profile } => {
                let zj = Jet::var_z_with_orders(z, r, nz, nr);
                let gj = zj.compose(&profile.derivatives(z, nz + nr)?)?;
                Ok(&gj * &gj)
            }
            Kind::Custom { phi } => {
                let zj = Jet::var_z_with_orders(z, r, nz, nr);
                let rj = Jet::var_r_with_orders(z, r, nz, nr);
                phi.eval_jet(
                    &|name| match name {
                        "z" => Some(zj.clone()),
                        "r" => Some(rj.clone()),
                        _ => None,
                    },
                    &zj,
                )
            }
        }
    }

    pub fn phi_value(&self, z: f64, r: f64) -> Result<f64> {
        Ok(self.phi_jet_with_orders(z, r, 0, 0)?.value())
    }

    /// `F(x, y) = |ȳ| √φ(z, r)`.
    pub fn finsler(&self, p: &EvalPoint) -> Result<f64> {
        let phi = self.phi_value(p.z(), p.r())?;
        if !(phi > 0.0) {
            return Err(Error::Domain(format!("φ = {phi:e} is not positive")));
        }
        Ok(p.u() * phi.sqrt())
    }

    /// `F²` computed from raw coordinates `x = (x⁰, x̄)`, `y = (y⁰, ȳ)`.
    pub fn finsler_sq(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let u2: f64 = y[1..].iter().map(|v| v * v).sum();
        let r = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let u = u2.sqrt();
        if !(u > 0.0) {
            return Err(Error::InvalidPoint("|ȳ| must be positive".into()));
        }
        Ok(u2 * self.phi_value(y[0] / u, r)?)
    }
}

/// Closed form of the `G_c` metric behind the `example-3` preset:
/// `|ȳ|(c-1)/g + (2g²(y⁰)² + |ȳ|²) / (g √(g²(y⁰)² + |ȳ|²))`.
///
/// `c = 2` is the `example-3` preset.
pub fn closed_form_example3(g: f64, c: f64, y0: f64, u: f64) -> f64 {
    let q = g * g * y0 * y0 + u * u;
    u * (c - 1.0) / g + (2.0 * g * g * y0 * y0 + u * u) / (g * q.sqrt())
}

/// Closed form of the `G_c` metric behind the `example-5` preset:
/// `(3y⁰/8) arctan(g y⁰/|ȳ|) + ((1/8 + c) g²(y⁰)² + c|ȳ|²) |ȳ| / (g (g²(y⁰)² + |ȳ|²))`.
///
/// At `c = 7/8` the rational part is `(8g²(y⁰)² + 7|ȳ|²) |ȳ| / (8g(g²(y⁰)² + |ȳ|²))`.
pub fn closed_form_example5(g: f64, c: f64, y0: f64, u: f64) -> f64 {
    let q = g * g * y0 * y0 + u * u;
    3.0 * y0 / 8.0 * (g * y0 / u).atan() + ((0.125 + c) * g * g * y0 * y0 + c * u * u) * u / (g * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn f(src: &str) -> SharedFn {
        ExprFunction::shared(src).unwrap()
    }

    #[test]
    fn euclidean_g_family() {
        for &(z, r) in &[(0.0, 0.3), (0.7, 0.4), (-1.2, 0.9)] {
            let phi = phi_g_family(f("1").as_ref(), f("sqrt(t^2+1)").as_ref(), z, r).unwrap();
            assert_relative_eq!(phi.value(), z * z + 1.0, epsilon = 1e-14);
            assert_relative_eq!(phi.get(2, 0), 2.0, epsilon = 1e-13);
            assert_eq!(phi.get(0, 1), 0.0);
            assert!(phi.get(3, 0).abs() < 1e-12);
        }
    }

    #[test]
    fn euclidean_randers() {
        let phi = phi_randers(f("1").as_ref(), f("1").as_ref(), f("0").as_ref(), 0.6, 0.2).unwrap();
        assert_relative_eq!(phi.value(), 1.36, epsilon = 1e-14);
        assert_relative_eq!(phi.get(1, 0), 1.2, epsilon = 1e-14);
        assert_relative_eq!(phi.get(2, 0), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn randers_violation_is_reported() {
        let err = phi_randers(f("1").as_ref(), f("1").as_ref(), f("1.5").as_ref(), 0.1, 0.3).unwrap_err();
        assert!(matches!(err, Error::ConvexityViolation { r, .. } if r == 0.3));
    }

    #[test]
    fn nonpositive_warp_is_domain_error() {
        let err = phi_g_family(f("r-1").as_ref(), f("sqrt(t^2+1)").as_ref(), 0.1, 0.5).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn randers_berwald_reduction() {
        // f = k²/√g with b = 0 coincides with the G-family h = √g, G = k²√(t²+1).
        let (k2, g) = (1.3, "1+r^2/4");
        let randers = phi_randers(
            f(&format!("{k2}/sqrt({g})")).as_ref(),
            f(g).as_ref(),
            f("0").as_ref(),
            0.45,
            0.6,
        )
        .unwrap();
        let gfam = phi_g_family(
            f(&format!("sqrt({g})")).as_ref(),
            f(&format!("{k2}*sqrt(t^2+1)")).as_ref(),
            0.45,
            0.6,
        )
        .unwrap();
        let scale = randers.value().abs();
        assert!(randers.max_abs_diff(&gfam).unwrap() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn gc_polynomial_kernel_matches_g_family() {
        let g = f(DEFAULT_G);
        let a = phi_gc_family(f("2"), 1.0, g.as_ref(), 0.3, 0.5).unwrap();
        let b = phi_g_family(g.as_ref(), f("t^2+1").as_ref(), 0.3, 0.5).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn presets_all_build_and_evaluate() {
        for name in preset_names() {
            let fam = MetricFamily::preset(name).unwrap();
            let phi = fam.phi_jet(0.3, 0.5).unwrap();
            assert!(phi.value() > 0.0, "{name}");
        }
        assert!(matches!(preset("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn flat_family_has_no_r_dependence() {
        let fam = MetricFamily::preset("flat").unwrap();
        let phi = fam.phi_jet(0.8, 0.5).unwrap();
        for i in 0..=Z_MAX {
            for j in 1..=R_MAX {
                assert_eq!(phi.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn domain_guard() {
        let fam = MetricFamily::preset("g-family").unwrap();
        assert!(fam.phi_jet(0.1, 0.01).is_err());
        assert!(fam.phi_jet(0.1, 1.0).is_err());
        assert!(fam.phi_jet_unguarded(0.1, 0.01, 2, 1).is_ok());
    }

    #[test]
    fn custom_rejects_foreign_variables() {
        let spec = FamilySpec::Custom { phi: "z^2+q".into() };
        assert!(MetricFamily::from_spec(&spec, Domain::default()).is_err());
    }

    #[test]
    fn spec_serde_shape() {
        let spec = FamilySpec::GFamily {
            h: "1+r^2".into(),
            profile: "sqrt(t^2+0.5)".into(),
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"g-family","h":"1+r^2","G":"sqrt(t^2+0.5)"}"#);
        let back: FamilySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
