//! Finite-difference reference implementations.
//!
//! Every derivative is a product of central first differences along chosen
//! directions in the joint `(x, y)` space, refined by Richardson
//! extrapolation in `h²`. Third `y`-derivatives difference the closed-form
//! spray, never `F²` itself.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curvature::Rank4Tensor;
use crate::error::{Error, Result};
use crate::family::MetricFamily;
use crate::point::EvalPoint;
use crate::tensor::SprayScalars;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdConfig {
    /// First differences: `h_y = h_y_rel · |ȳ|`.
    pub h_y_rel: f64,
    /// First differences: `h_x = h_x_rel · max(r, 1)`.
    pub h_x_rel: f64,
    /// Second differences use `h2_rel` in place of both relative steps.
    pub h2_rel: f64,
    /// Third `y`-differences: `h3_rel · |ȳ|`.
    pub h3_rel: f64,
    pub richardson_levels: usize,
    /// Step halvings tried when a stencil leaves the domain.
    pub max_step_halvings: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            h_y_rel: 1e-4,
            h_x_rel: 1e-4,
            h2_rel: 1e-3,
            h3_rel: 1e-2,
            richardson_levels: 2,
            max_step_halvings: 4,
        }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        let steps = [self.h_y_rel, self.h_x_rel, self.h2_rel, self.h3_rel];
        if steps.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::Config("finite-difference steps must be positive".into()));
        }
        if self.richardson_levels == 0 {
            return Err(Error::Config("richardson_levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// A step vector in the joint space `w = (x, y)` of length `2(n + 1)`.
#[derive(Debug, Clone)]
struct Dir {
    v: Vec<f64>,
    h: f64,
}

fn x_axis(dim: usize, a: usize, h: f64) -> Dir {
    let mut v = vec![0.0; 2 * dim];
    v[a] = 1.0;
    Dir { v, h }
}

fn y_axis(dim: usize, a: usize, h: f64) -> Dir {
    let mut v = vec![0.0; 2 * dim];
    v[dim + a] = 1.0;
    Dir { v, h }
}

/// `x ↦ x + t y` with `y` frozen at the base point.
fn x_along_y(p: &EvalPoint, h: f64) -> Dir {
    let dim = p.n() + 1;
    let mut v = vec![0.0; 2 * dim];
    v[..dim].copy_from_slice(&p.y_full());
    Dir { v, h }
}

/// Product of central differences `Π_k (f(· + h_k v_k) - f(· - h_k v_k)) / 2h_k`.
fn central_product<F>(f: &F, base: &[f64], dirs: &[Dir], scale: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k = dirs.len();
    let mut acc: Option<Vec<f64>> = None;
    let mut w = vec![0.0; base.len()];
    for mask in 0..(1usize << k) {
        w.copy_from_slice(base);
        let mut sign = 1.0;
        for (bit, d) in dirs.iter().enumerate() {
            let s = if mask >> bit & 1 == 1 { -1.0 } else { 1.0 };
            sign *= s;
            for (wi, vi) in w.iter_mut().zip(&d.v) {
                *wi += s * scale * d.h * vi;
            }
        }
        let val = f(&w)?;
        match acc.as_mut() {
            None => acc = Some(val.into_iter().map(|v| sign * v).collect()),
            Some(a) => a.iter_mut().zip(val).for_each(|(ai, v)| *ai += sign * v),
        }
    }
    let denom: f64 = dirs.iter().map(|d| 2.0 * scale * d.h).product();
    Ok(acc.unwrap_or_default().into_iter().map(|v| v / denom).collect())
}

/// Richardson extrapolation of [`central_product`] over halved steps.
fn richardson<F>(f: &F, base: &[f64], dirs: &[Dir], levels: usize, scale: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut prev: Vec<Vec<f64>> = Vec::new();
    for level in 0..levels {
        let mut row = vec![central_product(f, base, dirs, scale / f64::from(1u32 << level))?];
        for m in 1..=level {
            let factor = 4f64.powi(m as i32) - 1.0;
            let next = row[m - 1]
                .iter()
                .zip(&prev[m - 1])
                .map(|(fine, coarse)| fine + (fine - coarse) / factor)
                .collect();
            row.push(next);
        }
        prev = row;
    }
    Ok(prev.pop().unwrap_or_default())
}

/// Runs [`richardson`], halving all steps when a stencil point falls outside
/// the domain.
fn derivative<F>(f: &F, base: &[f64], dirs: &[Dir], cfg: &FdConfig) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut scale = 1.0;
    let mut last = None;
    for _ in 0..=cfg.max_step_halvings {
        match richardson(f, base, dirs, cfg.richardson_levels, scale) {
            Ok(v) => return Ok(v),
            Err(e @ (Error::Domain(_) | Error::ConvexityViolation { .. } | Error::InvalidPoint(_))) => {
                last = Some(e);
                scale *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Step(format!(
        "stencil leaves the domain after {} halvings: {}",
        cfg.max_step_halvings,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn joint(p: &EvalPoint) -> Vec<f64> {
    let mut w = p.x_full();
    w.extend(p.y_full());
    w
}

fn split(w: &[f64]) -> (&[f64], &[f64]) {
    w.split_at(w.len() / 2)
}

fn steps(p: &EvalPoint, cfg: &FdConfig) -> (f64, f64) {
    (cfg.h_x_rel * p.r().max(1.0), cfg.h_y_rel * p.u())
}

fn second_steps(p: &EvalPoint, cfg: &FdConfig) -> (f64, f64) {
    (cfg.h2_rel * p.r().max(1.0), cfg.h2_rel * p.u())
}

fn f_squared(family: &MetricFamily) -> impl Fn(&[f64]) -> Result<Vec<f64>> + '_ {
    move |w: &[f64]| {
        let (x, y) = split(w);
        Ok(vec![family.finsler_sq(x, y)?])
    }
}

fn closed_spray(family: &MetricFamily, douglas: bool) -> impl Fn(&[f64]) -> Result<Vec<f64>> + '_ {
    move |w: &[f64]| {
        let (x, y) = split(w);
        let p = EvalPoint::from_full(x, y)?;
        let sc = SprayScalars::compute(family, p.z(), p.r(), p.n())?;
        Ok(if douglas { sc.douglas_spray(&p) } else { sc.spray(&p) })
    }
}

/// `g_AB = ½ ∂²F²/∂y^A∂y^B` by central second differences.
pub fn hessian_fd(family: &MetricFamily, p: &EvalPoint, cfg: &FdConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dim = p.n() + 1;
    let (_, hy) = second_steps(p, cfg);
    let f = f_squared(family);
    let base = joint(p);
    let mut g = vec![0.0; dim * dim];
    for a in 0..dim {
        for b in a..dim {
            let v = 0.5 * derivative(&f, &base, &[y_axis(dim, a, hy), y_axis(dim, b, hy)], cfg)?[0];
            g[a * dim + b] = v;
            g[b * dim + a] = v;
        }
    }
    Ok(g)
}

/// `G^C = ¼ g^{CA}(∂²F²/∂y^A∂x^B y^B - ∂F²/∂x^A)` from differences of `F²`.
pub fn spray_fd(family: &MetricFamily, p: &EvalPoint, cfg: &FdConfig) -> Result<Vec<f64>> {
    let dim = p.n() + 1;
    let g = hessian_fd(family, p, cfg)?;
    let ginv = DMatrix::from_row_slice(dim, dim, &g)
        .try_inverse()
        .ok_or(Error::Degenerate {
            which: "finite-difference g",
            value: 0.0,
        })?;
    let (hx, _) = steps(p, cfg);
    let (hx2, hy2) = second_steps(p, cfg);
    let f = f_squared(family);
    let base = joint(p);
    let mut m = vec![0.0; dim];
    for (a, ma) in m.iter_mut().enumerate() {
        let mixed = derivative(&f, &base, &[x_along_y(p, hx2 / p.u()), y_axis(dim, a, hy2)], cfg)?[0];
        let dx = derivative(&f, &base, &[x_axis(dim, a, hx)], cfg)?[0];
        *ma = mixed - dx;
    }
    Ok((0..dim)
        .map(|c| 0.25 * (0..dim).map(|a| ginv[(c, a)] * m[a]).sum::<f64>())
        .collect())
}

fn third_y_derivatives<F>(f: &F, p: &EvalPoint, cfg: &FdConfig) -> Result<Rank4Tensor>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let dim = p.n() + 1;
    let h = cfg.h3_rel * p.u();
    let base = joint(p);
    let mut out = Rank4Tensor::zeros(dim);
    for b in 0..dim {
        for c in b..dim {
            for d in c..dim {
                let dirs = [y_axis(dim, b, h), y_axis(dim, c, h), y_axis(dim, d, h)];
                let vals = derivative(f, &base, &dirs, cfg)?;
                for (a, v) in vals.into_iter().enumerate() {
                    out.set_symmetric(a, b, c, d, v);
                }
            }
        }
    }
    Ok(out)
}

/// `∂³G^A/∂y^B∂y^C∂y^D` of the closed-form spray.
pub fn berwald_fd(family: &MetricFamily, p: &EvalPoint, cfg: &FdConfig) -> Result<Rank4Tensor> {
    third_y_derivatives(&closed_spray(family, false), p, cfg)
}

/// Third `y`-derivatives of the closed-form spray with its trace part
/// `y^A (∂G^M/∂y^M)/(n + 2)` removed first.
pub fn douglas_fd(family: &MetricFamily, p: &EvalPoint, cfg: &FdConfig) -> Result<Rank4Tensor> {
    third_y_derivatives(&closed_spray(family, true), p, cfg)
}

/// `Σ_A ∂G^A/∂y^A` of the closed-form spray.
pub fn divergence_fd(family: &MetricFamily, p: &EvalPoint, cfg: &FdConfig) -> Result<f64> {
    cfg.validate()?;
    let dim = p.n() + 1;
    let (_, hy) = steps(p, cfg);
    let f = closed_spray(family, false);
    let base = joint(p);
    let mut total = 0.0;
    for a in 0..dim {
        total += derivative(&f, &base, &[y_axis(dim, a, hy)], cfg)?[a];
    }
    Ok(total)
}

/// `Ric = R^A_A` with
/// `R^A_B = 2∂_{x^B}G^A - y^C ∂²G^A/∂x^C∂y^B + 2G^C ∂²G^A/∂y^C∂y^B
/// - ∂G^A/∂y^C ∂G^C/∂y^B`, differencing the closed-form spray.
pub fn ricci_fd(family: &MetricFamily, p: &EvalPoint, cfg: &FdConfig) -> Result<f64> {
    cfg.validate()?;
    let dim = p.n() + 1;
    let (hx, hy) = steps(p, cfg);
    let (hx2, h2) = second_steps(p, cfg);
    let f = closed_spray(family, false);
    let base = joint(p);
    let g = f(&base)?;
    let mut jac = vec![0.0; dim * dim];
    for c in 0..dim {
        let col = derivative(&f, &base, &[y_axis(dim, c, hy)], cfg)?;
        for a in 0..dim {
            jac[a * dim + c] = col[a];
        }
    }
    let mut ric = 0.0;
    for a in 0..dim {
        ric += 2.0 * derivative(&f, &base, &[x_axis(dim, a, hx)], cfg)?[a];
        ric -= derivative(&f, &base, &[x_along_y(p, hx2 / p.u()), y_axis(dim, a, h2)], cfg)?[a];
        for c in 0..dim {
            let second = derivative(&f, &base, &[y_axis(dim, c, h2), y_axis(dim, a, h2)], cfg)?[a];
            ric += 2.0 * g[c] * second;
            ric -= jac[a * dim + c] * jac[c * dim + a];
        }
    }
    Ok(ric)
}

/// `max_B |∂²F/∂x^A∂y^B y^A - ∂F/∂x^B| / |ȳ|`.
pub fn fd_projective_residual(family: &MetricFamily, p: &EvalPoint, cfg: &FdConfig) -> Result<f64> {
    cfg.validate()?;
    let dim = p.n() + 1;
    let (hx, _) = steps(p, cfg);
    let (hx2, hy2) = second_steps(p, cfg);
    let f = |w: &[f64]| -> Result<Vec<f64>> {
        let (x, y) = split(w);
        Ok(vec![family.finsler_sq(x, y)?.sqrt()])
    };
    let base = joint(p);
    let mut worst: f64 = 0.0;
    for b in 0..dim {
        let mixed = derivative(&f, &base, &[x_along_y(p, hx2 / p.u()), y_axis(dim, b, hy2)], cfg)?[0];
        let dx = derivative(&f, &base, &[x_axis(dim, b, hx)], cfg)?[0];
        worst = worst.max((mixed - dx).abs());
    }
    Ok(worst / p.u())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{fundamental_tensor, spray};

    fn pt() -> EvalPoint {
        EvalPoint::new(0.1, vec![0.3, -0.2, 0.25], 0.8, vec![0.5, -0.4, 0.9]).unwrap()
    }

    #[test]
    fn flat_hessian_is_identity() {
        let fam = MetricFamily::preset("flat").unwrap();
        let g = hessian_fd(&fam, &pt(), &FdConfig::default()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let id = if a == b { 1.0 } else { 0.0 };
                assert!((g[a * 4 + b] - id).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn richardson_improves_second_difference() {
        let f = |w: &[f64]| -> Result<Vec<f64>> { Ok(vec![w[0].sin()]) };
        let dirs = [Dir { v: vec![1.0], h: 0.1 }, Dir { v: vec![1.0], h: 0.1 }];
        let exact = -(0.7f64.sin());
        let e1 = (richardson(&f, &[0.7], &dirs, 1, 1.0).unwrap()[0] - exact).abs();
        let e2 = (richardson(&f, &[0.7], &dirs, 2, 1.0).unwrap()[0] - exact).abs();
        assert!(e2 * 4.0 <= e1, "{e1} {e2}");
    }

    #[test]
    fn hessian_and_spray_match_closed_forms() {
        let fam = MetricFamily::preset("perturbed").unwrap();
        let p = pt();
        let cfg = FdConfig::default();
        let g = fundamental_tensor(&fam, &p).unwrap();
        let gfd = hessian_fd(&fam, &p, &cfg).unwrap();
        let scale = g.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in g.g.iter().zip(&gfd) {
            assert!((a - b).abs() < 1e-6 * scale);
        }
        let s = spray(&fam, &p).unwrap();
        let sfd = spray_fd(&fam, &p, &cfg).unwrap();
        let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in s.iter().zip(&sfd) {
            assert!((a - b).abs() < 1e-5 * scale, "{a} {b}");
        }
    }

    #[test]
    fn boundary_stencil_shrinks_or_fails() {
        let fam = MetricFamily::preset("perturbed").unwrap();
        let near = EvalPoint::new(0.0, vec![0.5, 0.0], 0.3, vec![1.0, 0.0]).unwrap();
        // ±0.97 along x̄ leaves the ball; two halvings bring it back.
        let cfg = FdConfig {
            h_x_rel: 0.97,
            ..FdConfig::default()
        };
        assert!(spray_fd(&fam, &near, &cfg).is_ok());
        let cfg = FdConfig {
            h_x_rel: 0.97,
            max_step_halvings: 0,
            ..FdConfig::default()
        };
        assert!(matches!(spray_fd(&fam, &near, &cfg), Err(Error::Step(_))));
    }
}
