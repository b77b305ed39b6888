//! Closed-form curvature tensors, Douglas ODE residuals and Ricci quantities.
//!
//! Index `0` is the `y⁰` slot and `1..=n` are the `ȳ` slots. Rank-4 tensors
//! store `T^A_{BCD}` with the upper index first.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::family::MetricFamily;
use crate::oracle::{fd_projective_residual, FdConfig};
use crate::point::EvalPoint;
use crate::tensor::{derived_scalars, DerivedScalars};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank4Tensor {
    pub dim: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank3Tensor {
    pub dim: usize,
    pub data: Vec<f64>,
}

fn sup(data: &[f64]) -> f64 {
    data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn frob(data: &[f64]) -> f64 {
    data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

/// Contracts every slot of a `dim^k` array with `m` (row-major `dim × dim`).
fn transform_all(data: &[f64], dim: usize, rank: usize, m: &[f64]) -> Vec<f64> {
    let mut cur = data.to_vec();
    for slot in 0..rank {
        let stride = dim.pow((rank - 1 - slot) as u32);
        let mut next = vec![0.0; cur.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let a = (idx / stride) % dim;
            let base = idx - a * stride;
            *out = (0..dim).map(|b| m[a * dim + b] * cur[base + b * stride]).sum();
        }
        cur = next;
    }
    cur
}

fn embed_bar(o: &[f64], n: usize) -> Vec<f64> {
    let dim = n + 1;
    let mut m = vec![0.0; dim * dim];
    m[0] = 1.0;
    for i in 0..n {
        for j in 0..n {
            m[(i + 1) * dim + j + 1] = o[i * n + j];
        }
    }
    m
}

impl Rank4Tensor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    #[inline]
    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[self.idx(a, b, c, d)]
    }

    /// Sets `T^a_{bcd}` and all permutations of the lower indices.
    pub fn set_symmetric(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        for (p, q, r) in [(b, c, d), (b, d, c), (c, b, d), (c, d, b), (d, b, c), (d, c, b)] {
            let k = self.idx(a, p, q, r);
            self.data[k] = v;
        }
    }

    pub fn sup_norm(&self) -> f64 {
        sup(&self.data)
    }

    pub fn frobenius(&self) -> f64 {
        frob(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        diff(&self.data, &other.data)
    }

    /// Push-forward under `x̄ ↦ O x̄` for an orthogonal `n × n` matrix `O`.
    pub fn rotate_bar(&self, o: &[f64]) -> Self {
        let m = embed_bar(o, self.dim - 1);
        Self {
            dim: self.dim,
            data: transform_all(&self.data, self.dim, 4, &m),
        }
    }

    /// `max |T^A_{BCD} - T^A_{σ(BCD)}|` over lower-index permutations.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let v = self.get(a, b, c, d);
                        worst = worst
                            .max((v - self.get(a, c, b, d)).abs())
                            .max((v - self.get(a, b, d, c)).abs());
                    }
                }
            }
        }
        worst
    }

    /// `T^A_{AC D}` traced on the first lower index.
    pub fn trace(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for c in 0..n {
            for d in 0..n {
                out[c * n + d] = (0..n).map(|a| self.get(a, a, c, d)).sum();
            }
        }
        out
    }
}

impl Rank3Tensor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(3)],
        }
    }

    #[inline]
    fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dim + b) * self.dim + c
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[self.idx(a, b, c)]
    }

    pub fn set_symmetric(&mut self, a: usize, b: usize, c: usize, v: f64) {
        for (p, q, r) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
            let k = self.idx(p, q, r);
            self.data[k] = v;
        }
    }

    pub fn sup_norm(&self) -> f64 {
        sup(&self.data)
    }

    pub fn frobenius(&self) -> f64 {
        frob(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        diff(&self.data, &other.data)
    }

    pub fn rotate_bar(&self, o: &[f64]) -> Self {
        let m = embed_bar(o, self.dim - 1);
        Self {
            dim: self.dim,
            data: transform_all(&self.data, self.dim, 3, &m),
        }
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn cyc<F: Fn(usize, usize, usize) -> f64>(f: F, j: usize, k: usize, l: usize) -> f64 {
    f(j, k, l) + f(k, l, j) + f(l, j, k)
}

/// Splits a sorted lower-index triple into its `ȳ` slots (0-based into `x̄`).
fn bar_slots(b: usize, c: usize, d: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [b, c, d].iter().filter(|&&q| q > 0).map(|q| q - 1).collect();
    v.sort_unstable();
    v
}

/// Third `y`-derivatives of a spray of the shape
/// `G⁰ = u² s P(z)`, `Gⁱ = u s Q(z) yⁱ - u² W(z) xⁱ`,
/// from the series `[f, f_z, f_zz, f_zzz]` of `P`, `Q` and `W`.
pub fn structured_third_derivative(p: &[f64; 4], q: &[f64; 4], w: &[f64; 4], pt: &EvalPoint) -> Rank4Tensor {
    let n = pt.n();
    let dim = n + 1;
    let mut out = Rank4Tensor::zeros(dim);
    for b in 0..dim {
        for c in b..dim {
            for d in c..dim {
                let slots = bar_slots(b, c, d);
                out.set_symmetric(0, b, c, d, upper_zero(p, pt, &slots));
                for i in 0..n {
                    out.set_symmetric(i + 1, b, c, d, upper_bar(q, w, pt, i, &slots));
                }
            }
        }
    }
    out
}

fn upper_zero(p: &[f64; 4], pt: &EvalPoint, slots: &[usize]) -> f64 {
    let (x, y) = (&pt.xbar, &pt.ybar);
    let (u, s, z) = (pt.u(), pt.s(), pt.z());
    match *slots {
        [] => s / u * p[3],
        [l] => p[2] * x[l] / u - s / (u * u) * (p[2] + z * p[3]) * y[l],
        [k, l] => {
            s * z * (z * p[3] + 3.0 * p[2]) * y[k] * y[l] / u.powi(3)
                - z * p[2] * (x[k] * y[l] + x[l] * y[k]) / (u * u)
                - s * z * p[2] * delta(k, l) / u
        }
        [j, k, l] => {
            let a = p[0] - z * p[1];
            let b = -p[0] + z * p[1] + z * z * p[2];
            s / u.powi(4) * (a - 2.0 * z * z * p[2] - z.powi(3) * p[3] / 3.0)
                * cyc(|a, b, c| y[a] * y[b] * y[c], j, k, l)
                + b / u.powi(3) * cyc(|a, b, c| y[a] * y[b] * x[c], j, k, l)
                + a / u * cyc(|a, b, c| delta(a, b) * x[c], j, k, l)
                + s / (u * u) * b * cyc(|a, b, c| delta(a, b) * y[c], j, k, l)
        }
        _ => unreachable!(),
    }
}

fn upper_bar(q: &[f64; 4], w: &[f64; 4], pt: &EvalPoint, i: usize, slots: &[usize]) -> f64 {
    let (x, y) = (&pt.xbar, &pt.ybar);
    let (u, s, z) = (pt.u(), pt.s(), pt.z());
    let z2 = z * z;
    let z3 = z2 * z;
    match *slots {
        [] => s / (u * u) * q[3] * y[i] - w[3] * x[i] / u,
        [l] => {
            -s / u.powi(3) * (2.0 * q[2] + z * q[3]) * y[i] * y[l]
                + q[2] * y[i] * x[l] / (u * u)
                + z / (u * u) * w[3] * y[l] * x[i]
                + s / u * q[2] * delta(i, l)
        }
        [k, l] => {
            let qq = q[1] + z * q[2];
            let ww = w[1] - z * w[2];
            s / u.powi(4) * (3.0 * q[1] + 5.0 * z * q[2] + z2 * q[3]) * y[i] * y[k] * y[l]
                - s / (u * u) * qq * cyc(|a, b, c| delta(b, c) * y[a], i, k, l)
                - qq / u.powi(3) * (x[l] * y[k] + x[k] * y[l]) * y[i]
                + q[1] / u * (x[l] * delta(i, k) + x[k] * delta(i, l))
                + (ww - z2 * w[3]) / u.powi(3) * x[i] * y[k] * y[l]
                - ww / u * x[i] * delta(k, l)
        }
        [j, k, l] => {
            let c2 = 3.0 * z * q[1] + z2 * q[2];
            s / u.powi(5) * (-15.0 * z * q[1] - 9.0 * z2 * q[2] - z3 * q[3]) * y[i] * y[j] * y[k] * y[l]
                + c2 * cyc(
                    |a, b, c| {
                        y[i] * x[a] * y[b] * y[c] / u.powi(4)
                            + s * delta(i, a) * y[b] * y[c] / u.powi(3)
                            + s * delta(a, c) * y[b] * y[i] / u.powi(3)
                    },
                    j,
                    k,
                    l,
                )
                - z * q[1] / (u * u)
                    * cyc(
                        |a, b, c| {
                            (x[a] * y[i] + u * s * delta(i, a)) * delta(b, c)
                                + (x[a] * delta(i, b) + x[b] * delta(i, a)) * y[c]
                        },
                        j,
                        k,
                        l,
                    )
                - (3.0 * z * w[1] - 3.0 * z2 * w[2] - z3 * w[3]) / u.powi(4) * x[i] * y[j] * y[k] * y[l]
                + z / (u * u) * (w[1] - z * w[2]) * x[i] * cyc(|a, b, c| y[a] * delta(b, c), j, k, l)
        }
        _ => unreachable!(),
    }
}

fn series(j: &crate::jet::Jet) -> [f64; 4] {
    [j.get(0, 0), j.get(1, 0), j.get(2, 0), j.get(3, 0)]
}

/// Douglas tensor from the component formulas in `R`, `T`, `W`.
pub fn douglas_from_scalars(ds: &DerivedScalars, p: &EvalPoint) -> Rank4Tensor {
    structured_third_derivative(&series(&ds.douglas_r), &series(&ds.douglas_t), &series(&ds.w), p)
}

/// Berwald tensor from the component formulas in `E`, `H`, `W`.
pub fn berwald_from_scalars(ds: &DerivedScalars, p: &EvalPoint) -> Rank4Tensor {
    structured_third_derivative(&series(&ds.berwald_e), &series(&ds.berwald_h), &series(&ds.w), p)
}

pub fn douglas_tensor(family: &MetricFamily, p: &EvalPoint) -> Result<Rank4Tensor> {
    Ok(douglas_from_scalars(&derived_scalars(family, p)?, p))
}

pub fn berwald_tensor(family: &MetricFamily, p: &EvalPoint) -> Result<Rank4Tensor> {
    Ok(berwald_from_scalars(&derived_scalars(family, p)?, p))
}

/// Landsberg tensor from its component formulas.
pub fn landsberg_from_scalars(ds: &DerivedScalars, pt: &EvalPoint) -> Rank3Tensor {
    let e = series(&ds.berwald_e);
    let h = series(&ds.berwald_h);
    let w = series(&ds.w);
    let phz = ds.phi.get(1, 0);
    let om = ds.omega.value();
    let (x, y) = (&pt.xbar, &pt.ybar);
    let (u, s, z) = (pt.u(), pt.s(), pt.z());
    let (z2, z3) = (z * z, z * z * z);
    let dim = pt.n() + 1;
    let mut out = Rank3Tensor::zeros(dim);
    for b in 0..dim {
        for c in b..dim {
            for d in c..dim {
                let v = match *bar_slots(b, c, d) {
                    [] => -s / 4.0 * (phz * e[3] + om * (h[3] - w[3])),
                    [l] => {
                        -0.25 * (phz * e[2] + om * h[2]) * x[l]
                            + s / (4.0 * u)
                                * (phz * (e[2] + z * e[3]) + om * (h[2] + z * h[3] - z * w[3]))
                                * y[l]
                    }
                    [k, l] => {
                        -s / (4.0 * u * u)
                            * (z * phz * (z * e[3] + 3.0 * e[2])
                                + om * (h[1] + 3.0 * z * h[2] + z2 * h[3])
                                + om * (w[1] - z * w[2] - z2 * w[3]))
                            * y[k]
                            * y[l]
                            + z / (4.0 * u) * (phz * e[2] + om * h[2]) * (x[l] * y[k] + x[k] * y[l])
                            + s / 4.0 * (z * phz * e[2] + om * (h[1] + z * h[2] + w[1] - z * w[2])) * delta(k, l)
                    }
                    [j, k, l] => {
                        let eb = -e[0] + z * e[1] + z2 * e[2];
                        -s / (4.0 * u.powi(3))
                            * (phz * (3.0 * e[0] - 3.0 * z * e[1] - 6.0 * z2 * e[2] - z3 * e[3])
                                - om * (6.0 * z * h[1] + 6.0 * z2 * h[2] + z3 * h[3])
                                - om * (3.0 * z * w[1] - 3.0 * z2 * w[2] - z3 * w[3]))
                            * y[j]
                            * y[k]
                            * y[l]
                            - 1.0 / (4.0 * u * u)
                                * (phz * eb + om * (z * h[1] + z2 * h[2]))
                                * cyc(|a, b, c| x[a] * y[b] * y[c], j, k, l)
                            - s / (4.0 * u)
                                * (phz * eb + om * (2.0 * z * h[1] + z2 * h[2] + z * w[1] - z2 * w[2]))
                                * cyc(|a, b, c| y[c] * delta(a, b), j, k, l)
                            - 0.25
                                * (phz * (e[0] - z * e[1]) - z * om * h[1])
                                * cyc(|a, b, c| x[c] * delta(a, b), j, k, l)
                    }
                    _ => unreachable!(),
                };
                out.set_symmetric(b, c, d, v);
            }
        }
    }
    out
}

/// `L_{BCD} = -¼ (F²)_{y^A} B^A_{BCD}` with `(F²)_{y⁰} = u φ_z` and
/// `(F²)_{yⁱ} = Ω yⁱ`.
pub fn landsberg_contraction(ds: &DerivedScalars, pt: &EvalPoint, berwald: &Rank4Tensor) -> Rank3Tensor {
    let dim = berwald.dim;
    let mut weights = Vec::with_capacity(dim);
    weights.push(pt.u() * ds.phi.get(1, 0));
    weights.extend(pt.ybar.iter().map(|y| ds.omega.value() * y));
    let mut out = Rank3Tensor::zeros(dim);
    for b in 0..dim {
        for c in 0..dim {
            for d in 0..dim {
                let v: f64 = (0..dim).map(|a| weights[a] * berwald.get(a, b, c, d)).sum();
                let k = out.idx(b, c, d);
                out.data[k] = -0.25 * v;
            }
        }
    }
    out
}

pub fn landsberg_tensor(family: &MetricFamily, p: &EvalPoint) -> Result<Rank3Tensor> {
    Ok(landsberg_from_scalars(&derived_scalars(family, p)?, p))
}

/// `[R - z R_z, T_z, W_z - z W_zz]`; all three vanish exactly for
/// Douglas metrics.
pub fn douglas_ode_residuals(ds: &DerivedScalars) -> [f64; 3] {
    let z = ds.z;
    [
        ds.douglas_r.value() - z * ds.douglas_r.get(1, 0),
        ds.douglas_t.get(1, 0),
        ds.w.get(1, 0) - z * ds.w.get(2, 0),
    ]
}

/// The pair `(P, Q)` with `Ric = u²(-P + s² Q)`.
pub fn ricci_flat_residuals(ds: &DerivedScalars) -> (f64, f64) {
    let n = ds.n as f64;
    let (z, r) = (ds.z, ds.r);
    let (u, v, w) = (&ds.u, &ds.v, &ds.w);
    let (u0, uz, uzz, urz) = (u.value(), u.get(1, 0), u.get(2, 0), u.get(1, 1));
    let (v0, vz, vr) = (v.value(), v.get(1, 0), v.get(0, 1));
    let (w0, wz, wr) = (w.value(), w.get(1, 0), w.get(0, 1));
    let p = (2.0 * r * r * w0 + 1.0) * (uz + n * v0 + (n - 3.0) * w0)
        + 2.0 * (n * w0 + r * wr + r * r * wz * (z * w0 - u0));
    let q = 2.0 * u0 * (uzz + n * vz + (n - 2.0) * wz)
        - (urz + n * vr + (n - 3.0) * wr) / r
        + n * v0 * (v0 + 2.0 * w0)
        + w0 * ((n - 5.0) * w0 + 2.0 * z * wz)
        + uz * (2.0 * w0 - uz);
    (p, q)
}

/// Ricci scalar `Ric = u²(-P + s² Q)`.
pub fn ricci_from_scalars(ds: &DerivedScalars, pt: &EvalPoint) -> f64 {
    let (p, q) = ricci_flat_residuals(ds);
    let (u, s) = (pt.u(), pt.s());
    u * u * (-p + s * s * q)
}

pub fn ricci_scalar(family: &MetricFamily, p: &EvalPoint) -> Result<f64> {
    Ok(ricci_from_scalars(&derived_scalars(family, p)?, p))
}

/// `|φ_r|` at the scalars' expansion point.
pub fn phi_r(ds: &DerivedScalars) -> f64 {
    ds.phi.get(0, 1).abs()
}

/// `max_B |F_{x^A y^B} y^A - F_{x^B}| / |ȳ|` by finite differences.
pub fn projective_flat_residual(family: &MetricFamily, p: &EvalPoint, cfg: &FdConfig) -> Result<f64> {
    fd_projective_residual(family, p, cfg)
}

/// Independent assembly of the Douglas and Berwald tensors by
/// differentiating the spray three times in `y` with the Leibniz rule.
pub mod assembly {
    use super::*;

    /// A scalar function of `y ∈ ℝ^dim` with its first three derivatives.
    #[derive(Debug, Clone)]
    pub struct Deriv3 {
        dim: usize,
        v: f64,
        g: Vec<f64>,
        h: Vec<f64>,
        t: Vec<f64>,
    }

    impl Deriv3 {
        pub fn constant(dim: usize, c: f64) -> Self {
            Self {
                dim,
                v: c,
                g: vec![0.0; dim],
                h: vec![0.0; dim * dim],
                t: vec![0.0; dim * dim * dim],
            }
        }

        /// `y ↦ ⟨coeffs, y⟩` evaluated at `y`.
        pub fn linear(coeffs: &[f64], y: &[f64]) -> Self {
            let mut out = Self::constant(coeffs.len(), coeffs.iter().zip(y).map(|(a, b)| a * b).sum());
            out.g.copy_from_slice(coeffs);
            out
        }

        pub fn value(&self) -> f64 {
            self.v
        }

        pub fn third(&self, a: usize, b: usize, c: usize) -> f64 {
            self.t[(a * self.dim + b) * self.dim + c]
        }

        pub fn add(&self, o: &Self) -> Self {
            let zip = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a + b).collect();
            Self {
                dim: self.dim,
                v: self.v + o.v,
                g: zip(&self.g, &o.g),
                h: zip(&self.h, &o.h),
                t: zip(&self.t, &o.t),
            }
        }

        pub fn scale(&self, k: f64) -> Self {
            let sc = |p: &[f64]| p.iter().map(|a| a * k).collect();
            Self {
                dim: self.dim,
                v: self.v * k,
                g: sc(&self.g),
                h: sc(&self.h),
                t: sc(&self.t),
            }
        }

        pub fn mul(&self, o: &Self) -> Self {
            let n = self.dim;
            let (f, g) = (self, o);
            let mut out = Self::constant(n, f.v * g.v);
            for a in 0..n {
                out.g[a] = f.g[a] * g.v + f.v * g.g[a];
                for b in 0..n {
                    let ab = a * n + b;
                    out.h[ab] = f.h[ab] * g.v + f.g[a] * g.g[b] + f.g[b] * g.g[a] + f.v * g.h[ab];
                    for c in 0..n {
                        let (ac, bc) = (a * n + c, b * n + c);
                        let abc = ab * n + c;
                        out.t[abc] = f.t[abc] * g.v
                            + f.h[ab] * g.g[c]
                            + f.h[ac] * g.g[b]
                            + f.h[bc] * g.g[a]
                            + f.g[a] * g.h[bc]
                            + f.g[b] * g.h[ac]
                            + f.g[c] * g.h[ab]
                            + f.v * g.t[abc];
                    }
                }
            }
            out
        }

        /// `θ ∘ self` for `d = [θ, θ', θ'', θ''']` at `self.value()`.
        pub fn compose(&self, d: &[f64; 4]) -> Self {
            let n = self.dim;
            let z = self;
            let mut out = Self::constant(n, d[0]);
            for a in 0..n {
                out.g[a] = d[1] * z.g[a];
                for b in 0..n {
                    let ab = a * n + b;
                    out.h[ab] = d[2] * z.g[a] * z.g[b] + d[1] * z.h[ab];
                    for c in 0..n {
                        let (ac, bc) = (a * n + c, b * n + c);
                        let abc = ab * n + c;
                        out.t[abc] = d[3] * z.g[a] * z.g[b] * z.g[c]
                            + d[2] * (z.h[ab] * z.g[c] + z.h[ac] * z.g[b] + z.h[bc] * z.g[a])
                            + d[1] * z.t[abc];
                    }
                }
            }
            out
        }
    }

    /// Third `y`-derivatives of `u²sP(z)`, `usQ(z)yⁱ - u²W(z)xⁱ`.
    pub fn assemble(p: &[f64; 4], q: &[f64; 4], w: &[f64; 4], pt: &EvalPoint) -> Rank4Tensor {
        let n = pt.n();
        let dim = n + 1;
        let y = pt.y_full();
        let unit = |k: usize| {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            Deriv3::linear(&e, &y)
        };
        let ys: Vec<Deriv3> = (0..dim).map(unit).collect();
        let mut xc = vec![0.0; dim];
        xc[1..].copy_from_slice(&pt.xbar);
        let xy = Deriv3::linear(&xc, &y);
        let q2 = (1..dim).fold(Deriv3::constant(dim, 0.0), |acc, i| acc.add(&ys[i].mul(&ys[i])));
        let qv = q2.value();
        let u = q2.compose(&[qv.sqrt(), 0.5 / qv.sqrt(), -0.25 / qv.powf(1.5), 0.375 / qv.powf(2.5)]);
        let uv = u.value();
        let inv_u = u.compose(&[1.0 / uv, -1.0 / uv.powi(2), 2.0 / uv.powi(3), -6.0 / uv.powi(4)]);
        let z = ys[0].mul(&inv_u);
        let (pz, qz, wz) = (z.compose(p), z.compose(q), z.compose(w));

        let mut comps = Vec::with_capacity(dim);
        comps.push(u.mul(&xy).mul(&pz));
        for (yi, xi) in ys[1..].iter().zip(&pt.xbar) {
            let a = xy.mul(&qz).mul(yi);
            let b = q2.mul(&wz).scale(-xi);
            comps.push(a.add(&b));
        }
        let mut out = Rank4Tensor::zeros(dim);
        for (a, g) in comps.iter().enumerate() {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        let k = out.idx(a, b, c, d);
                        out.data[k] = g.third(b, c, d);
                    }
                }
            }
        }
        out
    }

    pub fn douglas(ds: &DerivedScalars, pt: &EvalPoint) -> Rank4Tensor {
        assemble(&series(&ds.douglas_r), &series(&ds.douglas_t), &series(&ds.w), pt)
    }

    pub fn berwald(ds: &DerivedScalars, pt: &EvalPoint) -> Rank4Tensor {
        assemble(&series(&ds.berwald_e), &series(&ds.berwald_h), &series(&ds.w), pt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt() -> EvalPoint {
        EvalPoint::new(0.1, vec![0.3, -0.2, 0.25], 0.8, vec![0.5, -0.4, 0.9]).unwrap()
    }

    #[test]
    fn component_lists_match_leibniz_assembly() {
        let p = pt();
        let series = [
            [0.7, -0.3, 1.1, 0.4],
            [0.2, 0.9, -0.5, 1.3],
            [-0.4, 0.6, 0.8, -1.2],
        ];
        let a = structured_third_derivative(&series[0], &series[1], &series[2], &p);
        let b = assembly::assemble(&series[0], &series[1], &series[2], &p);
        assert!(a.max_abs_diff(&b) < 1e-12 * b.sup_norm().max(1.0), "{}", a.max_abs_diff(&b));
    }

    #[test]
    fn landsberg_lists_agree() {
        for name in ["example-1", "randers", "perturbed"] {
            let fam = MetricFamily::preset(name).unwrap();
            let p = pt();
            let ds = derived_scalars(&fam, &p).unwrap();
            let closed = landsberg_from_scalars(&ds, &p);
            let contracted = landsberg_contraction(&ds, &p, &berwald_from_scalars(&ds, &p));
            assert!(closed.max_abs_diff(&contracted) < 1e-12 * contracted.sup_norm().max(1.0), "{name}");
        }
    }

    #[test]
    fn euclidean_tensors_vanish() {
        let fam = MetricFamily::preset("flat").unwrap();
        let p = pt();
        assert!(douglas_tensor(&fam, &p).unwrap().sup_norm() < 1e-12);
        assert!(berwald_tensor(&fam, &p).unwrap().sup_norm() < 1e-12);
        assert!(landsberg_tensor(&fam, &p).unwrap().sup_norm() < 1e-12);
        assert!(ricci_scalar(&fam, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn douglas_tensor_is_trace_free() {
        let fam = MetricFamily::preset("perturbed").unwrap();
        let d = douglas_tensor(&fam, &pt()).unwrap();
        let tr = d.trace();
        assert!(tr.iter().all(|v| v.abs() < 1e-10 * d.sup_norm().max(1.0)));
        assert!(d.symmetry_defect() == 0.0);
    }

    #[test]
    fn g_family_is_douglas() {
        let fam = MetricFamily::preset("example-2").unwrap();
        let p = pt();
        let ds = derived_scalars(&fam, &p).unwrap();
        for r in douglas_ode_residuals(&ds) {
            assert!(r.abs() < 1e-10, "{r}");
        }
        assert!(douglas_tensor(&fam, &p).unwrap().sup_norm() * p.u() < 1e-10);
    }

    #[test]
    fn ricci_residuals_for_power_warps() {
        let square = MetricFamily::preset("ricci-r2").unwrap();
        let linear = MetricFamily::preset("ricci-r1").unwrap();
        for n in [2, 3, 4] {
            let ds = DerivedScalars::new(&square, 0.37, 0.6, n).unwrap();
            let (p, q) = ricci_flat_residuals(&ds);
            assert!(p.abs() < 1e-10 && q.abs() < 1e-10, "n={n}: {p} {q}");
        }
        let ds = DerivedScalars::new(&linear, 0.37, 0.6, 3).unwrap();
        let (p, q) = ricci_flat_residuals(&ds);
        assert!(p.abs().max(q.abs()) > 1e-2, "{p} {q}");
    }

    #[test]
    fn rotation_of_tensor_is_orthogonal() {
        let fam = MetricFamily::preset("perturbed").unwrap();
        let d = douglas_tensor(&fam, &pt()).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let o = [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0];
        assert_relative_eq!(d.rotate_bar(&o).frobenius(), d.frobenius(), max_relative = 1e-12);
    }
}
