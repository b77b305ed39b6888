//! Truncated bivariate Taylor jets in `(z, r)`.
//!
//! A [`Jet`] stores the raw partial derivatives `∂_z^i ∂_r^j f(z0, r0)` for
//! `0 <= i <= nz`, `0 <= j <= nr`. Coefficients are *not* factorial
//! normalized, so products follow the Leibniz rule with binomial weights.
//! A univariate jet is simply a jet with `nr == 0`.
//!
//! The arithmetic operators (`+`, `-`, `*`, negation, and mixing with `f64`)
//! panic when the operands were expanded at different points; that is a
//! contract violation inside a single evaluation pipeline. The `checked_*`
//! methods report it as [`Error::PointMismatch`] instead.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Default truncation order in `z`.
pub const Z_MAX: usize = 6;
/// Default truncation order in `r`.
pub const R_MAX: usize = 2;
/// Default guard on the constant term of a divisor.
pub const EPS_DIV: f64 = 1e-12;

const MAX_ORDER: usize = 24;

fn binomial(n: usize, k: usize) -> f64 {
    debug_assert!(n <= MAX_ORDER);
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    z0: f64,
    r0: f64,
    nz: usize,
    nr: usize,
    coeffs: Vec<f64>,
}

impl Jet {
    fn zeros(z0: f64, r0: f64, nz: usize, nr: usize) -> Self {
        assert!(nz <= MAX_ORDER && nr <= MAX_ORDER, "jet order too large");
        Self {
            z0,
            r0,
            nz,
            nr,
            coeffs: vec![0.0; (nz + 1) * (nr + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.nr + 1) + j
    }

    /// Constant jet with the default orders.
    pub fn constant(c: f64, z0: f64, r0: f64) -> Self {
        Self::constant_with_orders(c, z0, r0, Z_MAX, R_MAX)
    }

    pub fn constant_with_orders(c: f64, z0: f64, r0: f64, nz: usize, nr: usize) -> Self {
        let mut j = Self::zeros(z0, r0, nz, nr);
        j.coeffs[0] = c;
        j
    }

    /// The coordinate `z` seeded at `(z0, r0)` with the default orders.
    pub fn var_z(z0: f64, r0: f64) -> Self {
        Self::var_z_with_orders(z0, r0, Z_MAX, R_MAX)
    }

    pub fn var_z_with_orders(z0: f64, r0: f64, nz: usize, nr: usize) -> Self {
        let mut j = Self::constant_with_orders(z0, z0, r0, nz, nr);
        if nz >= 1 {
            let k = j.idx(1, 0);
            j.coeffs[k] = 1.0;
        }
        j
    }

    /// The coordinate `r` seeded at `(z0, r0)` with the default orders.
    pub fn var_r(z0: f64, r0: f64) -> Self {
        Self::var_r_with_orders(z0, r0, Z_MAX, R_MAX)
    }

    pub fn var_r_with_orders(z0: f64, r0: f64, nz: usize, nr: usize) -> Self {
        let mut j = Self::constant_with_orders(r0, z0, r0, nz, nr);
        if nr >= 1 {
            let k = j.idx(0, 1);
            j.coeffs[k] = 1.0;
        }
        j
    }

    /// Univariate variable `t` at `t0` carrying derivatives up to `order`.
    pub fn univariate(t0: f64, order: usize) -> Self {
        Self::var_z_with_orders(t0, 0.0, order, 0)
    }

    /// Builds a jet from raw derivatives `coeffs[i][j] = ∂_z^i ∂_r^j f`.
    pub fn from_partials(z0: f64, r0: f64, partials: &[Vec<f64>]) -> Result<Self> {
        let nz = partials.len().checked_sub(1).ok_or_else(|| {
            Error::Domain("a jet needs at least one coefficient".into())
        })?;
        let nr = partials[0].len().checked_sub(1).ok_or_else(|| {
            Error::Domain("a jet needs at least one coefficient".into())
        })?;
        if partials.iter().any(|row| row.len() != nr + 1) {
            return Err(Error::Domain("ragged partial-derivative table".into()));
        }
        let mut j = Self::zeros(z0, r0, nz, nr);
        for (i, row) in partials.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let at = j.idx(i, k);
                j.coeffs[at] = *v;
            }
        }
        Ok(j)
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Truncation orders `(nz, nr)`.
    pub fn orders(&self) -> (usize, usize) {
        (self.nz, self.nr)
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw partial `∂_z^i ∂_r^j`, or `None` beyond the truncation.
    pub fn coeff(&self, i: usize, j: usize) -> Option<f64> {
        (i <= self.nz && j <= self.nr).then(|| self.coeffs[self.idx(i, j)])
    }

    /// Raw partial `∂_z^i ∂_r^j`; panics beyond the truncation.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j).unwrap_or_else(|| {
            panic!(
                "partial ({i}, {j}) beyond jet orders ({}, {})",
                self.nz, self.nr
            )
        })
    }

    /// `[f, f_z, f_zz, ...]` at the expansion point, `count` entries.
    pub fn z_series(&self, count: usize) -> Vec<f64> {
        (0..count).map(|i| self.get(i, 0)).collect()
    }

    /// Drops orders above `(nz, nr)`.
    pub fn truncate(&self, nz: usize, nr: usize) -> Self {
        let nz = nz.min(self.nz);
        let nr = nr.min(self.nr);
        let mut out = Self::zeros(self.z0, self.r0, nz, nr);
        for i in 0..=nz {
            for j in 0..=nr {
                let a = out.idx(i, j);
                out.coeffs[a] = self.get(i, j);
            }
        }
        out
    }

    fn same_point(&self, other: &Self) -> Result<()> {
        if self.z0 == other.z0 && self.r0 == other.r0 {
            Ok(())
        } else {
            Err(Error::PointMismatch(self.z0, self.r0, other.z0, other.r0))
        }
    }

    fn common(&self, other: &Self) -> Result<(usize, usize)> {
        self.same_point(other)?;
        Ok((self.nz.min(other.nz), self.nr.min(other.nr)))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        let (nz, nr) = self.common(other)?;
        let mut out = Self::zeros(self.z0, self.r0, nz, nr);
        for i in 0..=nz {
            for j in 0..=nr {
                let a = out.idx(i, j);
                out.coeffs[a] = self.get(i, j) + other.get(i, j);
            }
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.scale(-1.0))
    }

    /// Bivariate Leibniz product.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        let (nz, nr) = self.common(other)?;
        let mut out = Self::zeros(self.z0, self.r0, nz, nr);
        for i in 0..=nz {
            for j in 0..=nr {
                let mut acc = 0.0;
                for p in 0..=i {
                    let bp = binomial(i, p);
                    for q in 0..=j {
                        acc += bp
                            * binomial(j, q)
                            * self.get(p, q)
                            * other.get(i - p, j - q);
                    }
                }
                let a = out.idx(i, j);
                out.coeffs[a] = acc;
            }
        }
        Ok(out)
    }

    /// Quotient `self / other`; the divisor's constant term must exceed
    /// [`EPS_DIV`] in magnitude.
    pub fn div(&self, other: &Self) -> Result<Self> {
        self.div_guarded(other, EPS_DIV)
    }

    pub fn div_guarded(&self, other: &Self, eps: f64) -> Result<Self> {
        let (nz, nr) = self.common(other)?;
        let b00 = other.value();
        if !(b00.abs() > eps) {
            return Err(Error::SingularJet { value: b00 });
        }
        let mut q = Self::zeros(self.z0, self.r0, nz, nr);
        for i in 0..=nz {
            for j in 0..=nr {
                let mut acc = self.get(i, j);
                for p in 0..=i {
                    let bp = binomial(i, p);
                    for s in 0..=j {
                        if p == 0 && s == 0 {
                            continue;
                        }
                        acc -= bp * binomial(j, s) * other.get(p, s) * q.get(i - p, j - s);
                    }
                }
                let a = q.idx(i, j);
                q.coeffs[a] = acc / b00;
            }
        }
        Ok(q)
    }

    pub fn recip(&self) -> Result<Self> {
        let one = Self::constant_with_orders(1.0, self.z0, self.r0, self.nz, self.nr);
        one.div(self)
    }

    /// Square root; the constant term must be strictly positive.
    pub fn sqrt(&self) -> Result<Self> {
        let a00 = self.value();
        if !(a00 > 0.0) {
            return Err(Error::Domain(format!(
                "square root of non-positive value {a00:e}"
            )));
        }
        let mut s = Self::zeros(self.z0, self.r0, self.nz, self.nr);
        s.coeffs[0] = a00.sqrt();
        let s00 = s.coeffs[0];
        for i in 0..=self.nz {
            for j in 0..=self.nr {
                if i == 0 && j == 0 {
                    continue;
                }
                let mut acc = self.get(i, j);
                for p in 0..=i {
                    let bp = binomial(i, p);
                    for q in 0..=j {
                        let low = p == 0 && q == 0;
                        let high = p == i && q == j;
                        if low || high {
                            continue;
                        }
                        acc -= bp * binomial(j, q) * s.get(p, q) * s.get(i - p, j - q);
                    }
                }
                let a = s.idx(i, j);
                s.coeffs[a] = acc / (2.0 * s00);
            }
        }
        Ok(s)
    }

    /// Integer power; negative exponents go through [`Jet::recip`].
    pub fn powi(&self, k: i32) -> Result<Self> {
        if k < 0 {
            return self.powi(-k)?.recip();
        }
        let mut result = Self::constant_with_orders(1.0, self.z0, self.r0, self.nz, self.nr);
        let mut base = self.clone();
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }

    /// Composition `g(self)` for a univariate `g` given by its raw derivatives
    /// `derivs[k] = g^{(k)}(a0)` at the inner value `a0 = self.value()`.
    ///
    /// Needs `derivs.len() > nz + nr`; missing high orders are a domain error.
    pub fn compose(&self, derivs: &[f64]) -> Result<Self> {
        let depth = self.nz + self.nr;
        if derivs.len() <= depth {
            return Err(Error::Domain(format!(
                "composition needs {} derivatives, got {}",
                depth + 1,
                derivs.len()
            )));
        }
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut out = Self::constant_with_orders(derivs[0], self.z0, self.r0, self.nz, self.nr);
        let mut power = Self::constant_with_orders(1.0, self.z0, self.r0, self.nz, self.nr);
        let mut factorial = 1.0;
        for (k, dk) in derivs.iter().enumerate().take(depth + 1).skip(1) {
            power = &power * &delta;
            factorial *= k as f64;
            out = &out + &power.scale(dk / factorial);
        }
        Ok(out)
    }

    pub fn exp(&self) -> Result<Self> {
        let e = self.value().exp();
        self.compose(&vec![e; self.nz + self.nr + 1])
    }

    pub fn ln(&self) -> Result<Self> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(Error::Domain(format!("logarithm of non-positive value {a:e}")));
        }
        let depth = self.nz + self.nr;
        let mut d = Vec::with_capacity(depth + 1);
        d.push(a.ln());
        let mut fact = 1.0;
        for k in 1..=depth {
            if k > 1 {
                fact *= (k - 1) as f64;
            }
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * fact / a.powi(k as i32));
        }
        self.compose(&d)
    }

    /// Real power `self^p` for a positive base.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(Error::Domain(format!(
                "real power {p} of non-positive value {a:e}"
            )));
        }
        let depth = self.nz + self.nr;
        let mut d = Vec::with_capacity(depth + 1);
        let mut falling = 1.0;
        for k in 0..=depth {
            d.push(falling * a.powf(p - k as f64));
            falling *= p - k as f64;
        }
        self.compose(&d)
    }

    pub fn atan(&self) -> Result<Self> {
        let a = self.value();
        let depth = self.nz + self.nr;
        let mut d = vec![a.atan()];
        if depth >= 1 {
            // atan' = 1 / (1 + t^2); its derivatives come from a univariate jet.
            let t = Self::univariate(a, depth - 1);
            let denom = &(&t * &t) + 1.0;
            let inner = denom.recip()?;
            d.extend((0..depth).map(|k| inner.get(k, 0)));
        }
        self.compose(&d)
    }

    /// `∂_z` of the jet; the result has one fewer order in `z`.
    pub fn dz(&self) -> Result<Self> {
        if self.nz == 0 {
            return Err(Error::OrderExhausted("z"));
        }
        let mut out = Self::zeros(self.z0, self.r0, self.nz - 1, self.nr);
        for i in 0..self.nz {
            for j in 0..=self.nr {
                let a = out.idx(i, j);
                out.coeffs[a] = self.get(i + 1, j);
            }
        }
        Ok(out)
    }

    /// `∂_r` of the jet; the result has one fewer order in `r`.
    pub fn dr(&self) -> Result<Self> {
        if self.nr == 0 {
            return Err(Error::OrderExhausted("r"));
        }
        let mut out = Self::zeros(self.z0, self.r0, self.nz, self.nr - 1);
        for i in 0..=self.nz {
            for j in 0..self.nr {
                let a = out.idx(i, j);
                out.coeffs[a] = self.get(i, j + 1);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= k);
        out
    }

    /// Largest absolute coefficient difference against `other` over the
    /// common orders.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let (nz, nr) = self.common(other)?;
        let mut m: f64 = 0.0;
        for i in 0..=nz {
            for j in 0..=nr {
                m = m.max((self.get(i, j) - other.get(i, j)).abs());
            }
        }
        Ok(m)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$checked(rhs).expect("jet operands must share an expansion point")
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
