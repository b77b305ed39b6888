use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A base point `x = (x⁰, x̄)` with tangent `y = (y⁰, ȳ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub x0: f64,
    pub xbar: Vec<f64>,
    pub y0: f64,
    pub ybar: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

impl EvalPoint {
    pub fn new(x0: f64, xbar: Vec<f64>, y0: f64, ybar: Vec<f64>) -> Result<Self> {
        if xbar.len() != ybar.len() {
            return Err(Error::InvalidPoint(format!(
                "x̄ has {} components but ȳ has {}",
                xbar.len(),
                ybar.len()
            )));
        }
        if xbar.len() < 2 {
            return Err(Error::InvalidPoint("dimension n must be at least 2".into()));
        }
        let p = Self { x0, xbar, y0, ybar };
        if !(p.u() > 0.0) {
            return Err(Error::InvalidPoint("|ȳ| must be positive".into()));
        }
        if ![p.x0, p.y0].iter().chain(&p.xbar).chain(&p.ybar).all(|v| v.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        Ok(p)
    }

    /// Builds a point from the full vectors `x = (x⁰, x̄)`, `y = (y⁰, ȳ)`.
    pub fn from_full(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::InvalidPoint("empty coordinate vector".into()));
        }
        Self::new(x[0], x[1..].to_vec(), y[0], y[1..].to_vec())
    }

    pub fn n(&self) -> usize {
        self.xbar.len()
    }

    pub fn x_full(&self) -> Vec<f64> {
        std::iter::once(self.x0).chain(self.xbar.iter().copied()).collect()
    }

    pub fn y_full(&self) -> Vec<f64> {
        std::iter::once(self.y0).chain(self.ybar.iter().copied()).collect()
    }

    /// `u = |ȳ|`.
    pub fn u(&self) -> f64 {
        dot(&self.ybar, &self.ybar).sqrt()
    }

    /// `r = |x̄|`.
    pub fn r(&self) -> f64 {
        dot(&self.xbar, &self.xbar).sqrt()
    }

    /// `z = y⁰ / |ȳ|`.
    pub fn z(&self) -> f64 {
        self.y0 / self.u()
    }

    /// `⟨x̄, ȳ⟩`.
    pub fn xy(&self) -> f64 {
        dot(&self.xbar, &self.ybar)
    }

    /// `s = ⟨x̄, ȳ⟩ / |ȳ|`.
    pub fn s(&self) -> f64 {
        self.xy() / self.u()
    }

    /// The same base point with `y` scaled by `lambda`.
    pub fn scale_y(&self, lambda: f64) -> Self {
        Self {
            x0: self.x0,
            xbar: self.xbar.clone(),
            y0: lambda * self.y0,
            ybar: self.ybar.iter().map(|v| lambda * v).collect(),
        }
    }

    /// Applies an `n × n` row-major matrix to both `x̄` and `ȳ`.
    pub fn transform_bar(&self, o: &[f64]) -> Self {
        let n = self.n();
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..n).map(|i| (0..n).map(|j| o[i * n + j] * v[j]).sum()).collect()
        };
        Self {
            x0: self.x0,
            xbar: apply(&self.xbar),
            y0: self.y0,
            ybar: apply(&self.ybar),
        }
    }
}
