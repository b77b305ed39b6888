//! Adaptive composite Gauss–Legendre quadrature.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const NODES: usize = 16;
const MAX_LEVEL: u32 = 14;

/// Convergence threshold on successive estimates.
pub const QUAD_TOL: f64 = 1e-12;

fn legendre_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(NODES))
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut root = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, root);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * root * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            deriv = n as f64 * (root * p1 - p0) / (root * root - 1.0);
            let step = p1 / deriv;
            root -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -root;
        x[n - 1 - i] = root;
        let wi = 2.0 / ((1.0 - root * root) * deriv * deriv);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn composite<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = legendre_rule();
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            s += wi * f(mid + half * xi);
        }
        total += s * half;
    }
    total
}

/// `∫_a^b f`, doubling the panel count until successive estimates agree to
/// [`QUAD_TOL`] (absolute, or relative for large integrals).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut prev = composite(&mut f, a, b, 1);
    let mut delta = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        let cur = composite(&mut f, a, b, 1 << level);
        delta = (cur - prev).abs();
        if !cur.is_finite() {
            break;
        }
        if delta <= QUAD_TOL * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature { a, b, delta })
}
