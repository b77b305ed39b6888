//! One-variable functions with analytic derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quadrature::integrate;

/// Derivative order every implementation must support: six `z` orders plus
/// the composition margin used by the metric constructors.
pub const REQUIRED_ORDER: usize = 8;

/// A scalar function of one variable that reports raw derivatives.
pub trait ScalarFunction1D: Send + Sync + fmt::Debug {
    /// `[f(t), f'(t), ..., f^(order)(t)]`.
    fn derivatives(&self, t: f64, order: usize) -> Result<Vec<f64>>;

    fn value(&self, t: f64) -> Result<f64> {
        Ok(self.derivatives(t, 0)?[0])
    }
}

pub type SharedFn = Arc<dyn ScalarFunction1D>;

/// A parsed one-variable expression such as `1+r^2` or `sqrt(t^2+0.5)`.
#[derive(Debug, Clone)]
pub struct ExprFunction {
    source: String,
    expr: Expr,
}

impl ExprFunction {
    pub fn parse(source: &str) -> Result<Self> {
        let expr = Expr::parse(source)?;
        let vars = expr.variables();
        if vars.len() > 1 {
            return Err(Error::Parse {
                pos: 0,
                msg: format!(
                    "expected at most one variable, found {}",
                    vars.into_iter().collect::<Vec<_>>().join(", ")
                ),
            });
        }
        Ok(Self {
            source: source.to_string(),
            expr,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn shared(source: &str) -> Result<SharedFn> {
        Ok(Arc::new(Self::parse(source)?))
    }
}

impl ScalarFunction1D for ExprFunction {
    fn derivatives(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        self.expr.derivatives_1d(t, order)
    }
}

/// `G_c(t) = ∫_0^t ∫_0^τ k(ν) dν dτ + c` for a positive kernel `k`.
///
/// The value and first derivative come from quadrature (the double integral
/// is folded to `∫_0^t (t-τ) k(τ) dτ`); `G_c'' = k` and higher orders come
/// from the kernel's own derivatives.
#[derive(Debug, Clone)]
pub struct GcFunction {
    kernel: SharedFn,
    c: f64,
}

impl GcFunction {
    pub fn new(kernel: SharedFn, c: f64) -> Self {
        Self { kernel, c }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    fn kernel_value(&self, t: f64) -> f64 {
        self.kernel.value(t).unwrap_or(f64::NAN)
    }

    /// `∫_0^t τ k(τ) dτ`, the quantity that must stay below `c`.
    pub fn moment(&self, t: f64) -> Result<f64> {
        integrate(|tau| tau * self.kernel_value(tau), 0.0, t)
    }
}

impl ScalarFunction1D for GcFunction {
    fn derivatives(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        let k0 = self.kernel.value(t)?;
        if !(k0 > 0.0) {
            return Err(Error::Domain(format!(
                "G_c kernel must be positive, got {k0:e} at t = {t}"
            )));
        }
        let first = integrate(|tau| self.kernel_value(tau), 0.0, t)?;
        let value = self.c + integrate(|tau| (t - tau) * self.kernel_value(tau), 0.0, t)?;
        if !(value > 0.0) {
            return Err(Error::Domain(format!("G_c({t}) = {value:e} is not positive")));
        }
        let mut out = vec![value];
        if order >= 1 {
            out.push(first);
        }
        if order >= 2 {
            out.extend(self.kernel.derivatives(t, order - 2)?);
        }
        Ok(out)
    }
}

type JetClosure = Box<dyn Fn(&crate::jet::Jet) -> Result<crate::jet::Jet> + Send + Sync>;

/// A function given by a Rust closure that evaluates it on a univariate jet.
pub struct JetFn {
    name: String,
    f: JetClosure,
}

impl JetFn {
    pub fn new<F>(name: &str, f: F) -> Self
    where
        F: Fn(&crate::jet::Jet) -> Result<crate::jet::Jet> + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            f: Box::new(f),
        }
    }
}

impl fmt::Debug for JetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetFn({})", self.name)
    }
}

impl ScalarFunction1D for JetFn {
    fn derivatives(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        let j = (self.f)(&crate::jet::Jet::univariate(t, order))?;
        let mut out = j.z_series(j.orders().0 + 1);
        out.resize(order + 1, 0.0);
        Ok(out)
    }
}
