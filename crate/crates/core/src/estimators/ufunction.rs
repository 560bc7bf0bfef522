use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type WeightFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Weight function `u` of a Maronna-type estimator together with
/// `phi(x) = x u(x)`, its supremum `phi_inf` and the unit crossing `phi^{-1}(1)`.
#[derive(Clone)]
pub struct UFunction {
    name: String,
    u: WeightFn,
    phi_inf: f64,
    d0: Option<f64>,
}

impl fmt::Debug for UFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UFunction")
            .field("name", &self.name)
            .field("phi_inf", &self.phi_inf)
            .field("d0", &self.d0)
            .finish()
    }
}

impl UFunction {
    /// `u(x) = 2 / (1 + x)`; `phi(x) = 2x/(1+x)` crosses 1 at `x = 1`.
    pub fn rational() -> Self {
        Self {
            name: "rational".into(),
            u: Arc::new(|x| 2.0 / (1.0 + x)),
            phi_inf: 2.0,
            d0: Some(1.0),
        }
    }

    /// Unnormalized Huber-type weight `u(x) = min(1, t/x)`, so `phi_inf = t`.
    pub fn huber(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "huber threshold must be > 0, got {t}"
            )));
        }
        Ok(Self {
            name: format!("huber:{t}"),
            u: Arc::new(move |x| if x <= t { 1.0 } else { t / x }),
            phi_inf: t,
            // phi(x) = x on [0, t]
            d0: if t > 1.0 { Some(1.0) } else { None },
        })
    }

    /// `u = c` everywhere; the weights then no longer depend on the scatter.
    pub fn constant(c: f64) -> Self {
        Self {
            name: format!("constant:{c}"),
            u: Arc::new(move |_| c),
            phi_inf: if c > 0.0 { f64::INFINITY } else { 0.0 },
            d0: if c > 0.0 { Some(1.0 / c) } else { None },
        }
    }

    /// User-supplied `u`. `phi_inf` is the supremum of `x u(x)`; the unit
    /// crossing is located once by bisection.
    pub fn custom(
        name: impl Into<String>,
        u: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_inf: f64,
    ) -> Self {
        let u: WeightFn = Arc::new(u);
        let d0 = if phi_inf > 1.0 {
            let f = u.clone();
            find_unit_crossing(move |x| x * f(x))
        } else {
            None
        };
        Self {
            name: name.into(),
            u,
            phi_inf,
            d0,
        }
    }

    /// Look up a built-in by registry name: `rational` or `huber:<t>`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.split_once(':') {
            None if name == "rational" => Ok(Self::rational()),
            Some(("huber", t)) => {
                let t: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad huber threshold {t:?}")))?;
                Self::huber(t)
            }
            _ => Err(Error::InvalidInput(format!("unknown u-function {name:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn u(&self, x: f64) -> f64 {
        (self.u)(x)
    }

    pub fn phi(&self, x: f64) -> f64 {
        x * (self.u)(x)
    }

    pub fn phi_inf(&self) -> f64 {
        self.phi_inf
    }

    /// `phi^{-1}(1)` when `phi` crosses 1.
    pub fn d0(&self) -> Option<f64> {
        self.d0
    }

    /// Existence condition `phi_inf > 1` for the unregularized estimator.
    pub fn check_existence(&self) -> Result<()> {
        if self.phi_inf > 1.0 {
            Ok(())
        } else {
            Err(Error::Existence(format!(
                "phi_inf = {} <= 1 for u-function {}",
                self.phi_inf, self.name
            )))
        }
    }
}

/// Bisection for `phi(x) = 1` on `[1e-12, x_hi]`, doubling `x_hi` until the
/// bracket holds; tolerance `1e-12`.
pub(crate) fn find_unit_crossing(phi: impl Fn(f64) -> f64) -> Option<f64> {
    let mut lo = 1e-12;
    if phi(lo) >= 1.0 {
        return None;
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while phi(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return None;
        }
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
