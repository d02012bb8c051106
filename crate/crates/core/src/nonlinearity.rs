//! Absorption nonlinearities, truncation operators, and datum preparation.

use crate::field::ScalarField;
use crate::grid::Grid;
use crate::quad::adaptive_simpson;
use std::fmt;
use std::sync::Arc;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type CoordFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Clamp `s` to `[-k, k]`.
///
/// Panics when `k <= 0`.
pub fn truncate(s: f64, k: f64) -> f64 {
    assert!(k > 0.0, "truncation level must be positive, got {k}");
    s.clamp(-k, k)
}

/// Tail part `s - truncate(s, k)`.
pub fn tail(s: f64, k: f64) -> f64 {
    s - truncate(s, k)
}

/// Saturated ramp: 0 on `[-(k-delta), k-delta]`, `sign(s)` outside `[-k, k]`,
/// linear in between.
///
/// Panics unless `k >= delta > 0`.
pub fn saturated_ramp(s: f64, k: f64, delta: f64) -> f64 {
    assert!(delta > 0.0 && delta <= k, "need k >= delta > 0, got k={k} delta={delta}");
    let a = s.abs();
    if a <= k - delta {
        0.0
    } else if a >= k {
        s.signum()
    } else {
        s.signum() * (a - (k - delta)) / delta
    }
}

/// The absorption term `g` together with its declared structure.
///
/// `g` and its antiderivative are plain callables; the structural flags are
/// declarations that [`AbsorptionSpec::validate`] spot-checks on a lattice
/// rather than proves.
#[derive(Clone)]
pub struct AbsorptionSpec {
    name: String,
    g: RealFn,
    /// `G(s) = int_0^s g`, when known in closed form.
    antiderivative: Option<RealFn>,
    /// `g'`, when known in closed form; otherwise differenced on demand.
    derivative: Option<RealFn>,
    pub satisfies_sign: bool,
    pub coercive: bool,
    pub strictly_increasing: bool,
    /// `(c0, q)` certifying `g(s) s >= c0 |s|^q`.
    pub power_growth: Option<(f64, f64)>,
}

impl fmt::Debug for AbsorptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AbsorptionSpec")
            .field("name", &self.name)
            .field("satisfies_sign", &self.satisfies_sign)
            .field("coercive", &self.coercive)
            .field("strictly_increasing", &self.strictly_increasing)
            .field("power_growth", &self.power_growth)
            .finish()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AbsorptionError {
    #[error("sign condition fails at s={s}: g(s)s = {value}")]
    SignCondition { s: f64, value: f64 },
    #[error("power growth certificate fails at s={s}: g(s)s = {value} < c0|s|^q = {bound}")]
    PowerGrowth { s: f64, value: f64, bound: f64 },
    #[error("antiderivative mismatch at s={s}: dG = {diff}, g = {g}")]
    AntiderivativeMismatch { s: f64, diff: f64, g: f64 },
}

impl AbsorptionSpec {
    pub fn new(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> AbsorptionSpec {
        AbsorptionSpec {
            name: name.into(),
            g: Arc::new(g),
            antiderivative: None,
            derivative: None,
            satisfies_sign: false,
            coercive: false,
            strictly_increasing: false,
            power_growth: None,
        }
    }

    pub fn with_antiderivative(
        mut self,
        big_g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.antiderivative = Some(Arc::new(big_g));
        self
    }

    pub fn with_derivative(mut self, dg: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(dg));
        self
    }

    pub fn with_flags(mut self, sign: bool, coercive: bool, strictly_increasing: bool) -> Self {
        self.satisfies_sign = sign;
        self.coercive = coercive;
        self.strictly_increasing = strictly_increasing;
        self
    }

    pub fn with_power_growth(mut self, c0: f64, q: f64) -> Self {
        self.power_growth = Some((c0, q));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g(&self, s: f64) -> f64 {
        (self.g)(s)
    }

    /// Derivative of `g`; central difference when no closed form was given.
    pub fn dg(&self, s: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(s),
            None => {
                let h = 1e-6 * (1.0 + s.abs());
                ((self.g)(s + h) - (self.g)(s - h)) / (2.0 * h)
            }
        }
    }

    /// `G(s) = int_0^s g`; adaptive quadrature when no closed form was given.
    pub fn big_g(&self, s: f64) -> f64 {
        match &self.antiderivative {
            Some(a) => a(s),
            None => adaptive_simpson(&|t| (self.g)(t), 0.0, s, 1e-12 * (1.0 + s.abs())),
        }
    }

    /// Spot-check the declared structure on the lattice `s = ±10^j`.
    pub fn validate(&self) -> Result<(), AbsorptionError> {
        for j in -6..=2 {
            for sign in [-1.0, 1.0] {
                let s = sign * 10f64.powi(j);
                let gs = self.g(s);
                if self.satisfies_sign && gs * s < -1e-12 {
                    return Err(AbsorptionError::SignCondition { s, value: gs * s });
                }
                if let Some((c0, q)) = self.power_growth {
                    let bound = c0 * s.abs().powf(q);
                    if gs * s < bound - 1e-9 {
                        return Err(AbsorptionError::PowerGrowth { s, value: gs * s, bound });
                    }
                }
                let h = 1e-7 * (1.0 + s.abs());
                let diff = (self.big_g(s + h) - self.big_g(s - h)) / (2.0 * h);
                if (diff - gs).abs() > 1e-6 * (1.0 + gs.abs()) {
                    return Err(AbsorptionError::AntiderivativeMismatch { s, diff, g: gs });
                }
            }
        }
        Ok(())
    }

    /// Registry: `identity`.
    pub fn identity() -> AbsorptionSpec {
        AbsorptionSpec::new("identity", |s| s)
            .with_antiderivative(|s| 0.5 * s * s)
            .with_derivative(|_| 1.0)
            .with_flags(true, true, true)
            .with_power_growth(1.0, 2.0)
    }

    /// Registry: `power(q, c0)`, `g(s) = c0 |s|^{q-2} s` with `q >= 2`.
    pub fn power(q: f64, c0: f64) -> AbsorptionSpec {
        assert!(q >= 2.0 && c0 > 0.0, "power registry needs q >= 2 and c0 > 0");
        AbsorptionSpec::new(format!("power({q},{c0})"), move |s| c0 * s.abs().powf(q - 2.0) * s)
            .with_antiderivative(move |s| c0 * s.abs().powf(q) / q)
            .with_derivative(move |s| if s == 0.0 && q > 2.0 { 0.0 } else { c0 * (q - 1.0) * s.abs().powf(q - 2.0) })
            .with_flags(true, true, true)
            .with_power_growth(c0, q)
    }

    /// Registry: `atan` (bounded, hence not coercive).
    pub fn atan() -> AbsorptionSpec {
        AbsorptionSpec::new("atan", |s| s.atan())
            .with_antiderivative(|s| s * s.atan() - 0.5 * (1.0 + s * s).ln())
            .with_derivative(|s| 1.0 / (1.0 + s * s))
            .with_flags(true, false, true)
    }

    /// Registry: `zero` (no absorption).
    pub fn zero() -> AbsorptionSpec {
        AbsorptionSpec::new("zero", |_| 0.0)
            .with_antiderivative(|_| 0.0)
            .with_derivative(|_| 0.0)
            .with_flags(true, false, false)
    }

    /// Look up a registry entry by config name.
    pub fn registry(name: &str) -> Option<AbsorptionSpec> {
        match name {
            "identity" => Some(AbsorptionSpec::identity()),
            "atan" => Some(AbsorptionSpec::atan()),
            "zero" => Some(AbsorptionSpec::zero()),
            _ => None,
        }
    }

    /// The capped nonlinearity `T_cap(g(s))` with a consistent antiderivative,
    /// derivative, and flags.
    pub fn truncated(&self, cap: f64) -> AbsorptionSpec {
        assert!(cap > 0.0, "cap must be positive, got {cap}");
        let base = self.clone();
        let g = {
            let base = base.clone();
            move |s: f64| truncate(base.g(s), cap)
        };
        let dg = {
            let base = base.clone();
            move |s: f64| {
                if base.g(s).abs() < cap {
                    base.dg(s)
                } else {
                    0.0
                }
            }
        };
        // For a monotone g the cap is reached at most once per sign, so the
        // antiderivative of the capped g is piecewise: the original G inside
        // the crossing points, linear growth at slope cap outside.
        let anti: Option<RealFn> = if self.strictly_increasing && self.antiderivative.is_some() {
            let hi = crossing(&base, cap);
            let lo = crossing_neg(&base, cap);
            let base = base.clone();
            Some(Arc::new(move |s: f64| {
                if s > hi {
                    base.big_g(hi) + cap * (s - hi)
                } else if s < lo {
                    base.big_g(lo) + cap * (lo - s)
                } else {
                    base.big_g(s)
                }
            }))
        } else {
            None
        };
        let mut out = AbsorptionSpec::new(format!("{}|cap={cap:.6e}", self.name), g)
            .with_derivative(dg)
            .with_flags(self.satisfies_sign, false, false);
        out.antiderivative = anti;
        out
    }
}

/// Smallest `s >= 0` with `g(s) >= cap`, or `+inf` when `g` stays below it.
fn crossing(spec: &AbsorptionSpec, cap: f64) -> f64 {
    if spec.g(0.0) >= cap {
        return 0.0;
    }
    let mut hi = 1.0;
    let mut n = 0;
    while spec.g(hi) < cap {
        hi *= 2.0;
        n += 1;
        if n > 1100 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spec.g(mid) < cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest `s <= 0` with `g(s) <= -cap`, or `-inf`.
fn crossing_neg(spec: &AbsorptionSpec, cap: f64) -> f64 {
    let flipped = AbsorptionSpec::new("flipped", {
        let g = spec.g.clone();
        move |s| -g(-s)
    });
    let mut tmp = flipped;
    tmp.strictly_increasing = spec.strictly_increasing;
    -crossing(&tmp, cap)
}

/// `g_p(s) = T_{1/(p-1)}(g(s))`.
///
/// Panics when `p <= 1`.
pub fn g_trunc(spec: &AbsorptionSpec, p: f64, s: f64) -> f64 {
    assert!(p > 1.0, "g_trunc needs p > 1, got {p}");
    truncate(spec.g(s), 1.0 / (p - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatumClass {
    Linf,
    LN,
    WeakLN,
    Lq,
    L1,
}

impl DatumClass {
    pub fn label(&self) -> &'static str {
        match self {
            DatumClass::Linf => "Linf",
            DatumClass::LN => "LN",
            DatumClass::WeakLN => "LNweak",
            DatumClass::Lq => "Lq",
            DatumClass::L1 => "L1",
        }
    }
}

#[derive(Clone)]
enum DatumEval {
    Analytic(CoordFn),
    Samples(ScalarField),
}

/// The right-hand side `f`: an analytic rule or a sampled field, plus an
/// advisory integrability tag.
#[derive(Clone)]
pub struct DatumSpec {
    name: String,
    eval: DatumEval,
    pub class: DatumClass,
}

impl fmt::Debug for DatumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DatumSpec")
            .field("name", &self.name)
            .field("class", &self.class.label())
            .finish()
    }
}

impl DatumSpec {
    pub fn analytic(
        name: impl Into<String>,
        class: DatumClass,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> DatumSpec {
        DatumSpec { name: name.into(), eval: DatumEval::Analytic(Arc::new(f)), class }
    }

    pub fn samples(name: impl Into<String>, class: DatumClass, f: ScalarField) -> DatumSpec {
        DatumSpec { name: name.into(), eval: DatumEval::Samples(f), class }
    }

    pub fn constant(c: f64) -> DatumSpec {
        DatumSpec::analytic(format!("const({c})"), DatumClass::Linf, move |_| c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Evaluate on the nodes of `grid`. Sampled data must already live on a
    /// grid of the same shape.
    pub fn sample(&self, grid: &Arc<Grid>) -> ScalarField {
        match &self.eval {
            DatumEval::Analytic(f) => {
                let field = ScalarField::from_fn(grid, |c| f(c));
                assert!(
                    field.data().iter().all(|v| v.is_finite()),
                    "datum '{}' produced non-finite samples",
                    self.name
                );
                field
            }
            DatumEval::Samples(s) => {
                assert_eq!(
                    s.grid().shape(),
                    grid.shape(),
                    "sampled datum '{}' lives on a different grid",
                    self.name
                );
                ScalarField::from_vec(grid, s.data().to_vec())
            }
        }
    }

    /// Pointwise truncation at `cap` (`T_cap(f)`); the result is bounded, so
    /// the class tag becomes `Linf`.
    pub fn truncated(&self, cap: f64) -> DatumSpec {
        assert!(cap > 0.0, "cap must be positive, got {cap}");
        let name = format!("{}|cap={cap:.6e}", self.name);
        match &self.eval {
            DatumEval::Analytic(f) => {
                let f = f.clone();
                DatumSpec {
                    name,
                    eval: DatumEval::Analytic(Arc::new(move |c: &[f64]| truncate(f(c), cap))),
                    class: DatumClass::Linf,
                }
            }
            DatumEval::Samples(s) => DatumSpec {
                name,
                eval: DatumEval::Samples(s.map(|v| truncate(v, cap))),
                class: DatumClass::Linf,
            },
        }
    }
}
