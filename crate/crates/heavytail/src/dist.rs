//! Service and interarrival laws.
//!
//! The service time `V` has a regularly varying tail
//!
//! ```text
//! P{V > x} = x^-alpha * L(x),   alpha > 1,
//! ```
//!
//! with `L` one of three slowly varying factors: a positive constant
//! (asymptotically Pareto), `log(1+x)`, or `1/log(1+x)`. Only the tail is
//! pinned down by that formula; below the support edge `x0` (the unique
//! point where the tail formula reaches 1) the law is concentrated, i.e.
//! `P{V > x} = 1` for `x < x0`. Interarrival times `T` are light tailed and
//! scaled so that `E[T] = E[V]`, which puts the two-server queue exactly at
//! traffic intensity 1.
//!
//! The module also carries the two classical regular-variation facts used by
//! the bound checks elsewhere in the crate, as numeric verifiers: Karamata's
//! integral asymptotics and Potter's bounds.

use crate::error::{Error, Result};
use crate::numeric::{integrate, integrate_tail, invert_decreasing};
use crate::rng::open_unit;
use rand::Rng;

/// Slowly varying factor `L` in the tail `x^-alpha * L(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlowVariation {
    /// `L(x) = c`, `c > 0`; the asymptotically Pareto case.
    ConstFactor(f64),
    /// `L(x) = log(1 + x)`.
    LogShift,
    /// `L(x) = 1 / log(1 + x)`.
    InvLogShift,
}

impl SlowVariation {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SlowVariation::ConstFactor(c) => c,
            SlowVariation::LogShift => x.ln_1p(),
            SlowVariation::InvLogShift => 1.0 / x.ln_1p(),
        }
    }
}

/// Regularly varying service-time law.
#[derive(Clone, Debug)]
pub struct TailModel {
    alpha: f64,
    slow: SlowVariation,
    x0: f64,
    mean: f64,
}

/// Relative tolerance for the cached mean (and other one-off quadratures on
/// the service law).
const MEAN_REL_TOL: f64 = 1e-10;

impl TailModel {
    pub fn new(alpha: f64, slow: SlowVariation) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::config(format!(
                "tail index alpha must be finite and > 1, got {alpha}"
            )));
        }
        if let SlowVariation::ConstFactor(c) = slow {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::config(format!("const factor must be > 0, got {c}")));
            }
        }
        let x0 = support_edge(alpha, slow);
        let mut model = TailModel {
            alpha,
            slow,
            x0,
            mean: 0.0,
        };
        // E[V] = int_0^inf P{V > u} du = x0 + int_{x0}^inf tail.
        model.mean = match slow {
            SlowVariation::ConstFactor(_) => x0 * alpha / (alpha - 1.0),
            _ => {
                x0 + integrate_tail(
                    |u| model.raw_tail(u),
                    x0,
                    alpha - 1.0,
                    MEAN_REL_TOL,
                )
            }
        };
        Ok(model)
    }

    pub fn pareto(alpha: f64) -> Result<Self> {
        TailModel::new(alpha, SlowVariation::ConstFactor(1.0))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn slow(&self) -> SlowVariation {
        self.slow
    }

    /// Left support edge: `tail(x) = 1` for all `x <= x0`.
    pub fn support_edge(&self) -> f64 {
        self.x0
    }

    /// Cached `E[V]`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// The unclamped tail formula `x^-alpha * L(x)`; meaningful for `x > 0`.
    pub fn raw_tail(&self, x: f64) -> f64 {
        x.powf(-self.alpha) * self.slow.eval(x)
    }

    /// `P{V > x}`: the tail formula capped at 1, and 1 below the support edge.
    pub fn tail(&self, x: f64) -> f64 {
        if x < self.x0 {
            1.0
        } else {
            self.raw_tail(x).min(1.0)
        }
    }

    /// Inverse tail: the `x` with `tail(x) = u`, for `u` in (0, 1].
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::config(format!("quantile level must be in (0,1], got {u}")));
        }
        if u == 1.0 {
            return Ok(self.x0);
        }
        if let SlowVariation::ConstFactor(c) = self.slow {
            // c x^-alpha = u  =>  x = (c/u)^(1/alpha)
            return Ok((c / u).powf(1.0 / self.alpha));
        }
        let mut hi = self.x0.max(1.0) * 2.0;
        while self.raw_tail(hi) >= u {
            hi *= 2.0;
        }
        Ok(invert_decreasing(
            |x| self.raw_tail(x),
            u,
            self.x0,
            hi,
            |x| 1e-12 * x.max(1.0),
        ))
    }

    /// Inverse-CDF draw using a uniform on (0, 1].
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u = open_unit(rng);
        match self.slow {
            SlowVariation::ConstFactor(_) => self.x0 * u.powf(-1.0 / self.alpha),
            _ => self.quantile(u).expect("u in (0,1]"),
        }
    }

    /// `E[V^2]`, finite only when `alpha > 2`.
    pub fn second_moment(&self) -> Result<f64> {
        if self.alpha <= 2.0 {
            return Err(Error::config(format!(
                "second moment requires alpha > 2, got {}",
                self.alpha
            )));
        }
        // E[V^2] = 2 int_0^inf u P{V>u} du
        let body = self.x0 * self.x0; // 2 * int_0^{x0} u du
        let tail = 2.0 * integrate_tail(
            |u| u * self.raw_tail(u),
            self.x0,
            self.alpha - 2.0,
            MEAN_REL_TOL,
        );
        Ok(body + tail)
    }

    /// `int_s^inf P{V > u} du`, the integrated tail `E[(V - s)^+]`.
    pub fn integrated_tail(&self, s: f64) -> f64 {
        if s < self.x0 {
            return (self.x0 - s) + self.integrated_tail(self.x0);
        }
        match self.slow {
            SlowVariation::ConstFactor(c) => c * s.powf(1.0 - self.alpha) / (self.alpha - 1.0),
            _ => integrate_tail(|u| self.raw_tail(u), s, self.alpha - 1.0, 1e-10),
        }
    }
}

fn support_edge(alpha: f64, slow: SlowVariation) -> f64 {
    match slow {
        SlowVariation::ConstFactor(c) => c.powf(1.0 / alpha),
        _ => {
            // raw tail is strictly decreasing with limits +inf at 0+ and 0 at
            // +inf for alpha > 1, so the edge is the unique root of tail = 1.
            let raw = |x: f64| x.powf(-alpha) * slow.eval(x);
            let mut lo = 1e-9;
            while raw(lo) <= 1.0 {
                lo *= 0.5;
            }
            let mut hi = 1.0;
            while raw(hi) >= 1.0 {
                hi *= 2.0;
            }
            invert_decreasing(raw, 1.0, lo, hi, |x| 1e-14 * x.max(1e-6))
        }
    }
}

/// Interarrival family. All options are light tailed, so
/// `P{T > x} = o(P{V > x})` holds automatically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrivalKind {
    Exponential,
    UniformWindow,
    Deterministic,
}

/// Interarrival law with `E[T]` pinned to the paired service mean, so the
/// traffic intensity is exactly 1.
#[derive(Clone, Copy, Debug)]
pub struct ArrivalModel {
    kind: ArrivalKind,
    mean: f64,
}

impl ArrivalModel {
    pub fn matched(kind: ArrivalKind, service: &TailModel) -> Self {
        ArrivalModel {
            kind,
            mean: service.mean(),
        }
    }

    /// Mainly for unit tests; estimators should use `matched`.
    pub fn with_mean(kind: ArrivalKind, mean: f64) -> Self {
        ArrivalModel { kind, mean }
    }

    pub fn kind(&self) -> ArrivalKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// True if `T` has unbounded support (needed for the regenerative
    /// representation: the workload returns to (0,0) only if arbitrarily
    /// long gaps occur).
    pub fn unbounded_support(&self) -> bool {
        self.kind == ArrivalKind::Exponential
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u = open_unit(rng);
        match self.kind {
            ArrivalKind::Exponential => -self.mean * u.ln(),
            ArrivalKind::UniformWindow => 2.0 * self.mean * u,
            ArrivalKind::Deterministic => self.mean,
        }
    }

    /// `P{T > t}`.
    pub fn tail(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match self.kind {
            ArrivalKind::Exponential => (-t / self.mean).exp(),
            ArrivalKind::UniformWindow => (1.0 - t / (2.0 * self.mean)).max(0.0),
            ArrivalKind::Deterministic => {
                if t < self.mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Density where one exists (the deterministic law has none and is not
    /// used on any code path that needs one).
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.kind {
            ArrivalKind::Exponential => (-t / self.mean).exp() / self.mean,
            ArrivalKind::UniformWindow => {
                if t <= 2.0 * self.mean {
                    0.5 / self.mean
                } else {
                    0.0
                }
            }
            ArrivalKind::Deterministic => panic!("deterministic arrivals have no density"),
        }
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            ArrivalKind::Exponential => self.mean * self.mean,
            ArrivalKind::UniformWindow => self.mean * self.mean / 3.0,
            ArrivalKind::Deterministic => 0.0,
        }
    }

    /// Upper end of the support (infinite for the exponential family).
    pub fn support_hi(&self) -> f64 {
        match self.kind {
            ArrivalKind::Exponential => f64::INFINITY,
            ArrivalKind::UniformWindow => 2.0 * self.mean,
            ArrivalKind::Deterministic => self.mean,
        }
    }
}

// ---------------------------------------------------------------------------
// Spec strings
// ---------------------------------------------------------------------------

/// Parse a service spec string: `pareto:alpha=3`, `rv:alpha=2.5,slow=log`,
/// `rv:alpha=3,slow=invlog`, `rv:alpha=3,slow=const,c=2`.
pub fn parse_service(spec: &str) -> Result<TailModel> {
    let bad = || Error::config(format!("unrecognized service spec '{spec}'"));
    let (head, rest) = spec.split_once(':').ok_or_else(bad)?;
    let mut alpha: Option<f64> = None;
    let mut slow_name: Option<&str> = None;
    let mut c: Option<f64> = None;
    for field in rest.split(',') {
        let (k, v) = field.split_once('=').ok_or_else(bad)?;
        match k {
            "alpha" => alpha = Some(v.parse().map_err(|_| bad())?),
            "slow" => slow_name = Some(v),
            "c" => c = Some(v.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    let alpha = alpha.ok_or_else(bad)?;
    match head {
        "pareto" => {
            if slow_name.is_some() {
                return Err(bad());
            }
            TailModel::new(alpha, SlowVariation::ConstFactor(c.unwrap_or(1.0)))
        }
        "rv" => {
            let slow = match slow_name.ok_or_else(bad)? {
                "log" => SlowVariation::LogShift,
                "invlog" => SlowVariation::InvLogShift,
                "const" => SlowVariation::ConstFactor(c.unwrap_or(1.0)),
                _ => return Err(bad()),
            };
            TailModel::new(alpha, slow)
        }
        _ => Err(bad()),
    }
}

/// Canonical printable form; `parse_service` of the output reproduces the
/// model exactly.
pub fn service_spec_string(model: &TailModel) -> String {
    match model.slow() {
        SlowVariation::ConstFactor(c) if c == 1.0 => format!("pareto:alpha={}", model.alpha()),
        SlowVariation::ConstFactor(c) => format!("rv:alpha={},slow=const,c={}", model.alpha(), c),
        SlowVariation::LogShift => format!("rv:alpha={},slow=log", model.alpha()),
        SlowVariation::InvLogShift => format!("rv:alpha={},slow=invlog", model.alpha()),
    }
}

pub fn parse_arrival_kind(spec: &str) -> Result<ArrivalKind> {
    match spec {
        "exp" => Ok(ArrivalKind::Exponential),
        "uniform" => Ok(ArrivalKind::UniformWindow),
        "det" => Ok(ArrivalKind::Deterministic),
        _ => Err(Error::config(format!("unrecognized arrival spec '{spec}'"))),
    }
}

pub fn arrival_spec_string(kind: ArrivalKind) -> &'static str {
    match kind {
        ArrivalKind::Exponential => "exp",
        ArrivalKind::UniformWindow => "uniform",
        ArrivalKind::Deterministic => "det",
    }
}

// ---------------------------------------------------------------------------
// Regular-variation checks (Karamata, Potter)
// ---------------------------------------------------------------------------

/// Numeric check of Karamata's theorem for `v(u) = u^-alpha L(u)`.
///
/// For `alpha - beta > 1` compares `int_x^inf u^beta v(u) du` against
/// `x^(beta+1) v(x) / (alpha - beta - 1)`; for `alpha - beta < 1` compares
/// the lower integral `int_0^x` against `x^(beta+1) v(x) / (1 - alpha + beta)`.
/// Returns the quadrature/closed-form ratio, which tends to 1 as `x` grows.
pub fn karamata_ratio(alpha: f64, slow: SlowVariation, beta: f64, x: f64) -> Result<f64> {
    let gap = alpha - beta - 1.0;
    if gap.abs() < 1e-9 {
        return Err(Error::config(
            "karamata check undefined at the boundary alpha - beta = 1".to_string(),
        ));
    }
    let v = |u: f64| u.powf(-alpha) * slow.eval(u);
    let integrand = |u: f64| u.powf(beta) * v(u);
    if gap > 0.0 {
        let num = integrate_tail(integrand, x, gap, 1e-9);
        let den = x.powf(beta + 1.0) * v(x) / gap;
        Ok(num / den)
    } else {
        // Exponent of the integrand at 0 (the log factor shifts it by +-1).
        let e0 = beta - alpha
            + match slow {
                SlowVariation::LogShift => 1.0,
                SlowVariation::InvLogShift => -1.0,
                SlowVariation::ConstFactor(_) => 0.0,
            };
        let num = if e0 > -1.0 {
            // Substitute u = x t^k to flatten the endpoint singularity.
            let k = (2.0 / (1.0 + e0)).ceil().max(1.0);
            let g = |t: f64| {
                if t <= 0.0 {
                    0.0
                } else {
                    let u = x * t.powf(k);
                    integrand(u) * x * k * t.powf(k - 1.0)
                }
            };
            integrate(g, 0.0, 1.0, 1e-9)
        } else {
            // Not integrable at 0; a fixed lower limit leaves the divergent
            // growth in x (which is what the theorem speaks to) unchanged.
            integrate(integrand, 1.0, x, 1e-9)
        };
        let den = x.powf(beta + 1.0) * v(x) / (1.0 - alpha + beta);
        Ok(num / den)
    }
}

#[derive(Clone, Debug)]
pub struct PotterReport {
    /// Smallest signed margin over the grid; >= 0 means every inequality held.
    pub worst_slack: f64,
    /// Threshold below which grid points were skipped (reported, not tuned).
    pub t_eps: f64,
    /// Number of (t, c) pairs actually checked.
    pub checked: usize,
}

/// Evaluate Potter's two-sided bounds for the raw tail on a grid.
///
/// For each `t >= t_eps` and `c` with `c*t >= t_eps`, checks
///
/// ```text
/// (1-eps) min(c^(-alpha+eps), c^(-alpha-eps)) <= v(ct)/v(t)
///                     <= (1+eps) max(c^(-alpha+eps), c^(-alpha-eps))
/// ```
///
/// and returns the worst signed slack.
pub fn potter_check(
    model: &TailModel,
    eps: f64,
    t_grid: &[f64],
    c_grid: &[f64],
) -> Result<PotterReport> {
    let alpha = model.alpha();
    if !(eps > 0.0 && eps < alpha.min(1.0)) {
        return Err(Error::config(format!(
            "potter eps must be in (0, min(alpha,1)), got {eps}"
        )));
    }
    let t_eps = 10.0_f64.max(2.0 * model.support_edge());
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for &t in t_grid {
        for &c in c_grid {
            if t < t_eps || c * t < t_eps {
                continue;
            }
            checked += 1;
            let ratio = model.raw_tail(c * t) / model.raw_tail(t);
            let lo_pow = c.powf(-alpha + eps).min(c.powf(-alpha - eps));
            let hi_pow = c.powf(-alpha + eps).max(c.powf(-alpha - eps));
            let lower_slack = ratio - (1.0 - eps) * lo_pow;
            let upper_slack = (1.0 + eps) * hi_pow - ratio;
            worst = worst.min(lower_slack).min(upper_slack);
        }
    }
    Ok(PotterReport {
        worst_slack: worst,
        t_eps,
        checked,
    })
}
