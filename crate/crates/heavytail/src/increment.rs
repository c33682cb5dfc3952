//! The walk increment `X = V - T`.
//!
//! The queue is driven by i.i.d. copies of `X`; since `T` is light tailed,
//! `P{X > x} ~ P{V > x}` and `E[X] = 0` at traffic intensity 1. Everything
//! here is computed by one-dimensional quadrature against the exact laws of
//! `V` and `T` (no convolution grids), so tails stay accurate far beyond
//! where simulation could reach.

use crate::dist::{ArrivalKind, ArrivalModel, TailModel};
use crate::error::Result;
use crate::numeric::integrate;
use rand::Rng;

/// Relative tolerance for the one-off quadratures below.
const REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct IncrementDist {
    service: TailModel,
    arrival: ArrivalModel,
}

impl IncrementDist {
    pub fn new(service: &TailModel, arrival: &ArrivalModel) -> Self {
        IncrementDist {
            service: service.clone(),
            arrival: *arrival,
        }
    }

    pub fn service(&self) -> &TailModel {
        &self.service
    }

    pub fn arrival(&self) -> &ArrivalModel {
        &self.arrival
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        self.service.sample(rng) - self.arrival.sample(rng)
    }

    /// `P{X > x} = E[ P{V > x + T} ]`, valid for any real `x`.
    pub fn tail(&self, x: f64) -> f64 {
        let m = self.arrival.mean();
        match self.arrival.kind() {
            ArrivalKind::Deterministic => self.service.tail(x + m),
            ArrivalKind::Exponential => {
                // substitute s = e^(-t/m): integral over (0,1] of tail(x - m ln s)
                integrate(
                    |s| {
                        if s <= 0.0 {
                            0.0
                        } else {
                            self.service.tail(x - m * s.ln())
                        }
                    },
                    0.0,
                    1.0,
                    REL_TOL,
                )
            }
            ArrivalKind::UniformWindow => {
                integrate(|t| self.service.tail(x + t), 0.0, 2.0 * m, REL_TOL) / (2.0 * m)
            }
        }
    }

    /// `P{X < -x} = P{T > x + V}`, the light left tail.
    pub fn left_tail(&self, x: f64) -> f64 {
        let m = self.arrival.mean();
        match self.arrival.kind() {
            ArrivalKind::Deterministic => {
                // P{V < m - x}
                1.0 - self.service.tail(m - x)
            }
            ArrivalKind::Exponential => {
                // memoryless: E[e^-(x+V)/m] = e^(-x/m) E[e^-V/m]
                (-x / m).exp() * self.laplace_service(1.0 / m)
            }
            ArrivalKind::UniformWindow => {
                // E[(1 - (x+V)/(2m))^+]; V >= x0
                let x0 = self.service.support_edge();
                let hi = 2.0 * m - x;
                if hi <= x0 {
                    return 0.0;
                }
                // int_{x0}^{hi} F_T-bar(x+v) dB(v) via parts:
                //   = tail_T(x+x0) - int f_T(x+v) Bbar(v) dv
                self.arrival.tail(x + x0)
                    - integrate(
                        |v| self.arrival.density(x + v) * self.service.tail(v),
                        x0,
                        hi,
                        REL_TOL,
                    )
            }
        }
    }

    /// `P{|X| > x}` for `x > 0`.
    pub fn abs_tail(&self, x: f64) -> f64 {
        self.tail(x) + self.left_tail(x)
    }

    /// `E[e^{-sV}]` (used by the exponential-arrival left tail).
    fn laplace_service(&self, s: f64) -> f64 {
        let x0 = self.service.support_edge();
        // By parts: E[e^-sV] = 1 - s int_0^inf e^-su P{V > u} du.
        // The integrand decays exponentially; cut where e^-su is negligible.
        let hi = x0 + 60.0 / s;
        1.0 - s * integrate(|u| (-s * u).exp() * self.service.tail(u), 0.0, hi, REL_TOL)
    }

    /// Integrated tail `H(y) = int_y^inf P{X > u} du = E[(X - y)^+]`,
    /// computed as `E_T[ M(y + T) ]` with `M` the integrated service tail.
    pub fn integrated_tail(&self, y: f64) -> f64 {
        let m = self.arrival.mean();
        match self.arrival.kind() {
            ArrivalKind::Deterministic => self.service.integrated_tail(y + m),
            ArrivalKind::Exponential => integrate(
                |s| {
                    if s <= 0.0 {
                        0.0
                    } else {
                        self.service.integrated_tail(y - m * s.ln())
                    }
                },
                0.0,
                1.0,
                REL_TOL,
            ),
            ArrivalKind::UniformWindow => {
                integrate(
                    |t| self.service.integrated_tail(y + t),
                    0.0,
                    2.0 * m,
                    REL_TOL,
                ) / (2.0 * m)
            }
        }
    }

    /// `E[X]`; zero by construction, up to quadrature error in the cached
    /// service mean.
    pub fn mean(&self) -> f64 {
        self.service.mean() - self.arrival.mean()
    }

    /// `Var[X] = Var[V] + Var[T]`, finite only for `alpha > 2`.
    pub fn variance(&self) -> Result<f64> {
        let ev = self.service.mean();
        let ev2 = self.service.second_moment()?;
        Ok(ev2 - ev * ev + self.arrival.variance())
    }

    pub fn std_dev(&self) -> Result<f64> {
        Ok(self.variance()?.sqrt())
    }

    /// `E[X^+] = H(0)`.
    pub fn positive_part_mean(&self) -> f64 {
        self.integrated_tail(0.0)
    }

    /// Draw `(V, T)` conditioned on `V - T > c` by rejection: propose
    /// `V | V > c` (a necessary condition since `T >= 0`), accept when the
    /// difference clears `c`. Exact, and cheap because the conditional
    /// acceptance rate `P{X>c}/P{V>c}` tends to 1 for large `c`.
    pub fn sample_pair_given_tail(&self, c: f64, rng: &mut impl Rng) -> (f64, f64) {
        let tail_c = self.service.tail(c);
        loop {
            // V | V > c via inverse CDF on the rescaled uniform
            let u = crate::rng::open_unit(rng) * tail_c;
            let v = self.service.quantile(u).expect("u in (0, tail_c]");
            let t = self.arrival.sample(rng);
            if v - t > c {
                return (v, t);
            }
        }
    }

    /// `P{X <= c}` complement helper.
    pub fn cdf(&self, c: f64) -> f64 {
        1.0 - self.tail(c)
    }
}
