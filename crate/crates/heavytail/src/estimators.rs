//! Steady-state tail estimation.
//!
//! The workhorse is the regenerative ratio estimator: over i.i.d. cycles from
//! the empty state,
//!
//! ```text
//! P{W_inf > b} = E[ # { k < tau0 : W_k^(1) > b } ] / E[ tau0 ],
//! ```
//!
//! with a delta-method standard error for the ratio of per-cycle sums. A
//! long-run time average over arrivals serves as an independent cross-check,
//! and the B1/B2 split classifies each cycle's exceedances by whether the
//! first excursion of the large workload was still running when the small
//! workload built up.
//!
//! Replication `i` always draws from RNG stream `(seed, i)`; chunks of
//! replications are mapped in parallel and reduced in fixed chunk order, so
//! results are bit-identical for any thread count.

use crate::dist::{ArrivalModel, TailModel};
use crate::error::{Error, Result};
use crate::queue::{kw_step, QueueState, DEFAULT_CYCLE_CAP};
use crate::rng::{reuse, stream, Phase};
use rayon::prelude::*;

/// Point estimate with uncertainty and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub point: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub seed: u64,
    pub method: &'static str,
}

impl EstimateReport {
    fn check(self) -> Self {
        debug_assert!(self.stderr >= 0.0);
        debug_assert!(self.ci_low <= self.point && self.point <= self.ci_high);
        self
    }
}

/// Replications per parallel work unit. Fixed so the reduction tree is
/// independent of the thread count.
const CHUNK: u64 = 4096;

/// Map disjoint replication ranges in parallel, returning chunk results in
/// chunk order. `f(start, end)` must derive all randomness from per-
/// replication streams.
pub fn par_chunks<R: Send>(n: u64, f: impl Fn(u64, u64) -> R + Sync) -> Vec<R> {
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK, ((c + 1) * CHUNK).min(n)))
        .collect()
}

/// Run `f` on a rayon pool of the given size (None = the ambient pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("thread pool")
            .install(f),
    }
}

#[derive(Clone)]
struct CycleSums {
    n: u64,
    sum_tau: f64,
    sum_tau2: f64,
    // per threshold: (sum counts, sum counts^2, sum counts*tau)
    per_b: Vec<(f64, f64, f64)>,
    sum_counts_int: Vec<u64>,
}

impl CycleSums {
    fn new(k: usize) -> Self {
        CycleSums {
            n: 0,
            sum_tau: 0.0,
            sum_tau2: 0.0,
            per_b: vec![(0.0, 0.0, 0.0); k],
            sum_counts_int: vec![0; k],
        }
    }

    fn absorb(&mut self, other: &CycleSums) {
        self.n += other.n;
        self.sum_tau += other.sum_tau;
        self.sum_tau2 += other.sum_tau2;
        for (a, b) in self.per_b.iter_mut().zip(&other.per_b) {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        }
        for (a, b) in self.sum_counts_int.iter_mut().zip(&other.sum_counts_int) {
            *a += *b;
        }
    }
}

/// One cycle from empty, accumulating exceedance counts per threshold into a
/// reused buffer. Returns the cycle length.
fn run_cycle(
    service: &TailModel,
    arrival: &ArrivalModel,
    thresholds: &[f64],
    counts: &mut [u64],
    cap: u64,
    rng: &mut impl rand::Rng,
) -> Result<u64> {
    counts.iter_mut().for_each(|c| *c = 0);
    let mut state = QueueState::empty();
    let mut n = 0u64;
    loop {
        for (i, &b) in thresholds.iter().enumerate() {
            if state.w1() > b {
                counts[i] += 1;
            }
        }
        state = kw_step(state, service.sample(rng), arrival.sample(rng));
        n += 1;
        if state.is_empty() {
            return Ok(n);
        }
        if n >= cap {
            return Err(Error::CycleCap { cap });
        }
    }
}

fn require_recurrent(arrival: &ArrivalModel) -> Result<()> {
    if !arrival.unbounded_support() {
        return Err(Error::config(
            "regenerative estimation needs arrivals with unbounded support (use 'exp')",
        ));
    }
    Ok(())
}

/// Regenerative ratio estimate of `P{W_inf^(1) > b}` for each threshold.
pub fn regenerative_tail(
    service: &TailModel,
    arrival: &ArrivalModel,
    b_grid: &[f64],
    n_cycles: u64,
    seed: u64,
) -> Result<Vec<(f64, EstimateReport)>> {
    if n_cycles < 2 {
        return Err(Error::config("need at least 2 cycles"));
    }
    require_recurrent(arrival)?;
    let chunks = par_chunks(n_cycles, |lo, hi| -> Result<CycleSums> {
        let mut sums = CycleSums::new(b_grid.len());
        let mut counts = vec![0u64; b_grid.len()];
        let mut rng = stream(seed, Phase::Main, lo);
        for i in lo..hi {
            reuse(&mut rng, Phase::Main, i);
            let tau = run_cycle(
                service,
                arrival,
                b_grid,
                &mut counts,
                DEFAULT_CYCLE_CAP,
                &mut rng,
            )?;
            let tau_f = tau as f64;
            sums.n += 1;
            sums.sum_tau += tau_f;
            sums.sum_tau2 += tau_f * tau_f;
            for (k, &c) in counts.iter().enumerate() {
                let cf = c as f64;
                sums.per_b[k].0 += cf;
                sums.per_b[k].1 += cf * cf;
                sums.per_b[k].2 += cf * tau_f;
                sums.sum_counts_int[k] += c;
            }
        }
        Ok(sums)
    });
    let mut total = CycleSums::new(b_grid.len());
    for c in chunks {
        total.absorb(&c?);
    }
    Ok(b_grid
        .iter()
        .enumerate()
        .map(|(k, &b)| (b, ratio_report(&total, k, seed)))
        .collect())
}

fn ratio_report(sums: &CycleSums, k: usize, seed: u64) -> EstimateReport {
    let n = sums.n as f64;
    let (sum_n, sum_n2, sum_nt) = sums.per_b[k];
    let sum_t = sums.sum_tau;
    if sums.sum_counts_int[k] == 0 {
        // rule of three on the cycle sum
        return EstimateReport {
            point: 0.0,
            stderr: 0.0,
            ci_low: 0.0,
            ci_high: 3.0 / sum_t,
            n: sums.n,
            seed,
            method: "regenerative",
        }
        .check();
    }
    let r = sum_n / sum_t;
    let tau_bar = sum_t / n;
    let s_nn = (sum_n2 - sum_n * sum_n / n) / (n - 1.0);
    let s_tt = (sums.sum_tau2 - sum_t * sum_t / n) / (n - 1.0);
    let s_nt = (sum_nt - sum_n * sum_t / n) / (n - 1.0);
    let var = (s_nn - 2.0 * r * s_nt + r * r * s_tt) / (n * tau_bar * tau_bar);
    let stderr = var.max(0.0).sqrt();
    EstimateReport {
        point: r,
        stderr,
        ci_low: (r - 1.96 * stderr).max(0.0),
        ci_high: (r + 1.96 * stderr).min(1.0),
        n: sums.n,
        seed,
        method: "regenerative",
    }
    .check()
}

/// Long-run fraction of arrivals whose waiting time exceeds each threshold,
/// with batch-means standard errors; a cross-check for the ratio estimator.
/// One long chain, single stream.
pub fn time_average_tail(
    service: &TailModel,
    arrival: &ArrivalModel,
    b_grid: &[f64],
    n_steps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<Vec<(f64, EstimateReport)>> {
    if n_steps <= burn_in {
        return Err(Error::config("need n_steps > burn_in"));
    }
    require_recurrent(arrival)?;
    let n_used = n_steps - burn_in;
    let n_batches = ((n_used as f64).sqrt().floor() as u64).max(1);
    let batch_len = (n_used / n_batches).max(1);
    let mut rng = stream(seed, Phase::Aux, 0);
    let mut state = QueueState::empty();
    let mut totals = vec![0u64; b_grid.len()];
    let mut batch_counts = vec![vec![0u64; n_batches as usize]; b_grid.len()];
    for n in 1..=n_steps {
        state = kw_step(state, service.sample(&mut rng), arrival.sample(&mut rng));
        if n <= burn_in {
            continue;
        }
        let idx = n - burn_in - 1; // 0-based index within the kept range
        let batch = (idx / batch_len).min(n_batches - 1) as usize;
        for (k, &b) in b_grid.iter().enumerate() {
            if state.w1() > b {
                totals[k] += 1;
                batch_counts[k][batch] += 1;
            }
        }
    }
    Ok(b_grid
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let point = totals[k] as f64 / n_used as f64;
            let stderr = if n_batches >= 2 {
                let means: Vec<f64> = batch_counts[k]
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| {
                        // the final batch absorbs the division remainder
                        let len = if j as u64 == n_batches - 1 {
                            n_used - batch_len * (n_batches - 1)
                        } else {
                            batch_len
                        };
                        c as f64 / len as f64
                    })
                    .collect();
                crate::numeric::mean_and_stderr(&means).1
            } else {
                f64::INFINITY
            };
            let report = EstimateReport {
                point,
                stderr,
                ci_low: (point - 1.96 * stderr).max(0.0),
                ci_high: if stderr.is_finite() {
                    (point + 1.96 * stderr).min(1.0)
                } else {
                    1.0
                },
                n: n_used,
                seed,
                method: "time-average",
            }
            .check();
            (b, report)
        })
        .collect())
}

/// Output of the per-cycle exceedance split.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// Mean per cycle of exceedances in cycles where the first excursion of
    /// the large workload was still running when the small workload built up
    /// past `b * delta`.
    pub b1_hat: f64,
    /// Complementary term: the first excursion was already spent.
    pub b2_hat: f64,
    pub tau0_mean: f64,
    /// `(B1 + B2) / tau0`; identical by construction to the regenerative
    /// point estimate over the same cycles.
    pub point: f64,
    pub n_cycles: u64,
    pub seed: u64,
}

/// Split the regenerative numerator by cycle type. A cycle's exceedances of
/// `b` land in B1 when, at the first time `w1 > b*delta`, the excursion of
/// `w2` above `b*delta_minus` has not yet fallen back to `b*delta_plus`;
/// otherwise they land in B2 ("the first jump was wasted").
pub fn decompose_cycle_counts(
    service: &TailModel,
    arrival: &ArrivalModel,
    b: f64,
    deltas: (f64, f64, f64),
    n_cycles: u64,
    seed: u64,
) -> Result<Decomposition> {
    let (dm, d, dp) = deltas;
    if !(0.0 < dm && dm < d && d < dp && dp < 1.0) {
        return Err(Error::config(format!(
            "need 0 < d- < d < d+ < 1, got ({dm}, {d}, {dp})"
        )));
    }
    require_recurrent(arrival)?;
    #[derive(Clone, Copy, Default)]
    struct Sums {
        n: u64,
        b1: u64,
        b2: u64,
        tau: u64,
    }
    let chunks = par_chunks(n_cycles, |lo, hi| -> Result<Sums> {
        let mut s = Sums::default();
        let mut rng = stream(seed, Phase::Main, lo);
        for i in lo..hi {
            reuse(&mut rng, Phase::Main, i);
            let mut state = QueueState::empty();
            let mut n = 0u64;
            let mut count_b = 0u64;
            let mut tau2_minus: Option<u64> = None;
            let mut tau1_delta: Option<u64> = None;
            let mut tau_bar: Option<u64> = None;
            loop {
                if state.w1() > b {
                    count_b += 1;
                }
                if tau2_minus.is_none() && state.w2() > b * dm {
                    tau2_minus = Some(n);
                }
                if tau1_delta.is_none() && state.w1() > b * d {
                    tau1_delta = Some(n);
                }
                if tau_bar.is_none() && tau2_minus.is_some() && state.w2() <= b * dp {
                    tau_bar = Some(n);
                }
                state = kw_step(state, service.sample(&mut rng), arrival.sample(&mut rng));
                n += 1;
                if state.is_empty() {
                    break;
                }
                if n >= DEFAULT_CYCLE_CAP {
                    return Err(Error::CycleCap {
                        cap: DEFAULT_CYCLE_CAP,
                    });
                }
            }
            // the regeneration state (0,0) closes any still-open excursion
            if tau_bar.is_none() && tau2_minus.is_some() {
                tau_bar = Some(n);
            }
            let first_jump_alive = match (tau_bar, tau1_delta) {
                (_, None) => false, // no buildup, and no exceedances either
                (None, Some(_)) => true,
                (Some(tb), Some(t1)) => tb > t1,
            };
            if first_jump_alive {
                s.b1 += count_b;
            } else {
                s.b2 += count_b;
            }
            s.tau += n;
            s.n += 1;
        }
        Ok(s)
    });
    let mut total = Sums::default();
    for c in chunks {
        let c = c?;
        total.n += c.n;
        total.b1 += c.b1;
        total.b2 += c.b2;
        total.tau += c.tau;
    }
    let n = total.n as f64;
    Ok(Decomposition {
        b1_hat: total.b1 as f64 / n,
        b2_hat: total.b2 as f64 / n,
        tau0_mean: total.tau as f64 / n,
        point: (total.b1 + total.b2) as f64 / total.tau as f64,
        n_cycles: total.n,
        seed,
    })
}

/// Mean cycle length from the empty state, with standard error. Feeds the
/// lower-bound certificates.
pub fn mean_cycle_length(
    service: &TailModel,
    arrival: &ArrivalModel,
    n_cycles: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    mean_return_time_from(service, arrival, QueueState::empty(), n_cycles, seed)
}

/// Mean first return time to the empty state from an arbitrary start.
pub fn mean_return_time_from(
    service: &TailModel,
    arrival: &ArrivalModel,
    from: QueueState,
    n_cycles: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    require_recurrent(arrival)?;
    let chunks = par_chunks(n_cycles, |lo, hi| -> Result<(f64, f64)> {
        let mut rng = stream(seed, Phase::Pilot, lo);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in lo..hi {
            reuse(&mut rng, Phase::Pilot, i);
            let mut state = from;
            let mut n = 0u64;
            loop {
                state = kw_step(state, service.sample(&mut rng), arrival.sample(&mut rng));
                n += 1;
                if state.is_empty() {
                    break;
                }
                if n >= DEFAULT_CYCLE_CAP {
                    return Err(Error::CycleCap {
                        cap: DEFAULT_CYCLE_CAP,
                    });
                }
            }
            sum += n as f64;
            sum2 += (n as f64) * (n as f64);
        }
        Ok((sum, sum2))
    });
    let (mut sum, mut sum2) = (0.0, 0.0);
    for c in chunks {
        let (s, s2) = c?;
        sum += s;
        sum2 += s2;
    }
    let nf = n_cycles as f64;
    let mean = sum / nf;
    let var = ((sum2 - sum * sum / nf) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Monte Carlo one-step total-workload drift `E[(W1' + W2') - (w1 + w2)]`
/// from a fixed state, with standard error.
pub fn one_step_drift(
    service: &TailModel,
    arrival: &ArrivalModel,
    from: QueueState,
    n: u64,
    seed: u64,
) -> (f64, f64) {
    let chunks = par_chunks(n, |lo, hi| {
        let mut rng = stream(seed, Phase::Aux, lo);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in lo..hi {
            reuse(&mut rng, Phase::Aux, i);
            let next = kw_step(from, service.sample(&mut rng), arrival.sample(&mut rng));
            let d = next.total() - from.total();
            sum += d;
            sum2 += d * d;
        }
        (sum, sum2)
    });
    let (mut sum, mut sum2) = (0.0, 0.0);
    for (s, s2) in chunks {
        sum += s;
        sum2 += s2;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum2 - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}
