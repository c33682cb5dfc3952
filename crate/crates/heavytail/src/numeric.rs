//! Shared numerical kernels: adaptive quadrature, bracketed root finding,
//! and monotone cubic interpolation used for cached tail functions.

/// Adaptive Simpson quadrature on a finite interval.
///
/// Recursion splits an interval until the classic Richardson error estimate
/// `|S_left + S_right - S_whole| / 15` drops below the local tolerance
/// budget. The tolerance is interpreted relative to the magnitude of the
/// running integral, with a tiny absolute floor so integrals that are
/// genuinely zero terminate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let scale = whole.abs().max(1e-300);
    adaptive(&f, a, b, fa, fm, fb, whole, rel_tol * scale, 52)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        return left + right + err / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrate `f` over `[a, inf)` for integrands with (at least) power-law
/// decay. Uses the exponential substitution `u = a_eff * e^y` which turns
/// power decay `u^-p` into exponential decay `e^-(p-1)y`, then integrates
/// on a finite window chosen from `decay_rate` = p - 1 (a lower bound on
/// the decay exponent is enough; the tail remainder is forced below the
/// tolerance).
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, a: f64, decay_rate: f64, rel_tol: f64) -> f64 {
    assert!(decay_rate > 0.0, "tail integral requires decaying integrand");
    // Shift so the lower endpoint is strictly positive before the log map.
    let shift = if a <= 1.0 { 1.0 - a } else { 0.0 };
    let a_eff = a + shift;
    // e^{-decay_rate * y_max} small against rel_tol, with slowly varying slack.
    let y_max = ((1.0 / rel_tol).ln() + 12.0) / decay_rate + 5.0;
    let g = |y: f64| {
        let u = a_eff * y.exp();
        f(u - shift) * u
    };
    integrate(g, 0.0, y_max, rel_tol)
}

/// Bisection for a continuous strictly decreasing function: returns `x` in
/// `[lo, hi]` with `f(x) = target`. The bracket must satisfy
/// `f(lo) >= target >= f(hi)`.
pub fn invert_decreasing<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    xtol: impl Fn(f64) -> f64,
) -> f64 {
    debug_assert!(lo <= hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol(mid) {
            return mid;
        }
        if f(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Monotone cubic (Fritsch-Carlson) interpolant over an increasing grid.
///
/// Used to cache expensive monotone tail functions; evaluation is a binary
/// search plus a Hermite cubic. Inputs outside the grid clamp to the ends.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 3, "need at least 3 nodes");
        assert!(xs.windows(2).all(|w| w[1] > w[0]), "grid must increase");
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        }
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            m[i] = if d[i - 1] * d[i] <= 0.0 {
                0.0
            } else {
                // Harmonic mean preserves monotonicity (Fritsch-Carlson).
                let w1 = 2.0 * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
                let w2 = (xs[i + 1] - xs[i]) + 2.0 * (xs[i] - xs[i - 1]);
                (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
            };
        }
        MonotoneCubic { xs, ys, slopes: m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let mut i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite grid"))
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if i >= n - 1 {
            i = n - 2;
        }
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * h * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * h * (t3 - t2)
    }
}

/// Sample mean and (n-1)-normalized standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard normal upper tail via erfc.
pub fn normal_upper_tail(y: f64) -> f64 {
    0.5 * libm::erfc(y / std::f64::consts::SQRT_2)
}
