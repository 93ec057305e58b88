//! One-sample Kolmogorov–Smirnov machinery used to validate samplers and the
//! null distributions of the trimming statistics.

/// `sup_x |F_n(x) - F(x)|` for the empirical CDF of `xs` against `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn effective_root_n(n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    rn + 0.12 + 0.11 / rn
}

/// Approximate p-value of a KS statistic `d` from `n` observations.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    kolmogorov_survival(effective_root_n(n) * d)
}

/// Critical value of `D` at significance `alpha` for sample size `n`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / effective_root_n(n)
}
