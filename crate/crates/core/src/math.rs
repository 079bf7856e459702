//! Float helpers over `libm` so the crate stays `no_std`.

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    lgamma(n as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((n - k) as f64 + 1.0)
}

/// `ln Σ exp(x_i)` with a max shift. Returns `-inf` for an empty input.
pub fn log_sum_exp<I>(xs: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = xs.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = iter.map(|x| exp(x - max)).sum();
    max + ln(sum)
}

/// Numerically stable softmax of log-weights.
pub fn softmax(log_weights: &[f64]) -> alloc::vec::Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: alloc::vec::Vec<f64> = log_weights.iter().map(|x| exp(x - max)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_survives_large_inputs() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(core::iter::empty::<f64>()), f64::NEG_INFINITY);
    }

    #[test]
    fn binomial_small_values() {
        assert!((exp(ln_binomial(5, 2)) - 10.0).abs() < 1e-9);
        assert!((exp(ln_binomial(40, 20)) - 137_846_528_820.0).abs() / 137_846_528_820.0 < 1e-10);
        assert_eq!(ln_binomial(7, 0), 0.0);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[800.0, 799.0, -3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(p[0] > p[1]);
    }
}
