//! Chain summaries: moments, autocorrelation, batch-means error, ESS.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor n − 1.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Lag-`lag` sample autocorrelation.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    if lag >= n || n < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum();
    num / denom
}

/// Standard error of the mean by non-overlapping batch means with
/// ⌊√n⌋ batches.
pub fn batch_means_se(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return f64::NAN;
    }
    let n_batches = (n as f64).sqrt().floor() as usize;
    let size = n / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| mean(&x[b * size..(b + 1) * size]))
        .collect();
    (variance(&means) / n_batches as f64).sqrt()
}

/// Effective sample size from Geyer's initial positive sequence.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acov = |lag: usize| -> f64 {
        (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
    };
    let mut sum = 0.0;
    let mut lag = 1;
    // pairs Γ_k = ρ(2k) + ρ(2k+1), starting with ρ(0) = 1
    let mut gamma = c0 + acov(1);
    while gamma > 0.0 {
        sum += gamma;
        lag += 2;
        if lag + 1 >= n {
            break;
        }
        gamma = acov(lag - 1) + acov(lag);
    }
    let tau = (2.0 * sum / c0 - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "correlation needs equal lengths");
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / (saa * sbb).sqrt()
}
