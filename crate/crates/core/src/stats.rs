//! Small statistical toolbox for the evaluation and acceptance machinery:
//! rank correlation for curriculum-trend checks, goodness-of-fit tests for
//! posterior-consistency checks, and a two-sample KS test for comparing
//! reward streams.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {need} samples, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("expected counts must be positive and finite")]
    DegenerateExpectation,
    #[error("inputs must be finite")]
    NonFiniteInput,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Midranks (average ranks for ties), 1-based.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Rank correlation with tie-averaged ranks and a t-approximation for the
/// p-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    /// P(observing |rho| this large under independence).
    pub p_two_sided: f64,
    /// One-sided p-value for the alternative "rho > 0".
    pub p_positive: f64,
    pub n: usize,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::InsufficientData { need: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteInput);
    }
    let n = x.len();
    let rho = pearson(&ranks(x), &ranks(y)).clamp(-1.0, 1.0);
    let (p_two, p_pos) = if rho.abs() >= 1.0 - 1e-15 {
        (0.0, if rho > 0.0 { 0.0 } else { 1.0 })
    } else {
        let t = rho * ((n - 2) as f64 / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, (n - 2) as f64).expect("n >= 3");
        let cdf = dist.cdf(t);
        (2.0 * cdf.min(1.0 - cdf), 1.0 - cdf)
    };
    Ok(Correlation { rho, p_two_sided: p_two, p_positive: p_pos, n })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of observed counts against expected
/// counts (same total). Degrees of freedom `k - 1`.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareTest, StatsError> {
    if observed.len() != expected.len() {
        return Err(StatsError::LengthMismatch(observed.len(), expected.len()));
    }
    if observed.len() < 2 {
        return Err(StatsError::InsufficientData { need: 2, got: observed.len() });
    }
    if expected.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(StatsError::DegenerateExpectation);
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let df = observed.len() - 1;
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    let p_value = (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0);
    Ok(ChiSquareTest { statistic, df, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    /// Max absolute difference between the two empirical CDFs.
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 * sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the standard asymptotic p-value.
/// Conservative for heavily tied (discrete) data, which is fine for the
/// "streams are indistinguishable" checks it backs here.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::InsufficientData { need: 1, got: 0 });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteInput);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = xs[i].min(ys[j]);
        while i < n1 && xs[i] <= v {
            i += 1;
        }
        while j < n2 && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 as f64 + n2 as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsTest { statistic: d, p_value: kolmogorov_sf(lambda) })
}
