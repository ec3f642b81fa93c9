//! Binomial interval estimates, log-linear fits and goodness-of-fit tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{FriError, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn std_err(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        (self.p * (1.0 - self.p) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval at 95%.
pub fn wilson(k: u64, n: u64) -> Estimate {
    wilson_z(k, n, Z95)
}

pub fn wilson_z(k: u64, n: u64, z: f64) -> Estimate {
    if n == 0 {
        return Estimate { successes: 0, trials: 0, p: f64::NAN, lo: 0.0, hi: 1.0 };
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Estimate { successes: k, trials: n, p, lo: (centre - half).clamp(0.0, p), hi: (centre + half).clamp(p, 1.0) }
}

/// Least-squares line `y = a + b x` with coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(FriError::InvalidParameter(format!("fit needs matching series of length >= 2, got {} and {}", xs.len(), ys.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FriError::InvalidParameter("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit { intercept, slope, r2, points: xs.len() })
}

/// Pearson chi-square statistic and upper-tail p-value. Expected counts must
/// be positive; `fitted` parameters reduce the degrees of freedom.
pub fn chi_square(observed: &[u64], expected: &[f64], fitted: usize) -> Result<(f64, f64)> {
    if observed.len() != expected.len() || observed.len() <= fitted + 1 {
        return Err(FriError::InvalidParameter("chi-square needs more cells than fitted parameters".into()));
    }
    let mut stat = 0.0;
    for (o, e) in observed.iter().zip(expected) {
        if *e <= 0.0 {
            return Err(FriError::InvalidParameter(format!("expected count {e} is not positive")));
        }
        stat += (*o as f64 - e).powi(2) / e;
    }
    let df = (observed.len() - 1 - fitted) as f64;
    let dist = ChiSquared::new(df).map_err(|e| FriError::InvalidParameter(e.to_string()))?;
    Ok((stat, dist.sf(stat)))
}

/// Two-proportion z statistic with pooled variance.
pub fn two_proportion_z(a: &Estimate, b: &Estimate) -> f64 {
    let pooled = (a.successes + b.successes) as f64 / (a.trials + b.trials) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (a.p - b.p) / se
}
