//! Von Mises angular distribution: sampling, CDF and quantiles.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const TWO_PI: f64 = 2.0 * PI;

/// Above this concentration the wrapped-normal limit is used.
const GAUSSIAN_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMises {
    mu: f64,
    kappa: f64,
}

impl VonMises {
    /// `kappa` must be positive; `f64::INFINITY` gives a point mass at `mu`.
    pub fn new(mu: f64, kappa: f64) -> Option<Self> {
        (kappa > 0.0).then_some(Self { mu, kappa })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn pdf(&self, x: f64) -> f64 {
        // exp(k cos) / (2π I0(k)) written with the scaled Bessel function.
        (self.kappa * ((x - self.mu).cos() - 1.0)).exp() / (TWO_PI * bessel_i0e(self.kappa))
    }

    /// CDF of the offset `x - mu`, with the offset restricted to `[-π, π]`.
    pub fn cdf(&self, x: f64) -> f64 {
        centered_cdf(x - self.mu, self.kappa)
    }

    /// Offset quantile in `[-π, π]`, plus `mu`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.mu + centered_quantile(p, self.kappa)
    }
}

impl Distribution<f64> for VonMises {
    /// Best–Fisher rejection sampler. Result is in `(mu - π, mu + π]`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = self.kappa;
        if k.is_infinite() {
            return self.mu;
        }
        if k > GAUSSIAN_LIMIT {
            let z: f64 = rng.sample(StandardNormal);
            return self.mu + z / k.sqrt();
        }
        let tau = 1.0 + (1.0 + 4.0 * k * k).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * k);
        let r = (1.0 + rho * rho) / (2.0 * rho);
        loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let u3: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + r * z) / (r + z);
            let c = k * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let theta = f.clamp(-1.0, 1.0).acos();
                return if u3 < 0.5 { self.mu - theta } else { self.mu + theta };
            }
        }
    }
}

/// Exponentially scaled modified Bessel function `exp(-x) I0(x)`, x ≥ 0.
pub fn bessel_i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 15.0 {
        // Power series, converges quickly in this range.
        let q = ax * ax / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-ax).exp()
    } else {
        // Asymptotic expansion.
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let kk = (2 * k - 1) as f64;
            term *= kk * kk / (8.0 * ax * k as f64);
            if term.abs() < 1e-17 {
                break;
            }
            sum += term;
        }
        sum / (TWO_PI * ax).sqrt()
    }
}

/// Ratios `I_j(k) / I_0(k)` for `j = 1..=n`, by Miller's backward recurrence.
fn bessel_ratios(kappa: f64, n: usize) -> Vec<f64> {
    let start = n + 20 + (kappa.sqrt() * 4.0) as usize;
    let mut next = 0.0_f64; // I_{j+1}
    let mut cur = 1e-300_f64; // I_j
    let mut values = vec![0.0; n + 1];
    for j in (1..=start).rev() {
        let prev = next + (2.0 * j as f64 / kappa) * cur;
        next = cur;
        cur = prev;
        if j - 1 <= n {
            values[j - 1] = cur;
        }
        if cur > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            for v in values.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let i0 = values[0];
    values.iter().skip(1).map(|v| v / i0).collect()
}

fn series_terms(kappa: f64) -> usize {
    // Coefficients decay roughly like exp(-j² / 2k).
    (12.0 + 9.0 * kappa.sqrt()).ceil() as usize
}

/// CDF of a zero-mean Von Mises offset on `[-π, π]`.
pub fn centered_cdf(x: f64, kappa: f64) -> f64 {
    if x <= -PI {
        return 0.0;
    }
    if x >= PI {
        return 1.0;
    }
    if kappa.is_infinite() {
        return if x < 0.0 { 0.0 } else { 1.0 };
    }
    let ratios = bessel_ratios(kappa, series_terms(kappa));
    cdf_with_ratios(x, &ratios)
}

fn cdf_with_ratios(x: f64, ratios: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, r) in ratios.iter().enumerate().rev() {
        let j = (i + 1) as f64;
        acc += r * (j * x).sin() / j;
    }
    ((x + PI) / TWO_PI + acc / PI).clamp(0.0, 1.0)
}

/// Root of `centered_cdf(x) = p` to an absolute tolerance of 1e-12 rad.
pub fn centered_quantile(p: f64, kappa: f64) -> f64 {
    if kappa.is_infinite() {
        return 0.0;
    }
    if p <= 0.0 {
        return -PI;
    }
    if p >= 1.0 {
        return PI;
    }
    if (p - 0.5).abs() < f64::EPSILON {
        return 0.0;
    }
    // Exploit symmetry: solve on the upper half, mirror the lower half.
    if p < 0.5 {
        return -centered_quantile(1.0 - p, kappa);
    }
    let ratios = bessel_ratios(kappa, series_terms(kappa));
    let dist = VonMises { mu: 0.0, kappa };
    let (mut lo, mut hi) = (0.0_f64, PI);
    let mut x = 0.5 * PI;
    for _ in 0..200 {
        let f = cdf_with_ratios(x, &ratios) - p;
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = dist.pdf(x);
        let newton = x - f / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-12 {
            break;
        }
    }
    x
}
