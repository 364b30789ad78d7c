//! Gamma distribution over outage durations (hours).
//!
//! Shape `k` is dimensionless and scale `theta` is in hours. The density is
//! `d^(k-1) exp(-d/theta) / (Γ(k) theta^k)`.

pub mod special;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numcore::{Graph, Var};
use special::{ln_gamma, reg_lower_gamma};

/// Durations below one minute are clamped before computing the likelihood.
pub const MIN_DURATION_HOURS: f64 = 1.0 / 60.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaParams {
    k: f64,
    theta: f64,
}

impl GammaParams {
    pub fn new(k: f64, theta: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(format!("gamma shape must be positive, got {k}")));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid(format!("gamma scale must be positive, got {theta}")));
        }
        Ok(GammaParams { k, theta })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn mean(&self) -> f64 {
        self.k * self.theta
    }

    /// Most likely duration; zero when the density is monotone decreasing (`k < 1`).
    pub fn mode(&self) -> f64 {
        if self.k >= 1.0 {
            (self.k - 1.0) * self.theta
        } else {
            0.0
        }
    }

    pub fn variance(&self) -> f64 {
        self.k * self.theta * self.theta
    }

    pub fn log_pdf(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid(format!("duration must be positive, got {d}")));
        }
        Ok(-ln_gamma(self.k) - self.k * self.theta.ln() + (self.k - 1.0) * d.ln() - d / self.theta)
    }

    pub fn pdf(&self, d: f64) -> Result<f64> {
        Ok(self.log_pdf(d)?.exp())
    }

    /// Negative log-likelihood of one observed duration, after clamping at one minute.
    pub fn nll(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid(format!("duration must be positive, got {d}")));
        }
        Ok(-self.log_pdf(d.max(MIN_DURATION_HOURS))?)
    }

    pub fn cdf(&self, d: f64) -> Result<f64> {
        if d.is_nan() || d < 0.0 {
            return Err(Error::invalid(format!("cdf needs d >= 0, got {d}")));
        }
        Ok(reg_lower_gamma(self.k, d / self.theta))
    }

    /// Inverse CDF, accurate to `|cdf(x) - q| < 1e-9`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::invalid(format!("quantile level must be in (0, 1), got {q}")));
        }
        // work in units of theta
        let cdf = |x: f64| reg_lower_gamma(self.k, x);
        let log_pdf = |x: f64| -ln_gamma(self.k) + (self.k - 1.0) * x.ln() - x;
        let mut lo = 0.0;
        let mut hi = self.k.max(1.0);
        while cdf(hi) < q {
            lo = hi;
            hi *= 2.0;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = cdf(x) - q;
            if f.abs() < 1e-13 {
                break;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            // Newton step, falling back to bisection when it leaves the bracket
            let step = f / log_pdf(x).exp();
            let candidate = x - step;
            x = if step.is_finite() && candidate > lo && candidate < hi {
                candidate
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        Ok(x * self.theta)
    }

    /// Marsaglia-Tsang draw, with the `U^(1/k)` boost for `k < 1`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.theta * standard_gamma(self.k, rng)
    }
}

fn standard_gamma<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    if k < 1.0 {
        let u: f64 = 1.0 - rng.random::<f64>();
        return standard_gamma(k + 1.0, rng) * u.powf(1.0 / k);
    }
    let d = k - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = 1.0 - rng.random::<f64>();
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

/// Gamma negative log-likelihood as a differentiable graph node.
///
/// `k` and `theta` are `1 x 1` nodes; `d` is the observed duration in hours.
pub fn nll_node(g: &mut Graph<'_>, k: Var, theta: Var, d: f64) -> Result<Var> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!("duration must be positive, got {d}")));
    }
    let d = d.max(MIN_DURATION_HOURS);
    // ln Γ(k) + k ln θ - (k - 1) ln d + d / θ
    let lg = g.ln_gamma(k)?;
    let log_theta = g.log(theta)?;
    let k_log_theta = g.mul(k, log_theta)?;
    let km1 = g.add_scalar(k, -1.0)?;
    let km1_log_d = g.scale(km1, d.ln())?;
    let inv_theta = g.recip(theta)?;
    let d_over_theta = g.scale(inv_theta, d)?;
    let a = g.add(lg, k_log_theta)?;
    let b = g.sub(a, km1_log_d)?;
    g.add(b, d_over_theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gp(k: f64, t: f64) -> GammaParams {
        GammaParams::new(k, t).unwrap()
    }

    #[test]
    fn log_pdf_examples() {
        assert!((gp(1.0, 2.0).log_pdf(2.0).unwrap() - (-(2f64.ln()) - 1.0)).abs() < 1e-12);
        assert!((gp(2.0, 1.0).log_pdf(1.0).unwrap() + 1.0).abs() < 1e-12);
        assert!((gp(3.0, 2.0).log_pdf(4.0).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_pdf_rejects_bad_inputs() {
        assert!(gp(1.0, 1.0).log_pdf(0.0).is_err());
        assert!(gp(1.0, 1.0).log_pdf(-1.0).is_err());
        assert!(GammaParams::new(0.0, 1.0).is_err());
        assert!(GammaParams::new(1.0, -2.0).is_err());
        assert!(GammaParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn nll_examples() {
        assert!((gp(1.0, 1.0).nll(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((gp(1.0, 2.0).nll(2.0).unwrap() - (2f64.ln() + 1.0)).abs() < 1e-12);
        // clamped at one minute
        assert_eq!(gp(1.0, 1.0).nll(1e-6).unwrap(), gp(1.0, 1.0).nll(1.0 / 60.0).unwrap());
    }

    #[test]
    fn nll_theta_gradient_vanishes_at_exponential_mle() {
        let mut g = Graph::new();
        let k = g.constant(Tensor::scalar(1.0)).unwrap();
        let theta = g.constant(Tensor::scalar(1.0)).unwrap();
        let loss = nll_node(&mut g, k, theta, 1.0).unwrap();
        assert!((g.value(loss).item() - 1.0).abs() < 1e-12);
        g.backward(loss).unwrap();
        assert!(g.grad(theta).unwrap().item().abs() < 1e-12);
        // finite-difference oracle on the scalar function
        let h = 1e-5;
        let fd = (gp(1.0, 1.0 + h).nll(1.0).unwrap() - gp(1.0, 1.0 - h).nll(1.0).unwrap()) / (2.0 * h);
        assert!(fd.abs() < 1e-9);
        // d/dk = ψ(k) + ln θ - ln d
        let euler = 0.577_215_664_901_532_9;
        assert!((g.grad(k).unwrap().item() + euler).abs() < 1e-12);
    }

    #[test]
    fn moments_and_mode() {
        assert_eq!(gp(2.0, 3.0).mean(), 6.0);
        assert_eq!(gp(0.8, 5.0).mode(), 0.0);
        assert_eq!(gp(1.0, 2.0).mode(), 0.0);
        assert_eq!(gp(1.0, 2.0).mean(), 2.0);
        assert_eq!(gp(3.0, 2.0).mode(), 4.0);
    }

    #[test]
    fn quantile_examples() {
        assert!((gp(1.0, 1.0).quantile(0.5).unwrap() - 2f64.ln()).abs() < 1e-9);
        assert!((gp(1.0, 2.0).quantile(0.8).unwrap() + 2.0 * 0.2f64.ln()).abs() < 1e-9);
        // independent oracle: bisection on the closed form 1 - e^{-x}(1 + x)
        let (mut lo, mut hi) = (0.0f64, 20.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - (-mid).exp() * (1.0 + mid) < 0.8 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = gp(2.0, 1.0).quantile(0.8).unwrap();
        assert!((q - lo).abs() < 1e-9, "{q} vs {lo}");
        assert!((q - 2.994).abs() < 1e-3);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        for q in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(gp(2.0, 1.0).quantile(q).is_err());
        }
    }

    #[test]
    fn sample_is_reproducible() {
        let p = gp(2.0, 3.0);
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..100).map(|_| p.sample(&mut a)).collect();
        let ys: Vec<f64> = (0..100).map(|_| p.sample(&mut b)).collect();
        assert_eq!(xs, ys);
        assert!(xs.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn small_shape_samples_are_positive() {
        let p = gp(0.3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mean = (0..n).map(|_| p.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.3).abs() < 0.01, "{mean}");
    }
}
