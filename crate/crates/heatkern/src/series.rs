//! Iterated kernels and Neumann-series perturbed kernels.
//!
//! The perturbed operator `P - eps V` has heat kernel
//! `sum_i eps^i k_i(x, y, t)`, where `k_0 = k` and
//! `k_i = int_0^t int k_(i-1)(x, z, t-s) V(z) k(z, y, s) dz ds`.
//! The i-fold convolution is an integral over the ordered time simplex, and
//! the product of kernels along the chain is exactly the finite-dimensional
//! density of the bridge from `y` to `x`. Two estimators exploit this:
//!
//! * [`iterated_kernel`] draws sorted uniform times and a bridge path
//!   through them: `k_i = k * t^i / i! * E[prod_j V(Z_j)]`, unbiased per
//!   term.
//! * [`feynman_kac`] sums the whole series at once through the pathwise
//!   identity `sum_i eps^i t^i/i! E[prod V] = E[exp(eps int_0^t V(Z_s) ds)]`,
//!   which is monotone in `eps` for `V >= 0` and log-convex in `eps` sample
//!   ensemble by sample ensemble -- the right engine for paired-seed
//!   comparisons.
//!
//! Convergence control is explicit: callers supply a 3k constant `C` and the
//! series refuses to run unless `C |eps| < 1`; the reported truncation error
//! is the geometric tail bound `(C|eps|)^(i+1) / (1 - C|eps|) * k`.

use serde::{Deserialize, Serialize};

use crate::bridge::sample_path;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernel::{BaseKernel, Estimate, SpaceTimeKernel};
use crate::potential::Potential;
use crate::quadrature::{duhamel_with, underflows, QuadratureConfig};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    /// Perturbation strength in `P - eps V`.
    pub epsilon: f64,
    /// Hard cap on the number of series terms.
    pub max_terms: usize,
    /// Stop once the geometric tail bound falls below this fraction of the
    /// base kernel.
    pub relative_tolerance: f64,
    /// The 3k constant `C`: either the certified restricted constant
    /// `T sup|V|` or a scanned estimate. Convergence claims need
    /// `|epsilon| C < 1`.
    pub three_k_constant: f64,
    /// Maximum convolution depth for iterated kernels.
    pub nesting_depth: usize,
    pub quadrature: QuadratureConfig,
}

impl SeriesConfig {
    pub fn new(epsilon: f64, three_k_constant: f64, quadrature: QuadratureConfig) -> Self {
        SeriesConfig {
            epsilon,
            max_terms: 16,
            relative_tolerance: 1e-6,
            three_k_constant,
            nesting_depth: 8,
            quadrature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 1 {
            return Err(Error::Config("series needs at least one term".into()));
        }
        if !(self.three_k_constant > 0.0) {
            return Err(Error::Config(
                "a positive 3k constant is required; certify one or use T * sup|V|".into(),
            ));
        }
        self.quadrature.validate()
    }
}

/// Folds the bit patterns of a probe into a stream index, so inner
/// evaluators decorrelate across the points they are called at while staying
/// deterministic.
pub(crate) fn probe_hash(x: &Point, y: &Point, t: f64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    let mut fold = |bits: u64| {
        h ^= bits;
        h = h.wrapping_mul(0x1000_0000_01b3);
    };
    for c in x.coords().iter().chain(y.coords()) {
        fold(c.to_bits());
    }
    fold(t.to_bits());
    h
}

/// The `i`-fold iterated kernel by simplex Monte Carlo over bridge paths.
pub fn iterated_kernel(
    kernel: &BaseKernel,
    v: &Potential,
    i: usize,
    x: &Point,
    y: &Point,
    t: f64,
    cfg: &SeriesConfig,
) -> Result<Estimate> {
    iterated_with_path(kernel, v, i, x, y, t, cfg, &[])
}

#[allow(clippy::too_many_arguments)]
fn iterated_with_path(
    kernel: &BaseKernel,
    v: &Potential,
    i: usize,
    x: &Point,
    y: &Point,
    t: f64,
    cfg: &SeriesConfig,
    path: &[u64],
) -> Result<Estimate> {
    cfg.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("time must be positive".into()));
    }
    if i > cfg.nesting_depth {
        return Err(Error::Config(format!(
            "iterated kernel depth {i} exceeds the configured nesting depth {}",
            cfg.nesting_depth
        )));
    }
    if underflows(kernel.manifold(), x, y, t) {
        return Ok(Estimate::underflowed());
    }
    let kxy = kernel.point_value(x, y, t);
    if i == 0 {
        return Ok(Estimate::exact(kxy));
    }

    let quad = &cfg.quadrature;
    let per_batch = (quad.mc_samples * quad.time_nodes).div_ceil(quad.strata);
    let m = per_batch * quad.strata;
    // t^i / i!
    let simplex_volume: f64 = (1..=i).map(|j| t / j as f64).product();

    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut times = vec![0.0; i];
    for batch in 0..quad.strata {
        let mut p = path.to_vec();
        p.extend([20, i as u64, batch as u64]);
        let mut rng = stream(quad.seed, &p);
        for _ in 0..per_batch {
            for slot in times.iter_mut() {
                *slot = rand::Rng::random_range(&mut rng, 0.0..t);
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let positions = sample_path(kernel, x, y, t, &times, &mut rng)?;
            let mut prod = 1.0;
            for z in &positions {
                prod *= v.evaluate(z)?;
            }
            sum += prod;
            sum2 += prod * prod;
        }
    }
    let mean = sum / m as f64;
    let var = (sum2 / m as f64 - mean * mean).max(0.0);
    Ok(Estimate::new(
        kxy * simplex_volume * mean,
        kxy * simplex_volume * (var / m as f64).sqrt(),
        0.0,
    ))
}

/// Sandwich factors for the perturbed-to-base kernel ratio:
/// `((1 - 2C|eps|) / (1 - C|eps|), 1 / (1 - C|eps|))`, valid for
/// `|eps| < 1/(2C)`.
pub fn sandwich_bounds(c: f64, eps: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument("the 3k constant must be positive".into()));
    }
    let q = c * eps.abs();
    if !(q < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "sandwich bounds need |eps| < 1/(2C); got C|eps| = {q}"
        )));
    }
    Ok(((1.0 - 2.0 * q) / (1.0 - q), 1.0 / (1.0 - q)))
}

/// The truncated Neumann series `sum_i eps^i k_i(x, y, t)`.
///
/// Terms are added until the geometric tail bound
/// `(C|eps|)^(i+1) / (1 - C|eps|)` drops below the relative tolerance (or
/// the term/depth caps bite); the remaining bound is reported as truncation
/// error. Runs refuse to start when `C |eps| >= 1`.
pub fn neumann_sum(
    kernel: &BaseKernel,
    v: &Potential,
    cfg: &SeriesConfig,
    x: &Point,
    y: &Point,
    t: f64,
) -> Result<Estimate> {
    neumann_with_path(kernel, v, cfg, x, y, t, &[])
}

pub(crate) fn neumann_with_path(
    kernel: &BaseKernel,
    v: &Potential,
    cfg: &SeriesConfig,
    x: &Point,
    y: &Point,
    t: f64,
    path: &[u64],
) -> Result<Estimate> {
    cfg.validate()?;
    let q = cfg.three_k_constant * cfg.epsilon.abs();
    if cfg.epsilon != 0.0 && q >= 1.0 {
        return Err(Error::Divergence(format!(
            "C |eps| = {q} >= 1: the Neumann series has no geometric majorant"
        )));
    }
    if underflows(kernel.manifold(), x, y, t) {
        return Ok(Estimate::underflowed());
    }
    let kxy = kernel.point_value(x, y, t);
    let mut value = 0.0;
    let mut var = 0.0;
    let mut trunc = 0.0;
    let depth = cfg.nesting_depth.min(cfg.max_terms - 1);
    let mut tail = 1.0 / (1.0 - q).max(f64::MIN_POSITIVE);
    for i in 0..=depth {
        // terms are seeded by (path, i) only: scans over eps reuse the same
        // draws, so cross-eps comparisons are paired
        let term = iterated_with_path(kernel, v, i, x, y, t, cfg, path)?;
        let scale = cfg.epsilon.powi(i as i32);
        value += scale * term.value;
        var += scale * scale * term.stat_err * term.stat_err;
        trunc += scale.abs() * term.trunc_err;
        tail = q.powi(i as i32 + 1) / (1.0 - q);
        if cfg.epsilon == 0.0 || tail < cfg.relative_tolerance {
            break;
        }
    }
    Ok(Estimate::new(value, var.sqrt(), trunc + tail * kxy))
}

/// Whole-series pathwise estimator `k(x,y,t) * E[exp(eps int_0^t V(Z_s) ds)]`
/// along the bridge, with the time integral discretized on `slices` midpoint
/// slabs.
///
/// Within one ensemble (fixed seed path) the estimate is monotone in `eps`
/// for `V >= 0` and log-convex in `eps` unconditionally, which makes it the
/// engine for paired-seed monotonicity and interpolation scans.
#[allow(clippy::too_many_arguments)]
pub fn feynman_kac(
    kernel: &BaseKernel,
    v: &Potential,
    eps: f64,
    x: &Point,
    y: &Point,
    t: f64,
    quad: &QuadratureConfig,
    slices: usize,
    path: &[u64],
) -> Result<Estimate> {
    quad.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("time must be positive".into()));
    }
    if slices < 2 {
        return Err(Error::InvalidArgument("need at least 2 path slices".into()));
    }
    if underflows(kernel.manifold(), x, y, t) {
        return Ok(Estimate::underflowed());
    }
    let kxy = kernel.point_value(x, y, t);
    let times: Vec<f64> = (0..slices).map(|l| (l as f64 + 0.5) * t / slices as f64).collect();
    let per_batch = quad.mc_samples.div_ceil(quad.strata);
    let m = per_batch * quad.strata;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for batch in 0..quad.strata {
        let mut p = path.to_vec();
        p.extend([30, batch as u64]);
        let mut rng = stream(quad.seed, &p);
        for _ in 0..per_batch {
            let positions = sample_path(kernel, x, y, t, &times, &mut rng)?;
            let mut integral = 0.0;
            for z in &positions {
                integral += v.evaluate(z)?;
            }
            integral *= t / slices as f64;
            let w = (eps * integral).exp();
            sum += w;
            sum2 += w * w;
        }
    }
    let mean = sum / m as f64;
    let var = (sum2 / m as f64 - mean * mean).max(0.0);
    Ok(Estimate::new(kxy * mean, kxy * (var / m as f64).sqrt(), 0.0))
}

/// Residuals of the two resolvent identities
/// `k_eps = k + eps * (k V k_eps) = k + eps * (k_eps V k)`
/// at one probe: `(base-first, perturbed-first)`.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_residual(
    k_perturbed: &dyn SpaceTimeKernel,
    kernel: &BaseKernel,
    v: &Potential,
    eps: f64,
    x: &Point,
    y: &Point,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<(Estimate, Estimate)> {
    let kp = k_perturbed.estimate(x, y, t);
    let k0 = kernel.point_value(x, y, t);
    if eps == 0.0 {
        let r = Estimate::new(kp.value - k0, kp.stat_err, kp.trunc_err);
        return Ok((r, r));
    }
    let base_first = duhamel_with(
        kernel,
        kernel,
        v,
        &|z, s| k_perturbed.estimate(z, y, s),
        x,
        y,
        t,
        cfg,
        &[40],
    )?;
    let pert_first = duhamel_with(
        kernel,
        k_perturbed,
        v,
        &|z, s| kernel.estimate(z, y, s),
        x,
        y,
        t,
        cfg,
        &[41],
    )?;
    let residual = |d: Estimate| {
        Estimate::new(
            kp.value - k0 - eps * d.value,
            (kp.stat_err * kp.stat_err + eps * eps * d.stat_err * d.stat_err).sqrt(),
            kp.trunc_err + eps.abs() * d.trunc_err,
        )
    };
    Ok((residual(base_first), residual(pert_first)))
}

/// A perturbed-kernel evaluator backed by the truncated Neumann series.
/// Evaluations at different probes decorrelate their streams through a
/// probe hash, so nesting this inside an outer Monte Carlo integral keeps
/// the outer samples independent.
pub struct NeumannEvaluator<'a> {
    pub kernel: &'a BaseKernel,
    pub potential: &'a Potential,
    pub config: SeriesConfig,
}

impl SpaceTimeKernel for NeumannEvaluator<'_> {
    fn estimate(&self, x: &Point, y: &Point, t: f64) -> Estimate {
        match neumann_with_path(
            self.kernel,
            self.potential,
            &self.config,
            x,
            y,
            t,
            &[50, probe_hash(x, y, t)],
        ) {
            Ok(est) => est,
            Err(_) => Estimate::underflowed(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (BaseKernel, Point, Point) {
        let k = BaseKernel::exact(ManifoldModel::euclidean(n)).unwrap();
        let x = Point::new(vec![0.0; n]);
        let mut yc = vec![0.0; n];
        yc[0] = 0.7;
        (k, x, Point::new(yc))
    }

    fn config(eps: f64, c: f64, seed: u64) -> SeriesConfig {
        let mut quad = QuadratureConfig::bridge(seed);
        quad.mc_samples = 512;
        quad.time_nodes = 8;
        SeriesConfig::new(eps, c, quad)
    }

    #[test]
    fn depth_zero_is_the_base_kernel() {
        let (k, x, y) = setup(2);
        let v = Potential::ball_indicator(Point::new(vec![0.0, 0.0]), 1.0, 1.0);
        let cfg = config(0.1, 1.0, 1);
        let est = iterated_kernel(&k, &v, 0, &x, &y, 1.3, &cfg).unwrap();
        assert_eq!(est.value, k.point_value(&x, &y, 1.3));
        assert_eq!(est.stat_err, 0.0);
    }

    #[test]
    fn constant_potential_iterates_in_closed_form() {
        // k_i = (c t)^i / i! * k, with zero sampling variance
        let (k, x, y) = setup(1);
        let c = 0.4;
        let t = 1.7;
        let v = Potential::constant(c);
        let cfg = config(1.0, c * t, 5);
        let kxy = k.point_value(&x, &y, t);
        let mut factorial = 1.0;
        for i in 1..=3usize {
            factorial *= i as f64;
            let est = iterated_kernel(&k, &v, i, &x, &y, t, &cfg).unwrap();
            let expect = (c * t).powi(i as i32) / factorial * kxy;
            assert_relative_eq!(est.value, expect, max_relative = 1e-12);
            // variance of a constant sample is zero up to cancellation noise
            assert!(est.stat_err <= 1e-6 * expect);
        }
    }

    #[test]
    fn iterates_bounded_by_restricted_constant() {
        // |k_i| <= C^i k with C = t sup|V|, pathwise for the simplex sampler
        let (k, x, y) = setup(2);
        let v = Potential::ball_indicator(Point::new(vec![0.0, 0.0]), 1.0, 0.8);
        let t = 2.0;
        let c = t * 0.8;
        let cfg = config(0.1, c, 6);
        let kxy = k.point_value(&x, &y, t);
        for i in 1..=4usize {
            let est = iterated_kernel(&k, &v, i, &x, &y, t, &cfg).unwrap();
            assert!(est.value.abs() <= c.powi(i as i32) * kxy * (1.0 + 1e-12), "i = {i}");
        }
    }

    #[test]
    fn depth_cap_is_enforced() {
        let (k, x, y) = setup(1);
        let v = Potential::constant(0.1);
        let cfg = config(0.1, 1.0, 2);
        assert!(iterated_kernel(&k, &v, 9, &x, &y, 1.0, &cfg).is_err());
    }

    #[test]
    fn neumann_zero_eps_is_exact() {
        let (k, x, y) = setup(3);
        let v = Potential::ball_indicator(Point::new(vec![0.0; 3]), 1.0, 1.0);
        let cfg = config(0.0, 1.0, 3);
        let est = neumann_sum(&k, &v, &cfg, &x, &y, 0.9).unwrap();
        assert_eq!(est.value, k.point_value(&x, &y, 0.9));
        assert_eq!(est.trunc_err, 0.0);
    }

    #[test]
    fn neumann_constant_matches_spectral_shift() {
        // V = c: the perturbed kernel is e^(eps c t) k, the spectral-shift
        // identity; the series reproduces it to its own tail tolerance
        let (k, x, y) = setup(1);
        let c = 0.3;
        let t = 1.5;
        for eps in [0.5, -0.5, 1.0] {
            let cfg = config(eps, c * t, 4);
            let est = neumann_sum(&k, &v_const(c), &cfg, &x, &y, t).unwrap();
            let expect = (eps * c * t).exp() * k.point_value(&x, &y, t);
            let budget = 3.0 * est.stat_err + est.trunc_err + 1e-12;
            assert!(
                (est.value - expect).abs() <= budget,
                "eps = {eps}: {} vs {expect} (budget {budget})",
                est.value
            );
        }
    }

    fn v_const(c: f64) -> Potential {
        Potential::constant(c)
    }

    #[test]
    fn neumann_rejects_divergent_configurations() {
        let (k, x, y) = setup(1);
        let v = v_const(1.0);
        let cfg = config(2.0, 1.0, 0);
        match neumann_sum(&k, &v, &cfg, &x, &y, 1.0) {
            Err(Error::Divergence(_)) => {}
            other => panic!("expected divergence-risk error, got {other:?}"),
        }
    }

    #[test]
    fn sandwich_bound_arithmetic() {
        assert_eq!(sandwich_bounds(1.0, 0.0).unwrap(), (1.0, 1.0));
        let (lo, hi) = sandwich_bounds(1.0, 0.25).unwrap();
        assert_relative_eq!(lo, 2.0 / 3.0);
        assert_relative_eq!(hi, 4.0 / 3.0);
        let (lo, hi) = sandwich_bounds(2.0, 0.2).unwrap();
        assert_relative_eq!(lo, 1.0 / 3.0);
        assert_relative_eq!(hi, 5.0 / 3.0);
        assert!(sandwich_bounds(1.0, 0.5).is_err());
        assert!(sandwich_bounds(1.0, -0.6).is_err());
    }

    #[test]
    fn series_and_pathwise_exponential_agree() {
        // two algebraic routes to the same kernel: term-by-term simplex
        // sums and the bridge exponential
        let (k, x, y) = setup(2);
        let v = Potential::compact_bump(Point::new(vec![0.0, 0.0]), 1.0, 0.6, 2);
        let t = 1.1;
        let eps = 0.5;
        let mut cfg = config(eps, t * 0.6, 7);
        cfg.quadrature.mc_samples = 4096;
        let series = neumann_sum(&k, &v, &cfg, &x, &y, t).unwrap();
        let fk = feynman_kac(&k, &v, eps, &x, &y, t, &cfg.quadrature, 64, &[99]).unwrap();
        let budget = 3.0 * (series.stat_err + fk.stat_err) + series.trunc_err
            + 0.01 * fk.value; // midpoint-slab bias allowance
        assert!(
            (series.value - fk.value).abs() <= budget,
            "series {} vs pathwise {} budget {budget}",
            series.value,
            fk.value
        );
    }

    #[test]
    fn feynman_kac_is_monotone_and_log_convex_in_eps() {
        let (k, x, y) = setup(2);
        let v = Potential::ball_indicator(Point::new(vec![0.0, 0.0]), 1.0, 0.5);
        let quad = QuadratureConfig { mc_samples: 1024, ..QuadratureConfig::bridge(11) };
        let evals: Vec<f64> = [-0.4, -0.2, 0.0, 0.2, 0.4]
            .iter()
            .map(|&eps| feynman_kac(&k, &v, eps, &x, &y, 1.0, &quad, 32, &[1]).unwrap().value)
            .collect();
        for w in evals.windows(2) {
            assert!(w[0] <= w[1] * (1.0 + 1e-12), "monotone in eps for V >= 0");
        }
        // log-convexity across the shared ensemble
        for w in evals.windows(3) {
            assert!(w[1] * w[1] <= w[0] * w[2] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn resolvent_residual_vanishes_for_spectral_shift() {
        // for constant V the perturbed kernel is the shifted kernel, which
        // satisfies the resolvent identity exactly
        let (k, x, y) = setup(1);
        let c = 0.4;
        let eps = 0.6;
        let t = 1.2;
        let shifted = k.shifted(eps * c);
        let quad = QuadratureConfig { mc_samples: 8192, ..QuadratureConfig::bridge(13) };
        let (r1, r2) =
            resolvent_residual(&shifted, &k, &v_const(c), eps, &x, &y, t, &quad).unwrap();
        let scale = k.point_value(&x, &y, t);
        for (label, r) in [("base-first", r1), ("perturbed-first", r2)] {
            let budget = 3.0 * r.stat_err + r.trunc_err + 1e-12 * scale;
            assert!(r.value.abs() <= budget, "{label}: residual {} budget {budget}", r.value);
        }
        // eps = 0 is exactly zero
        let (z1, z2) = resolvent_residual(&k, &k, &v_const(c), 0.0, &x, &y, t, &quad).unwrap();
        assert_eq!(z1.value, 0.0);
        assert_eq!(z2.value, 0.0);
    }
}
