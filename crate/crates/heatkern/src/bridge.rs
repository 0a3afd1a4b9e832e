//! Brownian-bridge sampling.
//!
//! For an exact kernel `k`, the normalized product
//! `k(x, z, t - s) k(z, y, s) / k(x, y, t)` is a probability density in `z`
//! (Chapman-Kolmogorov). Sampling it exactly is what makes the convolution
//! functionals plain time-averages: the density describes the position at
//! time `s` of a bridge that starts at `y` (time 0) and ends at `x`
//! (time `t`).
//!
//! Euclidean bridges are Gaussian with mean `(s x + (t-s) y) / t` and
//! per-coordinate variance `2 s (t-s) / t`; half-space bridges are drawn by
//! rejection from the Euclidean proposal; product manifolds sample factors
//! independently.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{ManifoldModel, Point};
use crate::kernel::{gauss_weierstrass, BaseKernel};

const MAX_REJECTION_ROUNDS: usize = 100_000;

/// Whether exact bridge sampling is available on this manifold.
pub fn supports_bridge(manifold: &ManifoldModel) -> bool {
    match manifold {
        ManifoldModel::Euclidean { .. } | ManifoldModel::HalfSpace { .. } => true,
        ManifoldModel::Hyperbolic3 | ManifoldModel::HyperbolicN { .. } => false,
        ManifoldModel::Product(l, r) => supports_bridge(l) && supports_bridge(r),
    }
}

fn euclidean_bridge<R: Rng>(x: &[f64], y: &[f64], t: f64, s: f64, rng: &mut R) -> Vec<f64> {
    let sd = (2.0 * s * (t - s) / t).sqrt();
    x.iter()
        .zip(y)
        .map(|(&xc, &yc)| {
            let mean = (s * xc + (t - s) * yc) / t;
            mean + sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

/// Dirichlet half-space bridge density ratio against the free proposal:
/// the product of the two reflection factors, each in `[0, 1)`.
fn half_space_acceptance(x: &[f64], y: &[f64], z: &[f64], t: f64, s: f64, n: usize) -> f64 {
    let reflect = |p: &[f64]| {
        let mut q = p.to_vec();
        let last = q.last_mut().unwrap();
        *last = -*last;
        q
    };
    let dist = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };
    let zr = reflect(z);
    let num1 = gauss_weierstrass(dist(x, z), t - s, n) - gauss_weierstrass(dist(x, &zr), t - s, n);
    let num2 = gauss_weierstrass(dist(z, y), s, n) - gauss_weierstrass(dist(&zr, y), s, n);
    let den1 = gauss_weierstrass(dist(x, z), t - s, n);
    let den2 = gauss_weierstrass(dist(z, y), s, n);
    (num1 / den1).max(0.0) * (num2 / den2).max(0.0)
}

fn sample_on<R: Rng>(
    manifold: &ManifoldModel,
    x: &[f64],
    y: &[f64],
    t: f64,
    s: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match manifold {
        ManifoldModel::Euclidean { .. } => Ok(euclidean_bridge(x, y, t, s, rng)),
        ManifoldModel::HalfSpace { dimension } => {
            for _ in 0..MAX_REJECTION_ROUNDS {
                let z = euclidean_bridge(x, y, t, s, rng);
                if *z.last().unwrap() <= 0.0 {
                    continue;
                }
                let accept = half_space_acceptance(x, y, &z, t, s, *dimension);
                if rng.random::<f64>() < accept {
                    return Ok(z);
                }
            }
            Err(Error::Divergence(
                "half-space bridge rejection sampler exhausted its round budget".into(),
            ))
        }
        ManifoldModel::Product(l, r) => {
            let ld = l.dimension();
            let mut z = sample_on(l, &x[..ld], &y[..ld], t, s, rng)?;
            z.extend(sample_on(r, &x[ld..], &y[ld..], t, s, rng)?);
            Ok(z)
        }
        ManifoldModel::Hyperbolic3 | ManifoldModel::HyperbolicN { .. } => Err(Error::Unsupported(
            "bridge sampling requires a Euclidean or half-space model".into(),
        )),
    }
}

/// Draws `z` with density `k(x, z, t-s) k(z, y, s) / k(x, y, t)`.
///
/// Requires an exact kernel on a Euclidean or half-space model (or a product
/// of such). The spectral shift cancels in the normalized density, so
/// shifted kernels sample identically to their unshifted versions.
pub fn bridge_sample<R: Rng>(
    kernel: &BaseKernel,
    x: &Point,
    y: &Point,
    t: f64,
    s: f64,
    rng: &mut R,
) -> Result<Point> {
    if !kernel.is_exact() {
        return Err(Error::Unsupported(
            "bridge sampling needs an exact kernel; envelopes have no sampling density".into(),
        ));
    }
    if !(t > 0.0) || !(s > 0.0 && s < t) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < s < t, got s = {s}, t = {t}"
        )));
    }
    kernel.manifold().check_point(x)?;
    kernel.manifold().check_point(y)?;
    sample_on(kernel.manifold(), x.coords(), y.coords(), t, s, rng).map(Point)
}

/// Samples a bridge path from `y` (time 0) to `x` (time `t`) at the given
/// strictly increasing interior times, one conditional bridge step at a time.
pub fn sample_path<R: Rng>(
    kernel: &BaseKernel,
    x: &Point,
    y: &Point,
    t: f64,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<Point>> {
    let mut positions = Vec::with_capacity(times.len());
    let mut prev_time = 0.0;
    let mut prev = y.clone();
    for &u in times {
        if !(u > prev_time && u < t) {
            return Err(Error::InvalidArgument(
                "path times must be strictly increasing inside (0, t)".into(),
            ));
        }
        // position at time u of the bridge pinned at (prev, prev_time) and
        // (x, t): shift the clock so the segment starts at 0
        let z = bridge_sample(kernel, x, &prev, t - prev_time, u - prev_time, rng)?;
        prev_time = u;
        prev = z.clone();
        positions.push(z);
    }
    Ok(positions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_adaptive;
    use crate::potential::Potential;
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_bridge_moments() {
        let k = BaseKernel::exact(ManifoldModel::euclidean(1)).unwrap();
        let x = Point::new(vec![0.0]);
        let y = Point::new(vec![1.0]);
        let mut rng = crate::rng::stream(42, &[0]);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let z = bridge_sample(&k, &x, &y, 1.0, 0.5, &mut rng).unwrap().0[0];
            sum += z;
            sum2 += z * z;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        // true: mean 0.5, variance 2 * 0.5 * 0.5 / 1 = 0.5
        let se_mean = (0.5_f64 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se_mean, "mean {mean}");
        let se_var = (2.0 * 0.5_f64 * 0.5 / n as f64).sqrt();
        assert!((var - 0.5).abs() < 3.0 * se_var, "variance {var}");
    }

    #[test]
    fn degenerate_time_limits_pin_the_endpoints() {
        let k = BaseKernel::exact(ManifoldModel::euclidean(2)).unwrap();
        let x = Point::new(vec![3.0, -1.0]);
        let y = Point::new(vec![-2.0, 4.0]);
        let mut rng = crate::rng::stream(1, &[7]);
        // s -> 0+: concentrates at y; s -> t-: the weight k(x, z, t-s) pins
        // z at x
        let near_y = bridge_sample(&k, &x, &y, 1.0, 1e-9, &mut rng).unwrap();
        assert!(near_y.euclidean_distance(&y) < 1e-3);
        let near_x = bridge_sample(&k, &x, &y, 1.0, 1.0 - 1e-9, &mut rng).unwrap();
        assert!(near_x.euclidean_distance(&x) < 1e-3);
    }

    #[test]
    fn bridge_average_matches_quadrature_for_bump() {
        // MC average of |V(z)| under the bridge density vs deterministic
        // quadrature of the normalized integrand, 1-D.
        let k = BaseKernel::exact(ManifoldModel::euclidean(1)).unwrap();
        let x = Point::new(vec![0.0]);
        let y = Point::new(vec![1.0]);
        let (t, s) = (1.0, 0.3);
        let v = Potential::compact_bump(Point::new(vec![0.5]), 0.8, 2.0, 2);

        let kxy = k.point_value(&x, &y, t);
        let density = |z: f64| {
            let zp = Point::new(vec![z]);
            k.point_value(&x, &zp, t - s) * k.point_value(&zp, &y, s) / kxy
        };
        let exact = integrate_adaptive(
            &|z| density(z) * v.evaluate(&Point::new(vec![z])).unwrap().abs(),
            -10.0,
            11.0,
            1e-10,
        );

        let mut rng = crate::rng::stream(9, &[4]);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z = bridge_sample(&k, &x, &y, t, s, &mut rng).unwrap();
            sum += v.evaluate(&z).unwrap().abs();
        }
        let mc = sum / n as f64;
        assert_relative_eq!(mc, exact, max_relative = 0.01);
    }

    #[test]
    fn half_space_bridge_matches_quadrature() {
        let k = BaseKernel::exact(ManifoldModel::half_space(1)).unwrap();
        let x = Point::new(vec![0.8]);
        let y = Point::new(vec![1.6]);
        let (t, s) = (0.9, 0.4);
        let v = Potential::ball_indicator(Point::new(vec![1.0]), 0.5, 1.0);

        let kxy = k.point_value(&x, &y, t);
        let exact = integrate_adaptive(
            &|z| {
                if z <= 0.0 {
                    return 0.0;
                }
                let zp = Point::new(vec![z]);
                k.point_value(&x, &zp, t - s) * k.point_value(&zp, &y, s) / kxy
                    * v.evaluate(&zp).unwrap().abs()
            },
            1e-9,
            12.0,
            1e-10,
        );

        let mut rng = crate::rng::stream(10, &[5]);
        let n = 150_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z = bridge_sample(&k, &x, &y, t, s, &mut rng).unwrap();
            sum += v.evaluate(&z).unwrap().abs();
        }
        assert_relative_eq!(sum / n as f64, exact, max_relative = 0.015);
    }

    #[test]
    fn rejects_unsupported_configurations() {
        let mut rng = crate::rng::stream(0, &[0]);
        let hyp = BaseKernel::exact(ManifoldModel::Hyperbolic3).unwrap();
        let p = Point::new(vec![0.0, 0.0, 1.0]);
        assert!(bridge_sample(&hyp, &p, &p, 1.0, 0.5, &mut rng).is_err());

        let env = BaseKernel::hyperbolic_n(5).unwrap();
        let q = Point::new(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(bridge_sample(&env, &q, &q, 1.0, 0.5, &mut rng).is_err());

        let k = BaseKernel::exact(ManifoldModel::euclidean(1)).unwrap();
        let z = Point::new(vec![0.0]);
        assert!(bridge_sample(&k, &z, &z, 1.0, 0.0, &mut rng).is_err());
        assert!(bridge_sample(&k, &z, &z, 1.0, 1.0, &mut rng).is_err());
    }
}
