//! Reference measures, parabolic Martin kernels, and the mutually inverse
//! affine transforms between the solution cones of `L` and `L - V`.
//!
//! A reference measure is a compactly supported space-time weight
//! `psi(z) h(tau)`: `psi` a radial hat around a center point, `h` a time
//! profile vanishing up to `a1` and positive after. Normalizing a kernel by
//! its measure of the second argument gives the Martin kernel, which
//! vanishes for reversed time order.
//!
//! The transform pair is
//! `(T u)(x,t) = u(x,t) + int_a^t int k_(P-V)(x,z,t-s) V(z) u(z,s) dz ds`
//! and
//! `(S v)(x,t) = v(x,t) - int_a^t int k_P(x,z,t-s) V(z) v(z,s) dz ds`;
//! `S . T` is the identity on nonnegative solutions, which the tests verify
//! on families with independent evaluation paths (constants, kernel slices,
//! series solutions).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ManifoldModel, Point};
use crate::kernel::{BaseKernel, Estimate, SpaceTimeKernel};
use crate::numerics::gauss_legendre_on;
use crate::potential::Potential;
use crate::quadrature::{duhamel_with, QuadratureConfig};
use crate::series::probe_hash;

/// Time profile of a reference measure: zero on `(a, a1]`, positive after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeProfile {
    /// `exp(-rate (tau - a1))` for `tau > a1`.
    ExpDecay { rate: f64 },
    /// `1` on `(a1, until]`, zero after.
    Window { until: f64 },
}

/// The pair `(psi, h)` defining the measure `psi(z) h(tau) dz dtau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeasure {
    /// Center of the spatial hat `psi` (1 on the ball of `spatial_radius`,
    /// 0 outside twice that radius, linear between).
    pub center: Point,
    pub spatial_radius: f64,
    /// Time window `(a, b)`; `b` may be infinite.
    pub window: (f64, f64),
    /// `h` vanishes on `(a, positive_from]`.
    pub positive_from: f64,
    pub profile: TimeProfile,
    pub scale: f64,
}

impl ReferenceMeasure {
    /// Default measure on the window `(a, infinity)`: unit hat radius,
    /// exponential time profile switching on one unit after `a`.
    pub fn standard(center: Point, a: f64) -> Self {
        ReferenceMeasure {
            center,
            spatial_radius: 1.0,
            window: (a, f64::INFINITY),
            positive_from: a + 0.5,
            profile: TimeProfile::ExpDecay { rate: 1.0 },
            scale: 1.0,
        }
    }

    /// Rescales so that the measure has unit total mass in `dim` dimensions.
    pub fn normalized(mut self, dim: usize) -> Self {
        let mass = self.psi_integral(dim) * self.h_integral() / self.scale;
        self.scale = 1.0 / mass;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.window;
        if !(self.spatial_radius > 0.0 && self.scale > 0.0) {
            return Err(Error::Config("reference measure needs positive radius and scale".into()));
        }
        if !(a < b && a < self.positive_from && self.positive_from < b) {
            return Err(Error::Config("need a < a1 < b in the reference time window".into()));
        }
        if let TimeProfile::Window { until } = self.profile {
            if !(until > self.positive_from) {
                return Err(Error::Config("window profile must end after it starts".into()));
            }
        }
        Ok(())
    }

    /// Radial hat weight at `z`.
    pub fn psi(&self, z: &Point) -> f64 {
        let rho = z.euclidean_distance(&self.center);
        if rho <= self.spatial_radius {
            1.0
        } else if rho >= 2.0 * self.spatial_radius {
            0.0
        } else {
            2.0 - rho / self.spatial_radius
        }
    }

    /// Time weight at `tau`, including the scale.
    pub fn h(&self, tau: f64) -> f64 {
        let (a, b) = self.window;
        if tau <= self.positive_from || tau <= a || tau >= b {
            return 0.0;
        }
        self.scale
            * match self.profile {
                TimeProfile::ExpDecay { rate } => (-rate * (tau - self.positive_from)).exp(),
                TimeProfile::Window { until } => {
                    if tau <= until {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
    }

    /// `int psi dz` in `dim` dimensions (radial reduction, panels split at
    /// the hat kink so the rule is exact).
    pub fn psi_integral(&self, dim: usize) -> f64 {
        let r = self.spatial_radius;
        let area = crate::numerics::unit_sphere_area(dim);
        let mut acc = 0.0;
        for (lo, hi) in [(0.0, r), (r, 2.0 * r)] {
            let (nodes, weights) = gauss_legendre_on(16, lo, hi);
            for (&rho, &w) in nodes.iter().zip(&weights) {
                let psi = if rho <= r { 1.0 } else { 2.0 - rho / r };
                acc += w * psi * rho.powi(dim as i32 - 1);
            }
        }
        area * acc
    }

    /// `int h dtau` including the scale.
    pub fn h_integral(&self) -> f64 {
        self.scale
            * match self.profile {
                TimeProfile::ExpDecay { rate } => {
                    let b = self.window.1;
                    if b.is_finite() {
                        (1.0 - (-rate * (b - self.positive_from)).exp()) / rate
                    } else {
                        1.0 / rate
                    }
                }
                TimeProfile::Window { until } => until.min(self.window.1) - self.positive_from,
            }
    }
}

/// A nonnegative space-time function with an error-carrying evaluator.
/// Implemented by the caloric test family and by the transforms themselves
/// (so transforms nest).
pub trait SpaceTimeFn: Sync {
    fn eval(&self, x: &Point, t: f64) -> Estimate;
}

/// The caloric test family: each member has an evaluation path independent
/// of the machinery under test.
pub enum CaloricFunction<'a> {
    /// `u = 1`, caloric whenever the operator annihilates constants.
    One,
    /// `u(x, t) = k(x, source, t - birth)`, a translated kernel slice;
    /// zero at or before the birth time.
    KernelSlice { kernel: &'a BaseKernel, source: Point, birth: f64 },
    /// A slice of a perturbed-kernel evaluator.
    PerturbedSlice { evaluator: &'a dyn SpaceTimeKernel, source: Point, birth: f64 },
    /// Affine combination of members.
    Combination(Vec<(f64, CaloricFunction<'a>)>),
}

impl SpaceTimeFn for CaloricFunction<'_> {
    fn eval(&self, x: &Point, t: f64) -> Estimate {
        match self {
            CaloricFunction::One => Estimate::exact(1.0),
            CaloricFunction::KernelSlice { kernel, source, birth } => {
                if t <= *birth {
                    Estimate::exact(0.0)
                } else {
                    Estimate::exact(kernel.point_value(x, source, t - birth))
                }
            }
            CaloricFunction::PerturbedSlice { evaluator, source, birth } => {
                if t <= *birth {
                    Estimate::exact(0.0)
                } else {
                    evaluator.estimate(x, source, t - birth)
                }
            }
            CaloricFunction::Combination(parts) => {
                let mut value = 0.0;
                let mut stat = 0.0;
                let mut trunc = 0.0;
                for (c, f) in parts {
                    let e = f.eval(x, t);
                    value += c * e.value;
                    stat += c.abs() * e.stat_err;
                    trunc += c.abs() * e.trunc_err;
                }
                Estimate::new(value, stat, trunc)
            }
        }
    }
}

/// Integrates `u` against the reference measure:
/// `rho(u) = int h(tau) int u(z, tau) psi(z) dz dtau`,
/// with deterministic product quadrature in space (dimension <= 3) and
/// decade panels with tail truncation in time.
pub fn rho_integral(
    rho: &ReferenceMeasure,
    u: &dyn SpaceTimeFn,
    manifold: &ManifoldModel,
    tail_tolerance: f64,
) -> Result<f64> {
    rho.validate()?;
    if !matches!(manifold, ManifoldModel::Euclidean { .. }) {
        return Err(Error::Unsupported(
            "reference-measure integrals are implemented on Euclidean models".into(),
        ));
    }
    let dim = manifold.dimension();
    if dim > 3 {
        return Err(Error::Unsupported("spatial quadrature implemented for dimension <= 3".into()));
    }

    // radial panels split at the hat kink
    let r = rho.spatial_radius;
    let radial_rule = |n: usize| -> (Vec<f64>, Vec<f64>) {
        let (mut nodes, mut weights) = gauss_legendre_on(n, 0.0, r);
        let (n2, w2) = gauss_legendre_on(n, r, 2.0 * r);
        nodes.extend(n2);
        weights.extend(w2);
        (nodes, weights)
    };
    let space_integral = |tau: f64| -> f64 {
        let c = &rho.center;
        match dim {
            1 => {
                let (rn, rw) = radial_rule(24);
                let mut acc = 0.0;
                for (&radius, &wr) in rn.iter().zip(&rw) {
                    for side in [-1.0, 1.0] {
                        let p = Point::new(vec![c.0[0] + side * radius]);
                        acc += wr * rho.psi(&p) * u.eval(&p, tau).value;
                    }
                }
                acc
            }
            2 => {
                let (rn, rw) = radial_rule(20);
                let na = 48;
                let mut acc = 0.0;
                for (&radius, &wr) in rn.iter().zip(&rw) {
                    for k in 0..na {
                        let theta = 2.0 * std::f64::consts::PI * k as f64 / na as f64;
                        let p = Point::new(vec![
                            c.0[0] + radius * theta.cos(),
                            c.0[1] + radius * theta.sin(),
                        ]);
                        acc += wr * (2.0 * std::f64::consts::PI / na as f64)
                            * radius
                            * rho.psi(&p)
                            * u.eval(&p, tau).value;
                    }
                }
                acc
            }
            3 => {
                let (rn, rw) = radial_rule(16);
                let (cn, cw) = gauss_legendre_on(16, -1.0, 1.0);
                let na = 24;
                let mut acc = 0.0;
                for (&radius, &wr) in rn.iter().zip(&rw) {
                    for (&cos_theta, &wc) in cn.iter().zip(&cw) {
                        let sin_theta = (1.0 - cos_theta * cos_theta).sqrt();
                        for k in 0..na {
                            let phi = 2.0 * std::f64::consts::PI * k as f64 / na as f64;
                            let p = Point::new(vec![
                                c.0[0] + radius * sin_theta * phi.cos(),
                                c.0[1] + radius * sin_theta * phi.sin(),
                                c.0[2] + radius * cos_theta,
                            ]);
                            acc += wr
                                * wc
                                * (2.0 * std::f64::consts::PI / na as f64)
                                * radius
                                * radius
                                * rho.psi(&p)
                                * u.eval(&p, tau).value;
                        }
                    }
                }
                acc
            }
            _ => unreachable!(),
        }
    };

    let (_, b) = rho.window;
    let a1 = rho.positive_from;
    if let TimeProfile::Window { until } = rho.profile {
        // compact time support: integrate it exactly, split into panels
        let top = until.min(b);
        let mut total = 0.0;
        let panels = 6;
        for i in 0..panels {
            let lo = a1 + (top - a1) * i as f64 / panels as f64;
            let hi = a1 + (top - a1) * (i + 1) as f64 / panels as f64;
            let (tn, tw) = gauss_legendre_on(24, lo, hi);
            total +=
                tn.iter().zip(&tw).map(|(&tau, &w)| w * rho.h(tau) * space_integral(tau)).sum::<f64>();
        }
        return Ok(total);
    }
    // decaying profile: unit panel after a1, then widening panels, until
    // the tail stalls
    let mut total = 0.0;
    let mut lo = a1;
    let mut len = 1.0;
    for _ in 0..48 {
        let hi = (lo + len).min(b);
        let (tn, tw) = gauss_legendre_on(24, lo, hi);
        let piece: f64 =
            tn.iter().zip(&tw).map(|(&tau, &w)| w * rho.h(tau) * space_integral(tau)).sum();
        total += piece;
        if hi >= b {
            return Ok(total);
        }
        if total > 0.0 && piece.abs() < tail_tolerance * total {
            return Ok(total);
        }
        lo = hi;
        len *= 10.0;
    }
    Err(Error::Divergence("reference-measure time integral did not settle".into()))
}

/// The Martin kernel normalized by the reference measure:
/// `K((x,t),(y,s)) = k(x, y, t-s) / rho(k(., (y, s)))` for `s < t`, and `0`
/// for `t <= s`.
pub fn martin_kernel(
    kernel: &BaseKernel,
    rho: &ReferenceMeasure,
    target: (&Point, f64),
    source: (&Point, f64),
    tail_tolerance: f64,
) -> Result<f64> {
    let (x, t) = target;
    let (y, s) = source;
    if t <= s {
        return Ok(0.0);
    }
    let slice = CaloricFunction::KernelSlice { kernel, source: y.clone(), birth: s };
    let normalizer = rho_integral(rho, &slice, kernel.manifold(), tail_tolerance)?;
    if normalizer <= 0.0 {
        return Err(Error::InvalidArgument(
            "the reference measure gives this source zero mass".into(),
        ));
    }
    Ok(kernel.point_value(x, y, t - s) / normalizer)
}

/// Configuration for the transform integrals.
#[derive(Debug, Clone, Copy)]
pub struct TransformConfig {
    pub quadrature: QuadratureConfig,
    /// Time origin `a` of the window.
    pub origin: f64,
}

/// `(T u)(x, t) = u(x,t) + int_a^t int k_pert(x,z,t-s) V(z) u(z,s) dz ds`.
///
/// The double integral importance-samples `z` from the base-kernel bridge
/// anchored at the potential's support center, which tracks both the
/// near-diagonal concentration at `s -> t` and the support of `V`.
#[allow(clippy::too_many_arguments)]
pub fn transform_t(
    k_perturbed: &dyn SpaceTimeKernel,
    base: &BaseKernel,
    v: &Potential,
    u: &dyn SpaceTimeFn,
    x: &Point,
    t: f64,
    cfg: &TransformConfig,
    path: &[u64],
) -> Result<Estimate> {
    transform_inner(k_perturbed, base, v, u, x, t, cfg, 1.0, path)
}

/// `(S v)(x, t) = v(x,t) - int_a^t int k_base(x,z,t-s) V(z) v(z,s) dz ds`.
#[allow(clippy::too_many_arguments)]
pub fn transform_s(
    base: &BaseKernel,
    v: &Potential,
    w: &dyn SpaceTimeFn,
    x: &Point,
    t: f64,
    cfg: &TransformConfig,
    path: &[u64],
) -> Result<Estimate> {
    transform_inner(base, base, v, w, x, t, cfg, -1.0, path)
}

#[allow(clippy::too_many_arguments)]
fn transform_inner(
    fa: &dyn SpaceTimeKernel,
    base: &BaseKernel,
    v: &Potential,
    u: &dyn SpaceTimeFn,
    x: &Point,
    t: f64,
    cfg: &TransformConfig,
    sign: f64,
    path: &[u64],
) -> Result<Estimate> {
    if !(t > cfg.origin) {
        return Err(Error::InvalidArgument("evaluation time must lie inside the window".into()));
    }
    let u_here = u.eval(x, t);
    let anchor = match v.support_ball() {
        Some((c, _)) => c,
        None => {
            return Err(Error::Unsupported(
                "transforms need a compactly supported potential for the bridge anchor".into(),
            ))
        }
    };
    // shift the window so the integral runs over (0, t - a); the integrand
    // reads u at the absolute time s + a
    let horizon = t - cfg.origin;
    let origin = cfg.origin;
    let fb = |z: &Point, s: f64| u.eval(z, s + origin);
    let mut p = path.to_vec();
    p.push(probe_hash(x, &anchor, t));
    let integral = duhamel_with(base, fa, v, &fb, x, &anchor, horizon, &cfg.quadrature, &p)?;
    Ok(Estimate::new(
        u_here.value + sign * integral.value,
        (u_here.stat_err.powi(2) + integral.stat_err.powi(2)).sqrt(),
        u_here.trunc_err + integral.trunc_err,
    ))
}

/// `T u` as a nested evaluator, for feeding into `S` or into the
/// reference-measure integrals. Evaluations decorrelate across probes by
/// hashing the probe into the stream path.
pub struct TransformedT<'a> {
    pub k_perturbed: &'a dyn SpaceTimeKernel,
    pub base: &'a BaseKernel,
    pub potential: &'a Potential,
    pub inner: &'a dyn SpaceTimeFn,
    pub config: TransformConfig,
}

impl SpaceTimeFn for TransformedT<'_> {
    fn eval(&self, x: &Point, t: f64) -> Estimate {
        if t <= self.config.origin {
            return Estimate::exact(0.0);
        }
        match transform_t(
            self.k_perturbed,
            self.base,
            self.potential,
            self.inner,
            x,
            t,
            &self.config,
            &[60],
        ) {
            Ok(e) => e,
            Err(_) => Estimate::underflowed(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_adaptive;
    use approx::assert_relative_eq;

    fn origin3() -> Point {
        Point::new(vec![0.0, 0.0, 0.0])
    }

    #[test]
    fn normalized_measure_integrates_one_to_one() {
        let m = ManifoldModel::euclidean(3);
        let rho = ReferenceMeasure::standard(origin3(), 0.0).normalized(3);
        let got = rho_integral(&rho, &CaloricFunction::One, &m, 1e-10).unwrap();
        assert_relative_eq!(got, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn rho_is_linear() {
        let m = ManifoldModel::euclidean(1);
        let rho = ReferenceMeasure::standard(Point::new(vec![0.0]), 0.0);
        let one = rho_integral(&rho, &CaloricFunction::One, &m, 1e-10).unwrap();
        let double = CaloricFunction::Combination(vec![(2.0, CaloricFunction::One)]);
        let got = rho_integral(&rho, &double, &m, 1e-10).unwrap();
        assert_relative_eq!(got, 2.0 * one, max_relative = 1e-12);
    }

    #[test]
    fn kernel_slice_measure_matches_radial_oracle() {
        // u(z, tau) = k(z, 0, tau): rho(u) reduces to a double radial
        // integral computed here by adaptive quadrature
        let m = ManifoldModel::euclidean(3);
        let k = BaseKernel::exact(m.clone()).unwrap();
        let rho = ReferenceMeasure {
            center: origin3(),
            spatial_radius: 1.0,
            window: (0.0, f64::INFINITY),
            positive_from: 0.5,
            profile: TimeProfile::Window { until: 2.5 },
            scale: 1.0,
        };
        let slice = CaloricFunction::KernelSlice { kernel: &k, source: origin3(), birth: 0.0 };
        let got = rho_integral(&rho, &slice, &m, 1e-10).unwrap();

        let area = 4.0 * std::f64::consts::PI;
        let space = |tau: f64| {
            integrate_adaptive(
                &|r: f64| {
                    let psi = if r <= 1.0 { 1.0 } else { 2.0 - r };
                    psi * crate::kernel::gauss_weierstrass(r, tau, 3) * r * r * area
                },
                0.0,
                2.0,
                1e-12,
            )
        };
        let oracle = integrate_adaptive(&space, 0.5, 2.5, 1e-10);
        assert_relative_eq!(got, oracle, max_relative = 1e-3);
    }

    #[test]
    fn martin_kernel_time_order_and_normalization() {
        let m = ManifoldModel::euclidean(1);
        let k = BaseKernel::exact(m.clone()).unwrap();
        let rho = ReferenceMeasure::standard(Point::new(vec![0.0]), 0.0);
        let y = Point::new(vec![0.3]);
        let x = Point::new(vec![-0.2]);
        // reversed or equal time order vanishes (and so do sources beyond
        // the horizon, tau_n > t)
        assert_eq!(martin_kernel(&k, &rho, (&x, 1.0), (&y, 1.0), 1e-8).unwrap(), 0.0);
        assert_eq!(martin_kernel(&k, &rho, (&x, 1.0), (&y, 7.5), 1e-8).unwrap(), 0.0);

        // by construction, integrating the Martin kernel of a source
        // against the measure returns 1
        let normalizer_slice =
            CaloricFunction::KernelSlice { kernel: &k, source: y.clone(), birth: 0.4 };
        let z = rho_integral(&rho, &normalizer_slice, &m, 1e-10).unwrap();
        let k_martin = martin_kernel(&k, &rho, (&x, 2.0), (&y, 0.4), 1e-10).unwrap();
        assert_relative_eq!(k_martin, k.point_value(&x, &y, 1.6) / z, max_relative = 1e-12);
        struct Scaled<'a>(&'a BaseKernel, Point, f64, f64);
        impl SpaceTimeFn for Scaled<'_> {
            fn eval(&self, x: &Point, t: f64) -> Estimate {
                if t <= self.2 {
                    Estimate::exact(0.0)
                } else {
                    Estimate::exact(self.0.point_value(x, &self.1, t - self.2) / self.3)
                }
            }
        }
        let martin_fn = Scaled(&k, y.clone(), 0.4, z);
        let mass = rho_integral(&rho, &martin_fn, &m, 1e-10).unwrap();
        assert_relative_eq!(mass, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn transforms_with_zero_potential_are_identities() {
        let m = ManifoldModel::euclidean(1);
        let k = BaseKernel::exact(m).unwrap();
        let v = Potential::ball_indicator(Point::new(vec![0.0]), 1.0, 0.0);
        let cfg = TransformConfig { quadrature: QuadratureConfig::bridge(3), origin: 0.0 };
        let x = Point::new(vec![0.4]);
        let t_out = transform_t(&k, &k, &v, &CaloricFunction::One, &x, 1.0, &cfg, &[1]).unwrap();
        assert_relative_eq!(t_out.value, 1.0, epsilon = 1e-12);
        let s_out = transform_s(&k, &v, &CaloricFunction::One, &x, 1.0, &cfg, &[2]).unwrap();
        assert_relative_eq!(s_out.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_is_affine() {
        // T(lambda u1 + (1-lambda) u2) = lambda T(u1) + (1-lambda) T(u2)
        // with shared seeds the identity is exact up to rounding
        let m = ManifoldModel::euclidean(1);
        let k = BaseKernel::exact(m).unwrap();
        let v = Potential::compact_bump(Point::new(vec![0.0]), 1.0, 0.4, 2);
        let slice = CaloricFunction::KernelSlice {
            kernel: &k,
            source: Point::new(vec![0.2]),
            birth: -1.0,
        };
        let lambda = 0.3;
        let combo = CaloricFunction::Combination(vec![
            (lambda, CaloricFunction::One),
            (
                1.0 - lambda,
                CaloricFunction::KernelSlice {
                    kernel: &k,
                    source: Point::new(vec![0.2]),
                    birth: -1.0,
                },
            ),
        ]);
        let mut quad = QuadratureConfig::bridge(5);
        quad.mc_samples = 512;
        let cfg = TransformConfig { quadrature: quad, origin: 0.0 };
        let x = Point::new(vec![0.1]);
        let t = 0.8;
        let t_one = transform_t(&k, &k, &v, &CaloricFunction::One, &x, t, &cfg, &[7]).unwrap();
        let t_slice = transform_t(&k, &k, &v, &slice, &x, t, &cfg, &[7]).unwrap();
        let t_combo = transform_t(&k, &k, &v, &combo, &x, t, &cfg, &[7]).unwrap();
        assert_relative_eq!(
            t_combo.value,
            lambda * t_one.value + (1.0 - lambda) * t_slice.value,
            max_relative = 1e-10
        );
    }

    #[test]
    fn round_trip_on_constants_with_spectral_shift_kernel() {
        // with V = c inside a wide ball and probes kept well inside, the
        // perturbed kernel is the shifted kernel; S(T(1)) must return 1
        let m = ManifoldModel::euclidean(1);
        let k = BaseKernel::exact(m).unwrap();
        let c = 0.4;
        let v = Potential::ball_indicator(Point::new(vec![0.0]), 40.0, c);
        let shifted = k.shifted(c);
        // the outer integral samples the inner transform at every draw, so
        // the nested evaluator gets a reduced budget
        let mut inner_quad = QuadratureConfig::bridge(9);
        inner_quad.mc_samples = 256;
        inner_quad.time_nodes = 6;
        let mut quad = QuadratureConfig::bridge(10);
        quad.mc_samples = 512;
        quad.time_nodes = 8;
        let cfg = TransformConfig { quadrature: quad, origin: 0.0 };
        let tu = TransformedT {
            k_perturbed: &shifted,
            base: &k,
            potential: &v,
            inner: &CaloricFunction::One,
            config: TransformConfig { quadrature: inner_quad, origin: 0.0 },
        };
        let x = Point::new(vec![0.2]);
        let t = 0.7;
        // T(1)(x,t) = 1 + int e^(c s') ... = e^(c t) for the pure shift;
        // probes far from the ball edge see exactly that
        let t_val = tu.eval(&x, t);
        assert_relative_eq!(t_val.value, (c * t).exp(), max_relative = 0.02);
        let back = transform_s(&k, &v, &tu, &x, t, &cfg, &[3]).unwrap();
        let budget = 3.0 * (back.stat_err + back.trunc_err) + 0.02;
        assert!(
            (back.value - 1.0).abs() <= budget,
            "round trip gave {} (budget {budget})",
            back.value
        );
    }
}
