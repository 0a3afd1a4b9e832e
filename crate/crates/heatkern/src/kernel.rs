//! Heat kernels on model manifolds.
//!
//! A [`BaseKernel`] is either an exact closed form (Gauss-Weierstrass on
//! `R^N`, the reflection kernel on a half-space, the explicit shifted kernel
//! on hyperbolic 3-space, products of these) or a two-sided envelope
//! (Aronson, Li-Yau, the hyperbolic N-space comparison expression, or a
//! sub-Gaussian profile). Every kernel carries an additive spectral shift
//! `lambda`: the kernel of `P - lambda` is `e^(lambda t)` times the kernel
//! of `P`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ManifoldModel, Point};
use crate::numerics::{gauss_legendre_on, unit_ball_volume};

/// A numerical kernel value with error attribution.
///
/// `stat_err` is one standard error of the Monte Carlo part (zero for
/// deterministic evaluation). `trunc_err` bounds the systematic part:
/// quadrature truncation for integrals, and half the logarithmic gap
/// between the bounds for envelope kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stat_err: f64,
    pub trunc_err: f64,
    /// Set when an evaluation was short-circuited to zero because the
    /// Gaussian exponent left the representable range.
    pub underflow: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stat_err: 0.0, trunc_err: 0.0, underflow: false }
    }

    pub fn new(value: f64, stat_err: f64, trunc_err: f64) -> Self {
        Estimate { value, stat_err, trunc_err, underflow: false }
    }

    pub fn underflowed() -> Self {
        Estimate { value: 0.0, stat_err: 0.0, trunc_err: 0.0, underflow: true }
    }

    /// Combined error scale used by verdict budgets.
    pub fn combined_error(&self) -> f64 {
        self.stat_err + self.trunc_err
    }
}

/// Anything that evaluates a space-time kernel. Implemented by exact and
/// envelope base kernels, Neumann-series evaluators, and test fixtures.
pub trait SpaceTimeKernel: Sync {
    fn estimate(&self, x: &Point, y: &Point, t: f64) -> Estimate;

    fn value(&self, x: &Point, y: &Point, t: f64) -> f64 {
        self.estimate(x, y, t).value
    }
}

/// Two-sided envelope forms. Each evaluates to a `(lower, upper)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvelopeForm {
    /// `c3 t^(-N/2) exp(-d^2/(c4 t)) <= k <= c1 t^(-N/2) exp(-d^2/(c2 t))`.
    Aronson { c1: f64, c2: f64, c3: f64, c4: f64 },
    /// Gaussian bounds normalized by the volume of the ball of radius
    /// `sqrt(t)`; supported on Euclidean models, where that volume is
    /// `omega_N t^(N/2)`.
    LiYau { c1: f64, c2: f64, c3: f64, c4: f64 },
    /// The two-sided comparison expression for the shifted Laplacian on
    /// hyperbolic N-space, `N > 3`, scaled by `[lower, upper]`.
    HyperbolicComparison { lower: f64, upper: f64 },
    /// Sub-Gaussian profile `t^(-alpha/beta) exp(-c (d^beta/t)^(1/(beta-1)))`
    /// scaled by `[lower, upper]`. Certificate testing only; no sampling.
    SubGaussian { alpha: f64, beta: f64, c: f64, lower: f64, upper: f64 },
}

/// Exact closed form or envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Exactness {
    Exact,
    Envelope(EnvelopeForm),
}

/// A heat kernel on a model manifold, with spectral shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseKernel {
    manifold: ManifoldModel,
    shift: f64,
    exactness: Exactness,
}

/// `x / sinh(x)`, stable near zero.
fn x_over_sinh(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    } else {
        x / x.sinh()
    }
}

/// Gauss-Weierstrass value `(4 pi t)^(-n/2) exp(-d^2 / (4t))`.
pub fn gauss_weierstrass(d: f64, t: f64, n: usize) -> f64 {
    (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0) * (-d * d / (4.0 * t)).exp()
}

impl BaseKernel {
    /// An exact kernel on `manifold`. Fails for manifolds without a closed
    /// form (hyperbolic N-space with `N > 3`, or products containing one).
    pub fn exact(manifold: ManifoldModel) -> Result<Self> {
        manifold.validate()?;
        fn closed_form_exists(m: &ManifoldModel) -> bool {
            match m {
                ManifoldModel::Euclidean { .. }
                | ManifoldModel::HalfSpace { .. }
                | ManifoldModel::Hyperbolic3 => true,
                ManifoldModel::HyperbolicN { .. } => false,
                ManifoldModel::Product(l, r) => closed_form_exists(l) && closed_form_exists(r),
            }
        }
        if !closed_form_exists(&manifold) {
            return Err(Error::Unsupported(
                "no exact closed form on this manifold; construct an envelope".into(),
            ));
        }
        Ok(BaseKernel { manifold, shift: 0.0, exactness: Exactness::Exact })
    }

    /// An envelope kernel on `manifold` with the given two-sided form.
    pub fn envelope(manifold: ManifoldModel, form: EnvelopeForm) -> Result<Self> {
        manifold.validate()?;
        match &form {
            EnvelopeForm::Aronson { c1, c2, c3, c4 } | EnvelopeForm::LiYau { c1, c2, c3, c4 } => {
                if !(*c3 > 0.0 && *c3 <= *c1 && *c4 > 0.0 && *c4 <= *c2) {
                    return Err(Error::Config(
                        "envelope constants must satisfy 0 < c3 <= c1 and 0 < c4 <= c2".into(),
                    ));
                }
                if matches!(form, EnvelopeForm::LiYau { .. })
                    && !matches!(manifold, ManifoldModel::Euclidean { .. })
                {
                    return Err(Error::Unsupported(
                        "ball-volume normalized envelopes are implemented on Euclidean models"
                            .into(),
                    ));
                }
            }
            EnvelopeForm::HyperbolicComparison { lower, upper } => {
                if !matches!(manifold, ManifoldModel::HyperbolicN { .. }) {
                    return Err(Error::Config(
                        "HyperbolicComparison envelope requires a HyperbolicN manifold".into(),
                    ));
                }
                if !(*lower > 0.0 && lower <= upper) {
                    return Err(Error::Config("need 0 < lower <= upper".into()));
                }
            }
            EnvelopeForm::SubGaussian { alpha, beta, c, lower, upper } => {
                if !(*alpha > 0.0 && *beta > 1.0 && *c > 0.0 && *lower > 0.0 && lower <= upper) {
                    return Err(Error::Config(
                        "sub-Gaussian form needs alpha > 0, beta > 1, c > 0, 0 < lower <= upper"
                            .into(),
                    ));
                }
            }
        }
        Ok(BaseKernel { manifold, shift: 0.0, exactness: Exactness::Envelope(form) })
    }

    /// Default hyperbolic N-space envelope with constants `(1, 1)`.
    pub fn hyperbolic_n(dimension: usize) -> Result<Self> {
        BaseKernel::envelope(
            ManifoldModel::HyperbolicN { dimension },
            EnvelopeForm::HyperbolicComparison { lower: 1.0, upper: 1.0 },
        )
    }

    pub fn manifold(&self) -> &ManifoldModel {
        &self.manifold
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.exactness, Exactness::Exact)
    }

    pub fn exactness(&self) -> &Exactness {
        &self.exactness
    }

    /// The kernel of the shifted operator: values multiply by `e^(lambda t)`.
    pub fn shifted(&self, lambda: f64) -> BaseKernel {
        let mut k = self.clone();
        k.shift += lambda;
        k
    }

    fn check_args(&self, x: &Point, y: &Point, t: f64) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
        }
        self.manifold.check_point(x)?;
        self.manifold.check_point(y)
    }

    /// Unshifted exact value on manifolds with a closed form.
    fn exact_unshifted(m: &ManifoldModel, x: &Point, y: &Point, t: f64) -> f64 {
        match m {
            ManifoldModel::Euclidean { dimension } => {
                gauss_weierstrass(x.euclidean_distance(y), t, *dimension)
            }
            ManifoldModel::HalfSpace { dimension } => {
                let mut reflected = y.clone();
                let last = reflected.0.last_mut().unwrap();
                *last = -*last;
                gauss_weierstrass(x.euclidean_distance(y), t, *dimension)
                    - gauss_weierstrass(x.euclidean_distance(&reflected), t, *dimension)
            }
            ManifoldModel::Hyperbolic3 => {
                let d = m.distance(x, y);
                gauss_weierstrass(d, t, 3) * x_over_sinh(d)
            }
            ManifoldModel::Product(l, r) => {
                let (xa, xb) = {
                    let (a, b) = x.0.split_at(l.dimension());
                    (Point(a.to_vec()), Point(b.to_vec()))
                };
                let (ya, yb) = {
                    let (a, b) = y.0.split_at(l.dimension());
                    (Point(a.to_vec()), Point(b.to_vec()))
                };
                Self::exact_unshifted(l, &xa, &ya, t) * Self::exact_unshifted(r, &xb, &yb, t)
            }
            ManifoldModel::HyperbolicN { .. } => unreachable!("validated at construction"),
        }
    }

    /// Envelope bounds `(lower, upper)` before the spectral shift.
    fn envelope_bounds(&self, x: &Point, y: &Point, t: f64) -> (f64, f64) {
        let d = self.manifold.distance(x, y);
        let n = self.manifold.dimension() as f64;
        match &self.exactness {
            Exactness::Envelope(EnvelopeForm::Aronson { c1, c2, c3, c4 }) => (
                c3 * t.powf(-n / 2.0) * (-d * d / (c4 * t)).exp(),
                c1 * t.powf(-n / 2.0) * (-d * d / (c2 * t)).exp(),
            ),
            Exactness::Envelope(EnvelopeForm::LiYau { c1, c2, c3, c4 }) => {
                let vol = unit_ball_volume(self.manifold.dimension()) * t.powf(n / 2.0);
                ((c3 / vol) * (-d * d / (c4 * t)).exp(), (c1 / vol) * (-d * d / (c2 * t)).exp())
            }
            Exactness::Envelope(EnvelopeForm::HyperbolicComparison { lower, upper }) => {
                let profile = (4.0 * std::f64::consts::PI * t).powf(-n / 2.0)
                    * (-((n - 1.0) * d / 2.0 + d * d / (4.0 * t))).exp()
                    * (1.0 + d + t).powf((n - 3.0) / 2.0)
                    * (1.0 + d);
                (lower * profile, upper * profile)
            }
            Exactness::Envelope(EnvelopeForm::SubGaussian { alpha, beta, c, lower, upper }) => {
                let profile =
                    t.powf(-alpha / beta) * (-c * (d.powf(*beta) / t).powf(1.0 / (beta - 1.0))).exp();
                (lower * profile, upper * profile)
            }
            Exactness::Exact => unreachable!(),
        }
    }

    /// Kernel value at `(x, y, t)` as a bare float: the closed form for exact
    /// kernels, the geometric mean of the bounds for envelopes. Positivity
    /// and validity of the arguments are the caller's responsibility; hot
    /// loops use this after a one-time [`BaseKernel::evaluate`]-style check.
    pub fn point_value(&self, x: &Point, y: &Point, t: f64) -> f64 {
        let shift = (self.shift * t).exp();
        match &self.exactness {
            Exactness::Exact => shift * Self::exact_unshifted(&self.manifold, x, y, t),
            Exactness::Envelope(_) => {
                let (lo, hi) = self.envelope_bounds(x, y, t);
                shift * (lo * hi).sqrt()
            }
        }
    }

    /// Evaluates the kernel with full validation and error attribution.
    ///
    /// Exact kernels report zero errors. Envelope kernels report the
    /// geometric mean of the bounds with half the log-gap as truncation
    /// error (a relative error scale, which keeps equivalence ratios
    /// meaningful).
    pub fn evaluate(&self, x: &Point, y: &Point, t: f64) -> Result<Estimate> {
        self.check_args(x, y, t)?;
        match &self.exactness {
            Exactness::Exact => Ok(Estimate::exact(self.point_value(x, y, t))),
            Exactness::Envelope(_) => {
                let (lo, hi) = self.envelope_bounds(x, y, t);
                let shift = (self.shift * t).exp();
                if lo <= 0.0 {
                    return Ok(Estimate::underflowed());
                }
                Ok(Estimate::new(shift * (lo * hi).sqrt(), 0.0, 0.5 * (hi / lo).ln()))
            }
        }
    }

    /// Envelope bounds including the shift; exact kernels return the value
    /// twice.
    pub fn bounds(&self, x: &Point, y: &Point, t: f64) -> Result<(f64, f64)> {
        self.check_args(x, y, t)?;
        let shift = (self.shift * t).exp();
        match &self.exactness {
            Exactness::Exact => {
                let v = self.point_value(x, y, t);
                Ok((v, v))
            }
            Exactness::Envelope(_) => {
                let (lo, hi) = self.envelope_bounds(x, y, t);
                Ok((shift * lo, shift * hi))
            }
        }
    }
}

impl SpaceTimeKernel for BaseKernel {
    fn estimate(&self, x: &Point, y: &Point, t: f64) -> Estimate {
        match &self.exactness {
            Exactness::Exact => Estimate::exact(self.point_value(x, y, t)),
            Exactness::Envelope(_) => {
                let (lo, hi) = self.envelope_bounds(x, y, t);
                if lo <= 0.0 {
                    return Estimate::underflowed();
                }
                let shift = (self.shift * t).exp();
                Estimate::new(shift * (lo * hi).sqrt(), 0.0, 0.5 * (hi / lo).ln())
            }
        }
    }

    fn value(&self, x: &Point, y: &Point, t: f64) -> f64 {
        self.point_value(x, y, t)
    }
}

/// Result of the time integral of a kernel: the Green function value, or a
/// divergence verdict for critical operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GreenValue {
    Finite { value: f64, trunc_err: f64 },
    Divergent,
}

impl GreenValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            GreenValue::Finite { value, .. } => Some(value),
            GreenValue::Divergent => None,
        }
    }
}

/// Integrates `k(x, y, .)` over `(0, infinity)` by decade-wise quadrature
/// with tail extrapolation.
///
/// Divergence is detected from the log-log slope of the integrand over the
/// last two sampled decades: once past the peak, a slope `>= -1` means the
/// tail cannot be integrable and the verdict is `Divergent`. Convergent
/// tails are extrapolated with the fitted power law once a decade
/// contributes less than `tolerance` times the accumulated integral.
pub fn green(kernel: &BaseKernel, x: &Point, y: &Point, tolerance: f64) -> Result<GreenValue> {
    kernel.manifold().check_point(x)?;
    kernel.manifold().check_point(y)?;
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let d = kernel.manifold().distance(x, y);
    if d == 0.0 {
        return Err(Error::InvalidArgument(
            "Green function is singular on the diagonal; pass x != y".into(),
        ));
    }

    let f = |tau: f64| kernel.point_value(x, y, tau);
    // Below tau_start the Gaussian exponent is under -700 and the integrand
    // underflows; its mass there is negligible.
    let tau_start = d * d / 2800.0;
    let tau_peak = (d * d / (2.0 * kernel.manifold().dimension() as f64)).max(tau_start);

    let mut total = 0.0_f64;
    let mut tau_lo = tau_start;
    for decade in 0..80 {
        let tau_hi = tau_lo * 10.0;
        // log substitution: integral of f over [lo, hi] = integral of
        // f(e^u) e^u du
        let (u, w) = gauss_legendre_on(32, tau_lo.ln(), tau_hi.ln());
        let contribution: f64 =
            u.iter().zip(&w).map(|(&ui, &wi)| wi * f(ui.exp()) * ui.exp()).sum();
        total += contribution;

        if tau_hi > 100.0 * tau_peak && decade >= 2 {
            let f_hi = f(tau_hi);
            let f_lo2 = f(tau_hi / 100.0);
            if f_hi <= 0.0 {
                // underflowed tail (e.g. strongly shifted kernels): done
                return Ok(GreenValue::Finite { value: total, trunc_err: 0.0 });
            }
            let slope = (f_hi / f_lo2).ln() / 100.0_f64.ln();
            if slope >= -1.0 - 1e-9 {
                return Ok(GreenValue::Divergent);
            }
            if slope < -1.02 && contribution < tolerance * total {
                // power-law tail: integral of f_hi (tau/tau_hi)^slope
                let tail = f_hi * tau_hi / (-1.0 - slope);
                return Ok(GreenValue::Finite { value: total + tail, trunc_err: tail });
            }
        }
        tau_lo = tau_hi;
    }
    Err(Error::Divergence(
        "time integral undecided after 80 decades; decay exponent too close to -1".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec())
    }

    #[test]
    fn gauss_weierstrass_normalizations() {
        // N = 1, x = y, t = 1/(4 pi) gives exactly 1.
        let k = BaseKernel::exact(ManifoldModel::euclidean(1)).unwrap();
        let x = pt(&[0.3]);
        let t = 1.0 / (4.0 * std::f64::consts::PI);
        assert_relative_eq!(k.evaluate(&x, &x, t).unwrap().value, 1.0, epsilon = 1e-15);

        // N = 3, x = y, t = 1 gives (4 pi)^(-3/2).
        let k3 = BaseKernel::exact(ManifoldModel::euclidean(3)).unwrap();
        let o = pt(&[0.0, 0.0, 0.0]);
        assert_relative_eq!(
            k3.evaluate(&o, &o, 1.0).unwrap().value,
            (4.0 * std::f64::consts::PI).powf(-1.5),
            epsilon = 1e-15
        );
    }

    #[test]
    fn hyperbolic3_short_distance_limit() {
        // d -> 0 recovers the flat on-diagonal prefactor: d / sinh d -> 1.
        let k = BaseKernel::exact(ManifoldModel::Hyperbolic3).unwrap();
        let x = pt(&[0.0, 0.0, 1.0]);
        let y = pt(&[1e-6, 0.0, 1.0]);
        assert_relative_eq!(
            k.evaluate(&x, &y, 1.0).unwrap().value,
            (4.0 * std::f64::consts::PI).powf(-1.5),
            max_relative = 1e-9
        );
    }

    #[test]
    fn symmetry_across_variants() {
        let kernels = [
            BaseKernel::exact(ManifoldModel::euclidean(2)).unwrap(),
            BaseKernel::exact(ManifoldModel::half_space(2)).unwrap(),
            BaseKernel::exact(ManifoldModel::Hyperbolic3).unwrap(),
            BaseKernel::hyperbolic_n(5).unwrap(),
        ];
        let mut rng = crate::rng::stream(11, &[0]);
        for k in &kernels {
            let n = k.manifold().dimension();
            for _ in 0..50 {
                let mk_point = |rng: &mut rand_chacha::ChaCha8Rng| {
                    let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
                    *c.last_mut().unwrap() = rng.random_range(0.2..2.0);
                    Point(c)
                };
                let x = mk_point(&mut rng);
                let y = mk_point(&mut rng);
                let t = rng.random_range(0.05..5.0);
                let a = k.evaluate(&x, &y, t).unwrap().value;
                let b = k.evaluate(&y, &x, t).unwrap().value;
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn shift_identity_at_random_points() {
        let k = BaseKernel::exact(ManifoldModel::euclidean(3)).unwrap();
        let shifted = k.shifted(-0.7);
        let mut rng = crate::rng::stream(5, &[1]);
        for _ in 0..100 {
            let x = pt(&[rng.random_range(-2.0..2.0), 0.0, 0.3]);
            let y = pt(&[0.1, rng.random_range(-2.0..2.0), 0.0]);
            let t: f64 = rng.random_range(0.01..10.0);
            let base = k.evaluate(&x, &y, t).unwrap().value;
            let shift = shifted.evaluate(&x, &y, t).unwrap().value;
            assert_relative_eq!(shift, (-0.7 * t).exp() * base, max_relative = 1e-13);
        }
        // lambda = 0 leaves the kernel untouched
        assert_eq!(k.shifted(0.0), k);
        // lambda = -1, t = 1: ratio e^(-1)
        let o = pt(&[0.0, 0.0, 0.0]);
        let ratio = k.shifted(-1.0).evaluate(&o, &o, 1.0).unwrap().value
            / k.evaluate(&o, &o, 1.0).unwrap().value;
        assert_relative_eq!(ratio, (-1.0_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn half_space_dominated_by_full_space() {
        let h = BaseKernel::exact(ManifoldModel::half_space(2)).unwrap();
        let e = BaseKernel::exact(ManifoldModel::euclidean(2)).unwrap();
        let mut rng = crate::rng::stream(3, &[2]);
        for _ in 0..100 {
            let x = pt(&[rng.random_range(-1.0..1.0), rng.random_range(0.05..2.0)]);
            let y = pt(&[rng.random_range(-1.0..1.0), rng.random_range(0.05..2.0)]);
            let t = rng.random_range(0.05..5.0);
            let kh = h.evaluate(&x, &y, t).unwrap().value;
            let ke = e.evaluate(&x, &y, t).unwrap().value;
            assert!(kh <= ke + 1e-300);
            assert!(kh > 0.0);
        }
    }

    #[test]
    fn cauchy_schwarz_bound() {
        let kernels = [
            BaseKernel::exact(ManifoldModel::euclidean(3)).unwrap(),
            BaseKernel::exact(ManifoldModel::Hyperbolic3).unwrap(),
            BaseKernel::exact(ManifoldModel::half_space(1)).unwrap(),
        ];
        let mut rng = crate::rng::stream(9, &[3]);
        for k in &kernels {
            let n = k.manifold().dimension();
            for _ in 0..60 {
                let mk_point = |rng: &mut rand_chacha::ChaCha8Rng| {
                    let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    *c.last_mut().unwrap() = rng.random_range(0.3..1.5);
                    Point(c)
                };
                let x = mk_point(&mut rng);
                let y = mk_point(&mut rng);
                let t = rng.random_range(0.1..4.0);
                let kxy = k.point_value(&x, &y, t);
                let kxx = k.point_value(&x, &x, t);
                let kyy = k.point_value(&y, &y, t);
                assert!(kxy <= (kxx * kyy).sqrt() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn on_diagonal_decreasing_and_log_convex() {
        let kernels = [
            BaseKernel::exact(ManifoldModel::euclidean(2)).unwrap(),
            BaseKernel::exact(ManifoldModel::half_space(2)).unwrap(),
            BaseKernel::exact(ManifoldModel::Hyperbolic3).unwrap(),
        ];
        for k in &kernels {
            let n = k.manifold().dimension();
            let mut c = vec![0.2; n];
            *c.last_mut().unwrap() = 0.7;
            let x = Point(c);
            let ts: Vec<f64> = (0..40).map(|i| 0.01 * 1.3_f64.powi(i)).collect();
            let logs: Vec<f64> = ts.iter().map(|&t| k.point_value(&x, &x, t).ln()).collect();
            for w in logs.windows(2) {
                assert!(w[1] < w[0], "on-diagonal kernel must decrease in t");
            }
            // log-convexity: at the arithmetic midpoint, log k lies under
            // the chord
            for i in 1..ts.len() - 1 {
                let mid = k.point_value(&x, &x, 0.5 * (ts[i - 1] + ts[i + 1])).ln();
                let chord = logs[i - 1]
                    + (logs[i + 1] - logs[i - 1]) * (0.5 * (ts[i - 1] + ts[i + 1]) - ts[i - 1])
                        / (ts[i + 1] - ts[i - 1]);
                assert!(mid <= chord + 1e-10);
            }
        }
    }

    #[test]
    fn product_kernel_multiplies_factors() {
        let m = ManifoldModel::product(ManifoldModel::euclidean(1), ManifoldModel::Hyperbolic3);
        let k = BaseKernel::exact(m).unwrap();
        let k1 = BaseKernel::exact(ManifoldModel::euclidean(1)).unwrap();
        let k2 = BaseKernel::exact(ManifoldModel::Hyperbolic3).unwrap();
        let x = pt(&[0.4, 0.0, 0.0, 1.0]);
        let y = pt(&[-0.2, 0.3, 0.0, 2.0]);
        let expect = k1.point_value(&pt(&[0.4]), &pt(&[-0.2]), 0.8)
            * k2.point_value(&pt(&[0.0, 0.0, 1.0]), &pt(&[0.3, 0.0, 2.0]), 0.8);
        assert_relative_eq!(k.evaluate(&x, &y, 0.8).unwrap().value, expect, epsilon = 1e-15);
    }

    #[test]
    fn envelope_geometric_mean_and_gap() {
        let k = BaseKernel::envelope(
            ManifoldModel::euclidean(3),
            EnvelopeForm::Aronson { c1: 2.0, c2: 5.0, c3: 0.5, c4: 4.0 },
        )
        .unwrap();
        let x = pt(&[0.0, 0.0, 0.0]);
        let y = pt(&[1.0, 0.0, 0.0]);
        let (lo, hi) = k.bounds(&x, &y, 1.0).unwrap();
        assert!(lo <= hi);
        let est = k.evaluate(&x, &y, 1.0).unwrap();
        assert_relative_eq!(est.value, (lo * hi).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(est.trunc_err, 0.5 * (hi / lo).ln(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let k = BaseKernel::exact(ManifoldModel::half_space(2)).unwrap();
        let inside = pt(&[0.0, 1.0]);
        let outside = pt(&[0.0, -1.0]);
        assert!(k.evaluate(&inside, &outside, 1.0).is_err());
        assert!(k.evaluate(&inside, &inside, 0.0).is_err());
        assert!(k.evaluate(&inside, &inside, -1.0).is_err());
        assert!(BaseKernel::exact(ManifoldModel::HyperbolicN { dimension: 5 }).is_err());
    }

    #[test]
    fn green_function_newtonian_oracle() {
        // R^3: G(x, y) = 1 / (4 pi |x - y|)
        let k = BaseKernel::exact(ManifoldModel::euclidean(3)).unwrap();
        let o = pt(&[0.0, 0.0, 0.0]);
        for r in [0.5, 1.0, 2.0] {
            let y = pt(&[r, 0.0, 0.0]);
            let g = green(&k, &o, &y, 1e-8).unwrap().finite().unwrap();
            assert_relative_eq!(g, 1.0 / (4.0 * std::f64::consts::PI * r), max_relative = 1e-5);
        }
        // scaling: G at distance 2 equals half of G at distance 1
        let g1 = green(&k, &o, &pt(&[1.0, 0.0, 0.0]), 1e-8).unwrap().finite().unwrap();
        let g2 = green(&k, &o, &pt(&[2.0, 0.0, 0.0]), 1e-8).unwrap().finite().unwrap();
        assert_relative_eq!(g2, g1 / 2.0, max_relative = 1e-5);
    }

    #[test]
    fn green_function_critical_r2() {
        let k = BaseKernel::exact(ManifoldModel::euclidean(2)).unwrap();
        let x = pt(&[0.0, 0.0]);
        let y = pt(&[1.0, 0.0]);
        assert_eq!(green(&k, &x, &y, 1e-8).unwrap(), GreenValue::Divergent);
        assert!(green(&k, &x, &x, 1e-8).is_err());
    }

    #[test]
    fn shifted_r2_green_becomes_finite() {
        // e^(lambda t) / (4 pi t) is integrable for lambda < 0.
        let k = BaseKernel::exact(ManifoldModel::euclidean(2)).unwrap().shifted(-1.0);
        let x = pt(&[0.0, 0.0]);
        let y = pt(&[1.0, 0.0]);
        let g = green(&k, &x, &y, 1e-8).unwrap();
        let v = g.finite().expect("shifted kernel must be subcritical");
        assert!(v.is_finite() && v > 0.0);
    }
}
