//! Perturbation potentials, their L^p norms, and exhaustion cutoffs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::numerics::{integrate_adaptive, unit_ball_volume, unit_sphere_area};

/// A finite or divergent L^p norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Norm {
    Finite(f64),
    Divergent,
}

impl Norm {
    pub fn finite(self) -> Option<f64> {
        match self {
            Norm::Finite(v) => Some(v),
            Norm::Divergent => None,
        }
    }
}

/// A regular lattice of sampled values with multilinear interpolation.
/// Points outside the lattice are an error, not zero, so support statements
/// stay honest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPotential {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    /// Row-major: the last axis varies fastest.
    pub values: Vec<f64>,
}

impl GridPotential {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let dim = origin.len();
        if spacing.len() != dim || shape.len() != dim {
            return Err(Error::Config("grid origin/spacing/shape dimensions differ".into()));
        }
        if shape.iter().any(|&s| s < 2) || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("grid needs >= 2 nodes and positive spacing per axis".into()));
        }
        if values.len() != shape.iter().product::<usize>() {
            return Err(Error::Config(format!(
                "grid expects {} values, got {}",
                shape.iter().product::<usize>(),
                values.len()
            )));
        }
        Ok(GridPotential { origin, spacing, shape, values })
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (i, &ix) in idx.iter().enumerate() {
            flat = flat * self.shape[i] + ix;
        }
        flat
    }

    pub fn interpolate(&self, z: &Point) -> Result<f64> {
        let dim = self.origin.len();
        if z.dim() != dim {
            return Err(Error::InvalidArgument("grid/point dimension mismatch".into()));
        }
        let mut cell = Vec::with_capacity(dim);
        let mut frac = Vec::with_capacity(dim);
        for i in 0..dim {
            let u = (z.0[i] - self.origin[i]) / self.spacing[i];
            if u < -1e-12 || u > (self.shape[i] - 1) as f64 + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "point outside the sampled grid on axis {i}"
                )));
            }
            let u = u.clamp(0.0, (self.shape[i] - 1) as f64);
            let c = (u.floor() as usize).min(self.shape[i] - 2);
            cell.push(c);
            frac.push(u - c as f64);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut idx = Vec::with_capacity(dim);
            for i in 0..dim {
                if corner >> i & 1 == 1 {
                    weight *= frac[i];
                    idx.push(cell[i] + 1);
                } else {
                    weight *= 1.0 - frac[i];
                    idx.push(cell[i]);
                }
            }
            acc += weight * self.values[self.flat_index(&idx)];
        }
        Ok(acc)
    }
}

/// A real-valued perturbation potential. All closed-form variants are radial
/// around an explicit center (the power law is centered at the origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    /// `amplitude * (1 - (rho/radius)^2)^smoothness` inside the ball, zero
    /// outside.
    CompactBump { center: Point, radius: f64, amplitude: f64, smoothness: u32 },
    /// `amplitude` on the closed ball, zero outside.
    BallIndicator { center: Point, radius: f64, amplitude: f64 },
    /// `amplitude * max(|z|, inner_cutoff)^(-exponent)`; with zero cutoff the
    /// origin is a genuine singularity. `dimension` is the ambient dimension
    /// used by norm computations.
    RadialPowerLaw { exponent: f64, inner_cutoff: f64, amplitude: f64, dimension: usize },
    Constant { amplitude: f64 },
    GridSampled(GridPotential),
    /// `base` multiplied by a radial ramp around `center`: weight 1 inside
    /// `full_radius`, 0 outside `zero_radius`, linear in between. With
    /// `complement` the weight is flipped (`1 - ramp`), keeping the outside.
    Windowed {
        base: Box<Potential>,
        center: Point,
        full_radius: f64,
        zero_radius: f64,
        complement: bool,
    },
}

/// Ball-shaped exhaustion `M_n = B(center, R_n)` with strictly increasing
/// radii. The complements `M_n* = M \ closure(M_n)` host the tail
/// functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionSpec {
    pub center: Point,
    pub radii: Vec<f64>,
}

impl ExhaustionSpec {
    pub fn new(center: Point, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Config("exhaustion needs at least one radius".into()));
        }
        if !radii.windows(2).all(|w| w[0] < w[1]) || radii[0] <= 0.0 {
            return Err(Error::Config("exhaustion radii must be positive and strictly increasing".into()));
        }
        Ok(ExhaustionSpec { center, radii })
    }

    /// Radius of `M_n` (1-based `n`); past the listed radii the last gap is
    /// continued geometrically.
    pub fn radius(&self, n: usize) -> f64 {
        assert!(n >= 1, "exhaustion index is 1-based");
        if n <= self.radii.len() {
            return self.radii[n - 1];
        }
        let last = *self.radii.last().unwrap();
        let ratio = if self.radii.len() >= 2 {
            last / self.radii[self.radii.len() - 2]
        } else {
            2.0
        };
        last * ratio.powi((n - self.radii.len()) as i32)
    }
}

impl Potential {
    pub fn compact_bump(center: Point, radius: f64, amplitude: f64, smoothness: u32) -> Self {
        Potential::CompactBump { center, radius, amplitude, smoothness }
    }

    pub fn ball_indicator(center: Point, radius: f64, amplitude: f64) -> Self {
        Potential::BallIndicator { center, radius, amplitude }
    }

    pub fn radial_power_law(exponent: f64, inner_cutoff: f64, amplitude: f64, dimension: usize) -> Self {
        Potential::RadialPowerLaw { exponent, inner_cutoff, amplitude, dimension }
    }

    pub fn constant(amplitude: f64) -> Self {
        Potential::Constant { amplitude }
    }

    /// Pointwise value at `z`.
    pub fn evaluate(&self, z: &Point) -> Result<f64> {
        match self {
            Potential::CompactBump { center, radius, amplitude, smoothness } => {
                let rho = z.euclidean_distance(center);
                if rho >= *radius {
                    Ok(0.0)
                } else {
                    let u = 1.0 - (rho / radius) * (rho / radius);
                    Ok(amplitude * u.powi(*smoothness as i32))
                }
            }
            Potential::BallIndicator { center, radius, amplitude } => {
                Ok(if z.euclidean_distance(center) <= *radius { *amplitude } else { 0.0 })
            }
            Potential::RadialPowerLaw { exponent, inner_cutoff, amplitude, .. } => {
                let rho = z.0.iter().map(|c| c * c).sum::<f64>().sqrt().max(*inner_cutoff);
                if rho == 0.0 {
                    return Ok(f64::INFINITY.copysign(*amplitude));
                }
                Ok(amplitude * rho.powf(-exponent))
            }
            Potential::Constant { amplitude } => Ok(*amplitude),
            Potential::GridSampled(grid) => grid.interpolate(z),
            Potential::Windowed { base, center, full_radius, zero_radius, complement } => {
                let w = window_weight(z.euclidean_distance(center), *full_radius, *zero_radius);
                let w = if *complement { 1.0 - w } else { w };
                if w == 0.0 {
                    return Ok(0.0);
                }
                Ok(w * base.evaluate(z)?)
            }
        }
    }

    /// A bound on `sup |V|`, when one is available in closed form.
    pub fn sup_abs(&self) -> Option<f64> {
        match self {
            Potential::CompactBump { amplitude, .. }
            | Potential::BallIndicator { amplitude, .. }
            | Potential::Constant { amplitude } => Some(amplitude.abs()),
            Potential::RadialPowerLaw { exponent, inner_cutoff, amplitude, .. } => {
                if *inner_cutoff > 0.0 {
                    Some(amplitude.abs() * inner_cutoff.powf(-exponent))
                } else {
                    None
                }
            }
            Potential::GridSampled(g) => {
                g.values.iter().fold(Some(0.0_f64), |acc, v| acc.map(|a| a.max(v.abs())))
            }
            Potential::Windowed { base, .. } => base.sup_abs(),
        }
    }

    /// Center and radius of a ball containing the support, when the support
    /// is bounded.
    pub fn support_ball(&self) -> Option<(Point, f64)> {
        match self {
            Potential::CompactBump { center, radius, .. }
            | Potential::BallIndicator { center, radius, .. } => Some((center.clone(), *radius)),
            Potential::RadialPowerLaw { .. } | Potential::Constant { .. } => None,
            Potential::GridSampled(g) => {
                let center: Vec<f64> = g
                    .origin
                    .iter()
                    .zip(&g.spacing)
                    .zip(&g.shape)
                    .map(|((o, h), s)| o + 0.5 * h * (*s as f64 - 1.0))
                    .collect();
                let radius = g
                    .spacing
                    .iter()
                    .zip(&g.shape)
                    .map(|(h, s)| 0.5 * h * (*s as f64 - 1.0))
                    .map(|r| r * r)
                    .sum::<f64>()
                    .sqrt();
                Some((Point(center), radius))
            }
            Potential::Windowed { base, center, zero_radius, complement, .. } => {
                if *complement {
                    base.support_ball()
                } else {
                    match base.support_ball() {
                        // the window can only shrink the support, but bounding
                        // the intersection by the window ball is always valid
                        Some((bc, br)) => {
                            if bc.euclidean_distance(center) + br <= *zero_radius {
                                Some((bc, br))
                            } else {
                                Some((center.clone(), *zero_radius))
                            }
                        }
                        None => Some((center.clone(), *zero_radius)),
                    }
                }
            }
        }
    }

    /// Whether the potential is nonnegative everywhere (by construction).
    pub fn is_nonnegative(&self) -> bool {
        match self {
            Potential::CompactBump { amplitude, .. }
            | Potential::BallIndicator { amplitude, .. }
            | Potential::RadialPowerLaw { amplitude, .. }
            | Potential::Constant { amplitude } => *amplitude >= 0.0,
            Potential::GridSampled(g) => g.values.iter().all(|&v| v >= 0.0),
            Potential::Windowed { base, .. } => base.is_nonnegative(),
        }
    }

    /// Radial profile `|V|` as a function of the distance to `center`, when
    /// the potential is radial around that point.
    fn radial_profile(&self, center: &Point) -> Option<Box<dyn Fn(f64) -> f64 + '_>> {
        match self {
            Potential::CompactBump { center: c, radius, amplitude, smoothness } => {
                if c != center {
                    return None;
                }
                let (radius, amplitude, m) = (*radius, amplitude.abs(), *smoothness as i32);
                Some(Box::new(move |rho| {
                    if rho >= radius {
                        0.0
                    } else {
                        amplitude * (1.0 - (rho / radius) * (rho / radius)).powi(m)
                    }
                }))
            }
            Potential::BallIndicator { center: c, radius, amplitude } => {
                if c != center {
                    return None;
                }
                let (radius, amplitude) = (*radius, amplitude.abs());
                Some(Box::new(move |rho| if rho <= radius { amplitude } else { 0.0 }))
            }
            Potential::RadialPowerLaw { exponent, inner_cutoff, amplitude, .. } => {
                if center.0.iter().any(|&c| c != 0.0) {
                    return None;
                }
                let (a, r0, amp) = (*exponent, *inner_cutoff, amplitude.abs());
                Some(Box::new(move |rho| amp * rho.max(r0).powf(-a)))
            }
            Potential::Constant { amplitude } => {
                let amp = amplitude.abs();
                Some(Box::new(move |_| amp))
            }
            Potential::GridSampled(_) => None,
            Potential::Windowed { base, center: c, full_radius, zero_radius, complement } => {
                if c != center {
                    return None;
                }
                let inner = base.radial_profile(center)?;
                let (rf, rz, comp) = (*full_radius, *zero_radius, *complement);
                Some(Box::new(move |rho| {
                    let w = window_weight(rho, rf, rz);
                    let w = if comp { 1.0 - w } else { w };
                    w * inner(rho)
                }))
            }
        }
    }

    /// L^p norm of the potential over `region` (a ball), or over its full
    /// ambient space when `region` is `None`.
    ///
    /// Radial variants reduce to one-dimensional integrals solved to near
    /// machine accuracy; divergent tails and non-integrable singularities
    /// return [`Norm::Divergent`]. Grids integrate their sampled cells.
    pub fn lp_norm(&self, p: f64, region: Option<(&Point, f64)>) -> Result<Norm> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument("need p >= 1".into()));
        }
        match self {
            Potential::Constant { amplitude } => match region {
                None => Ok(Norm::Divergent),
                Some((center, radius)) => {
                    let n = center.dim();
                    let vol = unit_ball_volume(n) * radius.powi(n as i32);
                    Ok(Norm::Finite(amplitude.abs() * vol.powf(1.0 / p)))
                }
            },
            Potential::RadialPowerLaw { exponent, inner_cutoff, amplitude, dimension } => {
                radial_power_norm(*exponent, *inner_cutoff, amplitude.abs(), *dimension, p, region)
            }
            Potential::GridSampled(g) => {
                // midpoint-cell quadrature of |V|^p over the grid box,
                // intersected with the region if one is given
                let dim = g.origin.len();
                let cell_vol: f64 = g.spacing.iter().product();
                let mut acc = 0.0;
                let cells: usize = g.shape.iter().map(|s| s - 1).product();
                let mut idx = vec![0usize; dim];
                for _ in 0..cells {
                    let z: Vec<f64> = (0..dim)
                        .map(|i| g.origin[i] + (idx[i] as f64 + 0.5) * g.spacing[i])
                        .collect();
                    let zp = Point(z);
                    let keep = match region {
                        Some((c, r)) => zp.euclidean_distance(c) <= r,
                        None => true,
                    };
                    if keep {
                        acc += g.interpolate(&zp)?.abs().powf(p) * cell_vol;
                    }
                    for i in (0..dim).rev() {
                        idx[i] += 1;
                        if idx[i] < g.shape[i] - 1 {
                            break;
                        }
                        idx[i] = 0;
                    }
                }
                Ok(Norm::Finite(acc.powf(1.0 / p)))
            }
            _ => {
                // radial reduction around the potential's own center
                let center = match self {
                    Potential::CompactBump { center, .. }
                    | Potential::BallIndicator { center, .. } => center.clone(),
                    Potential::Windowed { center, .. } => center.clone(),
                    _ => unreachable!(),
                };
                if let Some((rc, _)) = region {
                    if rc != &center {
                        return Err(Error::Unsupported(
                            "norm regions must be concentric with the potential".into(),
                        ));
                    }
                }
                let profile = self.radial_profile(&center).ok_or_else(|| {
                    Error::Unsupported("no radial reduction for this potential".into())
                })?;
                // windowed complements of unbounded bases keep an unbounded
                // support: decide finiteness from the base tail
                let outer = match (self.support_ball(), region) {
                    (_, Some((_, r))) => r,
                    (Some((_, r)), None) => r,
                    (None, None) => {
                        return outer_tail_norm(&*profile, p, &center);
                    }
                };
                let n = center.dim();
                let area = unit_sphere_area(n);
                let integrand =
                    |rho: f64| profile(rho).powf(p) * rho.powi(n as i32 - 1) * area;
                let total = integrate_adaptive(&integrand, 0.0, outer, 1e-12);
                Ok(Norm::Finite(total.powf(1.0 / p)))
            }
        }
    }

    /// Splits `V` along the exhaustion: `V_n = Phi_n V` lives on the ball of
    /// radius `R_(n+1)` and `W_n = V - V_n` on the complement of the ball of
    /// radius `R_n`, with `Phi_n` the radial ramp that is 1 on `M_n` and 0
    /// outside `M_(n+1)`. By construction `V_n + W_n = V` pointwise.
    pub fn truncate(&self, exhaustion: &ExhaustionSpec, n: usize) -> Result<(Potential, Potential)> {
        if n < 1 {
            return Err(Error::InvalidArgument("exhaustion index is 1-based".into()));
        }
        let r_in = exhaustion.radius(n);
        let r_out = exhaustion.radius(n + 1);
        let inner = Potential::Windowed {
            base: Box::new(self.clone()),
            center: exhaustion.center.clone(),
            full_radius: r_in,
            zero_radius: r_out,
            complement: false,
        };
        let outer = Potential::Windowed {
            base: Box::new(self.clone()),
            center: exhaustion.center.clone(),
            full_radius: r_in,
            zero_radius: r_out,
            complement: true,
        };
        Ok((inner, outer))
    }

    /// `V` restricted (sharply) to the complement of the ball `B(center, R_n)`.
    pub fn restrict_outside(&self, exhaustion: &ExhaustionSpec, n: usize) -> Result<Potential> {
        if n < 1 {
            return Err(Error::InvalidArgument("exhaustion index is 1-based".into()));
        }
        let r = exhaustion.radius(n);
        Ok(Potential::Windowed {
            base: Box::new(self.clone()),
            center: exhaustion.center.clone(),
            full_radius: r,
            zero_radius: r,
            complement: true,
        })
    }
}

fn window_weight(rho: f64, full: f64, zero: f64) -> f64 {
    if rho <= full {
        1.0
    } else if rho >= zero {
        0.0
    } else {
        (zero - rho) / (zero - full)
    }
}

/// Closed-form L^p norm of the capped power law `amp * max(rho, r0)^(-a)`
/// in `R^n`, over the origin-centered ball of the region radius or over the
/// whole space.
fn radial_power_norm(
    a: f64,
    r0: f64,
    amp: f64,
    n: usize,
    p: f64,
    region: Option<(&Point, f64)>,
) -> Result<Norm> {
    let nf = n as f64;
    let area = unit_sphere_area(n);
    let outer = match region {
        Some((c, r)) => {
            if c.0.iter().any(|&v| v != 0.0) {
                return Err(Error::Unsupported(
                    "power-law norm regions must be centered at the origin".into(),
                ));
            }
            Some(r)
        }
        None => None,
    };

    // capped core over [0, min(r0, outer)]
    let mut acc = 0.0;
    if r0 > 0.0 {
        let top = outer.map_or(r0, |r| r.min(r0));
        acc += (amp * r0.powf(-a)).powf(p) * unit_ball_volume(n) * top.powf(nf);
        if outer.is_some_and(|r| r <= r0) {
            return Ok(Norm::Finite(acc.powf(1.0 / p)));
        }
    }

    // power tail over [r0, outer): the integrand is
    // area * amp^p * rho^(n - 1 - a p), with antiderivative exponent `expo`
    let expo = nf - a * p;
    match outer {
        Some(r) => {
            if r0 == 0.0 && expo <= 0.0 {
                // non-integrable singularity at the origin
                return Ok(Norm::Divergent);
            }
            let piece = if expo.abs() < 1e-12 {
                (r / r0).ln()
            } else if r0 == 0.0 {
                r.powf(expo) / expo
            } else {
                (r.powf(expo) - r0.powf(expo)) / expo
            };
            acc += area * amp.powf(p) * piece;
            Ok(Norm::Finite(acc.powf(1.0 / p)))
        }
        None => {
            // full space: need both an integrable origin (cutoff) and a
            // decaying tail
            if r0 == 0.0 || expo >= 0.0 {
                return Ok(Norm::Divergent);
            }
            acc += area * amp.powf(p) * (-r0.powf(expo) / expo);
            Ok(Norm::Finite(acc.powf(1.0 / p)))
        }
    }
}

/// Full-space norm of a radial profile with unbounded support, integrated
/// decade by decade. Non-shrinking decade contributions flag divergence.
fn outer_tail_norm(profile: &dyn Fn(f64) -> f64, p: f64, center: &Point) -> Result<Norm> {
    let n = center.dim();
    let area = unit_sphere_area(n);
    let integrand = |rho: f64| profile(rho).powf(p) * rho.powi(n as i32 - 1) * area;
    let mut total = 0.0;
    let mut prev_piece = f64::INFINITY;
    let mut lo = 0.0;
    let mut hi = 1.0;
    for decade in 0..60 {
        let piece = integrate_adaptive(&integrand, lo, hi, 1e-12);
        total += piece;
        if decade >= 3 && piece >= prev_piece && piece > 0.0 {
            return Ok(Norm::Divergent);
        }
        if total > 0.0 && piece < 1e-14 * total {
            return Ok(Norm::Finite(total.powf(1.0 / p)));
        }
        prev_piece = piece;
        lo = hi;
        hi *= 10.0;
    }
    Ok(Norm::Divergent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn origin(n: usize) -> Point {
        Point::new(vec![0.0; n])
    }

    #[test]
    fn pointwise_values() {
        let ball = Potential::ball_indicator(origin(3), 1.0, 5.0);
        assert_eq!(ball.evaluate(&Point::new(vec![0.5, 0.0, 0.0])).unwrap(), 5.0);
        assert_eq!(ball.evaluate(&Point::new(vec![2.0, 0.0, 0.0])).unwrap(), 0.0);

        let bump = Potential::compact_bump(origin(2), 1.5, 3.0, 2);
        assert_eq!(bump.evaluate(&origin(2)).unwrap(), 3.0);
        assert_eq!(bump.evaluate(&Point::new(vec![1.5, 0.0])).unwrap(), 0.0);

        let power = Potential::radial_power_law(1.3, 0.0, 2.0, 3);
        assert_relative_eq!(
            power.evaluate(&Point::new(vec![2.0, 0.0, 0.0])).unwrap(),
            2.0 * 2.0_f64.powf(-1.3)
        );
    }

    #[test]
    fn ball_indicator_l2_norm_closed_form() {
        let c = 1.7;
        let ball = Potential::ball_indicator(origin(3), 1.0, c);
        let norm = ball.lp_norm(2.0, None).unwrap().finite().unwrap();
        let vol = 4.0 / 3.0 * std::f64::consts::PI;
        assert_relative_eq!(norm, c * vol.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn constant_norm_divergent_on_unbounded_space() {
        let v = Potential::constant(2.0);
        assert_eq!(v.lp_norm(2.0, None).unwrap(), Norm::Divergent);
        let on_ball = v.lp_norm(1.0, Some((&origin(2), 2.0))).unwrap().finite().unwrap();
        assert_relative_eq!(on_ball, 2.0 * std::f64::consts::PI * 4.0, max_relative = 1e-12);
    }

    #[test]
    fn power_law_norm_matches_quadrature() {
        // capped law in R^3, full-space L^2 norm vs radial quadrature
        let v = Potential::radial_power_law(2.5, 0.5, 1.3, 3);
        let norm = v.lp_norm(2.0, None).unwrap().finite().unwrap();
        let area = unit_sphere_area(3);
        let integrand = |rho: f64| {
            let val = 1.3 * rho.max(0.5).powf(-2.5);
            val * val * rho * rho * area
        };
        let mut quad = integrate_adaptive(&integrand, 0.0, 10.0, 1e-13);
        quad += integrate_adaptive(&integrand, 10.0, 1e4, 1e-13);
        quad += integrate_adaptive(&integrand, 1e4, 1e6, 1e-13);
        assert_relative_eq!(norm, quad.sqrt(), max_relative = 1e-4);

        // divergent cases: fat tail, and non-integrable singularity on a ball
        assert_eq!(
            Potential::radial_power_law(1.0, 0.5, 1.0, 3).lp_norm(2.0, None).unwrap(),
            Norm::Divergent
        );
        assert_eq!(
            Potential::radial_power_law(2.0, 0.0, 1.0, 3)
                .lp_norm(2.0, Some((&origin(3), 1.0)))
                .unwrap(),
            Norm::Divergent
        );
        // integrable singularity on a ball is fine
        let singular = Potential::radial_power_law(1.2, 0.0, 1.0, 3)
            .lp_norm(2.0, Some((&origin(3), 1.0)))
            .unwrap()
            .finite()
            .unwrap();
        assert_relative_eq!(
            singular * singular,
            unit_sphere_area(3) / (3.0 - 2.4),
            max_relative = 1e-10
        );
    }

    #[test]
    fn truncation_partitions_the_potential() {
        let v = Potential::radial_power_law(2.0, 0.3, 1.0, 3);
        let ex = ExhaustionSpec::new(origin(3), vec![1.0, 2.0, 4.0, 8.0]).unwrap();
        let (vn, wn) = v.truncate(&ex, 2).unwrap();
        let mut rng = crate::rng::stream(21, &[0]);
        for _ in 0..1000 {
            let z = Point::new(vec![
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
            ]);
            let whole = v.evaluate(&z).unwrap();
            let split = vn.evaluate(&z).unwrap() + wn.evaluate(&z).unwrap();
            assert_relative_eq!(split, whole, max_relative = 1e-12, epsilon = 1e-300);
        }
        // V_n vanishes outside the next ball, W_n vanishes on the inner ball
        assert_eq!(vn.evaluate(&Point::new(vec![4.1, 0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(wn.evaluate(&Point::new(vec![1.9, 0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn truncation_beyond_compact_support_leaves_nothing_outside() {
        let v = Potential::compact_bump(origin(2), 1.0, 4.0, 1);
        let ex = ExhaustionSpec::new(origin(2), vec![2.0, 3.0]).unwrap();
        let (_, wn) = v.truncate(&ex, 1).unwrap();
        let mut rng = crate::rng::stream(22, &[0]);
        for _ in 0..200 {
            let z = Point::new(vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
            assert_eq!(wn.evaluate(&z).unwrap(), 0.0);
        }
    }

    #[test]
    fn tail_norms_decrease_along_the_exhaustion() {
        // fast-decaying radial potential: the outside remainder loses mass
        // at every step
        let v = Potential::radial_power_law(3.5, 0.5, 1.0, 3);
        let ex = ExhaustionSpec::new(origin(3), vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]).unwrap();
        let mut prev = f64::INFINITY;
        for n in 1..=5 {
            let (_, wn) = v.truncate(&ex, n).unwrap();
            let norm = wn.lp_norm(2.0, None).unwrap().finite().unwrap();
            assert!(norm < prev, "tail norm must strictly decrease, n = {n}");
            prev = norm;
        }
    }

    #[test]
    fn grid_interpolation_and_domain() {
        // f(x, y) = x + 2y sampled on [0,1]^2 reproduces exactly under
        // multilinear interpolation
        let g = GridPotential::new(
            vec![0.0, 0.0],
            vec![0.5, 0.5],
            vec![3, 3],
            (0..3)
                .flat_map(|i| (0..3).map(move |j| 0.5 * i as f64 + 2.0 * 0.5 * j as f64))
                .collect(),
        )
        .unwrap();
        let v = Potential::GridSampled(g);
        assert_relative_eq!(
            v.evaluate(&Point::new(vec![0.25, 0.75])).unwrap(),
            0.25 + 1.5,
            epsilon = 1e-12
        );
        assert!(v.evaluate(&Point::new(vec![1.25, 0.0])).is_err());
    }

    #[test]
    fn exhaustion_validation() {
        assert!(ExhaustionSpec::new(origin(1), vec![]).is_err());
        assert!(ExhaustionSpec::new(origin(1), vec![2.0, 2.0]).is_err());
        assert!(ExhaustionSpec::new(origin(1), vec![-1.0, 2.0]).is_err());
        let ex = ExhaustionSpec::new(origin(1), vec![1.0, 2.0]).unwrap();
        assert_relative_eq!(ex.radius(4), 8.0); // geometric continuation
    }
}
