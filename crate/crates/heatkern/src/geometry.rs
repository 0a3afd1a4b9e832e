//! Model manifolds and points.
//!
//! Each manifold variant carries a distance function and a point-validity
//! predicate. These are the only geometric inputs the kernel formulas need:
//! the flat models use the Euclidean distance, the hyperbolic models use the
//! upper half-space model, and products combine factors orthogonally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point, stored as a coordinate vector sized to the manifold dimension.
/// Points on product manifolds concatenate the factor coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Point(coords.into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Euclidean distance between the raw coordinate vectors.
    pub fn euclidean_distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// Supported model manifolds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ManifoldModel {
    /// Flat `R^N`, `N >= 1`.
    Euclidean { dimension: usize },
    /// Upper half-space `{x in R^N : x_N > 0}` with the flat metric and
    /// Dirichlet (absorbing) boundary.
    HalfSpace { dimension: usize },
    /// Hyperbolic 3-space, upper half-space model `{x in R^3 : x_3 > 0}`.
    Hyperbolic3,
    /// Hyperbolic N-space for `N > 3`, upper half-space model.
    HyperbolicN { dimension: usize },
    /// Riemannian product; points concatenate factor coordinates and the
    /// squared distances add.
    Product(Box<ManifoldModel>, Box<ManifoldModel>),
}

impl ManifoldModel {
    pub fn euclidean(dimension: usize) -> Self {
        ManifoldModel::Euclidean { dimension }
    }

    pub fn half_space(dimension: usize) -> Self {
        ManifoldModel::HalfSpace { dimension }
    }

    pub fn product(left: ManifoldModel, right: ManifoldModel) -> Self {
        ManifoldModel::Product(Box::new(left), Box::new(right))
    }

    /// Coordinate dimension of a point on this manifold.
    pub fn dimension(&self) -> usize {
        match self {
            ManifoldModel::Euclidean { dimension } | ManifoldModel::HalfSpace { dimension } => {
                *dimension
            }
            ManifoldModel::Hyperbolic3 => 3,
            ManifoldModel::HyperbolicN { dimension } => *dimension,
            ManifoldModel::Product(l, r) => l.dimension() + r.dimension(),
        }
    }

    /// Checks the variant's structural constraints (dimension ranges).
    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldModel::Euclidean { dimension } | ManifoldModel::HalfSpace { dimension } => {
                if *dimension == 0 {
                    return Err(Error::Config("manifold dimension must be >= 1".into()));
                }
            }
            ManifoldModel::Hyperbolic3 => {}
            ManifoldModel::HyperbolicN { dimension } => {
                if *dimension <= 3 {
                    return Err(Error::Config(
                        "HyperbolicN requires dimension > 3; use Hyperbolic3 for N = 3".into(),
                    ));
                }
            }
            ManifoldModel::Product(l, r) => {
                l.validate()?;
                r.validate()?;
            }
        }
        Ok(())
    }

    /// Whether `p` is a valid point of the manifold.
    pub fn contains(&self, p: &Point) -> bool {
        if !p.is_finite() || p.dim() != self.dimension() {
            return false;
        }
        match self {
            ManifoldModel::Euclidean { .. } => true,
            ManifoldModel::HalfSpace { .. }
            | ManifoldModel::Hyperbolic3
            | ManifoldModel::HyperbolicN { .. } => *p.0.last().unwrap() > 0.0,
            ManifoldModel::Product(l, r) => {
                let (a, b) = p.0.split_at(l.dimension());
                l.contains(&Point(a.to_vec())) && r.contains(&Point(b.to_vec()))
            }
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::InvalidPoint(format!(
                "{p:?} is not a valid point of {self:?}"
            )))
        }
    }

    /// Riemannian distance `d(x, y)`.
    ///
    /// Hyperbolic distance in the upper half-space model:
    /// `cosh d = 1 + |x - y|^2 / (2 x_N y_N)`.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self {
            ManifoldModel::Euclidean { .. } | ManifoldModel::HalfSpace { .. } => {
                x.euclidean_distance(y)
            }
            ManifoldModel::Hyperbolic3 | ManifoldModel::HyperbolicN { .. } => {
                let hx = *x.0.last().unwrap();
                let hy = *y.0.last().unwrap();
                let sq = x
                    .0
                    .iter()
                    .zip(&y.0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                // acosh(1 + u) computed as ln(1 + u + sqrt(u^2 + 2u)) for accuracy
                // near u = 0.
                let u = sq / (2.0 * hx * hy);
                (1.0 + u + (u * (u + 2.0)).sqrt()).ln()
            }
            ManifoldModel::Product(l, r) => {
                let ld = l.dimension();
                let (xa, xb) = x.0.split_at(ld);
                let (ya, yb) = y.0.split_at(ld);
                let da = l.distance(&Point(xa.to_vec()), &Point(ya.to_vec()));
                let db = r.distance(&Point(xb.to_vec()), &Point(yb.to_vec()));
                da.hypot(db)
            }
        }
    }

    /// Splits a product point into its factor points. Errors for non-products.
    pub fn split_product<'p>(&self, p: &'p Point) -> Result<(Point, Point)> {
        match self {
            ManifoldModel::Product(l, _) => {
                let (a, b) = p.0.split_at(l.dimension());
                Ok((Point(a.to_vec()), Point(b.to_vec())))
            }
            _ => Err(Error::Unsupported("not a product manifold".into())),
        }
    }
}
