//! Sampled closed curves on S² and the built-in curve library.

use crate::error::{Error, Result};
use crate::spectral::{PeriodicGrid, Spectral};
use crate::su2::SpherePoint;

/// Default spectral-tail threshold certifying that samples resolve a smooth
/// closed curve.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-8;

/// A closed curve on S² sampled on a periodic grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveState {
    pub grid: PeriodicGrid,
    pub points: Vec<SpherePoint>,
    pub t: f64,
}

impl CurveState {
    /// Wraps samples that already lie on S²; fails with
    /// [`Error::OffSphere`] when any sample is off by more than 1e−12.
    pub fn new(grid: PeriodicGrid, points: Vec<SpherePoint>, t: f64) -> Result<Self> {
        assert_eq!(points.len(), grid.len(), "sample count does not match grid");
        let dev = max_sphere_deviation(&points);
        if dev > 1e-12 {
            return Err(Error::OffSphere(dev));
        }
        Ok(Self { grid, points, t })
    }

    /// Radially projects the samples onto S² and returns the largest
    /// pre-projection deviation `| |p| − 1 |` alongside the curve.
    pub fn projected(grid: PeriodicGrid, points: Vec<SpherePoint>, t: f64) -> (Self, f64) {
        assert_eq!(points.len(), grid.len(), "sample count does not match grid");
        let dev = points.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
        let points = points.into_iter().map(SpherePoint::normalized).collect();
        (Self { grid, points, t }, dev)
    }

    /// Samples a closed-form curve at `x_j`.
    pub fn sample(grid: PeriodicGrid, f: impl Fn(f64) -> SpherePoint) -> Self {
        let points = grid.xs().into_iter().map(f).collect();
        Self { grid, points, t: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest component spectral tail.
    pub fn tail(&self, spec: &Spectral) -> f64 {
        spec.tail_points(&self.points)
    }

    /// Checks the sphere and spectral-closure invariants.
    pub fn validate(&self, spec: &Spectral, tail_threshold: f64) -> Result<()> {
        let dev = max_sphere_deviation(&self.points);
        if dev > 1e-12 {
            return Err(Error::OffSphere(dev));
        }
        let tail = self.tail(spec);
        if tail > tail_threshold || !tail.is_finite() {
            return Err(Error::NotClosed(tail));
        }
        Ok(())
    }
}

pub fn max_sphere_deviation(points: &[SpherePoint]) -> f64 {
    points.iter().map(|p| p.sphere_deviation()).fold(0.0, f64::max)
}

/// Closed-form curves on S² used by the demos and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LibraryCurve {
    FixedPoint,
    GreatCircle,
    Viviani,
    SphericalSinusoid,
}

impl LibraryCurve {
    pub const ALL: [LibraryCurve; 4] = [
        LibraryCurve::FixedPoint,
        LibraryCurve::GreatCircle,
        LibraryCurve::Viviani,
        LibraryCurve::SphericalSinusoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LibraryCurve::FixedPoint => "fixed_point",
            LibraryCurve::GreatCircle => "great_circle",
            LibraryCurve::Viviani => "viviani",
            LibraryCurve::SphericalSinusoid => "spherical_sinusoid",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownCurve(name.to_string()))
    }

    pub fn eval(self, x: f64) -> SpherePoint {
        match self {
            LibraryCurve::FixedPoint => SpherePoint::new(1.0, 0.0, 0.0),
            LibraryCurve::GreatCircle => SpherePoint::new(0.0, x.cos(), x.sin()),
            LibraryCurve::Viviani => {
                let (s, c) = x.sin_cos();
                SpherePoint::new(s * c, s, c * c)
            }
            LibraryCurve::SphericalSinusoid => {
                let c2 = (2.0 * x).cos();
                let w = 1.0 / (1.0 + c2 * c2).sqrt();
                SpherePoint::new(x.cos() * w, x.sin() * w, c2 * w)
            }
        }
    }

    pub fn sample(self, grid: PeriodicGrid) -> CurveState {
        CurveState::sample(grid, |x| self.eval(x))
    }
}

/// Closed-form filament seeds in ℝ³ (not on S²).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LibraryFilament {
    /// The tilted ellipse `(cos x, sin x, cos x)`.
    SmokeRing,
    /// The planar unit circle `(cos x, sin x, 0)`.
    Circle,
}

impl LibraryFilament {
    pub const ALL: [LibraryFilament; 2] = [LibraryFilament::SmokeRing, LibraryFilament::Circle];

    pub fn name(self) -> &'static str {
        match self {
            LibraryFilament::SmokeRing => "smoke_ring",
            LibraryFilament::Circle => "circle_filament",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownCurve(name.to_string()))
    }

    pub fn eval(self, x: f64) -> SpherePoint {
        match self {
            LibraryFilament::SmokeRing => SpherePoint::new(x.cos(), x.sin(), x.cos()),
            LibraryFilament::Circle => SpherePoint::new(x.cos(), x.sin(), 0.0),
        }
    }

    pub fn sample(self, grid: PeriodicGrid) -> Vec<SpherePoint> {
        grid.xs().into_iter().map(|x| self.eval(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_curves_lie_on_sphere() {
        let grid = PeriodicGrid::new(256).unwrap();
        for c in LibraryCurve::ALL {
            let curve = c.sample(grid);
            assert!(max_sphere_deviation(&curve.points) <= 1e-12, "{}", c.name());
        }
    }

    #[test]
    fn library_curves_pass_validation() {
        let grid = PeriodicGrid::new(256).unwrap();
        let spec = Spectral::new(grid);
        for c in LibraryCurve::ALL {
            c.sample(grid).validate(&spec, DEFAULT_TAIL_THRESHOLD).unwrap();
        }
    }

    #[test]
    fn names_round_trip() {
        for c in LibraryCurve::ALL {
            assert_eq!(LibraryCurve::from_name(c.name()).unwrap(), c);
        }
        for f in LibraryFilament::ALL {
            assert_eq!(LibraryFilament::from_name(f.name()).unwrap(), f);
        }
        assert!(matches!(LibraryCurve::from_name("trefoil"), Err(Error::UnknownCurve(_))));
    }

    #[test]
    fn off_sphere_rejected() {
        let grid = PeriodicGrid::new(16).unwrap();
        let pts = vec![SpherePoint::new(1.1, 0.0, 0.0); 16];
        assert!(matches!(CurveState::new(grid, pts.clone(), 0.0), Err(Error::OffSphere(_))));
        let (c, dev) = CurveState::projected(grid, pts, 0.0);
        assert!((dev - 0.1).abs() < 1e-12);
        assert!(max_sphere_deviation(&c.points) < 1e-15);
    }
}
