//! Interface shapes used by the test suites.

use crate::geometry::{ImplicitFunction, Point};
use crate::mesh::{Boundary, BoundarySpec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Semi-axes of the ellipse (major axis of length pi/4).
pub const ELLIPSE_AXES: (f64, f64) = (PI / 8.0, PI / 16.0);

/// Star curve `r = STAR_RADIUS + STAR_AMPLITUDE sin(STAR_LOBES theta)`.
pub const STAR_RADIUS: f64 = 0.5;
pub const STAR_AMPLITUDE: f64 = 0.06;
pub const STAR_LOBES: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryName {
    /// Centered axis-aligned ellipse, plus inside, periodic box.
    Ellipse,
    /// `psi = cos(pi y)/4 + x + pi/100`, plus to the right; periodic in y.
    Cosine,
    /// A five-lobed star standing in for an annulus; plus inside, Dirichlet box.
    Annulus,
}

impl GeometryName {
    pub const ALL: [GeometryName; 3] = [Self::Ellipse, Self::Cosine, Self::Annulus];

    pub fn boundary(self) -> BoundarySpec {
        match self {
            Self::Ellipse => BoundarySpec::PERIODIC,
            Self::Cosine => BoundarySpec {
                x: Boundary::Dirichlet,
                y: Boundary::Periodic,
            },
            Self::Annulus => BoundarySpec::DIRICHLET,
        }
    }

    /// Boundaries when the exact solution is unknown: ghost layers cannot be
    /// filled consistently, so closed interfaces use a periodic box. The
    /// cosine interface meets the x boundaries and keeps them.
    pub fn reference_boundary(self) -> BoundarySpec {
        match self {
            Self::Cosine => self.boundary(),
            _ => BoundarySpec::PERIODIC,
        }
    }

    /// Label written to output files; the stand-in is marked as such.
    pub fn label(self) -> &'static str {
        match self {
            Self::Ellipse => "ellipse",
            Self::Cosine => "cosine",
            Self::Annulus => "annulus (stand-in: star r=0.5+0.06 sin 5t)",
        }
    }

    pub fn is_stand_in(self) -> bool {
        self == Self::Annulus
    }
}

impl ImplicitFunction for GeometryName {
    fn eval(&self, p: Point) -> f64 {
        match self {
            Self::Ellipse => {
                let (a, b) = ELLIPSE_AXES;
                1.0 - (p.x / a).powi(2) - (p.y / b).powi(2)
            }
            Self::Cosine => 0.25 * (PI * p.y).cos() + p.x + PI / 100.0,
            Self::Annulus => {
                let r = p.x.hypot(p.y);
                let theta = p.y.atan2(p.x);
                STAR_RADIUS + STAR_AMPLITUDE * (STAR_LOBES * theta).sin() - r
            }
        }
    }
}

impl FromStr for GeometryName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ellipse" => Ok(Self::Ellipse),
            "cosine" => Ok(Self::Cosine),
            "annulus" => Ok(Self::Annulus),
            _ => Err(Error::UnknownGeometry(s.to_string())),
        }
    }
}

impl fmt::Display for GeometryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ellipse => "ellipse",
            Self::Cosine => "cosine",
            Self::Annulus => "annulus",
        })
    }
}

/// Looks up a geometry by name.
pub fn geometry_catalog(name: &str) -> Result<GeometryName> {
    name.parse()
}
