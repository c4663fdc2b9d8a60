use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecn;

/// Distance from the boundary within which a point counts as on it.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Computational domain: a ball (disk in 2D) centred at the origin or an
/// axis-aligned box. The boundary function is the signed Euclidean distance,
/// negative inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    #[serde(alias = "ball")]
    Disk { radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn disk(radius: f64) -> Self {
        Domain::Disk { radius }
    }

    pub fn unit_box<const D: usize>() -> Self {
        Domain::Box {
            lo: vec![0.0; D],
            hi: vec![1.0; D],
        }
    }

    pub fn new_box<const D: usize>(lo: [f64; D], hi: [f64; D]) -> Self {
        Domain::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Disk { radius } if !(*radius > 0.0 && radius.is_finite()) => {
                Err(Error::Model(format!("disk radius must be positive, got {radius}")))
            }
            Domain::Box { lo, hi } => {
                if lo.len() != hi.len() || !(2..=3).contains(&lo.len()) {
                    return Err(Error::Shape("box corners must both have 2 or 3 entries".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Model("box needs lo < hi on every axis".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn box_corners<const D: usize>(&self) -> Option<([f64; D], [f64; D])> {
        match self {
            Domain::Box { lo, hi } if lo.len() == D && hi.len() == D => Some((
                std::array::from_fn(|i| lo[i]),
                std::array::from_fn(|i| hi[i]),
            )),
            _ => None,
        }
    }

    fn corners_or_err<const D: usize>(&self) -> Result<([f64; D], [f64; D])> {
        self.box_corners::<D>()
            .ok_or_else(|| Error::Shape(format!("box domain does not have dimension {D}")))
    }

    /// Axis-aligned bounding box.
    pub fn bounds<const D: usize>(&self) -> Result<([f64; D], [f64; D])> {
        match self {
            Domain::Disk { radius } => Ok(([-radius; D], [*radius; D])),
            Domain::Box { .. } => self.corners_or_err(),
        }
    }

    /// Signed Euclidean distance to the boundary; negative inside.
    pub fn signed_distance<const D: usize>(&self, x: &[f64; D]) -> Result<f64> {
        match self {
            Domain::Disk { radius } => Ok(vecn::norm(x) - radius),
            Domain::Box { .. } => {
                let (lo, hi) = self.corners_or_err::<D>()?;
                let mut outside = 0.0;
                let mut inside = f64::INFINITY;
                for i in 0..D {
                    let q = (lo[i] - x[i]).max(x[i] - hi[i]);
                    if q > 0.0 {
                        outside += q * q;
                    }
                    inside = inside.min((x[i] - lo[i]).min(hi[i] - x[i]));
                }
                if outside > 0.0 {
                    Ok(outside.sqrt())
                } else {
                    Ok(-inside)
                }
            }
        }
    }

    /// Outward unit normal at a boundary point (within [`BOUNDARY_TOL`]).
    pub fn boundary_normal<const D: usize>(&self, x: &[f64; D]) -> Result<[f64; D]> {
        let d = self.signed_distance(x)?;
        if d.abs() > BOUNDARY_TOL {
            return Err(Error::Precondition(format!(
                "normal requested at {x:?}, which is {d:e} from the boundary"
            )));
        }
        Ok(self.normal_near(x))
    }

    /// Outward normal of the nearest boundary piece, for points close to but
    /// not necessarily on the boundary.
    pub(crate) fn normal_near<const D: usize>(&self, x: &[f64; D]) -> [f64; D] {
        match self {
            Domain::Disk { .. } => vecn::normalize(x),
            Domain::Box { .. } => {
                let (lo, hi) = self.box_corners::<D>().expect("validated box");
                let mut best = (f64::INFINITY, 0usize, 1.0);
                for i in 0..D {
                    let dl = (x[i] - lo[i]).abs();
                    let dh = (hi[i] - x[i]).abs();
                    if dl < best.0 {
                        best = (dl, i, -1.0);
                    }
                    if dh < best.0 {
                        best = (dh, i, 1.0);
                    }
                }
                let mut n = [0.0; D];
                n[best.1] = best.2;
                n
            }
        }
    }

    pub fn contains<const D: usize>(&self, x: &[f64; D]) -> bool {
        self.signed_distance(x).map(|d| d <= BOUNDARY_TOL).unwrap_or(false)
    }

    /// Length of the boundary curve of a planar domain.
    pub fn perimeter(&self) -> Result<f64> {
        match self {
            Domain::Disk { radius } => Ok(2.0 * std::f64::consts::PI * radius),
            Domain::Box { .. } => {
                let (lo, hi) = self.corners_or_err::<2>()?;
                Ok(2.0 * ((hi[0] - lo[0]) + (hi[1] - lo[1])))
            }
        }
    }

    /// Boundary point at arclength `s` of a planar domain.
    ///
    /// Disks start at (R, 0) and run counter-clockwise. Boxes start at the
    /// `lo` corner and run counter-clockwise: bottom, right, top, left.
    pub fn boundary_point(&self, s: f64) -> Result<[f64; 2]> {
        let per = self.perimeter()?;
        let s = s.rem_euclid(per);
        match self {
            Domain::Disk { radius } => {
                let phi = s / radius;
                Ok([radius * phi.cos(), radius * phi.sin()])
            }
            Domain::Box { .. } => {
                let (lo, hi) = self.corners_or_err::<2>()?;
                let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
                Ok(if s < w {
                    [lo[0] + s, lo[1]]
                } else if s < w + h {
                    [hi[0], lo[1] + (s - w)]
                } else if s < 2.0 * w + h {
                    [hi[0] - (s - w - h), hi[1]]
                } else {
                    [lo[0], hi[1] - (s - 2.0 * w - h)]
                })
            }
        }
    }

    /// Arclength parameter of a (near-)boundary point of a planar domain.
    pub fn boundary_param(&self, x: &[f64; 2]) -> Result<f64> {
        match self {
            Domain::Disk { radius } => Ok(x[1].atan2(x[0]).rem_euclid(2.0 * std::f64::consts::PI) * radius),
            Domain::Box { .. } => {
                let (lo, hi) = self.corners_or_err::<2>()?;
                let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
                let n = self.normal_near(x);
                let x0 = x[0].clamp(lo[0], hi[0]);
                let x1 = x[1].clamp(lo[1], hi[1]);
                Ok(match (n[0] as i32, n[1] as i32) {
                    (0, -1) => x0 - lo[0],
                    (1, 0) => w + (x1 - lo[1]),
                    (0, 1) => w + h + (hi[0] - x0),
                    _ => 2.0 * w + h + (hi[1] - x1),
                })
            }
        }
    }
}

/// Uniform node grid on a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub const MIN_NODES: usize = 8;

    pub fn new(origin: [f64; 2], h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
        }
        if nx < Self::MIN_NODES || ny < Self::MIN_NODES {
            return Err(Error::Config(format!(
                "grid needs at least {} nodes per axis, got {nx} x {ny}",
                Self::MIN_NODES
            )));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Grid covering a box domain with spacing close to `h`; the spacing is
    /// adjusted so that nodes land on both faces.
    pub fn covering(domain: &Domain, h: f64) -> Result<Self> {
        let (lo, hi) = match domain {
            Domain::Box { .. } => domain.bounds::<2>()?,
            Domain::Disk { .. } => {
                return Err(Error::Unsupported("finite-difference grids need a box domain".into()))
            }
        };
        let (w, ht) = (hi[0] - lo[0], hi[1] - lo[1]);
        let cells_x = (w / h).round().max(1.0) as usize;
        let hx = w / cells_x as f64;
        let cells_y = (ht / hx).round().max(1.0) as usize;
        if ((cells_y as f64 * hx) - ht).abs() > 1e-9 * ht {
            return Err(Error::Config(format!(
                "box {w} x {ht} is not commensurate with spacing {hx}"
            )));
        }
        Self::new(lo, hx, cells_x + 1, cells_y + 1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn upper(&self) -> [f64; 2] {
        self.node(self.nx - 1, self.ny - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_signed_distance_and_normal() {
        let d = Domain::disk(1.0);
        assert_eq!(d.signed_distance(&[0.0, 0.0]).unwrap(), -1.0);
        assert_eq!(d.signed_distance(&[2.0, 0.0]).unwrap(), 1.0);
        assert_eq!(d.boundary_normal(&[1.0, 0.0]).unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn box_signed_distance() {
        let b = Domain::unit_box::<2>();
        assert!((b.signed_distance(&[0.5, 1.25]).unwrap() - 0.25).abs() < 1e-15);
        assert!((b.signed_distance(&[0.5, 0.4]).unwrap() + 0.4).abs() < 1e-15);
        assert!((b.signed_distance(&[2.0, 2.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.boundary_normal(&[0.0, 0.3]).unwrap(), [-1.0, 0.0]);
    }

    #[test]
    fn normal_off_boundary_is_a_precondition_error() {
        let d = Domain::disk(1.0);
        assert!(matches!(
            d.boundary_normal(&[0.5, 0.0]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn normal_matches_gradient_of_boundary_function() {
        let d = Domain::disk(1.3);
        for k in 0..16 {
            let phi = k as f64 * 0.4;
            let x = [1.3 * phi.cos(), 1.3 * phi.sin()];
            let n = d.boundary_normal(&x).unwrap();
            let h = 1e-6;
            let g = [
                (d.signed_distance(&[x[0] + h, x[1]]).unwrap()
                    - d.signed_distance(&[x[0] - h, x[1]]).unwrap())
                    / (2.0 * h),
                (d.signed_distance(&[x[0], x[1] + h]).unwrap()
                    - d.signed_distance(&[x[0], x[1] - h]).unwrap())
                    / (2.0 * h),
            ];
            assert!((vecn::norm(&n) - 1.0).abs() < 1e-14);
            assert!(vecn::dist(&n, &g) < 1e-8);
        }
    }

    #[test]
    fn boundary_parameter_round_trips() {
        for dom in [Domain::disk(2.0), Domain::new_box([0.0, -1.0], [2.0, 0.5])] {
            let per = dom.perimeter().unwrap();
            for k in 0..37 {
                let s = per * (k as f64 + 0.3) / 37.0;
                let x = dom.boundary_point(s).unwrap();
                assert!(dom.signed_distance(&x).unwrap().abs() < 1e-12);
                assert!((dom.boundary_param(&x).unwrap() - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_invariants() {
        assert!(Grid2D::new([0.0, 0.0], 0.0, 10, 10).is_err());
        assert!(Grid2D::new([0.0, 0.0], 0.1, 7, 10).is_err());
        let g = Grid2D::covering(&Domain::unit_box::<2>(), 0.01).unwrap();
        assert_eq!((g.nx, g.ny), (101, 101));
        assert!((g.upper()[0] - 1.0).abs() < 1e-12);
    }
}
