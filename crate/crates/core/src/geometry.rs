//! Urban map, building prisms and the geometric LoS/NLoS test between the
//! UAV and a ground user.
//!
//! Buildings are vertical prisms over axis-aligned rectangular footprints.
//! The link segment runs from the UAV at `(x_q, y_q, H)` to the user at
//! `(x_k, y_k, 0)`, so its height `z(t) = H (1 - t)` decreases along the
//! segment. Over a footprint crossed on `[t_in, t_out]` the lowest point of
//! the segment is therefore at `t_out`, and the building blocks the link iff
//! `H (1 - t_out) <= h`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (or vector) in the horizontal plane, in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `theta` scaled by `length`.
    pub fn polar(length: f64, theta: f64) -> Self {
        Self::new(length * theta.cos(), length * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// A building: axis-aligned rectangular footprint plus roof height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Building {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub height: f64,
}

impl Building {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, height: f64) -> Result<Self> {
        let b = Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            height,
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let all_finite = [self.x_lo, self.x_hi, self.y_lo, self.y_hi, self.height]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidBuilding("non-finite coordinate".into()));
        }
        if self.x_lo >= self.x_hi || self.y_lo >= self.y_hi {
            return Err(Error::InvalidBuilding(format!(
                "empty footprint x=[{}, {}] y=[{}, {}]",
                self.x_lo, self.x_hi, self.y_lo, self.y_hi
            )));
        }
        if self.height <= 0.0 {
            return Err(Error::InvalidBuilding(format!(
                "height must be positive, got {}",
                self.height
            )));
        }
        Ok(())
    }

    /// Closed-set footprint containment.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_lo && p.x <= self.x_hi && p.y >= self.y_lo && p.y <= self.y_hi
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))
    }

    /// Footprints overlap with positive area. Touching edges do not count.
    fn overlaps(&self, other: &Building) -> bool {
        self.x_lo < other.x_hi
            && other.x_lo < self.x_hi
            && self.y_lo < other.y_hi
            && other.y_lo < self.y_hi
    }

    /// Nearest point outside the footprint, pushing across the nearest edge.
    ///
    /// Points already outside are returned unchanged. `margin` is added past
    /// the edge so the result is not on the (closed) boundary.
    pub fn push_outside(&self, p: Point2, margin: f64) -> Point2 {
        if !self.contains(p) {
            return p;
        }
        let candidates = [
            (p.x - self.x_lo, Point2::new(self.x_lo - margin, p.y)),
            (self.x_hi - p.x, Point2::new(self.x_hi + margin, p.y)),
            (p.y - self.y_lo, Point2::new(p.x, self.y_lo - margin)),
            (self.y_hi - p.y, Point2::new(p.x, self.y_hi + margin)),
        ];
        let mut best = candidates[0];
        for c in &candidates[1..] {
            if c.0 < best.0 {
                best = *c;
            }
        }
        best.1
    }
}

/// World boundary `[0, x_max] x [0, y_max]` plus the building list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrbanMap {
    pub x_max: f64,
    pub y_max: f64,
    #[serde(default)]
    pub buildings: Vec<Building>,
}

impl UrbanMap {
    pub fn new(x_max: f64, y_max: f64, buildings: Vec<Building>) -> Result<Self> {
        let map = Self {
            x_max,
            y_max,
            buildings,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn empty(x_max: f64, y_max: f64) -> Result<Self> {
        Self::new(x_max, y_max, Vec::new())
    }

    /// Checks bounds, footprint validity, containment in the map and
    /// pairwise non-overlap.
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0 && self.y_max > 0.0 && self.x_max.is_finite() && self.y_max.is_finite())
        {
            return Err(Error::InvalidMap(format!(
                "bounds must be positive, got {} x {}",
                self.x_max, self.y_max
            )));
        }
        for (i, b) in self.buildings.iter().enumerate() {
            b.validate()
                .map_err(|e| Error::InvalidMap(format!("building {i}: {e}")))?;
            if b.x_lo < 0.0 || b.y_lo < 0.0 || b.x_hi > self.x_max || b.y_hi > self.y_max {
                return Err(Error::InvalidMap(format!(
                    "building {i} footprint leaves the map boundary"
                )));
            }
        }
        for i in 0..self.buildings.len() {
            for j in (i + 1)..self.buildings.len() {
                if self.buildings[i].overlaps(&self.buildings[j]) {
                    return Err(Error::InvalidMap(format!(
                        "buildings {i} and {j} have overlapping footprints"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn in_bounds(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.x <= self.x_max && p.y >= 0.0 && p.y <= self.y_max
    }

    /// Index of the first building whose closed footprint contains `p`.
    pub fn building_at(&self, p: Point2) -> Option<usize> {
        self.buildings.iter().position(|b| b.contains(p))
    }

    /// Whether the ground segment `p0 -> p1` touches any footprint.
    pub fn segment_hits_building(&self, p0: Point2, p1: Point2) -> bool {
        if p0 == p1 {
            return point_in_any_building(p0, self);
        }
        self.buildings
            .iter()
            .any(|b| segment_footprint_overlap(p0, p1, b).is_some())
    }

    pub fn area(&self) -> f64 {
        self.x_max * self.y_max
    }
}

/// Parameter interval `[t_in, t_out]` of a segment inside a footprint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    pub t_in: f64,
    pub t_out: f64,
}

/// Outcome of the LoS test for one UAV-user link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LosVerdict {
    pub is_los: bool,
    /// Index of the first blocking building in map order.
    pub blocking_building: Option<usize>,
    /// Exit parameter of the segment over the first blocker.
    pub t_out: Option<f64>,
}

impl LosVerdict {
    pub const CLEAR: LosVerdict = LosVerdict {
        is_los: true,
        blocking_building: None,
        t_out: None,
    };

    fn blocked(index: usize, t_out: f64) -> Self {
        Self {
            is_los: false,
            blocking_building: Some(index),
            t_out: Some(t_out),
        }
    }
}

/// Clips one slab: narrows `[t_lo, t_hi]` to the parameters where
/// `origin + t * dir` lies in `[lo, hi]`. Returns false if the result is empty.
fn clip_slab(origin: f64, dir: f64, lo: f64, hi: f64, t_lo: &mut f64, t_hi: &mut f64) -> bool {
    if dir == 0.0 {
        // Parallel to the slab: pass or fail on containment.
        return origin >= lo && origin <= hi;
    }
    let inv = 1.0 / dir;
    let mut t0 = (lo - origin) * inv;
    let mut t1 = (hi - origin) * inv;
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    *t_lo = t_lo.max(t0);
    *t_hi = t_hi.min(t1);
    *t_lo <= *t_hi
}

/// Slab clipping of the segment `p0 -> p1` (parameter `t` in `[0, 1]`)
/// against the closed footprint of `b`.
///
/// Zero-length segments are the caller's job; for them this degenerates to
/// a containment test returning `[0, 1]` or `None`.
pub fn segment_footprint_overlap(p0: Point2, p1: Point2, b: &Building) -> Option<Overlap> {
    let d = p1 - p0;
    let mut t_in = 0.0_f64;
    let mut t_out = 1.0_f64;
    if !clip_slab(p0.x, d.x, b.x_lo, b.x_hi, &mut t_in, &mut t_out) {
        return None;
    }
    if !clip_slab(p0.y, d.y, b.y_lo, b.y_hi, &mut t_in, &mut t_out) {
        return None;
    }
    Some(Overlap { t_in, t_out })
}

/// Classifies the link between a UAV at `(uav, altitude)` and a ground user.
///
/// A building blocks the link iff the segment's projection crosses its
/// footprint and the segment height at the exit parameter, `H (1 - t_out)`,
/// is at or below the roof. The first blocker in map order is reported.
/// When the UAV hovers exactly above the user, the link is NLoS iff the user
/// stands inside a footprint.
pub fn classify_link(uav: Point2, altitude: f64, user: Point2, map: &UrbanMap) -> LosVerdict {
    if uav == user {
        return match map.building_at(user) {
            Some(i) => LosVerdict::blocked(i, 1.0),
            None => LosVerdict::CLEAR,
        };
    }
    for (i, b) in map.buildings.iter().enumerate() {
        if let Some(ov) = segment_footprint_overlap(uav, user, b) {
            let z_min = altitude * (1.0 - ov.t_out);
            if z_min <= b.height {
                return LosVerdict::blocked(i, ov.t_out);
            }
        }
    }
    LosVerdict::CLEAR
}

/// Closed-set containment in any building footprint.
pub fn point_in_any_building(p: Point2, map: &UrbanMap) -> bool {
    map.building_at(p).is_some()
}

fn reflect_coordinate(v: f64, max: f64) -> f64 {
    if v >= 0.0 && v <= max {
        return v;
    }
    // Repeated mirroring at 0 and max is a fold with period 2 * max.
    let period = 2.0 * max;
    let t = v.rem_euclid(period);
    let folded = if t > max { period - t } else { t };
    folded.clamp(0.0, max)
}

/// Mirrors coordinates outside `[0, x_max] x [0, y_max]` back into the map.
pub fn reflect_into_bounds(p: Point2, map: &UrbanMap) -> Point2 {
    Point2::new(
        reflect_coordinate(p.x, map.x_max),
        reflect_coordinate(p.y, map.y_max),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn block(h: f64) -> Building {
        Building::new(90.0, 110.0, -10.0, 10.0, h).unwrap()
    }

    fn open_map(h: f64) -> UrbanMap {
        // Map bounds are irrelevant to classify_link; the test building sits
        // partly below y = 0, so skip validation.
        UrbanMap {
            x_max: 300.0,
            y_max: 300.0,
            buildings: vec![block(h)],
        }
    }

    #[test]
    fn overlap_through_center() {
        let ov = segment_footprint_overlap(Point2::new(0.0, 0.0), Point2::new(200.0, 0.0), &block(1.0))
            .unwrap();
        assert_relative_eq!(ov.t_in, 0.45, epsilon = 1e-15);
        assert_relative_eq!(ov.t_out, 0.55, epsilon = 1e-15);
    }

    #[test]
    fn overlap_disjoint() {
        let b = Building::new(50.0, 60.0, 50.0, 60.0, 1.0).unwrap();
        assert!(segment_footprint_overlap(Point2::new(0.0, 0.0), Point2::new(10.0, 10.0), &b).is_none());
    }

    #[test]
    fn overlap_axis_parallel_outside_slab() {
        let b = block(1.0);
        // Horizontal segment at y = 20 never enters y in [-10, 10].
        assert!(segment_footprint_overlap(Point2::new(0.0, 20.0), Point2::new(200.0, 20.0), &b).is_none());
        // Vertical segment at x = 100 crosses it.
        let ov = segment_footprint_overlap(Point2::new(100.0, -50.0), Point2::new(100.0, 50.0), &b).unwrap();
        assert_relative_eq!(ov.t_in, 0.4, epsilon = 1e-15);
        assert_relative_eq!(ov.t_out, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn grazing_segment_counts_as_overlap() {
        let b = block(1.0);
        let ov = segment_footprint_overlap(Point2::new(0.0, 10.0), Point2::new(200.0, 10.0), &b).unwrap();
        assert_relative_eq!(ov.t_in, 0.45, epsilon = 1e-15);
    }

    #[test]
    fn segment_ending_inside() {
        let ov = segment_footprint_overlap(Point2::new(0.0, 0.0), Point2::new(100.0, 0.0), &block(1.0))
            .unwrap();
        assert_relative_eq!(ov.t_in, 0.9, epsilon = 1e-15);
        assert_eq!(ov.t_out, 1.0);
    }

    #[test]
    fn empty_map_is_los() {
        let map = UrbanMap::empty(300.0, 300.0).unwrap();
        let v = classify_link(Point2::new(10.0, 10.0), 100.0, Point2::new(250.0, 40.0), &map);
        assert_eq!(v, LosVerdict::CLEAR);
    }

    #[test]
    fn tall_building_blocks() {
        // z_min = 100 * (1 - 0.55) = 45 <= 60
        let v = classify_link(Point2::new(0.0, 0.0), 100.0, Point2::new(200.0, 0.0), &open_map(60.0));
        assert!(!v.is_los);
        assert_eq!(v.blocking_building, Some(0));
        assert_relative_eq!(v.t_out.unwrap(), 0.55, epsilon = 1e-15);
    }

    #[test]
    fn short_building_does_not_block() {
        // z_min = 45 > 30
        let v = classify_link(Point2::new(0.0, 0.0), 100.0, Point2::new(200.0, 0.0), &open_map(30.0));
        assert!(v.is_los);
        assert!(v.blocking_building.is_none());
    }

    #[test]
    fn first_blocker_in_collection_order() {
        let map = UrbanMap {
            x_max: 300.0,
            y_max: 300.0,
            buildings: vec![
                Building::new(150.0, 160.0, -5.0, 5.0, 90.0).unwrap(),
                block(60.0),
            ],
        };
        let v = classify_link(Point2::new(0.0, 0.0), 100.0, Point2::new(200.0, 0.0), &map);
        assert_eq!(v.blocking_building, Some(0));
    }

    #[test]
    fn hovering_above_user() {
        let map = open_map(60.0);
        let inside = Point2::new(100.0, 0.0);
        assert!(!classify_link(inside, 100.0, inside, &map).is_los);
        let outside = Point2::new(10.0, 50.0);
        assert!(classify_link(outside, 100.0, outside, &map).is_los);
    }

    #[test]
    fn point_containment() {
        let map = open_map(10.0);
        assert!(point_in_any_building(Point2::new(95.0, 0.0), &map));
        assert!(!point_in_any_building(Point2::new(0.0, 0.0), &map));
        assert!(point_in_any_building(Point2::new(90.0, -10.0), &map));
    }

    #[test]
    fn reflection_examples() {
        let map = UrbanMap::empty(300.0, 300.0).unwrap();
        assert_eq!(reflect_into_bounds(Point2::new(-5.0, 10.0), &map), Point2::new(5.0, 10.0));
        assert_eq!(reflect_into_bounds(Point2::new(305.0, 310.0), &map), Point2::new(295.0, 290.0));
        assert_eq!(reflect_into_bounds(Point2::new(100.0, 100.0), &map), Point2::new(100.0, 100.0));
        // Far outside: multiple mirrors.
        assert_eq!(reflect_into_bounds(Point2::new(-700.0, 1000.0), &map), Point2::new(100.0, 200.0));
    }

    #[test]
    fn map_validation() {
        assert!(UrbanMap::empty(0.0, 10.0).is_err());
        let a = Building::new(0.0, 10.0, 0.0, 10.0, 5.0).unwrap();
        let b = Building::new(5.0, 15.0, 5.0, 15.0, 5.0).unwrap();
        assert!(UrbanMap::new(100.0, 100.0, vec![a, b]).is_err());
        // Shared edge is fine.
        let c = Building::new(10.0, 20.0, 0.0, 10.0, 5.0).unwrap();
        assert!(UrbanMap::new(100.0, 100.0, vec![a, c]).is_ok());
        let outside = Building::new(90.0, 110.0, 0.0, 10.0, 5.0).unwrap();
        assert!(UrbanMap::new(100.0, 100.0, vec![outside]).is_err());
        assert!(Building::new(0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(Building::new(0.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn push_outside_nearest_edge() {
        let b = Building::new(0.0, 10.0, 0.0, 20.0, 5.0).unwrap();
        let p = b.push_outside(Point2::new(2.0, 10.0), 1e-6);
        assert!(!b.contains(p));
        assert_relative_eq!(p.x, -1e-6);
        assert_eq!(p.y, 10.0);
    }
}
