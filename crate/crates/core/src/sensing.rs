//! Load-cell force model and centre-of-pressure computation.
//!
//! Each shoe carries four single-axis cells at the corners of a rectangle.
//! A cell converts its voltage to force affinely, `f = a*S + b`, and the CoP
//! is the force-weighted centroid of the cell positions. Eight cells (both
//! shoes) give the double-support CoP with the same formula.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FootPose, Side};

/// Below this total force (N) the CoP is not computed.
pub const DEFAULT_MIN_TOTAL: f64 = 1.0;
pub const DEFAULT_HALF_LENGTH: f64 = 50.0;
pub const DEFAULT_HALF_WIDTH: f64 = 25.0;
pub const CELL_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("insufficient load: total force {total} N below {min} N")]
    InsufficientLoad { total: f64, min: f64 },
    #[error("need at least 4 cells, got {0}")]
    TooFewCells(usize),
    #[error("sample for cell {sample} applied to cell {cell}")]
    IdMismatch { sample: u8, cell: u8 },
    #[error("invalid shoe layout: {0}")]
    BadLayout(String),
}

/// Affine cell parameters: gain `a` (N/V) and offset `b` (N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub a: f64,
    pub b: f64,
}

impl CellParams {
    pub fn force(&self, volts: f64) -> f64 {
        self.a * volts + self.b
    }

    pub fn voltage(&self, force: f64) -> f64 {
        (force - self.b) / self.a
    }
}

impl Default for CellParams {
    fn default() -> Self {
        Self { a: 10.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadCell {
    pub id: u8,
    /// Position in the shoe's own ground-plane frame (mm).
    pub position: Vector2<f64>,
    pub params: CellParams,
}

/// Corner order inside each shoe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    FrontLeft = 0,
    FrontRight = 1,
    RearLeft = 2,
    RearRight = 3,
}

/// Eight cells: left shoe ids 1-4 then right shoe ids 5-8, each shoe in
/// [`Corner`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShoeLayout {
    pub left: [LoadCell; 4],
    pub right: [LoadCell; 4],
}

impl ShoeLayout {
    pub fn rectangle(half_length: f64, half_width: f64, params: CellParams) -> Self {
        let corners = [
            Vector2::new(half_length, half_width),
            Vector2::new(half_length, -half_width),
            Vector2::new(-half_length, half_width),
            Vector2::new(-half_length, -half_width),
        ];
        let shoe = |first: u8| {
            std::array::from_fn(|i| LoadCell {
                id: first + i as u8,
                position: corners[i],
                params,
            })
        };
        Self {
            left: shoe(1),
            right: shoe(5),
        }
    }

    pub fn shoe(&self, side: Side) -> &[LoadCell; 4] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// All eight cells in id order.
    pub fn cells(&self) -> impl Iterator<Item = &LoadCell> {
        self.left.iter().chain(self.right.iter())
    }

    pub fn params(&self) -> [CellParams; CELL_COUNT] {
        let mut out = [CellParams::default(); CELL_COUNT];
        for (o, c) in out.iter_mut().zip(self.cells()) {
            *o = c.params;
        }
        out
    }

    pub fn with_params(mut self, params: &[CellParams; CELL_COUNT]) -> Self {
        for (i, p) in params.iter().enumerate() {
            if i < 4 {
                self.left[i].params = *p;
            } else {
                self.right[i - 4].params = *p;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        let mut ids: Vec<u8> = self.cells().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != CELL_COUNT {
            return Err(SensingError::BadLayout("cell ids must be distinct".into()));
        }
        for (name, shoe) in [("left", &self.left), ("right", &self.right)] {
            let p: Vec<Vector2<f64>> = shoe.iter().map(|c| c.position).collect();
            let front = p[0] - p[1];
            let rear = p[2] - p[3];
            let side = p[0] - p[2];
            let scale = front.norm().max(side.norm());
            let area = (front.x * side.y - front.y * side.x).abs();
            if area <= 1e-9 * scale * scale || scale == 0.0 {
                return Err(SensingError::BadLayout(format!("{name} shoe has zero area")));
            }
            if (front - rear).norm() > 1e-9 * scale || front.dot(&side).abs() > 1e-9 * scale * scale {
                return Err(SensingError::BadLayout(format!("{name} shoe is not a rectangle")));
            }
        }
        Ok(())
    }

    /// Forces from raw voltages in id order, using each cell's own params.
    pub fn forces_from_voltages(&self, volts: &[f64; CELL_COUNT]) -> [f64; CELL_COUNT] {
        let mut out = [0.0; CELL_COUNT];
        for ((o, c), s) in out.iter_mut().zip(self.cells()).zip(volts) {
            *o = c.params.force(*s);
        }
        out
    }
}

impl Default for ShoeLayout {
    fn default() -> Self {
        Self::rectangle(DEFAULT_HALF_LENGTH, DEFAULT_HALF_WIDTH, CellParams::default())
    }
}

/// On-disk layout: `{"cells": [{"id", "xy_mm", "a", "b"}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub cells: Vec<CellEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub id: u8,
    pub xy_mm: [f64; 2],
    pub a: f64,
    pub b: f64,
}

impl From<&ShoeLayout> for SensorConfig {
    fn from(layout: &ShoeLayout) -> Self {
        SensorConfig {
            cells: layout
                .cells()
                .map(|c| CellEntry {
                    id: c.id,
                    xy_mm: [c.position.x, c.position.y],
                    a: c.params.a,
                    b: c.params.b,
                })
                .collect(),
        }
    }
}

impl TryFrom<SensorConfig> for ShoeLayout {
    type Error = SensingError;

    fn try_from(cfg: SensorConfig) -> Result<Self, Self::Error> {
        if cfg.cells.len() != CELL_COUNT {
            return Err(SensingError::BadLayout(format!(
                "expected {CELL_COUNT} cells, got {}",
                cfg.cells.len()
            )));
        }
        let mut entries = cfg.cells;
        entries.sort_by_key(|c| c.id);
        let cell = |e: &CellEntry| LoadCell {
            id: e.id,
            position: Vector2::new(e.xy_mm[0], e.xy_mm[1]),
            params: CellParams { a: e.a, b: e.b },
        };
        let layout = ShoeLayout {
            left: std::array::from_fn(|i| cell(&entries[i])),
            right: std::array::from_fn(|i| cell(&entries[i + 4])),
        };
        layout.validate()?;
        Ok(layout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopReading {
    /// CoP in the floating base (mm).
    pub cop: Vector2<f64>,
    /// Total normal force (N).
    pub grf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reading {
    Voltage(f64),
    Force(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSample {
    pub cell_id: u8,
    pub reading: Reading,
}

/// `f = a*S + b`. A sample that already carries a force is passed through.
pub fn cell_force(sample: &CellSample, cell: &LoadCell) -> Result<f64, SensingError> {
    if sample.cell_id != cell.id {
        return Err(SensingError::IdMismatch {
            sample: sample.cell_id,
            cell: cell.id,
        });
    }
    Ok(match sample.reading {
        Reading::Voltage(s) => cell.params.force(s),
        Reading::Force(f) => f,
    })
}

/// Weighted centroid of `(force, position)` pairs. Negative forces are
/// clamped to zero first since the cells only measure compression.
pub fn cop_from_forces(
    forces: &[(f64, Vector2<f64>)],
    min_total: f64,
) -> Result<CopReading, SensingError> {
    if forces.len() < 4 {
        return Err(SensingError::TooFewCells(forces.len()));
    }
    let mut total = 0.0;
    let mut moment = Vector2::zeros();
    for (f, p) in forces {
        let f = f.max(0.0);
        total += f;
        moment += p * f;
    }
    if !(total >= min_total) {
        return Err(SensingError::InsufficientLoad {
            total,
            min: min_total,
        });
    }
    Ok(CopReading {
        cop: moment / total,
        grf: total,
    })
}

fn planar(pose: &FootPose, p: &Vector2<f64>) -> Vector2<f64> {
    let (s, c) = pose.orientation.gamma.sin_cos();
    Matrix2::new(c, -s, s, c) * p + pose.position.xy()
}

/// Cell positions expressed in the floating base. The base shoe's cells are
/// their stored positions; the other shoe's cells go through the planar part
/// (x, y, yaw) of `other_foot` (its pose relative to the base).
pub fn sensor_positions_in_base(
    layout: &ShoeLayout,
    base: Side,
    other_foot: &FootPose,
) -> [Vector2<f64>; CELL_COUNT] {
    let mut out = [Vector2::zeros(); CELL_COUNT];
    for (i, cell) in layout.cells().enumerate() {
        let side = if i < 4 { Side::Left } else { Side::Right };
        out[i] = if side == base {
            cell.position
        } else {
            planar(other_foot, &cell.position)
        };
    }
    out
}

/// Convex polygon in counter-clockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vector2<f64>>,
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl ConvexPolygon {
    /// Convex hull (monotone chain). Collinear points are dropped.
    pub fn hull(points: &[Vector2<f64>]) -> Self {
        let mut pts: Vec<Vector2<f64>> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Self { vertices: pts };
        }
        let mut lower: Vec<Vector2<f64>> = Vec::new();
        for p in &pts {
            while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Vector2<f64>> = Vec::new();
        for p in pts.iter().rev() {
            while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self { vertices: lower }
    }

    /// Signed distance to the nearest edge line: positive inside, negative
    /// outside (for outside points only the sign is exact).
    pub fn margin(&self, p: &Vector2<f64>) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return f64::NEG_INFINITY;
        }
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                cross(&a, &b, p) / (b - a).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        self.margin(p) >= 0.0
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.x * b.y - a.y * b.x
            })
            .sum::<f64>()
            / 2.0
    }
}

/// Hull of the cells of the shoes flagged in `contact` (`[left, right]`).
pub fn support_polygon(positions: &[Vector2<f64>; CELL_COUNT], contact: [bool; 2]) -> ConvexPolygon {
    let pts: Vec<Vector2<f64>> = positions
        .iter()
        .enumerate()
        .filter(|(i, _)| contact[usize::from(*i >= 4)])
        .map(|(_, p)| *p)
        .collect();
    ConvexPolygon::hull(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corners() -> [Vector2<f64>; 4] {
        [
            Vector2::new(50.0, 25.0),
            Vector2::new(50.0, -25.0),
            Vector2::new(-50.0, 25.0),
            Vector2::new(-50.0, -25.0),
        ]
    }

    fn cell(a: f64, b: f64) -> LoadCell {
        LoadCell {
            id: 3,
            position: Vector2::zeros(),
            params: CellParams { a, b },
        }
    }

    fn volts(s: f64) -> CellSample {
        CellSample {
            cell_id: 3,
            reading: Reading::Voltage(s),
        }
    }

    #[test]
    fn affine_cell_force() {
        assert_eq!(cell_force(&volts(4.2), &cell(1.0, 0.0)).unwrap(), 4.2);
        assert_eq!(cell_force(&volts(-123.0), &cell(0.0, 7.0)).unwrap(), 7.0);
        assert_eq!(cell_force(&volts(3.0), &cell(2.5, -0.5)).unwrap(), 7.0);
        let wrong = CellSample {
            cell_id: 4,
            reading: Reading::Voltage(1.0),
        };
        assert!(matches!(
            cell_force(&wrong, &cell(1.0, 0.0)),
            Err(SensingError::IdMismatch { .. })
        ));
    }

    #[test]
    fn symmetric_forces_center_the_cop() {
        let f: Vec<_> = corners().iter().map(|p| (3.0, *p)).collect();
        let r = cop_from_forces(&f, DEFAULT_MIN_TOTAL).unwrap();
        assert_eq!(r.cop, Vector2::zeros());
        assert_eq!(r.grf, 12.0);
    }

    #[test]
    fn hand_computed_cop() {
        let f: Vec<_> = [2.0, 1.0, 1.0, 0.0].into_iter().zip(corners()).collect();
        let r = cop_from_forces(&f, DEFAULT_MIN_TOTAL).unwrap();
        assert_eq!(r.cop, Vector2::new(25.0, 12.5));
        assert_eq!(r.grf, 4.0);
    }

    #[test]
    fn zero_load_is_an_error() {
        let f: Vec<_> = corners().iter().map(|p| (0.0, *p)).collect();
        assert!(matches!(
            cop_from_forces(&f, DEFAULT_MIN_TOTAL),
            Err(SensingError::InsufficientLoad { .. })
        ));
        assert_eq!(
            cop_from_forces(&f[..3], DEFAULT_MIN_TOTAL),
            Err(SensingError::TooFewCells(3))
        );
    }

    #[test]
    fn negative_forces_are_clamped() {
        let f: Vec<_> = [5.0, -1.0, 0.0, 0.0].into_iter().zip(corners()).collect();
        let r = cop_from_forces(&f, DEFAULT_MIN_TOTAL).unwrap();
        assert_eq!(r.cop, corners()[0]);
        assert_eq!(r.grf, 5.0);
    }

    #[test]
    fn positions_for_identity_pose_are_stored_layout() {
        let layout = ShoeLayout::default();
        let pos = sensor_positions_in_base(&layout, Side::Right, &FootPose::default());
        for (p, c) in pos.iter().zip(layout.cells()) {
            assert_eq!(*p, c.position);
        }
    }

    #[test]
    fn translated_left_shoe_shifts_its_cells() {
        let layout = ShoeLayout::default();
        let pose = FootPose::new(40.0, 0.0, 3.0, 0.0, 0.0, 0.0);
        let pos = sensor_positions_in_base(&layout, Side::Right, &pose);
        for (i, c) in layout.cells().enumerate() {
            let shift = if i < 4 { Vector2::new(40.0, 0.0) } else { Vector2::zeros() };
            assert_eq!(pos[i], c.position + shift);
        }
    }

    #[test]
    fn yawed_left_shoe_rotates_cells() {
        let layout = ShoeLayout::default();
        let pose = FootPose::new(0.0, 100.0, 0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let pos = sensor_positions_in_base(&layout, Side::Right, &pose);
        // 90 deg rotation oracle: (x, y) -> (-y, x).
        for (cell, got) in layout.left.iter().zip(&pos) {
            let p = cell.position;
            let expected = Vector2::new(-p.y, p.x + 100.0);
            assert!((got - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn left_base_keeps_left_cells() {
        let layout = ShoeLayout::default();
        let pose = FootPose::new(-40.0, -100.0, 0.0, 0.0, 0.0, 0.0);
        let pos = sensor_positions_in_base(&layout, Side::Left, &pose);
        assert_eq!(pos[0], layout.left[0].position);
        assert_eq!(pos[4], layout.right[0].position + Vector2::new(-40.0, -100.0));
    }

    #[test]
    fn layout_validation() {
        assert!(ShoeLayout::default().validate().is_ok());
        let mut bad = ShoeLayout::default();
        bad.left[1].id = 1;
        assert!(bad.validate().is_err());
        let mut skew = ShoeLayout::default();
        skew.right[0].position.x += 5.0;
        assert!(skew.validate().is_err());
        let flat = ShoeLayout::rectangle(50.0, 0.0, CellParams::default());
        assert!(flat.validate().is_err());
    }

    #[test]
    fn sensor_config_round_trip() {
        let layout = ShoeLayout::default();
        let cfg = SensorConfig::from(&layout);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"xy_mm\""));
        let back = ShoeLayout::try_from(serde_json::from_str::<SensorConfig>(&json).unwrap()).unwrap();
        assert_eq!(back, layout);
    }

    #[test]
    fn hull_and_margin() {
        let hull = ConvexPolygon::hull(&corners());
        assert_eq!(hull.vertices.len(), 4);
        assert!((hull.area() - 5000.0).abs() < 1e-9);
        assert!((hull.margin(&Vector2::zeros()) - 25.0).abs() < 1e-12);
        assert!(hull.margin(&Vector2::new(0.0, 30.0)) < 0.0);
    }

    fn force_set() -> impl Strategy<Value = Vec<(f64, Vector2<f64>)>> {
        prop::collection::vec(
            (0.0..50.0f64, -200.0..200.0f64, -200.0..200.0f64).prop_map(|(f, x, y)| (f, Vector2::new(x, y))),
            4..=8,
        )
        .prop_filter("loaded", |v| v.iter().map(|(f, _)| f).sum::<f64>() > 1.0)
    }

    proptest! {
        #[test]
        fn cop_inside_loaded_hull(f in force_set()) {
            let r = cop_from_forces(&f, DEFAULT_MIN_TOTAL).unwrap();
            let loaded: Vec<_> = f.iter().filter(|(w, _)| *w > 0.0).map(|(_, p)| *p).collect();
            let hull = ConvexPolygon::hull(&loaded);
            if hull.vertices.len() >= 3 {
                prop_assert!(hull.margin(&r.cop) > -1e-9);
            }
        }

        #[test]
        fn scaling_forces_keeps_cop(f in force_set(), lambda in 0.1..10.0f64) {
            let a = cop_from_forces(&f, DEFAULT_MIN_TOTAL).unwrap();
            let scaled: Vec<_> = f.iter().map(|(w, p)| (w * lambda, *p)).collect();
            let b = cop_from_forces(&scaled, 0.0).unwrap();
            prop_assert!((a.cop - b.cop).norm() < 1e-9);
            prop_assert!((b.grf - lambda * a.grf).abs() < 1e-9 * b.grf.max(1.0));
        }

        #[test]
        fn single_loaded_cell_is_the_cop(k in 0usize..8, w in 1.5..100.0f64) {
            let layout = ShoeLayout::default();
            let pos = sensor_positions_in_base(&layout, Side::Right, &FootPose::new(20.0, 100.0, 0.0, 0.0, 0.0, 0.1));
            let f: Vec<_> = pos.iter().enumerate().map(|(i, p)| (if i == k { w } else { 0.0 }, *p)).collect();
            let r = cop_from_forces(&f, DEFAULT_MIN_TOTAL).unwrap();
            prop_assert!((r.cop - pos[k]).norm() <= 1e-12 * pos[k].norm().max(1.0));
        }

        #[test]
        fn double_support_degenerates_to_single(ws in prop::array::uniform4(0.5..20.0f64)) {
            let layout = ShoeLayout::default();
            let pos = sensor_positions_in_base(&layout, Side::Right, &FootPose::new(30.0, 100.0, 0.0, 0.0, 0.0, 0.0));
            let eight: Vec<_> = (0..8).map(|i| (if i < 4 { 0.0 } else { ws[i - 4] }, pos[i])).collect();
            let four: Vec<_> = (4..8).map(|i| (ws[i - 4], pos[i])).collect();
            let a = cop_from_forces(&eight, DEFAULT_MIN_TOTAL).unwrap();
            let b = cop_from_forces(&four, DEFAULT_MIN_TOTAL).unwrap();
            prop_assert!((a.cop - b.cop).norm() < 1e-12);
            prop_assert!((a.grf - b.grf).abs() < 1e-12);
        }
    }
}
