//! Plane geometry for the top-down scene.

use serde::{Deserialize, Serialize};

/// A point in scene units. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Moves at most `max_step` toward `goal`, never overshooting it.
    pub fn step_toward(&self, goal: &Position, max_step: f64) -> Position {
        let d = self.distance(goal);
        if d <= max_step || d == 0.0 {
            return *goal;
        }
        let t = max_step / d;
        Position::new(self.x + (goal.x - self.x) * t, self.y + (goal.y - self.y) * t)
    }

    pub fn heading_to(&self, goal: &Position) -> f64 {
        (goal.y - self.y).atan2(goal.x - self.x)
    }
}

impl From<[f64; 2]> for Position {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Position> for [f64; 2] {
    fn from(p: Position) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle, origin at its minimum corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn contains(&self, p: &Position) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }

    pub fn center(&self) -> Position {
        Position::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// True when the interiors intersect; shared walls do not count.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }
}
