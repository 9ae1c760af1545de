use serde::Serialize;
use thiserror::Error;

use super::{Cell, FloorCell, ObstacleKind, World};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ObstructionSummary {
    pub walls: u32,
    pub shelves: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cells are on different floors ({0} and {1})")]
    DifferentFloors(u32, u32),
    #[error("unknown venue {0:?} or floor {1}")]
    UnknownFloor(String, u32),
}

/// Every cell whose closed square touches the segment between the centres of
/// `a` and `b`, in traversal order from `a`. When the segment passes exactly
/// through a grid corner both side cells are included.
pub fn supercover(a: Cell, b: Cell) -> Vec<Cell> {
    let dx = (b.x - a.x).abs() as i64;
    let dy = (b.y - a.y).abs() as i64;
    let sx = (b.x - a.x).signum();
    let sy = (b.y - a.y).signum();

    let mut out = Vec::with_capacity((dx + dy + 1) as usize);
    let (mut x, mut y) = (a.x, a.y);
    out.push(Cell::new(x, y));

    // The i-th vertical grid line is crossed at t = (2i - 1) / (2 dx), the
    // j-th horizontal one at t = (2j - 1) / (2 dy). Compare them exactly.
    let (mut i, mut j) = (1_i64, 1_i64);
    while i <= dx || j <= dy {
        let ord = if i > dx {
            std::cmp::Ordering::Greater
        } else if j > dy {
            std::cmp::Ordering::Less
        } else {
            ((2 * i - 1) * dy).cmp(&((2 * j - 1) * dx))
        };
        match ord {
            std::cmp::Ordering::Less => {
                x += sx;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                y += sy;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(Cell::new(x + sx, y));
                out.push(Cell::new(x, y + sy));
                x += sx;
                y += sy;
                i += 1;
                j += 1;
            }
        }
        out.push(Cell::new(x, y));
    }
    out
}

/// Counts obstacle cells strictly between `from` and `to` along the
/// supercover line. The result is symmetric in its arguments.
pub fn path_obstruction(
    world: &World,
    venue: &str,
    from: FloorCell,
    to: FloorCell,
) -> Result<ObstructionSummary, GeometryError> {
    if from.floor != to.floor {
        return Err(GeometryError::DifferentFloors(from.floor, to.floor));
    }
    let floor = world
        .floor(venue, from.floor)
        .ok_or_else(|| GeometryError::UnknownFloor(venue.to_string(), from.floor))?;
    let mut summary = ObstructionSummary::default();
    if floor.obstacles.is_empty() || from.cell == to.cell {
        return Ok(summary);
    }
    for cell in supercover(from.cell, to.cell) {
        if cell == from.cell || cell == to.cell {
            continue;
        }
        match floor.obstacle(cell) {
            Some(ObstacleKind::Wall) => summary.walls += 1,
            Some(ObstacleKind::Shelf) => summary.shelves += 1,
            None => {}
        }
    }
    Ok(summary)
}
