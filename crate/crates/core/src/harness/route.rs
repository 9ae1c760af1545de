use std::collections::{BTreeMap, VecDeque};

use crate::rf::FingerprintGrid;
use crate::world::{Cell, Floor, MoveCommand, Orientation};

/// Shortest 4-connected walk over open cells, as the directions to step.
/// `Some(vec![])` when `from == to`.
pub fn shortest_path(floor: &Floor, from: Cell, to: Cell) -> Option<Vec<Orientation>> {
    if !floor.is_open(from) || !floor.is_open(to) {
        return None;
    }
    let mut came: BTreeMap<Cell, (Cell, Orientation)> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = std::collections::BTreeSet::from([from]);
    while let Some(c) = queue.pop_front() {
        if c == to {
            let mut dirs = Vec::new();
            let mut cur = to;
            while cur != from {
                let (prev, d) = came[&cur];
                dirs.push(d);
                cur = prev;
            }
            dirs.reverse();
            return Some(dirs);
        }
        for d in Orientation::ALL {
            let n = c.offset(d);
            if floor.is_open(n) && seen.insert(n) {
                came.insert(n, (c, d));
                queue.push_back(n);
            }
        }
    }
    None
}

/// Walk that visits every calibrated location of `grid` in id order and at
/// each one faces N, E, S and W in turn, one window per orientation. Locations
/// on other floors or unreachable from the walk are skipped.
pub fn measurement_route(floor: &Floor, grid: &FingerprintGrid, start: Cell) -> Vec<MoveCommand> {
    let mut commands = Vec::new();
    let mut here = start;
    for at in grid.locations.values() {
        if at.floor != floor.index {
            continue;
        }
        let Some(path) = shortest_path(floor, here, at.cell) else { continue };
        commands.extend(path.into_iter().map(MoveCommand::Step));
        commands.extend(Orientation::ALL.into_iter().map(MoveCommand::Turn));
        here = at.cell;
    }
    commands
}
