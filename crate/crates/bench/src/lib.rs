//! Shared setup for the criterion benches.

use ghostsim_core::world::load_world_file;
use ghostsim_core::{default_fixture_dir, World};

pub fn fixture_world(name: &str) -> World {
    load_world_file(default_fixture_dir().join(name)).expect("fixture world loads")
}
