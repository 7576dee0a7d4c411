//! Desk-scale environments shipped with the repository.

/// Row of pillars with the goal behind it; one hidden pillar past the east end.
pub const ENV1: &str = include_str!("../../../configs/env1.toml");
/// Wall of pillars between start and goal; a hidden pillar blocks the north end.
pub const ENV2: &str = include_str!("../../../configs/env2.toml");
/// Pinned experiment suite.
pub const FIGS_SUITE: &str = include_str!("../../../configs/figs.toml");

/// Suite parameters as a standalone file.
pub const PARAMS: &str = include_str!("../../../configs/params.toml");

/// Shipped world text by file name, as referenced from the suite.
pub fn env(file: &str) -> Option<&'static str> {
    match file {
        "env1.toml" => Some(ENV1),
        "env2.toml" => Some(ENV2),
        _ => None,
    }
}
