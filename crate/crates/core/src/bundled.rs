//! The problem files shipped with the repository, embedded for tests and
//! available on disk under `specs/` for the CLI.

pub const EXAMPLE_3_8: &str = include_str!("../../../specs/example_3_8.spec");
pub const EXAMPLE_4_12: &str = include_str!("../../../specs/example_4_12.spec");
pub const EXAMPLE_4_15: &str = include_str!("../../../specs/example_4_15.spec");
pub const EXAMPLE_CYCLIC_SEQ: &str = include_str!("../../../specs/example_cyclic_seq.spec");

pub const ALL: [(&str, &str); 4] = [
    ("example_3_8", EXAMPLE_3_8),
    ("example_4_12", EXAMPLE_4_12),
    ("example_4_15", EXAMPLE_4_15),
    ("example_cyclic_seq", EXAMPLE_CYCLIC_SEQ),
];
