//! The bundled example games, embedded for tests and available to the CLI
//! as plain files under `corpus/`.

pub const COIN_FLIP: &str = include_str!("../corpus/coinflip.gs");
pub const GUESSING: &str = include_str!("../corpus/guessing.gs");
pub const RPS: &str = include_str!("../corpus/rps.gs");
pub const TICTACTOE_ARITH: &str = include_str!("../corpus/tictactoe_arith.gs");
pub const TICTACTOE_GRID: &str = include_str!("../corpus/tictactoe_grid.gs");
pub const CHOPSTICKS: &str = include_str!("../corpus/chopsticks.gs");

/// All bundled games as `(name, source)` pairs.
pub const ALL: &[(&str, &str)] = &[
    ("coinflip", COIN_FLIP),
    ("guessing", GUESSING),
    ("rps", RPS),
    ("tictactoe_arith", TICTACTOE_ARITH),
    ("tictactoe_grid", TICTACTOE_GRID),
    ("chopsticks", CHOPSTICKS),
];
