//! Independent random streams derived from one master seed.
//!
//! cargo run --example seed_streams -- [master]

use label_noise_lab::rng::{derive_seed, stream_table};

fn main() {
    let master = std::env::args().nth(1).map_or(0, |s| s.parse().expect("master seed"));
    for s in stream_table(master) {
        println!("{:<12} id {}  seed {:#018x}", s.stream.name(), s.id, s.seed);
    }
    // Heatmap cells use the path (row, column, seed index).
    for (row, col, k) in [(0, 0, 0), (0, 0, 1), (1, 0, 0)] {
        println!("cell ({row}, {col}) seed {k}: {:#018x}", derive_seed(master, &[row, col, k]));
    }
}
