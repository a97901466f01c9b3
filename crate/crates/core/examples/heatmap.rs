//! Test accuracy of both trainers across an SNR by sample-size grid.
//!
//! cargo run --release --example heatmap -- [steps]

use label_noise_lab::experiments::{run_heatmap, SweepGrid};

fn main() -> label_noise_lab::error::Result<()> {
    let mut grid = SweepGrid::desk(0);
    if let Some(steps) = std::env::args().nth(1) {
        grid.steps = steps.parse().expect("steps");
    }
    let h = run_heatmap(&grid)?;

    print!("{:>6}", "snr");
    for n in &grid.n_values {
        print!("  {:>17}", format!("n = {n}"));
    }
    println!();
    for (row, snr) in grid.snr_values.iter().enumerate() {
        print!("{snr:>6}");
        for col in 0..grid.n_values.len() {
            let c = h.cell(row, col);
            print!("  {:.3} -> {:.3}    ", c.gd.mean, c.lngd.mean);
        }
        println!();
    }
    println!("(standard GD -> label-noise GD, mean over {} seeds)", grid.seeds_per_cell);
    Ok(())
}
