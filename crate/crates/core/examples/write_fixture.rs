//! Writes a spiked GOE observation in the matrix-file format.
//!
//! Usage: `cargo run --example write_fixture -- <n> <seed> <lambda>... > out.txt`

use std::io;

use spikesel::cli::write_matrix;
use spikesel::ensembles::{assemble_observation, NoiseProfile, SpikeConfig};
use spikesel::montecarlo::derive_seed;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 {
        eprintln!("usage: write_fixture <n> <seed> <lambda>...");
        std::process::exit(2);
    }
    let n: usize = args[0].parse().expect("n");
    let seed: u64 = args[1].parse().expect("seed");
    let lambdas: Vec<f64> = args[2..].iter().map(|s| s.parse().expect("lambda")).collect();
    let spikes = SpikeConfig::new(lambdas, 1.0).expect("spikes");
    let mut rng = derive_seed(seed, 0).rng();
    let x = assemble_observation(&spikes, NoiseProfile::Goe, n, &mut rng).expect("sample");
    write_matrix(io::stdout().lock(), &x).expect("write");
}
