//! Writes a seeded synthetic credit dataset as CSV to standard output.
//!
//! Usage: `cargo run -p fairfront-core --example gen_dataset -- <rows> <seed>`

use fairfront::synth::{generate, to_csv, SynthSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let rows = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(42);
    let mut spec = SynthSpec::two_groups(rows, seed);
    spec.amounts = true;
    print!("{}", to_csv(&generate(&spec), "sex"));
}
