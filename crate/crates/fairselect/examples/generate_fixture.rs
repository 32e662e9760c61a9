//! Regenerates the bundled synthetic exam fixture.
//!
//! Usage: cargo run -p fairselect --example generate_fixture [DIR]
//!
//! Writes candidates.csv (5000 synthetic candidates with gender and
//! birth-category columns) and programs.csv (the 33 reference programs)
//! into DIR, default fixtures/jee_synthetic. Output is deterministic, so
//! rerunning must reproduce the committed files byte for byte.

use fairselect::ingest::write_synthetic_fixture;

const N: usize = 5000;
const SEED: u64 = 20090614;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures/jee_synthetic".to_string());
    write_synthetic_fixture(&dir, N, SEED).expect("fixture write failed");
    println!("wrote {N} candidates and 33 programs to {dir}");
}
