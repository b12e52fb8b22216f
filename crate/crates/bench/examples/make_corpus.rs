//! Regenerates the bundled NAB-format sample corpus.
//!
//! ```text
//! cargo run -p tslab-bench --example make_corpus -- crates/bench/data/nab
//! ```

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tslab_bench::synth::{base, inject, Archetype, BaseShape};

const SERIES: usize = 10;
const STEP: i64 = 300;
const DAYS: usize = 10;
/// 2024-03-01 00:00:00 UTC.
const START: i64 = 1_709_251_200;

fn main() -> std::io::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "data/nab".into());
    std::fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20240301);
    let n = DAYS * 86_400 / STEP as usize;
    let period = 86_400 / STEP as usize;
    for k in 0..SERIES {
        let shape = BaseShape {
            n,
            step: STEP,
            period,
            level: rng.random_range(20.0..80.0),
            amplitude: rng.random_range(3.0..10.0),
            noise_sd: rng.random_range(0.5..1.5),
        };
        let mut s = base(&shape, START, &mut rng);
        // One anomaly in the training half, two in the test half.
        let slots = [(n / 8, n * 3 / 8), (n / 2 + n / 16, n * 3 / 4), (n * 3 / 4 + n / 32, n - n / 16)];
        for (lo, hi) in slots {
            let kind = Archetype::ALL[rng.random_range(0..3)];
            let at = rng.random_range(lo..hi);
            let len = rng.random_range(12..48);
            let size = rng.random_range(6.0..10.0);
            inject(&mut s, kind, at, len, size, shape.noise_sd, &mut rng);
        }
        s.write_csv(&out.join(format!("series_{k:02}.csv")))?;
    }
    Ok(())
}
