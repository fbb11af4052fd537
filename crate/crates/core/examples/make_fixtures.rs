//! Regenerates the committed test fixtures.
//!
//! `cargo run -p scorecam-core --example make_fixtures -- [out_dir]`

use std::path::PathBuf;

use scorecam_core::io::{save_model, tensor_to_pnm};
use scorecam_core::synthetic::{tiny_cnn, tiny_image, FIXTURE_IMAGE_SEED, FIXTURE_MODEL_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));
    std::fs::create_dir_all(&dir)?;
    save_model(&tiny_cnn(FIXTURE_MODEL_SEED), dir.join("tiny_cnn.scam"))?;
    for (i, seed) in [FIXTURE_IMAGE_SEED, FIXTURE_IMAGE_SEED + 1].into_iter().enumerate() {
        let name = if i == 0 {
            "tiny.ppm".to_string()
        } else {
            format!("tiny{i}.ppm")
        };
        std::fs::write(dir.join(name), tensor_to_pnm(&tiny_image(seed, 32))?.encode())?;
    }
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
