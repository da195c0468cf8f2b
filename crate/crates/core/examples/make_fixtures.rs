//! Regenerates the committed synthetic fixture bundle.
//!
//! cargo run -p repscope-core --example make_fixtures [DIR]

#[path = "../tests/support/bundle.rs"]
mod bundle;

use std::path::PathBuf;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bundle"));
    let manifest = bundle::write_bundle(&dir, &bundle::BundleOptions::default());
    println!("wrote {}", manifest.display());
}
