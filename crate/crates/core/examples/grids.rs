//! Lists every collage layout the grid law allows for 1 to 10 frames.
//!
//!     cargo run --example grids

use seqscene::frames::{all_grids, enumerate_grids};
use seqscene::scene::MAX_FRAMES;

fn main() {
    for n in 1..=MAX_FRAMES {
        let grids: Vec<String> = enumerate_grids(n)
            .expect("frame count in range")
            .iter()
            .map(|g| format!("{}x{}", g.rows, g.cols))
            .collect();
        println!("{n:>2} frames: {}", grids.join(", "));
    }
    println!("{} layouts in total", all_grids().len());
}
