//! Turns captions into answer keys with the default schema and shows which
//! pattern decided each letter.
//!
//!     cargo run --example annotate

use seqscene::annotate::{extract, CategoryMatch};
use seqscene::scene::default_covla_schema;

const CAPTIONS: &[&str] = &[
    "The ego vehicle is moving straight at a high speed. A truck is ahead.",
    "The ego vehicle is stopped at a red light behind a car.",
    "The ego vehicle is turning left at an intersection while slowing down.",
    "A quiet road.",
];

fn main() {
    let schema = default_covla_schema();
    for caption in CAPTIONS {
        let e = extract(caption, &schema).expect("non-empty caption");
        println!("{}  {caption}", e.key);
        for (category, m) in schema.categories().iter().zip(&e.matched_spans) {
            match m {
                CategoryMatch::Matched { pattern, span } => println!("    {:<22} {span:?} via /{pattern}/", category.name),
                CategoryMatch::Defaulted => println!("    {:<22} (default)", category.name),
            }
        }
        if e.needs_curation {
            println!("    -> needs curation");
        }
    }
}
