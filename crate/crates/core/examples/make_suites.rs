//! Regenerates the checked-in evaluation suites under `suites/`.
//!
//! Run from the workspace root:
//!
//! ```text
//! cargo run -p ued-core --example make_suites
//! ```

use std::path::Path;

use ued_core::metrics::maze_eval_suite;

fn main() {
    let dir = Path::new("suites");
    std::fs::create_dir_all(dir).expect("create suites/");
    let suite = maze_eval_suite(0);
    let path = dir.join("maze_eval.json");
    suite.save(&path).expect("write maze_eval.json");
    println!("wrote {} ({} levels)", path.display(), suite.levels.len());
}
