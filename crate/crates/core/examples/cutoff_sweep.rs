//! Prints the adaptive transition end `r_eps` for a range of budgets.
//!
//!   cargo run -p cuspforge-core --release --example cutoff_sweep

use cuspforge_core::warp::make_cutoff;

fn main() {
    for eps in [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005] {
        let start = std::time::Instant::now();
        match make_cutoff(eps) {
            Ok(cut) => println!("eps = {eps:<6} r_eps = {:.6}  ({:.2?})", cut.r_eps, start.elapsed()),
            Err(e) => println!("eps = {eps:<6} error: {e}"),
        }
    }
}
