//! Neumann-series inverse Hessian-vector products and the implicit
//! hypergradient on a quadratic problem with a closed form.
//!
//! cargo run --release --example neumann_hypergrad

use lossforge::verify::{neumann_two_i_table, quadratic_hypergradient_check};

fn main() -> lossforge::Result<()> {
    println!("H = 2I, eta = 0.25, v = 1 (exact 0.5)");
    for row in neumann_two_i_table(8)? {
        println!("  order {:2}: {:.8}  error {:.2e}", row.order, row.value, row.error);
    }
    println!("quadratic lower level, d = 6");
    for order in [0, 5, 20, 80, 320] {
        let q = quadratic_hypergradient_check(6, order, 1)?;
        println!("  order {order:3}: relative error {:.2e}", q.rel_err);
    }
    Ok(())
}
