//! Minimum-cost assignment on square and rectangular cost matrices.
use mot_sort::assignment::{solve, CostMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let square = CostMatrix::from_rows(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])?;
    let r = solve(&square)?;
    println!("3x3: pairs {:?}, cost {}", r.pairs, r.total_cost);

    let tall = CostMatrix::from_rows(&[[5.0], [1.0], [9.0]])?;
    let r = solve(&tall)?;
    println!("3x1: pairs {:?}, unmatched rows {:?}", r.pairs, r.unmatched_rows);
    Ok(())
}
