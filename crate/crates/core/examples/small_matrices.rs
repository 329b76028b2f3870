//! Fixed-capacity matrix kernels: products, Cholesky and the SPD inverse.
use mot_sort::smallmat::{cholesky, inverse_spd, matmul, transpose, Mat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Mat::from_rows(&[[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]])?;
    let l = cholesky(&a)?;
    println!("L = {l:?}");
    println!("L·Lᵀ - A max diff = {:e}", matmul(&l, &transpose(&l))?.max_abs_diff(&a)?);

    let inv = inverse_spd(&a)?;
    let eye = matmul(&a, &inv)?;
    println!("A·A⁻¹ - I max diff = {:e}", eye.max_abs_diff(&Mat::identity(3))?);
    Ok(())
}
