// Complete decoupling has no upper bound: for `d_1 = ... = d_n ~ Ber(p)` the ratio
// `E(Σd)² / E(Σz)² = n / (np + 1 − p)` grows without limit as `p → 0`.

use decouple::{complete_decouple, gallery, GalleryParams};

pub fn run_example() -> decouple::Result<()> {
    println!(
        "{:>6} {:>8} {:>14} {:>14}",
        "n", "p", "enumerated", "closed form"
    );
    for (n, p) in [(10, 0.1), (100, 0.01), (1000, 1e-3), (1000, 1e-4)] {
        let tree = gallery(
            "comonotone_bernoulli",
            &GalleryParams {
                n: Some(n),
                p: Some(p),
                ..Default::default()
            },
        )?;
        let d2 = tree.sum_law()?.second_moment();
        let z2 = complete_decouple(&tree)?.sum_second_moment();
        let closed = n as f64 / (n as f64 * p + 1.0 - p);
        println!("{n:>6} {p:>8} {:>14.6} {:>14.6}", d2 / z2, closed);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
