use ndarray::Array2;
use std::time::Instant;

fn main() {
    let n: usize = 6727;
    let w = Array2::<f64>::from_elem((64, 64), 0.25);
    let a_wide = Array2::<f64>::from_elem((64, n), 0.5);
    let a_tall = Array2::<f64>::from_elem((n, 64), 0.5);
    let flops = (n * 64 * 64 * 2) as f64;
    let reps = 100;

    let mut c = w.dot(&a_wide);
    let t = Instant::now();
    for _ in 0..reps { c = w.dot(&a_wide); }
    println!("(64x64)·(64x{n}):   {:.2} GFLOPs (sink {})", flops * reps as f64 / t.elapsed().as_secs_f64() / 1e9, c[[0,0]]);

    let mut c2 = a_tall.dot(&w);
    let t = Instant::now();
    for _ in 0..reps { c2 = a_tall.dot(&w); }
    println!("({n}x64)·(64x64):   {:.2} GFLOPs (sink {})", flops * reps as f64 / t.elapsed().as_secs_f64() / 1e9, c2[[0,0]]);

    // transposed-view route for the wide case: compute C^T = A^T · W^T
    let t = Instant::now();
    let mut c3 = a_wide.t().dot(&w.t());
    for _ in 0..reps { c3 = a_wide.t().dot(&w.t()); }
    println!("wide via transposed views: {:.2} GFLOPs (sink {})", flops * reps as f64 / t.elapsed().as_secs_f64() / 1e9, c3[[0,0]]);
}
