use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use std::time::Instant;

fn main() {
    let n = 961 * 7; // 6727
    let w1 = Array2::<f64>::from_elem((64, 2), 0.1);
    let w2 = Array2::<f64>::from_elem((64, 64), 0.1);
    let x = Array2::<f64>::from_elem((2, n), 0.3);
    let mut z1 = Array2::<f64>::zeros((64, n));
    let mut z2 = Array2::<f64>::zeros((64, n));
    let reps = 200;

    let t = Instant::now();
    for _ in 0..reps {
        general_mat_mul(1.0, &w1, &x, 0.0, &mut z1);
        general_mat_mul(1.0, &w2, &z1, 0.0, &mut z2);
    }
    println!("2 GEMMs preallocated: {:.2} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);

    let t = Instant::now();
    for _ in 0..reps {
        let a = w1.dot(&x);
        let b = w2.dot(&a);
        std::hint::black_box(&b);
    }
    println!("2 GEMMs allocating:   {:.2} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);

    // tanh over all slices: 64 rows × 961 points × nc=7
    let t = Instant::now();
    for _ in 0..reps {
        let mut acc = 0.0f64;
        for row in z2.rows() {
            let row = row.to_slice().unwrap();
            for chunk in row.chunks_exact(7) {
                acc += chunk[0].tanh();
            }
        }
        std::hint::black_box(acc);
    }
    println!("bare tanh per slice:  {:.2} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);

    let t = Instant::now();
    for _ in 0..reps {
        let z = Array2::<f64>::zeros((64, n));
        std::hint::black_box(&z);
    }
    println!("zeros alloc 64x{n}:  {:.2} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);
}
