use gapnet as _; // pulls in the crate's BLAS backend for the linker
use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use std::time::Instant;

fn bench(m: usize, k: usize, n: usize, reps: usize) {
    let a = Array2::<f64>::from_elem((m, k), 1.003);
    let b = Array2::<f64>::from_elem((k, n), 0.997);
    let mut c = Array2::<f64>::zeros((m, n));
    general_mat_mul(1.0, &a, &b, 0.0, &mut c); // warm
    let t = Instant::now();
    for _ in 0..reps {
        general_mat_mul(1.0, &a, &b, 0.0, &mut c);
    }
    let secs = t.elapsed().as_secs_f64();
    let flops = 2.0 * (m * k * n * reps) as f64;
    println!("{}x{}x{} reps={} -> {:.2} GFLOP/s", m, k, n, reps, flops / secs / 1e9);
    // also transposed-B case (forward pass uses a . W^T)
    let bt = Array2::<f64>::from_elem((n, k), 0.997);
    let btv = bt.t();
    let t = Instant::now();
    for _ in 0..reps {
        general_mat_mul(1.0, &a, &btv, 0.0, &mut c);
    }
    let secs = t.elapsed().as_secs_f64();
    println!("   B-transposed -> {:.2} GFLOP/s", flops / secs / 1e9);
}

fn main() {
    bench(128, 2048, 2048, 20);
    bench(128, 4096, 4096, 10);
    bench(128, 16, 64, 2000);
    bench(4096, 128, 4096, 10); // dW shape
}
