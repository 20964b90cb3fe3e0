use faer::sparse::{SparseColMat, Triplet};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::linalg::solvers::Solve;
use std::time::Instant;

fn main() {
    let m = 500usize; // grid side -> n = m*m nodes
    let n = m * m;
    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    // 2D locality: couple to neighbors within radius 2 (~25 nnz/row)
    for i in 0..m as i64 {
        for j in 0..m as i64 {
            let a = (i * m as i64 + j) as usize;
            let mut diag = 0.0;
            for di in -2..=2i64 {
                for dj in -2..=2i64 {
                    let (ii, jj) = (i + di, j + dj);
                    if ii < 0 || jj < 0 || ii >= m as i64 || jj >= m as i64 { continue; }
                    let b = (ii * m as i64 + jj) as usize;
                    if a != b {
                        let w = -1.0 / ((di * di + dj * dj) as f64);
                        trips.push(Triplet::new(a, b, w));
                        diag -= w;
                    }
                }
            }
            // make it indefinite like a saddle system
            let s = if (i + j) % 3 == 0 { -1.0 } else { 1.0 };
            trips.push(Triplet::new(a, a, s * (diag + 1.0)));
        }
    }
    println!("n = {}, nnz = {}", n, trips.len());
    let t0 = Instant::now();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).unwrap();
    println!("build: {:.2?}", t0.elapsed());
    let t1 = Instant::now();
    let sym = SymbolicLu::try_new(mat.symbolic()).unwrap();
    println!("symbolic: {:.2?}", t1.elapsed());
    let t2 = Instant::now();
    let lu = Lu::try_new_with_symbolic(sym.clone(), mat.as_ref()).unwrap();
    println!("numeric: {:.2?}", t2.elapsed());
    let t3 = Instant::now();
    let mut rhs = faer::Mat::<f64>::ones(n, 1);
    lu.solve_in_place(rhs.as_mut());
    println!("solve: {:.2?}", t3.elapsed());
    // second numeric factorization (symbolic reuse)
    let t4 = Instant::now();
    let _lu2 = Lu::try_new_with_symbolic(sym, mat.as_ref()).unwrap();
    println!("numeric (reuse): {:.2?}", t4.elapsed());
    println!("x[0] = {}", rhs[(0, 0)]);
}
