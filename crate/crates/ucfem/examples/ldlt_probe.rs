use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymmetricOrdering};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Par, Side};
use std::time::Instant;

fn main() {
    let m = 500usize;
    let n = m * m;
    let mut trips_full: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut trips_upper: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut signs = vec![1i8; n];
    for i in 0..m as i64 {
        for j in 0..m as i64 {
            let a = (i * m as i64 + j) as usize;
            let mut diag = 0.0;
            for di in -2..=2i64 {
                for dj in -2..=2i64 {
                    let (ii, jj) = (i + di, j + dj);
                    if ii < 0 || jj < 0 || ii >= m as i64 || jj >= m as i64 {
                        continue;
                    }
                    let b = (ii * m as i64 + jj) as usize;
                    if a != b {
                        let w = -1.0 / ((di * di + dj * dj) as f64);
                        trips_full.push(Triplet::new(a, b, w));
                        if a <= b {
                            trips_upper.push(Triplet::new(a, b, w));
                        }
                        diag -= w;
                    }
                }
            }
            let s = if (i + j) % 3 == 0 { -1.0 } else { 1.0 };
            signs[a] = if s < 0.0 { -1 } else { 1 };
            trips_full.push(Triplet::new(a, a, s * (diag + 1.0)));
            trips_upper.push(Triplet::new(a, a, s * (diag + 1.0)));
        }
    }
    let full = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips_full).unwrap();
    let upper = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips_upper).unwrap();
    println!("n = {}, nnz(upper) = {}", n, trips_upper.len());

    let t0 = Instant::now();
    let symbolic = factorize_symbolic_cholesky(
        upper.symbolic(),
        Side::Upper,
        SymmetricOrdering::Amd,
        Default::default(),
    )
    .unwrap();
    println!("symbolic: {:.2?}", t0.elapsed());

    let reg = LdltRegularization {
        dynamic_regularization_signs: Some(&signs),
        dynamic_regularization_delta: 1e-10,
        dynamic_regularization_epsilon: 1e-12,
    };
    let mut l_values = vec![0.0f64; symbolic.len_val()];
    let mut mem = MemBuffer::new(
        symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()),
    );
    let t1 = Instant::now();
    symbolic
        .factorize_numeric_ldlt(
            &mut l_values,
            upper.as_ref(),
            Side::Upper,
            reg,
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        )
        .unwrap();
    println!("numeric: {:.2?}", t1.elapsed());

    let ldlt = LdltRef::new(&symbolic, &l_values);
    let mut rhs = faer::Mat::<f64>::ones(n, 1);
    let mut solve_mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
    let t2 = Instant::now();
    ldlt.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(&mut solve_mem));
    println!("solve: {:.2?}", t2.elapsed());

    // residual check against the full matrix
    let b = faer::Mat::<f64>::ones(n, 1);
    let r = full.as_ref() * rhs.as_ref() - b.as_ref();
    let mut rn = 0.0f64;
    let mut bn = 0.0f64;
    for i in 0..n {
        rn += r[(i, 0)] * r[(i, 0)];
        bn += b[(i, 0)] * b[(i, 0)];
    }
    println!("rel residual = {:.3e}", (rn / bn).sqrt());

    // numeric refactorization with symbolic reuse
    let t3 = Instant::now();
    symbolic
        .factorize_numeric_ldlt(
            &mut l_values,
            upper.as_ref(),
            Side::Upper,
            reg,
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        )
        .unwrap();
    println!("numeric (reuse): {:.2?}", t3.elapsed());
}
