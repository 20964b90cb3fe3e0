//! Serial versus data-parallel element loops. The `parallel` feature gates
//! the rayon path; `par::set_parallel` toggles it at runtime so one binary
//! benchmarks both modes. Without the feature both rows measure the serial
//! fallback.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ucfem::fem::{
    assemble_saddle, build_dofmap, triple_norm, CoefficientField, DatasetData, FeFunction,
    MixedSpaces, SpaceDescriptor,
};
use ucfem::mesh::{tag_triangles, unit_disc_mesh, RegionSpec};
use ucfem::par;

struct Setup {
    spaces: MixedSpaces,
    gamma: CoefficientField,
    q: FeFunction,
    f: FeFunction,
    sol: Vec<f64>,
}

fn setup() -> Setup {
    let mesh = Arc::new(tag_triangles(
        unit_disc_mesh(0.06).expect("mesh"),
        RegionSpec::omega_disc(),
    ));
    let spaces = MixedSpaces::build(&mesh, 2).expect("spaces");
    let v1 = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).expect("dofmap");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let coeffs: Vec<f64> = (0..v1.ndofs).map(|_| rng.random_range(0.5..2.0)).collect();
    let gamma = CoefficientField::new(v1.clone(), coeffs, 1e-6);
    let q = FeFunction::new(
        v1.clone(),
        (0..v1.ndofs).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );
    let f = FeFunction::new(
        v1.clone(),
        (0..v1.ndofs).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );
    let n = spaces.offsets()[3];
    let sol: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Setup { spaces, gamma, q, f, sol }
}

fn modes() -> [(&'static str, bool); 2] {
    [("serial", false), ("parallel", true)]
}

fn bench_assembly(c: &mut Criterion) {
    let s = setup();
    let mut group = c.benchmark_group("assemble_saddle_k2");
    for (label, enabled) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(label), &enabled, |b, &enabled| {
            par::set_parallel(enabled);
            let data = DatasetData { q_tilde: &s.q, f_tilde: &s.f, neumann: None };
            b.iter(|| assemble_saddle(&s.spaces, &s.gamma, 1000.0, 1e-3, &data).expect("assembly"));
        });
    }
    group.finish();
    par::set_parallel(true);
}

fn bench_triple_norm(c: &mut Criterion) {
    let s = setup();
    let mut group = c.benchmark_group("triple_norm_k2");
    for (label, enabled) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(label), &enabled, |b, &enabled| {
            par::set_parallel(enabled);
            b.iter(|| triple_norm(&s.spaces, &s.gamma, 1000.0, 1e-3, &s.sol));
        });
    }
    group.finish();
    par::set_parallel(true);
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_assembly, bench_triple_norm
}
criterion_main!(benches);
