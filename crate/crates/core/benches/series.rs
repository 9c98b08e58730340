use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64 as C64;

use cherednik::bethe_series::eval_e_with;
use cherednik::hat::HatVector;
use cherednik::par::Exec;
use cherednik::root_system::{multiplicity_orbits, CartanType, LatticeChoice, Multiplicity, RootSystem};
use cherednik::wmodules::ModuleRep;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn lattice_sum(cr: &mut Criterion) {
    let rs = RootSystem::new(CartanType::A(2), LatticeChoice::Coroot).unwrap();
    let k = Multiplicity::uniform(Arc::new(multiplicity_orbits(&rs)), c(0.4));
    let triv = ModuleRep::trivial(&rs);
    let v = HatVector::new(vec![c(0.2), c(-0.1), c(-0.1)], c(0.0), c(1.0));
    let lam = HatVector::new(vec![C64::new(0.3, 0.1), c(0.05), C64::new(-0.35, -0.1)], c(0.0), c(1.2));

    let mut group = cr.benchmark_group("eval_e_a2");
    group.sample_size(10);
    for target in [1e-6, 1e-10] {
        for (name, exec) in [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)] {
            group.bench_with_input(BenchmarkId::new(name, target), &target, |b, &t| {
                b.iter(|| eval_e_with(&rs, &v, &lam, &triv, &k, t, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, lattice_sum);
criterion_main!(benches);
