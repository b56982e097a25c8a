//! Sequential versus data-parallel execution of the hot loops: coefficient
//! evaluation over a sampled chain and the uniformization product.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use splitkmc::oracle::{apply_exponential, build_dense};
use splitkmc::splitting::sample_chain;
use splitkmc::*;

fn coefficient_evaluation(c: &mut Criterion) {
    let model = RateModel::adsorption(AdsorptionDesorptionParams::default()).unwrap();
    let lattice = Lattice::square(8, 8).unwrap();
    let dec = Decomposition::build(&lattice, DecompositionKind::Blocks, 4).unwrap();
    let mut group = c.benchmark_group("coefficients_8x8");
    group.sample_size(10);
    for scheme in [SchemeSpec::lie(0.05).unwrap(), SchemeSpec::strang(0.05).unwrap()] {
        let start = SpinConfiguration::full(64);
        let mut engine = KmcEngine::new(&model, &dec, start.clone(), 1);
        let sample = sample_chain(&scheme, &mut engine, start, 2_100, 100, 1).unwrap();
        let est = CoefficientEstimator::new(&model, &dec, &scheme).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let id = BenchmarkId::new(scheme.kind.name(), format!("{exec:?}"));
            group.bench_with_input(id, &exec, |b, &exec| {
                b.iter(|| est.evaluate_sample(exec, &sample.states).unwrap())
            });
        }
    }
    group.finish();
}

fn uniformization(c: &mut Criterion) {
    let model = RateModel::adsorption(AdsorptionDesorptionParams::default()).unwrap();
    let lattice = Lattice::square(3, 3).unwrap();
    let dec = Decomposition::build(&lattice, DecompositionKind::Blocks, 1).unwrap();
    let chain = build_dense(&model, &dec).unwrap();
    let start = nalgebra::DMatrix::identity(chain.len(), chain.len());
    let mut group = c.benchmark_group("exponential_3x3");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| apply_exponential(exec, &start, chain.generator(), 0.1))
        });
    }
    group.finish();
}

criterion_group!(benches, coefficient_evaluation, uniformization);
criterion_main!(benches);
