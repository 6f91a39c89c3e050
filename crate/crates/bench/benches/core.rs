use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mwcz_bench::{default_model, short_pulse, xeb_records};
use mwcz_core::gate::gate_fidelity;
use mwcz_core::propagation::{propagate_computational, Integrator, PropagationOptions};
use mwcz_core::xeb::{correct_readout, joint_confusion, spb_purity, xeb_alpha, ConfusionMatrix};
use mwcz_core::GateResult;

fn propagation(c: &mut Criterion) {
    let (h, eig) = default_model();
    let pulse = short_pulse(10.0);
    let mut group = c.benchmark_group("propagate_10ns");
    group.sample_size(20);
    for (name, integrator) in [("split", Integrator::Split), ("exact", Integrator::Exact)] {
        let opts = PropagationOptions { dt: Some(0.004), stride: usize::MAX, integrator, ..Default::default() };
        group.bench_function(name, |b| {
            b.iter(|| propagate_computational(&eig, &h, black_box(&pulse), &opts).unwrap())
        });
    }
    group.finish();
}

fn fidelity(c: &mut Criterion) {
    let (h, eig) = default_model();
    let opts = PropagationOptions { stride: usize::MAX, ..Default::default() };
    let evo = propagate_computational(&eig, &h, &short_pulse(10.0), &opts).unwrap();
    let gate = GateResult::from_evolution(&evo, &eig).unwrap();
    c.bench_function("gate_fidelity", |b| b.iter(|| gate_fidelity(black_box(&gate.u_projected))));
    c.bench_function("project_computational", |b| b.iter(|| GateResult::from_evolution(black_box(&evo), &eig).unwrap()));
}

fn estimators(c: &mut Criterion) {
    let records = xeb_records(20, 500);
    c.bench_function("xeb_alpha_500", |b| b.iter(|| xeb_alpha(black_box(&records)).unwrap()));
    c.bench_function("spb_purity_500", |b| b.iter(|| spb_purity(black_box(&records)).unwrap()));

    let q1 = ConfusionMatrix::from_rows("Q1", &[vec![0.9050, 0.0632, 0.0318], vec![0.1633, 0.7779, 0.0588], vec![0.1383, 0.2005, 0.6612]]).unwrap();
    let q2 = ConfusionMatrix::from_rows("Q2", &[vec![0.8767, 0.0534, 0.0699], vec![0.1887, 0.7399, 0.0714], vec![0.1645, 0.1784, 0.6571]]).unwrap();
    let joint = joint_confusion(&[q1, q2]).unwrap().matrix;
    let raw = vec![1.0 / 9.0; 9];
    c.bench_function("correct_readout_9", |b| b.iter(|| correct_readout(black_box(&raw), &joint).unwrap()));
}

criterion_group!(benches, propagation, fidelity, estimators);
criterion_main!(benches);
