use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hornet_core::crypto::{mac, prg, prp_wide, public_key, Direction, PrgVariant};
use hornet_core::onion::add_layer_in_place;
use hornet_core::{Iv, Scalar, SymKey, NESTED_AHDR_LEN};

fn primitives(c: &mut Criterion) {
    let key = SymKey([7; 16]);
    let msg = [0u8; 336];
    c.bench_function("mac_336", |b| b.iter(|| black_box(mac(&key, &msg))));
    c.bench_function("prg_672", |b| {
        b.iter(|| black_box(prg(&key, PrgVariant::Zero, NESTED_AHDR_LEN).unwrap()))
    });
    c.bench_function("prp_32", |b| {
        b.iter(|| black_box(prp_wide(&key, &[1; 32], Direction::Forward).unwrap()))
    });
    let x = Scalar::from_u64(12345);
    c.bench_function("dh_public_key", |b| {
        b.iter(|| black_box(public_key(&x).unwrap()))
    });

    let mut g = c.benchmark_group("onion_layer");
    for len in [512usize, 1024, 1488] {
        let mut buf = vec![0u8; len];
        g.bench_with_input(BenchmarkId::from_parameter(len), &len, |b, _| {
            b.iter(|| black_box(add_layer_in_place(&key, &Iv([3; 16]), &mut buf).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, primitives);
criterion_main!(benches);
