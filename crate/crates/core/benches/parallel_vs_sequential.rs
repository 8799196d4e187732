use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use vfield::field::digest_all;
use vfield::vtree::build_from_matrix;
use vfield::{AttributeMatrix, AttributeName, AttributeValue, FileField, FileId, MissingPolicy, Strategy};

const STRATEGIES: [(&str, Strategy); 2] = [("sequential", Strategy::Sequential), ("parallel", Strategy::Parallel)];

fn corpus(n: usize, len: usize) -> Vec<(Vec<u8>, String)> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(42);
    (0..n)
        .map(|i| ((0..len).map(|_| rng.gen()).collect(), format!("f{i}")))
        .collect()
}

fn digest_batch(c: &mut Criterion) {
    let items = corpus(256, 64 * 1024);
    let mut group = c.benchmark_group("digest_batch");
    group.throughput(Throughput::Bytes((256 * 64 * 1024) as u64));
    for (name, s) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, &s| {
            b.iter(|| digest_all(black_box(&items), s))
        });
    }
    group.finish();
}

fn verify_field(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let mut field = FileField::new(vfield::field::BlobStore::new(dir.path()));
    field.add_files(&corpus(128, 256 * 1024), Strategy::default()).unwrap();
    let mut group = c.benchmark_group("verify_field");
    group.throughput(Throughput::Bytes((128 * 256 * 1024) as u64));
    for (name, s) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, &s| {
            b.iter(|| assert!(field.verify_field(s).is_clean()))
        });
    }
    group.finish();
}

fn build_auto(c: &mut Criterion) {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let rows = 50_000;
    let labels: Vec<AttributeValue> = (0..20).map(|i| AttributeValue::new(format!("v{i:02}")).unwrap()).collect();
    let m = AttributeMatrix {
        file_ids: (1..=rows as u64).map(FileId).collect(),
        attributes: ["a", "b", "c"].map(|a| AttributeName::new(a).unwrap()).to_vec(),
        cells: (0..rows)
            .map(|_| (0..3).map(|_| Some(labels[rng.gen_range(0..labels.len())].clone())).collect())
            .collect(),
    };
    let mut group = c.benchmark_group("build_auto");
    group.throughput(Throughput::Elements(rows as u64));
    for (name, s) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, &s| {
            b.iter(|| build_from_matrix("bench", black_box(&m), MissingPolicy::Skip, s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, digest_batch, verify_field, build_auto);
criterion_main!(benches);
