//! Compares the default entry points against their single-threaded
//! variants. With the `parallel` feature off both sides run the same
//! code, which makes the overhead of the wrappers visible.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use helicon::classify::{train_forest, train_forest_seq, FeatureVector, ForestParams, Role};
use helicon::midi::{Note, TimeSigMap};
use helicon::spiral::{KeyId, Mode, SpiralParams};
use helicon::tension::{compute_tension, compute_tension_seq};
use helicon::tonal::{spell_notes, SpellingClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn long_piece(beats: usize) -> Vec<Note> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut notes = Vec::new();
    for beat in 0..beats {
        for _ in 0..3 {
            notes.push(Note {
                onset_beats: beat as f64 + rng.gen_range(0..4) as f64 * 0.25,
                duration_beats: 0.5,
                pitch: rng.gen_range(40..84),
                velocity: 80,
                track: 0,
                channel: 0,
            });
        }
    }
    notes
}

fn bench_tension(c: &mut Criterion) {
    let notes = long_piece(2048);
    let spelled = spell_notes(&notes, SpellingClass::Sharps);
    let key = KeyId { fifth_index: 0, mode: Mode::Major };
    let sigs = TimeSigMap::default();
    let params = SpiralParams::default();

    let mut group = c.benchmark_group("tension_2048_beats");
    group.bench_function("default", |b| {
        b.iter(|| compute_tension(&spelled, key, 2.0, &sigs, &params))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| compute_tension_seq(&spelled, key, 2.0, &sigs, &params))
    });
    group.finish();
}

fn random_training_set(n: usize) -> (Vec<FeatureVector>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_bool(0.5);
        let mut values = [0.0f64; 30];
        for v in values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        values[2] += if label { 1.0 } else { -1.0 };
        features.push(FeatureVector { values });
        labels.push(label);
    }
    (features, labels)
}

fn bench_training(c: &mut Criterion) {
    let (features, labels) = random_training_set(400);
    let params = ForestParams { n_trees: 40, ..ForestParams::default() };

    let mut group = c.benchmark_group("train_400x40");
    group.sample_size(10);
    group.bench_function("default", |b| {
        b.iter_batched(
            || (),
            |_| train_forest(&features, &labels, Role::Melody, params).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.bench_function("sequential", |b| {
        b.iter_batched(
            || (),
            |_| train_forest_seq(&features, &labels, Role::Melody, params).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_tension, bench_training);
criterion_main!(benches);
