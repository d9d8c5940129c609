use criterion::{black_box, criterion_group, criterion_main, Criterion};
use hdm_core::audio::{pitch_shift, resample, time_stretch};
use hdm_core::corpus::HdmEvent;
use hdm_core::eval::student_t_sf;
use hdm_core::synth::{synthesize, SynthConfig};
use hdm_core::timeline::{build_dataset, propagate_labels};
use hdm_core::{SamplingConfig, Waveform};

fn tone(seconds: f64, rate: u32) -> Waveform {
    let n = (seconds * f64::from(rate)) as usize;
    let samples = (0..n)
        .map(|i| (0.3 * (2.0 * std::f64::consts::PI * 220.0 * i as f64 / f64::from(rate)).sin()) as f32)
        .collect();
    Waveform::new(samples, rate).unwrap()
}

fn dsp(c: &mut Criterion) {
    let clip = tone(4.0, 16_000);
    let hi = tone(4.0, 44_100);
    c.bench_function("resample 44.1k->16k 4s", |b| b.iter(|| resample(black_box(&hi), 16_000)));
    c.bench_function("time_stretch 1.25 4s", |b| b.iter(|| time_stretch(black_box(&clip), 1.25).unwrap()));
    c.bench_function("pitch_shift +3 4s", |b| b.iter(|| pitch_shift(black_box(&clip), 3.0).unwrap()));
}

fn timeline(c: &mut Criterion) {
    let events: Vec<HdmEvent> = (0..10)
        .map(|i| HdmEvent {
            conversation_id: "c".into(),
            start_s: 5.0 * f64::from(i) + 1.0,
            end_s: 5.0 * f64::from(i) + 1.8,
        })
        .collect();
    c.bench_function("propagate_labels 60s 10ms", |b| {
        b.iter(|| propagate_labels(black_box(&events), 60.0, 10).unwrap())
    });
    let data = synthesize(&SynthConfig {
        conversations: 50,
        with_audio: false,
        ..SynthConfig::default()
    })
    .unwrap();
    let config = SamplingConfig::default();
    c.bench_function("build_dataset 50 convs", |b| {
        b.iter(|| build_dataset(black_box(&data.corpus), &data.events, &config).unwrap())
    });
}

fn stats(c: &mut Criterion) {
    c.bench_function("student_t_sf", |b| b.iter(|| student_t_sf(black_box(2.3), black_box(4.0))));
}

criterion_group!(benches, dsp, timeline, stats);
criterion_main!(benches);
