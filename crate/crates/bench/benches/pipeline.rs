use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spheroamb_core::sim::simulate_observation;
use spheroamb_core::spherical::encode_spherical;
use spheroamb_core::spheroidal::{encode_spheroidal, plane_wave_coeffs_spheroidal};
use spheroamb_core::swf::{build_table, radial, RadialKind};
use spheroamb_core::transcode::transcode;
use spheroamb_core::{ExperimentConfig, PrecisionMode, Rotation, SwfContext};

fn tables(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let k_a = cfg.spheroidal_c().unwrap();
    c.bench_function("build_table m=3 n=12", |b| {
        b.iter(|| build_table(3, 12, black_box(k_a), PrecisionMode::Double).unwrap())
    });
    c.bench_function("build_table m=3 n=12 extended", |b| {
        b.iter(|| build_table(3, 12, black_box(k_a), PrecisionMode::Extended).unwrap())
    });
    c.bench_function("context N=30", |b| {
        b.iter(|| SwfContext::build(black_box(k_a), 30, PrecisionMode::Double).unwrap())
    });
    let t = build_table(3, 12, k_a, PrecisionMode::Double).unwrap();
    c.bench_function("R3 at thin spheroid surface", |b| {
        b.iter(|| radial(RadialKind::Third, &t, black_box(1.001_252_3)).unwrap())
    });
    c.bench_function("R3 far field", |b| b.iter(|| radial(RadialKind::Third, &t, black_box(3.0)).unwrap()));
}

fn encoding(c: &mut Criterion) {
    let cfg = ExperimentConfig::preset("fig4").unwrap();
    let ctx = SwfContext::build(cfg.spheroidal_c().unwrap(), cfg.table_order(), cfg.precision).unwrap();
    let pw = cfg.wave(&cfg.incidences[0]).unwrap();
    let sphere = cfg.sphere_array().unwrap();
    let spheroid = cfg.spheroid_array().unwrap();
    let n_sim = 2 * cfg.order + 6;
    let p_sphere = simulate_observation(&pw, &sphere, n_sim, None).unwrap();
    let p_spheroid = simulate_observation(&pw, &spheroid, n_sim, Some(&ctx)).unwrap();

    c.bench_function("encode sphere N=12", |b| {
        b.iter(|| encode_spherical(black_box(&p_sphere), &sphere, pw.k, 12, 0.0).unwrap())
    });
    let mut g = c.benchmark_group("spheroid");
    g.sample_size(20);
    g.bench_function("encode spheroid N=12", |b| {
        b.iter(|| encode_spheroidal(black_box(&p_spheroid), &spheroid, &ctx, 12, 0.0).unwrap())
    });
    g.finish();

    let params = cfg.spheroid_params().unwrap();
    let local = pw.in_frame(&Rotation::local_z_to(cfg.spheroid.long_axis));
    let coeffs = plane_wave_coeffs_spheroidal(&local, &ctx, params.a, 12).unwrap();
    c.bench_function("transcode N=12", |b| b.iter(|| transcode(black_box(&coeffs), &ctx, 12, 12).unwrap()));
}

criterion_group!(benches, tables, encoding);
criterion_main!(benches);
