use num_complex::Complex64;
use proptest::prelude::*;
use tempfile::tempdir;

use polsar_pretrain::grid::Grid;
use polsar_pretrain::io::{
    self, checkpoint, config::RunConfig, cpxr, planes, query_blob, CompositeMode, CompositeSource, IoError, PlaneStack,
};
use polsar_pretrain::polsar::{PolsarRaster, RasterMetadata, ScatteringMatrix};
use polsar_pretrain::pretrain::{DecoderConfig, EncoderConfig, ModelParams};
use polsar_pretrain::queries::query_set;
use polsar_pretrain::scene::{synthesize_scene, SceneSpec};

fn arb_raster() -> impl Strategy<Value = PolsarRaster> {
    (1usize..6, 1usize..6).prop_flat_map(|(h, w)| {
        proptest::collection::vec(-1e6f32..1e6f32, h * w * 8).prop_map(move |v| {
            let pixels = v
                .chunks_exact(8)
                .map(|c| {
                    let z = |k: usize| Complex64::new(f64::from(c[2 * k]), f64::from(c[2 * k + 1]));
                    ScatteringMatrix::from_channels([z(0), z(1), z(2), z(3)])
                })
                .collect();
            PolsarRaster::new(h, w, pixels, RasterMetadata::default()).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn cpxr_round_trip_is_bit_identical(r in arb_raster()) {
        let bytes = cpxr::encode_cpxr(&r).unwrap();
        let back = cpxr::decode_cpxr(&bytes).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(cpxr::encode_cpxr(&back).unwrap(), bytes);
    }

    #[test]
    fn f64_planes_round_trip(h in 1usize..8, w in 1usize..8, v in proptest::collection::vec(any::<f64>(), 128)) {
        let grid = Grid::from_fn(h, w, |r, c| v[(r * w + c) % v.len()]);
        let stack = PlaneStack::f64(["a", "b"], vec![grid.clone(), grid]);
        let bytes = planes::encode_planes(&stack).unwrap();
        let back = planes::decode_planes(&bytes).unwrap();
        prop_assert_eq!(planes::encode_planes(&back).unwrap(), bytes);
        prop_assert_eq!(back.names, stack.names);
    }

    #[test]
    fn mask_planes_round_trip(h in 1usize..10, w in 1usize..10, seed in any::<u64>()) {
        let grid = Grid::from_fn(h, w, |r, c| ((seed >> ((r * w + c) % 64)) & 1) as u8);
        let stack = PlaneStack::u8(["m"], vec![grid]);
        let back = planes::decode_planes(&planes::encode_planes(&stack).unwrap()).unwrap();
        prop_assert_eq!(back, stack);
    }
}

#[test]
fn planes_reject_truncation_and_bad_magic() {
    let stack = PlaneStack::u8(["m"], vec![Grid::filled(3, 3, 1u8)]);
    let bytes = planes::encode_planes(&stack).unwrap();
    assert!(matches!(planes::decode_planes(&bytes[..bytes.len() - 1]), Err(IoError::Truncated { .. })));
    let mut bad = bytes.clone();
    bad[1] = b'?';
    assert!(matches!(planes::decode_planes(&bad), Err(IoError::BadMagic { .. })));
    assert!(matches!(cpxr::decode_cpxr(&bytes), Err(IoError::BadMagic { .. })));
}

#[test]
fn queries_round_trip() {
    let qs = query_set(8, 3).unwrap();
    let bytes = query_blob::encode_queries(&qs);
    let back = query_blob::decode_queries(&bytes).unwrap();
    assert_eq!(back, qs);
    assert!(query_blob::decode_queries(&bytes[..bytes.len() - 8]).is_err());
}

#[test]
fn checkpoint_round_trip_and_tamper_detection() {
    let enc = EncoderConfig { d: 8, patch: 2, layers: 2, seed: 5 };
    let params = ModelParams::init(enc, DecoderConfig { layers: 2 }).unwrap();
    let dir = tempdir().unwrap();
    let (blob, json) = io::save_checkpoint(&params, dir.path(), "m").unwrap();
    let back = io::load_checkpoint(&dir.path().join(&json)).unwrap();
    assert_eq!(back, params);
    assert_eq!(checkpoint::encode_blob(&back), checkpoint::encode_blob(&params));

    let blob_path = dir.path().join(blob);
    let mut bytes = std::fs::read(&blob_path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&blob_path, bytes).unwrap();
    assert!(io::load_checkpoint(&dir.path().join(&json)).is_err());
}

#[test]
fn config_round_trip_and_unknown_keys() {
    let cfg = RunConfig { lr: 0.03, seed: 9, ..Default::default() };
    let back = RunConfig::parse(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    assert_ne!(RunConfig::default().hash(), cfg.hash());
    assert!(matches!(RunConfig::parse("bogus = 1"), Err(IoError::Config(_))));
    assert!(matches!(RunConfig::parse("window = 4"), Err(IoError::Config(_))));
}

#[test]
fn loss_trace_round_trip() {
    let trace = vec![polsar_pretrain::pretrain::LossRecord { iter: 1, total: 0.3, yamaguchi: 0.2, power: 1.0 / 3.0 }];
    let dir = tempdir().unwrap();
    let p = dir.path().join("loss.csv");
    io::write_loss_csv(&trace, &p).unwrap();
    assert_eq!(io::read_loss_csv(&p).unwrap(), trace);
}

#[test]
fn composite_is_deterministic() {
    let raster = synthesize_scene(&SceneSpec::demo(12, 12), 8).unwrap();
    let a = io::emit_composite(CompositeSource::Raster(&raster), CompositeMode::Pauli).unwrap();
    let b = io::emit_composite(CompositeSource::Raster(&raster.clone()), CompositeMode::Pauli).unwrap();
    assert_eq!(a.to_ppm(), b.to_ppm());
    assert!(a.to_ppm().starts_with(b"P6\n12 12\n255\n"));
}
