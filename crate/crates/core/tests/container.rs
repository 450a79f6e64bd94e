use proptest::prelude::*;
use rtvc::error::{ContainerError, Error};
use rtvc::nn::{sparsify, BlockSparse, Matrix};
use rtvc::rng::RngStream;
use rtvc::runtime::{init_random, read_container, write_container, ModelBundle, Preset, Tensor};

fn tensor(kind: u8, rows: usize, cols: usize, density: f64, seed: u64) -> Tensor {
    let mut rng = RngStream::with_stream_id(seed, 0);
    match kind {
        0 => Tensor::Dense(Matrix::random(rows, cols, 1.0, &mut rng)),
        1 => Tensor::Csr(sparsify(&Matrix::random(rows, cols, 1.0, &mut rng), density).unwrap()),
        _ => Tensor::Block(BlockSparse::prune(&Matrix::random(16 * rows, cols, 1.0, &mut rng), density).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_tensors_round_trip(
        specs in prop::collection::vec((0u8..3, 1usize..20, 1usize..20, 0.05f64..1.0, any::<u64>()), 0..6),
        tag in "[a-z]{0,8}",
    ) {
        let tensors: Vec<(String, Tensor)> = specs
            .iter()
            .enumerate()
            .map(|(i, &(k, r, c, d, s))| (format!("t{i}"), tensor(k, r, c, d, s)))
            .collect();
        let meta = serde_json::json!({ "tag": tag });
        let bytes = write_container(&meta, &tensors).unwrap();
        let (m, back) = read_container(&bytes).unwrap();
        prop_assert_eq!(m, meta);
        prop_assert_eq!(back, tensors);
    }

    #[test]
    fn flipped_payload_bit_is_rejected(pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let t = vec![("w".to_string(), tensor(0, 8, 8, 1.0, 1))];
        let mut bytes = write_container(&serde_json::json!({}), &t).unwrap();
        // payload and checksum; metadata is JSON and not checksummed
        let meta_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let start = 12 + meta_len + 8;
        let i = start + pos.index(bytes.len() - start);
        bytes[i] ^= 1 << bit;
        prop_assert!(read_container(&bytes).is_err());
    }
}

#[test]
fn bundle_survives_a_file_round_trip() {
    let b = init_random(5, Preset::Toy).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.mwvc");
    b.save(&path).unwrap();
    let back = ModelBundle::load(&path).unwrap();
    assert_eq!(back.to_bytes().unwrap(), b.to_bytes().unwrap());
}

#[test]
fn bundle_with_a_missing_tensor_is_rejected() {
    let b = init_random(5, Preset::Toy).unwrap();
    let (meta, mut tensors) = read_container(&b.to_bytes().unwrap()).unwrap();
    tensors.retain(|(n, _)| n != "vocoder.head.bias");
    let bytes = write_container(&meta, &tensors).unwrap();
    match ModelBundle::from_bytes(&bytes) {
        Err(Error::Container(ContainerError::MissingTensor(n))) => assert_eq!(n, "vocoder.head.bias"),
        other => panic!("expected a missing tensor, got {other:?}"),
    }
}
