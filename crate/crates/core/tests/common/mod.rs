#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use radical_nmt::data::{EncodedBatch, EncodedSource};
use radical_nmt::{CompositionSetting, DecompositionTable, ModelDims, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_table() -> DecompositionTable {
    DecompositionTable::parse(&std::fs::read_to_string(fixture("decomposition.tsv")).unwrap()).unwrap()
}

pub fn micro_dims() -> ModelDims {
    ModelDims {
        emb: 8,
        hidden: 12,
        word_vocab: 15,
        char_vocab: 18,
        radical_vocab: 16,
        target_vocab: 20,
    }
}

/// Random model whose biases are also non-zero, so every path is exercised.
pub fn random_model(setting: CompositionSetting, dims: ModelDims, seed: u64) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(setting, dims, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (_, mut t) in p.tensors_mut() {
        t.mapv_inplace(|v| v * 4.0 + rng.random_range(-0.1..0.1));
    }
    p
}

pub fn random_source(dims: &ModelDims, len: usize, rng: &mut impl Rng) -> EncodedSource {
    let mut s = EncodedSource {
        words: Vec::new(),
        chars: Vec::new(),
        radicals: Vec::new(),
    };
    for _ in 0..len {
        s.words.push(rng.random_range(1..dims.word_vocab as u32));
        let m = rng.random_range(1..=3);
        s.chars.push((0..m).map(|_| rng.random_range(1..dims.char_vocab as u32)).collect());
        let n = rng.random_range(m..=m + 3);
        s.radicals.push((0..n).map(|_| rng.random_range(1..dims.radical_vocab as u32)).collect());
    }
    s
}

pub fn random_target(dims: &ModelDims, len: usize, rng: &mut impl Rng) -> Vec<u32> {
    (0..len).map(|_| rng.random_range(4..dims.target_vocab as u32)).collect()
}

/// A batch of `n` random sentences of varying lengths (so padding occurs).
pub fn random_batch(dims: &ModelDims, n: usize, rng: &mut impl Rng) -> EncodedBatch {
    let sources: Vec<EncodedSource> = (0..n)
        .map(|_| {
            let len = rng.random_range(1..=5);
            random_source(dims, len, rng)
        })
        .collect();
    let targets: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let len = rng.random_range(1..=4);
            random_target(dims, len, rng)
        })
        .collect();
    EncodedBatch::new(&sources, &targets).unwrap()
}
