//! Seeded synthetic inputs for the benchmarks.

use bitext_core::bleu::TokenStream;
use bitext_core::margin::EmbeddingTable;
use bitext_core::{LanguageRegistry, SentencePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source/target tables where row `i` of the target is a noisy copy of
/// row `i` of the source.
pub fn embedding_pools(n: usize, dim: usize, seed: u64) -> (EmbeddingTable, EmbeddingTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let tgt: Vec<f64> = src.iter().map(|v| v + 0.5 * rng.gen_range(-1.0..1.0)).collect();
    (
        EmbeddingTable::new(dim, src).expect("valid table"),
        EmbeddingTable::new(dim, tgt).expect("valid table"),
    )
}

const WORDS: [&str; 16] = [
    "tiang", "lunga", "ka", "peken", "ibi", "sanja", "meme", "numbeg", "ring", "carik", "basa", "daerah", "madue",
    "sane", "soleh", "2024,",
];

fn sentence(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n` id-ban pairs of 2..30 words; roughly one in twenty is a duplicate.
pub fn pairs(n: usize, seed: u64) -> Vec<SentencePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reg = LanguageRegistry::default();
    let (id, ban) = (reg.get("id").unwrap().clone(), reg.get("ban").unwrap().clone());
    let mut out: Vec<SentencePair> = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let (src, tgt) = if i > 0 && rng.gen_bool(0.05) {
            let prev = &out[rng.gen_range(0..out.len())];
            (prev.src.text.clone(), prev.tgt.text.clone())
        } else {
            let len = rng.gen_range(2..30);
            let extra = rng.gen_range(0..4);
            (sentence(&mut rng, len), sentence(&mut rng, len + extra))
        };
        out.push(SentencePair::new(i, src, id.clone(), tgt, ban.clone(), "bench").unwrap());
    }
    out
}

/// Hypothesis/reference streams of `segments` segments over a small
/// vocabulary, so higher-order n-grams still match now and then.
pub fn bleu_streams(segments: usize, seed: u64) -> (TokenStream, TokenStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hyp = Vec::with_capacity(segments);
    let mut refs = Vec::with_capacity(segments);
    for _ in 0..segments {
        let len = rng.gen_range(5..40);
        let r: Vec<String> = (0..len)
            .map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string())
            .collect();
        let mut h = r.clone();
        for t in h.iter_mut() {
            if rng.gen_bool(0.2) {
                *t = WORDS[rng.gen_range(0..WORDS.len())].to_string();
            }
        }
        hyp.push(h);
        refs.push(r);
    }
    let stream = |segments| TokenStream {
        tokenizer_id: "whitespace".to_string(),
        segments,
    };
    (stream(hyp), stream(refs))
}
