use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_TEXT_WIDTH: usize = 300;
pub const NUM_BUCKETS: usize = 4096;
pub const MIN_NGRAM: usize = 3;
pub const MAX_NGRAM: usize = 5;
const DEFAULT_SEED: u64 = 0x5eed_7e47;

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Character n-grams (lengths 3 to 5) of every lowercase word, each word
/// wrapped in `<` and `>` boundary markers.
pub fn char_ngrams(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let chars: Vec<char> = format!("<{}>", word.to_lowercase()).chars().collect();
        for n in MIN_NGRAM..=MAX_NGRAM {
            for window in chars.windows(n) {
                out.push(window.iter().collect());
            }
        }
    }
    out
}

/// Deterministic subword-hashing text encoder: the L2-normalized mean of
/// the bucket vectors of a text's character n-grams.
#[derive(Clone, Debug)]
pub struct TextEmbedder {
    width: usize,
    table: Vec<f64>,
}

impl TextEmbedder {
    pub fn new(width: usize) -> Self {
        Self::with_seed(width, DEFAULT_SEED)
    }

    pub fn with_seed(width: usize, seed: u64) -> Self {
        assert!(width >= 1, "text width must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = (0..NUM_BUCKETS * width).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { width, table }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bucket(ngram: &str) -> usize {
        (fnv1a64(ngram.as_bytes()) % NUM_BUCKETS as u64) as usize
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        let grams = char_ngrams(text);
        if grams.is_empty() {
            return out;
        }
        for g in &grams {
            let b = Self::bucket(g);
            let slot = &self.table[b * self.width..(b + 1) * self.width];
            out.iter_mut().zip(slot).for_each(|(o, s)| *o += s);
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
        out
    }
}
