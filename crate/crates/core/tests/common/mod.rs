#![allow(dead_code)]

pub mod server;

use permacc::corpus::{Dataset, Example, Label, TokenSeq};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLER: &[&str] = &[
    "man", "woman", "child", "dog", "street", "park", "ball", "car", "house", "tree", "river",
    "table", "shirt", "hat", "guitar", "stage", "crowd", "bench", "window", "door", "road",
    "field", "boat", "train", "bike", "camera", "phone", "book", "cup", "chair", "wall", "sky",
    "snow", "rain", "beach", "market", "kitchen", "garden", "bridge", "city", "hill", "lake",
    "store", "school", "office", "game", "team", "song", "dance", "picture",
];

const CUES: [&[&str]; 3] = [
    &["is", "outdoors", "someone", "a", "person"],
    &["tall", "sad", "because", "first", "friends"],
    &["nobody", "never", "sleeping", "no", "alone"],
];

fn sentence(rng: &mut ChaCha8Rng, len: usize, extra: &[&str]) -> TokenSeq {
    let mut words: Vec<String> = FILLER
        .choose_multiple(rng, len - extra.len())
        .map(|w| w.to_string())
        .collect();
    words.extend(extra.iter().map(|w| w.to_string()));
    words.shuffle(rng);
    TokenSeq::new(words).unwrap()
}

/// Synthetic NLI pairs with distinct-token sentences of `min_len..=max_len`
/// tokens. Each hypothesis carries a cue word for its gold label with
/// probability `signal`, and a cue for a random label otherwise.
pub fn fixture(name: &str, n: usize, seed: u64, min_len: usize, max_len: usize, signal: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let gold = Label::ALL[rng.gen_range(0..3)];
            let cue_label = if rng.gen_bool(signal) { gold } else { Label::ALL[rng.gen_range(0..3)] };
            let cue = *CUES[cue_label.index()].choose(&mut rng).unwrap();
            let plen = rng.gen_range(min_len..=max_len);
            let hlen = rng.gen_range(min_len..=max_len);
            Example {
                uid: format!("{name}-{i}"),
                premise: sentence(&mut rng, plen, &[]),
                hypothesis: sentence(&mut rng, hlen, &[cue]),
                gold,
            }
        })
        .collect();
    Dataset::new(name, examples).unwrap()
}
