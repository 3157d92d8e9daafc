//! Synthetic topic triplets: anchor and positive share a topic word, the
//! hard negative carries a different topic. Everything else is filler drawn
//! from a shared pool, so the topic word is the only useful signal.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NliTriplet;

pub const TOPICS: [&str; 10] = [
    "kitchen", "garden", "beach", "office", "gym", "forest", "street", "library", "stadium", "bakery",
];

const FILLER: [&str; 24] = [
    "person", "people", "scene", "video", "shows", "someone", "moving", "slowly", "quickly", "near",
    "camera", "light", "shot", "wide", "close", "view", "background", "standing", "walking", "looking",
    "around", "busy", "quiet", "bright",
];

const FILLER_PER_SENTENCE: usize = 4;

fn sentence(topic: &str, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<&str> = FILLER.choose_multiple(rng, FILLER_PER_SENTENCE).copied().collect();
    words.push(topic);
    words.shuffle(rng);
    words.join(" ")
}

/// `n` triplets; the topic of triplet i is drawn at random.
pub fn topic_triplets(n: usize, seed: u64) -> Vec<NliTriplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.gen_range(0..TOPICS.len());
            let mut other = rng.gen_range(0..TOPICS.len() - 1);
            if other >= t {
                other += 1;
            }
            NliTriplet {
                anchor: sentence(TOPICS[t], &mut rng),
                positive: sentence(TOPICS[t], &mut rng),
                negative: sentence(TOPICS[other], &mut rng),
            }
        })
        .collect()
}

/// The topic word of a synthetic sentence.
pub fn topic_of(text: &str) -> Option<&'static str> {
    TOPICS
        .iter()
        .copied()
        .find(|t| text.split_whitespace().any(|w| w == *t))
}
