//! Seeded randomness.
//!
//! Every stochastic stage draws from a ChaCha8 stream seeded by
//! [`substream_seed`], so a whole study is reproducible from one master seed
//! and independent jobs (experiments, bootstrap resamples) never share a
//! stream regardless of the order in which they run.
//!
//! Substream rule: `s = mix(master)`, then `s = mix(s ^ mix(tag))` for each
//! tag in order, where `mix` is the SplitMix64 finaliser.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};

pub type StudyRng = ChaCha8Rng;

/// Tag constants that separate the stages of a study.
pub mod tags {
    pub const SIMULATE: u64 = 0x53494d;
    pub const TRAINING_SPLIT: u64 = 0x545253;
    pub const BOOTSTRAP: u64 = 0x424f4f;
    pub const MULTISTART: u64 = 0x4d5354;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |s, &t| splitmix64(s ^ splitmix64(t)))
}

pub fn substream(master: u64, tags: &[u64]) -> StudyRng {
    StudyRng::seed_from_u64(substream_seed(master, tags))
}

/// One multinomial draw of `n` trials, by successive conditional binomials.
///
/// `probs` must be nonnegative and sum to one (the caller checks); the last
/// category takes whatever trials remain.
pub fn multinomial<R: rand::Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining_trials = n;
    let mut remaining_mass = 1.0;
    for (b, &p) in probs.iter().enumerate() {
        if remaining_trials == 0 {
            break;
        }
        if b + 1 == probs.len() {
            counts[b] = remaining_trials;
            break;
        }
        let cond = if remaining_mass > 0.0 { (p / remaining_mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if cond >= 1.0 {
            remaining_trials
        } else if cond <= 0.0 {
            0
        } else {
            Binomial::new(remaining_trials, cond).expect("valid binomial").sample(rng)
        };
        counts[b] = k;
        remaining_trials -= k;
        remaining_mass -= p;
    }
    counts
}

/// Draws `draws` items without replacement from a population described by
/// per-category `counts`; returns how many were taken from each category.
pub fn multivariate_hypergeometric<R: rand::Rng + ?Sized>(rng: &mut R, counts: &[u64], draws: u64) -> Vec<u64> {
    let mut population: u64 = counts.iter().sum();
    assert!(draws <= population, "cannot draw {draws} from {population}");
    let mut left = draws;
    let mut taken = vec![0u64; counts.len()];
    for (b, &k) in counts.iter().enumerate() {
        if left == 0 {
            break;
        }
        let x = if k == 0 {
            0
        } else if k == population {
            left
        } else {
            match Hypergeometric::new(population, k, left) {
                Ok(h) => h.sample(rng),
                Err(_) => {
                    // the library sampler underflows for some parameters;
                    // draw the rest one item at a time instead
                    let mut rest: Vec<u64> = counts[b..].to_vec();
                    for _ in 0..left {
                        let mut u = rng.random_range(0..population);
                        let slot = rest.iter().position(|&c| {
                            if u < c {
                                true
                            } else {
                                u -= c;
                                false
                            }
                        });
                        let slot = slot.expect("draw within population");
                        rest[slot] -= 1;
                        taken[b + slot] += 1;
                        population -= 1;
                    }
                    break;
                }
            }
        };
        taken[b] = x;
        left -= x;
        population -= k;
    }
    taken
}
