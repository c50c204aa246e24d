use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DetectorVerdict;
use crate::normalization::CONFIDENCE_CEILING;

/// Confidence the random detector reports: certainty, clamped.
pub const RANDOM_DETECTOR_CONFIDENCE: f64 = CONFIDENCE_CEILING;

/// Fair coin flips reported with (clamped) full confidence.
pub fn random_detector(length: usize, seed: u64) -> Vec<DetectorVerdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..length)
        .map(|_| {
            let anomaly = rng.random::<bool>();
            DetectorVerdict {
                anomaly,
                raw_score: anomaly as u8 as f64,
                probability: if anomaly {
                    RANDOM_DETECTOR_CONFIDENCE
                } else {
                    1.0 - RANDOM_DETECTOR_CONFIDENCE
                },
                confidence: RANDOM_DETECTOR_CONFIDENCE,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(random_detector(100, 5), random_detector(100, 5));
        assert_ne!(random_detector(100, 5), random_detector(100, 6));
    }

    #[test]
    fn roughly_fair() {
        let v = random_detector(10_000, 1);
        let frac = v.iter().filter(|x| x.anomaly).count() as f64 / 1e4;
        assert!((0.47..=0.53).contains(&frac), "{frac}");
    }

    #[test]
    fn clamped_confidence() {
        assert!(random_detector(50, 2).iter().all(|x| x.confidence == 1.0 - 1e-9));
    }
}
