//! Inverted dropout.

use rand::Rng as _;

use crate::rng::Rng;

/// Zeroes each entry with probability `rate` and scales survivors by
/// `1 / (1 - rate)`. Returns the applied multiplier per entry, or `None`
/// when nothing was done (inference, or `rate == 0`).
pub fn apply_dropout(values: &mut [f64], rate: f64, rng: &mut Rng, training: bool) -> Option<Vec<f64>> {
    debug_assert!((0.0..1.0).contains(&rate));
    if !training || rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = values
        .iter()
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    for (v, m) in values.iter_mut().zip(&mask) {
        *v *= m;
    }
    Some(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn identity_cases() {
        let mut rng = stream(1, Stream::Dropout);
        let mut v = vec![1.0, -2.0, 3.0];
        assert!(apply_dropout(&mut v, 0.0, &mut rng, true).is_none());
        assert!(apply_dropout(&mut v, 0.5, &mut rng, false).is_none());
        assert_eq!(v, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn drop_fraction_and_mean() {
        let mut rng = stream(2, Stream::Dropout);
        let n = 1_000_000;
        let mut v = vec![1.0; n];
        apply_dropout(&mut v, 0.2, &mut rng, true).unwrap();
        let dropped = v.iter().filter(|&&x| x == 0.0).count() as f64 / n as f64;
        // 5 sigma of a binomial(1e6, 0.2) proportion is 0.002.
        assert!((dropped - 0.2).abs() < 0.002, "{dropped}");
        let mean = v.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }
}
