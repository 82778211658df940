//! Counter-based randomness: a stateless hash of a key tuple, so that the
//! value drawn for (seed, step, stream, site, index) never depends on the
//! order in which other values were drawn.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn hash_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Uniform in [0, 1) from 53 hashed bits.
pub fn unit_uniform(key: u64, index: u64) -> f64 {
    (mix64(key ^ mix64(index)) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_roughly_uniform() {
        let key = hash_key(&[7, 1, 2]);
        let n = 100_000;
        let mean = (0..n).map(|i| unit_uniform(key, i)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01);
        assert!((0..n).all(|i| (0.0..1.0).contains(&unit_uniform(key, i))));
    }

    #[test]
    fn keys_differ() {
        assert_ne!(hash_key(&[1, 2, 3]), hash_key(&[1, 3, 2]));
        assert_eq!(hash_key(&[1, 2, 3]), hash_key(&[1, 2, 3]));
    }
}
