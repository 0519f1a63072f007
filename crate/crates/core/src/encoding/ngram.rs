//! Hashed n-gram encoding of activity prefixes.

/// Size of the n-gram universe over `alphabet` labels for lengths `1..=k`,
/// or `None` on overflow.
pub fn ngram_universe_size(alphabet: usize, k: usize) -> Option<u128> {
    let a = alphabet as u128;
    let mut total: u128 = 0;
    let mut pow: u128 = 1;
    for _ in 0..k {
        pow = pow.checked_mul(a)?;
        total = total.checked_add(pow)?;
    }
    Some(total)
}

const SIGN_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const SEPARATOR: u8 = 0x1f;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded 64-bit hash of a label sequence: FNV-1a over the labels joined by a
/// unit separator, finished with a splitmix64 avalanche.
pub fn hash_labels(seed: u64, labels: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ mix(seed);
    let mut feed = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for (i, label) in labels.iter().enumerate() {
        if i > 0 {
            feed(SEPARATOR);
        }
        for b in label.bytes() {
            feed(b);
        }
    }
    mix(h)
}

/// Feature-hashed bag of all contiguous n-grams of length `1..=k`.
///
/// Each occurrence of n-gram `g` adds `ξ(g) ∈ {+1, −1}` to slot `h(g) mod dim`,
/// where `h` and `ξ` are independent seeded hashes of the gram.
pub fn ngram_hash_encode(prefix: &[&str], k: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    if dim == 0 {
        return out;
    }
    for n in 1..=k.min(prefix.len()) {
        for gram in prefix.windows(n) {
            let slot = (hash_labels(seed, gram) % dim as u64) as usize;
            let sign = if hash_labels(seed ^ SIGN_SALT, gram).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            out[slot] += sign;
        }
    }
    out
}

/// Number of n-grams of length `1..=k` in a sequence of `len` items.
pub fn ngram_count(len: usize, k: usize) -> usize {
    (1..=k.min(len)).map(|n| len - n + 1).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn universe_size() {
        assert_eq!(ngram_universe_size(2, 2), Some(6));
        assert_eq!(ngram_universe_size(3, 1), Some(3));
        assert_eq!(ngram_universe_size(5, 0), Some(0));
        assert_eq!(ngram_universe_size(usize::MAX, 10), None);
    }

    #[test]
    fn empty_prefix_is_zero() {
        assert_eq!(ngram_hash_encode(&[], 3, 8, 1), vec![0.0; 8]);
    }

    #[test]
    fn single_gram_hits_one_slot() {
        let v = ngram_hash_encode(&["A"], 2, 8, 42);
        assert_eq!(v.iter().filter(|x| **x != 0.0).count(), 1);
        assert_eq!(v.iter().map(|x| x.abs()).sum::<f64>(), 1.0);
        assert_eq!(v, ngram_hash_encode(&["A"], 2, 8, 42));
    }

    #[test]
    fn separator_distinguishes_grams() {
        assert_ne!(hash_labels(0, &["ab", "c"]), hash_labels(0, &["a", "bc"]));
        assert_ne!(hash_labels(0, &["a"]), hash_labels(1, &["a"]));
    }

    proptest! {
        #[test]
        fn norm_bounded_by_gram_count(seq in prop::collection::vec(0u8..4, 0..12), k in 1usize..4, dim in 1usize..16, seed: u64) {
            let labels: Vec<String> = seq.iter().map(|c| format!("a{c}")).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let v = ngram_hash_encode(&refs, k, dim, seed);
            let l2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(l2 <= ngram_count(refs.len(), k) as f64 + 1e-12);
            prop_assert_eq!(v, ngram_hash_encode(&refs, k, dim, seed));
        }
    }
}
