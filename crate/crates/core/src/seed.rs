//! Seed splitting.
//!
//! Every randomized component derives its own stream from a master seed as
//! `master XOR fnv1a64(role)`, where `role` is a short stable label such as
//! `"layer.0.train"` or `"kmeans.restart.3"`.

/// 64-bit FNV-1a hash of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn derive_seed(master: u64, role: &str) -> u64 {
    master ^ fnv1a64(role)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn roles_give_distinct_streams() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_eq!(derive_seed(5, "x"), derive_seed(5, "x"));
    }
}
