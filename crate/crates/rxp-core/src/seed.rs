//! Seed splitting: derive independent sub-seeds from one master seed.
//!
//! Every stochastic component takes its seed from `derive_seed(master, name)`
//! so a single top-level seed pins the whole pipeline while components stay
//! decorrelated. The hash is FNV-1a over the master seed bytes followed by
//! the component name, which is stable across platforms and releases.

/// Sub-seed for a named component, derived from the master seed.
pub fn derive_seed(master: u64, component: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for b in master.to_le_bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
    }
    for &b in component.as_bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
    }
    h
}
