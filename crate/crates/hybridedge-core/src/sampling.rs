//! Deterministic metric sampling for the simulated backend.
//!
//! Each metric is mean + u * spread with u drawn uniformly from [-1, 1] by a
//! ChaCha8 generator seeded from the launch request, so zero spread yields
//! the mean exactly and identical seeds yield identical metrics on every
//! platform. Draw order is fixed: cpu, then memory, then processing time.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use crate::model::ResourceProfile;

/// One sampled execution cost. Every value lies in
/// [mean - spread, mean + spread], floored at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledMetrics {
    pub cpu_avg_pct: f64,
    pub mem_peak_mb: f64,
    pub proc_time_ms: f64,
    pub boot_ms: f64,
}

fn draw(rng: &mut ChaCha8Rng, mean: f64, spread: f64) -> f64 {
    if spread == 0.0 {
        return mean;
    }
    let u: f64 = rng.random_range(-1.0..=1.0);
    let v = mean + u * spread;
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

pub fn sample_metrics(profile: &ResourceProfile, seed: u64) -> SampledMetrics {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SampledMetrics {
        cpu_avg_pct: draw(&mut rng, profile.cpu_pct_mean, profile.cpu_pct_spread),
        mem_peak_mb: draw(&mut rng, profile.mem_mb_mean, profile.mem_mb_spread),
        proc_time_ms: draw(&mut rng, profile.proc_time_ms_mean, profile.proc_time_ms_spread),
        boot_ms: profile.boot_ms,
    }
}

/// Stable per-instance seed derivation (FNV-1a over the instance id and the
/// attempt, mixed with the cluster seed). Fixed at placement time so
/// re-execution of the same attempt is reproducible.
pub fn derive_seed(cluster_seed: u64, instance_id: &str, attempt: u32) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = FNV_OFFSET ^ cluster_seed;
    for byte in instance_id.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    for byte in attempt.to_le_bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_returns_the_means_for_any_seed() {
        let profile = ResourceProfile::point(0.17, 45.0, 2.05).with_boot_ms(50.0);
        let a = sample_metrics(&profile, 1);
        let b = sample_metrics(&profile, 999);
        assert_eq!(a, b);
        assert_eq!(a.cpu_avg_pct, 0.17);
        assert_eq!(a.mem_peak_mb, 45.0);
        assert_eq!(a.proc_time_ms, 2.05);
        assert_eq!(a.boot_ms, 50.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let profile = ResourceProfile {
            cpu_pct_mean: 0.185,
            cpu_pct_spread: 0.015,
            mem_mb_mean: 46.5,
            mem_mb_spread: 1.5,
            proc_time_ms_mean: 2.05,
            proc_time_ms_spread: 0.05,
            boot_ms: 50.0,
        };
        assert_eq!(sample_metrics(&profile, 7), sample_metrics(&profile, 7));
        assert_ne!(sample_metrics(&profile, 7), sample_metrics(&profile, 8));
    }

    #[test]
    fn samples_stay_within_the_spread_bounds() {
        let profile = ResourceProfile {
            cpu_pct_mean: 10.0,
            cpu_pct_spread: 2.0,
            mem_mb_mean: 100.0,
            mem_mb_spread: 30.0,
            proc_time_ms_mean: 5.0,
            proc_time_ms_spread: 5.0,
            boot_ms: 0.0,
        };
        for seed in 0..500 {
            let m = sample_metrics(&profile, seed);
            assert!((8.0..=12.0).contains(&m.cpu_avg_pct));
            assert!((70.0..=130.0).contains(&m.mem_peak_mb));
            assert!((0.0..=10.0).contains(&m.proc_time_ms));
        }
    }

    #[test]
    fn derived_seeds_differ_per_instance_and_attempt() {
        let a = derive_seed(42, "w1-0", 0);
        let b = derive_seed(42, "w1-1", 0);
        let c = derive_seed(42, "w1-0", 1);
        let d = derive_seed(43, "w1-0", 0);
        assert!(a != b && a != c && a != d);
        assert_eq!(a, derive_seed(42, "w1-0", 0));
    }
}
