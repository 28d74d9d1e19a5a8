//! Seeded, portable random draws.
//!
//! Everything here is built from raw 64-bit generator output so results are
//! bit-stable across platforms and library versions. Normal and binomial
//! variates are inverse-CDF transforms of a single uniform each; no
//! rejection steps.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

/// The generator used throughout: named, seedable, portable.
pub type Stream = ChaCha8Rng;

/// Opens stream `index` off a master seed: one splitmix64 round over
/// `master ^ index`. Re-mixing at each level keeps nested derivations
/// (study -> replication -> table) from colliding.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ index)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw on the open interval (0, 1): 53 bits centered in each cell,
/// so 0 and 1 are unreachable and log/inverse-CDF transforms stay finite.
pub fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw via the inverse CDF of one uniform.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    normal.inverse_cdf(open_unit(rng))
}

/// Binomial(n, p) draw by inversion of one uniform: the smallest y with
/// CDF(y) >= u, located by binary search on the regularized incomplete
/// beta representation of the binomial CDF.
pub fn binomial(rng: &mut impl RngCore, n: u64, p: f64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let u = open_unit(rng);
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let cdf = |y: u64| -> f64 {
        if y >= n {
            1.0
        } else {
            // P(Y <= y) = I_{1-p}(n - y, y + 1)
            beta_reg((n - y) as f64, y as f64 + 1.0, 1.0 - p)
        }
    };
    let mut lo = 0u64;
    let mut hi = n;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if cdf(mid) >= u {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}
