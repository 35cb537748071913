//! Portable seeded random streams and exact binomial sampling.
//!
//! Streams are ChaCha8 keyed by a 64-bit seed with an explicit 64-bit stream
//! index, so independent substreams can be handed to parallel workers while
//! keeping results identical to a sequential run. All floating point in the
//! sampling path goes through `libm` to stay bit-identical across platforms.
//!
//! Binomial draws use sequential inversion from zero for `n <= 64` and
//! mode-centred inversion (search alternating down and up from the mode)
//! otherwise. Both are exact inversion methods; for `p > 1/2` the draw is
//! `n - Binomial(n, 1 - p)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller (one of the pair is discarded).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }
}

const SMALL_N: u64 = 64;

pub fn rng_binomial(n: u64, p: f64, rng: &mut RngStream) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p > 0.5 {
        return n - rng_binomial(n, 1.0 - p, rng);
    }
    if n <= SMALL_N {
        sequential_inversion(n, p, rng)
    } else {
        mode_inversion(n, p, rng)
    }
}

fn sequential_inversion(n: u64, p: f64, rng: &mut RngStream) -> u64 {
    let ratio = p / (1.0 - p);
    let mut pk = libm::pow(1.0 - p, n as f64);
    let mut u = rng.next_f64();
    let mut k = 0;
    while u >= pk && k < n {
        u -= pk;
        pk *= ratio * (n - k) as f64 / (k + 1) as f64;
        k += 1;
    }
    k
}

fn ln_binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    let (n, kf) = (n as f64, k as f64);
    libm::lgamma(n + 1.0) - libm::lgamma(kf + 1.0) - libm::lgamma(n - kf + 1.0)
        + kf * libm::log(p)
        + (n - kf) * libm::log1p(-p)
}

fn mode_inversion(n: u64, p: f64, rng: &mut RngStream) -> u64 {
    let ratio = p / (1.0 - p);
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as u64;
    let p_mode = libm::exp(ln_binomial_pmf(n, mode, p));
    let mut u = rng.next_f64();
    if u < p_mode {
        return mode;
    }
    u -= p_mode;
    let (mut lo, mut hi) = (mode, mode);
    let (mut p_lo, mut p_hi) = (p_mode, p_mode);
    loop {
        let can_down = lo > 0;
        let can_up = hi < n;
        if !can_down && !can_up {
            // Rounding left a sliver of mass unassigned.
            return mode;
        }
        if can_down {
            p_lo *= lo as f64 / ((n - lo + 1) as f64 * ratio);
            lo -= 1;
            if u < p_lo {
                return lo;
            }
            u -= p_lo;
        }
        if can_up {
            p_hi *= ratio * (n - hi) as f64 / (hi + 1) as f64;
            hi += 1;
            if u < p_hi {
                return hi;
            }
            u -= p_hi;
        }
    }
}
