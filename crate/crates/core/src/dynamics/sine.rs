//! Type-I discrete sine transform through a radix-2 complex FFT of the odd
//! extension.

use crate::prelude::*;
use crate::{Error, Result};
use core::f64::consts::PI;
use num_complex::Complex64;

/// In-place iterative radix-2 FFT of a fixed power-of-two length.
#[derive(Debug, Clone)]
struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
}

impl Fft {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Fft { n, twiddles }
    }

    fn forward(&self, x: &mut [Complex64]) {
        let n = self.n;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                x.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let t = self.twiddles[k * stride] * x[start + k + len / 2];
                    let a = x[start + k];
                    x[start + k] = a + t;
                    x[start + k + len / 2] = a - t;
                }
            }
            len *= 2;
        }
    }
}

/// `X_k = Σ_{j=1}^{N−1} x_j sin(π j k / N)` for `k = 1..N−1`. Applying it
/// twice multiplies by `N/2`.
#[derive(Debug, Clone)]
pub struct SineTransform {
    intervals: usize,
    fft: Fft,
    buffer: Vec<Complex64>,
}

impl SineTransform {
    /// `intervals` must be a power of two.
    pub fn new(intervals: usize) -> Result<Self> {
        if !intervals.is_power_of_two() || intervals < 4 {
            return Err(Error::invalid(format!(
                "sine transform needs a power-of-two interval count, got {intervals}"
            )));
        }
        Ok(SineTransform {
            intervals,
            fft: Fft::new(2 * intervals),
            buffer: vec![Complex64::new(0.0, 0.0); 2 * intervals],
        })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Transforms `x[1..N]` in place; `x[0]` and `x[N]` are left at zero.
    pub fn apply(&mut self, x: &mut [Complex64]) {
        let n = self.intervals;
        debug_assert_eq!(x.len(), n + 1);
        let zero = Complex64::new(0.0, 0.0);
        let b = &mut self.buffer;
        b[0] = zero;
        b[n] = zero;
        for j in 1..n {
            b[j] = x[j];
            b[2 * n - j] = -x[j];
        }
        self.fft.forward(b);
        // the FFT of the odd extension is −2i X_k
        for k in 1..n {
            x[k] = b[k] * Complex64::new(0.0, 0.5);
        }
        x[0] = zero;
        x[n] = zero;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(x: &[Complex64], n: usize) -> Vec<Complex64> {
        (0..=n)
            .map(|k| {
                (1..n)
                    .map(|j| x[j] * (PI * (j * k) as f64 / n as f64).sin())
                    .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
            })
            .collect()
    }

    fn random(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<Complex64> = (0..=n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        x[0] = Complex64::new(0.0, 0.0);
        x[n] = Complex64::new(0.0, 0.0);
        x
    }

    #[test]
    fn matches_the_direct_sum() {
        for (n, seed) in [(4, 1), (8, 2), (64, 3), (256, 4)] {
            let x = random(n, seed);
            let expected = naive(&x, n);
            let mut y = x.clone();
            SineTransform::new(n).unwrap().apply(&mut y);
            for (a, b) in y.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-11 * n as f64, "n = {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn is_its_own_inverse_up_to_scale() {
        let n = 1024;
        let x = random(n, 7);
        let mut y = x.clone();
        let mut t = SineTransform::new(n).unwrap();
        t.apply(&mut y);
        t.apply(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a * (2.0 / n as f64) - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_other_lengths() {
        assert!(SineTransform::new(100).is_err());
        assert!(SineTransform::new(2).is_err());
    }
}
