//! Radix-2 complex FFT for power-of-two cubes.
//!
//! Transforms along the two outer axes run butterflies over whole
//! contiguous rows, which keeps memory access sequential.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Fft3 {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft3 {
    /// Plan for an `n³` cube; `n` must be a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        let twiddles = (0..n / 2)
            .map(|j| {
                let a = -2.0 * PI * j as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { n, twiddles, bitrev }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized forward transform, kernel `exp(-i k·x)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform including the `1/n³` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        self.pass(data, n * n, 1, inverse);
        self.pass(data, n, n, inverse);
        self.pass(data, 1, n * n, inverse);
    }

    /// Transform along the middle axis of a `[outer][n][inner]` array.
    fn pass(&self, data: &mut [Complex64], outer: usize, inner: usize, inverse: bool) {
        let n = self.n;
        let block = n * inner;
        for o in 0..outer {
            let chunk = &mut data[o * block..(o + 1) * block];
            for i in 0..n {
                let j = self.bitrev[i];
                if i < j {
                    if inner == 1 {
                        chunk.swap(i, j);
                    } else {
                        let (a, b) = chunk.split_at_mut(j * inner);
                        a[i * inner..(i + 1) * inner].swap_with_slice(&mut b[..inner]);
                    }
                }
            }
            let mut len = 2;
            while len <= n {
                let half = len / 2;
                let step = n / len;
                for start in (0..n).step_by(len) {
                    for q in 0..half {
                        let mut w = self.twiddles[q * step];
                        if inverse {
                            w = w.conj();
                        }
                        let ia = start + q;
                        let ib = ia + half;
                        if inner == 1 {
                            let x = chunk[ia];
                            let y = chunk[ib] * w;
                            chunk[ia] = x + y;
                            chunk[ib] = x - y;
                        } else {
                            let (lo, hi) = chunk.split_at_mut(ib * inner);
                            let ra = &mut lo[ia * inner..(ia + 1) * inner];
                            let rb = &mut hi[..inner];
                            for (a, b) in ra.iter_mut().zip(rb.iter_mut()) {
                                let x = *a;
                                let y = *b * w;
                                *a = x + y;
                                *b = x - y;
                            }
                        }
                    }
                }
                len *= 2;
            }
        }
    }
}
