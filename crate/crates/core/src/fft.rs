// SPDX-License-Identifier: Apache-2.0

//! In-place iterative radix-2 FFT.

use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn powu(self, mut n: u32) -> Self {
        let mut base = self;
        let mut acc = Complex::new(1.0, 0.0);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }
}

impl Add for Complex {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

/// Transforms `data` in place; its length must be a power of two.
/// The inverse transform is scaled by `1 / len`.
pub fn fft(data: &mut [Complex], inverse: bool) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        // Twiddles are computed directly rather than by repeated
        // multiplication to keep rounding error flat in the block length.
        for k in 0..half {
            let (s, c) = libm::sincos(ang * k as f64);
            let w = Complex::new(c, s);
            let mut start = 0;
            while start < n {
                let a = data[start + k];
                let b = data[start + k + half] * w;
                data[start + k] = a + b;
                data[start + k + half] = a - b;
                start += len;
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        for z in data.iter_mut() {
            z.re *= scale;
            z.im *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn dft(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex::default(), |acc, (j, &v)| {
                    let (s, c) = libm::sincos(-2.0 * PI * (j * k) as f64 / n as f64);
                    acc + v * Complex::new(c, s)
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_and_inverts() {
        let x: Vec<Complex> = (0..64)
            .map(|i| Complex::new(libm::sin(i as f64 * 0.37), (i % 7) as f64))
            .collect();
        let mut y = x.clone();
        fft(&mut y, false);
        for (a, b) in y.iter().zip(dft(&x)) {
            assert!((a.re - b.re).abs() < 1e-9 && (a.im - b.im).abs() < 1e-9);
        }
        fft(&mut y, true);
        for (a, b) in y.iter().zip(&x) {
            assert!((a.re - b.re).abs() < 1e-12 && (a.im - b.im).abs() < 1e-12);
        }
    }

    #[test]
    fn integer_powers() {
        let z = Complex::new(0.3, -0.7);
        let p = z.powu(5);
        let q = z * z * z * z * z;
        assert!((p.re - q.re).abs() < 1e-15 && (p.im - q.im).abs() < 1e-15);
        assert_eq!(z.powu(0), Complex::new(1.0, 0.0));
    }
}
