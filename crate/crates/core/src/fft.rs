//! Complex FFT of arbitrary length: iterative radix-2 for powers of two and
//! Bluestein's chirp-z reduction for everything else.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    #[inline]
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    #[inline]
    fn cis(angle: f64) -> Self {
        Complex::new(libm::cos(angle), libm::sin(angle))
    }

    #[inline]
    fn mul(self, o: Complex) -> Complex {
        Complex::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }

    #[inline]
    fn conj(self) -> Complex {
        Complex::new(self.re, -self.im)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

pub(crate) struct Fft {
    len: usize,
    kind: Kind,
}

enum Kind {
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        /// exp(-i pi k^2 / n) for k in 0..n
        chirp: Vec<Complex>,
        /// FFT of the conjugate chirp laid out for circular convolution
        kernel: Vec<Complex>,
    },
}

impl Fft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0);
        let kind = if len.is_power_of_two() {
            Kind::Radix2(Radix2::new(len))
        } else {
            let m = (2 * len - 1).next_power_of_two();
            let inner = Radix2::new(m);
            // k^2 mod 2n keeps the angle argument small for long transforms
            let chirp: Vec<Complex> = (0..len)
                .map(|k| {
                    let k2 = (k as u128 * k as u128 % (2 * len as u128)) as f64;
                    Complex::cis(-PI * k2 / len as f64)
                })
                .collect();
            let mut kernel = vec![Complex::default(); m];
            kernel[0] = chirp[0].conj();
            for k in 1..len {
                kernel[k] = chirp[k].conj();
                kernel[m - k] = chirp[k].conj();
            }
            inner.forward(&mut kernel);
            Kind::Bluestein { inner, chirp, kernel }
        };
        Fft { len, kind }
    }

    /// Forward transform in place, `X_k = sum_j x_j exp(-2 pi i jk / n)`.
    pub fn forward(&self, buf: &mut [Complex], scratch: &mut Vec<Complex>) {
        assert_eq!(buf.len(), self.len);
        match &self.kind {
            Kind::Radix2(r) => r.forward(buf),
            Kind::Bluestein { inner, chirp, kernel } => {
                let m = kernel.len();
                scratch.clear();
                scratch.resize(m, Complex::default());
                for (s, (x, w)) in scratch.iter_mut().zip(buf.iter().zip(chirp)) {
                    *s = x.mul(*w);
                }
                inner.forward(scratch);
                for (s, k) in scratch.iter_mut().zip(kernel) {
                    *s = s.mul(*k).conj();
                }
                // inverse via conjugated forward transform
                inner.forward(scratch);
                let scale = 1.0 / m as f64;
                for (x, (s, w)) in buf.iter_mut().zip(scratch.iter().zip(chirp)) {
                    let conv = Complex::new(s.re * scale, -s.im * scale);
                    *x = conv.mul(*w);
                }
            }
        }
    }
}

struct Radix2 {
    len: usize,
    twiddles: Vec<Complex>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let twiddles = (0..len / 2).map(|k| Complex::cis(-2.0 * PI * k as f64 / len as f64)).collect();
        Radix2 { len, twiddles }
    }

    fn forward(&self, buf: &mut [Complex]) {
        let n = self.len;
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half].mul(w);
                    buf[start + k] = Complex::new(a.re + b.re, a.im + b.im);
                    buf[start + k + half] = Complex::new(a.re - b.re, a.im - b.im);
                }
            }
            size *= 2;
        }
    }
}
