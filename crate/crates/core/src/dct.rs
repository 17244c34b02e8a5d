//! Truncated orthonormal DCT-II basis tables.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// First `k` orthonormal DCT-II basis vectors of length `len`, stored as
/// `data[u * len + i] = a(u) * cos(pi * (2i + 1) * u / (2 len))`.
#[derive(Debug, Clone)]
pub(crate) struct CosTable {
    len: usize,
    data: Vec<f64>,
}

impl CosTable {
    pub fn new(len: usize, k: usize) -> Self {
        let scale0 = libm::sqrt(1.0 / len as f64);
        let scale = libm::sqrt(2.0 / len as f64);
        let mut data = Vec::with_capacity(len * k);
        for u in 0..k {
            let a = if u == 0 { scale0 } else { scale };
            for i in 0..len {
                data.push(a * libm::cos(PI * (2 * i + 1) as f64 * u as f64 / (2 * len) as f64));
            }
        }
        CosTable { len, data }
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.len..(u + 1) * self.len]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_table_is_orthonormal() {
        let t = CosTable::new(9, 9);
        for a in 0..9 {
            for b in 0..9 {
                let d: f64 = t.row(a).iter().zip(t.row(b)).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }
}
