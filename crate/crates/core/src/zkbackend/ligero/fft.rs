//! Radix-2 number-theoretic transforms over power-of-two subgroups and their
//! cosets.

use crate::zkbackend::field::{Fe, GENERATOR};

/// The multiplicative subgroup of order `n = 2^log_n`.
#[derive(Debug, Clone)]
pub struct Domain {
    pub log_n: u32,
    pub n: usize,
    n_inv: Fe,
    // omega^j for j < n/2, and the same for omega^-1
    twiddles: Vec<Fe>,
    inv_twiddles: Vec<Fe>,
}

fn powers(base: Fe, count: usize) -> Vec<Fe> {
    let mut out = Vec::with_capacity(count);
    let mut acc = Fe::ONE;
    for _ in 0..count {
        out.push(acc);
        acc *= base;
    }
    out
}

impl Domain {
    pub fn new(log_n: u32) -> Domain {
        let n = 1usize << log_n;
        let omega = Fe::root_of_unity(log_n);
        let omega_inv = omega.inverse().expect("root of unity is nonzero");
        Domain {
            log_n,
            n,
            n_inv: Fe::from_u64(n as u64).inverse().expect("n < p"),
            twiddles: powers(omega, n / 2),
            inv_twiddles: powers(omega_inv, n / 2),
        }
    }

    /// Shift of the evaluation coset used by the code.
    pub fn coset_shift() -> Fe {
        Fe::from_u64(GENERATOR)
    }

    fn transform(&self, values: &mut [Fe], twiddles: &[Fe]) {
        let n = self.n;
        assert_eq!(values.len(), n);
        let shift = usize::BITS - self.log_n;
        for i in 0..n {
            let j = i.reverse_bits().checked_shr(shift).unwrap_or(0);
            if i < j {
                values.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = twiddles[k * stride];
                    let u = values[start + k];
                    let v = values[start + k + half] * w;
                    values[start + k] = u + v;
                    values[start + k + half] = u - v;
                }
            }
            len *= 2;
        }
    }

    /// Coefficients to evaluations at `omega^i`.
    pub fn fft(&self, values: &mut [Fe]) {
        self.transform(values, &self.twiddles);
    }

    /// Evaluations at `omega^i` to coefficients.
    pub fn ifft(&self, values: &mut [Fe]) {
        self.transform(values, &self.inv_twiddles);
        for v in values.iter_mut() {
            *v *= self.n_inv;
        }
    }

    /// Evaluates a polynomial with at most `n` coefficients on the coset
    /// `shift * <omega>`.
    pub fn coset_fft(&self, coeffs: &[Fe], shift: Fe) -> Vec<Fe> {
        assert!(coeffs.len() <= self.n, "polynomial larger than the domain");
        let mut values = Vec::with_capacity(self.n);
        let mut s = Fe::ONE;
        for &c in coeffs {
            values.push(c * s);
            s *= shift;
        }
        values.resize(self.n, Fe::ZERO);
        self.fft(&mut values);
        values
    }

    /// Inverse of [`Domain::coset_fft`]: `n` coefficients.
    pub fn coset_ifft(&self, evals: &[Fe], shift: Fe) -> Vec<Fe> {
        let mut values = evals.to_vec();
        self.ifft(&mut values);
        let shift_inv = shift.inverse().expect("nonzero shift");
        let mut s = Fe::ONE;
        for v in values.iter_mut() {
            *v *= s;
            s *= shift_inv;
        }
        values
    }
}

#[cfg(test)]
fn evaluate(coeffs: &[Fe], x: Fe) -> Fe {
    coeffs.iter().rev().fold(Fe::ZERO, |acc, &c| acc * x + c)
}
