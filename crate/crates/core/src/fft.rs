//! FFT-backed convolution and correlation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::Real;

const DIRECT_LIMIT: usize = 4096;

/// Full linear convolution, length `a.len() + b.len() - 1`.
pub fn convolve<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 || a.len() * b.len() <= DIRECT_LIMIT {
        return convolve_direct(a, b);
    }
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut fa = padded(a, n);
    let mut fb = padded(b, n);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * *y;
    }
    inv.process(&mut fa);
    let scale = T::one() / T::from_usize_lossy(n);
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

pub fn convolve_direct<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

/// `c[lag] = sum_n a[n] * b[n + lag]` for every lag in
/// `-(a.len()-1) ..= b.len()-1`; index `lag + a.len() - 1`.
pub fn cross_correlation<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let rev: Vec<T> = a.iter().rev().copied().collect();
    convolve(&rev, b)
}

fn padded<T: Real>(x: &[T], n: usize) -> Vec<Complex<T>> {
    let mut v: Vec<Complex<T>> = x.iter().map(|&r| Complex::new(r, T::zero())).collect();
    v.resize(n, Complex::new(T::zero(), T::zero()));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::rng::CounterRng;

    #[test]
    fn fft_matches_direct() {
        let mut rng = CounterRng::new(3);
        let a: Vec<f64> = (0..700).map(|_| rng.next_gaussian()).collect();
        let b: Vec<f64> = (0..300).map(|_| rng.next_gaussian()).collect();
        let fast = convolve(&a, &b);
        let slow = convolve_direct(&a, &b);
        assert_eq!(fast.len(), 999);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn correlation_lag_convention() {
        let a = [1.0f64, 2.0, 3.0];
        let b = [0.0f64, 0.0, 1.0, 2.0, 3.0];
        let c = cross_correlation(&a, &b);
        // Peak at lag 2: b is a delayed by two samples.
        let peak = c
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap()
            .0 as isize
            - (a.len() as isize - 1);
        assert_eq!(peak, 2);
        assert_eq!(c[2 + 2], 14.0);
    }
}
