//! Radix-2 complex FFT and window helpers.
//!
//! Every transform length in the pipeline is a power of two (odd chirp
//! counts are zero-padded first), so an iterative Cooley-Tukey kernel is all
//! that is needed. The transform is unnormalized: `X[k] = sum_n x[n] W^nk`,
//! so Parseval reads `sum |X|^2 = N * sum |x|^2`.

use num_complex::Complex;

use crate::scalar::Real;

/// In-place forward DFT of a power-of-two-length buffer.
///
/// # Panics
/// If the length is not a power of two.
pub fn fft_in_place<T: Real>(buf: &mut [Complex<T>]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length {n} must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i as u32).reverse_bits() >> (32 - bits);
        let j = j as usize;
        if j > i {
            buf.swap(i, j);
        }
    }

    // Twiddle table for the full length; a stage of length `len` strides it
    // by n / len.
    let twiddle: Vec<Complex<T>> = (0..n / 2)
        .map(|k| {
            let angle = -T::from_f64_lossy(2.0) * T::PI() * T::from_usize_lossy(k)
                / T::from_usize_lossy(n);
            Complex::new(angle.cos(), angle.sin())
        })
        .collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddle[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}

/// DFT of `input` zero-padded to `pad_to` (a power of two >= input length).
pub fn fft_padded<T: Real>(input: &[Complex<T>], pad_to: usize) -> Vec<Complex<T>> {
    assert!(pad_to >= input.len());
    let mut buf = vec![Complex::new(T::zero(), T::zero()); pad_to];
    buf[..input.len()].copy_from_slice(input);
    fft_in_place(&mut buf);
    buf
}

/// Reorders a spectrum so the zero-frequency bin sits at `n / 2`.
pub fn fftshift<T: Copy>(spectrum: &[T]) -> Vec<T> {
    let n = spectrum.len();
    let half = n / 2;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&spectrum[n - half..]);
    out.extend_from_slice(&spectrum[..n - half]);
    out
}

/// Symmetric Hann window of length `n`.
pub fn hann<T: Real>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    let denom = T::from_usize_lossy(n - 1);
    (0..n)
        .map(|i| {
            let phase = T::from_f64_lossy(2.0) * T::PI() * T::from_usize_lossy(i) / denom;
            T::from_f64_lossy(0.5) * (T::one() - phase.cos())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n^2) reference DFT, the oracle the fast path must match.
    fn naive_dft(input: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = input.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex::new(0.0, 0.0);
                for (i, x) in input.iter().enumerate() {
                    let angle = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                    acc += x * Complex::new(angle.cos(), angle.sin());
                }
                acc
            })
            .collect()
    }

    fn lcg_signal(n: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        (0..n).map(|_| Complex::new(next(), next())).collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[1usize, 2, 4, 8, 64, 256] {
            let signal = lcg_signal(n, n as u64 + 7);
            let mut fast = signal.clone();
            fft_in_place(&mut fast);
            let slow = naive_dft(&signal);
            let num: f64 = fast
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let den: f64 = slow.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert!(num <= 1e-9 * den.max(1e-30), "n={n} rel err {}", num / den);
        }
    }

    #[test]
    fn parseval_energy_is_preserved() {
        let n = 256;
        let signal = lcg_signal(n, 99);
        let mut spec = signal.clone();
        fft_in_place(&mut spec);
        let time: f64 = signal.iter().map(|c| c.norm_sqr()).sum();
        let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        assert!((freq - n as f64 * time).abs() <= 1e-6 * freq.abs());
    }

    #[test]
    fn pure_tone_peaks_at_its_bin() {
        let n = 128;
        let bin = 37;
        let signal: Vec<Complex<f64>> = (0..n)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * (bin * i) as f64 / n as f64;
                Complex::new(phase.cos(), phase.sin())
            })
            .collect();
        let mut spec = signal;
        fft_in_place(&mut spec);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .unwrap()
            .0;
        assert_eq!(peak, bin);
    }

    #[test]
    fn fftshift_centers_zero_bin() {
        let spec: Vec<u32> = (0..8).collect();
        assert_eq!(fftshift(&spec), vec![4, 5, 6, 7, 0, 1, 2, 3]);
    }

    #[test]
    fn hann_endpoints_are_zero() {
        let w: Vec<f64> = hann(64);
        assert!(w[0].abs() < 1e-15 && w[63].abs() < 1e-15);
        assert!((w[32] - 1.0).abs() < 1e-2);
    }
}
