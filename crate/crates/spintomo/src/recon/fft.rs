//! N-dimensional unitary DFT on dynamic-rank complex arrays.
//!
//! Thin wrapper over rustfft applying the transform lane by lane along
//! each axis with 1/sqrt(n) normalization per axis, so forward/inverse
//! are exact adjoints and Parseval holds without extra factors.

use ndarray::{ArrayD, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// In-place unitary DFT along every axis.
pub fn fftn_unitary(data: &mut ArrayD<Complex64>, direction: Direction) {
    let mut planner = FftPlanner::new();
    for axis in 0..data.ndim() {
        let n = data.len_of(Axis(axis));
        if n <= 1 {
            continue;
        }
        let fft = match direction {
            Direction::Forward => planner.plan_fft_forward(n),
            Direction::Inverse => planner.plan_fft_inverse(n),
        };
        let norm = 1.0 / (n as f64).sqrt();
        let mut buf = vec![Complex64::default(); n];
        for mut lane in data.lanes_mut(Axis(axis)) {
            for (b, v) in buf.iter_mut().zip(lane.iter()) {
                *b = *v;
            }
            fft.process(&mut buf);
            for (v, b) in lane.iter_mut().zip(&buf) {
                *v = *b * norm;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn forward_inverse_roundtrip() {
        let shape = [4usize, 6, 3];
        let n: usize = shape.iter().product();
        let data: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let original = ArrayD::from_shape_vec(IxDyn(&shape), data).unwrap();
        let mut work = original.clone();
        fftn_unitary(&mut work, Direction::Forward);
        // Unitary: norm preserved.
        let norm_in: f64 = original.iter().map(|c| c.norm_sqr()).sum();
        let norm_out: f64 = work.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm_in - norm_out).abs() <= 1e-12 * norm_in);
        fftn_unitary(&mut work, Direction::Inverse);
        for (a, b) in work.iter().zip(original.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
