//! L1-penalized sparse spectral reconstruction from partial samples.
//!
//! Solves `argmin_x 1/2 ||M F^-1 x - y||^2 + lambda ||x||_1` by proximal
//! gradient iteration (ISTA) with complex soft thresholding. `F^-1` is
//! the unitary inverse DFT, so the data-fit gradient is 1-Lipschitz and
//! the unit step keeps the objective monotonically non-increasing.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use super::{fftn_unitary, Direction, FreqAxis, Provenance, ReconError, SpectralImage};
use crate::sequencer::AxisInfo;

#[derive(Debug, Clone, Copy)]
pub struct L1Options {
    /// L1 penalty weight.
    pub lambda: f64,
    pub max_iters: usize,
    /// Relative objective-decrease stopping threshold.
    pub tol: f64,
}

impl Default for L1Options {
    fn default() -> Self {
        L1Options {
            lambda: 1e-2,
            max_iters: 1000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct L1Report {
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every iteration (index 0 is the start).
    pub objective: Vec<f64>,
}

fn soft_threshold(x: Complex64, lambda: f64) -> Complex64 {
    let mag = x.norm();
    if mag <= lambda {
        Complex64::default()
    } else {
        x * ((mag - lambda) / mag)
    }
}

/// Reconstructs a sparse spectrum from `samples` observed at row-major
/// linear `sample_indices` of the full `shape` grid.
///
/// Samples should have the static signal offset removed (the output of
/// `complex_combine` already does). Returns the power image together
/// with a convergence report; non-convergence within `max_iters` is
/// reported, not an error, and the final (best) iterate is returned.
pub fn l1_reconstruct(
    samples: &[Complex64],
    sample_indices: &[usize],
    shape: &[usize],
    axes: &[AxisInfo],
    opts: &L1Options,
) -> Result<(SpectralImage, L1Report), ReconError> {
    if samples.len() != sample_indices.len() {
        return Err(ReconError::ShapeMismatch(format!(
            "{} samples for {} indices",
            samples.len(),
            sample_indices.len()
        )));
    }
    if axes.len() != shape.len() {
        return Err(ReconError::ShapeMismatch(
            "one axis descriptor per grid dimension required".into(),
        ));
    }
    if !(opts.lambda > 0.0) {
        return Err(ReconError::InvalidParam("lambda must be positive".into()));
    }
    let size: usize = shape.iter().product();
    for idx in sample_indices {
        if *idx >= size {
            return Err(ReconError::IndexOutOfBounds {
                index: *idx,
                size,
            });
        }
    }

    let freq_axes: Vec<FreqAxis> = axes
        .iter()
        .zip(shape)
        .map(|(axis, n)| FreqAxis {
            channel: axis.channel.clone(),
            df_hz: 1.0 / (*n as f64 * axis.dt_eff_s),
            offset_hz: 0.0,
            flipped: false,
        })
        .collect();

    let mut spectrum = ArrayD::from_elem(IxDyn(shape), Complex64::default());
    let mut objective = Vec::with_capacity(opts.max_iters + 1);

    // Objective and gradient share one synthesis pass per iteration.
    let eval = |spectrum: &ArrayD<Complex64>| -> (f64, ArrayD<Complex64>) {
        let mut time = spectrum.clone();
        fftn_unitary(&mut time, Direction::Inverse);
        // Masked residual in time domain.
        let mut residual = ArrayD::from_elem(IxDyn(shape), Complex64::default());
        let flat_time = time.as_slice().expect("contiguous");
        let residual_flat = residual.as_slice_mut().expect("contiguous");
        let mut data_fit = 0.0;
        for (sample, idx) in samples.iter().zip(sample_indices) {
            let r = flat_time[*idx] - sample;
            data_fit += r.norm_sqr();
            residual_flat[*idx] = r;
        }
        let l1: f64 = spectrum.iter().map(|c| c.norm()).sum();
        let mut grad = residual;
        fftn_unitary(&mut grad, Direction::Forward);
        (0.5 * data_fit + opts.lambda * l1, grad)
    };

    let (mut objective_now, mut grad) = eval(&spectrum);
    objective.push(objective_now);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        ndarray::Zip::from(&mut spectrum)
            .and(&grad)
            .for_each(|x, g| *x = soft_threshold(*x - g, opts.lambda));
        iterations += 1;
        let (objective_next, grad_next) = eval(&spectrum);
        objective.push(objective_next);
        grad = grad_next;
        let decrease = objective_now - objective_next;
        if decrease >= 0.0 && decrease <= opts.tol * objective_now.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        objective_now = objective_next;
    }

    let image = SpectralImage {
        power: spectrum.mapv(|c| c.norm_sqr()),
        axes: freq_axes,
        provenance: Provenance::L1,
    };
    Ok((
        image,
        L1Report {
            iterations,
            converged,
            objective,
        },
    ))
}
