//! 3D localization of a spin from its measured per-channel frequencies.
//!
//! Inverts the forward field model by minimizing the sum of squared
//! frequency residuals over position: a derivative-free simplex search
//! (with one restart) gets into the basin, then Gauss-Newton steps with
//! field-model Jacobians polish the minimum to sub-picometer steps.

use indexmap::IndexMap;

use super::AnalysisError;
use crate::fieldmap::{
    channel_shift, frequency_jacobian, ChannelCurrents, QuantizationAxis, WireAssembly,
};
use crate::vec3::Vec3;

#[derive(Debug, Clone)]
pub struct Localization {
    pub position: Vec3,
    /// RMS frequency residual in Hz.
    pub residual_hz: f64,
    pub converged: bool,
    /// Fewer than 3 channels: the result is one point of a solution
    /// manifold, not a unique minimum.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Position step below which the search is considered converged (0.01 nm).
const POSITION_TOL_M: f64 = 1e-11;
const MAX_SIMPLEX_ITERS: usize = 400;
const MAX_GN_ITERS: usize = 60;

struct Objective<'a> {
    asm: &'a WireAssembly,
    currents: &'a ChannelCurrents,
    qaxis: &'a QuantizationAxis,
    measured: &'a IndexMap<String, f64>,
}

impl Objective<'_> {
    /// Per-channel frequency residuals in Hz.
    fn residuals(&self, x: Vec3) -> Result<Vec<f64>, AnalysisError> {
        let mut out = Vec::with_capacity(self.measured.len());
        for (channel, measured_hz) in self.measured {
            let current = self.currents.get(channel).copied().ok_or_else(|| {
                AnalysisError::InvalidParam(format!("no drive current for channel {channel:?}"))
            })?;
            let omega = channel_shift(self.asm, channel, current, self.qaxis, x)?;
            out.push(omega / (2.0 * std::f64::consts::PI) - measured_hz);
        }
        Ok(out)
    }

    fn cost(&self, x: Vec3) -> Result<f64, AnalysisError> {
        Ok(self.residuals(x)?.iter().map(|r| r * r).sum())
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    // Gaussian elimination with partial pivoting on a 3x3 system.
    let mut m = [
        [a[0][0], a[0][1], a[0][2], b[0]],
        [a[1][0], a[1][1], a[1][2], b[1]],
        [a[2][0], a[2][1], a[2][2], b[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3).max_by(|i, j| m[*i][col].abs().total_cmp(&m[*j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = m[row][3];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

fn nelder_mead(
    objective: &Objective,
    start: Vec3,
    scale: f64,
    max_iters: usize,
) -> Result<(Vec3, f64, usize), AnalysisError> {
    let mut simplex: Vec<(Vec3, f64)> = Vec::with_capacity(4);
    for offset in [
        Vec3::ZERO,
        Vec3::new(scale, 0.0, 0.0),
        Vec3::new(0.0, scale, 0.0),
        Vec3::new(0.0, 0.0, scale),
    ] {
        let p = start + offset;
        simplex.push((p, objective.cost(p)?));
    }

    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = (simplex[3].0 - simplex[0].0).norm();
        if spread < POSITION_TOL_M {
            break;
        }
        let centroid = (simplex[0].0 + simplex[1].0 + simplex[2].0) / 3.0;
        let worst = simplex[3];

        let reflected = centroid + (centroid - worst.0);
        let f_reflected = objective.cost(reflected)?;
        if f_reflected < simplex[0].1 {
            let expanded = centroid + (centroid - worst.0) * 2.0;
            let f_expanded = objective.cost(expanded)?;
            simplex[3] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
            continue;
        }
        if f_reflected < simplex[2].1 {
            simplex[3] = (reflected, f_reflected);
            continue;
        }
        let contracted = centroid + (worst.0 - centroid) * 0.5;
        let f_contracted = objective.cost(contracted)?;
        if f_contracted < worst.1 {
            simplex[3] = (contracted, f_contracted);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0;
        for vertex in simplex.iter_mut().skip(1) {
            let p = best + (vertex.0 - best) * 0.5;
            *vertex = (p, objective.cost(p)?);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok((simplex[0].0, simplex[0].1, iterations))
}

/// Finds the spin position whose per-channel Larmor shifts match
/// `measured` (Hz), starting from `initial_guess`.
///
/// With fewer than 3 channels the solution manifold is degenerate; the
/// returned point minimizes the residual but is flagged.
pub fn localize(
    measured: &IndexMap<String, f64>,
    asm: &WireAssembly,
    currents: &ChannelCurrents,
    qaxis: &QuantizationAxis,
    initial_guess: Vec3,
) -> Result<Localization, AnalysisError> {
    if measured.is_empty() {
        return Err(AnalysisError::InvalidParam(
            "at least one measured channel frequency required".into(),
        ));
    }
    let objective = Objective {
        asm,
        currents,
        qaxis,
        measured,
    };
    let degenerate = measured.len() < 3;

    // Simplex stage with one restart at a tighter scale.
    let scale = 0.3e-6;
    let (mut x, mut cost, mut iterations) =
        nelder_mead(&objective, initial_guess, scale, MAX_SIMPLEX_ITERS)?;
    let (x2, cost2, it2) = nelder_mead(&objective, x, scale / 20.0, MAX_SIMPLEX_ITERS / 2)?;
    iterations += it2;
    if cost2 < cost {
        x = x2;
        cost = cost2;
    }

    // Gauss-Newton polish with field-model Jacobians.
    let sub_currents: ChannelCurrents = measured
        .keys()
        .filter_map(|ch| currents.get(ch).map(|i| (ch.clone(), *i)))
        .collect();
    let mut converged = false;
    for _ in 0..MAX_GN_ITERS {
        iterations += 1;
        let residuals = objective.residuals(x)?;
        let jac = frequency_jacobian(asm, &sub_currents, qaxis, x, 1e-9)?;
        // Normal equations sum_k J_k J_k^T in Hz/m.
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (channel, r) in measured.keys().zip(&residuals) {
            let row = jac.row(channel)? / (2.0 * std::f64::consts::PI);
            let row = [row.x, row.y, row.z];
            for i in 0..3 {
                for j in 0..3 {
                    jtj[i][j] += row[i] * row[j];
                }
                jtr[i] -= row[i] * r;
            }
        }
        if degenerate {
            // Regularize the rank-deficient system toward the smallest step.
            let trace = jtj[0][0] + jtj[1][1] + jtj[2][2];
            let damping = 1e-9 * trace.max(1e-300);
            for (i, row) in jtj.iter_mut().enumerate() {
                row[i] += damping;
            }
        }
        let Some(step) = solve3(jtj, jtr) else {
            break;
        };
        let full_step = Vec3::new(step[0], step[1], step[2]);
        if full_step.norm() < POSITION_TOL_M {
            converged = true;
        }
        // Backtrack when the full step overshoots. Quadratic convergence
        // means polishing past the step tolerance down to the numerical
        // floor costs only a few more iterations, so keep going while
        // the cost still drops.
        let mut step = full_step;
        let mut improved = false;
        for _ in 0..20 {
            let candidate = x + step;
            let c = objective.cost(candidate)?;
            if c < cost {
                x = candidate;
                cost = c;
                improved = true;
                break;
            }
            step = step * 0.5;
        }
        if !improved {
            // No descent along the Gauss-Newton direction even at 2^-20
            // of the step: at the numerical floor of the minimum.
            converged = true;
            break;
        }
    }

    Ok(Localization {
        position: x,
        residual_hz: (cost / measured.len() as f64).sqrt(),
        converged,
        degenerate,
        iterations,
    })
}

#[cfg(test)]
pub(crate) fn solve3_for_tests(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    solve3(a, b).expect("test system is solvable")
}
