use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::grid::Grid;
use super::kernel::Kernel;
use crate::error::{Error, Result};

/// Full complex 2-D spectrum of a grid.
///
/// Transform convention, pinned for the whole crate: the forward
/// transform is unnormalized, the inverse carries the 1/(rows*cols)
/// factor. Consequently Parseval reads ||x||^2 = ||F(x)||^2 / N.
#[derive(Debug, Clone)]
pub struct Spectrum {
    rows: usize,
    cols: usize,
    data: Vec<Complex<f64>>,
}

impl Spectrum {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[Complex<f64>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<f64>] {
        &mut self.data
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn map(&self, f: impl Fn(Complex<f64>) -> Complex<f64>) -> Spectrum {
        Spectrum {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&c| f(c)).collect(),
        }
    }
}

fn fft_pass(
    planner: &mut FftPlanner<f64>,
    data: &mut [Complex<f64>],
    rows: usize,
    cols: usize,
    inverse: bool,
) {
    let row_fft = if inverse {
        planner.plan_fft_inverse(cols)
    } else {
        planner.plan_fft_forward(cols)
    };
    for r in 0..rows {
        row_fft.process(&mut data[r * cols..(r + 1) * cols]);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(rows)
    } else {
        planner.plan_fft_forward(rows)
    };
    let mut scratch = vec![Complex::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            scratch[r] = data[r * cols + c];
        }
        col_fft.process(&mut scratch);
        for r in 0..rows {
            data[r * cols + c] = scratch[r];
        }
    }
}

/// Unnormalized forward 2-D transform.
pub fn fft2(x: &Grid) -> Spectrum {
    let (rows, cols) = x.shape();
    let mut data: Vec<Complex<f64>> = x.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    fft_pass(&mut planner, &mut data, rows, cols, false);
    Spectrum { rows, cols, data }
}

/// Inverse transform (scaled by 1/N) of a spectrum expected to be
/// conjugate-symmetric. The imaginary residue must stay below
/// 1e-10 * max(1, ||real part||); anything larger is an error.
pub fn ifft2_real(s: &Spectrum) -> Result<Grid> {
    let (rows, cols) = s.shape();
    let n = (rows * cols) as f64;
    let mut data = s.data.clone();
    let mut planner = FftPlanner::new();
    fft_pass(&mut planner, &mut data, rows, cols, true);
    let mut real_sq = 0.0;
    let mut imag_sq = 0.0;
    for c in &data {
        let re = c.re / n;
        let im = c.im / n;
        real_sq += re * re;
        imag_sq += im * im;
    }
    let residue = imag_sq.sqrt();
    if residue > 1e-10 * real_sq.sqrt().max(1.0) {
        return Err(Error::ComplexResidue { residue });
    }
    Grid::from_vec(rows, cols, data.iter().map(|c| c.re / n).collect())
}

/// Spectrum of the kernel circularly embedded into a rows x cols grid
/// with its center at the origin, so that multiplying by it in the
/// frequency domain equals [`super::conv::conv2_circ`].
pub fn kernel_spectrum(k: &Kernel, rows: usize, cols: usize) -> Result<Spectrum> {
    if rows < k.height() || cols < k.width() {
        return Err(Error::KernelTooLarge {
            rows,
            cols,
            k_rows: k.height(),
            k_cols: k.width(),
        });
    }
    let (ch, cw) = k.center();
    let mut e = Grid::zeros(rows, cols);
    for a in 0..k.height() {
        for b in 0..k.width() {
            let i = (a + rows - ch) % rows;
            let j = (b + cols - cw) % cols;
            e.set(i, j, e.get(i, j) + k.tap(a, b));
        }
    }
    Ok(fft2(&e))
}

/// Prepared frequency-domain solver for a fixed operator
/// sum_i w_i K_i^T K_i + ridge I; amortizes the kernel spectra across
/// repeated solves with different right-hand sides.
#[derive(Debug, Clone)]
pub struct DiagSolver {
    rows: usize,
    cols: usize,
    denom: Vec<f64>,
}

impl DiagSolver {
    pub fn new(kernels: &[(Kernel, f64)], rows: usize, cols: usize, ridge: f64) -> Result<DiagSolver> {
        let mut denom = vec![ridge; rows * cols];
        for (k, w) in kernels {
            let sp = kernel_spectrum(k, rows, cols)?;
            for (d, c) in denom.iter_mut().zip(sp.data()) {
                *d += w * c.norm_sqr();
            }
        }
        let min_denominator = denom.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_denominator < 1e-14 {
            return Err(Error::SingularSystem { min_denominator });
        }
        Ok(DiagSolver { rows, cols, denom })
    }

    pub fn solve(&self, rhs: &Grid) -> Result<Grid> {
        if rhs.shape() != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                got_rows: rhs.rows(),
                got_cols: rhs.cols(),
            });
        }
        let mut rhs_hat = fft2(rhs);
        for (c, d) in rhs_hat.data_mut().iter_mut().zip(&self.denom) {
            *c /= *d;
        }
        ifft2_real(&rhs_hat)
    }
}

/// Solves (sum_i w_i K_i^T K_i + ridge I) z = rhs under the circular
/// boundary, where each K_i convolves by the paired kernel. The system
/// is diagonal in the frequency domain; a denominator below 1e-14 at any
/// frequency is reported as a singular system.
pub fn solve_diag_freq(kernels: &[(Kernel, f64)], rhs: &Grid, ridge: f64) -> Result<Grid> {
    DiagSolver::new(kernels, rhs.rows(), rhs.cols(), ridge)?.solve(rhs)
}
