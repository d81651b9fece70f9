use crate::error::{Error, Result};

/// Small 2-D filter with odd support, stored row-major.
///
/// Two construction paths exist: [`Kernel::new`] for general filters
/// (gradient filters sum to zero) and [`Kernel::blur`] for point spread
/// functions, which enforces nonnegative taps normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    height: usize,
    width: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(height: usize, width: usize, taps: Vec<f64>) -> Result<Kernel> {
        if height == 0 || width == 0 || height % 2 == 0 || width % 2 == 0 {
            return Err(Error::InvalidKernel(format!(
                "support must be positive and odd, got {height}x{width}"
            )));
        }
        if taps.len() != height * width {
            return Err(Error::InvalidKernel(format!(
                "taps length {} does not match {height}x{width}",
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidKernel("non-finite tap".into()));
        }
        Ok(Kernel {
            height,
            width,
            taps,
        })
    }

    /// Blur-kernel constructor: taps must be nonnegative with a positive
    /// sum; they are rescaled so the sum is exactly 1.
    pub fn blur(height: usize, width: usize, taps: Vec<f64>) -> Result<Kernel> {
        let mut k = Kernel::new(height, width, taps)?;
        if k.taps.iter().any(|&t| t < 0.0) {
            return Err(Error::InvalidKernel("blur taps must be nonnegative".into()));
        }
        let sum: f64 = k.taps.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidKernel("blur taps sum to zero".into()));
        }
        for t in &mut k.taps {
            *t /= sum;
        }
        Ok(k)
    }

    /// 1x1 identity kernel.
    pub fn identity() -> Kernel {
        Kernel {
            height: 1,
            width: 1,
            taps: vec![1.0],
        }
    }

    /// Isotropic Gaussian blur, support chosen to cover +-3 sigma.
    pub fn gaussian(sigma: f64) -> Result<Kernel> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let size = 2 * radius + 1;
        let mut taps = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let di = i as f64 - radius as f64;
                let dj = j as f64 - radius as f64;
                taps.push((-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp());
            }
        }
        Kernel::blur(size, size, taps)
    }

    /// Linear motion blur: a line segment of the given length (pixels)
    /// through the kernel center at `angle_deg`, rasterized with bilinear
    /// weights and normalized.
    pub fn motion(length: f64, angle_deg: f64) -> Result<Kernel> {
        if !(length >= 1.0) || !length.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "motion length must be >= 1, got {length}"
            )));
        }
        let radius = ((length / 2.0).ceil() as usize).max(1);
        let size = 2 * radius + 1;
        let mut taps = vec![0.0; size * size];
        let theta = angle_deg.to_radians();
        let (dy, dx) = (theta.sin(), theta.cos());
        let steps = (length * 8.0).ceil() as usize;
        for s in 0..=steps {
            let t = (s as f64 / steps as f64 - 0.5) * (length - 1.0);
            let y = radius as f64 + t * dy;
            let x = radius as f64 + t * dx;
            let (i0, j0) = (y.floor() as isize, x.floor() as isize);
            let (fy, fx) = (y - y.floor(), x - x.floor());
            for (di, dj, w) in [
                (0, 0, (1.0 - fy) * (1.0 - fx)),
                (0, 1, (1.0 - fy) * fx),
                (1, 0, fy * (1.0 - fx)),
                (1, 1, fy * fx),
            ] {
                let (i, j) = (i0 + di, j0 + dj);
                if i >= 0 && j >= 0 && (i as usize) < size && (j as usize) < size {
                    taps[i as usize * size + j as usize] += w;
                }
            }
        }
        Kernel::blur(size, size, taps)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [f64] {
        &mut self.taps
    }

    #[inline]
    pub fn tap(&self, a: usize, b: usize) -> f64 {
        self.taps[a * self.width + b]
    }

    /// Center offsets (height/2, width/2).
    pub fn center(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    /// 180-degree rotation of the taps; the adjoint of convolution by
    /// `self` is convolution by the flipped kernel.
    pub fn flipped(&self) -> Kernel {
        let mut taps = Vec::with_capacity(self.taps.len());
        for a in (0..self.height).rev() {
            for b in (0..self.width).rev() {
                taps.push(self.tap(a, b));
            }
        }
        Kernel {
            height: self.height,
            width: self.width,
            taps,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.flipped().taps == self.taps
    }
}
