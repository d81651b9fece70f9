use super::grid::Grid;
use super::kernel::Kernel;
use crate::error::{Error, Result};

fn check_dims(x: &Grid, k: &Kernel) -> Result<()> {
    if x.rows() < k.height() || x.cols() < k.width() {
        return Err(Error::KernelTooLarge {
            rows: x.rows(),
            cols: x.cols(),
            k_rows: k.height(),
            k_cols: k.width(),
        });
    }
    Ok(())
}

/// Circular (periodic-boundary) convolution of `x` with `k`, same shape
/// as `x`. True convolution: the kernel tap at offset (da, db) from the
/// center multiplies x(i - da, j - db), so convolving a unit impulse
/// reproduces the taps centered at the impulse.
pub fn conv2_circ(x: &Grid, k: &Kernel) -> Result<Grid> {
    check_dims(x, k)?;
    let (rows, cols) = x.shape();
    let (ch, cw) = k.center();
    let mut out = Grid::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let mut acc = 0.0;
            for a in 0..k.height() {
                // i - (a - ch) wrapped into [0, rows); rows >= k.height > a
                // keeps the usize arithmetic nonnegative
                let si = (i + rows + ch - a) % rows;
                for b in 0..k.width() {
                    let sj = (j + cols + cw - b) % cols;
                    acc += k.tap(a, b) * x.get(si, sj);
                }
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Adjoint of [`conv2_circ`] in the kernel `k`: correlation, equal to
/// convolution with the spatially reversed kernel. Satisfies
/// `<conv2_circ(x,k), y> == <x, adjoint_conv2_circ(y,k)>`.
pub fn adjoint_conv2_circ(x: &Grid, k: &Kernel) -> Result<Grid> {
    conv2_circ(x, &k.flipped())
}

/// Forward-difference gradient filter pair (horizontal, vertical), padded
/// to odd support. Applying the horizontal filter yields
/// x(i, j+1) - x(i, j) under the periodic boundary.
pub fn gradient_filters() -> (Kernel, Kernel) {
    // 1x3 taps [1, -1, 0]: out(i,j) = x(i,j+1) - x(i,j).
    let dx = Kernel::new(1, 3, vec![1.0, -1.0, 0.0]).expect("static kernel");
    let dy = Kernel::new(3, 1, vec![1.0, -1.0, 0.0]).expect("static kernel");
    (dx, dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent O(n^2 m^2) oracle: direct spatial loop with explicit
    /// modular index arithmetic, kept free of the implementation's
    /// index-folding shortcuts.
    fn conv_oracle(x: &Grid, k: &Kernel) -> Grid {
        let (rows, cols) = x.shape();
        let (ch, cw) = k.center();
        Grid::from_fn(rows, cols, |i, j| {
            let mut acc = 0.0;
            for a in 0..k.height() {
                for b in 0..k.width() {
                    let da = a as isize - ch as isize;
                    let db = b as isize - cw as isize;
                    let si = (i as isize - da).rem_euclid(rows as isize) as usize;
                    let sj = (j as isize - db).rem_euclid(cols as isize) as usize;
                    acc += k.tap(a, b) * x.get(si, sj);
                }
            }
            acc
        })
    }

    fn rand_grid(rows: usize, cols: usize, seed: u64) -> Grid {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn rand_kernel(h: usize, w: usize, seed: u64) -> Kernel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let taps = (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Kernel::new(h, w, taps).unwrap()
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = rand_grid(5, 7, 1);
        let y = conv2_circ(&x, &Kernel::identity()).unwrap();
        assert_eq!(x, y);
        let y = adjoint_conv2_circ(&x, &Kernel::identity()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn normalized_blur_preserves_constants() {
        let x = Grid::constant(6, 6, 3.25);
        let k = Kernel::blur(3, 3, vec![1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0]).unwrap();
        let y = conv2_circ(&x, &k).unwrap();
        for &v in y.data() {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_response_matches_spatial_oracle() {
        let mut x = Grid::zeros(4, 4);
        x.set(0, 0, 1.0);
        let k = rand_kernel(3, 3, 7);
        let got = conv2_circ(&x, &k).unwrap();
        let want = conv_oracle(&x, &k);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-15);
        }
        // periodic placement of the taps around (0,0): offset (di,dj)
        // reads tap(center + di, center + dj)
        assert_eq!(got.get(1, 1), k.tap(2, 2));
        assert_eq!(got.get(3, 3), k.tap(0, 0));
        assert_eq!(got.get(0, 3), k.tap(1, 0));
    }

    #[test]
    fn conv_matches_oracle_on_random_instances() {
        for seed in 0..5u64 {
            let x = rand_grid(8, 9, seed);
            let k = rand_kernel(3, 5, seed + 100);
            let got = conv2_circ(&x, &k).unwrap();
            let want = conv_oracle(&x, &k);
            for (g, w) in got.data().iter().zip(want.data()) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_kernel_is_self_adjoint() {
        let x = rand_grid(6, 6, 3);
        let k = Kernel::blur(3, 3, vec![1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0]).unwrap();
        let a = conv2_circ(&x, &k).unwrap();
        let b = adjoint_conv2_circ(&x, &k).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn adjoint_identity_inner_product() {
        for seed in 0..8u64 {
            let x = rand_grid(8, 8, seed);
            let y = rand_grid(8, 8, seed + 50);
            let k = rand_kernel(3, 3, seed + 99);
            let kx = conv2_circ(&x, &k).unwrap();
            let kty = adjoint_conv2_circ(&y, &k).unwrap();
            let lhs = kx.dot(&y).unwrap();
            let rhs = x.dot(&kty).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "adjoint identity violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn linearity() {
        let x = rand_grid(8, 8, 11);
        let y = rand_grid(8, 8, 12);
        let k = rand_kernel(5, 3, 13);
        let (a, b) = (0.7, -1.3);
        let lhs = conv2_circ(&x.scale(a).add(&y.scale(b)).unwrap(), &k).unwrap();
        let rhs = conv2_circ(&x, &k)
            .unwrap()
            .scale(a)
            .add(&conv2_circ(&y, &k).unwrap().scale(b))
            .unwrap();
        for (p, q) in lhs.data().iter().zip(rhs.data()) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_larger_than_grid_rejected() {
        let x = Grid::zeros(2, 2);
        let k = Kernel::new(3, 3, vec![0.0; 9]).unwrap();
        match conv2_circ(&x, &k) {
            Err(Error::KernelTooLarge { rows: 2, k_rows: 3, .. }) => {}
            other => panic!("expected KernelTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn gradient_filters_on_constant_and_ramp() {
        let (dx, dy) = gradient_filters();
        let c = Grid::constant(5, 5, 2.0);
        assert!(conv2_circ(&c, &dx).unwrap().max_abs() < 1e-15);
        assert!(conv2_circ(&c, &dy).unwrap().max_abs() < 1e-15);

        let ramp = Grid::from_fn(4, 6, |_, j| j as f64);
        let g = conv2_circ(&ramp, &dx).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                assert!((g.get(i, j) - 1.0).abs() < 1e-14);
            }
            // wrap column: x(i,0) - x(i,cols-1)
            assert!((g.get(i, 5) + 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_filters_adjoint_identity() {
        let (dx, dy) = gradient_filters();
        for k in [dx, dy] {
            let x = rand_grid(7, 7, 21);
            let y = rand_grid(7, 7, 22);
            let lhs = conv2_circ(&x, &k).unwrap().dot(&y).unwrap();
            let rhs = x.dot(&adjoint_conv2_circ(&y, &k).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
