//! Scalar proximal operators for l0 / l1 / lp penalties and the
//! brute-force oracle used to verify them.
//!
//! All operators solve argmin_x 0.5*(x - y)^2 + w*pen(x) with
//! pen(x) = |x|^p (p in (0,1]), or the nonzero indicator for p = 0.

/// Soft threshold: sign(y) * max(|y| - w, 0).
pub fn prox_l1(y: f64, w: f64) -> f64 {
    debug_assert!(w > 0.0);
    let m = y.abs() - w;
    if m > 0.0 {
        m * y.signum()
    } else {
        0.0
    }
}

/// Hard threshold: y if |y| > sqrt(2w), else 0. The tie |y| = sqrt(2w)
/// resolves to 0 (both candidates minimize; zero is the deterministic
/// choice).
pub fn prox_l0(y: f64, w: f64) -> f64 {
    debug_assert!(w > 0.0);
    if y.abs() > (2.0 * w).sqrt() {
        y
    } else {
        0.0
    }
}

/// Number of fixed-point refinements inside [`prox_lp_gst`].
pub const GST_INNER_ITERS: usize = 20;

/// Generalized soft-thresholding result: the prox value plus a flag set
/// when the inner fixed-point iteration still moved more than 1e-10 at
/// the last step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GstResult {
    pub value: f64,
    pub converged: bool,
}

/// Generalized soft-thresholding for 0 < p < 1.
///
/// Threshold tau = (2w(1-p))^(1/(2-p)) + w*p*(2w(1-p))^((p-1)/(2-p));
/// below it the prox is 0, above it the stationary point of
/// 0.5*(x-|y|)^2 + w*x^p is found by iterating x <- |y| - w*p*x^(p-1)
/// from x = |y|.
pub fn prox_lp_gst(y: f64, w: f64, p: f64) -> GstResult {
    debug_assert!(w > 0.0 && p > 0.0 && p < 1.0);
    let base = 2.0 * w * (1.0 - p);
    let tau = base.powf(1.0 / (2.0 - p)) + w * p * base.powf((p - 1.0) / (2.0 - p));
    let ay = y.abs();
    if ay <= tau {
        return GstResult {
            value: 0.0,
            converged: true,
        };
    }
    let mut x = ay;
    let mut last_step = f64::INFINITY;
    for _ in 0..GST_INNER_ITERS {
        let next = ay - w * p * x.powf(p - 1.0);
        last_step = (next - x).abs();
        x = next;
    }
    GstResult {
        value: x * y.signum(),
        converged: last_step <= 1e-10,
    }
}

/// Penalty value |x|^p with the p = 0 convention counting nonzeros.
pub fn penalty(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        if x == 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        x.abs().powf(p)
    }
}

/// Prox objective 0.5*(x - y)^2 + w*|x|^p.
pub fn prox_objective(x: f64, y: f64, w: f64, p: f64) -> f64 {
    0.5 * (x - y) * (x - y) + w * penalty(x, p)
}

/// Brute-force minimizer of the prox objective over [-|y|-1, |y|+1]:
/// a 1e-4-step scan refined by golden-section search inside the winning
/// cell, with x = 0 always kept as a candidate. Reference truth for the
/// closed-form operators; independent of them by construction.
pub fn oracle_prox_grid(y: f64, w: f64, p: f64) -> f64 {
    debug_assert!(w > 0.0 && (0.0..=1.0).contains(&p));
    let hi = y.abs() + 1.0;
    let step = 1e-4;
    let n = (2.0 * hi / step).ceil() as usize;
    let mut best_x = 0.0;
    let mut best_v = prox_objective(0.0, y, w, p);
    for i in 0..=n {
        let x = -hi + i as f64 * step;
        let v = prox_objective(x, y, w, p);
        if v < best_v {
            best_v = v;
            best_x = x;
        }
    }
    if best_x == 0.0 {
        return 0.0;
    }
    // golden-section refinement inside the winning cell; the objective is
    // smooth and unimodal there (the cell excludes the kink at 0)
    let (mut lo, mut hi) = (best_x - step, best_x + step);
    if lo < 0.0 && best_x > 0.0 {
        lo = 0.0;
    }
    if hi > 0.0 && best_x < 0.0 {
        hi = 0.0;
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for _ in 0..80 {
        let m1 = hi - (hi - lo) * INV_PHI;
        let m2 = lo + (hi - lo) * INV_PHI;
        if prox_objective(m1, y, w, p) <= prox_objective(m2, y, w, p) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let refined = 0.5 * (lo + hi);
    if prox_objective(refined, y, w, p) <= best_v {
        refined
    } else {
        best_x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn soft_threshold_values() {
        assert_eq!(prox_l1(2.0, 1.0), 1.0);
        assert_eq!(prox_l1(0.5, 1.0), 0.0);
        assert_eq!(prox_l1(-3.0, 1.0), -2.0);
    }

    #[test]
    fn hard_threshold_values() {
        assert_eq!(prox_l0(2.0, 1.0), 2.0);
        assert_eq!(prox_l0(1.0, 1.0), 0.0);
        // tie |y| = sqrt(2w) goes to zero
        assert_eq!(prox_l0((2.0f64).sqrt(), 1.0), 0.0);
    }

    #[test]
    fn hard_threshold_matches_two_candidate_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let y: f64 = rng.gen_range(-3.0..3.0);
            let w: f64 = rng.gen_range(0.01..2.0);
            // exact two-candidate oracle: x = 0 or x = y
            let at_zero = prox_objective(0.0, y, w, 0.0);
            let at_y = prox_objective(y, y, w, 0.0);
            let want = if at_y < at_zero { y } else { 0.0 };
            assert_eq!(prox_l0(y, w), want);
        }
    }

    #[test]
    fn gst_below_threshold_is_zero() {
        // tau(w=0.5, p=0.8) = 0.78459...
        let r = prox_lp_gst(0.7, 0.5, 0.8);
        assert_eq!(r.value, 0.0);
        let r = prox_lp_gst(-0.78, 0.5, 0.8);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn gst_frozen_value() {
        // argmin 0.5(x-1.5)^2 + 0.5|x|^0.8, grid+golden oracle: 1.10813...
        let r = prox_lp_gst(1.5, 0.5, 0.8);
        assert!(r.converged);
        assert!((r.value - 1.1081301).abs() < 1e-3);
        let oracle = oracle_prox_grid(1.5, 0.5, 0.8);
        assert!((r.value - oracle).abs() < 1e-3);
    }

    #[test]
    fn gst_approaches_soft_threshold_as_p_to_one() {
        for &y in &[2.0, -3.0, 1.4, 0.6] {
            let soft = prox_l1(y, 1.0);
            let gst = prox_lp_gst(y, 1.0, 0.999).value;
            assert!(
                (gst - soft).abs() < 1e-2,
                "p->1 continuity failed at y={y}: {gst} vs {soft}"
            );
        }
    }

    #[test]
    fn oracle_agrees_with_closed_forms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let y: f64 = rng.gen_range(-3.0..3.0);
            let w: f64 = rng.gen_range(0.05..2.0);
            let soft = prox_l1(y, w);
            assert!((oracle_prox_grid(y, w, 1.0) - soft).abs() < 1e-4);
            let hard = prox_l0(y, w);
            // skip the tie point neighbourhood where both minimize
            if (y.abs() - (2.0 * w).sqrt()).abs() > 1e-3 {
                assert!((oracle_prox_grid(y, w, 0.0) - hard).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn oracle_at_zero_input() {
        for &p in &[0.0, 0.3, 0.5, 0.8, 1.0] {
            assert_eq!(oracle_prox_grid(0.0, 0.7, p), 0.0);
        }
    }

    #[test]
    fn prox_objective_optimality_property() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let y: f64 = rng.gen_range(-3.0..3.0);
            let w: f64 = rng.gen_range(1e-3..2.0);
            let p_choices = [0.0, 0.5, 0.8, 1.0];
            let p = p_choices[rng.gen_range(0..4)];
            let x = match p {
                0.0 => prox_l0(y, w),
                1.0 => prox_l1(y, w),
                _ => prox_lp_gst(y, w, p).value,
            };
            let got = prox_objective(x, y, w, p);
            let want = prox_objective(oracle_prox_grid(y, w, p), y, w, p);
            assert!(
                got <= want + 1e-6,
                "prox objective {got} worse than oracle {want} at y={y} w={w} p={p}"
            );
        }
    }

    #[test]
    fn odd_symmetry_and_shrinkage() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..300 {
            let y: f64 = rng.gen_range(-3.0..3.0);
            let w: f64 = rng.gen_range(0.01..2.0);
            let p: f64 = rng.gen_range(0.05..0.95);
            let plus = prox_lp_gst(y, w, p).value;
            let minus = prox_lp_gst(-y, w, p).value;
            assert!((plus + minus).abs() < 1e-12, "odd symmetry");
            assert!(plus.abs() <= y.abs() + 1e-12, "shrinkage");
            assert!(prox_l1(y, w).abs() <= y.abs());
            assert!(prox_l0(y, w).abs() <= y.abs());
        }
    }
}
