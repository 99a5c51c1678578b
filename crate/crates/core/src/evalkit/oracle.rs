//! Analytic ground truth for the moment curves, and a brute-force angle
//! search that checks the harmonic least-squares fits by a different route.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::angle::{cos_sin_deg, fold_deg};
use crate::error::{Error, Result};
use crate::estimator::{
    fit_fourth_moment, AngleGrid, CurvePoint, FourthMomentFit, MomentOrder, SecondMomentFit,
    PCA_DEGENERACY_RATIO,
};
use crate::separator::{
    build_ica, build_pca, compose_demix, DemixMatrix, Mat2, MixingMatrix, PcaModel,
};

/// Resolution of [`grid_fit_oracle`].
pub const GRID_STEP_DEG: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovOracle {
    pub q1: f64,
    pub q2: f64,
    pub theta0_deg: f64,
    pub degenerate: bool,
}

impl CovOracle {
    pub fn as_fit(&self) -> SecondMomentFit {
        SecondMomentFit {
            q1: self.q1,
            q2: self.q2,
            theta0_deg: self.theta0_deg,
            residual_rms: 0.0,
            degenerate: self.degenerate,
        }
    }

    pub fn eval(&self, theta_deg: f64) -> f64 {
        self.as_fit().eval(theta_deg)
    }
}

/// 2nd-moment curve parameters of `C = A·diag(var_s, var_i)·Aᵀ`.
pub fn cov_oracle(a: &MixingMatrix, var_s: f64, var_i: f64) -> CovOracle {
    let m = a.matrix();
    let c11 = m.get(0, 0).powi(2) * var_s + m.get(0, 1).powi(2) * var_i;
    let c22 = m.get(1, 0).powi(2) * var_s + m.get(1, 1).powi(2) * var_i;
    let c12 = m.get(0, 0) * m.get(1, 0) * var_s + m.get(0, 1) * m.get(1, 1) * var_i;
    let q1 = 0.5 * (c11 + c22);
    let q2 = 0.5 * (c11 - c22).hypot(2.0 * c12);
    let theta0_deg = fold_deg(0.5 * (2.0 * c12).atan2(c11 - c22).to_degrees(), 180.0);
    CovOracle {
        q1,
        q2,
        theta0_deg,
        degenerate: !(q2 >= PCA_DEGENERACY_RATIO * q1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurtCoefficients {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

/// Harmonic coefficients of `κ₁cos⁴ψ + κ₂sin⁴ψ + 6cos²ψ·sin²ψ`.
pub fn kurt_coefficients(kappa1: f64, kappa2: f64) -> KurtCoefficients {
    KurtCoefficients {
        p1: 3.0 * (kappa1 + kappa2) / 8.0 + 0.75,
        p2: (kappa1 - kappa2) / 2.0,
        p3: (kappa1 + kappa2 - 6.0) / 8.0,
    }
}

/// `E[(cos ψ·s₁ + sin ψ·s₂)⁴]` with `ψ = φ − α`, for independent
/// unit-variance sources with normalized 4th moments κ₁, κ₂.
pub fn kurt_curve_oracle(kappa1: f64, kappa2: f64, alpha_deg: f64, phi_deg: f64) -> f64 {
    let (c, s) = cos_sin_deg(phi_deg - alpha_deg);
    let (c2, s2) = (c * c, s * s);
    kappa1 * c2 * c2 + kappa2 * s2 * s2 + 6.0 * c2 * s2
}

/// The full noiseless chain: covariance oracle → PCA → whitened kurtosis
/// curve → ICA → de-mixing matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleChain {
    pub cov: CovOracle,
    pub pca: PcaModel,
    /// Per-channel variance of oracle-whitened data.
    pub whitened_variance: f64,
    /// Direction of the SOI column after oracle whitening.
    pub alpha_deg: f64,
    pub curve4: Vec<CurvePoint>,
    pub fit4: FourthMomentFit,
    pub demix: DemixMatrix,
}

pub fn oracle_chain(
    a: &MixingMatrix,
    var_s: f64,
    var_i: f64,
    kappa_s: f64,
    kappa_i: f64,
    phi_grid: &AngleGrid,
) -> Result<OracleChain> {
    let cov = cov_oracle(a, var_s, var_i);
    let pca = build_pca(&cov.as_fit())?;
    let whitened_variance = cov.q1 + cov.q2;
    let b = pca.whitening_matrix().mul(a.matrix());
    let alpha_deg = fold_deg(b.get(1, 0).atan2(b.get(0, 0)).to_degrees(), 180.0);
    let scale = whitened_variance * whitened_variance;
    let curve4: Vec<CurvePoint> = phi_grid
        .angles_deg()
        .iter()
        .map(|&phi| CurvePoint {
            angle_deg: phi,
            moment: scale * kurt_curve_oracle(kappa_s, kappa_i, alpha_deg, phi),
        })
        .collect();
    let fit4 = fit_fourth_moment(&curve4)?;
    let ica = build_ica(&fit4)?;
    Ok(OracleChain {
        cov,
        pca,
        whitened_variance,
        alpha_deg,
        curve4,
        demix: compose_demix(&ica, &pca),
        fit4,
    })
}

/// Result of the exhaustive angle search. For order 2, `offset`/`amp2` are
/// q1/q2 and `amp4` is zero; for order 4 they are p1/p2/p3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFit {
    pub offset: f64,
    pub amp2: f64,
    pub amp4: f64,
    pub angle_deg: f64,
    pub residual_rms: f64,
    pub degenerate: bool,
}

fn lsq(rows: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let cols = rows.first()?.len();
    let x = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let coef = svd.solve(&yv, 1e-12 * smax).ok()?;
    let r = &x * &coef - &yv;
    Some((
        coef.iter().copied().collect(),
        (r.norm_squared() / y.len() as f64).sqrt(),
    ))
}

/// Exhaustive search over the phase on a 0.1° grid with a closed-form
/// amplitude solve at every candidate; the lowest residual wins, ties go to
/// the lowest angle. Amplitudes of the phased harmonic are constrained to the
/// fit's sign convention (q2 ≥ 0, p3 ≤ 0).
pub fn grid_fit_oracle(curve: &[CurvePoint], order: MomentOrder) -> Result<GridFit> {
    let distinct = AngleGrid::new(curve.iter().map(|p| fold_deg(p.angle_deg, 180.0)).collect())?
        .distinct_count();
    if distinct < order.min_angles() {
        return Err(Error::InsufficientAngles {
            required: order.min_angles(),
            got: distinct,
        });
    }
    let y: Vec<f64> = curve.iter().map(|p| p.moment).collect();
    let scale = y
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tie_tol = 1e-12 * scale;
    let (period, steps) = match order {
        MomentOrder::Second => (180.0, (180.0 / GRID_STEP_DEG).round() as usize),
        MomentOrder::Fourth => (90.0, (90.0 / GRID_STEP_DEG).round() as usize),
    };

    let mut best: Option<GridFit> = None;
    let mut all_tied = true;
    for k in 0..steps {
        let angle = k as f64 * GRID_STEP_DEG;
        let candidate = match order {
            MomentOrder::Second => fit_second_at(curve, &y, angle),
            MomentOrder::Fourth => fit_fourth_at(curve, &y, angle),
        }
        .ok_or_else(|| Error::InsufficientAngles {
            required: order.min_angles(),
            got: distinct,
        })?;
        match &best {
            None => best = Some(candidate),
            Some(b) => {
                if (candidate.residual_rms - b.residual_rms).abs() > tie_tol {
                    all_tied = false;
                }
                if candidate.residual_rms < b.residual_rms - tie_tol {
                    best = Some(candidate);
                }
            }
        }
    }
    let mut fit = best.expect("grid has at least one step");
    fit.angle_deg = fold_deg(fit.angle_deg, period);
    let amp = match order {
        MomentOrder::Second => fit.amp2,
        MomentOrder::Fourth => -fit.amp4,
    };
    fit.degenerate = all_tied || !(amp >= PCA_DEGENERACY_RATIO * fit.offset.abs());
    Ok(fit)
}

fn fit_second_at(curve: &[CurvePoint], y: &[f64], theta0: f64) -> Option<GridFit> {
    let rows: Vec<Vec<f64>> = curve
        .iter()
        .map(|p| vec![1.0, cos_sin_deg(2.0 * (p.angle_deg - theta0)).0])
        .collect();
    let (mut coef, mut resid) = lsq(&rows, y)?;
    if coef[1] < 0.0 {
        let ones: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0]]).collect();
        let (c, r) = lsq(&ones, y)?;
        coef = vec![c[0], 0.0];
        resid = r;
    }
    Some(GridFit {
        offset: coef[0],
        amp2: coef[1],
        amp4: 0.0,
        angle_deg: theta0,
        residual_rms: resid,
        degenerate: false,
    })
}

fn fit_fourth_at(curve: &[CurvePoint], y: &[f64], phi0: f64) -> Option<GridFit> {
    // free 2φ harmonic, phased 4φ harmonic
    let rows: Vec<Vec<f64>> = curve
        .iter()
        .map(|p| {
            let (c2, s2) = cos_sin_deg(2.0 * p.angle_deg);
            vec![1.0, c2, s2, cos_sin_deg(4.0 * (p.angle_deg - phi0)).0]
        })
        .collect();
    let (mut coef, mut resid) = lsq(&rows, y)?;
    if coef[3] > 0.0 {
        let trimmed: Vec<Vec<f64>> = rows.iter().map(|r| r[..3].to_vec()).collect();
        let (c, r) = lsq(&trimmed, y)?;
        coef = vec![c[0], c[1], c[2], 0.0];
        resid = r;
    }
    let (c2, s2) = cos_sin_deg(2.0 * phi0);
    Some(GridFit {
        offset: coef[0],
        amp2: coef[1] * c2 + coef[2] * s2,
        amp4: coef[3],
        angle_deg: phi0,
        residual_rms: resid,
        degenerate: false,
    })
}

/// Rotation taking the oracle-whitened mixing matrix onto the channel axes;
/// exposed for tests that need `W·A` of the noiseless chain.
pub fn whitened_mixing(chain: &OracleChain, a: &MixingMatrix) -> Mat2 {
    chain.pca.whitening_matrix().mul(a.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::fit_second_moment;
    use crate::separator::permutation_leakage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eig_angle_2x2(c11: f64, c12: f64, c22: f64) -> f64 {
        // largest eigenvalue of the symmetric matrix and its eigenvector
        let tr = c11 + c22;
        let det = c11 * c22 - c12 * c12;
        let l1 = tr / 2.0 + (tr * tr / 4.0 - det).max(0.0).sqrt();
        let (vx, vy) = if c12.abs() > 1e-300 {
            (l1 - c22, c12)
        } else if c11 >= c22 {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        fold_deg(vy.atan2(vx).to_degrees(), 180.0)
    }

    #[test]
    fn cov_oracle_examples() {
        let id = MixingMatrix::new([[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let o = cov_oracle(&id, 1.0, 1.0);
        assert_eq!((o.q1, o.q2), (1.0, 0.0));
        assert!(o.degenerate);
        let a = MixingMatrix::new([[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let o = cov_oracle(&a, 1.0, 1.0);
        assert!((o.q1 - 1.25).abs() < 1e-15);
        assert!((o.q2 - 1.0).abs() < 1e-15);
        assert!((o.theta0_deg - 45.0).abs() < 1e-12);
        let a2 = MixingMatrix::new([[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let o2 = cov_oracle(&a2, 1.0, 1.0);
        assert!((o2.q1 - 4.0 * o.q1).abs() < 1e-14);
        assert!((o2.q2 - 4.0 * o.q2).abs() < 1e-14);
        assert_eq!(o2.theta0_deg, o.theta0_deg);
    }

    #[test]
    fn cov_oracle_matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        while checked < 1000 {
            let rows = [
                [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
                [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            ];
            let Ok(a) = MixingMatrix::new(rows) else {
                continue;
            };
            if a.condition_number() > 10.0 {
                continue;
            }
            let (vs, vi) = (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
            let o = cov_oracle(&a, vs, vi);
            let m = a.matrix();
            let c11 = m.get(0, 0).powi(2) * vs + m.get(0, 1).powi(2) * vi;
            let c22 = m.get(1, 0).powi(2) * vs + m.get(1, 1).powi(2) * vi;
            let c12 = m.get(0, 0) * m.get(1, 0) * vs + m.get(0, 1) * m.get(1, 1) * vi;
            if o.degenerate {
                continue;
            }
            let e = eig_angle_2x2(c11, c12, c22);
            let d = crate::angle::angular_distance_deg(e, o.theta0_deg, 180.0);
            assert!(d < 1e-9, "eig {e} vs oracle {}", o.theta0_deg);
            checked += 1;
        }
    }

    #[test]
    fn kurt_closed_form_examples() {
        for k in 0..24 {
            let phi = 7.5 * k as f64;
            assert!((kurt_curve_oracle(3.0, 3.0, 12.0, phi) - 3.0).abs() < 1e-14);
        }
        assert_eq!(kurt_curve_oracle(1.64, 3.0, 33.0, 33.0), 1.64);
        let c = kurt_coefficients(1.64, 3.0);
        assert!((c.p1 - 2.49).abs() < 1e-14);
        assert!((c.p2 + 0.68).abs() < 1e-14);
        assert!((c.p3 + 0.17).abs() < 1e-14);
        // expansion equals the direct form everywhere
        for k in 0..180 {
            let psi = k as f64;
            let (c2, c4) = (
                (2.0 * psi).to_radians().cos(),
                (4.0 * psi).to_radians().cos(),
            );
            let series = c.p1 + c.p2 * c2 + c.p3 * c4;
            assert!((series - kurt_curve_oracle(1.64, 3.0, 0.0, psi)).abs() < 1e-13);
        }
    }

    #[test]
    fn oracle_chain_is_generalized_permutation() {
        let a = MixingMatrix::new([[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let chain = oracle_chain(&a, 1.0, 1.0, 1.64, 3.0, &AngleGrid::default_phi()).unwrap();
        let g = chain.demix.w.mul(a.matrix());
        assert!(permutation_leakage(&g) < 1e-6, "{g:?}");
        let b = whitened_mixing(&chain, &a);
        let dot = b.get(0, 0) * b.get(0, 1) + b.get(1, 0) * b.get(1, 1);
        assert!(dot.abs() < 1e-12);
    }

    #[test]
    fn rotation_mixing_chain() {
        let a = MixingMatrix::new(Mat2::rotation(30.0).0).unwrap();
        // isotropic covariance: whitening is a pure rotation, ICA does all the work
        assert!(cov_oracle(&a, 1.0, 1.0).degenerate);
        let chain = oracle_chain(&a, 1.0, 1.0, 1.64, 3.0, &AngleGrid::default_phi()).unwrap();
        let g = chain.demix.w.mul(a.matrix());
        assert!(permutation_leakage(&g) < 1e-12, "{g:?}");
        for v in g.0.iter().flatten() {
            assert!(v.abs() < 1e-12 || (v.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_oracle_agrees_with_lsq_fit() {
        let curve: Vec<CurvePoint> = [0.0, 45.0, 90.0, 135.0]
            .iter()
            .map(|&t: &f64| CurvePoint {
                angle_deg: t,
                moment: 2.0 + (2.0 * (t - 30.0)).to_radians().cos(),
            })
            .collect();
        let g = grid_fit_oracle(&curve, MomentOrder::Second).unwrap();
        let f = fit_second_moment(&curve).unwrap();
        assert!((g.angle_deg - f.theta0_deg).abs() <= GRID_STEP_DEG);
        assert!(g.residual_rms < 1e-12);
        assert!(!g.degenerate);
    }

    #[test]
    fn grid_oracle_flat_curve() {
        let curve: Vec<CurvePoint> = AngleGrid::default_phi()
            .angles_deg()
            .iter()
            .map(|&a| CurvePoint {
                angle_deg: a,
                moment: 3.0,
            })
            .collect();
        for order in [MomentOrder::Second, MomentOrder::Fourth] {
            let g = grid_fit_oracle(&curve, order).unwrap();
            assert_eq!(g.angle_deg, 0.0);
            assert!(g.degenerate);
        }
    }

    #[test]
    fn grid_oracle_fourth_order_exact() {
        let chain = oracle_chain(
            &MixingMatrix::new([[1.0, 0.5], [0.3, 1.0]]).unwrap(),
            1.0,
            1.0,
            1.64,
            3.0,
            &AngleGrid::default_phi(),
        )
        .unwrap();
        let g = grid_fit_oracle(&chain.curve4, MomentOrder::Fourth).unwrap();
        assert!(
            crate::angle::angular_distance_deg(g.angle_deg, chain.fit4.phi0_deg, 90.0)
                <= GRID_STEP_DEG
        );
        assert!(!g.degenerate);
    }
}
