//! Value/desirability correspondence and noise calibration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pde::DesirabilityField;

/// Default clamp applied to `Ψ` before taking the logarithm.
pub const DEFAULT_FLOOR: f64 = 1e-300;

/// Control-affine input `G` (n x m) and quadratic control penalty `R` (m x m).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlModel {
    g: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
}

impl ControlModel {
    pub fn new(g: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if !r.is_square() || g.ncols() != r.nrows() {
            return Err(Error::InvalidParameter(format!(
                "G is {}x{} but R is {}x{}",
                g.nrows(),
                g.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        let scale = r.amax().max(1.0);
        if (&r - r.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("R must be symmetric".into()));
        }
        let min_eig = r.clone().symmetric_eigenvalues().min();
        if min_eig <= 1e-12 {
            return Err(Error::InvalidParameter(format!("R must be positive definite (min eigenvalue {min_eig:e})")));
        }
        let r_inv = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("R must be positive definite".into()))?
            .inverse();
        Ok(ControlModel { g, r, r_inv })
    }

    /// `G = I`, `R = r·I`.
    pub fn isotropic(dim: usize, r: f64) -> Result<Self> {
        ControlModel::new(DMatrix::identity(dim, dim), DMatrix::from_diagonal_element(dim, dim, r))
    }

    /// Fully actuated model satisfying `λ R⁻¹ = Σt`: `G = I`, `R = diag(λ/σ_a)`.
    pub fn matched(lambda: f64, sigma_t: &[f64]) -> Result<Self> {
        let n = sigma_t.len();
        let diag: Vec<f64> = sigma_t.iter().map(|s| lambda / s).collect();
        ControlModel::new(DMatrix::identity(n, n), DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    pub fn state_dim(&self) -> usize {
        self.g.nrows()
    }

    /// `u* = -R⁻¹ Gᵀ ∇V`.
    pub fn optimal_control(&self, grad_v: &[f64]) -> Vec<f64> {
        let grad = nalgebra::DVector::from_column_slice(grad_v);
        let u = -(&self.r_inv * (self.g.transpose() * grad));
        u.iter().copied().collect()
    }

    /// `G u`.
    pub fn actuate(&self, u: &[f64]) -> Vec<f64> {
        (&self.g * nalgebra::DVector::from_column_slice(u)).iter().copied().collect()
    }

    /// `½ uᵀ R u`.
    pub fn effort(&self, u: &[f64]) -> f64 {
        let u = nalgebra::DVector::from_column_slice(u);
        0.5 * u.dot(&(&self.r * &u))
    }

    /// Same model with `R` multiplied by `beta`.
    pub fn scaled(&self, beta: f64) -> Result<Self> {
        ControlModel::new(self.g.clone(), &self.r * beta)
    }
}

/// Noise input `B` (n x k) and increment covariance `Σε = LLᵀ` (k x k).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub b: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
}

impl NoiseModel {
    pub fn new(b: DMatrix<f64>, sigma_eps: DMatrix<f64>) -> Result<Self> {
        if !sigma_eps.is_square() || b.ncols() != sigma_eps.nrows() {
            return Err(Error::InvalidParameter("B and Σε dimensions disagree".into()));
        }
        let scale = sigma_eps.amax().max(f64::MIN_POSITIVE);
        if (&sigma_eps - sigma_eps.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("Σε must be symmetric".into()));
        }
        if sigma_eps.clone().symmetric_eigenvalues().min() < -1e-12 * scale {
            return Err(Error::InvalidParameter("Σε must be positive semidefinite".into()));
        }
        Ok(NoiseModel { b, sigma_eps })
    }

    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        NoiseModel::new(DMatrix::identity(dim, dim), DMatrix::from_diagonal_element(dim, dim, sigma))
    }

    /// `Σt = B Σε Bᵀ`.
    pub fn sigma_t(&self) -> DMatrix<f64> {
        &self.b * &self.sigma_eps * self.b.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub lambda: f64,
    pub sigma_t: Vec<f64>,
}

/// Finds the single `λ > 0` with `λ G R⁻¹ Gᵀ = B Σε Bᵀ`.
pub fn calibrate_lambda(control: &ControlModel, noise: &NoiseModel) -> Result<Calibration> {
    let sigma = noise.sigma_t();
    let m = &control.g * &control.r_inv * control.g.transpose();
    if sigma.shape() != m.shape() {
        return Err(Error::InvalidParameter(format!(
            "state dimensions disagree: G gives {}, B gives {}",
            m.nrows(),
            sigma.nrows()
        )));
    }
    let n = sigma.nrows();
    let sigma_max = sigma.amax();
    if !(sigma_max > 0.0) {
        return Err(Error::InvalidParameter("Σt vanishes; lambda must be positive".into()));
    }
    let cutoff = 1e-12 * sigma_max;
    for i in 0..n {
        for j in 0..n {
            if i != j && sigma[(i, j)].abs() > cutoff {
                return Err(Error::UnsupportedCovariance(format!(
                    "Σt has off-diagonal entry ({i}, {j}) = {}",
                    sigma[(i, j)]
                )));
            }
        }
    }
    let m_cutoff = 1e-12 * m.amax();
    // Reference ratio from the largest entry of Σt.
    let (ri, rj) = (0..n * n)
        .map(|k| (k / n, k % n))
        .max_by(|a, b| sigma[*a].abs().total_cmp(&sigma[*b].abs()))
        .expect("non-empty");
    if m[(ri, rj)].abs() <= m_cutoff {
        return Err(Error::NoiseAssumptionViolated("control cannot span the noise".into()));
    }
    let lambda = sigma[(ri, rj)] / m[(ri, rj)];
    if !(lambda > 0.0) {
        return Err(Error::NoiseAssumptionViolated(format!("lambda = {lambda} is not positive")));
    }
    for i in 0..n {
        for j in 0..n {
            let (s, mm) = (sigma[(i, j)], m[(i, j)]);
            if s.abs() <= cutoff && mm.abs() <= m_cutoff {
                continue;
            }
            if s.abs() <= cutoff || mm.abs() <= m_cutoff || ((s / mm - lambda) / lambda).abs() > 1e-6 {
                return Err(Error::NoiseAssumptionViolated(format!(
                    "entry ({i}, {j}): Σt = {s}, G R⁻¹ Gᵀ = {mm}, no common ratio"
                )));
            }
        }
    }
    Ok(Calibration { lambda, sigma_t: (0..n).map(|i| sigma[(i, i)]).collect() })
}

/// Value field `V = -λ log Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub values: Vec<f64>,
    pub lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

pub fn desirability_to_value(psi: &DesirabilityField, lambda: f64, floor: f64) -> Result<ValueField> {
    check_lambda(lambda)?;
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("floor must be positive, got {floor}")));
    }
    let values = psi.values.iter().map(|&p| -lambda * p.max(floor).ln()).collect();
    Ok(ValueField { values, lambda })
}

pub fn value_to_desirability(v: &ValueField) -> DesirabilityField {
    DesirabilityField { values: v.values.iter().map(|&x| (-x / v.lambda).exp()).collect() }
}

/// Dirichlet data for a terminal penalty: `e^(-φ/λ)`.
pub fn transform_boundary(phi: f64, lambda: f64) -> f64 {
    (-phi / lambda).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub lambda: f64,
    pub sigma_t: Vec<f64>,
    /// Factor applied to the control penalty `R`.
    pub r_scale: f64,
}

/// Scales noise by `gamma` and control penalty by `beta`: `λ' = βγλ`,
/// `Σt' = γΣt`, `R' = βR`. The Laplace-variant `Ψ` for fixed boundary data is
/// unchanged; only `V = -λ' log Ψ` and the `φ ↔ Ψ` map rescale.
pub fn equivalent_scaling(lambda: f64, sigma_t: &[f64], gamma: f64, beta: f64) -> Result<Scaling> {
    check_lambda(lambda)?;
    if !(gamma > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma and beta must be positive, got {gamma}, {beta}")));
    }
    Ok(Scaling {
        lambda: beta * gamma * lambda,
        sigma_t: sigma_t.iter().map(|s| gamma * s).collect(),
        r_scale: beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn calibrates_identity_case() {
        let c = ControlModel::isotropic(2, 1.0).unwrap();
        let n = NoiseModel::isotropic(2, 2.0).unwrap();
        let cal = calibrate_lambda(&c, &n).unwrap();
        assert_eq!(cal.lambda, 2.0);
        assert_eq!(cal.sigma_t, vec![2.0, 2.0]);
    }

    #[test]
    fn calibrates_grasp_parameters() {
        let c = ControlModel::isotropic(3, 0.02).unwrap();
        let n = NoiseModel::isotropic(3, 5.0).unwrap();
        let cal = calibrate_lambda(&c, &n).unwrap();
        assert!((cal.lambda - 0.1).abs() < 1e-12);
        let m = c.g() * c.r_inv() * c.g().transpose() * cal.lambda;
        let diff = (m - n.sigma_t()).amax();
        assert!(diff < 1e-9 * 5.0);
    }

    #[test]
    fn rejects_mismatched_noise() {
        let c = ControlModel::isotropic(2, 1.0).unwrap();
        let n = NoiseModel::new(DMatrix::identity(2, 2), DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0])).unwrap();
        assert!(matches!(calibrate_lambda(&c, &n), Err(Error::NoiseAssumptionViolated(_))));

        let full = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 2.0]);
        let n = NoiseModel::new(DMatrix::identity(2, 2), full).unwrap();
        assert!(matches!(calibrate_lambda(&c, &n), Err(Error::UnsupportedCovariance(_))));

        // under-actuated: one control for two noisy axes
        let c = ControlModel::new(DMatrix::from_row_slice(2, 1, &[1.0, 0.0]), DMatrix::identity(1, 1)).unwrap();
        let n = NoiseModel::isotropic(2, 1.0).unwrap();
        assert!(matches!(calibrate_lambda(&c, &n), Err(Error::NoiseAssumptionViolated(_))));
    }

    #[test]
    fn rejects_indefinite_r() {
        assert!(ControlModel::isotropic(2, 0.0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(ControlModel::new(DMatrix::identity(2, 2), asym).is_err());
    }

    #[test]
    fn value_examples() {
        let psi = DesirabilityField { values: vec![1.0, (-20.0f64).exp(), 0.0] };
        let v = desirability_to_value(&psi, 1.0, DEFAULT_FLOOR).unwrap();
        assert_eq!(v.values[0], 0.0);
        assert!((v.values[1] - 20.0).abs() < 1e-12);
        assert!((v.values[2] - 690.7755278982137).abs() < 1e-9);
        assert!(desirability_to_value(&psi, 0.0, DEFAULT_FLOOR).is_err());
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(transform_boundary(0.0, 1.0), 1.0);
        assert!((transform_boundary(20.0, 1.0) - 2.061153622438558e-9).abs() < 1e-21);
        assert!((transform_boundary(1.0, 0.1) - 4.5399929762484854e-5).abs() < 1e-17);
    }

    #[test]
    fn scaling_examples() {
        let s = equivalent_scaling(1.0, &[2.0, 2.0], 2.0, 1.0).unwrap();
        assert_eq!(s, Scaling { lambda: 2.0, sigma_t: vec![4.0, 4.0], r_scale: 1.0 });
        let s = equivalent_scaling(1.0, &[2.0, 2.0], 1.0, 0.5).unwrap();
        assert_eq!(s, Scaling { lambda: 0.5, sigma_t: vec![2.0, 2.0], r_scale: 0.5 });
        let s = equivalent_scaling(0.3, &[1.5, 2.5], 1.0, 1.0).unwrap();
        assert_eq!(s, Scaling { lambda: 0.3, sigma_t: vec![1.5, 2.5], r_scale: 1.0 });
        assert!(equivalent_scaling(1.0, &[1.0], 0.0, 1.0).is_err());
        assert!(equivalent_scaling(1.0, &[1.0], 1.0, -1.0).is_err());
    }

    #[test]
    fn control_law() {
        let c = ControlModel::isotropic(2, 1.0).unwrap();
        assert_eq!(c.optimal_control(&[1.0, 2.0]), vec![-1.0, -2.0]);
        assert_eq!(c.optimal_control(&[0.0, 0.0]), vec![0.0, 0.0]);
        let c = ControlModel::isotropic(3, 0.02).unwrap();
        let u = c.optimal_control(&[0.1, 0.0, 0.0]);
        assert!((u[0] + 5.0).abs() < 1e-12 && u[1] == 0.0 && u[2] == 0.0);
    }

    proptest! {
        #[test]
        fn log_round_trip(p in 1e-280..1.0f64, lambda in 0.01..10.0f64) {
            let psi = DesirabilityField { values: vec![p] };
            let v = desirability_to_value(&psi, lambda, DEFAULT_FLOOR).unwrap();
            let back = value_to_desirability(&v);
            prop_assert!(((back.values[0] - p) / p).abs() < 1e-12);
        }

        #[test]
        fn order_reverses(a in 1e-200..1.0f64, b in 1e-200..1.0f64, lambda in 0.01..10.0f64) {
            prop_assume!(a != b);
            let v = desirability_to_value(&DesirabilityField { values: vec![a, b] }, lambda, DEFAULT_FLOOR).unwrap();
            prop_assert_eq!(a > b, v.values[0] < v.values[1]);
        }
    }
}
