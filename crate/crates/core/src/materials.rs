//! Constitutive models.
//!
//! Scalar problems take the displacement gradient `g = ∇u` (a 2-vector) and
//! return the stress vector `σ(g)` and its tangent `σ'(g) = dσ/dg`. The
//! Mooney–Rivlin model takes the deformation gradient `F` and returns the
//! first Piola–Kirchhoff stress `P = dψ/dF` and the tangent `𝕃 = dP/dF`.

use nalgebra::{Matrix2, Matrix3, SMatrix, Vector2};

use crate::error::{Error, Result};

/// Scalar gradient-based material: `σ = dψ/dg`, `σ' = dσ/dg`.
pub trait ScalarMaterial: Send + Sync {
    fn energy(&self, g: &Vector2<f64>) -> f64;
    fn stress(&self, g: &Vector2<f64>) -> Vector2<f64>;
    fn tangent(&self, g: &Vector2<f64>) -> Matrix2<f64>;
    /// Stiffness scale used for default penalties (`k` or `G`).
    fn stiffness_scale(&self) -> f64;
    /// True when the stress is linear in the gradient.
    fn is_linear(&self) -> bool {
        false
    }
    /// True where the gradient lies beyond the elastic range.
    fn is_yielded(&self, _g: &Vector2<f64>) -> bool {
        false
    }
}

/// `σ = k ∇u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLinearMaterial {
    pub k: f64,
}

impl ScalarLinearMaterial {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "k must be positive, got {k}"
            )));
        }
        Ok(ScalarLinearMaterial { k })
    }
}

impl ScalarMaterial for ScalarLinearMaterial {
    fn energy(&self, g: &Vector2<f64>) -> f64 {
        0.5 * self.k * g.norm_squared()
    }

    fn stress(&self, g: &Vector2<f64>) -> Vector2<f64> {
        self.k * g
    }

    fn tangent(&self, _g: &Vector2<f64>) -> Matrix2<f64> {
        self.k * Matrix2::identity()
    }

    fn stiffness_scale(&self) -> f64 {
        self.k
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// Perfectly plastic antiplane shear.
///
/// ```text
/// σ = G ∇u                    if |G ∇u| <= σ_Y
/// σ = σ_Y ∇u / |∇u|           otherwise
/// ```
///
/// The plastic tangent is the yield-surface form
/// `G/|∇u|² [[u_y², -u_x u_y], [-u_x u_y, u_x²]]`, plus `eps_reg·G·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntiplaneShearMaterial {
    pub shear_modulus: f64,
    pub yield_stress: f64,
    /// Tangent regularization as a fraction of `G`.
    pub eps_reg: f64,
    /// Floor for `|∇u|` in the plastic formulas.
    pub eps_grad: f64,
}

impl AntiplaneShearMaterial {
    pub const DEFAULT_EPS_REG: f64 = 1e-4;
    pub const DEFAULT_EPS_GRAD: f64 = 1e-12;

    pub fn new(shear_modulus: f64, yield_stress: f64) -> Result<Self> {
        Self::with_regularization(
            shear_modulus,
            yield_stress,
            Self::DEFAULT_EPS_REG,
            Self::DEFAULT_EPS_GRAD,
        )
    }

    pub fn with_regularization(
        shear_modulus: f64,
        yield_stress: f64,
        eps_reg: f64,
        eps_grad: f64,
    ) -> Result<Self> {
        if !(shear_modulus > 0.0) || !(yield_stress > 0.0) || !(eps_reg >= 0.0) || !(eps_grad > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "antiplane material needs G > 0, σ_Y > 0, eps_reg >= 0, eps_grad > 0 \
                 (got {shear_modulus}, {yield_stress}, {eps_reg}, {eps_grad})"
            )));
        }
        Ok(AntiplaneShearMaterial {
            shear_modulus,
            yield_stress,
            eps_reg,
            eps_grad,
        })
    }

    pub fn is_plastic(&self, g: &Vector2<f64>) -> bool {
        (self.shear_modulus * g).norm() > self.yield_stress
    }
}

impl ScalarMaterial for AntiplaneShearMaterial {
    /// `½G|g|²` in the elastic range, `σ_Y|g| - σ_Y²/(2G)` beyond it.
    fn energy(&self, g: &Vector2<f64>) -> f64 {
        let (gm, sy) = (self.shear_modulus, self.yield_stress);
        if self.is_plastic(g) {
            sy * g.norm() - sy * sy / (2.0 * gm)
        } else {
            0.5 * gm * g.norm_squared()
        }
    }

    fn stress(&self, g: &Vector2<f64>) -> Vector2<f64> {
        if self.is_plastic(g) {
            g * self.yield_stress / g.norm().max(self.eps_grad)
        } else {
            g * self.shear_modulus
        }
    }

    fn tangent(&self, g: &Vector2<f64>) -> Matrix2<f64> {
        let gm = self.shear_modulus;
        if self.is_plastic(g) {
            let n2 = g.norm_squared().max(self.eps_grad * self.eps_grad);
            let (gx, gy) = (g[0], g[1]);
            let m = Matrix2::new(gy * gy, -gx * gy, -gx * gy, gx * gx) * (gm / n2);
            m + Matrix2::identity() * (self.eps_reg * gm)
        } else {
            Matrix2::identity() * gm
        }
    }

    fn stiffness_scale(&self) -> f64 {
        self.shear_modulus
    }

    fn is_yielded(&self, g: &Vector2<f64>) -> bool {
        self.is_plastic(g)
    }
}

/// Fourth-order tangent `𝕃_{iJkL}` stored as a 9×9 matrix with row
/// `3i + J` and column `3k + L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentTensor(pub SMatrix<f64, 9, 9>);

impl TangentTensor {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[(3 * i + j, 3 * k + l)]
    }

    /// `𝕃 : H` for a second-order tensor `H`.
    pub fn contract(&self, h: &Matrix3<f64>) -> Matrix3<f64> {
        let v = self.0 * flatten(h);
        Matrix3::from_fn(|i, j| v[3 * i + j])
    }

    /// Largest violation of the major symmetry `𝕃_{iJkL} = 𝕃_{kLiJ}`.
    pub fn major_symmetry_defect(&self) -> f64 {
        (self.0 - self.0.transpose()).abs().max()
    }
}

/// Row-major flattening `H_{iJ} -> v[3i + J]`.
pub fn flatten(h: &Matrix3<f64>) -> SMatrix<f64, 9, 1> {
    SMatrix::<f64, 9, 1>::from_fn(|p, _| h[(p / 3, p % 3)])
}

/// `det F <= 0` at an evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedDeformation {
    pub det: f64,
}

impl InvertedDeformation {
    pub fn at_cell(self, cell: usize) -> Error {
        Error::InvertedElement {
            cell,
            det: self.det,
        }
    }
}

/// Invariants `(J, I1, I2)` of `F`, with `I1 = tr b`, `I2 = ½(I1² - tr b²)`,
/// `b = F Fᵀ`.
pub fn mr_invariants(f: &Matrix3<f64>) -> (f64, f64, f64) {
    let b = f * f.transpose();
    let i1 = b.trace();
    let i2 = 0.5 * (i1 * i1 - (b * b).trace());
    (f.determinant(), i1, i2)
}

/// Compressible Mooney–Rivlin model
/// `ψ(F) = ½μ1 J^{-2/3} I1 + ½μ2 J^{-4/3} I2 + ½K(J-1)²`
/// with `K = E/(3(1-2ν))`, `μ = E/(2(1+ν))`, `μ1 = μ2 = μ/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MooneyRivlinMaterial {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub bulk_modulus: f64,
    pub shear_modulus: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl MooneyRivlinMaterial {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0) || !(poisson_ratio > 0.0 && poisson_ratio < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "Mooney-Rivlin needs E > 0 and 0 < ν < 1/2 (got E = {youngs_modulus}, ν = {poisson_ratio})"
            )));
        }
        let k = youngs_modulus / (3.0 * (1.0 - 2.0 * poisson_ratio));
        let mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
        Ok(MooneyRivlinMaterial {
            youngs_modulus,
            poisson_ratio,
            bulk_modulus: k,
            shear_modulus: mu,
            mu1: 0.5 * mu,
            mu2: 0.5 * mu,
        })
    }

    fn checked_det(f: &Matrix3<f64>) -> Result<f64, InvertedDeformation> {
        let det = f.determinant();
        if det > 0.0 && det.is_finite() {
            Ok(det)
        } else {
            Err(InvertedDeformation { det })
        }
    }

    pub fn energy(&self, f: &Matrix3<f64>) -> Result<f64, InvertedDeformation> {
        Self::checked_det(f)?;
        let (j, i1, i2) = mr_invariants(f);
        Ok(0.5 * self.mu1 * j.powf(-2.0 / 3.0) * i1
            + 0.5 * self.mu2 * j.powf(-4.0 / 3.0) * i2
            + 0.5 * self.bulk_modulus * (j - 1.0).powi(2))
    }

    /// First Piola–Kirchhoff stress.
    pub fn stress(&self, f: &Matrix3<f64>) -> Result<Matrix3<f64>, InvertedDeformation> {
        let j = Self::checked_det(f)?;
        let (_, i1, i2) = mr_invariants(f);
        let a = f
            .try_inverse()
            .ok_or(InvertedDeformation { det: j })?
            .transpose();
        let g = f * f.transpose() * f;
        let a1 = self.mu1 * j.powf(-2.0 / 3.0);
        let a2 = self.mu2 * j.powf(-4.0 / 3.0);
        let vol = self.bulk_modulus * (j - 1.0) * j;
        Ok(f * a1 - a * (a1 * i1 / 3.0) + (f * i1 - g) * a2 - a * (2.0 * a2 * i2 / 3.0) + a * vol)
    }

    /// Tangent `𝕃 = dP/dF`. Only the upper triangle of the 9×9 form is
    /// evaluated; the lower one is its mirror image.
    pub fn tangent(&self, f: &Matrix3<f64>) -> Result<TangentTensor, InvertedDeformation> {
        let j = Self::checked_det(f)?;
        let (_, i1, i2) = mr_invariants(f);
        let a = f
            .try_inverse()
            .ok_or(InvertedDeformation { det: j })?
            .transpose();
        let c = f.transpose() * f;
        let b = f * f.transpose();
        let g = b * f;
        let q = f * i1 - g;
        let a1 = self.mu1 * j.powf(-2.0 / 3.0);
        let a2 = self.mu2 * j.powf(-4.0 / 3.0);
        let kb = self.bulk_modulus;

        let aa = 2.0 / 9.0 * a1 * i1 + 8.0 / 9.0 * a2 * i2 + kb * (2.0 * j - 1.0) * j;
        let ax = 1.0 / 3.0 * a1 * i1 + 2.0 / 3.0 * a2 * i2 - kb * (j - 1.0) * j;
        let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };

        let mut m = SMatrix::<f64, 9, 9>::zeros();
        for p in 0..9 {
            let (ii, jj) = (p / 3, p % 3);
            for r in p..9 {
                let (kk, ll) = (r / 3, r % 3);
                let dd = delta(ii, kk) * delta(jj, ll);
                let v = (a1 + a2 * i1) * dd
                    - 2.0 / 3.0 * a1 * (f[(ii, jj)] * a[(kk, ll)] + a[(ii, jj)] * f[(kk, ll)])
                    - 4.0 / 3.0 * a2 * (q[(ii, jj)] * a[(kk, ll)] + a[(ii, jj)] * q[(kk, ll)])
                    + 2.0 * a2 * f[(ii, jj)] * f[(kk, ll)]
                    - a2 * (delta(ii, kk) * c[(ll, jj)]
                        + f[(ii, ll)] * f[(kk, jj)]
                        + b[(ii, kk)] * delta(jj, ll))
                    + aa * a[(ii, jj)] * a[(kk, ll)]
                    + ax * a[(ii, ll)] * a[(kk, jj)];
                m[(p, r)] = v;
                m[(r, p)] = v;
            }
        }
        Ok(TangentTensor(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, SymmetricEigen, Unit, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat() -> MooneyRivlinMaterial {
        MooneyRivlinMaterial::new(200.0, 0.33).unwrap()
    }

    // Oracles below use only the energy formula / stress function through
    // central differences.
    fn fd_stress(m: &MooneyRivlinMaterial, f: &Matrix3<f64>, step: f64) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| {
            let mut fp = *f;
            let mut fm = *f;
            fp[(i, j)] += step;
            fm[(i, j)] -= step;
            (m.energy(&fp).unwrap() - m.energy(&fm).unwrap()) / (2.0 * step)
        })
    }

    fn fd_tangent(m: &MooneyRivlinMaterial, f: &Matrix3<f64>, step: f64) -> SMatrix<f64, 9, 9> {
        let mut out = SMatrix::<f64, 9, 9>::zeros();
        for r in 0..9 {
            let mut fp = *f;
            let mut fm = *f;
            fp[(r / 3, r % 3)] += step;
            fm[(r / 3, r % 3)] -= step;
            let d = (m.stress(&fp).unwrap() - m.stress(&fm).unwrap()) / (2.0 * step);
            for p in 0..9 {
                out[(p, r)] = d[(p / 3, p % 3)];
            }
        }
        out
    }

    fn random_f(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        loop {
            let f = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.3..0.3));
            if f.determinant() > 0.2 {
                return f;
            }
        }
    }

    #[test]
    fn derived_constants() {
        let m = mat();
        assert_eq!(m.bulk_modulus, 200.0 / (3.0 * (1.0 - 2.0 * 0.33)));
        assert_eq!(m.shear_modulus, 200.0 / (2.0 * 1.33));
        assert_eq!(m.mu1, m.shear_modulus / 2.0);
        assert_eq!(m.mu2, m.shear_modulus / 2.0);
        assert!(MooneyRivlinMaterial::new(200.0, 0.5).is_err());
        assert!(MooneyRivlinMaterial::new(-1.0, 0.3).is_err());
    }

    #[test]
    fn invariants() {
        assert_eq!(mr_invariants(&Matrix3::identity()), (1.0, 3.0, 3.0));
        let (j, i1, i2) = mr_invariants(&Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.0)));
        assert!((j - 2.0).abs() < 1e-14 && (i1 - 6.0).abs() < 1e-14 && (i2 - 9.0).abs() < 1e-14);
        let l: f64 = 1.3;
        let (j, i1, i2) = mr_invariants(&(Matrix3::identity() * l));
        assert!((j - l.powi(3)).abs() < 1e-14);
        assert!((i1 - 3.0 * l * l).abs() < 1e-14);
        assert!((i2 - 3.0 * l.powi(4)).abs() < 1e-13);
    }

    #[test]
    fn energy_values() {
        let m = mat();
        let e0 = m.energy(&Matrix3::identity()).unwrap();
        assert!((e0 - (1.5 * m.mu1 + 1.5 * m.mu2)).abs() < 1e-12);

        // Independent evaluation for F = diag(1.1, 1, 1): b = diag(1.21, 1, 1).
        let f = Matrix3::from_diagonal(&Vector3::new(1.1, 1.0, 1.0));
        let j: f64 = 1.1;
        let i1 = 1.21 + 2.0;
        let i2 = 1.21 + 1.21 + 1.0;
        let expected = 0.5 * m.mu1 * j.powf(-2.0 / 3.0) * i1
            + 0.5 * m.mu2 * j.powf(-4.0 / 3.0) * i2
            + 0.5 * m.bulk_modulus * (j - 1.0) * (j - 1.0);
        assert!((m.energy(&f).unwrap() - expected).abs() < 1e-12 * expected);

        let inverted = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        assert!(m.energy(&inverted).is_err());
        assert!(m.stress(&inverted).is_err());
        assert!(m.tangent(&inverted).is_err());
    }

    #[test]
    fn stress_free_reference() {
        let m = mat();
        let p = m.stress(&Matrix3::identity()).unwrap();
        assert!(p.abs().max() < 1e-12 * m.shear_modulus);
    }

    #[test]
    fn stress_matches_energy_fd() {
        let m = mat();
        let f = Matrix3::from_diagonal(&Vector3::new(1.05, 1.0, 1.0));
        let p = m.stress(&f).unwrap();
        let fd = fd_stress(&m, &f, 1e-7);
        assert!((p - fd).abs().max() <= 1e-6 * p.abs().max());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let f = random_f(&mut rng);
            let p = m.stress(&f).unwrap();
            let fd = fd_stress(&m, &f, 1e-7);
            assert!((p - fd).abs().max() <= 1e-5 * p.abs().max(), "{p} vs {fd}");
        }
    }

    #[test]
    fn tangent_matches_stress_fd_and_is_symmetric() {
        let m = mat();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let f = random_f(&mut rng);
            let l = m.tangent(&f).unwrap();
            let fd = fd_tangent(&m, &f, 1e-5);
            assert!((l.0 - fd).abs().max() <= 1e-4 * l.0.abs().max());
            assert_eq!(l.major_symmetry_defect(), 0.0);
            for (i, jj, k, ll) in [(0, 1, 2, 0), (1, 1, 0, 2), (2, 0, 2, 1)] {
                assert_eq!(l.get(i, jj, k, ll), l.get(k, ll, i, jj));
            }
        }
    }

    #[test]
    fn reference_tangent_positive_on_symmetric_tensors() {
        let m = mat();
        let l = m.tangent(&Matrix3::identity()).unwrap();
        // Basis of symmetric tensors, flattened.
        let mut basis = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                let mut e = Matrix3::zeros();
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                basis.push(flatten(&(e / e.norm())));
            }
        }
        let s =
            SMatrix::<f64, 6, 6>::from_fn(|a, b| (basis[a].transpose() * l.0 * basis[b])[(0, 0)]);
        let eig = SymmetricEigen::new(0.5 * (s + s.transpose()));
        assert!(eig.eigenvalues.min() > 0.0);
        // Matches small-strain isotropic moduli: K on volumetric, 2μ on deviatoric.
        let vol = flatten(&(Matrix3::identity() / 3f64.sqrt()));
        let kv = (vol.transpose() * l.0 * vol)[(0, 0)];
        assert!((kv - 3.0 * m.bulk_modulus).abs() < 1e-10 * kv);
    }

    #[test]
    fn energy_is_frame_invariant() {
        let m = mat();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = random_f(&mut rng);
            let axis = Unit::new_normalize(Vector3::new(
                rng.random(),
                rng.random(),
                rng.random::<f64>() + 0.1,
            ));
            let q = Rotation3::from_axis_angle(&axis, rng.random_range(0.0..6.0)).into_inner();
            let e = m.energy(&f).unwrap();
            assert!((m.energy(&(q * f)).unwrap() - e).abs() <= 1e-10 * e.abs());
        }
    }

    #[test]
    fn antiplane_branches() {
        let m = AntiplaneShearMaterial::with_regularization(1.0, 1.0, 0.0, 1e-12).unwrap();
        assert_eq!(m.stress(&Vector2::new(0.5, 0.0)), Vector2::new(0.5, 0.0));
        let s = m.stress(&Vector2::new(3.0, 4.0));
        assert!((s - Vector2::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(m.stress(&Vector2::zeros()), Vector2::zeros());

        assert_eq!(m.tangent(&Vector2::new(0.1, 0.0)), Matrix2::identity());
        assert_eq!(
            m.tangent(&Vector2::new(1.0 + 1e-9, 0.0)),
            Matrix2::new(0.0, 0.0, 0.0, 1.0)
        );
        assert_eq!(m.energy(&Vector2::zeros()), 0.0);
    }

    #[test]
    fn antiplane_tangent_kernel_and_regularization() {
        let m = AntiplaneShearMaterial::with_regularization(2.0, 1.0, 1e-3, 1e-12).unwrap();
        for g in [
            Vector2::new(3.0, 4.0),
            Vector2::new(-1.0, 0.7),
            Vector2::new(0.0, 2.0),
        ] {
            assert!(m.is_plastic(&g));
            let t = m.tangent(&g);
            let tg = t * g;
            assert!((tg - g * (m.eps_reg * m.shear_modulus)).norm() < 1e-14 * g.norm());
            let eig = SymmetricEigen::new(t);
            assert!(eig.eigenvalues.min() >= m.eps_reg * m.shear_modulus * (1.0 - 1e-12));
            assert!((t - t.transpose()).norm() == 0.0);
        }
    }

    #[test]
    fn antiplane_energy_continuity_and_fd() {
        let m = AntiplaneShearMaterial::new(2.0, 3.0).unwrap();
        // On the yield surface |G g| = σ_Y both branches give σ_Y²/(2G).
        let gy = Vector2::new(0.6, 0.8) * (m.yield_stress / m.shear_modulus);
        let elastic = 0.5 * m.shear_modulus * gy.norm_squared();
        let plastic = m.yield_stress * gy.norm() - m.yield_stress.powi(2) / (2.0 * m.shear_modulus);
        let target = m.yield_stress.powi(2) / (2.0 * m.shear_modulus);
        assert!((elastic - target).abs() < 1e-14 && (plastic - target).abs() < 1e-14);

        let m = AntiplaneShearMaterial::new(1.0, 1.0).unwrap();
        let g = Vector2::new(3.0, 4.0);
        let h = 1e-6 * g.norm();
        let fd = Vector2::new(
            (m.energy(&(g + Vector2::new(h, 0.0))) - m.energy(&(g - Vector2::new(h, 0.0))))
                / (2.0 * h),
            (m.energy(&(g + Vector2::new(0.0, h))) - m.energy(&(g - Vector2::new(0.0, h))))
                / (2.0 * h),
        );
        let s = m.stress(&g);
        assert!((fd - s).norm() <= 1e-6 * s.norm());
    }

    proptest::proptest! {
        #[test]
        fn antiplane_stress_is_capped(gx in -50.0f64..50.0, gy in -50.0f64..50.0, gm in 0.1f64..10.0, sy in 0.1f64..5.0) {
            let m = AntiplaneShearMaterial::new(gm, sy).unwrap();
            let g = Vector2::new(gx, gy);
            proptest::prop_assert!(m.stress(&g).norm() <= sy * (1.0 + 1e-12));
        }

        #[test]
        fn linear_material_derivatives(gx in -5.0f64..5.0, gy in -5.0f64..5.0, k in 0.1f64..10.0) {
            let m = ScalarLinearMaterial::new(k).unwrap();
            let g = Vector2::new(gx, gy);
            let h = 1e-6;
            let fd = (m.energy(&(g + Vector2::new(h, 0.0))) - m.energy(&(g - Vector2::new(h, 0.0)))) / (2.0 * h);
            proptest::prop_assert!((fd - m.stress(&g)[0]).abs() <= 1e-6 * (1.0 + m.stress(&g).norm()));
        }
    }
}
