//! Probabilistic movement primitives.
//!
//! A trajectory is approximated as `τ = Φ·w` per dimension, where `Φ` holds
//! normalized Gaussian basis functions spread linearly over normalized time.
//! A [`ProMP`] keeps a Gaussian over the stacked weights of all dimensions,
//! which induces a Gaussian over trajectories.
//!
//! Stacked weight vectors are dimension-major: entry `dim * num_basis + i`
//! belongs to basis `i` of dimension `dim`. This is exactly the column-major
//! storage of a `num_basis × num_dims` weight matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_RIDGE: f64 = 1e-6;
pub const DEFAULT_COV_REG: f64 = 1e-6;
pub const DEFAULT_SYSTEM_NOISE: f64 = 1e-6;

/// Normalized Gaussian basis functions over `num_steps` time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    num_basis: usize,
    num_steps: usize,
    width: f64,
    centers: Vec<f64>,
}

impl BasisSet {
    /// Basis set with the default width `1 / (num_basis - 1)`.
    pub fn new(num_basis: usize, num_steps: usize) -> Result<Self> {
        if num_basis < 2 {
            return Err(Error::InvalidArgument(format!(
                "num_basis must be >= 2, got {num_basis}"
            )));
        }
        Self::with_width(num_basis, num_steps, 1.0 / (num_basis as f64 - 1.0))
    }

    pub fn with_width(num_basis: usize, num_steps: usize, width: f64) -> Result<Self> {
        if num_basis < 2 {
            return Err(Error::InvalidArgument(format!(
                "num_basis must be >= 2, got {num_basis}"
            )));
        }
        if num_steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "num_steps must be >= 2, got {num_steps}"
            )));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "basis width must be positive, got {width}"
            )));
        }
        let centers = (0..num_basis)
            .map(|i| i as f64 / (num_basis as f64 - 1.0))
            .collect();
        Ok(Self {
            num_basis,
            num_steps,
            width,
            centers,
        })
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Normalized basis values at one step; sums to 1.
    pub fn row(&self, t: usize) -> DVector<f64> {
        let z = t as f64 / (self.num_steps as f64 - 1.0);
        let two_w2 = 2.0 * self.width * self.width;
        let raw = DVector::from_iterator(
            self.num_basis,
            self.centers.iter().map(|c| (-(z - c).powi(2) / two_w2).exp()),
        );
        let sum = raw.sum();
        raw / sum
    }
}

/// `num_steps × num_basis` feature matrix; every row sums to one.
pub fn basis_matrix(basis: &BasisSet) -> DMatrix<f64> {
    let mut phi = DMatrix::zeros(basis.num_steps, basis.num_basis);
    for t in 0..basis.num_steps {
        phi.set_row(t, &basis.row(t).transpose());
    }
    phi
}

/// A sampled trajectory, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    values: DMatrix<f64>,
    dt: f64,
}

impl Trajectory {
    pub fn new(values: DMatrix<f64>, dt: f64) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "trajectory needs >= 2 steps, got {}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidArgument("trajectory has no dimensions".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("trajectory has non-finite values".into()));
        }
        Ok(Self { values, dt })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_dims(&self) -> usize {
        self.values.ncols()
    }
}

/// Basis weights, `num_basis × num_dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: DMatrix<f64>,
}

impl WeightVector {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(Self { weights })
    }

    /// Reshapes a dimension-major flat vector.
    pub fn from_flat(flat: &DVector<f64>, num_basis: usize, num_dims: usize) -> Result<Self> {
        if flat.len() != num_basis * num_dims {
            return Err(Error::DimensionMismatch {
                context: "flat weight vector",
                expected: num_basis * num_dims,
                actual: flat.len(),
            });
        }
        Self::new(DMatrix::from_column_slice(num_basis, num_dims, flat.as_slice()))
    }

    pub fn to_flat(&self) -> DVector<f64> {
        DVector::from_column_slice(self.weights.as_slice())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn num_basis(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_dims(&self) -> usize {
        self.weights.ncols()
    }
}

/// Ridge-regression weights `(ΦᵀΦ + ridge·I)⁻¹ Φᵀ τ`, solved per dimension.
pub fn fit_weights(demo: &Trajectory, basis: &BasisSet, ridge: f64) -> Result<WeightVector> {
    let phi = basis_matrix(basis);
    fit_weights_with(&phi, demo, ridge)
}

fn fit_weights_with(phi: &DMatrix<f64>, demo: &Trajectory, ridge: f64) -> Result<WeightVector> {
    if demo.num_steps() != phi.nrows() {
        return Err(Error::DimensionMismatch {
            context: "demonstration steps vs basis steps",
            expected: phi.nrows(),
            actual: demo.num_steps(),
        });
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    let n = phi.ncols();
    let gram = phi.transpose() * phi + DMatrix::identity(n, n) * ridge;
    let rhs = phi.transpose() * demo.values();
    let weights = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular("basis normal equations"))?,
    };
    WeightVector::new(weights)
}

/// `Φ·w` per dimension.
pub fn render_trajectory(basis: &BasisSet, weights: &WeightVector, dt: f64) -> Result<Trajectory> {
    render_with(&basis_matrix(basis), weights, dt)
}

/// Same as [`render_trajectory`] with a precomputed feature matrix.
pub fn render_with(phi: &DMatrix<f64>, weights: &WeightVector, dt: f64) -> Result<Trajectory> {
    if weights.num_basis() != phi.ncols() {
        return Err(Error::DimensionMismatch {
            context: "weights vs basis count",
            expected: phi.ncols(),
            actual: weights.num_basis(),
        });
    }
    Trajectory::new(phi * weights.matrix(), dt)
}

/// Gaussian over stacked basis weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ProMP {
    basis: BasisSet,
    num_dims: usize,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    system_noise: f64,
}

const MIN_COV_EIGENVALUE: f64 = 1e-10;

impl ProMP {
    pub fn new(
        basis: BasisSet,
        num_dims: usize,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        system_noise: f64,
    ) -> Result<Self> {
        let d = basis.num_basis * num_dims;
        if num_dims == 0 {
            return Err(Error::InvalidArgument("ProMP needs >= 1 dimension".into()));
        }
        if mean.len() != d {
            return Err(Error::DimensionMismatch {
                context: "ProMP mean",
                expected: d,
                actual: mean.len(),
            });
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "ProMP covariance",
                expected: d,
                actual: covariance.nrows(),
            });
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("ProMP parameters must be finite".into()));
        }
        if !linalg::is_symmetric(&covariance, 1e-9) {
            return Err(Error::InvalidArgument("ProMP covariance is not symmetric".into()));
        }
        let covariance = linalg::symmetrize(&covariance);
        // Allow rounding slack below the regularization floor.
        if linalg::min_eigenvalue(&covariance) < MIN_COV_EIGENVALUE * (1.0 - 1e-6) - 1e-15 {
            return Err(Error::NotPositiveDefinite("ProMP covariance"));
        }
        if !(system_noise >= 0.0 && system_noise.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "system noise must be >= 0, got {system_noise}"
            )));
        }
        Ok(Self {
            basis,
            num_dims,
            mean,
            covariance,
            system_noise,
        })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn num_dims(&self) -> usize {
        self.num_dims
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn system_noise(&self) -> f64 {
        self.system_noise
    }

    pub fn mean_weights(&self) -> WeightVector {
        WeightVector::from_flat(&self.mean, self.basis.num_basis, self.num_dims)
            .expect("mean length checked at construction")
    }
}

/// Maximum-likelihood ProMP from at least two demonstrations.
///
/// The covariance uses divisor `N` and gets `cov_reg` added on the diagonal.
pub fn fit_promp(demos: &[Trajectory], basis: &BasisSet, ridge: f64, cov_reg: f64) -> Result<ProMP> {
    if demos.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "fit_promp needs >= 2 demonstrations, got {}",
            demos.len()
        )));
    }
    if !(cov_reg > 0.0) {
        return Err(Error::InvalidArgument(format!("cov_reg must be > 0, got {cov_reg}")));
    }
    let num_dims = demos[0].num_dims();
    let num_steps = demos[0].num_steps();
    for demo in demos {
        if demo.num_dims() != num_dims {
            return Err(Error::DimensionMismatch {
                context: "demonstration dimensions",
                expected: num_dims,
                actual: demo.num_dims(),
            });
        }
        if demo.num_steps() != num_steps {
            return Err(Error::DimensionMismatch {
                context: "demonstration steps",
                expected: num_steps,
                actual: demo.num_steps(),
            });
        }
    }
    let phi = basis_matrix(basis);
    let flats = demos
        .iter()
        .map(|demo| fit_weights_with(&phi, demo, ridge).map(|w| w.to_flat()))
        .collect::<Result<Vec<_>>>()?;

    let n = flats.len() as f64;
    let d = flats[0].len();
    let mean = flats.iter().fold(DVector::zeros(d), |acc, w| acc + w) / n;
    let mut cov = DMatrix::zeros(d, d);
    for w in &flats {
        let c = w - &mean;
        cov.ger(1.0 / n, &c, &c, 1.0);
    }
    for i in 0..d {
        cov[(i, i)] += cov_reg;
    }
    ProMP::new(basis.clone(), num_dims, mean, cov, DEFAULT_SYSTEM_NOISE)
}

/// One weight draw from `N(μ_w, Σ_w)`.
pub fn sample_weights<R: Rng + ?Sized>(promp: &ProMP, rng: &mut R) -> Result<WeightVector> {
    let l = linalg::cholesky_lower(&promp.covariance, "ProMP covariance")?;
    let z = DVector::from_iterator(promp.dim(), (0..promp.dim()).map(|_| rng.sample(StandardNormal)));
    WeightVector::from_flat(&(&promp.mean + l * z), promp.basis.num_basis, promp.num_dims)
}

/// Per-dimension marginal `N(Φ_tᵀμ_w, Φ_tᵀΣ_wΦ_t + Σ_τ)` at step `t`.
pub fn step_marginal(promp: &ProMP, t: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    if t >= promp.basis.num_steps {
        return Err(Error::InvalidArgument(format!(
            "step {t} out of range 0..{}",
            promp.basis.num_steps
        )));
    }
    let phi_t = promp.basis.row(t);
    let nb = promp.basis.num_basis;
    let mut mean = DVector::zeros(promp.num_dims);
    let mut var = DVector::zeros(promp.num_dims);
    for dim in 0..promp.num_dims {
        let block = dim * nb;
        mean[dim] = phi_t.dot(&promp.mean.rows(block, nb));
        let cov_block = promp.covariance.view((block, block), (nb, nb));
        var[dim] = (phi_t.transpose() * cov_block * &phi_t)[(0, 0)] + promp.system_noise;
    }
    Ok((mean, var))
}

/// JSON form of a [`ProMP`]; covariance is row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProMpRecord {
    pub num_basis: usize,
    pub num_dims: usize,
    pub num_steps: usize,
    pub width: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub system_noise: f64,
}

impl From<&ProMP> for ProMpRecord {
    fn from(p: &ProMP) -> Self {
        Self {
            num_basis: p.basis.num_basis,
            num_dims: p.num_dims,
            num_steps: p.basis.num_steps,
            width: p.basis.width,
            mean: p.mean.iter().copied().collect(),
            covariance: linalg::matrix_to_rows(&p.covariance),
            system_noise: p.system_noise,
        }
    }
}

impl TryFrom<ProMpRecord> for ProMP {
    type Error = Error;

    fn try_from(r: ProMpRecord) -> Result<Self> {
        let basis = BasisSet::with_width(r.num_basis, r.num_steps, r.width)?;
        let cov = linalg::rows_to_matrix(&r.covariance, "ProMP covariance rows")?;
        ProMP::new(basis, r.num_dims, DVector::from_vec(r.mean), cov, r.system_noise)
    }
}

impl Serialize for ProMP {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProMpRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProMP {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let record = ProMpRecord::deserialize(d)?;
        ProMP::try_from(record).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
    }

    // Scalar reimplementation of the normalized Gaussian basis.
    fn basis_entry_oracle(num_basis: usize, width: f64, num_steps: usize, t: usize, i: usize) -> f64 {
        let z = t as f64 / (num_steps - 1) as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..num_basis {
            let c = j as f64 / (num_basis - 1) as f64;
            let g = (-(z - c) * (z - c) / (2.0 * width * width)).exp();
            den += g;
            if j == i {
                num = g;
            }
        }
        num / den
    }

    // Gaussian elimination with partial pivoting on the normal equations.
    fn normal_equation_oracle(phi: &DMatrix<f64>, y: &[f64], ridge: f64) -> Vec<f64> {
        let n = phi.ncols();
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..phi.nrows()).map(|t| phi[(t, i)] * phi[(t, j)]).sum::<f64>();
            }
            a[i][i] += ridge;
            a[i][n] = (0..phi.nrows()).map(|t| phi[(t, i)] * y[t]).sum::<f64>();
        }
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for row in 0..n {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    for k in col..=n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
        (0..n).map(|i| a[i][n] / a[i][i]).collect()
    }

    #[test]
    fn basis_rows_sum_to_one() {
        for (nb, steps, w) in [(2, 2, 0.1), (6, 1250, 0.2), (10, 37, 0.03), (3, 5, 5.0)] {
            let b = BasisSet::with_width(nb, steps, w).unwrap();
            let phi = basis_matrix(&b);
            for t in 0..steps {
                assert!((phi.row(t).sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn basis_peaks_at_its_center() {
        let b = BasisSet::new(6, 101).unwrap();
        let phi = basis_matrix(&b);
        // centers at t = 0, 20, 40, 60, 80, 100
        for i in 0..6 {
            let row = phi.row(i * 20);
            assert_eq!(row.transpose().argmax().0, i);
        }
    }

    #[test]
    fn basis_entry_matches_formula() {
        let b = BasisSet::with_width(3, 5, 0.2).unwrap();
        let phi = basis_matrix(&b);
        let oracle = basis_entry_oracle(3, 0.2, 5, 0, 1);
        assert!((phi[(0, 1)] - oracle).abs() < 1e-15);
        assert!((phi[(0, 1)] - 0.04208757767109757).abs() < 1e-15);
        for t in 0..5 {
            for i in 0..3 {
                assert!((phi[(t, i)] - basis_entry_oracle(3, 0.2, 5, t, i)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn basis_rejects_invalid() {
        assert!(BasisSet::new(1, 10).is_err());
        assert!(BasisSet::new(3, 1).is_err());
        assert!(BasisSet::with_width(3, 10, 0.0).is_err());
        let b = BasisSet::new(5, 10).unwrap();
        assert!((b.width() - 0.25).abs() < 1e-15);
        assert!(b.centers().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn fit_recovers_spanned_weights() {
        let b = BasisSet::new(6, 200).unwrap();
        let mut r = rng(1);
        let w_true = WeightVector::new(random_matrix(&mut r, 6, 3)).unwrap();
        let demo = render_trajectory(&b, &w_true, 0.01).unwrap();
        let w = fit_weights(&demo, &b, 0.0).unwrap();
        assert!((w.matrix() - w_true.matrix()).amax() < 1e-8);
        let back = render_trajectory(&b, &w, 0.01).unwrap();
        assert!((back.values() - demo.values()).amax() < 1e-8);
    }

    #[test]
    fn fit_constant_trajectory_gives_constant_weights() {
        let b = BasisSet::new(6, 100).unwrap();
        let demo = Trajectory::new(DMatrix::from_element(100, 2, 0.7), 0.01).unwrap();
        let w = fit_weights(&demo, &b, 0.0).unwrap();
        assert!(w.matrix().iter().all(|x| (x - 0.7).abs() < 1e-8));
    }

    #[test]
    fn fit_matches_normal_equation_oracle() {
        let b = BasisSet::new(6, 80).unwrap();
        let mut r = rng(2);
        let demo = Trajectory::new(random_matrix(&mut r, 80, 3), 0.01).unwrap();
        let w = fit_weights(&demo, &b, 1e-3).unwrap();
        let phi = basis_matrix(&b);
        for dim in 0..3 {
            let y: Vec<f64> = demo.values().column(dim).iter().copied().collect();
            let oracle = normal_equation_oracle(&phi, &y, 1e-3);
            for i in 0..6 {
                assert!((w.matrix()[(i, dim)] - oracle[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fit_rejects_step_mismatch() {
        let b = BasisSet::new(6, 100).unwrap();
        let demo = Trajectory::new(DMatrix::zeros(50, 3), 0.01).unwrap();
        assert!(matches!(
            fit_weights(&demo, &b, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn render_zero_and_constant() {
        let b = BasisSet::new(6, 40).unwrap();
        let zero = render_trajectory(&b, &WeightVector::new(DMatrix::zeros(6, 3)).unwrap(), 0.1).unwrap();
        assert!(zero.values().iter().all(|&x| x == 0.0));
        let c = render_trajectory(&b, &WeightVector::new(DMatrix::from_element(6, 3, -1.5)).unwrap(), 0.1)
            .unwrap();
        assert!(c.values().iter().all(|x| (x + 1.5).abs() < 1e-12));
        let wrong = WeightVector::new(DMatrix::zeros(5, 3)).unwrap();
        assert!(render_trajectory(&b, &wrong, 0.1).is_err());
    }

    #[test]
    fn flat_layout_is_dimension_major() {
        let w = WeightVector::new(DMatrix::from_fn(3, 2, |i, d| (10 * d + i) as f64)).unwrap();
        let flat = w.to_flat();
        assert_eq!(flat.as_slice(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(WeightVector::from_flat(&flat, 3, 2).unwrap(), w);
    }

    fn demos_from_weights(b: &BasisSet, ws: &[DVector<f64>], dims: usize) -> Vec<Trajectory> {
        ws.iter()
            .map(|w| {
                render_trajectory(b, &WeightVector::from_flat(w, b.num_basis(), dims).unwrap(), 0.01)
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn identical_demos_give_regularized_covariance() {
        let b = BasisSet::new(4, 50).unwrap();
        let mut r = rng(3);
        let w = DVector::from_iterator(8, (0..8).map(|_| r.random_range(-1.0..1.0)));
        let demos = demos_from_weights(&b, &[w.clone(), w.clone(), w.clone()], 2);
        let p = fit_promp(&demos, &b, 0.0, 1e-4).unwrap();
        let single = fit_weights(&demos[0], &b, 0.0).unwrap().to_flat();
        assert!((p.mean() - single).amax() < 1e-12);
        let expected = DMatrix::<f64>::identity(8, 8) * 1e-4;
        assert!((p.covariance() - expected).amax() < 1e-12);
    }

    #[test]
    fn two_demos_average() {
        let b = BasisSet::new(4, 50).unwrap();
        let w1 = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let w2 = DVector::from_vec(vec![-1.0, 0.0, 5.0, 2.0]);
        let p = fit_promp(&demos_from_weights(&b, &[w1.clone(), w2.clone()], 1), &b, 0.0, 1e-6).unwrap();
        assert!((p.mean() - (w1 + w2) * 0.5).amax() < 1e-8);
    }

    #[test]
    fn fit_promp_matches_sample_moments() {
        let b = BasisSet::new(6, 60).unwrap();
        let mut r = rng(4);
        let ws: Vec<DVector<f64>> = (0..20)
            .map(|_| DVector::from_iterator(12, (0..12).map(|_| r.sample::<f64, _>(StandardNormal))))
            .collect();
        let demos = demos_from_weights(&b, &ws, 2);
        let cov_reg = 1e-6;
        let p = fit_promp(&demos, &b, 0.0, cov_reg).unwrap();
        // Brute-force moments of the independently fitted weights.
        let fitted: Vec<Vec<f64>> = demos
            .iter()
            .map(|d| fit_weights(d, &b, 0.0).unwrap().to_flat().iter().copied().collect())
            .collect();
        for i in 0..12 {
            let m: f64 = fitted.iter().map(|w| w[i]).sum::<f64>() / 20.0;
            assert!((p.mean()[i] - m).abs() < 1e-12);
            for j in 0..12 {
                let mj: f64 = fitted.iter().map(|w| w[j]).sum::<f64>() / 20.0;
                let mut c: f64 = fitted.iter().map(|w| (w[i] - m) * (w[j] - mj)).sum::<f64>() / 20.0;
                if i == j {
                    c += cov_reg;
                }
                assert!((p.covariance()[(i, j)] - c).abs() < 1e-12);
            }
        }
        // and the fit itself recovered the generating weights
        assert!((p.mean() - ws.iter().fold(DVector::zeros(12), |a, w| a + w) / 20.0).amax() < 1e-8);
    }

    #[test]
    fn fit_promp_errors() {
        let b = BasisSet::new(4, 50).unwrap();
        let one = vec![Trajectory::new(DMatrix::zeros(50, 2), 0.01).unwrap()];
        assert!(fit_promp(&one, &b, 0.0, 1e-6).is_err());
        let mixed = vec![
            Trajectory::new(DMatrix::zeros(50, 2), 0.01).unwrap(),
            Trajectory::new(DMatrix::zeros(50, 3), 0.01).unwrap(),
        ];
        assert!(fit_promp(&mixed, &b, 0.0, 1e-6).is_err());
    }

    fn degenerate_promp(b: &BasisSet, dims: usize, noise: f64) -> ProMP {
        let d = b.num_basis() * dims;
        let mean = DVector::from_fn(d, |i, _| i as f64 * 0.1);
        ProMP::new(b.clone(), dims, mean, DMatrix::identity(d, d) * 1e-10, noise).unwrap()
    }

    #[test]
    fn degenerate_sampling_returns_mean() {
        let b = BasisSet::new(6, 20).unwrap();
        let p = degenerate_promp(&b, 3, 0.0);
        let w = sample_weights(&p, &mut rng(5)).unwrap();
        assert!((w.to_flat() - p.mean()).amax() < 1e-4);
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        let b = BasisSet::new(3, 20).unwrap();
        let mut r = rng(6);
        let a = random_matrix(&mut r, 6, 6);
        let cov = &a * a.transpose() + DMatrix::identity(6, 6) * 0.1;
        let mean = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.0, 0.3, -0.7]);
        let p = ProMP::new(b, 2, mean.clone(), cov.clone(), 0.0).unwrap();

        let s1 = sample_weights(&p, &mut rng(7)).unwrap();
        let s2 = sample_weights(&p, &mut rng(7)).unwrap();
        assert_eq!(s1, s2);

        let n = 10_000;
        let mut sampler = rng(8);
        let mut acc = DVector::zeros(6);
        for _ in 0..n {
            acc += sample_weights(&p, &mut sampler).unwrap().to_flat();
        }
        let sample_mean = acc / n as f64;
        for i in 0..6 {
            let se = (cov[(i, i)] / n as f64).sqrt();
            assert!((sample_mean[i] - mean[i]).abs() < 4.0 * se, "coord {i}");
        }
    }

    #[test]
    fn marginal_noise_floor() {
        let b = BasisSet::new(6, 30).unwrap();
        let p = degenerate_promp(&b, 2, 0.04);
        for t in 0..30 {
            let (_, var) = step_marginal(&p, t).unwrap();
            for v in var.iter() {
                assert!((v - 0.04).abs() < 1e-9);
            }
        }
        assert!(step_marginal(&p, 30).is_err());
    }

    #[test]
    fn marginal_matches_monte_carlo() {
        let b = BasisSet::new(6, 50).unwrap();
        let mut r = rng(9);
        let a = random_matrix(&mut r, 12, 12) * 0.3;
        let cov = &a * a.transpose() + DMatrix::identity(12, 12) * 1e-3;
        let mean = DVector::from_fn(12, |i, _| (i as f64).sin());
        let p = ProMP::new(b.clone(), 2, mean, cov, 1e-6).unwrap();
        let t = 17;
        let (m, v) = step_marginal(&p, t).unwrap();
        let n = 10_000;
        let phi = basis_matrix(&b);
        let mut sum = [0.0; 2];
        let mut sum2 = [0.0; 2];
        let mut sampler = rng(10);
        for _ in 0..n {
            let tr = render_with(&phi, &sample_weights(&p, &mut sampler).unwrap(), 0.01).unwrap();
            for d in 0..2 {
                let x = tr.values()[(t, d)];
                sum[d] += x;
                sum2[d] += x * x;
            }
        }
        for d in 0..2 {
            let mu = sum[d] / n as f64;
            let var = sum2[d] / n as f64 - mu * mu;
            assert!((mu - m[d]).abs() < 4.0 * (v[d] / n as f64).sqrt());
            assert!((var - v[d]).abs() / v[d] < 0.05, "dim {d}: {var} vs {}", v[d]);
        }
    }

    #[test]
    fn promp_json_roundtrip() {
        let b = BasisSet::with_width(3, 10, 0.3).unwrap();
        let p = degenerate_promp(&b, 2, 1e-6);
        let text = serde_json::to_string(&p).unwrap();
        let back: ProMP = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["num_basis", "num_dims", "num_steps", "width", "mean", "covariance", "system_noise"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn promp_rejects_indefinite_covariance() {
        let b = BasisSet::new(2, 10).unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ProMP::new(b, 1, DVector::zeros(2), cov, 0.0).is_err());
    }
}
