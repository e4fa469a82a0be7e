//! Shared data model.
//!
//! Conventions: natural logarithms everywhere, `0 ln 0 = 0`, 64-bit floats.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower clip for likelihood-ratio weights.
pub const W_MIN: f64 = 1e-6;
/// Upper clip for likelihood-ratio weights.
pub const W_MAX: f64 = 1e6;

/// `x ln x` with the `0 ln 0 = 0` convention.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("binary entropy needs p in [0,1], got {p}")));
    }
    Ok(-xlogx(p) - xlogx(1.0 - p))
}

/// `(1/n) Σ w_i ln w_i`, the plug-in estimate of `D(r_x || p_x)`.
///
/// Nonnegative whenever the weights average to one.
pub fn kl_from_weights(w: &WeightVector) -> f64 {
    let n = w.len() as f64;
    let d = w.iter().map(|&wi| xlogx(wi)).sum::<f64>() / n;
    debug_assert!(
        (w.mean() - 1.0).abs() > 1e-9 || d >= -1e-12,
        "KL of a mean-one weight vector must be nonnegative, got {d}"
    );
    d
}

/// `n` aligned observations `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSamples {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSamples {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "x and y lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 samples, got {}", x.len())));
        }
        if let Some(i) = x.iter().chain(y.iter()).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at flat index {i}")));
        }
        Ok(Self { x, y })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (x, y) = pairs.iter().copied().unzip();
        Self::new(x, y)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The same observations with the roles of `x` and `y` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    /// Keep only the listed sample indices, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.x[i]).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
        )
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}

/// Likelihood ratios `w_i = r_x(X_i) / p_x(X_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Wraps `w` after checking every entry is finite and nonnegative.
    ///
    /// The mean-one constraint is not enforced here; use
    /// [`crate::estimator::project`] to land on the feasible set.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("weight {i} is {v}")));
        }
        Ok(Self(w))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub(crate) fn from_vec_unchecked(w: Vec<f64>) -> Self {
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Dense `n × n` matrix with `a[j][i] ≈ p_xy(X_i, Y_j) / (p_x(X_i) p_y(Y_j))`.
///
/// Row `j` indexes the output sample, column `i` the input sample. The
/// induced output ratios are normalized as `v_j = (1/n) Σ_i a[j][i] w_i`, so
/// the matrix-vector form is `v = A w / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RatioMatrix {
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "ratio matrix needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "ratio matrix entry ({}, {}) is {}",
                k / n,
                k % n,
                data[k]
            )));
        }
        Ok(Self { n, data })
    }

    /// Builds `a[j][i] = f(j, i)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                data.push(f(j, i));
            }
        }
        Self::from_row_major(n, data)
    }

    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[j * self.n + i]
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(1/n) Σ_i a[j][i]` for every row `j`.
    pub fn row_means(&self) -> Vec<f64> {
        let n = self.n as f64;
        (0..self.n).map(|j| self.row(j).iter().sum::<f64>() / n).collect()
    }

    /// `(1/n) Σ_j a[j][i]` for every column `i`.
    pub fn column_means(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        for j in 0..self.n {
            for (a, &v) in acc.iter_mut().zip(self.row(j)) {
                *a += v;
            }
        }
        let n = self.n as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Outcome of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// `raw_value` clamped to `[0, 1]`.
    pub value: f64,
    /// Best `exp(objective)` over restarts.
    pub raw_value: f64,
    pub restarts_used: usize,
    /// Best `ln D_y - ln D_x`, in nats.
    pub best_objective: f64,
    /// Whether the best restart met the stopping rule before `max_iters`.
    pub converged: bool,
    pub seed: u64,
    /// Weights attaining the best objective.
    #[serde(skip)]
    pub best_weights: Vec<f64>,
}

/// Joint pmf over finite alphabets `{0..k_x} × {0..k_y}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    kx: usize,
    ky: usize,
    pmf: Vec<f64>,
}

impl DiscreteJoint {
    /// Tolerance on the total mass.
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let kx = rows.len();
        let ky = rows.first().map_or(0, Vec::len);
        if kx == 0 || ky == 0 {
            return Err(Error::InvalidInput("empty joint pmf".into()));
        }
        if rows.iter().any(|r| r.len() != ky) {
            return Err(Error::InvalidInput("joint pmf rows differ in length".into()));
        }
        Self::from_flat(kx, ky, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(kx: usize, ky: usize, pmf: Vec<f64>) -> Result<Self> {
        if pmf.len() != kx * ky {
            return Err(Error::InvalidInput("joint pmf has wrong size".into()));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput(
                "joint pmf has a negative or non-finite entry".into(),
            ));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidInput(format!("joint pmf sums to {total}")));
        }
        let j = Self { kx, ky, pmf };
        if j.marginal_x().iter().any(|&p| p <= 0.0) || j.marginal_y().iter().any(|&p| p <= 0.0) {
            return Err(Error::DegenerateInput("joint pmf has a zero marginal entry".into()));
        }
        Ok(j)
    }

    /// Renormalizes nonnegative weights to a pmf.
    pub fn from_weights(rows: Vec<Vec<f64>>) -> Result<Self> {
        let total: f64 = rows.iter().flatten().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("joint weights sum to zero".into()));
        }
        let kx = rows.len();
        let ky = rows.first().map_or(0, Vec::len);
        let flat: Vec<f64> = rows.into_iter().flatten().map(|p| p / total).collect();
        // Re-normalize once more so the sum is exact to rounding.
        let s: f64 = flat.iter().sum();
        Self::from_flat(kx, ky, flat.into_iter().map(|p| p / s).collect())
    }

    pub fn product(px: &[f64], py: &[f64]) -> Result<Self> {
        Self::from_weights(px.iter().map(|&a| py.iter().map(|&b| a * b).collect()).collect())
    }

    pub fn kx(&self) -> usize {
        self.kx
    }

    pub fn ky(&self) -> usize {
        self.ky
    }

    #[inline]
    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.pmf[x * self.ky + y]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.pmf.chunks(self.ky).map(<[f64]>::to_vec).collect()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.pmf.chunks(self.ky).map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ky];
        for r in self.pmf.chunks(self.ky) {
            for (a, &p) in m.iter_mut().zip(r) {
                *a += p;
            }
        }
        m
    }

    /// Transposed joint: the pmf of `(Y, X)`.
    pub fn swapped(&self) -> Self {
        let mut pmf = Vec::with_capacity(self.pmf.len());
        for y in 0..self.ky {
            for x in 0..self.kx {
                pmf.push(self.p(x, y));
            }
        }
        Self {
            kx: self.ky,
            ky: self.kx,
            pmf,
        }
    }

    /// Joint of two independent copies, `((X1,X2), (Y1,Y2))`, with product
    /// symbols encoded as `a * k + b`.
    pub fn tensor_square(&self) -> Result<Self> {
        let (kx, ky) = (self.kx, self.ky);
        let mut rows = vec![vec![0.0; ky * ky]; kx * kx];
        for x1 in 0..kx {
            for x2 in 0..kx {
                for y1 in 0..ky {
                    for y2 in 0..ky {
                        rows[x1 * kx + x2][y1 * ky + y2] = self.p(x1, y1) * self.p(x2, y2);
                    }
                }
            }
        }
        Self::from_weights(rows)
    }

    /// `true` when the pmf factorizes within `tol`.
    pub fn is_product(&self, tol: f64) -> bool {
        let (mx, my) = (self.marginal_x(), self.marginal_y());
        (0..self.kx).all(|x| (0..self.ky).all(|y| (self.p(x, y) - mx[x] * my[y]).abs() <= tol))
    }

    /// Draws `n` symbol pairs by inverse-CDF sampling over the flattened pmf.
    pub fn sample<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Vec<(usize, usize)> {
        let mut cdf = Vec::with_capacity(self.pmf.len());
        let mut acc = 0.0;
        for &p in &self.pmf {
            acc += p;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                let k = cdf.partition_point(|&c| c <= u).min(self.pmf.len() - 1);
                (k / self.ky, k % self.ky)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let direct = -0.1 * 0.1f64.ln() - 0.9 * 0.9f64.ln();
        assert!((binary_entropy(0.1).unwrap() - direct).abs() < 1e-15);
        assert!((binary_entropy(0.1).unwrap() - 0.3251).abs() < 5e-5);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn kl_from_weights_values() {
        assert_eq!(kl_from_weights(&WeightVector::ones(7)), 0.0);
        let point = WeightVector::new(vec![2.0, 0.0]).unwrap();
        assert!((kl_from_weights(&point) - std::f64::consts::LN_2).abs() < 1e-15);
        let w = WeightVector::new(vec![1.5, 0.5, 1.0, 1.0]).unwrap();
        let direct = (1.5 * 1.5f64.ln() + 0.5 * 0.5f64.ln()) / 4.0;
        assert!((kl_from_weights(&w) - direct).abs() < 1e-15);
        assert!((kl_from_weights(&w) - 0.0654).abs() < 5e-5);
    }

    #[test]
    fn weight_vector_rejects_negative() {
        assert!(WeightVector::new(vec![1.0, -0.5]).is_err());
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn paired_samples_invariants() {
        assert!(PairedSamples::new(vec![1.0], vec![1.0]).is_err());
        assert!(PairedSamples::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(PairedSamples::new(vec![1.0, f64::INFINITY], vec![1.0, 2.0]).is_err());
        let s = PairedSamples::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(s.swapped().x(), &[3.0, 4.0]);
    }

    #[test]
    fn discrete_joint_checks() {
        assert!(DiscreteJoint::new(vec![vec![0.5, 0.0], vec![0.5, 0.0]]).is_err());
        assert!(DiscreteJoint::new(vec![vec![0.5, 0.2], vec![0.2, 0.2]]).is_err());
        let j = DiscreteJoint::new(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        assert_eq!(j.marginal_x(), vec![0.5, 0.5]);
        let t = j.tensor_square().unwrap();
        assert_eq!((t.kx(), t.ky()), (4, 4));
        assert!((t.p(0, 0) - 0.16).abs() < 1e-15);
        assert!(DiscreteJoint::product(&[0.3, 0.7], &[0.5, 0.5])
            .unwrap()
            .is_product(1e-15));
    }

    proptest! {
        #[test]
        fn binary_entropy_symmetric(p in 0.0f64..=1.0) {
            let a = binary_entropy(p).unwrap();
            let b = binary_entropy(1.0 - p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn kl_nonnegative_and_permutation_invariant(
            raw in prop::collection::vec(0.0f64..5.0, 2..40),
            rot in 0usize..40,
        ) {
            let w = crate::estimator::project(&raw);
            let d = kl_from_weights(&w);
            prop_assert!(d >= -1e-12);
            let mut shuffled = w.as_slice().to_vec();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let d2 = kl_from_weights(&WeightVector::new(shuffled).unwrap());
            prop_assert!((d - d2).abs() < 1e-12);
        }
    }
}
