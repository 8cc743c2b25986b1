//! Matrix Lie groups, retractions and their left-trivialized tangents.
//!
//! Algebra elements cross every public function as coordinate vectors in
//! `ℝᵏ`; matrices only appear for group elements.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nlsolve::{invert, Lu};

/// A matrix Lie group with a fixed basis of its algebra.
pub trait MatrixGroup: Send + Sync + Debug {
    fn name(&self) -> String;
    /// Size `d` of the `d × d` matrices representing group elements.
    fn matrix_dim(&self) -> usize;
    /// Dimension `k` of the algebra.
    fn algebra_dim(&self) -> usize;
    fn hat(&self, xi: &DVector<f64>) -> DMatrix<f64>;
    fn vee(&self, m: &DMatrix<f64>) -> DVector<f64>;
    /// Closed-form matrix exponential of `hat(xi)`.
    fn exp(&self, xi: &DVector<f64>) -> DMatrix<f64>;
    /// Closed-form logarithm near the identity.
    fn log(&self, g: &DMatrix<f64>) -> Result<DVector<f64>>;

    fn inverse(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        invert(g).expect("group elements are invertible")
    }

    /// Human-readable chart of a group element, used for output.
    fn coordinates(&self, g: &DMatrix<f64>) -> Vec<f64>;
    fn coordinate_names(&self) -> Vec<String>;

    /// Rotation blocks of `g`, for orthogonality checks.
    fn rotation_blocks(&self, _g: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        Vec::new()
    }
}

pub fn identity(group: &dyn MatrixGroup) -> DMatrix<f64> {
    DMatrix::identity(group.matrix_dim(), group.matrix_dim())
}

fn basis(group: &dyn MatrixGroup, j: usize) -> DMatrix<f64> {
    let mut e = DVector::zeros(group.algebra_dim());
    e[j] = 1.0;
    group.hat(&e)
}

fn columns(group: &dyn MatrixGroup, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> DMatrix<f64> {
    let k = group.algebra_dim();
    let mut out = DMatrix::zeros(k, k);
    for j in 0..k {
        out.set_column(j, &group.vee(&f(&basis(group, j))));
    }
    out
}

/// Matrix of `ad_ξ = [ξ, ·]`.
pub fn ad(group: &dyn MatrixGroup, xi: &DVector<f64>) -> DMatrix<f64> {
    let x = group.hat(xi);
    columns(group, |e| &x * e - e * &x)
}

/// Matrix of `Ad_g η = g η g^{-1}`.
pub fn adjoint(group: &dyn MatrixGroup, g: &DMatrix<f64>) -> DMatrix<f64> {
    let gi = group.inverse(g);
    columns(group, |e| g * e * &gi)
}

/// `Ad*_g μ`, represented as `(Ad_g)ᵀ μ`.
pub fn coadjoint(group: &dyn MatrixGroup, g: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64> {
    adjoint(group, g).tr_mul(mu)
}

/// The special Euclidean group of the plane; algebra coordinates `(v₁, v₂, ω)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Se2;

fn rot2(theta: f64) -> (f64, f64) {
    (theta.cos(), theta.sin())
}

impl MatrixGroup for Se2 {
    fn name(&self) -> String {
        "SE(2)".into()
    }
    fn matrix_dim(&self) -> usize {
        3
    }
    fn algebra_dim(&self) -> usize {
        3
    }
    fn hat(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, -xi[2], xi[0], xi[2], 0.0, xi[1], 0.0, 0.0, 0.0])
    }
    fn vee(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_vec(vec![m[(0, 2)], m[(1, 2)], 0.5 * (m[(1, 0)] - m[(0, 1)])])
    }
    fn exp(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let th = xi[2];
        let (c, s) = rot2(th);
        // V = [[a, −b], [b, a]] with a = sin θ / θ, b = (1 − cos θ) / θ.
        let (a, b) = if th.abs() < 1e-6 {
            (1.0 - th * th / 6.0, th / 2.0 - th.powi(3) / 24.0)
        } else {
            (s / th, (1.0 - c) / th)
        };
        DMatrix::from_row_slice(
            3,
            3,
            &[c, -s, a * xi[0] - b * xi[1], s, c, b * xi[0] + a * xi[1], 0.0, 0.0, 1.0],
        )
    }
    fn log(&self, g: &DMatrix<f64>) -> Result<DVector<f64>> {
        let th = g[(1, 0)].atan2(g[(0, 0)]);
        let (a, b) = if th.abs() < 1e-6 {
            (1.0 - th * th / 6.0, th / 2.0 - th.powi(3) / 24.0)
        } else {
            (th.sin() / th, (1.0 - th.cos()) / th)
        };
        let det = a * a + b * b;
        let (tx, ty) = (g[(0, 2)], g[(1, 2)]);
        Ok(DVector::from_vec(vec![(a * tx + b * ty) / det, (-b * tx + a * ty) / det, th]))
    }
    fn inverse(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let (c, s) = (g[(0, 0)], g[(1, 0)]);
        let (x, y) = (g[(0, 2)], g[(1, 2)]);
        DMatrix::from_row_slice(3, 3, &[c, s, -(c * x + s * y), -s, c, s * x - c * y, 0.0, 0.0, 1.0])
    }
    fn coordinates(&self, g: &DMatrix<f64>) -> Vec<f64> {
        vec![g[(0, 2)], g[(1, 2)], g[(1, 0)].atan2(g[(0, 0)])]
    }
    fn coordinate_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into(), "theta".into()]
    }
    fn rotation_blocks(&self, g: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        vec![g.view((0, 0), (2, 2)).into_owned()]
    }
}

/// The rotation group; algebra coordinates are the angular velocity vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct So3;

impl MatrixGroup for So3 {
    fn name(&self) -> String {
        "SO(3)".into()
    }
    fn matrix_dim(&self) -> usize {
        3
    }
    fn algebra_dim(&self) -> usize {
        3
    }
    fn hat(&self, w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0])
    }
    fn vee(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_vec(vec![
            0.5 * (m[(2, 1)] - m[(1, 2)]),
            0.5 * (m[(0, 2)] - m[(2, 0)]),
            0.5 * (m[(1, 0)] - m[(0, 1)]),
        ])
    }
    fn exp(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let th2 = w.norm_squared();
        let th = th2.sqrt();
        let (a, b) = if th < 1e-6 {
            (1.0 - th2 / 6.0, 0.5 - th2 / 24.0)
        } else {
            (th.sin() / th, (1.0 - th.cos()) / th2)
        };
        let k = self.hat(w);
        DMatrix::identity(3, 3) + &k * a + &k * &k * b
    }
    fn log(&self, r: &DMatrix<f64>) -> Result<DVector<f64>> {
        let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let th = cos.acos();
        if std::f64::consts::PI - th < 1e-6 {
            return Err(Error::RetractionDomain);
        }
        // vee(R − Rᵀ) = 2 sin θ · axis.
        let axis = self.vee(&(r - r.transpose()));
        let scale = if th < 1e-6 { 0.5 + th * th / 12.0 } else { 0.5 * th / th.sin() };
        Ok(axis * scale)
    }
    fn inverse(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        g.transpose()
    }
    fn coordinates(&self, g: &DMatrix<f64>) -> Vec<f64> {
        g.transpose().iter().copied().collect()
    }
    fn coordinate_names(&self) -> Vec<String> {
        (1..=3).flat_map(|i| (1..=3).map(move |j| format!("R{i}{j}"))).collect()
    }
    fn rotation_blocks(&self, g: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        vec![g.clone()]
    }
}

/// Translations of `ℝᵏ`, as `(k+1) × (k+1)` homogeneous matrices.
#[derive(Debug, Clone, Copy)]
pub struct Translations {
    pub k: usize,
}

impl MatrixGroup for Translations {
    fn name(&self) -> String {
        format!("R^{}", self.k)
    }
    fn matrix_dim(&self) -> usize {
        self.k + 1
    }
    fn algebra_dim(&self) -> usize {
        self.k
    }
    fn hat(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.k + 1, self.k + 1);
        m.view_mut((0, self.k), (self.k, 1)).copy_from(x);
        m
    }
    fn vee(&self, m: &DMatrix<f64>) -> DVector<f64> {
        m.view((0, self.k), (self.k, 1)).column(0).into_owned()
    }
    fn exp(&self, x: &DVector<f64>) -> DMatrix<f64> {
        identity(self) + self.hat(x)
    }
    fn log(&self, g: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(self.vee(g))
    }
    fn inverse(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        identity(self) - self.hat(&self.vee(g))
    }
    fn coordinates(&self, g: &DMatrix<f64>) -> Vec<f64> {
        self.vee(g).iter().copied().collect()
    }
    fn coordinate_names(&self) -> Vec<String> {
        match self.k {
            2 => vec!["x".into(), "y".into()],
            k => (1..=k).map(|i| format!("x{i}")).collect(),
        }
    }
}

/// Direct product of groups, represented block-diagonally.
#[derive(Debug)]
pub struct ProductGroup {
    factors: Vec<Box<dyn MatrixGroup>>,
}

impl ProductGroup {
    pub fn new(factors: Vec<Box<dyn MatrixGroup>>) -> Self {
        Self { factors }
    }

    /// `SO(3) × ℝ²`.
    pub fn so3_r2() -> Self {
        Self::new(vec![Box::new(So3), Box::new(Translations { k: 2 })])
    }

    fn offsets(&self) -> impl Iterator<Item = (&dyn MatrixGroup, usize, usize)> + '_ {
        let (mut d, mut k) = (0, 0);
        self.factors.iter().map(move |f| {
            let out = (f.as_ref(), d, k);
            d += f.matrix_dim();
            k += f.algebra_dim();
            out
        })
    }

    fn blockwise(&self, g: &DMatrix<f64>, f: impl Fn(&dyn MatrixGroup, DMatrix<f64>) -> DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.matrix_dim(), self.matrix_dim());
        for (grp, d, _) in self.offsets() {
            let n = grp.matrix_dim();
            let block = f(grp, g.view((d, d), (n, n)).into_owned());
            out.view_mut((d, d), (n, n)).copy_from(&block);
        }
        out
    }

    fn algebra_blockwise(&self, xi: &DVector<f64>, f: impl Fn(&dyn MatrixGroup, DVector<f64>) -> DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.matrix_dim(), self.matrix_dim());
        for (grp, d, k) in self.offsets() {
            let n = grp.matrix_dim();
            let block = f(grp, xi.rows(k, grp.algebra_dim()).into_owned());
            out.view_mut((d, d), (n, n)).copy_from(&block);
        }
        out
    }
}

impl MatrixGroup for ProductGroup {
    fn name(&self) -> String {
        self.factors.iter().map(|f| f.name()).collect::<Vec<_>>().join(" x ")
    }
    fn matrix_dim(&self) -> usize {
        self.factors.iter().map(|f| f.matrix_dim()).sum()
    }
    fn algebra_dim(&self) -> usize {
        self.factors.iter().map(|f| f.algebra_dim()).sum()
    }
    fn hat(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        self.algebra_blockwise(xi, |g, x| g.hat(&x))
    }
    fn vee(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.algebra_dim());
        for (grp, d, k) in self.offsets() {
            let n = grp.matrix_dim();
            out.rows_mut(k, grp.algebra_dim())
                .copy_from(&grp.vee(&m.view((d, d), (n, n)).into_owned()));
        }
        out
    }
    fn exp(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        self.algebra_blockwise(xi, |g, x| g.exp(&x))
    }
    fn log(&self, g: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.algebra_dim());
        for (grp, d, k) in self.offsets() {
            let n = grp.matrix_dim();
            out.rows_mut(k, grp.algebra_dim())
                .copy_from(&grp.log(&g.view((d, d), (n, n)).into_owned())?);
        }
        Ok(out)
    }
    fn inverse(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        self.blockwise(g, |grp, b| grp.inverse(&b))
    }
    fn coordinates(&self, g: &DMatrix<f64>) -> Vec<f64> {
        self.offsets()
            .flat_map(|(grp, d, _)| {
                let n = grp.matrix_dim();
                grp.coordinates(&g.view((d, d), (n, n)).into_owned())
            })
            .collect()
    }
    fn coordinate_names(&self) -> Vec<String> {
        self.factors.iter().flat_map(|f| f.coordinate_names()).collect()
    }
    fn rotation_blocks(&self, g: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        self.offsets()
            .flat_map(|(grp, d, _)| {
                let n = grp.matrix_dim();
                grp.rotation_blocks(&g.view((d, d), (n, n)).into_owned())
            })
            .collect()
    }
}

/// Which local diffeomorphism `τ: 𝔤 → G` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retraction {
    Exp,
    Cay,
}

/// Largest algebra increment accepted by the steppers and by `inverse`.
pub const RETRACTION_RADIUS: f64 = 1.0;

const SERIES_TERMS: usize = 40;

/// Bernoulli numbers `B_0..B_n` with `B_1 = −½`.
fn bernoulli(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for m in 1..=n {
        if m > 1 && m % 2 == 1 {
            continue;
        }
        // Σ_{k=0}^{m} C(m+1, k) B_k = 0.
        let mut binom = 1.0;
        let mut acc = 0.0;
        for (k, bk) in b.iter().enumerate().take(m) {
            acc += binom * bk;
            binom *= (m + 1 - k) as f64 / (k + 1) as f64;
        }
        b[m] = -acc / (m + 1) as f64;
    }
    b
}

impl Retraction {
    /// `τ(ξ)`.
    pub fn forward(self, group: &dyn MatrixGroup, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            Retraction::Exp => Ok(group.exp(xi)),
            Retraction::Cay => {
                let (minus, plus) = self.cayley_factors(group, xi);
                let lu = Lu::new(&minus).map_err(|_| Error::RetractionDomain)?;
                Ok(lu.solve_matrix(&plus))
            }
        }
    }

    /// `τ^{-1}(g)`, refusing results outside the retraction radius.
    pub fn inverse(self, group: &dyn MatrixGroup, g: &DMatrix<f64>) -> Result<DVector<f64>> {
        let xi = match self {
            Retraction::Exp => group.log(g)?,
            Retraction::Cay => {
                let e = identity(group);
                let sum = Lu::new(&(g + &e)).map_err(|_| Error::RetractionDomain)?;
                // ξ = 2 (g − I)(g + I)^{-1}; the two factors commute.
                group.vee(&(sum.solve_matrix(&(g - &e)) * 2.0))
            }
        };
        if xi.norm() > RETRACTION_RADIUS {
            return Err(Error::RetractionDomain);
        }
        Ok(xi)
    }

    /// `(I − ξ/2, I + ξ/2)`.
    fn cayley_factors(self, group: &dyn MatrixGroup, xi: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let half = group.hat(xi) * 0.5;
        let e = identity(group);
        (&e - &half, e + half)
    }

    /// Matrix of `η ↦ d^Lτ_ξ η`, defined by `T_ξτ · η = τ(ξ) hat(d^Lτ_ξ η)`.
    pub fn dtau(self, group: &dyn MatrixGroup, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            Retraction::Cay => {
                // d^L cay_ξ η = (I + ξ/2)^{-1} η (I − ξ/2)^{-1}.
                let (minus, plus) = self.cayley_factors(group, xi);
                let plus_inv = invert(&plus).map_err(|_| Error::RetractionDomain)?;
                let minus_inv = invert(&minus).map_err(|_| Error::RetractionDomain)?;
                Ok(columns(group, |e| &plus_inv * e * &minus_inv))
            }
            Retraction::Exp => Ok(power_series(&(-ad(group, xi)), |j| 1.0 / factorial(j + 1))),
        }
    }

    /// Matrix of `η ↦ (d^Lτ_ξ)^{-1} η`.
    pub fn dtau_inv(self, group: &dyn MatrixGroup, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            Retraction::Cay => {
                let (minus, plus) = self.cayley_factors(group, xi);
                Ok(columns(group, |e| &plus * e * &minus))
            }
            Retraction::Exp => {
                let b = bernoulli(SERIES_TERMS);
                Ok(power_series(&(-ad(group, xi)), |j| b[j] / factorial(j)))
            }
        }
    }

    /// Matrix of `δξ ↦ dd^Lτ_ξ(η, δξ)`, defined by
    /// `∂_ξ(d^Lτ_ξ η) δξ = d^Lτ_ξ dd^Lτ_ξ(η, δξ)`.
    pub fn ddtau(self, group: &dyn MatrixGroup, xi: &DVector<f64>, eta: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            Retraction::Cay => {
                // Differentiating the closed form and pulling back by the
                // inverse tangent leaves −½ δ (I+ξ/2)^{-1} η + ½ η (I−ξ/2)^{-1} δ.
                let (minus, plus) = self.cayley_factors(group, xi);
                let plus_inv = invert(&plus).map_err(|_| Error::RetractionDomain)?;
                let minus_inv = invert(&minus).map_err(|_| Error::RetractionDomain)?;
                let y = group.hat(eta);
                let left = &plus_inv * &y;
                let right = &y * &minus_inv;
                Ok(columns(group, |d| (&right * d - d * &left) * 0.5))
            }
            Retraction::Exp => {
                // d^L exp_ξ η = Σ_j c_j ad_ξ^j η with c_j = (−1)^j / (j+1)!.
                // Its ξ-derivative along δ is Σ_j c_j Σ_l ad_ξ^l ad_δ ad_ξ^{j−1−l} η,
                // and ad_δ w = −ad_w δ turns this into a matrix acting on δ.
                let k = group.algebra_dim();
                let a = ad(group, xi);
                let mut powers = vec![DMatrix::identity(k, k)];
                let mut w = vec![eta.clone()];
                for j in 1..SERIES_TERMS {
                    powers.push(&a * &powers[j - 1]);
                    w.push(&a * &w[j - 1]);
                }
                let ad_w: Vec<_> = w.iter().map(|wi| ad(group, wi)).collect();
                let mut deriv = DMatrix::zeros(k, k);
                for j in 1..SERIES_TERMS {
                    let c = if j % 2 == 0 { 1.0 } else { -1.0 } / factorial(j + 1);
                    for l in 0..j {
                        deriv -= &powers[l] * &ad_w[j - 1 - l] * c;
                    }
                }
                Ok(self.dtau_inv(group, xi)? * deriv)
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `Σ_j coeff(j) Aʲ`, truncated once terms fall below machine precision.
fn power_series(a: &DMatrix<f64>, coeff: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let k = a.nrows();
    let mut power = DMatrix::identity(k, k);
    let mut sum = &power * coeff(0);
    for j in 1..=SERIES_TERMS {
        power = a * &power;
        let c = coeff(j);
        if c == 0.0 {
            continue;
        }
        let term = &power * c;
        let small = term.amax() <= 1e-18 * sum.amax().max(1.0);
        sum += term;
        if small {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn bernoulli_numbers() {
        let b = bernoulli(6);
        let expected = [1.0, -0.5, 1.0 / 6.0, 0.0, -1.0 / 30.0, 0.0, 1.0 / 42.0];
        for (x, e) in b.iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn cayley_rotation_angle() {
        let th = 0.7;
        let r = Retraction::Cay.forward(&So3, &dvector![th, 0.0, 0.0]).unwrap();
        let angle = 2.0 * (th / 2.0).atan();
        let expected = So3.exp(&dvector![angle, 0.0, 0.0]);
        assert!((r - expected).amax() < 1e-14);
    }

    #[test]
    fn quarter_turn() {
        let r = So3.exp(&dvector![0.0, 0.0, std::f64::consts::FRAC_PI_2]);
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((r - expected).amax() < 1e-15);
    }

    #[test]
    fn cayley_of_opposites_cancels() {
        let xi = dvector![0.3, -0.2, 0.4];
        for kind in [Retraction::Cay, Retraction::Exp] {
            let g = kind.forward(&Se2, &xi).unwrap() * kind.forward(&Se2, &(-&xi)).unwrap();
            assert!((g - identity(&Se2)).amax() < 1e-14);
        }
    }

    #[test]
    fn product_acts_componentwise() {
        let group = ProductGroup::so3_r2();
        let xi = dvector![0.1, 0.2, -0.3, 0.5, -0.7];
        let g = Retraction::Cay.forward(&group, &xi).unwrap();
        let rot = Retraction::Cay.forward(&So3, &dvector![0.1, 0.2, -0.3]).unwrap();
        assert!((g.view((0, 0), (3, 3)) - rot).amax() < 1e-15);
        assert_eq!(group.coordinates(&g)[9..], [0.5, -0.7]);
        assert!(Retraction::Cay.ddtau(&group, &xi, &dvector![1.0, 0.0, 0.0, 1.0, 1.0]).unwrap().view((3, 3), (2, 2)).amax() < 1e-15);
    }
}
