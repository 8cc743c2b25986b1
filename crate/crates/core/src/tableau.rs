//! Runge-Kutta coefficient sets: Lobatto node generation, collocation,
//! symplectic conjugation and certification of simplifying assumptions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nlsolve::Lu;

/// Residual tolerance for the structural hypotheses and invariants.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Residual tolerance used when certifying simplifying assumptions.
pub const CERTIFY_TOL: f64 = 1e-10;

/// Coefficients `(a, b, c)` of an `s`-stage Runge-Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl ButcherTableau {
    /// Wraps user-supplied coefficients. Only shapes are checked; use the
    /// residual accessors to inspect consistency.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let s = b.len();
        if s < 2 {
            return Err(Error::InvalidStageCount(s));
        }
        if a.nrows() != s || a.ncols() != s || c.len() != s {
            return Err(Error::Dimension(format!(
                "tableau with {s} weights needs an {s}x{s} matrix and {s} nodes"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// `max_i |Σ_j a_ij − c_i|`.
    pub fn consistency_residual(&self) -> f64 {
        (0..self.stages())
            .map(|i| (self.a.row(i).sum() - self.c[i]).abs())
            .fold(0.0, f64::max)
    }

    /// `|Σ_i b_i − 1|`.
    pub fn order_one_residual(&self) -> f64 {
        (self.b.sum() - 1.0).abs()
    }
}

/// A primal tableau paired with its momentum tableau and certificate.
#[derive(Debug, Clone)]
pub struct PartitionedTableau {
    pub primal: ButcherTableau,
    pub dual: ButcherTableau,
    pub cert: OrderCertificate,
}

impl PartitionedTableau {
    /// The `s`-stage Lobatto IIIA/IIIB pair.
    pub fn lobatto(s: usize) -> Result<Self> {
        let primal = tableau_from_collocation(lobatto_nodes(s)?.as_slice())?;
        Self::from_primal(primal)
    }

    /// Pairs `primal` with its symplectic conjugate.
    pub fn from_primal(primal: ButcherTableau) -> Result<Self> {
        let dual = symplectic_conjugate(&primal)?;
        Ok(Self::new(primal, dual))
    }

    pub fn new(primal: ButcherTableau, dual: ButcherTableau) -> Self {
        let kmax = 2 * primal.stages() + 2;
        let cert = certify(&primal, &dual, kmax);
        Self { primal, dual, cert }
    }

    pub fn stages(&self) -> usize {
        self.primal.stages()
    }

    /// `max_ij |b_i â_ij + b̂_j a_ji − b_i b̂_j|`.
    pub fn symplecticity_residual(&self) -> f64 {
        symplecticity_residual(&self.primal, &self.dual)
    }

    /// Whether the pair meets every hypothesis the constrained steppers rely on.
    pub fn is_lobatto_type(&self) -> bool {
        self.cert.hypotheses.all()
    }

    /// Returns an error naming the first unmet hypothesis.
    pub fn require_lobatto_type(&self) -> Result<()> {
        let h = &self.cert.hypotheses;
        let named = [
            (h.first_row_zero, "H1"),
            (h.trailing_invertible, "H2"),
            (h.stiffly_accurate, "H3"),
            (h.dual_last_column_zero, "H1'"),
            (h.dual_first_column_b1, "H2'"),
        ];
        match named.iter().find(|(ok, _)| !ok) {
            Some((_, name)) => Err(Error::HypothesisViolation(name)),
            None => Ok(()),
        }
    }
}

/// Structural hypotheses of the constrained partitioned methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hypotheses {
    /// H1: `a_1j = 0`.
    pub first_row_zero: bool,
    /// H2: `(a_ij)_{i,j ≥ 2}` invertible.
    pub trailing_invertible: bool,
    /// H3: `a_sj = b_j`.
    pub stiffly_accurate: bool,
    /// H1': `â_is = 0`.
    pub dual_last_column_zero: bool,
    /// H2': `â_i1 = b̂_1`.
    pub dual_first_column_b1: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.first_row_zero
            && self.trailing_invertible
            && self.stiffly_accurate
            && self.dual_last_column_zero
            && self.dual_first_column_b1
    }
}

/// Largest indices for which the simplifying assumptions hold numerically.
///
/// Mixed indices follow the convention that `Q` means the condition holds for
/// every `k = 2..=Q`; a value of 1 means it holds for no `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderCertificate {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub p_dual: usize,
    pub q_dual: usize,
    pub r_dual: usize,
    pub cc_dual: usize,
    pub dd_dual: usize,
    pub dual_cc: usize,
    pub dual_dd: usize,
    /// `R(∞)` of the primal tableau, `None` when the limit does not exist.
    pub r_inf: Option<f64>,
    pub hypotheses: Hypotheses,
}

fn jacobi11(n: usize, x: f64) -> (f64, f64) {
    // Three-term recurrence for P_n^{(1,1)} and its derivative.
    let (mut p0, mut d0) = (1.0, 0.0);
    if n == 0 {
        return (p0, d0);
    }
    let (mut p1, mut d1) = (2.0 * x, 2.0);
    for k in 2..=n {
        let k = k as f64;
        let a1 = 2.0 * k * (k + 2.0) * (2.0 * k);
        let a3 = (2.0 * k) * (2.0 * k + 1.0) * (2.0 * k + 2.0);
        let a4 = 2.0 * k * k * (2.0 * k + 2.0);
        let p2 = (a3 * x * p1 - a4 * p0) / a1;
        let d2 = (a3 * x * d1 + a3 * p1 - a4 * d0) / a1;
        (p0, d0, p1, d1) = (p1, d1, p2, d2);
    }
    (p1, d1)
}

/// Nodes `0 = c_1 < … < c_s = 1` of the `s`-stage Lobatto family.
pub fn lobatto_nodes(s: usize) -> Result<DVector<f64>> {
    if s < 2 {
        return Err(Error::InvalidStageCount(s));
    }
    let n = s - 2;
    let mut nodes = vec![0.0];
    // Bracket the roots of the Jacobi polynomial on a fine grid, bisect, then
    // polish with a few Newton steps.
    let grid = 64 * (n + 1);
    let f = |x: f64| jacobi11(n, x).0;
    let mut xl = -1.0;
    let mut fl = f(xl);
    for g in 1..=grid {
        let xr = -1.0 + 2.0 * g as f64 / grid as f64;
        let fr = f(xr);
        if fr == 0.0 && g < grid {
            nodes.push(0.5 * (xr + 1.0));
        } else if fl * fr < 0.0 {
            let (mut lo, mut hi, mut flo) = (xl, xr, fl);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            let mut x = 0.5 * (lo + hi);
            for _ in 0..3 {
                let (p, d) = jacobi11(n, x);
                if d != 0.0 {
                    x -= p / d;
                }
            }
            nodes.push(0.5 * (x + 1.0));
        }
        xl = xr;
        fl = fr;
    }
    debug_assert_eq!(nodes.len(), n + 1, "missed a Jacobi root");
    nodes.push(1.0);
    Ok(DVector::from_vec(nodes))
}

fn poly_mul_linear(p: &[f64], root: f64, scale: f64) -> Vec<f64> {
    // p(τ)·(τ − root)·scale, ascending coefficients.
    let mut out = vec![0.0; p.len() + 1];
    for (k, &ck) in p.iter().enumerate() {
        out[k + 1] += ck * scale;
        out[k] -= ck * root * scale;
    }
    out
}

fn integrate_from_zero(p: &[f64], x: f64) -> f64 {
    p.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (k, &ck)| acc * x + ck / (k + 1) as f64)
        * x
}

/// Collocation coefficients `a_ij = ∫₀^{c_i} ℓ_j`, `b_i = ∫₀¹ ℓ_i`.
pub fn tableau_from_collocation(c: &[f64]) -> Result<ButcherTableau> {
    let s = c.len();
    if s < 2 {
        return Err(Error::InvalidStageCount(s));
    }
    for i in 0..s {
        for j in i + 1..s {
            if (c[i] - c[j]).abs() <= 1e-14 {
                return Err(Error::DegenerateBasis(i, j));
            }
        }
    }
    let basis: Vec<Vec<f64>> = (0..s)
        .map(|j| {
            (0..s).filter(|&m| m != j).fold(vec![1.0], |p, m| {
                poly_mul_linear(&p, c[m], 1.0 / (c[j] - c[m]))
            })
        })
        .collect();
    let a = DMatrix::from_fn(s, s, |i, j| integrate_from_zero(&basis[j], c[i]));
    let b = DVector::from_fn(s, |i, _| integrate_from_zero(&basis[i], 1.0));
    ButcherTableau::new(a, b, DVector::from_column_slice(c))
}

/// The conjugate tableau with `b̂ = b`, `ĉ = c` and `â_ij = b_j (1 − a_ji / b_i)`.
pub fn symplectic_conjugate(t: &ButcherTableau) -> Result<ButcherTableau> {
    let s = t.stages();
    let b = &t.b;
    if let Some(i) = (0..s).find(|&i| b[i].abs() < 1e-300 || !b[i].is_finite()) {
        return Err(Error::ConjugateUndefined(i));
    }
    let a_hat = DMatrix::from_fn(s, s, |i, j| b[j] * (1.0 - t.a[(j, i)] / b[i]));
    // The conjugate shares the collocation nodes; its row sums need not equal
    // them (the 2-stage IIIB rows both sum to 1/2).
    ButcherTableau::new(a_hat, b.clone(), t.c.clone())
}

/// `max_ij |b_i â_ij + b̂_j a_ji − b_i b̂_j|` together with `max_i |b_i − b̂_i|`.
pub fn symplecticity_residual(primal: &ButcherTableau, dual: &ButcherTableau) -> f64 {
    let (a, b, ah, bh) = (&primal.a, &primal.b, &dual.a, &dual.b);
    let s = primal.stages();
    let mut worst: f64 = 0.0;
    for i in 0..s {
        worst = worst.max((b[i] - bh[i]).abs());
        for j in 0..s {
            worst = worst.max((b[i] * ah[(i, j)] + bh[j] * a[(j, i)] - b[i] * bh[j]).abs());
        }
    }
    worst
}

/// Residual of `B(k)`: `|Σ b_i c_i^{k−1} − 1/k|`.
pub fn quadrature_residual(t: &ButcherTableau, k: usize) -> f64 {
    let kf = k as f64;
    let sum: f64 = (0..t.stages())
        .map(|i| t.b[i] * t.c[i].powi(k as i32 - 1))
        .sum();
    (sum - 1.0 / kf).abs()
}

/// Residual of `C(k)`: `max_i |Σ_j a_ij c_j^{k−1} − c_i^k / k|`.
pub fn stage_residual(t: &ButcherTableau, k: usize) -> f64 {
    let s = t.stages();
    let kf = k as f64;
    (0..s)
        .map(|i| {
            let sum: f64 = (0..s).map(|j| t.a[(i, j)] * t.c[j].powi(k as i32 - 1)).sum();
            (sum - t.c[i].powi(k as i32) / kf).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual of `D(k)`: `max_j |Σ_i b_i c_i^{k−1} a_ij − b_j (1 − c_j^k) / k|`.
pub fn adjoint_residual(t: &ButcherTableau, k: usize) -> f64 {
    let s = t.stages();
    let kf = k as f64;
    (0..s)
        .map(|j| {
            let sum: f64 = (0..s)
                .map(|i| t.b[i] * t.c[i].powi(k as i32 - 1) * t.a[(i, j)])
                .sum();
            (sum - t.b[j] * (1.0 - t.c[j].powi(k as i32)) / kf).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual of the mixed stage condition with `outer` applied after `inner`:
/// `max_i |Σ_jl outer_ij inner_jl c_l^{k−2} − c_i^k / (k(k−1))|`, `k ≥ 2`.
pub fn mixed_stage_residual(outer: &ButcherTableau, inner: &ButcherTableau, k: usize) -> f64 {
    let s = outer.stages();
    let c = &outer.c;
    let kf = k as f64;
    let prod = &outer.a * &inner.a;
    (0..s)
        .map(|i| {
            let sum: f64 = (0..s).map(|l| prod[(i, l)] * c[l].powi(k as i32 - 2)).sum();
            (sum - c[i].powi(k as i32) / (kf * (kf - 1.0))).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual of the mixed adjoint condition:
/// `max_l |Σ_ij b_i c_i^{k−2} outer_ij inner_jl − b_l ((k−1) − (k c_l − c_l^k)) / (k(k−1))|`.
pub fn mixed_adjoint_residual(outer: &ButcherTableau, inner: &ButcherTableau, k: usize) -> f64 {
    let s = outer.stages();
    let (b, c) = (&outer.b, &outer.c);
    let kf = k as f64;
    let prod = &outer.a * &inner.a;
    (0..s)
        .map(|l| {
            let sum: f64 = (0..s)
                .map(|i| b[i] * c[i].powi(k as i32 - 2) * prod[(i, l)])
                .sum();
            let rhs = b[l] * ((kf - 1.0) - (kf * c[l] - c[l].powi(k as i32))) / (kf * (kf - 1.0));
            (sum - rhs).abs()
        })
        .fold(0.0, f64::max)
}

fn largest_index(from: usize, kmax: usize, holds: impl Fn(usize) -> bool) -> usize {
    let mut idx = from - 1;
    for k in from..=kmax {
        if !holds(k) {
            break;
        }
        idx = k;
    }
    idx
}

/// Certifies the simplifying assumptions of a tableau pair up to `kmax`.
pub fn certify(primal: &ButcherTableau, dual: &ButcherTableau, kmax: usize) -> OrderCertificate {
    let tol = CERTIFY_TOL;
    let single = |t: &ButcherTableau| {
        (
            largest_index(1, kmax, |k| quadrature_residual(t, k) <= tol),
            largest_index(1, kmax, |k| stage_residual(t, k) <= tol),
            largest_index(1, kmax, |k| adjoint_residual(t, k) <= tol),
        )
    };
    let (p, q, r) = single(primal);
    let (p_dual, q_dual, r_dual) = single(dual);
    let mixed_stage = |o, i| largest_index(2, kmax, |k| mixed_stage_residual(o, i, k) <= tol);
    let mixed_adjoint = |o, i| largest_index(2, kmax, |k| mixed_adjoint_residual(o, i, k) <= tol);
    OrderCertificate {
        p,
        q,
        r,
        p_dual,
        q_dual,
        r_dual,
        cc_dual: mixed_stage(primal, dual),
        dd_dual: mixed_adjoint(primal, dual),
        dual_cc: mixed_stage(dual, primal),
        dual_dd: mixed_adjoint(dual, primal),
        r_inf: stability_at_infinity(primal).ok(),
        hypotheses: hypotheses(primal, dual),
    }
}

/// Checks H1–H3 on `primal` and H1'–H2' on `dual`.
pub fn hypotheses(primal: &ButcherTableau, dual: &ButcherTableau) -> Hypotheses {
    let s = primal.stages();
    let (a, b, ah, bh) = (&primal.a, &primal.b, &dual.a, &dual.b);
    let tol = STRUCTURE_TOL;
    let trailing = a.view((1, 1), (s - 1, s - 1)).into_owned();
    Hypotheses {
        first_row_zero: (0..s).all(|j| a[(0, j)].abs() <= tol),
        trailing_invertible: Lu::new(&trailing).is_ok(),
        stiffly_accurate: (0..s).all(|j| (a[(s - 1, j)] - b[j]).abs() <= tol),
        dual_last_column_zero: (0..s).all(|i| ah[(i, s - 1)].abs() <= tol),
        dual_first_column_b1: (0..s).all(|i| (ah[(i, 0)] - bh[0]).abs() <= tol),
    }
}

/// Coefficients `d_0..d_n` of `det(I − zM) = Σ d_k z^k` by Faddeev–LeVerrier.
fn det_one_minus_z(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut coeffs = vec![1.0];
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let eye = DMatrix::<f64>::identity(n, n);
    let mut prev = 1.0;
    for k in 1..=n {
        mk = m * &mk + &eye * prev;
        let ck = -(m * &mk).trace() / k as f64;
        coeffs.push(ck);
        prev = ck;
    }
    coeffs
}

fn degree(coeffs: &[f64]) -> Option<usize> {
    let scale = coeffs.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
    coeffs.iter().rposition(|c| c.abs() > 1e-12 * scale)
}

/// `R(∞)` for the stability function `R(z) = 1 + z bᵀ(I − zA)^{-1} 𝟙`.
///
/// Written as `det(I − zA + z𝟙bᵀ) / det(I − zA)`, the limit is the ratio of the
/// leading coefficients when both polynomials share a degree, zero when the
/// denominator has higher degree, and undefined otherwise.
pub fn stability_at_infinity(t: &ButcherTableau) -> Result<f64> {
    let s = t.stages();
    let ones = DVector::from_element(s, 1.0);
    let num = det_one_minus_z(&(&t.a - &ones * t.b.transpose()));
    let den = det_one_minus_z(&t.a);
    match (degree(&num), degree(&den)) {
        (Some(dn), Some(dd)) if dn == dd => Ok(num[dn] / den[dd]),
        (None, Some(_)) => Ok(0.0),
        (Some(dn), Some(dd)) if dn < dd => Ok(0.0),
        _ => Err(Error::LimitUndefined),
    }
}
