//! Graded formal-series algebra in (ξ₁, ξ₂, ε, h) with analytic torus
//! dependence in x stored as Fourier modes.
//!
//! A series is a finite sum of terms
//!
//! ```text
//!     c · ξ₁^{m₁} ξ₂^{m₂} ε^{e} h^{l} e^{i k·x},        c ∈ C, k ∈ Z²
//! ```
//!
//! graded by `weight = m₁ + m₂ + 2(e + l)` and truncated twice: by weight
//! (`n_max`) and by Fourier cutoff (`|k|∞ ≤ k_max`). The homogeneous slice of
//! weight j is the space 𝒟(j); "𝒪(j)" below always means "every stored term
//! has weight ≥ j".
//!
//! Series are immutable values after construction; every operation returns a
//! new series in canonical form (no explicit zero coefficients, deterministic
//! term order).

use std::collections::BTreeMap;
use std::fmt;

pub use num_complex::Complex64 as C64;

mod moyal;
pub use moyal::{exp_ad, moyal_bracket, moyal_star, poisson_bracket};

/// Coefficients with modulus at or below this are dropped by canonical-form
/// pruning. Chosen so cohomological residual checks keep ~1e-10 headroom.
pub const PRUNE_TOL: f64 = 1e-14;

/// Default weight truncation N_max.
pub const DEFAULT_N_MAX: u32 = 10;

/// Default Fourier cutoff K_max (sup norm on the mode vector).
pub const DEFAULT_K_MAX: i32 = 16;

/// Exponent multi-index of one term: powers of ξ₁, ξ₂, ε, h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Multidegree {
    pub xi: [u32; 2],
    pub eps: u32,
    pub h: u32,
}

impl Multidegree {
    pub const ZERO: Multidegree = Multidegree { xi: [0, 0], eps: 0, h: 0 };

    pub fn new(xi1: u32, xi2: u32, eps: u32, h: u32) -> Self {
        Multidegree { xi: [xi1, xi2], eps, h }
    }

    /// ξ-powers count once, ε- and h-powers twice.
    pub fn weight(&self) -> u32 {
        self.xi[0] + self.xi[1] + 2 * (self.eps + self.h)
    }
}

// Deterministic iteration order: lexicographic on (weight, ξ-pows, ε, h).
impl Ord for Multidegree {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.weight(), self.xi[0], self.xi[1], self.eps, self.h).cmp(&(
            other.weight(),
            other.xi[0],
            other.xi[1],
            other.eps,
            other.h,
        ))
    }
}

impl PartialOrd for Multidegree {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Fourier mode index on the 2-torus.
pub type Mode = [i32; 2];

/// One Fourier coefficient of a fixed multidegree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierMode {
    pub k: Mode,
    pub coeff: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolError {
    /// A product produced a Fourier mode beyond K_max; the requested cutoff
    /// is too small for this computation.
    CutoffExceeded { k: Mode },
    /// Operands carry different (N_max, K_max) truncations.
    CutMismatch,
    /// exp_ad detected an adjoint action that fails to raise the weight, so
    /// the exponential series would not terminate.
    DivergentExponential,
}

impl fmt::Display for SymbolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolError::CutoffExceeded { k } => {
                write!(f, "fourier mode ({}, {}) exceeds the cutoff K_max", k[0], k[1])
            }
            SymbolError::CutMismatch => write!(f, "operands have incompatible truncation cuts"),
            SymbolError::DivergentExponential => {
                write!(f, "adjoint action does not raise the weight; exp_ad diverges")
            }
        }
    }
}

impl std::error::Error for SymbolError {}

/// Truncated graded series in (ξ, ε, h) with Fourier modes in x.
#[derive(Debug, Clone, PartialEq)]
pub struct FormalSeries {
    n_max: u32,
    k_max: i32,
    terms: BTreeMap<Multidegree, BTreeMap<Mode, C64>>,
}

impl FormalSeries {
    pub fn zero(n_max: u32, k_max: i32) -> Self {
        FormalSeries { n_max, k_max, terms: BTreeMap::new() }
    }

    pub fn zero_default() -> Self {
        Self::zero(DEFAULT_N_MAX, DEFAULT_K_MAX)
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    /// Single term `c · ξ^xi ε^eps h^h e^{ik·x}`. Terms beyond the weight cut
    /// are silently truncated (the result is the zero series); modes beyond
    /// the Fourier cut are an error.
    pub fn monomial(
        d: Multidegree,
        k: Mode,
        c: C64,
        n_max: u32,
        k_max: i32,
    ) -> Result<Self, SymbolError> {
        let mut s = Self::zero(n_max, k_max);
        s.add_term(d, k, c)?;
        Ok(s)
    }

    /// Constant series.
    pub fn constant(c: C64, n_max: u32, k_max: i32) -> Self {
        Self::monomial(Multidegree::ZERO, [0, 0], c, n_max, k_max)
            .expect("mode (0,0) is always within the cutoff")
    }

    /// The coordinate symbol ξ_j (j = 0 or 1).
    pub fn xi(j: usize, n_max: u32, k_max: i32) -> Self {
        let mut xi = [0u32; 2];
        xi[j] = 1;
        Self::monomial(Multidegree { xi, eps: 0, h: 0 }, [0, 0], C64::new(1.0, 0.0), n_max, k_max)
            .expect("mode (0,0) is always within the cutoff")
    }

    /// ⟨a, ξ⟩ = a₁ξ₁ + a₂ξ₂ with real coefficients.
    pub fn linear_xi(a: [f64; 2], n_max: u32, k_max: i32) -> Self {
        let mut s = Self::zero(n_max, k_max);
        for j in 0..2 {
            let mut xi = [0u32; 2];
            xi[j] = 1;
            s.add_term(Multidegree { xi, eps: 0, h: 0 }, [0, 0], C64::new(a[j], 0.0))
                .expect("mode (0,0) is always within the cutoff");
        }
        s
    }

    /// Accumulate one coefficient, keeping canonical form.
    pub fn add_term(&mut self, d: Multidegree, k: Mode, c: C64) -> Result<(), SymbolError> {
        if k[0].abs() > self.k_max || k[1].abs() > self.k_max {
            return Err(SymbolError::CutoffExceeded { k });
        }
        if d.weight() > self.n_max || c.norm() <= PRUNE_TOL {
            return Ok(());
        }
        let modes = self.terms.entry(d).or_default();
        let entry = modes.entry(k).or_insert(C64::new(0.0, 0.0));
        *entry += c;
        if entry.norm() <= PRUNE_TOL {
            modes.remove(&k);
            if modes.is_empty() {
                self.terms.remove(&d);
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smallest weight among stored terms, if any.
    pub fn min_weight(&self) -> Option<u32> {
        self.terms.keys().next().map(|d| d.weight())
    }

    pub fn coeff(&self, d: Multidegree, k: Mode) -> C64 {
        self.terms
            .get(&d)
            .and_then(|m| m.get(&k))
            .copied()
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// Canonical-order iteration: (multidegree, mode, coefficient).
    pub fn iter_terms(&self) -> impl Iterator<Item = (Multidegree, Mode, C64)> + '_ {
        self.terms
            .iter()
            .flat_map(|(d, modes)| modes.iter().map(move |(k, c)| (*d, *k, *c)))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.values().map(|m| m.len()).sum()
    }

    fn check_cuts(&self, other: &Self) -> Result<(), SymbolError> {
        if self.n_max != other.n_max || self.k_max != other.k_max {
            return Err(SymbolError::CutMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SymbolError> {
        self.check_cuts(other)?;
        let mut out = self.clone();
        for (d, k, c) in other.iter_terms() {
            out.add_term(d, k, c)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SymbolError> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, v) in self.iter_terms() {
            out.add_term(d, k, v * c).expect("modes already within cutoff");
        }
        out
    }

    /// The x-average: the k = 0 slice.
    pub fn x_average(&self) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, c) in self.iter_terms() {
            if k == [0, 0] {
                out.add_term(d, k, c).expect("zero mode within cutoff");
            }
        }
        out
    }

    /// True when every stored term has mode k = 0.
    pub fn is_x_independent(&self) -> bool {
        self.iter_terms().all(|(_, k, _)| k == [0, 0])
    }

    /// Terms carrying at least one power of h, with that power divided out
    /// (the series P₁ in P = P₀ + h·P₁).
    pub fn h_block(&self) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, c) in self.iter_terms() {
            if d.h >= 1 {
                let dd = Multidegree { xi: d.xi, eps: d.eps, h: d.h - 1 };
                out.add_term(dd, k, c).expect("modes already within cutoff");
            }
        }
        out
    }

    /// Terms with no h power (the series P₀ in P = P₀ + h·P₁).
    pub fn h_free(&self) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, c) in self.iter_terms() {
            if d.h == 0 {
                out.add_term(d, k, c).expect("modes already within cutoff");
            }
        }
        out
    }

    /// Homogeneous slice 𝒟(w).
    pub fn homogeneous_part(&self, w: u32) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, c) in self.iter_terms() {
            if d.weight() == w {
                out.add_term(d, k, c).expect("modes already within cutoff");
            }
        }
        out
    }

    /// Complex conjugate of the symbol as a function on the torus: conjugate
    /// coefficients and flip mode signs.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, c) in self.iter_terms() {
            out.add_term(d, [-k[0], -k[1]], c.conj()).expect("mode flip stays within cutoff");
        }
        out
    }

    /// ∂/∂x_j: multiplies each mode-k coefficient by i·k_j.
    pub fn d_x(&self, j: usize) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, c) in self.iter_terms() {
            let factor = C64::new(0.0, k[j] as f64);
            out.add_term(d, k, c * factor).expect("modes already within cutoff");
        }
        out
    }

    /// ∂/∂ξ_j.
    pub fn d_xi(&self, j: usize) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, c) in self.iter_terms() {
            if d.xi[j] == 0 {
                continue;
            }
            let mut xi = d.xi;
            xi[j] -= 1;
            let dd = Multidegree { xi, eps: d.eps, h: d.h };
            out.add_term(dd, k, c * C64::new(d.xi[j] as f64, 0.0))
                .expect("modes already within cutoff");
        }
        out
    }

    /// Pointwise (commutative) product: the α = β = 0 part of the star
    /// product. Fails with `CutoffExceeded` when mode addition overflows.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self, SymbolError> {
        self.check_cuts(other)?;
        let mut out = Self::zero(self.n_max, self.k_max);
        for (da, ka, ca) in self.iter_terms() {
            for (db, kb, cb) in other.iter_terms() {
                let d = Multidegree {
                    xi: [da.xi[0] + db.xi[0], da.xi[1] + db.xi[1]],
                    eps: da.eps + db.eps,
                    h: da.h + db.h,
                };
                if d.weight() > self.n_max {
                    continue;
                }
                out.add_term(d, [ka[0] + kb[0], ka[1] + kb[1]], ca * cb)?;
            }
        }
        Ok(out)
    }

    /// Substitute series for the ξ variables: self must be x-independent;
    /// each occurrence of ξ_j is replaced by `u[j]`. Used for composition
    /// checks of asymptotic inverses.
    pub fn substitute_xi(&self, u: [&FormalSeries; 2]) -> Result<Self, SymbolError> {
        self.check_cuts(u[0])?;
        self.check_cuts(u[1])?;
        debug_assert!(self.is_x_independent());
        // Power tables, computed lazily up to the largest exponent in use.
        let one = Self::constant(C64::new(1.0, 0.0), self.n_max, self.k_max);
        let mut pow: [Vec<FormalSeries>; 2] = [vec![one.clone()], vec![one.clone()]];
        for j in 0..2 {
            let top = self.terms.keys().map(|d| d.xi[j]).max().unwrap_or(0);
            for m in 1..=top {
                let next = pow[j][(m - 1) as usize].pointwise_mul(u[j])?;
                pow[j].push(next);
            }
        }
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, _k, c) in self.iter_terms() {
            let base = Multidegree { xi: [0, 0], eps: d.eps, h: d.h };
            let factor = Self::monomial(base, [0, 0], c, self.n_max, self.k_max)?;
            let term = factor
                .pointwise_mul(&pow[0][d.xi[0] as usize])?
                .pointwise_mul(&pow[1][d.xi[1] as usize])?;
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Recenter the ξ variables: returns s(ξ + b) via binomial expansion.
    pub fn shift_xi(&self, b: [f64; 2]) -> Self {
        let mut out = Self::zero(self.n_max, self.k_max);
        for (d, k, c) in self.iter_terms() {
            // (ξ_j + b_j)^{m_j} = Σ_n C(m_j, n) b_j^{m_j − n} ξ_j^n
            for n1 in 0..=d.xi[0] {
                for n2 in 0..=d.xi[1] {
                    let w = binomial(d.xi[0], n1)
                        * b[0].powi((d.xi[0] - n1) as i32)
                        * binomial(d.xi[1], n2)
                        * b[1].powi((d.xi[1] - n2) as i32);
                    let dd = Multidegree { xi: [n1, n2], eps: d.eps, h: d.h };
                    out.add_term(dd, k, c * C64::new(w, 0.0))
                        .expect("modes already within cutoff");
                }
            }
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.iter_terms().map(|(_, _, c)| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient modulus among x-dependent terms (mode k ≠ 0).
    pub fn max_abs_nonzero_mode(&self) -> f64 {
        self.iter_terms()
            .filter(|(_, k, _)| *k != [0, 0])
            .map(|(_, _, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Real part as a symbol (the x variables are real, so this conjugates
    /// modes properly): (s + s̄)/2.
    pub fn real_part(&self) -> Self {
        self.add(&self.conj()).expect("cuts match").scale(C64::new(0.5, 0.0))
    }

    /// Imaginary part as a symbol: (s − s̄)/(2i).
    pub fn imag_part(&self) -> Self {
        self.sub(&self.conj()).expect("cuts match").scale(C64::new(0.0, -0.5))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_counts_xi_once_and_eps_h_twice() {
        assert_eq!(Multidegree::new(1, 0, 0, 0).weight(), 1);
        assert_eq!(Multidegree::new(0, 0, 1, 0).weight(), 2);
        assert_eq!(Multidegree::new(2, 1, 1, 1).weight(), 7);
    }

    #[test]
    fn multidegree_order_is_weight_then_lex() {
        let a = Multidegree::new(0, 0, 1, 0); // weight 2
        let b = Multidegree::new(2, 0, 0, 0); // weight 2, larger xi1
        let c = Multidegree::new(1, 0, 0, 0); // weight 1
        assert!(c < a && a < b);
    }

    #[test]
    fn canonical_form_prunes_zeros() {
        let mut s = FormalSeries::zero_default();
        let d = Multidegree::new(1, 0, 0, 0);
        s.add_term(d, [0, 0], C64::new(1.0, 0.0)).unwrap();
        s.add_term(d, [0, 0], C64::new(-1.0, 0.0)).unwrap();
        assert!(s.is_zero());
        s.add_term(d, [2, -3], C64::new(5e-15, 0.0)).unwrap();
        assert!(s.is_zero(), "sub-threshold coefficients must be pruned");
    }

    #[test]
    fn terms_beyond_weight_cut_are_truncated() {
        let mut s = FormalSeries::zero(4, 16);
        s.add_term(Multidegree::new(0, 0, 2, 1), [0, 0], C64::new(1.0, 0.0)).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn modes_beyond_fourier_cut_error() {
        let mut s = FormalSeries::zero(10, 4);
        let err = s.add_term(Multidegree::ZERO, [5, 0], C64::new(1.0, 0.0));
        assert_eq!(err, Err(SymbolError::CutoffExceeded { k: [5, 0] }));
    }

    #[test]
    fn derivative_rules() {
        // ∂_{x₁} e^{i 2 x₁} = 2i e^{i 2 x₁}
        let e = FormalSeries::monomial(Multidegree::ZERO, [2, 0], C64::new(1.0, 0.0), 10, 16)
            .unwrap();
        assert_eq!(e.d_x(0).coeff(Multidegree::ZERO, [2, 0]), C64::new(0.0, 2.0));
        // ∂_{ξ₂} ξ₂³ = 3 ξ₂²
        let s = FormalSeries::monomial(
            Multidegree::new(0, 3, 0, 0),
            [0, 0],
            C64::new(1.0, 0.0),
            10,
            16,
        )
        .unwrap();
        assert_eq!(s.d_xi(1).coeff(Multidegree::new(0, 2, 0, 0), [0, 0]), C64::new(3.0, 0.0));
    }

    #[test]
    fn shift_xi_is_binomial() {
        // (ξ₁ + 2)² = ξ₁² + 4ξ₁ + 4
        let sq = FormalSeries::monomial(
            Multidegree::new(2, 0, 0, 0),
            [0, 0],
            C64::new(1.0, 0.0),
            10,
            16,
        )
        .unwrap();
        let shifted = sq.shift_xi([2.0, 0.0]);
        assert_eq!(shifted.coeff(Multidegree::new(2, 0, 0, 0), [0, 0]), C64::new(1.0, 0.0));
        assert_eq!(shifted.coeff(Multidegree::new(1, 0, 0, 0), [0, 0]), C64::new(4.0, 0.0));
        assert_eq!(shifted.coeff(Multidegree::ZERO, [0, 0]), C64::new(4.0, 0.0));
    }
}
