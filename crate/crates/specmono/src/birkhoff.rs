//! Birkhoff normal form over a Diophantine torus.
//!
//! Starting from a total symbol P = P₀ + h·P₁ whose principal part
//! P₀ = p(ξ) + iεq(ξ) is x-independent with p(ξ) = ⟨a, ξ⟩ + 𝒪(ξ²), the
//! iteration removes the x-dependence of the h-block grade by grade: at step
//! N the homogeneous grade-(N−1) remainder R̄ is split into its x-average K
//! and an oscillating part, the cohomological equation
//!
//! ```text
//!     {G, ⟨a, ξ⟩} + R̄ = K,      ĝ(k) = −i·r̂(k) / (a·k)   (k ≠ 0)
//! ```
//!
//! is solved mode by mode, and the cumulative generator is re-applied through
//! `exp_ad`. Small divisors a·k are controlled by a Diophantine condition on
//! the frequency ratio, checked through continued-fraction convergents.

use std::fmt;

use crate::symbolcalc::{C64, FormalSeries, Mode, Multidegree, SymbolError, exp_ad};

/// Default denominator bound for the bounded Diophantine verification.
pub const DEFAULT_Q_MAX: u64 = 1_000_000;

/// Residual tolerance for a single cohomological solve.
pub const COHOMOLOGICAL_TOL: f64 = 1e-10;

/// Residual tolerance for a full normalization at default cuts.
pub const NORMAL_FORM_TOL: f64 = 1e-9;

/// The frequency data of the invariant torus: the linear-in-ξ coefficients
/// of p plus the Diophantine parameters (α, d) and the denominator bound for
/// the bounded check.
#[derive(Debug, Clone, Copy)]
pub struct Frequency {
    pub a: [f64; 2],
    pub alpha: f64,
    pub d: f64,
    pub q_max: u64,
}

impl Frequency {
    pub fn new(a: [f64; 2], alpha: f64, d: f64) -> Self {
        Frequency { a, alpha, d, q_max: DEFAULT_Q_MAX }
    }

    /// The rotation number a₁/a₂, with the symmetric convention a₂/a₁ when
    /// a₂ = 0 (then the ratio is 0, i.e. rational, as it should be).
    pub fn omega(&self) -> f64 {
        if self.a[1] != 0.0 {
            self.a[0] / self.a[1]
        } else {
            self.a[1] / self.a[0]
        }
    }

    pub fn is_diophantine(&self) -> bool {
        check_diophantine(self.omega(), self.alpha, self.d, self.q_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BirkhoffError {
    /// a·k = 0 exactly for a stored mode with nonzero coefficient; the
    /// frequency is resonant for this series and cannot be normalized.
    ResonantMode { k: Mode },
    /// The leading ξ-differential of the map is singular at the base point.
    SingularJacobian,
    /// The map to invert carries x-dependence.
    XDependentMap,
    /// The input series violates the principal-part contract
    /// p(ξ) + iεq(ξ) + 𝒪(h).
    PrincipalNotPrepared(String),
    /// n_target outside 1..=N_max.
    InvalidOrder { n_target: u32, n_max: u32 },
    Symbol(SymbolError),
}

impl fmt::Display for BirkhoffError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BirkhoffError::ResonantMode { k } => {
                write!(f, "resonant mode ({}, {}): a·k = 0 with nonzero coefficient", k[0], k[1])
            }
            BirkhoffError::SingularJacobian => {
                write!(f, "leading differential is singular at the base point")
            }
            BirkhoffError::XDependentMap => {
                write!(f, "asymptotic inversion requires an x-independent map")
            }
            BirkhoffError::PrincipalNotPrepared(why) => {
                write!(f, "input is not in prepared principal form: {why}")
            }
            BirkhoffError::InvalidOrder { n_target, n_max } => {
                write!(f, "normalization order {n_target} outside 1..={n_max}")
            }
            BirkhoffError::Symbol(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BirkhoffError {}

impl From<SymbolError> for BirkhoffError {
    fn from(e: SymbolError) -> Self {
        BirkhoffError::Symbol(e)
    }
}

/// |omega·n − m| / n minimized over integers m.
fn rational_distance(omega: f64, n: u64) -> f64 {
    let t = omega * n as f64;
    (t - t.round()).abs() / n as f64
}

fn violates(omega: f64, n: u64, alpha: f64, d: f64) -> bool {
    rational_distance(omega, n) < alpha / (n as f64).powf(1.0 + d)
}

/// Bounded (α, d)-Diophantine verification: |ω − m/n| ≥ α/n^{1+d} for all
/// denominators n ≤ q_max.
///
/// Only continued-fraction convergents can violate the bound once
/// α/n^{1+d} ≤ 1/(2n²) (a violator is then a best approximation), which
/// covers every n when α ≤ 1/2 and d ≥ 1. n = 1 is always checked directly
/// (for α > 1/2 it always fails), and for d < 1 the tail of denominators
/// where the convergent guarantee degrades is swept directly.
pub fn check_diophantine(omega: f64, alpha: f64, d: f64, q_max: u64) -> bool {
    assert!(alpha > 0.0 && d > 0.0 && q_max >= 1, "diophantine parameters out of range");
    if violates(omega, 1, alpha, d) {
        return false;
    }
    // Convergents p/q of omega by the standard recurrence. Stop at q_max, at
    // the double-precision resolution of the remainder, or on overflow-scale
    // denominators.
    let mut x = omega;
    let (mut p_prev, mut q_prev): (i128, i128) = (1, 0);
    let (mut p, mut q): (i128, i128) = (omega.floor() as i128, 1);
    for _ in 0..200 {
        if q as u128 > q_max as u128 {
            break;
        }
        let approx = p as f64 / q as f64;
        if (omega - approx).abs() < alpha / (q as f64).powf(1.0 + d) {
            return false;
        }
        let frac = x - x.floor();
        if frac < 1e-12 || q > (1u64 << 62) as i128 {
            break;
        }
        x = 1.0 / frac;
        let a = x.floor() as i128;
        let p_next = a * p + p_prev;
        let q_next = a * q + q_prev;
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
    }
    if d < 1.0 {
        // guarantee holds for n ≤ (2α)^{−1/(1−d)}; sweep the rest
        let n_star = (1.0 / (2.0 * alpha)).powf(1.0 / (1.0 - d));
        let start = (n_star.floor() as u64).max(1);
        for n in start..=q_max {
            if violates(omega, n, alpha, d) {
                return false;
            }
        }
    }
    true
}

/// Solve {G, ⟨a, ξ⟩} + rbar = K mode by mode: K is the x-average of rbar and
/// ĝ(k) = −i·r̂(k)/(a·k) for k ≠ 0. Returns (g, k_part).
///
/// The solve is diagonal in the Fourier modes, so rbar may be any series;
/// the normal-form iteration feeds it homogeneous slices.
pub fn solve_cohomological(
    rbar: &FormalSeries,
    freq: &Frequency,
) -> Result<(FormalSeries, FormalSeries), BirkhoffError> {
    let mut g = FormalSeries::zero(rbar.n_max(), rbar.k_max());
    let mut k_part = FormalSeries::zero(rbar.n_max(), rbar.k_max());
    for (deg, k, c) in rbar.iter_terms() {
        if k == [0, 0] {
            k_part.add_term(deg, k, c)?;
            continue;
        }
        let ak = freq.a[0] * k[0] as f64 + freq.a[1] * k[1] as f64;
        if ak == 0.0 {
            return Err(BirkhoffError::ResonantMode { k });
        }
        g.add_term(deg, k, c * C64::new(0.0, -1.0 / ak))?;
    }
    Ok((g, k_part))
}

/// Output of `birkhoff_normal_form`.
#[derive(Debug, Clone)]
pub struct NormalFormResult {
    /// Cumulative generator G^(N) = Σ_{j=2}^{N} G_j with G_j homogeneous of
    /// weight j − 2.
    pub generator: FormalSeries,
    /// exp(i·ad_G) applied to the input: P₀ + h·(x-independent part) plus a
    /// remainder of weight ≥ N−1 in the h-block.
    pub normal_form: FormalSeries,
    pub normalized_order: u32,
    /// Max modulus of x-dependent h-block coefficients below weight N−1.
    pub residual_norm: f64,
}

fn validate_principal(p_total: &FormalSeries, freq: &Frequency) -> Result<(), BirkhoffError> {
    let scale = p_total.max_abs().max(1.0);
    let tol = 1e-9 * scale;
    for (d, k, c) in p_total.h_free().iter_terms() {
        if k != [0, 0] {
            return Err(BirkhoffError::PrincipalNotPrepared(format!(
                "h⁰ term at mode ({}, {}) is x-dependent",
                k[0], k[1]
            )));
        }
        match d.eps {
            0 => {
                if c.im.abs() > tol {
                    return Err(BirkhoffError::PrincipalNotPrepared(
                        "p(ξ) part has an imaginary coefficient".into(),
                    ));
                }
            }
            1 => {
                if c.re.abs() > tol {
                    return Err(BirkhoffError::PrincipalNotPrepared(
                        "iεq(ξ) part has a real coefficient".into(),
                    ));
                }
            }
            _ => {
                return Err(BirkhoffError::PrincipalNotPrepared(
                    "h⁰ block carries ε-power ≥ 2".into(),
                ));
            }
        }
    }
    for j in 0..2 {
        let mut xi = [0u32; 2];
        xi[j] = 1;
        let c = p_total.coeff(Multidegree { xi, eps: 0, h: 0 }, [0, 0]);
        if (c.re - freq.a[j]).abs() > 1e-12 * scale || c.im.abs() > 1e-12 * scale {
            return Err(BirkhoffError::PrincipalNotPrepared(format!(
                "linear ξ{} coefficient {} does not match the frequency component {}",
                j + 1,
                c.re,
                freq.a[j]
            )));
        }
    }
    Ok(())
}

/// Normal form to order `n_target`: returns a cumulative generator G such
/// that exp(i·ad_G)(p_total) has an x-independent h-block below weight
/// n_target − 1, together with that conjugated series.
///
/// The principal (h⁰) part must already be the prepared p(ξ) + iεq(ξ) with
/// p linear part ⟨freq.a, ξ⟩; it is passed through exactly.
pub fn birkhoff_normal_form(
    p_total: &FormalSeries,
    freq: &Frequency,
    n_target: u32,
) -> Result<NormalFormResult, BirkhoffError> {
    if n_target < 1 || n_target > p_total.n_max() {
        return Err(BirkhoffError::InvalidOrder { n_target, n_max: p_total.n_max() });
    }
    validate_principal(p_total, freq)?;
    let mut generator = FormalSeries::zero(p_total.n_max(), p_total.k_max());
    for n in 1..n_target {
        let conjugated = exp_ad(&generator, p_total)?;
        let rbar = conjugated.h_block().homogeneous_part(n - 1);
        if rbar.is_zero() {
            continue;
        }
        let (g, _k_part) = solve_cohomological(&rbar, freq)?;
        if !g.is_zero() {
            generator = generator.add(&g)?;
        }
    }
    let normal_form = exp_ad(&generator, p_total)?;
    let mut residual_norm = 0.0f64;
    for (d, k, c) in normal_form.h_block().iter_terms() {
        if k != [0, 0] && d.weight() + 1 < n_target {
            residual_norm = residual_norm.max(c.norm());
        }
    }
    Ok(NormalFormResult { generator, normal_form, normalized_order: n_target, residual_norm })
}

/// Asymptotic compositional inverse of an x-independent map R² → R² ≅ C.
///
/// The input series is read as ξ ↦ value with the complex value identified
/// with a real 2-vector. The result g is a series in a formal variable
/// w = λ − f₀(base) (again two real components in the ξ slots) such that
/// g(f(base + u) − f₀(base)) = base + u up to the truncation weight; its
/// leading part is base + A⁻¹·w with A the ξ-differential of the
/// (ε,h)-independent part at base.
pub fn invert_asymptotic(
    series_map: &FormalSeries,
    base: [f64; 2],
) -> Result<FormalSeries, BirkhoffError> {
    if !series_map.is_x_independent() {
        return Err(BirkhoffError::XDependentMap);
    }
    let n_max = series_map.n_max();
    let k_max = series_map.k_max();
    let shifted = series_map.shift_xi(base);
    let f0_at_base = shifted.coeff(Multidegree::ZERO, [0, 0]);
    let a11 = shifted.coeff(Multidegree::new(1, 0, 0, 0), [0, 0]);
    let a12 = shifted.coeff(Multidegree::new(0, 1, 0, 0), [0, 0]);
    let jac = [[a11.re, a12.re], [a11.im, a12.im]];
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let scale = jac.iter().flatten().map(|v| v * v).sum::<f64>().max(1e-30);
    if det.abs() <= 1e-12 * scale {
        return Err(BirkhoffError::SingularJacobian);
    }
    let inv = [
        [jac[1][1] / det, -jac[0][1] / det],
        [-jac[1][0] / det, jac[0][0] / det],
    ];
    // apply a real 2×2 matrix to a complex-valued series seen as R²-valued
    let apply = |m: &[[f64; 2]; 2], s: &FormalSeries| -> FormalSeries {
        let re = s.real_part();
        let im = s.imag_part();
        re.scale(C64::new(m[0][0], m[1][0]))
            .add(&im.scale(C64::new(m[0][1], m[1][1])))
            .expect("cuts match")
    };
    // r(u) = f(base+u) − f₀(base) − A·u: every term has weight ≥ 2
    let mut linear = FormalSeries::zero(n_max, k_max);
    linear.add_term(Multidegree::new(1, 0, 0, 0), [0, 0], a11)?;
    linear.add_term(Multidegree::new(0, 1, 0, 0), [0, 0], a12)?;
    let const_part = FormalSeries::constant(f0_at_base, n_max, k_max);
    let r = shifted.sub(&const_part)?.sub(&linear)?;
    // fixed point G = A⁻¹(w − r(G)); each pass extends correctness one weight
    let w_series = FormalSeries::xi(0, n_max, k_max)
        .add(&FormalSeries::xi(1, n_max, k_max).scale(C64::new(0.0, 1.0)))?;
    let mut g = apply(&inv, &w_series);
    for _ in 0..=n_max {
        let g_re = g.real_part();
        let g_im = g.imag_part();
        let r_of_g = r.substitute_xi([&g_re, &g_im])?;
        let next = apply(&inv, &w_series.sub(&r_of_g)?);
        if next == g {
            break;
        }
        g = next;
    }
    g.add(&FormalSeries::constant(C64::new(base[0], base[1]), n_max, k_max))
        .map_err(Into::into)
}

/// The shipped twist example: ⟨a, ξ⟩ + (γ/2)ξ₂² + iεξ₂ + h·c·e^{ik·x}.
///
/// This is the prepared symbol whose principal part matches the `twist`
/// model map (p = ξ₁-flow with a ξ₂-dependent frequency, q = ξ₂), with one
/// injected oscillating term in the h-block for the normal form to remove.
pub fn twist_symbol(
    a: [f64; 2],
    gamma: f64,
    mode: Mode,
    mode_coeff: C64,
    n_max: u32,
    k_max: i32,
) -> Result<FormalSeries, BirkhoffError> {
    let mut s = FormalSeries::linear_xi(a, n_max, k_max);
    s.add_term(Multidegree::new(0, 2, 0, 0), [0, 0], C64::new(gamma / 2.0, 0.0))?;
    s.add_term(Multidegree::new(0, 1, 1, 0), [0, 0], C64::new(0.0, 1.0))?;
    s.add_term(Multidegree::new(0, 0, 0, 1), mode, mode_coeff)?;
    Ok(s)
}

/// Golden ratio (1+√5)/2, the canonical Diophantine frequency used by the
/// examples and tests.
pub const GOLDEN: f64 = 1.618033988749895;
