//! Classical monodromy of the champagne-bottle system.
//!
//! The model is the Mexican-hat Hamiltonian p = ‖ξ‖²/2 + ‖x‖⁴ − ‖x‖² on R⁴
//! together with the angular momentum q = x₁ξ₂ − x₂ξ₁. Away from the
//! focus-focus critical value (0, 0) and the elliptic boundary, every value
//! (j, e) carries a Liouville torus whose stabilizer (period lattice) is
//! spanned by the pure rotation u = (0, 2π) and the radial vector
//! v = (T, −Θ), computed here by Gauss–Legendre quadrature after a sin²
//! substitution that absorbs the turning-point square-root singularities.
//! Continuing v around a closed loop of regular values and re-expressing the
//! returned basis in the initial one yields the classical monodromy matrix;
//! a loop enclosing the critical value once picks up a unit shear.
//!
//! The quantum–classical comparison is `compare_monodromies`: the spectral
//! holonomy class must equal the transpose-inverse of the classical class.

use std::fmt;
use std::sync::OnceLock;

use crate::latticemono::{ConjugacyResult, IMat2, conjugacy_equal};

/// Quadrature acceptance threshold on the 64-vs-128-node difference.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Maximum admissible continuation jump of Θ per loop step.
pub const MAX_THETA_STEP: f64 = std::f64::consts::FRAC_PI_2;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum ClassicalError {
    /// (j, e) has no bounded radial well (or j = 0, the singular reduction).
    NotRegularValue { j: f64, e: f64 },
    /// 64-vs-128-node disagreement above the quadrature threshold.
    QuadratureFailure { error: f64 },
    /// Θ continuation jumped by more than π/2 between consecutive samples.
    UndersampledLoop { step: usize, jump: f64 },
}

impl fmt::Display for ClassicalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassicalError::NotRegularValue { j, e } => {
                write!(f, "({j}, {e}) is not a regular value with a bounded radial well")
            }
            ClassicalError::QuadratureFailure { error } => {
                write!(f, "quadrature error estimate {error:.3e} exceeds {QUADRATURE_TOL:.0e}")
            }
            ClassicalError::UndersampledLoop { step, jump } => write!(
                f,
                "Θ continuation jump {jump:.4} at loop step {step} exceeds π/2; refine the loop"
            ),
        }
    }
}

impl std::error::Error for ClassicalError {}

/// The champagne-bottle integrable system on R⁴.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChampagneBottle;

impl ChampagneBottle {
    /// Energy p = ‖ξ‖²/2 + ‖x‖⁴ − 2‖x‖².
    pub fn p(self, x: [f64; 2], xi: [f64; 2]) -> f64 {
        let x2 = x[0] * x[0] + x[1] * x[1];
        0.5 * (xi[0] * xi[0] + xi[1] * xi[1]) + x2 * x2 - 2.0 * x2
    }

    /// Angular momentum q = x₁ξ₂ − x₂ξ₁.
    pub fn q(self, x: [f64; 2], xi: [f64; 2]) -> f64 {
        x[0] * xi[1] - x[1] * xi[0]
    }

    /// Gradient of p as (∂p/∂x, ∂p/∂ξ).
    pub fn grad_p(self, x: [f64; 2], xi: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let x2 = x[0] * x[0] + x[1] * x[1];
        let c = 4.0 * x2 - 4.0;
        ([c * x[0], c * x[1]], xi)
    }

    /// Gradient of q as (∂q/∂x, ∂q/∂ξ).
    pub fn grad_q(self, x: [f64; 2], xi: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        ([xi[1], -xi[0]], [-x[1], x[0]])
    }

    /// Poisson bracket {p, q} = ∂ξp·∂xq − ∂xp·∂ξq at one phase-space point.
    pub fn poisson_pq(self, x: [f64; 2], xi: [f64; 2]) -> f64 {
        let (px, pxi) = self.grad_p(x, xi);
        let (qx, qxi) = self.grad_q(x, xi);
        pxi[0] * qx[0] + pxi[1] * qx[1] - px[0] * qxi[0] - px[1] * qxi[1]
    }

    /// Reduced radial potential V_eff(r; j) = j²/(2r²) + r⁴ − 2r².
    pub fn v_eff(self, r: f64, j: f64) -> f64 {
        j * j / (2.0 * r * r) + r * r * r * r - 2.0 * r * r
    }

    /// ∂²V_eff/∂r² = 3j²/r⁴ + 12r² − 4.
    pub fn v_eff_second(self, r: f64, j: f64) -> f64 {
        3.0 * j * j / (r * r * r * r) + 12.0 * r * r - 4.0
    }

    /// Location and value of the unique radial well minimum for given j.
    ///
    /// V_eff′ = 0 ⟺ 4r⁶ − 4r⁴ = j², which has exactly one root right of
    /// 1 (where the left side starts increasing through 0).
    pub fn well_minimum(self, j: f64) -> (f64, f64) {
        let w = |r: f64| 4.0 * r.powi(6) - 4.0 * r.powi(4) - j * j;
        let mut lo = 1.0;
        let mut hi = 2.0;
        while w(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if w(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        let r0 = 0.5 * (lo + hi);
        (r0, self.v_eff(r0, j))
    }
}

/// Stabilizer of the Liouville torus over a regular value: the times
/// (t_p, t_q) with Φ^p_{t_p} ∘ Φ^q_{t_q} = id on the torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodLattice {
    /// Pure rotation generator (0, 2π).
    pub u: [f64; 2],
    /// Radial generator (T, −Θ).
    pub v: [f64; 2],
    /// 64-vs-128-node Gauss quadrature discrepancy (worst of T and Θ).
    pub quadrature_error: f64,
}

impl PeriodLattice {
    /// Radial period T.
    pub fn t(&self) -> f64 {
        self.v[0]
    }

    /// Rotation angle Θ per radial period.
    pub fn theta(&self) -> f64 {
        -self.v[1]
    }
}

/// The two positive roots of V_eff(r; j) = e bracketing the well minimum,
/// each located by bisection to 1e−12.
pub fn radial_turning_points(j: f64, e: f64) -> Result<(f64, f64), ClassicalError> {
    if j == 0.0 {
        return Err(ClassicalError::NotRegularValue { j, e });
    }
    let cb = ChampagneBottle;
    let (r0, vmin) = cb.well_minimum(j);
    if e <= vmin {
        return Err(ClassicalError::NotRegularValue { j, e });
    }
    let g = |r: f64| cb.v_eff(r, j) - e;
    // inner wall: V_eff → ∞ as r → 0⁺ thanks to the centrifugal term
    let mut lo = r0;
    while g(lo) < 0.0 {
        lo *= 0.5;
    }
    let r_minus = bisect_root(&g, lo, r0);
    // outer wall: V_eff → ∞ as r → ∞
    let mut hi = r0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let r_plus = bisect_root(&g, r0, hi);
    Ok((r_minus, r_plus))
}

/// Bisection for a sign change of g on [lo, hi] to absolute tolerance 1e−12.
fn bisect_root(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let s_lo = g(lo).is_sign_negative();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid).is_sign_negative() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n′(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

fn gl_rule(n: usize) -> &'static [(f64, f64)] {
    static GL64: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static GL128: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    match n {
        64 => GL64.get_or_init(|| gauss_legendre(64)),
        128 => GL128.get_or_init(|| gauss_legendre(128)),
        _ => unreachable!("only the 64- and 128-node rules are cached"),
    }
}

/// ∫₀^{π/2} f(θ) dθ with the n-node Gauss rule.
fn integrate_quarter(n: usize, f: &dyn Fn(f64) -> f64) -> f64 {
    let half = std::f64::consts::FRAC_PI_4;
    gl_rule(n).iter().map(|&(x, w)| w * f(half * (x + 1.0))).sum::<f64>() * half
}

/// Shared quadrature scaffold: the factorized energy surface.
///
/// With s = r², the allowed band is [s₋, s₊] where the cubic
/// s³ − 2s² − e·s + j²/2 has its two positive roots; the third root is
/// s₃ = 2 − s₋ − s₊, negative because the root product is −j²/2, giving
/// the exact factorization
/// 2(e − V_eff) = (r − r₋)(r₊ − r)·H(r) with
/// H(r) = 2(r + r₋)(r₊ + r)(r² − s₃)/r² > 0 on the whole band.
struct RadialBand {
    j: f64,
    r_minus: f64,
    delta: f64,
    s3: f64,
}

impl RadialBand {
    fn new(j: f64, e: f64) -> Result<Self, ClassicalError> {
        let (r_minus, r_plus) = radial_turning_points(j, e)?;
        let s3 = 2.0 - r_minus * r_minus - r_plus * r_plus;
        Ok(RadialBand { j, r_minus, delta: r_plus - r_minus, s3 })
    }

    fn r(&self, theta: f64) -> f64 {
        let s = theta.sin();
        self.r_minus + self.delta * s * s
    }

    fn h(&self, r: f64) -> f64 {
        let r_plus = self.r_minus + self.delta;
        2.0 * (r + self.r_minus) * (r_plus + r) * (r * r - self.s3) / (r * r)
    }

    /// T = 4∫ dθ/√H after r = r₋ + Δ·sin²θ.
    fn period(&self, n: usize) -> f64 {
        4.0 * integrate_quarter(n, &|theta| {
            let r = self.r(theta);
            1.0 / self.h(r).sqrt()
        })
    }

    /// Θ = 4j∫ dθ/(r²√H).
    fn rotation(&self, n: usize) -> f64 {
        4.0 * self.j
            * integrate_quarter(n, &|theta| {
                let r = self.r(theta);
                1.0 / (r * r * self.h(r).sqrt())
            })
    }

    /// I = (2Δ²/π)∫ sin²θ·cos²θ·√H dθ.
    fn action(&self, n: usize) -> f64 {
        2.0 * self.delta * self.delta / std::f64::consts::PI
            * integrate_quarter(n, &|theta| {
                let (s, c) = (theta.sin(), theta.cos());
                let r = self.r(theta);
                s * s * c * c * self.h(r).sqrt()
            })
    }
}

/// Period lattice of the torus over (j, e): basis {(0, 2π), (T, −Θ)} with
/// the radial period T and per-period rotation angle Θ from 128-node Gauss
/// quadrature, validated against the 64-node rule.
pub fn period_lattice(j: f64, e: f64) -> Result<PeriodLattice, ClassicalError> {
    let band = RadialBand::new(j, e)?;
    let t = band.period(128);
    let theta = band.rotation(128);
    let err = (t - band.period(64)).abs().max((theta - band.rotation(64)).abs());
    if !err.is_finite() || err > QUADRATURE_TOL {
        return Err(ClassicalError::QuadratureFailure { error: err });
    }
    debug_assert!(t > 0.0, "radial period must be positive");
    Ok(PeriodLattice { u: [0.0, TWO_PI], v: [t, -theta], quadrature_error: err })
}

/// Second action I(j, e) = (1/π)∫_{r₋}^{r₊} √(2(e − V_eff)) dr, the area
/// variable conjugate to the radial angle. Satisfies ∂I/∂e = T/2π and
/// ∂I/∂j = −Θ/2π.
pub fn action_integral(j: f64, e: f64) -> Result<f64, ClassicalError> {
    let band = RadialBand::new(j, e)?;
    let i = band.action(128);
    let err = (i - band.action(64)).abs();
    if !err.is_finite() || err > QUADRATURE_TOL {
        return Err(ClassicalError::QuadratureFailure { error: err });
    }
    Ok(i)
}

/// Outcome of continuing the period basis around a closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyResult {
    /// Returned basis expressed in the initial basis (u, v).
    pub matrix: IMat2,
    /// Winding of Θ in units of 2π (equals the loop's winding about (0,0)).
    pub winding: i64,
    /// Total unwrapped change of Θ around the loop.
    pub theta_change: f64,
}

/// Classical monodromy of a sampled closed loop of regular values.
///
/// The loop is the polygon through `points` (implicitly closed back to the
/// first point). Θ is continued by nearest-branch unwrapping; the rotation
/// generator u = (0, 2π) is invariant, so the returned basis is
/// (u, v − w·u) with w the Θ winding, i.e. the matrix [[1, −w], [0, 1]].
pub fn classical_monodromy(points: &[[f64; 2]]) -> Result<MonodromyResult, ClassicalError> {
    assert!(points.len() >= 3, "a loop needs at least 3 sample points");
    let theta0 = period_lattice(points[0][0], points[0][1])?.theta();
    let mut prev = theta0;
    for (step, pt) in points.iter().enumerate().skip(1).chain(std::iter::once((points.len(), &points[0]))) {
        let raw = period_lattice(pt[0], pt[1])?.theta();
        let unwrapped = raw + TWO_PI * ((prev - raw) / TWO_PI).round();
        let jump = (unwrapped - prev).abs();
        if jump > MAX_THETA_STEP {
            return Err(ClassicalError::UndersampledLoop { step, jump });
        }
        prev = unwrapped;
    }
    let theta_change = prev - theta0;
    let winding = (theta_change / TWO_PI).round() as i64;
    Ok(MonodromyResult {
        matrix: IMat2::new(1, -winding, 0, 1),
        winding,
        theta_change,
    })
}

/// Defect of the stabilizer closure: flow the initial torus point
/// x = (r₊, 0), ξ = (0, j/r₊) for time t_p under the energy flow (RK4 with
/// `n_steps` fixed steps), rotate phase space by t_q, and return the
/// distance to the start.
pub fn joint_flow_closure(
    j: f64,
    e: f64,
    t_p: f64,
    t_q: f64,
    n_steps: usize,
) -> Result<f64, ClassicalError> {
    let (_, r_plus) = radial_turning_points(j, e)?;
    let z0 = [r_plus, 0.0, 0.0, j / r_plus];
    let mut z = z0;
    let dt = t_p / n_steps as f64;
    let deriv = |z: &[f64; 4]| {
        let x2 = z[0] * z[0] + z[1] * z[1];
        let c = 4.0 * x2 - 4.0;
        [z[2], z[3], -c * z[0], -c * z[1]]
    };
    for _ in 0..n_steps {
        let k1 = deriv(&z);
        let k2 = deriv(&add_scaled(&z, &k1, 0.5 * dt));
        let k3 = deriv(&add_scaled(&z, &k2, 0.5 * dt));
        let k4 = deriv(&add_scaled(&z, &k3, dt));
        for i in 0..4 {
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    // the q-flow for time t rotates x and ξ simultaneously by angle t
    let (s, c) = t_q.sin_cos();
    let rot = |a: f64, b: f64| [c * a - s * b, s * a + c * b];
    let xr = rot(z[0], z[1]);
    let xir = rot(z[2], z[3]);
    let zr = [xr[0], xr[1], xir[0], xir[1]];
    let d2: f64 = zr.iter().zip(&z0).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(d2.sqrt())
}

fn add_scaled(z: &[f64; 4], k: &[f64; 4], s: f64) -> [f64; 4] {
    [z[0] + s * k[0], z[1] + s * k[1], z[2] + s * k[2], z[3] + s * k[3]]
}

/// Verdict of the quantum–classical comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyComparison {
    /// Transpose-inverse of the classical matrix, the class the spectral
    /// holonomy must land in.
    pub expected: IMat2,
    pub verdict: ConjugacyResult,
    pub matches: bool,
}

impl fmt::Display for MonodromyComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "expected class {} — {}",
            self.expected,
            match &self.verdict {
                ConjugacyResult::Conjugate(p) => format!("match (witness {p})"),
                ConjugacyResult::Distinct => "mismatch".to_string(),
                ConjugacyResult::Undecided => "undecided within search bound".to_string(),
            }
        )
    }
}

/// Does the spectral holonomy class equal the transpose-inverse of the
/// classical monodromy class?
pub fn compare_monodromies(m_sp: &IMat2, m_cl: &IMat2) -> MonodromyComparison {
    let expected = m_cl.inverse_unimodular().transpose();
    let verdict = conjugacy_equal(m_sp, &expected);
    let matches = verdict.is_conjugate();
    MonodromyComparison { expected, verdict, matches }
}
