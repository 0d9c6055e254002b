//! Eigenvalue-lattice synthesis in good rectangles.
//!
//! A model system packages an action map φ: ξ ↦ a together with the
//! quantization offsets (τ_c, Maslov indices). The asymptotic eigenvalues in
//! a good rectangle around χ(a) = a₁ + iεa₂ are
//!
//! ```text
//!     λ_k = χ(φ(ξ_k)),     ξ_k = −τ_c + h(k − maslov/4),   k ∈ Z²,
//! ```
//!
//! displaced by an 𝒪(h^∞) defect modeled as deterministic jitter. The module
//! also classifies good values (twist condition, non-degenerate second
//! component, Diophantine frequency), provides the analytic micro-chart of a
//! rectangle for oracle comparisons, and identifies the joint spectrum of a
//! commuting Hermitian pair (the finite-dimensional normal-operator picture).

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::birkhoff::{DEFAULT_Q_MAX, check_diophantine};
use crate::latticemono::MicroChart;
use crate::symbolcalc::C64;

mod joint;
pub use joint::{JointPoint, JointWindow, joint_spectrum_normal};

/// Half-width constant: a good rectangle spans h^δ/C by ε·h^δ/C.
pub const RECT_C: f64 = 4.0;

/// Jitter is applied at scale jitter_scale · h^JITTER_POWER.
pub const JITTER_POWER: i32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum QuantizeError {
    /// eps/h outside the admissible band 10·h ≤ eps ≤ h^δ.
    RegimeViolation { eps: f64, h: f64, delta: f64 },
    /// A required point has no preimage/image under the model map.
    OutOfDomain { a: [f64; 2] },
    /// No lattice point fell inside the rectangle.
    EmptyRectangle,
    /// ‖A₁A₂ − A₂A₁‖_F exceeds the commuting tolerance.
    NotCommuting { rel_comm: f64 },
    /// A matrix input is not Hermitian to working precision.
    NotHermitian { which: usize },
    /// Numerical eigenspaces too entangled for reliable simultaneous
    /// diagonalization.
    IllConditioned(String),
}

impl fmt::Display for QuantizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantizeError::RegimeViolation { eps, h, delta } => write!(
                f,
                "regime violation: need 10·h ≤ eps ≤ h^δ, got eps = {eps}, h = {h}, δ = {delta}"
            ),
            QuantizeError::OutOfDomain { a } => {
                write!(f, "point ({}, {}) outside the model domain", a[0], a[1])
            }
            QuantizeError::EmptyRectangle => {
                write!(f, "no lattice point falls inside the rectangle")
            }
            QuantizeError::NotCommuting { rel_comm } => {
                write!(f, "matrices do not commute: relative commutator norm {rel_comm:.3e}")
            }
            QuantizeError::NotHermitian { which } => {
                write!(f, "input matrix {which} is not Hermitian")
            }
            QuantizeError::IllConditioned(why) => {
                write!(f, "simultaneous diagonalization ill-conditioned: {why}")
            }
        }
    }
}

impl std::error::Error for QuantizeError {}

/// Built-in action maps φ: ξ-space → value space.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelMap {
    /// φ = id.
    Identity,
    /// φ(ξ) = (ξ₁ + ξ₂ + (γ/2)ξ₂², ξ₂): a completely explicit twist map with
    /// frequency ω(a) = 1/(1 + γa₂).
    Twist { gamma: f64 },
    /// One branch of the focus-focus action chart on the annulus
    /// rmin ≤ |a| ≤ rmax (rmax < 1/e):
    ///
    /// ```text
    ///     φ⁻¹(a) = ( (a₁·ln r + a₂·θ) / 2π , a₂ ),    r = |a|, θ = arg a,
    /// ```
    ///
    /// with arg taken in (anchor − π, anchor + π]. Charts with different
    /// anchors differ by the integer shear [[1,1],[0,1]] across the cut,
    /// which is exactly the monodromy germ this model exists to exhibit.
    FocusFocusSector { rmin: f64, rmax: f64, anchor: f64 },
}

impl ModelMap {
    /// The value a = φ(ξ), or None outside the chart domain.
    pub fn forward(&self, xi: [f64; 2]) -> Option<[f64; 2]> {
        match self {
            ModelMap::Identity => Some(xi),
            ModelMap::Twist { gamma } => {
                Some([xi[0] + xi[1] + gamma / 2.0 * xi[1] * xi[1], xi[1]])
            }
            ModelMap::FocusFocusSector { rmin, rmax, anchor } => {
                // a₂ = ξ₂; solve a₁·ln r + a₂·θ = 2πξ₁ by bisection — the
                // left side is strictly decreasing in a₁ on r < 1/e
                let a2 = xi[1];
                if a2.abs() > *rmax {
                    return None;
                }
                let target = 2.0 * std::f64::consts::PI * xi[0];
                let g = |a1: f64| -> f64 {
                    let r = (a1 * a1 + a2 * a2).sqrt();
                    a1 * r.ln() + a2 * branch_angle(a1, a2, *anchor) - target
                };
                let bound = (rmax * rmax - a2 * a2).max(0.0).sqrt();
                let (mut lo, mut hi) = (-bound, bound);
                let (glo, ghi) = (g(lo), g(hi));
                if !(glo.min(ghi) <= 0.0 && 0.0 <= glo.max(ghi)) {
                    return None;
                }
                let sign = if glo > ghi { 1.0 } else { -1.0 };
                for _ in 0..120 {
                    let mid = 0.5 * (lo + hi);
                    if sign * g(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let a = [0.5 * (lo + hi), a2];
                // reject cut-adjacent artifacts and out-of-annulus roots
                let r = (a[0] * a[0] + a[1] * a[1]).sqrt();
                if g(a[0]).abs() > 1e-9 || r < *rmin || r > *rmax {
                    return None;
                }
                Some(a)
            }
        }
    }

    /// The closed-form inverse ξ = φ⁻¹(a), or None outside the model domain.
    pub fn inverse(&self, a: [f64; 2]) -> Option<[f64; 2]> {
        match self {
            ModelMap::Identity => Some(a),
            ModelMap::Twist { gamma } => {
                Some([a[0] - a[1] - gamma / 2.0 * a[1] * a[1], a[1]])
            }
            ModelMap::FocusFocusSector { rmin, rmax, anchor } => {
                let r = (a[0] * a[0] + a[1] * a[1]).sqrt();
                if r < *rmin || r > *rmax {
                    return None;
                }
                let theta = branch_angle(a[0], a[1], *anchor);
                Some([(a[0] * r.ln() + a[1] * theta) / (2.0 * std::f64::consts::PI), a[1]])
            }
        }
    }

    /// Jacobian of φ⁻¹ at the value point a (the micro-chart differential).
    pub fn d_inverse(&self, a: [f64; 2]) -> Option<[[f64; 2]; 2]> {
        match self {
            ModelMap::Identity => Some([[1.0, 0.0], [0.0, 1.0]]),
            ModelMap::Twist { gamma } => Some([[1.0, -1.0 - gamma * a[1]], [0.0, 1.0]]),
            ModelMap::FocusFocusSector { rmin, rmax, anchor } => {
                let r2 = a[0] * a[0] + a[1] * a[1];
                let r = r2.sqrt();
                if r < *rmin || r > *rmax {
                    return None;
                }
                let theta = branch_angle(a[0], a[1], *anchor);
                let two_pi = 2.0 * std::f64::consts::PI;
                let cos2t = (a[0] * a[0] - a[1] * a[1]) / r2;
                let sin2t = 2.0 * a[0] * a[1] / r2;
                Some([[(r.ln() + cos2t) / two_pi, (theta + sin2t) / two_pi], [0.0, 1.0]])
            }
        }
    }

    /// Jacobian of φ at ξ = φ⁻¹(a), as the inverse of `d_inverse`.
    pub fn d_forward(&self, a: [f64; 2]) -> Option<[[f64; 2]; 2]> {
        let m = self.d_inverse(a)?;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 {
            return None;
        }
        Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
    }
}

/// Angle of (x, y) in the branch (anchor − π, anchor + π].
fn branch_angle(x: f64, y: f64, anchor: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let t = y.atan2(x);
    t + two_pi * ((anchor - t) / two_pi).round()
}

/// A model system: action map plus quantization data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSystem {
    pub map: ModelMap,
    /// Locally constant action offset (S/2π minus the lattice part).
    pub tau_c: [f64; 2],
    /// Maslov indices of the two fundamental cycles.
    pub maslov: [i32; 2],
    /// Rectangle size exponent δ ∈ (0, 1).
    pub delta: f64,
}

impl ModelSystem {
    pub fn new(map: ModelMap, tau_c: [f64; 2], maslov: [i32; 2], delta: f64) -> Self {
        assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
        ModelSystem { map, tau_c, maslov, delta }
    }

    /// Same system read through a different branch anchor (focus-focus
    /// only; no-op for single-valued models).
    pub fn with_anchor(&self, anchor: f64) -> Self {
        let mut out = self.clone();
        if let ModelMap::FocusFocusSector { anchor: a, .. } = &mut out.map {
            *a = anchor;
        }
        out
    }

    /// Lattice point ξ_k = −τ_c + h(k − maslov/4).
    pub fn xi_of_k(&self, k: [i64; 2], h: f64) -> [f64; 2] {
        [
            -self.tau_c[0] + h * (k[0] as f64 - self.maslov[0] as f64 / 4.0),
            -self.tau_c[1] + h * (k[1] as f64 - self.maslov[1] as f64 / 4.0),
        ]
    }

    /// Frequency ω(a): ratio v₁/v₂ of the components of ∇_ξφ₁ at φ⁻¹(a),
    /// with the symmetric convention v₂/v₁ when v₂ = 0.
    pub fn omega_of(&self, a: [f64; 2]) -> Option<f64> {
        let df = self.map.d_forward(a)?;
        let v = df[0];
        if v[1] != 0.0 {
            Some(v[0] / v[1])
        } else if v[0] != 0.0 {
            Some(v[1] / v[0])
        } else {
            None
        }
    }

    /// Norm of ∇_ξφ₂ at φ⁻¹(a) (the d⟨q⟩ degeneracy detector).
    pub fn dq_norm(&self, a: [f64; 2]) -> Option<f64> {
        let df = self.map.d_forward(a)?;
        Some((df[1][0] * df[1][0] + df[1][1] * df[1][1]).sqrt())
    }
}

/// The spectral window R(χ_a, ε, h): center χ_a = a₁ + iεa₂, half-widths
/// (h^δ/4, ε·h^δ/4).
#[derive(Debug, Clone, PartialEq)]
pub struct GoodRectangle {
    pub center: C64,
    pub half_width: [f64; 2],
    pub eps: f64,
    pub h: f64,
    pub delta: f64,
}

impl GoodRectangle {
    /// Build the rectangle at value-space center a, enforcing the regime
    /// 10·h ≤ eps ≤ h^δ.
    pub fn new(a: [f64; 2], eps: f64, h: f64, delta: f64) -> Result<Self, QuantizeError> {
        // negated comparisons, not flipped ones: NaN parameters must also
        // land in the rejection branch
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(h > 0.0)
            || !(eps >= 10.0 * h)
            || !(eps <= h.powf(delta) * (1.0 + 1e-12))
            || !(delta > 0.0 && delta < 1.0)
        {
            return Err(QuantizeError::RegimeViolation { eps, h, delta });
        }
        let s = h.powf(delta) / RECT_C;
        Ok(GoodRectangle {
            center: C64::new(a[0], eps * a[1]),
            half_width: [s, eps * s],
            eps,
            h,
            delta,
        })
    }

    pub fn contains(&self, lambda: C64) -> bool {
        (lambda.re - self.center.re).abs() <= self.half_width[0]
            && (lambda.im - self.center.im).abs() <= self.half_width[1]
    }

    /// Center in unscaled value coordinates u = (Re λ, Im λ/ε).
    pub fn u_center(&self) -> [f64; 2] {
        [self.center.re, self.center.im / self.eps]
    }

    /// The four corners in unscaled value coordinates.
    pub fn u_corners(&self) -> [[f64; 2]; 4] {
        let c = self.u_center();
        let w = [self.half_width[0], self.half_width[1] / self.eps];
        [
            [c[0] - w[0], c[1] - w[1]],
            [c[0] + w[0], c[1] - w[1]],
            [c[0] - w[0], c[1] + w[1]],
            [c[0] + w[0], c[1] + w[1]],
        ]
    }
}

/// Where a point cloud came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic { seed: u64 },
    File { path: String },
    Matrix,
}

/// Eigenvalues observed in one rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCloud {
    pub points: Vec<C64>,
    pub eps: f64,
    pub h: f64,
    pub provenance: Provenance,
}

impl SpectrumCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest pairwise distance (∞ for fewer than two points). Quadratic;
    /// intended for per-rectangle clouds.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                best = best.min((p - q).norm());
            }
        }
        best
    }

    pub fn points_in(&self, rect: &GoodRectangle) -> Vec<C64> {
        self.points.iter().copied().filter(|p| rect.contains(*p)).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-point RNG stream key: independent of enumeration order.
fn point_key(seed: u64, k: [i64; 2]) -> u64 {
    let s = splitmix64(seed);
    let s = splitmix64(s ^ (k[0] as u64));
    splitmix64(s ^ (k[1] as u64))
}

/// Synthesize the eigenvalue lattice inside one good rectangle:
/// λ_k = χ(φ(ξ_k)) for all k ∈ Z² landing inside, each displaced by a
/// uniform jitter of scale jitter_scale·h¹⁰ (imaginary part additionally
/// scaled by ε). Deterministic and bit-identical under a fixed seed.
pub fn synth_spectrum(
    model: &ModelSystem,
    rect: &GoodRectangle,
    jitter_scale: f64,
    seed: u64,
) -> Result<SpectrumCloud, QuantizeError> {
    let h = rect.h;
    let eps = rect.eps;
    // bounding k-box from the rectangle corners, pulled back through φ⁻¹,
    // with a safety margin for chart curvature
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for u in rect.u_corners() {
        let xi = model.map.inverse(u).ok_or(QuantizeError::OutOfDomain { a: u })?;
        for j in 0..2 {
            let kf = (xi[j] + model.tau_c[j]) / h + model.maslov[j] as f64 / 4.0;
            lo[j] = lo[j].min(kf);
            hi[j] = hi[j].max(kf);
        }
    }
    let k_lo = [lo[0].floor() as i64 - 3, lo[1].floor() as i64 - 3];
    let k_hi = [hi[0].ceil() as i64 + 3, hi[1].ceil() as i64 + 3];
    let jitter = jitter_scale * h.powi(JITTER_POWER);
    let mut points = Vec::new();
    for k1 in k_lo[0]..=k_hi[0] {
        for k2 in k_lo[1]..=k_hi[1] {
            let xi = model.xi_of_k([k1, k2], h);
            let Some(a) = model.map.forward(xi) else { continue };
            let mut lambda = C64::new(a[0], eps * a[1]);
            if !rect.contains(lambda) {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(point_key(seed, [k1, k2]));
            let u1: f64 = rng.gen_range(-1.0..1.0);
            let u2: f64 = rng.gen_range(-1.0..1.0);
            lambda += C64::new(jitter * u1, jitter * eps * u2);
            points.push(lambda);
        }
    }
    if points.is_empty() {
        return Err(QuantizeError::EmptyRectangle);
    }
    points.sort_by(|p, q| (p.re, p.im).partial_cmp(&(q.re, q.im)).unwrap());
    Ok(SpectrumCloud { points, eps, h, provenance: Provenance::Synthetic { seed } })
}

/// The analytic micro-chart of a rectangle: the affine part of
/// f̃₀ = τ_c + φ⁻¹ at the rectangle center, with zero fit residual. This is
/// the reference object that fitted charts are compared against.
pub fn micro_chart_forward(
    model: &ModelSystem,
    rect: &GoodRectangle,
) -> Result<MicroChart, QuantizeError> {
    let u0 = rect.u_center();
    let xi0 = model.map.inverse(u0).ok_or(QuantizeError::OutOfDomain { a: u0 })?;
    let diff = model.map.d_inverse(u0).ok_or(QuantizeError::OutOfDomain { a: u0 })?;
    let f0_at_center = [model.tau_c[0] + xi0[0], model.tau_c[1] + xi0[1]];
    let offset = [
        f0_at_center[0] - diff[0][0] * u0[0] - diff[0][1] * u0[1],
        f0_at_center[1] - diff[1][0] * u0[0] - diff[1][1] * u0[1],
    ];
    Ok(MicroChart {
        rect: rect.clone(),
        f0_diff: diff,
        f0_offset: offset,
        fit_residual: 0.0,
    })
}

/// Classification of one grid value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoodClass {
    Good,
    Bad,
}

/// Grid classification of good values over a rectangle in value space.
#[derive(Debug, Clone)]
pub struct GoodValueMap {
    pub origin: [f64; 2],
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major: index = iy·nx + ix.
    pub labels: Vec<GoodClass>,
}

impl GoodValueMap {
    pub fn at(&self, ix: usize, iy: usize) -> GoodClass {
        self.labels[iy * self.nx + ix]
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.origin[0] + ix as f64 * self.step, self.origin[1] + iy as f64 * self.step]
    }

    pub fn fraction_bad(&self) -> f64 {
        let bad = self.labels.iter().filter(|c| **c == GoodClass::Bad).count();
        bad as f64 / self.labels.len().max(1) as f64
    }
}

/// Label each grid point of the region as good or bad. A value a is BAD when
/// |∇ω(a)| < α (twist degeneracy, central finite differences), when
/// |∇_ξφ₂| < α (degenerate second component), or when ω(a) fails the
/// bounded (α, d)-Diophantine test. Grid points outside the model domain are
/// an error: the caller must choose regions inside the chart image.
pub fn good_values(
    model: &ModelSystem,
    lo: [f64; 2],
    hi: [f64; 2],
    alpha: f64,
    d: f64,
    grid_step: f64,
) -> Result<GoodValueMap, QuantizeError> {
    assert!(alpha > 0.0 && d > 0.0 && grid_step > 0.0);
    let nx = ((hi[0] - lo[0]) / grid_step).floor() as usize + 1;
    let ny = ((hi[1] - lo[1]) / grid_step).floor() as usize + 1;
    let mut labels = Vec::with_capacity(nx * ny);
    let fd_step = grid_step.min(1e-4);
    for iy in 0..ny {
        for ix in 0..nx {
            let a = [lo[0] + ix as f64 * grid_step, lo[1] + iy as f64 * grid_step];
            let omega = model.omega_of(a).ok_or(QuantizeError::OutOfDomain { a })?;
            let dq = model.dq_norm(a).ok_or(QuantizeError::OutOfDomain { a })?;
            // |∇ω| by central differences; fall back to one-sided at the
            // domain edge
            let mut grad2 = 0.0;
            for j in 0..2 {
                let mut ap = a;
                let mut am = a;
                ap[j] += fd_step;
                am[j] -= fd_step;
                let g = match (model.omega_of(ap), model.omega_of(am)) {
                    (Some(wp), Some(wm)) => (wp - wm) / (2.0 * fd_step),
                    (Some(wp), None) => (wp - omega) / fd_step,
                    (None, Some(wm)) => (omega - wm) / fd_step,
                    (None, None) => return Err(QuantizeError::OutOfDomain { a }),
                };
                grad2 += g * g;
            }
            let bad = grad2.sqrt() < alpha
                || dq < alpha
                || !check_diophantine(omega, alpha, d, DEFAULT_Q_MAX);
            labels.push(if bad { GoodClass::Bad } else { GoodClass::Good });
        }
    }
    Ok(GoodValueMap { origin: lo, step: grid_step, nx, ny, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn twist_system() -> ModelSystem {
        ModelSystem::new(ModelMap::Twist { gamma: 1.0 }, [0.13, -0.07], [1, 2], 0.5)
    }

    fn ff_system() -> ModelSystem {
        ModelSystem::new(
            ModelMap::FocusFocusSector { rmin: 0.05, rmax: 0.3, anchor: 0.0 },
            [0.0, 0.0],
            [0, 0],
            0.5,
        )
    }

    #[test]
    fn model_roundtrip_identity_on_grids() {
        // φ∘φ⁻¹ = id to 1e−10 on sampled grids, for every shipped model
        let models = [
            ModelSystem::new(ModelMap::Identity, [0.0, 0.0], [0, 0], 0.5),
            twist_system(),
            ff_system(),
        ];
        for model in &models {
            let (lo, hi) = match model.map {
                ModelMap::FocusFocusSector { .. } => ([0.08, -0.05], [0.2, 0.05]),
                _ => ([-0.5, -0.5], [0.5, 0.5]),
            };
            for ix in 0..8 {
                for iy in 0..8 {
                    let a = [
                        lo[0] + (hi[0] - lo[0]) * ix as f64 / 7.0,
                        lo[1] + (hi[1] - lo[1]) * iy as f64 / 7.0,
                    ];
                    let xi = model.map.inverse(a).expect("inside domain");
                    let back = model.map.forward(xi).expect("inside domain");
                    assert!(
                        (back[0] - a[0]).abs() + (back[1] - a[1]).abs() <= 1e-10,
                        "roundtrip defect at {a:?} for {:?}",
                        model.map
                    );
                }
            }
        }
    }

    #[test]
    fn model_differential_matches_finite_differences() {
        let models = [twist_system(), ff_system()];
        let pts = [[0.15, 0.02], [0.12, -0.04], [0.2, 0.05]];
        for model in &models {
            for a in pts {
                let d = model.map.d_inverse(a).unwrap();
                let s = 1e-6;
                for j in 0..2 {
                    let mut ap = a;
                    let mut am = a;
                    ap[j] += s;
                    am[j] -= s;
                    let fp = model.map.inverse(ap).unwrap();
                    let fm = model.map.inverse(am).unwrap();
                    for i in 0..2 {
                        let fd = (fp[i] - fm[i]) / (2.0 * s);
                        assert!(
                            (fd - d[i][j]).abs() <= 1e-6,
                            "d_inverse[{i}][{j}] = {} vs fd {} for {:?}",
                            d[i][j],
                            fd,
                            model.map
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn focus_focus_branch_shear_is_exact() {
        // the same value read through anchors differing by one full turn:
        // differentials differ by exactly the unit shear in the ξ₁ row
        let a = [-0.15, 0.02];
        let low = ModelMap::FocusFocusSector { rmin: 0.05, rmax: 0.3, anchor: 0.0 };
        let high = ModelMap::FocusFocusSector {
            rmin: 0.05,
            rmax: 0.3,
            anchor: 2.0 * std::f64::consts::PI,
        };
        let dl = low.d_inverse(a).unwrap();
        let dh = high.d_inverse(a).unwrap();
        assert_eq!(dh[0][0], dl[0][0]);
        assert!((dh[0][1] - dl[0][1] - 1.0).abs() <= 1e-15);
        assert_eq!(dh[1], dl[1]);
        // and the charts differ by adding ξ₂ to ξ₁
        let xl = low.inverse(a).unwrap();
        let xh = high.inverse(a).unwrap();
        assert!((xh[0] - xl[0] - a[1]).abs() <= 1e-15);
        assert_eq!(xh[1], xl[1]);
    }

    #[test]
    fn good_rectangle_regime_enforced() {
        // eps = h: far below the 10h floor
        assert!(GoodRectangle::new([0.0, 0.0], 1e-3, 1e-3, 0.5).is_err());
        // eps = 5h: still below the floor
        assert!(GoodRectangle::new([0.0, 0.0], 5e-3, 1e-3, 0.5).is_err());
        // eps above h^δ ≈ 0.0316
        assert!(GoodRectangle::new([0.0, 0.0], 5e-2, 1e-3, 0.5).is_err());
        // boundary eps = 10h is admissible
        assert!(GoodRectangle::new([0.0, 0.0], 1e-2, 1e-3, 0.5).is_ok());
    }

    #[test]
    fn good_rectangle_accepts_sqrt_regime() {
        let h = 1e-3_f64;
        let eps = h.powf(0.5);
        let r = GoodRectangle::new([0.2, 0.1], eps, h, 0.5).unwrap();
        assert!((r.center.re - 0.2).abs() < 1e-15);
        assert!((r.center.im - eps * 0.1).abs() < 1e-15);
        assert!((r.half_width[0] - h.powf(0.5) / 4.0).abs() < 1e-15);
        assert!((r.half_width[1] - eps * h.powf(0.5) / 4.0).abs() < 1e-18);
    }

    #[test]
    fn synth_identity_is_exact_grid() {
        // identity model, τ = 0, maslov = 0, no jitter: points χ(hk) on an
        // exact h × εh grid
        let model = ModelSystem::new(ModelMap::Identity, [0.0, 0.0], [0, 0], 0.5);
        let h = 1e-3_f64;
        let eps = h.powf(0.5);
        let rect = GoodRectangle::new([0.2, 0.1], eps, h, 0.5).unwrap();
        let cloud = synth_spectrum(&model, &rect, 0.0, 7).unwrap();
        assert!(!cloud.is_empty());
        for p in &cloud.points {
            let k1 = p.re / h;
            let k2 = p.im / (eps * h);
            assert!((k1 - k1.round()).abs() <= 1e-9, "Re {} not on h-grid", p.re);
            assert!((k2 - k2.round()).abs() <= 1e-9, "Im {} not on εh-grid", p.im);
            assert!(rect.contains(*p));
        }
    }

    #[test]
    fn synth_deterministic_under_seed() {
        let model = twist_system();
        let h = 1e-3_f64;
        let eps = h.powf(0.5);
        let rect = GoodRectangle::new([0.3, 0.15], eps, h, 0.5).unwrap();
        let c1 = synth_spectrum(&model, &rect, 1.0, 42).unwrap();
        let c2 = synth_spectrum(&model, &rect, 1.0, 42).unwrap();
        assert_eq!(c1, c2, "same seed must give bit-identical clouds");
        // at jitter magnitude h¹⁰ the displacement is below one ulp of the
        // coordinates; scale it up to make the seed observable
        let big = 1e18;
        let c3 = synth_spectrum(&model, &rect, big, 42).unwrap();
        let c4 = synth_spectrum(&model, &rect, big, 43).unwrap();
        assert_ne!(c3.points, c4.points, "different seed must move the jitter");
        assert_eq!(c3, synth_spectrum(&model, &rect, big, 42).unwrap());
    }

    #[test]
    fn synth_contains_near_center_point() {
        // existence of a lattice point within O(h) × O(εh) of the center
        let model = twist_system();
        let h = 1e-3_f64;
        let eps = h.powf(0.5);
        for (i, a) in [[0.31, 0.11], [0.4, -0.2], [0.27, 0.33]].into_iter().enumerate() {
            let rect = GoodRectangle::new(a, eps, h, 0.5).unwrap();
            let cloud = synth_spectrum(&model, &rect, 1.0, i as u64).unwrap();
            let df = model.map.d_forward(a).unwrap();
            let scale = df.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let c = 2.0 * (scale + 1.0);
            let ok = cloud.points.iter().any(|p| {
                (p.re - rect.center.re).abs() <= c * h
                    && (p.im - rect.center.im).abs() <= c * eps * h
            });
            assert!(ok, "no near-center point in rectangle at {a:?}");
        }
    }

    #[test]
    fn synth_cloud_is_separated() {
        // simple-eigenvalue regime: pairwise separation ≫ h·1e−6
        let model = twist_system();
        let h = 1e-3_f64;
        let eps = h.powf(0.5);
        let rect = GoodRectangle::new([0.3, 0.15], eps, h, 0.5).unwrap();
        let cloud = synth_spectrum(&model, &rect, 1.0, 5).unwrap();
        assert!(cloud.min_separation() > h * 1e-6);
    }

    #[test]
    fn synth_empty_rectangle() {
        // h large enough that the lattice pitch exceeds the window
        let model = ModelSystem::new(ModelMap::Identity, [0.0, 0.0], [0, 0], 0.5);
        let h = 0.49e-1;
        let eps = 10.0 * h;
        // center midway between lattice nodes on both axes; the window
        // half-width h/4 cannot reach either neighbor
        let rect = GoodRectangle {
            center: C64::new(0.5 * h, eps * 0.5 * h),
            half_width: [h / 4.0, eps * h / 4.0],
            eps,
            h,
            delta: 0.5,
        };
        assert_eq!(
            synth_spectrum(&model, &rect, 0.0, 1),
            Err(QuantizeError::EmptyRectangle)
        );
    }

    #[test]
    fn analytic_chart_maps_points_to_lattice() {
        // f̃₀ linearized at the center sends synthesized points to h·(Z+¼ς)+τ
        // up to curvature; on the *identity* model the map is exact
        let model = ModelSystem::new(ModelMap::Identity, [0.21, 0.05], [3, 1], 0.5);
        let h = 1e-3_f64;
        let eps = h.powf(0.5);
        let rect = GoodRectangle::new([0.15, 0.07], eps, h, 0.5).unwrap();
        let cloud = synth_spectrum(&model, &rect, 0.0, 3).unwrap();
        let chart = micro_chart_forward(&model, &rect).unwrap();
        for p in &cloud.points {
            let u = [p.re, p.im / eps];
            for j in 0..2 {
                let f = chart.f0_offset[j]
                    + chart.f0_diff[j][0] * u[0]
                    + chart.f0_diff[j][1] * u[1];
                // f̃₀(u) = h(k − ς/4): integer after shifting by ς/4
                let kf = f / h + model.maslov[j] as f64 / 4.0;
                assert!((kf - kf.round()).abs() <= 1e-9, "component {j} off-lattice: {kf}");
            }
        }
    }

    #[test]
    fn chart_determinant_scales_with_eps() {
        // |det d(χ∘φ)| = |det dφ|·ε: check the full λ-map Jacobian by
        // central finite differences at the rectangle center
        let model = twist_system();
        let h = 1e-4_f64;
        let eps = h.powf(0.5);
        let a = [0.3, 0.12];
        let rect = GoodRectangle::new(a, eps, h, 0.5).unwrap();
        let xi0 = model.map.inverse(a).unwrap();
        let s = 1e-6;
        let mut jac = [[0.0f64; 2]; 2];
        for j in 0..2 {
            let mut xp = xi0;
            let mut xm = xi0;
            xp[j] += s;
            xm[j] -= s;
            let up = model.map.forward(xp).unwrap();
            let um = model.map.forward(xm).unwrap();
            // λ = (u₁, ε·u₂)
            jac[0][j] = (up[0] - um[0]) / (2.0 * s);
            jac[1][j] = eps * (up[1] - um[1]) / (2.0 * s);
        }
        let det_fd = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let df = model.map.d_forward(a).unwrap();
        let det_phi = df[0][0] * df[1][1] - df[0][1] * df[1][0];
        assert!(
            (det_fd - eps * det_phi).abs() <= 1e-6 * eps,
            "λ-map determinant {det_fd} vs ε·det dφ = {}",
            eps * det_phi
        );
        // the analytic chart differential inverts dφ
        let chart = micro_chart_forward(&model, &rect).unwrap();
        let det_chart = chart.f0_diff[0][0] * chart.f0_diff[1][1]
            - chart.f0_diff[0][1] * chart.f0_diff[1][0];
        assert!((det_chart * det_phi - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn good_values_rational_and_degenerate_frequencies_are_bad() {
        // twist model: ω = 1/(1+γa₂) = 1/2 at a₂ = 1 (γ = 1) → BAD stripe
        let model = twist_system();
        let gm = good_values(&model, [0.0, 0.9999], [0.2, 1.0001], 0.05, 1.0, 1e-4).unwrap();
        let mut saw_rational_row = false;
        for iy in 0..gm.ny {
            let a2 = gm.point(0, iy)[1];
            if (1.0 / (1.0 + a2) - 0.5).abs() < 1e-9 {
                saw_rational_row = true;
                for ix in 0..gm.nx {
                    assert_eq!(gm.at(ix, iy), GoodClass::Bad, "ω = 1/2 must be BAD");
                }
            }
        }
        assert!(saw_rational_row, "grid must hit the rational row");
        // identity model: ω ≡ 0, twist condition degenerate → everything BAD
        let idm = ModelSystem::new(ModelMap::Identity, [0.0, 0.0], [0, 0], 0.5);
        let gm = good_values(&idm, [0.0, 0.0], [0.1, 0.1], 0.05, 1.0, 0.05).unwrap();
        assert!(gm.labels.iter().all(|c| *c == GoodClass::Bad));
        assert_eq!(gm.fraction_bad(), 1.0);
    }

    #[test]
    fn good_values_bad_fraction_shrinks_linearly() {
        // fraction of BAD values is O(α) for the twist model: fit the
        // constant at the largest α and check the smaller ones stay within.
        // The measure bound Σ_q 2α/q^d needs d > 1 (at d = 1 the good set
        // has measure zero), so run the check at exponent 2. A decimal grid
        // step would make every ω = 1/(1 + a₂) an exact small-denominator
        // rational — correctly all BAD — so the step is kept incommensurable
        // with the decimal lattice to sample generic frequencies.
        let model = twist_system();
        let step = 1e-3 * std::f64::consts::SQRT_2;
        let alphas = [0.08, 0.04, 0.02];
        let mut fracs = Vec::new();
        for alpha in alphas {
            let gm = good_values(&model, [0.1, -0.45], [0.2, 0.45], alpha, 2.0, step).unwrap();
            fracs.push(gm.fraction_bad());
        }
        let c_fit = fracs[0] / alphas[0];
        assert!(c_fit > 0.0, "some BAD values must exist");
        for (alpha, frac) in alphas.iter().zip(&fracs) {
            assert!(
                *frac <= 2.0 * c_fit * alpha,
                "BAD fraction {frac} at α = {alpha} violates O(α) with fitted C = {c_fit}"
            );
        }
        // and the fraction must actually decrease
        assert!(fracs[2] < fracs[0]);
    }

    #[test]
    fn point_keys_decorrelate_neighbors() {
        let a = point_key(1, [0, 0]);
        let b = point_key(1, [0, 1]);
        let c = point_key(1, [1, 0]);
        let d = point_key(2, [0, 0]);
        assert!(a != b && a != c && a != d && b != c);
    }
}
