//! Lattice detection and monodromy extraction from spectral point clouds.
//!
//! The forward theory says eigenvalues in a good rectangle form a deformed
//! affine image of hZ². This module solves the inverse problem: fit the
//! affine micro-chart from the points alone (`fit_micro_chart`), compare
//! charts on overlapping balls to extract integer unimodular transition
//! matrices (`transition_matrix`), assemble them into a Čech 1-cocycle with
//! verified triple-overlap consistency (`build_cocycle`), and multiply along
//! closed loops to obtain the holonomy class in GL(2,Z) up to conjugation
//! (`holonomy`).

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::quantize::{GoodRectangle, SpectrumCloud};

mod zmat;
pub use zmat::{CONJUGACY_SEARCH_BOUND, ConjugacyResult, IMat2, conjugacy_equal};

/// Chart acceptance threshold: RMS distance to the lattice in units of h.
pub const CHART_RESIDUAL_TOL: f64 = 0.05;

/// Entrywise rounding acceptance threshold for transitions.
pub const TRANSITION_ROUND_TOL: f64 = 0.1;

/// Minimum basis angle in degrees.
pub const MIN_BASIS_ANGLE_DEG: f64 = 5.0;

/// Maximum alternation rounds in the fit.
pub const MAX_FIT_ROUNDS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum LatticeError {
    /// Fewer than 6 points in the rectangle.
    InsufficientData { found: usize },
    /// Residual above threshold after the final round.
    NoLatticeStructure { residual: f64 },
    /// Fitted basis vectors closer than 5 degrees.
    DegenerateBasis { angle_deg: f64 },
    /// Transition ratio does not round to an integer matrix within 0.1.
    NotLocallyConstant { max_residual: f64 },
    /// Rounded transition has determinant outside ±1.
    NotUnimodular { det: i64 },
    /// Cocycle identity fails on a triple overlap.
    CocycleInconsistent { triple: [usize; 3] },
    /// A loop step has no stored transition.
    IncompleteCover { pair: [usize; 2] },
}

impl fmt::Display for LatticeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeError::InsufficientData { found } => {
                write!(f, "need at least 6 points in the rectangle, found {found}")
            }
            LatticeError::NoLatticeStructure { residual } => {
                write!(f, "no lattice structure: residual {residual:.4} exceeds {CHART_RESIDUAL_TOL}")
            }
            LatticeError::DegenerateBasis { angle_deg } => {
                write!(f, "degenerate lattice basis: angle {angle_deg:.2}° below {MIN_BASIS_ANGLE_DEG}°")
            }
            LatticeError::NotLocallyConstant { max_residual } => write!(
                f,
                "transition not locally constant: rounding residual {max_residual:.4} exceeds {TRANSITION_ROUND_TOL}"
            ),
            LatticeError::NotUnimodular { det } => {
                write!(f, "transition determinant {det} outside ±1")
            }
            LatticeError::CocycleInconsistent { triple } => write!(
                f,
                "cocycle identity fails on balls ({}, {}, {})",
                triple[0], triple[1], triple[2]
            ),
            LatticeError::IncompleteCover { pair } => {
                write!(f, "no transition stored for balls ({}, {})", pair[0], pair[1])
            }
        }
    }
}

impl std::error::Error for LatticeError {}

/// An accepted micro-chart: the affine map u ↦ f0_diff·u + f0_offset sending
/// the rectangle's points (in unscaled coordinates u = (Re λ, Im λ/ε)) into
/// hZ² up to the fit residual.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroChart {
    pub rect: GoodRectangle,
    pub f0_diff: [[f64; 2]; 2],
    pub f0_offset: [f64; 2],
    /// RMS distance of mapped points to hZ², in units of h.
    pub fit_residual: f64,
}

impl MicroChart {
    pub fn det(&self) -> f64 {
        self.f0_diff[0][0] * self.f0_diff[1][1] - self.f0_diff[0][1] * self.f0_diff[1][0]
    }
}

fn mat_inv(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn apply(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Angle between basis columns in degrees, folded to [0°, 90°].
fn basis_angle_deg(v1: [f64; 2], v2: [f64; 2]) -> f64 {
    let cross = (v1[0] * v2[1] - v1[1] * v2[0]).abs();
    let n1 = (v1[0] * v1[0] + v1[1] * v1[1]).sqrt();
    let n2 = (v2[0] * v2[0] + v2[1] * v2[1]).sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return 0.0;
    }
    (cross / (n1 * n2)).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Pick a basis out of a pool of difference vectors: v1 is the shortest,
/// v2 the shortest whose component perpendicular to v1 exceeds |v1|/2.
/// For a true lattice the second minimum clears (√3/2)·|v1| perpendicular
/// (Minkowski), while differences that are merely bent multiples of v1 fall
/// far short, so the threshold separates the two cleanly. v2 is then
/// Lagrange-reduced against v1 to keep the pair well conditioned.
fn basis_from_diffs(mut diffs: Vec<[f64; 2]>) -> Option<([f64; 2], [f64; 2])> {
    diffs.retain(|d| d[0] * d[0] + d[1] * d[1] > 0.0);
    diffs.sort_by(|a, b| {
        (a[0] * a[0] + a[1] * a[1]).partial_cmp(&(b[0] * b[0] + b[1] * b[1])).unwrap()
    });
    let v1 = canonical_sign(*diffs.first()?);
    let n1 = (v1[0] * v1[0] + v1[1] * v1[1]).sqrt();
    let mut v2 = *diffs
        .iter()
        .find(|d| (d[0] * v1[1] - d[1] * v1[0]).abs() / n1 >= 0.5 * n1)?;
    let t = ((v2[0] * v1[0] + v2[1] * v1[1]) / (n1 * n1)).round_ties_even();
    v2 = canonical_sign([v2[0] - t * v1[0], v2[1] - t * v1[1]]);
    // order: the more horizontal vector first
    let horiz = |v: [f64; 2]| v[1].abs() / (v[0].abs() + v[1].abs() + 1e-300);
    if horiz(v1) <= horiz(v2) { Some((v1, v2)) } else { Some((v2, v1)) }
}

/// Fix the sign by the dominant component so that jitter on a near-axis
/// vector cannot flip the choice.
fn canonical_sign(v: [f64; 2]) -> [f64; 2] {
    let lead = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
    if lead < 0.0 { [-v[0], -v[1]] } else { v }
}

/// Shortest-vector initial basis from point differences. Each point's
/// nearest neighbors supply the first candidate pool; when the lattice is
/// anisotropic enough that every near difference is parallel (locally the
/// cloud looks one-dimensional), all pairwise differences of an evenly
/// strided subsample are pooled instead.
fn initial_basis(us: &[[f64; 2]]) -> Option<([f64; 2], [f64; 2])> {
    let k = 12.min(us.len() - 1);
    let mut diffs: Vec<[f64; 2]> = Vec::new();
    for (i, p) in us.iter().enumerate() {
        let mut near: Vec<(f64, [f64; 2])> = us
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| {
                let d = [q[0] - p[0], q[1] - p[1]];
                (d[0] * d[0] + d[1] * d[1], d)
            })
            .collect();
        let (head, kth, _) =
            near.select_nth_unstable_by(k - 1, |a, b| a.0.partial_cmp(&b.0).unwrap());
        diffs.extend(head.iter().chain(std::iter::once(&*kth)).map(|(_, d)| *d));
    }
    basis_from_diffs(diffs).or_else(|| {
        let stride = us.len().div_ceil(64);
        let sub: Vec<[f64; 2]> = us.iter().step_by(stride).copied().collect();
        let mut all = Vec::with_capacity(sub.len() * (sub.len() - 1) / 2);
        for i in 0..sub.len() {
            for j in i + 1..sub.len() {
                all.push([sub[j][0] - sub[i][0], sub[j][1] - sub[i][1]]);
            }
        }
        basis_from_diffs(all)
    })
}

/// Fit the affine micro-chart of one rectangle from its points.
///
/// Points inside `rect` are unscaled to u = (Re λ, Im λ/ε); an affine map
/// g(u) = A·u + b is sought with g(uᵢ) ∈ hZ². The basis is initialized from
/// `init` (a differential-like matrix, e.g. a neighboring chart's or the
/// analytic one) or from the two shortest independent nearest-neighbor
/// difference vectors, then alternates nearest-node assignment
/// (round-half-even) with affine least squares until assignments stabilize.
pub fn fit_micro_chart(
    cloud: &SpectrumCloud,
    rect: &GoodRectangle,
    init: Option<[[f64; 2]; 2]>,
) -> Result<MicroChart, LatticeError> {
    let h = rect.h;
    let us: Vec<[f64; 2]> = cloud
        .points_in(rect)
        .iter()
        .map(|p| [p.re, p.im / rect.eps])
        .collect();
    if us.len() < 6 {
        return Err(LatticeError::InsufficientData { found: us.len() });
    }
    let mut a = match init {
        Some(m) => m,
        None => {
            let (v1, v2) =
                initial_basis(&us).ok_or(LatticeError::DegenerateBasis { angle_deg: 0.0 })?;
            let angle = basis_angle_deg(v1, v2);
            if angle < MIN_BASIS_ANGLE_DEG {
                return Err(LatticeError::DegenerateBasis { angle_deg: angle });
            }
            // lattice basis vectors are the columns of h·A⁻¹
            let m = [[v1[0], v2[0]], [v1[1], v2[1]]];
            let inv = mat_inv(m).ok_or(LatticeError::DegenerateBasis { angle_deg: angle })?;
            [
                [h * inv[0][0], h * inv[0][1]],
                [h * inv[1][0], h * inv[1][1]],
            ]
        }
    };
    // anchor the offset so the first point sits on a node
    let g0 = apply(a, us[0]);
    let mut b = [
        h * (g0[0] / h).round_ties_even() - g0[0],
        h * (g0[1] / h).round_ties_even() - g0[1],
    ];
    let mut assign: Vec<[f64; 2]> = Vec::new();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_FIT_ROUNDS {
        // assignment
        let new_assign: Vec<[f64; 2]> = us
            .iter()
            .map(|u| {
                let g = apply(a, *u);
                [
                    ((g[0] + b[0]) / h).round_ties_even(),
                    ((g[1] + b[1]) / h).round_ties_even(),
                ]
            })
            .collect();
        let stable = new_assign == assign;
        assign = new_assign;
        // affine least squares per output row: minimize Σ (row·[u,1] − h·m)²
        let mut gram = Matrix3::zeros();
        let mut rhs = [Vector3::zeros(), Vector3::zeros()];
        for (u, m) in us.iter().zip(&assign) {
            let row = Vector3::new(u[0], u[1], 1.0);
            gram += row * row.transpose();
            rhs[0] += row * (h * m[0]);
            rhs[1] += row * (h * m[1]);
        }
        let lu = gram.lu();
        let (Some(x0), Some(x1)) = (lu.solve(&rhs[0]), lu.solve(&rhs[1])) else {
            return Err(LatticeError::DegenerateBasis { angle_deg: 0.0 });
        };
        a = [[x0[0], x0[1]], [x1[0], x1[1]]];
        b = [x0[2], x1[2]];
        let mut sq = 0.0;
        for (u, m) in us.iter().zip(&assign) {
            let g = apply(a, *u);
            let d = [g[0] + b[0] - h * m[0], g[1] + b[1] - h * m[1]];
            sq += d[0] * d[0] + d[1] * d[1];
        }
        residual = (sq / us.len() as f64).sqrt() / h;
        if stable {
            break;
        }
    }
    if !residual.is_finite() || residual > CHART_RESIDUAL_TOL {
        return Err(LatticeError::NoLatticeStructure { residual });
    }
    // the fitted lattice basis in u-space is h·A⁻¹; reject near-parallel
    let inv = mat_inv(a).ok_or(LatticeError::DegenerateBasis { angle_deg: 0.0 })?;
    let angle = basis_angle_deg([inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]);
    if angle < MIN_BASIS_ANGLE_DEG {
        return Err(LatticeError::DegenerateBasis { angle_deg: angle });
    }
    Ok(MicroChart { rect: rect.clone(), f0_diff: a, f0_offset: b, fit_residual: residual })
}

/// Transition matrix M_{AB} with f_A ≈ M_{AB}·f_B on the overlap:
/// Q = f0_diff_A · f0_diff_B⁻¹ rounded entrywise, accepted when the rounding
/// residual stays below 0.1 and the result is unimodular.
pub fn transition_matrix(
    chart_a: &MicroChart,
    chart_b: &MicroChart,
) -> Result<IMat2, LatticeError> {
    let inv_b = mat_inv(chart_b.f0_diff)
        .ok_or(LatticeError::NotLocallyConstant { max_residual: f64::INFINITY })?;
    let q = mat_mul(chart_a.f0_diff, inv_b);
    let mut m = [[0i64; 2]; 2];
    let mut max_residual = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let r = q[i][j].round_ties_even();
            max_residual = max_residual.max((q[i][j] - r).abs());
            m[i][j] = r as i64;
        }
    }
    if max_residual >= TRANSITION_ROUND_TOL {
        return Err(LatticeError::NotLocallyConstant { max_residual });
    }
    let m = IMat2(m);
    if !m.is_unimodular() {
        return Err(LatticeError::NotUnimodular { det: m.det() });
    }
    Ok(m)
}

/// How far f0_diff_A · f0_diff_B⁻¹ sits from the nearest integer matrix —
/// the quality of one transition witness (infinite when B is singular).
pub fn transition_residual(chart_a: &MicroChart, chart_b: &MicroChart) -> f64 {
    let Some(inv_b) = mat_inv(chart_b.f0_diff) else {
        return f64::INFINITY;
    };
    let q = mat_mul(chart_a.f0_diff, inv_b);
    let mut max_residual = 0.0f64;
    for row in &q {
        for &x in row {
            max_residual = max_residual.max((x - x.round_ties_even()).abs());
        }
    }
    max_residual
}

/// A Čech 1-cocycle over a ball cover: one integer matrix per ordered
/// overlapping pair, with M_{βα} = M_{αβ}⁻¹ and verified triple identities.
#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle {
    pub n_balls: usize,
    pub transitions: BTreeMap<(usize, usize), IMat2>,
}

impl Cocycle {
    pub fn get(&self, to: usize, from: usize) -> Option<IMat2> {
        if to == from {
            return Some(IMat2::IDENTITY);
        }
        self.transitions.get(&(to, from)).copied()
    }
}

/// Assemble the cocycle from per-overlap chart pairs: for each unordered
/// overlap {α, β} (keyed as (α, β) with α < β), each supplied (chart-in-α,
/// chart-in-β) pair must yield the same integer matrix — the locally
/// constant transition — which is stored both ways. All triple identities
/// M_{αβ}·M_{βγ} = M_{αγ} over stored pairs are then verified exactly.
pub fn build_cocycle(
    n_balls: usize,
    overlap_charts: &BTreeMap<(usize, usize), Vec<(MicroChart, MicroChart)>>,
) -> Result<Cocycle, LatticeError> {
    let mut transitions: BTreeMap<(usize, usize), IMat2> = BTreeMap::new();
    for (&(alpha, beta), pairs) in overlap_charts {
        assert!(alpha < beta && beta < n_balls, "overlap keys must be (α, β) with α < β");
        let mut m_ab: Option<IMat2> = None;
        for (ca, cb) in pairs {
            let m = transition_matrix(ca, cb)?;
            match m_ab {
                None => m_ab = Some(m),
                Some(prev) if prev == m => {}
                Some(_) => {
                    // the transition must be a single constant matrix per
                    // overlap; disagreement means the charts are inconsistent
                    return Err(LatticeError::NotLocallyConstant { max_residual: 1.0 });
                }
            }
        }
        if let Some(m) = m_ab {
            transitions.insert((alpha, beta), m);
            transitions.insert((beta, alpha), m.inverse_unimodular());
        }
    }
    let cocycle = Cocycle { n_balls, transitions };
    // triple identities over all stored pairs
    for a in 0..n_balls {
        for b in 0..n_balls {
            for c in 0..n_balls {
                if a == b || b == c || a == c {
                    continue;
                }
                if let (Some(mab), Some(mbc), Some(mac)) =
                    (cocycle.get(a, b), cocycle.get(b, c), cocycle.get(a, c))
                {
                    if mab.mul(&mbc) != mac {
                        return Err(LatticeError::CocycleInconsistent { triple: [a, b, c] });
                    }
                }
            }
        }
    }
    Ok(cocycle)
}

/// Holonomy class of a closed loop of balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HolonomyClass {
    pub representative: IMat2,
    pub trace: i64,
    pub det: i64,
}

impl HolonomyClass {
    pub fn of(m: IMat2) -> Self {
        HolonomyClass { representative: m, trace: m.trace(), det: m.det() }
    }

    /// Conjugacy comparison of two classes.
    pub fn same_class(&self, other: &HolonomyClass) -> ConjugacyResult {
        conjugacy_equal(&self.representative, &other.representative)
    }
}

/// Ordered transition product around a closed loop b₁ → b₂ → ⋯ → b_N → b₁:
/// M_{b₁,b_N} ∘ M_{b_N,b_{N−1}} ∘ ⋯ ∘ M_{b₂,b₁}.
pub fn holonomy(cocycle: &Cocycle, loop_balls: &[usize]) -> Result<HolonomyClass, LatticeError> {
    let n = loop_balls.len();
    let mut acc = IMat2::IDENTITY;
    for i in 0..n {
        let from = loop_balls[i];
        let to = loop_balls[(i + 1) % n];
        let m = cocycle.get(to, from).ok_or(LatticeError::IncompleteCover { pair: [to, from] })?;
        acc = m.mul(&acc);
    }
    Ok(HolonomyClass::of(acc))
}
