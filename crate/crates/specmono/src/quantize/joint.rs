//! Joint spectrum of a commuting Hermitian pair.
//!
//! For commuting self-adjoint matrices A₁, A₂ the operator A = A₁ + iA₂ is
//! normal and its spectrum in a window I₁ + iI₂ coincides with the joint
//! spectrum of the pair. This module computes the pairs by simultaneous
//! diagonalization: diagonalize A₁, cluster its numerically coincident
//! eigenvalues, then diagonalize A₂ restricted to each cluster's invariant
//! subspace. Every joint vector is validated against both matrices, so a
//! silently wrong clustering surfaces as `IllConditioned` instead of bad
//! output.

use nalgebra::{Complex, DMatrix, DVector};

use super::QuantizeError;

type CMat = DMatrix<Complex<f64>>;
type CVec = DVector<Complex<f64>>;

/// Rectangular window I₁ × I₂ in the joint-value plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointWindow {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl JointWindow {
    /// The whole plane.
    pub const ALL: JointWindow = JointWindow {
        re: [f64::NEG_INFINITY, f64::INFINITY],
        im: [f64::NEG_INFINITY, f64::INFINITY],
    };

    pub fn contains(&self, v: [f64; 2]) -> bool {
        self.re[0] <= v[0] && v[0] <= self.re[1] && self.im[0] <= v[1] && v[1] <= self.im[1]
    }
}

/// One joint eigenvalue with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPoint {
    pub value: [f64; 2],
    pub multiplicity: usize,
}

fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Joint spectrum of the commuting Hermitian pair (a1, a2) inside `window`,
/// as (value, multiplicity) pairs sorted lexicographically. Multiplicities
/// sum to the number of joint eigenvalues captured by the window.
pub fn joint_spectrum_normal(
    a1: &CMat,
    a2: &CMat,
    window: &JointWindow,
) -> Result<Vec<JointPoint>, QuantizeError> {
    assert_eq!(a1.nrows(), a1.ncols(), "a1 must be square");
    assert_eq!(a2.nrows(), a2.ncols(), "a2 must be square");
    assert_eq!(a1.nrows(), a2.nrows(), "a1 and a2 must have equal dimension");
    let n = a1.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale1 = a1.norm().max(1.0);
    let scale2 = a2.norm().max(1.0);
    if hermitian_defect(a1) > 1e-10 * scale1 {
        return Err(QuantizeError::NotHermitian { which: 1 });
    }
    if hermitian_defect(a2) > 1e-10 * scale2 {
        return Err(QuantizeError::NotHermitian { which: 2 });
    }
    let comm = (a1 * a2 - a2 * a1).norm();
    let rel_comm = comm / (scale1 * scale2);
    if comm > 1e-10 * a1.norm() * a2.norm() {
        return Err(QuantizeError::NotCommuting { rel_comm });
    }

    let eig1 = a1.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig1.eigenvalues[i].partial_cmp(&eig1.eigenvalues[j]).unwrap());

    // Cluster sorted eigenvalues of A₁; merging too much is harmless because
    // the per-vector values below come from Rayleigh quotients, while
    // splitting a true numerical cluster would corrupt the A₂ restriction.
    let cluster_tol = 1e-7 * scale1;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &idx in &order {
        match clusters.last_mut() {
            Some(cur)
                if eig1.eigenvalues[idx] - eig1.eigenvalues[*cur.last().unwrap()]
                    <= cluster_tol =>
            {
                cur.push(idx);
            }
            _ => clusters.push(vec![idx]),
        }
    }

    let residual_tol = 1e-6 * (scale1 + scale2);
    let mut values: Vec<[f64; 2]> = Vec::with_capacity(n);
    for cluster in clusters {
        let m = cluster.len();
        let mut q = CMat::zeros(n, m);
        for (col, &idx) in cluster.iter().enumerate() {
            q.set_column(col, &eig1.eigenvectors.column(idx));
        }
        // A₂ restricted to the cluster's invariant subspace, Hermitized to
        // absorb roundoff
        let b = q.adjoint() * a2 * &q;
        let b = (&b + b.adjoint()).scale(0.5);
        let eig2 = b.symmetric_eigen();
        for col in 0..m {
            let w = eig2.eigenvectors.column(col);
            let v: CVec = &q * w;
            let mu = (v.adjoint() * a1 * &v)[(0, 0)].re;
            let nu = eig2.eigenvalues[col];
            let r1 = (a1 * &v - v.scale(mu)).norm();
            let r2 = (a2 * &v - v.scale(nu)).norm();
            if r1 + r2 > residual_tol {
                return Err(QuantizeError::IllConditioned(format!(
                    "joint vector residual {:.3e} exceeds {:.3e}",
                    r1 + r2,
                    residual_tol
                )));
            }
            values.push([mu, nu]);
        }
    }

    values.retain(|v| window.contains(*v));
    values.sort_by(|p, q| (p[0], p[1]).partial_cmp(&(q[0], q[1])).unwrap());

    // collapse numerically identical pairs into multiplicities
    let group_tol = 1e-10 * (scale1 + scale2);
    let mut out: Vec<JointPoint> = Vec::new();
    for v in values {
        match out.last_mut() {
            Some(p)
                if (v[0] - p.value[0]).abs() <= group_tol
                    && (v[1] - p.value[1]).abs() <= group_tol =>
            {
                p.multiplicity += 1;
            }
            _ => out.push(JointPoint { value: v, multiplicity: 1 }),
        }
    }
    Ok(out)
}
