//! Moyal star product, Moyal bracket, Poisson bracket, and the truncated
//! exponential of the adjoint action.
//!
//! The star product of two symbols is the double sum over derivative
//! multi-indices α, β ∈ N²
//!
//! ```text
//!   a ⋆ b = Σ_{α,β}  h^{|α|+|β|} (−1)^{|α|} / ((2i)^{|α|+|β|} α! β!)
//!               · (∂_x^α ∂_ξ^β a) (∂_ξ^α ∂_x^β b)
//! ```
//!
//! truncated at weight N_max. Each derivative order trades one ξ-power for
//! one h-power, so every (α, β) ≠ (0, 0) contribution has weight at least
//! one above the plain product — which is why the Moyal bracket of
//! homogeneous terms of weights j and l lands in 𝒪(j+l+1), and why the
//! adjoint exponential below terminates.

use super::{C64, FormalSeries, Multidegree, SymbolError};

/// Falling factorial m(m−1)…(m−n+1); the coefficient of ∂^n ξ^m.
fn falling(m: u32, n: u32) -> f64 {
    let mut out = 1.0;
    for i in 0..n {
        out *= (m - i) as f64;
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// (i·k)^n for an integer mode component k.
fn ik_pow(k: i32, n: u32) -> C64 {
    C64::new(0.0, k as f64).powu(n)
}

/// Star product truncated to weight ≤ N_max.
///
/// Mode addition beyond K_max is an error (`CutoffExceeded`) whenever the
/// offending pair of terms still fits under the weight cut; pairs already
/// beyond the weight cut are truncated silently.
pub fn moyal_star(a: &FormalSeries, b: &FormalSeries) -> Result<FormalSeries, SymbolError> {
    if a.n_max() != b.n_max() || a.k_max() != b.k_max() {
        return Err(SymbolError::CutMismatch);
    }
    let n_max = a.n_max();
    let k_max = a.k_max();
    let mut out = FormalSeries::zero(n_max, k_max);
    for (da, ka, ca) in a.iter_terms() {
        for (db, kb, cb) in b.iter_terms() {
            let base_weight = da.weight() + db.weight();
            if base_weight > n_max {
                continue;
            }
            let kc = [ka[0] + kb[0], ka[1] + kb[1]];
            if kc[0].abs() > k_max || kc[1].abs() > k_max {
                return Err(SymbolError::CutoffExceeded { k: kc });
            }
            let budget = n_max - base_weight;
            // α_j: x-derivatives on a (vanish unless ka_j ≠ 0) and
            // ξ-derivatives on b (vanish beyond the stored power).
            // β_j: ξ-derivatives on a and x-derivatives on b, symmetrically.
            let amax = |j: usize| if ka[j] == 0 { 0 } else { db.xi[j].min(budget) };
            let bmax = |j: usize| if kb[j] == 0 { 0 } else { da.xi[j].min(budget) };
            for a1 in 0..=amax(0) {
                for a2 in 0..=amax(1) {
                    for b1 in 0..=bmax(0) {
                        for b2 in 0..=bmax(1) {
                            let order = a1 + a2 + b1 + b2;
                            if order > budget {
                                continue;
                            }
                            let two_i = C64::new(0.0, 2.0).powu(order);
                            let sign = if (a1 + a2) % 2 == 0 { 1.0 } else { -1.0 };
                            let coeff = ca
                                * cb
                                * ik_pow(ka[0], a1)
                                * ik_pow(ka[1], a2)
                                * ik_pow(kb[0], b1)
                                * ik_pow(kb[1], b2)
                                * C64::new(
                                    sign * falling(da.xi[0], b1)
                                        * falling(da.xi[1], b2)
                                        * falling(db.xi[0], a1)
                                        * falling(db.xi[1], a2)
                                        / (factorial(a1)
                                            * factorial(a2)
                                            * factorial(b1)
                                            * factorial(b2)),
                                    0.0,
                                )
                                / two_i;
                            let d = Multidegree {
                                xi: [
                                    da.xi[0] - b1 + db.xi[0] - a1,
                                    da.xi[1] - b2 + db.xi[1] - a2,
                                ],
                                eps: da.eps + db.eps,
                                h: da.h + db.h + order,
                            };
                            out.add_term(d, kc, coeff)?;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Moyal bracket [a, b] = a⋆b − b⋆a. At leading order
/// i[a, b] = h{a, b} + (weight ≥ j+l+2 terms).
pub fn moyal_bracket(a: &FormalSeries, b: &FormalSeries) -> Result<FormalSeries, SymbolError> {
    moyal_star(a, b)?.sub(&moyal_star(b, a)?)
}

/// Poisson bracket {f, g} = Σ_j ∂_{ξ_j}f ∂_{x_j}g − ∂_{x_j}f ∂_{ξ_j}g.
pub fn poisson_bracket(f: &FormalSeries, g: &FormalSeries) -> Result<FormalSeries, SymbolError> {
    let mut out = FormalSeries::zero(f.n_max(), f.k_max());
    for j in 0..2 {
        out = out.add(&f.d_xi(j).pointwise_mul(&g.d_x(j))?)?;
        out = out.sub(&f.d_x(j).pointwise_mul(&g.d_xi(j))?)?;
    }
    Ok(out)
}

/// exp(i·ad_G) P = Σ_k (1/k!) (i ad_G)^k P, truncated at N_max.
///
/// Every application of i·ad_G raises the minimum weight of the iterate by
/// at least one (see the module docs), so only finitely many k contribute;
/// the weight is monitored and a failure to increase is reported as
/// `DivergentExponential` rather than looping.
pub fn exp_ad(g: &FormalSeries, p: &FormalSeries) -> Result<FormalSeries, SymbolError> {
    let mut acc = p.clone();
    let mut term = p.clone();
    let mut prev_min = term.min_weight();
    for k in 1..=(p.n_max() as u64 + 2) {
        term = moyal_bracket(g, &term)?.scale(C64::new(0.0, 1.0 / k as f64));
        if term.is_zero() {
            return Ok(acc);
        }
        let cur_min = term.min_weight();
        if let (Some(prev), Some(cur)) = (prev_min, cur_min) {
            if cur <= prev {
                return Err(SymbolError::DivergentExponential);
            }
        }
        prev_min = cur_min;
        acc = acc.add(&term)?;
    }
    // The loop bound is one past the deepest possible weight ladder, so
    // reaching it means the grading assumption failed.
    Err(SymbolError::DivergentExponential)
}

#[cfg(test)]
mod tests {
    use super::super::{DEFAULT_K_MAX, DEFAULT_N_MAX};
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn xi(j: usize) -> FormalSeries {
        FormalSeries::xi(j, DEFAULT_N_MAX, DEFAULT_K_MAX)
    }

    fn mode(k: [i32; 2]) -> FormalSeries {
        FormalSeries::monomial(Multidegree::ZERO, k, c(1.0, 0.0), DEFAULT_N_MAX, DEFAULT_K_MAX)
            .unwrap()
    }

    /// Random small series with modes in a box and bounded degrees, for the
    /// property checks below.
    fn random_series(rng: &mut ChaCha8Rng, terms: usize, kbox: i32) -> FormalSeries {
        let mut s = FormalSeries::zero(DEFAULT_N_MAX, DEFAULT_K_MAX);
        for _ in 0..terms {
            let d = Multidegree::new(
                rng.gen_range(0..3),
                rng.gen_range(0..3),
                rng.gen_range(0..2),
                rng.gen_range(0..2),
            );
            let k = [rng.gen_range(-kbox..=kbox), rng.gen_range(-kbox..=kbox)];
            let coeff = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            s.add_term(d, k, coeff).unwrap();
        }
        s
    }

    fn assert_close(a: &FormalSeries, b: &FormalSeries, tol: f64, what: &str) {
        let diff = a.sub(b).unwrap();
        assert!(
            diff.max_abs() <= tol,
            "{what}: max coefficient difference {} > {tol}",
            diff.max_abs()
        );
    }

    #[test]
    fn star_of_x_independent_symbols_is_product() {
        let p = moyal_star(&xi(0), &xi(1)).unwrap();
        let mut expect = FormalSeries::zero(DEFAULT_N_MAX, DEFAULT_K_MAX);
        expect.add_term(Multidegree::new(1, 1, 0, 0), [0, 0], c(1.0, 0.0)).unwrap();
        assert_eq!(p, expect);
    }

    #[test]
    fn star_unit() {
        let one = FormalSeries::constant(c(1.0, 0.0), DEFAULT_N_MAX, DEFAULT_K_MAX);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_series(&mut rng, 12, 3);
        assert_eq!(moyal_star(&one, &s).unwrap(), s);
        assert_eq!(moyal_star(&s, &one).unwrap(), s);
    }

    #[test]
    fn star_xi1_with_single_mode() {
        // ξ₁ ⋆ e^{i x₁} = ξ₁ e^{i x₁} + (h/2) e^{i x₁}; the series stops
        // because ξ₁ is linear.
        let p = moyal_star(&xi(0), &mode([1, 0])).unwrap();
        assert_eq!(p.num_terms(), 2);
        assert_eq!(p.coeff(Multidegree::new(1, 0, 0, 0), [1, 0]), c(1.0, 0.0));
        assert_eq!(p.coeff(Multidegree::new(0, 0, 0, 1), [1, 0]), c(0.5, 0.0));
    }

    #[test]
    fn bracket_of_x_independent_vanishes() {
        let a = xi(0);
        let b = moyal_star(&xi(1), &xi(1)).unwrap();
        assert!(moyal_bracket(&a, &b).unwrap().is_zero());
    }

    #[test]
    fn bracket_xi1_single_mode() {
        // [ξ₁, e^{i x₁}] = h e^{i x₁}, consistent with i[a,b] = h{a,b}.
        let br = moyal_bracket(&xi(0), &mode([1, 0])).unwrap();
        let mut expect = FormalSeries::zero(DEFAULT_N_MAX, DEFAULT_K_MAX);
        expect.add_term(Multidegree::new(0, 0, 0, 1), [1, 0], c(1.0, 0.0)).unwrap();
        assert_close(&br, &expect, 1e-15, "two-term star expansion");
    }

    #[test]
    fn star_mode_overflow_is_cutoff_error() {
        let a = FormalSeries::monomial(Multidegree::ZERO, [12, 0], c(1.0, 0.0), 10, 16).unwrap();
        let b = FormalSeries::monomial(Multidegree::ZERO, [9, 0], c(1.0, 0.0), 10, 16).unwrap();
        assert_eq!(
            moyal_star(&a, &b),
            Err(SymbolError::CutoffExceeded { k: [21, 0] })
        );
    }

    #[test]
    fn star_bilinearity_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let a = random_series(&mut rng, 6, 3);
            let b = random_series(&mut rng, 6, 3);
            let cc = random_series(&mut rng, 6, 3);
            let lhs = moyal_star(&a.add(&b).unwrap(), &cc).unwrap();
            let rhs = moyal_star(&a, &cc).unwrap().add(&moyal_star(&b, &cc).unwrap()).unwrap();
            // Exact: the same floating-point products are accumulated, only
            // in a different order, so allow the last bit to move.
            assert_close(&lhs, &rhs, 1e-12, "bilinearity");
        }
    }

    #[test]
    fn star_associativity_up_to_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..8 {
            let a = random_series(&mut rng, 5, 2);
            let b = random_series(&mut rng, 5, 2);
            let cc = random_series(&mut rng, 5, 2);
            let lhs = moyal_star(&moyal_star(&a, &b).unwrap(), &cc).unwrap();
            let rhs = moyal_star(&a, &moyal_star(&b, &cc).unwrap()).unwrap();
            let diff = lhs.sub(&rhs).unwrap();
            let bad = diff
                .iter_terms()
                .filter(|(d, _, _)| d.weight() <= DEFAULT_N_MAX - 2)
                .map(|(_, _, v)| v.norm())
                .fold(0.0, f64::max);
            assert!(bad <= 1e-10, "associativity defect {bad} at weight ≤ N_max − 2");
        }
    }

    #[test]
    fn bracket_jacobi_up_to_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let a = random_series(&mut rng, 4, 2);
            let b = random_series(&mut rng, 4, 2);
            let cc = random_series(&mut rng, 4, 2);
            let j1 = moyal_bracket(&a, &moyal_bracket(&b, &cc).unwrap()).unwrap();
            let j2 = moyal_bracket(&b, &moyal_bracket(&cc, &a).unwrap()).unwrap();
            let j3 = moyal_bracket(&cc, &moyal_bracket(&a, &b).unwrap()).unwrap();
            let sum = j1.add(&j2).unwrap().add(&j3).unwrap();
            let bad = sum
                .iter_terms()
                .filter(|(d, _, _)| d.weight() <= DEFAULT_N_MAX - 2)
                .map(|(_, _, v)| v.norm())
                .fold(0.0, f64::max);
            assert!(bad <= 1e-9, "Jacobi defect {bad} at weight ≤ N_max − 2");
        }
    }

    #[test]
    fn bracket_leading_order_is_poisson() {
        // h¹ coefficient of i[a,b] equals {a, b} of the h⁰ parts, checked
        // coefficient-wise on random polynomial symbols.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_series(&mut rng, 6, 2).h_free();
            let b = random_series(&mut rng, 6, 2).h_free();
            let ibr = moyal_bracket(&a, &b).unwrap().scale(c(0.0, 1.0));
            // terms of i[a,b] with exactly one h power, h divided out
            let mut h1 = FormalSeries::zero(DEFAULT_N_MAX, DEFAULT_K_MAX);
            for (d, k, v) in ibr.iter_terms() {
                if d.h == 1 {
                    h1.add_term(Multidegree { xi: d.xi, eps: d.eps, h: 0 }, k, v).unwrap();
                }
            }
            let pb = poisson_bracket(&a, &b).unwrap();
            // Compare only below the cut: the h-multiplication pushed weight
            // up by 2, so the top two weights of {a,b} are truncated in h1.
            let mut pb_cut = FormalSeries::zero(DEFAULT_N_MAX, DEFAULT_K_MAX);
            for (d, k, v) in pb.iter_terms() {
                if d.weight() + 2 <= DEFAULT_N_MAX {
                    pb_cut.add_term(d, k, v).unwrap();
                }
            }
            assert_close(&h1, &pb_cut, 1e-11, "leading-order Poisson correspondence");
        }
    }

    #[test]
    fn bracket_filtration_bound() {
        // homogeneous inputs of weights j and l bracket into 𝒪(j+l+1)
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let a = random_series(&mut rng, 8, 2);
            let b = random_series(&mut rng, 8, 2);
            for j in 0..4u32 {
                for l in 0..4u32 {
                    let aj = a.homogeneous_part(j);
                    let bl = b.homogeneous_part(l);
                    if aj.is_zero() || bl.is_zero() {
                        continue;
                    }
                    let br = moyal_bracket(&aj, &bl).unwrap();
                    if let Some(w) = br.min_weight() {
                        assert!(
                            w > j + l,
                            "bracket of D({j}), D({l}) has a weight-{w} term"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn exp_ad_zero_generator_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = random_series(&mut rng, 10, 3);
        let zero = FormalSeries::zero(DEFAULT_N_MAX, DEFAULT_K_MAX);
        assert_eq!(exp_ad(&zero, &p).unwrap(), p);
    }

    #[test]
    fn exp_ad_commuting_case_is_identity() {
        // both x-independent ⇒ all brackets vanish
        let g = xi(0);
        let p = moyal_star(&xi(1), &xi(1)).unwrap();
        assert_eq!(exp_ad(&g, &p).unwrap(), p);
    }

    #[test]
    fn exp_ad_matches_brute_force_nested_brackets() {
        // Independent evaluation: accumulate (i ad_G)^k P / k! with the
        // nested brackets expanded term by term, not through exp_ad.
        let n_max = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..6 {
            let mut g = FormalSeries::zero(n_max, DEFAULT_K_MAX);
            let mut p = FormalSeries::zero(n_max, DEFAULT_K_MAX);
            for _ in 0..5 {
                g.add_term(
                    Multidegree::new(rng.gen_range(0..2), rng.gen_range(0..2), 0, 0),
                    [rng.gen_range(-2..=2), rng.gen_range(-2..=2)],
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                )
                .unwrap();
                p.add_term(
                    Multidegree::new(
                        rng.gen_range(0..3),
                        rng.gen_range(0..3),
                        rng.gen_range(0..2),
                        0,
                    ),
                    [rng.gen_range(-2..=2), rng.gen_range(-2..=2)],
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                )
                .unwrap();
            }
            let fast = exp_ad(&g, &p).unwrap();
            let mut brute = p.clone();
            let mut nested = p.clone();
            let mut kfact = 1.0;
            for k in 1..=(n_max as u64 + 2) {
                nested = moyal_bracket(&g, &nested).unwrap().scale(c(0.0, 1.0));
                kfact *= k as f64;
                brute = brute.add(&nested.scale(c(1.0 / kfact, 0.0))).unwrap();
                if nested.is_zero() {
                    break;
                }
            }
            assert_close(&fast, &brute, 1e-11, "brute-force nested-bracket sum");
        }
    }
}
