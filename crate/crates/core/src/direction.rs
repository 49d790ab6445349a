//! Descent-direction providers for the dual problem: the hop-limited
//! truncated-series Newton approximation, a dense exact-Newton reference,
//! and the plain negated-gradient baseline.

use crate::dual::HessianSplit;
use crate::error::{Error, Result};
use crate::graph::Neighborhood;
use crate::linalg;
use crate::scalar::{sc, Real};

/// Inputs for the truncated-series direction.
#[derive(Debug, Clone, Copy)]
pub struct DirectionRequest<'a, S> {
    pub split: &'a HessianSplit<S>,
    pub gradient: &'a [S],
    /// Hop parameter: the series keeps `hops + 1` terms, so component `i`
    /// of the direction depends only on gradient entries within `hops`
    /// hops of node `i`.
    pub hops: usize,
}

/// Truncated-series approximation of the Newton direction.
///
/// Accumulates `d = -(v_0 + v_1 + ... + v_hops)` with `v_0 = D^{-1} g` and
/// `v_r = D^{-1} B v_{r-1}`, which applies the series inverse of the
/// splitting `H = D - B` to `g` without ever forming a dense matrix. Each
/// recursion step widens the dependence of every component by exactly one
/// hop. Satisfies `g' d < 0` for nonzero balanced gradients whenever the
/// instance's connectivity coefficient is below one.
pub fn add_direction<S: Real>(req: &DirectionRequest<'_, S>) -> Result<Vec<S>> {
    let split = req.split;
    let g = req.gradient;
    if g.len() != split.n() {
        return Err(Error::InvalidArgument(format!(
            "gradient has length {}, expected {}",
            g.len(),
            split.n()
        )));
    }
    for (i, &d) in split.diag().iter().enumerate() {
        if d <= S::zero() {
            return Err(Error::DegenerateInstance(format!(
                "Hessian diagonal entry {i} is not positive ({d})"
            )));
        }
    }

    let mut term = split.apply_d_inv(g);
    let mut acc = term.clone();
    for _ in 0..req.hops {
        term = split.apply_d_inv(&split.apply_b(&term));
        for (a, &t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    Ok(acc.into_iter().map(|v| -v).collect())
}

/// The truncated-series direction a single node can build and act on by
/// itself: the same recursion as [`add_direction`], but compressed onto
/// the given neighborhood at every step (entries outside it are zeroed
/// before each multiply).
///
/// Equivalently, this runs the series on the neighborhood-induced
/// subproblem, so it needs the gradient and edge weights within
/// `hood.radius` hops of the center and nothing else. When the
/// neighborhood covers the whole graph it coincides with
/// [`add_direction`]. The inner product of the result with the gradient
/// is a negated positive-semidefinite quadratic form of the masked
/// gradient, so it is never positive.
pub fn add_direction_restricted<S: Real>(
    split: &HessianSplit<S>,
    gradient: &[S],
    hood: &Neighborhood,
) -> Result<Vec<S>> {
    if gradient.len() != split.n() {
        return Err(Error::InvalidArgument(format!(
            "gradient has length {}, expected {}",
            gradient.len(),
            split.n()
        )));
    }
    for (i, &d) in split.diag().iter().enumerate() {
        if d <= S::zero() {
            return Err(Error::DegenerateInstance(format!(
                "Hessian diagonal entry {i} is not positive ({d})"
            )));
        }
    }
    let mask = |v: &mut Vec<S>| {
        for (j, value) in v.iter_mut().enumerate() {
            if !hood.contains(j) {
                *value = S::zero();
            }
        }
    };
    let mut term = split.apply_d_inv(gradient);
    mask(&mut term);
    let mut acc = term.clone();
    for _ in 0..hood.radius {
        term = split.apply_d_inv(&split.apply_b(&term));
        mask(&mut term);
        for (a, &t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    Ok(acc.into_iter().map(|v| -v).collect())
}

/// Exact Newton direction: the dense solution of `H d = -g`.
///
/// The Hessian's kernel holds the constant vectors, so the Newton system
/// has a one-parameter solution family; constant shifts of the prices do
/// not change any flow, so every member is the same update. This routine
/// returns the member the truncated series converges to, the one
/// diagonally orthogonal to ones (`d' D 1 = 0`), by inverting the
/// symmetrically normalized Laplacian on the complement of its kernel.
///
/// Intended as a reference implementation: desk scale only, and requires
/// `g` orthogonal to ones (which holds for every balanced instance).
pub fn exact_newton_direction<S: Real>(split: &HessianSplit<S>, g: &[S]) -> Result<Vec<S>> {
    if g.len() != split.n() {
        return Err(Error::InvalidArgument(format!(
            "gradient has length {}, expected {}",
            g.len(),
            split.n()
        )));
    }
    let ones_component: S = g.iter().copied().sum();
    let scale = linalg::norm2(g).max(S::one());
    if ones_component.abs() > sc::<S>(1e-10) * scale {
        return Err(Error::PreconditionViolation(format!(
            "gradient is not orthogonal to ones (1'g = {ones_component})"
        )));
    }
    let n = split.n();
    let sqrt_d: Vec<S> = split.diag().iter().map(|&d| d.sqrt()).collect();

    // Normalized Laplacian D^{-1/2} H D^{-1/2}.
    let h = split.dense_h();
    let mut lsym = linalg::SquareMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            lsym.set(i, j, h.at(i, j) / (sqrt_d[i] * sqrt_d[j]));
        }
    }
    let eig = linalg::sym_eigen(&lsym)?;
    let cutoff = sc::<S>(1e-12) * eig.values.last().copied().unwrap_or(S::one()).max(S::one());

    let scaled_g: Vec<S> = g.iter().zip(&sqrt_d).map(|(&gi, &s)| gi / s).collect();
    let mut solution = vec![S::zero(); n];
    for (k, &value) in eig.values.iter().enumerate() {
        if value <= cutoff {
            continue;
        }
        let v = eig.vector(k);
        let coeff = -linalg::dot(&v, &scaled_g) / value;
        for (si, &vi) in solution.iter_mut().zip(&v) {
            *si += coeff * vi;
        }
    }
    Ok(solution
        .into_iter()
        .zip(&sqrt_d)
        .map(|(si, &s)| si / s)
        .collect())
}

/// Negated gradient, the baseline descent direction.
pub fn subgradient_direction<S: Real>(g: &[S]) -> Vec<S> {
    g.iter().map(|&v| -v).collect()
}
