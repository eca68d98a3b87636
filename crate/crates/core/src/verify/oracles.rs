use nalgebra::{DMatrix, DVector};

use super::ProbabilityTable;
use crate::cftp::Graph;
use crate::error::{Result, SimError};

pub const MAX_ISING_VERTICES: usize = 20;
pub const MAX_CHAIN_STATES: usize = 100;

/// Exact Ising law by enumerating all `2^|V|` configurations.
///
/// States are labelled with one `+`/`-` character per vertex in vertex
/// order; configuration `k` has vertex `v` up iff bit `v` of `k` is set.
pub fn exact_ising_distribution(graph: &Graph, beta: f64) -> Result<ProbabilityTable> {
    let n = graph.vertex_count();
    if n > MAX_ISING_VERTICES {
        return Err(SimError::StateSpaceTooLarge {
            size: 1u128 << n.min(127),
            limit: 1u128 << MAX_ISING_VERTICES,
        });
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(SimError::domain("beta", beta, "beta >= 0"));
    }
    let spin = |k: usize, v: usize| if k >> v & 1 == 1 { 1.0 } else { -1.0 };
    let energies: Vec<f64> = (0..1usize << n)
        .map(|k| {
            -graph
                .edges()
                .iter()
                .map(|&(a, b)| spin(k, a) * spin(k, b))
                .sum::<f64>()
        })
        .collect();
    // Shift by the ground energy so no weight overflows.
    let ground = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let entries = energies
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let label: String = (0..n)
                .map(|v| if k >> v & 1 == 1 { '+' } else { '-' })
                .collect();
            (label, (-beta * (h - ground)).exp())
        })
        .collect();
    ProbabilityTable::from_weights(entries)
}

/// Solve `pi P = pi`, `sum pi = 1` for a row-stochastic matrix. States are
/// labelled `"0"`, `"1"`, ...
pub fn stationary_of_chain(transition: &[Vec<f64>]) -> Result<ProbabilityTable> {
    let k = transition.len();
    if k == 0 {
        return Err(SimError::EmptyInput);
    }
    if k > MAX_CHAIN_STATES {
        return Err(SimError::StateSpaceTooLarge {
            size: k as u128,
            limit: MAX_CHAIN_STATES as u128,
        });
    }
    for (i, row) in transition.iter().enumerate() {
        if row.len() != k {
            return Err(SimError::ContractViolation(format!(
                "row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        if row.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(SimError::ContractViolation(format!(
                "row {i} has a negative or non-finite entry"
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(SimError::ContractViolation(format!("row {i} sums to {s}")));
        }
    }

    // (P^T - I) pi = 0 with the last equation replaced by sum pi = 1.
    let p = DMatrix::from_fn(k, k, |i, j| transition[i][j]);
    let mut a = p.transpose() - DMatrix::identity(k, k);
    a.row_mut(k - 1).fill(1.0);
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;

    let lu = a.clone().lu();
    let scale = a.abs().max().max(1.0);
    let min_pivot = lu.u().diagonal().abs().min();
    if min_pivot <= 1e-12 * scale {
        return Err(SimError::SingularSystem);
    }
    let pi = lu.solve(&b).ok_or(SimError::SingularSystem)?;

    let residual = (p.transpose() * &pi - &pi).amax();
    if residual > 1e-10 || pi.iter().any(|&x| x < -1e-12) {
        return Err(SimError::SingularSystem);
    }
    let clamped: Vec<f64> = pi.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    ProbabilityTable::new(
        clamped
            .into_iter()
            .enumerate()
            .map(|(i, x)| (i.to_string(), x / total))
            .collect(),
    )
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }

    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Probability of a one from one level of the exponential factory, with the
/// recursive call assumed exact:
/// `e^{-C} + (1-p) * integral_0^1 C e^{-C u} e^{-C (1-u) p} du`.
pub fn exp_factory_rhs(c: f64, p: f64) -> f64 {
    let integral = integrate(
        |u| c * (-c * u).exp() * (-c * (1.0 - u) * p).exp(),
        0.0,
        1.0,
        1e-14,
    );
    (-c).exp() + (1.0 - p) * integral
}
