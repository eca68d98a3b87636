use std::fmt;

use super::{FiniteStateSpace, MonotoneUpdate, UpdateFunction};
use crate::error::{Result, SimError};

/// Simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if a >= n || b >= n || a == b {
                return Err(SimError::ContractViolation(format!(
                    "bad edge ({a}, {b}) for {n} vertices"
                )));
            }
            if neighbors[a].contains(&b) {
                return Err(SimError::ContractViolation(format!(
                    "duplicate edge ({a}, {b})"
                )));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        Ok(Self {
            n,
            edges,
            neighbors,
        })
    }

    /// `width x height` grid with free boundary, vertices in row-major order.
    pub fn grid(width: usize, height: usize) -> Self {
        let mut edges = Vec::new();
        for r in 0..height {
            for c in 0..width {
                let v = r * width + c;
                if c + 1 < width {
                    edges.push((v, v + 1));
                }
                if r + 1 < height {
                    edges.push((v, v + width));
                }
            }
        }
        Self::new(width * height, edges).expect("grid edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        let edges = if n < 3 {
            Vec::new()
        } else {
            (0..n).map(|v| (v, (v + 1) % n)).collect()
        };
        Self::new(n, edges).expect("cycle edges are valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }
}

/// Spin configuration with entries in {-1, +1}. Displays as `+`/`-`
/// characters in vertex order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spins(Vec<i8>);

impl Spins {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(s) = spins.iter().find(|s| **s != 1 && **s != -1) {
            return Err(SimError::ContractViolation(format!(
                "spin {s} is not +1 or -1"
            )));
        }
        Ok(Self(spins))
    }

    pub fn all(n: usize, spin: i8) -> Self {
        Self::new(vec![spin; n]).expect("spin is +1 or -1")
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of spins.
    pub fn magnetization(&self) -> i64 {
        self.0.iter().map(|&s| s as i64).sum()
    }

    /// Componentwise order with -1 < +1.
    pub fn le(&self, other: &Spins) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for Spins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Ferromagnetic Ising model with single-site heat-bath dynamics.
///
/// Each step uses two uniforms: the first picks site `floor(u_site * n)`,
/// the second sets it to +1 iff `u_threshold < e^{bS} / (e^{bS} + e^{-bS})`,
/// with `S` the sum of neighbouring spins.
#[derive(Clone, Debug)]
pub struct IsingModel {
    graph: Graph,
    beta: f64,
}

impl IsingModel {
    pub fn new(graph: Graph, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(SimError::domain("beta", beta, "beta >= 0"));
        }
        if graph.vertex_count() == 0 {
            return Err(SimError::EmptyInput);
        }
        Ok(Self { graph, beta })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `H(x) = -sum over edges of x(i) x(j)`.
    pub fn hamiltonian(&self, spins: &Spins) -> f64 {
        -self
            .graph
            .edges()
            .iter()
            .map(|&(a, b)| (spins.0[a] * spins.0[b]) as f64)
            .sum::<f64>()
    }

    pub fn site_of(&self, u_site: f64) -> usize {
        let n = self.graph.vertex_count();
        ((u_site * n as f64) as usize).min(n - 1)
    }

    /// Probability that `v` becomes +1 given its neighbours.
    pub fn plus_probability(&self, spins: &Spins, v: usize) -> f64 {
        let s: i64 = self
            .graph
            .neighbors(v)
            .iter()
            .map(|&w| spins.0[w] as i64)
            .sum();
        // e^{bS} / (e^{bS} + e^{-bS}) written to avoid overflow.
        1.0 / (1.0 + (-2.0 * self.beta * s as f64).exp())
    }

    pub fn heat_bath(&self, spins: &Spins, u_site: f64, u_threshold: f64) -> Spins {
        let v = self.site_of(u_site);
        let mut next = spins.clone();
        next.0[v] = if u_threshold < self.plus_probability(spins, v) {
            1
        } else {
            -1
        };
        next
    }
}

impl UpdateFunction for IsingModel {
    type State = Spins;

    fn draws_per_step(&self) -> usize {
        2
    }

    fn step(&self, state: &Spins, u: &[f64]) -> Spins {
        self.heat_bath(state, u[0], u[1])
    }
}

impl MonotoneUpdate for IsingModel {
    fn precedes(&self, a: &Spins, b: &Spins) -> bool {
        a.le(b)
    }

    fn bottom(&self) -> Spins {
        Spins::all(self.graph.vertex_count(), -1)
    }

    fn top(&self) -> Spins {
        Spins::all(self.graph.vertex_count(), 1)
    }
}

impl FiniteStateSpace for IsingModel {
    fn state_count(&self) -> u128 {
        1u128
            .checked_shl(self.graph.vertex_count() as u32)
            .unwrap_or(u128::MAX)
    }

    /// All configurations; vertex `v` is +1 iff bit `v` of the index is set.
    fn states(&self) -> Vec<Spins> {
        let n = self.graph.vertex_count();
        (0..1usize << n)
            .map(|bits| {
                Spins(
                    (0..n)
                        .map(|v| if bits >> v & 1 == 1 { 1 } else { -1 })
                        .collect(),
                )
            })
            .collect()
    }
}

/// A spin configuration together with the model it lives in.
#[derive(Clone, Debug)]
pub struct IsingConfig<'m> {
    model: &'m IsingModel,
    spins: Spins,
}

impl<'m> IsingConfig<'m> {
    pub fn new(model: &'m IsingModel, spins: Spins) -> Result<Self> {
        if spins.len() != model.graph.vertex_count() {
            return Err(SimError::ContractViolation(format!(
                "{} spins for {} vertices",
                spins.len(),
                model.graph.vertex_count()
            )));
        }
        Ok(Self { model, spins })
    }

    pub fn spins(&self) -> &Spins {
        &self.spins
    }

    pub fn model(&self) -> &'m IsingModel {
        self.model
    }

    /// One heat-bath update at the site chosen by `u_site`.
    pub fn heatbath_update(&self, u_site: f64, u_threshold: f64) -> IsingConfig<'m> {
        IsingConfig {
            model: self.model,
            spins: self.model.heat_bath(&self.spins, u_site, u_threshold),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::RandomStream;

    fn pair(beta: f64) -> IsingModel {
        IsingModel::new(Graph::new(2, vec![(0, 1)]).unwrap(), beta).unwrap()
    }

    #[test]
    fn zero_field_is_fair() {
        // Vertex 1 of a 3-path has neighbours of opposite sign.
        let m = IsingModel::new(Graph::new(3, vec![(0, 1), (1, 2)]).unwrap(), 0.9).unwrap();
        let x = Spins::new(vec![1, -1, -1]).unwrap();
        assert_eq!(m.plus_probability(&x, 1), 0.5);
    }

    #[test]
    fn beta_zero_is_fair_everywhere() {
        let m = IsingModel::new(Graph::grid(3, 3), 0.0).unwrap();
        let mut s = RandomStream::from_seed(3);
        for st in m.states().iter().step_by(37) {
            let v = s.index(9);
            assert_eq!(m.plus_probability(st, v), 0.5);
        }
    }

    #[test]
    fn single_edge_heat_bath_probability() {
        let m = pair(0.5);
        let x = Spins::new(vec![-1, 1]).unwrap();
        let p = m.plus_probability(&x, 0);
        let direct = 0.5f64.exp() / (0.5f64.exp() + (-0.5f64).exp());
        assert!((p - direct).abs() < 1e-15);
        assert!((p - 0.7310585786300049).abs() < 1e-15);

        let cfg = IsingConfig::new(&m, x).unwrap();
        assert_eq!(cfg.heatbath_update(0.1, 0.73).spins().as_slice(), [1, 1]);
        assert_eq!(cfg.heatbath_update(0.1, 0.74).spins().as_slice(), [-1, 1]);
        // Other sites are untouched.
        assert_eq!(cfg.heatbath_update(0.1, 0.74).spins().as_slice()[1], 1);
    }

    #[test]
    fn hamiltonian_of_aligned_cycle() {
        let m = IsingModel::new(Graph::cycle(4), 1.0).unwrap();
        assert_eq!(m.hamiltonian(&Spins::all(4, 1)), -4.0);
        assert_eq!(m.hamiltonian(&Spins::new(vec![1, -1, 1, -1]).unwrap()), 4.0);
    }

    #[test]
    fn grid_shape() {
        let g = Graph::grid(3, 3);
        assert_eq!(g.vertex_count(), 9);
        assert_eq!(g.edges().len(), 12);
        assert_eq!(g.neighbors(4).len(), 4);
        assert_eq!(g.neighbors(0).len(), 2);
    }

    #[test]
    fn invalid_inputs() {
        assert!(Graph::new(2, vec![(0, 2)]).is_err());
        assert!(Graph::new(2, vec![(1, 1)]).is_err());
        assert!(Graph::new(2, vec![(0, 1), (1, 0)]).is_err());
        assert!(IsingModel::new(Graph::grid(2, 2), -0.1).is_err());
        assert!(Spins::new(vec![1, 0]).is_err());
        let m = pair(0.1);
        assert!(IsingConfig::new(&m, Spins::all(3, 1)).is_err());
    }

    #[test]
    fn display_encoding() {
        assert_eq!(Spins::new(vec![1, -1, -1, 1]).unwrap().to_string(), "+--+");
        assert_eq!(Spins::new(vec![1, -1, -1, 1]).unwrap().magnetization(), 0);
    }

    #[test]
    fn states_enumerate_all() {
        let m = IsingModel::new(Graph::grid(2, 2), 0.1).unwrap();
        let states = m.states();
        assert_eq!(states.len(), 16);
        let mut uniq = states.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 16);
    }
}
