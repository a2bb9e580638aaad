//! Barycentric lattice on the probability simplex over at most three states.
//!
//! A measure `m` on `{0, …, d}` is described by its upper cumulative sums
//! `u_j = Σ_{i≥j} m_i`, `j = 1..d`, which satisfy `1 ≥ u_1 ≥ … ≥ u_d ≥ 0`.
//! Lattice nodes are the points with `N·u` integer. In these coordinates the
//! simplex is a union of Kuhn simplices of the unit cubes, so piecewise
//! linear interpolation on that triangulation is well defined, uses only
//! lattice nodes, and reproduces affine functions exactly.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexLattice {
    n_x: usize,
    divisions: usize,
}

impl SimplexLattice {
    /// Lattice with `resolution` nodes along each edge.
    pub fn new(n_x: usize, resolution: usize) -> Result<Self> {
        if !(1..=3).contains(&n_x) {
            return Err(Error::invalid("master.n_x", "the simplex lattice supports 1 to 3 states"));
        }
        if resolution < 2 {
            return Err(Error::invalid("master.resolution", "need at least 2 nodes per edge"));
        }
        Ok(SimplexLattice {
            n_x,
            divisions: resolution - 1,
        })
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn resolution(&self) -> usize {
        self.divisions + 1
    }

    pub fn len(&self) -> usize {
        let n = self.divisions;
        match self.n_x {
            1 => 1,
            2 => n + 1,
            _ => (n + 1) * (n + 2) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn index(&self, k: &[usize]) -> usize {
        match k.len() {
            0 => 0,
            1 => k[0],
            _ => k[0] * (k[0] + 1) / 2 + k[1],
        }
    }

    fn coords(&self, idx: usize) -> Vec<usize> {
        match self.n_x {
            1 => vec![],
            2 => vec![idx],
            _ => {
                // Largest k0 with k0(k0+1)/2 <= idx.
                let mut k0 = ((((8 * idx + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
                while (k0 + 1) * (k0 + 2) / 2 <= idx {
                    k0 += 1;
                }
                while k0 * (k0 + 1) / 2 > idx {
                    k0 -= 1;
                }
                vec![k0, idx - k0 * (k0 + 1) / 2]
            }
        }
    }

    /// Measure at node `idx`.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let n = self.divisions as f64;
        let k = self.coords(idx);
        let mut u = vec![1.0];
        u.extend(k.iter().map(|&v| v as f64 / n));
        u.push(0.0);
        (0..self.n_x).map(|i| u[i] - u[i + 1]).collect()
    }

    /// Lattice nodes and weights whose combination interpolates at `m`.
    pub fn stencil(&self, m: &[f64]) -> Result<Vec<(usize, f64)>> {
        check_len("measure", self.n_x, m.len())?;
        let d = self.n_x - 1;
        if d == 0 {
            return Ok(vec![(0, 1.0)]);
        }
        let n = self.divisions as f64;
        let mut u = vec![0.0; d];
        let mut acc = 0.0;
        for j in (1..self.n_x).rev() {
            acc += m[j];
            u[j - 1] = (acc * n).clamp(0.0, n);
        }
        for j in 1..d {
            u[j] = u[j].min(u[j - 1]);
        }
        let base: Vec<usize> = u
            .iter()
            .map(|v| (v.floor() as usize).min(self.divisions - 1))
            .collect();
        let frac: Vec<f64> = u.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut order: Vec<usize> = (0..d).collect();
        // Stable: equal fractions keep the lower coordinate first.
        order.sort_by(|a, b| frac[*b].total_cmp(&frac[*a]));
        let mut out = Vec::with_capacity(d + 1);
        let mut vertex = base.clone();
        out.push((self.index(&vertex), 1.0 - frac[order[0]]));
        for (s, &dim) in order.iter().enumerate() {
            vertex[dim] += 1;
            let next = order.get(s + 1).map_or(0.0, |&o| frac[o]);
            out.push((self.index(&vertex), frac[dim] - next));
        }
        out.retain(|(_, w)| *w != 0.0);
        Ok(out)
    }

    /// Piecewise-linear interpolation of nodal `values` at `m`.
    pub fn interpolate(&self, values: &[f64], m: &[f64]) -> Result<f64> {
        check_len("lattice values", self.len(), values.len())?;
        Ok(self.stencil(m)?.iter().map(|(i, w)| w * values[*i]).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_round_trip() {
        for n_x in 1..=3 {
            let lat = SimplexLattice::new(n_x, 7).unwrap();
            for i in 0..lat.len() {
                let m = lat.node(i);
                assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-15);
                assert!(m.iter().all(|v| *v >= -1e-15));
                let s = lat.stencil(&m).unwrap();
                assert_eq!(s.len(), 1, "{n_x} {i} {s:?}");
                assert_eq!(s[0].0, i);
            }
        }
    }

    #[test]
    fn counts() {
        assert_eq!(SimplexLattice::new(3, 101).unwrap().len(), 5151);
        assert_eq!(SimplexLattice::new(2, 101).unwrap().len(), 101);
    }

    #[test]
    fn affine_functions_are_exact() {
        let lat = SimplexLattice::new(3, 5).unwrap();
        let f = |m: &[f64]| 0.3 + 2.0 * m[0] - 1.5 * m[1] + 0.7 * m[2];
        let vals: Vec<f64> = (0..lat.len()).map(|i| f(&lat.node(i))).collect();
        for m in [[0.2, 0.3, 0.5], [0.91, 0.04, 0.05], [0.0, 0.0, 1.0], [1.0 / 3.0; 3]] {
            assert!((lat.interpolate(&vals, &m).unwrap() - f(&m)).abs() < 1e-14);
        }
    }

    #[test]
    fn stencil_weights_form_a_partition() {
        let lat = SimplexLattice::new(3, 11).unwrap();
        let s = lat.stencil(&[0.123, 0.456, 0.421]).unwrap();
        assert!((s.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(s.iter().all(|x| x.1 > 0.0 && x.0 < lat.len()));
    }
}
