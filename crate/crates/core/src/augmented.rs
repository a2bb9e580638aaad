//! HJB on the individual state augmented by a few aggregate coordinates.
//!
//! Aggregate nodes `ω` form a tensor grid over the common shock `z`, the
//! perceived price coordinates and (when learning is internalized) the
//! belief parameters. Among those nodes the agent's perceived aggregate
//! dynamics form a small generator `C`: upwind transport of prices by the
//! PLM drift, diffusion in `p` and `z`, and transport of `θ` by the level
//! learning rule. Every node carries a full wealth-income value slice.
//!
//! One implicit step couples the slices only through `C`. It is solved by
//! symmetric block Gauss-Seidel: each slice's banded system
//! `(ρ + 1/dt − C_ωω)I − 𝒜_π(ω)` is factored once per step and the
//! off-diagonal `C` terms go to the right-hand side. The iteration
//! converges because the full operator is an M-matrix with the `ρ + 1/dt`
//! margin on the diagonal. With no aggregate coupling each slice is solved
//! once, reproducing [`hjb_backward_step`](crate::hjb::hjb_backward_step)
//! bit for bit.
//!
//! Nothing here is indexed by a density: the value lives on finitely many
//! aggregate coordinates.

use crate::beliefs::{plm_drift, LearningRule, PlmFamily, PriceChart};
use crate::error::{check_len, Error, Result};
use crate::hjb::{step_system, upwind_policy, PolicyField};
use crate::linalg::SparseMatrix;
use crate::model::{ModelParams, PriceVector, StateGrid};

/// Tensor grid of aggregate coordinates, laid out row-major over
/// `[z, p₁, …, θ₁, …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateAxes {
    pub z: Vec<f64>,
    pub prices: Vec<Vec<f64>>,
    pub thetas: Vec<Vec<f64>>,
}

impl AggregateAxes {
    /// Axes read from a grid; a missing `z` axis becomes the single node 0.
    pub fn from_grid(grid: &StateGrid) -> Result<Self> {
        if grid.price_nodes().is_empty() {
            return Err(Error::invalid("grid.p_nodes", "price-space solves need price nodes"));
        }
        Ok(AggregateAxes {
            z: grid.z_nodes().map_or(vec![0.0], <[f64]>::to_vec),
            prices: grid.price_nodes().to_vec(),
            thetas: grid.theta_nodes().to_vec(),
        })
    }

    fn axes(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.z];
        out.extend(self.prices.iter().map(Vec::as_slice));
        out.extend(self.thetas.iter().map(Vec::as_slice));
        out
    }

    pub fn len(&self) -> usize {
        self.axes().iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn shape(&self) -> Vec<usize> {
        self.axes().iter().map(|a| a.len()).collect()
    }

    fn multi_index(&self, mut w: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for d in (0..shape.len()).rev() {
            idx[d] = w % shape[d];
            w /= shape[d];
        }
        idx
    }

    fn flat(&self, idx: &[usize]) -> usize {
        self.shape()
            .iter()
            .zip(idx)
            .fold(0, |acc, (n, i)| acc * n + i)
    }

    /// `(z, price coordinates, θ coordinates)` at node `w`.
    pub fn coordinates(&self, w: usize) -> (f64, Vec<f64>, Vec<f64>) {
        let idx = self.multi_index(w);
        let np = self.prices.len();
        let z = self.z[idx[0]];
        let p = (0..np).map(|d| self.prices[d][idx[1 + d]]).collect();
        let th = (0..self.thetas.len())
            .map(|d| self.thetas[d][idx[1 + np + d]])
            .collect();
        (z, p, th)
    }

    /// Multilinear interpolation stencil at a point given in axis order;
    /// coordinates outside an axis are clamped to it.
    pub fn stencil(&self, point: &[f64]) -> Result<Vec<(usize, f64)>> {
        let axes = self.axes();
        check_len("aggregate point", axes.len(), point.len())?;
        let mut per_axis = Vec::with_capacity(axes.len());
        for (axis, &x) in axes.iter().zip(point) {
            if !x.is_finite() {
                return Err(Error::Domain(format!("non-finite aggregate coordinate {x}")));
            }
            per_axis.push(bracket(axis, x));
        }
        let mut out = vec![(Vec::new(), 1.0)];
        for choices in per_axis {
            let mut next = Vec::with_capacity(out.len() * choices.len());
            for (idx, w) in &out {
                for &(i, wi) in &choices {
                    if wi == 0.0 {
                        continue;
                    }
                    let mut idx: Vec<usize> = idx.clone();
                    idx.push(i);
                    next.push((idx, w * wi));
                }
            }
            out = next;
        }
        Ok(out.into_iter().map(|(idx, w)| (self.flat(&idx), w)).collect())
    }
}

fn bracket(axis: &[f64], x: f64) -> Vec<(usize, f64)> {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return vec![(0, 1.0)];
    }
    if x >= axis[n - 1] {
        return vec![(n - 1, 1.0)];
    }
    let hi = axis.partition_point(|&a| a <= x).min(n - 1);
    let lo = hi - 1;
    let w = (x - axis[lo]) / (axis[hi] - axis[lo]);
    vec![(lo, 1.0 - w), (hi, w)]
}

/// What the agent believes about the aggregate coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateDynamics {
    pub chart: PriceChart,
    pub family: PlmFamily,
    /// Fixed PLM parameters; `None` means `θ` is read from the θ-axes
    /// (internalized learning).
    pub theta: Option<Vec<f64>>,
    /// Volatility of perceived prices; diffusion coefficient `σ_p²/2`.
    pub sigma_p: f64,
    /// Diffusion coefficient of `z`.
    pub beta: f64,
    /// Learning rule whose drift transports `θ`; needed iff `theta` is `None`.
    pub learning: Option<LearningRule>,
    /// Learning clock at step index 0.
    pub clock0: f64,
}

impl AggregateDynamics {
    /// Exogenous PLM with fixed parameters and no noise.
    pub fn fixed(chart: PriceChart, family: PlmFamily, theta: Vec<f64>) -> Self {
        AggregateDynamics {
            chart,
            family,
            theta: Some(theta),
            sigma_p: 0.0,
            beta: 0.0,
            learning: None,
            clock0: 0.0,
        }
    }

    fn validate(&self, axes: &AggregateAxes) -> Result<()> {
        self.family.validate()?;
        check_len("price axes", self.chart.dim(), axes.prices.len())?;
        if !(self.sigma_p >= 0.0 && self.sigma_p.is_finite()) {
            return Err(Error::invalid("plm.sigma_p", "must be finite and >= 0"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("model.beta", "must be finite and >= 0"));
        }
        let theta_dim = self.family.theta_dim(self.chart);
        match (&self.theta, &self.learning) {
            (Some(th), _) => {
                check_len("theta", theta_dim, th.len())?;
                if !axes.thetas.is_empty() {
                    return Err(Error::invalid("grid.theta_nodes", "unused with fixed beliefs"));
                }
            }
            (None, Some(rule)) => {
                if !rule.is_level() || !self.family.is_level() {
                    return Err(Error::invalid(
                        "beliefs.rule",
                        "internalized learning needs a level rule and a level-type PLM",
                    ));
                }
                check_len("theta axes", theta_dim, axes.thetas.len())?;
                if theta_dim > 2 {
                    return Err(Error::invalid("grid.theta_nodes", "at most two belief dimensions"));
                }
            }
            (None, None) => {
                return Err(Error::invalid("beliefs.rule", "internalized learning needs a rule"))
            }
        }
        Ok(())
    }
}

/// Drift and diffusion per axis at every node, plus the implied generator.
struct AggregateGenerator {
    matrix: SparseMatrix,
    max_cfl_rate: f64,
}

fn aggregate_generator(
    axes: &AggregateAxes,
    dynamics: &AggregateDynamics,
    time: f64,
) -> Result<AggregateGenerator> {
    let all = axes.axes();
    let np = axes.prices.len();
    let n = axes.len();
    let mut trip = Vec::new();
    let mut max_rate: f64 = 0.0;
    for w in 0..n {
        let idx = axes.multi_index(w);
        let (z, p, th) = axes.coordinates(w);
        let theta: &[f64] = dynamics.theta.as_deref().unwrap_or(&th);
        let mu_p = plm_drift(dynamics.family, &p, z, theta)?;
        let mut drift = vec![0.0; all.len()];
        let mut diff = vec![0.0; all.len()];
        diff[0] = dynamics.beta;
        for d in 0..np {
            drift[1 + d] = mu_p[d];
            diff[1 + d] = 0.5 * dynamics.sigma_p * dynamics.sigma_p;
        }
        if dynamics.theta.is_none() {
            let rule = dynamics.learning.as_ref().expect("validated");
            let l = rule.level_drift(&p, &th, time).expect("validated level rule");
            for (d, v) in l.into_iter().enumerate() {
                drift[1 + np + d] = v;
            }
        }
        let mut diag = 0.0;
        for (d, axis) in all.iter().enumerate() {
            let m = axis.len();
            if m == 1 {
                continue;
            }
            let i = idx[d];
            let hb = if i > 0 { axis[i] - axis[i - 1] } else { axis[1] - axis[0] };
            let hf = if i + 1 < m { axis[i + 1] - axis[i] } else { axis[m - 1] - axis[m - 2] };
            let mut lo = if drift[d] < 0.0 { -drift[d] / hb } else { 0.0 };
            let mut hi = if drift[d] > 0.0 { drift[d] / hf } else { 0.0 };
            lo += 2.0 * diff[d] / (hb * (hb + hf));
            hi += 2.0 * diff[d] / (hf * (hb + hf));
            // Reflecting ends: no flow off the axis.
            if i == 0 {
                lo = 0.0;
            }
            if i + 1 == m {
                hi = 0.0;
            }
            let mut step = idx.clone();
            if lo > 0.0 {
                step[d] = i - 1;
                trip.push((w, axes.flat(&step), lo));
            }
            if hi > 0.0 {
                step[d] = i + 1;
                trip.push((w, axes.flat(&step), hi));
            }
            diag -= lo + hi;
        }
        if diag != 0.0 {
            trip.push((w, w, diag));
        }
        max_rate = max_rate.max(-diag);
    }
    Ok(AggregateGenerator {
        matrix: SparseMatrix::from_triplets(n, trip),
        max_cfl_rate: max_rate,
    })
}

/// Block Gauss-Seidel controls.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedConfig {
    /// Fine steps per coarse step of the backward sweep.
    pub stride: usize,
    /// Stop when a sweep moves no value by more than this times the largest
    /// value magnitude.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for AugmentedConfig {
    fn default() -> Self {
        AugmentedConfig {
            stride: 1,
            tolerance: 1e-14,
            max_sweeps: 1000,
        }
    }
}

/// A backward problem on `[0, steps·dt]` in fine step indices.
#[derive(Debug, Clone)]
pub struct AugmentedProblem<'a> {
    pub grid: &'a StateGrid,
    pub params: &'a ModelParams,
    pub axes: AggregateAxes,
    pub dynamics: AggregateDynamics,
    /// Terminal value: one wealth-income slice shared by all aggregate
    /// nodes, or one slice per node.
    pub terminal: Vec<f64>,
    pub steps: usize,
    pub config: AugmentedConfig,
}

/// Value slices over aggregate nodes at selected step indices.
#[derive(Debug, Clone)]
pub struct AugmentedValue {
    pub axes: AggregateAxes,
    pub nx: usize,
    pub dt: f64,
    /// Step indices of the stored slices, decreasing.
    pub indices: Vec<usize>,
    /// `slices[k][w·nx + x]`.
    pub slices: Vec<Vec<f64>>,
    /// Largest `|C_ωω|·dt` seen, the implicit transport Courant number.
    pub max_cfl: f64,
    pub sweeps: usize,
}

impl AugmentedValue {
    pub fn time(&self, k: usize) -> f64 {
        self.indices[k] as f64 * self.dt
    }

    fn position(&self, index: usize) -> Result<usize> {
        self.indices
            .iter()
            .position(|&i| i == index)
            .ok_or_else(|| Error::Domain(format!("no value slice stored at step {index}")))
    }

    /// Wealth-income slice at aggregate node `w` and step index `index`.
    pub fn node_slice(&self, index: usize, w: usize) -> Result<&[f64]> {
        let k = self.position(index)?;
        Ok(&self.slices[k][w * self.nx..(w + 1) * self.nx])
    }

    /// Interpolated wealth-income value at an aggregate point.
    pub fn value_at(&self, index: usize, point: &[f64]) -> Result<Vec<f64>> {
        let k = self.position(index)?;
        let mut out = vec![0.0; self.nx];
        for (w, wt) in self.axes.stencil(point)? {
            let s = &self.slices[k][w * self.nx..(w + 1) * self.nx];
            for (o, v) in out.iter_mut().zip(s) {
                *o += wt * v;
            }
        }
        Ok(out)
    }

    /// Policy at the realized aggregate point and actual prices, from the
    /// slice stored at `index` (the date after the decision).
    pub fn policy_at(
        &self,
        index: usize,
        point: &[f64],
        price: PriceVector,
        grid: &StateGrid,
        params: &ModelParams,
    ) -> Result<PolicyField> {
        let v = self.value_at(index, point)?;
        upwind_policy(&v, price, grid, params, None)
    }
}

impl AugmentedProblem<'_> {
    fn validate(&self) -> Result<()> {
        self.dynamics.validate(&self.axes)?;
        let nx = self.grid.len();
        let n = self.axes.len();
        if self.terminal.len() != nx && self.terminal.len() != nx * n {
            return Err(Error::Shape {
                what: "terminal value",
                expected: nx * n,
                found: self.terminal.len(),
            });
        }
        if self.config.stride == 0 {
            return Err(Error::invalid("hjb.stride", "must be >= 1"));
        }
        Ok(())
    }

    fn node_prices(&self) -> Result<Vec<PriceVector>> {
        let tech = self.params.technology();
        (0..self.axes.len())
            .map(|w| {
                let (z, p, _) = self.axes.coordinates(w);
                self.dynamics.chart.to_prices(&p, z, &tech)
            })
            .collect()
    }

    fn terminal_slices(&self) -> Vec<f64> {
        if self.terminal.len() == self.grid.len() {
            self.terminal.repeat(self.axes.len())
        } else {
            self.terminal.clone()
        }
    }

    /// Solves from the terminal date down to step `target`. Slices are kept
    /// on the coarse lattice `steps − k·stride` that lies at or above
    /// `target`, followed by one partial step down to `target` itself.
    pub fn solve(&self, target: usize) -> Result<AugmentedValue> {
        self.solve_warm(target, None)
    }

    /// As [`solve`](Self::solve), starting each Gauss-Seidel iteration from
    /// the slice `guess` stores at the same step, when there is one. The
    /// result agrees with a cold solve to the iteration tolerance.
    pub fn solve_warm(&self, target: usize, guess: Option<&AugmentedValue>) -> Result<AugmentedValue> {
        self.validate()?;
        if target > self.steps {
            return Err(Error::Domain(format!(
                "target step {target} beyond horizon {}",
                self.steps
            )));
        }
        let mut out = AugmentedValue {
            axes: self.axes.clone(),
            nx: self.grid.len(),
            dt: self.params.dt,
            indices: vec![self.steps],
            slices: vec![self.terminal_slices()],
            max_cfl: 0.0,
            sweeps: 0,
        };
        self.extend(&mut out, target, guess)?;
        Ok(out)
    }

    /// Extends `value` from the lowest stored lattice slice at or above
    /// `target`: coarse steps while they stay above `target`, then one
    /// shorter step onto it. Off-lattice slices from earlier calls are
    /// discarded first, so repeated calls agree with a fresh
    /// [`solve`](Self::solve).
    pub fn refine(&self, value: &mut AugmentedValue, target: usize) -> Result<()> {
        self.extend(value, target, None)
    }

    fn extend(&self, value: &mut AugmentedValue, target: usize, guess: Option<&AugmentedValue>) -> Result<()> {
        let h = self.config.stride;
        let on_lattice = |i: usize| (self.steps - i) % h == 0;
        while let Some(&last) = value.indices.last() {
            if value.indices.len() > 1 && (!on_lattice(last) || last < target) {
                value.indices.pop();
                value.slices.pop();
            } else {
                break;
            }
        }
        let mut idx = *value.indices.last().expect("terminal slice");
        if idx < target {
            return Err(Error::Domain(format!(
                "cached solve ends at step {idx}, below the requested step {target}"
            )));
        }
        while idx >= target + h && on_lattice(idx) {
            self.push_step(value, idx, h, guess)?;
            idx -= h;
        }
        if idx > target {
            self.push_step(value, idx, idx - target, guess)?;
        }
        Ok(())
    }

    /// One implicit step of `h` fine steps from the last stored slice.
    fn push_step(
        &self,
        out: &mut AugmentedValue,
        idx: usize,
        h: usize,
        guess: Option<&AugmentedValue>,
    ) -> Result<()> {
        let dt = h as f64 * self.params.dt;
        let time = self.dynamics.clock0 + (idx - h) as f64 * self.params.dt;
        let next = out.slices.last().expect("terminal slice");
        let start = guess
            .and_then(|g| g.position(idx - h).ok().map(|k| g.slices[k].as_slice()))
            .filter(|s| s.len() == next.len());
        let (u, sweeps, cfl) = self
            .implicit_step(next, start, dt, time)
            .map_err(|e| e.at_date((idx - h) as f64 * self.params.dt))?;
        out.max_cfl = out.max_cfl.max(cfl);
        out.sweeps += sweeps;
        out.indices.push(idx - h);
        out.slices.push(u);
        Ok(())
    }

    fn implicit_step(
        &self,
        next: &[f64],
        start: Option<&[f64]>,
        dt: f64,
        time: f64,
    ) -> Result<(Vec<f64>, usize, f64)> {
        let nx = self.grid.len();
        let n = self.axes.len();
        let gen = aggregate_generator(&self.axes, &self.dynamics, time)?;
        let prices = self.node_prices()?;
        let mut systems = Vec::with_capacity(n);
        for (w, &p) in prices.iter().enumerate() {
            let extra = -gen.matrix.get(w, w);
            systems.push(step_system(
                &next[w * nx..(w + 1) * nx],
                p,
                dt,
                self.grid,
                self.params,
                extra,
                None,
            )?);
        }
        let coupled = gen.matrix.triplets().any(|(i, j, v)| i != j && v != 0.0);
        let mut u = next.to_vec();
        if !coupled {
            for (w, sys) in systems.iter().enumerate() {
                let x = sys.lu.solve(&sys.rhs);
                u[w * nx..(w + 1) * nx].copy_from_slice(&x);
            }
            return Ok((u, 1, gen.max_cfl_rate * dt));
        }
        if let Some(s) = start {
            u.copy_from_slice(s);
        }
        let mut history = Vec::new();
        let mut rhs = vec![0.0; nx];
        for sweep in 0..self.config.max_sweeps {
            let mut change: f64 = 0.0;
            let order: Box<dyn Iterator<Item = usize>> = if sweep % 2 == 0 {
                Box::new(0..n)
            } else {
                Box::new((0..n).rev())
            };
            for w in order {
                rhs.copy_from_slice(&systems[w].rhs);
                for (j, c) in gen.matrix.row(w) {
                    if j == w {
                        continue;
                    }
                    let other = &u[j * nx..(j + 1) * nx];
                    for (r, o) in rhs.iter_mut().zip(other) {
                        *r += c * o;
                    }
                }
                systems[w].lu.solve_in_place(&mut rhs);
                let slot = &mut u[w * nx..(w + 1) * nx];
                for (s, r) in slot.iter_mut().zip(&rhs) {
                    change = change.max((*s - r).abs());
                    *s = *r;
                }
            }
            let scale = u.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            history.push(change / scale);
            if change <= self.config.tolerance * scale {
                return Ok((u, sweep + 1, gen.max_cfl_rate * dt));
            }
        }
        Err(Error::Convergence {
            what: "aggregate block Gauss-Seidel",
            iterations: self.config.max_sweeps,
            last: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }
}

/// Price-space HJB for fixed PLM parameters `θ` and no aggregate noise:
/// value `Û(x, p, s; θ)` on `[0, steps·dt]`.
pub fn solve_price_space_hjb(
    theta: &[f64],
    chart: PriceChart,
    family: PlmFamily,
    grid: &StateGrid,
    params: &ModelParams,
    terminal: &[f64],
    steps: usize,
    config: &AugmentedConfig,
) -> Result<AugmentedValue> {
    let mut axes = AggregateAxes::from_grid(grid)?;
    axes.z = vec![0.0];
    axes.thetas.clear();
    AugmentedProblem {
        grid,
        params,
        axes,
        dynamics: AggregateDynamics::fixed(chart, family, theta.to_vec()),
        terminal: terminal.to_vec(),
        steps,
        config: config.clone(),
    }
    .solve(0)
}

/// Internalized learning: `θ` becomes a state transported by the level
/// rule's drift `L(p, θ)`. The grid must carry θ-axes.
#[allow(clippy::too_many_arguments)]
pub fn solve_internalized_hjb(
    chart: PriceChart,
    family: PlmFamily,
    rule: LearningRule,
    clock0: f64,
    grid: &StateGrid,
    params: &ModelParams,
    terminal: &[f64],
    steps: usize,
    config: &AugmentedConfig,
) -> Result<AugmentedValue> {
    let mut axes = AggregateAxes::from_grid(grid)?;
    axes.z = vec![0.0];
    if axes.thetas.is_empty() {
        return Err(Error::invalid("grid.theta_nodes", "internalized learning needs θ nodes"));
    }
    AugmentedProblem {
        grid,
        params,
        axes,
        dynamics: AggregateDynamics {
            chart,
            family,
            theta: None,
            sigma_p: 0.0,
            beta: 0.0,
            learning: Some(rule),
            clock0,
        },
        terminal: terminal.to_vec(),
        steps,
        config: config.clone(),
    }
    .solve(0)
}

/// Extended HJB on `(x, z, p)` for fixed `θ` with aggregate noise.
#[allow(clippy::too_many_arguments)]
pub fn solve_extended_hjb(
    theta: &[f64],
    chart: PriceChart,
    family: PlmFamily,
    sigma_p: f64,
    grid: &StateGrid,
    params: &ModelParams,
    terminal: &[f64],
    steps: usize,
    config: &AugmentedConfig,
) -> Result<AugmentedValue> {
    let mut axes = AggregateAxes::from_grid(grid)?;
    axes.thetas.clear();
    AugmentedProblem {
        grid,
        params,
        axes,
        dynamics: AggregateDynamics {
            chart,
            family,
            theta: Some(theta.to_vec()),
            sigma_p,
            beta: params.beta,
            learning: None,
            clock0: 0.0,
        },
        terminal: terminal.to_vec(),
        steps,
        config: config.clone(),
    }
    .solve(0)
}

/// Price axis of `n` nodes spanning `±frac` around `center`, with `center`
/// itself a node when `n` is odd.
pub fn price_axis(center: f64, frac: f64, n: usize) -> Vec<f64> {
    crate::model::linspace(center * (1.0 - frac), center * (1.0 + frac), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::{hjb_backward_step, ValueField};
    use crate::model::IncomeProcess;

    fn small() -> (StateGrid, ModelParams) {
        let params = ModelParams::default_calibration();
        let grid = StateGrid::uniform(20.0, 30, &params.income).unwrap();
        (grid, params)
    }

    #[test]
    fn stencil_weights_sum_to_one_and_reproduce_linear_functions() {
        let axes = AggregateAxes {
            z: vec![-1.0, 0.0, 2.0],
            prices: vec![vec![0.0, 0.5, 1.0]],
            thetas: vec![],
        };
        let pt = [0.7, 0.3];
        let st = axes.stencil(&pt).unwrap();
        let total: f64 = st.iter().map(|s| s.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let f = |w: usize| {
            let (z, p, _) = axes.coordinates(w);
            3.0 * z - 2.0 * p[0] + 1.0
        };
        let v: f64 = st.iter().map(|&(w, wt)| wt * f(w)).sum();
        assert!((v - (3.0 * 0.7 - 0.6 + 1.0)).abs() < 1e-14);
        // Clamped outside the axis.
        let st = axes.stencil(&[5.0, -1.0]).unwrap();
        assert_eq!(st, vec![(axes.flat(&[2, 0]), 1.0)]);
    }

    #[test]
    fn aggregate_generator_rows_sum_to_zero() {
        let axes = AggregateAxes {
            z: vec![-0.1, 0.0, 0.1],
            prices: vec![vec![0.03, 0.04, 0.05, 0.06]],
            thetas: vec![],
        };
        let dyns = AggregateDynamics {
            chart: PriceChart::RateFrontier,
            family: PlmFamily::Anchored { speed: 0.3, z_loading: 0.02 },
            theta: Some(vec![0.045]),
            sigma_p: 0.01,
            beta: 0.002,
            learning: None,
            clock0: 0.0,
        };
        let g = aggregate_generator(&axes, &dyns, 0.0).unwrap();
        for s in g.matrix.row_sums() {
            assert!(s.abs() < 1e-12);
        }
        for (i, j, v) in g.matrix.triplets() {
            if i != j {
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn uncoupled_slices_match_single_steps_bitwise() {
        let (grid, params) = small();
        let grid = grid
            .with_price_nodes(vec![vec![0.03, 0.04, 0.05]])
            .unwrap();
        let terminal = vec![-20.0; grid.len()];
        let v = solve_price_space_hjb(
            &[0.0, 0.0],
            PriceChart::RateFrontier,
            PlmFamily::Linear { with_z: false },
            &grid,
            &params,
            &terminal,
            3,
            &AugmentedConfig::default(),
        )
        .unwrap();
        let tech = params.technology();
        for w in 0..3 {
            let (_, p, _) = v.axes.coordinates(w);
            let price = PriceChart::RateFrontier.to_prices(&p, 0.0, &tech).unwrap();
            let mut u = ValueField::new(terminal.clone(), 3.0);
            for _ in 0..3 {
                u = hjb_backward_step(&u, price, params.dt, &grid, &params, None).unwrap().0;
            }
            assert_eq!(v.node_slice(0, w).unwrap(), &u.values[..]);
        }
    }

    #[test]
    fn refine_matches_fresh_solve() {
        let (grid, params) = small();
        let grid = grid
            .with_price_nodes(vec![vec![0.035, 0.04, 0.045, 0.05]])
            .unwrap();
        let problem = AugmentedProblem {
            grid: &grid,
            params: &params,
            axes: AggregateAxes::from_grid(&grid).unwrap(),
            dynamics: AggregateDynamics::fixed(
                PriceChart::RateFrontier,
                PlmFamily::Anchored { speed: 0.5, z_loading: 0.0 },
                vec![0.042],
            ),
            terminal: vec![-20.0; grid.len()],
            steps: 10,
            config: AugmentedConfig { stride: 3, ..Default::default() },
        };
        let mut cached = problem.solve(8).unwrap();
        assert_eq!(cached.indices, vec![10, 8]);
        problem.refine(&mut cached, 5).unwrap();
        let fresh = problem.solve(5).unwrap();
        assert_eq!(cached.indices, fresh.indices);
        assert_eq!(cached.slices, fresh.slices);
    }

    #[test]
    fn ou_income_grid_runs() {
        let mut params = ModelParams::default_calibration();
        params.income = IncomeProcess::OuDiffusion {
            mean_reversion: 0.3,
            long_run_mean: 1.0,
            intensity: 0.01,
            lower: 0.6,
            upper: 1.4,
            n_nodes: 5,
        };
        let grid = StateGrid::uniform(20.0, 20, &params.income)
            .unwrap()
            .with_price_nodes(vec![vec![0.035, 0.045]])
            .unwrap();
        let v = solve_price_space_hjb(
            &[0.04],
            PriceChart::RateFrontier,
            PlmFamily::Anchored { speed: 0.2, z_loading: 0.0 },
            &grid,
            &params,
            &vec![-20.0; grid.len()],
            2,
            &AugmentedConfig::default(),
        )
        .unwrap();
        assert!(v.slices.iter().flatten().all(|x| x.is_finite()));
    }
}
