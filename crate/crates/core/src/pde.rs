//! Finite-difference discretization of the desirability PDE
//!
//! ```text
//! 0 = -(q/λ) Ψ + fᵀ∇Ψ + ½ Tr(Σt ∇²Ψ)
//! ```
//!
//! and its two reductions (`f = 0, q = α` and `f = 0, q = 0`), with Dirichlet
//! data on every non-free cell. Second derivatives use centered differences,
//! drift uses first-order upwinding, so every row has the M-matrix sign
//! pattern and the discrete maximum principle holds.

use crate::domain::{CSpaceMap, CellClass};
use crate::error::{Error, Result};
use crate::transform::transform_boundary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeVariant {
    FullLinearHjb,
    AugmentedNavigation,
    LaplaceNavigation,
}

impl PdeVariant {
    pub fn name(&self) -> &'static str {
        match self {
            PdeVariant::FullLinearHjb => "full",
            PdeVariant::AugmentedNavigation => "augmented",
            PdeVariant::LaplaceNavigation => "laplace",
        }
    }
}

/// State cost rate `q(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum StateCost {
    Uniform(f64),
    Field(Vec<f64>),
}

impl StateCost {
    pub fn at(&self, cell: usize) -> f64 {
        match self {
            StateCost::Uniform(alpha) => *alpha,
            StateCost::Field(q) => q[cell],
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            StateCost::Uniform(alpha) => *alpha == 0.0,
            StateCost::Field(q) => q.iter().all(|&v| v == 0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PdeProblem {
    pub variant: PdeVariant,
    pub map: CSpaceMap,
    /// Diagonal of Σt, one entry per axis, in metric units²/time.
    pub sigma_t: Vec<f64>,
    /// Drift sampled at cell centers, `cells x dim`, row-major by cell.
    pub drift: Option<Vec<f64>>,
    pub state_cost: StateCost,
    pub lambda: f64,
}

impl PdeProblem {
    pub fn laplace(map: CSpaceMap, sigma_t: Vec<f64>, lambda: f64) -> Result<Self> {
        let p = PdeProblem {
            variant: PdeVariant::LaplaceNavigation,
            map,
            sigma_t,
            drift: None,
            state_cost: StateCost::Uniform(0.0),
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn augmented(map: CSpaceMap, sigma_t: Vec<f64>, alpha: f64, lambda: f64) -> Result<Self> {
        let p = PdeProblem {
            variant: PdeVariant::AugmentedNavigation,
            map,
            sigma_t,
            drift: None,
            state_cost: StateCost::Uniform(alpha),
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn full(map: CSpaceMap, sigma_t: Vec<f64>, drift: Vec<f64>, state_cost: StateCost, lambda: f64) -> Result<Self> {
        let p = PdeProblem {
            variant: PdeVariant::FullLinearHjb,
            map,
            sigma_t,
            drift: Some(drift),
            state_cost,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.map.grid();
        let dim = grid.dim();
        if self.sigma_t.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.sigma_t.len() });
        }
        if let Some(s) = self.sigma_t.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter(format!("sigma_t entries must be positive, got {s}")));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        match &self.state_cost {
            StateCost::Uniform(alpha) if !(alpha.is_finite() && *alpha >= 0.0) => {
                return Err(Error::InvalidParameter(format!("state cost must be >= 0, got {alpha}")));
            }
            StateCost::Field(q) => {
                if q.len() != grid.len() {
                    return Err(Error::DimensionMismatch { expected: grid.len(), got: q.len() });
                }
                if q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidParameter("state cost field must be finite and >= 0".into()));
                }
            }
            _ => {}
        }
        match (self.variant, &self.drift) {
            (PdeVariant::FullLinearHjb, Some(f)) => {
                if f.len() != grid.len() * dim {
                    return Err(Error::DimensionMismatch { expected: grid.len() * dim, got: f.len() });
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("drift must be finite".into()));
                }
            }
            (PdeVariant::FullLinearHjb, None) => {
                return Err(Error::InvalidParameter("full HJB variant requires a drift field".into()));
            }
            (_, Some(_)) => {
                return Err(Error::InvalidParameter(format!(
                    "{} variant takes no drift field",
                    self.variant.name()
                )));
            }
            (_, None) => {}
        }
        if self.variant == PdeVariant::LaplaceNavigation && !self.state_cost.is_zero() {
            return Err(Error::InvalidParameter("laplace variant takes no state cost".into()));
        }
        if self.variant == PdeVariant::AugmentedNavigation && !matches!(self.state_cost, StateCost::Uniform(_)) {
            return Err(Error::InvalidParameter("augmented variant takes a scalar alpha".into()));
        }
        Ok(())
    }

    pub fn drift_at(&self, cell: usize, axis: usize) -> f64 {
        match &self.drift {
            Some(f) => f[cell * self.map.grid().dim() + axis],
            None => 0.0,
        }
    }

    /// Dirichlet data `e^(-φ/λ)` on non-free cells, zero on free cells.
    pub fn boundary_values(&self) -> Vec<f64> {
        self.map
            .cells()
            .iter()
            .map(|c| c.phi().map_or(0.0, |phi| transform_boundary(phi, self.lambda)))
            .collect()
    }
}

/// Sparse rows for the free cells, in lexicographic cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSystem {
    n_cells: usize,
    row_cells: Vec<usize>,
    center: Vec<f64>,
    rhs: Vec<f64>,
    /// Sum of coefficients that were folded into `rhs`.
    boundary_weight: Vec<f64>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    coeffs: Vec<f64>,
    dirichlet: Vec<f64>,
}

/// One row of the system: `center·Ψ[cell] + Σ coeff·Ψ[nb] = rhs`.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub cell: usize,
    pub center: f64,
    pub rhs: f64,
    pub neighbors: &'a [usize],
    pub coeffs: &'a [f64],
    pub boundary_weight: f64,
}

impl StencilSystem {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_rows(&self) -> usize {
        self.row_cells.len()
    }

    pub fn row(&self, k: usize) -> Row<'_> {
        let span = self.offsets[k]..self.offsets[k + 1];
        Row {
            cell: self.row_cells[k],
            center: self.center[k],
            rhs: self.rhs[k],
            neighbors: &self.neighbors[span.clone()],
            coeffs: &self.coeffs[span],
            boundary_weight: self.boundary_weight[k],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        (0..self.n_rows()).map(|k| self.row(k))
    }

    pub fn row_of_cell(&self, cell: usize) -> Option<usize> {
        self.row_cells.binary_search(&cell).ok()
    }

    pub fn dirichlet(&self) -> &[f64] {
        &self.dirichlet
    }

    /// Center strictly negative, all off-diagonals non-negative.
    pub fn is_monotone(&self) -> bool {
        self.rows()
            .all(|r| r.center < 0.0 && r.boundary_weight >= 0.0 && r.coeffs.iter().all(|&c| c >= 0.0))
    }

    /// `|center| >= Σ off-diagonals` on every row, with the slack per row.
    pub fn dominance_slack(&self) -> Vec<f64> {
        self.rows()
            .map(|r| -r.center - r.coeffs.iter().sum::<f64>() - r.boundary_weight)
            .collect()
    }

    fn row_residual(&self, k: usize, psi: &[f64]) -> f64 {
        let r = self.row(k);
        let off: f64 = r.neighbors.iter().zip(r.coeffs).map(|(&j, &c)| c * psi[j]).sum();
        r.center * psi[r.cell] + off - r.rhs
    }
}

pub fn assemble(problem: &PdeProblem) -> Result<StencilSystem> {
    assemble_with_boundary(problem, &problem.boundary_values())
}

/// Assembles with caller-supplied Dirichlet values (read only at non-free cells).
pub fn assemble_with_boundary(problem: &PdeProblem, boundary: &[f64]) -> Result<StencilSystem> {
    problem.validate()?;
    let map = &problem.map;
    let grid = map.grid();
    let dim = grid.dim();
    let n = grid.len();
    if boundary.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: boundary.len() });
    }
    let diffusion: Vec<f64> = (0..dim)
        .map(|a| {
            let h = grid.axis(a).metric_spacing();
            problem.sigma_t[a] / (2.0 * h * h)
        })
        .collect();
    let inv_h: Vec<f64> = (0..dim).map(|a| 1.0 / grid.axis(a).metric_spacing()).collect();

    let mut sys = StencilSystem {
        n_cells: n,
        row_cells: Vec::new(),
        center: Vec::new(),
        rhs: Vec::new(),
        boundary_weight: Vec::new(),
        offsets: vec![0],
        neighbors: Vec::new(),
        coeffs: Vec::new(),
        dirichlet: map
            .cells()
            .iter()
            .zip(boundary)
            .map(|(c, &b)| if c.is_free() { 0.0 } else { b })
            .collect(),
    };

    for (i, cell) in map.cells().iter().enumerate() {
        if !cell.is_free() {
            continue;
        }
        let mut center = -problem.state_cost.at(i) / problem.lambda;
        let mut rhs = 0.0;
        let mut boundary_weight = 0.0;
        // Merge coefficients per neighbor so periodic axes with two cells stay consistent.
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * dim);
        for a in 0..dim {
            let f = problem.drift_at(i, a);
            for dir in [-1isize, 1] {
                let upwind = if (dir == 1 && f > 0.0) || (dir == -1 && f < 0.0) { f.abs() * inv_h[a] } else { 0.0 };
                let coeff = diffusion[a] + upwind;
                center -= coeff;
                let j = grid
                    .neighbor(i, a, dir)
                    .expect("free cells are enclosed by non-free cells on non-periodic axes");
                if map.cell(j).is_free() {
                    match entries.iter_mut().find(|(k, _)| *k == j) {
                        Some(e) => e.1 += coeff,
                        None => entries.push((j, coeff)),
                    }
                } else {
                    rhs -= coeff * boundary[j];
                    boundary_weight += coeff;
                }
            }
        }
        sys.row_cells.push(i);
        sys.center.push(center);
        sys.rhs.push(rhs);
        sys.boundary_weight.push(boundary_weight);
        for (j, c) in entries {
            sys.neighbors.push(j);
            sys.coeffs.push(c);
        }
        sys.offsets.push(sys.neighbors.len());
    }
    Ok(sys)
}

/// Desirability `Ψ` on every cell; non-free cells hold their Dirichlet data.
#[derive(Debug, Clone, PartialEq)]
pub struct DesirabilityField {
    pub values: Vec<f64>,
}

impl DesirabilityField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// `max |row·Ψ - rhs| < tol`.
    Absolute,
    /// `max |row·Ψ - rhs| / (|center|·|Ψ|) < tol`, for fields spanning many
    /// orders of magnitude. Use with `relaxation = 1`: with over-relaxation,
    /// round-off keeps large values cycling by an ulp, and that noise can
    /// swamp cells many orders of magnitude smaller.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub relaxation: f64,
    pub stop: StopRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_sweeps: 200_000, relaxation: 1.7, stop: StopRule::Absolute }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: DesirabilityField,
    pub sweeps: usize,
    /// Absolute residual of the returned field.
    pub residual: f64,
}

/// Successive over-relaxation in lexicographic order.
pub fn solve_system(system: &StencilSystem, opts: &SolverOptions) -> Result<Solution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", opts.tol)));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(Error::InvalidParameter(format!("relaxation must lie in (0, 2), got {}", opts.relaxation)));
    }
    if !system.is_monotone() {
        return Err(Error::InvalidParameter("system is not an M-matrix".into()));
    }
    let mut psi = system.dirichlet.clone();
    let start = initial_guess(system);
    for &i in &system.row_cells {
        psi[i] = start;
    }
    let omega = opts.relaxation;
    let mut last = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        for k in 0..system.n_rows() {
            let r = system.row(k);
            let off: f64 = r.neighbors.iter().zip(r.coeffs).map(|(&j, &c)| c * psi[j]).sum();
            let gs = (r.rhs - off) / r.center;
            psi[r.cell] += omega * (gs - psi[r.cell]);
        }
        let (abs, rel) = residuals(system, &psi);
        if !abs.is_finite() {
            return Err(Error::Divergence);
        }
        last = abs;
        let measure = match opts.stop {
            StopRule::Absolute => abs,
            StopRule::Relative => rel,
        };
        if measure < opts.tol {
            return Ok(Solution { field: DesirabilityField { values: psi }, sweeps: sweep, residual: abs });
        }
    }
    Err(Error::NonConvergence { sweeps: opts.max_sweeps, residual: last })
}

fn initial_guess(system: &StencilSystem) -> f64 {
    let mut lo = f64::INFINITY;
    for r in system.rows() {
        if r.boundary_weight > 0.0 {
            // rhs = -Σ w_b Ψ_b, so -rhs / weight is a weighted mean of the data
            lo = lo.min(-r.rhs / r.boundary_weight);
        }
    }
    if lo.is_finite() {
        lo
    } else {
        0.0
    }
}

fn residuals(system: &StencilSystem, psi: &[f64]) -> (f64, f64) {
    let mut abs = 0.0f64;
    let mut rel = 0.0f64;
    for k in 0..system.n_rows() {
        let res = system.row_residual(k, psi).abs();
        if res.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        abs = abs.max(res);
        // subnormal values carry too few digits for a relative test
        let scale = system.center[k].abs() * psi[system.row_cells[k]].abs().max(f64::MIN_POSITIVE);
        let r = if res == 0.0 { 0.0 } else { res / scale };
        rel = rel.max(r);
    }
    (abs, rel)
}

/// Max over free cells of `|row·Ψ - rhs|`.
pub fn residual_norm(system: &StencilSystem, field: &DesirabilityField) -> Result<f64> {
    if field.len() != system.n_cells {
        return Err(Error::DimensionMismatch { expected: system.n_cells, got: field.len() });
    }
    Ok((0..system.n_rows())
        .map(|k| system.row_residual(k, &field.values).abs())
        .fold(0.0, f64::max))
}

/// Convenience: assemble and solve with default boundary data.
pub fn solve(problem: &PdeProblem, opts: &SolverOptions) -> Result<Solution> {
    solve_system(&assemble(problem)?, opts)
}

/// Free cells that are strict local extrema among their face neighbors:
/// larger (or smaller) than every neighbor by more than `tol`.
pub fn strict_local_extrema(map: &CSpaceMap, values: &[f64], tol: f64) -> Vec<usize> {
    let grid = map.grid();
    (0..grid.len())
        .filter(|&i| map.cell(i) == CellClass::Free)
        .filter(|&i| {
            let v = values[i];
            let nbrs: Vec<f64> = (0..grid.dim())
                .flat_map(|a| [-1isize, 1].into_iter().filter_map(move |d| grid.neighbor(i, a, d)))
                .map(|j| values[j])
                .collect();
            nbrs.iter().all(|&u| v > u + tol) || nbrs.iter().all(|&u| v < u - tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Axis, GridSpec};

    fn single_cell_map() -> CSpaceMap {
        let grid = GridSpec::square(0.0, 3.0, 1.0).unwrap();
        let cells = (0..9)
            .map(|i| if i == 4 { CellClass::Free } else { CellClass::Goal(0.0) })
            .collect();
        CSpaceMap::new("one", grid, cells).unwrap()
    }

    #[test]
    fn five_point_row() {
        let p = PdeProblem::laplace(single_cell_map(), vec![2.0, 2.0], 1.0).unwrap();
        let sys = assemble(&p).unwrap();
        assert_eq!(sys.n_rows(), 1);
        let r = sys.row(0);
        assert_eq!(r.center, -4.0);
        assert_eq!(r.rhs, -4.0);
        assert!(r.neighbors.is_empty());
        assert!(sys.is_monotone());
    }

    fn room_map() -> CSpaceMap {
        let grid = GridSpec::square(0.0, 1.0, 0.1).unwrap();
        let cells = (0..grid.len())
            .map(|i| {
                let c = grid.coords(i);
                if c == [8, 8] {
                    CellClass::Goal(0.0)
                } else if grid.is_boundary(i) {
                    CellClass::Exterior(3.0)
                } else {
                    CellClass::Free
                }
            })
            .collect();
        CSpaceMap::new("room", grid, cells).unwrap()
    }

    #[test]
    fn reductions_match() {
        let lap = assemble(&PdeProblem::laplace(room_map(), vec![2.0, 2.0], 1.0).unwrap()).unwrap();
        let aug0 = assemble(&PdeProblem::augmented(room_map(), vec![2.0, 2.0], 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(lap, aug0);

        let aug = assemble(&PdeProblem::augmented(room_map(), vec![2.0, 2.0], 0.7, 1.0).unwrap()).unwrap();
        let n = room_map().grid().len();
        let full = PdeProblem::full(room_map(), vec![2.0, 2.0], vec![0.0; 2 * n], StateCost::Uniform(0.7), 1.0);
        assert_eq!(aug, assemble(&full.unwrap()).unwrap());
        assert!(aug.dominance_slack().iter().all(|&s| s > 0.0));
        assert!(lap.dominance_slack().iter().all(|&s| s.abs() < 1e-9));
    }

    #[test]
    fn upwind_keeps_m_matrix() {
        let map = room_map();
        let n = map.grid().len();
        let drift: Vec<f64> = (0..n).flat_map(|i| [((i * 7) % 5) as f64 - 2.0, 1.5]).collect();
        let p = PdeProblem::full(map, vec![0.5, 0.5], drift, StateCost::Uniform(0.0), 1.0).unwrap();
        let sys = assemble(&p).unwrap();
        assert!(sys.is_monotone());
        assert!(sys.dominance_slack().iter().all(|&s| s > -1e-9));
    }

    #[test]
    fn variant_mismatch_rejected() {
        let n = room_map().grid().len();
        let mut p = PdeProblem::laplace(room_map(), vec![2.0, 2.0], 1.0).unwrap();
        p.drift = Some(vec![0.0; 2 * n]);
        assert!(assemble(&p).is_err());
        assert!(PdeProblem::laplace(room_map(), vec![2.0, -1.0], 1.0).is_err());
        assert!(PdeProblem::laplace(room_map(), vec![2.0, 2.0], 0.0).is_err());
        assert!(PdeProblem::augmented(room_map(), vec![2.0, 2.0], -1.0, 1.0).is_err());
    }

    #[test]
    fn constant_boundary_gives_constant_solution() {
        let mut p = PdeProblem::laplace(room_map(), vec![2.0, 2.0], 1.0).unwrap();
        let b = vec![0.25; p.map.grid().len()];
        let sys = assemble_with_boundary(&p, &b).unwrap();
        let sol = solve_system(&sys, &SolverOptions::default()).unwrap();
        assert!(sol.field.values.iter().all(|&v| (v - 0.25).abs() < 1e-9));
        // exact constant: zero residual
        let exact = DesirabilityField { values: b };
        assert!(residual_norm(&sys, &exact).unwrap() < 1e-12);
        p.lambda = 2.0;
        assert!(residual_norm(&sys, &DesirabilityField { values: vec![0.0; 3] }).is_err());
    }

    #[test]
    fn zero_field_residual_is_max_rhs() {
        let p = PdeProblem::laplace(room_map(), vec![2.0, 2.0], 1.0).unwrap();
        let sys = assemble(&p).unwrap();
        let zero = DesirabilityField { values: vec![0.0; sys.n_cells()] };
        let max_rhs = sys.rows().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        assert_eq!(residual_norm(&sys, &zero).unwrap(), max_rhs);
    }

    #[test]
    fn solver_meets_tolerance_and_positivity() {
        let p = PdeProblem::augmented(room_map(), vec![2.0, 2.0], 0.3, 1.0).unwrap();
        let sys = assemble(&p).unwrap();
        let sol = solve_system(&sys, &SolverOptions::default()).unwrap();
        assert!(residual_norm(&sys, &sol.field).unwrap() < 1e-8);
        assert!((sol.residual - residual_norm(&sys, &sol.field).unwrap()).abs() < 1e-15);
        assert!(sol.field.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let p = PdeProblem::laplace(room_map(), vec![2.0, 2.0], 1.0).unwrap();
        let sys = assemble(&p).unwrap();
        let opts = SolverOptions { max_sweeps: 2, ..Default::default() };
        match solve_system(&sys, &opts) {
            Err(Error::NonConvergence { sweeps: 2, residual }) => assert!(residual > 1e-8),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn periodic_axis_wraps() {
        // ring of 4 cells on a periodic axis, non-periodic second axis closed by goals
        let grid = GridSpec::new(vec![Axis::angle(0.0, 360.0, 90.0), Axis::linear(0.0, 3.0, 1.0)]).unwrap();
        let cells = (0..grid.len())
            .map(|i| if grid.coord(i, 1) == 1 { CellClass::Free } else { CellClass::Goal(0.0) })
            .collect();
        let map = CSpaceMap::new("ring", grid, cells).unwrap();
        let p = PdeProblem::laplace(map, vec![1.0, 1.0], 1.0).unwrap();
        let sys = assemble(&p).unwrap();
        assert_eq!(sys.n_rows(), 4);
        assert!(sys.rows().all(|r| r.neighbors.len() == 2));
    }
}
