//! Command-line front end: scenario configs, solving, and exports.
//!
//! Configs are TOML documents:
//!
//! ```toml
//! [scenario]
//! name = "maze"
//!
//! [pde]
//! variant = "augmented"
//! alpha = 100.0
//! lambda = 0.04
//! sigma_t = [2.0]
//! ```
//!
//! A one-element `sigma_t` applies to every axis.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::control::{
    extract_path, fk_matched_dt, fk_point_estimate, max_stable_dt, simulate_rollouts, FkOptions, PolicyContext, RolloutOptions,
    RolloutStats, Trajectory,
};
use crate::domain::{builtin_scenario, Axis, CSpaceMap, CellClass, GridSpec, ScenarioParams, SCENARIOS};
use crate::error::{Error, Result};
use crate::pde::{solve, PdeProblem, Solution, SolverOptions, StateCost, StopRule};
use crate::transform::{desirability_to_value, ControlModel, ValueField, DEFAULT_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Laplace,
    Augmented,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StopName {
    #[default]
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub narrow_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub variant: VariantName,
    /// State cost rate; required by `augmented` and `full`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub sigma_t: Vec<f64>,
    /// Constant drift per axis; required by `full`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySection {
    pub obstacle_phi: f64,
    pub goal_phi: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        PenaltySection { obstacle_phi: 20.0, goal_phi: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_sweeps: usize,
    pub relaxation: f64,
    pub stop: StopName,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSection { tol: d.tol, max_sweeps: d.max_sweeps, relaxation: d.relaxation, stop: StopName::Absolute }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutSection {
    /// Defaults to the largest stable step for the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(rename = "N", alias = "n")]
    pub trials: usize,
    pub seed: u64,
    pub max_time: f64,
}

impl Default for RolloutSection {
    fn default() -> Self {
        RolloutSection { dt: None, trials: 1000, seed: 0, max_time: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Arc length per descent step; defaults to a quarter of the finest spacing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub max_steps: usize,
}

impl Default for PathSection {
    fn default() -> Self {
        PathSection { start: None, step: None, max_steps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub pde: PdeSection,
    #[serde(default)]
    pub penalties: PenaltySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub rollout: RolloutSection,
    #[serde(default)]
    pub path: PathSection,
}

fn line_of(text: &str, needle: &str) -> usize {
    text.lines().position(|l| l.trim_start().starts_with(needle)).map_or(1, |i| i + 1)
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let pde_line = line_of(text, "[pde]");
    let at = |msg: &str| Error::Config(format!("line {pde_line}: {msg}"));
    if cfg.pde.lambda.is_none() {
        return Err(at("lambda required"));
    }
    match cfg.pde.variant {
        VariantName::Laplace if cfg.pde.alpha.is_some() => return Err(at("alpha not used by the laplace variant")),
        VariantName::Augmented | VariantName::Full if cfg.pde.alpha.is_none() => return Err(at("alpha required")),
        _ => {}
    }
    match (cfg.pde.variant, &cfg.pde.drift) {
        (VariantName::Full, None) => return Err(at("drift required")),
        (VariantName::Laplace | VariantName::Augmented, Some(_)) => {
            return Err(at("drift only applies to the full variant"))
        }
        _ => {}
    }
    if cfg.pde.sigma_t.is_empty() {
        return Err(at("sigma_t must not be empty"));
    }
    Ok(cfg)
}

pub fn serialize_config(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn broadcast(values: &[f64], dim: usize, what: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; dim]),
        n if n == dim => Ok(values.to_vec()),
        n => Err(Error::Config(format!("{what} has {n} entries but the grid has {dim} axes"))),
    }
}

impl ScenarioConfig {
    pub fn scenario_params(&self) -> ScenarioParams {
        let s = &self.scenario;
        [("spacing", s.spacing), ("spacing_theta", s.spacing_theta), ("narrow_width", s.narrow_width)]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    }

    pub fn lambda(&self) -> f64 {
        self.pde.lambda.expect("validated config has lambda")
    }

    pub fn build_map(&self) -> Result<CSpaceMap> {
        let (scene, grid) = builtin_scenario(&self.scenario.name, &self.scenario_params())?;
        scene.rasterize(&self.scenario.name, &grid, self.penalties.obstacle_phi, self.penalties.goal_phi)
    }

    pub fn build_problem(&self) -> Result<PdeProblem> {
        let map = self.build_map()?;
        let dim = map.grid().dim();
        let sigma = broadcast(&self.pde.sigma_t, dim, "sigma_t")?;
        let lambda = self.lambda();
        match self.pde.variant {
            VariantName::Laplace => PdeProblem::laplace(map, sigma, lambda),
            VariantName::Augmented => PdeProblem::augmented(map, sigma, self.pde.alpha.unwrap_or(0.0), lambda),
            VariantName::Full => {
                let per_axis = broadcast(self.pde.drift.as_deref().unwrap_or(&[0.0]), dim, "drift")?;
                let drift = per_axis.iter().copied().cycle().take(map.grid().len() * dim).collect();
                let q = StateCost::Uniform(self.pde.alpha.unwrap_or(0.0));
                PdeProblem::full(map, sigma, drift, q, lambda)
            }
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_sweeps: self.solver.max_sweeps,
            relaxation: self.solver.relaxation,
            stop: match self.solver.stop {
                StopName::Absolute => StopRule::Absolute,
                StopName::Relative => StopRule::Relative,
            },
        }
    }

    /// Fully actuated control model matched to the noise.
    pub fn control_model(&self, problem: &PdeProblem) -> Result<ControlModel> {
        ControlModel::matched(problem.lambda, &problem.sigma_t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Desirability,
    Value,
}

impl FieldKind {
    fn tag(self) -> &'static str {
        match self {
            FieldKind::Desirability => "psi",
            FieldKind::Value => "V",
        }
    }
}

/// A field with enough grid metadata to be read back.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExport {
    pub grid: GridSpec,
    pub kind: FieldKind,
    pub values: Vec<f64>,
}

impl FieldExport {
    pub fn new(grid: GridSpec, kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(FieldExport { grid, kind, values })
    }

    /// `#` header lines, then one line per run of the last axis.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# kind = {}", self.kind.tag()).unwrap();
        for (a, axis) in self.grid.axes().iter().enumerate() {
            writeln!(
                out,
                "# axis {a}: min = {:?}, max = {:?}, spacing = {:?}, count = {}, periodic = {}, angular = {}",
                axis.min,
                axis.max,
                axis.spacing,
                self.grid.counts()[a],
                axis.periodic,
                axis.angular
            )
            .unwrap();
        }
        let run = *self.grid.counts().last().expect("grid has axes");
        for row in self.values.chunks(run) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut axes = Vec::new();
        let mut values = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let bad = |what: &str| Error::Config(format!("line {}: {what}", n + 1));
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(k) = meta.strip_prefix("kind = ") {
                    kind = Some(match k {
                        "psi" => FieldKind::Desirability,
                        "V" => FieldKind::Value,
                        _ => return Err(bad("unknown field kind")),
                    });
                } else if let Some(rest) = meta.strip_prefix("axis ") {
                    let (_, attrs) = rest.split_once(':').ok_or_else(|| bad("malformed axis line"))?;
                    let get = |key: &str| -> Result<String> {
                        attrs
                            .split(',')
                            .filter_map(|kv| kv.split_once('='))
                            .find(|(k, _)| k.trim() == key)
                            .map(|(_, v)| v.trim().to_string())
                            .ok_or_else(|| bad(&format!("axis line lacks `{key}`")))
                    };
                    let num = |s: String| s.parse::<f64>().map_err(|_| bad("bad number"));
                    let flag = |s: String| s.parse::<bool>().map_err(|_| bad("bad flag"));
                    axes.push(Axis {
                        min: num(get("min")?)?,
                        max: num(get("max")?)?,
                        spacing: num(get("spacing")?)?,
                        periodic: flag(get("periodic")?)?,
                        angular: flag(get("angular")?)?,
                    });
                }
                continue;
            }
            for v in line.split(',').filter(|s| !s.trim().is_empty()) {
                values.push(v.trim().parse::<f64>().map_err(|_| bad("bad value"))?);
            }
        }
        let kind = kind.ok_or_else(|| Error::Config("missing field kind".into()))?;
        FieldExport::new(GridSpec::new(axes)?, kind, values)
    }

    /// 8-bit grayscale preview of a planar field. Free cells are scaled to
    /// 1..=255 by min-max normalization; non-free cells are black. The top
    /// image row is the largest value of axis 1.
    pub fn to_pgm(&self, cells: &[CellClass]) -> Result<Vec<u8>> {
        if self.grid.dim() != 2 {
            return Err(Error::InvalidParameter("PGM export needs a planar field; use --slice".into()));
        }
        let free: Vec<f64> = self.values.iter().zip(cells).filter(|(_, c)| c.is_free()).map(|(v, _)| *v).collect();
        let lo = free.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = free.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (nx, ny) = (self.grid.counts()[0], self.grid.counts()[1]);
        let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
        for j in (0..ny).rev() {
            for i in 0..nx {
                let k = self.grid.index(&[i, j]);
                let px = if !cells[k].is_free() {
                    0
                } else if hi > lo {
                    1 + (254.0 * (self.values[k] - lo) / (hi - lo)).round() as u8
                } else {
                    128
                };
                out.push(px);
            }
        }
        Ok(out)
    }
}

/// A planar cross-section of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub axis: usize,
    pub value: f64,
}

impl Slice {
    /// Parses `theta=0`, `x=1.5`, or `2=0`.
    pub fn parse(text: &str) -> Result<Slice> {
        let (name, value) = text
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("slice must look like axis=value, got `{text}`")))?;
        let axis = match name.trim() {
            "x" => 0,
            "y" => 1,
            "theta" | "θ" => 2,
            other => other
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("unknown slice axis `{other}`")))?,
        };
        let value = parse_number(value)?;
        Ok(Slice { axis, value })
    }

    /// Restricts a field and its cell classes to the cells nearest `value`.
    pub fn apply(&self, export: &FieldExport, cells: &[CellClass]) -> Result<(FieldExport, Vec<CellClass>)> {
        let grid = &export.grid;
        if self.axis >= grid.dim() {
            return Err(Error::InvalidParameter(format!("slice axis {} out of range", self.axis)));
        }
        let mut probe = grid.center(0);
        probe[self.axis] = self.value;
        let at = grid.locate(&probe).ok_or_else(|| Error::InvalidParameter("slice outside the domain".into()))?;
        let fixed = grid.coord(at, self.axis);
        let axes: Vec<Axis> = (0..grid.dim()).filter(|&a| a != self.axis).map(|a| grid.axis(a).clone()).collect();
        let sub = GridSpec::new(axes)?;
        let mut values = Vec::with_capacity(sub.len());
        let mut classes = Vec::with_capacity(sub.len());
        for k in 0..sub.len() {
            let mut coords = sub.coords(k);
            coords.insert(self.axis, fixed);
            let i = grid.index(&coords);
            values.push(export.values[i]);
            classes.push(cells[i]);
        }
        Ok((FieldExport::new(sub, export.kind, values)?, classes))
    }
}

/// Writes `<stem>.csv` and, for planar fields or slices, `<stem>.pgm`.
pub fn export_field(export: &FieldExport, cells: &[CellClass], dir: &Path, stem: &str, slice: Option<&Slice>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write_file(&dir.join(format!("{stem}.csv")), export.to_csv().as_bytes())?;
    let planar = match slice {
        Some(s) => Some(s.apply(export, cells)?),
        None if export.grid.dim() == 2 => Some((export.clone(), cells.to_vec())),
        None => None,
    };
    if let Some((field, classes)) = planar {
        if slice.is_some() {
            write_file(&dir.join(format!("{stem}_slice.csv")), field.to_csv().as_bytes())?;
        }
        write_file(&dir.join(format!("{stem}.pgm")), &field.to_pgm(&classes)?)?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// `t, x0.., u0.., cell` with one row per state; the final row has no control.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.states[0].len();
    let m = traj.controls.first().map_or(dim, |u| u.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|a| format!("x{a}")));
    header.extend((0..m).map(|a| format!("u{a}")));
    header.push("cell".into());
    let mut out = header.join(",") + "\n";
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = vec![format!("{t:.16e}")];
        row.extend(x.iter().map(|v| format!("{v:.16e}")));
        match traj.controls.get(k) {
            Some(u) => row.extend(u.iter().map(|v| format!("{v:.16e}"))),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        row.push(traj.cells[k].label().to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_number(text: &str) -> Result<f64> {
    let t = text.trim().replace('\u{2212}', "-");
    t.parse().map_err(|_| Error::InvalidParameter(format!("not a number: `{text}`")))
}

/// Parses `(x, y)`, `x,y`, or `x y`; accepts the Unicode minus sign.
pub fn parse_state(text: &str) -> Result<Vec<f64>> {
    let inner = text.trim().trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
    inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_number)
        .collect()
}

#[derive(Parser, Debug)]
#[command(name = "optnav", about = "Navigation functions from the linear HJB equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Planar cross-section for previews, e.g. `theta=0`.
    #[arg(long)]
    slice: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    #[arg(long)]
    narrow_width: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for Ψ and V and export both fields.
    Solve(Common),
    /// Solve, then follow the descent path from --start.
    Path(Common),
    /// Solve, then simulate closed-loop rollouts from --start.
    Rollout(Common),
    /// Compare the solved Ψ with Feynman–Kac estimates at probe points.
    FkCheck(Common),
    /// Evaluate closed-form functions: k0 X | laplace R | screened R ALPHA LAMBDA SIGMA | profile X ALPHA LAMBDA SIGMA.
    Analytic {
        function: String,
        #[arg(allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// List built-in scenarios.
    Scenarios,
}

struct Solved {
    cfg: ScenarioConfig,
    problem: PdeProblem,
    solution: Solution,
    value: ValueField,
}

fn setup(common: &Common) -> Result<(ScenarioConfig, PdeProblem)> {
    let mut cfg = load_config(&common.config)?;
    if let Some(w) = common.narrow_width {
        cfg.scenario.narrow_width = Some(w);
    }
    if let Some(tol) = common.tol {
        cfg.solver.tol = tol;
    }
    if let Some(seed) = common.seed {
        cfg.rollout.seed = seed;
    }
    let problem = cfg.build_problem()?;
    Ok((cfg, problem))
}

fn solve_config(cfg: ScenarioConfig, problem: PdeProblem) -> Result<Solved> {
    let solution = solve(&problem, &cfg.solver_options())?;
    let value = desirability_to_value(&solution.field, problem.lambda, DEFAULT_FLOOR)?;
    Ok(Solved { cfg, problem, solution, value })
}

fn start_state(common: &Common, cfg: &ScenarioConfig, map: &CSpaceMap) -> Result<Vec<f64>> {
    let x = match (&common.start, &cfg.path.start) {
        (Some(s), _) => parse_state(s)?,
        (None, Some(x)) => x.clone(),
        (None, None) => return Err(Error::InvalidParameter("a start state is required (--start)".into())),
    };
    if x.len() != map.grid().dim() {
        return Err(Error::DimensionMismatch { expected: map.grid().dim(), got: x.len() });
    }
    match map.classify(&x) {
        Some((_, CellClass::Free | CellClass::Goal(_))) => Ok(x),
        _ => Err(Error::NotFree),
    }
}

fn write_fields(s: &Solved, common: &Common) -> Result<()> {
    let grid = s.problem.map.grid().clone();
    let cells = s.problem.map.cells();
    let slice = common.slice.as_deref().map(Slice::parse).transpose()?;
    let psi = FieldExport::new(grid.clone(), FieldKind::Desirability, s.solution.field.values.clone())?;
    let v = FieldExport::new(grid, FieldKind::Value, s.value.values.clone())?;
    export_field(&psi, cells, &common.out, "psi", slice.as_ref())?;
    export_field(&v, cells, &common.out, "V", slice.as_ref())?;
    let report = format!(
        "scenario = {}\nvariant = {}\ncells = {}\nfree_cells = {}\nsweeps = {}\nresidual = {:e}\n",
        s.cfg.scenario.name,
        s.problem.variant.name(),
        grid_len(&s.problem),
        s.problem.map.free_count(),
        s.solution.sweeps,
        s.solution.residual
    );
    write_file(&common.out.join("report.txt"), report.as_bytes())
}

fn grid_len(p: &PdeProblem) -> usize {
    p.map.grid().len()
}

fn rollout_report(stats: &RolloutStats, start: &[f64], v_start: f64) -> String {
    format!(
        "start = {start:?}\nV_start = {v_start:.10e}\ntrials = {}\nseed = {}\nsuccesses = {}\ncollisions = {}\ntimeouts = {}\np_hat = {:.10}\np_stderr = {:.10}\nmean_cost = {:.10e}\ncost_stderr = {:.10e}\nmean_exit_time = {:.10e}\n",
        stats.trials,
        stats.seed,
        stats.successes,
        stats.collisions,
        stats.timeouts,
        stats.p_hat,
        stats.p_stderr,
        stats.mean_cost,
        stats.cost_stderr,
        stats.mean_exit_time
    )
}

fn run_analytic(function: &str, args: &[String]) -> Result<String> {
    let nums = args.iter().map(|a| parse_number(a)).collect::<Result<Vec<f64>>>()?;
    let need = |n: usize| {
        if nums.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("`{function}` takes {n} argument(s), got {}", nums.len())))
        }
    };
    let v = match function {
        "k0" => {
            need(1)?;
            analytic::bessel_k0(nums[0])?
        }
        "laplace" => {
            need(1)?;
            analytic::laplace_fundamental_2d(nums[0])?
        }
        "screened" => {
            need(4)?;
            analytic::screened_fundamental_2d(nums[0], nums[1], nums[2], nums[3])?
        }
        "profile" => {
            need(4)?;
            analytic::screened_1d_profile(nums[0], nums[1], nums[2], nums[3])?
        }
        other => return Err(Error::InvalidParameter(format!("unknown analytic function `{other}`"))),
    };
    Ok(format!("{v:.10}\n"))
}

fn run_command(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Scenarios => {
            for (name, desc) in SCENARIOS {
                writeln!(out, "{name:<12} {desc}")?;
            }
        }
        Command::Analytic { function, args } => out.write_all(run_analytic(&function, &args)?.as_bytes())?,
        Command::Solve(common) => {
            let (cfg, problem) = setup(&common)?;
            let s = solve_config(cfg, problem)?;
            write_fields(&s, &common)?;
            writeln!(out, "solved in {} sweeps, residual {:e}", s.solution.sweeps, s.solution.residual)?;
        }
        Command::Path(common) => {
            let (cfg, problem) = setup(&common)?;
            let start = start_state(&common, &cfg, &problem.map)?;
            let s = solve_config(cfg, problem)?;
            write_fields(&s, &common)?;
            let control = s.cfg.control_model(&s.problem)?;
            let step = s.cfg.path.step.unwrap_or(0.25 * s.problem.map.grid().min_metric_spacing());
            let max_steps = s.cfg.path.max_steps;
            let ctx = PolicyContext::new(&s.problem, s.value.clone(), control)?;
            let traj = extract_path(&ctx, &start, step, max_steps)?;
            write_file(&common.out.join("trajectory.csv"), trajectory_csv(&traj).as_bytes())?;
            writeln!(
                out,
                "path: {:?} after {} states, cost {:.6}, length {:.6}",
                traj.outcome,
                traj.states.len(),
                traj.cost,
                traj.length(s.problem.map.grid())
            )?;
        }
        Command::Rollout(common) => {
            let (cfg, problem) = setup(&common)?;
            let start = start_state(&common, &cfg, &problem.map)?;
            let s = solve_config(cfg, problem)?;
            let control = s.cfg.control_model(&s.problem)?;
            let ctx = PolicyContext::new(&s.problem, s.value.clone(), control)?;
            let dt = s.cfg.rollout.dt.unwrap_or(max_stable_dt(s.problem.map.grid(), &s.problem.sigma_t));
            let mut opts = RolloutOptions::new(dt, s.cfg.rollout.trials, s.cfg.rollout.seed);
            opts.max_time = s.cfg.rollout.max_time;
            let stats = simulate_rollouts(&ctx, &start, &opts)?;
            let report = rollout_report(&stats, &start, ctx.value_at(&start));
            fs::create_dir_all(&common.out)?;
            write_file(&common.out.join("rollout.txt"), report.as_bytes())?;
            out.write_all(report.as_bytes())?;
        }
        Command::FkCheck(common) => {
            let (cfg, problem) = setup(&common)?;
            let s = solve_config(cfg, problem)?;
            let map = &s.problem.map;
            let psi = &s.solution.field.values;
            // probe where the goal contributes, not only the lowest boundary value
            let boundary = s.problem.boundary_values();
            let floor =
                (0..map.grid().len()).filter(|&i| !map.cell(i).is_free()).map(|i| boundary[i]).fold(f64::INFINITY, f64::min);
            let mut probes: Vec<usize> =
                (0..map.grid().len()).filter(|&i| map.cell(i).is_free() && psi[i] > floor + 0.05).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.rollout.seed);
            probes = probes.choose_multiple(&mut rng, 5).copied().collect();
            probes.sort_unstable();
            let dt = s.cfg.rollout.dt.unwrap_or(fk_matched_dt(map.grid(), &s.problem.sigma_t));
            writeln!(out, "cell,center,psi_fdm,psi_fk,stderr,z")?;
            for cell in probes {
                let x = map.grid().center(cell);
                let est = fk_point_estimate(&s.problem, &x, &FkOptions::new(dt, s.cfg.rollout.trials, s.cfg.rollout.seed))?;
                let z = if est.stderr > 0.0 { (est.estimate - psi[cell]) / est.stderr } else { 0.0 };
                let center = x.iter().map(|c| format!("{c:.6}")).collect::<Vec<_>>().join(" ");
                writeln!(out, "{cell},{center},{:.8},{:.8},{:.8},{z:.3}", psi[cell], est.estimate, est.stderr)?;
            }
        }
    }
    Ok(())
}

/// Runs the command line `argv` (including the program name). Returns the
/// process exit code: 0 on success, 1 on a runtime error, 2 on bad usage.
pub fn run_cli_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match run_command(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run_cli_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
