//! Rescaled metric pressure: weighted Bowen-ball covers of an empirical
//! measure, pressure tables with slope read-offs, the bounded-variation
//! diagnostic and the Katok-formula comparison.

mod cover;
mod potential;

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use cover::{CoverMode, CoverPick, CoverProblem, EXACT_LIMIT};
pub use potential::{PotentialShape, PotentialSpec};

use crate::ergodic::{log_speed_report, smb_entropy, transport_defect, EmpiricalMeasure, GridPartition, SmbEstimate};
use crate::error::{contract, PressureError, Result};
use crate::flow_core::{integrate_orbit, singular_distance, step_count, Point, SystemSpec, Trajectory};
use crate::scalar::{cumulative_trapezoid, ls_slope, Scalar};
use crate::warp::{ball_lifetime_steps, BallVariant, WarpBand};

/// Default number of candidate centers drawn from the measure's atoms.
pub const DEFAULT_POOL_SIZE: usize = 400;

/// `int_0^t f(phi_s x) ds` by the trapezoid rule on the integration grid.
pub fn orbit_integral<T: Scalar>(sys: &SystemSpec<T>, x: &Point<T>, f: &PotentialSpec<T>, t: T, dt: T) -> Result<T> {
    let steps = step_count(t, dt)?;
    let tr = integrate_orbit(sys, x, t, dt)?;
    let vals: Vec<T> = (0..tr.len()).map(|k| f.eval_shape(sys, tr.position(k))).collect();
    Ok(cumulative_trapezoid(&vals, dt)[steps] + f.offset * T::from_count(steps) * dt)
}

/// Orbits of a point set to a common horizon, with running integrals of the
/// potential's shape.
#[derive(Debug, Clone)]
pub struct OrbitBank<T> {
    dt: T,
    offset: T,
    trajectories: Vec<Trajectory<T>>,
    integrals: Vec<Vec<T>>,
}

impl<T: Scalar> OrbitBank<T> {
    pub fn build(
        sys: &SystemSpec<T>,
        points: &[Point<T>],
        f: &PotentialSpec<T>,
        samples: usize,
        dt: T,
    ) -> Result<Self> {
        f.validate(sys)?;
        let horizon = T::from_count(samples.max(1)) * dt;
        let built: Vec<(Trajectory<T>, Vec<T>)> = points
            .par_iter()
            .map(|p| {
                let tr = integrate_orbit(sys, p, horizon, dt)?;
                let vals: Vec<T> = (0..tr.len()).map(|k| f.eval_shape(sys, tr.position(k))).collect();
                let cum = cumulative_trapezoid(&vals, dt);
                Ok((tr, cum))
            })
            .collect::<Result<_>>()?;
        let (trajectories, integrals) = built.into_iter().unzip();
        Ok(OrbitBank {
            dt,
            offset: f.offset,
            trajectories,
            integrals,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn trajectory(&self, i: usize) -> &Trajectory<T> {
        &self.trajectories[i]
    }

    /// Integral of the shape part over `steps` samples.
    pub fn shape_integral(&self, i: usize, steps: usize) -> T {
        self.integrals[i][steps]
    }

    /// Integral of the constant part, `offset * steps * dt`.
    pub fn offset_integral(&self, steps: usize) -> T {
        self.offset * T::from_count(steps) * self.dt
    }

    /// Full `int_0^t f` with `t = steps * dt`.
    pub fn log_weight(&self, i: usize, steps: usize) -> T {
        self.integrals[i][steps] + self.offset_integral(steps)
    }

    /// Whether the sampled orbit keeps a positive speed throughout.
    pub fn is_regular(&self, i: usize) -> bool {
        self.trajectories[i].speeds().iter().all(|&v| v > T::zero())
    }
}

/// For each center, the elements in its ball together with the longest
/// horizon (in samples) for which they stay inside.
#[derive(Debug, Clone)]
pub struct BallLifetimes {
    pub variant: BallVariant,
    pub eps: f64,
    pub max_steps: usize,
    pub members: Vec<Vec<(u32, u32)>>,
}

impl BallLifetimes {
    /// Member lists at horizon `steps`.
    pub fn sets_at(&self, steps: usize) -> Vec<Vec<u32>> {
        self.members
            .iter()
            .map(|m| {
                m.iter()
                    .filter(|&&(_, l)| l as usize >= steps)
                    .map(|&(e, _)| e)
                    .collect()
            })
            .collect()
    }

    pub fn contains(&self, center: usize, element: u32, steps: usize) -> bool {
        self.members[center]
            .iter()
            .any(|&(e, l)| e == element && l as usize >= steps)
    }
}

/// Ball lifetimes of every `(center, element)` pair, skipping pairs already
/// apart at time 0.
#[allow(clippy::too_many_arguments)]
pub fn ball_lifetimes<T: Scalar>(
    sys: &SystemSpec<T>,
    bank: &OrbitBank<T>,
    centers: &[usize],
    elements: &[usize],
    variant: BallVariant,
    eps: T,
    max_steps: usize,
    band: &WarpBand<T>,
) -> Result<BallLifetimes> {
    let members = centers
        .par_iter()
        .map(|&c| {
            let x = bank.trajectory(c);
            let r0 = if variant.is_rescaled() { eps * x.speed(0) } else { eps };
            let mut out = Vec::new();
            for (k, &e) in elements.iter().enumerate() {
                let y = bank.trajectory(e);
                if !(sys.dist(x.position(0), y.position(0)) < r0) {
                    continue;
                }
                if let Some(l) = ball_lifetime_steps(variant, sys, x, y, max_steps, eps, band)? {
                    out.push((k as u32, l as u32));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BallLifetimes {
        variant,
        eps: eps.as_f64(),
        max_steps,
        members,
    })
}

/// A finite family of regular centers whose balls cover more than `1 - delta`
/// of the measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverSolution {
    pub variant: BallVariant,
    pub t: f64,
    pub eps: f64,
    pub delta: f64,
    pub method: CoverMode,
    /// Indices into the candidate pool.
    pub center_ids: Vec<usize>,
    #[serde(skip)]
    pub centers: Vec<Vec<f64>>,
    /// `log sum exp(int_0^t f)` over the centers.
    pub log_weight: f64,
    pub covered_mass: f64,
    /// Set when a cover found for a smaller ball variant was lighter.
    pub from_variant: Option<BallVariant>,
}

impl CoverSolution {
    pub fn size(&self) -> usize {
        self.center_ids.len()
    }
}

/// Measure atoms plus a candidate pool, integrated once to the largest horizon.
#[derive(Debug, Clone)]
pub struct MetricInstance<T> {
    bank: OrbitBank<T>,
    masses: Vec<f64>,
    atoms: Vec<usize>,
    candidates: Vec<usize>,
    dropped_candidates: usize,
    max_steps: usize,
    band: WarpBand<T>,
    dt: T,
}

/// Where cover centers come from.
#[derive(Debug, Clone)]
pub enum CandidatePool<T> {
    /// Evenly spaced atoms of the measure, at most this many.
    Atoms(usize),
    /// Explicit points.
    Points(Vec<Point<T>>),
}

/// Evenly spaced atom indices, skipping atoms on the singular set.
pub fn pool_indices<T: Scalar>(sys: &SystemSpec<T>, mu: &EmpiricalMeasure<T>, pool_size: usize) -> Vec<usize> {
    let regular: Vec<usize> = (0..mu.len())
        .filter(|&i| singular_distance(sys, &mu.point(i)) > T::zero())
        .collect();
    let k = pool_size.min(regular.len());
    (0..k).map(|j| regular[j * regular.len() / k]).collect()
}

impl<T: Scalar> MetricInstance<T> {
    /// Integrates atoms and candidates far enough for every horizon up to
    /// `t_max`, including the warp overhang.
    pub fn new(
        sys: &SystemSpec<T>,
        mu: &EmpiricalMeasure<T>,
        f: &PotentialSpec<T>,
        pool: CandidatePool<T>,
        t_max: T,
        dt: T,
        band: WarpBand<T>,
    ) -> Result<Self> {
        let max_steps = step_count(t_max, dt)?;
        let samples = max_steps + band.overhang_steps(max_steps, dt);
        let mut points = mu.points();
        let atoms: Vec<usize> = (0..mu.len()).collect();
        let raw_candidates: Vec<usize> = match pool {
            CandidatePool::Atoms(k) => pool_indices(sys, mu, k),
            CandidatePool::Points(extra) => {
                let start = points.len();
                points.extend(extra);
                (start..points.len()).collect()
            }
        };
        let bank = OrbitBank::build(sys, &points, f, samples, dt)?;
        let candidates: Vec<usize> = raw_candidates
            .iter()
            .copied()
            .filter(|&c| bank.is_regular(c) && singular_distance(sys, &bank.trajectory(c).start()) > T::zero())
            .collect();
        if candidates.is_empty() {
            return Err(PressureError::EstimationFailure("no regular candidate centers".into()));
        }
        Ok(MetricInstance {
            dropped_candidates: raw_candidates.len() - candidates.len(),
            bank,
            masses: mu.weights().iter().map(|w| w.as_f64()).collect(),
            atoms,
            candidates,
            max_steps,
            band,
            dt,
        })
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn dropped_candidates(&self) -> usize {
        self.dropped_candidates
    }

    pub fn bank(&self) -> &OrbitBank<T> {
        &self.bank
    }

    pub fn candidate_point(&self, id: usize) -> Point<T> {
        self.bank.trajectory(self.candidates[id]).start()
    }

    pub fn lifetimes(&self, sys: &SystemSpec<T>, variant: BallVariant, eps: T) -> Result<BallLifetimes> {
        ball_lifetimes(
            sys,
            &self.bank,
            &self.candidates,
            &self.atoms,
            variant,
            eps,
            self.max_steps,
            &self.band,
        )
    }

    /// Shape-only log-weights of all candidates at `steps`.
    fn shape_weights(&self, steps: usize) -> Vec<f64> {
        self.candidates
            .iter()
            .map(|&c| self.bank.shape_integral(c, steps).as_f64())
            .collect()
    }

    /// Cheapest cover found at horizon `t`. Covers in `incumbents` (built for
    /// smaller ball variants over the same pool) are re-checked against these
    /// balls and kept when lighter.
    pub fn cover(
        &self,
        life: &BallLifetimes,
        t: T,
        delta: T,
        mode: CoverMode,
        incumbents: &[&CoverSolution],
    ) -> Result<CoverSolution> {
        if !(delta > T::zero() && delta < T::one()) {
            return Err(PressureError::Range {
                value: delta.as_f64(),
                range: "(0, 1) for delta".into(),
            });
        }
        let steps = step_count(t, self.dt)?;
        if steps > self.max_steps {
            return Err(contract("horizon beyond the integrated range"));
        }
        let sets = life.sets_at(steps);
        let lw = self.shape_weights(steps);
        let problem = CoverProblem::new(&self.masses, &sets, &lw)?;
        let target = 1.0 - delta.as_f64();
        let mut pick = problem.solve(target, mode)?;
        let mut from_variant = None;
        for inc in incumbents {
            let covered = problem.covered_by(&inc.center_ids);
            let w = problem.log_weight_of(&inc.center_ids);
            if covered > target && w < pick.log_weight {
                pick = CoverPick {
                    chosen: inc.center_ids.clone(),
                    log_weight: w,
                    covered,
                };
                from_variant = Some(inc.from_variant.unwrap_or(inc.variant));
            }
        }
        let shift = self.bank.offset_integral(steps).as_f64();
        Ok(CoverSolution {
            variant: life.variant,
            t: t.as_f64(),
            eps: life.eps,
            delta: delta.as_f64(),
            method: mode,
            centers: pick
                .chosen
                .iter()
                .map(|&c| self.candidate_point(c).0.iter().map(|v| v.as_f64()).collect())
                .collect(),
            center_ids: pick.chosen,
            log_weight: pick.log_weight + shift,
            covered_mass: pick.covered,
            from_variant,
        })
    }
}

/// `N_i^mu(delta, t, eps, f)` over an explicit candidate list.
#[allow(clippy::too_many_arguments)]
pub fn metric_cover_value<T: Scalar>(
    sys: &SystemSpec<T>,
    mu: &EmpiricalMeasure<T>,
    f: &PotentialSpec<T>,
    variant: BallVariant,
    t: T,
    eps: T,
    delta: T,
    dt: T,
    candidates: &[Point<T>],
    mode: CoverMode,
    band: &WarpBand<T>,
) -> Result<CoverSolution> {
    if let Some(i) = candidates.iter().position(|c| !(singular_distance(sys, c) > T::zero())) {
        return Err(contract(format!("candidate {i} lies on the singular set")));
    }
    let inst = MetricInstance::new(sys, mu, f, CandidatePool::Points(candidates.to_vec()), t, dt, *band)?;
    if inst.dropped_candidates() > 0 {
        return Err(PressureError::SingularOrbit { index: 0 });
    }
    let life = inst.lifetimes(sys, variant, eps)?;
    inst.cover(&life, t, delta, mode, &[])
}

/// Which quantity a table row holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableMethod {
    Greedy,
    Exact,
    SpanningGreedy,
    SpanningExact,
    Separating,
}

impl TableMethod {
    pub fn label(self) -> &'static str {
        match self {
            TableMethod::Greedy => "greedy",
            TableMethod::Exact => "exact",
            TableMethod::SpanningGreedy => "spanning-greedy",
            TableMethod::SpanningExact => "spanning-exact",
            TableMethod::Separating => "separating",
        }
    }
}

impl fmt::Display for TableMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl From<CoverMode> for TableMethod {
    fn from(m: CoverMode) -> Self {
        match m {
            CoverMode::Greedy => TableMethod::Greedy,
            CoverMode::Exact => TableMethod::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureRow {
    pub variant: BallVariant,
    pub t: f64,
    pub eps: f64,
    /// Zero for topological rows.
    pub delta: f64,
    /// `(1/t) log N`.
    pub value: f64,
    pub log_value: f64,
    pub method: TableMethod,
    pub k_id: Option<usize>,
    pub fill_radius: Option<f64>,
    pub size: usize,
}

/// Least-squares slope of `log N` against `t` over the top half of the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Readoff {
    pub variant: BallVariant,
    pub eps: f64,
    pub delta: f64,
    pub method: TableMethod,
    pub slope: f64,
    pub t_used: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PressureTable {
    pub rows: Vec<PressureRow>,
    pub readoffs: Vec<Readoff>,
}

impl PressureTable {
    pub fn cell(
        &self,
        variant: BallVariant,
        t: f64,
        eps: f64,
        delta: f64,
        method: TableMethod,
    ) -> Option<&PressureRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.t == t && r.eps == eps && r.delta == delta && r.method == method)
    }

    pub fn readoff(&self, variant: BallVariant, eps: f64, delta: f64, method: TableMethod) -> Option<&Readoff> {
        self.readoffs
            .iter()
            .find(|r| r.variant == variant && r.eps == eps && r.delta == delta && r.method == method)
    }

    /// Appends one read-off per `(variant, eps, delta, method)` group.
    pub fn compute_readoffs(&mut self) {
        let mut keys: Vec<(BallVariant, f64, f64, TableMethod)> = Vec::new();
        for r in &self.rows {
            let key = (r.variant, r.eps, r.delta, r.method);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        self.readoffs = keys
            .into_iter()
            .map(|(variant, eps, delta, method)| {
                let mut pts: Vec<(f64, f64)> = self
                    .rows
                    .iter()
                    .filter(|r| r.variant == variant && r.eps == eps && r.delta == delta && r.method == method)
                    .map(|r| (r.t, r.log_value))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (t_used, slope) = readoff_slope(&pts);
                Readoff {
                    variant,
                    eps,
                    delta,
                    method,
                    slope,
                    t_used,
                }
            })
            .collect();
    }
}

/// Slope over the last `max(2, ceil(n/2))` points; a single point falls back
/// to `log N / t`.
pub fn readoff_slope(points: &[(f64, f64)]) -> (Vec<f64>, f64) {
    match points.len() {
        0 => (Vec::new(), f64::NAN),
        1 => (vec![points[0].0], points[0].1 / points[0].0),
        n => {
            let k = n.div_ceil(2).max(2);
            let tail = &points[n - k..];
            let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
            let slope = ls_slope(&xs, &ys).unwrap_or(f64::NAN);
            (xs, slope)
        }
    }
}

/// Grid and solver settings shared by metric tables.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGrid<T> {
    pub variants: Vec<BallVariant>,
    pub t_grid: Vec<T>,
    pub eps_grid: Vec<T>,
    pub deltas: Vec<T>,
    pub dt: T,
    pub pool_size: usize,
    pub band: WarpBand<T>,
    /// Exact mode is added automatically when the pool fits.
    pub greedy: bool,
}

impl<T: Scalar> MetricGrid<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [
            ("t_grid", &self.t_grid),
            ("eps_grid", &self.eps_grid),
            ("deltas", &self.deltas),
        ] {
            if g.is_empty() {
                return Err(contract(format!("{name} is empty")));
            }
            if g.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(contract(format!("{name} must be strictly increasing")));
            }
        }
        if self.variants.is_empty() {
            return Err(contract("no ball variants requested"));
        }
        for &t in &self.t_grid {
            step_count(t, self.dt)?;
        }
        Ok(())
    }
}

/// Distinct variants, each placed after its sub-variants.
pub(crate) fn ordered_variants(vs: &[BallVariant]) -> Vec<BallVariant> {
    let mut out: Vec<BallVariant> = Vec::new();
    for pass_base in [true, false] {
        for &v in vs {
            if v.sub_variants().is_empty() == pass_base && !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

/// `(1/t) log N_i^mu` on the grid, with slope read-offs per `(variant, eps, delta, method)`.
pub fn metric_pressure_table<T: Scalar>(
    sys: &SystemSpec<T>,
    mu: &EmpiricalMeasure<T>,
    f: &PotentialSpec<T>,
    grid: &MetricGrid<T>,
) -> Result<PressureTable> {
    grid.validate()?;
    let t_max = *grid.t_grid.last().expect("validated");
    let inst = MetricInstance::new(
        sys,
        mu,
        f,
        CandidatePool::Atoms(grid.pool_size),
        t_max,
        grid.dt,
        grid.band,
    )?;
    let mut modes = Vec::new();
    if grid.greedy {
        modes.push(CoverMode::Greedy);
    }
    if inst.candidate_count() <= EXACT_LIMIT {
        modes.push(CoverMode::Exact);
    }
    if modes.is_empty() {
        return Err(contract("greedy disabled and the pool is too large for exact search"));
    }
    let variants = ordered_variants(&grid.variants);
    let mut table = PressureTable::default();
    for &eps in &grid.eps_grid {
        let lives: Vec<BallLifetimes> = variants
            .iter()
            .map(|&v| inst.lifetimes(sys, v, eps))
            .collect::<Result<_>>()?;
        for &t in &grid.t_grid {
            for &delta in &grid.deltas {
                for &mode in &modes {
                    let mut done: Vec<CoverSolution> = Vec::new();
                    for (v, life) in variants.iter().zip(&lives) {
                        let inc: Vec<&CoverSolution> =
                            done.iter().filter(|s| v.sub_variants().contains(&s.variant)).collect();
                        let sol = inst.cover(life, t, delta, mode, &inc)?;
                        table.rows.push(PressureRow {
                            variant: *v,
                            t: t.as_f64(),
                            eps: eps.as_f64(),
                            delta: delta.as_f64(),
                            value: sol.log_weight / t.as_f64(),
                            log_value: sol.log_weight,
                            method: mode.into(),
                            k_id: None,
                            fill_radius: None,
                            size: sol.size(),
                        });
                        done.push(sol);
                    }
                }
            }
        }
    }
    table.compute_readoffs();
    Ok(table)
}

/// Lower estimate of the bounded-variation constant `gamma_{i,t}(f, eps)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaReport {
    pub variant: BallVariant,
    pub t: f64,
    pub eps: f64,
    pub centers: usize,
    pub admissible_pairs: usize,
    pub gamma: f64,
    pub gamma_over_t: f64,
    /// No perturbation landed in any ball; `gamma` is then 0.
    pub no_admissible_pairs: bool,
}

/// Perturbations tried per sampled center.
pub const GAMMA_PERTURBATIONS: usize = 16;

/// Samples `centers` regular points, perturbs each within its time-0 ball and
/// keeps the perturbations that stay in the `variant` ball for time `t`; the
/// estimate is the largest spread of `int_0^t f` over one ball.
#[allow(clippy::too_many_arguments)]
pub fn bounded_variation_gamma<T: Scalar>(
    sys: &SystemSpec<T>,
    f: &PotentialSpec<T>,
    variant: BallVariant,
    t: T,
    eps: T,
    dt: T,
    band: &WarpBand<T>,
    centers: usize,
    min_sing: T,
    seed: u64,
) -> Result<GammaReport> {
    if !matches!(variant, BallVariant::R2 | BallVariant::R3) {
        return Err(contract("the bounded-variation diagnostic is defined for R2 and R3"));
    }
    if centers < 50 {
        return Err(contract("at least 50 sampled centers are required"));
    }
    f.validate(sys)?;
    let steps = step_count(t, dt)?;
    let horizon = T::from_count(steps + band.overhang_steps(steps, dt)) * dt;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(centers);
    let mut attempts = 0usize;
    while xs.len() < centers {
        attempts += 1;
        if attempts > 1000 * centers {
            return Err(PressureError::DegenerateMeasure("no regular centers found".into()));
        }
        let x = sys.sample_uniform(&mut rng);
        if singular_distance(sys, &x) > min_sing {
            xs.push((x, rng.gen::<u64>()));
        }
    }
    let per_center: Vec<(usize, T)> = xs
        .par_iter()
        .map(|(x, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*s);
            let xt = integrate_orbit(sys, x, horizon, dt)?;
            let integral = |tr: &Trajectory<T>| -> T {
                let vals: Vec<T> = (0..=steps).map(|k| f.eval_shape(sys, tr.position(k))).collect();
                cumulative_trapezoid(&vals, dt)[steps]
            };
            let ix = integral(&xt);
            let (mut lo, mut hi) = (ix, ix);
            let mut admitted = 0;
            let r0 = eps * xt.speed(0);
            for _ in 0..GAMMA_PERTURBATIONS {
                let dir: Vec<f64> = (0..sys.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
                let r = r0 * T::lit(rng.gen::<f64>());
                let mut y: Vec<T> = x.0.iter().zip(&dir).map(|(&c, &d)| c + r * T::lit(d / len)).collect();
                if !sys.wrap_in_place(&mut y) {
                    continue;
                }
                let yt = match integrate_orbit(sys, &Point(y), horizon, dt) {
                    Ok(tr) => tr,
                    Err(PressureError::DomainEscape { .. }) => continue,
                    Err(e) => return Err(e),
                };
                if crate::warp::in_ball_steps(variant, sys, &xt, &yt, steps, eps, band)? {
                    admitted += 1;
                    let iy = integral(&yt);
                    lo = lo.min(iy);
                    hi = hi.max(iy);
                }
            }
            Ok((admitted, hi - lo))
        })
        .collect::<Result<_>>()?;
    let admissible_pairs: usize = per_center.iter().map(|p| p.0).sum();
    let gamma = per_center.iter().map(|p| p.1.as_f64()).fold(0.0, f64::max);
    Ok(GammaReport {
        variant,
        t: t.as_f64(),
        eps: eps.as_f64(),
        centers,
        admissible_pairs,
        gamma: if admissible_pairs == 0 { 0.0 } else { gamma },
        gamma_over_t: if admissible_pairs == 0 { 0.0 } else { gamma / t.as_f64() },
        no_admissible_pairs: admissible_pairs == 0,
    })
}

/// Settings for [`katok_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct KatokSpec<T> {
    pub variant: BallVariant,
    pub t_grid: Vec<T>,
    pub eps: T,
    pub delta: T,
    pub dt: T,
    pub pool_size: usize,
    /// Atoms of the measure used for covering (evenly spaced); 0 keeps all.
    pub cover_atoms: usize,
    pub band: WarpBand<T>,
    pub partition: Vec<usize>,
    pub tau: T,
    pub n: usize,
    pub probes: usize,
}

/// Both sides of `P_mu = h_mu(phi_1) + int f dmu` at finite scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatokReport {
    pub system: String,
    pub potential: String,
    pub variant: BallVariant,
    pub eps: f64,
    pub delta: f64,
    pub t_grid: Vec<f64>,
    pub metric_rows: Vec<PressureRow>,
    pub metric_readoff: f64,
    pub smb: SmbEstimate,
    pub potential_average: f64,
    pub analytic_average: Option<f64>,
    pub entropy_side: f64,
    pub difference: f64,
    pub transport_defect: f64,
    pub mean_log_speed: f64,
    pub slow_atoms: usize,
    pub partition: Vec<usize>,
    pub tau: f64,
    pub n: usize,
    pub atoms: usize,
    pub cover_atoms: usize,
}

/// Evenly spaced sub-measure with at most `count` atoms (0 keeps all).
pub fn thinned_measure<T: Scalar>(mu: &EmpiricalMeasure<T>, count: usize) -> Result<EmpiricalMeasure<T>> {
    if count == 0 || count >= mu.len() {
        return Ok(mu.clone());
    }
    let idx: Vec<usize> = (0..count).map(|j| j * mu.len() / count).collect();
    mu.restricted(&idx)
}

pub fn katok_check<T: Scalar>(
    sys: &SystemSpec<T>,
    mu: &EmpiricalMeasure<T>,
    f: &PotentialSpec<T>,
    spec: &KatokSpec<T>,
) -> Result<KatokReport> {
    let cover_mu = thinned_measure(mu, spec.cover_atoms)?;
    let grid = MetricGrid {
        variants: vec![spec.variant],
        t_grid: spec.t_grid.clone(),
        eps_grid: vec![spec.eps],
        deltas: vec![spec.delta],
        dt: spec.dt,
        pool_size: spec.pool_size,
        band: spec.band,
        greedy: true,
    };
    let table = metric_pressure_table(sys, &cover_mu, f, &grid)?;
    let method = if table.rows.iter().any(|r| r.method == TableMethod::Greedy) {
        TableMethod::Greedy
    } else {
        TableMethod::Exact
    };
    let metric_readoff = table
        .readoff(spec.variant, spec.eps.as_f64(), spec.delta.as_f64(), method)
        .map(|r| r.slope)
        .ok_or_else(|| PressureError::EstimationFailure("no read-off produced".into()))?;
    let partition = GridPartition::new(sys, &spec.partition)?;
    let smb = smb_entropy(sys, mu, &partition, spec.tau, spec.n, spec.dt, spec.probes)?;
    let potential_average = mu.average(|p| f.eval(sys, p)).as_f64();
    let entropy_side = smb.value + potential_average;
    let defect = transport_defect(sys, &cover_mu, &partition, spec.dt)?;
    let (mean_log_speed, slow_atoms) = log_speed_report(sys, &cover_mu);
    Ok(KatokReport {
        system: sys.name.clone(),
        potential: f.name.clone(),
        variant: spec.variant,
        eps: spec.eps.as_f64(),
        delta: spec.delta.as_f64(),
        t_grid: spec.t_grid.iter().map(|t| t.as_f64()).collect(),
        metric_rows: table.rows.iter().filter(|r| r.method == method).cloned().collect(),
        metric_readoff,
        smb,
        potential_average,
        analytic_average: f.analytic_space_average(sys).map(|v| v.as_f64()),
        entropy_side,
        difference: metric_readoff - entropy_side,
        transport_defect: defect,
        mean_log_speed,
        slow_atoms,
        partition: spec.partition.clone(),
        tau: spec.tau.as_f64(),
        n: spec.n,
        atoms: mu.len(),
        cover_atoms: cover_mu.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::uniform_measure;
    use crate::systems::make_linear_torus;

    fn lin() -> SystemSpec<f64> {
        make_linear_torus(&[1.0, 2f64.sqrt()]).unwrap()
    }

    #[test]
    fn orbit_integral_examples() {
        let sys = lin();
        let x = Point::from_f64(&[0.1, 0.3]);
        let c = orbit_integral(&sys, &x, &PotentialSpec::constant(2.5), 4.0, 0.5).unwrap();
        assert!((c - 10.0).abs() < 1e-12);
        assert_eq!(orbit_integral(&sys, &x, &PotentialSpec::zero(), 4.0, 0.5).unwrap(), 0.0);
        let s = orbit_integral(&sys, &x, &PotentialSpec::coordinate_sine(0), 100.0, 0.01).unwrap();
        assert!((s / 100.0).abs() < 0.02);
    }

    #[test]
    fn single_covering_candidate() {
        let sys = lin();
        let mu = uniform_measure(&sys, 30, 0.0, 2).unwrap();
        let band = WarpBand::default_for(0.5);
        let center = Point::from_f64(&[0.5, 0.5]);
        let sol = metric_cover_value(
            &sys,
            &mu,
            &PotentialSpec::zero(),
            BallVariant::R1,
            2.0,
            1.0,
            0.1,
            0.5,
            &[center],
            CoverMode::Greedy,
            &band,
        )
        .unwrap();
        assert_eq!(sol.size(), 1);
        assert_eq!(sol.log_weight, 0.0);
    }

    #[test]
    fn readoff_rules() {
        let (ts, s) = readoff_slope(&[(1.0, 1.0), (2.0, 5.0), (3.0, 7.0), (4.0, 9.0)]);
        assert_eq!(ts, vec![3.0, 4.0]);
        assert!((s - 2.0).abs() < 1e-12);
        let (_, s1) = readoff_slope(&[(4.0, 2.0)]);
        assert_eq!(s1, 0.5);
    }

    #[test]
    fn table_shift_and_delta_monotone() {
        let sys = lin();
        let mu = uniform_measure(&sys, 300, 0.0, 3).unwrap();
        let grid = MetricGrid {
            variants: vec![BallVariant::R1, BallVariant::R2],
            t_grid: vec![2.0, 4.0],
            eps_grid: vec![0.1],
            deltas: vec![0.05, 0.1, 0.2],
            dt: 0.5,
            pool_size: 100,
            band: WarpBand::default_for(0.5),
            greedy: true,
        };
        let base = metric_pressure_table(&sys, &mu, &PotentialSpec::zero(), &grid).unwrap();
        let shifted = metric_pressure_table(&sys, &mu, &PotentialSpec::constant(0.5), &grid).unwrap();
        for (a, b) in base.rows.iter().zip(&shifted.rows) {
            assert!((b.value - a.value - 0.5).abs() < 1e-12);
        }
        for v in [BallVariant::R1, BallVariant::R2] {
            for t in [2.0, 4.0] {
                let vals: Vec<f64> = [0.05, 0.1, 0.2]
                    .iter()
                    .map(|&d| base.cell(v, t, 0.1, d, TableMethod::Greedy).unwrap().log_value)
                    .collect();
                assert!(vals[0] >= vals[1] && vals[1] >= vals[2], "{vals:?}");
            }
        }
        for r in base.rows.iter().filter(|r| r.variant == BallVariant::R1) {
            let r2 = base.cell(BallVariant::R2, r.t, r.eps, r.delta, r.method).unwrap();
            assert!(r.log_value >= r2.log_value);
        }
    }

    #[test]
    fn gamma_vanishes_for_constants() {
        let sys = lin();
        let band = WarpBand::default_for(0.1);
        let g = bounded_variation_gamma(
            &sys,
            &PotentialSpec::constant(3.0),
            BallVariant::R2,
            5.0,
            0.05,
            0.1,
            &band,
            50,
            0.0,
            1,
        )
        .unwrap();
        assert_eq!(g.gamma, 0.0);
        assert!(g.admissible_pairs > 0);
    }
}
