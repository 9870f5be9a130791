//! Rescaled topological pressure on finite samples of compact sets away from
//! the singular set: weighted spanning and separating sets, the
//! separating/spanning sandwich and the finite variational inequality.

use std::fmt;

use serde::Serialize;

use crate::ergodic::EmpiricalMeasure;
use crate::error::{contract, PressureError, Result};
use crate::flow_core::{estimate_lipschitz, singular_distance, step_count, Point, Space, SystemSpec};
use crate::pressure_metric::ordered_variants;
use crate::pressure_metric::{
    ball_lifetimes, BallLifetimes, CandidatePool, CoverMode, CoverProblem, CoverSolution, MetricInstance, OrbitBank,
    PotentialSpec, PressureRow, PressureTable, TableMethod, EXACT_LIMIT,
};
use crate::scalar::{log_sum_exp, Scalar};
use crate::warp::{BallVariant, WarpBand};

/// Finite stand-in for a compact set `K` avoiding the singular set.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSample<T> {
    points: Vec<Point<T>>,
    rho_sing: T,
    fill_radius: f64,
}

impl<T: Scalar> CompactSample<T> {
    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rho_sing(&self) -> T {
        self.rho_sing
    }

    /// Largest distance from a filtered source point to the selected sample.
    pub fn fill_radius(&self) -> f64 {
        self.fill_radius
    }
}

/// Regular lattice with `per_side` points per axis (tori only).
pub fn lattice_points<T: Scalar>(sys: &SystemSpec<T>, per_side: usize) -> Result<Vec<Point<T>>> {
    if matches!(sys.space, Space::EuclideanBox { .. }) {
        return Err(contract("lattice sources are only defined on tori"));
    }
    if per_side == 0 {
        return Err(contract("lattice needs at least one point per side"));
    }
    let total = per_side.pow(sys.dim as u32);
    Ok((0..total)
        .map(|mut code| {
            let mut c = vec![T::zero(); sys.dim];
            for slot in c.iter_mut().rev() {
                *slot = (T::from_count(code % per_side) + T::lit(0.5)) / T::from_count(per_side);
                code /= per_side;
            }
            Point(c)
        })
        .collect())
}

/// Keeps source points at least `rho_sing` from the singular set, then
/// subsamples to `max_points` by farthest-point selection starting at the
/// first kept point.
pub fn build_compact_sample<T: Scalar>(
    sys: &SystemSpec<T>,
    source: &[Point<T>],
    rho_sing: T,
    max_points: usize,
) -> Result<CompactSample<T>> {
    if !(rho_sing > T::zero()) {
        return Err(contract("rho_sing must be positive"));
    }
    if max_points == 0 {
        return Err(contract("max_points must be positive"));
    }
    let kept: Vec<Point<T>> = source
        .iter()
        .filter(|p| singular_distance(sys, p) >= rho_sing)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(PressureError::EmptyCompact);
    }
    let mut chosen = vec![0usize];
    let mut gap: Vec<T> = kept.iter().map(|p| sys.dist(&p.0, &kept[0].0)).collect();
    while chosen.len() < max_points.min(kept.len()) {
        let (far, &d) = gap
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .expect("nonempty");
        if !(d > T::zero()) {
            break;
        }
        chosen.push(far);
        for (g, p) in gap.iter_mut().zip(&kept) {
            *g = g.min(sys.dist(&p.0, &kept[far].0));
        }
    }
    let fill = gap.iter().fold(T::zero(), |a, &b| a.max(b)).as_f64();
    Ok(CompactSample {
        points: chosen.iter().map(|&i| kept[i].clone()).collect(),
        rho_sing,
        fill_radius: fill,
    })
}

/// A finite rescaled `(t, eps, K)`-spanning set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanningSolution {
    pub variant: BallVariant,
    pub t: f64,
    pub eps: f64,
    /// Indices into `K`.
    pub members: Vec<usize>,
    pub log_weight: f64,
    pub method: CoverMode,
    /// Set when a lighter spanning set from another construction was adopted.
    pub adopted: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InsertionOrder {
    WeightDesc,
    Input,
}

impl fmt::Display for InsertionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InsertionOrder::WeightDesc => "weight-desc",
            InsertionOrder::Input => "input",
        })
    }
}

/// A rescaled `(t, eps, K)`-separating set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatingSolution {
    pub variant: BallVariant,
    pub t: f64,
    pub eps: f64,
    pub members: Vec<usize>,
    pub log_weight: f64,
    pub maximal: bool,
    pub order: InsertionOrder,
}

/// `K` integrated once to the largest horizon.
#[derive(Debug, Clone)]
pub struct TopoInstance<T> {
    bank: OrbitBank<T>,
    all: Vec<usize>,
    max_steps: usize,
    band: WarpBand<T>,
    dt: T,
}

impl<T: Scalar> TopoInstance<T> {
    pub fn new(
        sys: &SystemSpec<T>,
        k: &CompactSample<T>,
        f: &PotentialSpec<T>,
        t_max: T,
        dt: T,
        band: WarpBand<T>,
    ) -> Result<Self> {
        let max_steps = step_count(t_max, dt)?;
        let samples = max_steps + band.overhang_steps(max_steps, dt);
        let bank = OrbitBank::build(sys, k.points(), f, samples, dt)?;
        if let Some(i) = (0..bank.len()).find(|&i| !bank.is_regular(i)) {
            return Err(PressureError::SingularOrbit { index: i });
        }
        Ok(TopoInstance {
            all: (0..bank.len()).collect(),
            bank,
            max_steps,
            band,
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    pub fn bank(&self) -> &OrbitBank<T> {
        &self.bank
    }

    pub fn lifetimes(&self, sys: &SystemSpec<T>, variant: BallVariant, eps: T) -> Result<BallLifetimes> {
        ball_lifetimes(
            sys,
            &self.bank,
            &self.all,
            &self.all,
            variant,
            eps,
            self.max_steps,
            &self.band,
        )
    }

    fn steps(&self, t: T) -> Result<usize> {
        let s = step_count(t, self.dt)?;
        if s > self.max_steps {
            return Err(contract("horizon beyond the integrated range"));
        }
        Ok(s)
    }

    fn shape_weights(&self, steps: usize) -> Vec<f64> {
        self.all
            .iter()
            .map(|&i| self.bank.shape_integral(i, steps).as_f64())
            .collect()
    }

    fn shift(&self, steps: usize) -> f64 {
        self.bank.offset_integral(steps).as_f64()
    }

    /// `log sum exp(int_0^t f)` over `members`.
    pub fn log_weight_of(&self, members: &[usize], t: T) -> Result<f64> {
        let steps = self.steps(t)?;
        let w = self.shape_weights(steps);
        let lw: Vec<f64> = members.iter().map(|&m| w[m]).collect();
        Ok(log_sum_exp(&lw) + self.shift(steps))
    }

    /// Whether every point of `K` lies in the ball of some member.
    pub fn spans(&self, life: &BallLifetimes, t: T, members: &[usize]) -> Result<bool> {
        let steps = self.steps(t)?;
        let sets = life.sets_at(steps);
        let mut hit = vec![false; self.len()];
        for &m in members {
            for &e in &sets[m] {
                hit[e as usize] = true;
            }
        }
        Ok(hit.into_iter().all(|h| h))
    }

    /// Greedy (or, for `|K| <= 18`, exact) weighted cover of all of `K`.
    /// `incumbents` are other spanning candidates, re-checked against these balls.
    pub fn spanning(
        &self,
        life: &BallLifetimes,
        t: T,
        mode: CoverMode,
        incumbents: &[(&str, &[usize])],
    ) -> Result<SpanningSolution> {
        let steps = self.steps(t)?;
        let sets = life.sets_at(steps);
        for (i, s) in sets.iter().enumerate() {
            if !s.contains(&(i as u32)) {
                return Err(PressureError::Invariant(format!(
                    "point {i} is missing from its own ball"
                )));
            }
        }
        let masses = vec![1.0; self.len()];
        let lw = self.shape_weights(steps);
        let problem = CoverProblem::new(&masses, &sets, &lw)?;
        let target = self.len() as f64 - 0.5;
        let pick = problem.solve(target, mode)?;
        let mut members = pick.chosen;
        let mut log_weight = pick.log_weight;
        let mut adopted = None;
        for (name, inc) in incumbents {
            if problem.covered_by(inc) > target {
                let w = problem.log_weight_of(inc);
                if w < log_weight {
                    log_weight = w;
                    members = inc.to_vec();
                    adopted = Some(name.to_string());
                }
            }
        }
        Ok(SpanningSolution {
            variant: life.variant,
            t: t.as_f64(),
            eps: life.eps,
            members,
            log_weight: log_weight + self.shift(steps),
            method: mode,
            adopted,
        })
    }

    /// Sequential insertion keeping mutual separation in both directions.
    pub fn separating(&self, life: &BallLifetimes, t: T, order: InsertionOrder) -> Result<SeparatingSolution> {
        let steps = self.steps(t)?;
        let n = self.len();
        let sets = life.sets_at(steps);
        let mut close = vec![vec![false; n]; n];
        for (i, s) in sets.iter().enumerate() {
            for &j in s {
                close[i][j as usize] = true;
                close[j as usize][i] = true;
            }
        }
        let w = self.shape_weights(steps);
        let mut seq: Vec<usize> = (0..n).collect();
        if order == InsertionOrder::WeightDesc {
            seq.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        }
        let mut members: Vec<usize> = Vec::new();
        for p in seq {
            if members.iter().all(|&m| !close[p][m]) {
                members.push(p);
            }
        }
        let lw: Vec<f64> = members.iter().map(|&m| w[m]).collect();
        Ok(SeparatingSolution {
            variant: life.variant,
            t: t.as_f64(),
            eps: life.eps,
            log_weight: log_sum_exp(&lw) + self.shift(steps),
            members,
            maximal: true,
            order,
        })
    }

    /// Both insertion orders; the heavier one first.
    pub fn separating_best(&self, life: &BallLifetimes, t: T) -> Result<(SeparatingSolution, SeparatingSolution)> {
        let a = self.separating(life, t, InsertionOrder::WeightDesc)?;
        let b = self.separating(life, t, InsertionOrder::Input)?;
        Ok(if b.log_weight > a.log_weight { (b, a) } else { (a, b) })
    }

    /// Whether `members` is separating at horizon `t` for these balls.
    pub fn is_separating(&self, life: &BallLifetimes, t: T, members: &[usize]) -> Result<bool> {
        let steps = self.steps(t)?;
        for &a in members {
            for &b in members {
                if a != b && life.contains(a, b as u32, steps) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// `1 / (2 L)` with `L` a sampled Lipschitz estimate: below this scale speeds at
/// `d(x, y) < c |X(x)|` stay within a factor 2.
pub fn comparability_scale<T: Scalar>(sys: &SystemSpec<T>, samples: usize, seed: u64) -> Result<f64> {
    let l = match sys.lipschitz_hint {
        Some(l) => l.as_f64(),
        None => estimate_lipschitz(sys, samples, seed)?.as_f64(),
    };
    Ok(if l > 0.0 { 0.5 / l } else { f64::INFINITY })
}

/// One `eps` of the sandwich check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichRow {
    pub eps: f64,
    pub t: f64,
    /// `log N*_i` at `eps` for R1, R2, R3.
    pub spanning: [f64; 3],
    /// `log Z*_i` at `eps` for R1, R2, R3 (lower bounds).
    pub separating: [f64; 3],
    /// `log Z*_1` at `eps / 2`.
    pub separating_half: f64,
    /// Points of `K` left uncovered at radius `eps` by each maximal
    /// R1-`(t, eps/2)` separating set (both insertion orders).
    pub half_uncovered: [usize; 2],
    pub order_violations: usize,
    pub sandwich_violations: usize,
    /// `log Z*_1(eps/2) - log N*_1(eps)`.
    pub sandwich_margin: f64,
    pub above_comparability: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub points: usize,
    pub fill_radius: f64,
    pub comparability: f64,
    pub rows: Vec<SandwichRow>,
    /// The time-shrunk orderings need `t` large against `lambda`; they are not asserted here.
    pub note: String,
}

impl SandwichReport {
    pub fn violations(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.half_uncovered[0] + r.half_uncovered[1] + r.order_violations + r.sandwich_violations)
            .sum()
    }
}

const VARIANTS: [BallVariant; 3] = [BallVariant::R1, BallVariant::R2, BallVariant::R3];

#[allow(clippy::too_many_arguments)]
pub fn sandwich_check<T: Scalar>(
    sys: &SystemSpec<T>,
    k: &CompactSample<T>,
    f: &PotentialSpec<T>,
    t: T,
    eps_grid: &[T],
    dt: T,
    band: WarpBand<T>,
    seed: u64,
) -> Result<SandwichReport> {
    if eps_grid.is_empty() {
        return Err(contract("eps grid is empty"));
    }
    let inst = TopoInstance::new(sys, k, f, t, dt, band)?;
    let comparability = comparability_scale(sys, 2000, seed)?;
    let mode = if inst.len() <= EXACT_LIMIT {
        CoverMode::Exact
    } else {
        CoverMode::Greedy
    };
    let mut rows = Vec::new();
    for &eps in eps_grid {
        let half = inst.lifetimes(sys, BallVariant::R1, eps / T::lit(2.0))?;
        let lives: Vec<BallLifetimes> = VARIANTS
            .iter()
            .map(|&v| inst.lifetimes(sys, v, eps))
            .collect::<Result<_>>()?;
        let (sep_a, sep_b) = inst.separating_best(&half, t)?;
        let mut half_uncovered = [0usize; 2];
        for (slot, e) in half_uncovered.iter_mut().zip([&sep_a, &sep_b]) {
            let sets = lives[0].sets_at(step_count(t, dt)?);
            let mut hit = vec![false; inst.len()];
            for &m in &e.members {
                for &x in &sets[m] {
                    hit[x as usize] = true;
                }
            }
            *slot = hit.iter().filter(|h| !**h).count();
        }
        // spanning: R1 may adopt the separating set, R2/R3 may adopt R1's cover
        let span1 = inst.spanning(
            &lives[0],
            t,
            mode,
            &[("half-separating", &sep_a.members), ("half-separating", &sep_b.members)],
        )?;
        let span2 = inst.spanning(&lives[1], t, mode, &[("R1", &span1.members)])?;
        let span3 = inst.spanning(&lives[2], t, mode, &[("R1", &span1.members)])?;
        // separating: R2/R3-separating sets are R1-separating
        let seps: Vec<SeparatingSolution> = lives
            .iter()
            .map(|l| inst.separating_best(l, t).map(|p| p.0))
            .collect::<Result<_>>()?;
        let mut z1 = seps[0].log_weight;
        for s in &seps[1..] {
            if inst.is_separating(&lives[0], t, &s.members)? {
                z1 = z1.max(s.log_weight);
            }
        }
        let spanning = [span1.log_weight, span2.log_weight, span3.log_weight];
        let separating = [z1, seps[1].log_weight, seps[2].log_weight];
        let tol = 1e-12;
        let order_violations = [
            spanning[0] + tol < spanning[1],
            spanning[0] + tol < spanning[2],
            separating[0] + tol < separating[1],
            separating[0] + tol < separating[2],
        ]
        .iter()
        .filter(|v| **v)
        .count();
        let separating_half = sep_a.log_weight;
        let sandwich_violations = usize::from(spanning[0] > separating_half + tol);
        rows.push(SandwichRow {
            eps: eps.as_f64(),
            t: t.as_f64(),
            spanning,
            separating,
            separating_half,
            half_uncovered,
            order_violations,
            sandwich_violations,
            sandwich_margin: separating_half - spanning[0],
            above_comparability: eps.as_f64() >= comparability,
        });
    }
    Ok(SandwichReport {
        points: k.len(),
        fill_radius: k.fill_radius(),
        comparability,
        rows,
        note: "orderings compared at equal t; the (1 - lambda) t shrink is not applied".into(),
    })
}

/// Grid for topological tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoGrid<T> {
    pub variants: Vec<BallVariant>,
    pub t_grid: Vec<T>,
    pub eps_grid: Vec<T>,
    pub dt: T,
    pub band: WarpBand<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopoTable {
    /// Maximum over the `K` family per cell; `k_id` names the maximizer.
    pub table: PressureTable,
    pub per_k: Vec<PressureRow>,
}

/// Spanning and separating values for every `K`, cell-wise maximum over the family.
pub fn topo_pressure_table<T: Scalar>(
    sys: &SystemSpec<T>,
    family: &[CompactSample<T>],
    f: &PotentialSpec<T>,
    grid: &TopoGrid<T>,
) -> Result<TopoTable> {
    if family.is_empty() {
        return Err(PressureError::EmptyCompact);
    }
    if grid.t_grid.is_empty() || grid.eps_grid.is_empty() || grid.variants.is_empty() {
        return Err(contract("topological grid is empty"));
    }
    for g in [&grid.t_grid, &grid.eps_grid] {
        if g.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(contract("grids must be strictly increasing"));
        }
    }
    let t_max = *grid.t_grid.last().expect("nonempty");
    // one solver for the whole family keeps the method column uniform
    let mode = if family.iter().all(|k| k.len() <= EXACT_LIMIT) {
        CoverMode::Exact
    } else {
        CoverMode::Greedy
    };
    let span_method = match mode {
        CoverMode::Exact => TableMethod::SpanningExact,
        CoverMode::Greedy => TableMethod::SpanningGreedy,
    };
    let variants = ordered_variants(&grid.variants);
    let mut per_k = Vec::new();
    for (kid, k) in family.iter().enumerate() {
        let inst = TopoInstance::new(sys, k, f, t_max, grid.dt, grid.band)?;
        for &eps in &grid.eps_grid {
            let lives: Vec<BallLifetimes> = variants
                .iter()
                .map(|&v| inst.lifetimes(sys, v, eps))
                .collect::<Result<_>>()?;
            for &t in &grid.t_grid {
                let mut spans: Vec<(BallVariant, Vec<usize>)> = Vec::new();
                for (&v, life) in variants.iter().zip(&lives) {
                    let inc: Vec<(&str, &[usize])> = spans
                        .iter()
                        .filter(|(w, _)| v.sub_variants().contains(w))
                        .map(|(w, m)| (w.label(), m.as_slice()))
                        .collect();
                    let span = inst.spanning(life, t, mode, &inc)?;
                    let (sep, _) = inst.separating_best(life, t)?;
                    for (value, method, size) in [
                        (span.log_weight, span_method, span.members.len()),
                        (sep.log_weight, TableMethod::Separating, sep.members.len()),
                    ] {
                        per_k.push(PressureRow {
                            variant: v,
                            t: t.as_f64(),
                            eps: eps.as_f64(),
                            delta: 0.0,
                            value: value / t.as_f64(),
                            log_value: value,
                            method,
                            k_id: Some(kid),
                            fill_radius: Some(k.fill_radius()),
                            size,
                        });
                    }
                    spans.push((v, span.members));
                }
            }
        }
    }
    let mut table = PressureTable::default();
    for r in &per_k {
        let slot = table
            .rows
            .iter_mut()
            .find(|q| q.variant == r.variant && q.t == r.t && q.eps == r.eps && q.method == r.method);
        match slot {
            Some(q) if r.log_value > q.log_value => *q = r.clone(),
            Some(_) => {}
            None => table.rows.push(r.clone()),
        }
    }
    table.compute_readoffs();
    Ok(TopoTable { table, per_k })
}

/// Finite comparison of metric and topological values for one measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalRow {
    pub measure: usize,
    pub t: f64,
    pub eps: f64,
    pub delta: f64,
    /// Greedy cover of the measure alone.
    pub metric_raw: f64,
    /// Lightest cover found, including the spanning set of its support.
    pub metric: f64,
    /// `log N*_1` on the support.
    pub topological: f64,
    pub support_mass: f64,
    pub applicable: bool,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalReport {
    pub rows: Vec<VariationalRow>,
    /// Read-offs `(eps, metric slope per measure, topological slope)`.
    pub metric_readoffs: Vec<(usize, f64, f64)>,
    pub topo_readoffs: Vec<(f64, f64)>,
    pub violations: usize,
}

/// Settings for [`variational_gap`].
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalGrid<T> {
    pub t_grid: Vec<T>,
    pub eps_grid: Vec<T>,
    pub delta: T,
    pub dt: T,
    pub band: WarpBand<T>,
    pub rho_sing: T,
}

/// Compares `log N_1^mu(delta, t, eps)` with `log N*_{1,t}(eps, K)` where `K` is
/// the regular support of each measure and both use `K` as the candidate pool.
/// `extra` compact sets only enter the topological side.
pub fn variational_gap<T: Scalar>(
    sys: &SystemSpec<T>,
    measures: &[EmpiricalMeasure<T>],
    extra: &[CompactSample<T>],
    f: &PotentialSpec<T>,
    grid: &VariationalGrid<T>,
) -> Result<VariationalReport> {
    if grid.t_grid.is_empty() || grid.eps_grid.is_empty() {
        return Err(contract("variational grid is empty"));
    }
    let t_max = *grid.t_grid.last().expect("nonempty");
    let mut rows = Vec::new();
    let mut topo_best: Vec<((f64, f64), f64)> = Vec::new();
    let mut note_topo = |t: f64, eps: f64, v: f64| match topo_best.iter_mut().find(|e| e.0 == (t, eps)) {
        Some(e) => e.1 = e.1.max(v),
        None => topo_best.push(((t, eps), v)),
    };
    for (mid, mu) in measures.iter().enumerate() {
        let support: Vec<Point<T>> = (0..mu.len())
            .map(|i| mu.point(i))
            .filter(|p| singular_distance(sys, p) >= grid.rho_sing)
            .collect();
        if support.is_empty() {
            return Err(PressureError::EmptyCompact);
        }
        let support_mass: f64 = (0..mu.len())
            .filter(|&i| singular_distance(sys, &mu.point(i)) >= grid.rho_sing)
            .map(|i| mu.weight(i).as_f64())
            .sum();
        let k = CompactSample {
            fill_radius: 0.0,
            rho_sing: grid.rho_sing,
            points: support.clone(),
        };
        let topo = TopoInstance::new(sys, &k, f, t_max, grid.dt, grid.band)?;
        let metric = MetricInstance::new(sys, mu, f, CandidatePool::Points(support), t_max, grid.dt, grid.band)?;
        let applicable = support_mass > 1.0 - grid.delta.as_f64();
        for &eps in &grid.eps_grid {
            let span_life = topo.lifetimes(sys, BallVariant::R1, eps)?;
            let cover_life = metric.lifetimes(sys, BallVariant::R1, eps)?;
            for &t in &grid.t_grid {
                let span = topo.spanning(&span_life, t, CoverMode::Greedy, &[])?;
                note_topo(t.as_f64(), eps.as_f64(), span.log_weight);
                let raw = metric.cover(&cover_life, t, grid.delta, CoverMode::Greedy, &[])?;
                let as_cover = CoverSolution {
                    center_ids: span.members.clone(),
                    ..raw.clone()
                };
                let best = if applicable {
                    metric.cover(&cover_life, t, grid.delta, CoverMode::Greedy, &[&as_cover])?
                } else {
                    raw.clone()
                };
                rows.push(VariationalRow {
                    measure: mid,
                    t: t.as_f64(),
                    eps: eps.as_f64(),
                    delta: grid.delta.as_f64(),
                    metric_raw: raw.log_weight,
                    metric: best.log_weight,
                    topological: span.log_weight,
                    support_mass,
                    applicable,
                    violation: applicable && best.log_weight > span.log_weight + 1e-12,
                });
            }
        }
    }
    for k in extra {
        let inst = TopoInstance::new(sys, k, f, t_max, grid.dt, grid.band)?;
        for &eps in &grid.eps_grid {
            let life = inst.lifetimes(sys, BallVariant::R1, eps)?;
            for &t in &grid.t_grid {
                let span = inst.spanning(&life, t, CoverMode::Greedy, &[])?;
                note_topo(t.as_f64(), eps.as_f64(), span.log_weight);
            }
        }
    }
    let slope = |pts: Vec<(f64, f64)>| crate::pressure_metric::readoff_slope(&pts).1;
    let mut metric_readoffs = Vec::new();
    for mid in 0..measures.len() {
        for &eps in &grid.eps_grid {
            let e = eps.as_f64();
            let pts = rows
                .iter()
                .filter(|r| r.measure == mid && r.eps == e)
                .map(|r| (r.t, r.metric))
                .collect();
            metric_readoffs.push((mid, e, slope(pts)));
        }
    }
    let topo_readoffs = grid
        .eps_grid
        .iter()
        .map(|&eps| {
            let e = eps.as_f64();
            let pts = topo_best
                .iter()
                .filter(|x| x.0 .1 == e)
                .map(|x| (x.0 .0, x.1))
                .collect();
            (e, slope(pts))
        })
        .collect();
    let violations = rows.iter().filter(|r| r.violation).count();
    Ok(VariationalReport {
        rows,
        metric_readoffs,
        topo_readoffs,
        violations,
    })
}
