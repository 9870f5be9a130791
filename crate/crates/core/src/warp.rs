//! Membership oracles for classical, reparametrized and rescaled Bowen balls.
//!
//! A time reparametrization on `[0, t]` is represented on the shared sample grid
//! as a monotone staircase of index pairs. One trajectory is *unwarped*: its
//! index advances through every sample `0..=steps`. The other is *warped*: it
//! starts at sample 0 and may end anywhere inside the band, which mirrors the
//! free right endpoint `alpha(t)` of a reparametrization.
//!
//! | variant        | warped | tube radius at pair `(i, j)` |
//! |----------------|--------|------------------------------|
//! | `Plain`        | none   | `eps`                        |
//! | `PlainReparam` | x      | `eps`                        |
//! | `R1`           | none   | `eps * |X(x_i)|`             |
//! | `R2`           | x      | `eps * |X(x_i)|`             |
//! | `R3`           | y      | `eps * |X(x_i)|`             |
//!
//! Pairs are always `(x index, y index)` with `x` the ball center.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, PressureError, Result};
use crate::flow_core::{integrate_orbit, step_count, Point, SystemSpec, Trajectory};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BallVariant {
    #[serde(rename = "PLAIN")]
    Plain,
    #[serde(rename = "PLAIN_REPARAM")]
    PlainReparam,
    R1,
    R2,
    R3,
}

impl BallVariant {
    pub const ALL: [BallVariant; 5] = [
        BallVariant::Plain,
        BallVariant::PlainReparam,
        BallVariant::R1,
        BallVariant::R2,
        BallVariant::R3,
    ];

    /// Radius scales with the center's flow speed.
    pub fn is_rescaled(self) -> bool {
        matches!(self, BallVariant::R1 | BallVariant::R2 | BallVariant::R3)
    }

    /// Membership needs a reparametrization search.
    pub fn is_warped(self) -> bool {
        matches!(self, BallVariant::PlainReparam | BallVariant::R2 | BallVariant::R3)
    }

    fn warps_center(self) -> bool {
        matches!(self, BallVariant::PlainReparam | BallVariant::R2)
    }

    pub fn label(self) -> &'static str {
        match self {
            BallVariant::Plain => "PLAIN",
            BallVariant::PlainReparam => "PLAIN_REPARAM",
            BallVariant::R1 => "R1",
            BallVariant::R2 => "R2",
            BallVariant::R3 => "R3",
        }
    }

    /// Variants whose balls are contained in this one's at equal parameters
    /// (through the identity warp).
    pub fn sub_variants(self) -> &'static [BallVariant] {
        match self {
            BallVariant::PlainReparam => &[BallVariant::Plain],
            BallVariant::R2 | BallVariant::R3 => &[BallVariant::R1],
            _ => &[],
        }
    }
}

impl fmt::Display for BallVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BallVariant {
    type Err = PressureError;

    fn from_str(s: &str) -> Result<Self> {
        BallVariant::ALL
            .into_iter()
            .find(|v| v.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| contract(format!("unknown ball variant '{s}'")))
    }
}

/// Admissible deviation `|alpha(s) - s| <= max(lambda s, lambda b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpBand<T> {
    pub lambda: T,
    pub b: T,
}

impl<T: Scalar> WarpBand<T> {
    pub fn new(lambda: T, b: T) -> Result<Self> {
        if !(lambda > T::zero() && lambda < T::one()) {
            return Err(PressureError::Range {
                value: lambda.as_f64(),
                range: "(0, 1) for lambda".into(),
            });
        }
        if !(b > T::zero()) {
            return Err(PressureError::Range {
                value: b.as_f64(),
                range: "(0, inf) for b".into(),
            });
        }
        Ok(WarpBand { lambda, b })
    }

    /// `lambda = 0.5`, `b = 10 dt`.
    pub fn default_for(dt: T) -> Self {
        WarpBand {
            lambda: T::lit(0.5),
            b: T::lit(10.0) * dt,
        }
    }

    pub fn half_width(&self, s: T) -> T {
        (self.lambda * s).max(self.lambda * self.b)
    }

    /// Half-width in samples at unwarped sample `u`.
    #[inline]
    pub fn half_width_steps(&self, u: usize, dt: T) -> usize {
        let s = T::from_count(u) * dt;
        let w = self.half_width(s) / dt + T::lit(1e-9);
        w.floor().to_usize().unwrap_or(usize::MAX)
    }

    /// Samples the warped trajectory needs beyond `steps`.
    pub fn overhang_steps(&self, steps: usize, dt: T) -> usize {
        self.half_width_steps(steps, dt)
    }
}

/// A monotone staircase alignment; pairs are `(x index, y index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpPath {
    pub pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    /// Every step moves by `(1,0)`, `(0,1)` or `(1,1)` and the path starts at the origin.
    pub fn is_staircase(&self) -> bool {
        self.pairs.first() == Some(&(0, 0))
            && self.pairs.windows(2).all(|w| {
                let (di, dj) = (w[1].0 as i64 - w[0].0 as i64, w[1].1 as i64 - w[0].1 as i64);
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }

    pub fn non_diagonal_steps(&self) -> usize {
        self.pairs
            .windows(2)
            .filter(|w| w[1].0 == w[0].0 || w[1].1 == w[0].1)
            .count()
    }
}

/// Reachability over the banded staircase lattice.
///
/// Rows `u = 0..=rows` index the unwarped trajectory, columns `w` the warped one
/// (`w <= max_col`). `band(u)` gives the inclusive admissible column range of a
/// row. A row is only scanned from the leftmost cell reachable from the row
/// below, and the scan stops one cell past the last reachable column, so the cost
/// follows the reachable region rather than the band. The identity alignment is
/// tried first, and plain feasibility queries use a diagonal-first depth-first
/// search that stops at the first cell of the last row.
///
/// Returns the path in `(u, w)` coordinates when `keep_path` is set, otherwise an
/// empty vector on success.
pub fn staircase_search<B, C>(
    rows: usize,
    max_col: usize,
    band: B,
    mut cell: C,
    keep_path: bool,
) -> Result<Option<Vec<(usize, usize)>>>
where
    B: Fn(usize) -> (usize, usize),
    C: FnMut(usize, usize) -> Result<bool>,
{
    if diagonal_holds(rows, max_col, &band, &mut cell)? {
        return Ok(Some(if keep_path {
            (0..=rows).map(|u| (u, u)).collect()
        } else {
            Vec::new()
        }));
    }
    if !keep_path {
        return Ok(depth_first(rows, max_col, &band, &mut cell)?.then(Vec::new));
    }
    let (last, history) = sweep(rows, max_col, band, cell, keep_path)?;
    if last != Some(rows) {
        return Ok(None);
    }
    if !keep_path {
        return Ok(Some(Vec::new()));
    }
    Ok(Some(backtrack(&history, rows)))
}

/// Last row (at most `rows`) holding a reachable cell, `None` when even `(0, 0)`
/// fails. Reachability of a row never depends on later rows, so this is the
/// longest horizon for which [`staircase_search`] succeeds.
pub fn staircase_reach<B, C>(rows: usize, max_col: usize, band: B, cell: C) -> Result<Option<usize>>
where
    B: Fn(usize) -> (usize, usize),
    C: FnMut(usize, usize) -> Result<bool>,
{
    let mut cell = cell;
    if diagonal_holds(rows, max_col, &band, &mut cell)? {
        return Ok(Some(rows));
    }
    Ok(sweep(rows, max_col, band, cell, false)?.0)
}

/// The identity alignment is tried first; when it stays in the band and the
/// tube, the sweep is unnecessary. This matters once both orbits sit still and the whole band is
/// reachable.
fn diagonal_holds<B, C>(rows: usize, max_col: usize, band: &B, cell: &mut C) -> Result<bool>
where
    B: Fn(usize) -> (usize, usize),
    C: FnMut(usize, usize) -> Result<bool>,
{
    if rows > max_col {
        return Ok(false);
    }
    for u in 0..=rows {
        let (lo, hi) = band(u);
        if u < lo || u > hi || !cell(u, u)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Depth-first search for any cell of row `rows`, trying diagonal moves first
/// and evaluating each cell at most once.
fn depth_first<B, C>(rows: usize, max_col: usize, band: &B, cell: &mut C) -> Result<bool>
where
    B: Fn(usize) -> (usize, usize),
    C: FnMut(usize, usize) -> Result<bool>,
{
    // visited flags per row over that row's band, allocated on first touch
    let mut seen: Vec<Option<(usize, Vec<u64>)>> = vec![None; rows + 1];
    let mut first_visit = |u: usize, w: usize| -> bool {
        let (lo, hi) = band(u);
        if w < lo || w > hi.min(max_col) {
            return false;
        }
        let (base, bits) = seen[u].get_or_insert_with(|| (lo, vec![0u64; (hi.min(max_col) - lo) / 64 + 1]));
        let k = w - *base;
        let mask = 1u64 << (k % 64);
        if bits[k / 64] & mask != 0 {
            return false;
        }
        bits[k / 64] |= mask;
        true
    };
    if !first_visit(0, 0) || !cell(0, 0)? {
        return Ok(false);
    }
    let mut stack = vec![(0usize, 0usize)];
    while let Some((u, w)) = stack.pop() {
        if u == rows {
            return Ok(true);
        }
        for (nu, nw) in [(u, w + 1), (u + 1, w), (u + 1, w + 1)] {
            if first_visit(nu, nw) && cell(nu, nw)? {
                stack.push((nu, nw));
            }
        }
    }
    Ok(false)
}

type Row = (usize, Vec<bool>);

fn sweep<B, C>(rows: usize, max_col: usize, band: B, mut cell: C, keep_rows: bool) -> Result<(Option<usize>, Vec<Row>)>
where
    B: Fn(usize) -> (usize, usize),
    C: FnMut(usize, usize) -> Result<bool>,
{
    // each stored row: (first column, reachable flags)
    let mut history: Vec<Row> = Vec::new();
    let (lo0, hi0) = band(0);
    if lo0 > 0 {
        return Ok((None, history));
    }
    let hi0 = hi0.min(max_col);
    let mut row0 = Vec::new();
    for w in 0..=hi0 {
        if cell(0, w)? {
            row0.push(true);
        } else {
            break;
        }
    }
    if row0.is_empty() {
        return Ok((None, history));
    }
    let mut prev: Row = (0, row0);
    for u in 1..=rows {
        let (blo, bhi) = band(u);
        let bhi = bhi.min(max_col);
        let (plo, ref pflags) = prev;
        let phi = plo + pflags.len() - 1;
        let prev_at = |w: usize| w >= plo && w <= phi && pflags[w - plo];
        let start = blo.max(plo);
        let mut flags: Vec<bool> = Vec::new();
        let mut first: Option<usize> = None;
        let mut left = false;
        let mut w = start;
        while w <= bhi {
            let from_below = prev_at(w) || (w > 0 && prev_at(w - 1));
            if w > phi + 1 && !left {
                break;
            }
            let reach = (from_below || left) && cell(u, w)?;
            if reach || first.is_some() {
                if first.is_none() {
                    first = Some(w);
                }
                flags.push(reach);
            }
            left = reach;
            w += 1;
        }
        // drop trailing unreachable cells
        while flags.last() == Some(&false) {
            flags.pop();
        }
        let Some(first) = first else {
            return Ok((Some(u - 1), history));
        };
        if flags.is_empty() {
            return Ok((Some(u - 1), history));
        }
        if keep_rows {
            history.push(std::mem::replace(&mut prev, (first, flags)));
        } else {
            prev = (first, flags);
        }
    }
    if keep_rows {
        history.push(prev);
    }
    Ok((Some(rows), history))
}

fn backtrack(history: &[Row], rows: usize) -> Vec<(usize, usize)> {
    let reach = |u: usize, w: usize| -> bool {
        let (lo, ref f) = history[u];
        w >= lo && w < lo + f.len() && f[w - lo]
    };
    // end cell closest to the diagonal
    let (lo, ref f) = history[rows];
    let mut end: Option<usize> = None;
    for (k, &r) in f.iter().enumerate() {
        if r {
            let w = lo + k;
            let better = match end {
                None => true,
                Some(e) => w.abs_diff(rows) < e.abs_diff(rows),
            };
            if better {
                end = Some(w);
            }
        }
    }
    let mut u = rows;
    let mut w = end.expect("last row has a reachable cell");
    let mut path = vec![(u, w)];
    while (u, w) != (0, 0) {
        if u > 0 && w > 0 && reach(u - 1, w - 1) {
            u -= 1;
            w -= 1;
        } else if u > 0 && reach(u - 1, w) {
            u -= 1;
        } else {
            w -= 1;
        }
        path.push((u, w));
    }
    path.reverse();
    path
}

fn check_pair<T: Scalar>(x: &Trajectory<T>, y: &Trajectory<T>) -> Result<()> {
    let tol = T::lit(1e-12) * x.dt().max(T::one());
    if (x.dt() - y.dt()).abs() > tol {
        return Err(contract(format!(
            "trajectories sampled with different steps ({} vs {})",
            x.dt(),
            y.dt()
        )));
    }
    if x.dim() != y.dim() {
        return Err(contract("trajectories of different dimension"));
    }
    Ok(())
}

#[inline]
fn tube_cell<T: Scalar>(
    variant: BallVariant,
    sys: &SystemSpec<T>,
    x: &Trajectory<T>,
    y: &Trajectory<T>,
    i: usize,
    j: usize,
    eps: T,
) -> Result<bool> {
    let radius = if variant.is_rescaled() {
        let v = x.speed(i);
        if v <= T::zero() {
            return Err(PressureError::SingularOrbit { index: i });
        }
        eps * v
    } else {
        eps
    };
    Ok(sys.dist(x.position(i), y.position(j)) < radius)
}

#[allow(clippy::too_many_arguments)]
fn warped_search<T: Scalar>(
    variant: BallVariant,
    sys: &SystemSpec<T>,
    x: &Trajectory<T>,
    y: &Trajectory<T>,
    steps: usize,
    eps: T,
    band: &WarpBand<T>,
    keep_path: bool,
) -> Result<Option<WarpPath>> {
    let dt = x.dt();
    let (unwarped, warped) = if variant.warps_center() { (y, x) } else { (x, y) };
    if unwarped.last_index() < steps {
        return Err(contract(format!(
            "horizon of {steps} steps exceeds the unwarped trajectory ({} samples)",
            unwarped.len()
        )));
    }
    let max_col = warped.last_index();
    let band_fn = |u: usize| {
        let hw = band.half_width_steps(u, dt);
        (u.saturating_sub(hw), u.saturating_add(hw))
    };
    let swap = variant.warps_center();
    let cell = |u: usize, w: usize| {
        let (i, j) = if swap { (w, u) } else { (u, w) };
        tube_cell(variant, sys, x, y, i, j, eps)
    };
    let found = staircase_search(steps, max_col, band_fn, cell, keep_path)?;
    Ok(found.map(|p| WarpPath {
        pairs: p.into_iter().map(|(u, w)| if swap { (w, u) } else { (u, w) }).collect(),
    }))
}

/// Membership of `y` in the `variant` ball of radius `eps` about `x`, over the
/// first `steps` samples. Warped variants may read up to
/// `band.overhang_steps(steps)` further samples of the warped trajectory when
/// available.
pub fn in_ball_steps<T: Scalar>(
    variant: BallVariant,
    sys: &SystemSpec<T>,
    x: &Trajectory<T>,
    y: &Trajectory<T>,
    steps: usize,
    eps: T,
    band: &WarpBand<T>,
) -> Result<bool> {
    check_pair(x, y)?;
    match variant {
        BallVariant::Plain | BallVariant::R1 => {
            if x.last_index() < steps || y.last_index() < steps {
                return Err(contract("horizon exceeds trajectory length"));
            }
            for k in 0..=steps {
                if !tube_cell(variant, sys, x, y, k, k, eps)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        _ => Ok(warped_search(variant, sys, x, y, steps, eps, band, false)?.is_some()),
    }
}

/// Longest horizon `k <= max_steps` (in samples) for which `y` lies in the
/// `variant` ball about `x`; `None` when `y` is outside already at time 0.
/// Membership is monotone in the horizon, so one sweep answers every `k`.
pub fn ball_lifetime_steps<T: Scalar>(
    variant: BallVariant,
    sys: &SystemSpec<T>,
    x: &Trajectory<T>,
    y: &Trajectory<T>,
    max_steps: usize,
    eps: T,
    band: &WarpBand<T>,
) -> Result<Option<usize>> {
    check_pair(x, y)?;
    match variant {
        BallVariant::Plain | BallVariant::R1 => {
            if x.last_index() < max_steps || y.last_index() < max_steps {
                return Err(contract("horizon exceeds trajectory length"));
            }
            for k in 0..=max_steps {
                if !tube_cell(variant, sys, x, y, k, k, eps)? {
                    return Ok(k.checked_sub(1));
                }
            }
            Ok(Some(max_steps))
        }
        _ => {
            let dt = x.dt();
            let swap = variant.warps_center();
            let (unwarped, warped) = if swap { (y, x) } else { (x, y) };
            if unwarped.last_index() < max_steps {
                return Err(contract("horizon exceeds the unwarped trajectory"));
            }
            let band_fn = |u: usize| {
                let hw = band.half_width_steps(u, dt);
                (u.saturating_sub(hw), u.saturating_add(hw))
            };
            let cell = |u: usize, w: usize| {
                let (i, j) = if swap { (w, u) } else { (u, w) };
                tube_cell(variant, sys, x, y, i, j, eps)
            };
            staircase_reach(max_steps, warped.last_index(), band_fn, cell)
        }
    }
}

/// [`in_ball_steps`] with the horizon given as a time.
pub fn in_ball<T: Scalar>(
    variant: BallVariant,
    sys: &SystemSpec<T>,
    x: &Trajectory<T>,
    y: &Trajectory<T>,
    t: T,
    eps: T,
    band: &WarpBand<T>,
) -> Result<bool> {
    check_pair(x, y)?;
    let steps = step_count(t, x.dt())?;
    in_ball_steps(variant, sys, x, y, steps, eps, band)
}

/// Witness alignment for a warped variant; `None` exactly when [`in_ball`] is false.
/// Ties prefer the diagonal step.
pub fn find_warp<T: Scalar>(
    variant: BallVariant,
    sys: &SystemSpec<T>,
    x: &Trajectory<T>,
    y: &Trajectory<T>,
    t: T,
    eps: T,
    band: &WarpBand<T>,
) -> Result<Option<WarpPath>> {
    if !variant.is_warped() {
        return Err(contract(format!("{variant} has no reparametrization to search")));
    }
    check_pair(x, y)?;
    let steps = step_count(t, x.dt())?;
    warped_search(variant, sys, x, y, steps, eps, band, true)
}

/// Outcome of the finite-scale `B3*(x,t) ⊆ B2*(x,(1-lambda)t)` check and its mirror.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InclusionReport {
    pub pairs: usize,
    pub t: f64,
    pub shortened_t: f64,
    pub eps: f64,
    pub lambda: f64,
    pub r1_members: usize,
    pub r2_members: usize,
    pub r3_members: usize,
    /// `y` in `B3*(x,t)` but not in `B2*(x,(1-lambda)t)`.
    pub violations_3_in_2: usize,
    /// `y` in `B2*(x,t)` but not in `B3*(x,(1-lambda)t)`.
    pub violations_2_in_3: usize,
    /// Smallest relative slack `1 - d/(eps |X|)` along the shortened-time witnesses.
    pub min_relative_margin: Option<f64>,
    pub mean_relative_margin: Option<f64>,
}

impl InclusionReport {
    pub fn violations(&self) -> usize {
        self.violations_3_in_2 + self.violations_2_in_3
    }
}

/// `count` pairs `(x, x + offset)` with `x` uniform and `|offset| < scale`,
/// keeping only centers at least `min_sing` from the singular set.
pub fn perturbed_pairs<T: Scalar>(
    sys: &SystemSpec<T>,
    count: usize,
    scale: f64,
    min_sing: f64,
    seed: u64,
) -> Vec<(Point<T>, Point<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < count * 1000 {
        attempts += 1;
        let x = sys.sample_uniform(&mut rng);
        if crate::flow_core::singular_distance(sys, &x).as_f64() < min_sing {
            continue;
        }
        let r = scale * rng.gen::<f64>();
        let dir: Vec<f64> = (0..sys.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
        let mut y: Vec<T> = x.0.iter().zip(&dir).map(|(&c, &d)| c + T::lit(r * d / len)).collect();
        if !sys.wrap_in_place(&mut y) {
            continue;
        }
        out.push((x, Point(y)));
    }
    out
}

/// Checks both time-shrunk inclusions on explicit pairs. Violations are data.
pub fn inclusion_check<T: Scalar>(
    sys: &SystemSpec<T>,
    pairs: &[(Point<T>, Point<T>)],
    t: T,
    eps: T,
    dt: T,
    band: &WarpBand<T>,
) -> Result<InclusionReport> {
    if !(t > band.b) {
        return Err(contract(format!("t = {t} must exceed b = {}", band.b)));
    }
    let steps = step_count(t, dt)?;
    let short_steps = ((T::one() - band.lambda) * T::from_count(steps))
        .floor()
        .to_usize()
        .unwrap_or(0);
    let horizon = T::from_count(steps + band.overhang_steps(steps, dt)) * dt;
    let mut rep = InclusionReport {
        pairs: pairs.len(),
        t: t.as_f64(),
        shortened_t: (T::from_count(short_steps) * dt).as_f64(),
        eps: eps.as_f64(),
        lambda: band.lambda.as_f64(),
        ..Default::default()
    };
    let mut margins = Vec::new();
    for (x, y) in pairs {
        let xt = integrate_orbit(sys, x, horizon, dt)?;
        let yt = integrate_orbit(sys, y, horizon, dt)?;
        if in_ball_steps(BallVariant::R1, sys, &xt, &yt, steps, eps, band)? {
            rep.r1_members += 1;
        }
        let in2 = in_ball_steps(BallVariant::R2, sys, &xt, &yt, steps, eps, band)?;
        let in3 = in_ball_steps(BallVariant::R3, sys, &xt, &yt, steps, eps, band)?;
        if in2 {
            rep.r2_members += 1;
            if !in_ball_steps(BallVariant::R3, sys, &xt, &yt, short_steps, eps, band)? {
                rep.violations_2_in_3 += 1;
            }
        }
        if in3 {
            rep.r3_members += 1;
            match warped_search(BallVariant::R2, sys, &xt, &yt, short_steps, eps, band, true)? {
                None => rep.violations_3_in_2 += 1,
                Some(path) => {
                    let m = path
                        .pairs
                        .iter()
                        .map(|&(i, j)| {
                            let d = sys.dist(xt.position(i), yt.position(j));
                            (T::one() - d / (eps * xt.speed(i))).as_f64()
                        })
                        .fold(f64::INFINITY, f64::min);
                    margins.push(m);
                }
            }
        }
    }
    if !margins.is_empty() {
        rep.min_relative_margin = Some(margins.iter().copied().fold(f64::INFINITY, f64::min));
        rep.mean_relative_margin = Some(margins.iter().sum::<f64>() / margins.len() as f64);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::make_linear_torus;

    fn circle() -> SystemSpec<f64> {
        make_linear_torus(&[1.0, 0.0]).unwrap()
    }

    #[test]
    fn lifetime_matches_membership() {
        let sys = crate::systems::make_sine_grid_torus::<f64>();
        let band = WarpBand::new(0.5, 0.5).unwrap();
        let pairs = perturbed_pairs(&sys, 30, 0.05, 0.1, 3);
        for (x, y) in &pairs {
            let xt = integrate_orbit(&sys, x, 2.0, 0.01).unwrap();
            let yt = integrate_orbit(&sys, y, 2.0, 0.01).unwrap();
            for v in BallVariant::ALL {
                let life = ball_lifetime_steps(v, &sys, &xt, &yt, 120, 0.3, &band).unwrap();
                for k in [0usize, 1, 5, 30, 80, 120] {
                    let inside = in_ball_steps(v, &sys, &xt, &yt, k, 0.3, &band).unwrap();
                    assert_eq!(inside, life.is_some_and(|l| l >= k), "{v} k={k}");
                }
            }
        }
    }

    #[test]
    fn variant_roundtrip_and_flags() {
        for v in BallVariant::ALL {
            assert_eq!(v.label().parse::<BallVariant>().unwrap(), v);
        }
        assert!("R4".parse::<BallVariant>().is_err());
        assert!(BallVariant::R2.is_warped() && !BallVariant::R1.is_warped());
    }

    #[test]
    fn band_geometry() {
        let b = WarpBand::new(0.5, 0.1).unwrap();
        assert_eq!(b.half_width(0.0), 0.05);
        assert_eq!(b.half_width(2.0), 1.0);
        assert_eq!(b.half_width_steps(200, 0.01), 100);
        assert!(WarpBand::new(1.0, 0.1).is_err());
        assert!(WarpBand::new(0.5, 0.0).is_err());
    }

    #[test]
    fn self_membership_every_variant() {
        let sys = make_linear_torus(&[1.0, 2f64.sqrt()]).unwrap();
        let tr = integrate_orbit(&sys, &Point::from_f64(&[0.1, 0.2]), 3.0, 0.05).unwrap();
        let band = WarpBand::default_for(0.05);
        for v in BallVariant::ALL {
            assert!(in_ball(v, &sys, &tr, &tr, 2.0, 1e-6, &band).unwrap(), "{v}");
        }
        let w = find_warp(BallVariant::R2, &sys, &tr, &tr, 2.0, 1e-6, &band)
            .unwrap()
            .unwrap();
        assert_eq!(w.non_diagonal_steps(), 0);
        assert_eq!(w.pairs.len(), 41);
    }

    #[test]
    fn constant_separation_under_translation() {
        // separation 0.05, radius 0.05 * sqrt 3
        let sys = make_linear_torus(&[1.0, 2f64.sqrt()]).unwrap();
        let x = integrate_orbit(&sys, &Point::from_f64(&[0.0, 0.0]), 2.0, 0.01).unwrap();
        let y = integrate_orbit(&sys, &Point::from_f64(&[0.05, 0.0]), 2.0, 0.01).unwrap();
        let direct = (0..x.len()).all(|k| sys.dist(x.position(k), y.position(k)) < 0.05 * x.speed(k));
        assert!(direct);
        let band = WarpBand::default_for(0.01);
        assert!(in_ball(BallVariant::R1, &sys, &x, &y, 2.0, 0.05, &band).unwrap());
        assert!(!in_ball(BallVariant::Plain, &sys, &x, &y, 2.0, 0.05, &band).unwrap());
        assert!(in_ball(BallVariant::Plain, &sys, &x, &y, 2.0, 0.05 * 3f64.sqrt(), &band).unwrap());
    }

    #[test]
    fn infeasible_tube_has_no_witness() {
        let sys = circle();
        let x = integrate_orbit(&sys, &Point::from_f64(&[0.0, 0.0]), 1.0, 0.1).unwrap();
        let y = integrate_orbit(&sys, &Point::from_f64(&[0.0, 0.3]), 1.0, 0.1).unwrap();
        let band = WarpBand::new(0.5, 1.0).unwrap();
        // every alignment keeps the second coordinate 0.3 apart
        assert!(find_warp(BallVariant::R3, &sys, &x, &y, 1.0, 0.29, &band)
            .unwrap()
            .is_none());
        assert!(find_warp(BallVariant::R3, &sys, &x, &y, 1.0, 0.31, &band)
            .unwrap()
            .is_some());
    }

    #[test]
    fn lagging_orbit_needs_one_non_diagonal_step() {
        let sys = circle();
        let dt = 0.1;
        let base = integrate_orbit(&sys, &Point::from_f64(&[0.0, 0.0]), 1.1, dt).unwrap();
        // y repeats x's first sample, then follows x one step late
        let mut ys = vec![base.point(0)];
        ys.extend((0..base.len() - 1).map(|k| base.point(k)));
        let y = Trajectory::from_samples(&sys, dt, &ys).unwrap();
        let x = base;
        let band = WarpBand::new(0.5, 1.0).unwrap();
        let eps = 0.05 * dt;
        assert!(!in_ball(BallVariant::R1, &sys, &x, &y, 0.9, eps, &band).unwrap());
        let w = find_warp(BallVariant::R3, &sys, &x, &y, 0.9, eps, &band)
            .unwrap()
            .unwrap();
        assert!(w.is_staircase());
        assert_eq!(w.non_diagonal_steps(), 1);
        assert_eq!(*w.pairs.last().unwrap(), (9, 10));
    }

    #[test]
    fn dt_mismatch_is_a_contract_error() {
        let sys = circle();
        let a = integrate_orbit(&sys, &Point::from_f64(&[0.0, 0.0]), 1.0, 0.1).unwrap();
        let b = integrate_orbit(&sys, &Point::from_f64(&[0.0, 0.0]), 1.0, 0.05).unwrap();
        let band = WarpBand::default_for(0.1);
        assert!(matches!(
            in_ball(BallVariant::R2, &sys, &a, &b, 1.0, 0.1, &band),
            Err(PressureError::Contract(_))
        ));
    }

    #[test]
    fn zero_speed_center_is_rejected() {
        let sys = crate::systems::make_sine_grid_torus::<f64>();
        let x = integrate_orbit(&sys, &Point::from_f64(&[0.0, 0.0]), 1.0, 0.01).unwrap();
        let band = WarpBand::default_for(0.01);
        assert!(matches!(
            in_ball(BallVariant::R1, &sys, &x, &x, 1.0, 0.1, &band),
            Err(PressureError::SingularOrbit { index: 0 })
        ));
        // the classical ball does not care
        assert!(in_ball(BallVariant::Plain, &sys, &x, &x, 1.0, 0.1, &band).unwrap());
    }

    #[test]
    fn dp_on_hand_made_mask() {
        // 10x10 lattice, only the cells on the superdiagonal w = u + 1 plus the origin
        let ok = |u: usize, w: usize| (u == 0 && w == 0) || w == u + 1;
        let band = |u: usize| (u.saturating_sub(3), u + 3);
        let p = staircase_search(9, 10, band, |u, w| Ok(ok(u, w)), true)
            .unwrap()
            .unwrap();
        assert_eq!(p.first(), Some(&(0, 0)));
        assert_eq!(p.last(), Some(&(9, 10)));
        assert_eq!(p.len(), 11);
        let none = staircase_search(9, 9, band, |u, w| Ok(ok(u, w) && w < 10), true).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn inclusion_on_identical_pairs() {
        let sys = make_linear_torus(&[1.0, 2f64.sqrt()]).unwrap();
        let p = Point::from_f64(&[0.3, 0.6]);
        let pairs = vec![(p.clone(), p)];
        let band = WarpBand::default_for(0.05);
        let rep = inclusion_check(&sys, &pairs, 2.0, 0.05, 0.05, &band).unwrap();
        assert_eq!(rep.violations(), 0);
        assert_eq!(rep.r3_members, 1);
        assert!(rep.r2_members >= rep.r1_members);
    }
}
