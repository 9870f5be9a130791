//! Vector fields on flat spaces, fixed-step orbit integration, and the metrics
//! the Bowen-ball oracles are measured in.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, PressureError, Result};
use crate::scalar::Scalar;

/// Hyperbolic toral automorphism glued at the roof of the mapping torus.
pub const CAT_MATRIX: [[i64; 2]; 2] = [[2, 1], [1, 1]];
const CAT_INVERSE: [[i64; 2]; 2] = [[1, -1], [-1, 2]];

/// Ambient space carrying the flow.
#[derive(Debug, Clone, PartialEq)]
pub enum Space<T> {
    /// `[0,1)^d` with wrap-around in every coordinate.
    FlatTorus,
    /// Axis-aligned box; leaving it is reported as a domain escape.
    EuclideanBox { lower: Vec<T>, upper: Vec<T> },
    /// `T^2 x [0,1)` with `(p, 1) ~ (A p, 0)`, `A` = [`CAT_MATRIX`].
    MappingTorus,
}

impl<T> Space<T> {
    pub fn tag(&self) -> &'static str {
        match self {
            Space::FlatTorus => "flat-torus",
            Space::EuclideanBox { .. } => "euclidean-box",
            Space::MappingTorus => "mapping-torus",
        }
    }
}

/// A point in the chart of the owning [`SystemSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T>(pub Vec<T>);

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Point(coords)
    }

    pub fn from_f64(coords: &[f64]) -> Self {
        Point(coords.iter().map(|&c| T::lit(c)).collect())
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// `X`, written into the output slice.
pub type FieldFn<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;

/// A vector field on a compact (or trapped) space together with its singular set.
#[derive(Clone)]
pub struct SystemSpec<T> {
    pub name: String,
    pub dim: usize,
    pub space: Space<T>,
    field: Arc<FieldFn<T>>,
    pub singular_points: Vec<Point<T>>,
    pub lipschitz_hint: Option<T>,
}

impl<T: Scalar> fmt::Debug for SystemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("space", &self.space.tag())
            .field("singular_points", &self.singular_points.len())
            .finish()
    }
}

impl<T: Scalar> SystemSpec<T> {
    pub fn new<F>(name: &str, dim: usize, space: Space<T>, field: F) -> Self
    where
        F: Fn(&[T], &mut [T]) + Send + Sync + 'static,
    {
        SystemSpec {
            name: name.to_string(),
            dim,
            space,
            field: Arc::new(field),
            singular_points: Vec::new(),
            lipschitz_hint: None,
        }
    }

    pub fn with_singular_points(mut self, points: Vec<Point<T>>) -> Self {
        self.singular_points = points;
        self
    }

    pub fn with_lipschitz_hint(mut self, l: T) -> Self {
        self.lipschitz_hint = Some(l);
        self
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(contract(format!(
                "point of dimension {len} given to a {}-dimensional system",
                self.dim
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn field_into(&self, p: &[T], out: &mut [T]) {
        (self.field)(p, out)
    }

    #[inline]
    pub(crate) fn speed_at(&self, p: &[T]) -> T {
        let mut v = vec![T::zero(); self.dim];
        self.field_into(p, &mut v);
        norm(&v)
    }

    /// Maps raw coordinates into the canonical chart. Returns `false` when a box
    /// space was left.
    pub(crate) fn wrap_in_place(&self, p: &mut [T]) -> bool {
        match &self.space {
            Space::FlatTorus => {
                for c in p.iter_mut() {
                    *c = wrap_unit(*c);
                }
                true
            }
            Space::EuclideanBox { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&c, (&lo, &hi))| c >= lo && c <= hi),
            Space::MappingTorus => {
                let (mut x, mut y, mut s) = (p[0], p[1], p[2]);
                while s >= T::one() {
                    s -= T::one();
                    (x, y) = apply_int(&CAT_MATRIX, x, y);
                }
                while s < T::zero() {
                    s += T::one();
                    (x, y) = apply_int(&CAT_INVERSE, x, y);
                }
                p[0] = wrap_unit(x);
                p[1] = wrap_unit(y);
                p[2] = s;
                true
            }
        }
    }

    /// Canonical representative of `p`, failing for box spaces when outside.
    pub fn canonical(&self, p: &Point<T>) -> Result<Point<T>> {
        self.check_dim(p.dim())?;
        let mut c = p.0.clone();
        if !self.wrap_in_place(&mut c) {
            return Err(PressureError::DomainEscape { time: 0.0 });
        }
        Ok(Point(c))
    }

    /// Distance between two chart points; see [`distance`].
    #[inline]
    pub fn dist(&self, p: &[T], q: &[T]) -> T {
        match &self.space {
            Space::FlatTorus => {
                let mut acc = T::zero();
                for (&a, &b) in p.iter().zip(q) {
                    let d = torus_gap(a, b);
                    acc += d * d;
                }
                acc.sqrt()
            }
            Space::EuclideanBox { .. } => {
                let mut acc = T::zero();
                for (&a, &b) in p.iter().zip(q) {
                    acc += (a - b) * (a - b);
                }
                acc.sqrt()
            }
            Space::MappingTorus => mapping_torus_dist(p, q),
        }
    }

    /// Draws a point uniformly from the chart (box, torus or fundamental domain).
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Point<T> {
        match &self.space {
            Space::EuclideanBox { lower, upper } => Point(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(&lo, &hi)| lo + (hi - lo) * T::lit(rng.gen::<f64>()))
                    .collect(),
            ),
            _ => Point((0..self.dim).map(|_| T::lit(rng.gen::<f64>())).collect()),
        }
    }

    /// One classical fourth-order Runge-Kutta step in the unwrapped chart.
    pub(crate) fn rk4_step(&self, p: &mut [T], dt: T, scratch: &mut Rk4Scratch<T>) {
        let half = T::lit(0.5) * dt;
        let Rk4Scratch { k1, k2, k3, k4, tmp } = scratch;
        self.field_into(p, k1);
        for i in 0..p.len() {
            tmp[i] = p[i] + half * k1[i];
        }
        self.field_into(tmp, k2);
        for i in 0..p.len() {
            tmp[i] = p[i] + half * k2[i];
        }
        self.field_into(tmp, k3);
        for i in 0..p.len() {
            tmp[i] = p[i] + dt * k3[i];
        }
        self.field_into(tmp, k4);
        let sixth = dt / T::lit(6.0);
        let two = T::lit(2.0);
        for i in 0..p.len() {
            p[i] += sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
    }

    /// Advances `p` by `steps` RK4 steps of size `dt`, wrapping after each step.
    pub(crate) fn advance(&self, p: &mut [T], steps: usize, dt: T) -> Result<()> {
        let mut scratch = Rk4Scratch::new(self.dim);
        for k in 0..steps {
            self.rk4_step(p, dt, &mut scratch);
            if !self.wrap_in_place(p) {
                return Err(PressureError::DomainEscape {
                    time: (T::from_count(k + 1) * dt).as_f64(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) struct Rk4Scratch<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4Scratch<T> {
    pub(crate) fn new(dim: usize) -> Self {
        let z = vec![T::zero(); dim];
        Rk4Scratch {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

#[inline]
pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&c| c * c).sum::<T>().sqrt()
}

#[inline]
fn wrap_unit<T: Scalar>(c: T) -> T {
    let w = c - c.floor();
    // c slightly below an integer can round up to exactly 1
    if w >= T::one() {
        T::zero()
    } else {
        w
    }
}

#[inline]
fn torus_gap<T: Scalar>(a: T, b: T) -> T {
    let d = (a - b).abs();
    let d = d - d.floor();
    d.min(T::one() - d)
}

#[inline]
fn apply_int<T: Scalar>(m: &[[i64; 2]; 2], x: T, y: T) -> (T, T) {
    let c = |v: i64| T::lit(v as f64);
    (c(m[0][0]) * x + c(m[0][1]) * y, c(m[1][0]) * x + c(m[1][1]) * y)
}

/// Lift of a fundamental-domain point through `k` roof crossings:
/// `(A^k p, s - k)`.
#[inline]
fn lift<T: Scalar>(p: &[T], k: i32) -> (T, T, T) {
    match k {
        0 => (p[0], p[1], p[2]),
        1 => {
            let (x, y) = apply_int(&CAT_MATRIX, p[0], p[1]);
            (x, y, p[2] - T::one())
        }
        _ => {
            let (x, y) = apply_int(&CAT_INVERSE, p[0], p[1]);
            (x, y, p[2] + T::one())
        }
    }
}

fn mapping_torus_dist<T: Scalar>(p: &[T], q: &[T]) -> T {
    let mut best = T::infinity();
    // lift one point at a time; moving both through the roof would compare
    // A p with A q, and A is not an isometry
    for (kp, kq) in [(0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)] {
        let a = lift(p, kp);
        let b = lift(q, kq);
        let ds = (a.2 - b.2).abs();
        if ds >= best {
            continue;
        }
        let dx = torus_gap(a.0, b.0);
        let dy = torus_gap(a.1, b.1);
        best = best.min((dx * dx + dy * dy + ds * ds).sqrt());
    }
    best
}

/// A uniformly sampled orbit segment with cached speeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    dim: usize,
    dt: T,
    positions: Vec<T>,
    speeds: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    /// Builds a trajectory from explicit samples, recomputing the speeds from `sys`.
    pub fn from_samples(sys: &SystemSpec<T>, dt: T, samples: &[Point<T>]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(contract("a trajectory needs at least two samples"));
        }
        let mut positions = Vec::with_capacity(samples.len() * sys.dim);
        let mut speeds = Vec::with_capacity(samples.len());
        for s in samples {
            sys.check_dim(s.dim())?;
            positions.extend_from_slice(&s.0);
            speeds.push(sys.speed_at(&s.0));
        }
        Ok(Trajectory {
            dim: sys.dim,
            dt,
            positions,
            speeds,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples (`steps + 1`).
    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.len() - 1
    }

    pub fn duration(&self) -> T {
        T::from_count(self.last_index()) * self.dt
    }

    #[inline]
    pub fn position(&self, k: usize) -> &[T] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn point(&self, k: usize) -> Point<T> {
        Point(self.position(k).to_vec())
    }

    pub fn start(&self) -> Point<T> {
        self.point(0)
    }

    pub fn end(&self) -> Point<T> {
        self.point(self.last_index())
    }

    #[inline]
    pub fn speed(&self, k: usize) -> T {
        self.speeds[k]
    }

    pub fn speeds(&self) -> &[T] {
        &self.speeds
    }

    /// Prefix holding samples `0..=steps`.
    pub fn truncated(&self, steps: usize) -> Trajectory<T> {
        let n = (steps + 1).min(self.len());
        Trajectory {
            dim: self.dim,
            dt: self.dt,
            positions: self.positions[..n * self.dim].to_vec(),
            speeds: self.speeds[..n].to_vec(),
        }
    }
}

/// Number of `dt` steps in `t`, requiring `t` to be a multiple of `dt`.
pub fn step_count<T: Scalar>(t: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) || !(t >= T::zero()) || !t.is_finite() {
        return Err(contract(format!("need t >= 0 and dt > 0, got t={t}, dt={dt}")));
    }
    let ratio = t / dt;
    let steps = ratio.round();
    let tol = T::lit(1e-6).max(ratio.abs() * T::epsilon() * T::lit(16.0));
    if (ratio - steps).abs() > tol {
        return Err(contract(format!("t = {t} is not a multiple of dt = {dt}")));
    }
    steps
        .to_usize()
        .ok_or_else(|| contract(format!("step count for t = {t} out of range")))
}

/// `X(p)`.
pub fn evaluate_field<T: Scalar>(sys: &SystemSpec<T>, p: &Point<T>) -> Result<Vec<T>> {
    sys.check_dim(p.dim())?;
    let mut out = vec![T::zero(); sys.dim];
    sys.field_into(&p.0, &mut out);
    Ok(out)
}

/// Fixed-step RK4 orbit `phi_s(x0)` sampled at `s = 0, dt, ..., t`.
pub fn integrate_orbit<T: Scalar>(sys: &SystemSpec<T>, x0: &Point<T>, t: T, dt: T) -> Result<Trajectory<T>> {
    sys.check_dim(x0.dim())?;
    if dt > t {
        return Err(contract(format!("dt = {dt} exceeds t = {t}")));
    }
    if let Some(l) = sys.lipschitz_hint {
        if dt * l >= T::lit(0.1) {
            return Err(contract(format!(
                "dt = {dt} too coarse for Lipschitz bound {l} (need dt*L < 0.1)"
            )));
        }
    }
    let steps = step_count(t, dt)?;
    let mut p = x0.0.clone();
    if !sys.wrap_in_place(&mut p) {
        return Err(PressureError::DomainEscape { time: 0.0 });
    }
    let mut positions = Vec::with_capacity((steps + 1) * sys.dim);
    let mut speeds = Vec::with_capacity(steps + 1);
    let mut scratch = Rk4Scratch::new(sys.dim);
    let mut v = vec![T::zero(); sys.dim];
    for k in 0..=steps {
        if k > 0 {
            sys.rk4_step(&mut p, dt, &mut scratch);
            if !sys.wrap_in_place(&mut p) {
                return Err(PressureError::DomainEscape {
                    time: (T::from_count(k) * dt).as_f64(),
                });
            }
        }
        positions.extend_from_slice(&p);
        sys.field_into(&p, &mut v);
        speeds.push(norm(&v));
    }
    Ok(Trajectory {
        dim: sys.dim,
        dt,
        positions,
        speeds,
    })
}

/// Flat quotient metric on tori, Euclidean on boxes, and on the mapping torus the
/// minimum of the product metric over lifts through at most one roof crossing per
/// point.
pub fn distance<T: Scalar>(sys: &SystemSpec<T>, p: &Point<T>, q: &Point<T>) -> Result<T> {
    sys.check_dim(p.dim())?;
    sys.check_dim(q.dim())?;
    Ok(sys.dist(&p.0, &q.0))
}

/// Distance to the nearest declared singular point; `+inf` when there are none.
pub fn singular_distance<T: Scalar>(sys: &SystemSpec<T>, p: &Point<T>) -> T {
    sys.singular_points
        .iter()
        .map(|s| sys.dist(&p.0, &s.0))
        .fold(T::infinity(), T::min)
}

/// Sampled lower estimate of the Lipschitz constant of `X`.
///
/// Pairs are drawn with separations spread log-uniformly over four decades so that
/// the local (derivative-scale) ratios are reached as the sample count grows.
pub fn estimate_lipschitz<T: Scalar>(sys: &SystemSpec<T>, samples: usize, seed: u64) -> Result<T> {
    if samples < 2 {
        return Err(contract("estimate_lipschitz needs at least two samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = match &sys.space {
        Space::EuclideanBox { lower, upper } => lower
            .iter()
            .zip(upper)
            .map(|(&a, &b)| b - a)
            .fold(T::infinity(), T::min)
            .as_f64(),
        _ => 1.0,
    };
    let mut best = T::zero();
    let mut xp = vec![T::zero(); sys.dim];
    let mut xq = vec![T::zero(); sys.dim];
    for _ in 0..samples {
        let p = sys.sample_uniform(&mut rng);
        let r = scale * 10f64.powf(rng.gen_range(-4.0..-0.3));
        let dir: Vec<f64> = (0..sys.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
        let mut q: Vec<T> = p.0.iter().zip(&dir).map(|(&c, &d)| c + T::lit(r * d / len)).collect();
        if !sys.wrap_in_place(&mut q) {
            continue;
        }
        let d = sys.dist(&p.0, &q);
        if d <= T::zero() {
            continue;
        }
        sys.field_into(&p.0, &mut xp);
        sys.field_into(&q, &mut xq);
        let diff = xp.iter().zip(&xq).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
        best = best.max(diff / d);
    }
    Ok(best)
}
