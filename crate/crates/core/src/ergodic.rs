//! Empirical measures, Birkhoff averages, grid partitions, itinerary (SMB)
//! entropy estimates and Hamming-ball combinatorics on symbol words.

use std::collections::HashMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{contract, PressureError, Result};
use crate::flow_core::{integrate_orbit, singular_distance, Point, Space, SystemSpec};
use crate::scalar::{cumulative_trapezoid, log_sum_exp, Scalar};

/// Atoms closer than this to a declared singular point are dropped from
/// orbit-generated measures.
pub const SINGULAR_ATOM_TOL: f64 = 1e-9;

/// A probability measure supported on finitely many weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    dim: usize,
    coords: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> EmpiricalMeasure<T> {
    /// Weights are normalized to sum to one; they must all be positive.
    pub fn new(points: &[Point<T>], weights: &[T]) -> Result<Self> {
        if points.is_empty() {
            return Err(PressureError::DegenerateMeasure("no atoms".into()));
        }
        if points.len() != weights.len() {
            return Err(contract("one weight per atom required"));
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(contract("atoms of mixed dimension"));
        }
        if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(PressureError::DegenerateMeasure("non-positive atom weight".into()));
        }
        let total: T = weights.iter().copied().sum();
        Ok(EmpiricalMeasure {
            dim,
            coords: points.iter().flat_map(|p| p.0.iter().copied()).collect(),
            weights: weights.iter().map(|&w| w / total).collect(),
        })
    }

    pub fn uniform(points: &[Point<T>]) -> Result<Self> {
        let w = vec![T::one(); points.len()];
        Self::new(points, &w)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn atom(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point(&self, i: usize) -> Point<T> {
        Point(self.atom(i).to_vec())
    }

    pub fn points(&self) -> Vec<Point<T>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Integral of `f` against the measure.
    pub fn average<F: Fn(&[T]) -> T>(&self, f: F) -> T {
        (0..self.len()).map(|i| self.weights[i] * f(self.atom(i))).sum()
    }

    /// Drops atoms within `tol` of a singular point and renormalizes.
    pub fn without_singular(&self, sys: &SystemSpec<T>, tol: T) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| singular_distance(sys, &self.point(i)) > tol)
            .collect();
        if keep.is_empty() {
            return Err(PressureError::DegenerateMeasure(
                "every atom sits on the singular set".into(),
            ));
        }
        let pts: Vec<Point<T>> = keep.iter().map(|&i| self.point(i)).collect();
        let w: Vec<T> = keep.iter().map(|&i| self.weights[i]).collect();
        Self::new(&pts, &w)
    }

    /// Merges atoms with bit-identical coordinates, keeping first-seen order.
    pub fn collapsed(&self) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut pts: Vec<Point<T>> = Vec::new();
        let mut w: Vec<T> = Vec::new();
        for i in 0..self.len() {
            let key: Vec<u64> = self.atom(i).iter().map(|c| c.as_f64().to_bits()).collect();
            match index.get(&key) {
                Some(&k) => w[k] += self.weights[i],
                None => {
                    index.insert(key, pts.len());
                    pts.push(self.point(i));
                    w.push(self.weights[i]);
                }
            }
        }
        Self::new(&pts, &w).expect("collapsing keeps positive weights")
    }

    /// Restriction to the atoms with the given indices, renormalized.
    pub fn restricted(&self, indices: &[usize]) -> Result<Self> {
        let pts: Vec<Point<T>> = indices.iter().map(|&i| self.point(i)).collect();
        let w: Vec<T> = indices.iter().map(|&i| self.weights[i]).collect();
        Self::new(&pts, &w)
    }
}

/// Composite-trapezoid time average `(1/T) * int_0^T f(phi_s x0) ds`.
pub fn birkhoff_average<T: Scalar, F: Fn(&[T]) -> T>(
    sys: &SystemSpec<T>,
    x0: &Point<T>,
    f: F,
    horizon: T,
    dt: T,
) -> Result<T> {
    if horizon < T::lit(10.0) * dt {
        return Err(contract("Birkhoff horizon must cover at least ten steps"));
    }
    let tr = integrate_orbit(sys, x0, horizon, dt)?;
    let vals: Vec<T> = (0..tr.len()).map(|k| f(tr.position(k))).collect();
    let cum = cumulative_trapezoid(&vals, dt);
    Ok(cum[cum.len() - 1] / tr.duration())
}

/// Equal-weight atoms at every `thin`-th sample after `burn_in`, singular atoms
/// removed and repeated atoms merged.
pub fn empirical_from_orbit<T: Scalar>(
    sys: &SystemSpec<T>,
    x0: &Point<T>,
    horizon: T,
    dt: T,
    burn_in: T,
    thin: usize,
) -> Result<EmpiricalMeasure<T>> {
    if !(burn_in < horizon) {
        return Err(contract("burn-in must be shorter than the horizon"));
    }
    if thin == 0 {
        return Err(contract("thinning stride must be positive"));
    }
    let tr = integrate_orbit(sys, x0, horizon, dt)?;
    let first = (burn_in / dt).ceil().to_usize().unwrap_or(0);
    let tol = T::lit(SINGULAR_ATOM_TOL);
    let pts: Vec<Point<T>> = (first..tr.len())
        .step_by(thin)
        .map(|k| tr.point(k))
        .filter(|p| singular_distance(sys, p) > tol)
        .collect();
    if pts.is_empty() {
        return Err(PressureError::DegenerateMeasure("orbit sample left no atoms".into()));
    }
    Ok(EmpiricalMeasure::uniform(&pts)?.collapsed())
}

/// `count` independent uniform atoms, rejecting points within `min_sing` of the
/// singular set.
pub fn uniform_measure<T: Scalar>(
    sys: &SystemSpec<T>,
    count: usize,
    min_sing: T,
    seed: u64,
) -> Result<EmpiricalMeasure<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while pts.len() < count {
        attempts += 1;
        if attempts > count.saturating_mul(1000).max(1000) {
            return Err(PressureError::DegenerateMeasure(
                "singular exclusion rejects almost every sample".into(),
            ));
        }
        let p = sys.sample_uniform(&mut rng);
        if singular_distance(sys, &p) > min_sing {
            pts.push(p);
        }
    }
    EmpiricalMeasure::uniform(&pts)
}

/// Product grid partition with a small irrational offset per axis so that atoms
/// on rational lattices avoid cell boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPartition<T> {
    cells: Vec<usize>,
    offsets: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    periodic: bool,
}

impl<T: Scalar> GridPartition<T> {
    /// `cells[k]` boxes along axis `k`; the chart comes from `sys`.
    pub fn new(sys: &SystemSpec<T>, cells: &[usize]) -> Result<Self> {
        if cells.len() != sys.dim {
            return Err(contract(format!(
                "partition has {} axes for a {}-dimensional system",
                cells.len(),
                sys.dim
            )));
        }
        if cells.contains(&0) {
            return Err(contract("every axis needs at least one cell"));
        }
        let total: usize = cells.iter().product();
        if total < 3 {
            return Err(contract(format!("partition has {total} cells, need at least 3")));
        }
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let offsets = (0..cells.len())
            .map(|k| T::lit(1e-3 * ((k + 1) as f64 * golden).fract()))
            .collect();
        let (lower, upper, periodic) = match &sys.space {
            Space::EuclideanBox { lower, upper } => (lower.clone(), upper.clone(), false),
            _ => (vec![T::zero(); sys.dim], vec![T::one(); sys.dim], true),
        };
        Ok(GridPartition {
            cells: cells.to_vec(),
            offsets,
            lower,
            upper,
            periodic,
        })
    }

    pub fn uniform(sys: &SystemSpec<T>, per_side: usize) -> Result<Self> {
        Self::new(sys, &vec![per_side; sys.dim])
    }

    pub fn with_offsets(mut self, offsets: &[T]) -> Result<Self> {
        if offsets.len() != self.cells.len() {
            return Err(contract("one offset per axis required"));
        }
        self.offsets = offsets.to_vec();
        Ok(self)
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    /// Merges every `factor` consecutive cells along `axis`.
    pub fn coarsened(&self, axis: usize, factor: usize) -> Result<Self> {
        if axis >= self.cells.len() || factor == 0 || !self.cells[axis].is_multiple_of(factor) {
            return Err(contract("coarsening factor must divide the axis cell count"));
        }
        let mut out = self.clone();
        out.cells[axis] /= factor;
        if out.cell_count() < 3 {
            return Err(contract("coarsened partition would have fewer than 3 cells"));
        }
        Ok(out)
    }

    /// Mixed-radix cell index of `p`.
    #[inline]
    pub fn label(&self, p: &[T]) -> u32 {
        let mut idx = 0usize;
        for (k, &n) in self.cells.iter().enumerate() {
            let u = (p[k] - self.lower[k]) / (self.upper[k] - self.lower[k]) + self.offsets[k];
            let v = if self.periodic { u - u.floor() } else { u };
            let c = (v * T::from_count(n)).floor().to_isize().unwrap_or(0);
            let c = c.clamp(0, n as isize - 1) as usize;
            idx = idx * n + c;
        }
        idx as u32
    }
}

/// Cell labels of `phi_{i tau}(x)` for `i = 0..n`; labels are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ItineraryWord {
    pub symbols: Vec<u32>,
    pub alphabet: usize,
}

impl ItineraryWord {
    pub fn new(symbols: Vec<u32>, alphabet: usize) -> Result<Self> {
        if symbols.iter().any(|&s| s as usize >= alphabet) {
            return Err(contract("symbol outside the alphabet"));
        }
        Ok(ItineraryWord { symbols, alphabet })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

fn steps_per_tau<T: Scalar>(tau: T, dt: T) -> Result<(usize, T)> {
    if !(tau > T::zero()) || !(dt > T::zero()) {
        return Err(contract("tau and dt must be positive"));
    }
    let k = (tau / dt).ceil().max(T::one());
    let k = k.to_usize().unwrap_or(1);
    Ok((k, tau / T::from_count(k)))
}

fn raw_itinerary<T: Scalar>(
    sys: &SystemSpec<T>,
    x0: &[T],
    partition: &GridPartition<T>,
    sub_steps: usize,
    h: T,
    n: usize,
) -> Result<Vec<u32>> {
    let mut p = x0.to_vec();
    if !sys.wrap_in_place(&mut p) {
        return Err(PressureError::DomainEscape { time: 0.0 });
    }
    let mut word = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            sys.advance(&mut p, sub_steps, h).map_err(|e| match e {
                PressureError::DomainEscape { time } => PressureError::DomainEscape {
                    time: time + ((i - 1) * sub_steps) as f64 * h.as_f64(),
                },
                other => other,
            })?;
        }
        word.push(partition.label(&p));
    }
    Ok(word)
}

/// Itinerary of `x0` under the time-`tau` map. The integration step is the
/// largest divisor of `tau` not exceeding `dt`.
pub fn itinerary<T: Scalar>(
    sys: &SystemSpec<T>,
    x0: &Point<T>,
    partition: &GridPartition<T>,
    tau: T,
    n: usize,
    dt: T,
) -> Result<ItineraryWord> {
    if n == 0 {
        return Err(contract("itinerary length must be at least 1"));
    }
    let (k, h) = steps_per_tau(tau, dt)?;
    let w = raw_itinerary(sys, &x0.0, partition, k, h, n)?;
    ItineraryWord::new(w, partition.cell_count())
}

/// Itinerary-class entropy estimate with its sampling diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmbEstimate {
    pub n: usize,
    pub tau: f64,
    /// Probe average of `-(1/(n tau)) log mu(xi_n(x))`.
    pub value: f64,
    pub probes: usize,
    pub excluded: usize,
    /// Fraction of probes whose itinerary class holds fewer than 5 atoms.
    pub undersampled_fraction: f64,
    pub classes: usize,
}

/// Itineraries of every atom, computed in parallel.
pub fn atom_itineraries<T: Scalar>(
    sys: &SystemSpec<T>,
    measure: &EmpiricalMeasure<T>,
    partition: &GridPartition<T>,
    tau: T,
    n: usize,
    dt: T,
) -> Result<Vec<Vec<u32>>> {
    let (k, h) = steps_per_tau(tau, dt)?;
    (0..measure.len())
        .into_par_iter()
        .map(|i| raw_itinerary(sys, measure.atom(i), partition, k, h, n))
        .collect()
}

fn probe_indices(atoms: usize, probes: usize) -> Vec<usize> {
    let probes = probes.min(atoms);
    (0..probes).map(|k| k * atoms / probes).collect()
}

fn smb_from_words<T: Scalar>(
    measure: &EmpiricalMeasure<T>,
    words: &[Vec<u32>],
    n: usize,
    tau: T,
    probe_count: usize,
) -> Result<SmbEstimate> {
    let mut classes: HashMap<&[u32], (f64, usize)> = HashMap::new();
    for (i, w) in words.iter().enumerate() {
        let e = classes.entry(&w[..n]).or_insert((0.0, 0));
        e.0 += measure.weight(i).as_f64();
        e.1 += 1;
    }
    let probes = probe_indices(measure.len(), probe_count);
    let norm = (T::from_count(n) * tau).as_f64();
    let mut acc = 0.0;
    let mut wsum = 0.0;
    let mut excluded = 0;
    let mut thin = 0;
    for &i in &probes {
        let (mass, count) = classes[&words[i][..n]];
        if !(mass > 0.0) {
            excluded += 1;
            continue;
        }
        if count < 5 {
            thin += 1;
        }
        let w = measure.weight(i).as_f64();
        acc += w * (-mass.ln() / norm);
        wsum += w;
    }
    if wsum <= 0.0 {
        return Err(PressureError::EstimationFailure(
            "every probe fell in a zero-mass class".into(),
        ));
    }
    let used = probes.len() - excluded;
    Ok(SmbEstimate {
        n,
        tau: tau.as_f64(),
        value: acc / wsum,
        probes: used,
        excluded,
        undersampled_fraction: thin as f64 / used.max(1) as f64,
        classes: classes.len(),
    })
}

/// Shannon-McMillan-Breiman estimate of `h_mu(phi_tau, xi) / tau`: the class
/// mass `mu(xi_n(x))` is the measure of atoms sharing the probe's length-`n`
/// itinerary.
pub fn smb_entropy<T: Scalar>(
    sys: &SystemSpec<T>,
    measure: &EmpiricalMeasure<T>,
    partition: &GridPartition<T>,
    tau: T,
    n: usize,
    dt: T,
    probe_count: usize,
) -> Result<SmbEstimate> {
    smb_entropy_trend(sys, measure, partition, tau, &[n], dt, probe_count)
        .map(|mut v| v.pop().expect("one length requested"))
}

/// [`smb_entropy`] for several word lengths, sharing one itinerary computation.
pub fn smb_entropy_trend<T: Scalar>(
    sys: &SystemSpec<T>,
    measure: &EmpiricalMeasure<T>,
    partition: &GridPartition<T>,
    tau: T,
    lengths: &[usize],
    dt: T,
    probe_count: usize,
) -> Result<Vec<SmbEstimate>> {
    if probe_count < 30 {
        return Err(contract("at least 30 probes are required"));
    }
    let n_max = lengths.iter().copied().max().unwrap_or(0);
    if n_max == 0 || lengths.contains(&0) {
        return Err(contract("word lengths must be positive"));
    }
    let words = atom_itineraries(sys, measure, partition, tau, n_max, dt)?;
    lengths
        .iter()
        .map(|&n| smb_from_words(measure, &words, n, tau, probe_count))
        .collect()
}

/// Total-variation distance between the cell histograms of `mu` and of its
/// push-forward under `phi_dt`.
pub fn transport_defect<T: Scalar>(
    sys: &SystemSpec<T>,
    measure: &EmpiricalMeasure<T>,
    partition: &GridPartition<T>,
    dt: T,
) -> Result<f64> {
    let mut before: HashMap<u32, f64> = HashMap::new();
    let mut after: HashMap<u32, f64> = HashMap::new();
    for i in 0..measure.len() {
        let w = measure.weight(i).as_f64();
        *before.entry(partition.label(measure.atom(i))).or_default() += w;
        let mut p = measure.atom(i).to_vec();
        sys.advance(&mut p, 1, dt)?;
        *after.entry(partition.label(&p)).or_default() += w;
    }
    let mut keys: Vec<u32> = before.keys().chain(after.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let tv = keys
        .iter()
        .map(|k| (before.get(k).copied().unwrap_or(0.0) - after.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>();
    Ok(0.5 * tv)
}

/// Empirical `int log |X| dmu` over atoms with positive speed, and the number of
/// atoms slower than `1e-6`.
pub fn log_speed_report<T: Scalar>(sys: &SystemSpec<T>, measure: &EmpiricalMeasure<T>) -> (f64, usize) {
    let mut acc = 0.0;
    let mut wsum = 0.0;
    let mut slow = 0;
    for i in 0..measure.len() {
        let v = sys.speed_at(measure.atom(i)).as_f64();
        if v < 1e-6 {
            slow += 1;
        }
        if v > 0.0 {
            acc += measure.weight(i).as_f64() * v.ln();
            wsum += measure.weight(i).as_f64();
        }
    }
    (if wsum > 0.0 { acc / wsum } else { f64::NEG_INFINITY }, slow)
}

/// Normalized Hamming distance between words of equal length over the same alphabet.
pub fn hamming_rho<T: Scalar>(w: &ItineraryWord, v: &ItineraryWord) -> Result<T> {
    if w.len() != v.len() || w.alphabet != v.alphabet {
        return Err(contract("Hamming distance needs equal lengths and alphabets"));
    }
    if w.is_empty() {
        return Err(contract("empty words"));
    }
    let mism = w.symbols.iter().zip(&v.symbols).filter(|(a, b)| a != b).count();
    Ok(T::from_count(mism) / T::from_count(w.len()))
}

/// `floor(n r)`, tolerant to decimal radii like `0.1` that are not exact in binary.
fn radius_budget(n: usize, r: f64) -> usize {
    ((n as f64) * r + 1e-9).floor().max(0.0) as usize
}

fn check_ball_args(alphabet: usize, n: usize, r: f64) -> Result<()> {
    if alphabet < 3 {
        return Err(contract(format!("alphabet size {alphabet} < 3")));
    }
    if n == 0 {
        return Err(contract("word length must be positive"));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(PressureError::Range {
            value: r,
            range: "[0, 1]".into(),
        });
    }
    Ok(())
}

/// Exact size of the Hamming ball `sum_{k <= floor(n r)} C(n,k) (N-1)^k`;
/// `None` on `u128` overflow.
pub fn hamming_ball_size(alphabet: usize, n: usize, r: f64) -> Result<Option<u128>> {
    check_ball_args(alphabet, n, r)?;
    let kmax = radius_budget(n, r).min(n);
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    let mut pow: u128 = 1;
    for k in 0..=kmax {
        if k > 0 {
            binom = match binom.checked_mul((n - k + 1) as u128) {
                Some(v) => v / k as u128,
                None => return Ok(None),
            };
            pow = match pow.checked_mul((alphabet - 1) as u128) {
                Some(v) => v,
                None => return Ok(None),
            };
        }
        let term = match binom.checked_mul(pow) {
            Some(v) => v,
            None => return Ok(None),
        };
        total = match total.checked_add(term) {
            Some(v) => v,
            None => return Ok(None),
        };
    }
    Ok(Some(total))
}

/// `log` of the Hamming ball size, via running log-binomials and log-sum-exp.
pub fn hamming_ball_count<T: Scalar>(alphabet: usize, n: usize, r: f64) -> Result<T> {
    check_ball_args(alphabet, n, r)?;
    let kmax = radius_budget(n, r).min(n);
    let log_q = T::from_count(alphabet - 1).ln();
    let mut terms = Vec::with_capacity(kmax + 1);
    let mut log_binom = T::zero();
    for k in 0..=kmax {
        if k > 0 {
            log_binom += (T::from_count(n - k + 1) / T::from_count(k)).ln();
        }
        terms.push(log_binom + T::from_count(k) * log_q);
    }
    Ok(log_sum_exp(&terms))
}

/// Exponential growth rate `r log(N-1) - r log r - (1-r) log(1-r)` of the Hamming
/// ball, for `0 < r < (N-2)/N`.
pub fn hamming_ball_rate<T: Scalar>(alphabet: usize, r: f64) -> Result<T> {
    if alphabet < 3 {
        return Err(contract(format!("alphabet size {alphabet} < 3")));
    }
    let limit = (alphabet as f64 - 2.0) / alphabet as f64;
    if !(r > 0.0 && r < limit) {
        return Err(PressureError::Range {
            value: r,
            range: format!("(0, {limit})"),
        });
    }
    let r = T::lit(r);
    let one = T::one();
    Ok(r * T::from_count(alphabet - 1).ln() - r * r.ln() - (one - r) * (one - r).ln())
}

/// Time-`tau` itinerary horizon check helper: `n tau / dt` integration steps.
pub fn itinerary_steps<T: Scalar>(tau: T, n: usize, dt: T) -> Result<usize> {
    let (k, _) = steps_per_tau(tau, dt)?;
    Ok(k * n.saturating_sub(1))
}
