use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rescaled_pressure::ergodic::{
    empirical_from_orbit, hamming_ball_count, hamming_ball_rate, hamming_ball_size, hamming_rho, uniform_measure,
};
use rescaled_pressure::flow_core::singular_distance;
use rescaled_pressure::pressure_metric::{
    bounded_variation_gamma, katok_check, metric_pressure_table, KatokSpec, MetricGrid, PressureTable,
};
use rescaled_pressure::pressure_topo::{
    build_compact_sample, lattice_points, sandwich_check, topo_pressure_table, variational_gap, TopoGrid,
    VariationalGrid,
};
use rescaled_pressure::warp::{inclusion_check, perturbed_pairs};
use rescaled_pressure::{
    BallVariant, CompactSample, EmpiricalMeasure, GridPartition, ItineraryWord, Point, SystemSpec,
};

use crate::config::{CompactSource, LoadedConfig, MeasureSource, Needs, Setup};
use crate::error::CliError;
use crate::output::{pressure_rows, readoff_rows, summary_rows, to_value, write_all, Cell, CsvTable, ReportBundle};

/// Default output directory when neither `--out` nor `output` is given.
pub const DEFAULT_OUT: &str = "pressure-out";

/// Largest word length the combinatorics enumeration accepts.
pub const MAX_ENUMERATION_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    EstimateMetric,
    EstimateTopo,
    VerifyKatok,
    VerifyEquivalence,
    VerifySandwich,
    VerifyVariational,
    VerifyCombinatorics,
    Gamma,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::EstimateMetric => "estimate-metric",
            Command::EstimateTopo => "estimate-topo",
            Command::VerifyKatok => "verify-katok",
            Command::VerifyEquivalence => "verify-equivalence",
            Command::VerifySandwich => "verify-sandwich",
            Command::VerifyVariational => "verify-variational",
            Command::VerifyCombinatorics => "verify-combinatorics",
            Command::Gamma => "gamma",
        }
    }

    fn needs(self) -> Needs {
        match self {
            Command::VerifyCombinatorics => Needs {
                system: false,
                grids: false,
            },
            Command::Gamma | Command::VerifyKatok => Needs {
                system: true,
                grids: self == Command::VerifyKatok,
            },
            _ => Needs {
                system: true,
                grids: true,
            },
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Files written and one-line findings for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Vec<String>,
}

struct Products {
    tables: Vec<CsvTable>,
    summary: Vec<String>,
}

pub fn run(command: Command, lc: &LoadedConfig, out: Option<&Path>) -> Result<RunOutcome, CliError> {
    let setup = lc.setup(command.needs())?;
    let mut bundle = ReportBundle::new(command.name(), &lc.text, &lc.config.seeds)?;
    let products = match (command, setup) {
        (Command::VerifyCombinatorics, _) => combinatorics(lc, &mut bundle)?,
        (_, None) => unreachable!("system commands always resolve a setup"),
        (Command::EstimateMetric, Some(s)) => estimate_metric(lc, &s, &mut bundle)?,
        (Command::EstimateTopo, Some(s)) => estimate_topo(lc, &s, &mut bundle)?,
        (Command::VerifyKatok, Some(s)) => verify_katok(lc, &s, &mut bundle)?,
        (Command::VerifyEquivalence, Some(s)) => verify_equivalence(lc, &s, &mut bundle)?,
        (Command::VerifySandwich, Some(s)) => verify_sandwich(lc, &s, &mut bundle)?,
        (Command::VerifyVariational, Some(s)) => verify_variational(lc, &s, &mut bundle)?,
        (Command::Gamma, Some(s)) => gamma(lc, &s, &mut bundle)?,
    };
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| lc.config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let files = write_all(&out_dir, &products.tables, bundle)?;
    Ok(RunOutcome {
        out_dir,
        files,
        summary: products.summary,
    })
}

pub fn build_measure(lc: &LoadedConfig, sys: &SystemSpec<f64>, dt: f64) -> Result<EmpiricalMeasure<f64>, CliError> {
    let m = &lc.config.measure;
    if m.atoms == 0 {
        return Err(lc.invalid("atoms", "must be positive"));
    }
    match m.source {
        MeasureSource::Uniform => {
            if !(m.min_sing >= 0.0) {
                return Err(lc.invalid("min_sing", "must be non-negative"));
            }
            Ok(uniform_measure(sys, m.atoms, m.min_sing, lc.config.seeds.measure)?)
        }
        MeasureSource::Orbit => {
            if m.thin == 0 {
                return Err(lc.invalid("thin", "must be positive"));
            }
            if !(m.burn_in >= 0.0 && m.burn_in.is_finite()) {
                return Err(lc.invalid("burn_in", "must be non-negative"));
            }
            let x0 = match &m.x0 {
                Some(c) if c.len() != sys.dim => {
                    return Err(lc.invalid("x0", format!("expected {} coordinates", sys.dim)));
                }
                Some(c) => Point::from_f64(c),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(lc.config.seeds.measure);
                    let mut p = sys.sample_uniform(&mut rng);
                    while singular_distance(sys, &p) < lc.config.rho_sing {
                        p = sys.sample_uniform(&mut rng);
                    }
                    p
                }
            };
            let dt = m.dt.unwrap_or(dt);
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(lc.invalid("measure", "sampling dt must be positive"));
            }
            if let Some(l) = sys.lipschitz_hint {
                if dt * l >= 0.1 {
                    return Err(lc.invalid("measure", format!("sampling dt * L must stay below 0.1 (L = {l})")));
                }
            }
            let burn = (m.burn_in / dt).ceil() * dt;
            let horizon = burn + (m.atoms * m.thin) as f64 * dt;
            Ok(empirical_from_orbit(sys, &x0, horizon, dt, burn, m.thin)?)
        }
    }
}

pub fn build_family(
    lc: &LoadedConfig,
    sys: &SystemSpec<f64>,
    mu: Option<&EmpiricalMeasure<f64>>,
) -> Result<Vec<CompactSample<f64>>, CliError> {
    let c = &lc.config.compact;
    let source: Vec<Point<f64>> = match (c.source, mu) {
        (CompactSource::Lattice, _) => lattice_points(sys, c.per_side).map_err(|e| lc.invalid("compact", e))?,
        (CompactSource::Measure, Some(mu)) => mu.points(),
        (CompactSource::Measure, None) => return Err(lc.invalid("compact", "this command has no measure")),
    };
    let sizes = if c.sizes.is_empty() {
        vec![lc.config.max_points]
    } else {
        c.sizes.clone()
    };
    if sizes.contains(&0) {
        return Err(lc.invalid("sizes", "entries must be positive"));
    }
    sizes
        .iter()
        .map(|&m| build_compact_sample(sys, &source, lc.config.rho_sing, m).map_err(CliError::from))
        .collect()
}

fn metric_grid(lc: &LoadedConfig, s: &Setup, variants: Vec<BallVariant>) -> MetricGrid<f64> {
    MetricGrid {
        variants,
        t_grid: s.t_grid.clone(),
        eps_grid: s.eps_grid.clone(),
        deltas: lc.config.deltas.clone(),
        dt: s.dt,
        pool_size: lc.config.pool_size,
        band: s.band,
        greedy: true,
    }
}

fn readoff_summary(table: &PressureTable) -> Vec<String> {
    table
        .readoffs
        .iter()
        .map(|r| {
            format!(
                "read-off {} eps={} delta={} {}: {:.6}",
                r.variant.label(),
                r.eps,
                r.delta,
                r.method.label(),
                r.slope
            )
        })
        .collect()
}

fn estimate_metric(lc: &LoadedConfig, s: &Setup, bundle: &mut ReportBundle) -> Result<Products, CliError> {
    let mu = build_measure(lc, &s.sys, s.dt)?;
    let table = metric_pressure_table(&s.sys, &mu, &s.f, &metric_grid(lc, s, lc.config.variants.clone()))?;
    bundle.metric_table = Some(to_value(&table)?);
    Ok(Products {
        summary: readoff_summary(&table),
        tables: vec![
            pressure_rows("metric_table.csv", &table.rows),
            readoff_rows("metric_readoffs.csv", &table.readoffs),
        ],
    })
}

fn estimate_topo(lc: &LoadedConfig, s: &Setup, bundle: &mut ReportBundle) -> Result<Products, CliError> {
    let mu = match lc.config.compact.source {
        CompactSource::Measure => Some(build_measure(lc, &s.sys, s.dt)?),
        CompactSource::Lattice => None,
    };
    let family = build_family(lc, &s.sys, mu.as_ref())?;
    let grid = TopoGrid {
        variants: lc.config.variants.clone(),
        t_grid: s.t_grid.clone(),
        eps_grid: s.eps_grid.clone(),
        dt: s.dt,
        band: s.band,
    };
    let topo = topo_pressure_table(&s.sys, &family, &s.f, &grid)?;
    bundle.topo_table = Some(to_value(&topo)?);
    Ok(Products {
        summary: readoff_summary(&topo.table),
        tables: vec![
            pressure_rows("topo_table.csv", &topo.table.rows),
            pressure_rows("topo_per_k.csv", &topo.per_k),
            readoff_rows("topo_readoffs.csv", &topo.table.readoffs),
        ],
    })
}

fn verify_katok(lc: &LoadedConfig, s: &Setup, bundle: &mut ReportBundle) -> Result<Products, CliError> {
    let p = &lc.config.partition;
    if !(p.tau > 0.0 && p.tau.is_finite()) {
        return Err(lc.invalid("tau", "must be positive"));
    }
    if p.n == 0 {
        return Err(lc.invalid("n", "must be positive"));
    }
    if p.probes < 30 {
        return Err(lc.invalid("probes", "at least 30 probes are required"));
    }
    let cells = p.cells(s.sys.dim);
    GridPartition::new(&s.sys, &cells).map_err(|e| lc.invalid("boxes_per_side", e))?;
    let mu = build_measure(lc, &s.sys, s.dt)?;
    let spec = KatokSpec {
        variant: lc.config.variants[0],
        t_grid: s.t_grid.clone(),
        eps: s.eps_grid[0],
        delta: lc.config.deltas[0],
        dt: s.dt,
        pool_size: lc.config.pool_size,
        cover_atoms: lc.config.measure.cover_atoms,
        band: s.band,
        partition: cells,
        tau: p.tau,
        n: p.n,
        probes: p.probes,
    };
    let rep = katok_check(&s.sys, &mu, &s.f, &spec)?;
    bundle.katok = Some(to_value(&rep)?);
    let summary = summary_rows(
        "katok_summary.csv",
        &[
            ("metric_readoff", rep.metric_readoff),
            ("smb_entropy", rep.smb.value),
            ("potential_average", rep.potential_average),
            ("entropy_side", rep.entropy_side),
            ("difference", rep.difference),
            ("transport_defect", rep.transport_defect),
            ("undersampled_fraction", rep.smb.undersampled_fraction),
            ("atoms", rep.atoms as f64),
            ("cover_atoms", rep.cover_atoms as f64),
            ("slow_atoms", rep.slow_atoms as f64),
        ],
    );
    Ok(Products {
        summary: vec![format!(
            "metric read-off {:.6}, entropy side {:.6} (SMB {:.6} + average {:.6})",
            rep.metric_readoff, rep.entropy_side, rep.smb.value, rep.potential_average
        )],
        tables: vec![pressure_rows("katok_metric.csv", &rep.metric_rows), summary],
    })
}

#[derive(Debug, Clone, Serialize)]
struct EquivalenceSummary {
    table: PressureTable,
    max_readoff_spread: f64,
    r1_below_r2: usize,
    r1_below_r3: usize,
    inclusion: rescaled_pressure::warp::InclusionReport,
}

fn verify_equivalence(lc: &LoadedConfig, s: &Setup, bundle: &mut ReportBundle) -> Result<Products, CliError> {
    let rescaled = [BallVariant::R1, BallVariant::R2, BallVariant::R3];
    let mu = build_measure(lc, &s.sys, s.dt)?;
    let table = metric_pressure_table(&s.sys, &mu, &s.f, &metric_grid(lc, s, rescaled.to_vec()))?;
    let mut spread: f64 = 0.0;
    for r in table.readoffs.iter().filter(|r| r.variant == BallVariant::R1) {
        let slopes: Vec<f64> = rescaled
            .iter()
            .filter_map(|&v| table.readoff(v, r.eps, r.delta, r.method).map(|q| q.slope))
            .collect();
        for a in &slopes {
            for b in &slopes {
                spread = spread.max((a - b).abs());
            }
        }
    }
    let below = |v: BallVariant| {
        table
            .rows
            .iter()
            .filter(|r| r.variant == BallVariant::R1)
            .filter(|r| {
                table
                    .cell(v, r.t, r.eps, r.delta, r.method)
                    .is_some_and(|q| r.log_value < q.log_value)
            })
            .count()
    };
    let (r1_below_r2, r1_below_r3) = (below(BallVariant::R2), below(BallVariant::R3));

    let inc = &lc.config.inclusion;
    if !(inc.scale > 0.0) {
        return Err(lc.invalid("scale", "must be positive"));
    }
    let t_inc = inc.t.unwrap_or(*s.t_grid.last().expect("validated"));
    if (t_inc - (t_inc / s.dt).round() * s.dt).abs() > 1e-9 || !(t_inc > s.band.b) {
        return Err(lc.invalid(
            "inclusion",
            format!("t = {t_inc} must be a multiple of dt above b = {}", s.band.b),
        ));
    }
    let eps_inc = inc.eps.unwrap_or(s.eps_grid[0]);
    if !(eps_inc > 0.0) {
        return Err(lc.invalid("inclusion", "eps must be positive"));
    }
    let pairs = perturbed_pairs(&s.sys, inc.pairs, inc.scale, lc.config.rho_sing, lc.config.seeds.pairs);
    let inclusion = inclusion_check(&s.sys, &pairs, t_inc, eps_inc, s.dt, &s.band)?;

    let mut inc_table = CsvTable::new(
        "inclusion.csv",
        &[
            "pairs",
            "t",
            "shortened_t",
            "eps",
            "lambda",
            "r1_members",
            "r2_members",
            "r3_members",
            "violations_3_in_2",
            "violations_2_in_3",
        ],
    );
    inc_table.push(vec![
        inclusion.pairs.into(),
        inclusion.t.into(),
        inclusion.shortened_t.into(),
        inclusion.eps.into(),
        inclusion.lambda.into(),
        inclusion.r1_members.into(),
        inclusion.r2_members.into(),
        inclusion.r3_members.into(),
        inclusion.violations_3_in_2.into(),
        inclusion.violations_2_in_3.into(),
    ]);
    let summary = summary_rows(
        "equivalence_summary.csv",
        &[
            ("max_readoff_spread", spread),
            ("r1_below_r2_cells", r1_below_r2 as f64),
            ("r1_below_r3_cells", r1_below_r3 as f64),
            ("inclusion_violations", inclusion.violations() as f64),
        ],
    );
    let lines = vec![
        format!("largest pairwise read-off spread {spread:.6}"),
        format!("cells with R1 below R2: {r1_below_r2}, below R3: {r1_below_r3}"),
        format!(
            "inclusion check: {} violations over {} pairs",
            inclusion.violations(),
            inclusion.pairs
        ),
    ];
    let tables = vec![
        pressure_rows("equivalence_table.csv", &table.rows),
        readoff_rows("equivalence_readoffs.csv", &table.readoffs),
        inc_table,
        summary,
    ];
    bundle.equivalence = Some(to_value(&EquivalenceSummary {
        table,
        max_readoff_spread: spread,
        r1_below_r2,
        r1_below_r3,
        inclusion,
    })?);
    Ok(Products { tables, summary: lines })
}

fn verify_sandwich(lc: &LoadedConfig, s: &Setup, bundle: &mut ReportBundle) -> Result<Products, CliError> {
    let mu = match lc.config.compact.source {
        CompactSource::Measure => Some(build_measure(lc, &s.sys, s.dt)?),
        CompactSource::Lattice => None,
    };
    let family = build_family(lc, &s.sys, mu.as_ref())?;
    let t = *s.t_grid.last().expect("validated");
    let mut csv = CsvTable::new(
        "sandwich.csv",
        &[
            "K_id",
            "t",
            "eps",
            "spanning_r1",
            "spanning_r2",
            "spanning_r3",
            "separating_r1",
            "separating_r2",
            "separating_r3",
            "separating_half_r1",
            "half_uncovered_weight_order",
            "half_uncovered_input_order",
            "order_violations",
            "sandwich_violations",
            "sandwich_margin",
            "above_comparability",
            "fill_radius",
        ],
    );
    let mut reports = Vec::new();
    let mut violations = 0;
    for (kid, k) in family.iter().enumerate() {
        let rep = sandwich_check(&s.sys, k, &s.f, t, &s.eps_grid, s.dt, s.band, lc.config.seeds.lipschitz)?;
        violations += rep.violations();
        for r in &rep.rows {
            csv.push(vec![
                kid.into(),
                r.t.into(),
                r.eps.into(),
                r.spanning[0].into(),
                r.spanning[1].into(),
                r.spanning[2].into(),
                r.separating[0].into(),
                r.separating[1].into(),
                r.separating[2].into(),
                r.separating_half.into(),
                r.half_uncovered[0].into(),
                r.half_uncovered[1].into(),
                r.order_violations.into(),
                r.sandwich_violations.into(),
                r.sandwich_margin.into(),
                r.above_comparability.into(),
                rep.fill_radius.into(),
            ]);
        }
        reports.push(rep);
    }
    bundle.sandwich = Some(to_value(&reports)?);
    Ok(Products {
        tables: vec![csv],
        summary: vec![format!(
            "sandwich check: {violations} violations over {} sets",
            family.len()
        )],
    })
}

fn verify_variational(lc: &LoadedConfig, s: &Setup, bundle: &mut ReportBundle) -> Result<Products, CliError> {
    let mu = build_measure(lc, &s.sys, s.dt)?;
    let extra = match lc.config.compact.source {
        CompactSource::Lattice => build_family(lc, &s.sys, None)?,
        CompactSource::Measure => Vec::new(),
    };
    let grid = VariationalGrid {
        t_grid: s.t_grid.clone(),
        eps_grid: s.eps_grid.clone(),
        delta: lc.config.deltas[0],
        dt: s.dt,
        band: s.band,
        rho_sing: lc.config.rho_sing,
    };
    let rep = variational_gap(&s.sys, std::slice::from_ref(&mu), &extra, &s.f, &grid)?;
    let mut rows = CsvTable::new(
        "variational.csv",
        &[
            "measure",
            "t",
            "eps",
            "delta",
            "metric_raw",
            "metric",
            "topological",
            "support_mass",
            "applicable",
            "violation",
        ],
    );
    for r in &rep.rows {
        rows.push(vec![
            r.measure.into(),
            r.t.into(),
            r.eps.into(),
            r.delta.into(),
            r.metric_raw.into(),
            r.metric.into(),
            r.topological.into(),
            r.support_mass.into(),
            r.applicable.into(),
            r.violation.into(),
        ]);
    }
    let mut slopes = CsvTable::new("variational_readoffs.csv", &["side", "measure", "eps", "slope"]);
    for &(m, eps, slope) in &rep.metric_readoffs {
        slopes.push(vec!["metric".into(), m.into(), eps.into(), slope.into()]);
    }
    for &(eps, slope) in &rep.topo_readoffs {
        slopes.push(vec!["topological".into(), Cell::Int(-1), eps.into(), slope.into()]);
    }
    bundle.variational = Some(to_value(&rep)?);
    Ok(Products {
        tables: vec![rows, slopes],
        summary: vec![format!(
            "variational check: {} violations over {} cells",
            rep.violations,
            rep.rows.len()
        )],
    })
}

/// Ball size by listing every word and measuring its distance to the zero word.
pub fn enumerate_ball(alphabet: usize, n: usize, r: f64) -> Result<u64, CliError> {
    let center = ItineraryWord::new(vec![0; n], alphabet)?;
    let mut digits = vec![0u32; n];
    let mut count = 0u64;
    loop {
        let w = ItineraryWord::new(digits.clone(), alphabet)?;
        if hamming_rho::<f64>(&w, &center)? <= r + 1e-12 {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(count);
            }
            digits[i] += 1;
            if (digits[i] as usize) < alphabet {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct CombinatoricsReport {
    rows: usize,
    mismatches: usize,
    rate_rows: Vec<(usize, usize, f64, f64, f64)>,
}

fn combinatorics(lc: &LoadedConfig, bundle: &mut ReportBundle) -> Result<Products, CliError> {
    let c = &lc.config.combinatorics;
    if c.alphabets.is_empty() || c.alphabets.iter().any(|&a| a < 3) {
        return Err(lc.invalid("alphabets", "need at least one alphabet, each of size >= 3"));
    }
    if c.max_n == 0 || c.max_n > MAX_ENUMERATION_N {
        return Err(lc.invalid("max_n", format!("must lie in 1..={MAX_ENUMERATION_N}")));
    }
    if c.radii.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(lc.invalid("radii", "entries must lie in [0, 1]"));
    }
    if c.rate_n == 0 {
        return Err(lc.invalid("rate_n", "must be positive"));
    }
    let mut exact = CsvTable::new(
        "combinatorics.csv",
        &["alphabet", "n", "r", "exact", "enumerated", "log_count", "match"],
    );
    let mut mismatches = 0;
    for &a in &c.alphabets {
        for n in 1..=c.max_n {
            for &r in &c.radii {
                let size = hamming_ball_size(a, n, r)?
                    .ok_or_else(|| CliError::runtime(format!("ball size overflow at N={a}, n={n}")))?;
                let listed = enumerate_ball(a, n, r)?;
                let log_count = hamming_ball_count::<f64>(a, n, r)?;
                let ok = size == listed as u128;
                mismatches += usize::from(!ok);
                exact.push(vec![
                    a.into(),
                    n.into(),
                    r.into(),
                    Cell::Int(size as i64),
                    Cell::Int(listed as i64),
                    log_count.into(),
                    ok.into(),
                ]);
            }
        }
    }
    let mut rate = CsvTable::new(
        "combinatorics_rate.csv",
        &["alphabet", "n", "r", "log_count_per_n", "rate", "abs_diff"],
    );
    let mut rate_rows = Vec::new();
    for &a in &c.alphabets {
        for &r in &c.rate_radii {
            let g = hamming_ball_rate::<f64>(a, r).map_err(|e| lc.invalid("rate_radii", e))?;
            let per_n = hamming_ball_count::<f64>(a, c.rate_n, r)? / c.rate_n as f64;
            rate.push(vec![
                a.into(),
                c.rate_n.into(),
                r.into(),
                per_n.into(),
                g.into(),
                (per_n - g).abs().into(),
            ]);
            rate_rows.push((a, c.rate_n, r, per_n, g));
        }
    }
    bundle.combinatorics = Some(to_value(&CombinatoricsReport {
        rows: exact.rows.len(),
        mismatches,
        rate_rows,
    })?);
    Ok(Products {
        summary: vec![format!(
            "ball sizes: {mismatches} mismatches over {} rows",
            exact.rows.len()
        )],
        tables: vec![exact, rate],
    })
}

fn gamma(lc: &LoadedConfig, s: &Setup, bundle: &mut ReportBundle) -> Result<Products, CliError> {
    let g = &lc.config.gamma;
    if !matches!(g.variant, BallVariant::R2 | BallVariant::R3) {
        return Err(lc.invalid("gamma", "variant must be R2 or R3"));
    }
    if g.centers < 50 {
        return Err(lc.invalid("centers", "at least 50 centers are required"));
    }
    let ts = match (&g.t_values, &lc.config.t_grid) {
        (Some(v), _) => v.clone(),
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(lc.invalid("t_values", "give gamma.t_values or t_grid")),
    };
    let key = if g.t_values.is_some() { "t_values" } else { "t_grid" };
    if ts.is_empty() || ts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(lc.invalid(key, "must be nonempty and strictly increasing"));
    }
    if ts
        .iter()
        .any(|&t| !(t > 0.0) || (t - (t / s.dt).round() * s.dt).abs() > 1e-9)
    {
        return Err(lc.invalid(key, format!("entries must be positive multiples of dt = {}", s.dt)));
    }
    let eps = match (g.eps, s.eps_grid.first()) {
        (Some(e), _) => e,
        (None, Some(&e)) => e,
        (None, None) => return Err(lc.invalid("gamma", "give gamma.eps or eps_grid")),
    };
    if !(eps > 0.0) {
        return Err(lc.invalid("gamma", "eps must be positive"));
    }
    let mut csv = CsvTable::new(
        "gamma.csv",
        &[
            "variant",
            "t",
            "eps",
            "centers",
            "admissible_pairs",
            "gamma",
            "gamma_over_t",
            "no_admissible_pairs",
        ],
    );
    let mut reports = Vec::new();
    for &t in &ts {
        let r = bounded_variation_gamma(
            &s.sys,
            &s.f,
            g.variant,
            t,
            eps,
            s.dt,
            &s.band,
            g.centers,
            lc.config.rho_sing,
            lc.config.seeds.gamma,
        )?;
        csv.push(vec![
            r.variant.label().into(),
            r.t.into(),
            r.eps.into(),
            r.centers.into(),
            r.admissible_pairs.into(),
            r.gamma.into(),
            r.gamma_over_t.into(),
            r.no_admissible_pairs.into(),
        ]);
        reports.push(r);
    }
    let lines = reports
        .iter()
        .map(|r| format!("t={} gamma={:.6} gamma/t={:.6}", r.t, r.gamma, r.gamma_over_t))
        .collect();
    bundle.gamma = Some(to_value(&reports)?);
    Ok(Products {
        tables: vec![csv],
        summary: lines,
    })
}
