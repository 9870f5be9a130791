//! Benchmark flows with known analytic quantities.

use crate::error::{contract, Result};
use crate::flow_core::{Point, Space, SystemSpec};
use crate::scalar::Scalar;

pub const LORENZ_SIGMA: f64 = 10.0;
pub const LORENZ_RHO: f64 = 28.0;
pub const LORENZ_BETA: f64 = 8.0 / 3.0;
/// Half-width of the Lorenz box: twice the observed attractor radius about `(0,0,rho-1)`.
pub const LORENZ_BOX_HALF_WIDTH: f64 = 60.0;

/// Stable catalog names, as accepted by the CLI.
pub const CATALOG_NAMES: [&str; 4] = ["linear-torus", "sine-grid", "lorenz", "cat-suspension"];

/// A catalog system with its analytic metadata.
#[derive(Debug, Clone)]
pub struct Benchmark<T: Scalar> {
    pub system: SystemSpec<T>,
    pub known_entropy: Option<T>,
    pub known_singular: bool,
    pub notes: &'static str,
}

/// Constant field `omega` on the flat torus of dimension `omega.len()`.
pub fn make_linear_torus<T: Scalar>(omega: &[f64]) -> Result<SystemSpec<T>> {
    if omega.is_empty() || omega.iter().all(|&w| w == 0.0) {
        return Err(contract("linear torus flow needs a nonzero frequency vector"));
    }
    let w: Vec<T> = omega.iter().map(|&c| T::lit(c)).collect();
    Ok(SystemSpec::new(
        "linear-torus",
        omega.len(),
        Space::FlatTorus,
        move |_, out: &mut [T]| out.copy_from_slice(&w),
    )
    .with_lipschitz_hint(T::zero()))
}

/// `X(a, b) = (sin 2 pi a, sin 2 pi b)` on the 2-torus; zeros at the half-integer lattice.
pub fn make_sine_grid_torus<T: Scalar>() -> SystemSpec<T> {
    let half = T::lit(0.5);
    let z = T::zero();
    SystemSpec::new("sine-grid", 2, Space::FlatTorus, |p: &[T], out: &mut [T]| {
        out[0] = sine_turn(p[0]);
        out[1] = sine_turn(p[1]);
    })
    .with_singular_points(vec![
        Point(vec![z, z]),
        Point(vec![z, half]),
        Point(vec![half, z]),
        Point(vec![half, half]),
    ])
    .with_lipschitz_hint(T::tau())
}

#[inline]
fn sine_turn<T: Scalar>(a: T) -> T {
    (T::tau() * a).sin()
}

/// Classical Lorenz field in a trapping box.
pub fn make_lorenz<T: Scalar>() -> SystemSpec<T> {
    let (sigma, rho, beta) = (T::lit(LORENZ_SIGMA), T::lit(LORENZ_RHO), T::lit(LORENZ_BETA));
    let c = (LORENZ_BETA * (LORENZ_RHO - 1.0)).sqrt();
    let zc = LORENZ_RHO - 1.0;
    let h = LORENZ_BOX_HALF_WIDTH;
    SystemSpec::new(
        "lorenz",
        3,
        Space::EuclideanBox {
            lower: vec![T::lit(-h), T::lit(-h), T::lit(zc - h)],
            upper: vec![T::lit(h), T::lit(h), T::lit(zc + h)],
        },
        move |p: &[T], out: &mut [T]| {
            out[0] = sigma * (p[1] - p[0]);
            out[1] = p[0] * (rho - p[2]) - p[1];
            out[2] = p[0] * p[1] - beta * p[2];
        },
    )
    .with_singular_points(vec![
        Point::from_f64(&[0.0, 0.0, 0.0]),
        Point::from_f64(&[c, c, zc]),
        Point::from_f64(&[-c, -c, zc]),
    ])
}

/// Unit vertical field on the mapping torus of the cat map.
pub fn make_cat_suspension<T: Scalar>() -> SystemSpec<T> {
    SystemSpec::new("cat-suspension", 3, Space::MappingTorus, |_, out: &mut [T]| {
        out[0] = T::zero();
        out[1] = T::zero();
        out[2] = T::one();
    })
    .with_lipschitz_hint(T::zero())
}

/// `log` of the leading eigenvalue `(3 + sqrt 5) / 2` of the cat matrix.
pub fn cat_entropy() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

/// Catalog lookup by stable name. `omega` is only used by `linear-torus`
/// (default `(1, sqrt 2)`).
pub fn benchmark<T: Scalar>(name: &str, omega: Option<&[f64]>) -> Result<Benchmark<T>> {
    let b = match name {
        "linear-torus" => {
            let default = [1.0, 2f64.sqrt()];
            Benchmark {
                system: make_linear_torus(omega.unwrap_or(&default))?,
                known_entropy: Some(T::zero()),
                known_singular: false,
                notes: "translation flow; uniquely ergodic when frequencies are rationally independent",
            }
        }
        "sine-grid" => Benchmark {
            system: make_sine_grid_torus(),
            known_entropy: Some(T::zero()),
            known_singular: true,
            notes: "gradient-like flow with a source, two saddles and a sink",
        },
        "lorenz" => Benchmark {
            system: make_lorenz(),
            known_entropy: None,
            known_singular: true,
            notes: "classical parameters; box trapping region stands in for a compact manifold",
        },
        "cat-suspension" => Benchmark {
            system: make_cat_suspension(),
            known_entropy: Some(T::lit(cat_entropy())),
            known_singular: false,
            notes: "constant roof 1, so flow entropy equals the cat map entropy",
        },
        other => {
            return Err(contract(format!(
                "unknown system '{other}', expected one of {CATALOG_NAMES:?}"
            )))
        }
    };
    Ok(b)
}
