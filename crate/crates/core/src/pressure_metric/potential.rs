use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::flow_core::{Space, SystemSpec};
use crate::scalar::Scalar;

/// Non-constant part of a potential. Parameters are kept in `f64` so that they
/// round-trip through configuration files unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialShape {
    Zero,
    /// `sin(2 pi p[axis])`.
    CoordinateSine {
        axis: usize,
    },
    /// Smooth compactly supported bump `(1 - (d/r)^2)^2`, scaled to integrate to
    /// `mass` over Euclidean space.
    Bump {
        center: Vec<f64>,
        radius: f64,
        mass: f64,
    },
}

/// A continuous potential `f = shape + offset`.
///
/// The constant `offset` is carried separately: orbit integrals pick up exactly
/// `offset * t`, and cover selection depends on the shape alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec<T> {
    pub name: String,
    pub shape: PotentialShape,
    pub offset: T,
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    // 2 pi^{d/2} / Gamma(d/2)
    let mut gamma_half = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut k = if d.is_multiple_of(2) { 2 } else { 1 };
    while k < d {
        gamma_half *= k as f64 / 2.0;
        k += 2;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half
}

/// `int_{|x|<1} (1 - |x|^2)^2 dx` in `R^d`.
fn bump_integral(d: usize) -> f64 {
    let d = d as f64;
    sphere_area(d as usize) * (1.0 / d - 2.0 / (d + 2.0) + 1.0 / (d + 4.0))
}

impl<T: Scalar> PotentialSpec<T> {
    pub fn constant(c: T) -> Self {
        PotentialSpec {
            name: format!("constant({c})"),
            shape: PotentialShape::Zero,
            offset: c,
        }
    }

    pub fn zero() -> Self {
        Self::constant(T::zero())
    }

    pub fn coordinate_sine(axis: usize) -> Self {
        PotentialSpec {
            name: format!("sin(2 pi x{axis})"),
            shape: PotentialShape::CoordinateSine { axis },
            offset: T::zero(),
        }
    }

    pub fn bump(center: &[f64], radius: f64, mass: f64) -> Self {
        PotentialSpec {
            name: format!("bump(r={radius}, mass={mass})"),
            shape: PotentialShape::Bump {
                center: center.to_vec(),
                radius,
                mass,
            },
            offset: T::zero(),
        }
    }

    /// `f + c`.
    pub fn shifted(&self, c: T) -> Self {
        PotentialSpec {
            name: format!("{} + {c}", self.name),
            shape: self.shape.clone(),
            offset: self.offset + c,
        }
    }

    pub fn validate(&self, sys: &SystemSpec<T>) -> Result<()> {
        match &self.shape {
            PotentialShape::Zero => {}
            PotentialShape::CoordinateSine { axis } => {
                if *axis >= sys.dim {
                    return Err(contract(format!(
                        "sine axis {axis} out of range for dimension {}",
                        sys.dim
                    )));
                }
            }
            PotentialShape::Bump { center, radius, mass } => {
                if center.len() != sys.dim {
                    return Err(contract("bump center has the wrong dimension"));
                }
                if !(*radius > 0.0) || !radius.is_finite() || !mass.is_finite() {
                    return Err(contract("bump needs a positive radius and finite mass"));
                }
            }
        }
        if !self.offset.is_finite() {
            return Err(contract("potential offset must be finite"));
        }
        Ok(())
    }

    /// The shape part alone.
    pub fn eval_shape(&self, sys: &SystemSpec<T>, p: &[T]) -> T {
        match &self.shape {
            PotentialShape::Zero => T::zero(),
            PotentialShape::CoordinateSine { axis } => (T::tau() * p[*axis]).sin(),
            PotentialShape::Bump { center, radius, mass } => {
                let c: Vec<T> = center.iter().map(|&v| T::lit(v)).collect();
                let d = sys.dist(p, &c) / T::lit(*radius);
                if d >= T::one() {
                    return T::zero();
                }
                let u = T::one() - d * d;
                let scale = mass / (radius.powi(sys.dim as i32) * bump_integral(sys.dim));
                T::lit(scale) * u * u
            }
        }
    }

    #[inline]
    pub fn eval(&self, sys: &SystemSpec<T>, p: &[T]) -> T {
        self.eval_shape(sys, p) + self.offset
    }

    /// Upper bound on `sup |f|`.
    pub fn sup_norm(&self, sys: &SystemSpec<T>) -> T {
        let shape = match &self.shape {
            PotentialShape::Zero => 0.0,
            PotentialShape::CoordinateSine { .. } => 1.0,
            PotentialShape::Bump { radius, mass, .. } => {
                (mass / (radius.powi(sys.dim as i32) * bump_integral(sys.dim))).abs()
            }
        };
        T::lit(shape) + self.offset.abs()
    }

    /// Average against normalized volume, when known in closed form.
    pub fn analytic_space_average(&self, sys: &SystemSpec<T>) -> Option<T> {
        let volume = match &sys.space {
            Space::EuclideanBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&a, &b)| (b - a).as_f64())
                .product::<f64>(),
            _ => 1.0,
        };
        let shape = match &self.shape {
            PotentialShape::Zero => Some(0.0),
            PotentialShape::CoordinateSine { .. } => match sys.space {
                Space::EuclideanBox { .. } => None,
                _ => Some(0.0),
            },
            // the ball must embed isometrically
            PotentialShape::Bump { radius, mass, .. } => match sys.space {
                Space::FlatTorus if *radius < 0.5 => Some(mass / volume),
                Space::MappingTorus if *radius < 0.25 => Some(mass / volume),
                _ => None,
            },
        };
        shape.map(|s| T::lit(s) + self.offset)
    }
}
