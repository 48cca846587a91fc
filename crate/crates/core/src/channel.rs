//! Per-path electromagnetic characterization: free-space spreading, Fresnel
//! reflection per polarization, phase and coherent aggregation.
//!
//! Polarization is carried as two components, perpendicular and parallel to
//! each bounce's plane of incidence. There is no cross-polar coupling, so each
//! component accumulates the product of its own Fresnel coefficients.
//! Antennas are isotropic with unit gain.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Material, Scene};
use crate::tracer::{PathRecord, TraceConfig};

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.8541878128e-12;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Complex linear amplitude per polarization component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexGain {
    pub perp: Complex64,
    pub par: Complex64,
}

impl ComplexGain {
    pub const ZERO: ComplexGain = ComplexGain {
        perp: Complex64::new(0.0, 0.0),
        par: Complex64::new(0.0, 0.0),
    };

    pub fn is_finite(&self) -> bool {
        self.perp.is_finite() && self.par.is_finite()
    }
}

impl std::ops::Add for ComplexGain {
    type Output = ComplexGain;
    fn add(self, rhs: ComplexGain) -> ComplexGain {
        ComplexGain {
            perp: self.perp + rhs.perp,
            par: self.par + rhs.par,
        }
    }
}

/// Channel attributes attached to a characterized path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathChannel {
    /// Complex amplitude including the propagation phase.
    pub gain: ComplexGain,
    /// Phase of the perpendicular component in [0, 2π).
    pub phase: f64,
    pub frequency: f64,
}

impl PathChannel {
    pub fn gain_db_perp(&self) -> f64 {
        amplitude_db(self.gain.perp.norm())
    }

    pub fn gain_db_par(&self) -> f64 {
        amplitude_db(self.gain.par.norm())
    }

    /// Strongest polarization component in dB.
    pub fn gain_db(&self) -> f64 {
        amplitude_db(self.gain.perp.norm().max(self.gain.par.norm()))
    }
}

pub fn amplitude_db(amplitude: f64) -> f64 {
    20.0 * amplitude.log10()
}

/// Complex relative permittivity η = εr − jσ/(2π f ε0).
pub fn complex_permittivity(material: &Material, frequency: f64) -> Complex64 {
    Complex64::new(
        material.relative_permittivity,
        -material.conductivity / (2.0 * PI * frequency * VACUUM_PERMITTIVITY),
    )
}

/// Plane-wave Fresnel reflection coefficients (perpendicular, parallel) for
/// an air-to-medium interface at `incidence_angle` from the normal.
///
/// With this convention r_perp(0) = (1−√η)/(1+√η) and r_par(0) = (√η−1)/(√η+1).
pub fn fresnel_reflection(incidence_angle: f64, material: &Material, frequency: f64) -> Result<(Complex64, Complex64)> {
    if !(0.0..PI / 2.0).contains(&incidence_angle) {
        return Err(Error::contract(format!(
            "incidence angle {incidence_angle} rad outside [0, π/2)"
        )));
    }
    if !(frequency > 0.0) {
        return Err(Error::contract(format!("frequency {frequency} Hz must be positive")));
    }
    if material.relative_permittivity < 1.0 || material.conductivity < 0.0 {
        return Err(Error::contract(format!("material {:?} is not passive", material.name)));
    }
    let eta = complex_permittivity(material, frequency);
    let (sin, cos) = incidence_angle.sin_cos();
    let root = (eta - sin * sin).sqrt();
    let r_perp = (cos - root) / (cos + root);
    let r_par = (eta * cos - root) / (eta * cos + root);
    Ok((r_perp, r_par))
}

/// Free-space amplitude c / (4π f L) of an isotropic link of length `length`.
pub fn free_space_amplitude(length: f64, frequency: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::contract(format!("path length {length} m must be positive")));
    }
    if !(frequency > 0.0) {
        return Err(Error::contract(format!("frequency {frequency} Hz must be positive")));
    }
    Ok(SPEED_OF_LIGHT / (4.0 * PI * frequency * length))
}

/// Fills delay, per-polarization gain and phase of a geometry-only path.
pub fn characterize_path(path: &PathRecord, scene: &Scene, config: &TraceConfig) -> Result<PathRecord> {
    let f = config.frequency;
    let delay = path.length / config.speed_of_light;
    let amplitude = free_space_amplitude(path.length, f)?;
    let mut perp = Complex64::new(amplitude, 0.0);
    let mut par = Complex64::new(amplitude, 0.0);
    for inter in &path.interactions {
        let material = scene.material_of(inter.facet_id)?;
        let (rs, rp) = fresnel_reflection(inter.incidence_angle, material, f)?;
        perp *= rs;
        par *= rp;
    }
    let propagation = Complex64::from_polar(1.0, -2.0 * PI * f * delay);
    let gain = ComplexGain {
        perp: perp * propagation,
        par: par * propagation,
    };
    let mut out = path.clone();
    out.delay = delay;
    out.channel = Some(PathChannel {
        gain,
        phase: wrap_phase(gain.perp.arg()),
        frequency: f,
    });
    Ok(out)
}

/// Coherent complex sum of the path gains, per polarization.
pub fn aggregate(paths: &[PathRecord]) -> Result<ComplexGain> {
    let mut total = ComplexGain::ZERO;
    let mut frequency: Option<f64> = None;
    for (i, p) in paths.iter().enumerate() {
        let ch = p
            .channel
            .ok_or_else(|| Error::contract(format!("path {i} is not characterized")))?;
        match frequency {
            None => frequency = Some(ch.frequency),
            Some(f) if f != ch.frequency => {
                return Err(Error::contract(format!(
                    "path {i} characterized at {} Hz, expected {f} Hz",
                    ch.frequency
                )))
            }
            _ => {}
        }
        total = total + ch.gain;
    }
    Ok(total)
}

pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dielectric(eps: f64) -> Material {
        Material::new("d", eps, 0.0, [1, 1, 1])
    }

    #[test]
    fn normal_incidence_eps4_is_one_third() {
        let (rs, rp) = fresnel_reflection(0.0, &dielectric(4.0), 2.4e9).unwrap();
        assert!((rs.norm() - 1.0 / 3.0).abs() < 1e-15);
        assert!((rp.norm() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn matched_medium_does_not_reflect() {
        for theta in [0.0, 0.3, 1.2] {
            let (rs, rp) = fresnel_reflection(theta, &dielectric(1.0), 5e9).unwrap();
            assert!(rs.norm() < 1e-15 && rp.norm() < 1e-15);
        }
    }

    #[test]
    fn grazing_incidence_approaches_unity() {
        let (rs, _) = fresnel_reflection(89.9f64.to_radians(), &dielectric(4.0), 2.4e9).unwrap();
        assert!(rs.norm() >= 0.99, "{}", rs.norm());
    }

    #[test]
    fn angle_out_of_range_is_contract_violation() {
        assert!(fresnel_reflection(PI / 2.0, &dielectric(4.0), 1e9).is_err());
        assert!(fresnel_reflection(-0.1, &dielectric(4.0), 1e9).is_err());
    }

    #[test]
    fn free_space_identities() {
        let f = 2.4e9;
        let a1 = free_space_amplitude(1.0, f).unwrap();
        let a2 = free_space_amplitude(2.0, f).unwrap();
        assert!((amplitude_db(a1) - amplitude_db(a2) - 20.0 * 2f64.log10()).abs() < 1e-12);
        let unit = SPEED_OF_LIGHT / (4.0 * PI * f);
        assert!((free_space_amplitude(unit, f).unwrap() - 1.0).abs() < 1e-15);
        assert!(free_space_amplitude(0.0, f).is_err());
        assert!(free_space_amplitude(-1.0, f).is_err());
    }

    #[test]
    fn conductivity_lowers_nothing_when_zero() {
        let m = dielectric(5.0);
        let eta = complex_permittivity(&m, 1e9);
        assert_eq!(eta.im, 0.0);
        let a = fresnel_reflection(0.7, &m, 1e9).unwrap();
        let b = fresnel_reflection(0.7, &m, 7e9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn phase_wraps_into_range() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!((wrap_phase(-0.5) - (2.0 * PI - 0.5)).abs() < 1e-15);
        assert!((wrap_phase(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-15);
        assert!(wrap_phase(-1e-18) < 2.0 * PI);
    }
}
