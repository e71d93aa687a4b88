//! ULA and UPA steering vectors.
//!
//! Entries are unit modulus and unnormalized; any `1/sqrt(N)` factor belongs
//! to the caller (path gain or codebook scaling).

use nalgebra::{Complex, DVector, Vector3};

use crate::error::{Error, Result};
use crate::scalar::{cis, count, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayGeometry {
    Ula {
        n: usize,
    },
    /// Flattened with the Y index fastest: entry `a + m_y * b`.
    Upa {
        m_y: usize,
        m_z: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T: Real> {
    pub entries: DVector<Complex<T>>,
    pub geometry: ArrayGeometry,
    pub azimuth: T,
    pub elevation: T,
}

impl<T: Real> SteeringVector<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Azimuth in `(-pi, pi]` and elevation in `[-pi/2, pi/2]` of `direction`.
///
/// A vertical direction has no defined azimuth; 0 is returned.
pub fn angles_from_vector<T: Real>(direction: &Vector3<T>) -> Result<(T, T)> {
    let norm = direction.norm();
    if norm == T::zero() {
        return Err(Error::ZeroDirection);
    }
    let (x, y, z) = (direction.x, direction.y, direction.z);
    let azimuth = if x == T::zero() && y == T::zero() {
        T::zero()
    } else {
        let a = y.atan2(x);
        if a <= -T::pi() {
            T::pi()
        } else {
            a
        }
    };
    let ratio = (z / norm).max(-T::one()).min(T::one());
    Ok((azimuth, ratio.asin()))
}

/// Unit vector pointing at `(azimuth, elevation)`.
pub fn unit_vector<T: Real>(azimuth: T, elevation: T) -> Vector3<T> {
    Vector3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    )
}

/// `exp(j 2 pi s k sin(azimuth))` for `k = 0..n`.
pub fn ula_steering<T: Real>(n: usize, azimuth: T, spacing_wavelengths: T) -> SteeringVector<T> {
    let step = T::two_pi() * spacing_wavelengths * azimuth.sin();
    SteeringVector {
        entries: DVector::from_fn(n, |k, _| cis(step * count::<T>(k))),
        geometry: ArrayGeometry::Ula { n },
        azimuth,
        elevation: T::zero(),
    }
}

/// Single UPA entry for element `(a, b)`.
pub fn upa_entry<T: Real>(a: usize, b: usize, azimuth: T, elevation: T, spacing_wavelengths: T) -> Complex<T> {
    let phase = T::two_pi()
        * spacing_wavelengths
        * (count::<T>(a) * azimuth.sin() * elevation.cos() + count::<T>(b) * elevation.sin());
    cis(phase)
}

pub fn upa_steering<T: Real>(
    m_y: usize,
    m_z: usize,
    azimuth: T,
    elevation: T,
    spacing_wavelengths: T,
) -> SteeringVector<T> {
    let entries = DVector::from_fn(m_y * m_z, |idx, _| {
        upa_entry(idx % m_y, idx / m_y, azimuth, elevation, spacing_wavelengths)
    });
    SteeringVector {
        entries,
        geometry: ArrayGeometry::Upa { m_y, m_z },
        azimuth,
        elevation,
    }
}

/// Half-wavelength spacing expressed in wavelengths.
pub fn half_wavelength<T: Real>() -> T {
    lit(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

    fn close(a: Complex<f64>, b: Complex<f64>) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn angle_examples() {
        assert_eq!(angles_from_vector(&Vector3::new(1.0, 0.0, 0.0)).unwrap(), (0.0, 0.0));
        let (az, el) = angles_from_vector(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((az, el), (0.0, FRAC_PI_2));
        let (az, el) = angles_from_vector(&Vector3::new(1.0, 1.0, 2f64.sqrt())).unwrap();
        assert!((az - FRAC_PI_4).abs() < 1e-15);
        assert!((el - FRAC_PI_4).abs() < 1e-15);
        assert!(angles_from_vector(&Vector3::<f64>::zeros()).is_err());
        let (az, _) = angles_from_vector(&Vector3::new(-1.0, -0.0, 0.0)).unwrap();
        assert_eq!(az, PI);
    }

    #[test]
    fn ula_examples() {
        let v = ula_steering(1, 0.7, 0.5);
        assert_eq!(v.entries.len(), 1);
        assert!(close(v.entries[0], Complex::new(1.0, 0.0)));
        let v = ula_steering(4, 0.0, 0.5);
        assert!(v.entries.iter().all(|e| close(*e, Complex::new(1.0, 0.0))));
        let v = ula_steering(4, FRAC_PI_6, 0.5);
        let expect = [
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 1.0),
            Complex::new(-1.0, 0.0),
            Complex::new(0.0, -1.0),
        ];
        for (e, x) in v.entries.iter().zip(expect) {
            assert!(close(*e, x), "{e} vs {x}");
        }
    }

    #[test]
    fn upa_examples() {
        let v = upa_steering(1, 1, 0.3, 0.2, 0.5);
        assert!(close(v.entries[0], Complex::new(1.0, 0.0)));
        let v = upa_steering(3, 2, 0.0, 0.0, 0.5);
        assert_eq!(v.len(), 6);
        assert!(v.entries.iter().all(|e| close(*e, Complex::new(1.0, 0.0))));
        let v = upa_steering(2, 2, FRAC_PI_2, 0.0, 0.5);
        let one = Complex::new(1.0, 0.0);
        for (e, x) in v.entries.iter().zip([one, -one, one, -one]) {
            assert!(close(*e, x), "{e} vs {x}");
        }
    }

    proptest! {
        #[test]
        fn steering_norm_equals_count(n in 1usize..32, az in -3.2f64..3.2, el in -1.5f64..1.5, s in 0.1f64..2.0) {
            let v = ula_steering(n, az, s);
            prop_assert!((v.entries.norm_squared() - n as f64).abs() < 1e-10);
            let u = upa_steering(n, 3, az, el, s);
            prop_assert!((u.entries.norm_squared() - 3.0 * n as f64).abs() < 1e-10);
            for e in u.entries.iter() {
                prop_assert!((e.norm() - 1.0).abs() < 1e-14);
            }
        }

        #[test]
        fn ula_conjugate_symmetry(n in 1usize..16, az in -3.1f64..3.1) {
            let a = ula_steering(n, az, 0.5);
            let b = ula_steering(n, -az, 0.5);
            for (x, y) in a.entries.iter().zip(b.entries.iter()) {
                prop_assert!((x.conj() - y).norm() < 1e-12);
            }
        }

        #[test]
        fn angles_round_trip(az in -3.1f64..3.1, el in -1.5f64..1.5) {
            let (a, e) = angles_from_vector(&unit_vector(az, el)).unwrap();
            prop_assert!((a - az).abs() < 1e-12);
            prop_assert!((e - el).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_steering() {
        let v = ula_steering::<f32>(4, 0.3, 0.5);
        assert!(v.entries.iter().all(|e| (e.norm() - 1.0).abs() < 1e-6));
    }
}
