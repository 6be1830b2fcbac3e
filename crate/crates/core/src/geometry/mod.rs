//! Coaxial UCA pair, specular reflectors and the per-element channel.
//!
//! Element n of the transmit ring sits at azimuth 2πn/N and radius r₁,
//! element v of the receive ring at 2πv/N and radius r₂, with the rings D
//! apart. A reflection path is described by the sum d of its perpendicular
//! reflector distances; odd bounce counts mirror the ring (and negate the
//! OAM mode), even counts do not.

mod channel;

pub use channel::{
    build_element_channel, normalized_delays, path_offsets, ChannelTap, DelayIndexing, ElementChannel, FrameTiming,
    TapSource,
};

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of_order(order: usize) -> Self {
        if order % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UcaGeometry {
    num_elements: usize,
    radius_tx: f64,
    radius_rx: f64,
    axial_distance: f64,
    attenuation: f64,
}

impl UcaGeometry {
    /// Both rings carry `num_elements` antennas. Radii may be zero (point
    /// antenna) but must stay below a tenth of the axial distance.
    pub fn new(
        num_elements: usize,
        radius_tx: f64,
        radius_rx: f64,
        axial_distance: f64,
        attenuation: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        if num_elements == 0 {
            return bad("element count must be positive".into());
        }
        if !(axial_distance > 0.0 && axial_distance.is_finite()) {
            return bad(format!("axial distance must be positive, got {axial_distance}"));
        }
        for (name, r) in [("radius_tx", radius_tx), ("radius_rx", radius_rx)] {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("{name} must be non-negative, got {r}"));
            }
            if r >= axial_distance / 10.0 {
                return bad(format!(
                    "{name} = {r} m is too large relative to axial distance {axial_distance} m (need r < D/10)"
                ));
            }
        }
        if !(attenuation > 0.0 && attenuation.is_finite()) {
            return bad(format!("attenuation constant must be positive, got {attenuation}"));
        }
        Ok(Self { num_elements, radius_tx, radius_rx, axial_distance, attenuation })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }
    pub fn radius_tx(&self) -> f64 {
        self.radius_tx
    }
    pub fn radius_rx(&self) -> f64 {
        self.radius_rx
    }
    pub fn axial_distance(&self) -> f64 {
        self.axial_distance
    }
    pub fn attenuation(&self) -> f64 {
        self.attenuation
    }

    pub fn with_num_elements(&self, num_elements: usize) -> Result<Self> {
        Self::new(num_elements, self.radius_tx, self.radius_rx, self.axial_distance, self.attenuation)
    }

    pub fn with_axial_distance(&self, axial_distance: f64) -> Result<Self> {
        Self::new(self.num_elements, self.radius_tx, self.radius_rx, axial_distance, self.attenuation)
    }

    /// Azimuth 2πi/N of element i.
    pub fn element_angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.num_elements as f64
    }

    /// √(D² + r₁² + r₂²), the LoS reference distance.
    pub fn reference_distance(&self) -> f64 {
        self.reflected_reference_distance(0.0)
    }

    /// √(D² + r₁² + r₂² + 4d²) for a reflection path of total distance d.
    pub fn reflected_reference_distance(&self, d_path: f64) -> f64 {
        let (r1, r2, dd) = (self.radius_tx, self.radius_rx, self.axial_distance);
        (dd * dd + r1 * r1 + r2 * r2 + 4.0 * d_path * d_path).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionPath {
    bounce_distances: Vec<f64>,
    permittivities: Vec<f64>,
}

impl ReflectionPath {
    /// One entry per bounce, 1 to 3 bounces.
    pub fn new(bounce_distances: Vec<f64>, permittivities: Vec<f64>) -> Result<Self> {
        let order = bounce_distances.len();
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidPath(format!("bounce order must be 1, 2 or 3, got {order}")));
        }
        if permittivities.len() != order {
            return Err(Error::InvalidPath(format!(
                "{} permittivities given for {order} bounces",
                permittivities.len()
            )));
        }
        if let Some(e) = permittivities.iter().find(|e| !(**e > 1.0 && e.is_finite())) {
            return Err(Error::InvalidPath(format!("permittivity must exceed 1, got {e}")));
        }
        if let Some(d) = bounce_distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidPath(format!("bounce distance must be positive, got {d}")));
        }
        Ok(Self { bounce_distances, permittivities })
    }

    /// Splits `total_distance` evenly over `order` bounces, all with the
    /// same permittivity.
    pub fn uniform(order: usize, total_distance: f64, permittivity: f64) -> Result<Self> {
        let order_f = order.max(1) as f64;
        Self::new(vec![total_distance / order_f; order], vec![permittivity; order])
    }

    pub fn order(&self) -> usize {
        self.bounce_distances.len()
    }
    pub fn parity(&self) -> Parity {
        Parity::of_order(self.order())
    }
    pub fn bounce_distances(&self) -> &[f64] {
        &self.bounce_distances
    }
    pub fn permittivities(&self) -> &[f64] {
        &self.permittivities
    }

    /// Sum of the bounce distances.
    pub fn total_distance(&self) -> f64 {
        self.bounce_distances.iter().sum()
    }

    /// Each bounce distance must lie in (max(r₁, r₂), D).
    pub fn validate_against(&self, geom: &UcaGeometry) -> Result<()> {
        let rmax = geom.radius_tx.max(geom.radius_rx);
        for &d in &self.bounce_distances {
            if d <= rmax {
                return Err(Error::InvalidPath(format!("bounce distance {d} m must exceed the array radius {rmax} m")));
            }
            if d >= geom.axial_distance {
                return Err(Error::InvalidPath(format!(
                    "bounce distance {d} m must be below the axial distance {} m",
                    geom.axial_distance
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSet {
    pub include_los: bool,
    pub reflections: Vec<ReflectionPath>,
}

impl PathSet {
    pub fn los_only() -> Self {
        Self { include_los: true, reflections: Vec::new() }
    }

    /// LoS plus `per_category` paths of each order. The i-th path of every
    /// order (i from 0) has total distance `base + step·i`, split evenly over
    /// its bounces.
    pub fn preset(per_category: usize, base: f64, step: f64, permittivity: f64) -> Result<Self> {
        let mut reflections = Vec::with_capacity(3 * per_category);
        for order in 1..=3 {
            for i in 0..per_category {
                reflections.push(ReflectionPath::uniform(order, base + step * i as f64, permittivity)?);
            }
        }
        Ok(Self { include_los: true, reflections })
    }

    /// [`PathSet::preset`] selected by total path count L_p = 1 + 3k.
    pub fn preset_with_total(total_paths: usize, base: f64, step: f64, permittivity: f64) -> Result<Self> {
        if total_paths == 0 || !(total_paths - 1).is_multiple_of(3) {
            return Err(Error::InvalidArgument(format!("preset path count must be 1 + 3k, got {total_paths}")));
        }
        Self::preset((total_paths - 1) / 3, base, step, permittivity)
    }

    /// L_p = 1 + N_r + N_t + N_e with LoS, otherwise the reflection count.
    pub fn path_count(&self) -> usize {
        self.reflections.len() + usize::from(self.include_los)
    }

    /// Largest total reflection distance, the d_max of the compensator.
    pub fn max_path_distance(&self) -> Option<f64> {
        self.reflections.iter().map(ReflectionPath::total_distance).reduce(f64::max)
    }

    /// 1-based position of each reflection within its bounce-order category.
    pub fn category_indices(&self) -> Vec<usize> {
        let mut counts = [0usize; 4];
        self.reflections
            .iter()
            .map(|p| {
                counts[p.order()] += 1;
                counts[p.order()]
            })
            .collect()
    }

    pub fn validate_against(&self, geom: &UcaGeometry) -> Result<()> {
        self.reflections.iter().try_for_each(|p| p.validate_against(geom))
    }
}

/// Exact LoS element distance √(D² + r₁² + r₂² − 2r₁r₂cos(a_v − a_n)).
pub fn los_distance_exact(geom: &UcaGeometry, v: usize, n: usize) -> f64 {
    let q = geom.reference_distance();
    let c = (geom.element_angle(v) - geom.element_angle(n)).cos();
    (q * q - 2.0 * geom.radius_tx * geom.radius_rx * c).sqrt()
}

/// First-order Taylor form of [`los_distance_exact`] in r₁r₂/q².
pub fn los_distance_taylor(geom: &UcaGeometry, v: usize, n: usize) -> f64 {
    let q = geom.reference_distance();
    let c = (geom.element_angle(v) - geom.element_angle(n)).cos();
    q - geom.radius_tx * geom.radius_rx * c / q
}

pub fn los_gain(geom: &UcaGeometry, v: usize, n: usize, wavelength: f64) -> Complex64 {
    let q = geom.reference_distance();
    let c = (geom.element_angle(v) - geom.element_angle(n)).cos();
    let amp = geom.attenuation * wavelength / (4.0 * PI * q);
    let phase = -2.0 * PI * q / wavelength + 2.0 * PI * geom.radius_tx * geom.radius_rx * c / (wavelength * q);
    Complex64::from_polar(amp, phase)
}

/// Taylor-form reflection distance. Odd orders use the single-bounce form,
/// order 2 the double-bounce form with its own sign pattern.
pub fn reflection_distance(geom: &UcaGeometry, path: &ReflectionPath, v: usize, n: usize) -> f64 {
    let d = path.total_distance();
    let qd = geom.reflected_reference_distance(d);
    let (r1, r2) = (geom.radius_tx, geom.radius_rx);
    let (an, av) = (geom.element_angle(n), geom.element_angle(v));
    let t = match path.parity() {
        Parity::Odd => -r1 * r2 * (av + an).cos() + 2.0 * r2 * d * av.cos() + 2.0 * r1 * d * an.cos(),
        Parity::Even => r1 * r2 * (av - an).cos() - 2.0 * r2 * d * av.cos() + 2.0 * r1 * d * an.cos(),
    };
    qd * (1.0 - t / (qd * qd))
}

/// Image-source distance. Odd bounce counts mirror the transmit ring
/// across the reflector, even counts translate it by 2d.
pub fn reflection_distance_exact(geom: &UcaGeometry, path: &ReflectionPath, v: usize, n: usize) -> f64 {
    let d = path.total_distance();
    let (r1, r2, dd) = (geom.radius_tx, geom.radius_rx, geom.axial_distance);
    let (an, av) = (geom.element_angle(n), geom.element_angle(v));
    let x = match path.parity() {
        Parity::Odd => 2.0 * d - r1 * an.cos() - r2 * av.cos(),
        Parity::Even => 2.0 * d - r1 * an.cos() + r2 * av.cos(),
    };
    let y = r1 * an.sin() - r2 * av.sin();
    (x * x + y * y + dd * dd).sqrt()
}

/// Vertical-polarization Fresnel coefficient; `alpha` is the grazing angle.
pub fn fresnel_coefficient(alpha: f64, permittivity: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= PI / 2.0 + 1e-12) {
        return Err(Error::Domain { what: "grazing angle", value: alpha });
    }
    if !(permittivity > 1.0) {
        return Err(Error::Domain { what: "permittivity", value: permittivity });
    }
    let (s, c) = alpha.sin_cos();
    let radicand = permittivity - c * c / permittivity;
    if radicand < 0.0 {
        return Err(Error::Domain { what: "Fresnel radicand", value: radicand });
    }
    let root = radicand.sqrt();
    Ok((s - root) / (s + root))
}

pub fn reflection_angle(geom: &UcaGeometry, path: &ReflectionPath, v: usize, n: usize) -> Result<f64> {
    let d = path.total_distance();
    let num = 2.0 * d - geom.radius_tx * geom.element_angle(n).cos() - geom.radius_rx * geom.element_angle(v).cos();
    let ratio = num / reflection_distance(geom, path, v, n);
    if ratio.abs() > 1.0 {
        return Err(Error::Domain { what: "reflection angle sine", value: ratio });
    }
    Ok(ratio.asin())
}

/// Per-pair product of per-bounce Fresnel coefficients, averaged over all
/// N² element pairs.
pub fn path_reflection_coefficient(geom: &UcaGeometry, path: &ReflectionPath) -> Result<f64> {
    let nn = geom.num_elements;
    let mut acc = 0.0;
    for v in 0..nn {
        for n in 0..nn {
            let alpha = reflection_angle(geom, path, v, n)?;
            let mut prod = 1.0;
            for &eps in path.permittivities() {
                prod *= fresnel_coefficient(alpha, eps)?;
            }
            acc += prod;
        }
    }
    Ok(acc / (nn * nn) as f64)
}

pub fn reflection_gain(
    geom: &UcaGeometry,
    path: &ReflectionPath,
    v: usize,
    n: usize,
    wavelength: f64,
) -> Result<Complex64> {
    let coefficient = path_reflection_coefficient(geom, path)?;
    Ok(reflection_gain_with_coefficient(geom, path, coefficient, v, n, wavelength))
}

/// [`reflection_gain`] with R_path supplied, so callers can compute the
/// N²-pair average once per path.
pub fn reflection_gain_with_coefficient(
    geom: &UcaGeometry,
    path: &ReflectionPath,
    coefficient: f64,
    v: usize,
    n: usize,
    wavelength: f64,
) -> Complex64 {
    let d = path.total_distance();
    let qd = geom.reflected_reference_distance(d);
    let (r1, r2) = (geom.radius_tx, geom.radius_rx);
    let (an, av) = (geom.element_angle(n), geom.element_angle(v));
    let t = match path.parity() {
        Parity::Odd => -r1 * r2 * (av + an).cos() + 2.0 * r1 * d * an.cos() + 2.0 * r2 * d * av.cos(),
        Parity::Even => r1 * r2 * (av - an).cos() - 2.0 * r1 * d * an.cos() + 2.0 * r2 * d * av.cos(),
    };
    let amp = coefficient * geom.attenuation * wavelength / (4.0 * PI * qd);
    let phase = -2.0 * PI * qd / wavelength + 2.0 * PI * t / (wavelength * qd);
    Complex64::from_polar(1.0, phase) * amp
}

/// Excess delay of the reflection over the LoS path between the same pair.
pub fn path_delay(geom: &UcaGeometry, path: &ReflectionPath, v: usize, n: usize) -> f64 {
    (reflection_distance_exact(geom, path, v, n) - los_distance_exact(geom, v, n)) / SPEED_OF_LIGHT
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize) -> UcaGeometry {
        UcaGeometry::new(n, 0.05, 0.05, 3.0, 1.0).unwrap()
    }

    fn lambda60() -> f64 {
        SPEED_OF_LIGHT / 60e9
    }

    #[test]
    fn geometry_validation() {
        assert!(UcaGeometry::new(8, 1.5, 0.05, 3.0, 1.0).is_err());
        assert!(UcaGeometry::new(8, 0.05, 0.3, 3.0, 1.0).is_err());
        assert!(UcaGeometry::new(0, 0.05, 0.05, 3.0, 1.0).is_err());
        assert!(UcaGeometry::new(8, 0.0, 0.0, 3.0, 1.0).is_ok());
        let e = UcaGeometry::new(8, 1.5, 0.05, 3.0, 1.0).unwrap_err().to_string();
        assert!(e.contains("too large relative to axial distance"), "{e}");
    }

    #[test]
    fn path_validation() {
        assert!(ReflectionPath::new(vec![0.5], vec![0.5]).is_err());
        assert!(ReflectionPath::new(vec![0.5, 0.2], vec![15.0]).is_err());
        assert!(ReflectionPath::new(vec![], vec![]).is_err());
        assert!(ReflectionPath::new(vec![0.1; 4], vec![15.0; 4]).is_err());
        let g = geom(8);
        assert!(ReflectionPath::new(vec![0.04], vec![15.0]).unwrap().validate_against(&g).is_err());
        assert!(ReflectionPath::new(vec![3.5], vec![15.0]).unwrap().validate_against(&g).is_err());
        assert!(ReflectionPath::new(vec![0.5], vec![15.0]).unwrap().validate_against(&g).is_ok());
    }

    #[test]
    fn los_distance_examples() {
        let g = geom(8);
        assert_eq!(los_distance_exact(&g, 3, 3), 3.0);
        let opposite = los_distance_exact(&g, 5, 1);
        assert!((opposite - (9.0f64 + 0.01).sqrt()).abs() < 1e-15);
        for v in 0..8 {
            for n in 0..8 {
                let e = los_distance_exact(&g, v, n);
                let t = los_distance_taylor(&g, v, n);
                assert!(((t - e) / e).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn los_distance_is_rotation_invariant() {
        let g = geom(8);
        for v in 0..8 {
            for n in 0..8 {
                let base = los_distance_exact(&g, (v + 8 - n) % 8, 0);
                assert!((los_distance_exact(&g, v, n) - base).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn los_gain_magnitude_and_phase() {
        let g = geom(8);
        let lam = lambda60();
        let expected = lam / (4.0 * PI * (9.005f64).sqrt());
        assert!((expected - 1.325e-4).abs() < 5e-8);
        for v in 0..8 {
            for n in 0..8 {
                assert!((los_gain(&g, v, n, lam).norm() - expected).abs() < 1e-18);
            }
        }
        let point = UcaGeometry::new(8, 0.0, 0.05, 3.0, 1.0).unwrap();
        let h0 = los_gain(&point, 0, 0, lam);
        for v in 0..8 {
            for n in 0..8 {
                assert!((los_gain(&point, v, n, lam) - h0).norm() < 1e-18);
            }
        }
    }

    #[test]
    fn reflection_distance_examples() {
        let g = geom(8);
        let p = ReflectionPath::new(vec![0.5], vec![15.0]).unwrap();
        let exact00 = reflection_distance_exact(&g, &p, 0, 0);
        assert!((exact00 - ((1.0f64 - 0.1).powi(2) + 9.0).sqrt()).abs() < 1e-14);
        for v in 0..8 {
            for n in 0..8 {
                let e = reflection_distance_exact(&g, &p, v, n);
                let t = reflection_distance(&g, &p, v, n);
                assert!(((t - e) / e).abs() < 1e-4, "v={v} n={n}");
            }
        }
        let p2 = ReflectionPath::new(vec![0.25, 0.25], vec![15.0, 15.0]).unwrap();
        for v in 0..8 {
            for n in 0..8 {
                let e = reflection_distance_exact(&g, &p2, v, n);
                let t = reflection_distance(&g, &p2, v, n);
                assert!(((t - e) / e).abs() < 1e-4, "v={v} n={n}");
            }
        }
    }

    #[test]
    fn double_bounce_distance_uses_its_own_sign_pattern() {
        let g = geom(8);
        let p1 = ReflectionPath::new(vec![0.5], vec![15.0]).unwrap();
        let p2 = ReflectionPath::new(vec![0.25, 0.25], vec![15.0, 15.0]).unwrap();
        let (r, d, qd) = (0.05, 0.5, g.reflected_reference_distance(0.5));
        for v in 0..8 {
            for n in 0..8 {
                let (an, av) = (g.element_angle(n), g.element_angle(v));
                let t1 = -r * r * (av + an).cos() + 2.0 * r * d * av.cos() + 2.0 * r * d * an.cos();
                let t2 = r * r * (av - an).cos() - 2.0 * r * d * av.cos() + 2.0 * r * d * an.cos();
                assert!((reflection_distance(&g, &p1, v, n) - (qd - t1 / qd)).abs() < 1e-14);
                assert!((reflection_distance(&g, &p2, v, n) - (qd - t2 / qd)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fresnel_examples() {
        let f = fresnel_coefficient(PI / 2.0, 15.0).unwrap();
        assert!((f - (1.0 - 15f64.sqrt()) / (1.0 + 15f64.sqrt())).abs() < 1e-15);
        assert!((f + 0.589574).abs() < 1e-6);
        let g = fresnel_coefficient(PI / 6.0, 15.0).unwrap();
        let expect = (0.5 - (15.0f64 - 0.75 / 15.0).sqrt()) / (0.5 + (15.0f64 - 0.75 / 15.0).sqrt());
        assert!((g - expect).abs() < 1e-15);
        assert!((g + 0.7710).abs() < 1e-4);
        assert!((fresnel_coefficient(0.7, 1e12).unwrap() + 1.0).abs() < 1e-5);
        assert!(fresnel_coefficient(0.0, 15.0).is_err());
        assert!(fresnel_coefficient(0.5, 1.0).is_err());
    }

    #[test]
    fn fresnel_in_minus_one_zero_on_dense_grid() {
        for i in 1..=200 {
            let alpha = PI / 2.0 * i as f64 / 200.0;
            for j in 0..100 {
                let eps = 1.01 + j as f64 * 0.8;
                let f = fresnel_coefficient(alpha, eps).unwrap();
                assert!((-1.0..=0.0).contains(&f), "alpha={alpha} eps={eps} f={f}");
            }
        }
    }

    #[test]
    fn reflection_angle_examples() {
        let g = geom(8);
        let p = ReflectionPath::new(vec![0.5], vec![15.0]).unwrap();
        let a = reflection_angle(&g, &p, 0, 0).unwrap();
        assert!((a - (0.9 / reflection_distance(&g, &p, 0, 0)).asin()).abs() < 1e-15);
        for v in 0..8 {
            for n in 0..8 {
                let x = reflection_angle(&g, &p, v, n).unwrap();
                let y = reflection_angle(&g, &p, n, v).unwrap();
                assert!((x - y).abs() < 1e-14);
            }
        }
        let point = UcaGeometry::new(8, 0.0, 0.0, 3.0, 1.0).unwrap();
        let half = ReflectionPath::new(vec![1.5 - 1e-12], vec![15.0]).unwrap();
        assert!((reflection_angle(&point, &half, 2, 5).unwrap() - PI / 4.0).abs() < 1e-9);
    }

    #[test]
    fn reflection_coefficient_examples() {
        let point = UcaGeometry::new(8, 0.0, 0.0, 3.0, 1.0).unwrap();
        // α → π/2 needs d ≫ D; with r = 0 every pair shares one angle
        let p = ReflectionPath::new(vec![0.5], vec![15.0]).unwrap();
        let r = path_reflection_coefficient(&point, &p).unwrap();
        let alpha = (1.0f64 / (9.0f64 + 1.0).sqrt()).asin();
        assert!((r - fresnel_coefficient(alpha, 15.0).unwrap()).abs() < 1e-15);

        let g = geom(8);
        let p2 = ReflectionPath::new(vec![0.25, 0.25], vec![15.0, 15.0]).unwrap();
        let r2 = path_reflection_coefficient(&g, &p2).unwrap();
        let mut sq = 0.0;
        for v in 0..8 {
            for n in 0..8 {
                let a = reflection_angle(&g, &p2, v, n).unwrap();
                sq += fresnel_coefficient(a, 15.0).unwrap().powi(2);
            }
        }
        assert!((r2 - sq / 64.0).abs() < 1e-15);
        assert!(r2 >= 0.0);
    }

    #[test]
    fn reflection_coefficient_bounded_over_sweep() {
        let g = geom(8);
        for i in 0..9 {
            let d = 0.2 + 0.1 * i as f64;
            for eps in [2.0, 5.0, 10.0, 15.0, 30.0, 50.0, 80.0] {
                for order in 1..=3 {
                    // keep every bounce outside the ring radius
                    let p = ReflectionPath::uniform(order, d.max(0.06 * order as f64), eps).unwrap();
                    let r = path_reflection_coefficient(&g, &p).unwrap();
                    assert!(r.abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn reflection_gain_matches_term_by_term_evaluation() {
        let g = geom(8);
        let lam = 4.9965e-3;
        let p = ReflectionPath::new(vec![0.5], vec![15.0]).unwrap();
        let rc = path_reflection_coefficient(&g, &p).unwrap();
        let (v, n) = (1usize, 2usize);
        let qd = (9.0f64 + 0.0025 + 0.0025 + 1.0).sqrt();
        let av = 2.0 * PI / 8.0;
        let an = 4.0 * PI / 8.0;
        let amp = rc * lam / (4.0 * PI * qd);
        let ph1 = (-2.0 * PI * qd / lam).rem_euclid(2.0 * PI);
        let inner = -0.0025 * (av + an).cos() + 2.0 * 0.05 * 0.5 * an.cos() + 2.0 * 0.05 * 0.5 * av.cos();
        let ph2 = 2.0 * PI * inner / (lam * qd);
        let expect = Complex64::new(amp, 0.0) * Complex64::new(0.0, ph1).exp() * Complex64::new(0.0, ph2).exp();
        let got = reflection_gain(&g, &p, v, n, lam).unwrap();
        assert!((got - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn reflection_weaker_than_los() {
        let g = geom(8);
        let lam = lambda60();
        for order in 1..=3 {
            let p = ReflectionPath::uniform(order, 0.5, 15.0).unwrap();
            let los = los_gain(&g, 0, 0, lam).norm();
            for v in 0..8 {
                let h = reflection_gain(&g, &p, v, 3, lam).unwrap();
                assert!(h.norm() < los);
            }
        }
    }

    #[test]
    fn delays_positive_and_ordered() {
        let g = geom(8);
        for order in 1..=3 {
            let mut last = vec![0.0; 64];
            for i in 1..=10 {
                let d = 0.1 * i as f64 * order as f64;
                let p = ReflectionPath::uniform(order, d, 15.0).unwrap();
                for v in 0..8 {
                    for n in 0..8 {
                        let t = path_delay(&g, &p, v, n);
                        assert!(t > 0.0);
                        assert!(t > last[v * 8 + n]);
                        last[v * 8 + n] = t;
                    }
                }
            }
        }
        let p = ReflectionPath::new(vec![0.5], vec![15.0]).unwrap();
        let t = path_delay(&g, &p, 0, 0);
        let expect = (reflection_distance_exact(&g, &p, 0, 0) - 3.0) / SPEED_OF_LIGHT;
        assert_eq!(t, expect);
    }

    #[test]
    fn taylor_error_shrinks_quadratically_with_distance() {
        let p = ReflectionPath::new(vec![0.5], vec![15.0]).unwrap();
        let max_err = |dd: f64| {
            let g = UcaGeometry::new(8, 0.05, 0.05, dd, 1.0).unwrap();
            let mut worst: f64 = 0.0;
            for v in 0..8 {
                for n in 0..8 {
                    let e = reflection_distance_exact(&g, &p, v, n);
                    worst = worst.max(((reflection_distance(&g, &p, v, n) - e) / e).abs());
                    let l = los_distance_exact(&g, v, n);
                    worst = worst.max(((los_distance_taylor(&g, v, n) - l) / l).abs());
                }
            }
            worst
        };
        let mut prev = max_err(3.0);
        for k in 1..5 {
            let cur = max_err(3.0 * 2f64.powi(k));
            assert!(cur <= prev / 4.0, "D doubling {k}: {prev} -> {cur}");
            prev = cur;
        }
    }

    #[test]
    fn presets_and_indices() {
        let ps = PathSet::preset_with_total(7, 0.4, 0.15, 15.0).unwrap();
        assert_eq!(ps.path_count(), 7);
        assert_eq!(ps.category_indices(), vec![1, 2, 1, 2, 1, 2]);
        assert!((ps.max_path_distance().unwrap() - 0.55).abs() < 1e-15);
        assert_eq!(ps.reflections[3].bounce_distances(), &[0.275, 0.275]);
        assert!(PathSet::preset_with_total(5, 0.4, 0.15, 15.0).is_err());
        assert_eq!(PathSet::los_only().path_count(), 1);
    }
}
