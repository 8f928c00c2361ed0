//! Material constants, circular cross-section geometry and the viscoelastic
//! constitutive laws of the inflatable rod.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::liegroup::{Mat6, Twist, Vec6};

/// Inflation ratios at or below this value are rejected as a collapsed section.
pub const MIN_INFLATION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Poisson's ratio, strictly below 0.5.
    pub poisson: f64,
    /// Shear viscosity (Pa·s).
    pub viscosity: f64,
    /// Body density (kg/m³).
    pub density: f64,
}

impl MaterialParams {
    pub fn new(youngs_modulus: f64, poisson: f64, viscosity: f64, density: f64) -> Result<Self> {
        let m = MaterialParams {
            youngs_modulus,
            poisson,
            viscosity,
            density,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Young's modulus must be positive, got {}",
                self.youngs_modulus
            )));
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "Poisson's ratio must lie in (0, 0.5); incompressibility is approximated by a value close to 0.5 such as 0.4999, got {}",
                self.poisson
            )));
        }
        if !(self.viscosity >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "viscosity must be non-negative, got {}",
                self.viscosity
            )));
        }
        if !(self.density > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density must be positive, got {}",
                self.density
            )));
        }
        Ok(())
    }

    /// μ = E / (2(1+ν)).
    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson))
    }

    /// λ = Eν / ((1+ν)(1−2ν)).
    pub fn lame_lambda(&self) -> f64 {
        let nu = self.poisson;
        self.youngs_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    /// Extensional viscosity, three times the shear viscosity.
    pub fn extensional_viscosity(&self) -> f64 {
        3.0 * self.viscosity
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometry {
    Cylinder { radius: f64 },
    /// Linear taper from `base_radius` at s = 0 to `tip_radius` at s = L.
    Cone { base_radius: f64, tip_radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionProfile {
    pub length: f64,
    pub geometry: Geometry,
}

/// Reference (undeformed) properties of a circular section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionProperties {
    pub radius: f64,
    pub area: f64,
    pub i11: f64,
    pub i22: f64,
    pub i33: f64,
}

impl SectionProfile {
    pub fn cylinder(length: f64, radius: f64) -> Self {
        SectionProfile {
            length,
            geometry: Geometry::Cylinder { radius },
        }
    }

    pub fn cone(length: f64, base_radius: f64, tip_radius: f64) -> Self {
        SectionProfile {
            length,
            geometry: Geometry::Cone {
                base_radius,
                tip_radius,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rod length must be positive, got {}",
                self.length
            )));
        }
        let ok = match self.geometry {
            Geometry::Cylinder { radius } => radius > 0.0,
            Geometry::Cone {
                base_radius,
                tip_radius,
            } => base_radius > 0.0 && tip_radius > 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(
                "section radius must be positive along the whole rod".into(),
            ));
        }
        Ok(())
    }

    pub fn radius(&self, s: f64) -> f64 {
        match self.geometry {
            Geometry::Cylinder { radius } => radius,
            Geometry::Cone {
                base_radius,
                tip_radius,
            } => base_radius + (tip_radius - base_radius) * s / self.length,
        }
    }

    /// dz/ds.
    pub fn radius_slope(&self) -> f64 {
        match self.geometry {
            Geometry::Cylinder { .. } => 0.0,
            Geometry::Cone {
                base_radius,
                tip_radius,
            } => (tip_radius - base_radius) / self.length,
        }
    }

    pub fn properties(&self, s: f64) -> SectionProperties {
        let z = self.radius(s);
        let z2 = z * z;
        let i = PI * z2 * z2 / 4.0;
        SectionProperties {
            radius: z,
            area: PI * z2,
            i11: i,
            i22: i,
            i33: 2.0 * i,
        }
    }
}

/// `section_properties` as a free function: `(A₀, I₁₁, I₂₂, I₃₃, z)`.
pub fn section_properties(profile: &SectionProfile, s: f64) -> (f64, f64, f64, f64, f64) {
    let p = profile.properties(s);
    (p.area, p.i11, p.i22, p.i33, p.radius)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstitutiveLaw {
    /// Inflation-coupled law with lateral tractions.
    Extended,
    /// Classic Cosserat law, cross-sections rigid.
    Classic,
}

/// Sectional stiffness and damping in `(angular, linear)` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstitutiveMatrices {
    /// `blockdiag(K_θ, K_l)`.
    pub stiffness: Mat6,
    /// `blockdiag(B_θ, B_l)`.
    pub damping: Mat6,
    /// Strain/inflation coupling: a single entry `2λA₀` at the ν₃ slot.
    pub coupling: Vec6,
}

pub fn constitutive_matrices(
    mat: &MaterialParams,
    props: &SectionProperties,
    law: ConstitutiveLaw,
) -> ConstitutiveMatrices {
    let mu = mat.shear_modulus();
    let lambda = mat.lame_lambda();
    let e = mat.youngs_modulus;
    let eta = mat.viscosity;
    let eta_e = mat.extensional_viscosity();
    let a = props.area;
    let (axial_k, axial_b, coupling) = match law {
        ConstitutiveLaw::Extended => ((lambda + 2.0 * mu) * a, 2.0 * eta * a, 2.0 * lambda * a),
        ConstitutiveLaw::Classic => (e * a, eta_e * a, 0.0),
    };
    ConstitutiveMatrices {
        stiffness: Mat6::from_diagonal(&Vec6::new(
            e * props.i11,
            e * props.i22,
            mu * props.i33,
            mu * a,
            mu * a,
            axial_k,
        )),
        damping: Mat6::from_diagonal(&Vec6::new(
            eta_e * props.i11,
            eta_e * props.i22,
            eta * props.i33,
            eta * a,
            eta * a,
            axial_b,
        )),
        coupling: Vec6::new(0.0, 0.0, 0.0, 0.0, 0.0, coupling),
    }
}

fn straight_reference() -> Vec6 {
    Vec6::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
}

pub fn check_inflation(rho: f64, s: f64) -> Result<()> {
    if !(rho > MIN_INFLATION) {
        return Err(Error::DegenerateSection { rho, s });
    }
    Ok(())
}

/// Local-frame internal wrench `Σ(ξ−ξ*) + Υξ̇ + σ(ρ−1)` of the extended law,
/// about the straight stress-free reference.
pub fn internal_wrench_extended(
    mat: &MaterialParams,
    profile: &SectionProfile,
    xi: &Twist,
    xi_dot: &Twist,
    rho: f64,
    s: f64,
) -> Result<Vec6> {
    check_inflation(rho, s)?;
    let c = constitutive_matrices(mat, &profile.properties(s), ConstitutiveLaw::Extended);
    Ok(c.stiffness * (xi.0 - straight_reference()) + c.damping * xi_dot.0 + c.coupling * (rho - 1.0))
}

/// Local-frame internal wrench of the classic law.
pub fn internal_wrench_classic(
    mat: &MaterialParams,
    profile: &SectionProfile,
    xi: &Twist,
    xi_dot: &Twist,
    s: f64,
) -> Vec6 {
    let c = constitutive_matrices(mat, &profile.properties(s), ConstitutiveLaw::Classic);
    c.stiffness * (xi.0 - straight_reference()) + c.damping * xi_dot.0
}

/// Shear-type lateral traction `Q = μI₃₃ρ′ + ηI₃₃ρ̇′`.
pub fn lateral_traction_shear(
    mat: &MaterialParams,
    profile: &SectionProfile,
    rho_prime: f64,
    rho_prime_dot: f64,
    s: f64,
) -> f64 {
    let i33 = profile.properties(s).i33;
    mat.shear_modulus() * i33 * rho_prime + mat.viscosity * i33 * rho_prime_dot
}

/// Normal lateral traction `q = 4(λ+μ)A₀(ρ−1) + 2λA₀(ν₃−1) + 4ηA₀ρ̇`.
pub fn lateral_traction_normal(
    mat: &MaterialParams,
    profile: &SectionProfile,
    rho: f64,
    rho_dot: f64,
    stretch: f64,
    s: f64,
) -> Result<f64> {
    check_inflation(rho, s)?;
    let a = profile.properties(s).area;
    let mu = mat.shear_modulus();
    let lambda = mat.lame_lambda();
    Ok(4.0 * (lambda + mu) * a * (rho - 1.0)
        + 2.0 * lambda * a * (stretch - 1.0)
        + 4.0 * mat.viscosity * a * rho_dot)
}

/// Elastic energy per unit length of the extended law.
pub fn strain_energy_density(
    mat: &MaterialParams,
    profile: &SectionProfile,
    xi: &Twist,
    rho: f64,
    rho_prime: f64,
    s: f64,
) -> Result<f64> {
    check_inflation(rho, s)?;
    let p = profile.properties(s);
    let mu = mat.shear_modulus();
    let lambda = mat.lame_lambda();
    let e = mat.youngs_modulus;
    let d = xi.0 - straight_reference();
    let a = p.area;
    Ok(2.0 * (lambda + mu) * a * (rho - 1.0).powi(2)
        + 2.0 * lambda * a * (rho - 1.0) * d[5]
        + 0.5 * mu * a * (d[3] * d[3] + d[4] * d[4])
        + 0.5 * (lambda + 2.0 * mu) * a * d[5] * d[5]
        + 0.5 * e * (p.i11 * d[0] * d[0] + p.i22 * d[1] * d[1])
        + 0.5 * mu * p.i33 * d[2] * d[2]
        + 0.5 * mu * p.i33 * rho_prime * rho_prime)
}

/// Elastic energy per unit length of the classic law.
pub fn strain_energy_density_classic(mat: &MaterialParams, profile: &SectionProfile, xi: &Twist, s: f64) -> f64 {
    let c = constitutive_matrices(mat, &profile.properties(s), ConstitutiveLaw::Classic);
    let d = xi.0 - straight_reference();
    0.5 * d.dot(&(c.stiffness * d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn silicone() -> MaterialParams {
        MaterialParams::new(1e5, 0.4999, 10.0, 1000.0).unwrap()
    }

    fn twist_with(i: usize, v: f64) -> Twist {
        let mut t = straight_reference();
        t[i] = v;
        Twist(t)
    }

    #[test]
    fn lame_constants_are_consistent() {
        for (e, nu) in [(1e5, 0.4999), (2e3, 0.3), (7.0, 0.45)] {
            let m = MaterialParams::new(e, nu, 1.0, 1000.0).unwrap();
            let mu = m.shear_modulus();
            let la = m.lame_lambda();
            assert!(mu > 0.0 && la > 0.0);
            assert_relative_eq!(mu * (3.0 * la + 2.0 * mu) / (la + mu), e, max_relative = 1e-9);
            assert_relative_eq!(la / (2.0 * (la + mu)), nu, max_relative = 1e-9);
        }
        assert_eq!(silicone().extensional_viscosity(), 30.0);
    }

    #[test]
    fn rejects_incompressible_and_nonpositive() {
        let err = MaterialParams::new(1e5, 0.5, 1.0, 1000.0).unwrap_err();
        assert!(err.to_string().contains("0.4999"));
        assert!(MaterialParams::new(-1.0, 0.3, 1.0, 1000.0).is_err());
        assert!(MaterialParams::new(1.0, 0.3, -1.0, 1000.0).is_err());
        assert!(MaterialParams::new(1.0, 0.3, 1.0, 0.0).is_err());
        assert!(SectionProfile::cone(0.5, 0.01, 0.0).validate().is_err());
        assert!(SectionProfile::cylinder(0.5, 0.01).validate().is_ok());
    }

    #[test]
    fn section_property_examples() {
        let cyl = SectionProfile::cylinder(0.5, 0.0075);
        let (a, i11, i22, i33, z) = section_properties(&cyl, 0.2);
        assert_relative_eq!(a, PI * 5.625e-5, max_relative = 1e-15);
        assert_relative_eq!(a, 1.7671e-4, max_relative = 1e-4);
        assert_eq!(z, 0.0075);
        assert_relative_eq!(i33 - i11 - i22, 0.0);
        let cone = SectionProfile::cone(0.5, 0.015, 0.004);
        assert_eq!(cone.radius(0.0), 0.015);
        assert_relative_eq!(cone.radius(0.5), 0.004, epsilon = 1e-15);
        assert_relative_eq!(cone.radius(0.25), 0.0095, epsilon = 1e-15);
        assert_relative_eq!(cone.radius_slope(), -0.022, epsilon = 1e-15);
        let p = cone.properties(0.3);
        assert_relative_eq!(p.i33, p.i11 + p.i22);
    }

    #[test]
    fn extended_wrench_examples() {
        let m = silicone();
        let prof = SectionProfile::cylinder(0.5, 0.0075);
        let a = prof.properties(0.1).area;
        let zero = Twist::zero();
        let w = internal_wrench_extended(&m, &prof, &twist_with(5, 1.0), &zero, 1.0, 0.1).unwrap();
        assert_eq!(w, Vec6::zeros());
        let w = internal_wrench_extended(&m, &prof, &twist_with(5, 1.01), &zero, 1.0, 0.1).unwrap();
        assert_relative_eq!(
            w[5],
            (m.lame_lambda() + 2.0 * m.shear_modulus()) * a * 0.01,
            max_relative = 1e-12
        );
        let w = internal_wrench_extended(&m, &prof, &twist_with(5, 1.0), &zero, 0.99, 0.1).unwrap();
        assert_relative_eq!(w[5], 2.0 * m.lame_lambda() * a * -0.01, max_relative = 1e-9);
        assert!(w.rows(0, 5).iter().all(|v| *v == 0.0));
        assert!(matches!(
            internal_wrench_extended(&m, &prof, &zero, &zero, 0.05, 0.1),
            Err(Error::DegenerateSection { .. })
        ));
    }

    #[test]
    fn classic_wrench_examples() {
        let m = silicone();
        let prof = SectionProfile::cylinder(0.5, 0.0075);
        let a = prof.properties(0.0).area;
        let zero = Twist::zero();
        assert_eq!(
            internal_wrench_classic(&m, &prof, &twist_with(5, 1.0), &zero, 0.0),
            Vec6::zeros()
        );
        let w = internal_wrench_classic(&m, &prof, &twist_with(5, 1.01), &zero, 0.0);
        assert_relative_eq!(w[5], 1e5 * a * 0.01, max_relative = 1e-12);
        let ext = constitutive_matrices(&m, &prof.properties(0.0), ConstitutiveLaw::Extended);
        let cla = constitutive_matrices(&m, &prof.properties(0.0), ConstitutiveLaw::Classic);
        let dk = ext.stiffness - cla.stiffness;
        let db = ext.damping - cla.damping;
        for i in 0..6 {
            for j in 0..6 {
                if (i, j) != (5, 5) {
                    assert_eq!(dk[(i, j)], 0.0);
                    assert_eq!(db[(i, j)], 0.0);
                }
            }
        }
        assert_relative_eq!(dk[(5, 5)], (m.lame_lambda() + 2.0 * m.shear_modulus() - 1e5) * a);
        assert_relative_eq!(db[(5, 5)], (2.0 - 3.0) * 10.0 * a);
        assert_eq!(cla.coupling, Vec6::zeros());
    }

    #[test]
    fn lateral_traction_examples() {
        let m = silicone();
        let prof = SectionProfile::cylinder(0.5, 0.0075);
        assert_eq!(lateral_traction_shear(&m, &prof, 0.0, 0.0, 0.1), 0.0);
        let i33 = PI * 0.0075f64.powi(4) / 2.0;
        assert_relative_eq!(
            lateral_traction_shear(&m, &prof, 0.1, 0.0, 0.1),
            m.shear_modulus() * i33 * 0.1,
            max_relative = 1e-12
        );
        let q1 = lateral_traction_shear(&m, &prof, 0.3, -0.2, 0.1);
        let q2 = lateral_traction_shear(&m, &prof, -0.3, 0.2, 0.1);
        assert_relative_eq!(q1, -q2);
        assert_eq!(lateral_traction_normal(&m, &prof, 1.0, 0.0, 1.0, 0.1).unwrap(), 0.0);
        let la = m.lame_lambda();
        let mu = m.shear_modulus();
        let a = prof.properties(0.1).area;
        let nu0 = la / (2.0 * (la + mu));
        let stretch = 1.02;
        let rho = 1.0 - nu0 * (stretch - 1.0);
        let q = lateral_traction_normal(&m, &prof, rho, 0.0, stretch, 0.1).unwrap();
        assert!(q.abs() < 1e-9 * 4.0 * (la + mu) * a);
        assert_relative_eq!(
            lateral_traction_normal(&m, &prof, 1.01, 0.0, 1.0, 0.1).unwrap(),
            4.0 * (la + mu) * a * 0.01,
            max_relative = 1e-9
        );
    }

    #[test]
    fn energy_examples() {
        let m = silicone();
        let prof = SectionProfile::cylinder(0.5, 0.0075);
        assert_eq!(
            strain_energy_density(&m, &prof, &twist_with(5, 1.0), 1.0, 0.0, 0.2).unwrap(),
            0.0
        );
        let c = 3.0;
        let e = strain_energy_density(&m, &prof, &twist_with(1, c), 1.0, 0.0, 0.2).unwrap();
        assert_relative_eq!(e, 0.5 * 1e5 * prof.properties(0.2).i22 * c * c, max_relative = 1e-14);
    }

    #[test]
    fn incompressible_limit_recovers_youngs_axial_stiffness() {
        let m = silicone();
        let prof = SectionProfile::cylinder(0.5, 0.0075);
        let a = prof.properties(0.0).area;
        let la = m.lame_lambda();
        let mu = m.shear_modulus();
        let zero = Twist::zero();
        for strain in [-0.05, 0.01, 0.1] {
            // solve q = 0 for ρ, substitute into the axial row
            let rho = 1.0 - la * strain / (2.0 * (la + mu));
            let w = internal_wrench_extended(&m, &prof, &twist_with(5, 1.0 + strain), &zero, rho, 0.0)
                .unwrap();
            assert_relative_eq!(w[5], 1e5 * a * strain, max_relative = 1e-3);
        }
    }
}
