//! The continuum limit: Sturm–Liouville spectrum, the Airy closed form and
//! the Ferrari–Spohn diffusion.

pub mod airy;
pub mod diffusion;
pub mod sturm;

pub use airy::{airy_ai, airy_zero};
pub use diffusion::{
    sample_fs_fdd, simulate_fs, simulate_fs_thinned, ContinuumPath, DriftValue, FsDiffusionModel,
    SimulationDiagnostics,
};
pub use sturm::{fs_semigroup_apply, semigroup_apply, sl_solve, sl_solve_with, SturmLiouvilleSpectrum};

/// Closed-form ground state for `q(r) = r`:
/// `e_0 = ω₁/χ`, `φ_0(r) = Ai(χ r − ω₁)/‖·‖` with `χ = (2/σ²)^{1/3}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryGroundState {
    pub sigma2: f64,
    pub chi: f64,
    pub omega1: f64,
    pub e0: f64,
    /// `‖Ai(χ· − ω₁)‖₂ = |Ai′(−ω₁)|/√χ`.
    pub norm: f64,
}

impl AiryGroundState {
    pub fn phi0(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            airy_ai(self.chi * r - self.omega1).0 / self.norm
        }
    }
}

pub fn airy_ground_state(sigma2: f64) -> crate::Result<AiryGroundState> {
    if !(sigma2 > 0.0) {
        return Err(crate::Error::InvalidParameter {
            name: "sigma2".into(),
            reason: "must be positive".into(),
        });
    }
    let chi = (2.0 / sigma2).cbrt();
    let omega1 = airy_zero(1);
    let slope = airy_ai(-omega1).1;
    Ok(AiryGroundState {
        sigma2,
        chi,
        omega1,
        e0: omega1 / chi,
        norm: slope.abs() / chi.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form() {
        let g = airy_ground_state(2.0).unwrap();
        assert_eq!(g.chi, 1.0);
        assert!((g.e0 - 2.33811).abs() < 1e-5);
        assert_eq!(g.phi0(0.0), 0.0);
        assert!(g.phi0(1e-9).abs() < 1e-8);
        let h = airy_ground_state(0.5).unwrap();
        assert!((h.chi - 4f64.cbrt()).abs() < 1e-15);
        assert!((h.e0 - 1.472_9).abs() < 1e-4);
        // Unit L² norm by quadrature.
        let dr = 1e-3;
        let mass: f64 = (1..20_000).map(|i| h.phi0(i as f64 * dr).powi(2)).sum::<f64>() * dr;
        assert!((mass - 1.0).abs() < 1e-9);
    }
}
