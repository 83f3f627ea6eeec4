use std::sync::Arc;

use super::{make_sign_rotor, resolve_iid_phases, PhaseLaw, Rotor, SpectralResolution};
use crate::error::{Error, Result};
use crate::grid_paths::{sample_brownian, RngStream, TimeGrid};

/// Recipe for the rotor used at each level of an iteration.
///
/// Level `j ≥ 1` of a family draws its own randomness from
/// `aux.substream(j)`, so fresh phases or auxiliary paths are independent
/// across levels and across starting paths (given distinct `aux`).
#[derive(Clone, Debug)]
pub enum RotorFamily {
    /// The same rotor at every level.
    Fixed(Rotor),
    /// `R_j = ∫ e^{iψ_j(θ)} dp_θ` with `ψ_j` i.i.d. across levels.
    IidPhase {
        resolution: Arc<SpectralResolution>,
        law: PhaseLaw,
    },
    /// `R_j h = sign(b^j) ḣ` with fresh auxiliary Brownian paths `b^j`.
    Sign { grid: TimeGrid },
}

impl RotorFamily {
    pub fn level(&self, aux: RngStream, level: usize) -> Result<Rotor> {
        if level == 0 {
            return Err(Error::InvalidArgument("rotor levels start at 1".into()));
        }
        let stream = aux.substream(level as u64);
        match self {
            RotorFamily::Fixed(r) => Ok(r.clone()),
            RotorFamily::IidPhase { resolution, law } => {
                resolve_iid_phases(resolution.clone(), law, stream)
            }
            RotorFamily::Sign { grid } => make_sign_rotor(&sample_brownian(grid, 1, stream)?),
        }
    }

    /// Whether every level is the same deterministic operator.
    pub fn is_deterministic(&self) -> bool {
        match self {
            RotorFamily::Fixed(r) => !r.is_path_dependent(),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_levels_are_fresh_and_reproducible() {
        let grid = TimeGrid::new(32).unwrap();
        let fam = RotorFamily::Sign { grid };
        let aux = RngStream::new(5, 0);
        let signs = |r: Rotor| match r {
            Rotor::Sign(s) => s.signs().to_vec(),
            _ => unreachable!(),
        };
        let a = signs(fam.level(aux, 1).unwrap());
        let b = signs(fam.level(aux, 2).unwrap());
        assert_ne!(a, b);
        assert_eq!(a, signs(fam.level(aux, 1).unwrap()));
        assert!(fam.level(aux, 0).is_err());
    }
}
