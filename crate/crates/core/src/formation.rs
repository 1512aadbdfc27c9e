//! Displacement-based formation: agents agree on a common point through the
//! channel and hold `d_i + agreed point` as their reference.

use alloc::vec::Vec;

use crate::math::TAU;
use crate::planar::Vec2;
use crate::topology::ChannelRealization;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec {
    displacements: Vec<Vec2>,
}

impl FormationSpec {
    pub fn new(displacements: Vec<Vec2>) -> Self {
        Self { displacements }
    }

    /// Regular polygon `d_i = radius·(cos 2πi/n, sin 2πi/n)`, zero-based `i`.
    pub fn regular_polygon(n: usize, radius: f64) -> Self {
        Self::new((0..n).map(|i| Vec2::from_polar(radius, TAU * i as f64 / n as f64)).collect())
    }

    pub fn agent_count(&self) -> usize {
        self.displacements.len()
    }

    pub fn displacements(&self) -> &[Vec2] {
        &self.displacements
    }

    /// Positions `center + d_i`, i.e. the formation realized around `center`.
    pub fn placed_at(&self, center: Vec2) -> Vec<Vec2> {
        self.displacements.iter().map(|d| center + *d).collect()
    }

    fn check(&self, positions: &[Vec2]) -> Result<()> {
        if positions.len() != self.displacements.len() {
            return Err(Error::Dimension { expected: self.displacements.len(), got: positions.len() });
        }
        Ok(())
    }
}

/// References held by every agent from communication instant `valid_from`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState {
    pub refs: Vec<Vec2>,
    pub valid_from: usize,
}

/// `p̃_i = p_i − d_i`, in agent order.
pub fn shifted_state(positions: &[Vec2], spec: &FormationSpec) -> Result<Vec<Vec2>> {
    spec.check(positions)?;
    Ok(positions.iter().zip(spec.displacements()).map(|(p, d)| *p - *d).collect())
}

/// Reference update at a communication instant: every agent broadcasts
/// `p_i − d_i` and sets `r_i = d_i + ζ_i` from its normalized aggregate.
/// Positions do not change across the jump.
pub fn jump_update(
    positions: &[Vec2],
    spec: &FormationSpec,
    real: &ChannelRealization,
) -> Result<ReferenceState> {
    if real.agent_count() != spec.agent_count() {
        return Err(Error::Dimension { expected: spec.agent_count(), got: real.agent_count() });
    }
    let broadcast = shifted_state(positions, spec)?;
    let refs = spec
        .displacements()
        .iter()
        .enumerate()
        .map(|(i, d)| *d + real.normalized_aggregate(i, &broadcast))
        .collect();
    Ok(ReferenceState { refs, valid_from: real.instant() })
}
