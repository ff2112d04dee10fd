//! Comparison schemes: SDMA (common stream disabled) and a fully-digital
//! reference bound. Both reuse the PDD machinery with variables pinned, which
//! isolates the effect of the common stream and of the phase-shifter
//! constraint.

use crate::scene::{ChannelSet, RadarScene, SystemConfig};
use crate::solver::{solve, PddOutcome, SolverError, SolverOptions, SolverVariant};

/// One solve path per scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    RsmaHybrid,
    SdmaHybrid,
    RsmaFullyDigital,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::RsmaHybrid => "rsma_hybrid",
            SchemeKind::SdmaHybrid => "sdma_hybrid",
            SchemeKind::RsmaFullyDigital => "rsma_fully_digital",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rsma_hybrid" => Some(SchemeKind::RsmaHybrid),
            "sdma_hybrid" => Some(SchemeKind::SdmaHybrid),
            "rsma_fully_digital" => Some(SchemeKind::RsmaFullyDigital),
            _ => None,
        }
    }

    pub fn variant(&self) -> SolverVariant {
        match self {
            SchemeKind::RsmaHybrid => SolverVariant::rsma_hybrid(),
            SchemeKind::SdmaHybrid => SolverVariant::sdma_hybrid(),
            SchemeKind::RsmaFullyDigital => SolverVariant::rsma_fully_digital(),
        }
    }
}

/// Runs the solve path selected by `kind`.
pub fn solve_scheme(
    kind: SchemeKind,
    channels: &ChannelSet,
    scene: &RadarScene,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<PddOutcome, SolverError> {
    solve(channels, scene, cfg, opts, kind.variant(), seed)
}

/// SDMA: identical machinery with the common stream pinned to zero and the
/// common-rate blocks skipped.
pub fn solve_sdma(
    channels: &ChannelSet,
    scene: &RadarScene,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<PddOutcome, SolverError> {
    solve_scheme(SchemeKind::SdmaHybrid, channels, scene, cfg, opts, seed)
}

/// Fully-digital reference: analog stage fixed to the identity, phase update
/// skipped. Upper reference for hybrid performance.
pub fn solve_fully_digital(
    channels: &ChannelSet,
    scene: &RadarScene,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<PddOutcome, SolverError> {
    solve_scheme(SchemeKind::RsmaFullyDigital, channels, scene, cfg, opts, seed)
}
