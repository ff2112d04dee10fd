//! Joint common-rate allocation and hybrid beamforming for an RSMA-assisted
//! mmWave ISAC downlink.
//!
//! The crate is organized around five pieces:
//!
//! - [`scene`]: seeded generation of user channels (Saleh-Valenzuela) and
//!   radar target/clutter response matrices;
//! - [`metrics`]: SINRs, rates, weighted sum rate, MMSE quantities, MVDR
//!   receive filtering and the input/output SCNR pair;
//! - [`solver`]: the WMMSE-PDD double loop with its five block updates under
//!   a CCCP-linearized sensing constraint;
//! - [`baselines`]: the SDMA comparison scheme and a fully-digital reference
//!   bound, both realized as pinned-variable variants of the same solver;
//! - [`harness`]: experiment configs, Monte-Carlo sweeps, CSV/SVG output.

pub mod baselines;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod rng;
pub mod scene;
pub mod solver;
