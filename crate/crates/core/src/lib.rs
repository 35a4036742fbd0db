//! Recovery of transparent image layers from aligned superimposed mixtures.
//!
//! Given `m` mixtures `Iᵢ = aᵢ·L¹ + L^{i+1}` of a transmitted layer `L¹` and
//! per-mixture reflections, plus target gradient fields `Eⁱ` for every layer,
//! the crate minimizes
//!
//! ```text
//! λ·Σⁱ Σₓ |∇Lⁱ(x) − Eⁱ(x)|  +  ½·Σᵢ Σₓ (Iᵢ(x) − aᵢL¹(x) − L^{i+1}(x))²,   0 ≤ L ≤ 1
//! ```
//!
//! with an accelerated proximal-gradient loop ([`esra`]). Each proximal step
//! splits into one constrained total-variation problem per layer, solved in
//! parallel by fast gradient projection on the dual ([`fgp`]).

pub mod cli;
pub mod error;
pub mod esra;
pub mod fgp;
pub mod grid;
pub mod io;
pub mod mixing;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};
pub use esra::{esra_solve, EsraParams, SolveTrace, TraceRecord};
pub use fgp::{fgp_solve, ProxParams, ProxResult};
pub use grid::{DualPair, Image, LayerVector};
pub use mixing::{Objective, ProblemInstance};
