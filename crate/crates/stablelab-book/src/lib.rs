//! Guide snippets compiled as doc-tests.

#![doc = include_str!("../../../book/src/introduction.md")]

#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}
#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}
#[doc = include_str!("../../../book/src/formbound.md")]
pub mod formbound {}
#[doc = include_str!("../../../book/src/resolvent.md")]
pub mod resolvent {}
#[doc = include_str!("../../../book/src/weighted.md")]
pub mod weighted {}
#[doc = include_str!("../../../book/src/evolution.md")]
pub mod evolution {}
#[doc = include_str!("../../../book/src/sde.md")]
pub mod sde {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
