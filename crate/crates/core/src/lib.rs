//! Energy model, optimal traffic allocation and simulation of bundles of
//! Energy Efficient Ethernet (IEEE 802.3az) links.
//!
//! The crate is split along the data path:
//!
//! * [`model`]: closed forms for the mean low-power sojourn `T_off` of the
//!   frame and burst (packet coalescing) governors, the normalized link
//!   energy `E(ρ)`, bundle energy and the concavity checks on `E`.
//! * [`alloc`]: static allocations of an aggregate demand over the links of a
//!   bundle (water-filling, capped water-filling, equitable) and a grid-search
//!   minimizer used to check water-filling optimality.
//! * [`traffic`]: Poisson / Pareto generators and a plain-text trace format.
//! * [`link_sim`]: event-driven simulation of a single EEE link.
//! * [`bundle_sim`]: simulation of a bundle under static splits or the dynamic
//!   water-filling dispatcher with EWMA delay control.
//!
//! The analytic code ([`model`], [`alloc`], [`gamma`]) is generic over the
//! floating point type through [`Scalar`]; the simulators work in `f64`
//! seconds. Aliases for the `f64` instantiations live at the crate root.

pub mod alloc;
pub mod bundle_sim;
pub mod gamma;
pub mod link_sim;
pub mod model;
pub mod traffic;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the analytic code is written against (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

pub use alloc::{AllocError, AllocationVector, BundleSpec};
pub use bundle_sim::{DispatcherConfig, DispatcherState, SimReport, SplitMode, Strategy};
pub use link_sim::{
    DelayAccumulator, EnergyAccumulator, LinkMode, LinkSimError, LinkState, SimWindow,
};
pub use model::{
    Distribution, GovernorSpec, LinkParams, ModelError, ToffCurve, TrafficSpec,
};
pub use traffic::{FrameEvent, TraceError, TraceStream};

/// Link hardware profile in `f64`.
pub type LinkParams64 = LinkParams<f64>;
/// Governor description in `f64`.
pub type GovernorSpec64 = GovernorSpec<f64>;
/// Traffic description in `f64`.
pub type TrafficSpec64 = TrafficSpec<f64>;
/// Bundle description in `f64`.
pub type BundleSpec64 = BundleSpec<f64>;
/// Per-link rates in `f64` bits/second.
pub type AllocationVector64 = AllocationVector<f64>;

/// Link hardware profile in `f32`.
pub type LinkParams32 = LinkParams<f32>;
/// Governor description in `f32`.
pub type GovernorSpec32 = GovernorSpec<f32>;
/// Bundle description in `f32`.
pub type BundleSpec32 = BundleSpec<f32>;
