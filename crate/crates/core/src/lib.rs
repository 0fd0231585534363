//! Disaggregated memory layouts for volumetric data.
//!
//! The crate covers three grid representations and the tooling to check that
//! reorganizing data never changes the numbers:
//!
//! * [`layout`] and [`partition`]: dense domains split along one axis into
//!   partitions with one-deep halos, stored as AoS, SoA or disaggregated SoA,
//!   with a transfer ledger and an overlapped (private / shared) step engine.
//! * [`commodel`]: the latency/bandwidth halo-update model and the layout
//!   parameter tables it predicts.
//! * [`sparse`]: block-sparse grids whose boundary blocks are separated from
//!   the rest either by memory order or by a bitmask.
//! * [`multires`]: stacks of block-sparse levels with explosion, coalescence
//!   and a fused or staged execution graph.
//! * [`lbm`]: the BGK lattice Boltzmann solver that drives all of the above.
//!
//! Every representation funnels its voxel updates through
//! [`lbm::kernel::update_voxel`], so two representations that feed it the
//! same inputs produce bitwise-identical fields.

pub mod commodel;
pub mod io;
pub mod lattice;
pub mod layout;
pub mod lbm;
pub mod multires;
pub mod partition;
pub mod sparse;
pub mod verify;

pub use lattice::{Lattice, LatticeKind};
pub use layout::{Components, Group, LayoutMap, Scheme, Side, Span};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/layouts.md")]
    mod layouts {}
    #[doc = include_str!("../../../book/src/halo-exchange.md")]
    mod halo_exchange {}
    #[doc = include_str!("../../../book/src/block-sparse.md")]
    mod block_sparse {}
    #[doc = include_str!("../../../book/src/multires.md")]
    mod multires {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
