//! Voxel-to-memory maps for one partition of a 1D-decomposed dense domain.
//!
//! A partition owns `t` slabs along the partition axis and carries a one-deep
//! halo slab on each side. Slabs are numbered `0..t+2` internally, slab 0 being
//! the lower halo. Voxel coordinates in the public API are partition-local
//! with the axis coordinate in `-1..=t`.
//!
//! Three schemes are supported:
//!
//! * `AoS`: all components of a voxel are adjacent.
//! * `SoA`: one array per component over every voxel, halos included.
//! * `DisagSoA`: voxels are first classified into five groups (upper halo,
//!   upper shared, interior, lower shared, lower halo), the groups are laid
//!   out back to back in that order, and each group is SoA internally. In the
//!   shared and halo groups the components that cross the adjacent partition
//!   face come first, so everything a neighbor needs is a single span.

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Lattice, LatticeKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("invalid layout shape: {0}")]
    Shape(String),
    #[error("voxel {voxel:?} component {component} is outside the layout")]
    Index { voxel: [i64; 3], component: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum Scheme {
    AoS,
    SoA,
    DisagSoA,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::AoS, Scheme::SoA, Scheme::DisagSoA];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::AoS => "AoS",
            Scheme::SoA => "SoA",
            Scheme::DisagSoA => "DisagSoA",
        }
    }

    /// Fixed-component accesses over consecutive voxels are consecutive.
    pub fn coalesced(self) -> bool {
        !matches!(self, Scheme::AoS)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "aos" => Ok(Scheme::AoS),
            "soa" => Ok(Scheme::SoA),
            "disagsoa" | "disag" | "disaggregated" => Ok(Scheme::DisagSoA),
            _ => Err(LayoutError::Shape(format!("unknown layout scheme `{s}`"))),
        }
    }
}

/// Voxel groups of a dense partition, in memory order for `DisagSoA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Group {
    UpperHalo,
    UpperShared,
    Interior,
    LowerShared,
    LowerHalo,
}

impl Group {
    pub const ALL: [Group; 5] = [
        Group::UpperHalo,
        Group::UpperShared,
        Group::Interior,
        Group::LowerShared,
        Group::LowerHalo,
    ];

    fn ordinal(self) -> usize {
        self as usize
    }
}

/// Side of a partition face. `Upper` is the face toward larger axis coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Lower => Side::Upper,
            Side::Upper => Side::Lower,
        }
    }

    pub fn shared(self) -> Group {
        match self {
            Side::Lower => Group::LowerShared,
            Side::Upper => Group::UpperShared,
        }
    }

    pub fn halo(self) -> Group {
        match self {
            Side::Lower => Group::LowerHalo,
            Side::Upper => Group::UpperHalo,
        }
    }
}

/// What a voxel stores: an unstructured vector, or one population per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    Plain(usize),
    Lattice(LatticeKind),
}

impl Components {
    pub fn cardinality(self) -> usize {
        match self {
            Components::Plain(n) => n,
            Components::Lattice(kind) => kind.q(),
        }
    }
}

/// A run of consecutive addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub base: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.base + self.len
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupInfo {
    pub group: Group,
    pub offset: usize,
    pub voxels: usize,
    pub component_order: Vec<usize>,
    #[serde(skip)]
    rank: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LayoutMap {
    scheme: Scheme,
    components: Components,
    shape: [usize; 3],
    axis: usize,
    cross_axes: [usize; 2],
    thickness: usize,
    cross: usize,
    cardinality: usize,
    groups: Vec<GroupInfo>,
    total_len: usize,
    // Components sent across the upper / lower face.
    send_up: Vec<usize>,
    send_down: Vec<usize>,
}

impl LayoutMap {
    /// Builds the map for a partition of `shape` owned voxels split along `axis`.
    pub fn build(
        scheme: Scheme,
        shape: [usize; 3],
        components: Components,
        axis: usize,
    ) -> Result<Self, LayoutError> {
        if axis > 2 {
            return Err(LayoutError::Shape(format!("axis {axis} out of range")));
        }
        if shape.contains(&0) {
            return Err(LayoutError::Shape(format!(
                "extents must be positive, got {shape:?}"
            )));
        }
        let cardinality = components.cardinality();
        if cardinality == 0 {
            return Err(LayoutError::Shape("cardinality must be at least 1".into()));
        }
        let thickness = shape[axis];
        if thickness < 2 {
            return Err(LayoutError::Shape(format!(
                "extent {thickness} along the partition axis is below 2; shared groups would overlap"
            )));
        }
        let cross_axes = match axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        let cross = shape[cross_axes[0]] * shape[cross_axes[1]];

        let (send_up, send_down) = match components {
            Components::Plain(n) => ((0..n).collect::<Vec<_>>(), (0..n).collect()),
            Components::Lattice(kind) => {
                let lattice = Lattice::new(kind);
                (lattice.crossing(axis, true), lattice.crossing(axis, false))
            }
        };

        let identity: Vec<usize> = (0..cardinality).collect();
        let prefixed = |prefix: &[usize]| -> Vec<usize> {
            let mut order = prefix.to_vec();
            order.extend(identity.iter().copied().filter(|c| !prefix.contains(c)));
            order
        };

        let mut groups = Vec::with_capacity(5);
        let mut offset = 0;
        for group in Group::ALL {
            let voxels = match group {
                Group::Interior => (thickness - 2) * cross,
                _ => cross,
            };
            let component_order = match (scheme, group) {
                (Scheme::DisagSoA, Group::UpperShared | Group::LowerHalo) => prefixed(&send_up),
                (Scheme::DisagSoA, Group::LowerShared | Group::UpperHalo) => prefixed(&send_down),
                _ => identity.clone(),
            };
            let mut rank = vec![0; cardinality];
            for (r, &c) in component_order.iter().enumerate() {
                rank[c] = r;
            }
            groups.push(GroupInfo {
                group,
                offset,
                voxels,
                component_order,
                rank,
            });
            offset += voxels * cardinality;
        }

        Ok(LayoutMap {
            scheme,
            components,
            shape,
            axis,
            cross_axes,
            thickness,
            cross,
            cardinality,
            groups,
            total_len: offset,
            send_up,
            send_down,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn components(&self) -> Components {
        self.components
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn thickness(&self) -> usize {
        self.thickness
    }

    /// Voxels in one slab perpendicular to the partition axis.
    pub fn cross_section(&self) -> usize {
        self.cross
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn groups(&self) -> &[GroupInfo] {
        &self.groups
    }

    pub fn group_info(&self, group: Group) -> &GroupInfo {
        &self.groups[group.ordinal()]
    }

    /// Components that must reach the neighbor across `side`.
    pub fn crossing(&self, side: Side) -> &[usize] {
        match side {
            Side::Upper => &self.send_up,
            Side::Lower => &self.send_down,
        }
    }

    /// Components actually copied across `side` by a halo update. AoS moves
    /// whole voxels, the other schemes only the crossing components.
    pub fn transfer_set(&self, side: Side) -> Vec<usize> {
        match self.scheme {
            Scheme::AoS => (0..self.cardinality).collect(),
            _ => self.crossing(side).to_vec(),
        }
    }

    /// Group owning internal slab index `slab` (0 = lower halo).
    pub fn group_of_slab(&self, slab: usize) -> Group {
        let t = self.thickness;
        match slab {
            0 => Group::LowerHalo,
            1 => Group::LowerShared,
            s if s == t => Group::UpperShared,
            s if s == t + 1 => Group::UpperHalo,
            _ => Group::Interior,
        }
    }

    /// Internal slab range covered by `group`.
    pub fn group_slabs(&self, group: Group) -> std::ops::Range<usize> {
        let t = self.thickness;
        match group {
            Group::LowerHalo => 0..1,
            Group::LowerShared => 1..2,
            Group::Interior => 2..t,
            Group::UpperShared => t..t + 1,
            Group::UpperHalo => t + 1..t + 2,
        }
    }

    /// Splits partition-local coordinates into (slab, cross index).
    pub fn split(&self, voxel: [i64; 3]) -> Option<(usize, usize)> {
        let a = voxel[self.axis];
        if a < -1 || a > self.thickness as i64 {
            return None;
        }
        let [c0, c1] = self.cross_axes;
        let (x, y) = (voxel[c0], voxel[c1]);
        if x < 0 || y < 0 || x as usize >= self.shape[c0] || y as usize >= self.shape[c1] {
            return None;
        }
        Some(((a + 1) as usize, x as usize + self.shape[c0] * y as usize))
    }

    /// Inverse of [`split`](Self::split).
    pub fn join(&self, slab: usize, cross: usize) -> [i64; 3] {
        let [c0, c1] = self.cross_axes;
        let mut v = [0i64; 3];
        v[self.axis] = slab as i64 - 1;
        v[c0] = (cross % self.shape[c0]) as i64;
        v[c1] = (cross / self.shape[c0]) as i64;
        v
    }

    /// Address of `component` at partition-local `voxel`.
    pub fn address(&self, voxel: [i64; 3], component: usize) -> Result<usize, LayoutError> {
        match self.split(voxel) {
            Some((slab, cross)) if component < self.cardinality => {
                Ok(self.address_of(slab, cross, component))
            }
            _ => Err(LayoutError::Index { voxel, component }),
        }
    }

    #[inline]
    pub fn address_of(&self, slab: usize, cross: usize, component: usize) -> usize {
        let s = self.cross;
        match self.scheme {
            Scheme::AoS => (slab * s + cross) * self.cardinality + component,
            Scheme::SoA => component * (self.thickness + 2) * s + slab * s + cross,
            Scheme::DisagSoA => {
                let group = self.group_of_slab(slab);
                let info = &self.groups[group.ordinal()];
                let local = match group {
                    Group::Interior => (slab - 2) * s + cross,
                    _ => cross,
                };
                info.offset + info.rank[component] * info.voxels + local
            }
        }
    }

    /// Inverse of [`address_of`](Self::address_of): `(slab, cross, component)`.
    pub fn locate(&self, address: usize) -> Option<(usize, usize, usize)> {
        if address >= self.total_len {
            return None;
        }
        let s = self.cross;
        Some(match self.scheme {
            Scheme::AoS => {
                let v = address / self.cardinality;
                (v / s, v % s, address % self.cardinality)
            }
            Scheme::SoA => {
                let per = (self.thickness + 2) * s;
                let v = address % per;
                (v / s, v % s, address / per)
            }
            Scheme::DisagSoA => {
                let info = self
                    .groups
                    .iter()
                    .rev()
                    .find(|g| g.offset <= address && g.voxels > 0)?;
                let rel = address - info.offset;
                let component = info.component_order[rel / info.voxels];
                let local = rel % info.voxels;
                let slab = self.group_slabs(info.group).start + local / s;
                (slab, local % s, component)
            }
        })
    }

    /// Maximal runs of consecutive addresses covering exactly the cells
    /// `(voxel in group, component in components)`, sorted by base.
    pub fn contiguous_spans(&self, group: Group, components: &[usize]) -> Vec<Span> {
        let mut addrs = Vec::with_capacity(self.group_info(group).voxels * components.len());
        for slab in self.group_slabs(group) {
            for cross in 0..self.cross {
                for &c in components {
                    addrs.push(self.address_of(slab, cross, c));
                }
            }
        }
        merge_runs(addrs)
    }

    pub fn descriptor(&self) -> LayoutDescriptor {
        let spans = |side: Side| {
            let set = self.transfer_set(side);
            TransferSpans {
                send: self.contiguous_spans(side.shared(), &set),
                receive: self.contiguous_spans(side.halo(), &self.transfer_set(side.flip())),
            }
        };
        LayoutDescriptor {
            scheme: self.scheme,
            shape: self.shape,
            axis: self.axis,
            cardinality: self.cardinality,
            total_len: self.total_len,
            groups: self.groups.clone(),
            upper: spans(Side::Upper),
            lower: spans(Side::Lower),
        }
    }
}

/// Sorts addresses and merges them into maximal consecutive runs.
pub fn merge_runs(mut addrs: Vec<usize>) -> Vec<Span> {
    addrs.sort_unstable();
    addrs.dedup();
    let mut spans: Vec<Span> = Vec::new();
    for a in addrs {
        match spans.last_mut() {
            Some(last) if last.end() == a => last.len += 1,
            _ => spans.push(Span { base: a, len: 1 }),
        }
    }
    spans
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferSpans {
    pub send: Vec<Span>,
    pub receive: Vec<Span>,
}

/// JSON dump of a layout: group table, component orders and face spans.
#[derive(Debug, Clone, Serialize)]
pub struct LayoutDescriptor {
    pub scheme: Scheme,
    pub shape: [usize; 3],
    pub axis: usize,
    pub cardinality: usize,
    pub total_len: usize,
    pub groups: Vec<GroupInfo>,
    pub upper: TransferSpans,
    pub lower: TransferSpans,
}
