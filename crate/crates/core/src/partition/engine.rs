use rayon::prelude::*;

use crate::layout::{Components, LayoutError, LayoutMap, Scheme, Side, Span};
use crate::lbm::Field;

use super::ledger::{TraceEvent, TransferLedger, TransferRecord};
use super::{decompose, neighbors, Decomposition, PartitionError};

/// A per-voxel update run by the partition engine. It reads the previous
/// state through [`NeighborAccess`] and writes the voxel's new components.
pub trait StencilKernel: Sync {
    fn cardinality(&self) -> usize;
    fn update(&self, nb: &NeighborAccess<'_>, out: &mut [f64]) -> Result<(), PartitionError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Sequential,
    /// Partitions of a phase run on the rayon pool. Each worker writes only
    /// its own partition, so results match the sequential mode bit for bit.
    Parallel,
}

/// Radius-1 view of the previous state around one voxel.
pub struct NeighborAccess<'a> {
    layout: &'a LayoutMap,
    buf: &'a [f64],
    shape: [usize; 3],
    periodic: [bool; 3],
    local_axis: i64,
    global: [i64; 3],
}

impl NeighborAccess<'_> {
    /// Global coordinates of the voxel being updated.
    pub fn global(&self) -> [i64; 3] {
        self.global
    }

    /// Component `comp` at `global + offset`; `None` beyond a non-periodic
    /// domain face.
    pub fn get(&self, offset: [i32; 3], comp: usize) -> Result<Option<f64>, PartitionError> {
        match self.locate(offset)? {
            Some(cell) if comp < self.layout.cardinality() => Ok(Some(self.read(cell, comp))),
            Some(_) => Err(LayoutError::Index {
                voxel: self.global,
                component: comp,
            }
            .into()),
            None => Ok(None),
        }
    }

    /// `(slab, cross)` of `global + offset` in the partition's layout; `None`
    /// beyond a non-periodic domain face.
    #[inline]
    pub fn locate(&self, offset: [i32; 3]) -> Result<Option<(usize, usize)>, PartitionError> {
        if offset.iter().any(|o| o.abs() > 1) {
            return Err(PartitionError::ContractViolation { offset });
        }
        let axis = self.layout.axis();
        let mut local = [0i64; 3];
        for a in 0..3 {
            let n = self.shape[a] as i64;
            let g = self.global[a] + offset[a] as i64;
            if (0..n).contains(&g) {
                local[a] = g;
            } else if self.periodic[a] {
                local[a] = g.rem_euclid(n);
            } else {
                return Ok(None);
            }
        }
        local[axis] = self.local_axis + offset[axis] as i64;
        match self.layout.split(local) {
            Some(cell) => Ok(Some(cell)),
            None => Err(LayoutError::Index {
                voxel: local,
                component: 0,
            }
            .into()),
        }
    }

    /// Component `comp` of a cell returned by [`locate`](Self::locate).
    #[inline]
    pub fn read(&self, cell: (usize, usize), comp: usize) -> f64 {
        self.buf[self.layout.address_of(cell.0, cell.1, comp)]
    }
}

#[derive(Debug, Clone)]
struct Part {
    layout: LayoutMap,
    begin: usize,
    bufs: [Vec<f64>; 2],
    private: Vec<usize>,
    shared: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Link {
    dst: usize,
    pairs: Vec<(Span, Span)>,
}

/// A field split along one axis into partitions with halos.
#[derive(Debug, Clone)]
pub struct PartitionedField {
    decomp: Decomposition,
    scheme: Scheme,
    components: Components,
    periodic: [bool; 3],
    parts: Vec<Part>,
    // per sender: downward link first, then upward
    links: Vec<Vec<Link>>,
    cur: usize,
    mode: ExecMode,
}

impl PartitionedField {
    pub fn new(
        domain_shape: [usize; 3],
        num_partitions: usize,
        axis: usize,
        scheme: Scheme,
        components: Components,
        periodic: [bool; 3],
    ) -> Result<Self, PartitionError> {
        let decomp = decompose(domain_shape, num_partitions, axis)?;
        let wrap = periodic[axis];
        let mut parts = Vec::with_capacity(num_partitions);
        for p in 0..num_partitions {
            let layout = LayoutMap::build(scheme, decomp.shape(p), components, axis)?;
            let t = layout.thickness();
            let (lower, upper) = neighbors(&decomp, p, wrap);
            let mut private = Vec::new();
            let mut shared = Vec::new();
            for slab in 1..=t {
                if (slab == 1 && lower.is_some()) || (slab == t && upper.is_some()) {
                    shared.push(slab);
                } else {
                    private.push(slab);
                }
            }
            let len = layout.total_len();
            parts.push(Part {
                layout,
                begin: decomp.slabs[p].start,
                bufs: [vec![0.0; len], vec![0.0; len]],
                private,
                shared,
            });
        }

        let mut links = Vec::with_capacity(num_partitions);
        for p in 0..num_partitions {
            let (lower, upper) = neighbors(&decomp, p, wrap);
            let mut out = Vec::new();
            for (side, dst) in [(Side::Lower, lower), (Side::Upper, upper)] {
                let Some(dst) = dst else { continue };
                let back = neighbors(&decomp, dst, wrap);
                let symmetric = match side {
                    Side::Lower => back.1 == Some(p),
                    Side::Upper => back.0 == Some(p),
                };
                if !symmetric {
                    return Err(PartitionError::Consistency(format!(
                        "partition {p} links to {dst} but not the other way"
                    )));
                }
                out.push(Link {
                    dst,
                    pairs: span_pairs(&parts[p].layout, &parts[dst].layout, side)?,
                });
            }
            links.push(out);
        }

        Ok(PartitionedField {
            decomp,
            scheme,
            components,
            periodic,
            parts,
            links,
            cur: 0,
            mode: ExecMode::Sequential,
        })
    }

    pub fn with_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomp
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn periodic(&self) -> [bool; 3] {
        self.periodic
    }

    pub fn components(&self) -> Components {
        self.components
    }

    pub fn layout(&self, p: usize) -> &LayoutMap {
        &self.parts[p].layout
    }

    pub fn num_partitions(&self) -> usize {
        self.parts.len()
    }

    /// Partitions with both an upper and a lower neighbor.
    pub fn interior_partitions(&self) -> Vec<usize> {
        (0..self.parts.len())
            .filter(|&p| self.links[p].len() == 2)
            .collect()
    }

    /// The sender-side spans partition `p` copies per halo update.
    pub fn send_spans(&self, p: usize) -> Vec<Span> {
        self.links[p]
            .iter()
            .flat_map(|l| l.pairs.iter().map(|(s, _)| *s))
            .collect()
    }

    /// Current buffer of partition `p`, in its layout's address order.
    pub fn buffer(&self, p: usize) -> &[f64] {
        &self.parts[p].bufs[self.cur]
    }

    /// Writes `value(global voxel, component)` into every owned voxel.
    pub fn fill(&mut self, value: impl Fn([usize; 3], usize) -> f64) {
        let card = self.components.cardinality();
        let axis = self.decomp.axis;
        for part in &mut self.parts {
            let layout = &part.layout;
            for slab in 1..=layout.thickness() {
                for cross in 0..layout.cross_section() {
                    let local = layout.join(slab, cross);
                    let mut g = [local[0] as usize, local[1] as usize, local[2] as usize];
                    g[axis] += part.begin;
                    for c in 0..card {
                        let addr = layout.address_of(slab, cross, c);
                        let v = value(g, c);
                        part.bufs[0][addr] = v;
                        part.bufs[1][addr] = v;
                    }
                }
            }
        }
    }

    pub fn load(&mut self, field: &Field) {
        self.fill(|g, c| field.voxel(g)[c]);
    }

    /// Owned voxels gathered into canonical order.
    pub fn to_field(&self) -> Field {
        let card = self.components.cardinality();
        let axis = self.decomp.axis;
        let mut field = Field::zeros(self.decomp.domain_shape, card);
        for part in &self.parts {
            let layout = &part.layout;
            let buf = &part.bufs[self.cur];
            for slab in 1..=layout.thickness() {
                for cross in 0..layout.cross_section() {
                    let local = layout.join(slab, cross);
                    let mut g = [local[0] as usize, local[1] as usize, local[2] as usize];
                    g[axis] += part.begin;
                    let out = field.voxel_mut(g);
                    for (c, slot) in out.iter_mut().enumerate() {
                        *slot = buf[layout.address_of(slab, cross, c)];
                    }
                }
            }
        }
        field
    }

    /// Copies every transfer span of the current buffers into the receivers'
    /// halos, one ledger record per span, senders in partition order.
    pub fn halo_update(&mut self, ledger: &mut TransferLedger, step: u64) {
        let cur = self.cur;
        for src in 0..self.parts.len() {
            for link in &self.links[src] {
                let dst = link.dst;
                for &(s, d) in &link.pairs {
                    if src == dst {
                        self.parts[src].bufs[cur].copy_within(s.base..s.end(), d.base);
                    } else {
                        let (from, to) = pair_mut(&mut self.parts, src, dst);
                        to.bufs[cur][d.base..d.end()]
                            .copy_from_slice(&from.bufs[cur][s.base..s.end()]);
                    }
                    ledger.push(TransferRecord {
                        step,
                        src,
                        dst,
                        src_span: s,
                        dst_span: d,
                        elements: s.len,
                    });
                }
            }
        }
    }

    /// One overlapped step: private voxels, halo completion, shared voxels.
    pub fn step_occ(
        &mut self,
        kernel: &impl StencilKernel,
        ledger: &mut TransferLedger,
        step: u64,
        trace: &mut Vec<TraceEvent>,
    ) -> Result<(), PartitionError> {
        if kernel.cardinality() != self.components.cardinality() {
            return Err(PartitionError::Consistency(format!(
                "kernel writes {} components, field has {}",
                kernel.cardinality(),
                self.components.cardinality()
            )));
        }
        trace.push(TraceEvent::HaloBegin { step });
        self.compute(kernel, false)?;
        trace
            .extend((0..self.parts.len()).map(|partition| TraceEvent::Private { step, partition }));
        // Private voxels never read halo slabs, so finishing the copies after
        // they ran is indistinguishable from overlapping the two.
        self.halo_update(ledger, step);
        trace.push(TraceEvent::HaloEnd { step });
        self.compute(kernel, true)?;
        trace.extend((0..self.parts.len()).map(|partition| TraceEvent::Shared { step, partition }));
        self.cur ^= 1;
        Ok(())
    }

    fn compute(&mut self, kernel: &impl StencilKernel, shared: bool) -> Result<(), PartitionError> {
        let ctx = Ctx {
            shape: self.decomp.domain_shape,
            periodic: self.periodic,
            axis: self.decomp.axis,
            cur: self.cur,
        };
        match self.mode {
            ExecMode::Sequential => self
                .parts
                .iter_mut()
                .try_for_each(|part| compute_part(part, &ctx, kernel, shared)),
            ExecMode::Parallel => self
                .parts
                .par_iter_mut()
                .try_for_each(|part| compute_part(part, &ctx, kernel, shared)),
        }
    }
}

struct Ctx {
    shape: [usize; 3],
    periodic: [bool; 3],
    axis: usize,
    cur: usize,
}

fn compute_part(
    part: &mut Part,
    ctx: &Ctx,
    kernel: &impl StencilKernel,
    shared: bool,
) -> Result<(), PartitionError> {
    let card = kernel.cardinality();
    let mut out = vec![0.0; card];
    let (b0, b1) = part.bufs.split_at_mut(1);
    let (read, write) = if ctx.cur == 0 {
        (&b0[0], &mut b1[0])
    } else {
        (&b1[0], &mut b0[0])
    };
    let layout = &part.layout;
    let slabs = if shared { &part.shared } else { &part.private };
    for &slab in slabs {
        for cross in 0..layout.cross_section() {
            let local = layout.join(slab, cross);
            let mut global = local;
            global[ctx.axis] += part.begin as i64;
            let nb = NeighborAccess {
                layout,
                buf: read,
                shape: ctx.shape,
                periodic: ctx.periodic,
                local_axis: local[ctx.axis],
                global,
            };
            kernel.update(&nb, &mut out)?;
            for (c, v) in out.iter().enumerate() {
                write[layout.address_of(slab, cross, c)] = *v;
            }
        }
    }
    Ok(())
}

fn pair_mut<T>(items: &mut [T], a: usize, b: usize) -> (&T, &mut T) {
    if a < b {
        let (lo, hi) = items.split_at_mut(b);
        (&lo[a], &mut hi[0])
    } else {
        let (lo, hi) = items.split_at_mut(a);
        (&hi[0], &mut lo[b])
    }
}

/// Matches the sender's shared spans toward `side` with the receiver's halo
/// spans on the facing side, checking that they carry the same cells.
fn span_pairs(
    src: &LayoutMap,
    dst: &LayoutMap,
    side: Side,
) -> Result<Vec<(Span, Span)>, PartitionError> {
    let set = src.transfer_set(side);
    let from = src.contiguous_spans(side.shared(), &set);
    let to = dst.contiguous_spans(side.flip().halo(), &set);
    if from.len() != to.len() {
        return Err(PartitionError::Consistency(format!(
            "{} sender spans vs {} receiver spans",
            from.len(),
            to.len()
        )));
    }
    for (s, d) in from.iter().zip(&to) {
        if s.len != d.len {
            return Err(PartitionError::Consistency(format!(
                "span lengths {} vs {}",
                s.len, d.len
            )));
        }
        for k in 0..s.len {
            let (_, cs, ks) = src.locate(s.base + k).expect("span inside layout");
            let (_, cd, kd) = dst.locate(d.base + k).expect("span inside layout");
            if (cs, ks) != (cd, kd) {
                return Err(PartitionError::Consistency(format!(
                    "span element {k} maps cell ({cs},{ks}) onto ({cd},{kd})"
                )));
            }
        }
    }
    Ok(from.into_iter().zip(to).collect())
}
