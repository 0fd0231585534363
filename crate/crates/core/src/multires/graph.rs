use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use super::grid::{FusionClass, MultiResGrid};
use super::MultiresError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Op {
    FusedCollideStream,
    Stream,
    Collide,
    Explosion,
    Coalescence,
}

/// Blocks a compute node covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BlockGroup {
    All,
    Uniform,
    Jump,
    /// Inter-level operators act on ghost layers, not blocks.
    Interface,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub id: usize,
    pub level: usize,
    /// Sub-step of `level` within one coarse step.
    pub substep: usize,
    pub group: BlockGroup,
    pub op: Op,
    pub blocks: Vec<usize>,
    /// Whether the node also streams the level's ghost layer.
    pub ghosts: bool,
}

/// Operators for one coarse step and the order they must respect.
#[derive(Debug, Clone, Serialize)]
pub struct ExecutionGraph {
    pub fused: bool,
    pub levels: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    edges: BTreeSet<(usize, usize)>,
}

impl Builder {
    fn node(
        &mut self,
        level: usize,
        substep: usize,
        group: BlockGroup,
        op: Op,
        blocks: Vec<usize>,
        ghosts: bool,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            level,
            substep,
            group,
            op,
            blocks,
            ghosts,
        });
        id
    }

    fn edge(&mut self, from: usize, to: usize) {
        self.edges.insert((from, to));
    }
}

/// Per-level node ids of the sub-steps emitted so far.
#[derive(Default, Clone)]
struct LevelIds {
    /// Compute nodes of the latest sub-step.
    compute: Vec<usize>,
    /// The compute node that streams the ghost layer in the latest sub-step.
    ghost_stream: Option<usize>,
    explosion: Option<usize>,
    coalescence: Option<usize>,
}

struct Plan<'a> {
    grid: &'a MultiResGrid,
    fused: bool,
    b: Builder,
    ids: Vec<LevelIds>,
}

impl Plan<'_> {
    fn emit(&mut self, l: usize, k: usize) {
        let top = self.grid.num_levels() - 1;
        let prev = self.ids[l].compute.clone();
        // explosion feeds the ghosts of the finer level
        let has_finer = l > 0 && self.grid.level(l - 1).ghost_groups() > 0;
        let mut coalescence = None;
        if has_finer {
            let e = self.b.node(
                l,
                k,
                BlockGroup::Interface,
                Op::Explosion,
                Vec::new(),
                false,
            );
            for &p in &prev {
                self.b.edge(p, e);
            }
            if let Some(c) = self.ids[l].coalescence {
                self.b.edge(c, e);
            }
            self.ids[l].explosion = Some(e);
            self.emit(l - 1, 2 * k);
            self.emit(l - 1, 2 * k + 1);
            let c = self.b.node(
                l,
                k,
                BlockGroup::Interface,
                Op::Coalescence,
                Vec::new(),
                false,
            );
            if let Some(s) = self.ids[l - 1].ghost_stream {
                self.b.edge(s, c);
            }
            self.ids[l].coalescence = Some(c);
            coalescence = Some(c);
        }
        let lv = self.grid.level(l);
        let has_ghosts = l < top && lv.ghost_groups() > 0;
        let parent_explosion = if has_ghosts {
            self.ids[l + 1].explosion
        } else {
            None
        };
        let all: Vec<usize> = (0..lv.classes.len()).collect();
        let uniform = lv.blocks_of(FusionClass::Uniform);
        let jump = lv.blocks_of(FusionClass::Jump);

        let mut compute = Vec::new();
        let mut ghost_stream = None;
        let staged_inputs = |b: &mut Builder, n: usize| {
            for &p in &prev {
                b.edge(p, n);
            }
            if let Some(c) = coalescence {
                b.edge(c, n);
            }
            if let Some(e) = parent_explosion {
                b.edge(e, n);
            }
        };
        if !self.fused && l == 0 || self.fused && self.grid.num_levels() == 1 {
            let n = self.b.node(
                l,
                k,
                BlockGroup::All,
                Op::FusedCollideStream,
                all,
                has_ghosts,
            );
            staged_inputs(&mut self.b, n);
            compute.push(n);
            if has_ghosts {
                ghost_stream = Some(n);
            }
        } else if !self.fused {
            let s = self
                .b
                .node(l, k, BlockGroup::All, Op::Stream, all.clone(), has_ghosts);
            staged_inputs(&mut self.b, s);
            let c = self.b.node(l, k, BlockGroup::All, Op::Collide, all, false);
            self.b.edge(s, c);
            compute.extend([s, c]);
            if has_ghosts {
                ghost_stream = Some(s);
            }
        } else {
            if !uniform.is_empty() {
                let n = self.b.node(
                    l,
                    k,
                    BlockGroup::Uniform,
                    Op::FusedCollideStream,
                    uniform,
                    false,
                );
                for &p in &prev {
                    self.b.edge(p, n);
                }
                compute.push(n);
            }
            if !jump.is_empty() || has_ghosts {
                let s = self
                    .b
                    .node(l, k, BlockGroup::Jump, Op::Stream, jump.clone(), has_ghosts);
                staged_inputs(&mut self.b, s);
                let c = self
                    .b
                    .node(l, k, BlockGroup::Jump, Op::Collide, jump, false);
                self.b.edge(s, c);
                compute.extend([s, c]);
                if has_ghosts {
                    ghost_stream = Some(s);
                }
            }
        }
        self.ids[l].compute = compute;
        self.ids[l].ghost_stream = ghost_stream;
    }
}

impl ExecutionGraph {
    /// Graph of one coarse step. Staged graphs fuse only on the finest level;
    /// fused graphs fuse every `Uniform` block and stage `Jump` blocks.
    pub fn build(grid: &MultiResGrid, fused: bool) -> Self {
        let levels = grid.num_levels();
        let mut plan = Plan {
            grid,
            fused,
            b: Builder::default(),
            ids: vec![LevelIds::default(); levels],
        };
        plan.emit(levels - 1, 0);
        ExecutionGraph {
            fused,
            levels,
            nodes: plan.b.nodes,
            edges: plan.b.edges.into_iter().collect(),
        }
    }

    pub fn predecessors(&self, id: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.1 == id)
            .map(|e| e.0)
            .collect()
    }

    /// Kahn's algorithm; `pick` chooses among the ready nodes (sorted by id)
    /// and returns the position of the one to run next.
    pub fn order_by(
        &self,
        mut pick: impl FnMut(&[usize]) -> usize,
    ) -> Result<Vec<usize>, MultiresError> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            indeg[b] += 1;
            out[a].push(b);
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while !ready.is_empty() {
            let pos = pick(&ready).min(ready.len() - 1);
            let id = ready.remove(pos);
            order.push(id);
            for &m in &out[id] {
                indeg[m] -= 1;
                if indeg[m] == 0 {
                    let at = ready.partition_point(|&r| r < m);
                    ready.insert(at, m);
                }
            }
        }
        if order.len() != n {
            return Err(MultiresError::Structure(
                "execution graph has a cycle".into(),
            ));
        }
        Ok(order)
    }

    /// Topological order taking the smallest ready id first.
    pub fn topological_order(&self) -> Result<Vec<usize>, MultiresError> {
        self.order_by(|_| 0)
    }

    /// Whether `order` lists every node once and respects every edge.
    pub fn is_valid_order(&self, order: &[usize]) -> bool {
        let mut pos = vec![usize::MAX; self.nodes.len()];
        for (i, &id) in order.iter().enumerate() {
            if id >= pos.len() || pos[id] != usize::MAX {
                return false;
            }
            pos[id] = i;
        }
        order.len() == self.nodes.len() && self.edges.iter().all(|&(a, b)| pos[a] < pos[b])
    }

    pub fn count(&self, op: Op) -> usize {
        self.nodes.iter().filter(|n| n.op == op).count()
    }

    /// Blocks covered by fused nodes in one sub-step of each level.
    pub fn fused_blocks(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.op == Op::FusedCollideStream && n.substep == 0)
            .map(|n| n.blocks.len())
            .sum()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph multires {\n  rankdir=LR;\n");
        for n in &self.nodes {
            let color = match (n.op, n.group) {
                (Op::FusedCollideStream, _) => "green",
                (Op::Explosion | Op::Coalescence, _) => "gray",
                _ => "red",
            };
            let _ = writeln!(
                s,
                "  n{} [label=\"L{} s{} {:?} {:?} ({} blocks)\", color={color}];",
                n.id,
                n.level,
                n.substep,
                n.op,
                n.group,
                n.blocks.len()
            );
        }
        for (a, b) in &self.edges {
            let _ = writeln!(s, "  n{a} -> n{b};");
        }
        s.push_str("}\n");
        s
    }
}

/// Summary counts of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub fused: bool,
    pub nodes: usize,
    pub edges: usize,
    pub fused_nodes: usize,
    pub stream_nodes: usize,
    pub collide_nodes: usize,
    pub explosion_nodes: usize,
    pub coalescence_nodes: usize,
    pub fused_blocks: usize,
}

impl ExecutionGraph {
    pub fn stats(&self) -> GraphStats {
        GraphStats {
            fused: self.fused,
            nodes: self.nodes.len(),
            edges: self.edges.len(),
            fused_nodes: self.count(Op::FusedCollideStream),
            stream_nodes: self.count(Op::Stream),
            collide_nodes: self.count(Op::Collide),
            explosion_nodes: self.count(Op::Explosion),
            coalescence_nodes: self.count(Op::Coalescence),
            fused_blocks: self.fused_blocks(),
        }
    }
}
