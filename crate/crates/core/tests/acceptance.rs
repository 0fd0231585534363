//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr
//! (written to the handle directly, so it shows without `--nocapture`).

use std::io::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use disagg::commodel::{halo_update_time, layout_params, partition_axis, FieldKind, LinkModel};
use disagg::layout::{Components, Scheme, Side};
use disagg::lbm::config::SolverConfig;
use disagg::lbm::dense::{collide_bgk, DenseSolver};
use disagg::lbm::run::run;
use disagg::lbm::scenario::{self, Scenario};
use disagg::lbm::{Field, Setup};
use disagg::multires::{ExecutionGraph, FusionClass, LevelMap, MultiResGrid};
use disagg::partition::kernels::LbmKernel;
use disagg::partition::{PartitionedField, TransferLedger};
use disagg::sparse::{dispatch_plan, Indexing, NaiveStorage, SparseSolver, Strategy};
use disagg::verify::multires_cavity;
use disagg::{Lattice, LatticeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Runs one criterion, reports it, and fails the test on error or when it
/// exceeds its time budget.
fn criterion(
    id: u32,
    name: &str,
    budget: Option<Duration>,
    body: impl FnOnce() -> Result<(), String>,
) {
    let start = Instant::now();
    let mut result = body();
    let elapsed = start.elapsed();
    if let (Ok(()), Some(limit)) = (&result, budget) {
        if elapsed > limit {
            result = Err(format!("took {elapsed:.1?}, budget {limit:?}"));
        }
    }
    let line = match &result {
        Ok(()) => format!("criterion {id} PASS {name} ({elapsed:.2?})"),
        Err(e) => format!("criterion {id} FAIL {name}: {e}"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    if let Err(e) = result {
        panic!("criterion {id} ({name}): {e}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cube(kind: LatticeKind, n: usize) -> [usize; 3] {
    if kind.dim() == 2 {
        [n, n, 1]
    } else {
        [n; 3]
    }
}

fn cavity(kind: LatticeKind, n: usize) -> Setup {
    scenario::setup_for(
        Scenario::LidDrivenCavity,
        Lattice::new(kind),
        cube(kind, n),
        0.56,
        [0.05, 0.0, 0.0],
    )
    .unwrap()
}

fn partitioned(
    setup: &Setup,
    init: &Field,
    parts: usize,
    scheme: Scheme,
    steps: u64,
) -> (PartitionedField, TransferLedger) {
    let kind = setup.lattice.kind();
    let mut f = PartitionedField::new(
        setup.domain.shape,
        parts,
        partition_axis(kind),
        scheme,
        Components::Lattice(kind),
        setup.domain.periodic,
    )
    .unwrap();
    f.load(init);
    let kernel = LbmKernel::new(setup.clone());
    let mut ledger = TransferLedger::new();
    for step in 0..steps {
        f.step_occ(&kernel, &mut ledger, step, &mut Vec::new())
            .unwrap();
    }
    (f, ledger)
}

fn config(name: &str) -> SolverConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    SolverConfig::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

/// Directions with a positive component along `axis`, counted from the
/// velocity set itself.
fn crossing(kind: LatticeKind) -> usize {
    let axis = kind.dim() - 1;
    Lattice::new(kind)
        .velocities()
        .iter()
        .filter(|e| e[axis] > 0)
        .count()
}

#[test]
fn criterion_1_layout_parameter_table() {
    criterion(
        1,
        "layout parameter table",
        Some(Duration::from_secs(1)),
        || {
            let expect = [
                (LatticeKind::D2Q9, [(2, 18), (6, 6), (2, 6)]),
                (LatticeKind::D3Q19, [(2, 38), (10, 10), (2, 10)]),
                (LatticeKind::D3Q27, [(2, 54), (18, 18), (2, 18)]),
            ];
            for (kind, rows) in expect {
                let c = crossing(kind);
                let q = kind.q();
                // the same table from the velocity set: AoS sends whole voxels,
                // SoA one span per crossing direction, DisagSoA one span per face
                let derived = [(2, 2 * q), (2 * c, 2 * c), (2, 2 * c)];
                for ((scheme, want), from_geometry) in Scheme::ALL.iter().zip(rows).zip(derived) {
                    let p = layout_params(FieldKind::Lattice(kind), *scheme, 1)
                        .map_err(|e| e.to_string())?;
                    ensure((p.alpha, p.beta) == want, || {
                        format!("{kind} {scheme}: {:?} != {want:?}", (p.alpha, p.beta))
                    })?;
                    ensure(want == from_geometry, || {
                        format!("{kind} {scheme}: geometry gives {from_geometry:?}")
                    })?;
                }
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_2_ledger_matches_model() {
    criterion(
        2,
        "ledger matches model",
        Some(Duration::from_secs(60)),
        || {
            let cases: Vec<(LatticeKind, Scheme)> = LatticeKind::ALL
                .iter()
                .flat_map(|&k| Scheme::ALL.iter().map(move |&s| (k, s)))
                .collect();
            cases.par_iter().try_for_each(|&(kind, scheme)| {
                let setup = cavity(kind, 32);
                let init = scenario::rest_field(&setup);
                let (field, ledger) = partitioned(&setup, &init, 4, scheme, 10);
                let s = field.decomposition().cross_section();
                let p = layout_params(FieldKind::Lattice(kind), scheme, s)
                    .map_err(|e| e.to_string())?;
                let interior = field.interior_partitions();
                ensure(interior == vec![1, 2], || {
                    format!("interior partitions {interior:?}")
                })?;
                for step in 0..10 {
                    for &part in &interior {
                        let got = ledger.sent(step, part);
                        ensure(got == (p.alpha, p.beta), || {
                            format!(
                                "{kind} {scheme} step {step} partition {part}: {got:?} != {:?}",
                                (p.alpha, p.beta)
                            )
                        })?;
                    }
                }
                Ok(())
            })
        },
    );
}

#[test]
fn criterion_3_partition_count_invariance() {
    criterion(
        3,
        "partition-count invariance",
        Some(Duration::from_secs(300)),
        || {
            let setup = cavity(LatticeKind::D3Q19, 32);
            let init = scenario::rest_field(&setup);
            let mut reference = DenseSolver::new(setup.clone(), init.clone()).unwrap();
            reference.run(200).map_err(|e| e.to_string())?;
            let cases: Vec<(Scheme, usize)> = Scheme::ALL
                .iter()
                .flat_map(|&s| [1, 2, 4, 8].into_iter().map(move |p| (s, p)))
                .collect();
            cases.par_iter().try_for_each(|&(scheme, parts)| {
                let (f, _) = partitioned(&setup, &init, parts, scheme, 200);
                let got = f.to_field();
                ensure(got.bitwise_eq(reference.field()), || {
                    format!(
                        "{scheme} x{parts}: first difference {:?}",
                        got.first_difference(reference.field())
                    )
                })
            })
        },
    );
}

#[test]
fn criterion_4_zero_copy_records() {
    criterion(4, "zero-copy records", None, || {
        for kind in LatticeKind::ALL {
            let setup = cavity(kind, 16);
            let init = scenario::rest_field(&setup);
            let steps = 3;
            let (disag, ledger) = partitioned(&setup, &init, 4, Scheme::DisagSoA, steps);
            for step in 0..steps {
                for src in 0..4 {
                    let records: Vec<_> = ledger
                        .records()
                        .iter()
                        .filter(|r| r.step == step && r.src == src)
                        .collect();
                    let expected_links = if src == 0 || src == 3 { 1 } else { 2 };
                    ensure(records.len() == expected_links, || {
                        format!(
                            "{kind} partition {src}: {} records for {expected_links} neighbours",
                            records.len()
                        )
                    })?;
                    for r in records {
                        let layout = disag.layout(src);
                        let side = if r.dst > src {
                            Side::Upper
                        } else {
                            Side::Lower
                        };
                        let spans =
                            layout.contiguous_spans(side.shared(), &layout.transfer_set(side));
                        ensure(spans == vec![r.src_span], || {
                            format!(
                                "{kind} {src}->{}: record {:?} vs maximal spans {spans:?}",
                                r.dst, r.src_span
                            )
                        })?;
                    }
                }
            }
            let (_, ledger) = partitioned(&setup, &init, 4, Scheme::SoA, steps);
            let c = crossing(kind);
            for step in 0..steps {
                for part in [1, 2] {
                    let n = ledger.sent(step, part).0;
                    ensure(n == 2 * c, || {
                        format!(
                            "{kind} SoA partition {part}: {n} records, expected {}",
                            2 * c
                        )
                    })?;
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_5_dispatch_plan_table() {
    criterion(5, "dispatch plan table", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let n_b = rng.gen_range(0..5000);
            let n_nb = rng.gen_range(0..5000);
            let q = [9, 19, 27][rng.gen_range(0..3)];
            let b_size = [8, 27, 64, 512][rng.gen_range(0..4)];
            let s_w = rng.gen_range(1..64);
            let s_i = rng.gen_range(1..16);
            let all = n_b + n_nb;
            // (kernel blocks and costs, storage bytes, indexing)
            let table = [
                (
                    Strategy::Naive,
                    vec![(all, 3 * q)],
                    s_w * n_nb * b_size,
                    Indexing::Direct,
                ),
                (
                    Strategy::DisagBitmask,
                    vec![(all, 3 * q), (all, 2 * q)],
                    s_i * all * b_size,
                    Indexing::Indirect,
                ),
                (
                    Strategy::DisagMem,
                    vec![(n_b, 3 * q), (n_nb, 2 * q)],
                    0,
                    Indexing::Direct,
                ),
            ];
            for (strategy, kernels, storage, indexing) in table {
                let plan = dispatch_plan(
                    strategy,
                    n_b,
                    n_nb,
                    q,
                    b_size,
                    s_w,
                    s_i,
                    NaiveStorage::Printed,
                );
                let got: Vec<(usize, usize)> =
                    plan.kernels.iter().map(|k| (k.blocks, k.cost)).collect();
                let case = format!(
                    "{strategy} n_b={n_b} n_nb={n_nb} Q={q} b={b_size} s_w={s_w} s_i={s_i}"
                );
                ensure(got == kernels, || format!("{case}: kernels {got:?}"))?;
                ensure(plan.extra_storage_bytes == storage, || {
                    format!("{case}: storage {} != {storage}", plan.extra_storage_bytes)
                })?;
                ensure(plan.indexing == indexing, || {
                    format!("{case}: indexing {:?}", plan.indexing)
                })?;
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_6_sparse_strategy_equivalence() {
    criterion(6, "sparse strategy equivalence", None, || {
        let setup = scenario::setup_for(
            Scenario::FlowOverObstacle,
            Lattice::new(LatticeKind::D3Q19),
            [32; 3],
            0.65,
            [0.05, 0.0, 0.0],
        )
        .map_err(|e| e.to_string())?;
        let init = scenario::initial_field(Scenario::FlowOverObstacle, &setup, 0);
        let solvers: Vec<SparseSolver> = Strategy::ALL
            .par_iter()
            .map(|&s| {
                let mut solver =
                    SparseSolver::new(setup.clone(), s, &init, 4, NaiveStorage::Printed).unwrap();
                solver.run(50).unwrap();
                solver
            })
            .collect();
        let fields: Vec<Field> = solvers.iter().map(SparseSolver::to_field).collect();
        for (s, f) in Strategy::ALL.iter().zip(&fields).skip(1) {
            ensure(f.bitwise_eq(&fields[0]), || {
                format!("{s}: first difference {:?}", f.first_difference(&fields[0]))
            })?;
        }
        let naive = solvers[0].plan();
        let mem = solvers[2].plan();
        ensure(mem.extra_storage_bytes == 0, || {
            format!("DisagMem stores {} bytes", mem.extra_storage_bytes)
        })?;
        let n_nb = mem.kernels[1].blocks;
        ensure(
            n_nb > 0 && mem.weighted_cost() < naive.weighted_cost(),
            || {
                format!(
                    "cost {} vs naive {}",
                    mem.weighted_cost(),
                    naive.weighted_cost()
                )
            },
        )
    });
}

/// Chebyshev distance with wrap on periodic axes.
fn chebyshev(a: [usize; 3], b: [usize; 3], shape: [usize; 3], periodic: [bool; 3]) -> u32 {
    (0..3)
        .map(|i| {
            let d = a[i].abs_diff(b[i]);
            (if periodic[i] { d.min(shape[i] - d) } else { d }) as u32
        })
        .max()
        .unwrap()
}

/// Jump distance of every active voxel from a full scan: distance to the
/// nearest voxel with a box neighbour on another level.
fn brute_force_classification(
    grid: &MultiResGrid,
    map: &LevelMap,
    periodic: [bool; 3],
) -> Result<(), String> {
    let dim = grid.dim();
    for l in 0..grid.num_levels() {
        let lv = grid.level(l);
        let shape = lv.shape;
        let touches = |p: [usize; 3]| {
            let zr = if dim == 3 { -1i64..=1 } else { 0..=0 };
            zr.clone().any(|dz| {
                (-1i64..=1).any(|dy| {
                    (-1i64..=1).any(|dx| {
                        let d = [dx, dy, dz];
                        let mut q = [0usize; 3];
                        for a in 0..3 {
                            let g = p[a] as i64 + d[a];
                            let n = shape[a] as i64;
                            if (0..n).contains(&g) {
                                q[a] = g as usize;
                            } else if periodic[a] {
                                q[a] = g.rem_euclid(n) as usize;
                            } else {
                                return false;
                            }
                        }
                        map.level_at(l, q) != l
                    })
                })
            })
        };
        let cells: Vec<[usize; 3]> = lv
            .grid
            .active_voxels()
            .map(|(b, v)| lv.grid.voxel(b, v))
            .collect();
        let zero: Vec<[usize; 3]> = cells.iter().copied().filter(|&p| touches(p)).collect();
        for &p in &cells {
            let expect = zero.iter().map(|&z| chebyshev(p, z, shape, periodic)).min();
            let got = grid.jump_distance(l, p).map_err(|e| e.to_string())?;
            ensure(got == expect, || {
                format!("level {l} voxel {p:?}: {got:?} != {expect:?}")
            })?;
        }
        for b in 0..lv.grid.num_blocks() {
            let jump = (0..lv.grid.block_voxels())
                .any(|v| lv.grid.is_active(b, v) && touches(lv.grid.voxel(b, v)));
            let class = if jump {
                FusionClass::Jump
            } else {
                FusionClass::Uniform
            };
            ensure(lv.classes[b] == class, || {
                format!("level {l} block {b}: {:?} != {class:?}", lv.classes[b])
            })?;
        }
    }
    Ok(())
}

#[test]
fn criterion_7_fusion_soundness() {
    criterion(7, "fusion soundness", None, || {
        [2usize, 3].par_iter().try_for_each(|&levels| {
            let mut fused =
                multires_cavity(LatticeKind::D3Q19, 32, levels, true).map_err(|e| e.to_string())?;
            let mut staged = multires_cavity(LatticeKind::D3Q19, 32, levels, false)
                .map_err(|e| e.to_string())?;
            fused.run(10).map_err(|e| e.to_string())?;
            staged.run(10).map_err(|e| e.to_string())?;
            ensure(fused.bitwise_eq(&staged), || {
                format!("{levels} levels: fused and staged states differ")
            })?;
            let (uniform, _) = fused.grid().class_counts();
            let g = fused.graph();
            ensure(g.fused_blocks() == uniform, || {
                format!(
                    "{levels} levels: fused nodes cover {} blocks, |G_i| = {uniform}",
                    g.fused_blocks()
                )
            })
        })?;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let levels = rng.gen_range(2..=3);
            let planar = rng.gen_bool(0.5);
            let (kind, coarse) = if planar {
                (LatticeKind::D2Q9, [8, 8, 1])
            } else {
                (LatticeKind::D3Q19, [4, 4, 4])
            };
            let mut periodic = [false; 3];
            periodic[0] = rng.gen_bool(0.5);
            let lattice = Lattice::new(kind);
            let map = LevelMap::random(coarse, levels, kind.dim(), periodic, seed)
                .map_err(|e| e.to_string())?;
            let mut domain = disagg::lbm::DomainBox::closed(map.level_shape(0));
            domain.periodic = periodic;
            let grid =
                MultiResGrid::new(&lattice, &domain, map.clone(), 4).map_err(|e| e.to_string())?;
            brute_force_classification(&grid, &map, periodic)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let g = ExecutionGraph::build(&grid, true);
            ensure(g.fused_blocks() == grid.class_counts().0, || {
                format!("seed {seed}: fused coverage")
            })?;
        }
        Ok(())
    });
}

/// Density and momentum of one voxel, summed directly from the velocity set.
fn voxel_moments(lattice: &Lattice, f: &[f64]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for (i, fi) in f.iter().enumerate() {
        let e = lattice.velocity(i);
        m[0] += fi;
        for a in 0..3 {
            m[a + 1] += fi * e[a] as f64;
        }
    }
    m
}

#[test]
fn criterion_8_physics_sanity() {
    criterion(8, "physics sanity", None, || {
        // mass in a periodic box, from the shipped config
        let periodic = config("periodic.toml");
        ensure(periodic.steps == 100 && periodic.shape == [16; 3], || {
            "periodic config changed".into()
        })?;
        let report = run(&periodic).map_err(|e| e.to_string())?;
        let drift = report.mass_drift();
        ensure(drift < 1e-12, || format!("periodic mass drift {drift:e}"))?;

        // uniform equilibrium is a fixed point
        for kind in LatticeKind::ALL {
            let setup = scenario::setup_for(
                Scenario::PeriodicBox,
                Lattice::new(kind),
                cube(kind, 8),
                0.8,
                [0.0; 3],
            )
            .map_err(|e| e.to_string())?;
            let n = setup.domain.voxels();
            let init = scenario::uniform_field(
                &setup,
                1.02,
                [0.03, -0.02, if kind.dim() == 3 { 0.01 } else { 0.0 }],
                &vec![true; n],
            );
            let mut s = DenseSolver::new(setup, init.clone()).map_err(|e| e.to_string())?;
            s.run(5).map_err(|e| e.to_string())?;
            let worst = s
                .field()
                .data
                .iter()
                .zip(&init.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            ensure(worst <= 1e-14, || {
                format!("{kind}: equilibrium moved by {worst:e}")
            })?;
        }

        // collision conserves per-voxel moments
        for kind in LatticeKind::ALL {
            let lattice = Lattice::new(kind);
            let setup = scenario::setup_for(
                Scenario::PeriodicBox,
                lattice.clone(),
                cube(kind, 6),
                0.8,
                [0.0; 3],
            )
            .map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut field = Field::zeros(setup.domain.shape, kind.q());
            for (i, v) in field.data.iter_mut().enumerate() {
                *v = lattice.weight(i % kind.q()) * rng.gen_range(0.5..1.5);
            }
            let before = field.clone();
            collide_bgk(&setup, &mut field, 0).map_err(|e| e.to_string())?;
            let q = kind.q();
            for v in 0..field.voxels() {
                let a = voxel_moments(&lattice, &before.data[v * q..(v + 1) * q]);
                let b = voxel_moments(&lattice, &field.data[v * q..(v + 1) * q]);
                for k in 0..4 {
                    let rel = (a[k] - b[k]).abs() / a[0];
                    ensure(rel <= 1e-12, || {
                        format!("{kind} voxel {v} moment {k}: relative change {rel:e}")
                    })?;
                }
            }
        }

        // the shipped cavity run stays finite and positive
        let cavity = config("cavity.toml");
        let report = run(&cavity).map_err(|e| e.to_string())?;
        let f = &report.field;
        let bad = f
            .data
            .chunks(f.q)
            .zip(&f.active)
            .filter(|(_, on)| **on)
            .flat_map(|(v, _)| v.iter())
            .find(|x| !(x.is_finite() && **x > 0.0));
        ensure(bad.is_none(), || format!("cavity population {bad:?}"))
    });
}

#[test]
fn criterion_9_model_narrative() {
    criterion(9, "model narrative", None, || {
        let s = 32 * 32;
        let elem = 8;
        for kind in LatticeKind::ALL {
            let field = FieldKind::Lattice(kind);
            let soa = layout_params(field, Scheme::SoA, s).map_err(|e| e.to_string())?;
            let disag = layout_params(field, Scheme::DisagSoA, s).map_err(|e| e.to_string())?;
            // latency-bound link: one setup costs as much as a megabyte
            let latency = LinkModel::new(1e-3, 1e9).map_err(|e| e.to_string())?;
            let (ts, td) = (
                halo_update_time(soa, elem, latency),
                halo_update_time(disag, elem, latency),
            );
            ensure(td < ts, || {
                format!("{kind}: DisagSoA {td} not below SoA {ts} on a latency-bound link")
            })?;
            // bandwidth-bound links: the gap shrinks with t_setup and vanishes at 0
            let mut previous = f64::INFINITY;
            for t_setup in [1e-6, 1e-8, 1e-10, 0.0] {
                let link = LinkModel::new(t_setup, 1e9).map_err(|e| e.to_string())?;
                let (ts, td) = (
                    halo_update_time(soa, elem, link),
                    halo_update_time(disag, elem, link),
                );
                let gap = (ts - td) / ts;
                ensure(td <= ts && gap < previous, || {
                    format!("{kind}: gap {gap:e} at t_setup {t_setup:e}")
                })?;
                previous = gap;
            }
            ensure(previous == 0.0, || {
                format!("{kind}: times differ on a pure-bandwidth link")
            })?;
        }
        Ok(())
    });
}
