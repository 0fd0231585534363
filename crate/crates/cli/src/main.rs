//! Batch front-end: runs, equivalence checks, ledgers, model tables and
//! report aggregation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use disagg::commodel::{lattice_table_csv, partition_axis, vector_table_csv};
use disagg::io;
use disagg::layout::{Components, Scheme};
use disagg::lbm::config::SolverConfig;
use disagg::lbm::run::{self, ledger_rows, RunReport};
use disagg::lbm::scenario::{self, Scenario};
use disagg::partition::kernels::LbmKernel;
use disagg::partition::{PartitionedField, TransferLedger};
use disagg::verify::{self, Check};
use disagg::{Lattice, LatticeKind};

#[derive(Parser)]
#[command(
    name = "disagg",
    version,
    about = "Disaggregated-layout LBM runs and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML configuration and write its reports.
    Run {
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Also dump the final populations.
        #[arg(long)]
        dump: bool,
    },
    /// Run the partition, ledger, sparse-strategy and fusion equivalence suites.
    Verify {
        /// Domain edge in voxels.
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 20)]
        steps: u64,
    },
    /// Per-step halo traffic of a partitioned cavity next to the model.
    Ledger {
        #[arg(long, default_value = "D3Q19")]
        lattice: LatticeKind,
        #[arg(long, default_value = "DisagSoA")]
        layout: Scheme,
        #[arg(long, default_value_t = 4)]
        partitions: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 10)]
        steps: u64,
    },
    /// Print the layout parameter tables as CSV.
    Model {
        /// One lattice; all three when omitted.
        #[arg(long)]
        lattice: Option<LatticeKind>,
        #[arg(long, value_enum, default_value_t = Table::All)]
        table: Table,
    },
    /// Aggregate the `report.json` files of earlier runs into one CSV.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    /// Two-component vector field.
    Vector,
    /// Lattice populations.
    Lattice,
    All,
}

/// What a run was asked to do, written next to its outputs.
#[derive(Serialize)]
struct RunManifest<'a> {
    config: &'a Path,
    output: &'a Path,
    subcommand: &'static str,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, dump } => cmd_run(&config, &out, dump),
        Command::Verify { size, steps } => cmd_verify(size, steps),
        Command::Ledger {
            lattice,
            layout,
            partitions,
            size,
            steps,
        } => cmd_ledger(lattice, layout, partitions, size, steps),
        Command::Model { lattice, table } => {
            print!("{}", model_csv(lattice, table));
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dirs } => cmd_report(&dirs),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Path) -> Result<SolverConfig, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let config: SolverConfig =
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let problems = config.problems();
    if problems.is_empty() {
        Ok(config)
    } else {
        Err(problems
            .iter()
            .map(|p| format!("{}: {p}", path.display()))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

fn cmd_run(path: &Path, out: &Path, dump: bool) -> Result<ExitCode> {
    let config = match load_config(path) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return Ok(ExitCode::from(2));
        }
    };
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let manifest = RunManifest {
        config: path,
        output: out,
        subcommand: "run",
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    let report = run::run(&config)?;
    write_outputs(&report, out, dump)?;
    print!("{}", summary(&report));
    let ledger_ok = report.ledger_rows.iter().all(|r| r.matches());
    Ok(if ledger_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn write_outputs(report: &RunReport, out: &Path, dump: bool) -> Result<()> {
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    fs::write(
        out.join("diagnostics.csv"),
        io::diagnostics_csv(&report.diagnostics),
    )?;
    fs::write(
        out.join("centerline.csv"),
        io::centerline_csv(&report.centerline),
    )?;
    if let Some(ledger) = &report.ledger {
        fs::write(
            out.join("ledger.csv"),
            io::ledger_rows_csv(&report.ledger_rows),
        )?;
        fs::write(out.join("transfers.csv"), ledger.to_csv())?;
    }
    if let Some(dot) = &report.graph_dot {
        fs::write(out.join("graph.dot"), dot)?;
    }
    if dump {
        let layout = match report.config.representation {
            disagg::lbm::config::Representation::Dense => report.config.dense.layout.to_string(),
            _ => "canonical".to_string(),
        };
        io::write_field(
            &out.join("field"),
            &report.field,
            report.config.lattice,
            &layout,
        )?;
    }
    Ok(())
}

fn summary(report: &RunReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {:?} {:?}: {} steps",
        c.scenario.name(),
        c.lattice,
        c.shape,
        c.representation,
        c.steps
    );
    if let Some(last) = report.diagnostics.last() {
        let _ = writeln!(
            s,
            "mass {} (relative drift {:e}), max |u| {}",
            last.mass,
            report.mass_drift(),
            last.max_speed
        );
    }
    if !report.ledger_rows.is_empty() {
        let bad = report.ledger_rows.iter().filter(|r| !r.matches()).count();
        let _ = writeln!(
            s,
            "ledger rows {}, off-model {bad}",
            report.ledger_rows.len()
        );
    }
    if let Some(d) = &report.dispatch {
        let kernels: Vec<String> = d
            .kernels
            .iter()
            .map(|k| format!("{}:{}x{}", k.name, k.blocks, k.cost))
            .collect();
        let _ = writeln!(
            s,
            "dispatch {} [{}], extra storage {} B, {:?} indexing",
            d.strategy,
            kernels.join(" "),
            d.extra_storage_bytes,
            d.indexing
        );
    }
    if let Some(g) = &report.graph {
        let _ = writeln!(
            s,
            "graph nodes {} edges {} fused {} (blocks {})",
            g.nodes, g.edges, g.fused_nodes, g.fused_blocks
        );
    }
    if let Some(d) = &report.distribution {
        let _ = writeln!(s, "level distribution % {d}");
    }
    s
}

fn cmd_verify(size: usize, steps: u64) -> Result<ExitCode> {
    let mut checks: Vec<Check> = Vec::new();
    let counts: Vec<usize> = [1, 2, 4, 8]
        .into_iter()
        .filter(|&p| size >= 2 * p)
        .collect();
    let Some(&most) = counts.last() else {
        eprintln!("--size must be at least 2");
        return Ok(ExitCode::from(2));
    };
    for kind in LatticeKind::ALL {
        checks.extend(verify::partition_suite(kind, size, steps, &counts)?);
        checks.extend(verify::ledger_suite(kind, size, most, 2)?);
        checks.extend(verify::sparse_suite(kind, size, steps)?);
    }
    let fine = size.next_power_of_two().max(16);
    checks.extend(verify::fusion_suite(
        LatticeKind::D2Q9,
        fine,
        steps.min(10),
        &[2, 3],
    )?);
    checks.extend(verify::fusion_suite(
        LatticeKind::D3Q19,
        fine,
        steps.min(4),
        &[2, 3],
    )?);
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.case
        );
        if let Some(d) = &c.detail {
            println!("  {d}");
            failed += 1;
        }
    }
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_ledger(
    kind: LatticeKind,
    scheme: Scheme,
    partitions: usize,
    size: usize,
    steps: u64,
) -> Result<ExitCode> {
    let shape = if kind.dim() == 2 {
        [size, size, 1]
    } else {
        [size; 3]
    };
    let setup = scenario::setup_for(
        Scenario::LidDrivenCavity,
        Lattice::new(kind),
        shape,
        0.56,
        [0.05, 0.0, 0.0],
    )?;
    let mut field = match PartitionedField::new(
        shape,
        partitions,
        partition_axis(kind),
        scheme,
        Components::Lattice(kind),
        setup.domain.periodic,
    ) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return Ok(ExitCode::from(2));
        }
    };
    field.load(&scenario::rest_field(&setup));
    let kernel = LbmKernel::new(setup);
    let mut ledger = TransferLedger::new();
    for step in 0..steps {
        field.step_occ(&kernel, &mut ledger, step, &mut Vec::new())?;
    }
    let rows = ledger_rows(&field, &ledger)?;
    print!("{}", io::ledger_rows_csv(&rows));
    Ok(if rows.iter().all(|r| r.matches()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn model_csv(lattice: Option<LatticeKind>, table: Table) -> String {
    let mut out = String::new();
    if matches!(table, Table::Vector | Table::All) {
        out.push_str("# vector field, d_x by d_y split along y\n");
        out.push_str(&vector_table_csv());
    }
    if matches!(table, Table::Lattice | Table::All) {
        let kinds = lattice
            .map(|k| vec![k])
            .unwrap_or(LatticeKind::ALL.to_vec());
        for kind in kinds {
            let _ = writeln!(out, "# {kind}");
            out.push_str(&lattice_table_csv(kind));
        }
    }
    out
}

fn cmd_report(dirs: &[PathBuf]) -> Result<ExitCode> {
    let mut out = String::from("dir,scenario,lattice,representation,steps,final_mass,mass_drift,max_speed,ledger_ok,detail\n");
    for dir in dirs {
        let path = dir.join("report.json");
        let text =
            fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("{} is not JSON", path.display()))?;
        let c = &v["config"];
        let diags = v["diagnostics"].as_array().cloned().unwrap_or_default();
        let mass =
            |d: Option<&serde_json::Value>| d.and_then(|d| d["mass"].as_f64()).unwrap_or(f64::NAN);
        let first = mass(diags.first());
        let last = mass(diags.last());
        let speed = diags
            .last()
            .and_then(|d| d["max_speed"].as_f64())
            .unwrap_or(f64::NAN);
        let ledger_ok = v["ledger_rows"].as_array().is_none_or(|rows| {
            rows.iter()
                .all(|r| r["alpha"] == r["model_alpha"] && r["beta"] == r["model_beta"])
        });
        let detail = if let Some(d) = v["dispatch"].as_object() {
            format!(
                "{} extra={}B",
                d["strategy"].as_str().unwrap_or(""),
                d["extra_storage_bytes"]
            )
        } else if let Some(g) = v["graph"].as_object() {
            format!("nodes={} fused={}", g["nodes"], g["fused_nodes"])
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:e},{},{},{}",
            dir.display(),
            c["scenario"].as_str().unwrap_or(""),
            c["lattice"].as_str().unwrap_or(""),
            c["representation"].as_str().unwrap_or(""),
            c["steps"],
            last,
            ((last - first) / first).abs(),
            speed,
            ledger_ok,
            detail
        );
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}
