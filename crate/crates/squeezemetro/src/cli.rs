//! Command-line front end.
//!
//! Subcommands: `reproduce-table1`, `reproduce-table2`, `sweep`, `qfi`,
//! `optimize`, `singularity`, `oracle-check`. A flat `key=value` config file
//! named by `SQUEEZEMETRO_CONFIG` supplies defaults; command-line flags win.
//! Exit codes: 0 success, 1 tolerance failure, 2 usage or I/O error.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::estimation::{self, Detection, FidelityFlag, Medium, SchemeSpec};
use crate::fisher;
use crate::fock;
use crate::gaussian::{self, ProbeConfig};
use crate::Error;

/// Seed magnitude used when none is given; bright for every plotted `r`.
pub const DEFAULT_SEED: f64 = 1e4;
/// Absolute tolerance on quantum-advantage table cells.
pub const TABLE_TOL: f64 = 0.02;
const ENV_CONFIG: &str = "SQUEEZEMETRO_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MediumKind {
    Loss,
    Gain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineKind {
    /// Leading-order moment propagation (authoritative).
    Moment,
    /// Printed closed-form expressions, with fidelity flags.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatKind {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Bd,
    Su11Sum,
    Su11Single,
}

impl SchemeKind {
    fn detection(self) -> Detection {
        match self {
            SchemeKind::Bd => Detection::BalancedDifference,
            SchemeKind::Su11Sum => Detection::Su11Sum,
            SchemeKind::Su11Single => Detection::Su11SinglePort,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "squeezemetro",
    version,
    about = "Absorption/gain estimation with two-mode bright squeezed light"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare computed quantum advantages against the built-in absorption
    /// reference table (4 rows x 3 columns).
    ReproduceTable1 {
        #[arg(long, value_enum)]
        engine: Option<EngineKind>,
        #[arg(long)]
        u: Option<f64>,
    },
    /// Compare computed quantum advantages against the built-in gain
    /// reference table (2 rows x 3 columns).
    ReproduceTable2 {
        #[arg(long, value_enum)]
        engine: Option<EngineKind>,
        #[arg(long)]
        u: Option<f64>,
    },
    /// Sweep the squeezing parameter and emit one row per grid point.
    Sweep {
        #[arg(long, value_enum)]
        medium: Option<MediumKind>,
        /// Medium parameter (alpha for loss, G for gain).
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long = "r-min")]
        r_min: Option<f64>,
        #[arg(long = "r-max")]
        r_max: Option<f64>,
        #[arg(long = "r-steps")]
        r_steps: Option<usize>,
        #[arg(long, value_enum)]
        engine: Option<EngineKind>,
        #[arg(long, value_enum)]
        format: Option<FormatKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantum Fisher information and Cramér-Rao bound at one point.
    Qfi {
        #[arg(long, value_enum)]
        medium: Option<MediumKind>,
        #[arg(long)]
        theta: Option<f64>,
        /// Shorthand for --medium loss --theta <ALPHA>.
        #[arg(long, conflicts_with_all = ["medium", "theta"])]
        alpha: Option<f64>,
        /// Shorthand for --medium gain --theta <GAIN>.
        #[arg(long, conflicts_with_all = ["medium", "theta", "alpha"])]
        gain: Option<f64>,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        u: Option<f64>,
        /// Write the output Gaussian state as JSON to this path.
        #[arg(long = "dump-state")]
        dump_state: Option<PathBuf>,
    },
    /// Search the squeezing parameter maximizing the quantum advantage.
    Optimize {
        #[arg(long, value_enum)]
        scheme: SchemeKind,
        #[arg(long, value_enum)]
        medium: Option<MediumKind>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, conflicts_with_all = ["medium", "theta"])]
        alpha: Option<f64>,
        #[arg(long, conflicts_with_all = ["medium", "theta", "alpha"])]
        gain: Option<f64>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long = "r-min")]
        r_min: Option<f64>,
        #[arg(long = "r-max")]
        r_max: Option<f64>,
    },
    /// Squeezing parameter where the sum-signal sensitivity diverges.
    Singularity {
        #[arg(long)]
        alpha: f64,
    },
    /// Cross-check the Gaussian engine against the number-basis oracle.
    OracleCheck {
        #[arg(long)]
        cutoff: Option<usize>,
    },
}

/// Resolved sweep configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub medium: MediumKind,
    pub theta: f64,
    pub u: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_steps: usize,
    pub engine: EngineKind,
    pub format: FormatKind,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn medium(&self) -> Medium {
        match self.medium {
            MediumKind::Loss => Medium::Loss(self.theta),
            MediumKind::Gain => Medium::Gain(self.theta),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.r_min.is_nan() || self.r_max.is_nan() || self.r_min >= self.r_max {
            return Err(format!(
                "invalid r range: r_min {} must be < r_max {}",
                self.r_min, self.r_max
            ));
        }
        if self.r_steps < 2 {
            return Err(format!("r_steps must be >= 2 (got {})", self.r_steps));
        }
        if self.u <= 0.0 {
            return Err(format!("u must be positive (got {})", self.u));
        }
        self.medium().validate().map_err(|e| e.to_string())
    }
}

/// One sweep grid point. The sum-signal columns are empty exactly at a
/// singular operating point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub theta: f64,
    pub qa_bd: f64,
    pub qa_su11_single: f64,
    pub qa_su11_sum: Option<f64>,
    pub qa_crb: f64,
    pub delta_bd: f64,
    pub delta_su11_single: f64,
    pub delta_su11_sum: Option<f64>,
    pub delta_crb: f64,
    pub delta_coh: f64,
}

pub const SWEEP_HEADER: &str = "r,theta,qa_bd,qa_su11_single,qa_su11_sum,qa_crb,\
delta_bd,delta_su11_single,delta_su11_sum,delta_crb,delta_coh";

fn flat_config() -> Result<HashMap<String, String>, String> {
    let Some(path) = std::env::var_os(ENV_CONFIG) else {
        return Ok(HashMap::new());
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read {}: {e}", PathBuf::from(&path).display()))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "config line {} is not key=value: {line}",
                lineno + 1
            ));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(
    cfg: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, String> {
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| format!("config key {key} has invalid value {raw}")),
    }
}

fn config_medium(cfg: &HashMap<String, String>) -> Result<Option<MediumKind>, String> {
    match cfg.get("medium").map(|s| s.as_str()) {
        None => Ok(None),
        Some("loss") => Ok(Some(MediumKind::Loss)),
        Some("gain") => Ok(Some(MediumKind::Gain)),
        Some(other) => Err(format!("config key medium has invalid value {other}")),
    }
}

fn config_engine(cfg: &HashMap<String, String>) -> Result<Option<EngineKind>, String> {
    match cfg.get("engine").map(|s| s.as_str()) {
        None => Ok(None),
        Some("moment") => Ok(Some(EngineKind::Moment)),
        Some("closed-form") => Ok(Some(EngineKind::ClosedForm)),
        Some(other) => Err(format!("config key engine has invalid value {other}")),
    }
}

fn config_format(cfg: &HashMap<String, String>) -> Result<Option<FormatKind>, String> {
    match cfg.get("format").map(|s| s.as_str()) {
        None => Ok(None),
        Some("csv") => Ok(Some(FormatKind::Csv)),
        Some("json") => Ok(Some(FormatKind::Json)),
        Some(other) => Err(format!("config key format has invalid value {other}")),
    }
}

/// Compute one sweep row.
pub fn sweep_row(config: &RunConfig, r: f64) -> Result<SweepRow, Error> {
    let cfg = ProbeConfig::real(config.u, r);
    let medium = config.medium();
    let delta_coh = estimation::coherent_baseline(&cfg, &medium)?;
    let fisher_value = match medium {
        Medium::Loss(a) => fisher::qfi_absorption_closed(cfg.seed, r, a)?,
        Medium::Gain(g) => fisher::qfi_gain_closed(cfg.seed, r, g)?,
    };
    let delta_crb = fisher::cr_bound(fisher_value, 1)?;
    let qa_crb = delta_coh / delta_crb;

    let eval = |det: Detection| -> Result<Option<f64>, Error> {
        let scheme = SchemeSpec::new(det, medium);
        let out = match config.engine {
            EngineKind::Moment => estimation::sensitivity(&scheme, &cfg).map(|rep| rep.delta_theta),
            EngineKind::ClosedForm => {
                estimation::closed_form_sensitivity(&scheme, &cfg).map(|ev| ev.delta_theta)
            }
        };
        match out {
            Ok(v) => Ok(Some(v)),
            Err(Error::SingularOperatingPoint { .. }) | Err(Error::NegativeRadicand { .. })
                if det == Detection::Su11Sum =>
            {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };

    let delta_bd = eval(Detection::BalancedDifference)?.expect("balanced scheme is nonsingular");
    let delta_single = match eval(Detection::Su11SinglePort) {
        Ok(Some(v)) => v,
        // no printed single-port form on the gain side; fall back to the engine
        Err(Error::NoClosedForm) => {
            estimation::sensitivity(&SchemeSpec::new(Detection::Su11SinglePort, medium), &cfg)?
                .delta_theta
        }
        Ok(None) => unreachable!("single-port scheme is nonsingular"),
        Err(e) => return Err(e),
    };
    let delta_sum = eval(Detection::Su11Sum)?;

    Ok(SweepRow {
        r,
        theta: config.theta,
        qa_bd: delta_coh / delta_bd,
        qa_su11_single: delta_coh / delta_single,
        qa_su11_sum: delta_sum.map(|d| delta_coh / d),
        qa_crb,
        delta_bd,
        delta_su11_single: delta_single,
        delta_su11_sum: delta_sum,
        delta_crb,
        delta_coh,
    })
}

/// All sweep rows in grid order.
pub fn sweep_rows(config: &RunConfig) -> Result<Vec<SweepRow>, Error> {
    let mut rows = Vec::with_capacity(config.r_steps);
    for i in 0..config.r_steps {
        let r =
            config.r_min + (config.r_max - config.r_min) * i as f64 / (config.r_steps - 1) as f64;
        rows.push(sweep_row(config, r)?);
    }
    Ok(rows)
}

fn fmt_sig(x: f64) -> String {
    format!("{:.11e}", x)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

/// Render rows as CSV ('.' decimal, 12 significant digits, fixed column
/// order; byte-identical across runs with the same config).
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_sig(row.r),
            fmt_sig(row.theta),
            fmt_sig(row.qa_bd),
            fmt_sig(row.qa_su11_single),
            fmt_opt(row.qa_su11_sum),
            fmt_sig(row.qa_crb),
            fmt_sig(row.delta_bd),
            fmt_sig(row.delta_su11_single),
            fmt_opt(row.delta_su11_sum),
            fmt_sig(row.delta_crb),
            fmt_sig(row.delta_coh),
        ));
    }
    out
}

/// One table cell: computed value against its reference.
#[derive(Debug, Clone, Copy)]
pub struct TableCell {
    pub computed: f64,
    pub reference: f64,
    pub flag: Option<FidelityFlag>,
}

impl TableCell {
    pub fn ok(&self) -> bool {
        (self.computed - self.reference).abs() <= TABLE_TOL
    }
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub theta: f64,
    pub r: f64,
    pub cells: [TableCell; 3],
}

/// Absorption reference table: (alpha, r, [QA_BD, QA_SU11, QA_CRB]).
/// The SU(1,1) column is the single-port signal.
pub const TABLE1_REF: [(f64, f64, [f64; 3]); 4] = [
    (0.05, 1.99, [3.32, 3.36, 3.42]),
    (0.05, 2.35, [2.81, 3.77, 3.85]),
    (0.01, 2.82, [7.39, 7.53, 7.63]),
    (0.01, 3.17, [6.26, 8.41, 8.59]),
];

/// Gain reference table: (G, r, [QA_BD, QA_SU11, QA_CRB]).
/// The SU(1,1) column is the sum signal.
#[allow(clippy::approx_constant)] // 6.28 is a quantum-advantage entry, not tau
pub const TABLE2_REF: [(f64, f64, [f64; 3]); 2] = [
    (1.05, 2.37, [1.78, 2.81, 3.82]),
    (1.01, 3.17, [3.93, 6.28, 8.58]),
];

fn qa_cell(
    det: Detection,
    medium: Medium,
    cfg: &ProbeConfig,
    engine: EngineKind,
    reference: f64,
) -> Result<TableCell, Error> {
    let scheme = SchemeSpec::new(det, medium);
    let baseline = estimation::coherent_baseline(cfg, &medium)?;
    let (delta, flag) = match engine {
        EngineKind::Moment => (estimation::sensitivity(&scheme, cfg)?.delta_theta, None),
        EngineKind::ClosedForm => {
            let ev = estimation::closed_form_sensitivity(&scheme, cfg)?;
            (ev.delta_theta, Some(ev.flag))
        }
    };
    Ok(TableCell {
        computed: baseline / delta,
        reference,
        flag,
    })
}

/// Compute a reference table with the chosen engine.
pub fn table_rows(
    reference: &[(f64, f64, [f64; 3])],
    su11_detection: Detection,
    seed: f64,
    engine: EngineKind,
) -> Result<Vec<TableRow>, Error> {
    let mut rows = Vec::new();
    for &(theta, r, refs) in reference {
        let medium = if theta >= 1.0 {
            Medium::Gain(theta)
        } else {
            Medium::Loss(theta)
        };
        let cfg = ProbeConfig::real(seed, r);
        let bd = qa_cell(Detection::BalancedDifference, medium, &cfg, engine, refs[0])?;
        let su = qa_cell(su11_detection, medium, &cfg, engine, refs[1])?;
        let crb = TableCell {
            computed: estimation::qa_crb(&medium, r)?,
            reference: refs[2],
            flag: None,
        };
        rows.push(TableRow {
            theta,
            r,
            cells: [bd, su, crb],
        });
    }
    Ok(rows)
}

fn print_table(label: &str, rows: &[TableRow]) -> (usize, usize) {
    println!("{label}");
    println!(
        "{:>8} {:>6}  {:>22} {:>22} {:>22}",
        "theta", "r", "QA_BD", "QA_SU11", "QA_CRB"
    );
    let mut ok = 0;
    let mut total = 0;
    for row in rows {
        let mut cols = Vec::new();
        for cell in &row.cells {
            total += 1;
            let status = if cell.ok() {
                ok += 1;
                "ok".to_string()
            } else {
                format!("MISMATCH {:+.4}", cell.computed - cell.reference)
            };
            let flag = match cell.flag {
                Some(FidelityFlag::PrintedFormDiscrepant) => " [discrepant form]",
                _ => "",
            };
            cols.push(format!(
                "{:7.4} (ref {:5.2} {status}){flag}",
                cell.computed, cell.reference
            ));
        }
        println!(
            "{:>8} {:>6}  {:>22} {:>22} {:>22}",
            row.theta, row.r, cols[0], cols[1], cols[2]
        );
    }
    println!("{ok}/{total} cells within +-{TABLE_TOL}");
    (ok, total)
}

fn write_output(out: &Option<PathBuf>, contents: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, contents)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| format!("cannot write to stdout: {e}")),
    }
}

pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Dispatch a parsed command line. `Err` means usage/config/I-O trouble
/// (exit 2); tolerance failures come back as `Ok(1)`.
pub fn run(cli: Cli) -> Result<ExitCode, String> {
    let file_cfg = flat_config()?;
    match cli.command {
        Command::ReproduceTable1 { engine, u } => {
            let engine = engine
                .or(config_engine(&file_cfg)?)
                .unwrap_or(EngineKind::Moment);
            let u = u.or(config_get(&file_cfg, "u")?).unwrap_or(DEFAULT_SEED);
            let rows = table_rows(&TABLE1_REF, Detection::Su11SinglePort, u, engine)
                .map_err(|e| e.to_string())?;
            let (ok, total) = print_table("absorption quantum-advantage table", &rows);
            Ok(ExitCode::from(u8::from(ok != total)))
        }
        Command::ReproduceTable2 { engine, u } => {
            let engine = engine
                .or(config_engine(&file_cfg)?)
                .unwrap_or(EngineKind::Moment);
            let u = u.or(config_get(&file_cfg, "u")?).unwrap_or(DEFAULT_SEED);
            let rows = table_rows(&TABLE2_REF, Detection::Su11Sum, u, engine)
                .map_err(|e| e.to_string())?;
            let (ok, total) = print_table("gain quantum-advantage table", &rows);
            Ok(ExitCode::from(u8::from(ok != total)))
        }
        Command::Sweep {
            medium,
            theta,
            u,
            r_min,
            r_max,
            r_steps,
            engine,
            format,
            out,
        } => {
            let medium = medium
                .or(config_medium(&file_cfg)?)
                .unwrap_or(MediumKind::Loss);
            let config = RunConfig {
                medium,
                theta: theta
                    .or(config_get(&file_cfg, "theta")?)
                    .unwrap_or(match medium {
                        MediumKind::Loss => 0.05,
                        MediumKind::Gain => 1.05,
                    }),
                u: u.or(config_get(&file_cfg, "u")?).unwrap_or(DEFAULT_SEED),
                r_min: r_min.or(config_get(&file_cfg, "r_min")?).unwrap_or(0.0),
                r_max: r_max.or(config_get(&file_cfg, "r_max")?).unwrap_or(3.5),
                r_steps: r_steps.or(config_get(&file_cfg, "r_steps")?).unwrap_or(351),
                engine: engine
                    .or(config_engine(&file_cfg)?)
                    .unwrap_or(EngineKind::Moment),
                format: format
                    .or(config_format(&file_cfg)?)
                    .unwrap_or(FormatKind::Csv),
                out: out.or(config_get::<String>(&file_cfg, "out")?.map(PathBuf::from)),
            };
            config.validate()?;
            let rows = sweep_rows(&config).map_err(|e| e.to_string())?;
            let payload = match config.format {
                FormatKind::Csv => rows_to_csv(&rows),
                FormatKind::Json => {
                    let mut s = serde_json::to_string_pretty(&rows)
                        .map_err(|e| format!("serialization failed: {e}"))?;
                    s.push('\n');
                    s
                }
            };
            write_output(&config.out, &payload)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Qfi {
            medium,
            theta,
            alpha,
            gain,
            r,
            u,
            dump_state,
        } => {
            let medium = resolve_medium(medium, theta, alpha, gain, &file_cfg)?;
            let u = u.or(config_get(&file_cfg, "u")?).unwrap_or(DEFAULT_SEED);
            let cfg = ProbeConfig::real(u, r);
            let (qfi, closed, state) = match medium {
                Medium::Loss(a) => (
                    fisher::qfi_loss(&cfg, a).map_err(|e| e.to_string())?,
                    fisher::qfi_absorption_closed(cfg.seed, r, a).map_err(|e| e.to_string())?,
                    gaussian::tmbss_through_loss(&cfg, a).map_err(|e| e.to_string())?,
                ),
                Medium::Gain(g) => (
                    fisher::qfi_gain(&cfg, g).map_err(|e| e.to_string())?,
                    fisher::qfi_gain_closed(cfg.seed, r, g).map_err(|e| e.to_string())?,
                    gaussian::tmbss_through_gain(&cfg, g).map_err(|e| e.to_string())?,
                ),
            };
            println!("qfi           = {:.12e}", qfi.value);
            println!("term_sigma    = {:.12e}", qfi.term_sigma);
            println!("term_disp     = {:.12e}", qfi.term_disp);
            println!("closed_form   = {:.12e}", closed);
            println!(
                "cr_bound      = {:.12e}",
                fisher::cr_bound(qfi.value, 1).map_err(|e| e.to_string())?
            );
            if let Some(path) = dump_state {
                let json = serde_json::to_string_pretty(&state.dump())
                    .map_err(|e| format!("serialization failed: {e}"))?;
                std::fs::write(&path, json)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize {
            scheme,
            medium,
            theta,
            alpha,
            gain,
            u,
            r_min,
            r_max,
        } => {
            let medium = resolve_medium(medium, theta, alpha, gain, &file_cfg)?;
            let u = u.or(config_get(&file_cfg, "u")?).unwrap_or(DEFAULT_SEED);
            let r_lo = r_min.or(config_get(&file_cfg, "r_min")?).unwrap_or(0.0);
            let r_hi = r_max.or(config_get(&file_cfg, "r_max")?).unwrap_or(4.0);
            let spec = SchemeSpec::new(scheme.detection(), medium);
            let out = estimation::optimize_r(&spec, &ProbeConfig::real(u, 0.0), r_lo, r_hi)
                .map_err(|e| e.to_string())?;
            println!("r_opt  = {:.6}", out.r_opt);
            println!("qa_opt = {:.6}", out.qa_opt);
            if !out.refined {
                println!("warning: profile not unimodal on the grid; best coarse point returned");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Singularity { alpha } => {
            let r = estimation::su11_sum_singularity(alpha).map_err(|e| e.to_string())?;
            println!("r_singular = {:.10}", r);
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck { cutoff } => {
            let cutoff = cutoff
                .or(config_get(&file_cfg, "cutoff")?)
                .unwrap_or(fock::DEFAULT_CUTOFF);
            let summary = fock::equivalence_suite(cutoff).map_err(|e| e.to_string())?;
            println!("points checked = {}", summary.points);
            println!("max |mean dev| = {:.3e}", summary.max_mean_dev);
            println!("max |var dev|  = {:.3e}", summary.max_var_dev);
            let ok = summary.max_mean_dev < 1e-6 && summary.max_var_dev < 1e-6;
            println!("oracle agreement {}", if ok { "ok" } else { "FAILED" });
            Ok(ExitCode::from(u8::from(!ok)))
        }
    }
}

fn resolve_medium(
    medium: Option<MediumKind>,
    theta: Option<f64>,
    alpha: Option<f64>,
    gain: Option<f64>,
    file_cfg: &HashMap<String, String>,
) -> Result<Medium, String> {
    if let Some(a) = alpha {
        return Ok(Medium::Loss(a));
    }
    if let Some(g) = gain {
        return Ok(Medium::Gain(g));
    }
    let medium = medium
        .or(config_medium(file_cfg)?)
        .ok_or("missing --medium (or --alpha/--gain)")?;
    let theta = theta
        .or(config_get(file_cfg, "theta")?)
        .ok_or("missing --theta")?;
    Ok(match medium {
        MediumKind::Loss => Medium::Loss(theta),
        MediumKind::Gain => Medium::Gain(theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_config() -> RunConfig {
        RunConfig {
            medium: MediumKind::Loss,
            theta: 0.05,
            u: DEFAULT_SEED,
            r_min: 0.0,
            r_max: 3.5,
            r_steps: 36,
            engine: EngineKind::Moment,
            format: FormatKind::Csv,
            out: None,
        }
    }

    #[test]
    fn table1_moment_engine_matches_except_known_cell() {
        let rows = table_rows(
            &TABLE1_REF,
            Detection::Su11SinglePort,
            DEFAULT_SEED,
            EngineKind::Moment,
        )
        .unwrap();
        let mut mismatches = Vec::new();
        for row in &rows {
            for (i, cell) in row.cells.iter().enumerate() {
                if !cell.ok() {
                    mismatches.push((row.theta, row.r, i, cell.computed));
                }
            }
        }
        // the CRB entry of the (0.01, 2.82) row disagrees with its own
        // closed-form bound; everything else reproduces
        assert_eq!(mismatches.len(), 1, "{mismatches:?}");
        let (theta, r, col, computed) = mismatches[0];
        assert_eq!((theta, r, col), (0.01, 2.82, 2));
        assert_relative_eq!(computed, 7.6618592275, max_relative = 1e-6);
    }

    #[test]
    fn table2_moment_engine_matches_all_cells() {
        let rows = table_rows(
            &TABLE2_REF,
            Detection::Su11Sum,
            DEFAULT_SEED,
            EngineKind::Moment,
        )
        .unwrap();
        for row in &rows {
            for cell in &row.cells {
                assert!(
                    cell.ok(),
                    "cell {:?} vs ref {} at (G={}, r={})",
                    cell.computed,
                    cell.reference,
                    row.theta,
                    row.r
                );
            }
        }
    }

    #[test]
    fn table1_closed_form_engine_flags_su11_cells() {
        let rows = table_rows(
            &TABLE1_REF,
            Detection::Su11SinglePort,
            DEFAULT_SEED,
            EngineKind::ClosedForm,
        )
        .unwrap();
        for row in &rows {
            assert_eq!(row.cells[1].flag, Some(FidelityFlag::PrintedFormDiscrepant));
            assert!(
                !row.cells[1].ok(),
                "printed single-port form should mismatch"
            );
            assert_eq!(row.cells[0].flag, Some(FidelityFlag::TableConsistent));
            assert!(row.cells[0].ok());
        }
    }

    #[test]
    fn qa_columns_independent_of_seed() {
        let rows_a = table_rows(
            &TABLE1_REF,
            Detection::Su11SinglePort,
            1e3,
            EngineKind::Moment,
        )
        .unwrap();
        let rows_b = table_rows(
            &TABLE1_REF,
            Detection::Su11SinglePort,
            1e5,
            EngineKind::Moment,
        )
        .unwrap();
        for (a, b) in rows_a.iter().zip(&rows_b) {
            for (ca, cb) in a.cells.iter().zip(&b.cells) {
                assert!((ca.computed - cb.computed).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sweep_rows_monotone_grid_and_bounds() {
        let config = default_config();
        let rows = sweep_rows(&config).unwrap();
        assert_eq!(rows.len(), 36);
        assert_eq!(rows[0].r, 0.0);
        assert_relative_eq!(rows[35].r, 3.5, epsilon = 1e-12);
        for w in rows.windows(2) {
            assert!(w[1].r > w[0].r);
        }
        for row in &rows {
            assert!(row.qa_bd <= row.qa_crb + 1e-9);
            assert!(row.qa_su11_single <= row.qa_crb + 1e-9);
            if let Some(qa) = row.qa_su11_sum {
                assert!(qa <= row.qa_crb + 1e-9);
            }
        }
    }

    #[test]
    fn sweep_emits_empty_sum_cell_at_singularity() {
        let r_star = estimation::su11_sum_singularity(0.05).unwrap();
        let config = RunConfig {
            r_min: r_star - 0.5,
            r_max: r_star + 0.5,
            r_steps: 3, // middle point lands exactly on r*
            ..default_config()
        };
        let rows = sweep_rows(&config).unwrap();
        assert!(rows[1].qa_su11_sum.is_none());
        assert!(rows[0].qa_su11_sum.is_some());
        assert!(rows[2].qa_su11_sum.is_some());
        let csv = rows_to_csv(&rows);
        let singular_line = csv.lines().nth(2).unwrap();
        assert!(singular_line.contains(",,"), "{singular_line}");
    }

    #[test]
    fn gain_sweep_sum_always_beats_balanced() {
        let config = RunConfig {
            medium: MediumKind::Gain,
            theta: 1.05,
            r_min: 0.05,
            r_max: 3.5,
            r_steps: 30,
            ..default_config()
        };
        let rows = sweep_rows(&config).unwrap();
        for row in &rows {
            let qa_sum = row.qa_su11_sum.expect("gain sum scheme is nonsingular");
            assert!(
                qa_sum > row.qa_bd,
                "sum {} <= bd {} at r={}",
                qa_sum,
                row.qa_bd,
                row.r
            );
        }
    }

    #[test]
    fn sweep_minima_match_reference_optima() {
        // 0.01-step grid over the full range: the scaled-sensitivity minima
        // (QA maxima) land on the tabulated operating points
        let config = RunConfig {
            r_steps: 351,
            ..default_config()
        };
        let rows = sweep_rows(&config).unwrap();
        let argmax = |f: &dyn Fn(&SweepRow) -> f64| {
            rows.iter()
                .max_by(|a, b| f(a).partial_cmp(&f(b)).unwrap())
                .unwrap()
                .r
        };
        let r_bd = argmax(&|row: &SweepRow| row.qa_bd);
        let r_single = argmax(&|row: &SweepRow| row.qa_su11_single);
        assert!((r_bd - 1.99).abs() <= 0.011, "BD optimum at {r_bd}");
        assert!(
            (r_single - 2.35).abs() <= 0.011,
            "single-port optimum at {r_single}"
        );
    }

    #[test]
    fn unit_gain_limit_reduces_to_cosh() {
        // G = 1: the balanced gain scheme's advantage is exactly cosh r
        for r in [0.5, 1.3, 2.4] {
            let rep = estimation::sensitivity(
                &SchemeSpec::new(Detection::BalancedDifference, Medium::Gain(1.0)),
                &ProbeConfig::real(DEFAULT_SEED, r),
            )
            .unwrap();
            assert_relative_eq!(rep.quantum_advantage, r.cosh(), max_relative = 1e-9);
        }
    }

    #[test]
    fn csv_deterministic_and_schema_stable() {
        let config = default_config();
        let a = rows_to_csv(&sweep_rows(&config).unwrap());
        let b = rows_to_csv(&sweep_rows(&config).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with(SWEEP_HEADER));
        assert_eq!(a.lines().next().unwrap().split(',').count(), 11);
    }

    #[test]
    fn run_config_validation() {
        let mut config = default_config();
        config.r_steps = 1;
        assert!(config.validate().is_err());
        let mut config = default_config();
        config.r_min = 2.0;
        config.r_max = 2.0;
        assert!(config.validate().is_err());
        let mut config = default_config();
        config.theta = 1.5; // not a valid loss parameter
        assert!(config.validate().is_err());
    }
}
