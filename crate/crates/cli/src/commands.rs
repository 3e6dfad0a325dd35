use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gcpim::compiler::{compile, schedule, ControlMode, PimProgram, SimMode, SimOptions};
use gcpim::montecarlo::{calibrate_variation, run_gate_campaign, Gate, SuccessReport};
use gcpim::{availability, trace_to_csv, EventLedgerF64, OpKind, SubArrayF64};
use serde::Serialize;

use crate::config::RunConfig;
use crate::exit::{ExitCode, Failure};
use crate::io;

/// Settings shared by every subcommand after flags are applied.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed_flag: Option<u64>,
}

impl Ctx {
    fn trials(&self) -> usize {
        self.cfg.trials
    }

    fn variation(&self) -> Result<gcpim::montecarlo::VariationConfig<f64>> {
        let mut v = self.cfg.variation.ok_or_else(|| {
            Failure::new(
                ExitCode::Calibration,
                "no variation in the config; run `gcpim calibrate` or set `variation`",
            )
        })?;
        if let Some(s) = self.seed_flag {
            v.seed = s;
        }
        Ok(v)
    }

    fn announce(&self, path: &Path) {
        println!("wrote {}", path.display());
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".into())
}

pub fn cmd_compile(ctx: &Ctx, files: &[PathBuf]) -> Result<()> {
    let opts = ctx.cfg.compile_options();
    let mut programs = Vec::new();
    for f in files {
        let text = io::read(f)?;
        let p = compile(&text, &opts, &ctx.cfg.timing).with_context(|| format!("compiling {}", f.display()))?;
        let s = p.stats();
        println!(
            "{}: {} gates (NOT {}, NOR {}), {} writes, {} reads, {} refreshes, peak {} live rows ({} gate values), {} ns, {:.1} fJ",
            f.display(),
            s.gates,
            s.not_gates,
            s.nor_gates,
            s.writes,
            s.reads,
            s.refreshes,
            s.peak_live,
            s.peak_value_rows,
            p.duration_ns,
            p.energy_fj
        );
        let path = io::write(&ctx.out, &format!("{}.json", stem(f)), &(p.to_json() + "\n"))?;
        ctx.announce(&path);
        programs.push(p);
    }
    if programs.len() > 1 {
        let mut both = Vec::new();
        for mode in [ControlMode::Relaxed, ControlMode::Strict] {
            let s = schedule(&programs, ctx.cfg.subarrays, mode, &ctx.cfg.timing)?;
            println!(
                "schedule ({mode:?}, {} sub-arrays): makespan {} ns",
                ctx.cfg.subarrays, s.makespan_ns
            );
            both.push(s);
        }
        let json = serde_json::to_string_pretty(&both)? + "\n";
        ctx.announce(&io::write(&ctx.out, "schedule.json", &json)?);
    }
    Ok(())
}

fn load_program(path: &Path) -> Result<PimProgram> {
    let text = io::read(path)?;
    PimProgram::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

pub fn cmd_run(ctx: &Ctx, program: &Path, inputs: &Path, mode: SimMode, trace: bool) -> Result<()> {
    if trace && mode != SimMode::Nominal {
        bail!(Failure::new(ExitCode::Data, "--trace needs --mode nominal"));
    }
    let p = load_program(program)?;
    let vectors = io::read_vectors(inputs, &p.inputs)?;
    let mut opts = SimOptions {
        model: ctx.cfg.model,
        timing: ctx.cfg.timing,
        variation: None,
        trials: ctx.trials(),
        trace_columns: None,
    };
    if trace {
        opts.trace_columns = Some((0..vectors.len().clamp(1, 4)).collect());
    }
    if mode == SimMode::MonteCarlo {
        opts.variation = Some(ctx.variation()?);
    }
    let out = gcpim::compiler::simulate_program(&p, &vectors, mode, &opts)?;
    let csv = io::vectors_csv(&p.inputs, &p.outputs, &vectors, &out.outputs)?;
    ctx.announce(&io::write(&ctx.out, "outputs.csv", &csv)?);
    if let Some(ledger) = &out.ledger {
        ctx.announce(&io::write(&ctx.out, "ledger.csv", &ledger.to_csv())?);
        println!(
            "{} vectors, {} ops, {} ns, {:.1} fJ",
            vectors.len(),
            ledger.len(),
            ledger.end_ns(),
            ledger.total_energy_fj()
        );
    }
    if trace {
        ctx.announce(&io::write(&ctx.out, "trace.csv", &trace_to_csv(&out.trace))?);
    }
    if let Some(report) = &out.report {
        write_report(ctx, report)?;
    }
    Ok(())
}

fn write_report(ctx: &Ctx, report: &SuccessReport) -> Result<()> {
    println!("combination  trials  success");
    for (k, c) in &report.combos {
        println!("{k:>11}  {:>6}  {:>6.2}%", c.trials, 100.0 * c.success_rate);
    }
    ctx.announce(&io::write(&ctx.out, "report.json", &(report.to_json() + "\n"))?);
    ctx.announce(&io::write(&ctx.out, "report.csv", &report.to_csv())?);
    Ok(())
}

fn all_vectors(n: usize) -> Result<Vec<Vec<bool>>> {
    if n > 6 {
        bail!(Failure::new(
            ExitCode::Data,
            format!("{n} inputs give more than 64 combinations; pass --inputs")
        ));
    }
    Ok((0..1usize << n)
        .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect())
        .collect())
}

pub fn cmd_mc(ctx: &Ctx, target: &str, inputs: Option<&Path>, age: Option<u64>, floor: Option<f64>) -> Result<()> {
    let var = ctx.variation()?;
    let m = &ctx.cfg.model;
    let t = &ctx.cfg.timing;
    let report = match target.parse::<Gate>() {
        Ok(gate) => {
            let age = age.unwrap_or(m.drt_logic_ns);
            run_gate_campaign(gate, ctx.trials(), age, &var, m, t)?
        }
        Err(_) => {
            let p = load_program(Path::new(target))?;
            let vectors = match inputs {
                Some(path) => io::read_vectors(path, &p.inputs)?,
                None => all_vectors(p.inputs.len())?,
            };
            let opts = SimOptions {
                model: *m,
                timing: *t,
                variation: Some(var),
                trials: ctx.trials(),
                trace_columns: None,
            };
            gcpim::compiler::simulate_program(&p, &vectors, SimMode::MonteCarlo, &opts)?
                .report
                .ok_or_else(|| anyhow!("no report"))?
        }
    };
    write_report(ctx, &report)?;
    let floor = floor.unwrap_or(ctx.cfg.floor);
    if !report.meets_floor(floor) {
        let (k, c) = report.worst().expect("non-empty report");
        bail!(Failure::new(
            ExitCode::Floor,
            format!("combination {k} at {:.2}% is below the {:.2}% floor", 100.0 * c.success_rate, 100.0 * floor)
        ));
    }
    Ok(())
}

pub fn cmd_calibrate(ctx: &Ctx, target: Option<f64>) -> Result<()> {
    let model = ctx.cfg.model.calibrated()?;
    let t = &ctx.cfg.timing;
    println!("tau_ns = {} (read retention {} ns)", model.tau_ns, model.drt_read_ns);

    // a '1' must still read at the retention time and not one ns later
    let read_at = |age: u64| -> Result<bool> {
        let mut a = SubArrayF64::with_dims(1, 1, model, *t)?;
        a.write_row(0, &[true], 0)?;
        Ok(a.read_row(0, t.t_write_ns + age)?[0])
    };
    let (at, after) = (read_at(model.drt_read_ns)?, read_at(model.drt_read_ns + 1)?);
    println!("read at {} ns: {}, at {} ns: {}", model.drt_read_ns, at as u8, model.drt_read_ns + 1, after as u8);
    if !at || after {
        bail!(Failure::new(ExitCode::Calibration, "retention step is not at the read retention time"));
    }

    let target = target.unwrap_or(ctx.cfg.calibration.target);
    let mut opts = ctx.cfg.calibration_options();
    if let Some(s) = ctx.seed_flag {
        opts.seed = s;
    }
    let cal = match calibrate_variation(target, &model, t, &opts) {
        Ok(c) => c,
        Err(gcpim::Error::Calibration { msg, trace }) => {
            for line in &trace {
                eprintln!("  {line}");
            }
            return Err(gcpim::Error::Calibration { msg, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    for line in &cal.trace {
        println!("  {line}");
    }
    println!(
        "scale = {}, sigma_tau = {}, sigma_sa = {}, sigma_drive = {}, worst case = {:.4}",
        cal.scale, cal.variation.sigma_tau, cal.variation.sigma_sa, cal.variation.sigma_drive, cal.worst_case
    );
    let mut out = ctx.cfg.clone();
    out.model = model;
    out.variation = Some(cal.variation);
    out.seed = opts.seed;
    ctx.announce(&io::write(&ctx.out, "calibrated.json", &out.to_json())?);
    Ok(())
}

#[derive(Debug, Serialize)]
struct LedgerSummary {
    ledger: String,
    ops: usize,
    energy_fj: f64,
    start_ns: u64,
    end_ns: u64,
    makespan_ns: u64,
    refreshes: usize,
    refresh_ns: u64,
    period_ns: u64,
    availability: f64,
}

fn summarize(name: String, l: &EventLedgerF64, period: Option<u64>) -> LedgerSummary {
    let refresh_ns = l.busy_ns_of(OpKind::Refresh);
    let makespan_ns = l.end_ns() - l.start_ns();
    let period_ns = period.unwrap_or(makespan_ns);
    LedgerSummary {
        ledger: name,
        ops: l.len(),
        energy_fj: l.total_energy_fj(),
        start_ns: l.start_ns(),
        end_ns: l.end_ns(),
        makespan_ns,
        refreshes: l.count_of(OpKind::Refresh),
        refresh_ns,
        period_ns,
        availability: if refresh_ns == 0 { 1.0 } else { availability(refresh_ns, period_ns) },
    }
}

pub fn cmd_report(ctx: &Ctx, ledgers: &[PathBuf], period: Option<u64>) -> Result<()> {
    if period == Some(0) {
        bail!(Failure::new(ExitCode::Data, "--period must be positive"));
    }
    let mut rows = Vec::new();
    for path in ledgers {
        let text = io::read(path)?;
        let l = EventLedgerF64::from_csv(&text)
            .map_err(|e| Failure::new(ExitCode::Io, format!("corrupt ledger {}: {e}", path.display())))?;
        rows.push(summarize(path.display().to_string(), &l, period));
    }
    for r in &rows {
        println!(
            "{}: {} ops, {:.1} fJ, makespan {} ns, {} refreshes ({} ns), availability {:.2}% over {} ns",
            r.ledger,
            r.ops,
            r.energy_fj,
            r.makespan_ns,
            r.refreshes,
            r.refresh_ns,
            100.0 * r.availability,
            r.period_ns
        );
    }
    let total_energy: f64 = rows.iter().map(|r| r.energy_fj).sum();
    let makespan = rows.iter().map(|r| r.end_ns).max().unwrap_or(0) - rows.iter().map(|r| r.start_ns).min().unwrap_or(0);
    let mean_avail = rows.iter().map(|r| r.availability).sum::<f64>() / rows.len() as f64;
    println!("total: {total_energy:.1} fJ, makespan {makespan} ns, mean availability {:.2}%", 100.0 * mean_avail);

    let json = serde_json::to_string_pretty(&serde_json::json!({
        "ledgers": rows,
        "total_energy_fj": total_energy,
        "makespan_ns": makespan,
        "mean_availability": mean_avail,
    }))? + "\n";
    ctx.announce(&io::write(&ctx.out, "summary.json", &json)?);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    ctx.announce(&io::write(&ctx.out, "summary.csv", &String::from_utf8(w.into_inner()?)?)?);
    Ok(())
}
