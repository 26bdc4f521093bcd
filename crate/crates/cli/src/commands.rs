//! Subcommand implementations. Each writes only under `--out-dir`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use abelconv::attack::{self, SweepConfig};
use abelconv::convop::ConvLayer;
use abelconv::error::{Error, Result};
use abelconv::network::Network;
use abelconv::rng::{self, tag};
use abelconv::signal::Signal;
use abelconv::spectral;
use abelconv::verify::{self, ExperimentConfig, Format, RunSummary};
use serde_json::json;

use crate::config::RunConfig;
use crate::{Failure, GIT_DESCRIBE};

fn write_output<F>(cfg: &RunConfig, name: &str, body: F) -> Result<Option<PathBuf>>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let Some(dir) = &cfg.out_dir else {
        return Ok(None);
    };
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(Some(path))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn wrote(path: Option<PathBuf>, json: bool) {
    if let (Some(p), false) = (path, json) {
        println!("wrote {}", p.display());
    }
}

fn network(e: &ExperimentConfig, seed: u64) -> Result<Network> {
    let n: Vec<usize> = e.n.iter().map(|&n| n.min(e.group.order())).collect();
    Network::random(&e.group, &e.widths, &n, e.policy, e.activation, seed)
}

pub fn spectra(cfg: &RunConfig, identity: bool, dense: bool, json: bool) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let (d, q) = (e.widths[0], e.widths[1]);
    let layer = if identity {
        if d != q {
            return Err(Error::InvalidConfig {
                field: "widths".into(),
                reason: format!("the identity layer needs d = q, got {d},{q}"),
            }
            .into());
        }
        ConvLayer::identity(&e.group, d)?
    } else {
        ConvLayer::random(&e.group, d, q, e.n[0], e.policy, rng::derive_seed(e.master_seed, &[tag::LAYER]))?
    };
    let (report, deviation) = if dense {
        let (report, dense_values) = spectral::with_dense_timing(&layer)?;
        let dev = spectral::max_deviation(&report.sorted_values(), &dense_values);
        (report, dev)
    } else {
        (spectral::block_singular_values(&layer)?, None)
    };
    let band = spectral::band_check(&report, e.band_a, e.band_b)?;
    let path = write_output(cfg, "spectrum.csv", |w| report.write_csv(w))?;
    if json {
        print_json(&json!({
            "group": e.group.moduli(),
            "d_in": layer.d_in(),
            "d_out": layer.d_out(),
            "n": layer.n(),
            "count": report.count(),
            "s_min": report.s_min,
            "s_max": report.s_max,
            "zero_count": report.zero_count,
            "band": {"a": e.band_a, "b": e.band_b, "pass": band.pass,
                     "lower_margin": band.lower_margin, "upper_margin": band.upper_margin},
            "block_seconds": report.block_seconds,
            "dense_seconds": report.dense_seconds,
            "dense_max_deviation": deviation,
        }))?;
    } else {
        println!(
            "group {:?}, layer {} -> {} channels, n = {}",
            e.group.moduli(),
            layer.d_in(),
            layer.d_out(),
            layer.n()
        );
        println!("singular values: {} ({} zero)", report.count(), report.zero_count);
        println!("s_min = {:.6}", report.s_min);
        println!("s_max = {:.6}", report.s_max);
        println!(
            "band [{}, {}]: {} (margins {:.4}, {:.4})",
            e.band_a,
            e.band_b,
            if band.pass { "pass" } else { "fail" },
            band.lower_margin,
            band.upper_margin
        );
        println!("block path: {:.4} s", report.block_seconds);
        if let Some(ds) = report.dense_seconds {
            println!("dense path: {ds:.4} s, max deviation {:.2e}", deviation.unwrap_or(f64::NAN));
        }
    }
    wrote(path, json);
    Ok(())
}

pub fn attack(cfg: &RunConfig, json: bool) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let (net_seed, input_seed) = attack::network_and_input_seeds(e.master_seed);
    let net = network(e, net_seed)?;
    let f = Signal::random(&e.group, e.widths[0], e.input, input_seed)?;
    let report = attack::single_step_attack(&net, &f, e.step)?;
    let doc = json!({
        "group": e.group.moduli(),
        "widths": e.widths,
        "n": e.n,
        "activation": e.activation,
        "seed": e.master_seed,
        "N_0": f.len(),
        "report": report,
    });
    let path = write_output(cfg, "attack.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &doc)?;
        writeln!(w)?;
        Ok(())
    })?;
    if json {
        print_json(&doc)?;
    } else {
        println!("H_b(f)     = {:+.6}", report.hb_before);
        println!("H_b(f1)    = {:+.6}", report.hb_after);
        println!("flipped    = {}", report.flipped);
        println!("a          = {}", report.a);
        println!("eta        = {:.6e}", report.eta);
        println!("||grad||   = {:.6}", report.grad_norm);
        println!("step       = {:.6}", report.step_len);
        match report.rho {
            Some(rho) => println!("rho        = {rho:.6}"),
            None => println!("rho        = undefined (f = 0)"),
        }
        if report.on_boundary {
            println!("input lies on the decision boundary");
        }
        if report.input_out_of_range {
            println!("warning: ||f||_inf > 1");
        }
    }
    wrote(path, json);
    Ok(())
}

pub fn verify(cfg: &RunConfig, json: bool) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let start = Instant::now();
    let stats = verify::run(e)?;
    let summary = RunSummary::new(&stats, Some(GIT_DESCRIBE.to_owned()), start.elapsed().as_secs_f64());
    let name = e.experiment.name();
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let table = write_output(cfg, &format!("{name}.{ext}"), |w| verify::emit(&stats, cfg.format, w))?;
    let summary_path = write_output(cfg, &format!("{name}.summary.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)?;
        Ok(())
    })?;
    if json {
        print_json(&json!({"summary": summary, "observations": stats.observations}))?;
    } else {
        println!(
            "{name}: {} trials, seed {}, config {}",
            e.trials,
            e.master_seed,
            &summary.config_hash[..12]
        );
        for c in &stats.checks {
            let status = match (c.pass(), c.asserted) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "low (recorded)",
            };
            println!(
                "  {:<20} {:>4}/{:<4} rate {:.3} (need {:.3}) {status}",
                c.name, c.passes, c.total, c.rate, c.threshold
            );
        }
        for (k, v) in &stats.observations {
            println!("  {k:<28} {v:.6e}");
        }
    }
    wrote(table, json);
    wrote(summary_path, json);
    if summary.pass {
        Ok(())
    } else {
        Err(Failure::Bounds)
    }
}

pub fn sweep(cfg: &RunConfig, json: bool) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let groups = if e.sweep_groups.is_empty() {
        vec![e.group.clone()]
    } else {
        e.sweep_groups.clone()
    };
    let table = attack::distance_scaling_sweep(&SweepConfig {
        groups,
        widths: e.widths.clone(),
        n: e.n.clone(),
        policy: e.policy,
        activation: e.activation,
        step: e.step,
        input: e.input,
        trials: e.trials,
        master_seed: e.master_seed,
    })?;
    let csv_path = write_output(cfg, "sweep.csv", |w| table.write_csv(w))?;
    let summary_path = write_output(cfg, "sweep_summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &table.summaries)?;
        writeln!(w)?;
        Ok(())
    })?;
    if json {
        print_json(&json!({"summaries": table.summaries, "rho_spread": table.rho_spread()}))?;
    } else {
        println!("{:>8} {:>8} {:>7} {:>10} {:>10} {:>10}", "N_0", "|G|", "flip", "med rho", "med step", "med |g|");
        for s in &table.summaries {
            let f = |v: Option<f64>| v.map_or("-".to_owned(), |x| format!("{x:.4}"));
            println!(
                "{:>8} {:>8} {:>7.3} {:>10} {:>10} {:>10}",
                s.n0,
                s.group.order(),
                s.flip_rate,
                f(s.median_rho),
                f(s.median_step_len),
                f(s.median_grad_norm)
            );
        }
        if let Some(s) = table.rho_spread() {
            println!("median rho spread (max/min): {s:.4}");
        }
    }
    wrote(csv_path, json);
    wrote(summary_path, json);
    Ok(())
}

pub fn net_dump(cfg: &RunConfig, json: bool) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let (net_seed, _) = attack::network_and_input_seeds(e.master_seed);
    let net = network(e, net_seed)?;
    let path = write_output(cfg, "network.json", |w| {
        serde_json::to_writer(&mut *w, &net)?;
        writeln!(w)?;
        Ok(())
    })?;
    if json || path.is_none() {
        let mut out = std::io::stdout().lock();
        serde_json::to_writer(&mut out, &net).map_err(Error::from)?;
        writeln!(out).map_err(Error::from)?;
    }
    wrote(path, json);
    Ok(())
}
