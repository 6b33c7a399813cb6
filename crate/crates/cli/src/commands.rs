use std::io::Write;
use std::path::Path;

use dmtlab::code_criterion::{
    check_decay, criterion_report, make_delay_diversity_codebook, pep_upper_bound, union_bound,
    Codebook,
};
use dmtlab::montecarlo::{fit_exponent, ExponentFit};
use dmtlab::tradeoff::jensen_curve;
use dmtlab::{
    AntennaConfig, CovarianceSpec, OutageEstimate, OutageExperiment, OutageMode, SnrPoint,
};

use crate::cli::{Cli, CodebookSource, Command, CriterionArgs, CurveArgs, ExponentArgs, PepArgs};
use crate::codebook_io::{format_codebook, read_codebook};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

type CsvOut<'a> = csv::Writer<&'a mut dyn Write>;

fn csv_writer(out: &mut dyn Write) -> CsvOut<'_> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let cfg = cli.common.resolve()?;
    let mut csv = csv_writer(out);
    let result = match &cli.command {
        Command::Curve(args) => curve(&cfg, args, &mut csv),
        Command::Outage(args) => outage(&cfg, &args.modes, &mut csv),
        Command::Jensen(args) => outage(&cfg, &[args.mode.into()], &mut csv),
        Command::Exponent(args) => exponent(&cfg, args, &mut csv),
        Command::Criterion(args) => criterion(&cfg, args, &mut csv),
        Command::Pep(args) => pep(&cfg, args, &mut csv),
    };
    // Rows written before an insufficient-data error are still useful.
    csv.flush().map_err(|e| CliError::io("writing output", e))?;
    result
}

fn curve(cfg: &ExperimentConfig, args: &CurveArgs, csv: &mut CsvOut<'_>) -> CliResult<()> {
    let rank = args.rank.unwrap_or(cfg.cov.rank());
    let c = jensen_curve(rank, cfg.ant)?;
    let mut rs: Vec<f64> = c.vertices().iter().map(|&(r, _)| r as f64).collect();
    if let Some(step) = args.step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::Validation(format!(
                "--step must be positive, got {step}"
            )));
        }
        let m_min = c.m_min() as f64;
        let count = (m_min / step).floor() as usize;
        rs.extend((1..=count).map(|k| k as f64 * step).filter(|&r| r <= m_min));
        rs.sort_by(f64::total_cmp);
        rs.dedup();
    }
    csv.write_record(["r", "d"])?;
    for r in rs {
        csv.write_record([r.to_string(), c.evaluate(r)?.to_string()])?;
    }
    eprintln!(
        "rho = {rank}, {}x{}: d(0) = {}, vertices {:?}",
        cfg.ant.m_t(),
        cfg.ant.m_r(),
        c.vertices()[0].1,
        c.vertices()
    );
    Ok(())
}

fn experiment<'a>(cfg: &'a ExperimentConfig, modes: &[OutageMode]) -> OutageExperiment<'a> {
    OutageExperiment {
        cov: &cfg.cov,
        ant: cfg.ant,
        modes: modes.to_vec(),
        rates: cfg.rates.clone(),
        snrs: cfg.snrs.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        execution: cfg.execution(),
    }
}

pub const OUTAGE_HEADER: [&str; 8] = [
    "snr_db", "r", "mode", "trials", "outages", "p_hat", "ci_lo", "ci_hi",
];

fn outage(cfg: &ExperimentConfig, modes: &[OutageMode], csv: &mut CsvOut<'_>) -> CliResult<()> {
    let rows = experiment(cfg, modes).run()?;
    csv.write_record(OUTAGE_HEADER)?;
    for e in &rows {
        csv.write_record([
            e.snr.db().to_string(),
            e.rate.to_string(),
            e.mode.to_string(),
            e.trials.to_string(),
            e.outages.to_string(),
            e.p_hat.to_string(),
            e.ci95.0.to_string(),
            e.ci95.1.to_string(),
        ])?;
    }
    eprintln!(
        "{} trials x {} grid points, seed {}, N = {}, rho = {}, {}x{}",
        cfg.trials,
        rows.len(),
        cfg.seed,
        cfg.cov.slots(),
        cfg.cov.rank(),
        cfg.ant.m_t(),
        cfg.ant.m_r()
    );
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
struct CountRow {
    snr_db: f64,
    trials: u64,
    outages: u64,
    r: Option<f64>,
}

/// Groups an input table of counts by rate, in order of first appearance.
fn read_counts(path: &Path, default_rate: f64) -> CliResult<Vec<(f64, Vec<OutageEstimate>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut groups: Vec<(f64, Vec<OutageEstimate>)> = Vec::new();
    for (k, row) in reader.deserialize::<CountRow>().enumerate() {
        let row = row.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if row.outages > row.trials {
            return Err(CliError::Validation(format!(
                "{}: data row {}: outages {} exceed trials {}",
                path.display(),
                k + 1,
                row.outages,
                row.trials
            )));
        }
        let r = row.r.unwrap_or(default_rate);
        let snr = SnrPoint::from_db(row.snr_db)?;
        let est = OutageEstimate::new(snr, r, OutageMode::Outage, row.trials, row.outages);
        match groups.iter_mut().find(|(g, _)| *g == r) {
            Some((_, v)) => v.push(est),
            None => groups.push((r, vec![est])),
        }
    }
    if groups.is_empty() {
        return Err(CliError::InsufficientData(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(groups)
}

pub const EXPONENT_HEADER: [&str; 9] = [
    "r",
    "mode",
    "d_hat",
    "stderr",
    "intercept",
    "used_points",
    "excluded_snr_db",
    "theory",
    "gap",
];

fn exponent(cfg: &ExperimentConfig, args: &ExponentArgs, csv: &mut CsvOut<'_>) -> CliResult<()> {
    let (label, groups) = match &args.input {
        Some(path) => ("input".to_string(), read_counts(path, cfg.rates[0])?),
        None => {
            let rows = experiment(cfg, &[args.mode]).run()?;
            let groups = cfg
                .rates
                .iter()
                .map(|&r| (r, rows.iter().filter(|e| e.rate == r).cloned().collect()))
                .collect();
            (args.mode.to_string(), groups)
        }
    };
    let curve = jensen_curve(cfg.cov.rank(), cfg.ant)?;
    csv.write_record(EXPONENT_HEADER)?;
    let mut insufficient = Vec::new();
    for (r, estimates) in &groups {
        let fit: ExponentFit = match fit_exponent(estimates, cfg.min_events) {
            Ok(f) => f,
            Err(dmtlab::Error::InsufficientData(msg)) => {
                eprintln!("r = {r}: {msg}");
                insufficient.push(*r);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let theory = curve.evaluate(*r).ok();
        let excluded: Vec<String> = fit.excluded.iter().map(|p| p.snr_db.to_string()).collect();
        csv.write_record([
            r.to_string(),
            label.clone(),
            fit.d_hat.to_string(),
            fit.stderr.to_string(),
            fit.intercept.to_string(),
            fit.used_points.to_string(),
            excluded.join(";"),
            opt(theory),
            opt(theory.map(|t| fit.d_hat - t)),
        ])?;
        let excluded_note = if fit.excluded.is_empty() {
            String::new()
        } else {
            let parts: Vec<String> = fit
                .excluded
                .iter()
                .map(|p| format!("{} dB ({} events)", p.snr_db, p.outages))
                .collect();
            format!("; excluded {}", parts.join(", "))
        };
        eprintln!(
            "r = {r}: d_hat = {:.4} (stderr {:.4}) over {} points, theory {}{}",
            fit.d_hat,
            fit.stderr,
            fit.used_points,
            theory.map_or("n/a".to_string(), |t| format!(
                "{t:.4}, gap {:+.4}",
                fit.d_hat - t
            )),
            excluded_note
        );
    }
    if insufficient.is_empty() {
        Ok(())
    } else {
        Err(CliError::InsufficientData(format!(
            "fewer than two SNR points with at least {} outage events for r = {:?}",
            cfg.min_events, insufficient
        )))
    }
}

/// Codebooks paired with SNR points, plus the covariance and antennas they imply.
struct Family {
    cov: CovarianceSpec,
    ant: AntennaConfig,
    codebooks: Vec<Codebook>,
    names: Vec<String>,
}

fn load_family(cfg: &ExperimentConfig, source: &CodebookSource) -> CliResult<Family> {
    let (words, names, m_t, slots) = if let Some(alphabet) = source.delay_diversity {
        let slots = cfg.cov.slots();
        let cb = make_delay_diversity_codebook(cfg.ant, slots, alphabet, cfg.snrs[0])?;
        let words = vec![cb.codewords().to_vec(); cfg.snrs.len()];
        let names = vec![format!("delay-diversity-{alphabet}"); cfg.snrs.len()];
        (words, names, cfg.ant.m_t(), slots)
    } else {
        if source.codebook.len() > 1 && source.codebook.len() != cfg.snrs.len() {
            return Err(CliError::Validation(format!(
                "{} codebooks need {} SNR values, one per file; got {}",
                source.codebook.len(),
                source.codebook.len(),
                cfg.snrs.len()
            )));
        }
        let files = source
            .codebook
            .iter()
            .map(|p| read_codebook(p))
            .collect::<CliResult<Vec<_>>>()?;
        let (m_t, slots) = (files[0].m_t, files[0].slots);
        if let Some((k, f)) = files
            .iter()
            .enumerate()
            .find(|(_, f)| (f.m_t, f.slots) != (m_t, slots))
        {
            return Err(CliError::Validation(format!(
                "{}: codewords are {}x{}, but {} has {m_t}x{slots}",
                source.codebook[k].display(),
                f.m_t,
                f.slots,
                source.codebook[0].display()
            )));
        }
        let names = source
            .codebook
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        (
            files.into_iter().map(|f| f.codewords).collect(),
            names,
            m_t,
            slots,
        )
    };

    let ant = if cfg.m_t_explicit {
        if cfg.ant.m_t() != m_t {
            return Err(CliError::Validation(format!(
                "codebook has m_t = {m_t} but the configuration sets m_t = {}",
                cfg.ant.m_t()
            )));
        }
        cfg.ant
    } else {
        AntennaConfig::new(m_t, cfg.ant.m_r())?
    };
    let cov = cfg.covariance_for(slots)?;
    if cov.slots() != slots {
        return Err(CliError::Validation(format!(
            "codebook block length N = {slots} does not match the {}-slot channel",
            cov.slots()
        )));
    }
    let required = cov.rank() * ant.m_t();
    if slots < required {
        return Err(CliError::Validation(format!(
            "block length N = {slots} is too short: the rank criterion needs N >= rho*m_t = {} * {} = {required}",
            cov.rank(),
            ant.m_t()
        )));
    }

    let snrs: Vec<SnrPoint> = if words.len() == 1 {
        vec![cfg.snrs[0]]
    } else {
        cfg.snrs.clone()
    };
    let rate = cfg.rates[0];
    let codebooks = words
        .into_iter()
        .zip(snrs)
        .map(|(w, s)| Codebook::new(s, w, rate))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &source.save_codebook {
        std::fs::write(path, format_codebook(codebooks[0].codewords()))
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    }
    Ok(Family {
        cov,
        ant,
        codebooks,
        names,
    })
}

pub const CRITERION_HEADER: [&str; 9] = [
    "codebook",
    "snr_db",
    "i",
    "j",
    "rank",
    "required",
    "pass",
    "min_eigenvalue",
    "margin",
];

fn criterion(cfg: &ExperimentConfig, args: &CriterionArgs, csv: &mut CsvOut<'_>) -> CliResult<()> {
    let fam = load_family(cfg, &args.source)?;
    csv.write_record(CRITERION_HEADER)?;
    let mut all_pass = true;
    for (cb, name) in fam.codebooks.iter().zip(&fam.names) {
        let rep = criterion_report(&fam.cov, cb)?;
        for p in &rep.pairs {
            csv.write_record([
                name.clone(),
                cb.snr().db().to_string(),
                p.i.to_string(),
                p.j.to_string(),
                p.rank.rank.to_string(),
                p.rank.required.to_string(),
                p.rank.pass.to_string(),
                opt(p.rank.min_nonzero),
                opt(p.rank.margin),
            ])?;
        }
        let failing = rep.pairs.iter().filter(|p| !p.rank.pass).count();
        eprintln!(
            "{name} @ {} dB: {} codewords, N = {} (needs >= {}), lambda = {}, {} of {} pairs below rank {}: {}",
            cb.snr().db(),
            cb.len(),
            rep.block_length,
            rep.required_rank,
            rep.lambda_min_nz.map_or("n/a (all differences zero)".into(), |l| l.to_string()),
            failing,
            rep.pairs.len(),
            rep.required_rank,
            if rep.pass { "PASS" } else { "FAIL" }
        );
        all_pass &= rep.pass;
    }
    if fam.codebooks.len() >= 2 {
        let r = cfg.rates[0];
        match check_decay(&fam.cov, &fam.codebooks, fam.ant, r, args.epsilon) {
            Ok(v) => eprintln!(
                "lambda(SNR) ~ SNR^-b: b = {:.4} (stderr {:.4}); m_min*b <= r - eps ({} <= {}): {}; non-vanishing: {}",
                v.exponent,
                v.stderr,
                v.m_min as f64 * v.exponent,
                r - args.epsilon,
                if v.pass { "PASS" } else { "FAIL" },
                v.non_vanishing
            ),
            Err(dmtlab::Error::DegenerateCodebook(msg)) => eprintln!("decay check skipped: {msg}"),
            Err(e) => return Err(e.into()),
        }
    }
    eprintln!("overall: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(())
}

pub const PEP_HEADER: [&str; 4] = ["snr_db", "i", "j", "pep_bound"];

fn pep(cfg: &ExperimentConfig, args: &PepArgs, csv: &mut CsvOut<'_>) -> CliResult<()> {
    let fam = load_family(cfg, &args.source)?;
    let cb = &fam.codebooks[0];
    let pairs = cb.pairs();
    csv.write_record(PEP_HEADER)?;
    let r = cfg.rates[0];
    for &snr in &cfg.snrs {
        for &(i, j) in &pairs {
            let p = pep_upper_bound(&fam.cov, &cb.difference(i, j), fam.ant, snr)?;
            csv.write_record([
                snr.db().to_string(),
                i.to_string(),
                j.to_string(),
                p.to_string(),
            ])?;
        }
        match union_bound(&fam.cov, cb, fam.ant, snr, r) {
            Ok(u) => eprintln!(
                "{} dB: union bound at r = {r}: asymptotic {:e}, pairwise sum {:e} (lambda = {})",
                snr.db(),
                u.asymptotic,
                u.pairwise,
                u.lambda
            ),
            Err(
                e @ (dmtlab::Error::DegenerateCodebook(_) | dmtlab::Error::InvalidParameter(_)),
            ) => {
                eprintln!("{} dB: union bound skipped: {e}", snr.db())
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
