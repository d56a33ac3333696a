//! The `closures` and `allan` subcommands, written against `io::Write` so
//! they can be tested without a process.

use std::io::Write;
use std::path::Path;

use clockclosure_core::interrogation::FrequencySeries;
use clockclosure_core::spectra::{enumerate_closures, load_level_table, vacuum_wavelength};
use clockclosure_core::stats::allan_point;

use crate::data;
use crate::error::{exit, CliError};

fn io_err(e: std::io::Error) -> CliError {
    CliError::Output { path: "<stdout>".into(), source: e }
}

/// Lists every closure cycle of a level table with its signed legs.
pub fn closures<W: Write>(levels: &Path, max_cycle: usize, out: &mut W) -> Result<usize, CliError> {
    let path = data::resolve(levels, None, "levels")
        .ok_or_else(|| CliError::data(format!("level table {}", levels.display()), "file not found"))?;
    let table = load_level_table(&path)?;
    let cycles = enumerate_closures(&table, max_cycle);
    if cycles.is_empty() {
        writeln!(out, "no closures found").map_err(io_err)?;
        return Ok(0);
    }
    writeln!(out, "{}: {} closure cycle(s) of length ≤ {max_cycle}", table.system(), cycles.len()).map_err(io_err)?;
    for (i, cycle) in cycles.iter().enumerate() {
        writeln!(out, "[{}] {}", i + 1, cycle).map_err(io_err)?;
        let mut residual = 0.0;
        for leg in cycle.legs() {
            let f = table.key_frequency(&leg.transition)?;
            residual += leg.sign.value() * f;
            let sign = if leg.sign.as_i8() > 0 { '+' } else { '−' };
            writeln!(
                out,
                "    {sign} {:<16} {:>12.4} nm  {:>22.1} Hz",
                leg.transition.to_string(),
                vacuum_wavelength(f)?,
                f
            )
            .map_err(io_err)?;
        }
        writeln!(out, "    residual of table frequencies: {residual:.3e} Hz").map_err(io_err)?;
    }
    Ok(cycles.len())
}

/// Parses a comma-separated list of averaging times.
pub fn parse_taus(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| CliError::Invalid(format!("`{s}` is not a positive averaging time")))
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|t| if t.is_empty() { Err(CliError::Invalid("no averaging times given".into())) } else { Ok(t) })
}

/// Writes an Allan table for each series in the file (or only `transition`).
/// Averaging times that cannot be evaluated become `# error` lines and make
/// the returned exit code nonzero.
pub fn allan<W: Write>(series_path: &Path, taus: &[f64], transition: Option<&str>, out: &mut W) -> Result<i32, CliError> {
    let file = std::fs::File::open(series_path)
        .map_err(|e| CliError::data(format!("series {}", series_path.display()), e))?;
    let all = FrequencySeries::read_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::data(format!("series {}", series_path.display()), e))?;
    let selected: Vec<&FrequencySeries> = all
        .iter()
        .filter(|s| transition.is_none_or(|t| s.transition.to_string() == t))
        .collect();
    if selected.is_empty() {
        return Err(CliError::data(
            format!("series {}", series_path.display()),
            match transition {
                Some(t) => format!("no samples for transition `{t}`"),
                None => "file holds no samples".to_string(),
            },
        ));
    }
    let mut code = exit::OK;
    writeln!(out, "# units: hz").map_err(io_err)?;
    for s in selected {
        if all.len() > 1 {
            writeln!(out, "# transition: {}", s.transition).map_err(io_err)?;
        }
        writeln!(out, "tau_s,sigma_y,n").map_err(io_err)?;
        for &tau in taus {
            match allan_point(s, tau) {
                Ok(p) => writeln!(out, "{},{},{}", p.tau_s, p.sigma, p.n).map_err(io_err)?,
                Err(e) => {
                    writeln!(out, "# error tau_s={tau}: {e}").map_err(io_err)?;
                    code = exit::DATA;
                }
            }
        }
    }
    Ok(code)
}
