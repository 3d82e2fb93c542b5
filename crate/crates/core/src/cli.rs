//! File-in/file-out commands behind the `essvi` binary.
//!
//! Every command writes into an output directory and is deterministic given
//! its inputs. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | malformed input or I/O failure |
//! | 2 | no maturity survived filtering |
//! | 3 | robust calibration infeasible |
//! | 4 | infeasible initial point for the global calibration |
//! | 5 | arbitrage found by `check-arb` |

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::arbitrage::{butterfly_check, classify_pair, ButterflyCheck, PairClassification};
use crate::blackscholes::black_price;
use crate::error::{Error, Result};
use crate::global::{calibrate_global, GlobalConfig, GlobalInit, GlobalReport, WeightScheme};
use crate::lsq::LsqConfig;
use crate::metrics::{fit_report, spread_correlations, FitReport, SpreadCorrelations};
use crate::pipeline::{filter_chain, load_chain, write_chain, write_curve, AnchorSummary};
use crate::robust::{calibrate_robust, RobustConfig, RobustSliceReport};
use crate::surface::EssviSlice;
use crate::synth::{synth_chain, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MALFORMED: i32 = 1;
pub const EXIT_EMPTY_CHAIN: i32 = 2;
pub const EXIT_ROBUST_INFEASIBLE: i32 = 3;
pub const EXIT_INIT_INFEASIBLE: i32 = 4;
pub const EXIT_ARBITRAGE: i32 = 5;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::EmptyChain => EXIT_EMPTY_CHAIN,
        Error::AllRhoInfeasible(_) | Error::AnchorInconsistent(_) => EXIT_ROBUST_INFEASIBLE,
        Error::InitInfeasible(_) => EXIT_INIT_INFEASIBLE,
        _ => EXIT_MALFORMED,
    }
}

/// Pretty JSON with every float written to 17 significant digits.
struct ExactFloats(PrettyFormatter<'static>);

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

/// One slice as stored in `surface.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub maturity: f64,
    pub theta: f64,
    pub rho: f64,
    pub psi: f64,
    #[serde(default)]
    pub phi: Option<f64>,
}

impl From<&EssviSlice> for SurfaceRow {
    fn from(s: &EssviSlice) -> Self {
        SurfaceRow {
            maturity: s.maturity,
            theta: s.theta,
            rho: s.rho,
            psi: s.psi,
            phi: Some(s.phi()),
        }
    }
}

pub fn write_surface(path: &Path, slices: &[EssviSlice]) -> Result<()> {
    let rows: Vec<SurfaceRow> = slices.iter().map(SurfaceRow::from).collect();
    write_json(path, &rows)
}

pub fn read_surface(path: &Path) -> Result<Vec<EssviSlice>> {
    let rows: Vec<SurfaceRow> = serde_json::from_str(&fs::read_to_string(path)?)?;
    rows.iter()
        .map(|r| EssviSlice::new(r.theta, r.rho, r.psi, r.maturity))
        .collect()
}

fn prepare_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Writes `anchors.json`. An empty array is still written when nothing
/// survives, and [`Error::EmptyChain`] is returned.
pub fn cmd_filter(chain: &Path, curve: &Path, out: &Path) -> Result<Vec<AnchorSummary>> {
    let chain = load_chain(chain, curve)?;
    prepare_dir(out)?;
    let path = out.join("anchors.json");
    match filter_chain(&chain) {
        Ok(anchors) => {
            let rows: Vec<AnchorSummary> = anchors.iter().map(|a| a.summary()).collect();
            write_json(&path, &rows)?;
            Ok(rows)
        }
        Err(Error::EmptyChain) => {
            write_json(&path, &Vec::<AnchorSummary>::new())?;
            Err(Error::EmptyChain)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Robust,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Seed the global fit with the robust surface.
    Robust,
    /// Zero correlations, ATM variance increments, mid-box `c`.
    Simple,
}

/// Settings of one calibration run, echoed into `diagnostics.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub method: Method,
    pub weights: WeightScheme,
    pub init: InitKind,
    pub robust: RobustConfig,
    pub budget: usize,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            method: Method::Robust,
            weights: WeightScheme::InverseVegaSquared,
            init: InitKind::Robust,
            robust: RobustConfig::default(),
            budget: LsqConfig::default().max_nfev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostics {
    pub near_maturity: f64,
    pub far_maturity: f64,
    pub classification: PairClassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDiagnostics {
    pub manifest: RunManifest,
    pub robust: Option<Vec<RobustSliceReport>>,
    pub global: Option<GlobalReport>,
    pub butterfly: Vec<ButterflyCheck>,
    pub pairs: Vec<PairDiagnostics>,
}

fn pair_diagnostics(slices: &[EssviSlice]) -> Result<Vec<PairDiagnostics>> {
    slices
        .windows(2)
        .map(|w| {
            Ok(PairDiagnostics {
                near_maturity: w[0].maturity,
                far_maturity: w[1].maturity,
                classification: classify_pair(&w[0], &w[1])?,
            })
        })
        .collect()
}

/// Filters the chain, calibrates and writes `surface.json` and `diagnostics.json`.
pub fn cmd_calibrate(
    chain: &Path,
    curve: &Path,
    manifest: &RunManifest,
    out: &Path,
) -> Result<(Vec<EssviSlice>, CalibrationDiagnostics)> {
    let chain = load_chain(chain, curve)?;
    let anchors = filter_chain(&chain)?;

    let needs_robust = manifest.method == Method::Robust || manifest.init == InitKind::Robust;
    let robust = if needs_robust {
        Some(calibrate_robust(&anchors, &manifest.robust)?)
    } else {
        None
    };
    let (slices, global) = match manifest.method {
        Method::Robust => (robust.as_ref().expect("robust run").slices.clone(), None),
        Method::Global => {
            let init = match manifest.init {
                InitKind::Robust => {
                    GlobalInit::RobustSeed(robust.as_ref().expect("robust run").slices.clone())
                }
                InitKind::Simple => GlobalInit::LessDataDriven,
            };
            let config = GlobalConfig {
                scheme: manifest.weights,
                lsq: LsqConfig {
                    max_nfev: manifest.budget,
                    ..LsqConfig::default()
                },
            };
            let fit = calibrate_global(&anchors, &init, &config)?;
            (fit.slices, Some(fit.report))
        }
    };

    let diagnostics = CalibrationDiagnostics {
        manifest: *manifest,
        robust: robust.map(|r| r.reports),
        global,
        butterfly: slices.iter().map(butterfly_check).collect(),
        pairs: pair_diagnostics(&slices)?,
    };
    prepare_dir(out)?;
    write_surface(&out.join("surface.json"), &slices)?;
    write_json(&out.join("diagnostics.json"), &diagnostics)?;
    Ok((slices, diagnostics))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceVerdict {
    pub maturity: f64,
    pub butterfly: ButterflyCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub arbitrage_free: bool,
    pub slices: Vec<SliceVerdict>,
    pub pairs: Vec<PairDiagnostics>,
}

pub fn check_surface(slices: &[EssviSlice]) -> Result<Verdicts> {
    if slices.is_empty() {
        return Err(Error::EmptySurface);
    }
    let slice_verdicts: Vec<SliceVerdict> = slices
        .iter()
        .map(|s| SliceVerdict {
            maturity: s.maturity,
            butterfly: butterfly_check(s),
        })
        .collect();
    let pairs = pair_diagnostics(slices)?;
    let arbitrage_free = slice_verdicts.iter().all(|v| v.butterfly.passed)
        && pairs
            .iter()
            .all(|p| p.classification.verdict.is_arbitrage_free());
    Ok(Verdicts {
        arbitrage_free,
        slices: slice_verdicts,
        pairs,
    })
}

/// Writes `verdicts.json`; the caller exits with [`EXIT_ARBITRAGE`] when
/// `arbitrage_free` is false.
pub fn cmd_check_arb(surface: &Path, out: &Path) -> Result<Verdicts> {
    let verdicts = check_surface(&read_surface(surface)?)?;
    prepare_dir(out)?;
    write_json(&out.join("verdicts.json"), &verdicts)?;
    Ok(verdicts)
}

/// Writes `chain.csv`, `curve.csv` and the generating `surface.json`.
pub fn cmd_synth(config: &SynthConfig, out: &Path) -> Result<()> {
    let synth = synth_chain(config)?;
    prepare_dir(out)?;
    write_chain(&synth.chain, fs::File::create(out.join("chain.csv"))?)?;
    write_curve(&synth.chain.curve, fs::File::create(out.join("curve.csv"))?)?;
    write_surface(&out.join("surface.json"), &synth.surface)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    #[serde(flatten)]
    pub fit: FitReport,
    pub correlations: SpreadCorrelations,
}

#[derive(Debug, Serialize)]
struct PlotRow {
    maturity: f64,
    strike: f64,
    k: f64,
    #[serde(rename = "type")]
    kind: &'static str,
    bid: f64,
    ask: f64,
    mid: f64,
    model: f64,
    market_vol: f64,
    model_vol: f64,
}

/// Writes `report.json` and the per-quote `fit_plot.csv`.
pub fn cmd_report(surface: &Path, chain: &Path, curve: &Path, out: &Path) -> Result<ReportOutput> {
    let slices = read_surface(surface)?;
    let anchors = filter_chain(&load_chain(chain, curve)?)?;
    let mut matched = Vec::with_capacity(anchors.len());
    for a in &anchors {
        let s = slices
            .iter()
            .find(|s| s.maturity == a.maturity)
            .ok_or_else(|| {
                Error::InvalidInput(format!("surface has no slice at t = {}", a.maturity))
            })?;
        matched.push(*s);
    }
    let report = ReportOutput {
        fit: fit_report(&matched, &anchors)?,
        correlations: spread_correlations(&anchors),
    };

    prepare_dir(out)?;
    write_json(&out.join("report.json"), &report)?;
    let mut wtr = csv::Writer::from_writer(fs::File::create(out.join("fit_plot.csv"))?);
    for (s, a) in matched.iter().zip(&anchors) {
        let df = a.discount();
        for q in &a.quotes {
            let w = s.total_variance(q.k);
            wtr.serialize(PlotRow {
                maturity: a.maturity,
                strike: q.strike,
                k: q.k,
                kind: if q.is_call { "C" } else { "P" },
                bid: q.bid,
                ask: q.ask,
                mid: q.mid,
                model: black_price(a.forward, q.strike, df, w, q.is_call),
                market_vol: (q.total_variance / a.maturity).sqrt(),
                model_vol: (w / a.maturity).sqrt(),
            })?;
        }
    }
    wtr.flush()?;
    Ok(report)
}

/// Loads a synth configuration file, falling back to defaults.
pub fn load_synth_config(path: Option<&PathBuf>) -> Result<SynthConfig> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(SynthConfig::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&vec![0.1_f64, 1.0]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("1.0000000000000000e0"));
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1.0]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::EmptyChain), 2);
        assert_eq!(exit_code(&Error::AllRhoInfeasible(1)), 3);
        assert_eq!(exit_code(&Error::InitInfeasible("x".into())), 4);
        assert_eq!(exit_code(&Error::Malformed("x".into())), 1);
    }

    #[test]
    fn flat_slice_passes() {
        let v = check_surface(&[EssviSlice::new(0.04, 0.0, 0.0, 1.0).unwrap()]).unwrap();
        assert!(v.arbitrage_free);
    }
}
