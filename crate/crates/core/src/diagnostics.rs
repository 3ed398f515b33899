//! Accuracy checks for built quantiles.
//!
//! The round-trip error is `RTE(u) = F(w(u)) − u` with `F` from the
//! characteristic function. Dividing by the density gives the estimated
//! quantile error `EQE = RTE / f(w(u))`, which is exactly the size of one
//! Newton step towards the true quantile.

use crate::charfns::CharFnDescriptor;
use crate::error::{Error, Result};
use crate::moments::{gil_pelaez_cdf, QuadratureConfig};
use crate::special::normal_quantile;
use crate::tails::{CompositeQuantile, Region};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// `n` evenly spaced levels from `lo` to `hi`, all strictly inside `(0, 1)`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("grid needs at least one point".into()));
    }
    if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
        return Err(Error::Domain(format!(
            "grid [{lo}, {hi}] must satisfy 0 < start <= end < 1"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    match grid.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
        Some(u) => Err(Error::Domain(format!("grid level {u} is outside (0, 1)"))),
        None => Ok(()),
    }
}

fn grid_span(grid: &[f64]) -> (f64, f64) {
    grid.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &u| (a.min(u), b.max(u)))
}

/// Round-trip diagnostics over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub grid: Vec<f64>,
    pub w: Vec<f64>,
    pub rte: Vec<f64>,
    pub eqe: Vec<f64>,
    /// Range the maxima are taken over.
    pub sub_range: (f64, f64),
    pub max_abs_rte: f64,
    pub max_abs_eqe: f64,
    pub runtime_secs: f64,
    pub cdf_evals: usize,
}

impl DiagnosticsReport {
    /// CSV with columns `u,w,rte,eqe` preceded by `#` metadata lines.
    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(
            out,
            "# max_abs_rte on [{}, {}]: {:e}",
            self.sub_range.0, self.sub_range.1, self.max_abs_rte
        );
        let _ = writeln!(out, "# max_abs_eqe: {:e}", self.max_abs_eqe);
        let _ = writeln!(out, "# runtime_secs: {:.3}", self.runtime_secs);
        out.push_str("u,w,rte,eqe\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e}",
                self.grid[i], self.w[i], self.rte[i], self.eqe[i]
            );
        }
        out
    }
}

/// Density `f(w(u))`: `1/w′(u)` from the series in the central region, a
/// centred difference of the CDF in the tails.
pub fn density_at(
    q: &CompositeQuantile,
    cf: &CharFnDescriptor,
    u: f64,
    w: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    match q.region(u) {
        Region::Central => Ok(1.0 / q.central.derivative(u)),
        _ => {
            let h = (1e-6 * w.abs()).max(1e-6);
            let hi = gil_pelaez_cdf(cf, w + h, cfg)?;
            let lo = gil_pelaez_cdf(cf, w - h, cfg)?;
            Ok((hi - lo) / (2.0 * h))
        }
    }
}

struct Point {
    w: f64,
    rte: f64,
    eqe: f64,
    evals: usize,
}

fn round_trip_point(
    q: &CompositeQuantile,
    cf: &CharFnDescriptor,
    u: f64,
    cfg: &QuadratureConfig,
) -> Result<Point> {
    let w = q.eval(u)?;
    let rte = gil_pelaez_cdf(cf, w, cfg)? - u;
    let f = density_at(q, cf, u, w, cfg)?;
    let evals = if q.region(u) == Region::Central { 1 } else { 3 };
    Ok(Point {
        w,
        rte,
        eqe: rte / f,
        evals,
    })
}

/// Round trip over `grid`; maxima over the whole grid span.
pub fn round_trip(
    q: &CompositeQuantile,
    cf: &CharFnDescriptor,
    grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<DiagnosticsReport> {
    check_grid(grid)?;
    round_trip_in(q, cf, grid, grid_span(grid), cfg)
}

/// Round trip over `grid`; maxima over the points inside `sub_range`.
/// Grid points are evaluated on all available cores.
pub fn round_trip_in(
    q: &CompositeQuantile,
    cf: &CharFnDescriptor,
    grid: &[f64],
    sub_range: (f64, f64),
    cfg: &QuadratureConfig,
) -> Result<DiagnosticsReport> {
    check_grid(grid)?;
    if !(sub_range.0 > 0.0 && sub_range.1 < 1.0 && sub_range.0 <= sub_range.1) {
        return Err(Error::Domain(format!(
            "sub-range [{}, {}] must lie inside (0, 1)",
            sub_range.0, sub_range.1
        )));
    }
    cfg.validate()?;
    let start = Instant::now();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = grid.len().div_ceil(workers).max(1);
    let points: Vec<Result<Point>> = std::thread::scope(|s| {
        let handles: Vec<_> = grid
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&u| round_trip_point(q, cf, u, cfg))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("diagnostic worker panicked"))
            .collect()
    });
    let mut report = DiagnosticsReport {
        grid: grid.to_vec(),
        w: Vec::with_capacity(grid.len()),
        rte: Vec::with_capacity(grid.len()),
        eqe: Vec::with_capacity(grid.len()),
        sub_range,
        max_abs_rte: 0.0,
        max_abs_eqe: 0.0,
        runtime_secs: 0.0,
        cdf_evals: 0,
    };
    for (&u, p) in grid.iter().zip(points) {
        let p = p?;
        if u >= sub_range.0 && u <= sub_range.1 {
            report.max_abs_rte = report.max_abs_rte.max(p.rte.abs());
            report.max_abs_eqe = report.max_abs_eqe.max(p.eqe.abs());
        }
        report.w.push(p.w);
        report.rte.push(p.rte);
        report.eqe.push(p.eqe);
        report.cdf_evals += p.evals;
    }
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// One Newton step on `F(x) = u` starting from the model quantile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStep {
    pub w: f64,
    pub rte: f64,
    pub w_new: f64,
    pub rte_new: f64,
}

pub fn newton_step(
    q: &CompositeQuantile,
    cf: &CharFnDescriptor,
    u: f64,
    cfg: &QuadratureConfig,
) -> Result<NewtonStep> {
    let p = round_trip_point(q, cf, u, cfg)?;
    let w_new = p.w - p.eqe;
    let rte_new = gil_pelaez_cdf(cf, w_new, cfg)? - u;
    Ok(NewtonStep {
        w: p.w,
        rte: p.rte,
        w_new,
        rte_new,
    })
}

/// Reference quantiles to compare against.
#[derive(Debug, Clone, PartialEq)]
pub enum Oracle {
    /// `σ·Φ⁻¹(u)`.
    Normal { sigma: f64 },
    /// `γ·tan(π(u − ½))`.
    Cauchy { scale: f64 },
    Table(ReferenceTable),
}

impl Oracle {
    pub fn quantile(&self, u: f64) -> Result<f64> {
        match self {
            Oracle::Normal { sigma } => Ok(sigma * normal_quantile(u)),
            Oracle::Cauchy { scale } => Ok(scale * (PI * (u - 0.5)).tan()),
            Oracle::Table(t) => t.lookup(u).ok_or_else(|| {
                Error::Domain(format!("reference table {} has no row for u = {u}", t.source))
            }),
        }
    }
}

/// Tabulated `(u, quantile)` pairs, sorted by `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub rows: Vec<(f64, f64)>,
    pub source: String,
}

impl ReferenceTable {
    /// Parse whitespace- or comma-separated columns. Lines starting with `#`
    /// or `%` are comments, lines whose first field is not a number are
    /// headers, and only the first two columns are read.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
                continue;
            }
            let mut fields = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|f| !f.is_empty());
            let Some(first) = fields.next() else { continue };
            let Ok(u) = first.parse::<f64>() else { continue };
            let bad = |what: &str| Error::Parse(format!("{source}:{}: {what}", i + 1));
            let x: f64 = fields
                .next()
                .ok_or_else(|| bad("expected two columns"))?
                .parse()
                .map_err(|_| bad("quantile column is not a number"))?;
            if !(u > 0.0 && u < 1.0) {
                return Err(bad(&format!("level {u} is outside (0, 1)")));
            }
            if !x.is_finite() {
                return Err(bad("quantile is not finite"));
            }
            rows.push((u, x));
        }
        if rows.is_empty() {
            return Err(Error::Parse(format!("{source}: no data rows")));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(ReferenceTable {
            rows,
            source: source.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Tabulated quantile at `u` (matched to 1e-12).
    pub fn lookup(&self, u: f64) -> Option<f64> {
        let i = self.rows.partition_point(|r| r.0 < u - 1e-12);
        self.rows
            .get(i)
            .filter(|r| (r.0 - u).abs() <= 1e-12)
            .map(|r| r.1)
    }

    /// Tabulated levels inside `[lo, hi]`.
    pub fn levels_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.0)
            .filter(|&u| u >= lo && u <= hi)
            .collect()
    }
}

/// One row of a reference scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub u: f64,
    pub w: f64,
    pub reference: f64,
    /// `|w − ref| / |ref|`, or the absolute error where `ref = 0`.
    pub rel_err: f64,
}

impl ScanRow {
    /// `log10` of the relative error, floored at `1e-300`.
    pub fn log10_rel_err(&self) -> f64 {
        self.rel_err.max(1e-300).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub max_rel_err: f64,
}

impl ScanReport {
    /// Largest relative error over levels in `[lo, hi]`.
    pub fn max_rel_err_in(&self, lo: f64, hi: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.u >= lo && r.u <= hi)
            .fold(0.0, |m, r| m.max(r.rel_err))
    }

    /// CSV with columns `u,w,reference,rel_err,log10_rel_err`.
    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "# max_rel_err: {:e}", self.max_rel_err);
        out.push_str("u,w,reference,rel_err,log10_rel_err\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:.4}",
                r.u,
                r.w,
                r.reference,
                r.rel_err,
                r.log10_rel_err()
            );
        }
        out
    }
}

/// Compare `q` with reference quantiles on `grid`.
pub fn reference_scan(q: &CompositeQuantile, oracle: &Oracle, grid: &[f64]) -> Result<ScanReport> {
    check_grid(grid)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut max_rel_err: f64 = 0.0;
    for &u in grid {
        let w = q.eval(u)?;
        let reference = oracle.quantile(u)?;
        let diff = (w - reference).abs();
        let rel_err = if reference == 0.0 { diff } else { diff / reference.abs() };
        max_rel_err = max_rel_err.max(rel_err);
        rows.push(ScanRow {
            u,
            w,
            reference,
            rel_err,
        });
    }
    Ok(ScanReport { rows, max_rel_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfns::make_stable_symmetric;
    use crate::series::CentralSeries;
    use crate::tails::{stable_tail, Tail, TailConfig};

    fn tan_series(nterms: usize) -> CentralSeries {
        let order = 2 * nterms + 1;
        let mut t = vec![0.0f64; order + 1];
        t[1] = 1.0;
        // tan' = 1 + tan²: coefficients by Cauchy products.
        for n in 1..order {
            let mut s = 0.0;
            for k in 0..=n {
                s += t[k] * t[n - k];
            }
            t[n + 1] = s / (n + 1) as f64;
        }
        // w(u) = tan(π(u−½)) = Σ t_k π^k (u−½)^k.
        let qcoeffs = (1..=order).map(|k| t[k] * PI.powi(k as i32)).collect();
        CentralSeries {
            u0: 0.5,
            wdash: PI,
            qcoeffs,
            qcoeffs_lo: Vec::new(),
            symmetric: true,
            nterms,
            dist: None,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(uniform_grid(0.0, 0.5, 3).is_err());
        assert!(uniform_grid(0.2, 0.1, 3).is_err());
        assert!(uniform_grid(0.1, 0.9, 0).is_err());
        assert_eq!(uniform_grid(0.25, 0.75, 3).unwrap(), vec![0.25, 0.5, 0.75]);
        assert_eq!(uniform_grid(0.3, 0.3, 1).unwrap(), vec![0.3]);
    }

    #[test]
    fn cauchy_round_trip_and_anchor() {
        let cf = make_stable_symmetric(1.0).unwrap();
        let q = CompositeQuantile::central_only(tan_series(35));
        // Truncation error grows like v^73, about 1e-8 at u = 0.9.
        let grid = uniform_grid(0.1, 0.9, 17).unwrap();
        let rep = round_trip_in(&q, &cf, &grid, (0.2, 0.8), &QuadratureConfig::default()).unwrap();
        assert!(rep.max_abs_rte < 1e-10, "{}", rep.max_abs_rte);
        assert!(rep.rte[16].abs() < 1e-7);
        assert!(rep.rte[8].abs() < 1e-14);
        assert_eq!(rep.grid.len(), rep.eqe.len());
        let csv = rep.to_csv(&[("dist", "cauchy".into())]);
        assert!(csv.starts_with("# dist: cauchy\n"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 18);
    }

    #[test]
    fn newton_step_shrinks_error() {
        // A deliberately short series leaves a visible round-trip error.
        let cf = make_stable_symmetric(1.0).unwrap();
        let q = CompositeQuantile::central_only(tan_series(6));
        for u in [0.6, 0.7, 0.8, 0.85] {
            let s = newton_step(&q, &cf, u, &QuadratureConfig::default()).unwrap();
            assert!(s.rte.abs() > 1e-12);
            assert!(s.rte_new.abs() * 10.0 <= s.rte.abs(), "u={u}: {} -> {}", s.rte, s.rte_new);
        }
    }

    #[test]
    fn tail_density_uses_cdf_difference() {
        let cf = make_stable_symmetric(1.0).unwrap();
        let tail = Tail::Stable(stable_tail(1.0, &TailConfig::default()).unwrap());
        let (q, _) = CompositeQuantile::with_tail(tan_series(35), tail, &TailConfig::default()).unwrap();
        let u = 0.999;
        assert_eq!(q.region(u), Region::UpperTail);
        let w = q.eval(u).unwrap();
        let f = density_at(&q, &cf, u, w, &QuadratureConfig::default()).unwrap();
        let exact = 1.0 / (PI * (1.0 + w * w));
        assert!((f / exact - 1.0).abs() < 1e-5, "{f} vs {exact}");
    }

    #[test]
    fn table_parsing() {
        let text = "% stable alpha=1.5\n# comment\nu quantile\n0.25, -1.0\n0.75 1.0 extra\n\n0.5\t0\n";
        let t = ReferenceTable::parse(text, "t").unwrap();
        assert_eq!(t.rows, vec![(0.25, -1.0), (0.5, 0.0), (0.75, 1.0)]);
        assert_eq!(t.lookup(0.75), Some(1.0));
        assert_eq!(t.lookup(0.7), None);
        assert_eq!(t.levels_in(0.3, 1.0), vec![0.5, 0.75]);
        assert!(matches!(ReferenceTable::parse("0.5\n", "t"), Err(Error::Parse(_))));
        assert!(matches!(ReferenceTable::parse("0.5 x\n", "t"), Err(Error::Parse(_))));
        assert!(matches!(ReferenceTable::parse("1.5 2\n", "t"), Err(Error::Parse(_))));
        assert!(matches!(ReferenceTable::parse("# only\n", "t"), Err(Error::Parse(_))));
    }

    #[test]
    fn scan_against_tan() {
        let q = CompositeQuantile::central_only(tan_series(35));
        let grid = uniform_grid(0.5, 0.84, 35).unwrap();
        let rep = reference_scan(&q, &Oracle::Cauchy { scale: 1.0 }, &grid).unwrap();
        assert!(rep.max_rel_err < 1e-10);
        assert_eq!(rep.rows[0].rel_err, 0.0);
        let table = Oracle::Table(ReferenceTable::parse("0.6 0.3", "t").unwrap());
        assert!(reference_scan(&q, &table, &[0.7]).is_err());
    }
}
