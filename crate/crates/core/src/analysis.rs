//! Empirical statistics from a trace table compared against predictions,
//! plus the CSV files the plotting scripts read.

use std::fmt::Write as _;
use std::path::Path;

use num_rational::Ratio;

use crate::constants::ConstantProfile;
use crate::density::{f_er, li, phi_integral, DensityModel};
use crate::error::{Error, Result};
use crate::galois::{prime_density, ratio_to_f64, GaloisImage};
use crate::table::{write_atomic, TraceTable};
use crate::trace::TraceRecord;

/// Normalized errors at most this large count as inside the noise band.
pub const NOISE_BAND: f64 = 5.0;

/// `pi_{E,r}(x)`: records with `a_p = r`.
pub fn pi_er(records: &[TraceRecord], r: i64) -> u64 {
    records.iter().filter(|rec| rec.a == r).count() as u64
}

/// Records with `a_p = a mod q`.
pub fn chebotarev_count(records: &[TraceRecord], a: i64, q: u64) -> u64 {
    let q = q.max(1) as i64;
    let target = a.rem_euclid(q);
    records.iter().filter(|rec| rec.a.rem_euclid(q) == target).count() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChebotarevRow {
    pub q: u64,
    pub a: i64,
    pub count: u64,
    pub li_x: f64,
    pub delta: Option<Ratio<i128>>,
    pub predicted: Option<f64>,
    /// `(count / Li(x)) / delta - 1`; `None` without an image or when `delta = 0`.
    pub rel_dev: Option<f64>,
}

/// One row per residue `a mod q`, compared with `delta_{a,q} Li(x)` when an image is known.
pub fn chebotarev_rows(
    table: &TraceTable,
    x: u64,
    q: u64,
    image: Option<&GaloisImage>,
    cm: bool,
) -> Result<Vec<ChebotarevRow>> {
    if q == 0 {
        return Err(Error::pre("chebotarev", "q must be >= 1"));
    }
    let records = table.up_to(x);
    let li_x = li(x as f64)?;
    let mut counts = vec![0u64; q as usize];
    for rec in records {
        counts[rec.a.rem_euclid(q as i64) as usize] += 1;
    }
    let mut rows = Vec::with_capacity(q as usize);
    for (a, &count) in counts.iter().enumerate() {
        let delta = image.map(|img| prime_density(img, cm, a as i64, q)).transpose()?;
        let predicted = delta.map(|d| ratio_to_f64(&d) * li_x);
        let rel_dev = delta
            .filter(|d| *d.numer() != 0)
            .map(|d| count as f64 / li_x / ratio_to_f64(&d) - 1.0);
        rows.push(ChebotarevRow {
            q,
            a: a as i64,
            count,
            li_x,
            delta,
            predicted,
            rel_dev,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingRow {
    pub a: i64,
    pub q: u64,
    pub start: i64,
    pub len: u64,
    pub sum: f64,
    pub predicted: f64,
    pub deviation: f64,
}

/// `sum C_{E,r}` over `r = a mod q`, `A < r <= A + B`, `r != 0`, against
/// `phi_E(0) B sum_{b = a mod q} main_factor(b) / m_E`.
pub fn average_constants(profile: &ConstantProfile, a: i64, q: u64, start: i64, len: u64) -> Result<AveragingRow> {
    if len == 0 {
        return Err(Error::pre("average_constants", "B must be >= 1"));
    }
    if q == 0 || profile.m_e % q != 0 {
        return Err(Error::Divisibility { q, level: profile.m_e });
    }
    let qi = q as i64;
    let first = start + 1 + (a - (start + 1)).rem_euclid(qi);
    let end = start + len as i64;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut r = first;
    while r <= end {
        if r != 0 {
            // Kahan summation: ~10^5 terms of similar size
            let y = profile.c_er(r)?.value - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        r += qi;
    }
    let m = profile.m_e as i64;
    let class_mass: Ratio<i128> = (0..m)
        .filter(|b| (b - a).rem_euclid(qi) == 0)
        .map(|b| profile.main_factor(b))
        .sum::<Ratio<i128>>()
        / m as i128;
    let predicted = profile.phi0 * ratio_to_f64(&class_mass) * len as f64;
    Ok(AveragingRow {
        a,
        q,
        start,
        len,
        sum,
        predicted,
        deviation: (sum - predicted).abs(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub r: i64,
    pub observed: u64,
    pub predicted: f64,
    pub abs_err: f64,
    /// NaN when the prediction is 0.
    pub rel_err: f64,
    pub norm_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    /// Rows with `|r| <= 2 sqrt(x) (1 - 1/log x)` and `C_{E,r} != 0`.
    pub rows_considered: usize,
    pub fraction_within_band: f64,
    pub mean_norm_err: f64,
    pub max_abs_norm_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub x: u64,
    pub rows: Vec<ErrorRow>,
    /// Supersingular count for CM curves, kept out of the rows.
    pub cm_zero_count: Option<u64>,
    pub summary: ErrorSummary,
}

/// Observed `pi_{E,r}(x)` against `F_{E,r}(x)` for every `|r| <= 2 sqrt x`.
pub fn error_report(table: &TraceTable, profile: &ConstantProfile, x: u64, tol: f64) -> Result<ErrorReport> {
    if x > table.x_max {
        return Err(Error::pre(
            "error_report",
            format!("x = {x} beyond table range {}", table.x_max),
        ));
    }
    let model = DensityModel::for_cm(profile.is_cm());
    let records = table.up_to(x);
    let edge = (2.0 * (x as f64).sqrt()).floor() as i64;
    let mut observed = vec![0u64; (2 * edge + 1) as usize];
    for rec in records {
        observed[(rec.a + edge) as usize] += 1;
    }
    let xf = x as f64;
    let inner = 2.0 * xf.sqrt() * (1.0 - 1.0 / xf.ln());
    let mut rows = Vec::with_capacity(observed.len());
    let mut considered = Vec::new();
    for r in -edge..=edge {
        if r == 0 && profile.is_cm() {
            continue;
        }
        let c = profile.c_er(r)?.value;
        let f = f_er(c, r, xf, model, tol)?;
        let obs = observed[(r + edge) as usize];
        let abs_err = obs as f64 - f;
        let row = ErrorRow {
            r,
            observed: obs,
            predicted: f,
            abs_err,
            rel_err: if f == 0.0 { f64::NAN } else { abs_err / f },
            norm_err: abs_err / (1.0 + f).sqrt(),
        };
        if (r.abs() as f64) <= inner && c != 0.0 {
            considered.push(row.norm_err);
        }
        rows.push(row);
    }
    let n = considered.len();
    let summary = ErrorSummary {
        rows_considered: n,
        fraction_within_band: considered.iter().filter(|e| e.abs() <= NOISE_BAND).count() as f64 / n.max(1) as f64,
        mean_norm_err: considered.iter().sum::<f64>() / n.max(1) as f64,
        max_abs_norm_err: considered.iter().fold(0.0, |m, e| m.max(e.abs())),
    };
    Ok(ErrorReport {
        x,
        rows,
        cm_zero_count: profile.is_cm().then(|| observed[edge as usize]),
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramReport {
    /// Bin edges on `[-1, 1]`, `bins + 1` values.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `N * int_bin phi_E` with `N` the number of records.
    pub expected: Vec<f64>,
    /// Largest CDF gap at the bin edges, over the non-atom part for CM curves.
    pub sup_cdf_distance: f64,
    /// `(count, frequency)` of `a_p = 0` for CM curves.
    pub atom: Option<(u64, f64)>,
}

/// Distribution of `a_p / (2 sqrt p)` against the model density.
pub fn sato_tate_report(table: &TraceTable, model: DensityModel, bins: usize, x: u64) -> Result<HistogramReport> {
    if bins < 10 {
        return Err(Error::pre("sato_tate_report", format!("bins = {bins} < 10")));
    }
    let records = table.up_to(x);
    if records.is_empty() {
        return Err(Error::EmptyTable);
    }
    let cm = model == DensityModel::Cm;
    let mut counts = vec![0u64; bins];
    let mut atom = 0u64;
    for rec in records {
        if cm && rec.a == 0 {
            atom += 1;
            continue;
        }
        let z = rec.a as f64 / (2.0 * (rec.p as f64).sqrt());
        let idx = (((z + 1.0) / 2.0) * bins as f64).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let edges: Vec<f64> = (0..=bins).map(|i| -1.0 + 2.0 * i as f64 / bins as f64).collect();
    let total = records.len() as f64;
    let expected = edges
        .windows(2)
        .map(|w| phi_integral(model, w[0], w[1]).map(|m| m * total))
        .collect::<Result<Vec<_>>>()?;
    let binned: u64 = counts.iter().sum();
    let mut cumulative = 0u64;
    let mut sup = 0.0f64;
    for (i, &c) in counts.iter().enumerate() {
        cumulative += c;
        let emp = cumulative as f64 / binned.max(1) as f64;
        let theory = phi_integral(model, -1.0, edges[i + 1])? / model.mass();
        sup = sup.max((emp - theory).abs());
    }
    Ok(HistogramReport {
        edges,
        counts,
        expected,
        sup_cdf_distance: sup,
        atom: cm.then(|| (atom, atom as f64 / total)),
    })
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

fn two_column(header: &str, rows: impl Iterator<Item = (i64, String)>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (r, v) in rows {
        let _ = writeln!(out, "{r},{v}");
    }
    out
}

/// Writes `figure1.csv` through `figure5.csv` into `dir`.
pub fn write_figure_csvs(report: &ErrorReport, dir: &Path) -> Result<()> {
    let rows = &report.rows;
    let files: [(&str, &str, Box<dyn Fn(&ErrorRow) -> String>); 5] = [
        ("figure1.csv", "r,observed", Box::new(|e| e.observed.to_string())),
        ("figure2.csv", "r,predicted", Box::new(|e| fmt_f64(e.predicted))),
        ("figure3.csv", "r,abs_err", Box::new(|e| fmt_f64(e.abs_err))),
        ("figure4.csv", "r,rel_err", Box::new(|e| fmt_f64(e.rel_err))),
        ("figure5.csv", "r,norm_err", Box::new(|e| fmt_f64(e.norm_err))),
    ];
    for (name, header, value) in files {
        let body = two_column(header, rows.iter().map(|e| (e.r, value(e))));
        write_atomic(&dir.join(name), body.as_bytes())?;
    }
    Ok(())
}

pub fn chebotarev_csv(rows: &[ChebotarevRow]) -> String {
    let mut out = String::from("q,a,count,li_x,delta,predicted,rel_dev\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.q,
            row.a,
            row.count,
            fmt_f64(row.li_x),
            row.delta.map(|d| format!("{}/{}", d.numer(), d.denom())).unwrap_or_default(),
            opt(row.predicted),
            opt(row.rel_dev),
        );
    }
    out
}

pub fn satotate_csv(report: &HistogramReport) -> String {
    let mut out = String::from("bin_lo,bin_hi,count,expected\n");
    for (i, (&c, &e)) in report.counts.iter().zip(&report.expected).enumerate() {
        let _ = writeln!(out, "{},{},{c},{}", report.edges[i], report.edges[i + 1], fmt_f64(e));
    }
    out
}

pub fn averaging_csv(rows: &[AveragingRow]) -> String {
    let mut out = String::from("a,q,A,B,sum,predicted,deviation\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.a,
            row.q,
            row.start,
            row.len,
            fmt_f64(row.sum),
            fmt_f64(row.predicted),
            fmt_f64(row.deviation)
        );
    }
    out
}

/// `r,main_factor,C_Er,tail_bound` for `r` in `[r_min, r_max]`; CM rows skip `r = 0`.
pub fn constants_csv(profile: &ConstantProfile, r_min: i64, r_max: i64) -> Result<String> {
    let mut out = String::from("r,main_factor,C_Er,tail_bound\n");
    for r in r_min..=r_max {
        if r == 0 && profile.is_cm() {
            continue;
        }
        let mf = profile.main_factor(r);
        let c = profile.c_er(r)?;
        let _ = writeln!(
            out,
            "{r},{}/{},{},{}",
            mf.numer(),
            mf.denom(),
            fmt_f64(c.value),
            fmt_f64(c.tail_bound)
        );
    }
    Ok(out)
}

/// `r,C_Er,F` at cutoff `x` for `r` in `[r_min, r_max]` clipped to `|r| <= 2 sqrt x`.
pub fn predict_csv(profile: &ConstantProfile, x: f64, r_min: i64, r_max: i64, tol: f64) -> Result<String> {
    let model = DensityModel::for_cm(profile.is_cm());
    let edge = (2.0 * x.sqrt()).floor() as i64;
    let mut out = String::from("r,C_Er,F\n");
    for r in r_min.max(-edge)..=r_max.min(edge) {
        if r == 0 && profile.is_cm() {
            continue;
        }
        let c = profile.c_er(r)?.value;
        let f = f_er(c, r, x, model, tol)?;
        let _ = writeln!(out, "{r},{},{}", fmt_f64(c), fmt_f64(f));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ConstantProfile;
    use crate::curve::RationalCurve;
    use crate::galois::serre_image;
    use crate::table::build_table;

    fn serre_setup(x: u64) -> (TraceTable, ConstantProfile, GaloisImage) {
        let curve = RationalCurve::new("serre", 6, -2).unwrap();
        let image = serre_image(-3, 6).unwrap();
        let profile = ConstantProfile::from_image(&image, None, 10_000).unwrap();
        (build_table(&curve, x, 1).unwrap(), profile, image)
    }

    #[test]
    fn partitions() {
        let (t, profile, image) = serre_setup(20_000);
        assert_eq!(chebotarev_count(&t.records, 5, 1), t.len() as u64);
        let rows = chebotarev_rows(&t, 20_000, 6, Some(&image), false).unwrap();
        assert_eq!(rows.iter().map(|r| r.count).sum::<u64>(), t.len() as u64);
        let report = error_report(&t, &profile, 20_000, 1e-8).unwrap();
        assert_eq!(report.rows.iter().map(|r| r.observed).sum::<u64>(), t.len() as u64);
        let edge = (2.0 * 20_000f64.sqrt()).floor() as usize;
        assert_eq!(report.rows.len(), 2 * edge + 1);
        let hist = sato_tate_report(&t, DensityModel::NonCm, 20, 20_000).unwrap();
        assert_eq!(hist.counts.iter().sum::<u64>(), t.len() as u64);
        assert!((hist.expected.iter().sum::<f64>() - t.len() as f64).abs() < 1e-6);
    }

    #[test]
    fn pi_er_outside_hasse_is_zero() {
        let (t, _, _) = serre_setup(5_000);
        assert_eq!(pi_er(&t.records, 2 * 71 + 1), 0);
        let edge = 141i64;
        let total: u64 = (-edge..=edge).map(|r| pi_er(&t.records, r)).sum();
        assert_eq!(total, t.len() as u64);
    }

    #[test]
    fn predictions_even_in_r() {
        let (t, profile, _) = serre_setup(10_000);
        let report = error_report(&t, &profile, 10_000, 1e-9).unwrap();
        let n = report.rows.len();
        for i in 0..n / 2 {
            let (lo, hi) = (&report.rows[i], &report.rows[n - 1 - i]);
            assert_eq!(lo.r, -hi.r);
            // C_{E,r} = C_{E,-r} for this image, so F is even as well
            assert_eq!(lo.predicted, hi.predicted);
        }
    }

    #[test]
    fn averaging_requires_level_divisor() {
        let (_, profile, _) = serre_setup(100);
        assert!(matches!(average_constants(&profile, 0, 4, 0, 100), Err(Error::Divisibility { .. })));
        assert!(average_constants(&profile, 0, 1, 0, 0).is_err());
        let row = average_constants(&profile, 1, 6, -50, 100).unwrap();
        let direct: f64 = (-49..=50)
            .filter(|r: &i64| r.rem_euclid(6) == 1)
            .map(|r| profile.c_er(r).unwrap().value)
            .sum();
        assert!((row.sum - direct).abs() < 1e-12);
    }

    #[test]
    fn csv_shapes() {
        let (t, profile, image) = serre_setup(2_000);
        let dir = tempfile::tempdir().unwrap();
        let report = error_report(&t, &profile, 2_000, 1e-9).unwrap();
        write_figure_csvs(&report, dir.path()).unwrap();
        for i in 1..=5 {
            let text = std::fs::read_to_string(dir.path().join(format!("figure{i}.csv"))).unwrap();
            assert_eq!(text.lines().count(), report.rows.len() + 1);
        }
        let cheb = chebotarev_csv(&chebotarev_rows(&t, 2_000, 6, Some(&image), false).unwrap());
        assert!(cheb.starts_with("q,a,count,li_x,delta,predicted,rel_dev\n"));
        assert_eq!(cheb.lines().count(), 7);
        let consts = constants_csv(&profile, -3, 3).unwrap();
        assert!(consts.lines().nth(1).unwrap().starts_with("-3,"));
        let pred = predict_csv(&profile, 100.0, -100, 100, 1e-9).unwrap();
        assert_eq!(pred.lines().count(), 1 + 41);
    }
}
