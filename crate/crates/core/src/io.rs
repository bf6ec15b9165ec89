//! File formats: curve matrices, hierarchy files, dataset directories and
//! half-hourly demand extracts.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so writing and reading a file reproduces the values exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, FunctionalSample, Grid};
use crate::error::{Error, Result};
use crate::eval::HftsDataset;
use crate::hierarchy::{HierarchySpec, NodeSpec};
use crate::predict::FtsSeries;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line: line as usize,
        message: message.into(),
    }
}

fn data_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_owned(),
        message: message.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn is_curve_header(record: &csv::StringRecord) -> bool {
    record.iter().enumerate().all(|(i, f)| f == format!("t{i}"))
}

/// Reads one curve per row on `[0, t_end]`; the number of columns fixes the grid.
///
/// An optional header `t0,t1,...` is skipped. With `expected_points` set, a
/// different column count is an error.
pub fn read_curves(path: &Path, t_end: f64, expected_points: Option<usize>) -> Result<FunctionalSample> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in reader(path)?.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if i == 0 && is_curve_header(&record) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("column {}: {f:?} is not a finite number", col + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let w = *width.get_or_insert(values.len());
        if values.len() != w {
            return Err(parse_err(path, line, format!("{} values, earlier rows have {w}", values.len())));
        }
        rows.push(values);
    }
    let g = width.ok_or_else(|| data_err(path, "no curves"))?;
    if let Some(expected) = expected_points {
        if g != expected {
            return Err(data_err(path, format!("curves have {g} points, expected {expected}")));
        }
    }
    let grid = Grid::new(t_end, g)?;
    FunctionalSample::from_rows(grid, rows)
}

pub fn write_curves<'a>(path: &Path, curves: impl IntoIterator<Item = &'a Curve>, header: bool) -> Result<()> {
    let mut out = String::new();
    let mut first = true;
    for c in curves {
        if first && header {
            let names: Vec<String> = (0..c.values().len()).map(|i| format!("t{i}")).collect();
            out.push_str(&names.join(","));
            out.push('\n');
        }
        first = false;
        let cells: Vec<String> = c.values().iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Reads `node_id,parent_id` lines; the root has an empty parent.
pub fn read_hierarchy(path: &Path) -> Result<HierarchySpec> {
    let mut spec = HierarchySpec::new();
    for (i, record) in reader(path)?.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if i == 0 && record.get(0) == Some("node_id") {
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if !(1..=2).contains(&record.len()) {
            return Err(parse_err(path, line, format!("expected node_id,parent_id, got {} fields", record.len())));
        }
        let parent = record.get(1).filter(|p| !p.is_empty());
        spec = spec.node(&record[0], parent);
    }
    if spec.nodes.is_empty() {
        return Err(data_err(path, "no nodes"));
    }
    Ok(spec)
}

pub fn write_hierarchy(path: &Path, spec: &HierarchySpec) -> Result<()> {
    let mut out = String::from("node_id,parent_id\n");
    for NodeSpec { id, parent } in &spec.nodes {
        out.push_str(&format!("{id},{}\n", parent.as_deref().unwrap_or("")));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// `dataset.json` in a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub t_end: f64,
    pub n_points: usize,
    pub hierarchy: String,
    /// Curve file per node id, relative to the directory.
    pub nodes: BTreeMap<String, String>,
}

pub const DATASET_MANIFEST: &str = "dataset.json";

/// Writes `dataset.json`, `hierarchy.csv` and one curve file per node.
pub fn write_dataset(dir: &Path, data: &HftsDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_hierarchy(&dir.join("hierarchy.csv"), &data.hierarchy().to_spec())?;
    let mut nodes = BTreeMap::new();
    for (row, s) in data.series().iter().enumerate() {
        let file = format!("node_{row}.csv");
        write_curves(&dir.join(&file), s.curves(), true)?;
        nodes.insert(s.id().to_owned(), file);
    }
    let manifest = DatasetManifest {
        t_end: data.grid().t_end(),
        n_points: data.grid().n_points(),
        hierarchy: "hierarchy.csv".into(),
        nodes,
    };
    let path = dir.join(DATASET_MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&path))
}

/// Reads a directory written by [`write_dataset`], validating the aggregation identity.
pub fn read_dataset(dir: &Path) -> Result<HftsDataset> {
    let path = dir.join(DATASET_MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let hierarchy = read_hierarchy(&dir.join(&manifest.hierarchy))?.build()?;
    let series = manifest
        .nodes
        .iter()
        .map(|(id, file)| {
            let sample = read_curves(&dir.join(file), manifest.t_end, Some(manifest.n_points))?;
            Ok(FtsSeries::from_sample(id.clone(), sample))
        })
        .collect::<Result<Vec<_>>>()?;
    HftsDataset::new(hierarchy, series)
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandOptions {
    pub periods_per_day: usize,
    /// Leaf ids; `nsw` matches region codes `NSW` and `NSW1`, case-insensitively.
    pub regions: Vec<String>,
    pub root_id: String,
}

impl Default for DemandOptions {
    fn default() -> Self {
        Self {
            periods_per_day: 48,
            regions: ["nsw", "qld", "sa", "tas", "vic"].map(String::from).to_vec(),
            root_id: "total".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandData {
    pub dataset: HftsDataset,
    /// Calendar day of each curve.
    pub days: Vec<NaiveDate>,
}

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y/%m/%d %H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y/%m/%d %H:%M", "%Y-%m-%d %H:%M"];

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn region_matches(code: &str, region: &str) -> bool {
    let code = code.to_ascii_lowercase();
    let region = region.to_ascii_lowercase();
    code == region || code.strip_suffix('1') == Some(region.as_str())
}

/// Reads `REGION,SETTLEMENTDATE,TOTALDEMAND` rows from CSV extracts.
///
/// Timestamps mark the end of each settlement period, so with 48 periods a
/// day runs from 00:30 to 24:00 (written as 00:00 of the next date). Rows of
/// other regions and extra columns are ignored. Curve `j` of a day lies on a
/// grid over `[0, 24)` hours, point `j` standing for the period ending at
/// `(j + 1) * 24 / G` hours. The root is the sum of all regions.
pub fn ingest_demand(paths: &[PathBuf], opts: &DemandOptions) -> Result<DemandData> {
    let g = opts.periods_per_day;
    if g < 2 || 1440 % g != 0 {
        return Err(Error::InvalidParameter(format!(
            "periods per day must be at least 2 and divide 1440 minutes, got {g}"
        )));
    }
    if opts.regions.is_empty() {
        return Err(Error::InvalidParameter("no regions requested".into()));
    }
    let period = Duration::minutes((1440 / g) as i64);

    // Per region: day -> slot values, plus the last timestamp for ordering.
    let mut days: Vec<BTreeMap<NaiveDate, Vec<Option<f64>>>> = vec![BTreeMap::new(); opts.regions.len()];
    let mut last: Vec<Option<(NaiveDateTime, PathBuf, u64)>> = vec![None; opts.regions.len()];
    for path in paths {
        let mut rdr = reader(path)?;
        let header = rdr
            .records()
            .next()
            .transpose()?
            .ok_or_else(|| data_err(path, "empty file"))?;
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| data_err(path, format!("missing column {name}")))
        };
        let (c_region, c_time, c_demand) = (col("REGION")?, col("SETTLEMENTDATE")?, col("TOTALDEMAND")?);
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |c: usize| record.get(c).unwrap_or("");
            let Some(r) = opts.regions.iter().position(|reg| region_matches(field(c_region), reg)) else {
                continue;
            };
            let ts = parse_timestamp(field(c_time))
                .ok_or_else(|| parse_err(path, line, format!("bad timestamp {:?}", field(c_time))))?;
            let demand = field(c_demand)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("non-numeric demand {:?}", field(c_demand))))?;
            if let Some((prev, prev_path, prev_line)) = &last[r] {
                if ts <= *prev {
                    return Err(parse_err(
                        path,
                        line,
                        format!(
                            "timestamp {ts} for region {} does not follow {prev} ({}:{prev_line})",
                            opts.regions[r],
                            prev_path.display()
                        ),
                    ));
                }
            }
            last[r] = Some((ts, path.clone(), line));

            let end = ts - period;
            let day = end.date();
            let offset = end - day.and_hms_opt(0, 0, 0).expect("midnight");
            if offset.num_seconds() % period.num_seconds() != 0 {
                return Err(parse_err(path, line, format!("timestamp {ts} is not on a {}-minute boundary", period.num_minutes())));
            }
            let slot = (offset.num_seconds() / period.num_seconds()) as usize;
            days[r].entry(day).or_insert_with(|| vec![None; g])[slot] = Some(demand);
        }
    }

    let mut leaves = Vec::with_capacity(opts.regions.len());
    let mut day_list: Option<Vec<NaiveDate>> = None;
    let hours = 24.0 * (g - 1) as f64 / g as f64;
    let grid = Grid::new(hours, g)?;
    for (r, region) in opts.regions.iter().enumerate() {
        if days[r].is_empty() {
            return Err(Error::InvalidParameter(format!("no rows for region {region}")));
        }
        let incomplete: Vec<String> = days[r]
            .iter()
            .filter(|(_, v)| v.iter().any(Option::is_none))
            .map(|(d, v)| format!("{d} ({} of {g} periods)", v.iter().flatten().count()))
            .collect();
        if !incomplete.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "region {region} has incomplete days: {}",
                incomplete.join(", ")
            )));
        }
        let these: Vec<NaiveDate> = days[r].keys().copied().collect();
        if let Some(prev) = &day_list {
            if *prev != these {
                let a: BTreeSet<_> = prev.iter().collect();
                let b: BTreeSet<_> = these.iter().collect();
                let diff: Vec<String> = a.symmetric_difference(&b).map(|d| d.to_string()).collect();
                return Err(Error::InvalidParameter(format!(
                    "region {region} covers different days than {}: {}",
                    opts.regions[0],
                    diff.join(", ")
                )));
            }
        } else {
            day_list = Some(these);
        }
        let curves = days[r]
            .values()
            .map(|v| Curve::new(grid, v.iter().map(|x| x.expect("complete day")).collect()))
            .collect::<Result<Vec<_>>>()?;
        leaves.push(FtsSeries::new(region.clone(), curves)?);
    }
    let hierarchy = HierarchySpec::star(&opts.root_id, &opts.regions).build()?;
    Ok(DemandData {
        dataset: HftsDataset::from_leaves(hierarchy, leaves)?,
        days: day_list.expect("at least one region"),
    })
}

/// Writes the leaf series as a demand extract readable by [`ingest_demand`].
pub fn write_demand(path: &Path, data: &DemandData) -> Result<()> {
    let h = data.dataset.hierarchy();
    let g = data.dataset.grid().n_points();
    let period = Duration::minutes((1440 / g) as i64);
    let mut out = String::from("REGION,SETTLEMENTDATE,TOTALDEMAND\n");
    for s in &data.dataset.series()[h.first_leaf()..] {
        for (day, c) in data.days.iter().zip(s.curves()) {
            let midnight = day.and_hms_opt(0, 0, 0).expect("midnight");
            for (j, v) in c.values().iter().enumerate() {
                let ts = midnight + period * (j as i32 + 1);
                out.push_str(&format!("{},{},{v}\n", s.id(), ts.format("%Y/%m/%d %H:%M:%S")));
            }
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn curve_round_trip_is_exact() {
        let d = tmp();
        let grid = Grid::new(2.5, 4).unwrap();
        let s = FunctionalSample::from_rows(grid, vec![vec![0.1, 1.0 / 3.0, -2e-300, 7.0], vec![1e17, 0.0, 3.25, -0.5]]).unwrap();
        for header in [true, false] {
            let p = d.path().join("c.csv");
            write_curves(&p, s.curves(), header).unwrap();
            assert_eq!(read_curves(&p, 2.5, Some(4)).unwrap(), s);
        }
        assert!(read_curves(&d.path().join("c.csv"), 2.5, Some(5)).is_err());
    }

    #[test]
    fn curve_errors_name_the_line() {
        let d = tmp();
        let p = d.path().join("c.csv");
        fs::write(&p, "t0,t1\n1,2\n3,x\n").unwrap();
        let err = read_curves(&p, 1.0, None).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_curves(&p, 1.0, None).unwrap_err().to_string().contains(":2:"));
    }

    #[test]
    fn hierarchy_file() {
        let d = tmp();
        let p = d.path().join("h.csv");
        fs::write(&p, "node_id,parent_id\n# regions\ntotal,\n\nnsw,total\nvic,total\n").unwrap();
        let h = read_hierarchy(&p).unwrap().build().unwrap();
        assert_eq!(h.ids(), ["total", "nsw", "vic"]);
        write_hierarchy(&p, &h.to_spec()).unwrap();
        assert_eq!(read_hierarchy(&p).unwrap().build().unwrap(), h);
    }

    fn demand_csv(days: u32, regions: &[&str], skip: Option<(u32, u32)>) -> String {
        let mut out = String::from("I,REGION,SETTLEMENTDATE,TOTALDEMAND,RRP\n");
        for (r, code) in regions.iter().enumerate() {
            for day in 1..=days {
                for j in 1..=48u32 {
                    if skip == Some((day, j)) {
                        continue;
                    }
                    let ts = NaiveDate::from_ymd_opt(2016, 1, day).unwrap().and_hms_opt(0, 0, 0).unwrap()
                        + Duration::minutes(30 * j as i64);
                    let v = 1000.0 * (r + 1) as f64 + day as f64 + j as f64 / 100.0;
                    out.push_str(&format!("D,{code},{},{v},42.0\n", ts.format("%Y/%m/%d %H:%M:%S")));
                }
            }
        }
        out
    }

    #[test]
    fn ingest_month_of_five_regions() {
        let d = tmp();
        let p = d.path().join("demand.csv");
        fs::write(&p, demand_csv(31, &["NSW1", "QLD1", "SA1", "TAS1", "VIC1"], None)).unwrap();
        let data = ingest_demand(std::slice::from_ref(&p), &DemandOptions::default()).unwrap();
        let ds = &data.dataset;
        assert_eq!(ds.hierarchy().len(), 6);
        assert_eq!(ds.n_curves(), 31);
        assert_eq!(ds.grid().n_points(), 48);
        assert_eq!(ds.grid().t_end(), 23.5);
        assert_eq!(data.days[0], NaiveDate::from_ymd_opt(2016, 1, 1).unwrap());
        // 24:00 closes day 1, written as 00:00 on 2 January.
        assert_eq!(ds.node("nsw").unwrap().curves()[0].values()[47], 1001.48);
        let total = ds.node("total").unwrap().curves()[4].values()[0];
        assert!((total - (15000.0 + 25.0 + 0.05)).abs() < 1e-9);

        let out = d.path().join("round.csv");
        write_demand(&out, &data).unwrap();
        assert_eq!(ingest_demand(&[out], &DemandOptions::default()).unwrap(), data);

        let dir = d.path().join("ds");
        write_dataset(&dir, ds).unwrap();
        assert_eq!(&read_dataset(&dir).unwrap(), ds);
    }

    #[test]
    fn single_region_root_equals_leaf() {
        let d = tmp();
        let p = d.path().join("demand.csv");
        fs::write(&p, demand_csv(3, &["TAS1", "VIC1"], None)).unwrap();
        let opts = DemandOptions {
            regions: vec!["tas".into()],
            ..DemandOptions::default()
        };
        let ds = ingest_demand(&[p], &opts).unwrap().dataset;
        assert_eq!(ds.hierarchy().len(), 2);
        assert_eq!(ds.series()[0].curves(), ds.series()[1].curves());
    }

    #[test]
    fn ingest_rejections() {
        let d = tmp();
        let p = d.path().join("demand.csv");
        fs::write(&p, demand_csv(3, &["NSW1"], Some((2, 17)))).unwrap();
        let opts = DemandOptions {
            regions: vec!["nsw".into()],
            ..DemandOptions::default()
        };
        let err = ingest_demand(std::slice::from_ref(&p), &opts).unwrap_err().to_string();
        assert!(err.contains("2016-01-02 (47 of 48"), "{err}");

        fs::write(&p, demand_csv(2, &["NSW1"], None).replace(",1001.01,", ",n/a,")).unwrap();
        let err = ingest_demand(std::slice::from_ref(&p), &opts).unwrap_err().to_string();
        assert!(err.contains("demand.csv:2:") && err.contains("non-numeric"), "{err}");

        fs::write(&p, demand_csv(2, &["NSW1"], None)).unwrap();
        let both = DemandOptions {
            regions: vec!["nsw".into(), "qld".into()],
            ..DemandOptions::default()
        };
        assert!(ingest_demand(std::slice::from_ref(&p), &both).unwrap_err().to_string().contains("qld"));

        let text = demand_csv(1, &["NSW1"], None);
        let mut rows: Vec<&str> = text.lines().collect();
        rows.swap(3, 4);
        fs::write(&p, rows.join("\n")).unwrap();
        assert!(ingest_demand(&[p], &opts).unwrap_err().to_string().contains("does not follow"));
    }
}
