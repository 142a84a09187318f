//! File formats: map documents, observation tables, filter snapshots and
//! experiment outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use kfroute_core::kf_static::ScalarFilterState;
use kfroute_core::mapfile;
use kfroute_core::worldsim::ObservationTable;
use kfroute_core::{builtin_map, BuiltinMap, EdgeId, NodeId, TopologyMap};

/// Loads a builtin map by name (`map1`..`map3`) or a map file by path.
pub fn load_map(name_or_path: &str) -> Result<TopologyMap> {
    if let Some(which) = BuiltinMap::from_name(name_or_path) {
        return Ok(builtin_map(which));
    }
    let path = Path::new(name_or_path);
    let text =
        fs::read_to_string(path).with_context(|| format!("reading map {}", path.display()))?;
    mapfile::parse(&text).with_context(|| format!("parsing map {}", path.display()))
}

pub fn save_map(map: &TopologyMap, path: &Path) -> Result<()> {
    fs::write(path, mapfile::to_text(map)).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
struct TableRow {
    edge_from: usize,
    edge_to: usize,
    k: u32,
    observed_time: f64,
}

pub fn write_table<W: std::io::Write>(
    map: &TopologyMap,
    table: &ObservationTable,
    out: W,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for (edge, k, observed_time) in table.iter() {
        let e = map.edge(edge);
        writer.serialize(TableRow {
            edge_from: e.from.0,
            edge_to: e.to.0,
            k,
            observed_time,
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_table<R: std::io::Read>(map: &TopologyMap, input: R) -> Result<ObservationTable> {
    let mut reader = csv::Reader::from_reader(input);
    let mut table = ObservationTable::new(0);
    for (line, row) in reader.deserialize::<TableRow>().enumerate() {
        let row = row.with_context(|| format!("table row {}", line + 1))?;
        let Some(edge) = map.find_edge(NodeId(row.edge_from), NodeId(row.edge_to)) else {
            bail!(
                "table row {}: no edge {} -> {} in the map",
                line + 1,
                row.edge_from,
                row.edge_to
            );
        };
        table.insert(edge, row.k, row.observed_time);
    }
    Ok(table)
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotRow {
    edge: usize,
    k: u32,
    x_hat: f64,
    p: f64,
}

/// Static filter bank as `edge,k,x_hat,p` rows.
pub fn write_snapshot<W: std::io::Write>(bank: &[ScalarFilterState], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for (edge, state) in bank.iter().enumerate() {
        writer.serialize(SnapshotRow {
            edge,
            k: state.k,
            x_hat: state.x_hat,
            p: state.p,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a snapshot back into a bank whose noise settings are taken from
/// `template`.
pub fn read_snapshot<R: std::io::Read>(
    template: &ScalarFilterState,
    input: R,
) -> Result<Vec<(EdgeId, ScalarFilterState)>> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize::<SnapshotRow>()
        .map(|row| {
            let row = row?;
            Ok((
                EdgeId(row.edge),
                ScalarFilterState {
                    x_hat: row.x_hat,
                    p: row.p,
                    k: row.k,
                    ..*template
                },
            ))
        })
        .collect()
}

/// Creates `dir` and returns the path of `name` inside it.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(header)?;
    for row in rows {
        writer
            .serialize(row)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    writer.flush()?;
    Ok(())
}
