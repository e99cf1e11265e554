//! Speed CSV: a header of road ids, then one row per timestep, empty cells for
//! missing readings. Graph CSV: `from_vertex,to_vertex,road_id,length_miles`
//! per directed edge, with an optional header line.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{SpeedField, DEFAULT_STEP_MINUTES, MISSING};
use crate::router::RoadGraph;
use crate::{Error, Result};

pub const GRAPH_HEADER: &str = "from_vertex,to_vertex,road_id,length_miles";

pub fn load_speed_csv(path: impl AsRef<Path>) -> Result<SpeedField> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_speed_csv(&text, DEFAULT_STEP_MINUTES)
}

pub fn read_speed_csv(text: &str, step_minutes: u32) -> Result<SpeedField> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty speed file".into()))?;
    let road_ids: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if road_ids.iter().any(String::is_empty) {
        return Err(Error::Format("header contains an empty road id".into()));
    }
    let n_roads = road_ids.len();
    let mut speeds = vec![Vec::new(); n_roads];
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_roads {
            return Err(Error::Format(format!(
                "row {row} has {} cells, expected {n_roads}",
                cells.len()
            )));
        }
        for (col, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            let value = if cell.is_empty() {
                MISSING
            } else {
                cell.parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    col: col + 1,
                    msg: format!("{cell:?}: {e}"),
                })?
            };
            speeds[col].push(value);
        }
    }
    SpeedField::new(road_ids, speeds, step_minutes)
}

pub fn write_speed_csv(field: &SpeedField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = io::BufWriter::new(file);
    write_speed_csv_to(field, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Values use the shortest representation that parses back to the same
/// `f64`, so a load/write cycle is lossless.
pub fn write_speed_csv_to<W: Write>(field: &SpeedField, out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", field.road_ids().join(","))?;
    let mut line = String::new();
    for t in 0..field.n_steps() {
        line.clear();
        for road in 0..field.n_roads() {
            if road > 0 {
                line.push(',');
            }
            let v = field.speed(road, t);
            if v.is_finite() {
                write!(line, "{v}").unwrap();
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn load_graph_csv(path: impl AsRef<Path>) -> Result<RoadGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_graph_csv(&text)
}

pub fn read_graph_csv(text: &str) -> Result<RoadGraph> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line).trim();
        if line.is_empty() || (i == 0 && line.starts_with("from")) {
            continue;
        }
        let row = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 4 {
            return Err(Error::Format(format!(
                "graph row {row} has {} cells, expected 4",
                cells.len()
            )));
        }
        let parse_vertex = |col: usize| {
            cells[col].parse::<u32>().map_err(|e| Error::Parse {
                row,
                col: col + 1,
                msg: format!("{:?}: {e}", cells[col]),
            })
        };
        let length = cells[3].parse::<f64>().map_err(|e| Error::Parse {
            row,
            col: 4,
            msg: format!("{:?}: {e}", cells[3]),
        })?;
        records.push((
            parse_vertex(0)?,
            parse_vertex(1)?,
            cells[2].to_string(),
            length,
        ));
    }
    RoadGraph::from_records(&records)
}

pub fn write_graph_csv(graph: &RoadGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    writeln!(text, "{GRAPH_HEADER}").unwrap();
    for e in graph.edges() {
        writeln!(
            text,
            "{},{},{},{}",
            graph.vertex_id(e.from),
            graph.vertex_id(e.to),
            graph.road_ids()[e.road],
            e.length
        )
        .unwrap();
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
