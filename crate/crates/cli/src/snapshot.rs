//! Plain-text field snapshots.
//!
//! A snapshot directory holds three CSV files, every value written with 17
//! significant digits so that reading them back is exact:
//!
//! - `velocity.csv`: `component,i,j,x,y,value`, one row per face, `u1` faces
//!   (`component = 1`) before `u2` faces, each in row-major order.
//! - `pressure.csv`: `i,j,x,y,p`, one row per cell in row-major order.
//! - `nodes.csv`: `node,x,y`, the Lagrangian node positions.

use std::fmt::Write as _;
use std::path::Path;

use ibmg_core::{BlockVector, StaggeredLevel};

use crate::HarnessError;

pub const VELOCITY_HEADER: &str = "component,i,j,x,y,value";
pub const PRESSURE_HEADER: &str = "i,j,x,y,p";
pub const NODES_HEADER: &str = "node,x,y";

/// Fields of one snapshot in the solver's flat layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    /// `[u1 | u2 | p]` as stored by [`BlockVector`].
    pub data: Vec<f64>,
    pub nodes: Vec<[f64; 2]>,
}

impl Snapshot {
    pub fn new(w: &BlockVector, nodes: &[[f64; 2]]) -> Self {
        Self {
            n: w.level().n(),
            data: w.data().to_vec(),
            nodes: nodes.to_vec(),
        }
    }

    pub fn level(&self) -> StaggeredLevel {
        StaggeredLevel::new(0, self.n)
    }
}

fn write_file(path: &Path, body: String) -> Result<(), HarnessError> {
    std::fs::write(path, body).map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

pub fn write_snapshot(dir: &Path, snap: &Snapshot) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
    let lv = snap.level();
    let n = snap.n;
    let d = &snap.data;

    let mut vel = format!("{VELOCITY_HEADER}\n");
    for j in 0..n {
        for i in 0..=n {
            let (x, y) = lv.u1_position(i, j);
            writeln!(vel, "1,{i},{j},{x:.16e},{y:.16e},{:.16e}", d[lv.u1(i, j)]).unwrap();
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let (x, y) = lv.u2_position(i, j);
            writeln!(vel, "2,{i},{j},{x:.16e},{y:.16e},{:.16e}", d[lv.u2(i, j)]).unwrap();
        }
    }
    let mut pre = format!("{PRESSURE_HEADER}\n");
    for j in 0..n {
        for i in 0..n {
            let (x, y) = lv.cell_center(i, j);
            writeln!(pre, "{i},{j},{x:.16e},{y:.16e},{:.16e}", d[lv.p(i, j)]).unwrap();
        }
    }
    let mut nodes = format!("{NODES_HEADER}\n");
    for (k, p) in snap.nodes.iter().enumerate() {
        writeln!(nodes, "{k},{:.16e},{:.16e}", p[0], p[1]).unwrap();
    }
    write_file(&dir.join("velocity.csv"), vel)?;
    write_file(&dir.join("pressure.csv"), pre)?;
    write_file(&dir.join("nodes.csv"), nodes)
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(HarnessError::Snapshot(format!("{}: unexpected header", path.display())));
    }
    Ok(lines.map(|l| l.split(',').map(str::to_owned).collect()).collect())
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, HarnessError> {
    s.parse().map_err(|_| HarnessError::Snapshot(format!("bad field '{s}'")))
}

pub fn read_snapshot(dir: &Path) -> Result<Snapshot, HarnessError> {
    let pressure = read_rows(&dir.join("pressure.csv"), PRESSURE_HEADER)?;
    let n = (pressure.len() as f64).sqrt() as usize;
    if n * n != pressure.len() {
        return Err(HarnessError::Snapshot("pressure rows do not form a square grid".into()));
    }
    let lv = StaggeredLevel::new(0, n);
    let mut data = vec![0.0; lv.len()];
    for row in &pressure {
        let (i, j): (usize, usize) = (parse(&row[0])?, parse(&row[1])?);
        data[lv.p(i, j)] = parse(&row[4])?;
    }
    for row in read_rows(&dir.join("velocity.csv"), VELOCITY_HEADER)? {
        let (i, j): (usize, usize) = (parse(&row[1])?, parse(&row[2])?);
        let k = match row[0].as_str() {
            "1" => lv.u1(i, j),
            "2" => lv.u2(i, j),
            c => return Err(HarnessError::Snapshot(format!("unknown component '{c}'"))),
        };
        data[k] = parse(&row[5])?;
    }
    let nodes = read_rows(&dir.join("nodes.csv"), NODES_HEADER)?
        .iter()
        .map(|r| Ok([parse(&r[1])?, parse(&r[2])?]))
        .collect::<Result<_, HarnessError>>()?;
    Ok(Snapshot { n, data, nodes })
}
