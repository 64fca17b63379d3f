//! The two on-disk CSV formats.
//!
//! Canonical dataset: `traj_id,x_label,y_label,t_label`, one row per point in
//! time order, label columns holding full-depth bit strings. Anonymized
//! output: the same plus a leading `cluster_id`, label columns holding
//! arbitrary-depth prefixes (empty = fully suppressed). Both are written with
//! `\n` endings and no quoting, so equal data produces equal bytes; ids
//! containing CSV metacharacters are rejected instead of quoted.

use std::io::{BufRead, Write};

use super::{Dataset, GridSpec, ModelError, Point, Trajectory};
use crate::dgh::Label;
use crate::model::GeneralizedPoint;

pub const CANONICAL_HEADER: &str = "traj_id,x_label,y_label,t_label";
pub const ANONYMIZED_HEADER: &str = "cluster_id,traj_id,x_label,y_label,t_label";

/// Grid geometry that label bit-widths cannot carry: where the grid sits and
/// how big its cells are. Combined with widths inferred from a canonical CSV
/// this rebuilds a full [`GridSpec`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub epsilon_m: f64,
    pub epsilon_t_s: f64,
}

impl Default for PhysicalParams {
    fn default() -> PhysicalParams {
        PhysicalParams { origin_lat: 0.0, origin_lon: 0.0, epsilon_m: 10.0, epsilon_t_s: 3600.0 }
    }
}

impl PhysicalParams {
    pub fn of_grid(grid: &GridSpec) -> PhysicalParams {
        PhysicalParams {
            origin_lat: grid.origin_lat,
            origin_lon: grid.origin_lon,
            epsilon_m: grid.epsilon_m,
            epsilon_t_s: grid.epsilon_t_s,
        }
    }
}

fn check_id(id: &str) -> Result<(), ModelError> {
    if id.is_empty() || id.contains([',', '\n', '\r', '"']) {
        return Err(ModelError::UnwritableId(id.to_string()));
    }
    Ok(())
}

fn io_err(e: std::io::Error) -> ModelError {
    ModelError::Io { path: "<writer>".into(), source: e }
}

/// Write a dataset in canonical form, trajectories in dataset order.
pub fn write_canonical_csv<W: Write>(dataset: &Dataset, w: &mut W) -> Result<(), ModelError> {
    writeln!(w, "{CANONICAL_HEADER}").map_err(io_err)?;
    for tr in dataset.trajectories() {
        check_id(&tr.id)?;
        for p in &tr.points {
            writeln!(w, "{},{},{},{}", tr.id, p.x, p.y, p.t).map_err(io_err)?;
        }
    }
    Ok(())
}

fn parse_label(field: &str, line: usize) -> Result<Label, ModelError> {
    field
        .parse()
        .map_err(|_| ModelError::Parse {
            line,
            message: format!("invalid bit-string label {field:?}"),
        })
}

/// Read a canonical CSV. Label widths define the hierarchy depths; `physical`
/// supplies the rest of the grid. Trajectories keep first-appearance order,
/// points keep row order.
pub fn read_canonical_csv<R: BufRead>(
    reader: R,
    physical: &PhysicalParams,
) -> Result<Dataset, ModelError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(l))) => l,
        Some((_, Err(e))) => return Err(io_err(e)),
        None => return Err(ModelError::EmptyDataset),
    };
    if header.trim_end_matches('\r') != CANONICAL_HEADER {
        return Err(ModelError::Parse {
            line: 1,
            message: format!("expected header {CANONICAL_HEADER:?}"),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut points: Vec<Vec<Point>> = Vec::new();
    let mut widths: Option<(u8, u8, u8)> = None;

    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(io_err)?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(ModelError::Parse {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let x = parse_label(fields[1], line_no)?;
        let y = parse_label(fields[2], line_no)?;
        let t = parse_label(fields[3], line_no)?;
        let w = (x.bit_len(), y.bit_len(), t.bit_len());
        match widths {
            None => {
                if w.0 == 0 || w.1 == 0 || w.2 == 0 {
                    return Err(ModelError::Parse {
                        line: line_no,
                        message: "labels must be non-empty leaf bit strings".to_string(),
                    });
                }
                widths = Some(w);
            }
            Some(expect) if expect != w => {
                return Err(ModelError::Parse {
                    line: line_no,
                    message: format!(
                        "label widths {:?} differ from first row's {:?}",
                        (w.0, w.1, w.2),
                        (expect.0, expect.1, expect.2)
                    ),
                });
            }
            Some(_) => {}
        }
        let id = fields[0];
        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            points.push(Vec::new());
            points.len() - 1
        });
        points[slot].push(Point::new(x, y, t));
    }

    let (bx, by, bt) = widths.ok_or(ModelError::EmptyDataset)?;
    let grid = GridSpec::new(
        physical.origin_lat,
        physical.origin_lon,
        physical.epsilon_m,
        physical.epsilon_t_s,
        bx as u32,
        by as u32,
        bt as u32,
    )?;
    let trajectories = order
        .into_iter()
        .zip(points)
        .map(|(id, pts)| Trajectory::new(id, pts))
        .collect();
    Dataset::new(trajectories, grid)
}

/// Write released trajectories; each item is one member's full sequence.
pub fn write_anonymized_csv<'a, W, I>(rows: I, w: &mut W) -> Result<(), ModelError>
where
    W: Write,
    I: IntoIterator<Item = (usize, &'a str, &'a [GeneralizedPoint])>,
{
    writeln!(w, "{ANONYMIZED_HEADER}").map_err(io_err)?;
    for (cluster, member, seq) in rows {
        check_id(member)?;
        for gp in seq {
            writeln!(w, "{},{},{},{},{}", cluster, member, gp.x, gp.y, gp.t).map_err(io_err)?;
        }
    }
    Ok(())
}

/// One member's released sequence, as read back from anonymized CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ReleasedTrajectory {
    pub cluster_id: String,
    pub id: String,
    pub points: Vec<GeneralizedPoint>,
}

/// Read anonymized CSV, grouping rows per member in first-appearance order.
pub fn read_anonymized_csv<R: BufRead>(reader: R) -> Result<Vec<ReleasedTrajectory>, ModelError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(l))) => l,
        Some((_, Err(e))) => return Err(io_err(e)),
        None => return Err(ModelError::EmptyDataset),
    };
    if header.trim_end_matches('\r') != ANONYMIZED_HEADER {
        return Err(ModelError::Parse {
            line: 1,
            message: format!("expected header {ANONYMIZED_HEADER:?}"),
        });
    }
    let mut out: Vec<ReleasedTrajectory> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(io_err)?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(ModelError::Parse {
                line: line_no,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let gp = GeneralizedPoint::new(
            parse_label(fields[2], line_no)?,
            parse_label(fields[3], line_no)?,
            parse_label(fields[4], line_no)?,
        );
        let (cluster_id, id) = (fields[0], fields[1]);
        match index.get(id) {
            Some(&slot) => {
                if out[slot].cluster_id != cluster_id {
                    return Err(ModelError::Parse {
                        line: line_no,
                        message: format!("trajectory {id:?} appears in two clusters"),
                    });
                }
                out[slot].points.push(gp);
            }
            None => {
                index.insert(id.to_string(), out.len());
                out.push(ReleasedTrajectory {
                    cluster_id: cluster_id.to_string(),
                    id: id.to_string(),
                    points: vec![gp],
                });
            }
        }
    }
    if out.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(s: &str) -> Label {
        s.parse().unwrap()
    }

    fn pt(x: &str, y: &str, t: &str) -> Point {
        Point::new(lab(x), lab(y), lab(t))
    }

    fn sample_dataset() -> Dataset {
        let grid = GridSpec::new(0.0, 0.0, 10.0, 3600.0, 3, 3, 3).unwrap();
        Dataset::new(
            vec![
                Trajectory::new("a", vec![pt("000", "001", "010"), pt("001", "001", "011")]),
                Trajectory::new("b", vec![pt("111", "110", "100")]),
            ],
            grid,
        )
        .unwrap()
    }

    #[test]
    fn canonical_write_golden() {
        let mut buf = Vec::new();
        write_canonical_csv(&sample_dataset(), &mut buf).unwrap();
        let expect = "traj_id,x_label,y_label,t_label\n\
                      a,000,001,010\n\
                      a,001,001,011\n\
                      b,111,110,100\n";
        assert_eq!(String::from_utf8(buf).unwrap(), expect);
    }

    #[test]
    fn canonical_roundtrip_and_passthrough() {
        let ds = sample_dataset();
        let mut buf = Vec::new();
        write_canonical_csv(&ds, &mut buf).unwrap();
        let physical = PhysicalParams::of_grid(ds.grid());
        let back = read_canonical_csv(buf.as_slice(), &physical).unwrap();
        assert_eq!(back, ds);
        let mut again = Vec::new();
        write_canonical_csv(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn canonical_read_rejects_bad_input() {
        let physical = PhysicalParams::default();
        let no_header = "a,000,001,010\n";
        assert!(matches!(
            read_canonical_csv(no_header.as_bytes(), &physical),
            Err(ModelError::Parse { line: 1, .. })
        ));
        let ragged = "traj_id,x_label,y_label,t_label\na,000,001\n";
        assert!(matches!(
            read_canonical_csv(ragged.as_bytes(), &physical),
            Err(ModelError::Parse { line: 2, .. })
        ));
        let junk_label = "traj_id,x_label,y_label,t_label\na,0x0,001,010\n";
        assert!(matches!(
            read_canonical_csv(junk_label.as_bytes(), &physical),
            Err(ModelError::Parse { line: 2, .. })
        ));
        let uneven = "traj_id,x_label,y_label,t_label\na,000,001,010\na,00,001,010\n";
        assert!(matches!(
            read_canonical_csv(uneven.as_bytes(), &physical),
            Err(ModelError::Parse { line: 3, .. })
        ));
        let empty_label = "traj_id,x_label,y_label,t_label\na,,001,010\n";
        assert!(matches!(
            read_canonical_csv(empty_label.as_bytes(), &physical),
            Err(ModelError::Parse { line: 2, .. })
        ));
        let header_only = "traj_id,x_label,y_label,t_label\n";
        assert!(matches!(
            read_canonical_csv(header_only.as_bytes(), &physical),
            Err(ModelError::EmptyDataset)
        ));
    }

    #[test]
    fn ids_with_metacharacters_are_rejected_on_write() {
        let grid = GridSpec::new(0.0, 0.0, 10.0, 3600.0, 3, 3, 3).unwrap();
        let ds = Dataset::new(
            vec![Trajectory::new("a,b", vec![pt("000", "001", "010")])],
            grid,
        )
        .unwrap();
        let mut buf = Vec::new();
        assert!(matches!(
            write_canonical_csv(&ds, &mut buf),
            Err(ModelError::UnwritableId(_))
        ));
    }

    #[test]
    fn anonymized_roundtrip_with_root_labels() {
        let head: Vec<GeneralizedPoint> = vec![
            GeneralizedPoint::new(lab("00"), lab(""), lab("010")),
            GeneralizedPoint::ROOT,
        ];
        let rows: Vec<(usize, &str, &[GeneralizedPoint])> =
            vec![(0, "a", &head), (0, "b", &head)];
        let mut buf = Vec::new();
        write_anonymized_csv(rows, &mut buf).unwrap();
        let expect = "cluster_id,traj_id,x_label,y_label,t_label\n\
                      0,a,00,,010\n\
                      0,a,,,\n\
                      0,b,00,,010\n\
                      0,b,,,\n";
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), expect);

        let released = read_anonymized_csv(buf.as_slice()).unwrap();
        assert_eq!(released.len(), 2);
        assert_eq!(released[0].id, "a");
        assert_eq!(released[0].points, head);
        assert_eq!(released[1].id, "b");
        assert_eq!(released[1].points, head);
    }

    #[test]
    fn anonymized_read_rejects_member_in_two_clusters() {
        let text = "cluster_id,traj_id,x_label,y_label,t_label\n\
                    0,a,0,0,0\n\
                    1,a,0,0,0\n";
        assert!(matches!(
            read_anonymized_csv(text.as_bytes()),
            Err(ModelError::Parse { line: 3, .. })
        ));
    }
}
