//! Trajectory CSV reader and writer.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{InstrumentTrack, Sample};
use crate::{Error, Result};

const HEADER_2D: [&str; 7] = [
    "clip_id",
    "instrument_id",
    "frame",
    "t",
    "x",
    "y",
    "visible",
];
const HEADER_3D: [&str; 8] = [
    "clip_id",
    "instrument_id",
    "frame",
    "t",
    "x",
    "y",
    "z",
    "visible",
];

/// Reads a trajectory CSV into one track per `(clip_id, instrument_id)`,
/// tracks ordered by that key and samples ordered by frame.
pub fn load_trajectories(path: &Path) -> Result<Vec<InstrumentTrack>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trajectories(file, path)
}

fn parse_visible(s: &str) -> Option<bool> {
    match s.trim() {
        "true" | "1" | "True" | "TRUE" => Some(true),
        "false" | "0" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Parses trajectory CSV text; `path` is only used in error messages. Row
/// numbers count data rows from 1.
pub fn parse_trajectories<R: Read>(reader: R, path: &Path) -> Result<Vec<InstrumentTrack>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::schema(path, "header", e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let dim = if names == HEADER_2D {
        2
    } else if names == HEADER_3D {
        3
    } else {
        return Err(Error::schema(
            path,
            "header",
            format!(
                "expected `{}` or `{}`, found `{}`",
                HEADER_2D.join(","),
                HEADER_3D.join(","),
                names.join(",")
            ),
        ));
    };

    // (clip, instrument) -> samples with their source row
    let mut groups: BTreeMap<(String, String), Vec<(usize, Sample)>> = BTreeMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Row {
            path: path.into(),
            row,
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Row {
            path: path.into(),
            row,
            message,
        };
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let num = |i: usize, name: &str| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| bad(format!("cannot parse {name} `{}`", field(i))))
        };

        let frame: i64 = field(2)
            .parse()
            .map_err(|_| bad(format!("cannot parse frame `{}`", field(2))))?;
        let t = num(3, "t")?;
        if !t.is_finite() {
            return Err(bad("non-finite timestamp".into()));
        }
        let mut position = [0.0; 3];
        position[0] = num(4, "x")?;
        position[1] = num(5, "y")?;
        if dim == 3 {
            if field(6).is_empty() {
                return Err(bad("mixed dimensionality: missing z".into()));
            }
            position[2] = num(6, "z")?;
        }
        let visible = parse_visible(field(dim + 4))
            .ok_or_else(|| bad(format!("cannot parse visible `{}`", field(dim + 4))))?;
        if visible && position[..dim].iter().any(|x| !x.is_finite()) {
            return Err(bad("non-finite position on a visible sample".into()));
        }
        groups
            .entry((field(0).to_string(), field(1).to_string()))
            .or_default()
            .push((
                row,
                Sample {
                    frame,
                    t,
                    position,
                    visible,
                },
            ));
    }

    let mut tracks = Vec::with_capacity(groups.len());
    for ((clip_id, instrument_id), mut rows) in groups {
        rows.sort_by_key(|(_, s)| s.frame);
        for w in rows.windows(2) {
            let ((_, a), (row, b)) = (&w[0], &w[1]);
            if b.frame == a.frame {
                return Err(Error::Row {
                    path: path.into(),
                    row: *row,
                    message: format!(
                        "non-monotone frames: frame {} repeated in track {clip_id}/{instrument_id}",
                        b.frame
                    ),
                });
            }
            if b.t < a.t {
                return Err(Error::Row {
                    path: path.into(),
                    row: *row,
                    message: format!(
                        "time decreases from {} to {} in track {clip_id}/{instrument_id}",
                        a.t, b.t
                    ),
                });
            }
        }
        tracks.push(InstrumentTrack {
            clip_id,
            instrument_id,
            dim,
            samples: rows.into_iter().map(|(_, s)| s).collect(),
        });
    }
    Ok(tracks)
}

/// Writes tracks in `(clip, instrument, frame)` order. All tracks must share
/// one dimensionality.
pub fn write_trajectories<W: Write>(writer: W, tracks: &[InstrumentTrack]) -> Result<()> {
    let dim = tracks.first().map_or(2, |t| t.dim);
    if tracks.iter().any(|t| t.dim != dim) {
        return Err(Error::InvalidInput(
            "mixed dimensionality across tracks".into(),
        ));
    }
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let to_err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    if dim == 3 {
        wtr.write_record(HEADER_3D).map_err(to_err)?;
    } else {
        wtr.write_record(HEADER_2D).map_err(to_err)?;
    }
    let mut order: Vec<&InstrumentTrack> = tracks.iter().collect();
    order.sort_by(|a, b| (&a.clip_id, &a.instrument_id).cmp(&(&b.clip_id, &b.instrument_id)));
    for track in order {
        for s in &track.samples {
            let mut rec = vec![
                track.clip_id.clone(),
                track.instrument_id.clone(),
                s.frame.to_string(),
                s.t.to_string(),
            ];
            rec.extend(s.position[..dim].iter().map(|v| v.to_string()));
            rec.push(s.visible.to_string());
            wtr.write_record(&rec).map_err(to_err)?;
        }
    }
    wtr.flush()
        .map_err(|e| Error::InvalidInput(format!("csv write failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<InstrumentTrack>> {
        parse_trajectories(text.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn one_instrument_four_rows() {
        let tracks = parse(
            "clip_id,instrument_id,frame,t,x,y,visible\n\
             c,g,0,0.0,0.1,0.2,true\n\
             c,g,1,0.04,0.1,0.2,true\n\
             c,g,2,0.08,0.1,0.2,true\n\
             c,g,3,0.12,0.1,0.2,true\n",
        )
        .unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].samples.len(), 4);
        assert_eq!(tracks[0].dim, 2);
    }

    #[test]
    fn interleaved_instruments_are_grouped_and_sorted() {
        let tracks = parse(
            "clip_id,instrument_id,frame,t,x,y,z,visible\n\
             c,b,1,1,0,0,0,true\n\
             c,a,1,1,0,0,0,true\n\
             c,b,0,0,0,0,0,true\n\
             c,a,0,0,0,0,0,false\n",
        )
        .unwrap();
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].instrument_id, "a");
        assert_eq!(tracks[1].dim, 3);
        for t in &tracks {
            assert_eq!(
                t.samples.iter().map(|s| s.frame).collect::<Vec<_>>(),
                vec![0, 1]
            );
        }
    }

    #[test]
    fn nan_on_visible_row_names_the_row() {
        let err = parse(
            "clip_id,instrument_id,frame,t,x,y,visible\n\
             c,g,0,0,0.1,0.2,true\n\
             c,g,1,1,NaN,0.2,true\n",
        )
        .unwrap_err();
        match err {
            Error::Row { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        // Hidden samples may carry NaN.
        assert!(
            parse("clip_id,instrument_id,frame,t,x,y,visible\nc,g,0,0,NaN,NaN,false\n").is_ok()
        );
    }

    #[test]
    fn duplicate_frames_and_mixed_dims_are_rejected() {
        assert!(parse(
            "clip_id,instrument_id,frame,t,x,y,visible\nc,g,0,0,0,0,true\nc,g,0,1,0,0,true\n"
        )
        .is_err());
        assert!(parse("clip_id,instrument_id,frame,t,x,y,z,visible\nc,g,0,0,0,0,,true\n").is_err());
        assert!(parse(
            "clip_id,instrument_id,frame,t,x,y,visible\nc,g,0,1,0,0,true\nc,g,1,0,0,0,true\n"
        )
        .is_err());
        assert!(parse("clip,instrument_id,frame,t,x,y,visible\n").is_err());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let text = "clip_id,instrument_id,frame,t,x,y,visible\n\
                    c,a,0,0,0.25,0.5,true\n\
                    c,a,1,0.04,NaN,NaN,false\n";
        let tracks = parse(text).unwrap();
        let mut out = Vec::new();
        write_trajectories(&mut out, &tracks).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
