use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{SphereSample, TransportError};
use crate::mesh::SurfacePoint;

/// One row of the dataset CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub mesh_id: usize,
    pub face_id: usize,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub log_area_correction: f64,
}

impl From<&SphereSample> for DatasetRecord {
    fn from(s: &SphereSample) -> Self {
        let [b0, b1, b2] = s.source.bary;
        let [x, y, z] = s.direction;
        DatasetRecord { mesh_id: s.mesh_id, face_id: s.source.face, b0, b1, b2, x, y, z, log_area_correction: s.log_area_correction }
    }
}

impl From<DatasetRecord> for SphereSample {
    fn from(r: DatasetRecord) -> Self {
        SphereSample {
            direction: [r.x, r.y, r.z],
            mesh_id: r.mesh_id,
            source: SurfacePoint::new(r.face_id, [r.b0, r.b1, r.b2]),
            log_area_correction: r.log_area_correction,
        }
    }
}

/// Writes samples with a header row; floats use shortest round-trip form.
pub fn write_dataset_csv<W: Write>(w: W, samples: &[SphereSample]) -> Result<(), TransportError> {
    let mut wr = csv::Writer::from_writer(w);
    for s in samples {
        wr.serialize(DatasetRecord::from(s))?;
    }
    if samples.is_empty() {
        wr.write_record(["mesh_id", "face_id", "b0", "b1", "b2", "x", "y", "z", "log_area_correction"])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(r: R) -> Result<Vec<SphereSample>, TransportError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.deserialize::<DatasetRecord>() {
        out.push(rec?.into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let s = SphereSample {
            direction: [0.1f64, -0.7, 0.3].map(|v| v / 0.59f64.sqrt()),
            mesh_id: 3,
            source: SurfacePoint::new(17, [0.2, 0.3, 0.5]),
            log_area_correction: -1.234567890123,
        };
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &[s, s]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mesh_id,face_id,b0,b1,b2,x,y,z,log_area_correction\n"));
        assert_eq!(read_dataset_csv(&buf[..]).unwrap(), vec![s, s]);
        let mut empty = Vec::new();
        write_dataset_csv(&mut empty, &[]).unwrap();
        assert!(read_dataset_csv(&empty[..]).unwrap().is_empty());
    }
}
