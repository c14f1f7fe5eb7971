//! Sensor streams and their JSON Lines encoding.
//!
//! One record per line, tagged by `kind`:
//!
//! | kind      | fields                                               |
//! |-----------|------------------------------------------------------|
//! | `imu`     | `t`, `dt`, `gyro`, `accel`, `contact_vel`            |
//! | `fk_pos`  | `t`, `hp` (foot position in base frame)              |
//! | `fk_rot`  | `t`, `rot` (foot orientation in base frame)          |
//! | `surface` | `t`, `rot` (surface orientation in world frame)      |
//! | `swap`    | `t`, `h_d` (new foot relative to old, base frame)    |
//! | `truth`   | `t`, `rot`, `vel`, `pos`, `foot`                     |
//!
//! Vectors are 3-element arrays, rotations 9 row-major reals.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::TIME_TOLERANCE;
use crate::liegroup::{GroupElement, Rotation, Vec3};
use crate::models::ImuStep;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkPosition {
    pub t: f64,
    pub hp: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkOrientation {
    pub t: f64,
    pub rot: Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePose {
    pub t: f64,
    pub rot: Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapEvent {
    pub t: f64,
    pub h_d: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub t: f64,
    pub rot: Rotation,
    pub vel: Vec3,
    pub pos: Vec3,
    pub foot: Vec3,
}

impl TruthSample {
    pub fn from_state(t: f64, x: &GroupElement) -> Self {
        TruthSample {
            t,
            rot: x.rot,
            vel: *x.vel(),
            pos: *x.pos(),
            foot: *x.foot(),
        }
    }

    pub fn state(&self) -> GroupElement {
        GroupElement::new(self.rot, self.vel, self.pos, self.foot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Imu(ImuStep),
    FkPos(FkPosition),
    FkRot(FkOrientation),
    Surface(SurfacePose),
    Swap(SwapEvent),
    Truth(TruthSample),
}

impl Record {
    pub fn t(&self) -> f64 {
        match self {
            Record::Imu(r) => r.t,
            Record::FkPos(r) => r.t,
            Record::FkRot(r) => r.t,
            Record::Surface(r) => r.t,
            Record::Swap(r) => r.t,
            Record::Truth(r) => r.t,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Record::Imu(_) => "imu",
            Record::FkPos(_) => "fk_pos",
            Record::FkRot(_) => "fk_rot",
            Record::Surface(_) => "surface",
            Record::Swap(_) => "swap",
            Record::Truth(_) => "truth",
        }
    }

    fn kind_index(&self) -> usize {
        match self {
            Record::Imu(_) => 0,
            Record::FkPos(_) => 1,
            Record::FkRot(_) => 2,
            Record::Surface(_) => 3,
            Record::Swap(_) => 4,
            Record::Truth(_) => 5,
        }
    }
}

/// Time-ordered sensor log with embedded ground truth.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SensorStream {
    pub records: Vec<Record>,
}

impl SensorStream {
    pub fn new(records: Vec<Record>) -> Self {
        SensorStream { records }
    }

    pub fn truth(&self) -> impl Iterator<Item = &TruthSample> {
        self.records.iter().filter_map(|r| match r {
            Record::Truth(s) => Some(s),
            _ => None,
        })
    }

    /// First truth sample, the filter's reference initial state.
    pub fn initial_truth(&self) -> Option<&TruthSample> {
        self.truth().next()
    }

    /// Index of the first record violating global time order or strict
    /// per-kind time order.
    pub fn first_order_violation(&self) -> Option<usize> {
        let mut last_any = f64::NEG_INFINITY;
        let mut last_kind = [f64::NEG_INFINITY; 6];
        for (i, r) in self.records.iter().enumerate() {
            let t = r.t();
            let k = r.kind_index();
            if t < last_any - TIME_TOLERANCE || t <= last_kind[k] {
                return Some(i);
            }
            last_any = last_any.max(t);
            last_kind[k] = t;
        }
        None
    }

    pub fn validate(&self) -> Result<()> {
        match self.first_order_violation() {
            Some(i) => Err(Error::StreamOrder {
                line: i + 1,
                t: self.records[i].t(),
            }),
            None => Ok(()),
        }
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses JSON Lines and checks time order; errors carry 1-based line
    /// numbers. Blank lines are skipped.
    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            records.push(rec);
            lines.push(i + 1);
        }
        let stream = SensorStream { records };
        if let Some(idx) = stream.first_order_violation() {
            return Err(Error::StreamOrder {
                line: lines[idx],
                t: stream.records[idx].t(),
            });
        }
        Ok(stream)
    }
}
