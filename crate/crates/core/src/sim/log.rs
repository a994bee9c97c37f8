//! Per-step trajectory logs in CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Vec2, NUM_JOINTS};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub qdot0: f64,
    pub qdot1: f64,
    pub qdot2: f64,
    pub xf_x: f64,
    pub xf_y: f64,
    pub xc_x: f64,
    pub xc_y: f64,
    pub force_norm: f64,
    pub tau0: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl TrajectoryRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        step: usize,
        q: [f64; NUM_JOINTS],
        qdot: [f64; NUM_JOINTS],
        x_f: Vec2,
        x_c: Vec2,
        force_norm: f64,
        torque: [f64; NUM_JOINTS],
    ) -> Self {
        Self {
            step,
            q0: q[0],
            q1: q[1],
            q2: q[2],
            qdot0: qdot[0],
            qdot1: qdot[1],
            qdot2: qdot[2],
            xf_x: x_f.x,
            xf_y: x_f.y,
            xc_x: x_c.x,
            xc_y: x_c.y,
            force_norm,
            tau0: torque[0],
            tau1: torque[1],
            tau2: torque[2],
        }
    }

    pub fn x_f(&self) -> Vec2 {
        Vec2::new(self.xf_x, self.xf_y)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryLog {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let rows = r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { rows })
    }

    pub fn head_path(&self) -> Vec<Vec2> {
        self.rows.iter().map(TrajectoryRow::x_f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_round_trip() {
        let log = TrajectoryLog {
            rows: vec![TrajectoryRow::new(
                0,
                [0.1, 0.2, 0.3],
                [0.0; 3],
                Vec2::new(0.5, 0.3),
                Vec2::new(0.47, 0.05),
                0.0,
                [1.0, -2.0, 0.5],
            )],
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "step,q0,q1,q2,qdot0,qdot1,qdot2,xf_x,xf_y,xc_x,xc_y,force_norm,tau0,tau1,tau2\n"
        ));
        assert_eq!(TrajectoryLog::read_csv(&buf[..]).unwrap(), log);
    }
}
