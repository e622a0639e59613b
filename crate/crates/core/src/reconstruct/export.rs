//! Text exports of sampled immersions.

use std::fmt::Write as _;

use super::ImmersionSample;
use crate::error::{Error, Result};
use crate::fundeq::{json_array, json_f64, json_string};

/// Wavefront OBJ of a 3D sample. Invalid nodes are dropped together with
/// every face touching them; the remaining vertices are renumbered.
pub fn write_obj(sample: &ImmersionSample) -> Result<String> {
    if let Some(d) = sample.ambient_dim() {
        if d != 3 {
            return Err(Error::Dimension(format!("OBJ export needs a 3D ambient space, got {d}")));
        }
    }
    let mut out = String::new();
    let mut slot = vec![None; sample.records.len()];
    let mut next = 1;
    for (k, rec) in sample.records.iter().enumerate() {
        if let Some(p) = rec.point() {
            let _ = writeln!(out, "v {:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
            slot[k] = Some(next);
            next += 1;
        }
    }
    for face in &sample.faces {
        let ids: Option<Vec<usize>> = face.iter().map(|&k| slot[k]).collect();
        if let Some(ids) = ids {
            let _ = writeln!(out, "f {} {} {} {}", ids[0], ids[1], ids[2], ids[3]);
        }
    }
    Ok(out)
}

/// One row per node: `i,j,valid,x1..xn,y1..yd,gauss,codazzi,ricci`.
/// Missing values are left empty.
pub fn write_csv(sample: &ImmersionSample) -> String {
    let n = sample
        .records
        .iter()
        .find_map(|r| r.base.as_ref().map(Vec::len))
        .unwrap_or(0);
    let d = sample.ambient_dim().unwrap_or(0);
    let mut out = String::from("i,j,valid");
    for a in 1..=n {
        let _ = write!(out, ",x{a}");
    }
    for a in 1..=d {
        let _ = write!(out, ",y{a}");
    }
    out.push_str(",gauss,codazzi,ricci\n");
    for rec in &sample.records {
        let mut row = format!("{},{},{}", rec.index[0], rec.index[1], u8::from(rec.is_valid()));
        let fill = |row: &mut String, vals: Option<&[f64]>, len: usize| {
            for a in 0..len {
                row.push(',');
                if let Some(v) = vals {
                    let _ = write!(row, "{:.16e}", v[a]);
                }
            }
        };
        fill(&mut row, rec.base.as_deref(), n);
        fill(&mut row, rec.point(), d);
        let res = rec.result.as_ref().ok().map(|r| [r.residuals.gauss, r.residuals.codazzi, r.residuals.ricci]);
        fill(&mut row, res.as_ref().map(|r| r.as_slice()), 3);
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Full sample as JSON, including `τ` on each valid node.
pub fn write_json(sample: &ImmersionSample) -> String {
    let mut recs = Vec::with_capacity(sample.records.len());
    for rec in &sample.records {
        let mut fields = vec![
            format!("\"index\": [{}, {}]", rec.index[0], rec.index[1]),
            format!("\"curve\": {}", json_string(&rec.curve)),
        ];
        if let Some(b) = &rec.base {
            fields.push(format!("\"base\": {}", json_array(b)));
        }
        match &rec.result {
            Ok(r) => {
                fields.push("\"valid\": true".into());
                fields.push(format!("\"point\": {}", json_array(&r.point)));
                let tau = r.tau.coordinate_matrix().ok();
                let rows: Vec<String> = tau
                    .iter()
                    .flat_map(|m| m.row_iter().map(|row| json_array(&row.iter().copied().collect::<Vec<_>>())).collect::<Vec<_>>())
                    .collect();
                fields.push(format!("\"tau\": [{}]", rows.join(", ")));
                fields.push(format!(
                    "\"gauss\": {}, \"codazzi\": {}, \"ricci\": {}",
                    json_f64(r.residuals.gauss),
                    json_f64(r.residuals.codazzi),
                    json_f64(r.residuals.ricci)
                ));
            }
            Err(e) => {
                fields.push("\"valid\": false".into());
                fields.push(format!("\"error\": {}", json_string(e)));
            }
        }
        recs.push(format!("{{{}}}", fields.join(", ")));
    }
    let faces: Vec<String> = sample
        .faces
        .iter()
        .map(|f| format!("[{}, {}, {}, {}]", f[0], f[1], f[2], f[3]))
        .collect();
    format!(
        "{{\"policy\": \"{}\", \"counts\": [{}, {}], \"records\": [{}], \"faces\": [{}]}}\n",
        sample.policy.name(),
        sample.grid.counts[0],
        sample.grid.counts[1],
        recs.join(", "),
        faces.join(", ")
    )
}
