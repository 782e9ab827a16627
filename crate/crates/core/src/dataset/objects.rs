//! Annotated image regions with object velocities:
//! `u_min,v_min,u_max,v_max,vx,vy,vz` (pixels, m/s in the radar frame).

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::synth::{ObjectRegion, ObjectVelocityMap};

const HEADER: [&str; 7] = ["u_min", "v_min", "u_max", "v_max", "vx", "vy", "vz"];

pub fn parse_objects_csv(text: &str, origin: &Path) -> Result<ObjectVelocityMap> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse(origin, 1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::parse(origin, 1, format!("expected header {:?}", HEADER.join(","))));
    }
    let mut regions = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::parse(origin, e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::parse(origin, line, format!("{s:?} is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 7 || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(origin, line, "expected 7 finite values"));
        }
        if vals[0] > vals[2] || vals[1] > vals[3] {
            return Err(Error::parse(origin, line, "region min exceeds max"));
        }
        regions.push(ObjectRegion {
            u_min: vals[0],
            v_min: vals[1],
            u_max: vals[2],
            v_max: vals[3],
            velocity: Vec3::new(vals[4], vals[5], vals[6]),
        });
    }
    Ok(ObjectVelocityMap::new(regions))
}

pub fn load_objects_csv(path: &Path) -> Result<ObjectVelocityMap> {
    parse_objects_csv(&super::read_to_string(path)?, path)
}

pub fn format_objects_csv(map: &ObjectVelocityMap) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for r in map.regions() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.u_min, r.v_min, r.u_max, r.v_max, r.velocity.x, r.velocity.y, r.velocity.z
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let map = ObjectVelocityMap::new(vec![ObjectRegion {
            u_min: 1.0,
            v_min: 2.0,
            u_max: 30.5,
            v_max: 40.0,
            velocity: Vec3::new(3.0, -1.0, 0.0),
        }]);
        let back = parse_objects_csv(&format_objects_csv(&map), Path::new("o.csv")).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn inverted_region_rejected() {
        let text = "u_min,v_min,u_max,v_max,vx,vy,vz\n10,0,5,5,0,0,0\n";
        assert!(matches!(parse_objects_csv(text, Path::new("o.csv")), Err(Error::Parse { line: 2, .. })));
    }
}
