use std::io::Write;
use std::path::Path;

use super::{NetworkDescription, RunHistory, ThermalError};

pub fn parse_network(text: &str) -> Result<NetworkDescription, ThermalError> {
    toml::from_str(text).map_err(|e| ThermalError::Malformed(format!("network file: {e}")))
}

pub fn load_network(path: &Path) -> Result<NetworkDescription, ThermalError> {
    let text = std::fs::read_to_string(path)?;
    parse_network(&text).map_err(|e| ThermalError::Malformed(format!("{}: {e}", path.display())))
}

pub fn write_network(desc: &NetworkDescription) -> Result<String, ThermalError> {
    toml::to_string(desc).map_err(|e| ThermalError::Malformed(format!("network serialization: {e}")))
}

/// `t_s,T_K` history of one node.
pub fn write_node_history<W: Write>(hist: &RunHistory, node: usize, w: W) -> Result<(), ThermalError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["t_s", "T_K"])?;
    for (t, row) in hist.t.iter().zip(&hist.temperatures) {
        w.write_record([t.to_string(), row[node].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal_net::{assemble, measuring_point_template};

    #[test]
    fn toml_round_trip() {
        let text = r#"
[[node]]
id = "a"
capacity = 100.0
t_init = 350.0

[[node]]
id = "b"
capacity = 50.0
t_init = 350.0

[[link]]
a = "a"
b = "b"
conductance = 4.0

[[patch]]
id = "wall"
node = "a"
area = 0.01
channel = "chamber_c1"

[[probe]]
name = "liner"
node = "b"
"#;
        let d = parse_network(text).unwrap();
        assert_eq!(d.nodes.len(), 2);
        assert_eq!(d.patches[0].channel, "chamber_c1");
        assert_eq!(parse_network(&write_network(&d).unwrap()).unwrap(), d);
        assert!(parse_network("[[node]]\nid = 1").is_err());
        let t = measuring_point_template(2);
        assert_eq!(parse_network(&write_network(&t).unwrap()).unwrap(), t);
        assert!(assemble(&parse_network("").unwrap()).is_err());
    }
}
