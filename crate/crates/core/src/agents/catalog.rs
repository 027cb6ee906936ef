use serde::{Deserialize, Serialize};

/// Required number of pedestrian archetypes in a catalog.
pub const PEDESTRIAN_ARCHETYPES: usize = 107;
/// Required number of vehicle archetypes in a catalog.
pub const VEHICLE_ARCHETYPES: usize = 19;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianArchetype {
    pub id: String,
    pub walk_speed: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleArchetype {
    pub id: String,
    pub length: f64,
    pub max_speed: f64,
    pub accel: f64,
    pub decel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TramArchetype {
    pub id: String,
    pub length: f64,
    pub max_speed: f64,
    pub dwell: f64,
}

/// Behavior templates for every agent kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeCatalog {
    pub pedestrians: Vec<PedestrianArchetype>,
    /// Fast pedestrians; simulated with pedestrian rules.
    #[serde(default)]
    pub cyclists: Vec<PedestrianArchetype>,
    pub vehicles: Vec<VehicleArchetype>,
    pub trams: Vec<TramArchetype>,
}

fn in_range(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

impl ArchetypeCatalog {
    pub fn from_json(text: &str) -> Result<ArchetypeCatalog, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Every violated catalog rule, one message each. Empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.pedestrians.len() != PEDESTRIAN_ARCHETYPES {
            out.push(format!(
                "catalog has {} pedestrian archetypes; required count is {PEDESTRIAN_ARCHETYPES}",
                self.pedestrians.len()
            ));
        }
        if self.vehicles.len() != VEHICLE_ARCHETYPES {
            out.push(format!(
                "catalog has {} vehicle archetypes; required count is {VEHICLE_ARCHETYPES}",
                self.vehicles.len()
            ));
        }
        if self.trams.is_empty() {
            out.push("catalog needs at least one tram archetype".to_string());
        }
        for p in &self.pedestrians {
            if !in_range(p.walk_speed, 1.0, 1.8) {
                out.push(format!(
                    "pedestrian `{}` walk_speed outside [1.0, 1.8]",
                    p.id
                ));
            }
            if !in_range(p.radius, 0.25, 0.4) {
                out.push(format!("pedestrian `{}` radius outside [0.25, 0.4]", p.id));
            }
        }
        for c in &self.cyclists {
            if !(c.walk_speed > 0.0 && c.walk_speed <= 5.0) {
                out.push(format!("cyclist `{}` speed outside (0, 5]", c.id));
            }
            if !in_range(c.radius, 0.25, 0.4) {
                out.push(format!("cyclist `{}` radius outside [0.25, 0.4]", c.id));
            }
        }
        for v in &self.vehicles {
            if !in_range(v.length, 3.5, 6.0) {
                out.push(format!("vehicle `{}` length outside [3.5, 6.0]", v.id));
            }
            if !(v.max_speed > 0.0 && v.accel > 0.0 && v.decel > 0.0) {
                out.push(format!(
                    "vehicle `{}` needs positive speed, accel and decel",
                    v.id
                ));
            }
        }
        for t in &self.trams {
            if !(t.length > 0.0 && t.max_speed > 0.0 && t.dwell >= 0.0) {
                out.push(format!("tram `{}` has non-positive parameters", t.id));
            }
        }
        out
    }

    pub fn pedestrian(&self, archetype: u32, cyclist: bool) -> &PedestrianArchetype {
        if cyclist {
            &self.cyclists[archetype as usize]
        } else {
            &self.pedestrians[archetype as usize]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn catalog(peds: usize, vehicles: usize) -> ArchetypeCatalog {
        ArchetypeCatalog {
            pedestrians: (0..peds)
                .map(|i| PedestrianArchetype {
                    id: format!("p{i}"),
                    walk_speed: 1.4,
                    radius: 0.3,
                })
                .collect(),
            cyclists: vec![],
            vehicles: (0..vehicles)
                .map(|i| VehicleArchetype {
                    id: format!("v{i}"),
                    length: 4.5,
                    max_speed: 14.0,
                    accel: 2.0,
                    decel: 4.0,
                })
                .collect(),
            trams: vec![TramArchetype {
                id: "t".into(),
                length: 30.0,
                max_speed: 14.0,
                dwell: 20.0,
            }],
        }
    }

    #[test]
    fn cardinalities_are_enforced() {
        assert!(catalog(107, 19).validate().is_empty());
        let short = catalog(106, 19).validate();
        assert_eq!(short.len(), 1);
        assert!(short[0].contains("107"));
        assert!(catalog(107, 20).validate()[0].contains("19"));
    }

    #[test]
    fn ranges_are_enforced() {
        let mut c = catalog(107, 19);
        c.pedestrians[3].walk_speed = 2.0;
        c.vehicles[0].length = 7.0;
        assert_eq!(c.validate().len(), 2);
    }
}
